#include "imitlab/kernels.hpp"

#include "imitlab/discriminator.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace imitlab::kernels {

namespace {

void check(const Support& support, const Mat& shifted, const Mat& probs) {
  if (shifted.rows() != probs.rows() || shifted.cols() != probs.cols() ||
      probs.cols() != support.bins) {
    throw ShapeError("project_rows: shape mismatch");
  }
}

}  // namespace

Mat project_rows_serial(const Support& support, const Mat& shifted, const Mat& probs) {
  check(support, shifted, probs);
  Mat out(probs.rows(), support.bins);
  for (Eigen::Index b = 0; b < probs.rows(); ++b) {
    out.row(b) = project(support, shifted.row(b).transpose(), probs.row(b).transpose()).transpose();
  }
  return out;
}

Mat project_rows(const Support& support, const Mat& shifted, const Mat& probs) {
  check(support, shifted, probs);
  Mat out(probs.rows(), support.bins);
  const long n = static_cast<long>(probs.rows());
#pragma omp parallel for schedule(static) if (n >= 512)
  for (long b = 0; b < n; ++b) {
    out.row(b) = project(support, shifted.row(b).transpose(), probs.row(b).transpose()).transpose();
  }
  return out;
}

Vec reward_rows_serial(const Vec& scores, double eps) {
  Vec out(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) out[i] = reward_from_score(scores[i], eps);
  return out;
}

Vec reward_rows(const Vec& scores, double eps) {
  Vec out(scores.size());
  const long n = static_cast<long>(scores.size());
#pragma omp parallel for schedule(static) if (n >= 4096)
  for (long i = 0; i < n; ++i) out[i] = reward_from_score(scores[i], eps);
  return out;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace imitlab::kernels
