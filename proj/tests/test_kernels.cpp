#include <gtest/gtest.h>

#include <random>

#include "imitlab/kernels.hpp"

namespace imitlab {
namespace {

TEST(Kernels, ParallelProjectionEqualsSerial) {
  const Support sup = Support::make(-50.0, 150.0, 21);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rows : {1, 7, 256, 1000}) {
    Mat shifted(rows, sup.bins), probs(rows, sup.bins);
    for (int b = 0; b < rows; ++b) {
      const double r = 300.0 * (u(rng) - 0.4), g = u(rng);
      double total = 0.0;
      for (int i = 0; i < sup.bins; ++i) {
        shifted(b, i) = r + g * sup.atoms[i];
        probs(b, i) = u(rng);
        total += probs(b, i);
      }
      probs.row(b) /= total;
    }
    const Mat a = kernels::project_rows_serial(sup, shifted, probs);
    const Mat p = kernels::project_rows(sup, shifted, probs);
    EXPECT_EQ(a, p);
    for (int b = 0; b < rows; ++b) {
      EXPECT_EQ(Vec(a.row(b).transpose()), project(sup, shifted.row(b).transpose(), probs.row(b).transpose()));
    }
  }
}

TEST(Kernels, ParallelRewardsEqualSerial) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec s(5000);
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = u(rng);
  s[0] = 0.0;
  s[1] = 1.0;
  EXPECT_EQ(kernels::reward_rows_serial(s, 1e-6), kernels::reward_rows(s, 1e-6));
  EXPECT_GE(kernels::max_threads(), 1);
}

}  // namespace
}  // namespace imitlab
