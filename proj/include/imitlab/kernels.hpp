// Row-parallel batch kernels. Each has an OpenMP version used by the learner
// and a serial reference kept for tests and benchmarks; rows are independent,
// so both produce bit-identical results.
#pragma once

#include "imitlab/agent.hpp"

namespace imitlab::kernels {

// Row b of the result is project(support, shifted.row(b), probs.row(b)).
Mat project_rows_serial(const Support& support, const Mat& shifted, const Mat& probs);
Mat project_rows(const Support& support, const Mat& shifted, const Mat& probs);

// -log(1 - clip(d)) elementwise.
Vec reward_rows_serial(const Vec& scores, double eps);
Vec reward_rows(const Vec& scores, double eps);

int max_threads();

}  // namespace imitlab::kernels
