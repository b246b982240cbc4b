#pragma once

#include <cstdint>
#include <vector>

#include "godecf/train.hpp"

namespace godecf {

struct GradCheckReport {
  ModelKind kind = ModelKind::GodeCF;
  SolverConfig solver;
  std::size_t coordinates = 0;
  /// max over coordinates of |analytic - fd| / max(1, |fd|)
  double max_relative_error = 0.0;
};

/// Compares the analytic BPR gradient against central finite differences of
/// batch_loss in every parameter coordinate.
GradCheckReport gradient_check(const Recommender& model, const TripletBatch& batch, double l2_lambda,
                               double step = 1e-6);

/// Runs gradient_check on a random small instance for every combination of
/// {euler, rk4} x n_hops {1,2,3} x weights {off, on}.
std::vector<GradCheckReport> gradient_check_suite(std::uint64_t seed, Index n_users = 6, Index n_items = 8,
                                                  Index dims = 4, int steps = 2);

}  // namespace godecf
