#pragma once

#include <array>
#include <string>
#include <vector>

namespace godecf {

enum class SolverMethod { Euler, RK4 };

std::string to_string(SolverMethod method);
SolverMethod parse_solver_method(const std::string& name);

/// Butcher tableau of an explicit Runge-Kutta scheme with at most four stages.
struct ExplicitTableau {
  int stages = 1;
  std::array<std::array<double, 4>, 4> a{};  ///< strictly lower triangular
  std::array<double, 4> b{};
};

inline const ExplicitTableau& tableau(SolverMethod method) {
  static const ExplicitTableau euler{1, {}, {1.0, 0.0, 0.0, 0.0}};
  static const ExplicitTableau rk4{4,
                                   {{{0.0, 0.0, 0.0, 0.0},
                                     {0.5, 0.0, 0.0, 0.0},
                                     {0.0, 0.5, 0.0, 0.0},
                                     {0.0, 0.0, 1.0, 0.0}}},
                                   {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0}};
  return method == SolverMethod::Euler ? euler : rk4;
}

/// One explicit step y <- y + h * sum_i b_i k_i of an autonomous system.
/// `derivative(y)` is evaluated once per stage, in stage order.
template <typename State, typename Derivative>
State explicit_step(SolverMethod method, const State& y, double h, Derivative&& derivative) {
  using S = typename State::Scalar;
  const auto& tab = tableau(method);
  std::vector<State> k;
  k.reserve(tab.stages);
  for (int i = 0; i < tab.stages; ++i) {
    if (i == 0) {
      k.push_back(derivative(y));
      continue;
    }
    State stage_input = y;
    for (int j = 0; j < i; ++j) {
      if (tab.a[i][j] != 0.0) stage_input += static_cast<S>(h * tab.a[i][j]) * k[j];
    }
    k.push_back(derivative(stage_input));
  }
  State next = y;
  for (int i = 0; i < tab.stages; ++i) next += static_cast<S>(h * tab.b[i]) * k[i];
  return next;
}

/// Integrates dy/dt = derivative(y) from t = 0 to t1 on a uniform grid.
template <typename State, typename Derivative>
State solve_fixed_grid(SolverMethod method, const State& y0, double t1, int steps,
                       Derivative&& derivative) {
  const double h = t1 / steps;
  State y = y0;
  for (int s = 0; s < steps; ++s) y = explicit_step(method, y, h, derivative);
  return y;
}

/// Reverse pass of solve_fixed_grid. Given the cotangent of y(t1), returns the
/// cotangent of y(0). `stage_vjp(step, stage, cotangent_of_k)` must return the
/// cotangent of that stage's input, i.e. J^T applied at the recorded stage input.
/// Stages are visited in exact reverse order of the forward pass.
template <typename State, typename StageVjp>
State solve_fixed_grid_adjoint(SolverMethod method, double t1, int steps, const State& grad_final,
                               StageVjp&& stage_vjp) {
  using S = typename State::Scalar;
  const auto& tab = tableau(method);
  const double h = t1 / steps;
  State grad = grad_final;
  std::vector<State> grad_k(tab.stages);
  for (int s = steps - 1; s >= 0; --s) {
    for (int i = 0; i < tab.stages; ++i) grad_k[i] = static_cast<S>(h * tab.b[i]) * grad;
    State grad_prev = grad;
    for (int i = tab.stages - 1; i >= 0; --i) {
      State grad_stage = stage_vjp(s, i, grad_k[i]);
      for (int j = 0; j < i; ++j) {
        if (tab.a[i][j] != 0.0) grad_k[j] += static_cast<S>(h * tab.a[i][j]) * grad_stage;
      }
      grad_prev += grad_stage;
    }
    grad = std::move(grad_prev);
  }
  return grad;
}

}  // namespace godecf
