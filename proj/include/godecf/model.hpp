#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "godecf/graph.hpp"
#include "godecf/solver.hpp"
#include "godecf/types.hpp"

namespace godecf {

struct SolverConfig {
  SolverMethod method = SolverMethod::Euler;
  double t1 = 0.9;  ///< end time; integration always starts at 0
  int steps = 1;
  int n_hops = 2;  ///< propagation hops inside the derivative
  bool use_weights = false;

  double step_size() const { return t1 / steps; }

  void validate() const {
    if (!(t1 > 0.0) || !std::isfinite(t1)) throw DimensionError("solver t1 must be finite and > 0");
    if (steps < 1) throw DimensionError("solver steps must be >= 1");
    if (n_hops < 1) throw DimensionError("solver n_hops must be >= 1");
    const double h = step_size();
    if (!(h > 0.0) || !std::isfinite(h)) throw DimensionError("solver step size t1/steps is not positive");
  }
};

/// Trainable state of the graph ODE model: initial embeddings E(0), optional
/// per-hop scalar weights, and the (shared, immutable) propagation graph.
template <typename Scalar>
struct ModelState {
  Embedding<Scalar> e0;
  std::vector<Scalar> hop_weights;
  std::shared_ptr<const SparseAdjacency<Scalar>> adjacency;
  SolverConfig solver;
  int threads = 1;

  const SparseAdjacency<Scalar>& graph() const { return *adjacency; }

  void validate() const {
    solver.validate();
    if (!adjacency) throw DimensionError("model state has no adjacency");
    if (e0.rows() != adjacency->rows()) {
      throw DimensionError("e0 has " + std::to_string(e0.rows()) + " rows, graph has " +
                           std::to_string(adjacency->rows()) + " nodes");
    }
    if (solver.use_weights && hop_weights.size() != static_cast<std::size_t>(solver.n_hops)) {
      throw DimensionError("hop_weights length must equal n_hops");
    }
  }
};

/// Intermediates of one forward integration: for every (step, stage) the
/// inputs H_0..H_{n-1} of each propagation hop (H_0 is the stage input).
template <typename Scalar>
struct SolverTape {
  int stages = 0;
  std::vector<std::vector<Embedding<Scalar>>> hop_inputs;

  const std::vector<Embedding<Scalar>>& at(int step, int stage) const {
    return hop_inputs.at(static_cast<std::size_t>(step) * stages + stage);
  }
};

template <typename Scalar>
struct GradientSet {
  Embedding<Scalar> grad_e0;
  std::vector<Scalar> grad_hop_weights;
};

/// g(E) = P_n(E) - E, where P_n applies n weighted propagation hops.
/// With weights off this is (A^n - I) E. If `record` is set, it receives the
/// hop inputs needed by derivative_vjp.
template <typename Scalar>
Embedding<Scalar> derivative(const Embedding<Scalar>& embeddings, const ModelState<Scalar>& state,
                             std::vector<Embedding<Scalar>>* record = nullptr) {
  const auto& adjacency = state.graph();
  if (embeddings.rows() != adjacency.rows()) {
    throw DimensionError("derivative: embedding rows do not match graph size");
  }
  if (record) {
    record->clear();
    record->push_back(embeddings);
  }
  Embedding<Scalar> hop = embeddings;
  Embedding<Scalar> next;
  for (int k = 0; k < state.solver.n_hops; ++k) {
    spmm_into(adjacency, hop, next, state.threads);
    if (state.solver.use_weights) next *= state.hop_weights[k];
    hop.swap(next);
    if (record && k + 1 < state.solver.n_hops) record->push_back(hop);
  }
  hop -= embeddings;
  return hop;
}

/// Transpose of derivative() at the recorded hop inputs. Accumulates hop
/// weight gradients into `grad_weights` when weights are enabled.
template <typename Scalar>
Embedding<Scalar> derivative_vjp(const Embedding<Scalar>& cotangent,
                                 const std::vector<Embedding<Scalar>>& hop_inputs,
                                 const ModelState<Scalar>& state, std::vector<Scalar>& grad_weights) {
  const auto& adjacency = state.graph();
  Embedding<Scalar> back = cotangent;
  Embedding<Scalar> next;
  for (int k = state.solver.n_hops - 1; k >= 0; --k) {
    // The adjacency is symmetric, so A^T = A.
    spmm_into(adjacency, back, next, state.threads);
    if (state.solver.use_weights) {
      grad_weights[k] += (next.array() * hop_inputs[k].array()).sum();
      next *= state.hop_weights[k];
    }
    back.swap(next);
  }
  back -= cotangent;
  return back;
}

namespace detail {

template <typename Scalar>
void check_finite(const Embedding<Scalar>& e, int step) {
  if (!e.allFinite()) {
    throw DivergenceError("divergent integration: non-finite values after step " + std::to_string(step + 1));
  }
}

}  // namespace detail

/// Integrates dE/dt = g(E) from E(0) = e0 to t1. The terminal state is the
/// final embedding. Pass a tape to record what integrate_backward needs.
template <typename Scalar>
Embedding<Scalar> integrate(const ModelState<Scalar>& state, SolverTape<Scalar>* tape = nullptr) {
  state.validate();
  const auto& cfg = state.solver;
  if (tape) {
    tape->stages = tableau(cfg.method).stages;
    tape->hop_inputs.clear();
    tape->hop_inputs.reserve(static_cast<std::size_t>(cfg.steps) * tape->stages);
  }
  auto g = [&](const Embedding<Scalar>& y) {
    if (!tape) return derivative(y, state);
    tape->hop_inputs.emplace_back();
    return derivative(y, state, &tape->hop_inputs.back());
  };
  Embedding<Scalar> e = state.e0;
  const double h = cfg.step_size();
  for (int s = 0; s < cfg.steps; ++s) {
    e = explicit_step(cfg.method, e, h, g);
    detail::check_finite(e, s);
  }
  return e;
}

/// Exact reverse-mode gradient through the discrete solver stages, given the
/// cotangent of the final embeddings.
template <typename Scalar>
GradientSet<Scalar> integrate_backward(const ModelState<Scalar>& state, const SolverTape<Scalar>& tape,
                                       const Embedding<Scalar>& grad_final) {
  const auto& cfg = state.solver;
  const auto expected = static_cast<std::size_t>(cfg.steps) * tableau(cfg.method).stages;
  if (tape.hop_inputs.size() != expected) {
    throw std::logic_error("solver tape is missing or belongs to a different configuration");
  }
  if (grad_final.rows() != state.e0.rows() || grad_final.cols() != state.e0.cols()) {
    throw DimensionError("integrate_backward: cotangent shape does not match e0");
  }
  GradientSet<Scalar> grads;
  grads.grad_hop_weights.assign(cfg.use_weights ? cfg.n_hops : 0, Scalar(0));
  grads.grad_e0 = solve_fixed_grid_adjoint(
      cfg.method, cfg.t1, cfg.steps, grad_final,
      [&](int step, int stage, const Embedding<Scalar>& cotangent) {
        return derivative_vjp(cotangent, tape.at(step, stage), state, grads.grad_hop_weights);
      });
  return grads;
}

/// LightGCN readout: E_k = A E_{k-1}, E_f = sum_l w_l E_l.
template <typename Scalar>
Embedding<Scalar> lightgcn_forward(const Embedding<Scalar>& e0, const SparseAdjacency<Scalar>& adjacency,
                                   int layers, std::span<const Scalar> layer_weights, int threads = 1) {
  if (layers < 0) throw DimensionError("lightgcn: layer count must be >= 0");
  if (layer_weights.size() != static_cast<std::size_t>(layers) + 1) {
    throw DimensionError("lightgcn: need layers + 1 combination weights");
  }
  if (e0.rows() != adjacency.rows()) throw DimensionError("lightgcn: e0 rows do not match graph size");
  Embedding<Scalar> combined = layer_weights[0] * e0;
  Embedding<Scalar> layer = e0;
  Embedding<Scalar> next;
  for (int l = 1; l <= layers; ++l) {
    spmm_into(adjacency, layer, next, threads);
    layer.swap(next);
    combined += layer_weights[l] * layer;
  }
  return combined;
}

/// Gradient of lightgcn_forward with respect to e0: sum_l w_l A^l G.
template <typename Scalar>
Embedding<Scalar> lightgcn_backward(const Embedding<Scalar>& grad_final, const SparseAdjacency<Scalar>& adjacency,
                                    int layers, std::span<const Scalar> layer_weights, int threads = 1) {
  return lightgcn_forward(grad_final, adjacency, layers, layer_weights, threads);
}

template <typename Scalar>
std::vector<Scalar> uniform_layer_weights(int layers) {
  return std::vector<Scalar>(static_cast<std::size_t>(layers) + 1, Scalar(1) / Scalar(layers + 1));
}

/// Terminal embeddings; rows [0, n_users) are users, the rest items.
struct FinalEmbeddings {
  EmbeddingMatrix e_final;
  Index n_users = 0;

  Index n_items() const { return e_final.rows() - n_users; }
  auto user(Index u) const { return e_final.row(u); }
  auto item(Index i) const { return e_final.row(n_users + i); }
};

/// score(u, i) = <e_final[u], e_final[N + i]>.
std::vector<double> predict_scores(const FinalEmbeddings& fe, Index user, std::span<const Index> items);

/// i.i.d. N(0, stddev^2) entries from a seeded 64-bit Mersenne Twister.
EmbeddingMatrix init_embeddings(Index rows, Index dims, double stddev, std::uint64_t seed);

/// Text snapshot: "rows dims" header, then one row per line in shortest
/// round-trip decimal form.
void write_embedding_text(std::ostream& out, const EmbeddingMatrix& e);
EmbeddingMatrix read_embedding_text(std::istream& in);
/// Binary snapshot: int64 rows, int64 dims, then row-major float64, little-endian.
void write_embedding_binary(std::ostream& out, const EmbeddingMatrix& e);
EmbeddingMatrix read_embedding_binary(std::istream& in);

}  // namespace godecf
