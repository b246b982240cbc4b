#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "godecf/data.hpp"
#include "godecf/eval.hpp"
#include "godecf/model.hpp"

namespace godecf {

using Rng = std::mt19937_64;

struct TripletBatch {
  std::vector<Index> users;
  std::vector<Index> pos_items;
  std::vector<Index> neg_items;

  std::size_t size() const { return users.size(); }
  TripletBatch slice(std::size_t begin, std::size_t end) const;
};

/// Uniform BPR sampler. Positives are train interactions; negatives are drawn
/// uniformly over items and redrawn while they hit a train positive.
class TripletSampler {
 public:
  explicit TripletSampler(const SplitDataset& ds);

  /// One triplet per train interaction, in shuffled order.
  TripletBatch epoch(Rng& rng) const;
  /// `count` triplets whose positives are drawn uniformly from train interactions.
  TripletBatch sample(std::size_t count, Rng& rng) const;

  Index draw_negative(Index user, Rng& rng) const;
  bool is_positive(Index user, Index item) const;

 private:
  Index n_items_;
  std::vector<std::vector<Index>> positives_;  // sorted
  std::vector<std::pair<Index, Index>> interactions_;
};

TripletBatch sample_triplets(const SplitDataset& ds, std::size_t count, Rng& rng);

/// -mean(ln sigmoid(pos - neg)) + l2_lambda * params_l2, using the stable
/// softplus form.
double bpr_loss(std::span<const double> pos_scores, std::span<const double> neg_scores, double params_l2,
                double l2_lambda);

double softplus(double x);

enum class ModelKind { GodeCF, LightGCN };

const char* to_string(ModelKind kind);

/// A trainable recommender: either the graph-ODE model or the LightGCN
/// baseline. Both share the initial embeddings and the graph in `state`.
struct Recommender {
  ModelKind kind = ModelKind::GodeCF;
  ModelState<double> state;
  Index n_users = 0;
  int lightgcn_layers = 2;
  std::vector<double> layer_weights;  ///< fixed LightGCN combination weights

  bool trains_hop_weights() const { return kind == ModelKind::GodeCF && state.solver.use_weights; }
  std::size_t parameter_count() const;

  EmbeddingMatrix forward(SolverTape<double>* tape = nullptr) const;
  GradientSet<double> backward(const SolverTape<double>& tape, const EmbeddingMatrix& grad_final) const;
  FinalEmbeddings final_embeddings() const { return {forward(), n_users}; }

  /// Parameters flattened as e0 (row-major) followed by hop weights.
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> flat);
};

/// Fresh model over the train graph of `ds`: e0 ~ N(0, init_std^2), hop
/// weights at 1, LightGCN layers uniformly weighted.
Recommender make_recommender(const SplitDataset& ds, ModelKind kind, const SolverConfig& solver, Index dims,
                             double init_std, std::uint64_t seed, int lightgcn_layers = 2, int threads = 1);

struct BatchObjective {
  double loss = 0.0;
  GradientSet<double> grads;
};

/// BPR loss of a batch under the full forward pass.
double batch_loss(const Recommender& model, const TripletBatch& batch, double l2_lambda);

/// Loss and exact gradient: forward with a tape, BPR cotangent on the final
/// embeddings, reverse pass through the solver, plus the L2 term on the
/// sampled e0 rows.
BatchObjective batch_objective(const Recommender& model, const TripletBatch& batch, double l2_lambda);

/// Gradient given an already-recorded forward pass.
GradientSet<double> bpr_backward(const Recommender& model, const TripletBatch& batch,
                                 const SolverTape<double>* tape, const EmbeddingMatrix& e_final,
                                 double l2_lambda);

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(std::size_t n = 0) : first_moment(n, 0.0), second_moment(n, 0.0) {}
};

/// Bias-corrected Adam update in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& opt, double lr);

struct TrainConfig {
  double learning_rate = 0.001;
  double l2_lambda = 1e-4;
  std::size_t batch_size = 2048;
  int max_epochs = 1000;
  int patience = 50;  ///< evaluations without improvement before stopping
  std::uint64_t seed = 2024;
  int eval_every = 1;
  bool record_time = true;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  std::optional<double> recall20;
  std::optional<double> ndcg20;
  double seconds = 0.0;
};

struct FitResult {
  std::vector<EpochRecord> history;
  Recommender best;
  int best_epoch = 0;
  double best_ndcg20 = -1.0;
  bool diverged = false;
};

using EvalHook = std::function<MetricsReport(const FinalEmbeddings&)>;

/// Minibatch BPR training with Adam and early stopping on validation NDCG@20.
/// Without a hook, validation metrics come from evaluate(..., Validation, {20}).
FitResult fit(const SplitDataset& ds, const Recommender& initial, const TrainConfig& cfg,
              const EvalHook& eval_hook = {});

/// "epoch,loss,recall20,ndcg20,seconds"; seconds are written as 0 when
/// `with_time` is false so logs can be compared byte for byte.
void write_training_log(std::ostream& out, std::span<const EpochRecord> history, bool with_time = true);

}  // namespace godecf
