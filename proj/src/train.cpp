#include "godecf/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace godecf {

TripletBatch TripletBatch::slice(std::size_t begin, std::size_t end) const {
  TripletBatch out;
  out.users.assign(users.begin() + begin, users.begin() + end);
  out.pos_items.assign(pos_items.begin() + begin, pos_items.begin() + end);
  out.neg_items.assign(neg_items.begin() + begin, neg_items.begin() + end);
  return out;
}

TripletSampler::TripletSampler(const SplitDataset& ds) : n_items_(ds.n_items), positives_(ds.sorted_train()) {
  interactions_.reserve(ds.train_size());
  for (Index u = 0; u < ds.n_users; ++u) {
    auto& items = positives_[u];
    items.erase(std::unique(items.begin(), items.end()), items.end());
    if (items.empty()) throw DataError("user " + std::to_string(u) + " has no train interactions");
    if (static_cast<Index>(items.size()) >= n_items_) {
      throw DataError("user " + std::to_string(u) + " has every item as a train positive; no negative exists");
    }
    for (Index i : ds.train[u]) interactions_.emplace_back(u, i);
  }
}

bool TripletSampler::is_positive(Index user, Index item) const {
  const auto& items = positives_[user];
  return std::binary_search(items.begin(), items.end(), item);
}

Index TripletSampler::draw_negative(Index user, Rng& rng) const {
  std::uniform_int_distribution<Index> pick(0, n_items_ - 1);
  Index item = pick(rng);
  while (is_positive(user, item)) item = pick(rng);
  return item;
}

TripletBatch TripletSampler::epoch(Rng& rng) const {
  std::vector<std::size_t> order(interactions_.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  // Fisher-Yates with an explicit distribution keeps the order reproducible for a seed.
  for (std::size_t k = order.size(); k > 1; --k) {
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    std::swap(order[k - 1], order[pick(rng)]);
  }
  TripletBatch batch;
  batch.users.reserve(order.size());
  batch.pos_items.reserve(order.size());
  batch.neg_items.reserve(order.size());
  for (std::size_t k : order) {
    auto [u, i] = interactions_[k];
    batch.users.push_back(u);
    batch.pos_items.push_back(i);
    batch.neg_items.push_back(draw_negative(u, rng));
  }
  return batch;
}

TripletBatch TripletSampler::sample(std::size_t count, Rng& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, interactions_.size() - 1);
  TripletBatch batch;
  for (std::size_t k = 0; k < count; ++k) {
    auto [u, i] = interactions_[pick(rng)];
    batch.users.push_back(u);
    batch.pos_items.push_back(i);
    batch.neg_items.push_back(draw_negative(u, rng));
  }
  return batch;
}

TripletBatch sample_triplets(const SplitDataset& ds, std::size_t count, Rng& rng) {
  return TripletSampler(ds).sample(count, rng);
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double bpr_loss(std::span<const double> pos_scores, std::span<const double> neg_scores, double params_l2,
                double l2_lambda) {
  if (pos_scores.size() != neg_scores.size()) throw DimensionError("bpr_loss: score arrays differ in length");
  double total = 0.0;
  for (std::size_t k = 0; k < pos_scores.size(); ++k) total += softplus(neg_scores[k] - pos_scores[k]);
  const double data_term = pos_scores.empty() ? 0.0 : total / static_cast<double>(pos_scores.size());
  return data_term + l2_lambda * params_l2;
}

const char* to_string(ModelKind kind) { return kind == ModelKind::GodeCF ? "gode_cf" : "lightgcn"; }

std::size_t Recommender::parameter_count() const {
  return static_cast<std::size_t>(state.e0.size()) + (trains_hop_weights() ? state.hop_weights.size() : 0);
}

EmbeddingMatrix Recommender::forward(SolverTape<double>* tape) const {
  if (kind == ModelKind::GodeCF) return integrate(state, tape);
  return lightgcn_forward<double>(state.e0, state.graph(), lightgcn_layers, layer_weights, state.threads);
}

GradientSet<double> Recommender::backward(const SolverTape<double>& tape, const EmbeddingMatrix& grad_final) const {
  if (kind == ModelKind::GodeCF) return integrate_backward(state, tape, grad_final);
  GradientSet<double> grads;
  grads.grad_e0 = lightgcn_backward<double>(grad_final, state.graph(), lightgcn_layers, layer_weights, state.threads);
  return grads;
}

std::vector<double> Recommender::flat_parameters() const {
  std::vector<double> flat(state.e0.data(), state.e0.data() + state.e0.size());
  if (trains_hop_weights()) flat.insert(flat.end(), state.hop_weights.begin(), state.hop_weights.end());
  return flat;
}

void Recommender::set_flat_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw DimensionError("parameter vector has the wrong length");
  std::copy_n(flat.begin(), state.e0.size(), state.e0.data());
  if (trains_hop_weights()) {
    std::copy(flat.begin() + state.e0.size(), flat.end(), state.hop_weights.begin());
  }
}

Recommender make_recommender(const SplitDataset& ds, ModelKind kind, const SolverConfig& solver, Index dims,
                             double init_std, std::uint64_t seed, int lightgcn_layers, int threads) {
  Recommender model;
  model.kind = kind;
  model.n_users = ds.n_users;
  model.lightgcn_layers = lightgcn_layers;
  model.layer_weights = uniform_layer_weights<double>(lightgcn_layers);
  model.state.adjacency = std::make_shared<const Adjacency>(build_adjacency<double>(ds));
  model.state.e0 = init_embeddings(ds.n_users + ds.n_items, dims, init_std, seed);
  model.state.solver = solver;
  model.state.hop_weights.assign(solver.n_hops, 1.0);
  model.state.threads = threads;
  if (kind == ModelKind::GodeCF) model.state.validate();
  return model;
}

namespace {

void check_batch(const Recommender& model, const TripletBatch& batch) {
  if (batch.users.size() != batch.pos_items.size() || batch.users.size() != batch.neg_items.size()) {
    throw DimensionError("triplet batch arrays differ in length");
  }
  if (batch.users.empty()) throw DimensionError("empty triplet batch");
  const Index n_items = model.state.e0.rows() - model.n_users;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (batch.users[k] < 0 || batch.users[k] >= model.n_users || batch.pos_items[k] < 0 ||
        batch.pos_items[k] >= n_items || batch.neg_items[k] < 0 || batch.neg_items[k] >= n_items) {
      throw DimensionError("triplet id out of range");
    }
  }
}

// Mean over the batch of the squared norms of the e0 rows each triplet touches.
double sampled_l2(const Recommender& model, const TripletBatch& batch) {
  const auto& e0 = model.state.e0;
  const Index n = model.n_users;
  double total = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    total += e0.row(batch.users[k]).squaredNorm() + e0.row(n + batch.pos_items[k]).squaredNorm() +
             e0.row(n + batch.neg_items[k]).squaredNorm();
  }
  return total / static_cast<double>(batch.size());
}

double loss_from_final(const Recommender& model, const TripletBatch& batch, const EmbeddingMatrix& e_final,
                       double l2_lambda) {
  const Index n = model.n_users;
  std::vector<double> pos(batch.size()), neg(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    auto u = e_final.row(batch.users[k]);
    pos[k] = u.dot(e_final.row(n + batch.pos_items[k]));
    neg[k] = u.dot(e_final.row(n + batch.neg_items[k]));
  }
  return bpr_loss(pos, neg, sampled_l2(model, batch), l2_lambda);
}

}  // namespace

double batch_loss(const Recommender& model, const TripletBatch& batch, double l2_lambda) {
  check_batch(model, batch);
  return loss_from_final(model, batch, model.forward(), l2_lambda);
}

GradientSet<double> bpr_backward(const Recommender& model, const TripletBatch& batch,
                                 const SolverTape<double>* tape, const EmbeddingMatrix& e_final,
                                 double l2_lambda) {
  if (model.kind == ModelKind::GodeCF && !tape) throw std::logic_error("bpr_backward: missing solver tape");
  check_batch(model, batch);
  const Index n = model.n_users;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  EmbeddingMatrix grad_final = EmbeddingMatrix::Zero(e_final.rows(), e_final.cols());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Index u = batch.users[k];
    const Index p = n + batch.pos_items[k];
    const Index q = n + batch.neg_items[k];
    const double margin = e_final.row(u).dot(e_final.row(p)) - e_final.row(u).dot(e_final.row(q));
    // d/dx softplus(-x) = -sigmoid(-x)
    const double coeff = -inv_batch / (1.0 + std::exp(margin));
    grad_final.row(u) += coeff * (e_final.row(p) - e_final.row(q));
    grad_final.row(p) += coeff * e_final.row(u);
    grad_final.row(q) -= coeff * e_final.row(u);
  }

  static const SolverTape<double> no_tape{};
  GradientSet<double> grads = model.backward(tape ? *tape : no_tape, grad_final);

  const double l2_scale = 2.0 * l2_lambda * inv_batch;
  const auto& e0 = model.state.e0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    for (Index row : {batch.users[k], n + batch.pos_items[k], n + batch.neg_items[k]}) {
      grads.grad_e0.row(row) += l2_scale * e0.row(row);
    }
  }
  return grads;
}

BatchObjective batch_objective(const Recommender& model, const TripletBatch& batch, double l2_lambda) {
  check_batch(model, batch);
  SolverTape<double> tape;
  EmbeddingMatrix e_final = model.forward(&tape);
  BatchObjective out;
  out.loss = loss_from_final(model, batch, e_final, l2_lambda);
  out.grads = bpr_backward(model, batch, &tape, e_final, l2_lambda);
  return out;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& opt, double lr) {
  if (params.size() != grads.size()) throw DimensionError("adam_step: params and grads differ in length");
  if (opt.first_moment.size() != params.size()) {
    if (opt.step_count != 0) throw DimensionError("adam_step: optimizer state has the wrong size");
    opt.first_moment.assign(params.size(), 0.0);
    opt.second_moment.assign(params.size(), 0.0);
  }
  ++opt.step_count;
  const auto t = static_cast<double>(opt.step_count);
  const double bias1 = 1.0 - std::pow(opt.beta1, t);
  const double bias2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    double& m = opt.first_moment[k];
    double& v = opt.second_moment[k];
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g * g;
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    params[k] -= lr * m_hat / (std::sqrt(v_hat) + opt.epsilon);
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(l2_lambda >= 0.0)) throw std::invalid_argument("l2_lambda must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (max_epochs < 0) throw std::invalid_argument("max_epochs must be >= 0");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
}

namespace {

std::vector<double> flatten_gradients(const Recommender& model, const GradientSet<double>& grads) {
  std::vector<double> flat(grads.grad_e0.data(), grads.grad_e0.data() + grads.grad_e0.size());
  if (model.trains_hop_weights()) {
    flat.insert(flat.end(), grads.grad_hop_weights.begin(), grads.grad_hop_weights.end());
  }
  return flat;
}

}  // namespace

FitResult fit(const SplitDataset& ds, const Recommender& initial, const TrainConfig& cfg, const EvalHook& eval_hook) {
  cfg.validate();
  FitResult result;
  result.best = initial;
  if (cfg.max_epochs == 0) return result;

  EvalHook hook = eval_hook;
  if (!hook) {
    hook = [&ds, threads = initial.state.threads](const FinalEmbeddings& fe) {
      const int n[] = {20};
      return evaluate(fe, ds, EvalMode::Validation, n, {.threads = threads});
    };
  }

  const TripletSampler sampler(ds);
  Rng rng(cfg.seed);
  Recommender model = initial;
  AdamState opt(model.parameter_count());
  int evaluations_since_best = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const TripletBatch triplets = sampler.epoch(rng);
    double loss_sum = 0.0;
    bool diverged = false;
    try {
      for (std::size_t begin = 0; begin < triplets.size(); begin += cfg.batch_size) {
        const std::size_t end = std::min(triplets.size(), begin + cfg.batch_size);
        const TripletBatch batch = triplets.slice(begin, end);
        BatchObjective objective = batch_objective(model, batch, cfg.l2_lambda);
        if (!std::isfinite(objective.loss)) {
          diverged = true;
          break;
        }
        loss_sum += objective.loss * static_cast<double>(batch.size());
        auto params = model.flat_parameters();
        adam_step(params, flatten_gradients(model, objective.grads), opt, cfg.learning_rate);
        model.set_flat_parameters(params);
      }
    } catch (const DivergenceError&) {
      diverged = true;
    }
    if (diverged) {
      result.diverged = true;
      break;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.loss = loss_sum / static_cast<double>(triplets.size());
    const bool evaluate_now = epoch % cfg.eval_every == 0 || epoch == cfg.max_epochs;
    bool improved = false;
    if (evaluate_now) {
      MetricsReport report;
      try {
        report = hook(model.final_embeddings());
      } catch (const DivergenceError&) {
        result.diverged = true;
        break;
      }
      record.recall20 = report.recall_at(20);
      record.ndcg20 = report.ndcg_at(20);
      if (*record.ndcg20 > result.best_ndcg20) {
        improved = true;
        result.best_ndcg20 = *record.ndcg20;
        result.best_epoch = epoch;
        result.best = model;
        evaluations_since_best = 0;
      } else {
        ++evaluations_since_best;
      }
    }
    if (cfg.record_time) {
      record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    result.history.push_back(record);
    if (!improved && evaluations_since_best >= cfg.patience) break;
  }
  return result;
}

void write_training_log(std::ostream& out, std::span<const EpochRecord> history, bool with_time) {
  auto old_precision = out.precision(10);
  out << "epoch,loss,recall20,ndcg20,seconds\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << r.loss << ',';
    if (r.recall20) out << *r.recall20;
    out << ',';
    if (r.ndcg20) out << *r.ndcg20;
    out << ',' << (with_time ? r.seconds : 0.0) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace godecf
