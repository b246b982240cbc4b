#include "godecf/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "godecf/synthetic.hpp"

namespace godecf {

GradCheckReport gradient_check(const Recommender& model, const TripletBatch& batch, double l2_lambda,
                               double step) {
  const BatchObjective objective = batch_objective(model, batch, l2_lambda);
  std::vector<double> analytic(objective.grads.grad_e0.data(),
                               objective.grads.grad_e0.data() + objective.grads.grad_e0.size());
  if (model.trains_hop_weights()) {
    analytic.insert(analytic.end(), objective.grads.grad_hop_weights.begin(),
                    objective.grads.grad_hop_weights.end());
  }

  GradCheckReport report;
  report.kind = model.kind;
  report.solver = model.state.solver;
  Recommender probe = model;
  std::vector<double> params = model.flat_parameters();
  report.coordinates = params.size();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double original = params[k];
    params[k] = original + step;
    probe.set_flat_parameters(params);
    const double up = batch_loss(probe, batch, l2_lambda);
    params[k] = original - step;
    probe.set_flat_parameters(params);
    const double down = batch_loss(probe, batch, l2_lambda);
    params[k] = original;
    const double numeric = (up - down) / (2.0 * step);
    const double error = std::abs(analytic[k] - numeric) / std::max(1.0, std::abs(numeric));
    report.max_relative_error = std::max(report.max_relative_error, error);
  }
  return report;
}

std::vector<GradCheckReport> gradient_check_suite(std::uint64_t seed, Index n_users, Index n_items, Index dims,
                                                  int steps) {
  const SplitDataset ds = random_split(n_users, n_items, 0.35, seed);
  Rng rng(seed + 1);
  const TripletBatch batch = TripletSampler(ds).epoch(rng);
  std::uniform_real_distribution<double> weight(0.6, 1.4);

  std::vector<GradCheckReport> reports;
  for (SolverMethod method : {SolverMethod::Euler, SolverMethod::RK4}) {
    for (int hops : {1, 2, 3}) {
      for (bool weights : {false, true}) {
        SolverConfig solver{.method = method, .t1 = 0.9, .steps = steps, .n_hops = hops, .use_weights = weights};
        Recommender model = make_recommender(ds, ModelKind::GodeCF, solver, dims, 0.5, seed + 2);
        if (weights) {
          for (auto& w : model.state.hop_weights) w = weight(rng);
        }
        reports.push_back(gradient_check(model, batch, 1e-2));
      }
    }
  }
  return reports;
}

}  // namespace godecf
