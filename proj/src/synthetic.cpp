#include "godecf/synthetic.hpp"

#include <algorithm>
#include <random>
#include <string>

namespace godecf {

InteractionLog random_log(Index n_users, Index n_items, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(density);
  std::uniform_int_distribution<std::int64_t> when(0, 1000);
  InteractionLog log;
  for (Index u = 0; u < n_users; ++u) {
    for (Index i = 0; i < n_items; ++i) {
      if (keep(rng)) log.interactions.push_back({"u" + std::to_string(u), "i" + std::to_string(i), when(rng)});
    }
  }
  return log;
}

SplitDataset random_split(Index n_users, Index n_items, double density, std::uint64_t seed) {
  if (n_users < 1 || n_items < 4) throw DimensionError("random_split needs >= 1 user and >= 4 items");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(density);
  std::uniform_int_distribution<Index> any_item(0, n_items - 1);
  std::uniform_int_distribution<Index> any_user(0, n_users - 1);
  const auto max_train = static_cast<std::size_t>(n_items - 2);

  if (static_cast<std::size_t>(n_users) * max_train < static_cast<std::size_t>(n_items)) {
    throw DimensionError("random_split: too few users to cover every item");
  }

  std::vector<std::vector<char>> member(n_users, std::vector<char>(n_items, 0));
  std::vector<std::size_t> size(n_users, 0);
  // Every item gets one train user first, then users pick up random extras.
  for (Index i = 0; i < n_items; ++i) {
    Index u = any_user(rng);
    while (size[u] >= max_train) u = any_user(rng);
    member[u][i] = 1;
    ++size[u];
  }
  for (Index u = 0; u < n_users; ++u) {
    for (Index i = 0; i < n_items; ++i) {
      if (!member[u][i] && size[u] < max_train && keep(rng)) {
        member[u][i] = 1;
        ++size[u];
      }
    }
    if (size[u] == 0) {
      member[u][any_item(rng)] = 1;
      size[u] = 1;
    }
  }

  SplitDataset ds;
  ds.n_users = n_users;
  ds.n_items = n_items;
  for (Index u = 0; u < n_users; ++u) ds.user_keys.push_back("u" + std::to_string(u));
  for (Index i = 0; i < n_items; ++i) ds.item_keys.push_back("i" + std::to_string(i));
  for (Index u = 0; u < n_users; ++u) {
    std::vector<Index> train, outside;
    for (Index i = 0; i < n_items; ++i) (member[u][i] ? train : outside).push_back(i);
    std::shuffle(train.begin(), train.end(), rng);
    std::shuffle(outside.begin(), outside.end(), rng);
    ds.train.push_back(std::move(train));
    ds.validation.push_back(outside[0]);
    ds.test.push_back(outside[1]);
  }
  return ds;
}

InteractionLog separable_toy_log() {
  struct Row {
    const char* user;
    const char* item;
    std::int64_t t;
  };
  // Per community: h1/h2 are hub items, t1..t3 tail items. The last two
  // events of each user become validation and test.
  static const Row pattern[] = {
      {"0", "h2", 1}, {"0", "t1", 2}, {"0", "t2", 3}, {"0", "h1", 10}, {"0", "t3", 11},
      {"1", "h1", 1}, {"1", "t2", 2}, {"1", "t3", 3}, {"1", "h2", 10}, {"1", "t1", 11},
      {"2", "h1", 1}, {"2", "h2", 2}, {"2", "t2", 10}, {"2", "t1", 11},
  };
  InteractionLog log;
  for (std::string community : {"a", "b"}) {
    for (const auto& row : pattern) {
      log.interactions.push_back({community + row.user, community + "_" + row.item, row.t});
    }
  }
  return log;
}

}  // namespace godecf
