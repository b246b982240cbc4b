#pragma once

#include <cstdint>

#include "godecf/data.hpp"

namespace godecf {

/// Random raw log: each (user, item) pair is present with probability
/// `density`, with random integer timestamps.
InteractionLog random_log(Index n_users, Index n_items, double density, std::uint64_t seed);

/// Random split with a connected-enough train graph: every user has at least
/// one train item and one non-positive item, every item at least one train
/// user, and validation/test items lie outside the user's train set.
SplitDataset random_split(Index n_users, Index n_items, double density, std::uint64_t seed);

/// Two disjoint communities of three users and five items each. Within a
/// community, every user's validation item is the one its neighbours train on
/// most, so a collaborative model can rank it first.
InteractionLog separable_toy_log();

}  // namespace godecf
