#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "godecf/types.hpp"

namespace godecf {

struct RawInteraction {
  std::string user_key;
  std::string item_key;
  std::int64_t timestamp = 0;
};

struct InteractionLog {
  std::vector<RawInteraction> interactions;

  std::size_t size() const { return interactions.size(); }
  std::size_t user_count() const;
  std::size_t item_count() const;
};

/// Column layout of a raw interaction file. Columns are zero-based; a zero
/// delimiter splits on any run of spaces or tabs.
struct FieldSpec {
  int user_column = 0;
  int item_column = 1;
  int timestamp_column = 2;
  char delimiter = '\0';
};

struct ParseStats {
  std::size_t parsed = 0;
  std::size_t duplicates = 0;
  std::size_t malformed = 0;
};

/// Reads "user item timestamp" records. Duplicate (user, item) pairs collapse
/// to the earliest timestamp. Throws DataError when no line is valid.
InteractionLog parse_interactions(std::istream& source, const FieldSpec& spec = {},
                                  ParseStats* stats = nullptr);
InteractionLog read_interactions(const std::filesystem::path& path, const FieldSpec& spec = {},
                                 ParseStats* stats = nullptr);

enum class CoreMode {
  Joint,     ///< peel users and items to a common fixpoint
  UserOnly,  ///< drop users below k once; items are left alone
};

/// Removes users (and, in joint mode, items) with fewer than k interactions
/// until every survivor has at least k. Throws DataError if nothing survives.
InteractionLog k_core_filter(const InteractionLog& log, int k, CoreMode mode = CoreMode::Joint);

struct SplitDataset {
  Index n_users = 0;
  Index n_items = 0;
  /// Per user, train item ids in chronological order.
  std::vector<std::vector<Index>> train;
  std::vector<Index> validation;
  std::vector<Index> test;
  /// Dense id -> original key.
  std::vector<std::string> user_keys;
  std::vector<std::string> item_keys;

  std::size_t train_size() const;
  /// Per user, train item ids sorted ascending (for membership tests).
  std::vector<std::vector<Index>> sorted_train() const;
  std::unordered_map<std::string, Index> user_index() const;
  std::unordered_map<std::string, Index> item_index() const;
};

/// Chronological leave-one-out: last interaction is test, second-last is
/// validation, the rest train. Ties on timestamp order by item key. Users and
/// items get dense ids in sorted-key order.
SplitDataset leave_one_out_split(const InteractionLog& log);

/// Writes train.txt, val.txt, test.txt ("user item" per line) and
/// user_ids.tsv / item_ids.tsv ("key<TAB>id").
void write_split(const SplitDataset& ds, const std::filesystem::path& dir);
SplitDataset read_split(const std::filesystem::path& dir);

}  // namespace godecf
