#include "godecf/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>
#include <unordered_set>

namespace godecf {

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  if (delimiter == '\0') {
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      if (pos >= line.size()) break;
      std::size_t end = pos;
      while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
      fields.push_back(line.substr(pos, end - pos));
      pos = end;
    }
  } else {
    std::size_t pos = 0;
    while (true) {
      std::size_t end = line.find(delimiter, pos);
      fields.push_back(line.substr(pos, end == std::string_view::npos ? end : end - pos));
      if (end == std::string_view::npos) break;
      pos = end + 1;
    }
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Integer seconds; integral decimals such as "1370000000.0" are accepted too.
bool parse_timestamp(std::string_view text, std::int64_t& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec == std::errc() && ptr == last) return out >= 0;
  double value = 0.0;
  auto [dptr, dec] = std::from_chars(first, last, value);
  if (dec != std::errc() || dptr != last || !std::isfinite(value) || value < 0.0 ||
      value != std::floor(value) || value > 9.0e18) {
    return false;
  }
  out = static_cast<std::int64_t>(value);
  return true;
}

}  // namespace

std::size_t InteractionLog::user_count() const {
  std::unordered_set<std::string_view> keys;
  for (const auto& r : interactions) keys.insert(r.user_key);
  return keys.size();
}

std::size_t InteractionLog::item_count() const {
  std::unordered_set<std::string_view> keys;
  for (const auto& r : interactions) keys.insert(r.item_key);
  return keys.size();
}

InteractionLog parse_interactions(std::istream& source, const FieldSpec& spec, ParseStats* stats) {
  if (spec.user_column < 0 || spec.item_column < 0 || spec.timestamp_column < 0) {
    throw DataError("field spec has a negative column index");
  }
  const auto needed = static_cast<std::size_t>(
      std::max({spec.user_column, spec.item_column, spec.timestamp_column}) + 1);

  ParseStats local;
  InteractionLog log;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  std::string line;
  while (std::getline(source, line)) {
    std::string_view view = trim(line);
    if (view.empty()) continue;
    auto fields = split_fields(view, spec.delimiter);
    std::int64_t ts = 0;
    if (fields.size() < needed) {
      ++local.malformed;
      continue;
    }
    std::string_view user = trim(fields[spec.user_column]);
    std::string_view item = trim(fields[spec.item_column]);
    if (user.empty() || item.empty() || !parse_timestamp(trim(fields[spec.timestamp_column]), ts)) {
      ++local.malformed;
      continue;
    }
    ++local.parsed;
    auto key = std::make_pair(std::string(user), std::string(item));
    auto it = seen.find(key);
    if (it != seen.end()) {
      ++local.duplicates;
      auto& kept = log.interactions[it->second];
      kept.timestamp = std::min(kept.timestamp, ts);
      continue;
    }
    seen.emplace(key, log.interactions.size());
    log.interactions.push_back({std::move(key.first), std::move(key.second), ts});
  }
  if (source.bad()) throw DataError("error while reading interaction source");
  if (stats) *stats = local;
  if (log.interactions.empty()) throw DataError("zero valid lines");
  return log;
}

InteractionLog read_interactions(const std::filesystem::path& path, const FieldSpec& spec,
                                 ParseStats* stats) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open interaction file " + path.string());
  return parse_interactions(in, spec, stats);
}

InteractionLog k_core_filter(const InteractionLog& log, int k, CoreMode mode) {
  if (k < 1) throw DataError("k-core requires k >= 1, got " + std::to_string(k));

  std::unordered_map<std::string_view, int> user_id, item_id;
  std::vector<std::pair<int, int>> edges;
  edges.reserve(log.size());
  for (const auto& r : log.interactions) {
    auto u = user_id.try_emplace(r.user_key, static_cast<int>(user_id.size())).first->second;
    auto i = item_id.try_emplace(r.item_key, static_cast<int>(item_id.size())).first->second;
    edges.emplace_back(u, i);
  }
  const auto n_users = user_id.size();
  const auto n_items = item_id.size();

  // Node ids: users [0, n_users), items [n_users, n_users + n_items).
  std::vector<std::vector<int>> incident(n_users + n_items);
  std::vector<int> degree(n_users + n_items, 0);
  for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
    auto [u, i] = edges[e];
    incident[u].push_back(e);
    incident[n_users + i].push_back(e);
    ++degree[u];
    ++degree[n_users + i];
  }

  std::vector<char> edge_alive(edges.size(), 1);
  std::vector<char> removed(n_users + n_items, 0);
  std::deque<std::size_t> queue;
  const std::size_t peel_limit = mode == CoreMode::Joint ? n_users + n_items : n_users;
  for (std::size_t v = 0; v < peel_limit; ++v) {
    if (degree[v] < k) queue.push_back(v);
  }
  while (!queue.empty()) {
    std::size_t v = queue.front();
    queue.pop_front();
    if (removed[v]) continue;
    removed[v] = 1;
    for (int e : incident[v]) {
      if (!edge_alive[e]) continue;
      edge_alive[e] = 0;
      auto [u, i] = edges[e];
      std::size_t other = (v < n_users) ? n_users + i : static_cast<std::size_t>(u);
      --degree[other];
      if (mode == CoreMode::Joint && !removed[other] && degree[other] < k) queue.push_back(other);
    }
  }

  InteractionLog out;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edge_alive[e]) out.interactions.push_back(log.interactions[e]);
  }
  if (out.interactions.empty()) {
    throw DataError(std::to_string(k) + "-core filter removed every interaction");
  }
  return out;
}

std::size_t SplitDataset::train_size() const {
  std::size_t total = 0;
  for (const auto& items : train) total += items.size();
  return total;
}

std::vector<std::vector<Index>> SplitDataset::sorted_train() const {
  auto sorted = train;
  for (auto& items : sorted) std::sort(items.begin(), items.end());
  return sorted;
}

std::unordered_map<std::string, Index> SplitDataset::user_index() const {
  std::unordered_map<std::string, Index> index;
  for (Index u = 0; u < static_cast<Index>(user_keys.size()); ++u) index.emplace(user_keys[u], u);
  return index;
}

std::unordered_map<std::string, Index> SplitDataset::item_index() const {
  std::unordered_map<std::string, Index> index;
  for (Index i = 0; i < static_cast<Index>(item_keys.size()); ++i) index.emplace(item_keys[i], i);
  return index;
}

SplitDataset leave_one_out_split(const InteractionLog& log) {
  std::map<std::string_view, std::vector<const RawInteraction*>> by_user;
  std::map<std::string_view, Index> item_ids;
  for (const auto& r : log.interactions) {
    by_user[r.user_key].push_back(&r);
    item_ids.emplace(r.item_key, 0);
  }

  SplitDataset ds;
  ds.item_keys.reserve(item_ids.size());
  for (auto& [key, id] : item_ids) {
    id = static_cast<Index>(ds.item_keys.size());
    ds.item_keys.emplace_back(key);
  }
  ds.n_items = static_cast<Index>(ds.item_keys.size());
  ds.n_users = static_cast<Index>(by_user.size());
  ds.train.reserve(by_user.size());

  for (auto& [user, events] : by_user) {
    if (events.size() < 3) {
      throw DataError("user '" + std::string(user) + "' has " + std::to_string(events.size()) +
                      " interactions; leave-one-out needs at least 3");
    }
    std::sort(events.begin(), events.end(), [](const RawInteraction* a, const RawInteraction* b) {
      if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
      return a->item_key < b->item_key;
    });
    std::vector<Index> train;
    train.reserve(events.size() - 2);
    for (std::size_t k = 0; k + 2 < events.size(); ++k) train.push_back(item_ids.at(events[k]->item_key));
    ds.user_keys.emplace_back(user);
    ds.train.push_back(std::move(train));
    ds.validation.push_back(item_ids.at(events[events.size() - 2]->item_key));
    ds.test.push_back(item_ids.at(events.back()->item_key));
  }
  return ds;
}

void write_split(const SplitDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("train.txt");
    for (Index u = 0; u < ds.n_users; ++u)
      for (Index i : ds.train[u]) out << u << ' ' << i << '\n';
  }
  {
    auto out = open("val.txt");
    for (Index u = 0; u < ds.n_users; ++u) out << u << ' ' << ds.validation[u] << '\n';
  }
  {
    auto out = open("test.txt");
    for (Index u = 0; u < ds.n_users; ++u) out << u << ' ' << ds.test[u] << '\n';
  }
  {
    auto out = open("user_ids.tsv");
    for (Index u = 0; u < ds.n_users; ++u) out << ds.user_keys[u] << '\t' << u << '\n';
  }
  {
    auto out = open("item_ids.tsv");
    for (Index i = 0; i < ds.n_items; ++i) out << ds.item_keys[i] << '\t' << i << '\n';
  }
}

namespace {

std::vector<std::string> read_id_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open id map " + path.string());
  std::vector<std::pair<Index, std::string>> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw DataError("malformed id map line in " + path.string());
    Index id = 0;
    std::string_view id_text = trim(std::string_view(line).substr(tab + 1));
    auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
    if (ec != std::errc() || ptr != id_text.data() + id_text.size()) {
      throw DataError("malformed id in " + path.string());
    }
    entries.emplace_back(id, line.substr(0, tab));
  }
  std::sort(entries.begin(), entries.end());
  std::vector<std::string> keys;
  for (Index expected = 0; auto& [id, key] : entries) {
    if (id != expected++) throw DataError("id map " + path.string() + " is not contiguous");
    keys.push_back(std::move(key));
  }
  return keys;
}

std::vector<std::pair<Index, Index>> read_pairs(const std::filesystem::path& path, Index n_users,
                                                Index n_items) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::pair<Index, Index>> pairs;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    Index u = -1, i = -1;
    if (!(fields >> u >> i) || u < 0 || u >= n_users || i < 0 || i >= n_items) {
      throw DataError("bad pair '" + line + "' in " + path.string());
    }
    pairs.emplace_back(u, i);
  }
  return pairs;
}

}  // namespace

SplitDataset read_split(const std::filesystem::path& dir) {
  SplitDataset ds;
  ds.user_keys = read_id_map(dir / "user_ids.tsv");
  ds.item_keys = read_id_map(dir / "item_ids.tsv");
  ds.n_users = static_cast<Index>(ds.user_keys.size());
  ds.n_items = static_cast<Index>(ds.item_keys.size());
  ds.train.assign(ds.n_users, {});
  for (auto [u, i] : read_pairs(dir / "train.txt", ds.n_users, ds.n_items)) ds.train[u].push_back(i);

  auto held_out = [&](const char* name) {
    std::vector<Index> items(ds.n_users, -1);
    for (auto [u, i] : read_pairs(dir / name, ds.n_users, ds.n_items)) {
      if (items[u] != -1) throw DataError(std::string(name) + " lists user " + std::to_string(u) + " twice");
      items[u] = i;
    }
    for (Index u = 0; u < ds.n_users; ++u) {
      if (items[u] == -1) throw DataError(std::string(name) + " is missing user " + std::to_string(u));
    }
    return items;
  };
  ds.validation = held_out("val.txt");
  ds.test = held_out("test.txt");
  return ds;
}

}  // namespace godecf
