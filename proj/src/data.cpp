#include "raid/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "raid/rng.hpp"

namespace raid::data {

namespace {

std::vector<std::string> split(const std::string& line, const std::string& delim) {
  std::vector<std::string> out;
  std::size_t at = 0;
  while (true) {
    const std::size_t hit = line.find(delim, at);
    if (hit == std::string::npos) {
      out.push_back(line.substr(at));
      return out;
    }
    out.push_back(line.substr(at, hit - at));
    at = hit + delim.size();
  }
}

bool parse_ll(const std::string& s, long long& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc{} && res.ptr == end;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc{} && res.ptr == end && std::isfinite(out);
}

// Numeric ids compare numerically, everything else lexicographically, so
// index maps do not depend on the order records appear in the file.
bool id_less(const std::string& a, const std::string& b) {
  long long na = 0, nb = 0;
  const bool pa = parse_ll(a, na);
  const bool pb = parse_ll(b, nb);
  if (pa && pb) {
    if (na != nb) return na < nb;
    return a < b;  // leading zeros
  }
  if (pa != pb) return pa;  // numeric ids sort first
  return a < b;
}

[[noreturn]] void fail_malformed(const std::string& path, int malformed,
                                 std::size_t total,
                                 const std::vector<std::size_t>& lines) {
  std::ostringstream msg;
  msg << path << ": " << malformed << " malformed of " << total
      << " lines (over the 1% budget); first offenders at line";
  if (lines.size() > 1) msg << "s";
  for (std::size_t i = 0; i < lines.size(); ++i) {
    msg << (i ? ", " : " ") << lines[i];
  }
  throw std::runtime_error(msg.str());
}

void append_csv_int(std::string& out, long long v) {
  char buf[24];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << content;
  if (!f) throw std::runtime_error("write failed for " + path);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

RawRatings parse_ratings(const std::string& path, RatingsFormat format) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open ratings file " + path);
  const std::string delim = format == RatingsFormat::movielens_dat ? "::" : ",";

  RawRatings out;
  std::vector<std::size_t> bad_lines;
  std::size_t lineno = 0;
  std::size_t considered = 0;
  std::string line;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++considered;
    const std::vector<std::string> parts = split(line, delim);
    RawRating r;
    const bool ok = parts.size() == 4 && !parts[0].empty() && !parts[1].empty() &&
                    parse_double(parts[2], r.rating) &&
                    parse_ll(parts[3], r.timestamp);
    if (!ok) {
      ++out.malformed_skipped;
      if (bad_lines.size() < 8) bad_lines.push_back(lineno);
      continue;
    }
    r.user = parts[0];
    r.item = parts[1];
    out.records.push_back(std::move(r));
  }
  if (out.malformed_skipped > 0 &&
      static_cast<double>(out.malformed_skipped) >
          0.01 * static_cast<double>(considered)) {
    fail_malformed(path, out.malformed_skipped, considered, bad_lines);
  }
  return out;
}

AttributeTable parse_users(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open attribute file " + path);

  AttributeTable out;
  std::vector<std::size_t> bad_lines;
  std::size_t lineno = 0;
  std::size_t considered = 0;
  std::string line;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++considered;
    const std::vector<std::string> parts = split(line, "::");
    if (parts.size() != 5 || parts[0].empty()) {
      ++out.malformed_skipped;
      if (bad_lines.size() < 8) bad_lines.push_back(lineno);
      continue;
    }
    out.gender_age[parts[0]] = {parts[1], parts[2]};
  }
  if (out.malformed_skipped > 0 &&
      static_cast<double>(out.malformed_skipped) >
          0.01 * static_cast<double>(considered)) {
    fail_malformed(path, out.malformed_skipped, considered, bad_lines);
  }
  return out;
}

RawRatings filter_kcore(const RawRatings& ratings, int min_user, int min_item) {
  if (min_user < 1 || min_item < 1) {
    throw std::invalid_argument("k-core thresholds must be >= 1");
  }
  std::vector<RawRating> keep = ratings.records;
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<std::string, int> user_count;
    for (const auto& r : keep) ++user_count[r.user];
    std::vector<RawRating> pass;
    pass.reserve(keep.size());
    for (auto& r : keep) {
      if (user_count[r.user] >= min_user) pass.push_back(std::move(r));
    }
    if (pass.size() != keep.size()) changed = true;
    keep = std::move(pass);

    std::unordered_map<std::string, int> item_count;
    for (const auto& r : keep) ++item_count[r.item];
    std::vector<RawRating> pass2;
    pass2.reserve(keep.size());
    for (auto& r : keep) {
      if (item_count[r.item] >= min_item) pass2.push_back(std::move(r));
    }
    if (pass2.size() != keep.size()) changed = true;
    keep = std::move(pass2);
  }
  if (keep.empty()) {
    throw std::runtime_error("k-core filtering removed every interaction");
  }
  RawRatings out;
  out.records = std::move(keep);
  out.malformed_skipped = ratings.malformed_skipped;
  return out;
}

int bin_attribute(const std::string& raw, BinScheme scheme) {
  if (scheme == BinScheme::gender2) {
    if (raw == "F" || raw == "f") return 1;
    if (raw == "M" || raw == "m") return 2;
    return 0;
  }
  double age = 0.0;
  if (!parse_double(raw, age)) return 0;
  if (age < 35.0) return 1;
  if (age <= 45.0) return 2;
  return 3;
}

Dataset build_splits(const RawRatings& ratings, std::uint64_t seed) {
  if (ratings.records.empty()) {
    throw std::invalid_argument("no interactions to split");
  }

  // Latest record wins for a repeated user-item pair.
  std::map<std::string, std::map<std::string, long long>> per_user;
  int duplicates = 0;
  for (const auto& r : ratings.records) {
    auto& items = per_user[r.user];
    const auto it = items.find(r.item);
    if (it == items.end()) {
      items.emplace(r.item, r.timestamp);
    } else {
      ++duplicates;
      it->second = std::max(it->second, r.timestamp);
    }
  }

  Dataset ds;
  ds.seed = seed;
  ds.duplicates_dropped = duplicates;
  for (auto it = per_user.begin(); it != per_user.end();) {
    if (it->second.size() < 3) {
      ++ds.dropped_users;
      it = per_user.erase(it);
    } else {
      ++it;
    }
  }
  if (per_user.empty()) {
    throw std::runtime_error("every user was dropped while splitting");
  }

  for (const auto& [user, items] : per_user) ds.user_ids.push_back(user);
  std::sort(ds.user_ids.begin(), ds.user_ids.end(), id_less);
  std::set<std::string> item_pool;
  for (const auto& [user, items] : per_user) {
    (void)user;
    for (const auto& [item, ts] : items) {
      (void)ts;
      item_pool.insert(item);
    }
  }
  ds.item_ids.assign(item_pool.begin(), item_pool.end());
  std::sort(ds.item_ids.begin(), ds.item_ids.end(), id_less);

  std::unordered_map<std::string, int> user_index, item_index;
  for (std::size_t i = 0; i < ds.user_ids.size(); ++i) {
    user_index[ds.user_ids[i]] = static_cast<int>(i);
  }
  for (std::size_t i = 0; i < ds.item_ids.size(); ++i) {
    item_index[ds.item_ids[i]] = static_cast<int>(i);
  }

  ds.val_item.assign(ds.user_ids.size(), -1);
  ds.test_item.assign(ds.user_ids.size(), -1);
  ds.labels.assign(ds.user_ids.size(), 0);

  std::vector<rec::Interaction> pool;
  for (const auto& uid : ds.user_ids) {
    const int u = user_index[uid];
    std::vector<std::pair<long long, int>> history;  // (timestamp, item index)
    for (const auto& [item, ts] : per_user[uid]) {
      history.emplace_back(ts, item_index[item]);
    }
    std::sort(history.begin(), history.end());
    ds.test_item[static_cast<std::size_t>(u)] = history.back().second;
    ds.val_item[static_cast<std::size_t>(u)] = history[history.size() - 2].second;
    for (std::size_t k = 0; k + 2 < history.size(); ++k) {
      pool.push_back({u, history[k].second, 1.0});
    }
  }

  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng::Engine eng(rng::derive(seed, 0xda7a));
  rng::shuffle(order, eng);
  const std::size_t heldout_count = pool.size() / 10;
  std::vector<char> is_heldout(pool.size(), 0);
  for (std::size_t i = 0; i < heldout_count; ++i) is_heldout[order[i]] = 1;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    (is_heldout[i] ? ds.heldout : ds.train).push_back(pool[i]);
  }
  const auto by_pair = [](const rec::Interaction& a, const rec::Interaction& b) {
    if (a.user != b.user) return a.user < b.user;
    return a.item < b.item;
  };
  std::sort(ds.train.begin(), ds.train.end(), by_pair);
  std::sort(ds.heldout.begin(), ds.heldout.end(), by_pair);
  return ds;
}

LabelSummary label_users(Dataset& ds, const AttributeTable& attrs, BinScheme scheme) {
  LabelSummary summary;
  ds.labels.assign(ds.user_ids.size(), 0);
  for (std::size_t u = 0; u < ds.user_ids.size(); ++u) {
    const auto it = attrs.gender_age.find(ds.user_ids[u]);
    if (it == attrs.gender_age.end()) {
      ++summary.missing;
      continue;
    }
    const std::string& raw =
        scheme == BinScheme::gender2 ? it->second.first : it->second.second;
    const int label = bin_attribute(raw, scheme);
    ds.labels[u] = label;
    if (label == 0) {
      ++summary.unknown_token;
    } else {
      ++summary.labeled;
    }
  }
  return summary;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  if (ds.user_ids.empty() || ds.item_ids.empty()) {
    throw std::invalid_argument("refusing to save an empty dataset");
  }
  const std::size_t n = ds.user_ids.size();
  if (ds.val_item.size() != n || ds.test_item.size() != n || ds.labels.size() != n) {
    throw std::invalid_argument("per-user tables out of sync");
  }
  for (const auto& id : ds.user_ids) {
    if (id.find(',') != std::string::npos || id.find('\n') != std::string::npos) {
      throw std::invalid_argument("user id not CSV-safe: " + id);
    }
  }
  for (const auto& id : ds.item_ids) {
    if (id.find(',') != std::string::npos || id.find('\n') != std::string::npos) {
      throw std::invalid_argument("item id not CSV-safe: " + id);
    }
  }
  std::filesystem::create_directories(dir);

  nlohmann::json manifest;
  manifest["format"] = "dataset-v1";
  manifest["num_users"] = ds.num_users();
  manifest["num_items"] = ds.num_items();
  manifest["num_train"] = ds.train.size();
  manifest["num_heldout"] = ds.heldout.size();
  manifest["dropped_users"] = ds.dropped_users;
  manifest["duplicates_dropped"] = ds.duplicates_dropped;
  manifest["seed"] = ds.seed;
  manifest["kcore_user"] = ds.kcore_user;
  manifest["kcore_item"] = ds.kcore_item;
  write_file(dir + "/manifest.json", manifest.dump(2) + "\n");

  std::string users = "index,user_id,label,val_item,test_item\n";
  for (std::size_t u = 0; u < n; ++u) {
    append_csv_int(users, static_cast<long long>(u));
    users += ',';
    users += ds.user_ids[u];
    users += ',';
    append_csv_int(users, ds.labels[u]);
    users += ',';
    append_csv_int(users, ds.val_item[u]);
    users += ',';
    append_csv_int(users, ds.test_item[u]);
    users += '\n';
  }
  write_file(dir + "/users.csv", users);

  std::string items = "index,item_id\n";
  for (std::size_t i = 0; i < ds.item_ids.size(); ++i) {
    append_csv_int(items, static_cast<long long>(i));
    items += ',';
    items += ds.item_ids[i];
    items += '\n';
  }
  write_file(dir + "/items.csv", items);

  const auto dump_pairs = [](const std::vector<rec::Interaction>& list) {
    std::string out = "user,item\n";
    for (const auto& r : list) {
      append_csv_int(out, r.user);
      out += ',';
      append_csv_int(out, r.item);
      out += '\n';
    }
    return out;
  };
  write_file(dir + "/train.csv", dump_pairs(ds.train));
  write_file(dir + "/heldout.csv", dump_pairs(ds.heldout));
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream mf(dir + "/manifest.json", std::ios::binary);
  if (!mf) throw std::runtime_error("cannot open " + dir + "/manifest.json");
  nlohmann::json manifest;
  mf >> manifest;
  if (manifest.value("format", "") != "dataset-v1") {
    throw std::runtime_error("unsupported dataset format in " + dir);
  }

  Dataset ds;
  ds.dropped_users = manifest.at("dropped_users").get<int>();
  ds.duplicates_dropped = manifest.at("duplicates_dropped").get<int>();
  ds.seed = manifest.at("seed").get<std::uint64_t>();
  ds.kcore_user = manifest.at("kcore_user").get<int>();
  ds.kcore_item = manifest.at("kcore_item").get<int>();
  const int n = manifest.at("num_users").get<int>();
  const int m = manifest.at("num_items").get<int>();

  const auto users = read_lines(dir + "/users.csv");
  if (users.empty() || users[0] != "index,user_id,label,val_item,test_item") {
    throw std::runtime_error("bad users table in " + dir);
  }
  ds.user_ids.resize(static_cast<std::size_t>(n));
  ds.labels.assign(static_cast<std::size_t>(n), 0);
  ds.val_item.assign(static_cast<std::size_t>(n), -1);
  ds.test_item.assign(static_cast<std::size_t>(n), -1);
  if (static_cast<int>(users.size()) - 1 != n) {
    throw std::runtime_error("user count mismatch in " + dir);
  }
  for (std::size_t l = 1; l < users.size(); ++l) {
    const auto parts = split(users[l], ",");
    long long idx = 0, label = 0, val = 0, test = 0;
    if (parts.size() != 5 || !parse_ll(parts[0], idx) || parts[1].empty() ||
        !parse_ll(parts[2], label) || !parse_ll(parts[3], val) ||
        !parse_ll(parts[4], test) || idx != static_cast<long long>(l) - 1) {
      throw std::runtime_error("bad users row " + std::to_string(l) + " in " + dir);
    }
    ds.user_ids[static_cast<std::size_t>(idx)] = parts[1];
    ds.labels[static_cast<std::size_t>(idx)] = static_cast<int>(label);
    ds.val_item[static_cast<std::size_t>(idx)] = static_cast<int>(val);
    ds.test_item[static_cast<std::size_t>(idx)] = static_cast<int>(test);
  }

  const auto items = read_lines(dir + "/items.csv");
  if (items.empty() || items[0] != "index,item_id" ||
      static_cast<int>(items.size()) - 1 != m) {
    throw std::runtime_error("bad items table in " + dir);
  }
  ds.item_ids.resize(static_cast<std::size_t>(m));
  for (std::size_t l = 1; l < items.size(); ++l) {
    const auto parts = split(items[l], ",");
    long long idx = 0;
    if (parts.size() != 2 || !parse_ll(parts[0], idx) || parts[1].empty() ||
        idx != static_cast<long long>(l) - 1) {
      throw std::runtime_error("bad items row " + std::to_string(l) + " in " + dir);
    }
    ds.item_ids[static_cast<std::size_t>(idx)] = parts[1];
  }

  const auto read_pairs = [&](const std::string& name, std::size_t expected) {
    const auto lines = read_lines(dir + "/" + name);
    if (lines.empty() || lines[0] != "user,item" || lines.size() - 1 != expected) {
      throw std::runtime_error("bad " + name + " in " + dir);
    }
    std::vector<rec::Interaction> out;
    out.reserve(expected);
    for (std::size_t l = 1; l < lines.size(); ++l) {
      const auto parts = split(lines[l], ",");
      long long u = 0, v = 0;
      if (parts.size() != 2 || !parse_ll(parts[0], u) || !parse_ll(parts[1], v) ||
          u < 0 || u >= n || v < 0 || v >= m) {
        throw std::runtime_error("bad " + name + " row " + std::to_string(l) +
                                 " in " + dir);
      }
      out.push_back({static_cast<int>(u), static_cast<int>(v), 1.0});
    }
    return out;
  };
  ds.train = read_pairs("train.csv", manifest.at("num_train").get<std::size_t>());
  ds.heldout = read_pairs("heldout.csv", manifest.at("num_heldout").get<std::size_t>());

  for (std::size_t u = 0; u < ds.user_ids.size(); ++u) {
    if (ds.val_item[u] < -1 || ds.val_item[u] >= m || ds.test_item[u] < -1 ||
        ds.test_item[u] >= m) {
      throw std::runtime_error("split item out of range in " + dir);
    }
  }
  return ds;
}

}  // namespace raid::data
