#include "raid/report.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace raid::report {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// Index of k in row.cutoffs, or -1.
int cutoff_pos(const MethodRow& row, int k) {
  for (std::size_t i = 0; i < row.cutoffs.size(); ++i) {
    if (row.cutoffs[i] == k) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

MethodRow parse_run(const std::string& method, const std::string& attack_json,
                    const std::string& rec_json) {
  if (method.empty()) throw std::invalid_argument("method name is empty");
  if (attack_json.empty() && rec_json.empty()) {
    throw std::invalid_argument("no reports given for method " + method);
  }
  MethodRow row;
  row.method = method;
  if (!attack_json.empty()) {
    const nlohmann::json j = nlohmann::json::parse(attack_json);
    row.has_attack = true;
    row.f1_micro = j.at("f1_micro").get<double>();
    row.bacc = j.at("bacc").get<double>();
  }
  if (!rec_json.empty()) {
    const nlohmann::json j = nlohmann::json::parse(rec_json);
    row.has_rec = true;
    row.cutoffs = j.at("cutoffs").get<std::vector<int>>();
    row.hr = j.at("hr").get<std::vector<double>>();
    row.ndcg = j.at("ndcg").get<std::vector<double>>();
    if (row.hr.size() != row.cutoffs.size() ||
        row.ndcg.size() != row.cutoffs.size()) {
      throw std::invalid_argument("rec report arrays disagree for " + method);
    }
  }
  return row;
}

CombinedTable combine(std::vector<MethodRow> rows) {
  if (rows.empty()) throw std::invalid_argument("nothing to combine");
  std::set<std::string> seen;
  std::set<int> cuts;
  for (const auto& row : rows) {
    if (row.method.empty()) throw std::invalid_argument("method name is empty");
    if (!seen.insert(row.method).second) {
      throw std::invalid_argument("duplicate method " + row.method);
    }
    if (row.has_rec && (row.hr.size() != row.cutoffs.size() ||
                        row.ndcg.size() != row.cutoffs.size())) {
      throw std::invalid_argument("rec arrays disagree for " + row.method);
    }
    if (!row.has_rec && !row.has_attack) {
      throw std::invalid_argument("empty row for " + row.method);
    }
    for (const int k : row.cutoffs) cuts.insert(k);
  }
  std::sort(rows.begin(), rows.end(),
            [](const MethodRow& a, const MethodRow& b) { return a.method < b.method; });
  CombinedTable t;
  t.rows = std::move(rows);
  t.cutoffs.assign(cuts.begin(), cuts.end());
  return t;
}

std::string CombinedTable::to_csv() const {
  std::string out = "method,f1_micro,bacc";
  for (const int k : cutoffs) out += ",hr@" + std::to_string(k);
  for (const int k : cutoffs) out += ",ndcg@" + std::to_string(k);
  out += '\n';
  for (const auto& row : rows) {
    out += row.method;
    out += ',';
    if (row.has_attack) out += fmt(row.f1_micro);
    out += ',';
    if (row.has_attack) out += fmt(row.bacc);
    for (const int k : cutoffs) {
      out += ',';
      const int p = cutoff_pos(row, k);
      if (row.has_rec && p >= 0) out += fmt(row.hr[static_cast<std::size_t>(p)]);
    }
    for (const int k : cutoffs) {
      out += ',';
      const int p = cutoff_pos(row, k);
      if (row.has_rec && p >= 0) out += fmt(row.ndcg[static_cast<std::size_t>(p)]);
    }
    out += '\n';
  }
  return out;
}

std::string CombinedTable::to_markdown() const {
  const int metric_cols = 2 + 2 * static_cast<int>(cutoffs.size());
  std::string out = "| method | f1_micro | bacc |";
  for (const int k : cutoffs) out += " hr@" + std::to_string(k) + " |";
  for (const int k : cutoffs) out += " ndcg@" + std::to_string(k) + " |";
  out += "\n|---|";
  for (int i = 0; i < metric_cols; ++i) out += "---|";
  out += '\n';
  for (const auto& row : rows) {
    out += "| " + row.method + " |";
    out += row.has_attack ? " " + fmt(row.f1_micro) + " |" : " |";
    out += row.has_attack ? " " + fmt(row.bacc) + " |" : " |";
    for (const int k : cutoffs) {
      const int p = cutoff_pos(row, k);
      out += (row.has_rec && p >= 0)
                 ? " " + fmt(row.hr[static_cast<std::size_t>(p)]) + " |"
                 : " |";
    }
    for (const int k : cutoffs) {
      const int p = cutoff_pos(row, k);
      out += (row.has_rec && p >= 0)
                 ? " " + fmt(row.ndcg[static_cast<std::size_t>(p)]) + " |"
                 : " |";
    }
    out += '\n';
  }
  return out;
}

}  // namespace raid::report
