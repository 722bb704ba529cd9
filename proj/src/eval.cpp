#include "raid/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace raid::eval {

int rank_test_item(const rec::EmbeddingModel& model, int user, int test_item,
                   const std::vector<int>& excluded) {
  const int items = model.num_items();
  if (user < 0 || user >= model.num_users()) {
    throw std::invalid_argument("rank_test_item: unknown user");
  }
  if (test_item < 0 || test_item >= items) {
    throw std::invalid_argument("rank_test_item: unknown test item");
  }
  std::vector<char> mask(static_cast<std::size_t>(items), 0);
  for (const int e : excluded) {
    if (e < 0 || e >= items) {
      throw std::invalid_argument("rank_test_item: excluded item out of range");
    }
    mask[static_cast<std::size_t>(e)] = 1;
  }
  if (mask[static_cast<std::size_t>(test_item)]) {
    throw std::invalid_argument("rank_test_item: test item is excluded");
  }
  const double target = rec::predict_score(model, user, test_item);
  int ahead = 0;
  for (int j = 0; j < items; ++j) {
    if (j == test_item || mask[static_cast<std::size_t>(j)]) continue;
    const double s = rec::predict_score(model, user, j);
    if (s > target || (s == target && j < test_item)) ++ahead;
  }
  return 1 + ahead;
}

namespace {

void check_ranks(const std::vector<int>& ranks, int k) {
  if (ranks.empty()) throw std::invalid_argument("no ranks to aggregate");
  if (k < 1) throw std::invalid_argument("cutoff must be >= 1");
  for (const int r : ranks) {
    if (r < 1) throw std::invalid_argument("ranks are 1-based");
  }
}

}  // namespace

double hr_at_k(const std::vector<int>& ranks, int k) {
  check_ranks(ranks, k);
  std::size_t hit = 0;
  for (const int r : ranks) {
    if (r <= k) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(ranks.size());
}

double ndcg_at_k(const std::vector<int>& ranks, int k) {
  check_ranks(ranks, k);
  double acc = 0.0;
  for (const int r : ranks) {
    if (r <= k) acc += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  }
  return acc / static_cast<double>(ranks.size());
}

std::string RecReport::to_json() const {
  nlohmann::json j;
  j["cutoffs"] = cutoffs;
  j["hr"] = nlohmann::json::array();
  j["ndcg"] = nlohmann::json::array();
  for (const int k : cutoffs) {
    j["hr"].push_back(hr.at(k));
    j["ndcg"].push_back(ndcg.at(k));
  }
  j["num_users"] = num_users;
  j["skipped"] = skipped;
  return j.dump(2);
}

RecReport evaluate_model(const rec::EmbeddingModel& model,
                         const std::vector<UserCase>& cases,
                         const std::vector<int>& cutoffs) {
  if (cases.empty()) throw std::invalid_argument("no users to evaluate");
  if (cutoffs.empty()) throw std::invalid_argument("no cutoffs given");

  RecReport report;
  report.cutoffs = cutoffs;
  std::sort(report.cutoffs.begin(), report.cutoffs.end());
  report.cutoffs.erase(
      std::unique(report.cutoffs.begin(), report.cutoffs.end()),
      report.cutoffs.end());

  std::vector<int> ranks;
  ranks.reserve(cases.size());
  for (const auto& c : cases) {
    if (c.test_item < 0) {
      ++report.skipped;
      continue;
    }
    ranks.push_back(rank_test_item(model, c.user, c.test_item, c.excluded));
  }
  if (ranks.empty()) {
    throw std::invalid_argument("every user lacked a held-out item");
  }
  report.num_users = static_cast<int>(ranks.size());
  for (const int k : report.cutoffs) {
    report.hr[k] = hr_at_k(ranks, k);
    report.ndcg[k] = ndcg_at_k(ranks, k);
  }
  return report;
}

}  // namespace raid::eval
