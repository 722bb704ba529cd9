#pragma once

#include <map>
#include <string>
#include <vector>

#include "raid/model.hpp"

namespace raid::eval {

// Leave-one-out case for one user: the held-out item plus the items that must
// not compete (the user's training history). test_item = -1 marks a user with
// nothing held out; evaluate_model skips and counts those.
struct UserCase {
  int user = 0;
  int test_item = -1;
  std::vector<int> excluded;
};

// 1-based rank of the test item among all non-excluded items, scored by the
// model. Ties are broken by ascending item index so evaluation is
// deterministic. The test item must not itself be excluded.
int rank_test_item(const rec::EmbeddingModel& model, int user, int test_item,
                   const std::vector<int>& excluded);

// Fraction of ranks within the cutoff.
double hr_at_k(const std::vector<int>& ranks, int k);

// Mean of 1/log2(rank+1) for ranks within the cutoff, else 0. The ideal DCG
// for a single held-out item is 1, so this is already normalised.
double ndcg_at_k(const std::vector<int>& ranks, int k);

struct RecReport {
  std::vector<int> cutoffs;
  std::map<int, double> hr;
  std::map<int, double> ndcg;
  int num_users = 0;  // users actually ranked
  int skipped = 0;    // users with no held-out item

  std::string to_json() const;
};

RecReport evaluate_model(const rec::EmbeddingModel& model,
                         const std::vector<UserCase>& cases,
                         const std::vector<int>& cutoffs = {5, 10, 15, 20});

}  // namespace raid::eval
