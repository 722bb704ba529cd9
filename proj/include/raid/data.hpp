#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "raid/model.hpp"

namespace raid::data {

struct RawRating {
  std::string user;
  std::string item;
  double rating = 0.0;
  long long timestamp = 0;
};

struct RawRatings {
  std::vector<RawRating> records;
  int malformed_skipped = 0;  // bad lines tolerated (at most 1% of the file)
};

enum class RatingsFormat { movielens_dat, csv };

// One record per line: user::item::rating::timestamp (dat) or the same four
// fields comma-separated (csv). Malformed lines are skipped and counted;
// more than 1% of them fails hard with the offending line numbers.
RawRatings parse_ratings(const std::string& path, RatingsFormat format);

// user::gender::age::occupation::zip, keyed by user id. Same 1% rule.
struct AttributeTable {
  std::map<std::string, std::pair<std::string, std::string>> gender_age;
  int malformed_skipped = 0;
};

AttributeTable parse_users(const std::string& path);

// Alternating user-pass / item-pass filtering until nothing changes. Fails
// hard when nothing survives.
RawRatings filter_kcore(const RawRatings& ratings, int min_user = 5,
                        int min_item = 5);

enum class BinScheme { gender2, age3 };

// gender2: F -> 1, M -> 2. age3: < 35 -> 1, 35..45 -> 2, > 45 -> 3 (both
// boundary ages sit in the middle band). Returns 0 for a token it cannot
// read; callers treat 0 as unlabeled.
int bin_attribute(const std::string& raw, BinScheme scheme);

// Indexed implicit-feedback dataset with leave-one-out splits. user_ids and
// item_ids map contiguous indices back to the original tokens.
struct Dataset {
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::vector<rec::Interaction> train;    // rating 1.0
  std::vector<rec::Interaction> heldout;  // the 10% kept out of training
  std::vector<int> val_item;              // per user
  std::vector<int> test_item;             // per user
  std::vector<int> labels;                // per user; 0 = unlabeled
  int dropped_users = 0;                  // fewer than 3 distinct items
  int duplicates_dropped = 0;             // repeated user-item pairs
  std::uint64_t seed = 0;
  int kcore_user = 0;  // provenance recorded in the manifest
  int kcore_item = 0;

  int num_users() const { return static_cast<int>(user_ids.size()); }
  int num_items() const { return static_cast<int>(item_ids.size()); }
};

// Chronological leave-one-out per user (ties broken by item index): the last
// interaction becomes the test item, the one before it validation. Of the
// remaining pool, a seeded shuffle keeps one tenth out of training. Repeated
// user-item pairs keep their latest timestamp; users left with fewer than 3
// distinct items are dropped and counted.
Dataset build_splits(const RawRatings& ratings, std::uint64_t seed);

struct LabelSummary {
  int labeled = 0;
  int unknown_token = 0;  // attribute present but unreadable
  int missing = 0;        // user absent from the attribute table
};

// Fills ds.labels from the attribute table using the given scheme; gender2
// reads the gender column, age3 the age column.
LabelSummary label_users(Dataset& ds, const AttributeTable& attrs, BinScheme scheme);

// Dataset directory: manifest.json plus users/items/train/heldout tables in
// CSV. Loading what was saved reproduces every field; saving again writes
// byte-identical files.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace raid::data
