#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace raid::rec {

// One implicit-feedback sample. rating is 1 for an observed interaction and
// 0 for a sampled negative.
struct Interaction {
  int user = 0;
  int item = 0;
  double rating = 1.0;

  bool operator==(const Interaction&) const = default;
};

// Dot-product factorisation with a logistic link.
struct EmbeddingModel {
  Eigen::MatrixXd user_vecs;  // N x d
  Eigen::MatrixXd item_vecs;  // M x d

  int num_users() const { return static_cast<int>(user_vecs.rows()); }
  int num_items() const { return static_cast<int>(item_vecs.rows()); }
  int dim() const { return static_cast<int>(user_vecs.cols()); }
};

// Entries drawn from N(0, 0.01^2), deterministic given the seed.
EmbeddingModel init_model(int users, int items, int dim, std::uint64_t seed);

// sigmoid(u . v) clamped to [1e-7, 1 - 1e-7] so downstream logs stay finite.
double predict_score(const EmbeddingModel& model, int user, int item);

// Mean binary cross-entropy over the batch. Rejects an empty batch.
double ce_loss(const EmbeddingModel& model, const std::vector<Interaction>& batch);

struct CeGradient {
  Eigen::MatrixXd user_vecs;  // same shapes as the model; untouched rows are zero
  Eigen::MatrixXd item_vecs;
};

// Gradient of ce_loss: per sample, (score - rating) routed to the two
// embedding rows the sample touches, averaged over the batch.
CeGradient ce_gradient(const EmbeddingModel& model, const std::vector<Interaction>& batch);

struct NegativeSamples {
  std::vector<Interaction> negatives;  // rating 0
  int users_skipped = 0;  // users with no un-interacted item left
};

// For each positive, draws `ratio` distinct items the user never interacted
// with (fewer when fewer exist). Deterministic given the seed.
NegativeSamples negative_sample(const std::vector<Interaction>& positives, int num_items,
                                int ratio, std::uint64_t seed);

// Adds N(0, sigma^2) noise to the user embeddings only; item embeddings are
// returned untouched. sigma = 0 reproduces the input exactly.
EmbeddingModel perturb_users(const EmbeddingModel& model, double sigma, std::uint64_t seed);

// Versioned text checkpoint: dimensions plus row-major embedding tables with
// round-trip float formatting, and an optional single-line config annotation.
void save_model(const EmbeddingModel& model, const std::string& path,
                const std::string& config_json = "{}");
struct LoadedModel {
  EmbeddingModel model;
  std::string config_json;
};
LoadedModel load_model(const std::string& path);

}  // namespace raid::rec
