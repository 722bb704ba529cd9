#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "raid/barycenter.hpp"
#include "raid/model.hpp"
#include "raid/ot.hpp"

namespace raid::rec {

// Per-class empirical distributions over user embeddings. Label 0 marks an
// unlabeled user and is excluded; classes are the distinct positive labels in
// ascending order, each a uniform histogram over its members' embedding rows.
struct ClassSplit {
  std::vector<int> class_ids;
  std::vector<std::vector<int>> members;   // user indices per class
  std::vector<ot::Histogram> histograms;
  int unlabeled = 0;
};

ClassSplit class_histograms(const Eigen::MatrixXd& user_vecs,
                            const std::vector<int>& labels);

struct DefenseLoss {
  double value = 0.0;
  bool converged = true;
};

// Sum over classes of the (entropy-regularised) squared W2 distance between
// the class histogram and the barycenter histogram.
DefenseLoss defense_loss(const ClassSplit& split, const ot::Histogram& bary,
                         const ot::SinkhornOptions& opt = {});

// Gradient of the defense loss w.r.t. user embeddings with the couplings held
// fixed: for member p of class i with row marginal w_p,
//   grad_p = 2 * (w_p * y_p - sum_q T_i(p, q) * ybar_q).
// Rows of unlabeled users are zero. couplings[i] must pair histograms[i] with
// the barycenter; marginals are validated to 1e-4.
Eigen::MatrixXd defense_gradient(const Eigen::MatrixXd& user_vecs,
                                 const ClassSplit& split,
                                 const ot::Histogram& bary,
                                 const std::vector<ot::Coupling>& couplings);

// Alignment defense on a frozen embedding table: repeated barycenter /
// coupling refreshes and gradient steps, with no rating-loss updates.
struct DefenseConfig {
  double eta = 1.0;
  double tau = 1.0;
  int refresh_every = 4;   // epochs between barycenter refreshes
  int epochs = 50;
  double step = 1.0;       // gradient step applied once per epoch
  int support_size = 512;
  bary::SupportStrategy support = bary::SupportStrategy::subsample;
  bary::BarycenterOptions barycenter{};
  ot::SinkhornOptions sinkhorn{0.0, 500, 1e-5};
  std::uint64_t seed = 0;

  void validate() const;
};

struct DefenseEpoch {
  int epoch = 0;
  bool refreshed = false;
  double value = 0.0;      // transport cost sum at the start of the epoch
  double dual_value = 0.0;
  bool couplings_converged = true;
};

// Mutates user_vecs in place; requires at least one labeled user.
std::vector<DefenseEpoch> apply_defense(Eigen::MatrixXd& user_vecs,
                                        const std::vector<int>& labels,
                                        const DefenseConfig& cfg);

struct TrainConfig {
  int dim = 32;
  double mu = 1e-4;        // per-sample SGD step for the rating loss
  double eta = 1.0;        // defense weight; 0 disables the defense entirely
  double tau = 1.0;        // barycenter entropy penalty
  int refresh_every = 4;   // epochs between barycenter refreshes in phase 2
  int epochs_warm = 5;     // phase 1: rating loss only
  int epochs_defense = 15; // phase 2: rating loss + defense
  int neg_ratio = 4;       // negatives drawn per positive, per epoch
  int support_size = 512;
  bary::SupportStrategy support = bary::SupportStrategy::subsample;
  bary::BarycenterOptions barycenter{};
  // Training-grade coupling tolerance; the standalone ot ops keep tighter
  // defaults. epsilon <= 0 still means 1e-3 * mean(cost).
  ot::SinkhornOptions sinkhorn{0.0, 500, 1e-5};
  // Step for the once-per-epoch defense update. 0 selects mu * B where B is
  // the number of rating samples that epoch, matching the aggregate weight
  // the rating loss receives from its per-sample passes.
  double mu_defense = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  bool defense_active = false;
  bool refreshed = false;  // barycenter/support rebuilt this epoch
  double ce = 0.0;
  double defense = 0.0;    // transport cost sum; 0 when inactive
  double dual_value = 0.0; // barycenter dual at last refresh
  bool couplings_converged = true;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
  int users_skipped_negatives = 0;
  // Set when the defense was requested but no user carries a label; training
  // then runs on the rating loss alone.
  bool defense_disabled_no_labels = false;
};

struct TrainResult {
  EmbeddingModel model;
  TrainLog log;
};

// Two-phase training: warm epochs fit the rating loss alone, defense epochs
// add the barycenter-alignment gradient. labels.size() must equal num_users.
TrainResult train_raid(const std::vector<Interaction>& positives, int num_users,
                       int num_items, const std::vector<int>& labels,
                       const TrainConfig& cfg);

}  // namespace raid::rec
