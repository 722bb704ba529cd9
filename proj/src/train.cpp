#include "raid/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include "raid/errors.hpp"
#include "raid/rng.hpp"

namespace raid::rec {

namespace {

constexpr double kMarginalTol = 1e-4;

double clamp_score(double s) {
  return std::min(std::max(s, 1e-7), 1.0 - 1e-7);
}

}  // namespace

ClassSplit class_histograms(const Eigen::MatrixXd& user_vecs,
                            const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != user_vecs.rows()) {
    throw std::invalid_argument("labels size does not match user count");
  }
  ClassSplit out;
  for (std::size_t u = 0; u < labels.size(); ++u) {
    const int lab = labels[u];
    if (lab < 0) {
      throw std::invalid_argument("negative label at user " + std::to_string(u));
    }
    if (lab == 0) {
      ++out.unlabeled;
      continue;
    }
    auto it = std::lower_bound(out.class_ids.begin(), out.class_ids.end(), lab);
    const std::size_t pos = static_cast<std::size_t>(it - out.class_ids.begin());
    if (it == out.class_ids.end() || *it != lab) {
      out.class_ids.insert(it, lab);
      out.members.insert(out.members.begin() + static_cast<std::ptrdiff_t>(pos),
                         std::vector<int>{});
    }
    out.members[pos].push_back(static_cast<int>(u));
  }
  out.histograms.reserve(out.class_ids.size());
  for (const auto& rows : out.members) {
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd atoms(n, user_vecs.cols());
    for (Eigen::Index r = 0; r < n; ++r) {
      atoms.row(r) = user_vecs.row(rows[static_cast<std::size_t>(r)]);
    }
    out.histograms.push_back(ot::Histogram::uniform(atoms));
  }
  return out;
}

DefenseLoss defense_loss(const ClassSplit& split, const ot::Histogram& bary,
                         const ot::SinkhornOptions& opt) {
  DefenseLoss out;
  for (const auto& hist : split.histograms) {
    const auto w2 = ot::w2_squared(hist, bary, ot::PlanMethod::sinkhorn, opt);
    out.value += w2.value;
    out.converged = out.converged && w2.converged;
  }
  return out;
}

Eigen::MatrixXd defense_gradient(const Eigen::MatrixXd& user_vecs,
                                 const ClassSplit& split,
                                 const ot::Histogram& bary,
                                 const std::vector<ot::Coupling>& couplings) {
  if (couplings.size() != split.histograms.size()) {
    throw std::invalid_argument("one coupling per class required");
  }
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(user_vecs.rows(), user_vecs.cols());
  for (std::size_t i = 0; i < couplings.size(); ++i) {
    const Eigen::MatrixXd& plan = couplings[i].plan;
    const ot::Histogram& hist = split.histograms[i];
    if (plan.rows() != hist.size() || plan.cols() != bary.size()) {
      throw std::invalid_argument("coupling shape mismatch for class index " +
                                  std::to_string(i));
    }
    const double row_gap =
        (plan.rowwise().sum() - hist.weights).cwiseAbs().maxCoeff();
    const double col_gap =
        (plan.colwise().sum().transpose() - bary.weights).cwiseAbs().maxCoeff();
    if (row_gap > kMarginalTol || col_gap > kMarginalTol) {
      throw std::invalid_argument("coupling marginals do not match class " +
                                  std::to_string(i) + " and barycenter weights");
    }
    // Envelope gradient with the plan frozen: 2 (w_p y_p - sum_q T(p,q) ybar_q).
    const Eigen::MatrixXd targets = plan * bary.atoms;  // N_i x d
    const auto& rows = split.members[i];
    for (std::size_t p = 0; p < rows.size(); ++p) {
      const Eigen::Index pe = static_cast<Eigen::Index>(p);
      grad.row(rows[p]) =
          2.0 * (hist.weights[pe] * user_vecs.row(rows[p]) - targets.row(pe));
    }
  }
  return grad;
}

namespace {

// Shared per-epoch defense machinery: refreshes the barycenter on schedule,
// recomputes class couplings, and produces the alignment gradient.
struct DefenseDriver {
  std::optional<ot::Histogram> bary;
  double last_dual = 0.0;

  Eigen::MatrixXd epoch_gradient(const Eigen::MatrixXd& user_mat,
                                 const std::vector<int>& labels, int rel_epoch,
                                 const DefenseConfig& cfg, DefenseEpoch& st) {
    if (rel_epoch % cfg.refresh_every == 0) {
      const ClassSplit fresh = class_histograms(user_mat, labels);
      if (fresh.class_ids.empty()) {
        throw std::invalid_argument("defense requires at least one labeled user");
      }
      Eigen::Index labeled_rows = 0;
      for (const auto& m : fresh.members) {
        labeled_rows += static_cast<Eigen::Index>(m.size());
      }
      Eigen::MatrixXd pool(labeled_rows, user_mat.cols());
      Eigen::Index at = 0;
      for (const auto& m : fresh.members) {
        for (int u : m) pool.row(at++) = user_mat.row(u);
      }
      const int q = static_cast<int>(
          std::min<Eigen::Index>(cfg.support_size, pool.rows()));
      const Eigen::MatrixXd support = bary::select_support(
          pool, q, cfg.support,
          rng::derive(cfg.seed, 0x530000u + static_cast<std::uint64_t>(rel_epoch)));
      const Eigen::VectorXd lambda = bary::mass_weights(fresh.histograms);
      const bary::Barycenter bc = bary::solve_barycenter(
          fresh.histograms, support, lambda, cfg.tau, cfg.barycenter);
      bary = bc.histogram();
      last_dual = bc.dual_value;
      st.refreshed = true;
    }
    const ClassSplit split = class_histograms(user_mat, labels);
    std::vector<ot::Coupling> couplings;
    couplings.reserve(split.histograms.size());
    double cost_sum = 0.0;
    for (const auto& hist : split.histograms) {
      const Eigen::MatrixXd cost = ot::cost_matrix(hist.atoms, bary->atoms);
      couplings.push_back(ot::sinkhorn(hist.weights, bary->weights, cost, cfg.sinkhorn));
      st.couplings_converged = st.couplings_converged && couplings.back().converged;
      cost_sum += couplings.back().plan.cwiseProduct(cost).sum();
    }
    st.value = cost_sum;
    st.dual_value = last_dual;
    Eigen::MatrixXd grad = defense_gradient(user_mat, split, *bary, couplings);
    if (!grad.allFinite() || !std::isfinite(st.value)) {
      throw NumericalError("defense gradient is not finite at defense epoch " +
                           std::to_string(rel_epoch));
    }
    return grad;
  }
};

}  // namespace

void DefenseConfig::validate() const {
  if (eta < 0.0 || !std::isfinite(eta)) {
    throw std::invalid_argument("eta must be >= 0");
  }
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (refresh_every < 1) throw std::invalid_argument("refresh_every must be >= 1");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw std::invalid_argument("step must be positive and finite");
  }
  if (support_size < 1) throw std::invalid_argument("support_size must be >= 1");
}

std::vector<DefenseEpoch> apply_defense(Eigen::MatrixXd& user_vecs,
                                        const std::vector<int>& labels,
                                        const DefenseConfig& cfg) {
  cfg.validate();
  if (static_cast<Eigen::Index>(labels.size()) != user_vecs.rows()) {
    throw std::invalid_argument("labels size does not match user count");
  }
  std::vector<DefenseEpoch> log;
  DefenseDriver driver;
  for (int e = 0; e < cfg.epochs; ++e) {
    DefenseEpoch st;
    st.epoch = e;
    const Eigen::MatrixXd grad =
        driver.epoch_gradient(user_vecs, labels, e, cfg, st);
    user_vecs.noalias() -= (cfg.step * cfg.eta) * grad;
    if (!user_vecs.allFinite()) {
      throw NumericalError("embeddings diverged at defense epoch " +
                           std::to_string(e));
    }
    log.push_back(st);
  }
  return log;
}

void TrainConfig::validate() const {
  if (dim < 1) throw std::invalid_argument("dim must be >= 1");
  if (!(mu > 0.0) || !std::isfinite(mu)) {
    throw std::invalid_argument("mu must be positive and finite");
  }
  if (eta < 0.0 || !std::isfinite(eta)) {
    throw std::invalid_argument("eta must be >= 0");
  }
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (refresh_every < 1) throw std::invalid_argument("refresh_every must be >= 1");
  if (epochs_warm < 0 || epochs_defense < 0) {
    throw std::invalid_argument("epoch counts must be >= 0");
  }
  if (neg_ratio < 1) throw std::invalid_argument("neg_ratio must be >= 1");
  if (support_size < 1) throw std::invalid_argument("support_size must be >= 1");
  if (mu_defense < 0.0 || !std::isfinite(mu_defense)) {
    throw std::invalid_argument("mu_defense must be >= 0");
  }
}

TrainResult train_raid(const std::vector<Interaction>& positives, int num_users,
                       int num_items, const std::vector<int>& labels,
                       const TrainConfig& cfg) {
  cfg.validate();
  if (positives.empty()) throw std::invalid_argument("no interactions to train on");
  if (static_cast<int>(labels.size()) != num_users) {
    throw std::invalid_argument("labels size does not match num_users");
  }
  for (const auto& it : positives) {
    if (it.user < 0 || it.user >= num_users || it.item < 0 || it.item >= num_items) {
      throw std::invalid_argument("interaction index out of range");
    }
  }

  TrainResult out;
  out.model = init_model(num_users, num_items, cfg.dim, cfg.seed);
  // Column-per-entity layout keeps the per-sample updates on contiguous memory.
  Eigen::MatrixXd Pt = out.model.user_vecs.transpose();
  Eigen::MatrixXd Qt = out.model.item_vecs.transpose();

  const bool any_labeled =
      std::any_of(labels.begin(), labels.end(), [](int l) { return l > 0; });
  const bool want_defense = cfg.eta != 0.0 && cfg.epochs_defense > 0;
  if (want_defense && !any_labeled) {
    out.log.defense_disabled_no_labels = true;
  }

  DefenseDriver driver;
  DefenseConfig dcfg;
  dcfg.eta = cfg.eta;
  dcfg.tau = cfg.tau;
  dcfg.refresh_every = cfg.refresh_every;
  dcfg.support_size = cfg.support_size;
  dcfg.support = cfg.support;
  dcfg.barycenter = cfg.barycenter;
  dcfg.sinkhorn = cfg.sinkhorn;
  dcfg.seed = cfg.seed;
  Eigen::VectorXd tmp(cfg.dim);

  const int total_epochs = cfg.epochs_warm + cfg.epochs_defense;
  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    EpochStats st;
    st.epoch = epoch;
    st.defense_active =
        cfg.eta != 0.0 && epoch >= cfg.epochs_warm && any_labeled;

    Eigen::MatrixXd gdef;
    if (st.defense_active) {
      const Eigen::MatrixXd user_mat = Pt.transpose();
      DefenseEpoch de;
      gdef = driver.epoch_gradient(user_mat, labels, epoch - cfg.epochs_warm,
                                   dcfg, de);
      st.refreshed = de.refreshed;
      st.defense = de.value;
      st.dual_value = de.dual_value;
      st.couplings_converged = de.couplings_converged;
    }

    const NegativeSamples negs = negative_sample(
        positives, num_items, cfg.neg_ratio,
        rng::derive(cfg.seed, 0x6e0000u + static_cast<std::uint64_t>(epoch)));
    out.log.users_skipped_negatives = negs.users_skipped;

    const std::size_t total = positives.size() + negs.negatives.size();
    std::vector<int> su(total), sv(total);
    std::vector<double> sr(total);
    for (std::size_t k = 0; k < positives.size(); ++k) {
      su[k] = positives[k].user;
      sv[k] = positives[k].item;
      sr[k] = 1.0;
    }
    for (std::size_t k = 0; k < negs.negatives.size(); ++k) {
      const std::size_t at = positives.size() + k;
      su[at] = negs.negatives[k].user;
      sv[at] = negs.negatives[k].item;
      sr[at] = 0.0;
    }
    std::vector<std::size_t> order(total);
    for (std::size_t k = 0; k < total; ++k) order[k] = k;
    rng::Engine shuf(
        rng::derive(cfg.seed, 0x5a0000u + static_cast<std::uint64_t>(epoch)));
    rng::shuffle(order, shuf);

    double acc = 0.0;
    for (const std::size_t k : order) {
      const int u = su[k];
      const int v = sv[k];
      const double r = sr[k];
      const double z = Pt.col(u).dot(Qt.col(v));
      const double s = clamp_score(1.0 / (1.0 + std::exp(-z)));
      acc += r * std::log(s) + (1.0 - r) * std::log(1.0 - s);
      const double err = cfg.mu * (s - r);
      tmp = Pt.col(u);
      Pt.col(u) -= err * Qt.col(v);
      Qt.col(v) -= err * tmp;
    }
    st.ce = -acc / static_cast<double>(total);
    if (!std::isfinite(st.ce)) {
      throw NumericalError("rating loss is not finite at epoch " +
                           std::to_string(epoch));
    }

    if (st.defense_active) {
      const double base =
          cfg.mu_defense > 0.0 ? cfg.mu_defense
                               : cfg.mu * static_cast<double>(total);
      Pt.noalias() -= (base * cfg.eta) * gdef.transpose();
      if (!Pt.allFinite()) {
        throw NumericalError("user embeddings diverged at epoch " +
                             std::to_string(epoch));
      }
    }
    out.log.epochs.push_back(st);
  }

  out.model.user_vecs = Pt.transpose();
  out.model.item_vecs = Qt.transpose();
  return out;
}

}  // namespace raid::rec
