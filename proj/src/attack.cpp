#include "raid/attack.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "raid/rng.hpp"

namespace raid::attack {

namespace {

constexpr double kScaleFloor = 1e-12;
constexpr double kMinStep = 1e-15;

Eigen::MatrixXd standardize(const Eigen::MatrixXd& X, const Eigen::RowVectorXd& mean,
                            const Eigen::RowVectorXd& scale) {
  Eigen::MatrixXd out = X.rowwise() - mean;
  out.array().rowwise() /= scale.array();
  return out;
}

// Row-stable softmax cross-entropy pieces. Z is logits, Y one-hot targets.
double ce_from_logits(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Y) {
  const Eigen::VectorXd rowmax = Z.rowwise().maxCoeff();
  const Eigen::VectorXd lse =
      ((Z.colwise() - rowmax).array().exp().rowwise().sum()).log().matrix() + rowmax;
  const double hit = (Z.cwiseProduct(Y)).sum();
  return (lse.sum() - hit) / static_cast<double>(Z.rows());
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& Z) {
  const Eigen::VectorXd rowmax = Z.rowwise().maxCoeff();
  Eigen::MatrixXd P = (Z.colwise() - rowmax).array().exp().matrix();
  const Eigen::VectorXd sums = P.rowwise().sum();
  P.array().colwise() /= sums.array();
  return P;
}

struct Workspace {
  std::vector<Eigen::MatrixXd> acts;  // acts[l] feeds layer l; acts[0] = input
  std::vector<Eigen::MatrixXd> zs;    // pre-activation per layer
};

Eigen::MatrixXd forward(const Classifier& clf, const Eigen::MatrixXd& Xs,
                        Workspace* ws) {
  Eigen::MatrixXd a = Xs;
  if (ws) {
    ws->acts.clear();
    ws->zs.clear();
  }
  const std::size_t layers = clf.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    if (ws) ws->acts.push_back(a);
    Eigen::MatrixXd z =
        (a * clf.weights[l]).rowwise() + clf.biases[l].transpose();
    if (ws) ws->zs.push_back(z);
    if (l + 1 < layers) {
      a = z.cwiseMax(0.0);
    } else {
      a = std::move(z);
    }
  }
  return a;  // logits
}

// Objective: mean cross entropy plus (l2/2) * sum of squared weight tables.
// Biases stay unpenalised. Tying the penalty to the mean loss (not the sum)
// keeps the fit invariant under duplicating every sample.
double full_loss(const Classifier& clf, const Eigen::MatrixXd& Z,
                 const Eigen::MatrixXd& Y, double l2) {
  double reg = 0.0;
  for (const auto& W : clf.weights) reg += W.squaredNorm();
  return ce_from_logits(Z, Y) + 0.5 * l2 * reg;
}

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

Gradients backward(const Classifier& clf, const Workspace& ws,
                   const Eigen::MatrixXd& logits, const Eigen::MatrixXd& Y,
                   double l2) {
  const double invn = 1.0 / static_cast<double>(Y.rows());
  const std::size_t layers = clf.weights.size();
  Gradients g;
  g.weights.resize(layers);
  g.biases.resize(layers);
  Eigen::MatrixXd dz = (softmax_rows(logits) - Y) * invn;
  for (std::size_t l = layers; l-- > 0;) {
    g.weights[l] = ws.acts[l].transpose() * dz + l2 * clf.weights[l];
    g.biases[l] = dz.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd da = dz * clf.weights[l].transpose();
      dz = da.cwiseProduct(
          (ws.zs[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

}  // namespace

void AttackDataset::validate() const {
  if (features.rows() == 0) throw std::invalid_argument("empty attack dataset");
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw std::invalid_argument("features and labels differ in length");
  }
  for (const int l : labels) {
    if (l < 1) throw std::invalid_argument("attack labels must be >= 1");
  }
}

void ClassifierConfig::validate() const {
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be positive");
  }
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (l2_weight < 0.0) throw std::invalid_argument("l2_weight must be >= 0");
  for (const int h : hidden_dims) {
    if (h < 1) throw std::invalid_argument("hidden layer sizes must be >= 1");
  }
}

Eigen::MatrixXd Classifier::predict_proba(const Eigen::MatrixXd& X) const {
  if (X.cols() != feat_mean.cols()) {
    throw std::invalid_argument("feature dimension mismatch");
  }
  return softmax_rows(forward(*this, standardize(X, feat_mean, feat_scale), nullptr));
}

std::vector<int> Classifier::predict(const Eigen::MatrixXd& X) const {
  const Eigen::MatrixXd P = predict_proba(X);
  std::vector<int> out(static_cast<std::size_t>(P.rows()));
  for (Eigen::Index r = 0; r < P.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < P.cols(); ++c) {
      if (P(r, c) > P(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = class_values[static_cast<std::size_t>(best)];
  }
  return out;
}

Classifier train_classifier(const AttackDataset& data, const ClassifierConfig& cfg) {
  data.validate();
  cfg.validate();

  std::vector<int> classes(data.labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) {
    throw std::invalid_argument("training data holds a single class");
  }
  const int K = static_cast<int>(classes.size());
  const Eigen::Index n = data.features.rows();
  const Eigen::Index d = data.features.cols();

  Classifier clf;
  clf.class_values = classes;
  clf.feat_mean = data.features.colwise().mean();
  Eigen::RowVectorXd sd =
      ((data.features.rowwise() - clf.feat_mean).array().square().colwise().mean())
          .sqrt()
          .matrix();
  clf.feat_scale = sd.unaryExpr(
      [](double s) { return s < kScaleFloor ? 1.0 : s; });

  std::vector<int> dims;
  dims.push_back(static_cast<int>(d));
  if (cfg.kind == ClassifierKind::mlp) {
    for (const int h : cfg.hidden_dims) dims.push_back(h);
  }
  dims.push_back(K);

  rng::Engine eng(rng::derive(cfg.seed, 0xc1a5));
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Eigen::MatrixXd W(dims[l], dims[l + 1]);
    if (cfg.kind == ClassifierKind::logreg) {
      W.setZero();  // convex problem, deterministic start
    } else {
      const double sdv = std::sqrt(2.0 / static_cast<double>(dims[l]));
      for (Eigen::Index r = 0; r < W.rows(); ++r) {
        for (Eigen::Index c = 0; c < W.cols(); ++c) {
          W(r, c) = sdv * rng::gaussian(eng);
        }
      }
    }
    clf.weights.push_back(std::move(W));
    clf.biases.push_back(Eigen::VectorXd::Zero(dims[l + 1]));
  }

  const Eigen::MatrixXd Xs = standardize(data.features, clf.feat_mean, clf.feat_scale);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n, K);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto it = std::lower_bound(classes.begin(), classes.end(),
                                     data.labels[static_cast<std::size_t>(i)]);
    Y(i, it - classes.begin()) = 1.0;
  }

  // Backtracking full-batch descent: halve the step on any loss increase and
  // revert, grow it 1.2x after three straight accepted steps.
  Workspace ws;
  Eigen::MatrixXd logits = forward(clf, Xs, &ws);
  double loss = full_loss(clf, logits, Y, cfg.l2_weight);
  double lr = cfg.learning_rate;
  int streak = 0;
  bool need_grad = true;
  Gradients g;
  for (int iter = 0; iter < cfg.max_iter && lr > kMinStep; ++iter) {
    if (need_grad) {
      g = backward(clf, ws, logits, Y, cfg.l2_weight);
      need_grad = false;
    }
    Classifier trial = clf;
    for (std::size_t l = 0; l < trial.weights.size(); ++l) {
      trial.weights[l] -= lr * g.weights[l];
      trial.biases[l] -= lr * g.biases[l];
    }
    Workspace tws;
    Eigen::MatrixXd tlogits = forward(trial, Xs, &tws);
    const double tloss = full_loss(trial, tlogits, Y, cfg.l2_weight);
    if (tloss <= loss) {
      clf.weights = std::move(trial.weights);
      clf.biases = std::move(trial.biases);
      logits = std::move(tlogits);
      ws = std::move(tws);
      loss = tloss;
      need_grad = true;
      if (++streak >= 3) {
        lr *= 1.2;
        streak = 0;
      }
    } else {
      lr *= 0.5;
      streak = 0;
    }
  }
  return clf;
}

double f1_micro(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.empty() || y_true.size() != y_pred.size()) {
    throw std::invalid_argument("prediction vectors must match and be nonempty");
  }
  // Micro aggregation over classes makes FP and FN both equal the number of
  // misclassified samples, so precision = recall = accuracy.
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] == y_pred[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(y_true.size());
}

double balanced_accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.empty() || y_true.size() != y_pred.size()) {
    throw std::invalid_argument("prediction vectors must match and be nonempty");
  }
  std::map<int, std::pair<int, int>> per_class;  // class -> (true count, hits)
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    auto& slot = per_class[y_true[i]];
    ++slot.first;
    if (y_pred[i] == y_true[i]) ++slot.second;
  }
  double acc = 0.0;
  for (const auto& [cls, counts] : per_class) {
    (void)cls;
    acc += static_cast<double>(counts.second) / static_cast<double>(counts.first);
  }
  return acc / static_cast<double>(per_class.size());
}

std::string AttackReport::to_json() const {
  nlohmann::json j;
  j["f1_micro"] = f1_micro;
  j["bacc"] = bacc;
  j["stratified"] = stratified;
  j["seeds"] = seeds;
  j["folds"] = nlohmann::json::array();
  for (const auto& f : folds) {
    j["folds"].push_back({{"f1_micro", f.f1_micro}, {"bacc", f.bacc}});
  }
  return j.dump(2);
}

AttackReport evaluate_attack(const Eigen::MatrixXd& embeddings,
                             const std::vector<int>& labels,
                             const ClassifierConfig& cfg) {
  cfg.validate();
  if (static_cast<Eigen::Index>(labels.size()) != embeddings.rows()) {
    throw std::invalid_argument("labels size does not match embedding rows");
  }
  std::vector<int> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) throw std::invalid_argument("labels must be >= 0");
    if (labels[i] > 0) rows.push_back(static_cast<int>(i));
  }
  if (rows.size() < 10) {
    throw std::invalid_argument("need at least 10 labeled users to attack");
  }
  std::map<int, std::vector<int>> by_class;  // class -> positions in rows
  for (std::size_t p = 0; p < rows.size(); ++p) {
    by_class[labels[static_cast<std::size_t>(rows[p])]].push_back(static_cast<int>(p));
  }
  if (by_class.size() < 2) {
    throw std::invalid_argument("attack needs at least two classes");
  }

  constexpr int kFolds = 5;
  constexpr int kRepeats = 5;
  AttackReport report;
  report.stratified = true;
  for (const auto& [cls, members] : by_class) {
    (void)cls;
    if (static_cast<int>(members.size()) < kFolds) report.stratified = false;
  }

  Eigen::MatrixXd feats(static_cast<Eigen::Index>(rows.size()), embeddings.cols());
  std::vector<int> labs(rows.size());
  for (std::size_t p = 0; p < rows.size(); ++p) {
    feats.row(static_cast<Eigen::Index>(p)) = embeddings.row(rows[p]);
    labs[p] = labels[static_cast<std::size_t>(rows[p])];
  }

  for (int rep = 0; rep < kRepeats; ++rep) {
    const std::uint64_t rep_seed =
        rng::derive(cfg.seed, 0xa0u + static_cast<std::uint64_t>(rep));
    report.seeds.push_back(rep_seed);
    rng::Engine eng(rep_seed);

    std::vector<int> fold_of(rows.size(), 0);
    if (report.stratified) {
      for (const auto& [cls, members] : by_class) {
        (void)cls;
        std::vector<int> order = members;
        rng::shuffle(order, eng);
        for (std::size_t i = 0; i < order.size(); ++i) {
          fold_of[static_cast<std::size_t>(order[i])] = static_cast<int>(i % kFolds);
        }
      }
    } else {
      std::vector<int> order(rows.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      rng::shuffle(order, eng);
      for (std::size_t i = 0; i < order.size(); ++i) {
        fold_of[static_cast<std::size_t>(order[i])] = static_cast<int>(i % kFolds);
      }
    }

    for (int f = 0; f < kFolds; ++f) {
      std::vector<int> tr, te;
      for (std::size_t p = 0; p < rows.size(); ++p) {
        (fold_of[p] == f ? te : tr).push_back(static_cast<int>(p));
      }
      AttackDataset train;
      train.features.resize(static_cast<Eigen::Index>(tr.size()), feats.cols());
      train.labels.resize(tr.size());
      for (std::size_t i = 0; i < tr.size(); ++i) {
        train.features.row(static_cast<Eigen::Index>(i)) = feats.row(tr[i]);
        train.labels[i] = labs[static_cast<std::size_t>(tr[i])];
      }
      ClassifierConfig sub = cfg;
      sub.seed = rng::derive(cfg.seed, 0xf000u + static_cast<std::uint64_t>(rep * kFolds + f));
      const Classifier clf = train_classifier(train, sub);

      Eigen::MatrixXd test_x(static_cast<Eigen::Index>(te.size()), feats.cols());
      std::vector<int> test_y(te.size());
      for (std::size_t i = 0; i < te.size(); ++i) {
        test_x.row(static_cast<Eigen::Index>(i)) = feats.row(te[i]);
        test_y[i] = labs[static_cast<std::size_t>(te[i])];
      }
      const std::vector<int> pred = clf.predict(test_x);
      FoldResult fr;
      fr.f1_micro = f1_micro(test_y, pred);
      fr.bacc = balanced_accuracy(test_y, pred);
      report.folds.push_back(fr);
    }
  }

  for (const auto& f : report.folds) {
    report.f1_micro += f.f1_micro;
    report.bacc += f.bacc;
  }
  report.f1_micro /= static_cast<double>(report.folds.size());
  report.bacc /= static_cast<double>(report.folds.size());
  return report;
}

}  // namespace raid::attack
