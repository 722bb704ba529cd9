#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace raid::attack {

// Labeled embedding table used to probe what a classifier can read off the
// user vectors. Labels are class values >= 1.
struct AttackDataset {
  Eigen::MatrixXd features;  // N x d
  std::vector<int> labels;   // N values in 1..K

  void validate() const;
};

enum class ClassifierKind { logreg, mlp };

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::logreg;
  std::vector<int> hidden_dims = {100};  // mlp only
  double l2_weight = 1.0;
  double learning_rate = 1e-3;
  int max_iter = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

// Affine chain with rectifier activations between layers and a softmax head.
// A plain logistic regression is the zero-hidden-layer case. Inputs are
// standardized with statistics captured from the training split.
struct Classifier {
  std::vector<Eigen::MatrixXd> weights;  // layer l: fan_in x fan_out
  std::vector<Eigen::VectorXd> biases;
  Eigen::RowVectorXd feat_mean;
  Eigen::RowVectorXd feat_scale;
  std::vector<int> class_values;  // output column -> class label

  int input_dim() const { return static_cast<int>(feat_mean.cols()); }
  int num_classes() const { return static_cast<int>(class_values.size()); }

  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& X) const;  // N x K
  std::vector<int> predict(const Eigen::MatrixXd& X) const;
};

// Full-batch gradient descent with a backtracking step size, so the fit is
// deterministic given the seed. Requires at least two distinct labels.
Classifier train_classifier(const AttackDataset& data, const ClassifierConfig& cfg);

// Micro-averaged F1. With one predicted label per sample the aggregated
// precision and recall both equal plain accuracy, so this is that accuracy.
double f1_micro(const std::vector<int>& y_true, const std::vector<int>& y_pred);

// Mean per-class recall over the classes present in y_true.
double balanced_accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred);

struct FoldResult {
  double f1_micro = 0.0;
  double bacc = 0.0;
};

struct AttackReport {
  double f1_micro = 0.0;  // mean over folds and repeats
  double bacc = 0.0;
  std::vector<FoldResult> folds;       // repeats x folds, repeat-major
  std::vector<std::uint64_t> seeds;    // one per repeat
  bool stratified = true;

  std::string to_json() const;
};

// 5-fold cross-validation repeated 5 times with distinct seeds. Entries with
// label 0 are treated as unlabeled and skipped; at least 10 labeled rows and
// two classes are required. Folds are stratified per class unless some class
// has fewer members than folds, in which case plain shuffled folds are used
// and the report says so.
AttackReport evaluate_attack(const Eigen::MatrixXd& embeddings,
                             const std::vector<int>& labels,
                             const ClassifierConfig& cfg);

}  // namespace raid::attack
