#pragma once

#include <Eigen/Dense>

namespace raid::ot {

// Discrete distribution with finite support: atom p is a row of `atoms`,
// carrying mass weights[p]. Weights are nonnegative and sum to 1.
struct Histogram {
  Eigen::MatrixXd atoms;    // n x d
  Eigen::VectorXd weights;  // n

  int size() const { return static_cast<int>(atoms.rows()); }
  int dim() const { return static_cast<int>(atoms.cols()); }

  // Throws std::invalid_argument if empty, dimension-less, weights negative,
  // or weights do not sum to 1 within 1e-9.
  void validate() const;

  static Histogram uniform(Eigen::MatrixXd atoms);
};

// Pairwise squared Euclidean costs: C(i, j) = ||X.row(i) - Y.row(j)||^2.
// Throws std::invalid_argument on column-count mismatch.
Eigen::MatrixXd cost_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y);

// Transport plan between two histograms. Row marginals approximate the source
// weights, column marginals the target weights; `converged` reports whether
// the iteration met its tolerance within the iteration budget.
struct Coupling {
  Eigen::MatrixXd plan;  // n x m, entries >= 0
  bool converged = true;
  int iterations = 0;
  double marginal_violation = 0.0;
};

struct SinkhornOptions {
  double epsilon = 0.0;  // entropic regulariser; <= 0 means 1e-3 * mean(C)
  int max_iter = 2000;
  double tol = 1e-6;  // max absolute marginal violation
};

// Default regulariser used throughout: 1e-3 times the mean cost entry.
double default_epsilon(const Eigen::MatrixXd& cost);

// Entropy-regularised transport in the log domain (dual potentials updated
// with max-subtracted log-sum-exp, so small epsilon cannot underflow). An
// epsilon warm start anneals from 0.1*mean(C) down to the target; all
// iterations count against max_iter and the fixed point reached is the
// target-epsilon optimum. Weights below 1e-15 are clamped and renormalised
// before iterating. Non-convergence is reported via the flag, not an error.
Coupling sinkhorn(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                  const Eigen::MatrixXd& cost, const SinkhornOptions& opt = {});

struct ExactSolution {
  Coupling coupling;
  double cost = 0.0;
};

// Exact transport via the transportation simplex with Bland's rule.
// Reference solver for small instances; rejects n*m > 64.
ExactSolution exact_ot(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                       const Eigen::MatrixXd& cost);

enum class PlanMethod { sinkhorn, exact };

struct W2Result {
  double value = 0.0;
  bool converged = true;
};

// Squared 2-Wasserstein distance <T, C> with squared Euclidean ground cost.
// `exact` routes through the simplex (small inputs only); `sinkhorn` reports
// its convergence flag through the result.
W2Result w2_squared(const Histogram& p, const Histogram& q, PlanMethod method,
                    const SinkhornOptions& opt = {});

}  // namespace raid::ot
