#pragma once

#include <Eigen/Dense>
#include <vector>

#include "raid/ot.hpp"

namespace raid::bary {

// One dual vector per class, indexed over the shared support atoms.
struct DualPotentials {
  std::vector<Eigen::VectorXd> g;

  int classes() const { return static_cast<int>(g.size()); }
  static DualPotentials zeros(int classes, int support_size);
};

struct CTransformResult {
  double value = 0.0;
  int argmin = -1;  // ties resolve to the lowest index
};

// min_p ||y - support.row(p)||^2 - g[p]
CTransformResult c_transform(const Eigen::VectorXd& g, const Eigen::RowVectorXd& y,
                             const Eigen::MatrixXd& support);

// Mixture weights proportional to class sizes: lambda_i = N_i / sum_j N_j.
Eigen::VectorXd mass_weights(const std::vector<ot::Histogram>& classes);

// Concave dual of the entropy-penalised barycenter problem:
//   sum_i lambda_i * sum_n w_in * ct_i(y_n)  -  tau * log sum_q exp(-cbar_q / tau)
// with cbar_q = sum_i lambda_i g_i[q]. The log-sum-exp is max-subtracted.
double dual_objective(const DualPotentials& pot, const std::vector<ot::Histogram>& classes,
                      const Eigen::MatrixXd& support, const Eigen::VectorXd& lambda, double tau);

// Barycenter weights from the potentials: softmax of -cbar/tau, computed in
// the log domain. Always sums to 1.
Eigen::VectorXd recover_alpha(const DualPotentials& pot, const Eigen::VectorXd& lambda,
                              double tau);

// One supergradient ascent step: g_i[q] += step * lambda_i * (alpha_q - mass
// the class currently sends to q through its c-transform argmins).
DualPotentials dual_ascent_step(const DualPotentials& pot,
                                const std::vector<ot::Histogram>& classes,
                                const Eigen::MatrixXd& support, const Eigen::VectorXd& lambda,
                                double tau, double step);

struct BarycenterOptions {
  int steps = 500;
  double step0 = 1.0;  // step at iteration t is step0 / sqrt(t)
};

struct Barycenter {
  Eigen::MatrixXd support;
  Eigen::VectorXd alpha;
  DualPotentials potentials;  // best iterate found
  double dual_value = 0.0;
  Eigen::VectorXd lambda;
  double tau = 0.0;
  std::vector<double> objective_trace;  // objective at every evaluated iterate

  ot::Histogram histogram() const { return ot::Histogram{support, alpha}; }
};

// Subgradient ascent on the dual with diminishing steps, keeping the best
// iterate seen. Deterministic: no randomness is consumed.
Barycenter solve_barycenter(const std::vector<ot::Histogram>& classes,
                            const Eigen::MatrixXd& support, const Eigen::VectorXd& lambda,
                            double tau, const BarycenterOptions& opt = {});

enum class SupportStrategy { subsample, kmeans };

// Picks the fixed support the barycenter lives on. `subsample` draws rows
// without replacement; `kmeans` runs 25 seeded Lloyd iterations (empty
// clusters keep their previous center). Both are deterministic given seed.
Eigen::MatrixXd select_support(const Eigen::MatrixXd& points, int size,
                               SupportStrategy strategy, std::uint64_t seed);

}  // namespace raid::bary
