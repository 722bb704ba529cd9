#include "raid/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace raid::ot {

namespace {

constexpr double kWeightFloor = 1e-15;

void check_weights(const Eigen::VectorXd& w, const char* name) {
  if (w.size() == 0) throw std::invalid_argument(std::string(name) + ": empty weight vector");
  if ((w.array() < 0.0).any())
    throw std::invalid_argument(std::string(name) + ": negative weight");
  if (std::abs(w.sum() - 1.0) > 1e-9)
    throw std::invalid_argument(std::string(name) + ": weights must sum to 1");
}

void check_cost(const Eigen::MatrixXd& c) {
  if (!c.allFinite()) throw std::invalid_argument("cost matrix has non-finite entries");
  if ((c.array() < 0.0).any()) throw std::invalid_argument("cost matrix has negative entries");
}

}  // namespace

void Histogram::validate() const {
  if (atoms.rows() == 0 || atoms.cols() == 0)
    throw std::invalid_argument("histogram: empty support");
  if (weights.size() != atoms.rows())
    throw std::invalid_argument("histogram: weight count does not match atom count");
  check_weights(weights, "histogram");
}

Histogram Histogram::uniform(Eigen::MatrixXd atoms) {
  if (atoms.rows() == 0) throw std::invalid_argument("histogram: empty support");
  const int n = static_cast<int>(atoms.rows());
  Histogram h{std::move(atoms), Eigen::VectorXd::Constant(n, 1.0 / n)};
  return h;
}

Eigen::MatrixXd cost_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  if (X.cols() != Y.cols())
    throw std::invalid_argument("cost_matrix: dimension mismatch");
  const Eigen::VectorXd x2 = X.rowwise().squaredNorm();
  const Eigen::VectorXd y2 = Y.rowwise().squaredNorm();
  Eigen::MatrixXd c = (-2.0 * X * Y.transpose());
  c.colwise() += x2;
  c.rowwise() += y2.transpose();
  // ||x - y||^2 computed via the expansion can go slightly negative; it is a
  // squared distance, so clamp.
  return c.cwiseMax(0.0);
}

double default_epsilon(const Eigen::MatrixXd& cost) { return 1e-3 * cost.mean(); }

Coupling sinkhorn(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                  const Eigen::MatrixXd& cost, const SinkhornOptions& opt) {
  const auto n = a.size();
  const auto m = b.size();
  if (cost.rows() != n || cost.cols() != m)
    throw std::invalid_argument("sinkhorn: cost shape does not match weights");
  check_weights(a, "sinkhorn source");
  check_weights(b, "sinkhorn target");
  check_cost(cost);
  if (opt.max_iter <= 0) throw std::invalid_argument("sinkhorn: max_iter must be positive");

  Eigen::VectorXd aw = a.cwiseMax(kWeightFloor);
  aw /= aw.sum();
  Eigen::VectorXd bw = b.cwiseMax(kWeightFloor);
  bw /= bw.sum();

  const double eps_target = opt.epsilon > 0.0 ? opt.epsilon : default_epsilon(cost);
  Coupling out;
  if (eps_target <= 0.0) {
    // All costs are zero: every feasible plan is optimal, the independence
    // coupling in particular.
    out.plan = aw * bw.transpose();
    out.converged = true;
    out.iterations = 0;
    out.marginal_violation = 0.0;
    return out;
  }

  const Eigen::ArrayXd loga = aw.array().log();
  const Eigen::ArrayXd logb = bw.array().log();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(m);

  Eigen::MatrixXd t(n, m);
  Eigen::VectorXd rowmax(n), colmax(m), lse(n), lse_c(m);

  // Warm start: anneal epsilon down from a tenth of the mean cost so the
  // potentials enter the small-epsilon regime already close to their limits.
  // A few sweeps per level lets the potentials equilibrate before the next cut.
  double eps = std::max(eps_target, 0.1 * cost.mean());
  int level_sweeps = 0;
  bool converged = false;
  double violation = std::numeric_limits<double>::infinity();
  int iter = 0;
  while (iter < opt.max_iter) {
    ++iter;
    // f_i <- eps*log a_i - eps * LSE_j((g_j - C_ij)/eps)
    t = ((-cost).rowwise() + g.transpose()) / eps;
    rowmax = t.rowwise().maxCoeff();
    lse = ((t.colwise() - rowmax).array().exp().rowwise().sum()).log().matrix() + rowmax;
    f = eps * (loga - lse.array()).matrix();
    // g_j <- eps*log b_j - eps * LSE_i((f_i - C_ij)/eps)
    t = ((-cost).colwise() + f) / eps;
    colmax = t.colwise().maxCoeff();
    lse_c = ((t.rowwise() - colmax.transpose()).array().exp().colwise().sum()).log().matrix().transpose() + colmax;
    g = eps * (logb - lse_c.array()).matrix();

    if (eps > eps_target) {
      if (++level_sweeps >= 4) {
        eps = std::max(eps_target, 0.75 * eps);
        level_sweeps = 0;
      }
      continue;
    }
    // Columns are exact after the g update; convergence is the row residual.
    t = (((-cost).colwise() + f).rowwise() + g.transpose()) / eps;
    violation = ((t.array().exp().rowwise().sum()) - aw.array()).abs().maxCoeff();
    if (violation < opt.tol) {
      converged = true;
      break;
    }
  }

  t = (((-cost).colwise() + f).rowwise() + g.transpose()) / eps;
  out.plan = t.array().exp().matrix();
  out.converged = converged;
  out.iterations = iter;

  // Project onto the exact marginal polytope: scale rows and columns down to
  // their targets, then spread the leftover mass as a rank-one correction.
  // Keeps every returned plan feasible; the perturbation is bounded by the
  // residual the iteration left behind.
  {
    const Eigen::VectorXd rs = out.plan.rowwise().sum();
    for (int i = 0; i < n; ++i)
      if (rs[i] > aw[i] && rs[i] > 0.0) out.plan.row(i) *= aw[i] / rs[i];
    const Eigen::VectorXd cs = out.plan.colwise().sum().transpose();
    for (int j = 0; j < m; ++j)
      if (cs[j] > bw[j] && cs[j] > 0.0) out.plan.col(j) *= bw[j] / cs[j];
    const Eigen::VectorXd da = (aw - out.plan.rowwise().sum()).cwiseMax(0.0);
    const Eigen::VectorXd db = (bw - out.plan.colwise().sum().transpose()).cwiseMax(0.0);
    const double rest = da.sum();
    if (rest > 0.0) out.plan.noalias() += (da / rest) * db.transpose();
  }

  const double row_viol = (out.plan.rowwise().sum() - aw).cwiseAbs().maxCoeff();
  const double col_viol = (out.plan.colwise().sum().transpose() - bw).cwiseAbs().maxCoeff();
  out.marginal_violation = std::max(row_viol, col_viol);
  return out;
}

namespace {

// Transportation simplex state: basis arcs form a spanning tree over the
// n row nodes and m column nodes.
struct SimplexState {
  int n = 0, m = 0;
  Eigen::MatrixXd flow;
  std::vector<std::vector<char>> basic;  // basic[i][j]
};

// Northwest-corner initial basic feasible solution: exactly n+m-1 basic arcs,
// degenerate zero-flow arcs included.
void northwest_corner(const Eigen::VectorXd& a, const Eigen::VectorXd& b, SimplexState& s) {
  Eigen::VectorXd ra = a, cb = b;
  int i = 0, j = 0;
  while (true) {
    const double t = std::min(ra[i], cb[j]);
    s.flow(i, j) = t;
    s.basic[i][j] = 1;
    ra[i] -= t;
    cb[j] -= t;
    if (i == s.n - 1 && j == s.m - 1) break;
    // Advance exactly one index per step so the basis keeps n+m-1 cells,
    // zero-flow degenerate cells included.
    if (ra[i] <= cb[j] && i < s.n - 1)
      ++i;
    else if (j < s.m - 1)
      ++j;
    else
      ++i;
  }
}

}  // namespace

ExactSolution exact_ot(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                       const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(b.size());
  if (cost.rows() != n || cost.cols() != m)
    throw std::invalid_argument("exact_ot: cost shape does not match weights");
  if (n * m > 64)
    throw std::invalid_argument("exact_ot: instance exceeds the 64-cell reference-solver limit");
  check_weights(a, "exact_ot source");
  check_weights(b, "exact_ot target");
  check_cost(cost);

  // Balance exactly so the tree solves are consistent.
  Eigen::VectorXd aw = a / a.sum();
  Eigen::VectorXd bw = b / b.sum();

  SimplexState s;
  s.n = n;
  s.m = m;
  s.flow = Eigen::MatrixXd::Zero(n, m);
  s.basic.assign(n, std::vector<char>(m, 0));
  northwest_corner(aw, bw, s);

  const double rc_tol = 1e-12 * (1.0 + cost.cwiseAbs().maxCoeff());
  const int node_count = n + m;
  std::vector<double> u(n), v(m);
  std::vector<char> known(node_count);
  std::vector<int> stack, parent(node_count), parent_arc_row(node_count), parent_arc_col(node_count);

  const int max_pivots = 200000;
  for (int pivot = 0;; ++pivot) {
    if (pivot >= max_pivots)
      throw std::runtime_error("exact_ot: pivot limit exceeded");

    // Duals from the tree: u_i + v_j = c_ij on basic arcs, u_0 = 0.
    std::fill(known.begin(), known.end(), 0);
    known[0] = 1;
    u[0] = 0.0;
    stack.assign(1, 0);
    int resolved = 1;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      if (node < n) {
        for (int j = 0; j < m; ++j) {
          if (s.basic[node][j] && !known[n + j]) {
            v[j] = cost(node, j) - u[node];
            known[n + j] = 1;
            ++resolved;
            stack.push_back(n + j);
          }
        }
      } else {
        const int j = node - n;
        for (int i = 0; i < n; ++i) {
          if (s.basic[i][j] && !known[i]) {
            u[i] = cost(i, j) - v[j];
            known[i] = 1;
            ++resolved;
            stack.push_back(i);
          }
        }
      }
    }
    if (resolved != node_count)
      throw std::runtime_error("exact_ot: basis lost tree connectivity");

    // Entering arc: Bland's rule, smallest row-major index with negative
    // reduced cost. None means the current flow is optimal.
    int ei = -1, ej = -1;
    for (int i = 0; i < n && ei < 0; ++i)
      for (int j = 0; j < m; ++j)
        if (!s.basic[i][j] && cost(i, j) - u[i] - v[j] < -rc_tol) {
          ei = i;
          ej = j;
          break;
        }
    if (ei < 0) break;

    // Unique tree path from the entering arc's column node back to its row
    // node; together with the entering arc it closes the pivot cycle.
    std::fill(known.begin(), known.end(), 0);
    known[n + ej] = 1;
    parent[n + ej] = -1;
    stack.assign(1, n + ej);
    while (!stack.empty() && !known[ei]) {
      const int node = stack.back();
      stack.pop_back();
      if (node < n) {
        for (int j = 0; j < m; ++j) {
          if (s.basic[node][j] && !known[n + j]) {
            known[n + j] = 1;
            parent[n + j] = node;
            parent_arc_row[n + j] = node;
            parent_arc_col[n + j] = j;
            stack.push_back(n + j);
          }
        }
      } else {
        const int j = node - n;
        for (int i = 0; i < n; ++i) {
          if (s.basic[i][j] && !known[i]) {
            known[i] = 1;
            parent[i] = node;
            parent_arc_row[i] = i;
            parent_arc_col[i] = j;
            stack.push_back(i);
          }
        }
      }
    }
    if (!known[ei]) throw std::runtime_error("exact_ot: pivot cycle not found");

    // Walk row node -> column node; the path arc incident to the entering
    // arc's row endpoint takes -theta, signs alternate from there.
    std::vector<std::pair<int, int>> minus_arcs, plus_arcs;
    bool minus = true;
    for (int node = ei; node != n + ej; node = parent[node]) {
      (minus ? minus_arcs : plus_arcs).emplace_back(parent_arc_row[node], parent_arc_col[node]);
      minus = !minus;
    }

    double theta = std::numeric_limits<double>::infinity();
    for (const auto& [i, j] : minus_arcs) theta = std::min(theta, s.flow(i, j));
    // Leaving arc: smallest row-major index among minus arcs at the minimum.
    int li = -1, lj = -1;
    for (const auto& [i, j] : minus_arcs)
      if (s.flow(i, j) == theta && (li < 0 || i * m + j < li * m + lj)) {
        li = i;
        lj = j;
      }
    if (li < 0) throw std::runtime_error("exact_ot: no leaving arc");

    for (const auto& [i, j] : plus_arcs) s.flow(i, j) += theta;
    for (const auto& [i, j] : minus_arcs) s.flow(i, j) -= theta;
    s.flow(ei, ej) = theta;
    s.basic[ei][ej] = 1;
    s.basic[li][lj] = 0;
    s.flow(li, lj) = 0.0;
  }

  ExactSolution sol;
  sol.coupling.plan = s.flow.cwiseMax(0.0);
  sol.coupling.converged = true;
  sol.coupling.iterations = 0;
  const double row_viol = (sol.coupling.plan.rowwise().sum() - aw).cwiseAbs().maxCoeff();
  const double col_viol = (sol.coupling.plan.colwise().sum().transpose() - bw).cwiseAbs().maxCoeff();
  sol.coupling.marginal_violation = std::max(row_viol, col_viol);
  sol.cost = (sol.coupling.plan.array() * cost.array()).sum();
  return sol;
}

W2Result w2_squared(const Histogram& p, const Histogram& q, PlanMethod method,
                    const SinkhornOptions& opt) {
  p.validate();
  q.validate();
  if (p.dim() != q.dim())
    throw std::invalid_argument("w2_squared: histograms live in different dimensions");
  const Eigen::MatrixXd c = cost_matrix(p.atoms, q.atoms);
  W2Result r;
  if (method == PlanMethod::exact) {
    const ExactSolution sol = exact_ot(p.weights, q.weights, c);
    r.value = sol.cost;
    r.converged = true;
  } else {
    const Coupling cpl = sinkhorn(p.weights, q.weights, c, opt);
    r.value = (cpl.plan.array() * c.array()).sum();
    r.converged = cpl.converged;
  }
  return r;
}

}  // namespace raid::ot
