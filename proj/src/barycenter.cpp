#include "raid/barycenter.hpp"

#include <cmath>
#include <stdexcept>

#include "raid/rng.hpp"

namespace raid::bary {

namespace {

void check_problem(const std::vector<ot::Histogram>& classes, const Eigen::MatrixXd& support,
                   const Eigen::VectorXd& lambda, double tau) {
  if (classes.empty()) throw std::invalid_argument("barycenter: no classes");
  if (support.rows() == 0) throw std::invalid_argument("barycenter: empty support");
  if (static_cast<int>(classes.size()) != lambda.size())
    throw std::invalid_argument("barycenter: lambda size does not match class count");
  if ((lambda.array() < 0.0).any() || std::abs(lambda.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("barycenter: lambda must be a probability vector");
  if (tau <= 0.0) throw std::invalid_argument("barycenter: tau must be positive");
  for (const auto& h : classes) {
    h.validate();
    if (h.dim() != support.cols())
      throw std::invalid_argument("barycenter: class dimension does not match support");
  }
}

// Per-class cache: transposed squared-distance matrix (support x members), so
// each member's distances are a contiguous column.
struct ClassCache {
  Eigen::MatrixXd d2t;
  const Eigen::VectorXd* w = nullptr;
};

std::vector<ClassCache> build_caches(const std::vector<ot::Histogram>& classes,
                                     const Eigen::MatrixXd& support) {
  std::vector<ClassCache> caches(classes.size());
  for (std::size_t i = 0; i < classes.size(); ++i) {
    caches[i].d2t = ot::cost_matrix(support, classes[i].atoms);
    caches[i].w = &classes[i].weights;
  }
  return caches;
}

// c-transform values and argmins for every member of one class.
void ctransform_class(const ClassCache& cache, const Eigen::VectorXd& g,
                      Eigen::VectorXd& values, Eigen::VectorXi& argmins) {
  const int members = static_cast<int>(cache.d2t.cols());
  values.resize(members);
  argmins.resize(members);
  for (int nidx = 0; nidx < members; ++nidx) {
    int arg = 0;
    values[nidx] = (cache.d2t.col(nidx) - g).minCoeff(&arg);
    argmins[nidx] = arg;
  }
}

Eigen::VectorXd combined_cost(const std::vector<Eigen::VectorXd>& g,
                              const Eigen::VectorXd& lambda) {
  Eigen::VectorXd cbar = Eigen::VectorXd::Zero(g[0].size());
  for (std::size_t i = 0; i < g.size(); ++i) cbar += lambda[static_cast<int>(i)] * g[i];
  return cbar;
}

Eigen::VectorXd alpha_from_cbar(const Eigen::VectorXd& cbar, double tau) {
  const Eigen::ArrayXd z = -cbar.array() / tau;
  const double zmax = z.maxCoeff();
  Eigen::ArrayXd e = (z - zmax).exp();
  e /= e.sum();
  return e.matrix();
}

double lse_of_neg_cost(const Eigen::VectorXd& cbar, double tau) {
  const Eigen::ArrayXd z = -cbar.array() / tau;
  const double zmax = z.maxCoeff();
  return zmax + std::log((z - zmax).exp().sum());
}

struct Evaluation {
  double objective = 0.0;
  Eigen::VectorXd alpha;
  std::vector<Eigen::VectorXd> class_mass;  // mass sent to each support atom
};

Evaluation evaluate(const std::vector<ClassCache>& caches, const std::vector<Eigen::VectorXd>& g,
                    const Eigen::VectorXd& lambda, double tau) {
  Evaluation ev;
  const int support_size = static_cast<int>(g[0].size());
  double first = 0.0;
  ev.class_mass.resize(caches.size());
  Eigen::VectorXd values;
  Eigen::VectorXi argmins;
  for (std::size_t i = 0; i < caches.size(); ++i) {
    ctransform_class(caches[i], g[i], values, argmins);
    first += lambda[static_cast<int>(i)] * caches[i].w->dot(values);
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(support_size);
    for (int nidx = 0; nidx < values.size(); ++nidx)
      mass[argmins[nidx]] += (*caches[i].w)[nidx];
    ev.class_mass[i] = std::move(mass);
  }
  const Eigen::VectorXd cbar = combined_cost(g, lambda);
  ev.objective = first - tau * lse_of_neg_cost(cbar, tau);
  ev.alpha = alpha_from_cbar(cbar, tau);
  return ev;
}

}  // namespace

DualPotentials DualPotentials::zeros(int classes, int support_size) {
  DualPotentials p;
  p.g.assign(classes, Eigen::VectorXd::Zero(support_size));
  return p;
}

CTransformResult c_transform(const Eigen::VectorXd& g, const Eigen::RowVectorXd& y,
                             const Eigen::MatrixXd& support) {
  if (support.rows() != g.size())
    throw std::invalid_argument("c_transform: potential size does not match support");
  if (support.cols() != y.cols())
    throw std::invalid_argument("c_transform: point dimension does not match support");
  CTransformResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (int p = 0; p < support.rows(); ++p) {
    const double v = (y - support.row(p)).squaredNorm() - g[p];
    if (v < best.value) {
      best.value = v;
      best.argmin = p;
    }
  }
  return best;
}

Eigen::VectorXd mass_weights(const std::vector<ot::Histogram>& classes) {
  if (classes.empty()) throw std::invalid_argument("mass_weights: no classes");
  Eigen::VectorXd lambda(classes.size());
  for (std::size_t i = 0; i < classes.size(); ++i)
    lambda[static_cast<int>(i)] = static_cast<double>(classes[i].size());
  return lambda / lambda.sum();
}

double dual_objective(const DualPotentials& pot, const std::vector<ot::Histogram>& classes,
                      const Eigen::MatrixXd& support, const Eigen::VectorXd& lambda, double tau) {
  check_problem(classes, support, lambda, tau);
  if (pot.classes() != static_cast<int>(classes.size()))
    throw std::invalid_argument("dual_objective: potential count does not match classes");
  const auto caches = build_caches(classes, support);
  return evaluate(caches, pot.g, lambda, tau).objective;
}

Eigen::VectorXd recover_alpha(const DualPotentials& pot, const Eigen::VectorXd& lambda,
                              double tau) {
  if (pot.g.empty()) throw std::invalid_argument("recover_alpha: empty potentials");
  if (tau <= 0.0) throw std::invalid_argument("recover_alpha: tau must be positive");
  return alpha_from_cbar(combined_cost(pot.g, lambda), tau);
}

DualPotentials dual_ascent_step(const DualPotentials& pot,
                                const std::vector<ot::Histogram>& classes,
                                const Eigen::MatrixXd& support, const Eigen::VectorXd& lambda,
                                double tau, double step) {
  check_problem(classes, support, lambda, tau);
  const auto caches = build_caches(classes, support);
  const Evaluation ev = evaluate(caches, pot.g, lambda, tau);
  DualPotentials next = pot;
  for (std::size_t i = 0; i < classes.size(); ++i)
    next.g[i] += step * lambda[static_cast<int>(i)] * (ev.alpha - ev.class_mass[i]);
  return next;
}

Barycenter solve_barycenter(const std::vector<ot::Histogram>& classes,
                            const Eigen::MatrixXd& support, const Eigen::VectorXd& lambda,
                            double tau, const BarycenterOptions& opt) {
  check_problem(classes, support, lambda, tau);
  if (opt.steps <= 0) throw std::invalid_argument("solve_barycenter: steps must be positive");
  const auto caches = build_caches(classes, support);
  const int k = static_cast<int>(classes.size());
  const int support_size = static_cast<int>(support.rows());

  std::vector<Eigen::VectorXd> g(k, Eigen::VectorXd::Zero(support_size));
  Barycenter out;
  out.support = support;
  out.lambda = lambda;
  out.tau = tau;
  out.dual_value = -std::numeric_limits<double>::infinity();
  out.objective_trace.reserve(opt.steps + 1);

  for (int t = 1; t <= opt.steps + 1; ++t) {
    const Evaluation ev = evaluate(caches, g, lambda, tau);
    out.objective_trace.push_back(ev.objective);
    if (ev.objective > out.dual_value) {
      out.dual_value = ev.objective;
      out.potentials.g = g;
      out.alpha = ev.alpha;
    }
    if (t > opt.steps) break;  // final iterate evaluated, no further step
    const double step = opt.step0 / std::sqrt(static_cast<double>(t));
    for (int i = 0; i < k; ++i) g[i] += step * lambda[i] * (ev.alpha - ev.class_mass[i]);
  }
  return out;
}

Eigen::MatrixXd select_support(const Eigen::MatrixXd& points, int size,
                               SupportStrategy strategy, std::uint64_t seed) {
  const int n = static_cast<int>(points.rows());
  if (n == 0) throw std::invalid_argument("select_support: no points");
  if (size <= 0) throw std::invalid_argument("select_support: size must be positive");

  rng::Engine eng(rng::derive(seed, 0x59));
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  rng::shuffle(order, eng);

  if (strategy == SupportStrategy::subsample) {
    const int take = std::min(size, n);
    Eigen::MatrixXd out(take, points.cols());
    for (int i = 0; i < take; ++i) out.row(i) = points.row(order[i]);
    return out;
  }

  // kmeans: seeded distinct rows as initial centers, 25 Lloyd iterations.
  const int centers_count = std::min(size, n);
  Eigen::MatrixXd centers(centers_count, points.cols());
  for (int i = 0; i < centers_count; ++i) centers.row(i) = points.row(order[i]);
  std::vector<int> assign(n, 0);
  for (int it = 0; it < 25; ++it) {
    const Eigen::MatrixXd d2 = ot::cost_matrix(points, centers);
    for (int i = 0; i < n; ++i) {
      int arg = 0;
      d2.row(i).minCoeff(&arg);
      assign[i] = arg;
    }
    for (int c = 0; c < centers_count; ++c) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(points.cols());
      int count = 0;
      for (int i = 0; i < n; ++i)
        if (assign[i] == c) {
          mean += points.row(i);
          ++count;
        }
      if (count > 0) centers.row(c) = mean / count;  // empty cluster keeps its center
    }
  }
  return centers;
}

}  // namespace raid::bary
