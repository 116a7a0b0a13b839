#include "urlcomsum/ot.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace urlcomsum {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate(const Eigen::VectorXd& p, const Eigen::VectorXd& q, const Eigen::MatrixXd& cost) {
  if (p.size() == 0 || q.size() == 0) throw std::invalid_argument("transport: empty marginal");
  if (cost.rows() != p.size() || cost.cols() != q.size())
    throw std::invalid_argument("transport: cost shape does not match marginals");
  if (!cost.allFinite() || (cost.array() < 0.0).any())
    throw std::invalid_argument("transport: cost must be finite and non-negative");
  if ((p.array() < 0.0).any() || (q.array() < 0.0).any())
    throw std::invalid_argument("transport: negative mass");
  const double sp = p.sum(), sq = q.sum();
  if (sp <= 0.0 || std::abs(sp - sq) > 1e-8 * std::max(sp, sq))
    throw std::invalid_argument("transport: marginals must carry equal positive mass");
}

double marginal_violation(const Eigen::MatrixXd& plan, const Eigen::VectorXd& p,
                          const Eigen::VectorXd& q) {
  const double r = (plan.rowwise().sum() - p).cwiseAbs().maxCoeff();
  const double c = (plan.colwise().sum().transpose() - q).cwiseAbs().maxCoeff();
  return std::max(r, c);
}

// Altschuler, Weed & Rigollet style rounding onto U(p, q).
Eigen::MatrixXd round_to_polytope(Eigen::MatrixXd plan, const Eigen::VectorXd& p,
                                  const Eigen::VectorXd& q) {
  Eigen::VectorXd rows = plan.rowwise().sum();
  for (Eigen::Index i = 0; i < plan.rows(); ++i)
    if (rows(i) > p(i)) plan.row(i) *= p(i) / rows(i);
  Eigen::VectorXd cols = plan.colwise().sum().transpose();
  for (Eigen::Index j = 0; j < plan.cols(); ++j)
    if (cols(j) > q(j)) plan.col(j) *= q(j) / cols(j);
  const Eigen::VectorXd err_r = p - plan.rowwise().sum();
  const Eigen::VectorXd err_c = q - plan.colwise().sum().transpose();
  const double mass = err_r.cwiseMax(0.0).sum();
  if (mass > 0.0) plan += err_r.cwiseMax(0.0) * err_c.cwiseMax(0.0).transpose() / mass;
  return plan;
}

}  // namespace

const char* to_string(OtSolver solver) { return solver == OtSolver::exact ? "exact" : "sinkhorn"; }

OtSolver parse_ot_solver(const std::string& s) {
  if (s == "exact") return OtSolver::exact;
  if (s == "sinkhorn") return OtSolver::sinkhorn;
  throw std::invalid_argument("unknown transport solver: " + s);
}

OtResult sinkhorn(const Eigen::VectorXd& p_full, const Eigen::VectorXd& q_full,
                  const Eigen::MatrixXd& cost_full, const SinkhornConfig& cfg) {
  validate(p_full, q_full, cost_full);
  OtResult out;
  out.solver = OtSolver::sinkhorn;
  out.plan = Eigen::MatrixXd::Zero(p_full.size(), q_full.size());

  // Zero-mass rows and columns carry no plan entries; solve on the support.
  std::vector<Eigen::Index> rows, cols;
  for (Eigen::Index i = 0; i < p_full.size(); ++i)
    if (p_full(i) > 0.0) rows.push_back(i);
  for (Eigen::Index j = 0; j < q_full.size(); ++j)
    if (q_full(j) > 0.0) cols.push_back(j);
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = static_cast<Eigen::Index>(cols.size());
  Eigen::VectorXd p(n), q(m);
  Eigen::MatrixXd cost(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    p(i) = p_full(rows[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < m; ++j)
      cost(i, j) = cost_full(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
  }
  for (Eigen::Index j = 0; j < m; ++j) q(j) = q_full(cols[static_cast<std::size_t>(j)]);
  q *= p.sum() / q.sum();

  Eigen::MatrixXd plan;
  const double cmax = cost.maxCoeff();
  if (cmax <= 0.0) {
    plan = p * q.transpose() / p.sum();
    out.marginal_error = 0.0;
  } else {
    const Eigen::MatrixXd c = cost / cmax;
    const Eigen::ArrayXd log_p = p.array().log();
    const Eigen::ArrayXd log_q = q.array().log();
    Eigen::ArrayXd f = Eigen::ArrayXd::Zero(n), g = Eigen::ArrayXd::Zero(m);
    Eigen::ArrayXd lse(n);

    std::vector<double> schedule;
    for (double eps = cfg.epsilon_start; eps > cfg.epsilon_end; eps *= 0.5) schedule.push_back(eps);
    schedule.push_back(cfg.epsilon_end);

    double err = kInf;
    for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
      const double eps = schedule[stage];
      const bool last = stage + 1 == schedule.size();
      const double stage_tol = last ? cfg.tol : std::max(cfg.tol, 1e-4);
      bool stage_done = false;
      for (int it = 0; it < cfg.max_iters; ++it) {
        // Row log-sum-exp against current g; row sums of the plan follow.
        for (Eigen::Index i = 0; i < n; ++i) {
          double mx = -kInf;
          for (Eigen::Index j = 0; j < m; ++j) mx = std::max(mx, (g(j) - c(i, j)) / eps);
          double s = 0.0;
          for (Eigen::Index j = 0; j < m; ++j) s += std::exp((g(j) - c(i, j)) / eps - mx);
          lse(i) = mx + std::log(s);
        }
        if (it > 0 || stage > 0) {
          err = 0.0;
          for (Eigen::Index i = 0; i < n; ++i)
            err = std::max(err, std::abs(std::exp(f(i) / eps + lse(i)) - p(i)));
          if (err < stage_tol) {
            stage_done = true;
            break;
          }
        }
        f = eps * (log_p - lse);
        for (Eigen::Index j = 0; j < m; ++j) {
          double mx = -kInf;
          for (Eigen::Index i = 0; i < n; ++i) mx = std::max(mx, (f(i) - c(i, j)) / eps);
          double s = 0.0;
          for (Eigen::Index i = 0; i < n; ++i) s += std::exp((f(i) - c(i, j)) / eps - mx);
          g(j) = eps * (log_q(j) - mx - std::log(s));
        }
        ++out.iterations;
      }
      if (last) out.converged = stage_done;
    }
    const double eps = schedule.back();
    plan.resize(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) plan(i, j) = std::exp((f(i) + g(j) - c(i, j)) / eps);
    out.marginal_error = marginal_violation(plan, p, q);
    if (cfg.round_to_feasible) plan = round_to_polytope(std::move(plan), p, q);
  }

  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      out.plan(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]) = plan(i, j);
  out.distance = (out.plan.array() * cost_full.array()).sum();
  return out;
}

OtResult exact_transport(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                         const Eigen::MatrixXd& cost) {
  validate(p, q, cost);
  const Eigen::Index n = p.size(), m = q.size();
  const double scale = p.sum();
  constexpr double kTiny = 1e-15;

  OtResult out;
  out.solver = OtSolver::exact;
  out.plan = Eigen::MatrixXd::Zero(n, m);
  Eigen::MatrixXd& flow = out.plan;
  Eigen::VectorXd supply = p;
  Eigen::VectorXd demand = q * (scale / q.sum());

  // Nodes: rows [0, n), columns [n, n + m).
  const Eigen::Index total = n + m;
  Eigen::VectorXd potential = Eigen::VectorXd::Zero(total);
  Eigen::VectorXd dist(total);
  std::vector<Eigen::Index> parent(static_cast<std::size_t>(total));
  std::vector<char> done(static_cast<std::size_t>(total));

  const double min_mass = kTiny * scale;
  while (supply.sum() > min_mass * static_cast<double>(n)) {
    dist.setConstant(kInf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (Eigen::Index i = 0; i < n; ++i)
      if (supply(i) > min_mass) dist(i) = 0.0;

    for (Eigen::Index iter = 0; iter < total; ++iter) {
      Eigen::Index u = -1;
      for (Eigen::Index v = 0; v < total; ++v)
        if (!done[static_cast<std::size_t>(v)] && dist(v) < kInf && (u < 0 || dist(v) < dist(u))) u = v;
      if (u < 0) break;
      done[static_cast<std::size_t>(u)] = 1;
      if (u < n) {
        for (Eigen::Index j = 0; j < m; ++j) {
          const Eigen::Index v = n + j;
          if (done[static_cast<std::size_t>(v)]) continue;
          const double w = std::max(0.0, cost(u, j) + potential(u) - potential(v));
          if (dist(u) + w < dist(v)) {
            dist(v) = dist(u) + w;
            parent[static_cast<std::size_t>(v)] = u;
          }
        }
      } else {
        const Eigen::Index j = u - n;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (done[static_cast<std::size_t>(i)] || flow(i, j) <= kTiny) continue;
          const double w = std::max(0.0, -cost(i, j) + potential(u) - potential(i));
          if (dist(u) + w < dist(i)) {
            dist(i) = dist(u) + w;
            parent[static_cast<std::size_t>(i)] = u;
          }
        }
      }
    }

    Eigen::Index target = -1;
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index v = n + j;
      if (demand(j) > min_mass && dist(v) < kInf && (target < 0 || dist(v) < dist(target))) target = v;
    }
    if (target < 0) break;

    const double cap = dist(target);
    for (Eigen::Index v = 0; v < total; ++v) potential(v) += std::min(dist(v), cap);

    double delta = demand(target - n);
    Eigen::Index v = target;
    while (parent[static_cast<std::size_t>(v)] >= 0) {
      const Eigen::Index u = parent[static_cast<std::size_t>(v)];
      if (u >= n) delta = std::min(delta, flow(v, u - n));  // reverse edge col u -> row v
      v = u;
    }
    delta = std::min(delta, supply(v));
    const Eigen::Index source = v;

    v = target;
    while (parent[static_cast<std::size_t>(v)] >= 0) {
      const Eigen::Index u = parent[static_cast<std::size_t>(v)];
      if (u < n) flow(u, v - n) += delta;
      else flow(v, u - n) -= delta;
      v = u;
    }
    supply(source) -= delta;
    demand(target - n) -= delta;
    ++out.iterations;
  }

  flow = flow.cwiseMax(0.0);
  out.marginal_error = marginal_violation(flow, p, q);
  out.distance = (flow.array() * cost.array()).sum();
  return out;
}

OtResult solve_transport(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                         const Eigen::MatrixXd& cost, OtSolver solver, const SinkhornConfig& cfg) {
  return solver == OtSolver::exact ? exact_transport(p, q, cost) : sinkhorn(p, q, cost, cfg);
}

}  // namespace urlcomsum
