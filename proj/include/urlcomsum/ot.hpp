#pragma once

#include <string>

#include <Eigen/Dense>

namespace urlcomsum {

enum class OtSolver { sinkhorn, exact };

const char* to_string(OtSolver solver);
OtSolver parse_ot_solver(const std::string& s);

struct SinkhornConfig {
  double epsilon_start = 0.1;
  double epsilon_end = 1e-3;
  int max_iters = 2000;  // per epsilon stage
  double tol = 1e-6;     // max absolute marginal violation
  // Round the final plan onto the feasible set so both marginals hold.
  bool round_to_feasible = true;
};

struct OtResult {
  Eigen::MatrixXd plan;
  double distance = 0.0;  // sum plan .* cost, unregularized
  int iterations = 0;
  double marginal_error = 0.0;  // before rounding, for sinkhorn
  bool converged = true;
  OtSolver solver = OtSolver::sinkhorn;
};

/// Log-domain Sinkhorn on the max-normalized cost with an epsilon schedule
/// halving from epsilon_start to epsilon_end, warm-started between stages.
OtResult sinkhorn(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                  const Eigen::MatrixXd& cost, const SinkhornConfig& cfg = {});

/// Exact transportation problem via successive shortest augmenting paths
/// with Dijkstra on reduced costs. Marginals hold to rounding error.
OtResult exact_transport(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                         const Eigen::MatrixXd& cost);

OtResult solve_transport(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                         const Eigen::MatrixXd& cost, OtSolver solver,
                         const SinkhornConfig& cfg = {});

}  // namespace urlcomsum
