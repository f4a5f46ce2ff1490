#pragma once

#include <string>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "syncdmpc/common.hpp"

namespace syncdmpc {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// minimize 1/2 z'Hz + h'z + offset  subject to  E z = e,  G z <= g.
struct QuadraticProgram {
  SparseMatrix H;
  Eigen::VectorXd h;
  double offset = 0.0;
  SparseMatrix E;
  Eigen::VectorXd e;
  SparseMatrix G;
  Eigen::VectorXd g;

  Eigen::Index num_variables() const { return h.size(); }
  Eigen::Index num_equalities() const { return e.size(); }
  Eigen::Index num_inequalities() const { return g.size(); }

  double objective(const Eigen::VectorXd& z) const;
  /// Throws on inconsistent dimensions or an asymmetric H.
  void validate() const;

  static QuadraticProgram dense(const Eigen::MatrixXd& H, const Eigen::VectorXd& h,
                                const Eigen::MatrixXd& E, const Eigen::VectorXd& e,
                                const Eigen::MatrixXd& G, const Eigen::VectorXd& g);
};

enum class QpStatus { Optimal, Infeasible, IterationLimit };

std::string to_string(QpStatus s);

struct KktResiduals {
  double stationarity = 0.0;        // ||Hz + h + E'lambda + G'mu||_inf
  double primal_equality = 0.0;     // ||Ez - e||_inf
  double primal_inequality = 0.0;   // max(Gz - g, 0)
  double complementarity = 0.0;     // max |mu_i (g - Gz)_i|
  double dual_infeasibility = 0.0;  // max(-mu, 0)

  double primal() const { return std::max(primal_equality, primal_inequality); }
  double worst() const;
};

KktResiduals kkt_residuals(const QuadraticProgram& qp, const Eigen::VectorXd& z,
                           const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu);

struct QpSettings {
  /// Optimal: stationarity and primal residuals <= tol, and per inequality
  /// |mu_i slack_i| <= tol * max(1, mu_i).
  double tol = 1e-8;
  int max_iter = 10000;
};

struct QpSolution {
  QpStatus status = QpStatus::IterationLimit;
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;
  Eigen::VectorXd mu;
  KktResiduals residuals;
  double objective = 0.0;
  int iterations = 0;
  /// Sum over factorizations of nnz(L); a deterministic measure of solver work.
  double work = 0.0;

  bool optimal() const { return status == QpStatus::Optimal; }
};

/// Primal-dual interior-point method (Mehrotra predictor-corrector) on the
/// full sparse quasi-definite KKT system. Deterministic for identical inputs.
QpSolution solve(const QuadraticProgram& qp, const QpSettings& settings = {});

}  // namespace syncdmpc
