#include "syncdmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/SparseCholesky>

namespace syncdmpc {

double QuadraticProgram::objective(const Eigen::VectorXd& z) const {
  return 0.5 * z.dot(H * z) + h.dot(z) + offset;
}

void QuadraticProgram::validate() const {
  const Eigen::Index n = h.size();
  if (H.rows() != n || H.cols() != n) throw Error("qp: H must be n x n with n = size(h)");
  if (E.cols() != n || E.rows() != e.size()) throw Error("qp: equality block dimension mismatch");
  if (G.cols() != n || G.rows() != g.size()) throw Error("qp: inequality block dimension mismatch");
  SparseMatrix asym = SparseMatrix(H.transpose()) - H;
  for (int k = 0; k < asym.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(asym, k); it; ++it) {
      if (std::abs(it.value()) > 1e-10) throw Error("qp: H is not symmetric");
    }
  }
}

QuadraticProgram QuadraticProgram::dense(const Eigen::MatrixXd& H, const Eigen::VectorXd& h,
                                         const Eigen::MatrixXd& E, const Eigen::VectorXd& e,
                                         const Eigen::MatrixXd& G, const Eigen::VectorXd& g) {
  QuadraticProgram qp;
  qp.H = H.sparseView();
  qp.h = h;
  qp.E = E.sparseView();
  qp.e = e;
  qp.G = G.sparseView();
  qp.g = g;
  if (E.size() == 0) qp.E.resize(0, h.size());
  if (G.size() == 0) qp.G.resize(0, h.size());
  return qp;
}

std::string to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::IterationLimit: return "iteration-limit";
  }
  return "?";
}

double KktResiduals::worst() const {
  return std::max({stationarity, primal_equality, primal_inequality, complementarity,
                   dual_infeasibility});
}

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

// Largest alpha in [0, 1] with v + alpha dv >= 0.
double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

// Quasi-definite KKT system
//   [H + rho I   E'         G'           ]
//   [E          -delta I    0            ]
//   [G           0         -D - delta I  ]
// with D = diag(s / mu). Solves are refined against the unregularized matrix.
class KktSystem {
 public:
  explicit KktSystem(const QuadraticProgram& qp)
      : qp_(qp), n_(qp.num_variables()), me_(qp.num_equalities()), mi_(qp.num_inequalities()) {}

  /// With `check_inertia`, a pivot sign count other than (n, me + mi) is a
  /// failure, which exposes an indefinite H. Later factorizations skip the
  /// check and escalate regularization when a pivot cancels to zero.
  bool factorize(const Eigen::VectorXd& d, bool check_inertia) {
    if (check_inertia) return factorize_with(d, 1e-9, true);
    for (double reg = 1e-9; reg <= 1e-3; reg *= 100.0) {
      if (factorize_with(d, reg, false)) return true;
    }
    return false;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = ldlt_.solve(rhs);
    for (int pass = 0; pass < 5; ++pass) {
      const Eigen::VectorXd r = rhs - apply(x);
      if (inf_norm(r) <= 1e-15 * (1.0 + inf_norm(rhs))) break;
      x += ldlt_.solve(r);
    }
    return x;
  }

  double work() const { return work_; }

 private:
  bool factorize_with(const Eigen::VectorXd& d, double reg, bool check_inertia) {
    d_ = d;
    const Eigen::Index dim = n_ + me_ + mi_;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(qp_.H.nonZeros() + 2 * qp_.E.nonZeros() +
                                           2 * qp_.G.nonZeros() + dim));
    for (int k = 0; k < qp_.H.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(qp_.H, k); it; ++it) {
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
      }
    }
    auto add_block = [&](const SparseMatrix& M, Eigen::Index offset) {
      for (int k = 0; k < M.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(M, k); it; ++it) {
          const int r = static_cast<int>(offset + it.row());
          const int c = static_cast<int>(it.col());
          trips.emplace_back(r, c, it.value());
          trips.emplace_back(c, r, it.value());
        }
      }
    };
    add_block(qp_.E, n_);
    add_block(qp_.G, n_ + me_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      trips.emplace_back(static_cast<int>(i), static_cast<int>(i), reg);
    }
    for (Eigen::Index i = 0; i < me_; ++i) {
      const int r = static_cast<int>(n_ + i);
      trips.emplace_back(r, r, -reg);
    }
    for (Eigen::Index i = 0; i < mi_; ++i) {
      const int r = static_cast<int>(n_ + me_ + i);
      trips.emplace_back(r, r, -d(i) - reg);
    }
    SparseMatrix K(dim, dim);
    K.setFromTriplets(trips.begin(), trips.end());
    if (!analyzed_) {
      ldlt_.analyzePattern(K);
      analyzed_ = true;
    }
    ldlt_.factorize(K);
    if (ldlt_.info() != Eigen::Success) return false;
    work_ += static_cast<double>(ldlt_.matrixL().nestedExpression().nonZeros());
    if (check_inertia && (ldlt_.vectorD().array() < 0.0).count() != me_ + mi_) return false;
    return true;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    const auto xz = x.head(n_);
    const auto xl = x.segment(n_, me_);
    const auto xm = x.tail(mi_);
    Eigen::VectorXd out(n_ + me_ + mi_);
    Eigen::VectorXd top = qp_.H * xz;
    if (me_ > 0) top += qp_.E.transpose() * xl;
    if (mi_ > 0) top += qp_.G.transpose() * xm;
    out.head(n_) = top;
    if (me_ > 0) out.segment(n_, me_) = qp_.E * xz;
    if (mi_ > 0) out.tail(mi_) = qp_.G * xz - d_.cwiseProduct(xm);
    return out;
  }

  const QuadraticProgram& qp_;
  Eigen::Index n_;
  Eigen::Index me_;
  Eigen::Index mi_;
  Eigen::VectorXd d_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  bool analyzed_ = false;
  double work_ = 0.0;
};

// Shifts v into the positive orthant when any entry is not positive.
Eigen::VectorXd positive_shift(const Eigen::VectorXd& v) {
  if (v.size() == 0) return v;
  const double low = v.minCoeff();
  if (low >= 1e-8 * std::max(1.0, inf_norm(v))) return v;
  return (v.array() + 1.0 - low).matrix();
}

}  // namespace

KktResiduals kkt_residuals(const QuadraticProgram& qp, const Eigen::VectorXd& z,
                           const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu) {
  KktResiduals r;
  Eigen::VectorXd grad = qp.H * z + qp.h;
  if (qp.num_equalities() > 0) grad += qp.E.transpose() * lambda;
  if (qp.num_inequalities() > 0) grad += qp.G.transpose() * mu;
  r.stationarity = inf_norm(grad);
  if (qp.num_equalities() > 0) r.primal_equality = inf_norm(qp.E * z - qp.e);
  if (qp.num_inequalities() > 0) {
    const Eigen::VectorXd slack = qp.g - qp.G * z;
    r.primal_inequality = std::max(0.0, -slack.minCoeff());
    r.complementarity = inf_norm(mu.cwiseProduct(slack));
    r.dual_infeasibility = std::max(0.0, -mu.minCoeff());
  }
  return r;
}

QpSolution solve(const QuadraticProgram& qp, const QpSettings& settings) {
  qp.validate();
  const Eigen::Index n = qp.num_variables();
  const Eigen::Index me = qp.num_equalities();
  const Eigen::Index mi = qp.num_inequalities();
  const SparseMatrix Gt = qp.G.transpose();
  const SparseMatrix Et = qp.E.transpose();

  QpSolution sol;
  KktSystem kkt(qp);

  // Least-squares start: minimize the cost plus 1/2 |G z - g|^2 under the
  // equalities; the fit residual seeds both slacks and multipliers.
  if (!kkt.factorize(Eigen::VectorXd::Ones(mi), true)) {
    throw Error("qp: KKT factorization failed (H not positive semidefinite?)");
  }
  Eigen::VectorXd rhs0(n + me + mi);
  rhs0.head(n) = -qp.h;
  rhs0.segment(n, me) = qp.e;
  rhs0.tail(mi) = qp.g;
  const Eigen::VectorXd x0 = kkt.solve(rhs0);
  Eigen::VectorXd z = x0.head(n);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(me);
  Eigen::VectorXd s = -x0.tail(mi);
  Eigen::VectorXd mu = x0.tail(mi);
  if (mi > 0) {
    // Shift into the interior, then balance so that no pair s_i mu_i starts
    // far below the average.
    s.array() += std::max(-1.5 * s.minCoeff(), 0.0);
    mu.array() += std::max(-1.5 * mu.minCoeff(), 0.0);
    const double sm = s.dot(mu);
    const double ds = 0.5 * sm / std::max(mu.sum(), 1e-300);
    const double dm = 0.5 * sm / std::max(s.sum(), 1e-300);
    s.array() += ds;
    mu.array() += dm;
    if (s.minCoeff() <= 0.0 || mu.minCoeff() <= 0.0) {
      s = positive_shift(s);
      mu = positive_shift(mu);
    }
  }

  double best_merit = std::numeric_limits<double>::infinity();
  int stalled = 0;
  sol.status = QpStatus::IterationLimit;

  for (int iter = 0; iter <= settings.max_iter; ++iter) {
    sol.iterations = iter;
    const KktResiduals res = kkt_residuals(qp, z, lambda, mu);
    Eigen::VectorXd r_i = Eigen::VectorXd::Zero(mi);
    if (mi > 0) r_i = qp.G * z + s - qp.g;
    const double gap = mi > 0 ? s.dot(mu) / static_cast<double>(mi) : 0.0;
    // Complementarity is tested per row as |mu_i slack_i| <= tol max(1, mu_i):
    // rows held by a large exact-penalty multiplier then need slack <= tol
    // instead of a product below round-off.
    double comp_scaled = 0.0;
    if (mi > 0) {
      const Eigen::VectorXd slack = qp.g - qp.G * z;
      comp_scaled = (mu.cwiseProduct(slack).cwiseAbs().array() / mu.array().max(1.0)).maxCoeff();
    }
    if (std::max({res.stationarity, res.primal(), res.dual_infeasibility, comp_scaled}) <= settings.tol &&
        inf_norm(r_i) <= settings.tol) {
      sol.status = QpStatus::Optimal;
      break;
    }
    if (iter == settings.max_iter) break;
    if (std::max(inf_norm(mu), inf_norm(lambda)) > 1e13) {
      sol.status = QpStatus::Infeasible;
      break;
    }
    const double merit = std::max({res.stationarity, res.primal(), inf_norm(r_i), gap});
    if (merit < 0.5 * best_merit) {
      best_merit = merit;
      stalled = 0;
    } else if (++stalled > 60) {
      // No progress: primal residual stuck means an empty feasible set.
      sol.status = res.primal() > std::sqrt(settings.tol) ? QpStatus::Infeasible
                                                           : QpStatus::IterationLimit;
      break;
    }

    Eigen::VectorXd r_d = qp.H * z + qp.h;
    if (me > 0) r_d += Et * lambda;
    if (mi > 0) r_d += Gt * mu;
    Eigen::VectorXd r_e = Eigen::VectorXd::Zero(me);
    if (me > 0) r_e = qp.E * z - qp.e;

    if (!kkt.factorize(s.cwiseQuotient(mu), false)) {
      throw Error("qp: KKT factorization failed");
    }

    struct Direction {
      Eigen::VectorXd dz, dl, ds, dm;
    };
    // Newton step for the residuals with complementarity target r_c:
    //   mu ds + s dm = -r_c,  G dz + ds = -r_i.
    auto direction = [&](const Eigen::VectorXd& r_c) {
      Eigen::VectorXd rhs(n + me + mi);
      rhs.head(n) = -r_d;
      rhs.segment(n, me) = -r_e;
      if (mi > 0) rhs.tail(mi) = -r_i + r_c.cwiseQuotient(mu);
      const Eigen::VectorXd x = kkt.solve(rhs);
      Direction d;
      d.dz = x.head(n);
      d.dl = x.segment(n, me);
      d.dm = x.tail(mi);
      d.ds = Eigen::VectorXd::Zero(mi);
      if (mi > 0) d.ds = -(r_c + s.cwiseProduct(d.dm)).cwiseQuotient(mu);
      return d;
    };
    auto step_length = [](const Eigen::VectorXd& sv, const Eigen::VectorXd& mv,
                          const Direction& dir) {
      return std::min(1.0, 0.995 * std::min(max_step(sv, dir.ds), max_step(mv, dir.dm)));
    };

    if (mi == 0) {
      const Direction d = direction(Eigen::VectorXd());
      z += d.dz;
      lambda += d.dl;
      continue;
    }
    const Direction aff = direction(s.cwiseProduct(mu));
    const double a_aff = std::min(max_step(s, aff.ds), max_step(mu, aff.dm));
    const double gap_aff =
        (s + a_aff * aff.ds).dot(mu + a_aff * aff.dm) / static_cast<double>(mi);
    const double sigma = std::pow(std::clamp(gap_aff / gap, 0.0, 1.0), 3);
    const Eigen::VectorXd r_c = s.cwiseProduct(mu) + aff.ds.cwiseProduct(aff.dm) -
                                Eigen::VectorXd::Constant(mi, sigma * gap);
    // Each candidate step is shortened until the new point keeps every
    // pair s_i mu_i >= gamma * gap and lowers the gap. Plain centered steps
    // are the fallback when the corrector is blocked.
    constexpr double kGamma = 1e-3;
    auto acceptable = [&](const Direction& dir, double a) {
      const Eigen::VectorXd sn = s + a * dir.ds;
      const Eigen::VectorXd mn = mu + a * dir.dm;
      const Eigen::VectorXd prod = sn.cwiseProduct(mn);
      const double gn = prod.sum() / static_cast<double>(mi);
      return prod.minCoeff() >= kGamma * gn && gn <= (1.0 - 0.01 * a) * gap;
    };
    auto shortened = [&](const Direction& dir) {
      double a = step_length(s, mu, dir);
      while (a > 1e-10 && !acceptable(dir, a)) a *= 0.8;
      return a > 1e-10 ? a : 0.0;
    };
    Direction d = direction(r_c);
    double alpha = shortened(d);
    for (double centering : {0.5, 0.9}) {
      if (alpha >= 0.1) break;
      Direction alt = direction(s.cwiseProduct(mu) -
                                Eigen::VectorXd::Constant(mi, std::max(sigma, centering) * gap));
      const double a = shortened(alt);
      if (a > alpha) {
        d = std::move(alt);
        alpha = a;
      }
    }
    if (alpha == 0.0) alpha = 1e-10;
    z += alpha * d.dz;
    lambda += alpha * d.dl;
    s += alpha * d.ds;
    mu += alpha * d.dm;
    s = s.cwiseMax(1e-300);
    mu = mu.cwiseMax(1e-300);
  }

  sol.z = z;
  sol.lambda = lambda;
  sol.mu = mu;
  sol.residuals = kkt_residuals(qp, z, lambda, mu);
  sol.objective = qp.objective(z);
  sol.work = kkt.work();
  return sol;
}

}  // namespace syncdmpc
