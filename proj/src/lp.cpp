#include "invlmp/lp.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include <Eigen/Sparse>

namespace invlmp {

LpProblem LpProblem::with_vars(Eigen::Index n) {
  LpProblem p;
  p.cost = Vector::Zero(n);
  p.constraint_matrix = Matrix::Zero(0, n);
  p.rhs = Vector::Zero(0);
  p.var_lower = Vector::Zero(n);
  p.var_upper = Vector::Constant(n, kInf);
  return p;
}

Eigen::Index LpProblem::add_row(const Vector& coefficients, Sense sense, double value) {
  if (coefficients.size() != num_vars()) {
    throw InputError("add_row: coefficient length does not match variable count");
  }
  const Eigen::Index r = constraint_matrix.rows();
  constraint_matrix.conservativeResize(r + 1, Eigen::NoChange);
  constraint_matrix.row(r) = coefficients.transpose();
  rhs.conservativeResize(r + 1);
  rhs(r) = value;
  senses.push_back(sense);
  return r;
}

void LpProblem::validate() const {
  const auto n = cost.size();
  if (constraint_matrix.cols() != n) {
    throw InputError("constraint_matrix: column count differs from cost length");
  }
  if (constraint_matrix.rows() != rhs.size()) {
    throw InputError("rhs: length differs from constraint_matrix row count");
  }
  if (static_cast<Eigen::Index>(senses.size()) != rhs.size()) {
    throw InputError("senses: length differs from rhs length");
  }
  if (var_lower.size() != n || var_upper.size() != n) {
    throw InputError("var_lower/var_upper: length differs from cost length");
  }
  if (!cost.allFinite() || !constraint_matrix.allFinite() || !rhs.allFinite()) {
    throw InputError("cost/constraint_matrix/rhs: non-finite entry");
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isnan(var_lower(j)) || std::isnan(var_upper(j)) || var_lower(j) > var_upper(j) ||
        var_lower(j) == kInf || var_upper(j) == -kInf) {
      std::ostringstream os;
      os << "var bounds: invalid interval for variable " << j;
      throw InputError(os.str());
    }
  }
}

std::string to_string(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
    case LpStatus::kIterationLimit: return "iteration_limit";
  }
  return "unknown";
}

std::string to_string(MilpStatus status) {
  switch (status) {
    case MilpStatus::kOptimal: return "optimal";
    case MilpStatus::kInfeasible: return "infeasible";
    case MilpStatus::kNodeLimit: return "node_limit";
  }
  return "unknown";
}

namespace {

enum class VarState : unsigned char { kBasic, kLower, kUpper, kFree, kFixed };

// Bounded-variable revised simplex on the row-scaled problem
//   [A_s | slacks | artificials] z = b_s,  lo <= z <= up.
// The basis inverse is kept explicitly and refreshed by LU refactorization.
class Simplex {
 public:
  Simplex(const LpProblem& p, const LpOptions& opt) : p_(p), opt_(opt) {
    m_ = p.num_rows();
    n_ = p.num_vars();
    row_scale_ = Vector::Ones(m_);
    for (Eigen::Index r = 0; r < m_; ++r) {
      const double mx = p.constraint_matrix.row(r).cwiseAbs().maxCoeff();
      if (mx > 0.0) row_scale_(r) = 1.0 / mx;
    }
    b_ = row_scale_.cwiseProduct(p.rhs);
    build_columns();
  }

  LpSolution run() {
    LpSolution sol;
    if (num_artificial_ > 0) {
      Vector phase1 = Vector::Zero(cols_);
      phase1.tail(num_artificial_).setOnes();
      const LpStatus s1 = iterate(phase1);
      if (s1 == LpStatus::kIterationLimit) {
        sol.status = s1;
        sol.iterations = iterations_;
        return sol;
      }
      double infeas = 0.0;
      for (Eigen::Index j = cols_ - num_artificial_; j < cols_; ++j) infeas += std::abs(x_(j));
      if (infeas > opt_.tol_feas * std::max(1.0, b_.cwiseAbs().maxCoeff())) {
        sol.status = LpStatus::kInfeasible;
        sol.iterations = iterations_;
        return sol;
      }
      for (Eigen::Index j = cols_ - num_artificial_; j < cols_; ++j) {
        lo_(j) = 0.0;
        up_(j) = 0.0;
        if (state_[j] != VarState::kBasic) {
          state_[j] = VarState::kFixed;
          x_(j) = 0.0;
        }
      }
    }
    phase2_ = Vector::Zero(cols_);
    phase2_.head(n_) = p_.cost;
    const Vector& phase2 = phase2_;
    const LpStatus s2 = iterate(phase2);
    sol.status = s2;
    sol.iterations = iterations_;
    if (s2 != LpStatus::kOptimal) return sol;
    extract(phase2, sol);
    return sol;
  }

  struct Basis {
    std::vector<Eigen::Index> basis;
    std::vector<VarState> state;
  };

  Basis snapshot() const { return {basis_, state_}; }

  // Re-solves with new structural bounds starting from a basis that was
  // optimal before the bounds changed: dual simplex until primal feasible,
  // then a primal pass to clean up. kIterationLimit means "give up, solve
  // from scratch".
  LpSolution resolve(const Vector& lower, const Vector& upper, const Basis& start) {
    LpSolution sol;
    lo_.head(n_) = lower;
    up_.head(n_) = upper;
    // The up-child is solved right after its parent, whose inverse is still
    // in place.
    const bool same_basis = basis_ == start.basis;
    basis_ = start.basis;
    state_ = start.state;
    for (Eigen::Index j = 0; j < cols_; ++j) {
      if (state_[j] == VarState::kBasic) continue;
      const bool lf = std::isfinite(lo_(j)), uf = std::isfinite(up_(j));
      if (lf && uf && lo_(j) == up_(j)) state_[j] = VarState::kFixed;
      else if (state_[j] == VarState::kUpper && !uf) state_[j] = lf ? VarState::kLower : VarState::kFree;
      else if (state_[j] == VarState::kLower && !lf) state_[j] = uf ? VarState::kUpper : VarState::kFree;
      else if (state_[j] == VarState::kFixed) state_[j] = lf ? VarState::kLower : (uf ? VarState::kUpper : VarState::kFree);
      switch (state_[j]) {
        case VarState::kLower:
        case VarState::kFixed: x_(j) = lo_(j); break;
        case VarState::kUpper: x_(j) = up_(j); break;
        default: x_(j) = 0.0; break;
      }
    }
    const int start_iterations = iterations_;
    const LpStatus s1 = dual_iterate(start_iterations + 10 * static_cast<int>(m_ + 10), same_basis);
    if (s1 != LpStatus::kOptimal) {
      sol.status = s1;
      sol.iterations = iterations_ - start_iterations;
      return sol;
    }
    const LpStatus s2 = iterate(phase2_);
    sol.status = s2;
    sol.iterations = iterations_ - start_iterations;
    if (s2 == LpStatus::kOptimal) extract(phase2_, sol);
    // Anything odd in the clean-up pass is handed back to a cold solve.
    else sol.status = LpStatus::kIterationLimit;
    return sol;
  }

 private:
  void build_columns() {
    // Starting point: structurals at a finite bound (or zero when free).
    Vector x0 = Vector::Zero(n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (std::isfinite(p_.var_lower(j))) x0(j) = p_.var_lower(j);
      else if (std::isfinite(p_.var_upper(j))) x0(j) = p_.var_upper(j);
    }
    const Vector residual = b_ - row_scale_.asDiagonal() * (p_.constraint_matrix * x0);

    std::vector<Eigen::Index> slack_row;
    std::vector<double> slack_sign;
    std::vector<Eigen::Index> art_row;
    std::vector<double> art_sign;
    basis_.assign(m_, -1);
    std::vector<int> basic_slack(m_, -1);
    for (Eigen::Index r = 0; r < m_; ++r) {
      const Sense s = p_.senses[r];
      if (s == Sense::kEqual) {
        art_row.push_back(r);
        art_sign.push_back(residual(r) >= 0.0 ? 1.0 : -1.0);
        continue;
      }
      const double sign = s == Sense::kLessEqual ? 1.0 : -1.0;
      slack_row.push_back(r);
      slack_sign.push_back(sign);
      if (sign * residual(r) >= 0.0) {
        basic_slack[r] = static_cast<int>(slack_row.size() - 1);
      } else {
        art_row.push_back(r);
        art_sign.push_back(residual(r) >= 0.0 ? 1.0 : -1.0);
      }
    }
    num_slack_ = static_cast<Eigen::Index>(slack_row.size());
    num_artificial_ = static_cast<Eigen::Index>(art_row.size());
    cols_ = n_ + num_slack_ + num_artificial_;

    a_ = Matrix::Zero(m_, cols_);
    a_.leftCols(n_) = row_scale_.asDiagonal() * p_.constraint_matrix;
    lo_ = Vector::Zero(cols_);
    up_ = Vector::Constant(cols_, kInf);
    lo_.head(n_) = p_.var_lower;
    up_.head(n_) = p_.var_upper;
    x_ = Vector::Zero(cols_);
    x_.head(n_) = x0;
    state_.assign(cols_, VarState::kLower);
    for (Eigen::Index j = 0; j < n_; ++j) {
      const bool lf = std::isfinite(lo_(j));
      const bool uf = std::isfinite(up_(j));
      if (lf && uf && lo_(j) == up_(j)) state_[j] = VarState::kFixed;
      else if (lf) state_[j] = VarState::kLower;
      else if (uf) state_[j] = VarState::kUpper;
      else state_[j] = VarState::kFree;
    }
    for (Eigen::Index k = 0; k < num_slack_; ++k) {
      const Eigen::Index col = n_ + k;
      const Eigen::Index r = slack_row[k];
      a_(r, col) = slack_sign[k];
      if (basic_slack[r] == k) {
        basis_[r] = col;
        state_[col] = VarState::kBasic;
        x_(col) = slack_sign[k] * residual(r);
      }
    }
    for (Eigen::Index k = 0; k < num_artificial_; ++k) {
      const Eigen::Index col = n_ + num_slack_ + k;
      const Eigen::Index r = art_row[k];
      a_(r, col) = art_sign[k];
      basis_[r] = col;
      state_[col] = VarState::kBasic;
      x_(col) = art_sign[k] * residual(r);
    }
    binv_.setZero(m_, m_);
    for (Eigen::Index r = 0; r < m_; ++r) binv_(r, r) = 1.0 / a_(r, basis_[r]);
    sparse_a_ = a_.sparseView();
  }

  void refactor() {
    if (m_ == 0) return;
    Matrix basis_matrix(m_, m_);
    for (Eigen::Index i = 0; i < m_; ++i) basis_matrix.col(i) = a_.col(basis_[i]);
    Eigen::PartialPivLU<Matrix> lu(basis_matrix);
    binv_ = lu.inverse();
    recompute_basics();
    since_refactor_ = 0;
  }

  // x_B = B^-1 (b - N x_N) with the current inverse. Returns false when the
  // inverse has drifted enough that B x_B misses the right-hand side.
  bool recompute_basics() {
    Vector nonbasic = x_;
    for (Eigen::Index i = 0; i < m_; ++i) nonbasic(basis_[i]) = 0.0;
    const Vector rhs = b_ - sparse_a_ * nonbasic;
    const Vector xb = binv_ * rhs;
    for (Eigen::Index i = 0; i < m_; ++i) x_(basis_[i]) = xb(i);
    const double residual = (sparse_a_ * x_ - b_).cwiseAbs().maxCoeff();
    return residual <= 1e-9 * std::max(1.0, rhs.cwiseAbs().maxCoeff());
  }

  // Returns the entering column and its direction (+1 increase, -1 decrease),
  // or -1 when the current basis is optimal for `cost`.
  Eigen::Index price(const Vector& d, bool bland, double& direction) const {
    Eigen::Index best = -1;
    double best_score = 0.0;
    for (Eigen::Index j = 0; j < cols_; ++j) {
      double dir = 0.0;
      switch (state_[j]) {
        case VarState::kBasic:
        case VarState::kFixed: continue;
        case VarState::kLower:
          if (d(j) < -opt_.tol_opt) dir = 1.0;
          break;
        case VarState::kUpper:
          if (d(j) > opt_.tol_opt) dir = -1.0;
          break;
        case VarState::kFree:
          if (std::abs(d(j)) > opt_.tol_opt) dir = d(j) < 0.0 ? 1.0 : -1.0;
          break;
      }
      if (dir == 0.0) continue;
      if (bland) {
        direction = dir;
        return j;
      }
      const double score = std::abs(d(j));
      if (score > best_score) {
        best_score = score;
        best = j;
        direction = dir;
      }
    }
    return best;
  }

  LpStatus iterate(const Vector& cost) {
    int degenerate_run = 0;
    bool fresh = since_refactor_ == 0;
    while (true) {
      if (iterations_ >= opt_.max_iterations) return LpStatus::kIterationLimit;
      if (since_refactor_ >= opt_.refactor_every) {
        refactor();
        fresh = true;
      }
      Vector cb(m_);
      for (Eigen::Index i = 0; i < m_; ++i) cb(i) = cost(basis_[i]);
      const Vector y = binv_.transpose() * cb;
      const Vector d = cost - sparse_a_.transpose() * y;

      const bool bland = degenerate_run >= opt_.degenerate_switch;
      double dir = 0.0;
      const Eigen::Index q = price(d, bland, dir);
      if (q < 0) {
        if (!fresh) {
          // Confirm with clean basic values; refactor only if they drifted.
          if (!recompute_basics()) refactor();
          fresh = true;
          continue;
        }
        return LpStatus::kOptimal;
      }
      fresh = false;

      const Vector alpha = binv_ * sparse_a_.col(q);
      // Harris-style two-pass ratio test.
      double relaxed = kInf;
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double rate = -dir * alpha(i);
        if (std::abs(alpha(i)) <= opt_.tol_pivot) continue;
        const Eigen::Index bj = basis_[i];
        if (rate < 0.0 && std::isfinite(lo_(bj))) {
          relaxed = std::min(relaxed, (x_(bj) - lo_(bj) + opt_.tol_feas) / -rate);
        } else if (rate > 0.0 && std::isfinite(up_(bj))) {
          relaxed = std::min(relaxed, (up_(bj) - x_(bj) + opt_.tol_feas) / rate);
        }
      }
      Eigen::Index leave = -1;
      double step = kInf;
      double best_pivot = 0.0;
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double rate = -dir * alpha(i);
        if (std::abs(alpha(i)) <= opt_.tol_pivot) continue;
        const Eigen::Index bj = basis_[i];
        double limit = kInf;
        if (rate < 0.0 && std::isfinite(lo_(bj))) limit = (x_(bj) - lo_(bj)) / -rate;
        else if (rate > 0.0 && std::isfinite(up_(bj))) limit = (up_(bj) - x_(bj)) / rate;
        else continue;
        limit = std::max(limit, 0.0);
        if (limit > relaxed) continue;
        bool take = false;
        if (leave < 0) take = true;
        else if (bland) take = bj < basis_[leave];
        else take = std::abs(alpha(i)) > best_pivot;
        if (take) {
          leave = i;
          step = limit;
          best_pivot = std::abs(alpha(i));
        }
      }
      const double span = up_(q) - lo_(q);
      const bool flip = std::isfinite(span) && span <= step;
      if (leave < 0 && !flip) return LpStatus::kUnbounded;
      if (flip) step = span;

      ++iterations_;
      ++since_refactor_;
      degenerate_run = step <= 1e-12 ? degenerate_run + 1 : 0;

      if (step > 0.0) {
        x_(q) += dir * step;
        for (Eigen::Index i = 0; i < m_; ++i) x_(basis_[i]) -= dir * step * alpha(i);
      }
      if (flip) {
        state_[q] = dir > 0.0 ? VarState::kUpper : VarState::kLower;
        x_(q) = dir > 0.0 ? up_(q) : lo_(q);
        continue;
      }
      const Eigen::Index out = basis_[leave];
      const double out_rate = -dir * alpha(leave);
      if (lo_(out) == up_(out)) {
        state_[out] = VarState::kFixed;
        x_(out) = lo_(out);
      } else if (out_rate < 0.0) {
        state_[out] = VarState::kLower;
        x_(out) = lo_(out);
      } else {
        state_[out] = VarState::kUpper;
        x_(out) = up_(out);
      }
      basis_[leave] = q;
      state_[q] = VarState::kBasic;

      pivot_update(leave, alpha);
    }
  }

  // Dual simplex for the phase-2 cost. Assumes the current basis is dual
  // feasible; leaves on the most infeasible basic variable.
  LpStatus dual_iterate(int iteration_cap, bool inverse_current) {
    if (!inverse_current || !recompute_basics()) refactor();
    while (true) {
      if (iterations_ >= std::min(iteration_cap, opt_.max_iterations)) return LpStatus::kIterationLimit;
      if (since_refactor_ >= opt_.refactor_every) refactor();
      Eigen::Index r = -1;
      double worst = opt_.tol_feas, target = 0.0;
      for (Eigen::Index i = 0; i < m_; ++i) {
        const Eigen::Index bj = basis_[i];
        if (lo_(bj) - x_(bj) > worst) {
          worst = lo_(bj) - x_(bj);
          r = i;
          target = lo_(bj);
        } else if (x_(bj) - up_(bj) > worst) {
          worst = x_(bj) - up_(bj);
          r = i;
          target = up_(bj);
        }
      }
      if (r < 0) return LpStatus::kOptimal;
      const bool increase = x_(basis_[r]) < target;

      Vector cb(m_);
      for (Eigen::Index i = 0; i < m_; ++i) cb(i) = phase2_(basis_[i]);
      const Vector d = phase2_ - sparse_a_.transpose() * (binv_.transpose() * cb);
      const Eigen::RowVectorXd row = binv_.row(r) * sparse_a_;

      auto eligible = [&](Eigen::Index j) {
        const double a = row(j);
        if (std::abs(a) <= opt_.tol_pivot) return false;
        const double s = increase ? -a : a;
        switch (state_[j]) {
          case VarState::kLower: return s > 0.0;
          case VarState::kUpper: return s < 0.0;
          case VarState::kFree: return true;
          default: return false;
        }
      };
      double relaxed = kInf;
      for (Eigen::Index j = 0; j < cols_; ++j) {
        if (eligible(j)) relaxed = std::min(relaxed, (std::abs(d(j)) + opt_.tol_opt) / std::abs(row(j)));
      }
      Eigen::Index q = -1;
      double best_pivot = 0.0;
      for (Eigen::Index j = 0; j < cols_; ++j) {
        if (!eligible(j) || std::abs(d(j)) / std::abs(row(j)) > relaxed) continue;
        if (std::abs(row(j)) > best_pivot) {
          best_pivot = std::abs(row(j));
          q = j;
        }
      }
      if (q < 0) return LpStatus::kInfeasible;

      const Vector alpha = binv_ * sparse_a_.col(q);
      if (std::abs(alpha(r) - row(q)) > 1e-7 * std::max(1.0, std::abs(row(q)))) {
        if (since_refactor_ == 0) return LpStatus::kIterationLimit;
        refactor();
        continue;
      }
      const Eigen::Index out = basis_[r];
      const double t = (x_(out) - target) / alpha(r);
      x_(q) += t;
      for (Eigen::Index i = 0; i < m_; ++i) x_(basis_[i]) -= t * alpha(i);
      x_(out) = target;
      if (lo_(out) == up_(out)) state_[out] = VarState::kFixed;
      else state_[out] = target == lo_(out) ? VarState::kLower : VarState::kUpper;
      basis_[r] = q;
      state_[q] = VarState::kBasic;
      ++iterations_;
      ++since_refactor_;

      pivot_update(r, alpha);
    }
  }

  // Product-form update of the explicit inverse. alpha is usually sparse,
  // so untouched rows are skipped; the row-major layout keeps rows contiguous.
  void pivot_update(Eigen::Index r, const Vector& alpha) {
    binv_.row(r) /= alpha(r);
    const Eigen::RowVectorXd pivot_row = binv_.row(r);
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (i != r && alpha(i) != 0.0) binv_.row(i) -= alpha(i) * pivot_row;
    }
  }

  void extract(const Vector& cost, LpSolution& sol) {
    if (since_refactor_ > 0 && !recompute_basics()) refactor();
    Vector cb(m_);
    for (Eigen::Index i = 0; i < m_; ++i) cb(i) = cost(basis_[i]);
    const Vector y_scaled = binv_.transpose() * cb;
    const Vector y = row_scale_.cwiseProduct(y_scaled);

    sol.primal = x_.head(n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (state_[j] != VarState::kBasic) continue;
      // Snap basic values that drifted a hair past a bound.
      if (sol.primal(j) < lo_(j)) sol.primal(j) = lo_(j);
      if (sol.primal(j) > up_(j)) sol.primal(j) = up_(j);
    }
    sol.row_activity = p_.constraint_matrix * sol.primal;
    sol.reduced_costs = p_.cost - p_.constraint_matrix.transpose() * y;
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (state_[j] == VarState::kBasic) sol.reduced_costs(j) = 0.0;
    }
    sol.duals.resize(m_);
    sol.binding.assign(m_, false);
    for (Eigen::Index r = 0; r < m_; ++r) {
      const double scale = std::max(1.0, std::abs(p_.rhs(r)));
      const double slack = sol.row_activity(r) - p_.rhs(r);
      switch (p_.senses[r]) {
        case Sense::kEqual:
          sol.duals(r) = y(r);
          sol.binding[r] = true;
          break;
        case Sense::kGreaterEqual:
          sol.duals(r) = std::max(0.0, y(r));
          sol.binding[r] = std::abs(slack) <= opt_.tol_binding * scale;
          break;
        case Sense::kLessEqual:
          sol.duals(r) = std::max(0.0, -y(r));
          sol.binding[r] = std::abs(slack) <= opt_.tol_binding * scale;
          break;
      }
    }
    sol.objective = p_.cost.dot(sol.primal);
    double dual_obj = y.dot(p_.rhs);
    for (Eigen::Index j = 0; j < n_; ++j) dual_obj += sol.reduced_costs(j) * sol.primal(j);
    sol.dual_objective = dual_obj;
  }

  const LpProblem& p_;
  const LpOptions& opt_;
  Eigen::Index m_ = 0, n_ = 0, cols_ = 0, num_slack_ = 0, num_artificial_ = 0;
  Vector row_scale_, b_, lo_, up_, x_, phase2_;
  Matrix a_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> binv_;
  Eigen::SparseMatrix<double> sparse_a_;
  std::vector<Eigen::Index> basis_;
  std::vector<VarState> state_;
  int iterations_ = 0;
  int since_refactor_ = 0;
};

}  // namespace

LpSolution solve_lp(const LpProblem& problem, const LpOptions& options) {
  problem.validate();
  Simplex simplex(problem, options);
  return simplex.run();
}

LpCertificate certify(const LpProblem& problem, const LpSolution& s) {
  // Reduced costs at roundoff level carry no bound information.
  auto snap = [](double d, double c) { return std::abs(d) <= 1e-9 * std::max(1.0, std::abs(c)) ? 0.0 : d; };
  LpCertificate c;
  const Eigen::Index m = problem.num_rows();
  const Vector act = problem.constraint_matrix * s.primal;
  for (Eigen::Index r = 0; r < m; ++r) {
    const double scale = std::max(1.0, problem.constraint_matrix.row(r).cwiseAbs().maxCoeff());
    const double slack = (act(r) - problem.rhs(r)) / scale;
    double viol = 0.0;
    double canonical_slack = 0.0;
    switch (problem.senses[r]) {
      case Sense::kEqual:
        viol = std::abs(slack);
        break;
      case Sense::kGreaterEqual:
        viol = std::max(0.0, -slack);
        canonical_slack = slack;
        c.max_dual_sign_violation = std::max(c.max_dual_sign_violation, -s.duals(r));
        break;
      case Sense::kLessEqual:
        viol = std::max(0.0, slack);
        canonical_slack = -slack;
        c.max_dual_sign_violation = std::max(c.max_dual_sign_violation, -s.duals(r));
        break;
    }
    c.max_primal_violation = std::max(c.max_primal_violation, viol);
    c.max_complementarity =
        std::max(c.max_complementarity, std::abs(s.duals(r) * canonical_slack));
  }
  for (Eigen::Index j = 0; j < problem.num_vars(); ++j) {
    c.max_primal_violation = std::max(
        {c.max_primal_violation, problem.var_lower(j) - s.primal(j), s.primal(j) - problem.var_upper(j)});
    // Reduced costs pair with the distance to the bound they price.
    const double d = snap(s.reduced_costs(j), problem.cost(j));
    double gap = 0.0;
    if (d > 0.0) gap = std::isfinite(problem.var_lower(j)) ? s.primal(j) - problem.var_lower(j) : kInf;
    if (d < 0.0) gap = std::isfinite(problem.var_upper(j)) ? problem.var_upper(j) - s.primal(j) : kInf;
    if (d != 0.0) c.max_complementarity = std::max(c.max_complementarity, std::abs(d) * gap);
  }
  // Recompute the dual objective from canonical duals and reduced costs.
  double dual_obj = 0.0;
  for (Eigen::Index r = 0; r < m; ++r) {
    const double y = problem.senses[r] == Sense::kLessEqual ? -s.duals(r) : s.duals(r);
    dual_obj += y * problem.rhs(r);
  }
  for (Eigen::Index j = 0; j < problem.num_vars(); ++j) {
    const double d = snap(s.reduced_costs(j), problem.cost(j));
    if (d > 0.0) dual_obj += d * problem.var_lower(j);
    else if (d < 0.0) dual_obj += d * problem.var_upper(j);
  }
  c.duality_gap_relative =
      std::abs(s.objective - dual_obj) / std::max(1.0, std::abs(s.objective));
  return c;
}

// ---------------------------------------------------------------------------

LpSolution fix_binaries_and_resolve(const MilpProblem& problem, const std::vector<int>& assignment,
                                    const LpOptions& options) {
  if (assignment.size() != problem.binaries.size()) {
    throw InputError("assignment: length differs from binary count");
  }
  LpProblem lp = problem.lp;
  for (std::size_t k = 0; k < assignment.size(); ++k) {
    if (assignment[k] != 0 && assignment[k] != 1) throw InputError("assignment: entries must be 0 or 1");
    const auto j = problem.binaries[k];
    lp.var_lower(j) = assignment[k];
    lp.var_upper(j) = assignment[k];
  }
  return solve_lp(lp, options);
}

MilpSolution solve_milp(const MilpProblem& problem, const MilpOptions& options) {
  problem.lp.validate();
  for (auto j : problem.binaries) {
    if (j < 0 || j >= problem.lp.num_vars()) throw InputError("binaries: index out of range");
  }
  const std::size_t nb = problem.binaries.size();
  MilpSolution best;

  if (nb == 0) {
    best.lp = solve_lp(problem.lp, options.lp);
    best.nodes = 1;
    if (best.lp.optimal()) {
      best.status = MilpStatus::kOptimal;
      best.objective = best.lp.objective;
    }
    return best;
  }

  // -1: free in [0,1]; 0/1: fixed. Each node carries the optimal basis of
  // its parent so the child LP starts from it with a few dual pivots.
  using Fixing = std::vector<signed char>;
  struct Node {
    Fixing fixing;
    std::shared_ptr<const Simplex::Basis> warm;
  };
  LpProblem root = problem.lp;
  for (auto j : problem.binaries) {
    root.var_lower(j) = std::max(0.0, root.var_lower(j));
    root.var_upper(j) = std::min(1.0, root.var_upper(j));
  }
  const Vector& base_lo = root.var_lower;
  const Vector& base_up = root.var_upper;
  Simplex warm_solver(root, options.lp);
  bool warm_ready = false;

  std::vector<Node> stack{{Fixing(nb, -1), nullptr}};
  LpProblem work = root;
  bool hit_limit = false;
  auto cutoff = [&](double bound) {
    if (!best.has_incumbent()) return false;
    return bound >= best.objective - options.relative_gap * std::max(1.0, std::abs(best.objective));
  };

  while (!stack.empty()) {
    if (best.nodes >= options.node_limit) {
      hit_limit = true;
      break;
    }
    Node node = std::move(stack.back());
    stack.pop_back();
    ++best.nodes;
    work.var_lower = base_lo;
    work.var_upper = base_up;
    bool empty_box = false;
    for (std::size_t k = 0; k < nb; ++k) {
      const auto j = problem.binaries[k];
      if (node.fixing[k] >= 0) {
        work.var_lower(j) = std::max(work.var_lower(j), static_cast<double>(node.fixing[k]));
        work.var_upper(j) = std::min(work.var_upper(j), static_cast<double>(node.fixing[k]));
        if (work.var_lower(j) > work.var_upper(j)) empty_box = true;
      }
    }
    if (empty_box) continue;

    LpSolution relax;
    std::shared_ptr<const Simplex::Basis> basis;
    if (!warm_ready) {
      relax = warm_solver.run();
      warm_ready = relax.optimal();
      if (warm_ready) basis = std::make_shared<const Simplex::Basis>(warm_solver.snapshot());
    } else if (node.warm) {
      relax = warm_solver.resolve(work.var_lower, work.var_upper, *node.warm);
      if (relax.optimal()) basis = std::make_shared<const Simplex::Basis>(warm_solver.snapshot());
    }
    if (warm_ready && (!node.warm || relax.status == LpStatus::kIterationLimit)) {
      relax = solve_lp(work, options.lp);
    }
    if (!relax.optimal()) continue;
    if (cutoff(relax.objective)) continue;

    std::size_t frac = nb;
    for (std::size_t k = 0; k < nb; ++k) {
      const double v = relax.primal(problem.binaries[k]);
      if (std::abs(v - std::round(v)) > options.integrality_tol) {
        frac = k;
        break;
      }
    }
    if (frac == nb) {
      std::vector<int> assignment(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        assignment[k] = static_cast<int>(std::lround(relax.primal(problem.binaries[k])));
      }
      LpSolution fixed = fix_binaries_and_resolve(problem, assignment, options.lp);
      if (fixed.optimal() && (!best.has_incumbent() || !cutoff(fixed.objective))) {
        best.assignment = std::move(assignment);
        best.objective = fixed.objective;
        best.lp = std::move(fixed);
      }
      continue;
    }
    Fixing down = node.fixing;
    down[frac] = 0;
    Fixing up = std::move(node.fixing);
    up[frac] = 1;
    stack.push_back({std::move(down), basis});
    stack.push_back({std::move(up), basis});
  }

  if (best.has_incumbent()) best.status = hit_limit ? MilpStatus::kNodeLimit : MilpStatus::kOptimal;
  else best.status = hit_limit ? MilpStatus::kNodeLimit : MilpStatus::kInfeasible;
  return best;
}

}  // namespace invlmp
