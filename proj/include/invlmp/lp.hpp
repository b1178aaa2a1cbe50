#ifndef INVLMP_LP_HPP_
#define INVLMP_LP_HPP_

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace invlmp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Raised for malformed inputs (dimension mismatch, inverted bounds, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Sense { kLessEqual, kGreaterEqual, kEqual };

/// min cost'x  s.t.  A x (<=, >=, =) rhs,  var_lower <= x <= var_upper.
struct LpProblem {
  Vector cost;
  Matrix constraint_matrix;
  Vector rhs;
  std::vector<Sense> senses;
  Vector var_lower;
  Vector var_upper;

  Eigen::Index num_vars() const { return cost.size(); }
  Eigen::Index num_rows() const { return rhs.size(); }

  /// Empty problem over `n` nonnegative variables with zero cost.
  static LpProblem with_vars(Eigen::Index n);

  /// Appends a row and returns its index.
  Eigen::Index add_row(const Vector& coefficients, Sense sense, double rhs);

  /// Throws InputError naming the first violated structural invariant.
  void validate() const;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

std::string to_string(LpStatus status);

/// Duals are reported as nonnegative multipliers of each row rewritten in
/// ">=" form: a >= row keeps its sign, a <= row is negated, equality-row
/// duals are free and equal d(objective)/d(rhs).
struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  Vector primal;
  Vector duals;
  Vector reduced_costs;
  std::vector<bool> binding;
  Vector row_activity;
  double objective = 0.0;
  double dual_objective = 0.0;
  int iterations = 0;

  bool optimal() const { return status == LpStatus::kOptimal; }
};

struct LpOptions {
  double tol_feas = 1e-8;
  double tol_opt = 1e-9;
  double tol_pivot = 1e-9;
  double tol_binding = 1e-9;
  int max_iterations = 200000;
  /// Consecutive degenerate pivots before switching to Bland's rule.
  int degenerate_switch = 30;
  int refactor_every = 64;
};

LpSolution solve_lp(const LpProblem& problem, const LpOptions& options = {});

/// Certificate checks on an optimal solution, all in original (unscaled) units.
struct LpCertificate {
  double max_primal_violation = 0.0;
  double max_complementarity = 0.0;
  double max_dual_sign_violation = 0.0;
  double duality_gap_relative = 0.0;
};

LpCertificate certify(const LpProblem& problem, const LpSolution& solution);

// ---------------------------------------------------------------------------
// Mixed-binary programs.

struct MilpProblem {
  LpProblem lp;
  std::vector<Eigen::Index> binaries;
};

enum class MilpStatus { kOptimal, kInfeasible, kNodeLimit };

std::string to_string(MilpStatus status);

struct MilpSolution {
  MilpStatus status = MilpStatus::kInfeasible;
  /// Incumbent 0/1 values, ordered as MilpProblem::binaries.
  std::vector<int> assignment;
  /// LP with binaries fixed at the incumbent (the pricing LP).
  LpSolution lp;
  double objective = kInf;
  long nodes = 0;

  bool has_incumbent() const { return !assignment.empty(); }
};

struct MilpOptions {
  LpOptions lp;
  double integrality_tol = 1e-7;
  /// Prune a node when bound >= incumbent - relative_gap * max(1, |incumbent|).
  double relative_gap = 1e-9;
  long node_limit = 1000000;
};

/// Depth-first branch and bound. Branches on the lowest-index fractional
/// binary and explores the up-branch first; an incumbent is replaced only by
/// a strictly better one, so ties resolve to the first assignment found.
MilpSolution solve_milp(const MilpProblem& problem, const MilpOptions& options = {});

/// Fixes every binary at `assignment` (via bounds) and solves the LP.
LpSolution fix_binaries_and_resolve(const MilpProblem& problem,
                                    const std::vector<int>& assignment,
                                    const LpOptions& options = {});

}  // namespace invlmp

#endif  // INVLMP_LP_HPP_
