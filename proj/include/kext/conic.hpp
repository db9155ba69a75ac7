#pragma once

#include "kext/qmat.hpp"

#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

// Modeling layer and solver for small dense semidefinite programs with
// Hermitian PSD variables, nonnegative/free scalars, affine equalities and
// PSD inequalities between affine Hermitian expressions.
//
// Everything is lowered to the conic form
//     minimize c'x   subject to   Gx + s = h,  Ax = b,  s in K,
// with K a product of a nonnegative orthant and real symmetric PSD cones.
// Complex Hermitian blocks enter the cone through embed_hermitian, with the
// block structure kept explicit by parameterizing each Hermitian variable by
// its n^2 real coordinates. The solver is a primal-dual path-following
// interior-point method with Nesterov-Todd scaling and a Mehrotra
// predictor-corrector step.

namespace kext::conic {

// [[Re, -Im], [Im, Re]] embedding; eigenvalues of the input, each doubled.
RMat embed_hermitian(const Mat& h);

// Hermitian matrix in canonical upper-triangular sparse form: entries carry
// i <= j, the (j, i) entry is implied by conjugate symmetry.
struct SparseHerm {
  int dim = 0;
  std::vector<std::tuple<int, int, cd>> entries;

  static SparseHerm zero(int dim) { return SparseHerm{dim, {}}; }
  static SparseHerm from_dense(const Mat& m, double drop_tol = 0.0);
  static SparseHerm identity(int dim);
  Mat to_dense() const;
  SparseHerm scaled(double s) const;
  void add_scaled(const SparseHerm& other, double s);
  SparseHerm partial_trace(const std::vector<int>& dims,
                           const std::vector<int>& keep) const;
  // W M W^dagger for the permutation unitary W given by index map p.
  SparseHerm conjugate_by_index_perm(const std::vector<int>& p) const;
  // place this matrix as a diagonal block starting at `offset` in a larger
  // `outdim` x `outdim` matrix.
  SparseHerm embed_block(int offset, int outdim) const;
  double trace() const;
  double trace_against(const Mat& c) const;  // Re tr[this * c], c Hermitian
};

// [[0, g], [g, 0]] on dimension 2*g.dim (g Hermitian).
SparseHerm offdiag_sym_block(const SparseHerm& g);

enum class VarKind { ScalarNonneg, ScalarFree, HermitianPsd, HermitianFree };
enum class Sense { Minimize, Maximize };
enum class SolveStatus { Optimal, Infeasible, NumericalFailure };

// thrown when a problem exceeds the solver size guard
struct GuardExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolveOptions {
  double tol = 1e-8;
  int max_iter = 200;
  // reads KEXT_SOLVER_TOL from the environment for the default tolerance
  static SolveOptions defaults();
};

struct Residuals {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
};

struct SdpSolution {
  SolveStatus status = SolveStatus::NumericalFailure;
  double objective = 0.0;
  std::map<std::string, Mat> herm_values;
  std::map<std::string, double> scalar_values;
  Residuals residuals;
  int iterations = 0;
  std::string message;
};

struct LinExpr {
  std::map<int, double> coeffs;  // x-coordinate index -> coefficient
  double constant = 0.0;
};

struct AffineHerm {
  int dim = 0;
  SparseHerm constant;
  std::map<int, SparseHerm> coeffs;  // x-coordinate index -> coefficient
};

class SdpProblem {
 public:
  // Variables. Hermitian variables may carry permutation symmetries
  // W X W^dagger = X, given as index maps of the permutation unitaries; the
  // lowering restricts the coordinates to the invariant subspace spanned by
  // orbit averages of the Hermitian basis, which is equivalent to adding the
  // generator equality constraints.
  int add_scalar(const std::string& name, bool nonneg);
  int add_hermitian(const std::string& name, int dim, bool psd,
                    const std::vector<std::vector<int>>& symmetry_index_perms = {});

  // Affine Hermitian expressions
  AffineHerm affine(int dim) const;
  void add_const(AffineHerm& e, const SparseHerm& c) const;
  void add_scalar_term(AffineHerm& e, int scalar_var, const SparseHerm& coeff) const;
  void add_term(AffineHerm& e, int herm_var, double scale = 1.0) const;
  void add_mapped(AffineHerm& e, int herm_var,
                  const std::function<SparseHerm(const SparseHerm&)>& map) const;

  // Constraints
  void add_psd(const AffineHerm& e);      // e >= 0 (PSD)
  void add_eq_zero(const AffineHerm& e);  // e == 0 entrywise

  LinExpr lin() const { return LinExpr{}; }
  void lin_add_scalar(LinExpr& e, int scalar_var, double c) const;
  void lin_add_trace(LinExpr& e, int herm_var, double scale = 1.0) const;
  void lin_add_trace_against(LinExpr& e, int herm_var, const Mat& c) const;
  void add_eq(const LinExpr& e, double rhs);
  void add_ge(const LinExpr& e, double rhs);

  void set_objective(Sense sense, const LinExpr& e);

  // Reconstruction and introspection
  int coord_count() const { return nx_; }
  Mat herm_value(int var, const Eigen::VectorXd& x) const;
  double scalar_value(int var, const Eigen::VectorXd& x) const;
  int psd_guard_dim() const;  // total complex PSD dimension, for guards

  // Sparse text dump of the lowered conic data (documented in the README).
  void dump(std::ostream& os) const;

  struct Var {
    std::string name;
    VarKind kind;
    int dim = 1;  // complex dimension for Hermitian variables
    int offset = 0;
    int ncoords = 1;
    std::vector<SparseHerm> basis;  // per coordinate, Hermitian variables
  };
  struct RTrip {
    int r, c;
    double v;
  };  // r <= c, real symmetric upper entry
  struct Block {
    int edim = 0;                        // embedded (real) dimension
    std::map<int, std::vector<RTrip>> g;  // G columns (already negated)
    std::vector<RTrip> h;
  };
  struct LpRow {
    std::map<int, double> g;  // G row entries (already negated)
    double h = 0.0;
  };

  const std::vector<Var>& vars() const { return vars_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const std::vector<LpRow>& lp_rows() const { return lp_; }
  const std::vector<std::map<int, double>>& eq_rows() const { return arows_; }
  const std::vector<double>& eq_rhs() const { return brhs_; }
  const std::map<int, double>& objective() const { return obj_; }
  double objective_constant() const { return obj_const_; }
  bool maximize() const { return maximize_; }

 private:
  const Var& checked_var(int v, bool hermitian) const;

  std::vector<Var> vars_;
  int nx_ = 0;
  std::vector<Block> blocks_;
  std::vector<LpRow> lp_;
  std::vector<std::map<int, double>> arows_;
  std::vector<double> brhs_;
  std::map<int, double> obj_;
  double obj_const_ = 0.0;
  bool maximize_ = false;
};

SdpSolution solve(const SdpProblem& p, const SolveOptions& opts = SolveOptions::defaults());

// Independent feasibility check of the returned primal point: re-evaluates
// every cone block, LP row and equality at the solution.
struct FeasibilityReport {
  double min_psd_eig = 0.0;       // most negative eigenvalue over PSD blocks
  double max_eq_violation = 0.0;  // worst |Ax - b|
  double max_lp_violation = 0.0;  // worst negative LP slack (as a positive number)
  bool ok(double tol) const {
    return min_psd_eig >= -tol && max_eq_violation <= tol && max_lp_violation <= tol;
  }
};
FeasibilityReport check_primal_feasibility(const SdpProblem& p, const Eigen::VectorXd& x);

// solve() plus raw coordinate access, used by feasibility re-checks.
struct RawSolution {
  SdpSolution sol;
  Eigen::VectorXd x;
};
RawSolution solve_raw(const SdpProblem& p, const SolveOptions& opts = SolveOptions::defaults());

}  // namespace kext::conic
