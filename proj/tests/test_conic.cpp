#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kext/conic.hpp"
#include "kext/qmat.hpp"

#include <random>
#include <sstream>

using namespace kext;
using namespace kext::conic;

namespace {

// max tr[Phi^d sigma] over sigma in Ext_k(d:d), as a standalone model
SdpProblem ext_fidelity_problem(int d, int k) {
  SdpProblem p;
  std::vector<std::vector<int>> perms;
  for (const Permutation& g : sym_group_generators(k))
    perms.push_back(factor_perm_indices(d, d, k, g));
  int omega = p.add_hermitian("omega", d * static_cast<int>(std::pow(d, k)), true, perms);
  LinExpr tr = p.lin();
  p.lin_add_trace(tr, omega);
  p.add_eq(tr, 1.0);
  Mat obj = tensor(max_entangled(d).mat(), identity(static_cast<int>(std::pow(d, k - 1))));
  LinExpr o = p.lin();
  p.lin_add_trace_against(o, omega, obj);
  p.set_objective(Sense::Maximize, o);
  return p;
}

}  // namespace

TEST_CASE("embed_hermitian") {
  // real symmetric input: block-diagonal duplicate
  Mat a = Mat::Zero(2, 2);
  a(0, 0) = 1.0;
  a(0, 1) = 2.0;
  a(1, 0) = 2.0;
  a(1, 1) = -1.0;
  RMat e = embed_hermitian(a);
  CHECK((e.topLeftCorner(2, 2) - a.real()).norm() == 0.0);
  CHECK((e.bottomRightCorner(2, 2) - a.real()).norm() == 0.0);
  CHECK(e.topRightCorner(2, 2).norm() == 0.0);

  // Pauli-Y: eigenvalues {1,1,-1,-1}
  Mat y = Mat::Zero(2, 2);
  y(0, 1) = cd(0, -1);
  y(1, 0) = cd(0, 1);
  Eigen::SelfAdjointEigenSolver<RMat> es(embed_hermitian(y));
  Eigen::VectorXd ev = es.eigenvalues();
  CHECK(ev(0) == doctest::Approx(-1.0));
  CHECK(ev(1) == doctest::Approx(-1.0));
  CHECK(ev(2) == doctest::Approx(1.0));
  CHECK(ev(3) == doctest::Approx(1.0));

  // random Hermitian: spectrum doubling against the eigensolver oracle
  std::mt19937_64 rng(7);
  Mat h = random_hermitian(5, rng);
  Eigen::SelfAdjointEigenSolver<Mat> esc(h);
  Eigen::SelfAdjointEigenSolver<RMat> esr(embed_hermitian(h));
  Eigen::VectorXd evc = esc.eigenvalues(), evr = esr.eigenvalues();
  for (int i = 0; i < 5; ++i) {
    CHECK(evr(2 * i) == doctest::Approx(evc(i)).epsilon(1e-10));
    CHECK(evr(2 * i + 1) == doctest::Approx(evc(i)).epsilon(1e-10));
  }
}

TEST_CASE("scalar LP") {
  SdpProblem p;
  int t = p.add_scalar("t", false);
  LinExpr row = p.lin();
  p.lin_add_scalar(row, t, 1.0);
  p.add_ge(row, 1.0);
  p.set_objective(Sense::Minimize, row);
  SdpSolution sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.scalar_values.at("t") == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("pure state optimum") {
  SdpProblem p;
  int sig = p.add_hermitian("sigma", 4, true);
  LinExpr tr = p.lin();
  p.lin_add_trace(tr, sig);
  p.add_eq(tr, 1.0);
  LinExpr o = p.lin();
  p.lin_add_trace_against(o, sig, max_entangled(2).mat());
  p.set_objective(Sense::Maximize, o);
  SdpSolution sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-7));
  // returned primal is a state close to Phi
  Mat s = sol.herm_values.at("sigma");
  CHECK(std::abs(s.trace().real() - 1.0) < 1e-6);
  CHECK(trace_inner(s, max_entangled(2).mat()) > 1.0 - 1e-5);
}

TEST_CASE("two-extendible fidelity ceiling") {
  SdpProblem p = ext_fidelity_problem(2, 2);
  RawSolution rs = solve_raw(p);
  REQUIRE(rs.sol.status == SolveStatus::Optimal);
  CHECK(rs.sol.objective == doctest::Approx(0.75).epsilon(1e-6));

  // independent re-check of the returned primal point
  FeasibilityReport rep = check_primal_feasibility(p, rs.x);
  CHECK(rep.min_psd_eig >= -1e-7);
  CHECK(rep.max_eq_violation <= 1e-7);

  // weak duality
  CHECK(rs.sol.residuals.gap >= -1e-8);
}

TEST_CASE("determinism") {
  SdpProblem p = ext_fidelity_problem(2, 2);
  SdpSolution a = solve(p);
  SdpSolution b = solve(p);
  CHECK(a.objective == b.objective);  // bitwise identical
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("hypothesis test LP via SDP machinery") {
  // min tr[Lambda sigma] s.t. 0 <= Lambda <= I, tr[Lambda rho] >= 1-eps
  // on commuting diagonals diag(.95,.05) vs diag(.75,.25), eps=.05 -> 0.75
  Mat rho = Mat::Zero(2, 2), sig = Mat::Zero(2, 2);
  rho(0, 0) = 0.95;
  rho(1, 1) = 0.05;
  sig(0, 0) = 0.75;
  sig(1, 1) = 0.25;
  SdpProblem p;
  int lam = p.add_hermitian("Lambda", 2, false);
  AffineHerm pos = p.affine(2);
  p.add_term(pos, lam);
  p.add_psd(pos);
  AffineHerm ub = p.affine(2);
  p.add_const(ub, SparseHerm::identity(2));
  p.add_term(ub, lam, -1.0);
  p.add_psd(ub);
  LinExpr type1 = p.lin();
  p.lin_add_trace_against(type1, lam, rho);
  p.add_ge(type1, 0.95);
  LinExpr o = p.lin();
  p.lin_add_trace_against(o, lam, sig);
  p.set_objective(Sense::Minimize, o);
  SdpSolution sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(0.75).epsilon(1e-7));
}

TEST_CASE("infeasible LP detected") {
  SdpProblem p;
  int t = p.add_scalar("t", false);
  LinExpr r1 = p.lin();
  p.lin_add_scalar(r1, t, 1.0);
  p.add_ge(r1, 1.0);  // t >= 1
  LinExpr r2 = p.lin();
  p.lin_add_scalar(r2, t, -1.0);
  p.add_ge(r2, 0.0);  // -t >= 0
  p.set_objective(Sense::Minimize, r1);
  SdpSolution sol = solve(p);
  CHECK(sol.status == SolveStatus::Infeasible);
}

TEST_CASE("weak duality and feasibility recheck on random instances") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 5; ++rep) {
    // max tr[C sigma], tr sigma = 1, sigma >= 0 : lambda_max(C)
    Mat c = random_hermitian(4, rng);
    SdpProblem p;
    int sig = p.add_hermitian("sigma", 4, true);
    LinExpr tr = p.lin();
    p.lin_add_trace(tr, sig);
    p.add_eq(tr, 1.0);
    LinExpr o = p.lin();
    p.lin_add_trace_against(o, sig, c);
    p.set_objective(Sense::Maximize, o);
    RawSolution rs = solve_raw(p);
    REQUIRE(rs.sol.status == SolveStatus::Optimal);
    Eigen::SelfAdjointEigenSolver<Mat> es(c, Eigen::EigenvaluesOnly);
    CHECK(rs.sol.objective ==
          doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-6));
    CHECK(rs.sol.residuals.gap >= -1e-8);
    FeasibilityReport rep2 = check_primal_feasibility(p, rs.x);
    CHECK(rep2.ok(1e-7));
  }
}

TEST_CASE("symmetry-restricted variable equals generator constraints") {
  // invariant subspace parameterization must reproduce the swap-symmetric
  // optimum: compare against the twirled-objective eigenvalue oracle
  std::mt19937_64 rng(41);
  Mat c = random_hermitian(8, rng);
  Permutation swap({1, 0});
  std::vector<int> idx = factor_perm_indices(2, 2, 2, swap);
  Mat w = Mat::Zero(8, 8);
  for (int i = 0; i < 8; ++i) w(idx[i], i) = 1.0;
  Mat cbar = 0.5 * (c + w * c * w.adjoint());

  SdpProblem p;
  int sig = p.add_hermitian("sigma", 8, true, {idx});
  LinExpr tr = p.lin();
  p.lin_add_trace(tr, sig);
  p.add_eq(tr, 1.0);
  LinExpr o = p.lin();
  p.lin_add_trace_against(o, sig, c);
  p.set_objective(Sense::Maximize, o);
  SdpSolution sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  Eigen::SelfAdjointEigenSolver<Mat> es(cbar, Eigen::EigenvaluesOnly);
  CHECK(sol.objective == doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-6));
  // the reconstructed variable is swap invariant
  Mat s = sol.herm_values.at("sigma");
  CHECK((w * s * w.adjoint() - s).norm() < 1e-8);
}

TEST_CASE("KEXT_SOLVER_TOL overrides the default tolerance") {
  unsetenv("KEXT_SOLVER_TOL");
  CHECK(SolveOptions::defaults().tol == 1e-8);
  setenv("KEXT_SOLVER_TOL", "1e-6", 1);
  CHECK(SolveOptions::defaults().tol == 1e-6);
  setenv("KEXT_SOLVER_TOL", "garbage", 1);
  CHECK(SolveOptions::defaults().tol == 1e-8);
  unsetenv("KEXT_SOLVER_TOL");
}

TEST_CASE("problem dump is writable") {
  SdpProblem p = ext_fidelity_problem(2, 2);
  std::ostringstream os;
  p.dump(os);
  CHECK(os.str().find("KEXT-SDP 1") == 0);
  CHECK(os.str().find("blocks") != std::string::npos);
}
