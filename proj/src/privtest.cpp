#include "kext/privtest.hpp"

#include <cmath>

namespace kext::privtest {

TwistSpec::TwistSpec(int d_, int sa, int sb, std::vector<Mat> ctrls, ControlSide s)
    : d(d_), shield_a(sa), shield_b(sb), controls(std::move(ctrls)), side(s) {
  if (d < 2) throw std::invalid_argument("TwistSpec: d must be >= 2");
  if (shield_a < 1 || shield_b < 1)
    throw std::invalid_argument("TwistSpec: shield dims must be >= 1");
  if (static_cast<int>(controls.size()) != d)
    throw std::invalid_argument("TwistSpec: need exactly d control unitaries");
  const int s_dim = shield_a * shield_b;
  for (const Mat& u : controls) {
    if (u.rows() != s_dim || u.cols() != s_dim)
      throw std::invalid_argument("TwistSpec: control has wrong dimension");
    if ((u * u.adjoint() - identity(s_dim)).cwiseAbs().maxCoeff() > 1e-10)
      throw std::invalid_argument("TwistSpec: control is not unitary");
  }
}

TwistSpec identity_twist(int d, int shield_a, int shield_b, ControlSide side) {
  std::vector<Mat> ctrls(d, identity(shield_a * shield_b));
  return TwistSpec(d, shield_a, shield_b, std::move(ctrls), side);
}

TwistSpec random_twist(int d, int shield_a, int shield_b, std::mt19937_64& rng,
                       ControlSide side) {
  std::vector<Mat> ctrls;
  ctrls.reserve(d);
  for (int i = 0; i < d; ++i) ctrls.push_back(random_unitary(shield_a * shield_b, rng));
  return TwistSpec(d, shield_a, shield_b, std::move(ctrls), side);
}

Mat twisting_unitary(const TwistSpec& spec) {
  const int d = spec.d;
  Mat v = Mat::Zero(spec.total_dim(), spec.total_dim());
  for (int i = 0; i < d; ++i) {
    Mat proj = Mat::Zero(d, d);
    proj(i, i) = 1.0;
    if (spec.side == ControlSide::A)
      v += tensor(tensor(proj, identity(d)), spec.controls[i]);
    else
      v += tensor(tensor(identity(d), proj), spec.controls[i]);
  }
  return v;
}

DensityMatrix private_state(const TwistSpec& spec, const DensityMatrix& tau) {
  if (tau.dim() != spec.shield_dim())
    throw std::invalid_argument("private_state: shield state dimension mismatch");
  Mat v = twisting_unitary(spec);
  Mat g = v * tensor(max_entangled(spec.d).mat(), tau.mat()) * v.adjoint();
  return DensityMatrix(0.5 * (g + g.adjoint()),
                       {spec.d, spec.d, spec.shield_a, spec.shield_b});
}

PrivacyTest privacy_test(const TwistSpec& spec) {
  Mat v = twisting_unitary(spec);
  Mat proj = v * tensor(max_entangled(spec.d).mat(), identity(spec.shield_dim())) *
             v.adjoint();
  return PrivacyTest{0.5 * (proj + proj.adjoint()), spec.d, spec.shield_a,
                     spec.shield_b, spec.side};
}

double pass_probability(const PrivacyTest& test, const DensityMatrix& omega) {
  if (omega.dim() != test.projector.rows())
    throw std::invalid_argument("pass_probability: dimension mismatch");
  double p = trace_inner(test.projector, omega.mat());
  if (p < -1e-12 || p > 1.0 + 1e-12)
    throw std::runtime_error("pass_probability: value outside [0,1]");
  return std::min(1.0, std::max(0.0, p));
}

double pass_ceiling(int d, int k) {
  return 1.0 / d + 1.0 / k - 1.0 / (static_cast<double>(d) * k);
}

PrivacyMaxResult max_pass_probability_ext(const PrivacyTest& test, int k,
                                          const conic::SolveOptions& opts) {
  if (k < 2) throw std::invalid_argument("max_pass_probability_ext: k must be >= 2");
  const int d = test.d;
  const int naa = d * test.shield_a;
  const int nbb = d * test.shield_b;
  double total = naa;
  for (int i = 0; i < k; ++i) total *= nbb;
  if (total > 4096)
    throw conic::GuardExceeded("max_pass_probability_ext: dimension guard exceeded");
  const int ext_dim = static_cast<int>(total);

  // regroup (A, B, A', B') as (AA')(BB'), then extend with k-1 BB' replicas
  Mat pi_grouped = reorder_systems(
      test.projector, {d, d, test.shield_a, test.shield_b}, {0, 2, 1, 3});
  long long rest = 1;
  for (int i = 0; i < k - 1; ++i) rest *= nbb;
  Mat objective = tensor(pi_grouped, identity(static_cast<int>(rest)));

  conic::SdpProblem p;
  std::vector<std::vector<int>> perms;
  for (const Permutation& g : sym_group_generators(k))
    perms.push_back(factor_perm_indices(naa, nbb, k, g));
  int omega = p.add_hermitian("omega", ext_dim, true, perms);
  conic::LinExpr tr = p.lin();
  p.lin_add_trace(tr, omega);
  p.add_eq(tr, 1.0);
  conic::LinExpr obj = p.lin();
  p.lin_add_trace_against(obj, omega, objective);
  p.set_objective(conic::Sense::Maximize, obj);

  PrivacyMaxResult res;
  res.sol = conic::solve(p, opts);
  res.value = res.sol.objective;
  res.ceiling = pass_ceiling(d, k);
  return res;
}

}  // namespace kext::privtest
