#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kext/privtest.hpp"

#include <random>

using namespace kext;
using namespace kext::privtest;

namespace {

// independent oracle: max tr[Pi sigma] over Ext_k equals the top eigenvalue
// of the objective twirled over the full permutation group of the replicas
double twirl_oracle(const PrivacyTest& test, int k) {
  const int d = test.d;
  const int naa = d * test.shield_a;
  const int nbb = d * test.shield_b;
  Mat pi2 = reorder_systems(test.projector, {d, d, test.shield_a, test.shield_b},
                            {0, 2, 1, 3});
  long long rest = 1;
  for (int i = 0; i < k - 1; ++i) rest *= nbb;
  Mat c = tensor(pi2, identity(static_cast<int>(rest)));
  Mat acc = Mat::Zero(c.rows(), c.cols());
  std::vector<Permutation> group = generate_group(sym_group_generators(k));
  for (const Permutation& g : group) {
    std::vector<int> p = factor_perm_indices(naa, nbb, k, g);
    Mat cg(c.rows(), c.cols());
    for (Eigen::Index i = 0; i < c.rows(); ++i)
      for (Eigen::Index j = 0; j < c.cols(); ++j) cg(p[i], p[j]) = c(i, j);
    acc += cg;
  }
  acc /= static_cast<double>(group.size());
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (acc + acc.adjoint()),
                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

TEST_CASE("twisting_unitary") {
  TwistSpec ident = identity_twist(2, 2, 2);
  CHECK((twisting_unitary(ident) - identity(16)).norm() == 0.0);

  std::mt19937_64 rng(100);
  TwistSpec spec = random_twist(2, 2, 2, rng);
  Mat v = twisting_unitary(spec);
  CHECK((v * v.adjoint() - identity(16)).cwiseAbs().maxCoeff() < 1e-12);

  // d=2 with controls {I, X} on a 2-dim shield, control on B:
  // V |1>_B |phi> applies X on the shield
  Mat x = Mat::Zero(2, 2);
  x(0, 1) = 1;
  x(1, 0) = 1;
  TwistSpec cx(2, 1, 2, {identity(2), x}, ControlSide::B);
  Mat vb = twisting_unitary(cx);
  // basis |a>_A |b>_B |s>_B' with index 4a + 2b + s
  for (int a = 0; a < 2; ++a)
    for (int s = 0; s < 2; ++s) {
      Eigen::VectorXcd in = Eigen::VectorXcd::Zero(8);
      in(4 * a + 2 * 1 + s) = 1.0;  // |a, 1, s>
      Eigen::VectorXcd want = Eigen::VectorXcd::Zero(8);
      want(4 * a + 2 * 1 + (1 - s)) = 1.0;  // X flips the shield
      CHECK((vb * in - want).norm() < 1e-12);
      // control bit 0 leaves the shield alone
      in.setZero();
      in(4 * a + s) = 1.0;
      CHECK((vb * in - in).norm() < 1e-12);
    }
}

TEST_CASE("private_state and privacy_test") {
  std::mt19937_64 rng(7);
  TwistSpec ident = identity_twist(2, 2, 2);
  DensityMatrix tau = random_density(4, rng);
  DensityMatrix gamma = private_state(ident, tau);
  CHECK((gamma.mat() - tensor(max_entangled(2).mat(), tau.mat())).norm() < 1e-12);

  PrivacyTest pt_ident = privacy_test(ident);
  CHECK((pt_ident.projector - tensor(max_entangled(2).mat(), identity(4))).norm() <
        1e-12);

  for (int rep = 0; rep < 5; ++rep) {
    TwistSpec spec = random_twist(2, 2, 2, rng);
    PrivacyTest pt = privacy_test(spec);
    // idempotent projector with eigenvalues {1 x shield_dim, 0 x rest}
    CHECK((pt.projector * pt.projector - pt.projector).cwiseAbs().maxCoeff() < 1e-9);
    Eigen::SelfAdjointEigenSolver<Mat> es(pt.projector, Eigen::EigenvaluesOnly);
    int ones = 0, zeros = 0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
      if (std::abs(es.eigenvalues()(i) - 1.0) < 1e-9) ++ones;
      if (std::abs(es.eigenvalues()(i)) < 1e-9) ++zeros;
    }
    CHECK(ones == 4);  // rank = |A'||B'|
    CHECK(ones + zeros == 16);

    // matching private state passes with probability one
    DensityMatrix t2 = random_density(4, rng);
    DensityMatrix g2 = private_state(spec, t2);
    CHECK(pass_probability(pt, g2) == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("pass_probability") {
  std::mt19937_64 rng(21);
  TwistSpec spec = random_twist(2, 1, 2, rng);
  PrivacyTest pt = privacy_test(spec);

  // maximally mixed: rank / dim
  DensityMatrix mixed(identity(8) / 8.0, {2, 2, 1, 2});
  CHECK(pass_probability(pt, mixed) == doctest::Approx(2.0 / 8.0).epsilon(1e-10));

  // states close in fidelity to the private state pass with prob >= 1 - eps
  DensityMatrix tau = random_density(2, rng);
  DensityMatrix gamma = private_state(spec, tau);
  for (double t : {0.01, 0.05, 0.2}) {
    DensityMatrix junk = random_density(8, rng, {2, 2, 1, 2});
    Mat omega_m = (1.0 - t) * gamma.mat() + t * junk.mat();
    DensityMatrix omega(omega_m, {2, 2, 1, 2});
    const double f = fidelity(omega, gamma);
    const double pass = pass_probability(pt, omega);
    CHECK(pass >= f - 1e-9);  // pass prob >= fidelity for a projector test
  }
}

TEST_CASE("max_pass_probability_ext ceilings with trivial shields") {
  for (auto [d, k, expect] : std::vector<std::tuple<int, int, double>>{
           {2, 2, 0.75}, {2, 3, 2.0 / 3.0}, {3, 2, 2.0 / 3.0}}) {
    TwistSpec spec = identity_twist(d);
    PrivacyMaxResult res = max_pass_probability_ext(privacy_test(spec), k);
    REQUIRE(res.sol.status == conic::SolveStatus::Optimal);
    CHECK(res.value == doctest::Approx(expect).epsilon(1e-6));
    CHECK(res.ceiling == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("random twists meet the ceiling and the twirl oracle") {
  // five seeded specs, d = 2, k in {2, 3}, shield dims up to 2x2
  struct Cfg {
    int k, sa, sb;
    unsigned long long seed;
  };
  std::vector<Cfg> cfgs{{2, 1, 1, 11}, {2, 2, 1, 12}, {2, 1, 2, 13},
                        {3, 1, 1, 14}, {3, 2, 1, 15}};
  for (const Cfg& c : cfgs) {
    std::mt19937_64 rng(c.seed);
    TwistSpec spec = random_twist(2, c.sa, c.sb, rng);
    PrivacyTest pt = privacy_test(spec);
    PrivacyMaxResult res = max_pass_probability_ext(pt, c.k);
    REQUIRE(res.sol.status == conic::SolveStatus::Optimal);
    const double ceiling = pass_ceiling(2, c.k);
    CHECK(res.value <= ceiling + 1e-5);
    CHECK(res.value >= ceiling - 1e-4);
    CHECK(res.value == doctest::Approx(twirl_oracle(pt, c.k)).epsilon(1e-5));
  }
}

TEST_CASE("control side B gives an equivalent test") {
  std::mt19937_64 rng(31);
  TwistSpec spec = random_twist(2, 2, 1, rng, ControlSide::B);
  PrivacyTest pt = privacy_test(spec);
  DensityMatrix tau = random_density(2, rng);
  CHECK(pass_probability(pt, private_state(spec, tau)) ==
        doctest::Approx(1.0).epsilon(1e-9));
  PrivacyMaxResult res = max_pass_probability_ext(pt, 2);
  REQUIRE(res.sol.status == conic::SolveStatus::Optimal);
  CHECK(res.value <= 0.75 + 1e-5);
  CHECK(res.value == doctest::Approx(twirl_oracle(pt, 2)).epsilon(1e-5));
}

TEST_CASE("guards and validation") {
  Mat not_unitary = 0.5 * identity(2);
  CHECK_THROWS_AS(TwistSpec(2, 1, 2, {identity(2), not_unitary}),
                  std::invalid_argument);
  CHECK_THROWS_AS(TwistSpec(2, 1, 2, {identity(2)}), std::invalid_argument);

  // dimension guard: |AA'| |BB'|^k > 4096
  TwistSpec big = identity_twist(4, 2, 2);
  CHECK_THROWS_AS(max_pass_probability_ext(privacy_test(big), 4),
                  conic::GuardExceeded);
}
