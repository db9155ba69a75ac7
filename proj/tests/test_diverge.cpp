#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kext/diverge.hpp"

#include <cmath>
#include <random>

using namespace kext;
using namespace kext::diverge;

namespace {

// independent oracle for the n-fold product: expand all 2^n outcomes and run
// the single-shot classical test on the full distribution
DivergenceValue dh_product_oracle(double f, double g, int n, double eps) {
  const long total = 1L << n;
  std::vector<double> p(total), q(total);
  for (long mask = 0; mask < total; ++mask) {
    double pp = 1.0, qq = 1.0;
    for (int i = 0; i < n; ++i) {
      const bool hit = (mask >> i) & 1;
      pp *= hit ? f : 1.0 - f;
      qq *= hit ? g : 1.0 - g;
    }
    p[mask] = pp;
    q[mask] = qq;
  }
  return dh_classical(p, q, eps);
}

DensityMatrix diag_state(const std::vector<double>& d) {
  Mat m = Mat::Zero(d.size(), d.size());
  for (size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return DensityMatrix(m, {static_cast<int>(d.size())});
}

// depolarizing noise on the B side of a two-qubit state
DensityMatrix depolarize_b(const DensityMatrix& rho, double q) {
  Mat rho_a = partial_trace(rho.mat(), {2, 2}, {0});
  Mat m = (1.0 - q) * rho.mat() + q * tensor(rho_a, 0.5 * identity(2));
  return DensityMatrix(m, {2, 2});
}

DensityMatrix random_two_qubit(std::mt19937_64& rng) {
  return random_density(4, rng, {2, 2});
}

}  // namespace

TEST_CASE("dh_classical") {
  CHECK(dh_classical({0.95, 0.05}, {0.75, 0.25}, 0.05).bits ==
        doctest::Approx(0.4150374992788438).epsilon(1e-12));
  // fractional acceptance of the boundary outcome: beta = 0.95 * 0.75
  CHECK(dh_classical({1.0, 0.0}, {0.75, 0.25}, 0.05).bits ==
        doctest::Approx(-std::log2(0.7125)).epsilon(1e-12));
  // p = q: beta = 1 - eps
  for (double eps : {0.0, 0.05, 0.3})
    CHECK(dh_classical({0.4, 0.6}, {0.4, 0.6}, eps).bits ==
          doctest::Approx(-std::log2(1.0 - eps)).epsilon(1e-12));
  // outcome 0 covers 1 - eps exactly: full acceptance, beta = 0.5
  CHECK(dh_classical({0.95, 0.05}, {0.5, 0.5}, 0.05).bits ==
        doctest::Approx(1.0).epsilon(1e-12));
  // disjoint supports at eps = 0: infinite divergence
  CHECK(dh_classical({1.0, 0.0}, {0.0, 1.0}, 0.0).infinite);
  CHECK_THROWS_AS(dh_classical({0.5, 0.5}, {0.5, 0.5}, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(dh_classical({0.5, 0.4}, {0.5, 0.5}, 0.1), std::invalid_argument);
}

TEST_CASE("dh_bernoulli_n") {
  // n = 1 reduces to dh_classical
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int rep = 0; rep < 20; ++rep) {
    const double f = u(rng), g = u(rng), eps = 0.2 * u(rng);
    CHECK(dh_bernoulli_n({f, g, 1}, eps).bits ==
          doctest::Approx(dh_classical({f, 1 - f}, {g, 1 - g}, eps).bits)
              .epsilon(1e-11));
  }
  // hand three-class computation at n = 2
  CHECK(dh_bernoulli_n({0.95, 0.75, 2}, 0.05).bits ==
        doctest::Approx(0.4150374992788438).epsilon(1e-10));
  // F = G for all n
  for (long n : {1L, 5L, 100L})
    CHECK(dh_bernoulli_n({0.3, 0.3, n}, 0.05).bits ==
          doctest::Approx(-std::log2(0.95)).epsilon(1e-10));
  // full product-distribution oracle
  for (auto [f, g, n, eps] : std::vector<std::tuple<double, double, int, double>>{
           {0.9, 0.6, 3, 0.05}, {0.7, 0.5, 8, 0.01}, {0.55, 0.8, 5, 0.1}}) {
    CHECK(dh_bernoulli_n({f, g, n}, eps).bits ==
          doctest::Approx(dh_product_oracle(f, g, n, eps).bits).epsilon(1e-10));
  }
  // log-domain stability at large n with an extreme tail
  DivergenceValue big = dh_bernoulli_n({1.0, 0.5, 300}, 1e-5);
  CHECK(big.bits == doctest::Approx(300.0 - std::log2(1.0 - 1e-5)).epsilon(1e-9));
  // copy monotonicity for F > G
  double prev = 0.0;
  for (long n = 1; n <= 40; ++n) {
    const double v = dh_bernoulli_n({0.95, 0.75, n}, 1e-3).bits;
    CHECK(v >= prev - 1e-9);
    prev = v;
  }
}

TEST_CASE("product-test composition") {
  // combining optimal tests for n1 and n2 copies at tolerance eps/2 each
  // yields a test for n1+n2 copies at tolerance eps, so
  // E_{n1+n2}(eps) >= E_{n1}(eps/2) + E_{n2}(eps/2)
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int rep = 0; rep < 20; ++rep) {
    const double f = u(rng), g = u(rng);
    const double eps = 0.2 * u(rng);
    const long n1 = 1 + static_cast<long>(rng() % 10);
    const long n2 = 1 + static_cast<long>(rng() % 10);
    const double whole = dh_bernoulli_n({f, g, n1 + n2}, eps).bits;
    const double parts = dh_bernoulli_n({f, g, n1}, eps / 2).bits +
                         dh_bernoulli_n({f, g, n2}, eps / 2).bits;
    CHECK(whole >= parts - 1e-9);
  }
}

TEST_CASE("dh monotone in eps and bounded below") {
  const std::vector<double> grid{0.0, 0.01, 0.05, 0.2};
  double prev = -1.0;
  for (double eps : grid) {
    const double v = dh_bernoulli_n({0.9, 0.6, 4}, eps).bits;
    CHECK(v >= prev - 1e-12);
    CHECK(v >= -std::log2(1.0 - eps) - 1e-9);
    prev = v;
  }
  std::mt19937_64 rng(17);
  prev = -1.0;
  DensityMatrix rho = random_two_qubit(rng), sig = random_two_qubit(rng);
  for (double eps : grid) {
    const double v = dh_quantum(rho, sig, eps).bits;
    CHECK(v >= prev - 1e-7);
    CHECK(v >= -std::log2(1.0 - eps) - 1e-9);
    prev = v;
  }
}

TEST_CASE("dh_quantum") {
  std::mt19937_64 rng(23);
  DensityMatrix rho = random_two_qubit(rng);
  for (double eps : {0.0, 0.05}) {
    DivergenceValue v = dh_quantum(rho, rho, eps);
    REQUIRE(v.ok());
    CHECK(v.bits == doctest::Approx(-std::log2(1.0 - eps)).epsilon(1e-6));
  }
  // commuting diagonals match the exact classical test
  DivergenceValue v = dh_quantum(diag_state({0.95, 0.05}), diag_state({0.75, 0.25}), 0.05);
  REQUIRE(v.ok());
  CHECK(v.bits == doctest::Approx(0.4150374992788438).epsilon(1e-7));

  std::uniform_real_distribution<double> u(0.02, 0.98);
  for (int rep = 0; rep < 10; ++rep) {
    double a = u(rng), b = u(rng);
    std::vector<double> p{a, 1 - a}, q{b, 1 - b};
    const double eps = 0.15 * u(rng);
    DivergenceValue vq = dh_quantum(diag_state(p), diag_state(q), eps);
    REQUIRE(vq.ok());
    CHECK(std::abs(vq.bits - dh_classical(p, q, eps).bits) < 1e-6);
  }
}

TEST_CASE("e_hyp_state") {
  // 2-extendible isotropic state at eps = 0: divergence vanishes
  DivergenceValue v0 = e_hyp_state(isotropic(0.75, 2), 2, 0.0);
  REQUIRE(v0.ok());
  CHECK(v0.bits <= 1e-6);

  // Bernoulli reduction equality for isotropic states
  DivergenceValue v = e_hyp_state(isotropic(0.95, 2), 2, 0.05);
  REQUIRE(v.ok());
  CHECK(v.bits == doctest::Approx(0.4150374992788438).epsilon(1e-6));

  // k-extendible states never exceed -log2(1-eps)
  for (double f : {0.4, 0.6, 0.75}) {
    DivergenceValue ve = e_hyp_state(isotropic(f, 2), 2, 0.05);
    REQUIRE(ve.ok());
    CHECK(ve.bits <= -std::log2(0.95) + 1e-6);
  }
}

TEST_CASE("e_hyp_state monotone in k and under data processing") {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 3; ++rep) {
    DensityMatrix rho = random_two_qubit(rng);
    DivergenceValue v2 = e_hyp_state(rho, 2, 0.05);
    DivergenceValue v3 = e_hyp_state(rho, 3, 0.05);
    REQUIRE(v2.ok());
    REQUIRE(v3.ok());
    CHECK(v3.bits >= v2.bits - 1e-6);
    for (double q : {0.2, 0.5, 0.9}) {
      DivergenceValue vd = e_hyp_state(depolarize_b(rho, q), 2, 0.05);
      REQUIRE(vd.ok());
      CHECK(vd.bits <= v2.bits + 1e-6);
    }
  }
}

TEST_CASE("e_max_state") {
  DivergenceValue v0 = e_max_state(isotropic(0.7, 2), 2);
  REQUIRE(v0.ok());
  CHECK(v0.bits <= 1e-6);

  DivergenceValue v = e_max_state(max_entangled(2), 2);
  REQUIRE(v.ok());
  CHECK(v.bits == doctest::Approx(-std::log2(0.75)).epsilon(1e-6));

  // independent feasibility oracle: the symmetrized projection of the
  // maximally entangled operator is a two-copy extension whose marginal
  // dominates (3/4) Phi exactly
  {
    Mat phi = max_entangled(2).mat();
    Mat swap = permutation_unitary(Permutation({1, 0}), 2);
    Mat psym = 0.5 * (identity(4) + swap);
    Mat ip = tensor(identity(2), psym);
    Mat w = ip * tensor(2.0 * phi, identity(2)) * ip;
    w /= w.trace().real();
    Mat marg = partial_trace(w, {2, 2, 2}, {0, 1});
    CHECK(trace_inner(phi, marg) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(min_eigenvalue(marg - 0.75 * phi) > -1e-12);
    Mat ws = tensor(identity(2), permutation_unitary(Permutation({1, 0}), 2));
    CHECK((ws * w * ws.adjoint() - w).norm() < 1e-12);
  }

  std::mt19937_64 rng(43);
  for (int rep = 0; rep < 3; ++rep) {
    DensityMatrix rho = random_two_qubit(rng);
    DivergenceValue vm = e_max_state(rho, 2);
    DivergenceValue vh = e_hyp_state(rho, 2, 0.0);
    REQUIRE(vm.ok());
    REQUIRE(vh.ok());
    CHECK(vm.bits >= vh.bits - 1e-6);
  }
}

TEST_CASE("e_hyp_channel") {
  // k-extendible erasure channel at eps = 0
  DivergenceValue v0 = e_hyp_channel(erasure_choi(0.5, 2), 2, 0.0);
  REQUIRE(v0.ok());
  CHECK(v0.bits <= 1e-6);

  // bounded by the Bernoulli reduction
  DivergenceValue v = e_hyp_channel(erasure_choi(0.3, 2), 2, 1e-5);
  REQUIRE(v.ok());
  const double bern = dh_bernoulli_n({0.7, 0.5, 1}, 1e-5).bits;
  CHECK(v.bits <= bern + 1e-5);
  CHECK(v.bits > 0.0);

  // channel divergence dominates the Choi-state divergence (Lemma-1 instance)
  ChoiOperator gam = erasure_choi(0.3, 2);
  DensityMatrix choi_state(gam.mat() / 2.0, {2, 3});
  DivergenceValue vs = e_hyp_state(choi_state, 2, 1e-5);
  REQUIRE(vs.ok());
  CHECK(v.bits >= vs.bits - 1e-6);
}

TEST_CASE("e_geo_channel") {
  DivergenceValue v5 = e_geo_channel(erasure_choi(0.5, 2), 2, 1);
  REQUIRE(v5.ok());
  CHECK(v5.bits <= 1e-6);

  DivergenceValue v3 = e_geo_channel(erasure_choi(0.3, 2), 2, 1);
  REQUIRE(v3.ok());
  CHECK(v3.bits > 0.0);
  CHECK(v3.bits <= classical_renyi({0.7, 0.3}, {0.5, 0.5}, 1.5) + 1e-4);

  // nonincreasing toward the extendible point
  DivergenceValue v4 = e_geo_channel(erasure_choi(0.4, 2), 2, 1);
  DivergenceValue v45 = e_geo_channel(erasure_choi(0.45, 2), 2, 1);
  REQUIRE(v4.ok());
  REQUIRE(v45.ok());
  CHECK(v3.bits >= v4.bits - 1e-6);
  CHECK(v4.bits >= v45.bits - 1e-6);
}

TEST_CASE("e_max_channel") {
  DivergenceValue v0 = e_max_channel(erasure_choi(0.5, 2), 2);
  REQUIRE(v0.ok());
  CHECK(v0.bits <= 1e-6);

  // identity qubit channel reduces to the Choi-state value
  ChoiOperator ident(2.0 * max_entangled(2).mat(), 2, 2);
  DivergenceValue v = e_max_channel(ident, 2);
  REQUIRE(v.ok());
  CHECK(v.bits == doctest::Approx(-std::log2(0.75)).epsilon(1e-6));

  DivergenceValue vh = e_hyp_channel(erasure_choi(0.3, 2), 2, 0.0);
  DivergenceValue vm = e_max_channel(erasure_choi(0.3, 2), 2);
  REQUIRE(vh.ok());
  REQUIRE(vm.ok());
  CHECK(vm.bits >= vh.bits - 1e-6);
}

TEST_CASE("classical_renyi") {
  CHECK(classical_renyi({0.3, 0.7}, {0.3, 0.7}, 1.5) == doctest::Approx(0.0));
  CHECK(classical_renyi({0.7, 0.3}, {0.5, 0.5}, 1.5) ==
        doctest::Approx(0.16984338539606053).epsilon(1e-12));
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(classical_renyi({1.0, 0.0}, {0.5, 0.5}, inf) == doctest::Approx(1.0));
  CHECK(std::isinf(classical_renyi({0.5, 0.5}, {1.0, 0.0}, 2.0)));
  CHECK_THROWS_AS(classical_renyi({1.0}, {1.0}, 0.5), std::invalid_argument);
}

TEST_CASE("e_hyp_isotropic_n") {
  CHECK(isotropic_g(2, KParam::finite(2)) == doctest::Approx(0.75));
  CHECK(isotropic_g(2, KParam::inf()) == doctest::Approx(0.5));
  CHECK(isotropic_g(3, KParam::finite(2)) == doctest::Approx(2.0 / 3.0));

  // F = G
  CHECK(e_hyp_isotropic_n(0.75, 2, KParam::finite(2), 7, 0.05).bits ==
        doctest::Approx(-std::log2(0.95)).epsilon(1e-10));
  CHECK(e_hyp_isotropic_n(0.95, 2, KParam::finite(2), 1, 0.05).bits ==
        doctest::Approx(0.4150374992788438).epsilon(1e-12));
  // separable limit: outcome 0 covers 1-eps exactly, one full bit
  CHECK(e_hyp_isotropic_n(0.95, 2, KParam::inf(), 1, 0.05).bits ==
        doctest::Approx(1.0).epsilon(1e-12));
}
