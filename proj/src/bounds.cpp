#include "kext/bounds.hpp"

#include <cmath>
#include <limits>

namespace kext::bounds {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGateMargin = 1e-9;

// log2((k-1)/k) - log2(2^-X - 1/k) for a gated exponent X < log2 k
double finite_k_bits(double x, double kk) {
  double bits = std::log2((kk - 1.0) / kk) - std::log2(std::pow(2.0, -x) - 1.0 / kk);
  if (bits < 0.0 && bits > -1e-12) bits = 0.0;
  return bits;
}

BoundResult invalid_result(double divergence, const KParam& k, BoundParams params) {
  BoundResult r;
  r.bits = kInf;
  r.valid = false;
  r.divergence_bits = divergence;
  r.k = k;
  r.params = std::move(params);
  return r;
}

double alpha_coeff(double alpha) {
  if (std::isinf(alpha)) return 1.0;
  if (!(alpha > 1.0)) throw std::invalid_argument("alpha must be > 1");
  return alpha / (alpha - 1.0);
}

}  // namespace

BoundResult key_bound(double divergence_bits, const KParam& k, BoundParams params) {
  if (divergence_bits < 0.0)
    throw std::invalid_argument("key_bound: negative divergence");
  BoundResult r;
  r.divergence_bits = divergence_bits;
  r.k = k;
  r.params = std::move(params);
  if (k.is_inf()) {
    r.valid = true;
    r.bits = divergence_bits;
    return r;
  }
  const double kk = static_cast<double>(k.value());
  if (!(divergence_bits < std::log2(kk) - kGateMargin))
    return invalid_result(divergence_bits, k, std::move(r.params));
  r.valid = true;
  r.bits = finite_k_bits(divergence_bits, kk);
  return r;
}

BoundResult key_bound_nshot_sandwich(double per_copy_bits, long n, long k, double alpha,
                                     double eps, BoundParams params) {
  if (per_copy_bits < 0.0 || n < 1 || k < 2 || eps < 0.0 || eps >= 1.0)
    throw std::invalid_argument("key_bound_nshot_sandwich: bad arguments");
  const double coeff = alpha_coeff(alpha);
  params.eps = eps;
  params.alpha = alpha;
  params.n = n;
  const double kk = static_cast<double>(k);
  const double x = n * per_copy_bits + coeff * std::log2(1.0 / (1.0 - eps));
  BoundResult r;
  r.divergence_bits = per_copy_bits;
  r.k = KParam::finite(k);
  r.params = std::move(params);
  if (!(x < std::log2(kk) - kGateMargin))
    return invalid_result(per_copy_bits, r.k, std::move(r.params));
  r.valid = true;
  r.bits = finite_k_bits(x, kk);
  return r;
}

BoundResult privcap_bound(double divergence_bits, const KParam& k, BoundParams params) {
  return key_bound(divergence_bits, k, std::move(params));
}

BoundResult privcap_nshot_geo(double per_use_bits, long n, long k, double alpha,
                              double eps, BoundParams params) {
  if (!(alpha > 1.0) || alpha > 2.0)
    throw std::invalid_argument("privcap_nshot_geo: alpha must lie in (1, 2]");
  return key_bound_nshot_sandwich(per_use_bits, n, k, alpha, eps, std::move(params));
}

double sandwich_penalty_c(long n, int dim_a) {
  if (n < 1 || dim_a < 1)
    throw std::invalid_argument("sandwich_penalty_c: bad arguments");
  // binom(n + dim_a^2 - 1, n) via an exact multiplicative loop
  const long m = static_cast<long>(dim_a) * dim_a - 1;
  double c = 1.0;
  for (long i = 1; i <= m; ++i) c *= static_cast<double>(n + i) / static_cast<double>(i);
  return c;
}

BoundResult privcap_nshot_sandwich(double per_use_bits, long n, long k, double alpha,
                                   double eps, int dim_a, BoundParams params) {
  if (per_use_bits < 0.0 || n < 1 || k < 2 || eps < 0.0 || eps >= 1.0)
    throw std::invalid_argument("privcap_nshot_sandwich: bad arguments");
  const double coeff = alpha_coeff(alpha);
  const double c = sandwich_penalty_c(n, dim_a);
  params.eps = eps;
  params.alpha = alpha;
  params.n = n;
  const double kk = static_cast<double>(k);
  const double x = n * per_use_bits + coeff * std::log2(c / (1.0 - eps));
  BoundResult r;
  r.divergence_bits = per_use_bits;
  r.k = KParam::finite(k);
  r.params = std::move(params);
  if (!(x < std::log2(kk) - kGateMargin))
    return invalid_result(per_use_bits, r.k, std::move(r.params));
  r.valid = true;
  r.bits = finite_k_bits(x, kk);
  return r;
}

double isotropic_key_ub(double F, int d, double eps, long n,
                        const std::vector<KParam>& k_set) {
  double best = kInf;
  for (const KParam& k : k_set) {
    diverge::DivergenceValue e = diverge::e_hyp_isotropic_n(F, d, k, n, eps);
    if (e.infinite) continue;  // an infinite divergence gives no finite bound
    BoundResult b = key_bound(e.bits, k);
    if (b.valid) best = std::min(best, b.bits);
  }
  return best;
}

double erasure_privcap_ub(double p, double eps, long n,
                          const std::vector<KParam>& k_set) {
  double best = kInf;
  for (const KParam& k : k_set) {
    const double g = k.is_inf() ? 0.5 : 1.0 / static_cast<double>(k.value());
    diverge::DivergenceValue e =
        diverge::dh_bernoulli_n(diverge::BinaryDistributionPair(1.0 - p, g, n), eps);
    if (e.infinite) continue;
    BoundResult b = privcap_bound(e.bits, k);
    if (b.valid) best = std::min(best, b.bits);
  }
  return best;
}

namespace {

// smallest n with ub(n) >= 1, where ub is nondecreasing in n; the searches
// treat an everywhere-invalid point (+inf) as >= 1, since an invalid gate
// certifies nothing beyond it
std::optional<long> search_min_n(const std::function<double(long)>& ub) {
  long hi = 1;
  while (ub(hi) < 1.0) {
    if (hi > (1L << 24)) return std::nullopt;  // defensive, callers precheck
    hi *= 2;
  }
  long lo = hi / 2;  // ub(lo) < 1 (or lo = 0)
  while (hi - lo > 1) {
    long mid = lo + (hi - lo) / 2;
    if (ub(mid) >= 1.0)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

}  // namespace

namespace {

// a branch with F = G has a copy-count-independent divergence -log2(1-eps);
// if its bound sits below one bit it caps the pointwise minimum forever
bool capped_branch(double f, double g, double eps, const KParam& k) {
  if (std::abs(f - g) > 1e-9) return false;
  diverge::DivergenceValue e = diverge::dh_bernoulli_n({f, g, 1}, eps);
  if (e.infinite) return false;
  BoundResult b = key_bound(e.bits, k);
  return b.valid && b.bits < 1.0;
}

}  // namespace

std::optional<long> min_copies_isotropic(double F, int d, double eps,
                                         const std::vector<KParam>& k_set) {
  if (F < 0.0 || F > 1.0) throw std::invalid_argument("min_copies_isotropic: bad F");
  if (k_set.empty()) throw std::invalid_argument("min_copies_isotropic: empty k set");
  if (!(F > 1.0 / d))
    throw std::invalid_argument(
        "min_copies_isotropic: F <= 1/d, no k certifies a finite answer");
  for (const KParam& k : k_set)
    if (capped_branch(F, diverge::isotropic_g(d, k), eps, k)) return std::nullopt;
  return search_min_n([&](long n) { return isotropic_key_ub(F, d, eps, n, k_set); });
}

std::optional<long> min_uses_erasure(double p, double eps,
                                     const std::vector<KParam>& k_set) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("min_uses_erasure: bad p");
  if (k_set.empty()) throw std::invalid_argument("min_uses_erasure: empty k set");
  bool certifies = false;
  for (const KParam& k : k_set) {
    const double g = k.is_inf() ? 0.5 : 1.0 / static_cast<double>(k.value());
    if (1.0 - p > g + 1e-12) certifies = true;
  }
  if (!certifies)
    throw std::invalid_argument(
        "min_uses_erasure: no k in k_set certifies (p >= 1 - 1/k for every entry)");
  for (const KParam& k : k_set) {
    const double g = k.is_inf() ? 0.5 : 1.0 / static_cast<double>(k.value());
    if (capped_branch(1.0 - p, g, eps, k)) return std::nullopt;
  }
  return search_min_n([&](long n) { return erasure_privcap_ub(p, eps, n, k_set); });
}

}  // namespace kext::bounds
