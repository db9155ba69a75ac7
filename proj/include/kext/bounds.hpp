#pragma once

#include "kext/diverge.hpp"
#include "kext/qmat.hpp"

#include <optional>
#include <string>
#include <vector>

// Key and private-capacity upper bounds built from divergence values, with
// the validity gates, plus the minimum-copies / minimum-uses searches.

namespace kext::bounds {

struct BoundParams {
  std::optional<double> eps;
  std::optional<double> alpha;  // +infinity allowed
  std::optional<long> n;
  std::string descriptor;
};

struct BoundResult {
  double bits = 0.0;  // +infinity when invalid
  bool valid = false;
  double divergence_bits = 0.0;
  KParam k = KParam::inf();
  BoundParams params;
};

// one-shot, one-way distillable key bound:
// log2((k-1)/k) - log2(2^-E - 1/k), gated by E < log2 k; k = inf returns E.
BoundResult key_bound(double divergence_bits, const KParam& k, BoundParams params = {});

// n-shot key bound via the sandwiched divergence (alpha > 1, inf allowed)
BoundResult key_bound_nshot_sandwich(double per_copy_bits, long n, long k, double alpha,
                                     double eps, BoundParams params = {});

// one-shot forward-assisted private capacity; same algebraic form
BoundResult privcap_bound(double divergence_bits, const KParam& k, BoundParams params = {});

// n-shot private capacity via the geometric divergence, alpha in (1, 2]
BoundResult privcap_nshot_geo(double per_use_bits, long n, long k, double alpha,
                              double eps, BoundParams params = {});

// n-shot private capacity via the sandwiched divergence with the
// C(n,|A|) = binom(n+|A|^2-1, n) penalty; alpha > 1, inf allowed
BoundResult privcap_nshot_sandwich(double per_use_bits, long n, long k, double alpha,
                                   double eps, int dim_a, BoundParams params = {});

double sandwich_penalty_c(long n, int dim_a);  // binom(n+|A|^2-1, n)

// minimum copies of isotropic(F, d) to distill one secret bit; nullopt when
// no k in the set certifies a finite answer
std::optional<long> min_copies_isotropic(double F, int d, double eps,
                                         const std::vector<KParam>& k_set);

// minimum uses of erasure(p) to transmit one private bit (d = 2 relaxation
// G = 1/2 for k = inf)
std::optional<long> min_uses_erasure(double p, double eps,
                                     const std::vector<KParam>& k_set);

// pointwise min-over-k upper bound at a fixed copy count, used by the
// searches; +infinity when no k gives a valid bound
double isotropic_key_ub(double F, int d, double eps, long n,
                        const std::vector<KParam>& k_set);
double erasure_privcap_ub(double p, double eps, long n,
                          const std::vector<KParam>& k_set);

}  // namespace kext::bounds
