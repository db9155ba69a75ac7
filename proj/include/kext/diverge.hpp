#pragma once

#include "kext/conic.hpp"
#include "kext/qmat.hpp"

#include <vector>

// Divergence quantities: hypothesis-testing relative entropy (quantum SDP
// and exact classical Neyman-Pearson), the four k-unextendible programs for
// states and channels, and the exact Bernoulli reductions used by the
// isotropic-state and erasure-channel bounds. All values are in bits.

namespace kext::diverge {

enum class Method { Sdp, NeymanPearson, Formula };

struct DivergenceValue {
  double bits = 0.0;
  bool infinite = false;
  Method method = Method::Formula;
  conic::SolveStatus status = conic::SolveStatus::Optimal;
  conic::Residuals residuals{};
  int iterations = 0;

  bool ok() const { return status == conic::SolveStatus::Optimal; }
};

// (F, G) Bernoulli parameters plus copy count, the classical reduction pair.
struct BinaryDistributionPair {
  double f = 0.0;
  double g = 0.0;
  long n = 1;
  BinaryDistributionPair(double f, double g, long n);
};

// D^eps_H via SDP: -log2 min tr[Lambda sigma], 0 <= Lambda <= I,
// tr[Lambda rho] >= 1 - eps.
DivergenceValue dh_quantum(const DensityMatrix& rho, const DensityMatrix& sigma,
                           double eps,
                           const conic::SolveOptions& opts = conic::SolveOptions::defaults());

// exact randomized Neyman-Pearson test
DivergenceValue dh_classical(const std::vector<double>& p, const std::vector<double>& q,
                             double eps);

// n-fold Bernoulli product via Hamming-weight classes, O(n log n)
DivergenceValue dh_bernoulli_n(const BinaryDistributionPair& pair, double eps);

// k-unextendible divergence programs. States carry their bipartition in dims().
DivergenceValue e_hyp_state(const DensityMatrix& rho, int k, double eps,
                            const conic::SolveOptions& opts = conic::SolveOptions::defaults());
DivergenceValue e_max_state(const DensityMatrix& rho, int k,
                            const conic::SolveOptions& opts = conic::SolveOptions::defaults());
DivergenceValue e_hyp_channel(const ChoiOperator& gamma, int k, double eps,
                              const conic::SolveOptions& opts = conic::SolveOptions::defaults());
// geometric Renyi divergence at alpha = 1 + 2^-ell
DivergenceValue e_geo_channel(const ChoiOperator& gamma, int k, int ell,
                              const conic::SolveOptions& opts = conic::SolveOptions::defaults());
DivergenceValue e_max_channel(const ChoiOperator& gamma, int k,
                              const conic::SolveOptions& opts = conic::SolveOptions::defaults());

// classical Renyi divergence (1/(a-1)) log2 sum p^a q^(1-a); alpha may be
// +infinity (max-relative entropy, log2 max p/q)
double classical_renyi(const std::vector<double>& p, const std::vector<double>& q,
                       double alpha);

// Bernoulli upper bound on E^eps_k of n isotropic copies with the fixed
// G = 1/d + 1/k - 1/(dk) convention (G = 1/d at k = inf)
DivergenceValue e_hyp_isotropic_n(double F, int d, const KParam& k, long n, double eps);

double isotropic_g(int d, const KParam& k);

}  // namespace kext::diverge
