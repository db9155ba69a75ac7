#include "kext/diverge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kext::diverge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLn2 = std::log(2.0);

void check_eps(double eps) {
  if (eps < 0.0 || eps >= 1.0)
    throw std::invalid_argument("eps must lie in [0, 1)");
}

// shared greedy randomized Neyman-Pearson on (log p, log q) classes;
// classes with p = q = 0 must already be removed.
DivergenceValue neyman_pearson(std::vector<double> logp, std::vector<double> logq,
                               double eps) {
  const size_t m = logp.size();
  std::vector<size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  auto ratio_rank = [&](size_t i) {
    // q = 0 classes first (infinite ratio), then descending likelihood ratio,
    // p = 0 classes last
    if (logq[i] == -kInf) return std::make_pair(0, 0.0);
    if (logp[i] == -kInf) return std::make_pair(2, 0.0);
    return std::make_pair(1, -(logp[i] - logq[i]));
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return ratio_rank(a) < ratio_rank(b); });

  // merge classes of equal likelihood ratio before fractioning
  std::vector<std::pair<double, double>> classes;  // (logp, logq) merged
  for (size_t oi = 0; oi < order.size();) {
    size_t oj = oi + 1;
    auto r0 = ratio_rank(order[oi]);
    while (oj < order.size()) {
      auto r1 = ratio_rank(order[oj]);
      if (r1.first != r0.first) break;
      if (r0.first == 1 && std::abs(r1.second - r0.second) >
                               1e-12 * (1.0 + std::abs(r0.second)))
        break;
      ++oj;
    }
    // log-sum-exp merge of [oi, oj)
    double mp = -kInf, mq = -kInf;
    for (size_t t = oi; t < oj; ++t) {
      mp = std::max(mp, logp[order[t]]);
      mq = std::max(mq, logq[order[t]]);
    }
    double sp = 0.0, sq = 0.0;
    for (size_t t = oi; t < oj; ++t) {
      if (mp > -kInf) sp += std::exp(logp[order[t]] - mp);
      if (mq > -kInf) sq += std::exp(logq[order[t]] - mq);
    }
    classes.emplace_back(mp > -kInf ? mp + std::log(sp) : -kInf,
                         mq > -kInf ? mq + std::log(sq) : -kInf);
    oi = oj;
  }

  const double target = 1.0 - eps;
  double cum = 0.0;
  // accepted (logq, fraction) terms; beta accumulated in the log domain
  std::vector<std::pair<double, double>> accepted;
  for (const auto& [lp, lq] : classes) {
    const double pc = lp == -kInf ? 0.0 : std::exp(lp);
    const double remaining = target - cum;
    if (remaining <= 1e-15) break;
    if (pc <= 0.0) continue;
    double t = remaining / pc;
    if (t >= 1.0 - 1e-12) {
      accepted.emplace_back(lq, 1.0);
      cum += pc;
    } else {
      accepted.emplace_back(lq, t);
      cum = target;
      break;
    }
  }

  double mq = -kInf;
  for (const auto& [lq, t] : accepted)
    if (t > 0 && lq > -kInf) mq = std::max(mq, lq);
  DivergenceValue out;
  out.method = Method::NeymanPearson;
  if (mq == -kInf) {
    out.infinite = true;
    out.bits = kInf;
    return out;
  }
  double s = 0.0;
  for (const auto& [lq, t] : accepted)
    if (t > 0 && lq > -kInf) s += t * std::exp(lq - mq);
  const double log_beta = mq + std::log(s);
  out.bits = std::max(0.0, -log_beta / kLn2);
  return out;
}

// common lowering pieces ----------------------------------------------------

std::vector<std::vector<int>> extension_perms(int front, int block, int k) {
  std::vector<std::vector<int>> out;
  for (const Permutation& g : sym_group_generators(k))
    out.push_back(factor_perm_indices(front, block, k, g));
  return out;
}

std::vector<int> extension_dims(int front, int block, int k) {
  std::vector<int> dims{front};
  for (int i = 0; i < k; ++i) dims.push_back(block);
  return dims;
}

long long extension_size(int front, int block, int k) {
  long long n = front;
  for (int i = 0; i < k; ++i) n *= block;
  return n;
}

DivergenceValue from_sdp_optimum(const conic::SdpSolution& sol, double optimum) {
  DivergenceValue out;
  out.method = Method::Sdp;
  out.status = sol.status;
  out.residuals = sol.residuals;
  out.iterations = sol.iterations;
  if (sol.status != conic::SolveStatus::Optimal) {
    out.bits = 0.0;
    return out;
  }
  if (optimum <= 0.0) {
    // solver noise at extreme parameters; a negative divergence is meaningless
    out.status = conic::SolveStatus::NumericalFailure;
    return out;
  }
  double bits = -std::log2(optimum);
  if (std::abs(bits) < 1e-7) bits = std::max(0.0, bits);
  out.bits = bits;
  return out;
}

}  // namespace

BinaryDistributionPair::BinaryDistributionPair(double f_, double g_, long n_)
    : f(f_), g(g_), n(n_) {
  if (f < 0.0 || f > 1.0 || g < 0.0 || g > 1.0)
    throw std::invalid_argument("BinaryDistributionPair: probabilities out of [0,1]");
  if (n < 1) throw std::invalid_argument("BinaryDistributionPair: n must be >= 1");
}

DivergenceValue dh_classical(const std::vector<double>& p, const std::vector<double>& q,
                             double eps) {
  check_eps(eps);
  if (p.size() != q.size())
    throw std::invalid_argument("dh_classical: support size mismatch");
  double sp = 0.0, sq = 0.0;
  for (double v : p) {
    if (v < 0) throw std::invalid_argument("dh_classical: negative probability");
    sp += v;
  }
  for (double v : q) {
    if (v < 0) throw std::invalid_argument("dh_classical: negative probability");
    sq += v;
  }
  if (std::abs(sp - 1.0) > 1e-12 || std::abs(sq - 1.0) > 1e-12)
    throw std::invalid_argument("dh_classical: distributions must sum to 1");
  std::vector<double> logp, logq;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0 && q[i] == 0.0) continue;
    logp.push_back(p[i] > 0 ? std::log(p[i]) : -kInf);
    logq.push_back(q[i] > 0 ? std::log(q[i]) : -kInf);
  }
  return neyman_pearson(std::move(logp), std::move(logq), eps);
}

DivergenceValue dh_bernoulli_n(const BinaryDistributionPair& pair, double eps) {
  check_eps(eps);
  const long n = pair.n;
  const double F = pair.f, G = pair.g;
  auto log_binom_pmf = [n](long j, double prob) {
    if (prob == 0.0) return j == 0 ? 0.0 : -kInf;
    if (prob == 1.0) return j == n ? 0.0 : -kInf;
    return std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) +
           j * std::log(prob) + (n - j) * std::log1p(-prob);
  };
  std::vector<double> logp, logq;
  logp.reserve(n + 1);
  logq.reserve(n + 1);
  for (long j = 0; j <= n; ++j) {
    const double lp = log_binom_pmf(j, F);
    const double lq = log_binom_pmf(j, G);
    if (lp == -kInf && lq == -kInf) continue;
    logp.push_back(lp);
    logq.push_back(lq);
  }
  return neyman_pearson(std::move(logp), std::move(logq), eps);
}

DivergenceValue dh_quantum(const DensityMatrix& rho, const DensityMatrix& sigma,
                           double eps, const conic::SolveOptions& opts) {
  check_eps(eps);
  if (rho.dim() != sigma.dim())
    throw std::invalid_argument("dh_quantum: dimension mismatch");
  const int n = rho.dim();
  conic::SdpProblem p;
  int lam = p.add_hermitian("Lambda", n, false);
  conic::AffineHerm pos = p.affine(n);
  p.add_term(pos, lam);
  p.add_psd(pos);
  conic::AffineHerm ub = p.affine(n);
  p.add_const(ub, conic::SparseHerm::identity(n));
  p.add_term(ub, lam, -1.0);
  p.add_psd(ub);
  conic::LinExpr type1 = p.lin();
  p.lin_add_trace_against(type1, lam, rho.mat());
  p.add_ge(type1, 1.0 - eps);
  conic::LinExpr obj = p.lin();
  p.lin_add_trace_against(obj, lam, sigma.mat());
  p.set_objective(conic::Sense::Minimize, obj);

  conic::SdpSolution sol = conic::solve(p, opts);
  // Lambda = (1-eps) I is always feasible, so the true optimum never exceeds
  // 1 - eps; clamp out solver noise above that ceiling.
  double beta = std::min(sol.objective, 1.0 - eps);
  DivergenceValue out = from_sdp_optimum(sol, beta);
  if (sol.status == conic::SolveStatus::Optimal && beta <= 1e-12) {
    out.status = conic::SolveStatus::Optimal;
    out.infinite = true;
    out.bits = kInf;
  }
  return out;
}

DivergenceValue e_hyp_state(const DensityMatrix& rho, int k, double eps,
                            const conic::SolveOptions& opts) {
  check_eps(eps);
  if (k < 2) throw std::invalid_argument("e_hyp_state: k must be >= 2");
  if (rho.dims().size() != 2)
    throw std::invalid_argument("e_hyp_state: state must carry a bipartition");
  const int da = rho.dims()[0], db = rho.dims()[1];
  const int nab = da * db;
  if (extension_size(da, db, k) > 4096)
    throw conic::GuardExceeded("e_hyp_state: dimension guard exceeded");
  const int next = static_cast<int>(extension_size(da, db, k));
  const auto dims = extension_dims(da, db, k);

  conic::SdpProblem p;
  int mu = p.add_scalar("mu", true);
  int z = p.add_hermitian("Z", nab, true);
  int sig = p.add_hermitian("sigma", next, true, extension_perms(da, db, k));
  conic::LinExpr tr = p.lin();
  p.lin_add_trace(tr, sig);
  p.add_eq(tr, 1.0);

  conic::AffineHerm con = p.affine(nab);
  p.add_mapped(con, sig, [&](const conic::SparseHerm& b) {
    return b.partial_trace(dims, {0, 1});
  });
  p.add_term(con, z, 1.0);
  p.add_scalar_term(con, mu, conic::SparseHerm::from_dense(-rho.mat()));
  p.add_psd(con);

  conic::LinExpr obj = p.lin();
  p.lin_add_scalar(obj, mu, 1.0 - eps);
  p.lin_add_trace(obj, z, -1.0);
  p.set_objective(conic::Sense::Maximize, obj);

  conic::SdpSolution sol = conic::solve(p, opts);
  return from_sdp_optimum(sol, sol.objective);
}

DivergenceValue e_max_state(const DensityMatrix& rho, int k,
                            const conic::SolveOptions& opts) {
  if (k < 2) throw std::invalid_argument("e_max_state: k must be >= 2");
  if (rho.dims().size() != 2)
    throw std::invalid_argument("e_max_state: state must carry a bipartition");
  const int da = rho.dims()[0], db = rho.dims()[1];
  if (extension_size(da, db, k) > 4096)
    throw conic::GuardExceeded("e_max_state: dimension guard exceeded");
  const int next = static_cast<int>(extension_size(da, db, k));
  const auto dims = extension_dims(da, db, k);

  conic::SdpProblem p;
  int lam = p.add_scalar("lambda", true);
  int sig = p.add_hermitian("sigma", next, true, extension_perms(da, db, k));
  conic::LinExpr tr = p.lin();
  p.lin_add_trace(tr, sig);
  p.add_eq(tr, 1.0);

  conic::AffineHerm con = p.affine(da * db);
  p.add_mapped(con, sig, [&](const conic::SparseHerm& b) {
    return b.partial_trace(dims, {0, 1});
  });
  p.add_scalar_term(con, lam, conic::SparseHerm::from_dense(-rho.mat()));
  p.add_psd(con);

  conic::LinExpr obj = p.lin();
  p.lin_add_scalar(obj, lam, 1.0);
  p.set_objective(conic::Sense::Maximize, obj);

  conic::SdpSolution sol = conic::solve(p, opts);
  return from_sdp_optimum(sol, sol.objective);
}

DivergenceValue e_hyp_channel(const ChoiOperator& gamma, int k, double eps,
                              const conic::SolveOptions& opts) {
  check_eps(eps);
  if (k < 2) throw std::invalid_argument("e_hyp_channel: k must be >= 2");
  const int da = gamma.dim_in(), db = gamma.dim_out();
  const int nab = da * db;
  if (extension_size(da, db, k) > 4096)
    throw conic::GuardExceeded("e_hyp_channel: dimension guard exceeded");
  const int next = static_cast<int>(extension_size(da, db, k));
  const auto dims = extension_dims(da, db, k);
  std::vector<int> all_b(k);
  std::iota(all_b.begin(), all_b.end(), 1);

  conic::SdpProblem p;
  int mu = p.add_scalar("mu", true);
  int lam = p.add_scalar("lambda", true);
  int y = p.add_hermitian("Y", nab, true);
  int gp = p.add_hermitian("GammaP", next, true, extension_perms(da, db, k));

  // trace preservation of the extension channel
  conic::AffineHerm tp = p.affine(da);
  p.add_mapped(tp, gp, [&](const conic::SparseHerm& b) {
    return b.partial_trace(dims, {0});
  });
  p.add_const(tp, conic::SparseHerm::identity(da).scaled(-1.0));
  p.add_eq_zero(tp);

  conic::AffineHerm con = p.affine(nab);
  p.add_mapped(con, gp, [&](const conic::SparseHerm& b) {
    return b.partial_trace(dims, {0, 1});
  });
  p.add_term(con, y, 1.0);
  p.add_scalar_term(con, mu, conic::SparseHerm::from_dense(-gamma.mat()));
  p.add_psd(con);

  conic::AffineHerm cap = p.affine(da);
  p.add_scalar_term(cap, lam, conic::SparseHerm::identity(da));
  p.add_mapped(cap, y, [&](const conic::SparseHerm& b) {
    return b.partial_trace({da, db}, {0}).scaled(-1.0);
  });
  p.add_psd(cap);

  conic::LinExpr obj = p.lin();
  p.lin_add_scalar(obj, mu, 1.0 - eps);
  p.lin_add_scalar(obj, lam, -1.0);
  p.set_objective(conic::Sense::Maximize, obj);

  conic::SdpSolution sol = conic::solve(p, opts);
  return from_sdp_optimum(sol, sol.objective);
}

DivergenceValue e_max_channel(const ChoiOperator& gamma, int k,
                              const conic::SolveOptions& opts) {
  if (k < 2) throw std::invalid_argument("e_max_channel: k must be >= 2");
  const int da = gamma.dim_in(), db = gamma.dim_out();
  if (extension_size(da, db, k) > 4096)
    throw conic::GuardExceeded("e_max_channel: dimension guard exceeded");
  const int next = static_cast<int>(extension_size(da, db, k));
  const auto dims = extension_dims(da, db, k);

  conic::SdpProblem p;
  int lam = p.add_scalar("lambda", true);
  int gp = p.add_hermitian("GammaP", next, true, extension_perms(da, db, k));

  conic::AffineHerm tp = p.affine(da);
  p.add_mapped(tp, gp, [&](const conic::SparseHerm& b) {
    return b.partial_trace(dims, {0});
  });
  p.add_const(tp, conic::SparseHerm::identity(da).scaled(-1.0));
  p.add_eq_zero(tp);

  conic::AffineHerm con = p.affine(da * db);
  p.add_mapped(con, gp, [&](const conic::SparseHerm& b) {
    return b.partial_trace(dims, {0, 1});
  });
  p.add_scalar_term(con, lam, conic::SparseHerm::from_dense(-gamma.mat()));
  p.add_psd(con);

  conic::LinExpr obj = p.lin();
  p.lin_add_scalar(obj, lam, 1.0);
  p.set_objective(conic::Sense::Maximize, obj);

  conic::SdpSolution sol = conic::solve(p, opts);
  return from_sdp_optimum(sol, sol.objective);
}

DivergenceValue e_geo_channel(const ChoiOperator& gamma, int k, int ell,
                              const conic::SolveOptions& opts) {
  if (k < 2) throw std::invalid_argument("e_geo_channel: k must be >= 2");
  if (ell < 1) throw std::invalid_argument("e_geo_channel: ell must be >= 1");
  const int da = gamma.dim_in(), db = gamma.dim_out();
  const int nab = da * db;
  if (extension_size(da, db, k) > 4096)
    throw conic::GuardExceeded("e_geo_channel: dimension guard exceeded");
  const int next = static_cast<int>(extension_size(da, db, k));
  const auto dims = extension_dims(da, db, k);

  conic::SdpProblem p;
  int yv = p.add_scalar("y", false);
  int m = p.add_hermitian("M", nab, false);
  std::vector<int> nvars;  // N^1 .. N^ell
  for (int i = 1; i <= ell; ++i)
    nvars.push_back(p.add_hermitian("N" + std::to_string(i), nab, false));
  int gp = p.add_hermitian("GammaP", next, true, extension_perms(da, db, k));

  conic::AffineHerm tp = p.affine(da);
  p.add_mapped(tp, gp, [&](const conic::SparseHerm& b) {
    return b.partial_trace(dims, {0});
  });
  p.add_const(tp, conic::SparseHerm::identity(da).scaled(-1.0));
  p.add_eq_zero(tp);

  // Tr_B M <= y I_A
  conic::AffineHerm cap = p.affine(da);
  p.add_scalar_term(cap, yv, conic::SparseHerm::identity(da));
  p.add_mapped(cap, m, [&](const conic::SparseHerm& b) {
    return b.partial_trace({da, db}, {0}).scaled(-1.0);
  });
  p.add_psd(cap);

  const conic::SparseHerm gam = conic::SparseHerm::from_dense(gamma.mat());

  // chain blocks [[Gamma, N^i], [N^i, N^(i-1)]] >= 0 with N^0 the marginal
  for (int i = 1; i <= ell; ++i) {
    conic::AffineHerm blk = p.affine(2 * nab);
    p.add_const(blk, gam.embed_block(0, 2 * nab));
    p.add_mapped(blk, nvars[i - 1],
                 [&](const conic::SparseHerm& b) { return offdiag_sym_block(b); });
    if (i == 1) {
      p.add_mapped(blk, gp, [&](const conic::SparseHerm& b) {
        return b.partial_trace(dims, {0, 1}).embed_block(nab, 2 * nab);
      });
    } else {
      p.add_mapped(blk, nvars[i - 2], [&](const conic::SparseHerm& b) {
        return b.embed_block(nab, 2 * nab);
      });
    }
    p.add_psd(blk);
  }

  // top block [[M, Gamma], [Gamma, N^ell]] >= 0
  {
    conic::AffineHerm blk = p.affine(2 * nab);
    p.add_const(blk, offdiag_sym_block(gam));
    p.add_mapped(blk, m,
                 [&](const conic::SparseHerm& b) { return b.embed_block(0, 2 * nab); });
    p.add_mapped(blk, nvars[ell - 1], [&](const conic::SparseHerm& b) {
      return b.embed_block(nab, 2 * nab);
    });
    p.add_psd(blk);
  }

  conic::LinExpr obj = p.lin();
  p.lin_add_scalar(obj, yv, 1.0);
  p.set_objective(conic::Sense::Minimize, obj);

  conic::SdpSolution sol = conic::solve(p, opts);
  DivergenceValue out;
  out.method = Method::Sdp;
  out.status = sol.status;
  out.residuals = sol.residuals;
  out.iterations = sol.iterations;
  if (sol.status != conic::SolveStatus::Optimal) return out;
  if (sol.objective <= 0.0) {
    out.status = conic::SolveStatus::NumericalFailure;
    return out;
  }
  double bits = std::pow(2.0, ell) * std::log2(sol.objective);
  if (std::abs(bits) < 1e-7) bits = std::max(0.0, bits);
  out.bits = bits;
  return out;
}

double classical_renyi(const std::vector<double>& p, const std::vector<double>& q,
                       double alpha) {
  if (p.size() != q.size())
    throw std::invalid_argument("classical_renyi: support size mismatch");
  if (!(alpha > 1.0)) throw std::invalid_argument("classical_renyi: alpha must be > 1");
  if (std::isinf(alpha)) {
    double r = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
      if (p[i] == 0.0) continue;
      if (q[i] == 0.0) return kInf;
      r = std::max(r, p[i] / q[i]);
    }
    return std::log2(r);
  }
  double s = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return kInf;
    s += std::pow(p[i], alpha) * std::pow(q[i], 1.0 - alpha);
  }
  return std::log2(s) / (alpha - 1.0);
}

double isotropic_g(int d, const KParam& k) {
  if (d < 2) throw std::invalid_argument("isotropic_g: d must be >= 2");
  if (k.is_inf()) return 1.0 / d;
  const double kk = static_cast<double>(k.value());
  return 1.0 / d + 1.0 / kk - 1.0 / (d * kk);
}

DivergenceValue e_hyp_isotropic_n(double F, int d, const KParam& k, long n, double eps) {
  if (F < 0.0 || F > 1.0) throw std::invalid_argument("e_hyp_isotropic_n: F out of [0,1]");
  return dh_bernoulli_n(BinaryDistributionPair(F, isotropic_g(d, k), n), eps);
}

}  // namespace kext::diverge
