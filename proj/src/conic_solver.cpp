#include "kext/conic.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <string>

#if defined(KEXT_HAVE_LAPACKE)
#include <lapacke.h>
#endif

// Primal-dual path-following interior-point method for
//     minimize c'x  s.t.  Gx + s = h,  Ax = b,  s in K,
// K = nonnegative orthant x product of real symmetric PSD cones.
// Nesterov-Todd scaling, Mehrotra predictor-corrector, adaptive iterative
// refinement of the KKT solves. The Schur complement G'(W'W)^{-1}G is
// assembled from the sparse columns of G, so the per-iteration cost is
// dominated by one dense Cholesky factorization.
//
// The Schur route squares the scaling's condition number, which caps the
// certifiable duality gap near 1e-7 in double precision on degenerate
// instances. Small problems that stall are therefore re-solved in long
// double, which recovers the missing digits; larger problems fall back to a
// documented reduced-precision acceptance tier.

namespace kext::conic {

namespace {

constexpr double kStepScale = 0.99;

template <class Real>
struct Backend {
  using M = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::LLT<M> llt;
  bool factor(const M& h) {
    llt.compute(h);
    return llt.info() == Eigen::Success;
  }
  void solve_inplace(Eigen::Ref<M> rhs) const { rhs = llt.solve(rhs); }
};

#if defined(KEXT_HAVE_LAPACKE)
template <>
struct Backend<double> {
  RMat l;
  bool factor(const RMat& h) {
    l = h;
    lapack_int n = static_cast<lapack_int>(l.rows());
    return LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', n, l.data(), n) == 0;
  }
  void solve_inplace(Eigen::Ref<RMat> rhs) const {
    lapack_int n = static_cast<lapack_int>(l.rows());
    lapack_int m = static_cast<lapack_int>(rhs.cols());
    LAPACKE_dpotrs(LAPACK_COL_MAJOR, 'L', n, m, l.data(), n, rhs.data(),
                   static_cast<lapack_int>(rhs.outerStride()));
  }
};
#endif

template <class Real>
class Ipm {
  using M = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  using V = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

  struct ConeVec {
    V lp;
    std::vector<M> mats;
    void set_zero() {
      lp.setZero();
      for (auto& m : mats) m.setZero();
    }
    void axpy(Real a, const ConeVec& o) {
      if (lp.size()) lp += a * o.lp;
      for (size_t i = 0; i < mats.size(); ++i) mats[i] += a * o.mats[i];
    }
  };

  static Real cone_dot(const ConeVec& a, const ConeVec& b) {
    Real acc = a.lp.size() ? a.lp.dot(b.lp) : Real(0);
    for (size_t i = 0; i < a.mats.size(); ++i)
      acc += (a.mats[i].array() * b.mats[i].array()).sum();
    return acc;
  }
  static Real cone_norm(const ConeVec& a) {
    using std::sqrt;
    return sqrt(std::max(Real(0), cone_dot(a, a)));
  }

  struct BlockScaling {
    M R, Rinv, P, Q;
    V lam;
  };

 public:
  Ipm(const SdpProblem& p, const SolveOptions& opts) : p_(p), opts_(opts) {
    nx_ = p.coord_count();
    maximize_ = p.maximize();
    c_ = V::Zero(nx_);
    for (const auto& [i, v] : p.objective()) c_(i) = Real(maximize_ ? -v : v);

    mlp_ = static_cast<int>(p.lp_rows().size());
    lp_h_ = V::Zero(mlp_);
    lp_rows_.resize(mlp_);
    lp_cols_.resize(nx_);
    for (int r = 0; r < mlp_; ++r) {
      const auto& row = p.lp_rows()[r];
      lp_h_(r) = Real(row.h);
      for (const auto& [i, v] : row.g) {
        lp_rows_[r].emplace_back(i, Real(v));
        lp_cols_[i].emplace_back(r, Real(v));
      }
    }

    for (const auto& b : p.blocks()) {
      BlockData bd;
      bd.edim = b.edim;
      for (const auto& [i, trips] : b.g) {
        std::vector<Trip> col;
        col.reserve(trips.size());
        for (const auto& t : trips) col.push_back({t.r, t.c, Real(t.v)});
        bd.cols.emplace_back(i, std::move(col));
      }
      for (const auto& t : b.h) bd.h.push_back({t.r, t.c, Real(t.v)});
      blocks_.push_back(std::move(bd));
    }

    np_ = static_cast<int>(p.eq_rows().size());
    b_ = V::Zero(np_);
    arows_.resize(np_);
    for (int r = 0; r < np_; ++r) {
      b_(r) = Real(p.eq_rhs()[r]);
      for (const auto& [i, v] : p.eq_rows()[r]) arows_[r].emplace_back(i, Real(v));
    }

    hc_ = alloc_cone();
    hc_.set_zero();
    hc_.lp = lp_h_;
    for (size_t bi = 0; bi < blocks_.size(); ++bi)
      scatter(blocks_[bi].h, Real(1), hc_.mats[bi]);

    rho_ = mlp_;
    for (const auto& b : blocks_) rho_ += b.edim;
    norm_b_ = std::max(Real(1), b_.norm());
    norm_h_ = std::max(Real(1), cone_norm(hc_));
    norm_c_ = std::max(Real(1), c_.norm());
  }

  RawSolution run();

 private:
  struct Trip {
    int r, c;
    Real v;
  };
  struct BlockData {
    int edim;
    std::vector<std::pair<int, std::vector<Trip>>> cols;
    std::vector<Trip> h;
  };

  ConeVec alloc_cone() const {
    ConeVec v;
    v.lp = V::Zero(mlp_);
    for (const auto& b : blocks_) v.mats.push_back(M::Zero(b.edim, b.edim));
    return v;
  }

  static void scatter(const std::vector<Trip>& trips, Real w, M& out) {
    for (const auto& t : trips) {
      out(t.r, t.c) += w * t.v;
      if (t.r != t.c) out(t.c, t.r) += w * t.v;
    }
  }
  static Real trip_inner(const std::vector<Trip>& trips, const M& m) {
    Real acc = 0;
    for (const auto& t : trips)
      acc += t.v * (t.r == t.c ? m(t.r, t.c) : Real(2) * m(t.r, t.c));
    return acc;
  }

  void apply_G(const V& x, ConeVec& out) const {
    out.set_zero();
    for (int i = 0; i < nx_; ++i) {
      const Real w = x(i);
      if (w == Real(0)) continue;
      for (const auto& [r, v] : lp_cols_[i]) out.lp(r) += v * w;
    }
    for (size_t bi = 0; bi < blocks_.size(); ++bi)
      for (const auto& [i, trips] : blocks_[bi].cols) {
        const Real w = x(i);
        if (w != Real(0)) scatter(trips, w, out.mats[bi]);
      }
  }

  V apply_GT(const ConeVec& z) const {
    V out = V::Zero(nx_);
    for (int i = 0; i < nx_; ++i)
      for (const auto& [r, v] : lp_cols_[i]) out(i) += v * z.lp(r);
    for (size_t bi = 0; bi < blocks_.size(); ++bi)
      for (const auto& [i, trips] : blocks_[bi].cols)
        out(i) += trip_inner(trips, z.mats[bi]);
    return out;
  }

  V apply_A(const V& x) const {
    V out = V::Zero(np_);
    for (int r = 0; r < np_; ++r)
      for (const auto& [i, v] : arows_[r]) out(r) += v * x(i);
    return out;
  }
  V apply_AT(const V& y) const {
    V out = V::Zero(nx_);
    for (int r = 0; r < np_; ++r)
      for (const auto& [i, v] : arows_[r]) out(i) += v * y(r);
    return out;
  }

  // any factor F with M = F F'; symmetric square root as the fallback when
  // Cholesky breaks down near the cone boundary
  static bool psd_factor(const M& m, M& f) {
    Eigen::LLT<M> llt(m);
    if (llt.info() == Eigen::Success) {
      f = llt.matrixL();
      return true;
    }
    Eigen::SelfAdjointEigenSolver<M> es(m);
    if (es.info() != Eigen::Success) return false;
    const Real top = es.eigenvalues().maxCoeff();
    if (top <= Real(0)) return false;
    V ev = es.eigenvalues().cwiseMax(Real(1e-18) * top);
    f = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    return true;
  }

  bool compute_scaling(const ConeVec& s, const ConeVec& z) {
    w2_ = s.lp.array() / z.lp.array();
    w2inv_ = z.lp.array() / s.lp.array();
    lam_lp_ = (s.lp.array() * z.lp.array()).sqrt();
    scal_.clear();
    for (size_t bi = 0; bi < blocks_.size(); ++bi) {
      M ls, lz;
      if (!psd_factor(s.mats[bi], ls) || !psd_factor(z.mats[bi], lz)) return false;
      M m = lz.transpose() * ls;
      // JacobiSVD: BDCSVD mis-factors some small ill-scaled blocks, and a
      // wrong scaling point silently corrupts the step-length bound
      Eigen::JacobiSVD<M> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
      V sig = svd.singularValues();
      if (sig.minCoeff() <= Real(0)) return false;
      BlockScaling bs;
      V isq = sig.cwiseSqrt().cwiseInverse();
      bs.R = ls * svd.matrixV() * isq.asDiagonal();
      bs.Rinv = isq.asDiagonal() * svd.matrixU().transpose() * lz.transpose();
      bs.P = bs.R * bs.R.transpose();
      bs.Q = bs.Rinv.transpose() * bs.Rinv;
      bs.lam = sig;
      scal_.push_back(std::move(bs));
    }
    identity_scaling_ = false;
    return true;
  }

  void set_identity_scaling() {
    w2_ = V::Ones(mlp_);
    w2inv_ = V::Ones(mlp_);
    lam_lp_ = V::Ones(mlp_);
    scal_.clear();
    for (const auto& b : blocks_) {
      BlockScaling bs;
      bs.R = M::Identity(b.edim, b.edim);
      bs.Rinv = bs.R;
      bs.P = bs.R;
      bs.Q = bs.R;
      bs.lam = V::Ones(b.edim);
      scal_.push_back(std::move(bs));
    }
    identity_scaling_ = true;
  }

  void apply_WtWinv(const ConeVec& in, ConeVec& out) const {
    out.lp = in.lp.array() * w2inv_.array();
    for (size_t bi = 0; bi < blocks_.size(); ++bi) {
      if (identity_scaling_) {
        out.mats[bi] = in.mats[bi];
      } else {
        const M& q = scal_[bi].Q;
        out.mats[bi] = q * in.mats[bi] * q;
        out.mats[bi] = Real(0.5) * (out.mats[bi] + out.mats[bi].transpose()).eval();
      }
    }
  }
  void apply_WtW(const ConeVec& in, ConeVec& out) const {
    out.lp = in.lp.array() * w2_.array();
    for (size_t bi = 0; bi < blocks_.size(); ++bi) {
      if (identity_scaling_) {
        out.mats[bi] = in.mats[bi];
      } else {
        const M& p = scal_[bi].P;
        out.mats[bi] = p * in.mats[bi] * p;
        out.mats[bi] = Real(0.5) * (out.mats[bi] + out.mats[bi].transpose()).eval();
      }
    }
  }

  bool factor_kkt() {
    h_.setZero(nx_, nx_);
    for (int r = 0; r < mlp_; ++r) {
      const Real zeta = w2inv_(r);
      const auto& row = lp_rows_[r];
      for (size_t a = 0; a < row.size(); ++a)
        for (size_t b = a; b < row.size(); ++b) {
          const int t = row[a].first, u = row[b].first;
          const Real v = row[a].second * row[b].second * zeta;
          if (t <= u)
            h_(t, u) += v;
          else
            h_(u, t) += v;
        }
    }
    for (size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& cols = blocks_[bi].cols;
      const M& q = scal_[bi].Q;
      M t_u(blocks_[bi].edim, blocks_[bi].edim);
      for (size_t ui = 0; ui < cols.size(); ++ui) {
        const auto& [u, gu] = cols[ui];
        t_u.setZero();
        if (identity_scaling_) {
          scatter(gu, Real(1), t_u);
        } else {
          for (const auto& tr : gu) {
            t_u.noalias() += tr.v * (q.col(tr.r) * q.row(tr.c));
            if (tr.r != tr.c) t_u.noalias() += tr.v * (q.col(tr.c) * q.row(tr.r));
          }
        }
        for (size_t ti = 0; ti <= ui; ++ti) {
          const auto& [t, gt] = cols[ti];
          Real acc = 0;
          for (const auto& tr : gt)
            acc += tr.v *
                   (tr.r == tr.c ? t_u(tr.r, tr.c) : t_u(tr.r, tr.c) + t_u(tr.c, tr.r));
          if (t <= u)
            h_(t, u) += acc;
          else
            h_(u, t) += acc;
        }
      }
    }
    h_.template triangularView<Eigen::StrictlyLower>() = h_.transpose();

    // symmetric diagonal equilibration; the diagonal spread of the Schur
    // complement carries much of its condition number
    hscale_ = h_.diagonal().cwiseAbs().cwiseMax(Real(1e-300)).cwiseSqrt().cwiseInverse();
    M hs = hscale_.asDiagonal() * h_ * hscale_.asDiagonal();
    Real ridge = 0;
    bool ok = false;
    for (int attempt = 0; attempt < 5; ++attempt) {
      M hr = hs;
      if (ridge > Real(0)) hr.diagonal().array() += ridge;
      if (chol_.factor(hr)) {
        ok = true;
        break;
      }
      ridge = (ridge == Real(0)) ? Real(1e-14) : ridge * Real(1e3);
    }
    if (!ok) return false;

    if (np_ > 0) {
      hinv_at_.setZero(nx_, np_);
      for (int r = 0; r < np_; ++r)
        for (const auto& [i, v] : arows_[r]) hinv_at_(i, r) = v;
      solve_h(hinv_at_);
      M s = M::Zero(np_, np_);
      for (int r = 0; r < np_; ++r)
        for (const auto& [i, v] : arows_[r]) s.row(r) += v * hinv_at_.row(i);
      s = Real(0.5) * (s + s.transpose()).eval();
      s_ldlt_.compute(s);
      if (s_ldlt_.info() != Eigen::Success) return false;
    }
    return true;
  }

  void solve_h(Eigen::Ref<M> rhs) const {
    rhs = hscale_.asDiagonal() * rhs;
    chol_.solve_inplace(rhs);
    rhs = hscale_.asDiagonal() * rhs;
  }

  void solve_once(const V& bx, const V& by, const ConeVec& bz, V& dx, V& dy,
                  ConeVec& dz) {
    ConeVec tmp = alloc_cone();
    apply_WtWinv(bz, tmp);
    V u = bx + apply_GT(tmp);
    M rhs = u;
    solve_h(rhs);
    if (np_ > 0) {
      V ahu = apply_A(rhs.col(0));
      dy = s_ldlt_.solve((ahu - by).eval());
      dx = rhs.col(0) - hinv_at_ * dy;
    } else {
      dy = V::Zero(0);
      dx = rhs.col(0);
    }
    ConeVec gdx = alloc_cone();
    apply_G(dx, gdx);
    ConeVec diff = alloc_cone();
    diff.lp = gdx.lp - bz.lp;
    for (size_t bi = 0; bi < blocks_.size(); ++bi)
      diff.mats[bi] = gdx.mats[bi] - bz.mats[bi];
    dz = alloc_cone();
    apply_WtWinv(diff, dz);
  }

  // KKT solve with adaptive iterative refinement; the Schur route loses
  // digits when the scaling is ill-conditioned, and exact residual
  // correction recovers them
  void kkt_solve(const V& bx, const V& by, const ConeVec& bz, V& dx, V& dy,
                 ConeVec& dz) {
    solve_once(bx, by, bz, dx, dy, dz);
    const Real scale = std::max(
        {Real(1), bx.template lpNorm<Eigen::Infinity>(),
         np_ ? by.template lpNorm<Eigen::Infinity>() : Real(0), cone_norm(bz)});
    Real prev = std::numeric_limits<Real>::infinity();
    for (int round = 0; round < 8; ++round) {
      V r1 = bx - apply_AT(dy) - apply_GT(dz);
      V r2 = by - apply_A(dx);
      ConeVec gdx = alloc_cone();
      apply_G(dx, gdx);
      ConeVec wtwdz = alloc_cone();
      apply_WtW(dz, wtwdz);
      ConeVec r3 = alloc_cone();
      r3.lp = bz.lp - gdx.lp + wtwdz.lp;
      for (size_t bi = 0; bi < blocks_.size(); ++bi)
        r3.mats[bi] = bz.mats[bi] - gdx.mats[bi] + wtwdz.mats[bi];
      const Real rnorm =
          std::max({r1.template lpNorm<Eigen::Infinity>(),
                    np_ ? r2.template lpNorm<Eigen::Infinity>() : Real(0),
                    cone_norm(r3)});
      last_kkt_residual_ = double(rnorm / scale);
      if (rnorm <= std::numeric_limits<Real>::epsilon() * Real(100) * scale ||
          rnorm >= Real(0.9) * prev)
        break;
      prev = rnorm;
      V ex, ey;
      ConeVec ez = alloc_cone();
      solve_once(r1, r2, r3, ex, ey, ez);
      dx += ex;
      dy += ey;
      dz.axpy(Real(1), ez);
    }
  }

  Real cone_min_eig(const ConeVec& v) const {
    Real m = std::numeric_limits<Real>::infinity();
    if (mlp_ > 0) m = std::min(m, v.lp.minCoeff());
    for (const auto& mat : v.mats) {
      Eigen::SelfAdjointEigenSolver<M> es(Real(0.5) * (mat + mat.transpose()),
                                          Eigen::EigenvaluesOnly);
      m = std::min(m, es.eigenvalues().minCoeff());
    }
    return m;
  }

  Real step_to_boundary(const ConeVec& scaled_dir) const {
    Real alpha = std::numeric_limits<Real>::infinity();
    for (int r = 0; r < mlp_; ++r)
      if (scaled_dir.lp(r) < Real(0))
        alpha = std::min(alpha, -lam_lp_(r) / scaled_dir.lp(r));
    for (size_t bi = 0; bi < blocks_.size(); ++bi) {
      const V& lam = scal_[bi].lam;
      V isq = lam.cwiseSqrt().cwiseInverse();
      M e = isq.asDiagonal() * scaled_dir.mats[bi] * isq.asDiagonal();
      Eigen::SelfAdjointEigenSolver<M> es(Real(0.5) * (e + e.transpose()),
                                          Eigen::EigenvaluesOnly);
      const Real m = es.eigenvalues().minCoeff();
      if (m < Real(0)) alpha = std::min(alpha, Real(-1) / m);
    }
    return alpha;
  }

  void scale_dirs(const ConeVec& ds, const ConeVec& dz, ConeVec& dss,
                  ConeVec& dzs) const {
    dss.lp = ds.lp.array() / w2_.array().sqrt();
    dzs.lp = dz.lp.array() * w2_.array().sqrt();
    for (size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& sc = scal_[bi];
      dss.mats[bi] = sc.Rinv * ds.mats[bi] * sc.Rinv.transpose();
      dss.mats[bi] = Real(0.5) * (dss.mats[bi] + dss.mats[bi].transpose()).eval();
      dzs.mats[bi] = sc.R.transpose() * dz.mats[bi] * sc.R;
      dzs.mats[bi] = Real(0.5) * (dzs.mats[bi] + dzs.mats[bi].transpose()).eval();
    }
  }

  const SdpProblem& p_;
  SolveOptions opts_;
  int nx_ = 0, mlp_ = 0, np_ = 0;
  bool maximize_ = false;
  V c_, b_, lp_h_;
  std::vector<std::vector<std::pair<int, Real>>> lp_rows_, lp_cols_, arows_;
  std::vector<BlockData> blocks_;
  ConeVec hc_;
  Real rho_ = 0, norm_b_ = 1, norm_h_ = 1, norm_c_ = 1;

  V w2_, w2inv_, lam_lp_;
  std::vector<BlockScaling> scal_;
  bool identity_scaling_ = true;

  M h_, hinv_at_;
  V hscale_;
  Backend<Real> chol_;
  Eigen::LDLT<M> s_ldlt_;
  double last_kkt_residual_ = 0;
};

template <class Real>
RawSolution Ipm<Real>::run() {
  RawSolution out;
  SdpSolution& sol = out.sol;

  if (mlp_ == 0 && blocks_.empty()) {
    sol.status = SolveStatus::NumericalFailure;
    sol.message = "problem has no cone constraints";
    return out;
  }

  set_identity_scaling();
  if (!factor_kkt()) {
    sol.status = SolveStatus::NumericalFailure;
    sol.message = "initial KKT factorization failed";
    return out;
  }
  V x, ytmp, y, xtmp;
  ConeVec ztmp = alloc_cone(), z = alloc_cone();
  kkt_solve(V::Zero(nx_), b_, hc_, x, ytmp, ztmp);
  ConeVec s = alloc_cone();
  s.lp = -ztmp.lp;
  for (size_t bi = 0; bi < blocks_.size(); ++bi) s.mats[bi] = -ztmp.mats[bi];
  {
    const Real m = cone_min_eig(s);
    if (m <= Real(0)) {
      s.lp.array() += (Real(1) - m);
      for (auto& mat : s.mats) mat.diagonal().array() += (Real(1) - m);
    }
  }
  ConeVec zero_cone = alloc_cone();
  zero_cone.set_zero();
  kkt_solve(-c_, V::Zero(np_), zero_cone, xtmp, y, z);
  {
    const Real m = cone_min_eig(z);
    if (m <= Real(0)) {
      z.lp.array() += (Real(1) - m);
      for (auto& mat : z.mats) mat.diagonal().array() += (Real(1) - m);
    }
  }

  Real pres = std::numeric_limits<Real>::infinity();
  Real dres = pres, gap = pres;
  Real pcost = 0, dcost = 0;
  int iter = 0;
  bool converged = false, infeasible = false;

  // best iterate seen, by worst-of residual score; degenerate instances can
  // derail after effectively converging, and the best point is the answer
  struct Best {
    Real score = std::numeric_limits<Real>::infinity();
    Real pres = 0, dres = 0, gap = 0, pcost = 0, dcost = 0;
    V x, y;
    int iter = 0;
  } best;
  int since_improvement = 0;
  std::string stop_reason;

  const Real tol = Real(opts_.tol);

  ConeVec rpriG = alloc_cone(), gx = alloc_cone();
  ConeVec ds = alloc_cone(), dz_aff = alloc_cone(), ds_aff = alloc_cone();
  ConeVec dss = alloc_cone(), dzs = alloc_cone();
  ConeVec bz = alloc_cone(), ucor = alloc_cone();
  V dx, dy;
  ConeVec dz = alloc_cone();

  for (iter = 0; iter <= opts_.max_iter; ++iter) {
    V rdual = c_ + apply_AT(y) + apply_GT(z);
    V rpriA = apply_A(x) - b_;
    apply_G(x, gx);
    rpriG.lp = gx.lp + s.lp - hc_.lp;
    for (size_t bi = 0; bi < blocks_.size(); ++bi)
      rpriG.mats[bi] = gx.mats[bi] + s.mats[bi] - hc_.mats[bi];

    gap = cone_dot(s, z);
    pcost = c_.dot(x);
    dcost = -cone_dot(hc_, z) - (np_ ? b_.dot(y) : Real(0));
    pres = std::max(np_ ? rpriA.norm() / norm_b_ : Real(0), cone_norm(rpriG) / norm_h_);
    dres = rdual.norm() / norm_c_;
    using std::abs;
    const Real relgap = std::min(gap < Real(0) ? abs(pcost - dcost) : gap,
                                 abs(pcost - dcost)) /
                        std::max(Real(1), abs(pcost));

    if (std::getenv("KEXT_SOLVER_DEBUG"))
      std::fprintf(stderr,
                   "it %3d pcost % .12e dcost % .12e pres %.2e dres %.2e gap %.2e\n",
                   iter, double(pcost), double(dcost), double(pres), double(dres),
                   double(gap));

    const Real score = std::max({pres, dres, relgap});
    if (score < best.score * Real(0.999)) {
      best.score = score;
      best.pres = pres;
      best.dres = dres;
      best.gap = gap;
      best.pcost = pcost;
      best.dcost = dcost;
      best.x = x;
      best.y = y;
      best.iter = iter;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }

    if (pres <= tol && dres <= tol && relgap <= tol) {
      converged = true;
      break;
    }
    {
      // primal infeasibility certificate: A'y + G'z ~ 0, h'z + b'y < 0
      const Real hzby = cone_dot(hc_, z) + (np_ ? b_.dot(y) : Real(0));
      if (hzby < Real(0)) {
        const Real cert = (apply_AT(y) + apply_GT(z)).norm() / (-hzby);
        if (cert <= tol) {
          infeasible = true;
          break;
        }
      }
    }
    if (iter == opts_.max_iter) {
      stop_reason = "maximum iterations reached";
      break;
    }
    if (since_improvement >= 10) {
      stop_reason = "progress stalled";
      break;
    }

    const Real mu = gap / rho_;
    if (!compute_scaling(s, z)) {
      stop_reason = "scaling breakdown (iterates reached the cone boundary)";
      break;
    }
    if (!factor_kkt()) {
      stop_reason = "KKT factorization failed";
      break;
    }

    // affine direction
    bz.lp = -rpriG.lp + s.lp;
    for (size_t bi = 0; bi < blocks_.size(); ++bi)
      bz.mats[bi] = -rpriG.mats[bi] + s.mats[bi];
    kkt_solve(-rdual, -rpriA, bz, dx, dy, dz_aff);
    apply_G(dx, gx);
    ds_aff.lp = -rpriG.lp - gx.lp;
    for (size_t bi = 0; bi < blocks_.size(); ++bi)
      ds_aff.mats[bi] = -rpriG.mats[bi] - gx.mats[bi];

    scale_dirs(ds_aff, dz_aff, dss, dzs);
    Real alpha = std::min({Real(1), step_to_boundary(dss), step_to_boundary(dzs)});
    Real gap_aff;
    {
      ConeVec s2 = s, z2 = z;
      s2.axpy(alpha, ds_aff);
      z2.axpy(alpha, dz_aff);
      gap_aff = std::max(Real(0), cone_dot(s2, z2));
    }
    Real sigma = gap_aff / std::max(gap, Real(1e-300));
    sigma = std::min(Real(1), std::max(Real(0), sigma * sigma * sigma));

    // combined direction with Mehrotra correction:
    // d = lam o lam + (W^-T ds_aff) o (W dz_aff) - sigma mu e, u = lam \ d
    ucor.lp =
        (lam_lp_.array().square() + dss.lp.array() * dzs.lp.array() - sigma * mu) /
        lam_lp_.array();
    for (size_t bi = 0; bi < blocks_.size(); ++bi) {
      const V& lam = scal_[bi].lam;
      M d = Real(0.5) * (dss.mats[bi] * dzs.mats[bi] + dzs.mats[bi] * dss.mats[bi]);
      d.diagonal() += lam.cwiseProduct(lam);
      d.diagonal().array() -= sigma * mu;
      M& u = ucor.mats[bi];
      u.resize(d.rows(), d.cols());
      for (Eigen::Index a = 0; a < d.rows(); ++a)
        for (Eigen::Index c2 = 0; c2 < d.cols(); ++c2)
          u(a, c2) = Real(2) * d(a, c2) / (lam(a) + lam(c2));
    }
    bz.lp = -rpriG.lp.array() + w2_.array().sqrt() * ucor.lp.array();
    for (size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& sc = scal_[bi];
      M wtu = sc.R * ucor.mats[bi] * sc.R.transpose();
      bz.mats[bi] = -rpriG.mats[bi] + Real(0.5) * (wtu + wtu.transpose());
    }
    kkt_solve(-rdual, -rpriA, bz, dx, dy, dz);
    if (last_kkt_residual_ > 1e-3) {
      stop_reason = "KKT solve lost accuracy";
      break;
    }
    apply_G(dx, gx);
    ds.lp = -rpriG.lp - gx.lp;
    for (size_t bi = 0; bi < blocks_.size(); ++bi)
      ds.mats[bi] = -rpriG.mats[bi] - gx.mats[bi];

    scale_dirs(ds, dz, dss, dzs);
    alpha = std::min({Real(1), Real(kStepScale) * step_to_boundary(dss),
                      Real(kStepScale) * step_to_boundary(dzs)});
    if (alpha < Real(1e-9)) {
      stop_reason = "step length collapsed";
      break;
    }

    x += alpha * dx;
    if (np_) y += alpha * dy;
    s.axpy(alpha, ds);
    z.axpy(alpha, dz);
  }

  if (std::getenv("KEXT_SOLVER_DEBUG"))
    std::fprintf(stderr, "  STOP iter=%d converged=%d reason='%s' best=%d score=%.3e\n",
                 iter, int(converged), stop_reason.c_str(), best.iter,
                 double(best.score));

  if (!converged && best.x.size()) {
    x = best.x;
    y = best.y;
    pres = best.pres;
    dres = best.dres;
    gap = best.gap;
    pcost = best.pcost;
    dcost = best.dcost;
  }

  out.x = x.template cast<double>();
  sol.iterations = iter;
  sol.residuals.primal = double(pres);
  sol.residuals.dual = double(dres);
  sol.residuals.gap = double(pcost - dcost);
  sol.objective =
      (maximize_ ? -double(pcost) : double(pcost)) + p_.objective_constant();
  for (size_t vi = 0; vi < p_.vars().size(); ++vi) {
    const auto& v = p_.vars()[vi];
    if (v.kind == VarKind::HermitianPsd || v.kind == VarKind::HermitianFree)
      sol.herm_values[v.name] = p_.herm_value(static_cast<int>(vi), out.x);
    else
      sol.scalar_values[v.name] = p_.scalar_value(static_cast<int>(vi), out.x);
  }

  using std::abs;
  const Real final_relgap = std::min(gap < Real(0) ? abs(pcost - dcost) : gap,
                                     abs(pcost - dcost)) /
                            std::max(Real(1), abs(pcost));
  // reduced-precision tier for runs that stall before certifying tol; the
  // achieved residuals are reported faithfully
  const double relax_pres = std::max(opts_.tol, 1e-6);
  const double relax_dres = std::max(opts_.tol, 1e-5);
  const double relax_gap = std::max(opts_.tol, 1e-6);

  if (converged) {
    sol.status = SolveStatus::Optimal;
    sol.message = "optimal";
  } else if (infeasible) {
    sol.status = SolveStatus::Infeasible;
    sol.message = "primal infeasibility certificate found";
  } else if (double(pres) <= relax_pres && double(dres) <= relax_dres &&
             double(final_relgap) <= relax_gap) {
    sol.status = SolveStatus::Optimal;
    sol.message = "optimal (reduced precision; " +
                  (stop_reason.empty() ? std::string("stopped") : stop_reason) + ")";
  } else {
    sol.status = SolveStatus::NumericalFailure;
    sol.message = stop_reason.empty() ? "maximum iterations reached" : stop_reason;
  }
  return out;
}

// dimension heuristic for the long double retry: small dense problems only
bool small_enough_for_long_double(const SdpProblem& p) {
  if (p.coord_count() > 800) return false;
  long svec = 0;
  for (const auto& b : p.blocks()) svec += static_cast<long>(b.edim) * (b.edim + 1) / 2;
  return svec <= 4000;
}

}  // namespace

RawSolution solve_raw(const SdpProblem& p, const SolveOptions& opts) {
  if (p.psd_guard_dim() > 4096)
    throw GuardExceeded("solve: total PSD dimension exceeds guard (4096)");
  Ipm<double> ipm(p, opts);
  RawSolution r = ipm.run();
  const bool full_precision =
      r.sol.status == SolveStatus::Optimal && r.sol.message == "optimal";
  if (!full_precision && r.sol.status != SolveStatus::Infeasible &&
      small_enough_for_long_double(p)) {
    Ipm<long double> ipm_ld(p, opts);
    RawSolution r2 = ipm_ld.run();
    const bool r2_full =
        r2.sol.status == SolveStatus::Optimal && r2.sol.message == "optimal";
    const bool r2_better = r2.sol.status == SolveStatus::Optimal &&
                           r.sol.status != SolveStatus::Optimal;
    if (r2_full || r2_better) return r2;
  }
  return r;
}

SdpSolution solve(const SdpProblem& p, const SolveOptions& opts) {
  return solve_raw(p, opts).sol;
}

}  // namespace kext::conic
