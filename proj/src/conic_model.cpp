#include "kext/conic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>

namespace kext::conic {

namespace {
constexpr double kDropTol = 1e-14;
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
}  // namespace

RMat embed_hermitian(const Mat& h) {
  if (h.rows() != h.cols()) throw std::invalid_argument("embed_hermitian: not square");
  const Eigen::Index n = h.rows();
  RMat out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = h.real();
  out.bottomRightCorner(n, n) = h.real();
  out.topRightCorner(n, n) = -h.imag();
  out.bottomLeftCorner(n, n) = h.imag();
  return out;
}

SparseHerm SparseHerm::from_dense(const Mat& m, double drop_tol) {
  if (m.rows() != m.cols()) throw std::invalid_argument("SparseHerm: not square");
  SparseHerm out;
  out.dim = static_cast<int>(m.rows());
  for (int i = 0; i < out.dim; ++i)
    for (int j = i; j < out.dim; ++j) {
      cd v = (i == j) ? cd(m(i, i).real(), 0.0) : cd(0.5 * (m(i, j) + std::conj(m(j, i))));
      if (std::abs(v) > drop_tol) out.entries.emplace_back(i, j, v);
    }
  return out;
}

SparseHerm SparseHerm::identity(int dim) {
  SparseHerm out;
  out.dim = dim;
  for (int i = 0; i < dim; ++i) out.entries.emplace_back(i, i, cd(1.0, 0.0));
  return out;
}

Mat SparseHerm::to_dense() const {
  Mat out = Mat::Zero(dim, dim);
  for (const auto& [i, j, v] : entries) {
    out(i, j) += v;
    if (i != j) out(j, i) += std::conj(v);
  }
  return out;
}

SparseHerm SparseHerm::scaled(double s) const {
  SparseHerm out = *this;
  for (auto& e : out.entries) std::get<2>(e) *= s;
  return out;
}

void SparseHerm::add_scaled(const SparseHerm& other, double s) {
  if (dim == 0 && entries.empty()) dim = other.dim;
  if (dim != other.dim) throw std::invalid_argument("SparseHerm: dim mismatch in add");
  std::map<std::pair<int, int>, cd> acc;
  for (const auto& [i, j, v] : entries) acc[{i, j}] += v;
  for (const auto& [i, j, v] : other.entries) acc[{i, j}] += s * v;
  entries.clear();
  for (const auto& [k, v] : acc)
    if (std::abs(v) > kDropTol) entries.emplace_back(k.first, k.second, v);
}

SparseHerm SparseHerm::partial_trace(const std::vector<int>& dims,
                                     const std::vector<int>& keep) const {
  long long total = 1;
  for (int d : dims) total *= d;
  if (total != dim) throw std::invalid_argument("SparseHerm::partial_trace: dims mismatch");
  std::vector<int> k = keep;
  std::sort(k.begin(), k.end());
  const int n = static_cast<int>(dims.size());
  std::vector<long long> stride(n);
  long long acc = 1;
  for (int i = n - 1; i >= 0; --i) {
    stride[i] = acc;
    acc *= dims[i];
  }
  // map a full index to (kept index, dropped index)
  auto split = [&](long long idx, long long& kept, long long& dropped) {
    kept = 0;
    dropped = 0;
    long long rest = idx;
    std::vector<int> digit(n);
    for (int t = n - 1; t >= 0; --t) {
      digit[t] = static_cast<int>(rest % dims[t]);
      rest /= dims[t];
    }
    for (int t = 0; t < n; ++t) {
      if (std::binary_search(k.begin(), k.end(), t))
        kept = kept * dims[t] + digit[t];
      else
        dropped = dropped * dims[t] + digit[t];
    }
  };
  std::map<std::pair<int, int>, cd> out;
  for (const auto& [i, j, v] : entries) {
    long long ki, di, kj, dj;
    split(i, ki, di);
    split(j, kj, dj);
    if (di != dj) continue;
    if (ki <= kj) {
      out[{static_cast<int>(ki), static_cast<int>(kj)}] += v;
    } else {
      out[{static_cast<int>(kj), static_cast<int>(ki)}] += std::conj(v);
    }
  }
  SparseHerm res;
  long long dk = 1;
  for (int t : k) dk *= dims[t];
  res.dim = static_cast<int>(dk);
  for (const auto& [key, v] : out)
    if (std::abs(v) > kDropTol) res.entries.emplace_back(key.first, key.second, v);
  return res;
}

SparseHerm SparseHerm::conjugate_by_index_perm(const std::vector<int>& p) const {
  if (static_cast<int>(p.size()) != dim)
    throw std::invalid_argument("SparseHerm: index perm size mismatch");
  SparseHerm out;
  out.dim = dim;
  for (const auto& [i, j, v] : entries) {
    int a = p[i], b = p[j];
    if (a <= b)
      out.entries.emplace_back(a, b, v);
    else
      out.entries.emplace_back(b, a, std::conj(v));
  }
  std::sort(out.entries.begin(), out.entries.end(),
            [](const auto& x, const auto& y) {
              return std::make_pair(std::get<0>(x), std::get<1>(x)) <
                     std::make_pair(std::get<0>(y), std::get<1>(y));
            });
  return out;
}

SparseHerm SparseHerm::embed_block(int offset, int outdim) const {
  SparseHerm out;
  out.dim = outdim;
  for (const auto& [i, j, v] : entries) out.entries.emplace_back(i + offset, j + offset, v);
  return out;
}

double SparseHerm::trace() const {
  double t = 0.0;
  for (const auto& [i, j, v] : entries)
    if (i == j) t += v.real();
  return t;
}

double SparseHerm::trace_against(const Mat& c) const {
  // Re tr[this * c] with c Hermitian
  double acc = 0.0;
  for (const auto& [i, j, v] : entries) {
    if (i == j)
      acc += (v * c(j, i)).real();
    else
      acc += 2.0 * (v * c(j, i)).real();
  }
  return acc;
}

SparseHerm offdiag_sym_block(const SparseHerm& g) {
  SparseHerm out;
  out.dim = 2 * g.dim;
  const int n = g.dim;
  for (const auto& [i, j, v] : g.entries) {
    out.entries.emplace_back(i, n + j, v);
    if (i != j) out.entries.emplace_back(j, n + i, std::conj(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// SdpProblem

namespace {

// real upper triplets of the [[Re,-Im],[Im,Re]] embedding of a SparseHerm
std::vector<SdpProblem::RTrip> embed_triplets(const SparseHerm& s, double sign) {
  std::vector<SdpProblem::RTrip> out;
  const int n = s.dim;
  for (const auto& [i, j, v] : s.entries) {
    const double a = sign * v.real();
    const double b = sign * v.imag();
    if (i == j) {
      if (a != 0.0) {
        out.push_back({i, i, a});
        out.push_back({n + i, n + i, a});
      }
    } else {
      if (a != 0.0) {
        out.push_back({i, j, a});
        out.push_back({n + i, n + j, a});
      }
      if (b != 0.0) {
        out.push_back({i, n + j, -b});
        out.push_back({j, n + i, b});
      }
    }
  }
  return out;
}

// compose index maps: (g after h)[i] = g[h[i]]
std::vector<int> compose_maps(const std::vector<int>& g, const std::vector<int>& h) {
  std::vector<int> out(h.size());
  for (size_t i = 0; i < h.size(); ++i) out[i] = g[h[i]];
  return out;
}

}  // namespace

int SdpProblem::add_scalar(const std::string& name, bool nonneg) {
  Var v;
  v.name = name;
  v.kind = nonneg ? VarKind::ScalarNonneg : VarKind::ScalarFree;
  v.offset = nx_;
  v.ncoords = 1;
  vars_.push_back(v);
  nx_ += 1;
  const int id = static_cast<int>(vars_.size()) - 1;
  if (nonneg) {
    LpRow row;
    row.g[v.offset] = -1.0;
    row.h = 0.0;
    lp_.push_back(std::move(row));
  }
  return id;
}

int SdpProblem::add_hermitian(const std::string& name, int dim, bool psd,
                              const std::vector<std::vector<int>>& symmetry_index_perms) {
  if (dim < 1) throw std::invalid_argument("add_hermitian: dim must be >= 1");
  Var v;
  v.name = name;
  v.kind = psd ? VarKind::HermitianPsd : VarKind::HermitianFree;
  v.dim = dim;
  v.offset = nx_;

  // close the symmetry group over index maps
  std::vector<std::vector<int>> group;
  {
    std::vector<int> id(dim);
    for (int i = 0; i < dim; ++i) id[i] = i;
    std::set<std::vector<int>> seen{id};
    std::vector<std::vector<int>> frontier{id};
    while (!frontier.empty()) {
      std::vector<std::vector<int>> next;
      for (const auto& p : frontier)
        for (const auto& g : symmetry_index_perms) {
          if (static_cast<int>(g.size()) != dim)
            throw std::invalid_argument("add_hermitian: symmetry perm size mismatch");
          auto q = compose_maps(g, p);
          if (seen.insert(q).second) next.push_back(q);
        }
      frontier = std::move(next);
    }
    group.assign(seen.begin(), seen.end());
  }

  // orbit-average basis of the invariant subspace (trivial group: standard basis)
  auto pair_id = [dim](int i, int j) { return static_cast<long long>(i) * dim + j; };
  std::set<long long> visited;
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      if (visited.count(pair_id(i, j))) continue;
      // BFS over the signed orbit of the unordered pair (i, j)
      std::map<std::pair<int, int>, int> orbit;  // canonical pair -> im-sign
      bool im_alive = (i != j);
      std::vector<std::pair<std::pair<int, int>, int>> frontier{{{i, j}, +1}};
      orbit[{i, j}] = +1;
      while (!frontier.empty()) {
        std::vector<std::pair<std::pair<int, int>, int>> next;
        for (const auto& [pr, sgn] : frontier) {
          for (const auto& g : group) {
            int a = g[pr.first], b = g[pr.second];
            int s = sgn;
            if (a > b) {
              std::swap(a, b);
              s = -s;
            }
            auto it = orbit.find({a, b});
            if (it == orbit.end()) {
              orbit[{a, b}] = s;
              next.push_back({{a, b}, s});
            } else if (it->second != s) {
              im_alive = false;
            }
          }
        }
        frontier = std::move(next);
      }
      for (const auto& [pr, sgn] : orbit) visited.insert(pair_id(pr.first, pr.second));
      const double norm = 1.0 / std::sqrt(static_cast<double>(orbit.size()));
      // real part element
      {
        SparseHerm b;
        b.dim = dim;
        for (const auto& [pr, sgn] : orbit) {
          (void)sgn;
          const double val = (pr.first == pr.second) ? norm : norm * kInvSqrt2;
          b.entries.emplace_back(pr.first, pr.second, cd(val, 0.0));
        }
        v.basis.push_back(std::move(b));
      }
      // imaginary part element
      if (i != j && im_alive) {
        SparseHerm b;
        b.dim = dim;
        for (const auto& [pr, sgn] : orbit)
          b.entries.emplace_back(pr.first, pr.second, cd(0.0, sgn * norm * kInvSqrt2));
        v.basis.push_back(std::move(b));
      }
    }
  }

  v.ncoords = static_cast<int>(v.basis.size());
  nx_ += v.ncoords;
  vars_.push_back(v);
  const int id = static_cast<int>(vars_.size()) - 1;

  if (psd) {
    // membership block: X = sum x_t B_t  must be PSD
    AffineHerm e = affine(dim);
    add_term(e, id);
    add_psd(e);
  }
  return id;
}

const SdpProblem::Var& SdpProblem::checked_var(int v, bool hermitian) const {
  if (v < 0 || v >= static_cast<int>(vars_.size()))
    throw std::invalid_argument("SdpProblem: bad variable id");
  const Var& var = vars_[v];
  const bool is_herm =
      var.kind == VarKind::HermitianPsd || var.kind == VarKind::HermitianFree;
  if (hermitian != is_herm)
    throw std::invalid_argument("SdpProblem: variable kind mismatch for " + var.name);
  return var;
}

AffineHerm SdpProblem::affine(int dim) const {
  AffineHerm e;
  e.dim = dim;
  e.constant = SparseHerm::zero(dim);
  return e;
}

void SdpProblem::add_const(AffineHerm& e, const SparseHerm& c) const {
  if (c.dim != e.dim) throw std::invalid_argument("AffineHerm: const dim mismatch");
  e.constant.add_scaled(c, 1.0);
}

void SdpProblem::add_scalar_term(AffineHerm& e, int scalar_var,
                                 const SparseHerm& coeff) const {
  const Var& v = checked_var(scalar_var, false);
  if (coeff.dim != e.dim) throw std::invalid_argument("AffineHerm: coeff dim mismatch");
  e.coeffs[v.offset].dim = e.dim;
  e.coeffs[v.offset].add_scaled(coeff, 1.0);
}

void SdpProblem::add_term(AffineHerm& e, int herm_var, double scale) const {
  const Var& v = checked_var(herm_var, true);
  if (v.dim != e.dim) throw std::invalid_argument("AffineHerm: var dim mismatch");
  for (int t = 0; t < v.ncoords; ++t) {
    e.coeffs[v.offset + t].dim = e.dim;
    e.coeffs[v.offset + t].add_scaled(v.basis[t], scale);
  }
}

void SdpProblem::add_mapped(AffineHerm& e, int herm_var,
                            const std::function<SparseHerm(const SparseHerm&)>& map) const {
  const Var& v = checked_var(herm_var, true);
  for (int t = 0; t < v.ncoords; ++t) {
    SparseHerm c = map(v.basis[t]);
    if (c.entries.empty()) continue;
    if (c.dim != e.dim) throw std::invalid_argument("AffineHerm: mapped dim mismatch");
    e.coeffs[v.offset + t].dim = e.dim;
    e.coeffs[v.offset + t].add_scaled(c, 1.0);
  }
}

void SdpProblem::add_psd(const AffineHerm& e) {
  Block b;
  b.edim = 2 * e.dim;
  b.h = embed_triplets(e.constant, 1.0);
  for (const auto& [idx, coeff] : e.coeffs) {
    auto trips = embed_triplets(coeff, -1.0);  // G columns carry -coeff
    if (!trips.empty()) b.g[idx] = std::move(trips);
  }
  blocks_.push_back(std::move(b));
}

void SdpProblem::add_eq_zero(const AffineHerm& e) {
  std::set<std::pair<int, int>> positions;
  for (const auto& [i, j, v] : e.constant.entries) positions.insert({i, j});
  for (const auto& [idx, coeff] : e.coeffs)
    for (const auto& [i, j, v] : coeff.entries) positions.insert({i, j});
  for (const auto& [i, j] : positions) {
    for (int part = 0; part < (i == j ? 1 : 2); ++part) {
      std::map<int, double> row;
      for (const auto& [idx, coeff] : e.coeffs) {
        cd v = 0.0;
        for (const auto& [a, b, val] : coeff.entries)
          if (a == i && b == j) v += val;
        const double c = part == 0 ? v.real() : v.imag();
        if (std::abs(c) > kDropTol) row[idx] = c;
      }
      cd cv = 0.0;
      for (const auto& [a, b, val] : e.constant.entries)
        if (a == i && b == j) cv += val;
      const double rhs = -(part == 0 ? cv.real() : cv.imag());
      if (row.empty()) {
        if (std::abs(rhs) > 1e-12)
          throw std::invalid_argument("add_eq_zero: inconsistent constant row");
        continue;
      }
      arows_.push_back(std::move(row));
      brhs_.push_back(rhs);
    }
  }
}

void SdpProblem::lin_add_scalar(LinExpr& e, int scalar_var, double c) const {
  const Var& v = checked_var(scalar_var, false);
  e.coeffs[v.offset] += c;
}

void SdpProblem::lin_add_trace(LinExpr& e, int herm_var, double scale) const {
  const Var& v = checked_var(herm_var, true);
  for (int t = 0; t < v.ncoords; ++t) {
    const double c = v.basis[t].trace() * scale;
    if (std::abs(c) > kDropTol) e.coeffs[v.offset + t] += c;
  }
}

void SdpProblem::lin_add_trace_against(LinExpr& e, int herm_var, const Mat& c) const {
  const Var& v = checked_var(herm_var, true);
  if (c.rows() != v.dim) throw std::invalid_argument("lin_add_trace_against: dim mismatch");
  for (int t = 0; t < v.ncoords; ++t) {
    const double w = v.basis[t].trace_against(c);
    if (std::abs(w) > kDropTol) e.coeffs[v.offset + t] += w;
  }
}

void SdpProblem::add_eq(const LinExpr& e, double rhs) {
  arows_.push_back(e.coeffs);
  brhs_.push_back(rhs - e.constant);
}

void SdpProblem::add_ge(const LinExpr& e, double rhs) {
  LpRow row;
  for (const auto& [idx, c] : e.coeffs) row.g[idx] = -c;
  row.h = e.constant - rhs;
  lp_.push_back(std::move(row));
}

void SdpProblem::set_objective(Sense sense, const LinExpr& e) {
  obj_ = e.coeffs;
  obj_const_ = e.constant;
  maximize_ = (sense == Sense::Maximize);
}

Mat SdpProblem::herm_value(int var, const Eigen::VectorXd& x) const {
  const Var& v = checked_var(var, true);
  Mat out = Mat::Zero(v.dim, v.dim);
  for (int t = 0; t < v.ncoords; ++t) {
    const double w = x(v.offset + t);
    for (const auto& [i, j, val] : v.basis[t].entries) {
      out(i, j) += w * val;
      if (i != j) out(j, i) += w * std::conj(val);
    }
  }
  return out;
}

double SdpProblem::scalar_value(int var, const Eigen::VectorXd& x) const {
  const Var& v = checked_var(var, false);
  return x(v.offset);
}

int SdpProblem::psd_guard_dim() const {
  int total = 0;
  for (const auto& b : blocks_) total += b.edim / 2;
  return total;
}

void SdpProblem::dump(std::ostream& os) const {
  os << "KEXT-SDP 1\n";
  os << "nx " << nx_ << " maximize " << (maximize_ ? 1 : 0) << "\n";
  os << "objective " << obj_.size() << " const " << obj_const_ << "\n";
  for (const auto& [i, c] : obj_) os << i << " " << c << "\n";
  os << "lp " << lp_.size() << "\n";
  for (const auto& r : lp_) {
    os << "h " << r.h << " nnz " << r.g.size();
    for (const auto& [i, c] : r.g) os << " " << i << " " << c;
    os << "\n";
  }
  os << "blocks " << blocks_.size() << "\n";
  for (const auto& b : blocks_) {
    os << "block edim " << b.edim << " hnnz " << b.h.size() << "\n";
    for (const auto& t : b.h) os << t.r << " " << t.c << " " << t.v << "\n";
    os << "cols " << b.g.size() << "\n";
    for (const auto& [i, trips] : b.g) {
      os << "col " << i << " nnz " << trips.size() << "\n";
      for (const auto& t : trips) os << t.r << " " << t.c << " " << t.v << "\n";
    }
  }
  os << "eq " << arows_.size() << "\n";
  for (size_t r = 0; r < arows_.size(); ++r) {
    os << "b " << brhs_[r] << " nnz " << arows_[r].size();
    for (const auto& [i, c] : arows_[r]) os << " " << i << " " << c;
    os << "\n";
  }
}

SolveOptions SolveOptions::defaults() {
  SolveOptions o;
  if (const char* env = std::getenv("KEXT_SOLVER_TOL")) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end != env && v > 0 && v < 1) o.tol = v;
  }
  return o;
}

FeasibilityReport check_primal_feasibility(const SdpProblem& p, const Eigen::VectorXd& x) {
  FeasibilityReport rep;
  rep.min_psd_eig = 0.0;
  for (const auto& b : p.blocks()) {
    RMat s = RMat::Zero(b.edim, b.edim);
    auto scatter = [&](const std::vector<SdpProblem::RTrip>& trips, double w) {
      for (const auto& t : trips) {
        s(t.r, t.c) += w * t.v;
        if (t.r != t.c) s(t.c, t.r) += w * t.v;
      }
    };
    scatter(b.h, 1.0);
    for (const auto& [idx, trips] : b.g) scatter(trips, -x(idx));  // s = h - Gx
    Eigen::SelfAdjointEigenSolver<RMat> es(s, Eigen::EigenvaluesOnly);
    rep.min_psd_eig = std::min(rep.min_psd_eig, es.eigenvalues().minCoeff());
  }
  for (const auto& r : p.lp_rows()) {
    double s = r.h;
    for (const auto& [idx, c] : r.g) s -= c * x(idx);
    rep.max_lp_violation = std::max(rep.max_lp_violation, std::max(0.0, -s));
  }
  const auto& rows = p.eq_rows();
  for (size_t i = 0; i < rows.size(); ++i) {
    double v = -p.eq_rhs()[i];
    for (const auto& [idx, c] : rows[i]) v += c * x(idx);
    rep.max_eq_violation = std::max(rep.max_eq_violation, std::abs(v));
  }
  return rep;
}

}  // namespace kext::conic
