#include "kext/qmat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace kext {

namespace {

long long dims_product(const std::vector<int>& dims) {
  long long p = 1;
  for (int d : dims) {
    if (d < 1) throw std::invalid_argument("subsystem dimension must be >= 1");
    p *= d;
  }
  return p;
}

void check_square(const Mat& m, const char* who) {
  if (m.rows() != m.cols())
    throw std::invalid_argument(std::string(who) + ": matrix not square");
}

double hermiticity_defect(const Mat& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace

Permutation::Permutation(std::vector<int> m) : map(std::move(m)) {
  std::vector<char> seen(map.size(), 0);
  for (int v : map) {
    if (v < 0 || v >= static_cast<int>(map.size()) || seen[v])
      throw std::invalid_argument("Permutation: mapping is not a bijection");
    seen[v] = 1;
  }
}

Permutation Permutation::identity(int n) {
  std::vector<int> m(n);
  std::iota(m.begin(), m.end(), 0);
  return Permutation(m);
}

Permutation Permutation::inverse() const {
  std::vector<int> m(map.size());
  for (int i = 0; i < size(); ++i) m[map[i]] = i;
  return Permutation(m);
}

Permutation Permutation::after(const Permutation& other) const {
  if (size() != other.size())
    throw std::invalid_argument("Permutation: size mismatch");
  std::vector<int> m(map.size());
  for (int i = 0; i < size(); ++i) m[i] = map[other.map[i]];
  return Permutation(m);
}

HermitianMatrix::HermitianMatrix(Mat m, double tol) : m_(std::move(m)) {
  check_square(m_, "HermitianMatrix");
  if (hermiticity_defect(m_) > tol)
    throw std::invalid_argument("HermitianMatrix: not Hermitian within tolerance");
}

DensityMatrix::DensityMatrix(Mat m, std::vector<int> dims)
    : m_(std::move(m)), dims_(std::move(dims)) {
  check_square(m_, "DensityMatrix");
  if (dims_product(dims_) != m_.rows())
    throw std::invalid_argument("DensityMatrix: dims do not match matrix size");
  if (hermiticity_defect(m_) > 1e-10)
    throw std::invalid_argument("DensityMatrix: not Hermitian");
  if (std::abs(m_.trace().real() - 1.0) > 1e-10 || std::abs(m_.trace().imag()) > 1e-10)
    throw std::invalid_argument("DensityMatrix: trace != 1");
  if (min_eigenvalue(m_) < -1e-10)
    throw std::invalid_argument("DensityMatrix: not positive semidefinite");
}

ChoiOperator::ChoiOperator(Mat m, int dim_in, int dim_out)
    : m_(std::move(m)), din_(dim_in), dout_(dim_out) {
  check_square(m_, "ChoiOperator");
  if (static_cast<long long>(din_) * dout_ != m_.rows())
    throw std::invalid_argument("ChoiOperator: dims do not match matrix size");
  if (hermiticity_defect(m_) > 1e-10)
    throw std::invalid_argument("ChoiOperator: not Hermitian");
  if (min_eigenvalue(m_) < -1e-10)
    throw std::invalid_argument("ChoiOperator: not positive semidefinite");
  if (std::abs(m_.trace().real() - din_) > 1e-9)
    throw std::invalid_argument("ChoiOperator: trace != dim_in");
  Mat marg = partial_trace(m_, {din_, dout_}, {0});
  if ((marg - identity(din_)).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("ChoiOperator: channel is not trace-preserving");
}

Mat identity(int n) { return Mat::Identity(n, n); }

Mat tensor(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

HermitianMatrix tensor(const HermitianMatrix& a, const HermitianMatrix& b) {
  return HermitianMatrix(tensor(a.mat(), b.mat()));
}

Mat partial_trace(const Mat& m, const std::vector<int>& dims,
                  const std::vector<int>& keep) {
  check_square(m, "partial_trace");
  if (dims_product(dims) != m.rows())
    throw std::invalid_argument("partial_trace: dims do not match matrix size");
  if (keep.empty()) throw std::invalid_argument("partial_trace: keep set empty");
  std::vector<int> k = keep;
  std::sort(k.begin(), k.end());
  for (int s : k)
    if (s < 0 || s >= static_cast<int>(dims.size()))
      throw std::invalid_argument("partial_trace: keep index out of range");

  const int n = static_cast<int>(dims.size());
  std::vector<long long> stride(n);
  long long acc = 1;
  for (int i = n - 1; i >= 0; --i) {
    stride[i] = acc;
    acc *= dims[i];
  }
  long long dk = 1;
  for (int s : k) dk *= dims[s];
  std::vector<int> drop;
  for (int i = 0; i < n; ++i)
    if (!std::binary_search(k.begin(), k.end(), i)) drop.push_back(i);
  long long dd = 1;
  for (int s : drop) dd *= dims[s];

  // base offsets of kept / dropped multi-indices in the full index
  std::vector<long long> koff(dk), doff(dd);
  for (long long a = 0; a < dk; ++a) {
    long long rest = a, off = 0;
    for (int t = static_cast<int>(k.size()) - 1; t >= 0; --t) {
      off += (rest % dims[k[t]]) * stride[k[t]];
      rest /= dims[k[t]];
    }
    koff[a] = off;
  }
  for (long long a = 0; a < dd; ++a) {
    long long rest = a, off = 0;
    for (int t = static_cast<int>(drop.size()) - 1; t >= 0; --t) {
      off += (rest % dims[drop[t]]) * stride[drop[t]];
      rest /= dims[drop[t]];
    }
    doff[a] = off;
  }

  Mat out = Mat::Zero(dk, dk);
  for (long long r = 0; r < dk; ++r)
    for (long long c = 0; c < dk; ++c) {
      cd s = 0;
      for (long long a = 0; a < dd; ++a) s += m(koff[r] + doff[a], koff[c] + doff[a]);
      out(r, c) = s;
    }
  return out;
}

DensityMatrix max_entangled(int d) {
  if (d < 2) throw std::invalid_argument("max_entangled: d must be >= 2");
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<long long>(d) * d);
  for (int i = 0; i < d; ++i) v(static_cast<long long>(i) * d + i) = 1.0 / std::sqrt(double(d));
  Mat m = v * v.adjoint();
  return DensityMatrix(m, {d, d});
}

DensityMatrix isotropic(double F, int d) {
  if (F < 0.0 || F > 1.0) throw std::invalid_argument("isotropic: F out of [0,1]");
  if (d < 2) throw std::invalid_argument("isotropic: d must be >= 2");
  Mat phi = max_entangled(d).mat();
  Mat m = F * phi + (1.0 - F) * (identity(d * d) - phi) / double(d * d - 1);
  return DensityMatrix(m, {d, d});
}

ChoiOperator erasure_choi(double p, int d) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("erasure_choi: p out of [0,1]");
  if (d < 2) throw std::invalid_argument("erasure_choi: d must be >= 2");
  const int db = d + 1;
  Mat g = Mat::Zero(static_cast<long long>(d) * db, static_cast<long long>(d) * db);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      g(static_cast<long long>(i) * db + i, static_cast<long long>(j) * db + j) += (1.0 - p);
  for (int i = 0; i < d; ++i)
    g(static_cast<long long>(i) * db + d, static_cast<long long>(i) * db + d) += p;
  return ChoiOperator(g, d, db);
}

Mat permutation_unitary(const Permutation& perm, int d) {
  const int k = perm.size();
  if (k < 1) throw std::invalid_argument("permutation_unitary: empty permutation");
  std::vector<int> idx = factor_perm_indices(1, d, k, perm);
  Mat w = Mat::Zero(idx.size(), idx.size());
  for (size_t i = 0; i < idx.size(); ++i) w(idx[i], i) = 1.0;
  return w;
}

double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim())
    throw std::invalid_argument("fidelity: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (sigma.mat() + sigma.mat().adjoint()));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  Mat sq = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
           es.eigenvectors().adjoint();
  Mat m = sq * rho.mat() * sq;
  Eigen::SelfAdjointEigenSolver<Mat> es2(0.5 * (m + m.adjoint()));
  double s = es2.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return s * s;
}

std::vector<Permutation> sym_group_generators(int k) {
  if (k < 2) throw std::invalid_argument("sym_group_generators: k must be >= 2");
  std::vector<int> swap01(k);
  std::iota(swap01.begin(), swap01.end(), 0);
  std::swap(swap01[0], swap01[1]);
  std::vector<Permutation> gens{Permutation(swap01)};
  if (k > 2) {
    std::vector<int> cyc(k);
    for (int i = 0; i < k; ++i) cyc[i] = (i + 1) % k;
    gens.push_back(Permutation(cyc));
  }
  return gens;
}

std::vector<Permutation> generate_group(const std::vector<Permutation>& gens) {
  if (gens.empty()) throw std::invalid_argument("generate_group: no generators");
  const int n = gens.front().size();
  std::set<Permutation> seen;
  std::vector<Permutation> frontier{Permutation::identity(n)};
  seen.insert(frontier.front());
  while (!frontier.empty()) {
    std::vector<Permutation> next;
    for (const Permutation& p : frontier)
      for (const Permutation& g : gens) {
        Permutation q = g.after(p);
        if (seen.insert(q).second) next.push_back(q);
      }
    frontier = std::move(next);
  }
  return {seen.begin(), seen.end()};
}

std::vector<int> factor_perm_indices(int front_dim, int block_dim, int k,
                                     const Permutation& perm) {
  if (perm.size() != k) throw std::invalid_argument("factor_perm_indices: size mismatch");
  Permutation inv = perm.inverse();
  long long bk = 1;
  for (int i = 0; i < k; ++i) bk *= block_dim;
  const long long total = front_dim * bk;
  std::vector<int> out(total);
  std::vector<int> digits(k), nd(k);
  for (long long idx = 0; idx < total; ++idx) {
    long long rest = idx;
    for (int t = k - 1; t >= 0; --t) {
      digits[t] = static_cast<int>(rest % block_dim);
      rest /= block_dim;
    }
    const long long a = rest;
    for (int j = 0; j < k; ++j) nd[j] = digits[inv.map[j]];
    long long nidx = a;
    for (int j = 0; j < k; ++j) nidx = nidx * block_dim + nd[j];
    out[idx] = static_cast<int>(nidx);
  }
  return out;
}

std::vector<int> system_perm_indices(const std::vector<int>& dims,
                                     const std::vector<int>& new_order) {
  const int n = static_cast<int>(dims.size());
  if (static_cast<int>(new_order.size()) != n)
    throw std::invalid_argument("system_perm_indices: order size mismatch");
  Permutation check{std::vector<int>(new_order)};  // validates bijection
  const long long total = dims_product(dims);
  std::vector<long long> newstride(n);  // stride of old factor o in the new index
  {
    long long acc = 1;
    std::vector<long long> slotstride(n);
    for (int j = n - 1; j >= 0; --j) {
      slotstride[j] = acc;
      acc *= dims[new_order[j]];
    }
    for (int j = 0; j < n; ++j) newstride[new_order[j]] = slotstride[j];
  }
  std::vector<int> out(total);
  for (long long idx = 0; idx < total; ++idx) {
    long long rest = idx, nidx = 0;
    for (int t = n - 1; t >= 0; --t) {
      nidx += (rest % dims[t]) * newstride[t];
      rest /= dims[t];
    }
    out[idx] = static_cast<int>(nidx);
  }
  return out;
}

Mat reorder_systems(const Mat& m, const std::vector<int>& dims,
                    const std::vector<int>& new_order) {
  std::vector<int> p = system_perm_indices(dims, new_order);
  Mat out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(p[i], p[j]) = m(i, j);
  return out;
}

double min_eigenvalue(const Mat& herm) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (herm + herm.adjoint()),
                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double trace_inner(const Mat& a, const Mat& b) {
  return (a.array() * b.array().conjugate()).sum().real();
}

Mat random_unitary(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat z(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) z(i, j) = cd(g(rng), g(rng)) / std::sqrt(2.0);
  Eigen::HouseholderQR<Mat> qr(z);
  Mat q = qr.householderQ();
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i) {
    cd d = r(i, i);
    q.col(i) *= (std::abs(d) > 0 ? d / std::abs(d) : cd(1, 0));
  }
  return q;
}

Mat random_hermitian(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat z(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) z(i, j) = cd(g(rng), g(rng));
  return 0.5 * (z + z.adjoint());
}

DensityMatrix random_density(int n, std::mt19937_64& rng, std::vector<int> dims) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat z(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) z(i, j) = cd(g(rng), g(rng));
  Mat rho = z * z.adjoint();
  rho /= rho.trace().real();
  if (dims.empty()) dims = {n};
  return DensityMatrix(rho, dims);
}

}  // namespace kext
