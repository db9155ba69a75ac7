#pragma once

#include <Eigen/Dense>

#include <complex>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

// Dense complex linear algebra and quantum-information constructors shared
// by the rest of the library.
//
// Indexing convention, fixed repo-wide: a composite system with dimension
// list (d_1, ..., d_m) is indexed as i = ((i_1*d_2 + i_2)*d_3 + i_3)...,
// i.e. the last listed subsystem varies fastest. Kronecker products follow
// the same convention: tensor(a, b) places a on the slow index.

namespace kext {

using cd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

// k-extendibility parameter: a finite k >= 2 or the separable limit k = inf.
class KParam {
 public:
  static KParam finite(long k) {
    if (k < 2) throw std::invalid_argument("KParam: k must be >= 2");
    return KParam(k, false);
  }
  static KParam inf() { return KParam(0, true); }
  bool is_inf() const { return inf_; }
  long value() const {
    if (inf_) throw std::logic_error("KParam: value() on infinite k");
    return k_;
  }
  std::string str() const { return inf_ ? "inf" : std::to_string(k_); }
  bool operator==(const KParam& o) const { return inf_ == o.inf_ && k_ == o.k_; }

 private:
  KParam(long k, bool inf) : k_(k), inf_(inf) {}
  long k_;
  bool inf_;
};

// Permutation of {0, ..., n-1}; map[i] is the image of i.
struct Permutation {
  std::vector<int> map;

  Permutation() = default;
  explicit Permutation(std::vector<int> m);
  static Permutation identity(int n);
  int size() const { return static_cast<int>(map.size()); }
  Permutation inverse() const;
  // composition (this o other): apply other first.
  Permutation after(const Permutation& other) const;
  bool operator==(const Permutation& o) const { return map == o.map; }
  bool operator<(const Permutation& o) const { return map < o.map; }
};

class HermitianMatrix {
 public:
  explicit HermitianMatrix(Mat m, double tol = 1e-12);
  const Mat& mat() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }

 private:
  Mat m_;
};

class DensityMatrix {
 public:
  DensityMatrix(Mat m, std::vector<int> dims);
  const Mat& mat() const { return m_; }
  const std::vector<int>& dims() const { return dims_; }
  int dim() const { return static_cast<int>(m_.rows()); }

 private:
  Mat m_;
  std::vector<int> dims_;
};

// Choi operator Gamma^N = N(d Phi^d), stored on (input copy, output) with
// the input copy on the slow index. Tr Gamma = dim_in, Tr_out Gamma = I.
class ChoiOperator {
 public:
  ChoiOperator(Mat m, int dim_in, int dim_out);
  const Mat& mat() const { return m_; }
  int dim_in() const { return din_; }
  int dim_out() const { return dout_; }

 private:
  Mat m_;
  int din_, dout_;
};

Mat identity(int n);
Mat tensor(const Mat& a, const Mat& b);
HermitianMatrix tensor(const HermitianMatrix& a, const HermitianMatrix& b);

// Marginal on the kept subsystems (0-based indices, ascending output order).
Mat partial_trace(const Mat& m, const std::vector<int>& dims,
                  const std::vector<int>& keep);

DensityMatrix max_entangled(int d);
DensityMatrix isotropic(double F, int d);
ChoiOperator erasure_choi(double p, int d);

// Unitary on (C^d)^{tensor k} permuting the tensor factors:
// W |i_1 ... i_k> = |i_{pi^{-1}(1)} ... i_{pi^{-1}(k)}>, a group
// homomorphism under after().
Mat permutation_unitary(const Permutation& perm, int d);

double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma);

// {(0 1)} for k = 2, {(0 1), (0 1 ... k-1)} otherwise; invariance under
// these implies invariance under all of S_k.
std::vector<Permutation> sym_group_generators(int k);
std::vector<Permutation> generate_group(const std::vector<Permutation>& gens);

// Index map of the factor permutation acting on front x block^k:
// out[i] = j means basis vector i is sent to j by the permutation unitary.
std::vector<int> factor_perm_indices(int front_dim, int block_dim, int k,
                                     const Permutation& perm);

// Index map reordering tensor factors; new_order[j] = old position of the
// factor placed at slot j.
std::vector<int> system_perm_indices(const std::vector<int>& dims,
                                     const std::vector<int>& new_order);
Mat reorder_systems(const Mat& m, const std::vector<int>& dims,
                    const std::vector<int>& new_order);

double min_eigenvalue(const Mat& herm);
double trace_inner(const Mat& a, const Mat& b);  // Re tr[a b] for Hermitian a, b

// Haar-distributed unitary via QR of a complex Gaussian matrix with the
// R-diagonal phase fix.
Mat random_unitary(int n, std::mt19937_64& rng);
Mat random_hermitian(int n, std::mt19937_64& rng);
DensityMatrix random_density(int n, std::mt19937_64& rng,
                             std::vector<int> dims = {});

}  // namespace kext
