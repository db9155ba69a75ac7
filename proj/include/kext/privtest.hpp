#pragma once

#include "kext/conic.hpp"
#include "kext/qmat.hpp"

#include <random>
#include <vector>

// Private states, twisting unitaries and privacy tests, plus the SDP that
// maximizes the privacy-test pass probability over k-extendible states.
// All operators live on the four registers (A, B, A', B') in that order;
// A and B are the key registers of dimension d, A'B' is the shield.

namespace kext::privtest {

enum class ControlSide { A, B };

struct TwistSpec {
  int d = 2;
  int shield_a = 1;  // |A'|
  int shield_b = 1;  // |B'|
  std::vector<Mat> controls;
  ControlSide side = ControlSide::A;

  TwistSpec(int d, int shield_a, int shield_b, std::vector<Mat> controls,
            ControlSide side = ControlSide::A);
  int shield_dim() const { return shield_a * shield_b; }
  int total_dim() const { return d * d * shield_a * shield_b; }
};

TwistSpec identity_twist(int d, int shield_a = 1, int shield_b = 1,
                         ControlSide side = ControlSide::A);
TwistSpec random_twist(int d, int shield_a, int shield_b, std::mt19937_64& rng,
                       ControlSide side = ControlSide::A);

// V = sum_i |i><i|_(control) (x) I (x) U^i_(A'B')
Mat twisting_unitary(const TwistSpec& spec);

// gamma^d = V (Phi^d_(AB) (x) tau_(A'B')) V^dagger
DensityMatrix private_state(const TwistSpec& spec, const DensityMatrix& tau);

struct PrivacyTest {
  Mat projector;  // on (A, B, A', B')
  int d = 2;
  int shield_a = 1;
  int shield_b = 1;
  ControlSide side = ControlSide::A;
};

// Pi = V (Phi^d (x) I_(A'B')) V^dagger, a projector of rank |A'||B'|
PrivacyTest privacy_test(const TwistSpec& spec);

double pass_probability(const PrivacyTest& test, const DensityMatrix& omega);

struct PrivacyMaxResult {
  double value = 0.0;
  double ceiling = 0.0;  // 1/d + 1/k - 1/(dk)
  conic::SdpSolution sol;
};

// SDP optimum of max tr[Pi sigma] over sigma in Ext_k(AA':BB'), solved over
// an extension variable on AA' (BB')^k with trace and generator-permutation
// invariance constraints. Guard: |AA'| |BB'|^k <= 4096.
PrivacyMaxResult max_pass_probability_ext(
    const PrivacyTest& test, int k,
    const conic::SolveOptions& opts = conic::SolveOptions::defaults());

double pass_ceiling(int d, int k);

}  // namespace kext::privtest
