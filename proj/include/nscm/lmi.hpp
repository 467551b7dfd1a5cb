#pragma once

#include <string>
#include <vector>

#include <nscm/common.hpp>

namespace nscm {

// Layout of the flat decision vector used by the metric-sampling programs:
//
//   [ nu, nu_c, chi | entries of Wbar_0 .. Wbar_{N-1} | aux ]
//
// Each Wbar_i is a symmetric n x n matrix stored as its n(n+1)/2 lower
// triangle entries in column-major order. The trailing auxiliary scalar is
// present only when with_aux is set; it completes the nu^3 <= nu_c cone
// encoding (see nu_cubed_cone_blocks).
struct DecisionLayout {
  int n = 0;
  int num_samples = 0;
  bool with_aux = false;

  static constexpr int nu = 0;
  static constexpr int nu_c = 1;
  static constexpr int chi = 2;

  int sym_dim() const { return n * (n + 1) / 2; }
  int wbar_offset(int sample) const;
  int aux_index() const;
  int size() const { return 3 + num_samples * sym_dim() + (with_aux ? 1 : 0); }
};

// Packing between a symmetric matrix and its lower-triangle entry vector.
Vector sym_to_vec(const Matrix& S);
Matrix vec_to_sym(const Vector& v, int n);
// Basis matrix dS/dv_k of the packing above: unit diagonal entry for
// diagonal slots, symmetric pair of unit entries for off-diagonal slots.
Matrix sym_basis(int n, int k);

struct LmiTerm {
  int index;
  Matrix coeff;
};

// Affine symmetric-matrix expression
//   Block(y) = constant + sum_j y[terms[j].index] * terms[j].coeff
// constrained to be negative semidefinite. sample_index >= 0 marks a block
// whose matrix terms touch only that sample's Wbar entries, -1 a block on
// coupling scalars only, -2 a block tying several samples together (which
// disables sample-wise elimination in the solver).
struct LmiBlock {
  Matrix constant;
  std::vector<LmiTerm> terms;
  int sample_index = -1;
  std::string label;
};

struct LmiProblem {
  DecisionLayout layout;
  std::vector<LmiBlock> blocks;
  Vector objective;
};

Matrix eval_block(const LmiBlock& block, const Vector& y);
// Largest eigenvalue of the evaluated block; <= 0 means the constraint holds.
double block_margin(const LmiBlock& block, const Vector& y);

enum class WdotMode { Zero, BackwardDifference, SufficientBound };

struct WdotSpec {
  WdotMode mode = WdotMode::Zero;
  double dt = 0.0;
  // Backward differencing is only meaningful when consecutive samples are
  // consecutive points of one trajectory.
  bool trajectory_ordered = false;
};

// Which constraint family consumes the metric derivative: the control and
// basic families subtract it, the estimation family adds it. The sufficient
// bound replaces the unknown predecessor with the worst bound-feasible value
// (chi*I for control, I for estimation), so the mode's contribution depends
// on the consumer.
enum class LmiSense { Control, Estimation };

// Affine expression standing in for d(Wbar_i)/dt.
struct WdotContribution {
  Matrix constant;
  std::vector<LmiTerm> terms;
  bool multi_sample = false;
};

WdotContribution wdot_term(const WdotSpec& spec, const DecisionLayout& layout,
                           int sample_index, LmiSense sense);

// Contraction constraint of the feedback-control family for one sampled
// (A, B). Emits the bordered 2n x 2n block
//   [ -dWbar/dt + 2 sym(A Wbar) - 2 nu B B^T + 2 alpha Wbar ,  Wbar        ]
//   [            Wbar                                       , -(nu/alpha_gc) I ]
// (the border is dropped when alpha_gc = 0) plus the bound blocks
// I - Wbar <= 0 and Wbar - chi I <= 0.
std::vector<LmiBlock> build_control_blocks(const DecisionLayout& layout,
                                           const Matrix& A, const Matrix& B,
                                           double alpha, double alpha_gc,
                                           const WdotSpec& wdot,
                                           int sample_index);

// Contraction constraint of the estimation family for one sampled (A, C, C_L):
//   dWbar/dt + 2 sym(Wbar A - nu C_L^T C) + nu alpha_e1 I + nu_c alpha_e2 I
//     + 2 alpha Wbar <= 0
// plus the bound blocks. The companion scalar constraint nu^3 <= nu_c is
// emitted separately by nu_cubed_cone_blocks.
std::vector<LmiBlock> build_estimation_blocks(const DecisionLayout& layout,
                                              const Matrix& A, const Matrix& C,
                                              const Matrix& C_L, double alpha,
                                              double alpha_e1, double alpha_e2,
                                              const WdotSpec& wdot,
                                              int sample_index);

// Plain contraction constraint for one sampled Jacobian f_x; identical to the
// control family with B = 0 and a time-invariant metric.
std::vector<LmiBlock> build_basic_contraction_blocks(const DecisionLayout& layout,
                                                     const Matrix& f_x,
                                                     double alpha, double alpha_g,
                                                     int sample_index);

// 1x1 blocks encoding nu >= 0 (and nu_c >= 0 when requested).
std::vector<LmiBlock> scalar_positivity_blocks(const DecisionLayout& layout,
                                               bool include_nu_c);

// Exact semidefinite encoding of nu^3 <= nu_c through the auxiliary scalar s:
//   [ s  nu ]            [ nu_c  s  ]
//   [ nu  1 ] >= 0  and  [  s   nu ] >= 0
// The first forces s >= nu^2, the second nu_c * nu >= s^2, hence
// nu_c >= nu^3; conversely s = nu^2 witnesses any admissible (nu, nu_c).
std::vector<LmiBlock> nu_cubed_cone_blocks(const DecisionLayout& layout);

// Sparse text serialization for debugging and cross-solver checks. The format
// is line based:
//   nscm-lmi 1
//   layout <n> <num_samples> <with_aux>
//   objective <nnz> then one "o <index> <value>" line per entry
//   blocks <count>
//   block <dim> <sample_index> <label> <const_nnz> <num_terms>
//     c <row> <col> <value>        lower-triangle triplets of the constant
//     t <index> <nnz>              one per term, followed by its triplets
//     e <row> <col> <value>
// Values are written with 17 significant digits and round-trip exactly.
void write_problem(const LmiProblem& problem, const std::string& path);
LmiProblem read_problem(const std::string& path);

}  // namespace nscm
