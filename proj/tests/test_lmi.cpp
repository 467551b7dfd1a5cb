#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cstdio>
#include <fstream>
#include <random>

#include "nscm/lmi.hpp"

using namespace nscm;

namespace {

double max_eig(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

Matrix random_spd(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> entry(-1.0, 1.0);
  std::uniform_real_distribution<double> eig(lo, hi);
  Matrix G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = entry(rng);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ();
  Vector lam(n);
  for (int i = 0; i < n; ++i) lam[i] = eig(rng);
  const Matrix S = Q * lam.asDiagonal() * Q.transpose();
  return 0.5 * (S + S.transpose());
}

Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double span) {
  std::uniform_real_distribution<double> entry(-span, span);
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = entry(rng);
  return M;
}

Vector random_point(std::mt19937_64& rng, int size) {
  std::uniform_real_distribution<double> entry(-2.0, 2.0);
  Vector y(size);
  for (int i = 0; i < size; ++i) y[i] = entry(rng);
  return y;
}

const LmiBlock* find_block(const std::vector<LmiBlock>& blocks,
                           const std::string& label) {
  for (const LmiBlock& b : blocks)
    if (b.label == label) return &b;
  return nullptr;
}

const Matrix* find_coeff(const LmiBlock& block, int index) {
  for (const LmiTerm& t : block.terms)
    if (t.index == index) return &t.coeff;
  return nullptr;
}

// Decision point holding one sample's Wbar plus the coupling scalars.
Vector make_point(const DecisionLayout& layout, double nu, double chi,
                  const Matrix& wbar, double nu_c = 0.0, double aux = 0.0) {
  Vector y = Vector::Zero(layout.size());
  y[DecisionLayout::nu] = nu;
  y[DecisionLayout::nu_c] = nu_c;
  y[DecisionLayout::chi] = chi;
  y.segment(layout.wbar_offset(0), layout.sym_dim()) = sym_to_vec(wbar);
  if (layout.with_aux) y[layout.aux_index()] = aux;
  return y;
}

}  // namespace

TEST_CASE("decision layout indexes are disjoint and complete") {
  DecisionLayout layout{2, 3, true};
  CHECK(layout.sym_dim() == 3);
  CHECK(layout.size() == 3 + 3 * 3 + 1);
  CHECK(layout.wbar_offset(0) == 3);
  CHECK(layout.wbar_offset(1) == 6);
  CHECK(layout.wbar_offset(2) == 9);
  CHECK(layout.aux_index() == 12);
  CHECK_THROWS_AS(layout.wbar_offset(3), Error);

  DecisionLayout no_aux{2, 3, false};
  CHECK(no_aux.size() == 12);
  CHECK_THROWS_AS(no_aux.aux_index(), Error);

  std::mt19937_64 rng(11);
  const Matrix S = random_spd(rng, 4, 0.5, 2.0);
  const Vector v = sym_to_vec(S);
  CHECK((vec_to_sym(v, 4) - S).cwiseAbs().maxCoeff() == 0.0);
  for (int k = 0; k < 10; ++k) {
    Vector e = Vector::Zero(10);
    e[k] = 1.0;
    CHECK((vec_to_sym(e, 4) - sym_basis(4, k)).cwiseAbs().maxCoeff() == 0.0);
  }
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 1) = 1.0;
  CHECK_THROWS_AS(sym_to_vec(bad), AssemblyError);
}

TEST_CASE("scalar control block expands to the expected coefficients") {
  DecisionLayout layout{1, 1, false};
  Matrix A(1, 1), B(1, 1);
  A << -1.0;
  B << 1.0;
  auto blocks = build_control_blocks(layout, A, B, 0.5, 0.0, WdotSpec{}, 0);
  REQUIRE(blocks.size() == 3);

  const LmiBlock* con = find_block(blocks, "control");
  REQUIRE(con != nullptr);
  CHECK(con->constant.rows() == 1);
  CHECK(con->constant(0, 0) == 0.0);
  CHECK(con->sample_index == 0);
  // 2 sym(A wbar) + 2 alpha wbar = (2A + 2 alpha) wbar = -wbar; -2 nu B B^T = -2 nu.
  const Matrix* cw = find_coeff(*con, layout.wbar_offset(0));
  const Matrix* cn = find_coeff(*con, DecisionLayout::nu);
  REQUIRE(cw != nullptr);
  REQUIRE(cn != nullptr);
  CHECK((*cw)(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK((*cn)(0, 0) == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK(find_coeff(*con, DecisionLayout::chi) == nullptr);

  Matrix wbar(1, 1);
  wbar << 1.0;
  const Vector y = make_point(layout, 1.0, 1.0, wbar);
  CHECK(eval_block(*con, y)(0, 0) == doctest::Approx(-3.0).epsilon(1e-15));
  CHECK(block_margin(*con, y) <= 0.0);

  // Bad shapes and rates are rejected.
  CHECK_THROWS_AS(
      build_control_blocks(layout, Matrix::Zero(2, 2), B, 0.5, 0.0, WdotSpec{}, 0),
      AssemblyError);
  CHECK_THROWS_AS(build_control_blocks(layout, A, B, -0.5, 0.0, WdotSpec{}, 0),
                  AssemblyError);
  CHECK_THROWS_AS(build_control_blocks(layout, A, B, 0.5, -1.0, WdotSpec{}, 0),
                  AssemblyError);
}

TEST_CASE("bordered control block matches its Schur complement") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  DecisionLayout layout{2, 1, false};
  int feasible = 0, infeasible = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix A = random_matrix(rng, 2, 2, 2.0);
    const Matrix B = random_matrix(rng, 2, 1, 1.5);
    const double alpha = 0.1 + 0.9 * unif(rng);
    const double alpha_gc = 0.05 + 0.95 * unif(rng);
    const double nu = 0.5 + 2.5 * unif(rng);
    const double chi = 1.0 + 4.0 * unif(rng);
    const Matrix wbar = random_spd(rng, 2, 0.5, 3.0);
    const Vector y = make_point(layout, nu, chi, wbar);

    auto blocks = build_control_blocks(layout, A, B, alpha, alpha_gc, WdotSpec{}, 0);
    const LmiBlock* con = find_block(blocks, "control");
    REQUIRE(con != nullptr);
    REQUIRE(con->constant.rows() == 4);

    // The assembled bordered matrix agrees with the direct formula.
    const Matrix tl = A * wbar + wbar * A.transpose() -
                      2.0 * nu * (B * B.transpose()) + 2.0 * alpha * wbar;
    Matrix direct = Matrix::Zero(4, 4);
    direct.topLeftCorner(2, 2) = tl;
    direct.topRightCorner(2, 2) = wbar;
    direct.bottomLeftCorner(2, 2) = wbar;
    direct.bottomRightCorner(2, 2) = -(nu / alpha_gc) * Matrix::Identity(2, 2);
    const Matrix assembled = eval_block(*con, y);
    CHECK((assembled - direct).cwiseAbs().maxCoeff() <
          1e-12 * (1.0 + direct.cwiseAbs().maxCoeff()));

    // Schur complement equivalence, skipping draws inside the margin band.
    const double block_eig = max_eig(assembled);
    const double schur_eig =
        max_eig(tl + (alpha_gc / nu) * (wbar * wbar));
    if (std::abs(block_eig) < 1e-9 || std::abs(schur_eig) < 1e-9) continue;
    CHECK((block_eig <= 0.0) == (schur_eig <= 0.0));
    (block_eig <= 0.0 ? feasible : infeasible) += 1;
  }
  CHECK(feasible > 10);
  CHECK(infeasible > 10);
}

TEST_CASE("identity bound block flags a violating candidate") {
  DecisionLayout layout{2, 1, false};
  auto blocks = build_control_blocks(layout, -Matrix::Identity(2, 2),
                                     Matrix::Identity(2, 2), 0.5, 0.0,
                                     WdotSpec{}, 0);
  const LmiBlock* lower = find_block(blocks, "wbar_lower");
  const LmiBlock* upper = find_block(blocks, "wbar_upper");
  REQUIRE(lower != nullptr);
  REQUIRE(upper != nullptr);
  CHECK(lower->sample_index == 0);

  const Vector y_bad = make_point(layout, 1.0, 2.0, 0.5 * Matrix::Identity(2, 2));
  CHECK(block_margin(*lower, y_bad) == doctest::Approx(0.5).epsilon(1e-12));
  const Vector y_ok = make_point(layout, 1.0, 2.0, 1.5 * Matrix::Identity(2, 2));
  CHECK(block_margin(*lower, y_ok) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(block_margin(*upper, y_ok) == doctest::Approx(-0.5).epsilon(1e-12));
  const Vector y_high = make_point(layout, 1.0, 2.0, 2.5 * Matrix::Identity(2, 2));
  CHECK(block_margin(*upper, y_high) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("scalar estimation block expands to the expected coefficients") {
  DecisionLayout layout{1, 1, true};
  Matrix A(1, 1), C(1, 1);
  A << -1.0;
  C << 1.0;
  auto blocks =
      build_estimation_blocks(layout, A, C, C, 0.4, 0.0, 0.0, WdotSpec{}, 0);
  REQUIRE(blocks.size() == 3);
  const LmiBlock* est = find_block(blocks, "estimation");
  REQUIRE(est != nullptr);

  // 2 sym(wbar A) + 2 alpha wbar = (-2 + 0.8) wbar; -2 nu C_L^T C = -2 nu.
  const Matrix* cw = find_coeff(*est, layout.wbar_offset(0));
  const Matrix* cn = find_coeff(*est, DecisionLayout::nu);
  REQUIRE(cw != nullptr);
  REQUIRE(cn != nullptr);
  CHECK((*cw)(0, 0) == doctest::Approx(-1.2).epsilon(1e-15));
  CHECK((*cn)(0, 0) == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK(find_coeff(*est, DecisionLayout::nu_c) == nullptr);

  Matrix wbar(1, 1);
  wbar << 1.0;
  const Vector y = make_point(layout, 1.0, 1.0, wbar, 1.0, 1.0);
  CHECK(eval_block(*est, y)(0, 0) == doctest::Approx(-3.2).epsilon(1e-15));
  CHECK(block_margin(*est, y) <= 0.0);

  // Noise rates appear as identity-scaled terms on nu and nu_c.
  auto noisy =
      build_estimation_blocks(layout, A, C, C, 0.4, 3.42e-3, 7.5e-4, WdotSpec{}, 0);
  const LmiBlock* nb = find_block(noisy, "estimation");
  REQUIRE(nb != nullptr);
  const Matrix* nn = find_coeff(*nb, DecisionLayout::nu);
  const Matrix* nc = find_coeff(*nb, DecisionLayout::nu_c);
  REQUIRE(nn != nullptr);
  REQUIRE(nc != nullptr);
  CHECK((*nn)(0, 0) == doctest::Approx(-2.0 + 3.42e-3).epsilon(1e-15));
  CHECK((*nc)(0, 0) == doctest::Approx(7.5e-4).epsilon(1e-15));
}

TEST_CASE("estimation block matches the direct formula on random draws") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  DecisionLayout layout{3, 2, true};
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix A = random_matrix(rng, 3, 3, 2.0);
    const Matrix C = random_matrix(rng, 2, 3, 1.5);
    const Matrix C_L = random_matrix(rng, 2, 3, 1.5);
    const double alpha = 0.1 + 0.9 * unif(rng);
    const double a1 = unif(rng), a2 = unif(rng);
    auto blocks =
        build_estimation_blocks(layout, A, C, C_L, alpha, a1, a2, WdotSpec{}, 1);
    const LmiBlock* est = find_block(blocks, "estimation");
    REQUIRE(est != nullptr);
    CHECK(est->sample_index == 1);

    Vector y = random_point(rng, layout.size());
    const Matrix wbar = vec_to_sym(
        y.segment(layout.wbar_offset(1), layout.sym_dim()), 3);
    const Matrix sym_part = wbar * A - y[DecisionLayout::nu] * C_L.transpose() * C;
    const Matrix direct =
        sym_part + sym_part.transpose() +
        (y[DecisionLayout::nu] * a1 + y[DecisionLayout::nu_c] * a2) *
            Matrix::Identity(3, 3) +
        2.0 * alpha * wbar;
    CHECK((eval_block(*est, y) - direct).cwiseAbs().maxCoeff() <
          1e-12 * (1.0 + direct.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("cone blocks accept nu^3 <= nu_c and reject violations") {
  DecisionLayout layout{1, 1, true};
  auto cone = nu_cubed_cone_blocks(layout);
  REQUIRE(cone.size() == 2);
  const LmiBlock* sq = find_block(cone, "cone_sq");
  const LmiBlock* cube = find_block(cone, "cone_cube");
  REQUIRE(sq != nullptr);
  REQUIRE(cube != nullptr);

  Matrix wbar(1, 1);
  wbar << 1.0;
  // nu = 2, nu_c = 7 violates 8 <= 7; the completion s = nu^2 cannot save it.
  const Vector bad = make_point(layout, 2.0, 1.0, wbar, 7.0, 4.0);
  CHECK(block_margin(*sq, bad) <= 1e-12);
  CHECK(block_margin(*cube, bad) > 1e-3);
  // nu = 2, nu_c = 8 sits on the boundary.
  const Vector edge = make_point(layout, 2.0, 1.0, wbar, 8.0, 4.0);
  CHECK(block_margin(*sq, edge) <= 1e-12);
  CHECK(block_margin(*cube, edge) <= 1e-12);
  // Slack in nu_c gives strict feasibility of the cube block.
  const Vector ok = make_point(layout, 2.0, 1.0, wbar, 9.0, 4.0);
  CHECK(block_margin(*cube, ok) < -1e-3);

  // The completion witnesses every admissible pair.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.05, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double nu = unif(rng);
    const double nu_c = nu * nu * nu * (1.0 + unif(rng));
    const Vector y = make_point(layout, nu, 1.0, wbar, nu_c, nu * nu);
    CHECK(block_margin(*sq, y) <= 1e-12);
    CHECK(block_margin(*cube, y) <= 1e-12);
  }

  DecisionLayout no_aux{1, 1, false};
  CHECK_THROWS_AS(nu_cubed_cone_blocks(no_aux), AssemblyError);

  auto pos = scalar_positivity_blocks(layout, true);
  REQUIRE(pos.size() == 2);
  Vector y = make_point(layout, -1.0, 1.0, wbar, 2.0, 1.0);
  CHECK(block_margin(pos[0], y) == doctest::Approx(1.0).epsilon(1e-15));
  y[DecisionLayout::nu] = 1.0;
  CHECK(block_margin(pos[0], y) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(block_margin(pos[1], y) == doctest::Approx(-2.0).epsilon(1e-15));
}

TEST_CASE("wdot modes produce the documented contributions") {
  DecisionLayout layout{2, 3, false};

  WdotSpec zero;
  auto c0 = wdot_term(zero, layout, 1, LmiSense::Control);
  CHECK(c0.constant.cwiseAbs().maxCoeff() == 0.0);
  CHECK(c0.terms.empty());
  CHECK_FALSE(c0.multi_sample);

  WdotSpec back{WdotMode::BackwardDifference, 0.1, true};
  WdotSpec unordered{WdotMode::BackwardDifference, 0.1, false};
  CHECK_THROWS_AS(wdot_term(unordered, layout, 1, LmiSense::Estimation),
                  ConfigError);
  WdotSpec no_dt{WdotMode::BackwardDifference, 0.0, true};
  CHECK_THROWS_AS(wdot_term(no_dt, layout, 1, LmiSense::Estimation), ConfigError);

  // First trajectory point has no predecessor.
  auto first = wdot_term(back, layout, 0, LmiSense::Estimation);
  CHECK(first.terms.empty());
  CHECK_FALSE(first.multi_sample);

  auto diff = wdot_term(back, layout, 1, LmiSense::Estimation);
  CHECK(diff.multi_sample);
  // Identical consecutive metrics difference out.
  Vector y = Vector::Zero(layout.size());
  const Matrix w = (Matrix(2, 2) << 2.0, 0.3, 0.3, 1.5).finished();
  y.segment(layout.wbar_offset(0), 3) = sym_to_vec(w);
  y.segment(layout.wbar_offset(1), 3) = sym_to_vec(w);
  LmiBlock as_block{diff.constant, diff.terms, -2, "wdot"};
  CHECK(eval_block(as_block, y).cwiseAbs().maxCoeff() == 0.0);

  // Linear-in-time metric (1 + t) I sampled at dt = 0.1 differentiates to I.
  y.segment(layout.wbar_offset(0), 3) = sym_to_vec(1.4 * Matrix::Identity(2, 2));
  y.segment(layout.wbar_offset(1), 3) = sym_to_vec(1.5 * Matrix::Identity(2, 2));
  const Matrix deriv = eval_block(as_block, y);
  CHECK((deriv - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sufficient-bound wdot shifts the contraction blocks as documented") {
  DecisionLayout layout{2, 1, true};
  std::mt19937_64 rng(47);
  const Matrix A = random_matrix(rng, 2, 2, 2.0);
  const Matrix B = random_matrix(rng, 2, 1, 1.0);
  const Matrix C = random_matrix(rng, 1, 2, 1.0);
  const double dt = 0.25;
  WdotSpec suff{WdotMode::SufficientBound, dt, false};
  WdotSpec none;

  Vector y = random_point(rng, layout.size());
  const Matrix wbar =
      vec_to_sym(y.segment(layout.wbar_offset(0), layout.sym_dim()), 2);
  const double chi = y[DecisionLayout::chi];

  auto con_s = build_control_blocks(layout, A, B, 0.5, 0.0, suff, 0);
  auto con_0 = build_control_blocks(layout, A, B, 0.5, 0.0, none, 0);
  const Matrix dc = eval_block(*find_block(con_s, "control"), y) -
                    eval_block(*find_block(con_0, "control"), y);
  // -dWbar/dt with the worst predecessor chi I contributes (chi I - Wbar)/dt.
  CHECK((dc - (chi * Matrix::Identity(2, 2) - wbar) / dt).cwiseAbs().maxCoeff() <
        1e-12 * (1.0 + dc.cwiseAbs().maxCoeff()));
  CHECK(find_block(con_s, "control")->sample_index == 0);

  auto est_s = build_estimation_blocks(layout, A, C, C, 0.5, 0.1, 0.1, suff, 0);
  auto est_0 = build_estimation_blocks(layout, A, C, C, 0.5, 0.1, 0.1, none, 0);
  const Matrix de = eval_block(*find_block(est_s, "estimation"), y) -
                    eval_block(*find_block(est_0, "estimation"), y);
  // +dWbar/dt with the worst predecessor I contributes (Wbar - I)/dt.
  CHECK((de - (wbar - Matrix::Identity(2, 2)) / dt).cwiseAbs().maxCoeff() <
        1e-12 * (1.0 + de.cwiseAbs().maxCoeff()));

  WdotSpec bad{WdotMode::SufficientBound, 0.0, false};
  CHECK_THROWS_AS(build_control_blocks(layout, A, B, 0.5, 0.0, bad, 0),
                  ConfigError);

  // Backward differencing marks the contraction block as multi-sample.
  DecisionLayout two{2, 2, false};
  WdotSpec back{WdotMode::BackwardDifference, dt, true};
  auto coupled = build_control_blocks(two, A, B, 0.5, 0.0, back, 1);
  CHECK(find_block(coupled, "control")->sample_index == -2);
  CHECK(find_block(coupled, "wbar_lower")->sample_index == 1);
}

TEST_CASE("blocks are affine and exactly symmetric") {
  std::mt19937_64 rng(59);
  DecisionLayout layout{2, 2, true};
  const Matrix A = random_matrix(rng, 2, 2, 2.0);
  const Matrix B = random_matrix(rng, 2, 2, 1.0);
  const Matrix C = random_matrix(rng, 2, 2, 1.0);
  WdotSpec back{WdotMode::BackwardDifference, 0.2, true};

  std::vector<LmiBlock> all;
  for (auto& b : build_control_blocks(layout, A, B, 0.7, 0.3, back, 1))
    all.push_back(std::move(b));
  for (auto& b :
       build_estimation_blocks(layout, A, C, C, 0.7, 0.2, 0.1, back, 1))
    all.push_back(std::move(b));
  for (auto& b : build_basic_contraction_blocks(layout, A, 0.7, 0.3, 0))
    all.push_back(std::move(b));
  for (auto& b : nu_cubed_cone_blocks(layout)) all.push_back(std::move(b));
  for (auto& b : scalar_positivity_blocks(layout, true))
    all.push_back(std::move(b));

  const Vector y1 = random_point(rng, layout.size());
  const Vector y2 = random_point(rng, layout.size());
  for (const LmiBlock& b : all) {
    const Matrix m1 = eval_block(b, y1);
    CHECK((m1 - m1.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (const LmiTerm& t : b.terms)
      CHECK((t.coeff - t.coeff.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Matrix m2 = eval_block(b, y2);
    const Matrix mid = eval_block(b, 0.3 * y1 + 0.7 * y2);
    CHECK((mid - (0.3 * m1 + 0.7 * m2)).cwiseAbs().maxCoeff() <
          1e-12 * (1.0 + m1.cwiseAbs().maxCoeff() + m2.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("convexified blocks are equivalent to the original constraints") {
  // Oracle: the plain contraction condition in the metric M,
  //   2 sym(M f_x) + alpha_g I + 2 alpha M <= 0,  (1/w_hi) I <= M <= (1/w_lo) I,
  // holds iff the assembled blocks are feasible at
  //   nu = 1/w_lo, chi = w_hi/w_lo, Wbar = nu M^{-1}
  // for a time-invariant metric. Both directions over random scalar and 2x2
  // draws, skipping instances inside the 1e-9 eigenvalue margin band.
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int checked = 0, feasible = 0, infeasible = 0;
  while (checked < 100) {
    const int n = (checked % 2 == 0) ? 1 : 2;
    const Matrix f_x = random_matrix(rng, n, n, 1.5) - Matrix::Identity(n, n);
    const Matrix M = random_spd(rng, n, 0.3, 3.0);
    const double alpha = 0.05 + 0.6 * unif(rng);
    const double alpha_g = (checked % 4 < 2) ? 0.0 : 0.02 + 0.4 * unif(rng);

    Eigen::SelfAdjointEigenSolver<Matrix> es(M);
    const double m_lo = es.eigenvalues().minCoeff();
    const double m_hi = es.eigenvalues().maxCoeff();
    // Strict spectral slack keeps the bound blocks away from the margin band.
    const double w_lo = (1.0 / m_hi) * 0.9;
    const double w_hi = (1.0 / m_lo) * 1.1;

    const Matrix original = M * f_x + f_x.transpose() * M +
                            alpha_g * Matrix::Identity(n, n) + 2.0 * alpha * M;
    const double orig_eig = max_eig(original);

    const double nu = 1.0 / w_lo;
    const double chi = w_hi / w_lo;
    const Matrix wbar = nu * M.inverse();
    DecisionLayout layout{n, 1, false};
    const Vector y = make_point(layout, nu, chi, wbar);
    auto blocks = build_basic_contraction_blocks(layout, f_x, alpha, alpha_g, 0);
    double block_eig = -1e30;
    for (const LmiBlock& b : blocks)
      block_eig = std::max(block_eig, block_margin(b, y));

    if (std::abs(orig_eig) < 1e-9 || std::abs(block_eig) < 1e-9) continue;
    CHECK((orig_eig <= 0.0) == (block_eig <= 0.0));
    (orig_eig <= 0.0 ? feasible : infeasible) += 1;
    ++checked;
  }
  CHECK(feasible > 15);
  CHECK(infeasible > 15);
}

TEST_CASE("an expanding system admits no feasible candidate") {
  DecisionLayout layout{2, 1, false};
  auto blocks = build_basic_contraction_blocks(layout, Matrix::Identity(2, 2),
                                               0.5, 0.0, 0);
  const LmiBlock* basic = find_block(blocks, "basic");
  REQUIRE(basic != nullptr);
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    // Any admissible Wbar >= I keeps 2 sym(Wbar) + 2 alpha Wbar = 3 Wbar >= 3 I.
    const Matrix wbar =
        random_spd(rng, 2, 1.0, 4.0) + Matrix::Identity(2, 2);
    const Vector y = make_point(layout, 1.0, 10.0, wbar);
    CHECK(block_margin(*basic, y) >= 3.0 - 1e-9);
  }
}

TEST_CASE("problems round-trip through the sparse text format") {
  std::mt19937_64 rng(83);
  DecisionLayout layout{2, 2, true};
  const Matrix A = random_matrix(rng, 2, 2, 2.0);
  const Matrix B = random_matrix(rng, 2, 1, 1.0);
  const Matrix C = random_matrix(rng, 1, 2, 1.0);

  LmiProblem problem;
  problem.layout = layout;
  WdotSpec back{WdotMode::BackwardDifference, 0.2, true};
  for (int i = 0; i < 2; ++i) {
    for (auto& b : build_control_blocks(layout, A, B, 0.6, 0.25, back, i))
      problem.blocks.push_back(std::move(b));
    for (auto& b :
         build_estimation_blocks(layout, A, C, C, 0.6, 0.1, 0.05, back, i))
      problem.blocks.push_back(std::move(b));
  }
  for (auto& b : nu_cubed_cone_blocks(layout)) problem.blocks.push_back(std::move(b));
  for (auto& b : scalar_positivity_blocks(layout, true))
    problem.blocks.push_back(std::move(b));
  problem.objective = Vector::Zero(layout.size());
  problem.objective[DecisionLayout::nu] = 0.123456789012345678;
  problem.objective[DecisionLayout::chi] = 3.0;

  const std::string path = "lmi_roundtrip.tmp";
  write_problem(problem, path);
  const LmiProblem back_in = read_problem(path);
  std::remove(path.c_str());

  CHECK(back_in.layout.n == layout.n);
  CHECK(back_in.layout.num_samples == layout.num_samples);
  CHECK(back_in.layout.with_aux == layout.with_aux);
  CHECK((back_in.objective - problem.objective).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(back_in.blocks.size() == problem.blocks.size());
  for (size_t i = 0; i < problem.blocks.size(); ++i) {
    CHECK(back_in.blocks[i].label == problem.blocks[i].label);
    CHECK(back_in.blocks[i].sample_index == problem.blocks[i].sample_index);
    for (int rep = 0; rep < 3; ++rep) {
      const Vector y = random_point(rng, layout.size());
      const Matrix a = eval_block(problem.blocks[i], y);
      const Matrix b = eval_block(back_in.blocks[i], y);
      CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  std::ofstream bad_file("lmi_bad.tmp");
  bad_file << "not-a-problem 1\n";
  bad_file.close();
  CHECK_THROWS_AS(read_problem("lmi_bad.tmp"), Error);
  std::remove("lmi_bad.tmp");
  CHECK_THROWS_AS(read_problem("lmi_missing.tmp"), Error);
}

TEST_CASE("basic blocks equal control blocks with zero input matrix") {
  std::mt19937_64 rng(97);
  DecisionLayout layout{2, 1, false};
  const Matrix f_x = random_matrix(rng, 2, 2, 2.0);
  auto basic = build_basic_contraction_blocks(layout, f_x, 0.45, 0.2, 0);
  auto control = build_control_blocks(layout, f_x, Matrix::Zero(2, 1), 0.45,
                                      0.2, WdotSpec{}, 0);
  REQUIRE(basic.size() == control.size());
  for (int rep = 0; rep < 5; ++rep) {
    const Vector y = random_point(rng, layout.size());
    for (size_t i = 0; i < basic.size(); ++i)
      CHECK((eval_block(basic[i], y) - eval_block(control[i], y))
                .cwiseAbs()
                .maxCoeff() == 0.0);
  }
}
