#include <nscm/lmi.hpp>

#include <Eigen/Eigenvalues>
#include <fstream>
#include <iomanip>
#include <map>
#include <utility>

namespace nscm {

namespace {

std::pair<int, int> sym_indices(int n, int k) {
  demand(k >= 0 && k < n * (n + 1) / 2, "symmetric entry index out of range");
  int col = 0, off = k;
  while (off >= n - col) {
    off -= n - col;
    ++col;
  }
  return {col + off, col};
}

// Accumulates an affine symmetric-matrix expression with merged, index-sorted
// terms. Exact-zero coefficients are dropped.
struct AffineMatrix {
  Matrix constant;
  std::map<int, Matrix> coeffs;

  explicit AffineMatrix(int dim) : constant(Matrix::Zero(dim, dim)) {}

  void add(int index, const Matrix& m) {
    if (m.isZero(0.0)) return;
    auto it = coeffs.find(index);
    if (it == coeffs.end())
      coeffs.emplace(index, m);
    else
      it->second += m;
  }
};

LmiBlock to_block(AffineMatrix&& a, int sample_index, std::string label) {
  LmiBlock b;
  b.constant = std::move(a.constant);
  b.terms.reserve(a.coeffs.size());
  for (auto& [index, coeff] : a.coeffs) b.terms.push_back({index, std::move(coeff)});
  b.sample_index = sample_index;
  b.label = std::move(label);
  return b;
}

LmiBlock lower_bound_block(const DecisionLayout& layout, int sample_index) {
  AffineMatrix a(layout.n);
  a.constant = Matrix::Identity(layout.n, layout.n);
  for (int k = 0; k < layout.sym_dim(); ++k)
    a.add(layout.wbar_offset(sample_index) + k, -sym_basis(layout.n, k));
  return to_block(std::move(a), sample_index, "wbar_lower");
}

LmiBlock upper_bound_block(const DecisionLayout& layout, int sample_index) {
  AffineMatrix a(layout.n);
  for (int k = 0; k < layout.sym_dim(); ++k)
    a.add(layout.wbar_offset(sample_index) + k, sym_basis(layout.n, k));
  a.add(DecisionLayout::chi, -Matrix::Identity(layout.n, layout.n));
  return to_block(std::move(a), sample_index, "wbar_upper");
}

}  // namespace

int DecisionLayout::wbar_offset(int sample) const {
  demand(sample >= 0 && sample < num_samples, "sample index out of range");
  return 3 + sample * sym_dim();
}

int DecisionLayout::aux_index() const {
  demand(with_aux, "layout has no auxiliary scalar");
  return 3 + num_samples * sym_dim();
}

Vector sym_to_vec(const Matrix& S) {
  if (S.rows() != S.cols()) throw AssemblyError("sym_to_vec: matrix is not square");
  const double asym = (S - S.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * (1.0 + S.cwiseAbs().maxCoeff()))
    throw AssemblyError("sym_to_vec: matrix is not symmetric");
  const int n = static_cast<int>(S.rows());
  Vector v(n * (n + 1) / 2);
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) v[k++] = S(i, j);
  return v;
}

Matrix vec_to_sym(const Vector& v, int n) {
  demand(static_cast<int>(v.size()) == n * (n + 1) / 2,
         "vec_to_sym: entry count does not match dimension");
  Matrix S(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) {
      S(i, j) = v[k];
      S(j, i) = v[k];
      ++k;
    }
  return S;
}

Matrix sym_basis(int n, int k) {
  auto [i, j] = sym_indices(n, k);
  Matrix E = Matrix::Zero(n, n);
  E(i, j) = 1.0;
  E(j, i) = 1.0;
  return E;
}

Matrix eval_block(const LmiBlock& block, const Vector& y) {
  Matrix m = block.constant;
  for (const LmiTerm& t : block.terms) {
    demand(t.index >= 0 && t.index < static_cast<int>(y.size()),
           "block term index outside decision vector");
    m += y[t.index] * t.coeff;
  }
  return m;
}

double block_margin(const LmiBlock& block, const Vector& y) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(eval_block(block, y),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

WdotContribution wdot_term(const WdotSpec& spec, const DecisionLayout& layout,
                           int sample_index, LmiSense sense) {
  demand(sample_index >= 0 && sample_index < layout.num_samples,
         "wdot sample index out of range");
  const int n = layout.n;
  WdotContribution out;
  out.constant = Matrix::Zero(n, n);
  switch (spec.mode) {
    case WdotMode::Zero:
      return out;
    case WdotMode::BackwardDifference: {
      if (!spec.trajectory_ordered)
        throw ConfigError(
            "backward-difference wdot requires trajectory-ordered samples");
      if (!(spec.dt > 0.0))
        throw ConfigError("backward-difference wdot requires dt > 0");
      if (sample_index == 0) return out;
      const double r = 1.0 / spec.dt;
      for (int k = 0; k < layout.sym_dim(); ++k) {
        const Matrix e = sym_basis(n, k);
        out.terms.push_back({layout.wbar_offset(sample_index) + k, r * e});
        out.terms.push_back({layout.wbar_offset(sample_index - 1) + k, -r * e});
      }
      out.multi_sample = true;
      return out;
    }
    case WdotMode::SufficientBound: {
      if (!(spec.dt > 0.0))
        throw ConfigError("sufficient-bound wdot requires dt > 0");
      const double r = 1.0 / spec.dt;
      for (int k = 0; k < layout.sym_dim(); ++k)
        out.terms.push_back(
            {layout.wbar_offset(sample_index) + k, r * sym_basis(n, k)});
      // Worst admissible predecessor: chi*I when the consumer subtracts the
      // derivative, I when it adds it.
      if (sense == LmiSense::Control)
        out.terms.push_back({DecisionLayout::chi, -r * Matrix::Identity(n, n)});
      else
        out.constant = -r * Matrix::Identity(n, n);
      return out;
    }
  }
  throw ConfigError("unknown wdot mode");
}

std::vector<LmiBlock> build_control_blocks(const DecisionLayout& layout,
                                           const Matrix& A, const Matrix& B,
                                           double alpha, double alpha_gc,
                                           const WdotSpec& wdot,
                                           int sample_index) {
  const int n = layout.n;
  if (A.rows() != n || A.cols() != n)
    throw AssemblyError("control block: A must be n x n");
  if (B.rows() != n) throw AssemblyError("control block: B must have n rows");
  if (!(alpha > 0.0)) throw AssemblyError("control block: alpha must be positive");
  if (!(alpha_gc >= 0.0))
    throw AssemblyError("control block: alpha_gc must be nonnegative");

  AffineMatrix tl(n);
  for (int k = 0; k < layout.sym_dim(); ++k) {
    const Matrix e = sym_basis(n, k);
    const Matrix ae = A * e;
    tl.add(layout.wbar_offset(sample_index) + k,
           ae + ae.transpose() + (2.0 * alpha) * e);
  }
  tl.add(DecisionLayout::nu, -2.0 * (B * B.transpose()));
  WdotContribution wd = wdot_term(wdot, layout, sample_index, LmiSense::Control);
  tl.constant -= wd.constant;
  for (const LmiTerm& t : wd.terms) tl.add(t.index, -t.coeff);
  const int owner = wd.multi_sample ? -2 : sample_index;

  std::vector<LmiBlock> blocks;
  if (alpha_gc == 0.0) {
    blocks.push_back(to_block(std::move(tl), owner, "control"));
  } else {
    AffineMatrix schur(2 * n);
    schur.constant.topLeftCorner(n, n) = tl.constant;
    for (const auto& [index, coeff] : tl.coeffs) {
      Matrix m = Matrix::Zero(2 * n, 2 * n);
      m.topLeftCorner(n, n) = coeff;
      schur.add(index, m);
    }
    for (int k = 0; k < layout.sym_dim(); ++k) {
      Matrix m = Matrix::Zero(2 * n, 2 * n);
      const Matrix e = sym_basis(n, k);
      m.topRightCorner(n, n) = e;
      m.bottomLeftCorner(n, n) = e;
      schur.add(layout.wbar_offset(sample_index) + k, m);
    }
    Matrix border = Matrix::Zero(2 * n, 2 * n);
    border.bottomRightCorner(n, n) =
        -(1.0 / alpha_gc) * Matrix::Identity(n, n);
    schur.add(DecisionLayout::nu, border);
    blocks.push_back(to_block(std::move(schur), owner, "control"));
  }
  blocks.push_back(lower_bound_block(layout, sample_index));
  blocks.push_back(upper_bound_block(layout, sample_index));
  return blocks;
}

std::vector<LmiBlock> build_estimation_blocks(const DecisionLayout& layout,
                                              const Matrix& A, const Matrix& C,
                                              const Matrix& C_L, double alpha,
                                              double alpha_e1, double alpha_e2,
                                              const WdotSpec& wdot,
                                              int sample_index) {
  const int n = layout.n;
  if (A.rows() != n || A.cols() != n)
    throw AssemblyError("estimation block: A must be n x n");
  if (C.cols() != n) throw AssemblyError("estimation block: C must have n columns");
  if (C_L.rows() != C.rows() || C_L.cols() != C.cols())
    throw AssemblyError("estimation block: C_L must match the shape of C");
  if (!(alpha > 0.0))
    throw AssemblyError("estimation block: alpha must be positive");
  if (!(alpha_e1 >= 0.0) || !(alpha_e2 >= 0.0))
    throw AssemblyError("estimation block: noise rates must be nonnegative");

  AffineMatrix blk(n);
  for (int k = 0; k < layout.sym_dim(); ++k) {
    const Matrix e = sym_basis(n, k);
    const Matrix ea = e * A;
    blk.add(layout.wbar_offset(sample_index) + k,
            ea + ea.transpose() + (2.0 * alpha) * e);
  }
  const Matrix cc = C_L.transpose() * C;
  blk.add(DecisionLayout::nu,
          -(cc + cc.transpose()) + alpha_e1 * Matrix::Identity(n, n));
  blk.add(DecisionLayout::nu_c, alpha_e2 * Matrix::Identity(n, n));
  WdotContribution wd =
      wdot_term(wdot, layout, sample_index, LmiSense::Estimation);
  blk.constant += wd.constant;
  for (const LmiTerm& t : wd.terms) blk.add(t.index, t.coeff);

  std::vector<LmiBlock> blocks;
  blocks.push_back(to_block(std::move(blk), wd.multi_sample ? -2 : sample_index,
                            "estimation"));
  blocks.push_back(lower_bound_block(layout, sample_index));
  blocks.push_back(upper_bound_block(layout, sample_index));
  return blocks;
}

std::vector<LmiBlock> build_basic_contraction_blocks(const DecisionLayout& layout,
                                                     const Matrix& f_x,
                                                     double alpha, double alpha_g,
                                                     int sample_index) {
  std::vector<LmiBlock> blocks = build_control_blocks(
      layout, f_x, Matrix::Zero(layout.n, 1), alpha, alpha_g, WdotSpec{},
      sample_index);
  blocks.front().label = "basic";
  return blocks;
}

std::vector<LmiBlock> scalar_positivity_blocks(const DecisionLayout& layout,
                                               bool include_nu_c) {
  (void)layout;
  std::vector<LmiBlock> blocks;
  LmiBlock nu;
  nu.constant = Matrix::Zero(1, 1);
  nu.terms.push_back({DecisionLayout::nu, -Matrix::Identity(1, 1)});
  nu.label = "nu_pos";
  blocks.push_back(std::move(nu));
  if (include_nu_c) {
    LmiBlock nuc;
    nuc.constant = Matrix::Zero(1, 1);
    nuc.terms.push_back({DecisionLayout::nu_c, -Matrix::Identity(1, 1)});
    nuc.label = "nuc_pos";
    blocks.push_back(std::move(nuc));
  }
  return blocks;
}

std::vector<LmiBlock> nu_cubed_cone_blocks(const DecisionLayout& layout) {
  if (!layout.with_aux)
    throw AssemblyError("cone encoding requires a layout with the auxiliary scalar");
  const int s = layout.aux_index();
  std::vector<LmiBlock> blocks;

  LmiBlock sq;  // -[[s, nu], [nu, 1]] <= 0, i.e. s >= nu^2
  sq.constant = Matrix::Zero(2, 2);
  sq.constant(1, 1) = -1.0;
  {
    Matrix e = Matrix::Zero(2, 2);
    e(0, 0) = -1.0;
    sq.terms.push_back({s, e});
  }
  {
    Matrix e = Matrix::Zero(2, 2);
    e(0, 1) = -1.0;
    e(1, 0) = -1.0;
    sq.terms.push_back({DecisionLayout::nu, e});
  }
  sq.label = "cone_sq";
  blocks.push_back(std::move(sq));

  LmiBlock cube;  // -[[nu_c, s], [s, nu]] <= 0, i.e. nu_c * nu >= s^2
  cube.constant = Matrix::Zero(2, 2);
  {
    Matrix e = Matrix::Zero(2, 2);
    e(0, 0) = -1.0;
    cube.terms.push_back({DecisionLayout::nu_c, e});
  }
  {
    Matrix e = Matrix::Zero(2, 2);
    e(0, 1) = -1.0;
    e(1, 0) = -1.0;
    cube.terms.push_back({s, e});
  }
  {
    Matrix e = Matrix::Zero(2, 2);
    e(1, 1) = -1.0;
    cube.terms.push_back({DecisionLayout::nu, e});
  }
  cube.label = "cone_cube";
  blocks.push_back(std::move(cube));
  return blocks;
}

namespace {

int lower_triangle_nnz(const Matrix& m) {
  int count = 0;
  for (int j = 0; j < m.cols(); ++j)
    for (int i = j; i < m.rows(); ++i)
      if (m(i, j) != 0.0) ++count;
  return count;
}

void write_triplets(std::ostream& out, const char* tag, const Matrix& m) {
  for (int j = 0; j < m.cols(); ++j)
    for (int i = j; i < m.rows(); ++i)
      if (m(i, j) != 0.0)
        out << tag << ' ' << i << ' ' << j << ' ' << m(i, j) << '\n';
}

void expect_token(std::istream& in, const std::string& want) {
  std::string got;
  if (!(in >> got) || got != want)
    throw Error("malformed problem file: expected '" + want + "', got '" + got +
                "'");
}

}  // namespace

void write_problem(const LmiProblem& problem, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << std::setprecision(17);
  out << "nscm-lmi 1\n";
  out << "layout " << problem.layout.n << ' ' << problem.layout.num_samples
      << ' ' << (problem.layout.with_aux ? 1 : 0) << '\n';

  int nnz = 0;
  for (int i = 0; i < problem.objective.size(); ++i)
    if (problem.objective[i] != 0.0) ++nnz;
  out << "objective " << problem.objective.size() << ' ' << nnz << '\n';
  for (int i = 0; i < problem.objective.size(); ++i)
    if (problem.objective[i] != 0.0)
      out << "o " << i << ' ' << problem.objective[i] << '\n';

  out << "blocks " << problem.blocks.size() << '\n';
  for (const LmiBlock& b : problem.blocks) {
    out << "block " << b.constant.rows() << ' ' << b.sample_index << ' '
        << (b.label.empty() ? "-" : b.label) << ' '
        << lower_triangle_nnz(b.constant) << ' ' << b.terms.size() << '\n';
    write_triplets(out, "c", b.constant);
    for (const LmiTerm& t : b.terms) {
      out << "t " << t.index << ' ' << lower_triangle_nnz(t.coeff) << '\n';
      write_triplets(out, "e", t.coeff);
    }
  }
  if (!out) throw Error("failed writing " + path);
}

LmiProblem read_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  expect_token(in, "nscm-lmi");
  int version = 0;
  if (!(in >> version) || version != 1)
    throw Error("unsupported problem file version in " + path);

  LmiProblem p;
  expect_token(in, "layout");
  int aux = 0;
  if (!(in >> p.layout.n >> p.layout.num_samples >> aux))
    throw Error("malformed layout line in " + path);
  p.layout.with_aux = aux != 0;

  expect_token(in, "objective");
  int len = 0, nnz = 0;
  if (!(in >> len >> nnz)) throw Error("malformed objective line in " + path);
  demand(len == p.layout.size(), "objective length does not match layout");
  p.objective = Vector::Zero(len);
  for (int k = 0; k < nnz; ++k) {
    expect_token(in, "o");
    int i;
    double v;
    if (!(in >> i >> v) || i < 0 || i >= len)
      throw Error("malformed objective entry in " + path);
    p.objective[i] = v;
  }

  expect_token(in, "blocks");
  int count = 0;
  if (!(in >> count) || count < 0)
    throw Error("malformed block count in " + path);
  auto read_triplets = [&](const char* tag, Matrix& m, int n) {
    for (int k = 0; k < n; ++k) {
      expect_token(in, tag);
      int i, j;
      double v;
      if (!(in >> i >> j >> v) || i < 0 || j < 0 || i >= m.rows() ||
          j >= m.cols())
        throw Error("malformed matrix entry in " + path);
      m(i, j) = v;
      m(j, i) = v;
    }
  };
  p.blocks.reserve(count);
  for (int b = 0; b < count; ++b) {
    expect_token(in, "block");
    int dim = 0, sample = 0, cn = 0, tn = 0;
    std::string label;
    if (!(in >> dim >> sample >> label >> cn >> tn) || dim <= 0)
      throw Error("malformed block header in " + path);
    LmiBlock block;
    block.constant = Matrix::Zero(dim, dim);
    block.sample_index = sample;
    block.label = label == "-" ? "" : label;
    read_triplets("c", block.constant, cn);
    block.terms.reserve(tn);
    for (int t = 0; t < tn; ++t) {
      expect_token(in, "t");
      int index = 0, en = 0;
      if (!(in >> index >> en) || index < 0 || index >= len)
        throw Error("malformed term header in " + path);
      Matrix coeff = Matrix::Zero(dim, dim);
      read_triplets("e", coeff, en);
      block.terms.push_back({index, std::move(coeff)});
    }
    p.blocks.push_back(std::move(block));
  }
  return p;
}

}  // namespace nscm
