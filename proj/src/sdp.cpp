#include <nscm/sdp.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <nscm/common.hpp>

namespace nscm {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::MaxIterations: return "max-iterations";
    case SolveStatus::Degraded: return "degraded";
  }
  return "unknown";
}

FeasibilityReport check_feasibility(const LmiProblem& problem,
                                    const Vector& point) {
  if (point.size() != problem.layout.size())
    throw AssemblyError("feasibility check: point length does not match layout");
  FeasibilityReport rep;
  rep.margins.reserve(problem.blocks.size());
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
    const double m = block_margin(problem.blocks[b], point);
    rep.margins.push_back(m);
    if (m > rep.worst) {
      rep.worst = m;
      rep.worst_block = static_cast<int>(b);
    }
  }
  return rep;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kSqrt2 = std::sqrt(2.0);

int svec_len(int dim) { return dim * (dim + 1) / 2; }

// Isometric packing: <svec(A), svec(B)> equals the Frobenius inner product.
Vector svec(const Matrix& m) {
  const int d = static_cast<int>(m.rows());
  Vector v(svec_len(d));
  int k = 0;
  for (int c = 0; c < d; ++c) {
    v[k++] = m(c, c);
    for (int r = c + 1; r < d; ++r) v[k++] = kSqrt2 * m(r, c);
  }
  return v;
}

Matrix smat(const Vector& v, int dim) {
  Matrix m(dim, dim);
  int k = 0;
  for (int c = 0; c < dim; ++c) {
    m(c, c) = v[k++];
    for (int r = c + 1; r < dim; ++r) {
      const double x = v[k++] / kSqrt2;
      m(r, c) = x;
      m(c, r) = x;
    }
  }
  return m;
}

double min_eig(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

struct SolverBlock {
  int dim = 0;
  int len = 0;
  int offset = 0;
  std::vector<int> cols;         // compact decision indices
  std::vector<Matrix> coeff;     // prescaled coefficient matrices
  std::vector<Vector> coeff_sv;  // their svec images
  Vector h;                      // svec of the negated prescaled constant
  int group = -1;                // -1 core, >=0 one sample, -2 several samples
};

struct BlockScratch {
  Matrix rinv;             // inverse Nesterov-Todd factor
  Vector lambda;           // scaled spectrum, strictly positive
  std::vector<Vector> vt;  // svec(rinv * coeff_k * rinv^T)
  Vector ht;               // svec(rinv * smat(h) * rinv^T)
};

struct Direction {
  Vector dy;
  Vector ds, dz;  // stacked cone coordinates
  double dtau = 0.0, dkappa = 0.0;
  std::vector<Matrix> dst, dzt;  // scaled per-block deltas
};

// Normal-equations solver for H = G^T (W W^T)^{-1} G. Metric sampling
// programs couple a handful of shared scalars to otherwise independent
// per-sample metric entries, so H is arrow shaped: a small core, one
// diagonal block per sample, and core-sample coupling strips. Blocks that
// tie several samples together (finite-difference metric derivatives)
// disable the elimination and fall back to a dense factorization.
class NormalSolver {
 public:
  void init(int m, bool arrow, const std::vector<int>& var_group,
            const std::vector<int>& pos_in_group,
            const std::vector<int>& core_vars,
            const std::vector<std::vector<int>>& sample_vars) {
    m_ = m;
    arrow_ = arrow;
    var_group_ = &var_group;
    pos_in_group_ = &pos_in_group;
    core_dim_ = static_cast<int>(core_vars.size());
    num_samples_ = static_cast<int>(sample_vars.size());
    sample_vars_ = &sample_vars;
    core_vars_ = &core_vars;
  }

  bool factor(const std::vector<SolverBlock>& blocks,
              const std::vector<BlockScratch>& scratch) {
    return arrow_ ? factor_arrow(blocks, scratch)
                  : factor_dense(blocks, scratch);
  }

  Vector solve(const Vector& rhs) const {
    return arrow_ ? solve_arrow(rhs) : solve_dense(rhs);
  }

 private:
  bool factor_dense(const std::vector<SolverBlock>& blocks,
                    const std::vector<BlockScratch>& scratch) {
    Matrix h = Matrix::Zero(m_, m_);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& blk = blocks[b];
      const auto& sc = scratch[b];
      const int nt = static_cast<int>(blk.cols.size());
      for (int i = 0; i < nt; ++i) {
        for (int j = i; j < nt; ++j) {
          const double v = sc.vt[i].dot(sc.vt[j]);
          h(blk.cols[i], blk.cols[j]) += v;
          if (blk.cols[i] != blk.cols[j]) h(blk.cols[j], blk.cols[i]) += v;
        }
      }
    }
    if (!h.allFinite()) return false;
    llt_.compute(h);
    return llt_.info() == Eigen::Success;
  }

  Vector solve_dense(const Vector& rhs) const { return llt_.solve(rhs); }

  bool factor_arrow(const std::vector<SolverBlock>& blocks,
                    const std::vector<BlockScratch>& scratch) {
    core_ = Matrix::Zero(core_dim_, core_dim_);
    diag_.assign(num_samples_, Matrix());
    strip_.assign(num_samples_, Matrix());
    for (int s = 0; s < num_samples_; ++s) {
      const int d = static_cast<int>((*sample_vars_)[s].size());
      diag_[s] = Matrix::Zero(d, d);
      strip_[s] = Matrix::Zero(d, core_dim_);
    }
    const auto& group = *var_group_;
    const auto& pos = *pos_in_group_;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& blk = blocks[b];
      const auto& sc = scratch[b];
      const int nt = static_cast<int>(blk.cols.size());
      for (int i = 0; i < nt; ++i) {
        const int ci = blk.cols[i];
        for (int j = i; j < nt; ++j) {
          const int cj = blk.cols[j];
          const double v = sc.vt[i].dot(sc.vt[j]);
          const int gi = group[ci], gj = group[cj];
          if (gi < 0 && gj < 0) {
            core_(pos[ci], pos[cj]) += v;
            if (ci != cj) core_(pos[cj], pos[ci]) += v;
          } else if (gi >= 0 && gj >= 0) {
            diag_[gi](pos[ci], pos[cj]) += v;
            if (ci != cj) diag_[gi](pos[cj], pos[ci]) += v;
          } else if (gi >= 0) {
            strip_[gi](pos[ci], pos[cj]) += v;
          } else {
            strip_[gj](pos[cj], pos[ci]) += v;
          }
        }
      }
    }
    diag_llt_.assign(num_samples_, Eigen::LLT<Matrix>());
    dinv_strip_.assign(num_samples_, Matrix());
    Matrix schur = core_;
    for (int s = 0; s < num_samples_; ++s) {
      if (!diag_[s].allFinite()) return false;
      diag_llt_[s].compute(diag_[s]);
      if (diag_llt_[s].info() != Eigen::Success) return false;
      dinv_strip_[s] = diag_llt_[s].solve(strip_[s]);
      schur.noalias() -= strip_[s].transpose() * dinv_strip_[s];
    }
    if (!schur.allFinite()) return false;
    core_llt_.compute(schur);
    return core_llt_.info() == Eigen::Success;
  }

  Vector solve_arrow(const Vector& rhs) const {
    const auto& group = *var_group_;
    const auto& pos = *pos_in_group_;
    Vector core_rhs(core_dim_);
    std::vector<Vector> sample_rhs(num_samples_);
    for (int s = 0; s < num_samples_; ++s)
      sample_rhs[s].resize((*sample_vars_)[s].size());
    for (int k = 0; k < m_; ++k) {
      if (group[k] < 0)
        core_rhs[pos[k]] = rhs[k];
      else
        sample_rhs[group[k]][pos[k]] = rhs[k];
    }
    std::vector<Vector> w(num_samples_);
    for (int s = 0; s < num_samples_; ++s) {
      w[s] = diag_llt_[s].solve(sample_rhs[s]);
      core_rhs.noalias() -= strip_[s].transpose() * w[s];
    }
    const Vector xc = core_llt_.solve(core_rhs);
    Vector out(m_);
    for (int i = 0; i < core_dim_; ++i) out[(*core_vars_)[i]] = xc[i];
    for (int s = 0; s < num_samples_; ++s) {
      const Vector xs = w[s] - dinv_strip_[s] * xc;
      const auto& vars = (*sample_vars_)[s];
      for (std::size_t i = 0; i < vars.size(); ++i) out[vars[i]] = xs[i];
    }
    return out;
  }

  int m_ = 0;
  bool arrow_ = false;
  int core_dim_ = 0;
  int num_samples_ = 0;
  const std::vector<int>* var_group_ = nullptr;
  const std::vector<int>* pos_in_group_ = nullptr;
  const std::vector<int>* core_vars_ = nullptr;
  const std::vector<std::vector<int>>* sample_vars_ = nullptr;
  Eigen::LLT<Matrix> llt_;
  Matrix core_;
  std::vector<Matrix> diag_, strip_, dinv_strip_;
  std::vector<Eigen::LLT<Matrix>> diag_llt_;
  Eigen::LLT<Matrix> core_llt_;
};

class HsdSolver {
 public:
  HsdSolver(const LmiProblem& problem, const SdpTolerances& tol)
      : problem_(problem), tol_(tol) {
    setup();
  }

  SolveReport run();

 private:
  void setup();
  Vector expand(const Vector& compact) const {
    Vector full = Vector::Zero(m_orig_);
    for (int k = 0; k < m_; ++k) full[to_original_[k]] = compact[k];
    return full;
  }
  Vector apply_G(const Vector& y) const {
    Vector out = Vector::Zero(total_len_);
    for (const auto& blk : blocks_) {
      auto seg = out.segment(blk.offset, blk.len);
      for (std::size_t i = 0; i < blk.cols.size(); ++i)
        seg.noalias() += y[blk.cols[i]] * blk.coeff_sv[i];
    }
    return out;
  }
  Vector apply_Gt(const Vector& x) const {
    Vector out = Vector::Zero(m_);
    for (const auto& blk : blocks_) {
      const auto seg = x.segment(blk.offset, blk.len);
      for (std::size_t i = 0; i < blk.cols.size(); ++i)
        out[blk.cols[i]] += blk.coeff_sv[i].dot(seg);
    }
    return out;
  }
  // svec of rinv * smat(segment) * rinv^T for one block
  Vector scale_down(const BlockScratch& sc, const SolverBlock& blk,
                    const Vector& stacked) const {
    const Matrix x = smat(stacked.segment(blk.offset, blk.len), blk.dim);
    return svec(sc.rinv * x * sc.rinv.transpose());
  }

  bool compute_direction(const std::vector<BlockScratch>& scratch,
                         const NormalSolver& normal, const Vector& u2,
                         double w_u2, double hth, const Vector& r_p,
                         const Vector& r_d, double r_g, double tau,
                         double kappa, double eta,
                         const std::vector<Matrix>& d_s, double d_tk,
                         Direction* out) const;

  const LmiProblem& problem_;
  SdpTolerances tol_;
  int m_orig_ = 0;
  int m_ = 0;
  std::vector<int> to_original_, to_compact_;
  Vector c_;        // compact objective, divided by cscale_
  double cscale_ = 1.0;
  double cnorm_ = 0.0, hnorm_ = 0.0;
  std::vector<SolverBlock> blocks_;
  int total_len_ = 0;
  Vector h_;  // stacked
  bool arrow_ = false;
  std::vector<int> var_group_, pos_in_group_, core_vars_;
  std::vector<std::vector<int>> sample_vars_;
  int num_groups_ = 0;
  // set by setup when the problem is decided before iterating
  bool early_ = false;
  SolveReport early_report_;
};

void HsdSolver::setup() {
  m_orig_ = problem_.layout.size();
  if (problem_.blocks.empty()) throw AssemblyError("sdp: problem has no blocks");
  if (problem_.objective.size() != m_orig_)
    throw AssemblyError("sdp: objective length does not match layout");

  std::vector<char> used(m_orig_, 0);
  for (const auto& blk : problem_.blocks) {
    if (blk.constant.rows() < 1 || blk.constant.rows() != blk.constant.cols())
      throw AssemblyError("sdp: malformed block constant");
    double data = blk.constant.cwiseAbs().maxCoeff();
    for (const auto& term : blk.terms) {
      if (term.index < 0 || term.index >= m_orig_)
        throw AssemblyError("sdp: block term index out of range");
      if (term.coeff.rows() != blk.constant.rows() ||
          term.coeff.cols() != blk.constant.cols())
        throw AssemblyError("sdp: block term shape mismatch");
      const double mag = term.coeff.cwiseAbs().maxCoeff();
      if (mag > 0.0) used[term.index] = 1;
      data = std::max(data, mag);
    }
    if (!(data > 0.0)) throw AssemblyError("sdp: block has no data");
  }
  for (int k = 0; k < m_orig_; ++k) {
    if (!used[k] && problem_.objective[k] != 0.0) {
      early_ = true;
      early_report_.status = SolveStatus::Unbounded;
      early_report_.note =
          "objective weights a variable that appears in no block";
      early_report_.iterations = 0;
      return;
    }
  }
  to_compact_.assign(m_orig_, -1);
  for (int k = 0; k < m_orig_; ++k) {
    if (used[k]) {
      to_compact_[k] = static_cast<int>(to_original_.size());
      to_original_.push_back(k);
    }
  }
  m_ = static_cast<int>(to_original_.size());

  if (m_ == 0) {
    // Nothing to decide: the blocks are constant.
    const Vector zero = Vector::Zero(m_orig_);
    const auto feas = check_feasibility(problem_, zero);
    early_ = true;
    if (feas.worst <= tol_.feasibility) {
      early_report_.status = SolveStatus::Optimal;
      early_report_.y = zero;
      early_report_.objective = 0.0;
      early_report_.gap = 0.0;
    } else {
      early_report_.status = SolveStatus::Infeasible;
      early_report_.note = "constant blocks are not negative semidefinite";
    }
    early_report_.worst_margin = feas.worst;
    return;
  }

  c_ = Vector(m_);
  for (int k = 0; k < m_; ++k) c_[k] = problem_.objective[to_original_[k]];
  cscale_ = std::max(1.0, c_.cwiseAbs().maxCoeff());
  c_ /= cscale_;
  cnorm_ = c_.norm();

  blocks_.reserve(problem_.blocks.size());
  total_len_ = 0;
  const int sym = problem_.layout.sym_dim();
  const int aux = problem_.layout.with_aux ? problem_.layout.aux_index() : -1;
  auto group_of_original = [&](int idx) {
    if (idx < 3 || idx == aux) return -1;
    return (idx - 3) / sym;
  };

  for (const auto& src : problem_.blocks) {
    SolverBlock blk;
    blk.dim = static_cast<int>(src.constant.rows());
    blk.len = svec_len(blk.dim);
    blk.offset = total_len_;
    total_len_ += blk.len;
    double scale = src.constant.cwiseAbs().maxCoeff();
    for (const auto& term : src.terms)
      scale = std::max(scale, term.coeff.cwiseAbs().maxCoeff());
    if (!(scale > 0.0)) throw AssemblyError("sdp: block has no data");
    blk.h = svec(Matrix(-src.constant / scale));
    int block_group = -1;
    for (const auto& term : src.terms) {
      if (term.coeff.cwiseAbs().maxCoeff() == 0.0) continue;
      blk.cols.push_back(to_compact_[term.index]);
      blk.coeff.push_back(term.coeff / scale);
      blk.coeff_sv.push_back(svec(blk.coeff.back()));
      const int g = group_of_original(term.index);
      if (g >= 0) {
        if (block_group == -1)
          block_group = g;
        else if (block_group != g)
          block_group = -2;
      }
    }
    blk.group = block_group;
    blocks_.push_back(std::move(blk));
  }

  h_ = Vector(total_len_);
  for (const auto& blk : blocks_) h_.segment(blk.offset, blk.len) = blk.h;
  hnorm_ = h_.norm();

  // Arrow elimination bookkeeping over compact indices.
  var_group_.assign(m_, -1);
  for (int k = 0; k < m_; ++k) var_group_[k] = group_of_original(to_original_[k]);
  num_groups_ = 0;
  for (int g : var_group_) num_groups_ = std::max(num_groups_, g + 1);
  bool mixed = false;
  for (const auto& blk : blocks_)
    if (blk.group == -2) mixed = true;
  arrow_ = !mixed && num_groups_ >= 1 && m_ > 20 && !tol_.force_dense;

  pos_in_group_.assign(m_, 0);
  core_vars_.clear();
  sample_vars_.assign(num_groups_, {});
  for (int k = 0; k < m_; ++k) {
    const int g = var_group_[k];
    if (g < 0) {
      pos_in_group_[k] = static_cast<int>(core_vars_.size());
      core_vars_.push_back(k);
    } else {
      pos_in_group_[k] = static_cast<int>(sample_vars_[g].size());
      sample_vars_[g].push_back(k);
    }
  }
}

bool HsdSolver::compute_direction(
    const std::vector<BlockScratch>& scratch, const NormalSolver& normal,
    const Vector& u2, double w_u2, double hth, const Vector& r_p,
    const Vector& r_d, double r_g, double tau, double kappa, double eta,
    const std::vector<Matrix>& d_s, double d_tk, Direction* out) const {
  const int nb = static_cast<int>(blocks_.size());
  // L^{-1} applied to the complementarity right-hand sides, block by block.
  std::vector<Matrix> ld(nb);
  Vector b1 = -eta * r_d;
  double rhs2 = -eta * r_g - d_tk / tau;
  for (int b = 0; b < nb; ++b) {
    const auto& sc = scratch[b];
    const auto& blk = blocks_[b];
    const auto& lam = sc.lambda;
    ld[b].resize(blk.dim, blk.dim);
    for (int i = 0; i < blk.dim; ++i)
      for (int j = 0; j < blk.dim; ++j)
        ld[b](i, j) = 2.0 * d_s[b](i, j) / (lam[i] + lam[j]);
    const Vector ld_sv = svec(ld[b]);
    const Vector rpt = scale_down(sc, blk, r_p);
    for (std::size_t i = 0; i < blk.cols.size(); ++i) {
      b1[blk.cols[i]] +=
          -sc.vt[i].dot(ld_sv) + eta * sc.vt[i].dot(rpt);
    }
    rhs2 += -sc.ht.dot(ld_sv) + eta * sc.ht.dot(rpt);
  }
  const Vector u1 = normal.solve(b1);
  if (!u1.allFinite()) return false;

  auto w_of = [&](const Vector& v) {
    double acc = c_.dot(v);
    const Vector gv = apply_G(v);
    for (int b = 0; b < nb; ++b)
      acc += scratch[b].ht.dot(scale_down(scratch[b], blocks_[b], gv));
    return acc;
  };
  const double denom = w_u2 - hth - kappa / tau;
  if (!(denom < 0.0) || !std::isfinite(denom)) return false;
  const double dtau = (rhs2 - w_of(u1)) / denom;
  const Vector dy = u1 + dtau * u2;
  const Vector ds = -apply_G(dy) + dtau * h_ + eta * r_p;
  Vector dz(total_len_);
  out->dst.resize(nb);
  out->dzt.resize(nb);
  for (int b = 0; b < nb; ++b) {
    const auto& sc = scratch[b];
    const auto& blk = blocks_[b];
    const Matrix dst = smat(scale_down(sc, blk, ds), blk.dim);
    const Matrix dzt = ld[b] - dst;
    dz.segment(blk.offset, blk.len) =
        svec(sc.rinv.transpose() * dzt * sc.rinv);
    out->dst[b] = dst;
    out->dzt[b] = dzt;
  }
  out->dy = dy;
  out->ds = ds;
  out->dz = dz;
  out->dtau = dtau;
  out->dkappa = (d_tk - kappa * dtau) / tau;
  return out->dy.allFinite() && out->ds.allFinite() && out->dz.allFinite() &&
         std::isfinite(out->dtau) && std::isfinite(out->dkappa);
}

SolveReport HsdSolver::run() {
  if (early_) return early_report_;

  std::ofstream log;
  if (!tol_.iteration_log.empty()) {
    log.open(tol_.iteration_log);
    log << "iteration,mu,step,sigma,primal_residual,dual_residual,gap,"
           "relative_gap,worst_margin,tau,kappa\n";
  }

  const int nb = static_cast<int>(blocks_.size());
  int degree = 0;
  for (const auto& blk : blocks_) degree += blk.dim;
  const double cone_degree = static_cast<double>(degree);

  Vector y = Vector::Zero(m_);
  Vector s(total_len_), z(total_len_);
  for (const auto& blk : blocks_) {
    const Vector id = svec(Matrix::Identity(blk.dim, blk.dim));
    s.segment(blk.offset, blk.len) = id;
    z.segment(blk.offset, blk.len) = id;
  }
  double tau = 1.0, kappa = 1.0;

  NormalSolver normal;
  normal.init(m_, arrow_, var_group_, pos_in_group_, core_vars_, sample_vars_);

  SolveReport best;
  double best_score = kInf;
  double last_step = 0.0, last_sigma = 0.0;
  const int max_iter = std::max(1, tol_.max_iterations);

  auto degraded = [&](const std::string& why) {
    SolveReport rep = best;
    rep.status = SolveStatus::Degraded;
    rep.note = why;
    return rep;
  };

  for (int iter = 0; iter <= max_iter; ++iter) {
    const Vector y_hat = expand(y / tau);
    const auto feas = check_feasibility(problem_, y_hat);
    const double gap_scaled = s.dot(z) / (tau * tau);
    const double pobj = c_.dot(y) / tau;
    const double dobj = -h_.dot(z) / tau;
    const double relgap =
        gap_scaled / std::max({1.0, std::abs(pobj), std::abs(dobj)});
    const double dres = (apply_Gt(z) / tau + c_).norm() / (1.0 + cnorm_);
    const double pres =
        (-apply_G(y) / tau + h_ - s / tau).norm() / (1.0 + hnorm_);
    const double mu = (s.dot(z) + tau * kappa) / (cone_degree + 1.0);

    if (log.is_open()) {
      char line[320];
      std::snprintf(line, sizeof line,
                    "%d,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e\n",
                    iter, mu, last_step, last_sigma, pres, dres,
                    gap_scaled * cscale_, relgap, feas.worst, tau, kappa);
      log << line;
    }

    SolveReport cand;
    cand.y = y_hat;
    cand.objective = problem_.objective.dot(y_hat);
    cand.worst_margin = feas.worst;
    cand.iterations = iter;
    cand.gap = gap_scaled * cscale_;
    const double score = std::max(feas.worst - tol_.feasibility, 0.0) +
                         std::max(relgap - tol_.relative_gap, 0.0) +
                         std::max(dres - tol_.feasibility, 0.0);
    if (score < best_score) {
      best_score = score;
      best = cand;
    }

    if (feas.worst <= tol_.feasibility && dres <= tol_.feasibility &&
        relgap <= tol_.relative_gap) {
      cand.status = SolveStatus::Optimal;
      return cand;
    }

    const double hz = h_.dot(z);
    if (hz < 0.0) {
      const double quality = apply_Gt(z).norm() / (-hz);
      if (quality <= tol_.feasibility * (1.0 + cnorm_)) {
        SolveReport rep;
        rep.status = SolveStatus::Infeasible;
        rep.iterations = iter;
        rep.note = "primal infeasibility certificate found";
        return rep;
      }
    }
    const double cy = c_.dot(y);
    if (cy < 0.0) {
      const double quality = (apply_G(y) + s).norm() / (-cy);
      if (quality <= tol_.feasibility * (1.0 + hnorm_)) {
        SolveReport rep;
        rep.status = SolveStatus::Unbounded;
        rep.iterations = iter;
        rep.note = "unbounded objective certificate found";
        return rep;
      }
    }

    if (iter == max_iter) {
      best.status = SolveStatus::MaxIterations;
      best.note = "iteration limit reached";
      best.iterations = iter;
      return best;
    }
    if (!std::isfinite(mu) || !(tau > 0.0) || !(kappa > 0.0))
      return degraded("iterate left the interior");

    // Nesterov-Todd scaling per block.
    std::vector<BlockScratch> scratch(nb);
    for (int b = 0; b < nb; ++b) {
      const auto& blk = blocks_[b];
      auto& sc = scratch[b];
      const Matrix sm = smat(s.segment(blk.offset, blk.len), blk.dim);
      const Matrix zm = smat(z.segment(blk.offset, blk.len), blk.dim);
      Eigen::LLT<Matrix> ls(sm), lz(zm);
      if (ls.info() != Eigen::Success || lz.info() != Eigen::Success)
        return degraded("cone iterate lost definiteness");
      const Matrix lsm = ls.matrixL();
      const Matrix lzm = lz.matrixL();
      Eigen::JacobiSVD<Matrix> svd(Matrix(lzm.transpose() * lsm),
                                   Eigen::ComputeFullU | Eigen::ComputeFullV);
      sc.lambda = svd.singularValues();
      if (!(sc.lambda.minCoeff() > 0.0))
        return degraded("scaling spectrum collapsed");
      sc.rinv = sc.lambda.cwiseSqrt().cwiseInverse().asDiagonal() *
                svd.matrixU().transpose() * lzm.transpose();
      sc.vt.resize(blk.cols.size());
      for (std::size_t i = 0; i < blk.cols.size(); ++i)
        sc.vt[i] = svec(sc.rinv * blk.coeff[i] * sc.rinv.transpose());
      sc.ht = svec(sc.rinv * smat(blk.h, blk.dim) * sc.rinv.transpose());
    }

    if (!normal.factor(blocks_, scratch))
      return degraded("normal equations factorization failed");

    // Shared second solve: H u2 = G^T T(h) - c.
    Vector a = c_;
    double hth = 0.0;
    for (int b = 0; b < nb; ++b) {
      const auto& sc = scratch[b];
      for (std::size_t i = 0; i < blocks_[b].cols.size(); ++i)
        a[blocks_[b].cols[i]] -= sc.vt[i].dot(sc.ht);
      hth += sc.ht.dot(sc.ht);
    }
    const Vector u2 = normal.solve(-a);
    if (!u2.allFinite()) return degraded("normal equations solve failed");
    double w_u2 = c_.dot(u2);
    {
      const Vector gu2 = apply_G(u2);
      for (int b = 0; b < nb; ++b)
        w_u2 += scratch[b].ht.dot(scale_down(scratch[b], blocks_[b], gu2));
    }

    const Vector r_p = -apply_G(y) + tau * h_ - s;
    const Vector r_d = apply_Gt(z) + tau * c_;
    const double r_g = kappa + c_.dot(y) + h_.dot(z);

    auto step_limit = [&](const Direction& dir) {
      double theta = kInf;
      for (int b = 0; b < nb; ++b) {
        const auto& lam = scratch[b].lambda;
        const Matrix scale = Matrix(lam.cwiseSqrt().cwiseInverse().asDiagonal());
        const double rs = min_eig(Matrix(scale * dir.dst[b] * scale));
        const double rz = min_eig(Matrix(scale * dir.dzt[b] * scale));
        if (rs < 0.0) theta = std::min(theta, -1.0 / rs);
        if (rz < 0.0) theta = std::min(theta, -1.0 / rz);
      }
      if (dir.dtau < 0.0) theta = std::min(theta, -tau / dir.dtau);
      if (dir.dkappa < 0.0) theta = std::min(theta, -kappa / dir.dkappa);
      return theta;
    };

    // Predictor.
    std::vector<Matrix> d_aff(nb);
    for (int b = 0; b < nb; ++b) {
      const Vector lam2 = -scratch[b].lambda.cwiseProduct(scratch[b].lambda);
      d_aff[b] = Matrix(lam2.asDiagonal());
    }
    Direction aff;
    if (!compute_direction(scratch, normal, u2, w_u2, hth, r_p, r_d, r_g, tau,
                           kappa, 1.0, d_aff, -tau * kappa, &aff))
      return degraded("predictor direction failed");
    const double theta_aff = std::min(1.0, step_limit(aff));
    const double mu_aff =
        ((s + theta_aff * aff.ds).dot(z + theta_aff * aff.dz) +
         (tau + theta_aff * aff.dtau) * (kappa + theta_aff * aff.dkappa)) /
        (cone_degree + 1.0);
    double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
    sigma = std::min(1.0, std::max(0.0, sigma));

    // Corrector.
    std::vector<Matrix> d_comb(nb);
    for (int b = 0; b < nb; ++b) {
      const auto& lam = scratch[b].lambda;
      const Matrix cross =
          0.5 * (aff.dst[b] * aff.dzt[b] + aff.dzt[b] * aff.dst[b]);
      d_comb[b] = Matrix(sigma * mu *
                             Matrix::Identity(blocks_[b].dim, blocks_[b].dim) -
                         Matrix(lam.cwiseProduct(lam).asDiagonal()) - cross);
    }
    const double d_tk_comb = sigma * mu - tau * kappa - aff.dtau * aff.dkappa;
    Direction dir;
    if (!compute_direction(scratch, normal, u2, w_u2, hth, r_p, r_d, r_g, tau,
                           kappa, 1.0 - sigma, d_comb, d_tk_comb, &dir))
      return degraded("corrector direction failed");
    const double theta = std::min(1.0, 0.98 * step_limit(dir));
    if (!(theta > 1e-13)) return degraded("step length collapsed");

    y += theta * dir.dy;
    s += theta * dir.ds;
    z += theta * dir.dz;
    tau += theta * dir.dtau;
    kappa += theta * dir.dkappa;
    last_step = theta;
    last_sigma = sigma;
  }
  return degraded("unreachable");
}

}  // namespace

SolveReport solve(const LmiProblem& problem, const SdpTolerances& tol) {
  HsdSolver solver(problem, tol);
  return solver.run();
}

}  // namespace nscm
