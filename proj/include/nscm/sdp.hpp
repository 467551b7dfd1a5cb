#pragma once

#include <limits>
#include <string>
#include <vector>

#include <nscm/lmi.hpp>

namespace nscm {

struct SdpTolerances {
  // Largest admissible block eigenvalue at the returned point.
  double feasibility = 1e-8;
  // Relative duality gap required to declare optimality.
  double relative_gap = 1e-6;
  int max_iterations = 200;
  // When non-empty, per-iteration progress is appended to this CSV file.
  std::string iteration_log;
  // Debugging aid: skip the structured normal-equations elimination.
  bool force_dense = false;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIterations, Degraded };

const char* to_string(SolveStatus status);

struct SolveReport {
  SolveStatus status = SolveStatus::Degraded;
  // Normalized primal point (empty when a certificate ended the solve).
  Vector y;
  double objective = std::numeric_limits<double>::quiet_NaN();
  // Largest block eigenvalue of y against the original problem data.
  double worst_margin = std::numeric_limits<double>::infinity();
  int iterations = 0;
  // Complementarity gap of the normalized point.
  double gap = std::numeric_limits<double>::infinity();
  // Human-readable detail for non-optimal outcomes.
  std::string note;
};

// Interior-point solve of min objective^T y over the problem's negative
// semidefinite blocks. Self-contained: homogeneous self-dual embedding with
// Nesterov-Todd scaling and a Mehrotra predictor-corrector, dense per-block
// linear algebra, and a normal-equations system that exploits the
// core-plus-per-sample arrow structure of metric sampling programs.
// Deterministic: no randomness, identical inputs give identical reports.
SolveReport solve(const LmiProblem& problem, const SdpTolerances& tol = {});

struct FeasibilityReport {
  // Largest eigenvalue of each block at the point, in problem block order.
  std::vector<double> margins;
  double worst = -std::numeric_limits<double>::infinity();
  int worst_block = -1;
  bool feasible(double tol) const { return worst <= tol; }
};

FeasibilityReport check_feasibility(const LmiProblem& problem,
                                    const Vector& point);

}  // namespace nscm
