#include "nscm/mcvstem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>
#include <thread>

#include <Eigen/SVD>
#include <json.hpp>

#include "nscm/csv.hpp"
#include "nscm/rng.hpp"

namespace nscm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector effective_input(const SamplePoint& s, const SystemModel& model) {
  if (s.u_d.size() > 0) return s.u_d;
  return Vector::Zero(model.m);
}

void validate_config(const McvStemConfig& config, const SystemModel& model) {
  if (config.samples.empty()) throw ConfigError("metric sampling needs at least one sample");
  if (config.l_m < 0) throw ConfigError("metric derivative Lipschitz constant must be >= 0");
  if (config.weights.c3 < 0) throw ConfigError("objective weights must be nonnegative");
  if (config.weights.c3 > 0 && config.mode != MetricMode::Control)
    throw ConfigError("the quadratic effort cost applies to the control family only");
  if (config.mode == MetricMode::Basic && config.wdot.mode != WdotMode::Zero)
    throw ConfigError("the basic family uses a time-invariant metric");
  for (const auto& s : config.samples) {
    if (static_cast<int>(s.x.size()) != model.n ||
        static_cast<int>(s.partner.size()) != model.n)
      throw ConfigError("sample dimension does not match the model");
  }
}

ObjectiveWeights resolve_weights(const McvStemConfig& config,
                                 const BoundConstants& constants, double alpha) {
  ObjectiveWeights w = config.weights;
  if (w.c1 < 0 || w.c2 < 0) {
    const ObjectiveWeights derived = config.mode == MetricMode::Estimation
                                         ? estimation_weights(constants.c, constants.c2, alpha)
                                         : control_weights(constants.c, alpha);
    if (w.c1 < 0) w.c1 = derived.c1;
    if (w.c2 < 0) w.c2 = derived.c2;
  }
  return w;
}

// Coefficient of nu^2 in the control-effort cost sum_i ||B_i||^2 ||x_i||^2.
double effort_coefficient(const McvStemConfig& config, const SystemModel& model) {
  double k = 0.0;
  for (const auto& s : config.samples)
    k += model.B(s.x, s.t).squaredNorm() * s.x.squaredNorm();
  return k;
}

MetricSampleSet set_from_solution(const McvStemConfig& config, double alpha, double eps,
                                  const BoundConstants& constants, const Vector& y) {
  DecisionLayout layout;
  layout.n = static_cast<int>(config.samples[0].x.size());
  layout.num_samples = static_cast<int>(config.samples.size());
  layout.with_aux = config.mode == MetricMode::Estimation || config.weights.c3 > 0;

  MetricSampleSet set;
  set.mode = config.mode;
  set.nu = y[DecisionLayout::nu];
  set.nu_c = y[DecisionLayout::nu_c];
  set.chi = y[DecisionLayout::chi];
  set.alpha = alpha;
  set.eps = eps;
  set.l_m = config.l_m;
  set.bound = steady_state_bound(config.mode, constants, set.nu, set.chi, alpha);
  set.mbar = config.mode == MetricMode::Estimation ? set.chi / set.nu : set.nu;
  set.samples.reserve(config.samples.size());
  for (size_t i = 0; i < config.samples.size(); ++i) {
    const SamplePoint& p = config.samples[i];
    MetricSample s;
    s.x = p.x;
    s.partner = p.partner;
    s.u_d = p.u_d;
    s.t = p.t;
    s.wbar = vec_to_sym(y.segment(layout.wbar_offset(static_cast<int>(i)), layout.sym_dim()),
                        layout.n);
    s.metric = recover_metric(s.wbar, set.nu, config.mode);
    set.samples.push_back(std::move(s));
  }
  return set;
}

SampleResult solve_coupled(const McvStemConfig& config, const SystemModel& model,
                           double alpha, double eps) {
  const LmiProblem problem = assemble_problem(config, model, alpha, eps);
  const SolveReport report = solve(problem, config.sdp);
  SampleResult result;
  result.status = report.status;
  if (report.status != SolveStatus::Optimal) {
    std::ostringstream note;
    note << "(alpha=" << alpha << ", eps=" << eps << ") " << to_string(report.status);
    if (!report.note.empty()) note << ": " << report.note;
    result.note = note.str();
    return result;
  }
  const BoundConstants constants = bound_constants(config.mode, model.bounds, config.l_m, eps);
  result.set = set_from_solution(config, alpha, eps, constants, report.y);
  result.set.objective = report.objective;
  return result;
}

}  // namespace

const char* to_string(MetricMode mode) {
  switch (mode) {
    case MetricMode::Basic: return "basic";
    case MetricMode::Control: return "control";
    case MetricMode::Estimation: return "estimation";
  }
  return "?";
}

MetricMode metric_mode_from_name(const std::string& name) {
  if (name == "basic") return MetricMode::Basic;
  if (name == "control") return MetricMode::Control;
  if (name == "estimation") return MetricMode::Estimation;
  throw ConfigError("unknown metric mode: " + name);
}

BoundConstants bound_constants(MetricMode mode, double g_a, double g_b, double l_m,
                               double eps) {
  if (eps <= 0) throw ConfigError("disturbance attenuation parameter must be > 0");
  if (g_a < 0 || g_b < 0 || l_m < 0)
    throw ConfigError("disturbance bounds and the Lipschitz constant must be >= 0");
  const double drift = eps + 0.5;
  const double gain = 2.0 / eps + 1.0;
  BoundConstants k;
  switch (mode) {
    case MetricMode::Basic: {
      const double g2 = g_a * g_a + g_b * g_b;
      k.alpha_g = l_m * g2 * drift;
      k.c = g2 * gain;
      break;
    }
    case MetricMode::Control:
      k.alpha_g = l_m * g_a * g_a * drift;
      k.c = g_a * g_a * gain;
      break;
    case MetricMode::Estimation:
      k.alpha_g = l_m * g_a * g_a * drift;
      k.alpha_g2 = l_m * g_b * g_b * drift;
      k.c = g_a * g_a * gain;
      k.c2 = g_b * g_b * gain;
      break;
  }
  return k;
}

BoundConstants bound_constants(MetricMode mode, const ModelBounds& bounds, double l_m,
                               double eps) {
  switch (mode) {
    case MetricMode::Basic: return bound_constants(mode, bounds.g_c, bounds.g_c, l_m, eps);
    case MetricMode::Control: return bound_constants(mode, bounds.g_c, 0.0, l_m, eps);
    case MetricMode::Estimation:
      return bound_constants(mode, bounds.g_e, bounds.c_bar * bounds.d_bar, l_m, eps);
  }
  throw ConfigError("unknown metric mode");
}

ObjectiveWeights estimation_weights(double c_e1, double c_e2, double alpha) {
  if (alpha <= 0) throw ConfigError("contraction rate must be > 0");
  if (c_e1 < 0 || c_e2 < 0) throw ConfigError("disturbance constants must be >= 0");
  const double scale = std::cbrt(2.0 * alpha);
  ObjectiveWeights w;
  w.c1 = c_e1 > 0 ? std::sqrt(3.0 * c_e1) / scale : 0.0;
  w.c2 = std::sqrt(c_e2) / scale;
  w.c3 = 0.0;
  return w;
}

ObjectiveWeights control_weights(double c_c, double alpha) {
  if (alpha <= 0) throw ConfigError("contraction rate must be > 0");
  if (c_c < 0) throw ConfigError("disturbance constants must be >= 0");
  return {c_c / (2.0 * alpha), 0.0, 0.0};
}

std::vector<SamplePoint> draw_samples(const SystemModel& model, const StateBox& box,
                                      MetricMode mode, int count, uint64_t seed) {
  if (count <= 0) throw ConfigError("sample count must be positive");
  GaussianStream rng(seed, "metric-samples");
  std::vector<SamplePoint> samples;
  samples.reserve(count);
  for (int i = 0; i < count; ++i) {
    SamplePoint s;
    s.x = box.sample_state(rng);
    s.partner = mode == MetricMode::Basic ? s.x : box.sample_state(rng);
    s.u_d = Vector::Zero(model.m);
    s.t = box.param_dim() > 0 ? model.param_time(box.sample_params(rng)) : 0.0;
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid(10);
  for (int i = 0; i < 10; ++i) grid[i] = std::pow(10.0, -2.0 + 3.0 * i / 9.0);
  return grid;
}

std::vector<double> default_eps_grid() {
  std::vector<double> grid(10);
  for (int i = 0; i < 10; ++i) grid[i] = std::pow(10.0, -1.0 + 2.0 * i / 9.0);
  return grid;
}

LmiProblem assemble_problem(const McvStemConfig& config, const SystemModel& model,
                            double alpha, double eps) {
  validate_config(config, model);
  if (alpha <= 0) throw ConfigError("contraction rate must be > 0");
  const BoundConstants constants = bound_constants(config.mode, model.bounds, config.l_m, eps);
  const ObjectiveWeights weights = resolve_weights(config, constants, alpha);

  LmiProblem problem;
  problem.layout.n = model.n;
  problem.layout.num_samples = static_cast<int>(config.samples.size());
  problem.layout.with_aux = config.mode == MetricMode::Estimation || weights.c3 > 0;

  for (size_t i = 0; i < config.samples.size(); ++i) {
    const SamplePoint& s = config.samples[i];
    const int idx = static_cast<int>(i);
    std::vector<LmiBlock> blocks;
    switch (config.mode) {
      case MetricMode::Basic: {
        const Matrix A =
            sdc_factorize(model, s.x, s.x, effective_input(s, model), s.t).A;
        blocks = build_basic_contraction_blocks(problem.layout, A, alpha,
                                                constants.alpha_g, idx);
        break;
      }
      case MetricMode::Control: {
        const Matrix A =
            sdc_factorize(model, s.x, s.partner, effective_input(s, model), s.t).A;
        const Matrix B = model.B(s.x, s.t);
        blocks = build_control_blocks(problem.layout, A, B, alpha, constants.alpha_g,
                                      config.wdot, idx);
        break;
      }
      case MetricMode::Estimation: {
        const Matrix A =
            sdc_factorize(model, s.x, s.partner, Vector::Zero(model.m), s.t).A;
        const Matrix C = sdc_measurement_factorize(model, s.x, s.partner, s.t).A;
        const Matrix C_L = sdc_measurement_factorize(model, s.x, s.x, s.t).A;
        blocks = build_estimation_blocks(problem.layout, A, C, C_L, alpha,
                                         constants.alpha_g, constants.alpha_g2,
                                         config.wdot, idx);
        break;
      }
    }
    for (auto& b : blocks) problem.blocks.push_back(std::move(b));
  }

  // A basic-family problem without the Lipschitz border never references nu;
  // leaving out its sign block lets the solver pin the unused scale to zero.
  const bool nu_used = config.mode != MetricMode::Basic || constants.alpha_g > 0;
  for (auto& b : scalar_positivity_blocks(problem.layout,
                                          config.mode == MetricMode::Estimation))
    if (nu_used || b.label != "nu_pos") problem.blocks.push_back(std::move(b));
  if (config.mode == MetricMode::Estimation) {
    for (auto& b : nu_cubed_cone_blocks(problem.layout)) problem.blocks.push_back(std::move(b));
  } else if (weights.c3 > 0) {
    for (auto& b : nu_cubed_cone_blocks(problem.layout))
      if (b.label == "cone_sq") problem.blocks.push_back(std::move(b));
  }

  problem.objective = Vector::Zero(problem.layout.size());
  problem.objective[DecisionLayout::chi] = weights.c1;
  problem.objective[DecisionLayout::nu] = weights.c2;
  if (weights.c3 > 0)
    problem.objective[problem.layout.aux_index()] =
        weights.c3 * effort_coefficient(config, model);
  return problem;
}

SampleResult sample_metrics(const McvStemConfig& config, const SystemModel& model,
                            double alpha, double eps) {
  validate_config(config, model);
  const int total = static_cast<int>(config.samples.size());
  if (config.chunk_size <= 0 || config.chunk_size >= total)
    return solve_coupled(config, model, alpha, eps);

  const BoundConstants constants = bound_constants(config.mode, model.bounds, config.l_m, eps);
  const ObjectiveWeights weights = resolve_weights(config, constants, alpha);
  std::vector<MetricSampleSet> parts;
  McvStemConfig chunk = config;
  chunk.chunk_size = 0;
  for (int begin = 0; begin < total; begin += config.chunk_size) {
    const int end = std::min(total, begin + config.chunk_size);
    chunk.samples.assign(config.samples.begin() + begin, config.samples.begin() + end);
    SampleResult part = solve_coupled(chunk, model, alpha, eps);
    if (part.status != SolveStatus::Optimal) {
      part.note = "chunk " + std::to_string(begin / config.chunk_size) + " " + part.note;
      return part;
    }
    parts.push_back(std::move(part.set));
  }

  // Each chunk certifies its own scale nu_i. The merged scalars must cover
  // the whole metric field, so nu is the largest upper eigenvalue and chi the
  // ratio of the global range; renormalizing each chunk's Wbar onto the
  // merged nu keeps wbar / nu equal to the chunk-certified target.
  MetricSampleSet merged;
  merged.mode = config.mode;
  merged.alpha = alpha;
  merged.eps = eps;
  merged.l_m = config.l_m;
  double metric_low = kInf;
  for (const MetricSampleSet& part : parts) {
    merged.nu = std::max(merged.nu, part.nu);
    merged.nu_c = std::max(merged.nu_c, part.nu_c);
    merged.mbar = std::max(merged.mbar, part.mbar);
    metric_low = std::min(metric_low, part.nu / part.chi);
  }
  merged.chi = merged.nu / metric_low;
  for (MetricSampleSet& part : parts) {
    const double scale = merged.nu / part.nu;
    for (auto& s : part.samples) {
      s.wbar *= scale;
      merged.samples.push_back(std::move(s));
    }
  }
  merged.objective = weights.c1 * merged.chi + weights.c2 * merged.nu +
                     weights.c3 * effort_coefficient(config, model) * merged.nu * merged.nu;
  merged.bound = steady_state_bound(config.mode, constants, merged.nu, merged.chi, alpha);
  SampleResult result;
  result.status = SolveStatus::Optimal;
  result.set = std::move(merged);
  return result;
}

LineSearchResult line_search(const McvStemConfig& config, const SystemModel& model) {
  if (config.alphas.empty() || config.epsilons.empty())
    throw ConfigError("the (alpha, eps) search grid must be nonempty");
  validate_config(config, model);

  const int na = static_cast<int>(config.alphas.size());
  const int ne = static_cast<int>(config.epsilons.size());
  const int total = na * ne;
  std::vector<SampleResult> results(total);
  const int workers = std::max(1, std::min(total, static_cast<int>(
                                               std::thread::hardware_concurrency())));
  std::vector<std::future<void>> futures;
  futures.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&, w]() {
      for (int idx = w; idx < total; idx += workers)
        results[idx] =
            sample_metrics(config, model, config.alphas[idx / ne], config.epsilons[idx % ne]);
    }));
  }
  for (auto& f : futures) f.get();

  LineSearchResult out;
  out.alphas = config.alphas;
  out.epsilons = config.epsilons;
  out.surface = Matrix::Constant(na, ne, kInf);
  int best = -1;
  for (int idx = 0; idx < total; ++idx) {
    if (results[idx].status != SolveStatus::Optimal) continue;
    const double j = results[idx].set.objective;
    out.surface(idx / ne, idx % ne) = j;
    if (best < 0) {
      best = idx;
      continue;
    }
    const MetricSampleSet& champ = results[best].set;
    const MetricSampleSet& cand = results[idx].set;
    const bool better =
        j < champ.objective ||
        (j == champ.objective && (cand.alpha < champ.alpha ||
                                  (cand.alpha == champ.alpha && cand.eps < champ.eps)));
    if (better) best = idx;
  }
  if (best < 0) throw EvaluationError("no feasible metric over the (alpha, eps) grid");
  out.best = std::move(results[best].set);
  return out;
}

Matrix recover_metric(const Matrix& wbar, double nu, MetricMode) {
  if (nu < 0) throw EvaluationError("metric scale nu must be >= 0");
  const Matrix inv = wbar.inverse();
  return 0.5 * nu * (inv + inv.transpose());
}

Matrix nn_target(const Matrix& wbar, double nu, MetricMode mode) {
  if (mode == MetricMode::Estimation) {
    if (nu <= 0) throw EvaluationError("metric scale nu must be > 0");
    return wbar / nu;
  }
  return recover_metric(wbar, nu, mode);
}

double steady_state_bound(MetricMode mode, const BoundConstants& constants, double nu,
                          double chi, double alpha) {
  if (alpha <= 0) throw ConfigError("contraction rate must be > 0");
  if (mode == MetricMode::Estimation)
    return (constants.c * chi + constants.c2 * chi * nu * nu) / (2.0 * alpha);
  return constants.c * chi / (2.0 * alpha);
}

double fd_derivative_lipschitz(const std::vector<Vector>& xs,
                               const std::vector<Matrix>& fields) {
  if (xs.size() != fields.size())
    throw EvaluationError("state and field sample counts differ");
  const int n = static_cast<int>(xs.size());
  if (n < 3) return 0.0;
  constexpr double kTiny = 1e-12;
  std::vector<Matrix> slopes;
  std::vector<Vector> anchors;
  for (int i = 0; i < n; ++i) {
    int nb = -1;
    double dist = kInf;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = (xs[i] - xs[j]).norm();
      if (d > kTiny && d < dist) {
        dist = d;
        nb = j;
      }
    }
    if (nb < 0) continue;
    // Orient every difference quotient the same way (largest step component
    // positive) so that collinear slopes are comparable, and anchor it at the
    // segment midpoint where the quotient approximates the derivative.
    Vector step = xs[i] - xs[nb];
    int lead = 0;
    step.cwiseAbs().maxCoeff(&lead);
    const double sign = step[lead] >= 0 ? 1.0 : -1.0;
    slopes.push_back(sign / dist * (fields[i] - fields[nb]));
    anchors.push_back(0.5 * (xs[i] + xs[nb]));
  }
  double lip = 0.0;
  for (size_t a = 0; a < slopes.size(); ++a) {
    for (size_t b = a + 1; b < slopes.size(); ++b) {
      const double d = (anchors[a] - anchors[b]).norm();
      if (d <= kTiny) continue;
      lip = std::max(lip, (slopes[a] - slopes[b]).norm() / d);
    }
  }
  return lip;
}

double estimate_lm(const McvStemConfig& config, const SystemModel& model) {
  McvStemConfig flat = config;
  flat.l_m = 0.0;
  const LineSearchResult pre = line_search(flat, model);
  std::vector<Vector> xs;
  std::vector<Matrix> fields;
  xs.reserve(pre.best.samples.size());
  fields.reserve(pre.best.samples.size());
  for (const auto& s : pre.best.samples) {
    xs.push_back(s.x);
    fields.push_back(config.mode == MetricMode::Estimation ? Matrix(s.metric.inverse())
                                                           : s.metric);
  }
  return 2.0 * fd_derivative_lipschitz(xs, fields);
}

double estimate_cbar(const SystemModel& model, const StateBox& box, uint64_t seed,
                     int num_pairs) {
  GaussianStream rng(seed, "cbar-pairs");
  double worst = 0.0;
  for (int i = 0; i < num_pairs; ++i) {
    const Vector x = box.sample_state(rng);
    const Vector xhat = box.sample_state(rng);
    const double t = box.param_dim() > 0 ? model.param_time(box.sample_params(rng)) : 0.0;
    const Matrix C = sdc_measurement_factorize(model, x, xhat, t).A;
    worst = std::max(worst, C.jacobiSvd().singularValues()(0));
  }
  return 1.1 * worst;
}

void write_sample_set(const MetricSampleSet& set, const std::string& csv_path,
                      const std::string& meta_path) {
  if (set.samples.empty()) throw EvaluationError("refusing to persist an empty sample set");
  const int n = static_cast<int>(set.samples[0].x.size());
  const int m = static_cast<int>(set.samples[0].u_d.size());

  nlohmann::json meta;
  meta["mode"] = to_string(set.mode);
  meta["n"] = n;
  meta["m"] = m;
  meta["num_samples"] = set.samples.size();
  meta["nu"] = set.nu;
  meta["nu_c"] = set.nu_c;
  meta["chi"] = set.chi;
  meta["alpha"] = set.alpha;
  meta["eps"] = set.eps;
  meta["l_m"] = set.l_m;
  meta["objective"] = set.objective;
  meta["bound"] = set.bound;
  meta["mbar"] = set.mbar;
  std::ofstream meta_out(meta_path);
  if (!meta_out) throw Error("cannot open output file: " + meta_path);
  meta_out << meta.dump(2) << '\n';

  CsvWriter csv(csv_path);
  std::vector<std::string> names;
  names.push_back("t");
  for (int i = 0; i < n; ++i) names.push_back("x" + std::to_string(i));
  for (int i = 0; i < n; ++i) names.push_back("xd" + std::to_string(i));
  for (int i = 0; i < m; ++i) names.push_back("ud" + std::to_string(i));
  for (int r = 0; r < n; ++r)
    for (int c = r; c < n; ++c)
      names.push_back("w" + std::to_string(r) + std::to_string(c));
  csv.header(names);
  std::vector<double> row;
  for (const auto& s : set.samples) {
    row.clear();
    row.push_back(s.t);
    for (int i = 0; i < n; ++i) row.push_back(s.x[i]);
    for (int i = 0; i < n; ++i) row.push_back(s.partner[i]);
    for (int i = 0; i < m; ++i) row.push_back(s.u_d[i]);
    for (int r = 0; r < n; ++r)
      for (int c = r; c < n; ++c) row.push_back(s.wbar(r, c));
    csv.row(row);
  }
}

MetricSampleSet read_sample_set(const std::string& csv_path, const std::string& meta_path) {
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw Error("cannot open input file: " + meta_path);
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed sample-set metadata: " + std::string(e.what()));
  }

  MetricSampleSet set;
  int n = 0, m = 0;
  size_t count = 0;
  try {
    set.mode = metric_mode_from_name(meta.at("mode").get<std::string>());
    n = meta.at("n").get<int>();
    m = meta.at("m").get<int>();
    count = meta.at("num_samples").get<size_t>();
    set.nu = meta.at("nu").get<double>();
    set.nu_c = meta.at("nu_c").get<double>();
    set.chi = meta.at("chi").get<double>();
    set.alpha = meta.at("alpha").get<double>();
    set.eps = meta.at("eps").get<double>();
    set.l_m = meta.at("l_m").get<double>();
    set.objective = meta.at("objective").get<double>();
    set.bound = meta.at("bound").get<double>();
    set.mbar = meta.at("mbar").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("incomplete sample-set metadata: " + std::string(e.what()));
  }

  std::ifstream csv(csv_path);
  if (!csv) throw Error("cannot open input file: " + csv_path);
  std::string line;
  if (!std::getline(csv, line)) throw ConfigError("sample-set csv is empty");
  const size_t expected = 1 + 2 * static_cast<size_t>(n) + m + n * (n + 1) / 2;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
    if (cells.size() != expected)
      throw ConfigError("sample-set csv row has the wrong number of columns");
    MetricSample s;
    size_t at = 0;
    s.t = cells[at++];
    s.x = Vector(n);
    for (int i = 0; i < n; ++i) s.x[i] = cells[at++];
    s.partner = Vector(n);
    for (int i = 0; i < n; ++i) s.partner[i] = cells[at++];
    s.u_d = Vector(m);
    for (int i = 0; i < m; ++i) s.u_d[i] = cells[at++];
    s.wbar = Matrix(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = r; c < n; ++c) {
        s.wbar(r, c) = cells[at];
        s.wbar(c, r) = cells[at];
        ++at;
      }
    s.metric = recover_metric(s.wbar, set.nu, set.mode);
    set.samples.push_back(std::move(s));
  }
  if (set.samples.size() != count)
    throw ConfigError("sample-set csv row count does not match the metadata");
  return set;
}

void write_jsurface(const LineSearchResult& result, const std::string& path) {
  CsvWriter csv(path);
  std::vector<std::string> names;
  names.push_back("alpha");
  for (double e : result.epsilons) {
    std::ostringstream label;
    label.precision(12);
    label << "eps=" << e;
    names.push_back(label.str());
  }
  csv.header(names);
  std::vector<double> row;
  for (int i = 0; i < result.surface.rows(); ++i) {
    row.clear();
    row.push_back(result.alphas[i]);
    for (int j = 0; j < result.surface.cols(); ++j) row.push_back(result.surface(i, j));
    csv.row(row);
  }
}

}  // namespace nscm
