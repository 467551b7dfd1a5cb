#include "nscm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nscm/lmi.hpp"
#include "nscm/rng.hpp"
#include "nscm/rocket.hpp"
#include "nscm/sdp.hpp"

namespace nscm {

namespace {

namespace fs = std::filesystem;

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is not configured");
  if (!fs::exists(path)) throw ConfigError(what + " not found: " + path);
}

std::string resolve_under(const std::string& base, const std::string& value) {
  const fs::path p(value);
  if (p.is_absolute() || base.empty()) return p.lexically_normal().string();
  return (fs::path(base) / p).lexically_normal().string();
}

// Creates the parent directory so artifact writers never fail on a fresh
// output tree.
const std::string& prepare(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  return path;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) {
    const auto begin = token.find_first_not_of(" \t");
    if (begin == std::string::npos) continue;
    const auto end = token.find_last_not_of(" \t");
    const std::string item = token.substr(begin, end - begin + 1);
    try {
      size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad grid override value: " + item);
    }
  }
  return values;
}

void apply_grid_override(McvStemConfig& search, const std::string& grid) {
  const auto split = grid.find(';');
  const std::vector<double> alphas = parse_number_list(grid.substr(0, split));
  const std::vector<double> epsilons =
      split == std::string::npos ? std::vector<double>{}
                                 : parse_number_list(grid.substr(split + 1));
  if (!alphas.empty()) search.alphas = alphas;
  if (!epsilons.empty()) search.epsilons = epsilons;
}

struct CheckRow {
  std::string name;
  bool pass = true;
  nlohmann::json details;
};

void report_check(const CheckRow& row) {
  std::cout << (row.pass ? "[ ok ] " : "[FAIL] ") << row.name;
  for (const auto& [key, value] : row.details.items())
    std::cout << ' ' << key << '=' << value.dump();
  std::cout << '\n';
}

// Steady second moment of the gap between two independently driven copies of
// dx = -x dt + g dW, against the closed form g^2 and the certified bounds.
CheckRow diffusion_oracle(uint64_t seed, int runs) {
  const double g = 0.1;
  SystemModel ou;
  ou.n = 1;
  ou.dc = 1;
  ou.f = [](const Vector& x, double) {
    Vector r(1);
    r[0] = -x[0];
    return r;
  };
  ou.Gc = [g](const Vector&, double) { return Matrix::Constant(1, 1, g); };
  ou.bounds.g_c = g;

  const double horizon = 10.0;
  const double dt = 1e-3;
  const int steps = static_cast<int>(std::llround(horizon / dt));
  const int window = steps / 2;
  double acc = 0.0;
  long count = 0;
  for (int r = 0; r < runs; ++r) {
    const SdePath a = euler_maruyama(ou, ControlLaw(), Vector::Zero(1), horizon, dt,
                                     substream_seed(seed, "pair-a", r));
    const SdePath b = euler_maruyama(ou, ControlLaw(), Vector::Zero(1), horizon, dt,
                                     substream_seed(seed, "pair-b", r));
    for (int k = window; k <= steps; ++k) {
      const double gap = a.states[k][0] - b.states[k][0];
      acc += gap * gap;
      ++count;
    }
  }
  const double mean = acc / static_cast<double>(count);
  const double expected = g * g;

  CheckRow row{"diffusion-oracle", true, {}};
  row.details["mean_square"] = mean;
  row.details["expected"] = expected;
  row.details["relative_error"] = std::abs(mean / expected - 1.0);
  row.details["runs"] = runs;
  row.pass = std::abs(mean / expected - 1.0) <= 0.05;
  auto bounds = nlohmann::json::array();
  for (const double eps : {0.5, 1.0, 10.0}) {
    const double bound = steady_state_bound(
        MetricMode::Basic, bound_constants(MetricMode::Basic, g, g, 0.0, eps), 1.0, 1.0,
        1.0);
    bounds.push_back(bound);
    row.pass = row.pass && mean <= bound;
  }
  row.details["bounds"] = bounds;
  return row;
}

PolicyRole comparison_role(MetricMode mode) {
  switch (mode) {
    case MetricMode::Control: return PolicyRole::Controller;
    case MetricMode::Estimation: return PolicyRole::Estimator;
    case MetricMode::Basic: break;
  }
  throw ConfigError("policy comparison needs a control or estimation metric");
}

}  // namespace

SystemModel scalar_benchmark(const Config& cfg) {
  const double a = cfg.number("scalar.a", 0.5);
  const double b = cfg.number("scalar.b", -1.0);
  const double c = cfg.number("scalar.c", 1.0);
  const double gc = cfg.number("scalar.g_c", 0.1);
  const double ge = cfg.number("scalar.g_e", 0.1);
  const double d = cfg.number("scalar.d", 0.1);

  SystemModel model;
  model.n = 1;
  model.m = 1;
  model.ny = 1;
  model.dc = 1;
  model.d1 = 1;
  model.d2 = 1;
  model.f = [a, b](const Vector& x, double) {
    Vector r(1);
    r[0] = a * x[0] + b * x[0] * x[0] * x[0];
    return r;
  };
  model.B = [](const Vector&, double) { return Matrix::Identity(1, 1); };
  model.Gc = [gc](const Vector&, double) { return Matrix::Constant(1, 1, gc); };
  model.Ge = [ge](const Vector&, double) { return Matrix::Constant(1, 1, ge); };
  model.h = [c](const Vector& x, double) {
    Vector r(1);
    r[0] = c * x[0];
    return r;
  };
  model.D = [d](const Vector&, double) { return Matrix::Constant(1, 1, d); };
  model.f_jac = [a, b](const Vector& x, double) {
    return Matrix::Constant(1, 1, a + 3.0 * b * x[0] * x[0]);
  };
  model.h_jac = [c](const Vector&, double) { return Matrix::Constant(1, 1, c); };
  model.bounds.g_c = gc;
  model.bounds.g_e = ge;
  model.bounds.d_bar = d;
  model.bounds.c_bar = std::abs(c);
  return model;
}

StateBox scalar_box(const Config& cfg) {
  const double lo = cfg.number("scalar.lo", -1.0);
  const double hi = cfg.number("scalar.hi", 1.0);
  return StateBox(Vector::Constant(1, lo), Vector::Constant(1, hi));
}

PipelineConfig load_pipeline(const std::string& config_path,
                             const StageOverrides& overrides) {
  require_file(config_path, "pipeline config");
  const Config file = Config::from_file(config_path);

  PipelineConfig cfg;
  cfg.model_name = file.str("pipeline.model");
  cfg.mode = metric_mode_from_name(file.str("pipeline.mode"));
  cfg.out_dir = overrides.out.empty() ? file.str("pipeline.out") : overrides.out;
  cfg.seed = overrides.has_seed
                 ? overrides.seed
                 : static_cast<uint64_t>(file.integer("pipeline.seed", 0));
  cfg.emit_plots = overrides.emit_plots;

  if (cfg.model_name == "rocket") {
    const std::string coef =
        resolve_under(fs::path(config_path).parent_path().string(),
                      file.str("pipeline.coefficients"));
    require_file(coef, "coefficient file");
    const Config coefficients = Config::from_file(coef);
    cfg.model = rocket_benchmark(coefficients);
    cfg.box = rocket_box(coefficients);
    cfg.model.bounds.c_bar =
        estimate_cbar(cfg.model, cfg.box, substream_seed(cfg.seed, "cbar"), 1000);
  } else if (cfg.model_name == "scalar") {
    cfg.model = scalar_benchmark(file);
    cfg.box = scalar_box(file);
  } else {
    throw ConfigError("unknown model: " + cfg.model_name + " (rocket | scalar)");
  }

  cfg.search.mode = cfg.mode;
  cfg.lm_request = file.number("mcvstem.l_m", -1.0);
  cfg.search.l_m = std::max(cfg.lm_request, 0.0);
  cfg.search.weights.c3 = file.number("mcvstem.c3", 0.0);
  cfg.search.chunk_size = static_cast<int>(file.integer("mcvstem.chunk_size", 0));
  cfg.search.alphas =
      file.has("mcvstem.alphas") ? file.numbers("mcvstem.alphas") : default_alpha_grid();
  cfg.search.epsilons = file.has("mcvstem.epsilons") ? file.numbers("mcvstem.epsilons")
                                                     : default_eps_grid();
  if (!overrides.grid.empty()) apply_grid_override(cfg.search, overrides.grid);
  cfg.num_samples = static_cast<int>(file.integer("mcvstem.num_samples", 50));

  cfg.arch.hidden_layers = static_cast<int>(file.integer("network.hidden_layers", 3));
  cfg.arch.width = static_cast<int>(file.integer("network.width", 100));
  cfg.training.epochs = static_cast<int>(file.integer("network.epochs", 1000));
  cfg.training.batch = static_cast<int>(file.integer("network.batch", 64));
  cfg.training.learning_rate = file.number("network.learning_rate", 1e-3);
  cfg.training.momentum = file.number("network.momentum", 0.9);
  cfg.training.decay_every = static_cast<int>(file.integer("network.decay_every", 200));
  cfg.training.test_fraction = file.number("network.test_fraction", 0.2);
  cfg.training.early_stop = file.number("network.early_stop", 0.10);
  cfg.training.c_max = file.number("network.c_max", 10.0);
  cfg.training.seed = substream_seed(cfg.seed, "train");
  cfg.error_target = file.number("network.target", 0.0);

  cfg.experiment.horizon = file.number("experiment.horizon", 10.0);
  cfg.experiment.dt = file.number("experiment.dt", 1e-3);
  cfg.experiment.runs = static_cast<int>(file.integer("experiment.runs", 50));
  cfg.experiment.blow_up = file.number("experiment.blow_up", 1e6);
  cfg.experiment.seed = substream_seed(cfg.seed, "experiment");
  cfg.experiment.x0 =
      file.has("experiment.x0") ? file.vector("experiment.x0") : Vector::Zero(cfg.model.n);
  if (file.has("experiment.xhat0")) cfg.experiment.xhat0 = file.vector("experiment.xhat0");
  if (file.has("experiment.x_d")) {
    const Vector xd = file.vector("experiment.x_d");
    cfg.experiment.x_d = [xd](double) { return xd; };
  }
  if (file.has("experiment.u_d")) {
    const Vector ud = file.vector("experiment.u_d");
    cfg.experiment.u_d = [ud](double) { return ud; };
  }
  if (!overrides.policies.empty()) {
    cfg.policies = overrides.policies;
  } else if (file.has("experiment.policies")) {
    cfg.policies = file.strings("experiment.policies");
  } else if (cfg.mode == MetricMode::Control) {
    cfg.policies = {"nscm-net", "metric-table", "sdre"};
  } else {
    cfg.policies = {"nscm-net", "metric-table", "ekf", "sdre"};
  }

  cfg.lipschitz_pairs = static_cast<int>(file.integer("verify.lipschitz_pairs", 1000));
  cfg.predict_samples = static_cast<int>(file.integer("verify.predict_samples", 10000));
  cfg.ou_runs = static_cast<int>(file.integer("verify.ou_runs", 900));

  const auto art = [&](const char* key, const char* fallback) {
    return resolve_under(cfg.out_dir, file.str(std::string("artifacts.") + key, fallback));
  };
  cfg.samples_csv = art("samples", "samples.csv");
  cfg.samples_meta = art("samples_meta", "samples_meta.json");
  cfg.jsurface_csv = art("jsurface", "jsurface.csv");
  cfg.checkpoint = art("checkpoint", "net.ckpt");
  cfg.curves_csv = art("curves", "curves.csv");
  cfg.comparison_csv = art("comparison", "comparison.csv");
  cfg.comparison_json = art("comparison_json", "comparison.json");
  cfg.trace_prefix = art("trace_prefix", "trace_");
  cfg.verify_json = art("verify", "verify.json");
  const auto optional_art = [&](const char* key) {
    const std::string full = std::string("artifacts.") + key;
    return file.has(full) ? resolve_under(cfg.out_dir, file.str(full)) : std::string();
  };
  cfg.ncm_samples_csv = optional_art("ncm_samples");
  cfg.ncm_samples_meta = optional_art("ncm_samples_meta");
  cfg.ncm_checkpoint = optional_art("ncm_checkpoint");
  return cfg;
}

void run_sample(const PipelineConfig& cfg) {
  McvStemConfig search = cfg.search;
  search.samples = draw_samples(cfg.model, cfg.box, cfg.mode, cfg.num_samples,
                                substream_seed(cfg.seed, "sample-draw"));
  std::cout << "sampling " << search.samples.size() << " points, model=" << cfg.model_name
            << " mode=" << to_string(cfg.mode) << '\n';
  if (cfg.lm_request < 0.0) {
    search.l_m = estimate_lm(search, cfg.model);
    std::cout << "estimated derivative budget l_m=" << search.l_m << '\n';
  }

  const LineSearchResult result = line_search(search, cfg.model);
  int certified = 0;
  for (int i = 0; i < result.surface.rows(); ++i)
    for (int j = 0; j < result.surface.cols(); ++j)
      if (std::isfinite(result.surface(i, j))) ++certified;
  std::cout << "grid: " << result.alphas.size() << " alphas x " << result.epsilons.size()
            << " epsilons, " << certified << " certified\n";
  std::cout << "alpha*=" << result.best.alpha << " eps*=" << result.best.eps
            << " J*=" << result.best.objective << '\n';
  std::cout << "nu=" << result.best.nu << " chi=" << result.best.chi
            << " bound=" << result.best.bound << " mbar=" << result.best.mbar
            << " l_m=" << result.best.l_m << '\n';

  write_sample_set(result.best, prepare(cfg.samples_csv), prepare(cfg.samples_meta));
  write_jsurface(result, prepare(cfg.jsurface_csv));
  std::cout << "wrote " << cfg.samples_csv << ", " << cfg.samples_meta << ", "
            << cfg.jsurface_csv << '\n';
}

void run_train(const PipelineConfig& cfg) {
  require_file(cfg.samples_csv, "sample set (run the sample stage first)");
  require_file(cfg.samples_meta, "sample metadata (run the sample stage first)");
  const MetricSampleSet set = read_sample_set(cfg.samples_csv, cfg.samples_meta);

  const TrainingResult result = train(set, cfg.model, cfg.arch, cfg.training);
  save_checkpoint(result.net, prepare(cfg.checkpoint));
  write_training_curves(result, prepare(cfg.curves_csv));

  std::cout << "status=" << to_string(result.status) << " epochs=" << result.epochs_run
            << " c_nn=" << result.net.c_nn << '\n';
  std::cout << "test_mse=" << result.final_test_mse
            << " relative_error=" << result.final_test_relative;
  if (cfg.error_target > 0.0) std::cout << " target=" << cfg.error_target;
  std::cout << '\n';
  std::cout << "wrote " << cfg.checkpoint << ", " << cfg.curves_csv << '\n';

  if (result.status == TrainStatus::Diverged)
    throw TrainingError("training diverged; the checkpoint holds the last finite weights");
}

bool run_verify(const PipelineConfig& cfg) {
  require_file(cfg.samples_csv, "sample set (run the sample stage first)");
  require_file(cfg.samples_meta, "sample metadata (run the sample stage first)");
  require_file(cfg.checkpoint, "network checkpoint (run the train stage first)");
  const MetricSampleSet set = read_sample_set(cfg.samples_csv, cfg.samples_meta);
  const SnMlp net = load_checkpoint(cfg.checkpoint);

  std::vector<CheckRow> checks;

  {
    CheckRow row{"model-bounds", true, {}};
    try {
      validate_bounds(cfg.model, cfg.box, substream_seed(cfg.seed, "verify-bounds"));
    } catch (const Error& e) {
      row.pass = false;
      row.details["error"] = e.what();
    }
    checks.push_back(std::move(row));
  }

  {
    // The checkpoint must carry exactly the normalization its stored budget
    // admits; a tampered header shows up as either a constant above the
    // certificate or hidden norms away from it.
    CheckRow row{"spectral-norms", true, {}};
    row.details["c_nn"] = net.c_nn;
    try {
      const double certified =
          set.l_m > 0.0
              ? compute_sn_constant(set.mbar, set.l_m, net.hidden_layers(), cfg.training.c_max)
              : cfg.training.c_max;
      row.details["certified"] = certified;
      double worst = 0.0;
      for (int l = 0; l < net.hidden_layers(); ++l)
        worst = std::max(worst, std::abs(spectral_norm(net.effective[l]) - net.c_nn));
      row.details["worst_deviation"] = worst;
      row.pass = !net.degenerate && worst <= 1e-6 && net.c_nn <= certified + 1e-9 &&
                 std::abs(net.m_bar - set.mbar) <= 1e-9 * std::max(1.0, set.mbar);
    } catch (const CertificateError& e) {
      row.pass = false;
      row.details["error"] = e.what();
    }
    checks.push_back(std::move(row));
  }

  {
    CheckRow row{"prediction-cap", true, {}};
    GaussianStream rng(substream_seed(cfg.seed, "verify-predict"), "draw");
    double worst = 0.0;
    for (int i = 0; i < cfg.predict_samples; ++i) {
      const Vector x = cfg.box.sample_state(rng);
      const Vector params =
          cfg.box.param_dim() > 0 ? cfg.box.sample_params(rng) : Vector();
      worst = std::max(worst, spectral_norm(predict_metric(net, x, params)));
    }
    row.details["worst_norm"] = worst;
    row.details["m_bar"] = net.m_bar;
    row.pass = worst <= net.m_bar + 1e-9;
    checks.push_back(std::move(row));
  }

  {
    CheckRow row{"derivative-lipschitz", true, {}};
    const LipschitzReport rep = verify_lipschitz(
        net, cfg.box, set.l_m, substream_seed(cfg.seed, "verify-pairs"), cfg.lipschitz_pairs);
    row.details["measured"] = rep.measured;
    row.details["l_m"] = rep.l_m;
    row.details["slope"] = rep.slope;
    row.details["slope_bound"] = rep.slope_bound;
    row.details["pairs"] = rep.pairs;
    row.pass = rep.slope <= rep.slope_bound * 1.01;
    if (set.l_m > 0.0) row.pass = row.pass && rep.pass;
    checks.push_back(std::move(row));
  }

  {
    CheckRow row{"metric-feasibility", true, {}};
    McvStemConfig check = cfg.search;
    check.l_m = set.l_m;
    check.samples.clear();
    for (const MetricSample& s : set.samples)
      check.samples.push_back(SamplePoint{s.x, s.partner, s.u_d, s.t});
    const LmiProblem problem = assemble_problem(check, cfg.model, set.alpha, set.eps);
    Vector point = Vector::Zero(problem.layout.size());
    point[DecisionLayout::nu] = set.nu;
    point[DecisionLayout::nu_c] = set.nu_c;
    point[DecisionLayout::chi] = set.chi;
    for (int i = 0; i < problem.layout.num_samples; ++i)
      point.segment(problem.layout.wbar_offset(i), problem.layout.sym_dim()) =
          sym_to_vec(set.samples[static_cast<size_t>(i)].wbar);
    if (problem.layout.with_aux) point[problem.layout.aux_index()] = set.nu * set.nu;
    double tolerance = cfg.search.sdp.feasibility;
    if (cfg.search.chunk_size > 0 && set.mode == MetricMode::Estimation && set.l_m > 0.0) {
      // Grouped solves certify each group at its own scale; the stored
      // worst-case nu_c can exceed a group's rescaled value by this much.
      const BoundConstants constants =
          bound_constants(set.mode, cfg.model.bounds, set.l_m, set.eps);
      tolerance += constants.alpha_g2 *
                   std::max(0.0, set.nu_c - std::pow(set.nu, 3) / (set.chi * set.chi));
    }
    const FeasibilityReport feas = check_feasibility(problem, point);
    row.details["worst_margin"] = feas.worst;
    row.details["tolerance"] = tolerance;
    row.details["samples"] = set.samples.size();
    row.pass = feas.feasible(tolerance);
    checks.push_back(std::move(row));
  }

  checks.push_back(diffusion_oracle(substream_seed(cfg.seed, "verify-ou"), cfg.ou_runs));

  bool all = true;
  nlohmann::json doc;
  doc["checks"] = nlohmann::json::array();
  for (const CheckRow& row : checks) {
    report_check(row);
    all = all && row.pass;
    nlohmann::json entry = row.details;
    entry["name"] = row.name;
    entry["pass"] = row.pass;
    doc["checks"].push_back(std::move(entry));
  }
  doc["passed"] = all;
  std::ofstream out(prepare(cfg.verify_json));
  if (!out) throw Error("cannot open output file: " + cfg.verify_json);
  out << doc.dump(2) << '\n';
  std::cout << (all ? "all checks passed" : "verification failed") << ", wrote "
            << cfg.verify_json << '\n';
  return all;
}

void run_compare(const PipelineConfig& cfg, bool first_policy_only) {
  std::vector<std::string> names = cfg.policies;
  if (names.empty()) throw ConfigError("no policies configured");
  if (first_policy_only && names.size() > 1) names.resize(1);
  const PolicyRole role = comparison_role(cfg.mode);

  // Specs hold pointers; deques keep them stable while more load.
  std::deque<SnMlp> nets;
  std::deque<MetricTable> tables;
  MetricSampleSet set;
  bool have_set = false;
  const auto main_set = [&]() -> const MetricSampleSet& {
    if (!have_set) {
      require_file(cfg.samples_csv, "sample set (run the sample stage first)");
      require_file(cfg.samples_meta, "sample metadata (run the sample stage first)");
      set = read_sample_set(cfg.samples_csv, cfg.samples_meta);
      have_set = true;
    }
    return set;
  };

  std::vector<PolicySpec> specs;
  for (const std::string& name : names) {
    PolicySpec spec;
    spec.name = name;
    spec.kind = policy_kind_from_name(name);
    spec.role = role;
    switch (spec.kind) {
      case PolicyKind::NscmNet:
        require_file(cfg.checkpoint, "network checkpoint (run the train stage first)");
        nets.push_back(load_checkpoint(cfg.checkpoint));
        spec.net = &nets.back();
        spec.bound = main_set().bound;
        break;
      case PolicyKind::MetricTable:
        tables.push_back(make_metric_table(main_set(), cfg.model));
        spec.table = &tables.back();
        spec.bound = main_set().bound;
        break;
      case PolicyKind::NcmNet:
        require_file(cfg.ncm_checkpoint, "[artifacts] ncm_checkpoint");
        nets.push_back(load_checkpoint(cfg.ncm_checkpoint));
        spec.net = &nets.back();
        if (!cfg.ncm_samples_csv.empty()) {
          require_file(cfg.ncm_samples_csv, "[artifacts] ncm_samples");
          require_file(cfg.ncm_samples_meta, "[artifacts] ncm_samples_meta");
          spec.bound = read_sample_set(cfg.ncm_samples_csv, cfg.ncm_samples_meta).bound;
        }
        break;
      case PolicyKind::Sdre:
      case PolicyKind::Ekf:
        break;
    }
    specs.push_back(spec);
  }

  const std::vector<SimulationReport> reports =
      run_comparison(cfg.model, cfg.experiment, specs);

  write_comparison_csv(reports, prepare(cfg.comparison_csv));
  write_comparison_json(reports, cfg.experiment, prepare(cfg.comparison_json));
  if (cfg.emit_plots)
    for (const SimulationReport& report : reports)
      write_trace_csv(report, prepare(cfg.trace_prefix + report.policy + ".csv"));

  std::cout << std::left << std::setw(14) << "policy" << std::right << std::setw(14)
            << "steady_mse" << std::setw(12) << "bound" << std::setw(10) << "violates"
            << std::setw(10) << "diverged" << std::setw(9) << "flagged" << '\n';
  for (const SimulationReport& report : reports) {
    std::cout << std::left << std::setw(14) << report.policy << std::right << std::setw(14)
              << report.steady_mse << std::setw(12) << report.bound << std::setw(10)
              << (report.violates ? "yes" : "no") << std::setw(10) << report.diverged_runs
              << std::setw(9) << report.flagged_steps << '\n';
  }
  std::cout << "wrote " << cfg.comparison_csv << ", " << cfg.comparison_json << '\n';
}

int run_stage(const PipelineConfig& cfg, const std::string& stage) {
  if (stage == "sample") {
    run_sample(cfg);
  } else if (stage == "train") {
    run_train(cfg);
  } else if (stage == "verify") {
    return run_verify(cfg) ? 0 : 1;
  } else if (stage == "simulate") {
    run_compare(cfg, true);
  } else if (stage == "compare") {
    run_compare(cfg, false);
  } else {
    throw ConfigError("unknown stage: " + stage +
                      " (sample | train | verify | simulate | compare)");
  }
  return 0;
}

}  // namespace nscm
