#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <nscm/common.hpp>
#include <nscm/pipeline.hpp>

int main(int argc, char** argv) {
  CLI::App app{"contraction-metric pipeline: sample, train, verify, simulate, compare"};
  std::string config_path, stage, out, grid;
  std::vector<std::string> policies;
  std::uint64_t seed = 0;
  bool emit_plots = false;

  app.add_option("--config", config_path, "pipeline configuration file")->required();
  app.add_option("--stage", stage, "sample | train | verify | simulate | compare")
      ->required();
  CLI::Option* seed_opt = app.add_option("--seed", seed, "override the master seed");
  app.add_option("--out", out, "override the output directory");
  app.add_option("--grid-override", grid,
                 "replace the search grids: comma-separated alphas and epsilons "
                 "joined by ';'");
  app.add_option("--policies", policies, "override the policies to compare")
      ->delimiter(',');
  app.add_flag("--emit-plots", emit_plots,
               "write per-run trace CSVs alongside the comparison");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  try {
    nscm::StageOverrides overrides;
    overrides.out = out;
    overrides.grid = grid;
    overrides.policies = policies;
    overrides.has_seed = seed_opt->count() > 0;
    overrides.seed = seed;
    overrides.emit_plots = emit_plots;
    const nscm::PipelineConfig cfg = nscm::load_pipeline(config_path, overrides);
    return nscm::run_stage(cfg, stage);
  } catch (const nscm::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const nscm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
