#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

fs::path workspace() {
  static const fs::path ws = [] {
    const fs::path p = fs::temp_directory_path() / "nscm-cli-tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return ws;
}

std::string shipped_config(const std::string& name) {
  return std::string(NSCM_CONFIG_DIR) + "/" + name;
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path log = workspace() / ("log_" + std::to_string(counter++) + ".txt");
  const std::string cmd =
      std::string(NSCM_CLI_PATH) + " " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream buffer;
  buffer << in.rdbuf();
  result.output = buffer.str();
  return result;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void spit(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

int count_lines(const std::string& text) {
  int lines = 0;
  for (char ch : text)
    if (ch == '\n') ++lines;
  return lines;
}

// Copy of the scalar config with one key replaced, for driving error paths.
fs::path patched_scalar(const std::string& name, const std::string& from,
                        const std::string& to) {
  std::string text = slurp(shipped_config("scalar_estimation.cfg"));
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, from.size(), to);
  const fs::path path = workspace() / name;
  spit(path, text);
  return path;
}

std::string scalar_run(const std::string& stage, const fs::path& out,
                       const std::string& extra = "") {
  return "--config \"" + shipped_config("scalar_estimation.cfg") + "\" --stage " +
         stage + " --out \"" + out.string() + "\"" +
         (extra.empty() ? "" : " " + extra);
}

}  // namespace

TEST_CASE("help exits cleanly") {
  const RunResult r = run_cli("--help");
  CHECK(r.exit_code == 0);
  CHECK(contains(r.output, "--stage"));
  CHECK(contains(r.output, "--config"));
}

TEST_CASE("usage and configuration failures exit with code 2") {
  const fs::path ws = workspace();

  SUBCASE("missing arguments") {
    const RunResult r = run_cli("");
    CHECK(r.exit_code == 2);
    CHECK(!r.output.empty());
  }
  SUBCASE("config file does not exist") {
    const RunResult r = run_cli("--config \"" + (ws / "nope.cfg").string() +
                                "\" --stage sample");
    CHECK(r.exit_code == 2);
    CHECK(contains(r.output, "not found"));
  }
  SUBCASE("malformed config") {
    const fs::path bad = ws / "malformed.cfg";
    spit(bad, "not an ini [ at all\n== =\n");
    const RunResult r = run_cli("--config \"" + bad.string() + "\" --stage sample");
    CHECK(r.exit_code == 2);
    CHECK(contains(r.output, "configuration error"));
  }
  SUBCASE("unknown model") {
    const fs::path bad = ws / "unknown_model.cfg";
    spit(bad, "[pipeline]\nmodel = pendulum\nmode = estimation\nout = x\n");
    const RunResult r = run_cli("--config \"" + bad.string() + "\" --stage sample");
    CHECK(r.exit_code == 2);
    CHECK(contains(r.output, "unknown model"));
  }
  SUBCASE("unknown stage") {
    const RunResult r = run_cli(
        "--config \"" + shipped_config("scalar_estimation.cfg") + "\" --stage dance");
    CHECK(r.exit_code == 2);
    CHECK(contains(r.output, "unknown stage"));
  }
  SUBCASE("bad grid override") {
    const RunResult r =
        run_cli(scalar_run("sample", ws / "grid_bad", "--grid-override \"abc;\""));
    CHECK(r.exit_code == 2);
    CHECK(contains(r.output, "bad grid override"));
  }
  SUBCASE("stages demand their inputs") {
    const RunResult train = run_cli(scalar_run("train", ws / "fresh_train"));
    CHECK(train.exit_code == 2);
    CHECK(contains(train.output, "sample"));

    const RunResult compare = run_cli(scalar_run("compare", ws / "fresh_compare"));
    CHECK(compare.exit_code == 2);
  }
}

TEST_CASE("sample stage writes certified artifacts and metadata") {
  const fs::path out = workspace() / "sample_stage";
  const RunResult r = run_cli(scalar_run("sample", out));
  CHECK(r.exit_code == 0);
  CHECK(contains(r.output, "alpha*="));
  CHECK(contains(r.output, "certified"));

  REQUIRE(fs::exists(out / "samples.csv"));
  REQUIRE(fs::exists(out / "samples_meta.json"));
  REQUIRE(fs::exists(out / "jsurface.csv"));

  const json meta = json::parse(slurp(out / "samples_meta.json"));
  for (const char* key : {"mode", "n", "m", "num_samples", "nu", "nu_c", "chi",
                          "alpha", "eps", "l_m", "objective", "bound", "mbar"})
    CHECK(meta.contains(key));
  CHECK(meta["mode"] == "estimation");
  CHECK(meta["n"] == 1);
  CHECK(meta["num_samples"] == 10);
  CHECK(meta["nu"].get<double>() > 0.0);
  CHECK(meta["chi"].get<double>() >= 1.0 - 1e-12);
  CHECK(meta["bound"].get<double>() > 0.0);
  CHECK(meta["l_m"].get<double>() == 0.5);

  // Header plus one row per alpha of the 3x3 configured grid.
  const std::string surface = slurp(out / "jsurface.csv");
  CHECK(count_lines(surface) == 4);
  CHECK(contains(surface, "eps="));
}

TEST_CASE("infeasible search grid reports a diagnostic") {
  const fs::path out = workspace() / "infeasible";
  const RunResult r =
      run_cli(scalar_run("sample", out, "--grid-override \"1e6;\""));
  CHECK(r.exit_code == 1);
  CHECK(contains(r.output, "no feasible metric"));
}

TEST_CASE("derivative budget too small for the output cap fails certification") {
  const fs::path cfg = patched_scalar("tiny_budget.cfg", "l_m = 0.5", "l_m = 1e-6");
  const fs::path out = workspace() / "tiny_budget";
  const std::string base =
      "--config \"" + cfg.string() + "\" --out \"" + out.string() + "\"";

  CHECK(run_cli(base + " --stage sample").exit_code == 0);
  const RunResult train = run_cli(base + " --stage train");
  CHECK(train.exit_code == 1);
  CHECK(contains(train.output, "spectral normalization"));
}

TEST_CASE("pipeline round trip: train, verify, simulate, compare") {
  const fs::path out = workspace() / "round_trip";
  REQUIRE(run_cli(scalar_run("sample", out)).exit_code == 0);

  const RunResult train = run_cli(scalar_run("train", out));
  CHECK(train.exit_code == 0);
  CHECK(contains(train.output, "c_nn="));
  REQUIRE(fs::exists(out / "net.ckpt"));
  CHECK(fs::exists(out / "curves.csv"));

  const RunResult verify = run_cli(scalar_run("verify", out));
  CHECK(verify.exit_code == 0);
  CHECK(contains(verify.output, "all checks passed"));
  const json report = json::parse(slurp(out / "verify.json"));
  CHECK(report["passed"] == true);
  CHECK(report["checks"].size() == 6);

  const RunResult simulate = run_cli(scalar_run("simulate", out));
  CHECK(simulate.exit_code == 0);
  CHECK(count_lines(slurp(out / "comparison.csv")) == 2);
  CHECK(contains(slurp(out / "comparison.csv"), "nscm-net"));

  const RunResult compare =
      run_cli(scalar_run("compare", out, "--policies ekf,sdre --emit-plots"));
  CHECK(compare.exit_code == 0);
  const std::string table = slurp(out / "comparison.csv");
  CHECK(count_lines(table) == 3);
  CHECK(contains(table, "ekf"));
  CHECK(contains(table, "sdre"));
  CHECK(!contains(table, "nscm-net"));
  CHECK(count_lines(slurp(out / "trace_ekf.csv")) > 2);
  CHECK(count_lines(slurp(out / "trace_sdre.csv")) > 2);

  // A checkpoint whose stored normalization constant was inflated must fail
  // verification: the header drives renormalization on load, so the hidden
  // layers come back above the certified constant.
  const std::string raw = slurp(out / "net.ckpt");
  const auto newline = raw.find('\n');
  REQUIRE(newline != std::string::npos);
  json header = json::parse(raw.substr(0, newline));
  header["c_nn"] = 10.0 * header["c_nn"].get<double>();
  spit(out / "net.ckpt", header.dump() + "\n" + raw.substr(newline + 1));

  const RunResult tampered = run_cli(scalar_run("verify", out));
  CHECK(tampered.exit_code == 1);
  CHECK(contains(tampered.output, "spectral-norms"));
  CHECK(contains(tampered.output, "verification failed"));
  CHECK(json::parse(slurp(out / "verify.json"))["passed"] == false);
}

TEST_CASE("one seed, one set of bytes") {
  const std::vector<std::string> stages = {"sample", "train", "verify", "compare"};
  const fs::path first = workspace() / "repeat_a";
  const fs::path second = workspace() / "repeat_b";
  for (const fs::path& out : {first, second})
    for (const std::string& stage : stages)
      REQUIRE(run_cli(scalar_run(stage, out)).exit_code == 0);

  for (const char* name :
       {"samples.csv", "samples_meta.json", "jsurface.csv", "net.ckpt",
        "curves.csv", "verify.json", "comparison.csv", "comparison.json"})
    CHECK_MESSAGE(slurp(first / name) == slurp(second / name), name);

  const fs::path reseeded = workspace() / "repeat_seed";
  REQUIRE(run_cli(scalar_run("sample", reseeded, "--seed 999")).exit_code == 0);
  CHECK(slurp(first / "samples.csv") != slurp(reseeded / "samples.csv"));
}
