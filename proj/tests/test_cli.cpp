#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* cli_path() { return std::getenv("UNFOLD_CLI"); }

fs::path workdir() {
  static const fs::path dir = [] {
    const fs::path d =
        fs::temp_directory_path() / ("unfold_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args) {
  const fs::path out_file = workdir() / "stdout.txt";
  const fs::path err_file = workdir() / "stderr.txt";
  const std::string cmd = std::string("\"") + cli_path() + "\" " + args + " > " +
                          out_file.string() + " 2> " + err_file.string();
  const int rc = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

json base_config(int J, int quad, const std::string& out_dir) {
  json cfg;
  cfg["version"] = 1;
  cfg["J"] = J;
  cfg["quad_resolution"] = quad;
  cfg["kernel"] = {{"kind", "log-potential-periodized"}};
  cfg["intensity"] = {{"kind", "peak"}};
  cfg["t_values"] = {200000.0};
  cfg["seed"] = 7;
  cfg["out_dir"] = out_dir;
  cfg["cache_dir"] = (workdir() / "cache").string();
  return cfg;
}

fs::path write_config(const std::string& name, const json& cfg) {
  const fs::path p = workdir() / name;
  std::ofstream(p) << cfg.dump(2) << "\n";
  return p;
}

int line_count(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

#define REQUIRE_CLI()                                  \
  if (!cli_path()) {                                   \
    MESSAGE("UNFOLD_CLI not set; skipping CLI tests"); \
    return;                                            \
  }

}  // namespace

TEST_CASE("cli reports usage errors with exit code 2") {
  REQUIRE_CLI();
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("simulate").code == 2);
  CHECK(run_cli("frobnicate --config x.json").code == 2);
  CHECK(run_cli("simulate --config x.json --bogus").code == 2);
}

TEST_CASE("simulate writes deterministic counts with sidecars and a manifest") {
  REQUIRE_CLI();
  const fs::path sim_a = workdir() / "sim_a";
  const fs::path cfg_path =
      write_config("sim.json", base_config(8, 12, sim_a.string()));

  const CliResult r = run_cli("simulate --config " + cfg_path.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("wrote") != std::string::npos);

  const std::string counts = slurp(sim_a / "counts_t0_r0.csv");
  CHECK(counts.rfind("bin_index,count\n", 0) == 0);
  CHECK(line_count(counts) == 257);  // header + 2^8 rows
  CHECK(fs::exists(sim_a / "counts_t0_r0.csv.json"));

  const json manifest = json::parse(slurp(sim_a / "manifest.json"));
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["config"]["J"] == 8);
  CHECK(manifest["cell_seeds"].size() == 1);
  CHECK(manifest.contains("timings"));
  bool has_self = false;
  for (const auto& o : manifest["outputs"])
    if (o == "manifest.json") has_self = true;
  CHECK(has_self);

  // Same config and seed give byte-identical counts in another directory.
  const fs::path sim_b = workdir() / "sim_b";
  const CliResult r2 = run_cli("simulate --config " + cfg_path.string() + " --out " +
                               sim_b.string() + " --no-timestamp");
  CHECK(r2.code == 0);
  CHECK(slurp(sim_b / "counts_t0_r0.csv") == counts);
  CHECK(slurp(sim_b / "counts_t0_r0.csv.json") == slurp(sim_a / "counts_t0_r0.csv.json"));
  const json manifest_b = json::parse(slurp(sim_b / "manifest.json"));
  CHECK(!manifest_b.contains("timings"));

  // A different seed changes the draw.
  const fs::path sim_c = workdir() / "sim_c";
  const CliResult r3 = run_cli("simulate --config " + cfg_path.string() + " --out " +
                               sim_c.string() + " --seed 8");
  CHECK(r3.code == 0);
  CHECK(slurp(sim_c / "counts_t0_r0.csv") != counts);
}

TEST_CASE("estimate round trips counts into a model and sampled estimate") {
  REQUIRE_CLI();
  const fs::path sim_e = workdir() / "sim_e";
  const fs::path cfg_path =
      write_config("est.json", base_config(6, 12, sim_e.string()));
  REQUIRE(run_cli("simulate --config " + cfg_path.string()).code == 0);

  const fs::path est = workdir() / "est";
  const CliResult r = run_cli("estimate --config " + cfg_path.string() + " --counts " +
                              (sim_e / "counts_t0_r0.csv").string() + " --out " +
                              est.string());
  CHECK(r.code == 0);

  const json model = json::parse(slurp(est / "model.json"));
  CHECK(model["J"] == 6);
  CHECK(model["theta"].is_array());
  CHECK(model["j"].get<int>() >= 1);

  const std::string fhat = slurp(est / "fhat.csv");
  CHECK(fhat.rfind("x,f_hat\n", 0) == 0);
  CHECK(line_count(fhat) == 65);  // header + 2^6 rows

  const json manifest = json::parse(slurp(est / "manifest.json"));
  CHECK(manifest["command"] == "estimate");
  CHECK(manifest["counts"]["J"] == 6);
}

TEST_CASE("estimate fails loudly on infeasible and mismatched inputs") {
  REQUIRE_CLI();
  // All-zero counts leave no coarse mass to project onto.
  const fs::path zero_csv = workdir() / "zero_counts.csv";
  {
    std::ofstream out(zero_csv);
    out << "bin_index,count\n";
    for (int k = 0; k < 64; ++k) out << k << ",0\n";
    json side{{"J", 6},      {"t", 200000.0},      {"seed", 1},
              {"kernel", ""}, {"intensity", nullptr}};
    std::ofstream(workdir() / "zero_counts.csv.json") << side.dump(2) << "\n";
  }
  const fs::path cfg6 =
      write_config("zero.json", base_config(6, 12, (workdir() / "zero_out").string()));
  const CliResult r = run_cli("estimate --config " + cfg6.string() + " --counts " +
                              zero_csv.string());
  CHECK(r.code == 3);
  CHECK(r.err.find("alpha_coarse") != std::string::npos);

  // Counts at J=6 against a J=8 config.
  const fs::path cfg8 =
      write_config("mismatch.json", base_config(8, 12, (workdir() / "mm_out").string()));
  CHECK(run_cli("estimate --config " + cfg8.string() + " --counts " +
                zero_csv.string())
            .code == 2);
}

TEST_CASE("cli maps io failures to exit code 5") {
  REQUIRE_CLI();
  const fs::path cfg6 =
      write_config("io.json", base_config(6, 12, (workdir() / "io_out").string()));
  CHECK(run_cli("estimate --config " + cfg6.string() + " --counts " +
                (workdir() / "missing.csv").string())
            .code == 5);
  CHECK(run_cli("simulate --config " + (workdir() / "missing_config.json").string())
            .code == 5);
}

TEST_CASE("cli maps solver failures to exit code 4") {
  REQUIRE_CLI();
  // A rank-one constant kernel cannot support a detail-level Galerkin solve.
  const fs::path sim_k = workdir() / "sim_k";
  json cfg = base_config(6, 12, sim_k.string());
  cfg["kernel"] = {{"kind", "constant"}, {"value", 1.0}};
  const fs::path cfg_path = write_config("const.json", cfg);
  REQUIRE(run_cli("simulate --config " + cfg_path.string()).code == 0);
  const CliResult r = run_cli("estimate --config " + cfg_path.string() + " --counts " +
                              (sim_k / "counts_t0_r0.csv").string() + " --out " +
                              (workdir() / "est_k").string());
  CHECK(r.code == 4);
}
