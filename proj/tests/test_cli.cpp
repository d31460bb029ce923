// End-to-end checks of the command-line tool. Each case shells out to the
// built binary (path supplied via PHTAIL_BIN) inside a throwaway directory,
// then inspects exit codes and output files.
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <doctest.h>

#include "phtail/dataset.hpp"
#include "phtail/jsonio.hpp"

namespace fs = std::filesystem;

namespace {

std::string bin_path() {
  const char* p = std::getenv("PHTAIL_BIN");
  REQUIRE_MESSAGE(p != nullptr, "PHTAIL_BIN must point at the CLI binary");
  return p;
}

// Runs the binary with the given arguments, discarding its output, and
// returns the exit code.
int run(const std::string& args) {
  const std::string cmd = bin_path() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE_MESSAGE(WIFEXITED(status), "command did not exit normally: " << cmd);
  return WEXITSTATUS(status);
}

// Scratch directory that cleans up after itself.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("phtail_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const {
    return (path / name).string();
  }
};

bool same_bytes(const std::string& a, const std::string& b) {
  return phtail::read_text_file(a) == phtail::read_text_file(b);
}

}  // namespace

TEST_CASE("cli: gen writes a table plus sidecar and reruns byte-identically") {
  TempDir tmp("gen");
  const std::string out1 = tmp / "a.csv";
  const std::string out2 = tmp / "b.csv";
  const std::string flags = "gen --family pareto --alpha 2.4 --xm 1 --n 200 --seed 9";
  CHECK(run(flags + " --out " + out1) == 0);
  CHECK(run(flags + " --out " + out2) == 0);

  const phtail::Dataset d = phtail::load_csv(out1);
  CHECK(d.values.rows() == 200);
  CHECK(d.columns == std::vector<std::string>{"x0"});
  CHECK((d.values.array() >= 1.0).all());
  CHECK(same_bytes(out1, out2));

  const std::string meta = phtail::read_text_file(out1 + ".meta.json");
  CHECK(meta.find("\"command\": \"gen\"") != std::string::npos);
  CHECK(meta.find("pareto") != std::string::npos);
  CHECK(meta.find("\"seed\": 9") != std::string::npos);
}

TEST_CASE("cli: exit codes separate invalid input from success") {
  TempDir tmp("codes");
  CHECK(run("gen --family pareto --alpha -1 --xm 1 --out " + (tmp / "x.csv")) == 2);
  CHECK(run("gen --family nosuch --out " + (tmp / "x.csv")) == 2);
  CHECK(run("gen --family pareto --alpha 2 --out " + (tmp / "x.csv")) == 2);  // missing --xm
  CHECK(run("gen --benchmark nosuch --out " + (tmp / "x.csv")) == 2);
  CHECK(run("gen --family weibull --k 1 --lambda 1 --n 0 --out " + (tmp / "x.csv")) == 2);
  CHECK(run("train --data " + (tmp / "missing.csv") + " --run-dir " + (tmp / "r")) == 2);
  CHECK(run("sample --checkpoint " + (tmp / "missing.json") + " --out " + (tmp / "s.csv")) == 2);
  CHECK(run("eval --gen " + (tmp / "missing.csv") + " --truth pareto:2.4,1") == 2);
  CHECK(run("eval") == 2);
  CHECK(run("nosuchverb") == 2);
  CHECK(run("") == 2);            // a subcommand is required
  CHECK(run("--help") == 0);
  CHECK(run("gen --help") == 0);

  // Malformed checkpoint JSON is invalid input, not a crash.
  const std::string broken = tmp / "broken.json";
  phtail::write_text_file(broken, "{not json");
  CHECK(run("sample --checkpoint " + broken + " --out " + (tmp / "s.csv")) == 2);
}

TEST_CASE("cli: truth strings are validated") {
  TempDir tmp("truth");
  const std::string gen = tmp / "g.csv";
  REQUIRE(run("gen --family pareto --alpha 2.4 --xm 1 --n 100 --seed 1 --out " + gen) == 0);
  CHECK(run("eval --gen " + gen + " --truth pareto:2.4,1") == 0);
  CHECK(run("eval --gen " + gen + " --truth pareto2.4,1") == 2);
  CHECK(run("eval --gen " + gen + " --truth pareto:2.4") == 2);
  CHECK(run("eval --gen " + gen + " --truth pareto:abc,1") == 2);
  CHECK(run("eval --gen " + gen + " --truth pareto:-2,1") == 2);
  CHECK(run("eval --gen " + gen + " --truth nosuch:1,1") == 2);
  // Marginal count must match the table width.
  CHECK(run("eval --gen " + gen + " --truth pareto:2.4,1 --truth pareto:2.4,1") == 2);
  // --real and --truth are mutually exclusive.
  CHECK(run("eval --gen " + gen + " --real " + gen + " --truth pareto:2.4,1") == 2);
}

TEST_CASE("cli: train, sample and eval round trip on a small run") {
  TempDir tmp("round");
  const std::string data = tmp / "data.csv";
  const std::string run_dir = tmp / "run";
  REQUIRE(run("gen --family weibull --k 0.8 --lambda 1 --n 800 --seed 3 --out " + data) == 0);
  REQUIRE(run("train --data " + data + " --run-dir " + run_dir +
              " --decoder ph --phases 4 --epochs 2 --batch-size 256 --seed 5") == 0);
  CHECK(fs::exists(run_dir + "/checkpoint.json"));
  CHECK(fs::exists(run_dir + "/run_config.json"));
  CHECK(fs::exists(run_dir + "/trainlog.json"));
  CHECK(fs::exists(run_dir + "/trainlog.csv"));
  CHECK(fs::exists(run_dir + "/epoch_0.json"));
  CHECK(fs::exists(run_dir + "/epoch_1.json"));

  // A run directory is never reused.
  CHECK(run("train --data " + data + " --run-dir " + run_dir) == 2);
  // Dimension cross-check.
  CHECK(run("train --data " + data + " --run-dir " + (tmp / "r2") + " --dims 3") == 2);

  const std::string samples = tmp / "samples.csv";
  REQUIRE(run("sample --checkpoint " + run_dir + "/checkpoint.json --n 2000 --seed 7 --out " +
              samples) == 0);
  const phtail::Dataset s = phtail::load_csv(samples);
  CHECK(s.values.rows() == 2000);
  CHECK(s.values.cols() == 1);
  CHECK((s.values.array() >= 0.0).all());

  const std::string report = tmp / "metrics.json";
  const std::string ccdf = tmp / "tail.csv";
  CHECK(run("eval --gen " + samples + " --truth weibull:0.8,1 --out " + report +
            " --ccdf " + ccdf) == 0);
  const std::string json = phtail::read_text_file(report);
  CHECK(json.find("\"ks_tail\"") != std::string::npos);
  CHECK(json.find("\"q_rel_err\"") != std::string::npos);
  CHECK(phtail::read_text_file(ccdf).rfind("x,survival\n", 0) == 0);

  // Aggregate form kicks in with repeated --gen.
  const std::string agg = tmp / "agg.json";
  CHECK(run("eval --gen " + samples + " --gen " + samples +
            " --truth weibull:0.8,1 --out " + agg) == 0);
  CHECK(phtail::read_text_file(agg).find("\"aggregate\"") != std::string::npos);
}

TEST_CASE("cli: training reruns are byte-identical apart from timing files") {
  TempDir tmp("determinism");
  const std::string data = tmp / "data.csv";
  REQUIRE(run("gen --family pareto --alpha 2.4 --xm 1 --n 600 --seed 11 --out " + data) == 0);
  const std::string a = tmp / "a";
  const std::string b = tmp / "b";
  const std::string flags = " --decoder ph --phases 3 --epochs 2 --batch-size 256 --seed 21";
  REQUIRE(run("train --data " + data + " --run-dir " + a + flags) == 0);
  REQUIRE(run("train --data " + data + " --run-dir " + b + flags) == 0);
  CHECK(same_bytes(a + "/checkpoint.json", b + "/checkpoint.json"));
  CHECK(same_bytes(a + "/trainlog.json", b + "/trainlog.json"));
  CHECK(same_bytes(a + "/trainlog.csv", b + "/trainlog.csv"));
  CHECK(same_bytes(a + "/epoch_1.json", b + "/epoch_1.json"));
  CHECK(same_bytes(a + "/run_config.json", b + "/run_config.json"));

  const std::string s1 = tmp / "s1.csv";
  const std::string s2 = tmp / "s2.csv";
  REQUIRE(run("sample --checkpoint " + a + "/checkpoint.json --n 500 --seed 2 --out " + s1) == 0);
  REQUIRE(run("sample --checkpoint " + b + "/checkpoint.json --n 500 --seed 2 --out " + s2) == 0);
  CHECK(same_bytes(s1, s2));
}

TEST_CASE("cli: config file fills in flags and typed flags win") {
  TempDir tmp("config");
  const std::string conf = tmp / "gen.cfg";
  const std::string out1 = tmp / "c1.csv";
  const std::string out2 = tmp / "c2.csv";
  phtail::write_text_file(conf,
                          "# generator settings\n"
                          "family = weibull\n"
                          "k = 0.8\n"
                          "lambda = 1\n"
                          "n = 150\n"
                          "seed = 4\n"
                          "out = " + out1 + "\n");
  CHECK(run("gen --config " + conf) == 0);
  CHECK(phtail::load_csv(out1).values.rows() == 150);

  // Command-line flags override file entries.
  CHECK(run("gen --config " + conf + " --n 70 --out " + out2) == 0);
  CHECK(phtail::load_csv(out2).values.rows() == 70);

  CHECK(run("gen --config " + (tmp / "missing.cfg")) == 2);
  const std::string junk = tmp / "junk.cfg";
  phtail::write_text_file(junk, "family weibull\n");
  CHECK(run("gen --config " + junk) == 2);
  const std::string unknown = tmp / "unknown.cfg";
  phtail::write_text_file(unknown, "familly=weibull\n");
  CHECK(run("gen --config " + unknown) == 2);
}

TEST_CASE("cli: fit-ph recovers an exponential rate and writes ccdf") {
  TempDir tmp("fit");
  const std::string data = tmp / "exp.csv";
  // Weibull with shape 1 is the unit-rate exponential.
  REQUIRE(run("gen --family weibull --k 1 --lambda 1 --n 4000 --seed 13 --out " + data) == 0);
  const std::string model = tmp / "fit.json";
  const std::string ccdf = tmp / "cc.csv";
  REQUIRE(run("fit-ph --data " + data + " --m 1 --epochs 25 --lr 0.02 --seed 1 --out " + model +
              " --ccdf " + ccdf) == 0);

  const std::string json = phtail::read_text_file(model);
  CHECK(json.find("\"lambda\"") != std::string::npos);
  // One phase: the single rate should sit near 1 / sample mean.
  const std::size_t pos = json.find("\"lambda\": [");
  REQUIRE(pos != std::string::npos);
  const double rate = std::strtod(json.c_str() + pos + 11, nullptr);
  CHECK(rate == doctest::Approx(1.0).epsilon(0.06));

  CHECK(phtail::read_text_file(ccdf).rfind("x,empirical,model\n", 0) == 0);

  CHECK(run("fit-ph --data " + data + " --m 0 --out " + model) == 2);
  CHECK(run("fit-ph --data " + data + " --column 5 --out " + model) == 2);
}

TEST_CASE("cli: independent-ph trains per dimension and samples via manifest") {
  TempDir tmp("indep");
  const std::string data = tmp / "mv.csv";
  REQUIRE(run("gen --benchmark mv5d --n 400 --seed 19 --out " + data) == 0);
  const phtail::Dataset d = phtail::load_csv(data);
  REQUIRE(d.values.cols() == 5);

  const std::string run_dir = tmp / "indep";
  REQUIRE(run("train --data " + data + " --run-dir " + run_dir +
              " --decoder independent-ph --phases 3 --epochs 1 --batch-size 128 --seed 2") == 0);
  CHECK(fs::exists(run_dir + "/manifest.json"));
  for (int j = 0; j < 5; ++j) {
    CHECK(fs::exists(run_dir + "/dim_" + std::to_string(j) + "/checkpoint.json"));
  }

  const std::string samples = tmp / "sm.csv";
  REQUIRE(run("sample --checkpoint " + run_dir + "/manifest.json --n 300 --seed 3 --out " +
              samples) == 0);
  const phtail::Dataset s = phtail::load_csv(samples);
  CHECK(s.values.rows() == 300);
  CHECK(s.values.cols() == 5);
  CHECK(s.columns == d.columns);

  // Evaluating generated against real exercises the dependence metrics.
  const std::string report = tmp / "m.json";
  CHECK(run("eval --gen " + samples + " --real " + data + " --out " + report) == 0);
  const std::string json = phtail::read_text_file(report);
  CHECK(json.find("\"tau_err\"") != std::string::npos);
  CHECK(json.find("\"corr_err\"") != std::string::npos);
}

TEST_CASE("cli: sample with n=0 writes a header-only table") {
  TempDir tmp("empty");
  const std::string data = tmp / "d.csv";
  const std::string run_dir = tmp / "r";
  REQUIRE(run("gen --family weibull --k 1 --lambda 1 --n 300 --seed 1 --out " + data) == 0);
  REQUIRE(run("train --data " + data + " --run-dir " + run_dir +
              " --phases 2 --epochs 1 --batch-size 128") == 0);
  const std::string out = tmp / "none.csv";
  CHECK(run("sample --checkpoint " + run_dir + "/checkpoint.json --n 0 --out " + out) == 0);
  CHECK(phtail::read_text_file(out) == "x0\n");
}

TEST_CASE("cli: ablate writes the star grid with metrics and timing apart") {
  TempDir tmp("ablate");
  const std::string data = tmp / "d.csv";
  REQUIRE(run("gen --family weibull --k 0.8 --lambda 1 --n 500 --seed 23 --out " + data) == 0);
  const std::string run_dir = tmp / "grid";
  REQUIRE(run("ablate --data " + data + " --run-dir " + run_dir +
              " --m 2 --m 3 --beta 0.5 --beta 1 --n-gen 400 --epochs 1 --batch-size 128") == 0);

  const std::string table = phtail::read_text_file(run_dir + "/ablation.csv");
  CHECK(table.rfind("m,beta,final_nll,ks_tail,q_rel_err,corr_err,tau_err,coex_err\n", 0) == 0);
  // Star grid: each m at beta 1, plus the center phase count at beta 0.5.
  CHECK(table.find("\n2,1,") != std::string::npos);
  CHECK(table.find("\n3,1,") != std::string::npos);
  CHECK(table.find("\n10,0.5,") != std::string::npos);
  CHECK(fs::exists(run_dir + "/m2_beta1/checkpoint.json"));
  CHECK(fs::exists(run_dir + "/m2_beta1/metrics.json"));
  CHECK(fs::exists(run_dir + "/m10_beta0.5/metrics.json"));
  CHECK(fs::exists(run_dir + "/ablation_timing.csv"));
  CHECK(phtail::read_text_file(run_dir + "/ablation_timing.csv")
            .rfind("m,beta,total_seconds,seconds_per_epoch\n", 0) == 0);
}
