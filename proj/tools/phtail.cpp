// Command-line front end: data generation, training, sampling, evaluation,
// direct phase-type fitting and the ablation grid. Every command is a pure
// function of its flags and seed; outputs are CSV and JSON files (wall-clock
// timings go to separate files so the data artifacts stay byte-stable).
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "phtail/dataset.hpp"
#include "phtail/jsonio.hpp"
#include "phtail/metrics.hpp"
#include "phtail/phase_type.hpp"
#include "phtail/rng.hpp"
#include "phtail/synthetic.hpp"
#include "phtail/trainer.hpp"
#include "phtail/vae.hpp"

namespace fs = std::filesystem;

namespace {

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
// Seed mix for model initialization so it does not replay the shuffle stream.
constexpr std::uint64_t kInitSeedMix = 0xbf58476d1ce4e5b9ull;
// The beta arm of the default ablation grid varies around this phase count.
constexpr long kAblateCenterPhases = 10;

struct GenFlags {
  std::string family;
  std::string benchmark;
  double alpha = kUnset;
  double xm = kUnset;
  double k = kUnset;
  double lambda = kUnset;
  double mu = kUnset;
  double sigma = kUnset;
  double c = kUnset;
  long n = 10000;
  std::uint64_t seed = 1;
  std::string out;
  std::string config;
};

struct TrainFlags {
  std::string data;
  std::string run_dir;
  std::string decoder = "ph";
  long dims = 0;        // optional cross-check against the data table
  long latent_dim = 0;  // 0 resolves to 2 for univariate data, 4 otherwise
  long phases = 10;
  double beta = 1.0;
  long hidden = 64;
  int epochs = 13;
  long batch_size = 256;
  double lr0 = 1e-3;
  double weight_decay = 1e-5;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::string config;
};

struct SampleFlags {
  std::string checkpoint;
  long n = 100000;
  std::uint64_t seed = 1;
  std::string out;
  std::string config;
};

struct EvalFlags {
  std::vector<std::string> gen;
  std::string real;
  std::vector<std::string> truth;  // family:p1,p2 per dimension
  double ks_q = 0.95;
  double q_level = 0.99;
  std::vector<double> coex_q;
  bool own_thresholds = false;
  std::string out_json;
  std::string ccdf;
  long ccdf_dim = 0;
  std::string config;
};

struct FitFlags {
  std::string data;
  long column = 0;
  long m = 10;
  int epochs = 13;
  long batch_size = 256;
  double lr0 = 1e-3;
  double weight_decay = 1e-5;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::string out;
  std::string ccdf;
  std::string config;
};

struct AblateFlags {
  std::string data;
  std::string run_dir;
  std::vector<long> m_list = {5, 10, 15};
  std::vector<double> beta_list = {0.5, 1.0, 2.0};
  long n_gen = 100000;
  long latent_dim = 0;
  long hidden = 64;
  int epochs = 13;
  long batch_size = 256;
  double lr0 = 1e-3;
  double weight_decay = 1e-5;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  double ks_q = 0.95;
  double q_level = 0.99;
  std::vector<double> coex_q;
  std::string config;
};

// Flat key=value config support. CLI11 only reads config files on the root
// app but the flag here belongs to each verb, so the file's pairs are turned
// into trailing --key=value arguments instead; flags typed on the command
// line always win over the file.
std::vector<std::string> with_config_args(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
  }
  if (path.empty()) return args;
  if (!fs::exists(path)) {
    throw std::invalid_argument("--config: file not found: " + path);
  }
  const std::size_t given = args.size();
  auto on_command_line = [&](const std::string& flag) {
    for (std::size_t i = 0; i < given; ++i) {
      if (args[i] == flag || args[i].rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  auto strip = [](const std::string& s) {
    const char* ws = " \t\r";
    const std::size_t a = s.find_first_not_of(ws);
    if (a == std::string::npos) return std::string();
    return s.substr(a, s.find_last_not_of(ws) - a + 1);
  };
  std::istringstream lines(phtail::read_text_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    line = strip(line);
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    const std::string key = eq == std::string::npos ? "" : strip(line.substr(0, eq));
    if (key.empty()) {
      throw std::invalid_argument("--config: line " + std::to_string(lineno) +
                                  " is not key=value: '" + line + "'");
    }
    if (key == "config") continue;
    if (!on_command_line("--" + key)) {
      args.push_back("--" + key + "=" + strip(line.substr(eq + 1)));
    }
  }
  return args;
}

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) {
    throw std::invalid_argument(std::string(flag) + " is required");
  }
  if (!fs::exists(path)) {
    throw std::invalid_argument(std::string(flag) + ": file not found: " + path);
  }
}

void require_fresh_dir(const std::string& path) {
  if (path.empty()) {
    throw std::invalid_argument("--run-dir is required");
  }
  if (fs::exists(path)) {
    throw std::invalid_argument("run directory already exists: " + path);
  }
}

std::string six(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

phtail::MarginalSpec marginal_from_flags(const GenFlags& f) {
  auto need = [](double v, const char* flag) {
    if (std::isnan(v)) {
      throw std::invalid_argument(std::string("missing ") + flag +
                                  " for this family");
    }
    return v;
  };
  auto need_pos = [&](double v, const char* flag) {
    v = need(v, flag);
    if (!(v > 0.0)) {
      throw std::invalid_argument(std::string(flag) +
                                  ": parameter must be positive");
    }
    return v;
  };
  if (f.family == "weibull") {
    return {phtail::Family::kWeibull, need_pos(f.k, "--k"),
            need_pos(f.lambda, "--lambda")};
  }
  if (f.family == "pareto") {
    return {phtail::Family::kPareto, need_pos(f.alpha, "--alpha"),
            need_pos(f.xm, "--xm")};
  }
  if (f.family == "lognormal") {
    return {phtail::Family::kLognormal, need(f.mu, "--mu"),
            need_pos(f.sigma, "--sigma")};
  }
  if (f.family == "burr") {
    return {phtail::Family::kBurr, need_pos(f.c, "--c"),
            need_pos(f.k, "--k")};
  }
  throw std::invalid_argument("unknown family: " + f.family);
}

// "family:p1,p2", e.g. "pareto:2.4,1.0".
phtail::MarginalSpec parse_marginal(const std::string& text) {
  const std::size_t colon = text.find(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument("truth must look like family:p1,p2, got '" +
                                text + "'");
  }
  const std::string name = text.substr(0, colon);
  const std::size_t comma = text.find(',', colon + 1);
  if (comma == std::string::npos) {
    throw std::invalid_argument("truth must carry two parameters: '" + text +
                                "'");
  }
  auto parse_num = [&](const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
      throw std::invalid_argument("truth parameter is not a number: '" + s +
                                  "'");
    }
    return v;
  };
  phtail::MarginalSpec spec;
  if (name == "weibull") {
    spec.family = phtail::Family::kWeibull;
  } else if (name == "pareto") {
    spec.family = phtail::Family::kPareto;
  } else if (name == "lognormal") {
    spec.family = phtail::Family::kLognormal;
  } else if (name == "burr") {
    spec.family = phtail::Family::kBurr;
  } else {
    throw std::invalid_argument("unknown family: " + name);
  }
  spec.p1 = parse_num(text.substr(colon + 1, comma - colon - 1));
  spec.p2 = parse_num(text.substr(comma + 1));
  phtail::validate_marginal(spec);
  return spec;
}

int cmd_gen(const GenFlags& f) {
  if (f.n < 1) throw std::invalid_argument("--n must be >= 1");
  if (f.out.empty()) throw std::invalid_argument("--out is required");
  phtail::Dataset d;
  std::string generator;
  if (!f.benchmark.empty()) {
    if (f.benchmark != "mv5d") {
      throw std::invalid_argument("unknown benchmark: " + f.benchmark);
    }
    d = phtail::gen_t_copula(phtail::benchmark_5d(), f.n, f.seed);
    generator = "benchmark mv5d";
  } else {
    if (f.family.empty()) {
      throw std::invalid_argument("provide --family or --benchmark");
    }
    const phtail::MarginalSpec spec = marginal_from_flags(f);
    d = phtail::gen_marginal(spec, f.n, f.seed);
    generator = phtail::describe(spec);
  }
  phtail::save_csv(d, f.out);

  phtail::JsonWriter w;
  w.begin_object();
  w.field("command", "gen");
  w.field("generator", generator);
  w.field("n", static_cast<long long>(f.n));
  w.field("seed", static_cast<long long>(f.seed));
  w.key("columns");
  w.begin_array();
  for (const std::string& c : d.columns) w.string(c);
  w.end_array();
  w.field("provenance", d.provenance);
  w.end_object();
  phtail::write_text_file(f.out + ".meta.json", w.take());

  std::cout << "wrote " << d.values.rows() << " rows x " << d.values.cols()
            << " dims to " << f.out << "\n";
  return 0;
}

long resolve_latent(long requested, Eigen::Index dims) {
  if (requested < 0) throw std::invalid_argument("--latent-dim must be >= 1");
  if (requested > 0) return requested;
  return dims == 1 ? 2 : 4;
}

phtail::TrainConfig base_train_config(int epochs, long batch_size, double lr0,
                                      double weight_decay, double clip_norm,
                                      std::uint64_t seed) {
  phtail::TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = batch_size;
  tc.lr0 = lr0;
  tc.weight_decay = weight_decay;
  tc.clip_norm = clip_norm;
  tc.seed = seed;
  return tc;
}

void write_run_config(const std::string& path, const TrainFlags& f,
                      Eigen::Index dims, long latent) {
  phtail::JsonWriter w;
  w.begin_object();
  w.field("command", "train");
  w.field("data", f.data);
  w.field("decoder", f.decoder);
  w.field("dims", static_cast<long long>(dims));
  w.field("latent_dim", static_cast<long long>(latent));
  w.field("phases", static_cast<long long>(f.phases));
  w.field("beta", f.beta);
  w.field("hidden", static_cast<long long>(f.hidden));
  w.field("epochs", f.epochs);
  w.field("batch_size", static_cast<long long>(f.batch_size));
  w.field("lr0", f.lr0);
  w.field("weight_decay", f.weight_decay);
  w.field("clip_norm", f.clip_norm);
  w.field("seed", static_cast<long long>(f.seed));
  w.end_object();
  phtail::write_text_file(path, w.take());
}

phtail::VaeConfig vae_config(Eigen::Index data_dim, long latent, long phases,
                             double beta, long hidden) {
  phtail::VaeConfig cfg;
  cfg.data_dim = data_dim;
  cfg.latent_dim = latent;
  cfg.phases = phases;
  cfg.beta = beta;
  cfg.hidden = hidden;
  return cfg;
}

int cmd_train(const TrainFlags& f) {
  require_file(f.data, "--data");
  require_fresh_dir(f.run_dir);
  if (f.phases < 1) throw std::invalid_argument("--phases must be >= 1");
  const phtail::Dataset data = phtail::load_csv(f.data);
  const Eigen::Index dims = data.values.cols();
  if (f.dims > 0 && f.dims != dims) {
    throw std::invalid_argument("--dims says " + std::to_string(f.dims) +
                                " but the table has " + std::to_string(dims));
  }

  if (f.decoder == "independent-ph") {
    // One univariate model per dimension, each in its own subdirectory.
    const long latent = resolve_latent(f.latent_dim, 1);
    fs::create_directories(f.run_dir);
    std::vector<std::string> checkpoints;
    double nll_sum = 0.0;
    for (Eigen::Index j = 0; j < dims; ++j) {
      const std::string dim_dir =
          f.run_dir + "/dim_" + std::to_string(j);
      phtail::Rng init(static_cast<std::uint64_t>(f.seed + j) ^ kInitSeedMix);
      phtail::Vae v = phtail::make_ph_vae(
          vae_config(1, latent, f.phases, f.beta, f.hidden), init);
      phtail::TrainConfig tc =
          base_train_config(f.epochs, f.batch_size, f.lr0, f.weight_decay,
                            f.clip_norm, f.seed + static_cast<std::uint64_t>(j));
      tc.run_dir = dim_dir;
      const phtail::TrainLog log = phtail::train(v, data.values.col(j), tc);
      phtail::save_vae(v, dim_dir + "/checkpoint.json");
      checkpoints.push_back("dim_" + std::to_string(j) + "/checkpoint.json");
      nll_sum += log.final_nll;
      std::cout << "dim " << j << " (" << data.columns[static_cast<std::size_t>(j)]
                << "): final NLL " << six(log.final_nll) << "\n";
    }
    phtail::JsonWriter w;
    w.begin_object();
    w.field("kind", "independent-ph");
    w.key("columns");
    w.begin_array();
    for (const std::string& c : data.columns) w.string(c);
    w.end_array();
    w.key("checkpoints");
    w.begin_array();
    for (const std::string& c : checkpoints) w.string(c);
    w.end_array();
    w.end_object();
    phtail::write_text_file(f.run_dir + "/manifest.json", w.take());
    write_run_config(f.run_dir + "/run_config.json", f, dims, latent);
    std::cout << "trained " << dims << " univariate models; summed NLL "
              << six(nll_sum) << "\n";
    return 0;
  }

  const long latent = resolve_latent(f.latent_dim, dims);
  phtail::Rng init(f.seed ^ kInitSeedMix);
  phtail::Vae v;
  if (f.decoder == "ph") {
    v = phtail::make_ph_vae(vae_config(dims, latent, f.phases, f.beta, f.hidden),
                            init);
  } else if (f.decoder == "gaussian") {
    v = phtail::make_gaussian_vae(
        vae_config(dims, latent, f.phases, f.beta, f.hidden), init);
  } else {
    throw std::invalid_argument("unknown decoder: " + f.decoder);
  }
  phtail::TrainConfig tc = base_train_config(
      f.epochs, f.batch_size, f.lr0, f.weight_decay, f.clip_norm, f.seed);
  tc.run_dir = f.run_dir;
  const phtail::TrainLog log = phtail::train(v, data.values, tc);
  phtail::save_vae(v, f.run_dir + "/checkpoint.json");
  write_run_config(f.run_dir + "/run_config.json", f, dims, latent);
  std::cout << "trained " << f.decoder << " decoder: final NLL "
            << six(log.final_nll) << " after " << f.epochs << " epochs ("
            << six(log.total_seconds) << " s)\n";
  return 0;
}

int cmd_sample(const SampleFlags& f) {
  require_file(f.checkpoint, "--checkpoint");
  if (f.n < 0) throw std::invalid_argument("--n must be >= 0");
  if (f.out.empty()) throw std::invalid_argument("--out is required");
  const nlohmann::json doc =
      nlohmann::json::parse(phtail::read_text_file(f.checkpoint));
  const std::string kind = doc.value("kind", "");

  phtail::Dataset out;
  phtail::Rng rng(f.seed);
  if (kind == "independent-ph") {
    const fs::path dir = fs::path(f.checkpoint).parent_path();
    const auto cols = doc.at("columns").get<std::vector<std::string>>();
    const auto ckpts = doc.at("checkpoints").get<std::vector<std::string>>();
    if (cols.size() != ckpts.size() || cols.empty()) {
      throw std::invalid_argument(
          "manifest: columns and checkpoints disagree");
    }
    out.columns = cols;
    out.values.resize(f.n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < ckpts.size(); ++j) {
      const phtail::Vae v = phtail::load_vae((dir / ckpts[j]).string());
      if (v.config.data_dim != 1) {
        throw std::invalid_argument("manifest model " + std::to_string(j) +
                                    " is not univariate");
      }
      out.values.col(static_cast<Eigen::Index>(j)) =
          phtail::generate(v, f.n, rng).col(0);
    }
  } else {
    const phtail::Vae v = phtail::load_vae(f.checkpoint);
    out.values = phtail::generate(v, f.n, rng);
    for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
      out.columns.push_back("x" + std::to_string(j));
    }
  }
  out.provenance = "sample checkpoint=" + f.checkpoint +
                   " n=" + std::to_string(f.n) +
                   " seed=" + std::to_string(f.seed);
  phtail::save_csv(out, f.out);
  std::cout << "wrote " << out.values.rows() << " samples to " << f.out << "\n";
  return 0;
}

// Aggregated cell: plain value for one run, mean +/- sd for several.
std::string metric_cell(const std::vector<double>& vals, std::size_t total) {
  if (vals.empty()) return "N/A";
  const double mean =
      std::accumulate(vals.begin(), vals.end(), 0.0) /
      static_cast<double>(vals.size());
  if (total == 1) return six(mean);
  double ss = 0.0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  const double sd =
      vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1))
                      : 0.0;
  std::string cell = six(mean) + " +/- " + six(sd) + " (n=" +
                     std::to_string(vals.size()) + ")";
  if (vals.size() < total) {
    cell += " [" + std::to_string(total - vals.size()) + " N/A]";
  }
  return cell;
}

void print_reports(const std::vector<phtail::MetricsReport>& runs) {
  const phtail::MetricsReport& first = runs.front();
  const std::size_t dims = first.ks_tail_by_dim.size();
  auto column_name = [&](std::size_t j) {
    return j < first.columns.size() ? first.columns[j]
                                    : "x" + std::to_string(j);
  };
  std::printf("%-28s %s\n", "metric", "value");
  for (std::size_t j = 0; j < dims; ++j) {
    std::vector<double> ks;
    for (const auto& r : runs) {
      if (r.ks_tail_by_dim[j]) ks.push_back(*r.ks_tail_by_dim[j]);
    }
    const std::string label =
        "ks_tail(" + six(first.ks_q) + ")[" + column_name(j) + "]";
    std::printf("%-28s %s\n", label.c_str(),
                metric_cell(ks, runs.size()).c_str());
  }
  for (std::size_t j = 0; j < dims; ++j) {
    std::vector<double> qr;
    for (const auto& r : runs) qr.push_back(r.q_rel_err_by_dim[j]);
    const std::string label =
        "q_rel_err(" + six(first.quantile_level) + ")[" + column_name(j) + "]";
    std::printf("%-28s %s\n", label.c_str(),
                metric_cell(qr, runs.size()).c_str());
  }
  std::vector<double> corr, tau;
  for (const auto& r : runs) {
    if (r.corr_err) corr.push_back(*r.corr_err);
    if (r.tau_err) tau.push_back(*r.tau_err);
  }
  if (!corr.empty()) {
    std::printf("%-28s %s\n", "corr_err",
                metric_cell(corr, runs.size()).c_str());
  }
  if (!tau.empty()) {
    std::printf("%-28s %s\n", "tau_err", metric_cell(tau, runs.size()).c_str());
  }
  for (std::size_t l = 0; l < first.coex_levels.size(); ++l) {
    std::vector<double> coex;
    for (const auto& r : runs) {
      if (l < r.coex_err_by_level.size()) {
        coex.push_back(r.coex_err_by_level[l]);
      }
    }
    const std::string label = "coex_err(" + six(first.coex_levels[l]) + ")";
    std::printf("%-28s %s\n", label.c_str(),
                metric_cell(coex, runs.size()).c_str());
  }
}

int cmd_eval(EvalFlags f) {
  if (f.gen.empty()) {
    throw std::invalid_argument("provide at least one --gen table");
  }
  if (f.coex_q.empty()) f.coex_q = {0.99};
  const bool has_real = !f.real.empty();
  if (!has_real && f.truth.empty()) {
    throw std::invalid_argument("provide --real or --truth");
  }
  if (has_real && !f.truth.empty()) {
    throw std::invalid_argument("--real and --truth are mutually exclusive");
  }
  phtail::MetricsOptions opt;
  opt.ks_q = f.ks_q;
  opt.quantile_level = f.q_level;
  opt.coex_levels = f.coex_q;
  opt.own_thresholds = f.own_thresholds;

  phtail::Dataset real;
  std::vector<phtail::MarginalSpec> marginals;
  if (has_real) {
    require_file(f.real, "--real");
    real = phtail::load_csv(f.real);
  } else {
    for (const std::string& t : f.truth) marginals.push_back(parse_marginal(t));
  }

  std::vector<phtail::MetricsReport> runs;
  phtail::Dataset first_gen;
  for (const std::string& path : f.gen) {
    require_file(path, "--gen");
    phtail::Dataset g = phtail::load_csv(path);
    phtail::MetricsReport r =
        has_real ? phtail::evaluate_against_samples(real.values, g.values, opt)
                 : phtail::evaluate_against_analytic(marginals, g.values, opt);
    r.columns = g.columns;
    r.gen_label = path;
    r.truth_label = has_real ? f.real : "analytic";
    runs.push_back(std::move(r));
    if (runs.size() == 1) first_gen = std::move(g);
  }

  const std::string json = runs.size() == 1
                               ? phtail::metrics_report_json(runs.front())
                               : phtail::metrics_aggregate_json(runs);
  if (!f.out_json.empty()) phtail::write_text_file(f.out_json, json);
  print_reports(runs);

  if (!f.ccdf.empty()) {
    if (f.ccdf_dim < 0 || f.ccdf_dim >= first_gen.values.cols()) {
      throw std::invalid_argument("--ccdf-dim out of range");
    }
    phtail::save_ccdf_csv(
        f.ccdf, phtail::empirical_ccdf(first_gen.values.col(f.ccdf_dim)));
  }
  return 0;
}

int cmd_fit_ph(const FitFlags& f) {
  require_file(f.data, "--data");
  if (f.m < 1) throw std::invalid_argument("--m must be >= 1");
  if (f.out.empty()) throw std::invalid_argument("--out is required");
  const phtail::Dataset d = phtail::load_csv(f.data);
  if (f.column < 0 || f.column >= d.values.cols()) {
    throw std::invalid_argument("--column out of range");
  }
  const Eigen::VectorXd x = d.values.col(f.column);
  const phtail::TrainConfig tc = base_train_config(
      f.epochs, f.batch_size, f.lr0, f.weight_decay, f.clip_norm, f.seed);
  const phtail::CanonicalPH fit = phtail::fit_canonical_ph(x, f.m, tc);
  phtail::write_text_file(f.out, phtail::to_json(fit));

  double nll = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    nll -= phtail::log_pdf(fit, x[i]);
  }
  nll /= static_cast<double>(x.size());
  std::cout << "fitted " << f.m << " phases: NLL " << six(nll)
            << ", model mean " << six(phtail::moment(fit, 1))
            << ", sample mean " << six(x.mean()) << "\n";

  if (!f.ccdf.empty()) {
    std::string text = "x,empirical,model\n";
    for (const phtail::CcdfPoint& p : phtail::empirical_ccdf(x)) {
      text += phtail::format_double(p.x);
      text += ',';
      text += phtail::format_double(p.survival);
      text += ',';
      text += phtail::format_double(phtail::ccdf(fit, p.x));
      text += '\n';
    }
    phtail::write_text_file(f.ccdf, text);
  }
  return 0;
}

int cmd_ablate(const AblateFlags& f) {
  require_file(f.data, "--data");
  require_fresh_dir(f.run_dir);
  if (f.n_gen < 2) throw std::invalid_argument("--n-gen must be >= 2");
  const phtail::Dataset data = phtail::load_csv(f.data);
  const Eigen::Index dims = data.values.cols();
  const long latent = resolve_latent(f.latent_dim, dims);

  // Star design: every m at beta = 1, then the center m at the other betas.
  std::vector<std::pair<long, double>> grid;
  for (long m : f.m_list) {
    if (m < 1) throw std::invalid_argument("--m must be >= 1");
    grid.emplace_back(m, 1.0);
  }
  for (double beta : f.beta_list) {
    if (!(beta >= 0.0)) throw std::invalid_argument("--beta must be >= 0");
    if (beta != 1.0) grid.emplace_back(kAblateCenterPhases, beta);
  }

  phtail::MetricsOptions opt;
  opt.ks_q = f.ks_q;
  opt.quantile_level = f.q_level;
  opt.coex_levels = f.coex_q.empty() ? std::vector<double>{0.99} : f.coex_q;

  fs::create_directories(f.run_dir);
  std::string table = "m,beta,final_nll,ks_tail,q_rel_err,corr_err,tau_err,coex_err\n";
  std::string timing = "m,beta,total_seconds,seconds_per_epoch\n";
  for (const auto& [m, beta] : grid) {
    const std::string row_dir = f.run_dir + "/m" + std::to_string(m) +
                                "_beta" + phtail::format_double(beta);
    phtail::Rng init(f.seed ^ kInitSeedMix);
    phtail::Vae v = phtail::make_ph_vae(
        vae_config(dims, latent, m, beta, f.hidden), init);
    phtail::TrainConfig tc = base_train_config(
        f.epochs, f.batch_size, f.lr0, f.weight_decay, f.clip_norm, f.seed);
    tc.run_dir = row_dir;
    const phtail::TrainLog log = phtail::train(v, data.values, tc);
    phtail::save_vae(v, row_dir + "/checkpoint.json");

    phtail::Rng sampler(f.seed);
    const Eigen::MatrixXd samples = phtail::generate(v, f.n_gen, sampler);
    phtail::MetricsReport r =
        phtail::evaluate_against_samples(data.values, samples, opt);
    r.columns = data.columns;
    phtail::write_text_file(row_dir + "/metrics.json",
                            phtail::metrics_report_json(r));

    // Dimension-averaged tail metrics; absent slots print as "na".
    std::vector<double> ks;
    for (const auto& kv : r.ks_tail_by_dim) {
      if (kv) ks.push_back(*kv);
    }
    const double q_rel =
        std::accumulate(r.q_rel_err_by_dim.begin(), r.q_rel_err_by_dim.end(),
                        0.0) /
        static_cast<double>(r.q_rel_err_by_dim.size());
    auto cell = [](bool present, double v) {
      return present ? phtail::format_double(v) : std::string("na");
    };
    const double ks_mean =
        ks.empty() ? 0.0
                   : std::accumulate(ks.begin(), ks.end(), 0.0) /
                         static_cast<double>(ks.size());
    table += std::to_string(m) + "," + phtail::format_double(beta) + "," +
             phtail::format_double(log.final_nll) + "," +
             cell(!ks.empty(), ks_mean) + "," + phtail::format_double(q_rel) +
             "," + cell(r.corr_err.has_value(), r.corr_err.value_or(0.0)) +
             "," + cell(r.tau_err.has_value(), r.tau_err.value_or(0.0)) + "," +
             cell(!r.coex_err_by_level.empty(),
                  r.coex_err_by_level.empty() ? 0.0 : r.coex_err_by_level[0]) +
             "\n";
    const double per_epoch =
        f.epochs > 0 ? log.total_seconds / static_cast<double>(f.epochs) : 0.0;
    timing += std::to_string(m) + "," + phtail::format_double(beta) + "," +
              phtail::format_double(log.total_seconds) + "," +
              phtail::format_double(per_epoch) + "\n";
    std::cout << "m=" << m << " beta=" << beta << ": final NLL "
              << six(log.final_nll) << " (" << six(log.total_seconds)
              << " s)\n";
  }
  phtail::write_text_file(f.run_dir + "/ablation.csv", table);
  phtail::write_text_file(f.run_dir + "/ablation_timing.csv", timing);
  std::cout << "wrote " << grid.size() << " rows to " << f.run_dir
            << "/ablation.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phase-type VAE toolkit for heavy-tailed data"};
  app.require_subcommand(1);

  GenFlags gf;
  CLI::App* gen = app.add_subcommand("gen", "generate synthetic data");
  gen->add_option("--family", gf.family,
                  "weibull | pareto | lognormal | burr");
  gen->add_option("--benchmark", gf.benchmark, "named table: mv5d");
  gen->add_option("--alpha", gf.alpha, "pareto tail index");
  gen->add_option("--xm", gf.xm, "pareto minimum");
  gen->add_option("--k", gf.k, "weibull shape / burr second shape");
  gen->add_option("--lambda", gf.lambda, "weibull scale");
  gen->add_option("--mu", gf.mu, "lognormal log mean");
  gen->add_option("--sigma", gf.sigma, "lognormal log sd");
  gen->add_option("--c", gf.c, "burr first shape");
  gen->add_option("--n", gf.n, "rows")->capture_default_str();
  gen->add_option("--seed", gf.seed, "rng seed")->capture_default_str();
  gen->add_option("--out", gf.out, "output CSV path");
  gen->add_option("--config", gf.config,
                  "flat key=value option file; typed flags win");

  TrainFlags tf;
  CLI::App* train = app.add_subcommand("train", "train a model on a CSV table");
  train->add_option("--data", tf.data, "training CSV");
  train->add_option("--run-dir", tf.run_dir, "fresh output directory");
  train
      ->add_option("--decoder", tf.decoder, "ph | gaussian | independent-ph")
      ->check(CLI::IsMember({"ph", "gaussian", "independent-ph"}))
      ->capture_default_str();
  train->add_option("--dims", tf.dims, "expected table dimensions (check)");
  train->add_option("--latent-dim", tf.latent_dim,
                    "latent size; 0 = 2 for 1-D data, 4 otherwise");
  train->add_option("--phases", tf.phases, "phases per output dimension")
      ->capture_default_str();
  train->add_option("--beta", tf.beta, "divergence weight")
      ->capture_default_str();
  train->add_option("--hidden", tf.hidden, "hidden width")
      ->capture_default_str();
  train->add_option("--epochs", tf.epochs, "epochs")->capture_default_str();
  train->add_option("--batch-size", tf.batch_size, "batch size")
      ->capture_default_str();
  train->add_option("--lr", tf.lr0, "initial learning rate")
      ->capture_default_str();
  train->add_option("--weight-decay", tf.weight_decay, "decoupled decay")
      ->capture_default_str();
  train->add_option("--clip-norm", tf.clip_norm, "global gradient norm cap")
      ->capture_default_str();
  train->add_option("--seed", tf.seed, "rng seed")->capture_default_str();
  train->add_option("--config", tf.config,
                  "flat key=value option file; typed flags win");

  SampleFlags sf;
  CLI::App* sample =
      app.add_subcommand("sample", "draw from a trained checkpoint");
  sample->add_option("--checkpoint", sf.checkpoint,
                     "checkpoint.json or manifest.json");
  sample->add_option("--n", sf.n, "samples")->capture_default_str();
  sample->add_option("--seed", sf.seed, "rng seed")->capture_default_str();
  sample->add_option("--out", sf.out, "output CSV path");
  sample->add_option("--config", sf.config,
                  "flat key=value option file; typed flags win");

  EvalFlags ef;
  CLI::App* eval =
      app.add_subcommand("eval", "tail and dependence metrics for a table");
  eval->add_option("--gen", ef.gen, "generated CSV (repeat to aggregate)");
  eval->add_option("--real", ef.real, "reference CSV table");
  eval->add_option("--truth", ef.truth,
                   "analytic marginal family:p1,p2 (one per dimension)");
  eval->add_option("--ks-q", ef.ks_q, "tail threshold quantile")
      ->capture_default_str();
  eval->add_option("--q-level", ef.q_level, "extreme quantile level")
      ->capture_default_str();
  eval->add_option("--coex-q", ef.coex_q, "co-exceedance levels (default 0.99)");
  eval->add_flag("--own-thresholds", ef.own_thresholds,
                 "generated table exceeds its own quantiles");
  eval->add_option("--out", ef.out_json, "metrics JSON path");
  eval->add_option("--ccdf", ef.ccdf, "export empirical CCDF CSV");
  eval->add_option("--ccdf-dim", ef.ccdf_dim, "column for --ccdf")
      ->capture_default_str();
  eval->add_option("--config", ef.config,
                  "flat key=value option file; typed flags win");

  FitFlags ff;
  CLI::App* fit =
      app.add_subcommand("fit-ph", "maximum-likelihood canonical phase type");
  fit->add_option("--data", ff.data, "data CSV");
  fit->add_option("--column", ff.column, "column index")->capture_default_str();
  fit->add_option("--m", ff.m, "phase count")->capture_default_str();
  fit->add_option("--epochs", ff.epochs, "epochs")->capture_default_str();
  fit->add_option("--batch-size", ff.batch_size, "batch size")
      ->capture_default_str();
  fit->add_option("--lr", ff.lr0, "initial learning rate")
      ->capture_default_str();
  fit->add_option("--weight-decay", ff.weight_decay, "decoupled decay")
      ->capture_default_str();
  fit->add_option("--clip-norm", ff.clip_norm, "global gradient norm cap")
      ->capture_default_str();
  fit->add_option("--seed", ff.seed, "rng seed")->capture_default_str();
  fit->add_option("--out", ff.out, "fitted model JSON path");
  fit->add_option("--ccdf", ff.ccdf, "empirical vs model CCDF CSV");
  fit->add_option("--config", ff.config,
                  "flat key=value option file; typed flags win");

  AblateFlags af;
  CLI::App* ablate =
      app.add_subcommand("ablate", "train and evaluate a (phases, beta) grid");
  ablate->add_option("--data", af.data, "training CSV");
  ablate->add_option("--run-dir", af.run_dir, "fresh output directory");
  ablate->add_option("--m", af.m_list, "phase counts (each runs at beta 1)");
  ablate->add_option("--beta", af.beta_list,
                     "divergence weights (non-1 values run at m 10)");
  ablate->add_option("--n-gen", af.n_gen, "samples per evaluation")
      ->capture_default_str();
  ablate->add_option("--latent-dim", af.latent_dim,
                     "latent size; 0 = 2 for 1-D data, 4 otherwise");
  ablate->add_option("--hidden", af.hidden, "hidden width")
      ->capture_default_str();
  ablate->add_option("--epochs", af.epochs, "epochs")->capture_default_str();
  ablate->add_option("--batch-size", af.batch_size, "batch size")
      ->capture_default_str();
  ablate->add_option("--lr", af.lr0, "initial learning rate")
      ->capture_default_str();
  ablate->add_option("--weight-decay", af.weight_decay, "decoupled decay")
      ->capture_default_str();
  ablate->add_option("--clip-norm", af.clip_norm, "global gradient norm cap")
      ->capture_default_str();
  ablate->add_option("--seed", af.seed, "rng seed")->capture_default_str();
  ablate->add_option("--ks-q", af.ks_q, "tail threshold quantile")
      ->capture_default_str();
  ablate->add_option("--q-level", af.q_level, "extreme quantile level")
      ->capture_default_str();
  ablate->add_option("--coex-q", af.coex_q,
                     "co-exceedance levels (default 0.99)");
  ablate->add_option("--config", af.config,
                  "flat key=value option file; typed flags win");

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = with_config_args(std::move(args));
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(gf);
    if (train->parsed()) return cmd_train(tf);
    if (sample->parsed()) return cmd_sample(sf);
    if (eval->parsed()) return cmd_eval(ef);
    if (fit->parsed()) return cmd_fit_ph(ff);
    if (ablate->parsed()) return cmd_ablate(af);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
