#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "bumphunt/bench.hpp"
#include "bumphunt/dataset.hpp"
#include "bumphunt/errors.hpp"
#include "bumphunt/fastprim.hpp"
#include "bumphunt/io.hpp"
#include "bumphunt/pca.hpp"
#include "bumphunt/prim.hpp"

namespace fs = std::filesystem;
using namespace bumphunt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::uint64_t parse_seed(const std::string& text, const std::string& source) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(source + ": '" + text + "' is not an unsigned integer seed");
  }
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("BUMPHUNT_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  return parse_seed(v, "BUMPHUNT_SEED");
}

json manifest(const std::string& subcommand, const json& config, std::uint64_t seed, const json& inputs,
              const json& outputs) {
  return {{"subcommand", subcommand}, {"config", config},     {"master_seed", seed},
          {"version", BUMPHUNT_VERSION}, {"inputs", inputs}, {"outputs", outputs},
          {"timestamp", timestamp()}};
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir + "': " + ec.message());
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

// generate

struct GenerateOptions {
  int p = 2;
  Index n = 1000;
  double w = 1.0;
  double mu = 1.0;
  double sigma_response = 0.2;
  std::optional<std::string> seed;
  std::string preset = "equicorrelated";
  double rho = 0.5;
  std::vector<double> variances;
  std::optional<std::string> covariance_file;
  std::optional<double> noise_lower, noise_upper;
  std::string out = "dataset.csv";
};

CovarianceBuild covariance_from_file(const std::string& path, int p) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open covariance file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("covariance file '" + path + "': " + e.what());
  }
  if (!j.is_object() || !j.contains("correlation")) {
    throw ValidationError("covariance file needs a 'correlation' matrix and optional 'variances'");
  }
  Eigen::MatrixXd r(p, p);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(p);
  try {
    const auto rows = j.at("correlation").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(rows.size()) != p) throw ValidationError("covariance file: correlation is not " +
                                                                  std::to_string(p) + "x" + std::to_string(p));
    for (int a = 0; a < p; ++a) {
      if (static_cast<int>(rows[static_cast<std::size_t>(a)].size()) != p)
        throw ValidationError("covariance file: correlation row " + std::to_string(a) + " has the wrong length");
      for (int b = 0; b < p; ++b) r(a, b) = rows[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
    }
    if (j.contains("variances")) {
      const auto vs = j.at("variances").get<std::vector<double>>();
      if (static_cast<int>(vs.size()) != p) throw ValidationError("covariance file: expected " + std::to_string(p) +
                                                                  " variances");
      for (int a = 0; a < p; ++a) v(a) = vs[static_cast<std::size_t>(a)];
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("covariance file: ") + e.what());
  }
  return build_covariance(v, r);
}

int run_generate(const GenerateOptions& o) {
  if (o.noise_lower.has_value() != o.noise_upper.has_value()) {
    throw ValidationError("--noise-lower and --noise-upper go together");
  }
  std::uint64_t seed = 1;
  if (o.seed)
    seed = parse_seed(*o.seed, "--seed");
  else if (auto e = env_seed())
    seed = *e;

  CovarianceSpec spec{o.preset, o.rho, o.variances};
  const CovarianceBuild cov = o.covariance_file ? covariance_from_file(*o.covariance_file, o.p) : make_covariance(spec, o.p);
  MixtureConfig cfg = single_target_design(cov.sigma, o.n, o.mu, o.sigma_response, o.w);
  if (o.noise_lower) cfg.noise_bounds = std::make_pair(*o.noise_lower, *o.noise_upper);
  const MixtureSample sample = sample_mixture(cfg, seed);
  write_csv(o.out, sample.data, true);

  json config = {{"p", o.p},
                 {"n", o.n},
                 {"w", o.w},
                 {"mu", o.mu},
                 {"sigma_response", o.sigma_response},
                 {"covariance", o.covariance_file ? json{{"file", *o.covariance_file}}
                                                  : json{{"preset", o.preset}, {"rho", o.rho}, {"variances", o.variances}}},
                 {"covariance_repaired", cov.repaired},
                 {"noise_lower", std::vector<double>(sample.info.noise_lower.data(),
                                                     sample.info.noise_lower.data() + sample.info.noise_lower.size())},
                 {"noise_upper", std::vector<double>(sample.info.noise_upper.data(),
                                                     sample.info.noise_upper.data() + sample.info.noise_upper.size())},
                 {"noise_bounds_from_data", sample.info.noise_bounds_from_data},
                 {"noise_rows", sample.info.noise_rows}};
  const std::string manifest_path = o.out + ".manifest.json";
  write_json(manifest_path, manifest("generate", config, seed, json::array(), {o.out, manifest_path}));
  std::cout << "wrote " << sample.data.rows() << " rows x " << sample.data.dims() << " predictors to " << o.out
            << " (" << sample.info.noise_rows << " noise rows)\n";
  return kExitOk;
}

// hunt

struct HuntOptions {
  std::string input;
  std::string response = "z";
  std::string algorithm = "prim";
  std::string space = "input";
  double alpha = 0.05;
  double beta = 0.05;
  int coverage = 20;
  bool paste = false;
  Index p_prime = 0;
  std::string mode = "closed-form";
  bool literal_quantiles = false;
  std::optional<double> rho;
  std::string out_dir = "hunt-out";
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

void print_box(const AxisBox& box, const std::vector<std::string>& names) {
  for (Index j = 0; j < box.dims(); ++j) {
    const bool lo = std::isfinite(box.lower(j));
    const bool hi = std::isfinite(box.upper(j));
    if (!lo && !hi) continue;
    std::cout << "  ";
    if (lo) std::cout << fmt(box.lower(j)) << " <= ";
    std::cout << names[static_cast<std::size_t>(j)];
    if (hi) std::cout << " <= " << fmt(box.upper(j));
    std::cout << '\n';
  }
}

void print_rule(const json& rule, const std::vector<std::string>& input_names) {
  for (const auto& c : rule) {
    std::cout << "  ";
    if (!c["lower"].is_null()) std::cout << fmt(c["lower"].get<double>()) << " <= ";
    const auto coef = c["coefficients"].get<std::vector<double>>();
    for (std::size_t k = 0; k < coef.size(); ++k) {
      const double a = coef[k];
      if (k == 0)
        std::cout << (a < 0 ? "-" : "");
      else
        std::cout << (a < 0 ? " - " : " + ");
      std::cout << fmt(std::abs(a)) << "*" << input_names[k];
    }
    if (!c["upper"].is_null()) std::cout << " <= " << fmt(c["upper"].get<double>());
    std::cout << '\n';
  }
}

int run_hunt(const HuntOptions& o) {
  const Algorithm algorithm = parse_algorithm(o.algorithm);
  const Space space = parse_space(o.space);
  if (o.mode != "closed-form" && o.mode != "iterative") throw ValidationError("--mode must be closed-form or iterative");
  if (algorithm == Algorithm::kPrim && o.p_prime != 0) throw ValidationError("--p-prime applies to fastprim only");
  if (algorithm == Algorithm::kFastPrim && o.paste) throw ValidationError("fastprim has no pasting stage");

  CsvOptions csv;
  csv.response = o.response;
  const Dataset data = load_csv(o.input, csv);
  data.validate();
  std::vector<std::string> input_names;
  for (Index j = 0; j < data.dims(); ++j) input_names.push_back(data.name(j));

  std::optional<RotationModel> model;
  Dataset work;
  if (space == Space::kPc) {
    model = fit_rotation(data);
    work = rotate(data, *model);
  } else {
    work = data;
  }
  std::vector<std::string> names;
  for (Index j = 0; j < work.dims(); ++j) names.push_back(work.name(j));

  ensure_dir(o.out_dir);
  const std::string trace_path = path_in(o.out_dir, "trace.json");
  const std::string box_path = path_in(o.out_dir, "box.csv");
  const std::string rule_path = path_in(o.out_dir, "rule.json");
  const std::string manifest_path = path_in(o.out_dir, "manifest.json");
  json outputs = {trace_path, box_path};

  json config = {{"algorithm", o.algorithm}, {"space", o.space}, {"alpha", o.alpha}, {"beta", o.beta},
                 {"coverage", o.coverage},   {"response", o.response}};
  AxisBox box;
  BoxStats stats;
  json report;
  if (algorithm == Algorithm::kPrim) {
    PrimConfig cfg;
    cfg.alpha = o.alpha;
    cfg.beta = o.beta;
    cfg.coverage = o.coverage;
    cfg.pasting = o.paste;
    cfg.rho = o.rho;
    config["paste"] = o.paste;
    if (o.rho) config["rho"] = *o.rho;
    const BoxTrace trace = cover(work, cfg);
    const RegionSummary region = summarize_rounds(work, trace, o.coverage);
    box = region.hull;
    stats = region.stats;
    report = to_json(trace);
    report["region"] = to_json(region);
    std::cout << "prim: " << trace.rounds.size() << " rounds, " << region.accepted << " accepted";
    if (trace.stopped_early) std::cout << " (stopped early)";
    std::cout << '\n';
    for (std::size_t k = 0; k < trace.rounds.size(); ++k) {
      const auto& r = trace.rounds[k];
      std::cout << "round " << k + 1 << ": " << r.peels << " peels, support " << fmt(r.stats.support) << ", mean "
                << fmt(r.stats.output_mean) << (r.accepted ? ", accepted" : ", rejected") << '\n';
    }
  } else {
    FastPrimConfig cfg;
    cfg.beta = o.beta;
    cfg.coverage = o.coverage;
    cfg.alpha = o.alpha;
    cfg.p_prime = o.p_prime;
    cfg.mode = o.mode == "iterative" ? FastPrimMode::kIterative : FastPrimMode::kClosedForm;
    cfg.literal_quantiles = o.literal_quantiles;
    config["p_prime"] = o.p_prime;
    config["mode"] = o.mode;
    config["literal_quantiles"] = o.literal_quantiles;
    report = {{"algorithm", "fastprim"}, {"beta_total", beta_total(o.beta, o.coverage)}};
    if (cfg.mode == FastPrimMode::kIterative) {
      const FastPrimTrace it = fastprim_iterative(work, cfg);
      box = it.region.hull;
      stats = it.region.stats;
      report["trace"] = to_json(it.trace);
      report["region"] = to_json(it.region);
    } else {
      const CentralBox cb = central_box_empirical(work, cfg);
      box = cb.box;
      stats = cb.stats;
    }
    report["box"] = to_json(box);
    report["stats"] = to_json(stats);
    std::cout << "fastprim: beta_T " << fmt(beta_total(o.beta, o.coverage)) << '\n';
  }
  if (model) report["rotation"] = to_json(*model);

  write_json(trace_path, report);
  write_box_csv(box_path, box, names);
  std::cout << "support " << fmt(stats.support) << " (" << stats.count << " of " << work.rows() << "), mean "
            << fmt(stats.output_mean) << '\n';
  std::cout << "box:\n";
  print_box(box, names);
  if (model) {
    RotationModel m = *model;
    if (algorithm == Algorithm::kFastPrim) m.p_prime = o.p_prime == 0 ? m.dims() : o.p_prime;
    const json rule = to_json(box_to_input_rule(box, m));
    write_json(rule_path, rule);
    outputs.push_back(rule_path);
    std::cout << "rule in input coordinates:\n";
    print_rule(rule, input_names);
  }
  outputs.push_back(manifest_path);
  write_json(manifest_path, manifest("hunt", config, 0, {o.input}, outputs));
  return kExitOk;
}

// experiment

struct ExperimentOptions {
  std::optional<std::string> design;
  std::optional<std::string> seed;
  std::optional<int> replicates;
  std::optional<int> threads;
  std::vector<int> dims;
  std::vector<int> coverages;
  std::string out_dir = "experiment-out";
};

int run_experiment_cmd(const ExperimentOptions& o) {
  json raw = json::object();
  if (o.design) {
    std::ifstream in(*o.design);
    if (!in) throw DataError("cannot open design file '" + *o.design + "'");
    try {
      in >> raw;
    } catch (const json::exception& e) {
      throw ValidationError("design file '" + *o.design + "': " + e.what());
    }
  }
  ExperimentDesign design = design_from_json(raw);
  if (o.seed)
    design.master_seed = parse_seed(*o.seed, "--seed");
  else if (!raw.contains("master_seed"))
    if (auto e = env_seed()) design.master_seed = *e;
  if (o.replicates) design.replicates = *o.replicates;
  if (o.threads) design.threads = *o.threads;
  if (!o.dims.empty()) design.dims = o.dims;
  if (!o.coverages.empty()) design.coverages = o.coverages;
  design.validate();

  json identity = to_json(design);
  identity.erase("threads");
  identity.erase("master_seed");
  const std::string hash = fnv1a_hex(identity.dump());
  const std::string tag = hash + "_" + std::to_string(design.master_seed);

  const std::vector<MetricsRecord> records = run_experiment(design);
  ensure_dir(o.out_dir);
  const std::string results_path = path_in(o.out_dir, "results_" + tag + ".csv");
  const std::string summary_path = path_in(o.out_dir, "summary_" + tag + ".json");
  const std::string manifest_path = path_in(o.out_dir, "manifest_" + tag + ".json");
  write_metrics_csv(results_path, records);

  json cells = json::array();
  for (const auto& c : aggregate(records)) cells.push_back(to_json(c));
  json gains = json::array();
  for (const auto& g : gain_profile(records)) gains.push_back(to_json(g));
  int failed = 0;
  for (const auto& r : records) failed += r.ok ? 0 : 1;
  write_json(summary_path, {{"design_hash", hash},
                            {"master_seed", design.master_seed},
                            {"records", records.size()},
                            {"failed", failed},
                            {"cells", cells},
                            {"gain_profile", gains}});
  write_json(manifest_path, manifest("experiment", to_json(design), design.master_seed,
                                     o.design ? json{*o.design} : json::array(),
                                     {results_path, summary_path, manifest_path}));

  std::cout << records.size() << " records (" << failed << " failed) -> " << results_path << '\n';
  std::cout << "gain profile (pc / input volume-adjusted mean):\n";
  for (const auto& g : gain_profile(records)) {
    std::cout << "  " << std::setw(8) << to_string(g.algorithm) << "  p=" << std::setw(3) << g.p << "  t="
              << std::setw(2) << g.coverage << "  ";
    if (g.missing)
      std::cout << "missing\n";
    else
      std::cout << "ratio " << fmt(g.ratio) << " +/- " << fmt(g.ratio_se) << "  (" << g.matched << " matched)\n";
  }
  return failed == 0 ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bump hunting with PRIM and fastPRIM in input and principal-component space"};
  app.require_subcommand(1);
  app.set_version_flag("--version", BUMPHUNT_VERSION);

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Sample a synthetic dataset");
  g->add_option("--p", gen.p, "Dimension")->check(CLI::PositiveNumber);
  g->add_option("--n", gen.n, "Sample size")->check(CLI::PositiveNumber);
  g->add_option("--w", gen.w, "Weight of the Gaussian target")->check(CLI::Range(0.0, 1.0));
  g->add_option("--mu", gen.mu, "Response mean");
  g->add_option("--sigma-response", gen.sigma_response, "Response standard deviation")->check(CLI::NonNegativeNumber);
  g->add_option("--seed", gen.seed, "Seed (default: BUMPHUNT_SEED, else 1)");
  auto* preset = g->add_option("--covariance-preset", gen.preset, "identity | equicorrelated | ar1")
                     ->check(CLI::IsMember({"identity", "equicorrelated", "ar1"}));
  auto* rho = g->add_option("--rho", gen.rho, "Correlation parameter of the preset");
  auto* variances = g->add_option("--variances", gen.variances, "Marginal variances");
  g->add_option("--covariance-file", gen.covariance_file, "JSON with 'correlation' and optional 'variances'")
      ->check(CLI::ExistingFile)
      ->excludes(preset)
      ->excludes(rho)
      ->excludes(variances);
  g->add_option("--noise-lower", gen.noise_lower, "Lower bound of the uniform noise");
  g->add_option("--noise-upper", gen.noise_upper, "Upper bound of the uniform noise");
  g->add_option("--out", gen.out, "Output CSV");

  HuntOptions hunt;
  auto* h = app.add_subcommand("hunt", "Find the bump in a CSV dataset");
  h->add_option("input", hunt.input, "Input CSV")->required();
  h->add_option("--response", hunt.response, "Response column");
  h->add_option("--algorithm", hunt.algorithm, "prim | fastprim")->check(CLI::IsMember({"prim", "fastprim"}));
  h->add_option("--space", hunt.space, "input | pc")->check(CLI::IsMember({"input", "pc"}));
  h->add_option("--alpha", hunt.alpha, "Peeling fraction");
  h->add_option("--beta", hunt.beta, "Minimal box support per round");
  h->add_option("--coverage", hunt.coverage, "Covering rounds")->check(CLI::PositiveNumber);
  h->add_flag("--paste", hunt.paste, "Enable pasting (prim)");
  h->add_option("--rho", hunt.rho, "Box acceptance threshold (prim, default: mean response)");
  h->add_option("--p-prime", hunt.p_prime, "Peeled dimensions (fastprim, 0 = all)")->check(CLI::NonNegativeNumber);
  h->add_option("--mode", hunt.mode, "closed-form | iterative (fastprim)")
      ->check(CLI::IsMember({"closed-form", "iterative"}));
  h->add_flag("--literal-quantiles", hunt.literal_quantiles, "Vertices at b/2 and 1 - b/2 (fastprim)");
  h->add_option("--out-dir", hunt.out_dir, "Output directory");

  ExperimentOptions exp;
  auto* e = app.add_subcommand("experiment", "Run a Monte-Carlo sweep");
  e->add_option("design", exp.design, "Design JSON file")->check(CLI::ExistingFile);
  e->add_option("--seed", exp.seed, "Master seed (overrides the design)");
  e->add_option("--replicates", exp.replicates, "Replicates per cell")->check(CLI::PositiveNumber);
  e->add_option("--threads", exp.threads, "Worker threads")->check(CLI::PositiveNumber);
  e->add_option("--dims", exp.dims, "Dimension grid");
  e->add_option("--coverages", exp.coverages, "Coverage grid");
  e->add_option("--out-dir", exp.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*g) return run_generate(gen);
    if (*h) return run_hunt(hunt);
    if (*e) return run_experiment_cmd(exp);
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const DataError& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kExitData;
  } catch (const NumericalError& err) {
    std::cerr << "numerical error: " << err.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
