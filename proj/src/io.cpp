#include "bumphunt/io.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "bumphunt/errors.hpp"

namespace bumphunt {

namespace {

json bound(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(finite_or_null(v(i)));
  return a;
}

json mean_se_json(const MeanSe& m) {
  return {{"mean", finite_or_null(m.mean)}, {"se", finite_or_null(m.se)},
          {"variance", finite_or_null(m.variance)}, {"count", m.count}};
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

json to_json(const AxisBox& box) {
  json lower = json::array();
  json upper = json::array();
  for (Index j = 0; j < box.dims(); ++j) {
    lower.push_back(bound(box.lower(j)));
    upper.push_back(bound(box.upper(j)));
  }
  return {{"lower", lower}, {"upper", upper}};
}

json to_json(const BoxStats& s) {
  return {{"count", s.count},
          {"n_active", s.n_active},
          {"support", s.support},
          {"output_sum_fraction", s.output_sum_fraction},
          {"output_mean", finite_or_null(s.output_mean)},
          {"empty", s.empty()}};
}

json to_json(const TraceStep& step) {
  json j = {{"round", step.round}, {"action", to_string(step.action)}, {"stats", to_json(step.stats)}};
  if (step.action == TraceAction::kPeel || step.action == TraceAction::kPaste) {
    j["dim"] = step.dim;
    j["side"] = to_string(step.side);
    j["value"] = step.value;
  }
  return j;
}

json to_json(const BoxTrace& trace) {
  json steps = json::array();
  for (const auto& s : trace.steps) steps.push_back(to_json(s));
  json boxes = json::array();
  for (const auto& r : trace.rounds) {
    boxes.push_back({{"box", to_json(r.box)},
                     {"stats", to_json(r.stats)},
                     {"accepted", r.accepted},
                     {"peels", r.peels},
                     {"paste_iterations", r.paste_iterations},
                     {"seconds", r.seconds}});
  }
  return {{"n", trace.n}, {"rho", trace.rho}, {"stopped_early", trace.stopped_early}, {"steps", steps},
          {"boxes", boxes}};
}

json to_json(const RegionSummary& region) {
  return {{"rounds", region.rounds},
          {"accepted", region.accepted},
          {"stats", to_json(region.stats)},
          {"hull", to_json(region.hull)},
          {"hull_support", region.hull_support},
          {"hollow", region.hollow}};
}

json to_json(const RotationModel& model) {
  json gamma = json::array();
  for (Index j = 0; j < model.gamma.cols(); ++j) gamma.push_back(vec(model.gamma.col(j)));
  return {{"center", vec(model.center)}, {"axes", gamma}, {"lambda", vec(model.lambda)}, {"p_prime", model.p_prime}};
}

json to_json(const LinearRule& rule) {
  json out = json::array();
  for (const auto& c : rule.constraints) {
    const double shift = c.coefficients.dot(rule.center);
    out.push_back({{"coefficients", vec(c.coefficients)},
                   {"lower", c.lower ? json(*c.lower + shift) : json(nullptr)},
                   {"upper", c.upper ? json(*c.upper + shift) : json(nullptr)}});
  }
  return out;
}

void write_box_csv(const std::string& path, const AxisBox& box, const std::vector<std::string>& names) {
  std::ofstream out = open_out(path);
  out << "dim,name,lower,upper\n";
  for (Index j = 0; j < box.dims(); ++j) {
    const std::string name = static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)]
                                                                         : "x" + std::to_string(j + 1);
    out << j << ',' << csv_field(name) << ',' << num(box.lower(j)) << ',' << num(box.upper(j)) << '\n';
  }
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records) {
  std::ofstream out = open_out(path);
  out << "algorithm,space,p,p_prime,n,coverage,replicate,seed,support,count,output_mean,log_volume,"
         "volume_fallback,log_volume_adjusted_mean,mode_mass,seconds,ok,error\n";
  for (const auto& r : records) {
    out << to_string(r.algorithm) << ',' << to_string(r.space) << ',' << r.p << ',' << r.p_prime << ',' << r.n
        << ',' << r.coverage << ',' << r.replicate << ',' << r.seed << ',' << num(r.support) << ',' << r.count << ','
        << num(r.output_mean) << ',' << num(r.log_volume) << ',' << (r.volume_fallback ? 1 : 0) << ','
        << num(r.log_volume_adjusted_mean) << ',' << num(r.mode_mass) << ',' << num(r.seconds) << ','
        << (r.ok ? 1 : 0) << ',' << csv_field(r.error) << '\n';
  }
}

json to_json(const CellAggregate& c) {
  return {{"algorithm", to_string(c.algorithm)},
          {"space", to_string(c.space)},
          {"p", c.p},
          {"p_prime", c.p_prime},
          {"coverage", c.coverage},
          {"ok", c.ok},
          {"failed", c.failed},
          {"support", mean_se_json(c.support)},
          {"output_mean", mean_se_json(c.output_mean)},
          {"log_volume", mean_se_json(c.log_volume)},
          {"log_volume_adjusted_mean", mean_se_json(c.log_volume_adjusted_mean)},
          {"mode_mass", mean_se_json(c.mode_mass)},
          {"seconds", mean_se_json(c.seconds)}};
}

json to_json(const GainRow& g) {
  return {{"algorithm", to_string(g.algorithm)},
          {"p", g.p},
          {"coverage", g.coverage},
          {"matched", g.matched},
          {"ratio", finite_or_null(g.ratio)},
          {"ratio_se", finite_or_null(g.ratio_se)},
          {"mean_log_ratio", finite_or_null(g.mean_log_ratio)},
          {"fraction_above_one", finite_or_null(g.fraction_above_one)},
          {"missing", g.missing}};
}

json to_json(const ExperimentDesign& d) {
  json algorithms = json::array();
  for (auto a : d.algorithms) algorithms.push_back(to_string(a));
  json spaces = json::array();
  for (auto s : d.spaces) spaces.push_back(to_string(s));
  return {{"algorithms", algorithms},
          {"spaces", spaces},
          {"dims", d.dims},
          {"coverages", d.coverages},
          {"replicates", d.replicates},
          {"master_seed", d.master_seed},
          {"n", d.n},
          {"w", d.w},
          {"mu", d.mu},
          {"sigma", d.sigma},
          {"covariance",
           {{"preset", d.covariance.preset}, {"rho", d.covariance.rho}, {"variances", d.covariance.variances}}},
          {"alpha", d.alpha},
          {"beta", d.beta},
          {"pasting", d.pasting},
          {"p_prime", d.p_prime},
          {"fastprim_mode", d.fastprim_mode == FastPrimMode::kClosedForm ? "closed-form" : "iterative"},
          {"threads", d.threads}};
}

namespace {

void require_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ValidationError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("design: key '" + key + "' has the wrong type");
  }
}

}  // namespace

ExperimentDesign design_from_json(const json& j) {
  require_keys(j,
               {"algorithms", "spaces", "dims", "coverages", "replicates", "master_seed", "n", "w", "mu", "sigma",
                "covariance", "alpha", "beta", "pasting", "p_prime", "fastprim_mode", "threads"},
               "design");
  ExperimentDesign d;
  if (j.contains("algorithms")) {
    d.algorithms.clear();
    for (const auto& s : get_as<std::vector<std::string>>(j, "algorithms")) d.algorithms.push_back(parse_algorithm(s));
  }
  if (j.contains("spaces")) {
    d.spaces.clear();
    for (const auto& s : get_as<std::vector<std::string>>(j, "spaces")) d.spaces.push_back(parse_space(s));
  }
  if (j.contains("dims")) d.dims = get_as<std::vector<int>>(j, "dims");
  if (j.contains("coverages")) d.coverages = get_as<std::vector<int>>(j, "coverages");
  if (j.contains("replicates")) d.replicates = get_as<int>(j, "replicates");
  if (j.contains("master_seed")) d.master_seed = get_as<std::uint64_t>(j, "master_seed");
  if (j.contains("n")) d.n = get_as<Index>(j, "n");
  if (j.contains("w")) d.w = get_as<double>(j, "w");
  if (j.contains("mu")) d.mu = get_as<double>(j, "mu");
  if (j.contains("sigma")) d.sigma = get_as<double>(j, "sigma");
  if (j.contains("covariance")) {
    const json& c = j.at("covariance");
    require_keys(c, {"preset", "rho", "variances"}, "design.covariance");
    if (c.contains("preset")) d.covariance.preset = get_as<std::string>(c, "preset");
    if (c.contains("rho")) d.covariance.rho = get_as<double>(c, "rho");
    if (c.contains("variances")) d.covariance.variances = get_as<std::vector<double>>(c, "variances");
  }
  if (j.contains("alpha")) d.alpha = get_as<double>(j, "alpha");
  if (j.contains("beta")) d.beta = get_as<double>(j, "beta");
  if (j.contains("pasting")) d.pasting = get_as<bool>(j, "pasting");
  if (j.contains("p_prime")) d.p_prime = get_as<Index>(j, "p_prime");
  if (j.contains("fastprim_mode")) {
    const auto mode = get_as<std::string>(j, "fastprim_mode");
    if (mode == "closed-form")
      d.fastprim_mode = FastPrimMode::kClosedForm;
    else if (mode == "iterative")
      d.fastprim_mode = FastPrimMode::kIterative;
    else
      throw ValidationError("design: fastprim_mode must be closed-form or iterative");
  }
  if (j.contains("threads")) d.threads = get_as<int>(j, "threads");
  d.validate();
  return d;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

}  // namespace bumphunt
