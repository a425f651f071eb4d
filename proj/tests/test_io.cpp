#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "bumphunt/errors.hpp"
#include "bumphunt/io.hpp"

using namespace bumphunt;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("bumphunt_test_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("to_json: open box sides are null") {
  const double inf = std::numeric_limits<double>::infinity();
  AxisBox box{Eigen::Vector2d(-inf, 0.5), Eigen::Vector2d(1.5, inf)};
  const json j = to_json(box);
  CHECK(j["lower"][0].is_null());
  CHECK(j["lower"][1] == 0.5);
  CHECK(j["upper"][0] == 1.5);
  CHECK(j["upper"][1].is_null());
}

TEST_CASE("to_json: empty box stats have a null mean") {
  const json j = to_json(make_stats(0, 0.0, 10));
  CHECK(j["output_mean"].is_null());
  CHECK(j["empty"] == true);
  CHECK(j["n_active"] == 10);
}

TEST_CASE("to_json: linear rule folds the center into the bounds") {
  LinearRule rule;
  rule.center = Eigen::Vector2d(1.0, 2.0);
  rule.constraints.push_back({Eigen::Vector2d(1.0, 1.0), -1.0, std::nullopt});
  rule.constraints.push_back({Eigen::Vector2d(0.0, 1.0), std::nullopt, 0.5});
  const json j = to_json(rule);
  REQUIRE(j.size() == 2);
  CHECK(j[0]["lower"] == doctest::Approx(2.0));
  CHECK(j[0]["upper"].is_null());
  CHECK(j[1]["upper"] == doctest::Approx(2.5));
  CHECK(j[1]["coefficients"][1] == 1.0);
}

TEST_CASE("to_json: trace steps carry face details only for peels and pastes") {
  TraceStep peel{1, TraceAction::kPeel, 2, Side::kHigh, 0.75, make_stats(5, 5.0, 10)};
  const json a = to_json(peel);
  CHECK(a["action"] == "peel");
  CHECK(a["side"] == "high");
  CHECK(a["dim"] == 2);
  TraceStep accept{1, TraceAction::kAcceptBox, -1, Side::kLow, 0.0, make_stats(5, 5.0, 10)};
  const json b = to_json(accept);
  CHECK(b["action"] == "accept-box");
  CHECK_FALSE(b.contains("dim"));
}

TEST_CASE("design JSON round trips") {
  ExperimentDesign d;
  d.algorithms = {Algorithm::kFastPrim};
  d.spaces = {Space::kPc};
  d.dims = {3, 7};
  d.coverages = {1, 20};
  d.replicates = 5;
  d.master_seed = 123456789012345ULL;
  d.covariance.preset = "ar1";
  d.covariance.rho = 0.3;
  d.p_prime = 2;
  d.fastprim_mode = FastPrimMode::kIterative;
  d.threads = 3;
  const auto e = design_from_json(to_json(d));
  CHECK(to_json(e) == to_json(d));
  CHECK(e.master_seed == 123456789012345ULL);
  CHECK(e.fastprim_mode == FastPrimMode::kIterative);
}

TEST_CASE("design_from_json: missing keys keep defaults") {
  const auto d = design_from_json(json::parse(R"({"dims": [4], "replicates": 3})"));
  CHECK(d.dims == std::vector<int>{4});
  CHECK(d.replicates == 3);
  CHECK(d.n == ExperimentDesign{}.n);
}

TEST_CASE("design_from_json: strict errors") {
  CHECK_THROWS_AS(design_from_json(json::parse(R"({"dimz": [2]})")), ValidationError);
  CHECK_THROWS_AS(design_from_json(json::parse(R"({"dims": "2"})")), ValidationError);
  CHECK_THROWS_AS(design_from_json(json::parse(R"({"algorithms": ["cart"]})")), ValidationError);
  CHECK_THROWS_AS(design_from_json(json::parse(R"({"fastprim_mode": "fast"})")), ValidationError);
  CHECK_THROWS_AS(design_from_json(json::parse(R"({"covariance": {"kind": "ar1"}})")), ValidationError);
  CHECK_THROWS_AS(design_from_json(json::parse(R"({"replicates": 0})")), ValidationError);
  CHECK_THROWS_AS(design_from_json(json::parse("[1, 2]")), ValidationError);
}

TEST_CASE("fnv1a_hex: reference vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("write_box_csv: names, infinities and full precision") {
  const double inf = std::numeric_limits<double>::infinity();
  AxisBox box{Eigen::Vector2d(-inf, 0.1), Eigen::Vector2d(1.0 / 3.0, inf)};
  const auto path = temp_path("box.csv");
  write_box_csv(path, box, {"height"});
  const std::string text = slurp(path);
  CHECK(text.rfind("dim,name,lower,upper\n", 0) == 0);
  CHECK(text.find("0,height,-inf,0.33333333333333331\n") != std::string::npos);
  CHECK(text.find("1,x2,0.10000000000000001,inf\n") != std::string::npos);
}

TEST_CASE("write_metrics_csv: header and quoted errors") {
  MetricsRecord ok;
  ok.p = 2;
  ok.support = 0.25;
  MetricsRecord bad;
  bad.algorithm = Algorithm::kPrim;
  bad.ok = false;
  bad.error = "cover: n, beta \"too small\"";
  bad.log_volume = -std::numeric_limits<double>::infinity();
  const auto path = temp_path("metrics.csv");
  write_metrics_csv(path, {ok, bad});
  std::ifstream in(path);
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  CHECK(header.rfind("algorithm,space,p,p_prime,n,coverage,replicate,seed,support", 0) == 0);
  CHECK(first.rfind("fastprim,input,2,", 0) == 0);
  CHECK(first.find(",1,") != std::string::npos);
  CHECK(second.find(",-inf,") != std::string::npos);
  CHECK(second.find("\"cover: n, beta \"\"too small\"\"\"") != std::string::npos);
}

TEST_CASE("write_json: cannot open") {
  CHECK_THROWS_AS(write_json("/nonexistent/dir/out.json", json::object()), DataError);
}
