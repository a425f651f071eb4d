#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "bumphunt/bench.hpp"
#include "bumphunt/errors.hpp"
#include "bumphunt/numkernel.hpp"

using namespace bumphunt;

namespace {

ExperimentDesign small_design() {
  ExperimentDesign d;
  d.dims = {2};
  d.coverages = {1, 5};
  d.replicates = 2;
  d.n = 400;
  d.master_seed = 77;
  return d;
}

MetricsRecord record(Space s, int replicate, double log_va, Index p = 2, int t = 1) {
  MetricsRecord r;
  r.algorithm = Algorithm::kFastPrim;
  r.space = s;
  r.p = p;
  r.coverage = t;
  r.replicate = replicate;
  r.log_volume_adjusted_mean = log_va;
  return r;
}

double simpson(const std::function<double(double)>& f, double a, double b, int intervals) {
  const double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int k = 1; k < intervals; ++k) s += f(a + k * h) * (k % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("box_volume: closed box") {
  AxisBox box{Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(2.0, 4.0)};
  const auto v = box_volume(box);
  CHECK(v.log_volume == doctest::Approx(std::log(6.0)));
  CHECK(v.volume() == doctest::Approx(6.0));
  CHECK_FALSE(v.used_fallback);
}

TEST_CASE("box_volume: open sides take the fallback extent") {
  const double inf = std::numeric_limits<double>::infinity();
  AxisBox box{Eigen::Vector2d(-inf, 0.0), Eigen::Vector2d(1.0, inf)};
  AxisBox range{Eigen::Vector2d(-3.0, -1.0), Eigen::Vector2d(3.0, 5.0)};
  const auto v = box_volume(box, &range);
  CHECK(v.used_fallback);
  CHECK(v.volume() == doctest::Approx(4.0 * 5.0));
  CHECK_THROWS_AS(box_volume(box), ValidationError);
  AxisBox narrow{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
  CHECK_THROWS_AS(box_volume(box, &narrow), ValidationError);
}

TEST_CASE("box_volume: zero width") {
  AxisBox box{Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(2.0, 1.0)};
  const auto v = box_volume(box);
  CHECK(v.zero_volume);
  CHECK(v.volume() == 0.0);
  CHECK(std::isinf(v.log_volume));
  CHECK(v.log_volume < 0.0);
}

TEST_CASE("mode_mass: constant density gives the support") {
  Dataset d;
  d.x = Eigen::VectorXd::LinSpaced(10, 1.0, 10.0);
  d.z = Eigen::VectorXd::Zero(10);
  AxisBox box{Eigen::VectorXd::Constant(1, 2.5), Eigen::VectorXd::Constant(1, 6.0)};
  CHECK(mode_mass(d, box, [](const Eigen::VectorXd&, double) { return 1.0; }) == doctest::Approx(0.4));
  CHECK(mode_mass(d, box, [](const Eigen::VectorXd& x, double) { return x(0); }) == doctest::Approx(1.8));
}

TEST_CASE("mode_mass: normal density over [-1, 1] matches the integral of phi squared") {
  const double oracle = simpson([](double x) { return normal_pdf(x) * normal_pdf(x); }, -1.0, 1.0, 2000);
  CHECK(oracle == doctest::Approx(0.2377215047148319).epsilon(1e-10));
  const auto d = sample_mixture(single_target_design(Eigen::MatrixXd::Identity(1, 1), 200000), 14).data;
  AxisBox box{Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0)};
  const double mass = mode_mass(d, box, [](const Eigen::VectorXd& x, double) { return normal_pdf(x(0)); });
  CHECK(std::abs(mass - oracle) < 0.002);
}

TEST_CASE("population_bump_box: identity in two dimensions") {
  const auto b = population_bump_box(Eigen::MatrixXd::Identity(2, 2), 0.95);
  const double q = 5.991464547107979;
  CHECK(b.ellipsoid.chi2_quantile == doctest::Approx(q).epsilon(1e-10));
  CHECK(b.ellipsoid.semi_axes(0) == doctest::Approx(2.447746830680816).epsilon(1e-10));
  CHECK(b.box.upper(1) == doctest::Approx(2.447746830680816).epsilon(1e-10));
  CHECK(b.ellipsoid.log_volume == doctest::Approx(std::log(std::numbers::pi * q)));
  CHECK(std::exp(b.box_log_volume - b.ellipsoid.log_volume) == doctest::Approx(4.0 / std::numbers::pi));
}

TEST_CASE("population_bump_box: half-widths scale with sqrt(lambda)") {
  Eigen::Matrix2d sigma;
  sigma << 4.0, 0.0, 0.0, 1.0;
  const auto b = population_bump_box(sigma, 0.5);
  const double r = std::sqrt(chi_squared_quantile(0.5, 2.0));
  CHECK(b.ellipsoid.semi_axes(0) == doctest::Approx(2.0 * r));
  CHECK(b.ellipsoid.semi_axes(1) == doctest::Approx(r));
}

TEST_CASE("population_bump_box: box always holds the ellipsoid") {
  for (int p = 1; p <= 30; ++p) {
    const auto b = population_bump_box(equicorrelation(p, 0.4), 0.9);
    CHECK(b.box_log_volume >= b.ellipsoid.log_volume);
  }
}

TEST_CASE("population_bump_box: errors") {
  CHECK_THROWS_AS(population_bump_box(Eigen::Matrix2d::Ones(), 0.9), NumericalError);
  CHECK_THROWS_AS(population_bump_box(Eigen::Matrix2d::Identity(), 1.0), ValidationError);
}

TEST_CASE("parse_algorithm and parse_space") {
  CHECK(parse_algorithm("prim") == Algorithm::kPrim);
  CHECK(parse_algorithm(to_string(Algorithm::kFastPrim)) == Algorithm::kFastPrim);
  CHECK(parse_space("pc") == Space::kPc);
  CHECK_THROWS_AS(parse_algorithm("cart"), ValidationError);
  CHECK_THROWS_AS(parse_space("latent"), ValidationError);
}

TEST_CASE("ExperimentDesign::validate") {
  auto d = small_design();
  CHECK_NOTHROW(d.validate());
  d.replicates = 0;
  CHECK_THROWS_AS(d.validate(), ValidationError);
  d = small_design();
  d.dims.clear();
  CHECK_THROWS_AS(d.validate(), ValidationError);
  d = small_design();
  d.p_prime = 3;
  CHECK_THROWS_AS(d.validate(), ValidationError);
  d = small_design();
  d.coverages = {0};
  CHECK_THROWS_AS(d.validate(), ValidationError);
}

TEST_CASE("replicate_seed and replicate_dataset are deterministic") {
  CHECK(replicate_seed(1, 2, 3) == replicate_seed(1, 2, 3));
  CHECK(replicate_seed(1, 2, 3) != replicate_seed(1, 2, 4));
  CHECK(replicate_seed(1, 2, 3) != replicate_seed(1, 3, 3));
  CHECK(replicate_seed(1, 2, 3) != replicate_seed(2, 2, 3));
  const auto d = small_design();
  CHECK(replicate_dataset(d, 2, 1).x == replicate_dataset(d, 2, 1).x);
}

TEST_CASE("run_experiment: one record per cell in sorted order") {
  const auto recs = run_experiment(small_design());
  REQUIRE(recs.size() == 2 * 2 * 2 * 2);
  for (const auto& r : recs) {
    CHECK(r.ok);
    CHECK(r.n == 400);
    CHECK(std::isfinite(r.log_volume_adjusted_mean));
    CHECK(r.log_volume_adjusted_mean == doctest::Approx(std::log(r.output_mean) - r.log_volume));
    CHECK(r.box_center.size() == 2);
  }
  CHECK(recs.front().replicate == 0);
  CHECK(recs.front().space == Space::kInput);
  CHECK(recs.front().algorithm == Algorithm::kPrim);
  CHECK(recs.back().replicate == 1);
  CHECK(recs.back().space == Space::kPc);
  CHECK(recs.back().coverage == 5);
}

TEST_CASE("run_experiment: both spaces and algorithms share one dataset") {
  const auto d = small_design();
  const auto recs = run_experiment(d);
  for (const auto& r : recs) CHECK(r.seed == replicate_seed(d.master_seed, 2, r.replicate));
}

TEST_CASE("run_experiment: deterministic and thread count does not matter") {
  auto d = small_design();
  const auto a = run_experiment(d);
  d.threads = 2;
  const auto b = run_experiment(d);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].support == b[k].support);
    CHECK(a[k].output_mean == b[k].output_mean);
    CHECK(a[k].log_volume == b[k].log_volume);
    CHECK(a[k].mode_mass == b[k].mode_mass);
  }
}

TEST_CASE("run_experiment: a failing algorithm does not stop the others") {
  auto d = small_design();
  d.n = 150;  // n * beta = 7.5 is too small for PRIM covering
  const auto recs = run_experiment(d);
  REQUIRE(recs.size() == 16);
  for (const auto& r : recs) {
    if (r.algorithm == Algorithm::kPrim) {
      CHECK_FALSE(r.ok);
      CHECK_FALSE(r.error.empty());
    } else {
      CHECK(r.ok);
    }
  }
  const auto cells = aggregate(recs);
  for (const auto& c : cells) {
    if (c.algorithm == Algorithm::kPrim) {
      CHECK(c.failed == 2);
      CHECK(c.support.count == 0);
    } else {
      CHECK(c.ok == 2);
    }
  }
}

TEST_CASE("run_experiment: fastPRIM support and volume grow with t") {
  auto d = small_design();
  d.algorithms = {Algorithm::kFastPrim};
  d.coverages = {1, 5, 10, 15, 20};
  d.replicates = 4;
  const auto recs = run_experiment(d);
  for (std::size_t k = 1; k < recs.size(); ++k) {
    if (recs[k].coverage == 1) continue;
    CHECK(recs[k].support >= recs[k - 1].support);
    CHECK(recs[k].log_volume >= recs[k - 1].log_volume);
  }
}

TEST_CASE("run_experiment: PRIM region support grows with coverage") {
  auto d = small_design();
  d.algorithms = {Algorithm::kPrim};
  d.coverages = {1, 2, 4, 8};
  d.n = 1000;
  const auto recs = run_experiment(d);
  for (std::size_t k = 1; k < recs.size(); ++k) {
    if (recs[k].coverage == 1) continue;
    CHECK(recs[k].support > recs[k - 1].support);
  }
}

TEST_CASE("run_experiment: support varies less across replicates with larger n") {
  auto d = small_design();
  d.algorithms = {Algorithm::kFastPrim};
  d.spaces = {Space::kPc};  // independent marginals, so support targets beta_T
  d.coverages = {20};
  d.replicates = 16;
  const auto spread = [&](Index n) {
    d.n = n;
    std::vector<double> s;
    for (const auto& r : run_experiment(d)) s.push_back(r.support);
    return mean_se(s);
  };
  const auto small = spread(500);
  const auto large = spread(8000);
  CHECK(large.variance < small.variance);
  CHECK(std::abs(large.mean - beta_total(0.05, 20)) < 0.02);
}

TEST_CASE("mean_se: examples") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const auto m = mean_se(v);
  CHECK(m.mean == 2.5);
  CHECK(m.variance == doctest::Approx(5.0 / 3.0));
  CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 12.0)));
  CHECK(m.count == 4);
  const std::vector<double> w{1.0, std::nan(""), 3.0, std::numeric_limits<double>::infinity()};
  const auto n = mean_se(w);
  CHECK(n.count == 2);
  CHECK(n.mean == 2.0);
  const auto one = mean_se(std::vector<double>{5.0});
  CHECK(one.mean == 5.0);
  CHECK(std::isnan(one.se));
  CHECK(std::isnan(mean_se(std::vector<double>{}).mean));
}

TEST_CASE("gain_profile: equal spaces give ratio one") {
  std::vector<MetricsRecord> recs;
  for (int r = 0; r < 4; ++r) {
    recs.push_back(record(Space::kInput, r, 0.1 * r));
    recs.push_back(record(Space::kPc, r, 0.1 * r));
  }
  const auto g = gain_profile(recs);
  REQUIRE(g.size() == 1);
  CHECK(g[0].matched == 4);
  CHECK(g[0].ratio == doctest::Approx(1.0));
  CHECK(g[0].mean_log_ratio == doctest::Approx(0.0));
  CHECK(g[0].fraction_above_one == 0.0);
  CHECK(g[0].ratio_se == doctest::Approx(0.0));
}

TEST_CASE("gain_profile: doubled PC values give ratio two") {
  std::vector<MetricsRecord> recs;
  for (int r = 0; r < 3; ++r) {
    recs.push_back(record(Space::kInput, r, -500.0 + r));
    recs.push_back(record(Space::kPc, r, -500.0 + r + std::log(2.0)));
  }
  const auto g = gain_profile(recs);
  CHECK(g[0].ratio == doctest::Approx(2.0));
  CHECK(g[0].mean_log_ratio == doctest::Approx(std::log(2.0)));
  CHECK(g[0].fraction_above_one == 1.0);
}

TEST_CASE("gain_profile: delta-method standard error") {
  std::vector<MetricsRecord> recs{record(Space::kInput, 0, 0.0), record(Space::kPc, 0, 0.0),
                                  record(Space::kInput, 1, 0.0), record(Space::kPc, 1, std::log(3.0))};
  const auto g = gain_profile(recs);
  // Means 2 and 1, var(pc) = 2, var(input) = 0: se^2 = (2 / 1) / 2.
  CHECK(g[0].ratio == doctest::Approx(2.0));
  CHECK(g[0].ratio_se == doctest::Approx(1.0));
}

TEST_CASE("gain_profile: unmatched and failed replicates are dropped") {
  std::vector<MetricsRecord> recs{record(Space::kInput, 0, 0.0), record(Space::kPc, 1, 0.0),
                                  record(Space::kInput, 0, 1.0, 4), record(Space::kPc, 0, 1.0, 4)};
  recs.back().ok = false;
  const auto g = gain_profile(recs);
  REQUIRE(g.size() == 2);
  CHECK(g[0].missing);
  CHECK(g[0].matched == 0);
  CHECK(g[1].missing);
  CHECK(std::isnan(g[1].ratio));
}

TEST_CASE("timing_harness: warm-up plus repetitions") {
  int calls = 0;
  const auto t = timing_harness([&] { ++calls; }, 5);
  CHECK(calls == 6);
  CHECK(t.samples.size() == 5);
  CHECK(t.mean_seconds >= 0.0);
  CHECK_THROWS_AS(timing_harness([] {}, 2), ValidationError);
}
