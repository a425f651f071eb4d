#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "bumphunt/dataset.hpp"
#include "bumphunt/errors.hpp"
#include "bumphunt/numkernel.hpp"
#include "bumphunt/pca.hpp"

using namespace bumphunt;

namespace {

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / static_cast<double>(x.rows() - 1);
}

Eigen::MatrixXd draw(const Eigen::MatrixXd& sigma, Index n, std::uint64_t seed) {
  return sample_mixture(single_target_design(sigma, n), seed).data.x;
}

}  // namespace

TEST_CASE("fit_rotation: exact diagonal covariance") {
  Eigen::MatrixXd x(4, 2);
  const double a = std::sqrt(6.0);
  const double b = std::sqrt(1.5);
  x << a, 0, -a, 0, 0, b, 0, -b;
  const auto m = fit_rotation(x);
  CHECK(m.center.cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.lambda(0) == doctest::Approx(4.0));
  CHECK(m.lambda(1) == doctest::Approx(1.0));
  CHECK(std::abs(m.gamma(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(m.gamma(1, 1)) == doctest::Approx(1.0));
  CHECK(m.p_prime == 2);
}

TEST_CASE("fit_rotation: recovers a planted rotation") {
  const double c = std::cos(0.4);
  const double s = std::sin(0.4);
  Eigen::Matrix2d q;
  q << c, -s, s, c;
  const Eigen::Matrix2d sigma = q * Eigen::Vector2d(9.0, 1.0).asDiagonal() * q.transpose();
  const auto m = fit_rotation(draw(sigma, 10000, 21));
  CHECK(m.lambda(0) == doctest::Approx(9.0).epsilon(0.05));
  CHECK(m.lambda(1) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::abs(m.gamma.col(0).dot(q.col(0))) > 0.999);
}

TEST_CASE("fit_rotation: constant column gives a zero eigenvalue") {
  Eigen::MatrixXd x(5, 2);
  x << 1, 7, 2, 7, 3, 7, 4, 7, 5, 7;
  const auto m = fit_rotation(x);
  CHECK(m.lambda(1) == 0.0);
  CHECK(m.lambda(0) == doctest::Approx(2.5));
}

TEST_CASE("fit_rotation: errors") {
  CHECK_THROWS_AS(fit_rotation(Eigen::MatrixXd::Ones(1, 3)), DataError);
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 2);
  x(1, 1) = std::nan("");
  CHECK_THROWS_AS(fit_rotation(x), DataError);
}

TEST_CASE("rotate: identity covariance scores are centered data") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 0, -1, 0, 0, 1, 0, -1;
  x.array() += 3.0;
  const auto m = fit_rotation(x);
  const auto y = rotate(x, m);
  CHECK(y.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  CHECK((y.cwiseAbs() - (x.array() - 3.0).abs().matrix()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rotate: score covariance is diag(lambda) and means vanish") {
  const Eigen::MatrixXd sigma = equicorrelation(5, 0.5);
  const Eigen::MatrixXd x = draw(sigma, 2000, 8);
  const auto m = fit_rotation(x);
  const auto y = rotate(x, m);
  const Eigen::MatrixXd cov = sample_covariance(y);
  CHECK((cov - Eigen::MatrixXd(m.lambda.asDiagonal())).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(y.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rotate: distances are preserved") {
  const Eigen::MatrixXd x = draw(equicorrelation(4, 0.3), 100, 2);
  const auto m = fit_rotation(x);
  const auto y = rotate(x, m);
  for (Index i = 1; i < x.rows(); ++i) {
    CHECK((y.row(i) - y.row(0)).norm() == doctest::Approx((x.row(i) - x.row(0)).norm()).epsilon(1e-12));
  }
}

TEST_CASE("rotate: inverse round trip") {
  const Eigen::MatrixXd x = draw(equicorrelation(3, 0.7), 50, 6);
  const auto m = fit_rotation(x);
  CHECK((inverse_rotate(rotate(x, m), m) - x).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(inverse_rotate(rotate(x, m.with_p_prime(2)), m.with_p_prime(2)), ValidationError);
}

TEST_CASE("rotate: truncation and mismatch") {
  const Eigen::MatrixXd x = draw(equicorrelation(4, 0.5), 30, 1);
  const auto m = fit_rotation(x).with_p_prime(2);
  const auto y = rotate(x, m);
  CHECK(y.cols() == 2);
  CHECK_THROWS_AS(rotate(Eigen::MatrixXd::Zero(3, 3), m), ValidationError);
  CHECK_THROWS_AS(fit_rotation(x).with_p_prime(5), ValidationError);
  CHECK_THROWS_AS(fit_rotation(x).with_p_prime(0), ValidationError);
}

TEST_CASE("rotate: dataset carries response and labels") {
  const auto s = sample_mixture(single_target_design(Eigen::MatrixXd::Identity(2, 2), 20), 3);
  const auto r = rotate(s.data, fit_rotation(s.data));
  CHECK(r.z == s.data.z);
  CHECK(*r.labels == *s.data.labels);
  CHECK(r.names == std::vector<std::string>{"pc1", "pc2"});
}

TEST_CASE("box_to_input_rule: identity rotation") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 0, -1, 0, 0, 2, 0, -2;
  RotationModel m;
  m.center = Eigen::Vector2d::Zero();
  m.gamma = Eigen::Matrix2d::Identity();
  m.lambda = Eigen::Vector2d::Ones();
  m.p_prime = 2;
  AxisBox box{Eigen::Vector2d(-0.5, -3.0), Eigen::Vector2d(1.5, 3.0)};
  const auto rule = box_to_input_rule(box, m);
  REQUIRE(rule.constraints.size() == 2);
  CHECK(*rule.constraints[0].lower == -0.5);
  CHECK(rule.count(x) == 3);
}

TEST_CASE("box_to_input_rule: 45 degree rotation") {
  const double r = std::numbers::sqrt2 / 2.0;
  RotationModel m;
  m.center = Eigen::Vector2d(1.0, 1.0);
  m.gamma.resize(2, 2);
  m.gamma << r, -r, r, r;
  m.lambda = Eigen::Vector2d(2.0, 1.0);
  m.p_prime = 2;
  AxisBox box{Eigen::Vector2d(-1.0, -0.1), Eigen::Vector2d(1.0, 0.1)};
  const auto rule = box_to_input_rule(box, m);
  Eigen::MatrixXd x(3, 2);
  x << 1.5, 1.5, 2.0, 2.0, 1.2, 0.8;
  CHECK(rule.contains(x, 0));
  CHECK_FALSE(rule.contains(x, 1));
  CHECK_FALSE(rule.contains(x, 2));
}

TEST_CASE("box_to_input_rule: open sides are omitted") {
  RotationModel m;
  m.center = Eigen::Vector3d::Zero();
  m.gamma = Eigen::Matrix3d::Identity();
  m.lambda = Eigen::Vector3d::Ones();
  m.p_prime = 3;
  const double inf = std::numeric_limits<double>::infinity();
  AxisBox box{Eigen::Vector3d(-1.0, -inf, -inf), Eigen::Vector3d(inf, inf, 2.0)};
  const auto rule = box_to_input_rule(box, m);
  REQUIRE(rule.constraints.size() == 2);
  CHECK(rule.constraints[0].lower.has_value());
  CHECK_FALSE(rule.constraints[0].upper.has_value());
  CHECK_FALSE(rule.constraints[1].lower.has_value());
  CHECK(*rule.constraints[1].upper == 2.0);
}

TEST_CASE("box_to_input_rule: membership matches the PC box exactly") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Eigen::MatrixXd x = draw(equicorrelation(6, 0.5), 400, seed);
    const auto m = fit_rotation(x).with_p_prime(3);
    const auto y = rotate(x, m);
    AxisBox box = bounding_box(y);
    box.lower = box.lower * 0.4;
    box.upper = box.upper * 0.5;
    const auto rule = box_to_input_rule(box, m);
    for (Index i = 0; i < x.rows(); ++i) CHECK(rule.contains(x, i) == box.contains(y, i));
  }
}
