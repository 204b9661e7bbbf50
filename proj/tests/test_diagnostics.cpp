#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "graspinfer/density.hpp"
#include "graspinfer/diagnostics.hpp"
#include "graspinfer/errors.hpp"
#include "test_util.hpp"

using namespace graspinfer;
using namespace graspinfer::testing;

namespace {

// Direct two-loop V-statistic with the linear kernel, the oracle for
// mmd_linear's closed form.
double mmd_squared_two_loop(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const auto m = a.rows(), n = b.rows();
  double aa = 0.0, bb = 0.0, ab = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) aa += a.row(i).dot(a.row(j));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) bb += b.row(i).dot(b.row(j));
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) ab += a.row(i).dot(b.row(j));
  return aa / double(m * m) + bb / double(n * n) - 2.0 * ab / double(m * n);
}

}  // namespace

TEST_CASE("mmd_linear examples and exactness") {
  Rng rng(1);
  Eigen::MatrixXd a(40, 3);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i / 3, i % 3) = rng.normal();
  CHECK(mmd_linear(a, a).mmd_squared == 0.0);  // identical sets: exactly zero

  Eigen::MatrixXd e1 = Eigen::MatrixXd::Zero(25, 2);
  Eigen::MatrixXd e2 = Eigen::MatrixXd::Zero(25, 2);
  e1.col(0).setConstant(1.0);
  e2.col(1).setConstant(1.0);
  CHECK(mmd_linear(e1, e2).mmd_squared == doctest::Approx(2.0));

  CHECK_THROWS_AS(mmd_linear(a, Eigen::MatrixXd(3, 2)), ContractViolation);
}

TEST_CASE("mmd_linear equals the two-loop kernel sum and is symmetric") {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const int m = 50 + trial * 30, n = 200 - trial * 30;
    Eigen::MatrixXd a(m, 4), b(n, 4);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (int j = 0; j < 4; ++j) a(i, j) = rng.normal();
    for (Eigen::Index i = 0; i < b.rows(); ++i)
      for (int j = 0; j < 4; ++j) b(i, j) = rng.normal() + 0.3;
    const MmdReport forward = mmd_linear(a, b);
    CHECK(forward.mmd_squared == doctest::Approx(mmd_squared_two_loop(a, b)).epsilon(1e-12));
    CHECK(forward.mmd_squared == mmd_linear(b, a).mmd_squared);  // exact symmetry
  }
}

TEST_CASE("frechet_mean examples") {
  Eigen::MatrixXd same(6, 2);
  for (int i = 0; i < 6; ++i) same.row(i) << 0.6, 0.8;
  CHECK((frechet_mean(same) - same.row(0).transpose()).norm() < 1e-12);

  Eigen::MatrixXd two(2, 2);
  two << 1, 0, 0, 1;
  const Eigen::VectorXd mid = frechet_mean(two);
  CHECK(mid[0] == doctest::Approx(std::sqrt(0.5)));
  CHECK(mid[1] == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("frechet_mean of vMF draws recovers the mean direction") {
  Eigen::VectorXd nu(2);
  nu << std::cos(0.4), std::sin(0.4);
  const VonMisesFisher vmf(nu, 20.0);
  Rng rng(3);
  const int n = 100000;
  Eigen::MatrixXd draws(n, 2);
  for (int i = 0; i < n; ++i) draws.row(i) = vmf.sample_one(rng);

  const Eigen::VectorXd mean = frechet_mean(draws);
  CHECK(std::acos(std::clamp(mean.dot(nu), -1.0, 1.0)) < 0.01);

  // extrinsic-mean oracle: coincides with the Fréchet mean for vMF symmetry
  // (up to finite-sample asymmetry)
  Eigen::VectorXd extrinsic = draws.colwise().mean();
  extrinsic /= extrinsic.norm();
  CHECK(std::acos(std::clamp(mean.dot(extrinsic), -1.0, 1.0)) < 1e-4);
}

TEST_CASE("frechet_mean is rotation equivariant") {
  Rng rng(4);
  Eigen::VectorXd nu(3);
  nu << 0.0, 0.0, 1.0;
  const VonMisesFisher vmf(nu, 5.0);
  Eigen::MatrixXd draws(500, 3);
  for (int i = 0; i < 500; ++i) draws.row(i) = vmf.sample_one(rng);
  const Eigen::VectorXd mean = frechet_mean(draws);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd rot = random_rotation(3, rng);
    const Eigen::MatrixXd rotated = draws * rot.transpose();
    const Eigen::VectorXd rotated_mean = frechet_mean(rotated);
    CHECK((rotated_mean - rot * mean).norm() <= 1e-9);
  }
}

TEST_CASE("ess on white noise, constants and AR(1)") {
  Rng rng(5);
  const int n = 10000;
  Eigen::VectorXd white(n);
  for (int i = 0; i < n; ++i) white[i] = rng.normal();
  const EssResult iid = ess(white);
  CHECK(!iid.degenerate);
  CHECK(iid.ess > 0.8 * n);
  CHECK(iid.ess < 1.2 * n);

  const EssResult flat = ess(Eigen::VectorXd::Constant(100, 3.25));
  CHECK(flat.degenerate);
  CHECK(flat.ess == 1.0);

  // AR(1) with phi = 0.9: ESS ~= n (1 - phi) / (1 + phi)
  Eigen::VectorXd ar(n);
  double state = 0.0;
  const double phi = 0.9;
  for (int i = 0; i < n; ++i) {
    state = phi * state + std::sqrt(1.0 - phi * phi) * rng.normal();
    ar[i] = state;
  }
  const EssResult correlated = ess(ar);
  const double expected = n * (1.0 - phi) / (1.0 + phi);
  CHECK(correlated.ess > 0.75 * expected);
  CHECK(correlated.ess < 1.25 * expected);

  CHECK_THROWS_AS(ess(Eigen::VectorXd::Zero(5)), ContractViolation);
}
