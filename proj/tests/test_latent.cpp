#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "mvpp/error.hpp"
#include "mvpp/latent.hpp"

using namespace mvpp;

namespace {

// Composite Simpson rule on [a, b].
template <class F>
double simpson(F f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

MaternPriors default_priors(PcKind range_kind) {
  return {pc_prior_calibrate(range_kind, 5.0, 0.95), pc_prior_calibrate(PcKind::sd, 10.0, 0.01)};
}

}  // namespace

TEST_CASE("matern covariance") {
  CHECK(matern_cov(0.0, 2.5, 1.0, 1.0) == 2.5);
  for (double d : {0.1, 1.0, 3.0}) CHECK(matern_cov(d, 1.7, 0.8, 0.5) == doctest::Approx(1.7 * std::exp(-0.8 * d)));
  CHECK(matern_cov(1.0, 1.0, 2.0, 1.5) == doctest::Approx(3.0 * std::exp(-2.0)).epsilon(1e-10));
  CHECK(3.0 * std::exp(-2.0) == doctest::Approx(0.40600585).epsilon(1e-8));
}

TEST_CASE("pc priors") {
  const HyperPrior sd = pc_prior_calibrate(PcKind::sd, 10.0, 0.01);
  CHECK(sd.lambda == doctest::Approx(0.4605170).epsilon(1e-7));
  CHECK(simpson([&](double s) { return std::exp(sd.log_density_natural(s)); }, 1e-12, 200.0) ==
        doctest::Approx(1.0).epsilon(1e-6));

  const HyperPrior r2 = pc_prior_calibrate(PcKind::range2d, 5.0, 0.95);
  // CDF at 5 by quadrature on the log scale.
  const double cdf = simpson([&](double t) { return std::exp(r2.log_density(t)); }, std::log(1e-8), std::log(5.0));
  CHECK(cdf == doctest::Approx(0.95).epsilon(1e-6));
  const double total = simpson([&](double t) { return std::exp(r2.log_density(t)); }, std::log(1e-8), std::log(1e12), 200000);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-3));

  const HyperPrior r1 = pc_prior_calibrate(PcKind::range1d, 2.0, 0.5);
  const double cdf1 = simpson([&](double t) { return std::exp(r1.log_density(t)); }, std::log(1e-10), std::log(2.0));
  CHECK(cdf1 == doctest::Approx(0.5).epsilon(1e-6));

  const HyperPrior lg = log_gamma_prior(1.0, 5e-5);
  const double lgt = simpson([&](double t) { return std::exp(lg.log_density(t)); }, -30.0, 20.0, 200000);
  CHECK(lgt == doctest::Approx(1.0).epsilon(1e-3));

  CHECK_THROWS_AS(pc_prior_calibrate(PcKind::sd, -1.0, 0.1), InputError);
  CHECK_THROWS_AS(pc_prior_calibrate(PcKind::sd, 1.0, 1.0), InputError);
}

TEST_CASE("rw1 term") {
  const Rw1Term two("u", {0.0, 1.0}, log_gamma_prior(1.0, 5e-5));
  Eigen::MatrixXd r2 = Eigen::MatrixXd(two.precision_tau(1.0));
  Eigen::Matrix2d e2;
  e2 << 1, -1, -1, 1;
  CHECK((r2 - e2).norm() == 0.0);

  const Rw1Term three("u", {0.0, 1.0, 2.0}, log_gamma_prior(1.0, 5e-5));
  Eigen::Matrix3d e3;
  e3 << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  CHECK((Eigen::MatrixXd(three.precision_tau(2.0)) - 2.0 * e3).norm() == 0.0);
  for (int r = 2; r < 30; ++r) {
    const Rw1Term t("u", equally_spaced_knots(0.0, 1.0, r), log_gamma_prior(1.0, 5e-5));
    CHECK((t.structure() * Eigen::VectorXd::Ones(r)).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(three.rank_deficiency() == 1);
  CHECK_THROWS_AS(Rw1Term("u", {0.0}, log_gamma_prior(1.0, 5e-5)), InputError);

  const std::vector<double> vals{0.0, 0.4, 0.6, 2.0, 7.0};
  const RowSparseMatrix p = three.projector(vals);
  CHECK(p.coeff(0, 0) == 1.0);
  CHECK(p.coeff(1, 0) == 1.0);
  CHECK(p.coeff(2, 1) == 1.0);
  CHECK(p.coeff(3, 2) == 1.0);
  CHECK(p.coeff(4, 2) == 1.0);
}

TEST_CASE("spde2d precision") {
  auto mesh = std::make_shared<Mesh>(build_mesh(Window::rectangle(0, 0, 3, 3), 0.3, -1.0));
  const Spde2dTerm t("s", mesh, default_priors(PcKind::range2d));
  const SparseMatrix q1 = t.precision_kappa_tau(1.0, 1.0);
  const SparseMatrix q2 = t.precision_kappa_tau(1.0, 2.0);
  CHECK((q2 - 4.0 * q1).norm() < 1e-12 * q1.norm());
  CHECK((SparseMatrix(q1.transpose()) - q1).norm() < 1e-12);
  Eigen::SimplicialLLT<SparseMatrix> llt(q1);
  CHECK(llt.info() == Eigen::Success);
  CHECK_THROWS_AS(t.precision_kappa_tau(0.0, 1.0), InputError);
  CHECK_THROWS_AS(t.precision_kappa_tau(1.0, -1.0), InputError);

  CHECK(Spde2dTerm::range_from_kappa(0.5) == 2.0 * Spde2dTerm::range_from_kappa(1.0));
  const double kappa = Spde2dTerm::kappa_from_range(2.0);
  CHECK(Spde2dTerm::sd_from(kappa, Spde2dTerm::tau_from(kappa, 1.3)) == doctest::Approx(1.3));
}

TEST_CASE("spde1d precision") {
  const Spde1dTerm t("f", equally_spaced_knots(0.0, 5.0, 40), default_priors(PcKind::range1d));
  const double kappa = 1.3, tau = 0.7;
  const SparseMatrix q = t.precision_kappa_tau(kappa, tau);
  const FemMatrices f = fem_matrices_1d(t.knots());
  const Eigen::VectorXd lhs = q * Eigen::VectorXd::Ones(q.cols());
  const Eigen::VectorXd rhs = tau * tau * std::pow(kappa, 4) * (f.C * Eigen::VectorXd::Ones(q.cols()));
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-8);
  const std::vector<double> at{t.knots()[3]};
  CHECK(t.projector(at).coeff(0, 3) == doctest::Approx(1.0));
  CHECK_THROWS_AS(Spde1dTerm("f", {0.0, 1.0}, default_priors(PcKind::range1d)), InputError);
  // Marginal variance formula for nu = 3/2 in one dimension.
  CHECK(spde_marginal_variance(kappa, Spde1dTerm::tau_from(kappa, 0.9), 1.5, 1.0) == doctest::Approx(0.81));
}

TEST_CASE("dense inverse matches matern (small)") {
  // 1-D: fine knots over a long interval; compare in the middle.
  const auto knots = equally_spaced_knots(0.0, 40.0, 401);
  const Spde1dTerm t("f", knots, default_priors(PcKind::range1d));
  const double range = 4.0, sd = 1.0;
  const double kappa = Spde1dTerm::kappa_from_range(range);
  const Eigen::MatrixXd cov = Eigen::MatrixXd(t.precision_kappa_tau(kappa, Spde1dTerm::tau_from(kappa, sd))).inverse();
  const int mid = 200;
  for (double d : {0.5 / kappa, 1.0 / kappa, 2.0 / kappa}) {
    const int j = mid + static_cast<int>(std::lround(d / 0.1));
    const double ref = matern_cov(knots[static_cast<std::size_t>(j)] - knots[mid], sd * sd, kappa, 1.5);
    CHECK(cov(mid, j) == doctest::Approx(ref).epsilon(0.1));
  }
}

TEST_CASE("iid term") {
  const IidTerm flat("a", 3, 0.0);
  CHECK(flat.is_flat());
  const IidTerm fixed("b", 2, 1000.0);
  CHECK(Eigen::MatrixXd(fixed.precision({})).isApprox(1000.0 * Eigen::MatrixXd::Identity(2, 2)));
  CHECK_THROWS_AS(IidTerm("c", 0, 1.0), InputError);
}
