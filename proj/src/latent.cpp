#include "mvpp/latent.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mvpp/error.hpp"

namespace mvpp {

double HyperPrior::log_density_natural(double value) const {
  if (!(value > 0.0)) return -std::numeric_limits<double>::infinity();
  switch (kind) {
    case PriorKind::pc_range: {
      const double h = dim / 2.0;
      return std::log(h) + std::log(lambda) - (h + 1.0) * std::log(value) - lambda * std::pow(value, -h);
    }
    case PriorKind::pc_sd:
      return std::log(lambda) - lambda * value;
    case PriorKind::log_gamma:
      return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(value) - rate * value;
  }
  return 0.0;
}

double HyperPrior::log_density(double theta) const { return log_density_natural(std::exp(theta)) + theta; }

std::string HyperPrior::describe() const {
  std::ostringstream s;
  switch (kind) {
    case PriorKind::pc_range:
      s << "PC prior on range (dim " << dim << "): P(range < " << threshold << ") = " << prob
        << ", lambda = " << lambda;
      break;
    case PriorKind::pc_sd:
      s << "PC prior on sd: P(sd > " << threshold << ") = " << prob << ", lambda = " << lambda;
      break;
    case PriorKind::log_gamma:
      s << "log-gamma prior on log precision: shape " << shape << ", rate " << rate;
      break;
  }
  return s.str();
}

HyperPrior pc_prior_calibrate(PcKind kind, double threshold, double prob) {
  if (!(threshold > 0.0) || !(prob > 0.0 && prob < 1.0))
    throw InputError("pc prior: need threshold > 0 and 0 < prob < 1");
  HyperPrior p;
  p.threshold = threshold;
  p.prob = prob;
  switch (kind) {
    case PcKind::range2d:
    case PcKind::range1d:
      p.kind = PriorKind::pc_range;
      p.dim = kind == PcKind::range2d ? 2.0 : 1.0;
      // P(range < r0) = exp(-lambda r0^(-d/2)).
      p.lambda = -std::log(prob) * std::pow(threshold, p.dim / 2.0);
      break;
    case PcKind::sd:
      p.kind = PriorKind::pc_sd;
      p.lambda = -std::log(prob) / threshold;
      break;
  }
  return p;
}

HyperPrior log_gamma_prior(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw InputError("log-gamma prior: shape and rate must be positive");
  HyperPrior p;
  p.kind = PriorKind::log_gamma;
  p.shape = shape;
  p.rate = rate;
  return p;
}

double matern_cov(double d, double sigma2, double kappa, double nu) {
  if (d <= 0.0) return sigma2;
  const double x = kappa * d;
  if (x > 700.0) return 0.0;
  return sigma2 * std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(x, nu) * std::cyl_bessel_k(nu, x);
}

double spde_marginal_variance(double kappa, double tau, double nu, double dim) {
  const double alpha = nu + dim / 2.0;
  return std::tgamma(nu) /
         (std::tgamma(alpha) * std::pow(4.0 * std::numbers::pi, dim / 2.0) * std::pow(kappa, 2.0 * nu) * tau * tau);
}

double GmrfTerm::reported(std::span<const double> theta, std::size_t k) const { return std::exp(theta[k]); }

IidTerm::IidTerm(std::string name, Eigen::Index dim, double precision)
    : GmrfTerm(std::move(name)), dim_(dim), prec_(precision) {
  if (dim <= 0) throw InputError("iid term: dimension must be positive");
  if (!(precision >= 0.0)) throw InputError("iid term: precision must be non-negative");
}

SparseMatrix IidTerm::precision(std::span<const double>) const {
  SparseMatrix q(dim_, dim_);
  q.reserve(Eigen::VectorXi::Constant(dim_, 1));
  for (Eigen::Index i = 0; i < dim_; ++i) q.insert(i, i) = prec_;
  q.makeCompressed();
  return q;
}

namespace {

SparseMatrix g_cinv_g(const FemMatrices& fem) {
  Eigen::VectorXd cinv = fem.C.diagonal().cwiseInverse();
  SparseMatrix out = fem.G * cinv.asDiagonal() * fem.G;
  out.makeCompressed();
  return out;
}

SparseMatrix spde_precision(const FemMatrices& fem, const SparseMatrix& gcg, double kappa, double tau) {
  if (!(kappa > 0.0) || !(tau > 0.0) || !std::isfinite(kappa) || !std::isfinite(tau))
    throw InputError("spde: kappa and tau must be positive");
  const double k2 = kappa * kappa;
  const double t2 = tau * tau;
  SparseMatrix q = (t2 * k2 * k2) * fem.C + (2.0 * t2 * k2) * fem.G + t2 * gcg;
  q.makeCompressed();
  return q;
}

std::vector<Hyperparameter> matern_hyper(const std::string& name, const MaternPriors& priors, double range0,
                                         double sd0) {
  return {{name + ".log_range", "range", std::log(range0), priors.range},
          {name + ".log_sd", "sd", std::log(sd0), priors.sd}};
}

double mesh_extent(const Mesh& m) {
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& p : m.vertices) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  return std::max(x1 - x0, y1 - y0);
}

}  // namespace

Spde2dTerm::Spde2dTerm(std::string name, std::shared_ptr<const Mesh> mesh, MaternPriors priors)
    : GmrfTerm(std::move(name)), mesh_(std::move(mesh)) {
  if (!mesh_ || mesh_->vertices.empty()) throw InputError("spde2d: empty mesh");
  fem_ = fem_matrices(*mesh_);
  gcg_ = g_cinv_g(fem_);
  hyper_ = matern_hyper(this->name(), priors, 0.3 * mesh_extent(*mesh_), 1.0);
}

double Spde2dTerm::kappa_from_range(double range) { return std::sqrt(8.0 * nu) / range; }
double Spde2dTerm::range_from_kappa(double kappa) { return std::sqrt(8.0 * nu) / kappa; }
double Spde2dTerm::tau_from(double kappa, double sd) {
  return 1.0 / (std::sqrt(4.0 * std::numbers::pi) * kappa * sd);
}
double Spde2dTerm::sd_from(double kappa, double tau) {
  return std::sqrt(spde_marginal_variance(kappa, tau, nu, 2.0));
}

SparseMatrix Spde2dTerm::precision_kappa_tau(double kappa, double tau) const {
  return spde_precision(fem_, gcg_, kappa, tau);
}

SparseMatrix Spde2dTerm::precision(std::span<const double> theta) const {
  const double kappa = kappa_from_range(std::exp(theta[0]));
  return precision_kappa_tau(kappa, tau_from(kappa, std::exp(theta[1])));
}

RowSparseMatrix Spde2dTerm::projector(std::span<const Point> points) const { return mvpp::projector(*mesh_, points); }

Spde1dTerm::Spde1dTerm(std::string name, std::vector<double> knots, MaternPriors priors)
    : GmrfTerm(std::move(name)), knots_(std::move(knots)) {
  if (knots_.size() < 3) throw InputError("spde1d: need at least three knots");
  for (std::size_t i = 1; i < knots_.size(); ++i)
    if (!(knots_[i] > knots_[i - 1])) throw InputError("spde1d: knots must be strictly increasing");
  fem_ = fem_matrices_1d(knots_);
  gcg_ = g_cinv_g(fem_);
  hyper_ = matern_hyper(this->name(), priors, 0.5 * (knots_.back() - knots_.front()), 0.5);
}

double Spde1dTerm::kappa_from_range(double range) { return std::sqrt(8.0 * nu) / range; }
double Spde1dTerm::tau_from(double kappa, double sd) {
  // sd^2 = Gamma(3/2) / (Gamma(2) sqrt(4 pi) kappa^3 tau^2) = 1 / (4 kappa^3 tau^2)
  return 1.0 / (2.0 * sd * std::pow(kappa, 1.5));
}

SparseMatrix Spde1dTerm::precision_kappa_tau(double kappa, double tau) const {
  return spde_precision(fem_, gcg_, kappa, tau);
}

SparseMatrix Spde1dTerm::precision(std::span<const double> theta) const {
  const double kappa = kappa_from_range(std::exp(theta[0]));
  return precision_kappa_tau(kappa, tau_from(kappa, std::exp(theta[1])));
}

RowSparseMatrix Spde1dTerm::projector(std::span<const double> values) const {
  return projector_1d(knots_, values);
}

Rw1Term::Rw1Term(std::string name, std::vector<double> knots, HyperPrior precision_prior)
    : GmrfTerm(std::move(name)), knots_(std::move(knots)) {
  if (knots_.size() < 2) throw InputError("rw1: need at least two knots");
  for (std::size_t i = 1; i < knots_.size(); ++i)
    if (!(knots_[i] > knots_[i - 1])) throw InputError("rw1: knots must be strictly increasing");
  hyper_ = {{this->name() + ".log_prec", "precision", std::log(10.0), precision_prior}};
}

SparseMatrix Rw1Term::structure() const {
  const auto r = static_cast<Eigen::Index>(knots_.size());
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index l = 1; l < r; ++l) {
    trip.emplace_back(l - 1, l - 1, 1.0);
    trip.emplace_back(l, l, 1.0);
    trip.emplace_back(l - 1, l, -1.0);
    trip.emplace_back(l, l - 1, -1.0);
  }
  SparseMatrix s(r, r);
  s.setFromTriplets(trip.begin(), trip.end());
  return s;
}

SparseMatrix Rw1Term::precision_tau(double tau) const {
  if (!(tau > 0.0)) throw InputError("rw1: precision must be positive");
  SparseMatrix q = tau * structure();
  q.makeCompressed();
  return q;
}

SparseMatrix Rw1Term::precision(std::span<const double> theta) const { return precision_tau(std::exp(theta[0])); }

RowSparseMatrix Rw1Term::projector(std::span<const double> values) const {
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto it = std::lower_bound(knots_.begin(), knots_.end(), values[i]);
    std::size_t k = static_cast<std::size_t>(it - knots_.begin());
    if (k == knots_.size()) {
      k = knots_.size() - 1;
    } else if (k > 0 && values[i] - knots_[k - 1] <= knots_[k] - values[i]) {
      k = k - 1;
    }
    trip.emplace_back(static_cast<int>(i), static_cast<int>(k), 1.0);
  }
  RowSparseMatrix a(static_cast<Eigen::Index>(values.size()), dim());
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

std::vector<double> equally_spaced_knots(double lo, double hi, int r) {
  if (r < 2) throw InputError("knots: need at least two");
  if (!(hi > lo)) throw InputError("knots: empty range");
  std::vector<double> k(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) k[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (r - 1);
  return k;
}

}  // namespace mvpp
