#include "mvpp/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>

#include "mvpp/error.hpp"
#include "parallel.hpp"

namespace mvpp {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

// ---------------------------------------------------------------------------
// LatentModel

LatentModel::LatentModel(Likelihood likelihood, Eigen::VectorXd y, Eigen::VectorXd weights, RowSparseMatrix design,
                         std::vector<TermPtr> terms)
    : likelihood_(likelihood), y_(std::move(y)), weights_(std::move(weights)), design_(std::move(design)) {
  if (y_.size() != weights_.size() || y_.size() != design_.rows())
    throw InputError("latent model: y, weights and design rows differ in length");
  Eigen::Index offset = 0;
  std::size_t toff = 0;
  int n_constr = 0;
  for (auto& t : terms) {
    if (!t) throw InputError("latent model: null term");
    components_.push_back({t, offset, toff});
    offset += t->dim();
    toff += t->n_hyper();
    n_constr += t->rank_deficiency();
  }
  n_latent_ = offset;
  n_theta_ = toff;
  if (design_.cols() != n_latent_) throw InputError("latent model: design columns do not match the latent layout");
  for (Eigen::Index k = 0; k < weights_.size(); ++k) {
    if (!std::isfinite(weights_[k]) || weights_[k] < 0.0) throw InputError("latent model: invalid row weight");
    if (likelihood_ == Likelihood::gaussian && !(weights_[k] > 0.0))
      throw InputError("latent model: gaussian rows need positive precision");
  }
  constraints_ = Eigen::MatrixXd::Zero(n_constr, n_latent_);
  int c = 0;
  for (const auto& comp : components_) {
    if (comp.term->rank_deficiency() == 1) {
      constraints_.row(c).segment(comp.offset, comp.term->dim()).setOnes();
      ++c;
    }
  }
  x0_ = Eigen::VectorXd::Zero(n_latent_);
  theta0_.resize(static_cast<Eigen::Index>(n_theta_));
  for (const auto& comp : components_) {
    const auto& hp = comp.term->hyperparameters();
    for (std::size_t k = 0; k < hp.size(); ++k)
      theta0_[static_cast<Eigen::Index>(comp.theta_offset + k)] = hp[k].initial;
  }
}

std::vector<std::string> LatentModel::theta_names() const {
  std::vector<std::string> names;
  for (const auto& comp : components_)
    for (const auto& h : comp.term->hyperparameters()) names.push_back(h.name);
  return names;
}

Eigen::VectorXd LatentModel::initial_theta() const { return theta0_; }

void LatentModel::set_initial_theta(Eigen::VectorXd theta0) {
  if (theta0.size() != static_cast<Eigen::Index>(n_theta_)) throw InputError("latent model: theta size mismatch");
  theta0_ = std::move(theta0);
}

void LatentModel::set_initial_latent(Eigen::VectorXd x0) {
  if (x0.size() != n_latent_) throw InputError("latent model: initial latent size mismatch");
  x0_ = std::move(x0);
}

double LatentModel::log_prior_theta(std::span<const double> theta) const {
  double lp = 0.0;
  for (const auto& comp : components_) {
    const auto& hp = comp.term->hyperparameters();
    for (std::size_t k = 0; k < hp.size(); ++k) lp += hp[k].prior.log_density(theta[comp.theta_offset + k]);
  }
  return lp;
}

double LatentModel::row_loglik(Eigen::Index k, double eta) const {
  const double w = weights_[k];
  if (likelihood_ == Likelihood::poisson) return y_[k] * eta - (w > 0.0 ? w * std::exp(eta) : 0.0);
  const double r = y_[k] - eta;
  return -0.5 * w * r * r + 0.5 * std::log(w) - 0.5 * kLog2Pi;
}

namespace {

// Adds c * 1 1' so that the constant null vector becomes identifiable; on the
// constraint set this leaves x'Qx unchanged.
SparseMatrix penalized_block(const GmrfTerm& term, std::span<const double> theta) {
  SparseMatrix q = term.precision(theta);
  if (term.rank_deficiency() == 1) {
    const double c = std::max(q.diagonal().mean(), 1e-12);
    Eigen::MatrixXd dense = Eigen::MatrixXd(q);
    dense.array() += c;
    q = dense.sparseView(0.0, 0.0);
  }
  q.makeCompressed();
  return q;
}

std::span<const double> term_theta(const LatentComponent& comp, std::span<const double> theta) {
  return theta.subspan(comp.theta_offset, comp.term->n_hyper());
}

}  // namespace

SparseMatrix LatentModel::prior_precision(std::span<const double> theta) const {
  std::vector<Eigen::Triplet<double>> trip;
  for (const auto& comp : components_) {
    const SparseMatrix q = penalized_block(*comp.term, term_theta(comp, theta));
    for (int j = 0; j < q.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(q, j); it; ++it)
        trip.emplace_back(static_cast<int>(comp.offset + it.row()), static_cast<int>(comp.offset + it.col()),
                          it.value());
  }
  SparseMatrix q(n_latent_, n_latent_);
  q.setFromTriplets(trip.begin(), trip.end());
  return q;
}

void LatentModel::add_covariance_pattern(std::span<const std::pair<Eigen::Index, Eigen::Index>> pairs) {
  for (const auto& [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= n_latent_ || j >= n_latent_) throw InputError("covariance pattern: index out of range");
    extra_pattern_.emplace_back(std::max(i, j), std::min(i, j));
  }
}

// ---------------------------------------------------------------------------
// SparseFactor

SparseFactor::SparseFactor(const SparseMatrix& h, const Permutation& perm) : perm_(perm) {
  SparseMatrix hp;
  hp = h.selfadjointView<Eigen::Lower>().twistedBy(perm_);
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>> llt(hp);
  if (llt.info() != Eigen::Success) throw NumericalError("cholesky: matrix is not positive definite");
  l_ = llt.matrixL().nestedExpression();
  l_.makeCompressed();
  log_det_ = 0.0;
  for (Eigen::Index j = 0; j < l_.cols(); ++j) {
    const double d = l_.valuePtr()[l_.outerIndexPtr()[j]];
    if (!(d > 0.0) || !std::isfinite(d)) throw NumericalError("cholesky: non-positive pivot");
    log_det_ += 2.0 * std::log(d);
  }
}

Eigen::VectorXd SparseFactor::solve(const Eigen::VectorXd& b) const {
  Eigen::VectorXd z = perm_ * b;
  l_.triangularView<Eigen::Lower>().solveInPlace(z);
  l_.transpose().triangularView<Eigen::Upper>().solveInPlace(z);
  return perm_.transpose() * z;
}

Eigen::MatrixXd SparseFactor::solve(const Eigen::MatrixXd& b) const {
  Eigen::MatrixXd out(b.rows(), b.cols());
  for (Eigen::Index c = 0; c < b.cols(); ++c) out.col(c) = solve(Eigen::VectorXd(b.col(c)));
  return out;
}

Eigen::VectorXd SparseFactor::half_solve(const Eigen::VectorXd& b) const {
  Eigen::VectorXd z = perm_ * b;
  l_.triangularView<Eigen::Lower>().solveInPlace(z);
  return z;
}

namespace {

// Position of row r in column c of a compressed lower factor, or -1.
Eigen::Index find_entry(const SparseMatrix& l, Eigen::Index r, Eigen::Index c) {
  const int* inner = l.innerIndexPtr();
  const int* begin = inner + l.outerIndexPtr()[c];
  const int* end = inner + l.outerIndexPtr()[c + 1];
  const int* it = std::lower_bound(begin, end, static_cast<int>(r));
  if (it == end || *it != r) return -1;
  return it - inner;
}

}  // namespace

void SparseFactor::compute_selected_inverse() const {
  if (!sigma_.empty()) return;
  const Eigen::Index n = l_.cols();
  sigma_.assign(static_cast<std::size_t>(l_.nonZeros()), 0.0);
  const int* outer = l_.outerIndexPtr();
  const int* inner = l_.innerIndexPtr();
  const double* val = l_.valuePtr();
  auto sig = [&](Eigen::Index a, Eigen::Index b) -> double {
    const Eigen::Index r = std::max(a, b), c = std::min(a, b);
    const Eigen::Index pos = find_entry(l_, r, c);
    if (pos < 0) throw NumericalError("selected inverse: entry outside factor pattern");
    return sigma_[static_cast<std::size_t>(pos)];
  };
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    const int start = outer[j];
    const int stop = outer[j + 1];
    const double ljj = val[start];
    // Off-diagonal entries of column j, largest row first.
    for (int p = stop - 1; p > start; --p) {
      const Eigen::Index i = inner[p];
      double s = 0.0;
      for (int q = start + 1; q < stop; ++q) s += val[q] * sig(i, inner[q]);
      sigma_[static_cast<std::size_t>(p)] = -s / ljj;
    }
    double s = 0.0;
    for (int q = start + 1; q < stop; ++q) s += val[q] * sigma_[static_cast<std::size_t>(q)];
    sigma_[static_cast<std::size_t>(start)] = (1.0 / ljj - s) / ljj;
  }
}

double SparseFactor::inverse_entry(Eigen::Index i, Eigen::Index j) const {
  compute_selected_inverse();
  const Eigen::Index pi = perm_.indices()(i);
  const Eigen::Index pj = perm_.indices()(j);
  const Eigen::Index pos = find_entry(l_, std::max(pi, pj), std::min(pi, pj));
  if (pos < 0) throw NumericalError("selected inverse: requested entry outside factor pattern");
  return sigma_[static_cast<std::size_t>(pos)];
}

double SparseFactor::try_inverse_entry(Eigen::Index i, Eigen::Index j) const {
  compute_selected_inverse();
  const Eigen::Index pi = perm_.indices()(i);
  const Eigen::Index pj = perm_.indices()(j);
  const Eigen::Index pos = find_entry(l_, std::max(pi, pj), std::min(pi, pj));
  return pos < 0 ? std::numeric_limits<double>::quiet_NaN() : sigma_[static_cast<std::size_t>(pos)];
}

Eigen::VectorXd SparseFactor::inverse_diagonal() const {
  compute_selected_inverse();
  const Eigen::Index n = l_.cols();
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index p = perm_.indices()(i);
    d[i] = sigma_[static_cast<std::size_t>(l_.outerIndexPtr()[p])];
  }
  return d;
}

// ---------------------------------------------------------------------------
// ModeResult

double ModeResult::linear_variance(const Eigen::VectorXd& c) const {
  const Eigen::VectorXd z = factor->half_solve(c);
  double v = z.squaredNorm();
  if (w.cols() > 0) {
    const Eigen::VectorXd cw = w.transpose() * c;
    v -= cw.dot(v_inv * cw);
  }
  return std::max(v, 0.0);
}

double ModeResult::linear_variance(const SparseCoefficients& c) const {
  double v = 0.0;
  for (const auto& [i, ci] : c)
    for (const auto& [j, cj] : c) {
      const double s = factor->try_inverse_entry(i, j);
      if (std::isnan(s)) {
        Eigen::VectorXd dense = Eigen::VectorXd::Zero(factor->size());
        for (const auto& [k, ck] : c) dense[k] += ck;
        return linear_variance(dense);
      }
      v += ci * cj * s;
    }
  if (w.cols() > 0) {
    Eigen::VectorXd cw = Eigen::VectorXd::Zero(w.cols());
    for (const auto& [i, ci] : c) cw += ci * w.row(i).transpose();
    v -= cw.dot(v_inv * cw);
  }
  return std::max(v, 0.0);
}

Eigen::VectorXd ModeResult::latent_variances() const {
  Eigen::VectorXd d = factor->inverse_diagonal();
  if (w.cols() > 0) {
    const Eigen::MatrixXd wv = w * v_inv;
    d -= (wv.array() * w.array()).rowwise().sum().matrix();
  }
  return d.cwiseMax(0.0);
}

Eigen::VectorXd ModeResult::row_variances(const RowSparseMatrix& design) const {
  Eigen::VectorXd out(design.rows());
  const bool constrained = w.cols() > 0;
  for (Eigen::Index k = 0; k < design.rows(); ++k) {
    double v = 0.0;
    for (RowSparseMatrix::InnerIterator a(design, k); a; ++a)
      for (RowSparseMatrix::InnerIterator b(design, k); b; ++b)
        v += a.value() * b.value() * factor->inverse_entry(a.col(), b.col());
    if (constrained) {
      Eigen::VectorXd aw = Eigen::VectorXd::Zero(w.cols());
      for (RowSparseMatrix::InnerIterator a(design, k); a; ++a) aw += a.value() * w.row(a.col()).transpose();
      v -= aw.dot(v_inv * aw);
    }
    out[k] = std::max(v, 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// LaplaceEngine

LaplaceEngine::LaplaceEngine(const LatentModel& model, NewtonOptions options)
    : model_(&model), options_(options) {
  const Eigen::VectorXd theta0 = model.initial_theta();
  SparseMatrix a = model.design();
  design_t_ = a.transpose();
  SparseMatrix q = model.prior_precision(std::span<const double>(theta0.data(), theta0.size()));
  SparseMatrix ata = design_t_ * a;
  std::vector<Eigen::Triplet<double>> extra;
  for (const auto& [i, j] : model.covariance_pattern()) {
    extra.emplace_back(static_cast<int>(i), static_cast<int>(j), 1.0);
    extra.emplace_back(static_cast<int>(j), static_cast<int>(i), 1.0);
  }
  SparseMatrix ex(model.n_latent(), model.n_latent());
  ex.setFromTriplets(extra.begin(), extra.end());
  structure_ = q + ata + ex;
  structure_.makeCompressed();
  std::fill(structure_.valuePtr(), structure_.valuePtr() + structure_.nonZeros(), 0.0);
  Eigen::AMDOrdering<int> amd;
  SparseFactor::Permutation pinv;
  SparseMatrix pattern = structure_;
  std::fill(pattern.valuePtr(), pattern.valuePtr() + pattern.nonZeros(), 1.0);
  amd(pattern, pinv);
  perm_ = pinv.inverse();
}

SparseMatrix LaplaceEngine::hessian(const SparseMatrix& q, const Eigen::VectorXd& curvature) const {
  const SparseMatrix a = model_->design();
  SparseMatrix da = curvature.asDiagonal() * a;
  SparseMatrix h = q + SparseMatrix(design_t_ * da);
  h = h + structure_;
  h.makeCompressed();
  return h;
}

double LaplaceEngine::objective(std::span<const double> theta, const Eigen::VectorXd& x) const {
  const SparseMatrix q = model_->prior_precision(theta);
  const Eigen::VectorXd eta = model_->design() * x;
  double ll = 0.0;
  for (Eigen::Index k = 0; k < eta.size(); ++k) ll += model_->row_loglik(k, eta[k]);
  return ll - 0.5 * x.dot(q * x);
}

namespace {

void row_derivatives(const LatentModel& m, const Eigen::VectorXd& eta, Eigen::VectorXd& grad, Eigen::VectorXd& curv,
                     double& ll) {
  const auto n = eta.size();
  grad.resize(n);
  curv.resize(n);
  ll = 0.0;
  const auto& y = m.y();
  const auto& w = m.weights();
  if (m.likelihood() == Likelihood::poisson) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double mu = w[k] > 0.0 ? w[k] * std::exp(eta[k]) : 0.0;
      grad[k] = y[k] - mu;
      curv[k] = mu;
      ll += y[k] * eta[k] - mu;
    }
  } else {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double r = y[k] - eta[k];
      grad[k] = w[k] * r;
      curv[k] = w[k];
      ll += -0.5 * w[k] * r * r + 0.5 * std::log(w[k]) - 0.5 * kLog2Pi;
    }
  }
}

}  // namespace

Eigen::VectorXd LaplaceEngine::gradient(std::span<const double> theta, const Eigen::VectorXd& x) const {
  const SparseMatrix q = model_->prior_precision(theta);
  const Eigen::VectorXd eta = model_->design() * x;
  Eigen::VectorXd g, c;
  double ll = 0.0;
  row_derivatives(*model_, eta, g, c, ll);
  return design_t_ * g - q * x;
}

ModeResult LaplaceEngine::find_mode(std::span<const double> theta, const Eigen::VectorXd* start) const {
  const LatentModel& m = *model_;
  if (theta.size() != m.n_theta()) throw InputError("find_mode: theta has wrong length");
  for (double t : theta)
    if (!std::isfinite(t)) throw NumericalError("find_mode: non-finite hyperparameter");

  const SparseMatrix q = m.prior_precision(theta);
  const RowSparseMatrix& a = m.design();
  const Eigen::MatrixXd& cons = m.constraints();
  const Eigen::Index nc = cons.rows();

  Eigen::VectorXd x = start ? *start : m.initial_latent();
  Eigen::MatrixXd cct_inv;
  if (nc > 0) {
    cct_inv = (cons * cons.transpose()).inverse();
    x -= cons.transpose() * (cct_inv * (cons * x));
  }

  auto project = [&](const Eigen::VectorXd& g) -> Eigen::VectorXd {
    if (nc == 0) return g;
    return g - cons.transpose() * (cct_inv * (cons * g));
  };

  ModeResult res;
  res.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));

  Eigen::VectorXd eta, grad_rows, curv;
  double ll = 0.0;
  auto objective_at = [&](const Eigen::VectorXd& xv, double& ll_out) {
    const Eigen::VectorXd e = a * xv;
    Eigen::VectorXd g, c;
    row_derivatives(m, e, g, c, ll_out);
    return ll_out - 0.5 * xv.dot(q * xv);
  };

  double f = objective_at(x, ll);
  if (!std::isfinite(f)) throw NumericalError("find_mode: objective not finite at the starting point");

  std::shared_ptr<SparseFactor> factor;
  Eigen::VectorXd b;
  bool converged = false;
  int it = 0;
  for (;; ++it) {
    eta = a * x;
    row_derivatives(m, eta, grad_rows, curv, ll);
    const Eigen::VectorXd g = project(design_t_ * grad_rows - q * x);
    const double gnorm = inf_norm(g);
    res.trace.push_back(gnorm);
    factor = std::make_shared<SparseFactor>(hessian(q, curv), perm_);
    b = design_t_ * (grad_rows + curv.cwiseProduct(eta));
    if (gnorm < options_.gradient_tol) {
      converged = true;
      res.gradient_norm = gnorm;
      break;
    }
    if (it >= options_.max_iterations) break;

    Eigen::VectorXd target = factor->solve(b);
    if (nc > 0) {
      const Eigen::MatrixXd w = factor->solve(Eigen::MatrixXd(cons.transpose()));
      const Eigen::MatrixXd v = cons * w;
      target -= w * v.ldlt().solve(cons * target);
    }
    const Eigen::VectorXd step = target - x;
    double s = 1.0;
    double fn = -std::numeric_limits<double>::infinity();
    double lln = 0.0;
    while (s > 1e-10) {
      fn = objective_at(x + s * step, lln);
      if (std::isfinite(fn) && fn >= f - 1e-12 * (1.0 + std::abs(f))) break;
      s *= 0.5;
    }
    if (!(s > 1e-10)) break;
    x += s * step;
    f = fn;
  }
  res.iterations = it;
  if (!converged) {
    std::ostringstream msg;
    msg << "find_mode: Newton iterations did not converge (gradient " << (res.trace.empty() ? 0.0 : res.trace.back())
        << " after " << it << " iterations)";
    throw NumericalError(msg.str(), res.trace);
  }

  res.mode = x;
  res.eta = eta;
  res.log_lik = ll;

  // Gaussian approximation N(mu, H) conditioned on the constraints, evaluated at x.
  const Eigen::VectorXd mu = factor->solve(b);
  const Eigen::VectorXd r = x - mu;
  const SparseMatrix h = hessian(q, curv);
  double log_gauss = 0.5 * factor->log_det() - 0.5 * static_cast<double>(x.size()) * kLog2Pi - 0.5 * r.dot(h * r);
  if (nc > 0) {
    res.w = factor->solve(Eigen::MatrixXd(cons.transpose()));
    const Eigen::MatrixXd v = cons * res.w;
    Eigen::LLT<Eigen::MatrixXd> vllt(v);
    if (vllt.info() != Eigen::Success) throw NumericalError("find_mode: constraint covariance not positive definite");
    res.v_inv = vllt.solve(Eigen::MatrixXd::Identity(nc, nc));
    const Eigen::VectorXd cm = cons * mu;
    double logdet_v = 0.0;
    for (Eigen::Index i = 0; i < nc; ++i) logdet_v += 2.0 * std::log(vllt.matrixL()(i, i));
    log_gauss += 0.5 * static_cast<double>(nc) * kLog2Pi + 0.5 * logdet_v + 0.5 * cm.dot(res.v_inv * cm);
  } else {
    res.w.resize(x.size(), 0);
    res.v_inv.resize(0, 0);
  }
  res.log_gaussian = log_gauss;

  double log_prior = 0.0;
  for (const auto& comp : m.components()) {
    if (comp.term->is_flat()) continue;
    const SparseMatrix qb = penalized_block(*comp.term, term_theta(comp, theta));
    const Eigen::VectorXd xb = x.segment(comp.offset, comp.term->dim());
    Eigen::SimplicialLLT<SparseMatrix> llt(qb);
    if (llt.info() != Eigen::Success) throw NumericalError("prior precision of " + comp.term->name() + " is not positive definite");
    double logdet = 0.0;
    const SparseMatrix& lb = llt.matrixL().nestedExpression();
    for (Eigen::Index j = 0; j < lb.cols(); ++j) logdet += 2.0 * std::log(lb.valuePtr()[lb.outerIndexPtr()[j]]);
    log_prior += 0.5 * logdet - 0.5 * static_cast<double>(xb.size()) * kLog2Pi - 0.5 * xb.dot(qb * xb);
    if (comp.term->rank_deficiency() == 1) {
      const Eigen::VectorXd ones = Eigen::VectorXd::Ones(xb.size());
      const double v = ones.dot(llt.solve(ones));
      log_prior += 0.5 * std::log(2.0 * std::numbers::pi * v);
    }
  }
  res.log_prior_latent = log_prior;
  res.factor = factor;
  res.log_marginal = res.log_lik + res.log_prior_latent - res.log_gaussian;
  if (!std::isfinite(res.log_marginal)) throw NumericalError("find_mode: log marginal is not finite");
  return res;
}

double LaplaceEngine::log_marginal(std::span<const double> theta, const Eigen::VectorXd* start) const {
  return find_mode(theta, start).log_marginal;
}

// ---------------------------------------------------------------------------
// Criteria

void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) j(k - 1, k) = j(k, k - 1) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  nodes.resize(static_cast<std::size_t>(n));
  weights.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    nodes[static_cast<std::size_t>(k)] = es.eigenvalues()[k];
    const double v = es.eigenvectors()(0, k);
    weights[static_cast<std::size_t>(k)] = v * v;
  }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

Criteria compute_criteria(const LatentModel& model, const RowPredictive& rows, double log_ml) {
  return compute_criteria(model.likelihood(), model.y(), model.weights(), rows, log_ml);
}

Criteria compute_criteria(Likelihood likelihood, const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                          const RowPredictive& rows, double log_ml) {
  std::vector<double> z, wq;
  gauss_hermite(32, z, wq);
  auto row_ll = [&](Eigen::Index k, double eta) {
    const double w = weights[k];
    if (likelihood == Likelihood::poisson) return y[k] * eta - (w > 0.0 ? w * std::exp(eta) : 0.0);
    const double r = y[k] - eta;
    return -0.5 * w * r * r + 0.5 * std::log(w) - 0.5 * kLog2Pi;
  };

  Criteria c;
  c.log_ml = log_ml;
  std::size_t negative = 0;
  const Eigen::Index nrows = rows.mean.rows();
  const Eigen::Index npts = rows.mean.cols();
  std::vector<double> ls;
  std::vector<double> lw;
  for (Eigen::Index k = 0; k < nrows; ++k) {
    double el = 0.0, el2 = 0.0, mean_eta = 0.0;
    ls.clear();
    lw.clear();
    for (Eigen::Index j = 0; j < npts; ++j) {
      const double pw = rows.weights[j];
      if (pw <= 0.0) continue;
      const double m = rows.mean(k, j);
      const double s = rows.sd(k, j);
      mean_eta += pw * m;
      for (std::size_t q = 0; q < z.size(); ++q) {
        const double l = row_ll(k, m + s * z[q]);
        const double wt = pw * wq[q];
        el += wt * l;
        el2 += wt * l * l;
        ls.push_back(l);
        lw.push_back(wt);
      }
    }
    const double lmax = *std::max_element(ls.begin(), ls.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < ls.size(); ++i) acc += lw[i] * std::exp(ls[i] - lmax);
    c.lppd += lmax + std::log(acc);
    const double pw = el2 - el * el;
    if (pw < 0.0) ++negative;
    c.p_waic += pw;
    c.mean_deviance += -2.0 * el;
    c.deviance_at_mean += -2.0 * row_ll(k, mean_eta);
  }
  c.p_d = c.mean_deviance - c.deviance_at_mean;
  c.dic = c.mean_deviance + c.p_d;
  c.waic = -2.0 * (c.lppd - c.p_waic);
  c.negative_pwaic_share = nrows > 0 ? static_cast<double>(negative) / static_cast<double>(nrows) : 0.0;
  c.dic_reliable = std::isfinite(c.dic) && c.p_d >= 0.0;
  c.waic_reliable = std::isfinite(c.waic) && c.negative_pwaic_share <= 0.05;
  return c;
}

// ---------------------------------------------------------------------------
// FitResult

std::pair<double, double> FitResult::linear_summary(const Eigen::VectorXd& c) const {
  double m1 = 0.0, m2 = 0.0;
  for (const auto& p : grid) {
    const double m = c.dot(p.approx->mode);
    const double v = p.approx->linear_variance(c);
    m1 += p.weight * m;
    m2 += p.weight * (v + m * m);
  }
  return {m1, std::sqrt(std::max(m2 - m1 * m1, 0.0))};
}

double FitResult::exceedance(const Eigen::VectorXd& c, double threshold) const {
  double prob = 0.0;
  for (const auto& p : grid) {
    const double m = c.dot(p.approx->mode) - threshold;
    const double s = std::sqrt(p.approx->linear_variance(c));
    double pj = 0.0;
    if (s > 0.0) {
      pj = normal_cdf(m / s);
    } else {
      pj = m > 0.0 ? 1.0 : (m < 0.0 ? 0.0 : 0.5);
    }
    prob += p.weight * pj;
  }
  return std::clamp(prob, 0.0, 1.0);
}

std::pair<double, double> FitResult::linear_summary(const SparseCoefficients& c) const {
  double m1 = 0.0, m2 = 0.0;
  for (const auto& p : grid) {
    double m = 0.0;
    for (const auto& [i, ci] : c) m += ci * p.approx->mode[i];
    const double v = p.approx->linear_variance(c);
    m1 += p.weight * m;
    m2 += p.weight * (v + m * m);
  }
  return {m1, std::sqrt(std::max(m2 - m1 * m1, 0.0))};
}

double FitResult::exceedance(const SparseCoefficients& c, double threshold) const {
  double prob = 0.0;
  for (const auto& p : grid) {
    double m = -threshold;
    for (const auto& [i, ci] : c) m += ci * p.approx->mode[i];
    const double s = std::sqrt(p.approx->linear_variance(c));
    prob += p.weight * (s > 0.0 ? normal_cdf(m / s) : (m > 0.0 ? 1.0 : (m < 0.0 ? 0.0 : 0.5)));
  }
  return std::clamp(prob, 0.0, 1.0);
}

std::pair<double, double> FitResult::latent_summary(Eigen::Index i) const { return {latent_mean[i], latent_sd[i]}; }

double FitResult::latent_quantile(Eigen::Index i, double prob) const {
  auto cdf = [&](double v) {
    double c = 0.0;
    for (const auto& p : grid) {
      const double s = std::sqrt(p.latent_var[i]);
      const double m = p.approx->mode[i];
      c += p.weight * (s > 0.0 ? normal_cdf((v - m) / s) : (v >= m ? 1.0 : 0.0));
    }
    return c;
  };
  double lo = latent_mean[i] - 10.0 * latent_sd[i] - 1e-12;
  double hi = latent_mean[i] + 10.0 * latent_sd[i] + 1e-12;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < prob)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::pair<double, double> FitResult::reported_summary(std::size_t k, const LatentModel&) const {
  double m1 = 0.0, m2 = 0.0;
  for (const auto& p : grid) {
    const double v = std::exp(p.theta[static_cast<Eigen::Index>(k)]);
    m1 += p.weight * v;
    m2 += p.weight * v * v;
  }
  return {m1, std::sqrt(std::max(m2 - m1 * m1, 0.0))};
}

// ---------------------------------------------------------------------------
// fit

namespace {

struct Evaluation {
  double value = -std::numeric_limits<double>::infinity();
  std::shared_ptr<const ModeResult> approx;
};

class Objective {
 public:
  Objective(const LaplaceEngine& engine, unsigned threads) : engine_(engine), threads_(threads) {}

  Evaluation eval(const Eigen::VectorXd& theta, const Eigen::VectorXd* start) const {
    Evaluation e;
    try {
      auto r = std::make_shared<ModeResult>(
          engine_.find_mode(std::span<const double>(theta.data(), static_cast<std::size_t>(theta.size())), start));
      e.value = r->log_marginal +
                engine_.model().log_prior_theta(std::span<const double>(theta.data(), static_cast<std::size_t>(theta.size())));
      if (!std::isfinite(e.value)) e.value = -std::numeric_limits<double>::infinity();
      e.approx = std::move(r);
    } catch (const NumericalError&) {
      e.value = -std::numeric_limits<double>::infinity();
    }
    return e;
  }

  std::vector<Evaluation> eval_many(const std::vector<Eigen::VectorXd>& thetas, const Eigen::VectorXd* start) const {
    std::vector<Evaluation> out(thetas.size());
    detail::parallel_for(thetas.size(), threads_, [&](std::size_t i) { out[i] = eval(thetas[i], start); });
    return out;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& theta, const Eigen::VectorXd* start, double h) const {
    const auto d = theta.size();
    std::vector<Eigen::VectorXd> pts;
    for (Eigen::Index i = 0; i < d; ++i) {
      Eigen::VectorXd p = theta, mm = theta;
      p[i] += h;
      mm[i] -= h;
      pts.push_back(p);
      pts.push_back(mm);
    }
    const auto ev = eval_many(pts, start);
    Eigen::VectorXd g(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double fp = ev[static_cast<std::size_t>(2 * i)].value;
      const double fm = ev[static_cast<std::size_t>(2 * i + 1)].value;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw NumericalError("fit: objective not finite while differencing hyperparameter " + std::to_string(i));
      g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
  }

 private:
  const LaplaceEngine& engine_;
  unsigned threads_;
};

}  // namespace

FitResult fit(const LatentModel& model, const FitOptions& options) {
  const LaplaceEngine engine(model, options.newton);
  const Objective obj(engine, options.threads);
  const auto d = static_cast<Eigen::Index>(model.n_theta());

  FitResult res;
  res.theta_names = model.theta_names();

  Eigen::VectorXd theta = model.initial_theta();
  Evaluation cur = obj.eval(theta, nullptr);
  if (!cur.approx) {
    // Retry from a fresh start; the initial latent guess may be poor for this theta.
    throw NumericalError("fit: could not evaluate the posterior at the initial hyperparameters");
  }

  if (d > 0) {
    // Quasi-Newton on -(log pi(y|theta) + log pi(theta)) with finite-difference gradients.
    Eigen::VectorXd g = -obj.gradient(theta, &cur.approx->mode, options.fd_step);
    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(d, d);
    bool converged = false;
    int small_steps = 0;
    int it = 0;
    for (; it < options.max_outer_iterations; ++it) {
      const double gn = inf_norm(g);
      res.outer_trace.push_back(gn);
      if (gn < options.outer_gradient_tol) {
        converged = true;
        break;
      }
      Eigen::VectorXd p = -hinv * g;
      if (g.dot(p) >= 0.0) {
        hinv.setIdentity();
        p = -g;
      }
      const double pmax = inf_norm(p);
      if (pmax > 1.0) p /= pmax;
      double s = 1.0;
      Evaluation next;
      const double f0 = -cur.value;
      const double slope = g.dot(p);
      while (s > 1e-6) {
        next = obj.eval(theta + s * p, &cur.approx->mode);
        if (std::isfinite(next.value) && -next.value <= f0 + 1e-4 * s * slope) break;
        s *= 0.5;
      }
      if (!(s > 1e-6)) {
        if (!hinv.isIdentity()) {
          hinv.setIdentity();
          continue;
        }
        // No descent possible along the gradient: accept if the gradient is small.
        converged = gn < 50.0 * options.outer_gradient_tol;
        break;
      }
      const Eigen::VectorXd step = s * p;
      const double fdrop = f0 - (-next.value);
      theta += step;
      cur = next;
      const Eigen::VectorXd gnew = -obj.gradient(theta, &cur.approx->mode, options.fd_step);
      const Eigen::VectorXd yv = gnew - g;
      const double sy = step.dot(yv);
      if (sy > 1e-12) {
        const double rho = 1.0 / sy;
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
        hinv = (id - rho * step * yv.transpose()) * hinv * (id - rho * yv * step.transpose()) +
               rho * step * step.transpose();
      }
      g = gnew;
      small_steps = (fdrop < 1e-9 * (1.0 + std::abs(cur.value)) && inf_norm(step) < 1e-6) ? small_steps + 1 : 0;
      if (small_steps >= 3) {
        converged = inf_norm(g) < 50.0 * options.outer_gradient_tol;
        break;
      }
    }
    res.outer_iterations = it;
    res.outer_gradient_norm = inf_norm(g);
    if (!converged)
      throw NumericalError("fit: hyperparameter optimisation did not converge", res.outer_trace);
  }
  res.theta_mode = theta;

  // Curvature of the log posterior at the mode.
  res.theta_cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd scales = Eigen::VectorXd::Ones(d);
  if (d > 0) {
    const double h = options.hessian_step;
    std::vector<Eigen::VectorXd> pts;
    for (Eigen::Index i = 0; i < d; ++i) {
      Eigen::VectorXd p = theta, mm = theta;
      p[i] += h;
      mm[i] -= h;
      pts.push_back(p);
      pts.push_back(mm);
    }
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = i + 1; j < d; ++j)
        for (int si : {1, -1})
          for (int sj : {1, -1}) {
            Eigen::VectorXd p = theta;
            p[i] += si * h;
            p[j] += sj * h;
            pts.push_back(p);
          }
    const auto ev = obj.eval_many(pts, &cur.approx->mode);
    for (const auto& e : ev)
      if (!std::isfinite(e.value)) throw NumericalError("fit: posterior not finite near the mode");
    Eigen::MatrixXd hess(d, d);
    const double f0 = cur.value;
    for (Eigen::Index i = 0; i < d; ++i)
      hess(i, i) = (ev[static_cast<std::size_t>(2 * i)].value - 2.0 * f0 + ev[static_cast<std::size_t>(2 * i + 1)].value) / (h * h);
    std::size_t idx = static_cast<std::size_t>(2 * d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = i + 1; j < d; ++j) {
        const double fpp = ev[idx].value, fpm = ev[idx + 1].value, fmp = ev[idx + 2].value, fmm = ev[idx + 3].value;
        idx += 4;
        hess(i, j) = hess(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-hess);
    Eigen::VectorXd lam = es.eigenvalues();
    for (Eigen::Index i = 0; i < d; ++i) {
      if (lam[i] < options.min_hessian_eigenvalue) {
        lam[i] = options.min_hessian_eigenvalue;
        ++res.clamped_hessian_directions;
      }
    }
    basis = es.eigenvectors();
    scales = lam.cwiseSqrt().cwiseInverse();
    res.theta_cov = basis * lam.cwiseInverse().asDiagonal() * basis.transpose();
  }
  res.theta_sd = res.theta_cov.diagonal().cwiseSqrt();

  // Integration design in standardised coordinates.
  std::vector<Eigen::VectorXd> zs;
  zs.push_back(Eigen::VectorXd::Zero(d));
  if (options.design == FitOptions::Design::ccd && d > 0) {
    for (Eigen::Index i = 0; i < d; ++i)
      for (double sgn : {1.0, -1.0}) {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
        z[i] = sgn * options.ccd_step;
        zs.push_back(z);
      }
    if (d >= 2 && d <= options.ccd_corner_max_dim) {
      for (int mask = 0; mask < (1 << d); ++mask) {
        Eigen::VectorXd z(d);
        for (Eigen::Index i = 0; i < d; ++i) z[i] = ((mask >> i) & 1) ? options.ccd_step : -options.ccd_step;
        zs.push_back(z);
      }
    }
  }
  std::vector<Eigen::VectorXd> thetas;
  for (const auto& z : zs) thetas.push_back(theta + basis * scales.cwiseProduct(z));
  std::vector<Evaluation> ev(thetas.size());
  ev[0] = cur;
  if (thetas.size() > 1) {
    std::vector<Eigen::VectorXd> rest(thetas.begin() + 1, thetas.end());
    const auto more = obj.eval_many(rest, &cur.approx->mode);
    std::copy(more.begin(), more.end(), ev.begin() + 1);
  }

  double fmax = -std::numeric_limits<double>::infinity();
  for (const auto& e : ev) fmax = std::max(fmax, e.value);
  double wsum = 0.0;
  for (std::size_t j = 0; j < ev.size(); ++j) {
    if (!ev[j].approx || !std::isfinite(ev[j].value)) continue;
    ThetaPoint tp;
    tp.theta = thetas[j];
    tp.log_post = ev[j].value;
    tp.weight = std::exp(ev[j].value - fmax);
    tp.approx = ev[j].approx;
    wsum += tp.weight;
    res.grid.push_back(std::move(tp));
  }
  for (auto& p : res.grid) p.weight /= wsum;

  const auto n = model.n_latent();
  const auto nrows = model.n_rows();
  const auto npts = static_cast<Eigen::Index>(res.grid.size());
  res.rows.mean.resize(nrows, npts);
  res.rows.sd.resize(nrows, npts);
  res.rows.weights.resize(npts);
  detail::parallel_for(res.grid.size(), options.threads, [&](std::size_t j) {
    auto& p = res.grid[j];
    p.latent_var = p.approx->latent_variances();
    res.rows.mean.col(static_cast<Eigen::Index>(j)) = p.approx->eta;
    res.rows.sd.col(static_cast<Eigen::Index>(j)) = p.approx->row_variances(model.design()).cwiseSqrt();
  });
  res.latent_mean = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd second = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < npts; ++j) {
    const auto& p = res.grid[static_cast<std::size_t>(j)];
    res.rows.weights[j] = p.weight;
    res.latent_mean += p.weight * p.approx->mode;
    second += p.weight * (p.latent_var + p.approx->mode.cwiseAbs2());
    res.max_inner_gradient = std::max(res.max_inner_gradient, p.approx->gradient_norm);
  }
  res.latent_sd = (second - res.latent_mean.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
  res.row_mean = res.rows.mean * res.rows.weights;
  Eigen::VectorXd row_second = (res.rows.sd.cwiseAbs2() + res.rows.mean.cwiseAbs2()) * res.rows.weights;
  res.row_sd = (row_second - res.row_mean.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();

  // log p(y) from a Gaussian approximation of the hyperparameter posterior.
  double log_ml = cur.value;
  if (d > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(res.theta_cov);
    log_ml += 0.5 * static_cast<double>(d) * kLog2Pi + 0.5 * es.eigenvalues().array().log().sum();
  }
  res.criteria = compute_criteria(model, res.rows, log_ml);
  return res;
}

}  // namespace mvpp
