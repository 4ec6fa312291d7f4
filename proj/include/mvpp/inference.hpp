#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mvpp/fem.hpp"
#include "mvpp/latent.hpp"

namespace mvpp {

enum class Likelihood {
  /// Poisson pseudo-likelihood y*eta - w*exp(eta); w is the integration weight.
  poisson,
  /// Gaussian with known per-row precision w (test hook).
  gaussian,
};

struct LatentComponent {
  TermPtr term;
  Eigen::Index offset = 0;     // first latent index
  std::size_t theta_offset = 0;  // first hyperparameter index
};

/// Latent Gaussian model: y_k | eta_k ~ likelihood, eta = design * x, with x a
/// concatenation of independent GMRF blocks.
class LatentModel {
 public:
  LatentModel(Likelihood likelihood, Eigen::VectorXd y, Eigen::VectorXd weights, RowSparseMatrix design,
              std::vector<TermPtr> terms);

  Likelihood likelihood() const { return likelihood_; }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const RowSparseMatrix& design() const { return design_; }
  const std::vector<LatentComponent>& components() const { return components_; }

  Eigen::Index n_latent() const { return n_latent_; }
  Eigen::Index n_rows() const { return y_.size(); }
  std::size_t n_theta() const { return n_theta_; }

  std::vector<std::string> theta_names() const;
  Eigen::VectorXd initial_theta() const;
  double log_prior_theta(std::span<const double> theta) const;

  /// Starting latent vector for the Newton iterations (zeros unless set).
  const Eigen::VectorXd& initial_latent() const { return x0_; }
  void set_initial_latent(Eigen::VectorXd x0);
  void set_initial_theta(Eigen::VectorXd theta0);

  /// One dense row per sum-to-zero constraint.
  const Eigen::MatrixXd& constraints() const { return constraints_; }

  /// Log-likelihood of one row at linear predictor eta (additive constants dropped
  /// for the Poisson pseudo-likelihood).
  double row_loglik(Eigen::Index k, double eta) const;

  /// Block-diagonal prior precision including constraint penalties.
  SparseMatrix prior_precision(std::span<const double> theta) const;

  /// Requests that posterior covariances between these latent pairs be
  /// available from the selected inverse (adds them to the factor pattern).
  void add_covariance_pattern(std::span<const std::pair<Eigen::Index, Eigen::Index>> pairs);
  const std::vector<std::pair<Eigen::Index, Eigen::Index>>& covariance_pattern() const { return extra_pattern_; }

 private:
  Likelihood likelihood_;
  Eigen::VectorXd y_;
  Eigen::VectorXd weights_;
  RowSparseMatrix design_;
  std::vector<LatentComponent> components_;
  Eigen::Index n_latent_ = 0;
  std::size_t n_theta_ = 0;
  Eigen::VectorXd x0_;
  Eigen::VectorXd theta0_;
  Eigen::MatrixXd constraints_;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> extra_pattern_;
};

/// Sparse linear combination sum_k coef_k * x_{index_k}.
using SparseCoefficients = std::vector<std::pair<Eigen::Index, double>>;

/// Cholesky factor of a symmetric positive definite matrix under a fixed
/// fill-reducing permutation.
class SparseFactor {
 public:
  using Permutation = Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>;

  SparseFactor(const SparseMatrix& h, const Permutation& perm);

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
  /// z with z'z = b' H^-1 b.
  Eigen::VectorXd half_solve(const Eigen::VectorXd& b) const;
  double log_det() const { return log_det_; }
  Eigen::Index size() const { return perm_.size(); }

  /// Entries of H^-1 on the pattern of the factor (Takahashi recursions).
  void compute_selected_inverse() const;
  /// (H^-1)_{ij}; requires compute_selected_inverse() and (i, j) in the pattern.
  double inverse_entry(Eigen::Index i, Eigen::Index j) const;
  /// NaN when (i, j) is outside the factor pattern.
  double try_inverse_entry(Eigen::Index i, Eigen::Index j) const;
  Eigen::VectorXd inverse_diagonal() const;

 private:
  Permutation perm_;
  SparseMatrix l_;
  double log_det_ = 0.0;
  mutable std::vector<double> sigma_;  // aligned with l_ storage
};

/// Gaussian approximation of pi(x | y, theta) at the posterior mode.
struct ModeResult {
  Eigen::VectorXd theta;
  Eigen::VectorXd mode;
  Eigen::VectorXd eta;
  double log_lik = 0.0;
  double log_prior_latent = 0.0;
  double log_gaussian = 0.0;
  double log_marginal = 0.0;  // Laplace approximation of log pi(y | theta)
  int iterations = 0;
  double gradient_norm = 0.0;  // infinity norm of the projected inner gradient
  std::vector<double> trace;

  std::shared_ptr<const SparseFactor> factor;
  Eigen::MatrixXd w;      // H^-1 A_c'
  Eigen::MatrixXd v_inv;  // (A_c H^-1 A_c')^-1

  /// Posterior variance of c'x including the constraint correction.
  double linear_variance(const Eigen::VectorXd& c) const;
  /// Same from the selected inverse when every pair of indices lies in the
  /// factor pattern; falls back to a triangular solve otherwise.
  double linear_variance(const SparseCoefficients& c) const;
  /// Marginal variances of every latent node.
  Eigen::VectorXd latent_variances() const;
  /// Variance of each row's linear predictor.
  Eigen::VectorXd row_variances(const RowSparseMatrix& design) const;
};

struct NewtonOptions {
  int max_iterations = 50;
  double gradient_tol = 1e-6;
};

/// Newton solver for the inner (latent) problem; the fill-reducing ordering is
/// computed once and reused for every theta.
class LaplaceEngine {
 public:
  explicit LaplaceEngine(const LatentModel& model, NewtonOptions options = {});

  const LatentModel& model() const { return *model_; }

  ModeResult find_mode(std::span<const double> theta, const Eigen::VectorXd* start = nullptr) const;
  double log_marginal(std::span<const double> theta, const Eigen::VectorXd* start = nullptr) const;

  /// log pi(y | x) + log pi(x | theta) up to constants; the inner objective.
  double objective(std::span<const double> theta, const Eigen::VectorXd& x) const;
  /// Analytic gradient of objective() with respect to x.
  Eigen::VectorXd gradient(std::span<const double> theta, const Eigen::VectorXd& x) const;

 private:
  SparseMatrix hessian(const SparseMatrix& q, const Eigen::VectorXd& curvature) const;

  const LatentModel* model_;
  NewtonOptions options_;
  SparseMatrix structure_;
  SparseFactor::Permutation perm_;
  SparseMatrix design_t_;
};

struct FitOptions {
  enum class Design { ccd, mode_only };
  Design design = Design::ccd;
  double ccd_step = 1.0;       // in posterior sd units
  int ccd_corner_max_dim = 3;  // factorial corners only up to this dimension
  int max_outer_iterations = 100;
  double outer_gradient_tol = 5e-3;
  double fd_step = 1e-3;
  double hessian_step = 0.05;
  double min_hessian_eigenvalue = 0.25;
  NewtonOptions newton;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct Criteria {
  double mean_deviance = 0.0;
  double deviance_at_mean = 0.0;
  double p_d = 0.0;
  double dic = 0.0;
  double lppd = 0.0;
  double p_waic = 0.0;
  double waic = 0.0;
  double log_ml = 0.0;
  double negative_pwaic_share = 0.0;
  bool dic_reliable = true;
  bool waic_reliable = true;
};

/// Per-row predictive mixture: mean(k, j) and sd(k, j) of eta_k at design point
/// j, mixed with weights[j].
struct RowPredictive {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd sd;
  Eigen::VectorXd weights;
};

Criteria compute_criteria(const LatentModel& model, const RowPredictive& rows, double log_ml);
/// Same, for an explicit set of observations (y, weights) matching the rows.
Criteria compute_criteria(Likelihood likelihood, const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                          const RowPredictive& rows, double log_ml);

struct ThetaPoint {
  Eigen::VectorXd theta;
  double log_post = 0.0;  // log pi(y | theta) + log pi(theta)
  double weight = 0.0;
  std::shared_ptr<const ModeResult> approx;
  Eigen::VectorXd latent_var;
};

class FitResult {
 public:
  std::vector<std::string> theta_names;
  Eigen::VectorXd theta_mode;
  Eigen::MatrixXd theta_cov;
  Eigen::VectorXd theta_sd;
  std::vector<ThetaPoint> grid;

  Eigen::VectorXd latent_mean;
  Eigen::VectorXd latent_sd;
  RowPredictive rows;
  Eigen::VectorXd row_mean;
  Eigen::VectorXd row_sd;
  Criteria criteria;

  int outer_iterations = 0;
  double outer_gradient_norm = 0.0;
  std::vector<double> outer_trace;
  double max_inner_gradient = 0.0;
  int clamped_hessian_directions = 0;

  /// Mixture mean and sd of c'x.
  std::pair<double, double> linear_summary(const Eigen::VectorXd& c) const;
  /// Mixture probability that c'x > threshold.
  double exceedance(const Eigen::VectorXd& c, double threshold = 0.0) const;
  std::pair<double, double> linear_summary(const SparseCoefficients& c) const;
  double exceedance(const SparseCoefficients& c, double threshold = 0.0) const;
  /// Mixture mean/sd of a latent node.
  std::pair<double, double> latent_summary(Eigen::Index i) const;
  /// Mixture quantile of latent node i (bisection on the mixture CDF).
  double latent_quantile(Eigen::Index i, double p) const;
  /// Mixture mean and sd of exp(theta_k) (reported scale) over the design.
  std::pair<double, double> reported_summary(std::size_t k, const LatentModel& model) const;
};

FitResult fit(const LatentModel& model, const FitOptions& options = {});

/// Gauss-Hermite nodes/weights for integrals against the standard normal density.
void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights);

double normal_cdf(double z);

}  // namespace mvpp
