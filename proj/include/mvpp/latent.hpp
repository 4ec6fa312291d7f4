#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "mvpp/fem.hpp"
#include "mvpp/geometry.hpp"

namespace mvpp {

// ---------------------------------------------------------------------------
// Hyperparameter priors. Every positive hyperparameter is handled internally on
// the log scale; log_density() includes the Jacobian of that transform.

enum class PriorKind { pc_range, pc_sd, log_gamma };
enum class PcKind { range2d, range1d, sd };

struct HyperPrior {
  PriorKind kind = PriorKind::pc_sd;
  double lambda = 1.0;     // PC rate
  double dim = 2.0;        // spatial dimension for the range prior
  double shape = 1.0;      // gamma prior on a precision
  double rate = 5e-5;
  double threshold = 0.0;  // calibration statement, kept for reporting
  double prob = 0.0;

  /// Log density of the natural-scale parameter (range, sd or precision).
  double log_density_natural(double value) const;
  /// Log density of theta = log(value).
  double log_density(double theta) const;
  std::string describe() const;
};

/// PC prior whose rate satisfies P(range < threshold) = prob (range kinds) or
/// P(sd > threshold) = prob (sd kind).
HyperPrior pc_prior_calibrate(PcKind kind, double threshold, double prob);
HyperPrior log_gamma_prior(double shape, double rate);

struct Hyperparameter {
  std::string name;
  std::string scale;  // "range", "sd" or "precision"
  double initial = 0.0;  // internal (log) scale
  HyperPrior prior;
};

// ---------------------------------------------------------------------------

/// Matern covariance sigma2 * 2^(1-nu)/Gamma(nu) * (kappa d)^nu * K_nu(kappa d).
double matern_cov(double d, double sigma2, double kappa, double nu);

/// Marginal variance of the SPDE field with smoothness nu in `dim` dimensions
/// (alpha = nu + dim/2).
double spde_marginal_variance(double kappa, double tau, double nu, double dim);

/// A latent Gaussian block: precision builder, hyperparameters and rank
/// deficiency. Terms are immutable and can be shared across threads.
class GmrfTerm {
 public:
  explicit GmrfTerm(std::string name) : name_(std::move(name)) {}
  virtual ~GmrfTerm() = default;

  const std::string& name() const { return name_; }
  virtual std::string kind() const = 0;
  virtual Eigen::Index dim() const = 0;
  virtual const std::vector<Hyperparameter>& hyperparameters() const { return no_hyper_; }
  std::size_t n_hyper() const { return hyperparameters().size(); }

  /// Prior precision at internal hyperparameters theta (size n_hyper()).
  virtual SparseMatrix precision(std::span<const double> theta) const = 0;

  /// 1 when the precision has the constant vector as null space; such terms
  /// carry a sum-to-zero constraint during inference.
  virtual int rank_deficiency() const { return 0; }
  /// Improper uniform prior (zero precision).
  virtual bool is_flat() const { return false; }

  /// Reported-scale value of hyperparameter k.
  virtual double reported(std::span<const double> theta, std::size_t k) const;

 private:
  std::string name_;
  static inline const std::vector<Hyperparameter> no_hyper_{};
};

using TermPtr = std::shared_ptr<const GmrfTerm>;

/// Independent Gaussian coefficients with a fixed precision; precision 0 gives a
/// flat prior (used for intercepts).
class IidTerm final : public GmrfTerm {
 public:
  IidTerm(std::string name, Eigen::Index dim, double precision);

  std::string kind() const override { return "iid"; }
  Eigen::Index dim() const override { return dim_; }
  SparseMatrix precision(std::span<const double> theta) const override;
  bool is_flat() const override { return prec_ == 0.0; }
  double fixed_precision() const { return prec_; }

 private:
  Eigen::Index dim_;
  double prec_;
};

struct MaternPriors {
  HyperPrior range;
  HyperPrior sd;
};

/// 2-D Matern field (alpha = 2, nu = 1) on a triangulation. Hyperparameters:
/// log nominal range and log nominal sd.
class Spde2dTerm final : public GmrfTerm {
 public:
  Spde2dTerm(std::string name, std::shared_ptr<const Mesh> mesh, MaternPriors priors);

  static constexpr double nu = 1.0;

  std::string kind() const override { return "spde2d"; }
  Eigen::Index dim() const override { return static_cast<Eigen::Index>(mesh_->n_vertices()); }
  const std::vector<Hyperparameter>& hyperparameters() const override { return hyper_; }
  SparseMatrix precision(std::span<const double> theta) const override;

  /// tau^2 (kappa^4 C + 2 kappa^2 G + G C^-1 G).
  SparseMatrix precision_kappa_tau(double kappa, double tau) const;

  static double kappa_from_range(double range);
  static double range_from_kappa(double kappa);
  static double tau_from(double kappa, double sd);
  static double sd_from(double kappa, double tau);

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  const FemMatrices& fem() const { return fem_; }
  RowSparseMatrix projector(std::span<const Point> points) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  FemMatrices fem_;
  SparseMatrix gcg_;
  std::vector<Hyperparameter> hyper_;
};

/// 1-D Matern process (alpha = 2, nu = 3/2) on sorted knots, e.g. distance to a
/// pollution source.
class Spde1dTerm final : public GmrfTerm {
 public:
  Spde1dTerm(std::string name, std::vector<double> knots, MaternPriors priors);

  static constexpr double nu = 1.5;

  std::string kind() const override { return "spde1d"; }
  Eigen::Index dim() const override { return static_cast<Eigen::Index>(knots_.size()); }
  const std::vector<Hyperparameter>& hyperparameters() const override { return hyper_; }
  SparseMatrix precision(std::span<const double> theta) const override;
  SparseMatrix precision_kappa_tau(double kappa, double tau) const;

  static double kappa_from_range(double range);
  static double tau_from(double kappa, double sd);

  const std::vector<double>& knots() const { return knots_; }
  RowSparseMatrix projector(std::span<const double> values) const;

 private:
  std::vector<double> knots_;
  FemMatrices fem_;
  SparseMatrix gcg_;
  std::vector<Hyperparameter> hyper_;
};

/// First-order random walk on ordered knots; data rows take the value of the
/// nearest knot. Hyperparameter: log precision of the increments.
class Rw1Term final : public GmrfTerm {
 public:
  Rw1Term(std::string name, std::vector<double> knots, HyperPrior precision_prior);

  std::string kind() const override { return "rw1"; }
  Eigen::Index dim() const override { return static_cast<Eigen::Index>(knots_.size()); }
  const std::vector<Hyperparameter>& hyperparameters() const override { return hyper_; }
  SparseMatrix precision(std::span<const double> theta) const override;
  int rank_deficiency() const override { return 1; }

  /// Structure matrix R with tau * R the precision.
  SparseMatrix structure() const;
  SparseMatrix precision_tau(double tau) const;

  const std::vector<double>& knots() const { return knots_; }
  RowSparseMatrix projector(std::span<const double> values) const;

 private:
  std::vector<double> knots_;
  std::vector<Hyperparameter> hyper_;
};

/// r equally spaced knots from lo to hi inclusive.
std::vector<double> equally_spaced_knots(double lo, double hi, int r);

}  // namespace mvpp
