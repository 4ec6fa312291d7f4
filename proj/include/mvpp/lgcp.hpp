#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mvpp/geometry.hpp"
#include "mvpp/inference.hpp"
#include "mvpp/latent.hpp"
#include "mvpp/smoothing.hpp"

namespace mvpp {

enum class ExposureForm { none, fixed, rw1, spde1 };
enum class WeightScheme { voronoi, dual_mesh };

std::string to_string(ExposureForm form);
std::string to_string(WeightScheme scheme);
ExposureForm parse_exposure(const std::string& s);
WeightScheme parse_weight_scheme(const std::string& s);

struct PriorSettings {
  double range_threshold = 5.0;  // P(range < threshold) = range_prob
  double range_prob = 0.95;
  double sd_threshold = 10.0;  // P(sd > threshold) = sd_prob
  double sd_prob = 0.01;
  double exposure_range_threshold = 5.0;  // 1-D Matern exposure
  double exposure_range_prob = 0.95;
  double exposure_sd_threshold = 10.0;
  double exposure_sd_prob = 0.01;
  double fixed_precision = 1000.0;
  double intercept_precision = 0.0;  // 0: flat
  double rw1_shape = 1.0;
  double rw1_rate = 5e-5;

  friend bool operator==(const PriorSettings&, const PriorSettings&) = default;
};

/// One of the four model families:
///   0: alpha_i + S_0(x)
///   1: alpha_i + S_0(x) + S_i(x)
///   2: alpha_i + S_0(x) + sum_j F_ij(x)
///   3: alpha_i + S_0(x) + sum_j F_ij(x) + S_i(x)
/// with S_0 shared by the controls (block 0) and every disease block.
struct ModelSpec {
  int model = 0;
  int n_diseases = 1;
  ExposureForm exposure = ExposureForm::fixed;
  std::vector<Point> sources;
  std::vector<std::string> confounders;
  MeshOptions mesh;
  int rw1_knots = 20;
  int spde1_knots = 30;
  WeightScheme weights = WeightScheme::voronoi;
  PriorSettings priors;

  bool has_specific_fields() const { return model == 1 || model == 3; }
  bool has_exposure() const { return model == 2 || model == 3; }
  /// Throws InputError when the combination is inconsistent.
  void validate() const;
};

/// Poisson pseudo-observations: per block, one row (y = 1, A = 0) per observed
/// point and one row (y = 0, A = cell area) per integration cell.
struct AugmentedData {
  int n_blocks = 0;
  std::vector<double> y;
  std::vector<double> weight;
  std::vector<Point> location;
  std::vector<int> block;
  std::vector<std::string> covariate_names;
  Eigen::MatrixXd covariates;  // rows x covariates
  std::vector<Point> sources;
  Eigen::MatrixXd distances;  // rows x sources
  std::vector<std::size_t> n_events;
  double window_area = 0.0;
  std::size_t n_perturbed = 0;
  WeightScheme scheme = WeightScheme::voronoi;

  std::size_t size() const { return y.size(); }
  double dummy_mass(int b) const;
  void write_csv(std::ostream& out) const;
};

/// `mesh` is required for the dual-mesh scheme (its vertices are the dummy points).
AugmentedData augment(const PointPattern& pattern, const Window& window, WeightScheme scheme,
                      const std::vector<Point>& sources = {}, const Mesh* mesh = nullptr);

struct LatentBlock {
  std::string name;
  std::string kind;  // intercept, field, exposure, confounder
  Eigen::Index offset = 0;
  Eigen::Index dim = 0;
  int disease = 0;  // 0 for S_0 and the control intercept
  int source = -1;
  std::string covariate;
  TermPtr term;
};

class AssembledModel {
 public:
  AssembledModel(ModelSpec spec, AugmentedData data, std::shared_ptr<const Mesh> mesh,
                 std::vector<LatentBlock> blocks, std::shared_ptr<LatentModel> latent);

  const ModelSpec& spec() const { return spec_; }
  const AugmentedData& data() const { return data_; }
  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  const LatentModel& latent() const { return *latent_; }
  const std::vector<LatentBlock>& blocks() const { return blocks_; }

  const LatentBlock* find(const std::string& name) const;
  const LatentBlock& intercept(int b) const;
  /// S_0 for i = 0, S_i otherwise; nullptr when the model has no such field.
  const LatentBlock* field(int i) const;
  const LatentBlock* exposure(int disease, int source) const;

  /// Coefficients of field i evaluated at p (barycentric weights on its block).
  SparseCoefficients field_coefficients(int i, Point p) const;
  /// Coefficients of F_ij at distance d.
  SparseCoefficients exposure_coefficients(int disease, int source, double d) const;
  /// Linear predictor of block b at location p excluding confounders.
  SparseCoefficients predictor_coefficients(int b, Point p) const;

  Eigen::VectorXd predictor(const Eigen::VectorXd& x) const { return latent_->design() * x; }

 private:
  ModelSpec spec_;
  AugmentedData data_;
  std::shared_ptr<const Mesh> mesh_;
  std::vector<LatentBlock> blocks_;
  std::shared_ptr<LatentModel> latent_;
  std::unique_ptr<TriangleLocator> locator_;
};

std::shared_ptr<const Mesh> make_mesh(const Window& window, const ModelSpec& spec);

AssembledModel assemble(const ModelSpec& spec, AugmentedData data, std::shared_ptr<const Mesh> mesh);

/// Convenience: mesh, augmentation and assembly in one call.
AssembledModel build_model(const ModelSpec& spec, const PointPattern& pattern, const Window& window);

struct FieldGrids {
  GridField mean;
  GridField sd;
  GridField exceedance;  // P(value > 0 | y)
};

/// Posterior mean, sd and exceedance of S_i on the grid (i >= 1 requires model 1 or 3).
FieldGrids field_grids(const FitResult& fit, const AssembledModel& model, int i, const GridSpec& grid,
                       const Window& window);

/// Posterior mean and sd of S_u(x) - S_v(x) (and its exceedance).
FieldGrids effect_difference(const FitResult& fit, const AssembledModel& model, int u, int v, const GridSpec& grid,
                             const Window& window);

/// Posterior mean/sd of the log-intensity of block b (without confounders).
FieldGrids log_intensity_grids(const FitResult& fit, const AssembledModel& model, int b, const GridSpec& grid,
                               const Window& window);

struct EffectSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;  // 2.5%
  double upper = 0.0;  // 97.5%
};

/// Intercepts and scalar fixed effects (exposure slopes, confounders).
std::vector<EffectSummary> fixed_effects(const FitResult& fit, const AssembledModel& model);

struct CurvePoint {
  double distance = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

std::vector<CurvePoint> exposure_curve(const FitResult& fit, const AssembledModel& model, int disease, int source,
                                       std::span<const double> distances);

}  // namespace mvpp
