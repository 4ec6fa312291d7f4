#include "mvpp/lgcp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include "mvpp/error.hpp"
#include "mvpp/fem.hpp"

namespace mvpp {

std::string to_string(ExposureForm form) {
  switch (form) {
    case ExposureForm::none: return "none";
    case ExposureForm::fixed: return "fixed";
    case ExposureForm::rw1: return "rw1";
    case ExposureForm::spde1: return "spde1";
  }
  return "none";
}

std::string to_string(WeightScheme scheme) { return scheme == WeightScheme::voronoi ? "voronoi" : "dual-mesh"; }

ExposureForm parse_exposure(const std::string& s) {
  if (s == "none") return ExposureForm::none;
  if (s == "fixed") return ExposureForm::fixed;
  if (s == "rw1") return ExposureForm::rw1;
  if (s == "spde1") return ExposureForm::spde1;
  throw InputError("unknown exposure form '" + s + "' (expected fixed, rw1 or spde1)");
}

WeightScheme parse_weight_scheme(const std::string& s) {
  if (s == "voronoi") return WeightScheme::voronoi;
  if (s == "dual-mesh" || s == "dual_mesh") return WeightScheme::dual_mesh;
  throw InputError("unknown weight scheme '" + s + "' (expected voronoi or dual-mesh)");
}

void ModelSpec::validate() const {
  if (model < 0 || model > 3) throw InputError("model id must be 0, 1, 2 or 3");
  if (n_diseases < 0) throw InputError("number of diseases must be non-negative");
  if (n_diseases < 1 && model != 0) throw InputError("models 1-3 need at least one disease");
  if (has_exposure()) {
    if (sources.empty()) throw InputError("models 2 and 3 need at least one source");
    if (exposure == ExposureForm::none) throw InputError("models 2 and 3 need an exposure form");
  }
  if (rw1_knots < 2) throw InputError("rw1 needs at least two knots");
  if (spde1_knots < 3) throw InputError("spde1 needs at least three knots");
  if (!(mesh.max_edge_inner > 0.0)) throw InputError("mesh max edge must be positive");
}

double AugmentedData::dummy_mass(int b) const {
  double s = 0.0;
  for (std::size_t k = 0; k < size(); ++k)
    if (block[k] == b && y[k] == 0.0) s += weight[k];
  return s;
}

void AugmentedData::write_csv(std::ostream& out) const {
  out << "block,y,weight,x,y_coord";
  for (std::size_t j = 0; j < sources.size(); ++j) out << ",dist" << j + 1;
  for (const auto& c : covariate_names) out << ',' << c;
  out << '\n' << std::setprecision(12);
  for (std::size_t k = 0; k < size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    out << block[k] << ',' << y[k] << ',' << weight[k] << ',' << location[k].x << ',' << location[k].y;
    for (Eigen::Index j = 0; j < distances.cols(); ++j) out << ',' << distances(r, j);
    for (Eigen::Index j = 0; j < covariates.cols(); ++j) out << ',' << covariates(r, j);
    out << '\n';
  }
}

namespace {

// Nearest observed point (brute force over a coarse bucket grid).
class NearestPoint {
 public:
  explicit NearestPoint(std::span<const Point> pts) : pts_(pts) {
    Box b{{1e300, 1e300}, {-1e300, -1e300}};
    for (const auto& p : pts) {
      b.lo.x = std::min(b.lo.x, p.x);
      b.lo.y = std::min(b.lo.y, p.y);
      b.hi.x = std::max(b.hi.x, p.x);
      b.hi.y = std::max(b.hi.y, p.y);
    }
    box_ = b;
    n_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(pts.size()) / 2.0)));
    cw_ = std::max(b.width(), 1e-12) / n_;
    ch_ = std::max(b.height(), 1e-12) / n_;
    cells_.resize(static_cast<std::size_t>(n_ * n_));
    for (std::size_t i = 0; i < pts.size(); ++i) cells_[cell(pts[i])].push_back(i);
  }

  std::size_t nearest(Point p) const {
    const int ci = std::clamp(static_cast<int>((p.x - box_.lo.x) / cw_), 0, n_ - 1);
    const int cj = std::clamp(static_cast<int>((p.y - box_.lo.y) / ch_), 0, n_ - 1);
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (int ring = 0; ring <= n_; ++ring) {
      for (int dj = -ring; dj <= ring; ++dj)
        for (int di = -ring; di <= ring; ++di) {
          if (std::max(std::abs(di), std::abs(dj)) != ring) continue;
          const int i = ci + di, j = cj + dj;
          if (i < 0 || j < 0 || i >= n_ || j >= n_) continue;
          for (std::size_t k : cells_[static_cast<std::size_t>(j * n_ + i)]) {
            const double d = distance(p, pts_[k]);
            if (d < best || (d == best && k < arg)) {
              best = d;
              arg = k;
            }
          }
        }
      // Everything further than `ring` cells away is at least ring * min(cw, ch) away.
      if (best < ring * std::min(cw_, ch_)) break;
    }
    return arg;
  }

 private:
  std::size_t cell(Point p) const {
    const int i = std::clamp(static_cast<int>((p.x - box_.lo.x) / cw_), 0, n_ - 1);
    const int j = std::clamp(static_cast<int>((p.y - box_.lo.y) / ch_), 0, n_ - 1);
    return static_cast<std::size_t>(j * n_ + i);
  }

  std::span<const Point> pts_;
  Box box_;
  int n_ = 1;
  double cw_ = 1.0, ch_ = 1.0;
  std::vector<std::vector<std::size_t>> cells_;
};

}  // namespace

AugmentedData augment(const PointPattern& pattern, const Window& window, WeightScheme scheme,
                      const std::vector<Point>& sources, const Mesh* mesh) {
  pattern.validate(window);
  const int nb = pattern.n_types();
  if (nb < 1) throw InputError("augment: empty pattern");
  for (int b = 0; b < nb; ++b)
    if (pattern.count(b) == 0) throw InputError("augment: mark " + std::to_string(b) + " has no points");
  if (scheme == WeightScheme::dual_mesh && mesh == nullptr) throw InputError("augment: dual-mesh scheme needs a mesh");

  AugmentedData d;
  d.n_blocks = nb;
  d.scheme = scheme;
  d.sources = sources;
  d.window_area = window.area();
  d.covariate_names = pattern.covariate_names;
  const auto ncov = static_cast<Eigen::Index>(pattern.covariate_names.size());

  std::vector<Eigen::Index> cov_source;  // pattern row providing covariates for each data row
  Eigen::VectorXd dual;
  std::vector<std::size_t> dual_nearest;
  if (scheme == WeightScheme::dual_mesh) {
    dual = dual_mesh_weights(*mesh, window);
    if (ncov > 0) {
      const NearestPoint nn(pattern.points);
      dual_nearest.resize(mesh->n_vertices());
      for (std::size_t v = 0; v < mesh->n_vertices(); ++v) dual_nearest[v] = nn.nearest(mesh->vertices[v]);
    }
  }

  for (int b = 0; b < nb; ++b) {
    const auto idx = pattern.indices_of(b);
    d.n_events.push_back(idx.size());
    for (std::size_t i : idx) {
      d.y.push_back(1.0);
      d.weight.push_back(0.0);
      d.location.push_back(pattern.points[i]);
      d.block.push_back(b);
      cov_source.push_back(static_cast<Eigen::Index>(i));
    }
    if (scheme == WeightScheme::voronoi) {
      const auto pts = pattern.points_of(b);
      const VoronoiWeights vw = voronoi_weights(pts, window);
      d.n_perturbed += vw.n_perturbed;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        d.y.push_back(0.0);
        d.weight.push_back(vw.areas[static_cast<Eigen::Index>(k)]);
        d.location.push_back(vw.points[k]);
        d.block.push_back(b);
        cov_source.push_back(static_cast<Eigen::Index>(idx[k]));
      }
    } else {
      for (std::size_t v = 0; v < mesh->n_vertices(); ++v) {
        if (!(dual[static_cast<Eigen::Index>(v)] > 0.0)) continue;
        d.y.push_back(0.0);
        d.weight.push_back(dual[static_cast<Eigen::Index>(v)]);
        d.location.push_back(mesh->vertices[v]);
        d.block.push_back(b);
        cov_source.push_back(ncov > 0 ? static_cast<Eigen::Index>(dual_nearest[v]) : -1);
      }
    }
  }

  const auto n = static_cast<Eigen::Index>(d.size());
  d.covariates.resize(n, ncov);
  if (ncov > 0)
    for (Eigen::Index k = 0; k < n; ++k) d.covariates.row(k) = pattern.covariates.row(cov_source[static_cast<std::size_t>(k)]);
  d.distances.resize(n, static_cast<Eigen::Index>(sources.size()));
  for (std::size_t j = 0; j < sources.size(); ++j) {
    const auto dist = distance_to_source(d.location, sources[j]);
    for (Eigen::Index k = 0; k < n; ++k) d.distances(k, static_cast<Eigen::Index>(j)) = dist[static_cast<std::size_t>(k)];
  }
  return d;
}

// ---------------------------------------------------------------------------

AssembledModel::AssembledModel(ModelSpec spec, AugmentedData data, std::shared_ptr<const Mesh> mesh,
                               std::vector<LatentBlock> blocks, std::shared_ptr<LatentModel> latent)
    : spec_(std::move(spec)),
      data_(std::move(data)),
      mesh_(std::move(mesh)),
      blocks_(std::move(blocks)),
      latent_(std::move(latent)),
      locator_(std::make_unique<TriangleLocator>(*mesh_)) {}

const LatentBlock* AssembledModel::find(const std::string& name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return &b;
  return nullptr;
}

const LatentBlock& AssembledModel::intercept(int b) const {
  for (const auto& blk : blocks_)
    if (blk.kind == "intercept" && blk.disease == b) return blk;
  throw InputError("no intercept for block " + std::to_string(b));
}

const LatentBlock* AssembledModel::field(int i) const {
  for (const auto& blk : blocks_)
    if (blk.kind == "field" && blk.disease == i) return &blk;
  return nullptr;
}

const LatentBlock* AssembledModel::exposure(int disease, int source) const {
  for (const auto& blk : blocks_)
    if (blk.kind == "exposure" && blk.disease == disease && blk.source == source) return &blk;
  return nullptr;
}

SparseCoefficients AssembledModel::field_coefficients(int i, Point p) const {
  const LatentBlock* f = field(i);
  if (!f) throw InputError("model has no spatial field S" + std::to_string(i));
  const int t = locator_->locate(p);
  if (t < 0) throw InputError("location outside the mesh");
  const auto bc = locator_->barycentric(t, p);
  const auto& tri = mesh_->triangles[static_cast<std::size_t>(t)];
  SparseCoefficients c;
  for (int k = 0; k < 3; ++k)
    if (bc[static_cast<std::size_t>(k)] != 0.0) c.emplace_back(f->offset + tri[static_cast<std::size_t>(k)], bc[static_cast<std::size_t>(k)]);
  return c;
}

SparseCoefficients AssembledModel::exposure_coefficients(int disease, int source, double d) const {
  const LatentBlock* e = exposure(disease, source);
  if (!e) throw InputError("model has no exposure term for disease " + std::to_string(disease));
  SparseCoefficients c;
  const std::vector<double> one{d};
  RowSparseMatrix row;
  if (e->term->kind() == "iid") {
    c.emplace_back(e->offset, d);
    return c;
  } else if (auto rw = std::dynamic_pointer_cast<const Rw1Term>(e->term)) {
    row = rw->projector(one);
  } else if (auto sp = std::dynamic_pointer_cast<const Spde1dTerm>(e->term)) {
    row = sp->projector(one);
  }
  for (RowSparseMatrix::InnerIterator it(row, 0); it; ++it) c.emplace_back(e->offset + it.col(), it.value());
  return c;
}

SparseCoefficients AssembledModel::predictor_coefficients(int b, Point p) const {
  SparseCoefficients c{{intercept(b).offset, 1.0}};
  for (const auto& e : field_coefficients(0, p)) c.push_back(e);
  if (b > 0 && spec_.has_specific_fields())
    for (const auto& e : field_coefficients(b, p)) c.push_back(e);
  if (b > 0 && spec_.has_exposure())
    for (std::size_t j = 0; j < spec_.sources.size(); ++j)
      for (const auto& e : exposure_coefficients(b, static_cast<int>(j), distance(p, spec_.sources[j]))) c.push_back(e);
  return c;
}

std::shared_ptr<const Mesh> make_mesh(const Window& window, const ModelSpec& spec) {
  return std::make_shared<const Mesh>(build_mesh(window, spec.mesh));
}

AssembledModel assemble(const ModelSpec& spec, AugmentedData data, std::shared_ptr<const Mesh> mesh) {
  spec.validate();
  const int k = data.n_blocks - 1;
  if (k != spec.n_diseases)
    throw InputError("model expects " + std::to_string(spec.n_diseases) + " diseases but the data has " +
                     std::to_string(k));
  if (spec.has_exposure() && data.sources.size() != spec.sources.size())
    throw InputError("augmented data was built for a different number of sources");
  std::vector<Eigen::Index> conf_cols;
  for (const auto& c : spec.confounders) {
    const auto it = std::find(data.covariate_names.begin(), data.covariate_names.end(), c);
    if (it == data.covariate_names.end()) throw InputError("confounder '" + c + "' is not a pattern column");
    const auto col = static_cast<Eigen::Index>(it - data.covariate_names.begin());
    for (Eigen::Index r = 0; r < data.covariates.rows(); ++r)
      if (!std::isfinite(data.covariates(r, col)))
        throw InputError("confounder '" + c + "' is missing at data row " + std::to_string(r));
    conf_cols.push_back(col);
  }

  const PriorSettings& pr = spec.priors;
  const MaternPriors field_priors{pc_prior_calibrate(PcKind::range2d, pr.range_threshold, pr.range_prob),
                                  pc_prior_calibrate(PcKind::sd, pr.sd_threshold, pr.sd_prob)};
  const MaternPriors exposure_priors{
      pc_prior_calibrate(PcKind::range1d, pr.exposure_range_threshold, pr.exposure_range_prob),
      pc_prior_calibrate(PcKind::sd, pr.exposure_sd_threshold, pr.exposure_sd_prob)};

  std::vector<LatentBlock> blocks;
  Eigen::Index offset = 0;
  auto add = [&](LatentBlock b) {
    b.offset = offset;
    b.dim = b.term->dim();
    offset += b.dim;
    blocks.push_back(std::move(b));
  };
  for (int b = 0; b <= k; ++b) {
    const std::string name = "alpha_" + std::to_string(b);
    add({name, "intercept", 0, 0, b, -1, "", std::make_shared<IidTerm>(name, 1, pr.intercept_precision)});
  }
  add({"S0", "field", 0, 0, 0, -1, "", std::make_shared<Spde2dTerm>("S0", mesh, field_priors)});
  if (spec.has_specific_fields())
    for (int i = 1; i <= k; ++i) {
      const std::string name = "S" + std::to_string(i);
      add({name, "field", 0, 0, i, -1, "", std::make_shared<Spde2dTerm>(name, mesh, field_priors)});
    }
  if (spec.has_exposure()) {
    for (std::size_t j = 0; j < spec.sources.size(); ++j) {
      const double dmax = std::max(data.distances.col(static_cast<Eigen::Index>(j)).maxCoeff(), 1e-6);
      for (int i = 1; i <= k; ++i) {
        const std::string suffix = "_" + std::to_string(i) + "_" + std::to_string(j + 1);
        TermPtr t;
        switch (spec.exposure) {
          case ExposureForm::fixed:
            t = std::make_shared<IidTerm>("beta" + suffix, 1, pr.fixed_precision);
            break;
          case ExposureForm::rw1:
            t = std::make_shared<Rw1Term>("u" + suffix, equally_spaced_knots(0.0, dmax, spec.rw1_knots),
                                          log_gamma_prior(pr.rw1_shape, pr.rw1_rate));
            break;
          case ExposureForm::spde1:
            t = std::make_shared<Spde1dTerm>("v" + suffix, equally_spaced_knots(0.0, dmax, spec.spde1_knots),
                                             exposure_priors);
            break;
          case ExposureForm::none:
            break;
        }
        add({t->name(), "exposure", 0, 0, i, static_cast<int>(j), "", t});
      }
    }
  }
  for (std::size_t c = 0; c < spec.confounders.size(); ++c)
    for (int i = 1; i <= k; ++i) {
      const std::string name = "gamma_" + spec.confounders[c] + "_" + std::to_string(i);
      add({name, "confounder", 0, 0, i, -1, spec.confounders[c], std::make_shared<IidTerm>(name, 1, pr.fixed_precision)});
    }

  // Design matrix.
  const auto n = static_cast<Eigen::Index>(data.size());
  const RowSparseMatrix amesh = projector(*mesh, data.location);
  std::vector<Eigen::Triplet<double>> trip;
  auto find_block = [&](const std::string& kind, int disease, int source) -> const LatentBlock* {
    for (const auto& b : blocks)
      if (b.kind == kind && b.disease == disease && b.source == source) return &b;
    return nullptr;
  };
  for (Eigen::Index r = 0; r < n; ++r) {
    const int b = data.block[static_cast<std::size_t>(r)];
    const int row = static_cast<int>(r);
    trip.emplace_back(row, static_cast<int>(find_block("intercept", b, -1)->offset), 1.0);
    std::vector<const LatentBlock*> fields{find_block("field", 0, -1)};
    if (b > 0 && spec.has_specific_fields()) fields.push_back(find_block("field", b, -1));
    for (const LatentBlock* f : fields)
      for (RowSparseMatrix::InnerIterator it(amesh, r); it; ++it)
        trip.emplace_back(row, static_cast<int>(f->offset + it.col()), it.value());
    if (b > 0 && spec.has_exposure()) {
      for (std::size_t j = 0; j < spec.sources.size(); ++j) {
        const LatentBlock* e = find_block("exposure", b, static_cast<int>(j));
        const double dist = data.distances(r, static_cast<Eigen::Index>(j));
        if (spec.exposure == ExposureForm::fixed) {
          trip.emplace_back(row, static_cast<int>(e->offset), dist);
        } else {
          const std::vector<double> one{dist};
          RowSparseMatrix p;
          if (auto rw = std::dynamic_pointer_cast<const Rw1Term>(e->term))
            p = rw->projector(one);
          else
            p = std::dynamic_pointer_cast<const Spde1dTerm>(e->term)->projector(one);
          for (RowSparseMatrix::InnerIterator it(p, 0); it; ++it)
            trip.emplace_back(row, static_cast<int>(e->offset + it.col()), it.value());
        }
      }
    }
    if (b > 0)
      for (std::size_t c = 0; c < conf_cols.size(); ++c) {
        for (const auto& blk : blocks)
          if (blk.kind == "confounder" && blk.disease == b && blk.covariate == spec.confounders[c])
            trip.emplace_back(row, static_cast<int>(blk.offset), data.covariates(r, conf_cols[c]));
      }
  }
  RowSparseMatrix design(n, offset);
  design.setFromTriplets(trip.begin(), trip.end());
  design.makeCompressed();

  std::vector<TermPtr> terms;
  for (const auto& b : blocks) terms.push_back(b.term);
  auto latent = std::make_shared<LatentModel>(Likelihood::poisson, Eigen::Map<const Eigen::VectorXd>(data.y.data(), n),
                                              Eigen::Map<const Eigen::VectorXd>(data.weight.data(), n),
                                              std::move(design), terms);

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(offset);
  for (int b = 0; b <= k; ++b)
    x0[find_block("intercept", b, -1)->offset] =
        std::log(static_cast<double>(data.n_events[static_cast<std::size_t>(b)]) / data.window_area);
  latent->set_initial_latent(x0);

  // Cross-covariances needed for differences of disease-specific fields.
  if (spec.has_specific_fields() && k >= 2) {
    std::set<std::pair<int, int>> nb;
    for (const auto& t : mesh->triangles)
      for (int a = 0; a < 3; ++a)
        for (int c = 0; c < 3; ++c) nb.emplace(t[static_cast<std::size_t>(a)], t[static_cast<std::size_t>(c)]);
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    for (int u = 1; u <= k; ++u)
      for (int v = u + 1; v <= k; ++v) {
        const auto ou = find_block("field", u, -1)->offset, ov = find_block("field", v, -1)->offset;
        for (const auto& [a, c] : nb) pairs.emplace_back(ou + a, ov + c);
      }
    latent->add_covariance_pattern(pairs);
  }

  return AssembledModel(spec, std::move(data), std::move(mesh), std::move(blocks), std::move(latent));
}

AssembledModel build_model(const ModelSpec& spec, const PointPattern& pattern, const Window& window) {
  spec.validate();
  auto mesh = make_mesh(window, spec);
  AugmentedData data = augment(pattern, window, spec.weights, spec.has_exposure() ? spec.sources : std::vector<Point>{},
                               mesh.get());
  return assemble(spec, std::move(data), std::move(mesh));
}

// ---------------------------------------------------------------------------

namespace {

SparseCoefficients merge(SparseCoefficients c) {
  std::map<Eigen::Index, double> acc;
  for (const auto& [i, v] : c) acc[i] += v;
  SparseCoefficients out;
  for (const auto& [i, v] : acc)
    if (v != 0.0) out.emplace_back(i, v);
  return out;
}

template <class Coef>
FieldGrids grids_from(const FitResult& fit, const GridSpec& grid, const Window& window, Coef&& coef) {
  FieldGrids g{GridField::zeros(grid, window), GridField::zeros(grid, window), GridField::zeros(grid, window)};
  for (std::size_t c = 0; c < grid.size(); ++c) {
    if (!g.mean.mask[c]) {
      g.mean.values[c] = g.sd.values[c] = g.exceedance.values[c] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const SparseCoefficients co = coef(grid.centre(c));
    const auto [m, s] = fit.linear_summary(co);
    g.mean.values[c] = m;
    g.sd.values[c] = s;
    g.exceedance.values[c] = fit.exceedance(co, 0.0);
  }
  return g;
}

}  // namespace

FieldGrids field_grids(const FitResult& fit, const AssembledModel& model, int i, const GridSpec& grid,
                       const Window& window) {
  if (!model.field(i))
    throw InputError(i == 0 ? "model has no baseline field" : "model " + std::to_string(model.spec().model) +
                                                                  " has no disease-specific field S" + std::to_string(i));
  return grids_from(fit, grid, window, [&](Point p) { return model.field_coefficients(i, p); });
}

FieldGrids effect_difference(const FitResult& fit, const AssembledModel& model, int u, int v, const GridSpec& grid,
                             const Window& window) {
  if (!model.spec().has_specific_fields())
    throw InputError("effect difference needs disease-specific fields (model 1 or 3)");
  if (u < 1 || v < 1 || u > model.spec().n_diseases || v > model.spec().n_diseases)
    throw InputError("effect difference: disease index out of range");
  return grids_from(fit, grid, window, [&](Point p) {
    SparseCoefficients c = model.field_coefficients(u, p);
    for (const auto& [i, w] : model.field_coefficients(v, p)) c.emplace_back(i, -w);
    return merge(std::move(c));
  });
}

FieldGrids log_intensity_grids(const FitResult& fit, const AssembledModel& model, int b, const GridSpec& grid,
                               const Window& window) {
  if (b < 0 || b > model.spec().n_diseases) throw InputError("log intensity: block index out of range");
  return grids_from(fit, grid, window, [&](Point p) { return merge(model.predictor_coefficients(b, p)); });
}

std::vector<EffectSummary> fixed_effects(const FitResult& fit, const AssembledModel& model) {
  std::vector<EffectSummary> out;
  for (const auto& b : model.blocks()) {
    if (b.dim != 1 || b.term->kind() != "iid") continue;
    EffectSummary e;
    e.name = b.name;
    e.mean = fit.latent_mean[b.offset];
    e.sd = fit.latent_sd[b.offset];
    e.lower = fit.latent_quantile(b.offset, 0.025);
    e.upper = fit.latent_quantile(b.offset, 0.975);
    out.push_back(e);
  }
  return out;
}

std::vector<CurvePoint> exposure_curve(const FitResult& fit, const AssembledModel& model, int disease, int source,
                                       std::span<const double> distances) {
  std::vector<CurvePoint> out;
  for (double d : distances) {
    const auto [m, s] = fit.linear_summary(model.exposure_coefficients(disease, source, d));
    out.push_back({d, m, s});
  }
  return out;
}

}  // namespace mvpp
