#include "wildflow/synthgen.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "wildflow/errors.hpp"
#include "wildflow/rng.hpp"
#include "wildflow/tape.hpp"

namespace wildflow {

std::string to_string(PatrolMode mode) { return mode == PatrolMode::uniform ? "uniform" : "reactive"; }

PatrolMode patrol_mode_from_string(const std::string& name) {
  if (name == "uniform") return PatrolMode::uniform;
  if (name == "reactive") return PatrolMode::reactive;
  throw InvalidArgument("unknown patrol mode '" + name + "'");
}

void GeneratorConfig::validate() const {
  if (rows < 1 || cols < 1) throw InvalidArgument("generator grid must be at least 1x1");
  if (months < 2) throw InvalidArgument("generator needs at least 2 months");
  if (static_dim < 1 || dynamic_dim < 0) throw InvalidArgument("generator needs static_dim >= 1 and dynamic_dim >= 0");
  if (static_cast<int>(weights.size()) != feature_dim()) {
    throw InvalidArgument("weights has " + std::to_string(weights.size()) + " entries, expected " +
                          std::to_string(feature_dim()));
  }
  if (!(length_scale > 0.0)) throw InvalidArgument("length_scale must be positive");
  if (!(field_sd >= 0.0)) throw InvalidArgument("field_sd must be >= 0");
  if (!(patrol_intensity >= 0.0)) throw InvalidArgument("patrol_intensity must be >= 0");
  if (!(effort_mean_km > 0.0)) throw InvalidArgument("effort_mean_km must be positive");
  if (!(reactive_share >= 0.0 && reactive_share <= 1.0)) throw InvalidArgument("reactive_share must be in [0,1]");
  if (!(std::abs(ar_coefficient) < 1.0)) throw InvalidArgument("ar_coefficient must be in (-1,1)");
  for (double v : {beta_det, beta_disp, alpha0, alpha1, alpha2})
    if (!std::isfinite(v)) throw InvalidArgument("generator coefficients must be finite");
}

GeneratorConfig default_config() {
  GeneratorConfig c;
  c.weights = {0.3, 0.5, -0.4, -0.5, 0.3, 0.3, -0.2, 0.2};
  return c;
}

namespace {

/// Square-root factor A with A A^T = K for the 1-D squared-exponential kernel.
Eigen::MatrixXd kernel_factor(int n, double length_scale) {
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double d = static_cast<double>(i - j) / length_scale;
      k(i, j) = std::exp(-0.5 * d * d);
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

/// Zero-mean unit-variance field on the grid with separable SE covariance.
std::vector<double> gaussian_field(int rows, int cols, double length_scale, Rng& rng) {
  Eigen::MatrixXd z(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) z(r, c) = rng.normal();
  const Eigen::MatrixXd field = kernel_factor(rows, length_scale) * z * kernel_factor(cols, length_scale).transpose();
  std::vector<double> out(static_cast<std::size_t>(rows * cols));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out[r * cols + c] = field(r, c);
  return out;
}

const char* const kStaticNames[] = {"visibility", "elevation", "water_distance", "post_distance", "village_distance"};
const char* const kDynamicNames[] = {"precipitation", "temperature", "npp"};

std::vector<std::string> feature_names(const char* const* known, int known_count, const char* prefix, int count) {
  std::vector<std::string> names;
  for (int j = 0; j < count; ++j)
    names.push_back(j < known_count ? known[j] : std::string(prefix) + std::to_string(j + 1));
  return names;
}

}  // namespace

SyntheticPark generate_synthetic_park(const GeneratorConfig& cfg) {
  cfg.validate();
  const int n = cfg.rows * cfg.cols;
  const int k = cfg.static_dim;
  const int m = cfg.dynamic_dim;
  GridGraph graph = build_grid_graph(cfg.rows, cfg.cols);

  // One stream per process component.
  Rng static_rng(derive_seed(cfg.seed, 1));
  Rng field_rng(derive_seed(cfg.seed, 2));
  Rng dynamic_rng(derive_seed(cfg.seed, 3));
  Rng occupancy_rng(derive_seed(cfg.seed, 4));
  Rng patrol_rng(derive_seed(cfg.seed, 5));
  Rng detection_rng(derive_seed(cfg.seed, 6));

  Tensor static_features({static_cast<std::size_t>(n), static_cast<std::size_t>(k)});
  for (int j = 0; j < k; ++j) {
    const auto f = gaussian_field(cfg.rows, cfg.cols, cfg.length_scale, static_rng);
    for (int i = 0; i < n; ++i) static_features(i, j) = f[i];
  }
  std::vector<double> g = gaussian_field(cfg.rows, cfg.cols, cfg.length_scale, field_rng);
  for (double& v : g) v *= cfg.field_sd;

  const double innovation_sd = std::sqrt(1.0 - cfg.ar_coefficient * cfg.ar_coefficient);
  std::vector<Tensor> dynamic_features;
  std::vector<VisitRecord> visits;
  std::vector<std::uint8_t> truth(static_cast<std::size_t>(cfg.months) * n);
  std::vector<double> true_logits(static_cast<std::size_t>(cfg.months) * n);
  std::vector<double> last_effort(static_cast<std::size_t>(n), 0.0);
  std::vector<int> last_detections(static_cast<std::size_t>(n), 0);
  std::vector<YearMonth> months;
  YearMonth ym{cfg.start_year, 1};

  for (int t = 0; t < cfg.months; ++t, ym = ym.next()) {
    months.push_back(ym);
    Tensor dyn({static_cast<std::size_t>(n), static_cast<std::size_t>(m)});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        dyn(i, j) = t == 0 ? dynamic_rng.normal()
                           : cfg.ar_coefficient * dynamic_features.back()(i, j) + innovation_sd * dynamic_rng.normal();
      }

    // Patrol intensity for this month.
    std::vector<double> lambda(static_cast<std::size_t>(n), cfg.patrol_intensity);
    if (cfg.patrol_mode == PatrolMode::reactive) {
      long total = 0;
      for (int c : last_detections) total += c;
      if (total > 0) {
        for (int i = 0; i < n; ++i) {
          const double share = static_cast<double>(last_detections[i]) * n / static_cast<double>(total);
          lambda[i] = cfg.patrol_intensity * ((1.0 - cfg.reactive_share) + cfg.reactive_share * share);
        }
      }
    }

    std::vector<double> effort(static_cast<std::size_t>(n), 0.0);
    std::vector<int> detections(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
      double logit = g[i] + cfg.beta_det * last_effort[i];
      double adj = 0.0;
      const auto nbrs = graph.neighbors(i);
      for (int j : nbrs) adj += last_effort[j];
      if (!nbrs.empty()) logit += cfg.beta_disp * adj / static_cast<double>(nbrs.size());
      for (int j = 0; j < k; ++j) logit += cfg.weights[j] * static_features(i, j);
      for (int j = 0; j < m; ++j) logit += cfg.weights[k + j] * dyn(i, j);
      const std::size_t idx = static_cast<std::size_t>(t) * n + i;
      true_logits[idx] = logit;
      const bool z = occupancy_rng.uniform() < sigmoid(logit);
      truth[idx] = z ? 1 : 0;

      const int visit_count = patrol_rng.poisson(lambda[i]);
      for (int v = 0; v < visit_count; ++v) {
        const double a = patrol_rng.exponential(cfg.effort_mean_km);
        const double p = sigmoid(cfg.alpha0 + cfg.alpha1 * a + cfg.alpha2 * static_features(i, 0));
        const bool y = detection_rng.uniform() < (z ? p : 0.0);
        visits.push_back(VisitRecord{i, t, v + 1, a, y});
        effort[i] += a;
        detections[i] += y ? 1 : 0;
      }
    }
    last_effort = std::move(effort);
    last_detections = std::move(detections);
    dynamic_features.push_back(std::move(dyn));
  }

  ParkDataset::Columns columns{feature_names(kStaticNames, 5, "static_", k),
                               feature_names(kDynamicNames, 3, "dynamic_", m)};
  return SyntheticPark{ParkDataset(std::move(graph), std::move(months), std::move(columns), std::move(static_features),
                                   std::move(dynamic_features), std::move(visits), std::move(truth)),
                       std::move(true_logits), std::move(g)};
}

ParkDataset generate_park(const GeneratorConfig& config) { return generate_synthetic_park(config).dataset; }

}  // namespace wildflow
