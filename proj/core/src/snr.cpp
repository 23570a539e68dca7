#include "qdistill/snr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "qdistill/error.hpp"

namespace qdistill {

SnrMeasurement measure_snr(const MinusCoordinateMap& map, int peak_radius, int exclusion_radius) {
  if (peak_radius < 0 || exclusion_radius <= peak_radius) {
    throw ConfigError("SNR needs 0 <= peak radius < exclusion radius");
  }
  SnrMeasurement m;
  m.peak = -std::numeric_limits<double>::infinity();
  std::vector<double> noise;
  for (int dy = -map.radius; dy <= map.radius; ++dy) {
    for (int dx = -map.radius; dx <= map.radius; ++dx) {
      const int cheb = std::max(std::abs(dx), std::abs(dy));
      const double v = map.at({dx, dy});
      if (cheb <= peak_radius) m.peak = std::max(m.peak, v);
      if (cheb > exclusion_radius) noise.push_back(v);
    }
  }
  if (noise.size() < 20) {
    throw ConfigError("minus-coordinate map leaves " + std::to_string(noise.size()) +
                      " noise samples; at least 20 are needed");
  }
  m.noise_samples = noise.size();
  double mean = 0.0;
  for (double v : noise) mean += v;
  mean /= static_cast<double>(noise.size());
  double ss = 0.0;
  for (double v : noise) ss += (v - mean) * (v - mean);
  m.noise_std = std::sqrt(ss / static_cast<double>(noise.size() - 1));
  if (m.noise_std == 0.0) {
    m.infinite = true;
    m.snr = m.peak > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return m;
  }
  m.snr = m.peak / m.noise_std;
  m.snr_error = std::abs(m.snr) / std::sqrt(2.0 * static_cast<double>(noise.size() - 1));
  return m;
}

double snr_model(double n_frames, double eta, double sigma0, double mu0, double i_qu, double i_cl, double alpha,
                 double beta) {
  if (!(i_qu > mu0)) throw ConfigError("SNR model needs I_qu > mu0");
  if (!(beta > 0.0)) throw ConfigError("SNR model needs beta > 0");
  if (!(n_frames >= 1.0)) throw ConfigError("SNR model needs N >= 1");
  return alpha * (std::sqrt(n_frames) * eta / 2.0) / (1.0 + (sigma0 * sigma0 + i_cl) / (beta * (i_qu - mu0)));
}

namespace {

struct FitTerms {
  double alpha = 0.0;
  double ssr = 0.0;
};

// Model with alpha = 1 at a given beta.
double unit_model(const SnrPoint& p, double eta, double sigma0, double mu0, double beta) {
  return snr_model(static_cast<double>(p.n_frames), eta, sigma0, mu0, p.i_qu, p.i_cl, 1.0, beta);
}

FitTerms profile(const std::vector<SnrPoint>& pts, double eta, double sigma0, double mu0, double beta) {
  double yg = 0.0;
  double gg = 0.0;
  for (const auto& p : pts) {
    const double g = unit_model(p, eta, sigma0, mu0, beta);
    yg += p.measured_snr * g;
    gg += g * g;
  }
  FitTerms t;
  t.alpha = gg > 0.0 ? yg / gg : 0.0;
  for (const auto& p : pts) {
    const double r = p.measured_snr - t.alpha * unit_model(p, eta, sigma0, mu0, beta);
    t.ssr += r * r;
  }
  return t;
}

}  // namespace

SnrModelFit fit_model(const std::vector<SnrPoint>& points, double eta, double sigma0, double mu0) {
  if (points.size() < 3) throw ConfigError("SNR fit needs at least 3 points");
  std::set<double> ratios;
  for (const auto& p : points) {
    ratios.insert(p.ratio);
    if (!(p.i_qu > mu0)) throw ConfigError("SNR fit point has I_qu <= mu0");
    if (p.n_frames < 2) throw ConfigError("SNR fit point has fewer than 2 frames");
    if (!std::isfinite(p.measured_snr)) throw ConfigError("SNR fit point is not finite");
  }
  if (ratios.size() < 2) throw ConfigError("SNR fit needs at least 2 distinct intensity ratios");

  SnrModelFit fit;
  fit.eta = eta;
  fit.sigma0 = sigma0;
  fit.mu0 = mu0;
  fit.n_points = points.size();

  // Coarse scan over log(beta), then golden-section refinement.
  constexpr double kLo = -14.0;
  constexpr double kHi = 14.0;
  constexpr int kSteps = 280;
  auto ssr_at = [&](double log_beta) { return profile(points, eta, sigma0, mu0, std::exp(log_beta)).ssr; };
  int best = 0;
  double best_ssr = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kSteps; ++i) {
    const double s = ssr_at(kLo + (kHi - kLo) * i / kSteps);
    if (s < best_ssr) {
      best_ssr = s;
      best = i;
    }
  }
  const double step = (kHi - kLo) / kSteps;
  double a = kLo + step * std::max(0, best - 1);
  double b = kLo + step * std::min(kSteps, best + 1);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = ssr_at(c);
  double fd = ssr_at(d);
  int iterations = 0;
  while (b - a > 1e-12 && iterations < 200) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = ssr_at(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = ssr_at(d);
    }
    ++iterations;
  }
  const double log_beta = 0.5 * (a + b);
  fit.beta = std::exp(log_beta);
  const FitTerms terms = profile(points, eta, sigma0, mu0, fit.beta);
  fit.alpha = terms.alpha;

  double mean_y = 0.0;
  for (const auto& p : points) mean_y += p.measured_snr;
  mean_y /= static_cast<double>(points.size());
  double sst = 0.0;
  for (const auto& p : points) sst += (p.measured_snr - mean_y) * (p.measured_snr - mean_y);
  fit.r_squared = sst > 0.0 ? 1.0 - terms.ssr / sst : (terms.ssr == 0.0 ? 1.0 : 0.0);

  // Standard errors from s^2 (J^T J)^-1.
  double jaa = 0.0, jab = 0.0, jbb = 0.0;
  for (const auto& p : points) {
    const double ga = unit_model(p, eta, sigma0, mu0, fit.beta);
    const double k = (sigma0 * sigma0 + p.i_cl) / (p.i_qu - mu0);
    const double gb = fit.alpha * ga * k / (fit.beta * (fit.beta + k));
    jaa += ga * ga;
    jab += ga * gb;
    jbb += gb * gb;
  }
  const double det = jaa * jbb - jab * jab;
  const double dof = static_cast<double>(points.size()) - 2.0;
  if (det > 0.0 && dof > 0.0) {
    const double s2 = terms.ssr / dof;
    fit.alpha_se = std::sqrt(s2 * jbb / det);
    fit.beta_se = std::sqrt(s2 * jaa / det);
  }

  std::ostringstream why;
  const bool at_edge = best == 0 || best == kSteps;
  if (at_edge) why << "beta search hit the bracket edge (log beta = " << log_beta << "); ";
  if (!(fit.alpha > 0.0)) why << "alpha is not positive; ";
  if (!(det > 0.0)) why << "singular normal matrix; ";
  fit.diagnostics = why.str();
  fit.converged = fit.diagnostics.empty();
  return fit;
}

double required_frames(const SnrModelFit& fit, double i_qu, double i_cl, double target_snr) {
  const double at_one = fit.predict(1.0, i_qu, i_cl);
  if (!(at_one > 0.0)) throw ConfigError("fitted model predicts no signal");
  const double ratio = target_snr / at_one;
  return ratio * ratio;
}

std::uint64_t sweep_point_seed(std::uint64_t seed, std::size_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

void require_homogeneous(const SceneConfig& scene) {
  if (!scene.pairs) throw ConfigError("SNR sweep needs a pair source");
  if (scene.pairs->marginal.size() != 0) throw ConfigError("SNR sweep needs a uniform pair marginal");
  for (double t : scene.quantum_mask.transmittance().pixels()) {
    if (t != 1.0) throw ConfigError("SNR sweep needs a maskless (transparent) scene");
  }
  for (double t : scene.classical_mask.transmittance().pixels()) {
    if (t != 1.0) throw ConfigError("SNR sweep needs a maskless (transparent) scene");
  }
}

}  // namespace

SnrPoint measure_sweep_point(const SceneConfig& homogeneous_scene, const CameraModel& camera, double ratio,
                             std::uint64_t n_frames, std::uint64_t seed, const SweepOptions& options,
                             MinusCoordinateMap* map_out) {
  require_homogeneous(homogeneous_scene);
  if (!(ratio >= 0.0)) throw ConfigError("intensity ratio must be >= 0");
  if (n_frames < 2) throw ConfigError("a stack needs at least 2 frames");
  SceneConfig scene = homogeneous_scene;
  const double pixels = static_cast<double>(scene.grid.size());
  SnrPoint point;
  point.ratio = ratio;
  point.n_frames = n_frames;
  point.i_qu = camera.noise_mean + 2.0 * camera.gain * camera.quantum_efficiency * scene.pairs->mean_pair_rate / pixels;
  point.i_cl = ratio * point.i_qu;
  if (point.i_cl > 0.0) {
    scene.classical = ClassicalSource{ImageD(scene.grid, point.i_cl / (camera.gain * camera.quantum_efficiency))};
  } else {
    scene.classical.reset();
  }
  Correlator correlator(scene.grid, options.window_radius, options.threads);
  SimulationOptions sim;
  sim.threads = options.threads;
  simulate_stack(scene, camera, n_frames, seed, correlator, sim);
  const MinusCoordinateMap map = minus_projection(finalize_gamma(correlator.finish()));
  const SnrMeasurement m = measure_snr(map, options.peak_radius, options.exclusion_radius);
  point.measured_snr = m.snr;
  point.snr_error = m.snr_error;
  if (map_out) *map_out = map;
  return point;
}

SweepResult snr_sweep(const SceneConfig& homogeneous_scene, const CameraModel& camera, const std::vector<double>& ratios,
                      std::uint64_t n_frames, std::uint64_t seed, const SweepOptions& options) {
  if (ratios.empty()) throw ConfigError("SNR sweep needs at least one ratio");
  SweepResult result;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    MinusCoordinateMap map;
    result.points.push_back(measure_sweep_point(homogeneous_scene, camera, ratios[i], n_frames,
                                                sweep_point_seed(seed, i), options, &map));
    result.maps.push_back(std::move(map));
  }
  std::set<double> distinct(ratios.begin(), ratios.end());
  if (result.points.size() < 3 || distinct.size() < 2) {
    result.fit_note = "fit skipped: needs >= 3 points over >= 2 distinct ratios";
  } else {
    result.fit = fit_model(result.points, camera.quantum_efficiency, camera.noise_std, camera.noise_mean);
  }
  return result;
}

}  // namespace qdistill
