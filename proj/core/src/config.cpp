#include "qdistill/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "qdistill/error.hpp"
#include "qdistill/image_io.hpp"

namespace qdistill {

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

using Section = std::map<std::string, Entry>;

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"scene",
       {"width", "height", "pair_rate", "quantum_gray", "correlation_width_um", "pair_profile", "quantum_object",
        "classical_intensity", "classical_gray", "classical_profile", "classical_object"}},
      {"camera",
       {"quantum_efficiency", "gain", "noise_mean", "noise_std", "pixel_pitch_um", "bit_depth", "gain_mode",
        "exposure_ms"}},
      {"run", {"frames", "seed", "window_radius", "threads"}},
      {"distill", {"basis", "calibration_quantile", "signal_z", "edge_threshold", "edge_radius", "basis_radius"}},
      {"snr", {"peak_radius", "exclusion_radius"}},
  };
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void fail(const std::string& section, const std::string& key, const Entry& e, const std::string& what) {
  throw ConfigError("line " + std::to_string(e.line) + ": " + section + "." + key + " " + what);
}

class Reader {
 public:
  Reader(std::map<std::string, Section> sections, std::filesystem::path base)
      : sections_(std::move(sections)), base_(std::move(base)) {}

  const Entry* find(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  bool has(const std::string& section, const std::string& key) const { return find(section, key) != nullptr; }

  double real(const std::string& section, const std::string& key, double fallback, double lo, double hi,
              bool lo_open = false) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    double v = 0.0;
    const auto& s = e->value;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) fail(section, key, *e, "is not a number");
    if (v < lo || v > hi || (lo_open && v == lo)) {
      std::ostringstream range;
      range << "must be in " << (lo_open ? "(" : "[") << lo << ", " << hi << "]";
      fail(section, key, *e, range.str());
    }
    return v;
  }

  std::uint64_t integer(const std::string& section, const std::string& key, std::uint64_t fallback, std::uint64_t lo,
                        std::uint64_t hi) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    std::uint64_t v = 0;
    const auto& s = e->value;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail(section, key, *e, "is not a non-negative integer");
    if (v < lo || v > hi) {
      fail(section, key, *e, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return v;
  }

  std::string text(const std::string& section, const std::string& key, const std::string& fallback) const {
    const Entry* e = find(section, key);
    return e ? e->value : fallback;
  }

  ImageD map(const std::string& section, const std::string& key, const std::string& fallback, Grid grid) const {
    const Entry* e = find(section, key);
    try {
      return parse_transmittance(e ? e->value : fallback, grid, base_);
    } catch (const std::exception& ex) {
      if (!e) throw;
      fail(section, key, *e, std::string(": ") + ex.what());
    }
  }

  void exclusive(const std::string& section, const std::string& a, const std::string& b) const {
    if (has(section, a) && has(section, b)) {
      fail(section, b, *find(section, b), "cannot be combined with " + a);
    }
  }

 private:
  std::map<std::string, Section> sections_;
  std::filesystem::path base_;
};

std::map<std::string, Section> tokenize(const std::string& text) {
  std::map<std::string, Section> sections;
  std::string current;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto cut = raw.find_first_of("#;");
    const std::string line = trim(std::string_view(raw).substr(0, cut));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      current = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!schema().contains(current)) throw ConfigError(where + "unknown section [" + current + "]");
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (current.empty()) throw ConfigError(where + "key '" + key + "' appears before any section");
    if (!schema().at(current).contains(key)) throw ConfigError(where + "unknown key '" + key + "' in [" + current + "]");
    if (value.empty()) throw ConfigError(where + current + "." + key + " has no value");
    auto& sec = sections[current];
    if (sec.contains(key)) throw ConfigError(where + "duplicate key " + current + "." + key);
    sec[key] = Entry{value, line_no};
  }
  return sections;
}

std::vector<double> numbers_in(const std::string& args, const std::string& expr) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= args.size()) {
    const auto comma = args.find(',', start);
    const std::string cell = trim(std::string_view(args).substr(start, comma == std::string::npos ? args.npos : comma - start));
    double v = 0.0;
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc() || p != cell.data() + cell.size()) {
      throw ConfigError("bad number '" + cell + "' in " + expr);
    }
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void paint_shape(const std::string& term, ImageD& t) {
  const auto open = term.find('(');
  if (open == std::string::npos || term.back() != ')') throw ConfigError("unrecognized shape '" + term + "'");
  const std::string name = trim(std::string_view(term).substr(0, open));
  const auto v = numbers_in(term.substr(open + 1, term.size() - open - 2), term);
  const Grid g = t.grid();
  if (name == "rect") {
    if (v.size() != 4) throw ConfigError("rect takes x0,y0,x1,y1");
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x) {
        if (x >= v[0] && x <= v[2] && y >= v[1] && y <= v[3]) t(x, y) = 1.0;
      }
    }
  } else if (name == "disk") {
    if (v.size() != 3 || v[2] < 0.0) throw ConfigError("disk takes cx,cy,r with r >= 0");
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x) {
        if ((x - v[0]) * (x - v[0]) + (y - v[1]) * (y - v[1]) <= v[2] * v[2]) t(x, y) = 1.0;
      }
    }
  } else {
    throw ConfigError("unrecognized shape '" + name + "'");
  }
}

}  // namespace

ImageD parse_transmittance(const std::string& value, Grid grid, const std::filesystem::path& base_dir) {
  const std::string v = trim(value);
  if (v == "transparent" || v == "uniform") return ImageD(grid, 1.0);
  if (v == "opaque") return ImageD(grid, 0.0);
  if (v.size() > 4 && v.substr(v.size() - 4) == ".pgm") {
    std::filesystem::path p(v);
    if (p.is_relative()) p = base_dir / p;
    ImageD img = read_pgm_unit(p.string());
    if (img.grid() != grid) {
      throw ConfigError(p.string() + " is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                        ", scene is " + std::to_string(grid.width) + "x" + std::to_string(grid.height));
    }
    return img;
  }
  ImageD t(grid, 0.0);
  std::size_t start = 0;
  while (true) {
    const auto plus = v.find('+', start);
    paint_shape(trim(std::string_view(v).substr(start, plus == std::string::npos ? v.npos : plus - start)), t);
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  return t;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  const Reader r(tokenize(text), base_dir);
  ExperimentConfig cfg;

  auto& cam = cfg.camera;
  cam.quantum_efficiency = r.real("camera", "quantum_efficiency", cam.quantum_efficiency, 0.0, 1.0);
  cam.gain = r.real("camera", "gain", cam.gain, 0.0, 1e6, true);
  cam.noise_mean = r.real("camera", "noise_mean", cam.noise_mean, 0.0, 65535.0);
  cam.noise_std = r.real("camera", "noise_std", cam.noise_std, 0.0, 65535.0);
  cam.pixel_pitch_um = r.real("camera", "pixel_pitch_um", cam.pixel_pitch_um, 0.0, 1e4, true);
  cam.bit_depth = static_cast<int>(r.integer("camera", "bit_depth", 16, 1, 16));
  cam.exposure_ms = static_cast<float>(r.real("camera", "exposure_ms", cam.exposure_ms, 0.0, 1e7));
  const std::string mode = r.text("camera", "gain_mode", "deterministic");
  if (mode == "deterministic") {
    cam.gain_mode = GainMode::kDeterministic;
  } else if (mode == "stochastic") {
    cam.gain_mode = GainMode::kStochastic;
  } else {
    fail("camera", "gain_mode", *r.find("camera", "gain_mode"), "must be deterministic or stochastic");
  }
  cam.validate();

  auto& sc = cfg.scene;
  sc.grid.width = static_cast<int>(r.integer("scene", "width", 64, 1, 4096));
  sc.grid.height = static_cast<int>(r.integer("scene", "height", 64, 1, 4096));
  sc.quantum_mask = ObjectMask(r.map("scene", "quantum_object", "transparent", sc.grid));
  sc.classical_mask = ObjectMask(r.map("scene", "classical_object", "transparent", sc.grid));

  r.exclusive("scene", "pair_rate", "quantum_gray");
  double pair_rate = r.real("scene", "pair_rate", 0.0, 0.0, 1e9);
  if (r.has("scene", "quantum_gray")) {
    const double gray = r.real("scene", "quantum_gray", 0.0, cam.noise_mean, 65535.0);
    pair_rate = gray > cam.noise_mean ? pair_rate_for_gray(gray, cam, sc.grid) : 0.0;
  }
  if (pair_rate > 0.0) {
    PairSource ps;
    ps.mean_pair_rate = pair_rate;
    ps.correlation_width_um = r.real("scene", "correlation_width_um", 10.0, 0.0, 1e5);
    if (r.has("scene", "pair_profile")) {
      ps.marginal = r.map("scene", "pair_profile", "uniform", sc.grid);
      double sum = 0.0;
      for (double v : ps.marginal.pixels()) sum += v;
      if (!(sum > 0.0)) fail("scene", "pair_profile", *r.find("scene", "pair_profile"), "is all zero");
      for (double& v : ps.marginal.pixels()) v /= sum;
    }
    sc.pairs = ps;
  }

  r.exclusive("scene", "classical_intensity", "classical_gray");
  double lambda = r.real("scene", "classical_intensity", 0.0, 0.0, 1e6);
  if (r.has("scene", "classical_gray")) {
    lambda = r.real("scene", "classical_gray", 0.0, 0.0, 65535.0) / (cam.gain * cam.quantum_efficiency);
    if (!std::isfinite(lambda)) throw ConfigError("classical_gray needs quantum_efficiency > 0");
  }
  if (lambda > 0.0) {
    ImageD profile = r.map("scene", "classical_profile", "uniform", sc.grid);
    for (double& v : profile.pixels()) v *= lambda;
    sc.classical = ClassicalSource{std::move(profile)};
  }
  sc.validate();

  auto& run = cfg.run;
  run.frames = r.integer("run", "frames", run.frames, 2, std::uint64_t{1} << 40);
  run.seed = r.integer("run", "seed", run.seed, 0, UINT64_MAX);
  run.window_radius = static_cast<int>(r.integer("run", "window_radius", 5, 0, 64));
  run.threads = static_cast<unsigned>(r.integer("run", "threads", 1, 1, 1024));

  auto& d = cfg.distill;
  const std::string basis = r.text("distill", "basis", "pair_marginal");
  if (basis == "pair_marginal") {
    d.basis = SubtractionBasis::kPairMarginal;
  } else if (basis == "sqrt_diagonal") {
    d.basis = SubtractionBasis::kSqrtDiagonal;
  } else {
    fail("distill", "basis", *r.find("distill", "basis"), "must be pair_marginal or sqrt_diagonal");
  }
  d.calibration_quantile = r.real("distill", "calibration_quantile", d.calibration_quantile, 0.0, 1.0);
  d.signal_z = r.real("distill", "signal_z", d.signal_z, 0.0, 1e6);
  d.edge_threshold = r.real("distill", "edge_threshold", d.edge_threshold, 0.0, 1.0, true);
  d.edge_radius = static_cast<int>(r.integer("distill", "edge_radius", 2, 0, 64));
  d.basis_radius = static_cast<int>(r.integer("distill", "basis_radius", 0, 0, 64));

  auto& s = cfg.sweep;
  s.window_radius = run.window_radius;
  s.threads = run.threads;
  s.peak_radius = static_cast<int>(r.integer("snr", "peak_radius", 1, 0, 64));
  s.exclusion_radius = static_cast<int>(r.integer("snr", "exclusion_radius", 3, 1, 64));
  if (s.exclusion_radius <= s.peak_radius) throw ConfigError("snr.exclusion_radius must exceed snr.peak_radius");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::filesystem::path(path).parent_path());
}

}  // namespace qdistill
