#include "commands.hpp"

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "qdistill/config.hpp"
#include "qdistill/container.hpp"
#include "qdistill/correlator.hpp"
#include "qdistill/distill.hpp"
#include "qdistill/error.hpp"
#include "qdistill/image_io.hpp"
#include "qdistill/qdif.hpp"
#include "qdistill/snr.hpp"

namespace fs = std::filesystem;

namespace qdistill::cli {

namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir);
}

void export_image(const fs::path& dir, const std::string& name, const ImageD& img) {
  write_pgm_scaled((dir / (name + ".pgm")).string(), img);
  write_csv((dir / (name + ".csv")).string(), img);
}

ImageD flags_as_image(const Image<std::uint8_t>& flags) {
  ImageD out(flags.grid(), 0.0);
  for (std::size_t i = 0; i < flags.size(); ++i) out[i] = flags[i] ? 1.0 : 0.0;
  return out;
}

struct StackMean {
  StackInfo info;
  ImageD mean;
  std::uint64_t hash = 0;
};

StackMean stream_mean(const std::string& path) {
  QdifReader reader(path);
  StackMean m;
  m.info = reader.info();
  if (m.info.n_frames == 0) throw DataError(path + ": stack has no frames");
  std::vector<std::uint16_t> frame(m.info.grid.size());
  std::vector<std::uint64_t> sums(frame.size(), 0);
  while (reader.next(frame)) {
    for (std::size_t i = 0; i < frame.size(); ++i) sums[i] += frame[i];
  }
  m.mean = ImageD(m.info.grid, 0.0);
  const long double n = static_cast<long double>(m.info.n_frames);
  for (std::size_t i = 0; i < sums.size(); ++i) m.mean[i] = static_cast<double>(static_cast<long double>(sums[i]) / n);
  m.hash = reader.payload_hash();
  return m;
}

ExperimentConfig optional_config(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : load_config(path);
}

struct Truth {
  std::optional<ImageD> quantum;
  std::optional<ImageD> classical;
};

Truth load_truth(const std::string& dir, Grid grid) {
  Truth t;
  if (dir.empty()) return t;
  const fs::path q = fs::path(dir) / "quantum_truth.csv";
  const fs::path c = fs::path(dir) / "classical_truth.csv";
  if (fs::exists(q)) t.quantum = read_csv(q.string());
  if (fs::exists(c)) t.classical = read_csv(c.string());
  if (!t.quantum && !t.classical) {
    throw DataError("ground-truth directory " + dir + " holds neither quantum_truth.csv nor classical_truth.csv");
  }
  if ((t.quantum && t.quantum->grid() != grid) || (t.classical && t.classical->grid() != grid)) {
    throw DataError("ground-truth grid does not match the correlation grid");
  }
  return t;
}

std::string basis_name(SubtractionBasis b) {
  return b == SubtractionBasis::kPairMarginal ? "pair_marginal" : "sqrt_diagonal";
}

// Distills, writes the image set and returns the report text. Shared by
// `distill` and `report` so both render the same bytes.
std::string distill_and_export(const CorrelationResult& corr, const StackMean& stack, const ExperimentConfig& cfg,
                               const Truth& truth, const std::string& out_dir) {
  if (corr.grid != stack.info.grid) throw DataError("correlation and stack grids differ");
  if (corr.n_frames != stack.info.n_frames || corr.source_hash != stack.hash) {
    throw DataError("correlation container was not computed from this stack (frame count or hash differs)");
  }
  const ImageD direct = direct_intensity(stack.mean, cfg.camera.noise_mean);
  const ImageD* ct = truth.classical ? &*truth.classical : nullptr;
  const DistillationResult d = distill(corr, direct, cfg.distill, ct);

  std::ostringstream rep;
  rep << std::setprecision(10);
  rep << "grid " << corr.grid.width << "x" << corr.grid.height << "\n";
  rep << "frames " << corr.n_frames << "\n";
  rep << "window_radius " << corr.window_radius << "\n";
  rep << "source_hash " << hex(corr.source_hash) << "\n";
  rep << "noise_mean " << cfg.camera.noise_mean << "\n";
  rep << "quantum_signal " << (d.quantum.has_signal ? "yes" : "no") << "\n";
  rep << "quantum_mean_z " << d.quantum.mean_z << "\n";
  rep << "subtraction_basis " << basis_name(cfg.distill.basis) << "\n";
  rep << "basis_radius " << d.basis_radius << "\n";
  rep << "scale_c " << d.classical.scale << "\n";
  rep << "calibrated " << (d.classical.calibrated ? "yes" : "no") << "\n";
  rep << "calibration_pixels " << d.classical.calibration_pixels << "\n";
  std::size_t flagged = 0;
  for (auto f : d.edge_flags.pixels()) flagged += f ? 1 : 0;
  rep << "edge_flagged_pixels " << flagged << "\n";
  if (!d.quantum.has_signal) rep << "note no quantum signal; classical image equals the direct image\n";
  if (truth.quantum) rep << "pearson_quantum " << pearson(d.quantum.q, *truth.quantum) << "\n";
  if (truth.classical) {
    Image<std::uint8_t> keep(corr.grid, 1);
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = d.edge_flags[i] ? 0 : 1;
    rep << "pearson_classical " << pearson(d.classical.c, *truth.classical) << "\n";
    rep << "pearson_classical_unflagged " << pearson(d.classical.c, *truth.classical, &keep) << "\n";
  }

  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    const fs::path dir(out_dir);
    export_image(dir, "direct", d.direct);
    export_image(dir, "quantum", d.quantum.q);
    export_image(dir, "object", d.quantum.object_estimate);
    export_image(dir, "classical", d.classical.c);
    export_image(dir, "edge_flags", flags_as_image(d.edge_flags));
    if (d.residual) export_image(dir, "residual", *d.residual);
    std::ofstream f(dir / "report.txt", std::ios::trunc);
    f << rep.str();
    if (!f) throw DataError("write failed on " + (dir / "report.txt").string());
  }
  return rep.str();
}

std::string correlation_summary(const CorrelationResult& corr, const SweepOptions& snr) {
  std::ostringstream s;
  s << std::setprecision(10);
  s << "correlation " << corr.grid.width << "x" << corr.grid.height << " frames " << corr.n_frames << " window "
    << corr.window_radius << " source_hash " << hex(corr.source_hash) << "\n";
  const MinusCoordinateMap p = minus_projection(corr);
  s << "minus_projection_center " << p.at({0, 0}) << "\n";
  try {
    const SnrMeasurement m = measure_snr(p, snr.peak_radius, snr.exclusion_radius);
    s << "snr " << m.snr << " (peak " << m.peak << ", noise_std " << m.noise_std << ")\n";
  } catch (const ConfigError& e) {
    s << "snr unavailable: " << e.what() << "\n";
  }
  return s.str();
}

}  // namespace

void simulate(const SimulateArgs& args, std::ostream& log) {
  ExperimentConfig cfg = load_config(args.config);
  if (args.seed) cfg.run.seed = *args.seed;
  if (args.threads) cfg.run.threads = *args.threads;
  if (cfg.run.threads == 0) throw ConfigError("--threads must be >= 1");

  QdifWriter writer(args.out, cfg.scene.grid, cfg.camera.exposure_ms);
  SimulationOptions opts;
  opts.threads = cfg.run.threads;
  const SimulationSummary s = simulate_stack(cfg.scene, cfg.camera, cfg.run.frames, cfg.run.seed, writer, opts);
  writer.close();

  log << std::setprecision(10);
  log << "frames " << s.frames << "\n";
  log << "grid " << cfg.scene.grid.width << "x" << cfg.scene.grid.height << "\n";
  log << "mean_gray " << s.mean_gray << "\n";
  log << "clamped_pixels " << s.clamped_pixels << "\n";
  log << "pairs_emitted " << s.photons.pairs_emitted << "\n";
  log << "photons_pair_both " << s.photons.pair_both << "\n";
  log << "photons_single_survivor " << s.photons.single_survivor << "\n";
  log << "photons_classical " << s.photons.classical << "\n";
  log << "payload_hash " << hex(writer.payload_hash()) << "\n";

  if (!args.ground_truth.empty()) {
    ensure_dir(args.ground_truth);
    const fs::path dir(args.ground_truth);
    export_image(dir, "quantum_truth", quantum_ground_truth(cfg.scene));
    export_image(dir, "classical_truth", classical_ground_truth(cfg.scene, cfg.camera));
  }
}

void correlate(const CorrelateArgs& args, std::ostream& log) {
  QdifReader reader(args.stack);
  const Grid grid = reader.info().grid;
  const int w = args.window ? *args.window : 5;
  if (w < 0) throw ConfigError("--window must be >= 0");
  if (args.threads == 0) throw ConfigError("--threads must be >= 1");
  if (reader.info().n_frames < 2) throw DataError(args.stack + ": correlation needs at least 2 frames");
  Correlator correlator(grid, w, args.threads);
  const std::uint64_t hash = pump_qdif(reader, correlator);
  CorrelationResult corr = finalize_gamma(correlator.finish());
  corr.source_hash = hash;
  write_correlation(args.out, corr);
  log << correlation_summary(corr, SweepOptions{});
}

void distill(const DistillArgs& args, std::ostream& log) {
  const ExperimentConfig cfg = optional_config(args.config);
  const CorrelationResult corr = read_correlation(args.correlation);
  const StackMean stack = stream_mean(args.stack);
  const Truth truth = load_truth(args.ground_truth, corr.grid);
  log << distill_and_export(corr, stack, cfg, truth, args.out);
}

void snr_sweep(const SweepArgs& args, std::ostream& log) {
  if (args.ratios.empty()) throw ConfigError("--ratios needs at least one value");
  ExperimentConfig cfg = load_config(args.config);
  if (args.seed) cfg.run.seed = *args.seed;
  if (args.threads) cfg.sweep.threads = *args.threads;
  for (double r : args.ratios) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("ratios must be finite and >= 0");
  }
  const SweepResult res = snr_sweep(cfg.scene, cfg.camera, args.ratios, cfg.run.frames, cfg.run.seed, cfg.sweep);

  std::ofstream csv(args.out, std::ios::trunc);
  if (!csv) throw DataError("cannot open " + args.out + " for writing");
  csv << std::setprecision(17);
  csv << "ratio,i_qu,i_cl,n_frames,snr,snr_error\n";
  for (const auto& p : res.points) {
    csv << p.ratio << ',' << p.i_qu << ',' << p.i_cl << ',' << p.n_frames << ',' << p.measured_snr << ','
        << p.snr_error << '\n';
  }
  if (!csv) throw DataError("write failed on " + args.out);

  std::ostringstream rep;
  rep << std::setprecision(10);
  for (const auto& p : res.points) {
    rep << "ratio " << p.ratio << " snr " << p.measured_snr << " +- " << p.snr_error << "\n";
  }
  if (res.fit) {
    const auto& f = *res.fit;
    rep << "alpha " << f.alpha << " +- " << f.alpha_se << "\n";
    rep << "beta " << f.beta << " +- " << f.beta_se << "\n";
    rep << "r_squared " << f.r_squared << "\n";
    rep << "converged " << (f.converged ? "yes" : "no") << "\n";
    if (!f.diagnostics.empty()) rep << "diagnostics " << f.diagnostics << "\n";
  } else {
    rep << res.fit_note << "\n";
  }
  fs::path fit_path(args.out);
  fit_path.replace_extension(".fit.txt");
  std::ofstream fit(fit_path, std::ios::trunc);
  fit << rep.str();
  if (!fit) throw DataError("write failed on " + fit_path.string());
  log << rep.str();
}

void report(const ReportArgs& args, std::ostream& log) {
  if (args.inputs.empty()) throw ConfigError("report needs at least one artifact path");
  std::vector<std::string> missing;
  for (const auto& p : args.inputs) {
    if (!fs::is_regular_file(p)) missing.push_back(p);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += "\n  " + m;
    throw DataError("missing inputs:" + list);
  }

  const ExperimentConfig cfg = optional_config(args.config);
  std::optional<CorrelationResult> corr;
  std::optional<StackMean> stack;
  std::ostringstream rep;
  rep << std::setprecision(10);
  for (const auto& path : args.inputs) {
    std::array<char, 4> magic{};
    std::ifstream in(path, std::ios::binary);
    in.read(magic.data(), 4);
    const std::string m(magic.data(), static_cast<std::size_t>(in.gcount()));
    if (m == "QDIF") {
      if (stack) throw ConfigError("report takes at most one frame stack");
      stack = stream_mean(path);
      rep << "stack " << path << " " << stack->info.grid.width << "x" << stack->info.grid.height << " frames "
          << stack->info.n_frames << " exposure_ms " << stack->info.exposure_ms << " payload_hash " << hex(stack->hash)
          << "\n";
      double mean = 0.0;
      for (double v : stack->mean.pixels()) mean += v;
      rep << "mean_gray " << mean / static_cast<double>(stack->mean.size()) << "\n";
    } else if (m == "QDCR") {
      if (corr) throw ConfigError("report takes at most one correlation container");
      corr = read_correlation(path);
      rep << correlation_summary(*corr, cfg.sweep);
    } else {
      throw DataError(path + ": not a QDIF stack or QDCR correlation container");
    }
  }

  const bool export_files = !args.out.empty();
  if (export_files) ensure_dir(args.out);
  const fs::path dir(args.out);
  if (corr && stack) {
    rep << distill_and_export(*corr, *stack, cfg, Truth{}, args.out);
  } else if (corr && export_files) {
    export_image(dir, "diagonal", corr->diagonal);
    const MinusCoordinateMap p = minus_projection(*corr);
    write_csv((dir / "minus_projection.csv").string(), ImageD(Grid{p.side(), p.side()}, p.values));
  } else if (stack && export_files) {
    export_image(dir, "mean", stack->mean);
  }
  if (export_files) {
    std::ofstream f(dir / "summary.txt", std::ios::trunc);
    f << rep.str();
    if (!f) throw DataError("write failed on " + (dir / "summary.txt").string());
  }
  log << rep.str();
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulate, correlate and distill photon-pair camera frame stacks"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Simulate a frame stack from a config");
  c_sim->add_option("--config", sim.config, "Experiment config")->required();
  c_sim->add_option("--out", sim.out, "Output QDIF stack")->required();
  c_sim->add_option("--ground-truth", sim.ground_truth, "Directory for ground-truth maps");
  c_sim->add_option("--seed", sim.seed, "Override run.seed");
  c_sim->add_option("--threads", sim.threads, "Override run.threads");

  CorrelateArgs cor;
  auto* c_cor = app.add_subcommand("correlate", "Accumulate intensity correlations over a stack");
  c_cor->add_option("stack", cor.stack, "Input QDIF stack")->required();
  c_cor->add_option("--out", cor.out, "Output correlation container")->required();
  c_cor->add_option("--window", cor.window, "Window radius w (offsets |d| <= w)");
  c_cor->add_option("--threads", cor.threads, "Worker threads");

  DistillArgs dis;
  auto* c_dis = app.add_subcommand("distill", "Separate quantum and classical images");
  c_dis->add_option("correlation", dis.correlation, "Correlation container")->required();
  c_dis->add_option("stack", dis.stack, "QDIF stack the container was computed from")->required();
  c_dis->add_option("--out", dis.out, "Output directory")->required();
  c_dis->add_option("--config", dis.config, "Config supplying camera noise mean and distill options");
  c_dis->add_option("--ground-truth", dis.ground_truth, "Directory written by simulate --ground-truth");

  SweepArgs swp;
  auto* c_swp = app.add_subcommand("snr-sweep", "Measure SNR against classical/quantum intensity ratio");
  c_swp->add_option("--config", swp.config, "Experiment config (homogeneous scene)")->required();
  c_swp->add_option("--ratios", swp.ratios, "Comma-separated I_cl/I_qu ratios")->required()->delimiter(',');
  c_swp->add_option("--out", swp.out, "Output CSV")->required();
  c_swp->add_option("--seed", swp.seed, "Override run.seed");
  c_swp->add_option("--threads", swp.threads, "Override run.threads");

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "Summarize artifacts and export images");
  c_rep->add_option("inputs", rep.inputs, "QDIF stacks and/or correlation containers");
  c_rep->add_option("--out", rep.out, "Export directory");
  c_rep->add_option("--config", rep.config, "Config supplying camera noise mean and distill options");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*c_sim) simulate(sim, out);
    if (*c_cor) correlate(cor, out);
    if (*c_dis) distill(dis, out);
    if (*c_swp) snr_sweep(swp, out);
    if (*c_rep) report(rep, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace qdistill::cli
