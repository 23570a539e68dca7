#pragma once

// Subcommands of the qdistill tool. Each throws ConfigError for bad usage or
// configuration and DataError for unreadable or inconsistent data; the
// entry point maps these to exit codes 1 and 2.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qdistill::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

struct SimulateArgs {
  std::string config;
  std::string out;
  std::string ground_truth;  ///< directory for truth maps; empty to skip
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

struct CorrelateArgs {
  std::string stack;
  std::string out;
  std::optional<int> window;
  unsigned threads = 1;
};

struct DistillArgs {
  std::string correlation;
  std::string stack;
  std::string out;           ///< output directory
  std::string config;        ///< optional; supplies x0 and distillation knobs
  std::string ground_truth;  ///< optional directory written by `simulate`
};

struct SweepArgs {
  std::string config;
  std::vector<double> ratios;
  std::string out;  ///< CSV path; the fit report goes next to it
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;     ///< optional export directory
  std::string config;  ///< optional; as for distill
};

void simulate(const SimulateArgs& args, std::ostream& log);
void correlate(const CorrelateArgs& args, std::ostream& log);
void distill(const DistillArgs& args, std::ostream& log);
void snr_sweep(const SweepArgs& args, std::ostream& log);
void report(const ReportArgs& args, std::ostream& log);

/// Parses argv, runs a subcommand and returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qdistill::cli
