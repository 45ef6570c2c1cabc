#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "promptseg/errors.hpp"
#include "promptseg/pipeline.hpp"
#include "promptseg/remote.hpp"

namespace spdlog {
class logger;
}

namespace promptseg::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitIo = 3,
  kExitUnreachable = 4,
  kExitPartial = 5,
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class RemoteUnreachable : public Error {
 public:
  using Error::Error;
};

/// --backend NAME[:URL]
struct BackendSpec {
  enum class Kind { synthetic, identity, remote };
  Kind kind = Kind::synthetic;
  std::string url;

  static BackendSpec parse(std::string_view text);
  std::string to_string() const;
};

/// --responder NAME[:PATH|URL]; "gt-oracle:noisy" selects the noisy oracle.
struct ResponderSpec {
  enum class Kind { scripted, gt_oracle, remote };
  Kind kind = Kind::gt_oracle;
  std::string location;  ///< fixture path, service URL, or "noisy"

  static ResponderSpec parse(std::string_view text);
  std::string to_string() const;
};

struct RunConfig {
  InferenceTask task = InferenceTask::ppg;
  std::filesystem::path manifest;
  std::filesystem::path output;  ///< empty: write to stdout
  std::filesystem::path csv;     ///< eval per-sample CSV, optional
  PipelineOptions pipeline;
  BackendSpec backend;
  ResponderSpec responder;
  RemoteOptions remote;  ///< transport tuning; the URL comes from --backend
  int workers = 1;
  /// Which metric eval reports as its headline value: "ciou" or "giou".
  std::string metric = "ciou";
  /// A run whose failed fraction exceeds this exits with kExitPartial.
  double max_failure_fraction = 0.5;

  /// Resolved settings echoed into every artifact. Worker count and output
  /// locations are left out so artifacts compare equal across them.
  nlohmann::json to_json() const;
};

/// Applies an INI document with sections [run], [sampling], [backend],
/// [responder] and [templates]. Unknown sections or keys and malformed values
/// throw ConfigError.
void apply_ini(RunConfig& config, std::istream& in);

struct SweepAxes {
  std::vector<double> thresholds;
  std::vector<std::pair<int, int>> grids;
  std::vector<int> random_n;

  bool empty() const noexcept { return thresholds.empty() && grids.empty() && random_n.empty(); }
};

/// Output sink for a command: the configured file, or `fallback`.
struct Streams {
  std::ostream& out;
  spdlog::logger& log;
};

int cmd_gen_data(const RunConfig& config, Streams io);
int cmd_eval(const RunConfig& config, Streams io);
int cmd_sweep(const RunConfig& config, const SweepAxes& axes, Streams io);
int cmd_upper_bound(const RunConfig& config, Streams io);

/// Full command line (without the program name). Diagnostics go to `err`,
/// artifacts to --out or `out`. Returns an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace promptseg::cli
