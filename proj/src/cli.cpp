#include "promptseg/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "promptseg/dataset.hpp"
#include "promptseg/evaluation.hpp"
#include "promptseg/parallel.hpp"

namespace promptseg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Specs and config
// ---------------------------------------------------------------------------

namespace {

std::pair<std::string, std::string> split_spec(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) return {std::string(text), {}};
  return {std::string(text.substr(0, colon)), std::string(text.substr(colon + 1))};
}

}  // namespace

BackendSpec BackendSpec::parse(std::string_view text) {
  auto [name, rest] = split_spec(text);
  if (name == "synthetic" && rest.empty()) return {Kind::synthetic, {}};
  if (name == "identity" && rest.empty()) return {Kind::identity, {}};
  if (name == "remote") {
    if (rest.empty()) throw ConfigError("backend remote needs a URL: remote:http://host:port");
    return {Kind::remote, rest};
  }
  throw ConfigError("unknown backend '" + std::string(text) + "'");
}

std::string BackendSpec::to_string() const {
  switch (kind) {
    case Kind::synthetic: return "synthetic";
    case Kind::identity: return "identity";
    case Kind::remote: return "remote:" + url;
  }
  return {};
}

ResponderSpec ResponderSpec::parse(std::string_view text) {
  auto [name, rest] = split_spec(text);
  if (name == "gt-oracle") {
    if (!rest.empty() && rest != "noisy") {
      throw ConfigError("gt-oracle takes no argument other than 'noisy'");
    }
    return {Kind::gt_oracle, rest};
  }
  if (name == "scripted") {
    if (rest.empty()) throw ConfigError("responder scripted needs a fixture path");
    return {Kind::scripted, rest};
  }
  if (name == "remote") {
    if (rest.empty()) throw ConfigError("responder remote needs a URL");
    return {Kind::remote, rest};
  }
  throw ConfigError("unknown responder '" + std::string(text) + "'");
}

std::string ResponderSpec::to_string() const {
  switch (kind) {
    case Kind::gt_oracle: return location.empty() ? "gt-oracle" : "gt-oracle:" + location;
    case Kind::scripted: return "scripted:" + location;
    case Kind::remote: return "remote:" + location;
  }
  return {};
}

json RunConfig::to_json() const {
  const auto& s = pipeline.sampling;
  const auto& t = pipeline.templates;
  return {
      {"task", promptseg::to_string(task)},
      {"manifest", manifest.generic_string()},
      {"metric", metric},
      {"max_failure_fraction", max_failure_fraction},
      {"sampling",
       {{"groups_sampled", s.groups_sampled},
        {"groups_kept", s.groups_kept},
        {"groups_emitted", s.groups_emitted},
        {"positives", s.positives},
        {"negatives", s.negatives},
        {"pqpp_train_points", s.pqpp_train_points},
        {"grid_rows", s.grid_rows},
        {"grid_cols", s.grid_cols},
        {"confidence_threshold", s.confidence_threshold},
        {"seed", s.seed}}},
      {"backend",
       {{"name", backend.to_string()},
        {"max_in_flight", remote.max_in_flight},
        {"max_retries", remote.max_retries},
        {"backoff_ms", remote.backoff_base.count()},
        {"timeout_s", remote.timeout.count()},
        {"image_dir", pipeline.image_dir.generic_string()}}},
      {"responder", responder.to_string()},
      {"templates", {{"ppg", t.ppg}, {"pqpp_box", t.pqpp_box}, {"pqpp_points", t.pqpp_points}}},
  };
}

namespace {

template <class T>
T ini_value(const std::string& section, const std::string& key, const std::string& raw) {
  try {
    std::size_t used = 0;
    T v{};
    if constexpr (std::is_same_v<T, int>) {
      v = std::stoi(raw, &used);
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!raw.empty() && raw.front() == '-') throw std::invalid_argument("negative");
      v = std::stoull(raw, &used);
    } else {
      v = std::stod(raw, &used);
    }
    if (used != raw.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("[" + section + "] " + key + ": bad value '" + raw + "'");
  }
}

bool ini_bool(const std::string& section, const std::string& key, const std::string& raw) {
  if (raw == "true" || raw == "1" || raw == "yes") return true;
  if (raw == "false" || raw == "0" || raw == "no") return false;
  throw ConfigError("[" + section + "] " + key + ": expected true or false, got '" + raw + "'");
}

InferenceTask task_from(const std::string& raw) {
  if (raw == "ppg") return InferenceTask::ppg;
  if (raw == "pqpp") return InferenceTask::pqpp;
  throw ConfigError("task must be ppg or pqpp, got '" + raw + "'");
}

}  // namespace

void apply_ini(RunConfig& config, std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  std::string backend_name, backend_url, responder_name, responder_path, responder_url;
  bool noisy = false;
  auto& s = config.pipeline.sampling;

  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config: key '" + section + "' outside a section");
    }
    for (const auto& [key, node] : body) {
      const std::string v = node.data();
      auto unknown = [&] { throw ConfigError("config: unknown key [" + section + "] " + key); };
      if (section == "run") {
        if (key == "task") config.task = task_from(v);
        else if (key == "manifest") config.manifest = v;
        else if (key == "out") config.output = v;
        else if (key == "csv") config.csv = v;
        else if (key == "seed") s.seed = ini_value<std::uint64_t>(section, key, v);
        else if (key == "workers") config.workers = ini_value<int>(section, key, v);
        else if (key == "metric") config.metric = v;
        else if (key == "max_failure_fraction") config.max_failure_fraction = ini_value<double>(section, key, v);
        else unknown();
      } else if (section == "sampling") {
        if (key == "groups_sampled") s.groups_sampled = ini_value<int>(section, key, v);
        else if (key == "groups_kept") s.groups_kept = ini_value<int>(section, key, v);
        else if (key == "groups_emitted") s.groups_emitted = ini_value<int>(section, key, v);
        else if (key == "positives") s.positives = ini_value<int>(section, key, v);
        else if (key == "negatives") s.negatives = ini_value<int>(section, key, v);
        else if (key == "pqpp_train_points") s.pqpp_train_points = ini_value<int>(section, key, v);
        else if (key == "grid_rows") s.grid_rows = ini_value<int>(section, key, v);
        else if (key == "grid_cols") s.grid_cols = ini_value<int>(section, key, v);
        else if (key == "confidence_threshold") s.confidence_threshold = ini_value<double>(section, key, v);
        else if (key == "seed") s.seed = ini_value<std::uint64_t>(section, key, v);
        else unknown();
      } else if (section == "backend") {
        if (key == "name") backend_name = v;
        else if (key == "url") backend_url = v;
        else if (key == "max_in_flight") config.remote.max_in_flight = ini_value<int>(section, key, v);
        else if (key == "max_retries") config.remote.max_retries = ini_value<int>(section, key, v);
        else if (key == "backoff_ms") config.remote.backoff_base = std::chrono::milliseconds(ini_value<int>(section, key, v));
        else if (key == "timeout_s") config.remote.timeout = std::chrono::seconds(ini_value<int>(section, key, v));
        else if (key == "image_dir") config.pipeline.image_dir = v;
        else unknown();
      } else if (section == "responder") {
        if (key == "name") responder_name = v;
        else if (key == "path") responder_path = v;
        else if (key == "url") responder_url = v;
        else if (key == "noisy") noisy = ini_bool(section, key, v);
        else unknown();
      } else if (section == "templates") {
        if (key == "ppg") config.pipeline.templates.ppg = v;
        else if (key == "pqpp_box") config.pipeline.templates.pqpp_box = v;
        else if (key == "pqpp_points") config.pipeline.templates.pqpp_points = v;
        else unknown();
      } else {
        throw ConfigError("config: unknown section [" + section + "]");
      }
    }
  }

  if (!backend_name.empty()) {
    config.backend = BackendSpec::parse(backend_url.empty() ? backend_name
                                                            : backend_name + ":" + backend_url);
  }
  if (!responder_name.empty()) {
    std::string arg = responder_name == "scripted" ? responder_path
                      : responder_name == "remote" ? responder_url
                                                   : std::string();
    if (responder_name == "gt-oracle" && noisy) arg = "noisy";
    config.responder = ResponderSpec::parse(arg.empty() ? responder_name : responder_name + ":" + arg);
  }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

namespace {

void validate(const RunConfig& config) {
  try {
    config.pipeline.sampling.validate();
  } catch (const UsageError& e) {
    throw ConfigError(std::string("[sampling] ") + e.what());
  }
  if (config.workers < 1) throw ConfigError("workers must be at least 1");
  if (config.metric != "ciou" && config.metric != "giou") {
    throw ConfigError("metric must be ciou or giou, got '" + config.metric + "'");
  }
  if (config.remote.max_in_flight < 1) throw ConfigError("max_in_flight must be at least 1");
  if (config.remote.max_retries < 0) throw ConfigError("max_retries must not be negative");
  if (!(config.max_failure_fraction >= 0.0 && config.max_failure_fraction <= 1.0)) {
    throw ConfigError("max_failure_fraction must be in [0, 1]");
  }
  if (config.manifest.empty()) throw ConfigError("no manifest given (--manifest or [run] manifest)");
  if (!fs::exists(config.manifest)) {
    throw ConfigError("manifest " + config.manifest.string() + " does not exist");
  }
  if (!config.pipeline.image_dir.empty() && !fs::is_directory(config.pipeline.image_dir)) {
    throw ConfigError("image_dir " + config.pipeline.image_dir.string() + " is not a directory");
  }
}

std::vector<RESample> load(const RunConfig& config, spdlog::logger& log) {
  const auto manifest = load_manifest(config.manifest);
  auto data = load_samples(manifest);
  for (const auto& s : data.skipped) {
    log.warn("{}:{}: skipped: {}", manifest.annotations.string(), s.line, s.reason);
  }
  log.info("loaded {} samples from {} ({} skipped)", data.samples.size(),
           manifest.annotations.string(), data.skipped.size());
  return std::move(data.samples);
}

RemoteOptions remote_options(const RunConfig& config, const std::string& url) {
  RemoteOptions o = config.remote;
  o.url = url;
  return o;
}

/// Scenes for the synthetic backend: every distinct target mask of an image
/// becomes one region; later masks overwrite earlier ones where they overlap.
std::unique_ptr<Segmenter> synthetic_backend(std::span<const RESample> samples) {
  struct Scene {
    int width, height;
    std::vector<int> labels;
    std::vector<const BinaryMask*> seen;
  };
  std::map<std::string, Scene> scenes;
  for (const auto& s : samples) {
    auto [it, fresh] = scenes.try_emplace(s.image_id);
    Scene& scene = it->second;
    if (fresh) {
      scene.width = s.width;
      scene.height = s.height;
      scene.labels.assign(static_cast<std::size_t>(s.width) * s.height, 0);
    } else if (scene.width != s.width || scene.height != s.height) {
      throw FormatError("image " + s.image_id + " appears with two different sizes");
    }
    for (const auto& t : s.targets) {
      const bool dup = std::any_of(scene.seen.begin(), scene.seen.end(),
                                   [&](const BinaryMask* m) { return *m == t; });
      if (dup) continue;
      scene.seen.push_back(&t);
      const int label = static_cast<int>(scene.seen.size());
      for (int y = 0; y < t.height(); ++y) {
        for (int x = 0; x < t.width(); ++x) {
          if (t.at(x, y)) scene.labels[static_cast<std::size_t>(y) * t.width() + x] = label;
        }
      }
    }
  }
  auto seg = std::make_unique<SyntheticSegmenter>();
  for (auto& [id, scene] : scenes) {
    seg->register_scene(id, LabelMap(scene.width, scene.height, std::move(scene.labels)));
  }
  return seg;
}

std::unique_ptr<Segmenter> make_segmenter(const RunConfig& config,
                                          std::span<const RESample> samples,
                                          spdlog::logger& log) {
  switch (config.backend.kind) {
    case BackendSpec::Kind::synthetic:
      return synthetic_backend(samples);
    case BackendSpec::Kind::identity: {
      auto seg = std::make_unique<IdentitySegmenter>();
      for (const auto& s : samples) {
        seg->register_mask(s.id, s.target_union().value_or(BinaryMask(s.width, s.height)));
      }
      return seg;
    }
    case BackendSpec::Kind::remote: {
      auto seg = std::make_unique<RemoteSegmenter>(remote_options(config, config.backend.url));
      if (!seg->reachable()) {
        throw RemoteUnreachable("segmenter service at " + config.backend.url + " is unreachable");
      }
      if (!seg->healthy()) log.warn("segmenter service at {} is not reporting ok", config.backend.url);
      return seg;
    }
  }
  return nullptr;
}

std::unique_ptr<Responder> make_responder(const RunConfig& config, InferenceTask task) {
  const auto& spec = config.responder;
  switch (spec.kind) {
    case ResponderSpec::Kind::gt_oracle:
      return std::make_unique<GtOracleResponder>(
          GtOracleOptions{task, config.pipeline.sampling, spec.location == "noisy"});
    case ResponderSpec::Kind::scripted:
      if (!fs::exists(spec.location)) {
        throw ConfigError("responder fixture " + spec.location + " does not exist");
      }
      return std::make_unique<ScriptedResponder>(ScriptedResponder::from_file(spec.location));
    case ResponderSpec::Kind::remote: {
      auto r = std::make_unique<RemoteResponder>(remote_options(config, spec.location));
      if (!r->reachable()) {
        throw RemoteUnreachable("responder service at " + spec.location + " is unreachable");
      }
      return r;
    }
  }
  return nullptr;
}

/// Artifact stream: the configured file or the fallback stream.
class Output {
 public:
  Output(const fs::path& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw FormatError("cannot write " + path.string());
      stream_ = &file_;
    }
  }
  std::ostream& operator*() { return *stream_; }
  void finish() {
    stream_->flush();
    if (!*stream_) throw FormatError("write failed");
  }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

int partial_exit(std::size_t failed, std::size_t total, double limit, spdlog::logger& log) {
  if (total == 0 || failed == 0) return kExitOk;
  const double frac = static_cast<double>(failed) / static_cast<double>(total);
  if (frac > limit) {
    log.error("{} of {} samples failed, above the allowed fraction {}", failed, total, limit);
    return kExitPartial;
  }
  log.warn("{} of {} samples failed", failed, total);
  return kExitOk;
}

std::string fmt_metric(std::optional<double> v) {
  if (!v) return "NA";
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

}  // namespace

int cmd_gen_data(const RunConfig& config, Streams io) {
  validate(config);
  const auto samples = load(config, io.log);
  std::unique_ptr<Segmenter> seg;
  if (config.task == InferenceTask::ppg) seg = make_segmenter(config, samples, io.log);

  const auto outcomes =
      generate_records(samples, config.task, seg.get(), config.pipeline, config.workers);

  Output out(config.output, io.out);
  *out << json{{"type", "header"}, {"command", "gen-data"}, {"config", config.to_json()}}.dump()
       << '\n';
  std::map<std::string, std::size_t> by_task, skipped;
  std::size_t written = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (o.record) {
      *out << to_json(*o.record).dump() << '\n';
      ++by_task[to_string(o.record->task)];
      ++written;
    } else {
      *out << json{{"type", "skipped"}, {"id", samples[i].id}, {"reason", o.skip_reason}}.dump()
           << '\n';
      ++skipped[o.skip_reason];
      io.log.warn("sample {} skipped: {} ({})", samples[i].id, o.skip_reason, o.detail);
    }
  }
  *out << json{{"type", "summary"},
               {"samples", samples.size()},
               {"records", written},
               {"by_task", by_task},
               {"skipped", skipped}}
              .dump()
       << '\n';
  out.finish();
  io.log.info("wrote {} records ({} skipped)", written, samples.size() - written);
  return partial_exit(samples.size() - written, samples.size(), config.max_failure_fraction,
                      io.log);
}

int cmd_eval(const RunConfig& config, Streams io) {
  validate(config);
  const auto samples = load(config, io.log);
  auto seg = make_segmenter(config, samples, io.log);
  auto responder = make_responder(config, config.task);

  const auto report =
      evaluate(samples, config.task, *responder, *seg, config.pipeline, config.workers);

  const auto summary = report.summary();
  Output out(config.output, io.out);
  *out << json{{"config", config.to_json()},
               {"headline", {{"metric", config.metric}, {"value", summary.at(config.metric)}}},
               {"metrics", summary}}
              .dump(2)
       << '\n';
  out.finish();
  if (!config.csv.empty()) {
    Output csv(config.csv, io.out);
    report.write_csv(*csv);
    csv.finish();
  }
  io.log.info("cIoU {} gIoU {} N-acc {}", report.ciou(),
              report.size() ? report.giou() : 0.0, fmt_metric(report.n_acc()));
  return partial_exit(report.n_failures(), report.size(), config.max_failure_fraction, io.log);
}

int cmd_sweep(const RunConfig& base, const SweepAxes& axes, Streams io) {
  RunConfig config = base;
  config.task = InferenceTask::pqpp;
  validate(config);
  for (double t : axes.thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("threshold outside [0, 1]");
  }
  for (auto [r, c] : axes.grids) {
    if (r < 1 || c < 1) throw ConfigError("grid dimensions must be at least 1x1");
  }
  for (int n : axes.random_n) {
    if (n < 1) throw ConfigError("random point count must be at least 1");
  }

  const auto samples = load(config, io.log);
  auto seg = make_segmenter(config, samples, io.log);
  auto responder = make_responder(config, InferenceTask::pqpp);

  std::vector<SweepRow> rows;
  std::optional<ThresholdSweep> nesting;
  if (!axes.thresholds.empty()) {
    auto sweep = sweep_thresholds(samples, *responder, *seg, config.pipeline, axes.thresholds,
                                  config.workers);
    rows.insert(rows.end(), sweep.rows.begin(), sweep.rows.end());
    nesting = std::move(sweep);
  }
  std::vector<PointStrategy> strategies;
  for (auto [r, c] : axes.grids) strategies.push_back(PointStrategy::grid(r, c));
  for (int n : axes.random_n) strategies.push_back(PointStrategy::random(n));
  if (!strategies.empty()) {
    auto more = sweep_strategies(samples, *responder, *seg, config.pipeline, strategies,
                                 config.workers);
    rows.insert(rows.end(), more.begin(), more.end());
  }

  Output out(config.output, io.out);
  *out << "# config " << config.to_json().dump() << '\n';
  *out << "axis\tvalue\tciou\tgiou\tn_acc\tn_samples\tn_failures\tmean_retained_points\n";
  std::size_t worst_failures = 0;
  for (const auto& row : rows) {
    const auto& r = row.report;
    *out << row.axis << '\t' << row.value << '\t' << fmt_metric(r.ciou()) << '\t'
         << fmt_metric(r.size() ? std::optional(r.giou()) : std::nullopt) << '\t'
         << fmt_metric(r.n_acc()) << '\t' << r.size() << '\t' << r.n_failures() << '\t'
         << fmt_metric(row.mean_retained_points) << '\n';
    worst_failures = std::max(worst_failures, r.n_failures());
  }
  if (nesting) {
    const bool ok = nesting->nested_samples == nesting->checked_samples;
    *out << "# threshold_nesting " << nesting->nested_samples << '/' << nesting->checked_samples
         << ' ' << (ok ? "ok" : "violated") << '\n';
    if (!ok) io.log.error("retained point sets are not nested on every sample");
  }
  out.finish();
  return partial_exit(worst_failures, samples.size(), config.max_failure_fraction, io.log);
}

int cmd_upper_bound(const RunConfig& config, Streams io) {
  validate(config);
  const auto samples = load(config, io.log);
  auto seg = make_segmenter(config, samples, io.log);
  const auto rows = upper_bounds(samples, *seg, config.pipeline, config.workers);

  std::vector<double> scored;
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (r.skip_reason.empty()) {
      scored.push_back(r.iou);
    } else if (r.skip_reason != "no_target") {
      ++failed;
    }
  }

  Output out(config.output, io.out);
  *out << "# config " << config.to_json().dump() << '\n';
  *out << "id,iou,skip_reason\n";
  (*out).precision(17);
  for (const auto& r : rows) {
    *out << r.id << ',';
    if (r.skip_reason.empty()) *out << r.iou;
    *out << ',' << r.skip_reason << '\n';
  }
  if (!scored.empty()) {
    double sum = 0.0;
    for (double v : scored) sum += v;
    const double mean = sum / static_cast<double>(scored.size());
    std::sort(scored.begin(), scored.end());
    auto rank = [&](double q) {
      const auto i = static_cast<std::size_t>(std::ceil(q * scored.size()));
      return scored[std::clamp<std::size_t>(i, 1, scored.size()) - 1];
    };
    *out << "# mean " << mean << " n " << scored.size() << '\n';
    *out << "# min " << scored.front() << " p25 " << rank(0.25) << " median " << rank(0.5)
         << " p75 " << rank(0.75) << " max " << scored.back() << '\n';
    io.log.info("upper-bound mean IoU {} over {} samples", mean, scored.size());
  } else {
    *out << "# mean NA n 0\n";
  }
  out.finish();
  return partial_exit(failed, samples.size(), config.max_failure_fraction, io.log);
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

namespace {

struct Flags {
  std::string config, manifest, out, csv, task, backend, responder, metric;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::vector<std::string> thresholds, grids, random_n;
  std::string instances, refs, split, source = "grefcoco";
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "INI config file (default: $PROMPTSEG_CONFIG)");
  cmd->add_option("--manifest", f.manifest, "dataset manifest or annotation JSONL");
  cmd->add_option("--out", f.out, "output file (default: stdout)");
  cmd->add_option("--seed", f.seed, "global seed");
  cmd->add_option("--workers", f.workers, "worker threads (default: logical cores)");
  cmd->add_option("--backend", f.backend, "synthetic | identity | remote:URL");
}

std::vector<double> parse_thresholds(const std::vector<std::string>& items) {
  std::vector<double> out;
  for (const auto& s : items) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw ConfigError("bad threshold '" + s + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<std::pair<int, int>> parse_grids(const std::vector<std::string>& items) {
  std::vector<std::pair<int, int>> out;
  for (const auto& s : items) {
    int r = 0, c = 0;
    char x = 0;
    std::istringstream is(s);
    if (!(is >> r >> x >> c) || (x != 'x' && x != 'X') || !is.eof()) {
      throw ConfigError("bad grid '" + s + "', expected RxC");
    }
    out.emplace_back(r, c);
  }
  return out;
}

std::vector<int> parse_counts(const std::vector<std::string>& items) {
  std::vector<int> out;
  for (const auto& s : items) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw ConfigError("bad point count '" + s + "'");
    out.push_back(v);
  }
  return out;
}

RunConfig resolve(const Flags& f, spdlog::logger& log) {
  RunConfig config;
  config.workers = default_workers();

  std::string path = f.config;
  if (path.empty()) {
    if (const char* env = std::getenv("PROMPTSEG_CONFIG"); env && *env) path = env;
  }
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    apply_ini(config, in);
    log.debug("config from {}", path);
  }

  if (!f.manifest.empty()) config.manifest = f.manifest;
  if (!f.out.empty()) config.output = f.out;
  if (!f.csv.empty()) config.csv = f.csv;
  if (!f.task.empty()) config.task = task_from(f.task);
  if (!f.metric.empty()) config.metric = f.metric;
  if (!f.backend.empty()) config.backend = BackendSpec::parse(f.backend);
  if (!f.responder.empty()) config.responder = ResponderSpec::parse(f.responder);
  if (f.seed) config.pipeline.sampling.seed = *f.seed;
  if (f.workers) config.workers = *f.workers;
  config.pipeline.max_in_flight = config.remote.max_in_flight;
  return config;
}

int run_import(const Flags& f, std::ostream& out, spdlog::logger& log) {
  if (f.instances.empty() || f.refs.empty()) throw ConfigError("import needs --instances and --refs");
  for (const auto& p : {f.instances, f.refs}) {
    if (!fs::exists(p)) throw ConfigError(p + " does not exist");
  }
  SourceTag source;
  try {
    source = source_from_string(f.source);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  Output sink(f.out, out);
  const auto stats = import_refs(f.instances, f.refs, f.split, source, *sink);
  sink.finish();
  if (!f.out.empty()) {
    const json meta{{"command", "import"},
                    {"instances", f.instances},
                    {"refs", f.refs},
                    {"split", f.split},
                    {"source", to_string(source)},
                    {"written", stats.written},
                    {"skipped", stats.skipped}};
    std::ofstream side(f.out + ".config.json");
    side << meta.dump(2) << '\n';
    if (!side) throw FormatError("cannot write " + f.out + ".config.json");
  }
  log.info("imported {} samples ({} skipped)", stats.written, stats.skipped);
  return stats.written == 0 && stats.skipped > 0 ? kExitPartial : kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  spdlog::logger log("promptseg", sink);
  log.set_pattern("[%l] %v");

  CLI::App app{"Prompt-based segmentation data generation and evaluation", "promptseg"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  Flags f;
  auto* gen = app.add_subcommand("gen-data", "generate dialog training records");
  add_common(gen, f);
  gen->add_option("--task", f.task, "ppg | pqpp");

  auto* eval = app.add_subcommand("eval", "run inference and score a split");
  add_common(eval, f);
  eval->add_option("--task", f.task, "ppg | pqpp");
  eval->add_option("--responder", f.responder, "gt-oracle[:noisy] | scripted:PATH | remote:URL");
  eval->add_option("--csv", f.csv, "per-sample CSV");
  eval->add_option("--metric", f.metric, "headline metric: ciou (default) | giou");

  auto* sweep = app.add_subcommand("sweep", "PQPP threshold and point-strategy ablations");
  add_common(sweep, f);
  sweep->add_option("--responder", f.responder, "gt-oracle[:noisy] | scripted:PATH | remote:URL");
  sweep->add_option("--thresholds", f.thresholds, "e.g. 0.6,0.7,0.8,0.9,0.95")->delimiter(',');
  sweep->add_option("--grids", f.grids, "e.g. 5x5,6x6")->delimiter(',');
  sweep->add_option("--random-n", f.random_n, "e.g. 25,36")->delimiter(',');

  auto* ub = app.add_subcommand("upper-bound", "best-of-K ground-truth prompt IoU");
  add_common(ub, f);

  auto* imp = app.add_subcommand("import", "convert a COCO-style refs dump to JSONL");
  imp->add_option("--instances", f.instances, "instances JSON");
  imp->add_option("--refs", f.refs, "refs JSON list");
  imp->add_option("--split", f.split, "keep only this split");
  imp->add_option("--source", f.source, "refcoco | refcoco+ | refcocog | grefcoco");
  imp->add_option("--out", f.out, "output JSONL (default: stdout)");

  std::vector<std::string> argv{"promptseg"};
  argv.insert(argv.end(), args.begin(), args.end());
  std::vector<const char*> cargv;
  for (const auto& a : argv) cargv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitConfig;
  }
  log.set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (imp->parsed()) return run_import(f, out, log);
    const RunConfig config = resolve(f, log);
    const Streams io{out, log};
    if (gen->parsed()) return cmd_gen_data(config, io);
    if (eval->parsed()) return cmd_eval(config, io);
    if (ub->parsed()) return cmd_upper_bound(config, io);
    SweepAxes axes{parse_thresholds(f.thresholds), parse_grids(f.grids), parse_counts(f.random_n)};
    if (axes.empty()) axes.thresholds = {0.6, 0.7, 0.8, 0.9, 0.95};
    return cmd_sweep(config, axes, io);
  } catch (const ConfigError& e) {
    log.error("{}", e.what());
    return kExitConfig;
  } catch (const RemoteUnreachable& e) {
    log.error("{}", e.what());
    return kExitUnreachable;
  } catch (const FormatError& e) {
    log.error("{}", e.what());
    return kExitIo;
  } catch (const UsageError& e) {
    log.error("{}", e.what());
    return kExitConfig;
  }
}

}  // namespace promptseg::cli
