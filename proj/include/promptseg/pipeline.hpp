#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "promptseg/metrics.hpp"
#include "promptseg/prompt_codec.hpp"
#include "promptseg/responder.hpp"
#include "promptseg/sample.hpp"
#include "promptseg/sampling.hpp"
#include "promptseg/segmenter.hpp"

namespace promptseg {

struct PipelineOptions {
  SamplingConfig sampling;
  InstructionTemplates templates;
  /// Concurrent segmenter calls while ranking one target's groups.
  int max_in_flight = 1;
  /// When set, "<image_dir>/<image_id>.png" is sent inline with every
  /// segmenter request instead of the bare image id.
  std::filesystem::path image_dir;
};

/// Image reference for a sample: id, dims and, with an image_dir, the PNG.
ImageRef image_ref(const RESample& sample, const PipelineOptions& options);

// ---------------------------------------------------------------------------
// Training-data generation
// ---------------------------------------------------------------------------

/// What happened to one target during PPG generation.
struct PpgTargetTrace {
  BBox box;
  std::vector<RankedGroup> ranked;    ///< every sampled group, best first
  std::vector<PointGroup> selected;   ///< emitted groups
};

struct PpgTrace {
  std::vector<PpgTargetTrace> targets;
};

/// Per target, in annotation order: tight box, K groups, rank through the
/// segmenter, pick k of the top `keep`. One box + points block per target.
/// Throws UsageError for no-target samples, NoNegativeCandidates or
/// PipelineError when a target cannot be processed.
DialogRecord generate_ppg_record(const RESample& sample, Segmenter& segmenter,
                                 const PipelineOptions& options, PpgTrace* trace = nullptr);

/// Round 1 answers with each target's tight box; round 2 answers the
/// pqpp_train_points points drawn from the box of the target union, labeled
/// against the union. Throws UsageError for no-target samples.
DialogRecord generate_pqpp_record(const RESample& sample, const PipelineOptions& options);

/// One exchange answered with the no-target phrase. Throws UsageError if the
/// sample has targets.
DialogRecord generate_no_target_record(const RESample& sample, const PipelineOptions& options,
                                       InferenceTask task);

struct GenerationOutcome {
  std::optional<DialogRecord> record;
  std::string skip_reason;  ///< reason code when record is empty
  std::string detail;
};

/// Routes a sample to the right generator and turns per-sample failures into
/// skip reasons. `segmenter` is only used for PPG.
GenerationOutcome generate_record(const RESample& sample, InferenceTask task,
                                  Segmenter* segmenter, const PipelineOptions& options);

/// generate_record over a batch on `workers` threads; results in input order.
std::vector<GenerationOutcome> generate_records(std::span<const RESample> samples,
                                                InferenceTask task, Segmenter* segmenter,
                                                const PipelineOptions& options, int workers);

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

/// How PQPP picks the points it asks about inside a predicted box.
struct PointStrategy {
  enum class Kind { grid, random };
  Kind kind = Kind::grid;
  int rows = 5;
  int cols = 5;
  int count = 25;

  static PointStrategy grid(int rows, int cols) { return {Kind::grid, rows, cols, rows * cols}; }
  static PointStrategy random(int count) { return {Kind::random, 0, 0, count}; }
  std::string label() const;
};

struct InferOutcome {
  enum class Kind { mask, no_target, failed };
  Kind kind = Kind::failed;
  std::optional<BinaryMask> mask;
  std::string failure;  ///< reason code when failed
  /// PQPP only: points kept by the confidence filter, per box.
  std::vector<std::vector<LabeledPoint>> retained;
  /// PQPP only: true when some box was segmented from the box alone.
  bool box_only = false;
};

/// Responder answer -> no-target check -> (box, points) per instance -> one
/// segment call each -> union.
InferOutcome infer_ppg(const RESample& sample, Responder& responder, Segmenter& segmenter,
                       const PipelineOptions& options);

/// Responder side of PQPP: predicted boxes and the answers for the points
/// queried inside each. Reusable across confidence thresholds.
struct PqppQuery {
  struct BoxAnswers {
    BBox box;
    std::vector<PointAnswer> answers;
  };
  InferOutcome::Kind status = InferOutcome::Kind::mask;  ///< mask = answers available
  std::string failure;
  std::vector<BoxAnswers> boxes;
};

/// Round 1 for boxes, then per box one round-2 query over the strategy's
/// points (quantized to the text grid).
PqppQuery query_pqpp(const RESample& sample, Responder& responder,
                     const PipelineOptions& options, const PointStrategy& strategy);

/// Confidence filter + one segment call per box, unioned. A box whose points
/// are all filtered out is segmented from the box alone.
InferOutcome finish_pqpp(const RESample& sample, const PqppQuery& query, Segmenter& segmenter,
                         double threshold, const PipelineOptions& options = {});

/// query_pqpp + finish_pqpp with the configured grid and threshold.
InferOutcome infer_pqpp(const RESample& sample, Responder& responder, Segmenter& segmenter,
                        const PipelineOptions& options);

/// Adds one outcome to a report; failures count as empty predictions.
void score_outcome(EvalReport& report, const RESample& sample, const InferOutcome& outcome);

}  // namespace promptseg
