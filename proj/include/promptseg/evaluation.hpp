#pragma once

#include <span>
#include <string>
#include <vector>

#include "promptseg/metrics.hpp"
#include "promptseg/pipeline.hpp"

namespace promptseg {

/// Runs the task's inference flow over every sample on `workers` threads and
/// scores the outcomes in input order. Every sample yields exactly one score.
EvalReport evaluate(std::span<const RESample> samples, InferenceTask task, Responder& responder,
                    Segmenter& segmenter, const PipelineOptions& options, int workers,
                    std::vector<InferOutcome>* outcomes = nullptr);

struct SweepRow {
  std::string axis;
  std::string value;
  EvalReport report;
  double mean_retained_points = 0.0;  ///< PQPP points kept per answered sample
};

struct ThresholdSweep {
  std::vector<SweepRow> rows;
  /// Samples with answers whose retained sets shrink monotonically as the
  /// threshold rises, out of `checked_samples`.
  std::size_t nested_samples = 0;
  std::size_t checked_samples = 0;
};

/// PQPP threshold ablation. The responder is queried once per sample; every
/// threshold re-filters the cached answers and re-segments.
ThresholdSweep sweep_thresholds(std::span<const RESample> samples, Responder& responder,
                                Segmenter& segmenter, const PipelineOptions& options,
                                std::span<const double> thresholds, int workers);

/// PQPP point-strategy ablation. Each strategy changes the questions, so each
/// re-queries the responder.
std::vector<SweepRow> sweep_strategies(std::span<const RESample> samples, Responder& responder,
                                       Segmenter& segmenter, const PipelineOptions& options,
                                       std::span<const PointStrategy> strategies, int workers);

struct UpperBoundRow {
  std::string id;
  double iou = 0.0;
  std::string skip_reason;  ///< non-empty when the sample was not scored
};

/// Per sample: for every target the best of K ground-truth-sampled groups,
/// their masks unioned and compared with the target union.
std::vector<UpperBoundRow> upper_bounds(std::span<const RESample> samples, Segmenter& segmenter,
                                        const PipelineOptions& options, int workers);

}  // namespace promptseg
