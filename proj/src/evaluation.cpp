#include "promptseg/evaluation.hpp"

#include <algorithm>
#include <sstream>

#include "promptseg/errors.hpp"
#include "promptseg/parallel.hpp"
#include "promptseg/upper_bound.hpp"

namespace promptseg {

namespace {

EvalReport score_all(std::span<const RESample> samples, std::span<const InferOutcome> outcomes) {
  EvalReport report;
  for (std::size_t i = 0; i < samples.size(); ++i) score_outcome(report, samples[i], outcomes[i]);
  return report;
}

double mean_retained(std::span<const InferOutcome> outcomes) {
  std::size_t answered = 0;
  std::size_t points = 0;
  for (const auto& o : outcomes) {
    if (o.kind != InferOutcome::Kind::mask) continue;
    ++answered;
    for (const auto& r : o.retained) points += r.size();
  }
  return answered ? static_cast<double>(points) / static_cast<double>(answered) : 0.0;
}

std::string format_threshold(double t) {
  std::ostringstream s;
  s << t;
  return s.str();
}

}  // namespace

EvalReport evaluate(std::span<const RESample> samples, InferenceTask task, Responder& responder,
                    Segmenter& segmenter, const PipelineOptions& options, int workers,
                    std::vector<InferOutcome>* outcomes) {
  std::vector<InferOutcome> results(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    results[i] = task == InferenceTask::ppg
                     ? infer_ppg(samples[i], responder, segmenter, options)
                     : infer_pqpp(samples[i], responder, segmenter, options);
  });
  EvalReport report = score_all(samples, results);
  if (outcomes) *outcomes = std::move(results);
  return report;
}

ThresholdSweep sweep_thresholds(std::span<const RESample> samples, Responder& responder,
                                Segmenter& segmenter, const PipelineOptions& options,
                                std::span<const double> thresholds, int workers) {
  const auto& cfg = options.sampling;
  const auto strategy = PointStrategy::grid(cfg.grid_rows, cfg.grid_cols);
  std::vector<PqppQuery> queries(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    queries[i] = query_pqpp(samples[i], responder, options, strategy);
  });

  ThresholdSweep sweep;
  for (const double t : thresholds) {
    std::vector<InferOutcome> outcomes(samples.size());
    parallel_for(samples.size(), workers, [&](std::size_t i) {
      outcomes[i] = finish_pqpp(samples[i], queries[i], segmenter, t, options);
    });
    SweepRow row{"threshold", format_threshold(t), score_all(samples, outcomes),
                 mean_retained(outcomes)};
    sweep.rows.push_back(std::move(row));
  }

  // Kept answer indices must shrink as the threshold rises.
  std::vector<double> ordered(thresholds.begin(), thresholds.end());
  std::sort(ordered.begin(), ordered.end());
  for (const auto& q : queries) {
    if (q.status != InferOutcome::Kind::mask) continue;
    ++sweep.checked_samples;
    bool nested = true;
    for (const auto& entry : q.boxes) {
      std::vector<bool> previous(entry.answers.size(), true);
      for (const double t : ordered) {
        std::vector<bool> current(entry.answers.size(), false);
        for (const auto& p : filter_by_confidence(entry.answers, t)) {
          // Queried points are distinct within a box.
          const auto it = std::find_if(entry.answers.begin(), entry.answers.end(),
                                       [&](const PointAnswer& a) { return a.point == p.point(); });
          current[static_cast<std::size_t>(it - entry.answers.begin())] = true;
        }
        for (std::size_t i = 0; i < current.size(); ++i) nested &= !current[i] || previous[i];
        previous = std::move(current);
      }
    }
    sweep.nested_samples += nested;
  }
  return sweep;
}

std::vector<SweepRow> sweep_strategies(std::span<const RESample> samples, Responder& responder,
                                       Segmenter& segmenter, const PipelineOptions& options,
                                       std::span<const PointStrategy> strategies, int workers) {
  std::vector<SweepRow> rows;
  for (const auto& strategy : strategies) {
    std::vector<InferOutcome> outcomes(samples.size());
    parallel_for(samples.size(), workers, [&](std::size_t i) {
      const auto q = query_pqpp(samples[i], responder, options, strategy);
      outcomes[i] =
          finish_pqpp(samples[i], q, segmenter, options.sampling.confidence_threshold, options);
    });
    rows.push_back({strategy.kind == PointStrategy::Kind::grid ? "grid" : "random",
                    strategy.label(), score_all(samples, outcomes), mean_retained(outcomes)});
  }
  return rows;
}

std::vector<UpperBoundRow> upper_bounds(std::span<const RESample> samples, Segmenter& segmenter,
                                        const PipelineOptions& options, int workers) {
  std::vector<UpperBoundRow> rows(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    const RESample& s = samples[i];
    UpperBoundRow& row = rows[i];
    row.id = s.id;
    if (s.no_target()) {
      row.skip_reason = "no_target";
      return;
    }
    try {
      BinaryMask best(s.width, s.height);
      const ImageRef image = image_ref(s, options);
      for (std::size_t t = 0; t < s.targets.size(); ++t) {
        const auto box = *tight_bbox(s.targets[t]);
        RngStream rng(derive_seed(options.sampling.seed, s.id, "upper-bound", t));
        const auto bound =
            upper_bound_iou(s.targets[t], box, segmenter, image, options.sampling, rng, s.id);
        if (!bound.best) continue;
        best |= segmenter.segment({image, SamPrompt{box, bound.best->labeled()}, s.id}).mask;
      }
      row.iou = iou(best, *s.target_union());
    } catch (const NoNegativeCandidates&) {
      row.skip_reason = "no_negative_candidates";
    } catch (const SegmenterError& e) {
      row.skip_reason = "segmenter_" + e.code();
    }
  });
  return rows;
}

}  // namespace promptseg
