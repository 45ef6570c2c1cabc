#include "promptseg/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "promptseg/errors.hpp"
#include "promptseg/parallel.hpp"

namespace promptseg {

ImageRef image_ref(const RESample& sample, const PipelineOptions& options) {
  ImageRef ref{sample.image_id, sample.width, sample.height, {}};
  if (!options.image_dir.empty()) {
    const auto path = options.image_dir / (sample.image_id + ".png");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SegmenterError("missing_image", "cannot read " + path.string(), false);
    ref.inline_png.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return ref;
}

namespace {

void require_targets(const RESample& sample) {
  if (sample.no_target()) {
    throw UsageError("sample " + sample.id + " has no target; use the no-target generator");
  }
}

std::vector<LabeledPoint> flatten(std::span<const PointGroup> groups) {
  std::vector<LabeledPoint> out;
  for (const auto& g : groups) {
    const auto labeled = g.labeled();
    out.insert(out.end(), labeled.begin(), labeled.end());
  }
  return out;
}

BBox box_of(const BinaryMask& target, const std::string& id) {
  const auto box = tight_bbox(target);
  if (!box) throw UsageError("sample " + id + " has an empty target mask");
  return *box;
}

}  // namespace

DialogRecord generate_ppg_record(const RESample& sample, Segmenter& segmenter,
                                 const PipelineOptions& options, PpgTrace* trace) {
  require_targets(sample);
  const auto& cfg = options.sampling;
  std::vector<PromptInstance> instances;
  for (std::size_t t = 0; t < sample.targets.size(); ++t) {
    const BinaryMask& target = sample.targets[t];
    const BBox box = box_of(target, sample.id);

    RngStream group_rng(derive_seed(cfg.seed, sample.id, "ppg-groups", t));
    const auto groups = sample_point_groups(target, box, cfg, group_rng);
    auto ranked = rank_groups(groups, box, target, segmenter, image_ref(sample, options), sample.id,
                              options.max_in_flight);
    RngStream select_rng(derive_seed(cfg.seed, sample.id, "ppg-select", t));
    auto selected = select_training_groups(ranked, cfg, select_rng);

    instances.push_back({box, flatten(selected)});
    if (trace) trace->targets.push_back({box, std::move(ranked), std::move(selected)});
  }
  return build_ppg_record(sample.id, sample.expression, instances, sample.width, sample.height,
                          options.templates);
}

DialogRecord generate_pqpp_record(const RESample& sample, const PipelineOptions& options) {
  require_targets(sample);
  std::vector<BBox> boxes;
  for (const auto& target : sample.targets) boxes.push_back(box_of(target, sample.id));

  const BinaryMask all = *sample.target_union();
  const BBox union_box = box_of(all, sample.id);
  RngStream rng(derive_seed(options.sampling.seed, sample.id, "pqpp-points"));
  const auto points = sample_pqpp_training_points(all, union_box, options.sampling, rng);
  return build_pqpp_record(sample.id, sample.expression, boxes, points, sample.width,
                           sample.height, options.templates);
}

DialogRecord generate_no_target_record(const RESample& sample, const PipelineOptions& options,
                                       InferenceTask task) {
  if (!sample.no_target()) {
    throw UsageError("sample " + sample.id + " has targets; not a no-target sample");
  }
  const auto& tmpl = task == InferenceTask::ppg ? options.templates.ppg : options.templates.pqpp_box;
  return build_no_target_record(sample.id, sample.expression, tmpl);
}

GenerationOutcome generate_record(const RESample& sample, InferenceTask task,
                                  Segmenter* segmenter, const PipelineOptions& options) {
  GenerationOutcome out;
  try {
    if (sample.no_target()) {
      out.record = generate_no_target_record(sample, options, task);
    } else if (task == InferenceTask::pqpp) {
      out.record = generate_pqpp_record(sample, options);
    } else {
      if (!segmenter) throw UsageError("PPG generation needs a segmenter");
      out.record = generate_ppg_record(sample, *segmenter, options);
    }
  } catch (const NoNegativeCandidates& e) {
    out.skip_reason = "no_negative_candidates";
    out.detail = e.what();
  } catch (const PipelineError& e) {
    out.skip_reason = "segmenter_failure";
    out.detail = e.what();
  } catch (const SegmenterError& e) {
    out.skip_reason = "segmenter_" + e.code();
    out.detail = e.what();
  } catch (const UsageError& e) {
    out.skip_reason = "invalid_sample";
    out.detail = e.what();
  }
  return out;
}

std::vector<GenerationOutcome> generate_records(std::span<const RESample> samples,
                                                InferenceTask task, Segmenter* segmenter,
                                                const PipelineOptions& options, int workers) {
  std::vector<GenerationOutcome> out(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    out[i] = generate_record(samples[i], task, segmenter, options);
  });
  return out;
}

std::string PointStrategy::label() const {
  if (kind == Kind::grid) {
    return std::to_string(rows) + "x" + std::to_string(cols) + " grid (N=" +
           std::to_string(rows * cols) + ")";
  }
  return "random (N=" + std::to_string(count) + ")";
}

namespace {

InferOutcome failed(std::string code) {
  InferOutcome o;
  o.kind = InferOutcome::Kind::failed;
  o.failure = std::move(code);
  return o;
}

std::string parse_failure(const ParseError& e) { return std::string("parse_") + to_string(e.kind()); }

/// Segments one prompt and ORs it into `acc`, checking the returned dims.
void segment_into(BinaryMask& acc, Segmenter& segmenter, const RESample& sample,
                  const ImageRef& image, SamPrompt prompt) {
  auto result = segmenter.segment({image, std::move(prompt), sample.id});
  if (result.mask.width() != sample.width || result.mask.height() != sample.height) {
    throw SegmenterError("bad_mask", "segmenter returned a mask of the wrong size", false);
  }
  acc |= result.mask;
}

}  // namespace

InferOutcome infer_ppg(const RESample& sample, Responder& responder, Segmenter& segmenter,
                       const PipelineOptions& options) {
  const std::vector<Turn> turns{
      {Role::user, fill_template(options.templates.ppg, sample.expression)}};
  try {
    const Reply reply = responder.respond(sample, turns);
    if (parse_no_target(reply.text)) {
      InferOutcome o;
      o.kind = InferOutcome::Kind::no_target;
      return o;
    }
    const auto instances = parse_ppg_instances(reply.text, sample.width, sample.height,
                                               options.sampling.cardinality());
    BinaryMask mask(sample.width, sample.height);
    const ImageRef image = image_ref(sample, options);
    for (const auto& inst : instances) {
      segment_into(mask, segmenter, sample, image, SamPrompt{inst.box, inst.points});
    }
    InferOutcome o;
    o.kind = InferOutcome::Kind::mask;
    o.mask = std::move(mask);
    return o;
  } catch (const ParseError& e) {
    return failed(parse_failure(e));
  } catch (const ResponderError& e) {
    return failed("responder_" + e.code());
  } catch (const SegmenterError& e) {
    return failed("segmenter_" + e.code());
  } catch (const Error& e) {
    return failed("error");
  }
}

PqppQuery query_pqpp(const RESample& sample, Responder& responder,
                     const PipelineOptions& options, const PointStrategy& strategy) {
  PqppQuery q;
  std::vector<Turn> turns{
      {Role::user, fill_template(options.templates.pqpp_box, sample.expression)}};
  try {
    const Reply first = responder.respond(sample, turns);
    if (parse_no_target(first.text)) {
      q.status = InferOutcome::Kind::no_target;
      return q;
    }
    const auto boxes = parse_boxes(first.text, sample.width, sample.height);
    turns.push_back({Role::assistant, first.text});

    for (std::size_t b = 0; b < boxes.size(); ++b) {
      const BBox& box = boxes[b];
      std::vector<Point> raw;
      if (strategy.kind == PointStrategy::Kind::grid) {
        raw = grid_points(box, strategy.rows, strategy.cols);
      } else {
        RngStream rng(derive_seed(options.sampling.seed, sample.id, "pqpp-random-points", b));
        raw = random_points(box, strategy.count, rng);
      }
      std::vector<Point> points;
      for (const auto& p : raw) {
        const Point qp{quantize_coord(p.x, sample.width), quantize_coord(p.y, sample.height)};
        if (std::find(points.begin(), points.end(), qp) == points.end()) points.push_back(qp);
      }

      turns.push_back({Role::user, fill_template(options.templates.pqpp_points, sample.expression,
                                                 serialize_query_points(points, sample.width,
                                                                        sample.height))});
      const Reply reply = responder.respond(sample, turns);
      turns.push_back({Role::assistant, reply.text});
      const auto verdicts = parse_answers(reply.text, points.size());

      PqppQuery::BoxAnswers entry{box, {}};
      for (std::size_t i = 0; i < points.size(); ++i) {
        double c = 1.0;
        if (!reply.token_confidences.empty()) {
          c = i < reply.token_confidences.size() ? reply.token_confidences[i] : 0.0;
        }
        if (!(c >= 0.0 && c <= 1.0)) {
          throw ResponderError("bad_confidence", "confidence outside [0, 1]");
        }
        entry.answers.push_back({points[i], verdicts[i], c});
      }
      q.boxes.push_back(std::move(entry));
    }
  } catch (const ParseError& e) {
    q.status = InferOutcome::Kind::failed;
    q.failure = parse_failure(e);
    q.boxes.clear();
  } catch (const ResponderError& e) {
    q.status = InferOutcome::Kind::failed;
    q.failure = "responder_" + e.code();
    q.boxes.clear();
  } catch (const Error& e) {
    q.status = InferOutcome::Kind::failed;
    q.failure = "error";
    q.boxes.clear();
  }
  return q;
}

InferOutcome finish_pqpp(const RESample& sample, const PqppQuery& query, Segmenter& segmenter,
                         double threshold, const PipelineOptions& options) {
  if (query.status == InferOutcome::Kind::no_target) {
    InferOutcome o;
    o.kind = InferOutcome::Kind::no_target;
    return o;
  }
  if (query.status == InferOutcome::Kind::failed) return failed(query.failure);

  InferOutcome o;
  BinaryMask mask(sample.width, sample.height);
  try {
    const ImageRef image = image_ref(sample, options);
    for (const auto& entry : query.boxes) {
      auto kept = filter_by_confidence(entry.answers, threshold);
      if (kept.empty()) o.box_only = true;
      segment_into(mask, segmenter, sample, image, SamPrompt{entry.box, kept});
      o.retained.push_back(std::move(kept));
    }
  } catch (const SegmenterError& e) {
    return failed("segmenter_" + e.code());
  } catch (const Error& e) {
    return failed("error");
  }
  o.kind = InferOutcome::Kind::mask;
  o.mask = std::move(mask);
  return o;
}

InferOutcome infer_pqpp(const RESample& sample, Responder& responder, Segmenter& segmenter,
                        const PipelineOptions& options) {
  const auto& cfg = options.sampling;
  const auto query =
      query_pqpp(sample, responder, options, PointStrategy::grid(cfg.grid_rows, cfg.grid_cols));
  return finish_pqpp(sample, query, segmenter, cfg.confidence_threshold, options);
}

void score_outcome(EvalReport& report, const RESample& sample, const InferOutcome& outcome) {
  const auto gt = sample.target_union();
  switch (outcome.kind) {
    case InferOutcome::Kind::mask:
      report.accumulate(sample.id, gt, outcome.mask);
      break;
    case InferOutcome::Kind::no_target:
      report.accumulate(sample.id, gt, std::nullopt);
      break;
    case InferOutcome::Kind::failed:
      report.accumulate(sample.id, gt, BinaryMask(sample.width, sample.height), outcome.failure);
      break;
  }
}

}  // namespace promptseg
