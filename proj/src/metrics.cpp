#include "promptseg/metrics.hpp"

#include <numeric>

#include "promptseg/errors.hpp"

namespace promptseg {

const SampleScore& EvalReport::accumulate(std::string id, const std::optional<BinaryMask>& gt,
                                          const std::optional<BinaryMask>& pred,
                                          std::string failure) {
  SampleScore s;
  s.id = std::move(id);
  s.failure = std::move(failure);
  s.gt_no_target = !gt.has_value();
  s.pred_no_target = !pred.has_value();
  if (gt && pred) {
    const Overlap o = overlap(*gt, *pred);
    s.intersection = o.intersection;
    s.union_ = o.union_;
    s.iou = o.union_ == 0 ? 1.0 : static_cast<double>(o.intersection) / static_cast<double>(o.union_);
  } else if (!gt && !pred) {
    s.iou = 1.0;
  } else {
    s.iou = 0.0;
    s.union_ = gt ? gt->area() : pred->area();
  }
  intersection_sum_ += s.intersection;
  union_sum_ += s.union_;
  if (s.gt_no_target) {
    ++no_target_gts_;
    no_target_hits_ += s.pred_no_target;
  }
  samples_.push_back(std::move(s));
  return samples_.back();
}

void EvalReport::merge(const EvalReport& other) {
  samples_.insert(samples_.end(), other.samples_.begin(), other.samples_.end());
  intersection_sum_ += other.intersection_sum_;
  union_sum_ += other.union_sum_;
  no_target_gts_ += other.no_target_gts_;
  no_target_hits_ += other.no_target_hits_;
}

double EvalReport::ciou() const noexcept {
  if (union_sum_ == 0) return 1.0;
  return static_cast<double>(intersection_sum_) / static_cast<double>(union_sum_);
}

double EvalReport::giou() const {
  if (samples_.empty()) throw UsageError("gIoU of an empty report");
  const double total = std::accumulate(samples_.begin(), samples_.end(), 0.0,
                                       [](double acc, const SampleScore& s) { return acc + s.iou; });
  return total / static_cast<double>(samples_.size());
}

std::optional<double> EvalReport::n_acc() const noexcept {
  if (no_target_gts_ == 0) return std::nullopt;
  return static_cast<double>(no_target_hits_) / static_cast<double>(no_target_gts_);
}

std::size_t EvalReport::n_failures() const noexcept {
  std::size_t n = 0;
  for (const auto& s : samples_) n += !s.failure.empty();
  return n;
}

std::map<std::string, std::size_t> EvalReport::failures_by_code() const {
  std::map<std::string, std::size_t> out;
  for (const auto& s : samples_) {
    if (!s.failure.empty()) ++out[s.failure];
  }
  return out;
}

nlohmann::json EvalReport::summary() const {
  nlohmann::json j;
  j["ciou"] = ciou();
  j["giou"] = samples_.empty() ? nlohmann::json(nullptr) : nlohmann::json(giou());
  const auto nacc = n_acc();
  j["n_acc"] = nacc ? nlohmann::json(*nacc) : nlohmann::json(nullptr);
  j["n_samples"] = samples_.size();
  j["n_failures"] = n_failures();
  j["by_failure_code"] = failures_by_code();
  return j;
}

void EvalReport::write_csv(std::ostream& out) const {
  out << "id,iou,gt_no_target,pred_no_target,failure\n";
  const auto precision = out.precision(17);
  for (const auto& s : samples_) {
    out << s.id << ',' << s.iou << ',' << int{s.gt_no_target} << ',' << int{s.pred_no_target}
        << ',' << s.failure << '\n';
  }
  out.precision(precision);
}

}  // namespace promptseg
