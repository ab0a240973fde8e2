#include "trocar_dock/perception.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trocar_dock/errors.hpp"

namespace trocar_dock {

ConfidenceMap::ConfidenceMap(int width, int height) {
  if (width <= 0 || height <= 0) {
    throw PreconditionError("ConfidenceMap: dimensions must be positive");
  }
  values_ = Storage::Zero(height, width);
}

ConfidenceMap::ConfidenceMap(Storage values) : values_(std::move(values)) {
  if (values_.rows() <= 0 || values_.cols() <= 0) {
    throw PreconditionError("ConfidenceMap: dimensions must be positive");
  }
}

void ConfidenceMap::validate() const {
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    const float v = values_.data()[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw FormatError("ConfidenceMap: value " + std::to_string(v) + " outside [0, 1] at index " +
                        std::to_string(i));
    }
  }
}

std::vector<PixelCoord> extract_candidates(const ConfidenceMap& map) {
  const float peak = map.values().maxCoeff();
  if (!(peak > 0.0f)) {
    throw NoDetection("extract_candidates: confidence map has no positive value");
  }
  const double threshold = kCandidateRatio * static_cast<double>(peak);
  std::vector<PixelCoord> out;
  for (int y = 0; y < map.height(); ++y) {
    const auto row = map.values().row(y);
    if (static_cast<double>(row.maxCoeff()) < threshold) continue;
    for (int x = 0; x < map.width(); ++x) {
      if (static_cast<double>(row(x)) >= threshold) out.push_back({x, y});
    }
  }
  return out;
}

double median_of(std::vector<double> values) {
  if (values.empty()) throw EmptyInput("median_of: empty input");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

TepEstimate tep_from_candidates(const std::vector<PixelCoord>& candidates) {
  if (candidates.empty()) {
    throw NoDetection("tep_from_candidates: no candidate pixels");
  }
  std::vector<double> xs;
  std::vector<double> ys;
  xs.reserve(candidates.size());
  ys.reserve(candidates.size());
  for (const auto& c : candidates) {
    xs.push_back(c.x);
    ys.push_back(c.y);
  }
  TepEstimate out;
  out.u = median_of(std::move(xs));
  out.v = median_of(std::move(ys));
  return out;
}

TepEstimate tep_from_map(const ConfidenceMap& map, std::int64_t frame_index) {
  TepEstimate out = tep_from_candidates(extract_candidates(map));
  out.confidence = map.values().maxCoeff();
  out.frame_index = frame_index;
  return out;
}

FilterWindow::FilterWindow(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw PreconditionError("FilterWindow: capacity must be positive");
}

void FilterWindow::push(const DetectionEstimate& det) {
  if (!det.valid) return;
  if (!entries_.empty() && det.tep.frame_index <= entries_.back().tep.frame_index) {
    throw PreconditionError("FilterWindow: frame indices must strictly increase");
  }
  entries_.push_back(det);
  if (entries_.size() > capacity_) entries_.pop_front();
}

namespace {
void require_full(const FilterWindow& window, const char* who) {
  if (!window.full()) {
    throw InsufficientHistory(std::string(who) + ": window holds " + std::to_string(window.size()) +
                              " of " + std::to_string(window.capacity()) + " detections");
  }
}
}  // namespace

TepEstimate temporal_filter_tep(const FilterWindow& window) {
  require_full(window, "temporal_filter_tep");
  const auto& entries = window.entries();
  const std::size_t n = entries.size();

  std::vector<double> us;
  std::vector<double> vs;
  for (const auto& e : entries) {
    us.push_back(e.tep.u);
    vs.push_back(e.tep.v);
  }
  const Vec2 median(median_of(us), median_of(vs));

  std::vector<double> dist(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dist[i] = (entries[i].tep.pixel() - median).norm();
    mean += dist[i];
  }
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double d : dist) var += (d - mean) * (d - mean);
  const double sigma = std::sqrt(var / static_cast<double>(n));
  const double cutoff = 0.25 * sigma;

  Vec2 sum = Vec2::Zero();
  double conf = 0.0;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (dist[i] > cutoff) continue;
    sum += entries[i].tep.pixel();
    conf += entries[i].tep.confidence;
    ++kept;
  }

  TepEstimate out;
  out.frame_index = entries[n / 2].tep.frame_index;
  if (kept == 0) {
    out.u = median.x();
    out.v = median.y();
    for (const auto& e : entries) conf += e.tep.confidence;
    out.confidence = conf / static_cast<double>(n);
    return out;
  }
  out.u = sum.x() / static_cast<double>(kept);
  out.v = sum.y() / static_cast<double>(kept);
  out.confidence = conf / static_cast<double>(kept);
  return out;
}

Vec3 temporal_filter_orientation(const FilterWindow& window) {
  require_full(window, "temporal_filter_orientation");
  std::vector<Quat> lifts;
  lifts.reserve(window.size());
  for (const auto& e : window.entries()) lifts.push_back(quaternion_from_z_axis(e.z_axis));
  return z_axis_of(average_quaternions<double>(lifts));
}

}  // namespace trocar_dock
