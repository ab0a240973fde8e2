#pragma once

// Confidence-map post-processing and temporal filtering of trocar
// detections: candidate thresholding, median entry point, and the
// seven-frame position / orientation filters.

#include <Eigen/Core>

#include <cstdint>
#include <deque>
#include <vector>

#include "trocar_dock/geometry.hpp"

namespace trocar_dock {

/// Single-channel float raster, row-major, values in [0, 1].
class ConfidenceMap {
 public:
  using Storage = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  ConfidenceMap(int width, int height);
  explicit ConfidenceMap(Storage values);

  int width() const { return static_cast<int>(values_.cols()); }
  int height() const { return static_cast<int>(values_.rows()); }

  float at(int x, int y) const { return values_(y, x); }
  float& at(int x, int y) { return values_(y, x); }

  const Storage& values() const { return values_; }
  Storage& values() { return values_; }

  // Throws FormatError if any value is outside [0, 1] or not finite.
  void validate() const;

 private:
  Storage values_;
};

struct PixelCoord {
  int x = 0;
  int y = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
  friend auto operator<=>(const PixelCoord&, const PixelCoord&) = default;
};

struct TepEstimate {
  double u = 0.0;
  double v = 0.0;
  double confidence = 0.0;
  std::int64_t frame_index = 0;

  Vec2 pixel() const { return {u, v}; }
};

struct DetectionEstimate {
  TepEstimate tep;
  Vec3 z_axis = Vec3::UnitZ();
  bool valid = false;
};

/// Pixels with value >= 0.8 * max(map), in row-major scan order.
std::vector<PixelCoord> extract_candidates(const ConfidenceMap& map);

inline constexpr double kCandidateRatio = 0.8;

/// Per-coordinate median of the candidates (even counts average the middle pair).
TepEstimate tep_from_candidates(const std::vector<PixelCoord>& candidates);

/// extract_candidates followed by tep_from_candidates; confidence = map max.
TepEstimate tep_from_map(const ConfidenceMap& map, std::int64_t frame_index = 0);

/// Sliding window of the most recent valid detections.
class FilterWindow {
 public:
  static constexpr std::size_t kDefaultCapacity = 7;

  explicit FilterWindow(std::size_t capacity = kDefaultCapacity);

  // Invalid detections are ignored. Frame indices must strictly increase.
  void push(const DetectionEstimate& det);
  void clear() { entries_.clear(); }

  bool full() const { return entries_.size() == capacity_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<DetectionEstimate>& entries() const { return entries_; }

 private:
  std::size_t capacity_;
  std::deque<DetectionEstimate> entries_;
};

/// Median point, drop entries farther than a quarter population standard
/// deviation of the distances from it, average the rest. If nothing
/// survives the median point is returned. The result's frame_index is that
/// of the middle window entry.
TepEstimate temporal_filter_tep(const FilterWindow& window);

/// Markley average of the roll-free lifts of the window's axes, returned as
/// the averaged Z axis.
Vec3 temporal_filter_orientation(const FilterWindow& window);

double median_of(std::vector<double> values);

}  // namespace trocar_dock
