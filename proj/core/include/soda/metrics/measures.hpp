#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "soda/grid.hpp"

namespace soda::metrics {

inline constexpr int kThresholds = 256;
/// beta^2 of the max F-measure.
inline constexpr double kFBetaSquared = 0.3;
/// beta^2 of the weighted F-measure.
inline constexpr double kWeightedFBetaSquared = 1.0;
inline constexpr double kWeightedFSigma = 5.0;
inline constexpr int kWeightedFKernel = 7;
/// Balance between object and region similarity in the S-measure.
inline constexpr double kStructureAlpha = 0.5;
/// MATLAB eps, used where the reference formulations regularise.
inline constexpr double kEps = 2.220446049250313e-16;

/// A prediction in [0,1] and a same-sized ground truth; gt pixels >= 0.5 are
/// foreground.
struct EvalPair {
  Map2f pred;
  Map2f gt;
};

double mae(const Map2f& pred, const Map2f& gt);

/// Threshold level of a prediction value: round(clamp(v,0,1) * 255).
int quantize_level(float v);

/// Per-image precision/recall at thresholds t = 0..255 where a pixel is
/// predicted positive when its level is >= t.
struct PrCurve {
  std::array<double, kThresholds> precision{};
  std::array<double, kThresholds> recall{};
  bool has_foreground = false;
};
PrCurve pr_curve(const Map2f& pred, const Map2f& gt);

double f_beta(double precision, double recall, double beta2 = kFBetaSquared);

struct FMaxResult {
  double f_max = 0.0;
  int best_threshold = 0;
  /// Dataset-mean (precision, recall) per threshold.
  std::vector<std::pair<double, double>> curve;
  std::size_t images = 0;
  std::size_t skipped_empty = 0;  // images without foreground, left out of P/R
};

/// Averages precision and recall over images first, then maximises F over
/// thresholds.
FMaxResult f_max(std::span<const EvalPair> pairs);

double s_measure(const Map2f& pred, const Map2f& gt);
double e_measure(const Map2f& pred, const Map2f& gt);
double weighted_f(const Map2f& pred, const Map2f& gt);

/// Euclidean distance of every pixel to the nearest foreground pixel of
/// `mask` and the row-major index of that pixel (exact, two-pass lower
/// envelope). Without foreground all distances are +inf and indices -1.
struct DistanceTransform {
  Grid<double> distance;
  Grid<int64_t> nearest;
};
DistanceTransform distance_to_foreground(const Mask2u8& mask);

}  // namespace soda::metrics
