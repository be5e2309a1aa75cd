#pragma once

#include <span>

#include "soda/grid.hpp"

namespace soda::supervision {

/// Side of the foreground weighting window.
inline constexpr int kForegroundWindow = 31;

/// out[i] = max(in[i - radius .. i + radius]) clipped to the valid range,
/// which equals a replicate-padded window maximum. O(n) via a monotone queue.
void window_max_1d(std::span<const float> in, std::span<float> out, int radius);

/// Centered `window` x `window` maximum filter (window odd), separable
/// row/column passes.
Map2f window_max(const Map2f& map, int window = kForegroundWindow);

}  // namespace soda::supervision
