#include "soda/supervision/window_max.hpp"

#include <algorithm>
#include <vector>

#include "soda/errors.hpp"

namespace soda::supervision {

namespace {

// Strided variant shared by the row and column passes.
void sliding_max(const float* in, float* out, int n, std::ptrdiff_t stride, int radius,
                 std::vector<int>& queue) {
  queue.resize(static_cast<std::size_t>(n));
  int head = 0, tail = 0;  // live indices are queue[head..tail), values decreasing
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int hi = std::min(n - 1, i + radius);
    for (; next <= hi; ++next) {
      const float v = in[next * stride];
      while (tail > head && in[queue[tail - 1] * stride] <= v) --tail;
      queue[tail++] = next;
    }
    while (queue[head] < i - radius) ++head;
    out[i * stride] = in[queue[head] * stride];
  }
}

}  // namespace

void window_max_1d(std::span<const float> in, std::span<float> out, int radius) {
  if (in.size() != out.size()) throw ShapeError("window_max_1d: input/output length differ");
  if (radius < 0) throw ConfigError("window_max_1d: negative radius");
  std::vector<int> queue;
  sliding_max(in.data(), out.data(), static_cast<int>(in.size()), 1, radius, queue);
}

Map2f window_max(const Map2f& map, int window) {
  if (window < 1 || window % 2 == 0) throw ConfigError("window_max: window must be odd and >= 1");
  const int radius = window / 2;
  const int rows = map.rows(), cols = map.cols();
  Map2f rowmax(rows, cols), out(rows, cols);
  std::vector<int> queue;
  const float* src = map.values().data();
  float* tmp = rowmax.values().data();
  float* dst = out.values().data();
  for (int r = 0; r < rows; ++r)
    sliding_max(src + static_cast<std::ptrdiff_t>(r) * cols, tmp + static_cast<std::ptrdiff_t>(r) * cols,
                cols, 1, radius, queue);
  for (int c = 0; c < cols; ++c) sliding_max(tmp + c, dst + c, rows, cols, radius, queue);
  return out;
}

}  // namespace soda::supervision
