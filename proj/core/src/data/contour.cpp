#include "soda/data/contour.hpp"

#include <algorithm>

#include "soda/tensor_grid.hpp"

namespace soda {

Map2f to_map(const torch::Tensor& plane) {
  auto t = plane.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  const auto rows = static_cast<int>(t.size(0)), cols = static_cast<int>(t.size(1));
  const float* p = t.data_ptr<float>();
  return Map2f(rows, cols, std::vector<float>(p, p + t.numel()));
}

torch::Tensor to_tensor(const Map2f& map) {
  auto t = torch::empty({map.rows(), map.cols()}, torch::kFloat32);
  std::copy(map.values().begin(), map.values().end(), t.data_ptr<float>());
  return t;
}

}  // namespace soda

namespace soda::data {

namespace {

template <bool Dilate>
Mask2u8 morph3x3(const Mask2u8& mask) {
  const int rows = mask.rows(), cols = mask.cols();
  Mask2u8 out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      unsigned char v = Dilate ? 0 : 1;
      for (int dr = -1; dr <= 1; ++dr) {
        const int rr = std::clamp(r + dr, 0, rows - 1);
        for (int dc = -1; dc <= 1; ++dc) {
          const int cc = std::clamp(c + dc, 0, cols - 1);
          const unsigned char m = mask(rr, cc) ? 1 : 0;
          v = Dilate ? std::max(v, m) : std::min(v, m);
        }
      }
      out(r, c) = v;
    }
  }
  return out;
}

}  // namespace

Mask2u8 binarize(const Map2f& map, float threshold) {
  Mask2u8 out(map.rows(), map.cols());
  auto src = map.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= threshold ? 1 : 0;
  return out;
}

Map2f to_float(const Mask2u8& mask) {
  Map2f out(mask.rows(), mask.cols());
  auto src = mask.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 1.0f : 0.0f;
  return out;
}

Mask2u8 dilate3x3(const Mask2u8& mask) { return morph3x3<true>(mask); }
Mask2u8 erode3x3(const Mask2u8& mask) { return morph3x3<false>(mask); }

Mask2u8 derive_contour(const Mask2u8& gt) {
  auto d = dilate3x3(gt);
  const auto e = erode3x3(gt);
  auto dv = d.values();
  auto ev = e.values();
  for (std::size_t i = 0; i < dv.size(); ++i) dv[i] = (dv[i] != ev[i]) ? 1 : 0;
  return d;
}

torch::Tensor derive_contour(const torch::Tensor& binary_gt) {
  return map_planes(binary_gt,
                    [](const Map2f& m) { return to_float(derive_contour(binarize(m))); });
}

}  // namespace soda::data
