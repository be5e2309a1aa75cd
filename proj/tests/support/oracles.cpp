#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "soda/tensor_grid.hpp"

namespace soda::oracle {
namespace {

constexpr double kMatlabEps = 2.220446049250313e-16;

std::vector<long double> values(const torch::Tensor& t) {
  auto flat = t.detach().to(torch::kDouble).contiguous().reshape({-1});
  const double* p = flat.data_ptr<double>();
  return {p, p + flat.numel()};
}

int64_t per_sample(const torch::Tensor& t) { return t.numel() / t.size(0); }

bool fg(float v) { return v >= 0.5F; }

}  // namespace

Map2f random_binary(int rows, int cols, std::mt19937_64& rng, double p) {
  std::bernoulli_distribution coin(p);
  Map2f m(rows, cols);
  for (auto& v : m.values()) v = coin(rng) ? 1.F : 0.F;
  return m;
}

Map2f random_rectangles(int rows, int cols, std::mt19937_64& rng, int max_rects) {
  Map2f m(rows, cols);
  std::uniform_int_distribution<int> count(1, max_rects);
  const int n = count(rng);
  for (int k = 0; k < n; ++k) {
    std::uniform_int_distribution<int> h(2, std::max(2, rows / 2)), w(2, std::max(2, cols / 2));
    const int rh = h(rng), rw = w(rng);
    std::uniform_int_distribution<int> r0(0, rows - rh), c0(0, cols - rw);
    const int top = r0(rng), left = c0(rng);
    for (int r = top; r < top + rh; ++r)
      for (int c = left; c < left + rw; ++c) m(r, c) = 1.F;
  }
  return m;
}

Map2f noisy_prediction(const Map2f& gt, std::mt19937_64& rng, double noise) {
  std::normal_distribution<double> n(0.0, noise);
  Map2f out(gt.rows(), gt.cols());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    out.values()[i] = static_cast<float>(std::clamp(gt.values()[i] + n(rng), 0.0, 1.0));
  }
  return out;
}

Map2f uniform_map(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.F, 1.F);
  Map2f m(rows, cols);
  for (auto& v : m.values()) v = u(rng);
  return m;
}

Map2f window_max(const Map2f& map, int window) {
  const int h = window / 2;
  Map2f out(map.rows(), map.cols());
  for (int r = 0; r < map.rows(); ++r) {
    for (int c = 0; c < map.cols(); ++c) {
      float best = -std::numeric_limits<float>::infinity();
      for (int i = r - h; i <= r + h; ++i) {
        for (int j = c - h; j <= c + h; ++j) {
          if (i < 0 || j < 0 || i >= map.rows() || j >= map.cols()) continue;
          best = std::max(best, map(i, j));
        }
      }
      out(r, c) = best;
    }
  }
  return out;
}

long double sigmoid(long double x) { return 1.0L / (1.0L + std::exp(-x)); }

long double weighted_bce(const torch::Tensor& logits, const torch::Tensor& gt,
                         const torch::Tensor& alpha) {
  const auto x = values(logits), g = values(gt), a = values(alpha);
  long double sum = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double p = sigmoid(x[i]);
    sum += a[i] * (-g[i] * std::log(p) - (1 - g[i]) * std::log(1 - p));
  }
  return sum / x.size();
}

long double weighted_iou(const torch::Tensor& probs, const torch::Tensor& gt,
                         const torch::Tensor& alpha, long double eps) {
  const auto p = values(probs), g = values(gt), a = values(alpha);
  const int64_t n = per_sample(probs), batch = probs.size(0);
  long double total = 0;
  for (int64_t b = 0; b < batch; ++b) {
    long double inter = 0, uni = 0;
    for (int64_t i = b * n; i < (b + 1) * n; ++i) {
      inter += a[i] * p[i] * g[i];
      uni += a[i] * (p[i] + g[i] - p[i] * g[i]);
    }
    total += 1 - (inter + eps) / (uni + eps);
  }
  return total / batch;
}

long double weighted_l1(const torch::Tensor& probs, const torch::Tensor& gt,
                        const torch::Tensor& alpha) {
  const auto p = values(probs), g = values(gt), a = values(alpha);
  long double sum = 0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += a[i] * std::fabs(p[i] - g[i]);
  return sum / p.size();
}

long double dice(const torch::Tensor& probs, const torch::Tensor& gt, long double smooth) {
  const auto p = values(probs), g = values(gt);
  const int64_t n = per_sample(probs), batch = probs.size(0);
  long double total = 0;
  for (int64_t b = 0; b < batch; ++b) {
    long double pg = 0, sp = 0, sg = 0;
    for (int64_t i = b * n; i < (b + 1) * n; ++i) {
      pg += p[i] * g[i];
      sp += p[i];
      sg += g[i];
    }
    total += 1 - (2 * pg + smooth) / (sp + sg + smooth);
  }
  return total / batch;
}

double mae(const Map2f& pred, const Map2f& gt) {
  long double sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    sum += std::fabs(static_cast<long double>(pred.values()[i]) - gt.values()[i]);
  return static_cast<double>(sum / pred.size());
}

Confusion confusion(const Map2f& pred, const Map2f& gt, int t) {
  Confusion c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(static_cast<double>(pred.values()[i]), 0.0, 1.0);
    const bool positive = std::round(p * 255.0) >= t;
    const bool truth = fg(gt.values()[i]);
    if (positive && truth) ++c.tp;
    if (positive && !truth) ++c.fp;
    if (!positive && truth) ++c.fn;
  }
  return c;
}

double f_max(const std::vector<std::pair<Map2f, Map2f>>& pairs) {
  double best = 0.0;
  for (int t = 0; t < 256; ++t) {
    double sp = 0.0, sr = 0.0;
    int counted = 0;
    for (const auto& [pred, gt] : pairs) {
      const auto c = confusion(pred, gt, t);
      if (c.tp + c.fn == 0) continue;
      ++counted;
      sp += (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
      sr += static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    }
    if (counted == 0) continue;
    const double p = sp / counted, r = sr / counted;
    const double denom = 0.3 * p + r;
    const double f = denom > 0 ? (1.0 + 0.3) * p * r / denom : 0.0;
    best = std::max(best, f);
  }
  return best;
}

namespace {

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / v.size();
}

double object_score(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double x = mean(v);
  double ss = 0;
  for (double y : v) ss += (y - x) * (y - x);
  const double sigma = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
  return 2.0 * x / (x * x + 1.0 + sigma + kMatlabEps);
}

double ssim(const std::vector<double>& p, const std::vector<double>& g) {
  const double n = p.size();
  if (n == 0) return 0.0;
  const double x = mean(p), y = mean(g);
  double sx = 0, sy = 0, sxy = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sx += (p[i] - x) * (p[i] - x);
    sy += (g[i] - y) * (g[i] - y);
    sxy += (p[i] - x) * (g[i] - y);
  }
  sx /= (n - 1 + kMatlabEps);
  sy /= (n - 1 + kMatlabEps);
  sxy /= (n - 1 + kMatlabEps);
  const double alpha = 4 * x * y * sxy;
  const double beta = (x * x + y * y) * (sx + sy);
  if (alpha != 0) return alpha / (beta + kMatlabEps);
  if (beta == 0) return 1.0;
  return 0.0;
}

}  // namespace

double s_measure(const Map2f& pred, const Map2f& gt) {
  const int rows = gt.rows(), cols = gt.cols();
  std::vector<double> all_pred, fg_vals, bg_vals;
  double gt_sum = 0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double p = pred(r, c);
      all_pred.push_back(p);
      if (fg(gt(r, c))) {
        gt_sum += 1;
        fg_vals.push_back(p);
      } else {
        bg_vals.push_back(1.0 - p);
      }
    }
  }
  const double y = gt_sum / (rows * cols);
  if (y == 0) return 1.0 - mean(all_pred);
  if (y == 1) return mean(all_pred);

  const double s_obj = y * object_score(fg_vals) + (1 - y) * object_score(bg_vals);

  // Centroid with 1-based coordinates, rounded half away from zero.
  std::vector<double> col_sum(cols, 0.0), row_sum(rows, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (fg(gt(r, c))) {
        col_sum[c] += 1;
        row_sum[r] += 1;
      }
  double sx = 0, sy = 0;
  for (int c = 0; c < cols; ++c) sx += col_sum[c] * (c + 1);
  for (int r = 0; r < rows; ++r) sy += row_sum[r] * (r + 1);
  const int X = static_cast<int>(std::round(sx / gt_sum));
  const int Y = static_cast<int>(std::round(sy / gt_sum));

  // Quadrants in MATLAB index ranges: LT = (1:Y, 1:X), RT = (1:Y, X+1:end),
  // LB = (Y+1:end, 1:X), RB = (Y+1:end, X+1:end).
  std::vector<double> p[4], g[4];
  for (int r = 1; r <= rows; ++r) {
    for (int c = 1; c <= cols; ++c) {
      const int q = (r <= Y ? 0 : 2) + (c <= X ? 0 : 1);
      p[q].push_back(pred(r - 1, c - 1));
      g[q].push_back(fg(gt(r - 1, c - 1)) ? 1.0 : 0.0);
    }
  }
  const double area = static_cast<double>(rows) * cols;
  const double w1 = X * Y / area;
  const double w2 = (cols - X) * Y / area;
  const double w3 = X * (rows - Y) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  const double s_reg = w1 * ssim(p[0], g[0]) + w2 * ssim(p[1], g[1]) + w3 * ssim(p[2], g[2]) +
                       w4 * ssim(p[3], g[3]);
  const double q = 0.5 * s_obj + 0.5 * s_reg;
  return q < 0 ? 0.0 : q;
}

double e_measure(const Map2f& pred, const Map2f& gt) {
  const std::size_t n = gt.size();
  double mp = 0;
  for (float v : pred.values()) mp += v;
  mp /= n;
  double th = 2 * mp;
  if (th > 1) th = 1;
  std::vector<double> fm(n), g(n);
  double gsum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = pred.values()[i];
    fm[i] = (p >= th && p > 0) ? 1.0 : 0.0;
    g[i] = fg(gt.values()[i]) ? 1.0 : 0.0;
    gsum += g[i];
  }
  std::vector<double> enhanced(n);
  if (gsum == 0) {
    for (std::size_t i = 0; i < n; ++i) enhanced[i] = 1.0 - fm[i];
  } else if (gsum == n) {
    enhanced = fm;
  } else {
    const double mu_fm = mean(fm), mu_gt = mean(g);
    for (std::size_t i = 0; i < n; ++i) {
      const double af = fm[i] - mu_fm, ag = g[i] - mu_gt;
      const double align = 2.0 * (ag * af) / (ag * ag + af * af + kMatlabEps);
      enhanced[i] = (align + 1) * (align + 1) / 4;
    }
  }
  double sum = 0;
  for (double v : enhanced) sum += v;
  return sum / n;
}

Grid<double> distance_to_foreground(const Mask2u8& mask) {
  Grid<double> out(mask.rows(), mask.cols(), std::numeric_limits<double>::infinity());
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c)
      for (int i = 0; i < mask.rows(); ++i)
        for (int j = 0; j < mask.cols(); ++j)
          if (mask(i, j)) {
            const double d = std::hypot(double(r - i), double(c - j));
            out(r, c) = std::min(out(r, c), d);
          }
  return out;
}

std::optional<double> weighted_f(const Map2f& pred, const Map2f& gt) {
  const int rows = gt.rows(), cols = gt.cols();
  Grid<double> e(rows, cols), g(rows, cols);
  double gsum = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      g(r, c) = fg(gt(r, c)) ? 1.0 : 0.0;
      gsum += g(r, c);
      e(r, c) = std::fabs(static_cast<double>(pred(r, c)) - g(r, c));
    }
  if (gsum == 0) return 0.0;

  Grid<double> dst(rows, cols, 0.0), et = e;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (g(r, c) == 1.0) continue;
      long best = std::numeric_limits<long>::max();
      std::vector<double> errs;
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
          if (g(i, j) != 1.0) continue;
          const long d2 = long(r - i) * (r - i) + long(c - j) * (c - j);
          if (d2 < best) {
            best = d2;
            errs = {e(i, j)};
          } else if (d2 == best) {
            errs.push_back(e(i, j));
          }
        }
      for (double v : errs)
        if (v != errs.front()) return std::nullopt;
      dst(r, c) = std::sqrt(static_cast<double>(best));
      et(r, c) = errs.front();
    }
  }

  double k[7][7], ksum = 0;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) {
      k[i][j] = std::exp(-((i - 3) * (i - 3) + (j - 3) * (j - 3)) / (2.0 * 25.0));
      ksum += k[i][j];
    }
  for (auto& row : k)
    for (double& v : row) v /= ksum;

  double tpw = gsum, fpw = 0, ew_fg = 0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double ea = 0;
      for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) {
          const int rr = r + i - 3, cc = c + j - 3;
          if (rr >= 0 && rr < rows && cc >= 0 && cc < cols) ea += k[i][j] * et(rr, cc);
        }
      double min_e_ea = e(r, c);
      if (g(r, c) == 1.0 && ea < e(r, c)) min_e_ea = ea;
      const double b = g(r, c) == 1.0 ? 1.0 : 2.0 - std::exp(std::log(1 - 0.5) / 5 * dst(r, c));
      const double ew = min_e_ea * b;
      if (g(r, c) == 1.0) {
        tpw -= ew;
        ew_fg += ew;
      } else {
        fpw += ew;
      }
    }
  }
  const double R = 1 - ew_fg / gsum;
  const double P = tpw / (kMatlabEps + tpw + fpw);
  return 2 * R * P / (kMatlabEps + R + P);
}

Mask2u8 rasterize_polygon(const data::Polygon& poly, int rows, int cols) {
  Mask2u8 m(rows, cols);
  const std::size_t n = poly.xy.size() / 2;
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      bool inside = false;
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double xi = poly.xy[2 * i], yi = poly.xy[2 * i + 1];
        const double xj = poly.xy[2 * j], yj = poly.xy[2 * j + 1];
        if ((yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi) {
          inside = !inside;
        }
      }
      m(y, x) = inside ? 1 : 0;
    }
  }
  return m;
}

std::vector<data::SaliencySample> synthetic_samples(int n, int size, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.F, 1.F);
  std::vector<data::SaliencySample> out;
  for (int k = 0; k < n; ++k) {
    Map2f gt(size, size);
    const float cy = size * (0.3F + 0.4F * u(rng)), cx = size * (0.3F + 0.4F * u(rng));
    const float ry = size * (0.12F + 0.15F * u(rng)), rx = size * (0.12F + 0.15F * u(rng));
    const bool ellipse = k % 2 == 0;
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        const float dy = (r + 0.5F - cy) / ry, dx = (c + 0.5F - cx) / rx;
        const bool in = ellipse ? dy * dy + dx * dx <= 1.F : std::fabs(dy) <= 1.F && std::fabs(dx) <= 1.F;
        gt(r, c) = in ? 1.F : 0.F;
      }
    }
    auto image = torch::empty({3, size, size});
    auto acc = image.accessor<float, 3>();
    const float fg_color[3] = {0.85F + 0.1F * u(rng), 0.3F * u(rng), 0.2F + 0.2F * u(rng)};
    const float bg_color[3] = {0.2F * u(rng), 0.3F + 0.3F * u(rng), 0.5F + 0.3F * u(rng)};
    for (int ch = 0; ch < 3; ++ch)
      for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
          const float base = gt(r, c) > 0.5F ? fg_color[ch] : bg_color[ch];
          acc[ch][r][c] = std::clamp(base + 0.1F * (u(rng) - 0.5F), 0.F, 1.F);
        }
    out.push_back(data::prepare(image, gt, {size, size}, "synthetic_" + std::to_string(k)));
  }
  return out;
}

}  // namespace soda::oracle
