#include "soda/metrics/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "soda/errors.hpp"

namespace soda::metrics {
namespace {

void require_same_shape(const Map2f& pred, const Map2f& gt, const char* what) {
  if (!pred.same_shape(gt) || pred.empty()) {
    throw ShapeError(std::string(what) + ": prediction " + std::to_string(pred.rows()) + "x" +
                     std::to_string(pred.cols()) + " vs ground truth " +
                     std::to_string(gt.rows()) + "x" + std::to_string(gt.cols()));
  }
}

bool is_fg(float g) { return g >= 0.5F; }

double clamp01(float v) { return std::clamp(static_cast<double>(v), 0.0, 1.0); }

// Mean and sample standard deviation (N-1); a single value has std 0.
std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

double object_score(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const auto [x, sigma] = mean_std(values);
  return 2.0 * x / (x * x + 1.0 + sigma + kEps);
}

double s_object(const Map2f& pred, const Map2f& gt, double fg_ratio) {
  std::vector<double> fg, bg;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = clamp01(pred.values()[i]);
    if (is_fg(gt.values()[i])) {
      fg.push_back(p);
    } else {
      bg.push_back(1.0 - p);
    }
  }
  return fg_ratio * object_score(fg) + (1.0 - fg_ratio) * object_score(bg);
}

double ssim_block(const Map2f& pred, const Map2f& gt, int r0, int r1, int c0, int c1) {
  const int n = (r1 - r0) * (c1 - c0);
  if (n <= 0) return 0.0;
  double sx = 0.0, sy = 0.0;
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) {
      sx += clamp01(pred(r, c));
      sy += is_fg(gt(r, c)) ? 1.0 : 0.0;
    }
  }
  const double mx = sx / n, my = sy / n;
  double vx = 0.0, vy = 0.0, cxy = 0.0;
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) {
      const double dx = clamp01(pred(r, c)) - mx;
      const double dy = (is_fg(gt(r, c)) ? 1.0 : 0.0) - my;
      vx += dx * dx;
      vy += dy * dy;
      cxy += dx * dy;
    }
  }
  const double denom = n - 1 + kEps;
  vx /= denom;
  vy /= denom;
  cxy /= denom;
  const double alpha = 4.0 * mx * my * cxy;
  const double beta = (mx * mx + my * my) * (vx + vy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  return beta == 0.0 ? 1.0 : 0.0;
}

double s_region(const Map2f& pred, const Map2f& gt) {
  const int rows = gt.rows(), cols = gt.cols();
  double total = 0.0, wx = 0.0, wy = 0.0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!is_fg(gt(r, c))) continue;
      total += 1.0;
      wx += c + 1;
      wy += r + 1;
    }
  }
  // 1-based centroid; the top-left block spans rows [0,y) and columns [0,x).
  const int x = total > 0 ? static_cast<int>(std::round(wx / total))
                          : static_cast<int>(std::round(cols / 2.0));
  const int y = total > 0 ? static_cast<int>(std::round(wy / total))
                          : static_cast<int>(std::round(rows / 2.0));
  const double area = static_cast<double>(rows) * cols;
  const double w1 = static_cast<double>(x) * y / area;
  const double w2 = static_cast<double>(cols - x) * y / area;
  const double w3 = static_cast<double>(x) * (rows - y) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  return w1 * ssim_block(pred, gt, 0, y, 0, x) + w2 * ssim_block(pred, gt, 0, y, x, cols) +
         w3 * ssim_block(pred, gt, y, rows, 0, x) + w4 * ssim_block(pred, gt, y, rows, x, cols);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (q - i)^2 + f[i] over the finite samples of f.
void envelope_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& arg) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
          (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates everywhere.
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  d.assign(n, kInf);
  arg.assign(n, -1);
  if (k < 0) return;
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
    arg[q] = v[j];
  }
}

Grid<double> gaussian_kernel(int size, double sigma) {
  Grid<double> k(size, size);
  const int h = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double y = i - h, x = j - h;
      k(i, j) = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      sum += k(i, j);
    }
  }
  for (auto& v : k.values()) v /= sum;
  return k;
}

}  // namespace

double mae(const Map2f& pred, const Map2f& gt) {
  require_same_shape(pred, gt, "mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sum += std::abs(clamp01(pred.values()[i]) - clamp01(gt.values()[i]));
  }
  return sum / static_cast<double>(pred.size());
}

int quantize_level(float v) { return static_cast<int>(std::lround(clamp01(v) * 255.0)); }

PrCurve pr_curve(const Map2f& pred, const Map2f& gt) {
  require_same_shape(pred, gt, "pr_curve");
  std::array<double, kThresholds> hist_fg{}, hist_bg{};
  double n_fg = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int q = quantize_level(pred.values()[i]);
    if (is_fg(gt.values()[i])) {
      hist_fg[q] += 1.0;
      n_fg += 1.0;
    } else {
      hist_bg[q] += 1.0;
    }
  }
  PrCurve curve;
  curve.has_foreground = n_fg > 0;
  double tp = 0.0, fp = 0.0;
  for (int t = kThresholds - 1; t >= 0; --t) {
    tp += hist_fg[t];
    fp += hist_bg[t];
    curve.precision[t] = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
    curve.recall[t] = n_fg > 0 ? tp / n_fg : 0.0;
  }
  return curve;
}

double f_beta(double precision, double recall, double beta2) {
  const double denom = beta2 * precision + recall;
  return denom > 0 ? (1.0 + beta2) * precision * recall / denom : 0.0;
}

FMaxResult f_max(std::span<const EvalPair> pairs) {
  FMaxResult result;
  std::array<double, kThresholds> p{}, r{};
  std::size_t counted = 0;
  for (const auto& pair : pairs) {
    ++result.images;
    const auto curve = pr_curve(pair.pred, pair.gt);
    if (!curve.has_foreground) {
      ++result.skipped_empty;
      continue;
    }
    ++counted;
    for (int t = 0; t < kThresholds; ++t) {
      p[t] += curve.precision[t];
      r[t] += curve.recall[t];
    }
  }
  result.curve.resize(kThresholds);
  for (int t = 0; t < kThresholds; ++t) {
    const double mp = counted ? p[t] / counted : 0.0;
    const double mr = counted ? r[t] / counted : 0.0;
    result.curve[t] = {mp, mr};
    const double f = f_beta(mp, mr);
    if (f > result.f_max) {
      result.f_max = f;
      result.best_threshold = t;
    }
  }
  return result;
}

double s_measure(const Map2f& pred, const Map2f& gt) {
  require_same_shape(pred, gt, "s_measure");
  double fg = 0.0, mean_pred = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    fg += is_fg(gt.values()[i]) ? 1.0 : 0.0;
    mean_pred += clamp01(pred.values()[i]);
  }
  const double n = static_cast<double>(gt.size());
  const double y = fg / n;
  mean_pred /= n;
  if (fg == 0.0) return 1.0 - mean_pred;
  if (fg == n) return mean_pred;
  const double q = kStructureAlpha * s_object(pred, gt, y) +
                   (1.0 - kStructureAlpha) * s_region(pred, gt);
  return std::max(q, 0.0);
}

double e_measure(const Map2f& pred, const Map2f& gt) {
  require_same_shape(pred, gt, "e_measure");
  const std::size_t n = gt.size();
  double mean_pred = 0.0;
  for (float v : pred.values()) mean_pred += clamp01(v);
  mean_pred /= static_cast<double>(n);
  const double threshold = std::min(2.0 * mean_pred, 1.0);
  std::vector<double> fm(n), g(n);
  double fg = 0.0, mean_fm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = clamp01(pred.values()[i]);
    fm[i] = (p >= threshold && p > 0.0) ? 1.0 : 0.0;
    g[i] = is_fg(gt.values()[i]) ? 1.0 : 0.0;
    fg += g[i];
    mean_fm += fm[i];
  }
  mean_fm /= static_cast<double>(n);
  double sum = 0.0;
  if (fg == 0.0) {
    for (double v : fm) sum += 1.0 - v;
  } else if (fg == static_cast<double>(n)) {
    for (double v : fm) sum += v;
  } else {
    const double mean_g = fg / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double af = fm[i] - mean_fm;
      const double ag = g[i] - mean_g;
      const double align = 2.0 * ag * af / (ag * ag + af * af + kEps);
      sum += (align + 1.0) * (align + 1.0) / 4.0;
    }
  }
  return sum / static_cast<double>(n);
}

DistanceTransform distance_to_foreground(const Mask2u8& mask) {
  const int rows = mask.rows(), cols = mask.cols();
  // Column pass: squared distance to the nearest foreground row per column.
  Grid<double> col_d(rows, cols, kInf);
  Grid<int> col_row(rows, cols, -1);
  std::vector<double> f(rows), d;
  std::vector<int> arg;
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) f[r] = mask(r, c) ? 0.0 : kInf;
    envelope_1d(f, d, arg);
    for (int r = 0; r < rows; ++r) {
      col_d(r, c) = d[r];
      col_row(r, c) = arg[r];
    }
  }
  DistanceTransform out{Grid<double>(rows, cols, kInf), Grid<int64_t>(rows, cols, -1)};
  f.resize(cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) f[c] = col_d(r, c);
    envelope_1d(f, d, arg);
    for (int c = 0; c < cols; ++c) {
      if (arg[c] < 0) continue;
      out.distance(r, c) = std::sqrt(d[c]);
      out.nearest(r, c) = static_cast<int64_t>(col_row(r, arg[c])) * cols + arg[c];
    }
  }
  return out;
}

double weighted_f(const Map2f& pred, const Map2f& gt) {
  require_same_shape(pred, gt, "weighted_f");
  const int rows = gt.rows(), cols = gt.cols();
  Mask2u8 fg(rows, cols);
  Grid<double> err(rows, cols);
  double n_fg = 0.0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      fg(r, c) = is_fg(gt(r, c)) ? 1 : 0;
      n_fg += fg(r, c);
      err(r, c) = std::abs(clamp01(pred(r, c)) - fg(r, c));
    }
  }
  if (n_fg == 0.0) return 0.0;

  const auto dt = distance_to_foreground(fg);
  // Background pixels take the error of their nearest foreground pixel.
  Grid<double> et = err;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!fg(r, c)) et(r, c) = err.values()[static_cast<std::size_t>(dt.nearest(r, c))];
    }
  }
  const auto kernel = gaussian_kernel(kWeightedFKernel, kWeightedFSigma);
  const int h = kWeightedFKernel / 2;
  double tp = n_fg, fp = 0.0, fg_err = 0.0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double ew = err(r, c);
      if (fg(r, c)) {
        double ea = 0.0;
        for (int i = -h; i <= h; ++i) {
          for (int j = -h; j <= h; ++j) {
            const int rr = r + i, cc = c + j;
            if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
            ea += kernel(i + h, j + h) * et(rr, cc);
          }
        }
        ew = std::min(ew, ea);
        tp -= ew;
        fg_err += ew;
      } else {
        const double importance = 2.0 - std::exp(std::log(0.5) / 5.0 * dt.distance(r, c));
        fp += ew * importance;
      }
    }
  }
  const double recall = 1.0 - fg_err / n_fg;
  const double precision = tp / (kEps + tp + fp);
  return (1.0 + kWeightedFBetaSquared) * recall * precision /
         (kEps + kWeightedFBetaSquared * precision + recall);
}

}  // namespace soda::metrics
