#include "soda/data/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "soda/errors.hpp"

namespace soda::data {

namespace {

cv::Mat to_mat(const Map2f& map) {
  cv::Mat m(map.rows(), map.cols(), CV_32FC1);
  std::copy(map.values().begin(), map.values().end(), m.ptr<float>());
  return m;
}

Map2f from_mat(const cv::Mat& m) {
  cv::Mat f;
  m.convertTo(f, CV_32FC1);
  if (!f.isContinuous()) f = f.clone();
  const float* p = f.ptr<float>();
  return Map2f(f.rows, f.cols, std::vector<float>(p, p + f.total()));
}

void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

}  // namespace

torch::Tensor read_rgb(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot decode image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  auto hwc = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8).clone();
  return hwc.permute({2, 0, 1}).to(torch::kFloat32).div_(255.0).contiguous();
}

Map2f read_gray(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (raw.empty()) throw IoError("cannot decode image " + path.string());
  cv::Mat f;
  raw.convertTo(f, CV_32FC1, 1.0 / 255.0);
  return from_mat(f);
}

uint8_t quantize(float v) {
  const float c = std::clamp(std::isfinite(v) ? v : 0.0f, 0.0f, 1.0f);
  return static_cast<uint8_t>(std::lround(c * 255.0f));
}

void write_gray_png(const std::filesystem::path& path, const Map2f& map) {
  cv::Mat out(map.rows(), map.cols(), CV_8UC1);
  auto v = map.values();
  for (std::size_t i = 0; i < v.size(); ++i) out.data[i] = quantize(v[i]);
  ensure_parent(path);
  if (!cv::imwrite(path.string(), out)) throw IoError("cannot write " + path.string());
}

void write_mask_png(const std::filesystem::path& path, const Mask2u8& mask) {
  cv::Mat out(mask.rows(), mask.cols(), CV_8UC1);
  auto v = mask.values();
  for (std::size_t i = 0; i < v.size(); ++i) out.data[i] = v[i] ? 255 : 0;
  ensure_parent(path);
  if (!cv::imwrite(path.string(), out)) throw IoError("cannot write " + path.string());
}

void write_rgb_png(const std::filesystem::path& path, const torch::Tensor& chw) {
  auto hwc = chw.detach()
                 .to(torch::kCPU, torch::kFloat32)
                 .clamp(0.0, 1.0)
                 .mul(255.0)
                 .round()
                 .to(torch::kUInt8)
                 .permute({1, 2, 0})
                 .contiguous();
  cv::Mat rgb(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3,
              hwc.data_ptr<uint8_t>());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  ensure_parent(path);
  if (!cv::imwrite(path.string(), bgr)) throw IoError("cannot write " + path.string());
}

Map2f resize_map(const Map2f& map, int rows, int cols) {
  if (map.rows() == rows && map.cols() == cols) return map;
  cv::Mat out;
  cv::resize(to_mat(map), out, cv::Size(cols, rows), 0, 0, cv::INTER_LINEAR);
  return from_mat(out);
}

torch::Tensor resize_image(const torch::Tensor& chw, int rows, int cols) {
  if (chw.size(1) == rows && chw.size(2) == cols) return chw;
  auto hwc = chw.detach().to(torch::kFloat32).permute({1, 2, 0}).contiguous();
  cv::Mat src(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_32FC3,
              hwc.data_ptr<float>());
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(cols, rows), 0, 0, cv::INTER_LINEAR);
  auto out = torch::from_blob(dst.data, {rows, cols, 3}, torch::kFloat32).clone();
  return out.permute({2, 0, 1}).contiguous();
}

bool is_image_file(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

}  // namespace soda::data
