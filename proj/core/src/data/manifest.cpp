#include "soda/data/manifest.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "soda/data/contour.hpp"
#include "soda/data/image_io.hpp"
#include "soda/errors.hpp"

namespace fs = std::filesystem;

namespace soda::data {

std::string_view to_string(Augmentation a) {
  switch (a) {
    case Augmentation::none: return "none";
    case Augmentation::hflip: return "hflip";
    case Augmentation::vflip: return "vflip";
  }
  return "none";
}

Augmentation parse_augmentation(std::string_view s) {
  if (s == "none") return Augmentation::none;
  if (s == "hflip") return Augmentation::hflip;
  if (s == "vflip") return Augmentation::vflip;
  throw ConfigError("unknown augmentation '" + std::string(s) + "'");
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::pretrain: return "pretrain";
    case Phase::finetune: return "finetune";
    case Phase::eval: return "eval";
  }
  return "eval";
}

Phase parse_phase(std::string_view s) {
  if (s == "pretrain") return Phase::pretrain;
  if (s == "finetune") return Phase::finetune;
  if (s == "eval") return Phase::eval;
  throw ConfigError("unknown phase '" + std::string(s) + "'");
}

std::vector<ManifestEntry> expand_with_flips(const std::vector<ManifestEntry>& sources) {
  std::vector<ManifestEntry> out;
  out.reserve(sources.size() * 3);
  for (const auto& s : sources) {
    for (auto aug : {Augmentation::none, Augmentation::hflip, Augmentation::vflip}) {
      auto e = s;
      e.aug = aug;
      out.push_back(std::move(e));
    }
  }
  return out;
}

namespace {

std::string relative_to(const fs::path& p, const fs::path& base) {
  if (p.is_relative()) return p.string();
  auto rel = p.lexically_relative(base);
  if (rel.empty() || *rel.begin() == "..") return p.string();
  return rel.string();
}

std::string resolve(const std::string& p, const fs::path& base) {
  fs::path path(p);
  return path.is_relative() ? (base / path).lexically_normal().string() : p;
}

fs::path meta_path(const fs::path& path) { return fs::path(path.string() + ".meta.json"); }

}  // namespace

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto base = fs::absolute(path).parent_path();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const auto& e : manifest.entries) {
    nlohmann::json line{{"image", relative_to(e.image, base)},
                        {"gt", relative_to(e.gt, base)},
                        {"contour", relative_to(e.contour, base)},
                        {"aug", to_string(e.aug)}};
    out << line.dump() << '\n';
  }
  std::ofstream meta(meta_path(path));
  meta << nlohmann::json{{"phase", to_string(manifest.phase)},
                         {"source", manifest.source},
                         {"entries", manifest.entries.size()}}
              .dump(2)
       << '\n';
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const auto base = fs::absolute(path).parent_path();
  DatasetManifest manifest;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      manifest.entries.push_back({resolve(j.at("image").get<std::string>(), base),
                                  resolve(j.at("gt").get<std::string>(), base),
                                  resolve(j.at("contour").get<std::string>(), base),
                                  parse_augmentation(j.value("aug", "none"))});
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (std::ifstream meta(meta_path(path)); meta) {
    const auto j = nlohmann::json::parse(meta);
    manifest.phase = parse_phase(j.value("phase", "finetune"));
    manifest.source = j.value("source", "");
  }
  return manifest;
}

ValidationReport validate_manifest(const DatasetManifest& manifest) {
  ValidationReport report;
  for (const auto& e : manifest.entries) {
    ++report.checked;
    const std::string* paths[] = {&e.image, &e.gt, &e.contour};
    for (const auto* p : paths) {
      if (!fs::exists(*p)) {
        report.problems.push_back("missing file " + *p);
        continue;
      }
      try {
        if (p == &e.image)
          (void)read_rgb(*p);
        else
          (void)read_gray(*p);
      } catch (const IoError& err) {
        report.problems.push_back(err.what());
      }
    }
  }
  return report;
}

namespace {

struct DutsLayout {
  fs::path images;
  fs::path masks;
};

DutsLayout find_layout(const fs::path& root) {
  for (const auto& [img, mask] : std::vector<std::pair<std::string, std::string>>{
           {"images", "masks"}, {"Image", "Mask"}, {"image", "mask"}}) {
    if (fs::is_directory(root / img) && fs::is_directory(root / mask))
      return {root / img, root / mask};
  }
  DutsLayout layout;
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
  for (const auto& d : fs::directory_iterator(root)) {
    if (!d.is_directory()) continue;
    const auto name = d.path().filename().string();
    if (name.ends_with("-Image")) layout.images = d.path();
    if (name.ends_with("-Mask")) layout.masks = d.path();
  }
  if (layout.images.empty() || layout.masks.empty())
    throw IoError("no image/mask directory pair under " + root.string());
  return layout;
}

}  // namespace

DatasetManifest build_duts(const fs::path& root, const fs::path& out_dir, Phase phase,
                           DutsBuildStats* stats) {
  const auto layout = find_layout(root);
  std::vector<fs::path> images;
  for (const auto& f : fs::directory_iterator(layout.images))
    if (f.is_regular_file() && is_image_file(f.path())) images.push_back(f.path());
  std::sort(images.begin(), images.end());

  DutsBuildStats local;
  std::vector<ManifestEntry> sources;
  for (const auto& img : images) {
    const auto stem = img.stem().string();
    fs::path mask = layout.masks / (stem + ".png");
    if (!fs::exists(mask)) mask = layout.masks / (stem + ".jpg");
    if (!fs::exists(mask)) {
      spdlog::warn("no mask for {}", img.string());
      ++local.skipped;
      continue;
    }
    try {
      const auto gt = binarize(read_gray(mask));
      const auto contour_path = out_dir / "contour" / (stem + ".png");
      write_mask_png(contour_path, derive_contour(gt));
      sources.push_back({fs::absolute(img).string(), fs::absolute(mask).string(),
                         fs::absolute(contour_path).string(), Augmentation::none});
      ++local.sources;
    } catch (const IoError& e) {
      spdlog::warn("skipping {}: {}", img.string(), e.what());
      ++local.skipped;
    }
  }

  DatasetManifest manifest;
  manifest.phase = phase;
  manifest.source = "duts:" + fs::absolute(root).filename().string();
  manifest.entries = phase == Phase::eval ? sources : expand_with_flips(sources);
  write_manifest(out_dir / "manifest.jsonl", manifest);
  if (stats) *stats = local;
  return manifest;
}

}  // namespace soda::data
