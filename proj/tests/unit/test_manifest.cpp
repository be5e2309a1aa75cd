#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "soda/data/image_io.hpp"
#include "soda/data/manifest.hpp"
#include "soda/errors.hpp"

#include <nlohmann/json.hpp>

using namespace soda;
using namespace soda::data;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "soda_manifest_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<ManifestEntry> synthetic_sources(std::size_t n) {
  std::vector<ManifestEntry> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = std::to_string(i);
    out.push_back({"img/" + id + ".jpg", "gt/" + id + ".png", "contour/" + id + ".png",
                   Augmentation::none});
  }
  return out;
}

Mask2u8 square_mask(int side) {
  Mask2u8 m(side, side);
  for (int r = side / 4; r < 3 * side / 4; ++r)
    for (int c = side / 4; c < 3 * side / 4; ++c) m(r, c) = 1;
  return m;
}

}  // namespace

TEST(Manifest, FlipExpansionTriples) {
  const auto sources = synthetic_sources(10553);
  const auto expanded = expand_with_flips(sources);
  EXPECT_EQ(expanded.size(), 31659u);
  std::size_t none = 0, h = 0, v = 0;
  for (const auto& e : expanded) {
    none += e.aug == Augmentation::none;
    h += e.aug == Augmentation::hflip;
    v += e.aug == Augmentation::vflip;
  }
  EXPECT_EQ(none, 10553u);
  EXPECT_EQ(h, 10553u);
  EXPECT_EQ(v, 10553u);
  EXPECT_EQ(expand_with_flips(synthetic_sources(118287)).size(), 354861u);
  EXPECT_TRUE(expand_with_flips({}).empty());
}

TEST(Manifest, AugmentationNames) {
  for (auto a : {Augmentation::none, Augmentation::hflip, Augmentation::vflip})
    EXPECT_EQ(parse_augmentation(to_string(a)), a);
  EXPECT_THROW(parse_augmentation("rot90"), ConfigError);
  for (auto p : {Phase::pretrain, Phase::finetune, Phase::eval}) EXPECT_EQ(parse_phase(to_string(p)), p);
}

TEST(Manifest, RoundTripKeepsEntriesAndMeta) {
  const auto dir = fresh_dir("roundtrip");
  DatasetManifest m;
  m.phase = Phase::finetune;
  m.source = "unit";
  for (auto e : expand_with_flips(synthetic_sources(4))) {
    e.image = (dir / e.image).string();
    e.gt = (dir / e.gt).string();
    e.contour = (dir / e.contour).string();
    m.entries.push_back(e);
  }
  m.entries.push_back({"/elsewhere/x.jpg", "/elsewhere/x.png", "/elsewhere/xc.png",
                       Augmentation::vflip});
  write_manifest(dir / "manifest.jsonl", m);

  std::ifstream in(dir / "manifest.jsonl");
  std::string first;
  std::getline(in, first);
  const auto j = nlohmann::json::parse(first);
  EXPECT_EQ(j.at("image"), "img/0.jpg");
  EXPECT_EQ(j.at("aug"), "none");
  EXPECT_TRUE(fs::exists(dir / "manifest.jsonl.meta.json"));

  const auto back = read_manifest(dir / "manifest.jsonl");
  EXPECT_EQ(back.entries, m.entries);
  EXPECT_EQ(back.phase, Phase::finetune);
  EXPECT_EQ(back.source, "unit");
}

TEST(Manifest, ValidationReportsMissingAndCorruptFiles) {
  const auto dir = fresh_dir("validate");
  write_rgb_png(dir / "a.png", torch::rand({3, 8, 8}));
  write_mask_png(dir / "a_gt.png", square_mask(8));
  std::ofstream(dir / "broken.png") << "junk";
  DatasetManifest m;
  m.entries.push_back({(dir / "a.png").string(), (dir / "a_gt.png").string(),
                       (dir / "a_gt.png").string(), Augmentation::none});
  m.entries.push_back({(dir / "missing.png").string(), (dir / "a_gt.png").string(),
                       (dir / "broken.png").string(), Augmentation::hflip});
  const auto report = validate_manifest(m);
  EXPECT_EQ(report.checked, 2u);
  EXPECT_EQ(report.problems.size(), 2u);
  EXPECT_FALSE(report.ok());
}

TEST(Manifest, BuildsDutsTree) {
  const auto root = fresh_dir("duts");
  fs::create_directories(root / "DUTS-TR" / "DUTS-TR-Image");
  fs::create_directories(root / "DUTS-TR" / "DUTS-TR-Mask");
  for (int i = 0; i < 3; ++i) {
    const auto id = "ILSVRC_" + std::to_string(i);
    write_rgb_png(root / "DUTS-TR" / "DUTS-TR-Image" / (id + ".jpg"), torch::rand({3, 16, 16}));
    if (i < 2) write_mask_png(root / "DUTS-TR" / "DUTS-TR-Mask" / (id + ".png"), square_mask(16));
  }
  DutsBuildStats stats;
  const auto train = build_duts(root / "DUTS-TR", root / "out", Phase::finetune, &stats);
  EXPECT_EQ(stats.sources, 2u);
  EXPECT_EQ(stats.skipped, 1u);
  EXPECT_EQ(train.entries.size(), 6u);
  EXPECT_TRUE(validate_manifest(read_manifest(root / "out" / "manifest.jsonl")).ok());

  const auto eval = build_duts(root / "DUTS-TR", root / "out_eval", Phase::eval);
  EXPECT_EQ(eval.entries.size(), 2u);
  EXPECT_THROW(build_duts(root / "nowhere", root / "x", Phase::eval), IoError);
}
