#include "soda/harness/train_plan.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "soda/errors.hpp"

namespace soda::harness {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const auto pos = s.find(sep);
    const auto item = trim(s.substr(0, pos));
    if (!item.empty()) out.push_back(item);
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError(fmt::format("{}: cannot parse '{}'", key, value));
  }
  return out;
}

std::string schedule_text(const std::vector<LrStep>& schedule) {
  std::string out;
  for (const auto& s : schedule) {
    if (!out.empty()) out += ", ";
    out += fmt::format("{}:{}", s.after, s.multiplier);
  }
  return out;
}

}  // namespace

double TrainPlan::lr_at(int epoch) const {
  double lr = lr0;
  for (const auto& step : lr_schedule) {
    if (step.after < epoch) lr *= step.multiplier;
  }
  return lr;
}

model::ModelConfig TrainPlan::model_config() const {
  auto cfg = model::preset(variant);
  cfg.ablation = ablation;
  if (image_size > 0) cfg.input_size = {image_size, image_size};
  return cfg;
}

void TrainPlan::validate() const {
  if (phase == data::Phase::eval) throw ConfigError("phase must be pretrain or finetune");
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (!(lr0 > 0)) throw ConfigError("lr0 must be positive");
  if (!(beta >= 0)) throw ConfigError("beta must be non-negative");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
  if (grad_clip < 0) throw ConfigError("grad_clip must be non-negative");
  if (optimizer != "adam") throw ConfigError("unsupported optimizer '" + optimizer + "'");
  for (const auto& s : lr_schedule) {
    if (s.after < 0 || !(s.multiplier > 0)) {
      throw ConfigError("lr_schedule entries need after >= 0 and multiplier > 0");
    }
  }
  model_config().validate();
}

TrainPlan pretrain_plan() {
  TrainPlan p;
  p.phase = data::Phase::pretrain;
  p.epochs = 21;
  p.lr0 = 1e-3;
  p.lr_schedule = {{15, 0.5}};
  p.beta = 1.0;
  return p;
}

TrainPlan finetune_plan() {
  TrainPlan p;
  p.phase = data::Phase::finetune;
  p.epochs = 11;
  p.lr0 = 1e-3;
  p.lr_schedule = {{5, 0.1}};
  p.beta = 0.5;
  return p;
}

TrainPlan plan_for(data::Phase phase) {
  switch (phase) {
    case data::Phase::pretrain: return pretrain_plan();
    case data::Phase::finetune: return finetune_plan();
    case data::Phase::eval: break;
  }
  throw ConfigError("no training plan for the eval phase");
}

void apply_ablation(TrainPlan& plan, std::string_view flag) {
  if (flag == "no_aglrfe") {
    plan.ablation.no_aglrfe = true;
  } else if (flag == "no_alpm") {
    plan.ablation.no_alpm = true;
  } else if (flag == "no_cfm") {
    plan.ablation.no_cfm = true;
  } else if (flag == "no_mrffam") {
    plan.ablation.no_mrffam = true;
  } else if (flag == "fg_only") {
    plan.fg_only = true;
  } else {
    throw ConfigError(fmt::format("unknown ablation flag '{}'", flag));
  }
}

std::vector<std::string> ablation_flags(const TrainPlan& plan) {
  std::vector<std::string> out;
  if (plan.ablation.no_aglrfe) out.emplace_back("no_aglrfe");
  if (plan.ablation.no_alpm) out.emplace_back("no_alpm");
  if (plan.ablation.no_cfm) out.emplace_back("no_cfm");
  if (plan.ablation.no_mrffam) out.emplace_back("no_mrffam");
  if (plan.fg_only) out.emplace_back("fg_only");
  return out;
}

TrainPlan parse_plan(std::string_view text, TrainPlan base) {
  TrainPlan p = std::move(base);
  std::istringstream lines{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(lines, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = trim(line.substr(0, hash));
    }
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw ConfigError(fmt::format("line {}: expected 'key: value'", line_no));
    }
    const auto key = trim(line.substr(0, colon));
    const auto value = trim(line.substr(colon + 1));
    if (key == "phase") {
      p.phase = data::parse_phase(value);
    } else if (key == "epochs") {
      p.epochs = parse_number<int>(key, value);
    } else if (key == "lr0") {
      p.lr0 = parse_number<double>(key, value);
    } else if (key == "lr_schedule") {
      p.lr_schedule.clear();
      for (auto item : split(value, ',')) {
        const auto c = item.find(':');
        if (c == std::string_view::npos) {
          throw ConfigError(fmt::format("lr_schedule: expected 'epoch:multiplier', got '{}'", item));
        }
        p.lr_schedule.push_back({parse_number<int>(key, trim(item.substr(0, c))),
                                 parse_number<double>(key, trim(item.substr(c + 1)))});
      }
    } else if (key == "beta") {
      p.beta = parse_number<double>(key, value);
    } else if (key == "seed") {
      p.seed = parse_number<uint64_t>(key, value);
    } else if (key == "batch_size") {
      p.batch_size = parse_number<int>(key, value);
    } else if (key == "variant") {
      p.variant = model::parse_variant(value);
    } else if (key == "ablation") {
      p.ablation = {};
      p.fg_only = false;
      for (auto flag : split(value, ',')) apply_ablation(p, flag);
    } else if (key == "image_size") {
      p.image_size = parse_number<int>(key, value);
    } else if (key == "max_steps") {
      p.max_steps = parse_number<int64_t>(key, value);
    } else if (key == "grad_clip") {
      p.grad_clip = parse_number<double>(key, value);
    } else if (key == "optimizer") {
      p.optimizer = std::string(value);
    } else {
      throw ConfigError(fmt::format("line {}: unknown key '{}'", line_no, key));
    }
  }
  return p;
}

TrainPlan read_plan(const std::filesystem::path& path, TrainPlan base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_plan(text.str(), std::move(base));
}

std::string format_plan(const TrainPlan& p) {
  std::string ablation;
  for (const auto& f : ablation_flags(p)) ablation += (ablation.empty() ? "" : ",") + f;
  return fmt::format(
      "phase: {}\nepochs: {}\nlr0: {}\nlr_schedule: {}\nbeta: {}\nseed: {}\nbatch_size: {}\n"
      "variant: {}\nablation: {}\nimage_size: {}\nmax_steps: {}\ngrad_clip: {}\noptimizer: {}\n",
      data::to_string(p.phase), p.epochs, p.lr0, schedule_text(p.lr_schedule), p.beta, p.seed,
      p.batch_size, model::to_string(p.variant), ablation, p.image_size, p.max_steps, p.grad_clip,
      p.optimizer);
}

std::optional<uint64_t> seed_from_env() {
  const char* value = std::getenv("SODA_SEED");
  if (value == nullptr || *value == '\0') return std::nullopt;
  return parse_number<uint64_t>("SODA_SEED", trim(value));
}

std::vector<std::string> diff(const TrainPlan& a, const TrainPlan& b) {
  std::vector<std::string> out;
  auto check = [&](std::string_view name, const auto& x, const auto& y) {
    if (x != y) out.push_back(fmt::format("{}: {} != {}", name, x, y));
  };
  check("phase", data::to_string(a.phase), data::to_string(b.phase));
  check("epochs", a.epochs, b.epochs);
  check("lr0", a.lr0, b.lr0);
  check("lr_schedule", schedule_text(a.lr_schedule), schedule_text(b.lr_schedule));
  check("beta", a.beta, b.beta);
  check("seed", a.seed, b.seed);
  check("batch_size", a.batch_size, b.batch_size);
  check("variant", model::to_string(a.variant), model::to_string(b.variant));
  check("ablation", fmt::format("[{}]", fmt::join(ablation_flags(a), ",")),
        fmt::format("[{}]", fmt::join(ablation_flags(b), ",")));
  check("image_size", a.image_size, b.image_size);
  check("max_steps", a.max_steps, b.max_steps);
  check("grad_clip", a.grad_clip, b.grad_clip);
  check("optimizer", a.optimizer, b.optimizer);
  return out;
}

void to_json(nlohmann::json& j, const TrainPlan& p) {
  nlohmann::json schedule = nlohmann::json::array();
  for (const auto& s : p.lr_schedule) schedule.push_back({s.after, s.multiplier});
  j = {{"phase", data::to_string(p.phase)},
       {"epochs", p.epochs},
       {"lr0", p.lr0},
       {"lr_schedule", schedule},
       {"beta", p.beta},
       {"seed", p.seed},
       {"batch_size", p.batch_size},
       {"variant", model::to_string(p.variant)},
       {"ablation", ablation_flags(p)},
       {"image_size", p.image_size},
       {"max_steps", p.max_steps},
       {"grad_clip", p.grad_clip},
       {"optimizer", p.optimizer}};
}

void from_json(const nlohmann::json& j, TrainPlan& p) {
  p = TrainPlan{};
  p.phase = data::parse_phase(j.at("phase").get<std::string>());
  p.epochs = j.at("epochs").get<int>();
  p.lr0 = j.at("lr0").get<double>();
  for (const auto& s : j.at("lr_schedule")) p.lr_schedule.push_back({s[0].get<int>(), s[1].get<double>()});
  p.beta = j.at("beta").get<double>();
  p.seed = j.at("seed").get<uint64_t>();
  p.batch_size = j.at("batch_size").get<int>();
  p.variant = model::parse_variant(j.at("variant").get<std::string>());
  for (const auto& f : j.at("ablation")) apply_ablation(p, f.get<std::string>());
  p.image_size = j.value("image_size", 0);
  p.max_steps = j.value("max_steps", int64_t{0});
  p.grad_clip = j.value("grad_clip", 0.0);
  p.optimizer = j.value("optimizer", std::string("adam"));
}

}  // namespace soda::harness
