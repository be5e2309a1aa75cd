#include "soda/harness/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "soda/model/checkpoint.hpp"
#include "soda/model/init.hpp"

namespace soda::harness {
namespace fs = std::filesystem;

nlohmann::json RunRecord::to_json() const {
  std::vector<std::string> ckpts;
  for (const auto& c : checkpoints) ckpts.push_back(c.string());
  return {{"run_dir", run_dir.string()},
          {"plan", plan},
          {"model", model},
          {"seed", seed},
          {"step_log", step_log.string()},
          {"checkpoints", ckpts},
          {"steps", steps},
          {"epochs_completed", epochs_completed},
          {"wall_seconds", wall_seconds},
          {"first_loss", step_losses.empty() ? nlohmann::json() : nlohmann::json(step_losses[0])},
          {"last_loss",
           step_losses.empty() ? nlohmann::json() : nlohmann::json(step_losses.back())}};
}

namespace {

// Streams the epoch's batches into `fn` until it returns false. Samples that
// fail to load are skipped.
template <typename Fn>
void for_each_batch(const data::SampleSource& source, const TrainPlan& plan, int epoch, Fn&& fn) {
  std::vector<data::SaliencySample> pending;
  for (std::size_t index : data::epoch_order(source.size(), plan.seed, epoch)) {
    auto sample = source.get(index);
    if (!sample) continue;
    pending.push_back(std::move(*sample));
    if (static_cast<int>(pending.size()) == plan.batch_size) {
      if (!fn(data::collate(pending))) return;
      pending.clear();
    }
  }
  if (!pending.empty()) fn(data::collate(pending));
}

supervision::LossBreakdown batch_loss(model::SodaNet& net, const data::Batch& batch,
                                      const TrainPlan& plan) {
  const auto outputs = net->forward(batch.image);
  return supervision::total_loss(outputs, batch.gt, batch.contour, plan.effective_beta(),
                                 model::expected_heads(plan.ablation));
}

model::SodaNet build(const TrainPlan& plan) {
  torch::manual_seed(plan.seed);
  model::SodaNet net(plan.model_config());
  model::init_weights(*net, plan.seed);
  return net;
}

std::vector<std::string> resume_diff(const TrainPlan& stored, const TrainPlan& current) {
  // Extending a run (more epochs or steps) is allowed.
  TrainPlan a = stored, b = current;
  a.epochs = b.epochs = 0;
  a.max_steps = b.max_steps = 0;
  return diff(a, b);
}

}  // namespace

Trainer::Trainer(TrainPlan plan) : plan_(std::move(plan)) {
  plan_.validate();
  net_ = build(plan_);
  optimizer_ = std::make_unique<torch::optim::Adam>(net_->parameters(),
                                                    torch::optim::AdamOptions(plan_.lr0));
}

void Trainer::save(const fs::path& path, int epoch, int64_t step) const {
  model::Checkpoint ckpt;
  ckpt.config = net_->config();
  ckpt.tensors = model::state_dict(*net_);
  nlohmann::json adam_steps = nlohmann::json::object();
  const auto params = net_->parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto it = optimizer_->state().find(params[i].unsafeGetTensorImpl());
    if (it == optimizer_->state().end()) continue;
    const auto& st = static_cast<const torch::optim::AdamParamState&>(*it->second);
    ckpt.tensors[fmt::format("optimizer.{}.exp_avg", i)] = st.exp_avg();
    ckpt.tensors[fmt::format("optimizer.{}.exp_avg_sq", i)] = st.exp_avg_sq();
    adam_steps[std::to_string(i)] = st.step();
  }
  ckpt.extra = {{"epoch", epoch}, {"step", step}, {"plan", plan_}, {"adam_steps", adam_steps}};
  model::write_checkpoint(path, ckpt);
}

int Trainer::restore(const fs::path& path, int64_t& step) {
  const auto ckpt = model::read_checkpoint(path);
  std::vector<std::string> problems = model::diff(ckpt.config, net_->config());
  if (ckpt.extra.contains("plan")) {
    for (auto& d : resume_diff(ckpt.extra.at("plan").get<TrainPlan>(), plan_)) {
      problems.push_back(std::move(d));
    }
  }
  if (!problems.empty()) {
    std::string msg = "refusing to resume from " + path.string() + " (checkpoint != current):";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  model::load_into(ckpt, net_);
  const auto params = net_->parameters();
  const auto& steps = ckpt.extra.value("adam_steps", nlohmann::json::object());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto key = std::to_string(i);
    if (!steps.contains(key)) continue;
    auto st = std::make_unique<torch::optim::AdamParamState>();
    st->step(steps.at(key).get<int64_t>());
    st->exp_avg(ckpt.tensors.at(fmt::format("optimizer.{}.exp_avg", i)).clone());
    st->exp_avg_sq(ckpt.tensors.at(fmt::format("optimizer.{}.exp_avg_sq", i)).clone());
    optimizer_->state()[params[i].unsafeGetTensorImpl()] = std::move(st);
  }
  step = ckpt.extra.value("step", int64_t{0});
  return ckpt.extra.value("epoch", 0);
}

RunRecord Trainer::run(const data::SampleSource& source, const TrainOptions& options) {
  if (source.size() == 0) throw ConfigError("training source is empty");
  const auto start = std::chrono::steady_clock::now();
  RunRecord record;
  record.run_dir = options.run_dir;
  record.plan = plan_;
  record.model = net_->config();
  record.seed = plan_.seed;

  const bool persist = !options.run_dir.empty();
  std::ofstream log;
  if (persist) {
    fs::create_directories(options.run_dir);
    record.step_log = options.run_dir / "steps.jsonl";
    log.open(record.step_log, options.resume ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot write " + record.step_log.string());
  }

  int64_t step = 0;
  int first_epoch = 1;
  fs::path last_good;
  if (options.resume) {
    first_epoch = restore(*options.resume, step) + 1;
    last_good = *options.resume;
    spdlog::info("resuming at epoch {} (step {})", first_epoch, step);
  }

  auto finish = [&] {
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    record.steps = step;
    if (persist) {
      std::ofstream out(options.run_dir / "run.json");
      out << record.to_json().dump(2) << "\n";
    }
  };

  net_->train();
  bool stop = false;
  for (int epoch = first_epoch; epoch <= plan_.epochs && !stop; ++epoch) {
    const double lr = plan_.lr_at(epoch);
    for (auto& group : optimizer_->param_groups()) {
      static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }
    for_each_batch(source, plan_, epoch, [&](const data::Batch& batch) {
      optimizer_->zero_grad();
      auto loss = batch_loss(net_, batch, plan_);
      if (!std::isfinite(loss.total)) {
        finish();
        throw TrainingHalted(fmt::format("non-finite loss at epoch {} step {}; last good "
                                         "checkpoint: {}",
                                         epoch, step,
                                         last_good.empty() ? "(none)" : last_good.string()),
                             last_good);
      }
      loss.objective.backward();
      if (plan_.grad_clip > 0) {
        torch::nn::utils::clip_grad_norm_(net_->parameters(), plan_.grad_clip);
      }
      optimizer_->step();

      record.step_losses.push_back(loss.total);
      if (persist) {
        auto line = loss.to_json();
        line["epoch"] = epoch;
        line["step"] = step;
        line["lr"] = lr;
        log << line.dump() << "\n";
      }
      const StepInfo info{epoch, step, lr, &loss};
      ++step;
      if (options.on_step && !options.on_step(info, net_)) stop = true;
      if (plan_.max_steps > 0 && step >= plan_.max_steps) stop = true;
      return !stop;
    });
    if (!stop) record.epochs_completed = epoch;
    if (persist) {
      // A partial epoch is saved under its step so a resume repeats that epoch.
      const auto path = options.run_dir / (stop ? fmt::format("step_{:07d}.sodackpt", step)
                                                : fmt::format("epoch_{:03d}.sodackpt", epoch));
      save(path, stop ? epoch - 1 : epoch, step);
      record.checkpoints.push_back(path);
      last_good = path;
    }
    spdlog::info("epoch {} done, {} steps, lr {}", epoch, step, lr);
  }
  finish();
  return record;
}

supervision::LossBreakdown initial_loss(const TrainPlan& plan, const data::SampleSource& source) {
  auto net = build(plan);
  net->train();
  std::optional<supervision::LossBreakdown> loss;
  for_each_batch(source, plan, 1, [&](const data::Batch& batch) {
    loss = batch_loss(net, batch, plan);
    return false;
  });
  if (!loss) throw ConfigError("training source is empty");
  return *loss;
}

RunRecord train(const TrainPlan& plan, const data::DatasetManifest& manifest,
                const TrainOptions& options) {
  if (manifest.phase != plan.phase) {
    throw ConfigError(fmt::format("manifest phase {} does not match plan phase {}",
                                  data::to_string(manifest.phase), data::to_string(plan.phase)));
  }
  const auto cfg = plan.model_config();
  data::ManifestSource source(manifest, cfg.input_size);
  Trainer trainer(plan);
  return trainer.run(source, options);
}

}  // namespace soda::harness
