#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "commands.hpp"
#include "dim/condition.hpp"
#include "dim/diffusion.hpp"
#include "json.hpp"
#include "store.hpp"
#include "util.hpp"

namespace dimtool {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void save_checkpoint(const std::string& prefix, dim::GestureDiffusionModel& model,
                     dim::Adam& opt, const ClipStore& store, int64_t step,
                     const std::string& rng_state, double ema) {
  model.save_params(prefix + ".params");
  dim::save_named_tensors(prefix + ".opt", opt.state());
  json j{{"config", json::parse(model.config().to_json())},
         {"skeleton", json::parse(dim::skeleton_to_json(store.skeleton))},
         {"normalization",
          {{"mean", store.stats.mean}, {"stddev", store.stats.stddev}}},
         {"step", step},
         {"rng_state", rng_state},
         {"ema", ema}};
  std::ofstream out(prefix + ".json");
  if (!out) throw std::runtime_error("cannot write checkpoint manifest");
  out << j.dump(2) << "\n";
}

std::vector<dim::Tensor> snapshot_params(dim::ParamRegistry& reg) {
  std::vector<dim::Tensor> out;
  for (auto& [_, t] : reg.items()) out.push_back(t.clone());
  return out;
}

void restore_params(dim::ParamRegistry& reg, const std::vector<dim::Tensor>& snap) {
  size_t i = 0;
  for (auto& [_, t] : reg.items()) {
    std::copy(snap[i].data(), snap[i].data() + snap[i].numel(), t.data());
    ++i;
  }
}

bool params_finite(dim::ParamRegistry& reg) {
  for (auto& [_, t] : reg.items())
    if (!t.all_finite()) return false;
  return true;
}

}  // namespace

void run_train(const TrainOpts& opts) {
  ClipStore store = ClipStore::load(opts.store_dir);
  if (store.clips.empty()) throw UsageError("clip store is empty");

  dim::ModelConfig cfg;
  if (!opts.config_path.empty())
    cfg = dim::ModelConfig::from_json(read_file_bytes(opts.config_path));
  cfg.joint_channels = store.channels;
  if (opts.seed_given) cfg.seed = opts.seed;

  dim::GestureDiffusionModel model(cfg);
  dim::LogMelProvider mel(cfg.d_audio);

  // Features and normalized targets are fixed per clip; compute them once.
  std::vector<dim::LocalFeatureSequence> features;
  std::vector<dim::Tensor> targets;
  for (size_t i = 0; i < store.clips.size(); ++i) {
    features.push_back(mel.features(store.load_audio(i)));
    targets.push_back(store.stats.normalize(store.load_gesture(i).values));
  }

  dim::Adam opt(model.params(), opts.lr);
  dim::Rng rng(cfg.seed);
  int64_t start_step = 0;
  double ema = -1.0;
  if (!opts.resume_prefix.empty()) {
    model.load_params(opts.resume_prefix + ".params");
    opt.load_state(dim::load_named_tensors(opts.resume_prefix + ".opt"));
    json j = json::parse(read_file_bytes(opts.resume_prefix + ".json"));
    start_step = j.at("step").get<int64_t>();
    rng.load_state(j.at("rng_state").get<std::string>());
    ema = j.at("ema").get<double>();
  }
  if (start_step >= opts.steps)
    throw UsageError("checkpoint already at or beyond the requested step count");

  fs::create_directories(opts.out_dir);
  std::ofstream csv(opts.out_dir + "/loss.csv");
  csv << "step,loss,ema\n";
  std::vector<std::pair<double, double>> loss_pts, ema_pts;

  std::string ckpt_prefix = opts.out_dir + "/checkpoint";
  int64_t n_clips = static_cast<int64_t>(store.clips.size());
  for (int64_t step = start_step; step < opts.steps; ++step) {
    model.params().zero_grads();
    double batch_loss = 0;
    bool bad = false;
    for (int64_t b = 0; b < opts.batch; ++b) {
      int64_t idx = rng.uniform_int(n_clips) - 1;
      dim::Tape tape;
      dim::Tensor loss;
      try {
        loss = model.training_loss(targets[static_cast<size_t>(idx)],
                                   features[static_cast<size_t>(idx)], rng, &tape);
      } catch (const std::runtime_error&) {
        bad = true;
        break;
      }
      batch_loss += loss(0);
      dim::Tensor scaled =
          dim::scale(loss, 1.0 / static_cast<double>(opts.batch), &tape);
      tape.backward(scaled);
    }
    batch_loss /= static_cast<double>(opts.batch);
    if (bad || !std::isfinite(batch_loss)) {
      // Parameters have not been stepped yet, so they are the last good state.
      save_checkpoint(ckpt_prefix + "_lastgood", model, opt, store, step,
                      rng.save_state(), ema);
      throw std::runtime_error("non-finite loss at step " + std::to_string(step) +
                               "; last-good checkpoint written");
    }
    std::vector<dim::Tensor> snap = snapshot_params(model.params());
    opt.step();
    if (!params_finite(model.params())) {
      restore_params(model.params(), snap);
      save_checkpoint(ckpt_prefix + "_lastgood", model, opt, store, step,
                      rng.save_state(), ema);
      throw std::runtime_error("non-finite parameters after step " +
                               std::to_string(step) +
                               "; last-good checkpoint written");
    }
    ema = ema < 0 ? batch_loss : 0.9 * ema + 0.1 * batch_loss;
    csv << step << "," << batch_loss << "," << ema << "\n";
    loss_pts.emplace_back(static_cast<double>(step), batch_loss);
    ema_pts.emplace_back(static_cast<double>(step), ema);
    if ((step + 1) % 10 == 0 || step + 1 == opts.steps)
      std::printf("step %ld/%ld loss %.6f ema %.6f\n", static_cast<long>(step + 1),
                  static_cast<long>(opts.steps), batch_loss, ema);
  }
  csv.close();
  save_checkpoint(ckpt_prefix, model, opt, store, opts.steps, rng.save_state(), ema);
  write_svg_chart(opts.out_dir + "/loss.svg", "training loss", "step", "loss",
                  {{"loss", loss_pts}, {"ema", ema_pts}});

  json manifest{{"command", "train"},
                {"store", opts.store_dir},
                {"store_manifest_hash",
                 file_blob_hash(opts.store_dir + "/manifest.json")},
                {"config", json::parse(model.config().to_json())},
                {"steps", opts.steps},
                {"batch", opts.batch},
                {"lr", opts.lr},
                {"resumed_from", opts.resume_prefix},
                {"final_ema", ema},
                {"parameters", model.params().count()}};
  std::ofstream mf(opts.out_dir + "/run_manifest.json");
  mf << manifest.dump(2) << "\n";
  std::printf("train: %ld steps, final ema %.6f, checkpoint at %s\n",
              static_cast<long>(opts.steps), ema, ckpt_prefix.c_str());
}

}  // namespace dimtool
