#include <cmath>
#include <cstdio>
#include <fstream>

#include "commands.hpp"
#include "dim/condition.hpp"
#include "dim/diffusion.hpp"
#include "json.hpp"
#include "util.hpp"

namespace dimtool {

using nlohmann::json;

void run_generate(const GenerateOpts& opts) {
  json ckpt;
  try {
    ckpt = json::parse(read_file_bytes(opts.checkpoint_prefix + ".json"));
  } catch (const std::exception& e) {
    throw UsageError(std::string("cannot read checkpoint manifest: ") + e.what());
  }
  dim::ModelConfig cfg = dim::ModelConfig::from_json(ckpt.at("config").dump());
  dim::Skeleton skeleton = dim::skeleton_from_json(ckpt.at("skeleton").dump());
  dim::ChannelStats stats;
  stats.mean = ckpt.at("normalization").at("mean").get<std::vector<double>>();
  stats.stddev = ckpt.at("normalization").at("stddev").get<std::vector<double>>();
  if (static_cast<int64_t>(stats.mean.size()) != cfg.joint_channels)
    throw UsageError("checkpoint normalization does not match its config");

  dim::GestureDiffusionModel model(cfg);
  model.load_params(opts.checkpoint_prefix + ".params");

  dim::AudioClip audio = dim::read_wav_file(opts.wav_path);
  if (audio.rate > 16000.0)
    audio = dim::resample_audio(audio, 16000.0);
  else if (audio.rate < 16000.0)
    throw UsageError("audio must be sampled at >= 16 kHz");
  dim::LogMelProvider mel(cfg.d_audio);
  dim::LocalFeatureSequence feats = mel.features(audio);
  int64_t frames =
      static_cast<int64_t>(std::llround(20.0 * audio.duration_seconds()));

  dim::Rng rng(opts.seed);
  dim::Tensor sampled = model.sample(feats, frames, rng);
  // Keep synthesis inside the normalized range the dataset statistics cover.
  for (int64_t i = 0; i < sampled.numel(); ++i)
    sampled.data()[i] = std::clamp(sampled.data()[i], -10.0, 10.0);

  dim::GestureSequence gesture;
  gesture.fps = 20.0;
  gesture.values = stats.denormalize(sampled);
  dim::MotionClip motion = dim::gesture_to_motion(gesture, skeleton);
  dim::write_bvh_file(opts.out_bvh, motion);
  dim::save_tensor_file(opts.out_bvh + ".dimt", gesture.values);

  json manifest{{"command", "generate"},
                {"checkpoint", opts.checkpoint_prefix},
                {"checkpoint_hash",
                 file_blob_hash(opts.checkpoint_prefix + ".params")},
                {"wav", opts.wav_path},
                {"wav_hash", file_blob_hash(opts.wav_path)},
                {"seed", opts.seed},
                {"frames", frames},
                {"channels", cfg.joint_channels}};
  std::ofstream mf(opts.out_bvh + ".json");
  mf << manifest.dump(2) << "\n";
  std::printf("generate: %ld frames -> %s\n", static_cast<long>(frames),
              opts.out_bvh.c_str());
}

}  // namespace dimtool
