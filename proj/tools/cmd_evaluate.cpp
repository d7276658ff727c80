#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "commands.hpp"
#include "dim/metrics.hpp"
#include "json.hpp"
#include "util.hpp"

namespace dimtool {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct EvalClip {
  dim::GestureSequence gesture;
  dim::AudioClip audio;
};

std::vector<EvalClip> load_eval_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir);
  std::map<std::string, std::pair<std::string, std::string>> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    auto& slot = stems[entry.path().stem().string()];
    if (ext == ".bvh") slot.first = entry.path().string();
    if (ext == ".wav") slot.second = entry.path().string();
  }
  std::vector<EvalClip> out;
  for (const auto& [stem, paths] : stems) {
    if (paths.first.empty() || paths.second.empty()) {
      std::fprintf(stderr, "warning: unpaired '%s' in %s skipped\n", stem.c_str(),
                   dir.c_str());
      continue;
    }
    EvalClip clip;
    dim::MotionClip motion = dim::parse_bvh_file(paths.first);
    if (motion.fps > 20.0 + 1e-6) motion = dim::resample_motion(motion, 20.0);
    clip.gesture = dim::motion_to_gesture(motion);
    clip.audio = dim::read_wav_file(paths.second);
    if (clip.audio.rate > 16000.0)
      clip.audio = dim::resample_audio(clip.audio, 16000.0);
    out.push_back(std::move(clip));
  }
  return out;
}

}  // namespace

void run_evaluate(const EvaluateOpts& opts) {
  std::vector<EvalClip> generated = load_eval_dir(opts.generated_dir);
  std::vector<EvalClip> reference = load_eval_dir(opts.reference_dir);
  if (generated.size() < 2 || reference.size() < 2)
    throw UsageError("need at least 2 paired clips per side (got " +
                     std::to_string(generated.size()) + " generated, " +
                     std::to_string(reference.size()) + " reference)");
  if (generated[0].gesture.channels() != reference[0].gesture.channels())
    throw UsageError("generated and reference channel counts differ");

  std::vector<dim::GestureSequence> gen_g, ref_g;
  for (const auto& c : generated) gen_g.push_back(c.gesture);
  for (const auto& c : reference) ref_g.push_back(c.gesture);

  double raw = dim::fgd_raw(gen_g, ref_g);

  dim::MotionEmbedder embedder;
  if (!opts.embedder_path.empty()) {
    embedder = dim::MotionEmbedder::load(opts.embedder_path);
    if (embedder.channels() != gen_g[0].channels())
      throw UsageError("embedder channel count does not match the clips");
  } else {
    dim::Rng rng(opts.seed);
    embedder = dim::MotionEmbedder(gen_g[0].channels(), 32, rng);
    embedder.train(ref_g, opts.embedder_steps, 1e-2, rng);
    embedder.save(opts.out_path + ".embedder");
  }
  double feat = dim::fgd_feature(gen_g, ref_g, embedder);

  double align = 0;
  for (const auto& c : generated)
    align += dim::beat_align(dim::detect_gesture_beats(c.gesture),
                             dim::detect_audio_beats(c.audio), opts.sigma);
  align /= static_cast<double>(generated.size());

  json report{{"fgd_raw", raw},
              {"fgd_feature", feat},
              {"beat_align", align},
              {"n_generated", generated.size()},
              {"n_reference", reference.size()},
              {"embedder_id", embedder.id()}};
  std::ofstream out(opts.out_path);
  if (!out) throw std::runtime_error("cannot write report: " + opts.out_path);
  out << report.dump(2) << "\n";
  std::printf("%s\n", report.dump(2).c_str());
}

}  // namespace dimtool
