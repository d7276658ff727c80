#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>

#include "commands.hpp"
#include "dim/threading.hpp"
#include "json.hpp"
#include "store.hpp"
#include "util.hpp"

namespace dimtool {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct PairResult {
  std::vector<dim::ClipPair> clips;
  dim::Skeleton skeleton;
  std::string bvh_hash, wav_hash;
  std::string error;  // non-empty: pair skipped
};

PairResult process_pair(const std::string& bvh_path, const std::string& wav_path,
                        const PreprocessOpts& opts) {
  PairResult r;
  try {
    dim::MotionClip motion = dim::parse_bvh_file(bvh_path);
    motion = dim::resample_motion(motion, opts.fps);
    dim::GestureSequence gesture = dim::motion_to_gesture(motion);
    dim::AudioClip audio = dim::read_wav_file(wav_path);
    if (audio.rate > opts.audio_rate)
      audio = dim::resample_audio(audio, opts.audio_rate);
    else if (audio.rate < opts.audio_rate)
      throw std::runtime_error("audio below the target rate (cannot upsample)");
    std::optional<double> stride;
    if (opts.stride_seconds > 0) stride = opts.stride_seconds;
    r.clips = dim::segment_clips(gesture, audio, opts.clip_seconds, stride);
    r.skeleton = motion.skeleton;
    r.bvh_hash = file_blob_hash(bvh_path);
    r.wav_hash = file_blob_hash(wav_path);
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

}  // namespace

void run_preprocess(const PreprocessOpts& opts) {
  std::map<std::string, std::pair<std::string, std::string>> stems;
  auto scan = [&](const std::string& dir, const std::string& ext, bool first) {
    if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file() || entry.path().extension() != ext) continue;
      auto& slot = stems[entry.path().stem().string()];
      (first ? slot.first : slot.second) = entry.path().string();
    }
  };
  scan(opts.bvh_dir, ".bvh", true);
  scan(opts.wav_dir, ".wav", false);
  if (stems.empty())
    throw UsageError("no .bvh or .wav files found under " + opts.bvh_dir + " and " +
                     opts.wav_dir);

  std::vector<std::pair<std::string, std::pair<std::string, std::string>>> paired;
  for (const auto& [stem, paths] : stems) {
    if (paths.first.empty() || paths.second.empty())
      std::fprintf(stderr, "warning: unpaired input '%s' skipped\n", stem.c_str());
    else
      paired.emplace_back(stem, paths);
  }
  if (paired.empty()) throw UsageError("no paired BVH/WAV stems to process");

  std::vector<PairResult> results(paired.size());
  dim::parallel_for(static_cast<int64_t>(paired.size()), [&](int64_t i) {
    const auto& [stem, paths] = paired[static_cast<size_t>(i)];
    (void)stem;
    results[static_cast<size_t>(i)] = process_pair(paths.first, paths.second, opts);
  });

  ClipStore store;
  store.dir = opts.out_dir;
  store.fps = opts.fps;
  store.audio_rate = opts.audio_rate;
  store.clip_seconds = opts.clip_seconds;
  fs::create_directories(opts.out_dir);

  std::vector<dim::GestureSequence> gestures;
  std::vector<const dim::ClipPair*> flat;
  std::vector<size_t> flat_pair;
  bool have_skeleton = false;
  for (size_t i = 0; i < results.size(); ++i) {
    PairResult& r = results[i];
    const std::string& stem = paired[i].first;
    if (!r.error.empty()) {
      std::fprintf(stderr, "warning: '%s' skipped: %s\n", stem.c_str(),
                   r.error.c_str());
      continue;
    }
    if (!have_skeleton) {
      store.skeleton = r.skeleton;
      store.joints = r.skeleton.joint_count();
      store.channels = 3 * store.joints + 6;
      have_skeleton = true;
    } else if (r.skeleton.joint_count() != store.joints) {
      std::fprintf(stderr, "warning: '%s' skipped: joint count differs\n",
                   stem.c_str());
      continue;
    }
    for (const auto& clip : r.clips) {
      gestures.push_back(clip.gesture);
      flat.push_back(&clip);
      flat_pair.push_back(i);
    }
  }
  if (flat.empty())
    throw UsageError("inputs produced no complete " +
                     std::to_string(static_cast<int64_t>(opts.clip_seconds)) +
                     "-second clips");

  store.stats = dim::ChannelStats::fit(gestures);
  for (size_t k = 0; k < flat.size(); ++k) {
    char id[32];
    std::snprintf(id, sizeof id, "clip_%04zu", k);
    StoredClip sc;
    sc.id = id;
    sc.gesture_file = std::string(id) + ".gesture.dimt";
    sc.audio_file = std::string(id) + ".audio.dimt";
    sc.source = paired[flat_pair[k]].first;
    sc.offset_seconds = flat[k]->offset_seconds;
    sc.bvh_hash = results[flat_pair[k]].bvh_hash;
    sc.wav_hash = results[flat_pair[k]].wav_hash;
    dim::save_tensor_file(opts.out_dir + "/" + sc.gesture_file,
                          flat[k]->gesture.values);
    dim::Tensor audio_t(
        {static_cast<int64_t>(flat[k]->audio.samples.size())},
        std::vector<double>(flat[k]->audio.samples.begin(),
                            flat[k]->audio.samples.end()));
    dim::save_tensor_file(opts.out_dir + "/" + sc.audio_file, audio_t);
    store.clips.push_back(std::move(sc));
  }
  store.save_manifest();

  json inputs = json::array();
  for (const auto& sc : store.clips)
    inputs.push_back({{"source", sc.source}, {"bvh", sc.bvh_hash}, {"wav", sc.wav_hash}});
  json manifest{{"command", "preprocess"},
                {"bvh_dir", opts.bvh_dir},
                {"wav_dir", opts.wav_dir},
                {"clip_seconds", opts.clip_seconds},
                {"stride_seconds", opts.stride_seconds},
                {"clips", store.clips.size()},
                {"inputs", inputs}};
  std::ofstream mf(opts.out_dir + "/run_manifest.json");
  mf << manifest.dump(2) << "\n";
  std::printf("preprocess: %zu pairs -> %zu clips in %s\n", paired.size(),
              store.clips.size(), opts.out_dir.c_str());
}

}  // namespace dimtool
