#include "store.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace dimtool {

using nlohmann::json;

ClipStore ClipStore::load(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw std::runtime_error("missing clip store manifest in " + dir);
  json j = json::parse(in);
  ClipStore s;
  s.dir = dir;
  s.fps = j.at("fps").get<double>();
  s.audio_rate = j.at("audio_rate").get<double>();
  s.clip_seconds = j.at("clip_seconds").get<double>();
  s.joints = j.at("joints").get<int64_t>();
  s.channels = j.at("channels").get<int64_t>();
  s.skeleton = dim::skeleton_from_json(j.at("skeleton").dump());
  s.stats.mean = j.at("normalization").at("mean").get<std::vector<double>>();
  s.stats.stddev = j.at("normalization").at("stddev").get<std::vector<double>>();
  for (const auto& c : j.at("clips")) {
    StoredClip clip;
    clip.id = c.at("id").get<std::string>();
    clip.gesture_file = c.at("gesture").get<std::string>();
    clip.audio_file = c.at("audio").get<std::string>();
    clip.source = c.value("source", "");
    clip.offset_seconds = c.value("offset_seconds", 0.0);
    clip.bvh_hash = c.value("bvh_hash", "");
    clip.wav_hash = c.value("wav_hash", "");
    s.clips.push_back(std::move(clip));
  }
  return s;
}

void ClipStore::save_manifest() const {
  json clips_json = json::array();
  for (const auto& c : clips)
    clips_json.push_back({{"id", c.id},
                          {"gesture", c.gesture_file},
                          {"audio", c.audio_file},
                          {"source", c.source},
                          {"offset_seconds", c.offset_seconds},
                          {"bvh_hash", c.bvh_hash},
                          {"wav_hash", c.wav_hash}});
  json j{{"version", 1},
         {"fps", fps},
         {"audio_rate", audio_rate},
         {"clip_seconds", clip_seconds},
         {"joints", joints},
         {"channels", channels},
         {"skeleton", json::parse(dim::skeleton_to_json(skeleton))},
         {"normalization", {{"mean", stats.mean}, {"stddev", stats.stddev}}},
         {"clips", clips_json}};
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir);
  out << j.dump(2) << "\n";
}

dim::GestureSequence ClipStore::load_gesture(size_t index) const {
  dim::GestureSequence g;
  g.fps = fps;
  g.values = dim::load_tensor_file(dir + "/" + clips.at(index).gesture_file);
  return g;
}

dim::AudioClip ClipStore::load_audio(size_t index) const {
  dim::Tensor t = dim::load_tensor_file(dir + "/" + clips.at(index).audio_file);
  dim::AudioClip a;
  a.rate = audio_rate;
  a.samples.assign(t.data(), t.data() + t.numel());
  return a;
}

}  // namespace dimtool
