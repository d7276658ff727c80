#pragma once

#include <string>
#include <vector>

#include "dim/codec.hpp"
#include "dim/dataio.hpp"

namespace dimtool {

// On-disk training set: one gesture/audio tensor pair per clip plus a JSON
// manifest with the skeleton, normalization statistics and provenance hashes.
struct StoredClip {
  std::string id;
  std::string gesture_file;
  std::string audio_file;
  std::string source;
  double offset_seconds = 0;
  std::string bvh_hash;
  std::string wav_hash;
};

struct ClipStore {
  std::string dir;
  double fps = 20.0;
  double audio_rate = 16000.0;
  double clip_seconds = 20.0;
  int64_t joints = 0;
  int64_t channels = 0;
  dim::Skeleton skeleton;
  dim::ChannelStats stats;
  std::vector<StoredClip> clips;

  static ClipStore load(const std::string& dir);
  void save_manifest() const;

  dim::GestureSequence load_gesture(size_t index) const;  // raw, unnormalized
  dim::AudioClip load_audio(size_t index) const;
};

}  // namespace dimtool
