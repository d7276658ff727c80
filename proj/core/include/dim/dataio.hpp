#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dim/gesture.hpp"
#include "dim/rotation.hpp"
#include "dim/tensor.hpp"

namespace dim {

enum class Channel { kXpos, kYpos, kZpos, kXrot, kYrot, kZrot };

struct Joint {
  std::string name;
  int parent = -1;  // -1 for the root
  Vec3 offset;
  std::vector<Channel> channels;  // empty for end sites
  bool end_site = false;
};

struct Skeleton {
  std::vector<Joint> joints;  // depth-first order, parents before children

  int64_t joint_count() const;    // excludes end sites
  int64_t channel_count() const;  // total motion channels per frame
  // Rotation axis order (0/1/2) of a joint's three rotation channels.
  std::array<int, 3> rotation_order(int64_t joint) const;
  void validate() const;  // single root, acyclic, parents precede children
};

struct MotionClip {
  Skeleton skeleton;
  Tensor frames;  // n_frames × channel_count, rotations in degrees
  double fps = 0;

  int64_t frame_count() const { return frames.dim(0); }
  double duration_seconds() const { return static_cast<double>(frame_count()) / fps; }
};

struct AudioClip {
  std::vector<double> samples;  // mono, in [-1, 1]
  double rate = 0;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / rate;
  }
};

// --- BVH -------------------------------------------------------------------

MotionClip parse_bvh(const std::string& text);
MotionClip parse_bvh_file(const std::string& path);
std::string write_bvh(const MotionClip& clip);
void write_bvh_file(const std::string& path, const MotionClip& clip);

// --- rotations and features -------------------------------------------------

// Euler angles (per `order`, degrees by default) to an exponential-map
// triplet, continuity-matched against the previous frame when given.
Vec3 euler_to_expmap(const std::array<double, 3>& angles,
                     const std::array<int, 3>& order, bool degrees = true,
                     const Vec3* previous = nullptr);

// Per-frame 6-vector: translational velocity in the root's horizontal heading
// frame and rotational velocity as the per-frame orientation delta, both per
// second. Requires >= 2 frames.
Tensor root_velocities(const MotionClip& clip);

// Full feature extraction: 3 expmap channels per joint then the 6 root
// velocity channels. Column layout is [joint0.xyz ... jointJ.xyz, vel0..vel5].
GestureSequence motion_to_gesture(const MotionClip& clip);

// Inverse mapping for synthesis output: expmap channels back to Euler degrees
// on the given skeleton; root translation integrated from heading-frame
// velocity channels.
MotionClip gesture_to_motion(const GestureSequence& g, const Skeleton& skeleton);

// --- resampling and segmentation ---------------------------------------------

// Uniform downsampling with linear interpolation on continuity-fixed expmap
// channels (position channels interpolate directly). target must not exceed
// the source rate.
MotionClip resample_motion(const MotionClip& clip, double target_fps = 20.0);

// Windowed-sinc resampling; target must not exceed the source rate.
// Output length is round(len * target / source).
AudioClip resample_audio(const AudioClip& a, double target_rate = 16000.0);

struct ClipPair {
  GestureSequence gesture;
  AudioClip audio;
  double offset_seconds = 0;
};

// Aligned non-overlapping windows (stride defaults to the window length);
// trailing remainder dropped. Streams must agree in duration within half a
// gesture frame.
std::vector<ClipPair> segment_clips(const GestureSequence& motion,
                                    const AudioClip& audio, double seconds = 20.0,
                                    std::optional<double> stride_seconds = {});

// --- WAV ---------------------------------------------------------------------

AudioClip read_wav_file(const std::string& path);  // PCM 16/24-bit or float32
void write_wav_file(const std::string& path, const AudioClip& clip);

// --- JSON helpers for manifests ----------------------------------------------

std::string skeleton_to_json(const Skeleton& s);
Skeleton skeleton_from_json(const std::string& json_text);

}  // namespace dim
