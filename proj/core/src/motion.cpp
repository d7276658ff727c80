#include <cmath>
#include <stdexcept>
#include <vector>

#include "dim/dataio.hpp"

namespace dim {

namespace {

constexpr double kDegToRad = M_PI / 180.0;
constexpr double kRadToDeg = 180.0 / M_PI;

// Per-joint slice of the frame channel vector.
struct JointLayout {
  std::vector<int64_t> start;  // channel offset per joint
  std::vector<int64_t> rot_index;  // index of first rotation channel, -1 if none
};

JointLayout layout_of(const Skeleton& s) {
  JointLayout l;
  int64_t off = 0;
  for (const Joint& j : s.joints) {
    l.start.push_back(off);
    int64_t rot = -1;
    for (size_t c = 0; c < j.channels.size(); ++c) {
      Channel ch = j.channels[c];
      if (rot < 0 && (ch == Channel::kXrot || ch == Channel::kYrot || ch == Channel::kZrot))
        rot = off + static_cast<int64_t>(c);
    }
    l.rot_index.push_back(rot);
    off += static_cast<int64_t>(j.channels.size());
  }
  return l;
}

Mat3 joint_rotation(const MotionClip& clip, const JointLayout& l, int64_t joint,
                    int64_t frame) {
  const Joint& j = clip.skeleton.joints[static_cast<size_t>(joint)];
  std::array<double, 3> rad{};
  std::array<int, 3> order = clip.skeleton.rotation_order(joint);
  int found = 0;
  for (size_t c = 0; c < j.channels.size(); ++c) {
    Channel ch = j.channels[c];
    if (ch == Channel::kXrot || ch == Channel::kYrot || ch == Channel::kZrot) {
      rad[static_cast<size_t>(found++)] =
          clip.frames(frame, l.start[static_cast<size_t>(joint)] +
                                 static_cast<int64_t>(c)) *
          kDegToRad;
    }
  }
  return euler_to_matrix(rad, order);
}

Vec3 root_position(const MotionClip& clip, const JointLayout& l, int64_t frame) {
  const Joint& root = clip.skeleton.joints[0];
  Vec3 p = {0, 0, 0};
  for (size_t c = 0; c < root.channels.size(); ++c) {
    double v = clip.frames(frame, l.start[0] + static_cast<int64_t>(c));
    switch (root.channels[c]) {
      case Channel::kXpos: p.x = v; break;
      case Channel::kYpos: p.y = v; break;
      case Channel::kZpos: p.z = v; break;
      default: break;
    }
  }
  return p;
}

// Rotation about the vertical (Y) axis aligning +Z with the root's projected
// forward direction. Falls back to identity when the forward axis is nearly
// vertical.
Mat3 heading_frame(const Mat3& root_rot) {
  Vec3 fwd = root_rot * Vec3{0, 0, 1};
  double n = std::sqrt(fwd.x * fwd.x + fwd.z * fwd.z);
  if (n < 1e-8) return Mat3::identity();
  double psi = std::atan2(fwd.x, fwd.z);
  return Mat3::axis_rotation(1, psi);
}

}  // namespace

Vec3 euler_to_expmap(const std::array<double, 3>& angles,
                     const std::array<int, 3>& order, bool degrees,
                     const Vec3* previous) {
  std::array<double, 3> rad = angles;
  if (degrees)
    for (double& a : rad) a *= kDegToRad;
  Vec3 e = matrix_to_expmap(euler_to_matrix(rad, order));
  if (previous) e = expmap_nearest(e, *previous);
  return e;
}

Tensor root_velocities(const MotionClip& clip) {
  if (clip.frame_count() < 2)
    throw std::invalid_argument("root_velocities: need at least 2 frames");
  JointLayout l = layout_of(clip.skeleton);
  int64_t n = clip.frame_count();
  Tensor vel({n, 6});
  for (int64_t t = 1; t < n; ++t) {
    Mat3 rot_prev = joint_rotation(clip, l, 0, t - 1);
    Mat3 rot_cur = joint_rotation(clip, l, 0, t);
    Vec3 dp = root_position(clip, l, t) - root_position(clip, l, t - 1);
    Vec3 local = heading_frame(rot_prev).transposed() * dp;
    Vec3 omega = matrix_to_expmap(rot_cur * rot_prev.transposed());
    vel(t, 0) = local.x * clip.fps;
    vel(t, 1) = local.y * clip.fps;
    vel(t, 2) = local.z * clip.fps;
    vel(t, 3) = omega.x * clip.fps;
    vel(t, 4) = omega.y * clip.fps;
    vel(t, 5) = omega.z * clip.fps;
  }
  for (int64_t c = 0; c < 6; ++c) vel(0, c) = vel(1, c);
  return vel;
}

GestureSequence motion_to_gesture(const MotionClip& clip) {
  if (clip.frame_count() < 2)
    throw std::invalid_argument("motion_to_gesture: need at least 2 frames");
  JointLayout l = layout_of(clip.skeleton);
  const Skeleton& s = clip.skeleton;
  int64_t n = clip.frame_count();
  int64_t J = s.joint_count();
  Tensor y({n, 3 * J + 6});
  std::vector<Vec3> prev(static_cast<size_t>(J));
  int64_t jc = 0;
  for (size_t ji = 0; ji < s.joints.size(); ++ji) {
    if (s.joints[ji].end_site) continue;
    for (int64_t t = 0; t < n; ++t) {
      Vec3 e = matrix_to_expmap(joint_rotation(clip, l, static_cast<int64_t>(ji), t));
      if (t > 0) e = expmap_nearest(e, prev[static_cast<size_t>(jc)]);
      prev[static_cast<size_t>(jc)] = e;
      y(t, 3 * jc + 0) = e.x;
      y(t, 3 * jc + 1) = e.y;
      y(t, 3 * jc + 2) = e.z;
    }
    ++jc;
  }
  Tensor vel = root_velocities(clip);
  for (int64_t t = 0; t < n; ++t)
    for (int64_t c = 0; c < 6; ++c) y(t, 3 * J + c) = vel(t, c);
  GestureSequence g;
  g.values = y;
  g.fps = clip.fps;
  return g;
}

MotionClip gesture_to_motion(const GestureSequence& g, const Skeleton& skeleton) {
  skeleton.validate();
  int64_t J = skeleton.joint_count();
  if (g.channels() != 3 * J + 6)
    throw std::invalid_argument("gesture_to_motion: channel count does not match skeleton");
  int64_t n = g.frames();
  MotionClip clip;
  clip.skeleton = skeleton;
  clip.fps = g.fps;
  clip.frames = Tensor({n, skeleton.channel_count()});
  JointLayout l = layout_of(skeleton);

  // Joint rotations.
  int64_t jc = 0;
  for (size_t ji = 0; ji < skeleton.joints.size(); ++ji) {
    const Joint& j = skeleton.joints[ji];
    if (j.end_site) continue;
    std::array<int, 3> order = skeleton.rotation_order(static_cast<int64_t>(ji));
    for (int64_t t = 0; t < n; ++t) {
      Vec3 e{g.values(t, 3 * jc + 0), g.values(t, 3 * jc + 1), g.values(t, 3 * jc + 2)};
      std::array<double, 3> rad = matrix_to_euler(expmap_to_matrix(e), order);
      int found = 0;
      for (size_t c = 0; c < j.channels.size(); ++c) {
        Channel ch = j.channels[c];
        if (ch == Channel::kXrot || ch == Channel::kYrot || ch == Channel::kZrot) {
          clip.frames(t, l.start[ji] + static_cast<int64_t>(c)) =
              rad[static_cast<size_t>(found++)] * kRadToDeg;
        }
      }
    }
    ++jc;
  }

  // Root trajectory integrated from heading-frame translational velocity.
  const Joint& root = skeleton.joints[0];
  Vec3 p{0, 0, 0};
  for (int64_t t = 0; t < n; ++t) {
    if (t > 0) {
      Mat3 rot_prev = joint_rotation(clip, l, 0, t - 1);
      Vec3 v{g.values(t, 3 * J + 0), g.values(t, 3 * J + 1), g.values(t, 3 * J + 2)};
      p = p + heading_frame(rot_prev) * (v * (1.0 / g.fps));
    }
    for (size_t c = 0; c < root.channels.size(); ++c) {
      switch (root.channels[c]) {
        case Channel::kXpos:
          clip.frames(t, l.start[0] + static_cast<int64_t>(c)) = p.x;
          break;
        case Channel::kYpos:
          clip.frames(t, l.start[0] + static_cast<int64_t>(c)) = p.y;
          break;
        case Channel::kZpos:
          clip.frames(t, l.start[0] + static_cast<int64_t>(c)) = p.z;
          break;
        default:
          break;
      }
    }
  }
  return clip;
}

MotionClip resample_motion(const MotionClip& clip, double target_fps) {
  if (target_fps > clip.fps + 1e-9)
    throw std::invalid_argument("resample_motion: upsampling requested");
  if (std::abs(target_fps - clip.fps) < 1e-9) return clip;
  const Skeleton& s = clip.skeleton;
  JointLayout l = layout_of(s);
  int64_t n_src = clip.frame_count();
  int64_t n_out = static_cast<int64_t>(std::floor(
                      static_cast<double>(n_src - 1) * target_fps / clip.fps)) + 1;

  // Continuity-fixed expmap track per joint; other channels interpolate raw.
  int64_t n_ch = s.channel_count();
  Tensor expcols({n_src, n_ch});  // rotation channels replaced by expmap triplets
  for (int64_t t = 0; t < n_src; ++t)
    for (int64_t c = 0; c < n_ch; ++c) expcols(t, c) = clip.frames(t, c);
  for (size_t ji = 0; ji < s.joints.size(); ++ji) {
    if (s.joints[ji].end_site) continue;
    Vec3 prev;
    for (int64_t t = 0; t < n_src; ++t) {
      Vec3 e = matrix_to_expmap(joint_rotation(clip, l, static_cast<int64_t>(ji), t));
      if (t > 0) e = expmap_nearest(e, prev);
      prev = e;
      int64_t base = l.rot_index[ji];
      expcols(t, base + 0) = e.x;
      expcols(t, base + 1) = e.y;
      expcols(t, base + 2) = e.z;
    }
  }

  MotionClip out;
  out.skeleton = s;
  out.fps = target_fps;
  out.frames = Tensor({n_out, n_ch});
  for (int64_t i = 0; i < n_out; ++i) {
    double pos = static_cast<double>(i) * clip.fps / target_fps;
    int64_t lo = std::min(static_cast<int64_t>(pos), n_src - 1);
    int64_t hi = std::min(lo + 1, n_src - 1);
    double f = pos - static_cast<double>(lo);
    for (int64_t c = 0; c < n_ch; ++c)
      out.frames(i, c) = (1.0 - f) * expcols(lo, c) + f * expcols(hi, c);
    // Interpolated expmap triplets back to Euler degrees.
    for (size_t ji = 0; ji < s.joints.size(); ++ji) {
      if (s.joints[ji].end_site) continue;
      int64_t base = l.rot_index[ji];
      Vec3 e{out.frames(i, base + 0), out.frames(i, base + 1), out.frames(i, base + 2)};
      std::array<double, 3> rad =
          matrix_to_euler(expmap_to_matrix(e), s.rotation_order(static_cast<int64_t>(ji)));
      out.frames(i, base + 0) = rad[0] * kRadToDeg;
      out.frames(i, base + 1) = rad[1] * kRadToDeg;
      out.frames(i, base + 2) = rad[2] * kRadToDeg;
    }
  }
  return out;
}

std::vector<ClipPair> segment_clips(const GestureSequence& motion,
                                    const AudioClip& audio, double seconds,
                                    std::optional<double> stride_seconds) {
  if (seconds <= 0) throw std::invalid_argument("segment_clips: bad window");
  double half_frame = 0.5 / motion.fps;
  double motion_dur = static_cast<double>(motion.frames()) / motion.fps;
  if (std::abs(motion_dur - audio.duration_seconds()) > half_frame)
    throw std::invalid_argument(
        "segment_clips: motion and audio durations differ by more than half a frame");
  double stride = stride_seconds.value_or(seconds);
  if (stride <= 0) throw std::invalid_argument("segment_clips: bad stride");
  int64_t wf = static_cast<int64_t>(std::llround(seconds * motion.fps));
  int64_t ws = static_cast<int64_t>(std::llround(seconds * audio.rate));
  int64_t sf = static_cast<int64_t>(std::llround(stride * motion.fps));
  int64_t ss = static_cast<int64_t>(std::llround(stride * audio.rate));
  std::vector<ClipPair> out;
  for (int64_t i = 0;; ++i) {
    int64_t f0 = i * sf, s0 = i * ss;
    if (f0 + wf > motion.frames() ||
        s0 + ws > static_cast<int64_t>(audio.samples.size()))
      break;
    ClipPair pair;
    pair.offset_seconds = static_cast<double>(f0) / motion.fps;
    pair.gesture.fps = motion.fps;
    pair.gesture.values = Tensor({wf, motion.channels()});
    for (int64_t t = 0; t < wf; ++t)
      for (int64_t c = 0; c < motion.channels(); ++c)
        pair.gesture.values(t, c) = motion.values(f0 + t, c);
    pair.audio.rate = audio.rate;
    pair.audio.samples.assign(audio.samples.begin() + s0,
                              audio.samples.begin() + s0 + ws);
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace dim
