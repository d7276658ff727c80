#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "dim/dataio.hpp"
#include "dim/rng.hpp"
#include "dim/ssd.hpp"
#include "dim/tensor.hpp"

namespace dimtest {

inline dim::Tensor random_tensor(std::vector<int64_t> shape, dim::Rng& rng,
                                 double lo = -1.0, double hi = 1.0) {
  dim::Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

inline dim::SSDParams random_ssd_params(int64_t T, int64_t S, dim::Rng& rng) {
  dim::SSDParams p;
  p.a = random_tensor({T, 1}, rng, 0.0, 1.0);
  p.B = random_tensor({T, S}, rng);
  p.C = random_tensor({T, S}, rng);
  return p;
}

inline double max_abs_diff(const dim::Tensor& a, const dim::Tensor& b) {
  double m = 0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

struct FdReport {
  double max_rel_err = 0;
  int64_t coords_checked = 0;
};

// Central finite differences against tape gradients. loss_fn must evaluate
// the same computation each call (deterministic), recording on the tape when
// one is passed. Checks every coordinate when a parameter is small, otherwise
// an evenly spaced subset.
inline FdReport fd_check(const std::function<dim::Tensor(dim::Tape*)>& loss_fn,
                         std::vector<dim::Tensor> params, double h = 1e-5,
                         int64_t max_coords_per_param = 8) {
  dim::Tape tape;
  dim::Tensor loss = loss_fn(&tape);
  for (auto& p : params) p.zero_grad();
  tape.backward(loss);
  FdReport rep;
  for (auto& p : params) {
    const double* g = p.grad_if();
    int64_t n = p.numel();
    int64_t step = n <= max_coords_per_param ? 1 : n / max_coords_per_param;
    for (int64_t i = 0; i < n; i += step) {
      double saved = p.data()[i];
      p.data()[i] = saved + h;
      double up = loss_fn(nullptr)(0);
      p.data()[i] = saved - h;
      double down = loss_fn(nullptr)(0);
      p.data()[i] = saved;
      double numeric = (up - down) / (2.0 * h);
      double analytic = g ? g[i] : 0.0;
      double err = std::abs(analytic - numeric) /
                   std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      rep.max_rel_err = std::max(rep.max_rel_err, err);
      ++rep.coords_checked;
    }
  }
  return rep;
}

// Minimal two-joint skeleton: root with full channels, one child, an end site.
inline dim::Skeleton two_joint_skeleton() {
  dim::Skeleton s;
  dim::Joint root;
  root.name = "Hips";
  root.parent = -1;
  root.offset = {0, 1, 0};
  root.channels = {dim::Channel::kXpos, dim::Channel::kYpos, dim::Channel::kZpos,
                   dim::Channel::kZrot, dim::Channel::kXrot, dim::Channel::kYrot};
  dim::Joint child;
  child.name = "Spine";
  child.parent = 0;
  child.offset = {0, 0.5, 0};
  child.channels = {dim::Channel::kZrot, dim::Channel::kXrot, dim::Channel::kYrot};
  dim::Joint end;
  end.name = "EndSite";
  end.parent = 1;
  end.offset = {0, 0.25, 0};
  end.end_site = true;
  s.joints = {root, child, end};
  return s;
}

// Chain skeleton with `joints` rotating joints (root has position channels).
inline dim::Skeleton chain_skeleton(int64_t joints) {
  dim::Skeleton s;
  for (int64_t i = 0; i < joints; ++i) {
    dim::Joint j;
    j.name = i == 0 ? "Hips" : ("J" + std::to_string(i));
    j.parent = static_cast<int>(i - 1);
    j.offset = {0, i == 0 ? 1.0 : 0.2, 0};
    if (i == 0)
      j.channels = {dim::Channel::kXpos, dim::Channel::kYpos, dim::Channel::kZpos,
                    dim::Channel::kZrot, dim::Channel::kXrot, dim::Channel::kYrot};
    else
      j.channels = {dim::Channel::kZrot, dim::Channel::kXrot, dim::Channel::kYrot};
    s.joints.push_back(j);
  }
  dim::Joint end;
  end.name = "EndSite";
  end.parent = static_cast<int>(joints - 1);
  end.offset = {0, 0.2, 0};
  end.end_site = true;
  s.joints.push_back(end);
  return s;
}

// Smooth synthetic motion on a chain skeleton.
inline dim::MotionClip synthetic_motion(const dim::Skeleton& skel, int64_t frames,
                                        double fps, dim::Rng& rng) {
  dim::MotionClip clip;
  clip.skeleton = skel;
  clip.fps = fps;
  int64_t n_ch = skel.channel_count();
  clip.frames = dim::Tensor({frames, n_ch});
  std::vector<double> phase(static_cast<size_t>(n_ch));
  std::vector<double> amp(static_cast<size_t>(n_ch));
  std::vector<double> freq(static_cast<size_t>(n_ch));
  for (int64_t c = 0; c < n_ch; ++c) {
    phase[static_cast<size_t>(c)] = rng.uniform(0, 2 * M_PI);
    amp[static_cast<size_t>(c)] = rng.uniform(5.0, 25.0);
    freq[static_cast<size_t>(c)] = rng.uniform(0.3, 1.5);
  }
  for (int64_t t = 0; t < frames; ++t)
    for (int64_t c = 0; c < n_ch; ++c) {
      double x = static_cast<double>(t) / fps;
      clip.frames(t, c) = amp[static_cast<size_t>(c)] *
                          std::sin(2 * M_PI * freq[static_cast<size_t>(c)] * x +
                                   phase[static_cast<size_t>(c)]);
    }
  return clip;
}

inline dim::AudioClip sine_audio(double seconds, double freq_hz,
                                 double rate = 16000.0, double amp = 0.4) {
  dim::AudioClip a;
  a.rate = rate;
  int64_t n = static_cast<int64_t>(std::llround(seconds * rate));
  a.samples.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    a.samples[static_cast<size_t>(i)] =
        amp * std::sin(2 * M_PI * freq_hz * static_cast<double>(i) / rate);
  return a;
}

}  // namespace dimtest
