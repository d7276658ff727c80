#pragma once

#include <string>
#include <vector>

#include "dim/dataio.hpp"
#include "dim/gesture.hpp"
#include "dim/nn.hpp"

namespace dim {

// Sufficient statistics of a sample set: mean, covariance, count.
struct GaussianSummary {
  std::vector<double> mean;
  std::vector<double> cov;  // d×d row-major, symmetric PSD
  int64_t count = 0;

  int64_t dims() const { return static_cast<int64_t>(mean.size()); }
  // Fits from rows of a T×d matrix; optional diagonal loading.
  static GaussianSummary fit(const Tensor& rows, double diag_load = 0.0);
};

// Symmetric eigendecomposition (cyclic Jacobi). Returns eigenvalues;
// eigenvectors (columns) written to `vectors` when non-null.
std::vector<double> symmetric_eigenvalues(const std::vector<double>& matrix,
                                          int64_t d,
                                          std::vector<double>* vectors = nullptr);

// ||mu_p - mu_q||^2 + Tr(Sp + Sq - 2 (Sp Sq)^{1/2}), the matrix square root
// taken through the symmetrized product; tiny negative eigenvalues clamp to 0.
double frechet_distance(const GaussianSummary& p, const GaussianSummary& q);

// Gaussian fit over flattened per-frame pose vectors, then frechet_distance.
// Singular covariances are handled by 1e-6 diagonal loading.
double fgd_raw(const std::vector<GestureSequence>& generated,
               const std::vector<GestureSequence>& reference);

// Small convolutional motion autoencoder used as the feature-space embedder.
// Scores are comparable only across runs sharing one embedder; id() names it.
class MotionEmbedder {
 public:
  MotionEmbedder() = default;
  MotionEmbedder(int64_t channels, int64_t latent, Rng& rng);

  Tensor embed(const Tensor& y) const;  // T×C -> T×latent
  Tensor reconstruct(const Tensor& y, Tape* tape = nullptr) const;
  // Reconstruction training on the reference set; marks the embedder trained.
  void train(const std::vector<GestureSequence>& reference, int64_t steps,
             double lr, Rng& rng);

  bool trained() const { return trained_; }
  int64_t channels() const { return enc1_.dim(1); }
  int64_t latent() const { return enc2_.dim(2); }
  std::string id() const;  // content hash of the parameters

  void save(const std::string& path) const;  // params + JSON manifest
  static MotionEmbedder load(const std::string& path);

 private:
  void collect(ParamRegistry& reg) const;
  Tensor enc1_, enc1_b_, enc2_, enc2_b_;  // k=5 convolutions
  Tensor dec1_, dec1_b_, dec2_, dec2_b_;
  bool trained_ = false;
};

// Gaussian fit in the embedder's latent space, then frechet_distance.
// Rejects an untrained embedder.
double fgd_feature(const std::vector<GestureSequence>& generated,
                   const std::vector<GestureSequence>& reference,
                   const MotionEmbedder& embedder);

struct BeatSet {
  std::vector<double> times;  // strictly increasing, seconds
};

// Spectral-flux onset envelope (10 ms hop) with adaptive-threshold peak
// picking. Silence yields an empty set.
BeatSet detect_audio_beats(const AudioClip& audio);

// Local minima of smoothed joint-velocity magnitude, >= 0.1 s apart.
BeatSet detect_gesture_beats(const GestureSequence& gesture);

// Mean over gesture beats of exp(-d^2 / (2 sigma^2)) to the nearest audio
// beat; empty input on either side scores 0.
double beat_align(const BeatSet& gesture_beats, const BeatSet& audio_beats,
                  double sigma = 0.1);

}  // namespace dim
