#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dim/ops.hpp"
#include "dim/rng.hpp"
#include "dim/tensor.hpp"

namespace dim {

// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
Tensor uniform_init(std::vector<int64_t> shape, int64_t fan_in, Rng& rng);

struct Linear {
  Tensor w;  // d_in × d_out
  Tensor b;  // [d_out], undefined when bias disabled

  Linear() = default;
  Linear(int64_t d_in, int64_t d_out, Rng& rng, bool bias = true);
  Tensor forward(const Tensor& x, Tape* tape = nullptr) const;
  int64_t d_in() const { return w.dim(0); }
  int64_t d_out() const { return w.dim(1); }
};

// Two affine layers with SiLU between.
struct Mlp {
  Linear l1, l2;

  Mlp() = default;
  Mlp(int64_t d_in, int64_t hidden, int64_t d_out, Rng& rng);
  Tensor forward(const Tensor& x, Tape* tape = nullptr) const;
  void zero_output_layer();  // zeroes l2 weights and bias
};

// Flat list of named parameter handles. Handles alias module storage, so
// loading into the registry updates the owning modules in place.
class ParamRegistry {
 public:
  void add(const std::string& name, const Tensor& t);
  int64_t count() const;  // total scalar parameters
  void zero_grads();
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::vector<std::pair<std::string, Tensor>>& items() { return items_; }
  Tensor& find(const std::string& name);

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

// Named tensor table: magic "DIMC", version u32, count u32, then per entry
// name_len u32, name bytes, and one tensor in the binary tensor format.
void save_named_tensors(const std::string& path,
                        const std::vector<std::pair<std::string, Tensor>>& items);
std::map<std::string, Tensor> load_named_tensors(const std::string& path);

// Copies values from a named tensor file into registry entries (shape-checked).
void load_into_registry(const std::string& path, ParamRegistry& reg);

// Adaptive moment estimation with bias correction; updates happen in place.
class Adam {
 public:
  Adam(ParamRegistry& reg, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step();
  int64_t steps_taken() const { return t_; }

  // Moment state round-trip for resumable training.
  std::vector<std::pair<std::string, Tensor>> state() const;
  void load_state(const std::map<std::string, Tensor>& state);

 private:
  ParamRegistry& reg_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace dim
