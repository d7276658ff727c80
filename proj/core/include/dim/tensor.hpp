#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace dim {

// Storage dtype for the binary tensor format. In-memory math is always f64;
// f32 exists for compact files and the benchmark kernels.
enum class DType : uint8_t { kF64 = 0, kF32 = 1 };

// Dense n-d array of doubles with an optional same-shape gradient buffer.
// Copies are shallow: they alias the same storage, so a tensor handed to a
// module and the module's member see one set of values and one gradient.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape);
  Tensor(std::vector<int64_t> shape, std::vector<double> values);

  static Tensor zeros(std::vector<int64_t> shape);
  static Tensor full(std::vector<int64_t> shape, double value);
  static Tensor scalar(double value);
  static Tensor row(std::vector<double> values);

  bool defined() const { return static_cast<bool>(st_); }
  int rank() const;
  int64_t dim(int i) const;
  const std::vector<int64_t>& shape() const;
  int64_t numel() const;
  int64_t rows() const { return dim(0); }
  int64_t cols() const { return dim(1); }

  double* data();
  const double* data() const;
  double& operator()(int64_t i);
  double operator()(int64_t i) const;
  double& operator()(int64_t i, int64_t j);
  double operator()(int64_t i, int64_t j) const;
  double& operator()(int64_t i, int64_t j, int64_t k);
  double operator()(int64_t i, int64_t j, int64_t k) const;

  // Gradient buffer, allocated zero-filled on first access.
  bool has_grad() const;
  double* grad();
  const double* grad_if() const;  // nullptr when never touched
  void zero_grad();

  Tensor clone() const;  // deep copy of values, no gradient
  bool shares_storage(const Tensor& other) const { return st_ == other.st_; }

  bool all_finite() const;
  void require_finite(const std::string& what) const;

 private:
  struct Storage {
    std::vector<int64_t> shape;
    std::vector<double> data;
    std::unique_ptr<std::vector<double>> grad;
  };
  std::shared_ptr<Storage> st_;
};

// Ordered record of primitive operations. Each recorded step, when replayed,
// propagates the gradient of one op from its output to its inputs. Steps are
// appended in execution order, so replaying back-to-front visits the graph in
// reverse topological order. A tape may be consumed by backward() once.
class Tape {
 public:
  void record(std::function<void()> step);
  // Seeds loss.grad with 1 and replays all steps in reverse.
  // Errors: non-scalar loss, tape already consumed.
  void backward(Tensor loss);
  void reset();
  std::size_t size() const { return steps_.size(); }
  bool consumed() const { return consumed_; }

 private:
  std::vector<std::function<void()>> steps_;
  bool consumed_ = false;
};

// Binary tensor format: magic "DIMT", version u32, rank u32, dims u32[rank],
// dtype u8, then raw little-endian data. Used by clip stores, checkpoints and
// golden files.
void save_tensor(std::ostream& out, const Tensor& t, DType dtype = DType::kF64);
Tensor load_tensor(std::istream& in);
void save_tensor_file(const std::string& path, const Tensor& t,
                      DType dtype = DType::kF64);
Tensor load_tensor_file(const std::string& path);

}  // namespace dim
