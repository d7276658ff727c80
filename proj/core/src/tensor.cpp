#include "dim/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dim {

namespace {

int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dims must be positive");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int64_t> shape) {
  int64_t n = shape_numel(shape);
  st_ = std::make_shared<Storage>();
  st_->shape = std::move(shape);
  st_->data.assign(static_cast<size_t>(n), 0.0);
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> values) {
  int64_t n = shape_numel(shape);
  if (n != static_cast<int64_t>(values.size()))
    throw std::invalid_argument("tensor data length does not match shape");
  st_ = std::make_shared<Storage>();
  st_->shape = std::move(shape);
  st_->data = std::move(values);
}

Tensor Tensor::zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = value;
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::row(std::vector<double> values) {
  int64_t n = static_cast<int64_t>(values.size());
  return Tensor({n}, std::move(values));
}

int Tensor::rank() const { return static_cast<int>(st_->shape.size()); }

int64_t Tensor::dim(int i) const {
  if (i < 0 || i >= rank()) throw std::out_of_range("tensor dim index");
  return st_->shape[static_cast<size_t>(i)];
}

const std::vector<int64_t>& Tensor::shape() const { return st_->shape; }

int64_t Tensor::numel() const { return static_cast<int64_t>(st_->data.size()); }

double* Tensor::data() { return st_->data.data(); }
const double* Tensor::data() const { return st_->data.data(); }

double& Tensor::operator()(int64_t i) { return st_->data[static_cast<size_t>(i)]; }
double Tensor::operator()(int64_t i) const { return st_->data[static_cast<size_t>(i)]; }

double& Tensor::operator()(int64_t i, int64_t j) {
  return st_->data[static_cast<size_t>(i * st_->shape[1] + j)];
}
double Tensor::operator()(int64_t i, int64_t j) const {
  return st_->data[static_cast<size_t>(i * st_->shape[1] + j)];
}

double& Tensor::operator()(int64_t i, int64_t j, int64_t k) {
  return st_->data[static_cast<size_t>((i * st_->shape[1] + j) * st_->shape[2] + k)];
}
double Tensor::operator()(int64_t i, int64_t j, int64_t k) const {
  return st_->data[static_cast<size_t>((i * st_->shape[1] + j) * st_->shape[2] + k)];
}

bool Tensor::has_grad() const { return st_ && st_->grad != nullptr; }

double* Tensor::grad() {
  if (!st_->grad)
    st_->grad = std::make_unique<std::vector<double>>(st_->data.size(), 0.0);
  return st_->grad->data();
}

const double* Tensor::grad_if() const {
  return st_ && st_->grad ? st_->grad->data() : nullptr;
}

void Tensor::zero_grad() {
  if (st_ && st_->grad) std::fill(st_->grad->begin(), st_->grad->end(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor t;
  t.st_ = std::make_shared<Storage>();
  t.st_->shape = st_->shape;
  t.st_->data = st_->data;
  return t;
}

bool Tensor::all_finite() const {
  for (double v : st_->data)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::require_finite(const std::string& what) const {
  if (!all_finite())
    throw std::runtime_error("non-finite values in " + what);
}

void Tape::record(std::function<void()> step) {
  steps_.push_back(std::move(step));
}

void Tape::backward(Tensor loss) {
  if (consumed_)
    throw std::runtime_error("tape already consumed; reset before reuse");
  if (loss.numel() != 1)
    throw std::invalid_argument("backward expects a scalar loss");
  consumed_ = true;
  loss.grad()[0] = 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

void Tape::reset() {
  steps_.clear();
  consumed_ = false;
}

// --- serialization ---------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'I', 'M', 'T'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("tensor stream truncated");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_u64_le(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64_le(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("tensor stream truncated");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_tensor(std::ostream& out, const Tensor& t, DType dtype) {
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i)
    write_u32(out, static_cast<uint32_t>(t.dim(i)));
  char dt = static_cast<char>(dtype);
  out.write(&dt, 1);
  if (dtype == DType::kF64) {
    for (int64_t i = 0; i < t.numel(); ++i) {
      uint64_t bits;
      double v = t.data()[i];
      std::memcpy(&bits, &v, 8);
      write_u64_le(out, bits);
    }
  } else {
    for (int64_t i = 0; i < t.numel(); ++i) {
      float f = static_cast<float>(t.data()[i]);
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      write_u32(out, bits);
    }
  }
  if (!out) throw std::runtime_error("tensor write failed");
}

Tensor load_tensor(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("bad tensor magic (expected DIMT)");
  uint32_t version = read_u32(in);
  if (version != kVersion)
    throw std::runtime_error("unsupported tensor format version " + std::to_string(version));
  uint32_t rank = read_u32(in);
  if (rank > 8) throw std::runtime_error("implausible tensor rank");
  std::vector<int64_t> shape(rank);
  for (uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<int64_t>(read_u32(in));
  char dt;
  in.read(&dt, 1);
  if (!in) throw std::runtime_error("tensor stream truncated");
  Tensor t(shape);
  if (static_cast<DType>(dt) == DType::kF64) {
    for (int64_t i = 0; i < t.numel(); ++i) {
      uint64_t bits = read_u64_le(in);
      double v;
      std::memcpy(&v, &bits, 8);
      t.data()[i] = v;
    }
  } else if (static_cast<DType>(dt) == DType::kF32) {
    for (int64_t i = 0; i < t.numel(); ++i) {
      uint32_t bits = read_u32(in);
      float f;
      std::memcpy(&f, &bits, 4);
      t.data()[i] = static_cast<double>(f);
    }
  } else {
    throw std::runtime_error("unknown tensor dtype");
  }
  return t;
}

void save_tensor_file(const std::string& path, const Tensor& t, DType dtype) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  save_tensor(out, t, dtype);
}

Tensor load_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return load_tensor(in);
}

}  // namespace dim
