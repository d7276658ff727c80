#include "dim/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dim {

Tensor uniform_init(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-bound, bound);
  return t;
}

Linear::Linear(int64_t d_in, int64_t d_out, Rng& rng, bool bias) {
  w = uniform_init({d_in, d_out}, d_in, rng);
  if (bias) b = uniform_init({d_out}, d_in, rng);
}

Tensor Linear::forward(const Tensor& x, Tape* tape) const {
  Tensor y = matmul(x, w, tape);
  if (b.defined()) y = add_rowvec(y, b, tape);
  return y;
}

Mlp::Mlp(int64_t d_in, int64_t hidden, int64_t d_out, Rng& rng)
    : l1(d_in, hidden, rng), l2(hidden, d_out, rng) {}

Tensor Mlp::forward(const Tensor& x, Tape* tape) const {
  return l2.forward(silu(l1.forward(x, tape), tape), tape);
}

void Mlp::zero_output_layer() {
  for (int64_t i = 0; i < l2.w.numel(); ++i) l2.w.data()[i] = 0.0;
  for (int64_t i = 0; i < l2.b.numel(); ++i) l2.b.data()[i] = 0.0;
}

void ParamRegistry::add(const std::string& name, const Tensor& t) {
  if (!t.defined()) return;
  for (const auto& [n, _] : items_)
    if (n == name) throw std::invalid_argument("duplicate parameter name: " + name);
  items_.emplace_back(name, t);
}

int64_t ParamRegistry::count() const {
  int64_t n = 0;
  for (const auto& [_, t] : items_) n += t.numel();
  return n;
}

void ParamRegistry::zero_grads() {
  for (auto& [_, t] : items_) t.zero_grad();
}

Tensor& ParamRegistry::find(const std::string& name) {
  for (auto& [n, t] : items_)
    if (n == name) return t;
  throw std::out_of_range("no parameter named " + name);
}

namespace {

constexpr char kTableMagic[4] = {'D', 'I', 'M', 'C'};

void write_u32le(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("named tensor table truncated");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_named_tensors(const std::string& path,
                        const std::vector<std::pair<std::string, Tensor>>& items) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out.write(kTableMagic, 4);
  write_u32le(out, 1);
  write_u32le(out, static_cast<uint32_t>(items.size()));
  for (const auto& [name, t] : items) {
    write_u32le(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    save_tensor(out, t);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::map<std::string, Tensor> load_named_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kTableMagic, 4) != 0)
    throw std::runtime_error("bad table magic in " + path);
  uint32_t version = read_u32le(in);
  if (version != 1) throw std::runtime_error("unsupported table version");
  uint32_t count = read_u32le(in);
  std::map<std::string, Tensor> out;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t len = read_u32le(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) throw std::runtime_error("named tensor table truncated");
    out[name] = load_tensor(in);
  }
  return out;
}

void load_into_registry(const std::string& path, ParamRegistry& reg) {
  auto table = load_named_tensors(path);
  for (auto& [name, dst] : reg.items()) {
    auto it = table.find(name);
    if (it == table.end())
      throw std::runtime_error("checkpoint missing parameter " + name);
    if (it->second.shape() != dst.shape())
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    std::copy(it->second.data(), it->second.data() + it->second.numel(), dst.data());
  }
}

Adam::Adam(ParamRegistry& reg, double lr, double beta1, double beta2, double eps)
    : reg_(reg), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [_, t] : reg.items()) {
    m_.push_back(Tensor::zeros(t.shape()));
    v_.push_back(Tensor::zeros(t.shape()));
  }
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  size_t idx = 0;
  for (auto& [_, p] : reg_.items()) {
    Tensor& m = m_[idx];
    Tensor& v = v_[idx];
    ++idx;
    const double* g = p.grad_if();
    for (int64_t i = 0; i < p.numel(); ++i) {
      double gi = g ? g[i] : 0.0;
      m.data()[i] = beta1_ * m.data()[i] + (1.0 - beta1_) * gi;
      v.data()[i] = beta2_ * v.data()[i] + (1.0 - beta2_) * gi * gi;
      double mhat = m.data()[i] / bc1;
      double vhat = v.data()[i] / bc2;
      p.data()[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

std::vector<std::pair<std::string, Tensor>> Adam::state() const {
  std::vector<std::pair<std::string, Tensor>> out;
  size_t idx = 0;
  for (const auto& [name, _] : reg_.items()) {
    out.emplace_back("adam.m." + name, m_[idx]);
    out.emplace_back("adam.v." + name, v_[idx]);
    ++idx;
  }
  out.emplace_back("adam.t", Tensor::scalar(static_cast<double>(t_)));
  return out;
}

void Adam::load_state(const std::map<std::string, Tensor>& state) {
  size_t idx = 0;
  for (const auto& [name, _] : reg_.items()) {
    auto im = state.find("adam.m." + name);
    auto iv = state.find("adam.v." + name);
    if (im == state.end() || iv == state.end())
      throw std::runtime_error("optimizer state missing for " + name);
    std::copy(im->second.data(), im->second.data() + im->second.numel(),
              m_[idx].data());
    std::copy(iv->second.data(), iv->second.data() + iv->second.numel(),
              v_[idx].data());
    ++idx;
  }
  auto it = state.find("adam.t");
  if (it == state.end()) throw std::runtime_error("optimizer state missing step");
  t_ = static_cast<int64_t>(it->second.data()[0]);
}

}  // namespace dim
