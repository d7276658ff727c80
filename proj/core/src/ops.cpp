#include "dim/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dim {

namespace {

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  check(a.shape() == b.shape(), std::string(op) + ": shape mismatch");
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Padded index -> source row, or -1 for a zero pad. `i` is relative to the
// start of the unpadded sequence (may be negative).
int64_t pad_index(int64_t i, int64_t n, PadMode mode) {
  if (i >= 0 && i < n) return i;
  if (mode == PadMode::kZero) return -1;
  if (n == 1) return 0;
  int64_t period = 2 * (n - 1);
  int64_t j = ((i % period) + period) % period;
  return j < n ? j : period - j;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
  check_same_shape(a, b, "add");
  Tensor y(a.shape());
  for (int64_t i = 0; i < y.numel(); ++i) y.data()[i] = a.data()[i] + b.data()[i];
  if (tape) {
    Tensor a_ = a, b_ = b, y_ = y;
    tape->record([a_, b_, y_]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* da = a_.grad();
      double* db = b_.grad();
      for (int64_t i = 0; i < y_.numel(); ++i) {
        da[i] += dy[i];
        db[i] += dy[i];
      }
    });
  }
  return y;
}

Tensor sub(const Tensor& a, const Tensor& b, Tape* tape) {
  check_same_shape(a, b, "sub");
  Tensor y(a.shape());
  for (int64_t i = 0; i < y.numel(); ++i) y.data()[i] = a.data()[i] - b.data()[i];
  if (tape) {
    Tensor a_ = a, b_ = b, y_ = y;
    tape->record([a_, b_, y_]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* da = a_.grad();
      double* db = b_.grad();
      for (int64_t i = 0; i < y_.numel(); ++i) {
        da[i] += dy[i];
        db[i] -= dy[i];
      }
    });
  }
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b, Tape* tape) {
  check_same_shape(a, b, "mul");
  Tensor y(a.shape());
  for (int64_t i = 0; i < y.numel(); ++i) y.data()[i] = a.data()[i] * b.data()[i];
  if (tape) {
    Tensor a_ = a, b_ = b, y_ = y;
    tape->record([a_, b_, y_]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* da = a_.grad();
      double* db = b_.grad();
      for (int64_t i = 0; i < y_.numel(); ++i) {
        da[i] += b_.data()[i] * dy[i];
        db[i] += a_.data()[i] * dy[i];
      }
    });
  }
  return y;
}

Tensor scale(const Tensor& a, double c, Tape* tape) {
  Tensor y(a.shape());
  for (int64_t i = 0; i < y.numel(); ++i) y.data()[i] = c * a.data()[i];
  if (tape) {
    Tensor a_ = a, y_ = y;
    tape->record([a_, y_, c]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* da = a_.grad();
      for (int64_t i = 0; i < y_.numel(); ++i) da[i] += c * dy[i];
    });
  }
  return y;
}

Tensor add_rowvec(const Tensor& x, const Tensor& v, Tape* tape) {
  check(x.rank() == 2 && v.rank() == 1 && v.dim(0) == x.dim(1),
        "add_rowvec: expected T×d and [d]");
  int64_t T = x.dim(0), d = x.dim(1);
  Tensor y({T, d});
  for (int64_t t = 0; t < T; ++t)
    for (int64_t j = 0; j < d; ++j) y(t, j) = x(t, j) + v(j);
  if (tape) {
    Tensor x_ = x, v_ = v, y_ = y;
    tape->record([x_, v_, y_, T, d]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* dx = x_.grad();
      double* dv = v_.grad();
      for (int64_t t = 0; t < T; ++t)
        for (int64_t j = 0; j < d; ++j) {
          dx[t * d + j] += dy[t * d + j];
          dv[j] += dy[t * d + j];
        }
    });
  }
  return y;
}

Tensor mul_rowvec(const Tensor& x, const Tensor& v, Tape* tape) {
  check(x.rank() == 2 && v.rank() == 1 && v.dim(0) == x.dim(1),
        "mul_rowvec: expected T×d and [d]");
  int64_t T = x.dim(0), d = x.dim(1);
  Tensor y({T, d});
  for (int64_t t = 0; t < T; ++t)
    for (int64_t j = 0; j < d; ++j) y(t, j) = x(t, j) * v(j);
  if (tape) {
    Tensor x_ = x, v_ = v, y_ = y;
    tape->record([x_, v_, y_, T, d]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* dx = x_.grad();
      double* dv = v_.grad();
      for (int64_t t = 0; t < T; ++t)
        for (int64_t j = 0; j < d; ++j) {
          dx[t * d + j] += v_(j) * dy[t * d + j];
          dv[j] += x_(t, j) * dy[t * d + j];
        }
    });
  }
  return y;
}

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
  check(a.rank() == 2 && b.rank() == 2, "matmul: expected rank-2 inputs");
  check(a.dim(1) == b.dim(0), "matmul: inner dimensions disagree");
  int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor y({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* py = y.data();
  for (int64_t i = 0; i < m; ++i)
    for (int64_t l = 0; l < k; ++l) {
      double av = pa[i * k + l];
      if (av == 0.0) continue;
      const double* brow = pb + l * n;
      double* yrow = py + i * n;
      for (int64_t j = 0; j < n; ++j) yrow[j] += av * brow[j];
    }
  if (tape) {
    Tensor a_ = a, b_ = b, y_ = y;
    tape->record([a_, b_, y_, m, k, n]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* da = a_.grad();
      double* db = b_.grad();
      const double* pa = a_.data();
      const double* pb = b_.data();
      // da = dy b^T ; db = a^T dy
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j, ++dy) {
          double g = *dy;
          if (g == 0.0) continue;
          for (int64_t l = 0; l < k; ++l) {
            da[i * k + l] += g * pb[l * n + j];
            db[l * n + j] += g * pa[i * k + l];
          }
        }
    });
  }
  return y;
}

Tensor transpose(const Tensor& a, Tape* tape) {
  check(a.rank() == 2, "transpose: expected rank-2 input");
  int64_t m = a.dim(0), n = a.dim(1);
  Tensor y({n, m});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) y(j, i) = a(i, j);
  if (tape) {
    Tensor a_ = a, y_ = y;
    tape->record([a_, y_, m, n]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* da = a_.grad();
      for (int64_t j = 0; j < n; ++j)
        for (int64_t i = 0; i < m; ++i) da[i * n + j] += dy[j * m + i];
    });
  }
  return y;
}

namespace {

// Shared worker for full and causal 1-D convolution. `left` and `right` are
// pad widths; causal mode is left = K-1, right = 0 with zero padding.
Tensor conv1d_impl(const Tensor& x, const Tensor& kernel, int64_t left,
                   int64_t right, int64_t stride, PadMode pad_mode, Tape* tape) {
  check(x.rank() == 2, "conv1d: x must be T×C_in");
  check(kernel.rank() == 3, "conv1d: kernel must be K×C_in×C_out");
  check(stride >= 1, "conv1d: stride must be >= 1");
  int64_t T = x.dim(0), cin = x.dim(1);
  int64_t K = kernel.dim(0), cout = kernel.dim(2);
  check(kernel.dim(1) == cin, "conv1d: kernel C_in mismatch");
  if (K > T + left + right)
    throw std::invalid_argument("conv1d: kernel longer than padded input");
  int64_t t_out = (T + left + right - K) / stride + 1;

  std::vector<int64_t> src_map(static_cast<size_t>(T + left + right));
  for (int64_t i = 0; i < T + left + right; ++i)
    src_map[static_cast<size_t>(i)] = pad_index(i - left, T, pad_mode);

  Tensor y({t_out, cout});
  for (int64_t o = 0; o < t_out; ++o)
    for (int64_t k = 0; k < K; ++k) {
      int64_t m = src_map[static_cast<size_t>(o * stride + k)];
      if (m < 0) continue;
      for (int64_t ci = 0; ci < cin; ++ci) {
        double xv = x(m, ci);
        if (xv == 0.0) continue;
        for (int64_t co = 0; co < cout; ++co) y(o, co) += xv * kernel(k, ci, co);
      }
    }
  if (tape) {
    Tensor x_ = x, w_ = kernel, y_ = y;
    tape->record([x_, w_, y_, src_map, t_out, K, cin, cout, stride]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* dx = x_.grad();
      double* dw = w_.grad();
      for (int64_t o = 0; o < t_out; ++o)
        for (int64_t k = 0; k < K; ++k) {
          int64_t m = src_map[static_cast<size_t>(o * stride + k)];
          if (m < 0) continue;
          for (int64_t ci = 0; ci < cin; ++ci) {
            double xv = x_(m, ci);
            double acc = 0.0;
            for (int64_t co = 0; co < cout; ++co) {
              double g = dy[o * cout + co];
              dw[(k * cin + ci) * cout + co] += xv * g;
              acc += w_(k, ci, co) * g;
            }
            dx[m * cin + ci] += acc;
          }
        }
    });
  }
  return y;
}

Tensor conv1d_depthwise_impl(const Tensor& x, const Tensor& kernel, int64_t left,
                             int64_t right, PadMode pad_mode, Tape* tape) {
  check(x.rank() == 2, "conv1d_depthwise: x must be T×C");
  check(kernel.rank() == 2, "conv1d_depthwise: kernel must be K×C");
  int64_t T = x.dim(0), C = x.dim(1), K = kernel.dim(0);
  check(kernel.dim(1) == C, "conv1d_depthwise: channel mismatch");
  if (K > T + left + right)
    throw std::invalid_argument("conv1d_depthwise: kernel longer than padded input");
  int64_t t_out = T + left + right - K + 1;

  std::vector<int64_t> src_map(static_cast<size_t>(T + left + right));
  for (int64_t i = 0; i < T + left + right; ++i)
    src_map[static_cast<size_t>(i)] = pad_index(i - left, T, pad_mode);

  Tensor y({t_out, C});
  for (int64_t o = 0; o < t_out; ++o)
    for (int64_t k = 0; k < K; ++k) {
      int64_t m = src_map[static_cast<size_t>(o + k)];
      if (m < 0) continue;
      for (int64_t c = 0; c < C; ++c) y(o, c) += x(m, c) * kernel(k, c);
    }
  if (tape) {
    Tensor x_ = x, w_ = kernel, y_ = y;
    tape->record([x_, w_, y_, src_map, t_out, K, C]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* dx = x_.grad();
      double* dw = w_.grad();
      for (int64_t o = 0; o < t_out; ++o)
        for (int64_t k = 0; k < K; ++k) {
          int64_t m = src_map[static_cast<size_t>(o + k)];
          if (m < 0) continue;
          for (int64_t c = 0; c < C; ++c) {
            double g = dy[o * C + c];
            dw[k * C + c] += x_(m, c) * g;
            dx[m * C + c] += w_(k, c) * g;
          }
        }
    });
  }
  return y;
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& kernel, int64_t padding,
              int64_t stride, PadMode pad_mode, Tape* tape) {
  check(padding >= 0, "conv1d: negative padding");
  return conv1d_impl(x, kernel, padding, padding, stride, pad_mode, tape);
}

Tensor conv1d_causal(const Tensor& x, const Tensor& kernel, Tape* tape) {
  int64_t K = kernel.dim(0);
  return conv1d_impl(x, kernel, K - 1, 0, 1, PadMode::kZero, tape);
}

Tensor conv1d_depthwise(const Tensor& x, const Tensor& kernel, int64_t padding,
                        PadMode pad_mode, Tape* tape) {
  check(padding >= 0, "conv1d_depthwise: negative padding");
  return conv1d_depthwise_impl(x, kernel, padding, padding, pad_mode, tape);
}

Tensor conv1d_depthwise_causal(const Tensor& x, const Tensor& kernel, Tape* tape) {
  int64_t K = kernel.dim(0);
  return conv1d_depthwise_impl(x, kernel, K - 1, 0, PadMode::kZero, tape);
}

Tensor layer_norm(const Tensor& x, double eps, Tape* tape) {
  check(x.rank() == 2, "layer_norm: expected T×d");
  check(eps > 0, "layer_norm: eps must be positive");
  int64_t T = x.dim(0), d = x.dim(1);
  Tensor y({T, d});
  Tensor inv_sigma({T});  // saved for backward
  for (int64_t t = 0; t < T; ++t) {
    double mean = 0;
    for (int64_t j = 0; j < d; ++j) mean += x(t, j);
    mean /= static_cast<double>(d);
    double var = 0;
    for (int64_t j = 0; j < d; ++j) {
      double c = x(t, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + eps);
    inv_sigma(t) = inv;
    for (int64_t j = 0; j < d; ++j) y(t, j) = (x(t, j) - mean) * inv;
  }
  if (tape) {
    Tensor x_ = x, y_ = y, inv_ = inv_sigma;
    tape->record([x_, y_, inv_, T, d]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* dx = x_.grad();
      for (int64_t t = 0; t < T; ++t) {
        double mean_dy = 0, mean_dyxhat = 0;
        for (int64_t j = 0; j < d; ++j) {
          mean_dy += dy[t * d + j];
          mean_dyxhat += dy[t * d + j] * y_(t, j);
        }
        mean_dy /= static_cast<double>(d);
        mean_dyxhat /= static_cast<double>(d);
        for (int64_t j = 0; j < d; ++j)
          dx[t * d + j] +=
              inv_(t) * (dy[t * d + j] - mean_dy - y_(t, j) * mean_dyxhat);
      }
    });
  }
  return y;
}

Tensor silu(const Tensor& x, Tape* tape) {
  Tensor y(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    double v = x.data()[i];
    y.data()[i] = v * sigmoid(v);
  }
  if (tape) {
    Tensor x_ = x, y_ = y;
    tape->record([x_, y_]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* dx = x_.grad();
      for (int64_t i = 0; i < x_.numel(); ++i) {
        double s = sigmoid(x_.data()[i]);
        dx[i] += dy[i] * (s + x_.data()[i] * s * (1.0 - s));
      }
    });
  }
  return y;
}

Tensor softplus(const Tensor& x, Tape* tape) {
  Tensor y(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    double v = x.data()[i];
    y.data()[i] = v > 30.0 ? v : std::log1p(std::exp(v));
  }
  if (tape) {
    Tensor x_ = x, y_ = y;
    tape->record([x_, y_]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* dx = x_.grad();
      for (int64_t i = 0; i < x_.numel(); ++i)
        dx[i] += dy[i] * sigmoid(x_.data()[i]);
    });
  }
  return y;
}

Tensor exp(const Tensor& x, Tape* tape) {
  Tensor y(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) y.data()[i] = std::exp(x.data()[i]);
  if (tape) {
    Tensor x_ = x, y_ = y;
    tape->record([x_, y_]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* dx = x_.grad();
      for (int64_t i = 0; i < x_.numel(); ++i) dx[i] += dy[i] * y_.data()[i];
    });
  }
  return y;
}

Tensor sum(const Tensor& x, Tape* tape) {
  double s = 0;
  for (int64_t i = 0; i < x.numel(); ++i) s += x.data()[i];
  Tensor y = Tensor::scalar(s);
  if (tape) {
    Tensor x_ = x, y_ = y;
    tape->record([x_, y_]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* dx = x_.grad();
      for (int64_t i = 0; i < x_.numel(); ++i) dx[i] += dy[0];
    });
  }
  return y;
}

Tensor mean_squared_error(const Tensor& a, const Tensor& b, Tape* tape) {
  check_same_shape(a, b, "mean_squared_error");
  int64_t n = a.numel();
  double s = 0;
  for (int64_t i = 0; i < n; ++i) {
    double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  Tensor y = Tensor::scalar(s / static_cast<double>(n));
  if (tape) {
    Tensor a_ = a, b_ = b, y_ = y;
    tape->record([a_, b_, y_, n]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* da = a_.grad();
      double* db = b_.grad();
      double c = 2.0 * dy[0] / static_cast<double>(n);
      for (int64_t i = 0; i < n; ++i) {
        double d = a_.data()[i] - b_.data()[i];
        da[i] += c * d;
        db[i] -= c * d;
      }
    });
  }
  return y;
}

Tensor slice_rows(const Tensor& x, int64_t r0, int64_t r1, Tape* tape) {
  check(x.rank() == 2, "slice_rows: expected rank-2 input");
  check(0 <= r0 && r0 < r1 && r1 <= x.dim(0), "slice_rows: bad range");
  int64_t d = x.dim(1);
  Tensor y({r1 - r0, d});
  for (int64_t t = r0; t < r1; ++t)
    for (int64_t j = 0; j < d; ++j) y(t - r0, j) = x(t, j);
  if (tape) {
    Tensor x_ = x, y_ = y;
    tape->record([x_, y_, r0, r1, d]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* dx = x_.grad();
      for (int64_t t = r0; t < r1; ++t)
        for (int64_t j = 0; j < d; ++j) dx[t * d + j] += dy[(t - r0) * d + j];
    });
  }
  return y;
}

Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1, Tape* tape) {
  check(x.rank() == 2, "slice_cols: expected rank-2 input");
  check(0 <= c0 && c0 < c1 && c1 <= x.dim(1), "slice_cols: bad range");
  int64_t T = x.dim(0), d = x.dim(1), w = c1 - c0;
  Tensor y({T, w});
  for (int64_t t = 0; t < T; ++t)
    for (int64_t j = 0; j < w; ++j) y(t, j) = x(t, c0 + j);
  if (tape) {
    Tensor x_ = x, y_ = y;
    tape->record([x_, y_, c0, T, d, w]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* dx = x_.grad();
      for (int64_t t = 0; t < T; ++t)
        for (int64_t j = 0; j < w; ++j) dx[t * d + c0 + j] += dy[t * w + j];
    });
  }
  return y;
}

Tensor concat_cols(const std::vector<Tensor>& parts, Tape* tape) {
  check(!parts.empty(), "concat_cols: empty input");
  int64_t T = parts[0].dim(0);
  int64_t total = 0;
  for (const Tensor& p : parts) {
    check(p.rank() == 2 && p.dim(0) == T, "concat_cols: row counts differ");
    total += p.dim(1);
  }
  Tensor y({T, total});
  int64_t off = 0;
  for (const Tensor& p : parts) {
    int64_t w = p.dim(1);
    for (int64_t t = 0; t < T; ++t)
      for (int64_t j = 0; j < w; ++j) y(t, off + j) = p(t, j);
    off += w;
  }
  if (tape) {
    std::vector<Tensor> parts_ = parts;
    Tensor y_ = y;
    tape->record([parts_, y_, T, total]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      int64_t off = 0;
      for (Tensor& p : parts_) {
        int64_t w = p.dim(1);
        double* dp = p.grad();
        for (int64_t t = 0; t < T; ++t)
          for (int64_t j = 0; j < w; ++j) dp[t * w + j] += dy[t * total + off + j];
        off += w;
      }
    });
  }
  return y;
}

Tensor interp_rows(const Tensor& x, int64_t rows_out, Tape* tape) {
  check(x.rank() == 2, "interp_rows: expected rank-2 input");
  check(rows_out >= 1, "interp_rows: rows_out must be >= 1");
  int64_t tin = x.dim(0), d = x.dim(1);
  Tensor y({rows_out, d});
  std::vector<int64_t> lo(static_cast<size_t>(rows_out));
  std::vector<double> frac(static_cast<size_t>(rows_out));
  for (int64_t i = 0; i < rows_out; ++i) {
    double p = rows_out == 1
                   ? 0.0
                   : static_cast<double>(i) * static_cast<double>(tin - 1) /
                         static_cast<double>(rows_out - 1);
    int64_t l = static_cast<int64_t>(p);
    if (l > tin - 1) l = tin - 1;
    lo[static_cast<size_t>(i)] = l;
    frac[static_cast<size_t>(i)] = p - static_cast<double>(l);
  }
  for (int64_t i = 0; i < rows_out; ++i) {
    int64_t l = lo[static_cast<size_t>(i)];
    int64_t h = std::min(l + 1, tin - 1);
    double f = frac[static_cast<size_t>(i)];
    for (int64_t j = 0; j < d; ++j) y(i, j) = (1.0 - f) * x(l, j) + f * x(h, j);
  }
  if (tape) {
    Tensor x_ = x, y_ = y;
    tape->record([x_, y_, lo, frac, rows_out, tin, d]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* dx = x_.grad();
      for (int64_t i = 0; i < rows_out; ++i) {
        int64_t l = lo[static_cast<size_t>(i)];
        int64_t h = std::min(l + 1, tin - 1);
        double f = frac[static_cast<size_t>(i)];
        for (int64_t j = 0; j < d; ++j) {
          dx[l * d + j] += (1.0 - f) * dy[i * d + j];
          dx[h * d + j] += f * dy[i * d + j];
        }
      }
    });
  }
  return y;
}

Tensor ssd_scan(const Tensor& a, const Tensor& B, const Tensor& C,
                const Tensor& V, Tape* tape) {
  check(a.rank() == 2 && a.dim(1) == 1, "ssd_scan: a must be T×1");
  check(B.rank() == 2 && C.rank() == 2 && V.rank() == 2, "ssd_scan: rank-2 inputs");
  int64_t T = a.dim(0), S = B.dim(1), P = V.dim(1);
  check(B.dim(0) == T && C.dim(0) == T && V.dim(0) == T,
        "ssd_scan: row counts disagree");
  check(C.dim(1) == S, "ssd_scan: B/C state size mismatch");

  Tensor y({T, P});
  // State history is needed only for the reverse pass.
  std::shared_ptr<std::vector<double>> hist;
  if (tape) hist = std::make_shared<std::vector<double>>(static_cast<size_t>(T * S * P));
  std::vector<double> h(static_cast<size_t>(S * P), 0.0);
  for (int64_t t = 0; t < T; ++t) {
    double at = a(t, 0);
    for (int64_t s = 0; s < S; ++s) {
      double bs = B(t, s);
      double* hrow = h.data() + s * P;
      const double* vrow = V.data() + t * P;
      for (int64_t p = 0; p < P; ++p) hrow[p] = at * hrow[p] + bs * vrow[p];
    }
    if (hist)
      std::copy(h.begin(), h.end(), hist->begin() + static_cast<size_t>(t * S * P));
    double* yrow = y.data() + t * P;
    for (int64_t s = 0; s < S; ++s) {
      double cs = C(t, s);
      if (cs == 0.0) continue;
      const double* hrow = h.data() + s * P;
      for (int64_t p = 0; p < P; ++p) yrow[p] += cs * hrow[p];
    }
  }
  if (tape) {
    Tensor a_ = a, B_ = B, C_ = C, V_ = V, y_ = y;
    tape->record([a_, B_, C_, V_, y_, hist, T, S, P]() mutable {
      const double* dy = y_.grad_if();
      if (!dy) return;
      double* da = a_.grad();
      double* dB = B_.grad();
      double* dC = C_.grad();
      double* dV = V_.grad();
      const double* h = hist->data();
      std::vector<double> G(static_cast<size_t>(S * P), 0.0);  // dL/dh_t
      for (int64_t t = T - 1; t >= 0; --t) {
        if (t < T - 1) {
          double an = a_(t + 1, 0);
          for (auto& g : G) g *= an;
        }
        const double* dyt = dy + t * P;
        const double* ht = h + t * S * P;
        const double* hprev = t > 0 ? h + (t - 1) * S * P : nullptr;
        double da_t = 0;
        for (int64_t s = 0; s < S; ++s) {
          double cs = C_(t, s);
          double* grow = G.data() + s * P;
          const double* htrow = ht + s * P;
          const double* vrow = V_.data() + t * P;
          double dc = 0, db = 0;
          for (int64_t p = 0; p < P; ++p) {
            grow[p] += cs * dyt[p];
            dc += htrow[p] * dyt[p];
            db += grow[p] * vrow[p];
            if (hprev) da_t += grow[p] * hprev[s * P + p];
          }
          dC[t * S + s] += dc;
          dB[t * S + s] += db;
        }
        da[t] += da_t;
        double* dvrow = dV + t * P;
        for (int64_t p = 0; p < P; ++p) {
          double acc = 0;
          for (int64_t s = 0; s < S; ++s) acc += B_(t, s) * G[s * P + p];
          dvrow[p] += acc;
        }
      }
    });
  }
  return y;
}

}  // namespace dim
