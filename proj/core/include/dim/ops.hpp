#pragma once

#include "dim/tensor.hpp"

namespace dim {

// Primitive kernels. Every op validates shapes, produces finite output for
// finite input, and — when a tape is supplied — records one backward step
// that accumulates d(loss)/d(input) into each input's grad buffer.
//
// Broadcasting is limited to row-wise (a [d] vector against the rows of a
// T×d matrix) and scalars; anything else must be shaped explicitly.

enum class PadMode { kZero, kReflect };

Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor sub(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor mul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor scale(const Tensor& a, double c, Tape* tape = nullptr);
Tensor add_rowvec(const Tensor& x, const Tensor& v, Tape* tape = nullptr);
Tensor mul_rowvec(const Tensor& x, const Tensor& v, Tape* tape = nullptr);

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor transpose(const Tensor& a, Tape* tape = nullptr);

// x: T×C_in, kernel: K×C_in×C_out. Output length (T + 2*padding - K)/stride + 1.
Tensor conv1d(const Tensor& x, const Tensor& kernel, int64_t padding,
              int64_t stride, PadMode pad_mode = PadMode::kZero,
              Tape* tape = nullptr);
// Causal variant: left zero-pad K-1, stride 1, same output length as input.
Tensor conv1d_causal(const Tensor& x, const Tensor& kernel, Tape* tape = nullptr);

// Per-channel convolution. x: T×C, kernel: K×C, stride 1.
Tensor conv1d_depthwise(const Tensor& x, const Tensor& kernel, int64_t padding,
                        PadMode pad_mode = PadMode::kZero, Tape* tape = nullptr);
Tensor conv1d_depthwise_causal(const Tensor& x, const Tensor& kernel,
                               Tape* tape = nullptr);

// Row-wise normalization to zero mean, unit variance. No learned affine;
// modulation is applied externally.
Tensor layer_norm(const Tensor& x, double eps, Tape* tape = nullptr);

Tensor silu(const Tensor& x, Tape* tape = nullptr);
Tensor softplus(const Tensor& x, Tape* tape = nullptr);
Tensor exp(const Tensor& x, Tape* tape = nullptr);

Tensor sum(const Tensor& x, Tape* tape = nullptr);           // scalar
Tensor mean_squared_error(const Tensor& a, const Tensor& b, Tape* tape = nullptr);

Tensor slice_rows(const Tensor& x, int64_t r0, int64_t r1, Tape* tape = nullptr);
Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1, Tape* tape = nullptr);
Tensor concat_cols(const std::vector<Tensor>& parts, Tape* tape = nullptr);

// Linear interpolation of rows to a new length; endpoints map to endpoints.
Tensor interp_rows(const Tensor& x, int64_t rows_out, Tape* tape = nullptr);

// Selective-scan recurrence over one head:
//   h_t = a_t * h_{t-1} + b_t v_t^T     (S×P state, h_0 = 0)
//   y_t = c_t^T h_t
// a: T×1 decay, B: T×S, C: T×S, V: T×P. Returns T×P.
Tensor ssd_scan(const Tensor& a, const Tensor& B, const Tensor& C,
                const Tensor& V, Tape* tape = nullptr);

}  // namespace dim
