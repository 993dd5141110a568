// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#include "repghost/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "repghost/error.hpp"

namespace repghost {

namespace {

Tensor to_layout(Tensor t, Layout layout) {
  return t.layout() == layout ? t : layout_convert(t, layout);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

// Direct cross-correlation over an NCHW input. For each (output channel,
// input channel, tap) the valid output column range is computed once per row so
// the innermost loop is a branch-free strided axpy.
void conv_nchw(const float* in, const Shape& is, const Conv2dParams& p, float* out, const Shape& os) {
  const int ipg = p.in_per_group();
  const int opg = p.out_per_group();
  const int s = p.stride;
  const int pad = p.padding;
  const std::size_t in_plane = static_cast<std::size_t>(is.h) * is.w;
  const std::size_t out_plane = static_cast<std::size_t>(os.h) * os.w;

  for (int n = 0; n < os.n; ++n) {
    const float* in_n = in + static_cast<std::size_t>(n) * is.c * in_plane;
    float* out_n = out + static_cast<std::size_t>(n) * os.c * out_plane;
    for (int o = 0; o < os.c; ++o) {
      float* dst = out_n + o * out_plane;
      const float b = p.has_bias() ? p.bias[o] : 0.0f;
      std::fill(dst, dst + out_plane, b);
      const int g = o / opg;
      for (int i = 0; i < ipg; ++i) {
        const float* src = in_n + static_cast<std::size_t>(g * ipg + i) * in_plane;
        for (int ky = 0; ky < p.kernel_h; ++ky) {
          for (int kx = 0; kx < p.kernel_w; ++kx) {
            const float wv = p.weight[p.weight_index(o, i, ky, kx)];
            if (wv == 0.0f) continue;
            // input column = ox * s + kx - pad must lie in [0, is.w)
            const int ox_lo = std::max(0, (pad - kx + s - 1) / s);
            const int hi_num = is.w - 1 + pad - kx;
            const int ox_hi = hi_num < 0 ? 0 : std::min(os.w, hi_num / s + 1);
            if (ox_lo >= ox_hi) continue;
            for (int oy = 0; oy < os.h; ++oy) {
              const int iy = oy * s + ky - pad;
              if (iy < 0 || iy >= is.h) continue;
              const float* row = src + static_cast<std::size_t>(iy) * is.w;
              float* orow = dst + static_cast<std::size_t>(oy) * os.w;
              const int shift = kx - pad;
              if (s == 1) {
                for (int ox = ox_lo; ox < ox_hi; ++ox) orow[ox] += wv * row[ox + shift];
              } else {
                for (int ox = ox_lo; ox < ox_hi; ++ox) orow[ox] += wv * row[ox * s + shift];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

Conv2dParams Conv2dParams::zeros(int out_channels, int in_channels, int kernel, int stride, int padding, int groups,
                                 bool with_bias) {
  Conv2dParams p;
  p.out_channels = out_channels;
  p.in_channels = in_channels;
  p.kernel_h = kernel;
  p.kernel_w = kernel;
  p.stride = stride;
  p.padding = padding;
  p.groups = groups;
  if (groups < 1 || in_channels % groups != 0 || out_channels % groups != 0) {
    throw ConfigError("conv: channels (" + std::to_string(in_channels) + " -> " + std::to_string(out_channels) +
                      ") not divisible by groups " + std::to_string(groups));
  }
  p.weight.assign(p.weight_count(), 0.0f);
  if (with_bias) p.bias.assign(out_channels, 0.0f);
  return p;
}

void Conv2dParams::validate() const {
  if (out_channels < 1 || in_channels < 1 || kernel_h < 1 || kernel_w < 1) {
    throw ConfigError("conv: channel and kernel sizes must be positive");
  }
  if (stride < 1 || padding < 0) throw ConfigError("conv: stride must be >= 1 and padding >= 0");
  if (groups < 1 || in_channels % groups != 0 || out_channels % groups != 0) {
    throw ConfigError("conv: channels (" + std::to_string(in_channels) + " -> " + std::to_string(out_channels) +
                      ") not divisible by groups " + std::to_string(groups));
  }
  if (weight.size() != weight_count()) {
    throw ConfigError("conv: weight length " + std::to_string(weight.size()) + ", expected " +
                      std::to_string(weight_count()));
  }
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(out_channels)) {
    throw ConfigError("conv: bias length does not match out_channels");
  }
}

Shape Conv2dParams::output_shape(const Shape& input) const {
  if (input.c != in_channels) {
    throw ConfigError("conv: input has " + std::to_string(input.c) + " channels, layer expects " +
                      std::to_string(in_channels));
  }
  const int oh = (input.h + 2 * padding - kernel_h) / stride + 1;
  const int ow = (input.w + 2 * padding - kernel_w) / stride + 1;
  if (input.h + 2 * padding < kernel_h || input.w + 2 * padding < kernel_w || oh < 1 || ow < 1) {
    throw ShapeError("conv: input " + to_string(input) + " too small for kernel " + std::to_string(kernel_h) + "x" +
                     std::to_string(kernel_w));
  }
  return Shape{input.n, out_channels, oh, ow};
}

BatchNormParams BatchNormParams::identity(int channels, float eps) {
  BatchNormParams p;
  p.gamma.assign(channels, 1.0f);
  p.beta.assign(channels, 0.0f);
  p.running_mean.assign(channels, 0.0f);
  p.running_var.assign(channels, 1.0f);
  p.eps = eps;
  return p;
}

void BatchNormParams::validate() const {
  const std::size_t c = gamma.size();
  if (c == 0 || beta.size() != c || running_mean.size() != c || running_var.size() != c) {
    throw ConfigError("batch norm: parameter vectors must be non-empty and of equal length");
  }
  if (!(eps >= 0.0f)) throw ConfigError("batch norm: eps must be non-negative");
  for (float v : running_var) {
    if (!(v >= 0.0f)) throw ConfigError("batch norm: running_var entries must be >= 0");
  }
}

void SEParams::validate() const {
  reduce.validate();
  expand.validate();
  if (reduce.kernel_h != 1 || reduce.kernel_w != 1 || expand.kernel_h != 1 || expand.kernel_w != 1) {
    throw ConfigError("se: reduce/expand must be 1x1 convolutions");
  }
  if (reduce.in_channels != expand.out_channels || reduce.out_channels != expand.in_channels) {
    throw ConfigError("se: reduce and expand channel counts do not mirror each other");
  }
  if (reduce.out_channels < 4 || reduce.out_channels % 4 != 0) {
    throw ConfigError("se: reduced width must be a positive multiple of 4");
  }
}

Tensor conv2d(const Tensor& x, const Conv2dParams& p) {
  p.validate();
  const Shape os = p.output_shape(x.shape());
  Tensor out(os, Layout::NCHW);
  if (x.layout() == Layout::NCHW) {
    conv_nchw(x.data().data(), x.shape(), p, out.data().data(), os);
  } else {
    const Tensor in = layout_convert(x, Layout::NCHW);
    conv_nchw(in.data().data(), in.shape(), p, out.data().data(), os);
  }
  return to_layout(std::move(out), x.layout());
}

Tensor batch_norm_infer(const Tensor& x, const BatchNormParams& p) {
  p.validate();
  const Shape& s = x.shape();
  if (s.c != p.channels()) {
    throw ShapeError("batch norm: input has " + std::to_string(s.c) + " channels, parameters cover " +
                     std::to_string(p.channels()));
  }
  std::vector<float> scale(s.c);
  std::vector<float> shift(s.c);
  for (int c = 0; c < s.c; ++c) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(p.running_var[c]) + p.eps);
    scale[c] = static_cast<float>(p.gamma[c] * inv);
    shift[c] = static_cast<float>(p.beta[c] - p.gamma[c] * p.running_mean[c] * inv);
  }
  Tensor out(s, x.layout());
  const auto src = x.data();
  auto dst = out.data();
  if (x.layout() == Layout::NCHW) {
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[base + i] = src[base + i] * scale[c] + shift[c];
      }
    }
  } else {
    const std::size_t pixels = static_cast<std::size_t>(s.n) * s.h * s.w;
    for (std::size_t px = 0; px < pixels; ++px) {
      for (int c = 0; c < s.c; ++c) dst[px * s.c + c] = src[px * s.c + c] * scale[c] + shift[c];
    }
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  relu_inplace(out);
  return out;
}

void relu_inplace(Tensor& x) {
  for (float& v : x.data()) v = v > 0.0f ? v : 0.0f;
}

void add_into(const Tensor& a, const Tensor& b, Tensor& out) {
  require_same_shape(a, b, "add");
  if (a.layout() != b.layout()) throw ShapeError("add: layout mismatch");
  if (!(out.shape() == a.shape()) || out.layout() != a.layout()) throw ShapeError("add: output buffer mismatch");
  const float* pa = a.data().data();
  const float* pb = b.data().data();
  float* po = out.data().data();
  const std::size_t count = a.size();
  for (std::size_t i = 0; i < count; ++i) po[i] = pa[i] + pb[i];
}

Tensor add_elementwise(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  if (a.layout() != b.layout()) throw ShapeError("add: layout mismatch");
  Tensor out(a.shape(), a.layout());
  add_into(a, b, out);
  return out;
}

void concat_into(const Tensor& a, const Tensor& b, Tensor& out) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat: n/h/w mismatch " + to_string(sa) + " vs " + to_string(sb));
  }
  if (a.layout() != b.layout()) throw ShapeError("concat: layout mismatch");
  const Shape so{sa.n, sa.c + sb.c, sa.h, sa.w};
  if (!(out.shape() == so) || out.layout() != a.layout()) throw ShapeError("concat: output buffer mismatch");

  const float* pa = a.data().data();
  const float* pb = b.data().data();
  float* po = out.data().data();
  if (a.layout() == Layout::NCHW) {
    // one contiguous C*H*W block per input per sample
    const std::size_t block_a = static_cast<std::size_t>(sa.c) * sa.h * sa.w;
    const std::size_t block_b = static_cast<std::size_t>(sb.c) * sb.h * sb.w;
    for (int n = 0; n < sa.n; ++n) {
      std::memcpy(po, pa + n * block_a, block_a * sizeof(float));
      po += block_a;
      std::memcpy(po, pb + n * block_b, block_b * sizeof(float));
      po += block_b;
    }
  } else {
    // NHWC: the contiguous unit shrinks to a single pixel's channels
    const std::size_t pixels = static_cast<std::size_t>(sa.n) * sa.h * sa.w;
    const std::size_t ca = sa.c;
    const std::size_t cb = sb.c;
    for (std::size_t px = 0; px < pixels; ++px) {
      std::memcpy(po, pa + px * ca, ca * sizeof(float));
      po += ca;
      std::memcpy(po, pb + px * cb, cb * sizeof(float));
      po += cb;
    }
  }
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  if (sa.n != b.shape().n || sa.h != b.shape().h || sa.w != b.shape().w) {
    throw ShapeError("concat: n/h/w mismatch " + to_string(sa) + " vs " + to_string(b.shape()));
  }
  if (a.layout() != b.layout()) throw ShapeError("concat: layout mismatch");
  Tensor out(Shape{sa.n, sa.c + b.shape().c, sa.h, sa.w}, a.layout());
  concat_into(a, b, out);
  return out;
}

Tensor slice_channels(const Tensor& x, int begin, int end) {
  const Shape& s = x.shape();
  if (begin < 0 || end > s.c || begin >= end) throw ShapeError("slice_channels: bad range");
  Tensor out(Shape{s.n, end - begin, s.h, s.w}, x.layout());
  for (int n = 0; n < s.n; ++n) {
    for (int c = begin; c < end; ++c) {
      for (int y = 0; y < s.h; ++y) {
        for (int xx = 0; xx < s.w; ++xx) out.at(n, c - begin, y, xx) = x.at(n, c, y, xx);
      }
    }
  }
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  const Shape& s = x.shape();
  Tensor out(Shape{s.n, s.c, 1, 1}, x.layout());
  const double inv = 1.0 / (static_cast<double>(s.h) * s.w);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      double acc = 0.0;
      for (int y = 0; y < s.h; ++y) {
        for (int xx = 0; xx < s.w; ++xx) acc += x.at(n, c, y, xx);
      }
      out.at(n, c, 0, 0) = static_cast<float>(acc * inv);
    }
  }
  return out;
}

Tensor hard_sigmoid(const Tensor& x) {
  Tensor out = x;
  for (float& v : out.data()) v = std::clamp((v + 3.0f) / 6.0f, 0.0f, 1.0f);
  return out;
}

Tensor scale_channels(const Tensor& x, const Tensor& gate) {
  const Shape& s = x.shape();
  if (gate.shape() != Shape{s.n, s.c, 1, 1}) throw ShapeError("scale_channels: gate must be (n, c, 1, 1)");
  Tensor out(s, x.layout());
  const auto src = x.data();
  auto dst = out.data();
  if (x.layout() == Layout::NCHW) {
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const float g = gate.at(n, c, 0, 0);
        const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[base + i] = src[base + i] * g;
      }
    }
  } else {
    for (int n = 0; n < s.n; ++n) {
      for (int y = 0; y < s.h; ++y) {
        for (int xx = 0; xx < s.w; ++xx) {
          const std::size_t base = out.offset(n, 0, y, xx);
          for (int c = 0; c < s.c; ++c) dst[base + c] = src[base + c] * gate.at(n, c, 0, 0);
        }
      }
    }
  }
  return out;
}

Tensor se_forward(const Tensor& x, const SEParams& p) {
  p.validate();
  if (x.shape().c != p.channels()) {
    throw ShapeError("se: input has " + std::to_string(x.shape().c) + " channels, block expects " +
                     std::to_string(p.channels()));
  }
  Tensor gate = global_avg_pool(x);
  gate = conv2d(gate, p.reduce);
  relu_inplace(gate);
  gate = hard_sigmoid(conv2d(gate, p.expand));
  return scale_channels(x, gate);
}

}  // namespace repghost
