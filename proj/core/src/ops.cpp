#include "pmseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "backward.hpp"
#include "pmseg/error.hpp"

namespace pmseg::ops {
namespace {

void require_chw(const Tensor& t, const char* what) {
  if (t.rank() != 3)
    throw std::invalid_argument(std::string(what) + ": expected [C,H,W], got " + to_string(t.shape()));
}

// Four partial sums; fixed order so results are reproducible.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

struct ConvGeometry {
  std::size_t cin, cout, h, w, k;
  long pad;
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  require_chw(input, "conv2d input");
  if (kernel.rank() != 4 || kernel.dim(2) != kernel.dim(3) || kernel.dim(2) % 2 == 0)
    throw std::invalid_argument("conv2d: kernel must be [Cout,Cin,k,k] with odd k, got " +
                                to_string(kernel.shape()));
  if (kernel.dim(1) != input.dim(0))
    throw std::invalid_argument("conv2d: shape mismatch between input " + to_string(input.shape()) +
                                " and kernel " + to_string(kernel.shape()));
  if (bias.rank() != 1 || bias.dim(0) != kernel.dim(0))
    throw std::invalid_argument("conv2d: shape mismatch between bias " + to_string(bias.shape()) +
                                " and kernel " + to_string(kernel.shape()));
  return {input.dim(0), kernel.dim(0), input.dim(1), input.dim(2), kernel.dim(2),
          static_cast<long>(kernel.dim(2) / 2)};
}

// Zero-padded copy of c planes, each (h+2p) x (w+2p).
std::vector<double> pad_planes(const double* src, std::size_t c, std::size_t h, std::size_t w, std::size_t p) {
  const std::size_t ph = h + 2 * p, pw = w + 2 * p;
  std::vector<double> out(c * ph * pw, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      std::copy(src + (ch * h + y) * w, src + (ch * h + y + 1) * w, out.data() + (ch * ph + y + p) * pw + p);
  return out;
}

// CB output channels x XB columns of one output row, accumulated in
// registers. Every output element sums its taps in (ci, ky, kx) order
// whatever the tile size, so tiling never changes the result.
template <std::size_t CB, std::size_t XB>
void conv_tile(const double* padded, std::size_t cin, std::size_t pw, std::size_t plane, std::size_t k,
               const double* kern, std::size_t kstride, double* out, std::size_t hw, std::size_t row_offset) {
  double acc[CB][XB];
  for (std::size_t j = 0; j < CB; ++j)
    for (std::size_t i = 0; i < XB; ++i) acc[j][i] = out[j * hw + row_offset + i];
  for (std::size_t ci = 0; ci < cin; ++ci)
    for (std::size_t ky = 0; ky < k; ++ky) {
      const double* row = padded + ci * plane + ky * pw;
      const double* kw = kern + (ci * k + ky) * k;
      for (std::size_t kx = 0; kx < k; ++kx) {
        double wv[CB];
        for (std::size_t j = 0; j < CB; ++j) wv[j] = kw[j * kstride + kx];
        const double* s = row + kx;
        for (std::size_t j = 0; j < CB; ++j)
          for (std::size_t i = 0; i < XB; ++i) acc[j][i] += wv[j] * s[i];
      }
    }
  for (std::size_t j = 0; j < CB; ++j)
    for (std::size_t i = 0; i < XB; ++i) out[j * hw + row_offset + i] = acc[j][i];
}

template <std::size_t CB>
void conv_rows(const double* padded, std::size_t cin, std::size_t h, std::size_t w, std::size_t k,
               const double* kern, double* out) {
  const std::size_t pw = w + k - 1, plane = (h + k - 1) * pw, hw = h * w, kstride = cin * k * k;
  for (std::size_t y = 0; y < h; ++y) {
    std::size_t x = 0;
    for (; x + 4 <= w; x += 4)
      conv_tile<CB, 4>(padded + y * pw + x, cin, pw, plane, k, kern, kstride, out, hw, y * w + x);
    for (; x < w; ++x) conv_tile<CB, 1>(padded + y * pw + x, cin, pw, plane, k, kern, kstride, out, hw, y * w + x);
  }
}

// out[co] += sum over ci and taps of kern[co,ci] * padded[ci], for padded
// input planes of (h+k-1) x (w+k-1). out must hold cout*h*w initialized values.
void conv_accumulate(const double* padded, std::size_t cin, std::size_t h, std::size_t w, std::size_t k,
                     const double* kern, std::size_t cout, double* out) {
  const std::size_t hw = h * w, kstride = cin * k * k;
  std::size_t co = 0;
  for (; co + 4 <= cout; co += 4) conv_rows<4>(padded, cin, h, w, k, kern + co * kstride, out + co * hw);
  for (; co < cout; ++co) conv_rows<1>(padded, cin, h, w, k, kern + co * kstride, out + co * hw);
}

// grad_kernel[co,ci,ky,kx] += sum_{y,x} g[co,y,x] * padded[ci,y+ky,x+kx].
// Four lanes per column block, reduced in a fixed order.
void conv_kernel_grad(const double* padded, const double* g, std::size_t cin, std::size_t cout, std::size_t h,
                      std::size_t w, std::size_t k, double* grad_kernel) {
  const std::size_t pw = w + k - 1, plane = (h + k - 1) * pw, hw = h * w;
  for (std::size_t co = 0; co < cout; ++co) {
    const double* gc = g + co * hw;
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t ky = 0; ky < k; ++ky)
        for (std::size_t kx = 0; kx < k; ++kx) {
          double lane[4] = {0.0, 0.0, 0.0, 0.0};
          double tail = 0.0;
          for (std::size_t y = 0; y < h; ++y) {
            const double* s = padded + ci * plane + (y + ky) * pw + kx;
            const double* gr = gc + y * w;
            std::size_t x = 0;
            for (; x + 4 <= w; x += 4)
              for (std::size_t i = 0; i < 4; ++i) lane[i] += gr[x + i] * s[x + i];
            for (; x < w; ++x) tail += gr[x] * s[x];
          }
          grad_kernel[((co * cin + ci) * k + ky) * k + kx] += ((lane[0] + lane[1]) + (lane[2] + lane[3])) + tail;
        }
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  const ConvGeometry g = conv_geometry(input, kernel, bias);
  const std::size_t hw = g.h * g.w;
  Tensor out({g.cout, g.h, g.w});
  double* op = out.data().data();
  for (std::size_t co = 0; co < g.cout; ++co) std::fill(op + co * hw, op + (co + 1) * hw, bias[co]);
  const auto padded = pad_planes(input.data().data(), g.cin, g.h, g.w, static_cast<std::size_t>(g.pad));
  conv_accumulate(padded.data(), g.cin, g.h, g.w, g.k, kernel.data().data(), g.cout, op);
  return out;
}

Tensor channel_softmax_forward(const Tensor& logits) {
  require_chw(logits, "channel_softmax");
  const std::size_t c = logits.dim(0), hw = logits.dim(1) * logits.dim(2);
  Tensor out(logits.shape());
  std::vector<double> mx(hw), total(hw, 0.0);
  const double* in = logits.data().data();
  double* op = out.data().data();
  std::copy(in, in + hw, mx.begin());
  for (std::size_t ch = 1; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i) mx[i] = std::max(mx[i], in[ch * hw + i]);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i) {
      const double e = std::exp(in[ch * hw + i] - mx[i]);
      op[ch * hw + i] = e;
      total[i] += e;
    }
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i) op[ch * hw + i] /= total[i];
  return out;
}

NodeId add(Tape& t, NodeId a, NodeId b) {
  const Tensor& x = t.value(a);
  const Tensor& y = t.value(b);
  require_same_shape(x.shape(), y.shape(), "add");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return t.record(OpKind::Add, {a, b}, std::move(out));
}

NodeId mul(Tape& t, NodeId a, NodeId b) {
  const Tensor& x = t.value(a);
  const Tensor& y = t.value(b);
  require_same_shape(x.shape(), y.shape(), "mul");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return t.record(OpKind::Mul, {a, b}, std::move(out));
}

NodeId div(Tape& t, NodeId a, NodeId b) {
  const Tensor& x = t.value(a);
  const Tensor& y = t.value(b);
  require_same_shape(x.shape(), y.shape(), "div");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / y[i];
  return t.record(OpKind::Div, {a, b}, std::move(out));
}

NodeId scale(Tape& t, NodeId a, double factor) {
  const Tensor& x = t.value(a);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * factor;
  return t.record(OpKind::Scale, {a}, std::move(out), {}, factor);
}

NodeId add_scalar(Tape& t, NodeId a, double offset) {
  const Tensor& x = t.value(a);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + offset;
  return t.record(OpKind::AddScalar, {a}, std::move(out), {}, offset);
}

NodeId log(Tape& t, NodeId a) {
  const Tensor& x = t.value(a);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::log(x[i]);
  return t.record(OpKind::Log, {a}, std::move(out));
}

NodeId clamp_min(Tape& t, NodeId a, double floor) {
  const Tensor& x = t.value(a);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::max(x[i], floor);
  return t.record(OpKind::ClampMin, {a}, std::move(out), {}, floor);
}

NodeId pow(Tape& t, NodeId a, double exponent) {
  const Tensor& x = t.value(a);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0.0) throw NumericalError("pow: negative base " + std::to_string(x[i]));
    out[i] = std::pow(x[i], exponent);
  }
  return t.record(OpKind::Pow, {a}, std::move(out), {}, exponent);
}

NodeId relu(Tape& t, NodeId a) {
  const Tensor& x = t.value(a);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return t.record(OpKind::Relu, {a}, std::move(out));
}

NodeId sum(Tape& t, NodeId a) {
  const Tensor& x = t.value(a);
  double s = 0.0;
  for (double v : x.data()) s += v;
  return t.record(OpKind::Sum, {a}, Tensor::scalar(s));
}

NodeId weighted_sum(Tape& t, NodeId a, Tensor weights) {
  const Tensor& x = t.value(a);
  require_same_shape(x.shape(), weights.shape(), "weighted_sum");
  const double s = dot(x.data().data(), weights.data().data(), x.size());
  return t.record(OpKind::WeightedSum, {a}, Tensor::scalar(s), std::move(weights));
}

NodeId conv2d(Tape& t, NodeId input, NodeId kernel, NodeId bias) {
  Tensor out = conv2d_forward(t.value(input), t.value(kernel), t.value(bias));
  return t.record(OpKind::Conv2d, {input, kernel, bias}, std::move(out));
}

NodeId max_pool2(Tape& t, NodeId input) {
  const Tensor& x = t.value(input);
  require_chw(x, "max_pool2");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 || w % 2)
    throw std::invalid_argument("max_pool2: extents must be even, got " + to_string(x.shape()));
  const std::size_t ho = h / 2, wo = w / 2;
  Tensor out({c, ho, wo});
  std::vector<std::uint32_t> argmax(out.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t xo = 0; xo < wo; ++xo) {
        std::size_t best = (ch * h + 2 * y) * w + 2 * xo;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (ch * h + 2 * y + dy) * w + 2 * xo + dx;
            if (x[idx] > x[best]) best = idx;
          }
        const std::size_t o = (ch * ho + y) * wo + xo;
        out[o] = x[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
  return t.record(OpKind::MaxPool2, {input}, std::move(out), {}, 0.0, std::move(argmax));
}

NodeId upsample2(Tape& t, NodeId input) {
  const Tensor& x = t.value(input);
  require_chw(x, "upsample2");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out({c, 2 * h, 2 * w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t xo = 0; xo < 2 * w; ++xo) out.at(ch, y, xo) = x.at(ch, y / 2, xo / 2);
  return t.record(OpKind::Upsample2, {input}, std::move(out));
}

NodeId concat(Tape& t, std::span<const NodeId> inputs) {
  if (inputs.empty()) throw std::invalid_argument("concat: no inputs");
  const Tensor& first = t.value(inputs[0]);
  require_chw(first, "concat");
  std::size_t channels = 0;
  for (NodeId id : inputs) {
    const Tensor& v = t.value(id);
    require_chw(v, "concat");
    if (v.dim(1) != first.dim(1) || v.dim(2) != first.dim(2))
      throw std::invalid_argument("concat: shape mismatch " + to_string(first.shape()) + " vs " +
                                  to_string(v.shape()));
    channels += v.dim(0);
  }
  Tensor out({channels, first.dim(1), first.dim(2)});
  auto dst = out.data().begin();
  for (NodeId id : inputs) dst = std::copy(t.value(id).data().begin(), t.value(id).data().end(), dst);
  return t.record(OpKind::Concat, {inputs.begin(), inputs.end()}, std::move(out));
}

NodeId channel_softmax(Tape& t, NodeId logits) {
  Tensor out = channel_softmax_forward(t.value(logits));
  return t.record(OpKind::ChannelSoftmax, {logits}, std::move(out));
}

}  // namespace pmseg::ops

namespace pmseg::detail {

using ops::dot;

void backward_node(const Tape& tape, const Tape::Node& n, const Tensor& g,
                   std::span<Tensor* const> gin) {
  auto in = [&](std::size_t i) -> const Tensor& { return tape.value(n.inputs[i]); };
  switch (n.kind) {
    case OpKind::Variable:
    case OpKind::Constant:
      return;
    case OpKind::Add:
      for (std::size_t k = 0; k < 2; ++k)
        if (gin[k])
          for (std::size_t i = 0; i < g.size(); ++i) (*gin[k])[i] += g[i];
      return;
    case OpKind::Mul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (gin[0])
        for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * b[i];
      if (gin[1])
        for (std::size_t i = 0; i < g.size(); ++i) (*gin[1])[i] += g[i] * a[i];
      return;
    }
    case OpKind::Div: {
      const Tensor& b = in(1);
      if (gin[0])
        for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] / b[i];
      if (gin[1])
        for (std::size_t i = 0; i < g.size(); ++i) (*gin[1])[i] -= g[i] * n.value[i] / b[i];
      return;
    }
    case OpKind::Scale:
      if (gin[0])
        for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * n.param;
      return;
    case OpKind::AddScalar:
      if (gin[0])
        for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
      return;
    case OpKind::Log: {
      const Tensor& a = in(0);
      if (gin[0])
        for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] / a[i];
      return;
    }
    case OpKind::ClampMin: {
      const Tensor& a = in(0);
      if (gin[0])
        for (std::size_t i = 0; i < g.size(); ++i)
          if (a[i] > n.param) (*gin[0])[i] += g[i];
      return;
    }
    case OpKind::Pow: {
      const Tensor& a = in(0);
      if (gin[0])
        for (std::size_t i = 0; i < g.size(); ++i)
          if (a[i] > 0.0) (*gin[0])[i] += g[i] * n.param * std::pow(a[i], n.param - 1.0);
      return;
    }
    case OpKind::Relu: {
      const Tensor& a = in(0);
      if (gin[0])
        for (std::size_t i = 0; i < g.size(); ++i)
          if (a[i] > 0.0) (*gin[0])[i] += g[i];
      return;
    }
    case OpKind::Sum:
      if (gin[0])
        for (std::size_t i = 0; i < gin[0]->size(); ++i) (*gin[0])[i] += g[0];
      return;
    case OpKind::WeightedSum:
      if (gin[0])
        for (std::size_t i = 0; i < gin[0]->size(); ++i) (*gin[0])[i] += g[0] * n.saved[i];
      return;
    case OpKind::Conv2d: {
      const Tensor& input = in(0);
      const Tensor& kernel = in(1);
      const ops::ConvGeometry geo = ops::conv_geometry(input, kernel, in(2));
      const std::size_t hw = geo.h * geo.w, k = geo.k, p = static_cast<std::size_t>(geo.pad);
      const double* gp = g.data().data();
      if (gin[2])
        for (std::size_t co = 0; co < geo.cout; ++co) {
          double s = 0.0;
          for (std::size_t i = 0; i < hw; ++i) s += gp[co * hw + i];
          (*gin[2])[co] += s;
        }
      if (gin[1]) {
        const auto padded = ops::pad_planes(input.data().data(), geo.cin, geo.h, geo.w, p);
        ops::conv_kernel_grad(padded.data(), gp, geo.cin, geo.cout, geo.h, geo.w, k, gin[1]->data().data());
      }
      if (gin[0]) {
        // Input gradient is a convolution of the padded output gradient with
        // the flipped, channel-transposed kernel.
        std::vector<double> flipped(kernel.size());
        for (std::size_t co = 0; co < geo.cout; ++co)
          for (std::size_t ci = 0; ci < geo.cin; ++ci)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx)
                flipped[((ci * geo.cout + co) * k + (k - 1 - ky)) * k + (k - 1 - kx)] =
                    kernel[((co * geo.cin + ci) * k + ky) * k + kx];
        const auto padded = ops::pad_planes(gp, geo.cout, geo.h, geo.w, p);
        ops::conv_accumulate(padded.data(), geo.cout, geo.h, geo.w, k, flipped.data(), geo.cin,
                             gin[0]->data().data());
      }
      return;
    }
    case OpKind::MaxPool2:
      if (gin[0])
        for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[n.indices[i]] += g[i];
      return;
    case OpKind::Upsample2: {
      if (!gin[0]) return;
      Tensor& gi = *gin[0];
      const std::size_t c = gi.dim(0), h = gi.dim(1), w = gi.dim(2);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < 2 * h; ++y)
          for (std::size_t x = 0; x < 2 * w; ++x) gi.at(ch, y / 2, x / 2) += g.at(ch, y, x);
      return;
    }
    case OpKind::Concat: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t len = in(k).size();
        if (gin[k])
          for (std::size_t i = 0; i < len; ++i) (*gin[k])[i] += g[offset + i];
        offset += len;
      }
      return;
    }
    case OpKind::ChannelSoftmax: {
      if (!gin[0]) return;
      const Tensor& p = n.value;
      const std::size_t c = p.dim(0), hw = p.dim(1) * p.dim(2);
      std::vector<double> inner(hw, 0.0);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < hw; ++i) inner[i] += p[ch * hw + i] * g[ch * hw + i];
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < hw; ++i)
          (*gin[0])[ch * hw + i] += p[ch * hw + i] * (g[ch * hw + i] - inner[i]);
      return;
    }
  }
}

}  // namespace pmseg::detail
