#include "survxai/tensor/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "survxai/error.hpp"

namespace survxai::tensor::ops {
namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

void require_rank(const char* op, const Var& v, std::size_t rank) {
  if (v.shape().size() != rank) {
    shape_fail(op, "expected rank " + std::to_string(rank) + ", got " + shape_string(v.shape()));
  }
}

void require_same(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    shape_fail(op, "shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

Tape& tape_of(const char* op, std::initializer_list<Var> vars) {
  Tape* t = nullptr;
  for (const Var& v : vars) {
    if (!v.valid()) continue;
    if (t && &v.tape() != t) throw ValidationError(std::string(op) + ": vars from different tapes");
    t = &v.tape();
  }
  if (!t) throw ValidationError(std::string(op) + ": no valid inputs");
  return *t;
}

struct ConvGeometry {
  std::size_t n, c, d, h, w;
  std::size_t o, kd, kh, kw;
  std::size_t od, oh, ow;
  std::size_t stride, pad;

  std::size_t patch() const { return c * kd * kh * kw; }
  std::size_t out_voxels() const { return od * oh * ow; }
  std::size_t in_voxels() const { return d * h * w; }
};

// cols is [C*KD*KH*KW, OD*OH*OW] row-major.
void im2col(const float* x, const ConvGeometry& g, float* cols) {
  const std::size_t p = g.out_voxels();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c; ++c) {
    const float* xc = x + c * g.in_voxels();
    for (std::size_t a = 0; a < g.kd; ++a) {
      for (std::size_t b = 0; b < g.kh; ++b) {
        for (std::size_t e = 0; e < g.kw; ++e, ++row) {
          float* out = cols + row * p;
          for (std::size_t z = 0; z < g.od; ++z) {
            const long iz = static_cast<long>(z * g.stride + a) - static_cast<long>(g.pad);
            if (iz < 0 || iz >= static_cast<long>(g.d)) {
              std::fill(out, out + g.oh * g.ow, 0.0f);
              out += g.oh * g.ow;
              continue;
            }
            for (std::size_t y = 0; y < g.oh; ++y) {
              const long iy = static_cast<long>(y * g.stride + b) - static_cast<long>(g.pad);
              if (iy < 0 || iy >= static_cast<long>(g.h)) {
                std::fill(out, out + g.ow, 0.0f);
                out += g.ow;
                continue;
              }
              const float* src = xc + (static_cast<std::size_t>(iz) * g.h + iy) * g.w;
              for (std::size_t q = 0; q < g.ow; ++q) {
                const long ix = static_cast<long>(q * g.stride + e) - static_cast<long>(g.pad);
                *out++ = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0f : src[ix];
              }
            }
          }
        }
      }
    }
  }
}

void col2im_add(const float* cols, const ConvGeometry& g, float* dx) {
  const std::size_t p = g.out_voxels();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c; ++c) {
    float* xc = dx + c * g.in_voxels();
    for (std::size_t a = 0; a < g.kd; ++a) {
      for (std::size_t b = 0; b < g.kh; ++b) {
        for (std::size_t e = 0; e < g.kw; ++e, ++row) {
          const float* in = cols + row * p;
          for (std::size_t z = 0; z < g.od; ++z) {
            const long iz = static_cast<long>(z * g.stride + a) - static_cast<long>(g.pad);
            if (iz < 0 || iz >= static_cast<long>(g.d)) {
              in += g.oh * g.ow;
              continue;
            }
            for (std::size_t y = 0; y < g.oh; ++y) {
              const long iy = static_cast<long>(y * g.stride + b) - static_cast<long>(g.pad);
              if (iy < 0 || iy >= static_cast<long>(g.h)) {
                in += g.ow;
                continue;
              }
              float* dst = xc + (static_cast<std::size_t>(iz) * g.h + iy) * g.w;
              for (std::size_t q = 0; q < g.ow; ++q, ++in) {
                const long ix = static_cast<long>(q * g.stride + e) - static_cast<long>(g.pad);
                if (ix >= 0 && ix < static_cast<long>(g.w)) dst[ix] += *in;
              }
            }
          }
        }
      }
    }
  }
}

struct PoolGeometry {
  std::size_t planes;  // N * C
  std::size_t d, h, w;
  std::size_t od, oh, ow;
  std::size_t k;
};

PoolGeometry pool_geometry(const char* op, const Var& x, std::size_t k) {
  require_rank(op, x, 5);
  if (k == 0) shape_fail(op, "window must be positive");
  const Shape& s = x.shape();
  PoolGeometry g{s[0] * s[1], s[2], s[3], s[4], s[2] / k, s[3] / k, s[4] / k, k};
  if (g.od == 0 || g.oh == 0 || g.ow == 0) {
    shape_fail(op, "window " + std::to_string(k) + " larger than input " + shape_string(s));
  }
  return g;
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
  if (stride == 0) throw ShapeError("conv3d: stride must be positive");
  if (in + 2 * padding < kernel) {
    throw ShapeError("conv3d: kernel " + std::to_string(kernel) + " exceeds padded input " +
                     std::to_string(in + 2 * padding));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

Var dense(Var x, Var weight, Var bias) {
  Tape& t = tape_of("dense", {x, weight, bias});
  require_rank("dense", x, 2);
  require_rank("dense", weight, 2);
  const std::size_t n = x.shape()[0], in = x.shape()[1], out = weight.shape()[0];
  if (weight.shape()[1] != in) {
    shape_fail("dense", "input features " + std::to_string(in) + " vs weight " +
                            shape_string(weight.shape()));
  }
  if (bias.valid() && bias.shape() != Shape{out}) {
    shape_fail("dense", "bias " + shape_string(bias.shape()) + " vs out features " + std::to_string(out));
  }
  Tensor y({n, out});
  MatMap Y(y.data(), n, out);
  ConstMatMap X(x.value().data(), n, in);
  ConstMatMap Wm(weight.value().data(), out, in);
  Y.noalias() = X * Wm.transpose();
  if (bias.valid()) {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < out; ++c) y[r * out + c] += bias.value()[c];
  }
  std::vector<Var> parents{x, weight};
  if (bias.valid()) parents.push_back(bias);
  return t.record(std::move(y), parents, [n, in, out](Tape& tp, std::size_t self) {
    const auto& ps = tp.parents(self);
    ConstMatMap G(tp.output_grad(self).data(), n, out);
    ConstMatMap X(tp.value(ps[0]).data(), n, in);
    ConstMatMap Wm(tp.value(ps[1]).data(), out, in);
    if (float* dx = tp.grad_buffer(ps[0])) MatMap(dx, n, in).noalias() += G * Wm;
    if (float* dw = tp.grad_buffer(ps[1])) MatMap(dw, out, in).noalias() += G.transpose() * X;
    if (ps.size() > 2) {
      if (float* db = tp.grad_buffer(ps[2])) {
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < out; ++c) db[c] += G(r, c);
      }
    }
  }, "dense");
}

Var conv3d(Var x, Var weight, Var bias, Conv3dOptions options) {
  Tape& t = tape_of("conv3d", {x, weight, bias});
  require_rank("conv3d", x, 5);
  require_rank("conv3d", weight, 5);
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws[1] != xs[1]) {
    shape_fail("conv3d", "input channels " + std::to_string(xs[1]) + " vs weight " + shape_string(ws));
  }
  if (bias.valid() && bias.shape() != Shape{ws[0]}) {
    shape_fail("conv3d", "bias " + shape_string(bias.shape()) + " vs out channels " + std::to_string(ws[0]));
  }
  ConvGeometry g{xs[0], xs[1], xs[2], xs[3], xs[4], ws[0], ws[2], ws[3], ws[4], 0, 0, 0,
                 options.stride, options.padding};
  g.od = conv_output_extent(g.d, g.kd, g.stride, g.pad);
  g.oh = conv_output_extent(g.h, g.kh, g.stride, g.pad);
  g.ow = conv_output_extent(g.w, g.kw, g.stride, g.pad);

  const std::size_t p = g.out_voxels(), ck = g.patch();
  Tensor y({g.n, g.o, g.od, g.oh, g.ow});
  std::vector<float> cols(ck * p);
  ConstMatMap Wm(weight.value().data(), g.o, ck);
  for (std::size_t b = 0; b < g.n; ++b) {
    im2col(x.value().data() + b * g.c * g.in_voxels(), g, cols.data());
    MatMap Y(y.data() + b * g.o * p, g.o, p);
    Y.noalias() = Wm * ConstMatMap(cols.data(), ck, p);
    if (bias.valid()) {
      for (std::size_t o = 0; o < g.o; ++o) Y.row(o).array() += bias.value()[o];
    }
  }
  std::vector<Var> parents{x, weight};
  if (bias.valid()) parents.push_back(bias);
  return t.record(std::move(y), parents, [g](Tape& tp, std::size_t self) {
    const auto& ps = tp.parents(self);
    const std::size_t p = g.out_voxels(), ck = g.patch();
    const Tensor& gy = tp.output_grad(self);
    const float* xv = tp.value(ps[0]).data();
    ConstMatMap Wm(tp.value(ps[1]).data(), g.o, ck);
    float* dx = tp.grad_buffer(ps[0]);
    float* dw = tp.grad_buffer(ps[1]);
    float* db = ps.size() > 2 ? tp.grad_buffer(ps[2]) : nullptr;
    std::vector<float> cols(ck * p);
    for (std::size_t b = 0; b < g.n; ++b) {
      ConstMatMap G(gy.data() + b * g.o * p, g.o, p);
      if (dw) {
        im2col(xv + b * g.c * g.in_voxels(), g, cols.data());
        MatMap(dw, g.o, ck).noalias() += G * ConstMatMap(cols.data(), ck, p).transpose();
      }
      if (db) {
        // Sequential sum: a vectorized reduction over a map peels by runtime alignment.
        for (std::size_t o = 0; o < g.o; ++o) {
          float acc = 0.0f;
          for (std::size_t i = 0; i < p; ++i) acc += G(o, i);
          db[o] += acc;
        }
      }
      if (dx) {
        MatMap(cols.data(), ck, p).noalias() = Wm.transpose() * G;
        col2im_add(cols.data(), g, dx + b * g.c * g.in_voxels());
      }
    }
  }, "conv3d");
}

Var relu(Var x) {
  Tape& t = x.tape();
  Tensor y = x.value();
  for (float& v : y.storage()) v = v > 0.0f ? v : 0.0f;
  return t.record(std::move(y), {x}, [](Tape& tp, std::size_t self) {
    const std::size_t in = tp.parents(self)[0];
    float* dx = tp.grad_buffer(in);
    if (!dx) return;
    const Tensor& xv = tp.value(in);
    const Tensor& gy = tp.output_grad(self);
    const bool guided = tp.mode() == BackwardMode::guided;
    for (std::size_t i = 0; i < gy.size(); ++i) {
      if (xv[i] <= 0.0f) continue;
      if (guided && gy[i] < 0.0f) continue;
      dx[i] += gy[i];
    }
  }, "relu");
}

Var sigmoid(Var x) {
  Tape& t = x.tape();
  Tensor y = x.value();
  for (float& v : y.storage()) v = 1.0f / (1.0f + std::exp(-v));
  return t.record(std::move(y), {x}, [](Tape& tp, std::size_t self) {
    float* dx = tp.grad_buffer(tp.parents(self)[0]);
    if (!dx) return;
    const Tensor& yv = tp.value(self);
    const Tensor& gy = tp.output_grad(self);
    for (std::size_t i = 0; i < gy.size(); ++i) dx[i] += gy[i] * yv[i] * (1.0f - yv[i]);
  }, "sigmoid");
}

Var max_pool3d(Var x, std::size_t k) {
  const PoolGeometry g = pool_geometry("max_pool3d", x, k);
  const Shape& s = x.shape();
  Tensor y({s[0], s[1], g.od, g.oh, g.ow});
  auto argmax = std::make_shared<std::vector<std::size_t>>(y.size());
  const float* xv = x.value().data();
  std::size_t o = 0;
  for (std::size_t pl = 0; pl < g.planes; ++pl) {
    const std::size_t base = pl * g.d * g.h * g.w;
    for (std::size_t z = 0; z < g.od; ++z)
      for (std::size_t yy = 0; yy < g.oh; ++yy)
        for (std::size_t q = 0; q < g.ow; ++q, ++o) {
          std::size_t best = base + ((z * k) * g.h + yy * k) * g.w + q * k;
          for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b)
              for (std::size_t e = 0; e < k; ++e) {
                const std::size_t idx = base + ((z * k + a) * g.h + yy * k + b) * g.w + q * k + e;
                if (xv[idx] > xv[best]) best = idx;
              }
          (*argmax)[o] = best;
          y[o] = xv[best];
        }
  }
  return x.tape().record(std::move(y), {x}, [argmax](Tape& tp, std::size_t self) {
    float* dx = tp.grad_buffer(tp.parents(self)[0]);
    if (!dx) return;
    const Tensor& gy = tp.output_grad(self);
    for (std::size_t i = 0; i < gy.size(); ++i) dx[(*argmax)[i]] += gy[i];
  }, "max_pool3d");
}

Var avg_pool3d(Var x, std::size_t k) {
  const PoolGeometry g = pool_geometry("avg_pool3d", x, k);
  const Shape& s = x.shape();
  Tensor y({s[0], s[1], g.od, g.oh, g.ow});
  const float inv = 1.0f / static_cast<float>(k * k * k);
  const float* xv = x.value().data();
  std::size_t o = 0;
  for (std::size_t pl = 0; pl < g.planes; ++pl) {
    const std::size_t base = pl * g.d * g.h * g.w;
    for (std::size_t z = 0; z < g.od; ++z)
      for (std::size_t yy = 0; yy < g.oh; ++yy)
        for (std::size_t q = 0; q < g.ow; ++q, ++o) {
          float acc = 0.0f;
          for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b)
              for (std::size_t e = 0; e < k; ++e)
                acc += xv[base + ((z * k + a) * g.h + yy * k + b) * g.w + q * k + e];
          y[o] = acc * inv;
        }
  }
  return x.tape().record(std::move(y), {x}, [g, inv](Tape& tp, std::size_t self) {
    float* dx = tp.grad_buffer(tp.parents(self)[0]);
    if (!dx) return;
    const Tensor& gy = tp.output_grad(self);
    const std::size_t k = g.k;
    std::size_t o = 0;
    for (std::size_t pl = 0; pl < g.planes; ++pl) {
      const std::size_t base = pl * g.d * g.h * g.w;
      for (std::size_t z = 0; z < g.od; ++z)
        for (std::size_t yy = 0; yy < g.oh; ++yy)
          for (std::size_t q = 0; q < g.ow; ++q, ++o) {
            const float v = gy[o] * inv;
            for (std::size_t a = 0; a < k; ++a)
              for (std::size_t b = 0; b < k; ++b)
                for (std::size_t e = 0; e < k; ++e)
                  dx[base + ((z * k + a) * g.h + yy * k + b) * g.w + q * k + e] += v;
          }
    }
  }, "avg_pool3d");
}

Var upsample_nearest3d(Var x, std::size_t factor) {
  require_rank("upsample_nearest3d", x, 5);
  if (factor == 0) shape_fail("upsample_nearest3d", "factor must be positive");
  const Shape& s = x.shape();
  const std::size_t planes = s[0] * s[1], d = s[2], h = s[3], w = s[4];
  const std::size_t od = d * factor, oh = h * factor, ow = w * factor;
  Tensor y({s[0], s[1], od, oh, ow});
  const float* xv = x.value().data();
  std::size_t o = 0;
  for (std::size_t pl = 0; pl < planes; ++pl)
    for (std::size_t z = 0; z < od; ++z)
      for (std::size_t yy = 0; yy < oh; ++yy) {
        const float* src = xv + ((pl * d + z / factor) * h + yy / factor) * w;
        for (std::size_t q = 0; q < ow; ++q) y[o++] = src[q / factor];
      }
  return x.tape().record(std::move(y), {x}, [=](Tape& tp, std::size_t self) {
    float* dx = tp.grad_buffer(tp.parents(self)[0]);
    if (!dx) return;
    const Tensor& gy = tp.output_grad(self);
    std::size_t o = 0;
    for (std::size_t pl = 0; pl < planes; ++pl)
      for (std::size_t z = 0; z < od; ++z)
        for (std::size_t yy = 0; yy < oh; ++yy) {
          float* dst = dx + ((pl * d + z / factor) * h + yy / factor) * w;
          for (std::size_t q = 0; q < ow; ++q) dst[q / factor] += gy[o++];
        }
  }, "upsample_nearest3d");
}

Var softmax(Var x) {
  require_rank("softmax", x, 2);
  const std::size_t n = x.shape()[0], k = x.shape()[1];
  Tensor y = x.value();
  for (std::size_t r = 0; r < n; ++r) {
    float* row = y.data() + r * k;
    const float m = *std::max_element(row, row + k);
    float total = 0.0f;
    for (std::size_t c = 0; c < k; ++c) total += (row[c] = std::exp(row[c] - m));
    for (std::size_t c = 0; c < k; ++c) row[c] /= total;
  }
  return x.tape().record(std::move(y), {x}, [n, k](Tape& tp, std::size_t self) {
    float* dx = tp.grad_buffer(tp.parents(self)[0]);
    if (!dx) return;
    const Tensor& yv = tp.value(self);
    const Tensor& gy = tp.output_grad(self);
    for (std::size_t r = 0; r < n; ++r) {
      float dot = 0.0f;
      for (std::size_t c = 0; c < k; ++c) dot += gy[r * k + c] * yv[r * k + c];
      for (std::size_t c = 0; c < k; ++c) dx[r * k + c] += yv[r * k + c] * (gy[r * k + c] - dot);
    }
  }, "softmax");
}

Var add(Var a, Var b) {
  Tape& t = tape_of("add", {a, b});
  require_same("add", a, b);
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  return t.record(std::move(y), {a, b}, [](Tape& tp, std::size_t self) {
    const Tensor& gy = tp.output_grad(self);
    for (std::size_t p : tp.parents(self)) tp.accumulate(p, gy);
  }, "add");
}

Var sub(Var a, Var b) {
  Tape& t = tape_of("sub", {a, b});
  require_same("sub", a, b);
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  return t.record(std::move(y), {a, b}, [](Tape& tp, std::size_t self) {
    const Tensor& gy = tp.output_grad(self);
    const auto& ps = tp.parents(self);
    tp.accumulate(ps[0], gy);
    if (float* db = tp.grad_buffer(ps[1])) {
      for (std::size_t i = 0; i < gy.size(); ++i) db[i] -= gy[i];
    }
  }, "sub");
}

Var mul(Var a, Var b) {
  Tape& t = tape_of("mul", {a, b});
  require_same("mul", a, b);
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return t.record(std::move(y), {a, b}, [](Tape& tp, std::size_t self) {
    const Tensor& gy = tp.output_grad(self);
    const auto& ps = tp.parents(self);
    const Tensor& av = tp.value(ps[0]);
    const Tensor& bv = tp.value(ps[1]);
    if (float* da = tp.grad_buffer(ps[0])) {
      for (std::size_t i = 0; i < gy.size(); ++i) da[i] += gy[i] * bv[i];
    }
    if (float* db = tp.grad_buffer(ps[1])) {
      for (std::size_t i = 0; i < gy.size(); ++i) db[i] += gy[i] * av[i];
    }
  }, "mul");
}

Var scale(Var x, float factor) {
  Tensor y = x.value();
  for (float& v : y.storage()) v *= factor;
  return x.tape().record(std::move(y), {x}, [factor](Tape& tp, std::size_t self) {
    float* dx = tp.grad_buffer(tp.parents(self)[0]);
    if (!dx) return;
    const Tensor& gy = tp.output_grad(self);
    for (std::size_t i = 0; i < gy.size(); ++i) dx[i] += factor * gy[i];
  }, "scale");
}

Var add_scalar(Var x, float offset) {
  Tensor y = x.value();
  for (float& v : y.storage()) v += offset;
  return x.tape().record(std::move(y), {x}, [](Tape& tp, std::size_t self) {
    tp.accumulate(tp.parents(self)[0], tp.output_grad(self));
  }, "add_scalar");
}

Var sum(Var x) {
  double total = 0.0;
  for (float v : x.value().values()) total += v;
  return x.tape().record(Tensor::scalar(static_cast<float>(total)), {x},
                         [](Tape& tp, std::size_t self) {
    const std::size_t in = tp.parents(self)[0];
    float* dx = tp.grad_buffer(in);
    if (!dx) return;
    const float g = tp.output_grad(self)[0];
    for (std::size_t i = 0; i < tp.value(in).size(); ++i) dx[i] += g;
  }, "sum");
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  double total = 0.0;
  for (float v : x.value().values()) total += v;
  return x.tape().record(Tensor::scalar(static_cast<float>(total / n)), {x},
                         [n](Tape& tp, std::size_t self) {
    float* dx = tp.grad_buffer(tp.parents(self)[0]);
    if (!dx) return;
    const float g = tp.output_grad(self)[0] / static_cast<float>(n);
    for (std::size_t i = 0; i < n; ++i) dx[i] += g;
  }, "mean");
}

Var spatial_mean(Var x) {
  if (x.shape().size() < 3) shape_fail("spatial_mean", "expected rank >= 3, got " + shape_string(x.shape()));
  const std::size_t n = x.shape()[0], c = x.shape()[1];
  const std::size_t inner = x.value().size() / (n * c);
  Tensor y({n, c});
  const float* xv = x.value().data();
  for (std::size_t i = 0; i < n * c; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < inner; ++j) total += xv[i * inner + j];
    y[i] = static_cast<float>(total / inner);
  }
  return x.tape().record(std::move(y), {x}, [n, c, inner](Tape& tp, std::size_t self) {
    float* dx = tp.grad_buffer(tp.parents(self)[0]);
    if (!dx) return;
    const Tensor& gy = tp.output_grad(self);
    for (std::size_t i = 0; i < n * c; ++i) {
      const float v = gy[i] / static_cast<float>(inner);
      for (std::size_t j = 0; j < inner; ++j) dx[i * inner + j] += v;
    }
  }, "spatial_mean");
}

Var concat(const std::vector<Var>& xs, std::size_t axis) {
  if (xs.empty()) throw ValidationError("concat: no inputs");
  const Shape& first = xs[0].shape();
  if (axis >= first.size()) shape_fail("concat", "axis out of range for " + shape_string(first));
  Shape out = first;
  out[axis] = 0;
  std::vector<std::size_t> extents;
  for (const Var& v : xs) {
    const Shape& s = v.shape();
    if (s.size() != first.size()) shape_fail("concat", "rank mismatch " + shape_string(s));
    for (std::size_t a = 0; a < s.size(); ++a) {
      if (a != axis && s[a] != first[a]) {
        shape_fail("concat", "non-axis dimension mismatch " + shape_string(first) + " vs " + shape_string(s));
      }
    }
    extents.push_back(s[axis]);
    out[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= first[a];
  for (std::size_t a = axis + 1; a < first.size(); ++a) inner *= first[a];
  Tensor y(out);
  const std::size_t row = out[axis] * inner;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const float* src = xs[k].value().data();
    const std::size_t chunk = extents[k] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(src + o * chunk, src + (o + 1) * chunk, y.data() + o * row + offset);
    }
    offset += chunk;
  }
  return xs[0].tape().record(std::move(y), xs, [extents, outer, inner, row](Tape& tp, std::size_t self) {
    const auto& ps = tp.parents(self);
    const Tensor& gy = tp.output_grad(self);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const std::size_t chunk = extents[k] * inner;
      if (float* dx = tp.grad_buffer(ps[k])) {
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t j = 0; j < chunk; ++j) dx[o * chunk + j] += gy[o * row + offset + j];
      }
      offset += chunk;
    }
  }, "concat");
}

Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = x.shape();
  if (axis >= s.size() || begin >= end || end > s[axis]) {
    shape_fail("slice", "range [" + std::to_string(begin) + ", " + std::to_string(end) +
                            ") on axis " + std::to_string(axis) + " invalid for " + shape_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= s[a];
  for (std::size_t a = axis + 1; a < s.size(); ++a) inner *= s[a];
  Shape out = s;
  out[axis] = end - begin;
  Tensor y(out);
  const std::size_t row = s[axis] * inner, chunk = (end - begin) * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    const float* src = x.value().data() + o * row + begin * inner;
    std::copy(src, src + chunk, y.data() + o * chunk);
  }
  return x.tape().record(std::move(y), {x}, [=](Tape& tp, std::size_t self) {
    float* dx = tp.grad_buffer(tp.parents(self)[0]);
    if (!dx) return;
    const Tensor& gy = tp.output_grad(self);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t j = 0; j < chunk; ++j) dx[o * row + begin * inner + j] += gy[o * chunk + j];
  }, "slice");
}

Var reshape(Var x, Shape shape) {
  Tensor y = x.value().reshaped(std::move(shape));
  return x.tape().record(std::move(y), {x}, [](Tape& tp, std::size_t self) {
    const std::size_t in = tp.parents(self)[0];
    float* dx = tp.grad_buffer(in);
    if (!dx) return;
    const Tensor& gy = tp.output_grad(self);
    for (std::size_t i = 0; i < gy.size(); ++i) dx[i] += gy[i];
  }, "reshape");
}

Var row_scale(Var x, Var s) {
  Tape& t = tape_of("row_scale", {x, s});
  require_rank("row_scale", x, 2);
  const std::size_t n = x.shape()[0], f = x.shape()[1];
  if (s.shape() != Shape{n, 1}) {
    shape_fail("row_scale", "scale " + shape_string(s.shape()) + " vs rows of " + shape_string(x.shape()));
  }
  Tensor y = x.value();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < f; ++c) y[r * f + c] *= s.value()[r];
  return t.record(std::move(y), {x, s}, [n, f](Tape& tp, std::size_t self) {
    const auto& ps = tp.parents(self);
    const Tensor& gy = tp.output_grad(self);
    const Tensor& xv = tp.value(ps[0]);
    const Tensor& sv = tp.value(ps[1]);
    if (float* dx = tp.grad_buffer(ps[0])) {
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < f; ++c) dx[r * f + c] += gy[r * f + c] * sv[r];
    }
    if (float* ds = tp.grad_buffer(ps[1])) {
      for (std::size_t r = 0; r < n; ++r) {
        float acc = 0.0f;
        for (std::size_t c = 0; c < f; ++c) acc += gy[r * f + c] * xv[r * f + c];
        ds[r] += acc;
      }
    }
  }, "row_scale");
}

}  // namespace survxai::tensor::ops
