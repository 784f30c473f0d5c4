#pragma once

#include <cstddef>
#include <vector>

#include "survxai/tensor/tape.hpp"

// Differentiable operations. Every op checks its shape contract and throws
// ShapeError with the offending dimensions. Volumes are laid out [N, C, D, H, W].
namespace survxai::tensor::ops {

// x [N, in], weight [out, in], bias [out] (optional) -> [N, out]
Var dense(Var x, Var weight, Var bias = {});

struct Conv3dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// x [N, C, D, H, W], weight [O, C, KD, KH, KW], bias [O] (optional)
Var conv3d(Var x, Var weight, Var bias = {}, Conv3dOptions options = {});

Var relu(Var x);
Var sigmoid(Var x);

// Non-overlapping pooling with window = stride = k; trailing remainders are dropped.
Var max_pool3d(Var x, std::size_t k);
Var avg_pool3d(Var x, std::size_t k);
Var upsample_nearest3d(Var x, std::size_t factor);

// Softmax along the last axis of a rank-2 tensor.
Var softmax(Var x);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, float factor);
Var add_scalar(Var x, float offset);

// Full reductions to shape [1].
Var sum(Var x);
Var mean(Var x);
// [N, C, ...] -> [N, C]
Var spatial_mean(Var x);

Var concat(const std::vector<Var>& xs, std::size_t axis);
Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end);
Var reshape(Var x, Shape shape);

// x [N, F] scaled row-wise by s [N, 1].
Var row_scale(Var x, Var s);

// Output extent of a convolution along one axis.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

}  // namespace survxai::tensor::ops
