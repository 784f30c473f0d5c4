#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "survxai/tensor/ops.hpp"
#include "survxai/tensor/tape.hpp"

namespace survxai::models {

using tensor::Shape;
using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

struct Parameter {
  std::string name;
  Tensor value;

  friend bool operator==(const Parameter&, const Parameter&) = default;
};

// Ordered, named parameter tensors of one network part.
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor init);

  std::size_t size() const noexcept { return params_.size(); }
  const Parameter& operator[](std::size_t i) const { return params_.at(i); }
  Parameter& operator[](std::size_t i) { return params_.at(i); }
  const std::vector<Parameter>& all() const noexcept { return params_; }

  // Records every parameter on the tape, as gradient leaves when trainable.
  std::vector<Var> bind(Tape& tape, bool trainable) const;

  std::size_t scalar_count() const;
  std::vector<float> flatten() const;
  void assign(std::span<const float> flat);

  friend bool operator==(const ParamStore&, const ParamStore&) = default;

 private:
  std::vector<Parameter> params_;
};

// He-normal weights for ReLU networks, zero bias.
Tensor he_normal(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

struct Conv3dLayer {
  std::size_t weight = 0;
  std::size_t bias = 0;
  tensor::ops::Conv3dOptions options;

  static Conv3dLayer create(ParamStore& store, const std::string& name, std::size_t in,
                            std::size_t out, std::size_t kernel, std::mt19937_64& rng);
  Var operator()(const std::vector<Var>& params, Var x) const;
};

struct DenseLayer {
  std::size_t weight = 0;
  std::size_t bias = 0;

  // zero_init gives an all-zero layer (used for output heads so an untrained
  // network predicts uniform logits).
  static DenseLayer create(ParamStore& store, const std::string& name, std::size_t in,
                           std::size_t out, std::mt19937_64& rng, bool zero_init = false);
  Var operator()(const std::vector<Var>& params, Var x) const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam over one ParamStore; moments are kept per scalar.
class Adam {
 public:
  Adam() = default;
  Adam(const ParamStore& store, AdamConfig config);

  void step(ParamStore& store, const std::vector<Tensor>& grads, double learning_rate);
  std::size_t steps() const noexcept { return t_; }

 private:
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

// Gradients for each bound parameter after Tape::backward.
std::vector<Tensor> collect_grads(const Tape& tape, const std::vector<Var>& bound);

}  // namespace survxai::models
