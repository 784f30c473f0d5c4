#include "survxai/models/nn.hpp"

#include <algorithm>
#include <cmath>

#include "survxai/error.hpp"

namespace survxai::models {

std::size_t ParamStore::add(std::string name, Tensor init) {
  params_.push_back({std::move(name), std::move(init)});
  return params_.size() - 1;
}

std::vector<Var> ParamStore::bind(Tape& tape, bool trainable) const {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (const Parameter& p : params_) out.push_back(trainable ? tape.leaf(p.value) : tape.constant(p.value));
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

std::vector<float> ParamStore::flatten() const {
  std::vector<float> flat;
  flat.reserve(scalar_count());
  for (const Parameter& p : params_) flat.insert(flat.end(), p.value.values().begin(), p.value.values().end());
  return flat;
}

void ParamStore::assign(std::span<const float> flat) {
  if (flat.size() != scalar_count()) {
    throw ShapeError("parameter payload has " + std::to_string(flat.size()) + " values, expected " +
                     std::to_string(scalar_count()));
  }
  std::size_t offset = 0;
  for (Parameter& p : params_) {
    std::copy(flat.begin() + offset, flat.begin() + offset + p.value.size(), p.value.data());
    offset += p.value.size();
  }
}

Tensor he_normal(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
  for (float& v : t.storage()) v = dist(rng);
  return t;
}

Conv3dLayer Conv3dLayer::create(ParamStore& store, const std::string& name, std::size_t in,
                                std::size_t out, std::size_t kernel, std::mt19937_64& rng) {
  Conv3dLayer layer;
  layer.weight = store.add(name + ".weight",
                           he_normal({out, in, kernel, kernel, kernel}, in * kernel * kernel * kernel, rng));
  layer.bias = store.add(name + ".bias", Tensor({out}));
  layer.options.padding = kernel / 2;
  return layer;
}

Var Conv3dLayer::operator()(const std::vector<Var>& params, Var x) const {
  return tensor::ops::conv3d(x, params.at(weight), params.at(bias), options);
}

DenseLayer DenseLayer::create(ParamStore& store, const std::string& name, std::size_t in,
                              std::size_t out, std::mt19937_64& rng, bool zero_init) {
  DenseLayer layer;
  layer.weight = store.add(name + ".weight", zero_init ? Tensor({out, in}) : he_normal({out, in}, in, rng));
  layer.bias = store.add(name + ".bias", Tensor({out}));
  return layer;
}

Var DenseLayer::operator()(const std::vector<Var>& params, Var x) const {
  return tensor::ops::dense(x, params.at(weight), params.at(bias));
}

Adam::Adam(const ParamStore& store, AdamConfig config) : config_(config) {
  for (const Parameter& p : store.all()) {
    m_.emplace_back(p.value.size(), 0.0);
    v_.emplace_back(p.value.size(), 0.0);
  }
}

void Adam::step(ParamStore& store, const std::vector<Tensor>& grads, double learning_rate) {
  if (grads.size() != store.size() || m_.size() != store.size()) {
    throw ValidationError("Adam: gradient count does not match parameter store");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < store.size(); ++i) {
    Tensor& w = store[i].value;
    const Tensor& g = grads[i];
    if (g.size() != w.size()) throw ShapeError("Adam: gradient shape mismatch for " + store[i].name);
    for (std::size_t j = 0; j < w.size(); ++j) {
      m_[i][j] = config_.beta1 * m_[i][j] + (1.0 - config_.beta1) * g[j];
      v_[i][j] = config_.beta2 * v_[i][j] + (1.0 - config_.beta2) * g[j] * g[j];
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      w[j] -= static_cast<float>(learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon));
    }
  }
}

std::vector<Tensor> collect_grads(const Tape& tape, const std::vector<Var>& bound) {
  std::vector<Tensor> out;
  out.reserve(bound.size());
  for (const Var& v : bound) out.push_back(tape.grad(v));
  return out;
}

}  // namespace survxai::models
