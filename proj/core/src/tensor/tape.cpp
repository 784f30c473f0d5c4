#include "survxai/tensor/tape.hpp"

#include <algorithm>

#include "survxai/error.hpp"

namespace survxai::tensor {

Var Tape::leaf(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.op = "leaf";
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.op = "constant";
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<Var> parents, BackwardFn backward, std::string_view op) {
  Node node;
  node.value = std::move(value);
  node.op = std::string(op);
  node.parents.reserve(parents.size());
  for (const Var& p : parents) {
    if (&p.tape() != this) throw ValidationError("op '" + node.op + "' mixes vars from different tapes");
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

void Tape::set_name(Var v, std::string name) {
  if (find(name)) throw ValidationError("duplicate capture name '" + name + "'");
  nodes_.at(v.id()).name = std::move(name);
}

std::optional<std::size_t> Tape::find(std::string_view name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].name == name) return i;
  }
  return std::nullopt;
}

Tensor Tape::grad(Var v) const {
  const Node& node = nodes_.at(v.id());
  if (node.grad.empty()) return Tensor(node.value.shape());
  return node.grad;
}

const Tensor& Tape::output_grad(std::size_t node) const { return nodes_.at(node).grad; }

float* Tape::grad_buffer(std::size_t node) {
  Node& n = nodes_.at(node);
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad.data();
}

void Tape::accumulate(std::size_t node, const Tensor& contribution) {
  float* g = grad_buffer(node);
  if (!g) return;
  if (contribution.size() != nodes_[node].value.size()) {
    throw ShapeError("gradient contribution " + shape_string(contribution.shape()) +
                     " does not match node " + shape_string(nodes_[node].value.shape()));
  }
  for (std::size_t i = 0; i < contribution.size(); ++i) g[i] += contribution[i];
}

void Tape::backward(Var output, const Tensor& seed) {
  if (nodes_.empty()) throw ValidationError("backward called on an empty tape");
  if (&output.tape() != this) throw ValidationError("backward output belongs to another tape");
  const std::size_t out = output.id();
  if (seed.shape() != nodes_.at(out).value.shape()) {
    throw ShapeError("seed gradient " + shape_string(seed.shape()) + " does not match output " +
                     shape_string(nodes_[out].value.shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  if (!nodes_[out].requires_grad) return;
  nodes_[out].grad = seed;
  for (std::size_t i = out + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
}

Capture Tape::capture(std::string_view name) const {
  auto idx = find(name);
  if (!idx) throw ValidationError("no capture point named '" + std::string(name) + "' on tape");
  const Node& n = nodes_[*idx];
  return {n.value, n.grad.empty() ? Tensor(n.value.shape()) : n.grad};
}

}  // namespace survxai::tensor
