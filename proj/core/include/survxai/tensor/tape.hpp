#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "survxai/tensor/tensor.hpp"

namespace survxai::tensor {

// Guided mode additionally drops negative incoming gradients at every ReLU.
enum class BackwardMode { standard, guided };

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct Capture {
  Tensor activations;
  Tensor gradients;
};

// Define-by-run record of a forward pass. Nodes are stored in execution order,
// so reverse iteration is a valid topological order for backward().
class Tape {
 public:
  // Called once during backward() with the node's accumulated output gradient
  // available via grad(node); pushes contributions into parents with accumulate().
  using BackwardFn = std::function<void(Tape&, std::size_t node)>;

  explicit Tape(BackwardMode mode = BackwardMode::standard) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // Leaf that receives a gradient.
  Var leaf(Tensor value);
  // Leaf without gradient.
  Var constant(Tensor value);

  Var record(Tensor value, std::vector<Var> parents, BackwardFn backward, std::string_view op);

  void set_name(Var v, std::string name);
  std::optional<std::size_t> find(std::string_view name) const;

  const Tensor& value(std::size_t node) const { return nodes_.at(node).value; }
  const Tensor& value(Var v) const { return value(v.id()); }
  const std::vector<std::size_t>& parents(std::size_t node) const { return nodes_.at(node).parents; }
  const std::string& op(std::size_t node) const { return nodes_.at(node).op; }
  bool requires_grad(std::size_t node) const { return nodes_.at(node).requires_grad; }

  // Gradient accumulated at a node by the last backward(); zeros if none reached it.
  Tensor grad(Var v) const;
  // Read access during backward for the node being processed.
  const Tensor& output_grad(std::size_t node) const;
  // Adds `contribution` into the gradient buffer of `node` (no-op if it needs no grad).
  float* grad_buffer(std::size_t node);
  void accumulate(std::size_t node, const Tensor& contribution);

  void backward(Var output, const Tensor& seed);

  // Forward activation and gradient at a node registered with set_name.
  Capture capture(std::string_view name) const;

  BackwardMode mode() const noexcept { return mode_; }
  void set_mode(BackwardMode mode) noexcept { mode_ = mode; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    std::string op;
    std::string name;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  BackwardMode mode_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

}  // namespace survxai::tensor
