#pragma once

#include <cstddef>
#include <vector>

#include "survxai/tensor/tape.hpp"

namespace survxai::tensor {

// A network viewed as a function from one input sample to class logits.
// Attribution methods and quality metrics only see this interface.
class DifferentiableModel {
 public:
  virtual ~DifferentiableModel() = default;

  // Records the forward pass for a batch [N, sample_shape()...] and returns
  // logits [N, num_classes()]. Implementations register their capture points
  // (e.g. conv stages) with Tape::set_name.
  virtual Var logits(Tape& tape, Var input) const = 0;

  virtual Shape sample_shape() const = 0;
  virtual std::size_t num_classes() const = 0;
};

// Stacks equally shaped samples into one batch tensor [N, ...].
Tensor stack(const std::vector<const Tensor*>& samples);

// Logits for each sample, evaluated in batches of at most `batch` samples.
// Returns [N, classes].
Tensor evaluate_logits(const DifferentiableModel& model, const std::vector<const Tensor*>& samples,
                       std::size_t batch = 16);

// The class-`target` logit of each sample.
std::vector<double> class_logits(const DifferentiableModel& model,
                                 const std::vector<const Tensor*>& samples, std::size_t target,
                                 std::size_t batch = 16);

void check_target(const DifferentiableModel& model, std::size_t target);
void check_sample(const DifferentiableModel& model, const Tensor& x);

}  // namespace survxai::tensor
