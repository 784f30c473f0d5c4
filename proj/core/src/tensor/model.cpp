#include "survxai/tensor/model.hpp"

#include <algorithm>

#include "survxai/error.hpp"

namespace survxai::tensor {

Tensor stack(const std::vector<const Tensor*>& samples) {
  if (samples.empty()) throw ValidationError("stack: no samples");
  const Shape& s = samples.front()->shape();
  Shape out{samples.size()};
  out.insert(out.end(), s.begin(), s.end());
  Tensor batch(out);
  const std::size_t n = samples.front()->size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i]->shape() != s) {
      throw ShapeError("stack: sample " + std::to_string(i) + " has shape " +
                       shape_string(samples[i]->shape()) + ", expected " + shape_string(s));
    }
    std::copy(samples[i]->data(), samples[i]->data() + n, batch.data() + i * n);
  }
  return batch;
}

void check_target(const DifferentiableModel& model, std::size_t target) {
  if (target >= model.num_classes()) {
    throw ValidationError("target class " + std::to_string(target) + " out of range for " +
                          std::to_string(model.num_classes()) + " classes");
  }
}

void check_sample(const DifferentiableModel& model, const Tensor& x) {
  if (x.shape() != model.sample_shape()) {
    throw ShapeError("model expects samples of shape " + shape_string(model.sample_shape()) +
                     ", got " + shape_string(x.shape()));
  }
}

Tensor evaluate_logits(const DifferentiableModel& model, const std::vector<const Tensor*>& samples,
                       std::size_t batch) {
  if (samples.empty()) throw ValidationError("evaluate_logits: no samples");
  batch = std::max<std::size_t>(batch, 1);
  const std::size_t k = model.num_classes();
  Tensor out({samples.size(), k});
  for (std::size_t start = 0; start < samples.size(); start += batch) {
    const std::size_t stop = std::min(samples.size(), start + batch);
    std::vector<const Tensor*> chunk(samples.begin() + start, samples.begin() + stop);
    Tape tape;
    Var logits = model.logits(tape, tape.constant(stack(chunk)));
    std::copy(logits.value().data(), logits.value().data() + chunk.size() * k, out.data() + start * k);
  }
  return out;
}

std::vector<double> class_logits(const DifferentiableModel& model,
                                 const std::vector<const Tensor*>& samples, std::size_t target,
                                 std::size_t batch) {
  check_target(model, target);
  const Tensor all = evaluate_logits(model, samples, batch);
  const std::size_t k = model.num_classes();
  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out[i] = all[i * k + target];
  return out;
}

}  // namespace survxai::tensor
