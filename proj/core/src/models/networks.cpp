#include "survxai/models/networks.hpp"

#include "survxai/error.hpp"
#include "survxai/util/format.hpp"

namespace survxai::models {

namespace ops = tensor::ops;

namespace {

std::uint64_t hash_values(std::initializer_list<std::uint64_t> values, std::uint64_t h = util::kFnvOffset) {
  for (std::uint64_t v : values) h = util::fnv1a(&v, sizeof v, h);
  return h;
}

std::size_t flat_features(const Var& v) {
  const Shape& s = v.shape();
  std::size_t n = 1;
  for (std::size_t i = 1; i < s.size(); ++i) n *= s[i];
  return n;
}

Var flatten(Var v) { return ops::reshape(v, {v.shape()[0], flat_features(v)}); }

}  // namespace

void AutoencoderSpec::validate() const {
  for (std::size_t d : input_dims) {
    if (d < 8 || d % 8 != 0) throw ValidationError("autoencoder input dims must be positive multiples of 8");
  }
  for (std::size_t w : widths) {
    if (w == 0) throw ValidationError("autoencoder channel widths must be positive");
  }
  if (kernel % 2 == 0) throw ValidationError("autoencoder kernel must be odd");
}

std::uint64_t AutoencoderSpec::hash() const {
  return hash_values({input_dims[0], input_dims[1], input_dims[2], widths[0], widths[1], widths[2], kernel});
}

Encoder::Encoder(const AutoencoderSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  std::size_t in = 1;
  for (std::size_t i = 0; i < 3; ++i) {
    blocks_[i] = Conv3dLayer::create(params, "enc" + std::to_string(i + 1), in, spec.widths[i], spec.kernel, rng);
    in = spec.widths[i];
  }
}

Encoder::Features Encoder::forward(Tape& tape, const std::vector<Var>& p, Var x) const {
  Features f;
  Var h = x;
  for (std::size_t i = 0; i < 3; ++i) {
    h = ops::relu(blocks_[i](p, h));
    tape.set_name(h, "s" + std::to_string(i + 1));
    f.stages[i] = h;
    h = ops::max_pool3d(h, 2);
  }
  f.bottleneck = h;
  return f;
}

Autoencoder::Autoencoder(AutoencoderSpec spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  std::mt19937_64 rng(seed);
  encoder = Encoder(spec_, rng);
  const auto& w = spec_.widths;
  // Decoder block j consumes the upsampled features concatenated with stage 3 - j.
  const std::array<std::size_t, 3> in{w[2] + w[2], w[1] + w[1], w[0] + w[0]};
  const std::array<std::size_t, 3> out{w[1], w[0], w[0]};
  for (std::size_t j = 0; j < 3; ++j) {
    blocks_[j] = Conv3dLayer::create(decoder, "dec" + std::to_string(j + 1), in[j], out[j], spec_.kernel, rng);
  }
  out_ = Conv3dLayer::create(decoder, "out", w[0], 1, 1, rng);
}

Var Autoencoder::forward(Tape& tape, const std::vector<Var>& encoder_params, const std::vector<Var>& decoder_params,
                         Var x) const {
  const Encoder::Features f = encoder.forward(tape, encoder_params, x);
  Var h = f.bottleneck;
  for (std::size_t j = 0; j < 3; ++j) {
    Var up = ops::upsample_nearest3d(h, 2);
    h = ops::relu(blocks_[j](decoder_params, ops::concat({up, f.stages[2 - j]}, 1)));
  }
  return out_(decoder_params, h);
}

Tensor Autoencoder::reconstruct(const Tensor& batch) const {
  Tape tape;
  const auto ep = encoder.params.bind(tape, false);
  const auto dp = decoder.bind(tape, false);
  return forward(tape, ep, dp, tape.constant(batch)).value();
}

std::string to_string(HeadKind h) { return h == HeadKind::mlp ? "mlp" : "attention"; }

HeadKind parse_head(const std::string& s) {
  if (s == "mlp") return HeadKind::mlp;
  if (s == "attention") return HeadKind::attention;
  throw ValidationError("unknown classifier head '" + s + "' (expected mlp or attention)");
}

void ClassifierSpec::validate() const {
  encoder.validate();
  if (hidden < 2) throw ValidationError("classifier hidden width must be at least 2");
}

std::uint64_t ClassifierSpec::hash() const {
  return hash_values({static_cast<std::uint64_t>(head), hidden}, encoder.hash());
}

Classifier::Classifier(ClassifierSpec spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  std::mt19937_64 rng(seed);
  encoder = Encoder(spec_.encoder, rng);
  const auto& d = spec_.encoder.input_dims;
  const auto& w = spec_.encoder.widths;
  const std::size_t coarse = (d[0] / 8) * (d[1] / 8) * (d[2] / 8);
  const std::size_t h = spec_.hidden;
  if (spec_.head == HeadKind::mlp) {
    layers_.push_back(DenseLayer::create(head, "mlp1", w[2] * coarse, h, rng));
    layers_.push_back(DenseLayer::create(head, "mlp2", h, h / 2, rng));
    layers_.push_back(DenseLayer::create(head, "mlp3", h / 2, 2, rng, true));
  } else {
    // Every stage is average-pooled to the bottleneck grid and flattened.
    for (std::size_t i = 0; i < 3; ++i) {
      layers_.push_back(DenseLayer::create(head, "key" + std::to_string(i + 1), w[i] * coarse, h, rng));
      layers_.push_back(DenseLayer::create(head, "value" + std::to_string(i + 1), w[i] * coarse, h, rng));
    }
    layers_.push_back(DenseLayer::create(head, "query", h, 1, rng));
    layers_.push_back(DenseLayer::create(head, "out", h, 2, rng, true));
  }
}

Var Classifier::forward(Tape& tape, const std::vector<Var>& encoder_params, const std::vector<Var>& head_params,
                        Var x) const {
  const Encoder::Features f = encoder.forward(tape, encoder_params, x);
  if (spec_.head == HeadKind::mlp) {
    Var h = ops::relu(layers_[0](head_params, flatten(f.bottleneck)));
    h = ops::relu(layers_[1](head_params, h));
    return layers_[2](head_params, h);
  }
  std::vector<Var> scores, values;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t factor = std::size_t{8} >> i;
    Var pooled = flatten(factor > 1 ? ops::avg_pool3d(f.stages[i], factor) : f.stages[i]);
    Var key = layers_[2 * i](head_params, pooled);
    values.push_back(ops::relu(layers_[2 * i + 1](head_params, pooled)));
    scores.push_back(layers_[6](head_params, key));
  }
  Var weights = ops::softmax(ops::concat(scores, 1));
  Var mix = ops::row_scale(values[0], ops::slice(weights, 1, 0, 1));
  for (std::size_t i = 1; i < 3; ++i) mix = ops::add(mix, ops::row_scale(values[i], ops::slice(weights, 1, i, i + 1)));
  return layers_[7](head_params, mix);
}

Var Classifier::logits(Tape& tape, Var input) const {
  const auto ep = encoder.params.bind(tape, false);
  const auto hp = head.bind(tape, false);
  return forward(tape, ep, hp, input);
}

}  // namespace survxai::models
