#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "survxai/models/nn.hpp"
#include "survxai/tensor/model.hpp"

namespace survxai::models {

struct AutoencoderSpec {
  std::array<std::size_t, 3> input_dims{32, 32, 32};  // D, H, W; each divisible by 8
  std::array<std::size_t, 3> widths{8, 16, 32};
  std::size_t kernel = 3;

  void validate() const;
  std::uint64_t hash() const;
  Shape sample_shape() const { return {1, input_dims[0], input_dims[1], input_dims[2]}; }
};

// Three conv + relu + max-pool blocks. The post-relu activation of block i is
// registered on the tape as "s<i>".
class Encoder {
 public:
  struct Features {
    std::array<Var, 3> stages;
    Var bottleneck;  // pooled output of the last block
  };

  Encoder() = default;
  Encoder(const AutoencoderSpec& spec, std::mt19937_64& rng);

  Features forward(Tape& tape, const std::vector<Var>& params, Var x) const;

  ParamStore params;

 private:
  std::array<Conv3dLayer, 3> blocks_{};
};

// Encoder plus mirrored decoder: upsample, concat with the matching encoder
// stage, conv + relu; a linear 1x1x1 conv maps back to one channel.
class Autoencoder {
 public:
  Autoencoder() = default;
  Autoencoder(AutoencoderSpec spec, std::uint64_t seed);

  Var forward(Tape& tape, const std::vector<Var>& encoder_params, const std::vector<Var>& decoder_params,
              Var x) const;
  // Inference on a batch [N, 1, D, H, W].
  Tensor reconstruct(const Tensor& batch) const;

  const AutoencoderSpec& spec() const noexcept { return spec_; }

  Encoder encoder;
  ParamStore decoder;

 private:
  AutoencoderSpec spec_;
  std::array<Conv3dLayer, 3> blocks_{};
  Conv3dLayer out_;
};

enum class HeadKind { mlp, attention };

std::string to_string(HeadKind h);
HeadKind parse_head(const std::string& s);

struct ClassifierSpec {
  AutoencoderSpec encoder;
  HeadKind head = HeadKind::mlp;
  std::size_t hidden = 32;

  void validate() const;
  std::uint64_t hash() const;
};

// Encoder + head emitting two logits (index 1 = shorter-term survival).
//   mlp:       flatten(bottleneck) -> hidden -> hidden/2 -> 2
//   attention: per-stage pooled features -> keys/values; a learned query scores
//              each stage, softmax weights pool the values -> 2
class Classifier : public tensor::DifferentiableModel {
 public:
  Classifier() = default;
  Classifier(ClassifierSpec spec, std::uint64_t seed);

  Var forward(Tape& tape, const std::vector<Var>& encoder_params, const std::vector<Var>& head_params,
              Var x) const;

  Var logits(Tape& tape, Var input) const override;
  Shape sample_shape() const override { return spec_.encoder.sample_shape(); }
  std::size_t num_classes() const override { return 2; }

  const ClassifierSpec& spec() const noexcept { return spec_; }

  Encoder encoder;
  ParamStore head;

 private:
  ClassifierSpec spec_;
  std::vector<DenseLayer> layers_;
};

}  // namespace survxai::models
