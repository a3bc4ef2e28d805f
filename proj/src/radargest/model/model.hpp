#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "radargest/gnn/gnn.hpp"
#include "radargest/radar_dsp/radar_dsp.hpp"

namespace radargest::model {

using tensor::ParamStore;
using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

inline constexpr std::size_t kLatentDim = 136;
inline constexpr std::size_t kJoints = 17;
inline constexpr std::size_t kSequence = 30;
inline constexpr std::size_t kClasses = 5;

struct ModelConfig {
  std::size_t cloud_size = dsp::kCloudSize;
  std::size_t features = dsp::kPointFeatures;
  std::size_t k = gnn::kNeighbors;
  std::size_t tnet_width = 32;
  std::vector<std::size_t> encoder_widths = {64, 64, 128};
  std::size_t latent = kLatentDim;
  std::size_t pseudo_point_features = 8;  // latent = joints x this
  std::vector<std::size_t> decoder_widths = {64, 64};
  std::size_t lstm_units = 64;
  std::size_t embedding = 64;
  std::size_t classes = kClasses;
  std::size_t sequence = kSequence;
  // Exclude padded points from the k-NN graphs.
  bool mask_padding = false;

  // Input scaling; skeleton outputs are produced in units of xyz_scale.
  double xyz_scale = 3.0;
  double doppler_scale = 5.0;

  void validate() const;
};

// Parameter groups.
inline const std::vector<std::string> kTNetPrefix = {"tnet."};
inline const std::vector<std::string> kEncoderPrefixes = {"tnet.", "enc."};
inline const std::vector<std::string> kDecoderPrefixes = {"dec."};
inline const std::vector<std::string> kClassifierPrefixes = {"cls."};

enum Part : unsigned { kPartTNet = 1, kPartEncoder = 2, kPartDecoder = 4, kPartClassifier = 8 };

// Parameters of the selected parts. Each part draws from its own stream of
// `seed`, so a part's initial values do not depend on which others exist.
ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed, unsigned parts);

std::vector<std::string> names_with_prefixes(const ParamStore& params, const std::vector<std::string>& prefixes);

// [cloud_size x 5]: xyz / xyz_scale, Doppler / doppler_scale, intensity / frame maximum.
Tensor normalize_cloud(const dsp::RadarPointCloud& cloud, const ModelConfig& cfg);
// Stacked clouds, [clouds*cloud_size x 5].
Tensor normalize_clouds(std::span<const dsp::RadarPointCloud> clouds, const ModelConfig& cfg);

struct Trainable {
  bool tnet = true;
  bool encoder = true;
  bool decoder = true;
  bool classifier = true;
};

// [clouds*cloud_size x 5] -> [clouds x latent]. `valid` holds one valid count
// per cloud and is used only when cfg.mask_padding is set.
Var encode(Tape& tape, const ParamStore& params, const ModelConfig& cfg, Var clouds,
           const std::vector<int>* valid = nullptr, const Trainable& trainable = {});

// [B x latent] -> [B x 17 x 3] in metres.
Var decode(Tape& tape, const ParamStore& params, const ModelConfig& cfg, Var latents,
           const Trainable& trainable = {});

struct ClassifierOutput {
  Var logits;     // [B x classes]
  Var embedding;  // [B x embedding]
};

// [B x sequence x latent] -> logits and embedding.
ClassifierOutput classify_sequence(Tape& tape, const ParamStore& params, const ModelConfig& cfg, Var latents,
                                   const Trainable& trainable = {});

struct AutoencoderOutput {
  Var reconstruction;  // [B x 17 x 3]
  Var mse;
};

AutoencoderOutput forward_autoencoder(Tape& tape, const ParamStore& params, const ModelConfig& cfg, Var clouds,
                                      Var targets, const std::vector<int>* valid = nullptr,
                                      const Trainable& trainable = {});

// [B*sequence*cloud_size x 5] (recording-major, then frame) -> classifier output.
ClassifierOutput forward_full(Tape& tape, const ParamStore& params, const ModelConfig& cfg, Var clouds,
                              const std::vector<int>* valid = nullptr, const Trainable& trainable = {});

}  // namespace radargest::model
