#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "radargest/model/model.hpp"
#include "radargest/training/dataset.hpp"

namespace radargest::training {

using model::ModelConfig;
using tensor::ParamStore;

struct EpochLog {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double ce = 0.0;
  double triplet = 0.0;
  double train_accuracy = -1.0;  // -1 when not applicable
  double eval_accuracy = -1.0;
};

using ProgressFn = std::function<void(const EpochLog&)>;

struct Stage1Config {
  int epochs = 40;
  int batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int frame_stride = 1;  // use every frame_stride-th frame of each recording
  int threads = 1;

  void validate() const;
};

struct Stage1Result {
  ParamStore params;  // tnet.*, enc.*, dec.*
  std::vector<EpochLog> curve;
};

// Cross-learning stage: per-frame MSE between decoded radar latents and the
// camera skeleton. Every training recording must carry skeletons.
Stage1Result train_autoencoder(const std::vector<ProcessedRecording>& train, const ModelConfig& mcfg,
                               const Stage1Config& cfg, const ProgressFn& progress = {});

struct Stage2Config {
  int epochs = 40;
  int batch = 16;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  bool freeze_encoder = true;
  double ce_weight = 1.0;
  double triplet_weight = 1.0;
  double margin = 0.2;
  int threads = 1;

  void validate() const;
};

struct Stage2Result {
  ParamStore params;  // tnet.*, enc.*, cls.*
  std::vector<EpochLog> curve;
};

// Classifier stage on top of a stage-1 T-net and encoder (frozen or
// fine-tuned). When `stage1` also holds a full classifier it is used as the
// starting point instead of a fresh one. `eval` (optional) is scored after
// every epoch for the curves.
Stage2Result train_classifier(const std::vector<ProcessedRecording>& train, const ParamStore& stage1,
                              const ModelConfig& mcfg, const Stage2Config& cfg,
                              const std::vector<ProcessedRecording>* eval = nullptr, const ProgressFn& progress = {});

// Same architecture and loss from random initialisation, radar only.
Stage2Result train_baseline(const std::vector<ProcessedRecording>& train, const ModelConfig& mcfg,
                            const Stage2Config& cfg, const std::vector<ProcessedRecording>* eval = nullptr,
                            const ProgressFn& progress = {});

// Class-balanced batch order for one epoch: classes are interleaved so every
// batch of at least 2 * classes recordings holds at least 2 of each class.
// A final batch with no same-class pair is merged into the one before it.
std::vector<std::vector<std::size_t>> balanced_batches(const std::vector<int>& labels, int batch, Rng& rng);

// Per-frame stacked inputs.
tensor::Tensor recording_clouds(const ProcessedRecording& rec, const ModelConfig& mcfg);

// Latents [sequence x latent] of one recording without recording gradients.
tensor::Tensor encode_recording(const ParamStore& params, const ModelConfig& mcfg, const ProcessedRecording& rec);

struct Stage2Loss {
  double total = 0.0;
  double ce = 0.0;
  double triplet = 0.0;
};

// Stage-2 loss of a batch of latent sequences [B x sequence x latent].
Stage2Loss stage2_loss(const ParamStore& params, const ModelConfig& mcfg, const tensor::Tensor& latents,
                       const std::vector<std::uint32_t>& labels, const Stage2Config& cfg);

// Mean per-frame reconstruction MSE over recordings that carry skeletons.
double reconstruction_mse(const ParamStore& params, const ModelConfig& mcfg,
                          const std::vector<ProcessedRecording>& recordings, int frame_stride, int threads);

struct EvalReport {
  double accuracy = 0.0;
  std::array<std::array<int, model::kClasses>, model::kClasses> confusion{};  // rows = truth
  std::vector<int> labels;
  std::vector<int> predictions;
  std::vector<std::string> ids;
};

std::vector<int> predict(const ParamStore& params, const ModelConfig& mcfg,
                         const std::vector<ProcessedRecording>& recordings, int threads);
EvalReport evaluate(const ParamStore& params, const ModelConfig& mcfg,
                    const std::vector<ProcessedRecording>& recordings, int threads);
EvalReport report_from_predictions(const std::vector<int>& labels, const std::vector<int>& predictions);

// Artifacts.
std::string confusion_csv(const EvalReport& report);
std::string curves_csv(const std::vector<EpochLog>& curve);

struct RunCurve {
  std::string name;
  std::vector<EpochLog> curve;
};

// epoch, <name>_train, <name>_test per run; shorter runs repeat their last row.
std::string compare_csv(const std::vector<RunCurve>& runs);

}  // namespace radargest::training
