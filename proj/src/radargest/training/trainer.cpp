#include "radargest/training/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <memory>
#include <numeric>
#include <sstream>

#include "radargest/common/alloc.hpp"
#include "radargest/common/error.hpp"
#include "radargest/common/parallel.hpp"
#include "radargest/tensor/optim.hpp"

namespace radargest::training {

using namespace radargest::tensor;
using model::Trainable;

namespace {

constexpr std::uint64_t kStage1Tag = 0x7331ULL;
constexpr std::uint64_t kStage2Tag = 0x7332ULL;
// Frames per gradient chunk in stage 1 and recordings per inference chunk.
// Fixed sizes keep results independent of the worker count.
constexpr std::size_t kFrameChunk = 8;
constexpr std::size_t kEvalChunk = 16;

std::vector<int> valid_counts(const ProcessedRecording& rec, std::size_t first, std::size_t count) {
  std::vector<int> v;
  for (std::size_t t = first; t < first + count; ++t) v.push_back(rec.clouds[t].valid_count);
  return v;
}

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.cols(); ++c) {
    if (logits.at(row, c) > logits.at(row, best)) best = c;
  }
  return best;
}

void check_sequence(const ProcessedRecording& rec, const ModelConfig& mcfg) {
  if (rec.clouds.size() != mcfg.sequence) {
    throw Error(ErrorCode::kShape, "recording " + rec.id + " has " + std::to_string(rec.clouds.size()) +
                                       " frames, the classifier needs " + std::to_string(mcfg.sequence));
  }
}

Tensor stack_latents(const std::vector<Tensor>& cache, const std::vector<std::size_t>& idx, const ModelConfig& mcfg) {
  const std::size_t per = mcfg.sequence * mcfg.latent;
  Tensor out({idx.size(), mcfg.sequence, mcfg.latent});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy(cache[idx[i]].data(), cache[idx[i]].data() + per, out.data() + i * per);
  }
  return out;
}

std::vector<Tensor> encode_all(const ParamStore& params, const ModelConfig& mcfg,
                               const std::vector<ProcessedRecording>& recs, int threads) {
  std::vector<Tensor> out(recs.size());
  parallel_for(recs.size(), threads, [&](std::size_t i) { out[i] = encode_recording(params, mcfg, recs[i]); });
  return out;
}

// Logits for cached latents, in fixed chunks.
std::vector<int> predict_cached(const ParamStore& params, const ModelConfig& mcfg, const std::vector<Tensor>& cache,
                                int threads) {
  const std::size_t chunks = (cache.size() + kEvalChunk - 1) / kEvalChunk;
  std::vector<int> pred(cache.size());
  parallel_for(chunks, threads, [&](std::size_t c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = c * kEvalChunk; i < std::min(cache.size(), (c + 1) * kEvalChunk); ++i) idx.push_back(i);
    Tape tape;
    Trainable none{false, false, false, false};
    auto out = model::classify_sequence(tape, params, mcfg, tape.constant(stack_latents(cache, idx, mcfg)), none);
    for (std::size_t i = 0; i < idx.size(); ++i) pred[idx[i]] = static_cast<int>(argmax_row(out.logits.value(), i));
  });
  return pred;
}

double accuracy_of(const std::vector<int>& pred, const std::vector<ProcessedRecording>& recs) {
  if (recs.empty()) return -1.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < recs.size(); ++i) ok += pred[i] == static_cast<int>(recs[i].label);
  return static_cast<double>(ok) / static_cast<double>(recs.size());
}

Stage2Result run_stage2(const std::vector<ProcessedRecording>& train, ParamStore params, const ModelConfig& mcfg,
                        const Stage2Config& cfg, const std::vector<ProcessedRecording>* eval,
                        const ProgressFn& progress) {
  tune_allocator();
  require(!train.empty(), "stage 2 needs training recordings");
  std::vector<int> labels;
  for (const auto& r : train) {
    check_sequence(r, mcfg);
    labels.push_back(static_cast<int>(r.label));
  }
  if (eval) {
    for (const auto& r : *eval) check_sequence(r, mcfg);
  }
  const bool freeze = cfg.freeze_encoder;
  const std::vector<std::string> trainable =
      model::names_with_prefixes(params, freeze ? model::kClassifierPrefixes
                                                : std::vector<std::string>{"tnet.", "enc.", "cls."});
  AdamState state = make_adam(params, trainable, {cfg.lr});
  const Trainable head_flags{false, false, false, true};
  const Trainable encoder_flags{!freeze, !freeze, false, false};

  std::vector<Tensor> train_cache;
  std::vector<Tensor> eval_cache;
  if (freeze) {
    train_cache = encode_all(params, mcfg, train, cfg.threads);
    if (eval) eval_cache = encode_all(params, mcfg, *eval, cfg.threads);
  }

  Stage2Result result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(cfg.seed, {kStage2Tag, static_cast<std::uint64_t>(epoch)});
    const auto batches = balanced_batches(labels, cfg.batch, rng);
    double loss_sum = 0.0, ce_sum = 0.0, tr_sum = 0.0;
    std::size_t seen = 0, correct = 0;
    for (const auto& idx : batches) {
      const std::size_t b = idx.size();
      std::vector<std::uint32_t> lbl(b);
      for (std::size_t i = 0; i < b; ++i) lbl[i] = static_cast<std::uint32_t>(labels[idx[i]]);

      std::vector<std::unique_ptr<Tape>> tapes;
      std::vector<Var> latent_vars;
      Tensor latents;
      if (freeze) {
        latents = stack_latents(train_cache, idx, mcfg);
      } else {
        tapes.resize(b);
        latent_vars.resize(b);
        latents = Tensor({b, mcfg.sequence, mcfg.latent});
        const std::size_t per = mcfg.sequence * mcfg.latent;
        parallel_for(b, cfg.threads, [&](std::size_t i) {
          const auto& rec = train[idx[i]];
          tapes[i] = std::make_unique<Tape>();
          const auto valid = valid_counts(rec, 0, rec.clouds.size());
          latent_vars[i] = model::encode(*tapes[i], params, mcfg, tapes[i]->constant(recording_clouds(rec, mcfg)),
                                         &valid, encoder_flags);
          std::copy(latent_vars[i].value().data(), latent_vars[i].value().data() + per, latents.data() + i * per);
        });
      }

      Tape head;
      Var input = freeze ? head.constant(latents) : head.variable(latents);
      auto out = model::classify_sequence(head, params, mcfg, input, head_flags);
      Var ce = cross_entropy_loss(out.logits, lbl);
      Var tr = batch_hard_triplet_loss(out.embedding, lbl, cfg.margin);
      Var total = add(scale(ce, cfg.ce_weight), scale(tr, cfg.triplet_weight));
      ParamStore grads = params.zeros_like();
      head.backward(total, &grads);

      if (!freeze) {
        const Tensor upstream = head.grad(input);
        const std::size_t per = mcfg.sequence * mcfg.latent;
        std::vector<ParamStore> sample_grads(b);
        parallel_for(b, cfg.threads, [&](std::size_t i) {
          sample_grads[i] = params.zeros_like();
          Tensor g({mcfg.sequence, mcfg.latent},
                   std::vector<double>(upstream.data() + i * per, upstream.data() + (i + 1) * per));
          const Tape::Seed seed{latent_vars[i], std::move(g)};
          tapes[i]->backward(std::span<const Tape::Seed>(&seed, 1), &sample_grads[i]);
          tapes[i].reset();
        });
        for (const auto& g : sample_grads) grads.accumulate(g);
      }
      adam_step(params, grads, state);

      loss_sum += total.value().item() * static_cast<double>(b);
      ce_sum += ce.value().item() * static_cast<double>(b);
      tr_sum += tr.value().item() * static_cast<double>(b);
      for (std::size_t i = 0; i < b; ++i) correct += argmax_row(out.logits.value(), i) == lbl[i];
      seen += b;
    }
    EpochLog log;
    log.epoch = epoch;
    log.loss = loss_sum / static_cast<double>(seen);
    log.ce = ce_sum / static_cast<double>(seen);
    log.triplet = tr_sum / static_cast<double>(seen);
    log.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    if (eval && !eval->empty()) {
      const auto pred = freeze ? predict_cached(params, mcfg, eval_cache, cfg.threads)
                               : predict(params, mcfg, *eval, cfg.threads);
      log.eval_accuracy = accuracy_of(pred, *eval);
    }
    result.curve.push_back(log);
    if (progress) progress(log);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace

void Stage1Config::validate() const {
  require(epochs >= 1, "epochs must be at least 1");
  require(batch >= 1, "batch size must be at least 1");
  require(lr > 0.0, "learning rate must be positive");
  require(frame_stride >= 1, "frame stride must be at least 1");
  require(threads >= 1, "threads must be at least 1");
}

void Stage2Config::validate() const {
  require(epochs >= 1, "epochs must be at least 1");
  require(batch >= 4, "stage-2 batch size must be at least 4 for triplet mining");
  require(lr > 0.0, "learning rate must be positive");
  require(ce_weight >= 0.0 && triplet_weight >= 0.0, "loss weights must be non-negative");
  require(margin >= 0.0, "triplet margin must be non-negative");
  require(threads >= 1, "threads must be at least 1");
}

Tensor recording_clouds(const ProcessedRecording& rec, const ModelConfig& mcfg) {
  return model::normalize_clouds(rec.clouds, mcfg);
}

Tensor encode_recording(const ParamStore& params, const ModelConfig& mcfg, const ProcessedRecording& rec) {
  check_sequence(rec, mcfg);
  Tape tape;
  const auto valid = valid_counts(rec, 0, rec.clouds.size());
  Var l = model::encode(tape, params, mcfg, tape.constant(recording_clouds(rec, mcfg)), &valid,
                        Trainable{false, false, false, false});
  return l.value().reshaped({mcfg.sequence, mcfg.latent});
}

Stage1Result train_autoencoder(const std::vector<ProcessedRecording>& train, const ModelConfig& mcfg,
                               const Stage1Config& cfg, const ProgressFn& progress) {
  tune_allocator();
  cfg.validate();
  mcfg.validate();
  require(!train.empty(), "stage 1 needs training recordings");
  struct Sample {
    std::size_t rec;
    std::size_t frame;
  };
  std::vector<Sample> samples;
  for (std::size_t r = 0; r < train.size(); ++r) {
    const auto& rec = train[r];
    if (rec.skeletons.empty()) {
      fail(ErrorCode::kInvalidArgument,
           "recording " + rec.id + " has no skeletons; cross-learning needs the camera modality at train time");
    }
    if (rec.skeletons.size() != rec.clouds.size()) {
      fail(ErrorCode::kFormat, "recording " + rec.id + ": skeleton and point-cloud frame counts differ");
    }
    for (std::size_t t = 0; t < rec.clouds.size(); t += static_cast<std::size_t>(cfg.frame_stride)) {
      samples.push_back({r, t});
    }
  }

  ParamStore params = model::init_params(mcfg, cfg.seed, model::kPartTNet | model::kPartEncoder | model::kPartDecoder);
  AdamState state = make_adam(params, params.names(), {cfg.lr});
  std::vector<std::size_t> order(samples.size());

  Stage1Result result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(cfg.seed, {kStage1Tag, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), rng.engine());
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t b = std::min(static_cast<std::size_t>(cfg.batch), order.size() - start);
      const std::size_t chunks = (b + kFrameChunk - 1) / kFrameChunk;
      std::vector<ParamStore> grads(chunks);
      std::vector<double> losses(chunks);
      parallel_for(chunks, cfg.threads, [&](std::size_t c) {
        const std::size_t first = start + c * kFrameChunk;
        const std::size_t m = std::min(kFrameChunk, start + b - first);
        Tensor clouds({m * mcfg.cloud_size, mcfg.features});
        Tensor targets({m, model::kJoints, 3});
        std::vector<int> valid(m);
        for (std::size_t i = 0; i < m; ++i) {
          const Sample& s = samples[order[first + i]];
          const auto& rec = train[s.rec];
          const Tensor one = model::normalize_cloud(rec.clouds[s.frame], mcfg);
          std::copy(one.data(), one.data() + one.size(), clouds.data() + i * one.size());
          for (std::size_t j = 0; j < model::kJoints; ++j) {
            for (int k = 0; k < 3; ++k) targets.data()[(i * model::kJoints + j) * 3 + k] = rec.skeletons[s.frame].joints[j][k];
          }
          valid[i] = rec.clouds[s.frame].valid_count;
        }
        Tape tape;
        auto out = model::forward_autoencoder(tape, params, mcfg, tape.constant(clouds), tape.constant(targets), &valid);
        grads[c] = params.zeros_like();
        tape.backward(scale(out.mse, static_cast<double>(m) / static_cast<double>(b)), &grads[c]);
        losses[c] = out.mse.value().item() * static_cast<double>(m);
      });
      for (std::size_t c = 1; c < chunks; ++c) grads[0].accumulate(grads[c]);
      adam_step(params, grads[0], state);
      for (double l : losses) loss_sum += l;
    }
    EpochLog log;
    log.epoch = epoch;
    log.loss = loss_sum / static_cast<double>(samples.size());
    result.curve.push_back(log);
    if (progress) progress(log);
  }
  result.params = std::move(params);
  return result;
}

Stage2Result train_classifier(const std::vector<ProcessedRecording>& train, const ParamStore& stage1,
                              const ModelConfig& mcfg, const Stage2Config& cfg,
                              const std::vector<ProcessedRecording>* eval, const ProgressFn& progress) {
  cfg.validate();
  mcfg.validate();
  const ParamStore reference = model::init_params(mcfg, 0, model::kPartTNet | model::kPartEncoder);
  std::vector<std::string> missing;
  for (const auto& name : reference.names()) {
    if (!stage1.contains(name)) {
      missing.push_back(name);
    } else if (stage1.get(name).shape() != reference.get(name).shape()) {
      throw Error(ErrorCode::kShape, "stage-1 parameter '" + name + "' has shape " +
                                         shape_string(stage1.get(name).shape()) + ", expected " +
                                         shape_string(reference.get(name).shape()));
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    fail(ErrorCode::kInvalidArgument, "stage-1 checkpoint is missing parameters: " + list);
  }
  ParamStore params;
  for (const auto& name : reference.names()) params.add(name, stage1.get(name));
  // A checkpoint that already carries a classifier warm-starts it.
  const ParamStore fresh = model::init_params(mcfg, cfg.seed, model::kPartClassifier);
  bool warm = true;
  for (const auto& name : fresh.names()) {
    warm = warm && stage1.contains(name) && stage1.get(name).shape() == fresh.get(name).shape();
  }
  for (const auto& name : fresh.names()) params.add(name, warm ? stage1.get(name) : fresh.get(name));
  return run_stage2(train, std::move(params), mcfg, cfg, eval, progress);
}

Stage2Result train_baseline(const std::vector<ProcessedRecording>& train, const ModelConfig& mcfg,
                            const Stage2Config& cfg, const std::vector<ProcessedRecording>* eval,
                            const ProgressFn& progress) {
  cfg.validate();
  mcfg.validate();
  require(!cfg.freeze_encoder, "the uni-modal baseline trains its encoder; freezing it is not meaningful");
  ParamStore params =
      model::init_params(mcfg, cfg.seed, model::kPartTNet | model::kPartEncoder | model::kPartClassifier);
  return run_stage2(train, std::move(params), mcfg, cfg, eval, progress);
}

std::vector<std::vector<std::size_t>> balanced_batches(const std::vector<int>& labels, int batch, Rng& rng) {
  require(batch >= 1, "batch size must be at least 1");
  int classes = 0;
  for (int l : labels) classes = std::max(classes, l + 1);
  std::vector<std::vector<std::size_t>> per_class(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) per_class[static_cast<std::size_t>(labels[i])].push_back(i);
  for (auto& v : per_class) std::shuffle(v.begin(), v.end(), rng.engine());
  std::vector<std::size_t> class_order(per_class.size());
  std::iota(class_order.begin(), class_order.end(), 0);
  std::shuffle(class_order.begin(), class_order.end(), rng.engine());

  std::vector<std::size_t> sequence;
  sequence.reserve(labels.size());
  for (std::size_t round = 0; sequence.size() < labels.size(); ++round) {
    for (std::size_t c : class_order) {
      if (round < per_class[c].size()) sequence.push_back(per_class[c][round]);
    }
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < sequence.size(); s += static_cast<std::size_t>(batch)) {
    out.emplace_back(sequence.begin() + static_cast<std::ptrdiff_t>(s),
                     sequence.begin() + static_cast<std::ptrdiff_t>(std::min(sequence.size(), s + batch)));
  }
  // A tail batch without any same-class pair cannot form a triplet; it joins
  // the batch before it.
  if (out.size() >= 2) {
    std::vector<int> seen(per_class.size(), 0);
    bool has_pair = false;
    for (std::size_t i : out.back()) has_pair = has_pair || ++seen[static_cast<std::size_t>(labels[i])] == 2;
    if (!has_pair) {
      auto& prev = out[out.size() - 2];
      prev.insert(prev.end(), out.back().begin(), out.back().end());
      out.pop_back();
    }
  }
  return out;
}

Stage2Loss stage2_loss(const ParamStore& params, const ModelConfig& mcfg, const Tensor& latents,
                       const std::vector<std::uint32_t>& labels, const Stage2Config& cfg) {
  Tape tape;
  auto out = model::classify_sequence(tape, params, mcfg, tape.constant(latents), Trainable{false, false, false, false});
  Var ce = cross_entropy_loss(out.logits, labels);
  Var tr = batch_hard_triplet_loss(out.embedding, labels, cfg.margin);
  Var total = add(scale(ce, cfg.ce_weight), scale(tr, cfg.triplet_weight));
  return {total.value().item(), ce.value().item(), tr.value().item()};
}

double reconstruction_mse(const ParamStore& params, const ModelConfig& mcfg,
                          const std::vector<ProcessedRecording>& recordings, int frame_stride, int threads) {
  require(frame_stride >= 1, "frame stride must be at least 1");
  std::vector<double> sums(recordings.size(), 0.0);
  std::vector<std::size_t> counts(recordings.size(), 0);
  parallel_for(recordings.size(), threads, [&](std::size_t r) {
    const auto& rec = recordings[r];
    if (rec.skeletons.empty()) fail(ErrorCode::kInvalidArgument, "recording " + rec.id + " has no skeletons");
    std::vector<std::size_t> frames;
    for (std::size_t t = 0; t < rec.clouds.size(); t += static_cast<std::size_t>(frame_stride)) frames.push_back(t);
    for (std::size_t s = 0; s < frames.size(); s += kFrameChunk) {
      const std::size_t m = std::min(kFrameChunk, frames.size() - s);
      std::vector<dsp::RadarPointCloud> clouds;
      std::vector<int> valid;
      Tensor targets({m, model::kJoints, 3});
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t t = frames[s + i];
        clouds.push_back(rec.clouds[t]);
        valid.push_back(rec.clouds[t].valid_count);
        for (std::size_t j = 0; j < model::kJoints; ++j) {
          for (int k = 0; k < 3; ++k) targets.data()[(i * model::kJoints + j) * 3 + k] = rec.skeletons[t].joints[j][k];
        }
      }
      Tape tape;
      auto out = model::forward_autoencoder(tape, params, mcfg, tape.constant(model::normalize_clouds(clouds, mcfg)),
                                            tape.constant(targets), &valid, Trainable{false, false, false, false});
      sums[r] += out.mse.value().item() * static_cast<double>(m);
      counts[r] += m;
    }
  });
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < recordings.size(); ++r) {
    total += sums[r];
    n += counts[r];
  }
  require(n > 0, "no frames to evaluate");
  return total / static_cast<double>(n);
}

std::vector<int> predict(const ParamStore& params, const ModelConfig& mcfg,
                         const std::vector<ProcessedRecording>& recordings, int threads) {
  return predict_cached(params, mcfg, encode_all(params, mcfg, recordings, threads), threads);
}

EvalReport report_from_predictions(const std::vector<int>& labels, const std::vector<int>& predictions) {
  require(labels.size() == predictions.size(), "labels and predictions differ in length");
  EvalReport r;
  r.labels = labels;
  r.predictions = predictions;
  int hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < static_cast<int>(model::kClasses) && predictions[i] >= 0 &&
                predictions[i] < static_cast<int>(model::kClasses),
            "class index out of range");
    ++r.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
    hits += labels[i] == predictions[i];
  }
  r.accuracy = labels.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(labels.size());
  return r;
}

EvalReport evaluate(const ParamStore& params, const ModelConfig& mcfg,
                    const std::vector<ProcessedRecording>& recordings, int threads) {
  std::vector<int> labels;
  for (const auto& r : recordings) labels.push_back(static_cast<int>(r.label));
  EvalReport report = report_from_predictions(labels, predict(params, mcfg, recordings, threads));
  for (const auto& r : recordings) report.ids.push_back(r.id);
  return report;
}

std::string confusion_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "truth\\predicted";
  for (std::size_t c = 0; c < model::kClasses; ++c) os << ',' << scene::gesture_name(scene::gesture_from_code(static_cast<int>(c)));
  os << '\n';
  for (std::size_t r = 0; r < model::kClasses; ++r) {
    os << scene::gesture_name(scene::gesture_from_code(static_cast<int>(r)));
    for (std::size_t c = 0; c < model::kClasses; ++c) os << ',' << report.confusion[r][c];
    os << '\n';
  }
  return os.str();
}

namespace {

std::string num(double v) {
  if (v < 0.0) return "";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::string curves_csv(const std::vector<EpochLog>& curve) {
  std::ostringstream os;
  os << "epoch,loss,ce,triplet,train_accuracy,eval_accuracy\n";
  for (const auto& e : curve) {
    os << e.epoch << ',' << num(e.loss) << ',' << num(e.ce) << ',' << num(e.triplet) << ',' << num(e.train_accuracy) << ','
       << num(e.eval_accuracy) << '\n';
  }
  return os.str();
}

std::string compare_csv(const std::vector<RunCurve>& runs) {
  require(runs.size() >= 2, "compare needs at least two runs");
  std::size_t rows = 0;
  for (const auto& r : runs) rows = std::max(rows, r.curve.size());
  std::ostringstream os;
  os << "epoch";
  for (const auto& r : runs) os << ',' << r.name << "_train," << r.name << "_test";
  os << '\n';
  for (std::size_t e = 0; e < rows; ++e) {
    os << e + 1;
    for (const auto& r : runs) {
      if (r.curve.empty()) {
        os << ",,";
        continue;
      }
      const EpochLog& log = r.curve[std::min(e, r.curve.size() - 1)];
      os << ',' << num(log.train_accuracy) << ',' << num(log.eval_accuracy);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace radargest::training
