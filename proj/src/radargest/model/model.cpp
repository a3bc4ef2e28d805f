#include "radargest/model/model.hpp"

#include <algorithm>
#include <cmath>

#include "radargest/common/error.hpp"
#include "radargest/common/rng.hpp"

namespace radargest::model {

using namespace radargest::tensor;
using gnn::EdgeConvSpec;
using gnn::KnnGraph;

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974ULL;

gnn::TNetSpec tnet_spec(const ModelConfig& cfg) { return {"tnet", cfg.features, cfg.tnet_width, cfg.k}; }

std::vector<EdgeConvSpec> encoder_specs(const ModelConfig& cfg) {
  std::vector<EdgeConvSpec> specs;
  std::size_t in = cfg.features;
  for (std::size_t i = 0; i < cfg.encoder_widths.size(); ++i) {
    specs.push_back({"enc.ec" + std::to_string(i), in, {cfg.encoder_widths[i]}});
    in = cfg.encoder_widths[i];
  }
  return specs;
}

std::size_t encoder_concat_width(const ModelConfig& cfg) {
  std::size_t w = 0;
  for (auto v : cfg.encoder_widths) w += v;
  return w;
}

std::vector<EdgeConvSpec> decoder_specs(const ModelConfig& cfg) {
  std::vector<EdgeConvSpec> specs;
  std::size_t in = cfg.pseudo_point_features;
  for (std::size_t i = 0; i < cfg.decoder_widths.size(); ++i) {
    specs.push_back({"dec.ec" + std::to_string(i), in, {cfg.decoder_widths[i]}});
    in = cfg.decoder_widths[i];
  }
  return specs;
}

std::string lstm_name(std::size_t layer, bool forward) {
  return "cls.l" + std::to_string(layer) + (forward ? ".fwd" : ".bwd");
}

void init_lstm(ParamStore& params, const std::string& name, std::size_t in, std::size_t units, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(units));
  Tensor w_ih({in, 4 * units});
  Tensor w_hh({units, 4 * units});
  for (auto& v : w_ih.storage()) v = rng.uniform(-bound, bound);
  for (auto& v : w_hh.storage()) v = rng.uniform(-bound, bound);
  Tensor b({4 * units});
  for (std::size_t i = units; i < 2 * units; ++i) b[i] = 1.0;  // forget gate
  params.add(name + ".W_ih", std::move(w_ih));
  params.add(name + ".W_hh", std::move(w_hh));
  params.add(name + ".b", std::move(b));
}

// Runs one direction over time-major input [T*B x D] and returns h_t for
// t = 0..T-1 in time order.
std::vector<Var> run_lstm(Tape& tape, const ParamStore& params, const std::string& name, Var input, std::size_t steps,
                          std::size_t batch, std::size_t units, bool forward, bool trainable) {
  Var proj = add(matmul(input, tape.param(params, name + ".W_ih", trainable)),
                 tape.param(params, name + ".b", trainable));
  Var w_hh = tape.param(params, name + ".W_hh", trainable);
  std::vector<Var> hs(steps);
  Var h{};
  Var c{};
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = forward ? s : steps - 1 - s;
    Var z = slice(proj, 0, t * batch, (t + 1) * batch);
    if (s > 0) z = add(z, matmul(h, w_hh));
    Var i = sigmoid(slice(z, 1, 0, units));
    Var f = sigmoid(slice(z, 1, units, 2 * units));
    Var g = tanh(slice(z, 1, 2 * units, 3 * units));
    Var o = sigmoid(slice(z, 1, 3 * units, 4 * units));
    c = s > 0 ? add(mul(f, c), mul(i, g)) : mul(i, g);
    h = mul(o, tanh(c));
    hs[t] = h;
  }
  return hs;
}

}  // namespace

void ModelConfig::validate() const {
  require(cloud_size > k && k >= 1, "model: need 1 <= k < cloud size");
  require(features >= 3, "model: points need at least the three spatial features");
  require(!encoder_widths.empty() && !decoder_widths.empty(), "model: encoder and decoder need blocks");
  require(latent == kJoints * pseudo_point_features, "model: latent must factor as 17 pseudo-points");
  require(kJoints > k, "model: decoder graph needs more pseudo-points than neighbours");
  require(lstm_units > 0 && embedding > 0 && classes >= 2 && sequence >= 1, "model: bad classifier sizes");
  require(xyz_scale > 0 && doppler_scale > 0, "model: scales must be positive");
}

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed, unsigned parts) {
  cfg.validate();
  ParamStore p;
  if (parts & kPartTNet) {
    Rng rng(seed, {kInitTag, 1});
    gnn::init_tnet(p, tnet_spec(cfg), rng);
  }
  if (parts & kPartEncoder) {
    Rng rng(seed, {kInitTag, 2});
    for (const auto& s : encoder_specs(cfg)) gnn::init_edge_conv(p, s, rng);
    gnn::init_dense(p, "enc.fc", encoder_concat_width(cfg), cfg.latent, rng);
  }
  if (parts & kPartDecoder) {
    Rng rng(seed, {kInitTag, 3});
    for (const auto& s : decoder_specs(cfg)) gnn::init_edge_conv(p, s, rng);
    gnn::init_dense(p, "dec.fc", kJoints * cfg.decoder_widths.back(), kJoints * 3, rng);
  }
  if (parts & kPartClassifier) {
    Rng rng(seed, {kInitTag, 4});
    std::size_t in = cfg.latent;
    for (std::size_t layer = 0; layer < 2; ++layer) {
      init_lstm(p, lstm_name(layer, true), in, cfg.lstm_units, rng);
      init_lstm(p, lstm_name(layer, false), in, cfg.lstm_units, rng);
      in = 2 * cfg.lstm_units;
    }
    gnn::init_dense(p, "cls.fc", 2 * cfg.lstm_units, cfg.embedding, rng);
    gnn::init_dense(p, "cls.out", cfg.embedding, cfg.classes, rng);
  }
  return p;
}

std::vector<std::string> names_with_prefixes(const ParamStore& params, const std::vector<std::string>& prefixes) {
  std::vector<std::string> out;
  for (const auto& n : params.names()) {
    if (has_prefix(n, prefixes)) out.push_back(n);
  }
  return out;
}

Tensor normalize_cloud(const dsp::RadarPointCloud& cloud, const ModelConfig& cfg) {
  if (cloud.points.size() != cfg.cloud_size) {
    throw Error(ErrorCode::kShape, "point cloud has " + std::to_string(cloud.points.size()) + " points, model expects " +
                                       std::to_string(cfg.cloud_size));
  }
  double peak = 0.0;
  for (const auto& p : cloud.points) peak = std::max(peak, p.intensity);
  Tensor t({cfg.cloud_size, dsp::kPointFeatures});
  for (std::size_t i = 0; i < cfg.cloud_size; ++i) {
    const auto& p = cloud.points[i];
    t.at(i, 0) = p.x / cfg.xyz_scale;
    t.at(i, 1) = p.y / cfg.xyz_scale;
    t.at(i, 2) = p.z / cfg.xyz_scale;
    t.at(i, 3) = p.d / cfg.doppler_scale;
    t.at(i, 4) = peak > 0.0 ? p.intensity / peak : 0.0;
  }
  return t;
}

Tensor normalize_clouds(std::span<const dsp::RadarPointCloud> clouds, const ModelConfig& cfg) {
  Tensor out({clouds.size() * cfg.cloud_size, dsp::kPointFeatures});
  for (std::size_t c = 0; c < clouds.size(); ++c) {
    const Tensor one = normalize_cloud(clouds[c], cfg);
    std::copy(one.data(), one.data() + one.size(), out.data() + c * one.size());
  }
  return out;
}

Var encode(Tape& tape, const ParamStore& params, const ModelConfig& cfg, Var clouds, const std::vector<int>* valid,
           const Trainable& trainable) {
  const Shape& s = clouds.shape();
  if (s.size() != 2 || s[1] != cfg.features || s[0] == 0 || s[0] % cfg.cloud_size != 0) {
    throw Error(ErrorCode::kShape, "encode expects [clouds*" + std::to_string(cfg.cloud_size) + " x " +
                                       std::to_string(cfg.features) + "], got " + shape_string(s));
  }
  const std::size_t n_clouds = s[0] / cfg.cloud_size;
  const std::vector<int>* mask = cfg.mask_padding ? valid : nullptr;
  if (cfg.mask_padding && (valid == nullptr || valid->size() != n_clouds)) {
    fail(ErrorCode::kInvalidArgument, "encode: padding mask needs one valid count per cloud");
  }
  Var x = gnn::input_transform(tape, params, tnet_spec(cfg), clouds, cfg.cloud_size, trainable.tnet, mask).points;
  std::vector<Var> scales;
  for (const auto& spec : encoder_specs(cfg)) {
    const KnnGraph graph = gnn::knn_graph(x.value(), cfg.k, cfg.cloud_size, mask);
    x = gnn::edge_conv(tape, params, spec, x, graph, trainable.encoder);
    scales.push_back(x);
  }
  Var joined = concat(scales, 1);
  Var pooled = reduce_max(reshape(joined, {n_clouds, cfg.cloud_size, encoder_concat_width(cfg)}), 1);
  return gnn::dense(tape, params, "enc.fc", pooled, trainable.encoder);
}

Var decode(Tape& tape, const ParamStore& params, const ModelConfig& cfg, Var latents, const Trainable& trainable) {
  const Shape& s = latents.shape();
  if (s.size() != 2 || s[1] != cfg.latent) {
    throw Error(ErrorCode::kShape, "decode expects [B x " + std::to_string(cfg.latent) + "], got " + shape_string(s));
  }
  const std::size_t batch = s[0];
  Var x = reshape(latents, {batch * kJoints, cfg.pseudo_point_features});
  for (const auto& spec : decoder_specs(cfg)) {
    const KnnGraph graph = gnn::knn_graph(x.value(), cfg.k, kJoints);
    x = gnn::edge_conv(tape, params, spec, x, graph, trainable.decoder);
  }
  Var flat = reshape(x, {batch, kJoints * cfg.decoder_widths.back()});
  Var out = scale(gnn::dense(tape, params, "dec.fc", flat, trainable.decoder), cfg.xyz_scale);
  return reshape(out, {batch, kJoints, 3});
}

ClassifierOutput classify_sequence(Tape& tape, const ParamStore& params, const ModelConfig& cfg, Var latents,
                                   const Trainable& trainable) {
  const Shape& s = latents.shape();
  if (s.size() != 3 || s[1] != cfg.sequence || s[2] != cfg.latent) {
    throw Error(ErrorCode::kShape, "classify_sequence expects [B x " + std::to_string(cfg.sequence) + " x " +
                                       std::to_string(cfg.latent) + "], got " + shape_string(s));
  }
  const std::size_t batch = s[0];
  const std::size_t steps = cfg.sequence;
  const std::size_t units = cfg.lstm_units;
  std::vector<std::uint32_t> time_major(batch * steps);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) time_major[t * batch + b] = static_cast<std::uint32_t>(b * steps + t);
  }
  Var input = gather_rows(reshape(latents, {batch * steps, cfg.latent}), time_major);
  std::vector<Var> fwd;
  std::vector<Var> bwd;
  for (std::size_t layer = 0; layer < 2; ++layer) {
    fwd = run_lstm(tape, params, lstm_name(layer, true), input, steps, batch, units, true, trainable.classifier);
    bwd = run_lstm(tape, params, lstm_name(layer, false), input, steps, batch, units, false, trainable.classifier);
    if (layer == 0) {
      std::vector<Var> rows;
      rows.reserve(steps);
      for (std::size_t t = 0; t < steps; ++t) rows.push_back(concat({fwd[t], bwd[t]}, 1));
      input = concat(rows, 0);
    }
  }
  Var last = concat({fwd[steps - 1], bwd[0]}, 1);
  Var embedding = leaky_relu(gnn::dense(tape, params, "cls.fc", last, trainable.classifier), gnn::kLeakySlope);
  Var logits = gnn::dense(tape, params, "cls.out", embedding, trainable.classifier);
  return {logits, embedding};
}

AutoencoderOutput forward_autoencoder(Tape& tape, const ParamStore& params, const ModelConfig& cfg, Var clouds,
                                      Var targets, const std::vector<int>* valid, const Trainable& trainable) {
  Var recon = decode(tape, params, cfg, encode(tape, params, cfg, clouds, valid, trainable), trainable);
  return {recon, mse_loss(recon, targets)};
}

ClassifierOutput forward_full(Tape& tape, const ParamStore& params, const ModelConfig& cfg, Var clouds,
                              const std::vector<int>* valid, const Trainable& trainable) {
  const Shape& s = clouds.shape();
  const std::size_t per_recording = cfg.sequence * cfg.cloud_size;
  if (s.size() != 2 || s[0] == 0 || s[0] % per_recording != 0) {
    throw Error(ErrorCode::kShape, "forward_full expects [B*" + std::to_string(cfg.sequence) + "*" +
                                       std::to_string(cfg.cloud_size) + " x " + std::to_string(cfg.features) +
                                       "], got " + shape_string(s));
  }
  const std::size_t batch = s[0] / per_recording;
  Var latents = encode(tape, params, cfg, clouds, valid, trainable);
  return classify_sequence(tape, params, cfg, reshape(latents, {batch, cfg.sequence, cfg.latent}), trainable);
}

}  // namespace radargest::model
