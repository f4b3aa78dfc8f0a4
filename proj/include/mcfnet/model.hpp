#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mcfnet/autodiff.hpp"
#include "mcfnet/dataset.hpp"
#include "mcfnet/errors.hpp"

// The fusion classifier: three color-space branches (conv stack -> global
// average pool -> linear head), a feature-level fusion head over the
// concatenated pooled features, and a prediction-level fusion head over the
// four concatenated logit vectors. Training optimizes the weighted sum of
// all five cross-entropy losses, so every branch receives gradient from its
// own head and from both fusion paths.

namespace mcf {

struct BackboneStage {
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
};

struct BackboneConfig {
  std::vector<BackboneStage> stages;
  int feature_dim = 0;
  std::string name;

  void validate() const {
    if (stages.empty()) throw Error(ErrorCode::kInvalidConfig, "backbone needs at least one stage");
    for (const BackboneStage& s : stages) {
      if (s.out_channels < 1 || s.kernel < 1 || s.stride < 1) {
        throw Error(ErrorCode::kInvalidConfig, "backbone stage fields must be positive");
      }
    }
    if (feature_dim != stages.back().out_channels) {
      throw Error(ErrorCode::kInvalidConfig,
                  "feature_dim " + std::to_string(feature_dim) + " != last stage channels " +
                      std::to_string(stages.back().out_channels));
    }
    if (name.empty()) throw Error(ErrorCode::kInvalidConfig, "backbone needs a name");
  }

  bool operator==(const BackboneConfig& o) const {
    if (name != o.name || feature_dim != o.feature_dim || stages.size() != o.stages.size()) return false;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      if (stages[i].out_channels != o.stages[i].out_channels || stages[i].kernel != o.stages[i].kernel ||
          stages[i].stride != o.stages[i].stride) {
        return false;
      }
    }
    return true;
  }
};

// Desk-scale default: two stride-2 stages, 16 feature channels.
inline BackboneConfig tiny_backbone() {
  return BackboneConfig{{{8, 3, 2}, {16, 3, 2}}, 16, "tiny"};
}

// Stage-width silhouettes of the published backbones. Full-scale training
// of these is out of scope; they exist so checkpoints and configs can name
// them.
inline BackboneConfig backbone_by_name(const std::string& name) {
  if (name == "tiny") return tiny_backbone();
  if (name == "resnet18") {
    return BackboneConfig{
        {{64, 7, 2}, {64, 3, 2}, {128, 3, 2}, {256, 3, 2}, {512, 3, 2}}, 512, "resnet18"};
  }
  if (name == "resnet50") {
    return BackboneConfig{
        {{64, 7, 2}, {256, 3, 2}, {512, 3, 2}, {1024, 3, 2}, {2048, 3, 2}}, 2048, "resnet50"};
  }
  if (name == "densenet121") {
    return BackboneConfig{
        {{64, 7, 2}, {256, 3, 2}, {512, 3, 2}, {1024, 3, 2}, {1024, 3, 2}}, 1024, "densenet121"};
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown backbone `" + name + "`");
}

struct LossWeights {
  double w_branch = 0.1;      // applied to each of the three branch losses
  double w_feature = 0.1;
  double w_prediction = 0.6;

  void validate() const {
    if (w_branch < 0.0 || w_feature < 0.0 || w_prediction < 0.0) {
      throw Error(ErrorCode::kInvalidConfig, "loss weights must be nonnegative");
    }
  }
};

struct TrainConfig {
  double learning_rate = 0.01;
  int batch_size = 8;
  int epochs = 10;
  std::uint64_t seed = 42;

  void validate() const {
    if (learning_rate < 0.0) throw Error(ErrorCode::kInvalidConfig, "learning_rate must be nonnegative");
    if (batch_size < 1) throw Error(ErrorCode::kInvalidConfig, "batch_size must be positive");
    if (epochs < 0) throw Error(ErrorCode::kInvalidConfig, "epochs must be nonnegative");
  }
};

struct Branch {
  std::vector<Tensor> kernels;  // one [F x C x k x k] per stage
  Tensor head_w;                // [feature_dim x 3]
  Tensor head_b;                // [3]
};

struct McfModel {
  BackboneConfig backbone;
  LossWeights weights;
  std::array<Branch, 3> branches;  // fixed order: RGB, HSV, LAB
  Tensor feature_w;                // [3*feature_dim x 3]
  Tensor feature_b;                // [3]
  Tensor prediction_w;             // [12 x 3]
  Tensor prediction_b;             // [3]

  static constexpr const char* kBranchNames[3] = {"rgb", "hsv", "lab"};

  // Fixed parameter order; checkpoints and the optimizer both rely on it.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (int b = 0; b < 3; ++b) {
      for (std::size_t s = 0; s < branches[b].kernels.size(); ++s) {
        out.emplace_back(std::string(kBranchNames[b]) + ".stage" + std::to_string(s) + ".kernel",
                         branches[b].kernels[s]);
      }
      out.emplace_back(std::string(kBranchNames[b]) + ".head.weight", branches[b].head_w);
      out.emplace_back(std::string(kBranchNames[b]) + ".head.bias", branches[b].head_b);
    }
    out.emplace_back("fusion.feature.weight", feature_w);
    out.emplace_back("fusion.feature.bias", feature_b);
    out.emplace_back("fusion.prediction.weight", prediction_w);
    out.emplace_back("fusion.prediction.bias", prediction_b);
    return out;
  }

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

inline McfModel build_model(const BackboneConfig& backbone, const LossWeights& weights,
                            std::uint64_t seed) {
  backbone.validate();
  weights.validate();
  McfModel m;
  m.backbone = backbone;
  m.weights = weights;
  std::mt19937_64 rng(seed);

  for (int b = 0; b < 3; ++b) {
    int in_ch = 3;
    for (const BackboneStage& s : backbone.stages) {
      const std::size_t fan_in = static_cast<std::size_t>(in_ch) * s.kernel * s.kernel;
      const std::size_t fan_out = static_cast<std::size_t>(s.out_channels) * s.kernel * s.kernel;
      m.branches[b].kernels.push_back(
          glorot_uniform({s.out_channels, in_ch, s.kernel, s.kernel}, fan_in, fan_out, rng));
      in_ch = s.out_channels;
    }
    m.branches[b].head_w = glorot_uniform({backbone.feature_dim, 3},
                                          static_cast<std::size_t>(backbone.feature_dim), 3, rng);
    m.branches[b].head_b = Tensor::zeros({3}, /*requires_grad=*/true);
  }
  m.feature_w = glorot_uniform({3 * backbone.feature_dim, 3},
                               static_cast<std::size_t>(3) * backbone.feature_dim, 3, rng);
  m.feature_b = Tensor::zeros({3}, true);
  m.prediction_w = glorot_uniform({12, 3}, 12, 3, rng);
  m.prediction_b = Tensor::zeros({3}, true);
  return m;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

struct ForwardOutputs {
  Tensor rgb;         // each [B x 3]
  Tensor hsv;
  Tensor lab;
  Tensor feature;     // feature-level fusion logits
  Tensor prediction;  // prediction-level fusion logits (the final output)
};

inline ForwardOutputs forward(const McfModel& model, const Batch& batch) {
  std::array<Tensor, 3> pooled;
  std::array<Tensor, 3> logits;
  const std::array<const Tensor*, 3> inputs = {&batch.rgb, &batch.hsv, &batch.lab};
  for (int b = 0; b < 3; ++b) {
    Tensor x = *inputs[b];
    for (std::size_t s = 0; s < model.backbone.stages.size(); ++s) {
      x = relu(conv2d(x, model.branches[b].kernels[s], model.backbone.stages[s].stride));
    }
    pooled[b] = global_avg_pool(x);
    logits[b] = dense(pooled[b], model.branches[b].head_w, model.branches[b].head_b);
  }
  ForwardOutputs out;
  out.rgb = logits[0];
  out.hsv = logits[1];
  out.lab = logits[2];
  out.feature = dense(concat_last_axis({pooled[0], pooled[1], pooled[2]}), model.feature_w,
                      model.feature_b);
  // fixed concatenation order: RGB, HSV, LAB, feature-level
  out.prediction = dense(concat_last_axis({out.rgb, out.hsv, out.lab, out.feature}),
                         model.prediction_w, model.prediction_b);
  return out;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

struct LossBreakdown {
  double loss_rgb = 0.0;
  double loss_hsv = 0.0;
  double loss_lab = 0.0;
  double loss_feature = 0.0;
  double loss_prediction = 0.0;
  double total = 0.0;
};

struct TotalLoss {
  LossBreakdown breakdown;
  Tensor total;  // scalar graph node; backward() distributes to all heads
};

// total = w_branch*(L_rgb + L_hsv + L_lab) + w_feature*L_F + w_pred*L_P,
// folded in this exact order on every call.
inline TotalLoss total_loss(const ForwardOutputs& out, const std::vector<int>& labels,
                            const LossWeights& weights) {
  weights.validate();
  Tensor l_rgb = softmax_cross_entropy(out.rgb, labels);
  Tensor l_hsv = softmax_cross_entropy(out.hsv, labels);
  Tensor l_lab = softmax_cross_entropy(out.lab, labels);
  Tensor l_feat = softmax_cross_entropy(out.feature, labels);
  Tensor l_pred = softmax_cross_entropy(out.prediction, labels);

  Tensor total = add(add(scale(add(add(l_rgb, l_hsv), l_lab), weights.w_branch),
                         scale(l_feat, weights.w_feature)),
                     scale(l_pred, weights.w_prediction));

  TotalLoss result;
  result.breakdown = {l_rgb.item(), l_hsv.item(), l_lab.item(),
                      l_feat.item(), l_pred.item(), total.item()};
  result.total = std::move(total);
  return result;
}

// ---------------------------------------------------------------------------
// Training and inference
// ---------------------------------------------------------------------------

// forward -> weighted loss -> backward -> SGD. Returns the pre-step losses.
inline LossBreakdown train_step(McfModel& model, const Batch& batch, const TrainConfig& cfg) {
  cfg.validate();
  TotalLoss loss = total_loss(forward(model, batch), batch.labels, model.weights);
  backward(loss.total);
  std::vector<Tensor> params = model.parameters();
  sgd_step(params, SgdConfig{cfg.learning_rate, cfg.seed});
  return loss.breakdown;
}

struct Prediction {
  std::vector<int> grades;       // argmax, ties broken toward the lower index
  std::vector<double> probs;     // B x 3 row-major softmax of the final logits
};

namespace detail {

inline std::vector<int> argmax_rows(const std::vector<double>& rows, int classes) {
  std::vector<int> out;
  out.reserve(rows.size() / classes);
  for (std::size_t b = 0; b < rows.size() / static_cast<std::size_t>(classes); ++b) {
    int best = 0;
    for (int k = 1; k < classes; ++k) {
      if (rows[b * classes + k] > rows[b * classes + best]) best = k;
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace detail

inline Prediction predict(const McfModel& model, const Batch& batch) {
  ForwardOutputs out = forward(model, batch);
  Prediction p;
  p.probs = softmax_rows(out.prediction.values(), 3);
  p.grades = detail::argmax_rows(p.probs, 3);
  return p;
}

// Mean of the three branch softmax vectors, skipping both fusion heads.
inline std::vector<int> avg_baseline_predict(const McfModel& model, const Batch& batch) {
  ForwardOutputs out = forward(model, batch);
  const std::vector<double> pr = softmax_rows(out.rgb.values(), 3);
  const std::vector<double> ph = softmax_rows(out.hsv.values(), 3);
  const std::vector<double> pl = softmax_rows(out.lab.values(), 3);
  std::vector<double> mean(pr.size());
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] = (pr[i] + ph[i] + pl[i]) / 3.0;
  return detail::argmax_rows(mean, 3);
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

inline void put_f64(std::string& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, sizeof(v));
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

struct CheckpointReader {
  const std::string& data;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > data.size()) {
      throw Error(ErrorCode::kCorruptCheckpoint, "checkpoint truncated at byte " + std::to_string(pos));
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 8;
    double d;
    std::memcpy(&d, &v, sizeof(d));
    return d;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 16)) throw Error(ErrorCode::kCorruptCheckpoint, "implausible string length");
    need(n);
    std::string s = data.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace detail

inline constexpr char kCheckpointMagic[4] = {'M', 'C', 'F', '1'};

inline std::string serialize_checkpoint(const McfModel& model) {
  std::string out(kCheckpointMagic, 4);
  detail::put_u32(out, static_cast<std::uint32_t>(model.backbone.name.size()));
  out += model.backbone.name;
  detail::put_u32(out, static_cast<std::uint32_t>(model.backbone.stages.size()));
  for (const BackboneStage& s : model.backbone.stages) {
    detail::put_u32(out, static_cast<std::uint32_t>(s.out_channels));
    detail::put_u32(out, static_cast<std::uint32_t>(s.kernel));
    detail::put_u32(out, static_cast<std::uint32_t>(s.stride));
  }
  detail::put_u32(out, static_cast<std::uint32_t>(model.backbone.feature_dim));
  detail::put_f64(out, model.weights.w_branch);
  detail::put_f64(out, model.weights.w_feature);
  detail::put_f64(out, model.weights.w_prediction);

  const auto named = model.named_parameters();
  detail::put_u32(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_u32(out, static_cast<std::uint32_t>(t.shape().size()));
    for (int d : t.shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.values()) detail::put_f64(out, v);
  }
  return out;
}

inline void save_checkpoint(const McfModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write checkpoint " + path);
  const std::string bytes = serialize_checkpoint(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "short write to " + path);
}

inline McfModel deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 3, "MCF", 3) != 0) {
    throw Error(ErrorCode::kCorruptCheckpoint, "not a model checkpoint (bad magic)");
  }
  if (bytes[3] != '1') {
    throw Error(ErrorCode::kVersionMismatch,
                std::string("unsupported checkpoint version `") + bytes[3] + "`");
  }
  detail::CheckpointReader r{bytes, 4};

  BackboneConfig backbone;
  backbone.name = r.str();
  const std::uint32_t n_stages = r.u32();
  if (n_stages == 0 || n_stages > 64) {
    throw Error(ErrorCode::kCorruptCheckpoint, "implausible stage count");
  }
  for (std::uint32_t i = 0; i < n_stages; ++i) {
    BackboneStage s;
    s.out_channels = static_cast<int>(r.u32());
    s.kernel = static_cast<int>(r.u32());
    s.stride = static_cast<int>(r.u32());
    backbone.stages.push_back(s);
  }
  backbone.feature_dim = static_cast<int>(r.u32());
  LossWeights weights;
  weights.w_branch = r.f64();
  weights.w_feature = r.f64();
  weights.w_prediction = r.f64();
  try {
    backbone.validate();
    weights.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kCorruptCheckpoint, std::string("invalid stored config: ") + e.message());
  }

  McfModel model = build_model(backbone, weights, /*seed=*/0);
  const auto named = model.named_parameters();
  const std::uint32_t n_tensors = r.u32();
  if (n_tensors != named.size()) {
    throw Error(ErrorCode::kCorruptCheckpoint,
                "expected " + std::to_string(named.size()) + " tensors, found " +
                    std::to_string(n_tensors));
  }
  for (const auto& [name, t] : named) {
    if (r.str() != name) throw Error(ErrorCode::kCorruptCheckpoint, "tensor order mismatch at " + name);
    const std::uint32_t ndims = r.u32();
    Shape shape;
    for (std::uint32_t i = 0; i < ndims; ++i) shape.push_back(static_cast<int>(r.u32()));
    if (shape != t.shape()) {
      throw Error(ErrorCode::kCorruptCheckpoint, "shape mismatch for tensor " + name);
    }
    Tensor dst = t;
    for (double& v : dst.values()) v = r.f64();
  }
  if (r.pos != bytes.size()) {
    throw Error(ErrorCode::kCorruptCheckpoint,
                std::to_string(bytes.size() - r.pos) + " trailing bytes");
  }
  return model;
}

inline McfModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open checkpoint " + path);
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_checkpoint(bytes);
}

// Load and insist on a particular architecture (the eval/predict flows know
// which backbone their config selected).
inline McfModel load_checkpoint(const std::string& path, const BackboneConfig& expected) {
  McfModel model = load_checkpoint(path);
  if (!(model.backbone == expected)) {
    throw Error(ErrorCode::kBackboneMismatch,
                "checkpoint holds `" + model.backbone.name + "`, expected `" + expected.name + "`");
  }
  return model;
}

}  // namespace mcf
