#include "mcfnet/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "mcfnet/rng.hpp"
#include "oracles.hpp"

namespace {

using mcf::Batch;
using mcf::BackboneConfig;
using mcf::Error;
using mcf::ErrorCode;
using mcf::ForwardOutputs;
using mcf::LossWeights;
using mcf::McfModel;
using mcf::Tensor;
using mcf::TrainConfig;

// Random inputs in [-1, 1], labels cycling 0,1,2.
Batch random_batch(int b, int s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto rand_tensor = [&] {
    Tensor t = Tensor::zeros({b, 3, s, s});
    for (double& v : t.values()) v = mcf::uniform_range(rng, -1.0, 1.0);
    return t;
  };
  Batch batch;
  batch.rgb = rand_tensor();
  batch.hsv = rand_tensor();
  batch.lab = rand_tensor();
  for (int i = 0; i < b; ++i) {
    batch.labels.push_back(i % 3);
    batch.ids.push_back(static_cast<std::size_t>(i));
  }
  return batch;
}

// Labels are recoverable from the channel means, so a small model can fit it.
Batch separable_batch(int b, int s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Batch batch = random_batch(b, s, seed);
  for (int i = 0; i < b; ++i) {
    const double shift = (batch.labels[i] - 1) * 0.6;
    for (Tensor* t : {&batch.rgb, &batch.hsv, &batch.lab}) {
      const std::size_t per = static_cast<std::size_t>(3) * s * s;
      for (std::size_t j = 0; j < per; ++j) {
        double& v = t->values()[i * per + j];
        v = v * 0.2 + shift;
      }
    }
  }
  (void)rng;
  return batch;
}

void zero_tensor(Tensor t) {
  for (double& v : t.values()) v = 0.0;
}

void set_vector(Tensor t, const std::vector<double>& vals) {
  ASSERT_EQ(t.size(), vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) t.values()[i] = vals[i];
}

std::vector<double> softmax3(double a, double b, double c) {
  const double m = std::max(a, std::max(b, c));
  const double ea = std::exp(a - m), eb = std::exp(b - m), ec = std::exp(c - m);
  const double z = ea + eb + ec;
  return {ea / z, eb / z, ec / z};
}

std::string temp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

TEST(BuildModel, FusionHeadWidthsFollowFeatureDim) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 1);
  EXPECT_EQ(m.feature_w.shape(), (mcf::Shape{48, 3}));
  EXPECT_EQ(m.feature_b.shape(), (mcf::Shape{3}));
  EXPECT_EQ(m.prediction_w.shape(), (mcf::Shape{12, 3}));
  EXPECT_EQ(m.prediction_b.shape(), (mcf::Shape{3}));
  for (int b = 0; b < 3; ++b) {
    ASSERT_EQ(m.branches[b].kernels.size(), 2u);
    EXPECT_EQ(m.branches[b].kernels[0].shape(), (mcf::Shape{8, 3, 3, 3}));
    EXPECT_EQ(m.branches[b].kernels[1].shape(), (mcf::Shape{16, 8, 3, 3}));
    EXPECT_EQ(m.branches[b].head_w.shape(), (mcf::Shape{16, 3}));
  }
}

TEST(BuildModel, SameSeedIsBitIdentical) {
  McfModel a = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 7);
  McfModel b = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 7);
  McfModel c = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 8);
  const auto na = a.named_parameters(), nb = b.named_parameters(), nc = c.named_parameters();
  ASSERT_EQ(na.size(), nb.size());
  bool any_diff_c = false;
  for (std::size_t i = 0; i < na.size(); ++i) {
    EXPECT_EQ(na[i].first, nb[i].first);
    EXPECT_EQ(na[i].second.values(), nb[i].second.values()) << na[i].first;
    if (na[i].second.values() != nc[i].second.values()) any_diff_c = true;
  }
  EXPECT_TRUE(any_diff_c);
}

TEST(BuildModel, ParameterCountIsSmallForTinyBackbone) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 1);
  std::size_t total = 0;
  for (const Tensor& t : m.parameters()) total += t.size();
  // 3 * (8*3*3*3 + 16*8*3*3 + 16*3 + 3) + 48*3 + 3 + 12*3 + 3
  EXPECT_EQ(total, 3u * (216 + 1152 + 48 + 3) + 144 + 3 + 36 + 3);
}

TEST(BuildModel, RejectsInconsistentConfig) {
  BackboneConfig bad = mcf::tiny_backbone();
  bad.feature_dim = 99;
  EXPECT_THROW(
      {
        try {
          mcf::build_model(bad, LossWeights{}, 1);
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::kInvalidConfig);
          throw;
        }
      },
      Error);
  LossWeights negative;
  negative.w_feature = -0.1;
  EXPECT_THROW(mcf::build_model(mcf::tiny_backbone(), negative, 1), Error);
}

TEST(BuildModel, NamedBackbonesResolve) {
  EXPECT_EQ(mcf::backbone_by_name("tiny").feature_dim, 16);
  EXPECT_EQ(mcf::backbone_by_name("resnet18").feature_dim, 512);
  EXPECT_EQ(mcf::backbone_by_name("resnet50").feature_dim, 2048);
  EXPECT_EQ(mcf::backbone_by_name("densenet121").feature_dim, 1024);
  EXPECT_THROW(mcf::backbone_by_name("vgg16"), Error);
  for (const char* name : {"tiny", "resnet18", "resnet50", "densenet121"}) {
    EXPECT_NO_THROW(mcf::backbone_by_name(name).validate());
  }
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

TEST(Forward, FiveHeadsEmitOneLogitRowPerImage) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 3);
  Batch batch = random_batch(2, 16, 99);
  ForwardOutputs out = mcf::forward(m, batch);
  const mcf::Shape want{2, 3};
  EXPECT_EQ(out.rgb.shape(), want);
  EXPECT_EQ(out.hsv.shape(), want);
  EXPECT_EQ(out.lab.shape(), want);
  EXPECT_EQ(out.feature.shape(), want);
  EXPECT_EQ(out.prediction.shape(), want);
}

TEST(Forward, SoftmaxOfFinalLogitsSumsToOne) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 4);
  Batch batch = random_batch(5, 16, 100);
  ForwardOutputs out = mcf::forward(m, batch);
  const std::vector<double> probs = mcf::softmax_rows(out.prediction.values(), 3);
  for (int b = 0; b < 5; ++b) {
    const double sum = probs[b * 3] + probs[b * 3 + 1] + probs[b * 3 + 2];
    EXPECT_NEAR(sum, 1.0, 1e-12);
    for (int k = 0; k < 3; ++k) EXPECT_GT(probs[b * 3 + k], 0.0);
  }
}

TEST(Forward, ZeroedPredictionHeadGivesConstantFinalLogits) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 5);
  zero_tensor(m.prediction_w);
  zero_tensor(m.prediction_b);
  for (std::uint64_t seed : {1u, 2u}) {
    ForwardOutputs out = mcf::forward(m, random_batch(3, 16, seed));
    for (double v : out.prediction.values()) EXPECT_EQ(v, 0.0);
  }
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

TEST(TotalLoss, EqualSubLossesCollapseToThatLoss) {
  // Feed the same logits to all five heads; each cross entropy then equals L
  // and the default weights must sum back to exactly one L.
  Tensor logits({2, 3}, {1.0, -0.5, 0.25, 0.0, 2.0, -1.0});
  ForwardOutputs out{logits, logits, logits, logits, logits};
  mcf::TotalLoss loss = mcf::total_loss(out, {0, 1}, LossWeights{});
  const double l = loss.breakdown.loss_rgb;
  EXPECT_DOUBLE_EQ(loss.breakdown.loss_hsv, l);
  EXPECT_DOUBLE_EQ(loss.breakdown.loss_prediction, l);
  EXPECT_NEAR(loss.breakdown.total, l, 1e-12 * std::abs(l));
  EXPECT_NEAR(loss.total.item(), l, 1e-12 * std::abs(l));
}

TEST(TotalLoss, ZeroWeightsGiveZeroTotalButPopulatedBreakdown) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 6);
  Batch batch = random_batch(4, 16, 7);
  LossWeights zero{0.0, 0.0, 0.0};
  mcf::TotalLoss loss = mcf::total_loss(mcf::forward(m, batch), batch.labels, zero);
  EXPECT_EQ(loss.breakdown.total, 0.0);
  EXPECT_GT(loss.breakdown.loss_rgb, 0.0);
  EXPECT_GT(loss.breakdown.loss_feature, 0.0);
  EXPECT_GT(loss.breakdown.loss_prediction, 0.0);
}

TEST(TotalLoss, AccumulationOrderIsFixedAndReproducible) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 8);
  Batch batch = random_batch(3, 16, 11);
  LossWeights w{0.1, 0.1, 0.6};
  mcf::TotalLoss a = mcf::total_loss(mcf::forward(m, batch), batch.labels, w);
  mcf::TotalLoss b = mcf::total_loss(mcf::forward(m, batch), batch.labels, w);
  EXPECT_EQ(a.breakdown.total, b.breakdown.total);
  // Mirrors the documented fold: branch sum first, then feature, then final.
  const double expect =
      (w.w_branch * ((a.breakdown.loss_rgb + a.breakdown.loss_hsv) + a.breakdown.loss_lab) +
       w.w_feature * a.breakdown.loss_feature) +
      w.w_prediction * a.breakdown.loss_prediction;
  EXPECT_EQ(a.breakdown.total, expect);
}

// ---------------------------------------------------------------------------
// Gradients through the whole network
// ---------------------------------------------------------------------------

TEST(ModelGradients, MatchFiniteDifferencesEndToEnd) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 21);
  Batch batch = random_batch(2, 12, 22);

  mcf::TotalLoss loss = mcf::total_loss(mcf::forward(m, batch), batch.labels, m.weights);
  mcf::backward(loss.total);

  auto eval = [&] {
    return mcf::total_loss(mcf::forward(m, batch), batch.labels, m.weights).total.item();
  };
  for (auto& [name, param] : m.named_parameters()) {
    Tensor p = param;
    const std::vector<double> fd = oracle::fd_gradient(p.values(), eval);
    const double err = oracle::max_rel_err(p.grad(), fd);
    EXPECT_LE(err, 1e-4) << name;
  }
}

TEST(ModelGradients, ZeroFusionWeightsMatchIndependentBranchClassifiers) {
  const LossWeights w{0.1, 0.0, 0.0};
  McfModel fused = mcf::build_model(mcf::tiny_backbone(), w, 31);
  McfModel solo = mcf::build_model(mcf::tiny_backbone(), w, 31);
  Batch batch = random_batch(4, 12, 32);

  mcf::TotalLoss loss = mcf::total_loss(mcf::forward(fused, batch), batch.labels, w);
  mcf::backward(loss.total);

  // Train each branch head as its own classifier; leaf grads accumulate
  // across the three backward calls.
  ForwardOutputs out = mcf::forward(solo, batch);
  mcf::backward(mcf::scale(mcf::softmax_cross_entropy(out.rgb, batch.labels), w.w_branch));
  mcf::backward(mcf::scale(mcf::softmax_cross_entropy(out.hsv, batch.labels), w.w_branch));
  mcf::backward(mcf::scale(mcf::softmax_cross_entropy(out.lab, batch.labels), w.w_branch));

  const auto pf = fused.named_parameters();
  const auto ps = solo.named_parameters();
  for (std::size_t i = 0; i < pf.size(); ++i) {
    if (pf[i].first.rfind("fusion.", 0) == 0) {
      for (double g : pf[i].second.grad()) EXPECT_EQ(g, 0.0) << pf[i].first;
      continue;
    }
    const auto& gf = pf[i].second.grad();
    const auto& gs = ps[i].second.grad();
    ASSERT_EQ(gf.size(), gs.size());
    for (std::size_t j = 0; j < gf.size(); ++j) {
      EXPECT_NEAR(gf[j], gs[j], 1e-12) << pf[i].first << "[" << j << "]";
    }
  }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TEST(TrainStep, ZeroLearningRateLeavesParametersUnchanged) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 41);
  Batch batch = random_batch(4, 12, 42);
  std::vector<std::vector<double>> before;
  for (const Tensor& t : m.parameters()) before.push_back(t.values());

  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  mcf::LossBreakdown bd = mcf::train_step(m, batch, cfg);
  EXPECT_TRUE(std::isfinite(bd.total));
  EXPECT_GT(bd.total, 0.0);

  const auto params = m.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_EQ(params[i].values(), before[i]);
  }
}

TEST(TrainStep, RejectsNegativeLearningRate) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 41);
  Batch batch = random_batch(2, 12, 42);
  TrainConfig cfg;
  cfg.learning_rate = -0.1;
  EXPECT_THROW(
      {
        try {
          mcf::train_step(m, batch, cfg);
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::kInvalidConfig);
          throw;
        }
      },
      Error);
}

TEST(TrainStep, LossDecreasesOnFixedBatch) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 51);
  Batch batch = separable_batch(8, 12, 52);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;

  const double initial = mcf::train_step(m, batch, cfg).total;
  double final_total = initial;
  for (int step = 1; step < 200; ++step) final_total = mcf::train_step(m, batch, cfg).total;
  EXPECT_LT(final_total, initial);
  EXPECT_LT(final_total, 0.9 * initial);  // meaningfully, not just noise
}

TEST(TrainStep, TrajectoriesAreDeterministic) {
  Batch batch = separable_batch(4, 12, 62);
  std::vector<double> run_a, run_b;
  for (std::vector<double>* sink : {&run_a, &run_b}) {
    McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 61);
    TrainConfig cfg;
    for (int step = 0; step < 5; ++step) {
      mcf::LossBreakdown bd = mcf::train_step(m, batch, cfg);
      sink->push_back(bd.loss_rgb);
      sink->push_back(bd.loss_feature);
      sink->push_back(bd.total);
    }
  }
  EXPECT_EQ(run_a, run_b);
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

TEST(Predict, ControlledFinalLogitsGiveExpectedProbabilities) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 71);
  zero_tensor(m.prediction_w);
  set_vector(m.prediction_b, {2.0, 0.0, 0.0});
  Batch batch = random_batch(3, 12, 72);
  mcf::Prediction p = mcf::predict(m, batch);
  const std::vector<double> want = softmax3(2.0, 0.0, 0.0);
  for (int b = 0; b < 3; ++b) {
    EXPECT_EQ(p.grades[b], 0);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(p.probs[b * 3 + k], want[k], 1e-12);
  }
}

TEST(Predict, SharedLogitShiftLeavesPredictionUnchanged) {
  Batch batch = random_batch(2, 12, 73);
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 74);
  zero_tensor(m.prediction_w);

  set_vector(m.prediction_b, {2.0, 0.5, -1.0});
  mcf::Prediction base = mcf::predict(m, batch);
  set_vector(m.prediction_b, {5.0, 3.5, 2.0});  // same logits + 3
  mcf::Prediction shifted = mcf::predict(m, batch);

  EXPECT_EQ(base.grades, shifted.grades);
  for (std::size_t i = 0; i < base.probs.size(); ++i) {
    EXPECT_NEAR(base.probs[i], shifted.probs[i], 1e-12);
  }
}

TEST(Predict, TiesBreakTowardLowerGradeIndex) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 75);
  zero_tensor(m.prediction_w);
  zero_tensor(m.prediction_b);
  Batch batch = random_batch(2, 12, 76);
  mcf::Prediction p = mcf::predict(m, batch);
  for (int b = 0; b < 2; ++b) {
    EXPECT_EQ(p.grades[b], 0);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(p.probs[b * 3 + k], 1.0 / 3.0, 1e-15);
  }
}

TEST(AvgBaseline, IdenticalBranchesMatchSingleBranchArgmax) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 81);
  // Clone the RGB branch into HSV and LAB.
  for (int b = 1; b < 3; ++b) {
    for (std::size_t s = 0; s < m.branches[0].kernels.size(); ++s) {
      m.branches[b].kernels[s].values() = m.branches[0].kernels[s].values();
    }
    m.branches[b].head_w.values() = m.branches[0].head_w.values();
    m.branches[b].head_b.values() = m.branches[0].head_b.values();
  }
  Batch batch = random_batch(4, 12, 82);
  batch.hsv = batch.rgb;  // identical inputs in every branch
  batch.lab = batch.rgb;

  const std::vector<int> avg = mcf::avg_baseline_predict(m, batch);
  ForwardOutputs out = mcf::forward(m, batch);
  for (int b = 0; b < 4; ++b) {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (out.rgb.values()[b * 3 + k] > out.rgb.values()[b * 3 + best]) best = k;
    }
    EXPECT_EQ(avg[b], best);
  }
}

TEST(AvgBaseline, MatchesHandComputedMeanOfBranchProbabilities) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 83);
  // Zero the conv stacks so each branch emits exactly its head bias.
  for (int b = 0; b < 3; ++b) {
    for (Tensor& k : m.branches[b].kernels) zero_tensor(k);
    zero_tensor(m.branches[b].head_w);
  }
  set_vector(m.branches[0].head_b, {2.0, 0.0, 0.0});
  set_vector(m.branches[1].head_b, {0.0, 1.0, 0.0});
  set_vector(m.branches[2].head_b, {0.0, 0.0, 1.0});

  const std::vector<double> pr = softmax3(2.0, 0.0, 0.0);
  const std::vector<double> ph = softmax3(0.0, 1.0, 0.0);
  const std::vector<double> pl = softmax3(0.0, 0.0, 1.0);
  int want = 0;
  std::vector<double> mean(3);
  for (int k = 0; k < 3; ++k) {
    mean[k] = (pr[k] + ph[k] + pl[k]) / 3.0;
    if (mean[k] > mean[want]) want = k;
  }

  Batch batch = random_batch(2, 12, 84);
  const std::vector<int> got = mcf::avg_baseline_predict(m, batch);
  EXPECT_EQ(got, (std::vector<int>{want, want}));
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

TEST(Checkpoint, RoundTripPreservesEveryParameterBit) {
  LossWeights w{0.2, 0.3, 0.5};
  McfModel m = mcf::build_model(mcf::tiny_backbone(), w, 91);
  Batch batch = separable_batch(4, 12, 92);
  TrainConfig cfg;
  for (int i = 0; i < 3; ++i) mcf::train_step(m, batch, cfg);  // make biases nonzero

  const std::string path = temp_file("mcf_roundtrip.ckpt");
  mcf::save_checkpoint(m, path);
  McfModel loaded = mcf::load_checkpoint(path);
  std::remove(path.c_str());

  EXPECT_TRUE(loaded.backbone == m.backbone);
  EXPECT_EQ(loaded.weights.w_branch, w.w_branch);
  EXPECT_EQ(loaded.weights.w_feature, w.w_feature);
  EXPECT_EQ(loaded.weights.w_prediction, w.w_prediction);

  const auto pa = m.named_parameters();
  const auto pb = loaded.named_parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].first, pb[i].first);
    EXPECT_EQ(pa[i].second.values(), pb[i].second.values()) << pa[i].first;
  }

  mcf::Prediction orig = mcf::predict(m, batch);
  mcf::Prediction redo = mcf::predict(loaded, batch);
  EXPECT_EQ(orig.grades, redo.grades);
  EXPECT_EQ(orig.probs, redo.probs);
}

TEST(Checkpoint, SerializationIsByteDeterministic) {
  McfModel a = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 93);
  McfModel b = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 93);
  EXPECT_EQ(mcf::serialize_checkpoint(a), mcf::serialize_checkpoint(b));
  EXPECT_EQ(mcf::serialize_checkpoint(a).substr(0, 4), "MCF1");
}

TEST(Checkpoint, TruncationIsReportedAsCorrupt) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 94);
  const std::string bytes = mcf::serialize_checkpoint(m);
  for (std::size_t keep : {std::size_t{2}, std::size_t{9}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(
        {
          try {
            mcf::deserialize_checkpoint(bytes.substr(0, keep));
          } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::kCorruptCheckpoint) << "keep=" << keep;
            throw;
          }
        },
        Error);
  }
}

TEST(Checkpoint, TrailingBytesAreReportedAsCorrupt) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 94);
  std::string bytes = mcf::serialize_checkpoint(m);
  bytes += "extra";
  EXPECT_THROW(
      {
        try {
          mcf::deserialize_checkpoint(bytes);
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::kCorruptCheckpoint);
          throw;
        }
      },
      Error);
}

TEST(Checkpoint, UnknownVersionByteIsVersionMismatch) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 95);
  std::string bytes = mcf::serialize_checkpoint(m);
  bytes[3] = '2';
  EXPECT_THROW(
      {
        try {
          mcf::deserialize_checkpoint(bytes);
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::kVersionMismatch);
          throw;
        }
      },
      Error);
}

TEST(Checkpoint, ForeignMagicIsCorrupt) {
  EXPECT_THROW(
      {
        try {
          mcf::deserialize_checkpoint("PNG\x89 definitely not a checkpoint");
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::kCorruptCheckpoint);
          throw;
        }
      },
      Error);
}

TEST(Checkpoint, ArchitectureMismatchIsRejectedOnExpectedLoad) {
  McfModel m = mcf::build_model(mcf::tiny_backbone(), LossWeights{}, 96);
  const std::string path = temp_file("mcf_mismatch.ckpt");
  mcf::save_checkpoint(m, path);
  EXPECT_NO_THROW(mcf::load_checkpoint(path, mcf::tiny_backbone()));
  EXPECT_THROW(
      {
        try {
          mcf::load_checkpoint(path, mcf::backbone_by_name("resnet18"));
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::kBackboneMismatch);
          throw;
        }
      },
      Error);
  std::remove(path.c_str());
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_THROW(
      {
        try {
          mcf::load_checkpoint("/nonexistent/dir/model.ckpt");
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::kIoError);
          throw;
        }
      },
      Error);
}

}  // namespace
