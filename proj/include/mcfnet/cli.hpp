#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mcfnet/config.hpp"
#include "mcfnet/dataset.hpp"
#include "mcfnet/errors.hpp"
#include "mcfnet/metrics.hpp"
#include "mcfnet/model.hpp"
#include "mcfnet/preprocess.hpp"

// Command-line front end: train / eval / predict / stats / convert. Every
// failure surfaces as one `ERROR <code>: <message>` line on the error stream
// and a stable nonzero exit status; identical configs and seeds produce
// byte-identical artifacts.

namespace mcf {

inline constexpr const char* kTrainCsvHeader =
    "epoch,loss_rgb,loss_hsv,loss_lab,loss_feature,loss_prediction,loss_total";
inline constexpr const char* kPredictCsvHeader = "image,grade,p_good,p_usable,p_reject";

namespace detail {

inline const char* kUsageText =
    "usage: mcfnet <train|eval|predict|stats|convert> [--config FILE] [--key value ...]";

inline std::string resolved_image_root(const RunConfig& cfg) {
  if (!cfg.image_root.empty()) return cfg.image_root;
  return std::filesystem::path(cfg.manifest).parent_path().string();
}

inline std::string resolved_checkpoint(const RunConfig& cfg) {
  if (!cfg.checkpoint.empty()) return cfg.checkpoint;
  return (std::filesystem::path(cfg.out_dir) / "model.ckpt").string();
}

inline void require_manifest(const RunConfig& cfg, const std::string& cmd) {
  if (cfg.manifest.empty()) {
    throw Error(ErrorCode::kMissingRequired, cmd + " requires `manifest`");
  }
}

inline void require_checkpoint(const RunConfig& cfg, const std::string& cmd) {
  if (cfg.checkpoint.empty()) {
    throw Error(ErrorCode::kMissingRequired, cmd + " requires `checkpoint`");
  }
}

inline std::string loss_csv_row(int epoch, const LossBreakdown& bd) {
  char line[256];
  std::snprintf(line, sizeof(line), "%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g", epoch, bd.loss_rgb,
                bd.loss_hsv, bd.loss_lab, bd.loss_feature, bd.loss_prediction, bd.total);
  return line;
}

inline void cmd_train(const RunConfig& cfg, std::ostream& out) {
  require_manifest(cfg, "train");
  const std::vector<ManifestRecord> records = load_manifest(cfg.manifest);
  if (records.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "manifest has no records: " + cfg.manifest);
  }
  TrainConfig tc = cfg.train_config();
  tc.validate();
  McfModel model = build_model(backbone_by_name(cfg.backbone), cfg.loss_weights(), cfg.seed);

  PreprocessConfig pre;
  pre.out_size = cfg.image_size;
  AugmentConfig aug;  // aug.seed stays 0 so all randomness flows from cfg.seed
  BatchIterator iter(records, cfg.batch_size, cfg.seed, DatasetMode::kTrain, pre, aug,
                     resolved_image_root(cfg));

  std::filesystem::create_directories(cfg.out_dir);
  const std::string csv_path = (std::filesystem::path(cfg.out_dir) / "losses.csv").string();
  std::ofstream csv(csv_path);
  if (!csv) throw Error(ErrorCode::kIoError, "cannot write " + csv_path);
  csv << kTrainCsvHeader << "\n";

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    iter.start_epoch(epoch - 1);
    LossBreakdown sum;
    int steps = 0;
    while (std::optional<Batch> batch = iter.next()) {
      const LossBreakdown bd = train_step(model, *batch, tc);
      sum.loss_rgb += bd.loss_rgb;
      sum.loss_hsv += bd.loss_hsv;
      sum.loss_lab += bd.loss_lab;
      sum.loss_feature += bd.loss_feature;
      sum.loss_prediction += bd.loss_prediction;
      sum.total += bd.total;
      ++steps;
    }
    const double n = steps;
    const LossBreakdown mean{sum.loss_rgb / n,     sum.loss_hsv / n,        sum.loss_lab / n,
                             sum.loss_feature / n, sum.loss_prediction / n, sum.total / n};
    const std::string row = loss_csv_row(epoch, mean);
    csv << row << "\n";
    out << row << "\n";
  }
  if (!csv) throw Error(ErrorCode::kIoError, "short write to " + csv_path);

  const std::string ckpt_path = resolved_checkpoint(cfg);
  save_checkpoint(model, ckpt_path);
  out << "wrote " << csv_path << "\n";
  out << "wrote " << ckpt_path << "\n";
}

// Shared by eval and predict: run the frozen model over the manifest in
// order and return per-record predicted grades.
inline std::vector<int> predict_all(const McfModel& model, const RunConfig& cfg,
                                    const std::vector<ManifestRecord>& records,
                                    std::vector<double>* probs_out = nullptr) {
  PreprocessConfig pre;
  pre.out_size = cfg.image_size;
  BatchIterator iter(records, cfg.batch_size, cfg.seed, DatasetMode::kEval, pre, AugmentConfig{},
                     resolved_image_root(cfg));
  std::vector<int> grades;
  while (std::optional<Batch> batch = iter.next()) {
    const Prediction p = predict(model, *batch);
    grades.insert(grades.end(), p.grades.begin(), p.grades.end());
    if (probs_out) probs_out->insert(probs_out->end(), p.probs.begin(), p.probs.end());
  }
  return grades;
}

inline void cmd_eval(const RunConfig& cfg, std::ostream& out) {
  require_manifest(cfg, "eval");
  require_checkpoint(cfg, "eval");
  const std::vector<ManifestRecord> records = load_manifest(cfg.manifest);
  const McfModel model = load_checkpoint(cfg.checkpoint, backbone_by_name(cfg.backbone));

  const std::vector<int> pred = predict_all(model, cfg, records);
  std::vector<int> truth;
  truth.reserve(records.size());
  for (const ManifestRecord& r : records) truth.push_back(static_cast<int>(r.quality));

  const MetricReport report = metric_report(confusion_matrix(truth, pred));
  out << format_metric_report(report);

  std::vector<int> strata;
  std::vector<bool> correct;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].has_dr()) continue;
    strata.push_back(records[i].dr_grade);
    correct.push_back(truth[i] == pred[i]);
  }
  if (!strata.empty()) {
    out << "\n" << format_stratified_accuracy(stratified_accuracy(strata, correct), "dr");
  }

  std::filesystem::create_directories(cfg.out_dir);
  const std::string csv_path = (std::filesystem::path(cfg.out_dir) / "metrics.csv").string();
  std::ofstream csv(csv_path);
  if (!csv) throw Error(ErrorCode::kIoError, "cannot write " + csv_path);
  csv << metric_report_csv(report);
  if (!csv) throw Error(ErrorCode::kIoError, "short write to " + csv_path);
  out << "wrote " << csv_path << "\n";
}

inline void cmd_predict(const RunConfig& cfg, std::ostream& out) {
  require_manifest(cfg, "predict");
  require_checkpoint(cfg, "predict");
  const std::vector<ManifestRecord> records = load_manifest(cfg.manifest);
  const McfModel model = load_checkpoint(cfg.checkpoint, backbone_by_name(cfg.backbone));

  std::vector<double> probs;
  const std::vector<int> grades = predict_all(model, cfg, records, &probs);

  out << kPredictCsvHeader << "\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    char line[128];
    std::snprintf(line, sizeof(line), ",%s,%.6f,%.6f,%.6f",
                  to_string(static_cast<QualityGrade>(grades[i])), probs[i * 3], probs[i * 3 + 1],
                  probs[i * 3 + 2]);
    out << records[i].path << line << "\n";
  }
}

inline void cmd_stats(const RunConfig& cfg, std::ostream& out) {
  require_manifest(cfg, "stats");
  out << format_grade_table(grade_statistics(load_manifest(cfg.manifest)));
}

inline void cmd_convert(const RunConfig& cfg, std::ostream& out) {
  if (cfg.image.empty()) throw Error(ErrorCode::kMissingRequired, "convert requires `image`");
  const ImageBuffer img = load_image(cfg.image);
  PreprocessConfig pre;
  pre.out_size = cfg.image_size;
  const Circle circle = detect_retina_circle(img, pre);
  const ImageBuffer cropped = crop_and_resize(img, circle, pre.out_size);

  std::filesystem::create_directories(cfg.out_dir);
  const std::string stem = std::filesystem::path(cfg.image).stem().string();
  auto emit = [&](const ImageBuffer& buf, const char* tag) {
    const std::string path =
        (std::filesystem::path(cfg.out_dir) / (stem + "_" + tag + ".ppm")).string();
    write_ppm(buf, path);
    out << "wrote " << path << "\n";
  };
  emit(cropped, "rgb");
  emit(scale_channels_unit(rgb_to_hsv(cropped)), "hsv");
  emit(scale_channels_unit(rgb_to_lab(cropped)), "lab");
}

}  // namespace detail

inline int run_command(const std::vector<std::string>& args, std::ostream& out,
                       std::ostream& err) {
  try {
    if (args.empty()) throw Error(ErrorCode::kUsage, detail::kUsageText);
    const std::string cmd = args[0];
    const bool known = cmd == "train" || cmd == "eval" || cmd == "predict" || cmd == "stats" ||
                       cmd == "convert";
    if (!known) {
      throw Error(ErrorCode::kUsage, "unknown command `" + cmd + "`; " + detail::kUsageText);
    }

    RunConfig cfg;
    for (std::size_t i = 1; i < args.size(); ++i) {
      const std::string& tok = args[i];
      if (tok.rfind("--", 0) != 0) {
        throw Error(ErrorCode::kUsage, "unexpected argument `" + tok + "`");
      }
      std::string key = tok.substr(2);
      std::string value;
      const std::size_t eq = key.find('=');
      if (eq != std::string::npos) {
        value = key.substr(eq + 1);
        key = key.substr(0, eq);
      } else {
        if (++i >= args.size()) {
          throw Error(ErrorCode::kUsage, "flag --" + key + " needs a value");
        }
        value = args[i];
      }
      if (key == "config") {
        cfg = load_config(value);  // flags after --config override the file
      } else {
        set_config_value(cfg, key, value);
      }
    }

    if (cmd == "train") {
      detail::cmd_train(cfg, out);
    } else if (cmd == "eval") {
      detail::cmd_eval(cfg, out);
    } else if (cmd == "predict") {
      detail::cmd_predict(cfg, out);
    } else if (cmd == "stats") {
      detail::cmd_stats(cfg, out);
    } else {
      detail::cmd_convert(cfg, out);
    }
    return 0;
  } catch (const Error& e) {
    err << "ERROR " << to_string(e.code()) << ": " << e.message() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "ERROR Internal: " << e.what() << "\n";
    return 70;
  }
}

}  // namespace mcf
