#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <string>

#include "mcfnet/errors.hpp"
#include "mcfnet/model.hpp"

// Flat key=value run configuration. The same keys are accepted from a config
// file (one pair per line, `#` comments) and from `--key value` command-line
// flags, so every run is describable by a single diff-friendly text file.

namespace mcf {

struct RunConfig {
  std::string manifest;      // dataset CSV; required by train/eval/predict/stats
  std::string image_root;    // base for relative image paths; default: manifest's directory
  std::string out_dir = "."; // where train/eval/convert write their artifacts
  std::string checkpoint;    // train: write target (default <out_dir>/model.ckpt);
                             // eval/predict: required source
  std::string image;         // convert: input image path
  std::string backbone = "tiny";
  double learning_rate = 0.01;
  double w_branch = 0.1;
  double w_feature = 0.1;
  double w_prediction = 0.6;
  int batch_size = 8;
  int epochs = 10;
  std::uint64_t seed = 42;   // the only randomness source of an entire run
  int image_size = 224;      // square side fed to the network

  LossWeights loss_weights() const { return LossWeights{w_branch, w_feature, w_prediction}; }

  TrainConfig train_config() const {
    return TrainConfig{learning_rate, batch_size, epochs, seed};
  }
};

namespace detail {

inline double config_double(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (value.empty() || end != begin + value.size()) {
    throw Error(ErrorCode::kInvalidValue, key + ": `" + value + "` is not a number");
  }
  return v;
}

inline int config_int(const std::string& key, const std::string& value) {
  const double v = config_double(key, value);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) {
    throw Error(ErrorCode::kInvalidValue, key + ": `" + value + "` is not an integer");
  }
  return i;
}

inline std::uint64_t config_u64(const std::string& key, const std::string& value) {
  if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos) {
    throw Error(ErrorCode::kInvalidValue, key + ": `" + value + "` is not an unsigned integer");
  }
  errno = 0;
  const unsigned long long v = std::strtoull(value.c_str(), nullptr, 10);
  if (errno != 0) throw Error(ErrorCode::kInvalidValue, key + ": `" + value + "` out of range");
  return static_cast<std::uint64_t>(v);
}

inline std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto nonneg = [&](double v) {
    if (v < 0.0) throw Error(ErrorCode::kInvalidValue, key + ": must be nonnegative");
    return v;
  };
  if (key == "manifest") {
    cfg.manifest = value;
  } else if (key == "image_root") {
    cfg.image_root = value;
  } else if (key == "out_dir") {
    cfg.out_dir = value;
  } else if (key == "checkpoint") {
    cfg.checkpoint = value;
  } else if (key == "image") {
    cfg.image = value;
  } else if (key == "backbone") {
    try {
      backbone_by_name(value);
    } catch (const Error&) {
      throw Error(ErrorCode::kInvalidValue, "backbone: unknown name `" + value + "`");
    }
    cfg.backbone = value;
  } else if (key == "learning_rate") {
    cfg.learning_rate = nonneg(detail::config_double(key, value));
  } else if (key == "w_branch") {
    cfg.w_branch = nonneg(detail::config_double(key, value));
  } else if (key == "w_feature") {
    cfg.w_feature = nonneg(detail::config_double(key, value));
  } else if (key == "w_prediction") {
    cfg.w_prediction = nonneg(detail::config_double(key, value));
  } else if (key == "batch_size") {
    cfg.batch_size = detail::config_int(key, value);
    if (cfg.batch_size < 1) throw Error(ErrorCode::kInvalidValue, "batch_size: must be >= 1");
  } else if (key == "epochs") {
    cfg.epochs = detail::config_int(key, value);
    if (cfg.epochs < 0) throw Error(ErrorCode::kInvalidValue, "epochs: must be >= 0");
  } else if (key == "seed") {
    cfg.seed = detail::config_u64(key, value);
  } else if (key == "image_size") {
    cfg.image_size = detail::config_int(key, value);
    if (cfg.image_size < 2) throw Error(ErrorCode::kInvalidValue, "image_size: must be >= 2");
  } else {
    throw Error(ErrorCode::kUnknownKey, "unknown config key `" + key + "`");
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open config " + path);
  RunConfig cfg;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidValue,
                  path + " line " + std::to_string(line_no) + ": expected key=value");
    }
    set_config_value(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  if (cfg.manifest.empty()) {
    throw Error(ErrorCode::kMissingRequired, "config " + path + " does not set `manifest`");
  }
  return cfg;
}

}  // namespace mcf
