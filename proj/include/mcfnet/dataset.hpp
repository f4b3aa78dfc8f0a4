#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mcfnet/autodiff.hpp"
#include "mcfnet/colorspace.hpp"
#include "mcfnet/errors.hpp"
#include "mcfnet/preprocess.hpp"
#include "mcfnet/rng.hpp"

// Manifest-driven ingestion: CSV parsing, grade/DR cross-tabulation,
// PPM image IO with a pluggable decoder hook, and deterministic shuffled
// batch assembly through the preprocessing pipeline.

namespace mcf {

enum class QualityGrade : int { kGood = 0, kUsable = 1, kReject = 2 };

inline const char* to_string(QualityGrade g) {
  switch (g) {
    case QualityGrade::kGood: return "Good";
    case QualityGrade::kUsable: return "Usable";
    case QualityGrade::kReject: return "Reject";
  }
  return "?";
}

struct ManifestRecord {
  std::string path;
  QualityGrade quality = QualityGrade::kGood;
  int dr_grade = -1;  // -1 when the DR column is empty

  bool has_dr() const { return dr_grade >= 0; }
  bool operator==(const ManifestRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Manifest CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kManifestHeader = "image,quality,dr";

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline bool parse_int(const std::string& s, int& value) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    value = std::stoi(s, &pos);
  } catch (...) {
    return false;
  }
  return pos == s.size();
}

inline std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace detail

inline std::vector<ManifestRecord> parse_manifest(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || detail::strip_cr(line) != kManifestHeader) {
    throw Error(ErrorCode::kMalformedRow,
                std::string("manifest must start with header `") + kManifestHeader + "`");
  }
  std::vector<ManifestRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const auto cols = detail::split_csv_row(line);
    if (cols.size() != 3) {
      throw Error(ErrorCode::kMalformedRow,
                  "line " + std::to_string(line_no) + " has " + std::to_string(cols.size()) +
                      " columns, expected 3");
    }
    ManifestRecord rec;
    rec.path = cols[0];
    int q = -1;
    if (!detail::parse_int(cols[1], q) || q < 0 || q > 2) {
      throw Error(ErrorCode::kInvalidGrade,
                  "line " + std::to_string(line_no) + ": quality `" + cols[1] + "` not in {0,1,2}");
    }
    rec.quality = static_cast<QualityGrade>(q);
    if (!cols[2].empty()) {
      int dr = -1;
      if (!detail::parse_int(cols[2], dr) || dr < 0 || dr > 4) {
        throw Error(ErrorCode::kInvalidDr,
                    "line " + std::to_string(line_no) + ": dr `" + cols[2] + "` not in [0,4]");
      }
      rec.dr_grade = dr;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::string serialize_manifest(const std::vector<ManifestRecord>& records) {
  std::string out = std::string(kManifestHeader) + "\n";
  for (const ManifestRecord& r : records) {
    out += r.path;
    out += ',';
    out += std::to_string(static_cast<int>(r.quality));
    out += ',';
    if (r.has_dr()) out += std::to_string(r.dr_grade);
    out += '\n';
  }
  return out;
}

inline std::vector<ManifestRecord> load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open manifest " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

// ---------------------------------------------------------------------------
// Grade statistics
// ---------------------------------------------------------------------------

// Quality x DR cross-tabulation. Records without a DR grade contribute to
// their row total but to no DR cell.
struct GradeTable {
  std::array<std::array<std::size_t, 5>, 3> cells{};  // [quality][dr]
  std::array<std::size_t, 3> row_total{};
  std::size_t grand_total = 0;

  std::size_t col_total(int dr) const {
    return cells[0][dr] + cells[1][dr] + cells[2][dr];
  }
};

inline GradeTable grade_statistics(const std::vector<ManifestRecord>& records) {
  GradeTable t;
  for (const ManifestRecord& r : records) {
    const int q = static_cast<int>(r.quality);
    ++t.row_total[q];
    ++t.grand_total;
    if (r.has_dr()) ++t.cells[q][r.dr_grade];
  }
  return t;
}

inline std::string format_grade_table(const GradeTable& t) {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof(line), "%-8s%10s%10s%10s%10s%10s%10s\n", "Quality", "DR-0", "DR-1",
                "DR-2", "DR-3", "DR-4", "Total");
  out += line;
  const char* names[3] = {"Good", "Usable", "Reject"};
  for (int q = 0; q < 3; ++q) {
    std::snprintf(line, sizeof(line), "%-8s%10zu%10zu%10zu%10zu%10zu%10zu\n", names[q],
                  t.cells[q][0], t.cells[q][1], t.cells[q][2], t.cells[q][3], t.cells[q][4],
                  t.row_total[q]);
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-8s%10zu%10zu%10zu%10zu%10zu%10zu\n", "Total", t.col_total(0),
                t.col_total(1), t.col_total(2), t.col_total(3), t.col_total(4), t.grand_total);
  out += line;
  return out;
}

// ---------------------------------------------------------------------------
// Image IO
// ---------------------------------------------------------------------------

// Hook for formats beyond PPM: returns true and fills `out` if it claims
// the file. Hooks are consulted in registration order.
using ImageDecoder =
    std::function<bool(const std::string& path, const std::vector<unsigned char>& bytes, ImageBuffer& out)>;

inline std::vector<ImageDecoder>& image_decoder_hooks() {
  static std::vector<ImageDecoder> hooks;
  return hooks;
}

inline void register_image_decoder(ImageDecoder hook) {
  image_decoder_hooks().push_back(std::move(hook));
}

namespace detail {

// Reads one PNM header token, skipping whitespace and # comments.
inline bool pnm_token(const std::vector<unsigned char>& b, std::size_t& pos, std::string& tok) {
  while (pos < b.size()) {
    const unsigned char c = b[pos];
    if (c == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++pos;
    } else {
      break;
    }
  }
  tok.clear();
  while (pos < b.size() && !std::isspace(b[pos])) tok += static_cast<char>(b[pos++]);
  return !tok.empty();
}

inline ImageBuffer decode_ppm(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::size_t pos = 2;  // past "P6"
  std::string tok;
  int w = 0, h = 0, maxval = 0;
  auto next_int = [&](int& out) {
    if (!pnm_token(bytes, pos, tok) || !parse_int(tok, out)) {
      throw Error(ErrorCode::kCorruptFile, path + ": malformed PPM header");
    }
  };
  next_int(w);
  next_int(h);
  next_int(maxval);
  if (w <= 0 || h <= 0) throw Error(ErrorCode::kCorruptFile, path + ": nonpositive PPM dimensions");
  if (maxval != 255) {
    throw Error(ErrorCode::kUnsupportedFormat,
                path + ": only maxval 255 is supported, got " + std::to_string(maxval));
  }
  ++pos;  // single whitespace between header and payload
  const std::size_t need = static_cast<std::size_t>(3) * w * h;
  if (bytes.size() < pos + need) {
    throw Error(ErrorCode::kCorruptFile, path + ": truncated PPM payload");
  }
  ImageBuffer img(w, h, ColorSpace::kRgb);
  const std::size_t n = img.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    img.planes[i] = bytes[pos + 3 * i] / 255.0;
    img.planes[n + i] = bytes[pos + 3 * i + 1] / 255.0;
    img.planes[2 * n + i] = bytes[pos + 3 * i + 2] / 255.0;
  }
  return img;
}

}  // namespace detail

inline ImageBuffer load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open image " + path);
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
    return detail::decode_ppm(path, bytes);
  }
  for (const ImageDecoder& hook : image_decoder_hooks()) {
    ImageBuffer out;
    if (hook(path, bytes, out)) return out;
  }
  std::string magic;
  for (std::size_t i = 0; i < bytes.size() && i < 2; ++i) {
    magic += std::isprint(bytes[i]) ? static_cast<char>(bytes[i]) : '?';
  }
  throw Error(ErrorCode::kUnsupportedFormat, path + ": no decoder for magic `" + magic + "`");
}

// Writes binary PPM (P6, maxval 255); values clamped to [0,1].
inline void write_ppm(const ImageBuffer& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  const std::size_t n = img.plane_size();
  std::vector<unsigned char> row(static_cast<std::size_t>(3) * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(img.planes[static_cast<std::size_t>(c) * n + i], 0.0, 1.0);
      row[3 * i + c] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
  }
  out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  if (!out) throw Error(ErrorCode::kIoError, "short write to " + path);
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

struct Batch {
  Tensor rgb;  // [B x 3 x S x S]
  Tensor hsv;
  Tensor lab;
  std::vector<int> labels;
  std::vector<std::size_t> ids;  // indices into the source record list

  int size() const { return static_cast<int>(labels.size()); }
};

enum class DatasetMode { kTrain, kEval };

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = uniform_below(rng, i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

// Walks the manifest in shuffled (train) or original (eval) order, running
// each image through augmentation (train only) and the preprocessing
// pipeline. Emits fixed-size batches plus a final partial batch.
class BatchIterator {
 public:
  BatchIterator(std::vector<ManifestRecord> records, int batch_size, std::uint64_t seed,
                DatasetMode mode, PreprocessConfig pre = {}, AugmentConfig aug = {},
                std::string base_dir = "")
      : records_(std::move(records)),
        batch_size_(batch_size),
        seed_(seed),
        mode_(mode),
        pre_(pre),
        aug_(aug),
        base_dir_(std::move(base_dir)) {
    if (batch_size_ < 1) throw Error(ErrorCode::kInvalidConfig, "batch_size must be >= 1");
    pre_.validate();
    aug_.validate();
    start_epoch(0);
  }

  const std::vector<ManifestRecord>& records() const { return records_; }

  void start_epoch(int epoch) {
    epoch_ = epoch;
    cursor_ = 0;
    if (mode_ == DatasetMode::kTrain) {
      order_ = shuffled_indices(records_.size(), mix_seed(seed_, static_cast<std::uint64_t>(epoch)));
    } else {
      order_.resize(records_.size());
      for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    }
  }

  std::optional<Batch> next() {
    if (cursor_ >= order_.size()) return std::nullopt;
    const std::size_t take = std::min<std::size_t>(batch_size_, order_.size() - cursor_);
    const int s = pre_.out_size;
    const std::size_t plane = static_cast<std::size_t>(3) * s * s;

    Batch batch;
    std::vector<double> rgb(take * plane), hsv(take * plane), lab(take * plane);
    for (std::size_t k = 0; k < take; ++k) {
      const std::size_t rec_idx = order_[cursor_ + k];
      const ManifestRecord& rec = records_[rec_idx];
      const BranchInputs in = prepare(rec, rec_idx);
      std::copy(in.rgb.values().begin(), in.rgb.values().end(), rgb.begin() + k * plane);
      std::copy(in.hsv.values().begin(), in.hsv.values().end(), hsv.begin() + k * plane);
      std::copy(in.lab.values().begin(), in.lab.values().end(), lab.begin() + k * plane);
      batch.labels.push_back(static_cast<int>(rec.quality));
      batch.ids.push_back(rec_idx);
    }
    cursor_ += take;
    const Shape shape{static_cast<int>(take), 3, s, s};
    batch.rgb = Tensor(shape, std::move(rgb));
    batch.hsv = Tensor(shape, std::move(hsv));
    batch.lab = Tensor(shape, std::move(lab));
    return batch;
  }

 private:
  std::string resolve(const std::string& rel) const {
    if (base_dir_.empty()) return rel;
    return (std::filesystem::path(base_dir_) / rel).string();
  }

  BranchInputs prepare(const ManifestRecord& rec, std::size_t rec_idx) const {
    ImageBuffer img = [&] {
      try {
        return load_image(resolve(rec.path));
      } catch (const Error& e) {
        throw Error(ErrorCode::kImageDecodeFailure, rec.path + ": " + e.message());
      }
    }();
    if (mode_ == DatasetMode::kTrain) {
      std::mt19937_64 rng(mix_seed(aug_.seed != 0 ? aug_.seed : seed_,
                                   static_cast<std::uint64_t>(epoch_), rec_idx));
      img = augment(img, aug_, rng);
    }
    try {
      return preprocess_for_network(img, pre_);
    } catch (const Error& e) {
      throw Error(ErrorCode::kPreprocessFailure,
                  "record " + std::to_string(rec_idx) + " (" + rec.path + "): " + e.message());
    }
  }

  std::vector<ManifestRecord> records_;
  int batch_size_;
  std::uint64_t seed_;
  DatasetMode mode_;
  PreprocessConfig pre_;
  AugmentConfig aug_;
  std::string base_dir_;
  int epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> order_;
};

}  // namespace mcf
