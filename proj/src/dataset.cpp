#include "calib/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string_view>
#include <system_error>

#include "calib/rng.hpp"

namespace calib {

namespace {

// Stream ids for the generator's independent randomness sources.
constexpr std::uint64_t kMeansStream = 0;
constexpr std::uint64_t kNoiseStream = 1;

void append_double(std::string& out, double value) {
  char buf[64];
  const auto res =
      std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(std::string_view field, const std::string& path,
                    std::size_t line_no) {
  double value = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw ParseError(path, line_no, "not a number: '" + std::string(field) + "'");
  }
  if (!std::isfinite(value)) {
    throw ParseError(path, line_no, "non-finite value: '" + std::string(field) + "'");
  }
  return value;
}

int parse_label(std::string_view field, const std::string& path,
                std::size_t line_no) {
  int value = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw ParseError(path, line_no, "not an integer label: '" + std::string(field) + "'");
  }
  if (value < 0) {
    throw ParseError(path, line_no, "negative label " + std::to_string(value));
  }
  return value;
}

// Lines of the file minus any final empty fragment; a lone '\r' survivor
// from CRLF input is stripped so externally produced files still load.
std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void check_header(const std::vector<std::string_view>& fields, char prefix,
                  const std::string& path) {
  if (fields.size() < 2 || fields.back() != "label") {
    throw ParseError(path, 1, "header must end with 'label'");
  }
  for (std::size_t i = 0; i + 1 < fields.size(); ++i) {
    const std::string expected = prefix + std::to_string(i);
    if (fields[i] != expected) {
      throw ParseError(path, 1, "expected header column '" + expected + "', got '" +
                                    std::string(fields[i]) + "'");
    }
  }
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace

void BlobSpec::validate() const {
  if (k < 2) throw ConfigError("blob spec needs k >= 2 classes");
  if (d < 1) throw ConfigError("blob spec needs d >= 1 features");
  if (n_per_class < 1) throw ConfigError("blob spec needs n_per_class >= 1");
  if (!(center_scale > 0.0)) throw ConfigError("center_scale must be > 0");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
}

std::vector<std::vector<double>> blob_class_means(const BlobSpec& spec) {
  spec.validate();
  Xoshiro256pp rng(derive_seed(spec.seed, kMeansStream));
  std::vector<std::vector<double>> means(static_cast<std::size_t>(spec.k));
  for (auto& mean : means) {
    mean.resize(static_cast<std::size_t>(spec.d));
    double norm_sq = 0.0;
    do {
      norm_sq = 0.0;
      for (double& x : mean) {
        x = rng.normal();
        norm_sq += x * x;
      }
    } while (norm_sq == 0.0);
    const double scale = spec.center_scale / std::sqrt(norm_sq);
    for (double& x : mean) x *= scale;
  }
  return means;
}

Dataset gen_blobs(const BlobSpec& spec) {
  const auto means = blob_class_means(spec);
  Xoshiro256pp rng(derive_seed(spec.seed, kNoiseStream));

  Dataset ds;
  ds.k = spec.k;
  ds.d = spec.d;
  const std::size_t n = static_cast<std::size_t>(spec.k) *
                        static_cast<std::size_t>(spec.n_per_class);
  ds.features.reserve(n);
  ds.labels.reserve(n);
  for (int c = 0; c < spec.k; ++c) {
    for (int i = 0; i < spec.n_per_class; ++i) {
      std::vector<double> row(static_cast<std::size_t>(spec.d));
      for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] = means[static_cast<std::size_t>(c)][j] + spec.noise_sigma * rng.normal();
      }
      ds.features.push_back(std::move(row));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

std::array<Dataset, 3> split_dataset(const Dataset& ds, double f_train,
                                     double f_val, double f_test,
                                     std::uint64_t seed) {
  if (!(f_train > 0.0) || !(f_val > 0.0) || !(f_test > 0.0)) {
    throw UsageError("split fractions must all be positive");
  }
  if (std::abs(f_train + f_val + f_test - 1.0) > 1e-9) {
    throw UsageError("split fractions must sum to 1");
  }
  const std::size_t n = ds.size();
  const double nd = static_cast<double>(n);
  const std::size_t n_val = static_cast<std::size_t>(std::floor(nd * f_val + 1e-9));
  const std::size_t n_test = static_cast<std::size_t>(std::floor(nd * f_test + 1e-9));
  const std::size_t n_train_floor =
      static_cast<std::size_t>(std::floor(nd * f_train + 1e-9));
  const std::size_t n_train = n - n_val - n_test;  // floor share + remainder
  if (n_train < n_train_floor) {
    throw UsageError("split slices overlap; check fractions");
  }
  if (n_train == 0 || n_val == 0 || n_test == 0) {
    throw UsageError("split would produce an empty slice");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Xoshiro256pp rng(seed);
  shuffle(order, rng);

  std::array<Dataset, 3> parts;
  const std::array<std::size_t, 3> sizes = {n_train, n_val, n_test};
  std::size_t pos = 0;
  for (std::size_t p = 0; p < 3; ++p) {
    parts[p].k = ds.k;
    parts[p].d = ds.d;
    parts[p].features.reserve(sizes[p]);
    parts[p].labels.reserve(sizes[p]);
    for (std::size_t i = 0; i < sizes[p]; ++i, ++pos) {
      parts[p].features.push_back(ds.features[order[pos]]);
      parts[p].labels.push_back(ds.labels[order[pos]]);
    }
  }
  return parts;
}

void save_dataset_csv(const Dataset& ds, const std::string& path) {
  if (ds.size() == 0) throw UsageError("refusing to save an empty dataset");

  std::string out;
  for (int j = 0; j < ds.d; ++j) {
    out += 'f';
    out += std::to_string(j);
    out += ',';
  }
  out += "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double x : ds.features[i]) {
      append_double(out, x);
      out += ',';
    }
    out += std::to_string(ds.labels[i]);
    out += '\n';
  }
  write_file(path, out);
}

Dataset load_dataset_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(path, 1, "missing header");
  const auto header = split_fields(lines[0]);
  check_header(header, 'f', path);
  const std::size_t d = header.size() - 1;
  if (lines.size() < 2) throw ParseError(path, 2, "no data rows");

  Dataset ds;
  ds.d = static_cast<int>(d);
  int max_label = 0;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    const std::size_t line_no = row + 1;
    const auto fields = split_fields(lines[row]);
    if (fields.size() != d + 1) {
      throw ParseError(path, line_no,
                       "expected " + std::to_string(d + 1) + " fields, got " +
                           std::to_string(fields.size()));
    }
    std::vector<double> feat(d);
    for (std::size_t j = 0; j < d; ++j) {
      feat[j] = parse_double(fields[j], path, line_no);
    }
    const int label = parse_label(fields[d], path, line_no);
    max_label = std::max(max_label, label);
    ds.features.push_back(std::move(feat));
    ds.labels.push_back(label);
  }
  ds.k = max_label + 1;
  return ds;
}

void save_predictions_csv(const PredictionSet& preds, const std::string& path) {
  if (preds.empty()) throw UsageError("refusing to save an empty prediction set");

  std::string out;
  for (std::size_t j = 0; j < preds.k(); ++j) {
    out += 'l';
    out += std::to_string(j);
    out += ',';
  }
  out += "label\n";
  for (const PredictionRecord& r : preds.records()) {
    for (double x : r.logits.values()) {
      append_double(out, x);
      out += ',';
    }
    out += std::to_string(r.label);
    out += '\n';
  }
  write_file(path, out);
}

PredictionSet load_predictions_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(path, 1, "missing header");
  const auto header = split_fields(lines[0]);
  check_header(header, 'l', path);
  const std::size_t k = header.size() - 1;
  if (k < 2) throw ParseError(path, 1, "need at least 2 logit columns");
  if (lines.size() < 2) throw ParseError(path, 2, "no data rows");

  PredictionSet preds;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    const std::size_t line_no = row + 1;
    const auto fields = split_fields(lines[row]);
    if (fields.size() != k + 1) {
      throw ParseError(path, line_no,
                       "expected " + std::to_string(k + 1) + " fields, got " +
                           std::to_string(fields.size()));
    }
    std::vector<double> logits(k);
    for (std::size_t j = 0; j < k; ++j) {
      logits[j] = parse_double(fields[j], path, line_no);
    }
    const int label = parse_label(fields[k], path, line_no);
    if (static_cast<std::size_t>(label) >= k) {
      throw ParseError(path, line_no,
                       "label " + std::to_string(label) + " out of range for K=" +
                           std::to_string(k));
    }
    preds.add(LogitVector(std::move(logits)), label);
  }
  return preds;
}

}  // namespace calib
