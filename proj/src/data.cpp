#include "mtaa/data.hpp"

#include "mtaa/image_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mtaa {

namespace {

// Shortest representation that round-trips exactly.
std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& s, long line, const std::string& what) {
  double v;
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("cannot parse " + what + " value '" + s + "'", line);
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

std::string manifest_header() {
  std::string h = "id,path";
  for (const char* stem : kDimensionStems) {
    for (int level = 1; level <= kNumLevels; ++level) {
      h += ",";
      h += stem;
      h += "_";
      h += std::to_string(level);
    }
  }
  return h;
}

std::vector<SampleRecord> load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest: " + path.string());

  std::vector<SampleRecord> records;
  std::set<std::string> seen_ids;
  std::string line;
  long line_no = 0;
  bool header_seen = false;
  const std::string expected_header = manifest_header();

  while (std::getline(is, line)) {
    ++line_no;
    std::string trimmed = line;
    if (!trimmed.empty() && trimmed.back() == '\r') trimmed.pop_back();
    if (trimmed.empty()) continue;
    if (!header_seen) {
      if (trimmed != expected_header) {
        throw ParseError("manifest header mismatch, expected '" + expected_header + "'", line_no);
      }
      header_seen = true;
      continue;
    }

    const std::vector<std::string> fields = split_csv_line(trimmed);
    const std::size_t expected = 2 + 4 * kNumLevels;
    if (fields.size() != expected) {
      throw ParseError("expected " + std::to_string(expected) + " columns, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    SampleRecord rec;
    rec.id = fields[0];
    rec.source = fields[1];
    if (rec.id.empty()) throw ParseError("empty id", line_no);
    if (!seen_ids.insert(rec.id).second) {
      throw ParseError("duplicate id '" + rec.id + "'", line_no);
    }
    for (int d = 0; d < 4; ++d) {
      Vec probs(kNumLevels);
      for (int level = 0; level < kNumLevels; ++level) {
        probs[level] = parse_double(fields[2 + d * kNumLevels + level], line_no,
                                    std::string(kDimensionNames[d]));
      }
      try {
        rec.targets.emplace_back(probs);
      } catch (const InvalidInput& e) {
        throw ParseError(std::string(kDimensionNames[d]) + " distribution invalid: " + e.what(),
                         line_no);
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void save_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open manifest for writing: " + path.string());
  os << manifest_header() << "\n";
  for (const SampleRecord& rec : records) {
    if (rec.targets.size() != 4) throw InvalidInput("save_manifest: record lacks four targets");
    os << rec.id << "," << rec.source;
    for (const ScoreDistribution& d : rec.targets) {
      for (int level = 0; level < kNumLevels; ++level) os << "," << fmt_double(d.probs()[level]);
    }
    os << "\n";
  }
  if (!os) throw IoError("failed writing manifest: " + path.string());
}

void save_features(const std::filesystem::path& path, const std::vector<std::string>& ids,
                   const Mat& features) {
  if (static_cast<Eigen::Index>(ids.size()) != features.rows()) {
    throw InvalidInput("save_features: id count does not match feature rows");
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot open feature file for writing: " + path.string());
  os << "id";
  for (int j = 0; j < features.cols(); ++j) os << ",f_" << j;
  os << "\n";
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    os << ids[i];
    for (int j = 0; j < features.cols(); ++j) os << "," << fmt_double(features(i, j));
    os << "\n";
  }
  if (!os) throw IoError("failed writing feature file: " + path.string());
}

std::map<std::string, Vec> load_features(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open feature file: " + path.string());
  std::map<std::string, Vec> table;
  std::string line;
  long line_no = 0;
  long width = -1;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("id,", 0) != 0) throw ParseError("feature file header must start with 'id,'", line_no);
      continue;
    }
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() < 2) throw ParseError("feature row needs at least one value", line_no);
    if (width < 0) width = static_cast<long>(fields.size()) - 1;
    if (static_cast<long>(fields.size()) - 1 != width) {
      throw ParseError("inconsistent feature width", line_no);
    }
    Vec v(width);
    for (long j = 0; j < width; ++j) v[j] = parse_double(fields[j + 1], line_no, "feature");
    if (!table.emplace(fields[0], std::move(v)).second) {
      throw ParseError("duplicate id '" + fields[0] + "' in feature file", line_no);
    }
  }
  return table;
}

void SplitSpec::validate() const {
  if (!(train_frac > 0.0) || !(val_frac > 0.0) || !(test_frac > 0.0)) {
    throw InvalidInput("SplitSpec: fractions must be positive");
  }
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw InvalidInput("SplitSpec: fractions must sum to 1");
  }
}

SplitIndices split_indices(int n, const SplitSpec& spec) {
  spec.validate();
  if (n < 0) throw InvalidInput("split: negative size");
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng(Rng::derive(spec.seed, "split"));
  for (int i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.uniform_int(i + 1)]);
  }
  const int n_val = static_cast<int>(std::floor(n * spec.val_frac));
  const int n_test = static_cast<int>(std::floor(n * spec.test_frac));
  int n_train = static_cast<int>(std::floor(n * spec.train_frac));
  n_train += n - n_train - n_val - n_test;  // remainder goes to train

  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + n_train);
  out.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  out.test.assign(order.begin() + n_train + n_val, order.end());
  return out;
}

Split split(const std::vector<SampleRecord>& records, const SplitSpec& spec) {
  const SplitIndices idx = split_indices(static_cast<int>(records.size()), spec);
  Split out;
  for (int i : idx.train) out.train.push_back(records[i]);
  for (int i : idx.val) out.val.push_back(records[i]);
  for (int i : idx.test) out.test.push_back(records[i]);
  return out;
}

void SynthProfile::validate() const {
  if (feature_dim < 4) throw InvalidInput("SynthProfile: feature_dim must be at least 4");
  if (!(corr_strong > 0.0) || !(corr_strong < 1.0)) {
    throw InvalidInput("SynthProfile: corr_strong must lie in (0, 1)");
  }
  if (!(kernel_width >= 1.0)) throw InvalidInput("SynthProfile: kernel_width must be >= 1");
}

namespace {

// Unit vector supported on the coordinates congruent to `group` mod 4.
Vec group_direction(int dim, int group) {
  Vec v = Vec::Zero(dim);
  int count = 0;
  for (int i = group; i < dim; i += 4) {
    v[i] = 1.0;
    ++count;
  }
  return v / std::sqrt(static_cast<double>(count));
}

// Triangular kernel over the five levels centered at score s, normalized.
Vec triangular_kernel(double s, double width) {
  Vec p(kNumLevels);
  for (int c = 0; c < kNumLevels; ++c) p[c] = std::max(0.0, 1.0 - std::abs((c + 1) - s) / width);
  const double sum = p.sum();
  if (sum <= 0.0) throw NumericFailure("triangular kernel produced an empty distribution");
  return p / sum;
}

}  // namespace

Vec synth_direction(const SynthProfile& profile, int dimension) {
  profile.validate();
  if (dimension < 0 || dimension >= 4) throw InvalidInput("synth_direction: bad dimension index");
  const int d = profile.feature_dim;
  const double alpha = profile.corr_strong;
  const double beta = std::sqrt(1.0 - alpha * alpha);
  const Vec common = group_direction(d, 0);
  switch (dimension) {
    case 0: return common;                                          // fineness
    case 1: return alpha * common + beta * group_direction(d, 2);   // colorfulness
    case 2: return group_direction(d, 1);                           // harmony
    default: return alpha * common + beta * group_direction(d, 3);  // overall
  }
}

SynthDataset synth_generate(int n, const SynthProfile& profile, double noise_level,
                            std::uint64_t seed) {
  if (n < 1) throw InvalidInput("synth_generate: n must be at least 1");
  if (noise_level < 0.0) throw InvalidInput("synth_generate: noise level must be non-negative");
  profile.validate();

  const int d = profile.feature_dim;
  std::array<Vec, 4> dirs;
  std::array<double, 4> lo{}, hi{};
  for (int t = 0; t < 4; ++t) {
    dirs[t] = synth_direction(profile, t);
    for (int j = 0; j < d; ++j) {
      lo[t] += std::min(0.0, dirs[t][j]);
      hi[t] += std::max(0.0, dirs[t][j]);
    }
  }

  SynthDataset out;
  out.features = Mat(n, d);
  out.records.reserve(n);
  const std::uint64_t base = Rng::derive(seed, "synth");

  for (int i = 0; i < n; ++i) {
    // One stream per record: parallel and serial generation agree.
    Rng rng(Rng::splitmix64(base + static_cast<std::uint64_t>(i)));
    Vec x(d);
    for (int j = 0; j < d; ++j) x[j] = rng.uniform();
    out.features.row(i) = x.transpose();

    SampleRecord rec;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth-%06d", i + 1);
    rec.id = buf;
    for (int t = 0; t < 4; ++t) {
      const double z = dirs[t].dot(x);
      double s = 1.0 + 4.0 * (z - lo[t]) / (hi[t] - lo[t]);
      if (noise_level > 0.0) {
        s = std::clamp(s + noise_level * rng.normal(), 1.0, static_cast<double>(kNumLevels));
      } else {
        rng.normal();  // keep the stream layout identical across noise settings
      }
      rec.targets.emplace_back(triangular_kernel(s, profile.kernel_width));
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

Preprocessing preprocessing_from_string(const std::string& name) {
  if (name == "pad-rescale") return Preprocessing::kPadRescale;
  if (name == "mp") return Preprocessing::kMultiPatch;
  if (name == "mp-gp") return Preprocessing::kMultiPatchGlobal;
  throw InvalidInput("unknown preprocessing '" + name + "' (expected pad-rescale, mp or mp-gp)");
}

std::string to_string(Preprocessing p) {
  switch (p) {
    case Preprocessing::kPadRescale: return "pad-rescale";
    case Preprocessing::kMultiPatch: return "mp";
    case Preprocessing::kMultiPatchGlobal: return "mp-gp";
  }
  throw InvalidInput("unknown preprocessing enum value");
}

std::vector<Vec> preprocess_image(const Image& img, const PreprocessOptions& opts,
                                  const std::string& record_id) {
  std::vector<Vec> rows;
  if (opts.strategy == Preprocessing::kPadRescale) {
    rows.push_back(image_features(pad_and_rescale(img), opts.grid_h, opts.grid_w));
    return rows;
  }
  MultiPatchOptions mp = opts.patches;
  mp.with_global = opts.strategy == Preprocessing::kMultiPatchGlobal;
  const std::uint64_t seed = Rng::derive(opts.seed, "mp:" + record_id);
  for (const Image& patch : multi_patch(img, mp, seed)) {
    rows.push_back(image_features(patch, opts.grid_h, opts.grid_w));
  }
  return rows;
}

SampleBatch Dataset::make_batch(const std::vector<int>& indices) const {
  if (indices.empty()) throw InvalidInput("make_batch: empty index list");
  SampleBatch batch;
  batch.features = Mat(indices.size(), features.cols());
  const int tasks = static_cast<int>(records.front().targets.size());
  batch.targets.assign(tasks, Mat(indices.size(), kNumLevels));
  for (std::size_t row = 0; row < indices.size(); ++row) {
    const int i = indices[row];
    if (i < 0 || i >= size()) throw InvalidInput("make_batch: index out of range");
    batch.features.row(row) = features.row(i);
    for (int t = 0; t < tasks; ++t) {
      batch.targets[t].row(row) = records[i].targets[t].probs().transpose();
    }
  }
  return batch;
}

SampleBatch Dataset::full_batch() const {
  std::vector<int> idx(size());
  for (int i = 0; i < size(); ++i) idx[i] = i;
  return make_batch(idx);
}

Dataset Dataset::subset(const std::vector<int>& indices) const {
  Dataset out;
  out.features = Mat(indices.size(), features.cols());
  for (std::size_t row = 0; row < indices.size(); ++row) {
    const int i = indices[row];
    if (i < 0 || i >= size()) throw InvalidInput("subset: index out of range");
    out.records.push_back(records[i]);
    out.features.row(row) = features.row(i);
  }
  return out;
}

Dataset dataset_from_synth(const SynthDataset& synth) {
  Dataset out;
  out.records = synth.records;
  out.features = synth.features;
  return out;
}

Dataset load_dataset(const std::filesystem::path& manifest_path, const PreprocessOptions& opts) {
  const std::vector<SampleRecord> records = load_manifest(manifest_path);
  const std::filesystem::path dir = manifest_path.parent_path();

  std::map<std::string, std::map<std::string, Vec>> feature_tables;
  std::vector<SampleRecord> out_records;
  std::vector<Vec> out_rows;

  for (const SampleRecord& rec : records) {
    std::filesystem::path src(rec.source);
    if (src.is_relative()) src = dir / src;
    if (src.extension() == ".csv") {
      auto [it, inserted] = feature_tables.try_emplace(src.string());
      if (inserted) it->second = load_features(src);
      const auto found = it->second.find(rec.id);
      if (found == it->second.end()) {
        throw InvalidInput("feature table " + src.string() + " has no row for id '" + rec.id +
                           "'");
      }
      out_records.push_back(rec);
      out_rows.push_back(found->second);
    } else {
      const Image img = load_image(src);
      const std::vector<Vec> rows = preprocess_image(img, opts, rec.id);
      for (std::size_t k = 0; k < rows.size(); ++k) {
        SampleRecord expanded = rec;
        if (rows.size() > 1) expanded.id += "#p" + std::to_string(k);
        out_records.push_back(std::move(expanded));
        out_rows.push_back(rows[k]);
      }
    }
  }

  Dataset out;
  out.records = std::move(out_records);
  if (!out_rows.empty()) {
    out.features = Mat(out_rows.size(), out_rows.front().size());
    for (std::size_t i = 0; i < out_rows.size(); ++i) {
      if (out_rows[i].size() != out.features.cols()) {
        throw InvalidInput("feature rows have inconsistent widths");
      }
      out.features.row(i) = out_rows[i].transpose();
    }
  } else {
    out.features = Mat(0, 0);
  }
  return out;
}

}  // namespace mtaa
