#pragma once

#include "mtaa/batch.hpp"
#include "mtaa/image.hpp"
#include "mtaa/score_dist.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mtaa {

/// The four rated dimensions, in canonical column order.
inline constexpr std::array<const char*, 4> kDimensionNames = {"fineness", "colorfulness",
                                                               "harmony", "overall"};
/// Column-name stems used by the manifest header.
inline constexpr std::array<const char*, 4> kDimensionStems = {"fine", "color", "harmony",
                                                               "overall"};

/// One labeled sample: an id, a pixel source (image file or feature table),
/// and a score distribution per dimension.
struct SampleRecord {
  std::string id;
  std::string source;
  std::vector<ScoreDistribution> targets;  // one per dimension, canonical order

  SampleRecord() = default;
};

/// Exact manifest header. One row per image: id, path, then the 20
/// probability columns (4 dimensions x 5 levels).
std::string manifest_header();

/// Parses a manifest file. Rejects duplicate ids, malformed rows and rows
/// whose probabilities are further than the renormalization tolerance from
/// summing to 1, reporting the offending line. An empty file is an empty
/// dataset.
std::vector<SampleRecord> load_manifest(const std::filesystem::path& path);

void save_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records);

/// Feature table: id column plus feature_dim value columns in [0, 1].
void save_features(const std::filesystem::path& path, const std::vector<std::string>& ids,
                   const Mat& features);
std::map<std::string, Vec> load_features(const std::filesystem::path& path);

/// Train/validation/test fractions and the shuffle seed.
struct SplitSpec {
  double train_frac = 0.8;
  double val_frac = 0.1;
  double test_frac = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitIndices {
  std::vector<int> train, val, test;
};

/// Seeded Fisher-Yates shuffle, then a contiguous partition. Sizes are
/// floor(n * frac) for each split with the remainder assigned to train.
SplitIndices split_indices(int n, const SplitSpec& spec);

struct Split {
  std::vector<SampleRecord> train, val, test;
};

Split split(const std::vector<SampleRecord>& records, const SplitSpec& spec);

/// Synthetic data generation. Four latent scores are linear in the features;
/// fineness, colorfulness and overall share a common direction (pairwise
/// cosine corr_strong and its square) while harmony uses an orthogonal one.
/// Each score becomes a 5-level distribution through a triangular kernel of
/// the given width; width 1 makes the distribution mean equal the score
/// exactly.
struct SynthProfile {
  int feature_dim = 8;
  double corr_strong = 0.85;
  double kernel_width = 1.0;

  void validate() const;
};

struct SynthDataset {
  std::vector<SampleRecord> records;
  Mat features;  // n x feature_dim, aligned with records
};

SynthDataset synth_generate(int n, const SynthProfile& profile, double noise_level,
                            std::uint64_t seed);

/// The latent-score projection for one dimension, exposed so tests can
/// correlate generated data against the generating linear functions.
Vec synth_direction(const SynthProfile& profile, int dimension);

enum class Preprocessing { kPadRescale, kMultiPatch, kMultiPatchGlobal };

Preprocessing preprocessing_from_string(const std::string& name);
std::string to_string(Preprocessing p);

struct PreprocessOptions {
  Preprocessing strategy = Preprocessing::kPadRescale;
  MultiPatchOptions patches;
  int grid_h = 16;
  int grid_w = 32;
  std::uint64_t seed = 0;

  int feature_dim() const { return grid_h * grid_w * 3; }
};

/// Turns one decoded image into one or more feature rows under the given
/// strategy (several rows for the multi-patch strategies).
std::vector<Vec> preprocess_image(const Image& img, const PreprocessOptions& opts,
                                  const std::string& record_id);

/// Records aligned with their feature rows, ready for batching.
struct Dataset {
  std::vector<SampleRecord> records;
  Mat features;

  int size() const { return static_cast<int>(records.size()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
  SampleBatch make_batch(const std::vector<int>& indices) const;
  SampleBatch full_batch() const;
  Dataset subset(const std::vector<int>& indices) const;
};

Dataset dataset_from_synth(const SynthDataset& synth);

/// Loads a manifest and resolves every record's features: `.csv` sources are
/// feature-table lookups by id; anything else is decoded as an image and
/// preprocessed (multi-patch strategies expand one record into one row per
/// patch, ids suffixed `#p<k>`). Relative sources resolve against the
/// manifest's directory.
Dataset load_dataset(const std::filesystem::path& manifest_path, const PreprocessOptions& opts);

}  // namespace mtaa
