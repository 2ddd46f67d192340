#pragma once

// Datasets, the synthetic benchmark and checkpoints.
//
// Matrix files ("ZSLD"): magic "ZSLD", u16 version (1), u32 rows, u32 cols,
// then rows*cols little-endian float32 values in row-major order. Files
// whose name ends in ".csv" are read and written as plain comma-separated
// rows instead.
//
// A dataset is a directory holding manifest.json plus one matrix file per
// field. Labels are stored as single-column matrices. Seen classes are
// numbered 0..K^s-1 and unseen classes K^s..K^s+K^u-1.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cizsl/diffmath.hpp"
#include "cizsl/tensor.hpp"

namespace cizsl {

enum class SplitMode { Easy, Hard, Custom };

std::string to_string(SplitMode m);
SplitMode split_mode_from_string(const std::string& s);

struct ZslDataset {
  Tensor seen_features;                      // N^s x visual_dim
  std::vector<std::size_t> seen_labels;      // in [0, K^s)
  Tensor seen_semantics;                     // K^s x semantic_dim
  Tensor unseen_semantics;                   // K^u x semantic_dim
  Tensor unseen_test_features;
  std::vector<std::size_t> unseen_test_labels;  // in [K^s, K^s + K^u)
  Tensor seen_test_features;
  std::vector<std::size_t> seen_test_labels;    // in [0, K^s)
  SplitMode split_mode = SplitMode::Custom;

  std::size_t k_seen() const { return seen_semantics.rows(); }
  std::size_t k_unseen() const { return unseen_semantics.rows(); }
  std::size_t visual_dim() const { return seen_features.cols(); }
  std::size_t semantic_dim() const { return seen_semantics.cols(); }

  /// Throws ValidationError / DimensionError when an invariant is broken.
  void validate() const;

  friend bool operator==(const ZslDataset&, const ZslDataset&) = default;
};

struct SyntheticSpec {
  std::size_t k_seen = 8;
  std::size_t k_unseen = 4;
  std::size_t visual_dim = 32;
  std::size_t semantic_dim = 16;
  std::size_t samples_per_class = 200;
  double cluster_spread = 0.6;
  double semantic_noise = 0.05;
  SplitMode split_mode = SplitMode::Easy;
  std::uint64_t seed = 1;
  /// Fraction of each seen class held out for generalized evaluation.
  double seen_test_fraction = 0.2;

  void validate() const;
};

/// Latent structure behind a synthetic dataset: class code c, prototype
/// A c, noiseless descriptor c.
struct SyntheticTruth {
  Tensor map;           // visual_dim x semantic_dim (A)
  Tensor seen_codes;    // K^s x semantic_dim
  Tensor unseen_codes;  // K^u x semantic_dim
  Tensor seen_prototypes;
  Tensor unseen_prototypes;
  std::vector<std::size_t> unseen_parent;  // easy mode: seen class each unseen class was derived from
};

ZslDataset make_synthetic(const SyntheticSpec& spec);
std::pair<ZslDataset, SyntheticTruth> make_synthetic_with_truth(const SyntheticSpec& spec);

void write_matrix(const std::filesystem::path& path, const Tensor& m);
Tensor read_matrix(const std::filesystem::path& path);

/// Matrix files are written as CSV instead of ZSLD when `csv` is set.
void save_dataset(const ZslDataset& ds, const std::filesystem::path& dir, bool csv = false);
ZslDataset load_dataset(const std::filesystem::path& dir);

/// Seen classes `train_classes` stay seen and `heldout_classes` become
/// pseudo-unseen, both renumbered in the order given. Held-out classes keep
/// all of their examples as unseen test data. Seen test data comes from the
/// dataset's seen test split, or from the last fifth of each training class
/// when that split is empty.
ZslDataset class_split(const ZslDataset& ds, const std::vector<std::size_t>& train_classes,
                       const std::vector<std::size_t>& heldout_classes);

struct Checkpoint {
  std::string arch_tag;
  nlohmann::json config;
  ParamStore params;
};

inline constexpr int kCheckpointVersion = 1;

/// Parameters are stored as float32; values already representable in
/// float32 round-trip exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
/// Throws ValidationError when `expected_arch_tag` is non-empty and differs.
Checkpoint load_checkpoint(const std::filesystem::path& dir, const std::string& expected_arch_tag = {});

/// Writes `content` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace cizsl
