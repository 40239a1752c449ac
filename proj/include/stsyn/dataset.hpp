#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "stsyn/sgd.hpp"

namespace stsyn {

struct DatasetSpec {
  enum class Kind { synthetic_quadratic, synthetic_logistic, file };
  enum class FileFormat { csv, idx };

  Kind kind = Kind::synthetic_quadratic;
  long samples = 0;   // synthetic kinds
  int dim = 0;        // synthetic kinds
  uint64_t seed = 0;  // generator seed
  // quadratic: target noise std-dev; logistic: logit scale before label flip
  double noise = 0.5;
  // multiplier on the synthetic feature magnitudes; scales the smoothness
  // constant roughly quadratically
  double feature_scale = 1.0;

  // kind == file
  std::string path;
  FileFormat format = FileFormat::csv;
  std::string labels_path;  // idx label file
  ObjectiveKind file_objective = ObjectiveKind::logistic;
  // Binary label mapping for file datasets driving the logistic objective:
  // parity maps odd raw labels to +1, otherwise targets > threshold map to +1.
  bool label_parity = false;
  double label_threshold = 0.5;

  void validate() const;
  ObjectiveKind objective_kind() const;
};

std::shared_ptr<const Dataset> build_dataset(const DatasetSpec& spec);

// Seeded global shuffle, then contiguous split; the first (n mod workers)
// shards take one extra sample. Shards are disjoint and cover [0, n).
std::vector<std::vector<long>> partition_iid(long n_samples, int workers, uint64_t seed);

// IDX (big-endian magic + dims, unsigned-byte payload) image/label pair.
// Pixels are scaled to [0,1]; targets carry the raw label byte.
Dataset read_idx_pair(const std::string& images_path, const std::string& labels_path);

// Numeric CSV, last column is the target; optional non-numeric header row.
Dataset read_csv(const std::string& path);

}  // namespace stsyn
