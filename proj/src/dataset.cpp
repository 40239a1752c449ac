#include "stsyn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace stsyn {

void DatasetSpec::validate() const {
  if (kind == Kind::file) {
    if (path.empty()) throw std::invalid_argument("objective.path: required for file datasets");
    if (format == FileFormat::idx && labels_path.empty()) {
      throw std::invalid_argument("objective.labels_path: required for idx datasets");
    }
    return;
  }
  if (samples < 1) throw std::invalid_argument("objective.samples: must be >= 1");
  if (dim < 1) throw std::invalid_argument("objective.dim: must be >= 1");
  if (kind == Kind::synthetic_quadratic && noise < 0.0) {
    throw std::invalid_argument("objective.noise: must be >= 0");
  }
  if (!(feature_scale > 0.0)) {
    throw std::invalid_argument("objective.feature_scale: must be > 0");
  }
}

ObjectiveKind DatasetSpec::objective_kind() const {
  switch (kind) {
    case Kind::synthetic_quadratic:
      return ObjectiveKind::quadratic;
    case Kind::synthetic_logistic:
      return ObjectiveKind::logistic;
    case Kind::file:
      return file_objective;
  }
  throw std::logic_error("DatasetSpec: bad kind");
}

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

std::shared_ptr<Dataset> synthesize(const DatasetSpec& spec) {
  auto ds = std::make_shared<Dataset>();
  ds->dim = spec.dim;
  ds->features.resize(static_cast<size_t>(spec.samples) * spec.dim);
  ds->targets.resize(spec.samples);

  RngStream rs(derive_seed(spec.seed, Stream::data));
  std::vector<double> truth(spec.dim);
  for (double& x : truth) x = rs.next_gaussian();
  for (double& x : ds->features) x = spec.feature_scale * rs.next_gaussian();

  for (long i = 0; i < spec.samples; ++i) {
    const double z = dot(ds->row(i), truth);
    if (spec.kind == DatasetSpec::Kind::synthetic_quadratic) {
      ds->targets[i] = z + spec.noise * rs.next_gaussian();
    } else {
      const double p = sigmoid(spec.noise * z);
      ds->targets[i] = rs.next_unit() < p ? 1.0 : -1.0;
    }
  }
  return ds;
}

void map_labels_for_logistic(Dataset& ds, const DatasetSpec& spec) {
  for (double& t : ds.targets) {
    if (spec.label_parity) {
      t = (static_cast<long>(std::llround(t)) % 2 != 0) ? 1.0 : -1.0;
    } else {
      t = t > spec.label_threshold ? 1.0 : -1.0;
    }
  }
}

uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("idx read failed (truncated header): " + path);
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

}  // namespace

std::shared_ptr<const Dataset> build_dataset(const DatasetSpec& spec) {
  spec.validate();
  if (spec.kind != DatasetSpec::Kind::file) return synthesize(spec);

  Dataset ds = spec.format == DatasetSpec::FileFormat::idx
                   ? read_idx_pair(spec.path, spec.labels_path)
                   : read_csv(spec.path);
  if (spec.file_objective == ObjectiveKind::logistic) map_labels_for_logistic(ds, spec);
  return std::make_shared<const Dataset>(std::move(ds));
}

std::vector<std::vector<long>> partition_iid(long n_samples, int workers, uint64_t seed) {
  if (workers < 1) throw std::invalid_argument("partition_iid: workers must be >= 1");
  if (n_samples < workers) {
    throw std::invalid_argument("partition_iid: need at least one sample per worker");
  }
  std::vector<long> order(n_samples);
  std::iota(order.begin(), order.end(), 0L);
  RngStream rs(derive_seed(seed, Stream::partition));
  for (long i = n_samples - 1; i > 0; --i) {
    const long j = static_cast<long>(rs.next_below(static_cast<uint64_t>(i) + 1));
    std::swap(order[i], order[j]);
  }

  const long base = n_samples / workers;
  const long extra = n_samples % workers;
  std::vector<std::vector<long>> shards(workers);
  long pos = 0;
  for (int m = 0; m < workers; ++m) {
    const long take = base + (m < extra ? 1 : 0);
    shards[m].assign(order.begin() + pos, order.begin() + pos + take);
    pos += take;
  }
  return shards;
}

Dataset read_idx_pair(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("cannot open idx image file: " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("cannot open idx label file: " + labels_path);

  const uint32_t img_magic = read_be32(img, images_path);
  if (img_magic != 0x00000803u) {
    throw std::runtime_error("bad idx image magic in " + images_path);
  }
  const uint32_t count = read_be32(img, images_path);
  const uint32_t rows = read_be32(img, images_path);
  const uint32_t cols = read_be32(img, images_path);

  const uint32_t lab_magic = read_be32(lab, labels_path);
  if (lab_magic != 0x00000801u) {
    throw std::runtime_error("bad idx label magic in " + labels_path);
  }
  const uint32_t lab_count = read_be32(lab, labels_path);
  if (lab_count != count) {
    throw std::runtime_error("idx image/label count mismatch: " + images_path);
  }

  Dataset ds;
  ds.dim = static_cast<int>(rows * cols);
  ds.features.resize(static_cast<size_t>(count) * ds.dim);
  ds.targets.resize(count);

  std::vector<unsigned char> buf(static_cast<size_t>(ds.dim));
  for (uint32_t i = 0; i < count; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), ds.dim);
    if (!img) throw std::runtime_error("idx read failed (truncated images): " + images_path);
    double* out = ds.features.data() + static_cast<size_t>(i) * ds.dim;
    for (int p = 0; p < ds.dim; ++p) out[p] = buf[p] / 255.0;
    char label;
    lab.read(&label, 1);
    if (!lab) throw std::runtime_error("idx read failed (truncated labels): " + labels_path);
    ds.targets[i] = static_cast<double>(static_cast<unsigned char>(label));
  }
  return ds;
}

Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv file: " + path);

  Dataset ds;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    bool parse_ok = true;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        fields.push_back(std::stod(cell, &used));
        if (used != cell.size() && cell.find_first_not_of(" \t\r", used) != std::string::npos) {
          parse_ok = false;
        }
      } catch (const std::exception&) {
        parse_ok = false;
      }
      if (!parse_ok) break;
    }
    if (!parse_ok) {
      if (line_no == 1) continue;  // header row
      throw std::runtime_error("csv parse error at " + path + ":" + std::to_string(line_no));
    }
    if (fields.size() < 2) {
      throw std::runtime_error("csv needs >= 2 columns at " + path + ":" + std::to_string(line_no));
    }
    const int dim = static_cast<int>(fields.size()) - 1;
    if (ds.dim == 0) {
      ds.dim = dim;
    } else if (dim != ds.dim) {
      throw std::runtime_error("csv column count varies at " + path + ":" + std::to_string(line_no));
    }
    ds.features.insert(ds.features.end(), fields.begin(), fields.end() - 1);
    ds.targets.push_back(fields.back());
  }
  if (ds.targets.empty()) throw std::runtime_error("csv contains no data rows: " + path);
  return ds;
}

}  // namespace stsyn
