#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "stsyn/config.hpp"
#include "stsyn/trace_io.hpp"

using namespace stsyn;
namespace fs = std::filesystem;

namespace {

const char* kBasicConfig = R"(
# minimal strategy run
[run]
workers = 4
rounds = 6
alpha = 0.05
batch_size = 10
master_seed = 11

[timing]
mu = 1e-4

[scheme]
kind = stsyn
K = 3
U = 2

[objective]
kind = synthetic-quadratic
samples = 120
dim = 5
seed = 7
)";

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("stsyn_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_be32(std::ofstream& out, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

TEST_CASE("config text parses into a validated experiment") {
  const ExperimentConfig cfg = parse_config_text(kBasicConfig);
  CHECK(cfg.workers == 4);
  CHECK(cfg.rounds == 6);
  CHECK(cfg.alpha == 0.05);
  CHECK(cfg.scheme.kind == SchemeSpec::Kind::stsyn);
  CHECK(cfg.scheme.wait_for == 3);
  CHECK(cfg.dataset.samples == 120);
  CHECK(cfg.eval_every == 1);  // default
}

TEST_CASE("unknown, missing and malformed keys are named") {
  const std::string with_unknown = std::string(kBasicConfig) + "\n[run]\nbogus_knob = 3\n";
  // parse_string rejects the duplicate [run] section keys only when repeated;
  // here the new key lands in run.bogus_knob
  try {
    parse_config_text(with_unknown);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "run.bogus_knob");
  }

  const std::string missing = R"(
[run]
workers = 4
rounds = 6
alpha = 0.05
[timing]
mu = 1e-4
[scheme]
kind = stsyn
K = 3
U = 2
[objective]
kind = synthetic-quadratic
samples = 120
dim = 5
)";
  try {
    parse_config_text(missing);  // batch_size absent
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "run.batch_size");
  }

  const std::string bad_value =
      std::string(kBasicConfig).replace(std::string(kBasicConfig).find("rounds = 6"),
                                        10, "rounds = x");
  try {
    parse_config_text(bad_value);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "run.rounds");
  }

  const std::string out_of_range =
      std::string(kBasicConfig).replace(std::string(kBasicConfig).find("K = 3"), 5, "K = 9");
  CHECK_THROWS_WITH_AS(parse_config_text(out_of_range), doctest::Contains("scheme.K"),
                       std::invalid_argument);

  CHECK_THROWS_AS(parse_config_text("[run]\nworkers = 1\nworkers = 2\n"), ConfigError);
}

TEST_CASE("canonicalization normalizes numbers and ordering") {
  const ExperimentConfig a = parse_config_text(kBasicConfig);
  std::string reordered = R"(
[objective]
seed = 7
dim = 5
samples = 120
kind = synthetic-quadratic
[scheme]
U = 2
K = 3
kind = stsyn
[timing]
mu = 0.0001
[run]
master_seed = 11
batch_size = 10
alpha = 5e-2
rounds = 6
workers = 4
)";
  const ExperimentConfig b = parse_config_text(reordered);
  CHECK(canonical_config_text(a) == canonical_config_text(b));
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash_hex(a).size() == 16);
}

TEST_CASE("canonical text round-trips") {
  const ExperimentConfig a = parse_config_text(kBasicConfig);
  const std::string text = canonical_config_text(a);
  const ExperimentConfig b = parse_config_text(text);
  CHECK(canonical_config_text(b) == text);
}

TEST_CASE("partition sizes and determinism") {
  const auto even = partition_iid(8, 4, 1);
  REQUIRE(even.size() == 4);
  for (const auto& shard : even) CHECK(shard.size() == 2);

  const auto uneven = partition_iid(10, 4, 1);
  CHECK(uneven[0].size() == 3);
  CHECK(uneven[1].size() == 3);
  CHECK(uneven[2].size() == 2);
  CHECK(uneven[3].size() == 2);

  CHECK(partition_iid(10, 4, 5) == partition_iid(10, 4, 5));
  CHECK(partition_iid(10, 4, 5) != partition_iid(10, 4, 6));
  CHECK_THROWS_AS(partition_iid(3, 4, 1), std::invalid_argument);
}

TEST_CASE("partitions cover and never overlap") {
  RngStream rs(99);
  for (int trial = 0; trial < 100; ++trial) {
    const int workers = 1 + static_cast<int>(rs.next_below(12));
    const long n = workers + static_cast<long>(rs.next_below(400));
    const auto shards = partition_iid(n, workers, rs.next_u64());
    std::set<long> seen;
    long total = 0;
    for (const auto& shard : shards) {
      total += static_cast<long>(shard.size());
      for (long idx : shard) {
        CHECK(idx >= 0);
        CHECK(idx < n);
        CHECK(seen.insert(idx).second);  // no overlap
      }
    }
    CHECK(total == n);
  }
}

TEST_CASE("idx round trip through real files") {
  const fs::path dir = temp_dir("idx");
  const fs::path images = dir / "img.idx3-ubyte";
  const fs::path labels = dir / "lab.idx1-ubyte";
  {
    std::ofstream img(images, std::ios::binary);
    write_be32(img, 0x00000803u);
    write_be32(img, 3);  // three samples
    write_be32(img, 2);
    write_be32(img, 2);
    const unsigned char pixels[12] = {0, 255, 128, 64, 10, 20, 30, 40, 5, 6, 7, 8};
    img.write(reinterpret_cast<const char*>(pixels), sizeof(pixels));
    std::ofstream lab(labels, std::ios::binary);
    write_be32(lab, 0x00000801u);
    write_be32(lab, 3);
    const unsigned char raw[3] = {7, 0, 3};
    lab.write(reinterpret_cast<const char*>(raw), sizeof(raw));
  }

  const Dataset ds = read_idx_pair(images.string(), labels.string());
  CHECK(ds.dim == 4);
  CHECK(ds.size() == 3);
  CHECK(ds.features[0] == 0.0);
  CHECK(ds.features[1] == 1.0);
  CHECK(ds.features[2] == doctest::Approx(128.0 / 255.0));
  CHECK(ds.targets == std::vector<double>{7.0, 0.0, 3.0});

  // parity mapping through the dataset loader
  DatasetSpec spec;
  spec.kind = DatasetSpec::Kind::file;
  spec.path = images.string();
  spec.format = DatasetSpec::FileFormat::idx;
  spec.labels_path = labels.string();
  spec.file_objective = ObjectiveKind::logistic;
  spec.label_parity = true;
  const auto mapped = build_dataset(spec);
  CHECK(mapped->targets == std::vector<double>{1.0, -1.0, 1.0});

  // corrupted magic is rejected
  {
    std::ofstream img(images, std::ios::binary);
    write_be32(img, 0xdeadbeefu);
  }
  CHECK_THROWS(read_idx_pair(images.string(), labels.string()));
  fs::remove_all(dir);
}

TEST_CASE("csv ingestion with header and error reporting") {
  const fs::path dir = temp_dir("csv");
  const fs::path good = dir / "data.csv";
  {
    std::ofstream f(good);
    f << "x1,x2,label\n";
    f << "0.5,1.5,1\n";
    f << "-1.0,2.0,0\n";
  }
  const Dataset ds = read_csv(good.string());
  CHECK(ds.dim == 2);
  CHECK(ds.size() == 2);
  CHECK(ds.features == std::vector<double>{0.5, 1.5, -1.0, 2.0});
  CHECK(ds.targets == std::vector<double>{1.0, 0.0});

  const fs::path bad = dir / "bad.csv";
  {
    std::ofstream f(bad);
    f << "1.0,2.0\n";
    f << "1.0,oops\n";
  }
  CHECK_THROWS(read_csv(bad.string()));
  fs::remove_all(dir);
}

TEST_CASE("persisted traces carry running sums and reload exactly") {
  Trace trace;
  trace.config = parse_config_text(kBasicConfig);
  double cum_t = 0.0;
  long cum_c = 0;
  for (long j = 0; j < 3; ++j) {
    RoundRecord rec;
    rec.round = j;
    rec.round_time = 0.5 * (j + 1);
    rec.comm = 6 + j;
    cum_t += rec.round_time;
    cum_c += rec.comm;
    rec.cum_time = cum_t;
    rec.cum_comm = cum_c;
    rec.uploader_count = 3;
    rec.updates = {2, 2, int(j), 0};
    rec.loss = 1.0 / (j + 1);
    rec.grad_sq_norm = 2.0 / (j + 1);
    trace.records.push_back(rec);
  }
  trace.final_model = {1.0, 2.0};

  const fs::path dir = temp_dir("persist");
  const RunManifest manifest = persist_trace(trace, dir, "2000-01-01T00:00:00Z");
  CHECK(manifest.rounds == 3);
  CHECK(manifest.files.size() == 3);
  CHECK(manifest.config_hash == config_hash_hex(trace.config));

  const std::string csv = read_file(dir / "summary.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "j,T_cum,C_cum,loss,grad_sq_norm,S_size,accuracy");
  std::getline(lines, line);
  CHECK(line == "0,0.5,6,1,2,3,");

  const auto records = load_trace_records(dir);
  REQUIRE(records.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(records[i].round == trace.records[i].round);
    CHECK(records[i].cum_time == trace.records[i].cum_time);
    CHECK(records[i].updates == trace.records[i].updates);
    CHECK(records[i].loss == trace.records[i].loss);
    CHECK(records[i].accuracy == trace.records[i].accuracy);
  }
  fs::remove_all(dir);
}

TEST_CASE("empty trace persists a header-only csv") {
  Trace trace;
  trace.config = parse_config_text(kBasicConfig);
  const fs::path dir = temp_dir("empty");
  const RunManifest manifest = persist_trace(trace, dir);
  CHECK(manifest.rounds == 0);
  CHECK(read_file(dir / "summary.csv") == "j,T_cum,C_cum,loss,grad_sq_norm,S_size,accuracy\n");
  CHECK(read_file(dir / "rounds.jsonl").empty());
  fs::remove_all(dir);
}

TEST_CASE("rerunning a config reproduces files byte for byte") {
  const ExperimentConfig cfg = parse_config_text(kBasicConfig);
  const fs::path dir_a = temp_dir("rerun_a");
  const fs::path dir_b = temp_dir("rerun_b");
  persist_trace(run_experiment(cfg), dir_a);
  persist_trace(run_experiment(cfg), dir_b);
  CHECK(read_file(dir_a / "rounds.jsonl") == read_file(dir_b / "rounds.jsonl"));
  CHECK(read_file(dir_a / "summary.csv") == read_file(dir_b / "summary.csv"));
  CHECK(read_file(dir_a / "config.cfg") == read_file(dir_b / "config.cfg"));

  // the persisted canonical config reproduces the run
  const ExperimentConfig reloaded = load_config((dir_a / "config.cfg").string());
  const fs::path dir_c = temp_dir("rerun_c");
  persist_trace(run_experiment(reloaded), dir_c);
  CHECK(read_file(dir_a / "rounds.jsonl") == read_file(dir_c / "rounds.jsonl"));
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  fs::remove_all(dir_c);
}

TEST_CASE("plot data pairs columns per trace") {
  Trace a, b;
  a.config = b.config = parse_config_text(kBasicConfig);
  for (long j = 0; j < 2; ++j) {
    RoundRecord rec;
    rec.round = j;
    rec.cum_time = j + 1.0;
    rec.cum_comm = (j + 1) * 10;
    rec.loss = 0.5 - 0.1 * j;
    a.records.push_back(rec);
  }
  RoundRecord rec;
  rec.cum_time = 2.5;
  rec.cum_comm = 7;
  rec.loss = 0.9;
  b.records.push_back(rec);

  std::ostringstream out;
  emit_plot_data({&a, &b}, {"stsyn", "pasgd"}, PlotMetric::time, out);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "stsyn_x,stsyn_y,pasgd_x,pasgd_y");
  std::getline(lines, line);
  CHECK(line == "1,0.5,2.5,0.9");
  std::getline(lines, line);
  CHECK(line == "2,0.4,,");

  std::ostringstream by_comm;
  emit_plot_data({&a, &b}, {"stsyn", "pasgd"}, PlotMetric::comm, by_comm);
  std::istringstream lines2(by_comm.str());
  std::getline(lines2, line);
  std::getline(lines2, line);
  CHECK(line == "10,0.5,7,0.9");
}
