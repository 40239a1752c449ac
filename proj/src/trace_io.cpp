#include "stsyn/trace_io.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stsyn/config.hpp"

namespace stsyn {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json record_to_json(const RoundRecord& rec) {
  ordered_json j;
  j["j"] = rec.round;
  j["t"] = rec.round_time;
  j["t_cum"] = rec.cum_time;
  j["c"] = rec.comm;
  j["c_cum"] = rec.cum_comm;
  j["s"] = rec.uploader_count;
  j["updates"] = rec.updates;
  j["loss"] = rec.loss ? ordered_json(*rec.loss) : ordered_json(nullptr);
  j["grad_sq_norm"] =
      rec.grad_sq_norm ? ordered_json(*rec.grad_sq_norm) : ordered_json(nullptr);
  j["accuracy"] = rec.accuracy ? ordered_json(*rec.accuracy) : ordered_json(nullptr);
  j["mean_staleness"] =
      rec.mean_staleness ? ordered_json(*rec.mean_staleness) : ordered_json(nullptr);
  return j;
}

RoundRecord record_from_json(const ordered_json& j) {
  RoundRecord rec;
  rec.round = j.at("j").get<long>();
  rec.round_time = j.at("t").get<double>();
  rec.cum_time = j.at("t_cum").get<double>();
  rec.comm = j.at("c").get<long>();
  rec.cum_comm = j.at("c_cum").get<long>();
  rec.uploader_count = j.at("s").get<int>();
  rec.updates = j.at("updates").get<std::vector<int>>();
  const auto opt = [&j](const char* key) -> std::optional<double> {
    if (j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
  };
  rec.loss = opt("loss");
  rec.grad_sq_norm = opt("grad_sq_norm");
  rec.accuracy = opt("accuracy");
  rec.mean_staleness = opt("mean_staleness");
  return rec;
}

std::string csv_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

std::string iso_timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunManifest persist_trace(const Trace& trace, const std::filesystem::path& dir,
                          const std::string& started_at) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() +
                                   ": " + ec.message());

  std::string rounds_text;
  for (const RoundRecord& rec : trace.records) {
    rounds_text += record_to_json(rec).dump();
    rounds_text += "\n";
  }
  write_file(dir / "rounds.jsonl", rounds_text);

  std::string csv = "j,T_cum,C_cum,loss,grad_sq_norm,S_size,accuracy\n";
  for (const RoundRecord& rec : trace.records) {
    csv += std::to_string(rec.round) + "," + format_double(rec.cum_time) + "," +
           std::to_string(rec.cum_comm) + "," + csv_cell(rec.loss) + "," +
           csv_cell(rec.grad_sq_norm) + "," + std::to_string(rec.uploader_count) + "," +
           csv_cell(rec.accuracy) + "\n";
  }
  write_file(dir / "summary.csv", csv);

  write_file(dir / "config.cfg", canonical_config_text(trace.config));

  RunManifest manifest;
  manifest.config_hash = config_hash_hex(trace.config);
  manifest.master_seed = trace.config.master_seed;
  manifest.version = kVersionString;
  manifest.started_at = started_at.empty() ? iso_timestamp_now() : started_at;
  manifest.finished_at = iso_timestamp_now();
  manifest.rounds = static_cast<long>(trace.records.size());
  manifest.termination = termination_to_string(trace.termination);
  manifest.files = {"rounds.jsonl", "summary.csv", "config.cfg"};

  ordered_json j;
  j["config_hash"] = manifest.config_hash;
  j["master_seed"] = manifest.master_seed;
  j["version"] = manifest.version;
  j["started_at"] = manifest.started_at;
  j["finished_at"] = manifest.finished_at;
  j["rounds"] = manifest.rounds;
  j["termination"] = manifest.termination;
  j["files"] = manifest.files;
  write_file(dir / "manifest.json", j.dump(2) + "\n");

  return manifest;
}

std::vector<RoundRecord> load_trace_records(const std::filesystem::path& dir) {
  std::ifstream in(dir / "rounds.jsonl");
  if (!in) throw std::runtime_error("cannot open " + (dir / "rounds.jsonl").string());
  std::vector<RoundRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(record_from_json(ordered_json::parse(line)));
  }
  return records;
}

void emit_plot_data(const std::vector<const Trace*>& traces,
                    const std::vector<std::string>& labels, PlotMetric metric,
                    std::ostream& out) {
  if (traces.size() != labels.size()) {
    throw std::invalid_argument("emit_plot_data: one label per trace required");
  }
  size_t max_rows = 0;
  for (const Trace* t : traces) max_rows = std::max(max_rows, t->records.size());

  for (size_t i = 0; i < labels.size(); ++i) {
    if (i) out << ",";
    out << labels[i] << "_x," << labels[i] << "_y";
  }
  out << "\n";

  for (size_t row = 0; row < max_rows; ++row) {
    for (size_t i = 0; i < traces.size(); ++i) {
      if (i) out << ",";
      const auto& records = traces[i]->records;
      if (row < records.size()) {
        const RoundRecord& rec = records[row];
        out << (metric == PlotMetric::time ? format_double(rec.cum_time)
                                           : std::to_string(rec.cum_comm));
        out << ",";
        if (rec.accuracy) {
          out << format_double(*rec.accuracy);
        } else if (rec.loss) {
          out << format_double(*rec.loss);
        }
      } else {
        out << ",";
      }
    }
    out << "\n";
  }
}

}  // namespace stsyn
