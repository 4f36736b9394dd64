#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bdlab/lab.hpp"

namespace bdlab::lab {

namespace {

std::string fmt_metric(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

std::optional<double> parse_metric(const std::string& s, const std::filesystem::path& path) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": bad metric value '" + s + "'");
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<SummaryStat> stat(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  SummaryStat s;
  s.count = xs.size();
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(var / static_cast<double>(xs.size()));
  return s;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string fmt_stat(const std::optional<SummaryStat>& s, bool sd) {
  if (!s) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", sd ? s->sd : s->mean);
  return buf;
}

}  // namespace

std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : rows) {
    out += r.dataset + "," + r.method + "," + r.target + "," + r.defense + "," + std::to_string(r.seed) + "," +
           fmt_metric(r.asr) + "," + fmt_metric(r.clean_acc) + "," + fmt_metric(r.irt) + "," + fmt_metric(r.rtc) +
           "\n";
  }
  return out;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << format_metrics_csv(rows);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw ParseError(path.string() + ": unexpected header, expected '" + kMetricsHeader + "'");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 9) throw ParseError(path.string() + ": expected 9 columns in '" + line + "'");
    MetricsRow r{cells[0], cells[1], cells[2], cells[3], 0, {}, {}, {}, {}};
    try {
      r.seed = std::stoull(cells[4]);
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": bad seed '" + cells[4] + "'");
    }
    r.asr = parse_metric(cells[5], path);
    r.clean_acc = parse_metric(cells[6], path);
    r.irt = parse_metric(cells[7], path);
    r.rtc = parse_metric(cells[8], path);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("summarize: no runs");
  struct Acc {
    std::string method, defense;
    std::size_t runs = 0;
    std::vector<double> asr, ca, irt, rtc;
  };
  std::vector<Acc> groups;
  for (const auto& r : rows) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Acc& a) { return a.method == r.method && a.defense == r.defense; });
    if (it == groups.end()) {
      groups.push_back({r.method, r.defense, 0, {}, {}, {}, {}});
      it = std::prev(groups.end());
    }
    ++it->runs;
    if (r.asr) it->asr.push_back(*r.asr);
    if (r.clean_acc) it->ca.push_back(*r.clean_acc);
    if (r.irt) it->irt.push_back(*r.irt);
    if (r.rtc) it->rtc.push_back(*r.rtc);
  }
  std::vector<SummaryRow> out;
  for (const auto& g : groups) {
    for (const auto* col : {&g.asr, &g.ca, &g.irt, &g.rtc}) {
      if (!col->empty() && col->size() != g.runs) {
        throw std::invalid_argument("summarize: group " + g.method + "/" + g.defense + " mixes rows with and without a metric");
      }
    }
    SummaryRow s{g.method, g.defense, g.runs, stat(g.asr), stat(g.ca), stat(g.irt), stat(g.rtc), ""};
    s.cell = (s.asr ? pct(s.asr->mean) : std::string("-")) + " | " + (s.clean_acc ? pct(s.clean_acc->mean) : "-");
    out.push_back(std::move(s));
  }
  return out;
}

std::string format_summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out =
      "method,defense,runs,asr_mean,asr_sd,clean_acc_mean,clean_acc_sd,irt_mean,irt_sd,rtc_mean,rtc_sd,cell\n";
  for (const auto& r : rows) {
    out += r.method + "," + r.defense + "," + std::to_string(r.runs);
    for (const auto* s : {&r.asr, &r.clean_acc, &r.irt, &r.rtc}) out += "," + fmt_stat(*s, false) + "," + fmt_stat(*s, true);
    out += "," + r.cell + "\n";
  }
  return out;
}

std::string format_summary_table(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-14s %-8s %5s  %-17s %-14s %-14s\n", "method", "defense", "runs", "ASR | CA",
                "IRT", "RTC");
  out << buf;
  auto pm = [](const std::optional<SummaryStat>& s) {
    if (!s) return std::string("-");
    char b[48];
    std::snprintf(b, sizeof b, "%.3f+-%.3f", s->mean, s->sd);
    return std::string(b);
  };
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-14s %-8s %5zu  %-17s %-14s %-14s\n", r.method.c_str(), r.defense.c_str(), r.runs,
                  r.cell.c_str(), pm(r.irt).c_str(), pm(r.rtc).c_str());
    out << buf;
  }
  return out.str();
}

std::string manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["engine_version"] = kEngineVersion;
  j["config_hash"] = m.config_hash;
  j["status"] = m.status;
  if (!m.failed_stage.empty()) j["failed_stage"] = m.failed_stage;
  if (!m.error.empty()) j["error"] = m.error;
  nlohmann::ordered_json resolved = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.resolved) resolved[k] = v;
  j["config"] = resolved;
  nlohmann::ordered_json stages = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.stage_seconds) stages[k] = v;
  j["stage_seconds"] = stages;
  nlohmann::ordered_json outputs = nlohmann::ordered_json::array();
  for (const auto& p : m.outputs) outputs.push_back(p.string());
  j["outputs"] = outputs;
  j["notes"] = m.notes;
  return j.dump(2) + "\n";
}

}  // namespace bdlab::lab
