#include "dcada/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <tuple>

namespace dcada {

namespace {

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string Table::to_csv() const {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv_field(cells[i]);
    os << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return os.str();
}

std::string Table::to_text() const {
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << "  ";
      os << cells[i];
      if (i + 1 < cells.size()) os << std::string(width[i] - cells[i].size(), ' ');
    }
    os << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  os << std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') << '\n';
  for (const auto& r : rows) line(r);
  return os.str();
}

Table performance_table(const std::vector<SummaryRow>& summary) {
  Table t;
  t.header = {"env", "level", "method", "runs", "failed", "reward", "reward_std", "success", "success_std",
              "progress", "progress_std"};
  for (const auto& r : summary)
    t.rows.push_back({r.env, r.hetero, r.label, std::to_string(r.runs), std::to_string(r.failed),
                      fmt(r.reward_mean), fmt(r.reward_std), fmt(r.success_mean), fmt(r.success_std),
                      fmt(r.progress_mean), fmt(r.progress_std)});
  return t;
}

Table threshold_table(const std::vector<RunRecord>& records) {
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::vector<RunRecord>> groups;
  std::map<Key, EnvKind> kinds;
  for (const auto& r : records) {
    if (!r.ok) continue;
    const Key k{std::string(to_string(r.config.env)), std::string(to_string(r.config.hetero)),
                r.config.display_label()};
    groups[k].push_back(r);
    kinds[k] = r.config.env;
  }
  Table t;
  t.header = {"env", "level", "method", "threshold", "fraction"};
  for (auto& [k, members] : groups) {
    std::sort(members.begin(), members.end(),
              [](const RunRecord& a, const RunRecord& b) { return a.config.seed.value < b.config.seed.value; });
    for (const auto& p : threshold_sensitivity(members, default_thresholds(kinds[k])))
      t.rows.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), fmt(p.threshold, 2), fmt(p.fraction)});
  }
  return t;
}

Table runtime_table(const std::vector<SummaryRow>& summary) {
  Table t;
  t.header = {"env", "level", "method", "episodes", "scalar_feedback_bytes", "wall_seconds", "steps_per_second"};
  for (const auto& r : summary)
    t.rows.push_back({r.env, r.hetero, r.label, fmt(r.episodes_mean, 1), fmt(r.bytes_mean, 0),
                      fmt(r.wall_seconds_mean, 2), fmt(r.steps_per_second_mean, 0)});
  return t;
}

std::vector<std::pair<std::string, Table>> report_tables(const std::vector<RunRecord>& records) {
  const auto summary = summarize(records);
  return {{"performance", performance_table(summary)},
          {"thresholds", threshold_table(records)},
          {"runtime", runtime_table(summary)}};
}

}  // namespace dcada
