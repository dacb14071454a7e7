#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dcada/harness.hpp"

namespace dcada {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
  std::string to_text() const;
};

/// Mean +/- std of reward, success and progress per (env, level, method).
Table performance_table(const std::vector<SummaryRow>& summary);
/// Completion fraction per threshold for every (env, level, method) group.
Table threshold_table(const std::vector<RunRecord>& records);
/// Episodes, scalar-feedback bytes and throughput per group.
Table runtime_table(const std::vector<SummaryRow>& summary);

/// Named tables in a fixed order: performance, thresholds, runtime.
std::vector<std::pair<std::string, Table>> report_tables(const std::vector<RunRecord>& records);

}  // namespace dcada
