#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "clad/checkpoint.hpp"
#include "clad/metrics.hpp"

namespace clad {

struct PlanReport {
  std::string dataset;
  std::string curation;
  std::size_t horizon = 0;
  MetricSet metrics;
  std::size_t num_plans = 0;
  std::size_t num_success = 0;
  bool gt_boundary = false;
  std::string macc_mode = "positional";
  std::string fingerprint;
  double task_accuracy = 0.0;
  double random_planner_sr = 0.0;
  bool use_eps = true;
  bool inject_constraints = true;

  bool operator==(const PlanReport&) const = default;
};

inline nlohmann::ordered_json to_json(const PlanReport& r) {
  nlohmann::ordered_json j;
  j["dataset"] = r.dataset;
  j["curation"] = r.curation;
  j["horizon"] = r.horizon;
  j["sr"] = r.metrics.sr;
  j["macc"] = r.metrics.macc;
  j["macc_positional"] = r.metrics.macc_positional;
  j["macc_set"] = r.metrics.macc_set;
  j["msiou"] = r.metrics.msiou;
  j["num_plans"] = r.num_plans;
  j["num_success"] = r.num_success;
  j["gt_boundary"] = r.gt_boundary;
  j["macc_mode"] = r.macc_mode;
  j["task_accuracy"] = r.task_accuracy;
  j["random_planner_sr"] = r.random_planner_sr;
  j["use_eps"] = r.use_eps;
  j["inject_constraints"] = r.inject_constraints;
  j["config_fingerprint"] = r.fingerprint;
  return j;
}

namespace detail {

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

/// Renders rows as comma-separated columns padded to a common width.
inline std::string aligned_csv(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    widths.resize(std::max(widths.size(), row.size()), 0);
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  }
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::string cell = row[i];
      if (i + 1 < row.size()) {
        cell += ',';
        cell.append(widths[i] + 1 - cell.size() + 1, ' ');
      }
      out += cell;
    }
    out += '\n';
  }
  return out;
}

}  // namespace detail

/// dataset, curation, T, SR, mAcc, mSIoU
inline std::string to_csv(const std::vector<PlanReport>& reports) {
  std::vector<std::vector<std::string>> rows{{"dataset", "curation", "T", "SR", "mAcc", "mSIoU"}};
  for (const auto& r : reports) {
    rows.push_back({r.dataset, r.curation, std::to_string(r.horizon), detail::fixed4(r.metrics.sr),
                    detail::fixed4(r.metrics.macc), detail::fixed4(r.metrics.msiou)});
  }
  return detail::aligned_csv(rows);
}

inline void write_report(const std::filesystem::path& json_path, const std::filesystem::path& csv_path,
                         const PlanReport& report) {
  write_file_atomic(json_path, to_json(report).dump(2) + "\n");
  write_file_atomic(csv_path, to_csv({report}));
}

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  MetricSet metrics;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  std::vector<AblationRow> medians;  // seed field unused

  const AblationRow& median(const std::string& variant) const {
    for (const auto& m : medians) {
      if (m.variant == variant) return m;
    }
    throw StateError("ablation table has no variant '" + variant + "'");
  }
};

inline double median_of(std::vector<double> values) {
  if (values.empty()) throw PreconditionError("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

/// variant, seed, SR, mAcc, mSIoU (median rows use seed "median").
inline std::string to_csv(const AblationTable& table) {
  std::vector<std::vector<std::string>> rows{{"variant", "seed", "SR", "mAcc", "mSIoU"}};
  for (const auto& r : table.rows) {
    rows.push_back({r.variant, std::to_string(r.seed), detail::fixed4(r.metrics.sr), detail::fixed4(r.metrics.macc),
                    detail::fixed4(r.metrics.msiou)});
  }
  for (const auto& r : table.medians) {
    rows.push_back({r.variant, "median", detail::fixed4(r.metrics.sr), detail::fixed4(r.metrics.macc),
                    detail::fixed4(r.metrics.msiou)});
  }
  return detail::aligned_csv(rows);
}

inline nlohmann::ordered_json to_json(const AblationTable& table) {
  auto row_json = [](const AblationRow& r) {
    nlohmann::ordered_json j;
    j["variant"] = r.variant;
    j["seed"] = r.seed;
    j["sr"] = r.metrics.sr;
    j["macc"] = r.metrics.macc;
    j["msiou"] = r.metrics.msiou;
    return j;
  };
  nlohmann::ordered_json j;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : table.rows) j["rows"].push_back(row_json(r));
  j["medians"] = nlohmann::ordered_json::array();
  for (const auto& r : table.medians) {
    auto m = row_json(r);
    m.erase("seed");
    j["medians"].push_back(m);
  }
  return j;
}

}  // namespace clad
