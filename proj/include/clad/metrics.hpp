#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "clad/error.hpp"

namespace clad {

using Plan = std::vector<std::size_t>;

struct PlanPair {
  Plan predicted;
  Plan truth;
};

enum class MaccMode { Positional, Set };

inline const char* to_string(MaccMode mode) { return mode == MaccMode::Positional ? "positional" : "set"; }

inline MaccMode parse_macc_mode(const std::string& s) {
  if (s == "positional") return MaccMode::Positional;
  if (s == "set") return MaccMode::Set;
  throw ConfigError("unknown mAcc mode '" + s + "' (expected positional or set)");
}

namespace detail {

inline void check_pairs(const std::vector<PlanPair>& pairs, const char* metric) {
  if (pairs.empty()) throw PreconditionError(std::string(metric) + ": no plan pairs");
  for (const auto& p : pairs) {
    if (p.predicted.size() != p.truth.size() || p.truth.empty()) {
      throw DimensionError(std::string(metric) + ": predicted and true plans must have equal, non-zero length");
    }
  }
}

}  // namespace detail

/// Fraction of plans whose every action and order match.
inline double success_rate(const std::vector<PlanPair>& pairs) {
  detail::check_pairs(pairs, "success_rate");
  std::size_t hits = 0;
  for (const auto& p : pairs) hits += p.predicted == p.truth ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

/// Positional: mean over all positions of pred[t] == truth[t].
/// Set: mean over plans of |multiset intersection| / T.
inline double mean_accuracy(const std::vector<PlanPair>& pairs, MaccMode mode = MaccMode::Positional) {
  detail::check_pairs(pairs, "mean_accuracy");
  if (mode == MaccMode::Positional) {
    std::size_t hits = 0, total = 0;
    for (const auto& p : pairs) {
      for (std::size_t t = 0; t < p.truth.size(); ++t) hits += p.predicted[t] == p.truth[t] ? 1 : 0;
      total += p.truth.size();
    }
    return static_cast<double>(hits) / static_cast<double>(total);
  }
  double sum = 0.0;
  for (const auto& p : pairs) {
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t a : p.truth) ++counts[a];
    std::size_t common = 0;
    for (std::size_t a : p.predicted) {
      auto it = counts.find(a);
      if (it != counts.end() && it->second > 0) {
        --it->second;
        ++common;
      }
    }
    sum += static_cast<double>(common) / static_cast<double>(p.truth.size());
  }
  return sum / static_cast<double>(pairs.size());
}

/// Mean over plans of |set(pred) & set(truth)| / |set(pred) | set(truth)|.
inline double msiou(const std::vector<PlanPair>& pairs) {
  detail::check_pairs(pairs, "msiou");
  double sum = 0.0;
  for (const auto& p : pairs) {
    const std::set<std::size_t> pred(p.predicted.begin(), p.predicted.end());
    const std::set<std::size_t> truth(p.truth.begin(), p.truth.end());
    std::size_t inter = 0;
    for (std::size_t a : pred) inter += truth.count(a);
    const std::size_t uni = pred.size() + truth.size() - inter;
    sum += static_cast<double>(inter) / static_cast<double>(uni);
  }
  return sum / static_cast<double>(pairs.size());
}

/// Baseline-fairness protocol: first and last predicted actions are replaced
/// by the ground truth before scoring.
inline PlanPair apply_gt_boundary(const PlanPair& pair) {
  if (pair.truth.size() < 2 || pair.predicted.size() != pair.truth.size()) {
    throw PreconditionError("apply_gt_boundary: plans must have equal length of at least 2");
  }
  PlanPair out = pair;
  out.predicted.front() = pair.truth.front();
  out.predicted.back() = pair.truth.back();
  return out;
}

inline std::vector<PlanPair> apply_gt_boundary(const std::vector<PlanPair>& pairs) {
  std::vector<PlanPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(apply_gt_boundary(p));
  return out;
}

struct MetricSet {
  double sr = 0.0;
  double macc = 0.0;      // in the configured mode
  double macc_set = 0.0;  // always the set-based variant
  double macc_positional = 0.0;
  double msiou = 0.0;

  bool operator==(const MetricSet&) const = default;
};

inline MetricSet compute_metrics(const std::vector<PlanPair>& pairs, MaccMode mode) {
  MetricSet m;
  m.sr = success_rate(pairs);
  m.macc_positional = mean_accuracy(pairs, MaccMode::Positional);
  m.macc_set = mean_accuracy(pairs, MaccMode::Set);
  m.macc = mode == MaccMode::Positional ? m.macc_positional : m.macc_set;
  m.msiou = msiou(pairs);
  return m;
}

}  // namespace clad
