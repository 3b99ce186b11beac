#include "ocl/splits.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>
#include <set>

#include "ocl/errors.hpp"
#include "ocl/random.hpp"

namespace ocl {

namespace {

std::vector<std::size_t> resolve(const Cohort& cohort, const std::vector<std::string>& ids) {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto idx = cohort.find(id);
    if (!idx) throw CoverageError(fmt::format("split refers to unknown subject '{}'", id));
    out.push_back(*idx);
  }
  return out;
}

}  // namespace

std::vector<std::size_t> SplitPlan::test_indices(const Cohort& cohort, std::size_t fold) const {
  return resolve(cohort, folds.at(fold));
}

std::vector<std::size_t> SplitPlan::complete_train_indices(const Cohort& cohort,
                                                           std::size_t fold) const {
  std::vector<std::string> ids;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (f != fold) ids.insert(ids.end(), folds[f].begin(), folds[f].end());
  }
  auto out = resolve(cohort, ids);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> SplitPlan::train_only_indices(const Cohort& cohort) const {
  return resolve(cohort, train_only);
}

SplitPlan make_splits(const Cohort& cohort, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError(fmt::format("need at least 2 folds, got {}", k));

  std::map<std::size_t, std::vector<std::string>> by_label;
  std::vector<std::string> complete;
  SplitPlan plan;
  for (const auto& s : cohort.subjects) {
    if (s.complete()) {
      by_label[s.label].push_back(s.id);
      complete.push_back(s.id);
    } else {
      plan.train_only.push_back(s.id);
    }
  }
  if (complete.size() < k) {
    throw CoverageError(
        fmt::format("{} complete-case subjects cannot fill {} folds", complete.size(), k));
  }
  std::sort(plan.train_only.begin(), plan.train_only.end());

  plan.stratified = std::all_of(by_label.begin(), by_label.end(),
                                [k](const auto& entry) { return entry.second.size() >= k; });
  std::vector<std::vector<std::string>> groups;
  if (plan.stratified) {
    for (auto& [label, ids] : by_label) groups.push_back(std::move(ids));
  } else {
    groups.push_back(std::move(complete));
  }

  Rng rng(seed);
  plan.folds.assign(k, {});
  std::size_t next = 0;
  for (auto& ids : groups) {
    std::sort(ids.begin(), ids.end());
    rng.shuffle(ids);
    for (auto& id : ids) {
      plan.folds[next % k].push_back(std::move(id));
      ++next;
    }
  }
  for (auto& fold : plan.folds) std::sort(fold.begin(), fold.end());
  return plan;
}

}  // namespace ocl
