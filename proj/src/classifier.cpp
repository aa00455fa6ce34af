#include "bpadv/classifier.hpp"

#include <cmath>

#include "bpadv/errors.hpp"

namespace bpadv {

std::uint64_t QueryLog::record(std::string_view instance_id) {
  std::lock_guard lock(mutex_);
  auto it = per_instance_.find(instance_id);
  if (it == per_instance_.end())
    it = per_instance_.emplace(std::string(instance_id), 0).first;
  ++it->second;
  return ++total_;
}

std::uint64_t QueryLog::total() const {
  std::lock_guard lock(mutex_);
  return total_;
}

std::uint64_t QueryLog::count(const std::string& instance_id) const {
  std::lock_guard lock(mutex_);
  auto it = per_instance_.find(instance_id);
  return it == per_instance_.end() ? 0 : it->second;
}

std::map<std::string, std::uint64_t> QueryLog::per_instance() const {
  std::lock_guard lock(mutex_);
  return {per_instance_.begin(), per_instance_.end()};
}

ClassifierVerdict Backend::predict(std::span<const int> items,
                                   std::string_view instance_id) {
  if (auto n = expected_length(); n && *n != items.size())
    throw LengthMismatchError(*n, items.size());
  const double p = probability_bf(items, instance_id);
  if (!std::isfinite(p) || p < 0.0 || p > 1.0)
    throw NumericError(0, "backend returned p_bf = " + std::to_string(p));
  ClassifierVerdict v;
  v.p_bf = p;
  v.p_ff = 1.0 - p;
  v.query_index = log_.record(instance_id);
  return v;
}

}  // namespace bpadv
