#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "bpadv/packing.hpp"

namespace bpadv {

struct ClassifierVerdict {
  double p_bf = 0.5;
  double p_ff = 0.5;
  std::uint64_t query_index = 0;

  double probability(Solver s) const { return s == Solver::BF ? p_bf : p_ff; }
  /// Argmax; std::nullopt only when both probabilities are exactly equal.
  std::optional<Solver> choice() const {
    if (p_bf > p_ff) return Solver::BF;
    if (p_ff > p_bf) return Solver::FF;
    return std::nullopt;
  }
};

/// Thread-safe query counters. total() always equals the sum of the
/// per-instance counts.
class QueryLog {
 public:
  /// Counts one query and returns its 1-based session index.
  std::uint64_t record(std::string_view instance_id);

  std::uint64_t total() const;
  std::uint64_t count(const std::string& instance_id) const;
  std::map<std::string, std::uint64_t> per_instance() const;

 private:
  mutable std::mutex mutex_;
  std::uint64_t total_ = 0;
  std::map<std::string, std::uint64_t, std::less<>> per_instance_;
};

/// Black-box probability oracle. Implementations provide p_BF; predict()
/// validates it, derives p_FF = 1 - p_BF and does the accounting.
class Backend {
 public:
  virtual ~Backend() = default;

  ClassifierVerdict predict(std::span<const int> items,
                            std::string_view instance_id = {});

  const QueryLog& queries() const { return log_; }

  /// Fixed-length backends reject other sequence lengths.
  virtual std::optional<std::size_t> expected_length() const {
    return std::nullopt;
  }

 protected:
  virtual double probability_bf(std::span<const int> items,
                                std::string_view instance_id) = 0;

 private:
  QueryLog log_;
};

/// Ignores its input.
class ConstantBackend final : public Backend {
 public:
  explicit ConstantBackend(double p_bf) : p_bf_(p_bf) {}

 protected:
  double probability_bf(std::span<const int>, std::string_view) override {
    return p_bf_;
  }

 private:
  double p_bf_;
};

/// Wraps an arbitrary deterministic function of the item sequence.
class FunctionBackend final : public Backend {
 public:
  using Fn = std::function<double(std::span<const int>)>;
  explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}

 protected:
  double probability_bf(std::span<const int> items, std::string_view) override {
    return fn_(items);
  }

 private:
  Fn fn_;
};

}  // namespace bpadv
