#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bpadv/packing.hpp"

namespace bpadv {

class Backend;

/// An ordered sequence of integer item sizes. Order is part of the identity.
struct Instance {
  std::string id;
  std::vector<int> items;

  std::size_t n_items() const { return items.size(); }
  bool operator==(const Instance&) const = default;
};

struct LabeledInstance {
  Instance instance;
  double o_bf = 0.0;
  double o_ff = 0.0;
  Solver winner = Solver::BF;

  const std::string& id() const { return instance.id; }
  const std::vector<int>& items() const { return instance.items; }
  bool operator==(const LabeledInstance&) const = default;
};

/// Inclusive range of admissible item sizes.
struct SizeBounds {
  int min_size = 20;
  int max_size = 100;
};

enum class SizeDistribution { Uniform, TruncatedNormal };

struct DatasetSpec {
  std::size_t n_instances = 2000;
  std::size_t n_items = 120;
  int min_size = 20;
  int max_size = 100;
  int bin_capacity = 150;
  SizeDistribution distribution = SizeDistribution::Uniform;
  double mean = 60.0;     // truncated normal only
  double stddev = 20.0;   // truncated normal only
  bool balance = true;
  std::uint64_t seed = 0;

  SizeBounds bounds() const { return {min_size, max_size}; }
  /// Throws InvariantError naming the first bad field.
  void validate() const;
  bool operator==(const DatasetSpec&) const = default;
};

/// A dataset as stored on disk: optional generating spec plus records.
struct Dataset {
  std::optional<DatasetSpec> spec;
  std::vector<LabeledInstance> instances;

  SizeBounds bounds() const { return spec ? spec->bounds() : SizeBounds{}; }
  int capacity() const { return spec ? spec->bin_capacity : 150; }
  bool operator==(const Dataset&) const = default;
};

/// Label an instance with both objectives; std::nullopt on a tie.
std::optional<LabeledInstance> label_instance(Instance instance,
                                              const Portfolio& portfolio);

/// Draws candidates until `spec.n_instances` strict-winner instances exist
/// (half per winner when balanced). Pure function of the spec.
/// Throws GenerationExhaustedError after 1000 * n_instances draws.
Dataset generate_dataset(const DatasetSpec& spec, const Portfolio& portfolio);

/// Same, with the portfolio derived from the spec's capacity and k = 2.
Dataset generate_dataset(const DatasetSpec& spec);

std::string dataset_spec_to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const std::string& text);

/// One record line, without trailing newline.
std::string format_record(const LabeledInstance& rec);

void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset read_dataset(std::istream& in);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Splits a dataset by whether the model's argmax matches the stored
/// winner. One query per instance.
struct FilterResult {
  std::vector<LabeledInstance> kept;
  std::vector<LabeledInstance> removed;
};
FilterResult filter_correctly_classified(
    const std::vector<LabeledInstance>& dataset, Backend& model);

/// Checks item bounds, objective ranges and label consistency.
void validate_record(const LabeledInstance& rec, SizeBounds bounds);

}  // namespace bpadv
