#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bpadv/classifier.hpp"
#include "bpadv/instances.hpp"
#include "bpadv/packing.hpp"
#include "bpadv/random.hpp"

namespace bpadv {

/// Per-item perturbation over {-1, 0, +1}.
struct Mask {
  std::vector<std::int8_t> entries;

  Mask() = default;
  explicit Mask(std::size_t n) : entries(n, 0) {}
  explicit Mask(std::vector<std::int8_t> e) : entries(std::move(e)) {}
  static Mask from_ints(std::span<const int> values);

  std::size_t size() const { return entries.size(); }
  std::int8_t operator[](std::size_t j) const { return entries[j]; }
  bool is_valid() const;
  bool operator==(const Mask&) const = default;
};

/// Adds the mask to the original items and clamps into bounds.
Instance apply_mask(const Instance& original, const Mask& mask,
                    SizeBounds bounds);
void apply_mask_into(std::span<const int> original, const Mask& mask,
                     SizeBounds bounds, std::vector<int>& out);

enum class MisclassType {
  None,
  SameWinnerModelFlipped,     // T_SAME: true winner unchanged, model moved
  WinnerFlippedModelStatic,   // T_FLIPPED: true winner moved, model did not
};

/// "NONE", "T_SAME", "T_FLIPPED".
std::string_view to_string(MisclassType t);
MisclassType misclass_type_from_string(std::string_view s);

struct FitnessRecord {
  double fitness = -1.0;
  std::optional<Solver> perturbed_winner;  // empty when the packing ties
  Solver model_choice = Solver::BF;
  MisclassType type = MisclassType::None;
  std::uint64_t evaluation_index = 0;

  bool misclassified() const { return fitness > 0.0; }
  bool operator==(const FitnessRecord&) const = default;
};

/// Everything a fitness evaluation needs besides the mask.
struct AttackTarget {
  const LabeledInstance& original;
  Backend& model;
  Portfolio portfolio;
  SizeBounds bounds;
};

/// Perturbs once, labels the perturbed instance with both heuristics,
/// queries the model exactly once and returns f = p_losing - p_winning.
/// A tie between the heuristics scores -1 with type None.
FitnessRecord evaluate_fitness(const AttackTarget& target, const Mask& mask,
                               std::uint64_t evaluation_index = 0);

/// All-zero mask where each entry is, with probability p_init, replaced
/// by a uniform draw from {-1, 0, +1}.
Mask sample_initial_mask(std::size_t n_items, double p_init, Rng& rng);

struct ArchiveEntry {
  Mask mask;
  double fitness = 0.0;
  MisclassType type = MisclassType::None;
  bool operator==(const ArchiveEntry&) const = default;
};

/// Unique adversarial masks of one instance, in insertion order.
/// Masks are stored 2 bits per entry.
class InstanceArchive {
 public:
  explicit InstanceArchive(std::size_t n_items = 0);

  /// Adds the mask if unseen. Returns true on insertion. Requires
  /// fitness > 0.
  bool insert(const Mask& mask, double fitness, MisclassType type);
  /// Appends every entry of `other` not already present, in its order.
  void merge(const InstanceArchive& other);

  std::size_t size() const { return fitness_.size(); }
  bool empty() const { return fitness_.empty(); }
  std::size_t n_items() const { return n_items_; }
  bool contains(const Mask& mask) const;

  ArchiveEntry entry(std::size_t i) const;
  Mask mask(std::size_t i) const;
  double fitness(std::size_t i) const { return fitness_[i]; }
  MisclassType type(std::size_t i) const { return types_[i]; }

 private:
  std::span<const std::uint64_t> words(std::size_t i) const;
  void pack_into(const Mask& mask, std::uint64_t* out) const;
  std::uint64_t hash_words(const std::uint64_t* w) const;
  std::optional<std::size_t> find_packed(const std::uint64_t* w,
                                         std::uint64_t h) const;
  void append(const std::uint64_t* w, std::uint64_t h, double fitness,
              MisclassType type);

  std::size_t n_items_;
  std::size_t words_per_mask_;
  std::vector<std::uint64_t> packed_;
  std::vector<double> fitness_;
  std::vector<MisclassType> types_;
  std::unordered_multimap<std::uint64_t, std::size_t> index_;
};

/// Per-instance archives keyed by instance id. insert() is thread-safe.
class AdversarialArchive {
 public:
  AdversarialArchive() = default;
  AdversarialArchive(const AdversarialArchive& o) : archives_(o.snapshot()) {}
  AdversarialArchive(AdversarialArchive&& o) noexcept
      : archives_(std::move(o.archives_)) {}
  AdversarialArchive& operator=(AdversarialArchive o) noexcept {
    archives_ = std::move(o.archives_);
    return *this;
  }

  bool insert(const std::string& instance_id, std::size_t n_items,
              const Mask& mask, double fitness, MisclassType type);
  void merge(const std::string& instance_id, const InstanceArchive& other);

  const InstanceArchive* find(const std::string& instance_id) const;
  const std::map<std::string, InstanceArchive>& instances() const {
    return archives_;
  }
  std::size_t total_size() const;

 private:
  std::map<std::string, InstanceArchive> snapshot() const {
    std::lock_guard lock(mutex_);
    return archives_;
  }

  mutable std::mutex mutex_;
  std::map<std::string, InstanceArchive> archives_;
};

struct ProbeConfig {
  std::size_t n_masks = 500;
  double p_init = 0.3;
  std::uint64_t seed = 0;
};

struct ProbeReport {
  std::string instance_id;
  bool fragile = false;
  std::size_t hits = 0;          // sampled masks with fitness > 0
  std::size_t evaluations = 0;
  InstanceArchive adversarial{};  // unique hit masks
};

/// Random-sampling fragility probe. The mask stream is seeded by
/// (config.seed, instance id).
ProbeReport random_probe(const LabeledInstance& instance, Backend& model,
                         const ProbeConfig& config, const Portfolio& portfolio,
                         SizeBounds bounds);

struct EaConfig {
  std::size_t population_size = 50;
  std::size_t generations = 500;
  std::size_t tournament_size = 2;
  double crossover_prob = 0.9;
  /// Per-element mutation probability; 0 means 1 / n_items.
  double mutation_rate = 0.0;
  double p_init = 0.3;
  std::size_t runs_per_instance = 10;
  std::uint64_t seed = 0;
  bool stop_on_first_hit = false;

  /// Throws ConfigError on a violated invariant.
  void validate() const;
  bool operator==(const EaConfig&) const = default;
};

struct AttackRunResult {
  std::string instance_id;
  std::size_t run = 0;
  Mask best_mask;
  double best_fitness = -1.0;
  std::vector<double> trajectory;  // best fitness of each generation's population
  std::optional<std::uint64_t> first_hit_evaluation;  // 1-based
  std::uint64_t evaluations = 0;
  std::size_t hits = 0;  // unique adversarial masks found in this run

  bool operator==(const AttackRunResult&) const = default;
};

/// One generational EA run. Unique adversarial masks are added to
/// `found` when given. The PRNG stream is seeded by (seed, id, run).
AttackRunResult evolve_attack(const LabeledInstance& instance, Backend& model,
                              const EaConfig& config, const Portfolio& portfolio,
                              SizeBounds bounds, std::size_t run = 0,
                              InstanceArchive* found = nullptr);

struct CampaignSettings {
  ProbeConfig probe;
  EaConfig ea;
  Portfolio portfolio;
  SizeBounds bounds;
  unsigned jobs = 1;
  /// Skip the EA stage entirely (probe-only runs).
  bool probe_only = false;
};

struct InstanceOutcome {
  LabeledInstance instance;
  ProbeReport probe;
  std::vector<AttackRunResult> runs;  // empty for fragile instances

  bool attacked() const { return !probe.fragile; }
  bool perturbed() const;  // some EA run found fitness > 0
};

/// Receives results in dataset order as they are finalised.
class CampaignSink {
 public:
  virtual ~CampaignSink() = default;
  /// `archive` holds the probe hits for fragile instances and the merged
  /// EA hits for the others.
  virtual void on_instance(const InstanceOutcome& outcome,
                           const InstanceArchive& archive) = 0;
};

/// Probe every instance, then run the EA runs_per_instance times on each
/// non-fragile one. Deterministic for a given settings value, independent
/// of `jobs`.
void run_campaign(const std::vector<LabeledInstance>& dataset, Backend& model,
                  const CampaignSettings& settings, CampaignSink& sink);

struct CampaignResult {
  std::vector<InstanceOutcome> instances;
  AdversarialArchive archive;
};

/// In-memory variant of run_campaign.
CampaignResult attack_campaign(const std::vector<LabeledInstance>& dataset,
                               Backend& model, const CampaignSettings& settings);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, unsigned jobs,
                  const std::function<void(std::size_t)>& fn);

}  // namespace bpadv
