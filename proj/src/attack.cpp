#include "bpadv/attack.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <exception>
#include <thread>

#include "bpadv/errors.hpp"

namespace bpadv {

// ---------------------------------------------------------------- masks

Mask Mask::from_ints(std::span<const int> values) {
  Mask m(values.size());
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (values[j] < -1 || values[j] > 1)
      throw InvariantError("mask", "entry " + std::to_string(j) + " = " +
                                       std::to_string(values[j]) +
                                       " not in {-1, 0, 1}");
    m.entries[j] = static_cast<std::int8_t>(values[j]);
  }
  return m;
}

bool Mask::is_valid() const {
  return std::all_of(entries.begin(), entries.end(),
                     [](std::int8_t v) { return v >= -1 && v <= 1; });
}

void apply_mask_into(std::span<const int> original, const Mask& mask,
                     SizeBounds bounds, std::vector<int>& out) {
  if (mask.size() != original.size())
    throw LengthMismatchError(original.size(), mask.size());
  out.resize(original.size());
  for (std::size_t j = 0; j < original.size(); ++j)
    out[j] = std::clamp(original[j] + mask[j], bounds.min_size, bounds.max_size);
}

Instance apply_mask(const Instance& original, const Mask& mask,
                    SizeBounds bounds) {
  Instance out{original.id, {}};
  apply_mask_into(original.items, mask, bounds, out.items);
  return out;
}

std::string_view to_string(MisclassType t) {
  switch (t) {
    case MisclassType::SameWinnerModelFlipped: return "T_SAME";
    case MisclassType::WinnerFlippedModelStatic: return "T_FLIPPED";
    case MisclassType::None: break;
  }
  return "NONE";
}

MisclassType misclass_type_from_string(std::string_view s) {
  if (s == "T_SAME") return MisclassType::SameWinnerModelFlipped;
  if (s == "T_FLIPPED") return MisclassType::WinnerFlippedModelStatic;
  if (s == "NONE") return MisclassType::None;
  throw DomainError("unknown misclassification type '" + std::string(s) + "'");
}

// -------------------------------------------------------------- fitness

FitnessRecord evaluate_fitness(const AttackTarget& target, const Mask& mask,
                               std::uint64_t evaluation_index) {
  thread_local std::vector<int> perturbed;
  apply_mask_into(target.original.items(), mask, target.bounds, perturbed);
  FitnessRecord rec;
  rec.evaluation_index = evaluation_index;
  rec.perturbed_winner = portfolio_winner(perturbed, target.portfolio);
  const auto verdict = target.model.predict(perturbed, target.original.id());
  if (!rec.perturbed_winner) {
    rec.fitness = -1.0;
    rec.model_choice = verdict.choice().value_or(Solver::BF);
    return rec;
  }
  const Solver winner = *rec.perturbed_winner;
  rec.fitness = verdict.probability(other(winner)) - verdict.probability(winner);
  // An exact 0.5/0.5 answer is not a misclassification.
  rec.model_choice = verdict.choice().value_or(winner);
  if (rec.fitness > 0.0)
    rec.type = winner == target.original.winner
                   ? MisclassType::SameWinnerModelFlipped
                   : MisclassType::WinnerFlippedModelStatic;
  return rec;
}

Mask sample_initial_mask(std::size_t n_items, double p_init, Rng& rng) {
  Mask m(n_items);
  for (auto& e : m.entries)
    if (rng.bernoulli(p_init)) e = static_cast<std::int8_t>(rng.below(3)) - 1;
  return m;
}

// -------------------------------------------------------------- archive

InstanceArchive::InstanceArchive(std::size_t n_items)
    : n_items_(n_items), words_per_mask_(std::max<std::size_t>(1, (n_items + 31) / 32)) {}

void InstanceArchive::pack_into(const Mask& mask, std::uint64_t* out) const {
  std::fill(out, out + words_per_mask_, 0);
  for (std::size_t j = 0; j < mask.size(); ++j)
    out[j / 32] |= static_cast<std::uint64_t>(mask[j] + 1) << (2 * (j % 32));
}

std::span<const std::uint64_t> InstanceArchive::words(std::size_t i) const {
  return {packed_.data() + i * words_per_mask_, words_per_mask_};
}

std::uint64_t InstanceArchive::hash_words(const std::uint64_t* w) const {
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  for (std::size_t k = 0; k < words_per_mask_; ++k) h = splitmix64(h ^ w[k]);
  return h;
}

std::optional<std::size_t> InstanceArchive::find_packed(
    const std::uint64_t* w, std::uint64_t h) const {
  auto [lo, hi] = index_.equal_range(h);
  for (auto it = lo; it != hi; ++it)
    if (std::memcmp(packed_.data() + it->second * words_per_mask_, w,
                    words_per_mask_ * sizeof(std::uint64_t)) == 0)
      return it->second;
  return std::nullopt;
}

void InstanceArchive::append(const std::uint64_t* w, std::uint64_t h,
                             double fitness, MisclassType type) {
  const std::size_t i = fitness_.size();
  packed_.insert(packed_.end(), w, w + words_per_mask_);
  fitness_.push_back(fitness);
  types_.push_back(type);
  index_.emplace(h, i);
}

bool InstanceArchive::insert(const Mask& mask, double fitness,
                             MisclassType type) {
  if (mask.size() != n_items_) throw LengthMismatchError(n_items_, mask.size());
  if (!(fitness > 0.0))
    throw InvariantError("fitness", "archive only stores fitness > 0");
  std::uint64_t buf[64];
  std::vector<std::uint64_t> heap;
  std::uint64_t* w = buf;
  if (words_per_mask_ > 64) {
    heap.resize(words_per_mask_);
    w = heap.data();
  }
  pack_into(mask, w);
  const auto h = hash_words(w);
  if (find_packed(w, h)) return false;
  append(w, h, fitness, type);
  return true;
}

void InstanceArchive::merge(const InstanceArchive& other) {
  if (other.n_items_ != n_items_)
    throw LengthMismatchError(n_items_, other.n_items_);
  for (std::size_t i = 0; i < other.size(); ++i) {
    const std::uint64_t* w = other.packed_.data() + i * words_per_mask_;
    const auto h = hash_words(w);
    if (!find_packed(w, h)) append(w, h, other.fitness_[i], other.types_[i]);
  }
}

bool InstanceArchive::contains(const Mask& mask) const {
  if (mask.size() != n_items_) return false;
  std::vector<std::uint64_t> w(words_per_mask_);
  pack_into(mask, w.data());
  return find_packed(w.data(), hash_words(w.data())).has_value();
}

Mask InstanceArchive::mask(std::size_t i) const {
  const auto w = words(i);
  Mask m(n_items_);
  for (std::size_t j = 0; j < n_items_; ++j)
    m.entries[j] = static_cast<std::int8_t>((w[j / 32] >> (2 * (j % 32))) & 3) - 1;
  return m;
}

ArchiveEntry InstanceArchive::entry(std::size_t i) const {
  return {mask(i), fitness_[i], types_[i]};
}

bool AdversarialArchive::insert(const std::string& instance_id,
                                std::size_t n_items, const Mask& mask,
                                double fitness, MisclassType type) {
  std::lock_guard lock(mutex_);
  auto it = archives_.try_emplace(instance_id, n_items).first;
  return it->second.insert(mask, fitness, type);
}

void AdversarialArchive::merge(const std::string& instance_id,
                               const InstanceArchive& other) {
  std::lock_guard lock(mutex_);
  auto it = archives_.try_emplace(instance_id, other.n_items()).first;
  it->second.merge(other);
}

const InstanceArchive* AdversarialArchive::find(
    const std::string& instance_id) const {
  std::lock_guard lock(mutex_);
  auto it = archives_.find(instance_id);
  return it == archives_.end() ? nullptr : &it->second;
}

std::size_t AdversarialArchive::total_size() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& [id, a] : archives_) n += a.size();
  return n;
}

// ---------------------------------------------------------------- probe

namespace {
constexpr std::uint64_t kProbeSalt = 0x70726f6265ULL;  // "probe"
}

ProbeReport random_probe(const LabeledInstance& instance, Backend& model,
                         const ProbeConfig& config, const Portfolio& portfolio,
                         SizeBounds bounds) {
  if (config.p_init < 0.0 || config.p_init > 1.0)
    throw ConfigError("probe p_init must lie in [0, 1]");
  ProbeReport report{instance.id(), false, 0, 0,
                     InstanceArchive(instance.items().size())};
  Rng rng(derive_seed(config.seed ^ kProbeSalt, instance.id(), 0));
  const AttackTarget target{instance, model, portfolio, bounds};
  for (std::size_t k = 0; k < config.n_masks; ++k) {
    const Mask m = sample_initial_mask(instance.items().size(), config.p_init, rng);
    const auto rec = evaluate_fitness(target, m, k + 1);
    ++report.evaluations;
    if (rec.misclassified()) {
      ++report.hits;
      report.adversarial.insert(m, rec.fitness, rec.type);
    }
  }
  report.fragile = report.hits > 0;
  return report;
}

// ------------------------------------------------------------------- EA

void EaConfig::validate() const {
  if (population_size < 2) throw ConfigError("population_size must be >= 2");
  if (tournament_size < 1) throw ConfigError("tournament_size must be >= 1");
  if (crossover_prob < 0.0 || crossover_prob > 1.0)
    throw ConfigError("crossover_prob must lie in [0, 1]");
  if (mutation_rate < 0.0 || mutation_rate > 1.0)
    throw ConfigError("mutation_rate must lie in [0, 1]");
  if (p_init < 0.0 || p_init > 1.0) throw ConfigError("p_init must lie in [0, 1]");
  if (runs_per_instance < 1) throw ConfigError("runs_per_instance must be >= 1");
}

namespace {

// Best of `size` uniformly drawn candidates; the lower index wins ties.
std::size_t tournament(std::span<const double> fitness, std::size_t size,
                       Rng& rng) {
  std::size_t best = rng.below(fitness.size());
  for (std::size_t k = 1; k < size; ++k) {
    const std::size_t c = rng.below(fitness.size());
    if (fitness[c] > fitness[best] || (fitness[c] == fitness[best] && c < best))
      best = c;
  }
  return best;
}

struct StopRun {};

}  // namespace

AttackRunResult evolve_attack(const LabeledInstance& instance, Backend& model,
                              const EaConfig& config, const Portfolio& portfolio,
                              SizeBounds bounds, std::size_t run,
                              InstanceArchive* found) {
  config.validate();
  const std::size_t n = instance.items().size();
  const std::size_t pop_size = config.population_size;
  const double mutation_rate =
      config.mutation_rate > 0.0 ? config.mutation_rate : 1.0 / double(n);

  AttackRunResult result;
  result.instance_id = instance.id();
  result.run = run;
  result.best_mask = Mask(n);
  result.trajectory.reserve(config.generations + 1);

  Rng rng(derive_seed(config.seed, instance.id(), run));
  const AttackTarget target{instance, model, portfolio, bounds};
  InstanceArchive local(n);

  std::vector<Mask> population(pop_size), offspring(pop_size);
  std::vector<double> fitness(pop_size);

  auto evaluate_all = [&](const std::vector<Mask>& masks) {
    double gen_best = -2.0;
    for (std::size_t i = 0; i < masks.size(); ++i) {
      const auto rec = evaluate_fitness(target, masks[i], ++result.evaluations);
      fitness[i] = rec.fitness;
      gen_best = std::max(gen_best, rec.fitness);
      if (rec.fitness > result.best_fitness || result.evaluations == 1) {
        result.best_fitness = rec.fitness;
        result.best_mask = masks[i];
      }
      if (rec.misclassified()) {
        if (!result.first_hit_evaluation)
          result.first_hit_evaluation = result.evaluations;
        local.insert(masks[i], rec.fitness, rec.type);
        if (config.stop_on_first_hit) {
          result.trajectory.push_back(gen_best);
          throw StopRun{};
        }
      }
    }
    result.trajectory.push_back(gen_best);
  };

  try {
    for (auto& m : population) m = sample_initial_mask(n, config.p_init, rng);
    evaluate_all(population);

    for (std::size_t gen = 0; gen < config.generations; ++gen) {
      for (std::size_t i = 0; i < pop_size; ++i)
        offspring[i] = population[tournament(fitness, config.tournament_size, rng)];
      // Pair parents in selection order; an odd last parent is copied.
      for (std::size_t i = 0; i + 1 < pop_size; i += 2) {
        if (n < 2 || !rng.bernoulli(config.crossover_prob)) continue;
        const std::size_t cut = 1 + rng.below(n - 1);
        std::swap_ranges(offspring[i].entries.begin() + static_cast<std::ptrdiff_t>(cut),
                         offspring[i].entries.end(),
                         offspring[i + 1].entries.begin() + static_cast<std::ptrdiff_t>(cut));
      }
      for (auto& child : offspring)
        for (auto& e : child.entries)
          if (rng.bernoulli(mutation_rate))
            e = static_cast<std::int8_t>(rng.below(3)) - 1;
      population.swap(offspring);
      evaluate_all(population);
    }
  } catch (const StopRun&) {
  }

  result.hits = local.size();
  if (found) found->merge(local);
  return result;
}

bool InstanceOutcome::perturbed() const {
  return std::any_of(runs.begin(), runs.end(),
                     [](const AttackRunResult& r) { return r.best_fitness > 0.0; });
}

// ------------------------------------------------------------- campaign

void parallel_for(std::size_t n, unsigned jobs,
                  const std::function<void(std::size_t)>& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (unsigned t = 0; t < jobs; ++t)
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

void run_campaign(const std::vector<LabeledInstance>& dataset, Backend& model,
                  const CampaignSettings& settings, CampaignSink& sink) {
  if (!settings.probe_only) settings.ea.validate();
  const unsigned jobs = std::max(1u, settings.jobs);
  const std::size_t runs = settings.ea.runs_per_instance;

  // Windows of instances keep memory bounded while emitting in order.
  const std::size_t window = std::max<std::size_t>(1, jobs) * 4;
  for (std::size_t start = 0; start < dataset.size(); start += window) {
    const std::size_t end = std::min(dataset.size(), start + window);
    std::vector<InstanceOutcome> outcomes(end - start);
    parallel_for(end - start, jobs, [&](std::size_t k) {
      const auto& inst = dataset[start + k];
      outcomes[k].instance = inst;
      outcomes[k].probe = random_probe(inst, model, settings.probe,
                                       settings.portfolio, settings.bounds);
    });

    // (instance, run) tasks for the non-fragile instances of this window.
    std::vector<std::pair<std::size_t, std::size_t>> tasks;
    if (!settings.probe_only)
      for (std::size_t k = 0; k < outcomes.size(); ++k)
        if (!outcomes[k].probe.fragile) {
          outcomes[k].runs.resize(runs);
          for (std::size_t r = 0; r < runs; ++r) tasks.emplace_back(k, r);
        }
    std::vector<InstanceArchive> run_archives;
    run_archives.reserve(tasks.size());
    for (const auto& [k, r] : tasks)
      run_archives.emplace_back(dataset[start + k].items().size());
    parallel_for(tasks.size(), jobs, [&](std::size_t t) {
      const auto [k, r] = tasks[t];
      outcomes[k].runs[r] =
          evolve_attack(dataset[start + k], model, settings.ea,
                        settings.portfolio, settings.bounds, r, &run_archives[t]);
    });

    std::size_t t = 0;
    for (auto& outcome : outcomes) {
      if (outcome.probe.fragile || settings.probe_only) {
        sink.on_instance(outcome, outcome.probe.adversarial);
        continue;
      }
      InstanceArchive merged(outcome.instance.items().size());
      for (std::size_t r = 0; r < outcome.runs.size(); ++r, ++t)
        merged.merge(run_archives[t]);
      sink.on_instance(outcome, merged);
    }
  }
}

namespace {

class CollectingSink final : public CampaignSink {
 public:
  explicit CollectingSink(CampaignResult& out) : out_(out) {}
  void on_instance(const InstanceOutcome& outcome,
                   const InstanceArchive& archive) override {
    out_.instances.push_back(outcome);
    if (!archive.empty()) out_.archive.merge(outcome.instance.id(), archive);
  }

 private:
  CampaignResult& out_;
};

}  // namespace

CampaignResult attack_campaign(const std::vector<LabeledInstance>& dataset,
                               Backend& model, const CampaignSettings& settings) {
  CampaignResult result;
  CollectingSink sink(result);
  run_campaign(dataset, model, settings, sink);
  return result;
}

}  // namespace bpadv
