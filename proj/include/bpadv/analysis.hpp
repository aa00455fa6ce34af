#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bpadv/attack.hpp"

namespace bpadv {

struct MaskStats {
  long sum_difference = 0;          // D: perturbed sum minus original sum
  std::size_t n_changes = 0;        // nonzero mask entries (intent)
  std::size_t effective_changes = 0;  // items whose size actually moved
  std::size_t longest_sequence = 0;   // longest run of nonzero entries
  std::size_t longest_positive_sequence = 0;  // longest run of +1 entries
  bool operator==(const MaskStats&) const = default;
};

/// Stats of the mask alone; D is the raw entry sum.
MaskStats mask_stats(const Mask& mask);
/// Stats with D and effective_changes taken from the clipped application.
MaskStats mask_stats(std::span<const int> original, const Mask& mask,
                     SizeBounds bounds);

enum class OutcomeType { T1, T2, T3 };
std::string_view to_string(OutcomeType t);

/// T1: every adversarial sample keeps the original winner; T2: every one
/// flips it; T3: both occur. Throws EmptyInputError on an empty archive.
OutcomeType classify_outcome(std::span<const MisclassType> types);
OutcomeType classify_outcome(const InstanceArchive& archive);

enum class InstanceCategory { Fragile, Perturbable, Robust };
std::string_view to_string(InstanceCategory c);

/// Linear interpolation between order statistics (h = (n - 1) q).
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

struct SpearmanResult {
  double rho = 0.0;
  double p_value = 1.0;
};

/// Average ranks for ties; two-sided p-value from the t approximation with
/// n - 2 degrees of freedom. Throws DomainError on length mismatch, n < 3
/// or a constant input (correlation undefined).
SpearmanResult spearman(std::span<const double> x, std::span<const double> y);

/// Average (fractional) ranks, 1-based.
std::vector<double> average_ranks(std::span<const double> values);

/// Regularised incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Two-sided p-value of Student's t with `df` degrees of freedom.
double student_t_two_sided(double t, double df);

/// Per-instance reduction of a finished campaign; the unit every
/// aggregate below is computed from.
struct InstanceAnalysis {
  std::string id;
  Solver winner = Solver::BF;
  bool fragile = false;
  bool attacked = false;  // EA runs were executed
  InstanceCategory category = InstanceCategory::Robust;
  std::optional<std::uint64_t> min_first_hit;  // min over runs
  std::optional<double> max_fitness;           // max best_fitness over runs
  std::size_t unique_adversarial = 0;
  std::optional<OutcomeType> outcome;          // attacked and successful
  // Medians over the instance's archived adversarial masks.
  std::optional<double> median_fitness;
  std::optional<double> median_difference;
  std::optional<double> median_changes;
  std::optional<double> median_longest_sequence;
  std::optional<double> median_longest_positive;

  bool successful() const { return attacked && max_fitness && *max_fitness > 0.0; }
};

InstanceAnalysis analyze_instance(const InstanceOutcome& outcome,
                                  const InstanceArchive& archive,
                                  SizeBounds bounds);

std::vector<InstanceAnalysis> analyze_campaign(const CampaignResult& campaign,
                                               SizeBounds bounds);

struct CampaignSummary {
  std::size_t n_instances = 0;
  std::size_t n_fragile = 0;
  std::size_t n_attacked = 0;
  std::size_t n_successful = 0;
  double success_rate = 0.0;          // percent of attacked instances
  std::optional<double> queries;      // median of per-instance min first hit
  double t1 = 0.0, t2 = 0.0, t3 = 0.0;  // percent of successful instances
  double fitness_median = 0.0, fitness_q1 = 0.0, fitness_q3 = 0.0;
  std::size_t unique_adversarial_total = 0;      // over successful instances
  std::optional<double> unique_adversarial_median;
};

/// Throws EmptyInputError when no instance was attacked by the EA.
CampaignSummary campaign_summary(std::span<const InstanceAnalysis> analyses);

struct CategoryRow {
  Solver winner;
  double robust = 0.0, perturbable = 0.0, fragile = 0.0;  // percent of all
};

struct CategoryTable {
  std::vector<std::pair<std::string, InstanceCategory>> per_instance;
  std::vector<CategoryRow> rows;  // BF then FF
};

/// Throws DomainError if a non-fragile instance was never attacked.
CategoryTable categorize(std::span<const InstanceAnalysis> analyses);

struct CorrelationRow {
  std::string statistic;
  std::size_t n = 0;
  std::optional<SpearmanResult> result;  // empty when undefined
};

/// Spearman between per-instance median adversarial fitness and the median
/// longest sequence, number of changes and sum difference, over the
/// successful attacked instances.
std::vector<CorrelationRow> fitness_correlations(
    std::span<const InstanceAnalysis> analyses);

enum class PlotKind { Trajectories, MaskHeatmap, StatsBox, ProjectionMatrix };
std::string_view to_string(PlotKind k);
PlotKind plot_kind_from_string(std::string_view s);

/// Streams one CSV (RFC 4180, CRLF, 9 significant digits) per kind.
class PlotExporter {
 public:
  PlotExporter(std::ostream& out, PlotKind kind, SizeBounds bounds);
  void add(const InstanceOutcome& outcome, const InstanceArchive& archive);

 private:
  void header(std::size_t n_items);

  std::ostream& out_;
  PlotKind kind_;
  SizeBounds bounds_;
  bool wrote_header_ = false;
  std::size_t n_items_ = 0;
};

/// Writes <dir>/<campaign_id>.<kind>.csv and returns the path.
std::filesystem::path export_plot_data(const CampaignResult& campaign,
                                       PlotKind kind,
                                       const std::filesystem::path& dir,
                                       const std::string& campaign_id,
                                       SizeBounds bounds);

std::string csv_escape(const std::string& field);

}  // namespace bpadv
