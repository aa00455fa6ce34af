#include "bpadv/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include "bpadv/errors.hpp"

namespace bpadv {

// ----------------------------------------------------------- mask stats

namespace {

void run_lengths(const Mask& mask, MaskStats& s) {
  std::size_t run = 0, pos_run = 0;
  for (auto e : mask.entries) {
    run = e != 0 ? run + 1 : 0;
    pos_run = e > 0 ? pos_run + 1 : 0;
    s.longest_sequence = std::max(s.longest_sequence, run);
    s.longest_positive_sequence = std::max(s.longest_positive_sequence, pos_run);
    if (e != 0) ++s.n_changes;
  }
}

}  // namespace

MaskStats mask_stats(const Mask& mask) {
  MaskStats s;
  run_lengths(mask, s);
  for (auto e : mask.entries) s.sum_difference += e;
  s.effective_changes = s.n_changes;
  return s;
}

MaskStats mask_stats(std::span<const int> original, const Mask& mask,
                     SizeBounds bounds) {
  if (original.size() != mask.size())
    throw LengthMismatchError(original.size(), mask.size());
  MaskStats s;
  run_lengths(mask, s);
  for (std::size_t j = 0; j < original.size(); ++j) {
    const int moved =
        std::clamp(original[j] + mask[j], bounds.min_size, bounds.max_size) -
        original[j];
    s.sum_difference += moved;
    if (moved != 0) ++s.effective_changes;
  }
  return s;
}

// ------------------------------------------------------------- outcomes

std::string_view to_string(OutcomeType t) {
  switch (t) {
    case OutcomeType::T1: return "T1";
    case OutcomeType::T2: return "T2";
    case OutcomeType::T3: break;
  }
  return "T3";
}

OutcomeType classify_outcome(std::span<const MisclassType> types) {
  if (types.empty())
    throw EmptyInputError("classify_outcome: no adversarial samples");
  bool same = false, flipped = false;
  for (auto t : types) {
    if (t == MisclassType::SameWinnerModelFlipped) same = true;
    else if (t == MisclassType::WinnerFlippedModelStatic) flipped = true;
    else throw InvariantError("type", "archived sample without a misclassification type");
  }
  if (same && flipped) return OutcomeType::T3;
  return same ? OutcomeType::T1 : OutcomeType::T2;
}

OutcomeType classify_outcome(const InstanceArchive& archive) {
  std::vector<MisclassType> types(archive.size());
  for (std::size_t i = 0; i < archive.size(); ++i) types[i] = archive.type(i);
  return classify_outcome(types);
}

std::string_view to_string(InstanceCategory c) {
  switch (c) {
    case InstanceCategory::Fragile: return "FRAGILE";
    case InstanceCategory::Perturbable: return "PERTURBABLE";
    case InstanceCategory::Robust: break;
  }
  return "ROBUST";
}

// ----------------------------------------------------------- statistics

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw EmptyInputError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw DomainError("spearman: samples differ in length");
  if (x.size() < 3) throw DomainError("spearman: need at least 3 pairs");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw DomainError("spearman: correlation undefined for a constant sample");
  SpearmanResult r;
  r.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (std::fabs(r.rho) >= 1.0) {
    r.p_value = 0.0;
  } else {
    const double t = r.rho * std::sqrt((n - 2.0) / (1.0 - r.rho * r.rho));
    r.p_value = student_t_two_sided(t, n - 2.0);
  }
  return r;
}

// ----------------------------------------------------- campaign reduction

InstanceAnalysis analyze_instance(const InstanceOutcome& outcome,
                                  const InstanceArchive& archive,
                                  SizeBounds bounds) {
  InstanceAnalysis a;
  a.id = outcome.instance.id();
  a.winner = outcome.instance.winner;
  a.fragile = outcome.probe.fragile;
  a.attacked = !outcome.runs.empty();
  a.unique_adversarial = archive.size();
  for (const auto& run : outcome.runs) {
    if (run.first_hit_evaluation)
      a.min_first_hit = a.min_first_hit
                            ? std::min(*a.min_first_hit, *run.first_hit_evaluation)
                            : *run.first_hit_evaluation;
    a.max_fitness = a.max_fitness ? std::max(*a.max_fitness, run.best_fitness)
                                  : run.best_fitness;
  }
  if (a.fragile)
    a.category = InstanceCategory::Fragile;
  else if (a.max_fitness && *a.max_fitness > 0.0)
    a.category = InstanceCategory::Perturbable;
  else
    a.category = InstanceCategory::Robust;

  if (!archive.empty()) {
    if (a.attacked) a.outcome = classify_outcome(archive);
    std::vector<double> fit, diff, changes, longest, positive;
    for (std::size_t i = 0; i < archive.size(); ++i) {
      const auto s = mask_stats(outcome.instance.items(), archive.mask(i), bounds);
      fit.push_back(archive.fitness(i));
      diff.push_back(static_cast<double>(s.sum_difference));
      changes.push_back(static_cast<double>(s.n_changes));
      longest.push_back(static_cast<double>(s.longest_sequence));
      positive.push_back(static_cast<double>(s.longest_positive_sequence));
    }
    a.median_fitness = median(std::move(fit));
    a.median_difference = median(std::move(diff));
    a.median_changes = median(std::move(changes));
    a.median_longest_sequence = median(std::move(longest));
    a.median_longest_positive = median(std::move(positive));
  }
  return a;
}

std::vector<InstanceAnalysis> analyze_campaign(const CampaignResult& campaign,
                                               SizeBounds bounds) {
  std::vector<InstanceAnalysis> out;
  out.reserve(campaign.instances.size());
  for (const auto& outcome : campaign.instances) {
    const InstanceArchive* archive = campaign.archive.find(outcome.instance.id());
    const InstanceArchive empty(outcome.instance.items().size());
    out.push_back(analyze_instance(outcome, archive ? *archive : empty, bounds));
  }
  return out;
}

CampaignSummary campaign_summary(std::span<const InstanceAnalysis> analyses) {
  CampaignSummary s;
  s.n_instances = analyses.size();
  std::vector<double> first_hits, max_fitness, unique;
  std::size_t t[3] = {0, 0, 0};
  for (const auto& a : analyses) {
    if (a.fragile) ++s.n_fragile;
    if (!a.attacked) continue;
    ++s.n_attacked;
    if (a.max_fitness) max_fitness.push_back(*a.max_fitness);
    if (!a.successful()) continue;
    ++s.n_successful;
    if (a.min_first_hit) first_hits.push_back(static_cast<double>(*a.min_first_hit));
    if (a.outcome) ++t[static_cast<int>(*a.outcome)];
    s.unique_adversarial_total += a.unique_adversarial;
    unique.push_back(static_cast<double>(a.unique_adversarial));
  }
  if (s.n_attacked == 0)
    throw EmptyInputError("campaign has no EA-attacked instances");
  s.success_rate = 100.0 * static_cast<double>(s.n_successful) /
                   static_cast<double>(s.n_attacked);
  if (!first_hits.empty()) s.queries = median(first_hits);
  if (!unique.empty()) s.unique_adversarial_median = median(unique);
  if (s.n_successful > 0) {
    const double n = static_cast<double>(s.n_successful);
    s.t1 = 100.0 * static_cast<double>(t[0]) / n;
    s.t2 = 100.0 * static_cast<double>(t[1]) / n;
    s.t3 = 100.0 * static_cast<double>(t[2]) / n;
  }
  s.fitness_median = quantile(max_fitness, 0.5);
  s.fitness_q1 = quantile(max_fitness, 0.25);
  s.fitness_q3 = quantile(max_fitness, 0.75);
  return s;
}

CategoryTable categorize(std::span<const InstanceAnalysis> analyses) {
  CategoryTable table;
  std::size_t counts[2][3] = {{0, 0, 0}, {0, 0, 0}};
  for (const auto& a : analyses) {
    if (!a.fragile && !a.attacked)
      throw DomainError("instance " + a.id + " is neither fragile nor attacked");
    table.per_instance.emplace_back(a.id, a.category);
    ++counts[a.winner == Solver::BF ? 0 : 1][static_cast<int>(a.category)];
  }
  const double n = analyses.empty() ? 1.0 : static_cast<double>(analyses.size());
  for (int w = 0; w < 2; ++w) {
    CategoryRow row{w == 0 ? Solver::BF : Solver::FF};
    row.fragile = 100.0 * static_cast<double>(counts[w][0]) / n;
    row.perturbable = 100.0 * static_cast<double>(counts[w][1]) / n;
    row.robust = 100.0 * static_cast<double>(counts[w][2]) / n;
    table.rows.push_back(row);
  }
  return table;
}

std::vector<CorrelationRow> fitness_correlations(
    std::span<const InstanceAnalysis> analyses) {
  std::vector<double> fit, longest, changes, diff;
  for (const auto& a : analyses) {
    if (!a.successful() || !a.median_fitness) continue;
    fit.push_back(*a.median_fitness);
    longest.push_back(*a.median_longest_sequence);
    changes.push_back(*a.median_changes);
    diff.push_back(*a.median_difference);
  }
  std::vector<CorrelationRow> rows;
  const std::pair<const char*, const std::vector<double>*> stats[] = {
      {"longest_sequence", &longest},
      {"n_changes", &changes},
      {"sum_difference", &diff}};
  for (auto [name, values] : stats) {
    CorrelationRow row{name, fit.size(), std::nullopt};
    try {
      row.result = spearman(fit, *values);
    } catch (const DomainError&) {
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ------------------------------------------------------------------ CSV

std::string_view to_string(PlotKind k) {
  switch (k) {
    case PlotKind::Trajectories: return "trajectories";
    case PlotKind::MaskHeatmap: return "mask_heatmap";
    case PlotKind::StatsBox: return "stats_box";
    case PlotKind::ProjectionMatrix: break;
  }
  return "projection_matrix";
}

PlotKind plot_kind_from_string(std::string_view s) {
  for (auto k : {PlotKind::Trajectories, PlotKind::MaskHeatmap,
                 PlotKind::StatsBox, PlotKind::ProjectionMatrix})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown export kind '" + std::string(s) + "'");
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

namespace {

std::string csv_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

constexpr const char* kEol = "\r\n";

}  // namespace

PlotExporter::PlotExporter(std::ostream& out, PlotKind kind, SizeBounds bounds)
    : out_(out), kind_(kind), bounds_(bounds) {
  if (kind_ == PlotKind::Trajectories || kind_ == PlotKind::StatsBox)
    header(0);
}

void PlotExporter::header(std::size_t n_items) {
  wrote_header_ = true;
  n_items_ = n_items;
  switch (kind_) {
    case PlotKind::Trajectories:
      out_ << "instance,run,generation,best_fitness" << kEol;
      break;
    case PlotKind::StatsBox:
      out_ << "instance,mask,fitness,type,sum_difference,n_changes,"
              "effective_changes,longest_sequence,longest_positive_sequence"
           << kEol;
      break;
    case PlotKind::MaskHeatmap:
      out_ << "instance,mask";
      for (std::size_t j = 0; j < n_items; ++j) out_ << ",m" << j;
      out_ << kEol;
      break;
    case PlotKind::ProjectionMatrix:
      for (std::size_t j = 0; j < n_items; ++j) out_ << "item_" << j << ',';
      out_ << "winner,category" << kEol;
      break;
  }
}

void PlotExporter::add(const InstanceOutcome& outcome,
                       const InstanceArchive& archive) {
  const auto& inst = outcome.instance;
  const std::string id = csv_escape(inst.id());
  if (!wrote_header_) header(inst.items().size());
  if ((kind_ == PlotKind::MaskHeatmap || kind_ == PlotKind::ProjectionMatrix) &&
      inst.items().size() != n_items_)
    throw LengthMismatchError(n_items_, inst.items().size());

  switch (kind_) {
    case PlotKind::Trajectories:
      for (const auto& run : outcome.runs)
        for (std::size_t g = 0; g < run.trajectory.size(); ++g)
          out_ << id << ',' << run.run << ',' << g << ','
               << csv_double(run.trajectory[g]) << kEol;
      break;
    case PlotKind::MaskHeatmap:
      for (std::size_t i = 0; i < archive.size(); ++i) {
        out_ << id << ',' << i;
        for (auto e : archive.mask(i).entries) out_ << ',' << int(e);
        out_ << kEol;
      }
      break;
    case PlotKind::StatsBox:
      for (std::size_t i = 0; i < archive.size(); ++i) {
        const auto s = mask_stats(inst.items(), archive.mask(i), bounds_);
        out_ << id << ',' << i << ',' << csv_double(archive.fitness(i)) << ','
             << to_string(archive.type(i)) << ',' << s.sum_difference << ','
             << s.n_changes << ',' << s.effective_changes << ','
             << s.longest_sequence << ',' << s.longest_positive_sequence << kEol;
      }
      break;
    case PlotKind::ProjectionMatrix: {
      for (int v : inst.items()) out_ << v << ',';
      const auto a = analyze_instance(outcome, archive, bounds_);
      out_ << to_string(inst.winner) << ','
           << (a.fragile || a.attacked ? to_string(a.category) : "UNATTACKED")
           << kEol;
      break;
    }
  }
}

std::filesystem::path export_plot_data(const CampaignResult& campaign,
                                       PlotKind kind,
                                       const std::filesystem::path& dir,
                                       const std::string& campaign_id,
                                       SizeBounds bounds) {
  const auto path = dir / (campaign_id + "." + std::string(to_string(kind)) + ".csv");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  PlotExporter exporter(out, kind, bounds);
  for (const auto& outcome : campaign.instances) {
    const InstanceArchive* archive = campaign.archive.find(outcome.instance.id());
    exporter.add(outcome, archive ? *archive
                                  : InstanceArchive(outcome.instance.items().size()));
  }
  if (!out) throw Error("write failed: " + path.string());
  return path;
}

}  // namespace bpadv
