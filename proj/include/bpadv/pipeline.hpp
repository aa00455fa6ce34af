#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "bpadv/analysis.hpp"
#include "bpadv/attack.hpp"
#include "bpadv/campaign_io.hpp"
#include "bpadv/external_backend.hpp"
#include "bpadv/instances.hpp"
#include "bpadv/json_util.hpp"
#include "bpadv/surrogate.hpp"

namespace bpadv {

/// Which black-box model a run queries.
struct ModelDescriptor {
  enum class Kind { Native, Surrogate, External, Constant };
  Kind kind = Kind::Surrogate;
  std::filesystem::path path;              // native weights / surrogate file
  std::optional<SurrogateConfig> train;    // surrogate trained on the fly
  std::optional<std::size_t> fixed_length; // native only
  ExternalEndpoint endpoint;
  double p_bf = 0.5;                       // constant only

  Json to_json() const;
  static ModelDescriptor from_json(const Json& j);
};

/// Everything needed to reproduce a probe/attack run. Precedence for every
/// field: command-line flag, then BINPACK_ADVERSARY_SEED (seed only), then
/// the config file, then the default.
struct CampaignConfig {
  std::string campaign_id = "campaign";
  std::optional<std::filesystem::path> dataset_path;
  std::optional<DatasetSpec> dataset_spec;
  ModelDescriptor model;
  EaConfig ea;
  ProbeConfig probe;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  int falkenauer_exponent = 2;
  bool filter = true;

  // Execution-only settings; not part of the recorded configuration.
  unsigned jobs = 0;  // 0 = hardware concurrency
  bool timestamp = true;

  /// Copies the campaign seed into the probe and EA configs.
  void resolve_seeds();
  /// Throws ConfigError on a violated invariant or missing path.
  void validate() const;
  Json to_json() const;
  static CampaignConfig from_json(const Json& j);
  static CampaignConfig load(const std::filesystem::path& path);
};

std::unique_ptr<Backend> make_backend(const ModelDescriptor& model,
                                      const Dataset& dataset, std::ostream& log);

struct PipelineReport {
  std::size_t n_input = 0, n_kept = 0, n_removed = 0;
  std::size_t n_fragile = 0, n_runs = 0;
  std::uint64_t queries = 0;
  CampaignPaths paths;
};

/// filter -> probe -> EA, writing every artifact into config.output_dir.
PipelineReport run_pipeline(const CampaignConfig& config, bool probe_only,
                            std::ostream& log);

struct AnalysisReport {
  std::optional<CampaignSummary> summary;
  std::optional<CategoryTable> categories;
  std::vector<CorrelationRow> correlations;
  std::vector<InstanceAnalysis> instances;
};

/// Reduces the artifacts in `paths` and writes <id>.summary.json.
AnalysisReport run_analysis(const CampaignPaths& paths, bool write_timestamp);

/// KS test between each successful instance and up to `per_instance`
/// archived adversarial samples (evenly spaced through the archive);
/// writes <id>.ks.csv. Returns the number of pairs and rejections.
std::pair<std::size_t, std::size_t> run_ks_check(const CampaignPaths& paths,
                                                 std::size_t per_instance);

/// Writes <id>.<kind>.csv from the artifacts in `paths`.
std::filesystem::path run_export(const CampaignPaths& paths, PlotKind kind);

std::string summary_to_json(const AnalysisReport& report, const Json& config,
                            const std::optional<std::string>& timestamp);

std::string current_timestamp();

}  // namespace bpadv
