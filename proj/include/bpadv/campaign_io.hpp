#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "bpadv/analysis.hpp"
#include "bpadv/attack.hpp"
#include "bpadv/json_util.hpp"

namespace bpadv {

/// First line of every JSONL artifact: the resolved run configuration and,
/// unless suppressed, a wall-clock timestamp.
struct ArtifactHeader {
  Json config;
  std::optional<std::string> timestamp;

  std::string line() const;
};

/// Paths of the artifacts a campaign writes into one directory.
struct CampaignPaths {
  std::filesystem::path dir;
  std::string id;

  std::filesystem::path dataset() const { return file("dataset.jsonl"); }
  std::filesystem::path removed() const { return file("removed.jsonl"); }
  std::filesystem::path probe() const { return file("probe.jsonl"); }
  std::filesystem::path campaign() const { return file("campaign.jsonl"); }
  std::filesystem::path archive() const { return file("archive.jsonl"); }
  std::filesystem::path summary() const { return file("summary.json"); }
  std::filesystem::path ks() const { return file("ks.csv"); }
  std::filesystem::path csv(PlotKind k) const {
    return file(std::string(to_string(k)) + ".csv");
  }
  std::filesystem::path file(const std::string& suffix) const {
    return dir / (id + "." + suffix);
  }
};

std::string format_run_record(const AttackRunResult& run);
std::string format_probe_record(const ProbeReport& probe);
/// Masks are stored as one character per entry: '-', '0' or '+'.
std::string encode_mask(const Mask& mask);
Mask decode_mask(std::string_view text, std::size_t line = 0);

std::string format_archive_record(const std::string& instance_id,
                                  const Mask& mask, double fitness,
                                  MisclassType type);

AttackRunResult parse_run_record(const Json& j);

/// Writes probe, campaign and archive files as instances complete.
class FileCampaignSink final : public CampaignSink {
 public:
  FileCampaignSink(const CampaignPaths& paths, const ArtifactHeader& header);
  void on_instance(const InstanceOutcome& outcome,
                   const InstanceArchive& archive) override;
  void close();

  std::size_t instances_written() const { return n_instances_; }
  std::size_t runs_written() const { return n_runs_; }

 private:
  std::ofstream probe_, campaign_, archive_;
  std::size_t n_instances_ = 0, n_runs_ = 0;
};

/// Replays a campaign from its files, one instance at a time and in dataset
/// order, without holding more than one instance's archive in memory.
/// Throws ParseError on malformed or out-of-order records.
void read_campaign(const CampaignPaths& paths,
                   const std::function<void(const InstanceOutcome&,
                                            const InstanceArchive&)>& visit,
                   Json* config = nullptr);

/// Fully materialised variant of read_campaign.
CampaignResult load_campaign(const CampaignPaths& paths, Json* config = nullptr);

}  // namespace bpadv
