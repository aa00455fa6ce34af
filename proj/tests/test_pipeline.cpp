#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bpadv/errors.hpp"
#include "bpadv/pipeline.hpp"

using namespace bpadv;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("bpadv_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(BPADV_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

CampaignConfig tiny_config(const fs::path& out) {
  CampaignConfig c;
  DatasetSpec spec;
  spec.n_instances = 6;
  spec.n_items = 24;
  spec.seed = 2;
  c.dataset_spec = spec;
  c.model.kind = ModelDescriptor::Kind::Surrogate;
  c.model.train = SurrogateConfig{};
  c.model.train->epochs = 100;
  c.ea.generations = 10;
  c.ea.runs_per_instance = 2;
  c.probe.n_masks = 30;
  c.output_dir = out;
  c.campaign_id = "tiny";
  c.seed = 5;
  c.timestamp = false;
  c.jobs = 2;
  return c;
}

}  // namespace

TEST_CASE("config round trips through JSON") {
  auto c = tiny_config("x");
  c.resolve_seeds();
  auto back = CampaignConfig::from_json(c.to_json());
  back.resolve_seeds();
  CHECK(back.to_json() == c.to_json());
  CHECK(back.ea == c.ea);
}

TEST_CASE("config errors") {
  auto c = tiny_config("x");
  c.dataset_path = "also-a-path";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config("x");
  c.ea.population_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(CampaignConfig::from_json(Json{{"model", {{"type", "quantum"}}}}), ConfigError);
}

TEST_CASE("pipeline writes every artifact and they embed the config") {
  TempDir dir("pipeline");
  std::ostringstream log;
  const auto report = run_pipeline(tiny_config(dir.path), false, log);
  CHECK(report.n_input == 6);
  CHECK(report.n_kept + report.n_removed == 6);
  for (const auto& p : {report.paths.dataset(), report.paths.probe(),
                        report.paths.campaign(), report.paths.archive()}) {
    std::ifstream in(p);
    std::string first;
    std::getline(in, first);
    CHECK(first.find("\"config\"") != std::string::npos);
    CHECK(first.find("\"seed\":5") != std::string::npos);
    CHECK(first.find("timestamp") == std::string::npos);
  }
  run_analysis(report.paths, false);
  CHECK(Json::parse(slurp(report.paths.summary())).contains("config"));
  const auto csv = run_export(report.paths, PlotKind::ProjectionMatrix);
  CHECK(fs::exists(csv));
}

TEST_CASE("probe-only runs write no EA records") {
  TempDir dir("probe_only");
  std::ostringstream log;
  auto c = tiny_config(dir.path);
  c.model.kind = ModelDescriptor::Kind::Constant;
  c.model.p_bf = 0.5;
  c.filter = false;
  const auto report = run_pipeline(c, true, log);
  CHECK(report.n_runs == 0);
  std::ifstream in(report.paths.campaign());
  std::string line;
  std::size_t records = 0;
  while (std::getline(in, line)) records += line.find("\"instance\"") != std::string::npos;
  CHECK(records == 0);
}

TEST_CASE("cli exit codes") {
  TempDir dir("cli_codes");
  const auto d = dir.path.string();
  CHECK(cli("generate") == 2);
  CHECK(cli("generate -n 3 -o " + d + "/odd.jsonl") == 2);
  CHECK(cli("generate -n 4 --items 10 --seed 1 -o " + d + "/ds.jsonl") == 0);
  CHECK(cli("frobnicate") == 2);
  CHECK(cli("attack -d " + d + "/ds.jsonl -o " + d + " --external /nonexistent/model --no-filter") == 1);
  CHECK(cli("attack -d " + d + "/missing.jsonl -o " + d + " --constant 0.5") == 2);
  std::ofstream(dir.path / "bad.json") << "{not json";
  CHECK(cli("attack -c " + d + "/bad.json") == 2);
}

TEST_CASE("cli output is byte-identical across repeated runs") {
  TempDir dir("cli_determinism");
  const auto d = dir.path.string();
  REQUIRE(cli("generate -n 8 --items 16 --seed 3 -o " + d + "/a.jsonl") == 0);
  REQUIRE(cli("generate -n 8 --items 16 --seed 3 -o " + d + "/b.jsonl") == 0);
  CHECK(slurp(dir.path / "a.jsonl") == slurp(dir.path / "b.jsonl"));

  const std::string common = " -d " + d + "/a.jsonl --train-surrogate --generations 5 --runs 2 "
                             "--probe-masks 20 --seed 9 --no-timestamp";
  for (const char* id : {"r1", "r2"})
    REQUIRE(cli("attack" + common + " -o " + d + " --id " + id + " -j " + (id[1] == '1' ? "1" : "3")) == 0);
  for (const char* f : {"dataset.jsonl", "probe.jsonl", "campaign.jsonl", "archive.jsonl"}) {
    const auto a = slurp(dir.path / (std::string("r1.") + f));
    auto b = slurp(dir.path / (std::string("r2.") + f));
    // The campaign id is part of the recorded config.
    for (std::size_t p; (p = b.find("\"r2\"")) != std::string::npos;) b.replace(p, 4, "\"r1\"");
    CHECK_MESSAGE(a == b, f);
  }
}
