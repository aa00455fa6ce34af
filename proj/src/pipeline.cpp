#include "bpadv/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "bpadv/distribution_check.hpp"
#include "bpadv/errors.hpp"
#include "bpadv/gru.hpp"

namespace bpadv {

// ------------------------------------------------------------- config

namespace {

std::string_view kind_name(ModelDescriptor::Kind k) {
  switch (k) {
    case ModelDescriptor::Kind::Native: return "native";
    case ModelDescriptor::Kind::Surrogate: return "surrogate";
    case ModelDescriptor::Kind::External: return "external";
    case ModelDescriptor::Kind::Constant: break;
  }
  return "constant";
}

Json surrogate_config_json(const SurrogateConfig& c) {
  return {{"hidden", c.hidden},     {"epochs", c.epochs},
          {"learning_rate", c.learning_rate}, {"momentum", c.momentum},
          {"l2", c.l2},             {"seed", c.seed}};
}

SurrogateConfig surrogate_config_from(const Json& j) {
  SurrogateConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.l2 = j.value("l2", c.l2);
  c.seed = j.value("seed", c.seed);
  return c;
}

Json ea_json(const EaConfig& e) {
  return {{"population_size", e.population_size},
          {"generations", e.generations},
          {"tournament_size", e.tournament_size},
          {"crossover_prob", e.crossover_prob},
          {"mutation_rate", e.mutation_rate},
          {"p_init", e.p_init},
          {"runs_per_instance", e.runs_per_instance},
          {"seed", e.seed},
          {"stop_on_first_hit", e.stop_on_first_hit}};
}

EaConfig ea_from(const Json& j) {
  EaConfig e;
  e.population_size = j.value("population_size", e.population_size);
  e.generations = j.value("generations", e.generations);
  e.tournament_size = j.value("tournament_size", e.tournament_size);
  e.crossover_prob = j.value("crossover_prob", e.crossover_prob);
  e.mutation_rate = j.value("mutation_rate", e.mutation_rate);
  e.p_init = j.value("p_init", e.p_init);
  e.runs_per_instance = j.value("runs_per_instance", e.runs_per_instance);
  e.seed = j.value("seed", e.seed);
  e.stop_on_first_hit = j.value("stop_on_first_hit", e.stop_on_first_hit);
  return e;
}

}  // namespace

Json ModelDescriptor::to_json() const {
  Json j;
  j["type"] = kind_name(kind);
  switch (kind) {
    case Kind::Native:
      j["weights"] = path.string();
      if (fixed_length) j["fixed_length"] = *fixed_length;
      break;
    case Kind::Surrogate:
      if (train)
        j["train"] = surrogate_config_json(*train);
      else
        j["path"] = path.string();
      break;
    case Kind::External:
      if (!endpoint.command.empty())
        j["command"] = endpoint.command;
      else {
        j["host"] = endpoint.host;
        j["port"] = endpoint.port;
      }
      j["timeout_ms"] = endpoint.timeout.count();
      break;
    case Kind::Constant:
      j["p_bf"] = p_bf;
      break;
  }
  return j;
}

ModelDescriptor ModelDescriptor::from_json(const Json& j) {
  ModelDescriptor m;
  if (!j.is_object() || !j.contains("type"))
    throw ConfigError("model: expected an object with a \"type\"");
  const auto type = j.at("type").get<std::string>();
  if (type == "native") {
    m.kind = Kind::Native;
    m.path = j.at("weights").get<std::string>();
    if (j.contains("fixed_length")) m.fixed_length = j["fixed_length"].get<std::size_t>();
  } else if (type == "surrogate") {
    m.kind = Kind::Surrogate;
    if (j.contains("train"))
      m.train = surrogate_config_from(j["train"]);
    else
      m.path = j.at("path").get<std::string>();
  } else if (type == "external") {
    m.kind = Kind::External;
    if (j.contains("command"))
      m.endpoint.command = j["command"].get<std::vector<std::string>>();
    else {
      m.endpoint.host = j.value("host", std::string("127.0.0.1"));
      m.endpoint.port = j.at("port").get<std::uint16_t>();
    }
    m.endpoint.timeout = std::chrono::milliseconds(j.value("timeout_ms", 10000));
  } else if (type == "constant") {
    m.kind = Kind::Constant;
    m.p_bf = j.at("p_bf").get<double>();
  } else {
    throw ConfigError("model: unknown type '" + type + "'");
  }
  return m;
}

void CampaignConfig::resolve_seeds() {
  ea.seed = seed;
  probe.seed = seed;
}

void CampaignConfig::validate() const {
  if (dataset_path.has_value() == dataset_spec.has_value())
    throw ConfigError("exactly one of \"dataset\" or \"dataset_spec\" is required");
  if (dataset_path && !std::filesystem::exists(*dataset_path))
    throw ConfigError("dataset not found: " + dataset_path->string());
  if (dataset_spec) {
    try {
      dataset_spec->validate();
    } catch (const InvariantError& e) {
      throw ConfigError(std::string("dataset_spec.") + e.what());
    }
  }
  if ((model.kind == ModelDescriptor::Kind::Native ||
       (model.kind == ModelDescriptor::Kind::Surrogate && !model.train)) &&
      !std::filesystem::exists(model.path))
    throw ConfigError("model file not found: " + model.path.string());
  if (model.kind == ModelDescriptor::Kind::Constant &&
      !(model.p_bf >= 0.0 && model.p_bf <= 1.0))
    throw ConfigError("constant model p_bf must lie in [0, 1]");
  if (campaign_id.empty() || campaign_id.find('/') != std::string::npos)
    throw ConfigError("campaign_id must be a plain file-name stem");
  if (falkenauer_exponent < 1) throw ConfigError("falkenauer_exponent must be >= 1");
  if (probe.p_init < 0.0 || probe.p_init > 1.0)
    throw ConfigError("probe.p_init must lie in [0, 1]");
  ea.validate();
}

Json CampaignConfig::to_json() const {
  Json j;
  j["campaign_id"] = campaign_id;
  if (dataset_path) j["dataset"] = dataset_path->string();
  if (dataset_spec) j["dataset_spec"] = Json::parse(dataset_spec_to_json(*dataset_spec));
  j["model"] = model.to_json();
  j["ea"] = ea_json(ea);
  j["probe"] = {{"n_masks", probe.n_masks}, {"p_init", probe.p_init}, {"seed", probe.seed}};
  j["output_dir"] = output_dir.string();
  j["seed"] = seed;
  j["falkenauer_exponent"] = falkenauer_exponent;
  j["filter"] = filter;
  return j;
}

CampaignConfig CampaignConfig::from_json(const Json& j) {
  CampaignConfig c;
  try {
    c.campaign_id = j.value("campaign_id", c.campaign_id);
    if (j.contains("dataset")) c.dataset_path = j["dataset"].get<std::string>();
    if (j.contains("dataset_spec")) c.dataset_spec = dataset_spec_from_json(j["dataset_spec"].dump());
    if (j.contains("model")) c.model = ModelDescriptor::from_json(j["model"]);
    if (j.contains("ea")) c.ea = ea_from(j["ea"]);
    if (j.contains("probe")) {
      c.probe.n_masks = j["probe"].value("n_masks", c.probe.n_masks);
      c.probe.p_init = j["probe"].value("p_init", c.probe.p_init);
    }
    c.output_dir = j.value("output_dir", c.output_dir.string());
    c.seed = j.value("seed", c.seed);
    c.falkenauer_exponent = j.value("falkenauer_exponent", c.falkenauer_exponent);
    c.filter = j.value("filter", c.filter);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const InvariantError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

CampaignConfig CampaignConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

// ------------------------------------------------------------ backends

std::unique_ptr<Backend> make_backend(const ModelDescriptor& model,
                                      const Dataset& dataset, std::ostream& log) {
  using Kind = ModelDescriptor::Kind;
  switch (model.kind) {
    case Kind::Native:
      return std::make_unique<GruBackend>(load_weights(model.path), model.fixed_length);
    case Kind::Surrogate: {
      if (!model.train) return std::make_unique<SurrogateBackend>(load_surrogate(model.path));
      auto fit = train_surrogate(dataset.instances, *model.train, dataset.bounds());
      log << "surrogate trained: accuracy " << fit.train_accuracy << ", loss "
          << fit.final_loss << '\n';
      return std::make_unique<SurrogateBackend>(std::move(fit.model));
    }
    case Kind::External:
      return std::make_unique<ExternalBackend>(model.endpoint);
    case Kind::Constant:
      return std::make_unique<ConstantBackend>(model.p_bf);
  }
  throw ConfigError("unknown model kind");
}

// ------------------------------------------------------------ pipeline

std::string current_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

void write_dataset_artifact(const std::filesystem::path& path,
                            const std::optional<DatasetSpec>& spec,
                            const std::vector<LabeledInstance>& records,
                            const ArtifactHeader& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  Json h;
  if (spec) h["spec"] = Json::parse(dataset_spec_to_json(*spec));
  h["config"] = header.config;
  if (header.timestamp) h["timestamp"] = *header.timestamp;
  out << h.dump() << '\n';
  for (const auto& rec : records) out << format_record(rec) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

PipelineReport run_pipeline(const CampaignConfig& input, bool probe_only,
                            std::ostream& log) {
  CampaignConfig config = input;
  config.resolve_seeds();
  config.validate();

  const Dataset dataset = config.dataset_path ? load_dataset(*config.dataset_path)
                                              : generate_dataset(*config.dataset_spec);
  if (dataset.instances.empty()) throw ConfigError("dataset is empty");
  auto backend = make_backend(config.model, dataset, log);

  std::filesystem::create_directories(config.output_dir);
  PipelineReport report;
  report.paths = {config.output_dir, config.campaign_id};
  report.n_input = dataset.instances.size();

  ArtifactHeader header{config.to_json(), std::nullopt};
  header.config["probe_only"] = probe_only;
  if (config.timestamp) header.timestamp = current_timestamp();

  FilterResult filtered;
  if (config.filter)
    filtered = filter_correctly_classified(dataset.instances, *backend);
  else
    filtered.kept = dataset.instances;
  report.n_kept = filtered.kept.size();
  report.n_removed = filtered.removed.size();
  write_dataset_artifact(report.paths.dataset(), dataset.spec, filtered.kept, header);
  write_dataset_artifact(report.paths.removed(), dataset.spec, filtered.removed, header);
  log << "filter: kept " << report.n_kept << ", removed " << report.n_removed << '\n';

  CampaignSettings settings;
  settings.probe = config.probe;
  settings.ea = config.ea;
  settings.portfolio = {dataset.capacity(), config.falkenauer_exponent};
  settings.bounds = dataset.bounds();
  settings.jobs = config.jobs ? config.jobs : std::max(1u, std::thread::hardware_concurrency());
  settings.probe_only = probe_only;

  FileCampaignSink sink(report.paths, header);
  struct CountingSink final : CampaignSink {
    FileCampaignSink& inner;
    std::ostream& log;
    std::size_t fragile = 0, done = 0, total = 0;
    CountingSink(FileCampaignSink& s, std::ostream& l, std::size_t n)
        : inner(s), log(l), total(n) {}
    void on_instance(const InstanceOutcome& o, const InstanceArchive& a) override {
      inner.on_instance(o, a);
      if (o.probe.fragile) ++fragile;
      if (++done % 50 == 0 || done == total)
        log << "progress: " << done << "/" << total << " instances\n";
    }
  } counting(sink, log, filtered.kept.size());
  run_campaign(filtered.kept, *backend, settings, counting);
  sink.close();

  report.n_fragile = counting.fragile;
  report.n_runs = sink.runs_written();
  report.queries = backend->queries().total();
  log << "probe: " << report.n_fragile << " fragile of " << report.n_kept
      << "; EA runs: " << report.n_runs << "; queries: " << report.queries << '\n';
  return report;
}

// ------------------------------------------------------------ analysis

namespace {

Json optional_json(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace

std::string summary_to_json(const AnalysisReport& report, const Json& config,
                            const std::optional<std::string>& timestamp) {
  Json j;
  j["config"] = config;
  if (timestamp) j["timestamp"] = *timestamp;
  if (report.summary) {
    const auto& s = *report.summary;
    j["summary"] = {{"n_instances", s.n_instances},
                    {"n_fragile", s.n_fragile},
                    {"n_attacked", s.n_attacked},
                    {"n_successful", s.n_successful},
                    {"success_rate", s.success_rate},
                    {"queries", optional_json(s.queries)},
                    {"T1", s.t1},
                    {"T2", s.t2},
                    {"T3", s.t3},
                    {"fitness_median", s.fitness_median},
                    {"fitness_q1", s.fitness_q1},
                    {"fitness_q3", s.fitness_q3},
                    {"unique_adversarial_total", s.unique_adversarial_total},
                    {"unique_adversarial_median", optional_json(s.unique_adversarial_median)}};
  } else {
    j["summary"] = nullptr;
  }
  if (report.categories) {
    Json rows = Json::array();
    for (const auto& r : report.categories->rows)
      rows.push_back({{"winner", to_string(r.winner)},
                      {"robust", r.robust},
                      {"perturbable", r.perturbable},
                      {"fragile", r.fragile}});
    j["categories"] = rows;
  } else {
    j["categories"] = nullptr;
  }
  Json corr = Json::array();
  for (const auto& c : report.correlations) {
    Json row = {{"statistic", c.statistic}, {"n", c.n}};
    row["rho"] = c.result ? Json(c.result->rho) : Json(nullptr);
    row["p_value"] = c.result ? Json(c.result->p_value) : Json(nullptr);
    corr.push_back(row);
  }
  j["correlations"] = corr;
  return j.dump(2) + "\n";
}

AnalysisReport run_analysis(const CampaignPaths& paths, bool write_timestamp) {
  const Dataset dataset = load_dataset(paths.dataset());
  const SizeBounds bounds = dataset.bounds();
  AnalysisReport report;
  Json config;
  read_campaign(
      paths,
      [&](const InstanceOutcome& o, const InstanceArchive& a) {
        report.instances.push_back(analyze_instance(o, a, bounds));
      },
      &config);
  try {
    report.summary = campaign_summary(report.instances);
  } catch (const EmptyInputError&) {
  }
  try {
    report.categories = categorize(report.instances);
  } catch (const DomainError&) {
  }
  report.correlations = fitness_correlations(report.instances);

  std::ofstream out(paths.summary(), std::ios::binary);
  if (!out) throw Error("cannot open " + paths.summary().string());
  out << summary_to_json(report, config,
                         write_timestamp ? std::optional(current_timestamp()) : std::nullopt);
  return report;
}

std::pair<std::size_t, std::size_t> run_ks_check(const CampaignPaths& paths,
                                                 std::size_t per_instance) {
  const Dataset dataset = load_dataset(paths.dataset());
  const SizeBounds bounds = dataset.bounds();
  std::ofstream out(paths.ks(), std::ios::binary);
  if (!out) throw Error("cannot open " + paths.ks().string());
  out << "pair,statistic,p_value,reject\r\n";
  std::size_t pairs = 0, rejected = 0;
  read_campaign(paths, [&](const InstanceOutcome& o, const InstanceArchive& a) {
    if (a.empty() || per_instance == 0) return;
    const std::size_t take = std::min(per_instance, a.size());
    for (std::size_t k = 0; k < take; ++k) {
      const std::size_t i = k * a.size() / take;
      const Instance perturbed = apply_mask(o.instance.instance, a.mask(i), bounds);
      const auto r = ks_two_sample(o.instance.items(), perturbed.items);
      char buf[96];
      std::snprintf(buf, sizeof buf, ",%.9g,%.9g,%s\r\n", r.statistic, r.p_value,
                    r.reject_at_0_05 ? "true" : "false");
      out << csv_escape(o.instance.id() + ":" + std::to_string(i)) << buf;
      ++pairs;
      if (r.reject_at_0_05) ++rejected;
    }
  });
  return {pairs, rejected};
}

std::filesystem::path run_export(const CampaignPaths& paths, PlotKind kind) {
  const Dataset dataset = load_dataset(paths.dataset());
  const auto path = paths.csv(kind);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string());
  PlotExporter exporter(out, kind, dataset.bounds());
  read_campaign(paths, [&](const InstanceOutcome& o, const InstanceArchive& a) {
    exporter.add(o, a);
  });
  if (!out) throw Error("write failed: " + path.string());
  return path;
}

}  // namespace bpadv
