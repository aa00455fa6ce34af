// Command-line front end: dataset generation, labelling, filtering,
// surrogate training, probe/attack campaigns, analysis and CSV export.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bpadv/errors.hpp"
#include "bpadv/pipeline.hpp"

using namespace bpadv;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("BINPACK_ADVERSARY_SEED");
  if (!v || !*v) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto seed = std::stoull(v, &used);
    if (used != std::string(v).size()) throw std::invalid_argument(v);
    return seed;
  } catch (const std::exception&) {
    throw ConfigError(std::string("BINPACK_ADVERSARY_SEED is not an integer: ") + v);
  }
}

std::vector<std::string> split_command(const std::string& cmd) {
  std::istringstream in(cmd);
  std::vector<std::string> parts;
  for (std::string p; in >> p;) parts.push_back(p);
  return parts;
}

/// Model selection flags shared by filter/probe/attack.
struct ModelFlags {
  std::string weights, surrogate, external_cmd, external_tcp;
  std::optional<double> constant;
  bool train_surrogate = false;

  void add(CLI::App* app) {
    auto* g = app->add_option_group("model", "black-box model (overrides config)");
    g->add_option("--weights", weights, "native GRU weights JSON");
    g->add_option("--surrogate", surrogate, "trained surrogate JSON");
    g->add_flag("--train-surrogate", train_surrogate,
                "train a default surrogate on the input dataset");
    g->add_option("--external", external_cmd, "command speaking the model protocol");
    g->add_option("--external-tcp", external_tcp, "host:port speaking the model protocol");
    g->add_option("--constant", constant, "constant p_bf (testing)");
    g->require_option(0, 1);
  }

  std::optional<ModelDescriptor> descriptor() const {
    ModelDescriptor m;
    if (!weights.empty()) {
      m.kind = ModelDescriptor::Kind::Native;
      m.path = weights;
    } else if (!surrogate.empty()) {
      m.kind = ModelDescriptor::Kind::Surrogate;
      m.path = surrogate;
    } else if (train_surrogate) {
      m.kind = ModelDescriptor::Kind::Surrogate;
      m.train = SurrogateConfig{};
    } else if (!external_cmd.empty()) {
      m.kind = ModelDescriptor::Kind::External;
      m.endpoint.command = split_command(external_cmd);
    } else if (!external_tcp.empty()) {
      m.kind = ModelDescriptor::Kind::External;
      const auto colon = external_tcp.rfind(':');
      if (colon == std::string::npos) throw ConfigError("--external-tcp needs host:port");
      m.endpoint.host = external_tcp.substr(0, colon);
      m.endpoint.port = static_cast<std::uint16_t>(std::stoi(external_tcp.substr(colon + 1)));
    } else if (constant) {
      m.kind = ModelDescriptor::Kind::Constant;
      m.p_bf = *constant;
    } else {
      return std::nullopt;
    }
    return m;
  }
};

/// Flags of the campaign commands; unset values keep the config's.
struct CampaignFlags {
  std::string config_path, dataset, output_dir, id;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<std::size_t> runs, generations, population, probe_masks;
  std::optional<double> p_init, crossover;
  bool stop_on_first_hit = false, no_filter = false, no_timestamp = false;
  ModelFlags model;

  void add(CLI::App* app) {
    app->add_option("-c,--config", config_path, "campaign config JSON")->check(CLI::ExistingFile);
    app->add_option("-d,--dataset", dataset, "dataset JSONL");
    app->add_option("-o,--output-dir", output_dir, "output directory");
    app->add_option("--id", id, "campaign id (output file stem)");
    app->add_option("--seed", seed, "campaign seed");
    app->add_option("-j,--jobs", jobs, "worker threads (default: hardware)");
    app->add_option("--runs", runs, "EA runs per instance");
    app->add_option("--generations", generations, "EA generations");
    app->add_option("--population", population, "EA population size");
    app->add_option("--probe-masks", probe_masks, "random masks per probe");
    app->add_option("--p-init", p_init, "initialisation probability (probe and EA)");
    app->add_option("--crossover", crossover, "one-point crossover probability");
    app->add_flag("--stop-on-first-hit", stop_on_first_hit, "end a run at its first hit");
    app->add_flag("--no-filter", no_filter, "keep misclassified instances");
    app->add_flag("--no-timestamp", no_timestamp, "omit timestamps from outputs");
    model.add(app);
  }

  CampaignConfig resolve() const {
    CampaignConfig c = config_path.empty() ? CampaignConfig{} : CampaignConfig::load(config_path);
    if (auto s = env_seed()) c.seed = *s;
    if (seed) c.seed = *seed;
    if (!dataset.empty()) {
      c.dataset_path = dataset;
      c.dataset_spec.reset();
    }
    if (!output_dir.empty()) c.output_dir = output_dir;
    if (!id.empty()) c.campaign_id = id;
    if (jobs) c.jobs = *jobs;
    if (runs) c.ea.runs_per_instance = *runs;
    if (generations) c.ea.generations = *generations;
    if (population) c.ea.population_size = *population;
    if (probe_masks) c.probe.n_masks = *probe_masks;
    if (p_init) c.ea.p_init = c.probe.p_init = *p_init;
    if (crossover) c.ea.crossover_prob = *crossover;
    if (stop_on_first_hit) c.ea.stop_on_first_hit = true;
    if (no_filter) c.filter = false;
    c.timestamp = !no_timestamp;
    if (auto m = model.descriptor()) c.model = *m;
    else if (config_path.empty())
      throw ConfigError("no model given: use --config or a model flag");
    return c;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Evolutionary robustness evaluation of bin-packing algorithm selectors"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "generate a labelled, balanced dataset");
  DatasetSpec spec;
  std::string gen_out, distribution = "uniform";
  std::optional<std::uint64_t> gen_seed;
  bool no_balance = false;
  gen->add_option("-n,--n", spec.n_instances, "number of instances")->capture_default_str();
  gen->add_option("--items", spec.n_items, "items per instance")->capture_default_str();
  gen->add_option("--capacity", spec.bin_capacity, "bin capacity")->capture_default_str();
  gen->add_option("--min", spec.min_size, "minimum item size")->capture_default_str();
  gen->add_option("--max", spec.max_size, "maximum item size")->capture_default_str();
  gen->add_option("--distribution", distribution, "uniform | truncated_normal")
      ->check(CLI::IsMember({"uniform", "truncated_normal"}));
  gen->add_option("--mean", spec.mean, "truncated normal mean")->capture_default_str();
  gen->add_option("--stddev", spec.stddev, "truncated normal stddev")->capture_default_str();
  gen->add_flag("--no-balance", no_balance, "do not force 50/50 winners");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("-o,--output", gen_out, "output dataset JSONL")->required();

  // label
  auto* label = app.add_subcommand("label", "label raw instances with both heuristics");
  std::string label_in, label_out;
  int label_cap = 150, label_min = 20, label_max = 100;
  label->add_option("-i,--input", label_in, "JSONL of {\"id\", \"items\"}")->required()->check(CLI::ExistingFile);
  label->add_option("-o,--output", label_out, "output dataset JSONL")->required();
  label->add_option("--capacity", label_cap, "bin capacity")->capture_default_str();
  label->add_option("--min", label_min, "minimum item size")->capture_default_str();
  label->add_option("--max", label_max, "maximum item size")->capture_default_str();

  // filter
  auto* filt = app.add_subcommand("filter", "drop instances the model misclassifies");
  std::string filt_config, filt_dataset, filt_out, filt_removed;
  ModelFlags filt_model;
  filt->add_option("-c,--config", filt_config, "campaign config (model)")->check(CLI::ExistingFile);
  filt->add_option("-d,--dataset", filt_dataset, "dataset JSONL")->required()->check(CLI::ExistingFile);
  filt->add_option("-o,--output", filt_out, "kept instances JSONL")->required();
  filt->add_option("--removed", filt_removed, "removed instances JSONL");
  filt_model.add(filt);

  // train-surrogate
  auto* train = app.add_subcommand("train-surrogate", "fit the built-in surrogate classifier");
  std::string train_dataset, train_out;
  SurrogateConfig sc;
  train->add_option("-d,--dataset", train_dataset, "training dataset JSONL")->required()->check(CLI::ExistingFile);
  train->add_option("-o,--output", train_out, "surrogate JSON")->required();
  train->add_option("--hidden", sc.hidden, "hidden units")->capture_default_str();
  train->add_option("--epochs", sc.epochs, "full-batch epochs")->capture_default_str();
  train->add_option("--lr", sc.learning_rate, "learning rate")->capture_default_str();
  train->add_option("--momentum", sc.momentum, "momentum")->capture_default_str();
  train->add_option("--l2", sc.l2, "weight decay")->capture_default_str();
  train->add_option("--seed", sc.seed, "initialisation seed")->capture_default_str();

  // probe / attack
  auto* probe = app.add_subcommand("probe", "random-mask fragility probe only");
  CampaignFlags probe_flags;
  probe_flags.add(probe);
  auto* attack = app.add_subcommand("attack", "probe, then evolve masks on non-fragile instances");
  CampaignFlags attack_flags;
  attack_flags.add(attack);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "summarise campaign artifacts");
  std::string an_dir, an_id = "campaign", an_config;
  bool an_ks = false, an_no_ts = false;
  std::size_t an_ks_per = 20;
  analyze->add_option("--dir", an_dir, "artifact directory");
  analyze->add_option("--id", an_id, "campaign id")->capture_default_str();
  analyze->add_option("-c,--config", an_config, "take dir and id from a config")->check(CLI::ExistingFile);
  analyze->add_flag("--ks", an_ks, "also run the KS distribution check");
  analyze->add_option("--ks-per-instance", an_ks_per, "adversarial samples per instance for --ks")
      ->capture_default_str();
  analyze->add_flag("--no-timestamp", an_no_ts, "omit the timestamp");

  // export
  auto* exp = app.add_subcommand("export", "write plot-ready CSV");
  std::string ex_dir, ex_id = "campaign", ex_kind;
  exp->add_option("--dir", ex_dir, "artifact directory")->required();
  exp->add_option("--id", ex_id, "campaign id")->capture_default_str();
  exp->add_option("--kind", ex_kind, "trajectories | mask_heatmap | stats_box | projection_matrix")
      ->required()
      ->check(CLI::IsMember({"trajectories", "mask_heatmap", "stats_box", "projection_matrix"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (gen->parsed()) {
    spec.distribution = distribution == "uniform" ? SizeDistribution::Uniform
                                                  : SizeDistribution::TruncatedNormal;
    spec.balance = !no_balance;
    if (auto s = env_seed()) spec.seed = *s;
    if (gen_seed) spec.seed = *gen_seed;
    try {
      spec.validate();
    } catch (const InvariantError& e) {
      throw ConfigError(e.what());
    }
    const Dataset ds = generate_dataset(spec);
    save_dataset(ds, gen_out);
    std::size_t n_bf = 0;
    for (const auto& r : ds.instances) n_bf += r.winner == Solver::BF;
    std::cout << "wrote " << ds.instances.size() << " instances to " << gen_out
              << " (BF " << n_bf << ", FF " << ds.instances.size() - n_bf << ")\n";
    return 0;
  }

  if (label->parsed()) {
    std::ifstream in(label_in, std::ios::binary);
    Dataset out;
    const Portfolio portfolio{label_cap, 2};
    const SizeBounds bounds{label_min, label_max};
    std::size_t line_no = 0, ties = 0;
    for (std::string line; std::getline(in, line);) {
      ++line_no;
      if (line.empty()) continue;
      Json j;
      try {
        j = Json::parse(line);
      } catch (const Json::parse_error& e) {
        throw ParseError(line_no, e.what());
      }
      if (j.contains("spec") || j.contains("config")) continue;
      if (!j.contains("items")) throw ParseError(line_no, "missing key \"items\"");
      Instance inst{j.value("id", std::to_string(line_no - 1)),
                    j["items"].get<std::vector<int>>()};
      auto labeled = label_instance(std::move(inst), portfolio);
      if (!labeled) {
        ++ties;
        continue;
      }
      validate_record(*labeled, bounds);
      out.instances.push_back(std::move(*labeled));
    }
    save_dataset(out, label_out);
    std::cout << "labelled " << out.instances.size() << " instances (" << ties
              << " ties dropped)\n";
    return 0;
  }

  if (filt->parsed()) {
    const Dataset ds = load_dataset(filt_dataset);
    ModelDescriptor md;
    if (auto m = filt_model.descriptor()) md = *m;
    else if (!filt_config.empty()) md = CampaignConfig::load(filt_config).model;
    else throw ConfigError("no model given: use --config or a model flag");
    auto backend = make_backend(md, ds, std::cerr);
    auto result = filter_correctly_classified(ds.instances, *backend);
    save_dataset({ds.spec, result.kept}, filt_out);
    if (!filt_removed.empty()) save_dataset({ds.spec, result.removed}, filt_removed);
    std::cout << "kept " << result.kept.size() << ", removed " << result.removed.size() << "\n";
    return 0;
  }

  if (train->parsed()) {
    const Dataset ds = load_dataset(train_dataset);
    const auto fit = train_surrogate(ds.instances, sc, ds.bounds());
    save_surrogate(fit.model, fit.train_accuracy, train_out);
    std::cout << "training accuracy " << fit.train_accuracy << ", loss " << fit.final_loss << "\n";
    return 0;
  }

  if (probe->parsed() || attack->parsed()) {
    const bool probe_only = probe->parsed();
    const CampaignConfig config = (probe_only ? probe_flags : attack_flags).resolve();
    const auto report = run_pipeline(config, probe_only, std::cerr);
    std::cout << "wrote " << report.paths.campaign().string() << "\n";
    return 0;
  }

  if (analyze->parsed()) {
    CampaignPaths paths{an_dir, an_id};
    if (!an_config.empty()) {
      const auto c = CampaignConfig::load(an_config);
      paths = {c.output_dir, c.campaign_id};
      if (!an_dir.empty()) paths.dir = an_dir;
    }
    if (paths.dir.empty()) throw ConfigError("analyze needs --dir or --config");
    const auto report = run_analysis(paths, !an_no_ts);
    if (report.summary) {
      const auto& s = *report.summary;
      std::cout << "instances " << s.n_instances << ", fragile " << s.n_fragile
                << ", attacked " << s.n_attacked << ", success rate " << s.success_rate
                << "%, queries "
                << (s.queries ? format_double(*s.queries, 9) : std::string("n/a")) << "\n";
    } else {
      std::cout << "no EA-attacked instances; summary omitted\n";
    }
    if (an_ks) {
      const auto [pairs, rejected] = run_ks_check(paths, an_ks_per);
      std::cout << "ks: " << pairs << " pairs, " << rejected << " rejected at 0.05\n";
    }
    std::cout << "wrote " << paths.summary().string() << "\n";
    return 0;
  }

  if (exp->parsed()) {
    const auto path = run_export({ex_dir, ex_id}, plot_kind_from_string(ex_kind));
    std::cout << "wrote " << path.string() << "\n";
    return 0;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
