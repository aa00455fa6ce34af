#include "bpadv/campaign_io.hpp"

#include "bpadv/errors.hpp"
#include "bpadv/instances.hpp"

namespace bpadv {

std::string ArtifactHeader::line() const {
  Json j;
  j["config"] = config;
  if (timestamp) j["timestamp"] = *timestamp;
  return j.dump();
}

std::string format_run_record(const AttackRunResult& run) {
  std::string s = "{\"instance\":" + quote(run.instance_id) +
                  ",\"run\":" + std::to_string(run.run) +
                  ",\"best_fitness\":" + format_double(run.best_fitness) +
                  ",\"first_hit_eval\":" +
                  (run.first_hit_evaluation ? std::to_string(*run.first_hit_evaluation)
                                            : std::string("null")) +
                  ",\"trajectory\":[";
  for (std::size_t g = 0; g < run.trajectory.size(); ++g) {
    if (g) s += ',';
    s += format_double(run.trajectory[g]);
  }
  s += "],\"hits\":" + std::to_string(run.hits) + "}";
  return s;
}

std::string format_probe_record(const ProbeReport& probe) {
  return "{\"instance\":" + quote(probe.instance_id) +
         ",\"fragile\":" + (probe.fragile ? "true" : "false") +
         ",\"hits\":" + std::to_string(probe.hits) +
         ",\"evaluations\":" + std::to_string(probe.evaluations) + "}";
}

std::string encode_mask(const Mask& mask) {
  std::string s(mask.size(), '0');
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (mask[j] != 0) s[j] = mask[j] > 0 ? '+' : '-';
  return s;
}

Mask decode_mask(std::string_view text, std::size_t line) {
  Mask m;
  m.entries.resize(text.size());
  for (std::size_t j = 0; j < text.size(); ++j) {
    switch (text[j]) {
      case '-': m.entries[j] = -1; break;
      case '0': m.entries[j] = 0; break;
      case '+': m.entries[j] = 1; break;
      default:
        throw ParseError(line, "mask character '" + std::string(1, text[j]) +
                                   "' at position " + std::to_string(j));
    }
  }
  return m;
}

std::string format_archive_record(const std::string& instance_id,
                                  const Mask& mask, double fitness,
                                  MisclassType type) {
  std::string s = "{\"instance\":" + quote(instance_id) + ",\"mask\":\"" +
                  encode_mask(mask) + "\",\"fitness\":" + format_double(fitness) + ",\"type\":\"" +
       std::string(to_string(type)) + "\"}";
  return s;
}

AttackRunResult parse_run_record(const Json& j) {
  AttackRunResult r;
  r.instance_id = j.at("instance").get<std::string>();
  r.run = j.at("run").get<std::size_t>();
  r.best_fitness = j.at("best_fitness").get<double>();
  if (!j.at("first_hit_eval").is_null())
    r.first_hit_evaluation = j.at("first_hit_eval").get<std::uint64_t>();
  r.trajectory = j.at("trajectory").get<std::vector<double>>();
  r.hits = j.at("hits").get<std::size_t>();
  return r;
}

FileCampaignSink::FileCampaignSink(const CampaignPaths& paths,
                                   const ArtifactHeader& header)
    : probe_(paths.probe(), std::ios::binary),
      campaign_(paths.campaign(), std::ios::binary),
      archive_(paths.archive(), std::ios::binary) {
  if (!probe_ || !campaign_ || !archive_)
    throw Error("cannot open campaign outputs in " + paths.dir.string());
  const std::string h = header.line() + "\n";
  probe_ << h;
  campaign_ << h;
  archive_ << h;
}

void FileCampaignSink::on_instance(const InstanceOutcome& outcome,
                                   const InstanceArchive& archive) {
  probe_ << format_probe_record(outcome.probe) << '\n';
  for (const auto& run : outcome.runs) {
    campaign_ << format_run_record(run) << '\n';
    ++n_runs_;
  }
  for (std::size_t i = 0; i < archive.size(); ++i)
    archive_ << format_archive_record(outcome.instance.id(), archive.mask(i),
                                      archive.fitness(i), archive.type(i))
             << '\n';
  ++n_instances_;
  if (!probe_ || !campaign_ || !archive_) throw Error("campaign write failed");
}

void FileCampaignSink::close() {
  probe_.close();
  campaign_.close();
  archive_.close();
}

namespace {

/// Line-by-line JSONL cursor that skips the config header and supports
/// one line of look-ahead.
class JsonlCursor {
 public:
  explicit JsonlCursor(const std::filesystem::path& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw Error("cannot open " + path.string());
  }

  const Json* peek() {
    if (!pending_) advance();
    return pending_ ? &*pending_ : nullptr;
  }
  Json take() {
    peek();
    Json j = std::move(*pending_);
    pending_.reset();
    return j;
  }
  std::size_t line() const { return line_; }
  const std::filesystem::path& path() const { return path_; }

  Json* header() { peek(); return header_ ? &*header_ : nullptr; }

 private:
  void advance() {
    std::string text;
    while (std::getline(in_, text)) {
      ++line_;
      if (text.empty()) continue;
      Json j;
      try {
        j = Json::parse(text);
      } catch (const Json::parse_error& e) {
        throw ParseError(line_, path_.string() + ": " + e.what());
      }
      if (j.contains("config")) {
        header_ = std::move(j["config"]);
        continue;
      }
      pending_ = std::move(j);
      return;
    }
  }

  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_ = 0;
  std::optional<Json> pending_;
  std::optional<Json> header_;
};

bool belongs_to(const Json* j, const std::string& id) {
  return j && j->contains("instance") && (*j)["instance"] == id;
}

}  // namespace

void read_campaign(const CampaignPaths& paths,
                   const std::function<void(const InstanceOutcome&,
                                            const InstanceArchive&)>& visit,
                   Json* config) {
  const Dataset dataset = load_dataset(paths.dataset());
  JsonlCursor probes(paths.probe()), runs(paths.campaign()), archive(paths.archive());
  if (config) {
    if (Json* h = probes.header()) *config = *h;
  }
  try {
    for (const auto& inst : dataset.instances) {
      InstanceOutcome outcome;
      outcome.instance = inst;
      const Json* p = probes.peek();
      if (!belongs_to(p, inst.id()))
        throw ParseError(probes.line(), paths.probe().string() +
                                            ": expected probe record for " + inst.id());
      Json pj = probes.take();
      outcome.probe.instance_id = inst.id();
      outcome.probe.fragile = pj.at("fragile").get<bool>();
      outcome.probe.hits = pj.at("hits").get<std::size_t>();
      outcome.probe.evaluations = pj.at("evaluations").get<std::size_t>();
      outcome.probe.adversarial = InstanceArchive(inst.items().size());

      while (belongs_to(runs.peek(), inst.id()))
        outcome.runs.push_back(parse_run_record(runs.take()));

      InstanceArchive found(inst.items().size());
      while (belongs_to(archive.peek(), inst.id())) {
        const std::size_t line = archive.line();
        Json aj = archive.take();
        const Mask m = decode_mask(aj.at("mask").get<std::string>(), line);
        if (m.size() != inst.items().size())
          throw ParseError(line, "archived mask length differs from instance " + inst.id());
        found.insert(m, aj.at("fitness").get<double>(),
                     misclass_type_from_string(aj.at("type").get<std::string>()));
      }
      if (outcome.probe.fragile) outcome.probe.adversarial = found;
      visit(outcome, found);
    }
  } catch (const Json::exception& e) {
    throw ParseError(0, std::string("campaign artifacts: ") + e.what());
  }
  for (JsonlCursor* c : {&probes, &runs, &archive})
    if (c->peek())
      throw ParseError(c->line(), c->path().string() +
                                      ": record for an instance not in the dataset");
}

CampaignResult load_campaign(const CampaignPaths& paths, Json* config) {
  CampaignResult result;
  read_campaign(
      paths,
      [&](const InstanceOutcome& outcome, const InstanceArchive& archive) {
        result.instances.push_back(outcome);
        if (!archive.empty()) result.archive.merge(outcome.instance.id(), archive);
      },
      config);
  return result;
}

}  // namespace bpadv
