#include "bpadv/instances.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "bpadv/classifier.hpp"
#include "bpadv/errors.hpp"
#include "bpadv/json_util.hpp"
#include "bpadv/random.hpp"

namespace bpadv {

void DatasetSpec::validate() const {
  if (n_instances == 0) throw InvariantError("n_instances", "must be positive");
  if (n_items == 0) throw InvariantError("n_items", "must be positive");
  if (bin_capacity <= 0) throw InvariantError("bin_capacity", "must be positive");
  if (min_size <= 0) throw InvariantError("min_size", "must be positive");
  if (min_size >= max_size)
    throw InvariantError("min_size", "must be below max_size");
  if (max_size > bin_capacity)
    throw InvariantError("max_size", "must not exceed bin_capacity");
  if (balance && n_instances % 2 != 0)
    throw InvariantError("n_instances", "must be even when balance is set");
  if (distribution == SizeDistribution::TruncatedNormal &&
      !(stddev > 0.0 && std::isfinite(mean)))
    throw InvariantError("stddev", "truncated normal needs stddev > 0");
}

std::optional<LabeledInstance> label_instance(Instance instance,
                                              const Portfolio& portfolio) {
  const auto outcome = evaluate_portfolio(instance.items, portfolio);
  if (!outcome.winner) return std::nullopt;
  return LabeledInstance{std::move(instance), outcome.o_bf(), outcome.o_ff(),
                         *outcome.winner};
}

namespace {

int draw_size(Rng& rng, const DatasetSpec& spec) {
  if (spec.distribution == SizeDistribution::Uniform)
    return static_cast<int>(rng.between(spec.min_size, spec.max_size));
  for (;;) {
    const double v = std::nearbyint(spec.mean + spec.stddev * rng.normal());
    if (v >= spec.min_size && v <= spec.max_size) return static_cast<int>(v);
  }
}

}  // namespace

Dataset generate_dataset(const DatasetSpec& spec, const Portfolio& portfolio) {
  spec.validate();
  Rng rng(spec.seed);
  Dataset out;
  out.spec = spec;
  out.instances.reserve(spec.n_instances);
  const std::size_t quota = spec.n_instances / 2;
  std::size_t n_bf = 0, n_ff = 0;
  const std::size_t max_draws = 1000 * spec.n_instances;

  for (std::size_t draw = 0; out.instances.size() < spec.n_instances; ++draw) {
    if (draw >= max_draws)
      throw GenerationExhaustedError(
          "could not satisfy the dataset spec after " +
          std::to_string(max_draws) + " candidate draws");
    Instance candidate;
    candidate.items.resize(spec.n_items);
    for (int& s : candidate.items) s = draw_size(rng, spec);
    auto labeled = label_instance(std::move(candidate), portfolio);
    if (!labeled) continue;
    if (spec.balance) {
      auto& count = labeled->winner == Solver::BF ? n_bf : n_ff;
      if (count >= quota) continue;
      ++count;
    }
    labeled->instance.id = std::to_string(out.instances.size());
    out.instances.push_back(std::move(*labeled));
  }
  return out;
}

Dataset generate_dataset(const DatasetSpec& spec) {
  return generate_dataset(spec, Portfolio{spec.bin_capacity, 2});
}

namespace {

Json spec_to_json(const DatasetSpec& s) {
  Json j;
  j["n_instances"] = s.n_instances;
  j["n_items"] = s.n_items;
  j["min_size"] = s.min_size;
  j["max_size"] = s.max_size;
  j["bin_capacity"] = s.bin_capacity;
  j["distribution"] = s.distribution == SizeDistribution::Uniform
                          ? "uniform"
                          : "truncated_normal";
  j["mean"] = s.mean;
  j["stddev"] = s.stddev;
  j["balance"] = s.balance;
  j["seed"] = s.seed;
  return j;
}

DatasetSpec spec_from_json(const Json& j) {
  DatasetSpec s;
  s.n_instances = j.at("n_instances").get<std::size_t>();
  s.n_items = j.at("n_items").get<std::size_t>();
  s.min_size = j.value("min_size", s.min_size);
  s.max_size = j.value("max_size", s.max_size);
  s.bin_capacity = j.value("bin_capacity", s.bin_capacity);
  const auto dist = j.value("distribution", std::string("uniform"));
  if (dist == "uniform")
    s.distribution = SizeDistribution::Uniform;
  else if (dist == "truncated_normal")
    s.distribution = SizeDistribution::TruncatedNormal;
  else
    throw InvariantError("distribution", "unknown distribution '" + dist + "'");
  s.mean = j.value("mean", s.mean);
  s.stddev = j.value("stddev", s.stddev);
  s.balance = j.value("balance", s.balance);
  s.seed = j.value("seed", s.seed);
  return s;
}

}  // namespace

std::string dataset_spec_to_json(const DatasetSpec& spec) {
  return spec_to_json(spec).dump();
}

DatasetSpec dataset_spec_from_json(const std::string& text) {
  return spec_from_json(Json::parse(text));
}

std::string format_record(const LabeledInstance& rec) {
  std::string s = "{\"id\":" + quote(rec.id()) + ",\"items\":[";
  for (std::size_t j = 0; j < rec.items().size(); ++j) {
    if (j) s += ',';
    s += std::to_string(rec.items()[j]);
  }
  s += "],\"o_bf\":" + format_double(rec.o_bf) +
       ",\"o_ff\":" + format_double(rec.o_ff) + ",\"winner\":\"" +
       std::string(to_string(rec.winner)) + "\"}";
  return s;
}

void validate_record(const LabeledInstance& rec, SizeBounds bounds) {
  if (rec.items().empty()) throw InvariantError("items", "empty instance");
  for (std::size_t j = 0; j < rec.items().size(); ++j) {
    const int s = rec.items()[j];
    if (s < bounds.min_size || s > bounds.max_size)
      throw InvariantError("items", "item " + std::to_string(j) + " = " +
                                        std::to_string(s) + " outside [" +
                                        std::to_string(bounds.min_size) + ", " +
                                        std::to_string(bounds.max_size) + "]");
  }
  if (!(rec.o_bf >= 0.0 && rec.o_bf <= 1.0))
    throw InvariantError("o_bf", "must lie in [0, 1]");
  if (!(rec.o_ff >= 0.0 && rec.o_ff <= 1.0))
    throw InvariantError("o_ff", "must lie in [0, 1]");
  if (rec.o_bf == rec.o_ff)
    throw InvariantError("winner", "tied objectives are not a valid label");
  const Solver expected = rec.o_bf > rec.o_ff ? Solver::BF : Solver::FF;
  if (rec.winner != expected)
    throw InvariantError("winner", "disagrees with o_bf/o_ff");
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  if (dataset.spec)
    out << "{\"spec\":" << spec_to_json(*dataset.spec).dump() << "}\n";
  for (const auto& rec : dataset.instances) out << format_record(rec) << '\n';
}

Dataset read_dataset(std::istream& in) {
  Dataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(line_no, "record is not an object");
    if (j.contains("config") && !j.contains("spec")) continue;
    if (j.contains("spec")) {
      if (line_no != 1 && !out.instances.empty())
        throw ParseError(line_no, "spec header must precede records");
      try {
        out.spec = spec_from_json(j.at("spec"));
      } catch (const Json::exception& e) {
        throw ParseError(line_no, std::string("bad spec header: ") + e.what());
      }
      out.spec->validate();
      continue;
    }
    LabeledInstance rec;
    for (const char* key : {"id", "items", "o_bf", "o_ff", "winner"})
      if (!j.contains(key))
        throw ParseError(line_no, std::string("missing key \"") + key + "\"");
    try {
      rec.instance.id = j.at("id").get<std::string>();
      rec.instance.items = j.at("items").get<std::vector<int>>();
      rec.o_bf = j.at("o_bf").get<double>();
      rec.o_ff = j.at("o_ff").get<double>();
      rec.winner = solver_from_string(j.at("winner").get<std::string>());
    } catch (const Json::exception& e) {
      throw ParseError(line_no, std::string("bad field type: ") + e.what());
    } catch (const DomainError& e) {
      throw ParseError(line_no, e.what());
    }
    try {
      validate_record(rec, out.bounds());
    } catch (const InvariantError& e) {
      throw InvariantError(e.field(), std::string("line ") +
                                          std::to_string(line_no) + ": " +
                                          e.what());
    }
    out.instances.push_back(std::move(rec));
  }
  return out;
}

FilterResult filter_correctly_classified(
    const std::vector<LabeledInstance>& dataset, Backend& model) {
  FilterResult out;
  for (const auto& rec : dataset) {
    const auto verdict = model.predict(rec.items(), rec.id());
    if (verdict.choice() == rec.winner)
      out.kept.push_back(rec);
    else
      out.removed.push_back(rec);
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_dataset(out, dataset);
  if (!out) throw Error("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_dataset(in);
}

}  // namespace bpadv
