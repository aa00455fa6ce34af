#include "bpadv/gru.hpp"

#include <fstream>
#include <sstream>

#include "bpadv/json_util.hpp"

namespace bpadv {

namespace {

Json matrix_json(const GruWeights::Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_json(const GruWeights::Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

const Json& field(const Json& j, const char* name) {
  if (!j.contains(name)) throw SchemaError(name, "missing");
  return j.at(name);
}

double number(const Json& j, const char* name) {
  if (!j.is_number()) throw SchemaError(name, "expected a number");
  return j.get<double>();
}

GruWeights::Matrix parse_matrix(const Json& j, const char* name) {
  if (!j.is_array() || j.empty())
    throw SchemaError(name, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array()) throw SchemaError(name, "rows must be arrays");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  GruWeights::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw SchemaError(name, "ragged row " + std::to_string(i));
    for (Eigen::Index c = 0; c < cols; ++c)
      m(i, c) = number(row[static_cast<std::size_t>(c)], name);
  }
  return m;
}

GruWeights::Vector parse_vector(const Json& j, const char* name) {
  if (!j.is_array()) throw SchemaError(name, "expected an array");
  GruWeights::Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = number(j[i], name);
  return v;
}

}  // namespace

std::string weights_to_json(const GruWeights& w) {
  Json j;
  j["hidden_dim"] = w.hidden_dim;
  j["norm"] = {{"offset", w.norm_offset}, {"scale", w.norm_scale}};
  j["W_z"] = matrix_json(w.W_z);
  j["U_z"] = matrix_json(w.U_z);
  j["b_z"] = vector_json(w.b_z);
  j["W_r"] = matrix_json(w.W_r);
  j["U_r"] = matrix_json(w.U_r);
  j["b_r"] = vector_json(w.b_r);
  j["W_h"] = matrix_json(w.W_h);
  j["U_h"] = matrix_json(w.U_h);
  j["b_h"] = vector_json(w.b_h);
  j["W_out"] = matrix_json(w.W_out);
  j["b_out"] = vector_json(w.b_out);
  return j.dump();
}

GruWeights weights_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError("<document>", e.what());
  }
  if (!j.is_object()) throw SchemaError("<document>", "expected an object");
  GruWeights w;
  const Json& hd = field(j, "hidden_dim");
  if (!hd.is_number_integer()) throw SchemaError("hidden_dim", "expected int");
  w.hidden_dim = hd.get<Eigen::Index>();
  if (w.hidden_dim < 1) throw SchemaError("hidden_dim", "must be >= 1");
  const Json& norm = field(j, "norm");
  w.norm_offset = number(field(norm, "offset"), "norm.offset");
  w.norm_scale = number(field(norm, "scale"), "norm.scale");
  w.W_z = parse_matrix(field(j, "W_z"), "W_z");
  w.U_z = parse_matrix(field(j, "U_z"), "U_z");
  w.b_z = parse_vector(field(j, "b_z"), "b_z");
  w.W_r = parse_matrix(field(j, "W_r"), "W_r");
  w.U_r = parse_matrix(field(j, "U_r"), "U_r");
  w.b_r = parse_vector(field(j, "b_r"), "b_r");
  w.W_h = parse_matrix(field(j, "W_h"), "W_h");
  w.U_h = parse_matrix(field(j, "U_h"), "U_h");
  w.b_h = parse_vector(field(j, "b_h"), "b_h");
  w.W_out = parse_matrix(field(j, "W_out"), "W_out");
  w.b_out = parse_vector(field(j, "b_out"), "b_out");
  w.validate();
  return w;
}

void save_weights(const GruWeights& w, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << weights_to_json(w) << '\n';
}

GruWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return weights_from_json(ss.str());
}

}  // namespace bpadv
