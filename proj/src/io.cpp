#include "salt/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "salt/errors.hpp"

namespace salt {

namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp + " for writing");
    out << content;
    out.flush();
    if (!out) throw DataError("write to " + tmp + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move " + tmp + " into place: " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw DataError("read from " + path + " failed");
  return buf.str();
}

void append_float(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

double parse_float(const std::string& token, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0')
    throw DataError(where + ": expected a number, got '" + token + "'");
  return v;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

// Arrays are stored as {"shape": [...], "data": [...]} with row-major data.
json matrix_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return json{{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

json vector_json(const Eigen::VectorXd& v) {
  json data = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) data.push_back(v[i]);
  return json{{"shape", {v.size()}}, {"data", std::move(data)}};
}

json tensor_json(const Tensor3& t) {
  return json{{"shape", {t.n1(), t.n2(), t.n3()}}, {"data", t.data()}};
}

const json& require(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw DataError(std::string("model file is missing '") + key + "'");
  return *it;
}

std::vector<Eigen::Index> read_shape(const json& array, std::size_t rank, const char* key) {
  const json& shape = require(array, "shape");
  if (!shape.is_array() || shape.size() != rank)
    throw ShapeError(std::string("'") + key + "' has the wrong shape rank");
  std::vector<Eigen::Index> out;
  for (const auto& s : shape) out.push_back(s.get<Eigen::Index>());
  return out;
}

void check_length(const json& array, Eigen::Index expected, const char* key) {
  const json& data = require(array, "data");
  if (!data.is_array() || static_cast<Eigen::Index>(data.size()) != expected)
    throw ShapeError(std::string("'") + key + "' declares " + std::to_string(expected) +
                     " values but carries " + std::to_string(data.size()));
}

Eigen::MatrixXd read_matrix(const json& j, const char* key) {
  const json& array = require(j, key);
  const auto shape = read_shape(array, 2, key);
  check_length(array, shape[0] * shape[1], key);
  const json& data = array["data"];
  Eigen::MatrixXd m(shape[0], shape[1]);
  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < shape[0]; ++i)
    for (Eigen::Index j2 = 0; j2 < shape[1]; ++j2) m(i, j2) = data[at++].get<double>();
  return m;
}

Eigen::VectorXd read_vector(const json& j, const char* key) {
  const json& array = require(j, key);
  const auto shape = read_shape(array, 1, key);
  check_length(array, shape[0], key);
  const json& data = array["data"];
  Eigen::VectorXd v(shape[0]);
  for (Eigen::Index i = 0; i < shape[0]; ++i) v[i] = data[i].get<double>();
  return v;
}

Tensor3 read_tensor(const json& j, const char* key) {
  const json& array = require(j, key);
  const auto shape = read_shape(array, 3, key);
  check_length(array, shape[0] * shape[1] * shape[2], key);
  const json& data = array["data"];
  Tensor3 t(static_cast<int>(shape[0]), static_cast<int>(shape[1]),
            static_cast<int>(shape[2]));
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = data[i].get<double>();
  return t;
}

json transition_json(const TransitionModel& tm) {
  return json{{"transitions", matrix_json(tm.pi)}, {"init", vector_json(tm.init)}};
}

TransitionModel read_transitions(const json& j) {
  TransitionModel tm;
  tm.pi = read_matrix(j, "transitions");
  tm.init = read_vector(j, "init");
  return tm;
}

json salt_json(const SaltParams& p) {
  json j{{"schema_version", kSchemaVersion},
         {"kind", "SALT"},
         {"layout", "row-major"},
         {"mode", p.mode == FactorMode::tucker ? "tucker" : "cp"},
         {"H", p.num_states()},
         {"N", p.dim()},
         {"L", p.lags()},
         {"D", p.rank()}};
  j.update(transition_json(p.tm));
  json states = json::array();
  for (const auto& s : p.states)
    states.push_back(json{{"U", matrix_json(s.factors.U)},
                          {"V", matrix_json(s.factors.V)},
                          {"W", matrix_json(s.factors.W)},
                          {"G", tensor_json(s.factors.G)},
                          {"bias", vector_json(s.bias)},
                          {"cov", matrix_json(s.cov)}});
  j["states"] = std::move(states);
  return j;
}

SaltParams read_salt(const json& j) {
  SaltParams p;
  const std::string mode = require(j, "mode").get<std::string>();
  if (mode == "tucker") {
    p.mode = FactorMode::tucker;
  } else if (mode == "cp") {
    p.mode = FactorMode::cp;
  } else {
    throw DataError("unknown factor mode '" + mode + "'");
  }
  p.tm = read_transitions(j);
  for (const json& s : require(j, "states")) {
    SaltStateParams state;
    state.factors.U = read_matrix(s, "U");
    state.factors.V = read_matrix(s, "V");
    state.factors.W = read_matrix(s, "W");
    state.factors.G = read_tensor(s, "G");
    state.bias = read_vector(s, "bias");
    state.cov = read_matrix(s, "cov");
    p.states.push_back(std::move(state));
  }
  if (require(j, "H").get<int>() != p.num_states() || require(j, "N").get<int>() != p.dim() ||
      require(j, "L").get<int>() != p.lags() || require(j, "D").get<int>() != p.rank())
    throw ShapeError("declared dimensions disagree with the stored arrays");
  p.validate();
  return p;
}

json arhmm_json(const ArhmmParams& p) {
  json j{{"schema_version", kSchemaVersion},
         {"kind", "ARHMM"},
         {"layout", "row-major"},
         {"H", p.num_states()},
         {"N", p.dim()},
         {"L", p.lags()}};
  j.update(transition_json(p.tm));
  json states = json::array();
  for (const auto& s : p.states)
    states.push_back(json{{"coef", tensor_json(s.coef)},
                          {"bias", vector_json(s.bias)},
                          {"cov", matrix_json(s.cov)}});
  j["states"] = std::move(states);
  return j;
}

ArhmmParams read_arhmm(const json& j) {
  ArhmmParams p;
  p.tm = read_transitions(j);
  for (const json& s : require(j, "states")) {
    ArhmmStateParams state;
    state.coef = read_tensor(s, "coef");
    state.bias = read_vector(s, "bias");
    state.cov = read_matrix(s, "cov");
    p.states.push_back(std::move(state));
  }
  if (require(j, "H").get<int>() != p.num_states() || require(j, "N").get<int>() != p.dim() ||
      require(j, "L").get<int>() != p.lags())
    throw ShapeError("declared dimensions disagree with the stored arrays");
  p.validate();
  return p;
}

json lds_json(const LdsParams& p) {
  return json{{"schema_version", kSchemaVersion},
              {"kind", "LDS"},
              {"layout", "row-major"},
              {"N", p.obs_dim()},
              {"D", p.latent_dim()},
              {"A", matrix_json(p.A)},
              {"b", vector_json(p.b)},
              {"Q", matrix_json(p.Q)},
              {"C", matrix_json(p.C)},
              {"d", vector_json(p.d)},
              {"R", matrix_json(p.R)}};
}

LdsParams read_lds(const json& j) {
  LdsParams p;
  p.A = read_matrix(j, "A");
  p.b = read_vector(j, "b");
  p.Q = read_matrix(j, "Q");
  p.C = read_matrix(j, "C");
  p.d = read_vector(j, "d");
  p.R = read_matrix(j, "R");
  if (require(j, "N").get<int>() != p.obs_dim() || require(j, "D").get<int>() != p.latent_dim())
    throw ShapeError("declared dimensions disagree with the stored arrays");
  p.validate();
  return p;
}

}  // namespace

void save_series(const std::string& path, const Eigen::MatrixXd& series) {
  std::string out = "t";
  for (Eigen::Index j = 0; j < series.cols(); ++j) out += ",y" + std::to_string(j);
  out += '\n';
  for (Eigen::Index t = 0; t < series.rows(); ++t) {
    out += std::to_string(t);
    for (Eigen::Index j = 0; j < series.cols(); ++j) {
      out += ',';
      append_float(out, series(t, j));
    }
    out += '\n';
  }
  write_atomic(path, out);
}

Eigen::MatrixXd load_series(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty series file");
  const auto header = split_csv(line);
  if (header.empty() || header[0] != "t")
    throw DataError(path + ": series header must start with 't'");
  const auto cols = static_cast<Eigen::Index>(header.size()) - 1;
  if (cols < 1) throw DataError(path + ": series has no value columns");

  std::vector<double> values;
  Eigen::Index rows = 0;
  for (Eigen::Index lineno = 2; std::getline(in, line); ++lineno) {
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (static_cast<Eigen::Index>(fields.size()) != cols + 1)
      throw DataError(path + " line " + std::to_string(lineno) + ": expected " +
                      std::to_string(cols + 1) + " fields, got " +
                      std::to_string(fields.size()));
    const std::string where = path + " line " + std::to_string(lineno);
    for (Eigen::Index j = 1; j <= cols; ++j)
      values.push_back(parse_float(fields[static_cast<std::size_t>(j)], where));
    ++rows;
  }
  Eigen::MatrixXd series(rows, cols);
  for (Eigen::Index t = 0; t < rows; ++t)
    for (Eigen::Index j = 0; j < cols; ++j) series(t, j) = values[t * cols + j];
  return series;
}

void save_trace(const std::string& path, const std::vector<double>& log_marginal) {
  std::string out = "iter,loglik\n";
  for (std::size_t i = 0; i < log_marginal.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    append_float(out, log_marginal[i]);
    out += '\n';
  }
  write_atomic(path, out);
}

std::vector<double> load_trace(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != std::vector<std::string>{"iter", "loglik"})
    throw DataError(path + ": expected an 'iter,loglik' trace header");
  std::vector<double> out;
  for (Eigen::Index lineno = 2; std::getline(in, line); ++lineno) {
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 2)
      throw DataError(path + " line " + std::to_string(lineno) + ": expected 2 fields");
    out.push_back(parse_float(fields[1], path + " line " + std::to_string(lineno)));
  }
  return out;
}

void save_model(const std::string& path, const AnyModel& model) {
  const json j = std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SaltParams>) return salt_json(m);
        if constexpr (std::is_same_v<T, ArhmmParams>) return arhmm_json(m);
        if constexpr (std::is_same_v<T, LdsParams>) return lds_json(m);
      },
      model);
  write_atomic(path, j.dump(2) + "\n");
}

AnyModel load_model(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& err) {
    throw DataError(path + ": parse error at byte " + std::to_string(err.byte) + ": " +
                    err.what());
  }
  if (!j.is_object()) throw DataError(path + ": model file must hold a JSON object");
  try {
    const int version = require(j, "schema_version").get<int>();
    if (version != kSchemaVersion)
      throw DataError(path + ": schema version " + std::to_string(version) +
                      " is not supported (expected " + std::to_string(kSchemaVersion) + ")");
    const std::string kind = require(j, "kind").get<std::string>();
    if (kind == "SALT") return read_salt(j);
    if (kind == "ARHMM") return read_arhmm(j);
    if (kind == "LDS") return read_lds(j);
    throw DataError(path + ": unknown model kind '" + kind + "'");
  } catch (const json::exception& err) {
    throw DataError(path + ": malformed model file: " + err.what());
  }
}

std::string model_kind_name(const AnyModel& model) {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SaltParams>) return "SALT";
        if constexpr (std::is_same_v<T, ArhmmParams>) return "ARHMM";
        (void)m;
        return "LDS";
      },
      model);
}

}  // namespace salt
