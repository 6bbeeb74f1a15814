#pragma once

#include <Eigen/Dense>
#include <string>
#include <variant>
#include <vector>

#include "salt/arhmm.hpp"
#include "salt/lds.hpp"
#include "salt/model.hpp"

namespace salt {

// All writers are atomic (temp file + rename) and byte-deterministic, so
// identical inputs always produce identical files.

// Time series CSV: header `t,y0,...,y{N-1}`, one row per frame, floats with
// 17 significant digits. load(save(x)) reproduces x exactly.
void save_series(const std::string& path, const Eigen::MatrixXd& series);
[[nodiscard]] Eigen::MatrixXd load_series(const std::string& path);

// Fit trace CSV: header `iter,loglik`.
void save_trace(const std::string& path, const std::vector<double>& log_marginal);
[[nodiscard]] std::vector<double> load_trace(const std::string& path);

// Versioned JSON persistence for the three model families. Arrays carry
// explicit shapes with row-major data; floats round-trip exactly and
// save(load(save(m))) is byte-identical. Parse failures report the byte
// offset; a schema_version other than 1 is rejected.
using AnyModel = std::variant<SaltParams, ArhmmParams, LdsParams>;

void save_model(const std::string& path, const AnyModel& model);
[[nodiscard]] AnyModel load_model(const std::string& path);

// "SALT", "ARHMM", or "LDS"; also the "kind" tag used in the files.
[[nodiscard]] std::string model_kind_name(const AnyModel& model);

}  // namespace salt
