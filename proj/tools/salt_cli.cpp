// Command-line driver: simulate synthetic series, fit switching AR models,
// evaluate them, convert linear systems to their autoregressive form, and
// sweep factor ranks. All subcommands are seed-deterministic and exit with
// 0 on success, 1 on usage errors, 2 on data errors, 3 on numerical errors.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "salt/arhmm.hpp"
#include "salt/datagen.hpp"
#include "salt/errors.hpp"
#include "salt/io.hpp"
#include "salt/lds.hpp"
#include "salt/metrics.hpp"
#include "salt/model.hpp"

namespace {

using nlohmann::json;

std::string format_float(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw salt::DataError("cannot open " + tmp + " for writing");
    out << content;
    out.flush();
    if (!out) throw salt::DataError("write to " + tmp + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw salt::DataError("cannot move " + tmp + " into place: " + ec.message());
}

// State label CSV: header `t,state`, one row per frame.
void save_states(const std::string& path, const std::vector<int>& states) {
  std::string out = "t,state\n";
  for (std::size_t t = 0; t < states.size(); ++t)
    out += std::to_string(t) + "," + std::to_string(states[t]) + "\n";
  write_text(path, out);
}

std::vector<int> load_states(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw salt::DataError("cannot open " + path + " for reading");
  std::string line;
  if (!std::getline(in, line) || (line != "t,state" && line != "t,state\r"))
    throw salt::DataError(path + ": expected a 't,state' header");
  std::vector<int> states;
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw salt::DataError(path + " line " + std::to_string(lineno) + ": expected 2 fields");
    try {
      states.push_back(std::stoi(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw salt::DataError(path + " line " + std::to_string(lineno) + ": bad state label");
    }
  }
  return states;
}

salt::FactorMode parse_mode(const std::string& mode) {
  if (mode == "tucker") return salt::FactorMode::tucker;
  if (mode == "cp") return salt::FactorMode::cp;
  throw salt::DataError("unknown factor mode '" + mode + "' (expected tucker or cp)");
}

struct FitFlags {
  std::string data;
  std::string model_kind = "tucker-salt";
  int states = 1;
  int rank = 1;
  int rank_lag = 0;
  int lags = 1;
  int iters = 100;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  std::string init = "kmeans";
  double sticky_diag = 1.0;
  double sticky_offdiag = 1.0;
  std::string out_model;
  std::string out_trace;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--data", f.data, "training series CSV")->required();
  cmd->add_option("--model-kind", f.model_kind, "cp-salt, tucker-salt, or arhmm");
  cmd->add_option("--states", f.states, "number of discrete states");
  cmd->add_option("--rank", f.rank, "factor rank D");
  cmd->add_option("--rank-lag", f.rank_lag, "lag-mode rank (0 keeps it at D)");
  cmd->add_option("--lags", f.lags, "autoregressive lag order L");
  cmd->add_option("--iters", f.iters, "maximum EM iterations");
  cmd->add_option("--tol", f.tol, "relative log-likelihood plateau tolerance");
  cmd->add_option("--seed", f.seed, "RNG seed");
  cmd->add_option("--init", f.init, "kmeans or random");
  cmd->add_option("--sticky-diag", f.sticky_diag, "Dirichlet prior weight on self-transitions");
  cmd->add_option("--sticky-offdiag", f.sticky_offdiag, "Dirichlet prior weight off-diagonal");
  cmd->add_option("--out-model", f.out_model, "fitted model JSON path");
  cmd->add_option("--out-trace", f.out_trace, "fit trace CSV path");
}

salt::FitConfig to_config(const FitFlags& f) {
  salt::FitConfig cfg;
  cfg.H = f.states;
  cfg.D = f.rank;
  cfg.L = f.lags;
  cfg.rank_lag = f.rank_lag;
  cfg.max_iters = f.iters;
  cfg.rel_tol = f.tol;
  cfg.seed = f.seed;
  cfg.prior.alpha_diag = f.sticky_diag;
  cfg.prior.alpha_offdiag = f.sticky_offdiag;
  if (f.init == "kmeans") {
    cfg.init = salt::InitMethod::kmeans;
  } else if (f.init == "random") {
    cfg.init = salt::InitMethod::random;
  } else {
    throw salt::DataError("unknown init '" + f.init + "' (expected kmeans or random)");
  }
  if (f.model_kind == "cp-salt") {
    cfg.mode = salt::FactorMode::cp;
  } else if (f.model_kind == "tucker-salt" || f.model_kind == "arhmm") {
    cfg.mode = salt::FactorMode::tucker;
  } else {
    throw salt::DataError("unknown model kind '" + f.model_kind +
                          "' (expected cp-salt, tucker-salt, or arhmm)");
  }
  return cfg;
}

// Shared emission model, per-state random rotational dynamics.
salt::SldsGroundTruth random_slds(int num_states, int n_real, int m_pairs, int obs_dim,
                                  double decay, double state_noise, double obs_noise,
                                  double stay, std::uint64_t seed) {
  salt::SldsGroundTruth gt;
  gt.states.reserve(static_cast<std::size_t>(num_states));
  for (int h = 0; h < num_states; ++h)
    gt.states.push_back(salt::random_rotational_lds(n_real, m_pairs, obs_dim, decay,
                                                    seed + static_cast<std::uint64_t>(h),
                                                    state_noise, obs_noise));
  for (int h = 1; h < num_states; ++h) {
    gt.states[static_cast<std::size_t>(h)].C = gt.states[0].C;
    gt.states[static_cast<std::size_t>(h)].d = gt.states[0].d;
    gt.states[static_cast<std::size_t>(h)].R = gt.states[0].R;
  }
  if (num_states == 1) {
    gt.tm = salt::TransitionModel::uniform(1);
  } else {
    gt.tm.init = Eigen::VectorXd::Constant(num_states, 1.0 / num_states);
    gt.tm.pi = Eigen::MatrixXd::Constant(num_states, num_states,
                                         (1.0 - stay) / (num_states - 1));
    gt.tm.pi.diagonal().setConstant(stay);
  }
  return gt;
}

struct EvalInputs {
  std::string model;
  std::string data;
  std::string truth_model;
  std::string truth_states;
  int skip = 0;
  std::string out;
};

json confusion_json(const Eigen::MatrixXi& confusion) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < confusion.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < confusion.cols(); ++j) row.push_back(confusion(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Ground-truth per-state tensor stack for the MSE metric: factored and dense
// models materialize their states; a linear system contributes its
// lag-truncated steady-state predictor.
std::vector<salt::Tensor3> truth_tensors(const salt::AnyModel& truth, int lags) {
  std::vector<salt::Tensor3> stack;
  if (const auto* sp = std::get_if<salt::SaltParams>(&truth)) {
    for (const auto& s : sp->states) stack.push_back(salt::materialize(s.factors));
  } else if (const auto* ap = std::get_if<salt::ArhmmParams>(&truth)) {
    for (const auto& s : ap->states) stack.push_back(s.coef);
  } else {
    const auto& lds = std::get<salt::LdsParams>(truth);
    const salt::SteadyState ss = salt::solve_dare(lds);
    stack.push_back(salt::truncated_kalman_coeffs(ss, lds, lags).coeffs);
  }
  return stack;
}

int run_eval(const EvalInputs& in) {
  const salt::AnyModel model = salt::load_model(in.model);
  const Eigen::MatrixXd y = salt::load_series(in.data);

  salt::EvalReport report;
  std::vector<salt::Tensor3> fitted_tensors;
  std::vector<int> pred_states;
  int lags = 0;

  if (const auto* sp = std::get_if<salt::SaltParams>(&model)) {
    lags = sp->lags();
    const salt::HmmPosterior post = salt::e_step(*sp, y);
    const Eigen::Index scored = y.rows() - lags;
    report.per_frame_loglik = post.log_marginal / static_cast<double>(scored);
    report.explained_variance = salt::explained_variance(
        salt::predictive_means(*sp, y, post.omega), y.bottomRows(scored));
    for (const auto& s : sp->states) fitted_tensors.push_back(salt::materialize(s.factors));
    pred_states = salt::most_likely_states(*sp, y);
  } else if (const auto* ap = std::get_if<salt::ArhmmParams>(&model)) {
    lags = ap->lags();
    const Eigen::MatrixXd table = salt::emission_log_likelihoods(*ap, y);
    const salt::HmmPosterior post = salt::forward_backward(table, ap->tm);
    const Eigen::Index scored = y.rows() - lags;
    report.per_frame_loglik = post.log_marginal / static_cast<double>(scored);
    report.explained_variance = salt::explained_variance(
        salt::predictive_means(*ap, y, post.omega), y.bottomRows(scored));
    for (const auto& s : ap->states) fitted_tensors.push_back(s.coef);
    pred_states = salt::most_likely_states(*ap, y);
  } else {
    const auto& lds = std::get<salt::LdsParams>(model);
    const salt::KalmanEval keval = salt::kalman_steady_predictions(lds, y, in.skip);
    const Eigen::Index scored = y.rows() - in.skip;
    report.per_frame_loglik = keval.log_lik / static_cast<double>(scored);
    report.explained_variance =
        salt::explained_variance(keval.predicted_mean, y.bottomRows(scored));
  }

  if (!in.truth_states.empty() && !pred_states.empty()) {
    std::vector<int> truth = load_states(in.truth_states);
    if (truth.size() == pred_states.size() + static_cast<std::size_t>(lags))
      truth.erase(truth.begin(), truth.begin() + lags);  // drop the conditioning prefix
    const salt::SegmentationResult seg = salt::segmentation_accuracy(pred_states, truth);
    report.seg_accuracy = seg.accuracy;
    report.confusion = seg.confusion;
    report.permutation = seg.permutation;
  }

  if (!in.truth_model.empty() && !fitted_tensors.empty()) {
    const std::vector<salt::Tensor3> truth =
        truth_tensors(salt::load_model(in.truth_model), lags);
    if (report.permutation && report.permutation->size() == fitted_tensors.size() &&
        truth.size() == fitted_tensors.size()) {
      report.tensor_mse = salt::tensor_mse(fitted_tensors, truth, *report.permutation);
    } else {
      report.tensor_mse = salt::tensor_mse(fitted_tensors, truth);
    }
  }

  json j{{"per_frame_loglik", report.per_frame_loglik},
         {"explained_variance", report.explained_variance}};
  if (report.tensor_mse) j["tensor_mse"] = *report.tensor_mse;
  if (report.seg_accuracy) j["seg_accuracy"] = *report.seg_accuracy;
  if (report.confusion) j["confusion"] = confusion_json(*report.confusion);
  if (report.permutation) j["permutation"] = *report.permutation;
  const std::string text = j.dump(2) + "\n";
  if (in.out.empty()) {
    std::cout << text;
  } else {
    write_text(in.out, text);
  }
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Switching autoregressive low-rank tensor models"};
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "generate synthetic series");
  simulate->require_subcommand(1);
  Eigen::Index sim_steps = 1000;
  std::uint64_t sim_seed = 0;
  std::string sim_out, sim_states_out, sim_model_in, sim_model_out;
  int gen_n_real = 1, gen_m_pairs = 3, gen_obs_dim = 20, gen_states = 2, gen_switches = -1;
  double gen_decay = 0.95, gen_state_noise = 0.01, gen_obs_noise = 0.01, gen_stay = 0.98;
  double lorenz_dt = 0.01, lorenz_noise = 0.05;
  int lorenz_dim = 20;
  bool nascar_markov = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--T", sim_steps, "number of frames");
    cmd->add_option("--seed", sim_seed, "RNG seed");
    cmd->add_option("--out", sim_out, "output series CSV")->required();
  };

  auto* sim_lds = simulate->add_subcommand("lds", "linear system observations");
  add_common(sim_lds);
  sim_lds->add_option("--model", sim_model_in, "simulate this LDS JSON instead of generating");
  sim_lds->add_option("--n-real", gen_n_real, "real eigenvalue count");
  sim_lds->add_option("--m-pairs", gen_m_pairs, "complex pair count");
  sim_lds->add_option("--obs-dim", gen_obs_dim, "observation dimension");
  sim_lds->add_option("--decay", gen_decay, "eigenvalue modulus");
  sim_lds->add_option("--state-noise", gen_state_noise, "state noise variance");
  sim_lds->add_option("--obs-noise", gen_obs_noise, "observation noise variance");
  sim_lds->add_option("--save-model", sim_model_out, "write the ground-truth LDS JSON here");

  auto* sim_slds = simulate->add_subcommand("slds", "switching linear system");
  add_common(sim_slds);
  sim_slds->add_option("--states", gen_states, "discrete state count");
  sim_slds->add_option("--n-real", gen_n_real, "real eigenvalue count per state");
  sim_slds->add_option("--m-pairs", gen_m_pairs, "complex pair count per state");
  sim_slds->add_option("--obs-dim", gen_obs_dim, "observation dimension");
  sim_slds->add_option("--decay", gen_decay, "eigenvalue modulus");
  sim_slds->add_option("--state-noise", gen_state_noise, "state noise variance");
  sim_slds->add_option("--obs-noise", gen_obs_noise, "observation noise variance");
  sim_slds->add_option("--stay", gen_stay, "Markov self-transition probability");
  sim_slds->add_option("--switches", gen_switches,
                       "evenly spaced switch count (omit for Markov sampling)");
  sim_slds->add_option("--states-out", sim_states_out, "true state CSV path");

  auto* sim_nascar = simulate->add_subcommand("nascar", "oval-track preset");
  add_common(sim_nascar);
  sim_nascar->add_flag("--markov", nascar_markov, "sample states from the chain instead of laps");
  sim_nascar->add_option("--states-out", sim_states_out, "true state CSV path");

  auto* sim_lorenz = simulate->add_subcommand("lorenz", "Lorenz attractor series");
  add_common(sim_lorenz);
  sim_lorenz->add_option("--dt", lorenz_dt, "integration step");
  sim_lorenz->add_option("--obs-dim", lorenz_dim, "observation dimension");
  sim_lorenz->add_option("--noise", lorenz_noise, "observation noise scale");

  // fit
  auto* fit = app.add_subcommand("fit", "fit a switching AR model with EM");
  FitFlags fit_flags;
  add_fit_flags(fit, fit_flags);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a model on a series");
  EvalInputs eval_in;
  eval->add_option("--model", eval_in.model, "model JSON")->required();
  eval->add_option("--data", eval_in.data, "series CSV")->required();
  eval->add_option("--truth-model", eval_in.truth_model, "ground-truth model JSON");
  eval->add_option("--truth-states", eval_in.truth_states, "ground-truth state CSV");
  eval->add_option("--skip", eval_in.skip, "frames to condition on (LDS models)");
  eval->add_option("--out", eval_in.out, "report JSON path (default: stdout)");

  // lds2salt
  auto* convert = app.add_subcommand("lds2salt", "linear system to factored AR form");
  std::string conv_lds, conv_mode = "tucker", conv_out;
  int conv_lags = 30;
  convert->add_option("--lds", conv_lds, "LDS model JSON")->required();
  convert->add_option("--lags", conv_lags, "AR window length");
  convert->add_option("--mode", conv_mode, "tucker or cp");
  convert->add_option("--out", conv_out, "output SALT JSON")->required();

  // filters
  auto* filters = app.add_subcommand("filters", "dump per-pair AR filters");
  std::string filt_model, filt_pairs, filt_out;
  int filt_state = 0;
  filters->add_option("--model", filt_model, "SALT model JSON")->required();
  filters->add_option("--state", filt_state, "discrete state index");
  filters->add_option("--pairs", filt_pairs, "semicolon-separated p,q index pairs")->required();
  filters->add_option("--out", filt_out, "output CSV")->required();

  // rank-sweep
  auto* sweep = app.add_subcommand("rank-sweep", "fit a grid of ranks and tabulate metrics");
  FitFlags sweep_flags;
  add_fit_flags(sweep, sweep_flags);
  std::string sweep_ranks = "5,6,7,8,9", sweep_test, sweep_truth, sweep_out_csv;
  sweep->add_option("--ranks", sweep_ranks, "comma-separated ranks to fit");
  sweep->add_option("--test-data", sweep_test, "held-out series CSV");
  sweep->add_option("--truth-lds", sweep_truth, "ground-truth LDS JSON for tensor MSE");
  sweep->add_option("--out", sweep_out_csv, "summary CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    json err{{"error", {{"type", "usage"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }

  if (sim_lds->parsed()) {
    salt::LdsParams lds;
    if (!sim_model_in.empty()) {
      lds = std::get<salt::LdsParams>(salt::load_model(sim_model_in));
    } else {
      lds = salt::random_rotational_lds(gen_n_real, gen_m_pairs, gen_obs_dim, gen_decay,
                                        sim_seed, gen_state_noise, gen_obs_noise);
    }
    if (!sim_model_out.empty()) salt::save_model(sim_model_out, lds);
    salt::save_series(sim_out, salt::simulate_lds(lds, sim_steps, sim_seed));
    return 0;
  }
  if (sim_slds->parsed()) {
    const salt::SldsGroundTruth gt =
        random_slds(gen_states, gen_n_real, gen_m_pairs, gen_obs_dim, gen_decay,
                    gen_state_noise, gen_obs_noise, gen_stay, sim_seed);
    const salt::SldsSim sim = gen_switches >= 0
                                  ? salt::simulate_slds(gt, sim_steps, gen_switches, sim_seed)
                                  : salt::simulate_slds(gt, sim_steps, sim_seed);
    salt::save_series(sim_out, sim.observations);
    if (!sim_states_out.empty()) save_states(sim_states_out, sim.true_states);
    return 0;
  }
  if (sim_nascar->parsed()) {
    const salt::SldsGroundTruth gt = salt::nascar_ground_truth(sim_seed);
    const salt::SldsSim sim =
        nascar_markov ? salt::simulate_slds(gt, sim_steps, sim_seed)
                      : salt::simulate_slds(gt, sim_steps, salt::nascar_lap_script(sim_steps),
                                            sim_seed);
    salt::save_series(sim_out, sim.observations);
    if (!sim_states_out.empty()) save_states(sim_states_out, sim.true_states);
    return 0;
  }
  if (sim_lorenz->parsed()) {
    salt::save_series(sim_out, salt::lorenz_series(sim_steps, lorenz_dt, lorenz_dim,
                                                   lorenz_noise, sim_seed));
    return 0;
  }

  if (fit->parsed()) {
    const Eigen::MatrixXd y = salt::load_series(fit_flags.data);
    const salt::FitConfig cfg = to_config(fit_flags);
    salt::FitTrace trace;
    salt::AnyModel fitted{salt::SaltParams{}};
    if (fit_flags.model_kind == "arhmm") {
      salt::ArhmmFitResult res = salt::fit_arhmm(y, cfg);
      trace = std::move(res.trace);
      fitted = std::move(res.params);
    } else {
      salt::FitResult res = salt::fit_em(y, cfg);
      trace = std::move(res.trace);
      fitted = std::move(res.params);
    }
    if (!fit_flags.out_model.empty()) salt::save_model(fit_flags.out_model, fitted);
    if (!fit_flags.out_trace.empty()) salt::save_trace(fit_flags.out_trace, trace.log_marginal);
    std::cout << "converged=" << (trace.converged ? "yes" : "no")
              << " iterations=" << trace.iterations
              << " loglik=" << format_float(trace.log_marginal.back()) << "\n";
    return 0;
  }

  if (eval->parsed()) return run_eval(eval_in);

  if (convert->parsed()) {
    const auto lds = std::get<salt::LdsParams>(salt::load_model(conv_lds));
    salt::save_model(conv_out, salt::lds_to_salt(lds, conv_lags, parse_mode(conv_mode)));
    return 0;
  }

  if (filters->parsed()) {
    const auto model = std::get<salt::SaltParams>(salt::load_model(filt_model));
    std::vector<std::pair<int, int>> pairs;
    std::istringstream pair_in(filt_pairs);
    std::string item;
    while (std::getline(pair_in, item, ';')) {
      const auto comma = item.find(',');
      if (comma == std::string::npos)
        throw salt::DataError("--pairs expects semicolon-separated p,q items");
      pairs.emplace_back(std::stoi(item.substr(0, comma)), std::stoi(item.substr(comma + 1)));
    }
    if (pairs.empty()) throw salt::DataError("--pairs lists no index pairs");
    std::string out = "lag";
    for (const auto& [p, q] : pairs)
      out += ",a" + std::to_string(p) + "_" + std::to_string(q);
    out += '\n';
    std::vector<Eigen::VectorXd> columns;
    for (const auto& [p, q] : pairs) columns.push_back(salt::ar_filter(model, filt_state, p, q));
    for (int l = 0; l < model.lags(); ++l) {
      out += std::to_string(l + 1);
      for (const auto& c : columns) {
        out += ',';
        out += format_float(c[l]);
      }
      out += '\n';
    }
    write_text(filt_out, out);
    return 0;
  }

  if (sweep->parsed()) {
    const Eigen::MatrixXd y = salt::load_series(sweep_flags.data);
    Eigen::MatrixXd y_test;
    if (!sweep_test.empty()) y_test = salt::load_series(sweep_test);
    std::optional<salt::LdsParams> truth;
    if (!sweep_truth.empty())
      truth = std::get<salt::LdsParams>(salt::load_model(sweep_truth));

    std::vector<int> ranks;
    std::istringstream rank_in(sweep_ranks);
    std::string item;
    while (std::getline(rank_in, item, ','))
      if (!item.empty()) ranks.push_back(std::stoi(item));
    if (ranks.empty()) throw salt::DataError("--ranks lists no ranks");

    std::string out = "rank,train_per_frame,test_per_frame,tensor_mse\n";
    for (int rank : ranks) {
      FitFlags flags = sweep_flags;
      flags.rank = rank;
      const salt::FitConfig cfg = to_config(flags);
      const salt::FitResult res = salt::fit_em(y, cfg);
      const double train =
          res.trace.log_marginal.back() / static_cast<double>(y.rows() - cfg.L);
      out += std::to_string(rank) + "," + format_float(train);
      if (y_test.size() > 0) {
        const salt::HmmPosterior post = salt::e_step(res.params, y_test);
        out += "," + format_float(post.log_marginal /
                                  static_cast<double>(y_test.rows() - cfg.L));
      } else {
        out += ",";
      }
      if (truth) {
        std::vector<salt::Tensor3> fitted;
        for (const auto& s : res.params.states) fitted.push_back(salt::materialize(s.factors));
        const salt::SteadyState ss = salt::solve_dare(*truth);
        std::vector<salt::Tensor3> truth_stack(
            fitted.size(), salt::truncated_kalman_coeffs(ss, *truth, cfg.L).coeffs);
        out += "," + format_float(salt::tensor_mse(fitted, truth_stack));
      } else {
        out += ",";
      }
      out += '\n';
    }
    write_text(sweep_out_csv, out);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const salt::NumericalError& err) {
    json j{{"error", {{"type", "numerical"}, {"message", err.what()}}}};
    std::cerr << j.dump() << "\n";
    return 3;
  } catch (const salt::ShapeError& err) {
    json j{{"error", {{"type", "data"}, {"message", err.what()}}}};
    std::cerr << j.dump() << "\n";
    return 2;
  } catch (const salt::DataError& err) {
    json j{{"error", {{"type", "data"}, {"message", err.what()}}}};
    std::cerr << j.dump() << "\n";
    return 2;
  } catch (const std::bad_variant_access&) {
    json j{{"error", {{"type", "data"}, {"message", "model file has the wrong kind"}}}};
    std::cerr << j.dump() << "\n";
    return 2;
  } catch (const std::exception& err) {
    json j{{"error", {{"type", "internal"}, {"message", err.what()}}}};
    std::cerr << j.dump() << "\n";
    return 3;
  }
}
