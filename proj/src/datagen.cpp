#include "salt/datagen.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "salt/errors.hpp"
#include "salt/rng.hpp"

namespace salt {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

Eigen::MatrixXd chol_or_throw(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw NumericalError(std::string(what) + " covariance is not positive definite");
  return llt.matrixL();
}

double spectral_radius(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> eig(a, false);
  if (eig.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

int draw_categorical(Rng& rng, const Eigen::VectorXd& probs) {
  const double u = rng.uniform();
  double run = 0.0;
  for (Eigen::Index h = 0; h < probs.size(); ++h) {
    run += probs[h];
    if (u < run) return static_cast<int>(h);
  }
  return static_cast<int>(probs.size() - 1);
}

// NASCAR preset geometry: straightaways of half-length a at y = -r and
// y = +r, half-turns of radius r about (+a, 0) and (-a, 0). Each segment
// lasts kSegmentSteps frames; the damping keeps every state strictly stable
// while leaving the lap closure error far below the segment step size.
constexpr double kTrackHalfLength = 2.0;
constexpr double kTrackRadius = 1.0;
constexpr int kSegmentSteps = 50;
constexpr double kDamping = 1.0 - 1e-6;
constexpr double kNascarStateNoise = 1e-6;
constexpr double kNascarObsNoise = 1e-2;

}  // namespace

void SldsGroundTruth::validate() const {
  if (states.empty()) throw ShapeError("switching system has no states");
  tm.validate();
  if (tm.num_states() != num_states())
    throw ShapeError("transition model size does not match state count");
  const LdsParams& first = states[0];
  for (const auto& s : states) {
    s.validate();
    if (s.latent_dim() != first.latent_dim() || s.obs_dim() != first.obs_dim())
      throw ShapeError("states disagree on latent or observation dimension");
    if (s.C != first.C || s.d != first.d || s.R != first.R)
      throw ShapeError("states must share the emission model");
    if (spectral_radius(s.A) >= 1.0)
      throw DataError("every state's dynamics matrix must be strictly stable");
  }
  if (x0_mean.size() > 0) {
    if (x0_mean.size() != latent_dim())
      throw ShapeError("initial latent mean does not match the latent dimension");
    if (!x0_mean.allFinite()) throw DataError("initial latent mean must be finite");
  }
  if (x0_cov.size() > 0) {
    if (x0_cov.rows() != latent_dim() || x0_cov.cols() != latent_dim())
      throw ShapeError("initial latent covariance does not match the latent dimension");
    if (!x0_cov.allFinite()) throw DataError("initial latent covariance must be finite");
  }
}

LdsParams random_rotational_lds(int n_real, int m_pairs, int obs_dim, double decay,
                                std::uint64_t seed, double state_noise, double obs_noise) {
  if (n_real < 0 || m_pairs < 0 || n_real + m_pairs == 0)
    throw DataError("need at least one real mode or rotation pair");
  if (obs_dim < 1) throw DataError("observation dimension must be positive");
  if (decay <= 0.0 || decay >= 1.0) throw DataError("decay must lie in (0, 1)");
  if (state_noise <= 0.0 || obs_noise <= 0.0) throw DataError("noise scales must be positive");

  const int dim = n_real + 2 * m_pairs;
  Rng rng(seed);

  LdsParams p;
  p.A = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < n_real; ++i) p.A(i, i) = decay;
  for (int j = 0; j < m_pairs; ++j) {
    const double theta = rng.uniform(0.2, kPi - 0.2);
    const int at = n_real + 2 * j;
    const double c = decay * std::cos(theta), s = decay * std::sin(theta);
    p.A(at, at) = c;
    p.A(at, at + 1) = -s;
    p.A(at + 1, at) = s;
    p.A(at + 1, at + 1) = c;
  }

  p.C.resize(obs_dim, dim);
  for (int i = 0; i < obs_dim; ++i)
    for (int j = 0; j < dim; ++j) p.C(i, j) = rng.normal();
  for (int j = 0; j < dim; ++j) p.C.col(j) /= p.C.col(j).norm();

  p.b = Eigen::VectorXd::Zero(dim);
  p.d = Eigen::VectorXd::Zero(obs_dim);
  p.Q = state_noise * Eigen::MatrixXd::Identity(dim, dim);
  p.R = obs_noise * Eigen::MatrixXd::Identity(obs_dim, obs_dim);
  return p;
}

std::vector<int> evenly_spaced_script(Eigen::Index steps, int num_states, int n_switches) {
  if (steps < 1) throw DataError("script needs at least one step");
  if (num_states < 1) throw DataError("script needs at least one state");
  if (n_switches < 0 || n_switches >= steps)
    throw DataError("switch count must lie in [0, steps)");
  std::vector<int> script(static_cast<std::size_t>(steps));
  const int runs = n_switches + 1;
  for (Eigen::Index t = 0; t < steps; ++t) {
    const auto run = static_cast<int>((t * runs) / steps);
    script[static_cast<std::size_t>(t)] = run % num_states;
  }
  return script;
}

namespace {

// Continuous pass shared by every overload. Callers position rng so that,
// with one state, the stream matches simulate_lds exactly: the observation
// draws for frame t come before the latent advance into frame t+1.
SldsSim run_script(const SldsGroundTruth& gt, Eigen::Index steps,
                   std::vector<int>&& script, Rng& rng) {
  const int num_states = gt.num_states();
  for (int z : script)
    if (z < 0 || z >= num_states) throw DataError("state script indexes a missing state");

  const int dim = gt.latent_dim(), n = gt.obs_dim();
  std::vector<Eigen::MatrixXd> lq(static_cast<std::size_t>(num_states));
  for (int h = 0; h < num_states; ++h)
    lq[static_cast<std::size_t>(h)] = chol_or_throw(gt.states[h].Q, "state noise");
  const Eigen::MatrixXd lr = chol_or_throw(gt.states[0].R, "observation noise");

  const LdsParams& first = gt.states[static_cast<std::size_t>(script[0])];
  Eigen::MatrixXd l0;
  if (gt.x0_cov.size() > 0) {
    l0 = chol_or_throw(gt.x0_cov, "initial latent covariance");
  } else {
    Eigen::LLT<Eigen::MatrixXd> init_llt(stationary_latent_cov(first));
    l0 = init_llt.info() == Eigen::Success ? Eigen::MatrixXd(init_llt.matrixL())
                                           : lq[static_cast<std::size_t>(script[0])];
  }

  auto draw = [&rng](Eigen::Index k) {
    Eigen::VectorXd v(k);
    for (Eigen::Index i = 0; i < k; ++i) v[i] = rng.normal();
    return v;
  };

  SldsSim sim;
  sim.observations.resize(steps, n);
  Eigen::VectorXd x = l0 * draw(dim);
  if (gt.x0_mean.size() > 0) x += gt.x0_mean;
  for (Eigen::Index t = 0; t < steps; ++t) {
    sim.observations.row(t) = (first.C * x + first.d + lr * draw(n)).transpose();
    if (t + 1 < steps) {
      const auto h = static_cast<std::size_t>(script[static_cast<std::size_t>(t + 1)]);
      x = gt.states[h].A * x + gt.states[h].b + lq[h] * draw(dim);
    }
  }
  sim.true_states = std::move(script);
  return sim;
}

}  // namespace

SldsSim simulate_slds(const SldsGroundTruth& gt, Eigen::Index steps,
                      const std::vector<int>& script, std::uint64_t seed) {
  gt.validate();
  if (steps < 1) throw DataError("simulate_slds: steps must be positive");
  if (static_cast<Eigen::Index>(script.size()) != steps)
    throw ShapeError("state script length does not match the step count");
  Rng rng(seed);
  return run_script(gt, steps, std::vector<int>(script), rng);
}

SldsSim simulate_slds(const SldsGroundTruth& gt, Eigen::Index steps, int n_switches,
                      std::uint64_t seed) {
  return simulate_slds(gt, steps, evenly_spaced_script(steps, gt.num_states(), n_switches),
                       seed);
}

SldsSim simulate_slds(const SldsGroundTruth& gt, Eigen::Index steps, std::uint64_t seed) {
  gt.validate();
  if (steps < 1) throw DataError("simulate_slds: steps must be positive");
  Rng rng(seed);
  std::vector<int> script(static_cast<std::size_t>(steps), 0);
  if (gt.num_states() > 1) {
    // Draw the whole discrete path before any continuous noise; a one-state
    // system consumes nothing here, preserving the simulate_lds reduction.
    script[0] = draw_categorical(rng, gt.tm.init);
    for (Eigen::Index t = 1; t < steps; ++t)
      script[static_cast<std::size_t>(t)] = draw_categorical(
          rng, gt.tm.pi.row(script[static_cast<std::size_t>(t - 1)]).transpose());
  }
  return run_script(gt, steps, std::move(script), rng);
}

SldsGroundTruth nascar_ground_truth(std::uint64_t seed) {
  const double a = kTrackHalfLength, r = kTrackRadius;
  const double theta = kPi / kSegmentSteps;
  const double step = 2.0 * a / kSegmentSteps;

  Rng rng(seed);
  Eigen::MatrixXd c(10, 2);
  for (int i = 0; i < c.rows(); ++i)
    for (int j = 0; j < c.cols(); ++j) c(i, j) = rng.normal();
  for (int j = 0; j < c.cols(); ++j) c.col(j) /= c.col(j).norm();

  Eigen::Matrix2d rot;
  rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);

  SldsGroundTruth gt;
  gt.states.resize(4);
  for (int h = 0; h < 4; ++h) {
    LdsParams& p = gt.states[static_cast<std::size_t>(h)];
    p.C = c;
    p.d = Eigen::VectorXd::Zero(10);
    p.Q = kNascarStateNoise * Eigen::MatrixXd::Identity(2, 2);
    p.R = kNascarObsNoise * Eigen::MatrixXd::Identity(10, 10);
    if (h == 0 || h == 2) {
      p.A = kDamping * Eigen::Matrix2d::Identity();
      p.b = Eigen::Vector2d(h == 0 ? step : -step, 0.0);
    } else {
      const Eigen::Vector2d center(h == 1 ? a : -a, 0.0);
      p.A = kDamping * rot;
      p.b = center - p.A * center;  // the turn center is the exact fixed point
    }
  }

  // Scripted laps trace the nominal loop only when the trajectory starts on
  // it; the near-unit damping never pulls a stray start back to the track.
  gt.x0_mean = nascar_start();
  gt.x0_cov = kNascarStateNoise * Eigen::Matrix2d::Identity();

  // Sticky cyclic chain whose expected dwell matches the scripted segments.
  const double stay = 1.0 - 1.0 / kSegmentSteps;
  gt.tm.init = Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);
  gt.tm.pi = Eigen::MatrixXd::Zero(4, 4);
  for (int h = 0; h < 4; ++h) {
    gt.tm.pi(h, h) = stay;
    gt.tm.pi(h, (h + 1) % 4) = 1.0 - stay;
  }
  return gt;
}

std::vector<int> nascar_lap_script(Eigen::Index steps) {
  if (steps < 1) throw DataError("script needs at least one step");
  std::vector<int> script(static_cast<std::size_t>(steps));
  for (Eigen::Index t = 0; t < steps; ++t)
    script[static_cast<std::size_t>(t)] = static_cast<int>((t / kSegmentSteps) % 4);
  return script;
}

Eigen::Vector2d nascar_start() { return {-kTrackHalfLength, -kTrackRadius}; }

Eigen::Vector3d lorenz_rk4_step(const Eigen::Vector3d& x, double dt) {
  const auto deriv = [](const Eigen::Vector3d& v) {
    constexpr double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0;
    return Eigen::Vector3d(sigma * (v[1] - v[0]), v[0] * (rho - v[2]) - v[1],
                           v[0] * v[1] - beta * v[2]);
  };
  const Eigen::Vector3d k1 = deriv(x);
  const Eigen::Vector3d k2 = deriv(x + 0.5 * dt * k1);
  const Eigen::Vector3d k3 = deriv(x + 0.5 * dt * k2);
  const Eigen::Vector3d k4 = deriv(x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Eigen::MatrixXd lorenz_series(Eigen::Index steps, double dt, int obs_dim, double noise_scale,
                              std::uint64_t seed, bool identity_map) {
  if (steps < 2) throw DataError("lorenz_series needs at least two steps");
  if (dt <= 0.0) throw DataError("step size must be positive");
  if (obs_dim < 1) throw DataError("observation dimension must be positive");
  if (noise_scale < 0.0) throw DataError("noise scale must be non-negative");
  if (identity_map && obs_dim != 3)
    throw DataError("the identity map needs a 3-dimensional output");

  Rng rng(seed);
  Eigen::Vector3d x(1.0 + rng.uniform(-0.5, 0.5), 1.0 + rng.uniform(-0.5, 0.5),
                    25.0 + rng.uniform(-0.5, 0.5));
  // Fixed warmup time so the state reaches the attractor regardless of dt.
  const auto warmup = static_cast<Eigen::Index>(std::ceil(20.0 / dt));
  for (Eigen::Index t = 0; t < warmup; ++t) x = lorenz_rk4_step(x, dt);

  Eigen::MatrixXd path(steps, 3);
  for (Eigen::Index t = 0; t < steps; ++t) {
    path.row(t) = x.transpose();
    x = lorenz_rk4_step(x, dt);
  }
  const Eigen::RowVector3d mean = path.colwise().mean();
  path.rowwise() -= mean;
  for (int j = 0; j < 3; ++j) {
    const double sd = std::sqrt(path.col(j).squaredNorm() / static_cast<double>(steps));
    path.col(j) /= sd > 0.0 ? sd : 1.0;
  }

  Eigen::MatrixXd map;
  if (identity_map) {
    map = Eigen::MatrixXd::Identity(3, 3);
  } else {
    map.resize(obs_dim, 3);
    for (int i = 0; i < obs_dim; ++i)
      for (int j = 0; j < 3; ++j) map(i, j) = rng.normal() / std::sqrt(3.0);
  }

  Eigen::MatrixXd out = path * map.transpose();
  if (noise_scale > 0.0) {
    for (Eigen::Index t = 0; t < steps; ++t)
      for (int j = 0; j < obs_dim; ++j) out(t, j) += noise_scale * rng.normal();
  }
  return out;
}

}  // namespace salt
