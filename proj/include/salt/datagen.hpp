#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "salt/hmm.hpp"
#include "salt/lds.hpp"

namespace salt {

// Ground truth for a switching linear system: per-state latent dynamics with
// one shared observation model (C, d, R identical across states).
struct SldsGroundTruth {
  std::vector<LdsParams> states;
  TransitionModel tm;

  // Optional initial latent law. When empty the start is drawn zero-mean from
  // the first scripted state's stationary covariance; presets whose geometry
  // lives away from the origin (the oval track) pin the start instead.
  Eigen::VectorXd x0_mean;  // latent_dim, or empty
  Eigen::MatrixXd x0_cov;   // latent_dim x latent_dim, or empty

  [[nodiscard]] int num_states() const { return static_cast<int>(states.size()); }
  [[nodiscard]] int latent_dim() const { return states.empty() ? 0 : states[0].latent_dim(); }
  [[nodiscard]] int obs_dim() const { return states.empty() ? 0 : states[0].obs_dim(); }

  // Shapes consistent, emission model actually shared, every dynamics matrix
  // strictly stable, transition rows stochastic.
  void validate() const;
};

struct SldsSim {
  Eigen::MatrixXd observations;  // steps x N
  std::vector<int> true_states;  // length steps
};

// Block-diagonal rotational dynamics: n_real scalar modes and m_pairs plane
// rotations at seeded random angles, every eigenvalue modulus exactly equal
// to decay. C is random with unit-norm columns, Q and R are scaled
// identities, b = d = 0.
[[nodiscard]] LdsParams random_rotational_lds(int n_real, int m_pairs, int obs_dim,
                                              double decay, std::uint64_t seed,
                                              double state_noise = 0.01,
                                              double obs_noise = 0.01);

// Evenly spaced state script: n_switches switches splitting steps into
// n_switches + 1 equal runs that cycle through 0 .. num_states-1.
[[nodiscard]] std::vector<int> evenly_spaced_script(Eigen::Index steps, int num_states,
                                                    int n_switches);

// Switching simulation with an explicit per-frame state script. The frame-t
// observation uses the shared emission model; the advance into frame t+1 uses
// state script[t+1]'s dynamics. With a single state this reproduces
// simulate_lds bit for bit at the same seed.
[[nodiscard]] SldsSim simulate_slds(const SldsGroundTruth& gt, Eigen::Index steps,
                                    const std::vector<int>& script, std::uint64_t seed);

// Evenly spaced switches (see evenly_spaced_script).
[[nodiscard]] SldsSim simulate_slds(const SldsGroundTruth& gt, Eigen::Index steps,
                                    int n_switches, std::uint64_t seed);

// Markov-sampled states from gt.tm; the whole state path is drawn before any
// continuous noise so the single-state reduction still matches simulate_lds.
[[nodiscard]] SldsSim simulate_slds(const SldsGroundTruth& gt, Eigen::Index steps,
                                    std::uint64_t seed);

// Oval-track preset: four states in a 2-D latent space driving 10-D
// observations. States 0 and 2 are straightaways (translation dynamics along
// +x and -x), states 1 and 3 are half-turns (rotation about the right and
// left turn centers). One scripted lap closes on itself; see
// nascar_lap_script for the segment timing.
[[nodiscard]] SldsGroundTruth nascar_ground_truth(std::uint64_t seed);

// Lap schedule for the preset: repeating [0 x 50, 1 x 50, 2 x 50, 3 x 50].
[[nodiscard]] std::vector<int> nascar_lap_script(Eigen::Index steps);

// Reference starting point of the scripted lap (entry of the bottom
// straightaway); one full lap maps it back onto itself.
[[nodiscard]] Eigen::Vector2d nascar_start();

// One fourth-order Runge-Kutta step of the classic Lorenz system
// (sigma = 10, rho = 28, beta = 8/3).
[[nodiscard]] Eigen::Vector3d lorenz_rk4_step(const Eigen::Vector3d& x, double dt);

// Lorenz attractor series: integrate with RK4 from a seeded start (discarding
// a fixed warmup time), z-score each coordinate over the emitted frames, then
// map to obs_dim dimensions with a seeded random linear map plus white noise
// of the given scale. identity_map skips the random map (requires obs_dim 3).
[[nodiscard]] Eigen::MatrixXd lorenz_series(Eigen::Index steps, double dt, int obs_dim,
                                            double noise_scale, std::uint64_t seed,
                                            bool identity_map = false);

}  // namespace salt
