// Least-squares fitting: the fidelity triple of the noise model against
// coincidence-count tables, two-photon interference dip curves, and the
// dip-position-versus-phase line. The optimizer is a damped (Levenberg-
// Marquardt) local method with box bounds and a deterministic multi-start.
#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdc/counts.hpp"

namespace qdc::fitkit {

struct InsufficientDataError : std::runtime_error {
  explicit InsufficientDataError(const std::string& what) : std::runtime_error(what) {}
};

struct FitResult {
  std::vector<std::string> parameter_names;
  std::vector<double> parameters;
  std::vector<double> std_errors;
  double residual_norm = 0.0;  // 2-norm of the weighted residual vector
  int iterations = 0;
  bool converged = false;
  int start_index = 0;
  std::vector<double> residuals;  // weighted; filled for the small fits
};

std::string fit_result_to_json(const FitResult& result);

// ---------------------------------------------------------------------------
// Bounded Levenberg-Marquardt core

struct LeastSquaresProblem {
  // residuals(p) -> m weighted residuals
  std::function<std::vector<double>(const std::vector<double>&)> residuals;
  // jacobian(p) -> row-major m x n; empty function = central differences
  std::function<std::vector<double>(const std::vector<double>&)> jacobian;
  std::vector<double> lower;
  std::vector<double> upper;
};

struct LmOptions {
  int max_iterations = 200;
  double gradient_tol = 1e-8;  // cosine-style orthogonality measure
  // When no damped step descends any further, the point is accepted as a
  // minimum if the cosine is below this (squared cosine bounds the relative
  // cost improvement still available).
  double stall_gradient_tol = 1e-4;
  double step_tol = 1e-14;
};

struct LmOutcome {
  std::vector<double> parameters;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

LmOutcome levenberg_marquardt(const LeastSquaresProblem& problem, std::vector<double> start,
                              const LmOptions& options = {});

// Central-difference Jacobian, used when no analytic one is supplied and by
// the gradient cross-checks.
std::vector<double> numeric_jacobian(
    const std::function<std::vector<double>(const std::vector<double>&)>& residuals,
    const std::vector<double>& p, double step = 1e-6);

// ---------------------------------------------------------------------------
// Noise-model fit

struct NoiseFitConfig {
  // A frozen parameter keeps its value and is excluded from the fit.
  std::array<bool, 3> frozen{false, false, false};
  std::array<double, 3> frozen_values{1.0, 1.0, 1.0};
};

// Weighted least squares of the 16 bin fractions of every record against
// the closed-form model, parameters bounded to [0,1]^3, coarse-lattice
// multi-start, best-of selection. Deterministic given the data.
FitResult fit_noise_params(const std::vector<counts::CountRecord>& data,
                           const NoiseFitConfig& config = {});

// The underlying problem (free parameters only) and the start lattice;
// exposed so the gradient and descent properties can be checked directly.
LeastSquaresProblem noise_fit_problem(const std::vector<counts::CountRecord>& data,
                                      const NoiseFitConfig& config = {});
std::vector<std::vector<double>> noise_fit_starts(std::size_t free_count);

// ---------------------------------------------------------------------------
// Two-photon interference dip

// Ideal dip contrast of a partially polarizing splitter with V transmission
// t_v: (P_out - P_in)/P_out with P_out = t_v^2 + (1-t_v)^2 and
// P_in = (2 t_v - 1)^2.
double hom_contrast_ideal(double t_v);

struct HomDipModel {
  double baseline = 0.0;
  double visibility = 0.0;
  double center_mm = 0.0;
  double width_mm = 0.0;

  double value(double position_mm) const;
};

struct HomPoint {
  double position_mm;
  double counts;
};

// Poisson-weighted Gaussian-dip fit; returns (baseline, visibility, center,
// width) with standard errors.
FitResult fit_hom_dip(const std::vector<HomPoint>& points);

LeastSquaresProblem hom_dip_problem(const std::vector<HomPoint>& points);
std::vector<std::vector<double>> hom_dip_starts(const std::vector<HomPoint>& points);

struct DipPositionPoint {
  double phi;
  double center_mm;
  double sigma_mm;
};

// Weighted linear regression of dip position against phase.
FitResult fit_dip_position_vs_phi(const std::vector<DipPositionPoint>& points);

// Analysis angle realized by the half-wave plate at angle theta: 0 when the
// choice bit is 1, otherwise 4 theta - pi/2 (must land in [0, pi/2]).
double hwp_to_alpha(double theta, int bit);

}  // namespace qdc::fitkit
