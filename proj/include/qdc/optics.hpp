// Source states and the full interferometer pipeline: polarization MZI with
// a quantum-controlled Hadamard as the output beam splitter, Werner-state
// pair sources, a white-noise gate channel, and both brute-force and
// closed-form outcome probabilities.
#pragma once

#include <array>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qdc/qcore.hpp"

namespace qdc::optics {

struct DegenerateConditioningError : std::runtime_error {
  explicit DegenerateConditioningError(const std::string& what) : std::runtime_error(what) {}
};

// Fidelity triple of the noise model: Werner fidelities of the two pair
// sources and the white-noise fidelity of the CZ gate. (1,1,1) is ideal.
struct NoiseModel {
  double f1 = 1.0;  // S/T pair
  double f2 = 1.0;  // C/A pair
  double f3 = 1.0;  // gate interference contrast

  void validate() const;
  bool is_ideal() const { return f1 == 1.0 && f2 == 1.0 && f3 == 1.0; }
};

// One measurement setting. When the choice bit is 1 the analysis angle for
// photon A drops to zero and only the particle branch is probed.
struct ExperimentSetting {
  double phi = 0.0;    // MZI phase, radians
  double alpha = 0.0;  // projection angle in [0, pi/2], radians
  double delta = 0.0;  // pair phase, radians
  int qrng_bit = 0;    // 0 or 1

  double effective_alpha() const { return qrng_bit == 0 ? alpha : 0.0; }
  void validate() const;
};

enum class SOutcome : int { H = 0, V = 1 };
enum class COutcome : int { Plus = 0, Minus = 1 };
enum class AOutcome : int { Alpha = 0, AlphaPerp = 1 };

// Flat index into the eight joint (S, C, A) outcome bins.
inline std::size_t bin_index(SOutcome s, COutcome c, AOutcome a) {
  return static_cast<std::size_t>(s) * 4 + static_cast<std::size_t>(c) * 2 +
         static_cast<std::size_t>(a);
}

// Outcome probabilities of one pipeline run. `joint` entries are four-fold
// probabilities P(S, C, A, T=H); `conditional` entries are normalized by the
// trigger probability and sum to 1.
class OutcomeTable {
 public:
  OutcomeTable(ExperimentSetting setting, std::array<double, 8> joint);

  const ExperimentSetting& setting() const { return setting_; }
  double joint(SOutcome s, COutcome c, AOutcome a) const {
    return joint_[bin_index(s, c, a)];
  }
  double conditional(SOutcome s, COutcome c, AOutcome a) const {
    return joint_[bin_index(s, c, a)] / trigger_;
  }
  std::array<double, 8> conditionals() const;
  double trigger_probability() const { return trigger_; }

 private:
  ExperimentSetting setting_;
  std::array<double, 8> joint_;
  double trigger_;
};

// |p> = (|H> - e^{i phi}|V>)/sqrt2: no interference, the particle branch.
PureState particle_state(double phi);
// |w> = e^{i phi/2}(-i sin(phi/2)|H> + cos(phi/2)|V>): the wave branch.
PureState wave_state(double phi);

// |alpha> = cos a|H> + sin a|V> and |alpha_perp> = sin a|H> - cos a|V>,
// the analysis directions for photon A (labelled A).
PureState alpha_direction(double alpha);
PureState alpha_perp_direction(double alpha);

// |V>_S (x) (|HV> + e^{i delta}|VH>)_CA / sqrt2 (x) |H>_T
PureState make_initial_state(double delta);

// Werner-degraded pair sources: rho'_ST over (S, T) and rho'_CA over (C, A).
std::pair<DensityMatrix, DensityMatrix> make_noisy_sources(const NoiseModel& noise, double delta);

// Trigger detection probability P(T = H) = (1 + f1 f3) / 2.
double trigger_probability(const NoiseModel& noise);

// Full density-matrix evolution: source states, Hadamard + phase + W on S,
// analysis rotation on A, CZ on (C, S), white-noise channel, final W on S,
// then the eight joint projections with T post-selected on H.
OutcomeTable run_pipeline(const ExperimentSetting& setting, const NoiseModel& noise);

// Closed-form joint probabilities P(S, C, A, T=H) for the same eight bins.
std::array<double, 8> closed_form_joint(const ExperimentSetting& setting,
                                        const NoiseModel& noise);

// The four conditional probabilities read off the alpha_perp bins of the
// choice-0 branch: P(S | A = alpha_perp) and P(S | C = -, A = alpha_perp).
// `quantum_defined` is false when the C = - post-selection probability
// vanishes (the quantum pair is then NaN).
struct ConditionalProbabilities {
  double p_c_h = 0.0;
  double p_c_v = 0.0;
  double p_q_h = 0.0;
  double p_q_v = 0.0;
  bool quantum_defined = true;
};

ConditionalProbabilities conditional_probabilities(const ExperimentSetting& setting,
                                                   const NoiseModel& noise);

// Ideal conditional probabilities of S=H (and S=V) given A = alpha_perp:
// the classical mixture branch.
double p_classical(double phi, double alpha);
double p_classical_v(double phi, double alpha);

// Ideal conditional probabilities of S=H (and S=V) given C = minus and
// A = alpha_perp: the coherent superposition branch.
double p_quantum(double phi, double alpha, double delta);
double p_quantum_v(double phi, double alpha, double delta);

// Specializations at alpha = pi/4.
double p_classical_fixed_alpha(double phi);
double p_classical_fixed_alpha_v(double phi);
double p_quantum_fixed_alpha(double phi, double delta);
double p_quantum_fixed_alpha_v(double phi, double delta);

// Interference visibility of S with C and A ignored (both choice branches
// weighted equally), scanned over a phi grid of at least 100 points.
double unconditional_visibility(const NoiseModel& noise, int grid_points = 201);

// The published scan grids: 12 phi on [0, 2pi], 9 alpha on [0, pi/2],
// 9 delta on [-0.05 pi, -1.95 pi].
std::vector<double> paper_phi_grid();
std::vector<double> paper_alpha_grid();
std::vector<double> paper_delta_grid();
std::vector<double> linspace(double start, double stop, int count);

}  // namespace qdc::optics
