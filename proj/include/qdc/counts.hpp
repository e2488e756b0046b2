// Synthetic coincidence counting: a seeded stand-in for the hardware QRNG,
// Monte Carlo sampling of four-fold coincidences, ratio estimators with
// Poisson error bars, and the pulse-sorting electronics of the fast
// polarization switch.
#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdc/optics.hpp"

namespace qdc::counts {

struct InsufficientCountsError : std::runtime_error {
  explicit InsufficientCountsError(const std::string& what) : std::runtime_error(what) {}
};

// Counter-mode pseudo-random generator (splitmix64). Used everywhere a
// reproducible, platform-stable stream is needed.
std::uint64_t mix64(std::uint64_t x);
// Per-grid-point seed: base seed combined with the point index.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t point_index);

// Uniform double in [0, 1) from a counter-mode stream.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed) : state_(seed) {}
  double next();
  std::uint64_t next_u64();

 private:
  std::uint64_t state_;
};

struct BitStream {
  std::uint64_t seed = 0;
  std::vector<int> bits;
  double period_ns = 200.0;  // 5 MHz switching rate
};

BitStream qrng_stream(std::uint64_t seed, std::size_t n);

// Index into the 16 coincidence bins: choice bit (0 or 1) times 8 plus the
// (S, C, A) outcome index.
inline std::size_t count_bin(int bit, optics::SOutcome s, optics::COutcome c,
                             optics::AOutcome a) {
  return static_cast<std::size_t>(bit) * 8 + optics::bin_index(s, c, a);
}

struct CountRecord {
  optics::ExperimentSetting setting;  // qrng_bit field unused; bins carry it
  std::array<std::uint64_t, 16> bins{};
  std::uint64_t total_trials = 0;

  std::uint64_t detected() const;
};

struct SimOptions {
  double loss_probability = 0.0;  // per-trial chance the event is dropped
};

// Samples `trials` triggered events: each draws a choice bit, then one joint
// outcome from the pipeline table of the corresponding analysis angle.
CountRecord simulate_counts(const optics::ExperimentSetting& setting,
                            const optics::NoiseModel& noise, std::uint64_t trials,
                            std::uint64_t seed, const SimOptions& options = {});

struct Estimate {
  double value = 0.0;
  double sigma = 0.0;
};

struct ProbabilityEstimates {
  Estimate p_c_h;  // P(S=H | A=alpha_perp)
  Estimate p_c_v;
  Estimate p_q_h;  // P(S=H | C=-, A=alpha_perp)
  Estimate p_q_v;
};

// sqrt(a b / (a+b)^3): Poisson-propagated error of the ratio a/(a+b).
double ratio_sigma(double a, double b);

ProbabilityEstimates estimate_probabilities(const CountRecord& record);
// Same estimators over fractional expected counts (test mode).
ProbabilityEstimates estimate_from_bins(const std::array<double, 16>& bins);

// ---------------------------------------------------------------------------
// Pulse classification (the coincidence electronics of the fast switch)

struct DetectorPulse {
  double t_ns;
  char channel;  // 'H' or 'V'
};

struct SwitchTimeline {
  std::vector<double> bit_edges;  // strictly increasing times of level changes
  int initial_level = 0;          // level before the first edge
  std::vector<DetectorPulse> detector_pulses;
  double classifier_delay_ns = 0.0;  // ground-truth electronics lag
};

// Random-bit level at time t (0 or 1).
int level_at(const SwitchTimeline& timeline, double t_ns);

struct CoincidenceTallies {
  std::uint64_t h_bit1 = 0;
  std::uint64_t h_bit0 = 0;
  std::uint64_t v_bit1 = 0;
  std::uint64_t v_bit0 = 0;
};

// ANDs every detector pulse with the delayed bit level and its inverse.
CoincidenceTallies classify_pulses(const SwitchTimeline& timeline, double candidate_delay_ns);

struct CalibrationResult {
  double best_delay_ns = 0.0;
  std::vector<std::pair<double, double>> contrast_curve;  // (delay, contrast)
  bool degenerate = false;  // flat curve, e.g. constant bit level
};

// Scans candidate delays and returns the one with maximal sorting contrast;
// ties resolve toward the smallest delay.
CalibrationResult calibrate_delay(const SwitchTimeline& timeline, double scan_start_ns,
                                  double scan_stop_ns, double step_ns);

struct EomStreamOptions {
  double transition_window_ns = 10.0;  // switch settling time after an edge
  double lag_ns = 88.0;                // bit generation to detector pulse
};

// Synthesizes the switching-contrast measurement: horizontally polarized
// photons through the modulator at 45 degrees. Level 1 leaves H unchanged,
// level 0 rotates to V; photons arriving inside the settling window after an
// edge still see the pre-edge level.
SwitchTimeline simulate_eom_stream(const BitStream& bits,
                                   const std::vector<double>& photon_times_ns,
                                   const EomStreamOptions& options = {});

// CSV serialization of count records, one row per bin:
// phi,alpha,delta,s,c,a,bit,count (radians at 9 decimals; outcome codes
// H/V, P/M, A/AP, 0/1).
std::string to_csv(const std::vector<CountRecord>& records);
std::vector<CountRecord> from_csv(const std::string& text);

}  // namespace qdc::counts
