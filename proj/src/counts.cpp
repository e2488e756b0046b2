#include "qdc/counts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace qdc::counts {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t point_index) {
  return mix64(base ^ mix64(point_index));
}

std::uint64_t UniformStream::next_u64() {
  state_ += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double UniformStream::next() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

BitStream qrng_stream(std::uint64_t seed, std::size_t n) {
  if (n < 1) throw std::invalid_argument("qrng_stream needs n >= 1");
  BitStream out;
  out.seed = seed;
  out.bits.reserve(n);
  UniformStream stream(seed);
  for (std::size_t i = 0; i < n; ++i) {
    out.bits.push_back(static_cast<int>(stream.next_u64() >> 63));
  }
  return out;
}

std::uint64_t CountRecord::detected() const {
  std::uint64_t s = 0;
  for (std::uint64_t b : bins) s += b;
  return s;
}

CountRecord simulate_counts(const optics::ExperimentSetting& setting,
                            const optics::NoiseModel& noise, std::uint64_t trials,
                            std::uint64_t seed, const SimOptions& options) {
  if (trials < 1) throw std::invalid_argument("simulate_counts needs trials >= 1");
  if (options.loss_probability < 0.0 || options.loss_probability > 1.0) {
    throw std::invalid_argument("loss probability must lie in [0, 1]");
  }

  // Outcome distributions of the two choice branches, conditional on the
  // trigger (each simulated trial is a triggered event).
  optics::ExperimentSetting s0 = setting;
  s0.qrng_bit = 0;
  optics::ExperimentSetting s1 = setting;
  s1.qrng_bit = 1;
  const std::array<double, 8> branch[2] = {optics::run_pipeline(s0, noise).conditionals(),
                                           optics::run_pipeline(s1, noise).conditionals()};
  double cumulative[2][8];
  for (int b = 0; b < 2; ++b) {
    double acc = 0.0;
    for (int k = 0; k < 8; ++k) {
      acc += branch[b][k];
      cumulative[b][k] = acc;
    }
    cumulative[b][7] = 1.0;  // guard against rounding in the last bin
  }

  CountRecord record;
  record.setting = setting;
  record.total_trials = trials;
  UniformStream stream(seed);
  for (std::uint64_t t = 0; t < trials; ++t) {
    const int bit = static_cast<int>(stream.next_u64() >> 63);
    if (options.loss_probability > 0.0 && stream.next() < options.loss_probability) {
      continue;
    }
    const double u = stream.next();
    int k = 0;
    while (k < 7 && u >= cumulative[bit][k]) ++k;
    ++record.bins[static_cast<std::size_t>(bit) * 8 + k];
  }
  return record;
}

double ratio_sigma(double a, double b) {
  const double n = a + b;
  if (n <= 0.0) return 0.0;
  return std::sqrt(a * b / (n * n * n));
}

namespace {

using optics::AOutcome;
using optics::COutcome;
using optics::SOutcome;

ProbabilityEstimates estimate_impl(const std::array<double, 16>& bins) {
  const double hp = bins[count_bin(0, SOutcome::H, COutcome::Plus, AOutcome::AlphaPerp)];
  const double hm = bins[count_bin(0, SOutcome::H, COutcome::Minus, AOutcome::AlphaPerp)];
  const double vp = bins[count_bin(0, SOutcome::V, COutcome::Plus, AOutcome::AlphaPerp)];
  const double vm = bins[count_bin(0, SOutcome::V, COutcome::Minus, AOutcome::AlphaPerp)];

  auto require_nonzero = [](double total, const char* what, const std::string& empties) {
    if (total <= 0.0) {
      throw InsufficientCountsError(std::string("no counts for ") + what +
                                    "; empty bins: " + empties);
    }
  };

  std::string classical_empty;
  for (auto [v, name] : {std::pair{hp, "H+AP"}, {hm, "H-AP"}, {vp, "V+AP"}, {vm, "V-AP"}}) {
    if (v <= 0.0) classical_empty += std::string(name) + " ";
  }
  require_nonzero(hp + hm + vp + vm, "the classical estimator", classical_empty);

  ProbabilityEstimates out;
  out.p_c_h = {(hp + hm) / (hp + hm + vp + vm), ratio_sigma(hp + hm, vp + vm)};
  out.p_c_v = {(vp + vm) / (hp + hm + vp + vm), ratio_sigma(vp + vm, hp + hm)};

  std::string quantum_empty;
  if (hm <= 0.0) quantum_empty += "H-AP ";
  if (vm <= 0.0) quantum_empty += "V-AP ";
  require_nonzero(hm + vm, "the quantum estimator", quantum_empty);
  out.p_q_h = {hm / (hm + vm), ratio_sigma(hm, vm)};
  out.p_q_v = {vm / (hm + vm), ratio_sigma(vm, hm)};
  return out;
}

}  // namespace

ProbabilityEstimates estimate_probabilities(const CountRecord& record) {
  std::array<double, 16> bins;
  for (std::size_t i = 0; i < 16; ++i) bins[i] = static_cast<double>(record.bins[i]);
  return estimate_impl(bins);
}

ProbabilityEstimates estimate_from_bins(const std::array<double, 16>& bins) {
  return estimate_impl(bins);
}

// ---------------------------------------------------------------------------
// Pulse classification

int level_at(const SwitchTimeline& timeline, double t_ns) {
  auto it = std::upper_bound(timeline.bit_edges.begin(), timeline.bit_edges.end(), t_ns);
  const std::size_t toggles = static_cast<std::size_t>(it - timeline.bit_edges.begin());
  return timeline.initial_level ^ static_cast<int>(toggles & 1u);
}

CoincidenceTallies classify_pulses(const SwitchTimeline& timeline, double candidate_delay_ns) {
  CoincidenceTallies tallies;
  for (const DetectorPulse& pulse : timeline.detector_pulses) {
    const int level = level_at(timeline, pulse.t_ns - candidate_delay_ns);
    if (pulse.channel == 'H') {
      (level == 1 ? tallies.h_bit1 : tallies.h_bit0)++;
    } else if (pulse.channel == 'V') {
      (level == 1 ? tallies.v_bit1 : tallies.v_bit0)++;
    } else {
      throw std::invalid_argument("detector channel must be 'H' or 'V'");
    }
  }
  return tallies;
}

namespace {

double sorting_contrast(const CoincidenceTallies& t) {
  // Ratio of the two possible matched/mismatched pairings, orientation-free.
  // Plus-one smoothing keeps empty pairings finite.
  const double r = (static_cast<double>(t.h_bit1 + t.v_bit0) + 1.0) /
                   (static_cast<double>(t.h_bit0 + t.v_bit1) + 1.0);
  return std::max(r, 1.0 / r);
}

}  // namespace

CalibrationResult calibrate_delay(const SwitchTimeline& timeline, double scan_start_ns,
                                  double scan_stop_ns, double step_ns) {
  if (step_ns <= 0.0) throw std::invalid_argument("calibration step must be positive");
  if (scan_stop_ns < scan_start_ns) {
    throw std::invalid_argument("calibration range is empty");
  }
  CalibrationResult result;
  double best = -1.0;
  for (double d = scan_start_ns; d <= scan_stop_ns + 1e-9; d += step_ns) {
    const double contrast = sorting_contrast(classify_pulses(timeline, d));
    result.contrast_curve.emplace_back(d, contrast);
    if (contrast > best + 1e-12) {
      best = contrast;
      result.best_delay_ns = d;
    }
  }
  double lo = result.contrast_curve.front().second, hi = lo;
  for (const auto& [d, c] : result.contrast_curve) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  result.degenerate = (hi - lo) <= 1e-9 * std::max(1.0, hi);
  return result;
}

SwitchTimeline simulate_eom_stream(const BitStream& bits,
                                   const std::vector<double>& photon_times_ns,
                                   const EomStreamOptions& options) {
  if (bits.bits.empty()) throw std::invalid_argument("bit stream is empty");
  SwitchTimeline timeline;
  timeline.initial_level = bits.bits.front();
  timeline.classifier_delay_ns = options.lag_ns;
  for (std::size_t k = 1; k < bits.bits.size(); ++k) {
    if (bits.bits[k] != bits.bits[k - 1]) {
      timeline.bit_edges.push_back(static_cast<double>(k) * bits.period_ns);
    }
  }
  std::vector<double> times = photon_times_ns;
  std::sort(times.begin(), times.end());
  timeline.detector_pulses.reserve(times.size());
  for (double t : times) {
    int level = level_at(timeline, t);
    // Inside the settling window after an edge the modulator still acts per
    // the pre-edge level.
    auto it = std::upper_bound(timeline.bit_edges.begin(), timeline.bit_edges.end(), t);
    if (it != timeline.bit_edges.begin()) {
      const double last_edge = *(it - 1);
      if (t - last_edge < options.transition_window_ns) level ^= 1;
    }
    timeline.detector_pulses.push_back({t + options.lag_ns, level == 1 ? 'H' : 'V'});
  }
  return timeline;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

const char* kCsvHeader = "phi,alpha,delta,s,c,a,bit,count";

std::string format_angle(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", x);
  return buf;
}

}  // namespace

std::string to_csv(const std::vector<CountRecord>& records) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const CountRecord& rec : records) {
    const std::string prefix = format_angle(rec.setting.phi) + "," +
                               format_angle(rec.setting.alpha) + "," +
                               format_angle(rec.setting.delta) + ",";
    for (int bit = 0; bit < 2; ++bit) {
      for (int s = 0; s < 2; ++s) {
        for (int c = 0; c < 2; ++c) {
          for (int a = 0; a < 2; ++a) {
            const std::size_t i =
                count_bin(bit, static_cast<SOutcome>(s), static_cast<COutcome>(c),
                          static_cast<AOutcome>(a));
            out += prefix;
            out += (s == 0 ? "H," : "V,");
            out += (c == 0 ? "P," : "M,");
            out += (a == 0 ? "A," : "AP,");
            out += (bit == 0 ? "0," : "1,");
            out += std::to_string(rec.bins[i]);
            out += '\n';
          }
        }
      }
    }
  }
  return out;
}

std::vector<CountRecord> from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<CountRecord> records;
  std::map<std::string, std::size_t> index;

  auto fail = [&](const std::string& why) {
    throw std::runtime_error("counts CSV line " + std::to_string(line_no) + ": " + why);
  };

  if (!std::getline(in, line)) throw std::runtime_error("counts CSV is empty");
  line_no = 1;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) fail("expected header '" + std::string(kCsvHeader) + "'");

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    fields.push_back(cur);
    if (fields.size() != 8) fail("expected 8 comma-separated fields");

    double phi, alpha, delta;
    unsigned long long count;
    try {
      phi = std::stod(fields[0]);
      alpha = std::stod(fields[1]);
      delta = std::stod(fields[2]);
      count = std::stoull(fields[7]);
    } catch (const std::exception&) {
      fail("could not parse numeric field");
      return {};  // unreachable
    }
    int s, c, a, bit;
    if (fields[3] == "H") s = 0;
    else if (fields[3] == "V") s = 1;
    else { fail("S outcome must be H or V"); return {}; }
    if (fields[4] == "P") c = 0;
    else if (fields[4] == "M") c = 1;
    else { fail("C outcome must be P or M"); return {}; }
    if (fields[5] == "A") a = 0;
    else if (fields[5] == "AP") a = 1;
    else { fail("A outcome must be A or AP"); return {}; }
    if (fields[6] == "0") bit = 0;
    else if (fields[6] == "1") bit = 1;
    else { fail("bit must be 0 or 1"); return {}; }

    const std::string key = fields[0] + "|" + fields[1] + "|" + fields[2];
    auto [it, inserted] = index.try_emplace(key, records.size());
    if (inserted) {
      CountRecord rec;
      rec.setting = {phi, alpha, delta, 0};
      records.push_back(rec);
    }
    CountRecord& rec = records[it->second];
    rec.bins[count_bin(bit, static_cast<SOutcome>(s), static_cast<COutcome>(c),
                       static_cast<AOutcome>(a))] += count;
  }
  for (CountRecord& rec : records) rec.total_trials = rec.detected();
  return records;
}

}  // namespace qdc::counts
