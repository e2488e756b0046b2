#include "qdc/optics.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace qdc::optics {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSqrt2 = std::numbers::sqrt2;

using qdc::Qubit;

double quantum_denominator(double phi, double alpha, double delta) {
  return 1.0 + kSqrt2 * std::cos(alpha) * std::sin(alpha) *
                   (std::sin(phi / 2) * std::sin(phi / 2 + delta) -
                    std::cos(phi / 2) * std::cos(phi / 2 - delta));
}

void check_denominator(double den) {
  if (den <= 1e-12) {
    throw DegenerateConditioningError("post-selection probability vanishes");
  }
}

}  // namespace

void NoiseModel::validate() const {
  for (double f : {f1, f2, f3}) {
    if (!(f >= 0.0 && f <= 1.0)) {
      throw std::invalid_argument("noise fidelities must lie in [0, 1]");
    }
  }
}

void ExperimentSetting::validate() const {
  // slack of 1e-9 keeps 9-decimal CSV round trips of pi/2 valid
  if (alpha < -1e-9 || alpha > kPi / 2 + 1e-9) {
    throw std::invalid_argument("alpha must lie in [0, pi/2]");
  }
  if (qrng_bit != 0 && qrng_bit != 1) {
    throw std::invalid_argument("qrng bit must be 0 or 1");
  }
}

OutcomeTable::OutcomeTable(ExperimentSetting setting, std::array<double, 8> joint)
    : setting_(setting), joint_(joint) {
  trigger_ = 0.0;
  for (double p : joint_) {
    if (p < -1e-12 || p > 1.0 + 1e-12) {
      throw std::invalid_argument("joint probability outside [0, 1]");
    }
    trigger_ += p;
  }
  if (trigger_ < 1e-12) {
    throw DegenerateConditioningError("trigger probability vanishes");
  }
}

std::array<double, 8> OutcomeTable::conditionals() const {
  std::array<double, 8> out;
  for (std::size_t i = 0; i < 8; ++i) out[i] = joint_[i] / trigger_;
  return out;
}

PureState particle_state(double phi) {
  const double r = 1.0 / kSqrt2;
  return PureState::single(Qubit::S, r, -std::polar(r, phi));
}

PureState wave_state(double phi) {
  const cplx front = std::polar(1.0, phi / 2);
  return PureState::single(Qubit::S, front * cplx{0.0, -1.0} * std::sin(phi / 2),
                           front * std::cos(phi / 2));
}

PureState alpha_direction(double alpha) {
  return PureState::single(Qubit::A, std::cos(alpha), std::sin(alpha));
}

PureState alpha_perp_direction(double alpha) {
  return PureState::single(Qubit::A, std::sin(alpha), -std::cos(alpha));
}

PureState make_initial_state(double delta) {
  const double r = 1.0 / kSqrt2;
  PureState pair({Qubit::C, Qubit::A},
                 {0.0, r, std::polar(r, delta), 0.0});  // (|HV> + e^{id}|VH>)/sqrt2
  return tensor(tensor(PureState::v(Qubit::S), pair), PureState::h(Qubit::T));
}

std::pair<DensityMatrix, DensityMatrix> make_noisy_sources(const NoiseModel& noise,
                                                           double delta) {
  noise.validate();
  PureState st = tensor(PureState::v(Qubit::S), PureState::h(Qubit::T));
  const double r = 1.0 / kSqrt2;
  PureState ca({Qubit::C, Qubit::A}, {0.0, r, std::polar(r, delta), 0.0});
  DensityMatrix rho_st = mix(to_density(st), DensityMatrix::maximally_mixed({Qubit::S, Qubit::T}),
                             noise.f1);
  DensityMatrix rho_ca = mix(to_density(ca), DensityMatrix::maximally_mixed({Qubit::C, Qubit::A}),
                             noise.f2);
  return {std::move(rho_st), std::move(rho_ca)};
}

double trigger_probability(const NoiseModel& noise) {
  noise.validate();
  return (1.0 + noise.f1 * noise.f3) / 2.0;
}

OutcomeTable run_pipeline(const ExperimentSetting& setting, const NoiseModel& noise) {
  setting.validate();
  noise.validate();
  const double angle = setting.effective_alpha();

  auto [rho_st, rho_ca] = make_noisy_sources(noise, setting.delta);
  DensityMatrix rho = tensor(rho_st, rho_ca);  // labels (S, C, A, T)

  rho = apply_gate(rho, Gate::hadamard(), {Qubit::S});
  rho = apply_gate(rho, Gate::phase(setting.phi), {Qubit::S});
  rho = apply_gate(rho, Gate::w(), {Qubit::S});
  rho = apply_gate(rho, Gate::rotation(angle), {Qubit::A});
  rho = apply_gate(rho, Gate::cz(), {Qubit::C, Qubit::S});
  rho = mix(rho, DensityMatrix::maximally_mixed(rho.labels()), noise.f3);
  rho = apply_gate(rho, Gate::w(), {Qubit::S});

  // Joint projections; A outcomes are read in the post-rotation H/V frame,
  // so H corresponds to |alpha> and V to |alpha_perp>.
  std::array<double, 8> joint{};
  const std::size_t d = rho.dim();
  for (int s = 0; s < 2; ++s) {
    for (int c = 0; c < 2; ++c) {
      for (int a = 0; a < 2; ++a) {
        PureState svec = s == 0 ? PureState::h(Qubit::S) : PureState::v(Qubit::S);
        PureState cvec = c == 0 ? PureState::plus(Qubit::C) : PureState::minus(Qubit::C);
        PureState avec = a == 0 ? PureState::h(Qubit::A) : PureState::v(Qubit::A);
        PureState probe = tensor(tensor(tensor(svec, cvec), avec), PureState::h(Qubit::T));
        cplx p = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          for (std::size_t j = 0; j < d; ++j) {
            p += std::conj(probe.amplitude(i)) * rho.at(i, j) * probe.amplitude(j);
          }
        }
        joint[bin_index(static_cast<SOutcome>(s), static_cast<COutcome>(c),
                        static_cast<AOutcome>(a))] = p.real();
      }
    }
  }
  return OutcomeTable(setting, joint);
}

namespace {

// The four alpha_perp joint probabilities as closed expressions in the
// fidelities; the alpha outcomes follow by the angle shift a -> a + pi/2,
// which swaps the roles of the two analysis directions.
std::array<double, 4> closed_form_perp(double phi, double alpha, double delta,
                                       const NoiseModel& nm) {
  const double c2a = std::cos(2 * alpha), s2a = std::sin(2 * alpha);
  const double cphi = std::cos(phi);
  const double f1 = nm.f1, f2 = nm.f2, f3 = nm.f3;
  const double base_h = 2 * f1 * f3 * (1 - cphi + f2 * cphi * c2a);
  const double base_v = 2 * f1 * f3 * (1 + cphi - f2 * cphi * c2a);
  const double cross = kSqrt2 * f2 * f3 * (1 + f1) * s2a * std::cos(delta);
  const double osc_p = 2 * kSqrt2 * f1 * f2 * f3 * s2a * std::cos(delta + phi);
  const double osc_m = 2 * kSqrt2 * f1 * f2 * f3 * s2a * std::cos(delta - phi);
  return {
      (base_h - cross + osc_p + 2) / 32,  // H, +
      (base_v + cross + osc_m + 2) / 32,  // V, +
      (base_h + cross - osc_p + 2) / 32,  // H, -
      (base_v - cross - osc_m + 2) / 32,  // V, -
  };
}

}  // namespace

std::array<double, 8> closed_form_joint(const ExperimentSetting& setting,
                                        const NoiseModel& noise) {
  setting.validate();
  noise.validate();
  const double angle = setting.effective_alpha();
  auto perp = closed_form_perp(setting.phi, angle, setting.delta, noise);
  auto para = closed_form_perp(setting.phi, angle + kPi / 2, setting.delta, noise);
  std::array<double, 8> joint{};
  joint[bin_index(SOutcome::H, COutcome::Plus, AOutcome::AlphaPerp)] = perp[0];
  joint[bin_index(SOutcome::V, COutcome::Plus, AOutcome::AlphaPerp)] = perp[1];
  joint[bin_index(SOutcome::H, COutcome::Minus, AOutcome::AlphaPerp)] = perp[2];
  joint[bin_index(SOutcome::V, COutcome::Minus, AOutcome::AlphaPerp)] = perp[3];
  joint[bin_index(SOutcome::H, COutcome::Plus, AOutcome::Alpha)] = para[0];
  joint[bin_index(SOutcome::V, COutcome::Plus, AOutcome::Alpha)] = para[1];
  joint[bin_index(SOutcome::H, COutcome::Minus, AOutcome::Alpha)] = para[2];
  joint[bin_index(SOutcome::V, COutcome::Minus, AOutcome::Alpha)] = para[3];
  return joint;
}

ConditionalProbabilities conditional_probabilities(const ExperimentSetting& setting,
                                                   const NoiseModel& noise) {
  ExperimentSetting s = setting;
  s.qrng_bit = 0;
  const auto joint = closed_form_joint(s, noise);
  const double hp = joint[bin_index(SOutcome::H, COutcome::Plus, AOutcome::AlphaPerp)];
  const double hm = joint[bin_index(SOutcome::H, COutcome::Minus, AOutcome::AlphaPerp)];
  const double vp = joint[bin_index(SOutcome::V, COutcome::Plus, AOutcome::AlphaPerp)];
  const double vm = joint[bin_index(SOutcome::V, COutcome::Minus, AOutcome::AlphaPerp)];

  ConditionalProbabilities out;
  const double classical_total = hp + hm + vp + vm;
  if (classical_total <= 1e-12) {
    throw DegenerateConditioningError("alpha_perp post-selection probability vanishes");
  }
  out.p_c_h = (hp + hm) / classical_total;
  out.p_c_v = (vp + vm) / classical_total;
  const double quantum_total = hm + vm;
  if (quantum_total <= 1e-12) {
    out.quantum_defined = false;
    out.p_q_h = std::numeric_limits<double>::quiet_NaN();
    out.p_q_v = std::numeric_limits<double>::quiet_NaN();
  } else {
    out.p_q_h = hm / quantum_total;
    out.p_q_v = vm / quantum_total;
  }
  return out;
}

double p_classical(double phi, double alpha) {
  const double c = std::cos(alpha), s = std::sin(alpha);
  return 0.5 * c * c + s * s * std::sin(phi / 2) * std::sin(phi / 2);
}

double p_classical_v(double phi, double alpha) {
  const double c = std::cos(alpha), s = std::sin(alpha);
  return 0.5 * c * c + s * s * std::cos(phi / 2) * std::cos(phi / 2);
}

double p_quantum(double phi, double alpha, double delta) {
  const double den = quantum_denominator(phi, alpha, delta);
  check_denominator(den);
  const double num = p_classical(phi, alpha) + kSqrt2 * std::cos(alpha) * std::sin(alpha) *
                                                   std::sin(phi / 2) * std::sin(delta + phi / 2);
  return num / den;
}

double p_quantum_v(double phi, double alpha, double delta) {
  const double den = quantum_denominator(phi, alpha, delta);
  check_denominator(den);
  const double num = p_classical_v(phi, alpha) - kSqrt2 * std::cos(alpha) * std::sin(alpha) *
                                                     std::cos(phi / 2) * std::cos(phi / 2 - delta);
  return num / den;
}

double p_classical_fixed_alpha(double phi) {
  return 0.25 + 0.5 * std::sin(phi / 2) * std::sin(phi / 2);
}

double p_classical_fixed_alpha_v(double phi) {
  return 0.25 + 0.5 * std::cos(phi / 2) * std::cos(phi / 2);
}

double p_quantum_fixed_alpha(double phi, double delta) {
  const double den = 1.0 + (std::sin(phi / 2) * std::sin(phi / 2 + delta) -
                            std::cos(phi / 2) * std::cos(phi / 2 - delta)) /
                               kSqrt2;
  check_denominator(den);
  return (0.25 + 0.5 * std::sin(phi / 2) * std::sin(phi / 2) +
          std::sin(phi / 2) * std::sin(delta + phi / 2) / kSqrt2) /
         den;
}

double p_quantum_fixed_alpha_v(double phi, double delta) {
  const double den = 1.0 + (std::sin(phi / 2) * std::sin(phi / 2 + delta) -
                            std::cos(phi / 2) * std::cos(phi / 2 - delta)) /
                               kSqrt2;
  check_denominator(den);
  return (0.25 + 0.5 * std::cos(phi / 2) * std::cos(phi / 2) -
          std::cos(phi / 2) * std::cos(phi / 2 - delta) / kSqrt2) /
         den;
}

double unconditional_visibility(const NoiseModel& noise, int grid_points) {
  noise.validate();
  if (grid_points < 100) {
    throw std::invalid_argument("visibility scan needs at least 100 phi points");
  }
  double pmax = 0.0, pmin = 1.0;
  for (int k = 0; k < grid_points; ++k) {
    const double phi = 2 * kPi * k / (grid_points - 1);
    double p_h = 0.0;
    for (int bit : {0, 1}) {
      ExperimentSetting s{phi, kPi / 4, 0.0, bit};
      OutcomeTable table = run_pipeline(s, noise);
      for (int c = 0; c < 2; ++c) {
        for (int a = 0; a < 2; ++a) {
          p_h += 0.5 * table.conditional(SOutcome::H, static_cast<COutcome>(c),
                                         static_cast<AOutcome>(a));
        }
      }
    }
    pmax = std::max(pmax, p_h);
    pmin = std::min(pmin, p_h);
  }
  return (pmax - pmin) / (pmax + pmin);
}

std::vector<double> linspace(double start, double stop, int count) {
  if (count < 1) throw std::invalid_argument("linspace needs at least one point");
  std::vector<double> out;
  out.reserve(count);
  if (count == 1) {
    out.push_back(start);
    return out;
  }
  for (int k = 0; k < count; ++k) {
    out.push_back(start + (stop - start) * k / (count - 1));
  }
  return out;
}

std::vector<double> paper_phi_grid() { return linspace(0.0, 2 * kPi, 12); }
std::vector<double> paper_alpha_grid() { return linspace(0.0, kPi / 2, 9); }
std::vector<double> paper_delta_grid() { return linspace(-0.05 * kPi, -1.95 * kPi, 9); }

}  // namespace qdc::optics
