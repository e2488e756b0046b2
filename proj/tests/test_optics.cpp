#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qdc/optics.hpp"

using namespace qdc;
using namespace qdc::optics;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent route to the conditional probabilities: state-vector
// evolution through the monolithic CH gate plus sequential projections.
// The closed forms under test never enter here.
struct BruteForce {
  double p_c_h;
  double p_q_h;
};

PureState final_pure_state(double phi, double delta) {
  PureState psi = make_initial_state(delta);
  psi = apply_gate(psi, Gate::hadamard(), {Qubit::S});
  psi = apply_gate(psi, Gate::phase(phi), {Qubit::S});
  return apply_gate(psi, Gate::ch(), {Qubit::C, Qubit::S});
}

BruteForce brute_force(double phi, double alpha, double delta) {
  PureState psi = final_pure_state(phi, delta);
  psi = project(psi, Qubit::T, PureState::h(Qubit::T)).state;
  PureState psi_sc = project(psi, Qubit::A, alpha_perp_direction(alpha)).state;
  DensityMatrix rho_s = partial_trace(to_density(psi_sc), {Qubit::S});
  const double p_c_h = rho_s.at(0, 0).real();
  PureState psi_s = project(psi_sc, Qubit::C, PureState::minus(Qubit::C)).state;
  return {p_c_h, std::norm(psi_s.amplitude(0))};
}

}  // namespace

TEST_CASE("wave and particle state constructors") {
  CHECK(overlap(wave_state(0.0), PureState::v(Qubit::S)) == doctest::Approx(1.0).epsilon(1e-12));
  // |<H|w(pi/2)>|^2 = sin^2(pi/4)
  CHECK(overlap(wave_state(kPi / 2), PureState::h(Qubit::S)) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(overlap(particle_state(kPi / 2), wave_state(kPi / 2)) < 1e-12);
}

TEST_CASE("wave/particle overlap follows cos^2(phi)/2") {
  for (int k = 0; k < 100; ++k) {
    const double phi = 2 * kPi * k / 99;
    const double expected = std::cos(phi) * std::cos(phi) / 2;
    CHECK(std::abs(overlap(particle_state(phi), wave_state(phi)) - expected) <= 1e-12);
  }
}

TEST_CASE("initial state amplitudes") {
  PureState psi = make_initial_state(0.0);
  REQUIRE(psi.dim() == 16);
  const double r = 1.0 / std::numbers::sqrt2;
  // order (S, C, A, T): |V H V H> at 0b1010, |V V H H> at 0b1100
  CHECK(std::abs(psi.amplitude(0b1010) - cplx{r, 0.0}) < 1e-14);
  CHECK(std::abs(psi.amplitude(0b1100) - cplx{r, 0.0}) < 1e-14);
  double rest = 0.0;
  for (std::size_t i = 0; i < 16; ++i) {
    if (i != 0b1010 && i != 0b1100) rest += std::norm(psi.amplitude(i));
  }
  CHECK(rest < 1e-28);

  PureState psi_pi = make_initial_state(kPi);
  CHECK(std::abs(psi_pi.amplitude(0b1100) + psi_pi.amplitude(0b1010)) < 1e-14);

  DensityMatrix rho_c = partial_trace(to_density(psi), {Qubit::C});
  CHECK(max_abs_diff(rho_c, DensityMatrix::maximally_mixed({Qubit::C})) <= 1e-14);
}

TEST_CASE("noisy sources are Werner mixtures") {
  SUBCASE("f1 = 1 keeps the pure product state") {
    auto [rho_st, rho_ca] = make_noisy_sources({1.0, 0.5, 1.0}, 0.3);
    PureState vh = tensor(PureState::v(Qubit::S), PureState::h(Qubit::T));
    CHECK(max_abs_diff(rho_st, to_density(vh)) <= 1e-14);
  }
  SUBCASE("f2 = 0 fully depolarizes the pair") {
    auto [rho_st, rho_ca] = make_noisy_sources({1.0, 0.0, 1.0}, 0.0);
    CHECK(max_abs_diff(rho_ca, DensityMatrix::maximally_mixed({Qubit::C, Qubit::A})) <= 1e-14);
  }
  SUBCASE("f2 = 0.9 off-diagonal coherence") {
    auto [rho_st, rho_ca] = make_noisy_sources({1.0, 0.9, 1.0}, 0.0);
    // <HV| rho |VH> = f2 / 2 over (C, A)
    CHECK(std::abs(rho_ca.at(1, 2) - cplx{0.45, 0.0}) <= 1e-14);
    rho_ca.validate();
  }
}

TEST_CASE("projecting A at alpha = pi/2 leaves the wave branch") {
  PureState psi = final_pure_state(0.7, 0.0);
  psi = project(psi, Qubit::T, PureState::h(Qubit::T)).state;
  auto [prob, rest] = project(psi, Qubit::A, alpha_perp_direction(kPi / 2));
  CHECK(prob == doctest::Approx(0.5).epsilon(1e-12));
  PureState expected = tensor(wave_state(0.7), PureState::v(Qubit::C));
  CHECK(overlap(rest, expected) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("post-selected states match the derived branch forms") {
  const double phi = 1.1, alpha = 0.7, delta = -0.9;
  PureState psi = final_pure_state(phi, delta);
  psi = project(psi, Qubit::T, PureState::h(Qubit::T)).state;
  PureState psi_sc = project(psi, Qubit::A, alpha_perp_direction(alpha)).state;

  SUBCASE("A projection branch: -cos a |p>|H> + e^{i d} sin a |w>|V>") {
    std::vector<cplx> amp(4);
    PureState p = particle_state(phi), w = wave_state(phi);
    for (int s = 0; s < 2; ++s) {
      amp[std::size_t(s) * 2 + 0] = -std::cos(alpha) * p.amplitude(s);
      amp[std::size_t(s) * 2 + 1] = std::polar(std::sin(alpha), delta) * w.amplitude(s);
    }
    PureState expected({Qubit::S, Qubit::C}, std::move(amp));
    CHECK(overlap(psi_sc, expected) == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("C projection gives the superposition with coefficient C_S") {
    PureState psi_s = project(psi_sc, Qubit::C, PureState::minus(Qubit::C)).state;
    PureState p = particle_state(phi), w = wave_state(phi);
    std::vector<cplx> amp(2);
    double norm2 = 0.0;
    for (int s = 0; s < 2; ++s) {
      amp[s] = std::cos(alpha) * p.amplitude(s) +
               std::polar(std::sin(alpha), delta) * w.amplitude(s);
      norm2 += std::norm(amp[s]);
    }
    // 1/|C_S|^2 equals the conditioning denominator
    const double cs_inv2 =
        1.0 - std::numbers::sqrt2 * std::cos(alpha) * std::sin(alpha) * std::cos(phi) *
                  std::cos(delta);
    CHECK(norm2 == doctest::Approx(cs_inv2).epsilon(1e-12));
    PureState expected({Qubit::S}, std::move(amp));
    CHECK(overlap(psi_s, expected) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("normalization identity: the bracket equals -cos(phi) cos(delta)") {
  for (double phi : paper_phi_grid()) {
    for (double delta : paper_delta_grid()) {
      const double bracket = std::sin(phi / 2) * std::sin(phi / 2 + delta) -
                             std::cos(phi / 2) * std::cos(phi / 2 - delta);
      CHECK(std::abs(bracket + std::cos(phi) * std::cos(delta)) <= 1e-12);
    }
  }
}

TEST_CASE("classical mixture after tracing the control photon") {
  const double phi = 2.2, alpha = 0.5;
  PureState psi = final_pure_state(phi, -1.3);
  psi = project(psi, Qubit::T, PureState::h(Qubit::T)).state;
  PureState psi_sc = project(psi, Qubit::A, alpha_perp_direction(alpha)).state;
  DensityMatrix rho_s = partial_trace(to_density(psi_sc), {Qubit::S});
  DensityMatrix expected =
      mix(to_density(particle_state(phi)), to_density(wave_state(phi)),
          std::cos(alpha) * std::cos(alpha));
  CHECK(max_abs_diff(rho_s, expected) <= 1e-12);
}

TEST_CASE("tracing C and A without projection leaves the even mixture") {
  PureState psi = final_pure_state(1.7, 0.4);
  psi = project(psi, Qubit::T, PureState::h(Qubit::T)).state;
  DensityMatrix rho_s = partial_trace(to_density(psi), {Qubit::S});
  DensityMatrix expected =
      mix(to_density(particle_state(1.7)), to_density(wave_state(1.7)), 0.5);
  CHECK(max_abs_diff(rho_s, expected) <= 1e-12);
}

TEST_CASE("classical probability values") {
  CHECK(p_classical(0.0, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p_classical(kPi, kPi / 2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p_classical(kPi / 2, kPi / 4) == doctest::Approx(0.5).epsilon(1e-12));
  // cross-check via the projection + partial trace oracle
  CHECK(brute_force(kPi / 2, kPi / 4, 0.9).p_c_h == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("quantum probability values") {
  CHECK(p_quantum(kPi, kPi / 4, 0.0) == doctest::Approx(0.8535533905932737).epsilon(1e-12));
  CHECK(p_quantum(kPi, kPi / 4, kPi) == doctest::Approx(0.1464466094067261).epsilon(1e-11));
  for (double phi : {0.0, 1.0, 2.5}) {
    for (double delta : {-0.3, 0.0, 2.0}) {
      CHECK(p_quantum(phi, 0.0, delta) == doctest::Approx(0.5).epsilon(1e-12));
    }
  }
}

TEST_CASE("fixed-alpha specializations agree with the general forms") {
  for (double phi : paper_phi_grid()) {
    for (double delta : paper_delta_grid()) {
      CHECK(std::abs(p_quantum_fixed_alpha(phi, delta) - p_quantum(phi, kPi / 4, delta)) <=
            1e-14);
      CHECK(std::abs(p_quantum_fixed_alpha_v(phi, delta) - p_quantum_v(phi, kPi / 4, delta)) <=
            1e-14);
      CHECK(std::abs(p_classical_fixed_alpha(phi) - p_classical(phi, kPi / 4)) <= 1e-14);
    }
  }
  CHECK(p_quantum_fixed_alpha(kPi, 0.0) == doctest::Approx(0.8535533905932737).epsilon(1e-12));
  CHECK(p_quantum_fixed_alpha(0.0, 0.0) == doctest::Approx(0.8535533905932737).epsilon(1e-12));
  CHECK(p_classical_fixed_alpha(kPi) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("H and V probabilities are complementary") {
  for (double phi : paper_phi_grid()) {
    for (double alpha : paper_alpha_grid()) {
      CHECK(std::abs(p_classical(phi, alpha) + p_classical_v(phi, alpha) - 1.0) <= 1e-12);
      for (double delta : {-0.4, 0.8}) {
        CHECK(std::abs(p_quantum(phi, alpha, delta) + p_quantum_v(phi, alpha, delta) - 1.0) <=
              1e-12);
      }
    }
  }
}

TEST_CASE("closed forms match the brute-force state evolution on the grid") {
  double worst_c = 0.0, worst_q = 0.0, worst_delta_dep = 0.0;
  for (double phi : paper_phi_grid()) {
    for (double alpha : paper_alpha_grid()) {
      double p_c_first = -1.0;
      for (double delta : paper_delta_grid()) {
        BruteForce brute = brute_force(phi, alpha, delta);
        worst_c = std::max(worst_c, std::abs(brute.p_c_h - p_classical(phi, alpha)));
        worst_q = std::max(worst_q, std::abs(brute.p_q_h - p_quantum(phi, alpha, delta)));
        if (p_c_first < 0.0) p_c_first = brute.p_c_h;
        worst_delta_dep = std::max(worst_delta_dep, std::abs(brute.p_c_h - p_c_first));
      }
    }
  }
  CHECK(worst_c <= 1e-10);
  CHECK(worst_q <= 1e-10);
  // Eq. (4) carries no delta dependence
  CHECK(worst_delta_dep <= 1e-12);
}

TEST_CASE("noisy closed forms match the density-matrix pipeline") {
  std::mt19937_64 rng(7100);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int draw = 0; draw < 2; ++draw) {
    NoiseModel noise{uni(rng), uni(rng), uni(rng)};
    for (double phi : linspace(0.0, 2 * kPi, 5)) {
      for (double alpha : linspace(0.0, kPi / 2, 3)) {
        for (double delta : linspace(-0.05 * kPi, -1.95 * kPi, 3)) {
          for (int bit : {0, 1}) {
            ExperimentSetting setting{phi, alpha, delta, bit};
            OutcomeTable table = run_pipeline(setting, noise);
            auto closed = closed_form_joint(setting, noise);
            for (int s = 0; s < 2; ++s) {
              for (int c = 0; c < 2; ++c) {
                for (int a = 0; a < 2; ++a) {
                  const auto so = static_cast<SOutcome>(s);
                  const auto co = static_cast<COutcome>(c);
                  const auto ao = static_cast<AOutcome>(a);
                  CHECK(std::abs(table.joint(so, co, ao) - closed[bin_index(so, co, ao)]) <=
                        1e-10);
                }
              }
            }
            CHECK(table.trigger_probability() ==
                  doctest::Approx(trigger_probability(noise)).epsilon(1e-10));
            double total = 0.0;
            for (double p : table.conditionals()) total += p;
            CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
          }
        }
      }
    }
  }
}

TEST_CASE("noise limits") {
  ExperimentSetting setting{0.0, kPi / 4, 0.0, 0};
  SUBCASE("ideal pipeline values at phi = 0") {
    OutcomeTable table = run_pipeline(setting, {1.0, 1.0, 1.0});
    CHECK(std::abs(table.joint(SOutcome::H, COutcome::Minus, AOutcome::AlphaPerp) - 0.0625) <=
          1e-12);
    CHECK(std::abs(table.joint(SOutcome::V, COutcome::Minus, AOutcome::AlphaPerp) -
                   0.010723304703363107) <= 1e-12);
    CHECK(table.trigger_probability() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("f3 = 0 gives uniform 1/16 joints") {
    for (double phi : {0.0, 1.2}) {
      OutcomeTable table = run_pipeline({phi, 0.9, -0.7, 0}, {0.4, 0.8, 0.0});
      for (double p : {table.joint(SOutcome::H, COutcome::Plus, AOutcome::Alpha),
                       table.joint(SOutcome::V, COutcome::Minus, AOutcome::AlphaPerp)}) {
        CHECK(std::abs(p - 1.0 / 16.0) <= 1e-12);
      }
    }
  }
  SUBCASE("choice bit 1 collapses the analysis angle to zero") {
    ExperimentSetting bit1{1.3, 0.8, -0.4, 1};
    ExperimentSetting zero{1.3, 0.0, -0.4, 0};
    NoiseModel noise{0.9, 0.8, 0.7};
    auto a = run_pipeline(bit1, noise).conditionals();
    auto b = run_pipeline(zero, noise).conditionals();
    for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-14);
  }
}

TEST_CASE("noise monotonicity of the quantum probability at the reference point") {
  ExperimentSetting setting{kPi, kPi / 4, 0.0, 0};
  auto p_q = [&](const NoiseModel& nm) {
    auto cond = run_pipeline(setting, nm).conditionals();
    const double hm = cond[bin_index(SOutcome::H, COutcome::Minus, AOutcome::AlphaPerp)];
    const double vm = cond[bin_index(SOutcome::V, COutcome::Minus, AOutcome::AlphaPerp)];
    return hm / (hm + vm);
  };
  for (int which = 0; which < 3; ++which) {
    double previous = p_q({1.0, 1.0, 1.0});
    for (double f : {0.75, 0.5, 0.25, 0.0}) {
      NoiseModel nm{1.0, 1.0, 1.0};
      (which == 0 ? nm.f1 : which == 1 ? nm.f2 : nm.f3) = f;
      const double value = p_q(nm);
      CHECK(value <= previous + 1e-12);
      previous = value;
    }
  }
}

TEST_CASE("unconditional visibility") {
  CHECK(std::abs(unconditional_visibility({1.0, 1.0, 1.0}) - 0.5) <= 1e-10);
  const double noisy = unconditional_visibility({0.98, 0.90, 0.61});
  CHECK(noisy == doctest::Approx(0.374139441732382).epsilon(1e-9));
  CHECK(noisy >= 0.35);
  CHECK(noisy < 0.5);

  // alpha acts only on the traced-out qubit
  auto p_h_traced = [](double phi, double alpha) {
    OutcomeTable table = run_pipeline({phi, alpha, 0.0, 0}, {0.98, 0.90, 0.61});
    double p = 0.0;
    for (int c = 0; c < 2; ++c) {
      for (int a = 0; a < 2; ++a) {
        p += table.conditional(SOutcome::H, static_cast<COutcome>(c),
                               static_cast<AOutcome>(a));
      }
    }
    return p;
  };
  for (double phi : {0.6, 2.9}) {
    const double reference = p_h_traced(phi, 0.1);
    for (double alpha : {0.5, 1.0, 1.5}) {
      CHECK(std::abs(p_h_traced(phi, alpha) - reference) <= 1e-12);
    }
  }
}

TEST_CASE("conditional_probabilities reduces to the ideal closed forms") {
  for (double phi : paper_phi_grid()) {
    for (double alpha : paper_alpha_grid()) {
      ConditionalProbabilities cond = conditional_probabilities({phi, alpha, 0.4, 0}, {});
      CHECK(std::abs(cond.p_c_h - p_classical(phi, alpha)) <= 1e-12);
      CHECK(std::abs(cond.p_q_h - p_quantum(phi, alpha, 0.4)) <= 1e-12);
      CHECK(cond.quantum_defined);
    }
  }
}

TEST_CASE("setting and noise validation") {
  CHECK_THROWS_AS(run_pipeline({0.0, -0.1, 0.0, 0}, {}), std::invalid_argument);
  CHECK_THROWS_AS(run_pipeline({0.0, 0.1, 0.0, 2}, {}), std::invalid_argument);
  CHECK_THROWS_AS(run_pipeline({0.0, 0.1, 0.0, 0}, {1.2, 1.0, 1.0}), std::invalid_argument);
  CHECK(ExperimentSetting{1.0, 0.5, 0.0, 1}.effective_alpha() == 0.0);
  CHECK(ExperimentSetting{1.0, 0.5, 0.0, 0}.effective_alpha() == 0.5);
}

TEST_CASE("paper grids") {
  CHECK(paper_phi_grid().size() == 12);
  CHECK(paper_alpha_grid().size() == 9);
  CHECK(paper_delta_grid().size() == 9);
  CHECK(paper_phi_grid().front() == 0.0);
  CHECK(paper_phi_grid().back() == doctest::Approx(2 * kPi));
  CHECK(paper_delta_grid().front() == doctest::Approx(-0.05 * kPi));
  CHECK(paper_delta_grid().back() == doctest::Approx(-1.95 * kPi));
}
