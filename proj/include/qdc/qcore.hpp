// Dense complex linear algebra for the four polarization qubits S, C, A, T:
// labeled states, gate application, tensor products, partial trace,
// projective post-selection and convex mixing. Dimension never exceeds 16,
// so everything is stored dense.
#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdc {

using cplx = std::complex<double>;

// Tolerances used by the algebraic sanity checks.
inline constexpr double kAlgebraTol = 1e-12;
inline constexpr double kEigenvalueTol = 1e-10;
inline constexpr double kProjectionFloor = 1e-14;

// The four photons of the experiment. The enum order fixes the global
// tensor slot order; states always keep their labels sorted by it.
enum class Qubit : int { S = 0, C = 1, A = 2, T = 3 };

const char* to_string(Qubit q);

struct LabelCollisionError : std::invalid_argument {
  explicit LabelCollisionError(const std::string& what) : std::invalid_argument(what) {}
};

struct DegenerateProjectionError : std::runtime_error {
  explicit DegenerateProjectionError(const std::string& what) : std::runtime_error(what) {}
};

// Unitary gate with declared arity. Construction verifies U U^dag = I.
class Gate {
 public:
  Gate(std::string name, int arity, std::vector<cplx> matrix);

  static Gate identity();
  static Gate hadamard();            // HWP at 22.5 deg
  static Gate w();                   // HWP at 11.25 deg, the half step of CH
  static Gate phase(double phi);     // diag(1, e^{i phi})
  static Gate rotation(double alpha);  // [[cos a, sin a], [sin a, -cos a]]
  static Gate cz();                  // -1 on |VV>
  static Gate ch();                  // controlled Hadamard, control first

  const std::string& name() const { return name_; }
  int arity() const { return arity_; }
  std::size_t dim() const { return std::size_t(1) << arity_; }
  cplx at(std::size_t row, std::size_t col) const { return m_[row * dim() + col]; }
  const std::vector<cplx>& matrix() const { return m_; }

 private:
  std::string name_;
  int arity_;
  std::vector<cplx> m_;  // row-major, dim x dim
};

// Pure state over a set of labeled qubits. Basis order: |H> -> 0, |V> -> 1
// per qubit, big-endian in label order (first label = most significant bit).
class PureState {
 public:
  PureState(std::vector<Qubit> labels, std::vector<cplx> amplitudes);

  // |index> in the computational basis over the given labels.
  static PureState basis(std::vector<Qubit> labels, std::size_t index);
  // Single-qubit state h|H> + v|V>.
  static PureState single(Qubit label, cplx h, cplx v);
  static PureState h(Qubit label) { return single(label, 1.0, 0.0); }
  static PureState v(Qubit label) { return single(label, 0.0, 1.0); }
  static PureState plus(Qubit label);
  static PureState minus(Qubit label);

  const std::vector<Qubit>& labels() const { return labels_; }
  std::size_t qubit_count() const { return labels_.size(); }
  std::size_t dim() const { return amp_.size(); }
  cplx amplitude(std::size_t i) const { return amp_[i]; }
  const std::vector<cplx>& amplitudes() const { return amp_; }
  // Tensor slot of a label; throws if absent.
  std::size_t slot_of(Qubit q) const;
  bool has_label(Qubit q) const;

  double norm() const;
  void normalize();

 private:
  std::vector<Qubit> labels_;
  std::vector<cplx> amp_;
};

class DensityMatrix {
 public:
  DensityMatrix(std::vector<Qubit> labels, std::vector<cplx> matrix);

  static DensityMatrix maximally_mixed(std::vector<Qubit> labels);

  const std::vector<Qubit>& labels() const { return labels_; }
  std::size_t qubit_count() const { return labels_.size(); }
  std::size_t dim() const { return dim_; }
  cplx at(std::size_t row, std::size_t col) const { return m_[row * dim_ + col]; }
  const std::vector<cplx>& matrix() const { return m_; }
  std::size_t slot_of(Qubit q) const;
  bool has_label(Qubit q) const;

  double trace_real() const;
  // Hermiticity / trace / positivity check used by tests and constructors.
  void validate() const;

 private:
  std::vector<Qubit> labels_;
  std::size_t dim_;
  std::vector<cplx> m_;
};

DensityMatrix to_density(const PureState& psi);

// <a|b>; labels must match exactly.
cplx inner_product(const PureState& a, const PureState& b);
// |<a|b>|^2 — the phase-insensitive comparison used throughout.
double overlap(const PureState& a, const PureState& b);

PureState tensor(const PureState& a, const PureState& b);
DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b);

PureState apply_gate(const PureState& state, const Gate& g, const std::vector<Qubit>& targets);
DensityMatrix apply_gate(const DensityMatrix& state, const Gate& g, const std::vector<Qubit>& targets);

DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<Qubit>& keep);

template <class StateT>
struct Projection {
  double probability;
  StateT state;  // renormalized, over the remaining labels
};

// Projects `target` onto `direction` (a normalized single-qubit state; its
// label is ignored) and removes it from the state.
Projection<PureState> project(const PureState& state, Qubit target, const PureState& direction);
Projection<DensityMatrix> project(const DensityMatrix& rho, Qubit target, const PureState& direction);

// weight * a + (1 - weight) * b
DensityMatrix mix(const DensityMatrix& a, const DensityMatrix& b, double weight);

// Largest entrywise |a - b|; usage-error if shapes differ.
double max_abs_diff(const DensityMatrix& a, const DensityMatrix& b);

}  // namespace qdc
