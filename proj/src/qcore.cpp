#include "qdc/qcore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qdc {

namespace {

constexpr cplx kZero{0.0, 0.0};

std::size_t bit_of(std::size_t index, std::size_t slot, std::size_t n) {
  return (index >> (n - 1 - slot)) & 1u;
}

// Compose a full basis index from two disjoint slot groups, each carrying
// its own big-endian sub-index.
std::size_t compose(const std::vector<std::size_t>& slots_a, std::size_t ia,
                    const std::vector<std::size_t>& slots_b, std::size_t ib, std::size_t n) {
  std::size_t out = 0;
  for (std::size_t k = 0; k < slots_a.size(); ++k) {
    std::size_t bit = (ia >> (slots_a.size() - 1 - k)) & 1u;
    out |= bit << (n - 1 - slots_a[k]);
  }
  for (std::size_t k = 0; k < slots_b.size(); ++k) {
    std::size_t bit = (ib >> (slots_b.size() - 1 - k)) & 1u;
    out |= bit << (n - 1 - slots_b[k]);
  }
  return out;
}

void check_canonical_labels(const std::vector<Qubit>& labels) {
  if (labels.empty() || labels.size() > 4) {
    throw std::invalid_argument("state must carry between 1 and 4 qubit labels");
  }
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (static_cast<int>(labels[i - 1]) >= static_cast<int>(labels[i])) {
      throw std::invalid_argument("labels must be distinct and in (S, C, A, T) slot order");
    }
  }
}

std::vector<cplx> matmul(std::size_t d, const std::vector<cplx>& a, const std::vector<cplx>& b) {
  std::vector<cplx> out(d * d, kZero);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      cplx aik = a[i * d + k];
      if (aik == kZero) continue;
      for (std::size_t j = 0; j < d; ++j) {
        out[i * d + j] += aik * b[k * d + j];
      }
    }
  }
  return out;
}

std::vector<cplx> adjoint(std::size_t d, const std::vector<cplx>& a) {
  std::vector<cplx> out(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out[j * d + i] = std::conj(a[i * d + j]);
    }
  }
  return out;
}

// Embeds a gate acting on the given slots into the identity on the rest.
std::vector<cplx> embed_unitary(const Gate& g, const std::vector<std::size_t>& slots,
                                std::size_t n) {
  const std::size_t d = std::size_t(1) << n;
  const std::size_t gn = slots.size();
  std::vector<cplx> u(d * d, kZero);
  for (std::size_t i = 0; i < d; ++i) {
    std::size_t gi = 0;
    for (std::size_t k = 0; k < gn; ++k) gi = (gi << 1) | bit_of(i, slots[k], n);
    std::size_t rest = i;
    for (std::size_t k = 0; k < gn; ++k) rest &= ~(std::size_t(1) << (n - 1 - slots[k]));
    for (std::size_t gj = 0; gj < g.dim(); ++gj) {
      cplx v = g.at(gi, gj);
      if (v == kZero) continue;
      std::size_t j = rest;
      for (std::size_t k = 0; k < gn; ++k) {
        j |= ((gj >> (gn - 1 - k)) & 1u) << (n - 1 - slots[k]);
      }
      u[i * d + j] = v;
    }
  }
  return u;
}

std::vector<std::size_t> resolve_slots(const std::vector<Qubit>& labels,
                                       const std::vector<Qubit>& targets, int arity) {
  if (targets.size() != static_cast<std::size_t>(arity)) {
    throw std::invalid_argument("gate arity does not match number of target labels");
  }
  std::vector<std::size_t> slots;
  for (Qubit t : targets) {
    auto it = std::find(labels.begin(), labels.end(), t);
    if (it == labels.end()) {
      throw std::invalid_argument(std::string("target label ") + to_string(t) +
                                  " not present in state");
    }
    slots.push_back(static_cast<std::size_t>(it - labels.begin()));
  }
  auto sorted = slots;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("gate targets must be distinct");
  }
  return slots;
}

}  // namespace

const char* to_string(Qubit q) {
  switch (q) {
    case Qubit::S: return "S";
    case Qubit::C: return "C";
    case Qubit::A: return "A";
    case Qubit::T: return "T";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Gate

Gate::Gate(std::string name, int arity, std::vector<cplx> matrix)
    : name_(std::move(name)), arity_(arity), m_(std::move(matrix)) {
  if (arity_ != 1 && arity_ != 2) {
    throw std::invalid_argument("gate arity must be 1 or 2");
  }
  const std::size_t d = dim();
  if (m_.size() != d * d) {
    throw std::invalid_argument("gate matrix size does not match arity");
  }
  // U U^dag = I
  std::vector<cplx> prod = matmul(d, m_, adjoint(d, m_));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      cplx expect = (i == j) ? cplx{1.0, 0.0} : kZero;
      if (std::abs(prod[i * d + j] - expect) > kAlgebraTol) {
        throw std::invalid_argument("gate '" + name_ + "' is not unitary");
      }
    }
  }
}

Gate Gate::identity() {
  return Gate("I", 1, {1.0, 0.0, 0.0, 1.0});
}

Gate Gate::hadamard() {
  const double c = std::cos(std::numbers::pi / 4), s = std::sin(std::numbers::pi / 4);
  return Gate("H", 1, {c, s, s, -c});
}

Gate Gate::w() {
  const double c = std::cos(std::numbers::pi / 8), s = std::sin(std::numbers::pi / 8);
  return Gate("W", 1, {c, s, s, -c});
}

Gate Gate::phase(double phi) {
  return Gate("Phi", 1, {1.0, 0.0, 0.0, std::polar(1.0, phi)});
}

Gate Gate::rotation(double alpha) {
  const double c = std::cos(alpha), s = std::sin(alpha);
  return Gate("Alpha", 1, {c, s, s, -c});
}

Gate Gate::cz() {
  std::vector<cplx> m(16, kZero);
  m[0] = m[5] = m[10] = 1.0;
  m[15] = -1.0;
  return Gate("CZ", 2, std::move(m));
}

Gate Gate::ch() {
  const double r = 1.0 / std::numbers::sqrt2;
  std::vector<cplx> m(16, kZero);
  m[0] = m[5] = 1.0;
  m[10] = r;
  m[11] = r;
  m[14] = r;
  m[15] = -r;
  return Gate("CH", 2, std::move(m));
}

// ---------------------------------------------------------------------------
// PureState

PureState::PureState(std::vector<Qubit> labels, std::vector<cplx> amplitudes)
    : labels_(std::move(labels)), amp_(std::move(amplitudes)) {
  check_canonical_labels(labels_);
  if (amp_.size() != (std::size_t(1) << labels_.size())) {
    throw std::invalid_argument("amplitude vector length must be 2^(label count)");
  }
  normalize();
}

PureState PureState::basis(std::vector<Qubit> labels, std::size_t index) {
  std::vector<cplx> amp(std::size_t(1) << labels.size(), kZero);
  if (index >= amp.size()) {
    throw std::invalid_argument("basis index out of range");
  }
  amp[index] = 1.0;
  return PureState(std::move(labels), std::move(amp));
}

PureState PureState::single(Qubit label, cplx h, cplx v) {
  return PureState({label}, {h, v});
}

PureState PureState::plus(Qubit label) {
  const double r = 1.0 / std::numbers::sqrt2;
  return single(label, r, r);
}

PureState PureState::minus(Qubit label) {
  const double r = 1.0 / std::numbers::sqrt2;
  return single(label, r, -r);
}

std::size_t PureState::slot_of(Qubit q) const {
  auto it = std::find(labels_.begin(), labels_.end(), q);
  if (it == labels_.end()) {
    throw std::invalid_argument(std::string("label ") + to_string(q) + " not in state");
  }
  return static_cast<std::size_t>(it - labels_.begin());
}

bool PureState::has_label(Qubit q) const {
  return std::find(labels_.begin(), labels_.end(), q) != labels_.end();
}

double PureState::norm() const {
  double s = 0.0;
  for (const cplx& a : amp_) s += std::norm(a);
  return std::sqrt(s);
}

void PureState::normalize() {
  double s = norm();
  if (s < kProjectionFloor) {
    throw std::invalid_argument("cannot normalize a zero state vector");
  }
  for (cplx& a : amp_) a /= s;
}

// ---------------------------------------------------------------------------
// DensityMatrix

DensityMatrix::DensityMatrix(std::vector<Qubit> labels, std::vector<cplx> matrix)
    : labels_(std::move(labels)), m_(std::move(matrix)) {
  check_canonical_labels(labels_);
  dim_ = std::size_t(1) << labels_.size();
  if (m_.size() != dim_ * dim_) {
    throw std::invalid_argument("density matrix size must be 2^n x 2^n");
  }
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = i; j < dim_; ++j) {
      if (std::abs(m_[i * dim_ + j] - std::conj(m_[j * dim_ + i])) > kAlgebraTol) {
        throw std::invalid_argument("density matrix is not Hermitian");
      }
    }
  }
  if (std::abs(trace_real() - 1.0) > kAlgebraTol) {
    throw std::invalid_argument("density matrix trace must be 1");
  }
}

DensityMatrix DensityMatrix::maximally_mixed(std::vector<Qubit> labels) {
  const std::size_t d = std::size_t(1) << labels.size();
  std::vector<cplx> m(d * d, kZero);
  for (std::size_t i = 0; i < d; ++i) m[i * d + i] = 1.0 / static_cast<double>(d);
  return DensityMatrix(std::move(labels), std::move(m));
}

std::size_t DensityMatrix::slot_of(Qubit q) const {
  auto it = std::find(labels_.begin(), labels_.end(), q);
  if (it == labels_.end()) {
    throw std::invalid_argument(std::string("label ") + to_string(q) + " not in state");
  }
  return static_cast<std::size_t>(it - labels_.begin());
}

bool DensityMatrix::has_label(Qubit q) const {
  return std::find(labels_.begin(), labels_.end(), q) != labels_.end();
}

double DensityMatrix::trace_real() const {
  double t = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) t += m_[i * dim_ + i].real();
  return t;
}

void DensityMatrix::validate() const {
  // Positivity: embed the Hermitian matrix as the real symmetric
  // [[Re, -Im], [Im, Re]] (same spectrum, doubled) and run cyclic Jacobi.
  const std::size_t d = dim_;
  const std::size_t n2 = 2 * d;
  std::vector<double> a(n2 * n2);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double re = m_[i * d + j].real(), im = m_[i * d + j].imag();
      a[i * n2 + j] = re;
      a[(i + d) * n2 + (j + d)] = re;
      a[i * n2 + (j + d)] = -im;
      a[(i + d) * n2 + j] = im;
    }
  }
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n2; ++p)
      for (std::size_t q = p + 1; q < n2; ++q) off += a[p * n2 + q] * a[p * n2 + q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n2; ++p) {
      for (std::size_t q = p + 1; q < n2; ++q) {
        double apq = a[p * n2 + q];
        if (std::abs(apq) < 1e-300) continue;
        double tau = (a[q * n2 + q] - a[p * n2 + p]) / (2.0 * apq);
        double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t), s = t * c;
        for (std::size_t k = 0; k < n2; ++k) {
          double akp = a[k * n2 + p], akq = a[k * n2 + q];
          a[k * n2 + p] = c * akp - s * akq;
          a[k * n2 + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n2; ++k) {
          double apk = a[p * n2 + k], aqk = a[q * n2 + k];
          a[p * n2 + k] = c * apk - s * aqk;
          a[q * n2 + k] = s * apk + c * aqk;
        }
      }
    }
  }
  for (std::size_t i = 0; i < n2; ++i) {
    if (a[i * n2 + i] < -kEigenvalueTol) {
      throw std::runtime_error("density matrix has a negative eigenvalue: " +
                               std::to_string(a[i * n2 + i]));
    }
  }
}

DensityMatrix to_density(const PureState& psi) {
  const std::size_t d = psi.dim();
  std::vector<cplx> m(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      m[i * d + j] = psi.amplitude(i) * std::conj(psi.amplitude(j));
    }
  }
  return DensityMatrix(psi.labels(), std::move(m));
}

cplx inner_product(const PureState& a, const PureState& b) {
  if (a.labels() != b.labels()) {
    throw std::invalid_argument("inner product requires identical labels");
  }
  cplx out = kZero;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    out += std::conj(a.amplitude(i)) * b.amplitude(i);
  }
  return out;
}

double overlap(const PureState& a, const PureState& b) {
  return std::norm(inner_product(a, b));
}

// ---------------------------------------------------------------------------
// tensor

namespace {

// Merged canonical label list plus, for each input, the slot positions its
// labels occupy in the merged order.
struct MergePlan {
  std::vector<Qubit> labels;
  std::vector<std::size_t> slots_a;
  std::vector<std::size_t> slots_b;
};

MergePlan plan_merge(const std::vector<Qubit>& la, const std::vector<Qubit>& lb) {
  for (Qubit q : la) {
    if (std::find(lb.begin(), lb.end(), q) != lb.end()) {
      throw LabelCollisionError(std::string("label ") + to_string(q) +
                                " appears in both tensor factors");
    }
  }
  MergePlan plan;
  plan.labels = la;
  plan.labels.insert(plan.labels.end(), lb.begin(), lb.end());
  std::sort(plan.labels.begin(), plan.labels.end(),
            [](Qubit x, Qubit y) { return static_cast<int>(x) < static_cast<int>(y); });
  for (Qubit q : la) {
    plan.slots_a.push_back(static_cast<std::size_t>(
        std::find(plan.labels.begin(), plan.labels.end(), q) - plan.labels.begin()));
  }
  for (Qubit q : lb) {
    plan.slots_b.push_back(static_cast<std::size_t>(
        std::find(plan.labels.begin(), plan.labels.end(), q) - plan.labels.begin()));
  }
  return plan;
}

}  // namespace

PureState tensor(const PureState& a, const PureState& b) {
  MergePlan plan = plan_merge(a.labels(), b.labels());
  const std::size_t n = plan.labels.size();
  std::vector<cplx> out(std::size_t(1) << n, kZero);
  for (std::size_t ia = 0; ia < a.dim(); ++ia) {
    for (std::size_t ib = 0; ib < b.dim(); ++ib) {
      out[compose(plan.slots_a, ia, plan.slots_b, ib, n)] = a.amplitude(ia) * b.amplitude(ib);
    }
  }
  return PureState(plan.labels, std::move(out));
}

DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  MergePlan plan = plan_merge(a.labels(), b.labels());
  const std::size_t n = plan.labels.size();
  const std::size_t d = std::size_t(1) << n;
  std::vector<cplx> out(d * d, kZero);
  for (std::size_t ra = 0; ra < a.dim(); ++ra) {
    for (std::size_t ca = 0; ca < a.dim(); ++ca) {
      cplx va = a.at(ra, ca);
      if (va == kZero) continue;
      for (std::size_t rb = 0; rb < b.dim(); ++rb) {
        for (std::size_t cb = 0; cb < b.dim(); ++cb) {
          std::size_t r = compose(plan.slots_a, ra, plan.slots_b, rb, n);
          std::size_t c = compose(plan.slots_a, ca, plan.slots_b, cb, n);
          out[r * d + c] = va * b.at(rb, cb);
        }
      }
    }
  }
  return DensityMatrix(plan.labels, std::move(out));
}

// ---------------------------------------------------------------------------
// apply_gate

PureState apply_gate(const PureState& state, const Gate& g, const std::vector<Qubit>& targets) {
  auto slots = resolve_slots(state.labels(), targets, g.arity());
  const std::size_t n = state.qubit_count();
  std::vector<cplx> u = embed_unitary(g, slots, n);
  const std::size_t d = state.dim();
  std::vector<cplx> out(d, kZero);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out[i] += u[i * d + j] * state.amplitude(j);
    }
  }
  return PureState(state.labels(), std::move(out));
}

DensityMatrix apply_gate(const DensityMatrix& state, const Gate& g,
                         const std::vector<Qubit>& targets) {
  auto slots = resolve_slots(state.labels(), targets, g.arity());
  const std::size_t n = state.qubit_count();
  const std::size_t d = state.dim();
  std::vector<cplx> u = embed_unitary(g, slots, n);
  std::vector<cplx> tmp = matmul(d, u, state.matrix());
  std::vector<cplx> out = matmul(d, tmp, adjoint(d, u));
  return DensityMatrix(state.labels(), std::move(out));
}

// ---------------------------------------------------------------------------
// partial_trace / project / mix

DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<Qubit>& keep) {
  if (keep.empty()) {
    throw std::invalid_argument("partial_trace requires a nonempty keep set");
  }
  std::vector<std::size_t> keep_slots;
  for (Qubit q : keep) keep_slots.push_back(rho.slot_of(q));
  std::sort(keep_slots.begin(), keep_slots.end());
  if (std::adjacent_find(keep_slots.begin(), keep_slots.end()) != keep_slots.end()) {
    throw std::invalid_argument("keep labels must be distinct");
  }
  const std::size_t n = rho.qubit_count();
  std::vector<std::size_t> traced_slots;
  for (std::size_t s = 0; s < n; ++s) {
    if (!std::binary_search(keep_slots.begin(), keep_slots.end(), s)) traced_slots.push_back(s);
  }
  std::vector<Qubit> out_labels;
  for (std::size_t s : keep_slots) out_labels.push_back(rho.labels()[s]);

  const std::size_t dk = std::size_t(1) << keep_slots.size();
  const std::size_t dt = std::size_t(1) << traced_slots.size();
  std::vector<cplx> out(dk * dk, kZero);
  for (std::size_t i = 0; i < dk; ++i) {
    for (std::size_t j = 0; j < dk; ++j) {
      cplx sum = kZero;
      for (std::size_t t = 0; t < dt; ++t) {
        std::size_t r = compose(keep_slots, i, traced_slots, t, n);
        std::size_t c = compose(keep_slots, j, traced_slots, t, n);
        sum += rho.at(r, c);
      }
      out[i * dk + j] = sum;
    }
  }
  return DensityMatrix(std::move(out_labels), std::move(out));
}

namespace {

void check_direction(const PureState& direction) {
  if (direction.qubit_count() != 1) {
    throw std::invalid_argument("projection direction must be a single-qubit state");
  }
  if (std::abs(direction.norm() - 1.0) > kAlgebraTol) {
    throw std::invalid_argument("projection direction must be normalized");
  }
}

}  // namespace

Projection<PureState> project(const PureState& state, Qubit target, const PureState& direction) {
  check_direction(direction);
  const std::size_t slot = state.slot_of(target);
  if (state.qubit_count() == 1) {
    double p = std::norm(std::conj(direction.amplitude(0)) * state.amplitude(0) +
                         std::conj(direction.amplitude(1)) * state.amplitude(1));
    if (p < kProjectionFloor) {
      throw DegenerateProjectionError("projection probability below 1e-14");
    }
    throw std::invalid_argument("projecting the last qubit leaves no state");
  }
  const std::size_t n = state.qubit_count();
  std::vector<std::size_t> rest_slots;
  for (std::size_t s = 0; s < n; ++s) {
    if (s != slot) rest_slots.push_back(s);
  }
  std::vector<Qubit> out_labels;
  for (std::size_t s : rest_slots) out_labels.push_back(state.labels()[s]);
  const std::size_t dr = std::size_t(1) << rest_slots.size();
  std::vector<cplx> out(dr, kZero);
  std::vector<std::size_t> target_slot{slot};
  for (std::size_t i = 0; i < dr; ++i) {
    for (std::size_t b = 0; b < 2; ++b) {
      out[i] += std::conj(direction.amplitude(b)) *
                state.amplitude(compose(rest_slots, i, target_slot, b, n));
    }
  }
  double p = 0.0;
  for (const cplx& v : out) p += std::norm(v);
  if (p < kProjectionFloor) {
    throw DegenerateProjectionError("projection probability below 1e-14; state undefined");
  }
  return {p, PureState(std::move(out_labels), std::move(out))};
}

Projection<DensityMatrix> project(const DensityMatrix& rho, Qubit target,
                                  const PureState& direction) {
  check_direction(direction);
  const std::size_t slot = rho.slot_of(target);
  if (rho.qubit_count() == 1) {
    throw std::invalid_argument("projecting the last qubit leaves no state");
  }
  const std::size_t n = rho.qubit_count();
  std::vector<std::size_t> rest_slots;
  for (std::size_t s = 0; s < n; ++s) {
    if (s != slot) rest_slots.push_back(s);
  }
  std::vector<Qubit> out_labels;
  for (std::size_t s : rest_slots) out_labels.push_back(rho.labels()[s]);
  const std::size_t dr = std::size_t(1) << rest_slots.size();
  std::vector<std::size_t> target_slot{slot};
  std::vector<cplx> out(dr * dr, kZero);
  double p = 0.0;
  for (std::size_t i = 0; i < dr; ++i) {
    for (std::size_t j = 0; j < dr; ++j) {
      cplx sum = kZero;
      for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t b = 0; b < 2; ++b) {
          sum += std::conj(direction.amplitude(a)) * direction.amplitude(b) *
                 rho.at(compose(rest_slots, i, target_slot, a, n),
                        compose(rest_slots, j, target_slot, b, n));
        }
      }
      out[i * dr + j] = sum;
    }
  }
  for (std::size_t i = 0; i < dr; ++i) p += out[i * dr + i].real();
  if (p < kProjectionFloor) {
    throw DegenerateProjectionError("projection probability below 1e-14; state undefined");
  }
  for (cplx& v : out) v /= p;
  return {p, DensityMatrix(std::move(out_labels), std::move(out))};
}

DensityMatrix mix(const DensityMatrix& a, const DensityMatrix& b, double weight) {
  if (a.labels() != b.labels()) {
    throw std::invalid_argument("mix requires identical label sets");
  }
  if (weight < 0.0 || weight > 1.0) {
    throw std::invalid_argument("mix weight must lie in [0, 1]");
  }
  const std::size_t d = a.dim();
  std::vector<cplx> out(d * d);
  for (std::size_t i = 0; i < d * d; ++i) {
    out[i] = weight * a.matrix()[i] + (1.0 - weight) * b.matrix()[i];
  }
  return DensityMatrix(a.labels(), std::move(out));
}

double max_abs_diff(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.labels() != b.labels()) {
    throw std::invalid_argument("max_abs_diff requires identical labels");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.matrix().size(); ++i) {
    m = std::max(m, std::abs(a.matrix()[i] - b.matrix()[i]));
  }
  return m;
}

}  // namespace qdc
