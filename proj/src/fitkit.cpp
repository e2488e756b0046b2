#include "qdc/fitkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <json.hpp>

namespace qdc::fitkit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> clamp_to_box(std::vector<double> p, const std::vector<double>& lo,
                                 const std::vector<double>& hi) {
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::clamp(p[i], lo[i], hi[i]);
  return p;
}

// Solves the symmetric positive system a x = b (n <= 8) by Gaussian
// elimination with partial pivoting. Returns false when singular.
bool solve_sym(std::vector<double> a, std::vector<double> b, std::size_t n,
               std::vector<double>& x) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    }
    if (std::abs(a[pivot * n + col]) < 1e-300) return false;
    if (pivot != col) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a[col * n + k], a[pivot * n + k]);
      std::swap(b[col], b[pivot]);
    }
    const double inv = 1.0 / a[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] * inv;
      if (f == 0.0) continue;
      for (std::size_t k = col; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t ri = n; ri-- > 0;) {
    double s = b[ri];
    for (std::size_t k = ri + 1; k < n; ++k) s -= a[ri * n + k] * x[k];
    x[ri] = s / a[ri * n + ri];
  }
  return true;
}

// Eigendecomposition of a small real symmetric matrix by cyclic Jacobi;
// used for the covariance so that near-singular directions surface as wide
// standard errors instead of blowing up a direct inverse.
void jacobi_eigen(std::vector<double> a, std::size_t n, std::vector<double>& eigenvalues,
                  std::vector<double>& eigenvectors) {
  eigenvectors.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) eigenvectors[i * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    if (off < 1e-300) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double tau = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = eigenvectors[k * n + p], vkq = eigenvectors[k * n + q];
          eigenvectors[k * n + p] = c * vkp - s * vkq;
          eigenvectors[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  eigenvalues.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) eigenvalues[i] = a[i * n + i];
}

std::vector<double> covariance_std_errors(const std::vector<double>& jac, std::size_t m,
                                          std::size_t n) {
  std::vector<double> jtj(n * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a; b < n; ++b) {
        jtj[a * n + b] += jac[i * n + a] * jac[i * n + b];
      }
    }
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < a; ++b) jtj[a * n + b] = jtj[b * n + a];

  std::vector<double> lambda, vec;
  jacobi_eigen(jtj, n, lambda, vec);
  double lmax = 0.0;
  for (double l : lambda) lmax = std::max(lmax, l);
  const double floor = std::max(lmax, 1.0) * 1e-14;
  std::vector<double> errs(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double var = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      var += vec[i * n + k] * vec[i * n + k] / std::max(lambda[k], floor);
    }
    errs[i] = std::sqrt(var);
  }
  return errs;
}

}  // namespace

std::vector<double> numeric_jacobian(
    const std::function<std::vector<double>(const std::vector<double>&)>& residuals,
    const std::vector<double>& p, double step) {
  const std::size_t n = p.size();
  std::vector<double> r0 = residuals(p);
  const std::size_t m = r0.size();
  std::vector<double> jac(m * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double h = step * std::max(1.0, std::abs(p[j]));
    std::vector<double> pp = p, pm = p;
    pp[j] += h;
    pm[j] -= h;
    std::vector<double> rp = residuals(pp), rm = residuals(pm);
    for (std::size_t i = 0; i < m; ++i) {
      jac[i * n + j] = (rp[i] - rm[i]) / (2.0 * h);
    }
  }
  return jac;
}

LmOutcome levenberg_marquardt(const LeastSquaresProblem& problem, std::vector<double> start,
                              const LmOptions& options) {
  const std::size_t n = start.size();
  if (problem.lower.size() != n || problem.upper.size() != n) {
    throw std::invalid_argument("bound vectors must match parameter count");
  }
  auto jac_of = [&](const std::vector<double>& p) {
    return problem.jacobian ? problem.jacobian(p) : numeric_jacobian(problem.residuals, p);
  };

  std::vector<double> p = clamp_to_box(std::move(start), problem.lower, problem.upper);
  std::vector<double> r = problem.residuals(p);
  const std::size_t m = r.size();
  double cost = dot(r, r);
  double lambda = 1e-3;
  // Weighted residuals are O(1) on real data; a cost this small means the
  // model reproduces the data at double-precision level.
  const double exact_fit_cost = 1e-18 * static_cast<double>(std::max<std::size_t>(1, m));

  LmOutcome out;
  out.iterations = 0;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    out.iterations = iter;
    std::vector<double> jac = jac_of(p);
    std::vector<double> grad(n, 0.0);
    std::vector<double> colnorm(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        grad[j] += jac[i * n + j] * r[i];
        colnorm[j] += jac[i * n + j] * jac[i * n + j];
      }
    }
    // Orthogonality measure over directions not pressed against a bound.
    double maxcos = 0.0;
    const double rnorm = std::sqrt(cost);
    for (std::size_t j = 0; j < n; ++j) {
      const bool at_lower = p[j] <= problem.lower[j] && grad[j] > 0.0;
      const bool at_upper = p[j] >= problem.upper[j] && grad[j] < 0.0;
      if (at_lower || at_upper) continue;
      const double denom = std::sqrt(colnorm[j]) * rnorm;
      if (denom > 0.0) maxcos = std::max(maxcos, std::abs(grad[j]) / denom);
    }
    if (cost <= exact_fit_cost || maxcos <= options.gradient_tol) {
      out.converged = true;
      break;
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      std::vector<double> a(n * n, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t x = 0; x < n; ++x) {
          for (std::size_t y = x; y < n; ++y) {
            a[x * n + y] += jac[i * n + x] * jac[i * n + y];
          }
        }
      }
      for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < x; ++y) a[x * n + y] = a[y * n + x];
      for (std::size_t j = 0; j < n; ++j) {
        a[j * n + j] += lambda * std::max(a[j * n + j], 1e-12);
      }
      std::vector<double> neg_grad(n);
      for (std::size_t j = 0; j < n; ++j) neg_grad[j] = -grad[j];
      std::vector<double> delta;
      if (!solve_sym(a, neg_grad, n, delta)) {
        lambda *= 10.0;
        continue;
      }
      std::vector<double> pn(n);
      double step_norm = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        pn[j] = std::clamp(p[j] + delta[j], problem.lower[j], problem.upper[j]);
        step_norm += (pn[j] - p[j]) * (pn[j] - p[j]);
      }
      step_norm = std::sqrt(step_norm);
      if (step_norm <= options.step_tol) {
        lambda *= 10.0;
        if (lambda > 1e15) break;
        continue;
      }
      std::vector<double> rn = problem.residuals(pn);
      const double cost_n = dot(rn, rn);
      if (cost_n < cost) {
        p = std::move(pn);
        r = std::move(rn);
        cost = cost_n;
        lambda = std::max(lambda * 0.3, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e15) break;
    }
    if (!accepted) {
      // No downhill step exists at damping up to 1e15: treat as stationary
      // and let the gradient test on the next loop decide `converged`.
      std::vector<double> jac2 = jac_of(p);
      std::vector<double> grad2(n, 0.0), colnorm2(n, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          grad2[j] += jac2[i * n + j] * r[i];
          colnorm2[j] += jac2[i * n + j] * jac2[i * n + j];
        }
      }
      double maxcos2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const bool at_lower = p[j] <= problem.lower[j] && grad2[j] > 0.0;
        const bool at_upper = p[j] >= problem.upper[j] && grad2[j] < 0.0;
        if (at_lower || at_upper) continue;
        const double denom = std::sqrt(colnorm2[j]) * std::sqrt(cost);
        if (denom > 0.0) maxcos2 = std::max(maxcos2, std::abs(grad2[j]) / denom);
      }
      out.converged = maxcos2 <= options.stall_gradient_tol || cost <= exact_fit_cost;
      break;
    }
  }
  out.parameters = std::move(p);
  out.residual_norm = std::sqrt(cost);
  return out;
}

std::string fit_result_to_json(const FitResult& result) {
  nlohmann::json params = nlohmann::json::object();
  nlohmann::json errs = nlohmann::json::object();
  for (std::size_t i = 0; i < result.parameter_names.size(); ++i) {
    params[result.parameter_names[i]] = result.parameters[i];
    errs[result.parameter_names[i]] = result.std_errors[i];
  }
  nlohmann::json out = {{"parameters", std::move(params)},
                        {"std_errors", std::move(errs)},
                        {"residual_norm", result.residual_norm},
                        {"iterations", result.iterations},
                        {"converged", result.converged},
                        {"start_index", result.start_index}};
  return out.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Noise-model fit

namespace {

// Every joint bin is affine in X = f1 f3, Y = f2 f3, Z = f1 f2 f3:
// p = (2 + aX + bY + cZ)/32. The coefficients are extracted once per record
// from the closed forms, giving an exact analytic Jacobian.
struct BinCoefficients {
  std::array<double, 16> a, b, c;
};

struct PreparedRecord {
  BinCoefficients coef;
  std::array<double, 16> fraction;
  std::array<double, 16> inv_sigma;
};

BinCoefficients extract_coefficients(const optics::ExperimentSetting& setting) {
  BinCoefficients coef;
  for (int bit = 0; bit < 2; ++bit) {
    optics::ExperimentSetting s = setting;
    s.qrng_bit = bit;
    const auto e_x = optics::closed_form_joint(s, {1.0, 0.0, 1.0});
    const auto e_y = optics::closed_form_joint(s, {0.0, 1.0, 1.0});
    const auto e_all = optics::closed_form_joint(s, {1.0, 1.0, 1.0});
    for (int k = 0; k < 8; ++k) {
      const std::size_t i = static_cast<std::size_t>(bit) * 8 + k;
      coef.a[i] = 32.0 * e_x[k] - 2.0;
      coef.b[i] = 32.0 * e_y[k] - 2.0;
      coef.c[i] = 32.0 * e_all[k] - 2.0 - coef.a[i] - coef.b[i];
    }
  }
  return coef;
}

std::vector<int> free_indices(const NoiseFitConfig& config) {
  std::vector<int> out;
  for (int k = 0; k < 3; ++k) {
    if (!config.frozen[k]) out.push_back(k);
  }
  if (out.empty()) {
    throw std::invalid_argument("all three noise parameters are frozen; nothing to fit");
  }
  return out;
}

std::array<double, 3> expand_params(const NoiseFitConfig& config,
                                    const std::vector<int>& free_index,
                                    const std::vector<double>& p) {
  std::array<double, 3> f = config.frozen_values;
  for (std::size_t k = 0; k < free_index.size(); ++k) f[free_index[k]] = p[k];
  return f;
}

}  // namespace

LeastSquaresProblem noise_fit_problem(const std::vector<counts::CountRecord>& data,
                                      const NoiseFitConfig& config) {
  auto prepared = std::make_shared<std::vector<PreparedRecord>>();
  for (const counts::CountRecord& rec : data) {
    const double total = static_cast<double>(rec.detected());
    if (total <= 0.0) continue;
    PreparedRecord p;
    p.coef = extract_coefficients(rec.setting);
    for (std::size_t i = 0; i < 16; ++i) {
      const double n = static_cast<double>(rec.bins[i]);
      p.fraction[i] = n / total;
      p.inv_sigma[i] = total / std::max(std::sqrt(n), 1.0);  // sigma floor of one count
    }
    prepared->push_back(p);
  }
  if (prepared->size() < 3) {
    throw InsufficientDataError("noise fit needs at least 3 grid points with counts");
  }
  const std::vector<int> free_index = free_indices(config);
  const std::size_t nfree = free_index.size();
  const std::size_t m = prepared->size() * 16;

  LeastSquaresProblem problem;
  problem.lower.assign(nfree, 0.0);
  problem.upper.assign(nfree, 1.0);
  problem.residuals = [prepared, config, free_index, m](const std::vector<double>& pv) {
    const std::array<double, 3> f = expand_params(config, free_index, pv);
    const double x = f[0] * f[2], y = f[1] * f[2], z = f[0] * f[1] * f[2];
    const double q = (1.0 + f[0] * f[2]) / 2.0;
    std::vector<double> r;
    r.reserve(m);
    for (const PreparedRecord& rec : *prepared) {
      for (std::size_t i = 0; i < 16; ++i) {
        const double p =
            (2.0 + rec.coef.a[i] * x + rec.coef.b[i] * y + rec.coef.c[i] * z) / 32.0;
        r.push_back((rec.fraction[i] - 0.5 * p / q) * rec.inv_sigma[i]);
      }
    }
    return r;
  };
  problem.jacobian = [prepared, config, free_index, nfree, m](const std::vector<double>& pv) {
    const std::array<double, 3> f = expand_params(config, free_index, pv);
    const double f1 = f[0], f2 = f[1], f3 = f[2];
    const double q = (1.0 + f1 * f3) / 2.0;
    const std::array<double, 3> dq = {f3 / 2.0, 0.0, f1 / 2.0};
    std::vector<double> jac(m * nfree, 0.0);
    std::size_t row = 0;
    for (const PreparedRecord& rec : *prepared) {
      for (std::size_t i = 0; i < 16; ++i, ++row) {
        const double p =
            (2.0 + rec.coef.a[i] * f1 * f3 + rec.coef.b[i] * f2 * f3 +
             rec.coef.c[i] * f1 * f2 * f3) /
            32.0;
        const std::array<double, 3> dp = {
            (rec.coef.a[i] * f3 + rec.coef.c[i] * f2 * f3) / 32.0,
            (rec.coef.b[i] * f3 + rec.coef.c[i] * f1 * f3) / 32.0,
            (rec.coef.a[i] * f1 + rec.coef.b[i] * f2 + rec.coef.c[i] * f1 * f2) / 32.0,
        };
        for (std::size_t k = 0; k < nfree; ++k) {
          const int g = free_index[k];
          const double dcond = (dp[g] * q - p * dq[g]) / (q * q);
          // residual = (fraction - 0.5 cond) / sigma
          jac[row * nfree + k] = -0.5 * dcond * rec.inv_sigma[i];
        }
      }
    }
    return jac;
  };
  return problem;
}

std::vector<std::vector<double>> noise_fit_starts(std::size_t free_count) {
  const std::array<double, 3> lattice = {0.2, 0.5, 0.8};
  std::size_t combos = 1;
  for (std::size_t k = 0; k < free_count; ++k) combos *= lattice.size();
  std::vector<std::vector<double>> starts;
  for (std::size_t idx = 0; idx < combos; ++idx) {
    std::vector<double> s(free_count);
    std::size_t rem = idx;
    for (std::size_t k = 0; k < free_count; ++k) {
      s[k] = lattice[rem % lattice.size()];
      rem /= lattice.size();
    }
    starts.push_back(std::move(s));
  }
  return starts;
}

FitResult fit_noise_params(const std::vector<counts::CountRecord>& data,
                           const NoiseFitConfig& config) {
  const LeastSquaresProblem problem = noise_fit_problem(data, config);
  const std::vector<int> free_index = free_indices(config);
  const std::size_t nfree = free_index.size();

  LmOutcome best;
  int best_start = -1;
  const auto starts = noise_fit_starts(nfree);
  for (std::size_t si = 0; si < starts.size(); ++si) {
    LmOutcome outcome = levenberg_marquardt(problem, starts[si]);
    if (best_start < 0 || outcome.residual_norm < best.residual_norm) {
      best = outcome;
      best_start = static_cast<int>(si);
    }
  }

  const std::size_t m = problem.residuals(best.parameters).size();
  const std::vector<double> errs_free =
      covariance_std_errors(problem.jacobian(best.parameters), m, nfree);

  FitResult result;
  result.parameter_names = {"f1", "f2", "f3"};
  const std::array<double, 3> f = expand_params(config, free_index, best.parameters);
  result.parameters = {f[0], f[1], f[2]};
  result.std_errors = {0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < nfree; ++k) {
    result.std_errors[free_index[k]] = errs_free[k];
  }
  result.residual_norm = best.residual_norm;
  result.iterations = best.iterations;
  result.converged = best.converged;
  result.start_index = best_start;
  return result;
}

// ---------------------------------------------------------------------------
// Interference dip

double hom_contrast_ideal(double t_v) {
  if (!(t_v >= 0.0 && t_v <= 1.0)) {
    throw std::invalid_argument("V transmission must lie in [0, 1]");
  }
  const double p_out = t_v * t_v + (1.0 - t_v) * (1.0 - t_v);
  const double p_in = (2.0 * t_v - 1.0) * (2.0 * t_v - 1.0);
  return (p_out - p_in) / p_out;
}

double HomDipModel::value(double position_mm) const {
  const double u = (position_mm - center_mm) / width_mm;
  return baseline * (1.0 - visibility * std::exp(-0.5 * u * u));
}

namespace {

struct DipDataSummary {
  double count_max = 0.0;
  double x_min = kInf;
  double x_max = -kInf;
  double x_at_min = 0.0;
  double span = 0.0;
};

DipDataSummary summarize_dip_points(const std::vector<HomPoint>& points) {
  if (points.size() < 5) {
    throw std::invalid_argument("dip fit needs at least 5 points");
  }
  DipDataSummary s;
  double count_min = kInf;
  for (const HomPoint& pt : points) {
    if (pt.counts < 0.0) throw std::invalid_argument("counts must be nonnegative");
    s.count_max = std::max(s.count_max, pt.counts);
    if (pt.counts < count_min) {
      count_min = pt.counts;
      s.x_at_min = pt.position_mm;
    }
    s.x_min = std::min(s.x_min, pt.position_mm);
    s.x_max = std::max(s.x_max, pt.position_mm);
  }
  if (s.count_max <= 0.0) {
    throw InsufficientDataError("dip fit needs nonzero counts");
  }
  s.span = std::max(s.x_max - s.x_min, 1e-9);
  return s;
}

}  // namespace

LeastSquaresProblem hom_dip_problem(const std::vector<HomPoint>& points) {
  const DipDataSummary s = summarize_dip_points(points);
  const std::size_t m = points.size();
  auto inv_sigma = std::make_shared<std::vector<double>>(m);
  for (std::size_t i = 0; i < m; ++i) {
    (*inv_sigma)[i] = 1.0 / std::sqrt(std::max(points[i].counts, 1.0));
  }
  auto data = std::make_shared<std::vector<HomPoint>>(points);

  LeastSquaresProblem problem;
  problem.lower = {0.0, 0.0, s.x_min - s.span, s.span * 1e-4};
  problem.upper = {kInf, 1.0, s.x_max + s.span, s.span * 10.0};
  problem.residuals = [data, inv_sigma, m](const std::vector<double>& p) {
    HomDipModel model{p[0], p[1], p[2], p[3]};
    std::vector<double> r(m);
    for (std::size_t i = 0; i < m; ++i) {
      r[i] = ((*data)[i].counts - model.value((*data)[i].position_mm)) * (*inv_sigma)[i];
    }
    return r;
  };
  problem.jacobian = [data, inv_sigma, m](const std::vector<double>& p) {
    const double base = p[0], vis = p[1], center = p[2], width = p[3];
    std::vector<double> jac(m * 4);
    for (std::size_t i = 0; i < m; ++i) {
      const double u = ((*data)[i].position_mm - center) / width;
      const double e = std::exp(-0.5 * u * u);
      const double w = (*inv_sigma)[i];
      // residual = (y - B(1 - v e)) / sigma
      jac[i * 4 + 0] = -(1.0 - vis * e) * w;
      jac[i * 4 + 1] = base * e * w;
      jac[i * 4 + 2] = base * vis * e * u / width * w;
      jac[i * 4 + 3] = base * vis * e * u * u / width * w;
    }
    return jac;
  };
  return problem;
}

std::vector<std::vector<double>> hom_dip_starts(const std::vector<HomPoint>& points) {
  const DipDataSummary s = summarize_dip_points(points);
  std::vector<std::vector<double>> starts;
  for (double vis : {0.3, 0.8}) {
    for (double center : {s.x_at_min, 0.5 * (s.x_min + s.x_max)}) {
      for (double width : {s.span / 20.0, s.span / 6.0}) {
        starts.push_back({s.count_max, vis, center, width});
      }
    }
  }
  return starts;
}

FitResult fit_hom_dip(const std::vector<HomPoint>& points) {
  const LeastSquaresProblem problem = hom_dip_problem(points);
  const auto starts = hom_dip_starts(points);

  LmOutcome best;
  int best_start = -1;
  for (std::size_t si = 0; si < starts.size(); ++si) {
    LmOutcome outcome = levenberg_marquardt(problem, starts[si]);
    if (best_start < 0 || outcome.residual_norm < best.residual_norm) {
      best = outcome;
      best_start = static_cast<int>(si);
    }
  }

  FitResult result;
  result.parameter_names = {"baseline", "visibility", "center_mm", "width_mm"};
  result.parameters = best.parameters;
  result.std_errors = covariance_std_errors(problem.jacobian(best.parameters), points.size(), 4);
  result.residual_norm = best.residual_norm;
  result.iterations = best.iterations;
  result.converged = best.converged;
  result.start_index = best_start;
  result.residuals = problem.residuals(best.parameters);
  return result;
}

FitResult fit_dip_position_vs_phi(const std::vector<DipPositionPoint>& points) {
  if (points.size() < 2) {
    throw std::invalid_argument("line fit needs at least 2 points");
  }
  bool distinct = false;
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].phi != points[0].phi) distinct = true;
  }
  if (!distinct) {
    throw std::invalid_argument("line fit needs at least 2 distinct phi values");
  }

  double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const DipPositionPoint& pt : points) {
    const double sigma = pt.sigma_mm > 0.0 ? pt.sigma_mm : 1.0;
    const double w = 1.0 / (sigma * sigma);
    sw += w;
    sx += w * pt.phi;
    sy += w * pt.center_mm;
    sxx += w * pt.phi * pt.phi;
    sxy += w * pt.phi * pt.center_mm;
  }
  const double det = sw * sxx - sx * sx;
  if (det <= 1e-300) {
    throw std::invalid_argument("line fit is degenerate");
  }
  const double slope = (sw * sxy - sx * sy) / det;
  const double intercept = (sxx * sy - sx * sxy) / det;

  FitResult result;
  result.parameter_names = {"slope_mm_per_rad", "intercept_mm"};
  result.parameters = {slope, intercept};
  result.std_errors = {std::sqrt(sw / det), std::sqrt(sxx / det)};
  double cost = 0.0;
  for (const DipPositionPoint& pt : points) {
    const double sigma = pt.sigma_mm > 0.0 ? pt.sigma_mm : 1.0;
    const double r = (pt.center_mm - (intercept + slope * pt.phi)) / sigma;
    result.residuals.push_back(r);
    cost += r * r;
  }
  result.residual_norm = std::sqrt(cost);
  result.iterations = 1;
  result.converged = true;
  result.start_index = 0;
  return result;
}

double hwp_to_alpha(double theta, int bit) {
  if (bit != 0 && bit != 1) throw std::invalid_argument("bit must be 0 or 1");
  if (bit == 1) return 0.0;
  const double alpha = 4.0 * theta - std::numbers::pi / 2.0;
  if (alpha < -1e-12 || alpha > std::numbers::pi / 2.0 + 1e-12) {
    throw std::out_of_range("resulting analysis angle falls outside [0, pi/2]");
  }
  return std::clamp(alpha, 0.0, std::numbers::pi / 2.0);
}

}  // namespace qdc::fitkit
