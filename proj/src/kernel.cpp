#include "polyheat/kernel.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <numbers>
#include <limits>
#include <tuple>

#include "polyheat/error.hpp"
#include "polyheat/grid.hpp"

namespace polyheat {
namespace {

using ld = long double;
constexpr int kMaxOrder = 8;
using Moments = std::array<ld, kMaxOrder + 1>;

using Kronrod = boost::math::quadrature::gauss_kronrod<ld, 31>;
using Gauss = boost::math::quadrature::gauss<ld, 15>;

// Target absolute accuracy of each sample; F(0) is O(0.3).
constexpr ld kAbsTol = 1e-17L;

// Truncation point of the Fourier integral: xi^K exp(-xi^{2m}) < 1e-22.
ld xi_max(int m, int K) {
  const ld target = std::log(1e22L);
  ld xi = 2.0L;
  for (int it = 0; it < 60; ++it) {
    xi = std::pow(target + std::max(K, 1) * std::log(xi), 1.0L / (2 * m));
  }
  return xi;
}

// Lambda_mu(z) = J_mu(z) / z^mu, regular at 0.
ld lambda_bessel(ld mu, ld z) {
  if (z < 2.0L) {
    const ld q = -0.25L * z * z;
    ld term = 1.0L / (std::pow(2.0L, mu) * std::tgamma(mu + 1.0L));
    ld sum = term;
    for (int k = 1; k < 60; ++k) {
      term *= q / (k * (mu + k));
      sum += term;
      if (std::abs(term) < 1e-22L * std::abs(sum)) break;
    }
    return sum;
  }
  return std::cyl_bessel_j(mu, z) / std::pow(z, mu);
}

// Lambda_nu^{(k)}(z) = sum c * z^j * Lambda_{nu+q}(z), via
// d/dz [z^j Lambda_mu] = j z^{j-1} Lambda_mu - z^{j+1} Lambda_{mu+1}.
struct Term {
  int j;
  int q;
  ld c;
};
std::vector<std::vector<Term>> bessel_derivative_terms(int K) {
  std::vector<std::vector<Term>> out(K + 1);
  out[0] = {{0, 0, 1.0L}};
  for (int k = 1; k <= K; ++k) {
    std::vector<Term> next;
    auto add = [&](int j, int q, ld c) {
      for (auto& t : next) {
        if (t.j == j && t.q == q) {
          t.c += c;
          return;
        }
      }
      next.push_back({j, q, c});
    };
    for (const auto& t : out[k - 1]) {
      if (t.j > 0) add(t.j - 1, t.q, t.c * t.j);
      add(t.j + 1, t.q + 1, -t.c);
    }
    out[k] = std::move(next);
  }
  return out;
}

class KernelQuadrature {
 public:
  KernelQuadrature(int m, int N, int K) : m_(m), N_(N), K_(K), xi_max_(xi_max(m, K)) {
    if (N > 1) terms_ = bessel_derivative_terms(K);
  }

  // All derivatives 0..K at y, with the estimated absolute error.
  Moments eval(ld y, ld* error) const {
    ld width = std::min<ld>(0.25L, 1.0L / (1.0L + std::abs(y)));
    Moments result{};
    ld err = 0;
    for (int refine = 0; refine < 5; ++refine) {
      result = integrate(y, width, &err);
      if (err <= kAbsTol) break;
      width *= 0.5L;
    }
    if (error) *error = err;
    return result;
  }

 private:
  void integrand(ld y, ld xi, Moments& out) const {
    ld x2m = xi * xi;
    for (int j = 1; j < m_; ++j) x2m *= xi * xi;
    const ld w = std::exp(-x2m);
    if (N_ == 1) {
      const ld theta = y * xi;
      const ld c = std::cos(theta), s = std::sin(theta);
      ld pw = w / std::numbers::pi_v<ld>;
      for (int k = 0; k <= K_; ++k) {
        switch (k % 4) {
          case 0: out[k] = pw * c; break;
          case 1: out[k] = -pw * s; break;
          case 2: out[k] = -pw * c; break;
          default: out[k] = pw * s; break;
        }
        pw *= xi;
      }
      return;
    }
    const ld nu = 0.5L * N_ - 1.0L;
    const ld z = std::abs(y) * xi;
    const ld pref = std::pow(2.0L * std::numbers::pi_v<ld>, -0.5L * N_) * std::pow(xi, N_ - 1) * w;
    std::array<ld, kMaxOrder + 2> lam{};
    for (int q = 0; q <= K_; ++q) lam[q] = lambda_bessel(nu + q, z);
    ld pw = pref;
    for (int k = 0; k <= K_; ++k) {
      ld s = 0;
      for (const auto& t : terms_[k]) s += t.c * std::pow(z, t.j) * lam[t.q];
      out[k] = pw * s;
      pw *= xi;
    }
  }

  Moments integrate(ld y, ld width, ld* error) const {
    const auto& xk = Kronrod::abscissa();
    const auto& wk = Kronrod::weights();
    const auto& wg = Gauss::weights();
    const int panels = static_cast<int>(std::ceil(xi_max_ / width));
    const ld hw = xi_max_ / panels / 2;
    Moments total{};
    ld err = 0;
    Moments fp{}, fm{};
    for (int pnl = 0; pnl < panels; ++pnl) {
      const ld mid = (2 * pnl + 1) * hw;
      Moments kr{}, ga{};
      integrand(y, mid, fp);
      for (int k = 0; k <= K_; ++k) {
        kr[k] = fp[k] * wk[0];
        ga[k] = fp[k] * wg[0];
      }
      for (std::size_t i = 1; i < xk.size(); ++i) {
        integrand(y, mid + hw * xk[i], fp);
        integrand(y, mid - hw * xk[i], fm);
        for (int k = 0; k <= K_; ++k) {
          const ld s = fp[k] + fm[k];
          kr[k] += s * wk[i];
          if (i % 2 == 0) ga[k] += s * wg[i / 2];
        }
      }
      for (int k = 0; k <= K_; ++k) {
        total[k] += hw * kr[k];
        err = std::max(err, std::abs(hw * (kr[k] - ga[k])));
      }
    }
    if (error) *error = err * panels;
    return total;
  }

  int m_, N_, K_;
  ld xi_max_;
  std::vector<std::vector<Term>> terms_;
};

void validate_kernel_request(const ModelParams& params, int K_max) {
  if (params.N() > 4) throw UnsupportedError("kernel tables support N <= 4 only");
  if (K_max < 0 || K_max > kMaxOrder) throw DomainError("K_max must lie in [0, 8]");
}

}  // namespace

double default_kernel_length(int m, int N) {
  if (m == 1) return 24.0;
  (void)N;
  return 48.0;
}

double wkb_prefactor_exponent(int m, int N, double c) {
  return (2.0 * m * (c - 0.5) - (N - 1.0) * m) / (2.0 * m - 1.0);
}

KernelTable build_kernel_table(const ModelParams& params, double L_F, int n, int K_max) {
  validate_kernel_request(params, K_max);
  if (n < 501) throw DomainError("kernel table needs at least 501 nodes");
  if (!(L_F > 0.0)) throw DomainError("kernel table length must be positive");
  KernelTable t(params);
  t.L_ = L_F;
  t.h_ = L_F / (n - 1);
  t.y_.resize(n);
  t.values_.assign(K_max + 1, std::vector<double>(n));
  t.column0_.resize(n);
  const KernelQuadrature quad(params.m(), params.N(), K_max);
  ld worst = 0;
  for (int i = 0; i < n; ++i) {
    t.y_[i] = i * t.h_;
    ld err = 0;
    const Moments v = quad.eval(static_cast<ld>(i) * static_cast<ld>(L_F) / (n - 1), &err);
    worst = std::max(worst, err);
    for (int k = 0; k <= K_max; ++k) t.values_[k][i] = static_cast<double>(v[k]);
    t.column0_[i] = v[0];
  }
  t.quad_error_ = static_cast<double>(worst);
  if (worst > 1e-12L) {
    throw ConvergenceError("kernel quadrature did not reach its tolerance", static_cast<double>(worst));
  }
  t.finalize();
  return t;
}

KernelTable make_kernel_table(const ModelParams& params, std::vector<double> y,
                              std::vector<std::vector<double>> columns, double quadrature_error) {
  validate_kernel_request(params, static_cast<int>(columns.size()) - 1);
  if (y.size() < 3 || columns.empty()) throw DomainError("kernel table needs samples");
  for (const auto& c : columns) {
    if (c.size() != y.size()) throw DomainError("kernel table columns differ in length");
  }
  KernelTable t(params);
  t.h_ = (y.back() - y.front()) / (y.size() - 1);
  t.L_ = y.back();
  t.y_ = std::move(y);
  t.values_ = std::move(columns);
  t.column0_.assign(t.values_[0].begin(), t.values_[0].end());
  t.quad_error_ = quadrature_error;
  t.finalize();
  return t;
}

double kernel_quadrature(int m, int N, double y, int k) {
  validate_kernel_request(ModelParams::linear(m, N), k);
  const KernelQuadrature quad(m, N, k);
  ld err = 0;
  const Moments v = quad.eval(std::abs(static_cast<ld>(y)), &err);
  const double sign = (y < 0 && k % 2 == 1) ? -1.0 : 1.0;
  return sign * static_cast<double>(v[k]);
}

void KernelTable::finalize() {
  const int n = nodes();
  // Mass over the line or R^N by the trapezoidal rule. For radial tables the
  // integrand r^{N-1} F is not even in r when N is even, so the Euler-Maclaurin
  // end terms at r = 0 are added (through h^4).
  ld s = 0;
  for (int i = 0; i < n; ++i) {
    ld w = (i == 0 || i == n - 1) ? 0.5L * h_ : static_cast<ld>(h_);
    if (N() > 1) w *= std::pow(static_cast<ld>(y_[i]), N() - 1);
    s += w * values_[0][i];
  }
  if (N() == 2 || N() == 4) {
    const ld F0 = values_[0][0];
    const ld F2 = kmax() >= 2 ? static_cast<ld>(values_[2][0])
                              : 2.0L * (static_cast<ld>(values_[0][1]) - F0) / (static_cast<ld>(h_) * h_);
    const ld g1 = N() == 2 ? F0 : 0.0L;
    const ld g3 = N() == 2 ? 3.0L * F2 : 6.0L * F0;
    const ld hh = static_cast<ld>(h_) * h_;
    s += hh / 12.0L * g1 - hh * hh / 720.0L * g3;
  }
  mass_ = static_cast<double>(s * (N() == 1 ? 2.0L : static_cast<ld>(sphere_area(N()))));
  ode_residual_ = std::numeric_limits<double>::quiet_NaN();
  if (n >= 501 && L_ >= 10.0) {
    const Discretization disc(m(), N(), Grid::make_unchecked(true, L_, n));
    std::vector<ld> out(n);
    disc.apply<ld>(column0_, out);
    const ld c = static_cast<ld>(N()) / (2.0L * m());
    // Rows within m nodes of y = L see the truncation ghosts and are skipped.
    double worst = 0.0;
    for (int i = 0; i < n - 1 - m(); ++i) worst = std::max(worst, static_cast<double>(std::abs(out[i] + c * column0_[i])));
    ode_residual_ = worst;
  }

  try {
    decay_ = decay_fit(*this);
    weight_a_ = decay_.d;
  } catch (const InsufficientDataError&) {
    decay_ = DecayFit{};
    weight_a_ = 0.0;
  }
}

const std::vector<double>& KernelTable::column(int k) const {
  if (k < 0 || k > kmax()) throw DomainError("derivative order exceeds the table order");
  return values_[k];
}

double KernelTable::rho(double y) const { return std::exp(weight_a_ * std::pow(std::abs(y), params_.alpha())); }

double KernelTable::rho_star(double y) const { return std::exp(-weight_a_ * std::pow(std::abs(y), params_.alpha())); }

double kernel_eval(const KernelTable& table, double y, int k) {
  if (k < 0 || k > table.kmax()) throw DomainError("derivative order exceeds the table order");
  const double s = std::abs(y);
  if (s > table.L() * (1.0 + 1e-12)) {
    throw DomainError("kernel_eval: |y| beyond the table; use the decay fit for the tail");
  }
  const double sign = (y < 0 && k % 2 == 1) ? -1.0 : 1.0;
  const int n = table.nodes();
  const double h = table.h();
  int i = static_cast<int>(std::floor(s / h));
  i = std::clamp(i, 0, n - 2);
  const double t = (s - table.y(i)) / h;
  const auto& f = table.column(k);
  double v;
  if (k + 2 <= table.kmax()) {
    const auto& d1 = table.column(k + 1);
    const auto& d2 = table.column(k + 2);
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    const double H0 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
    const double H1 = t - 6 * t3 + 8 * t4 - 3 * t5;
    const double H2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5);
    const double H5 = 10 * t3 - 15 * t4 + 6 * t5;
    const double H4 = -4 * t3 + 7 * t4 - 3 * t5;
    const double H3 = 0.5 * (t3 - 2 * t4 + t5);
    v = f[i] * H0 + h * d1[i] * H1 + h * h * d2[i] * H2 + f[i + 1] * H5 + h * d1[i + 1] * H4 +
        h * h * d2[i + 1] * H3;
  } else if (k + 1 <= table.kmax()) {
    const auto& d1 = table.column(k + 1);
    const double t2 = t * t, t3 = t2 * t;
    v = f[i] * (2 * t3 - 3 * t2 + 1) + h * d1[i] * (t3 - 2 * t2 + t) + f[i + 1] * (-2 * t3 + 3 * t2) +
        h * d1[i + 1] * (t3 - t2);
  } else {
    // Cubic Lagrange through nodes i-1..i+2, mirrored through the origin.
    const double par = (k % 2 == 0) ? 1.0 : -1.0;
    auto sample = [&](int j) {
      if (j < 0) return par * f[-j];
      if (j >= n) return f[n - 1];
      return f[j];
    };
    int j0 = std::min(i - 1, n - 4);
    const double x = (s - (j0 * h)) / h;
    const double y0 = sample(j0), y1 = sample(j0 + 1), y2 = sample(j0 + 2), y3 = sample(j0 + 3);
    v = y0 * (x - 1) * (x - 2) * (x - 3) / -6.0 + y1 * x * (x - 2) * (x - 3) / 2.0 +
        y2 * x * (x - 1) * (x - 3) / -2.0 + y3 * x * (x - 1) * (x - 2) / 6.0;
  }
  return sign * v;
}

double fundamental_solution_eval(const KernelTable& table, double x, double t) {
  if (!(t > 0.0)) throw DomainError("fundamental solution needs t > 0");
  const double m2 = 2.0 * table.m();
  return std::pow(t, -table.N() / m2) * kernel_eval(table, x * std::pow(t, -1.0 / m2), 0);
}

DecayFit decay_fit(const KernelTable& table) {
  if (table.L() < 12.0) throw InsufficientDataError("decay fit needs a table with L_F >= 12");
  const auto& F = table.column(0);
  const int n = table.nodes();
  const double floor = std::max(1e4 * table.quadrature_error(), 1e-14 * std::abs(F[0]));
  int last = 0;
  for (int i = 0; i < n; ++i) {
    if (std::abs(F[i]) >= floor) last = i;
  }
  const double y_hi = table.y(last);
  const double y_lo = 0.5 * y_hi;

  std::vector<double> ys, logs;
  const double gamma = wkb_prefactor_exponent(table.m(), table.N(), table.N() / (2.0 * table.m()));
  if (table.m() == 1) {
    const int stride = std::max(1, last / 400);
    for (int i = 0; i <= last; i += stride) {
      if (table.y(i) >= y_lo && F[i] > 0) {
        ys.push_back(table.y(i));
        logs.push_back(std::log(F[i]));
      }
    }
  } else {
    for (int i = 1; i < last; ++i) {
      if (table.y(i) < y_lo) continue;
      const double a = std::abs(F[i - 1]), b = std::abs(F[i]), c = std::abs(F[i + 1]);
      if (b >= a && b > c) {
        // Parabolic refinement of the signed samples.
        const double f0 = F[i - 1], f1 = F[i], f2 = F[i + 1];
        const double den = f0 - 2 * f1 + f2;
        const double off = den != 0.0 ? 0.5 * (f0 - f2) / den : 0.0;
        const double peak = f1 - 0.25 * (f0 - f2) * off;
        ys.push_back(table.y(i) + off * table.h());
        logs.push_back(std::log(std::abs(peak)));
      }
    }
  }
  if (ys.size() < 5) {
    throw InsufficientDataError("decay fit found " + std::to_string(ys.size()) +
                                " envelope samples in the fit window; at least 5 are needed");
  }
  for (std::size_t j = 0; j < ys.size(); ++j) logs[j] -= gamma * std::log(ys[j]);

  // For fixed alpha the model log D - d y^alpha is linear; alpha is found by
  // minimizing the residual of that linear fit.
  auto linear_fit = [&](double alpha, double* logD, double* d) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(ys.size());
    for (std::size_t j = 0; j < ys.size(); ++j) {
      const double x = std::pow(ys[j], alpha);
      sx += x;
      sy += logs[j];
      sxx += x * x;
      sxy += x * logs[j];
    }
    const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    const double icpt = (sy - slope * sx) / k;
    double rss = 0;
    for (std::size_t j = 0; j < ys.size(); ++j) {
      const double r = logs[j] - (icpt + slope * std::pow(ys[j], alpha));
      rss += r * r;
    }
    if (logD) *logD = icpt;
    if (d) *d = -slope;
    return rss;
  };
  const auto best = boost::math::tools::brent_find_minima(
      [&](double a) { return linear_fit(a, nullptr, nullptr); }, 0.8, 3.0, 40);
  DecayFit fit;
  double logD = 0, d = 0;
  const double rss = linear_fit(best.first, &logD, &d);
  fit.alpha = best.first;
  fit.d = d;
  fit.D = std::exp(logD);
  fit.gamma = gamma;
  fit.samples = static_cast<int>(ys.size());
  fit.y_lo = y_lo;
  fit.y_hi = y_hi;
  fit.rms = std::sqrt(rss / ys.size());
  return fit;
}

}  // namespace polyheat
