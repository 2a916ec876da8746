#include "polyheat/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace polyheat {
namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

void require_line(const KernelTable& t, int l, const char* what) {
  if (t.N() != 1 && l != 0) {
    throw UnsupportedError(std::string(what) + ": only l = 0 is available for radial tables");
  }
  if (l < 0 || l > t.kmax()) throw DomainError(std::string(what) + ": order exceeds the kernel table order");
}

// Samples on the full line [-L, L] from the half-line table: index j maps to
// y = (j - (n-1)) h.
struct FullLine {
  std::vector<double> y, w;
  int size() const { return static_cast<int>(y.size()); }
  int mirror(int j, int n) const { return j < n - 1 ? (n - 1 - j) : (j - (n - 1)); }
};

FullLine full_line(const KernelTable& t) {
  const int n = t.nodes();
  FullLine fl;
  fl.y.resize(2 * n - 1);
  fl.w.assign(2 * n - 1, t.h());
  for (int j = 0; j < 2 * n - 1; ++j) fl.y[j] = (j < n - 1 ? -t.y(n - 1 - j) : t.y(j - (n - 1)));
  fl.w.front() = fl.w.back() = 0.5 * t.h();
  return fl;
}

double psi_sample(const KernelTable& t, int l, int node, bool negative) {
  const double s = ((l % 2 == 0) ? 1.0 : -1.0) / std::sqrt(factorial(l));
  double v = s * t.column(l)[node];
  if (negative && l % 2 == 1) v = -v;
  return v;
}

// Trapezoidal integral over the line of g(y_i) for an even integrand known on
// the half-line nodes.
template <class G>
double even_integral(const KernelTable& t, G&& g) {
  const int n = t.nodes();
  long double s = 0;
  for (int i = 0; i < n; ++i) {
    const long double w = (i == 0) ? t.h() : (i == n - 1 ? t.h() : 2.0L * t.h());
    s += w * g(i);
  }
  return static_cast<double>(s);
}

}  // namespace

int Polynomial::degree() const {
  for (int j = static_cast<int>(coeffs.size()) - 1; j >= 0; --j) {
    if (coeffs[j] != 0.0) return j;
  }
  return -1;
}

double Polynomial::operator()(double y) const {
  double v = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) v = v * y + *it;
  return v;
}

Polynomial adjoint_polynomial(int m, int N, int l) {
  if (N != 1) throw UnsupportedError("adjoint polynomials are implemented on the line (N = 1) only");
  if (m < 1 || l < 0) throw DomainError("adjoint_polynomial needs m >= 1 and l >= 0");
  Polynomial P;
  P.coeffs.assign(l + 1, 0.0);
  const double norm = 1.0 / std::sqrt(factorial(l));
  P.coeffs[l] = norm;
  for (int j = 1; 2 * m * j <= l; ++j) {
    const int order = 2 * m * j;
    // d^order y^l = l!/(l-order)! y^{l-order}; (-Delta)^{mj} contributes (-1)^{mj}.
    const double falling = factorial(l) / factorial(l - order);
    const double sign = ((m * j) % 2 == 0) ? 1.0 : -1.0;
    P.coeffs[l - order] += norm * sign * falling / factorial(j);
  }
  return P;
}

double eigenfunction_eval(const KernelTable& table, int l, double y) {
  require_line(table, l, "eigenfunction_eval");
  const double s = ((l % 2 == 0) ? 1.0 : -1.0) / std::sqrt(factorial(l));
  return s * kernel_eval(table, y, l);
}

SpectralPair spectral_pair(const KernelTable& table, int l) {
  require_line(table, l, "spectral_pair");
  SpectralPair sp;
  sp.l = l;
  sp.lambda = table.params().lambda(l);
  sp.multiplicity = multiplicity(table.N(), l);
  sp.psi.resize(table.nodes());
  for (int i = 0; i < table.nodes(); ++i) sp.psi[i] = psi_sample(table, l, i, false);
  sp.psi_star = table.N() == 1 ? adjoint_polynomial(table.m(), 1, l) : Polynomial{{1.0}};
  return sp;
}

double gram_truncation_bound(const KernelTable& table, int l, int k) {
  if (!table.has_decay_fit()) {
    throw DomainTooSmallError("no decay fit available to bound the Gram truncation error");
  }
  const auto& fit = table.decay();
  const int m = table.m();
  const Polynomial Pk = table.N() == 1 ? adjoint_polynomial(m, 1, k) : Polynomial{{1.0}};
  // Envelope of F^(l): each derivative brings a factor |S'(y)| = (y/2m)^{1/(2m-1)}.
  auto env = [&](double y) {
    const double sprime = std::pow(y / (2.0 * m), 1.0 / (2.0 * m - 1.0));
    return fit.D * std::pow(y, fit.gamma) * std::exp(-fit.d * std::pow(y, fit.alpha)) * std::pow(sprime, l) /
           std::sqrt(factorial(l)) * std::abs(Pk(y));
  };
  const double a = table.L();
  const double h = 0.01;
  double s = 0.0;
  for (int i = 0; i <= 6000; ++i) s += (i == 0 || i == 6000 ? 0.5 : 1.0) * h * env(a + i * h);
  return 2.0 * s;
}

Eigen::MatrixXd gram_matrix(const KernelTable& table, int l_max, double truncation_tol) {
  if (table.N() != 1) throw UnsupportedError("gram_matrix is implemented for N = 1");
  if (l_max < 0 || l_max > table.kmax()) throw DomainError("gram_matrix: l_max exceeds the table order");
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(l_max + 1, l_max + 1);
  std::vector<Polynomial> P;
  for (int k = 0; k <= l_max; ++k) P.push_back(adjoint_polynomial(table.m(), 1, k));
  double worst_bound = 0.0;
  for (int l = 0; l <= l_max; ++l) {
    for (int k = 0; k <= l_max; ++k) {
      if ((l + k) % 2 == 1) continue;  // odd integrand
      worst_bound = std::max(worst_bound, gram_truncation_bound(table, l, k));
      G(l, k) = even_integral(table, [&](int i) { return psi_sample(table, l, i, false) * P[k](table.y(i)); });
    }
  }
  if (worst_bound > truncation_tol) {
    throw DomainTooSmallError("Gram matrix truncation bound " + std::to_string(worst_bound) +
                              " exceeds tolerance; enlarge the kernel table");
  }
  return G;
}

double kappa(const KernelTable& table, int l, double p, bool parity_shortcut) {
  if (!(p > 1.0)) throw DomainError("kappa needs p > 1");
  require_line(table, l, "kappa");
  if (table.N() > 1) {
    // l = 0 radial: int_{R^N} |F|^p.
    const int n = table.nodes();
    const double h = table.h();
    long double s = 0;
    for (int i = 0; i < n; ++i) {
      const double w = (i == 0 || i == n - 1) ? 0.5 * h : h;
      s += w * std::pow(table.y(i), table.N() - 1) * std::pow(std::abs(table.column(0)[i]), p);
    }
    return static_cast<double>(s) * sphere_area(table.N());
  }
  if (parity_shortcut && l % 2 == 1) return 0.0;
  const Polynomial P = adjoint_polynomial(table.m(), 1, l);
  const FullLine fl = full_line(table);
  const int n = table.nodes();
  long double s = 0;
  for (int j = 0; j < fl.size(); ++j) {
    const int node = fl.mirror(j, n);
    const double psi = psi_sample(table, l, node, j < n - 1);
    s += fl.w[j] * std::pow(std::abs(psi), p) * P(fl.y[j]);
  }
  return static_cast<double>(s);
}

PitchforkCoefficients pitchfork_coefficients(const KernelTable& table, double zero_tol) {
  if (table.m() != 2 || table.N() != 1) throw UnsupportedError("pitchfork coefficients are defined for m = 2, N = 1");
  if (table.kmax() < 2) throw DomainError("pitchfork coefficients need a table with K_max >= 2");
  PitchforkCoefficients pc;
  const Polynomial P1 = adjoint_polynomial(2, 1, 1);
  const Polynomial P2 = adjoint_polynomial(2, 1, 2);
  pc.mu = even_integral(table, [&](int i) {
    return std::pow(std::abs(psi_sample(table, 1, i, false)), 3) * P2(table.y(i));
  });
  pc.nu = even_integral(table, [&](int i) {
    const double a = psi_sample(table, 1, i, false);
    return a * std::abs(a) * psi_sample(table, 2, i, false) * P1(table.y(i));
  });
  pc.degenerate = std::abs(pc.mu) < zero_tol || std::abs(pc.nu) < zero_tol;
  pc.c_hat = pc.degenerate ? 0.0 : 1.0 / (24.0 * pc.mu * pc.nu);
  return pc;
}

BifurcationCoefficients bifurcation_coefficients(const KernelTable& table, int l, double zero_tol) {
  BifurcationCoefficients bc;
  bc.m = table.m();
  bc.N = table.N();
  bc.l = l;
  bc.p_l = bifurcation_exponent(bc.m, bc.N, l);
  const double pl = bc.p_l.value();
  bc.kappa = kappa(table, l, pl);
  if (std::abs(bc.kappa) > zero_tol) {
    bc.c_hat = static_cast<double>((bc.N + l) * (bc.N + l)) / (4.0 * bc.m * bc.m * bc.kappa);
  } else if (l == 1 && bc.m == 2 && bc.N == 1) {
    bc.pitchfork = pitchfork_coefficients(table, zero_tol);
  }
  bc.gamma_slope = (bc.N + l) / ((pl - 1.0) * (2.0 * bc.m + l));
  return bc;
}

std::vector<BranchAmplitude> local_branch_amplitude(const BifurcationCoefficients& c, double p) {
  const double s = p - c.p_l.value();
  if (c.c_hat) {
    const double rhs = *c.c_hat * s;
    BranchAmplitude a;
    a.eps = (rhs >= 0 ? 1.0 : -1.0) * std::pow(std::abs(rhs), 1.0 / (p - 1.0));
    return {a};
  }
  if (c.pitchfork && !c.pitchfork->degenerate) {
    const double rhs = c.pitchfork->c_hat * s;
    if (rhs < 0) return {};
    const double e1 = std::pow(rhs, 0.2);
    const double e2 = 2.0 * c.pitchfork->mu * e1 * e1 * e1;
    return {BranchAmplitude{e1, e2, 2}, BranchAmplitude{-e1, e2, 2}};
  }
  throw DomainError("local_branch_amplitude: no branch coefficient available for l = " + std::to_string(c.l));
}

double generating_scale(ScaleConvention conv, int m, int N, int l, double s) {
  if (conv == ScaleConvention::Centre) return -2.0 * m / (N + l);
  if (s == 0.0) throw DomainError("bifurcation convention needs s = p - p_l != 0");
  return 4.0 * m * m / (s * (N + l) * (N + l));
}

std::vector<GeneratingSolution> solve_generating_system(const KernelTable& table, const ModelParams& params,
                                                        const std::vector<int>& indices, double scale,
                                                        const GeneratingOptions& opts) {
  if (indices.empty()) throw DomainError("generating system needs at least one index");
  for (int l : indices) require_line(table, l, "solve_generating_system");
  const int M = static_cast<int>(indices.size());
  const double p = params.p();

  // Quadrature samples of psi_j and psi*_i on the full line (on [0, L] for radial l = 0).
  std::vector<double> w, yv;
  std::vector<std::vector<double>> psi(M), star(M);
  if (table.N() == 1) {
    const FullLine fl = full_line(table);
    const int n = table.nodes();
    w = fl.w;
    yv = fl.y;
    for (int a = 0; a < M; ++a) {
      const Polynomial P = adjoint_polynomial(table.m(), 1, indices[a]);
      psi[a].resize(fl.size());
      star[a].resize(fl.size());
      for (int j = 0; j < fl.size(); ++j) {
        psi[a][j] = psi_sample(table, indices[a], fl.mirror(j, n), j < n - 1);
        star[a][j] = P(fl.y[j]);
      }
    }
  } else {
    const int n = table.nodes();
    const double area = sphere_area(table.N());
    for (int i = 0; i < n; ++i) {
      w.push_back(area * std::pow(table.y(i), table.N() - 1) * ((i == 0 || i == n - 1) ? 0.5 : 1.0) * table.h());
    }
    psi[0] = table.column(0);
    star[0].assign(n, 1.0);
  }
  const int Q = static_cast<int>(w.size());

  auto system = [&](const Eigen::VectorXd& e, Eigen::VectorXd& g, Eigen::MatrixXd* J) {
    g = e;
    if (J) *J = Eigen::MatrixXd::Identity(M, M);
    for (int q = 0; q < Q; ++q) {
      double u = 0.0;
      for (int a = 0; a < M; ++a) u += e[a] * psi[a][q];
      const double au = std::abs(u);
      const double up = std::pow(au, p);
      const double dup = au > 0 ? p * std::pow(au, p - 1.0) * (u > 0 ? 1.0 : -1.0) : 0.0;
      for (int i = 0; i < M; ++i) {
        g[i] -= scale * w[q] * up * star[i][q];
        if (J) {
          for (int j = 0; j < M; ++j) (*J)(i, j) -= scale * w[q] * dup * psi[j][q] * star[i][q];
        }
      }
    }
  };

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> dist(-opts.range, opts.range);
  std::vector<GeneratingSolution> found;
  auto add = [&](const Eigen::VectorXd& e, double res) {
    const double scale_e = std::max(1.0, e.lpNorm<Eigen::Infinity>());
    for (const auto& f : found) {
      double d = 0.0;
      for (int a = 0; a < M; ++a) d = std::max(d, std::abs(f.eps[a] - e[a]));
      if (d <= 1e-6 * scale_e) return;
    }
    GeneratingSolution s;
    s.eps.assign(e.data(), e.data() + M);
    s.residual = res;
    s.trivial = e.lpNorm<Eigen::Infinity>() < 1e-8;
    if (s.trivial) std::fill(s.eps.begin(), s.eps.end(), 0.0);
    found.push_back(s);
  };
  add(Eigen::VectorXd::Zero(M), 0.0);

  Eigen::VectorXd g(M), gt(M);
  Eigen::MatrixXd J(M, M);
  for (int start = 0; start < opts.starts; ++start) {
    Eigen::VectorXd e(M);
    for (int a = 0; a < M; ++a) e[a] = dist(rng);
    bool ok = false;
    for (int it = 0; it < opts.max_iterations; ++it) {
      system(e, g, &J);
      const double gn = g.lpNorm<Eigen::Infinity>();
      if (gn <= opts.tol * std::max(1.0, e.lpNorm<Eigen::Infinity>())) {
        ok = true;
        break;
      }
      const Eigen::VectorXd step = J.fullPivLu().solve(-g);
      if (!step.allFinite()) break;
      // Backtracking on the residual norm.
      double lam = 1.0;
      for (int k = 0; k < 40; ++k) {
        system(e + lam * step, gt, nullptr);
        if (gt.lpNorm<Eigen::Infinity>() < (1.0 - 1e-4 * lam) * gn) break;
        lam *= 0.5;
      }
      e += lam * step;
      if (!e.allFinite() || e.lpNorm<Eigen::Infinity>() > 1e8) break;
    }
    if (ok) {
      system(e, g, nullptr);
      add(e, g.lpNorm<Eigen::Infinity>());
    }
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.eps < b.eps; });
  return found;
}

}  // namespace polyheat
