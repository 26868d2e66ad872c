#ifndef SBOS_GEOMETRY_HPP
#define SBOS_GEOMETRY_HPP

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "quadrature.hpp"
#include "supermatrix.hpp"

namespace sbos {

enum class Sector { Noncompact, Compact };

inline std::string to_string(Sector s) { return s == Sector::Noncompact ? "D0" : "D1"; }

/// Radial data of a domain: N independent eigenvalues with Dyson index beta,
/// each appearing `mult` times in the matrix. The Gaussian-limit exponent is
/// -t a sum (lambda - 1)^2, and on D0 each eigenvalue carries lambda^{-wexp}.
struct EigenStructure {
  SymmetryClass cls = SymmetryClass::GL;
  Sector sector = Sector::Noncompact;
  int r = 0;
  int N = 0;
  int beta = 2;
  double a = 1.0;
  int mult = 1;
  double wexp = 0.0;

  int dim() const { return N + beta * N * (N - 1) / 2; }
  int block() const { return doubling(cls) * r; }
};

inline EigenStructure eigen_structure(SymmetryClass c, Sector s, int r) {
  if (r < 1) throw std::invalid_argument("domain rank must be positive");
  EigenStructure e{c, s, r};
  bool nc = s == Sector::Noncompact;
  switch (c) {
    case SymmetryClass::GL:
      e.N = r, e.beta = 2, e.a = 1.0, e.mult = 1, e.wexp = nc ? r : 0.0;
      break;
    case SymmetryClass::O:
      if (nc)
        e.N = 2 * r, e.beta = 1, e.a = 0.5, e.mult = 1, e.wexp = r + 0.5;
      else
        e.N = r, e.beta = 4, e.a = 1.0, e.mult = 2;
      break;
    case SymmetryClass::Sp:
      if (nc)
        e.N = r, e.beta = 4, e.a = 1.0, e.mult = 2, e.wexp = 2.0 * r - 1;
      else
        e.N = 2 * r, e.beta = 1, e.a = 0.5, e.mult = 1;
      break;
  }
  return e;
}

/// Real dimension: r^2 (GL), r(2r + m) on D0 and r(2r - m) on D1 otherwise.
inline int domain_dim(SymmetryClass c, Sector s, int r) { return eigen_structure(c, s, r).dim(); }

/// Constant K in d mu = K prod w(lambda_i) |Delta|^beta d lambda over unordered
/// eigenvalues, fixed by the Gaussian limit.
inline double measure_constant(const EigenStructure& e) {
  const double pi = std::numbers::pi;
  double d = e.dim();
  double lg = 0.5 * d * std::log(pi * 2 * e.a) - 0.5 * e.N * std::log(2 * pi);
  for (int j = 1; j <= e.N; ++j) lg -= std::lgamma(1 + j * e.beta / 2.0) - std::lgamma(1 + e.beta / 2.0);
  return std::exp(lg);
}

/// Matrix of the domain with the given eigenvalues (N of them).
inline MatC representative(const EigenStructure& e, const std::vector<cplx>& ev) {
  if (static_cast<int>(ev.size()) != e.N) throw std::invalid_argument("eigenvalue count mismatch");
  const int b = e.block();
  MatC m = MatC::Zero(b, b);
  if (e.cls == SymmetryClass::GL) {
    for (int i = 0; i < e.N; ++i) m(i, i) = ev[i];
    return m;
  }
  if (e.mult == 2) {
    for (int i = 0; i < e.r; ++i) m(i, i) = m(i + e.r, i + e.r) = ev[i];
    return m;
  }
  // [[A, B], [B, A]] with A, B diagonal: eigenvalues A_ii +- B_ii
  for (int i = 0; i < e.r; ++i) {
    cplx al = 0.5 * (ev[2 * i] + ev[2 * i + 1]), be = 0.5 * (ev[2 * i] - ev[2 * i + 1]);
    m(i, i) = m(i + e.r, i + e.r) = al;
    m(i, i + e.r) = m(i + e.r, i) = be;
  }
  return m;
}

struct EigenNode {
  std::vector<cplx> ev;
  double w = 0;
};

/// Tensor quadrature for class functions on a domain with N <= 2.
/// Refinement level 0 is coarse; each level halves the step.
inline std::vector<EigenNode> domain_nodes(const EigenStructure& e, int level) {
  if (e.N > 2) throw std::invalid_argument("eigenvalue quadrature supports N <= 2; use the samplers");
  if (level < 0 || level > 4) throw std::invalid_argument("quadrature level out of range");
  const double K = measure_constant(e);
  const double pi = std::numbers::pi;
  std::vector<EigenNode> out;
  if (e.sector == Sector::Noncompact) {
    const double h = 0.5 / (1 << level);
    auto rs = quad::exp_exp(h);
    if (e.N == 1) {
      for (std::size_t i = 0; i < rs.size(); ++i)
        out.push_back({{rs.x[i]}, K * rs.w[i] * std::pow(rs.x[i], -e.wexp)});
      return out;
    }
    // lambda_{1,2} = a (1 +- s), ordered chamber doubled
    auto ts = quad::tanh_sinh(h, 3.3);
    for (std::size_t i = 0; i < rs.size(); ++i)
      for (std::size_t j = 0; j < ts.size(); ++j) {
        double a = rs.x[i], s = ts.x[j];
        double l1 = a * (1 + s), l2 = a * ts.xc[j];
        if (l2 <= 0) continue;
        // [[alpha, beta], [beta, alpha]] cannot resolve l2 below rounding of l1
        if (e.mult == 1 && e.cls == SymmetryClass::O && l2 < 1e-15 * l1) continue;
        double w = 4 * a * K * std::pow(2 * a * s, e.beta) * std::pow(l1 * l2, -e.wexp) * rs.w[i] * ts.w[j];
        out.push_back({{l1, l2}, w});
      }
    return out;
  }
  if (e.N == 1) {
    auto c = quad::circle(16 << level);
    for (std::size_t i = 0; i < c.size(); ++i) out.push_back({{std::polar(1.0, c.x[i])}, K * c.w[i]});
    return out;
  }
  static const int gl_sizes[] = {10, 16, 24, 32, 48};
  auto phi = quad::circle(12 << level);
  auto psi = quad::gauss_legendre(gl_sizes[level], 0.0, pi);
  for (std::size_t i = 0; i < phi.size(); ++i)
    for (std::size_t j = 0; j < psi.size(); ++j) {
      double w = 2 * K * std::pow(2 * std::sin(psi.x[j]), e.beta) * phi.w[i] * psi.w[j];
      out.push_back({{std::polar(1.0, phi.x[i] + psi.x[j]), std::polar(1.0, phi.x[i] - psi.x[j])}, w});
    }
  return out;
}

struct QuadResult {
  cplx value;
  double error = 0;
  std::size_t nodes = 0;
  double abs_sum = 0;  // sum of |w f| at the fine level
};

/// Integral of a class function by eigenvalue quadrature at two levels.
inline QuadResult integrate_class_function(const EigenStructure& e, const std::function<cplx(const MatC&)>& f,
                                           int level = 2) {
  auto run = [&](int lv, double* absum) {
    cplx s = 0;
    double a = 0;
    auto nodes = domain_nodes(e, lv);
    for (const auto& nd : nodes) {
      cplx v = nd.w * f(representative(e, nd.ev));
      s += v;
      a += std::abs(v);
    }
    if (absum) *absum = a;
    return std::pair{s, nodes.size()};
  };
  double absum = 0;
  auto [fine, count] = run(level, &absum);
  auto coarse = run(level - 1, nullptr).first;
  return {fine, std::abs(fine - coarse) + 64 * 2.2e-16 * absum, count, absum};
}

// ---------------------------------------------------------------- densities

inline bool is_hermitian(const MatC& x, double tol) { return (x - x.adjoint()).norm() <= tol * (1 + x.norm()); }

/// Membership in Sym_b for the block form of the class and sector.
inline bool in_sym(const EigenStructure& e, const MatC& x, double tol) {
  if (e.cls == SymmetryClass::GL) return true;
  MatC t = e.sector == Sector::Noncompact ? boson_form(e.cls, e.r) : fermion_form(e.cls, e.r);
  return (x - t * x.transpose() * t.inverse()).norm() <= tol * (1 + x.norm());
}

inline bool in_domain(const EigenStructure& e, const MatC& x, double tol = 1e-10) {
  if (x.rows() != e.block() || x.cols() != e.block()) return false;
  if (!in_sym(e, x, tol)) return false;
  if (e.sector == Sector::Compact)
    return (x.adjoint() * x - MatC::Identity(x.rows(), x.cols())).norm() <= tol * x.rows();
  if (!is_hermitian(x, tol)) return false;
  Eigen::SelfAdjointEigenSolver<MatC> es(0.5 * (x + x.adjoint()));
  return es.eigenvalues().minCoeff() > 0;
}

/// Density of d mu on D0 with respect to Lebesgue measure on the real
/// coordinates (diagonal entries, real and imaginary parts above the diagonal
/// of the Hermitian block A and of the symmetric/skew block B).
inline double density_D0(SymmetryClass c, int p, const MatC& x) {
  auto e = eigen_structure(c, Sector::Noncompact, p);
  if (!in_domain(e, x)) throw std::domain_error("density_D0: point outside the domain");
  double det = x.determinant().real();
  switch (c) {
    case SymmetryClass::GL: return std::pow(2.0, p * (p - 1) / 2.0) * std::pow(det, -p);
    case SymmetryClass::O: return std::pow(2.0, p * (p - 1)) * std::pow(det, -(p + 0.5));
    case SymmetryClass::Sp: return std::pow(2.0, p * (p - 1)) * std::pow(det, -(p - 0.5));
  }
  return 0;
}

// ---------------------------------------------------------------- volumes

/// log vol(K_n): U_n, O_n(R), USp_n with the trace-form metric.
inline double log_vol_K(SymmetryClass c, int n) {
  const double l2pi = std::log(2 * std::numbers::pi);
  if (n < 0) throw std::invalid_argument("negative group rank");
  double lv = 0;
  switch (c) {
    case SymmetryClass::GL:
      for (int k = 1; k <= n; ++k) lv += k * l2pi - std::lgamma(k);
      return lv;
    case SymmetryClass::O:
      lv = (n % 2) ? std::log(2.0) : 0.0;
      for (int k = (n % 2) ? 3 : 2; k <= n; k += 2) lv += std::log(2.0) + (k - 1) * l2pi - std::lgamma(k - 1);
      return lv;
    case SymmetryClass::Sp:
      if (n % 2) throw std::invalid_argument("USp_n needs even n");
      for (int k = 2; k <= n; k += 2) lv += k * l2pi - std::log(2.0) - std::lgamma(k);
      return lv;
  }
  return lv;
}

inline double vol_K(SymmetryClass c, int n) { return std::exp(log_vol_K(c, n)); }

/// vol(K_n) / vol(K_{n-k}).
inline double vol_ratio(SymmetryClass c, int n, int k) {
  if (k > n || n - k < 0) throw std::invalid_argument("vol_ratio: need 0 <= k <= n");
  if (c == SymmetryClass::Sp && (n % 2 || k % 2)) throw std::invalid_argument("vol_ratio: USp needs even ranks");
  return std::exp(log_vol_K(c, n) - log_vol_K(c, n - k));
}

/// Total mass of a compact domain D1 (Dyson's circular integral).
inline double compact_volume(const EigenStructure& e) {
  double lg = e.N * std::log(2 * std::numbers::pi) + std::lgamma(1 + e.N * e.beta / 2.0) -
              e.N * std::lgamma(1 + e.beta / 2.0);
  return measure_constant(e) * std::exp(lg);
}

// ---------------------------------------------------------------- samplers

using Rng = std::mt19937_64;

inline MatC complex_gaussian(int r, int c, Rng& rng, double var = 1.0) {
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5 * var));
  MatC m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = cplx(nd(rng), nd(rng));
  return m;
}

inline MatC haar_unitary(int n, Rng& rng) {
  Eigen::HouseholderQR<MatC> qr(complex_gaussian(n, n, rng));
  MatC q = qr.householderQ();
  const MatC& r = qr.matrixQR();
  for (int j = 0; j < n; ++j) q.col(j) *= r(j, j) / std::abs(r(j, j));
  return q;
}

/// Numeric x-block of the invariant supermatrix for Z (n x p).
inline MatC x_block(SymmetryClass c, const MatC& Z) {
  MatC Zt = Z.adjoint();
  if (c == SymmetryClass::GL) return Zt * Z;
  const int n = static_cast<int>(Z.rows()), p = static_cast<int>(Z.cols());
  MatC beta = c == SymmetryClass::O ? MatC::Identity(n, n) : t_skew(n / 2);
  MatC bi = beta.inverse();
  MatC x(2 * p, 2 * p);
  x.topLeftCorner(p, p) = Zt * Z;
  x.topRightCorner(p, p) = Zt * bi * Zt.transpose();
  x.bottomLeftCorner(p, p) = Z.transpose() * beta * Z;
  x.bottomRightCorner(p, p) = Z.transpose() * Zt.transpose();
  return x;
}

struct Proposal {
  enum Kind { Wishart, LogNormal } kind = Wishart;
  int rows = 0;        // Wishart: rows k of Z (0 selects the smallest valid k + 2)
  double scale = 1.0;  // Wishart: Z ~ exp(-scale |Z|^2); LogNormal: sigma of log x
  double center = 0.0; // LogNormal: mean of log x
};

struct WeightedSample {
  MatC x;
  double weight = 0;
};

/// Importance sample on D0: returns x and 1 / (proposal density w.r.t. d mu).
inline WeightedSample sample_D0(SymmetryClass c, int p, Rng& rng, const Proposal& prop = {}) {
  const int m = class_m(c), d = doubling(c);
  if (prop.kind == Proposal::LogNormal) {
    if (c != SymmetryClass::GL || p != 1) throw std::invalid_argument("log-normal proposal is for GL, p = 1");
    std::normal_distribution<double> nd(prop.center, prop.scale);
    double l = nd(rng);
    MatC x(1, 1);
    x(0, 0) = std::exp(l);
    double z = (l - prop.center) / prop.scale;
    double rho = std::exp(-0.5 * z * z) / (prop.scale * std::sqrt(2 * std::numbers::pi));
    return {x, 1.0 / rho};
  }
  int k = prop.rows > 0 ? prop.rows : d * p + 2;
  if (k < d * p || (c == SymmetryClass::Sp && k % 2)) throw std::invalid_argument("degenerate Wishart proposal");
  const double s = prop.scale;
  MatC Z = complex_gaussian(k, p, rng, 1.0 / s);
  MatC x = x_block(c, Z);
  x = MatC(0.5 * (x + x.adjoint()));
  double trp = Z.squaredNorm();
  double kp = double(k) / (1 + std::abs(m));
  double det = x.determinant().real();
  double lrho = p * k * std::log(s / std::numbers::pi) - p * (k + m) * std::log(2.0) +
                log_vol_K(c, k) - log_vol_K(c, k - d * p) - s * trp + kp * std::log(det);
  return {x, std::exp(-lrho)};
}

/// Haar-distributed point of D1 (unitary, in Sym_b for O and Sp).
inline MatC sample_D1(SymmetryClass c, int q, Rng& rng) {
  if (c == SymmetryClass::GL) return haar_unitary(q, rng);
  MatC k = haar_unitary(2 * q, rng);
  MatC t = fermion_form(c, q);
  return k * t * k.transpose() * t.inverse();
}

// ---------------------------------------------------------------- Gaussian limit

/// sqrt(t/pi)^dim times the integral of exp(-+ t c Tr(u - Id)^2) d mu over the
/// window |lambda - 1| <= 0.9 (D0) or |theta| <= pi/3 (D1).
inline cplx gaussian_limit_check(const EigenStructure& e, double t, int points = 24) {
  if (e.N > 4) throw std::invalid_argument("gaussian_limit_check supports N <= 4");
  const double V = 8.0;
  const double s = 1.0 / std::sqrt(2 * t * e.a);
  auto rv = quad::composite_gauss(points, 2, -V, V);
  auto rg = quad::composite_gauss(points, 2, 0.0, 2 * V);
  const bool nc = e.sector == Sector::Noncompact;
  const double win = nc ? 0.9 : std::numbers::pi / 3;
  std::vector<double> u(e.N);
  cplx acc = 0;
  std::function<void(int, double)> rec = [&](int k, double w) {
    if (k == e.N) {
      cplx ex = 0;
      double vd = 1, wf = 1;
      for (int i = 0; i < e.N; ++i) {
        double d = s * u[i];
        if (std::abs(d) > win) return;
        if (nc) {
          ex -= 0.5 * u[i] * u[i];
          wf *= std::pow(1 + d, -e.wexp);
        } else {
          cplx z = std::polar(1.0, d) - 1.0;
          ex += t * e.a * z * z;
        }
        for (int j = 0; j < i; ++j) {
          double g = nc ? s * (u[i] - u[j]) : 2 * std::sin(0.5 * s * (u[i] - u[j]));
          vd *= std::pow(std::abs(g), e.beta);
        }
      }
      acc += w * wf * vd * std::exp(ex);
      return;
    }
    const auto& r = k == 0 ? rv : rg;
    for (std::size_t i = 0; i < r.size(); ++i) {
      u[k] = k == 0 ? r.x[i] : u[k - 1] + r.x[i];
      rec(k + 1, w * r.w[i]);
    }
  };
  rec(0, 1.0);
  double lf = std::lgamma(e.N + 1.0);
  double pref = std::pow(t / std::numbers::pi, 0.5 * e.dim()) * std::exp(lf) * measure_constant(e) * std::pow(s, e.N);
  return pref * acc;
}

}  // namespace sbos

#endif
