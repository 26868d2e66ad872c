#ifndef SBOS_QUADRATURE_HPP
#define SBOS_QUADRATURE_HPP

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace sbos::quad {

struct Rule {
  std::vector<double> x, w;
  // 1 - x, kept separately where the rule crowds an endpoint at 1
  std::vector<double> xc;
  std::size_t size() const { return x.size(); }
};

namespace detail {

template <int N>
Rule gauss_unit() {
  using G = boost::math::quadrature::gauss<double, N>;
  const auto& a = G::abscissa();
  const auto& w = G::weights();
  Rule r;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] == 0.0) {
      r.x.push_back(0.0);
      r.w.push_back(w[k]);
      continue;
    }
    r.x.push_back(a[k]);
    r.w.push_back(w[k]);
    r.x.push_back(-a[k]);
    r.w.push_back(w[k]);
  }
  return r;
}

}  // namespace detail

/// Gauss-Legendre on [a, b]. Supported sizes: 8, 10, 12, 16, 20, 24, 30, 32, 40, 48, 60, 64.
inline Rule gauss_legendre(int n, double a, double b) {
  Rule u;
  switch (n) {
    case 8: u = detail::gauss_unit<8>(); break;
    case 10: u = detail::gauss_unit<10>(); break;
    case 12: u = detail::gauss_unit<12>(); break;
    case 16: u = detail::gauss_unit<16>(); break;
    case 20: u = detail::gauss_unit<20>(); break;
    case 24: u = detail::gauss_unit<24>(); break;
    case 30: u = detail::gauss_unit<30>(); break;
    case 32: u = detail::gauss_unit<32>(); break;
    case 40: u = detail::gauss_unit<40>(); break;
    case 48: u = detail::gauss_unit<48>(); break;
    case 60: u = detail::gauss_unit<60>(); break;
    case 64: u = detail::gauss_unit<64>(); break;
    default: throw std::invalid_argument("unsupported Gauss-Legendre size " + std::to_string(n));
  }
  Rule r;
  const double h = 0.5 * (b - a), m = 0.5 * (a + b);
  for (std::size_t k = 0; k < u.size(); ++k) {
    r.x.push_back(m + h * u.x[k]);
    r.w.push_back(h * u.w[k]);
    r.xc.push_back(b - r.x.back());
  }
  return r;
}

/// Composite Gauss-Legendre with `panels` equal panels on [a, b].
inline Rule composite_gauss(int n, int panels, double a, double b) {
  Rule r;
  const double d = (b - a) / panels;
  for (int k = 0; k < panels; ++k) {
    Rule p = gauss_legendre(n, a + k * d, a + (k + 1) * d);
    r.x.insert(r.x.end(), p.x.begin(), p.x.end());
    r.w.insert(r.w.end(), p.w.begin(), p.w.end());
    for (double v : p.x) r.xc.push_back(b - v);
  }
  return r;
}

/// Double-exponential rule on (0, inf): x = exp(pi/2 sinh t), step h, t in [tlo, thi].
inline Rule exp_sinh(double h, double tlo = -5.0, double thi = 3.0) {
  Rule r;
  const double hp = 0.5 * std::numbers::pi;
  for (double t = std::ceil(tlo / h) * h; t <= thi + 1e-12; t += h) {
    double x = std::exp(hp * std::sinh(t));
    double w = h * hp * std::cosh(t) * x;
    if (x == 0.0 || !std::isfinite(x)) continue;
    r.x.push_back(x);
    r.w.push_back(w);
    r.xc.push_back(1.0 - x);
  }
  return r;
}

/// Double-exponential rule on (0, 1) with accurate complements near 1.
inline Rule tanh_sinh(double h, double tmax = 3.2) {
  Rule r;
  const double hp = 0.5 * std::numbers::pi;
  for (double t = -std::floor(tmax / h) * h; t <= tmax + 1e-12; t += h) {
    double u = hp * std::sinh(t);
    double x = 1.0 / (1.0 + std::exp(-2 * u));
    double xc = 1.0 / (1.0 + std::exp(2 * u));
    double cu = std::cosh(u);
    double w = h * 0.5 * hp * std::cosh(t) / (cu * cu);
    if (x <= 0.0 || xc <= 0.0 || w == 0.0) continue;
    r.x.push_back(x);
    r.w.push_back(w);
    r.xc.push_back(xc);
  }
  return r;
}

/// Rule on (0, inf) for integrands with exponential decay: x = exp(t - exp(-t)).
inline Rule exp_exp(double h, double tlo = -4.0, double thi = 5.0) {
  Rule r;
  for (double t = std::ceil(tlo / h) * h; t <= thi + 1e-12; t += h) {
    double x = std::exp(t - std::exp(-t));
    double w = h * x * (1 + std::exp(-t));
    if (x == 0.0) continue;
    r.x.push_back(x);
    r.w.push_back(w);
    r.xc.push_back(1.0 - x);
  }
  return r;
}

/// Trapezoid on the circle [0, 2 pi) with n nodes.
inline Rule circle(int n) {
  Rule r;
  for (int k = 0; k < n; ++k) {
    r.x.push_back(2 * std::numbers::pi * k / n);
    r.w.push_back(2 * std::numbers::pi / n);
    r.xc.push_back(1.0 - r.x.back());
  }
  return r;
}

}  // namespace sbos::quad

#endif
