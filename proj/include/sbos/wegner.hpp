#ifndef SBOS_WEGNER_HPP
#define SBOS_WEGNER_HPP

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <sstream>

#include "integrate.hpp"
#include "quadrature.hpp"

namespace sbos::wegner {

/// Wegner n-orbital model with unitary gauge group: sites Lambda, variances C.
struct Model {
  int sites = 1;
  Eigen::MatrixXd C;
  int n = 1;

  void validate() const {
    if (sites < 1) throw std::invalid_argument("model needs at least one site");
    if (n < 1) throw std::invalid_argument("model needs n >= 1 orbitals per site");
    if (C.rows() != sites || C.cols() != sites) throw std::invalid_argument("C must be sites x sites");
    for (int i = 0; i < sites; ++i)
      for (int j = 0; j < sites; ++j) {
        if (C(i, j) != C(j, i)) throw std::invalid_argument("C must be symmetric");
        if (!(C(i, j) >= 0)) throw std::invalid_argument("C must have non-negative entries");
      }
  }
};

struct Energies {
  cplx E0, E1;

  void validate() const {
    if (!(E0.imag() > 0)) throw std::invalid_argument("Im E0 must be positive");
  }
};

struct RatioResult : IntegralResult {
  double tail = 0;  // share of the absolute quadrature sum carried by the outermost nodes
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- Monte Carlo

/// H with E|H_{ia,jb}|^2 = C_ij / n and H_{ji} = H_{ij}^dagger.
inline MatC sample_hamiltonian(const Model& m, Rng& rng) {
  const int n = m.n, N = n * m.sites;
  std::normal_distribution<double> nd;
  MatC H = MatC::Zero(N, N);
  for (int i = 0; i < m.sites; ++i)
    for (int j = i; j < m.sites; ++j) {
      double v = m.C(i, j) / n;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          int r = i * n + a, c = j * n + b;
          if (i == j && b < a) continue;
          if (r == c) {
            H(r, r) = std::sqrt(v) * nd(rng);
          } else {
            cplx h = std::sqrt(0.5 * v) * cplx(nd(rng), nd(rng));
            H(r, c) = h;
            H(c, r) = std::conj(h);
          }
        }
    }
  return H;
}

inline cplx det_ratio(const MatC& H, const Energies& e) {
  MatC I = MatC::Identity(H.rows(), H.cols());
  return MatC(e.E1 * I - H).partialPivLu().determinant() / MatC(e.E0 * I - H).partialPivLu().determinant();
}

/// Sample average of Det(E1 - H) / Det(E0 - H).
inline RatioResult r_ratio_mc(const Model& m, const Energies& e, const MCConfig& cfg) {
  m.validate();
  e.validate();
  auto acc = run_chunks(cfg.samples, cfg.seed, cfg.chunks, 0,
                        [&](Rng& rng) { return det_ratio(sample_hamiltonian(m, rng), e); });
  RatioResult r;
  r.value = acc.mean();
  r.std_error = acc.std_error();
  r.samples = acc.count();
  r.method = "monte-carlo";
  return r;
}

// ---------------------------------------------------------------- shared quadrature driver

namespace detail {

struct SiteNode {
  cplx x, y;
  cplx w;          // measure weight times the per-site factor
  bool edge;       // on the outermost ring of the truncated rule
};

// Sums f over the product of per-site node lists; returns {sum, abs sum, abs sum on edge nodes}.
template <class F>
std::array<double, 4> product_sum(const std::vector<SiteNode>& nodes, int sites, F&& coupled) {
  std::vector<std::size_t> idx(sites, 0);
  std::vector<cplx> xs(sites), ys(sites);
  cplx s = 0;
  double a = 0, edge = 0;
  while (true) {
    cplx w = 1.0;
    bool on_edge = false;
    for (int k = 0; k < sites; ++k) {
      const auto& nd = nodes[idx[k]];
      xs[k] = nd.x;
      ys[k] = nd.y;
      w *= nd.w;
      on_edge = on_edge || nd.edge;
    }
    cplx v = w * coupled(xs, ys);
    s += v;
    a += std::abs(v);
    if (on_edge) edge += std::abs(v);
    int k = 0;
    while (k < sites && ++idx[k] == nodes.size()) idx[k++] = 0;
    if (k == sites) break;
  }
  return {s.real(), s.imag(), a, edge};
}

inline cplx small_det(MatC& M) {
  if (M.rows() == 1) return M(0, 0);
  if (M.rows() == 2) return M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
  return M.partialPivLu().determinant();
}

}  // namespace detail

struct QuadConfig {
  int level = 1;            // refinement; the error estimate compares with level - 1
  double y_radius = 1.0;    // SB: radius of the y circle
  double cutoff = 12.0;     // HS: truncation in units of the Gaussian width
  bool hs_real_y = false;   // HS: integrate y over R instead of iR (diverges; for the contract check)
  double edge_limit = 1e-7; // tail share above which the integral is reported divergent
};

// ---------------------------------------------------------------- superbosonization route

/// R = int e^{-(n/2) sum C_ij (x_i x_j - y_i y_j)} D_SB prod (x e^{i E0 x} / (y e^{i E1 y}))^n dx dy / (2 pi i x y)
/// over x in R_+ and y on a circle; D_SB = det[n (delta_ij + C_ij x_i y_j)].
inline RatioResult r_ratio_sb(const Model& m, const Energies& e, const QuadConfig& qc = {}) {
  m.validate();
  e.validate();
  if (m.sites > 2) throw std::invalid_argument("r_ratio_sb quadrature covers |Lambda| <= 2; use r_ratio_sb_mc");
  const int n = m.n, L = m.sites;
  const cplx I(0, 1);
  auto run = [&](int lv) {
    auto xr = quad::exp_exp(0.25 / (1 << lv));
    auto yr = quad::circle(32 << lv);
    std::vector<detail::SiteNode> nodes;
    for (std::size_t i = 0; i < xr.size(); ++i)
      for (std::size_t j = 0; j < yr.size(); ++j) {
        cplx x = xr.x[i], y = qc.y_radius * std::polar(1.0, yr.x[j]);
        cplx lw = double(n) * (std::log(x) + I * e.E0 * x) - double(n) * (std::log(y) + I * e.E1 * y) - std::log(x);
        nodes.push_back({x, y, xr.w[i] * yr.w[j] / (2 * std::numbers::pi) * std::exp(lw), i + 3 >= xr.size()});
      }
    MatC M(L, L);
    auto coupled = [&](const std::vector<cplx>& xs, const std::vector<cplx>& ys) {
      cplx q = 0;
      for (int a = 0; a < L; ++a)
        for (int b = 0; b < L; ++b) {
          q += m.C(a, b) * (xs[a] * xs[b] - ys[a] * ys[b]);
          M(a, b) = double(n) * ((a == b ? 1.0 : 0.0) + m.C(a, b) * xs[a] * ys[b]);
        }
      return std::exp(-0.5 * n * q) * detail::small_det(M);
    };
    return detail::product_sum(nodes, L, coupled);
  };
  auto f = run(qc.level), c = run(qc.level - 1);
  RatioResult r;
  r.value = cplx(f[0], f[1]);
  r.tail = f[2] > 0 ? f[3] / f[2] : 0;
  if (!std::isfinite(f[2]) || r.tail > qc.edge_limit)
    throw DivergenceError("superbosonization x-integral is not damped (tail share " + std::to_string(r.tail) + ")");
  r.std_error = std::abs(r.value - cplx(c[0], c[1])) + 64 * 2.2e-16 * f[2] + r.tail * f[2];
  r.samples = 0;
  r.method = "sb-quadrature";
  return r;
}

/// Monte Carlo over the same integral for any |Lambda|: x_k ~ Gamma(n, rate), theta_k uniform.
inline RatioResult r_ratio_sb_mc(const Model& m, const Energies& e, const MCConfig& cfg) {
  m.validate();
  e.validate();
  const int n = m.n, L = m.sites;
  const cplx I(0, 1);
  std::vector<double> rate(L);
  for (int k = 0; k < L; ++k) rate[k] = e.E0.imag() + std::sqrt(0.5 * n * m.C(k, k));
  const double lgn = std::lgamma(double(n));
  auto acc = run_chunks(cfg.samples, cfg.seed, cfg.chunks, 0, [&](Rng& rng) {
    std::uniform_real_distribution<double> ud(0.0, 2 * std::numbers::pi);
    std::vector<cplx> xs(L), ys(L);
    cplx lw = 0;
    for (int k = 0; k < L; ++k) {
      std::gamma_distribution<double> gd(n, 1.0 / rate[k]);
      double x = gd(rng);
      cplx y = std::polar(1.0, ud(rng));
      xs[k] = x;
      ys[k] = y;
      double lpdf = n * std::log(rate[k]) + (n - 1) * std::log(x) - rate[k] * x - lgn;
      lw += double(n) * (std::log(x) + I * e.E0 * x) - double(n) * (std::log(y) + I * e.E1 * y) - std::log(x) - lpdf;
    }
    MatC M(L, L);
    cplx q = 0;
    for (int a = 0; a < L; ++a)
      for (int b = 0; b < L; ++b) {
        q += m.C(a, b) * (xs[a] * xs[b] - ys[a] * ys[b]);
        M(a, b) = double(n) * ((a == b ? 1.0 : 0.0) + m.C(a, b) * xs[a] * ys[b]);
      }
    return std::exp(lw - 0.5 * n * q) * detail::small_det(M);
  });
  RatioResult r;
  r.value = acc.mean();
  r.std_error = acc.std_error();
  r.samples = acc.count();
  r.method = "sb-monte-carlo";
  return r;
}

// ---------------------------------------------------------------- Hubbard-Stratonovich route

/// Throws unless C is invertible.
inline Eigen::MatrixXd inverse_variances(const Model& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.C);
  const auto& sv = svd.singularValues();
  double rc = sv.size() ? sv(sv.size() - 1) / sv(0) : 0.0;
  if (!(rc > 1e-12)) {
    std::ostringstream os;
    os << "C is singular (reciprocal condition " << rc << "); the Hubbard-Stratonovich route needs C^{-1}";
    throw std::invalid_argument(os.str());
  }
  return m.C.inverse();
}

/// R = int e^{-(n/2) sum (C^{-1})_ij (x_i x_j - y_i y_j)} D_HS prod (y_k - E1)^{n-1} / (x_k - E0)^{n+1} dy dx / (2 pi / i)
/// over x in R and y in iR; D_HS = det[n (delta_ij - (C^{-1})_ij (x_i - E0)(y_j - E1))].
inline RatioResult r_ratio_hs(const Model& m, const Energies& e, const QuadConfig& qc = {}) {
  m.validate();
  e.validate();
  if (m.sites > 2) throw std::invalid_argument("r_ratio_hs quadrature covers |Lambda| <= 2");
  Eigen::MatrixXd Ci = inverse_variances(m);
  const int n = m.n, L = m.sites;
  const cplx I(0, 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.C);
  const double width = std::sqrt(es.eigenvalues().maxCoeff() / n);
  const double b = e.E0.imag();
  // x = Re E0 + b sinh(u) clusters nodes at the pole E0; y = i w sinh(u)
  const double Ux = std::asinh((qc.cutoff * width + std::abs(e.E0.real())) / b);
  const double Uy = std::asinh(qc.cutoff);
  auto run = [&](int lv) {
    const double h = 0.25 / (1 << lv);
    std::vector<detail::SiteNode> nodes;
    const int kx = int(std::ceil(Ux / h)), ky = int(std::ceil(Uy / h));
    for (int i = -kx; i <= kx; ++i)
      for (int j = -ky; j <= ky; ++j) {
        double u = i * h, v = j * h;
        cplx x = e.E0.real() + b * std::sinh(u);
        double s = width * std::sinh(v);
        cplx y = qc.hs_real_y ? cplx(s) : I * s;
        double wx = h * b * std::cosh(u), wy = h * width * std::cosh(v);
        // dy dx / (2 pi / i) with dy = i ds on iR, dy = ds on R
        cplx meas = (qc.hs_real_y ? I : cplx(-1.0)) * wx * wy / (2 * std::numbers::pi);
        cplx site = std::pow(y - e.E1, n - 1) / std::pow(x - e.E0, n + 1);
        nodes.push_back({x, y, meas * site, std::abs(i) + 2 > kx || std::abs(j) + 2 > ky});
      }
    MatC M(L, L);
    auto coupled = [&](const std::vector<cplx>& xs, const std::vector<cplx>& ys) {
      cplx q = 0;
      for (int a = 0; a < L; ++a)
        for (int c = 0; c < L; ++c) {
          q += Ci(a, c) * (xs[a] * xs[c] - ys[a] * ys[c]);
          M(a, c) = double(n) * ((a == c ? 1.0 : 0.0) - Ci(a, c) * (xs[a] - e.E0) * (ys[c] - e.E1));
        }
      return std::exp(-0.5 * n * q) * detail::small_det(M);
    };
    return detail::product_sum(nodes, L, coupled);
  };
  auto f = run(qc.level), c = run(qc.level - 1);
  RatioResult r;
  r.value = cplx(f[0], f[1]);
  r.tail = f[2] > 0 ? f[3] / f[2] : 0;
  if (!std::isfinite(f[2]) || r.tail > qc.edge_limit)
    throw DivergenceError("Hubbard-Stratonovich integral is not damped on this contour (tail share " +
                          std::to_string(r.tail) + ")");
  r.std_error = std::abs(r.value - cplx(c[0], c[1])) + 64 * 2.2e-16 * f[2] + r.tail * f[2];
  r.samples = 0;
  r.method = "hs-quadrature";
  return r;
}

}  // namespace sbos::wegner

#endif
