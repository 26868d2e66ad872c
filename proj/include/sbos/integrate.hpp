#ifndef SBOS_INTEGRATE_HPP
#define SBOS_INTEGRATE_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include "geometry.hpp"
#include "invariants.hpp"

namespace sbos {

struct MCConfig {
  long samples = 100000;
  uint64_t seed = 1;
  // the sample stream is cut into this many substreams, each seeded from (seed, index)
  int chunks = 16;
  // Gaussian proposal exp(-s |Z|^2); 0 picks s from a short pilot run
  double proposal_scale = 0.0;
  // quadrature refinement for the bosonized side
  int level = 1;
};

struct IntegralResult {
  cplx value;
  double std_error = 0;
  long samples = 0;
  std::string method;
};

// ---------------------------------------------------------------- accumulation

/// Compensated running sums of v and |v|^2.
class MomentAccumulator {
 public:
  void add(cplx v) {
    kadd(sr_, cr_, v.real());
    kadd(si_, ci_, v.imag());
    kadd(s2_, c2_, std::norm(v));
    ++n_;
  }
  void merge(const MomentAccumulator& o) {
    kadd(sr_, cr_, o.sr_ + o.cr_);
    kadd(si_, ci_, o.si_ + o.ci_);
    kadd(s2_, c2_, o.s2_ + o.c2_);
    n_ += o.n_;
  }
  long count() const { return n_; }
  cplx mean() const { return n_ ? cplx(sr_ + cr_, si_ + ci_) / double(n_) : cplx{}; }
  double second_moment() const { return n_ ? (s2_ + c2_) / n_ : 0.0; }
  /// Standard error of the mean, real and imaginary variances combined.
  double std_error() const {
    if (n_ < 2) return std::numeric_limits<double>::infinity();
    double var = std::max(0.0, second_moment() - std::norm(mean())) * n_ / (n_ - 1.0);
    return std::sqrt(var / n_);
  }

 private:
  static void kadd(double& s, double& c, double v) {
    double y = v - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  double sr_ = 0, cr_ = 0, si_ = 0, ci_ = 0, s2_ = 0, c2_ = 0;
  long n_ = 0;
};

inline Rng substream(uint64_t seed, uint64_t index) {
  std::seed_seq sq{uint32_t(seed), uint32_t(seed >> 32), uint32_t(index), uint32_t(index >> 32)};
  return Rng(sq);
}

/// Runs `samples` draws of `draw` over fixed substreams and merges them in order.
inline MomentAccumulator run_chunks(long samples, uint64_t seed, int chunks, uint64_t stream_offset,
                                    const std::function<cplx(Rng&)>& draw) {
  if (samples < 1) throw std::invalid_argument("sample count must be positive");
  chunks = std::max(1, std::min<int>(chunks, samples));
  MomentAccumulator total;
  for (int k = 0; k < chunks; ++k) {
    long lo = samples * k / chunks, hi = samples * (k + 1) / chunks;
    Rng rng = substream(seed, stream_offset + k);
    MomentAccumulator acc;
    for (long i = lo; i < hi; ++i) acc.add(draw(rng));
    total.merge(acc);
  }
  return total;
}

// ---------------------------------------------------------------- flat side

namespace detail {

inline void check_flat_args(SymmetryClass c, int n, int p, int q) {
  if (n < 1 || p < 0 || q < 0) throw std::invalid_argument("need n >= 1 and p, q >= 0");
  if (c == SymmetryClass::Sp && n % 2) throw std::invalid_argument("symplectic class needs even n");
  if (2 * n * q > GrassmannContext::max_generators) throw std::invalid_argument("2 n q exceeds the generator limit");
}

}  // namespace detail

/// Omega_V[f](Z) for f = F o Q, with Omega_V carrying (2 pi)^{-qn}.
inline cplx flat_fiber_integral(const expr::Expr& F, const FlatLayout& L, const BetaTensor& b, const BerezinForm& form,
                                const MatC& Z) {
  auto pt = FlatPoint::at(L, Z);
  return berezin(form, pullback(F, pt, b, static_cast<int>(Z.cols()), L.q));
}

/// int_V f with f = F o Q. The even measure is 2^{pn} times Lebesgue measure on
/// C^{n x p}; it is sampled from the Gaussian proposal (s/pi)^{pn} exp(-s |Z|^2).
inline IntegralResult flat_superintegral(const expr::Expr& F, SymmetryClass c, int n, int p, int q,
                                         const MCConfig& cfg) {
  detail::check_flat_args(c, n, p, q);
  expr::typecheck(F);
  auto L = make_flat_layout(n, q);
  auto b = BetaTensor::make(c, n);
  auto form = flat_berezin_form(L);
  if (p == 0) {
    cplx v = flat_fiber_integral(F, L, b, form, MatC(n, 0));
    return {v, 0.0, 1, "berezin"};
  }
  const double pn = double(p) * n;
  auto estimator = [&](double s) {
    const double lnorm = pn * std::log(2.0) - pn * std::log(s / std::numbers::pi);
    return [&, s, lnorm](Rng& rng) {
      MatC Z = complex_gaussian(n, p, rng, 1.0 / s);
      return flat_fiber_integral(F, L, b, form, Z) * std::exp(lnorm + s * Z.squaredNorm());
    };
  };
  double s = cfg.proposal_scale;
  if (s <= 0) {
    // the mean does not depend on s, so the smallest second moment wins
    static const double cands[] = {0.3, 0.45, 0.65, 0.9, 1.3, 1.8, 2.6};
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 7; ++i) {
      auto acc = run_chunks(1500, cfg.seed, 1, 1000 + i, estimator(cands[i]));
      double m2 = acc.second_moment();
      if (std::isfinite(m2) && m2 < best) best = m2, s = cands[i];
    }
    if (s <= 0) throw std::runtime_error("no proposal scale gave a finite pilot estimate");
  }
  auto acc = run_chunks(cfg.samples, cfg.seed, cfg.chunks, 0, estimator(s));
  return {acc.mean(), acc.std_error(), acc.count(), "monte-carlo"};
}

// ---------------------------------------------------------------- bosonized side

/// J = Det^q(x - sigma y^{-1} tau) Det^p(y - tau x^{-1} sigma) / Det^{m/2}(1 - x^{-1} sigma y^{-1} tau).
inline GrassmannElement w1_jacobian(const SuperMatrix& Q) {
  const auto& ctx = Q.context();
  GMatrix xi = inv_even(Q.x), yi = inv_even(Q.y);
  GMatrix A = Q.x - Q.sigma * yi * Q.tau;
  GMatrix B = Q.y - Q.tau * xi * Q.sigma;
  GrassmannElement j = det_power(A, HalfInt{2 * Q.q}) * det_power(B, HalfInt{2 * Q.p});
  int m = class_m(Q.cls);
  if (m != 0) {
    GMatrix C = GMatrix::identity(ctx, Q.p_eff()) - xi * Q.sigma * yi * Q.tau;
    j = j * det_power(C, HalfInt{-m});
  }
  return j;
}

/// Integrand on W_{11}: returns the Grassmann element whose W_{11} Berezin
/// integral is wanted, given the point Q.
using W1Integrand = std::function<GrassmannElement(const SuperMatrix&)>;

namespace detail {

struct SectorNodes {
  std::vector<MatC> reps;
  std::vector<double> w;
};

inline SectorNodes sector_nodes(SymmetryClass c, Sector s, int r, int level) {
  SectorNodes out;
  if (r == 0) {
    out.reps.push_back(MatC(0, 0));
    out.w.push_back(1.0);
    return out;
  }
  auto e = eigen_structure(c, s, r);
  for (const auto& nd : domain_nodes(e, level)) {
    out.reps.push_back(representative(e, nd.ev));
    out.w.push_back(nd.w);
  }
  return out;
}

}  // namespace detail

/// int_{D0 x D1} d mu d mu Omega_{W1}[J G(Q)] by eigenvalue quadrature, valid
/// when J G is a class function of x and of y separately. `project` selects
/// the coefficient of a monomial in extra generators left after Omega_{W1}.
inline QuadResult w1_quadrature(const W1Layout& L, const W1Integrand& G, int level, uint64_t project = 0) {
  if (level < 1 || level > 4) throw std::invalid_argument("quadrature level must be in 1..4");
  auto form = omega_w1_form(L);
  auto run = [&](int lv, double* absum) {
    auto X = detail::sector_nodes(L.cls, Sector::Noncompact, L.p, lv);
    auto Y = detail::sector_nodes(L.cls, Sector::Compact, L.q, lv);
    cplx s = 0;
    double a = 0;
    for (std::size_t i = 0; i < X.reps.size(); ++i)
      for (std::size_t j = 0; j < Y.reps.size(); ++j) {
        SuperMatrix Q = w1_point(L, X.reps[i], Y.reps[j]);
        GrassmannElement g = w1_jacobian(Q) * G(Q);
        cplx v = X.w[i] * Y.w[j] * apply(form, g).coefficient(project);
        s += v;
        a += std::abs(v);
      }
    if (absum) *absum = a;
    return std::pair{s, X.reps.size() * Y.reps.size()};
  };
  double absum = 0;
  auto [fine, count] = run(level, &absum);
  cplx coarse = run(level - 1, nullptr).first;
  return {fine, std::abs(fine - coarse) + 64 * 2.2e-16 * absum, count, absum};
}

/// Monte Carlo version of w1_quadrature: Wishart proposal on D0, Haar on D1.
inline IntegralResult w1_monte_carlo(const W1Layout& L, const W1Integrand& G, int n, const MCConfig& cfg,
                                     uint64_t project = 0) {
  auto form = omega_w1_form(L);
  const int d = doubling(L.cls);
  Proposal prop{Proposal::Wishart, std::max(n, d * L.p + (L.cls == SymmetryClass::Sp ? 2 : 1)),
                cfg.proposal_scale > 0 ? cfg.proposal_scale : 1.0, 0.0};
  if (L.cls == SymmetryClass::Sp && prop.rows % 2) ++prop.rows;
  double vol1 = L.q > 0 ? compact_volume(eigen_structure(L.cls, Sector::Compact, L.q)) : 1.0;
  auto acc = run_chunks(cfg.samples, cfg.seed, cfg.chunks, 0, [&](Rng& rng) {
    WeightedSample xs = L.p > 0 ? sample_D0(L.cls, L.p, rng, prop) : WeightedSample{MatC(0, 0), 1.0};
    MatC y = L.q > 0 ? sample_D1(L.cls, L.q, rng) : MatC(0, 0);
    SuperMatrix Q = w1_point(L, xs.x, y);
    return xs.weight * vol1 * apply(form, w1_jacobian(Q) * G(Q)).coefficient(project);
  });
  return {acc.mean(), acc.std_error(), acc.count(), "monte-carlo"};
}

inline bool eigen_quadrature_available(SymmetryClass c, int p, int q) {
  return (p == 0 || eigen_structure(c, Sector::Noncompact, p).N <= 2) &&
         (q == 0 || eigen_structure(c, Sector::Compact, q).N <= 2);
}

/// Throws unless p <= n', which the bosonization needs.
inline void check_p_le_nprime(SymmetryClass c, int n, int p) {
  if (p > n_prime(c, n))
    throw std::invalid_argument("p = " + std::to_string(p) + " exceeds n' = " + std::to_string(n_prime(c, n)) +
                                ": superbosonization needs p <= n' (the x-block must be invertible)");
}

/// Constant in front of int DQ SDet^{n'} F on the bosonized side, including the
/// (2 pi)^{-pq} of DQ.
inline double boson_prefactor(SymmetryClass c, int n, int p, int q) {
  const int d = doubling(c), m = class_m(c);
  double l = log_vol_K(c, n) - log_vol_K(c, n - d * p + d * q) - d * p * q * std::log(2 * std::numbers::pi);
  if (m != 0) l += (q - p) * m * std::log(2.0);
  return std::exp(l);
}

/// int_{D} DQ SDet^{n'}(Q) F(Q), times the volume prefactor.
inline IntegralResult boson_rhs(const expr::Expr& F, SymmetryClass c, int n, int p, int q, const MCConfig& cfg) {
  detail::check_flat_args(c, n, p, q);
  check_p_le_nprime(c, n, p);
  expr::typecheck(F);
  auto L = make_w1_layout(c, p, q);
  HalfInt e = HalfInt::from_rational(n, doubling(c));
  W1Integrand G = [&](const SuperMatrix& Q) { return sdet_power(Q, e) * expr::eval(F, Q); };
  double pref = boson_prefactor(c, n, p, q);
  if (eigen_quadrature_available(c, p, q)) {
    auto r = w1_quadrature(L, G, cfg.level);
    return {pref * r.value, pref * r.error, static_cast<long>(r.nodes), "eigen-quadrature"};
  }
  auto r = w1_monte_carlo(L, G, n, cfg);
  return {pref * r.value, pref * r.std_error, r.samples, r.method};
}

// ---------------------------------------------------------------- sector checks

struct SectorCheck {
  IntegralResult lhs, rhs;
};

/// Boson-boson sector (q = 0): lhs = int f dvol over C^{n x p} (Lebesgue),
/// rhs = 2^{-p(n+m)} vol(K_n)/vol(K_{n,p}) int F0 Det^{n'} d mu.
inline SectorCheck bb_sector_check(const expr::Expr& F0, SymmetryClass c, int n, int p, const MCConfig& cfg) {
  detail::check_flat_args(c, n, p, 0);
  check_p_le_nprime(c, n, p);
  const int d = doubling(c), m = class_m(c);
  SectorCheck out;
  auto flat = flat_superintegral(F0, c, n, p, 0, cfg);
  double lebesgue = std::pow(2.0, -double(p) * n);
  out.lhs = {flat.value * lebesgue, flat.std_error * lebesgue, flat.samples, flat.method};
  auto e = eigen_structure(c, Sector::Noncompact, p);
  auto L = make_w1_layout(c, p, 0);
  const double np = n_prime(c, n);
  auto f = [&](const MatC& x) {
    SuperMatrix Q = w1_point(L, x, MatC(0, 0));
    return expr::eval(F0, Q).numeric_part() * std::pow(x.determinant(), np);
  };
  double pref = std::pow(2.0, -double(p) * (n + m)) * vol_ratio(c, n, d * p);
  if (e.N <= 2) {
    auto r = integrate_class_function(e, f, std::max(cfg.level, 2) + 1);
    out.rhs = {pref * r.value, pref * r.error, static_cast<long>(r.nodes), "eigen-quadrature"};
  } else {
    Proposal prop{Proposal::Wishart, std::max(n, d * p + 2), cfg.proposal_scale > 0 ? cfg.proposal_scale : 1.0, 0};
    if (c == SymmetryClass::Sp && prop.rows % 2) ++prop.rows;
    auto acc = run_chunks(cfg.samples, cfg.seed, cfg.chunks, 1 << 20, [&](Rng& rng) {
      auto s = sample_D0(c, p, rng, prop);
      return s.weight * f(s.x);
    });
    out.rhs = {pref * acc.mean(), pref * acc.std_error(), acc.count(), "monte-carlo"};
  }
  return out;
}

/// Fermion-fermion sector (p = 0): lhs = Omega_V[f] with the bare Berezin form,
/// rhs = (2 pi)^{qn} 2^{qm} vol(K_n)/vol(K_{n,-q}) int F1(y) Det^{-n'}(y) d mu.
inline SectorCheck ff_sector_check(const expr::Expr& F1, SymmetryClass c, int n, int q, int level = 2) {
  detail::check_flat_args(c, n, 0, q);
  if (q < 1) throw std::invalid_argument("ff sector needs q >= 1");
  const int d = doubling(c), m = class_m(c);
  auto L = make_flat_layout(n, q);
  auto b = BetaTensor::make(c, n);
  SectorCheck out;
  out.lhs = {flat_fiber_integral(F1, L, b, omega_v_form(L), MatC(n, 0)), 0.0, 1, "berezin"};
  auto e = eigen_structure(c, Sector::Compact, q);
  auto W = make_w1_layout(c, 0, q);
  HalfInt np = HalfInt::from_rational(n, d);
  auto g = [&](const MatC& y) {
    SuperMatrix Q = w1_point(W, MatC(0, 0), y);
    return (expr::eval(F1, Q) * sdet_power(Q, np)).numeric_part();
  };
  double lp = q * n * std::log(2 * std::numbers::pi) + q * m * std::log(2.0) + log_vol_K(c, n) -
              log_vol_K(c, n + d * q);
  double pref = std::exp(lp);
  auto r = integrate_class_function(e, g, level);
  out.rhs = {pref * r.value, pref * r.error, static_cast<long>(r.nodes), "eigen-quadrature"};
  return out;
}

/// Shift lemma on D1 for a nilpotent w (entries in a parameter algebra):
/// lhs = int F(y + w) d mu, rhs = int F(y) Det^{-(q - m/2)}(Id - y^{-1} w) d mu.
struct ShiftCheck {
  GrassmannElement lhs, rhs;
  double error = 0;
};

inline ShiftCheck shift_lemma_check(const expr::Expr& F, SymmetryClass c, int q, const GMatrix& w, int level = 2) {
  if (q < 1) throw std::invalid_argument("shift lemma needs q >= 1");
  const int qe = doubling(c) * q;
  if (w.rows() != qe || w.cols() != qe) throw std::invalid_argument("w must be q_eff x q_eff");
  for (int i = 0; i < qe; ++i)
    for (int j = 0; j < qe; ++j)
      if (w(i, j).numeric_part() != 0.0 || !w(i, j).is_even()) throw std::invalid_argument("w must be even and nilpotent");
  const auto& ctx = w.context();
  auto e = eigen_structure(c, Sector::Compact, q);
  if (e.dim() != e.N)
    throw std::invalid_argument("shift_lemma_check integrates over the eigenvalue torus; needs a domain of dimension N");
  HalfInt ex{-(2 * q - class_m(c))};
  auto eval_at = [&](const GMatrix& y) {
    SuperMatrix Q;
    Q.cls = c;
    Q.p = 0;
    Q.q = q;
    Q.x = GMatrix(ctx, 0, 0);
    Q.sigma = GMatrix(ctx, 0, qe);
    Q.tau = GMatrix(ctx, qe, 0);
    Q.y = y;
    return expr::eval(F, Q);
  };
  auto run = [&](int lv) {
    GrassmannElement l(ctx), r(ctx);
    for (const auto& nd : domain_nodes(e, lv)) {
      MatC y = representative(e, nd.ev);
      GMatrix yg = GMatrix::from_numeric(ctx, y);
      l = l + nd.w * eval_at(yg + w);
      GMatrix u = GMatrix::identity(ctx, qe) - MatC(y.inverse()) * w;
      r = r + nd.w * (eval_at(yg) * det_power(u, ex));
    }
    return std::pair{l, r};
  };
  auto [l, r] = run(level);
  auto [lc, rc] = run(level - 1);
  return {l, r, (l - lc).max_abs() + (r - rc).max_abs()};
}

/// Finite-difference check of the divergence identity on D1 at q = 1:
/// div t = -(q - m/2) Tr(y^{-1} w) for the vector field t = d/ds theta(y + s w),
/// with y = e^{i theta} Id and w = omega Id. Returns {divergence, expected}.
inline std::pair<cplx, cplx> divergence_check(SymmetryClass c, cplx omega, double theta) {
  if (c == SymmetryClass::Sp) throw std::invalid_argument("divergence check covers the one-dimensional domains (GL, O)");
  const int qe = doubling(c);
  const cplx I(0, 1);
  auto chart = [&](double th, cplx s) { return -I * std::log(std::exp(I * th) + s * omega); };
  auto field = [&](double th) {
    const double h = 1e-5;
    return (chart(th, h) - chart(th, -h)) / (2 * h);
  };
  const double k = 1e-4;
  cplx div = (field(theta + k) - field(theta - k)) / (2 * k);
  cplx tr = double(qe) * omega * std::exp(-I * theta);
  cplx expected = -(1.0 - 0.5 * class_m(c)) * tr;
  return {div, expected};
}

// ---------------------------------------------------------------- localization and Ward identities

/// C_{n,q} = int DQ' SDet^{n'+q}(Q) exp(Tr' y - Tr' x) at p = q, where DQ'
/// omits the (2 pi)^{-pq} of DQ.
inline IntegralResult localization_constant(SymmetryClass c, int n, int q, int level = 2) {
  detail::check_flat_args(c, n, q, q);
  auto L = make_w1_layout(c, q, q);
  const int d = doubling(c);
  HalfInt e = HalfInt::from_rational(n + d * q, d);
  const double tp = 1.0 / d;
  W1Integrand G = [&](const SuperMatrix& Q) {
    cplx s = tp * (Q.y.numeric().trace() - Q.x.numeric().trace());
    return sdet_power(Q, e) * GrassmannElement(Q.context(), std::exp(s));
  };
  if (!eigen_quadrature_available(c, q, q)) throw std::invalid_argument("localization constant needs N <= 2 in both sectors");
  auto r = w1_quadrature(L, G, level);
  return {r.value, r.error, static_cast<long>(r.nodes), "eigen-quadrature"};
}

/// The expected value (2 pi)^{(1+|m|) q^2}.
inline double localization_expected(SymmetryClass c, int q) {
  return std::pow(2 * std::numbers::pi, (1 + std::abs(class_m(c))) * q * q);
}

enum class WardKind { D, Dtilde };

struct WardResult {
  cplx value;
  double error = 0;
  double scale = 0;  // quadrature sum of |integrand|
};

/// Bosonized Ward identity for class GL: int DQ SDet^n(Q) sum_{ab} (D_{ab} G_{ab})(Q) = 0.
/// D_{ab} is the odd derivation induced on Q by Z -> Z + zeta E (kind D, E = e_b e_a^t,
/// G_{ab} = tau_{ba} F) or by Zt -> Zt + Et zetat, zeta -> zeta - Z Et (kind Dtilde,
/// Et = e_a e_b^t, G_{ab} = sigma_{ab} F). The contraction over (a, b) keeps the
/// integrand a class function, so the eigenvalue quadrature applies.
inline WardResult ward_identity(const expr::Expr& F, int n, int p, int q, WardKind kind, int level = 2) {
  const auto c = SymmetryClass::GL;
  detail::check_flat_args(c, n, p, q);
  check_p_le_nprime(c, n, p);
  if (p < 1 || q < 1) throw std::invalid_argument("ward identity needs p, q >= 1");
  expr::typecheck(F);
  auto L = make_w1_layout(c, p, q, 1);
  const int eps = L.odd_count();
  W1Integrand G = [&](const SuperMatrix& Q) {
    const auto& ctx = Q.context();
    auto ep = GrassmannElement::generator(ctx, eps);
    GrassmannElement sum(ctx);
    for (int a = 0; a < p; ++a)
      for (int b = 0; b < q; ++b) {
        SuperMatrix S = Q;
        GrassmannElement odd(ctx);
        if (kind == WardKind::D) {
          MatC E = MatC::Zero(q, p);
          E(b, a) = 1.0;
          S.x = Q.x + ep * (Q.sigma * E);
          S.tau = Q.tau + ep * (E * Q.x - Q.y * E);
          S.y = Q.y + ep * (E * Q.sigma);
          odd = S.tau(b, a);
        } else {
          MatC Et = MatC::Zero(p, q);
          Et(a, b) = 1.0;
          S.x = Q.x + ep * (Et * Q.tau);
          S.sigma = Q.sigma + ep * (Et * Q.y - Q.x * Et);
          S.y = Q.y + ep * (Q.tau * Et);
          odd = S.sigma(a, b);
        }
        sum += odd * expr::eval(F, S);
      }
    return sdet_power(Q, HalfInt{2 * n}) * sum;
  };
  auto r = w1_quadrature(L, G, level, uint64_t{1} << eps);
  double pref = boson_prefactor(c, n, p, q);
  return {pref * r.value, pref * r.error, pref * r.abs_sum};
}

}  // namespace sbos

#endif
