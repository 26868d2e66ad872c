#include <gtest/gtest.h>

#include "sbos/integrate.hpp"

using namespace sbos;

namespace {

const char* kGLGauss = "exp(-1.2*tr(x) + 0.9*tr(y) - 0.3*tr(sigma*tau))";

// GL, p = q = 1: the fermion Gaussian integrates to det(b + c z z^dagger) = b^{n-1} (b + c |z|^2),
// and the remaining Gaussian moments give b^{n-1} (a b + c n) / a^{n+1}.
double gl_rank_one_oracle(int n, double a = 1.2, double b = 0.9, double c = 0.3) {
  return std::pow(b, n - 1) * (a * b + c * n) / std::pow(a, n + 1);
}

MCConfig mc(long samples, uint64_t seed = 7) {
  MCConfig c;
  c.samples = samples;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Integrate, MomentAccumulator) {
  MomentAccumulator a, b;
  for (int k = 1; k <= 4; ++k) a.add(cplx(k, -k));
  for (int k = 5; k <= 8; ++k) b.add(cplx(k, -k));
  a.merge(b);
  EXPECT_EQ(a.count(), 8);
  EXPECT_NEAR(std::abs(a.mean() - cplx(4.5, -4.5)), 0, 1e-14);
  // sample variance of 1..8 is 6, doubled for the two components
  EXPECT_NEAR(a.std_error(), std::sqrt(12.0 / 8), 1e-12);
}

TEST(Integrate, SubstreamsAreReproducible) {
  auto F = expr::parse(kGLGauss);
  auto r1 = flat_superintegral(F, SymmetryClass::GL, 1, 1, 1, mc(4000, 3));
  auto r2 = flat_superintegral(F, SymmetryClass::GL, 1, 1, 1, mc(4000, 3));
  auto r3 = flat_superintegral(F, SymmetryClass::GL, 1, 1, 1, mc(4000, 4));
  EXPECT_EQ(r1.value, r2.value);
  EXPECT_EQ(r1.std_error, r2.std_error);
  EXPECT_NE(r1.value, r3.value);
}

TEST(Integrate, FlatSideMatchesClosedForm) {
  auto F = expr::parse(kGLGauss);
  for (int n : {1, 2, 3}) {
    auto r = flat_superintegral(F, SymmetryClass::GL, n, 1, 1, mc(100000));
    EXPECT_NEAR(r.value.real(), gl_rank_one_oracle(n), 4 * r.std_error) << n;
    EXPECT_LT(r.std_error / gl_rank_one_oracle(n), 2e-3);
  }
}

TEST(Integrate, BosonizedSideMatchesClosedForm) {
  auto F = expr::parse(kGLGauss);
  for (int n : {1, 2, 3, 4}) {
    auto r = boson_rhs(F, SymmetryClass::GL, n, 1, 1, MCConfig{});
    EXPECT_NEAR(r.value.real(), gl_rank_one_oracle(n), 1e-8) << n;
    EXPECT_NEAR(r.value.imag(), 0, 1e-12);
  }
}

TEST(Integrate, BosonizedMonteCarloAgreesWithQuadrature) {
  auto F = expr::parse(kGLGauss);
  auto L = make_w1_layout(SymmetryClass::GL, 1, 1);
  W1Integrand G = [&](const SuperMatrix& Q) { return sdet_power(Q, HalfInt{4}) * expr::eval(F, Q); };
  auto r = w1_monte_carlo(L, G, 2, mc(100000));
  double want = gl_rank_one_oracle(2) / boson_prefactor(SymmetryClass::GL, 2, 1, 1);
  EXPECT_NEAR(r.value.real(), want, 4 * r.std_error);
}

TEST(Integrate, SuperbosonizationSmallCases) {
  struct Case {
    SymmetryClass c;
    int n, p, q;
    const char* F;
  };
  const char* half = "exp(-0.6*tr(x) + 0.45*tr(y) - 0.15*tr(sigma*tau))";
  for (auto [c, n, p, q, f] : {Case{SymmetryClass::GL, 2, 1, 2, kGLGauss}, Case{SymmetryClass::O, 2, 1, 1, half},
                               Case{SymmetryClass::Sp, 2, 1, 1, half}}) {
    auto F = expr::parse(f);
    auto a = flat_superintegral(F, c, n, p, q, mc(60000));
    auto b = boson_rhs(F, c, n, p, q, MCConfig{});
    double s = std::hypot(a.std_error, b.std_error);
    EXPECT_NEAR(a.value.real(), b.value.real(), 4 * s) << to_string(c);
    EXPECT_LT(s / std::abs(b.value), 0.01);
  }
}

TEST(Integrate, BosonizedIntegrandIsAClassFunction) {
  // Omega_{W1}[J SDet^n F] at (k x k^{-1}, l y l^{-1}) equals its value at (x, y)
  Rng rng(12);
  auto F = expr::parse("exp(-tr(x) + tr(y))*(1 + tr(sigma*tau)*tr(x) + tr(sigma*y*tau))");
  auto L = make_w1_layout(SymmetryClass::GL, 2, 2);
  auto form = omega_w1_form(L);
  auto g = [&](const MatC& x, const MatC& y) {
    auto Q = w1_point(L, x, y);
    return berezin(form, w1_jacobian(Q) * sdet_power(Q, HalfInt{6}) * expr::eval(F, Q));
  };
  MatC x = MatC::Zero(2, 2), y = MatC::Zero(2, 2);
  x.diagonal() << 0.7, 1.9;
  y.diagonal() << std::polar(1.0, 0.4), std::polar(1.0, -1.3);
  cplx g0 = g(x, y);
  ASSERT_GT(std::abs(g0), 1e-3);
  for (int k = 0; k < 3; ++k) {
    MatC u = haar_unitary(2, rng), v = haar_unitary(2, rng);
    EXPECT_NEAR(std::abs(g(u * x * u.adjoint(), v * y * v.adjoint()) - g0), 0, 1e-12 * std::abs(g0));
  }
}

TEST(Integrate, RejectsPAboveNPrime) {
  auto F = expr::parse(kGLGauss);
  EXPECT_THROW(boson_rhs(F, SymmetryClass::GL, 1, 2, 1, MCConfig{}), std::invalid_argument);
  EXPECT_THROW(boson_rhs(F, SymmetryClass::O, 2, 2, 1, MCConfig{}), std::invalid_argument);
  try {
    boson_rhs(F, SymmetryClass::GL, 1, 2, 1, MCConfig{});
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("p <= n'"), std::string::npos);
  }
}

TEST(Integrate, BosonBosonSector) {
  const double pi = std::numbers::pi;
  struct Case {
    SymmetryClass c;
    int n, p;
  };
  for (auto [c, n, p] : {Case{SymmetryClass::GL, 3, 1}, Case{SymmetryClass::GL, 3, 2}, Case{SymmetryClass::O, 3, 1},
                         Case{SymmetryClass::Sp, 4, 1}}) {
    auto F0 = expr::parse(c == SymmetryClass::GL ? "exp(-tr(x))" : "exp(-tr(x)/2)");
    auto r = bb_sector_check(F0, c, n, p, mc(20000));
    double want = std::pow(pi, p * n);  // Lebesgue Gaussian on C^{n x p}
    EXPECT_NEAR(r.rhs.value.real() / want, 1, 1e-9) << to_string(c) << n << p;
    EXPECT_NEAR(r.lhs.value.real() / want, 1, 4 * r.lhs.std_error / want);
  }
  // a non-Gaussian F0 against the Monte Carlo left side
  auto r = bb_sector_check(expr::parse("exp(-tr(x))*(1 + tr(x)^2)"), SymmetryClass::GL, 2, 1, mc(100000));
  EXPECT_NEAR(r.lhs.value.real(), r.rhs.value.real(), 4 * r.lhs.std_error);
  // GL, p = 1: int_0^inf x^n e^{-x} dx / x = Gamma(n)
  double pref = std::pow(2.0, -3.0) * vol_ratio(SymmetryClass::GL, 3, 1);
  auto g = bb_sector_check(expr::parse("exp(-tr(x))"), SymmetryClass::GL, 3, 1, mc(100));
  EXPECT_NEAR(g.rhs.value.real() / pref, std::tgamma(3.0), 1e-9);
}

TEST(Integrate, FermionFermionSector) {
  for (int n = 1; n <= 6; ++n) {
    auto r = ff_sector_check(expr::parse("exp(tr(y))"), SymmetryClass::GL, n, 1);
    EXPECT_NEAR(std::abs(r.lhs.value - 1.0), 0, 1e-14);
    EXPECT_NEAR(std::abs(r.rhs.value - r.lhs.value), 0, 1e-10) << n;
  }
  for (int n : {2, 4, 6}) {
    auto r = ff_sector_check(expr::parse("exp(tr(y)/2)"), SymmetryClass::O, n, 1);
    EXPECT_NEAR(std::abs(r.rhs.value - r.lhs.value), 0, 1e-8) << n;
  }
  // q = 2 and a polynomial F1
  auto r = ff_sector_check(expr::parse("exp(tr(y)) + tr(y*y)^2"), SymmetryClass::GL, 2, 2);
  EXPECT_NEAR(std::abs(r.rhs.value - r.lhs.value), 0, 1e-9);
  auto s = ff_sector_check(expr::parse("exp(tr(y)/2)"), SymmetryClass::Sp, 2, 1);
  EXPECT_NEAR(std::abs(s.rhs.value - s.lhs.value), 0, 1e-9);
}

TEST(Integrate, ShiftLemma) {
  Rng rng(4);
  std::normal_distribution<double> nd;
  for (auto c : {SymmetryClass::GL, SymmetryClass::O})
    for (int pairs : {1, 2}) {
      auto ctx = make_context(2 * pairs, "t");
      GrassmannElement omega(ctx);
      for (int k = 0; k < pairs; ++k)
        omega += GrassmannElement::generator(ctx, 2 * k, cplx(nd(rng), nd(rng))) *
                 GrassmannElement::generator(ctx, 2 * k + 1);
      int qe = doubling(c);
      GMatrix w(ctx, qe, qe);
      for (int i = 0; i < qe; ++i) w(i, i) = omega;
      for (const char* f : {"tr(y)^3", "tr(y)^-2", "exp(tr(y))", "exp(tr(y))*tr(y)"}) {
        auto r = shift_lemma_check(expr::parse(f), c, 1, w);
        double diff = (r.lhs - r.rhs).max_abs();
        EXPECT_LT(diff, 1e-8) << to_string(c) << " " << f << " pairs=" << pairs;
        EXPECT_LT(r.error, 1e-8);
      }
    }
}

TEST(Integrate, DivergenceMatchesFiniteDifference) {
  for (auto c : {SymmetryClass::GL, SymmetryClass::O})
    for (double th : {0.0, 0.9, 2.5}) {
      auto [div, want] = divergence_check(c, cplx(0.4, -0.7), th);
      EXPECT_NEAR(std::abs(div - want), 0, 1e-6);
    }
}

TEST(Integrate, LocalizationConstant) {
  auto r = localization_constant(SymmetryClass::GL, 2, 1);
  EXPECT_NEAR(r.value.real(), 2 * std::numbers::pi, 1e-9);
  for (auto [c, n] : {std::pair{SymmetryClass::GL, 3}, {SymmetryClass::O, 3}, {SymmetryClass::Sp, 4}}) {
    auto s = localization_constant(c, n, 1);
    EXPECT_NEAR(s.value.real() / localization_expected(c, 1), 1, 1e-8) << to_string(c);
  }
}

TEST(Integrate, WardIdentitiesVanish) {
  auto F = expr::parse(kGLGauss);
  for (auto [n, p, q] : {std::tuple{2, 1, 1}, {3, 2, 1}, {2, 1, 2}})
    for (auto k : {WardKind::D, WardKind::Dtilde}) {
      auto w = ward_identity(F, n, p, q, k);
      EXPECT_GT(w.scale, 0.1);
      EXPECT_LT(std::abs(w.value), 3 * w.error + 1e-12 * w.scale) << n << p << q;
    }
}

TEST(Integrate, WardIdentityDetectsWrongDerivation) {
  // flipping the sign of the y E term of Delta tau no longer gives a derivation of the pullback
  auto F = expr::parse(kGLGauss);
  auto L = make_w1_layout(SymmetryClass::GL, 1, 1, 1);
  const int eps = L.odd_count();
  W1Integrand G = [&](const SuperMatrix& Q) {
    auto ep = GrassmannElement::generator(Q.context(), eps);
    MatC E = MatC::Ones(1, 1);
    SuperMatrix S = Q;
    S.x = Q.x + ep * (Q.sigma * E);
    S.tau = Q.tau + ep * (E * Q.x + Q.y * E);
    S.y = Q.y + ep * (E * Q.sigma);
    return sdet_power(Q, HalfInt{4}) * S.tau(0, 0) * expr::eval(F, S);
  };
  auto r = w1_quadrature(L, G, 2, uint64_t{1} << eps);
  EXPECT_GT(std::abs(r.value), 1e-3 * r.abs_sum);
}
