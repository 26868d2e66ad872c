#include <gtest/gtest.h>

#include "sbos/geometry.hpp"

using namespace sbos;

namespace {

const SymmetryClass kClasses[] = {SymmetryClass::GL, SymmetryClass::O, SymmetryClass::Sp};

double lhs_gaussian_3_2(SymmetryClass c, int p, int n) {
  return std::pow(2 * std::numbers::pi, p * n) * std::pow(2.0, p * class_m(c)) / vol_ratio(c, n, doubling(c) * p);
}

}  // namespace

TEST(Geometry, EigenStructureDimensions) {
  for (int r : {1, 2}) {
    EXPECT_EQ(domain_dim(SymmetryClass::GL, Sector::Noncompact, r), r * r);
    EXPECT_EQ(domain_dim(SymmetryClass::GL, Sector::Compact, r), r * r);
    EXPECT_EQ(domain_dim(SymmetryClass::O, Sector::Noncompact, r), r * (2 * r + 1));
    EXPECT_EQ(domain_dim(SymmetryClass::Sp, Sector::Noncompact, r), r * (2 * r - 1));
    EXPECT_EQ(domain_dim(SymmetryClass::O, Sector::Compact, r), r * (2 * r - 1));
    EXPECT_EQ(domain_dim(SymmetryClass::Sp, Sector::Compact, r), r * (2 * r + 1));
  }
}

TEST(Geometry, RepresentativesLieInDomain) {
  for (auto c : kClasses)
    for (auto s : {Sector::Noncompact, Sector::Compact})
      for (int r : {1, 2}) {
        auto e = eigen_structure(c, s, r);
        std::vector<cplx> ev;
        for (int i = 0; i < e.N; ++i)
          ev.push_back(s == Sector::Noncompact ? cplx(0.5 + i) : std::polar(1.0, 0.3 + 1.1 * i));
        MatC x = representative(e, ev);
        EXPECT_TRUE(in_domain(e, x)) << to_string(c) << to_string(s) << r;
        // spectrum is ev with multiplicity mult
        Eigen::ComplexEigenSolver<MatC> es(x);
        cplx prod = 1, want = 1;
        for (int i = 0; i < x.rows(); ++i) prod *= es.eigenvalues()(i);
        for (auto v : ev) want *= std::pow(v, e.mult);
        EXPECT_NEAR(std::abs(prod - want), 0, 1e-12);
      }
}

TEST(Geometry, GLRankOneGammaIntegrals) {
  auto e = eigen_structure(SymmetryClass::GL, Sector::Noncompact, 1);
  for (int n = 1; n <= 6; ++n) {
    auto r = integrate_class_function(e, [&](const MatC& x) { return std::exp(-x(0, 0)) * std::pow(x(0, 0), n); });
    EXPECT_NEAR(r.value.real(), std::tgamma(n), 1e-10 * std::tgamma(n)) << n;
  }
  MatC x(1, 1);
  x << 2.5;
  EXPECT_DOUBLE_EQ(density_D0(SymmetryClass::GL, 1, x), 1 / 2.5);
  x << 1.0;
  EXPECT_DOUBLE_EQ(density_D0(SymmetryClass::GL, 1, x), 1.0);
  x << -1.0;
  EXPECT_THROW(density_D0(SymmetryClass::GL, 1, x), std::domain_error);
}

// int e^{-Tr' x} Det^{n'}(x) d mu = (2 pi)^{pn} 2^{pm} vol(K_{n,p}) / vol(K_n)
TEST(Geometry, GaussianIntegralIdentityAllClasses) {
  for (auto c : kClasses)
    for (int p : {1, 2}) {
      auto e = eigen_structure(c, Sector::Noncompact, p);
      if (e.N > 2) continue;
      int d = doubling(c);
      for (int n = d * p + 1; n <= d * p + 4; ++n) {
        if (c == SymmetryClass::Sp && n % 2) continue;
        double np = n_prime(c, n);
        auto r = integrate_class_function(
            e, [&](const MatC& x) { return std::exp(-x.trace() / double(d)) * std::pow(x.determinant(), np); }, 3);
        double want = lhs_gaussian_3_2(c, p, n);
        EXPECT_NEAR(r.value.real() / want, 1.0, 1e-9) << to_string(c) << " p=" << p << " n=" << n;
      }
    }
}

TEST(Geometry, VolumesMatchCircularEnsembleAndAnchors) {
  const double pi = std::numbers::pi;
  EXPECT_DOUBLE_EQ(vol_K(SymmetryClass::GL, 1), 2 * pi);
  EXPECT_NEAR(vol_K(SymmetryClass::O, 2), 2 * (2 * pi), 1e-12);  // O_2 = two copies of SO_2
  EXPECT_NEAR(vol_K(SymmetryClass::O, 1), 2.0, 1e-15);
  EXPECT_NEAR(vol_K(SymmetryClass::Sp, 2), 2 * pi * pi, 1e-12);  // unit S^3
  EXPECT_NEAR(vol_K(SymmetryClass::O, 3), 16 * pi * pi, 1e-10);  // two copies of SO_3 = RP^3(2)
  EXPECT_EQ(vol_ratio(SymmetryClass::GL, 5, 0), 1.0);
  for (int n = 1; n <= 6; ++n) {
    EXPECT_NEAR(vol_ratio(SymmetryClass::GL, n, 1), std::pow(2 * pi, n) / std::tgamma(n), 1e-9 * std::pow(2 * pi, n));
    double circ = compact_volume(eigen_structure(SymmetryClass::GL, Sector::Compact, n));
    EXPECT_NEAR(circ / vol_K(SymmetryClass::GL, n), 1.0, 1e-12);
  }
  EXPECT_THROW(vol_ratio(SymmetryClass::GL, 2, 3), std::invalid_argument);
}

TEST(Geometry, GaussianLimitDecaysLikeInverseT) {
  for (auto c : kClasses)
    for (auto s : {Sector::Noncompact, Sector::Compact})
      for (int r : {1, 2}) {
        auto e = eigen_structure(c, s, r);
        double d2 = std::abs(gaussian_limit_check(e, 1e2) - 1.0);
        double d4 = std::abs(gaussian_limit_check(e, 1e4) - 1.0);
        double slope = std::log10(d4 / d2) / 2;
        EXPECT_NEAR(slope, -1.0, 0.2) << to_string(c) << to_string(s) << r;
        EXPECT_LT(d4, 5e-3);
      }
}

TEST(Geometry, CompactSamplerSymmetries) {
  Rng rng(11);
  for (auto c : kClasses)
    for (int q : {1, 2}) {
      auto e = eigen_structure(c, Sector::Compact, q);
      for (int k = 0; k < 20; ++k) {
        MatC y = sample_D1(c, q, rng);
        EXPECT_LT((y.adjoint() * y - MatC::Identity(y.rows(), y.cols())).norm(), 1e-12);
        EXPECT_TRUE(in_domain(e, y)) << to_string(c) << q;
      }
    }
  // O class, q = 1: the scalar circle
  for (int k = 0; k < 10; ++k) {
    MatC y = sample_D1(SymmetryClass::O, 1, rng);
    EXPECT_LT(std::abs(y(0, 1)) + std::abs(y(1, 0)) + std::abs(y(0, 0) - y(1, 1)), 1e-12);
  }
  cplx mean = 0;
  const int N = 20000;
  for (int k = 0; k < N; ++k) mean += sample_D1(SymmetryClass::GL, 1, rng)(0, 0);
  EXPECT_LT(std::abs(mean / double(N)), 4 / std::sqrt(double(N)));
}

TEST(Geometry, CompactSamplerReproducesQuadrature) {
  // E_Haar[f] * vol(D1) = eigenvalue quadrature of f
  Rng rng(21);
  for (auto c : kClasses) {
    auto e = eigen_structure(c, Sector::Compact, 1);
    auto f = [](const MatC& y) { return std::exp(y.trace()).real(); };
    double quadv = integrate_class_function(e, [&](const MatC& y) { return cplx(f(y)); }).value.real();
    const int N = 40000;
    double s = 0, s2 = 0;
    for (int k = 0; k < N; ++k) {
      double v = f(sample_D1(c, 1, rng));
      s += v, s2 += v * v;
    }
    double mean = s / N, se = std::sqrt((s2 / N - mean * mean) / N);
    double vol = compact_volume(e);
    EXPECT_NEAR(mean * vol, quadv, 4 * se * vol) << to_string(c);
  }
}

TEST(Geometry, LogNormalSamplerGammaMoments) {
  Rng rng(3);
  Proposal prop{Proposal::LogNormal, 0, 0.8, 1.0};
  for (int n : {1, 3, 5}) {
    const int N = 100000;
    double s = 0, s2 = 0;
    for (int k = 0; k < N; ++k) {
      auto smp = sample_D0(SymmetryClass::GL, 1, rng, prop);
      ASSERT_GT(smp.weight, 0);
      ASSERT_TRUE(std::isfinite(smp.weight));
      double x = smp.x(0, 0).real();
      double v = smp.weight * std::exp(-x) * std::pow(x, n);
      s += v, s2 += v * v;
    }
    double mean = s / N, se = std::sqrt((s2 / N - mean * mean) / N);
    EXPECT_NEAR(mean, std::tgamma(n), 4 * se) << n;
  }
}

TEST(Geometry, WishartSamplerMatchesEigenvalueQuadrature) {
  Rng rng(5);
  struct Case {
    SymmetryClass c;
    int p;
  };
  for (auto [c, p] : {Case{SymmetryClass::GL, 2}, Case{SymmetryClass::O, 1}, Case{SymmetryClass::Sp, 1}}) {
    auto e = eigen_structure(c, Sector::Noncompact, p);
    int d = doubling(c);
    // Det power just above the proposal's, so the weights vary but stay bounded
    double ex = (d * p + 2.0) / d + 0.5;
    auto f = [&](const MatC& x) { return std::exp(-0.8 * x.trace().real() / d) * std::pow(x.determinant().real(), ex); };
    double quadv = integrate_class_function(e, [&](const MatC& x) { return cplx(f(x)); }, 3).value.real();
    const int N = 100000;
    double s = 0, s2 = 0;
    Proposal prop{Proposal::Wishart, d * p + 2, 0.8, 0};
    for (int k = 0; k < N; ++k) {
      auto smp = sample_D0(c, p, rng, prop);
      ASSERT_TRUE(in_domain(e, smp.x, 1e-9));
      double v = smp.weight * f(smp.x);
      s += v, s2 += v * v;
    }
    double mean = s / N, se = std::sqrt((s2 / N - mean * mean) / N);
    EXPECT_NEAR(mean, quadv, 4 * se) << to_string(c);
    EXPECT_LT(se / mean, 0.05);
  }
}

TEST(Geometry, NoncompactMeasureInvariance) {
  // int f(g x g^dagger) d mu = int f(x) d mu for g in G_p (GL_2(C))
  Rng rng(8);
  MatC g = MatC::Identity(2, 2) + 0.2 * complex_gaussian(2, 2, rng);
  auto f = [](const MatC& x) { return std::exp(-x.trace().real()) * std::pow(x.determinant().real(), 3.0); };
  const int N = 200000;
  double a = 0, a2 = 0, b = 0, b2 = 0;
  Proposal prop{Proposal::Wishart, 5, 0.7, 0};
  for (int k = 0; k < N; ++k) {
    auto smp = sample_D0(SymmetryClass::GL, 2, rng, prop);
    double va = smp.weight * f(smp.x);
    double vb = smp.weight * f(g * smp.x * g.adjoint());
    a += va, a2 += va * va, b += vb, b2 += vb * vb;
  }
  double ma = a / N, mb = b / N;
  double sa = std::sqrt((a2 / N - ma * ma) / N), sb = std::sqrt((b2 / N - mb * mb) / N);
  EXPECT_NEAR(mb, ma, 4 * std::hypot(sa, sb));
  EXPECT_GT(std::abs(std::norm(g.determinant()) - 1), 0.05);
}
