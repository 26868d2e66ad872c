#ifndef SBOS_INVARIANTS_HPP
#define SBOS_INVARIANTS_HPP

#include "exprlang.hpp"
#include "supermatrix.hpp"

namespace sbos {

/// Symmetric (O) or skew (Sp) bilinear form on C^n; identity for GL.
struct BetaTensor {
  SymmetryClass cls = SymmetryClass::GL;
  MatC beta, beta_inv;

  static BetaTensor make(SymmetryClass c, int n) {
    BetaTensor b;
    b.cls = c;
    if (c == SymmetryClass::Sp) {
      if (n % 2) throw std::invalid_argument("symplectic class needs even n");
      b.beta = t_skew(n / 2);
    } else {
      b.beta = MatC::Identity(n, n);
    }
    b.beta_inv = b.beta.inverse();
    return b;
  }
};

/// Point of V = Hom(C^p, C^n) + odd part: Z (n x p), Zt (p x n), zeta (n x q), zetat (q x n).
struct FlatPoint {
  MatC Z, Zt;
  GMatrix zeta, zetat;

  /// Real slice Zt = Z^dagger with the generators of the layout.
  static FlatPoint at(const FlatLayout& L, const MatC& Z) {
    FlatPoint pt;
    pt.Z = Z;
    pt.Zt = Z.adjoint();
    pt.zeta = GMatrix(L.ctx, L.n, L.q);
    pt.zetat = GMatrix(L.ctx, L.q, L.n);
    for (int e = 0; e < L.q; ++e)
      for (int j = 0; j < L.n; ++j) {
        pt.zeta(j, e) = GrassmannElement::generator(L.ctx, L.zeta(j, e));
        pt.zetat(e, j) = GrassmannElement::generator(L.ctx, L.zetat(e, j));
      }
    return pt;
  }
};

/// The supermatrix of quadratic invariants. For O and Sp the rows are
/// (Zt, Z^t, zetat, -zeta^t) against columns (Z, Zt^t, zeta, zetat^t) with
/// beta inserted where two untilded or two tilded factors meet.
inline SuperMatrix invariant_supermatrix(const FlatPoint& pt, const BetaTensor& b, int p, int q) {
  const ContextPtr& ctx = pt.zeta.context() ? pt.zeta.context() : pt.zetat.context();
  const int n = static_cast<int>(pt.Z.rows());
  if (pt.Z.cols() != p || pt.Zt.rows() != p || pt.zeta.cols() != q || pt.zetat.rows() != q)
    throw std::invalid_argument("flat point shape does not match (p, q)");
  GMatrix Z = GMatrix::from_numeric(ctx, pt.Z), Zt = GMatrix::from_numeric(ctx, pt.Zt);
  SuperMatrix Q;
  Q.cls = b.cls;
  Q.p = p;
  Q.q = q;
  if (b.cls == SymmetryClass::GL) {
    Q.x = Zt * Z;
    Q.sigma = Zt * pt.zeta;
    Q.tau = pt.zetat * Z;
    Q.y = pt.zetat * pt.zeta;
    return Q;
  }
  if (b.beta.rows() != n) throw std::invalid_argument("beta tensor size mismatch");
  GMatrix be = GMatrix::from_numeric(ctx, b.beta), bi = GMatrix::from_numeric(ctx, b.beta_inv);
  GMatrix Zt_t = Zt.transpose(), Z_t = Z.transpose(), zeta_t = pt.zeta.transpose(), zetat_t = pt.zetat.transpose();
  GMatrix full(ctx, 2 * p + 2 * q, 2 * p + 2 * q);
  auto put = [&](int r0, int c0, const GMatrix& m) {
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) full(r0 + i, c0 + j) = m(i, j);
  };
  const int P = p, P2 = 2 * p, Qo = 2 * p + q;

  put(0, 0, Zt * Z);
  put(0, P, Zt * bi * Zt_t);
  put(0, P2, Zt * pt.zeta);
  put(0, Qo, Zt * bi * zetat_t);
  put(P, 0, Z_t * be * Z);
  put(P, P, Z_t * Zt_t);
  put(P, P2, Z_t * be * pt.zeta);
  put(P, Qo, Z_t * zetat_t);
  put(P2, 0, pt.zetat * Z);
  put(P2, P, pt.zetat * bi * Zt_t);
  put(P2, P2, pt.zetat * pt.zeta);
  put(P2, Qo, pt.zetat * bi * zetat_t);
  put(Qo, 0, -1.0 * (zeta_t * be * Z));
  put(Qo, P, -1.0 * (zeta_t * Zt_t));
  put(Qo, P2, -1.0 * (zeta_t * be * pt.zeta));
  put(Qo, Qo, -1.0 * (zeta_t * zetat_t));
  return SuperMatrix::from_full(b.cls, p, q, full);
}

/// f = F o Q on the flat space.
inline GrassmannElement pullback(const expr::Expr& F, const FlatPoint& pt, const BetaTensor& b, int p, int q) {
  return expr::eval(F, invariant_supermatrix(pt, b, p, q));
}

}  // namespace sbos

#endif
