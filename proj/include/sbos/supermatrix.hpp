#ifndef SBOS_SUPERMATRIX_HPP
#define SBOS_SUPERMATRIX_HPP

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

#include "grassmann.hpp"

namespace sbos {

enum class SymmetryClass { GL, O, Sp };

inline std::string to_string(SymmetryClass c) {
  switch (c) {
    case SymmetryClass::GL: return "gl";
    case SymmetryClass::O: return "o";
    case SymmetryClass::Sp: return "sp";
  }
  return "?";
}

inline SymmetryClass parse_class(const std::string& s) {
  if (s == "gl" || s == "GL") return SymmetryClass::GL;
  if (s == "o" || s == "O") return SymmetryClass::O;
  if (s == "sp" || s == "Sp" || s == "SP") return SymmetryClass::Sp;
  throw std::invalid_argument("unknown symmetry class: " + s + " (expected gl, o or sp)");
}

/// m = 0, 1, -1 for GL, O, Sp.
inline int class_m(SymmetryClass c) { return c == SymmetryClass::GL ? 0 : (c == SymmetryClass::O ? 1 : -1); }
inline int doubling(SymmetryClass c) { return c == SymmetryClass::GL ? 1 : 2; }
/// n' = n for GL, n/2 otherwise.
inline double n_prime(SymmetryClass c, int n) { return c == SymmetryClass::GL ? n : 0.5 * n; }

using MatC = Eigen::MatrixXcd;

/// Dense matrix with Grassmann-valued entries.
class GMatrix {
 public:
  GMatrix() = default;
  GMatrix(ContextPtr ctx, int rows, int cols)
      : ctx_(std::move(ctx)), rows_(rows), cols_(cols), data_(std::size_t(rows) * cols, GrassmannElement(ctx_)) {}

  static GMatrix from_numeric(const ContextPtr& ctx, const MatC& m) {
    GMatrix r(ctx, int(m.rows()), int(m.cols()));
    for (int i = 0; i < r.rows_; ++i)
      for (int j = 0; j < r.cols_; ++j) r(i, j) = GrassmannElement(ctx, m(i, j));
    return r;
  }
  static GMatrix identity(const ContextPtr& ctx, int n) { return from_numeric(ctx, MatC::Identity(n, n)); }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const ContextPtr& context() const { return ctx_; }

  GrassmannElement& operator()(int i, int j) { return data_[std::size_t(i) * cols_ + j]; }
  const GrassmannElement& operator()(int i, int j) const { return data_[std::size_t(i) * cols_ + j]; }

  MatC numeric() const {
    MatC m(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) m(i, j) = (*this)(i, j).numeric_part();
    return m;
  }

  GMatrix transpose() const {
    GMatrix r(ctx_, cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) r(j, i) = (*this)(i, j);
    return r;
  }

  GMatrix block(int r0, int c0, int nr, int nc) const {
    GMatrix r(ctx_, nr, nc);
    for (int i = 0; i < nr; ++i)
      for (int j = 0; j < nc; ++j) r(i, j) = (*this)(r0 + i, c0 + j);
    return r;
  }

  GrassmannElement trace() const {
    if (rows_ != cols_) throw std::invalid_argument("trace of a non-square matrix");
    GrassmannElement t(ctx_);
    for (int i = 0; i < rows_; ++i) t += (*this)(i, i);
    return t;
  }

  bool is_even() const {
    return std::all_of(data_.begin(), data_.end(), [](const GrassmannElement& e) { return e.is_even(); });
  }

  double max_abs() const {
    double m = 0;
    for (const auto& e : data_) m = std::max(m, e.max_abs());
    return m;
  }

  friend GMatrix operator+(const GMatrix& a, const GMatrix& b) {
    check_shape(a, b);
    GMatrix r = a;
    for (std::size_t k = 0; k < r.data_.size(); ++k) r.data_[k] += b.data_[k];
    return r;
  }
  friend GMatrix operator-(const GMatrix& a, const GMatrix& b) {
    check_shape(a, b);
    GMatrix r = a;
    for (std::size_t k = 0; k < r.data_.size(); ++k) r.data_[k] -= b.data_[k];
    return r;
  }
  GMatrix operator-() const {
    GMatrix r = *this;
    for (auto& e : r.data_) e = -e;
    return r;
  }
  friend GMatrix operator*(const GMatrix& a, const GMatrix& b) {
    if (a.cols_ != b.rows_) throw std::invalid_argument("matrix shape mismatch in product");
    GMatrix r(a.ctx_, a.rows_, b.cols_);
    for (int i = 0; i < a.rows_; ++i)
      for (int j = 0; j < b.cols_; ++j) {
        GrassmannElement s(a.ctx_);
        for (int k = 0; k < a.cols_; ++k) {
          const auto& x = a(i, k);
          const auto& y = b(k, j);
          if (x.is_zero() || y.is_zero()) continue;
          if (x.is_numeric())
            s += y * x.numeric_part();
          else if (y.is_numeric())
            s += x * y.numeric_part();
          else
            s += x * y;
        }
        r(i, j) = std::move(s);
      }
    return r;
  }
  friend GMatrix operator*(const GrassmannElement& c, const GMatrix& m) {
    GMatrix r = m;
    for (auto& e : r.data_) e = c * e;
    return r;
  }
  friend GMatrix operator*(const GMatrix& m, const GrassmannElement& c) {
    GMatrix r = m;
    for (auto& e : r.data_) e = e * c;
    return r;
  }
  friend GMatrix operator*(cplx c, GMatrix m) {
    for (auto& e : m.data_) e *= c;
    return m;
  }
  friend GMatrix operator*(const MatC& a, const GMatrix& b) { return GMatrix::from_numeric(b.ctx_, a) * b; }
  friend GMatrix operator*(const GMatrix& a, const MatC& b) { return a * GMatrix::from_numeric(a.ctx_, b); }

 private:
  static void check_shape(const GMatrix& a, const GMatrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw std::invalid_argument("matrix shape mismatch");
  }

  ContextPtr ctx_;
  int rows_ = 0, cols_ = 0;
  std::vector<GrassmannElement> data_;
};

/// Determinant of a square matrix of even elements (commuting entries), by
/// elimination with numeric-part pivoting.
inline GrassmannElement det_even(GMatrix a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("det of a non-square matrix");
  if (!a.is_even()) throw std::invalid_argument("det needs even entries");
  const int n = a.rows();
  GrassmannElement det(a.context(), 1.0);
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = -1;
    for (int i = k; i < n; ++i) {
      double v = std::abs(a(i, k).numeric_part());
      if (v > best) best = v, piv = i;
    }
    if (best == 0.0) {
      // nilpotent column: expand along it instead
      GrassmannElement sum(a.context());
      for (int i = k; i < n; ++i) {
        if (a(i, k).is_zero()) continue;
        GMatrix minor(a.context(), n - k - 1, n - k - 1);
        for (int r = k, rr = 0; r < n; ++r) {
          if (r == i) continue;
          for (int c = k + 1; c < n; ++c) minor(rr, c - k - 1) = a(r, c);
          ++rr;
        }
        GrassmannElement term = a(i, k) * det_even(minor);
        sum += ((i - k) % 2) ? -term : term;
      }
      return det * sum;
    }
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      det = -det;
    }
    det = det * a(k, k);
    GrassmannElement inv = ginv(a(k, k));
    for (int i = k + 1; i < n; ++i) {
      if (a(i, k).is_zero()) continue;
      GrassmannElement f = a(i, k) * inv;
      for (int j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
  return det;
}

/// Inverse of an even matrix with invertible numeric part: Neumann series in
/// the nilpotent part, which terminates.
inline GMatrix inv_even(const GMatrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("inverse of a non-square matrix");
  if (!a.is_even()) throw std::invalid_argument("inverse needs even entries");
  MatC a0 = a.numeric();
  Eigen::FullPivLU<MatC> lu(a0);
  lu.setThreshold(std::numeric_limits<double>::min());
  if (!lu.isInvertible()) throw std::domain_error("numeric part of the matrix is singular");
  MatC a0i = lu.inverse();
  const auto& ctx = a.context();
  GMatrix n = a - GMatrix::from_numeric(ctx, a0);
  GMatrix step = -1.0 * (a0i * n);
  GMatrix term = GMatrix::from_numeric(ctx, a0i);
  GMatrix sum = term;
  for (int k = 0; k <= ctx->size() / 2 + 1; ++k) {
    term = step * term;
    if (term.max_abs() == 0.0) break;
    sum = sum + term;
  }
  return sum;
}

/// Pfaffian of a skew matrix of even elements, Pf([[0,1],[-1,0]]) = 1.
inline GrassmannElement pfaffian_even(const GMatrix& a) {
  const int n = a.rows();
  if (n != a.cols() || n % 2) throw std::invalid_argument("pfaffian needs an even-dimensional square matrix");
  if (n == 0) return GrassmannElement(a.context(), 1.0);
  GrassmannElement r(a.context());
  for (int j = 1; j < n; ++j) {
    if (a(0, j).is_zero()) continue;
    GMatrix minor(a.context(), n - 2, n - 2);
    std::vector<int> keep;
    for (int k = 1; k < n; ++k)
      if (k != j) keep.push_back(k);
    for (int r1 = 0; r1 < n - 2; ++r1)
      for (int c1 = 0; c1 < n - 2; ++c1) minor(r1, c1) = a(keep[r1], keep[c1]);
    GrassmannElement t = a(0, j) * pfaffian_even(minor);
    r += (j % 2) ? t : -t;
  }
  return r;
}

/// Exponent restricted to integers and halves, stored as twice its value.
struct HalfInt {
  int twice = 0;
  static HalfInt from_rational(long a, long b) {
    if (b == 0) throw std::invalid_argument("zero denominator in exponent");
    if ((2 * a) % b != 0) throw std::invalid_argument("exponent must be an integer or half-integer");
    return {static_cast<int>(2 * a / b)};
  }
  static HalfInt from_double(double v) {
    double t = 2 * v;
    if (t != std::round(t)) throw std::invalid_argument("exponent must be an integer or half-integer");
    return {static_cast<int>(std::lround(t))};
  }
  bool integral() const { return twice % 2 == 0; }
  double value() const { return 0.5 * twice; }
};

inline MatC t_sym(int r) {
  MatC t = MatC::Zero(2 * r, 2 * r);
  t.topRightCorner(r, r) = MatC::Identity(r, r);
  t.bottomLeftCorner(r, r) = MatC::Identity(r, r);
  return t;
}

inline MatC t_skew(int r) {
  MatC t = MatC::Zero(2 * r, 2 * r);
  t.topRightCorner(r, r) = -MatC::Identity(r, r);
  t.bottomLeftCorner(r, r) = MatC::Identity(r, r);
  return t;
}

/// Which block carries the skew form: the fermion block for O, the boson block for Sp.
inline MatC boson_form(SymmetryClass c, int p) { return c == SymmetryClass::O ? t_sym(p) : t_skew(p); }
inline MatC fermion_form(SymmetryClass c, int q) { return c == SymmetryClass::O ? t_skew(q) : t_sym(q); }

/// Supermatrix with blocks x (boson-boson), sigma (boson-fermion),
/// tau (fermion-boson), y (fermion-fermion). For O and Sp the blocks are doubled.
struct SuperMatrix {
  SymmetryClass cls = SymmetryClass::GL;
  int p = 0, q = 0;
  GMatrix x, sigma, tau, y;

  int p_eff() const { return doubling(cls) * p; }
  int q_eff() const { return doubling(cls) * q; }
  const ContextPtr& context() const { return x.context() ? x.context() : y.context(); }

  GMatrix full() const {
    int a = p_eff(), b = q_eff();
    GMatrix r(context(), a + b, a + b);
    for (int i = 0; i < a; ++i)
      for (int j = 0; j < a; ++j) r(i, j) = x(i, j);
    for (int i = 0; i < a; ++i)
      for (int j = 0; j < b; ++j) r(i, a + j) = sigma(i, j);
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < a; ++j) r(a + i, j) = tau(i, j);
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < b; ++j) r(a + i, a + j) = y(i, j);
    return r;
  }

  static SuperMatrix from_full(SymmetryClass c, int p, int q, const GMatrix& m) {
    int a = doubling(c) * p, b = doubling(c) * q;
    if (m.rows() != a + b || m.cols() != a + b) throw std::invalid_argument("supermatrix shape mismatch");
    return {c, p, q, m.block(0, 0, a, a), m.block(0, a, a, b), m.block(a, 0, b, a), m.block(a, a, b, b)};
  }

  GrassmannElement str() const { return x.trace() - y.trace(); }
};

/// Det^e of an even square block. Half-integer powers use the Pfaffian when
/// the block lies in Sym_a (fermion block of class O), the principal branch
/// otherwise.
inline GrassmannElement det_power(const GMatrix& m, HalfInt e, const MatC* skew_form = nullptr) {
  if (m.rows() == 0) return GrassmannElement(m.context(), 1.0);
  if (!e.integral() && skew_form) {
    MatC finv = skew_form->inverse();
    GrassmannElement pf = pfaffian_even(m * finv);
    int k = e.twice;
    return k >= 0 ? power(pf, k) : power(ginv(pf), -k);
  }
  GrassmannElement d = det_even(m);
  if (e.integral()) {
    int k = e.twice / 2;
    return k >= 0 ? power(d, k) : power(ginv(d), -k);
  }
  cplx d0 = d.numeric_part();
  if (d0.imag() == 0.0 && d0.real() <= 0)
    throw std::domain_error("branch ambiguity: half-integer power of a determinant off the supported domain");
  return gpow(d, e.value());
}

inline const MatC* half_power_form(SymmetryClass c, int q, MatC& storage) {
  if (c != SymmetryClass::O) return nullptr;
  storage = t_skew(q);
  return &storage;
}

/// SDet^e = Det^e(x) / Det^e(y - tau x^{-1} sigma).
inline GrassmannElement sdet_power(const SuperMatrix& Q, HalfInt e) {
  const auto& ctx = Q.context();
  GrassmannElement num(ctx, 1.0);
  GMatrix yc = Q.y;
  if (Q.p_eff() > 0) {
    num = det_power(Q.x, e);
    if (Q.q_eff() > 0) yc = Q.y - Q.tau * inv_even(Q.x) * Q.sigma;
  }
  if (Q.q_eff() == 0) return num;
  MatC store;
  const MatC* form = half_power_form(Q.cls, Q.q, store);
  return num * det_power(yc, HalfInt{-e.twice}, form);
}

inline GrassmannElement sdet(const SuperMatrix& Q) { return sdet_power(Q, HalfInt{2}); }

/// Q^{st} = [[x^t, tau^t], [-sigma^t, y^t]].
inline SuperMatrix supertranspose(const SuperMatrix& Q) {
  return {Q.cls, Q.p, Q.q, Q.x.transpose(), Q.tau.transpose(), -Q.sigma.transpose(), Q.y.transpose()};
}

/// T_beta = diag(boson form, fermion form).
inline MatC t_beta(SymmetryClass c, int p, int q) {
  if (c == SymmetryClass::GL) throw std::invalid_argument("T_beta is defined for O and Sp only");
  MatC t = MatC::Zero(2 * (p + q), 2 * (p + q));
  t.topLeftCorner(2 * p, 2 * p) = boson_form(c, p);
  t.bottomRightCorner(2 * q, 2 * q) = fermion_form(c, q);
  return t;
}

/// Largest entry of Q - T_beta Q^{st} T_beta^{-1}; zero on W_{11} for O and Sp.
inline double tbeta_residual(const SuperMatrix& Q) {
  MatC t = t_beta(Q.cls, Q.p, Q.q);
  SuperMatrix st = supertranspose(Q);
  GMatrix rhs = t * st.full() * MatC(t.inverse());
  return (Q.full() - rhs).max_abs();
}

/// Odd coordinates of W_{11}: sigma (p_eff x q_eff) and tau (q_eff x p_eff).
/// For GL both are independent; for O and Sp tau is fixed by sigma.
struct W1Layout {
  SymmetryClass cls = SymmetryClass::GL;
  int p = 0, q = 0;
  ContextPtr ctx;
  int extra = 0;

  int sigma(int c, int e) const {
    if (cls == SymmetryClass::GL) return 2 * (c * q + e);
    return c * 2 * q + e;
  }
  int tau(int e, int c) const {
    if (cls != SymmetryClass::GL) throw std::logic_error("tau is not independent for O and Sp");
    return 2 * (c * q + e) + 1;
  }
  int odd_count() const { return cls == SymmetryClass::GL ? 2 * p * q : 4 * p * q; }
};

inline W1Layout make_w1_layout(SymmetryClass c, int p, int q, int extra = 0) {
  std::vector<std::string> names;
  if (c == SymmetryClass::GL) {
    for (int a = 0; a < p; ++a)
      for (int e = 0; e < q; ++e) {
        names.push_back("sigma[" + std::to_string(a) + "," + std::to_string(e) + "]");
        names.push_back("tau[" + std::to_string(e) + "," + std::to_string(a) + "]");
      }
  } else {
    for (int a = 0; a < 2 * p; ++a)
      for (int e = 0; e < 2 * q; ++e) names.push_back("sigma[" + std::to_string(a) + "," + std::to_string(e) + "]");
  }
  for (int k = 0; k < extra; ++k) names.push_back("eps" + std::to_string(k));
  return {c, p, q, make_context(std::move(names)), extra};
}

/// Generic W_{11} supermatrix with numeric x, y and generator-valued sigma, tau.
inline SuperMatrix w1_point(const W1Layout& L, const MatC& x, const MatC& y) {
  SuperMatrix Q;
  Q.cls = L.cls;
  Q.p = L.p;
  Q.q = L.q;
  int a = doubling(L.cls) * L.p, b = doubling(L.cls) * L.q;
  if (x.rows() != a || y.rows() != b) throw std::invalid_argument("w1_point: block size mismatch");
  Q.x = GMatrix::from_numeric(L.ctx, x);
  Q.y = GMatrix::from_numeric(L.ctx, y);
  Q.sigma = GMatrix(L.ctx, a, b);
  Q.tau = GMatrix(L.ctx, b, a);
  if (L.cls == SymmetryClass::GL) {
    for (int c = 0; c < a; ++c)
      for (int e = 0; e < b; ++e) {
        Q.sigma(c, e) = GrassmannElement::generator(L.ctx, L.sigma(c, e));
        Q.tau(e, c) = GrassmannElement::generator(L.ctx, L.tau(e, c));
      }
  } else {
    for (int c = 0; c < a; ++c)
      for (int e = 0; e < b; ++e) Q.sigma(c, e) = GrassmannElement::generator(L.ctx, L.sigma(c, e));
    // tau = -T1 sigma^t T0^{-1}
    MatC t0 = boson_form(L.cls, L.p), t1 = fermion_form(L.cls, L.q);
    Q.tau = -1.0 * (t1 * Q.sigma.transpose() * MatC(t0.inverse()));
  }
  return Q;
}

/// Berezin form on the odd part of W_{11}, without (2 pi) prefactors.
inline BerezinForm omega_w1_form(const W1Layout& L) {
  BerezinForm f{L.ctx, {}, 1.0};
  if (L.cls == SymmetryClass::GL) {
    for (int c = 0; c < L.p; ++c)
      for (int e = 0; e < L.q; ++e) {
        f.sequence.push_back(L.sigma(c, e));
        f.sequence.push_back(L.tau(e, c));
      }
    return f;
  }
  const int p = L.p, q = L.q;
  for (int c = 0; c < p; ++c)
    for (int e = 0; e < q; ++e) {
      f.sequence.push_back(L.sigma(c, e));
      f.sequence.push_back(L.sigma(c + p, e + q));
    }
  for (int c = 0; c < p; ++c)
    for (int e = 0; e < q; ++e) {
      if (L.cls == SymmetryClass::O) {
        f.sequence.push_back(L.sigma(c + p, e));
        f.sequence.push_back(L.sigma(c, e + q));
      } else {
        f.sequence.push_back(L.sigma(c, e + q));
        f.sequence.push_back(L.sigma(c + p, e));
      }
    }
  return f;
}

}  // namespace sbos

#endif
