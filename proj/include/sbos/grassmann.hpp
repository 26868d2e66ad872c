#ifndef SBOS_GRASSMANN_HPP
#define SBOS_GRASSMANN_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sbos {

using cplx = std::complex<double>;

/// Ordered list of odd generators. Monomials are bitmasks over this order and
/// are stored in ascending generator order.
class GrassmannContext {
 public:
  static constexpr int max_generators = 62;

  explicit GrassmannContext(std::vector<std::string> names) : names_(std::move(names)) {
    if (static_cast<int>(names_.size()) > max_generators)
      throw std::invalid_argument("grassmann context supports at most 62 generators");
    for (std::size_t k = 0; k < names_.size(); ++k) {
      if (!index_.emplace(names_[k], static_cast<int>(k)).second)
        throw std::invalid_argument("duplicate generator name: " + names_[k]);
    }
  }

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int k) const { return names_.at(k); }
  uint64_t full_mask() const { return size() == 0 ? 0 : (~uint64_t{0} >> (64 - size())); }

  int index_of(const std::string& nm) const {
    auto it = index_.find(nm);
    if (it == index_.end()) throw std::invalid_argument("unknown generator: " + nm);
    return it->second;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

using ContextPtr = std::shared_ptr<const GrassmannContext>;

inline ContextPtr make_context(std::vector<std::string> names) {
  return std::make_shared<const GrassmannContext>(std::move(names));
}

inline ContextPtr make_context(int m, const std::string& prefix = "g") {
  std::vector<std::string> names;
  for (int k = 0; k < m; ++k) names.push_back(prefix + std::to_string(k));
  return make_context(std::move(names));
}

namespace detail {

// (-1)^{#pairs (i in a, j in b) with i > j}: sign of theta_a * theta_b rewritten
// in ascending order.
inline int merge_sign(uint64_t a, uint64_t b) {
  int swaps = 0;
  while (b) {
    int j = std::countr_zero(b);
    b &= b - 1;
    swaps += std::popcount(a >> (j + 1));
  }
  return (swaps & 1) ? -1 : 1;
}

// Dense scratch accumulator reused across products in small contexts.
struct Scratch {
  std::vector<cplx> acc;
  std::vector<uint8_t> used;
  std::vector<uint64_t> touched;

  void reserve(int m) {
    std::size_t need = std::size_t{1} << m;
    if (acc.size() < need) {
      acc.assign(need, cplx{});
      used.assign(need, 0);
    }
  }
};

inline Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

constexpr int dense_limit = 20;

}  // namespace detail

struct Term {
  uint64_t mask;
  cplx coef;
};

/// Element of the complex Grassmann algebra over a context. Terms are kept
/// sorted by mask with no zero coefficients.
class GrassmannElement {
 public:
  GrassmannElement() = default;
  explicit GrassmannElement(ContextPtr ctx, cplx c = 0.0) : ctx_(std::move(ctx)) {
    if (!ctx_) throw std::invalid_argument("null grassmann context");
    if (c != 0.0) terms_.push_back({0, c});
  }

  static GrassmannElement generator(const ContextPtr& ctx, int k, cplx c = 1.0) {
    if (k < 0 || k >= ctx->size()) throw std::out_of_range("generator index out of range");
    GrassmannElement e(ctx);
    if (c != 0.0) e.terms_.push_back({uint64_t{1} << k, c});
    return e;
  }

  static GrassmannElement from_terms(const ContextPtr& ctx, std::vector<Term> terms) {
    GrassmannElement e(ctx);
    for (auto& t : terms) {
      if (t.mask & ~ctx->full_mask()) throw std::invalid_argument("monomial outside context");
    }
    std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.mask < b.mask; });
    for (auto& t : terms) {
      if (!e.terms_.empty() && e.terms_.back().mask == t.mask)
        e.terms_.back().coef += t.coef;
      else
        e.terms_.push_back(t);
    }
    e.drop_zeros();
    return e;
  }

  const ContextPtr& context() const { return ctx_; }
  const std::vector<Term>& terms() const { return terms_; }
  bool valid() const { return static_cast<bool>(ctx_); }

  cplx coefficient(uint64_t mask) const {
    auto it = std::lower_bound(terms_.begin(), terms_.end(), mask,
                               [](const Term& t, uint64_t m) { return t.mask < m; });
    return (it != terms_.end() && it->mask == mask) ? it->coef : cplx{};
  }
  cplx numeric_part() const { return coefficient(0); }

  bool is_zero() const { return terms_.empty(); }
  bool is_even() const {
    return std::all_of(terms_.begin(), terms_.end(), [](const Term& t) { return std::popcount(t.mask) % 2 == 0; });
  }
  bool is_odd() const {
    return std::all_of(terms_.begin(), terms_.end(), [](const Term& t) { return std::popcount(t.mask) % 2 == 1; });
  }
  bool is_numeric() const { return terms_.empty() || (terms_.size() == 1 && terms_[0].mask == 0); }

  GrassmannElement soul() const {
    GrassmannElement r(ctx_);
    for (const auto& t : terms_)
      if (t.mask) r.terms_.push_back(t);
    return r;
  }

  GrassmannElement pruned(double threshold) const {
    GrassmannElement r(ctx_);
    for (const auto& t : terms_)
      if (std::abs(t.coef) > threshold) r.terms_.push_back(t);
    return r;
  }

  double max_abs() const {
    double m = 0;
    for (const auto& t : terms_) m = std::max(m, std::abs(t.coef));
    return m;
  }

  GrassmannElement operator-() const {
    GrassmannElement r = *this;
    for (auto& t : r.terms_) t.coef = -t.coef;
    return r;
  }

  GrassmannElement& operator+=(const GrassmannElement& o) { return *this = add(*this, o, 1.0); }
  GrassmannElement& operator-=(const GrassmannElement& o) { return *this = add(*this, o, -1.0); }
  GrassmannElement& operator*=(const GrassmannElement& o) { return *this = mul(*this, o); }
  GrassmannElement& operator*=(cplx c) {
    if (c == 0.0) {
      terms_.clear();
      return *this;
    }
    for (auto& t : terms_) t.coef *= c;
    return *this;
  }
  GrassmannElement& operator+=(cplx c) { return *this += GrassmannElement(ctx_, c); }
  GrassmannElement& operator-=(cplx c) { return *this += GrassmannElement(ctx_, -c); }

  friend GrassmannElement operator+(const GrassmannElement& a, const GrassmannElement& b) { return add(a, b, 1.0); }
  friend GrassmannElement operator-(const GrassmannElement& a, const GrassmannElement& b) { return add(a, b, -1.0); }
  friend GrassmannElement operator*(const GrassmannElement& a, const GrassmannElement& b) { return mul(a, b); }
  friend GrassmannElement operator*(GrassmannElement a, cplx c) { return a *= c; }
  friend GrassmannElement operator*(cplx c, GrassmannElement a) { return a *= c; }
  friend GrassmannElement operator/(GrassmannElement a, cplx c) { return a *= (1.0 / c); }
  friend GrassmannElement operator+(GrassmannElement a, cplx c) { return a += c; }
  friend GrassmannElement operator+(cplx c, GrassmannElement a) { return a += c; }
  friend GrassmannElement operator-(GrassmannElement a, cplx c) { return a -= c; }
  friend GrassmannElement operator-(cplx c, const GrassmannElement& a) { return (-a) += c; }

  friend bool operator==(const GrassmannElement& a, const GrassmannElement& b) {
    if (a.ctx_ != b.ctx_ || a.terms_.size() != b.terms_.size()) return false;
    for (std::size_t k = 0; k < a.terms_.size(); ++k)
      if (a.terms_[k].mask != b.terms_[k].mask || a.terms_[k].coef != b.terms_[k].coef) return false;
    return true;
  }

  /// Largest coefficient difference, for approximate comparisons.
  friend double distance(const GrassmannElement& a, const GrassmannElement& b) { return (a - b).max_abs(); }

  std::string to_string() const {
    if (terms_.empty()) return "0";
    std::string s;
    for (const auto& t : terms_) {
      if (!s.empty()) s += " + ";
      s += "(" + std::to_string(t.coef.real()) + (t.coef.imag() < 0 ? "" : "+") + std::to_string(t.coef.imag()) + "i)";
      for (uint64_t m = t.mask; m; m &= m - 1) s += "*" + ctx_->name(std::countr_zero(m));
    }
    return s;
  }

 private:
  static void check_same(const GrassmannElement& a, const GrassmannElement& b) {
    if (!a.ctx_ || !b.ctx_) throw std::invalid_argument("uninitialised grassmann element");
    if (a.ctx_ != b.ctx_) throw std::invalid_argument("grassmann context mismatch");
  }

  void drop_zeros() {
    terms_.erase(std::remove_if(terms_.begin(), terms_.end(), [](const Term& t) { return t.coef == 0.0; }),
                 terms_.end());
  }

  static GrassmannElement add(const GrassmannElement& a, const GrassmannElement& b, double sb) {
    check_same(a, b);
    GrassmannElement r(a.ctx_);
    r.terms_.reserve(a.terms_.size() + b.terms_.size());
    auto ia = a.terms_.begin(), ib = b.terms_.begin();
    while (ia != a.terms_.end() || ib != b.terms_.end()) {
      if (ib == b.terms_.end() || (ia != a.terms_.end() && ia->mask < ib->mask)) {
        r.terms_.push_back(*ia++);
      } else if (ia == a.terms_.end() || ib->mask < ia->mask) {
        r.terms_.push_back({ib->mask, sb * ib->coef});
        ++ib;
      } else {
        cplx c = ia->coef + sb * ib->coef;
        if (c != 0.0) r.terms_.push_back({ia->mask, c});
        ++ia;
        ++ib;
      }
    }
    return r;
  }

  static GrassmannElement mul(const GrassmannElement& a, const GrassmannElement& b) {
    check_same(a, b);
    GrassmannElement r(a.ctx_);
    if (a.terms_.empty() || b.terms_.empty()) return r;
    int m = a.ctx_->size();
    if (m <= detail::dense_limit) {
      auto& s = detail::scratch();
      s.reserve(m);
      s.touched.clear();
      for (const auto& ta : a.terms_) {
        for (const auto& tb : b.terms_) {
          if (ta.mask & tb.mask) continue;
          uint64_t mk = ta.mask | tb.mask;
          cplx c = ta.coef * tb.coef;
          if (detail::merge_sign(ta.mask, tb.mask) < 0) c = -c;
          if (!s.used[mk]) {
            s.used[mk] = 1;
            s.touched.push_back(mk);
            s.acc[mk] = c;
          } else {
            s.acc[mk] += c;
          }
        }
      }
      std::sort(s.touched.begin(), s.touched.end());
      r.terms_.reserve(s.touched.size());
      for (uint64_t mk : s.touched) {
        if (s.acc[mk] != 0.0) r.terms_.push_back({mk, s.acc[mk]});
        s.used[mk] = 0;
      }
      return r;
    }
    std::unordered_map<uint64_t, cplx> acc;
    for (const auto& ta : a.terms_)
      for (const auto& tb : b.terms_) {
        if (ta.mask & tb.mask) continue;
        cplx c = ta.coef * tb.coef;
        acc[ta.mask | tb.mask] += detail::merge_sign(ta.mask, tb.mask) < 0 ? -c : c;
      }
    std::vector<Term> ts;
    ts.reserve(acc.size());
    for (auto& [mk, c] : acc) ts.push_back({mk, c});
    return from_terms(a.ctx_, std::move(ts));
  }

  ContextPtr ctx_;
  std::vector<Term> terms_;
};

inline GrassmannElement power(const GrassmannElement& a, int k) {
  if (k < 0) throw std::invalid_argument("negative power of a grassmann element; use ginv");
  GrassmannElement r(a.context(), 1.0);
  for (int j = 0; j < k; ++j) r = r * a;
  return r;
}

/// Berezin integration as a product of left derivatives d_{s0} d_{s1} ... d_{s(k-1)}
/// (leftmost listed operator applied last), scaled by a prefactor.
struct BerezinForm {
  ContextPtr ctx;
  std::vector<int> sequence;
  cplx prefactor = 1.0;

  uint64_t mask() const {
    uint64_t m = 0;
    for (int s : sequence) m |= uint64_t{1} << s;
    return m;
  }
};

inline void validate(const BerezinForm& f) {
  uint64_t m = 0;
  for (int s : f.sequence) {
    if (s < 0 || s >= f.ctx->size()) throw std::out_of_range("berezin form index out of range");
    if (m & (uint64_t{1} << s)) throw std::invalid_argument("berezin form repeats a generator");
    m |= uint64_t{1} << s;
  }
}

/// Integrates out the generators of the form, leaving an element in the others.
inline GrassmannElement apply(const BerezinForm& form, const GrassmannElement& f) {
  validate(form);
  if (f.context() != form.ctx) throw std::invalid_argument("grassmann context mismatch");
  const uint64_t S = form.mask();
  // theta_{s(k-1)} ... theta_{s0} sorted ascending: parity of the reversed sequence
  int inv = 0;
  const auto& seq = form.sequence;
  for (std::size_t i = 0; i < seq.size(); ++i)
    for (std::size_t j = i + 1; j < seq.size(); ++j)
      if (seq[i] < seq[j]) ++inv;
  std::vector<Term> out;
  for (const auto& t : f.terms()) {
    if ((t.mask & S) != S) continue;
    uint64_t rest = t.mask & ~S;
    int swaps = inv;
    for (uint64_t s = S; s; s &= s - 1) {
      int b = std::countr_zero(s);
      swaps += std::popcount(rest & ((uint64_t{1} << b) - 1));
    }
    cplx c = form.prefactor * t.coef;
    out.push_back({rest, (swaps & 1) ? -c : c});
  }
  return GrassmannElement::from_terms(f.context(), std::move(out));
}

inline cplx berezin(const BerezinForm& form, const GrassmannElement& f) {
  if (form.mask() != form.ctx->full_mask())
    throw std::invalid_argument("berezin form does not cover the context; use apply()");
  return apply(form, f).numeric_part();
}

/// Taylor data at the numeric part: coeffs[k] = f^{(k)}(u0) / k!, k = 0..kmax.
using TaylorFn = std::function<void(cplx u0, int kmax, std::vector<cplx>& coeffs)>;

/// f(u) for an even element u = u0 + N, as the terminating Taylor series in N.
inline GrassmannElement even_function(const TaylorFn& f, const GrassmannElement& u) {
  if (!u.is_even()) throw std::invalid_argument("even_function needs an even argument");
  const cplx u0 = u.numeric_part();
  GrassmannElement n = u.soul();
  std::vector<GrassmannElement> pw{GrassmannElement(u.context(), 1.0)};
  while (!pw.back().is_zero()) {
    if (static_cast<int>(pw.size()) > u.context()->size() / 2 + 1) break;
    pw.push_back(pw.back() * n);
  }
  int kmax = static_cast<int>(pw.size()) - 1;
  std::vector<cplx> c(kmax + 1);
  f(u0, kmax, c);
  GrassmannElement r(u.context());
  for (int k = 0; k <= kmax; ++k)
    if (c[k] != 0.0) r += pw[k] * c[k];
  return r;
}

namespace series {

inline TaylorFn exp() {
  return [](cplx u0, int kmax, std::vector<cplx>& c) {
    cplx e = std::exp(u0);
    double fact = 1;
    for (int k = 0; k <= kmax; ++k) {
      if (k) fact *= k;
      c[k] = e / fact;
    }
  };
}

/// u^alpha on the principal branch. Non-integer alpha is rejected when u0 lies
/// on the closed negative real axis.
inline TaylorFn pow(double alpha) {
  return [alpha](cplx u0, int kmax, std::vector<cplx>& c) {
    bool integral = alpha == std::round(alpha);
    if (u0 == 0.0 && !(integral && alpha >= 0))
      throw std::domain_error("power of an element with vanishing numeric part");
    if (!integral && u0.imag() == 0.0 && u0.real() < 0)
      throw std::domain_error("branch ambiguity: fractional power on the negative real axis");
    double binom = 1;
    for (int k = 0; k <= kmax; ++k) {
      if (k) binom *= (alpha - (k - 1)) / k;
      if (integral && alpha >= 0 && k > alpha) {
        c[k] = 0;
        continue;
      }
      c[k] = binom * (integral ? std::pow(u0, static_cast<int>(alpha) - k) : std::pow(u0, alpha - k));
    }
  };
}

inline TaylorFn inv() {
  return [](cplx u0, int kmax, std::vector<cplx>& c) {
    if (u0 == 0.0) throw std::domain_error("inverse of a nilpotent element");
    cplx p = 1.0 / u0;
    for (int k = 0; k <= kmax; ++k) {
      c[k] = (k % 2 ? -p : p);
      p /= u0;
    }
  };
}

inline TaylorFn log() {
  return [](cplx u0, int kmax, std::vector<cplx>& c) {
    if (u0 == 0.0) throw std::domain_error("log of a nilpotent element");
    c[0] = std::log(u0);
    cplx p = 1.0;
    for (int k = 1; k <= kmax; ++k) {
      p /= u0;
      c[k] = (k % 2 ? 1.0 : -1.0) * p / double(k);
    }
  };
}

}  // namespace series

inline GrassmannElement gexp(const GrassmannElement& u) { return even_function(series::exp(), u); }
inline GrassmannElement ginv(const GrassmannElement& u) { return even_function(series::inv(), u); }
inline GrassmannElement glog(const GrassmannElement& u) { return even_function(series::log(), u); }
inline GrassmannElement gpow(const GrassmannElement& u, double alpha) {
  if (alpha == std::round(alpha) && alpha >= 0 && alpha <= 64) return power(u, static_cast<int>(alpha));
  return even_function(series::pow(alpha), u);
}

/// Generator layout of the flat odd coordinates zeta (n x q) and zetat (q x n),
/// stored as interleaved pairs (zeta_e^j, zetat_j^e).
struct FlatLayout {
  int n = 0, q = 0;
  ContextPtr ctx;

  int zeta(int j, int e) const { return 2 * (e * n + j); }
  int zetat(int e, int j) const { return 2 * (e * n + j) + 1; }
};

inline FlatLayout make_flat_layout(int n, int q) {
  if (n < 0 || q < 0) throw std::invalid_argument("negative dimension");
  if (2 * n * q > GrassmannContext::max_generators) throw std::invalid_argument("flat layout too large");
  std::vector<std::string> names;
  for (int e = 0; e < q; ++e)
    for (int j = 0; j < n; ++j) {
      names.push_back("zeta[" + std::to_string(j) + "," + std::to_string(e) + "]");
      names.push_back("zetat[" + std::to_string(e) + "," + std::to_string(j) + "]");
    }
  return {n, q, make_context(std::move(names))};
}

/// prod_e prod_j d^2 / (d zeta_e^j d zetat_j^e), times (2 pi)^{-qn}.
inline BerezinForm flat_berezin_form(const FlatLayout& L) {
  BerezinForm f{L.ctx, {}, std::pow(2 * std::numbers::pi, -double(L.q * L.n))};
  for (int e = 0; e < L.q; ++e)
    for (int j = 0; j < L.n; ++j) {
      f.sequence.push_back(L.zeta(j, e));
      f.sequence.push_back(L.zetat(e, j));
    }
  return f;
}

/// Grassmann part of the flat form without the (2 pi) normalisation.
inline BerezinForm omega_v_form(const FlatLayout& L) {
  BerezinForm f = flat_berezin_form(L);
  f.prefactor = 1.0;
  return f;
}

}  // namespace sbos

#endif
