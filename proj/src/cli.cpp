#include "sbos/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

#include <CLI11.hpp>

namespace sbos::cli {

namespace {

const char* kGLDefault = "exp(-1.2*tr(x) + 0.9*tr(y) - 0.3*tr(sigma*tau))";
const char* kHalfDefault = "exp(-0.6*tr(x) + 0.45*tr(y) - 0.15*tr(sigma*tau))";

bool is_gl(SymmetryClass c) { return c == SymmetryClass::GL; }

std::string default_integrand(const std::string& suite, SymmetryClass c) {
  if (suite == "bb") return is_gl(c) ? "exp(-tr(x))" : "exp(-tr(x)/2)";
  if (suite == "ff") return is_gl(c) ? "exp(tr(y))" : "exp(tr(y)/2)";
  if (suite == "superboson") return is_gl(c) ? kGLDefault : kHalfDefault;
  if (suite == "localization") return kGLDefault;
  return "";
}

std::vector<SymmetryClass> resolve_classes(const std::vector<std::string>& names) {
  std::vector<SymmetryClass> out;
  for (const auto& s : names) {
    if (s == "all") {
      out.insert(out.end(), {SymmetryClass::GL, SymmetryClass::O, SymmetryClass::Sp});
      continue;
    }
    try {
      out.push_back(parse_class(s));
    } catch (const std::exception&) {
      throw UsageError("unknown class '" + s + "' (gl, o, sp or all)");
    }
  }
  if (out.empty()) throw UsageError("no symmetry class given");
  return out;
}

expr::Expr compile(const std::string& src) {
  try {
    auto e = expr::parse(src);
    expr::typecheck(e);
    return e;
  } catch (const std::exception& ex) {
    throw UsageError("integrand '" + src + "': " + ex.what());
  }
}

std::string point_label(const std::string& head, SymmetryClass c, std::initializer_list<std::pair<const char*, int>> kv) {
  std::string s = head + " " + to_string(c);
  for (auto [k, v] : kv) s += " " + std::string(k) + "=" + std::to_string(v);
  return s;
}

// --------------------------------------------------------------- rows

enum class Rule { Rel, Abs, Sigma, SigmaRel };

const char* rule_name(Rule r) {
  switch (r) {
    case Rule::Rel: return "rel";
    case Rule::Abs: return "abs";
    case Rule::Sigma: return "3sigma";
    case Rule::SigmaRel: return "3sigma+rel";
  }
  return "";
}

struct Side {
  cplx value;
  std::string method;
};

json compare_row(const std::string& label, const Side& lhs, const Side& rhs, double sigma, Rule rule, double tol,
                 std::optional<double> diff_override = {}) {
  double diff = diff_override ? *diff_override : std::abs(lhs.value - rhs.value);
  bool pass = true;
  if (rule == Rule::Sigma || rule == Rule::SigmaRel) pass = pass && diff <= 3 * sigma;
  if (rule == Rule::Rel || rule == Rule::SigmaRel) pass = pass && diff <= tol * std::abs(rhs.value);
  if (rule == Rule::Abs) pass = pass && diff <= tol;
  json r;
  r["label"] = label;
  r["lhs_re"] = lhs.value.real();
  r["lhs_im"] = lhs.value.imag();
  r["lhs_method"] = lhs.method;
  r["rhs_re"] = rhs.value.real();
  r["rhs_im"] = rhs.value.imag();
  r["rhs_method"] = rhs.method;
  r["diff"] = diff;
  r["sigma"] = sigma;
  r["rule"] = rule_name(rule);
  r["tolerance"] = rule == Rule::Sigma ? json(nullptr) : json(tol);
  r["pass"] = std::isfinite(diff) && pass;
  r["error"] = nullptr;
  return r;
}

json error_row(const std::string& label, const std::string& what) {
  json r;
  r["label"] = label;
  r["pass"] = false;
  r["error"] = what;
  return r;
}

// Runs body; a runtime failure becomes an error row and the run continues.
template <class Body>
void guarded(json& rows, const std::string& label, Body&& body) {
  try {
    body();
  } catch (const std::exception& ex) {
    rows.push_back(error_row(label, ex.what()));
  }
}

Side side(const IntegralResult& r) { return {r.value, r.method}; }

// --------------------------------------------------------------- grid

struct Point {
  SymmetryClass c;
  int n, p, q;
};

std::vector<Point> grid(const RunConfig& cfg, bool use_p, bool use_q, bool check_p, json& skipped) {
  std::vector<Point> pts;
  std::vector<int> ps = use_p ? cfg.p : std::vector<int>{0};
  std::vector<int> qs = use_q ? cfg.q : std::vector<int>{0};
  for (auto c : resolve_classes(cfg.classes))
    for (int n : cfg.n)
      for (int p : ps)
        for (int q : qs) {
          if (n < 1) throw UsageError("n must be positive");
          if (p < 0 || q < 0) throw UsageError("p and q must be non-negative");
          if (check_p && p > n_prime(c, n)) {
            std::ostringstream os;
            os << "p = " << p << " > n' = " << n_prime(c, n) << " for " << to_string(c) << " n = " << n
               << " violates p <= n', which is necessary for superbosonization (the boson invariants then have rank below p and miss the interior of D0)";
            if (!cfg.skip_invalid) throw UsageError("invalid grid: " + os.str());
            skipped.push_back(os.str());
            continue;
          }
          pts.push_back({c, n, p, q});
        }
  if (pts.empty()) throw UsageError("invalid grid: no admissible (class, n, p, q) point");
  return pts;
}

// --------------------------------------------------------------- suites

void suite_bb(const RunConfig& cfg, json& rows, json& resolved, json& skipped) {
  auto pts = grid(cfg, true, false, true, skipped);
  for (const auto& pt : pts) {
    if (pt.p < 1) throw UsageError("bb needs p >= 1");
  }
  const double pi = std::numbers::pi;
  for (const auto& [c, n, p, q] : pts) {
    std::string src = cfg.F.empty() ? default_integrand("bb", c) : cfg.F;
    resolved["F"][to_string(c)] = src;
    auto F0 = compile(src);
    double exact = cfg.exact_tolerance.value_or(p == 1 ? 1e-8 : 1e-6);
    std::string label = point_label("bb", c, {{"n", n}, {"p", p}});
    guarded(rows, label, [&] {
      auto r = bb_sector_check(F0, c, n, p, cfg.mc);
      rows.push_back(compare_row(label, side(r.lhs), side(r.rhs), std::hypot(r.lhs.std_error, r.rhs.std_error),
                                 Rule::SigmaRel, cfg.tolerance));
      if (!cfg.F.empty()) return;
      // the Gaussian has Lebesgue mass pi^{pn}
      rows.push_back(compare_row(label + " gaussian", {std::pow(pi, p * n), "closed-form"}, side(r.rhs),
                                 r.rhs.std_error, Rule::Rel, exact));
      if (is_gl(c) && p == 1) {
        double pref = std::pow(2.0, -double(n)) * vol_ratio(c, n, 1);
        rows.push_back(compare_row(label + " gamma", {std::tgamma(double(n)), "closed-form"},
                                   {r.rhs.value / pref, r.rhs.method}, r.rhs.std_error / pref, Rule::Rel, exact));
      }
    });
  }
}

void suite_ff(const RunConfig& cfg, json& rows, json& resolved, json& skipped) {
  auto pts = grid(cfg, false, true, false, skipped);
  const double pi = std::numbers::pi;
  for (const auto& [c, n, p, q] : pts) {
    std::string src = cfg.F.empty() ? default_integrand("ff", c) : cfg.F;
    resolved["F"][to_string(c)] = src;
    auto F1 = compile(src);
    double exact = cfg.exact_tolerance.value_or(is_gl(c) ? 1e-10 : 1e-8);
    std::string label = point_label("ff", c, {{"n", n}, {"q", q}});
    const int level = std::max(2, cfg.mc.level + 1);
    guarded(rows, label, [&] {
      auto r = ff_sector_check(F1, c, n, q, level);
      rows.push_back(compare_row(label, side(r.lhs), side(r.rhs), r.rhs.std_error, Rule::Rel, exact));
    });
    if (is_gl(c) && q == 1 && cfg.F.empty()) {
      guarded(rows, label + " circle", [&] {
        // int_0^{2 pi} exp(e^{i theta}) e^{-i n theta} d theta = 2 pi / n!
        auto e = eigen_structure(c, Sector::Compact, 1);
        auto f = [&](const MatC& y) { return std::exp(y(0, 0)) * std::pow(y(0, 0), -n); };
        auto r = integrate_class_function(e, f, level);
        double norm = 2 * pi / compact_volume(e);
        rows.push_back(compare_row(label + " circle", {2 * pi / std::tgamma(n + 1.0), "closed-form"},
                                   {r.value * norm, "circle-quadrature"}, r.error * norm, Rule::Rel, exact));
      });
    }
  }
}

void suite_shift(const RunConfig& cfg, json& rows, json& resolved, json& skipped) {
  auto pts = grid(cfg, false, true, false, skipped);
  for (const auto& pt : pts) {
    if (pt.c == SymmetryClass::Sp) throw UsageError("shift covers the one-dimensional circle domains: gl and o");
    if (pt.q != 1) throw UsageError("shift covers q = 1");
  }
  std::vector<std::string> bank = cfg.F.empty() ? std::vector<std::string>{"tr(y)^3", "exp(tr(y))"}
                                                 : std::vector<std::string>{cfg.F};
  resolved["F"] = bank;
  std::vector<expr::Expr> fs;
  for (const auto& s : bank) fs.push_back(compile(s));
  const double exact = cfg.exact_tolerance.value_or(1e-8);
  std::set<SymmetryClass> done;
  for (const auto& pt : pts) {
    const auto c = pt.c;
    if (!done.insert(c).second) continue;
    Rng rng = substream(cfg.mc.seed, 0x5417 + static_cast<int>(c));
    std::normal_distribution<double> nd;
    for (int pairs : {1, 2}) {
      auto ctx = make_context(2 * pairs, "t");
      GrassmannElement omega(ctx);
      for (int k = 0; k < pairs; ++k)
        omega += GrassmannElement::generator(ctx, 2 * k, cplx(nd(rng), nd(rng))) *
                 GrassmannElement::generator(ctx, 2 * k + 1);
      const int qe = doubling(c);
      GMatrix w(ctx, qe, qe);
      for (int i = 0; i < qe; ++i) w(i, i) = omega;
      for (std::size_t k = 0; k < fs.size(); ++k) {
        std::string label = point_label("shift", c, {{"q", 1}, {"pairs", pairs}}) + " F=" + bank[k];
        guarded(rows, label, [&] {
          auto r = shift_lemma_check(fs[k], c, 1, w, std::max(2, cfg.mc.level + 1));
          uint64_t top = ctx->full_mask();
          rows.push_back(compare_row(label, {r.lhs.coefficient(top), "grassmann+quadrature"},
                                     {r.rhs.coefficient(top), "grassmann+quadrature"}, r.error, Rule::Abs, exact,
                                     (r.lhs - r.rhs).max_abs()));
        });
      }
    }
    for (double th : {0.0, 0.9, 2.5}) {
      std::ostringstream label;
      label << "divergence " << to_string(c) << " theta=" << th;
      guarded(rows, label.str(), [&] {
        auto [div, want] = divergence_check(c, cplx(0.4, -0.7), th);
        rows.push_back(compare_row(label.str(), {div, "finite-difference"}, {want, "closed-form"}, 0.0, Rule::Abs, 1e-6));
      });
    }
  }
}

void suite_superboson(const RunConfig& cfg, json& rows, json& resolved, json& skipped) {
  auto pts = grid(cfg, true, true, true, skipped);
  for (const auto& [c, n, p, q] : pts) {
    std::string src = cfg.F.empty() ? default_integrand("superboson", c) : cfg.F;
    resolved["F"][to_string(c)] = src;
    auto F = compile(src);
    std::string label = point_label("superboson", c, {{"n", n}, {"p", p}, {"q", q}});
    guarded(rows, label, [&] {
      auto lhs = flat_superintegral(F, c, n, p, q, cfg.mc);
      auto rhs = boson_rhs(F, c, n, p, q, cfg.mc);
      rows.push_back(compare_row(label, side(lhs), side(rhs), std::hypot(lhs.std_error, rhs.std_error),
                                 Rule::SigmaRel, cfg.tolerance));
      if (is_gl(c) && p == 1 && q == 1 && cfg.F.empty()) {
        // det(b + c z z^dagger) = b^{n-1}(b + c|z|^2) after the fermion integral
        const double a = 1.2, b = 0.9, cc = 0.3;
        double want = std::pow(b, n - 1) * (a * b + cc * n) / std::pow(a, n + 1);
        rows.push_back(compare_row(label + " closed-form", side(lhs), {want, "closed-form"}, lhs.std_error,
                                   Rule::SigmaRel, cfg.tolerance));
      }
    });
  }
}

void suite_localization(const RunConfig& cfg, json& rows, json& resolved, json& skipped) {
  auto pts = grid(cfg, false, true, false, skipped);
  const double exact = cfg.exact_tolerance.value_or(0.01);
  const int level = std::max(2, cfg.mc.level + 1);
  for (const auto& [c, n, p, q] : pts) {
    std::string label = point_label("localization", c, {{"n", n}, {"q", q}});
    guarded(rows, label, [&] {
      auto r = localization_constant(c, n, q, level);
      rows.push_back(compare_row(label, side(r), {localization_expected(c, q), "closed-form"}, r.std_error,
                                 Rule::Rel, exact));
    });
  }
  json ward_skipped = json::array();
  auto ward_pts = grid(cfg, true, true, true, ward_skipped);
  std::string src = cfg.F.empty() ? default_integrand("localization", SymmetryClass::GL) : cfg.F;
  bool any_gl = false;
  for (const auto& [c, n, p, q] : ward_pts) {
    if (!is_gl(c) || p < 1 || q < 1) continue;
    any_gl = true;
    auto F = compile(src);
    for (auto kind : {WardKind::D, WardKind::Dtilde}) {
      std::string label = point_label(kind == WardKind::D ? "ward d" : "ward dtilde", c, {{"n", n}, {"p", p}, {"q", q}});
      guarded(rows, label, [&] {
        auto w = ward_identity(F, n, p, q, kind, level);
        // quadrature error plus a rounding floor relative to the absolute integrand mass
        double sigma = w.error + 1e-12 * w.scale;
        rows.push_back(compare_row(label, {w.value, "eigen-quadrature"}, {0.0, "exact-zero"}, sigma, Rule::Sigma, 0));
      });
    }
  }
  if (any_gl) resolved["F"] = src;
  for (auto& s : ward_skipped) skipped.push_back("ward: " + s.get<std::string>());
}

double limit_slope(const EigenStructure& e, double& d4) {
  double d2 = std::abs(gaussian_limit_check(e, 1e2) - 1.0);
  d4 = std::abs(gaussian_limit_check(e, 1e4) - 1.0);
  return std::log10(d4 / d2) / 2;
}

void suite_measures(const RunConfig& cfg, json& rows) {
  const double exact = cfg.exact_tolerance.value_or(0.2);
  for (auto c : resolve_classes(cfg.classes))
    for (auto s : {Sector::Noncompact, Sector::Compact})
      for (int r : {1, 2}) {
        std::string label = "gaussian-limit " + to_string(c) + " " + to_string(s) + " r=" + std::to_string(r);
        guarded(rows, label, [&] {
          double d4 = 0;
          double slope = limit_slope(eigen_structure(c, s, r), d4);
          rows.push_back(compare_row(label, {slope, "log-log slope"}, {-1.0, "expected"}, 0.0, Rule::Abs, exact));
        });
      }
}

json measures_table(const RunConfig& cfg) {
  json rows = json::array();
  for (auto c : resolve_classes(cfg.classes))
    for (auto s : {Sector::Noncompact, Sector::Compact})
      for (int r : {1, 2}) {
        auto e = eigen_structure(c, s, r);
        json row;
        row["label"] = "measure " + to_string(c) + " " + to_string(s) + " r=" + std::to_string(r);
        row["class"] = to_string(c);
        row["sector"] = to_string(s);
        row["r"] = r;
        row["eigenvalues"] = e.N;
        row["beta"] = e.beta;
        row["dim"] = e.dim();
        row["constant"] = measure_constant(e);
        row["volume"] = s == Sector::Compact ? json(compact_volume(e)) : json(nullptr);
        for (double t : {1e2, 1e3, 1e4}) {
          std::ostringstream k;
          k << "limit_t" << t;
          row[k.str()] = gaussian_limit_check(e, t).real();
        }
        double d4 = 0;
        row["slope"] = limit_slope(e, d4);
        rows.push_back(row);
      }
  return rows;
}

json run_wegner(const RunConfig& cfg, json& resolved) {
  if (cfg.model_path.empty() && !cfg.model) throw UsageError("wegner needs a model file");
  auto [model, en] = cfg.model ? parse_model(*cfg.model) : read_model(cfg.model_path);
  if (cfg.E0) en.E0 = *cfg.E0;
  if (cfg.E1) en.E1 = *cfg.E1;
  try {
    model.validate();
    en.validate();
  } catch (const std::exception& ex) {
    throw UsageError(std::string("model: ") + ex.what());
  }
  json mj;
  mj["sites"] = model.sites;
  mj["n"] = model.n;
  std::vector<double> flatC(model.C.data(), model.C.data() + model.C.size());
  mj["C"] = flatC;
  mj["E0"] = {en.E0.real(), en.E0.imag()};
  mj["E1"] = {en.E1.real(), en.E1.imag()};
  resolved["model"] = mj;

  json rows = json::array();
  wegner::QuadConfig qc;
  qc.level = std::max(1, cfg.mc.level);
  std::vector<std::pair<std::string, wegner::RatioResult>> got;
  for (const auto& m : cfg.methods) {
    std::string label = "R " + m;
    guarded(rows, label, [&] {
      wegner::RatioResult r;
      if (m == "mc")
        r = wegner::r_ratio_mc(model, en, cfg.mc);
      else if (m == "sb")
        r = model.sites <= 2 ? wegner::r_ratio_sb(model, en, qc) : wegner::r_ratio_sb_mc(model, en, cfg.mc);
      else if (m == "hs")
        r = wegner::r_ratio_hs(model, en, qc);
      else
        throw std::invalid_argument("unknown method");
      json row;
      row["label"] = label;
      row["method"] = r.method;
      row["value_re"] = r.value.real();
      row["value_im"] = r.value.imag();
      row["sigma"] = r.std_error;
      row["samples"] = r.samples;
      row["tail"] = r.tail;
      row["seed"] = cfg.mc.seed;
      row["pass"] = std::isfinite(r.value.real()) && std::isfinite(r.std_error);
      row["error"] = nullptr;
      rows.push_back(row);
      got.emplace_back(m, r);
    });
  }
  for (std::size_t a = 0; a < got.size(); ++a)
    for (std::size_t b = a + 1; b < got.size(); ++b) {
      const auto& [na, ra] = got[a];
      const auto& [nb, rb] = got[b];
      rows.push_back(compare_row("agree " + na + "-" + nb, {ra.value, ra.method}, {rb.value, rb.method},
                                 std::hypot(ra.std_error, rb.std_error), Rule::SigmaRel, cfg.tolerance));
    }
  return rows;
}

void validate(const RunConfig& cfg) {
  static const std::set<std::string> suites{"bb", "ff", "shift", "superboson", "localization", "measures"};
  if (cfg.command == "verify" && !suites.count(cfg.suite)) throw UsageError("unknown suite '" + cfg.suite + "'");
  if (cfg.command != "verify" && cfg.command != "wegner" && cfg.command != "measures")
    throw UsageError("unknown command '" + cfg.command + "'");
  if (cfg.mc.samples < 2) throw UsageError("--samples must be at least 2");
  if (cfg.mc.chunks < 1) throw UsageError("--chunks must be positive");
  if (cfg.mc.level < 1 || cfg.mc.level > 3) throw UsageError("--level must be 1, 2 or 3");
  if (!(cfg.tolerance > 0)) throw UsageError("--tolerance must be positive");
  if (cfg.exact_tolerance && !(*cfg.exact_tolerance > 0)) throw UsageError("--exact-tolerance must be positive");
  if (cfg.emit != "json" && cfg.emit != "csv") throw UsageError("--emit takes json or csv");
  for (const auto& m : cfg.methods)
    if (m != "mc" && m != "sb" && m != "hs") throw UsageError("unknown method '" + m + "' (mc, sb, hs)");
  if (!cfg.F.empty()) compile(cfg.F);
}

std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  return v.dump();
}

cplx parse_energy(const json& j, const char* name) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  throw UsageError(std::string("model: ") + name + " must be a number or [re, im]");
}

cplx parse_energy_flag(const std::string& s) {
  std::istringstream is(s);
  double re = 0, im = 0;
  char comma = 0;
  if (!(is >> re)) throw CLI::ValidationError("energy '" + s + "' is not re or re,im");
  if (is >> comma) {
    if (comma != ',' || !(is >> im)) throw CLI::ValidationError("energy '" + s + "' is not re or re,im");
  }
  return {re, im};
}

}  // namespace

// --------------------------------------------------------------- public

json RunConfig::to_json() const {
  json j;
  j["command"] = command;
  if (command == "verify") j["suite"] = suite;
  j["class"] = classes;
  j["n"] = n;
  j["p"] = p;
  j["q"] = q;
  j["F"] = F;
  j["samples"] = mc.samples;
  j["seed"] = mc.seed;
  j["chunks"] = mc.chunks;
  j["proposal_scale"] = mc.proposal_scale;
  j["level"] = mc.level;
  j["tolerance"] = tolerance;
  j["exact_tolerance"] = exact_tolerance ? json(*exact_tolerance) : json(nullptr);
  j["skip_invalid"] = skip_invalid;
  if (command == "wegner") {
    j["model"] = model ? json("inline") : json(model_path);
    j["methods"] = methods;
  }
  j["emit"] = emit;
  return j;
}

std::pair<wegner::Model, wegner::Energies> parse_model(const json& j) {
  if (!j.is_object()) throw UsageError("model: expected an object");
  for (const char* k : {"sites", "C", "n", "E0", "E1"})
    if (!j.contains(k)) throw UsageError(std::string("model: missing field '") + k + "'");
  wegner::Model m;
  try {
    m.sites = j.at("sites").get<int>();
    m.n = j.at("n").get<int>();
    auto c = j.at("C").get<std::vector<double>>();
    if (m.sites < 1 || c.size() != static_cast<std::size_t>(m.sites) * m.sites)
      throw UsageError("model: C needs sites*sites entries in row-major order");
    m.C.resize(m.sites, m.sites);
    for (int i = 0; i < m.sites; ++i)
      for (int k = 0; k < m.sites; ++k) m.C(i, k) = c[i * m.sites + k];
  } catch (const json::exception& ex) {
    throw UsageError(std::string("model: ") + ex.what());
  }
  wegner::Energies e{parse_energy(j.at("E0"), "E0"), parse_energy(j.at("E1"), "E1")};
  return {m, e};
}

std::pair<wegner::Model, wegner::Energies> read_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read model file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& ex) {
    throw UsageError("model file '" + path + "': " + ex.what());
  }
  return parse_model(j);
}

json run(const RunConfig& cfg) {
  validate(cfg);
  json config = cfg.to_json();
  json resolved = json::object();
  json skipped = json::array();
  json rows = json::array();
  if (cfg.command == "verify") {
    if (cfg.suite == "bb") suite_bb(cfg, rows, resolved, skipped);
    if (cfg.suite == "ff") suite_ff(cfg, rows, resolved, skipped);
    if (cfg.suite == "shift") suite_shift(cfg, rows, resolved, skipped);
    if (cfg.suite == "superboson") suite_superboson(cfg, rows, resolved, skipped);
    if (cfg.suite == "localization") suite_localization(cfg, rows, resolved, skipped);
    if (cfg.suite == "measures") suite_measures(cfg, rows);
  } else if (cfg.command == "wegner") {
    rows = run_wegner(cfg, resolved);
  } else {
    rows = measures_table(cfg);
  }
  for (auto& [k, v] : resolved.items()) config["resolved_" + k] = v;
  if (!skipped.empty()) config["skipped"] = skipped;
  long passed = 0, failed = 0, errors = 0;
  for (const auto& r : rows) {
    if (r.contains("error") && !r["error"].is_null())
      ++errors;
    else if (r.value("pass", true))
      ++passed;
    else
      ++failed;
  }
  json report;
  report["config"] = config;
  report["rows"] = rows;
  report["summary"] = {{"rows", rows.size()}, {"passed", passed}, {"failed", failed}, {"errors", errors}};
  return report;
}

std::string render(const json& report, const std::string& emit) {
  if (emit == "json") return report.dump(2) + "\n";
  std::set<std::string> cols;
  for (const auto& r : report.at("rows"))
    for (const auto& [k, v] : r.items()) cols.insert(k);
  // label first, the rest sorted
  std::vector<std::string> order{"label"};
  for (const auto& c : cols)
    if (c != "label") order.push_back(c);
  std::string out;
  for (std::size_t i = 0; i < order.size(); ++i) out += (i ? "," : "") + order[i];
  out += "\n";
  for (const auto& r : report.at("rows")) {
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i) out += ",";
      if (r.contains(order[i])) out += csv_cell(r.at(order[i]));
    }
    out += "\n";
  }
  return out;
}

int exit_status(const json& report) {
  const auto& s = report.at("summary");
  return s.at("failed").get<long>() + s.at("errors").get<long>() == 0 ? 0 : 1;
}

int main(int argc, char** argv) {
  CLI::App app{"Superbosonization identity checks and Wegner model ratios"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::vector<std::string> energies(2);
  double exact_tol = 0;
  bool class_given = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--class", cfg.classes, "symmetry classes: gl, o, sp or all (comma-separated)")
        ->delimiter(',')
        ->each([&](const std::string&) { class_given = true; });
    sub->add_option("--seed", cfg.mc.seed, "base seed");
    sub->add_option("--samples", cfg.mc.samples, "Monte Carlo samples per estimate");
    sub->add_option("--chunks", cfg.mc.chunks, "independent substreams per estimate");
    sub->add_option("--level", cfg.mc.level, "quadrature refinement level (1-3)");
    sub->add_option("--tolerance", cfg.tolerance, "relative bound for Monte Carlo rows");
    sub->add_option("--emit", cfg.emit, "json or csv");
    sub->add_option("--output,-o", cfg.output, "write the report here instead of stdout");
  };

  auto* verify = app.add_subcommand("verify", "run an identity check grid");
  verify->add_option("suite", cfg.suite, "bb, ff, shift, superboson, localization or measures")->required();
  verify->add_option("--n", cfg.n, "n values (comma-separated)")->delimiter(',');
  verify->add_option("--p", cfg.p, "p values (comma-separated)")->delimiter(',');
  verify->add_option("--q", cfg.q, "q values (comma-separated)")->delimiter(',');
  verify->add_option("--F", cfg.F, "integrand expression in x, y, sigma, tau, Q");
  verify->add_option("--proposal-scale", cfg.mc.proposal_scale, "Gaussian proposal scale; 0 picks by pilot run");
  auto* exact_opt = verify->add_option("--exact-tolerance", exact_tol, "bound for deterministic rows");
  verify->add_flag("--skip-invalid", cfg.skip_invalid, "drop grid points with p > n' instead of rejecting the grid");
  common(verify);

  auto* weg = app.add_subcommand("wegner", "ratio of characteristic polynomials by MC, SB and HS");
  weg->add_option("model", cfg.model_path, "model file")->required();
  weg->add_option("--E0", energies[0], "override E0 as re,im");
  weg->add_option("--E1", energies[1], "override E1 as re,im");
  weg->add_option("--methods", cfg.methods, "mc, sb, hs (comma-separated)")->delimiter(',');
  common(weg);

  auto* meas = app.add_subcommand("measures", "domain measure table with Gaussian-limit data");
  common(meas);

  try {
    app.parse(argc, argv);
    if (!energies[0].empty()) cfg.E0 = parse_energy_flag(energies[0]);
    if (!energies[1].empty()) cfg.E1 = parse_energy_flag(energies[1]);
    if (exact_opt->count()) cfg.exact_tolerance = exact_tol;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  cfg.command = verify->parsed() ? "verify" : weg->parsed() ? "wegner" : "measures";
  if (!class_given && (cfg.command == "measures" || cfg.suite == "measures")) cfg.classes = {"all"};

  json report;
  try {
    report = run(cfg);
  } catch (const UsageError& e) {
    std::cerr << "sbos: rejected: " << e.what() << "\n";
    return 2;
  }
  std::string text = render(report, cfg.emit);
  if (cfg.output.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(cfg.output, std::ios::binary);
    if (!out) {
      std::cerr << "sbos: cannot write '" << cfg.output << "'\n";
      return 2;
    }
    out << text;
  }
  return exit_status(report);
}

}  // namespace sbos::cli
