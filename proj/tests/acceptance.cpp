// Acceptance run: one PASS/FAIL line per criterion.
#include <bit>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sbos/cli.hpp"

using namespace sbos;
using cli::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

cli::RunConfig verify(const std::string& suite, std::vector<std::string> classes, std::vector<int> n,
                      std::vector<int> p, std::vector<int> q, long samples = 20000) {
  cli::RunConfig c;
  c.command = "verify";
  c.suite = suite;
  c.classes = std::move(classes);
  c.n = std::move(n);
  c.p = std::move(p);
  c.q = std::move(q);
  c.mc.samples = samples;
  c.mc.seed = 20240611;
  return c;
}

// Each criterion is a list of reports; reruns compare their dumps.
using Reports = std::vector<json>;

Outcome judge(const Reports& reports) {
  Outcome o;
  long rows = 0, bad = 0;
  double worst = 0;
  for (const auto& r : reports)
    for (const auto& row : r.at("rows")) {
      ++rows;
      bool ok = row.value("pass", false) && row.at("error").is_null();
      if (!ok) {
        ++bad;
        std::printf("    failing row: %s\n", row.dump().c_str());
      }
      if (row.contains("diff") && row.contains("sigma") && row["sigma"].is_number() &&
          row["sigma"].get<double>() > 0)
        worst = std::max(worst, row["diff"].get<double>() / row["sigma"].get<double>());
    }
  o.pass = bad == 0 && rows > 0;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%ld rows, %ld failing, max |diff|/sigma %.2f", rows, bad, worst);
  o.detail = buf;
  return o;
}

// ------------------------------------------------------------------ 1

GrassmannElement random_element(const ContextPtr& ctx, std::mt19937_64& rng, int parity = -1) {
  std::uniform_int_distribution<uint64_t> mask(0, ctx->full_mask());
  std::uniform_int_distribution<int> coef(-3, 3);
  std::vector<Term> ts;
  while (ts.size() < 6) {
    uint64_t m = mask(rng);
    if (parity >= 0 && std::popcount(m) % 2 != parity) continue;
    ts.push_back({m, cplx(coef(rng), coef(rng))});
  }
  return GrassmannElement::from_terms(ctx, ts);
}

Outcome grassmann_exactness() {
  std::mt19937_64 rng(1);
  long checks = 0, bad = 0;
  auto expect = [&](bool ok) {
    ++checks;
    bad += !ok;
  };
  for (int m = 1; m <= 8; ++m) {
    auto ctx = make_context(m);
    for (int rep = 0; rep < 200; ++rep) {
      auto a = random_element(ctx, rng), b = random_element(ctx, rng), c = random_element(ctx, rng);
      expect((a * b) * c == a * (b * c));
      int pa = rep % 2, pb = (rep / 2) % 2;
      auto ha = random_element(ctx, rng, pa), hb = random_element(ctx, rng, pb);
      expect(ha * hb == ((pa && pb) ? -(hb * ha) : hb * ha));
      expect(power(a.soul(), m + 1).is_zero());
      for (int k = 0; k < m; ++k) {
        auto g = GrassmannElement::generator(ctx, k);
        expect((g * g).is_zero());
      }
    }
  }
  // d^2/(d zeta d zetat) zetat zeta = 1 on each pair of the flat form, for up to 8 generators
  for (int n = 1; n <= 4; ++n) {
    auto L = make_flat_layout(n, 1);
    auto form = omega_v_form(L);
    GrassmannElement prod(L.ctx, 1.0), rev(L.ctx, 1.0);
    for (int j = 0; j < n; ++j) {
      auto z = GrassmannElement::generator(L.ctx, L.zeta(j, 0));
      auto zt = GrassmannElement::generator(L.ctx, L.zetat(0, j));
      if (n == 1) {
        expect(berezin(form, zt * z) == cplx(1.0));
        expect(berezin(form, z * zt) == cplx(-1.0));
      }
      prod = prod * (zt * z);
      rev = (zt * z) * rev;
    }
    expect(berezin(form, prod) == cplx(1.0));
    expect(berezin(form, rev) == cplx(1.0));
  }
  Outcome o;
  o.pass = bad == 0;
  o.detail = std::to_string(checks) + " exact checks, " + std::to_string(bad) + " failing";
  return o;
}

// ------------------------------------------------------------------ 2-8

Reports bb_reports() {
  return {cli::run(verify("bb", {"gl"}, {1, 2, 3, 4, 5, 6}, {1}, {0})),
          cli::run(verify("bb", {"gl"}, {2, 3, 4}, {2}, {0}))};
}

Reports ff_reports() {
  return {cli::run(verify("ff", {"gl"}, {1, 2, 3, 4, 5, 6}, {0}, {1})),
          cli::run(verify("ff", {"o"}, {2, 4, 6}, {0}, {1}))};
}

Reports shift_reports() { return {cli::run(verify("shift", {"gl", "o"}, {1}, {0}, {1}))}; }

Reports superboson_reports(long samples) {
  auto gl = verify("superboson", {"gl"}, {1, 2, 3}, {1, 2}, {1, 2}, samples);
  gl.skip_invalid = true;
  auto other = verify("superboson", {"o", "sp"}, {2}, {1}, {1}, samples);
  return {cli::run(gl), cli::run(other)};
}

Reports localization_reports() {
  return {cli::run(verify("localization", {"gl"}, {2}, {1}, {1})),
          cli::run(verify("localization", {"gl"}, {3}, {2}, {1}))};
}

Reports measures_reports() { return {cli::run(verify("measures", {"all"}, {1}, {1}, {1}))}; }

json model_json(int sites, const std::vector<double>& C, int n) {
  return {{"sites", sites}, {"C", C}, {"n", n}, {"E0", {0.5, 0.3}}, {"E1", {0.7, 0.0}}};
}

Reports wegner_reports() {
  Reports out;
  auto cfg = [](json m) {
    cli::RunConfig c;
    c.command = "wegner";
    c.model = std::move(m);
    c.mc.samples = 1000000;
    c.mc.seed = 20240611;
    return c;
  };
  for (int n = 1; n <= 3; ++n) out.push_back(cli::run(cfg(model_json(1, {1.0}, n))));
  // random positive-definite C with non-negative entries
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double c11 = 0.5 + u(rng), c22 = 0.5 + u(rng);
  double c12 = 0.9 * u(rng) * std::sqrt(c11 * c22);
  out.push_back(cli::run(cfg(model_json(2, {c11, c12, c12, c22}, 1))));
  return out;
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Reports()> reports;
};

}  // namespace

int main() {
  std::setvbuf(stdout, nullptr, _IONBF, 0);
  const long kSuperbosonSamples = 1000000;
  std::vector<Criterion> crit{
      {2, "boson-boson sector", 30, bb_reports},
      {3, "fermion-fermion sector", 10, ff_reports},
      {4, "shift lemma", 10, shift_reports},
      {5, "superbosonization grid", 600, [&] { return superboson_reports(kSuperbosonSamples); }},
      {6, "localization and Ward identities", 60, localization_reports},
      {7, "measure normalizations", 60, measures_reports},
      {8, "Wegner three-way agreement", 300, wegner_reports},
  };

  bool all = true;
  auto line = [&](int id, const char* name, const Outcome& o, double secs, double limit) {
    bool ok = o.pass && secs < limit;
    all = all && ok;
    std::printf("criterion %d %-34s %s  (%.1f s, limit %.0f s) %s\n", id, name, ok ? "PASS" : "FAIL", secs, limit,
                o.detail.c_str());
  };

  auto t0 = Clock::now();
  auto g = grassmann_exactness();
  line(1, "grassmann exactness", g, std::chrono::duration<double>(Clock::now() - t0).count(), 5);

  std::vector<std::string> first;
  for (const auto& c : crit) {
    auto t = Clock::now();
    Outcome o;
    Reports r;
    try {
      r = c.reports();
      o = judge(r);
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    line(c.id, c.name, o, std::chrono::duration<double>(Clock::now() - t).count(), c.limit_seconds);
    std::string dump;
    for (const auto& j : r) dump += cli::render(j, "json") + cli::render(j, "csv");
    first.push_back(dump);
  }

  // 9: rerun every criterion with the same seeds; the grid is rerun at a tenth of the samples
  // against a fresh first run at that size
  auto t9 = Clock::now();
  Outcome rep;
  long compared = 0, differ = 0;
  for (std::size_t k = 0; k < crit.size(); ++k) {
    std::string a = first[k], b;
    std::function<Reports()> again = crit[k].reports;
    if (crit[k].id == 5) {
      again = [&] { return superboson_reports(kSuperbosonSamples / 10); };
      a.clear();
      for (const auto& j : again()) a += cli::render(j, "json") + cli::render(j, "csv");
    }
    try {
      for (const auto& j : again()) b += cli::render(j, "json") + cli::render(j, "csv");
    } catch (const std::exception& ex) {
      b = ex.what();
    }
    ++compared;
    if (a != b) {
      ++differ;
      std::printf("    criterion %d report differs on rerun\n", crit[k].id);
    }
  }
  rep.pass = differ == 0;
  rep.detail = std::to_string(compared) + " criteria rerun, " + std::to_string(differ) + " reports differ";
  line(9, "byte-identical reruns", rep, std::chrono::duration<double>(Clock::now() - t9).count(), 1200);

  std::printf("acceptance: %s\n", all ? "PASS" : "FAIL");
  return all ? 0 : 1;
}
