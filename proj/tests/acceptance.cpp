// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "orbit_census/experiment.hpp"

using namespace orbit_census;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

unsigned hw_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(3);
  ss << v;
  return ss.str();
}

// Integer matrix power trace, independent of the enumerator.
std::uint64_t trace_power(const std::vector<std::vector<int>>& a, int n) {
  const std::size_t k = a.size();
  std::vector<std::vector<std::uint64_t>> p(k, std::vector<std::uint64_t>(k, 0));
  for (std::size_t i = 0; i < k; ++i) p[i][i] = 1;
  for (int step = 0; step < n; ++step) {
    std::vector<std::vector<std::uint64_t>> next(k, std::vector<std::uint64_t>(k, 0));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t l = 0; l < k; ++l)
        for (std::size_t j = 0; j < k; ++j) next[i][j] += p[i][l] * static_cast<std::uint64_t>(a[l][j]);
    p = next;
  }
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < k; ++i) t += p[i][i];
  return t;
}

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  EnumerationOptions e;
  e.parallelism.workers = hw_workers();
  Outcome out;
  for (const auto& a : {TransitionMatrix::full_shift(2), TransitionMatrix::no_repeat(3)}) {
    const bool norep = a.size() == 3;
    for (int n = 1; n <= 20; ++n) {
      const auto count = enumerate_periodic(a, n, e).size();
      std::uint64_t expect = trace_power(a.rows(), n);
      if (norep) {
        const std::int64_t closed = (std::int64_t{1} << n) + 2 * (n % 2 ? -1 : 1);
        if (static_cast<std::int64_t>(expect) != closed) out.pass = false;
      }
      if (count != expect) {
        out.pass = false;
        out.detail += " mismatch kappa=" + std::to_string(a.size()) + " n=" + std::to_string(n);
      }
    }
  }
  const double dt = seconds_since(t0);
  if (dt >= 10.0) out.pass = false;
  out.detail = "trace identity n<=20 on full 2-shift and no-repeat 3-shift, " + fmt(dt) + " s" + out.detail;
  return out;
}

Outcome criterion2() {
  const auto f = bundled::golden();
  const auto prof = pressure_profile(f);
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0, x = (std::sqrt(5.0) - 1.0) / 2.0;
  const double errs[] = {std::abs(prof.P - std::log(phi)), std::abs(prof.alpha - (2.0 - x)),
                         std::abs(prof.sigma0_sq - x * (1.0 - x)), std::abs(prof.entropy - prof.P * prof.alpha)};
  const double worst_const = *std::max_element(std::begin(errs), std::end(errs));
  EnumerationOptions e;
  e.parallelism.workers = hw_workers();
  e.budget = std::uint64_t{1} << 30;
  using R = long double;
  const R P = static_cast<R>(prof.P);
  R worst_sum = 0;
  for (int n = 1; n <= 30; ++n) {
    const R total = reduce_periodic_sums<R>(
        f, n, e, R(0), [&](R& acc, WordView, R s) { acc += std::exp(-P * s); }, [](R& t, const R& p) { t += p; });
    worst_sum = std::max(worst_sum, std::abs(total - R(1)));
  }
  Outcome out;
  out.pass = worst_const <= 1e-9 && worst_sum <= R(1e-12);
  out.detail = "golden P, alpha, sigma0^2, h=P alpha max err " + fmt(worst_const) +
               "; max |sum e^{-P f^n} - 1| over n<=30 = " + fmt(static_cast<double>(worst_sum));
  return out;
}

Outcome criterion3() {
  std::vector<std::pair<std::string, Potential>> pots{
      {"golden", bundled::golden()}, {"random-depth2", bundled::random_depth2()}, {"theorem1", bundled::theorem1()}};
  const auto scene = BilliardScene::symmetric_three(6.0, 1.0);
  GeometricPotentialOptions g;
  g.sinai.parallelism.workers = hw_workers();
  for (int k = 2; k <= 6; ++k) pots.push_back({"billiard-k" + std::to_string(k), geometric_potential(scene, k, g)});
  double worst = 0;
  std::string worst_name;
  for (const auto& [name, f] : pots) {
    const auto prof = pressure_profile(f);
    const double gap = std::abs(prof.entropy - prof.P * prof.alpha);
    if (gap >= worst) worst = gap, worst_name = name;
  }
  return {worst <= 1e-8, "variational |h - P alpha| max " + fmt(worst) + " (" + worst_name + ") over " +
                             std::to_string(pots.size()) + " potentials"};
}

Outcome criterion4() {
  const auto f = bundled::random_depth2();
  const auto prof = pressure_profile(f);
  EnumerationOptions e;
  e.parallelism.workers = hw_workers();
  const auto t0 = lemma1_residual(f, prof, 0.0, f.depth(), 20, e);
  double worst = 0;
  for (const auto& r : t0.rows) worst = std::max(worst, std::abs(r.residual - r.spectral) / std::abs(r.spectral));
  const auto t1 = lemma1_residual(f, prof, 0.1, 2, 20, e);
  Outcome out;
  out.pass = worst <= 1e-9 && t1.theta_hat < 1.0 && t1.fit_r2 > 0.99;
  out.detail = "trace residual u=0 max rel |r_n - spectral| " + fmt(worst) + "; u=0.1 theta_hat " + fmt(t1.theta_hat) +
               " R^2 " + fmt(t1.fit_r2);
  return out;
}

Outcome criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto f = bundled::theorem1();
  const auto prof = pressure_profile(f);
  CensusOptions co;
  co.enumeration.parallelism.workers = hw_workers();
  Outcome out;
  std::string parts;
  for (double mult : {0.0, 0.5, 1.0}) {
    const double z = mult * prof.alpha;
    std::vector<double> ratios;
    for (int n = 12; n <= 20; ++n)
      ratios.push_back(count_fixed_in_window(f, prof, WindowQuery{z, -1.0, 1.0, 0.05, n}, co).summary().ratio);
    std::vector<double> dev;
    bool band = true;
    for (std::size_t i = 0; i + 4 <= ratios.size(); ++i) {
      const double mean = (ratios[i] + ratios[i + 1] + ratios[i + 2] + ratios[i + 3]) / 4.0;
      band = band && mean >= 0.5 && mean <= 2.0;
      dev.push_back(std::abs(mean - 1.0));
    }
    // least-squares slope of the deviations against block index
    const double m = static_cast<double>(dev.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < dev.size(); ++i) {
      sx += i, sy += dev[i], sxx += double(i) * i, sxy += i * dev[i];
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const bool toward = slope < 0.0 && dev.back() < dev.front();
    out.pass = out.pass && band && toward;
    parts += " z=" + fmt(mult) + "*alpha: |dev| " + fmt(dev.front()) + "->" + fmt(dev.back()) + (band ? "" : " OUT-OF-BAND") +
             (toward ? "" : " NOT-TOWARD-1") + ";";
  }
  const double dt = seconds_since(t0);
  if (dt >= 600.0) out.pass = false;
  out.detail = "point-count block-of-4 ratios n in [12,20]" + parts + " " + fmt(dt) + " s";
  return out;
}

Outcome criterion6() {
  const auto scene = BilliardScene::symmetric_three(6.0, 1.0);
  Outcome out;
  out.pass = scene.certificate().pass;
  double two_err = 0, tri_err = 0, worst_res = 0, worst_rev = 0;
  for (const auto& code : primitive_orbit_words(scene.coding_matrix(), 2))
    two_err = std::max(two_err, std::abs(solve_orbit(scene, code).total_length - 8.0));
  tri_err = std::abs(solve_orbit(scene, Word{0, 1, 2}).total_length - 3.0 * (6.0 - std::sqrt(3.0)));
  EnumerationOptions e;
  e.parallelism.workers = hw_workers();
  for (int n = 2; n <= 10; ++n)
    for (const auto& code : primitive_orbit_words(scene.coding_matrix(), n)) {
      const auto path = solve_orbit(scene, code);
      Word rev(code.rbegin(), code.rend());
      const auto back = solve_orbit(scene, rev);
      worst_res = std::max({worst_res, path.residual, back.residual});
      if (!path.converged || !back.converged) out.pass = false;
      worst_rev = std::max(worst_rev, std::abs(path.total_length - back.total_length));
    }
  out.pass = out.pass && two_err <= 1e-10 && tri_err <= 1e-9 && worst_res <= 1e-12 && worst_rev <= 1e-12;
  out.detail = std::string("3-disk (H) ") + (scene.certificate().pass ? "ok" : "FAILS") + "; 2-orbit err " +
               fmt(two_err) + "; 123 err " + fmt(tri_err) + "; max residual n<=10 " + fmt(worst_res) +
               "; max reversal gap " + fmt(worst_rev);
  return out;
}

Outcome criterion7() {
  std::vector<std::pair<std::string, Potential>> pots{
      {"golden", bundled::golden()}, {"random-depth2", bundled::random_depth2()}, {"theorem1", bundled::theorem1()}};
  struct Query {
    double zmult, p, q, delta, ramp;
  };
  const std::vector<Query> queries{{0.0, -1.0, 1.0, 0.05, 0.25}, {0.5, -1.0, 1.0, 0.05, 0.25},
                                   {1.0, -1.0, 1.0, 0.05, 0.1},  {0.3, -0.5, 1.5, 0.2, 0.4},
                                   {0.7, -2.0, 0.5, 0.1, 0.5}};
  CensusOptions co;
  co.enumeration.parallelism.workers = hw_workers();
  int checks = 0, failures = 0;
  for (const auto& [name, f] : pots) {
    const auto prof = pressure_profile(f);
    for (const auto& qy : queries) {
      const auto [lo, hi] = bracketing_bumps(qy.p, qy.q, qy.ramp);
      const double z = qy.zmult * prof.alpha;
      for (int n = 1; n <= 16; ++n) {
        const double count =
            count_fixed_in_window(f, prof, WindowQuery{z, qy.p, qy.q, qy.delta, n}, co).summary().empirical;
        const double s_lo = smoothed_sum(f, prof, lo, z, qy.delta, n, co).value;
        const double s_hi = smoothed_sum(f, prof, hi, z, qy.delta, n, co).value;
        ++checks;
        if (!(s_lo <= count && count <= s_hi)) ++failures;
      }
    }
  }
  return {failures == 0, "squeeze chi- <= count <= chi+ on " + std::to_string(checks) + " (potential, window, n<=16) cases, " +
                             std::to_string(failures) + " violations"};
}

int mobius(int n) {
  int result = 1;
  for (int p = 2; p * p <= n; ++p)
    if (n % p == 0) {
      n /= p;
      if (n % p == 0) return 0;
      result = -result;
    }
  return n > 1 ? -result : result;
}

Outcome criterion8() {
  const auto scene = BilliardScene::symmetric_three(6.0, 1.0);
  const auto a = scene.coding_matrix();
  const double d0 = scene.min_gap(), d1 = scene.max_span();
  EnumerationOptions e;
  e.parallelism.workers = hw_workers();
  Outcome out;
  const int n_max = 12;
  const auto prof = pressure_profile(geometric_potential(scene, bundled::kBilliardDepth));
  int m_cap = n_max;
  for (int n = 2; n <= n_max; ++n)
    for (double mult : {0.0, 0.5, 1.0})
      m_cap = std::max(m_cap, period_range(WindowQuery{mult * prof.alpha, -1.0, 1.0, 0.05, n}, prof.alpha, d0, d1).second);
  // solve every primitive class up to m_cap from the raw enumeration
  std::vector<OrbitPeriod> solved;
  for (int n = 2; n <= m_cap; ++n) {
    std::map<Word, int> class_size;
    std::uint64_t points = 0;
    for (const auto& w : enumerate_periodic(a, n, e)) {
      if (minimal_period(w) != w.size()) continue;
      ++points;
      Word canon = w;
      for (std::size_t s = 1; s < w.size(); ++s) canon = std::min(canon, rotate(w, s));
      ++class_size[canon];
    }
    std::int64_t mobius_points = 0;
    for (int d = 1; d <= n; ++d)
      if (n % d == 0) mobius_points += mobius(n / d) * static_cast<std::int64_t>(trace_power(a.rows(), d));
    if (static_cast<std::int64_t>(points) != mobius_points) out.pass = false;
    if (points != class_size.size() * static_cast<std::uint64_t>(n)) out.pass = false;
    for (const auto& [canon, size] : class_size) {
      if (size != n) out.pass = false;
      const double len = solve_orbit(scene, canon).total_length;
      if (len < n * d0 || len > n * d1) out.pass = false;
      solved.push_back(OrbitPeriod{canon, n, len});
    }
  }
  // the library spectrum lists the same orbits with the same lengths
  const auto spectrum = length_spectrum(scene, m_cap, e);
  if (spectrum.size() != solved.size()) out.pass = false;
  std::map<Word, double> by_code;
  for (const auto& s : solved) by_code[s.code] = s.period;
  for (const auto& s : spectrum) {
    const auto it = by_code.find(s.orbit.canonical_word);
    if (it == by_code.end() || std::abs(it->second - s.length) > 1e-9) out.pass = false;
  }
  // windows: every solved orbit in the window has m inside the period range, and
  // tabulated counts agree with a direct count
  PressureProfile geo = prof;
  geo.d0 = d0;
  geo.d1 = d1;
  int windows = 0;
  for (int n = 2; n <= n_max; ++n)
    for (double mult : {0.0, 0.5, 1.0}) {
      const WindowQuery q{mult * prof.alpha, -1.0, 1.0, 0.05, n};
      const auto [m_lo, m_hi] = period_range(q, prof.alpha, d0, d1);
      std::map<int, int> direct;
      int total = 0;
      for (const auto& s : solved)
        if (s.period >= q.lower(prof.alpha) && s.period <= q.upper(prof.alpha)) {
          if (s.m < m_lo || s.m > m_hi) out.pass = false;
          ++direct[s.m];
          ++total;
        }
      const auto rep = tabulate_orbits(solved, geo, q, std::max(2, m_lo), m_hi);
      if (rep.summary().empirical != total) out.pass = false;
      for (const auto& row : rep.rows)
        if (row.m != 0 && row.empirical != direct[row.m]) out.pass = false;
      ++windows;
    }
  out.detail = "3-disk windows n<=12, orbits m<=" + std::to_string(m_cap) + ": " + std::to_string(solved.size()) +
               " primitive orbits; points = n x orbits = Mobius count; periods in [n d0, n d1]; " +
               std::to_string(windows) + " windows within m-range";
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion9() {
  const auto root = fs::temp_directory_path() / "orbit_census_acceptance_determinism";
  fs::remove_all(root);
  Outcome out;
  const std::vector<std::pair<std::string, unsigned>> runs{{"a", 1}, {"b", 1}, {"c", 8}};
  for (const auto& suite : suite_names())
    for (const auto& [tag, workers] : runs) {
      const auto dir = root / tag;
      const std::string cmd = std::string(ORBIT_CENSUS_CLI) + " --workers " + std::to_string(workers) + " --out " +
                              dir.string() + " reproduce " + suite + " >/dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) {
        out.pass = false;
        out.detail += " " + suite + " run failed;";
      }
    }
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    if (entry.path().extension() != ".csv") continue;
    const auto name = entry.path().filename();
    const auto ref = slurp(entry.path());
    for (const char* other : {"b", "c"})
      if (!fs::exists(root / other / name) || slurp(root / other / name) != ref) {
        out.pass = false;
        out.detail += " " + name.string() + " differs in " + other + ";";
      }
    ++compared;
  }
  if (compared == 0) out.pass = false;
  out.detail = "reproduce theorem1/2/4: " + std::to_string(compared) +
               " CSVs byte-identical across two 1-worker runs and one 8-worker run" + out.detail;
  return out;
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9};
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << "criterion " << i + 1 << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
