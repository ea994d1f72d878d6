#pragma once

// Counting functionals over periodic orbits: window counts, the multi-period
// count I(z,p,q;eps_n), primitive orbit statistics, smoothed sums, and the
// residual diagnostics for the transfer-operator trace formulas.
//
// Windows are closed, [z + n alpha + p eps_n, z + n alpha + q eps_n], and
// membership is decided by exact comparison of the computed double value.
// A period within ~1e-12 of an endpoint is numerically ambiguous.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "orbit_census/csv.hpp"
#include "orbit_census/error.hpp"
#include "orbit_census/potential.hpp"
#include "orbit_census/symbolic.hpp"
#include "orbit_census/transfer.hpp"

namespace orbit_census {

inline constexpr double kLatticeSigmaFloor = 1e-12;

struct WindowQuery {
  double z = 0.0;
  double p = -1.0;
  double q = 1.0;
  double delta = 0.05;
  int n = 1;

  void validate() const {
    if (!(delta > 0.0)) fail(ErrorKind::InvalidInput, "delta must be positive");
    if (!(p < q)) fail(ErrorKind::InvalidInput, "window needs p < q");
    if (n < 1) fail(ErrorKind::InvalidInput, "n must be >= 1");
    if (!std::isfinite(z)) fail(ErrorKind::InvalidInput, "z must be finite");
  }
  double epsilon() const { return std::exp(-delta * n); }
  double center(double alpha) const { return z + n * alpha; }
  double lower(double alpha) const { return center(alpha) + p * epsilon(); }
  double upper(double alpha) const { return center(alpha) + q * epsilon(); }
};

struct CensusOptions {
  EnumerationOptions enumeration{};
  std::optional<double> rho_hat;               // fitted decay rate, for the delta-regime flag
  std::optional<LatticeVerdict> screen;        // non-lattice screen verdict, echoed in flags
  std::vector<double> a_values{1.0};           // free parameter of the bracket lower bound
  std::vector<std::string> extra_flags;        // caller-supplied disclosures
};

struct CensusRow {
  int n = 0;
  int m = 0;  // 0 marks a total row
  double z = 0, p = 0, q = 0, delta = 0, epsilon = 0;
  double empirical = 0.0;
  double predicted = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();
  std::string flags;
};

struct Bracket {
  double a = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct CensusReport {
  std::vector<CensusRow> rows;  // sorted by n, then m
  std::vector<Bracket> brackets;
  int m_lo = 0, m_hi = 0;

  const CensusRow& summary() const {
    for (const auto& r : rows)
      if (r.m == 0) return r;
    return rows.front();
  }
};

namespace detail {

inline double ratio_of(double empirical, double predicted) {
  return predicted > 0.0 && std::isfinite(predicted) ? empirical / predicted : std::numeric_limits<double>::quiet_NaN();
}

inline bool lattice_suspected(const PressureProfile& prof) { return !(prof.sigma0_sq >= kLatticeSigmaFloor); }

inline std::string hypothesis_flags(const PressureProfile& prof, const WindowQuery& q, const CensusOptions& opts) {
  std::vector<std::string> flags;
  if (lattice_suspected(prof)) flags.push_back("lattice-suspected");
  if (opts.screen) flags.push_back("screen=" + std::string(to_string(*opts.screen)));
  if (opts.rho_hat && *opts.rho_hat > 0.0 && *opts.rho_hat < 1.0 && q.delta >= -std::log(*opts.rho_hat) / 3.0)
    flags.push_back("out-of-regime");
  if (q.z < 0.0 || q.z > prof.alpha) flags.push_back("z-outside-0-alpha");
  for (const auto& f : opts.extra_flags) flags.push_back(f);
  std::string out;
  for (const auto& f : flags) out += (out.empty() ? "" : ";") + f;
  return out;
}

inline CensusRow make_row(const WindowQuery& q, int m, double empirical, double predicted, std::string flags) {
  CensusRow row;
  row.n = q.n;
  row.m = m;
  row.z = q.z;
  row.p = q.p;
  row.q = q.q;
  row.delta = q.delta;
  row.epsilon = q.epsilon();
  row.empirical = empirical;
  row.predicted = predicted;
  row.ratio = ratio_of(empirical, predicted);
  row.flags = std::move(flags);
  return row;
}

// e^{P(z + n alpha)} (q - p) eps_n, the common prefactor of all predictions.
inline double prefactor(const PressureProfile& prof, const WindowQuery& q) {
  return std::exp(prof.P * q.center(prof.alpha)) * (q.q - q.p) * q.epsilon();
}

inline bool in_window(double value, double lo, double hi) { return value >= lo && value <= hi; }

}  // namespace detail

// Point-count prediction: e^{P(z+n alpha)} (q-p) eps_n / (sqrt(2 pi) sigma0 sqrt(n)).
inline double predicted_fixed_count(const PressureProfile& prof, const WindowQuery& q) {
  if (detail::lattice_suspected(prof)) return std::numeric_limits<double>::quiet_NaN();
  return detail::prefactor(prof, q) / (std::sqrt(2.0 * std::numbers::pi * q.n) * std::sqrt(prof.sigma0_sq));
}

// Two-sided bracket for I(z,p,q;eps_n), without the o(1) terms.
inline Bracket theorem2_bracket(const PressureProfile& prof, const WindowQuery& q, double a) {
  if (!(a > 0.0)) fail(ErrorKind::InvalidInput, "bracket parameter a must be positive");
  Bracket b;
  b.a = a;
  if (detail::lattice_suspected(prof)) {
    b.lower = b.upper = std::numeric_limits<double>::quiet_NaN();
    return b;
  }
  const double sigma0 = std::sqrt(prof.sigma0_sq);
  const double r = std::numbers::pi / (4.0 * prof.alpha);
  const double pre = detail::prefactor(prof, q);
  b.lower = pre / (std::sqrt(std::numbers::pi * q.n) * sigma0) * 2.0 * r / a;
  b.upper = pre * 2.0 * std::sqrt(2.0 * q.n) / (std::sqrt(std::numbers::pi) * sigma0) *
            (std::sqrt(prof.alpha / prof.d0) - std::sqrt(prof.alpha / prof.d1));
  return b;
}

// Primitive orbits with exactly n symbols: e^{P(z+n alpha)} (q-p) eps_n / (sqrt(2 pi) n sqrt(n) sigma0).
inline double predicted_orbit_count(const PressureProfile& prof, const WindowQuery& q) {
  return predicted_fixed_count(prof, q) / q.n;
}

// Periods m allowed by m d0 <= T <= m d1 for T in the window.
inline std::pair<int, int> period_range(const WindowQuery& q, double alpha, double d0, double d1) {
  if (!(d0 > 0.0) || d1 < d0) fail(ErrorKind::PositivityViolated, "period range needs 0 < d0 <= d1");
  const double lo = q.lower(alpha), hi = q.upper(alpha);
  const int m_lo = std::max(1, static_cast<int>(std::ceil(lo / d1 - 1e-9)));
  const int m_hi = static_cast<int>(std::floor(hi / d0 + 1e-9));
  return {m_lo, m_hi};
}

// ---------------------------------------------------------------------------
// Points of Fix(sigma^n) with f^n in the window

inline std::uint64_t count_sums_in_window(const Potential& f, int n, double lo, double hi,
                                          const EnumerationOptions& opts = {}) {
  return reduce_periodic_sums<double>(
      f, n, opts, std::uint64_t{0},
      [&](std::uint64_t& c, WordView, double s) { c += detail::in_window(s, lo, hi); },
      [](std::uint64_t& total, std::uint64_t part) { total += part; }, SumBounds<double>{lo, hi});
}

inline CensusReport count_fixed_in_window(const Potential& f, const PressureProfile& prof, const WindowQuery& q,
                                          const CensusOptions& opts = {}) {
  q.validate();
  const double lo = q.lower(prof.alpha), hi = q.upper(prof.alpha);
  const auto count = count_sums_in_window(f, q.n, lo, hi, opts.enumeration);
  CensusReport report;
  report.m_lo = report.m_hi = q.n;
  report.rows.push_back(detail::make_row(q, q.n, static_cast<double>(count), predicted_fixed_count(prof, q),
                                         detail::hypothesis_flags(prof, q, opts)));
  return report;
}

// ---------------------------------------------------------------------------
// Points periodic under some m in the range, counted once

// Per-m rows count the words of Fix(sigma^m) in the window. The total row
// identifies a point by its primitive root: a word w = r^j of minimal period
// d is skipped when some shorter power r^i (i < j, i d in range) already hit.
inline CensusReport count_I(const Potential& f, const PressureProfile& prof, const WindowQuery& q,
                            const CensusOptions& opts = {}) {
  q.validate();
  const double lo = q.lower(prof.alpha), hi = q.upper(prof.alpha);
  const auto [m_lo, m_hi] = period_range(q, prof.alpha, f.d0(), f.d1());
  struct Partial {
    std::uint64_t points = 0;
    std::uint64_t unique = 0;
  };
  CensusReport report;
  report.m_lo = m_lo;
  report.m_hi = m_hi;
  const std::string flags = detail::hypothesis_flags(prof, q, opts);
  std::uint64_t unique_total = 0;
  std::vector<CensusRow> per_m;
  for (int m = m_lo; m <= m_hi; ++m) {
    const int first_m = m_lo;
    const auto part = reduce_periodic_sums<double>(
        f, m, opts.enumeration, Partial{},
        [&](Partial& acc, WordView w, double s) {
          if (!detail::in_window(s, lo, hi)) return;
          ++acc.points;
          const std::size_t d = minimal_period(w);
          const std::size_t reps = w.size() / d;
          for (std::size_t i = 1; i < reps; ++i) {
            if (static_cast<int>(i * d) < first_m) continue;
            Word power;
            power.reserve(i * d);
            for (std::size_t r = 0; r < i; ++r) power.insert(power.end(), w.begin(), w.begin() + d);
            if (detail::in_window(birkhoff_sum(f, power), lo, hi)) return;
          }
          ++acc.unique;
        },
        [](Partial& total, const Partial& p) {
          total.points += p.points;
          total.unique += p.unique;
        },
        SumBounds<double>{lo, hi});
    unique_total += part.unique;
    per_m.push_back(detail::make_row(q, m, static_cast<double>(part.points), std::numeric_limits<double>::quiet_NaN(),
                                     flags.empty() ? "per-m" : flags + ";per-m"));
  }
  for (double a : opts.a_values) report.brackets.push_back(theorem2_bracket(prof, q, a));
  const double upper = theorem2_bracket(prof, q, 1.0).upper;
  report.rows.push_back(detail::make_row(q, 0, static_cast<double>(unique_total), upper,
                                         flags.empty() ? "upper-bound" : flags + ";upper-bound"));
  report.rows.insert(report.rows.end(), per_m.begin(), per_m.end());
  return report;
}

// ---------------------------------------------------------------------------
// Primitive orbits

struct OrbitPeriod {
  Word code;  // canonical primitive word
  int m = 0;
  double period = 0.0;
};

// Primitive orbits with m in [m_lo, m_hi] and f-period in [lo, hi], sorted by (m, code).
inline std::vector<OrbitPeriod> primitive_orbit_periods(const Potential& f, int m_lo, int m_hi, double lo, double hi,
                                                        const EnumerationOptions& opts = {}) {
  std::vector<OrbitPeriod> out;
  for (int m = std::max(1, m_lo); m <= m_hi; ++m) {
    auto part = reduce_periodic_sums<double>(
        f, m, opts, std::vector<OrbitPeriod>{},
        [&](std::vector<OrbitPeriod>& acc, WordView w, double s) {
          if (detail::in_window(s, lo, hi) && is_canonical(w) && minimal_period(w) == w.size())
            acc.push_back(OrbitPeriod{Word(w.begin(), w.end()), m, s});
        },
        [](std::vector<OrbitPeriod>& total, const std::vector<OrbitPeriod>& p) {
          total.insert(total.end(), p.begin(), p.end());
        },
        SumBounds<double>{lo, hi});
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

// Tabulates orbit periods (from any source) against the window. Rows: the
// total (m = 0), then one row per m in [m_lo, m_hi]; the m = n row carries
// the prediction for orbits with exactly n symbols.
inline CensusReport tabulate_orbits(const std::vector<OrbitPeriod>& periods, const PressureProfile& prof,
                                    const WindowQuery& q, int m_lo, int m_hi, const CensusOptions& opts = {}) {
  q.validate();
  const double lo = q.lower(prof.alpha), hi = q.upper(prof.alpha);
  std::map<int, std::uint64_t> per_m;
  for (int m = m_lo; m <= m_hi; ++m) per_m[m] = 0;
  std::uint64_t total = 0;
  for (const auto& o : periods) {
    if (!detail::in_window(o.period, lo, hi)) continue;
    ++per_m[o.m];
    ++total;
  }
  CensusReport report;
  report.m_lo = m_lo;
  report.m_hi = m_hi;
  const std::string flags = detail::hypothesis_flags(prof, q, opts);
  for (double a : opts.a_values) report.brackets.push_back(theorem2_bracket(prof, q, a));
  report.rows.push_back(detail::make_row(q, 0, static_cast<double>(total), std::numeric_limits<double>::quiet_NaN(),
                                         flags));
  for (const auto& [m, count] : per_m) {
    const double predicted = m == q.n ? predicted_orbit_count(prof, q) : std::numeric_limits<double>::quiet_NaN();
    report.rows.push_back(detail::make_row(q, m, static_cast<double>(count), predicted, flags));
  }
  return report;
}

inline CensusReport count_primitive_orbits_in_window(const Potential& f, const PressureProfile& prof,
                                                     const WindowQuery& q, const CensusOptions& opts = {}) {
  q.validate();
  const auto [m_lo, m_hi] = period_range(q, prof.alpha, f.d0(), f.d1());
  const auto periods =
      primitive_orbit_periods(f, m_lo, m_hi, q.lower(prof.alpha), q.upper(prof.alpha), opts.enumeration);
  return tabulate_orbits(periods, prof, q, m_lo, m_hi, opts);
}

// ---------------------------------------------------------------------------
// Smoothed sums

struct BumpSpec {
  enum class Family { Poly4, Plateau };
  Family family = Family::Poly4;
  double center = 0.0;      // Poly4
  double half_width = 1.0;  // Poly4
  double plateau_lo = 0.0;  // Plateau: value 1 on [plateau_lo, plateau_hi]
  double plateau_hi = 0.0;
  double ramp = 0.25;       // Plateau: C^3 ramps of this width outside the plateau
  double height = 1.0;

  static BumpSpec poly4(double center = 0.0, double half_width = 1.0, double height = 1.0) {
    BumpSpec b;
    b.family = Family::Poly4;
    b.center = center;
    b.half_width = half_width;
    b.height = height;
    return b;
  }
  static BumpSpec plateau(double lo, double hi, double ramp, double height = 1.0) {
    BumpSpec b;
    b.family = Family::Plateau;
    b.plateau_lo = lo;
    b.plateau_hi = hi;
    b.ramp = ramp;
    b.height = height;
    return b;
  }

  void validate() const {
    if (!(height > 0.0) || !std::isfinite(height)) fail(ErrorKind::InvalidInput, "bump height must be positive");
    if (family == Family::Poly4) {
      if (!(half_width > 0.0)) fail(ErrorKind::InvalidInput, "bump half-width must be positive");
    } else {
      if (!(ramp > 0.0)) fail(ErrorKind::InvalidInput, "bump ramp must be positive");
      if (!(plateau_lo <= plateau_hi)) fail(ErrorKind::InvalidInput, "plateau needs lo <= hi");
    }
  }

  std::pair<double, double> support() const {
    if (family == Family::Poly4) return {center - half_width, center + half_width};
    return {plateau_lo - ramp, plateau_hi + ramp};
  }

  // Exact integral over the real line.
  double mass() const {
    if (family == Family::Poly4) return 256.0 / 315.0 * half_width * height;
    return (plateau_hi - plateau_lo + ramp) * height;
  }

  double operator()(double y) const {
    if (family == Family::Poly4) {
      const double t = (y - center) / half_width;
      if (!(std::abs(t) < 1.0)) return 0.0;
      const double u = 1.0 - t * t;
      return height * (u * u) * (u * u);
    }
    if (y >= plateau_lo && y <= plateau_hi) return height;
    if (y <= plateau_lo - ramp || y >= plateau_hi + ramp) return 0.0;
    const double t = y < plateau_lo ? (y - (plateau_lo - ramp)) / ramp : (plateau_hi + ramp - y) / ramp;
    return height * smoothstep(t);
  }

  // 35t^4 - 84t^5 + 70t^6 - 20t^7: C^3 at both ends, integral 1/2.
  static double smoothstep(double t) {
    const double t4 = t * t * t * t;
    return std::clamp(t4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t))), 0.0, 1.0);
  }
};

// chi_minus <= 1_[p,q] <= chi_plus.
inline std::pair<BumpSpec, BumpSpec> bracketing_bumps(double p, double q, double ramp) {
  if (!(ramp > 0.0) || !(q - p > 2.0 * ramp))
    fail(ErrorKind::InvalidInput, "bracketing bumps need 0 < 2 ramp < q - p");
  return {BumpSpec::plateau(p + ramp, q - ramp, ramp), BumpSpec::plateau(p, q, ramp)};
}

struct SmoothedSum {
  int n = 0;
  double z = 0.0, delta = 0.0, epsilon = 0.0;
  double value = 0.0;
  double predicted = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();
  std::string flags;
};

// S_n = sum over Fix(sigma^n) of chi((f^n - n alpha - z) / eps_n).
inline SmoothedSum smoothed_sum(const Potential& f, const PressureProfile& prof, const BumpSpec& chi, double z,
                                double delta, int n, const CensusOptions& opts = {}) {
  chi.validate();
  if (detail::lattice_suspected(prof))
    fail(ErrorKind::LatticeSuspected, "sigma0^2 = " + csv::format_real(prof.sigma0_sq) + " is below the floor");
  const WindowQuery q{z, chi.support().first, chi.support().second, delta, n};
  q.validate();
  const double eps = q.epsilon();
  const double shift = n * prof.alpha;
  const auto total = reduce_periodic_sums<double>(
      f, n, opts.enumeration, 0.0L,
      [&](long double& acc, WordView, double s) { acc += chi(((s - shift) - z) / eps); },
      [](long double& t, long double p) { t += p; }, SumBounds<double>{q.lower(prof.alpha), q.upper(prof.alpha)});
  SmoothedSum out;
  out.n = n;
  out.z = z;
  out.delta = delta;
  out.epsilon = eps;
  out.value = static_cast<double>(total);
  out.predicted = std::exp(prof.P * (z + shift)) * eps * chi.mass() /
                  (std::sqrt(2.0 * std::numbers::pi * n) * std::sqrt(prof.sigma0_sq));
  out.ratio = detail::ratio_of(out.value, out.predicted);
  out.flags = detail::hypothesis_flags(prof, q, opts);
  return out;
}

// ---------------------------------------------------------------------------
// Trace-formula residuals

struct Lemma1Row {
  int n = 0;
  double residual = 0.0;  // |sum e^{-P f^n + iu g^n} - lambda_1^n|
  double spectral = 0.0;  // |sum_{i >= 2} lambda_i^n| from the dense spectrum
};

struct Lemma1Table {
  double u = 0.0;
  std::vector<Lemma1Row> rows;
  double theta_hat = std::numeric_limits<double>::quiet_NaN();  // from r_n ~ C n theta^n
  double fit_r2 = std::numeric_limits<double>::quiet_NaN();
  std::complex<double> lambda1;
};

// g = f - alpha. Periodic sums are accumulated in long double and the dense
// spectrum is computed in long double.
inline Lemma1Table lemma1_residual(const Potential& f, const PressureProfile& prof, double u, int n_lo, int n_hi,
                                   const EnumerationOptions& opts = {}) {
  if (n_lo < 1 || n_hi < n_lo) fail(ErrorKind::InvalidInput, "lemma1 needs 1 <= n_lo <= n_hi");
  using R = long double;
  using C = std::complex<R>;
  if (u != 0.0) complex_leading_eigen(f, prof.P, u);  // throws DegenerateTopModulus on lattice behaviour
  const auto op = build_operator<C>(f, C(-static_cast<R>(prof.P), static_cast<R>(u)),
                                    C(0, -static_cast<R>(u) * static_cast<R>(prof.alpha)));
  const auto spectrum = dense_spectrum(op);
  if (spectrum.size() >= 2 && std::abs(spectrum[0]) - std::abs(spectrum[1]) <= R(1e-9) * std::abs(spectrum[0]))
    fail(ErrorKind::DegenerateTopModulus, "top eigenvalues tie in modulus at u = " + csv::format_real(u));
  Lemma1Table table;
  table.u = u;
  table.lambda1 = std::complex<double>(static_cast<double>(spectrum[0].real()), static_cast<double>(spectrum[0].imag()));
  const R P = prof.P, alpha = prof.alpha, uu = u;
  for (int n = n_lo; n <= n_hi; ++n) {
    const C sum = reduce_periodic_sums<R>(
        f, n, opts, C(0),
        [&](C& acc, WordView, R s) { acc += std::exp(C(-P * s, uu * (s - n * alpha))); },
        [](C& t, const C& p) { t += p; });
    C sub(0);
    for (std::size_t i = 1; i < spectrum.size(); ++i) sub += std::pow(spectrum[i], n);
    table.rows.push_back(Lemma1Row{n, static_cast<double>(std::abs(sum - std::pow(spectrum[0], n))),
                                   static_cast<double>(std::abs(sub))});
  }
  std::vector<double> xs, ys;
  for (const auto& r : table.rows)
    if (r.residual > 0.0) {
      xs.push_back(r.n);
      ys.push_back(std::log(r.residual / r.n));
    }
  if (xs.size() >= 2) {
    const auto fit = fit_line(xs, ys);
    table.theta_hat = std::exp(fit.slope);
    table.fit_r2 = fit.r2;
  }
  return table;
}

// One periodic point per symbol: the lexicographically least shortest cycle
// through i, as a word starting with i.
inline std::vector<Word> default_anchor_points(const TransitionMatrix& a) {
  std::vector<Word> out;
  for (int i = 0; i < a.size(); ++i) {
    std::optional<Word> found;
    for (int len = 1; len <= a.size() && !found; ++len)
      for_each_periodic_in_shard(a, len, static_cast<Symbol>(i), [&](WordView w) {
        if (!found) found = Word(w.begin(), w.end());
      });
    if (!found) fail(ErrorKind::DeadState, "symbol " + std::to_string(i + 1) + " lies on no cycle");
    out.push_back(*found);
  }
  return out;
}

struct RuelleResidual {
  int n = 0;
  std::complex<double> lhs;  // sum over Fix(sigma^n) of e^{(t+iu) f^n}
  std::complex<double> rhs;  // sum_i (L^n chi_i)(x_i)
  double residual = 0.0;
};

inline RuelleResidual ruelle_lemma_residual(const Potential& f, double t, double u, int n,
                                            const std::vector<Word>& anchors, const EnumerationOptions& opts = {}) {
  if (n < 1) fail(ErrorKind::InvalidInput, "n must be >= 1");
  if (static_cast<int>(anchors.size()) != f.kappa()) fail(ErrorKind::InvalidInput, "one anchor point per symbol");
  using R = long double;
  using C = std::complex<R>;
  const int k = f.depth();
  const auto op = build_operator<C>(f, C(t, u));
  std::map<Word, std::size_t> state_of;
  for (std::size_t i = 0; i < op.states.size(); ++i) state_of[op.states[i]] = i;

  C rhs(0);
  for (int i = 0; i < f.kappa(); ++i) {
    const Word& x = anchors[i];
    if (x.empty() || x[0] != i || !is_cyclically_admissible(f.matrix(), x))
      fail(ErrorKind::InvalidInput, "anchor " + std::to_string(i + 1) + " is not a periodic word starting with it");
    DenseVector<C> v = DenseVector<C>::Zero(op.dimension());
    for (std::size_t s = 0; s < op.states.size(); ++s)
      if (op.states[s][0] == i) v[s] = C(1);
    for (int step = 0; step < n; ++step) v = op.entries * v;
    Word prefix(k);
    for (int j = 0; j < k; ++j) prefix[j] = x[j % x.size()];
    rhs += v[state_of.at(prefix)];
  }
  const C lhs = reduce_periodic_sums<R>(
      f, n, opts, C(0), [&](C& acc, WordView, R s) { acc += std::exp(C(t, u) * s); },
      [](C& total, const C& p) { total += p; });
  RuelleResidual out;
  out.n = n;
  out.lhs = {static_cast<double>(lhs.real()), static_cast<double>(lhs.imag())};
  out.rhs = {static_cast<double>(rhs.real()), static_cast<double>(rhs.imag())};
  out.residual = static_cast<double>(std::abs(lhs - rhs));
  return out;
}

// ---------------------------------------------------------------------------
// Prime orbit counting

struct PrimeCountRow {
  double x = 0.0;
  std::uint64_t pi = 0;
};

struct ZetaPartial {
  double s = 0.0;
  double log_z = 0.0;  // -sum_gamma log(1 - e^{-s T_gamma}) over the enumerated orbits
};

struct PrimeCountReport {
  double x_max = 0.0;
  std::vector<PrimeCountRow> rows;
  std::vector<ZetaPartial> zeta;
  double h_T = std::numeric_limits<double>::quiet_NaN();  // slope of log(pi(x) x) over the upper half of the grid
  double fit_r2 = std::numeric_limits<double>::quiet_NaN();
  double P = std::numeric_limits<double>::quiet_NaN();
  double P_alpha = std::numeric_limits<double>::quiet_NaN();
  std::size_t orbits = 0;
};

inline PrimeCountReport prime_count_from_periods(const std::vector<OrbitPeriod>& periods, double x_max,
                                                 const std::vector<double>& grid, const std::vector<double>& s_values) {
  std::vector<double> sorted;
  for (const auto& o : periods)
    if (o.period <= x_max) sorted.push_back(o.period);
  std::sort(sorted.begin(), sorted.end());
  PrimeCountReport report;
  report.x_max = x_max;
  report.orbits = sorted.size();
  for (double x : grid) {
    if (x > x_max) fail(ErrorKind::InvalidInput, "grid point beyond x_max");
    const auto count = std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin();
    report.rows.push_back(PrimeCountRow{x, static_cast<std::uint64_t>(count)});
  }
  for (double s : s_values) {
    long double acc = 0;
    for (double T : sorted) acc -= std::log1p(-std::exp(-static_cast<long double>(s) * T));
    report.zeta.push_back(ZetaPartial{s, static_cast<double>(acc)});
  }
  std::vector<double> xs, ys;
  for (std::size_t i = report.rows.size() / 2; i < report.rows.size(); ++i)
    if (report.rows[i].pi > 0) {
      xs.push_back(report.rows[i].x);
      ys.push_back(std::log(static_cast<double>(report.rows[i].pi) * report.rows[i].x));
    }
  if (xs.size() >= 2) {
    const auto fit = fit_line(xs, ys);
    report.h_T = fit.slope;
    report.fit_r2 = fit.r2;
  }
  return report;
}

inline PrimeCountReport prime_orbit_counter(const Potential& f, const PressureProfile& prof, double x_max,
                                            const std::vector<double>& grid, const std::vector<double>& s_values = {},
                                            const EnumerationOptions& opts = {}) {
  if (!f.positive()) fail(ErrorKind::PositivityViolated, "prime orbit counting needs f > 0");
  const int m_hi = static_cast<int>(std::floor(x_max / f.d0() + 1e-9));
  const auto periods = primitive_orbit_periods(f, 1, m_hi, -std::numeric_limits<double>::infinity(), x_max, opts);
  auto report = prime_count_from_periods(periods, x_max, grid, s_values);
  report.P = prof.P;
  report.P_alpha = prof.P * prof.alpha;
  return report;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string census_to_csv(const std::vector<CensusRow>& rows) {
  csv::Table t({"n", "m", "z", "p", "q", "delta", "epsilon_n", "empirical", "predicted", "ratio", "flags"});
  for (const auto& r : rows)
    t.add_row({std::to_string(r.n), std::to_string(r.m), csv::format_real(r.z), csv::format_real(r.p),
               csv::format_real(r.q), csv::format_real(r.delta), csv::format_real(r.epsilon),
               csv::format_real(r.empirical), csv::format_real(r.predicted), csv::format_real(r.ratio), r.flags});
  return t.str();
}

inline CensusRow smoothed_row(const SmoothedSum& s, const BumpSpec& chi) {
  CensusRow row;
  row.n = s.n;
  row.m = s.n;
  row.z = s.z;
  row.p = chi.support().first;
  row.q = chi.support().second;
  row.delta = s.delta;
  row.epsilon = s.epsilon;
  row.empirical = s.value;
  row.predicted = s.predicted;
  row.ratio = s.ratio;
  row.flags = s.flags;
  return row;
}

inline std::string brackets_to_csv(int n, const std::vector<Bracket>& brackets, double empirical) {
  csv::Table t({"n", "a", "lower", "upper", "empirical"});
  for (const auto& b : brackets)
    t.add_row({std::to_string(n), csv::format_real(b.a), csv::format_real(b.lower), csv::format_real(b.upper),
               csv::format_real(empirical)});
  return t.str();
}

inline std::string lemma1_to_csv(const Lemma1Table& table) {
  csv::Table t({"n", "u", "residual", "spectral", "theta_hat", "fit_r2"});
  for (const auto& r : table.rows)
    t.add_row({std::to_string(r.n), csv::format_real(table.u), csv::format_real(r.residual),
               csv::format_real(r.spectral), csv::format_real(table.theta_hat), csv::format_real(table.fit_r2)});
  return t.str();
}

inline std::string ruelle_to_csv(const std::vector<RuelleResidual>& rows, double t_value, double u) {
  csv::Table t({"n", "t", "u", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "residual"});
  for (const auto& r : rows)
    t.add_row({std::to_string(r.n), csv::format_real(t_value), csv::format_real(u), csv::format_real(r.lhs.real()),
               csv::format_real(r.lhs.imag()), csv::format_real(r.rhs.real()), csv::format_real(r.rhs.imag()),
               csv::format_real(r.residual)});
  return t.str();
}

inline std::string prime_count_to_csv(const PrimeCountReport& r) {
  csv::Table t({"x", "pi", "h_T", "P", "P_alpha"});
  for (const auto& row : r.rows)
    t.add_row({csv::format_real(row.x), std::to_string(row.pi), csv::format_real(r.h_T), csv::format_real(r.P),
               csv::format_real(r.P_alpha)});
  return t.str();
}

inline std::string zeta_to_csv(const PrimeCountReport& r) {
  csv::Table t({"s", "log_Z_partial", "orbits", "x_max"});
  for (const auto& z : r.zeta)
    t.add_row({csv::format_real(z.s), csv::format_real(z.log_z), std::to_string(r.orbits), csv::format_real(r.x_max)});
  return t.str();
}

}  // namespace orbit_census
