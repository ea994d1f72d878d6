#pragma once

// JSON-configured experiments, bundled reproduction suites, and the error to
// exit-code mapping used by the command line tool.
//
// A config names a system (a shift with a potential table, or a billiard
// scene with a cylinder depth), a task, task parameters and an output path.
// Every run writes its CSV outputs plus <output>.manifest.json holding the
// resolved config; the manifest is the only file carrying a timestamp.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "orbit_census/billiard.hpp"
#include "orbit_census/census.hpp"
#include "orbit_census/csv.hpp"
#include "orbit_census/error.hpp"
#include "orbit_census/potential.hpp"
#include "orbit_census/symbolic.hpp"
#include "orbit_census/transfer.hpp"

#ifndef ORBIT_CENSUS_VERSION
#define ORBIT_CENSUS_VERSION "1.0.0"
#endif

namespace orbit_census {

using json = nlohmann::ordered_json;

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitBudget = 3, kExitNotConverged = 4 };

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidInput:
    case ErrorKind::NotAperiodic:
    case ErrorKind::DeadState:
    case ErrorKind::MissingCylinder:
    case ErrorKind::InadmissibleWord:
    case ErrorKind::Overlap:
      return kExitConfig;
    case ErrorKind::BudgetExceeded:
    case ErrorKind::StateSpaceTooLarge:
    case ErrorKind::Overflow:
      return kExitBudget;
    case ErrorKind::NotConverged:
    case ErrorKind::TailNotConverged:
    case ErrorKind::DerivativeUnstable:
    case ErrorKind::NoBracket:
      return kExitNotConverged;
    default:
      return kExitFailure;
  }
}

struct RunOptions {
  unsigned workers = 1;
  std::optional<std::string> output;  // overrides the config's output path
  std::uint64_t seed = 0;
  bool write_manifest = true;
};

struct RunResult {
  std::vector<std::string> files;  // written CSVs, manifest last
  json manifest;
};

// ---------------------------------------------------------------------------
// Bundled potentials (also shipped as CSV under tools/configs/potentials)

namespace bundled {

inline Potential golden() { return Potential::from_symbol_values(TransitionMatrix::full_shift(2), {1.0, 2.0}); }

// Depth-2 table on the no-repeat 3-shift used by the theorem1 and theorem2 suites.
inline constexpr const char* kTheorem1Csv =
    "word,value\n12,1.0141158286488097\n13,1.2783903548811673\n21,1.4885579510084908\n"
    "23,0.77026251944297774\n31,1.3893219146193592\n32,0.75829764715625769\n";

// Depth-2 table on the no-repeat 3-shift used for the trace-residual checks.
inline constexpr const char* kRandomCsv =
    "word,value\n12,1.6783224348933095\n13,1.180744616779575\n21,1.3913759445067866\n"
    "23,0.59346479964955257\n31,1.321973359431919\n32,0.5845796047474765\n";

inline Potential theorem1() { return potential_from_csv(kTheorem1Csv, TransitionMatrix::no_repeat(3)); }
inline Potential random_depth2() { return potential_from_csv(kRandomCsv, TransitionMatrix::no_repeat(3)); }

inline constexpr int kBilliardDepth = 6;

}  // namespace bundled

// ---------------------------------------------------------------------------
// Config access with key tracking

namespace detail {

// Reads keys from a JSON object, records the values actually used (defaults
// included) and rejects keys nobody asked for.
class ParamReader {
 public:
  ParamReader(const json& object, std::string where) : obj_(object), where_(std::move(where)) {
    if (!obj_.is_object()) fail(ErrorKind::ConfigError, where_ + " must be a JSON object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  template <class T>
  T get(const std::string& key) {
    if (!obj_.contains(key)) fail(ErrorKind::ConfigError, where_ + "." + key + " is required");
    return convert<T>(key);
  }

  template <class T>
  T get(const std::string& key, const T& fallback) {
    if (!obj_.contains(key)) {
      used_[key] = fallback;
      return fallback;
    }
    return convert<T>(key);
  }

  const json& raw(const std::string& key) {
    if (!obj_.contains(key)) fail(ErrorKind::ConfigError, where_ + "." + key + " is required");
    used_[key] = obj_.at(key);
    return obj_.at(key);
  }

  void record(const std::string& key, json value) { used_[key] = std::move(value); }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!used_.contains(it.key())) fail(ErrorKind::ConfigError, "unknown key " + where_ + "." + it.key());
  }

  const json& resolved() const { return used_; }

 private:
  template <class T>
  T convert(const std::string& key) {
    try {
      T value = obj_.at(key).template get<T>();
      used_[key] = obj_.at(key);
      return value;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::ConfigError, where_ + "." + key + ": " + e.what());
    }
  }

  const json& obj_;
  std::string where_;
  json used_ = json::object();
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::ConfigError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::ConfigError, "cannot write " + path.string());
  out << text;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

// Sibling of `base` with a suffix inserted before the extension.
inline std::filesystem::path sibling(const std::filesystem::path& base, const std::string& suffix) {
  auto out = base;
  out.replace_filename(base.stem().string() + suffix + base.extension().string());
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Systems

struct System {
  TransitionMatrix matrix = TransitionMatrix::full_shift(2);
  std::optional<Potential> potential;
  std::optional<BilliardScene> scene;
  int depth = 0;
  json resolved;

  bool is_billiard() const { return scene.has_value(); }
  const Potential& f() const { return *potential; }
};

inline TransitionMatrix parse_matrix(const json& spec, int kappa_hint) {
  if (spec.is_string()) {
    const auto name = spec.get<std::string>();
    if (kappa_hint < 2) fail(ErrorKind::ConfigError, "system.kappa >= 2 is required with a named matrix");
    if (name == "full") return TransitionMatrix::full_shift(kappa_hint);
    if (name == "no-repeat") return TransitionMatrix::no_repeat(kappa_hint);
    fail(ErrorKind::ConfigError, "unknown matrix name '" + name + "' (full, no-repeat)");
  }
  if (!spec.is_array()) fail(ErrorKind::ConfigError, "system.matrix must be a name or a 0/1 row list");
  try {
    return TransitionMatrix(spec.get<std::vector<std::vector<int>>>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("system.matrix: ") + e.what());
  }
}

inline Potential parse_potential(const json& spec, const TransitionMatrix& a, const std::filesystem::path& base_dir,
                                 json& resolved) {
  detail::ParamReader r(spec, "system.potential");
  std::optional<Potential> f;
  int forms = 0;
  if (r.has("csv")) {
    ++forms;
    const auto rel = r.get<std::string>("csv");
    f = potential_from_csv(detail::read_file(base_dir / rel), a);
  }
  if (r.has("table")) {
    ++forms;
    const json& table = r.raw("table");
    if (!table.is_object()) fail(ErrorKind::ConfigError, "system.potential.table must map words to values");
    std::vector<std::pair<Word, double>> entries;
    int depth = 0;
    for (auto it = table.begin(); it != table.end(); ++it) {
      Word w = parse_word(it.key(), a.size());
      if (depth == 0) depth = static_cast<int>(w.size());
      if (!it.value().is_number()) fail(ErrorKind::ConfigError, "potential value for " + it.key() + " is not a number");
      entries.push_back({std::move(w), it.value().get<double>()});
    }
    if (entries.empty()) fail(ErrorKind::ConfigError, "system.potential.table is empty");
    f = Potential(a, depth, entries);
  }
  if (r.has("constant")) {
    ++forms;
    const double c = r.get<double>("constant");
    f = Potential::constant(a, c, r.get<int>("depth", 1));
  }
  if (forms != 1) fail(ErrorKind::ConfigError, "system.potential needs exactly one of csv, table, constant");
  r.finish();
  resolved = r.resolved();
  return *f;
}

// With compute_geometry false a billiard gets a placeholder potential: enough
// to check the config without solving any orbits.
inline System build_system(const json& spec, const std::filesystem::path& base_dir, unsigned workers,
                           bool compute_geometry = true) {
  detail::ParamReader r(spec, "system");
  System sys;
  if (r.has("billiard")) {
    detail::ParamReader b(r.raw("billiard"), "system.billiard");
    std::vector<Disk> disks;
    if (b.has("symmetric")) {
      detail::ParamReader s(b.raw("symmetric"), "system.billiard.symmetric");
      const double side = s.get<double>("side", 6.0), radius = s.get<double>("radius", 1.0);
      s.finish();
      disks = BilliardScene::symmetric_three(side, radius).disks();
    } else {
      const auto centers = b.get<std::vector<std::vector<double>>>("centers");
      const auto radii = b.get<std::vector<double>>("radii");
      if (centers.size() != radii.size()) fail(ErrorKind::ConfigError, "centers and radii differ in length");
      for (std::size_t i = 0; i < centers.size(); ++i) {
        if (centers[i].size() != 2) fail(ErrorKind::ConfigError, "disk centers are 2-vectors");
        disks.push_back(Disk{{centers[i][0], centers[i][1]}, radii[i]});
      }
    }
    b.finish();
    sys.scene.emplace(disks);
    sys.matrix = sys.scene->coding_matrix();
    sys.depth = r.get<int>("depth", bundled::kBilliardDepth);
    GeometricPotentialOptions gopts;
    gopts.sinai.parallelism.workers = workers;
    if (sys.depth < 1) fail(ErrorKind::ConfigError, "system.depth must be >= 1");
    sys.potential = compute_geometry ? geometric_potential(*sys.scene, sys.depth, gopts)
                                     : Potential::constant(sys.matrix, 1.0);
  } else {
    const int kappa = r.get<int>("kappa", 0);
    sys.matrix = parse_matrix(r.raw("matrix"), kappa);
    json resolved_potential;
    sys.potential = parse_potential(r.raw("potential"), sys.matrix, base_dir, resolved_potential);
    r.record("potential", resolved_potential);
    sys.depth = sys.potential->depth();
  }
  r.finish();
  sys.resolved = r.resolved();
  return sys;
}

// ---------------------------------------------------------------------------
// Parameter helpers

namespace detail {

inline std::pair<int, int> n_range(ParamReader& r) {
  if (r.has("n")) {
    const int n = r.get<int>("n");
    return {n, n};
  }
  const auto range = r.get<std::vector<int>>("n_range");
  if (range.size() != 2 || range[0] < 1 || range[1] < range[0])
    fail(ErrorKind::ConfigError, "n_range must be [lo, hi] with 1 <= lo <= hi");
  return {range[0], range[1]};
}

// z given absolutely ("z": x or [x...]) or as multiples of alpha ("z_alpha").
inline std::vector<double> z_values(ParamReader& r, double alpha) {
  std::vector<double> out;
  if (r.has("z_alpha")) {
    for (double c : r.get<std::vector<double>>("z_alpha")) out.push_back(c * alpha);
  } else if (r.has("z") && r.raw("z").is_array()) {
    out = r.get<std::vector<double>>("z");
  } else {
    out.push_back(r.get<double>("z"));
  }
  if (out.empty()) fail(ErrorKind::ConfigError, "no z values");
  return out;
}

inline BumpSpec parse_bump(ParamReader& r) {
  if (!r.has("chi")) {
    r.record("chi", json{{"family", "poly4"}, {"center", 0.0}, {"half_width", 1.0}});
    return BumpSpec::poly4();
  }
  ParamReader c(r.raw("chi"), "params.chi");
  const auto family = c.get<std::string>("family", "poly4");
  BumpSpec b;
  if (family == "poly4") {
    b = BumpSpec::poly4(c.get<double>("center", 0.0), c.get<double>("half_width", 1.0), c.get<double>("height", 1.0));
  } else if (family == "plateau") {
    b = BumpSpec::plateau(c.get<double>("lo"), c.get<double>("hi"), c.get<double>("ramp"), c.get<double>("height", 1.0));
  } else {
    fail(ErrorKind::ConfigError, "unknown bump family '" + family + "' (poly4, plateau)");
  }
  c.finish();
  b.validate();
  return b;
}

inline std::vector<double> grid_values(ParamReader& r, double x_max) {
  if (!r.has("grid")) {
    std::vector<double> g;
    for (int i = 1; i <= 20; ++i) g.push_back(x_max * i / 20.0);
    r.record("grid", g);
    return g;
  }
  const json& spec = r.raw("grid");
  if (spec.is_array()) return spec.get<std::vector<double>>();
  ParamReader g(spec, "params.grid");
  const double from = g.get<double>("from"), to = g.get<double>("to"), step = g.get<double>("step");
  g.finish();
  if (!(step > 0) || to < from) fail(ErrorKind::ConfigError, "grid needs from <= to and step > 0");
  std::vector<double> out;
  for (int i = 0; from + i * step <= to + 1e-12 * std::abs(to); ++i) out.push_back(from + i * step);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Drift analysis of ratio sequences (block averages of consecutive n)

struct DriftSummary {
  std::vector<int> block_start;
  std::vector<double> block_mean;
  double slope = 0.0;      // least-squares slope of |block_mean - 1| against block index
  bool in_band = false;    // every block mean inside [lo, hi]
  bool toward_one = false; // negative slope and last deviation below the first
};

inline DriftSummary analyze_drift(const std::vector<int>& ns, const std::vector<double>& ratios, int block,
                                  double lo = 0.5, double hi = 2.0) {
  if (ns.size() != ratios.size() || static_cast<int>(ns.size()) < block + 1)
    fail(ErrorKind::InvalidInput, "drift analysis needs more ratios than the block length");
  DriftSummary d;
  std::vector<double> xs, dev;
  for (std::size_t i = 0; i + block <= ratios.size(); ++i) {
    double s = 0;
    for (int j = 0; j < block; ++j) s += ratios[i + j];
    d.block_start.push_back(ns[i]);
    d.block_mean.push_back(s / block);
    xs.push_back(static_cast<double>(i));
    dev.push_back(std::abs(s / block - 1.0));
  }
  d.slope = fit_line(xs, dev).slope;
  d.in_band = std::all_of(d.block_mean.begin(), d.block_mean.end(), [&](double m) { return m >= lo && m <= hi; });
  d.toward_one = d.slope < 0.0 && dev.back() < dev.front();
  return d;
}

// ---------------------------------------------------------------------------
// Tasks

namespace detail {

inline json profile_json(const PressureProfile& p) {
  return json{{"P", p.P},         {"alpha", p.alpha}, {"sigma0_sq", p.sigma0_sq}, {"entropy", p.entropy},
              {"d0", p.d0},       {"d1", p.d1},       {"depth", p.depth},         {"lattice_warning", p.lattice_warning}};
}

struct TaskContext {
  const System& sys;
  PressureProfile profile;
  bool dry = false;  // read and check every parameter, compute nothing
  CensusOptions census{};
  std::filesystem::path output{};
  std::vector<std::string> files{};
  json notes = json::object();

  void emit(const std::filesystem::path& path, const std::string& text) {
    write_file(path, text);
    files.push_back(path.string());
  }
};

// Exact orbit periods of a billiard from the solver, as census input.
inline std::vector<OrbitPeriod> billiard_periods(const BilliardScene& scene, int m_max, const EnumerationOptions& e) {
  std::vector<OrbitPeriod> out;
  if (m_max < 2) return out;
  for (const auto& s : length_spectrum(scene, m_max, e))
    out.push_back(OrbitPeriod{s.orbit.canonical_word, s.orbit.length, s.length});
  std::sort(out.begin(), out.end(), [](const OrbitPeriod& a, const OrbitPeriod& b) {
    return a.m != b.m ? a.m < b.m : a.code < b.code;
  });
  return out;
}

inline void setup_census(TaskContext& ctx, ParamReader& r) {
  ctx.census.enumeration.budget = r.get<std::uint64_t>("budget", kDefaultEnumerationBudget);
  std::optional<std::tuple<double, int, double>> probe;
  if (r.has("rho_hat")) {
    ctx.census.rho_hat = r.get<double>("rho_hat");
  } else if (r.has("regime_probe")) {
    ParamReader p(r.raw("regime_probe"), "params.regime_probe");
    probe.emplace(p.get<double>("u", 1.0), p.get<int>("n_max", 30), p.get<double>("theta", 0.5));
    p.finish();
    r.record("regime_probe", p.resolved());
  }
  if (ctx.dry) return;
  ctx.census.screen = screen_lattice(ctx.sys.f()).verdict;
  if (probe) {
    const auto table =
        norm_decay_probe(ctx.sys.f(), ctx.profile.P, std::get<0>(*probe), std::get<1>(*probe), std::get<2>(*probe));
    ctx.census.rho_hat = table.rho_hat;
    ctx.notes["rho_hat"] = table.rho_hat;
  }
  if (ctx.sys.is_billiard()) ctx.census.extra_flags.push_back("depth-" + std::to_string(ctx.sys.depth) + "-constants");
}

inline std::string bracket_csv(const std::vector<std::tuple<int, double, Bracket, double>>& rows) {
  csv::Table t({"n", "z", "a", "lower", "upper", "empirical"});
  for (const auto& [n, z, b, emp] : rows)
    t.add_row({std::to_string(n), csv::format_real(z), csv::format_real(b.a), csv::format_real(b.lower),
               csv::format_real(b.upper), csv::format_real(emp)});
  return t.str();
}

inline void window_task(const std::string& task, ParamReader& r, TaskContext& ctx) {
  const Potential& f = ctx.sys.f();
  const auto& prof = ctx.profile;
  setup_census(ctx, r);
  const auto [n_lo, n_hi] = n_range(r);
  const auto zs = z_values(r, prof.alpha);
  const double p = r.get<double>("p"), q = r.get<double>("q"), delta = r.get<double>("delta");
  WindowQuery{0.0, p, q, delta, n_lo}.validate();
  if (task != "count-window") ctx.census.a_values = r.get<std::vector<double>>("a", {1.0});
  if (ctx.dry) return;
  std::vector<CensusRow> rows;
  std::vector<std::tuple<int, double, Bracket, double>> brackets;
  // billiard orbit counts use exact solver periods and geometric d0, d1
  PressureProfile geo = prof;
  std::vector<OrbitPeriod> exact;
  if (task == "primitive-window" && ctx.sys.is_billiard()) {
    geo.d0 = ctx.sys.scene->min_gap();
    geo.d1 = ctx.sys.scene->max_span();
    int m_max = 2;
    for (int n = n_lo; n <= n_hi; ++n)
      for (double z : zs)
        m_max = std::max(m_max, period_range(WindowQuery{z, p, q, delta, n}, prof.alpha, geo.d0, geo.d1).second);
    exact = billiard_periods(*ctx.sys.scene, m_max, ctx.census.enumeration);
    ctx.census.extra_flags.push_back("exact-periods");
  }
  for (int n = n_lo; n <= n_hi; ++n)
    for (double z : zs) {
      const WindowQuery wq{z, p, q, delta, n};
      CensusReport rep;
      if (task == "count-window") {
        rep = count_fixed_in_window(f, prof, wq, ctx.census);
      } else if (task == "count-I") {
        rep = count_I(f, prof, wq, ctx.census);
      } else if (ctx.sys.is_billiard()) {
        const auto [m_lo, m_hi] = period_range(wq, prof.alpha, geo.d0, geo.d1);
        rep = tabulate_orbits(exact, geo, wq, std::max(2, m_lo), m_hi, ctx.census);
      } else {
        rep = count_primitive_orbits_in_window(f, prof, wq, ctx.census);
      }
      rows.insert(rows.end(), rep.rows.begin(), rep.rows.end());
      for (const auto& b : rep.brackets) brackets.push_back({n, z, b, rep.summary().empirical});
    }
  ctx.emit(ctx.output, census_to_csv(rows));
  if (!brackets.empty()) ctx.emit(sibling(ctx.output, ".brackets"), bracket_csv(brackets));
}

inline void run_task(const std::string& task, ParamReader& r, TaskContext& ctx) {
  const Potential& f = ctx.sys.f();
  const auto& prof = ctx.profile;
  EnumerationOptions e = ctx.census.enumeration;
  if (task == "pressure") {
    if (!ctx.dry) ctx.emit(ctx.output, profile_to_csv(prof));
  } else if (task == "count-window" || task == "count-I" || task == "primitive-window") {
    window_task(task, r, ctx);
  } else if (task == "smoothed") {
    setup_census(ctx, r);
    const auto [n_lo, n_hi] = n_range(r);
    const auto zs = z_values(r, prof.alpha);
    const double delta = r.get<double>("delta");
    if (!(delta > 0.0)) fail(ErrorKind::ConfigError, "params.delta must be positive");
    const BumpSpec chi = parse_bump(r);
    if (ctx.dry) return;
    std::vector<CensusRow> rows;
    for (int n = n_lo; n <= n_hi; ++n)
      for (double z : zs) rows.push_back(smoothed_row(smoothed_sum(f, prof, chi, z, delta, n, ctx.census), chi));
    ctx.emit(ctx.output, census_to_csv(rows));
  } else if (task == "lemma1") {
    const auto [n_lo, n_hi] = n_range(r);
    e.budget = r.get<std::uint64_t>("budget", kDefaultEnumerationBudget);
    const double u = r.get<double>("u", 0.1);
    if (ctx.dry) return;
    ctx.emit(ctx.output, lemma1_to_csv(lemma1_residual(f, prof, u, n_lo, n_hi, e)));
  } else if (task == "ruelle-lemma") {
    const auto [n_lo, n_hi] = n_range(r);
    const double t = r.get<double>("t", -prof.P), u = r.get<double>("u", 0.0);
    e.budget = r.get<std::uint64_t>("budget", kDefaultEnumerationBudget);
    if (ctx.dry) return;
    const auto anchors = default_anchor_points(f.matrix());
    std::vector<RuelleResidual> rows;
    for (int n = n_lo; n <= n_hi; ++n) rows.push_back(ruelle_lemma_residual(f, t, u, n, anchors, e));
    ctx.emit(ctx.output, ruelle_to_csv(rows, t, u));
  } else if (task == "spectrum") {
    if (!ctx.sys.is_billiard()) fail(ErrorKind::ConfigError, "task spectrum needs a billiard system");
    const int n_max = r.get<int>("n_max", 6);
    e.budget = r.get<std::uint64_t>("budget", kDefaultEnumerationBudget);
    const int starts = r.get<int>("multistart", 0);
    const auto seed = r.get<std::uint64_t>("seed", 0);
    if (n_max < 2) fail(ErrorKind::ConfigError, "params.n_max must be >= 2");
    if (ctx.dry) return;
    ctx.emit(ctx.output, spectrum_to_csv(length_spectrum(*ctx.sys.scene, n_max, e), ctx.sys.scene->size()));
    if (starts > 0) {
      double spread = 0;
      for (int n = 2; n <= std::min(n_max, 6); ++n)
        for (const auto& code : primitive_orbit_words(ctx.sys.matrix, n))
          spread = std::max(spread, multistart_spread(*ctx.sys.scene, code, starts, seed));
      ctx.notes["multistart_spread"] = spread;
    }
  } else if (task == "prime-count") {
    const double x_max = r.get<double>("x_max");
    if (!(x_max > 0.0)) fail(ErrorKind::ConfigError, "params.x_max must be positive");
    const auto grid = grid_values(r, x_max);
    const auto s_values = r.get<std::vector<double>>("s", {});
    e.budget = r.get<std::uint64_t>("budget", kDefaultEnumerationBudget);
    if (ctx.dry) return;
    PrimeCountReport rep;
    if (ctx.sys.is_billiard()) {
      const int m_max = static_cast<int>(std::floor(x_max / ctx.sys.scene->min_gap()));
      rep = prime_count_from_periods(billiard_periods(*ctx.sys.scene, m_max, e), x_max, grid, s_values);
      rep.P = prof.P;
      rep.P_alpha = prof.P * prof.alpha;
    } else {
      rep = prime_orbit_counter(f, prof, x_max, grid, s_values, e);
    }
    ctx.emit(ctx.output, prime_count_to_csv(rep));
    if (!s_values.empty()) ctx.emit(sibling(ctx.output, ".zeta"), zeta_to_csv(rep));
  } else if (task == "decay-probe") {
    const double u = r.get<double>("u", 1.0), theta = r.get<double>("theta", 0.5);
    const int n_max = r.get<int>("n_max", 30);
    if (ctx.dry) return;
    ctx.emit(ctx.output, decay_to_csv(norm_decay_probe(f, prof.P, u, n_max, theta)));
  } else {
    fail(ErrorKind::ConfigError, "unknown task '" + task +
                                     "' (pressure, count-window, count-I, primitive-window, smoothed, lemma1, "
                                     "ruelle-lemma, spectrum, prime-count, decay-probe)");
  }
}

}  // namespace detail

// Parameters are checked in a dry pass before anything is computed.
inline RunResult run_experiment(const json& config, const std::filesystem::path& base_dir, const RunOptions& opts = {}) {
  detail::ParamReader top(config, "config");
  const auto task = top.get<std::string>("task");
  std::filesystem::path output;
  if (opts.output) {
    output = *opts.output;
    if (top.has("output")) top.raw("output");
  } else {
    detail::ParamReader out(top.raw("output"), "output");
    output = base_dir / out.get<std::string>("path");
    const auto format = out.get<std::string>("format", "csv");
    if (format != "csv") fail(ErrorKind::ConfigError, "output.format must be csv");
    out.finish();
    top.record("output", out.resolved());
  }
  const json empty = json::object();
  const json& params_spec = top.has("params") ? top.raw("params") : empty;
  {
    const System shape = build_system(top.raw("system"), base_dir, opts.workers, false);
    detail::ParamReader params(params_spec, "params");
    detail::TaskContext dry{shape, PressureProfile{}, true};
    detail::run_task(task, params, dry);
    params.finish();
  }
  for (auto it = config.begin(); it != config.end(); ++it)
    if (it.key() != "task" && it.key() != "output" && it.key() != "system" && it.key() != "params")
      fail(ErrorKind::ConfigError, "unknown key config." + it.key());

  const System sys = build_system(top.raw("system"), base_dir, opts.workers, true);
  top.record("system", sys.resolved);
  detail::ParamReader params(params_spec, "params");
  detail::TaskContext ctx{sys, pressure_profile(sys.f()), false};
  ctx.output = output;
  ctx.census.enumeration.parallelism.workers = opts.workers;
  detail::run_task(task, params, ctx);
  top.record("params", params.resolved());
  top.finish();

  RunResult result;
  result.files = ctx.files;
  result.manifest = json{{"tool", "orbit-census"},
                         {"version", ORBIT_CENSUS_VERSION},
                         {"created_utc", detail::utc_timestamp()},
                         {"workers", opts.workers},
                         {"seed", opts.seed},
                         {"config", top.resolved()},
                         {"profile", detail::profile_json(ctx.profile)},
                         {"notes", ctx.notes},
                         {"outputs", ctx.files}};
  if (sys.is_billiard())
    result.manifest["disclosure"] =
        "window counts of primitive orbits use exact solver periods; P, alpha and sigma0 come from the depth-" +
        std::to_string(sys.depth) + " cylinder potential";
  if (opts.write_manifest) {
    const auto path = output.string() + ".manifest.json";
    detail::write_file(path, result.manifest.dump(2) + "\n");
    result.files.push_back(path);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Reproduction suites

struct SuiteResult {
  std::vector<std::string> files;  // manifest last
  json manifest;
};

namespace detail {

inline const std::vector<std::pair<std::string, double>>& suite_z_multiples() {
  static const std::vector<std::pair<std::string, double>> zs{{"0", 0.0}, {"alpha/2", 0.5}, {"alpha", 1.0}};
  return zs;
}

inline std::string drift_to_csv(const std::vector<std::tuple<std::string, double, DriftSummary>>& rows) {
  csv::Table t({"z_label", "z", "block_start", "block_mean", "slope", "in_band", "toward_one"});
  for (const auto& [label, z, d] : rows)
    for (std::size_t i = 0; i < d.block_mean.size(); ++i)
      t.add_row({label, csv::format_real(z), std::to_string(d.block_start[i]), csv::format_real(d.block_mean[i]),
                 csv::format_real(d.slope), d.in_band ? "1" : "0", d.toward_one ? "1" : "0"});
  return t.str();
}

struct SuiteWriter {
  std::filesystem::path dir;
  std::vector<std::string> files;

  void emit(const std::string& name, const std::string& text) {
    write_file(dir / name, text);
    files.push_back((dir / name).string());
  }
};


inline json theorem1_suite(SuiteWriter& w, const RunOptions& opts) {
  const Potential f = bundled::theorem1();
  const auto prof = pressure_profile(f);
  CensusOptions co;
  co.enumeration.parallelism.workers = opts.workers;
  co.screen = screen_lattice(f).verdict;
  const int n_lo = 8, n_hi = 20, drift_lo = 12, block = 4;
  const double p = -1.0, q = 1.0, delta = 0.05;
  std::vector<CensusRow> rows;
  std::vector<std::tuple<std::string, double, DriftSummary>> drift;
  for (const auto& [label, mult] : suite_z_multiples()) {
    const double z = mult * prof.alpha;
    std::vector<int> ns;
    std::vector<double> ratios;
    for (int n = n_lo; n <= n_hi; ++n) {
      const auto row = count_fixed_in_window(f, prof, WindowQuery{z, p, q, delta, n}, co).summary();
      rows.push_back(row);
      if (n >= drift_lo) {
        ns.push_back(n);
        ratios.push_back(row.ratio);
      }
    }
    drift.push_back({label, z, analyze_drift(ns, ratios, block)});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const CensusRow& a, const CensusRow& b) { return a.n < b.n; });
  w.emit("theorem1_counts.csv", census_to_csv(rows));
  w.emit("theorem1_drift.csv", drift_to_csv(drift));
  w.emit("theorem1_potential.csv", potential_to_csv(f));
  return json{{"system", {{"matrix", "no-repeat"}, {"kappa", 3}, {"potential", "theorem1_potential.csv"}}},
              {"params", {{"n_range", {n_lo, n_hi}}, {"z_alpha", {0.0, 0.5, 1.0}}, {"p", p}, {"q", q}, {"delta", delta},
                          {"drift_n_range", {drift_lo, n_hi}}, {"drift_block", block}, {"drift_band", {0.5, 2.0}},
                          {"budget", co.enumeration.budget}}},
              {"profile", profile_json(prof)}};
}

inline json theorem2_suite(SuiteWriter& w, const RunOptions& opts) {
  const Potential f = bundled::theorem1();
  const auto prof = pressure_profile(f);
  CensusOptions co;
  co.enumeration.parallelism.workers = opts.workers;
  co.screen = screen_lattice(f).verdict;
  co.a_values = {0.5, 1.0, 2.0};
  const int n_lo = 8, n_hi = 14;
  const double p = -1.0, q = 1.0, delta = 0.05;
  std::vector<CensusRow> rows;
  std::vector<std::tuple<int, double, Bracket, double>> brackets;
  for (int n = n_lo; n <= n_hi; ++n)
    for (const auto& [label, mult] : suite_z_multiples()) {
      const double z = mult * prof.alpha;
      const auto rep = count_I(f, prof, WindowQuery{z, p, q, delta, n}, co);
      rows.insert(rows.end(), rep.rows.begin(), rep.rows.end());
      for (const auto& b : rep.brackets) brackets.push_back({n, z, b, rep.summary().empirical});
    }
  w.emit("theorem2_counts.csv", census_to_csv(rows));
  w.emit("theorem2_brackets.csv", bracket_csv(brackets));
  return json{{"system", {{"matrix", "no-repeat"}, {"kappa", 3}, {"potential", "bundled theorem1 table"}}},
              {"params", {{"n_range", {n_lo, n_hi}}, {"z_alpha", {0.0, 0.5, 1.0}}, {"p", p}, {"q", q}, {"delta", delta},
                          {"a", co.a_values}, {"budget", co.enumeration.budget}}},
              {"profile", profile_json(prof)}};
}

inline json theorem4_suite(SuiteWriter& w, const RunOptions& opts) {
  const auto scene = BilliardScene::symmetric_three(6.0, 1.0);
  const int depth = bundled::kBilliardDepth;
  GeometricPotentialOptions gopts;
  gopts.sinai.parallelism.workers = opts.workers;
  const Potential f = geometric_potential(scene, depth, gopts);
  auto prof = pressure_profile(f);
  const double d0 = scene.min_gap(), d1 = scene.max_span();
  PressureProfile geo = prof;
  geo.d0 = d0;
  geo.d1 = d1;
  CensusOptions co;
  co.enumeration.parallelism.workers = opts.workers;
  co.screen = screen_lattice(f).verdict;
  co.extra_flags = {"exact-periods", "depth-" + std::to_string(depth) + "-constants"};
  const int n_lo = 2, n_hi = 12;
  const double p = -1.0, q = 1.0, delta = 0.05;

  int m_max = 2;
  for (int n = n_lo; n <= n_hi; ++n)
    for (const auto& zm : suite_z_multiples())
      m_max = std::max(m_max, period_range(WindowQuery{zm.second * prof.alpha, p, q, delta, n}, prof.alpha, d0, d1).second);
  const auto spectrum = length_spectrum(scene, m_max, co.enumeration);
  std::vector<OrbitPeriod> periods;
  for (const auto& s : spectrum) periods.push_back(OrbitPeriod{s.orbit.canonical_word, s.orbit.length, s.length});
  std::sort(periods.begin(), periods.end(),
            [](const OrbitPeriod& a, const OrbitPeriod& b) { return a.m != b.m ? a.m < b.m : a.code < b.code; });

  std::vector<CensusRow> rows;
  for (int n = n_lo; n <= n_hi; ++n)
    for (const auto& zm : suite_z_multiples()) {
      const WindowQuery wq{zm.second * prof.alpha, p, q, delta, n};
      const auto [m_lo, m_hi] = period_range(wq, prof.alpha, d0, d1);
      const auto rep = tabulate_orbits(periods, geo, wq, std::max(2, m_lo), m_hi, co);
      rows.insert(rows.end(), rep.rows.begin(), rep.rows.end());
    }
  w.emit("theorem4_counts.csv", census_to_csv(rows));

  // Per reflection number: orbit and point counts with the period range.
  csv::Table structure({"n", "orbits", "points", "min_length", "max_length", "n_d0", "n_d1", "inside"});
  for (int m = 2; m <= n_hi; ++m) {
    std::uint64_t orbits = 0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& o : periods)
      if (o.m == m) {
        ++orbits;
        lo = std::min(lo, o.period);
        hi = std::max(hi, o.period);
      }
    const bool inside = orbits == 0 || (lo >= m * d0 && hi <= m * d1);
    structure.add_row({std::to_string(m), std::to_string(orbits), std::to_string(orbits * m), csv::format_real(lo),
                       csv::format_real(hi), csv::format_real(m * d0), csv::format_real(m * d1), inside ? "1" : "0"});
  }
  w.emit("theorem4_structure.csv", structure.str());
  w.emit("theorem4_spectrum.csv", spectrum_to_csv(spectrum, scene.size()));
  return json{{"system", {{"billiard", {{"symmetric", {{"side", 6.0}, {"radius", 1.0}}}}}, {"depth", depth}}},
              {"params", {{"n_range", {n_lo, n_hi}}, {"z_alpha", {0.0, 0.5, 1.0}}, {"p", p}, {"q", q}, {"delta", delta},
                          {"d0_geometric", d0}, {"d1_geometric", d1}, {"m_max", m_max},
                          {"budget", co.enumeration.budget}}},
              {"profile", profile_json(prof)},
              {"disclosure", "orbit periods are exact solver lengths; P, alpha and sigma0 come from the depth-" +
                                 std::to_string(depth) + " cylinder potential"}};
}

}  // namespace detail

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"theorem1", "theorem2", "theorem4"};
  return names;
}

// Runs a canned experiment bundle into out_dir; the suite manifest
// <out_dir>/<name>.manifest.json is written last.
inline SuiteResult reproduce_suite(const std::string& name, const std::filesystem::path& out_dir,
                                   const RunOptions& opts = {}) {
  detail::SuiteWriter w{out_dir, {}};
  json body;
  if (name == "theorem1") {
    body = detail::theorem1_suite(w, opts);
  } else if (name == "theorem2") {
    body = detail::theorem2_suite(w, opts);
  } else if (name == "theorem4") {
    body = detail::theorem4_suite(w, opts);
  } else {
    fail(ErrorKind::ConfigError, "unknown suite '" + name + "' (theorem1, theorem2, theorem4)");
  }
  SuiteResult result;
  result.manifest = json{{"tool", "orbit-census"},      {"version", ORBIT_CENSUS_VERSION},
                         {"suite", name},               {"created_utc", detail::utc_timestamp()},
                         {"workers", opts.workers},     {"seed", opts.seed}};
  for (auto it = body.begin(); it != body.end(); ++it) result.manifest[it.key()] = it.value();
  result.manifest["outputs"] = w.files;
  result.files = w.files;
  if (opts.write_manifest) {
    const auto path = out_dir / (name + ".manifest.json");
    detail::write_file(path, result.manifest.dump(2) + "\n");
    result.files.push_back(path.string());
  }
  return result;
}

}  // namespace orbit_census
