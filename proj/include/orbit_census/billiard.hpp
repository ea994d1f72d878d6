#pragma once

// Planar open billiards in the exterior of disjoint disks. A periodic code
// w_0 .. w_{n-1} (no immediate repeats, including the wrap pair) is realized
// by the closed polygon P_0 P_1 ... P_{n-1} P_0 with P_j on the boundary of
// disk w_j that minimizes total length. Under condition (H) the minimizer is
// unique and is the billiard orbit.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <algorithm>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "orbit_census/csv.hpp"
#include "orbit_census/error.hpp"
#include "orbit_census/parallel.hpp"
#include "orbit_census/potential.hpp"
#include "orbit_census/symbolic.hpp"

namespace orbit_census {

using Vec2 = std::array<double, 2>;

struct Disk {
  Vec2 center{};
  double radius = 1.0;
};

namespace geom {

inline Vec2 sub(const Vec2& a, const Vec2& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Vec2 add(const Vec2& a, const Vec2& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Vec2 scale(const Vec2& a, double s) { return {a[0] * s, a[1] * s}; }
inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm(const Vec2& a) { return std::hypot(a[0], a[1]); }

// Distance from p to the segment [a, b].
inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 d = sub(b, a);
  const double len2 = dot(d, d);
  double t = len2 > 0 ? dot(sub(p, a), d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(sub(p, add(a, scale(d, t))));
}

}  // namespace geom

// Witness data for condition (H). margin is the smallest value of
// dist(center_l, hull(D_i u D_j)) - r_l over all triples.
struct HCertificate {
  bool pass = false;
  double margin = std::numeric_limits<double>::infinity();
  int i = -1, j = -1, l = -1;  // the triple attaining the margin (0-based)
};

// The hull of two disks is the union of the disks with centers (1-t)c_i + t c_j
// and radii (1-t)r_i + t r_j, so its distance to p is min_t |p - c(t)| - r(t).
// The objective is convex in t; golden-section search suffices.
inline double distance_to_disk_hull(const Vec2& p, const Disk& a, const Disk& b) {
  auto g = [&](double t) {
    const Vec2 c = geom::add(geom::scale(a.center, 1 - t), geom::scale(b.center, t));
    return geom::norm(geom::sub(p, c)) - ((1 - t) * a.radius + t * b.radius);
  };
  const double phi = (std::sqrt(5.0) - 1) / 2;
  double lo = 0.0, hi = 1.0;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double g1 = g(x1), g2 = g(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    if (g1 < g2) {
      hi = x2;
      x2 = x1;
      g2 = g1;
      x1 = hi - phi * (hi - lo);
      g1 = g(x1);
    } else {
      lo = x1;
      x1 = x2;
      g1 = g2;
      x2 = lo + phi * (hi - lo);
      g2 = g(x2);
    }
  }
  return std::min({g(0.0), g(1.0), g1, g2});
}

// Throws Overlap when two disks touch or intersect.
inline HCertificate validate_scene(const std::vector<Disk>& disks) {
  const int n = static_cast<int>(disks.size());
  if (n < 3) fail(ErrorKind::InvalidInput, "a billiard scene needs at least 3 obstacles");
  for (const auto& d : disks)
    if (!(d.radius > 0.0) || !std::isfinite(d.center[0]) || !std::isfinite(d.center[1]))
      fail(ErrorKind::InvalidInput, "disk radii must be positive and centers finite");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double gap = geom::norm(geom::sub(disks[i].center, disks[j].center)) - disks[i].radius - disks[j].radius;
      if (!(gap > 0.0))
        fail(ErrorKind::Overlap, "disks " + std::to_string(i + 1) + " and " + std::to_string(j + 1) + " intersect");
    }
  HCertificate cert;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        if (l == i || l == j) continue;
        const double margin = distance_to_disk_hull(disks[l].center, disks[i], disks[j]) - disks[l].radius;
        if (margin < cert.margin) cert = HCertificate{false, margin, i, j, l};
      }
  cert.pass = cert.margin > 0.0;
  return cert;
}

class BilliardScene {
 public:
  explicit BilliardScene(std::vector<Disk> disks) : disks_(std::move(disks)), cert_(validate_scene(disks_)) {
    if (!cert_.pass)
      fail(ErrorKind::InvalidInput, "condition (H) fails: hull of disks " + std::to_string(cert_.i + 1) + " and " +
                                        std::to_string(cert_.j + 1) + " meets disk " + std::to_string(cert_.l + 1));
  }

  // Disks of radius r centered at the vertices of an equilateral triangle of side L.
  static BilliardScene symmetric_three(double side = 6.0, double radius = 1.0) {
    const double h = side * std::sqrt(3.0) / 2;
    return BilliardScene({Disk{{0.0, 0.0}, radius}, Disk{{side, 0.0}, radius}, Disk{{side / 2, h}, radius}});
  }

  const std::vector<Disk>& disks() const { return disks_; }
  int size() const { return static_cast<int>(disks_.size()); }
  const HCertificate& certificate() const { return cert_; }
  TransitionMatrix coding_matrix() const { return TransitionMatrix::no_repeat(size()); }

  // Smallest boundary gap between distinct obstacles: a lower bound for every segment.
  double min_gap() const {
    double out = std::numeric_limits<double>::infinity();
    for (int i = 0; i < size(); ++i)
      for (int j = i + 1; j < size(); ++j)
        out = std::min(out, geom::norm(geom::sub(disks_[i].center, disks_[j].center)) - disks_[i].radius - disks_[j].radius);
    return out;
  }

  // Largest distance between points of two distinct obstacles: an upper bound for every segment.
  double max_span() const {
    double out = 0.0;
    for (int i = 0; i < size(); ++i)
      for (int j = i + 1; j < size(); ++j)
        out = std::max(out, geom::norm(geom::sub(disks_[i].center, disks_[j].center)) + disks_[i].radius + disks_[j].radius);
    return out;
  }

 private:
  std::vector<Disk> disks_;
  HCertificate cert_;
};

struct OrbitSolverOptions {
  double orbit_tol = 1e-12;
  int max_sweeps = 1000;
  int max_newton = 100;
  double shadow_tol = 1e-9;  // relative slack in the segment-disk distance test
};

struct ReflectionPath {
  Word code;
  std::vector<double> angles;
  std::vector<Vec2> points;
  std::vector<double> segment_lengths;  // segment j joins P_j to P_{j+1}
  double total_length = 0.0;
  bool converged = false;
  double residual = 0.0;  // max over j of |(u_in - u_out) . tangent_j|
  int sweeps = 0;
  int newton_steps = 0;
};

namespace detail {

struct PathState {
  const BilliardScene* scene;
  const Word* code;
  std::vector<double> phi;

  std::size_t n() const { return code->size(); }
  const Disk& disk(std::size_t j) const { return scene->disks()[(*code)[j % n()]]; }
  Vec2 point(std::size_t j) const {
    const Disk& d = disk(j);
    const double a = phi[j % n()];
    return {d.center[0] + d.radius * std::cos(a), d.center[1] + d.radius * std::sin(a)};
  }
  Vec2 tangent(std::size_t j) const {  // dP/dphi
    const Disk& d = disk(j);
    const double a = phi[j % n()];
    return {-d.radius * std::sin(a), d.radius * std::cos(a)};
  }
  double length() const {
    double total = 0.0;
    for (std::size_t j = 0; j < n(); ++j) total += geom::norm(geom::sub(point(j + 1), point(j)));
    return total;
  }
  // dL/dphi_j = (u_in - u_out) . T_j
  double gradient(std::size_t j) const {
    const std::size_t prev = (j + n() - 1) % n();
    const Vec2 p = point(j);
    const Vec2 in = geom::sub(p, point(prev));
    const Vec2 out = geom::sub(point(j + 1), p);
    const Vec2 t = tangent(j);
    return geom::dot(in, t) / geom::norm(in) - geom::dot(out, t) / geom::norm(out);
  }
  // Reflection-law defect: the gradient measured with the unit tangent.
  double defect(std::size_t j) const { return std::abs(gradient(j)) / disk(j).radius; }
  double max_defect() const {
    double r = 0.0;
    for (std::size_t j = 0; j < n(); ++j) r = std::max(r, defect(j));
    return r;
  }

  // d^2 L / dphi_j^2 from the two segments meeting at P_j.
  double hessian_diagonal(std::size_t j) const {
    const std::size_t m = n();
    const Vec2 p = point(j), t = tangent(j);
    const Vec2 acc = geom::sub(disk(j).center, p);
    double h = 0.0;
    for (int side = 0; side < 2; ++side) {
      const Vec2 other = side == 0 ? point((j + m - 1) % m) : point(j + 1);
      const Vec2 d = geom::sub(p, other);  // from the neighbour to P_j
      const double len = geom::norm(d);
      const Vec2 u = geom::scale(d, 1.0 / len);
      const double tt = geom::dot(t, t), tu = geom::dot(t, u);
      h += (tt - tu * tu) / len + geom::dot(u, acc);
    }
    return h;
  }

  Eigen::MatrixXd hessian() const {
    const std::size_t m = n();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t j = 0; j < m; ++j) {  // segment j: P_j -> P_{j+1}
      const std::size_t a = j, b = (j + 1) % m;
      const Vec2 pa = point(a), pb = point(b);
      const Vec2 d = geom::sub(pb, pa);
      const double len = geom::norm(d);
      const Vec2 u = geom::scale(d, 1.0 / len);
      const Vec2 ta = tangent(a), tb = tangent(b);
      auto proj = [&](const Vec2& x, const Vec2& y) { return (geom::dot(x, y) - geom::dot(x, u) * geom::dot(y, u)) / len; };
      const Vec2 acc_a = geom::sub(disk(a).center, pa);  // d^2P/dphi^2
      const Vec2 acc_b = geom::sub(disk(b).center, pb);
      h(a, a) += proj(ta, ta) - geom::dot(u, acc_a);
      h(b, b) += proj(tb, tb) + geom::dot(u, acc_b);
      h(a, b) -= proj(ta, tb);
      h(b, a) -= proj(ta, tb);
    }
    return h;
  }
};

inline double wrap_angle(double a) { return std::remainder(a, 2 * std::numbers::pi); }

}  // namespace detail

// Start angle: toward the bisector of the directions to the two neighbouring
// obstacle centers.
inline std::vector<double> default_start_angles(const BilliardScene& scene, WordView code) {
  const std::size_t n = code.size();
  std::vector<double> phi(n);
  for (std::size_t j = 0; j < n; ++j) {
    const Vec2 c = scene.disks()[code[j]].center;
    const Vec2 a = geom::sub(scene.disks()[code[(j + n - 1) % n]].center, c);
    const Vec2 b = geom::sub(scene.disks()[code[(j + 1) % n]].center, c);
    Vec2 dir = geom::add(geom::scale(a, 1.0 / geom::norm(a)), geom::scale(b, 1.0 / geom::norm(b)));
    if (geom::norm(dir) < 1e-12) dir = a;
    phi[j] = std::atan2(dir[1], dir[0]);
  }
  return phi;
}

// Segment-to-disk distance test: no segment may enter any obstacle interior.
inline void check_shadow(const BilliardScene& scene, const ReflectionPath& path, double tol) {
  const std::size_t n = path.points.size();
  for (std::size_t j = 0; j < n; ++j) {
    const Vec2& a = path.points[j];
    const Vec2& b = path.points[(j + 1) % n];
    for (int d = 0; d < scene.size(); ++d) {
      const Disk& disk = scene.disks()[d];
      if (geom::point_segment_distance(disk.center, a, b) < disk.radius * (1.0 - tol))
        fail(ErrorKind::ShadowViolation, "segment " + std::to_string(j) + " of " +
                                             format_word(path.code, scene.size()) + " enters obstacle " +
                                             std::to_string(d + 1));
    }
  }
}

// Minimizes the length of the closed polygon coded by `code`: coordinate
// descent sweeps (one-dimensional Newton on each angle) bring the defect down
// to 1e-3, then damped Newton on the full gradient with the cyclic tridiagonal
// Hessian finishes.
inline ReflectionPath solve_orbit(const BilliardScene& scene, WordView code, const OrbitSolverOptions& opts = {},
                                  const std::vector<double>* start = nullptr) {
  const TransitionMatrix a = scene.coding_matrix();
  if (code.size() < 2 || !is_cyclically_admissible(a, code))
    fail(ErrorKind::InadmissibleWord, "code " + (code.empty() ? std::string("<empty>") : format_word(code, scene.size())) +
                                          " is not a periodic billiard code");
  const Word word(code.begin(), code.end());
  detail::PathState st{&scene, &word, start ? *start : default_start_angles(scene, code)};
  if (st.phi.size() != word.size()) fail(ErrorKind::InvalidInput, "start angles do not match the code length");
  const std::size_t n = word.size();

  ReflectionPath path;
  path.code = word;
  for (int sweep = 0; sweep < opts.max_sweeps && st.max_defect() > 1e-3; ++sweep) {
    ++path.sweeps;
    for (std::size_t j = 0; j < n; ++j) {
      for (int inner = 0; inner < 3; ++inner) {
        const double g = st.gradient(j);
        const double hjj = st.hessian_diagonal(j);
        double step = hjj > 0 ? -g / hjj : -0.1 * g;
        step = std::clamp(step, -0.5, 0.5);
        const double before = st.length();
        const double old = st.phi[j];
        st.phi[j] = old + step;
        while (st.length() > before && std::abs(step) > 1e-16) {
          step *= 0.5;
          st.phi[j] = old + step;
        }
      }
    }
  }
  for (int it = 0; it < opts.max_newton && st.max_defect() > opts.orbit_tol; ++it) {
    ++path.newton_steps;
    Eigen::VectorXd g(n);
    for (std::size_t j = 0; j < n; ++j) g[j] = st.gradient(j);
    const Eigen::MatrixXd h = st.hessian();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      step = -ldlt.solve(g);
    } else {
      step = -g;
    }
    const double before = st.length();
    const double defect_before = st.max_defect();
    const std::vector<double> old = st.phi;
    double t = 1.0;
    for (int back = 0; back < 60; ++back) {
      for (std::size_t j = 0; j < n; ++j) st.phi[j] = old[j] + t * step[j];
      const double after = st.length();
      // Near the minimum the length is flat to rounding; accept steps that reduce the defect.
      if (after < before || (after <= before + 1e-14 * before && st.max_defect() < defect_before)) break;
      t *= 0.5;
    }
    if (st.phi == old) break;
  }
  for (double& p : st.phi) p = detail::wrap_angle(p);
  path.angles = st.phi;
  for (std::size_t j = 0; j < n; ++j) path.points.push_back(st.point(j));
  for (std::size_t j = 0; j < n; ++j) {
    path.segment_lengths.push_back(geom::norm(geom::sub(path.points[(j + 1) % n], path.points[j])));
    path.total_length += path.segment_lengths.back();
  }
  path.residual = st.max_defect();
  path.converged = path.residual <= opts.orbit_tol;
  if (!path.converged)
    fail(ErrorKind::NotConverged, "orbit " + format_word(word, scene.size()) + " stalled at defect " +
                                      csv::format_real(path.residual));
  check_shadow(scene, path, opts.shadow_tol);
  return path;
}

// ---------------------------------------------------------------------------
// Geometric potential

struct GeometricPotentialOptions {
  SinaiOptions sinai{};
  int anchor_length = 40;
  OrbitSolverOptions solver{};
};

// Two-sided observable F(xi) = |P_1(xi) - P_0(xi)| evaluated on a finite
// window: the window is closed up into a periodic code (a bridging symbol is
// inserted when its last and first symbols coincide) and the periodic orbit of
// that code stands in for the bi-infinite trajectory near the origin.
class WindowSegmentObservable {
 public:
  WindowSegmentObservable(const BilliardScene& scene, OrbitSolverOptions opts) : scene_(&scene), opts_(opts) {}

  double operator()(WordView window, std::size_t origin) {
    if (origin + 1 >= window.size()) fail(ErrorKind::InvalidInput, "window too short after the origin");
    return solved(window).segment_lengths[origin];
  }

 private:
  struct Entry {
    Word key;
    ReflectionPath path;
  };

  // The reduction alternates between two windows per cylinder, so two
  // entries are enough to solve each window once.
  const ReflectionPath& solved(WordView window) {
    for (auto& e : cache_)
      if (e.key.size() == window.size() && std::equal(window.begin(), window.end(), e.key.begin())) return e.path;
    Word closed(window.begin(), window.end());
    if (closed.back() == closed.front()) {
      Symbol bridge = 0;
      while (bridge == closed.back() || bridge == closed.front()) ++bridge;
      closed.push_back(bridge);
    }
    Entry e{Word(window.begin(), window.end()), solve_orbit(*scene_, closed, opts_)};
    if (cache_.size() == 2) cache_.erase(cache_.begin());
    cache_.push_back(std::move(e));
    return cache_.back().path;
  }

  const BilliardScene* scene_;
  OrbitSolverOptions opts_;
  std::vector<Entry> cache_;
};

// Depth-k table of the Sinai-reduced segment-length function. Periodic
// Birkhoff sums of the table approximate exact orbit lengths, with an error
// that shrinks geometrically in k.
inline Potential geometric_potential(const BilliardScene& scene, int depth, const GeometricPotentialOptions& opts = {}) {
  const TransitionMatrix a = scene.coding_matrix();
  // One cached observable per thread; evaluation is sequential within a word.
  auto make = [&]() { return std::make_shared<WindowSegmentObservable>(scene, opts.solver); };
  std::mutex guard;
  std::map<std::thread::id, std::shared_ptr<WindowSegmentObservable>> per_thread;
  TwoSidedObservable F{[&](WordView window, std::size_t origin) {
                         std::shared_ptr<WindowSegmentObservable> obs;
                         {
                           std::lock_guard<std::mutex> lock(guard);
                           auto& slot = per_thread[std::this_thread::get_id()];
                           if (!slot) slot = make();
                           obs = slot;
                         }
                         return (*obs)(window, origin);
                       },
                       true};
  return sinai_reduce(a, F, TailAnchor::greedy(a, opts.anchor_length), depth, opts.sinai,
                      Provenance::BilliardGeometric);
}

// ---------------------------------------------------------------------------
// Length spectrum

struct SpectrumEntry {
  OrbitRecord orbit;
  double length = 0.0;
  double residual = 0.0;
};

// Every primitive periodic code with 2 <= n <= n_max reflections, solved
// exactly; sorted by length, then n, then code.
inline std::vector<SpectrumEntry> length_spectrum(const BilliardScene& scene, int n_max,
                                                  const EnumerationOptions& enumeration = {},
                                                  const OrbitSolverOptions& opts = {}) {
  const TransitionMatrix a = scene.coding_matrix();
  std::vector<Word> codes;
  for (int n = 2; n <= n_max; ++n) {
    auto words = primitive_orbit_words(a, n, enumeration.budget);
    codes.insert(codes.end(), words.begin(), words.end());
  }
  auto solved = parallel_map<SpectrumEntry>(codes.size(), enumeration.parallelism, [&](std::size_t i) {
    const auto path = solve_orbit(scene, codes[i], opts);
    SpectrumEntry e;
    const int n = static_cast<int>(codes[i].size());
    e.orbit = OrbitRecord{codes[i], n, true, n, path.total_length};
    e.length = path.total_length;
    e.residual = path.residual;
    return e;
  });
  std::stable_sort(solved.begin(), solved.end(), [](const SpectrumEntry& x, const SpectrumEntry& y) {
    if (x.length != y.length) return x.length < y.length;
    if (x.orbit.length != y.orbit.length) return x.orbit.length < y.orbit.length;
    return x.orbit.canonical_word < y.orbit.canonical_word;
  });
  return solved;
}

inline std::string spectrum_to_csv(const std::vector<SpectrumEntry>& spectrum, int kappa) {
  csv::Table t({"code", "n", "primitive", "length"});
  for (const auto& e : spectrum)
    t.add_row({format_word(e.orbit.canonical_word, kappa), std::to_string(e.orbit.length), e.orbit.primitive ? "1" : "0",
               csv::format_real(e.length)});
  return t.str();
}

// Multistart cross-check: solves from `starts` random initial angle vectors and
// returns the largest deviation of total length from the default-start solution.
inline double multistart_spread(const BilliardScene& scene, WordView code, int starts, std::uint64_t seed,
                                const OrbitSolverOptions& opts = {}) {
  const double reference = solve_orbit(scene, code, opts).total_length;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.6, 0.6);
  const auto base = default_start_angles(scene, code);
  double spread = 0.0;
  for (int s = 0; s < starts; ++s) {
    std::vector<double> phi = base;
    for (double& p : phi) p += jitter(rng);
    spread = std::max(spread, std::abs(solve_orbit(scene, code, opts, &phi).total_length - reference));
  }
  return spread;
}

}  // namespace orbit_census
