#pragma once

// Potentials on one-sided subshifts, represented at finite cylinder depth k:
// f(x) is looked up from the length-k prefix of x. Periodic points are
// evaluated on their periodic extension (indices mod n), which makes periodic
// Birkhoff sums exact orbit invariants.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "orbit_census/csv.hpp"
#include "orbit_census/error.hpp"
#include "orbit_census/parallel.hpp"
#include "orbit_census/symbolic.hpp"

namespace orbit_census {

enum class Provenance { ExplicitTable, SinaiReduced, BilliardGeometric };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::ExplicitTable: return "explicit-table";
    case Provenance::SinaiReduced: return "sinai-reduced";
    case Provenance::BilliardGeometric: return "billiard-geometric";
  }
  return "unknown";
}

// Admissible (not necessarily cyclic) words of length k, lexicographic.
inline std::vector<Word> admissible_words(const TransitionMatrix& a, int k) {
  if (k < 1) fail(ErrorKind::InvalidInput, "depth must be >= 1");
  std::vector<Word> out;
  Word w(k);
  std::function<void(int)> extend = [&](int pos) {
    if (pos == k) {
      out.push_back(w);
      return;
    }
    for (int s = 0; s < a.size(); ++s) {
      if (pos > 0 && !a.allowed(w[pos - 1], static_cast<Symbol>(s))) continue;
      w[pos] = static_cast<Symbol>(s);
      extend(pos + 1);
    }
  };
  extend(0);
  return out;
}

inline constexpr std::uint64_t kMaxCylinderCodes = std::uint64_t{1} << 26;

class Potential {
 public:
  Potential(TransitionMatrix a, int depth, const std::vector<std::pair<Word, double>>& entries,
            Provenance provenance = Provenance::ExplicitTable)
      : a_(std::move(a)), depth_(depth), provenance_(provenance) {
    if (depth < 1) fail(ErrorKind::InvalidInput, "depth must be >= 1");
    std::uint64_t codes = 1;
    for (int i = 0; i < depth; ++i) {
      codes *= static_cast<std::uint64_t>(a_.size());
      if (codes > kMaxCylinderCodes)
        fail(ErrorKind::StateSpaceTooLarge, "kappa^depth exceeds " + std::to_string(kMaxCylinderCodes));
    }
    modulus_ = codes;
    values_.assign(codes, std::numeric_limits<double>::quiet_NaN());
    for (const auto& [word, value] : entries) {
      if (static_cast<int>(word.size()) != depth)
        fail(ErrorKind::InvalidInput, "table word " + format_word(word, a_.size()) + " has wrong length");
      if (!is_admissible(a_, word))
        fail(ErrorKind::InvalidInput, "table word " + format_word(word, a_.size()) + " is not admissible");
      if (!std::isfinite(value))
        fail(ErrorKind::InvalidInput, "non-finite value for " + format_word(word, a_.size()));
      double& slot = values_[code(word)];
      if (!std::isnan(slot)) fail(ErrorKind::InvalidInput, "duplicate entry " + format_word(word, a_.size()));
      slot = value;
    }
    words_ = admissible_words(a_, depth);
    d0_ = std::numeric_limits<double>::infinity();
    d1_ = -std::numeric_limits<double>::infinity();
    for (const auto& w : words_) {
      const double v = values_[code(w)];
      if (std::isnan(v)) fail(ErrorKind::MissingCylinder, "no value for cylinder " + format_word(w, a_.size()));
      d0_ = std::min(d0_, v);
      d1_ = std::max(d1_, v);
    }
    positive_ = d0_ > 0.0;
  }

  // f(x) = g(x_0): a one-coordinate potential.
  static Potential from_symbol_values(const TransitionMatrix& a, const std::vector<double>& per_symbol) {
    if (static_cast<int>(per_symbol.size()) != a.size()) fail(ErrorKind::InvalidInput, "one value per symbol required");
    std::vector<std::pair<Word, double>> entries;
    for (int s = 0; s < a.size(); ++s) entries.push_back({Word{static_cast<Symbol>(s)}, per_symbol[s]});
    return Potential(a, 1, entries);
  }

  static Potential constant(const TransitionMatrix& a, double c, int depth = 1) {
    std::vector<std::pair<Word, double>> entries;
    for (auto& w : admissible_words(a, depth)) entries.push_back({w, c});
    return Potential(a, depth, entries);
  }

  const TransitionMatrix& matrix() const { return a_; }
  int depth() const { return depth_; }
  int kappa() const { return a_.size(); }
  Provenance provenance() const { return provenance_; }
  bool positive() const { return positive_; }
  double d0() const { return d0_; }
  double d1() const { return d1_; }
  const std::vector<Word>& words() const { return words_; }

  std::uint64_t code(WordView w) const {
    std::uint64_t c = 0;
    for (Symbol s : w) c = c * static_cast<std::uint64_t>(a_.size()) + s;
    return c;
  }
  std::uint64_t code_modulus() const { return modulus_; }

  // Value on the cylinder with the given base-kappa code; NaN when inadmissible.
  double value_by_code(std::uint64_t c) const { return values_[c]; }

  double value(WordView window) const {
    if (static_cast<int>(window.size()) != depth_)
      fail(ErrorKind::InvalidInput, "window length differs from potential depth");
    const double v = is_admissible(a_, window) ? values_[code(window)] : std::numeric_limits<double>::quiet_NaN();
    if (std::isnan(v)) fail(ErrorKind::MissingCylinder, "no value for cylinder " + format_word(window, a_.size()));
    return v;
  }

  std::vector<std::pair<Word, double>> entries() const {
    std::vector<std::pair<Word, double>> out;
    out.reserve(words_.size());
    for (const auto& w : words_) out.push_back({w, values_[code(w)]});
    return out;
  }

  // Same function sampled on the finer partition into depth-k' cylinders.
  Potential resample(int new_depth) const {
    if (new_depth < depth_) fail(ErrorKind::InvalidInput, "resampling can only increase depth");
    std::vector<std::pair<Word, double>> entries;
    for (auto& w : admissible_words(a_, new_depth))
      entries.push_back({w, values_[code(WordView(w).first(depth_))]});
    return Potential(a_, new_depth, entries, provenance_);
  }

 private:
  TransitionMatrix a_;
  int depth_;
  Provenance provenance_;
  std::uint64_t modulus_ = 1;
  std::vector<double> values_;
  std::vector<Word> words_;
  double d0_ = 0.0, d1_ = 0.0;
  bool positive_ = false;
};

// ---------------------------------------------------------------------------
// Birkhoff sums on periodic words

template <class Real = double>
Real birkhoff_sum(const Potential& f, WordView w) {
  if (!is_cyclically_admissible(f.matrix(), w))
    fail(ErrorKind::InadmissibleWord, format_word(w, f.kappa()) + " is not a periodic word of the shift");
  const std::size_t n = w.size();
  const int k = f.depth();
  Real total = 0;
  Word window(k);
  for (std::size_t j = 0; j < n; ++j) {
    for (int i = 0; i < k; ++i) window[i] = w[(j + i) % n];
    total += static_cast<Real>(f.value(window));
  }
  return total;
}

// Optional pruning interval for periodic sums. Branches whose partial sum
// cannot reach [lo, hi] given d0 <= f <= d1 are skipped; words that survive
// are still visited with their exact sum, so callers keep their own test.
template <class Real>
struct SumBounds {
  Real lo = -std::numeric_limits<Real>::infinity();
  Real hi = std::numeric_limits<Real>::infinity();
};

// Enumerates the periodic words of length n beginning with `first` together
// with their Birkhoff sums f^n, in lexicographic order. Windows that fit inside
// the word are accumulated incrementally during the depth-first search.
template <class Real = double, class Visitor>
void for_each_periodic_sum_in_shard(const Potential& f, int n, Symbol first, Visitor&& visit,
                                    const SumBounds<Real>& bounds = {}) {
  const TransitionMatrix& a = f.matrix();
  const int k = f.depth();
  const int kappa = a.size();
  const std::uint64_t mod = f.code_modulus();
  if (n < 1) fail(ErrorKind::InvalidInput, "period must be >= 1");
  const bool pruning = std::isfinite(static_cast<double>(bounds.lo)) || std::isfinite(static_cast<double>(bounds.hi));
  const Real d0 = static_cast<Real>(f.d0()), d1 = static_cast<Real>(f.d1());
  const Real slack_lo = std::isfinite(static_cast<double>(bounds.lo)) ? Real(1e-9) * (1 + std::abs(bounds.lo)) : Real(0);
  const Real slack_hi = std::isfinite(static_cast<double>(bounds.hi)) ? Real(1e-9) * (1 + std::abs(bounds.hi)) : Real(0);
  Word w(n);
  std::vector<Real> partial(n, Real(0));
  std::vector<std::uint64_t> code(n, 0);
  auto wrap_sum = [&](Real linear) {
    Real total = linear;
    const int start = std::max(0, n - k + 1);
    for (int j = start; j < n; ++j) {
      std::uint64_t c = 0;
      for (int i = 0; i < k; ++i) c = c * kappa + w[(j + i) % n];
      total += static_cast<Real>(f.value_by_code(c));
    }
    return total;
  };
  auto place = [&](int pos, Symbol s) {
    w[pos] = s;
    const std::uint64_t prev = pos ? code[pos - 1] : 0;
    code[pos] = (prev * kappa + s) % mod;
    const Real prev_sum = pos ? partial[pos - 1] : Real(0);
    partial[pos] = pos >= k - 1 ? prev_sum + static_cast<Real>(f.value_by_code(code[pos])) : prev_sum;
  };
  // Windows starting at 0..pos-k+1 are complete after placing pos.
  auto hopeless = [&](int pos) {
    const int remaining = n - std::max(0, pos - k + 2);
    return partial[pos] + remaining * d0 > bounds.hi + slack_hi || partial[pos] + remaining * d1 < bounds.lo - slack_lo;
  };
  place(0, first);
  if (n == 1) {
    if (a.allowed(first, first)) visit(WordView(w), wrap_sum(partial[0]));
    return;
  }
  std::vector<int> next(n, 0);
  int pos = 1;
  while (pos >= 1) {
    if (next[pos] >= kappa) {
      --pos;
      continue;
    }
    const auto s = static_cast<Symbol>(next[pos]++);
    if (!a.allowed(w[pos - 1], s)) continue;
    place(pos, s);
    if (pos == n - 1) {
      if (a.allowed(s, w[0])) visit(WordView(w), wrap_sum(partial[pos]));
    } else if (!(pruning && hopeless(pos))) {
      ++pos;
      next[pos] = 0;
    }
  }
}

template <class Real = double, class Visitor>
void for_each_periodic_sum(const Potential& f, int n, Visitor&& visit, std::uint64_t budget = kDefaultEnumerationBudget,
                           const SumBounds<Real>& bounds = {}) {
  check_budget(f.matrix(), n, budget);
  for (int s = 0; s < f.kappa(); ++s) for_each_periodic_sum_in_shard<Real>(f, n, static_cast<Symbol>(s), visit, bounds);
}

// Sharded reduction over Fix(sigma^n): each shard folds its words into a
// Partial with fold(Partial&, WordView, Real), shards are merged in order with
// merge(Partial&, const Partial&). Deterministic for any worker count.
template <class Real, class Partial, class Fold, class Merge>
Partial reduce_periodic_sums(const Potential& f, int n, const EnumerationOptions& opts, Partial init, Fold&& fold,
                             Merge&& merge, const SumBounds<Real>& bounds = {}) {
  check_budget(f.matrix(), n, opts.budget);
  auto shards = parallel_map<Partial>(f.kappa(), opts.parallelism, [&](std::size_t s) {
    Partial part = init;
    for_each_periodic_sum_in_shard<Real>(
        f, n, static_cast<Symbol>(s), [&](WordView w, Real sum) { fold(part, w, sum); }, bounds);
    return part;
  });
  Partial total = init;
  for (const auto& part : shards) merge(total, part);
  return total;
}

// f^n for every word of Fix(sigma^n), in lexicographic word order.
inline std::vector<double> periodic_sums(const Potential& f, int n, const EnumerationOptions& opts = {}) {
  return reduce_periodic_sums<double>(
      f, n, opts, std::vector<double>{}, [](std::vector<double>& v, WordView, double s) { v.push_back(s); },
      [](std::vector<double>& total, const std::vector<double>& part) { total.insert(total.end(), part.begin(), part.end()); });
}

// ---------------------------------------------------------------------------
// Sinai reduction of a two-sided observable

// Fixed pasts eta^(i), one per symbol; pasts[i] is admissible and ends in i.
struct TailAnchor {
  std::vector<Word> pasts;

  // Each past is built backwards from i by always taking the smallest
  // admissible predecessor.
  static TailAnchor greedy(const TransitionMatrix& a, std::size_t length) {
    if (length < 1) fail(ErrorKind::InvalidInput, "anchor length must be >= 1");
    TailAnchor anchor;
    for (int i = 0; i < a.size(); ++i) {
      Word past{static_cast<Symbol>(i)};
      while (past.size() < length) {
        const Symbol cur = past.back();
        int pred = 0;
        while (!a.allowed(static_cast<Symbol>(pred), cur)) ++pred;
        past.push_back(static_cast<Symbol>(pred));
      }
      std::reverse(past.begin(), past.end());
      anchor.pasts.push_back(std::move(past));
    }
    return anchor;
  }

  void validate(const TransitionMatrix& a) const {
    if (static_cast<int>(pasts.size()) != a.size()) fail(ErrorKind::InvalidInput, "one anchor past per symbol required");
    for (std::size_t i = 0; i < pasts.size(); ++i) {
      if (pasts[i].empty() || pasts[i].back() != i || !is_admissible(a, pasts[i]))
        fail(ErrorKind::InvalidInput, "anchor past for symbol " + std::to_string(i + 1) + " is malformed");
    }
  }
};

// F on a two-sided sequence, given a finite window of it and the index of
// coordinate 0 inside the window. Coordinates outside the window are the
// observable's own business (it must depend on them only weakly).
struct TwoSidedObservable {
  std::function<double(WordView window, std::size_t origin)> evaluate;
  bool concurrent = true;  // safe to call from several threads at once
};

struct SinaiOptions {
  int n_tail = 60;
  double tail_tol = 1e-10;
  int future_margin = 24;
  Parallelism parallelism{};
};

// Extends w to `length` symbols: periodically if w is a periodic word,
// otherwise by repeatedly appending the smallest admissible successor.
inline Word future_completion(const TransitionMatrix& a, WordView w, std::size_t length) {
  Word out(w.begin(), w.end());
  const bool periodic = is_cyclically_admissible(a, w);
  while (out.size() < length) {
    if (periodic) {
      out.push_back(w[out.size() % w.size()]);
    } else {
      int next = 0;
      while (!a.allowed(out.back(), static_cast<Symbol>(next))) ++next;
      out.push_back(static_cast<Symbol>(next));
    }
  }
  return out;
}

// One-sided depth-k potential cohomologous to F:
//   f~(x) = F(e(x)) + sum_{j>=0} [F(sigma^{j+1} e(x)) - F(sigma^j e(sigma x))]
// where e(x) replaces the past of x by the anchor past ending in x_0. Each
// k-word w is evaluated at x = w followed by future_completion(w).
inline Potential sinai_reduce(const TransitionMatrix& a, const TwoSidedObservable& F, const TailAnchor& anchors,
                              int depth, const SinaiOptions& opts = {},
                              Provenance provenance = Provenance::SinaiReduced) {
  anchors.validate(a);
  if (opts.n_tail < 1) fail(ErrorKind::InvalidInput, "n_tail must be >= 1");
  const auto words = admissible_words(a, depth);
  const std::size_t future_len = static_cast<std::size_t>(depth + opts.n_tail + opts.future_margin);

  auto window_for = [&](WordView future) {
    const Word& past = anchors.pasts[future.front()];
    Word window(past.begin(), past.end() - 1);
    const std::size_t origin = window.size();
    window.insert(window.end(), future.begin(), future.end());
    return std::pair{window, origin};
  };

  std::vector<double> values(words.size());
  Parallelism par = F.concurrent ? opts.parallelism : Parallelism{1};
  parallel_for(words.size(), par, [&](std::size_t idx) {
    const Word x = future_completion(a, words[idx], future_len);
    const auto [ex, ox] = window_for(x);
    const auto [esx, osx] = window_for(WordView(x).subspan(1));
    double total = F.evaluate(ex, ox);
    double last = 0.0;
    for (int j = 0; j < opts.n_tail; ++j) {
      last = F.evaluate(ex, ox + j + 1) - F.evaluate(esx, osx + j);
      total += last;
    }
    if (!(std::abs(last) <= opts.tail_tol))
      fail(ErrorKind::TailNotConverged, "coboundary series for " + format_word(words[idx], a.size()) +
                                            " still moves by " + csv::format_real(last));
    values[idx] = total;
  });
  std::vector<std::pair<Word, double>> entries;
  for (std::size_t i = 0; i < words.size(); ++i) entries.push_back({words[i], values[i]});
  return Potential(a, depth, entries, provenance);
}

// ---------------------------------------------------------------------------
// Lattice screen

enum class LatticeVerdict { LooksNonLattice, LooksLattice, Inconclusive };

inline std::string_view to_string(LatticeVerdict v) {
  switch (v) {
    case LatticeVerdict::LooksNonLattice: return "looks-non-lattice";
    case LatticeVerdict::LooksLattice: return "looks-lattice";
    case LatticeVerdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct LatticeScreenReport {
  LatticeVerdict verdict = LatticeVerdict::Inconclusive;
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  double max_residual = 0.0;
  double max_multiplier = 0.0;  // largest fitted integer m
  std::size_t orbits_tested = 0;
};

struct LatticeScreenOptions {
  int n_max = 12;
  double lattice_tol = 1e-8;
  double max_multiplier = 1e6;
  std::uint64_t budget = kDefaultEnumerationBudget;
};

namespace detail {

inline double approximate_gcd(double a, double b, double tol) {
  if (a < b) std::swap(a, b);
  while (b > tol) {
    double r = std::fmod(a, b);
    if (r < tol || b - r < tol) r = 0.0;
    a = b;
    b = r;
  }
  return a;
}

}  // namespace detail

// Heuristic: fits the f-periods of primitive orbits to gamma0*n + gamma1*m with
// integer m (transfer function G = 0). Never a proof either way.
inline LatticeScreenReport screen_lattice(const Potential& f, const LatticeScreenOptions& opts = {}) {
  std::vector<std::pair<int, double>> periods;
  for (int n = 1; n <= opts.n_max; ++n) {
    for_each_periodic_sum(
        f, n,
        [&](WordView w, double sum) {
          if (minimal_period(w) == w.size() && is_canonical(w)) periods.push_back({n, sum});
        },
        opts.budget);
  }
  LatticeScreenReport rep;
  rep.orbits_tested = periods.size();
  if (periods.size() < 2) return rep;

  double scale = 0.0;
  auto best = periods.front();
  for (const auto& p : periods) {
    scale = std::max(scale, std::abs(p.second));
    if (p.second / p.first < best.second / best.first) best = p;
  }
  rep.gamma0 = best.second / best.first;
  const double tol = std::max(opts.lattice_tol, 1e-13 * scale);
  std::vector<double> offsets;
  double largest = 0.0;
  for (const auto& [n, t] : periods) {
    offsets.push_back(t - rep.gamma0 * n);
    largest = std::max(largest, std::abs(offsets.back()));
  }
  if (largest <= tol) {
    rep.gamma1 = 0.0;
    rep.max_residual = largest;
    rep.verdict = LatticeVerdict::LooksLattice;
    return rep;
  }
  double g = 0.0;
  for (double v : offsets) {
    const double av = std::abs(v);
    if (av <= tol) continue;
    g = g == 0.0 ? av : detail::approximate_gcd(g, av, tol);
  }
  rep.gamma1 = g;
  for (double v : offsets) {
    const double m = std::round(v / g);
    rep.max_multiplier = std::max(rep.max_multiplier, std::abs(m));
    rep.max_residual = std::max(rep.max_residual, std::abs(v - g * m));
  }
  if (rep.max_multiplier > opts.max_multiplier || rep.max_residual > 1e3 * opts.lattice_tol)
    rep.verdict = LatticeVerdict::LooksNonLattice;
  else if (rep.max_residual < opts.lattice_tol)
    rep.verdict = LatticeVerdict::LooksLattice;
  else
    rep.verdict = LatticeVerdict::Inconclusive;
  return rep;
}

// ---------------------------------------------------------------------------
// CSV: "word,value" rows with 17 significant digits

inline std::string potential_to_csv(const Potential& f) {
  csv::Table table({"word", "value"});
  for (const auto& [w, v] : f.entries()) table.add_row({format_word(w, f.kappa()), csv::format_real(v)});
  return table.str();
}

inline Potential potential_from_csv(const std::string& text, const TransitionMatrix& a,
                                    Provenance provenance = Provenance::ExplicitTable) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<Word, double>> entries;
  int depth = 0;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = csv::split(line);
    if (first && cells.size() == 2 && cells[0] == "word") {
      first = false;
      continue;
    }
    first = false;
    if (cells.size() != 2) fail(ErrorKind::InvalidInput, "potential CSV rows must be word,value");
    Word w = parse_word(cells[0], a.size());
    if (depth == 0) depth = static_cast<int>(w.size());
    entries.push_back({std::move(w), csv::parse_real(cells[1])});
  }
  if (entries.empty()) fail(ErrorKind::InvalidInput, "potential CSV has no rows");
  return Potential(a, depth, entries, provenance);
}

}  // namespace orbit_census
