#pragma once

// Subshifts of finite type: transition matrices, words, periodic points.
//
// Symbols are stored 0-based (0..kappa-1) and printed 1-based, so the word
// printed "123" is stored as {0, 1, 2}.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orbit_census/error.hpp"
#include "orbit_census/parallel.hpp"

namespace orbit_census {

using Symbol = std::uint8_t;
using Word = std::vector<Symbol>;
using WordView = std::span<const Symbol>;
using FixedPointCount = unsigned __int128;

inline constexpr std::uint64_t kDefaultEnumerationBudget = 100'000'000;

inline std::string to_string(FixedPointCount value) {
  if (value == 0) return "0";
  std::string out;
  while (value > 0) {
    out.push_back(static_cast<char>('0' + static_cast<int>(value % 10)));
    value /= 10;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

namespace detail {

using BoolMatrix = std::vector<std::vector<std::uint8_t>>;

inline BoolMatrix bool_product(const BoolMatrix& a, const BoolMatrix& b) {
  const std::size_t n = a.size();
  BoolMatrix out(n, std::vector<std::uint8_t>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < n; ++l)
      if (a[i][l])
        for (std::size_t j = 0; j < n; ++j) out[i][j] |= b[l][j];
  return out;
}

}  // namespace detail

// Smallest M <= kappa^2 with A^M entrywise positive. Throws DeadState for a
// zero row or column, NotAperiodic when no such M exists.
inline int validate_aperiodic(const std::vector<std::vector<int>>& rows) {
  const std::size_t n = rows.size();
  if (n < 2) fail(ErrorKind::InvalidInput, "transition matrix needs at least 2 symbols");
  detail::BoolMatrix a(n, std::vector<std::uint8_t>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) fail(ErrorKind::InvalidInput, "transition matrix is not square");
    for (std::size_t j = 0; j < n; ++j) {
      if (rows[i][j] != 0 && rows[i][j] != 1)
        fail(ErrorKind::InvalidInput, "transition matrix entries must be 0 or 1");
      a[i][j] = static_cast<std::uint8_t>(rows[i][j]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    bool row = false, col = false;
    for (std::size_t j = 0; j < n; ++j) {
      row |= a[i][j] != 0;
      col |= a[j][i] != 0;
    }
    if (!row || !col) fail(ErrorKind::DeadState, "symbol " + std::to_string(i + 1) + " has an empty row or column");
  }
  auto power = a;
  const std::size_t limit = n * n;
  for (std::size_t m = 1; m <= limit; ++m) {
    const bool positive = std::all_of(power.begin(), power.end(), [](const auto& r) {
      return std::all_of(r.begin(), r.end(), [](std::uint8_t v) { return v != 0; });
    });
    if (positive) return static_cast<int>(m);
    power = detail::bool_product(power, a);
  }
  fail(ErrorKind::NotAperiodic, "no power A^M with M <= " + std::to_string(limit) + " is positive");
}

// Aperiodic 0/1 matrix without dead states; immutable after construction.
class TransitionMatrix {
 public:
  explicit TransitionMatrix(const std::vector<std::vector<int>>& rows)
      : size_(static_cast<int>(rows.size())), witness_(validate_aperiodic(rows)) {
    bits_.reserve(rows.size() * rows.size());
    for (const auto& r : rows)
      for (int v : r) bits_.push_back(static_cast<std::uint8_t>(v));
  }

  static TransitionMatrix full_shift(int kappa) {
    return TransitionMatrix(std::vector<std::vector<int>>(kappa, std::vector<int>(kappa, 1)));
  }

  // A(i,j) = 1 iff i != j; the coding matrix of open billiards.
  static TransitionMatrix no_repeat(int kappa) {
    std::vector<std::vector<int>> rows(kappa, std::vector<int>(kappa, 1));
    for (int i = 0; i < kappa; ++i) rows[i][i] = 0;
    return TransitionMatrix(rows);
  }

  int size() const { return size_; }
  int aperiodicity_witness() const { return witness_; }
  bool allowed(Symbol from, Symbol to) const { return bits_[from * size_ + to] != 0; }

  std::vector<std::vector<int>> rows() const {
    std::vector<std::vector<int>> out(size_, std::vector<int>(size_));
    for (int i = 0; i < size_; ++i)
      for (int j = 0; j < size_; ++j) out[i][j] = bits_[i * size_ + j];
    return out;
  }

  friend bool operator==(const TransitionMatrix&, const TransitionMatrix&) = default;

 private:
  int size_;
  int witness_;
  std::vector<std::uint8_t> bits_;
};

// ---------------------------------------------------------------------------
// Words

inline bool is_admissible(const TransitionMatrix& a, WordView w) {
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (w[j] >= a.size()) return false;
    if (j + 1 < w.size() && !a.allowed(w[j], w[j + 1])) return false;
  }
  return true;
}

// Admissible including the wrap pair (w_{n-1}, w_0): w encodes a point of Fix(sigma^n).
inline bool is_cyclically_admissible(const TransitionMatrix& a, WordView w) {
  return !w.empty() && is_admissible(a, w) && a.allowed(w.back(), w.front());
}

inline std::string format_word(WordView w, int kappa) {
  std::string out;
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (kappa > 9 && j) out.push_back('.');
    out += std::to_string(static_cast<int>(w[j]) + 1);
  }
  return out;
}

inline Word parse_word(std::string_view text, int kappa) {
  Word out;
  auto push = [&](int symbol) {
    if (symbol < 1 || symbol > kappa)
      fail(ErrorKind::InvalidInput, "symbol " + std::to_string(symbol) + " outside 1.." + std::to_string(kappa));
    out.push_back(static_cast<Symbol>(symbol - 1));
  };
  if (kappa <= 9) {
    for (char c : text) {
      if (c < '0' || c > '9') fail(ErrorKind::InvalidInput, "bad word '" + std::string(text) + "'");
      push(c - '0');
    }
  } else {
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto dot = text.find('.', start);
      const auto piece = text.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
      if (piece.empty()) fail(ErrorKind::InvalidInput, "bad word '" + std::string(text) + "'");
      int value = 0;
      for (char c : piece) {
        if (c < '0' || c > '9') fail(ErrorKind::InvalidInput, "bad word '" + std::string(text) + "'");
        value = value * 10 + (c - '0');
      }
      push(value);
      if (dot == std::string_view::npos) break;
      start = dot + 1;
    }
  }
  if (out.empty()) fail(ErrorKind::InvalidInput, "empty word");
  return out;
}

// Smallest d dividing n with w_i = w_{i mod d}.
inline std::size_t minimal_period(WordView w) {
  const std::size_t n = w.size();
  for (std::size_t d = 1; d < n; ++d) {
    if (n % d) continue;
    bool repeats = true;
    for (std::size_t i = d; i < n && repeats; ++i) repeats = w[i] == w[i - d];
    if (repeats) return d;
  }
  return n;
}

inline Word rotate(WordView w, std::size_t shift) {
  Word out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[(i + shift) % w.size()];
  return out;
}

// Index of the lexicographically minimal rotation (first one on ties).
inline std::size_t minimal_rotation_offset(WordView w) {
  const std::size_t n = w.size();
  std::size_t best = 0;
  for (std::size_t s = 1; s < n; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      const Symbol a = w[(s + i) % n], b = w[(best + i) % n];
      if (a != b) {
        if (a < b) best = s;
        break;
      }
    }
  }
  return best;
}

inline Word canonical_rotation(WordView w) { return rotate(w, minimal_rotation_offset(w)); }

inline bool is_canonical(WordView w) { return minimal_rotation_offset(w) == 0; }

// ---------------------------------------------------------------------------
// Fixed-point counts

// trace(A^n) in 128-bit arithmetic; throws Overflow instead of wrapping.
inline FixedPointCount count_fixed_points(const TransitionMatrix& a, int n) {
  if (n < 1) fail(ErrorKind::InvalidInput, "period must be >= 1");
  const int k = a.size();
  using Mat = std::vector<FixedPointCount>;
  auto at = [k](Mat& m, int i, int j) -> FixedPointCount& { return m[i * k + j]; };
  Mat power(k * k), base(k * k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) at(base, i, j) = at(power, i, j) = a.allowed(i, j) ? 1 : 0;
  for (int step = 1; step < n; ++step) {
    Mat next(k * k, 0);
    for (int i = 0; i < k; ++i)
      for (int l = 0; l < k; ++l) {
        const FixedPointCount left = at(power, i, l);
        if (!left) continue;
        for (int j = 0; j < k; ++j) {
          if (!at(base, l, j)) continue;
          FixedPointCount& cell = at(next, i, j);
          if (__builtin_add_overflow(cell, left, &cell))
            fail(ErrorKind::Overflow, "entry of A^" + std::to_string(step + 1) + " exceeds 128 bits");
        }
      }
    power = std::move(next);
  }
  FixedPointCount trace = 0;
  for (int i = 0; i < k; ++i)
    if (__builtin_add_overflow(trace, at(power, i, i), &trace))
      fail(ErrorKind::Overflow, "trace(A^" + std::to_string(n) + ") exceeds 128 bits");
  return trace;
}

inline void check_budget(const TransitionMatrix& a, int n, std::uint64_t budget) {
  const FixedPointCount predicted = count_fixed_points(a, n);
  if (predicted > budget)
    fail(ErrorKind::BudgetExceeded, "period " + std::to_string(n) + " has " + to_string(predicted) +
                                        " fixed points, budget is " + std::to_string(budget));
}

struct EnumerationOptions {
  std::uint64_t budget = kDefaultEnumerationBudget;
  Parallelism parallelism{};
};

// Shards of Fix(sigma^n): one per first symbol. Shard order is the global
// lexicographic order, so concatenating shards reproduces a serial run.
inline int shard_count(const TransitionMatrix& a) { return a.size(); }

// Depth-first enumeration of the cyclically admissible words of length n that
// start with `first`, in lexicographic order. visit(WordView) is called once
// per word; the view is only valid during the call.
template <class Visitor>
void for_each_periodic_in_shard(const TransitionMatrix& a, int n, Symbol first, Visitor&& visit) {
  if (n < 1) fail(ErrorKind::InvalidInput, "period must be >= 1");
  const int k = a.size();
  Word w(n);
  w[0] = first;
  if (n == 1) {
    if (a.allowed(first, first)) visit(WordView(w));
    return;
  }
  std::vector<int> next(n, 0);
  int pos = 1;
  while (pos >= 1) {
    if (next[pos] >= k) {
      --pos;
      continue;
    }
    const auto s = static_cast<Symbol>(next[pos]++);
    if (!a.allowed(w[pos - 1], s)) continue;
    w[pos] = s;
    if (pos == n - 1) {
      if (a.allowed(s, w[0])) visit(WordView(w));
    } else {
      ++pos;
      next[pos] = 0;
    }
  }
}

template <class Visitor>
void for_each_periodic(const TransitionMatrix& a, int n, Visitor&& visit,
                       std::uint64_t budget = kDefaultEnumerationBudget) {
  check_budget(a, n, budget);
  for (int s = 0; s < a.size(); ++s) for_each_periodic_in_shard(a, n, static_cast<Symbol>(s), visit);
}

// All of Fix(sigma^n) as words, lexicographically ordered.
inline std::vector<Word> enumerate_periodic(const TransitionMatrix& a, int n, const EnumerationOptions& opts = {}) {
  check_budget(a, n, opts.budget);
  auto shards = parallel_map<std::vector<Word>>(shard_count(a), opts.parallelism, [&](std::size_t s) {
    std::vector<Word> words;
    for_each_periodic_in_shard(a, n, static_cast<Symbol>(s), [&](WordView w) { words.emplace_back(w.begin(), w.end()); });
    return words;
  });
  std::vector<Word> out;
  for (auto& shard : shards) out.insert(out.end(), std::make_move_iterator(shard.begin()), std::make_move_iterator(shard.end()));
  return out;
}

// ---------------------------------------------------------------------------
// Orbits

struct OrbitRecord {
  Word canonical_word;
  int length = 0;           // n: the period the word was enumerated at
  bool primitive = false;   // minimal_period == length
  int minimal_period = 0;   // d | n; also the number of distinct rotations
  double f_period = std::numeric_limits<double>::quiet_NaN();

  friend bool operator==(const OrbitRecord&, const OrbitRecord&) = default;
};

// Partitions one full Fix(sigma^n) into rotation classes, sorted by canonical
// word. A class of minimal period d must contain exactly d input words.
inline std::vector<OrbitRecord> group_primitive_orbits(const std::vector<Word>& words) {
  if (words.empty()) return {};
  const std::size_t n = words.front().size();
  std::map<Word, std::size_t> classes;
  for (const auto& w : words) {
    if (w.size() != n) fail(ErrorKind::InconsistentInput, "words of different lengths");
    ++classes[canonical_rotation(w)];
  }
  std::vector<OrbitRecord> out;
  out.reserve(classes.size());
  for (const auto& [canon, count] : classes) {
    const std::size_t d = minimal_period(canon);
    if (count != d)
      fail(ErrorKind::InconsistentInput, "rotation class has " + std::to_string(count) + " words, expected " +
                                             std::to_string(d));
    out.push_back(OrbitRecord{canon, static_cast<int>(n), d == n, static_cast<int>(d)});
  }
  return out;
}

// Canonical primitive words of length n (one per primitive n-orbit), lexicographic.
inline std::vector<Word> primitive_orbit_words(const TransitionMatrix& a, int n,
                                               std::uint64_t budget = kDefaultEnumerationBudget) {
  std::vector<Word> out;
  for_each_periodic(
      a, n,
      [&](WordView w) {
        if (is_canonical(w) && minimal_period(w) == w.size()) out.emplace_back(w.begin(), w.end());
      },
      budget);
  return out;
}

// ---------------------------------------------------------------------------
// Metric d_theta (one-sided: agreement on indices 0..m-1)

inline double d_theta(WordView x, WordView y, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) fail(ErrorKind::InvalidInput, "theta must lie in (0,1)");
  if (x.size() == y.size() && std::equal(x.begin(), x.end(), y.begin())) return 0.0;
  std::size_t m = 0;
  while (m < x.size() && m < y.size() && x[m] == y[m]) ++m;
  return std::pow(theta, static_cast<double>(m));
}

// The infinite periodic sequence w w w ...
struct PeriodicPoint {
  Word root;
  Symbol at(std::size_t i) const { return root[i % root.size()]; }
};

inline double d_theta(const PeriodicPoint& x, const PeriodicPoint& y, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) fail(ErrorKind::InvalidInput, "theta must lie in (0,1)");
  // Two periodic sequences agreeing on |x|+|y| symbols are equal (Fine-Wilf).
  const std::size_t horizon = x.root.size() + y.root.size();
  std::size_t m = 0;
  while (m < horizon && x.at(m) == y.at(m)) ++m;
  return m == horizon ? 0.0 : std::pow(theta, static_cast<double>(m));
}

}  // namespace orbit_census
