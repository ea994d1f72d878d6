#pragma once

// Ruelle transfer operators restricted to functions of the first k symbols.
//
// States are the admissible k-words. A source state a_0..a_{k-1} feeds the
// target a_1..a_{k-1}b (for every b with A(a_{k-1}, b) = 1) with weight
// exp(s f(a_0..a_{k-1}) + shift), i.e. the matrix realizes
//   (L v)(x) = sum_{sigma y = x} exp(s f(y) + shift) v(y)
// on depth-k functions v. Its traces are the periodic sums
//   trace(L^n) = sum_{sigma^n x = x} exp(s f^n(x) + n shift).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include "orbit_census/csv.hpp"
#include "orbit_census/error.hpp"
#include "orbit_census/potential.hpp"
#include "orbit_census/symbolic.hpp"

namespace orbit_census {

template <class T>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};

template <class Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr std::size_t kMaxOperatorStates = 4096;
inline constexpr std::size_t kMaxDenseEigenStates = 2000;

template <class Scalar>
struct OperatorMatrix {
  std::vector<Word> states;
  DenseMatrix<Scalar> entries;  // entries(target, source)

  std::size_t dimension() const { return states.size(); }
};

struct TransferTolerances {
  double eig_tol = 1e-12;
  int max_iterations = 100'000;
  double root_tol = 1e-12;
  double fd_step = 1e-5;
  double fd_step_second = 1e-3;
  double cross_tol = 1e-6;
  double variational_tol = 1e-8;
  double weight_tol = 1e-10;
  double degeneracy_tol = 1e-9;
};

namespace detail {

// Index of each depth-k state by its base-kappa code.
struct StateIndex {
  std::vector<std::int32_t> by_code;

  explicit StateIndex(const Potential& f) : by_code(f.code_modulus(), -1) {
    for (std::size_t i = 0; i < f.words().size(); ++i) by_code[f.code(f.words()[i])] = static_cast<std::int32_t>(i);
  }
};

}  // namespace detail

// Operator of s*f + shift. Scalar may be real or complex, double or long double.
template <class Scalar>
OperatorMatrix<Scalar> build_operator(const Potential& f, Scalar s, Scalar shift = Scalar(0),
                                      std::size_t max_states = kMaxOperatorStates) {
  const auto& words = f.words();
  if (words.size() > max_states)
    fail(ErrorKind::StateSpaceTooLarge, std::to_string(words.size()) + " cylinder states exceed the cap of " +
                                            std::to_string(max_states));
  const detail::StateIndex index(f);
  const int k = f.depth();
  const int kappa = f.kappa();
  const std::uint64_t mod = f.code_modulus();
  OperatorMatrix<Scalar> op{words, DenseMatrix<Scalar>::Zero(words.size(), words.size())};
  for (std::size_t src = 0; src < words.size(); ++src) {
    const Word& w = words[src];
    const std::uint64_t shifted = (f.code(w) * kappa) % mod;  // drops w_0 when k >= 1
    const Scalar weight = std::exp(s * static_cast<Scalar>(f.value(w)) + shift);
    for (int b = 0; b < kappa; ++b) {
      if (!f.matrix().allowed(w.back(), static_cast<Symbol>(b))) continue;
      const std::uint64_t target_code = k == 1 ? static_cast<std::uint64_t>(b) : shifted + b;
      const auto target = index.by_code[target_code];
      if (target < 0) fail(ErrorKind::InconsistentInput, "target cylinder missing from state list");
      op.entries(target, src) = weight;
    }
  }
  return op;
}

template <class Scalar>
struct EigenData {
  Scalar lambda{};
  DenseVector<Scalar> right;  // M right = lambda right, entries summing to 1
  DenseVector<Scalar> left;   // left^T M = lambda left^T, left . right = 1
  double residual = 0.0;
  int iterations = 0;
};

// Perron eigendata of a nonnegative primitive matrix by power iteration on
// M + cI, c = half the mean column sum. The shift keeps eigenvalues near
// -lambda (common on no-repeat shifts) from stalling the iteration. The
// returned eigenvalue is the Rayleigh quotient left^T M right.
template <class Real>
EigenData<Real> leading_eigen(const OperatorMatrix<Real>& op, const TransferTolerances& tol = {}) {
  static_assert(!is_complex<Real>::value, "use leading_eigen_dense for complex operators");
  const auto& m = op.entries;
  const Eigen::Index n = m.rows();
  auto iterate = [&](const auto& mat, DenseVector<Real>& v, int& iters) -> double {
    v = DenseVector<Real>::Constant(n, Real(1) / static_cast<Real>(n));
    double best = std::numeric_limits<double>::infinity();
    int stall = 0;
    for (iters = 1; iters <= tol.max_iterations; ++iters) {
      DenseVector<Real> y = mat * v;
      const Real lam = y.sum();
      if (!(lam > Real(0))) fail(ErrorKind::NotConverged, "power iteration lost positivity");
      const double res = static_cast<double>((y - lam * v).cwiseAbs().maxCoeff() / lam);
      v = y / lam;
      if (res < best * 0.999) {
        best = res;
        stall = 0;
      } else if (++stall >= 8 && best <= tol.eig_tol) {
        break;
      }
      if (res <= 64 * std::numeric_limits<Real>::epsilon()) break;
    }
    return best;
  };
  const Real shift = m.sum() / (2 * static_cast<Real>(n));
  const DenseMatrix<Real> shifted = m + shift * DenseMatrix<Real>::Identity(n, n);
  EigenData<Real> out;
  int it_right = 0, it_left = 0;
  const double res_r = iterate(shifted, out.right, it_right);
  const DenseMatrix<Real> mt = shifted.transpose();
  const double res_l = iterate(mt, out.left, it_left);
  out.iterations = std::max(it_right, it_left);
  if (res_r > tol.eig_tol || res_l > tol.eig_tol)
    fail(ErrorKind::NotConverged, "power iteration residual " + csv::format_real(std::max(res_r, res_l)) +
                                      " after " + std::to_string(out.iterations) + " iterations");
  const Real lr = out.left.dot(out.right);
  out.left /= lr;
  out.lambda = out.left.dot(m * out.right);
  out.residual = static_cast<double>((m * out.right - out.lambda * out.right).cwiseAbs().maxCoeff());
  return out;
}

// All eigenvalues, sorted by decreasing modulus (ties by argument).
template <class Scalar>
auto dense_spectrum(const OperatorMatrix<Scalar>& op) {
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  using Complex = std::complex<Real>;
  if (op.dimension() > kMaxDenseEigenStates)
    fail(ErrorKind::StateSpaceTooLarge, "dense eigensolve refused above " + std::to_string(kMaxDenseEigenStates) +
                                            " states");
  const DenseMatrix<Complex> mc = op.entries.template cast<Complex>();
  Eigen::ComplexEigenSolver<DenseMatrix<Complex>> solver(mc, false);
  if (solver.info() != Eigen::Success) fail(ErrorKind::NotConverged, "dense eigensolve failed");
  std::vector<Complex> values(solver.eigenvalues().data(), solver.eigenvalues().data() + solver.eigenvalues().size());
  std::sort(values.begin(), values.end(), [](const Complex& a, const Complex& b) {
    const Real ma = std::abs(a), mb = std::abs(b);
    if (ma != mb) return ma > mb;
    return std::arg(a) < std::arg(b);
  });
  return values;
}

// Top-modulus eigendata by dense eigensolve; throws DegenerateTopModulus when
// the two largest moduli agree to degeneracy_tol (relative).
template <class Scalar>
auto leading_eigen_dense(const OperatorMatrix<Scalar>& op, const TransferTolerances& tol = {}) {
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  using Complex = std::complex<Real>;
  if (op.dimension() > kMaxDenseEigenStates)
    fail(ErrorKind::StateSpaceTooLarge, "dense eigensolve refused above " + std::to_string(kMaxDenseEigenStates) +
                                            " states");
  const DenseMatrix<Complex> mc = op.entries.template cast<Complex>();
  Eigen::ComplexEigenSolver<DenseMatrix<Complex>> right_solver(mc, true);
  Eigen::ComplexEigenSolver<DenseMatrix<Complex>> left_solver(mc.transpose(), true);
  if (right_solver.info() != Eigen::Success || left_solver.info() != Eigen::Success)
    fail(ErrorKind::NotConverged, "dense eigensolve failed");
  const auto& ev = right_solver.eigenvalues();
  Eigen::Index top = 0;
  for (Eigen::Index i = 1; i < ev.size(); ++i)
    if (std::abs(ev[i]) > std::abs(ev[top])) top = i;
  const Real top_mod = std::abs(ev[top]);
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (i == top) continue;
    if (top_mod - std::abs(ev[i]) <= static_cast<Real>(tol.degeneracy_tol) * top_mod)
      fail(ErrorKind::DegenerateTopModulus, "eigenvalues " + csv::format_real(static_cast<double>(std::abs(ev[top]))) +
                                                " and " + csv::format_real(static_cast<double>(std::abs(ev[i]))) +
                                                " tie in modulus");
  }
  const auto& lev = left_solver.eigenvalues();
  Eigen::Index ltop = 0;
  for (Eigen::Index i = 1; i < lev.size(); ++i)
    if (std::abs(lev[i] - ev[top]) < std::abs(lev[ltop] - ev[top])) ltop = i;

  EigenData<Complex> out;
  out.lambda = ev[top];
  out.right = right_solver.eigenvectors().col(top);
  const Complex sum = out.right.sum();
  if (std::abs(sum) > Real(1e-300)) out.right /= sum;
  out.left = left_solver.eigenvectors().col(ltop);
  const Complex lr = (out.left.transpose() * out.right)(0);
  if (std::abs(lr) > Real(0)) out.left /= lr;
  out.residual = static_cast<double>((mc * out.right - out.lambda * out.right).cwiseAbs().maxCoeff());
  return out;
}

// Top eigendata of the operator of (-P + iu) f. Besides the tie test inside
// leading_eigen_dense, a top modulus reaching the real leading eigenvalue at
// u != 0 means exp(iu f) acts as a character: lattice behaviour.
inline EigenData<std::complex<double>> complex_leading_eigen(const Potential& f, double P, double u,
                                                             const TransferTolerances& tol = {}) {
  using C = std::complex<double>;
  const auto ed = leading_eigen_dense(build_operator<C>(f, C(-P, u)), tol);
  if (u != 0.0) {
    const double real_top = leading_eigen(build_operator<double>(f, -P), tol).lambda;
    if (std::abs(ed.lambda) >= (1.0 - tol.degeneracy_tol) * real_top)
      fail(ErrorKind::DegenerateTopModulus, "eigenvalue of modulus " + csv::format_real(std::abs(ed.lambda)) +
                                                " at u = " + csv::format_real(u) + " reaches the real leading eigenvalue");
  }
  return ed;
}

// ---------------------------------------------------------------------------
// Pressure and the root P_f

inline EigenData<double> real_eigen(const Potential& f, double s, const TransferTolerances& tol = {}) {
  return leading_eigen(build_operator<double>(f, s), tol);
}

// Pr(s f) = log of the leading eigenvalue.
inline double pressure(const Potential& f, double s, const TransferTolerances& tol = {}) {
  return std::log(real_eigen(f, s, tol).lambda);
}

namespace detail {

// Equilibrium mean of f for the operator of s f: sum l_i f_i r_i / sum l_i r_i.
inline double eigen_mean(const Potential& f, const EigenData<double>& ed) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < f.words().size(); ++i) {
    const double w = ed.left[i] * ed.right[i];
    num += w * f.value(f.words()[i]);
    den += w;
  }
  return num / den;
}

}  // namespace detail

// Unique P with Pr(-P f) = 0 for f > 0: bisection on [0, Pr(0)/d0 + 1], then
// Newton steps using d/ds Pr(-s f) = -alpha.
inline double solve_P(const Potential& f, const TransferTolerances& tol = {}) {
  if (!f.positive()) fail(ErrorKind::PositivityViolated, "P_f needs f > 0; min value is " + csv::format_real(f.d0()));
  double lo = 0.0;
  double hi = pressure(f, 0.0, tol) / f.d0() + 1.0;
  double p_lo = pressure(f, -lo, tol);
  double p_hi = pressure(f, -hi, tol);
  if (!(p_lo > 0.0 && p_hi < 0.0)) fail(ErrorKind::NoBracket, "pressure does not change sign on [0, Pr(0)/d0 + 1]");
  while (hi - lo > 1e-6 * (1.0 + hi)) {
    const double mid = 0.5 * (lo + hi);
    const double p = pressure(f, -mid, tol);
    (p > 0.0 ? lo : hi) = mid;
  }
  double s = 0.5 * (lo + hi);
  for (int it = 0; it < 60; ++it) {
    const auto ed = real_eigen(f, -s, tol);
    const double p = std::log(ed.lambda);
    if (std::abs(p) <= tol.root_tol) return s;
    (p > 0.0 ? lo : hi) = s;
    double next = s + p / detail::eigen_mean(f, ed);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == s) break;
    s = next;
  }
  const double residual = pressure(f, -s, tol);
  if (std::abs(residual) <= tol.root_tol) return s;
  fail(ErrorKind::NotConverged, "|Pr(-P f)| = " + csv::format_real(std::abs(residual)) + " above root_tol");
}

// ---------------------------------------------------------------------------
// Equilibrium constants

struct PressureDiagnostics {
  double alpha_eigen = 0.0;        // left . diag(f) . right
  double alpha_fd = 0.0;           // centered difference, one Richardson step
  double sigma0_sq_fd = 0.0;       // second difference, one Richardson step
  double variational_gap = 0.0;    // |entropy - P alpha|
  double eig_residual = 0.0;
  int eig_iterations = 0;
};

struct PressureProfile {
  double P = 0.0;
  double alpha = 0.0;
  double sigma0_sq = 0.0;
  double entropy = 0.0;  // entropy rate of the equilibrium Markov chain
  double d0 = 0.0;
  double d1 = 0.0;
  int depth = 0;
  bool lattice_warning = false;
  PressureDiagnostics diagnostics;
};

namespace detail {

// Second derivative of log lambda(s) for M(s)(t, src) = exp(s f(src)), by
// first/second order eigenvalue perturbation with the reduced resolvent.
inline double log_lambda_second_derivative(const Potential& f, const OperatorMatrix<double>& op,
                                           const EigenData<double>& ed) {
  const Eigen::Index n = op.entries.rows();
  DenseVector<double> fv(n);
  for (Eigen::Index i = 0; i < n; ++i) fv[i] = f.value(op.states[i]);
  const DenseMatrix<double>& m = op.entries;
  const DenseMatrix<double> m1 = m * fv.asDiagonal();
  const DenseMatrix<double> m2 = m1 * fv.asDiagonal();
  const double lam = ed.lambda;
  const DenseVector<double>& r = ed.right;
  const DenseVector<double>& l = ed.left;  // l . r = 1
  const double d1 = l.dot(m1 * r);
  DenseMatrix<double> sys = lam * DenseMatrix<double>::Identity(n, n) - m + lam * r * l.transpose();
  const DenseVector<double> rhs = m1 * r - d1 * r;
  const DenseVector<double> r1 = sys.partialPivLu().solve(rhs);
  const double d2 = l.dot(m2 * r) + 2.0 * l.dot(m1 * r1);
  return d2 / lam - (d1 / lam) * (d1 / lam);
}

// Entropy rate of the stationary Markov chain on depth-k states with
// transitions p(s -> t) = M(t, s) l(t) / (lambda l(s)).
inline double markov_entropy(const OperatorMatrix<double>& op, const EigenData<double>& ed) {
  const Eigen::Index n = op.entries.rows();
  double norm = 0.0;
  for (Eigen::Index s = 0; s < n; ++s) norm += ed.left[s] * ed.right[s];
  double h = 0.0;
  for (Eigen::Index s = 0; s < n; ++s) {
    const double pi = ed.left[s] * ed.right[s] / norm;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double m = op.entries(t, s);
      if (m == 0.0) continue;
      const double p = m * ed.left[t] / (ed.lambda * ed.left[s]);
      if (p > 0.0) h -= pi * p * std::log(p);
    }
  }
  return h;
}

}  // namespace detail

// alpha, sigma0^2 and entropy of the equilibrium state of -P f.
//
// sigma0^2 is the second derivative of t -> Pr(-P f + t g), g = f - alpha, in
// the real direction. Along the imaginary direction the same derivative is
// -sigma0^2, which is the form used in the counting asymptotics.
inline PressureProfile equilibrium_constants(const Potential& f, double P, const TransferTolerances& tol = {}) {
  PressureProfile prof;
  prof.P = P;
  prof.d0 = f.d0();
  prof.d1 = f.d1();
  prof.depth = f.depth();
  const auto op = build_operator<double>(f, -P);
  const auto ed = leading_eigen(op, tol);
  prof.diagnostics.eig_residual = ed.residual;
  prof.diagnostics.eig_iterations = ed.iterations;

  const double alpha_eig = detail::eigen_mean(f, ed);
  auto pr = [&](double s) { return pressure(f, s, tol); };
  auto first_diff = [&](double h) { return -(pr(-(P + h)) - pr(-(P - h))) / (2.0 * h); };
  const double h = tol.fd_step;
  const double alpha_fd = (4.0 * first_diff(h / 2) - first_diff(h)) / 3.0;
  prof.diagnostics.alpha_eigen = alpha_eig;
  prof.diagnostics.alpha_fd = alpha_fd;
  if (std::abs(alpha_eig - alpha_fd) > tol.cross_tol * std::max(1.0, std::abs(alpha_eig)))
    fail(ErrorKind::DerivativeUnstable, "alpha estimates disagree: " + csv::format_real(alpha_eig) + " vs " +
                                            csv::format_real(alpha_fd));
  prof.alpha = alpha_eig;

  const double sigma_sq = detail::log_lambda_second_derivative(f, op, ed);
  const double p0 = pr(-P);
  auto second_diff = [&](double hh) { return (pr(-P + hh) - 2.0 * p0 + pr(-P - hh)) / (hh * hh); };
  const double h2 = tol.fd_step_second;
  const double sigma_fd = (4.0 * second_diff(h2 / 2) - second_diff(h2)) / 3.0;
  prof.diagnostics.sigma0_sq_fd = sigma_fd;
  if (std::abs(sigma_sq - sigma_fd) > tol.cross_tol * std::max(1.0, std::abs(sigma_sq)))
    fail(ErrorKind::DerivativeUnstable, "sigma0^2 estimates disagree: " + csv::format_real(sigma_sq) + " vs " +
                                            csv::format_real(sigma_fd));
  prof.sigma0_sq = std::max(0.0, sigma_sq);
  prof.lattice_warning = prof.sigma0_sq < 1e-12;
  if (prof.lattice_warning) prof.sigma0_sq = 0.0;

  prof.entropy = detail::markov_entropy(op, ed);
  prof.diagnostics.variational_gap = std::abs(prof.entropy - P * prof.alpha);
  return prof;
}

inline PressureProfile pressure_profile(const Potential& f, const TransferTolerances& tol = {}) {
  return equilibrium_constants(f, solve_P(f, tol), tol);
}

struct EquilibriumWeights {
  std::vector<Word> words;
  std::vector<double> weights;
  double max_shift_defect = 0.0;  // largest |sum over first symbol - sum over last symbol|
};

// Gibbs weights of the depth-k cylinders: left(C) right(C), normalized.
inline EquilibriumWeights equilibrium_weights(const Potential& f, double P, const TransferTolerances& tol = {}) {
  const auto op = build_operator<double>(f, -P);
  const auto ed = leading_eigen(op, tol);
  EquilibriumWeights out;
  out.words = op.states;
  double total = 0.0;
  for (std::size_t i = 0; i < op.states.size(); ++i) {
    out.weights.push_back(ed.left[i] * ed.right[i]);
    total += out.weights.back();
  }
  for (double& w : out.weights) w /= total;
  const int k = f.depth();
  if (k >= 2) {
    std::map<Word, std::pair<double, double>> marginals;
    for (std::size_t i = 0; i < out.words.size(); ++i) {
      const Word& w = out.words[i];
      marginals[Word(w.begin() + 1, w.end())].first += out.weights[i];
      marginals[Word(w.begin(), w.end() - 1)].second += out.weights[i];
    }
    for (const auto& [u, sums] : marginals)
      out.max_shift_defect = std::max(out.max_shift_defect, std::abs(sums.first - sums.second));
  }
  if (out.max_shift_defect > tol.weight_tol)
    fail(ErrorKind::NotConverged, "equilibrium weights not shift invariant: defect " +
                                      csv::format_real(out.max_shift_defect));
  return out;
}

// ---------------------------------------------------------------------------
// Norm decay of iterates at s = -P + iu (empirical, diagnostic only)

struct DecayRow {
  int n = 0;
  double sup_norm = 0.0;
  double seminorm_over_u = 0.0;  // |L^n 1|_theta / |u| at cylinder resolution
  double norm = 0.0;             // sup_norm + seminorm_over_u
};

struct DecayTable {
  double u = 0.0;
  double theta = 0.5;
  std::vector<DecayRow> rows;
  double rho_hat = std::numeric_limits<double>::quiet_NaN();
  double fit_rms = std::numeric_limits<double>::quiet_NaN();  // rms of log-residuals
  double fit_r2 = std::numeric_limits<double>::quiet_NaN();
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double rms = 0.0;
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LinearFit fit;
  const std::size_t n = x.size();
  if (n < 2) return fit;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  fit.slope = sxx > 0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    sse += e * e;
  }
  fit.rms = std::sqrt(sse / n);
  fit.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
  return fit;
}

// The Lipschitz part compares states sharing their first k-1 symbols and
// divides by theta^(k-1); this is a reporting convention, not the true
// theta-seminorm of the infinite-dimensional operator.
inline DecayTable norm_decay_probe(const Potential& f, double P, double u, int n_max, double theta = 0.5,
                                   double probe_floor = 1e-9) {
  if (std::abs(u) < probe_floor) fail(ErrorKind::InvalidInput, "|u| is below the probe floor");
  if (n_max < 1) fail(ErrorKind::InvalidInput, "n_max must be >= 1");
  if (!(theta > 0.0 && theta < 1.0)) fail(ErrorKind::InvalidInput, "theta must lie in (0,1)");
  using C = std::complex<double>;
  const auto op = build_operator<C>(f, C(-P, u));
  if (op.dimension() > kMaxDenseEigenStates)
    fail(ErrorKind::StateSpaceTooLarge, "decay probe refused above " + std::to_string(kMaxDenseEigenStates) + " states");
  const int k = f.depth();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < op.states.size(); ++i)
    for (std::size_t j = i + 1; j < op.states.size(); ++j)
      if (std::equal(op.states[i].begin(), op.states[i].begin() + (k - 1), op.states[j].begin())) pairs.push_back({i, j});
  const double scale = std::pow(theta, k - 1);

  DecayTable table;
  table.u = u;
  table.theta = theta;
  DenseVector<C> v = DenseVector<C>::Ones(op.dimension());
  for (int n = 0; n <= n_max; ++n) {
    if (n > 0) v = op.entries * v;
    DecayRow row;
    row.n = n;
    row.sup_norm = v.cwiseAbs().maxCoeff();
    double semi = 0.0;
    for (const auto& [i, j] : pairs) semi = std::max(semi, std::abs(v[i] - v[j]));
    row.seminorm_over_u = semi / scale / std::abs(u);
    row.norm = row.sup_norm + row.seminorm_over_u;
    table.rows.push_back(row);
  }
  std::vector<double> xs, ys;
  for (const auto& row : table.rows) {
    if (row.n < 1 || !(row.norm > 1e-280)) continue;
    xs.push_back(row.n);
    ys.push_back(std::log(row.norm));
  }
  if (xs.size() >= 2) {
    const auto fit = fit_line(xs, ys);
    table.rho_hat = std::exp(fit.slope);
    table.fit_rms = fit.rms;
    table.fit_r2 = fit.r2;
  }
  return table;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string profile_to_csv(const PressureProfile& p) {
  csv::Table t({"P", "alpha", "sigma0_sq", "entropy", "d0", "d1", "depth", "alpha_fd", "sigma0_sq_fd",
                "variational_gap", "lattice_warning"});
  t.add_row({csv::format_real(p.P), csv::format_real(p.alpha), csv::format_real(p.sigma0_sq),
             csv::format_real(p.entropy), csv::format_real(p.d0), csv::format_real(p.d1), std::to_string(p.depth),
             csv::format_real(p.diagnostics.alpha_fd), csv::format_real(p.diagnostics.sigma0_sq_fd),
             csv::format_real(p.diagnostics.variational_gap), p.lattice_warning ? "1" : "0"});
  return t.str();
}

inline std::string decay_to_csv(const DecayTable& d) {
  csv::Table t({"n", "u", "sup_norm", "seminorm_over_u", "norm", "rho_hat"});
  for (const auto& r : d.rows)
    t.add_row({std::to_string(r.n), csv::format_real(d.u), csv::format_real(r.sup_norm),
               csv::format_real(r.seminorm_over_u), csv::format_real(r.norm), csv::format_real(d.rho_hat)});
  return t.str();
}

// Sparse triplets "row,col,real,imag" for the nonzero entries.
template <class Scalar>
std::string operator_to_triplets(const OperatorMatrix<Scalar>& op) {
  csv::Table t({"row", "col", "real", "imag"});
  for (Eigen::Index j = 0; j < op.entries.cols(); ++j)
    for (Eigen::Index i = 0; i < op.entries.rows(); ++i) {
      const auto v = op.entries(i, j);
      if (v == Scalar(0)) continue;
      double re, im = 0.0;
      if constexpr (is_complex<Scalar>::value) {
        re = static_cast<double>(v.real());
        im = static_cast<double>(v.imag());
      } else {
        re = static_cast<double>(v);
      }
      t.add_row({std::to_string(i), std::to_string(j), csv::format_real(re), csv::format_real(im)});
    }
  return t.str();
}

}  // namespace orbit_census
