/*
 * system.hh
 *
 * control systems dx/dt = f(x,u) with box-shaped input and working
 * region, stability certificates (KL decay + Kinf gain) and numeric
 * spot checks of Lyapunov dissipation inequalities
 */

#ifndef ABSIM_SYSTEM_HH_
#define ABSIM_SYSTEM_HH_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "absim/error.hh"
#include "absim/expr.hh"

namespace absim {

using Vec = std::vector<double>;

struct Interval {
  double lo;
  double hi;
};

using Box = std::vector<Interval>;

inline double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double c : v) m = std::max(m, std::fabs(c));
  return m;
}

inline double inf_dist(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline double two_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/* KL decay beta(r,s) = c * exp(-lambda s) * r^p */
struct KLGain {
  double c = 1.0;
  double lambda = 1.0;
  double p = 1.0;

  void validate() const {
    if (!(c > 0.0) || !(lambda > 0.0) || !(p > 0.0))
      throw Error(errc::argument, "KL gain requires c > 0, lambda > 0, p > 0");
  }

  double operator()(double r, double s) const {
    if (r < 0.0 || s < 0.0)
      throw Error(errc::argument, "KL gain arguments must be nonnegative");
    return c * std::exp(-lambda * s) * std::pow(r, p);
  }
};

/* Kinf gain gamma(r) = k * r^p; k = 0 gives the degenerate zero gain */
struct KinfGain {
  double k = 0.0;
  double p = 1.0;

  void validate() const {
    if (!(k >= 0.0) || !(p > 0.0))
      throw Error(errc::argument, "Kinf gain requires k >= 0, p > 0");
  }

  double operator()(double r) const {
    if (r < 0.0) throw Error(errc::argument, "Kinf gain argument must be nonnegative");
    return k * std::pow(r, p);
  }

  double inverse(double v) const {
    if (v < 0.0) throw Error(errc::argument, "Kinf gain inverse argument must be nonnegative");
    if (k <= 0.0) throw Error(errc::certificate, "zero Kinf gain is not invertible");
    return std::pow(v / k, 1.0 / p);
  }
};

struct StabilityCertificate {
  KLGain beta;
  std::optional<KinfGain> gamma; /* absent: delta-GAS only */

  void validate() const {
    beta.validate();
    if (gamma) gamma->validate();
  }

  const KinfGain& require_gamma() const {
    if (!gamma)
      throw Error(errc::certificate,
                  "certificate carries no input gain (delta-GAS only); the digital "
                  "pipeline needs a delta-ISS certificate");
    return *gamma;
  }
};

class ControlSystem {
 public:
  ControlSystem(int n, int m, std::vector<Expression> f, Box input_box, Box work_box)
      : n_(n), m_(m), f_(std::move(f)), U_(std::move(input_box)), X_(std::move(work_box)) {
    if (n_ < 1 || m_ < 1) throw Error(errc::argument, "dimensions must be at least 1");
    if (static_cast<int>(f_.size()) != n_)
      throw Error(errc::argument, "vector field needs exactly n component expressions");
    if (static_cast<int>(U_.size()) != m_ || static_cast<int>(X_.size()) != n_)
      throw Error(errc::argument, "box dimensions do not match (n, m)");
    for (const auto& iv : U_) {
      if (!(iv.lo < iv.hi)) throw Error(errc::argument, "input box must be non-degenerate");
      if (iv.lo > 0.0 || iv.hi < 0.0)
        throw Error(errc::argument, "input box must contain the origin");
    }
    for (const auto& iv : X_)
      if (!(iv.lo < iv.hi)) throw Error(errc::argument, "working box must be non-degenerate");
    for (const auto& e : f_) e.bind(n_, m_, /*allow_y=*/false);
  }

  int n() const noexcept { return n_; }
  int m() const noexcept { return m_; }
  const Box& input_box() const noexcept { return U_; }
  const Box& work_box() const noexcept { return X_; }
  const Expression& component(int i) const { return f_[static_cast<std::size_t>(i)]; }

  bool input_in_box(std::span<const double> u) const {
    for (int i = 0; i < m_; ++i) {
      const auto& iv = U_[static_cast<std::size_t>(i)];
      const double tol = 1e-12 * std::max({1.0, std::fabs(iv.lo), std::fabs(iv.hi)});
      if (u[static_cast<std::size_t>(i)] < iv.lo - tol || u[static_cast<std::size_t>(i)] > iv.hi + tol)
        return false;
    }
    return true;
  }

  void check_input(std::span<const double> u) const {
    if (static_cast<int>(u.size()) != m_)
      throw Error(errc::argument, "input vector has wrong dimension");
    if (!input_in_box(u))
      throw Error(errc::argument, "input lies outside the input box U");
  }

  /* componentwise f(x,u); no box check, callers validate u once */
  void eval_field_unchecked(const double* x, const double* u, double* out) const {
    for (int i = 0; i < n_; ++i) out[i] = f_[static_cast<std::size_t>(i)].eval(x, u);
  }

  Vec eval_field(const Vec& x, const Vec& u) const {
    if (static_cast<int>(x.size()) != n_)
      throw Error(errc::argument, "state vector has wrong dimension");
    check_input(u);
    Vec out(static_cast<std::size_t>(n_));
    eval_field_unchecked(x.data(), u.data(), out.data());
    return out;
  }

 private:
  int n_, m_;
  std::vector<Expression> f_;
  Box U_, X_;
};

/* delta-ISS Lyapunov data: V over (x,y), sandwich gains and dissipation
 * rates; norm2 selects whether rho is stated against the 2-norm */
struct LyapunovCertificate {
  Expression V;
  KinfGain alpha1;
  KinfGain alpha2;
  KinfGain rho;
  std::optional<KinfGain> sigma;
  bool norm2 = false;
};

struct SampleSpec {
  int points_per_axis = 9;
  int threads = 0; /* 0: hardware concurrency */
};

struct LyapReport {
  bool pass = false;
  double max_violation = 0.0;
  Vec worst_x, worst_y, worst_u, worst_v;
  std::uint64_t points = 0;
};

namespace detail {

inline std::vector<double> axis_points(const Interval& iv, int count) {
  std::vector<double> out;
  if (count <= 1) {
    out.push_back(0.5 * (iv.lo + iv.hi));
    return out;
  }
  for (int i = 0; i < count; ++i)
    out.push_back(iv.lo + (iv.hi - iv.lo) * static_cast<double>(i) / (count - 1));
  return out;
}

/* central differences, exact to rounding on quadratic V */
constexpr double kFdStep = 1e-6;

inline void lyap_gradients(const Expression& V, const double* x, const double* y, int n,
                           double* gx, double* gy, double* xbuf, double* ybuf) {
  std::copy(x, x + n, xbuf);
  std::copy(y, y + n, ybuf);
  for (int i = 0; i < n; ++i) {
    const double x0 = xbuf[i];
    xbuf[i] = x0 + kFdStep;
    const double vp = V.eval(xbuf, nullptr, ybuf);
    xbuf[i] = x0 - kFdStep;
    const double vm = V.eval(xbuf, nullptr, ybuf);
    xbuf[i] = x0;
    gx[i] = (vp - vm) / (2.0 * kFdStep);
  }
  for (int i = 0; i < n; ++i) {
    const double y0 = ybuf[i];
    ybuf[i] = y0 + kFdStep;
    const double vp = V.eval(xbuf, nullptr, ybuf);
    ybuf[i] = y0 - kFdStep;
    const double vm = V.eval(xbuf, nullptr, ybuf);
    ybuf[i] = y0;
    gy[i] = (vp - vm) / (2.0 * kFdStep);
  }
}

template <typename Body>
void parallel_chunks(std::uint64_t total, int threads, Body body) {
  unsigned want = threads > 0 ? static_cast<unsigned>(threads)
                              : std::max(1u, std::thread::hardware_concurrency());
  want = static_cast<unsigned>(std::min<std::uint64_t>(want, std::max<std::uint64_t>(total, 1)));
  if (want <= 1) {
    body(0, 0, total);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr eptr;
  std::mutex mx;
  for (unsigned t = 0; t < want; ++t) {
    const std::uint64_t lo = total * t / want;
    const std::uint64_t hi = total * (t + 1) / want;
    pool.emplace_back([&, t, lo, hi] {
      try {
        body(static_cast<int>(t), lo, hi);
      } catch (...) {
        std::lock_guard<std::mutex> g(mx);
        if (!eptr) eptr = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (eptr) std::rethrow_exception(eptr);
}

}  // namespace detail

constexpr double kLyapTol = 1e-7;

/* max violation of alpha1(||x-y||inf) <= V(x,y) <= alpha2(||x-y||inf)
 * over the sampled grid of (x,y) in X x X */
inline LyapReport lyap_check_bounds(const ControlSystem& sys, const LyapunovCertificate& cert,
                                    const SampleSpec& grid = {}) {
  const int n = sys.n();
  cert.V.bind(n, 0, /*allow_y=*/true);
  if (!cert.V.uses_y())
    throw Error(errc::argument, "Lyapunov function must reference both x and y variables");

  std::vector<std::vector<double>> axes;
  for (int i = 0; i < 2 * n; ++i)
    axes.push_back(detail::axis_points(sys.work_box()[static_cast<std::size_t>(i % n)],
                                       grid.points_per_axis));
  std::uint64_t total = 1;
  for (const auto& a : axes) total *= a.size();

  const int nthreads = grid.threads;
  std::vector<LyapReport> partial(
      static_cast<std::size_t>(std::max(1, nthreads > 0 ? nthreads : static_cast<int>(std::max(
                                               1u, std::thread::hardware_concurrency())))));
  for (auto& r : partial) r.max_violation = -std::numeric_limits<double>::infinity();

  detail::parallel_chunks(total, nthreads, [&](int tid, std::uint64_t lo, std::uint64_t hi) {
    Vec x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
    LyapReport& rep = partial[static_cast<std::size_t>(tid)];
    for (std::uint64_t k = lo; k < hi; ++k) {
      std::uint64_t rem = k;
      for (int a = 2 * n - 1; a >= 0; --a) {
        const auto& pts = axes[static_cast<std::size_t>(a)];
        const std::size_t idx = static_cast<std::size_t>(rem % pts.size());
        rem /= pts.size();
        if (a < n)
          x[static_cast<std::size_t>(a)] = pts[idx];
        else
          y[static_cast<std::size_t>(a - n)] = pts[idx];
      }
      const double r = inf_dist(x, y);
      const double v = cert.V.eval(x.data(), nullptr, y.data());
      const double viol = std::max(cert.alpha1(r) - v, v - cert.alpha2(r));
      if (viol > rep.max_violation) {
        rep.max_violation = viol;
        rep.worst_x = x;
        rep.worst_y = y;
      }
      ++rep.points;
    }
  });

  LyapReport out;
  out.max_violation = -std::numeric_limits<double>::infinity();
  for (const auto& r : partial) {
    out.points += r.points;
    if (r.points > 0 && r.max_violation > out.max_violation) {
      out.max_violation = r.max_violation;
      out.worst_x = r.worst_x;
      out.worst_y = r.worst_y;
    }
  }
  out.pass = out.max_violation <= kLyapTol;
  return out;
}

/* max violation of
 *   dV/dx f(x,u) + dV/dy f(y,v) <= -rho(||x-y||) + sigma(||u-v||inf)
 * over the sampled grid of (x,y,u,v) in X x X x U x U */
inline LyapReport lyap_check_dissipation(const ControlSystem& sys,
                                         const LyapunovCertificate& cert,
                                         const SampleSpec& grid = {}) {
  const int n = sys.n();
  const int m = sys.m();
  cert.V.bind(n, 0, /*allow_y=*/true);
  if (!cert.V.uses_y())
    throw Error(errc::argument, "Lyapunov function must reference both x and y variables");

  std::vector<std::vector<double>> axes;
  for (int i = 0; i < 2 * n; ++i)
    axes.push_back(detail::axis_points(sys.work_box()[static_cast<std::size_t>(i % n)],
                                       grid.points_per_axis));
  for (int i = 0; i < 2 * m; ++i)
    axes.push_back(detail::axis_points(sys.input_box()[static_cast<std::size_t>(i % m)],
                                       grid.points_per_axis));
  std::uint64_t total = 1;
  for (const auto& a : axes) total *= a.size();

  const int nthreads = grid.threads;
  std::vector<LyapReport> partial(
      static_cast<std::size_t>(std::max(1, nthreads > 0 ? nthreads : static_cast<int>(std::max(
                                               1u, std::thread::hardware_concurrency())))));
  for (auto& r : partial) r.max_violation = -std::numeric_limits<double>::infinity();

  detail::parallel_chunks(total, nthreads, [&](int tid, std::uint64_t lo, std::uint64_t hi) {
    const std::size_t un = static_cast<std::size_t>(n);
    Vec x(un), y(un), u(static_cast<std::size_t>(m)), v(static_cast<std::size_t>(m));
    Vec gx(un), gy(un), fx(un), fy(un), xbuf(un), ybuf(un);
    LyapReport& rep = partial[static_cast<std::size_t>(tid)];
    for (std::uint64_t k = lo; k < hi; ++k) {
      std::uint64_t rem = k;
      const int naxes = 2 * n + 2 * m;
      for (int a = naxes - 1; a >= 0; --a) {
        const auto& pts = axes[static_cast<std::size_t>(a)];
        const std::size_t idx = static_cast<std::size_t>(rem % pts.size());
        rem /= pts.size();
        if (a < n) x[static_cast<std::size_t>(a)] = pts[idx];
        else if (a < 2 * n) y[static_cast<std::size_t>(a - n)] = pts[idx];
        else if (a < 2 * n + m) u[static_cast<std::size_t>(a - 2 * n)] = pts[idx];
        else v[static_cast<std::size_t>(a - 2 * n - m)] = pts[idx];
      }
      detail::lyap_gradients(cert.V, x.data(), y.data(), n, gx.data(), gy.data(), xbuf.data(),
                             ybuf.data());
      sys.eval_field_unchecked(x.data(), u.data(), fx.data());
      sys.eval_field_unchecked(y.data(), v.data(), fy.data());
      double vdot = 0.0;
      for (int i = 0; i < n; ++i)
        vdot += gx[static_cast<std::size_t>(i)] * fx[static_cast<std::size_t>(i)] +
                gy[static_cast<std::size_t>(i)] * fy[static_cast<std::size_t>(i)];
      const double r = cert.norm2 ? two_dist(x, y) : inf_dist(x, y);
      const double s = cert.sigma ? (*cert.sigma)(inf_dist(u, v)) : 0.0;
      const double viol = vdot + cert.rho(r) - s;
      if (viol > rep.max_violation) {
        rep.max_violation = viol;
        rep.worst_x = x;
        rep.worst_y = y;
        rep.worst_u = u;
        rep.worst_v = v;
      }
      ++rep.points;
    }
  });

  LyapReport out;
  out.max_violation = -std::numeric_limits<double>::infinity();
  for (const auto& r : partial) {
    out.points += r.points;
    if (r.points > 0 && r.max_violation > out.max_violation) {
      out.max_violation = r.max_violation;
      out.worst_x = r.worst_x;
      out.worst_y = r.worst_y;
      out.worst_u = r.worst_u;
      out.worst_v = r.worst_v;
    }
  }
  out.pass = out.max_violation <= kLyapTol;
  return out;
}

/* ---- gains for linear systems dx/dt = Ax + Bu ---- */

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a; /* row major */

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

  /* induced infinity norm: max absolute row sum */
  double inf_norm() const {
    double best = 0.0;
    for (int i = 0; i < rows; ++i) {
      double s = 0.0;
      for (int j = 0; j < cols; ++j) s += std::fabs(at(i, j));
      best = std::max(best, s);
    }
    return best;
  }
};

namespace detail {

inline Matrix mat_mul(const Matrix& A, const Matrix& B) {
  Matrix C(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i)
    for (int k = 0; k < A.cols; ++k) {
      const double aik = A.at(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < B.cols; ++j) C.at(i, j) += aik * B.at(k, j);
    }
  return C;
}

/* scaling-and-squaring with a machine-precision series */
inline Matrix mat_exp(const Matrix& A) {
  const int n = A.rows;
  int squarings = 0;
  double nrm = A.inf_norm();
  while (nrm > 0.5) {
    nrm *= 0.5;
    ++squarings;
  }
  Matrix S(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) S.at(i, j) = A.at(i, j) / std::ldexp(1.0, squarings);
  Matrix R(n, n), T(n, n);
  for (int i = 0; i < n; ++i) R.at(i, i) = T.at(i, i) = 1.0;
  for (int k = 1; k <= 40; ++k) {
    T = mat_mul(T, S);
    for (auto& t : T.a) t /= k;
    for (std::size_t i = 0; i < R.a.size(); ++i) R.a[i] += T.a[i];
    if (T.inf_norm() < 1e-18 * std::max(1.0, R.inf_norm())) break;
  }
  for (int s = 0; s < squarings; ++s) R = mat_mul(R, R);
  return R;
}

}  // namespace detail

/* fit beta(r,s) = c e^{-lambda s} r over the sampled matrix exponential
 * envelope and gamma(r) = k r with k = ||B|| (trapezoid integral of
 * ||e^{As}|| up to s_max plus the fitted-envelope tail) */
inline StabilityCertificate linear_gains(const Matrix& A, const Matrix& B, double s_max,
                                         int samples) {
  if (A.rows != A.cols || A.rows < 1) throw Error(errc::argument, "A must be square");
  if (B.rows != A.rows) throw Error(errc::argument, "B row count must match A");
  if (!(s_max > 0.0) || samples < 2)
    throw Error(errc::argument, "need s_max > 0 and at least two samples");

  const double h = s_max / (samples - 1);
  std::vector<double> norms(static_cast<std::size_t>(samples));
  Matrix Ah = A;
  for (auto& v : Ah.a) v *= h;
  const Matrix Eh = detail::mat_exp(Ah);
  Matrix P(A.rows, A.rows);
  for (int i = 0; i < A.rows; ++i) P.at(i, i) = 1.0;
  for (int s = 0; s < samples; ++s) {
    norms[static_cast<std::size_t>(s)] = P.inf_norm();
    if (s + 1 < samples) P = detail::mat_mul(P, Eh);
  }
  const double tail_norm = norms.back();
  if (!(tail_norm < 1.0))
    throw Error(errc::certificate,
                "||e^{A s_max}|| = " + std::to_string(tail_norm) +
                    " >= 1: A is not contracting on the sampled horizon (not Hurwitz?)");

  const double lambda = -std::log(tail_norm) / s_max;
  double c = 0.0;
  for (int s = 0; s < samples; ++s)
    c = std::max(c, norms[static_cast<std::size_t>(s)] * std::exp(lambda * h * s));

  double integral = 0.0;
  for (int s = 0; s + 1 < samples; ++s)
    integral += 0.5 * h * (norms[static_cast<std::size_t>(s)] + norms[static_cast<std::size_t>(s) + 1]);
  integral += (c / lambda) * std::exp(-lambda * s_max); /* envelope tail */

  StabilityCertificate cert;
  cert.beta = KLGain{c, lambda, 1.0};
  cert.gamma = KinfGain{B.inf_norm() * integral, 1.0};
  return cert;
}

}  // namespace absim

#endif /* ABSIM_SYSTEM_HH_ */
