/*
 * lattice.hh
 *
 * quantization lattices [A]_mu (points of a box whose coordinates are
 * integer multiples of the step), nearest-point queries under the
 * infinity norm, and the precision inequalities gating an abstraction
 */

#ifndef ABSIM_LATTICE_HH_
#define ABSIM_LATTICE_HH_

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "absim/system.hh"

namespace absim {

/* tau: sampling time, eta: state quantization, mu: input quantization,
 * eps: precision, nu: integration error budget */
struct AbstractionParams {
  double tau = 1.0;
  double eta = 0.1;
  double mu = 0.1;
  double eps = 1.0;
  double nu = 0.0;

  void validate() const {
    if (!(tau > 0.0)) throw Error(errc::argument, "tau must be positive");
    if (!(eta > 0.0)) throw Error(errc::argument, "eta must be positive");
    if (!(mu > 0.0)) throw Error(errc::argument, "mu must be positive");
    if (!(eps > 0.0)) throw Error(errc::argument, "eps must be positive");
    if (!(nu >= 0.0)) throw Error(errc::argument, "nu must be nonnegative");
    if (!(nu < eta / 2.0))
      throw Error(errc::argument,
                  "nu must stay below eta/2, otherwise the adjusted transition rule is vacuous");
  }
};

namespace detail {

/* integer index window of lattice points k*step inside [lo, hi];
 * relative tolerance absorbs binary rounding of non-representable steps */
struct AxisWindow {
  std::int64_t k_lo;
  std::int64_t k_hi; /* inclusive; empty when k_hi < k_lo */
};

inline AxisWindow axis_window(double lo, double hi, double step) {
  const double tlo = lo / step;
  const double thi = hi / step;
  const double rlo = 1e-12 * std::max(1.0, std::fabs(tlo));
  const double rhi = 1e-12 * std::max(1.0, std::fabs(thi));
  AxisWindow w;
  w.k_lo = static_cast<std::int64_t>(std::ceil(tlo - rlo));
  w.k_hi = static_cast<std::int64_t>(std::floor(thi + rhi));
  return w;
}

}  // namespace detail

/* all lattice points of the closed box, lexicographically ordered
 * (first axis most significant, ascending); may be empty */
inline std::vector<Vec> lattice_points(const Box& box, double step) {
  if (!(step > 0.0)) throw Error(errc::argument, "lattice step must be positive");
  std::vector<detail::AxisWindow> wins;
  std::uint64_t total = 1;
  for (const auto& iv : box) {
    const auto w = detail::axis_window(iv.lo, iv.hi, step);
    if (w.k_hi < w.k_lo) return {};
    wins.push_back(w);
    total *= static_cast<std::uint64_t>(w.k_hi - w.k_lo + 1);
  }
  std::vector<Vec> out;
  out.reserve(total);
  Vec point(box.size());
  std::vector<std::int64_t> k(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) k[i] = wins[i].k_lo;
  for (std::uint64_t c = 0; c < total; ++c) {
    for (std::size_t i = 0; i < box.size(); ++i) point[i] = static_cast<double>(k[i]) * step;
    out.push_back(point);
    for (std::size_t i = box.size(); i-- > 0;) {
      if (++k[i] <= wins[i].k_hi) break;
      k[i] = wins[i].k_lo;
    }
  }
  return out;
}

/* lattice points q with ||x - q||inf <= step/2 (closed ball): exactly one
 * generically, up to 2^n on half-step ties */
inline std::vector<Vec> nearest_points(std::span<const double> x, double step) {
  if (!(step > 0.0)) throw Error(errc::argument, "lattice step must be positive");
  std::vector<detail::AxisWindow> wins;
  for (double c : x) {
    const double t = c / step;
    const double rt = 1e-12 * std::max(1.0, std::fabs(t));
    detail::AxisWindow w;
    w.k_lo = static_cast<std::int64_t>(std::ceil(t - 0.5 - rt));
    w.k_hi = static_cast<std::int64_t>(std::floor(t + 0.5 + rt));
    wins.push_back(w);
  }
  std::vector<Vec> out;
  Vec point(x.size());
  std::vector<std::int64_t> k(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) k[i] = wins[i].k_lo;
  for (;;) {
    for (std::size_t i = 0; i < x.size(); ++i) point[i] = static_cast<double>(k[i]) * step;
    out.push_back(point);
    std::size_t i = x.size();
    for (; i-- > 0;) {
      if (++k[i] <= wins[i].k_hi) break;
      k[i] = wins[i].k_lo;
    }
    if (i == static_cast<std::size_t>(-1)) break;
  }
  return out;
}

struct ConditionReport {
  bool holds = false;
  double lhs = 0.0;
  double slack = 0.0;
};

/* beta(eps,tau) + gamma(mu) + eta/2 <= eps  (delta-ISS, digital inputs) */
inline ConditionReport check_iss_condition(const StabilityCertificate& cert,
                                           const AbstractionParams& p) {
  p.validate();
  const KinfGain& gamma = cert.require_gamma();
  ConditionReport r;
  r.lhs = cert.beta(p.eps, p.tau) + gamma(p.mu) + p.eta / 2.0;
  r.holds = r.lhs <= p.eps;
  r.slack = p.eps - r.lhs;
  return r;
}

/* beta(eps,tau) + mu + eta/2 <= eps  (delta-GAS, reachable-set labels) */
inline ConditionReport check_gas_condition(const StabilityCertificate& cert,
                                           const AbstractionParams& p) {
  p.validate();
  ConditionReport r;
  r.lhs = cert.beta(p.eps, p.tau) + p.mu + p.eta / 2.0;
  r.holds = r.lhs <= p.eps;
  r.slack = p.eps - r.lhs;
  return r;
}

/* split the residual eps - beta(eps,tau) evenly between gamma(mu) and
 * eta/2; the returned parameters satisfy the corresponding condition
 * with (floating-point) zero slack */
inline AbstractionParams suggest_params(const StabilityCertificate& cert, double eps, double tau,
                                        bool gas_mode = false) {
  if (!(eps > 0.0) || !(tau > 0.0))
    throw Error(errc::argument, "eps and tau must be positive");
  const double b = cert.beta(eps, tau);
  if (!(b < eps)) {
    const double tau_min =
        (std::log(cert.beta.c) + (cert.beta.p - 1.0) * std::log(eps)) / cert.beta.lambda;
    throw Error(errc::argument,
                "no parameter split exists at tau = " + std::to_string(tau) +
                    "; minimal feasible tau is " + std::to_string(tau_min));
  }
  const double resid = eps - b;
  AbstractionParams p;
  p.tau = tau;
  p.eps = eps;
  p.nu = 0.0;
  p.eta = resid;
  p.mu = gas_mode ? resid / 2.0 : cert.require_gamma().inverse(resid / 2.0);
  /* a couple of ulps of rounding may land on the wrong side of <= */
  for (int i = 0; i < 64; ++i) {
    const auto chk = gas_mode ? check_gas_condition(cert, p) : check_iss_condition(cert, p);
    if (chk.holds) break;
    p.mu *= 1.0 - 1e-12;
    p.eta *= 1.0 - 1e-13;
  }
  return p;
}

}  // namespace absim

#endif /* ABSIM_LATTICE_HH_ */
