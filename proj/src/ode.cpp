#include "nlmetro/ode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "nlmetro/errors.hpp"

namespace nlmetro::ode {

namespace {

// Dormand & Prince (1980) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
// error coefficients: b - b_hat
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

double error_norm(const std::vector<double> &err, std::span<const double> y0,
                  const std::vector<double> &y1, const Options &o) {
  double sum = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    const double scale =
        o.atol + o.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = err[i] / scale;
    sum += r * r;
  }
  return std::sqrt(sum / double(err.size()));
}

} // namespace

Stats integrate(const Rhs &rhs, std::span<double> y, double t0, double t1,
                const Options &opts, const Observer &observer) {
  Stats st;
  if (!(t1 > t0))
    return st;
  if (!(opts.rtol > 0.0) || !(opts.atol > 0.0))
    throw InvalidConfig("ode: tolerances must be positive");

  const std::size_t n = y.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  std::vector<double> tmp(n), ynew(n), err(n);

  rhs(t0, y.data(), k1.data());
  ++st.evaluations;

  double h = opts.initial_step;
  if (!(h > 0.0)) {
    // Hairer's heuristic: h ~ 0.01 |y| / |f|, refined by one Euler probe.
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = opts.atol + opts.rtol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / double(n));
    d1 = std::sqrt(d1 / double(n));
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * (t1 - t0) : 0.01 * d0 / d1;
    h0 = std::min(h0, t1 - t0);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h0 * k1[i];
    rhs(t0 + h0, tmp.data(), k2.data());
    ++st.evaluations;
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = opts.atol + opts.rtol * std::abs(y[i]);
      const double v = (k2[i] - k1[i]) / sc;
      d2 += v * v;
    }
    d2 = std::sqrt(d2 / double(n)) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                  : std::pow(0.01 / dm, 1.0 / 5.0);
    h = std::min(100.0 * h0, h1);
  }
  h = std::min({h, opts.max_step, t1 - t0});

  constexpr double safety = 0.9, beta = 0.04, expo = 0.2 - 0.75 * beta;
  constexpr double fac_min = 0.2, fac_max = 10.0;
  double err_old = 1e-4;
  bool last_rejected = false;
  double t = t0;

  while (t < t1) {
    if (st.accepted + st.rejected >= opts.max_steps)
      throw StepFailure("ode: maximum number of steps exceeded at t = " +
                        std::to_string(t));
    if (h < 1e-14 * std::max(std::abs(t), std::abs(t1 - t0)))
      throw StepFailure("ode: step size underflow at t = " + std::to_string(t));
    bool final_step = false;
    if (t + h >= t1 || t + 1.01 * h >= t1) {
      h = t1 - t;
      final_step = true;
    }

    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * a21 * k1[i];
    rhs(t + c2 * h, tmp.data(), k2.data());
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    rhs(t + c3 * h, tmp.data(), k3.data());
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs(t + c4 * h, tmp.data(), k4.data());
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] +
                           a54 * k4[i]);
    rhs(t + c5 * h, tmp.data(), k5.data());
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                           a64 * k4[i] + a65 * k5[i]);
    rhs(t + h, tmp.data(), k6.data());
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] +
                            a75 * k5[i] + a76 * k6[i]);
    rhs(t + h, ynew.data(), k7.data());
    st.evaluations += 6;

    for (std::size_t i = 0; i < n; ++i)
      err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                    e6 * k6[i] + e7 * k7[i]);
    double e = error_norm(err, y, ynew, opts);
    if (!std::isfinite(e))
      e = 1e10; // treat as a failed step and shrink hard

    if (e <= 1.0) {
      for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(ynew[i]))
          throw StepFailure("ode: non-finite state at t = " +
                            std::to_string(t + h));
      t = final_step ? t1 : t + h;
      std::copy(ynew.begin(), ynew.end(), y.begin());
      std::swap(k1, k7);
      ++st.accepted;
      st.last_step = h;
      if (observer && !observer(t, std::span<const double>(y.data(), n)))
        return st;

      double fac = std::pow(e, expo) / std::pow(err_old, beta);
      fac = std::clamp(fac / safety, 1.0 / fac_max, 1.0 / fac_min);
      double hn = h / fac;
      if (last_rejected)
        hn = std::min(hn, h);
      err_old = std::max(e, 1e-4);
      last_rejected = false;
      h = std::min(hn, opts.max_step);
    } else {
      ++st.rejected;
      const double fac =
          std::min(1.0 / fac_min, std::pow(e, expo) / safety);
      h /= fac;
      last_rejected = true;
    }
  }
  return st;
}

} // namespace nlmetro::ode

namespace nlmetro::ode {

namespace {

struct PhiSet {
  cd phi1, phi2, phi3;
};

PhiSet phi_functions(cd z) {
  if (std::abs(z) < 0.5) {
    // phi_k(z) = sum_j z^j / (j + k)!
    PhiSet p{0.0, 0.0, 0.0};
    cd term = 1.0;
    double fact1 = 1.0, fact2 = 2.0, fact3 = 6.0; // (j+1)!, (j+2)!, (j+3)!
    for (int j = 0; j < 18; ++j) {
      p.phi1 += term / fact1;
      p.phi2 += term / fact2;
      p.phi3 += term / fact3;
      term *= z;
      fact1 *= j + 2;
      fact2 *= j + 3;
      fact3 *= j + 4;
    }
    return p;
  }
  const cd e = std::exp(z);
  const cd p1 = (e - 1.0) / z;
  const cd p2 = (p1 - 1.0) / z;
  const cd p3 = (p2 - 0.5) / z;
  return {p1, p2, p3};
}

// Per-component weights of one ETDRK4 step of size h. Components that
// share a rate share their weights, so the phi functions are evaluated once
// per distinct rate.
struct EtdCoefficients {
  double h = 0.0;
  std::vector<cd> full, half;    // e^{L h}, e^{L h / 2}
  std::vector<cd> q;             // (h/2) phi1(L h / 2)
  std::vector<cd> f1, f2, f3;    // final-stage weights, including h

  void compute(const std::vector<cd> &distinct, double step) {
    h = step;
    const std::size_t n = distinct.size();
    full.resize(n);
    half.resize(n);
    q.resize(n);
    f1.resize(n);
    f2.resize(n);
    f3.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const cd z = distinct[i] * h;
      const PhiSet p = phi_functions(z);
      const PhiSet ph = phi_functions(0.5 * z);
      full[i] = std::exp(z);
      half[i] = std::exp(0.5 * z);
      q[i] = 0.5 * h * ph.phi1;
      f1[i] = h * (p.phi1 - 3.0 * p.phi2 + 4.0 * p.phi3);
      f2[i] = h * 2.0 * (p.phi2 - 2.0 * p.phi3);
      f3[i] = h * (4.0 * p.phi3 - p.phi2);
    }
  }
};

struct EtdStepper {
  const SplitRhs &nonlinear;
  std::size_t n;
  const std::vector<std::uint32_t> &slot; // component -> distinct rate
  std::vector<cd> na, nb, nc, a, b, c;
  std::size_t evaluations = 0;

  EtdStepper(const SplitRhs &f, const std::vector<std::uint32_t> &slots)
      : nonlinear(f), n(slots.size()), slot(slots), na(n), nb(n), nc(n),
        a(n), b(n), c(n) {}

  // One step from (t, y) with N(t, y) = n0 already known.
  void step(const EtdCoefficients &k, double t, const cd *y, const cd *n0,
            cd *out) {
    const double h = k.h;
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = slot[i];
      a[i] = k.half[s] * y[i] + k.q[s] * n0[i];
    }
    nonlinear(t + 0.5 * h, a.data(), na.data());
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = slot[i];
      b[i] = k.half[s] * y[i] + k.q[s] * na[i];
    }
    nonlinear(t + 0.5 * h, b.data(), nb.data());
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = slot[i];
      c[i] = k.half[s] * a[i] + k.q[s] * (2.0 * nb[i] - n0[i]);
    }
    nonlinear(t + h, c.data(), nc.data());
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = slot[i];
      out[i] = k.full[s] * y[i] + k.f1[s] * n0[i] +
               k.f2[s] * (na[i] + nb[i]) + k.f3[s] * nc[i];
    }
    evaluations += 3;
  }
};

} // namespace

Stats integrate_exponential(std::span<const cd> rates, const SplitRhs &nonlinear,
                            std::span<cd> y, double t0, double t1,
                            const Options &opts, const ComplexObserver &observer) {
  Stats st;
  if (!(t1 > t0))
    return st;
  if (!(opts.rtol > 0.0) || !(opts.atol > 0.0))
    throw InvalidConfig("ode: tolerances must be positive");
  const std::size_t n = y.size();
  if (rates.size() != n)
    throw InvalidConfig("ode: rate vector does not match the state");

  // Exact duplicates only: degenerate manifolds give many equal rates.
  std::vector<cd> distinct;
  std::vector<std::uint32_t> slot(n);
  {
    std::map<std::pair<double, double>, std::uint32_t> index;
    for (std::size_t i = 0; i < n; ++i) {
      const auto key = std::make_pair(rates[i].real(), rates[i].imag());
      auto [it, inserted] = index.try_emplace(key, distinct.size());
      if (inserted)
        distinct.push_back(rates[i]);
      slot[i] = it->second;
    }
  }

  EtdStepper stepper(nonlinear, slot);
  EtdCoefficients big, small;
  std::vector<cd> n0(n), nmid(n), one(n), mid(n), two(n);

  double h = opts.initial_step > 0.0 ? opts.initial_step : (t1 - t0) / 200.0;
  h = std::min({h, opts.max_step, t1 - t0});
  double t = t0;
  nonlinear(t, y.data(), n0.data());
  ++stepper.evaluations;

  while (t < t1) {
    if (st.accepted + st.rejected >= opts.max_steps)
      throw StepFailure("ode: maximum number of steps exceeded at t = " +
                        std::to_string(t));
    if (h < 1e-14 * std::max(std::abs(t), std::abs(t1 - t0)))
      throw StepFailure("ode: step size underflow at t = " + std::to_string(t));
    bool final_step = false;
    if (t + 1.01 * h >= t1) {
      h = t1 - t;
      final_step = true;
    }

    if (big.h != h) {
      big.compute(distinct, h);
      small.compute(distinct, 0.5 * h);
    }
    stepper.step(big, t, y.data(), n0.data(), one.data());
    stepper.step(small, t, y.data(), n0.data(), mid.data());
    nonlinear(t + 0.5 * h, mid.data(), nmid.data());
    ++stepper.evaluations;
    stepper.step(small, t + 0.5 * h, mid.data(), nmid.data(), two.data());

    // Richardson estimate of the local error of the two half steps.
    double sum = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double scale =
          opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(two[i]));
      const double r = std::abs(two[i] - one[i]) / (15.0 * scale);
      sum += r * r;
      finite = finite && std::isfinite(two[i].real()) &&
               std::isfinite(two[i].imag());
    }
    const double err = finite ? std::sqrt(sum / double(n)) : 1e10;

    if (err <= 1.0) {
      t = final_step ? t1 : t + h;
      std::copy(two.begin(), two.end(), y.begin());
      ++st.accepted;
      st.last_step = h;
      nonlinear(t, y.data(), n0.data());
      ++stepper.evaluations;
      if (observer && !observer(t, std::span<const cd>(y.data(), n)))
        break;
      const double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 4.0;
      h = std::min(h * std::clamp(fac, 0.2, 4.0), opts.max_step);
    } else {
      ++st.rejected;
      h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
    }
  }
  st.evaluations = stepper.evaluations;
  return st;
}

} // namespace nlmetro::ode
