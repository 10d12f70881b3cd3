#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>

namespace nlmetro::ode {

struct Options {
  double rtol = 1e-8;
  double atol = 1e-10;
  double initial_step = 0.0; // 0: choose automatically
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 2'000'000;
};

struct Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
  double last_step = 0.0;
};

using Rhs = std::function<void(double t, const double *y, double *dydt)>;
//! Called after every accepted step with the new time and state. Returning
//! false aborts the integration (a StepFailure is not raised).
using Observer = std::function<bool(double t, std::span<const double> y)>;

//! Dormand-Prince 5(4) with FSAL and a PI step-size controller.
//! Integrates y from t0 to t1 in place. Throws StepFailure when the step
//! size underflows, the state turns non-finite or max_steps is exceeded.
Stats integrate(const Rhs &rhs, std::span<double> y, double t0, double t1,
                const Options &opts = {}, const Observer &observer = {});

using cd = std::complex<double>;
//! Nonlinear part N(t, y) of y' = diag(rates) y + N(t, y).
using SplitRhs = std::function<void(double t, const cd *y, cd *n)>;
using ComplexObserver = std::function<bool(double t, std::span<const cd> y)>;

//! Fourth-order exponential Runge-Kutta (Cox & Matthews ETDRK4) for
//! y' = L y + N(t, y) with diagonal L. The linear part is propagated
//! exactly, so fast free oscillations and decay do not limit the step; the
//! local error is estimated by step doubling. Components with rate 0 are
//! integrated like an ordinary RK4 quadrature.
Stats integrate_exponential(std::span<const cd> rates, const SplitRhs &nonlinear,
                            std::span<cd> y, double t0, double t1,
                            const Options &opts = {},
                            const ComplexObserver &observer = {});

} // namespace nlmetro::ode
