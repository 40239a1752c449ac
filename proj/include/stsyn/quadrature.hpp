#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace stsyn {

struct QuadratureOutcome {
  double value = 0.0;
  double abs_error = 0.0;  // accumulated Richardson error estimate
  long evaluations = 0;
};

// Raised when the error estimate cannot be driven below the requested
// tolerance within the depth/evaluation budget. Carries the best estimate so
// callers may decide to accept it anyway.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(std::string what, QuadratureOutcome best)
      : std::runtime_error(std::move(what)), best_estimate(best) {}
  QuadratureOutcome best_estimate;
};

namespace detail {

template <typename F>
struct SimpsonWorker {
  const F& f;
  long evals = 0;
  long max_evals;
  bool budget_exhausted = false;

  double eval(double x) {
    ++evals;
    return f(x);
  }

  // Recursive bisection; `whole` is Simpson on [a,b] with midpoint value fm.
  // `force` levels are always subdivided so that a localized integrand is not
  // mistaken for zero by the first coarse panels.
  QuadratureOutcome recurse(double a, double fa, double b, double fb, double fm,
                            double whole, double tol, int depth, int force) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    if (evals + 2 > max_evals) {
      budget_exhausted = true;
      return {whole, tol, 0};
    }
    const double flm = eval(lm);
    const double frm = eval(rm);
    const double h6 = (b - a) / 12.0;
    const double left = h6 * (fa + 4.0 * flm + fm);
    const double right = h6 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (force <= 0 && (std::fabs(delta) <= 15.0 * tol || depth <= 0)) {
      if (std::fabs(delta) > 15.0 * tol) budget_exhausted = true;
      return {left + right + delta / 15.0, std::fabs(delta) / 15.0, 0};
    }
    const QuadratureOutcome l =
        recurse(a, fa, m, fm, flm, left, 0.5 * tol, depth - 1, force - 1);
    const QuadratureOutcome r =
        recurse(m, fm, b, fb, frm, right, 0.5 * tol, depth - 1, force - 1);
    return {l.value + r.value, l.abs_error + r.abs_error, 0};
  }
};

}  // namespace detail

// Adaptive Simpson on [lo, hi] with absolute tolerance. Throws
// QuadratureError when the budget runs out before the estimate converges.
template <typename F>
QuadratureOutcome adaptive_simpson(const F& f, double lo, double hi,
                                   double abs_tol, int max_depth = 48,
                                   long max_evals = 20'000'000,
                                   int min_depth = 7) {
  if (!(hi > lo)) return {0.0, 0.0, 0};
  if (!(abs_tol > 0.0)) throw std::invalid_argument("adaptive_simpson: abs_tol must be > 0");
  detail::SimpsonWorker<F> w{f, 0, max_evals, false};
  const double fa = w.eval(lo);
  const double fb = w.eval(hi);
  const double fm = w.eval(0.5 * (lo + hi));
  const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
  QuadratureOutcome out =
      w.recurse(lo, fa, hi, fb, fm, whole, abs_tol, max_depth, min_depth);
  out.evaluations = w.evals;
  if (w.budget_exhausted || !(out.abs_error <= abs_tol) || std::isnan(out.value)) {
    throw QuadratureError("adaptive_simpson: tolerance not reached within budget", out);
  }
  return out;
}

}  // namespace stsyn
