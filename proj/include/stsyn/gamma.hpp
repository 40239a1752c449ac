#pragma once

namespace stsyn {

// Regularized lower incomplete gamma P(a, x) and its complement Q(a, x).
// Series expansion for x < a + 1, Lentz continued fraction otherwise.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Exact finite-sum form P(n, x) = 1 - e^{-x} sum_{k<n} x^k/k! for integer
// shape; independent cross-check path for the general routine.
double gamma_p_integer(int shape, double x);

// Erlang(shape, scale): sum of `shape` i.i.d. exponentials with mean `scale`.
double erlang_pdf(double t, int shape, double scale);
double erlang_cdf(double t, int shape, double scale);

}  // namespace stsyn
