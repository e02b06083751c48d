#pragma once

namespace idp {

double lbeta(double a, double b);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
// Absolute accuracy well below 1e-10 for a, b in the ranges used here.
double ibeta_reg(double a, double b, double x);

// log(e^a + e^b), tolerant of -inf inputs
double log_add(double a, double b);

// log(e^a - e^b); requires a >= b
double log_sub(double a, double b);

// log(erfc(x)), stable for large positive x where erfc underflows
double log_erfc(double x);

// Generalized binomial coefficient binom(n, k) for real n and integer
// k >= 0, returned as (sign, log|binom|).
struct SignedLog {
  double sign;
  double log_abs;
};
SignedLog signed_log_binom(double n, int k);

// log of binom(n, k) for integer 0 <= k <= n, via lgamma
double log_binom_int(double n, double k);

}  // namespace idp
