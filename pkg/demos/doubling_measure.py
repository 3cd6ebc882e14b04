"""Doubling constants of ternary Bernoulli measures and the digit-capped set K.

    python demos/doubling_measure.py
"""
from fractions import Fraction

from holdercover.doubling import (DigitRule, TernaryBernoulli, analytic_exponent,
                                  doubling_constant_estimate, k_boxdim_bound, k_count,
                                  mu_K_lower_bound)

for delta in (Fraction(1, 3), Fraction(1, 10), Fraction(1, 100)):
    est = doubling_constant_estimate(TernaryBernoulli(delta), 1, 8)
    print(f"delta={delta}: doubling ratio {est.ratio:.4f} at radius {float(est.radius):.2e}")

rule = DigitRule(100, Fraction(1, 100))
print(f"k_count(L=1) = {k_count(rule, 1)}")
res = k_boxdim_bound(rule, range(1, 6))
print("exponents", {L: round(e, 4) for L, e in res["exponents"].items()},
      f"limit {analytic_exponent(rule.delta):.4f}")
for n1 in (100, 200, 400):
    b = mu_K_lower_bound(DigitRule(n1, rule.delta), TernaryBernoulli(rule.delta), 10)
    print(f"n1={n1}: mu of the first 10 blocks' set = {b.product:.4f}")
