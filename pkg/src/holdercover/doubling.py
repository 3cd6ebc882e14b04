"""Ternary Bernoulli measures and the digit-restricted set K.

K holds the points of [0, 1] whose ternary digits in block L (positions
S_{L-1}+1 .. S_L, of length n1 L) contain at most k_L = L k1 zeros or twos.
Counts are exact big integers; measures are exact rationals when the weight
delta is rational.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "TernaryBernoulli",
    "DigitRule",
    "DoublingEstimate",
    "MuKBound",
    "interval_measure",
    "interval_mass",
    "doubling_constant_estimate",
    "ternary_digits",
    "k_member",
    "k_count",
    "k_boxdim_bound",
    "mu_K_lower_bound",
    "analytic_exponent",
    "report_json",
]


def _frac(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


@dataclass(frozen=True)
class TernaryBernoulli:
    """Digit weights (delta, 1 - 2 delta, delta) on ternary digits 0, 1, 2."""

    delta: Fraction

    def __post_init__(self):
        dl = _frac(self.delta)
        if not 0 < dl <= Fraction(1, 3):
            raise ValueError(f"delta must lie in (0, 1/3], got {dl}")
        object.__setattr__(self, "delta", dl)

    @property
    def weights(self) -> tuple[Fraction, Fraction, Fraction]:
        return (self.delta, 1 - 2 * self.delta, self.delta)

    @property
    def float_weights(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])


def _digits(digits) -> list[int]:
    out = [int(c) for c in digits]
    if any(c not in (0, 1, 2) for c in out):
        raise ValueError(f"invalid ternary digits {digits!r}")
    return out


def interval_measure(mu: TernaryBernoulli, digits, exact: bool = False):
    """Mass of the ternary interval with the given digit prefix."""
    w = mu.weights if exact else mu.float_weights
    out = Fraction(1) if exact else 1.0
    for c in _digits(digits):
        out *= w[c]
    return out if exact else float(out)


def _cdf_exact(mu: TernaryBernoulli, k: int, M: int) -> Fraction:
    """mu([0, k 3^-M]) for 0 <= k <= 3^M."""
    if k == 3**M:
        return Fraction(1)
    w = mu.weights
    out, scale = Fraction(0), Fraction(1)
    for i in range(M - 1, -1, -1):
        c = (k // 3**i) % 3
        out += scale * sum(w[:c], Fraction(0))
        scale *= w[c]
    return out


def interval_mass(mu: TernaryBernoulli, lo: int, hi: int, M: int) -> Fraction:
    """Exact mass of [lo 3^-M, hi 3^-M] for the 1-periodic extension of mu."""
    def G(K):
        q, r = divmod(K, 3**M)
        return q + _cdf_exact(mu, r, M)
    return G(hi) - G(lo)


@dataclass(frozen=True)
class DoublingEstimate:
    ratio: float
    exact: Fraction
    center: tuple[Fraction, ...]
    radius: Fraction
    depth: int
    d: int

    def as_dict(self) -> dict:
        return {"ratio": self.ratio, "exact": str(self.exact), "center": [str(c) for c in self.center],
                "radius": str(self.radius), "depth": self.depth, "d": self.d}


def _level_masses(mu: TernaryBernoulli, M: int) -> np.ndarray:
    m = np.ones(1)
    w = mu.float_weights
    for _ in range(M):
        m = np.kron(m, w)
    return m


def doubling_constant_estimate(mu: TernaryBernoulli, d: int = 1, depth: int = 8) -> DoublingEstimate:
    """Largest nu(B(x, 2r)) / nu(B(x, r)) over triadic centres and radii 3^-j.

    Centres run over the grid 3^-depth Z in [0, 1)^d and j over 0..depth.  Balls
    are taken in the max norm, so for the product measure nu = mu^d the ratio
    factorizes over coordinates and its maximum is the d-th power of the
    one-dimensional maximum.  The maximizer is re-evaluated in exact
    arithmetic.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    M = depth
    size = 3**M
    cdf = np.concatenate([[0.0], np.cumsum(_level_masses(mu, M))])

    def G(K):
        q, r = np.divmod(K, size)
        return q + cdf[r]

    centres = np.arange(size)
    best, arg = -1.0, (0, 0)
    for j in range(depth + 1):
        R = 3 ** (M - j)
        ratio = (G(centres + 2 * R) - G(centres - 2 * R)) / (G(centres + R) - G(centres - R))
        i = int(np.argmax(ratio))
        if ratio[i] > best:
            best, arg = float(ratio[i]), (i, j)
    i, j = arg
    R = 3 ** (M - j)
    exact = interval_mass(mu, i - 2 * R, i + 2 * R, M) / interval_mass(mu, i - R, i + R, M)
    x = Fraction(i, size)
    return DoublingEstimate(float(exact) ** d, exact**d, (x,) * d, Fraction(1, 3**j), depth, d)


# ---------------------------------------------------------------------------
# the set K


@dataclass(frozen=True)
class DigitRule:
    """Block lengths n1 L and caps k_L = L k1 with k1 = 3 delta n1."""

    n1: int
    delta: Fraction

    def __post_init__(self):
        dl = _frac(self.delta)
        if self.n1 < 1:
            raise ValueError("n1 must be >= 1")
        if not 0 < dl <= Fraction(1, 3):
            raise ValueError("delta must lie in (0, 1/3]")
        k1 = 3 * dl * self.n1
        if k1.denominator != 1:
            raise ValueError(f"3 delta n1 = {k1} is not an integer")
        object.__setattr__(self, "delta", dl)

    @property
    def k1(self) -> int:
        return int(3 * self.delta * self.n1)

    def k(self, L: int) -> int:
        return L * self.k1

    def S(self, L: int) -> int:
        return self.n1 * L * (L + 1) // 2

    def block(self, L: int) -> tuple[int, int]:
        """1-based inclusive digit positions of block L."""
        return self.S(L - 1) + 1, self.S(L)

    def blocks_within(self, length: int) -> int:
        L = 0
        while self.S(L + 1) <= length:
            L += 1
        return L


def ternary_digits(x, m: int) -> list[int]:
    """First m ternary digits of x in [0, 1], lexicographically smallest expansion.

    Points with two expansions get the one ending in 2s (1/3 = 0.0222...).
    """
    x = Fraction(x)
    if not 0 <= x <= 1:
        raise ValueError("x must lie in [0, 1]")
    if x == 0:
        return [0] * m
    out, prev = [], 0
    for j in range(1, m + 1):
        y = math.ceil(x * 3**j) - 1
        out.append(y - 3 * prev)
        prev = y
    return out


def k_member(digits, rule: DigitRule) -> bool:
    """Whether every complete block of ``digits`` respects its cap."""
    ds = _digits(digits)
    for L in range(1, rule.blocks_within(len(ds)) + 1):
        a, b = rule.block(L)
        if sum(1 for c in ds[a - 1:b] if c != 1) > rule.k(L):
            return False
    return True


def _block_count(n: int, k: int) -> int:
    return sum(math.comb(n, j) * 2**j for j in range(min(k, n) + 1))


def k_count(rule: DigitRule, L: int) -> int:
    """Exact number of level-S_L ternary intervals allowed by the first L blocks."""
    if L < 0:
        raise ValueError("L must be >= 0")
    out = 1
    for ell in range(1, L + 1):
        out *= _block_count(rule.n1 * ell, rule.k(ell))
    return out


def analytic_exponent(delta) -> float:
    """(3 / log 3) (delta + delta log(1/delta))."""
    dl = float(_frac(delta))
    return 3.0 / math.log(3) * (dl + dl * math.log(1.0 / dl))


def k_boxdim_bound(rule: DigitRule, Ls: Iterable[int]) -> dict:
    """Box-count exponents of K at construction levels, plus the level ceiling.

    ``exponents[L] = log N(K, 3^-S_L) / (S_L log 3)`` from the exact counts.
    ``intermediate[m]`` bounds the exponent at any level m up to the last S_L
    through N(K, 3^-m) <= N(K, 3^-S_Lm) 3^j_m, where S_Lm is the last
    construction level at or below m and j_m = m - S_Lm.
    """
    Ls = list(Ls)
    if not Ls:
        raise ValueError("need at least one L")
    exps, counts = {}, {}
    for L in Ls:
        counts[L] = k_count(rule, L)
        exps[L] = math.log(counts[L]) / (rule.S(L) * math.log(3))
    inter = {}
    for m in range(1, rule.S(max(Ls)) + 1):
        Lm = rule.blocks_within(m)
        jm = m - rule.S(Lm)
        inter[m] = (math.log(k_count(rule, Lm)) + jm * math.log(3)) / (m * math.log(3))
    return {"counts": counts, "exponents": exps, "analytic": analytic_exponent(rule.delta),
            "intermediate": inter}


def _binom_cdf_exact(n: int, k: int, q: Fraction) -> Fraction:
    a, b = q.numerator, q.denominator
    total = sum(math.comb(n, j) * a**j * (b - a) ** (n - j) for j in range(min(k, n) + 1))
    return Fraction(total, b**n)


@dataclass(frozen=True)
class MuKBound:
    factors: tuple[float, ...]
    exact_factors: tuple[Fraction, ...]
    d: int

    @property
    def product(self) -> float:
        return float(self.exact_product)

    @property
    def exact_product(self) -> Fraction:
        out = Fraction(1)
        for f in self.exact_factors:
            out *= f
        return out

    @property
    def product_d(self) -> float:
        return float(self.exact_product**self.d)


def mu_K_lower_bound(rule: DigitRule, mu: TernaryBernoulli, Lmax: int, d: int = 1) -> MuKBound:
    """Product over blocks of P(Bin(n1 L, 2 delta) <= k_L).

    Digits are i.i.d. under mu, so the blocks are independent and the product
    is exactly the mu-mass of the set cut out by the first Lmax blocks.  These
    sets decrease to K, so the product decreases in Lmax towards mu(K).  The
    d-th power gives the product measure of the d-fold product set.
    """
    q = 2 * mu.delta
    exact = tuple(_binom_cdf_exact(rule.n1 * L, rule.k(L), q) for L in range(1, Lmax + 1))
    return MuKBound(tuple(float(f) for f in exact), exact, d)


def report_json(rule: DigitRule, Lmax: int, mu: TernaryBernoulli | None = None, d: int = 1) -> str:
    mu = mu or TernaryBernoulli(rule.delta)
    res = k_boxdim_bound(rule, range(1, Lmax + 1))
    bound = mu_K_lower_bound(rule, mu, Lmax, d)
    payload = {
        "delta": str(rule.delta),
        "n1": rule.n1,
        "k1": rule.k1,
        "counts": {str(L): str(c) for L, c in res["counts"].items()},
        "exponents": {str(L): e for L, e in res["exponents"].items()},
        "bound": res["analytic"],
        "mu_K_factors": list(bound.factors),
        "mu_K_product": bound.product,
        "nu_K_product": bound.product_d,
    }
    return json.dumps(payload, sort_keys=True)
