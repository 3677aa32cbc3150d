"""Weight and coefficient families parameterizing the mode systems.

A weight family assigns positive numbers a_n(k) to every radial level n >= 0 and
radial index k >= 0 such that s(n) = sum_k 1/a_n(k) is finite and s(n) -> 0.
A coefficient family assigns gap sequences c_{i,n}(k) in (0, 1] for i in {1, 2}
whose infinite products J_i(n) converge to a nonzero limit, together with a
uniformity constant kappa >= 1 certifying 1/kappa <= c_{i,n}(k) <= 1.

Every series or product evaluated here comes back as a SeriesValue carrying a
rigorous bound on the omitted tail, so downstream checks can use certified
brackets instead of bare truncations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import zeta

POWER = "power-family"
TABULATED = "tabulated"
UNIT = "unit"
GEOMETRIC = "geometric-gap"

# Determinants and products below this are treated as numerically collapsed.
COLLAPSE_FLOOR = 1e-300


class HypothesisViolation(ValueError):
    """A family fails one of the standing summability/uniformity hypotheses."""


@dataclass(frozen=True)
class SeriesValue:
    """A truncated series/product value with a rigorous tail bound.

    ``value`` is the computed truncation, ``k_trunc`` the first omitted index,
    and ``tail`` an upper bound on |true - value|.
    """

    value: float
    k_trunc: int
    tail: float

    @property
    def upper(self) -> float:
        return self.value + self.tail

    @property
    def lower(self) -> float:
        return self.value - self.tail


@dataclass(frozen=True)
class WeightFamily:
    """Radial weights a_n(k).

    kind "power-family": a_n(k) = lam * (n+1)**p * (k+1)**q.
    kind "tabulated": explicit rows table[n][k] continued by the declared tail
    rule ("power" with the lam/p/q parameters, or "constant" with tail_value,
    the latter making 1/a_n non-summable).
    """

    kind: str = POWER
    lam: float = 1.0
    p: float = 1.0
    q: float = 2.0
    table: tuple[tuple[float, ...], ...] = ()
    tail_rule: str = "power"
    tail_value: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in (POWER, TABULATED):
            raise ValueError(f"unknown weight family kind {self.kind!r}")
        if not (self.lam > 0):
            raise ValueError("scale lam must be positive")
        if self.kind == POWER and self.p < 1:
            raise ValueError("mode exponent p must be >= 1")
        if self.kind == TABULATED:
            for row in self.table:
                if any(not (v > 0) for v in row):
                    raise ValueError("tabulated weights must be positive")
            if self.tail_rule == "constant" and not (self.tail_value > 0):
                raise ValueError("constant tail level must be positive")

    def a(self, n: int, k):
        """Evaluate a_n(k); k may be an integer or an integer array."""
        if self.kind == POWER:
            return self.lam * (n + 1) ** self.p * np.asarray(k + 1, dtype=float) ** self.q
        k_arr = np.atleast_1d(np.asarray(k, dtype=int))
        out = np.empty(k_arr.shape, dtype=float)
        row = self.table[n] if n < len(self.table) else ()
        for idx, kk in enumerate(k_arr):
            if kk < len(row):
                out[idx] = row[kk]
            elif self.tail_rule == "power":
                out[idx] = self.lam * (n + 1) ** self.p * (kk + 1) ** self.q
            else:
                out[idx] = self.tail_value
        return out if np.ndim(k) else float(out[0])

    def summable(self) -> bool:
        if self.kind == POWER:
            return self.q > 1
        return self.tail_rule == "power" and self.q > 1


@dataclass(frozen=True)
class CoefficientFamily:
    """Gap coefficients c_{i,n}(k), i in {1, 2}, with uniformity constant kappa.

    kind "geometric-gap": c_{i,n}(k) = 1 - t_i**(k+1), 0 < t_i < 1.
    kind "unit": c identically 1.  kind "tabulated": explicit k-rows (shared
    across n) continued by a geometric-gap tail ("geometric") or a constant.
    """

    kind: str = GEOMETRIC
    t1: float = 0.5
    t2: float = 0.5
    kappa: float = 2.0
    table1: tuple[float, ...] = ()
    table2: tuple[float, ...] = ()
    tail_rule: str = "geometric"
    tail_value: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in (UNIT, GEOMETRIC, TABULATED):
            raise ValueError(f"unknown coefficient family kind {self.kind!r}")
        if self.kind == GEOMETRIC and not (0 < self.t1 < 1 and 0 < self.t2 < 1):
            raise ValueError("geometric-gap parameters must satisfy 0 < t < 1")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.kind == TABULATED:
            for row in (self.table1, self.table2):
                if any(not (0 < v <= 1) for v in row):
                    raise ValueError("tabulated coefficients must lie in (0, 1]")

    def _t(self, i: int) -> float:
        return self.t1 if i == 1 else self.t2

    def _row(self, i: int) -> tuple[float, ...]:
        return self.table1 if i == 1 else self.table2

    def c(self, i: int, n: int, k):
        """Evaluate c_{i,n}(k); k may be an integer or an integer array."""
        if i not in (1, 2):
            raise ValueError("coefficient index must be 1 or 2")
        if self.kind == UNIT:
            return np.ones_like(np.asarray(k, dtype=float)) if np.ndim(k) else 1.0
        if self.kind == GEOMETRIC:
            t = self._t(i)
            return 1.0 - t ** (np.asarray(k, dtype=float) + 1.0)
        k_arr = np.atleast_1d(np.asarray(k, dtype=int))
        row = self._row(i)
        out = np.empty(k_arr.shape, dtype=float)
        for idx, kk in enumerate(k_arr):
            if kk < len(row):
                out[idx] = row[kk]
            elif self.tail_rule == "geometric":
                out[idx] = 1.0 - self._t(i) ** (kk + 1)
            else:
                out[idx] = self.tail_value
        return out if np.ndim(k) else float(out[0])

    def inf_c(self, i: int) -> float:
        """Infimum of c_{i,n}(k) over all n, k (closed form per kind)."""
        if self.kind == UNIT:
            return 1.0
        if self.kind == GEOMETRIC:
            return 1.0 - self._t(i)
        tail_inf = (1.0 - self._t(i)) if self.tail_rule == "geometric" else self.tail_value
        row = self._row(i)
        return min([tail_inf, *row])


def default_families() -> tuple[WeightFamily, CoefficientFamily]:
    """The concrete defaults: a_n(k) = (n+1)(k+1)^2, c = 1 - 2^-(k+1), kappa = 2."""
    return WeightFamily(), CoefficientFamily()


def tail_inv_weight(w: WeightFamily, n: int, k0: int) -> float:
    """Rigorous upper bound for sum_{k >= k0} 1/a_n(k).

    For a power tail this is first term plus integral comparison; the constant
    tail rule is non-summable and raises.
    """
    if w.kind == TABULATED:
        if w.tail_rule == "constant":
            raise HypothesisViolation("declared constant weight tail makes s(n) divergent")
        row = w.table[n] if n < len(w.table) else ()
        head = sum(1.0 / row[k] for k in range(k0, len(row)))
        k_cont = max(k0, len(row))
        return head + _power_tail(w, n, k_cont)
    if not w.summable():
        raise HypothesisViolation("weight family with q <= 1 has divergent s(n)")
    return _power_tail(w, n, k0)


def _power_tail(w: WeightFamily, n: int, k0: int) -> float:
    # sum_{k>=k0} (k+1)^-q  <=  (k0+1)^-q + (k0+1)^(1-q)/(q-1)
    scale = 1.0 / (w.lam * (n + 1) ** w.p)
    if w.q <= 1:
        raise HypothesisViolation("weight family with q <= 1 has divergent s(n)")
    x = float(k0 + 1)
    return scale * (x ** (-w.q) + x ** (1.0 - w.q) / (w.q - 1.0))


def sup_inv_weight(w: WeightFamily, n: int, k0: int) -> float:
    """Upper bound for sup_{k >= k0} 1/a_n(k) (no monotonicity assumed)."""
    if w.kind == POWER:
        return 1.0 / w.a(n, k0)
    row = w.table[n] if n < len(w.table) else ()
    cands = [1.0 / row[k] for k in range(k0, len(row))]
    k_cont = max(k0, len(row))
    if w.tail_rule == "power":
        cands.append(1.0 / (w.lam * (n + 1) ** w.p * (k_cont + 1) ** w.q))
    else:
        cands.append(1.0 / w.tail_value)
    return max(cands)


def eval_s(w: WeightFamily, n: int, tol: float = 1e-12) -> SeriesValue:
    """s(n) = sum_k 1/a_n(k), closed form for the power family.

    Raises HypothesisViolation when the declared tail rule is divergent.
    """
    if w.kind == POWER:
        if not w.summable():
            raise HypothesisViolation("s(n) diverges: radial exponent q must exceed 1")
        value = float(zeta(w.q)) / (w.lam * (n + 1) ** w.p)
        return SeriesValue(value=value, k_trunc=0, tail=0.0)
    if w.tail_rule == "constant":
        raise HypothesisViolation("declared constant weight tail makes s(n) divergent")
    if not w.summable():
        raise HypothesisViolation("s(n) diverges: tail exponent q must exceed 1")
    row = w.table[n] if n < len(w.table) else ()
    head = sum(1.0 / v for v in row)
    k_cont = len(row)
    # Hurwitz zeta gives the power continuation exactly.
    cont = float(zeta(w.q, k_cont + 1)) / (w.lam * (n + 1) ** w.p)
    value = head + cont
    return SeriesValue(value=value, k_trunc=k_cont, tail=min(tol, 1e-15 * abs(value)))


def eval_J(c: CoefficientFamily, i: int, n: int, tol: float = 1e-12) -> SeriesValue:
    """J_i(n) = prod_k c_{i,n}(k), via summed logarithms with a certified tail."""
    if i not in (1, 2):
        raise ValueError("coefficient index must be 1 or 2")
    if c.kind == UNIT:
        return SeriesValue(value=1.0, k_trunc=0, tail=0.0)

    def log_tail(k0: int) -> float:
        # |log(1-x)| <= x/(1-x); geometric gaps give a geometric majorant.
        if c.kind == GEOMETRIC or (c.kind == TABULATED and c.tail_rule == "geometric"):
            t = c._t(i)
            return t ** (k0 + 1) / ((1.0 - t) * (1.0 - t ** (k0 + 1)))
        if c.tail_value >= 1.0:
            return 0.0
        raise HypothesisViolation(
            "coefficient product collapses to zero under a constant tail below 1"
        )

    k_hi = 64
    while True:
        ks = np.arange(k_hi)
        vals = np.asarray(c.c(i, n, ks), dtype=float)
        if np.any(vals <= 0):
            raise HypothesisViolation("coefficients must stay positive")
        log_sum = float(np.sum(np.log(vals)))
        t_log = log_tail(k_hi - 1 + 1)
        if t_log < tol or k_hi >= 1 << 20:
            break
        k_hi *= 2
    value = math.exp(log_sum)
    if value < COLLAPSE_FLOOR:
        raise HypothesisViolation("coefficient product collapsed to zero")
    return SeriesValue(value=value, k_trunc=k_hi, tail=value * math.expm1(t_log))


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    witness: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...] = field(default_factory=tuple)

    @property
    def all_passed(self) -> bool:
        return all(ch.passed for ch in self.checks)

    def failed(self) -> list[CheckResult]:
        return [ch for ch in self.checks if not ch.passed]

    def as_dict(self) -> dict:
        return {
            "all_passed": self.all_passed,
            "checks": [
                {"name": ch.name, "passed": ch.passed, "witness": ch.witness}
                for ch in self.checks
            ],
        }


def validate_hypotheses(
    w: WeightFamily,
    c: CoefficientFamily,
    n_probe: tuple[int, ...] = (0, 1, 2, 4, 8, 16),
    k_probe: int = 64,
    tol: float = 1e-12,
) -> ValidationReport:
    """Check every standing hypothesis on a probe grid; failures become report rows."""
    checks: list[CheckResult] = []
    ks = np.arange(k_probe)

    pos_ok, pos_wit = True, "a_n(k) > 0 on probe grid"
    for n in n_probe:
        a_vals = np.asarray(w.a(n, ks), dtype=float)
        if not np.all(a_vals > 0):
            pos_ok, pos_wit = False, f"nonpositive weight at n={n}"
            break
    checks.append(CheckResult("weight_positivity", pos_ok, pos_wit))

    try:
        s_vals = [eval_s(w, n, tol) for n in n_probe]
        checks.append(
            CheckResult(
                "s_summable",
                True,
                f"s(n) finite; s({n_probe[0]})={s_vals[0].value:.6g}",
            )
        )
        dec_ok = all(
            s_vals[j + 1].upper < s_vals[j].lower + 1e-15 * s_vals[j].value
            for j in range(len(s_vals) - 1)
        )
        van_ok = s_vals[-1].upper < s_vals[0].value
        checks.append(
            CheckResult(
                "s_decreasing_to_zero",
                dec_ok and van_ok,
                f"s({n_probe[-1]})={s_vals[-1].value:.6g} vs s({n_probe[0]})={s_vals[0].value:.6g}",
            )
        )
    except HypothesisViolation as exc:
        checks.append(CheckResult("s_summable", False, str(exc)))
        checks.append(CheckResult("s_decreasing_to_zero", False, "s(n) not summable"))

    checks.append(
        CheckResult(
            "kappa_at_least_one",
            c.kappa >= 1.0,
            f"kappa={c.kappa}",
        )
    )
    brk_ok, brk_wit = True, ""
    for i in (1, 2):
        lo = c.inf_c(i)
        c_vals = np.asarray(c.c(i, 0, ks), dtype=float)
        hi = float(np.max(c_vals)) if c_vals.size else 1.0
        if lo < 1.0 / c.kappa - 1e-15 or hi > 1.0 + 1e-15:
            brk_ok = False
            brk_wit = f"c_{i}: inf={lo:.6g} vs 1/kappa={1.0 / c.kappa:.6g}, sup={hi:.6g}"
            break
        brk_wit = f"inf c >= 1/kappa={1.0 / c.kappa:.6g} and c <= 1 certified"
    checks.append(CheckResult("kappa_bracketing", brk_ok, brk_wit))

    for i in (1, 2):
        try:
            j_val = eval_J(c, i, 0, tol)
            ok = j_val.lower > 0
            wit = f"J_{i}={j_val.value:.10g} (tail {j_val.tail:.2g})"
        except HypothesisViolation as exc:
            ok, wit = False, str(exc)
        checks.append(CheckResult(f"product_J{i}_nonzero", ok, wit))

    return ValidationReport(checks=tuple(checks))
