"""Per-mode 2x2 transfer matrices and their ordered products.

Each mode (m, n) carries one step matrix A_{m,n}(k+1) and one propagation
matrix C_{m,n}(k); kernel solutions of the mode system evolve by
h(k+1) = C_{m,n}(k) h(k).  Products are ordered right-to-left,
P(k) = C(k-1) ... C(0), and converge because sum_k ||C(k) - I||_1 is finite.
This module builds the matrices, their partial products, a certified tail
bound for the product remainder, and the structural checks on the limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .families import (
    CoefficientFamily,
    HypothesisViolation,
    WeightFamily,
    eval_J,
    sup_inv_weight,
    tail_inv_weight,
)

DET_FLOOR = 1e-300


class SingularMatrixError(ValueError):
    """A 2x2 inverse was requested below the determinant floor."""


class ConvergenceError(RuntimeError):
    """A product tail bound could not be pushed under tolerance."""


@dataclass(frozen=True)
class ModeIndex:
    """Angular mode m (any integer) and radial level n >= 0."""

    m: int
    n: int

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("radial level n must be >= 0")


def build_A(mode: ModeIndex, k: int, w: WeightFamily, c: CoefficientFamily) -> np.ndarray:
    """Step matrix with rows scaled by a_{n+1}(k) c_1(k) and a_n(k+1)."""
    m, n = mode.m, mode.n
    return np.array(
        [
            [w.a(n + 1, k) * c.c(1, n, k), 0.0],
            [float(m), w.a(n, k + 1)],
        ]
    )


def build_C(mode: ModeIndex, k: int, w: WeightFamily, c: CoefficientFamily) -> np.ndarray:
    """One-step propagation matrix; det C = c_2(k)/c_1(k)."""
    m, n = mode.m, mode.n
    c1 = c.c(1, n, k)
    c2 = c.c(2, n, k)
    an1 = w.a(n + 1, k)
    an_next = w.a(n, k + 1)
    return np.array(
        [
            [1.0 / c1, -m / (an1 * c1)],
            [-m / (an_next * c1), c2 + m * m / (an_next * an1 * c1)],
        ]
    )


def build_C_range(
    mode: ModeIndex, w: WeightFamily, c: CoefficientFamily, k_hi: int
) -> np.ndarray:
    """All C_{m,n}(k) for 0 <= k < k_hi as a (k_hi, 2, 2) array."""
    m, n = mode.m, mode.n
    ks = np.arange(k_hi)
    c1 = np.asarray(c.c(1, n, ks), dtype=float)
    c2 = np.asarray(c.c(2, n, ks), dtype=float)
    an1 = np.asarray(w.a(n + 1, ks), dtype=float)
    an_next = np.asarray(w.a(n, ks + 1), dtype=float)
    out = np.empty((k_hi, 2, 2))
    out[:, 0, 0] = 1.0 / c1
    out[:, 0, 1] = -m / (an1 * c1)
    out[:, 1, 0] = -m / (an_next * c1)
    out[:, 1, 1] = c2 + m * m / (an_next * an1 * c1)
    return out


def det2(mat: np.ndarray) -> float:
    return float(mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0])


def invert(mat: np.ndarray, floor: float = DET_FLOOR) -> np.ndarray:
    """Adjugate-over-determinant inverse with an underflow guard."""
    d = det2(mat)
    if abs(d) < floor:
        raise SingularMatrixError(f"determinant {d:.3g} below floor {floor:.3g}")
    return np.array([[mat[1, 1], -mat[0, 1]], [-mat[1, 0], mat[0, 0]]]) / d


def mat_abs_norm(mat: np.ndarray) -> float:
    """Entrywise absolute-sum norm, the norm the convergence certificate uses."""
    return float(np.sum(np.abs(mat)))


def partial_products(c_arr: np.ndarray) -> np.ndarray:
    """P(0)=I and P(k+1) = C(k) P(k) for a stack of C matrices."""
    k_hi = c_arr.shape[0]
    out = np.empty((k_hi + 1, 2, 2))
    out[0] = np.eye(2)
    for k in range(k_hi):
        out[k + 1] = c_arr[k] @ out[k]
    return out


def tail_sum_C_minus_I(
    mode: ModeIndex, w: WeightFamily, c: CoefficientFamily, k0: int
) -> float:
    """Rigorous upper bound for sum_{k >= k0} ||C_{m,n}(k) - I||_1."""
    m, n = mode.m, mode.n
    kappa = c.kappa

    def gap_tail(i: int, one_over: bool) -> float:
        if c.kind == "unit":
            return 0.0
        if c.kind == "geometric-gap" or (c.kind == "tabulated" and c.tail_rule == "geometric"):
            t = c._t(i)
            head = 0.0
            k_cont = k0
            if c.kind == "tabulated":
                row = c._row(i)
                for k in range(k0, len(row)):
                    gap = 1.0 / row[k] - 1.0 if one_over else 1.0 - row[k]
                    head += gap
                k_cont = max(k0, len(row))
            geo = t ** (k_cont + 1) / (1.0 - t)
            if one_over:
                # 1/c - 1 = t^{k+1}/(1 - t^{k+1}) <= t^{k+1}/(1-t)
                geo = geo / (1.0 - t)
            return head + geo
        # constant tabulated tail: gaps do not vanish
        gap = 1.0 / c.tail_value - 1.0 if one_over else 1.0 - c.tail_value
        if gap > 0:
            raise HypothesisViolation("constant coefficient tail keeps ||C - I|| bounded away from 0")
        return 0.0

    t1 = tail_inv_weight(w, n + 1, k0)           # sum 1/a_{n+1}(k)
    t2 = tail_inv_weight(w, n, k0 + 1)           # sum 1/a_n(k+1)
    sup_next = sup_inv_weight(w, n, k0 + 1)      # sup 1/a_n(k+1)
    bound = gap_tail(1, one_over=True) + gap_tail(2, one_over=False)
    bound += abs(m) * kappa * (t1 + t2)
    bound += m * m * kappa * sup_next * t1
    return bound


@dataclass(frozen=True)
class TransferProduct:
    """Partial products of one mode's C matrices with a convergence certificate.

    ``partials[k]`` is P(k) = C(k-1)...C(0); ``limit`` is the deepest partial
    computed and ``tail_bound`` bounds sum_{k >= k_trunc} ||C(k) - I||_1.
    """

    mode: ModeIndex
    k_trunc: int
    matrices: np.ndarray
    partials: np.ndarray
    tail_bound: float
    converged: bool

    @property
    def limit(self) -> np.ndarray:
        return self.partials[self.k_trunc]


def limit_product(
    mode: ModeIndex,
    w: WeightFamily,
    c: CoefficientFamily,
    tol: float = 1e-10,
    k_cap: int = 1 << 17,
    strict: bool = True,
) -> TransferProduct:
    """Grow the ordered product until the tail certificate drops under tol.

    The certificate decays like 1/K for m != 0, so tight tolerances can be
    unreachable; with strict=True that raises ConvergenceError, otherwise the
    product is returned with the achieved tail bound recorded.
    """
    k_hi = 64
    while True:
        tail = tail_sum_C_minus_I(mode, w, c, k_hi)
        if tail < tol or k_hi >= k_cap:
            break
        k_hi = min(2 * k_hi, k_cap)
    converged = tail < tol
    if strict and not converged:
        raise ConvergenceError(
            f"tail bound {tail:.3g} at K={k_hi} above tol {tol:.3g} for mode {mode}"
        )
    c_arr = build_C_range(mode, w, c, k_hi)
    parts = partial_products(c_arr)
    if abs(det2(parts[k_hi])) < DET_FLOOR:
        raise SingularMatrixError("limit product determinant underflowed")
    return TransferProduct(
        mode=mode,
        k_trunc=k_hi,
        matrices=c_arr,
        partials=parts,
        tail_bound=tail,
        converged=converged,
    )


@dataclass(frozen=True)
class StructureReport:
    mode: ModeIndex
    checks: tuple
    details: dict

    @property
    def all_passed(self) -> bool:
        return all(ch.passed for ch in self.checks)


def structure_check(
    tp: TransferProduct,
    w: WeightFamily,
    c: CoefficientFamily,
    slack: float = 1e-12,
) -> StructureReport:
    """Verify the sign/ordering structure of the (truncated) limit product.

    For m != 0 the diagonal entries dominate the bare coefficient products,
    the off-diagonal entries carry sign -sgn(m), and the determinant equals
    the scalar product of c_2/c_1 (J_2/J_1 in the limit, up to the certified
    tail).
    """
    from .families import CheckResult

    mode = tp.mode
    m, n = mode.m, mode.n
    K = tp.k_trunc
    lim = tp.limit
    ks = np.arange(K)
    c1 = np.asarray(c.c(1, n, ks), dtype=float)
    c2 = np.asarray(c.c(2, n, ks), dtype=float)
    prod_inv_c1 = float(np.prod(1.0 / c1))
    prod_c2 = float(np.prod(c2))
    checks = []

    if m == 0:
        off_ok = lim[0, 1] == 0.0 and lim[1, 0] == 0.0
        checks.append(CheckResult("offdiag_zero", off_ok, f"off-diagonals {lim[0,1]}, {lim[1,0]}"))
    else:
        sgn = -1.0 if m > 0 else 1.0
        f0 = lim[0, 0] - prod_inv_c1
        f3 = lim[1, 1] - prod_c2
        checks.append(
            CheckResult(
                "diag_entry_1_dominates",
                f0 >= -slack * abs(lim[0, 0]),
                f"entry(1,1) - prod 1/c1 = {f0:.6g}",
            )
        )
        checks.append(
            CheckResult(
                "diag_entry_2_dominates",
                f3 >= -slack * abs(lim[1, 1]),
                f"entry(2,2) - prod c2 = {f3:.6g}",
            )
        )
        sign_ok = (sgn * lim[0, 1] > 0) and (sgn * lim[1, 0] > 0)
        checks.append(
            CheckResult(
                "offdiag_sign_opposite_m",
                sign_ok,
                f"off-diagonals {lim[0,1]:.6g}, {lim[1,0]:.6g} for m={m}",
            )
        )

    det_part = det2(tp.partials[K])
    det_scalar = float(np.prod(c2 / c1))
    scale = max(abs(det_part), abs(det_scalar))
    det_ok = abs(det_part - det_scalar) <= (K * 1e-14 + slack) * scale
    checks.append(
        CheckResult(
            "det_tracks_scalar_product",
            det_ok,
            f"det P(K)={det_part:.12g} vs prod c2/c1={det_scalar:.12g}",
        )
    )

    j1 = eval_J(c, 1, n)
    j2 = eval_J(c, 2, n)
    det_lim = j2.value / j1.value
    lim_ok = abs(det_part - det_lim) <= scale * (tp.tail_bound * 4.0 + j1.tail + j2.tail + slack)
    checks.append(
        CheckResult(
            "det_limit_matches_J_ratio",
            lim_ok,
            f"det={det_part:.12g} vs J2/J1={det_lim:.12g} (tail {tp.tail_bound:.2g})",
        )
    )
    details = {
        "limit": lim.tolist(),
        "prod_inv_c1": prod_inv_c1,
        "prod_c2": prod_c2,
        "tail_bound": tp.tail_bound,
    }
    return StructureReport(mode=mode, checks=tuple(checks), details=details)
