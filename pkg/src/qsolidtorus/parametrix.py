"""The per-mode difference operator, its boundary condition and explicit inverse.

One mode (m, n) of the full operator acts on pairs h = (x, y) of weighted
sequences (x at level n, y at level n+1) through

    (A h)(k) = A_{m,n}(k+1) [h(k+1) - C_{m,n}(k) h(k)],   k = 0 .. K-1,

together with the initial regularity datum  a_n(0) y(0) + m x(0) = q0  and the
boundary requirement that h be proportional to the K function at the far end.
The inverse is assembled from the I/K kernel tables by variation of constants;
in expanded form it is a sum of upper-tail (X-type), lower-triangle (Y-type)
and, on the diagonal mode m = 0, cumulative (Z-type) kernel operators.

An independent dense linear solver over the same truncated system serves as
the oracle for every identity the explicit formulas are supposed to satisfy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .families import CoefficientFamily, WeightFamily
from .solutions import BoundaryData, KernelSolution, scalar_det_prefix
from .transfer import ModeIndex, build_C_range, invert


class WeightTagMismatch(ValueError):
    """An operator was fed a sequence living in the wrong weighted space."""


@dataclass(frozen=True)
class WeightedSeq:
    """A finite sequence tagged with the level n whose weights norm it."""

    values: np.ndarray
    level: int

    def norm(self, w: WeightFamily) -> float:
        ks = np.arange(len(self.values))
        a = np.asarray(w.a(self.level, ks), dtype=float)
        return float(np.sqrt(np.sum(self.values**2 / a)))


@dataclass(frozen=True)
class RhsPair:
    """Right-hand side of one mode system.

    r1(k) feeds the first block row (level n+1), r2(k) the second (level n),
    and q0 is the scalar datum of the initial regularity row.
    """

    r1: WeightedSeq
    r2: WeightedSeq
    q0: float

    def norm(self, w: WeightFamily) -> float:
        n = self.r2.level
        return float(
            np.sqrt(
                self.r1.norm(w) ** 2
                + self.r2.norm(w) ** 2
                + self.q0**2 / w.a(n, 0)
            )
        )


@dataclass(frozen=True)
class ParametrixResult:
    """Solution pair plus the boundary bookkeeping of one inverse application."""

    h_g: WeightedSeq
    h_f: WeightedSeq
    beta: float
    boundary_residual: float
    boundary_tol: float
    e1: np.ndarray
    e2: np.ndarray

    def norm(self, w: WeightFamily) -> float:
        return float(np.sqrt(self.h_g.norm(w) ** 2 + self.h_f.norm(w) ** 2))


def zero_rhs(mode: ModeIndex, k_max: int) -> RhsPair:
    return RhsPair(
        r1=WeightedSeq(np.zeros(k_max), mode.n + 1),
        r2=WeightedSeq(np.zeros(k_max), mode.n),
        q0=0.0,
    )


def random_rhs(mode: ModeIndex, k_max: int, rng: np.random.Generator) -> RhsPair:
    return RhsPair(
        r1=WeightedSeq(rng.standard_normal(k_max), mode.n + 1),
        r2=WeightedSeq(rng.standard_normal(k_max), mode.n),
        q0=float(rng.standard_normal()),
    )


def apply_A(
    mode: ModeIndex,
    w: WeightFamily,
    c: CoefficientFamily,
    h_g: WeightedSeq,
    h_f: WeightedSeq,
) -> RhsPair:
    """Apply the mode operator; the returned q0 is the initial regularity datum."""
    m, n = mode.m, mode.n
    if h_g.level != n or h_f.level != n + 1:
        raise WeightTagMismatch(f"expected levels ({n}, {n + 1})")
    x = h_g.values
    y = h_f.values
    K = len(x) - 1
    ks = np.arange(K)
    c1 = np.asarray(c.c(1, n, ks), dtype=float)
    c2 = np.asarray(c.c(2, n, ks), dtype=float)
    an1 = np.asarray(w.a(n + 1, ks), dtype=float)
    an_next = np.asarray(w.a(n, ks + 1), dtype=float)
    # rows of A(k+1) [h(k+1) - C(k) h(k)] written out componentwise
    r1 = m * y[:-1] - an1 * (x[:-1] - c1 * x[1:])
    r2 = an_next * (y[1:] - c2 * y[:-1]) + m * x[1:]
    q0_out = w.a(n, 0) * y[0] + m * x[0]
    return RhsPair(
        r1=WeightedSeq(r1, n + 1),
        r2=WeightedSeq(r2, n),
        q0=float(q0_out),
    )


def _channel_inputs(r: RhsPair, k_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Pack the rhs into the i-indexed kernel channels.

    Slot i = 0 is the initial-datum slot: the particular start vector
    (0, q0/a_n(0)) contributes q0 to the second channel and nothing to the
    first; slots i >= 1 carry the block-row data (r1(i-1), r2(i-1)).
    """
    w2 = np.zeros(k_max + 1)
    w1 = np.zeros(k_max + 1)
    n_fill = min(k_max, len(r.r1.values))
    w2[1 : n_fill + 1] = r.r1.values[:n_fill]
    w1[1 : n_fill + 1] = r.r2.values[:n_fill]
    w1[0] = r.q0
    return w2, w1


def _kernels(
    sol: KernelSolution, w: WeightFamily, c: CoefficientFamily, k_max: int
) -> dict[str, np.ndarray]:
    """Channel kernels of the expanded inverse, i = 0..k_max.

    The second-channel kernels carry a minus sign on the first solution
    component (it comes from pairing against the perp vector); the first
    channel uses the recurrence-reduced form with the shifted index i-1.
    """
    n = sol.mode.n
    I = sol.I[: k_max + 1]
    Kf = sol.K[: k_max + 1]
    an = np.asarray(w.a(n, np.arange(k_max + 1)), dtype=float)
    an1 = np.asarray(w.a(n + 1, np.arange(k_max + 1)), dtype=float)
    ratio = scalar_det_prefix(c, n, k_max)  # prod_{j<i} c2/c1
    R = 1.0 / ratio                         # prod_{j<i} c1/c2
    phi_K2 = np.zeros(k_max + 1)
    phi_K2[1:] = R[:-1] * Kf[:-1, 1] / an1[:-1]
    phi_K1 = -R * Kf[:, 0] / an
    phi_I2 = np.zeros(k_max + 1)
    phi_I2[1:] = R[:-1] * I[:-1, 1] / an1[:-1]
    phi_I1 = -R * I[:, 0] / an
    return {"K2": phi_K2, "K1": phi_K1, "I2": phi_I2, "I1": phi_I1}


def _suffix_sum(v: np.ndarray) -> np.ndarray:
    """out[k] = sum_{i > k} v(i), with out[-1] = 0."""
    out = np.zeros(len(v))
    out[:-1] = np.cumsum(v[::-1])[::-1][1:]
    return out


def apply_Q(
    mode: ModeIndex,
    w: WeightFamily,
    c: CoefficientFamily,
    sol: KernelSolution,
    r: RhsPair,
    k_max: int | None = None,
) -> ParametrixResult:
    """Explicit inverse of one mode system through the I/K kernel tables.

    ``k_max`` truncates the working window (defaults to the full table);
    entries of r beyond it are ignored.  The result satisfies the block rows,
    reproduces q0 exactly, and is proportional to the K table at the edge.
    """
    n = mode.n
    if r.r1.level != n + 1 or r.r2.level != n:
        raise WeightTagMismatch(f"rhs levels must be ({n + 1}, {n})")
    k_max = sol.k_table if k_max is None else k_max
    if k_max > sol.k_table:
        raise ValueError("k_max exceeds the kernel solution table")
    w2, w1 = _channel_inputs(r, k_max)
    ker = _kernels(sol, w, c, k_max)
    x_terms = ker["K2"] * w2 + ker["K1"] * w1
    y_terms = ker["I2"] * w2 + ker["I1"] * w1
    e1 = _suffix_sum(x_terms) / sol.tau
    e2 = np.cumsum(y_terms) / sol.tau
    I = sol.I[: k_max + 1]
    Kf = sol.K[: k_max + 1]
    h_x = e1 * I[:, 0] + e2 * Kf[:, 0]
    h_y = e1 * I[:, 1] + e2 * Kf[:, 1]

    k1_inf, k2_inf = sol.K_inf
    residual = abs(h_x[-1] * k2_inf - h_y[-1] * k1_inf)
    drift = np.hypot(Kf[-1, 0] - k1_inf, Kf[-1, 1] - k2_inf)
    kn = np.hypot(k1_inf, k2_inf)
    tol = (
        abs(e2[-1]) * drift * kn
        + abs(e1[-1]) * float(np.max(np.abs(I[-1]))) * kn
        + 1e-12 * float(np.hypot(h_x[-1], h_y[-1])) * kn
        + 1e-300
    )
    return ParametrixResult(
        h_g=WeightedSeq(h_x, n),
        h_f=WeightedSeq(h_y, n + 1),
        beta=float(e2[-1]),
        boundary_residual=float(residual),
        boundary_tol=float(tol),
        e1=e1,
        e2=e2,
    )


def apply_XYZ(
    kind: str,
    alpha: int,
    beta: int,
    mode: ModeIndex,
    sol: KernelSolution,
    w: WeightFamily,
    c: CoefficientFamily,
    r: WeightedSeq,
) -> WeightedSeq:
    """The kernel integral operators in their expanded form.

    X sums the upper tail i > k against K-components, Y the lower triangle
    i <= k against I-components, both with the scalar prefix products of
    c1/c2; Z (m = 0 only) is the cumulative c2-product kernel.  Input tags
    must match a_{n-1+beta} for X/Y and a_n for Z.
    """
    n = mode.n
    vals = np.asarray(r.values, dtype=float)
    k_max = len(vals) - 1
    if kind == "Z":
        if r.level != n:
            raise WeightTagMismatch("Z input must live at level n")
        an = np.asarray(w.a(n, np.arange(k_max + 1)), dtype=float)
        c2 = np.asarray(c.c(2, n, np.arange(k_max)), dtype=float)
        out = np.empty(k_max + 1)
        acc = 0.0
        for k in range(k_max + 1):
            if k > 0:
                acc *= c2[k - 1]
            acc += vals[k] / an[k]
            out[k] = acc
        return WeightedSeq(out, n + 1)

    if kind not in ("X", "Y") or alpha not in (1, 2) or beta not in (1, 2):
        raise ValueError("kind must be X/Y/Z with alpha, beta in {1, 2}")
    if r.level != n - 1 + beta:
        raise WeightTagMismatch(f"{kind}^{alpha}{beta} input must live at level {n - 1 + beta}")
    if k_max > sol.k_table:
        raise ValueError("input longer than the kernel solution table")
    R = 1.0 / scalar_det_prefix(c, n, k_max)
    a_in = np.asarray(w.a(n - 1 + beta, np.arange(k_max + 1)), dtype=float)
    H = sol.K if kind == "X" else sol.I
    outer = (sol.I if kind == "X" else sol.K)[: k_max + 1, alpha - 1]
    phi = np.zeros(k_max + 1)
    if beta == 2:
        # kernel H2(i-1)/a_{n+1}(i-1) with prefix prod_{j<=i-2}; empty at i=0
        phi[1:] = R[:-1] * H[:k_max, 1] / a_in[:-1]
    else:
        phi = R * H[: k_max + 1, 0] / a_in
    terms = phi * vals
    inner = _suffix_sum(terms) if kind == "X" else np.cumsum(terms)
    return WeightedSeq(outer * inner, n - 1 + alpha)


def apply_Q_direct(
    mode: ModeIndex,
    w: WeightFamily,
    c: CoefficientFamily,
    sol: KernelSolution,
    r: RhsPair,
    k_max: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Variation-of-constants form of the inverse (testing path, small k only).

    h(k) = P(k) sum_{i<=k} P(i)^-1 v(i) + alpha I(k) with v(0) the particular
    start vector and alpha fixed by the boundary pairing against K(0)^perp.
    """
    from .transfer import partial_products

    n = mode.n
    k_max = sol.k_table if k_max is None else k_max
    c_arr = build_C_range(mode, w, c, k_max)
    parts = partial_products(c_arr)
    v = np.zeros((k_max + 1, 2))
    v[0] = (0.0, r.q0 / w.a(n, 0))
    ks = np.arange(k_max)
    a_row1 = np.asarray(w.a(n + 1, ks), dtype=float) * np.asarray(
        c.c(1, n, ks), dtype=float
    )
    a_row2 = np.asarray(w.a(n, ks + 1), dtype=float)
    n_fill = min(k_max, len(r.r1.values))
    for i in range(1, n_fill + 1):
        rho = np.array([r.r1.values[i - 1], r.r2.values[i - 1]])
        # A(i)^-1 for the lower-triangular step matrix, written out
        x = rho[0] / a_row1[i - 1]
        v[i] = (x, (rho[1] - mode.m * x) / a_row2[i - 1])
    s = np.zeros((k_max + 1, 2))
    acc = np.zeros(2)
    for i in range(k_max + 1):
        acc = acc + invert(parts[i]) @ v[i]
        s[i] = acc
    k0_perp = np.array([sol.K[0, 1], -sol.K[0, 0]])
    alpha = float(acc @ k0_perp) / sol.tau
    h = np.empty((k_max + 1, 2))
    for k in range(k_max + 1):
        h[k] = parts[k] @ s[k] + alpha * sol.I[k]
    return h[:, 0], h[:, 1]


def oracle_matrix(
    mode: ModeIndex,
    w: WeightFamily,
    c: CoefficientFamily,
    k_max: int,
    boundary_vec: tuple[float, float],
    drop_boundary: bool = False,
) -> np.ndarray:
    """Dense matrix of the truncated constrained system.

    Unknowns are ordered [x(0), y(0), x(1), y(1), ...]; rows are the 2*k_max
    block equations, the initial regularity row, and (unless dropped) the
    boundary row at the truncation edge.
    """
    m, n = mode.m, mode.n
    size = 2 * (k_max + 1)
    n_rows = 2 * k_max + 1 + (0 if drop_boundary else 1)
    mat = np.zeros((n_rows, size))
    c_arr = build_C_range(mode, w, c, k_max)
    for k in range(k_max):
        A = np.array(
            [
                [w.a(n + 1, k) * c.c(1, n, k), 0.0],
                [float(m), w.a(n, k + 1)],
            ]
        )
        mat[2 * k : 2 * k + 2, 2 * (k + 1) : 2 * (k + 1) + 2] = A
        mat[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = -A @ c_arr[k]
    mat[2 * k_max, 0] = float(m)
    mat[2 * k_max, 1] = w.a(n, 0)
    if not drop_boundary:
        mat[2 * k_max + 1, 2 * k_max] = boundary_vec[1]
        mat[2 * k_max + 1, 2 * k_max + 1] = -boundary_vec[0]
    return mat


@dataclass(frozen=True)
class OracleSolution:
    h_g: WeightedSeq
    h_f: WeightedSeq
    sigma_min: float | None = None


def oracle_solve(
    mode: ModeIndex,
    w: WeightFamily,
    c: CoefficientFamily,
    r: RhsPair,
    bd: BoundaryData | None = None,
    sol: KernelSolution | None = None,
    k_max: int | None = None,
    with_sigma: bool = False,
) -> OracleSolution:
    """Direct dense solve of the truncated constrained system.

    The boundary row uses the K table's value at the truncation edge when a
    kernel solution is supplied (identical to the rule values when the seed
    sits there), otherwise the rule values from ``bd``.
    """
    n = mode.n
    if k_max is None:
        k_max = len(r.r1.values) if sol is None else min(sol.k_table, len(r.r1.values))
    if sol is not None:
        bvec = (float(sol.K[k_max, 0]), float(sol.K[k_max, 1]))
    elif bd is not None:
        bvec = bd.K_inf
    else:
        raise ValueError("need a kernel solution or boundary data for the boundary row")
    mat = oracle_matrix(mode, w, c, k_max, bvec)
    rhs = np.zeros(2 * (k_max + 1))
    n_fill = min(k_max, len(r.r1.values))
    rhs[0 : 2 * n_fill : 2] = r.r1.values[:n_fill]
    rhs[1 : 2 * n_fill + 1 : 2] = r.r2.values[:n_fill]
    rhs[2 * k_max] = r.q0
    hvec = scipy.linalg.solve(mat, rhs)
    sigma = None
    if with_sigma:
        sigma = float(np.linalg.svd(mat, compute_uv=False)[-1])
    return OracleSolution(
        h_g=WeightedSeq(hvec[0::2], n),
        h_f=WeightedSeq(hvec[1::2], n + 1),
        sigma_min=sigma,
    )


def boundary_residual(
    h_g: WeightedSeq | ParametrixResult, h_f: WeightedSeq | BoundaryData, bd: BoundaryData | None = None
) -> tuple[float, float]:
    """Residual of the edge proportionality to K(inf), plus the projected beta.

    Accepts either a (h_g, h_f, bd) triple of sequences or a
    (ParametrixResult, bd) pair.
    """
    if isinstance(h_g, ParametrixResult):
        result, bd = h_g, h_f
        h_g, h_f = result.h_g, result.h_f
    k1, k2 = bd.K_inf
    x_end = float(h_g.values[-1])
    y_end = float(h_f.values[-1])
    residual = abs(x_end * k2 - y_end * k1)
    beta = (x_end * k1 + y_end * k2) / (k1 * k1 + k2 * k2)
    return residual, beta
