"""Global assembly of the operator, its inverse, and algebra sanity checks.

A field is a finite collection of positive-sector Fourier data: for each mode
(m, n) a pair (g at level n, f at level n+1).  Applying the operator reduces,
mode by mode, to the 2x2 difference systems of the parametrix module; this is
implemented twice, once through the one-step matrices and once through the
raw one-step difference operators

    B_n h(k)    = a_n(k) (h(k) - c_{2,n}(k-1) h(k-1)),      h(-1) = 0,
    Bbar_n h(k) = a_{n+1}(k) (h(k) - c_{1,n}(k) h(k+1)),

composed with the angular multiplier m.  The two paths must agree exactly.

The truncated algebra representation realizes the generating isometry U and
unitary V on basis vectors e_{k,l} (0 <= k <= k_cut, |l| <= l_cut) and checks
the commutation relation, diagonal-function commutation, partial Fourier
coefficient extraction, and the trace functional inequality at finite size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .families import CheckResult, CoefficientFamily, WeightFamily
from .parametrix import ParametrixResult, RhsPair, WeightedSeq, apply_A, apply_Q
from .solutions import build_solution
from .transfer import ModeIndex

Mode = tuple[int, int]


class ModeError(RuntimeError):
    """A per-mode failure, annotated with the mode it occurred in."""


@dataclass
class FourierField:
    """Positive-sector field: (m, n) -> (g_{m,n}, f_{m,n+1}) value tables."""

    entries: dict[Mode, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def modes(self) -> list[Mode]:
        return sorted(self.entries)

    def copy_shape(self) -> "FourierField":
        return FourierField(
            {k: (np.zeros_like(g), np.zeros_like(f)) for k, (g, f) in self.entries.items()}
        )

    def to_json(self) -> list[dict]:
        return [
            {"m": m, "n": n, "g": g.tolist(), "f": f.tolist()}
            for (m, n), (g, f) in sorted(self.entries.items())
        ]

    @classmethod
    def from_json(cls, records: list[dict]) -> "FourierField":
        entries = {}
        for rec in records:
            entries[(int(rec["m"]), int(rec["n"]))] = (
                np.asarray(rec["g"], dtype=float),
                np.asarray(rec["f"], dtype=float),
            )
        return cls(entries)


def random_field(
    modes: list[Mode], k_max: int, rng: np.random.Generator
) -> FourierField:
    return FourierField(
        {
            (m, n): (rng.standard_normal(k_max + 1), rng.standard_normal(k_max + 1))
            for (m, n) in modes
        }
    )


def h0_norm(field: FourierField, w: WeightFamily) -> float:
    """Norm of the field: weighted sum of squares over all stored modes."""
    total = 0.0
    for (m, n), (g, f) in field.entries.items():
        ks_g = np.arange(len(g))
        ks_f = np.arange(len(f))
        total += float(np.sum(g**2 / np.asarray(w.a(n, ks_g), dtype=float)))
        total += float(np.sum(f**2 / np.asarray(w.a(n + 1, ks_f), dtype=float)))
    return float(np.sqrt(total))


def op_B(w: WeightFamily, c: CoefficientFamily, n: int, h: np.ndarray) -> np.ndarray:
    """B_n h(k) = a_n(k)(h(k) - c_{2,n}(k-1) h(k-1)), same length as h."""
    ks = np.arange(len(h))
    a = np.asarray(w.a(n, ks), dtype=float)
    out = a * h.astype(float)
    c2 = np.asarray(c.c(2, n, ks[:-1]), dtype=float)
    out[1:] -= a[1:] * c2 * h[:-1]
    return out


def op_Bbar(w: WeightFamily, c: CoefficientFamily, n: int, h: np.ndarray) -> np.ndarray:
    """Bbar_n h(k) = a_{n+1}(k)(h(k) - c_{1,n}(k) h(k+1)), one entry shorter."""
    ks = np.arange(len(h) - 1)
    a = np.asarray(w.a(n + 1, ks), dtype=float)
    c1 = np.asarray(c.c(1, n, ks), dtype=float)
    return a * (h[:-1] - c1 * h[1:])


def delta1_component(field: FourierField) -> FourierField:
    """The angular multiplier: each mode's data scaled by its m."""
    return FourierField(
        {(m, n): (m * g, m * f) for (m, n), (g, f) in field.entries.items()}
    )


def apply_D(
    field: FourierField,
    w: WeightFamily,
    c: CoefficientFamily,
    path: str = "matrix",
) -> dict[Mode, RhsPair]:
    """Apply the operator mode by mode; output q0 is the initial-row datum.

    path "matrix" routes through the one-step matrix operator; path "delta"
    composes the raw difference operators and the angular multiplier.  Both
    produce the same block data (p_{m,n+1}(k), -q_{m,n}(k+1)) and the datum
    a_n(0) f(0) + m g(0).
    """
    out: dict[Mode, RhsPair] = {}
    for (m, n), (g, f) in sorted(field.entries.items()):
        mode = ModeIndex(m, n)
        if path == "matrix":
            out[(m, n)] = apply_A(
                mode, w, c, WeightedSeq(g, n), WeightedSeq(f, n + 1)
            )
        elif path == "delta":
            p = m * f[:-1] - op_Bbar(w, c, n, g)
            q = -op_B(w, c, n, f) - m * g
            out[(m, n)] = RhsPair(
                r1=WeightedSeq(p, n + 1),
                r2=WeightedSeq(-q[1:], n),
                q0=float(-q[0]),
            )
        else:
            raise ValueError(f"unknown path {path!r}")
    return out


def apply_Q_global(
    rhs: dict[Mode, RhsPair],
    w: WeightFamily,
    c: CoefficientFamily,
    rule="default",
    k_max: int | None = None,
) -> tuple[FourierField, dict[Mode, ParametrixResult]]:
    """Per-mode inverse applied over a field, merged in (m, n) order."""
    entries: dict[Mode, tuple[np.ndarray, np.ndarray]] = {}
    results: dict[Mode, ParametrixResult] = {}
    for (m, n) in sorted(rhs):
        r = rhs[(m, n)]
        k_mode = len(r.r1.values) if k_max is None else k_max
        try:
            sol = build_solution(ModeIndex(m, n), w, c, k_mode, rule=rule)
            res = apply_Q(ModeIndex(m, n), w, c, sol, r, k_mode)
        except Exception as exc:
            raise ModeError(f"mode ({m}, {n}): {exc}") from exc
        entries[(m, n)] = (res.h_g.values, res.h_f.values)
        results[(m, n)] = res
    return FourierField(entries), results


# ---------------------------------------------------------------------------
# Truncated algebra representation


@dataclass
class TruncatedAlgebraRep:
    """Finite matrices for the generators on e_{k,l}, 0<=k<=k_cut, |l|<=l_cut.

    theta is the deformation parameter as a fraction of a full turn; U shifts
    k upward with the phase exp(-2 pi i l theta), V shifts l upward, and the
    two label operators are diagonal.
    """

    theta: float
    k_cut: int
    l_cut: int

    def __post_init__(self) -> None:
        k_dim = self.k_cut + 1
        l_dim = 2 * self.l_cut + 1
        self.dim = k_dim * l_dim
        self.U = np.zeros((self.dim, self.dim), dtype=complex)
        self.V = np.zeros((self.dim, self.dim), dtype=complex)
        self.Kdiag = np.zeros(self.dim)
        self.Ldiag = np.zeros(self.dim)
        # phases built from the single-step phasor keep the commutation
        # identity at the few-ulp level for irrational theta
        step = np.exp(-2j * np.pi * self.theta)
        phases = {0: 1.0 + 0.0j}
        for l in range(1, self.l_cut + 1):
            phases[l] = phases[l - 1] * step
            phases[-l] = phases[-(l - 1)] * np.conj(step)
        for k in range(k_dim):
            for l in range(-self.l_cut, self.l_cut + 1):
                col = self.idx(k, l)
                self.Kdiag[col] = k
                self.Ldiag[col] = l
                if k + 1 <= self.k_cut:
                    self.U[self.idx(k + 1, l), col] = phases[l]
                if l + 1 <= self.l_cut:
                    self.V[self.idx(k, l + 1), col] = 1.0

    def idx(self, k: int, l: int) -> int:
        return k * (2 * self.l_cut + 1) + (l + self.l_cut)

    def basis(self, k: int, l: int) -> np.ndarray:
        e = np.zeros(self.dim, dtype=complex)
        e[self.idx(k, l)] = 1.0
        return e

    def diag_fn(self, fn) -> np.ndarray:
        return np.diag(np.asarray([fn(int(k)) for k in self.Kdiag], dtype=complex))

    def trace_q0(self, x: np.ndarray) -> complex:
        """tr(x Q0) with Q0 the projection onto the l = 0 column."""
        return complex(
            sum(x[self.idx(k, 0), self.idx(k, 0)] for k in range(self.k_cut + 1))
        )

    def shift_power(self, op: np.ndarray, power: int) -> np.ndarray:
        """op**power, using the adjoint for negative powers."""
        base = op if power >= 0 else op.conj().T
        return np.linalg.matrix_power(base, abs(power))


def assemble_polynomial(
    rep: TruncatedAlgebraRep,
    plus: dict[Mode, np.ndarray],
    minus: dict[Mode, np.ndarray],
) -> np.ndarray:
    """Element with prescribed partial Fourier coefficients.

    plus[(m, n)] are the coefficients of V^m U^n f(K); minus[(m, n)] those of
    f(K) V^m (U^*)^n (n >= 1).  Coefficient arrays are per-k diagonals.
    """
    a = np.zeros((rep.dim, rep.dim), dtype=complex)
    for (m, n), coeff in plus.items():
        term = rep.shift_power(rep.V, m) @ np.linalg.matrix_power(rep.U, n) @ rep.diag_fn(
            lambda k: coeff[k] if k < len(coeff) else coeff[-1]
        )
        a += term
    for (m, n), coeff in minus.items():
        if n < 1:
            raise ValueError("lowering terms need n >= 1")
        term = rep.diag_fn(
            lambda k: coeff[k] if k < len(coeff) else coeff[-1]
        ) @ rep.shift_power(rep.V, m) @ np.linalg.matrix_power(rep.U.conj().T, n)
        a += term
    return a


def extract_plus(rep: TruncatedAlgebraRep, a: np.ndarray, m: int, n: int, k: int) -> complex:
    """f+_{m,n}(k) = <e_{k,0}, (U*)^n V^-m a e_{k,0}>."""
    probe = rep.shift_power(rep.V, m) @ np.linalg.matrix_power(rep.U, n) @ rep.basis(k, 0)
    return complex(np.vdot(probe, a @ rep.basis(k, 0)))


def extract_minus(rep: TruncatedAlgebraRep, a: np.ndarray, m: int, n: int, k: int) -> complex:
    """f-_{m,n}(k) = <e_{k,0}, a U^n V^-m e_{k,0}>."""
    probe = np.linalg.matrix_power(rep.U, n) @ rep.shift_power(rep.V, -m) @ rep.basis(k, 0)
    return complex(np.vdot(rep.basis(k, 0), a @ probe))


@dataclass(frozen=True)
class AlgebraReport:
    checks: tuple[CheckResult, ...]
    worst: dict

    @property
    def all_passed(self) -> bool:
        return all(ch.passed for ch in self.checks)

    def as_dict(self) -> dict:
        return {
            "all_passed": self.all_passed,
            "checks": [
                {"name": ch.name, "passed": ch.passed, "witness": ch.witness}
                for ch in self.checks
            ],
            "worst": self.worst,
        }


def algebra_sanity(
    rep: TruncatedAlgebraRep,
    rng: np.random.Generator | None = None,
    n_roundtrip: int = 5,
    n_trace: int = 25,
    tol_comm: float = 1e-15,
) -> AlgebraReport:
    """Finite-size checks of the generator relations and the trace functional.

    Shift truncation breaks the relations only on the edge rows/columns, so
    the commutation residual is measured on columns whose shifts stay inside
    the cutoffs; roundtrips use coefficients supported well inside.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    checks: list[CheckResult] = []
    worst: dict = {}

    lhs = rep.V @ rep.U
    rhs = np.exp(2j * np.pi * rep.theta) * (rep.U @ rep.V)
    resid = 0.0
    for k in range(rep.k_cut):
        for l in range(-rep.l_cut, rep.l_cut):
            col = rep.idx(k, l)
            row = rep.idx(k + 1, l + 1)
            resid = max(resid, abs(lhs[row, col] - rhs[row, col]))
    worst["commutation"] = resid
    checks.append(
        CheckResult("commutation_VU_phase_UV", resid <= tol_comm, f"residual {resid:.3g}")
    )

    f_diag = rep.diag_fn(lambda k: 1.0 / (1.0 + k))
    f_diag_shift = rep.diag_fn(lambda k: 1.0 / (2.0 + k))
    r1 = float(np.max(np.abs(f_diag @ rep.U - rep.U @ f_diag_shift)))
    r2 = float(np.max(np.abs(f_diag @ rep.V - rep.V @ f_diag)))
    worst["diag_commutation"] = max(r1, r2)
    checks.append(
        CheckResult(
            "diagonal_function_shifts",
            max(r1, r2) <= tol_comm,
            f"residuals {r1:.3g}, {r2:.3g}",
        )
    )

    deg = 3
    k_keep = rep.k_cut - 2 * deg
    worst_plus = 0.0
    worst_minus = 0.0
    ok_round = k_keep >= 1
    for _ in range(n_roundtrip):
        plus = {}
        minus = {}
        for _ in range(3):
            m = int(rng.integers(-deg, deg + 1))
            n_p = int(rng.integers(0, deg + 1))
            coeff = rng.standard_normal(k_keep)
            coeff[-1:] = coeff[-1]  # eventually constant by construction
            plus[(m, n_p)] = coeff
            n_m = int(rng.integers(1, deg + 1))
            minus[(m, n_m)] = rng.standard_normal(k_keep)
        a = assemble_polynomial(rep, plus, minus)
        for (m, n_p), coeff in plus.items():
            for k in range(min(3, k_keep)):
                got = extract_plus(rep, a, m, n_p, k)
                worst_plus = max(worst_plus, abs(got - coeff[k]))
                if got != coeff[k]:
                    ok_round = ok_round and abs(got - coeff[k]) == 0.0
        for (m, n_m), coeff in minus.items():
            for k in range(min(3, k_keep)):
                got = extract_minus(rep, a, m, n_m, k)
                rel = abs(got - coeff[k]) / max(abs(coeff[k]), 1e-300)
                worst_minus = max(worst_minus, rel)
    worst["roundtrip_plus"] = worst_plus
    worst["roundtrip_minus_rel"] = worst_minus
    checks.append(
        CheckResult(
            "fourier_roundtrip_plus_exact",
            worst_plus == 0.0,
            f"worst abs deviation {worst_plus:.3g}",
        )
    )
    checks.append(
        CheckResult(
            "fourier_roundtrip_minus_ulp",
            worst_minus <= 4e-15,
            f"worst rel deviation {worst_minus:.3g} (unit-phasor pair rounding)",
        )
    )

    pad = 1
    inner = [
        rep.idx(k, l)
        for k in range(pad, rep.k_cut - pad + 1)
        for l in range(-rep.l_cut + pad, rep.l_cut - pad + 1)
    ]
    worst_trace = -np.inf
    ok_trace = True
    for _ in range(n_trace):
        a = np.zeros((rep.dim, rep.dim), dtype=complex)
        b = np.zeros((rep.dim, rep.dim), dtype=complex)
        sub = rng.standard_normal((len(inner), len(inner))) + 1j * rng.standard_normal(
            (len(inner), len(inner))
        )
        a[np.ix_(inner, inner)] = sub
        sub = rng.standard_normal((len(inner), len(inner))) + 1j * rng.standard_normal(
            (len(inner), len(inner))
        )
        b[np.ix_(inner, inner)] = sub
        lhs_t = abs(rep.trace_q0(a @ b))
        rhs_t = float(np.linalg.norm(a, 2)) * float(
            np.sqrt(abs(rep.trace_q0(b.conj().T @ b)))
        )
        ok_trace = ok_trace and lhs_t <= rhs_t * (1.0 + 1e-12)
        worst_trace = max(worst_trace, lhs_t / rhs_t if rhs_t > 0 else 0.0)
    worst["trace_ratio"] = worst_trace
    checks.append(
        CheckResult(
            "trace_functional_bound",
            ok_trace,
            f"worst |tau(ab)| / (||a|| tau(b*b)^1/2) = {worst_trace:.6g}",
        )
    )
    return AlgebraReport(checks=tuple(checks), worst=worst)


def field_to_file(field: FourierField, path, meta: dict | None = None) -> None:
    payload = {"modes": field.to_json()}
    if meta:
        payload["meta"] = meta
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def field_from_file(path) -> FourierField:
    with open(path) as fh:
        payload = json.load(fh)
    return FourierField.from_json(payload["modes"])
