import json

import numpy as np
import pytest

from qsolidtorus.dirac import (
    FourierField,
    TruncatedAlgebraRep,
    algebra_sanity,
    apply_D,
    apply_Q_global,
    assemble_polynomial,
    delta1_component,
    extract_minus,
    extract_plus,
    field_from_file,
    field_to_file,
    h0_norm,
    random_field,
)
from qsolidtorus.parametrix import RhsPair

GOLDEN = (5**0.5 - 1) / 2


def impulse_field(m, n, k_g, k_f, k_max):
    g = np.zeros(k_max + 1)
    f = np.zeros(k_max + 1)
    g[k_g] = 1.0
    f[k_f] = 1.0
    return FourierField({(m, n): (g, f)})


def rhs_close(a: RhsPair, b: RhsPair, tol: float) -> bool:
    for x, y in ((a.r1.values, b.r1.values), (a.r2.values, b.r2.values)):
        scale = np.maximum(np.maximum(np.abs(x), np.abs(y)), 1.0)
        if np.max(np.abs(x - y) / scale) > tol:
            return False
    return abs(a.q0 - b.q0) <= tol * max(abs(a.q0), abs(b.q0), 1.0)


def test_apply_D_zero(families):
    w, c = families
    out = apply_D(FourierField({(1, 0): (np.zeros(8), np.zeros(8))}), w, c)
    r = out[(1, 0)]
    assert not np.any(r.r1.values) and not np.any(r.r2.values) and r.q0 == 0.0


def test_mode_equivalence_exact_on_impulses(families):
    w, c = families
    for (m, n) in ((0, 0), (1, 0), (-2, 1), (5, 3), (32, 0)):
        for k_imp in (0, 3, 9):
            field = impulse_field(m, n, k_imp, min(k_imp + 1, 12), 16)
            d_mat = apply_D(field, w, c, "matrix")[(m, n)]
            d_del = apply_D(field, w, c, "delta")[(m, n)]
            assert np.array_equal(d_mat.r1.values, d_del.r1.values)
            assert np.array_equal(d_mat.r2.values, d_del.r2.values)
            assert d_mat.q0 == d_del.q0


def test_mode_equivalence_random_fields(families, rng):
    w, c = families
    field = random_field([(2, 0), (-3, 2)], 24, rng)
    d_mat = apply_D(field, w, c, "matrix")
    d_del = apply_D(field, w, c, "delta")
    for key in d_mat:
        assert rhs_close(d_mat[key], d_del[key], 1e-13)


def test_delta1_component_multiplies_by_m(families):
    field = FourierField({(3, 1): (np.ones(5), np.ones(5)), (-2, 0): (np.ones(5), np.ones(5))})
    out = delta1_component(field)
    assert np.all(out.entries[(3, 1)][0] == 3.0)
    assert np.all(out.entries[(-2, 0)][1] == -2.0)


def test_h0_norm_basics(families, rng):
    w, _ = families
    assert h0_norm(FourierField({}), w) == 0.0
    single = FourierField({(0, 0): (np.array([1.0]), np.array([0.0]))})
    assert h0_norm(single, w) == 1.0  # a_0(0) = 1 for the default weights
    f1 = random_field([(1, 0)], 8, rng)
    f2 = random_field([(2, 3)], 8, rng)
    merged = FourierField({**f1.entries, **f2.entries})
    assert h0_norm(merged, w) == pytest.approx(
        float(np.hypot(h0_norm(f1, w), h0_norm(f2, w))), rel=1e-15
    )
    lam = 3.7
    scaled = FourierField({k: (lam * g, lam * f) for k, (g, f) in f1.entries.items()})
    assert h0_norm(scaled, w) == pytest.approx(lam * h0_norm(f1, w), rel=1e-14)


def test_global_right_inverse(families, rng):
    w, c = families
    field = random_field([(0, 0), (1, 0), (-2, 1), (4, 2)], 32, rng)
    rhs = apply_D(field, w, c)
    recovered, results = apply_Q_global(rhs, w, c)
    back = apply_D(recovered, w, c)
    for key in rhs:
        assert rhs_close(back[key], rhs[key], 1e-9)
    assert set(results) == set(rhs)


def test_global_left_inverse_on_domain(families, rng):
    w, c = families
    field = random_field([(1, 0), (-3, 1)], 32, rng)
    rhs = apply_D(field, w, c)
    domain_field, _ = apply_Q_global(rhs, w, c)
    rhs2 = apply_D(domain_field, w, c)
    again, _ = apply_Q_global(rhs2, w, c)
    for key in domain_field.entries:
        a = np.concatenate(domain_field.entries[key])
        b = np.concatenate(again.entries[key])
        assert np.max(np.abs(a - b)) <= 1e-8 * max(np.max(np.abs(a)), 1e-300)


def test_per_mode_errors_annotated(families, rng):
    from qsolidtorus.dirac import ModeError

    w, c = families
    field = random_field([(2, 0)], 8, rng)
    rhs = apply_D(field, w, c)

    def bad_rule(m):
        return (-0.2, 1.0) if m > 0 else ((0.2, 1.0) if m < 0 else (0.0, 1.0))

    with pytest.raises(ModeError, match=r"mode \(2, 0\)"):
        apply_Q_global(rhs, w, c, rule=bad_rule)


def test_field_json_roundtrip(families, rng, tmp_path):
    field = random_field([(1, 0), (-2, 3)], 4, rng)
    path = tmp_path / "field.json"
    field_to_file(field, path, meta={"seed": 1})
    back = field_from_file(path)
    assert set(back.entries) == set(field.entries)
    for key in field.entries:
        assert np.array_equal(back.entries[key][0], field.entries[key][0])
        assert np.array_equal(back.entries[key][1], field.entries[key][1])
    payload = json.loads(path.read_text())
    assert payload["meta"]["seed"] == 1


def test_algebra_commutes_at_theta_zero():
    rep = TruncatedAlgebraRep(0.0, 8, 4)
    assert np.max(np.abs(rep.V @ rep.U - rep.U @ rep.V)) == 0.0


@pytest.mark.parametrize("theta", [0.0, 0.25, GOLDEN])
def test_algebra_sanity_all_checks(theta):
    rep = TruncatedAlgebraRep(theta, 12, 6)
    report = algebra_sanity(rep, np.random.default_rng(2))
    assert report.all_passed, report.as_dict()
    assert report.worst["commutation"] <= 1e-15


def test_monomial_roundtrip_exact():
    rep = TruncatedAlgebraRep(GOLDEN, 10, 5)
    coeff = np.array([0.5, -1.25, 2.0, 2.0])
    a = assemble_polynomial(rep, {(1, 1): coeff}, {})
    for k in range(3):
        assert extract_plus(rep, a, 1, 1, k) == coeff[k]
        assert extract_plus(rep, a, 1, 2, k) == 0.0
        assert extract_minus(rep, a, 1, 1, k) == 0.0


def test_minus_coefficient_roundtrip_ulp():
    rep = TruncatedAlgebraRep(GOLDEN, 10, 5)
    coeff = np.array([1.0, 3.0, -2.0])
    a = assemble_polynomial(rep, {}, {(2, 2): coeff})
    for k in range(3):
        got = extract_minus(rep, a, 2, 2, k)
        assert got == pytest.approx(coeff[k], rel=4e-15)
