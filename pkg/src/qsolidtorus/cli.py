"""Experiment driver: validate hypotheses, solve mode systems, scan decay.

Exit codes: 0 success, 1 mathematical violation (a check or residual failed),
2 usage or configuration error.  Outputs are deterministic for a fixed config
and seed, apart from the generated_at field in each file's meta header.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import decay_scan, scan_to_files
from .config import ConfigError, ExperimentConfig, load_config
from .families import validate_hypotheses
from .parametrix import (
    RhsPair,
    WeightedSeq,
    apply_A,
    apply_Q,
    oracle_solve,
    random_rhs,
)
from .solutions import build_solution, verify_lemma_suite, wronskian_residuals
from .transfer import ModeIndex, limit_product

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


def _meta(cfg: ExperimentConfig, seed: int | None = None) -> dict:
    meta = {
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "k_max": cfg.k_max,
        "boundary_rule": cfg.boundary_name,
    }
    if seed is not None:
        meta["seed"] = seed
    return meta


def _np_default(obj):
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_np_default))


def _modes(cfg: ExperimentConfig, only_m: list[int] | None) -> list[tuple[int, int]]:
    ms = cfg.m_list if only_m is None else tuple(m for m in cfg.m_list if m in only_m)
    if only_m is not None and not ms:
        ms = tuple(only_m)
    return [(m, n) for m in ms for n in cfg.n_list]


def cmd_validate(cfg: ExperimentConfig, out_dir: Path) -> int:
    report = validate_hypotheses(cfg.weights, cfg.coeffs, n_probe=cfg.n_list)
    payload = report.as_dict()
    payload["meta"] = _meta(cfg)
    _write_json(out_dir / "validation.json", payload)
    for ch in report.checks:
        print(f"[{'pass' if ch.passed else 'FAIL'}] {ch.name}: {ch.witness}")
    return EXIT_OK if report.all_passed else EXIT_VIOLATION


def _load_rhs(path: Path, cfg: ExperimentConfig) -> dict[tuple[int, int], RhsPair]:
    data = json.loads(path.read_text())
    out = {}
    for rec in data["modes"]:
        m, n = int(rec["m"]), int(rec["n"])
        out[(m, n)] = RhsPair(
            r1=WeightedSeq(np.asarray(rec["r1"], dtype=float), n + 1),
            r2=WeightedSeq(np.asarray(rec["r2"], dtype=float), n),
            q0=float(rec["q0"]),
        )
    return out


def cmd_solve(
    cfg: ExperimentConfig,
    out_dir: Path,
    rhs_path: Path | None,
    seed: int,
    only_m: list[int] | None,
    k_max: int | None,
) -> int:
    k_max = cfg.k_max if k_max is None else k_max
    modes = _modes(cfg, only_m)
    if rhs_path is not None:
        rhs_map = _load_rhs(rhs_path, cfg)
        modes = sorted(rhs_map)
    else:
        rng = np.random.default_rng(seed)
        rhs_map = {
            (m, n): random_rhs(ModeIndex(m, n), k_max, rng) for (m, n) in sorted(modes)
        }
    records = []
    ok = True
    for (m, n) in sorted(rhs_map):
        mode = ModeIndex(m, n)
        r = rhs_map[(m, n)]
        try:
            sol = build_solution(mode, cfg.weights, cfg.coeffs, k_max, rule=cfg.boundary_rule)
            res = apply_Q(mode, cfg.weights, cfg.coeffs, sol, r, k_max)
            back = apply_A(mode, cfg.weights, cfg.coeffs, res.h_g, res.h_f)
            r_norm = r.norm(cfg.weights)
            diff = RhsPair(
                r1=WeightedSeq(back.r1.values - r.r1.values[:k_max], n + 1),
                r2=WeightedSeq(back.r2.values - r.r2.values[:k_max], n),
                q0=back.q0 - r.q0,
            )
            resid_inv = diff.norm(cfg.weights) / max(r_norm, 1e-300)
            orc = oracle_solve(mode, cfg.weights, cfg.coeffs, r, sol=sol, k_max=k_max)
            scale = max(res.norm(cfg.weights), 1e-300)
            d_orc = float(
                np.sqrt(
                    np.sum((orc.h_g.values - res.h_g.values) ** 2)
                    + np.sum((orc.h_f.values - res.h_f.values) ** 2)
                )
            ) / scale
            records.append(
                {
                    "m": m,
                    "n": n,
                    "residual_right_inverse": resid_inv,
                    "residual_oracle": d_orc,
                    "boundary_residual": res.boundary_residual,
                    "beta": res.beta,
                }
            )
            if resid_inv > cfg.tol_residual or d_orc > 10 * cfg.tol_residual:
                ok = False
        except Exception as exc:
            ok = False
            records.append({"m": m, "n": n, "error": f"mode ({m}, {n}): {exc}"})
            print(f"mode ({m}, {n}) failed: {exc}", file=sys.stderr)
    payload = {"meta": _meta(cfg, seed), "solutions": records}
    _write_json(out_dir / "solutions.json", payload)
    n_err = sum(1 for r in records if "error" in r)
    print(f"solved {len(records) - n_err}/{len(records)} modes; outputs in {out_dir}")
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_scan(
    cfg: ExperimentConfig, out_dir: Path, only_m: list[int] | None, k_max: int | None
) -> int:
    k_max = cfg.k_max if k_max is None else k_max
    ms = cfg.m_list if only_m is None else tuple(only_m)
    table = decay_scan(ms, cfg.n_list, cfg.weights, cfg.coeffs, k_max, rule=cfg.boundary_rule)
    scan_to_files(table, out_dir, cfg.formats, meta=_meta(cfg))
    lemma_rows = []
    ok = table.all_passed
    first_bad = None
    for m in ms:
        if m == 0:
            continue
        for n in cfg.n_list:
            sol = build_solution(ModeIndex(m, n), cfg.weights, cfg.coeffs, k_max, rule=cfg.boundary_rule)
            rep = verify_lemma_suite(sol, cfg.weights, cfg.coeffs)
            wr = float(np.max(wronskian_residuals(sol, cfg.coeffs)))
            lemma_rows.append(
                {
                    "m": m,
                    "n": n,
                    "all_passed": rep.all_passed,
                    "worst_slack": rep.worst_slack,
                    "wronskian_worst": wr,
                    "flagged": list(rep.flagged),
                    "failures": [ch.name for ch in rep.checks if not ch.passed],
                }
            )
            if not rep.all_passed and first_bad is None:
                first_bad = (m, n, [ch.name for ch in rep.checks if not ch.passed])
                ok = False
    _write_json(out_dir / "lemma_summary.json", {"meta": _meta(cfg), "modes": lemma_rows})
    for ch in table.envelope_checks:
        print(f"[{'pass' if ch.passed else 'FAIL'}] {ch.name}: {ch.witness}")
    n_bounds = sum(1 for r in table.rows if not r.all_bounds_hold)
    print(f"scan: {len(table.rows)} modes, {n_bounds} bound violations")
    if first_bad is not None:
        print(f"first inequality counterexample at mode {first_bad[:2]}: {first_bad[2]}")
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_dump(
    cfg: ExperimentConfig,
    out_dir: Path,
    what: str,
    only_m: list[int] | None,
    k_max: int | None,
) -> int:
    k_max = cfg.k_max if k_max is None else k_max
    modes = _modes(cfg, only_m)
    rows = []
    for (m, n) in modes:
        mode = ModeIndex(m, n)
        if what == "transfer":
            tp = limit_product(mode, cfg.weights, cfg.coeffs, tol=cfg.tol_prod, k_cap=max(4 * k_max, 512), strict=False)
            for k in range(min(k_max, tp.k_trunc)):
                rows.append(
                    {
                        "m": m,
                        "n": n,
                        "k": k,
                        "C": tp.matrices[k].ravel().tolist(),
                        "P": tp.partials[k].ravel().tolist(),
                    }
                )
        elif what == "solution":
            sol = build_solution(mode, cfg.weights, cfg.coeffs, k_max, rule=cfg.boundary_rule)
            wres = wronskian_residuals(sol, cfg.coeffs)
            for k in range(k_max + 1):
                rows.append(
                    {
                        "m": m,
                        "n": n,
                        "k": k,
                        "I1": sol.I[k, 0],
                        "I2": sol.I[k, 1],
                        "K1": sol.K[k, 0],
                        "K2": sol.K[k, 1],
                        "wronskian_residual": wres[k],
                    }
                )
        else:
            raise ConfigError(f"unknown dump table {what!r}")
    _write_json(out_dir / f"dump_{what}.json", {"meta": _meta(cfg), "rows": rows})
    print(f"wrote {len(rows)} rows to {out_dir / f'dump_{what}.json'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS defaults let the shared flags appear before or after the
    # subcommand without the unset position clobbering the set one
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="path to the experiment JSON config")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default: config output.dir)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for generated fixtures")
    common.add_argument("--modes", default=argparse.SUPPRESS, help="comma-separated m filter, e.g. 0,1,-2")
    common.add_argument("--kmax", type=int, default=argparse.SUPPRESS, help="override truncation k_max")
    parser = argparse.ArgumentParser(
        prog="qsolidtorus",
        description="Mode-system solver and verification driver for the quantum solid torus operator",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", help="check the family hypotheses", parents=[common])
    p_solve = sub.add_parser("solve", help="apply the inverse to a right-hand side", parents=[common])
    p_solve.add_argument("--rhs", default=None, help="rhs JSON file (default: seeded random fixtures)")
    sub.add_parser("scan", help="Hilbert-Schmidt decay and inequality scan", parents=[common])
    p_dump = sub.add_parser("dump", help="debug tables", parents=[common])
    p_dump.add_argument("--what", choices=("transfer", "solution"), default="solution")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = getattr(args, "config", None)
    if config is None:
        print("a --config file is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out_dir = Path(getattr(args, "out", None) or cfg.out_dir)
    seed = getattr(args, "seed", 20250808)
    k_max = getattr(args, "kmax", None)
    only_m = None
    modes_arg = getattr(args, "modes", None)
    if modes_arg is not None:
        try:
            only_m = [int(tok) for tok in modes_arg.split(",") if tok.strip()]
        except ValueError:
            print("--modes expects integers like 0,1,-2", file=sys.stderr)
            return EXIT_USAGE
    try:
        if args.command == "validate":
            return cmd_validate(cfg, out_dir)
        if args.command == "solve":
            rhs = Path(args.rhs) if args.rhs else None
            if rhs is not None and not rhs.exists():
                print(f"rhs file not found: {rhs}", file=sys.stderr)
                return EXIT_USAGE
            return cmd_solve(cfg, out_dir, rhs, seed, only_m, k_max)
        if args.command == "scan":
            return cmd_scan(cfg, out_dir, only_m, k_max)
        if args.command == "dump":
            return cmd_dump(cfg, out_dir, args.what, only_m, k_max)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
