"""Command-line front end: sweeps over counting fields and model parameters.

Emits CSV for sweeps and JSON for single objects, with 17-significant-digit
floats and newline-terminated lines so identical invocations produce byte
identical files. Exit codes: 0 success, 2 invalid configuration or usage,
3 solver failure, 1 selftest failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import fcs, spectral, vmodel
from .generators import CountingField, OpenSystem
from .model import ModelError, bohr_frequencies, cluster_frequencies, cluster_with_centers, load_config
from .rates import build_rate_table
from .spectral import SpectralError

SCHEMA_VERSION = 1
METHOD_ORDER = ("unified", "secular", "redfield")

DEFAULT_TOLERANCES = {
    "oracle": 1e-14,
    "symmetry": 1e-12,
    "trace": 1e-12,
    "detailed_balance": 1e-12,
    "gauge": 1e-12,
    "longtime_ratio": 0.25,
}


class ConfigError(ValueError):
    pass


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _write_text(out_path: str | None, text: str) -> None:
    if out_path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _csv_document(command: str, meta: dict, columns: list[str], rows: list[tuple]) -> str:
    buf = io.StringIO()
    meta_json = json.dumps(meta, sort_keys=True, separators=(",", ":"))
    buf.write(f"# schema_version={SCHEMA_VERSION}, command={command}, params={meta_json}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _json_document(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _complex_pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _parse_tol_overrides(pairs: list[str] | None) -> dict[str, float]:
    tols = dict(DEFAULT_TOLERANCES)
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(f"tolerance override {item!r} is not KEY=VAL")
        key, _, raw = item.partition("=")
        if key not in tols:
            raise ConfigError(
                f"unknown tolerance key {key!r}; known: {', '.join(sorted(tols))}"
            )
        tols[key] = float(raw)
    return tols


def _methods(arg: str) -> list[str]:
    if arg == "all":
        return list(METHOD_ORDER)
    if arg not in METHOD_ORDER:
        raise ConfigError(f"unknown method {arg!r}")
    return [arg]


def _resolve_source(args) -> tuple[vmodel.VParams | None, OpenSystem | None, dict]:
    """Preset name or config path -> (VParams or None, OpenSystem, metadata)."""
    if getattr(args, "preset", None):
        params = vmodel.preset(args.preset)
        meta = {"preset": args.preset, **_vparams_meta(params)}
        return params, vmodel.v_system(params), meta
    cfg = load_config(args.config)
    freqs = bohr_frequencies(cfg["model"])
    if cfg["centers"] is not None:
        partition = cluster_with_centers(freqs, cfg["centers"])
    else:
        partition = cluster_frequencies(freqs, cfg["epsilon"])
    system = OpenSystem(model=cfg["model"], baths=cfg["baths"], partition=partition)
    meta = {"config": str(args.config), "epsilon": cfg["epsilon"]}
    return None, system, meta


def _vparams_meta(p: vmodel.VParams) -> dict:
    return {
        "nu": p.nu, "delta": p.delta, "alpha": p.alpha,
        "a": p.a, "T_L": p.T_L, "T_R": p.T_R,
    }


def _require_preset(args, command: str) -> vmodel.VParams:
    if not getattr(args, "preset", None):
        raise ConfigError(f"{command} sweeps model parameters and needs --preset, not --config")
    return vmodel.preset(args.preset)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_cgf(args) -> int:
    params, system, meta = _resolve_source(args)
    deltas = args.delta or ([params.delta] if params is not None else [None])
    chi_max = args.chi_max
    if chi_max is None:
        scale = params.nu if params is not None else 1.0
        chi_max = 2.0 * math.pi / scale
    grid = np.linspace(0.0, chi_max, args.chi_points)
    rows = []
    for method in _methods(args.method):
        for delta in deltas:
            if params is not None and delta is not None:
                p = vmodel.VParams(
                    nu=params.nu, delta=delta, alpha=params.alpha,
                    a=params.a, T_L=params.T_L, T_R=params.T_R,
                )
                sys_d = vmodel.v_system(p)
            else:
                sys_d = system
            report = fcs.fluctuation_symmetry_scan(
                sys_d, method, grid, count_bath=args.count_bath, jobs=args.jobs
            )
            for k, chi in enumerate(report.chi_grid):
                flag = []
                if report.ambiguous[k]:
                    flag.append("ambiguous")
                if report.crossed[k]:
                    flag.append("crossing")
                rows.append(
                    (
                        method,
                        delta if delta is not None else math.nan,
                        chi,
                        report.g_direct[k].real,
                        report.g_direct[k].imag,
                        report.g_shifted[k].real,
                        report.g_shifted[k].imag,
                        report.residual[k],
                        "+".join(flag) or "ok",
                    )
                )
    meta = {**meta, "chi_points": args.chi_points, "chi_max": chi_max,
            "count_bath": args.count_bath, "method": args.method}
    doc = _csv_document(
        "cgf", meta,
        ["method", "delta", "chi", "Re_G", "Im_G", "Re_G_shifted", "Im_G_shifted",
         "residual", "branch_flag"],
        rows,
    )
    _write_text(args.out, doc)
    return 0


def cmd_transport(args) -> int:
    base = _require_preset(args, "transport")
    delta = args.delta[0] if args.delta else base.delta
    t_bar = 0.5 * (base.T_L + base.T_R)
    alphas = np.linspace(-1.0, 1.0, args.alpha_points)
    rows = []
    for method in _methods(args.method):
        def at(alpha: float):
            p = vmodel.VParams(nu=base.nu, delta=delta, alpha=float(alpha),
                               a=base.a, T_L=t_bar, T_R=t_bar)
            gk = fcs.green_kubo_check(p, method)
            so = fcs.second_order_check(p, method)
            return (float(alpha), method, gk[0], gk[1], so[0], so[1])

        rows.extend(fcs.grid_map(at, list(alphas), args.jobs))
    meta = {"preset": args.preset, "delta": delta, "T_bar": t_bar,
            "alpha_points": args.alpha_points, "method": args.method}
    doc = _csv_document(
        "transport", meta,
        ["alpha", "method", "gk_lhs", "gk_rhs", "eq32_lhs", "eq32_rhs"],
        rows,
    )
    _write_text(args.out, doc)
    return 0


def cmd_crossover(args) -> int:
    base = _require_preset(args, "crossover")
    grid = np.geomspace(args.delta_min, args.delta_max, args.delta_points)
    points = fcs.crossover_scan(base, list(grid), jobs=args.jobs)
    rows = [
        (pt.delta, pt.current["redfield"], pt.current["unified"], pt.current["secular"], pt.closest)
        for pt in points
    ]
    meta = {"preset": args.preset, "alpha": base.alpha,
            "delta_min": args.delta_min, "delta_max": args.delta_max,
            "delta_points": args.delta_points}
    doc = _csv_document(
        "crossover", meta,
        ["delta", "J_redfield", "J_unified", "J_secular", "closest_method"],
        rows,
    )
    _write_text(args.out, doc)
    return 0


def cmd_coherence(args) -> int:
    base = _require_preset(args, "coherence")
    methods = _methods(args.method)
    alphas = [float(x) for x in np.linspace(-1.0, 1.0, args.alpha_points)]
    deltas = [float(x) for x in np.geomspace(args.delta_min, args.delta_max, args.delta_points)]
    points = fcs.coherence_map(base, alphas, deltas, methods=methods, jobs=args.jobs)
    rows = [(pt.alpha, pt.delta, pt.method, pt.re, pt.im) for pt in points]
    meta = {"preset": args.preset, "alpha_points": args.alpha_points,
            "delta_min": args.delta_min, "delta_max": args.delta_max,
            "delta_points": args.delta_points, "method": args.method}
    doc = _csv_document(
        "coherence", meta,
        ["alpha", "delta", "method", "re_rho23", "im_rho23"],
        rows,
    )
    _write_text(args.out, doc)
    return 0


def cmd_tur(args) -> int:
    base = _require_preset(args, "tur")
    t_bar = 0.5 * (base.T_L + base.T_R)
    eq = base.with_temperatures(t_bar, t_bar)
    grid = [float(x) for x in np.linspace(args.deltat_max / args.deltat_points,
                                          args.deltat_max, args.deltat_points)]
    rows = []
    for method in _methods(args.method):
        for pt in fcs.tur_scan(eq, method, grid, jobs=args.jobs):
            rows.append((pt.delta_T, pt.method, pt.mean, pt.variance, pt.ratio))
    meta = {"preset": args.preset, "T_bar": t_bar, "deltat_max": args.deltat_max,
            "deltat_points": args.deltat_points, "method": args.method}
    doc = _csv_document(
        "tur", meta,
        ["deltaT", "method", "mean_J", "var_J", "ratio"],
        rows,
    )
    _write_text(args.out, doc)
    return 0


def cmd_rates(args) -> int:
    _, system, meta = _resolve_source(args)
    table = build_rate_table(system.partition, system.baths)
    entries = [
        {"bath": bath_id, "center": center, "rate": rate}
        for (bath_id, center), rate in sorted(table.entries.items())
    ]
    payload = {"schema_version": SCHEMA_VERSION, "params": meta, "rates": entries}
    _write_text(args.out, _json_document(payload))
    return 0


def cmd_generator(args) -> int:
    _, system, meta = _resolve_source(args)
    methods = _methods(args.method)
    if len(methods) != 1:
        raise ConfigError("generator dump needs a single --method")
    chi = CountingField.of({args.count_bath: complex(args.chi_re, args.chi_im)})
    gen = system.build(methods[0], chi)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "method": methods[0],
        "params": meta,
        "chi": {bid: _complex_pair(chi.value(bid)) for bid in system.bath_ids},
        "ordering": [list(e) for e in gen.ordering.entries],
        "matrix": [[_complex_pair(z) for z in row] for row in gen.matrix],
    }
    _write_text(args.out, _json_document(payload))
    return 0


def cmd_steady_state(args) -> int:
    _, system, meta = _resolve_source(args)
    methods = _methods(args.method)
    out = {}
    for method in methods:
        rho = spectral.steady_state(system, method)
        ordering = system.ordering(method)
        out[method] = {
            "ordering": [list(e) for e in ordering.entries],
            "vector": [_complex_pair(z) for z in rho.vector],
        }
    payload = {"schema_version": SCHEMA_VERSION, "params": meta, "steady_state": out}
    _write_text(args.out, _json_document(payload))
    return 0


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------

def _selftest_checks(quick: bool, tols: dict[str, float]):
    rng = np.random.default_rng(20240817)
    draws = 10 if quick else 60
    fault = os.environ.get("QFCS_FAULT_INJECT", "")

    def random_params() -> vmodel.VParams:
        nu = rng.uniform(0.5, 2.0)
        return vmodel.VParams(
            nu=nu,
            delta=rng.uniform(0.0, 0.9) * nu,
            alpha=rng.uniform(-1.0, 1.0),
            a=rng.uniform(0.002, 0.05),
            T_L=rng.uniform(0.5, 8.0),
            T_R=rng.uniform(0.5, 8.0),
        )

    def check_detailed_balance():
        worst = 0.0
        for _ in range(draws):
            p = random_params()
            system = vmodel.v_system(p)
            table = build_rate_table(system.partition, system.baths)
            for (bath_id, center), rate in table.entries.items():
                if center <= 0.0:
                    continue
                beta = system.bath(bath_id).beta
                partner = table.rate(bath_id, -center)
                gap = abs(partner - rate * math.exp(-beta * center)) / max(partner, 1e-300)
                worst = max(worst, gap)
        return worst, tols["detailed_balance"]

    def check_oracle():
        worst = 0.0
        for _ in range(draws):
            p = random_params()
            chi = complex(rng.uniform(-3, 3), rng.uniform(-2, 2))
            ref = vmodel.explicit_generator(p, chi)
            if fault == "oracle":
                ref = ref.copy()
                ref[0, 1] = -ref[0, 1]
            built = vmodel.v_system(p).build(
                "unified", CountingField.of({"L": chi})
            ).matrix
            worst = max(worst, float(np.max(np.abs(built - ref)) / np.max(np.abs(ref))))
        return worst, tols["oracle"]

    def check_symmetry():
        worst = 0.0
        for _ in range(draws):
            p = random_params()
            system = vmodel.v_system(p)
            chi = CountingField.of({"L": rng.uniform(-4, 4)})
            for method in ("unified", "secular"):
                direct = system.build(method, chi).matrix
                shifted = system.build(method, chi.shifted(system.baths)).matrix
                scale = float(np.max(np.abs(direct)))
                worst = max(worst, float(np.max(np.abs(shifted.T - direct))) / scale)
        return worst, tols["symmetry"]

    def check_trace():
        worst = 0.0
        for _ in range(draws // 2 + 1):
            p = random_params()
            system = vmodel.v_system(p)
            for method in METHOD_ORDER:
                gen = system.build(method, CountingField.zero())
                w = gen.trace_vector()
                scale = float(np.max(np.abs(gen.matrix)))
                worst = max(worst, float(np.max(np.abs(w @ gen.matrix))) / scale)
        return worst, tols["trace"]

    def check_gauge():
        worst = 0.0
        for _ in range(draws // 2 + 1):
            p = random_params()
            system = vmodel.v_system(p)
            x = rng.uniform(-3, 3)
            chi = CountingField.of({"L": x, "R": x})
            tilted = system.build("unified", chi).matrix
            base = system.build("unified", CountingField.zero()).matrix
            phases = np.array([1.0, *([np.exp(1j * x * p.nu)] * 4)])
            gauged = (phases[:, None] * base) / phases[None, :]
            scale = float(np.max(np.abs(base)))
            worst = max(worst, float(np.max(np.abs(tilted - gauged))) / scale)
        return worst, tols["gauge"]

    def check_longtime():
        p = vmodel.preset("fig2")
        system = vmodel.v_system(p)
        gen0 = system.build("unified", CountingField.zero())
        gap = spectral.spectral_gap(gen0.matrix)
        t1 = 50.0 / gap
        chi = CountingField.of({"L": 1.3})
        gen = system.build("unified", chi)
        from .generators import maximally_mixed

        rho0 = maximally_mixed(gen.ordering)
        g_eig = spectral.cgf_point(system, "unified", chi).G
        errs = []
        for t in (t1, 2.0 * t1):
            g_prop = spectral.log_mgf(gen, rho0, t) / t
            errs.append(abs(g_prop - g_eig))
        # the finite-time estimate converges like C/t: doubling t halves the error
        ratio_gap = abs(errs[0] / (2.0 * errs[1]) - 1.0)
        return ratio_gap, tols["longtime_ratio"]

    checks = [
        ("detailed-balance", check_detailed_balance),
        ("generator-oracle", check_oracle),
        ("transpose-symmetry", check_symmetry),
        ("trace-preservation", check_trace),
        ("gauge-invariance", check_gauge),
        ("longtime-cgf-oracle", check_longtime),
    ]
    return checks


def cmd_selftest(args) -> int:
    tols = _parse_tol_overrides(args.tol_override)
    checks = _selftest_checks(args.quick, tols)
    all_ok = True
    lines = []
    for name, fn in checks:
        t0 = time.perf_counter()
        metric, bound = fn()
        dt = time.perf_counter() - t0
        ok = metric <= bound
        all_ok &= ok
        lines.append(
            f"{'PASS' if ok else 'FAIL'}  {name:<22s} metric={metric:.3e} bound={bound:.1e} ({dt:.2f}s)"
        )
    text = "\n".join(lines) + ("\nall checks passed\n" if all_ok else "\nFAILURES present\n")
    sys.stdout.write(text)
    return 0 if all_ok else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qfcs",
        description="Tilted-generator heat statistics for few-level open systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, needs_source: bool = True):
        if needs_source:
            group = p.add_mutually_exclusive_group(required=True)
            group.add_argument("--preset", help="named parameter preset, e.g. fig2")
            group.add_argument("--config", help="JSON model configuration path")
        p.add_argument("--method", default="unified",
                       choices=[*METHOD_ORDER, "all"], help="dynamics to build")
        p.add_argument("--out", default="-", help="output path, '-' for stdout")
        p.add_argument("--format", default=None, choices=["csv", "json"],
                       help="accepted for compatibility; each command has a fixed native format")
        p.add_argument("--jobs", type=int, default=None,
                       help="worker threads (default: QFCS_JOBS or all cores)")
        p.add_argument("--tol-override", action="append", metavar="KEY=VAL",
                       help="override a named tolerance")

    p = sub.add_parser("cgf", help="CGF symmetry scan over the counting field")
    add_common(p)
    p.add_argument("--delta", type=float, action="append",
                   help="excited-level splitting; repeatable for blocks")
    p.add_argument("--chi-points", type=int, default=200)
    p.add_argument("--chi-max", type=float, default=None,
                   help="grid end (default 2*pi over the level gap)")
    p.add_argument("--count-bath", default="L")
    p.set_defaults(func=cmd_cgf)

    p = sub.add_parser("transport", help="linear-response transport symmetries vs alpha")
    add_common(p)
    p.add_argument("--delta", type=float, action="append")
    p.add_argument("--alpha-points", type=int, default=21)
    p.set_defaults(func=cmd_transport)

    p = sub.add_parser("crossover", help="mean current vs splitting for all methods")
    add_common(p)
    p.add_argument("--delta-min", type=float, default=1e-3)
    p.add_argument("--delta-max", type=float, default=0.9)
    p.add_argument("--delta-points", type=int, default=25)
    p.set_defaults(func=cmd_crossover)

    p = sub.add_parser("coherence", help="steady-state coherence over (alpha, delta)")
    add_common(p)
    p.add_argument("--alpha-points", type=int, default=21)
    p.add_argument("--delta-min", type=float, default=1e-3)
    p.add_argument("--delta-max", type=float, default=0.3)
    p.add_argument("--delta-points", type=int, default=13)
    p.set_defaults(func=cmd_coherence)

    p = sub.add_parser("tur", help="uncertainty ratio vs temperature difference")
    add_common(p)
    p.add_argument("--deltat-max", type=float, default=3.9)
    p.add_argument("--deltat-points", type=int, default=20)
    p.set_defaults(func=cmd_tur)

    p = sub.add_parser("rates", help="dump the golden-rule rate table as JSON")
    add_common(p)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("generator", help="dump one tilted generator as JSON")
    add_common(p)
    p.add_argument("--chi-re", type=float, default=0.0)
    p.add_argument("--chi-im", type=float, default=0.0)
    p.add_argument("--count-bath", default="L")
    p.set_defaults(func=cmd_generator)

    p = sub.add_parser("steady-state", help="dump steady states as JSON")
    add_common(p)
    p.set_defaults(func=cmd_steady_state)

    p = sub.add_parser("selftest", help="run the invariant suite")
    p.add_argument("--quick", action="store_true", help="reduced draw counts")
    p.add_argument("--tol-override", action="append", metavar="KEY=VAL")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ModelError, KeyError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SpectralError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
