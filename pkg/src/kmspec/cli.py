"""Command line pipeline: config ingestion, orchestration and report emission.

Configs are JSON with decimal-string numerics.  All emitted artifacts are
deterministic byte-for-byte for a fixed config: grids are evaluated in fixed
order, dictionaries are serialized with sorted keys and floats via repr.
Timings go to a separate sidecar file that is excluded from the manifest.
"""

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from .errors import InvalidInputError, KmspecError
from .expratio import _as_array
from .growth import (CocycleModel, ball_census, build_measure_net,
                     classify_spectrum, limsup_ratio, omega_mu,
                     uniquely_ergodic_classifier)
from .padic import default_alphabet, freeness_suite, generator, subgroup_closure_mod
from .realize import build_realizable, eval_phi, fraction_pair
from .sets import ClosedSetSpec
from .spectra import (solve_free_product_spectrum, solve_spectrum,
                      target_phi_from_set)

MODES = ("wreath", "free-product", "growth", "padic")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, separators=(",", ": ")) + "\n"


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def load_config(path: str, overrides: dict) -> dict:
    with open(path) as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise InvalidInputError("config must be a JSON object")
    for key, value in overrides.items():
        if value is not None:
            config[key] = value
    mode = config.get("mode")
    if mode not in MODES:
        raise InvalidInputError(f"mode must be one of {MODES}, got {mode!r}")
    if mode in ("wreath", "free-product"):
        if "K" not in config:
            raise InvalidInputError("spectrum modes require a K spec")
        K = ClosedSetSpec.from_config(config["K"])
        contains_zero = K.distance(0.0) == 0.0
        if mode == "wreath" and not contains_zero:
            raise InvalidInputError("wreath mode requires 0 in K: an invariant "
                                    "measure must exist at beta = 0")
        if mode == "free-product" and contains_zero:
            raise InvalidInputError("free-product mode requires 0 outside K")
    return config


def _num(config, key, default=None) -> float:
    if key not in config:
        if default is None:
            raise InvalidInputError(f"config key {key!r} is required")
        return default
    return float(config[key])


def _csv(rows: List[Tuple], header: Tuple[str, ...]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row))
    return "\n".join(lines) + "\n"


def _cert(name: str, passed: bool, value: float, tol: float) -> dict:
    return {"name": name, "passed": bool(passed),
            "value": repr(float(value)), "tol": repr(float(tol))}


# ---------------------------------------------------------------------------
# Pipelines: each returns (artifacts {name: text}, certificates [dict])

def run_build_spectrum(config: dict):
    K = ClosedSetSpec.from_config(config["K"])
    r_max = _num(config, "range", 10.0)
    tol = _num(config, "tol", 1e-6)
    grid_n = int(config.get("grid_n", 10001))
    betas = np.linspace(-r_max, r_max, grid_n)
    certificates = []
    artifacts = {}

    if config["mode"] == "wreath":
        t = _num(config, "t")
        stages = int(config.get("stages", 2))
        phi = target_phi_from_set(K, t)

        def zeta(beta):
            bts = _as_array(beta)
            vals = np.asarray(K.distance(bts), dtype=float) / (2.0 * (1.0 + bts ** 2))
            return float(vals[0]) if np.asarray(beta).ndim == 0 else vals

        cocycle = build_realizable(zeta, a=t, stages=stages,
                                   r_max=max(r_max, 20.0), grid_n=grid_n)
        residual = cocycle.identity_residual(betas)
        certificates.append(_cert("block-identity-residual",
                                  residual <= 1e-10, residual, 1e-10))
        budget = 2.0 ** (1 - stages)
        certificates.append(_cert("staged-approximation-error",
                                  cocycle.certified_error <= budget,
                                  cocycle.certified_error, budget))
        phi0 = abs(float(phi(0.0)) - 1.0)
        certificates.append(_cert("phi-at-zero", phi0 <= 1e-12, phi0, 1e-12))
        cphi0 = abs(eval_phi(cocycle, 0.0) - 1.0)
        certificates.append(_cert("cocycle-phi-at-zero", cphi0 <= 1e-12,
                                  cphi0, 1e-12))
        report = solve_spectrum(phi, r_max=r_max, tol=tol, grid_n=grid_n)
        phi_vals = np.asarray(phi(betas), dtype=float)
        artifacts["samples.csv"] = _csv(
            [(float(b), float(v)) for b, v in zip(betas, phi_vals)],
            ("beta", "phi"))
        psi_vals = np.asarray(eval_phi(cocycle, betas), dtype=float)
        artifacts["residuals.csv"] = _csv(
            [(float(b), float(abs(p - q)))
             for b, p, q in zip(betas, phi_vals, psi_vals)],
            ("beta", "residual"))
    else:
        k = int(config.get("k", 2))
        order = int(config.get("lambda0_order", 2 * k))
        pair = fraction_pair(K, k, order, grid_n=grid_n, r_max=r_max)
        e1 = abs(float(pair.phi1(0.0)) - 1.0)
        e2 = abs(float(pair.phi2(0.0)) - 1.0)
        certificates.append(_cert("phi1-at-zero", e1 <= 1e-12, e1, 1e-12))
        certificates.append(_cert("phi2-at-zero", e2 <= 1e-12, e2, 1e-12))
        outside = np.abs(betas) >= pair.delta
        qmax = max(float(np.max(np.abs(np.asarray(pair.q1(betas))[outside]))),
                   float(np.max(np.abs(np.asarray(pair.q2(betas))[outside]))))
        certificates.append(_cert("q-bounded-off-delta", qmax <= 0.5 + 1e-12,
                                  qmax, 0.5))
        report = solve_free_product_spectrum(pair, r_max=r_max, tol=tol,
                                             grid_n=grid_n)
        v1 = np.asarray(pair.phi1(betas), dtype=float)
        v2 = np.asarray(pair.phi2(betas), dtype=float)
        artifacts["samples.csv"] = _csv(
            [(float(b), float(a), float(c)) for b, a, c in zip(betas, v1, v2)],
            ("beta", "phi1", "phi2"))

    artifacts["report.json"] = canonical_json(report.to_dict())
    return artifacts, certificates


def run_growth(config: dict):
    preset = config.get("preset", "coboundary")
    c = _num(config, "c", 1.0)
    n_states = int(config.get("n_states", 64))
    step = int(config.get("step", 7))
    # a horizon that is a multiple of the state count makes the truncated
    # limsup exact for grid-rotation models: the sphere sup of a coboundary
    # vanishes identically once the rotation wraps around
    horizon = int(config.get("horizon", 2 * n_states))
    radius = int(config.get("radius", 400))
    s_list = [float(s) for s in config.get("s_list", ["0.5", "0.1", "0.01"])]
    x0 = int(config.get("x0", 0))
    model = CocycleModel.from_preset(preset, n_states=n_states, step=step, c=c)

    certificates = []
    artifacts = {}
    worst = model.check_cocycle_identity(n_samples=1000)
    certificates.append(_cert("cocycle-identity", worst <= 1e-10, worst, 1e-10))

    census = ball_census(model.group, min(horizon, 12))
    artifacts["census.csv"] = _csv(
        [(k, n) for k, n in enumerate(census.counts)], ("k", "sphere_size"))

    est_pos = limsup_ratio(model, x0, 1.0, horizon)
    est_neg = limsup_ratio(model, x0, -1.0, horizon)
    margin = 1e-9
    flags = (est_pos.estimate <= margin, est_neg.estimate <= margin)
    verdict = classify_spectrum(*flags)
    artifacts["limsup.csv"] = _csv(
        [(n, float(tp), float(tn)) for n, (tp, tn)
         in enumerate(zip(est_pos.tails, est_neg.tails))],
        ("n", "tail_sup_pos", "tail_sup_neg"))

    defect_rows = []
    all_ok = True
    worst_ratio = 0.0
    for s in s_list:
        net, certs = build_measure_net(model, x0, _num(config, "beta", 1.0),
                                       s, radius)
        for cert in certs:
            all_ok &= cert.passed
            worst_ratio = max(worst_ratio,
                              cert.measured_defect / max(cert.bound, 1e-300))
            defect_rows.append((float(s), str(cert.generator),
                                float(cert.measured_defect),
                                float(cert.analytic_bound),
                                float(cert.truncation_slack)))
    certificates.append(_cert("measure-net-defects", all_ok, worst_ratio, 1.0))
    artifacts["defects.csv"] = _csv(
        defect_rows, ("s", "generator", "measured", "bound", "slack"))

    uniform = np.full(n_states, 1.0 / n_states)
    table = omega_mu(model, uniform)
    report = {
        "preset": preset,
        "classifier": verdict,
        "limsup_estimate_pos": repr(float(est_pos.estimate)),
        "limsup_estimate_neg": repr(float(est_neg.estimate)),
        "horizon": horizon,
        "omega_mu": {str(g): repr(v) for g, v in sorted(table.items(),
                                                        key=lambda kv: str(kv[0]))},
        "uniquely_ergodic_classifier": uniquely_ergodic_classifier(model, uniform),
    }
    artifacts["report.json"] = canonical_json(report)
    return artifacts, certificates


def run_padic(config: dict):
    p = int(config.get("p", 3))
    n_level = int(config.get("N", 2))
    max_len = int(config.get("max_len", 8))
    certificates = []

    cert = freeness_suite(max_len, default_alphabet())
    certificates.append(_cert("freeness", not cert.identity_found,
                              float(cert.prefix_words_evaluated), 0.0))
    closures = []
    gens = [generator("g1"), generator("g2")]
    for level in range(1, n_level + 1):
        closure = subgroup_closure_mod(p, level, gens)
        closures.append(closure)
        certificates.append(_cert(f"closure-full-p{p}-N{level}",
                                  closure["is_full"], float(closure["order"]),
                                  float(closure["expected"])))
    report = {"freeness": cert.to_dict(), "closures": closures}
    artifacts = {"report.json": canonical_json(report)}
    return artifacts, certificates


RUNNERS = {"wreath": run_build_spectrum, "free-product": run_build_spectrum,
           "growth": run_growth, "padic": run_padic}


def execute(config: dict):
    artifacts, certificates = RUNNERS[config["mode"]](config)
    manifest = {
        "config": config,
        "config_hash": config_hash(config),
        "artifacts": sorted(artifacts),
        "certificates": certificates,
        "passed": all(c["passed"] for c in certificates),
    }
    artifacts["manifest.json"] = canonical_json(manifest)
    return artifacts, manifest


def emit(out_dir: str, artifacts: Dict[str, str], elapsed: float):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in sorted(artifacts):
        (out / name).write_text(artifacts[name])
    # timings are non-deterministic by nature and live outside the manifest
    (out / "timings.txt").write_text(f"elapsed_seconds {elapsed:.3f}\n")


def cmd_verify(manifest_path: str) -> int:
    path = Path(manifest_path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"FAIL integrity: cannot read manifest: {exc}")
        return 1
    base = path.parent
    for name in manifest["artifacts"]:
        if not (base / name).exists():
            print(f"FAIL integrity: missing artifact {name}")
            return 1
    artifacts, fresh = execute(manifest["config"])
    for name in sorted(manifest["artifacts"]) + ["manifest.json"]:
        stored = (base / name).read_text()
        if stored != artifacts[name]:
            print(f"FAIL certificate replay: {name} diverges from stored copy")
            return 1
    if not fresh["passed"]:
        failed = [c["name"] for c in fresh["certificates"] if not c["passed"]]
        print(f"FAIL certificates: {', '.join(failed)}")
        return 1
    print("PASS all certificates replayed")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kmspec",
        description="Constructions and certificates for prescribed KMS spectra")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("build-spectrum", "verify", "growth", "padic"):
        cp = sub.add_parser(name)
        cp.add_argument("--config", required=True)
        cp.add_argument("--out", default="out")
        cp.add_argument("--grid-n", type=int, default=None)
        cp.add_argument("--tol", default=None)
        cp.add_argument("--range", dest="range_", default=None)
    args = parser.parse_args(argv)

    if args.command == "verify":
        return cmd_verify(args.config)

    overrides = {"grid_n": args.grid_n, "tol": args.tol, "range": args.range_}
    try:
        config = load_config(args.config, overrides)
        expected_mode = {"build-spectrum": ("wreath", "free-product"),
                         "growth": ("growth",), "padic": ("padic",)}
        if config["mode"] not in expected_mode[args.command]:
            raise InvalidInputError(f"config mode {config['mode']!r} does not "
                                    f"match command {args.command!r}")
    except (KmspecError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    start = time.monotonic()
    try:
        artifacts, manifest = execute(config)
    except KmspecError as exc:
        print(f"{config['mode']} error: {exc}", file=sys.stderr)
        return 1
    emit(args.out, artifacts, time.monotonic() - start)
    for cert in manifest["certificates"]:
        status = "PASS" if cert["passed"] else "FAIL"
        print(f"{status} {cert['name']} value={cert['value']} tol={cert['tol']}")
    return 0 if manifest["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
