"""Command-line scenario runner.

Every subcommand writes its machine-readable result (JSON or CSV) to
``--out`` and a short summary to stdout.  Without ``--out`` the result goes
to stdout and the summary to stderr.  Settings can come from a JSON file
given with ``--config``; explicit flags win over the file.

Exit codes: 0 ok, 2 bad usage or config, 3 physics invariant violated,
4 conformance failure under ``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import CLASSICAL_LIMIT, degradation_report
from .conat import ConatChannelSpec, conat_circuit, verify_circuit
from .gaussian import PhysicsError, new_coherent, tensor
from .mc import RNG_ALGORITHM
from .mc import verify_circuit as mc_verify
from .protocols import (
    DEFAULT_INPUT,
    DEFAULT_SECOND_INPUT,
    ResourceSpec,
    alternate_coherent_teleport,
    bk_average_fidelity,
    bk_deferred_circuit,
    coherent_superdense,
    coherent_teleport,
    compose_superdense_via_teleport,
    compose_teleport_via_superdense,
    iterate_composition,
    standard_bk_teleport,
)

EXIT_USAGE = 2
EXIT_PHYSICS = 3
EXIT_STRICT = 4
SWEEP_CSV_VERSION = "cvcoherent-sweep v1"

DEFAULTS = {
    "r": 1.0,
    "r2": None,
    "rc": 1.0,
    "rc_pq": None,
    "rc_mq": None,
    "input": list(DEFAULT_INPUT),
    "input2": list(DEFAULT_SECOND_INPUT),
    "variant": 1,
    "eps": [0.1, 0.1, 0.1],
    "depth": 10,
    "kind": "PQ",
    "trials": 100_000,
    "seed": 0,
    "r_grid": [0.0, 0.5, 1.0, 2.0],
    "rc_grid": [0.0, 0.5, 1.0, 2.0],
    "protocol": "teleport",
    "workers": 1,
    "samples": 100_000,
    "sigmas": 5.0,
    "format": "json",
    "out": None,
    "strict": False,
}


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with settings (flags override it)")
    p.add_argument("--format", choices=["json", "csv"], default=None)
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--strict", action="store_true", default=None, help="exit 4 on conformance failure")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvcoherent", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def channel_flags(p):
        p.add_argument("--rc", type=float, default=None, help="ancilla squeezing of both conat channels")
        p.add_argument("--rc-pq", dest="rc_pq", type=float, default=None)
        p.add_argument("--rc-mq", dest="rc_mq", type=float, default=None)

    def input_flags(p, two=False):
        p.add_argument("--in", dest="input", type=_floats, default=None, help="coherent input mean x,p")
        if two:
            p.add_argument("--in2", dest="input2", type=_floats, default=None, help="second input mean x,p")

    p = sub.add_parser("teleport", help="coherent teleportation with two conat channels")
    p.add_argument("--r", type=float, default=None)
    channel_flags(p)
    input_flags(p)
    _add_common(p)

    p = sub.add_parser("alt-teleport", help="alternate coherent teleportation")
    channel_flags(p)
    input_flags(p)
    _add_common(p)

    p = sub.add_parser("superdense", help="coherent superdense coding")
    p.add_argument("--r", type=float, default=None)
    input_flags(p, two=True)
    _add_common(p)

    p = sub.add_parser("compose", help="protocol compositions")
    p.add_argument("--variant", type=int, choices=[1, 2], default=None,
                   help="1: teleport via superdense, 2: superdense via teleport")
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--r2", type=float, default=None, help="superdense resource squeezing (variant 1)")
    channel_flags(p)
    input_flags(p, two=True)
    _add_common(p)

    p = sub.add_parser("degrade", help="iterate compositions and track epsilon growth")
    p.add_argument("--eps", type=_floats, default=None, help="eps1,eps2,eps3")
    p.add_argument("--depth", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("verify-conat", help="build a canonical conat channel and check its conditions")
    p.add_argument("--rc", type=float, default=None)
    p.add_argument("--kind", choices=["PQ", "MQ", "both"], default=None)
    _add_common(p)

    p = sub.add_parser("baseline", help="measurement-based teleportation, Monte-Carlo fidelity")
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    input_flags(p)
    _add_common(p)

    p = sub.add_parser("sweep", help="fidelity over an (r, rc) grid")
    p.add_argument("--protocol", choices=["teleport", "alt-teleport", "compose"], default=None)
    p.add_argument("--r-grid", dest="r_grid", type=_floats, default=None)
    p.add_argument("--rc-grid", dest="rc_grid", type=_floats, default=None)
    p.add_argument("--workers", type=int, default=None)
    input_flags(p)
    _add_common(p)

    p = sub.add_parser("verify", help="Monte-Carlo oracle check of every protocol")
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--rc", type=float, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sigmas", type=float, default=None)
    _add_common(p)
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, the optional JSON config file, and explicit flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
    for key, value in vars(args).items():
        if key in DEFAULTS and value is not None:
            cfg[key] = value
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    for key in ("r", "r2"):
        if cfg[key] is not None and cfg[key] < 0:
            raise ConfigError(f"{key} must be nonnegative")
    for key in ("r_grid", "rc_grid"):
        if not cfg[key]:
            raise ConfigError(f"{key} must be nonempty")
    if any(v < 0 for v in cfg["r_grid"]):
        raise ConfigError("r grid must be nonnegative")
    for key in ("input", "input2"):
        if len(cfg[key]) != 2:
            raise ConfigError(f"{key} needs exactly two numbers x,p")
    if len(cfg["eps"]) != 3 or min(cfg["eps"]) < 0:
        raise ConfigError("eps needs three nonnegative numbers")
    if cfg["depth"] < 1 or cfg["trials"] < 2 or cfg["samples"] < 1000 or cfg["workers"] < 1:
        raise ConfigError("depth, trials, samples and workers must be positive (samples >= 1000)")
    if cfg["format"] not in ("json", "csv"):
        raise ConfigError("format must be json or csv")


def _channels(cfg: dict) -> tuple[ConatChannelSpec, ConatChannelSpec]:
    rc_mq = cfg["rc_mq"] if cfg["rc_mq"] is not None else cfg["rc"]
    rc_pq = cfg["rc_pq"] if cfg["rc_pq"] is not None else cfg["rc"]
    return ConatChannelSpec("MQ", rc_mq), ConatChannelSpec("PQ", rc_pq)


def _inputs(cfg: dict):
    return new_coherent(*cfg["input"]), tensor(
        new_coherent(*cfg["input"], label="A1"), new_coherent(*cfg["input2"], label="A2")
    )


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _rows_csv(rows: list[dict], header_comment: str | None = None) -> str:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    cols = list(rows[0])
    w.writerow(cols)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in (row[c] for c in cols)])
    return buf.getvalue()


def _outcome_row(out) -> dict:
    row = {"protocol": out.name}
    row.update({k: float(v) for k, v in sorted(out.noise_ledger.items())})
    if out.fidelity is not None:
        row["fidelity"] = float(out.fidelity)
    for rep in out.conat_reports:
        row[f"{rep.kind}_achieved_epsilon"] = rep.achieved_epsilon
        row[f"{rep.kind}_conforming"] = int(rep.conforming)
    return row


def _outcome_summary(out) -> list[str]:
    lines = [f"protocol: {out.name}"]
    for key in sorted(out.noise_ledger):
        lines.append(f"  {key} = {out.noise_ledger[key]:.6g}")
    if out.fidelity is not None:
        lines.append(f"  fidelity = {out.fidelity:.6f}")
    for rep in out.conat_reports:
        flag = "conforming" if rep.conforming else "NON-CONFORMING"
        lines.append(f"  {rep.kind} modes ({rep.sender + 1},{rep.receiver + 1}): eps = {rep.achieved_epsilon:.6g} {flag}")
    for rep in out.correlation_reports:
        a, b = rep.mode_pair
        lines.append(f"  modes ({a + 1},{b + 1}): {rep.orientation}, eps = {rep.epsilon:.6g}, entangled = {rep.entangled}")
    return lines


def _check_outcome(out) -> bool:
    if not out.final_state.is_physical():
        raise PhysicsError(f"{out.name}: final state violates the uncertainty principle")
    ok = all(r.conforming for r in out.conat_reports)
    if out.fidelity is not None:
        ok = ok and out.fidelity > CLASSICAL_LIMIT
    return ok


def _run_protocol(cmd: str, cfg: dict):
    single, pair = _inputs(cfg)
    mq, pq = _channels(cfg)
    if cmd == "teleport":
        return coherent_teleport(single, ResourceSpec(cfg["r"]), mq, pq)
    if cmd == "alt-teleport":
        return alternate_coherent_teleport(single, pq, mq)
    if cmd == "superdense":
        return coherent_superdense(pair, ResourceSpec(cfg["r"]))
    if cfg["variant"] == 1:
        r2 = cfg["r2"] if cfg["r2"] is not None else cfg["r"]
        return compose_teleport_via_superdense(single, ResourceSpec(cfg["r"]), ResourceSpec(r2))
    return compose_superdense_via_teleport(pair, ResourceSpec(cfg["r"]), pq, mq)


def _sweep_point(task):
    protocol, r, rc, x0, p0 = task
    inp = new_coherent(x0, p0)
    mq, pq = ConatChannelSpec("MQ", rc), ConatChannelSpec("PQ", rc)
    if protocol == "teleport":
        out = coherent_teleport(inp, ResourceSpec(r), mq, pq)
        eps = (out.noise_ledger["eps1"], out.noise_ledger["eps2"], out.noise_ledger["eps3"])
    elif protocol == "alt-teleport":
        out = alternate_coherent_teleport(inp, pq, mq)
        eps = (out.noise_ledger["eps1"], out.noise_ledger["eps2"], float("nan"))
    else:
        out = compose_teleport_via_superdense(inp, ResourceSpec(r), ResourceSpec(rc))
        eps = (out.noise_ledger["eps1"], out.noise_ledger["eps2"], float("nan"))
    return {
        "r": float(r),
        "rc": float(rc),
        "eps1": eps[0],
        "eps2": eps[1],
        "eps3": eps[2],
        "fidelity": out.fidelity,
        "fidelity_bound": out.noise_ledger["fidelity_bound"],
        "overlap_fidelity": out.overlap_fidelity,
    }


def run(command: str, cfg: dict) -> tuple[str, list[str], bool]:
    """Execute one subcommand; returns (serialized output, summary lines, conforming)."""
    fmt = cfg["format"]
    if command in ("teleport", "alt-teleport", "superdense", "compose"):
        out = _run_protocol(command, cfg)
        ok = _check_outcome(out)
        text = dumps(out.to_dict()) if fmt == "json" else _rows_csv([_outcome_row(out)])
        return text, _outcome_summary(out), ok

    if command == "degrade":
        trace = iterate_composition(cfg["eps"], cfg["depth"])
        summary = degradation_report(trace)
        text = dumps({"trace": trace.to_dict(), "summary": summary}) if fmt == "json" else trace.to_csv()
        lines = [f"degradation over {cfg['depth']} levels from eps = {cfg['eps']}"]
        lines += [f"  {k} = {v}" for k, v in summary.items()]
        return text, lines, trace.max_depth == cfg["depth"]

    if command == "verify-conat":
        kinds = ["PQ", "MQ"] if cfg["kind"] == "both" else [cfg["kind"]]
        reports = []
        for kind in kinds:
            circ = conat_circuit(kind, cfg["rc"])
            reports.append(verify_circuit(circ, kind, 0, 1, 0))
        if fmt == "json":
            text = dumps({"reports": [r.to_dict() for r in reports]})
        else:
            text = _rows_csv([r.to_dict() for r in reports])
        lines = [
            f"{r.kind} conat r_c={cfg['rc']}: achieved_epsilon = {r.achieved_epsilon:.6g}, "
            f"conjugate combo var = {r.var_conjugate_combo:.3g}, copies_exactly = {r.copies_exactly}, "
            f"{'conforming' if r.conforming else 'NON-CONFORMING'}"
            for r in reports
        ]
        return text, lines, all(r.conforming for r in reports)

    if command == "baseline":
        single, _ = _inputs(cfg)
        res = ResourceSpec(cfg["r"])
        mean, se = bk_average_fidelity(single, res, cfg["trials"], cfg["seed"])
        one = standard_bk_teleport(single, res, cfg["seed"])
        data = {
            "r": cfg["r"],
            "trials": cfg["trials"],
            "seed": cfg["seed"],
            "rng": RNG_ALGORITHM,
            "average_fidelity": mean,
            "standard_error": se,
            "closed_form": 2 / (2 + 2 * res.implied_epsilon),
            "single_run": one.to_dict(),
        }
        row = {k: data[k] for k in ("r", "trials", "seed", "average_fidelity", "standard_error", "closed_form")}
        text = dumps(data) if fmt == "json" else _rows_csv([row])
        lines = [f"baseline r={cfg['r']}: average fidelity {mean:.5f} +- {se:.5f} (closed form {data['closed_form']:.5f})"]
        return text, lines, mean > CLASSICAL_LIMIT

    if command == "sweep":
        tasks = [(cfg["protocol"], r, rc, *cfg["input"]) for r in cfg["r_grid"] for rc in cfg["rc_grid"]]
        if cfg["workers"] > 1:
            with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
                rows = list(pool.map(_sweep_point, tasks))
        else:
            rows = [_sweep_point(t) for t in tasks]
        rows = [{"index": i, **row} for i, row in enumerate(rows)]
        text = dumps({"protocol": cfg["protocol"], "points": rows}) if fmt == "json" else _rows_csv(rows, SWEEP_CSV_VERSION)
        lines = [f"sweep {cfg['protocol']}: {len(rows)} grid points, fidelity range "
                 f"[{min(r['fidelity'] for r in rows):.4f}, {max(r['fidelity'] for r in rows):.4f}]"]
        return text, lines, all(r["fidelity"] > CLASSICAL_LIMIT for r in rows)

    if command == "verify":
        single, pair = _inputs(cfg)
        mq, pq = ConatChannelSpec("MQ", cfg["rc"]), ConatChannelSpec("PQ", cfg["rc"])
        res = ResourceSpec(cfg["r"])
        outcomes = [
            coherent_teleport(single, res, mq, pq),
            alternate_coherent_teleport(single, pq, mq),
            coherent_superdense(pair, res),
            compose_teleport_via_superdense(single, res, res),
            compose_superdense_via_teleport(pair, res, pq, mq),
        ]
        circuits = [(out.name, out.circuit) for out in outcomes]
        circuits.append(("standard_bk_teleport", bk_deferred_circuit(single, res)))
        for out in outcomes:
            _check_outcome(out)
        results = []
        for k, (name, circ) in enumerate(circuits):
            verdict = mc_verify(circ, cfg["samples"], cfg["seed"] + k, cfg["sigmas"])
            results.append({"protocol": name, **verdict.to_dict()})
        text = dumps({"results": results}) if fmt == "json" else _rows_csv(results)
        lines = [f"  {r['protocol']}: max |z| = {r['max_abs_z']:.2f} {'PASS' if r['passed'] else 'FAIL'}" for r in results]
        if not all(r["passed"] for r in results):
            raise PhysicsError("Monte-Carlo oracle disagrees with the covariance engine:\n" + "\n".join(lines))
        return text, ["oracle check (all passed)"] + lines, True

    raise ConfigError(f"unknown command {command!r}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        text, lines, ok = run(args.command, cfg)
    except PhysicsError as exc:
        print(f"physics invariant violated: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except (ConfigError, ValueError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    summary = "\n".join(lines) + "\n"
    if cfg["out"]:
        with open(cfg["out"], "w", newline="") as fh:
            fh.write(text)
        sys.stdout.write(summary)
    else:
        sys.stdout.write(text)
        sys.stderr.write(summary)
    if cfg["strict"] and not ok:
        print("conformance check failed (--strict)", file=sys.stderr)
        return EXIT_STRICT
    return 0


if __name__ == "__main__":
    sys.exit(main())
