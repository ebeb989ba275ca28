"""Reproducible sweep driver: parse specifiers, run grids, emit CSV + manifest.

One long-format CSV serves every figure: each grid point contributes one row
per metric in {avg_fidelity, avg_success, closed_form_fidelity,
closed_form_success}.  Identical specs produce byte-identical CSVs; wall time
and environment live in the JSON manifest beside the CSV.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .channels import (
    depolarizing,
    parse_noise_spec,
    qubit_damping,
    thermal_channel,
    gdn_channel,
)
from .codes import build_code, parse_code_spec
from .communication import (
    CommConfig,
    Herald,
    closed_form_p_succ_comm,
    make_comm_runner,
    teleportation_baseline,
    teleportation_simulate,
)
from .fock import FockSpace
from .haar import two_design_states
from .optimize import make_sequence_runner, optimize_sequence, serialize_sequence
from .suppression import (
    GateNoise,
    SuppressionConfig,
    Variant,
    average_fidelity,
    average_success,
    closed_form_F_supp,
    closed_form_F_unsupp,
    closed_form_p_succ,
    make_heralded_runner,
    make_unsuppressed_runner,
)

CSV_COLUMNS = (
    "protocol,code,code_params,eta,nbar,p_dv,sweep_var,sweep_value,metric,value,err_est"
)
METRICS = ("avg_fidelity", "avg_success", "closed_form_fidelity", "closed_form_success")
PROTOCOLS = ("suppress", "unsuppressed", "communicate", "teleport", "optimize")
WORKERS_ENV = "CFSUPP_WORKERS"


class SpecParseError(Exception):
    """A sweep specification that cannot be run."""


@dataclass(frozen=True)
class SweepSpec:
    protocol: str
    sweep_var: str
    sweep_values: tuple
    code: str | None = None
    noise: str | None = None
    dv_noise: str | None = None
    herald: str = "both"
    variant: str = "two-cf"
    gate_noise: str | None = None
    cutoff: int = 60
    seed: int = 0
    depth: int = 2
    budget: int = 2000
    starts: int = 8
    out: str = "sweep.csv"


def parse_sweep_range(text: str) -> tuple:
    """``p:0:0.3:0.05`` -> ("p", (0.0, 0.05, ..., 0.3)), endpoints inclusive."""
    parts = text.split(":")
    if len(parts) != 4:
        raise SpecParseError(f"sweep must look like var:start:stop:step, got {text!r}")
    var = parts[0]
    if var not in ("p", "eta", "alpha"):
        raise SpecParseError(f"sweep variable must be p, eta, or alpha, not {var!r}")
    try:
        start, stop, step = (float(x) for x in parts[1:])
    except ValueError as exc:
        raise SpecParseError(f"non-numeric sweep bound in {text!r}") from exc
    if step <= 0:
        raise SpecParseError("sweep step must be positive")
    if stop < start:
        raise SpecParseError("empty sweep range")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    values = tuple(round(start + k * step, 12) for k in range(count))
    return var, values


def _noise_params(spec: SweepSpec, eta_override: float | None = None) -> tuple:
    """(kind, eta, nbar) of the CV noise; nbar is None for gdn."""
    if spec.noise is None:
        raise SpecParseError(f"protocol {spec.protocol!r} needs --noise")
    kind, params = parse_noise_spec(spec.noise)
    if kind not in ("loss", "thermal", "gdn"):
        raise SpecParseError(f"{spec.noise!r} is not a CV noise specifier")
    eta = eta_override if eta_override is not None else params["eta"]
    nbar = params.get("nbar", 0.0) if kind != "gdn" else None
    return kind, eta, nbar


def _build_cv_channel(kind, eta, nbar, code, space):
    w = np.diag(code.codespace_identity).real if code is not None else None
    if kind == "gdn":
        return gdn_channel(eta, space, l_max=None, k_max=None, occupied_diag=w,
                           defect_target=1e-9)
    return thermal_channel(eta, nbar, space, l_max=None, k_max=None, occupied_diag=w,
                           defect_target=1e-9)


def _dv_channel(spec: SweepSpec, p: float):
    if p == 0.0:
        return None
    if spec.dv_noise is not None:
        kind, _ = parse_noise_spec(spec.dv_noise)
        if kind == "depol":
            return depolarizing(p)
        if kind != "damp":
            raise SpecParseError(f"{spec.dv_noise!r} is not a DV noise specifier")
    return qubit_damping(p, "composite")


def _code_spec_with_alpha(code_spec: str, alpha: float) -> str:
    family, params = parse_code_spec(code_spec)
    if "alpha" not in params:
        raise SpecParseError(f"cannot sweep alpha for code {code_spec!r}")
    params["alpha"] = alpha
    args = ",".join(f"{k}={v:g}" for k, v in params.items())
    return f"{family}:{args}"


def _teleport_avg_fidelity(p: float) -> float:
    fids = []
    for c in two_design_states():
        rho = np.outer(c, c.conj())
        out = teleportation_simulate(rho, p)
        fids.append(float(np.trace(rho @ out).real))
    return float(np.mean(fids))


def compute_point(spec: SweepSpec, value: float, sequence_text: str | None = None) -> dict:
    """All four metric values at one grid point."""
    space = FockSpace(spec.cutoff)
    if spec.protocol == "teleport":
        p = value
        return {
            "eta": "", "nbar": "", "p_dv": p, "code": "dv-qubit", "code_params": "",
            "avg_fidelity": (_teleport_avg_fidelity(p), 0.0),
            "avg_success": (1.0, 0.0),
            "closed_form_fidelity": (teleportation_baseline(p), 0.0),
            "closed_form_success": (1.0, 0.0),
        }

    if spec.code is None:
        raise SpecParseError(f"protocol {spec.protocol!r} needs --code")
    code_spec = spec.code
    eta_override = value if spec.sweep_var == "eta" else None
    p = value if spec.sweep_var == "p" else 0.0
    if spec.sweep_var == "alpha":
        code_spec = _code_spec_with_alpha(code_spec, value)
    kind, eta, nbar = _noise_params(spec, eta_override)
    code = build_code(code_spec, space)
    channel = _build_cv_channel(kind, eta, nbar, code, space)
    family, code_params = parse_code_spec(code_spec)
    meta = {
        "eta": eta,
        "nbar": "" if nbar is None else nbar,
        "p_dv": p,
        "code": family,
        "code_params": ";".join(f"{k}={v:g}" for k, v in code_params.items()),
    }
    thermal_like = kind != "gdn"

    if spec.protocol == "suppress":
        config = SuppressionConfig(
            dv_noise=_dv_channel(spec, p),
            variant=Variant(spec.variant),
            gate_noise=_parse_gate_noise(spec.gate_noise),
        )
        runner = make_heralded_runner(channel, config, space, code.parity)
        f, err = average_fidelity(code, runner)
        ps = average_success(code, runner)
        meta.update(
            avg_fidelity=(f, err),
            avg_success=(ps, 0.0),
            closed_form_fidelity=(closed_form_F_supp(code, eta, nbar), 0.0)
            if thermal_like
            else None,
            closed_form_success=(closed_form_p_succ(code, eta, nbar), 0.0)
            if thermal_like
            else None,
        )
        return meta

    if spec.protocol == "unsuppressed":
        runner = make_unsuppressed_runner(channel)
        f, err = average_fidelity(code, runner)
        meta.update(
            avg_fidelity=(f, err),
            avg_success=(1.0, 0.0),
            closed_form_fidelity=(closed_form_F_unsupp(code, eta, nbar), 0.0)
            if thermal_like
            else None,
            closed_form_success=(1.0, 0.0),
        )
        return meta

    if spec.protocol == "communicate":
        herald = Herald.ONLY_00 if spec.herald == "00" else Herald.BOTH_00_AND_11
        runner = make_comm_runner(CommConfig(p, herald, channel), space)
        f, err = average_fidelity(code, runner)
        ps = average_success(code, runner)
        meta.update(
            avg_fidelity=(f, err),
            avg_success=(ps, 0.0),
            # perfect-ancilla reference line: Eq. (1) is p-independent
            closed_form_fidelity=(closed_form_F_supp(code, eta, nbar), 0.0)
            if thermal_like
            else None,
            closed_form_success=(closed_form_p_succ_comm(code, eta, nbar, p, herald), 0.0)
            if thermal_like
            else None,
        )
        return meta

    if spec.protocol == "optimize":
        if spec.sweep_var != "p":
            raise SpecParseError("the optimize protocol sweeps ancilla damping p")
        from .optimize import parse_sequence

        seq = parse_sequence(sequence_text)
        dv = _dv_channel(spec, p)
        runner = make_sequence_runner(seq, channel, dv, space)
        f, err = average_fidelity(code, runner)
        ps = average_success(code, runner)
        meta.update(
            avg_fidelity=(f, err),
            avg_success=(ps, 0.0),
            closed_form_fidelity=(closed_form_F_supp(code, eta, nbar), 0.0)
            if thermal_like
            else None,
            closed_form_success=(closed_form_p_succ(code, eta, nbar), 0.0)
            if thermal_like
            else None,
        )
        return meta

    raise SpecParseError(f"unknown protocol {spec.protocol!r}")


def _parse_gate_noise(text: str | None):
    if text is None:
        return None
    try:
        cv, dv = (float(x) for x in text.split(","))
    except ValueError as exc:
        raise SpecParseError(f"gate noise must be 'cvloss,dvdamp', got {text!r}") from exc
    return GateNoise(cv, dv)


def _format_value(v) -> str:
    return f"{v:.12e}"


def _point_rows(spec: SweepSpec, value: float, point: dict | Exception) -> list:
    rows = []
    for metric in METRICS:
        if isinstance(point, Exception):
            cells = {"code": "", "code_params": "", "eta": "", "nbar": "", "p_dv": "",
                     "value": "nan", "err": f"error={type(point).__name__}"}
        else:
            entry = point.get(metric)
            if entry is None:
                cells = {
                    "code": point["code"], "code_params": point["code_params"],
                    "eta": point["eta"], "nbar": point["nbar"], "p_dv": point["p_dv"],
                    "value": "nan", "err": "error=Undefined",
                }
            else:
                v, err = entry
                cells = {
                    "code": point["code"], "code_params": point["code_params"],
                    "eta": point["eta"], "nbar": point["nbar"], "p_dv": point["p_dv"],
                    "value": _format_value(v), "err": _format_value(err),
                }
        rows.append(
            ",".join(
                [
                    spec.protocol,
                    str(cells["code"]),
                    str(cells["code_params"]),
                    _maybe_num(cells["eta"]),
                    _maybe_num(cells["nbar"]),
                    _maybe_num(cells["p_dv"]),
                    spec.sweep_var,
                    repr(float(value)),
                    metric,
                    cells["value"],
                    cells["err"],
                ]
            )
        )
    return rows


def _maybe_num(x) -> str:
    if x == "":
        return ""
    return repr(float(x))


def _worker(args):
    spec, value, sequence_text = args
    try:
        return compute_point(spec, value, sequence_text)
    except SpecParseError:
        raise
    except Exception as exc:  # surfaced per grid point, sweep continues
        return exc


def run_sweep(spec: SweepSpec) -> tuple:
    """Run the grid, write CSV and manifest; returns (csv_path, n_errors)."""
    t0 = time.time()
    sequence_text = None
    optimize_summary = None
    if spec.protocol == "optimize":
        space = FockSpace(spec.cutoff)
        code = build_code(spec.code, space)
        kind, eta, nbar = _noise_params(spec)
        channel = _build_cv_channel(kind, eta, nbar, code, space)
        result = optimize_sequence(
            code, channel, depth=spec.depth, budget=spec.budget,
            starts=spec.starts, seed=spec.seed,
        )
        sequence_text = serialize_sequence(result.sequence)
        optimize_summary = {
            "sequence": sequence_text,
            "value": result.value,
            "cf_value": result.cf_value,
            "evaluations": result.evaluations,
            "budget_exhausted": result.budget_exhausted,
        }

    tasks = [(spec, v, sequence_text) for v in spec.sweep_values]
    workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_worker, tasks))
    else:
        points = [_worker(t) for t in tasks]

    lines = [CSV_COLUMNS]
    n_errors = 0
    for value, point in zip(spec.sweep_values, points):
        if isinstance(point, Exception):
            n_errors += 1
            print(
                f"warning: grid point {spec.sweep_var}={value} failed: {point!r}",
                file=sys.stderr,
            )
        lines.extend(_point_rows(spec, value, point))
    csv_path = spec.out
    with open(csv_path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")

    manifest = {
        "tool": "cfsupp",
        "version": __version__,
        "spec": asdict(spec),
        "grid_points": len(spec.sweep_values),
        "row_errors": n_errors,
        "quadrature": {"tolerance": 1e-8, "start_order": 8, "rule": "gauss-legendre x trapezoid, order doubling"},
        "kraus_truncation": {"policy": "adaptive", "defect_target": 1e-9},
        "channel_defect": _representative_defect(spec),
        "workers": workers,
        "wall_time_s": round(time.time() - t0, 3),
    }
    if optimize_summary is not None:
        manifest["optimize"] = optimize_summary
    manifest_path = csv_path + ".manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, n_errors


def _representative_defect(spec: SweepSpec):
    """Measured CPTP defect of the first grid point's CV channel, weighted by
    the code's occupied subspace (None when the protocol carries no channel)."""
    if spec.protocol == "teleport" or spec.code is None or spec.noise is None:
        return None
    try:
        value = spec.sweep_values[0]
        space = FockSpace(spec.cutoff)
        code_spec = spec.code
        if spec.sweep_var == "alpha":
            code_spec = _code_spec_with_alpha(code_spec, value)
        kind, eta, nbar = _noise_params(spec, value if spec.sweep_var == "eta" else None)
        code = build_code(code_spec, space)
        channel = _build_cv_channel(kind, eta, nbar, code, space)
        defect = channel.weighted_defect(np.diag(code.codespace_identity).real)
        return {"label": channel.label, "weighted_defect": defect}
    except Exception as exc:
        return {"error": type(exc).__name__}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfsupp",
        description="conditional-Fourier bosonic noise suppression sweeps",
    )
    sub = parser.add_subparsers(dest="protocol", required=True)
    for name in PROTOCOLS:
        p = sub.add_parser(name)
        p.add_argument("--sweep", required=False, help="var:start:stop:step")
        p.add_argument("--code", help="e.g. bin:n=2,kappa=4")
        p.add_argument("--noise", help="e.g. thermal:eta=0.05,nbar=0.5")
        p.add_argument("--dv-noise", dest="dv_noise", help="damp:p=... or depol:eta=...")
        p.add_argument("--herald", choices=("00", "both"), default=None)
        p.add_argument("--variant", choices=("two-cf", "local-rotation+one-cf"), default=None)
        p.add_argument("--gate-noise", dest="gate_noise", help="cvloss,dvdamp per gate")
        p.add_argument("--cutoff", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--depth", type=int, default=None)
        p.add_argument("--budget", type=int, default=None)
        p.add_argument("--starts", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--config", help="JSON file with the same keys")
    return parser


_DEFAULTS = {
    "herald": "both",
    "variant": "two-cf",
    "cutoff": 60,
    "seed": 0,
    "depth": 2,
    "budget": 2000,
    "starts": 8,
    "out": "sweep.csv",
}


def spec_from_args(args: argparse.Namespace) -> SweepSpec:
    file_conf = {}
    if args.config:
        try:
            with open(args.config) as fh:
                file_conf = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecParseError(f"cannot read config {args.config!r}: {exc}") from exc

    def pick(name, default=None):
        flag = getattr(args, name, None)
        if flag is not None:
            return flag
        if name in file_conf:
            return file_conf[name]
        return _DEFAULTS.get(name, default)

    sweep_text = pick("sweep")
    if not sweep_text:
        raise SpecParseError("missing --sweep")
    var, values = parse_sweep_range(sweep_text)
    return SweepSpec(
        protocol=args.protocol,
        sweep_var=var,
        sweep_values=values,
        code=pick("code"),
        noise=pick("noise"),
        dv_noise=pick("dv_noise"),
        herald=pick("herald"),
        variant=pick("variant"),
        gate_noise=pick("gate_noise"),
        cutoff=int(pick("cutoff")),
        seed=int(pick("seed")),
        depth=int(pick("depth")),
        budget=int(pick("budget")),
        starts=int(pick("starts")),
        out=str(pick("out")),
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = spec_from_args(args)
        # teleport needs no code/noise; other protocols validate inside
        csv_path, n_errors = run_sweep(spec)
    except SpecParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {csv_path} ({len(spec.sweep_values)} grid points)")
    if n_errors:
        print(f"{n_errors} grid point(s) failed; rows flagged", file=sys.stderr)
        return 5
    return 0


if __name__ == "__main__":
    sys.exit(main())
