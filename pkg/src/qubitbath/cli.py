"""Command-line entry point: ``qubitbath {spectrum,rates,dynamics,sweep,validate}``.

Exit status is 0 on success, 1 when ``validate`` finds a disagreement (or a
numerical routine fails to certify its result) and 2 for input errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    RunConfig,
    load_config,
    parse_element,
    parse_n_range,
)
from .dynamics import (
    FieldSampler,
    ReducedState,
    default_time_grid,
    hamming_regression,
    propagate_effective,
    resonance_model,
    scaling_sweep,
)
from .errors import (
    AmbiguousGroupingError,
    EigensolverError,
    GenericityError,
    InvalidInputError,
    QuadratureError,
    QubitBathError,
    ResourceLimitError,
)
from .oracle import (
    OracleKernels,
    build_level_shift_numeric,
    crosscheck,
    numeric_matrix,
    plemelj_extrapolation,
    plemelj_split,
)
from .plotting import emit_plot
from .register import all_configs, build_spectral_table, spins_to_str
from .reservoir import CouplingScalars
from .resonance import (
    build_level_shift,
    decoherence_rates,
    gamma0_interacting,
    interacting_shift,
    register_y0,
)

log = logging.getLogger("qubitbath")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
COMMANDS = ("spectrum", "rates", "dynamics", "sweep", "validate")


def _clean(obj: Any) -> Any:
    """Make ``obj`` strict-JSON serialisable (non-finite floats become null)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def dump_json(payload: dict[str, Any]) -> str:
    return json.dumps(_clean(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_json(path: Path, payload: dict[str, Any]) -> Path:
    path.write_text(dump_json(payload))
    return path


def _envelope(cfg: RunConfig, command: str) -> dict[str, Any]:
    return {"command": command, "config": cfg.data, "seed": cfg.seed, "version": __version__}


def _description(cfg: RunConfig) -> str:
    return json.dumps({"config": cfg.data, "seed": cfg.seed}, sort_keys=True)


def _setup(cfg: RunConfig):
    params = cfg.params()
    tol = cfg.tolerances
    table = build_spectral_table(params, tol=tol["group"], c0=tol["c0"], max_n=cfg.max_n)
    scalars = CouplingScalars(params.form1, params.form2, params.beta, tol=tol["quad"])
    return params, table, scalars


def _rate_report(params, table, scalars, quad_tol):
    if not params.interacting and table.generic:
        return decoherence_rates(table, params, scalars), None
    model = resonance_model(table, params, scalars, quad_tol=quad_tol)
    return decoherence_rates(table, params, scalars, shifts=model.shifts), model


def cmd_spectrum(cfg: RunConfig, out: Path, **_) -> int:
    params, table, _ = _setup(cfg)
    payload = _envelope(cfg, "spectrum")
    payload["b_fields"] = params.b_fields
    payload["spectrum"] = table.to_dict()
    _write_json(out / "spectrum.json", payload)
    for w in table.warnings:
        log.warning(w)
    return EXIT_OK


def cmd_rates(cfg: RunConfig, out: Path, **_) -> int:
    params, table, scalars = _setup(cfg)
    report, _ = _rate_report(params, table, scalars, cfg.tolerances["quad"])
    payload = _envelope(cfg, "rates")
    payload["b_fields"] = params.b_fields
    payload["generic"] = table.generic
    payload["warnings"] = list(table.warnings)
    payload["rates"] = report.to_dict()
    _write_json(out / "rates.json", payload)
    emit_plot(
        "rates",
        {"e": [g.e_value for g in report.groups], "gamma": [g.gamma for g in report.groups]},
        out / "rates.svg",
        description=_description(cfg),
    )
    return EXIT_OK


def _initial_state(cfg: RunConfig, n: int) -> ReducedState:
    kind = cfg.data["dynamics"]["initial_state"]
    if kind == "plus":
        return ReducedState.product_plus(n)
    return ReducedState.random(n, np.random.default_rng(cfg.seed))


def _times(cfg: RunConfig, report, table) -> np.ndarray:
    grid = cfg.data["dynamics"]["times"]
    if grid is None:
        rates = [g.gamma for g in report.groups]
        return default_time_grid(rates, table.gap, cfg.data["dynamics"]["num_times"])
    if isinstance(grid, list):
        return np.array(grid, dtype=float)
    if grid.get("spacing", "linear") == "log":
        if grid["start"] <= 0:
            raise ConfigError("dynamics.times.start must be positive for log spacing")
        return np.geomspace(grid["start"], grid["stop"], grid["num"])
    return np.linspace(grid["start"], grid["stop"], grid["num"])


def _default_elements(n: int) -> list[tuple[int, int]]:
    dim = 2**n
    if n <= 3:
        return [(s, t) for s in range(dim) for t in range(dim)]
    return [(0, t) for t in range(dim)] + [(s, s) for s in range(1, dim)]


def cmd_dynamics(cfg: RunConfig, out: Path, elements: Sequence[str] | None = None, **_) -> int:
    params, table, scalars = _setup(cfg)
    n = params.n
    texts = elements if elements is not None else cfg.data["dynamics"]["elements"]
    chosen = [parse_element(t, n) for t in texts] if texts else _default_elements(n)

    quad = cfg.tolerances["quad"]
    report, model = _rate_report(params, table, scalars, quad)
    if model is None:
        model = resonance_model(table, params, scalars, quad_tol=quad)
    times = _times(cfg, report, table)
    rho0 = _initial_state(cfg, n)
    traj = propagate_effective(rho0, table, model, times)

    configs = all_configs(n)
    labels = [spins_to_str(c) for c in configs]
    path = out / "trajectory.csv"
    with path.open("w", newline="") as fh:
        fh.write(f"# config: {json.dumps(_clean(cfg.data), sort_keys=True)}\n")
        fh.write(f"# seed: {cfg.seed}\n")
        fh.write(
            f"# max hermiticity deviation: {traj.hermiticity_dev.max():.3e}; "
            f"max trace deviation: {traj.trace_dev.max():.3e}\n"
        )
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "sigma", "tau", "re", "im", "abs"])
        for k, t in enumerate(traj.times):
            for s, u in chosen:
                v = traj.values[k, s, u]
                writer.writerow(
                    [repr(float(t)), labels[s], labels[u], repr(float(v.real)), repr(float(v.imag)), repr(float(abs(v)))]
                )
    series = {
        f"{labels[s]}|{labels[u]}": np.abs(traj.values[:, s, u]) for s, u in chosen[:8]
    }
    emit_plot("trajectory", {"times": traj.times, "series": series}, out / "trajectory.svg", description=_description(cfg))
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path, n_range: tuple[int, int] | None = None, **_) -> int:
    sweep = cfg.data["sweep"]
    lo, hi = n_range if n_range is not None else sweep["n_range"]
    if hi > cfg.max_n:
        raise ResourceLimitError(f"sweep upper bound {hi} exceeds the cap {cfg.max_n}")
    base = cfg.params()
    low, high = cfg.sampler_bounds()
    sampler = FieldSampler(low=low, high=high, seed=cfg.seed)
    report = scaling_sweep(base, range(lo, hi + 1), sampler, instances=sweep["instances"], quad_tol=cfg.tolerances["quad"])
    payload = _envelope(cfg, "sweep")
    payload["n_range"] = [lo, hi]
    payload["scaling"] = report.to_dict()
    if base.lambda2 != 0 and sweep["hamming_n"] >= 2:
        reg = hamming_regression(base, sweep["hamming_n"], FieldSampler(low, high, cfg.seed), sweep["hamming_instances"])
        payload["hamming_regression"] = reg.to_dict()
    _write_json(out / "scaling.json", payload)
    emit_plot(
        "scaling",
        {
            "n": report.n_values,
            "series": {
                "dephasing max rate": report.dephasing_max_rate,
                "exchange max rate": report.exchange_max_rate,
                "thermalisation rate": report.zero_rate,
            },
            "slopes": {
                "dephasing max rate": report.dephasing_slope,
                "exchange max rate": report.exchange_slope,
            },
        },
        out / "scaling.svg",
        description=_description(cfg),
    )
    return EXIT_OK


def _validate_free(cfg, params, table, scalars, kernels, tol):
    rows = []
    for group in table.groups:
        if not group.pattern_consistent:
            rows.append({"group_e": group.e_value, "skipped": "mixed flip patterns"})
            continue
        closed = build_level_shift(group, params, scalars)
        numeric = build_level_shift_numeric(group, params, kernels=kernels)
        rows.append(crosscheck(closed, numeric, tol).to_dict())
    extra = {}
    if params.lambda2 != 0 and all(b > 0 for b in params.b_fields):
        zero = table.groups[table.zero_group()]
        values = build_level_shift_numeric(zero, params, kernels=kernels).eigenvalues
        small = np.abs(values) <= 1e-10
        expected = params.lambda2**2 * register_y0(params, scalars)
        measured = float(values[~small].imag.min()) if (~small).any() else 0.0
        extra["thermalisation"] = {
            "lambda2_sq_y0": expected,
            "oracle_min_nonzero_im": measured,
            "zero_modes": int(small.sum()),
            "pass": bool(abs(expected - measured) <= tol and small.sum() == 1),
        }
    return rows, extra


def _validate_interacting(cfg, params, table, scalars, kernels, tol):
    rows = []
    configs = all_configs(params.n)
    extra = {}
    for group in table.groups:
        matrix = numeric_matrix(group, params, kernels)
        if abs(group.e_value) <= table.tol:
            values = np.linalg.eigvals(matrix)
            nonzero = values[np.abs(values) > 1e-10]
            extra["thermalisation"] = {
                "formula_gamma0": gamma0_interacting(params, scalars),
                "oracle_min_nonzero_im": float(nonzero.imag.min()) if nonzero.size else 0.0,
                "zero_modes": int(values.size - nonzero.size),
                "note": "reported only; not part of the pass criterion",
            }
            continue
        off = matrix - np.diag(np.diag(matrix))
        row = {"group_e": group.e_value, "max_offdiag": float(np.max(np.abs(off)))}
        passed = row["max_offdiag"] <= 1e-8
        if group.size == 1:
            shift = interacting_shift(configs[group.sigma_idx[0]], configs[group.tau_idx[0]], params, scalars)
            row["max_eig_dev"] = float(abs(matrix[0, 0] - shift.delta))
            passed = passed and row["max_eig_dev"] <= tol
        row["pass"] = bool(passed)
        rows.append(row)
    return rows, extra


def cmd_validate(cfg: RunConfig, out: Path, **_) -> int:
    params, table, scalars = _setup(cfg)
    tol = cfg.tolerances["crosscheck"]
    kernels = OracleKernels(params.form1, params.form2, params.beta, cfg.tolerances["quad"])
    start = time.perf_counter()
    if params.interacting:
        rows, extra = _validate_interacting(cfg, params, table, scalars, kernels, tol)
    else:
        rows, extra = _validate_free(cfg, params, table, scalars, kernels, tol)

    # analytic Plemelj split against the finite-eps limit on an exchange weight
    alpha = 2.0 * float(np.max(params.b_fields)) or 1.0
    half = alpha + 4.0 * params.form2.cutoff_scale
    weight = lambda u: kernels.weight(u, -1)  # noqa: E731
    split = plemelj_split(weight, alpha, (-half, half))
    extrapolated, _ = plemelj_extrapolation(weight, alpha, (-half, half))
    extra["plemelj"] = {
        "split": [split.real, split.imag],
        "extrapolated": [extrapolated.real, extrapolated.imag],
        "deviation": abs(split - extrapolated),
        "pass": bool(abs(split - extrapolated) <= 1e-6),
    }

    passed = all(r.get("pass", True) for r in rows) and all(v.get("pass", True) for v in extra.values())
    payload = _envelope(cfg, "validate")
    payload["b_fields"] = params.b_fields
    payload["tolerance"] = tol
    payload["groups"] = rows
    payload["checks"] = extra
    payload["pass"] = passed
    _write_json(out / "crosscheck.json", payload)
    log.info("validate: %s in %.2fs", "PASS" if passed else "FAIL", time.perf_counter() - start)
    print("PASS" if passed else "FAIL")
    return EXIT_OK if passed else EXIT_FAIL


HANDLERS = {
    "spectrum": cmd_spectrum,
    "rates": cmd_rates,
    "dynamics": cmd_dynamics,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def run(
    command: str,
    config: RunConfig,
    out: str | Path = "out",
    elements: Sequence[str] | None = None,
    n_range: tuple[int, int] | None = None,
) -> int:
    """Execute one command; returns the process exit status."""
    if command not in HANDLERS:
        log.error("unknown command %r", command)
        return EXIT_INPUT
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[command](config, out, elements=elements, n_range=n_range)
    except (QuadratureError, EigensolverError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_FAIL
    except (InvalidInputError, ResourceLimitError, AmbiguousGroupingError, GenericityError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except QubitBathError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qubitbath",
        description="Resonance energies, decay rates and reduced dynamics of a qubit register in a thermal bath.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--out", default="out", help="output directory (default: %(default)s)")
    parser.add_argument("--seed", type=int, help="override the random seed")
    parser.add_argument("--tol", type=float, help="pass threshold for validate")
    parser.add_argument("--elements", help='dynamics elements, e.g. "+-|-+,++|--"')
    parser.add_argument("--n-range", help="sweep register sizes, e.g. 1..6")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if args.tol is not None and not args.tol > 0:
            raise ConfigError("--tol must be positive")
        cfg = RunConfig.from_dict(load_config(args.config), seed=args.seed, tol=args.tol)
        elements = [e for e in args.elements.split(",") if e.strip()] if args.elements else None
        n_range = parse_n_range(args.n_range) if args.n_range else None
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return run(args.command, cfg, args.out, elements=elements, n_range=n_range)


if __name__ == "__main__":
    sys.exit(main())
