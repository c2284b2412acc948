"""Batch runner: parameter sweeps over the repeater protocols.

Configuration files hold one ``key = value`` pair per line; ``#`` starts a
comment. Sweeps are declared as ``sweep = <variable> log|lin <start> <stop>
<count>``; several sweep lines span a cartesian grid (first line slowest).

Example::

    eta_c = 0.3
    L_tot = 100
    protocols = P1, P2, P3, P4
    engine = pauli
    samples = 10000
    sweep = beta log 1e-4 1e-2 16
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import qkd
from .layout import Protocol
from .protocols.config import DECODERS, ENGINES, SystemParams
from .qstate import RegisterError

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2

COLUMNS = (
    "protocol", "n", "L_tot_km", "L0_km", "beta", "delta", "eta_c", "eta_d", "tau_e_s",
    "tau_n_s", "Q_z", "Q_x", "acceptance", "secret_fraction", "rate_hz", "norm_key_rate",
    "engine", "samples", "seed", "stderr_Qz", "stderr_Qx",
)

SWEEPABLE = ("beta", "delta", "eta_c", "L_tot", "tau_e", "tau_n")
# no sensible default exists for these; they must be fixed or swept
REQUIRED = ("beta", "eta_c", "L_tot")
_PARAM_KEYS = tuple(f.name for f in fields(SystemParams))


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line, self.key = line, key


@dataclass(frozen=True)
class SweepAxis:
    variable: str
    scale: str
    start: float
    stop: float
    count: int

    def __post_init__(self):
        if self.variable not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.variable!r}; choose from {', '.join(SWEEPABLE)}")
        if self.scale not in ("log", "lin"):
            raise ValueError("grid scale must be 'log' or 'lin'")
        if self.count < 1:
            raise ValueError("grid needs at least one point")
        if self.scale == "log" and not (self.start > 0 and self.stop > 0):
            raise ValueError("log grids need positive endpoints")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class SweepSpec:
    base: SystemParams = field(default_factory=SystemParams)
    axes: tuple = ()
    protocols: tuple = ("P1", "P2", "P3", "P4")
    engine: str = "approx-analytic"
    decoder: str = "best-of-both"
    samples: int = 10_000
    seed: int = 0
    workers: int = 1
    format: str = "csv"
    out: str | None = None
    n_range: tuple = qkd.DEFAULT_N_RANGE
    n_max: int | None = None

    def grid(self) -> list[SystemParams]:
        """Parameter points in row-major order of the axes."""
        if not self.axes:
            return [self.base]
        combos = itertools.product(*(a.values() for a in self.axes))
        return [replace(self.base, **{a.variable: float(v) for a, v in zip(self.axes, combo)})
                for combo in combos]


def _parse_protocols(text: str) -> tuple:
    out = []
    for item in text.replace(",", " ").split():
        if item.lower() == qkd.REPEATERLESS:
            out.append(qkd.REPEATERLESS)
        else:
            out.append(Protocol.parse(item).value)
    if not out:
        raise ValueError("empty protocol list")
    return tuple(out)


def _parse_range(text: str) -> tuple:
    text = text.strip()
    if ".." in text:
        lo, hi = (int(t) for t in text.split(".."))
        values = tuple(range(lo, hi + 1))
    else:
        values = tuple(int(t) for t in text.replace(",", " ").split())
    if not values or min(values) < 1:
        raise ValueError("nesting levels must be a nonempty set of integers >= 1")
    return values


def _parse_axis(text: str) -> SweepAxis:
    parts = text.split()
    if len(parts) != 5:
        raise ValueError("expected '<variable> log|lin <start> <stop> <count>'")
    var, scale, start, stop, count = parts
    return SweepAxis(var, scale, float(start), float(stop), int(count))


_OPTION_PARSERS = {
    "protocols": _parse_protocols,
    "engine": str,
    "decoder": str,
    "samples": int,
    "seed": int,
    "workers": int,
    "format": str,
    "out": str,
    "n_range": _parse_range,
    "n_max": lambda t: None if t.strip().lower() in ("", "none") else int(t),
}


def _check_options(opts: dict, key_lines: dict) -> None:
    def fail(key, msg):
        raise ConfigError(msg, key_lines.get(key), key)

    if opts.get("engine", ENGINES[0]) not in ENGINES:
        fail("engine", f"unknown engine; choose from {', '.join(ENGINES)}")
    if opts.get("decoder", DECODERS[0]) not in DECODERS:
        fail("decoder", f"unknown decoder; choose from {', '.join(DECODERS)}")
    if opts.get("format", "csv") not in ("csv", "json"):
        fail("format", "format must be csv or json")
    for key in ("samples", "workers"):
        if key in opts and opts[key] < 1:
            fail(key, "must be a positive integer")
    if opts.get("n_max") is not None and opts["n_max"] < 1:
        fail("n_max", "must be a positive integer")


def parse_config(text: str, overrides: dict | None = None) -> SweepSpec:
    """Parse the key-value configuration format; ``overrides`` win over the file."""
    params: dict = {}
    opts: dict = {}
    axes: list = []
    key_lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not value:
            # empty optional field falls back to its default
            continue
        try:
            if key == "sweep":
                axes.append(_parse_axis(value))
            elif key in _PARAM_KEYS:
                if key in params:
                    raise ValueError("given twice")
                params[key] = float(value)
            elif key in _OPTION_PARSERS:
                opts[key] = _OPTION_PARSERS[key](value)
            else:
                raise ConfigError("unknown key", lineno, key)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc), lineno, key) from None
        key_lines[key] = lineno
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        opts[key] = _parse_protocols(value) if key == "protocols" and isinstance(value, str) else value
    swept = [a.variable for a in axes]
    if len(set(swept)) != len(swept):
        raise ConfigError("a variable is swept twice", key_lines.get("sweep"), "sweep")
    for key in params:
        if key in swept:
            raise ConfigError("variable is both fixed and swept", key_lines[key], key)
    for key in REQUIRED:
        if key not in params and key not in swept:
            raise ConfigError("missing required field", None, key)
    _check_options(opts, key_lines)
    try:
        base = SystemParams(**params)
        for axis in axes:
            for v in axis.values():
                replace(base, **{axis.variable: float(v)})
    except ValueError as exc:
        msg = str(exc)
        bad = next((k for k in _PARAM_KEYS if msg.startswith(k)), None)
        line = key_lines.get(bad) if bad else key_lines.get("sweep")
        raise ConfigError(msg, line, bad or ("sweep" if axes else None)) from None
    return SweepSpec(base=base, axes=tuple(axes), **opts)


# -- running ------------------------------------------------------------------


@dataclass(frozen=True)
class Row:
    """One emitted dataset row (mirrors :data:`COLUMNS`)."""

    values: tuple

    def as_dict(self) -> dict:
        return dict(zip(COLUMNS, self.values))


def record_row(rec: qkd.KeyRateRecord) -> Row:
    return Row((
        rec.protocol, rec.n, rec.L_tot, rec.L0, rec.beta, rec.delta, rec.eta_c, rec.eta_d,
        rec.tau_e, rec.tau_n, rec.Q_z, rec.Q_x, rec.acceptance, rec.r_inf, rec.R, rec.R_qkd,
        rec.engine, rec.samples, rec.seed, rec.stderr_Qz, rec.stderr_Qx,
    ))


def _infeasible_row(protocol: str, params: SystemParams, engine: str) -> Row:
    nan = float("nan")
    return Row((protocol, 0, params.L_tot, nan, params.beta, params.delta, params.eta_c,
                params.eta_d, params.tau_e, params.tau_n, nan, nan, 0.0, 0.0, 0.0, 0.0,
                engine, 0, 0, nan, nan))


def _run_point(spec: SweepSpec, index: int, params: SystemParams) -> tuple[list, list]:
    rows, problems = [], []
    for pi, protocol in enumerate(spec.protocols):
        try:
            rec = qkd.optimize_nesting(
                protocol, params, spec.n_range, seed=(spec.seed, index, pi),
                engine=spec.engine, decoder=spec.decoder, samples=spec.samples,
                n_max=spec.n_max,
            )
            rows.append(record_row(rec))
        except (RegisterError, MemoryError) as exc:
            problems.append(f"point {index} {protocol}: {exc}")
            rows.append(_infeasible_row(protocol, params, spec.engine))
    return rows, problems


def run_sweep(spec: SweepSpec, progress=None) -> tuple[list[Row], list[str]]:
    """Rows ordered by grid index, then protocol; plus per-point problems.

    Each point gets Monte Carlo streams keyed by ``(seed, point, protocol, n)``,
    so the output does not depend on the number of workers.
    """
    grid = spec.grid()
    results: list = []
    if spec.workers > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [pool.submit(_run_point, spec, i, p) for i, p in enumerate(grid)]
            for i, fut in enumerate(futures):
                results.append(fut.result())
                _report(progress, i + 1, len(grid))
    else:
        for i, p in enumerate(grid):
            results.append(_run_point(spec, i, p))
            _report(progress, i + 1, len(grid))
    rows = [r for rs, _ in results for r in rs]
    problems = [m for _, ms in results for m in ms]
    return rows, problems


def _report(stream, done: int, total: int) -> None:
    if stream is not None:
        print(f"[{done}/{total}] grid points done", file=stream, flush=True)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.9g}"
    return v


def _json_value(v):
    if isinstance(v, float):
        v = float(f"{v:.9g}")
        return v if math.isfinite(v) else None
    return v


def render(rows: list[Row], fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_fmt(v) for v in r.values])
        return buf.getvalue()
    if fmt == "json":
        data = [{k: _json_value(v) for k, v in r.as_dict().items()} for r in rows]
        return json.dumps(data, indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit(rows: list[Row], fmt: str = "csv", path: str | None = None) -> str:
    """Write the dataset to ``path`` (or return it when ``path`` is None)."""
    if not rows:
        raise ValueError("empty dataset")
    text = render(rows, fmt)
    if path is not None:
        Path(path).write_text(text)
    return text


def read_dataset(text: str, fmt: str = "csv") -> list[dict]:
    """Parse an emitted dataset back into dictionaries with typed values."""
    ints = {"n", "samples", "seed"}
    strs = {"protocol", "engine"}

    def conv(k, v):
        if v is None:
            return float("nan")
        if k in strs:
            return v
        return int(v) if k in ints else float(v)

    if fmt == "csv":
        return [{k: conv(k, v) for k, v in row.items()} for row in csv.DictReader(io.StringIO(text))]
    return [{k: conv(k, v) for k, v in row.items()} for row in json.loads(text)]


# -- figure datasets -----------------------------------------------------------

FIGURE_SEED = 7

FIGURES = {
    # beta sweeps at fixed (eta_c, L_tot), nominal coherence times
    "beta_L300_eta0.3": "eta_c = 0.3\nL_tot = 300\nsweep = beta log 1e-4 1e-2 16\n",
    "beta_L500_eta0.5": "eta_c = 0.5\nL_tot = 500\nsweep = beta log 1e-4 1e-2 16\n",
    "beta_L200_eta0.3": "eta_c = 0.3\nL_tot = 200\nsweep = beta log 1e-4 1e-2 16\n",
    "beta_L300_eta0.5": "eta_c = 0.5\nL_tot = 300\nsweep = beta log 1e-4 1e-2 16\n",
    "beta_L100_eta0.3": "eta_c = 0.3\nL_tot = 100\nsweep = beta log 1e-4 1e-2 16\n",
    "beta_L200_eta0.5": "eta_c = 0.5\nL_tot = 200\nsweep = beta log 1e-4 1e-2 16\n",
    "beta_long_eta0.7": "eta_c = 0.7\nsweep = L_tot lin 200 500 4\nsweep = beta log 1e-5 1e-3 5\n",
    # distance sweeps of the encoded protocols
    "distance_eta0.5": "protocols = P1, P2\nbeta = 1e-3\neta_c = 0.5\nsweep = L_tot lin 100 2000 20\nn_range = 1..9\n",
    "distance_eta0.5_long_coherence": (
        "protocols = P1, P2\nbeta = 1e-3\neta_c = 0.5\ntau_e = 0.1\ntau_n = 10\n"
        "sweep = L_tot lin 100 2000 20\nn_range = 1..9\n"
    ),
    "repeaterless": "protocols = repeaterless\nbeta = 1e-3\neta_c = 0.3\nsweep = L_tot lin 10 400 40\n",
}


def run_figures(out_dir: str, names=None, engine=None, samples=None, workers=1,
                progress=None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in names or FIGURES:
        if name not in FIGURES:
            raise ConfigError(f"unknown figure dataset {name!r}")
        spec = parse_config(FIGURES[name], {"engine": engine, "samples": samples,
                                             "seed": FIGURE_SEED, "workers": workers})
        if progress is not None:
            print(f"{name}: {len(spec.grid())} points", file=progress, flush=True)
        rows, _ = run_sweep(spec, progress)
        path = out / f"{name}.csv"
        emit(rows, "csv", str(path))
        written.append(path)
    return written


# -- entry point ----------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--engine", choices=ENGINES)
    p.add_argument("--samples", type=int)
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nvqr", description="NV-center repeater key-rate sweeps")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a sweep described by a config file")
    run.add_argument("--config", help="key = value configuration file")
    run.add_argument("--protocol", help="comma-separated protocols, e.g. P1,P4,repeaterless")
    _add_common(run)
    run.add_argument("--seed", type=int)
    run.add_argument("--format", choices=("csv", "json"))
    run.add_argument("--out", help="output file (default: standard output)")
    fig = sub.add_parser("figures", help="regenerate the bundled figure datasets")
    fig.add_argument("--out-dir", default="figures")
    fig.add_argument("--only", nargs="*", help="subset of dataset names")
    _add_common(fig)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "figures":
            paths = run_figures(args.out_dir, args.only, args.engine, args.samples,
                                args.workers or 1, sys.stderr)
            for p in paths:
                print(p)
            return EXIT_OK
        text = Path(args.config).read_text() if args.config else ""
        overrides = {"protocols": args.protocol, "engine": args.engine, "samples": args.samples,
                     "seed": args.seed, "workers": args.workers, "format": args.format,
                     "out": args.out}
        spec = parse_config(text, overrides)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rows, problems = run_sweep(spec, sys.stderr)
    text = emit(rows, spec.format, spec.out)
    if spec.out is None:
        sys.stdout.write(text)
    for msg in problems:
        print(f"infeasible: {msg}", file=sys.stderr)
    return EXIT_INFEASIBLE if problems else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
