"""Command-line front end: ``lrdlab generate | verify | constants | report``.

Exit codes: 0 success, 1 failed pass flags, 2 invalid configuration,
3 numerical failure, 4 I/O error.  Data and tables go to stdout,
diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DataError, ExperimentError, NumericalError, ParameterError
from .experiments import KINDS, ExperimentPlan, default_plan, reference_exponents, run_experiment
from .gauss_lrd import DEFAULT_TRUNCATION, InnovationStream, generate_path, make_model
from .hermite import compute_b_alpha, compute_kappa_alpha, gamma_exponent
from .report import format_report, load_report, write_columns, write_report

__all__ = ["RunConfig", "load_config", "main"]

EXIT_OK, EXIT_FAILED, EXIT_INVALID, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4
OUTPUT_ENV = "LRDLAB_OUTPUT_DIR"
DEFAULT_OUTPUT = "lrdlab-output"


def _int_list(text):
    return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)


def _bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    """Flat run configuration; ``None`` means "use the experiment default"."""
    kind: str | None = None
    alpha: float | None = None
    subordinator: str | None = None
    n: int | None = None
    horizons: tuple | None = None
    replicates: int | None = None
    base_seed: int | None = None
    truncation: int | None = None
    tolerance: float | None = None
    margin: float | None = None
    t: float | None = None
    points: int | None = None
    normalization: str | None = None
    output_dir: str | None = None
    workers: int | None = None
    figures: bool | None = None

    _CONVERTERS = {
        "kind": str, "alpha": float, "subordinator": str, "n": int, "horizons": _int_list,
        "replicates": int, "base_seed": int, "truncation": int, "tolerance": float,
        "margin": float, "t": float, "points": int, "normalization": str, "output_dir": str,
        "workers": int, "figures": _bool,
    }

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        unknown = set(values) - set(cls._CONVERTERS)
        if unknown:
            raise ParameterError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        out = {}
        for key, raw in values.items():
            if raw is None:
                continue
            try:
                out[key] = cls._CONVERTERS[key](raw) if isinstance(raw, str) else raw
            except ValueError as exc:
                raise ParameterError(f"bad value for {key}: {raw!r}") from exc
        return cls(**out)

    def merged(self, other: "RunConfig") -> "RunConfig":
        """``other`` wins wherever it is set."""
        updates = {k: v for k, v in dataclasses.asdict(other).items() if v is not None}
        return dataclasses.replace(self, **updates)

    def plan(self) -> ExperimentPlan:
        if self.kind is None:
            raise ParameterError("no experiment kind given")
        if self.kind not in KINDS:
            raise ParameterError(f"unknown experiment kind {self.kind!r}")
        keys = {f.name for f in dataclasses.fields(ExperimentPlan)} - {"kind"}
        overrides = {k: getattr(self, k) for k in keys}
        return default_plan(self.kind, **overrides).validate()

    def output_path(self) -> Path:
        if self.output_dir is not None:
            return Path(self.output_dir)
        return Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT))


def load_config(path) -> RunConfig:
    """Read a flat ``key = value`` file (``#`` comments, no sections)."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ParameterError(f"cannot parse {path}: {exc}") from exc
    return RunConfig.from_mapping(dict(parser["run"]))


def _config_from_args(args) -> RunConfig:
    base = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    flags = {k: getattr(args, k, None) for k in RunConfig._CONVERTERS}
    return base.merged(RunConfig.from_mapping(flags))


# ---------------------------------------------------------------------------
# subcommands

def cmd_generate(cfg: RunConfig) -> int:
    """Write ``path.csv``, ``series.csv``, ``bundle.csv`` and ``metadata.json``."""
    from .fbm import generate_coupled
    from .processes import ProcessBundle, subordinate
    from .subordinators import get_subordinator

    alpha = 0.4 if cfg.alpha is None else cfg.alpha
    n = 2**12 if cfg.n is None else cfg.n
    truncation = DEFAULT_TRUNCATION if cfg.truncation is None else cfg.truncation
    seed = 20240601 if cfg.base_seed is None else cfg.base_seed
    if n < 1:
        raise ParameterError("n must be positive")
    model = make_model(alpha, truncation)
    sub = get_subordinator(cfg.subordinator or "identity")
    normalization = cfg.normalization or "mvn"
    if normalization not in ("mvn", "calibrated"):
        raise ParameterError(f"unknown normalization {normalization!r}")

    stream = InnovationStream(seed)
    path = generate_path(model, n, stream)
    series = subordinate(path, sub)
    fbm = generate_coupled(model, stream, n, normalization)
    bundle = ProcessBundle(series, alpha)

    t = np.arange(n + 1, dtype=float)
    cols = {"t": t.astype(int).tolist(),
            "partial_sum": np.asarray(bundle.partial_sum(t)).tolist(),
            "centered_sum": np.asarray(bundle.centered_sum(t)).tolist(),
            "coupled_fbm": fbm.values.tolist()}
    if sub.positive and sub.mu > 0:
        ok = sub.mu * t < bundle._c[-1]
        counting = np.full(t.size, None, dtype=object)
        z = np.full(t.size, None, dtype=object)
        counting[ok] = np.asarray(bundle.counting(sub.mu * t[ok])).tolist()
        z[ok] = np.asarray(bundle.z_process(t[ok])).tolist()
        cols["counting"] = counting.tolist()
        cols["z"] = z.tolist()

    out = cfg.output_path()
    out.mkdir(parents=True, exist_ok=True)
    index = list(range(1, n + 1))
    write_columns(out / "path.csv", {"index": index, "value": path.values.tolist()})
    write_columns(out / "series.csv", {"index": index, "value": series.y.tolist()})
    write_columns(out / "bundle.csv", cols)
    meta = {
        "version": __version__,
        "model": model.to_dict(),
        "innovations": stream.ref(),
        "subordinator": sub.name,
        "mu": sub.mu,
        "n": n,
        "coupled_fbm": fbm.coupling_ref,
    }
    (out / "metadata.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    print(out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    plan = cfg.plan()
    workers = 0 if cfg.workers is None else cfg.workers
    report = run_experiment(plan, workers=workers)
    paths = write_report(report, cfg.output_path(), figures=cfg.figures is not False)
    sys.stdout.write(format_report(report))
    for name, p in paths.items():
        print(f"wrote {name}: {p}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAILED


def constants_table(alpha: float) -> list[tuple[str, float]]:
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha!r}")
    rows = [("alpha", alpha), ("b_alpha", compute_b_alpha(alpha)),
            ("kappa_alpha", compute_kappa_alpha(alpha)), ("gamma", gamma_exponent(alpha)),
            ("hurst", 1.0 - alpha / 2.0)]
    rows += [(k, v) for k, v in reference_exponents(alpha).items() if k != "gamma"]
    return rows


def cmd_constants(alpha: float) -> int:
    for name, value in constants_table(alpha):
        print(f"{name:<14} {value:.10g}")
    return EXIT_OK


def cmd_report(path) -> int:
    report = load_report(path)
    sys.stdout.write(format_report(report))
    return EXIT_OK if report.passed else EXIT_FAILED


# ---------------------------------------------------------------------------

def _add_run_options(p, with_kind: bool):
    p.add_argument("--config", help="flat key = value configuration file")
    if with_kind:
        p.add_argument("kind", nargs="?", help="experiment kind: " + ", ".join(KINDS))
    p.add_argument("--alpha", type=float)
    p.add_argument("--subordinator", help="e.g. exp, identity, lognormal:mu=0,sigma=0.5")
    p.add_argument("--n", type=int)
    p.add_argument("--horizons", type=_int_list, help="comma-separated increasing integers")
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", dest="base_seed", type=int)
    p.add_argument("--truncation", type=int)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--margin", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--normalization", choices=("mvn", "calibrated"))
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--workers", type=int, help="0 uses every available core")
    p.add_argument("--no-figures", dest="figures", action="store_const", const=False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lrdlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"lrdlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_options(sub.add_parser("generate", help="write one path, series and bundle"), False)
    _add_run_options(sub.add_parser("verify", help="run an experiment and write its report"), True)
    c = sub.add_parser("constants", help="print b_alpha, kappa_alpha, gamma and exponents")
    c.add_argument("alpha", type=float)
    r = sub.add_parser("report", help="pretty-print a report JSON file")
    r.add_argument("path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "constants":
            return cmd_constants(args.alpha)
        if args.command == "report":
            return cmd_report(args.path)
        cfg = _config_from_args(args)
        if args.command == "generate":
            return cmd_generate(cfg)
        return cmd_verify(cfg)
    except (ParameterError, DataError) as exc:
        print(f"lrdlab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, ExperimentError) as exc:
        print(f"lrdlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"lrdlab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
