"""Command-line front end: ``estimate``, ``verify`` and ``simulate``.

Options can come from a JSON config file (``--config``); flags given on the
command line override the file. The report is a JSON document with
top-level keys ``config``, ``estimates``, ``identities``, ``monte_carlo``
and ``meta``; floats are written with 17 significant digits.

Exit status: 0 success, 1 identity check failed, 2 usage or configuration
error, 3 data or evaluation error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .data import Dataset
from .design import build_basis
from .errors import ConfigError, DataError, MixedBiasError
from .estimators import estimate_bundle, verify_identities
from .functionals import DEFAULT_BINDINGS, FUNCTIONALS, make_functional
from .kernels import BACKEND
from .nuisance import LinearNuisance, fit_nuisance, parse_nuisance
from .simulation import (
    DEFAULT_FUNCTIONAL,
    ESTIMATORS,
    make_dgp,
    monte_carlo,
    sample,
    true_nuisances,
)

EXIT_OK, EXIT_IDENTITY, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3
COMMANDS = ("estimate", "verify", "simulate")


def load_csv(path) -> Dataset:
    """Read a comma-separated numeric file with a header row.

    No quoting is recognised. Row numbers in error messages count data
    rows from 1 (the header is row 0).
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not valid UTF-8 ({exc})") from None
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    if any(not h for h in header):
        raise DataError(f"{path}: empty column name in header")
    dupes = sorted({h for h in header if header.count(h) > 1})
    if dupes:
        raise DataError(f"{path}: duplicate header name(s) {', '.join(dupes)}")
    if len(lines) == 1:
        raise DataError(f"{path}: header only, dataset is empty")
    columns = {h: [] for h in header}
    for row_no, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != len(header):
            raise DataError(
                f"{path}: row {row_no} has {len(cells)} fields, header has {len(header)}"
            )
        for name, cell in zip(header, cells):
            try:
                value = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: row {row_no}, column {name!r}: non-numeric cell {cell.strip()!r}"
                ) from None
            if not math.isfinite(value):
                raise DataError(
                    f"{path}: row {row_no}, column {name!r}: non-finite value {cell.strip()!r}"
                )
            columns[name].append(value)
    return Dataset(columns)


@dataclass
class RunConfig:
    command: str
    functional: Optional[str] = None
    bindings: dict = field(default_factory=lambda: dict(DEFAULT_BINDINGS))
    basis: str = "intercept,raw"
    nuisance_a: str = "ols"
    nuisance_b: str = "balanced"
    data: Optional[str] = None
    dgp: Optional[str] = None
    dgp_params: dict = field(default_factory=dict)
    n: list = field(default_factory=lambda: [1000])
    reps: int = 200
    estimator: str = "one-step"
    seed: int = 0
    rtol: float = 1e-8
    out: Optional[str] = None

    def validate(self):
        problems = []
        if self.command not in COMMANDS:
            problems.append(f"unknown command {self.command!r}")
        if self.functional is not None and self.functional not in FUNCTIONALS:
            problems.append(
                f"unknown functional {self.functional!r}; choose from {sorted(FUNCTIONALS)}"
            )
        if self.command in ("estimate", "verify") and self.data is None and self.dgp is None:
            problems.append(f"{self.command} needs --data or --dgp")
        if self.command == "simulate":
            if self.dgp is None:
                problems.append("simulate needs --dgp")
            if self.data is not None:
                problems.append("simulate does not read --data")
        if self.data is not None and self.dgp is not None:
            problems.append("give only one of --data and --dgp")
        if self.dgp is not None and self.dgp not in DEFAULT_FUNCTIONAL:
            problems.append(f"unknown DGP {self.dgp!r}; choose from {sorted(DEFAULT_FUNCTIONAL)}")
        if self.estimator not in ESTIMATORS:
            problems.append(f"unknown estimator {self.estimator!r}; choose from {list(ESTIMATORS)}")
        if not self.n or any(not isinstance(k, int) or k < 1 for k in self.n):
            problems.append(f"--n must be positive integers, got {self.n}")
        if not isinstance(self.reps, int) or self.reps < 2:
            problems.append(f"--reps must be an integer >= 2, got {self.reps}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            problems.append(f"--seed must be an unsigned 64-bit integer, got {self.seed}")
        if not (isinstance(self.rtol, float) and self.rtol > 0):
            problems.append(f"rtol must be a positive number, got {self.rtol}")
        for side, text in (("a", self.nuisance_a), ("b", self.nuisance_b)):
            try:
                spec = parse_nuisance(text)
            except ConfigError as exc:
                problems.extend(f"nuisance-{side}: {v}" for v in exc.violations)
                continue
            if spec.method == "true" and self.dgp is None:
                problems.append(f"nuisance-{side} 'true' needs --dgp")
        try:
            functional = self.resolved_functional()
        except MixedBiasError as exc:
            problems.append(str(exc))
        else:
            bases = [self.basis]
            for text in (self.nuisance_a, self.nuisance_b):
                try:
                    override = parse_nuisance(text).basis
                except ConfigError:
                    continue
                if override:
                    bases.append(override)
            for spec in bases:
                try:
                    build_basis(spec, functional.z_arity)
                except MixedBiasError as exc:
                    problems.append(f"basis {spec!r}: {exc}")
        if self.dgp in DEFAULT_FUNCTIONAL:
            try:
                make_dgp(self.dgp, self.dgp_params)
            except MixedBiasError as exc:
                problems.append(str(exc))
        if problems:
            raise ConfigError(problems)
        return self

    def functional_kind(self) -> str:
        if self.functional:
            return self.functional
        if self.dgp in DEFAULT_FUNCTIONAL:
            return DEFAULT_FUNCTIONAL[self.dgp]
        return "cf-mean"

    def resolved_functional(self):
        return make_functional(self.functional_kind(), self.bindings)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["functional"] = self.functional_kind()
        return out


def _parse_bindings(items) -> dict:
    bindings: dict = {}
    problems = []
    for item in items:
        role, sep, cols = item.partition("=")
        role = role.strip()
        names = [c.strip() for c in cols.split(",") if c.strip()]
        if not sep or not role or not names:
            problems.append(f"bad --bind {item!r}; expected ROLE=COLUMN")
            continue
        if role == "L":
            bindings.setdefault("L", []).extend(names)
        elif len(names) != 1:
            problems.append(f"role {role} binds exactly one column")
        else:
            bindings[role] = names[0]
    if problems:
        raise ConfigError(problems)
    if isinstance(bindings.get("L"), list) and len(bindings["L"]) == 1:
        bindings["L"] = bindings["L"][0]
    return bindings


def _parse_params(items) -> dict:
    params = {}
    problems = []
    for item in items:
        key, sep, value = item.partition("=")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            problems.append(f"bad --dgp-param {item!r}; expected KEY=NUMBER")
            continue
        if not sep or not key.strip():
            problems.append(f"bad --dgp-param {item!r}; expected KEY=NUMBER")
    if problems:
        raise ConfigError(problems)
    return params


def _parse_n(value) -> list:
    if isinstance(value, int):
        return [value]
    if isinstance(value, list):
        return value
    try:
        return [int(x) for x in str(value).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad --n {value!r}; expected comma-separated integers") from None


_FILE_KEYS = {
    "command", "functional", "bindings", "basis", "nuisance_a", "nuisance_b", "data",
    "dgp", "dgp_params", "n", "reps", "estimator", "seed", "rtol", "out",
}


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(doc) - _FILE_KEYS)
        if unknown:
            raise ConfigError([f"unknown config key {k!r}" for k in unknown])
        values.update(doc)
        if "n" in values:
            values["n"] = _parse_n(values["n"])
        if "rtol" in values and isinstance(values["rtol"], (int, float)):
            values["rtol"] = float(values["rtol"])
    values["command"] = args.command
    overrides = {
        "functional": args.functional,
        "basis": args.basis,
        "nuisance_a": args.nuisance_a,
        "nuisance_b": args.nuisance_b,
        "data": args.data,
        "seed": args.seed,
        "out": args.out,
        "dgp": args.dgp,
        "reps": args.reps,
        "estimator": args.estimator,
    }
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    if args.bind:
        values["bindings"] = {**values.get("bindings", DEFAULT_BINDINGS), **_parse_bindings(args.bind)}
    if args.dgp_param:
        values["dgp_params"] = {**values.get("dgp_params", {}), **_parse_params(args.dgp_param)}
    if args.n is not None:
        values["n"] = _parse_n(args.n)
    return RunConfig(**values).validate()


def run(config: RunConfig) -> dict:
    """Execute one configured command and return the report document."""
    functional = config.resolved_functional()
    report = {
        "config": config.to_dict(),
        "estimates": None,
        "identities": None,
        "monte_carlo": None,
        "meta": {
            "version": __version__,
            "numpy": np.__version__,
            "backend": BACKEND,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        },
    }
    dgp = make_dgp(config.dgp, config.dgp_params) if config.dgp else None

    if config.command == "simulate":
        report["monte_carlo"] = [
            monte_carlo(
                dgp, functional, config.basis, config.nuisance_a, config.nuisance_b,
                config.estimator, n, config.reps, config.seed,
            ).to_dict()
            for n in config.n
        ]
        return report

    if dgp is not None:
        dataset = sample(dgp, config.n[0], config.seed)
        truths = true_nuisances(dgp, functional.kind)
    else:
        dataset = load_csv(config.data)
        truths = None
    a = fit_nuisance(config.nuisance_a, "a", dataset, functional, config.basis, truths)
    b = fit_nuisance(config.nuisance_b, "b", dataset, functional, config.basis, truths)
    report["estimates"] = estimate_bundle(dataset, functional, a, b).to_dict()
    if config.command == "verify":
        basis = build_basis(config.basis, functional.z_arity)
        if not (isinstance(a, LinearNuisance) and a.basis == basis):
            raise ConfigError(
                "verify needs a linear a-side nuisance over the run basis "
                f"({config.basis!r}); got {config.nuisance_a!r}"
            )
        report["identities"] = verify_identities(
            dataset, functional, basis, a.coefficients, b, rtol=config.rtol
        ).to_dict()
    return report


# -- serialisation -----------------------------------------------------------

def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if not any(ch in s for ch in ".eE"):
        s += ".0"
    return s


def _encode(obj, level: int) -> str:
    pad = "  " * (level + 1)
    end = "  " * level
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return "null" if obj is None else ("true" if obj else "false")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[" + ", ".join(_encode(v, level + 1) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(report: dict) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _encode(report, 0) + "\n"


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixedbias",
        description="Estimate mixed bias functionals and verify collapse identities.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--functional", help=f"one of {', '.join(FUNCTIONALS)}")
        p.add_argument("--bind", action="append", metavar="ROLE=COLUMN",
                       help="bind a role to a column; L=c1,c2 binds several covariates")
        p.add_argument("--basis", help="basis descriptor, e.g. intercept,raw,poly:2")
        p.add_argument("--nuisance-a", dest="nuisance_a", help="a-side nuisance descriptor")
        p.add_argument("--nuisance-b", dest="nuisance_b", help="b-side nuisance descriptor")
        p.add_argument("--data", help="CSV file with a header row")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="report path (default: standard output)")
        p.add_argument("--dgp", help="simulation model: cf-mean-dgp or ecc-dgp")
        p.add_argument("--dgp-param", dest="dgp_param", action="append", metavar="K=V")
        p.add_argument("--n", help="sample size(s), comma-separated")
        p.add_argument("--reps", type=int)
        p.add_argument("--estimator", help="one-step, or, ipw (simulate)")
    return parser


def _fail(exc: MixedBiasError) -> str:
    if isinstance(exc, ConfigError) and len(exc.violations) > 1:
        lines = "\n".join(f"  - {v}" for v in exc.violations)
        return f"mixedbias: configuration errors:\n{lines}"
    return f"mixedbias: error [{exc.module}]: {exc}"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = build_config(args)
    except ConfigError as exc:
        print(_fail(exc), file=sys.stderr)
        return EXIT_USAGE
    try:
        report = run(config)
    except ConfigError as exc:
        print(_fail(exc), file=sys.stderr)
        return EXIT_USAGE
    except MixedBiasError as exc:
        print(_fail(exc), file=sys.stderr)
        return EXIT_DATA
    text = dumps(report)
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if report["identities"] is not None and not report["identities"]["pass"]:
        return EXIT_IDENTITY
    return EXIT_OK
