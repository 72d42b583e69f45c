"""Command-line batch runner: ``ergodica run | spectrum | verify``.

Each check yields one record ``{name, paper_anchor, n, lambda, value, bound,
pass}``. Reports are JSON (schema ``ergodica/1``, sorted keys, timing kept
under its own key) and optionally CSV with the same numbers. The exit
status is 0 iff every record passes.
"""
from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
import scipy

from .algebra import UnitizedElement, ket_bra
from .dynamics import HorizonError, cesaro
from .modes import ModeElement
from .spectrum import angular_distance, full_peripheral, peripheral_pp_endo
from .systems import (SYSTEM_KINDS, build_system, monotone_bound_check, number_projection,
                      read_config, sqrt_n_bound_check)

SCHEMA = "ergodica/1"
SUITES = ("cesaro", "bounds", "spectrum", "all")
CSV_COLUMNS = ("check_name", "n", "lambda_re", "lambda_im", "value", "bound", "pass")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class CheckRecord:
    """One pass/fail line. ``sense`` is ``'le'`` (value <= bound) or ``'ge'``."""

    name: str
    anchor: str
    n: int
    lam: complex
    value: float
    bound: float
    sense: str = "le"
    slack: float = 0.0

    @property
    def passed(self):
        if self.sense == "ge":
            return self.value >= self.bound - self.slack
        return self.value <= self.bound + self.slack

    def to_dict(self):
        return {"name": self.name, "paper_anchor": self.anchor, "n": int(self.n),
                "lambda": [float(self.lam.real), float(self.lam.imag)],
                "value": float(self.value), "bound": float(self.bound), "pass": bool(self.passed)}


# ---------------------------------------------------------------------------
# lambda parsing


def parse_lambda(text, theta=None):
    """Parse ``1``, ``-1``, ``i``, ``0.5+0.8j``, ``phase:1/6`` (``e^{2 pi i t}``) or ``e2pi_l_theta:l``."""
    text = str(text).strip().replace(" ", "")
    if text.startswith("e2pi_l_theta"):
        if theta is None:
            raise ConfigError("lambda: e2pi_l_theta needs a system with a rotation number")
        l = int(text.split(":", 1)[1]) if ":" in text else int(text.split("=", 1)[1])
        return complex(np.exp(2j * np.pi * l * theta))
    if text.startswith("phase:"):
        t = float(Fraction(text.split(":", 1)[1]))
        return complex(np.exp(2j * np.pi * t))
    try:
        lam = complex(text.replace("i", "j"))
    except ValueError:
        raise ConfigError(f"lambda: cannot parse {text!r}") from None
    if abs(abs(lam) - 1) > 1e-12:
        raise ConfigError(f"lambda: |{text}| = {abs(lam):.15g} is not 1")
    return lam


# ---------------------------------------------------------------------------
# checks


def _gap(lam, others):
    d = [abs(lam - o) for o in others if abs(lam - o) > 1e-12]
    return min(d) if d else np.inf


def _cesaro_cell(bundle, lam, n, tol):
    kind = bundle.name
    basis = bundle.basis
    if kind == "boolean":
        x = UnitizedElement(ket_bra(basis, (0,), (0,)), 0.0, basis)
        M = cesaro(bundle.endo, x, lam, n)
        if abs(lam - 1) < 1e-12:
            val = (M - bundle.exact_E1(x)).norm()
            return [CheckRecord("boolean_residual_to_E1", "boolean-conditional-expectation", n, lam,
                                val, 1.0 / n, slack=tol)]
        return [CheckRecord("boolean_average_norm", "boolean-vanishing-average", n, lam,
                            M.norm(), 1.0 / n, slack=tol)]
    if kind == "monotone":
        a = number_projection(bundle, 0)
        M = cesaro(bundle.endo, a, lam, n)
        if abs(lam - 1) < 1e-12:
            P = UnitizedElement(ket_bra(basis, (), (), sparse=True), 0.0, basis)
            return [CheckRecord("monotone_norm_gap", "monotone-no-norm-convergence", n, lam,
                                (M - P).norm(), 1.0, sense="ge", slack=tol)]
        vac = abs(M.compact[0, 0] + M.scalar)
        return [CheckRecord("monotone_vacuum_element", "monotone-geometric-sum", n, lam, vac,
                            2.0 / (n * abs(lam - 1)), slack=tol)]
    # mode systems: x = sum_m c_m z^m (x) 1 with l1-normalized coefficients
    M_ = bundle.params["M"]
    modes = np.arange(-M_, M_ + 1)
    c = np.ones(len(modes)) / len(modes)
    one = UnitizedElement.unit(basis)
    x = ModeElement(modes, np.zeros((len(modes), basis.dim, basis.dim)), c, basis)
    phases = np.exp(2j * np.pi * bundle.theta * modes)
    _require(bundle, n)
    M = cesaro(bundle.endo, x, lam, n)
    hit = np.flatnonzero(np.abs(phases - lam) <= 1e-12)
    if len(hit):
        l = int(modes[hit[0]])
        target = ModeElement.monomial(l, c[hit[0]] * one)
        bound = 2.0 / (n * _gap(lam, phases))
        return [CheckRecord("rotation_eigen_average", "fourier-coefficient-limit", n, lam,
                            (M - target).norm(), bound, slack=tol)]
    return [CheckRecord("rotation_off_spectrum_average", "fourier-coefficient-limit", n, lam,
                        M.norm(), 2.0 / (n * _gap(lam, phases)), slack=tol)]


def _bounds_cell(bundle, lam, n, tol, trials, seed):
    kind = bundle.name
    if kind == "monotone":
        if abs(lam - 1) < 1e-3:
            return []
        rep = monotone_bound_check(bundle, 0, lam, n, trials, seed)
        return [CheckRecord("monotone_matrix_element_bound", "monotone-uniform-matrix-element",
                            n, lam, rep.max_value, rep.bound, slack=1e-9)]
    if kind == "boolean":
        # rank-one creator part: ||(1/n) sum_k lam^{-k} |e_{1+k}><Omega| || = 1/sqrt(n)
        x = UnitizedElement(ket_bra(bundle.basis, (1,), ()), 0.0, bundle.basis)
        val = cesaro(bundle.endo, x, lam, n).norm()
        return [CheckRecord("boolean_rank_one_sqrt_n", "rank-one-sqrt-n", n, lam, val,
                            1.0 / np.sqrt(n), slack=1e-9)]
    if kind == "rotation-boolean":
        M_ = bundle.params["M"]
        basis = bundle.basis
        f = ModeElement.from_dict({m: UnitizedElement(ket_bra(basis, (1,), ()), 0.0, basis)
                                   / (2 * M_ + 1) for m in range(-M_, M_ + 1)}, basis)
        rep = sqrt_n_bound_check(bundle, f, n, lam)
        return [CheckRecord("sqrt_n_bound", "rank-one-sqrt-n", n, lam, rep.max_value, rep.bound,
                            slack=1e-9)]
    if kind in ("rotation", "rotation-block"):
        haar = bundle.invariant_states[0]
        out = []
        for l in range(1, bundle.params["M"] + 1):
            u = bundle.eigen_element(l).u
            out.append(CheckRecord(f"haar_of_u_{l}", "invariant-state-kills-eigen-unitary", 0,
                                   complex(bundle.eigen_element(l).lam), abs(haar(u)), 0.0))
        return out
    return []


def _expected_spectrum(bundle):
    if bundle.params.get("modes"):
        M_ = bundle.params["M"]
        return np.exp(2j * np.pi * bundle.theta * np.arange(-M_, M_ + 1))
    return np.array([1.0 + 0j])


def _hausdorff(a, b):
    if len(a) == 0 or len(b) == 0:
        return np.inf
    return max(max(np.min(angular_distance(x, b)) for x in a),
               max(np.min(angular_distance(y, a)) for y in b))


def _spectrum_records(bundle, tol, jobs):
    expected = _expected_spectrum(bundle)
    endo = peripheral_pp_endo(bundle.endo, tol)
    recs = [CheckRecord("endo_peripheral_spectrum", "peripheral-point-spectrum", 0, 1 + 0j,
                        _hausdorff(endo.distinct(), expected), tol)]
    full = full_peripheral(bundle, tol=tol, jobs=jobs)
    recs.append(CheckRecord("full_peripheral_spectrum", "full-peripheral-spectrum", 0, 1 + 0j,
                            _hausdorff(full.distinct(), expected), tol))
    listing = {"endo": [[z.real, z.imag] for z in endo.distinct()],
               "full": [[z.real, z.imag] for z in full.distinct()]}
    return recs, listing


def _require(bundle, n):
    h = bundle.safe_horizon
    if h is not None and n > h:
        raise HorizonError(f"n = {n} exceeds the safe horizon {h} of system {bundle.name}")


# ---------------------------------------------------------------------------
# config and run


DEFAULT_N = {"boolean": [8, 16, 32, 64], "monotone": [5, 10, 20], "rotation": [1000, 10000],
             "rotation-boolean": [2, 4], "rotation-block": [1000, 10000]}
DEFAULT_LAMBDA = {"boolean": ["1", "i"], "monotone": ["1", "-1", "phase:1/6"],
                  "rotation": ["e2pi_l_theta:1", "e2pi_l_theta:-2"],
                  "rotation-boolean": ["1", "e2pi_l_theta:1"],
                  "rotation-block": ["e2pi_l_theta:1", "e2pi_l_theta:2"]}


@dataclass
class ExperimentConfig:
    system: str
    suite: str
    L: int | None
    p: int
    M: int | None
    theta: float | None
    lambdas: list
    n_schedule: list
    trials: int
    seed: int
    jobs: int
    tol: float
    out_json: str | None
    out_csv: str | None

    def as_dict(self):
        return {"system": self.system, "suite": self.suite, "L": self.L, "p": self.p, "M": self.M,
                "theta": self.theta, "lambda": list(self.lambdas), "n": list(self.n_schedule),
                "trials": self.trials, "seed": self.seed, "tol": self.tol}


def _split(v):
    if isinstance(v, list):
        return v
    return [s for s in str(v).replace(",", " ").split() if s]


def make_config(args, suite_default="all"):
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    cfg = {k.lower(): v for k, v in cfg.items()}

    def pick(name, conv, default=None, key=None):
        key = (key or name).lower()
        v = getattr(args, name, None)
        if v is None or v == []:
            v = cfg.get(key, cfg.get(key.replace("_", "-"), default))
        if v is None:
            return None
        try:
            return conv(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: {exc}") from None

    system = pick("system", str, "boolean")
    if system not in SYSTEM_KINDS:
        raise ConfigError(f"system: unknown kind {system!r}; choose from {', '.join(SYSTEM_KINDS)}")
    suite = pick("suite", str, suite_default)
    if suite not in SUITES:
        raise ConfigError(f"suite: unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    lambdas = pick("lambda_", _split, key="lambda") or DEFAULT_LAMBDA[system]
    ns = pick("n", lambda v: [int(s) for s in _split(v)], None) or DEFAULT_N[system]
    if any(n < 1 for n in ns):
        raise ConfigError("n: every entry must be >= 1")
    conf = ExperimentConfig(
        system=system, suite=suite, L=pick("L", int), p=pick("p", int, 2), M=pick("M", int),
        theta=pick("theta", float), lambdas=[str(x) for x in lambdas], n_schedule=ns,
        trials=pick("trials", int, 100), seed=pick("seed", int, 0), jobs=pick("jobs", int, 1),
        tol=pick("tol", float, 1e-9), out_json=pick("out_json", str),
        out_csv=pick("out_csv", str))
    if conf.jobs < 1:
        raise ConfigError("jobs: must be >= 1")
    return conf


def run(conf):
    """Execute the configured suites; returns ``(report_dict, all_pass)``."""
    t0 = time.perf_counter()
    bundle = build_system(conf.system, L=conf.L, p=conf.p, M=conf.M, theta=conf.theta)
    lams = [parse_lambda(s, bundle.theta) for s in conf.lambdas]
    suites = ("cesaro", "bounds") if conf.suite == "all" else (conf.suite,)
    if any(s in suites for s in ("cesaro", "bounds")):
        for n in conf.n_schedule:
            _require(bundle, n)
    cells = [(lam, n) for lam in lams for n in conf.n_schedule]

    def work(cell):
        lam, n = cell
        out = []
        if "cesaro" in suites:
            out += _cesaro_cell(bundle, lam, n, conf.tol)
        if "bounds" in suites:
            out += _bounds_cell(bundle, lam, n, conf.tol, conf.trials, conf.seed)
        return out

    records = []
    if any(s in suites for s in ("cesaro", "bounds")):
        if conf.jobs > 1:
            with ThreadPoolExecutor(conf.jobs) as pool:
                chunks = list(pool.map(work, cells))
        else:
            chunks = [work(c) for c in cells]
        for ch in chunks:
            records += ch
    listing = None
    if conf.suite in ("spectrum", "all"):
        recs, listing = _spectrum_records(bundle, 1e-6, conf.jobs)
        records += recs
    seen = set()
    unique = []
    for r in records:
        key = (r.name, r.n, r.lam)
        if key not in seen:
            seen.add(key)
            unique.append(r)
    all_pass = all(r.passed for r in unique)
    report = {
        "schema": SCHEMA,
        "config": conf.as_dict(),
        "seed": conf.seed,
        "environment": {"python": platform.python_version(), "numpy": np.__version__,
                        "scipy": scipy.__version__},
        "records": [r.to_dict() for r in unique],
        "all_pass": all_pass,
        "timing": {"wall_seconds": time.perf_counter() - t0},
    }
    if listing is not None:
        report["spectrum"] = listing
    return report, all_pass


def write_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in report["records"]:
            w.writerow([r["name"], r["n"], repr(r["lambda"][0]), repr(r["lambda"][1]),
                        repr(r["value"]), repr(r["bound"]), "true" if r["pass"] else "false"])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{"name": r["check_name"], "n": int(r["n"]),
             "lambda": [float(r["lambda_re"]), float(r["lambda_im"])],
             "value": float(r["value"]), "bound": float(r["bound"]), "pass": r["pass"] == "true"}
            for r in rows]


def dumps_report(report):
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=True)


def _emit(report, conf, stream):
    text = dumps_report(report)
    if conf.out_json:
        with open(conf.out_json, "w") as fh:
            fh.write(text + "\n")
    if conf.out_csv:
        write_csv(report, conf.out_csv)
    for r in report["records"]:
        lam = complex(*r["lambda"])
        stream.write(f"{'PASS' if r['pass'] else 'FAIL'} {r['name']} n={r['n']} "
                     f"lambda={lam.real:+.6f}{lam.imag:+.6f}i value={r['value']:.6e} "
                     f"bound={r['bound']:.6e}\n")
    if "spectrum" in report:
        for key, vals in report["spectrum"].items():
            angles = sorted(float(np.angle(complex(*v)) / (2 * np.pi)) for v in vals)
            stream.write(f"{key} peripheral angles/2pi: {', '.join(f'{a:+.9f}' for a in angles)}\n")


VERIFY_SYSTEMS = ("boolean", "monotone", "rotation", "rotation-boolean", "rotation-block")


def build_parser():
    parser = argparse.ArgumentParser(prog="ergodica", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run cesaro/bounds/spectrum suites on one system"),
                        ("spectrum", "peripheral spectrum of a system and its GNS family"),
                        ("verify", "run every suite on every shipped system at default sizes")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--system", choices=SYSTEM_KINDS)
        p.add_argument("--L", type=int)
        p.add_argument("--p", type=int)
        p.add_argument("--M", type=int)
        p.add_argument("--theta", type=float)
        p.add_argument("--lambda", dest="lambda_", action="append", default=[],
                       help="eigenvalue candidate; repeatable (1, -1, i, phase:1/6, e2pi_l_theta:l)")
        p.add_argument("--n", action="append", type=int, default=[], help="iteration count; repeatable")
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--suite", choices=SUITES)
        p.add_argument("--config", help="key = value file with the same field names")
        p.add_argument("--out-json", dest="out_json")
        p.add_argument("--out-csv", dest="out_csv")
    return parser


def main(argv=None, stream=None):
    stream = stream or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            ok = True
            merged = {"schema": SCHEMA, "records": [], "runs": []}
            for kind in VERIFY_SYSTEMS:
                args.system = kind
                conf = make_config(args, "all")
                report, passed = run(conf)
                ok &= passed
                merged["runs"].append(report)
                _emit(report, replace(conf, out_json=None, out_csv=None), stream)
                merged["records"] += report["records"]
            merged["all_pass"] = ok
            if args.out_json:
                with open(args.out_json, "w") as fh:
                    fh.write(dumps_report(merged) + "\n")
            if args.out_csv:
                write_csv(merged, args.out_csv)
            return 0 if ok else 1
        conf = make_config(args, "spectrum" if args.command == "spectrum" else "all")
        report, ok = run(conf)
    except ConfigError as exc:
        parser.error(str(exc))
    except HorizonError as exc:
        stream.write(f"error: {exc}\n")
        return 2
    _emit(report, conf, stream)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
