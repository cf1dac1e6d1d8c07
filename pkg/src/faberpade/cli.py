"""Config-driven experiment runner.

Config grammar (line based, ``#`` starts a comment)::

    [problem]
    domain = disk 0 1            # disk C R | segment A B | ellipse C A B [ANGLE] | laurent CAP C0 C1 ...
    f1 = 1/(z-2) + log(z-4)      # f2, f3, ... for systems
    m = 1                        # one entry per function, space or comma separated
    m_star = 1                   # incomplete mode only
    mode = direct                # solve | direct | inverse | incomplete

    [run]
    n_min = 10                   # or n = 5 for a single solve
    n_max = 80
    n_step = 1
    tol = 0.05
    workers = 1

    [quadrature]
    rho = 3.5
    nodes = 1024

    [metadata]
    pole = 2; 1; 4               # xi; tau; rho_(xi,1) ... rho_(xi,tau)   (repeatable)

    [output]
    out = results

Keys given before the first section header are accepted in any section.
Complex numbers use ``i`` or ``j`` for the imaginary unit (``2+1i``).
"""

from __future__ import annotations

import argparse
import filecmp
import math
import re
import sys
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import (
    Declaration,
    SystemMetadata,
    declared_metadata,
    format_complex,
    inverse_matches_direct,
    pole_labels,
    run_direct_experiment,
    run_incomplete_experiment,
    run_inverse_experiment,
    sorted_roots,
    system_poles_rational,
    track_roots,
)
from .approximant import QuadratureSettings, solve_range
from .conformal import Disk, Domain, Ellipse, LaurentMap, Segment
from .errors import ConfigError, DomainError, FaberPadeError, HypothesisViolation, ParseError, ZeroPolynomial
from .funcsys import FunctionSystem, MultiIndex, parse_function_expression

MODES = ("solve", "direct", "inverse", "incomplete")
SECTIONS = {
    "problem": {"domain", "m", "m_star", "mode"},
    "run": {"n", "n_min", "n_max", "n_step", "tol", "workers"},
    "quadrature": {"rho", "nodes"},
    "metadata": {"pole"},
    "output": {"out"},
}
ALL_KEYS = set().union(*SECTIONS.values())
REPEATABLE = {"pole"}
FUNCTION_KEY = re.compile(r"f(\d+)$")
OUTPUT_FILES = ("denominators.csv", "rates.csv", "roots_paths.csv", "summary.txt")
CSV_FILES = OUTPUT_FILES[:3]


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    domain_spec: str
    domain: Domain
    functions: tuple
    system: FunctionSystem
    m: tuple
    mode: str = "solve"
    m_star: int | None = None
    n_min: int = 1
    n_max: int = 1
    n_step: int = 1
    tol: float = 0.05
    workers: int = 1
    quad: QuadratureSettings = QuadratureSettings()
    declarations: tuple = ()
    out_dir: Path | None = None
    defaults: tuple = ()

    @property
    def n_values(self) -> list:
        return list(range(self.n_min, self.n_max + 1, self.n_step))


@dataclass
class RunArtifacts:
    paths: dict = field(default_factory=dict)
    status: int = 0
    summary: list = field(default_factory=list)


# --------------------------------------------------------------- parsing


def _parse_complex(text: str, line=None, key=None) -> complex:
    s = text.strip().replace(" ", "").replace("i", "j")
    try:
        return complex(s)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}", line, key) from None


def _parse_real(text: str, line=None, key=None) -> float:
    z = _parse_complex(text, line, key)
    if z.imag != 0:
        raise ConfigError(f"expected a real number, got {text!r}", line, key)
    return z.real


def _parse_int(text: str, line=None, key=None) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}", line, key) from None


def _parse_domain(text: str, line=None) -> Domain:
    parts = text.split()
    if not parts:
        raise ConfigError("empty domain", line, "domain")
    kind, args = parts[0].lower(), parts[1:]
    try:
        if kind == "disk" and len(args) == 2:
            return Disk(_parse_complex(args[0], line, "domain"), _parse_real(args[1], line, "domain"))
        if kind == "segment" and len(args) == 2:
            return Segment(_parse_complex(args[0], line, "domain"), _parse_complex(args[1], line, "domain"))
        if kind == "ellipse" and len(args) in (3, 4):
            angle = _parse_real(args[3], line, "domain") if len(args) == 4 else 0.0
            return Ellipse(_parse_complex(args[0], line, "domain"), _parse_real(args[1], line, "domain"),
                           _parse_real(args[2], line, "domain"), angle)
        if kind == "laurent" and len(args) >= 2:
            return LaurentMap(_parse_real(args[0], line, "domain"), _parse_complex(args[1], line, "domain"),
                              tuple(_parse_complex(a, line, "domain") for a in args[2:]))
    except DomainError as exc:
        raise ConfigError(str(exc), line, "domain") from None
    raise ConfigError(f"unrecognised domain {text!r}", line, "domain")


def _parse_declaration(text: str, line) -> Declaration:
    fields_ = [p for p in text.split(";")]
    if len(fields_) < 3:
        raise ConfigError("pole entries read 'xi; tau; rho_1 ... rho_tau'", line, "pole")
    xi = _parse_complex(fields_[0], line, "pole")
    tau = _parse_int(fields_[1], line, "pole")
    rho = tuple(math.inf if r.lower() in ("inf", "+inf") else _parse_real(r, line, "pole")
                for r in " ".join(fields_[2:]).replace(",", " ").split())
    return Declaration(xi, tau, rho)


def _strip_value(v: str) -> str:
    v = v.strip()
    if len(v) >= 2 and v[0] == v[-1] and v[0] in "\"'":
        v = v[1:-1]
    return v


def _read_entries(text: str) -> dict:
    """key -> list of (line number, raw value)."""
    entries: dict = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        allowed = SECTIONS[section] if section else ALL_KEYS
        is_function = FUNCTION_KEY.match(key) and section in (None, "problem")
        if key not in allowed and not is_function:
            where = f"section [{section}]" if section else "the config"
            raise ConfigError(f"unknown key {key!r} in {where}", lineno, key)
        if key in entries and key not in REPEATABLE:
            raise ConfigError(f"duplicate key {key!r}", lineno, key)
        entries.setdefault(key, []).append((lineno, _strip_value(value)))
    return entries


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    entries = _read_entries(text)
    defaults = []

    def one(key, required=False):
        if key not in entries:
            if required:
                raise ConfigError(f"missing required key {key!r}", None, key)
            return None, None
        return entries[key][0]

    line, dom_text = one("domain", required=True)
    domain = _parse_domain(dom_text, line)

    fkeys = sorted((int(FUNCTION_KEY.match(k).group(1)), k) for k in entries if FUNCTION_KEY.match(k))
    if not fkeys:
        raise ConfigError("missing required key 'f1'", None, "f1")
    if [i for i, _ in fkeys] != list(range(1, len(fkeys) + 1)):
        raise ConfigError("function keys must be f1, f2, ... without gaps", entries[fkeys[-1][1]][0][0], fkeys[-1][1])
    functions, parsed = [], []
    for _, k in fkeys:
        ln, expr = entries[k][0]
        try:
            f = parse_function_expression(expr)
        except ParseError as exc:
            raise ConfigError(f"{exc} (column {exc.position})", ln, k) from None
        try:
            f.check_domain(domain)
        except DomainError as exc:
            raise ConfigError(str(exc), ln, k) from None
        functions.append(expr)
        parsed.append(f)
    system = FunctionSystem(tuple(parsed))

    line, m_text = one("m", required=True)
    m = tuple(_parse_int(x, line, "m") for x in m_text.replace(",", " ").split())
    if len(m) != system.d or any(x < 1 for x in m):
        raise ConfigError(f"m needs {system.d} positive entries, got {m_text!r}", line, "m")

    line, mode = one("mode")
    if mode is None:
        mode = "solve"
        defaults.append("mode = solve")
    mode = mode.lower()
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}", line, "mode")

    line, ms_text = one("m_star")
    m_star = None
    if mode == "incomplete":
        if ms_text is None:
            raise ConfigError("incomplete mode requires 'm_star'", None, "m_star")
        m_star = _parse_int(ms_text, line, "m_star")
        if system.d != 1:
            raise ConfigError("incomplete mode takes a single function", line, "m_star")
        if not m[0] >= m_star >= 1:
            raise ConfigError(f"need m >= m_star >= 1, got m={m[0]}, m_star={m_star}", line, "m_star")
    elif ms_text is not None:
        m_star = _parse_int(ms_text, line, "m_star")

    line_n, n_text = one("n")
    if n_text is not None:
        if "n_min" in entries or "n_max" in entries:
            raise ConfigError("give either n or n_min/n_max", line_n, "n")
        n_min = n_max = _parse_int(n_text, line_n, "n")
    else:
        line, v = one("n_min")
        line2, v2 = one("n_max")
        if v is None and v2 is None:
            raise ConfigError("missing required key 'n' (or 'n_min' and 'n_max')", None, "n")
        if v is None or v2 is None:
            key = "n_min" if v is None else "n_max"
            raise ConfigError(f"missing required key {key!r}", None, key)
        n_min, n_max = _parse_int(v, line, "n_min"), _parse_int(v2, line2, "n_max")
    line, v = one("n_step")
    n_step = 1 if v is None else _parse_int(v, line, "n_step")
    if v is None:
        defaults.append("n_step = 1")
    if n_min < 1:
        raise ConfigError("n_min must be >= 1", line_n, "n_min")
    if n_step < 1:
        raise ConfigError("n_step must be >= 1", line, "n_step")
    if n_max < n_min:
        raise ConfigError("n_max must be >= n_min", None, "n_max")

    line, v = one("tol")
    tol = 0.05 if v is None else _parse_real(v, line, "tol")
    if v is None:
        defaults.append("tol = 0.05")
    line, v = one("workers")
    workers = 1 if v is None else _parse_int(v, line, "workers")
    if workers < 1:
        raise ConfigError("workers must be >= 1", line, "workers")

    line, v = one("rho")
    rho = None if v is None else _parse_real(v, line, "rho")
    if rho is not None and not rho > 1:
        raise ConfigError("rho must exceed 1", line, "rho")
    line, v = one("nodes")
    nodes = None if v is None else _parse_int(v, line, "nodes")
    if nodes is not None and (nodes < 8 or nodes & (nodes - 1)):
        raise ConfigError("nodes must be a power of two >= 8", line, "nodes")
    if rho is None:
        defaults.append("rho = automatic")
    if nodes is None:
        defaults.append("nodes = automatic")

    declarations = tuple(_parse_declaration(v, ln) for ln, v in entries.get("pole", []))

    line, v = one("out")
    out_dir = None if v is None else Path(v)
    if out_dir is not None and base_dir is not None and not out_dir.is_absolute():
        out_dir = base_dir / out_dir

    return ExperimentConfig(
        domain_spec=dom_text, domain=domain, functions=tuple(functions), system=system, m=m, mode=mode,
        m_star=m_star, n_min=n_min, n_max=n_max, n_step=n_step, tol=tol, workers=workers,
        quad=QuadratureSettings(rho=rho, nodes=nodes), declarations=declarations, out_dir=out_dir,
        defaults=tuple(defaults),
    )


# ---------------------------------------------------------------- output


def _f(x) -> str:
    return format(float(x), ".16e")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _denominator_rows(n_values, Qs, flags, degree):
    header = ["n", "unique"]
    header += [f"q{j}_{part}" for j in range(degree + 1) for part in ("re", "im")]
    header += [f"root{j}_{part}" for j in range(degree) for part in ("re", "im")]
    rows = []
    for n, Q, u in zip(n_values, Qs, flags):
        q = Q.padded(degree + 1)
        roots = _roots(Q)
        row = [str(n), "1" if u else "0"]
        row += [s for c in q for s in (_f(c.real), _f(c.imag))]
        row += [s for r in roots for s in (_f(r.real), _f(r.imag))]
        row += [""] * (2 * (degree - len(roots)))
        rows.append(row)
    return header, rows


def _roots(Q):
    try:
        return sorted_roots(Q)
    except ZeroPolynomial:
        return []


def _metadata(config: ExperimentConfig) -> SystemMetadata | None:
    if config.declarations:
        return declared_metadata(config.domain, config.system, config.m, config.declarations)
    if config.system.is_rational():
        return system_poles_rational(config.domain, config.system, config.m)
    return None


def _execute(config: ExperimentConfig):
    """Run the configured experiment; returns the data the writers need."""
    n_values = config.n_values
    m = MultiIndex(config.m)
    out = {"n": n_values, "lines": [], "footer": [], "paths": {}}
    if config.mode == "incomplete":
        v = run_incomplete_experiment(config.domain, config.system[0], config.m[0], config.m_star, n_values,
                                      config.quad, config.tol)
        out.update(Qs=v.denominators, flags=v.unique, degree=config.m[0], paths=v.root_paths)
        out["errors"] = [Q.distance(v.limit_Q) for Q in v.denominators]
        out["footer"] = [("fitted_rate", v.theta)]
        out["lines"] += _verdict_lines(v)
        return out
    meta = _metadata(config)
    results = solve_range(config.domain, config.system, m, n_values, config.quad, config.workers)
    Qs = [r.denominator for r in results]
    out.update(Qs=Qs, flags=[r.unique for r in results], degree=m.total)
    if meta is not None:
        out["lines"] += _metadata_lines(meta)
    if config.mode == "solve":
        if meta is not None and meta.pole_count == m.total:
            out["errors"] = [Q.distance(meta.predicted_Q) for Q in Qs]
            out["paths"] = track_roots(n_values, [_roots(Q) for Q in Qs],
                                       [p.xi for p in meta.system_poles for _ in range(p.tau)],
                                       pole_labels(meta.system_poles))
            out["footer"] = [("predicted_rate", meta.predicted_rate)]
        else:
            out["errors"] = [math.nan] * len(Qs)
            first = _roots(Qs[0])
            out["paths"] = track_roots(n_values, [_roots(Q) for Q in Qs], first,
                                       [f"r{j}" for j in range(len(first))])
        out["lines"].append(f"solves: {len(Qs)}, unique: {sum(out['flags'])}")
        return out
    if config.mode == "direct":
        if meta is None:
            raise ConfigError("direct mode needs [metadata] pole entries for a non-rational system", None, "pole")
        rep = run_direct_experiment(config.domain, config.system, m, meta, n_values, config.quad,
                                    tol=config.tol, results=results)
        inv = run_inverse_experiment(config.domain, config.system, m, n_values, config.quad, config.tol,
                                     results=results)
        out.update(errors=rep.errors, paths=rep.root_paths)
        out["footer"] = [("fitted_rate", rep.fitted_rate), ("predicted_rate", rep.predicted_rate)]
        band = _band(rep.fitted_rate, rep.predicted_rate)
        out["lines"] += [
            f"fitted_rate: {_f(rep.fitted_rate)}",
            f"predicted_rate: {_f(rep.predicted_rate)}",
            f"rate_agreement: {'within' if band else 'outside'} 10% log band",
            f"direct_verdict: {'converged' if rep.converged else 'not converged'}",
        ]
        out["lines"] += _verdict_lines(inv)
        out["lines"].append(f"inverse_matches_direct: {'yes' if inverse_matches_direct(inv, meta) else 'no'}")
        return out
    inv = run_inverse_experiment(config.domain, config.system, m, n_values, config.quad, config.tol,
                                 results=results)
    out.update(paths=inv.root_paths)
    out["errors"] = [Q.distance(inv.limit_Q) if inv.limit_Q is not None else math.nan for Q in Qs]
    out["footer"] = [("fitted_rate", inv.theta)]
    if meta is not None:
        out["footer"].append(("predicted_rate", meta.predicted_rate))
    out["lines"] += _verdict_lines(inv)
    return out


def _band(fitted, predicted) -> bool:
    if predicted == 0:
        return fitted == 0
    if fitted <= 0:
        return False
    return abs(math.log(fitted) - math.log(predicted)) <= 0.1 * abs(math.log(predicted))


def _metadata_lines(meta: SystemMetadata) -> list:
    lines = [f"metadata: {meta.provenance.value}"]
    for p in meta.system_poles:
        lines.append(f"system_pole: {format_complex(p.xi)} order {p.tau} bold_rho {_f(meta.bold_rho[p.xi])}")
    lines.append(f"predicted_Q: {' '.join(_f(c.real) + ' ' + _f(c.imag) for c in meta.predicted_Q.coeffs)}")
    return lines


def _verdict_lines(v) -> list:
    lines = [
        f"inverse_verdict: {'converged' if v.converged else 'not converged'}",
        f"inverse_reason: {v.reason}",
        f"pole_count: {v.pole_count}",
        f"theta: {_f(v.theta)}",
    ]
    if v.limit_Q is not None:
        lines.append("limit_roots: " + " ".join(f"{_f(r.real)} {_f(r.imag)}" for r in v.limit_roots))
    return lines


def _write_outputs(config: ExperimentConfig, data, out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {name: out_dir / name for name in OUTPUT_FILES}
    header, rows = _denominator_rows(data["n"], data["Qs"], data["flags"], data["degree"])
    _write_csv(paths["denominators.csv"], header, rows)
    rows = [[str(n), _f(e)] for n, e in zip(data["n"], data["errors"])]
    rows += [[name, _f(val)] for name, val in data["footer"]]
    _write_csv(paths["rates.csv"], ["n", "error"], rows)
    rows = [[label, str(n), _f(z.real), _f(z.imag)] for label, path in data["paths"].items() for n, z in path]
    _write_csv(paths["roots_paths.csv"], ["label", "n", "re", "im"], rows)
    lines = [
        f"mode: {config.mode}",
        f"domain: {config.domain_spec}",
        *[f"f{i + 1}: {expr}" for i, expr in enumerate(config.functions)],
        f"m: {' '.join(map(str, config.m))}",
        f"n_range: {config.n_min}..{config.n_max} step {config.n_step}",
        *[f"default: {d}" for d in config.defaults],
        *data["lines"],
        "status: ok",
    ]
    paths["summary.txt"].write_text("\n".join(lines) + "\n")
    return paths


def run(config: ExperimentConfig, out_dir: Path | None = None) -> RunArtifacts:
    """Run one experiment and write its files.  Numerical failures give
    status 2 and a summary explaining them; config errors propagate."""
    out_dir = Path(out_dir or config.out_dir or "faberpade_out")
    try:
        data = _execute(config)
    except ConfigError:
        raise
    except (FaberPadeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        out_dir.mkdir(parents=True, exist_ok=True)
        kind = "hypothesis violation" if isinstance(exc, HypothesisViolation) else "numerical failure"
        msg = f"status: failed ({kind}): {exc}"
        (out_dir / "summary.txt").write_text(f"mode: {config.mode}\n{msg}\n")
        return RunArtifacts({"summary.txt": out_dir / "summary.txt"}, 2, [msg])
    paths = _write_outputs(config, data, out_dir)
    return RunArtifacts(paths, 0, data["lines"])


def _same_outputs(a: Path, b: Path) -> bool:
    return all(filecmp.cmp(a / name, b / name, shallow=False) for name in OUTPUT_FILES)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="faberpade", description="Run a Pade-Faber experiment from a config file.")
    parser.add_argument("config", type=Path)
    parser.add_argument("--out", type=Path, help="output directory (overrides the config)")
    parser.add_argument("--nodes", type=int, help="quadrature node count (power of two)")
    parser.add_argument("--rho", type=float, help="quadrature level-curve index")
    parser.add_argument("--seed-check", action="store_true",
                        help="run twice and fail unless every output file is byte-identical")
    args = parser.parse_args(argv)
    try:
        text = args.config.read_text()
    except OSError as exc:
        print(f"faberpade: cannot read config: {exc}", file=sys.stderr)
        return 1
    overrides = []
    if args.nodes is not None:
        overrides.append(f"nodes = {args.nodes}")
    if args.rho is not None:
        overrides.append(f"rho = {args.rho!r}")
    try:
        config = parse_config(text, base_dir=args.config.parent)
        if overrides:
            quad = QuadratureSettings(
                rho=args.rho if args.rho is not None else config.quad.rho,
                nodes=args.nodes if args.nodes is not None else config.quad.nodes,
            )
            if quad.rho is not None and not quad.rho > 1:
                raise ConfigError("--rho must exceed 1", None, "rho")
            if quad.nodes is not None and (quad.nodes < 8 or quad.nodes & (quad.nodes - 1)):
                raise ConfigError("--nodes must be a power of two >= 8", None, "nodes")
            config = replace(config, quad=quad)
        out_dir = args.out or config.out_dir or args.config.parent / f"{args.config.stem}_out"
        artifacts = run(config, out_dir)
        if artifacts.status == 0 and args.seed_check:
            with tempfile.TemporaryDirectory() as tmp:
                again = run(config, Path(tmp))
                if again.status != 0 or not _same_outputs(Path(out_dir), Path(tmp)):
                    print("faberpade: outputs differ between two runs", file=sys.stderr)
                    return 2
    except ConfigError as exc:
        print(f"faberpade: config error: {exc}", file=sys.stderr)
        return 1
    for line in artifacts.summary:
        print(line)
    if artifacts.status != 0:
        print(f"faberpade: {artifacts.summary[-1]}", file=sys.stderr)
    return artifacts.status


if __name__ == "__main__":
    sys.exit(main())
