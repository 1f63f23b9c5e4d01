"""``stablesum`` command line: every run prints a self-describing JSON result record.

Exit codes: 0 success, 2 bad parameters or unreadable input, 3 mathematical
refusal (divergent integral, unsupported regime), 4 I/O failure.
"""

from __future__ import annotations

import json
import math
import sys
import time
from pathlib import Path
from typing import Callable

import click
import numpy as np

from . import __version__
from . import asymptotics as asy
from . import multilinear as ml
from . import summing
from .errors import DomainError, ParameterError
from .rng import derive_stream, make_generator
from .stable import constant_c

EXIT_OK, EXIT_PARAM, EXIT_REFUSAL, EXIT_IO = 0, 2, 3, 4

DEFAULT_SAMPLES = summing.DEFAULT_SAMPLES
DEFAULT_BLOCKS = summing.DEFAULT_BLOCKS
DEFAULT_RESTARTS = 32


# ---------------------------------------------------------------------------
# record plumbing


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def _parse_exponent(text) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    if str(text).lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise ParameterError(f"not a number: {text!r}") from None


def _parse_list(text, conv=int) -> list:
    if isinstance(text, (list, tuple)):
        return [conv(v) for v in text]
    try:
        return [conv(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ParameterError(f"expected a comma-separated list, got {text!r}") from None


def _load_operator(path: str) -> ml.MultilinearOperator:
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise ParameterError(f"operator file not found: {path}") from None
    return ml.loads(text)


def _flat_row(outputs: dict, prefix: str = "") -> dict:
    row = {}
    for k, v in outputs.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            row.update(_flat_row(v, key + "."))
        elif isinstance(v, (list, tuple)):
            if all(not isinstance(x, (dict, list, tuple)) for x in v):
                row.update({f"{key}.{i}": x for i, x in enumerate(v)})
        else:
            row[key] = v
    return row


# ---------------------------------------------------------------------------
# command bodies: config dict -> (outputs, table rows)


def _c_const(cfg):
    try:
        c = constant_c(cfg["s"], cfg["q"], cfg["field"])
    except DomainError as exc:
        # invalid (s, q) combinations are parameter errors for this command
        raise ParameterError(str(exc)) from exc
    return {"value": c.value, "quadrature": c.quadrature, "rel_discrepancy": c.rel_discrepancy}, []


def _pi(cfg):
    T = _load_operator(cfg["operator"])
    r = None if cfg["r"] is None else _parse_exponent(cfg["r"])
    est = summing.estimate_pi(T, cfg["p"], r, cfg["samples"], cfg["blocks"], cfg["seed"],
                              cfg["field"], cfg["workers"])
    out = {"estimate": est.to_dict(),
           "basis_lower_bound": summing.basis_lower_bound(T, cfg["p"], r)}
    if cfg["search_restarts"] > 0 and T.field.value == "real":
        out["search_lower_bound"] = summing.search_lower_bound(
            T, cfg["p"], r, restarts=cfg["search_restarts"], seed=cfg["seed"])
    return out, []


def _limit_order(cfg):
    query = asy.LimitOrderQuery(cfg["m"], _parse_exponent(cfg["r"]), cfg["q"], cfg["p"])
    fit = asy.limit_order_fit(query, _parse_list(cfg["n_list"]), cfg["samples"], cfg["seed"],
                              cfg["blocks"], cfg["workers"])
    return {"summary": fit.summary(), "rows": fit.rows()}, fit.rows()


def _contraction(cfg):
    T = _load_operator(cfg["operator"])
    r = None if cfg["r"] is None else _parse_exponent(cfg["r"])
    shape = (T.N,) * T.m
    kind = cfg["alpha"]
    if kind == "ones":
        patterns = [np.ones(shape)]
    elif kind == "flip":
        a = np.ones(shape)
        a[0] = -1.0
        patterns = [a]
    else:
        gen = make_generator(cfg["seed"], derive_stream("cli-sign-patterns"))
        patterns = [2.0 * gen.integers(0, 2, size=shape) - 1.0 for _ in range(cfg["patterns"])]
    rows, base = [], None
    for i, alpha in enumerate(patterns):
        rep = asy.contraction_check(T, alpha, cfg["p"], r, cfg["seed"], cfg["samples"],
                                    cfg["blocks"], cfg["workers"], base=base)
        base = rep.base
        rows.append({"pattern": i, "ratio": rep.ratio, "rel_uncertainty": rep.rel_uncertainty})
    ratios = [row["ratio"] for row in rows]
    out = {"alpha": kind, "max_ratio": max(ratios), "min_ratio": min(ratios), "rows": rows}
    if kind in ("ones", "flip"):
        # sign symmetry of the measure makes these exact
        tol = 3.0 * rows[0]["rel_uncertainty"]
        out["verdict"] = "PASS" if abs(ratios[0] - 1.0) <= tol else "FAIL"
    return out, rows


def _family(kind, m, n, q, r, seed):
    if kind == "phi":
        return ml.make_phi(m, n, q, r)
    return ml.random_dense_operator(m, n, seed, ml.CodomainSpec.sequence(q, n), r=r)


def _inclusion(cfg):
    r = _parse_exponent(cfg["r"])
    Ns = _parse_list(cfg["n_list"])
    q2 = cfg["q2"] if cfg["q2"] is not None else cfg["q"]
    fam1 = [_family(cfg["kind"], cfg["m"], n, cfg["q"], r, cfg["seed"]) for n in Ns]
    fam2 = [_family(cfg["kind"], cfg["m"], n, q2, r, cfg["seed"]) for n in Ns]
    rep = asy.inclusion_ratio(fam1, cfg["p1"], cfg["p2"], r, fam2, cfg["seed"], cfg["samples"],
                              cfg["blocks"], cfg["workers"])
    rows = [{"N": n, "ratio": x} for n, x in zip(rep.N_list, rep.ratios)]
    return {"report": rep.to_dict(), "rows": rows}, rows


def _gamma_bound(cfg):
    T = _load_operator(cfg["operator"])
    rep = asy.gamma_ratio_bound(T, cfg["p"], 2.0, cfg["samples"], cfg["blocks"], cfg["seed"],
                                cfg["field"], cfg["restarts"], cfg["workers"])
    out = rep.to_dict()
    out["verdict"] = "PASS" if rep.passed else "FAIL"
    return out, []


def _make_operator(cfg):
    kind, m, N = cfg["kind"], cfg["m"], cfg["N"]
    r = _parse_exponent(cfg["r"])
    q = _parse_exponent(cfg["q"])
    if kind == "phi":
        T = ml.make_phi(m, N, q, r)
    elif kind == "random-sign":
        T = ml.random_sign_operator(m, N, q, cfg["seed"], r)
    elif kind == "random-dense":
        cod = ml.CodomainSpec.scalar() if cfg["scalar"] else ml.CodomainSpec.sequence(q, N)
        T = ml.random_dense_operator(m, N, cfg["seed"], cod, r, cfg["field"])
    elif kind == "identity":
        T = ml.DenseOperator(np.eye(N), r, ml.CodomainSpec.sequence(q, N))
    else:  # linear form from explicit coefficients
        coeffs = _parse_list(cfg["coeffs"], float)
        if not coeffs:
            raise ParameterError("--coeffs is required for a linear form")
        T = ml.DenseOperator(np.asarray(coeffs), r)
    doc = ml.to_document(T)
    return {"operator": doc}, []


COMMANDS: dict[str, Callable[[dict], tuple[dict, list]]] = {
    "c-const": _c_const,
    "pi": _pi,
    "limit-order": _limit_order,
    "contraction": _contraction,
    "inclusion": _inclusion,
    "gamma-bound": _gamma_bound,
    "make-operator": _make_operator,
}


def execute(name: str, config: dict) -> tuple[dict, list]:
    """Run command ``name`` on a config dict; returns ``(outputs, rows)``."""
    if name not in COMMANDS:
        raise ParameterError(f"unknown command {name!r}")
    outputs, rows = COMMANDS[name](config)
    return _jsonable(outputs), _jsonable(rows)


def build_record(name: str, config: dict) -> tuple[dict, list]:
    t0 = time.perf_counter()
    outputs, rows = execute(name, config)
    record = {
        "command": name,
        "config": _jsonable(config),
        "outputs": outputs,
        "duration_s": time.perf_counter() - t0,
        "version": __version__,
    }
    return record, rows


def _write_outputs(record: dict, rows: list, out: str | None, fmt: str):
    text = json.dumps(record, indent=1)
    if out:
        path = Path(out)
        if fmt == "csv":
            table = rows or [_flat_row(record["outputs"])]
            path.write_text(asy.sweep_csv(table))
            path.with_suffix(".json").write_text(text + "\n")
        else:
            path.write_text(text + "\n")
    click.echo(text)


def _run(name: str, config: dict, out: str | None = None, fmt: str = "json"):
    config = dict(config, out=out, format=fmt)
    try:
        record, rows = build_record(name, config)
        _write_outputs(record, rows, out, fmt)
    except ParameterError as exc:
        click.echo(f"parameter error: {exc}", err=True)
        sys.exit(EXIT_PARAM)
    except DomainError as exc:
        click.echo(f"refused: {exc}", err=True)
        sys.exit(EXIT_REFUSAL)
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        sys.exit(EXIT_IO)


# ---------------------------------------------------------------------------
# click front end


def _output_options(f):
    f = click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
                     show_default=True, help="Format written to --out.")(f)
    f = click.option("--out", type=click.Path(dir_okay=False), default=None,
                     help="Also write the result here (CSV writes the JSON record alongside).")(f)
    return f


def _mc_options(f):
    f = click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)(f)
    f = click.option("--blocks", type=click.IntRange(min=1), default=DEFAULT_BLOCKS,
                     show_default=True)(f)
    f = click.option("--samples", type=click.IntRange(min=1), default=DEFAULT_SAMPLES,
                     show_default=True)(f)
    f = click.option("--seed", type=int, required=True, help="Seed; required, no clock default.")(f)
    return f


@click.group()
@click.version_option(__version__, prog_name="stablesum")
def main():
    """Multiple summing norms of multilinear operators by stable integrals."""


@main.command("c-const")
@click.option("--s", "s", type=float, required=True, help="Stability index in (0, 2].")
@click.option("--q", "q", type=float, required=True, help="Moment order, 0 < q < s (or any q for s = 2).")
@click.option("--field", type=click.Choice(["real", "complex"]), default="real", show_default=True)
@_output_options
def c_const(s, q, field, out, fmt):
    """Moment constant c_{s,q} with its quadrature cross-check."""
    _run("c-const", {"s": s, "q": q, "field": field}, out, fmt)


@main.command("pi")
@click.argument("operator", type=str)
@click.option("--p", "p", type=float, required=True)
@click.option("--r", "r", type=str, default=None, help="Domain exponent (default: from the file).")
@click.option("--field", type=click.Choice(["real", "complex"]), default="real", show_default=True)
@click.option("--search-restarts", type=click.IntRange(min=0), default=4, show_default=True,
              help="Restarts of the family search lower bound (0 disables it).")
@_mc_options
@_output_options
def pi_cmd(operator, p, r, field, search_restarts, seed, samples, blocks, workers, out, fmt):
    """Estimate pi_p of the operator stored in OPERATOR, with lower bounds."""
    _run("pi", {"operator": operator, "p": p, "r": r, "field": field,
                "search_restarts": search_restarts, "seed": seed, "samples": samples,
                "blocks": blocks, "workers": workers}, out, fmt)


@main.command("limit-order")
@click.option("--m", "m", type=click.IntRange(min=1), required=True)
@click.option("--r", "r", type=str, required=True)
@click.option("--q", "q", type=float, required=True)
@click.option("--p", "p", type=float, default=1.0, show_default=True)
@click.option("--n-list", default="8,16,32,64", show_default=True)
@_mc_options
@_output_options
def limit_order(m, r, q, p, n_list, seed, samples, blocks, workers, out, fmt):
    """Fit the growth exponent of pi_p(Phi_N) and compare with the predicted order."""
    _run("limit-order", {"m": m, "r": r, "q": q, "p": p, "n_list": n_list, "seed": seed,
                         "samples": samples, "blocks": blocks, "workers": workers}, out, fmt)


@main.command("contraction")
@click.argument("operator", type=str)
@click.option("--alpha", type=click.Choice(["ones", "flip", "random"]), default="random",
              show_default=True)
@click.option("--patterns", type=click.IntRange(min=1), default=50, show_default=True)
@click.option("--p", "p", type=float, default=1.0, show_default=True)
@click.option("--r", "r", type=str, default=None)
@_mc_options
@_output_options
def contraction(operator, alpha, patterns, p, r, seed, samples, blocks, workers, out, fmt):
    """Ratio pi_p(T_alpha) / (||alpha||_inf pi_p(T)) over multiplier patterns."""
    _run("contraction", {"operator": operator, "alpha": alpha, "patterns": patterns, "p": p,
                         "r": r, "seed": seed, "samples": samples, "blocks": blocks,
                         "workers": workers}, out, fmt)


@main.command("inclusion")
@click.option("--kind", type=click.Choice(["phi", "random-dense"]), default="phi", show_default=True)
@click.option("--m", "m", type=click.IntRange(min=1), default=2, show_default=True)
@click.option("--q", "q", type=float, required=True, help="Codomain exponent for p1.")
@click.option("--q2", "q2", type=float, default=None, help="Codomain exponent for p2 (default q).")
@click.option("--p1", type=float, required=True)
@click.option("--p2", type=float, required=True)
@click.option("--r", "r", type=str, default="2", show_default=True)
@click.option("--n-list", default="4,8,16", show_default=True)
@_mc_options
@_output_options
def inclusion(kind, m, q, q2, p1, p2, r, n_list, seed, samples, blocks, workers, out, fmt):
    """Track pi_p1 / pi_p2 along a family of operators indexed by N."""
    _run("inclusion", {"kind": kind, "m": m, "q": q, "q2": q2, "p1": p1, "p2": p2, "r": r,
                       "n_list": n_list, "seed": seed, "samples": samples, "blocks": blocks,
                       "workers": workers}, out, fmt)


@main.command("gamma-bound")
@click.argument("operator", type=str)
@click.option("--p", "p", type=float, required=True)
@click.option("--field", type=click.Choice(["real", "complex"]), default="complex",
              show_default=True)
@click.option("--restarts", type=click.IntRange(min=1), default=DEFAULT_RESTARTS, show_default=True)
@_mc_options
@_output_options
def gamma_bound(operator, p, field, restarts, seed, samples, blocks, workers, out, fmt):
    """Check the Gamma-ratio upper bound for an operator on l_2^N."""
    _run("gamma-bound", {"operator": operator, "p": p, "field": field, "restarts": restarts,
                         "seed": seed, "samples": samples, "blocks": blocks,
                         "workers": workers}, out, fmt)


@main.command("make-operator")
@click.option("--kind", type=click.Choice(["phi", "random-sign", "random-dense", "identity", "form"]),
              required=True)
@click.option("--m", "m", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--N", "N", type=click.IntRange(min=1), default=4, show_default=True)
@click.option("--q", "q", type=str, default="2", show_default=True)
@click.option("--r", "r", type=str, default="2", show_default=True)
@click.option("--seed", type=int, default=None, help="Required for random kinds.")
@click.option("--field", type=click.Choice(["real", "complex"]), default="real", show_default=True)
@click.option("--scalar", is_flag=True, help="Scalar-valued (random-dense only).")
@click.option("--coeffs", default=None, help="Comma-separated coefficients of a linear form.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the operator document here.")
def make_operator(kind, m, N, q, r, seed, field, scalar, coeffs, out):
    """Build an operator and print (or save) its JSON document."""
    if kind.startswith("random") and seed is None:
        click.echo("parameter error: --seed is required for random operators", err=True)
        sys.exit(EXIT_PARAM)
    cfg = {"kind": kind, "m": m, "N": N, "q": q, "r": r, "seed": seed, "field": field,
           "scalar": scalar, "coeffs": coeffs}
    try:
        outputs, _ = execute("make-operator", cfg)
        text = json.dumps(outputs["operator"], indent=1)
        if out:
            Path(out).write_text(text + "\n")
        click.echo(text)
    except ParameterError as exc:
        click.echo(f"parameter error: {exc}", err=True)
        sys.exit(EXIT_PARAM)
    except DomainError as exc:
        click.echo(f"refused: {exc}", err=True)
        sys.exit(EXIT_REFUSAL)
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        sys.exit(EXIT_IO)


@main.command("rerun")
@click.argument("record", type=str)
@click.option("--workers", type=click.IntRange(min=1), default=None,
              help="Override the worker count; results must not change.")
@_output_options
def rerun(record, workers, out, fmt):
    """Re-execute the config echoed in a saved result RECORD."""
    try:
        doc = json.loads(Path(record).read_text())
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        sys.exit(EXIT_IO)
    except json.JSONDecodeError as exc:
        click.echo(f"parameter error: record is not JSON: {exc}", err=True)
        sys.exit(EXIT_PARAM)
    if not isinstance(doc, dict) or "command" not in doc or "config" not in doc:
        click.echo("parameter error: not a result record", err=True)
        sys.exit(EXIT_PARAM)
    config = {k: v for k, v in doc["config"].items() if k not in ("out", "format")}
    if workers is not None and "workers" in config:
        config["workers"] = workers
    _run(doc["command"], config, out, fmt)


if __name__ == "__main__":
    main()
