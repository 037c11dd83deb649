"""Command line front end: convergence, growth, and pathline diagnostics.

Subcommands: converge, growth, mu, pathline, ellipticity.  Each takes
--config <file> (line-oriented ``key = value`` with [section] headers),
optional --out <dir> for CSV output, and --assert to turn configured
thresholds into the exit status.  Exit codes: 0 success, 1 usage error,
2 numerical failure, 3 threshold failure under --assert.

Environment: DG_THREADS caps the worker count for independent runs;
DG_DETERMINISTIC=1 forces single-threaded deterministic mode.  CSVs start
with a sorted ``# key = value`` block echoing the resolved configuration,
so identical configs reproduce byte-identical files.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .basis import make_basis
from .catalog import get_problem
from .errmetrics import ErrorSeries, eoc_with_flags, face_norms, l2_error, \
    smooth_evaluator
from .expressions import ExpressionError, parse_expression
from .flow import Box, FlowProblem, Interval
from .mesh import build_interval_mesh, build_triangle_mesh
from .pathlines import CharacteristicSolution, LinearTimeMu, SamplingSpec, \
    ZeroMu, build_mu, ellipticity_margin, lipschitz_estimates, residence_time, \
    trace_backward, trace_backward_batch
from .timestepping import EvolveConfig, InstabilityError, evolve

__all__ = ["main", "UsageError"]


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- config ---

_PROBLEM_KEYS = {"name", "a", "a_x", "a_y", "c", "u0", "u_D", "div_a", "domain"}
_SCHEMAS = {
    "problem": _PROBLEM_KEYS,
    "converge": {"degrees", "sizes", "t_end", "cfl", "scheme", "pattern",
                 "sample_every", "assert_order", "deterministic"},
    "growth": {"p", "n", "t_end", "cfl", "scheme", "pattern", "samples",
               "assert_ratio", "t_hat_horizon", "deterministic"},
    "mu": {"gamma0", "n_space", "n_time", "t_max", "tol", "seed",
           "assert_bounded", "assert_margin"},
    "pathline": {"x", "t", "tol"},
    "ellipticity": {"gamma0", "alpha", "n_space", "n_time", "t_max", "tol",
                    "seed", "assert_margin"},
}


def parse_config(text: str) -> dict:
    """Sections of key = value pairs; strict about anything unexpected."""
    sections: dict = {}
    current: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in _SCHEMAS:
                raise UsageError(f"line {lineno}: unknown section [{current}] "
                                 f"(have {', '.join(sorted(_SCHEMAS))})")
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise UsageError(f"line {lineno}: expected key = value, got {raw!r}")
        if current is None:
            raise UsageError(f"line {lineno}: key before any [section] header")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMAS[current]:
            raise UsageError(f"line {lineno}: unknown key {key!r} in [{current}] "
                             f"(have {', '.join(sorted(_SCHEMAS[current]))})")
        if key in sections[current]:
            raise UsageError(f"line {lineno}: duplicate key {key!r} in [{current}]")
        sections[current][key] = value
    return sections


class Section:
    """Typed access to one config section, with defaults."""

    def __init__(self, name: str, values: dict):
        self.name = name
        self.values = dict(values)
        self.resolved: dict = {}

    def _fetch(self, key: str, default):
        if key in self.values:
            return self.values[key]
        if default is None:
            raise UsageError(f"[{self.name}] is missing required key {key!r}")
        return default

    def get_str(self, key: str, default=None) -> str:
        val = str(self._fetch(key, default))
        self.resolved[key] = val
        return val

    def get_float(self, key: str, default=None) -> float:
        raw = self._fetch(key, default)
        try:
            val = float(raw)
        except (TypeError, ValueError):
            raise UsageError(f"[{self.name}] {key} = {raw!r} is not a number")
        self.resolved[key] = val
        return val

    def get_int(self, key: str, default=None) -> int:
        raw = self._fetch(key, default)
        try:
            val = int(str(raw))
        except (TypeError, ValueError):
            raise UsageError(f"[{self.name}] {key} = {raw!r} is not an integer")
        self.resolved[key] = val
        return val

    def get_bool(self, key: str, default=None) -> bool:
        raw = self._fetch(key, default)
        if isinstance(raw, bool):
            val = raw
        elif str(raw).lower() in ("true", "yes", "1"):
            val = True
        elif str(raw).lower() in ("false", "no", "0"):
            val = False
        else:
            raise UsageError(f"[{self.name}] {key} = {raw!r} is not a boolean")
        self.resolved[key] = val
        return val

    def get_floats(self, key: str, default=None) -> list:
        raw = self._fetch(key, default)
        if isinstance(raw, (list, tuple)):
            vals = [float(v) for v in raw]
        else:
            try:
                vals = [float(v) for v in str(raw).split(",") if v.strip()]
            except ValueError:
                raise UsageError(f"[{self.name}] {key} = {raw!r} is not a "
                                 "comma-separated number list")
        if not vals:
            raise UsageError(f"[{self.name}] {key} must be a non-empty list")
        self.resolved[key] = ",".join(format(v, ".17g") for v in vals)
        return vals

    def get_ints(self, key: str, default=None) -> list:
        vals = self.get_floats(key, default)
        out = [int(v) for v in vals]
        if any(o != v for o, v in zip(out, vals)):
            raise UsageError(f"[{self.name}] {key} must contain integers")
        self.resolved[key] = ",".join(str(v) for v in out)
        return out

    def has(self, key: str) -> bool:
        return key in self.values


def _section(cfg: dict, name: str) -> Section:
    return Section(name, cfg.get(name, {}))


# --------------------------------------------------------------- problem ---

def _inline_problem(sec: Section) -> FlowProblem:
    dom_vals = sec.get_floats("domain")
    if len(dom_vals) == 2:
        domain = Interval(dom_vals[0], dom_vals[1])
    elif len(dom_vals) == 4:
        # x_lo, x_hi, y_lo, y_hi: each axis written like the interval form
        domain = Box((dom_vals[0], dom_vals[2]), (dom_vals[1], dom_vals[3]))
    else:
        raise UsageError("[problem] domain needs 2 numbers (interval) or 4 (box)")
    dim = domain.dim

    def expr(key: str, allow_t: bool = True, required: bool = True):
        if not sec.has(key):
            if required:
                raise UsageError(f"[problem] inline definition needs {key!r}")
            return None
        e = parse_expression(sec.get_str(key))
        if dim == 1 and "y" in e.variables:
            raise UsageError(f"[problem] {key} uses y but the domain is 1D")
        if not allow_t and "t" in e.variables:
            raise UsageError(f"[problem] {key} must not depend on t")
        return e

    if dim == 1:
        if sec.has("a_x") or sec.has("a_y"):
            raise UsageError("[problem] 1D velocity goes in key 'a'")
        a_exprs = [expr("a")]
    else:
        if sec.has("a"):
            raise UsageError("[problem] 2D velocity goes in keys 'a_x', 'a_y'")
        a_exprs = [expr("a_x"), expr("a_y")]
    c_expr = expr("c")
    u0_expr = expr("u0", allow_t=False)
    ud_expr = expr("u_D")
    div_expr = expr("div_a", required=False)

    def a_fn(x, t, _ex=tuple(a_exprs)):
        return np.stack([e.evaluate(x, t) for e in _ex], axis=1)

    flow = FlowProblem(
        name="inline",
        domain=domain,
        a=a_fn,
        c=lambda x, t: c_expr.evaluate(x, t),
        u0=lambda x: u0_expr.evaluate(x, 0.0),
        u_D=lambda x, t: ud_expr.evaluate(x, t),
        div_a=(lambda x, t: div_expr.evaluate(x, t)) if div_expr else None,
    )
    # catch broken expressions up front at the domain corners
    if dim == 1:
        corners = np.array([[domain.lo], [domain.hi]])
    else:
        corners = np.array([[domain.lo[0], domain.lo[1]],
                            [domain.hi[0], domain.hi[1]],
                            [domain.lo[0], domain.hi[1]],
                            [domain.hi[0], domain.lo[1]]])
    for t in (0.0, 1.0):
        for vals in (flow.a(corners, t), flow.c(corners, t), flow.u0(corners),
                     flow.u_D(corners, t), flow.div(corners, t)):
            if not np.all(np.isfinite(np.asarray(vals, dtype=float))):
                raise UsageError("[problem] expressions are not finite at the "
                                 "domain corners")
    return flow


def resolve_problem(cfg: dict) -> tuple:
    sec = _section(cfg, "problem")
    if not sec.values:
        raise UsageError("config needs a [problem] section")
    if sec.has("name"):
        extra = set(sec.values) - {"name"}
        if extra:
            raise UsageError(f"[problem] name excludes inline keys {sorted(extra)}")
        flow = get_problem(sec.get_str("name"))
    else:
        flow = _inline_problem(sec)
    return flow, sec


# ------------------------------------------------------------ csv output ---

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, meta: dict, header: list, rows: list) -> None:
    lines = [f"# {k} = {_fmt(v)}" for k, v in sorted(meta.items())]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _meta_base(command: str, flow: FlowProblem, sections: list) -> dict:
    meta = {"tool": "dgflow", "version": __version__, "command": command,
            "problem": flow.name, "dim": flow.dim}
    for sec in sections:
        for k, v in sec.resolved.items():
            meta[f"{sec.name}.{k}"] = v
    return meta


def _workers(n_jobs: int, deterministic: bool) -> int:
    if deterministic or os.environ.get("DG_DETERMINISTIC") == "1":
        return 1
    cap = os.environ.get("DG_THREADS")
    if cap is not None:
        try:
            cap_n = max(1, int(cap))
        except ValueError:
            raise UsageError(f"DG_THREADS = {cap!r} is not an integer")
    else:
        cap_n = min(4, os.cpu_count() or 1)
    return max(1, min(n_jobs, cap_n))


def _exact_evaluator(flow: FlowProblem):
    if flow.exact is not None:
        return smooth_evaluator(lambda x, t, _f=flow.exact: _f(x, t))
    return CharacteristicSolution(flow)


def _build_mesh(flow: FlowProblem, n: int, pattern: str):
    if flow.dim == 1:
        return build_interval_mesh(flow.domain.lo, flow.domain.hi, n)
    return build_triangle_mesh(flow.domain.lo[0], flow.domain.lo[1],
                               flow.domain.hi[0], flow.domain.hi[1], n, n,
                               pattern=pattern)


# ------------------------------------------------------------- converge ---

def _guard_blowup(t: float, u) -> None:
    # squared norms overflow long before the stepper sees a non-finite
    # coefficient, so catch runaway growth here and report it as a
    # numerical failure rather than a bad error sample
    mx = float(np.max(np.abs(u.coeffs))) if u.coeffs.size else 0.0
    if not math.isfinite(mx) or mx > 1e150:
        raise InstabilityError(
            t, math.nan,
            message=f"solution blew up by t={t:.6g} (max coefficient {mx:.3g})")


def _run_series(flow: FlowProblem, p: int, n: int, pattern: str, t_end: float,
                cfl: float, scheme: str, sample_every: int) -> ErrorSeries:
    mesh = _build_mesh(flow, n, pattern)
    basis = make_basis(flow.dim, p)
    exact = _exact_evaluator(flow)
    series = ErrorSeries()

    def observe(t, u):
        _guard_blowup(t, u)
        fn = face_norms(u, flow, t, exact)
        series.add(t, l2_error(u, exact, t), fn.jump_sq, fn.boundary_sq,
                   u.norm_l2())

    evolve(flow, mesh, basis,
           EvolveConfig(t_end=t_end, cfl=cfl, scheme=scheme,
                        sample_every=sample_every),
           observer=observe)
    series.h_max = mesh.h_max
    return series


def cmd_converge(cfg: dict, out_dir: Path, do_assert: bool) -> int:
    flow, psec = resolve_problem(cfg)
    sec = _section(cfg, "converge")
    degrees = sec.get_ints("degrees", [1, 2])
    sizes = sec.get_ints("sizes", [8, 16, 32])
    t_end = sec.get_float("t_end", 0.5)
    cfl = sec.get_float("cfl", 0.2)
    scheme = sec.get_str("scheme", "rk4")
    pattern = sec.get_str("pattern", "diagonal")
    sample_every = sec.get_int("sample_every", 10)
    deterministic = sec.get_bool("deterministic", True)
    assert_order = sec.get_float("assert_order", math.nan) if sec.has("assert_order") \
        else None
    if sorted(sizes) != sizes or len(set(sizes)) != len(sizes):
        raise UsageError("[converge] sizes must be strictly increasing")

    jobs = [(p, n) for p in degrees for n in sizes]
    results: dict = {}

    def run(job):
        p, n = job
        try:
            return job, _run_series(flow, p, n, pattern, t_end, cfl, scheme,
                                    sample_every)
        except InstabilityError as err:
            return job, err

    workers = _workers(len(jobs), deterministic)
    if workers == 1:
        for job in jobs:
            results[job] = run(job)[1]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for job, res in pool.map(run, jobs):
                results[job] = res

    header = ["problem", "p", "n", "h", "linf_l2", "l2_l2", "face_int",
              "eoc_linf", "eoc_l2", "flags"]
    rows = []
    worst_final_order = math.inf
    any_unstable = False
    print(f"convergence study: {flow.name}, t_end={t_end:g}, scheme={scheme}")
    for p in degrees:
        chain = []
        for n in sizes:
            res = results[(p, n)]
            if isinstance(res, InstabilityError):
                any_unstable = True
                rows.append([flow.name, p, n, math.nan, math.nan, math.nan,
                             math.nan, "", "", "unstable"])
                print(f"  p={p} n={n:4d}  UNSTABLE ({res})")
                continue
            h = res.h_max
            chain.append((h, res.linf_l2, res.l2_l2, res.face_integral, n))
            eoc_linf = eoc_l2 = ""
            flags = ""
            if len(chain) >= 2:
                (h0, e0, q0, _, _), (h1, e1, q1, _, _) = chain[-2], chain[-1]
                orders, fl = eoc_with_flags([(h0, e0), (h1, e1)])
                eoc_linf = orders[0]
                eoc_l2 = eoc_with_flags([(h0, q0), (h1, q1)])[0][0]
                if fl[0]:
                    flags = "noise_floor"
            rows.append([flow.name, p, n, h, res.linf_l2, res.l2_l2,
                         res.face_integral, eoc_linf, eoc_l2, flags])
            shown = f"{eoc_linf:.3f}" if eoc_linf != "" else "  -  "
            print(f"  p={p} n={n:4d}  h={h:.5f}  linf_l2={res.linf_l2:.6e}  "
                  f"l2_l2={res.l2_l2:.6e}  eoc={shown} {flags}")
        if len(chain) >= 2 and not rows[-1][-1] == "noise_floor":
            final = rows[-1][7]
            if final != "":
                worst_final_order = min(worst_final_order, final)

    meta = _meta_base("converge", flow, [psec, sec])
    write_csv(out_dir / "converge.csv", meta, header, rows)
    print(f"wrote {out_dir / 'converge.csv'}")

    if any_unstable:
        return 2
    if do_assert and assert_order is not None:
        if not (worst_final_order >= assert_order):
            print(f"assert failed: final order {worst_final_order:.3f} < "
                  f"{assert_order:g}", file=sys.stderr)
            return 3
    return 0


# --------------------------------------------------------------- growth ---

def cmd_growth(cfg: dict, out_dir: Path, do_assert: bool) -> int:
    flow, psec = resolve_problem(cfg)
    sec = _section(cfg, "growth")
    p = sec.get_int("p", 1)
    n = sec.get_int("n", 32)
    t_end = sec.get_float("t_end", 50.0)
    cfl = sec.get_float("cfl", 0.2)
    scheme = sec.get_str("scheme", "rk4")
    pattern = sec.get_str("pattern", "diagonal")
    samples = sec.get_int("samples", 200)
    horizon = sec.get_float("t_hat_horizon", min(t_end, 20.0))
    assert_ratio = sec.get_float("assert_ratio", math.nan) if sec.has("assert_ratio") \
        else None

    res = residence_time(flow, flow.domain, horizon, n_samples=16)
    if res.possibly_unbounded:
        print("warning: some particles never left within the horizon; the "
              "long-time error bound has no reason to hold", file=sys.stderr)

    mesh = _build_mesh(flow, n, pattern)
    basis = make_basis(flow.dim, p)
    exact = _exact_evaluator(flow)
    series = ErrorSeries()

    def observe(t, u):
        _guard_blowup(t, u)
        fn = face_norms(u, flow, t, exact)
        series.add(t, l2_error(u, exact, t), fn.jump_sq, fn.boundary_sq,
                   u.norm_l2())

    sample_times = [t_end * i / samples for i in range(1, samples + 1)]
    sample_times[-1] = t_end
    evolve(flow, mesh, basis,
           EvolveConfig(t_end=t_end, cfl=cfl, scheme=scheme,
                        sample_times=sample_times),
           observer=observe)

    times = np.array(series.times)
    errs = np.array(series.l2_errors)
    early = errs[times <= 0.5 * t_end]
    late = errs[times >= 0.5 * t_end]
    ratio = float(late.max() / max(early.max(), 1e-300))

    grid = flow.domain.interior_grid(64)
    rate = 0.0
    for t in np.linspace(0.0, t_end, 33):
        vals = np.abs(np.asarray(flow.c(grid, float(t)), dtype=float)
                      - 0.5 * flow.div(grid, float(t)))
        rate = max(rate, float(vals.max()))
    gronwall = math.exp(min(rate * 0.5 * t_end, 700.0))

    header = ["t", "l2_error", "jump_sq", "boundary_sq", "linf_l2", "l2_l2",
              "face_int"]
    rows = []
    run = ErrorSeries()
    for i, t in enumerate(series.times):
        run.add(t, series.l2_errors[i], series.jump_sqs[i], series.boundary_sqs[i])
        rows.append([t, series.l2_errors[i], series.jump_sqs[i],
                     series.boundary_sqs[i], run.linf_l2, run.l2_l2,
                     run.face_integral])

    meta = _meta_base("growth", flow, [psec, sec])
    meta.update({"growth_ratio": ratio, "gronwall_rate": rate,
                 "gronwall_factor": gronwall, "t_hat": res.t_hat,
                 "possibly_unbounded": res.possibly_unbounded})
    write_csv(out_dir / "growth.csv", meta, header, rows)
    print(f"growth study: {flow.name}, p={p}, n={n}, t_end={t_end:g}")
    print(f"  max error late/early ratio = {ratio:.4f}")
    print(f"  naive exponential reference factor = {gronwall:.4e}")
    print(f"  longest observed inside-time = {res.t_hat:.6f}"
          + (" (possibly unbounded)" if res.possibly_unbounded else ""))
    print(f"wrote {out_dir / 'growth.csv'}")

    if do_assert and assert_ratio is not None and not (ratio <= assert_ratio):
        print(f"assert failed: growth ratio {ratio:.4f} > {assert_ratio:g}",
              file=sys.stderr)
        return 3
    return 0


# ------------------------------------------------------------------- mu ---

def _mu_spec(sec: Section) -> SamplingSpec:
    return SamplingSpec(
        n_space=sec.get_int("n_space", 64),
        n_time=sec.get_int("n_time", 64),
        t_max=sec.get_float("t_max", 5.0),
        tol=sec.get_float("tol", 1e-8),
        seed=sec.get_int("seed", 0),
    )


def cmd_mu(cfg: dict, out_dir: Path, do_assert: bool) -> int:
    flow, psec = resolve_problem(cfg)
    sec = _section(cfg, "mu")
    gamma0 = sec.get_float("gamma0", 0.5)
    spec = _mu_spec(sec)
    assert_bounded = sec.get_bool("assert_bounded", False)
    assert_margin = sec.get_float("assert_margin", math.nan) if sec.has("assert_margin") \
        else None

    fld = build_mu(flow, gamma0, spec)
    small = SamplingSpec(n_space=min(spec.n_space, 24), n_time=min(spec.n_time, 24),
                         t_max=spec.t_max, tol=spec.tol, seed=spec.seed)
    margin = ellipticity_margin(fld, flow, small)
    lips = lipschitz_estimates(fld, small, flow=flow)

    dim = flow.dim
    xs = flow.domain.interior_grid(spec.n_space)
    times = np.linspace(0.0, spec.t_max, spec.n_time)
    header = (["x", "t", "mu1", "kind", "t0", "x0", "status"] if dim == 1 else
              ["x", "y", "t", "mu1", "kind", "t0", "x0", "y0", "status"])
    rows = []
    for t in times:
        batch = trace_backward_batch(flow, xs, float(t), tol=spec.tol)
        kinds = np.where(batch.exited & (batch.t_end > 1e-13), "inlet", "initial")
        for i in range(len(xs)):
            m1 = float(t) - float(batch.t_end[i])
            cells = list(xs[i]) + [float(t), m1, str(kinds[i]),
                                   float(batch.t_end[i])] + list(batch.x_end[i]) \
                + [str(batch.status[i])]
            rows.append(cells)

    meta = _meta_base("mu", flow, [psec, sec])
    meta.update({
        "lambda": fld.lam, "gamma0": gamma0, "sampled_min": fld.sampled_min,
        "margin": margin.margin, "n_excluded": margin.n_excluded,
        "l_space": lips.l_space, "l_time": lips.l_time,
        "a_min_inlet": lips.a_min_inlet, "tangential_inlet": lips.tangential_inlet,
        "t_hat": fld.residence.t_hat,
        "possibly_unbounded": fld.residence.possibly_unbounded,
        "mu_max_sampled": fld.mu_max_sampled,
    })
    write_csv(out_dir / "mu.csv", meta, header, rows)
    print(f"mu field: {flow.name}, gamma0={gamma0:g}, lambda={fld.lam:.6f}")
    print(f"  sampled min of c - div(a)/2 = {fld.sampled_min:.6f}")
    print(f"  ellipticity margin = {margin.margin:.6f} "
          f"({margin.n_excluded} samples excluded)")
    print(f"  L_space = {lips.l_space:.4f}  L_time = {lips.l_time:.4f}  "
          f"inlet min(-a.n) = {lips.a_min_inlet:.4f}")
    print(f"  longest observed inside-time = {fld.residence.t_hat:.6f}"
          + (" (possibly unbounded)" if fld.residence.possibly_unbounded else ""))
    print(f"wrote {out_dir / 'mu.csv'}")

    if do_assert:
        if assert_bounded and fld.residence.possibly_unbounded:
            print("assert failed: residence flagged possibly unbounded",
                  file=sys.stderr)
            return 3
        if assert_margin is not None and not (margin.margin >= assert_margin):
            print(f"assert failed: margin {margin.margin:.6f} < {assert_margin:g}",
                  file=sys.stderr)
            return 3
    return 0


# ------------------------------------------------------------- pathline ---

def cmd_pathline(cfg: dict, out_dir: Path, do_assert: bool) -> int:
    flow, psec = resolve_problem(cfg)
    sec = _section(cfg, "pathline")
    xs = sec.get_floats("x")
    t = sec.get_float("t")
    tol = sec.get_float("tol", 1e-8)
    if len(xs) != flow.dim:
        raise UsageError(f"[pathline] x needs {flow.dim} coordinates for "
                         f"{flow.name}")

    origin = trace_backward(flow, np.array(xs), t, tol=tol, record_path=True)
    print(f"pathline through ({', '.join(format(v, 'g') for v in xs)}) at t={t:g}:")
    print(f"  kind   = {origin.kind}")
    print(f"  x0     = ({', '.join(format(v, '.10g') for v in origin.x0)})")
    print(f"  t0     = {origin.t0:.10g}")
    print(f"  mu1    = {origin.mu1:.10g}")
    print(f"  status = {origin.trace_status}")
    n_pts = 0 if origin.path_t is None else len(origin.path_t)
    print(f"  recorded points = {n_pts}")

    header = ["t", "x"] if flow.dim == 1 else ["t", "x", "y"]
    rows = []
    if origin.path_t is not None:
        order = np.argsort(origin.path_t, kind="stable")
        for i in order:
            rows.append([float(origin.path_t[i])] + list(origin.path_x[i]))
    meta = _meta_base("pathline", flow, [psec, sec])
    meta.update({"kind": origin.kind, "t0": origin.t0, "mu1": origin.mu1,
                 "status": origin.trace_status})
    write_csv(out_dir / "pathline.csv", meta, header, rows)
    print(f"wrote {out_dir / 'pathline.csv'}")

    if do_assert and origin.trace_status != "ok":
        print(f"assert failed: trace status {origin.trace_status}", file=sys.stderr)
        return 3
    return 0


# ----------------------------------------------------------- ellipticity ---

def cmd_ellipticity(cfg: dict, out_dir: Path, do_assert: bool) -> int:
    flow, psec = resolve_problem(cfg)
    sec = _section(cfg, "ellipticity")
    gamma0 = sec.get_float("gamma0", 0.5)
    spec = SamplingSpec(
        n_space=sec.get_int("n_space", 50),
        n_time=sec.get_int("n_time", 50),
        t_max=sec.get_float("t_max", 2.0),
        tol=sec.get_float("tol", 1e-8),
        seed=sec.get_int("seed", 0),
    )
    assert_margin = sec.get_float("assert_margin", math.nan) if sec.has("assert_margin") \
        else None

    fld = build_mu(flow, gamma0, spec)
    alpha = sec.get_float("alpha", fld.lam)
    variants = [("zero", ZeroMu()), ("linear_time", LinearTimeMu(alpha)),
                ("pathline", fld)]
    reports = []
    print(f"ellipticity margins: {flow.name}, gamma0={gamma0:g}, "
          f"lambda={fld.lam:.6f}, alpha={alpha:g}")
    for label, mu_obj in variants:
        rep = ellipticity_margin(mu_obj, flow, spec)
        reports.append((label, rep))
        print(f"  mu = {label:12s} margin = {rep.margin: .6f}  "
              f"(min at x=({', '.join(format(v, '.4g') for v in rep.arg_x)}), "
              f"t={rep.arg_t:.4g}; {rep.n_excluded} excluded)")

    header = ["variant", "margin", "arg_t", "n_samples", "n_excluded"] \
        + (["arg_x"] if flow.dim == 1 else ["arg_x", "arg_y"])
    rows = []
    for label, rep in reports:
        rows.append([label, rep.margin, rep.arg_t, rep.n_samples, rep.n_excluded]
                    + list(rep.arg_x))
    meta = _meta_base("ellipticity", flow, [psec, sec])
    meta.update({"lambda": fld.lam, "gamma0": gamma0, "alpha": alpha,
                 "sampled_min": fld.sampled_min})
    write_csv(out_dir / "ellipticity.csv", meta, header, rows)
    print(f"wrote {out_dir / 'ellipticity.csv'}")

    built = reports[-1][1]
    if do_assert and assert_margin is not None and not (built.margin >= assert_margin):
        print(f"assert failed: pathline margin {built.margin:.6f} < "
              f"{assert_margin:g}", file=sys.stderr)
        return 3
    return 0


# ----------------------------------------------------------------- main ---

_COMMANDS = {
    "converge": cmd_converge,
    "growth": cmd_growth,
    "mu": cmd_mu,
    "pathline": cmd_pathline,
    "ellipticity": cmd_ellipticity,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dgflow",
        description="Upwind DG advection-reaction solver and pathline "
                    "diagnostics.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("converge", "mesh-refinement error study"),
        ("growth", "long-time error growth study"),
        ("mu", "inside-time field, residence and regularity diagnostics"),
        ("pathline", "trace one particle to its origin"),
        ("ellipticity", "growth-rate margins for three weight choices"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="key = value config file")
        sp.add_argument("--assert", dest="do_assert", action="store_true",
                        help="exit 3 when configured thresholds fail")
        sp.add_argument("--out", default=".", help="output directory for CSVs")
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as err:
        # argparse exits 2 on bad argv; fold that into the usage-error code
        return 0 if err.code == 0 else 1
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as err:
        print(f"cannot read config: {err}", file=sys.stderr)
        return 1
    try:
        cfg = parse_config(text)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out_dir, args.do_assert)
    except (UsageError, ExpressionError, ValueError, KeyError) as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except InstabilityError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2
    except RuntimeError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
