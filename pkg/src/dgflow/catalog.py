"""Named flow problems with closed-form solutions for studies and tests.

Every entry has inflow data compatible with its initial data, so the exact
solution stays as smooth as the closed-form formula suggests (decay1d is the
exception: its zero inflow data meets the initial wave in a kink along the
characteristic through the inlet corner, which is exactly what its
norm-decay role needs).  Coefficient callables broadcast over points and
accept per-point time arrays.
"""

from __future__ import annotations

import numpy as np

from .flow import Box, FlowProblem, Interval

__all__ = ["CATALOG", "get_problem", "problem_names"]

_SQ2 = np.sqrt(2.0)
_OMEGA = 2.0 * np.pi


def _n(x) -> int:
    return len(np.atleast_2d(x))


def _bcast(v, n: int) -> np.ndarray:
    out = np.asarray(v, dtype=float)
    if out.ndim == 0:
        return np.full(n, float(out))
    return np.broadcast_to(out, (n,)).copy()


def _translate1d() -> FlowProblem:
    return FlowProblem(
        name="translate1d",
        domain=Interval(0.0, 1.0),
        a=lambda x, t: np.ones((_n(x), 1)),
        c=lambda x, t: np.zeros(_n(x)),
        u0=lambda x: np.sin(np.pi * np.atleast_2d(x)[:, 0]),
        u_D=lambda x, t: _bcast(-np.sin(np.pi * np.asarray(t, dtype=float)), _n(x)),
        div_a=lambda x, t: np.zeros(_n(x)),
        grad_a=lambda x, t: np.zeros((_n(x), 1, 1)),
        exact=lambda x, t: np.sin(np.pi * (np.atleast_2d(x)[:, 0] - t)),
    )


def _stretch1d() -> FlowProblem:
    # velocity x+1: particles follow x(t) = (x0+1) e^{t-t0} - 1
    return FlowProblem(
        name="stretch1d",
        domain=Interval(0.0, 1.0),
        a=lambda x, t: np.atleast_2d(x)[:, :1] + 1.0,
        c=lambda x, t: np.zeros(_n(x)),
        u0=lambda x: np.sin(np.pi * np.atleast_2d(x)[:, 0]),
        u_D=lambda x, t: _bcast(
            np.sin(np.pi * (np.exp(-np.asarray(t, dtype=float)) - 1.0)), _n(x)),
        div_a=lambda x, t: np.ones(_n(x)),
        grad_a=lambda x, t: np.ones((_n(x), 1, 1)),
        exact=lambda x, t: np.sin(np.pi * (
            (np.atleast_2d(x)[:, 0] + 1.0) * np.exp(-t) - 1.0)),
    )


def _decay1d() -> FlowProblem:
    def exact(x, t):
        x0 = np.atleast_2d(x)[:, 0] - t
        return np.where(x0 >= 0.0, np.sin(np.pi * x0) * np.exp(-t), 0.0)

    return FlowProblem(
        name="decay1d",
        domain=Interval(0.0, 1.0),
        a=lambda x, t: np.ones((_n(x), 1)),
        c=lambda x, t: np.ones(_n(x)),
        u0=lambda x: np.sin(np.pi * np.atleast_2d(x)[:, 0]),
        u_D=lambda x, t: np.zeros(_n(x)),
        div_a=lambda x, t: np.zeros(_n(x)),
        grad_a=lambda x, t: np.zeros((_n(x), 1, 1)),
        exact=exact,
    )


def _diag2d() -> FlowProblem:
    ax = 1.0 / _SQ2

    def u0(x):
        x = np.atleast_2d(x)
        return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])

    def exact(x, t):
        x = np.atleast_2d(x)
        return (np.sin(np.pi * (x[:, 0] - ax * t))
                * np.sin(np.pi * (x[:, 1] - ax * t)) * np.exp(0.3 * t))

    return FlowProblem(
        name="diag2d",
        domain=Box((0.0, 0.0), (1.0, 1.0)),
        a=lambda x, t: np.full((_n(x), 2), ax),
        c=lambda x, t: np.full(_n(x), -0.3),
        u0=u0,
        u_D=lambda x, t: exact(x, t),
        div_a=lambda x, t: np.zeros(_n(x)),
        grad_a=lambda x, t: np.zeros((_n(x), 2, 2)),
        exact=exact,
    )


def _negdiv1d() -> FlowProblem:
    # same velocity as stretch1d but with a solution that keeps entering
    # through the inlet forever: u = sin(omega (t - ln(x+1))), bounded for
    # all time even though c - div(a)/2 = -1/2 < 0
    def exact(x, t):
        return np.sin(_OMEGA * (t - np.log(np.atleast_2d(x)[:, 0] + 1.0)))

    return FlowProblem(
        name="negdiv1d",
        domain=Interval(0.0, 1.0),
        a=lambda x, t: np.atleast_2d(x)[:, :1] + 1.0,
        c=lambda x, t: np.zeros(_n(x)),
        u0=lambda x: -np.sin(_OMEGA * np.log(np.atleast_2d(x)[:, 0] + 1.0)),
        u_D=lambda x, t: _bcast(np.sin(_OMEGA * np.asarray(t, dtype=float)), _n(x)),
        div_a=lambda x, t: np.ones(_n(x)),
        grad_a=lambda x, t: np.ones((_n(x), 1, 1)),
        exact=exact,
    )


CATALOG = {
    "translate1d": _translate1d,
    "stretch1d": _stretch1d,
    "decay1d": _decay1d,
    "diag2d": _diag2d,
    "negdiv1d": _negdiv1d,
}


def problem_names() -> list:
    return sorted(CATALOG)


def get_problem(name: str) -> FlowProblem:
    """Fresh instance of a catalog problem; unknown names list the options."""
    try:
        build = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; have {', '.join(problem_names())}") \
            from None
    return build()
