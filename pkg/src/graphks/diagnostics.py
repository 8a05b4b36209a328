"""Norms, smoothing-exponent fits, and a priori bound checks.

The operator-norm fitter probes the semigroup (or its composition with the
edge derivative) with smooth localized bumps, takes the best Rayleigh-type
quotient per time, and fits a power law to the resulting envelope.  The
expected exponents are -(1/2)(1/p - 1/q) for the plain semigroup and an extra
-1/2 when the derivative rides along.

The L^1 bound checker reproduces the comparison ODE for the total mass under
logistic-type growth and verifies solver output against it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import BoundViolated
from .grid import GridFunction, Mesh
from .kernel import HeatKernelPlan


# ---------------------------------------------------------------------------
# Lebesgue and Sobolev norms


def lp_norm(u: GridFunction, p: float) -> float:
    if p == math.inf:
        return float(max(np.abs(a).max() for a in u.samples))
    if p < 1:
        raise ValueError("p must be >= 1")
    acc = sum(
        float(w @ (np.abs(a) ** p)) for w, a in zip(u.mesh.trapezoid, u.samples)
    )
    return acc ** (1.0 / p)


def w1p_norm(u: GridFunction, p: float) -> float:
    du = u.derivative()
    if p == math.inf:
        return max(lp_norm(u, p), lp_norm(du, p))
    return (lp_norm(u, p) ** p + lp_norm(du, p) ** p) ** (1.0 / p)


# ---------------------------------------------------------------------------
# operator-norm power-law fits


@dataclass
class NormFitResult:
    op_kind: str
    p: float
    q: float
    times: np.ndarray
    empirical_norms: np.ndarray
    fitted_slope: float
    target: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.fitted_slope - self.target) <= self.tolerance


def norm_target(op_kind: str, p: float, q: float) -> float:
    """Expected log-log slope of t -> ||op(t)||_{p->q}."""
    base = -0.5 * (1.0 / p - 1.0 / q)
    if op_kind == "heat":
        return base
    if op_kind == "heat_dx":
        return base - 0.5
    raise ValueError(f"unknown op_kind {op_kind!r}")


def _bump_probes(mesh: Mesh, widths, rng, per_width: int):
    """Localized probes: Gaussian bumps over a width grid, signed multi-bump
    combinations, and single-node spikes (delta approximants, one mid-edge and
    one vertex-adjacent per edge)."""
    probes = []
    edges = mesh.graph.edges
    for w in widths:
        # deterministic bumps: mid-edge and both vertices of edge 0 (vertex
        # reflection doubles the kernel there), then random centers
        centers = [(0, 0.5 * edges[0].length), (0, 0.0), (0, edges[0].length)]
        for _ in range(per_width - 1):
            k = int(rng.integers(len(edges)))
            centers.append((k, float(rng.uniform(0.0, edges[k].length))))
        for k, c in centers:
            vals = [np.zeros(n + 1) for n in mesh.n]
            vals[k] = np.exp(-((mesh.x[k] - c) ** 2) / (2.0 * w * w))
            probes.append(GridFunction(mesh, vals))
        # one multi-bump probe per width with random signs
        vals = [np.zeros(n + 1) for n in mesh.n]
        for k, e in enumerate(edges):
            n_b = max(1, int(e.length / (4 * w)))
            for _ in range(n_b):
                c = float(rng.uniform(0.0, e.length))
                s = 1.0 if rng.random() < 0.5 else -1.0
                vals[k] += s * np.exp(-((mesh.x[k] - c) ** 2) / (2.0 * w * w))
        probes.append(GridFunction(mesh, vals))
    for k in range(len(edges)):
        # odd node indices carry the larger Simpson weight; keeping all spikes
        # on odd nodes makes their quotients scale consistently across t
        for node in (1, mesh.n[k] // 2 + 1, mesh.n[k] - 1):
            vals = [np.zeros(n + 1) for n in mesh.n]
            vals[k][node] = 1.0
            probes.append(GridFunction(mesh, vals))
    return probes


def fit_operator_norm(
    plan: HeatKernelPlan,
    mesh: Mesh,
    op_kind: str,
    p: float,
    q: float,
    times,
    n_probes_per_width: int = 4,
    seed: int = 0,
    tolerance: float = 0.05,
) -> NormFitResult:
    """Empirical ||op(t)||_{p->q} envelope over probe functions plus slope fit."""
    times = np.asarray(sorted(times), dtype=float)
    if len(times) < 2 or times[0] <= 0:
        raise ValueError("need at least two positive times")
    target = norm_target(op_kind, p, q)
    rng = np.random.default_rng(seed)
    hi = math.sqrt(2.0 * times[-1]) * 1.3
    widths = np.geomspace(1.5 * mesh.h_min, max(hi, 6 * mesh.h_min), 7)
    probes = _bump_probes(mesh, widths, rng, n_probes_per_width)
    apply_op = plan.apply_heat if op_kind == "heat" else plan.apply_heat_dx
    if op_kind not in ("heat", "heat_dx"):
        raise ValueError(f"unknown op_kind {op_kind!r}")
    norms = np.empty(len(times))
    for i, t in enumerate(times):
        best = 0.0
        for phi in probes:
            denom = lp_norm(phi, p)
            if denom == 0.0:
                continue
            best = max(best, lp_norm(apply_op(t, 0.0, phi), q) / denom)
        norms[i] = best
    slope = float(np.polyfit(np.log(times), np.log(norms), 1)[0])
    return NormFitResult(op_kind, p, q, times, norms, slope, target, tolerance)


# ---------------------------------------------------------------------------
# comparison ODE for the total mass under logistic growth


@dataclass
class OdeBound:
    branch: str
    value: float
    equilibrium: Optional[float] = None


def logistic_equilibrium(k: float, l: float, m: float, eps: float, total_length: float) -> float:
    """Positive zero of x -> k|G| + l x - m |G|^{-eps} x^{1+eps}."""
    if m <= 0:
        raise ValueError("equilibrium requires m > 0")
    phi = lambda x: k * total_length + l * x - m * total_length ** (-eps) * x ** (1.0 + eps)
    hi = 1.0
    while phi(hi) > 0:
        hi *= 2.0
        if hi > 1e30:
            raise ValueError("no finite equilibrium found")
    if k == 0.0 and l == 0.0:
        return 0.0
    lo = 0.0 if phi(0.0) > 0 else 1e-300
    return float(optimize.brentq(phi, lo, hi, xtol=1e-12, rtol=1e-14))


def l1_ode_bound(
    k: float, l: float, m: float, eps: float, total_length: float, mass0: float, t: float
) -> OdeBound:
    """Upper bound for the total mass at time t from the comparison ODE.

    Three regimes: saturating (m > 0), exponential (m = 0, l > 0) and linear
    (m = l = 0).
    """
    if min(k, l, m) < 0 or eps <= 0 or t < 0:
        raise ValueError("need k, l, m >= 0, eps > 0, t >= 0")
    if m > 0:
        r = logistic_equilibrium(k, l, m, eps, total_length)
        return OdeBound("saturating", max(mass0, r), equilibrium=r)
    if l > 0:
        val = math.exp(l * t) * mass0 + (k * total_length / l) * (math.exp(l * t) - 1.0)
        return OdeBound("exponential", val)
    return OdeBound("linear", mass0 + k * total_length * t)


def check_logistic_bounds(
    result,
    preset,
    total_length: float,
    qs=(1.0, 2.0, 4.0, 8.0),
    slack: float = 1e-3,
):
    """Verify solver output against the mass ODE bound; report per-q norm tables.

    `result` is a SolveResult; `preset` a LogisticPreset.  Raises BoundViolated
    when the recorded mass exceeds the bound beyond the slack.
    """
    mass0 = result.u_series[0].integral()
    rows = []
    worst_time, worst_margin = None, 0.0
    for t, u in zip(result.times, result.u_series):
        bound = l1_ode_bound(
            preset.k, preset.l, preset.m, preset.eps, total_length, mass0, t
        ).value
        mass = u.integral()
        margin = mass - bound * (1.0 + slack)
        if margin > worst_margin:
            worst_time, worst_margin = t, margin
        rows.append(
            {
                "time": t,
                "mass_u": mass,
                "mass_bound": bound,
                "ok": margin <= 0.0,
                **{f"l{q:g}_norm": lp_norm(u, q) for q in qs},
                "linf_norm": lp_norm(u, math.inf),
            }
        )
    if worst_time is not None:
        raise BoundViolated(
            f"mass exceeded the ODE bound by {worst_margin:.3e}",
            worst_time=worst_time,
            margin=worst_margin,
        )
    return rows
