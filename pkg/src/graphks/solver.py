"""Chemotaxis solvers on metric graphs.

Two routes to the same dynamics:

* a mild solver that iterates the Duhamel fixed-point maps window by window,
  applying the truncated path-sum heat semigroup, with product-integration
  weights that treat the (t-s)^{-1/2} scaling of the derivative semigroup; and
* a finite-volume IMEX reference solver (implicit diffusion, explicit upwinded
  chemotaxis flux and reactions) with exact discrete mass conservation.

A linear non-autonomous Duhamel solver handles drift/potential coefficients
frozen along a solved trajectory, which lets the nonlinear solution be
reproduced as the solution of a linear equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import QuadratureUnderResolved, SolveFailure, StepUnstable, TimeOutOfRange
from .grid import GridFunction, Mesh
from .kernel import HeatKernelPlan
from .laplacian import DiscreteLaplacian

COMPLETED = "completed"
BLOWUP = "blowup-detected"
PICARD_DIVERGED = "picard-diverged"


# ---------------------------------------------------------------------------
# nonlinearity descriptions


@dataclass
class Nonlinearity:
    """The reaction/advection triple (f1, f2, f3) with growth metadata.

    f1 multiplies the drift flux, f2 is the u-reaction, f3 drives v.  The
    quotient functions (g1 = f1/u, g2 = f2/u, g3 = d_v f1 / u) must stay
    finite at u = 0; they are what the frozen-coefficient rewrite divides by.
    In parabolic-elliptic mode (tau = 0) f3 is forced to -sigma*v + f(u).
    """

    f1: Callable
    f2: Callable
    f3: Callable
    sigma: float
    tau: float = 0.0
    mu1: float = 1.0
    mu2: float = 0.0
    f_elliptic: Optional[Callable] = None
    g1: Optional[Callable] = None
    g2: Optional[Callable] = None
    g3: Optional[Callable] = None
    df1_du: Optional[Callable] = None
    name: str = "custom"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.tau == 0 and self.f_elliptic is None:
            raise ValueError("parabolic-elliptic mode needs f_elliptic with f3 = -sigma*v + f(u)")
        self._check_quotients()

    @property
    def gamma(self) -> float:
        return self.mu1 + self.mu2

    @property
    def sigma_shift(self) -> float:
        return self.sigma

    @property
    def mode(self) -> str:
        return "pe" if self.tau == 0 else "pp"

    def _check_quotients(self):
        s = np.array([1e-8, -1e-8, 1e-6, -1e-6])
        r = np.zeros_like(s)
        vals = np.asarray(self.f1(s, r), dtype=float)
        if not np.all(np.isfinite(vals)) or np.any(np.abs(vals) > 1e-3):
            raise ValueError("f1 must vanish to first order at u = 0")

    def quotient(self, which: str, u: np.ndarray, v: np.ndarray, counter=None) -> np.ndarray:
        """g1, g2 or g3 evaluated via the supplied quotient, else floored division."""
        g = getattr(self, which)
        if g is not None:
            return np.asarray(g(u, v), dtype=float)
        num = {"g1": self.f1, "g2": self.f2}.get(which)
        if num is None:
            raise ValueError(f"no quotient available for {which}")
        floor = 1e-12
        safe = np.where(np.abs(u) < floor, np.sign(u) * floor + (u == 0) * floor, u)
        if counter is not None:
            counter[0] += int(np.sum(np.abs(u) < floor))
        return np.asarray(num(u, v), dtype=float) / safe


def _signed_power(s, expo):
    return np.sign(s) * np.abs(s) ** expo


@dataclass
class LogisticPreset:
    """Logistic-type model: drift chi*u, growth g(s) = k + l*s - m*s^(1+eps)."""

    chi: float = 1.0
    k: float = 0.0
    l: float = 1.0
    m: float = 1.0
    eps: float = 1.0
    custom_g: Optional[Callable] = None

    def __post_init__(self):
        if min(self.k, self.l, self.m) < 0 or self.eps <= 0:
            raise ValueError("need k, l, m >= 0 and eps > 0")
        s = np.linspace(0.0, 1e3, 4001)
        if np.any(self.g(s) > self.k + self.l * s + 1e-9 * (1 + s)):
            raise ValueError("g(s) must stay below k + l*s for s >= 0")

    def g(self, s):
        if self.custom_g is not None:
            return np.asarray(self.custom_g(s), dtype=float)
        return self.k + self.l * s - self.m * _signed_power(s, 1.0 + self.eps)

    def nonlinearity(self, tau: float = 0.0, sigma: float = 1.0) -> Nonlinearity:
        chi = self.chi
        g = self.g
        # when k = 0 the quotient f2/u has the closed form l - m |u|^eps;
        # otherwise the frozen-coefficient rewrite falls back to floored division
        g2 = self._g2 if self.k == 0 and self.custom_g is None else None
        return Nonlinearity(
            f1=lambda u, v: chi * np.asarray(u, dtype=float),
            f2=lambda u, v: g(u),
            f3=lambda u, v: np.asarray(u, dtype=float) - np.asarray(v, dtype=float),
            sigma=sigma,
            tau=tau,
            mu1=1.0 + self.eps,
            mu2=0.0,
            f_elliptic=(lambda u: np.asarray(u, dtype=float)),
            g1=lambda u, v: chi * np.ones_like(np.asarray(u, dtype=float)),
            g2=g2,
            g3=lambda u, v: np.zeros_like(np.asarray(u, dtype=float)),
            df1_du=lambda u, v: chi * np.ones_like(np.asarray(u, dtype=float)),
            name="logistic",
        )

    def _g2(self, u, v):
        u = np.asarray(u, dtype=float)
        return self.l - self.m * np.abs(u) ** self.eps


def minimal_model(chi: float = 1.0, tau: float = 0.0, sigma: float = 1.0) -> Nonlinearity:
    """Minimal chemotaxis model: f1 = chi*u, f2 = 0, f3 = u - v."""
    zeros = lambda u, v: np.zeros_like(np.asarray(u, dtype=float))
    return Nonlinearity(
        f1=lambda u, v: chi * np.asarray(u, dtype=float),
        f2=zeros,
        f3=lambda u, v: np.asarray(u, dtype=float) - np.asarray(v, dtype=float),
        sigma=sigma,
        tau=tau,
        mu1=1.0,
        mu2=0.0,
        f_elliptic=(lambda u: np.asarray(u, dtype=float)),
        g1=lambda u, v: chi * np.ones_like(np.asarray(u, dtype=float)),
        g2=zeros,
        g3=zeros,
        df1_du=lambda u, v: chi * np.ones_like(np.asarray(u, dtype=float)),
        name="minimal",
    )


# ---------------------------------------------------------------------------
# configuration and results


@dataclass
class SolverConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    picard_tol: float = 1e-9
    picard_max_iters: int = 30
    nodes_per_unit_length: int = 40
    blowup_threshold: float = 1e6
    blowup_p: float = 2.0
    n_win: int = 8
    max_halvings: int = 6
    eps_tail: float = 1e-12
    record_interval: Optional[float] = None
    sigma_shift: Optional[float] = None  # overrides the nonlinearity's shift when set

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0 or self.picard_tol <= 0:
            raise ValueError("dt, t_end, picard_tol must be positive")
        if self.blowup_threshold <= 0:
            raise ValueError("blowup_threshold must be positive")


@dataclass
class WindowRecord:
    t_start: float
    length: float
    iters: int
    contraction: float


@dataclass
class SolveResult:
    times: list = field(default_factory=list)
    u_series: list = field(default_factory=list)
    v_series: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    windows: list = field(default_factory=list)
    status: str = COMPLETED
    t_blowup_est: Optional[float] = None
    floored_nodes: int = 0

    @property
    def u_final(self) -> GridFunction:
        return self.u_series[-1]

    def norm_history(self, p: float) -> tuple:
        from .diagnostics import lp_norm

        return np.array(self.times), np.array([lp_norm(u, p) for u in self.u_series])


# ---------------------------------------------------------------------------
# time quadrature weights (exact for piecewise-linear data against the kernel)


def product_weights_exp(J: int, delta: float, sigma: float) -> np.ndarray:
    """Weights w with sum_i w_i g(i*delta) = int_0^{J delta} e^{-sigma(t-s)} g(s) ds."""
    w = np.zeros(J + 1)
    if sigma == 0.0:
        w[:] = delta
        w[0] = w[-1] = delta / 2
        return w
    for i in range(J):
        a = (J - i - 1) * delta
        b = (J - i) * delta
        Ea, Eb = math.exp(-sigma * a), math.exp(-sigma * b)
        I = (Ea - Eb) / sigma
        rint = (a * Ea - b * Eb) / sigma + I / sigma  # int r e^{-sigma r}
        w[i] += (rint - a * I) / delta
        w[i + 1] += (b * I - rint) / delta
    return w


def product_weights_sqrt(J: int, delta: float) -> np.ndarray:
    """Weights w with sum_i w_i g(i*delta) = int_0^{J delta} (t-s)^{-1/2} g(s) ds."""
    w = np.zeros(J + 1)
    for i in range(J):
        a = (J - i - 1) * delta
        b = (J - i) * delta
        sa, sb = math.sqrt(a), math.sqrt(b)
        I = 2.0 * (sb - sa)
        cube = (2.0 / 3.0) * (b * sb - a * sa)
        w[i] += (cube - a * I) / delta
        w[i + 1] += (b * I - cube) / delta
    return w


def chemotaxis_weights(J: int, delta: float) -> np.ndarray:
    """Weights on H(lag_i) = e^{D lag} d_x F(s_i) approximating int_0^t H(t-s) ds.

    Away from s = t the integrand is written as (t-s)^{-1/2} * [sqrt(t-s) H]
    and integrated with product weights exact for piecewise-linear data
    against the singular kernel, which stays stable when H itself behaves
    like (t-s)^{-1/2} on rough iterates.  The final interval, where H cannot
    be sampled, is integrated by linear extrapolation from the two nearest
    samples.  For smooth data the rule is first order with a small constant
    (the sqrt factor keeps finite curvature only away from the tip) while
    staying convergent on integrands with the square-root singularity.
    """
    v = product_weights_sqrt(J, delta)
    # drop the (0, delta] lag interval from the singular-kernel weights
    v[J - 1] -= (2.0 / 3.0) * math.sqrt(delta)
    w = np.zeros(J)
    for i in range(J):
        w[i] = v[i] * math.sqrt((J - i) * delta)
    if J >= 2:
        w[J - 1] += 1.5 * delta
        w[J - 2] -= 0.5 * delta
    else:
        w[0] += delta
    return w


# ---------------------------------------------------------------------------
# Duhamel maps


def _apply(fn, *gfs: GridFunction) -> GridFunction:
    mesh = gfs[0].mesh
    out = [fn(*(g.samples[k] for g in gfs)) for k in range(len(mesh.n))]
    return GridFunction(mesh, [np.asarray(a, dtype=float) + np.zeros_like(gfs[0].samples[k]) for k, a in enumerate(out)])


def _check_paths(u_path, t):
    J = len(u_path) - 1
    if J < 1:
        raise QuadratureUnderResolved("need at least two path samples")
    return J, t / J


def duhamel_phi(
    plan: HeatKernelPlan,
    nl: Nonlinearity,
    u0: GridFunction,
    u_path: list,
    v_path: list,
    t: float,
) -> GridFunction:
    """One application of the u-component Duhamel map at time t.

    Free flow of u0, minus the chemotaxis integral (derivative moved onto the
    kernel, integrated with sqrt-singular product weights), plus the shifted
    reaction integral (exponential product weights).
    """
    J, delta = _check_paths(u_path, t)
    sig = nl.sigma
    out = plan.apply_heat(t, sig, u0)
    # chemotaxis term
    w_ch = chemotaxis_weights(J, delta)
    for i in range(J):
        lag = (J - i) * delta
        flux = _apply(nl.f1, u_path[i], v_path[i]) * v_path[i].derivative()
        g = plan.apply_heat_dx(lag, 0.0, flux)
        out = out - (w_ch[i] * math.exp(-sig * lag)) * g
    # reaction term (value at lag 0 enters through the identity)
    w_exp = product_weights_exp(J, delta, sig)
    for i in range(J + 1):
        lag = (J - i) * delta
        react = _apply(nl.f2, u_path[i], v_path[i]) + sig * u_path[i]
        if i < J:
            react = plan.apply_heat(lag, 0.0, react)
        out = out + w_exp[i] * react
    return out


def duhamel_psi(
    plan: HeatKernelPlan,
    nl: Nonlinearity,
    v0: GridFunction,
    u_path: list,
    v_path: list,
    t: float,
) -> GridFunction:
    """The v-component Duhamel map (parabolic-parabolic, tau folded into f3/dt scaling)."""
    J, delta = _check_paths(u_path, t)
    sig = nl.sigma
    out = plan.apply_heat(t, sig, v0)
    w_exp = product_weights_exp(J, delta, sig)
    for i in range(J + 1):
        lag = (J - i) * delta
        term = _apply(nl.f3, u_path[i], v_path[i]) + sig * v_path[i]
        if i < J:
            term = plan.apply_heat(lag, 0.0, term)
        out = out + w_exp[i] * term
    return out


def duhamel_theta(
    plan: HeatKernelPlan,
    nl: Nonlinearity,
    L: DiscreteLaplacian,
    u0: GridFunction,
    u_path: list,
    t: float,
) -> GridFunction:
    """Parabolic-elliptic map: v(s) from the resolvent, then the u-map."""
    if nl.mode != "pe":
        raise ValueError("theta map requires parabolic-elliptic mode")
    v_path = [
        L.resolvent_solve(nl.sigma, _apply(lambda u: nl.f_elliptic(u), u)) for u in u_path
    ]
    return duhamel_phi(plan, nl, u0, u_path, v_path, t)


# ---------------------------------------------------------------------------
# blow-up detection


def detect_blowup(times, norms, threshold: float):
    """Fire when the norm history crosses the threshold; extrapolate 1/norm -> 0."""
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if len(times) < 3:
        return False, None
    if norms[-1] < threshold:
        return False, None
    tail = slice(max(0, len(times) - 5), None)
    tt, nn = times[tail], norms[tail]
    inv = 1.0 / nn
    slope, intercept = np.polyfit(tt, inv, 1)
    t_est = -intercept / slope if slope < 0 else float(tt[-1])
    return True, float(t_est)


# ---------------------------------------------------------------------------
# mild (Duhamel/Picard) solver


def _pe_v(nl: Nonlinearity, L: DiscreteLaplacian, u: GridFunction) -> GridFunction:
    return L.resolvent_solve(nl.sigma, _apply(lambda s: nl.f_elliptic(s), u))


def solve_mild(
    plan: HeatKernelPlan,
    nl: Nonlinearity,
    u0: GridFunction,
    v0: Optional[GridFunction],
    cfg: SolverConfig,
    laplacian: Optional[DiscreteLaplacian] = None,
) -> SolveResult:
    """Advance the Duhamel fixed point window by window.

    Each window restarts the integral equations from its own initial data
    (the extension construction), iterating from the constant-in-time guess.
    Windows halve on divergence and re-expand after three fast windows.
    """
    from .diagnostics import lp_norm

    mesh = u0.mesh
    L = laplacian if laplacian is not None else DiscreteLaplacian(mesh)
    if nl.mode == "pe":
        v_cur = _pe_v(nl, L, u0)
    else:
        if v0 is None:
            raise ValueError("parabolic-parabolic mode needs v0")
        v_cur = v0.copy()
    u_cur = u0.copy()

    res = SolveResult()
    res.times.append(0.0)
    res.u_series.append(u_cur.copy())
    res.v_series.append(v_cur.copy())
    _record_diag(res, 0.0, u_cur, v_cur, cfg, iters=0, contraction=0.0)

    t = 0.0
    J = cfg.n_win
    delta = cfg.dt
    halvings = 0
    fast_streak = 0
    tau = nl.tau if nl.tau > 0 else 1.0

    while t < cfg.t_end - 1e-12:
        J_eff = max(1, min(J, int(math.ceil((cfg.t_end - t) / delta - 1e-9))))
        T_win = J_eff * delta
        if T_win > plan.T * (1 + 1e-12):
            raise TimeOutOfRange(
                f"plan horizon {plan.T} shorter than window {T_win}; rebuild the plan"
            )
        ok, u_path, v_path, iters, factor = _picard_window(
            plan, nl, L, u_cur, v_cur, J_eff, delta, cfg, tau
        )
        if not ok:
            halvings += 1
            fast_streak = 0
            if halvings > cfg.max_halvings:
                res.status = PICARD_DIVERGED
                res.windows.append(WindowRecord(t, T_win, iters, factor))
                return res
            if J > 1:
                J = max(1, J // 2)
            else:
                delta /= 2.0
            continue
        res.windows.append(WindowRecord(t, T_win, iters, factor))
        fast_streak = fast_streak + 1 if iters <= 3 else 0
        if fast_streak >= 3 and (J < cfg.n_win or delta < cfg.dt):
            if delta < cfg.dt:
                delta = min(cfg.dt, delta * 2)
            else:
                J = min(cfg.n_win, J * 2)
            fast_streak = 0
        for j in range(1, J_eff + 1):
            tj = t + j * delta
            if _due(tj, res.times[-1], cfg):
                res.times.append(tj)
                res.u_series.append(u_path[j].copy())
                res.v_series.append(v_path[j].copy())
                _record_diag(res, tj, u_path[j], v_path[j], cfg, iters, factor)
        u_cur, v_cur = u_path[-1], v_path[-1]
        t += T_win
        fired, t_est = detect_blowup(
            res.times, [d["norm_p"] for d in res.diagnostics], cfg.blowup_threshold
        )
        if fired:
            res.status = BLOWUP
            res.t_blowup_est = t_est
            return res
    return res


def _due(tj, last, cfg) -> bool:
    interval = cfg.record_interval if cfg.record_interval is not None else 0.0
    return tj - last >= interval - 1e-12


def _record_diag(res, t, u, v, cfg, iters, contraction):
    from .diagnostics import lp_norm

    res.diagnostics.append(
        {
            "time": t,
            "mass_u": u.integral(),
            "norm_p": lp_norm(u, cfg.blowup_p),
            "norm_inf": lp_norm(u, math.inf),
            "min_u": u.min(),
            "min_v": v.min() if v is not None else float("nan"),
            "picard_iters": iters,
            "contraction_factor": contraction,
        }
    )


def _picard_window(plan, nl, L, u_start, v_start, J, delta, cfg, tau):
    """Fixed-point iteration on one window; returns (ok, u_path, v_path, iters, factor)."""
    from .diagnostics import lp_norm, w1p_norm

    u_path = [u_start.copy() for _ in range(J + 1)]
    if nl.mode == "pe":
        v_path = [_pe_v(nl, L, u) for u in u_path]
    else:
        v_path = [v_start.copy() for _ in range(J + 1)]
    scale = max(1.0, lp_norm(u_start, cfg.blowup_p))
    prev_diff = None
    factor = float("nan")
    for it in range(1, cfg.picard_max_iters + 1):
        new_u = [u_path[0]]
        new_v = [v_path[0]]
        for j in range(1, J + 1):
            tj = j * delta
            uj = duhamel_phi(plan, nl, u_path[0], u_path[: j + 1], v_path[: j + 1], tj)
            new_u.append(uj)
        if nl.mode == "pe":
            new_v += [_pe_v(nl, L, uj) for uj in new_u[1:]]
        else:
            for j in range(1, J + 1):
                tj = j * delta
                # tau scaling: v_t = (1/tau)(v_xx + f3); fold tau into time
                if abs(tau - 1.0) < 1e-14:
                    vj = duhamel_psi(plan, nl, v_path[0], u_path[: j + 1], v_path[: j + 1], tj)
                else:
                    vj = _psi_scaled(plan, nl, v_path[0], u_path[: j + 1], v_path[: j + 1], tj, tau)
                new_v.append(vj)
        diff = max(
            lp_norm(a - b, cfg.blowup_p) for a, b in zip(new_u[1:], u_path[1:])
        )
        if nl.mode == "pp":
            diff = max(
                diff,
                max(w1p_norm(a - b, cfg.blowup_p) for a, b in zip(new_v[1:], v_path[1:])),
            )
        u_path, v_path = new_u, new_v
        if prev_diff is not None and prev_diff > 0:
            factor = diff / prev_diff
        prev_diff = diff
        if diff < cfg.picard_tol * scale:
            return True, u_path, v_path, it, factor if factor == factor else 0.0
        if not np.isfinite(diff) or diff > 1e8 * scale:
            return False, u_path, v_path, it, factor
    return False, u_path, v_path, cfg.picard_max_iters, factor


def _psi_scaled(plan, nl, v0, u_path, v_path, t, tau):
    """Psi map for tau != 1: tau v_t = v_xx + f3 becomes w_s = w_xx + f3 in time s = t/tau."""
    J, delta = _check_paths(u_path, t)
    sig = nl.sigma
    out = plan.apply_heat(t / tau, sig, v0)
    w_exp = product_weights_exp(J, delta / tau, sig)
    for i in range(J + 1):
        lag = (J - i) * delta / tau
        term = _apply(nl.f3, u_path[i], v_path[i]) + sig * v_path[i]
        if i < J:
            term = plan.apply_heat(lag, 0.0, term)
        out = out + w_exp[i] * term
    return out


# ---------------------------------------------------------------------------
# finite-volume IMEX reference solver


def _advective_tendency(nl: Nonlinearity, u: GridFunction, v: GridFunction):
    """-div(f1(u,v) v_x) on shared nodes, conservative with vertex flux balance.

    Returns (tendency_shared, max_cfl_speed).
    """
    mesh = u.mesh
    num = np.zeros(mesh.size_shared)
    max_speed = 0.0
    for k in range(len(mesh.n)):
        h = mesh.h[k]
        uu, vv = u.samples[k], v.samples[k]
        vx = (vv[1:] - vv[:-1]) / h
        u_up = np.where(vx >= 0, uu[:-1], uu[1:])
        v_face = 0.5 * (vv[:-1] + vv[1:])
        F = np.asarray(nl.f1(u_up, v_face), dtype=float) * vx
        with np.errstate(divide="ignore", invalid="ignore"):
            speed = np.abs(F) / np.maximum(np.abs(u_up), 1e-12)
        max_speed = max(max_speed, float(speed.max(initial=0.0)))
        idx = mesh.shared_index[k]
        contrib = np.zeros(mesh.n[k] + 1)
        contrib[:-1] -= F
        contrib[1:] += F
        np.add.at(num, idx, contrib)
    return num / mesh.shared_weights, max_speed


def solve_reference(
    L: DiscreteLaplacian,
    nl: Nonlinearity,
    u0: GridFunction,
    v0: Optional[GridFunction],
    cfg: SolverConfig,
) -> SolveResult:
    """Method-of-lines IMEX: backward-Euler diffusion, explicit upwinded flux and reactions."""
    from scipy import sparse
    from scipy.sparse import linalg as spla

    mesh = L.mesh
    dt = cfg.dt
    n_steps = int(round(cfg.t_end / dt))
    fac_u = spla.splu((sparse.identity(L.size) - dt * L.matrix).tocsc())
    if nl.mode == "pp":
        if v0 is None:
            raise ValueError("parabolic-parabolic mode needs v0")
        fac_v = spla.splu((sparse.identity(L.size) - (dt / nl.tau) * L.matrix).tocsc())
        v = v0.copy()
    else:
        v = _pe_v(nl, L, u0)
    u = u0.copy()

    res = SolveResult()
    res.times.append(0.0)
    res.u_series.append(u.copy())
    res.v_series.append(v.copy())
    _record_diag(res, 0.0, u, v, cfg, iters=0, contraction=0.0)

    interval = cfg.record_interval if cfg.record_interval is not None else dt
    next_record = interval
    from .diagnostics import lp_norm

    norm_times = [0.0]
    norm_vals = [lp_norm(u, cfg.blowup_p)]
    for step in range(1, n_steps + 1):
        t = step * dt
        adv, speed = _advective_tendency(nl, u, v)
        if speed * dt / mesh.h_min > 1.0:
            raise StepUnstable(
                f"advective CFL {speed * dt / mesh.h_min:.2f} > 1 at t={t:.4g}"
            )
        react = _apply(nl.f2, u, v).to_shared()
        rhs = u.to_shared() + dt * (adv + react)
        u = GridFunction.from_shared(mesh, fac_u.solve(rhs))
        if nl.mode == "pp":
            rhs_v = v.to_shared() + (dt / nl.tau) * _apply(nl.f3, u, v).to_shared()
            v = GridFunction.from_shared(mesh, fac_v.solve(rhs_v))
        else:
            v = _pe_v(nl, L, u)
        nrm = lp_norm(u, cfg.blowup_p)
        norm_times.append(t)
        norm_vals.append(nrm)
        if t >= next_record - 1e-12 or step == n_steps or nrm >= cfg.blowup_threshold:
            res.times.append(t)
            res.u_series.append(u.copy())
            res.v_series.append(v.copy())
            _record_diag(res, t, u, v, cfg, iters=0, contraction=0.0)
            next_record += interval
        if nrm >= cfg.blowup_threshold:
            fired, t_est = detect_blowup(norm_times, norm_vals, cfg.blowup_threshold)
            res.status = BLOWUP
            res.t_blowup_est = t_est
            return res
    return res


# ---------------------------------------------------------------------------
# linear non-autonomous Duhamel solver


def frozen_coefficients(nl: Nonlinearity, u: GridFunction, v: GridFunction, L=None):
    """Drift/potential pair (a, b) freezing the nonlinear equation along (u, v).

    The u-equation becomes psi_t = (D - sigma) psi + a psi_x + b psi with
    a = -d_u f1(u,v) * v_x and
    b = g2(u,v) + sigma - g1(u,v) v_xx - g3(u,v) (v_x)^2,
    all via the quotient functions so nothing divides by u directly.
    In parabolic-elliptic mode v_xx is recovered from the elliptic equation.
    """
    counter = [0]
    vx = v.derivative()
    if nl.mode == "pe":
        vxx = nl.sigma * v - _apply(lambda s: nl.f_elliptic(s), u)
    else:
        vxx = vx.derivative()
    if nl.df1_du is not None:
        a = -1.0 * _apply(nl.df1_du, u, v) * vx
    else:
        raise ValueError("frozen coefficients need df1_du")
    g1v = _apply(lambda uu, vv: nl.quotient("g1", uu, vv, counter), u, v)
    g2v = _apply(lambda uu, vv: nl.quotient("g2", uu, vv, counter), u, v)
    g3v = _apply(lambda uu, vv: nl.quotient("g3", uu, vv, counter), u, v)
    b = g2v + nl.sigma + (-1.0) * g1v * vxx + (-1.0) * g3v * (vx * vx)
    return a, b, counter[0]


def solve_linear_nonautonomous(
    plan: HeatKernelPlan,
    a_path: list,
    b_path: list,
    psi0: GridFunction,
    kappa: float,
    sigma: float,
    cfg: SolverConfig,
) -> SolveResult:
    """Fixed point of psi(t) = e^{(D-sigma)(t-k)} psi0 + int e^{(D-sigma)(t-k-s)} (a psi_x + b psi) ds.

    Coefficient paths are sampled at kappa + i*dt; the solve advances window
    by window exactly like the nonlinear mild solver.
    """
    from .diagnostics import lp_norm

    delta = cfg.dt
    n_total = len(a_path) - 1
    if len(b_path) != len(a_path):
        raise ValueError("a_path and b_path must share sampling")
    res = SolveResult()
    psi = psi0.copy()
    res.times.append(kappa)
    res.u_series.append(psi.copy())
    res.v_series.append(None)
    _record_diag(res, kappa, psi, None, cfg, 0, 0.0)

    pos = 0
    J = cfg.n_win
    while pos < n_total:
        J_eff = min(J, n_total - pos)
        path = [psi.copy() for _ in range(J_eff + 1)]
        scale = max(1.0, lp_norm(psi, cfg.blowup_p))
        prev_diff, ok = None, False
        for it in range(1, cfg.picard_max_iters + 1):
            new_path = [path[0]]
            for j in range(1, J_eff + 1):
                tj = j * delta
                out = plan.apply_heat(tj, sigma, path[0])
                w_exp = product_weights_exp(j, delta, sigma)
                for i in range(j + 1):
                    lag = (j - i) * delta
                    term = a_path[pos + i] * path[i].derivative() + b_path[pos + i] * path[i]
                    if i < j:
                        term = plan.apply_heat(lag, 0.0, term)
                    out = out + w_exp[i] * term
                new_path.append(out)
            diff = max(lp_norm(a - b, cfg.blowup_p) for a, b in zip(new_path[1:], path[1:]))
            path = new_path
            if diff < cfg.picard_tol * scale:
                ok = True
                break
            if prev_diff is not None and diff > max(10 * prev_diff, 1e8 * scale):
                break
            prev_diff = diff
        if not ok:
            if J_eff > 1:
                J = max(1, J_eff // 2)
                continue
            res.status = PICARD_DIVERGED
            return res
        for j in range(1, J_eff + 1):
            tj = kappa + (pos + j) * delta
            res.times.append(tj)
            res.u_series.append(path[j].copy())
            res.v_series.append(None)
            _record_diag(res, tj, path[j], None, cfg, it, 0.0)
        psi = path[-1]
        pos += J_eff
    return res
