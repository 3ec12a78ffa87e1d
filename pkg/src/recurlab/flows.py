"""ODE cocycle engine: integrate over the hull of a right-hand side and
check dissipative contraction, separation, stability and omega-limit
fiber structure.

The one-sided dissipativity condition Re<x1-x2, f(t,x1)-f(t,x2)> <=
-kappa |x1-x2|^alpha with alpha > 2 yields the algebraic contraction
modulus

    omega_kappa(t, r) = (r^(2-alpha) + kappa (alpha-2) t)^(1/(2-alpha)),

derived from d/dt |D|^2 <= -2 kappa |D|^alpha. The kappa-free variant
(`paper_contraction_modulus`) is kept alongside for comparison: the two
agree at kappa = 1, and only the kappa-aware bound is valid for kappa < 1.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import catalog as _catalog
from .errors import (
    BadOrderError,
    GridMismatchError,
    NonFiniteRhsError,
    StepSizeUnderflowError,
)
from .signal import SampledSignal, Window, translate


# ---------------------------------------------------------------------------
# system specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RhsSpec:
    """Right-hand side of x' = f(t, x): catalog id or expression tree.

    ``forcing`` is a tabulated SampledSignal consulted by catalog builders
    and by ["forcing"] expression nodes (linear interpolation in t).
    """

    kind: str                      # "catalog:<id>" or "expr"
    dim: int = 1
    params: dict = field(default_factory=dict)
    expr: tuple = None             # one expression tree per component for kind="expr"
    forcing: SampledSignal = None

    def build(self):
        if self.kind.startswith("catalog:"):
            cid = self.kind.split(":", 1)[1]
            if cid not in _catalog.RHS_CATALOG:
                from .errors import ConfigError

                raise ConfigError(f"unknown rhs id {cid!r}", key="rhs")
            return _catalog.RHS_CATALOG[cid]["builder"](self.params, self.forcing)
        if self.kind == "expr":
            trees = self.expr
            forcing = self.forcing
            params = self.params

            def f(t, x):
                fv = forcing.value_at(t) if forcing is not None else None
                return np.array([
                    _catalog.eval_expr(tree, t, x, params, fv) for tree in trees
                ], dtype=float)

            return f
        from .errors import ConfigError

        raise ConfigError(f"unknown rhs kind {self.kind!r}", key="rhs")

    def shifted(self, h: float):
        """Same field driven by the h-translated forcing (hull element f^h)."""
        if self.forcing is None:
            return self
        return RhsSpec(self.kind, self.dim, self.params, self.expr,
                       translate(self.forcing, h))


@dataclass(frozen=True)
class IVP:
    rhs: RhsSpec
    x0: tuple
    t_span: Window
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = np.inf
    out_dt: float = None    # output grid step; defaults to min(max_step, span/1e4)

    def __post_init__(self):
        if not (0 < self.rel_tol <= 1e-2 and 0 < self.abs_tol <= 1e-2):
            raise ValueError("tolerances must lie in (0, 1e-2]")
        if self.t_span.length <= 0:
            raise ValueError("t_span must be nondegenerate")


@dataclass(frozen=True)
class ConditionHParams:
    """kappa, alpha of the dissipativity condition; alpha > 2 strictly."""

    kappa: float
    alpha: float
    sample_box: tuple       # (lo, hi) per coordinate, e.g. ((-10,), (10,))
    n_pairs: int = 10000

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.alpha <= 2:
            raise ValueError("alpha must exceed 2 strictly")


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def integrate(ivp: IVP) -> SampledSignal:
    """Adaptive 5(4) Runge-Kutta with dense output, resampled uniformly.

    The output grid step is min(max_step, span/1e4); the integrator is
    deterministic for fixed inputs. Blow-up surfaces as
    StepSizeUnderflowError, a non-finite field as NonFiniteRhsError.
    """
    f = ivp.rhs.build()
    span = ivp.t_span.length

    def guarded(t, x):
        v = np.asarray(f(t, x), dtype=float)
        if not np.all(np.isfinite(v)):
            raise NonFiniteRhsError(f"rhs non-finite at t={t}")
        return v

    sol = solve_ivp(
        guarded,
        (ivp.t_span.a, ivp.t_span.b),
        np.asarray(ivp.x0, dtype=float),
        method="RK45",
        rtol=ivp.rel_tol,
        atol=ivp.abs_tol,
        max_step=ivp.max_step,
        dense_output=True,
    )
    if sol.status == -1:
        raise StepSizeUnderflowError(sol.message)
    dt = ivp.out_dt if ivp.out_dt is not None else min(ivp.max_step, span / 1e4)
    n = int(np.floor(span / dt + 1e-9)) + 1
    ts = ivp.t_span.a + dt * np.arange(n)
    ts[-1] = min(ts[-1], ivp.t_span.b)
    vals = sol.sol(ts).T
    return SampledSignal(t0=ivp.t_span.a, dt=dt, values=vals, label=f"ivp:{ivp.rhs.kind}")


# ---------------------------------------------------------------------------
# Condition (H) and the contraction formulas
# ---------------------------------------------------------------------------

def condition_h_margin(rhs: RhsSpec, p: ConditionHParams, t_samples, seed: int = 0) -> float:
    """Worst sampled margin of the dissipativity inequality.

    margin = min over pairs and times of
    [-kappa |D|^alpha - Re<D, f(t,x1) - f(t,x2)>]; nonnegative means the
    condition holds on the sample (a certificate at sample resolution
    only). Pairs are fixed-seed pseudo-random plus a deterministic lattice.
    """
    if p.n_pairs < 1000:
        raise ValueError("need at least 10^3 sampled pairs")
    f = rhs.build()
    lo = np.asarray(p.sample_box[0], dtype=float)
    hi = np.asarray(p.sample_box[1], dtype=float)
    d = len(lo)
    rng = np.random.default_rng(seed)
    x1s = rng.uniform(lo, hi, size=(p.n_pairs, d))
    x2s = rng.uniform(lo, hi, size=(p.n_pairs, d))
    # deterministic lattice pairs: corners against center and reversed corners
    center = (lo + hi) / 2
    corners = np.array(np.meshgrid(*zip(lo, hi))).T.reshape(-1, d) if d <= 6 else np.vstack([lo, hi])
    extra1 = np.vstack([corners, corners])
    extra2 = np.vstack([np.tile(center, (len(corners), 1)), corners[::-1]])
    x1s = np.vstack([x1s, extra1])
    x2s = np.vstack([x2s, extra2])

    worst = np.inf
    for t in np.atleast_1d(t_samples):
        for x1, x2 in zip(x1s, x2s):
            delta = x1 - x2
            nd = np.linalg.norm(delta)
            if nd == 0.0:
                continue
            df = f(float(t), x1) - f(float(t), x2)
            margin = -p.kappa * nd ** p.alpha - float(np.real(np.dot(delta, df)))
            if margin < worst:
                worst = margin
    return float(worst)


def contraction_modulus(t, r, kappa, alpha):
    """kappa-aware decay modulus omega_kappa(t, r); omega(0, r) = r."""
    t = np.asarray(t, dtype=float)
    if r == 0:
        return np.zeros_like(t)
    return (r ** (2.0 - alpha) + kappa * (alpha - 2.0) * t) ** (1.0 / (2.0 - alpha))


def paper_contraction_modulus(t, r):
    """The kappa-free form r(1+(alpha-2) t r^(alpha-2))^(1/(2-alpha)), alpha=3.

    Recorded for comparison only; equals contraction_modulus at kappa=1.
    """
    return contraction_modulus(t, r, 1.0, 3.0)


def contraction_bound_check(sol1: SampledSignal, sol2: SampledSignal,
                            kappa: float, alpha: float, tol: float = 1e-6):
    """Check |sol1(t)-sol2(t)| <= omega_kappa(t-t0, r0) on the whole grid.

    Returns (ok, max_violation); violations below tol are attributed to
    integrator error.
    """
    if len(sol1) != len(sol2) or abs(sol1.dt - sol2.dt) > 1e-12 or abs(sol1.t0 - sol2.t0) > 1e-12:
        raise GridMismatchError("solutions must share one grid")
    d = sol1.values - sol2.values
    dist = np.sqrt(np.sum((d * d.conj()).real, axis=1))
    r0 = dist[0]
    ts = sol1.dt * np.arange(len(sol1))
    bound = contraction_modulus(ts, r0, kappa, alpha)
    violation = float(np.max(dist - bound))
    return violation <= tol, violation


def attraction_time(delta0: float, eps: float, kappa: float, alpha: float) -> float:
    """Closed-form L with omega_kappa(L, delta0) = eps.

    L = (eps^(2-alpha) - delta0^(2-alpha)) / (kappa (alpha-2)); at kappa=1,
    alpha=3 this equals the familiar [(delta0/eps)^(alpha-2) - 1] /
    (delta0 (alpha-2)).
    """
    if eps >= delta0:
        raise BadOrderError(f"need eps < delta0, got eps={eps}, delta0={delta0}")
    return (eps ** (2.0 - alpha) - delta0 ** (2.0 - alpha)) / (kappa * (alpha - 2.0))


def separation_estimate(sol1: SampledSignal, sol2: SampledSignal, w: Window) -> float:
    """inf over grid points of w of the pointwise distance (the witness d)."""
    if abs(sol1.dt - sol2.dt) > 1e-12:
        raise GridMismatchError("solutions must share one grid step")
    i0, i1 = sol1.window_slice(w)
    j0, j1 = sol2.window_slice(w)
    n = min(i1 - i0, j1 - j0) + 1
    d = sol1.values[i0:i0 + n] - sol2.values[j0:j0 + n]
    return float(np.min(np.sqrt(np.sum((d * d.conj()).real, axis=1))))


# ---------------------------------------------------------------------------
# hull families, fibers, stability
# ---------------------------------------------------------------------------

@dataclass
class HullRun:
    shift: float
    x0: tuple
    sol: SampledSignal


def hull_solutions(rhs: RhsSpec, shifts, x0_set, horizon: float,
                   rel_tol: float = 1e-8, abs_tol: float = 1e-10,
                   max_step: float = np.inf, out_dt: float = None):
    """Integrate y' = f^h(t, y) for every (shift h, initial state).

    Deterministic order: lexicographic in (shift index, x0 index).
    """
    runs = []
    for h in shifts:
        rh = rhs.shifted(float(h))
        for x0 in x0_set:
            x0t = tuple(np.atleast_1d(np.asarray(x0, dtype=float)))
            ivp = IVP(rh, x0t, Window(0.0, horizon), rel_tol, abs_tol, max_step, out_dt)
            runs.append(HullRun(float(h), x0t, integrate(ivp)))
    return runs


@dataclass
class FiberReport:
    per_shift: dict
    m: int
    constant: bool
    representatives: dict

    def to_dict(self):
        return {
            "per_shift": {f"{k:g}": v for k, v in self.per_shift.items()},
            "m": self.m,
            "constant": self.constant,
        }


def default_burn_in(h_params: ConditionHParams, cluster_tol: float) -> float:
    """Fiber-analysis burn-in when Condition (H) holds: the attraction time
    from the sample-box diameter down to the cluster tolerance."""
    lo = np.asarray(h_params.sample_box[0], dtype=float)
    hi = np.asarray(h_params.sample_box[1], dtype=float)
    diameter = float(np.linalg.norm(hi - lo))
    return attraction_time(diameter, cluster_tol, h_params.kappa, h_params.alpha)


def fiber_count(runs, burn_in: float, cluster_tol: float) -> FiberReport:
    """Cluster trailing solution segments per base shift; count fiber points.

    The consensus m is the count shared by every shift; non-constant counts
    are flagged (constant=False) and the modal count reported.
    """
    from .signal import sup_distance

    by_shift = {}
    for run in runs:
        by_shift.setdefault(run.shift, []).append(run)
    per_shift = {}
    reps = {}
    for h, rs in sorted(by_shift.items()):
        segs = []
        for run in rs:
            dom = run.sol.domain
            if burn_in >= dom.b:
                raise ValueError(f"burn-in {burn_in} swallows the whole horizon {dom.b}")
            segs.append(run.sol.restrict(Window(burn_in, dom.b)))
        w = segs[0].domain
        leaders = []
        for seg in segs:
            if not any(sup_distance(seg, l, w) < cluster_tol for l in leaders):
                leaders.append(seg)
        per_shift[h] = len(leaders)
        reps[h] = leaders
    counts = sorted(set(per_shift.values()))
    constant = len(counts) == 1
    m = counts[0] if constant else int(np.argmax(np.bincount(list(per_shift.values()))))
    return FiberReport(per_shift, m, constant, reps)


def uniform_stability_probe(rhs: RhsSpec, ref: SampledSignal, delta_grid, eps_grid,
                            restart_times, horizon: float,
                            rel_tol: float = 1e-8, abs_tol: float = 1e-10,
                            h_params: ConditionHParams = None):
    """Empirical delta(eps) stability table and L(eps) attraction table.

    For each restart time the reference state is offset by delta along the
    first coordinate and re-integrated. Stability: largest sampled delta
    whose perturbations stay within eps for the whole horizon, for every
    restart. Attraction: worst observed re-entry lag into the eps-tube for
    the largest delta, compared against the closed-form attraction time
    when Condition (H) parameters are supplied.
    """
    delta_grid = sorted(float(d) for d in delta_grid)
    eps_grid = sorted(float(e) for e in eps_grid)
    delta0 = max(delta_grid)
    max_dev = {}       # (restart, delta) -> max deviation over horizon
    reentry = {}       # (restart, eps) -> lag after which deviation stays < eps

    for t0r in restart_times:
        i0 = ref._index_of(t0r, round_up=True)
        t0g = ref.t0 + i0 * ref.dt
        x_ref = ref.values[i0].real
        for delta in delta_grid:
            x0 = x_ref.copy()
            x0[0] += delta
            ivp = IVP(rhs, tuple(x0), Window(t0g, t0g + horizon), rel_tol, abs_tol,
                      out_dt=ref.dt)
            pert = integrate(ivp)
            n = min(len(pert), len(ref) - i0)
            dv = pert.values[:n] - ref.values[i0:i0 + n]
            dist = np.sqrt(np.sum((dv * dv.conj()).real, axis=1))
            max_dev[(t0r, delta)] = float(np.max(dist))
            if delta == delta0:
                for eps in eps_grid:
                    above = np.nonzero(dist >= eps)[0]
                    if len(above) == 0:
                        lag = 0.0
                    elif above[-1] == len(dist) - 1:
                        lag = np.inf   # never re-entered within the horizon
                    else:
                        lag = (above[-1] + 1) * ref.dt
                    reentry[(t0r, eps)] = lag

    stability = {}
    for eps in eps_grid:
        ok_deltas = [d for d in delta_grid
                     if all(max_dev[(t0r, d)] <= eps for t0r in restart_times)]
        stability[eps] = max(ok_deltas) if ok_deltas else 0.0
    attraction = {}
    for eps in eps_grid:
        if eps < delta0:
            attraction[eps] = max(reentry[(t0r, eps)] for t0r in restart_times)
    bounds = {}
    if h_params is not None:
        for eps in eps_grid:
            if eps < delta0:
                bounds[eps] = attraction_time(delta0, eps, h_params.kappa, h_params.alpha)
    return {"stability": stability, "attraction": attraction,
            "delta0": delta0, "bound": bounds}
