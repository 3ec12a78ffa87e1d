"""Time-varying monic polynomial equations: roots, discriminant, branches.

x^n + a_1(t) x^(n-1) + ... + a_n(t) = 0 with complex coefficient paths.
Roots come from simultaneous Aberth-Ehrlich iteration (seeded on the
circle of radius 1 + max|a_i|, Newton-polished, warm-started along the
grid); continuous branches from optimal assignment between consecutive
root multisets. Near discriminant zeros the step guard refuses to
fabricate branches and reports the offending interval instead.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import BranchCollisionError, NonConvergenceError
from .signal import SampledSignal

#: residual tolerance scale: |P(t, root)| <= RESIDUAL_RTOL * (1 + A(t))^n
RESIDUAL_RTOL = 1e-10

#: no branch continuation once |D| falls below this times the path scale
COLLISION_ABS_D = 1e-8


@dataclass(frozen=True)
class PolyPath:
    """Monic polynomial with coefficient signals a_1..a_n on a common grid."""

    coeffs: tuple
    label: str = ""

    def __post_init__(self):
        cs = tuple(self.coeffs)
        if not cs:
            raise ValueError("need at least one coefficient path")
        c0 = cs[0]
        for c in cs:
            if c.dim != 1:
                raise ValueError("coefficient signals must be scalar")
            if len(c) != len(c0) or abs(c.dt - c0.dt) > 1e-12 or abs(c.t0 - c0.t0) > 1e-9:
                raise ValueError("coefficient signals must share one grid")
        object.__setattr__(self, "coeffs", cs)

    @property
    def degree(self):
        return len(self.coeffs)

    @property
    def grid(self):
        return self.coeffs[0]

    def times(self):
        return self.grid.times()

    def coef_matrix(self):
        """(N, n) complex matrix of a_1..a_n along the grid."""
        return np.column_stack([c.values[:, 0].astype(np.complex128) for c in self.coeffs])

    def coef_at(self, t):
        return np.array([c.value_at(t)[0] for c in self.coeffs], dtype=np.complex128)

    @staticmethod
    def from_functions(fns, t0, t1, dt, label=""):
        sigs = tuple(
            SampledSignal.from_function(lambda ts, f=f: np.asarray(f(ts), dtype=complex),
                                        t0, t1, dt, label=f"a{k+1}")
            for k, f in enumerate(fns)
        )
        return PolyPath(sigs, label=label)

    @staticmethod
    def from_manifest(path):
        """Load from a manifest JSON {n, files, grid} plus per-coefficient CSVs.

        File paths are resolved relative to the manifest; the grid entry is
        redundant metadata checked against the loaded signals.
        """
        import json
        import pathlib

        from .signal import read_signal_csv

        mpath = pathlib.Path(path)
        with open(mpath) as fh:
            manifest = json.load(fh)
        files = manifest["files"]
        if manifest.get("n") != len(files):
            raise ValueError("manifest n does not match the number of files")
        sigs = tuple(read_signal_csv(mpath.parent / f) for f in files)
        grid = manifest.get("grid")
        if grid is not None:
            if abs(sigs[0].dt - grid["dt"]) > 1e-12 or abs(sigs[0].t0 - grid["t0"]) > 1e-9:
                raise ValueError("manifest grid disagrees with the coefficient CSVs")
        return PolyPath(sigs, label=manifest.get("label", mpath.stem))

    def write_manifest(self, path):
        """Write the manifest JSON and one coefficient CSV per a_k."""
        import json
        import pathlib

        from .signal import write_signal_csv

        mpath = pathlib.Path(path)
        files = []
        for k, c in enumerate(self.coeffs):
            fname = f"{mpath.stem}_a{k + 1}.csv"
            write_signal_csv(c, mpath.parent / fname)
            files.append(fname)
        manifest = {
            "n": self.degree,
            "files": files,
            "grid": {"t0": self.grid.t0, "dt": self.grid.dt, "len": len(self.grid)},
            "label": self.label,
        }
        with open(mpath, "w") as fh:
            json.dump(manifest, fh, indent=1)
            fh.write("\n")


def _poly_residuals(coefs, roots):
    # coefs (N, n), roots (N, n); Horner on monic polynomials
    p = np.ones_like(roots)
    for j in range(coefs.shape[1]):
        p = p * roots + coefs[:, j][:, None]
    return np.abs(p)


def _seed_circle(coef_row):
    n = len(coef_row)
    radius = 1.0 + float(np.max(np.abs(coef_row)))
    angles = 2 * np.pi * (np.arange(n) + 0.375) / n
    return radius * np.exp(1j * angles)


def roots_grid(p: PolyPath):
    """All roots along the grid, (N, n) complex; order per point is arbitrary."""
    coefs = p.coef_matrix()
    roots = _kernels.aberth_grid(coefs, _seed_circle(coefs[0]))
    res = _poly_residuals(coefs, roots)
    scale = RESIDUAL_RTOL * (1.0 + np.max(np.abs(coefs), axis=1)) ** p.degree
    worst = float(np.max(res / scale[:, None]))
    if worst > 1.0:
        raise NonConvergenceError(
            f"root iteration above residual tolerance (worst ratio {worst:.3g})",
            worst_residual=float(np.max(res)),
        )
    return roots


def roots_at(p: PolyPath, t) -> np.ndarray:
    """The n roots (with multiplicity) of the time-t polynomial."""
    coefs = p.coef_at(t)[None, :]
    roots = _kernels.aberth_grid(coefs, _seed_circle(coefs[0]))
    res = _poly_residuals(coefs, roots)
    tol = RESIDUAL_RTOL * (1.0 + np.max(np.abs(coefs))) ** p.degree
    if np.max(res) > tol:
        raise NonConvergenceError(
            f"root iteration above residual tolerance at t={t}",
            worst_residual=float(np.max(res)),
        )
    return roots[0]


def discriminant_from_roots(roots):
    """prod over ordered pairs i != j of (root_i - root_j), vectorized."""
    n = roots.shape[1]
    if n < 2:
        return np.ones(roots.shape[0], dtype=np.complex128)
    prod_sq = np.ones(roots.shape[0], dtype=np.complex128)
    for i in range(n):
        for j in range(i + 1, n):
            d = roots[:, i] - roots[:, j]
            prod_sq *= d * d
    sign = (-1.0) ** (n * (n - 1) // 2)
    return sign * prod_sq


def discriminant_signal(p: PolyPath, roots=None) -> SampledSignal:
    """D(t) as the ordered-pair product over root differences."""
    if roots is None:
        roots = roots_grid(p)
    vals = discriminant_from_roots(roots)
    g = p.grid
    return SampledSignal(t0=g.t0, dt=g.dt, values=vals.astype(np.complex128),
                         label=f"discriminant:{p.label}")


# ---------------------------------------------------------------------------
# branch tracking
# ---------------------------------------------------------------------------

@dataclass
class RootBranches:
    branches: list
    residual_max: float
    discriminant: SampledSignal
    separation_min: float
    matching_log: np.ndarray    # permutation applied at each grid step

    @property
    def degree(self):
        return len(self.branches)

    def branch_matrix(self):
        return np.column_stack([b.values[:, 0] for b in self.branches])


def _match_small_degree(raw, perms):
    """Per-step optimal assignment raw[k-1] -> raw[k], vectorized over the grid.

    The step assignment is independent of the accumulated branch labels, so
    the (N-1, n!) cost table is computed in one pass; tracking composes the
    winning permutations. Ties keep the lexicographically first permutation.
    """
    N, n = raw.shape
    perms_arr = np.array(perms, dtype=np.int64)
    costs = np.empty((N - 1, len(perms)))
    prev = raw[:-1]
    cur = raw[1:]
    for pi, pm in enumerate(perms_arr):
        costs[:, pi] = np.sum(np.abs(cur[:, pm] - prev) ** 2, axis=1)
    choice = np.argmin(costs, axis=1)
    tracked = np.empty_like(raw)
    order0 = np.lexsort((raw[0].imag.round(12), raw[0].real.round(12)))
    q = np.asarray(order0, dtype=np.int64)
    tracked[0] = raw[0][q]
    for k in range(1, N):
        q = perms_arr[choice[k - 1]][q]
        tracked[k] = raw[k][q]
    return tracked, choice.astype(np.int16)


def track_branches(p: PolyPath) -> RootBranches:
    """Continuous root branches by per-step optimal assignment.

    Branch order is canonical: the t0 roots sorted by real part, then
    imaginary part. Raises BranchCollision with the offending interval when
    per-step motion reaches half the current minimum separation or |D|
    falls below the collision floor; branches are never fabricated across
    such an interval.
    """
    n = p.degree
    raw = roots_grid(p)
    N = raw.shape[0]

    if n == 1:
        tracked = raw.copy()
        match_log = np.zeros(N, dtype=np.int16)
        sep_min = np.inf
    elif n <= 6:
        perms = list(itertools.permutations(range(n)))
        tracked, steps = _match_small_degree(raw, perms)
        match_log = np.concatenate([[0], steps]).astype(np.int16)
    else:
        from scipy.optimize import linear_sum_assignment

        tracked = np.empty_like(raw)
        order0 = np.lexsort((raw[0].imag.round(12), raw[0].real.round(12)))
        tracked[0] = raw[0][order0]
        match_log = np.zeros(N, dtype=np.int16)
        for k in range(1, N):
            cost = np.abs(raw[k][None, :] - tracked[k - 1][:, None])
            _, ci = linear_sum_assignment(cost)
            tracked[k] = raw[k][ci]

    # step guard: motion vs current separation, plus the |D| floor
    diffs = np.abs(np.diff(tracked, axis=0))
    motion = diffs.max(axis=1) if N > 1 else np.zeros(0)
    if n >= 2:
        sep = np.full(N, np.inf)
        for i in range(n):
            for j in range(i + 1, n):
                sep = np.minimum(sep, np.abs(tracked[:, i] - tracked[:, j]))
        sep_min = float(np.min(sep))
        disc = discriminant_from_roots(tracked)
        scale = (1.0 + np.max(np.abs(p.coef_matrix()))) ** (n * (n - 1))
        bad = np.zeros(N, dtype=bool)
        bad[:N - 1] |= motion >= 0.5 * sep[:N - 1]
        bad |= np.abs(disc) < COLLISION_ABS_D * scale
        if bad.any():
            ts = p.times()
            first = int(np.argmax(bad))
            last = first
            while last + 1 < N and bad[min(last + 1, N - 1)]:
                last += 1
            raise BranchCollisionError(
                f"branch collision near t in [{ts[first]:.6g}, {ts[min(last + 1, N - 1)]:.6g}]",
                interval=(float(ts[first]), float(ts[min(last + 1, N - 1)])),
            )
    else:
        sep_min = np.inf

    coefs = p.coef_matrix()
    res = _poly_residuals(coefs, tracked)
    g = p.grid
    branches = [
        SampledSignal(t0=g.t0, dt=g.dt, values=tracked[:, i].astype(np.complex128),
                      label=f"branch{i}:{p.label}")
        for i in range(n)
    ]
    disc_sig = discriminant_signal(p, roots=tracked)
    return RootBranches(
        branches=branches,
        residual_max=float(np.max(res)),
        discriminant=disc_sig,
        separation_min=sep_min,
        matching_log=match_log,
    )


def root_bound_check(rb: RootBranches, p: PolyPath):
    """|root(t)| <= 1 + max_i |a_i(t)| pointwise; returns (flag, max_excess)."""
    mags = np.abs(rb.branch_matrix())
    bound = 1.0 + np.max(np.abs(p.coef_matrix()), axis=1)
    excess = float(np.max(mags - bound[:, None]))
    return excess <= 0.0, excess


def separation_certificate(rb: RootBranches, alpha_claim: float):
    """Verify min pairwise branch separation >= alpha_claim.

    Returns (flag, argmin time, separation_min, inf |D|) so the discriminant
    hypothesis |D(t)| >= alpha can be checked alongside.
    """
    bm = rb.branch_matrix()
    n = bm.shape[1]
    sep = np.full(bm.shape[0], np.inf)
    for i in range(n):
        for j in range(i + 1, n):
            sep = np.minimum(sep, np.abs(bm[:, i] - bm[:, j]))
    k = int(np.argmin(sep))
    ts = rb.discriminant.times()
    inf_d = float(np.min(np.abs(rb.discriminant.values[:, 0])))
    return bool(sep[k] >= alpha_claim), float(ts[k]), float(sep[k]), inf_d


def classify_branches(rb: RootBranches, th, classify_dt: float = None):
    """Recurrence classification of every branch signal.

    Tracking grids are often much finer than classification needs (the step
    guard wants small dt near close roots); classify_dt resamples branches
    first when provided.
    """
    from .recurrence import classify

    branches = rb.branches
    if classify_dt is not None and classify_dt > branches[0].dt:
        branches = [b.resample(classify_dt) for b in branches]
    return [classify(b, th) for b in branches]


def zhikov_pipeline(f_candidate: SampledSignal, with_decay: bool, th,
                    dd_threshold: float = 0.05, classify_dt: float = 0.02):
    """Near-vanishing-discriminant experiment: x^2 - p(t) = 0, p = f (+ e^-t).

    Builds the quadratic, tracks branches if the step guard allows, and
    juxtaposes inf |p| (the discriminant-separation failure witness) with
    the recurrence classification of the branches. The report flags when
    the separated-discriminant hypothesis fails at dd_threshold; it never
    claims more than the surrogate shows.
    """
    ts = f_candidate.times()
    pvals = f_candidate.values[:, 0].astype(np.complex128)
    if with_decay:
        pvals = pvals + np.exp(-ts)
    psig = SampledSignal(t0=f_candidate.t0, dt=f_candidate.dt, values=pvals, label="p")
    zero = SampledSignal(t0=psig.t0, dt=psig.dt, values=np.zeros(len(psig), dtype=complex),
                         label="a1")
    a2 = SampledSignal(t0=psig.t0, dt=psig.dt, values=-pvals, label="a2")
    path = PolyPath((zero, a2), label="zhikov")

    inf_p = float(np.min(np.abs(pvals)))
    report = {
        "with_decay": bool(with_decay),
        "inf_abs_p": inf_p,
        "inf_abs_D": 4.0 * inf_p,   # for x^2 - p the product form gives |D| = 4|p|
        "dd_separation_holds": bool(4.0 * inf_p > dd_threshold),
        "collisions": [],
        "branches": None,
    }
    try:
        rb = track_branches(path)
    except BranchCollisionError as exc:
        report["collisions"].append(list(exc.interval))
        return report, None
    reports = classify_branches(rb, th, classify_dt=classify_dt)
    report["branches"] = [r.flags for r in reports]
    report["separation_min"] = rb.separation_min
    report["residual_max"] = rb.residual_max
    return report, rb
