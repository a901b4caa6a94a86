"""Free and nonlinear evolution, the Duhamel operator and Picard iteration.

The equation is

    -i u_t + (-Delta)^(alpha/2) u = sigma (|x|^-alpha * |u|^2) u,

so the free flow has symbol exp(-i t rho^alpha) and the solution satisfies
u(t) = S(t) phi + i sigma J(u, u, u)(t) with

    J(u1, u2, u3)(t) = int_0^t S(t - s) [(|x|^-alpha * u1 conj(u2)) u3](s) ds.

The nonlinear splitting substep therefore rotates the phase by
exp(+i sigma dt V[u]).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .littlewood_paley import DyadicIndex, project_gt
from .spectral import (GridMismatchError, ModelParams, RadialField, SpectralField,
                       forward_transform, inverse_transform, l2_norm, riesz_convolution)

__all__ = [
    "Trajectory",
    "ScatterRecord",
    "PicardResult",
    "BlowUpError",
    "PicardDivergence",
    "LocalTimeResult",
    "free_propagate",
    "free_flow",
    "evolve",
    "energy",
    "mass",
    "rescale",
    "rescale_trajectory",
    "duhamel_J",
    "duhamel_trajectory",
    "picard_iterate",
    "scattering_extract",
    "local_time_datum",
    "local_time_probe",
]


class BlowUpError(RuntimeError):
    """Evolution aborted after excessive norm growth; ``partial`` holds the run so far."""

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class PicardDivergence(RuntimeError):
    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


@dataclass(frozen=True)
class Trajectory:
    """States u(t_m) on a common grid, stored as an (M, N) array."""

    times: np.ndarray
    values: np.ndarray
    grid: object
    params: ModelParams
    dt: float
    diag_times: np.ndarray | None = None
    mass: np.ndarray | None = None
    energy: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) == 0:
            raise ValueError("times must be a non-empty 1-d sequence")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.values.shape != (len(t), self.grid.n_points):
            raise ValueError("values must have shape (len(times), n_points)")
        object.__setattr__(self, "times", t)

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> RadialField:
        return RadialField(self.grid, self.values[i])

    @property
    def states(self) -> list[RadialField]:
        return [self.state(i) for i in range(len(self))]

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not on the trajectory mesh")
        return i

    def at(self, t: float) -> RadialField:
        return self.state(self.index_of(t))

    def as_field(self) -> RadialField:
        return RadialField(self.grid, self.values)

    def spectral(self) -> np.ndarray:
        return forward_transform(self.as_field()).values

    def l2_norms(self) -> np.ndarray:
        return np.sqrt(np.abs(self.values) ** 2 @ self.grid.radial_weights)

    def with_values(self, values) -> "Trajectory":
        return Trajectory(self.times, np.asarray(values), self.grid, self.params, self.dt)


@dataclass(frozen=True)
class ScatterRecord:
    probe_times: np.ndarray
    pullbacks: list
    distances: np.ndarray

    @property
    def phi_plus(self) -> RadialField:
        return self.pullbacks[-1]

    def consecutive(self) -> np.ndarray:
        """Distances between pullbacks at neighbouring probe times."""
        return np.diag(self.distances, 1)


def _phase(grid, t, alpha):
    t = np.asarray(t, dtype=float)
    return np.exp(-1j * t[..., None] * grid.rho**alpha) if t.ndim else \
        np.exp(-1j * float(t) * grid.rho**alpha)


def free_propagate(f, t, params: ModelParams | float):
    """S(t) f, the multiplier exp(-i t rho^alpha).  Returns the same kind of field."""
    alpha = params.alpha if isinstance(params, ModelParams) else float(params)
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    if isinstance(f, SpectralField):
        return SpectralField(f.grid, f.values * _phase(f.grid, t, alpha))
    F = forward_transform(f)
    return inverse_transform(SpectralField(f.grid, F.values * _phase(f.grid, t, alpha)))


def free_flow(f: RadialField, times, params: ModelParams) -> Trajectory:
    """The free solution t -> S(t) f sampled on ``times``."""
    times = np.asarray(times, dtype=float)
    F = forward_transform(f).values
    vals = inverse_transform(SpectralField(f.grid, F * _phase(f.grid, times, params.alpha)))
    dt = float(times[1] - times[0]) if len(times) > 1 else 0.0
    return Trajectory(times, vals.values, f.grid, params, dt)


def mass(f: RadialField) -> float:
    return l2_norm(f) ** 2


def _kinetic(F: np.ndarray, grid, alpha) -> np.ndarray:
    return 0.5 * (np.abs(F) ** 2 * grid.rho**alpha) @ grid.spectral_weights


def energy(f: RadialField, params: ModelParams, ref_width: float | None = None) -> float:
    """E = 1/2 <(-Delta)^(alpha/2) u, u> - sigma/4 <(|x|^-alpha * |u|^2) u, u>.

    The sign of the quartic term is the one conserved by the flow above.
    """
    g = f.grid
    kin = _kinetic(forward_transform(f).values, g, params.alpha)
    if params.sigma == 0:
        return float(kin)
    n = np.abs(f.values) ** 2
    V = riesz_convolution(RadialField(g, n), params, ref_width).values.real
    return float(kin - 0.25 * params.sigma * (V * n) @ g.radial_weights)


def density_width(f: RadialField) -> float:
    """RMS radius / sqrt(3) of |f|^2, clipped to the grid; used as Riesz reference width."""
    from .spectral import _moment_width
    return _moment_width(np.abs(f.values) ** 2, f.grid)


def evolve(f: RadialField, T: float, params: ModelParams, dt: float,
           save_every: int = 1, blowup_factor: float = 1e3) -> Trajectory:
    """Strang splitting: half nonlinear phase, full free step, half nonlinear phase.

    Mass and energy are recorded after every step; states every ``save_every``
    steps (and at T).
    """
    params.require_dynamics()
    g = f.grid
    if dt <= 0 or T < 0:
        raise ValueError("need dt > 0 and T >= 0")
    if dt * g.rho_max**params.alpha > 1:
        warnings.warn(f"dt * rho_max^alpha = {dt * g.rho_max ** params.alpha:.3g} > 1; "
                      "the splitting may not resolve the highest grid frequencies",
                      RuntimeWarning, stacklevel=2)
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be an integer multiple of dt")
    alpha, sigma = params.alpha, params.sigma
    width = density_width(f)
    w = g.radial_weights
    lin = np.exp(-1j * dt * g.rho**alpha)

    def potential(u):
        if sigma == 0:
            return np.zeros(g.n_points)
        return riesz_convolution(RadialField(g, np.abs(u) ** 2), params, width).values.real

    def diagnostics(u, V):
        F = forward_transform(RadialField(g, u)).values
        n = np.abs(u) ** 2
        return n @ w, _kinetic(F, g, alpha) - 0.25 * sigma * (V * n) @ w

    u = np.array(f.values)
    V = potential(u)
    sup0 = np.max(np.abs(u)) or 1.0
    times, states = [0.0], [u.copy()]
    m0, e0 = diagnostics(u, V)
    masses, energies = [m0], [e0]
    for step in range(1, n_steps + 1):
        u = u * np.exp(0.5j * sigma * dt * V)
        F = forward_transform(RadialField(g, u)).values * lin
        u = inverse_transform(SpectralField(g, F)).values.copy()
        V = potential(u)
        u = u * np.exp(0.5j * sigma * dt * V)
        m, e = diagnostics(u, V)
        masses.append(m)
        energies.append(e)
        if step % save_every == 0 or step == n_steps:
            times.append(step * dt)
            states.append(u.copy())
        if not np.isfinite(e) or np.max(np.abs(u)) > blowup_factor * sup0:
            partial = Trajectory(np.array(times), np.array(states), g, params, dt)
            raise BlowUpError(f"norm growth beyond {blowup_factor:g}x at t = {step * dt:g}",
                              partial)
    return Trajectory(np.array(times), np.array(states), g, params, dt,
                      diag_times=dt * np.arange(n_steps + 1),
                      mass=np.array(masses), energy=np.array(energies))


def _sample_at(f: RadialField, r_new: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Evaluate the sine-series interpolant of f at arbitrary radii."""
    g = f.grid
    F = forward_transform(f).values
    coef = g.drho * F * g.rho / (2 * np.pi**2)
    out = np.empty(len(r_new), dtype=complex)
    for s in range(0, len(r_new), chunk):
        r = r_new[s:s + chunk]
        out[s:s + chunk] = np.sin(np.outer(r, g.rho)) @ coef / r
    return out


def rescale(f: RadialField, lam: float, params: ModelParams | None = None,
            tol: float = 1e-10) -> RadialField:
    """lam^(3/2) f(lam x), resampled with the band-limited interpolant.

    Raises ValueError when the rescaled function would alias (lam > 1) or not
    fit inside the box (lam < 1) beyond relative mass ``tol``.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if lam == 1:
        return f
    g = f.grid
    if lam > 1:
        F = forward_transform(f).values
        lost = (np.abs(F) ** 2 @ (g.spectral_weights * (g.rho > g.rho_max / lam)))
        total = np.abs(F) ** 2 @ g.spectral_weights
        if total > 0 and lost > tol * total:
            raise ValueError(f"rescaling by {lam} aliases {lost / total:.2e} of the mass")
    else:
        n = np.abs(f.values) ** 2
        w = g.radial_weights
        lost = n @ (w * (g.r > lam * g.r_max))
        if n @ w > 0 and lost > tol * (n @ w):
            raise ValueError(f"rescaling by {lam} pushes {lost / (n @ w):.2e} of the mass "
                             "outside the box")
    r_new = lam * g.r
    vals = np.zeros(g.n_points, dtype=complex)
    inside = r_new < g.r_max
    vals[inside] = lam**1.5 * _sample_at(f, r_new[inside])
    return RadialField(g, vals)


def rescale_trajectory(traj: Trajectory, lam: float) -> Trajectory:
    """u_lam(t) = lam^(3/2) u(lam^alpha t, lam x) on times t_m / lam^alpha."""
    vals = np.array([rescale(s, lam).values for s in traj.states])
    a = traj.params.alpha
    return Trajectory(traj.times / lam**a, vals, traj.grid, traj.params, traj.dt / lam**a)


def _check_mesh(*trajs: Trajectory):
    t0 = trajs[0]
    for t in trajs[1:]:
        if t.grid != t0.grid:
            raise GridMismatchError("trajectories live on different grids")
        if len(t.times) != len(t0.times) or np.max(np.abs(t.times - t0.times)) > 1e-12:
            raise ValueError("trajectories must share one time mesh")


def duhamel_trajectory(u1: Trajectory, u2: Trajectory, u3: Trajectory,
                       ref_width: float | None = None) -> Trajectory:
    """J(u1, u2, u3) on the whole mesh by the trapezoid rule in s.

    Uses J(t_{m+1}) = S(h) [J(t_m) + h/2 N(t_m)] + h/2 N(t_{m+1}); the mesh
    must start at t = 0.
    """
    _check_mesh(u1, u2, u3)
    g, params = u1.grid, u1.params
    times = u1.times
    if abs(times[0]) > 1e-14:
        raise ValueError("the time mesh must start at t = 0")
    dens = RadialField(g, u1.values * np.conj(u2.values))
    if ref_width is None:
        ref_width = density_width(u1.state(0))
    V = riesz_convolution(dens, params, ref_width).values
    N = forward_transform(RadialField(g, V * u3.values)).values
    J = np.zeros_like(N)
    rho_a = g.rho**params.alpha
    for m in range(len(times) - 1):
        h = times[m + 1] - times[m]
        J[m + 1] = np.exp(-1j * h * rho_a) * (J[m] + 0.5 * h * N[m]) + 0.5 * h * N[m + 1]
    vals = inverse_transform(SpectralField(g, J)).values
    return Trajectory(times, vals, g, params, u1.dt)


def duhamel_J(u1: Trajectory, u2: Trajectory, u3: Trajectory, t: float,
              ref_width: float | None = None) -> RadialField:
    """J(u1, u2, u3)(t) for a mesh time t (0 for t < 0)."""
    if t < 0:
        return RadialField(u1.grid, np.zeros(u1.grid.n_points))
    return duhamel_trajectory(u1, u2, u3, ref_width).at(t)


@dataclass
class PicardResult:
    iterates: list
    diffs: np.ndarray
    converged: bool

    @property
    def ratios(self) -> np.ndarray:
        d = self.diffs
        with np.errstate(divide="ignore", invalid="ignore"):
            return d[1:] / d[:-1]

    @property
    def limit(self) -> Trajectory:
        return self.iterates[-1]


def _sup_l2(a: np.ndarray, grid) -> float:
    return float(np.sqrt(np.max(np.abs(a) ** 2 @ grid.radial_weights)))


def picard_iterate(f: RadialField, T: float, params: ModelParams, k_max: int = 6,
                   dt: float | None = None, n_steps: int | None = None,
                   floor: float = 1e-13, raise_on_divergence: bool = True) -> PicardResult:
    """u^0 = S(t) f, u^(k+1) = S(t) f + i sigma J(u^k, u^k, u^k) on [0, T].

    Stops after ``k_max`` differences, or once d_k drops below
    ``floor * ||f||`` (round-off level).  Two consecutive increases of d_k
    count as divergence.
    """
    params.require_dynamics()
    if n_steps is None:
        if dt is None:
            raise ValueError("give dt or n_steps")
        n_steps = int(round(T / dt))
    times = np.linspace(0.0, T, n_steps + 1)
    free = free_flow(f, times, params)
    width = density_width(f)
    iterates = [free]
    diffs = []
    scale = l2_norm(f)
    converged = False
    for k in range(k_max):
        u = iterates[-1]
        J = duhamel_trajectory(u, u, u, width)
        nxt = free.with_values(free.values + 1j * params.sigma * J.values)
        d = _sup_l2(nxt.values - u.values, f.grid)
        iterates.append(nxt)
        diffs.append(d)
        if d <= floor * max(scale, 1e-300):
            converged = True
            break
        if len(diffs) >= 3 and diffs[-1] > diffs[-2] > diffs[-3]:
            res = PicardResult(iterates, np.array(diffs), False)
            if raise_on_divergence:
                raise PicardDivergence(f"Picard differences grew twice in a row: {diffs}", res)
            return res
    else:
        converged = len(diffs) > 1 and diffs[-1] < diffs[0]
    return PicardResult(iterates, np.array(diffs), converged)


def scattering_extract(traj: Trajectory, probe_times) -> ScatterRecord:
    """Pullbacks S(-t_i) u(t_i) and their pairwise L^2 distances."""
    probe_times = np.asarray(probe_times, dtype=float)
    pulls = [free_propagate(traj.at(t), -t, traj.params) for t in probe_times]
    n = len(pulls)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = l2_norm(pulls[i] - pulls[j])
    return ScatterRecord(probe_times, pulls, D)


# -- local existence time -------------------------------------------------------

@dataclass
class LocalTimeResult:
    r: float
    Lambda: float
    T_star: float
    bracket: tuple
    bracket_maximal: bool
    evaluations: list = field(default_factory=list)
    datum_norm: float = 0.0
    datum_tail: float = 0.0


def local_time_datum(grid, r: float, Lambda, eta: float = 2.0**-10,
                     bulk_scale: float = 1 / 8, tail_scale: float = 2.0) -> RadialField:
    """A datum in B_{r, Lambda}: Gaussian bulk at frequency scale
    ``bulk_scale * Lambda`` plus a high-frequency shell at ``tail_scale * Lambda``
    carrying L^2 norm eta / (2 r)."""
    lam = DyadicIndex.of(Lambda).value
    k0 = bulk_scale * lam
    rho = grid.rho
    bulk = np.exp(-0.5 * (rho / k0) ** 2)
    shell = np.exp(-0.5 * ((rho - tail_scale * lam) / (0.1 * lam)) ** 2)
    w = grid.spectral_weights
    tail_norm = eta / (2 * r)
    bulk_norm = r - tail_norm
    F = bulk * bulk_norm / np.sqrt(bulk**2 @ w) + shell * tail_norm / np.sqrt(shell**2 @ w)
    return inverse_transform(SpectralField(grid, F))


def local_time_probe(r: float, Lambda, params: ModelParams, grid=None,
                     bracket=(1e-5, 10.0), n_steps: int = 64, k_max: int = 4,
                     threshold: float = 0.5, bisections: int = 24,
                     eta: float = 2.0**-10, datum: RadialField | None = None) -> LocalTimeResult:
    """Largest T (log-bisection) for which Picard on [0, T] contracts with
    every ratio d_(k+1)/d_k below ``threshold``.

    The mesh has ``n_steps`` steps for every T, so runs at different Lambda
    differ only by the scaling symmetry.
    """
    from .spectral import RadialGrid
    grid = grid or RadialGrid()
    if r < 1:
        raise ValueError("r must be >= 1")
    phi = datum if datum is not None else local_time_datum(grid, r, Lambda, eta)
    tail = l2_norm(project_gt(phi, Lambda))
    evals = []

    def passes(T):
        try:
            res = picard_iterate(phi, T, params, k_max=k_max, n_steps=n_steps)
        except PicardDivergence:
            evals.append((T, np.inf))
            return False
        ratios = res.ratios
        finite = ratios[np.isfinite(ratios)]
        worst = float(np.max(finite)) if len(finite) else 0.0
        ok = worst < threshold
        evals.append((T, worst))
        return ok

    lo, hi = map(float, bracket)
    if passes(hi):
        return LocalTimeResult(r, DyadicIndex.of(Lambda).value, hi, (lo, hi), True, evals,
                               l2_norm(phi), tail)
    if not passes(lo):
        raise ValueError(f"no T in [{lo:g}, {hi:g}] passes the contraction test")
    for _ in range(bisections):
        mid = np.sqrt(lo * hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
    return LocalTimeResult(r, DyadicIndex.of(Lambda).value, lo, tuple(map(float, bracket)),
                           False, evals, l2_norm(phi), tail)

