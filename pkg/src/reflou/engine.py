"""Reflected Euler-Maruyama integration of the Ornstein-Uhlenbeck Skorohod SDE.

One step from X (inside the closure of O) is

    X* = X - a X dt + s sqrt(dt) Q^{1/2} xi,

followed by a reflection that brings X* back into {G <= newton_tol}.  The
clock fixes (a, s): ``dirichlet`` uses (1, sqrt 2), generator tr(Q D^2) - <x, D>;
``probabilist`` uses (1/2, 1), generator half of that.  Both leave gamma
restricted to O invariant.

Reflection schemes:

* ``projection``: Newton projection onto the boundary; dL is the H-distance moved.
* ``reflection``: mirror image through the projected point, 2 y - X*; dL is
  the H-length of the full displacement.  No probability mass piles up on the
  boundary, so marginals converge faster than under projection.
* ``penalization``: no projection; the drift gains -(1/eps) G+(X) nu_G(X) / |D_H G(X)|_H
  and dL is the time integral of its H-magnitude.  States may sit slightly outside O.

Every reflection displacement is stored with the path, so the driving noise
can be rebuilt exactly from the states.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import multiprocessing

import numpy as np

from . import rng
from .domain import grad_H, grad_H_norm, project_many
from .errors import ContractViolation, SchemeFailure
from .gaussian_space import h_inner

SCHEMES = ("projection", "reflection", "penalization")
CLOCKS = ("dirichlet", "probabilist")
# paths per batch inside one worker; any multiple of rng.PATH_GROUP gives identical output
BATCH_PATHS = 16 * rng.PATH_GROUP


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    horizon: float = 1.0
    scheme: str = "projection"
    clock: str = "dirichlet"
    seed: int = 0
    epsilon: float = None
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    paths: int = 1
    # -1 is the invariant OU drift; +1 flips it (explosive, for sanity inversions)
    drift_sign: int = -1

    def __post_init__(self):
        bad = []
        if not (isinstance(self.dt, (int, float)) and self.dt > 0 and np.isfinite(self.dt)):
            bad.append(("dt", "must be a positive real"))
        if not (isinstance(self.horizon, (int, float)) and self.horizon >= 0):
            bad.append(("horizon", "must be a nonnegative real"))
        elif self.horizon > 0 and not bad and self.dt > self.horizon:
            bad.append(("dt", "must not exceed the horizon"))
        if self.scheme not in SCHEMES:
            bad.append(("scheme", f"must be one of {SCHEMES}"))
        if self.clock not in CLOCKS:
            bad.append(("clock", f"must be one of {CLOCKS}"))
        if self.scheme == "penalization" and not (self.epsilon is not None and self.epsilon > 0):
            bad.append(("epsilon", "must be positive for the penalization scheme"))
        if not self.newton_tol > 0:
            bad.append(("newton_tol", "must be positive"))
        if int(self.max_newton_iters) < 1:
            bad.append(("max_newton_iters", "must be at least 1"))
        if int(self.paths) < 1:
            bad.append(("paths", "must be at least 1"))
        if self.drift_sign not in (-1, 1):
            bad.append(("drift_sign", "must be -1 or +1"))
        if bad:
            name, msg = bad[0]
            err = ContractViolation(f"invalid sim config: {name} {msg}")
            err.field = name
            raise err

    @property
    def n_steps(self):
        return int(round(self.horizon / self.dt))

    @property
    def drift_rate(self):
        return 1.0 if self.clock == "dirichlet" else 0.5

    @property
    def noise_scale(self):
        return np.sqrt(2.0) if self.clock == "dirichlet" else 1.0

    @property
    def qv_rate(self):
        return self.noise_scale**2

    def replace(self, **kw):
        d = asdict(self)
        d.update(kw)
        return SimConfig(**d)


@dataclass
class PathRecord:
    times: np.ndarray
    states: np.ndarray  # (n + 1, d)
    local_time: np.ndarray  # (n + 1,)
    hit_flags: np.ndarray  # (n + 1,), entry 0 is False
    reflections: np.ndarray  # (n + 1, d), displacement applied at each step
    path_index: int = 0

    @property
    def z(self):
        return self.states[0]

    @property
    def increments(self):
        return np.diff(self.local_time, prepend=0.0)

    def to_csv(self, fh):
        d = self.states.shape[1]
        fh.write(",".join(["t", *(f"x_{k}" for k in range(1, d + 1)), "L", "hit"]) + "\n")
        for t, x, l, h in zip(self.times, self.states, self.local_time, self.hit_flags):
            fh.write(",".join([repr(float(t)), *(repr(float(v)) for v in x), repr(float(l)), str(int(h))]) + "\n")


# single steps


def _reflect(space, domain, config, xs, x_prev):
    """Bring post-noise points back to the closure.

    Returns (x, dL, hit, displacement, G(x)); the last is None for penalization.
    """
    n, d = xs.shape
    disp = np.zeros_like(xs)
    dl = np.zeros(n)
    tol, iters = config.newton_tol, config.max_newton_iters

    if config.scheme == "penalization":
        g = domain.G(space, x_prev)
        hit = g > 0
        idx = np.nonzero(hit)[0]
        if idx.size:
            dh = grad_H(domain, space, x_prev[idx])
            norm = np.sqrt(h_inner(space, dh, dh))
            mag = (config.dt / config.epsilon) * g[idx] / norm
            disp[idx] = -(mag / norm)[:, None] * dh
            dl[idx] = mag
        return xs + disp, dl, hit, disp, None

    g = domain.G(space, xs)
    hit = g > tol
    idx = np.nonzero(hit)[0]
    out = xs.copy()
    if idx.size:
        y, step = project_many(domain, space, xs[idx], tol, iters)
        if config.scheme == "reflection":
            mirror = 2 * y - xs[idx]
            step = 2 * step
            back = domain.G(space, mirror) > tol
            if back.any():
                y2, extra = project_many(domain, space, mirror[back], tol, iters)
                mirror[back] = y2
                step[back] += extra
            y = mirror
        out[idx] = y
        disp[idx] = y - xs[idx]
        dl[idx] = step
        g[idx] = domain.G(space, y)
    return out, dl, hit, disp, g


def _advance(space, config, x, xi):
    a = config.drift_sign * config.drift_rate * config.dt
    return x + a * x + (config.noise_scale * np.sqrt(config.dt) * space.sqrt_lam) * xi


def em_step(space, domain, config, state, noise):
    """One reflected step; returns (new_state, dL, hit_flag)."""
    x = np.atleast_2d(space.conform(state))
    xi = np.atleast_2d(space.conform(noise))
    new, dl, hit, _, _ = _reflect(space, domain, config, _advance(space, config, x, xi), x)
    return new[0], float(dl[0]), bool(hit[0])


# whole paths


def _check_start(space, domain, config, z):
    z = space.conform(z)
    if config.scheme != "penalization" and np.any(domain.G(space, z) > config.newton_tol):
        raise ContractViolation("start point lies outside the closure of the domain")
    return z


def simulate(space, domain, config, z, path_index=0):
    """Simulate one path; its noise is the ``path_index`` stream of ``config.seed``."""
    n, d = config.n_steps, space.dim
    blocks = [rng.block_noise(config.seed, [path_index], b, d)[0] for b in range(-(-n // rng.STEP_BLOCK))]
    noise = np.concatenate(blocks)[:n] if blocks else np.zeros((0, d))
    return integrate_path(space, domain, config, z, noise, path_index)


def integrate_path(space, domain, config, z, noise, path_index=0):
    """Run the reflected scheme from z with an explicit (n_steps, d) array of standard normals."""
    z = _check_start(space, domain, config, np.asarray(z, dtype=float))
    n, d = config.n_steps, space.dim
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (n, d):
        raise ContractViolation(f"noise must have shape {(n, d)}, got {noise.shape}")
    states = np.empty((n + 1, d))
    local = np.zeros(n + 1)
    hits = np.zeros(n + 1, dtype=bool)
    refl = np.zeros((n + 1, d))
    states[0] = z
    x = z[None, :].copy()
    for step in range(n):
        try:
            x, dl, hit, disp, _ = _reflect(space, domain, config, _advance(space, config, x, noise[step][None, :]), x)
        except SchemeFailure as exc:
            raise SchemeFailure(str(exc), state=exc.state, step=step + 1) from exc
        states[step + 1] = x[0]
        local[step + 1] = local[step] + dl[0]
        hits[step + 1] = hit[0]
        refl[step + 1] = disp[0]
    times = np.arange(n + 1) * config.dt
    return PathRecord(times, states, local, hits, refl, path_index)


def reconstruct_noise(path, space, domain, config):
    """Rebuild the driving process W from a path.

    W_n = X_n - z - sum(drift) - sum(reflection displacements); for the
    projection scheme on half-spaces and isotropic balls the displacements
    equal -nu_G(X) dL at the hit points.
    """
    _check_path(path, space, config)
    x = path.states
    drift = config.drift_sign * config.drift_rate * config.dt * x[:-1]
    dw = np.diff(x, axis=0) - drift - path.reflections[1:]
    return np.vstack([np.zeros(space.dim), np.cumsum(dw, axis=0)])


def _check_path(path, space, config):
    n = config.n_steps
    if path.states.shape != (n + 1, space.dim):
        raise ContractViolation(f"path has shape {path.states.shape}, config implies {(n + 1, space.dim)}")
    if n and not np.isclose(path.times[1] - path.times[0], config.dt):
        raise ContractViolation("path time step differs from config dt")


@dataclass
class ComponentSeries:
    k: int
    y: np.ndarray
    w: np.ndarray
    drift: np.ndarray
    refl: np.ndarray

    @property
    def residual(self):
        return self.y - self.y[0] - (self.w + self.drift + self.refl)


def component_series(path, space, domain, config, k):
    """Decomposition of the k-th H-coordinate vhat_k(X) into noise, drift and reflection."""
    i = space.check_index(k)
    s = space.sqrt_lam[i]
    _check_path(path, space, config)
    w = reconstruct_noise(path, space, domain, config)[:, i] / s
    y = path.states[:, i] / s
    drift = np.concatenate([[0.0], np.cumsum(config.drift_sign * config.drift_rate * config.dt * y[:-1])])
    refl = np.cumsum(path.reflections[:, i]) / s
    return ComponentSeries(int(k), y, w, drift, refl)


# ensembles


@dataclass
class Ensemble:
    """Per-path summaries of a batch of simulated paths, in path-index order."""

    config: SimConfig
    starts: np.ndarray
    final_states: np.ndarray
    local_time: np.ndarray
    weighted_local_time: np.ndarray
    hit_count: np.ndarray
    off_hit_local_time: np.ndarray
    max_G: np.ndarray
    time_average: np.ndarray  # (1/T) * sum over steps of X_n dt
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self):
        return self.final_states.shape[0]


def rejection_sample(space, domain, source, n, max_draws=None, chunk=4096):
    """n draws from gamma restricted to O, with the acceptance rate."""
    max_draws = max_draws or max(1000 * n, 10**6)
    out, drawn = [], 0
    have = 0
    while have < n:
        x = space.sqrt_lam * source.standard_normal((chunk, space.dim))
        drawn += chunk
        keep = x[domain.G(space, x) < 0]
        out.append(keep)
        have += keep.shape[0]
        if drawn >= max_draws and have < n:
            break
    rate = have / drawn
    if have < n or rate < 1e-3:
        raise SchemeFailure(f"rejection acceptance rate {rate:.2e} too low; choose a larger domain")
    return np.concatenate(out)[:n], rate


def stationary_starts(space, domain, seed, paths):
    """One gamma|_O draw per path, each from the path's own START stream."""
    out = np.empty((len(paths), space.dim))
    for row, p in enumerate(paths):
        src = rng.stream(seed, rng.START, int(p))
        while True:
            x = space.sqrt_lam * src.standard_normal((64, space.dim))
            inside = np.nonzero(domain.G(space, x) < 0)[0]
            if inside.size:
                out[row] = x[inside[0]]
                break
    return out


def _run_batch(args):
    space, domain, config, paths, starts, f = args
    d = space.dim
    n = config.n_steps
    x = starts.copy()
    m = x.shape[0]
    local = np.zeros(m)
    weighted = np.zeros(m)
    hits = np.zeros(m, dtype=np.int64)
    off = np.zeros(m)
    gmax = domain.G(space, x)
    acc = np.zeros_like(x)
    step = 0
    for b in range(-(-n // rng.STEP_BLOCK)):
        xi = rng.block_noise(config.seed, paths, b, d)
        for j in range(min(rng.STEP_BLOCK, n - step)):
            try:
                x_new, dl, hit, _, g_after = _reflect(space, domain, config, _advance(space, config, x, xi[:, j]), x)
            except SchemeFailure as exc:
                raise SchemeFailure(str(exc), state=exc.state, step=step + 1) from exc
            step += 1
            idx = np.nonzero(dl)[0]
            if idx.size:
                local[idx] += dl[idx]
                if f is not None:
                    at = x_new[idx] if config.scheme != "penalization" else x[idx]
                    weighted[idx] += f(at) * dl[idx]
                stray = idx[~hit[idx]]
                off[stray] += dl[stray]
            hits += hit
            x = x_new
            acc += x
            if g_after is not None:
                np.maximum(gmax, g_after, out=gmax)
    return x, local, weighted, hits, off, gmax, acc / max(n, 1)


def worker_count():
    """Workers from GR_THREADS (default 1); never affects numerical output."""
    try:
        return max(1, int(os.environ.get("GR_THREADS", "1")))
    except ValueError:
        return 1


def simulate_ensemble(space, domain, config, z=None, f=None, first_path=0, workers=None):
    """Run ``config.paths`` paths, starting at ``z`` or (default) stationary gamma|_O draws.

    ``f`` (a TestFunction or any vectorised callable) is integrated against
    dL along each path.  Results depend only on (config, z, path indices).
    """
    paths = np.arange(first_path, first_path + int(config.paths), dtype=np.int64)
    if z is None:
        starts = stationary_starts(space, domain, config.seed, paths)
    else:
        starts = np.broadcast_to(_check_start(space, domain, config, np.asarray(z, dtype=float)), (paths.size, space.dim)).copy()
    jobs = [
        (space, domain, config, paths[i : i + BATCH_PATHS], starts[i : i + BATCH_PATHS], f)
        for i in range(0, paths.size, BATCH_PATHS)
    ]
    workers = workers or worker_count()
    if workers > 1 and len(jobs) > 1:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            parts = list(pool.map(_run_batch, jobs))
    else:
        parts = [_run_batch(job) for job in jobs]
    cols = [np.concatenate([p[i] for p in parts]) for i in range(7)]
    return Ensemble(config, starts, *cols, meta={"first_path": int(first_path), "start": "stationary" if z is None else "fixed", "weight": f})


def simulate_paths(space, domain, config, z=None, first_path=0):
    """Full PathRecords for ``config.paths`` paths (memory grows with paths x steps)."""
    paths = range(first_path, first_path + int(config.paths))
    if z is None:
        starts = stationary_starts(space, domain, config.seed, list(paths))
    else:
        starts = [np.asarray(z, dtype=float)] * len(paths)
    return [simulate(space, domain, config, s, p) for s, p in zip(starts, paths)]
