"""Level-set domains O = {G < 0}: balls and regions below graphs.

``Ball(r)`` uses G(x) = |x|^2 - r^2 (Euclidean norm of E).  ``GraphRegion``
uses G(x) = vhat_j(x) - F(x_perp) where x_perp collects the E-coordinates of
the axes other than j, in increasing order.  A half-space {vhat_j < c} is the
graph region of the constant profile c.

All geometric maps accept a single vector or an (n, d) stack.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DegenerateGradientError, SchemeFailure
from .gaussian_space import h_inner

SINGULAR_GRADIENT = 1e-12


class LevelSetDomain:
    kind = "abstract"

    def G(self, space, x):
        raise NotImplementedError

    def grad(self, space, x):
        """Euclidean gradient of G."""
        raise NotImplementedError

    def contains(self, space, x, tol=0.0):
        return self.G(space, x) <= tol

    def validate(self, space):
        pass

    def to_config(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Ball(LevelSetDomain):
    r: float = 1.0
    kind = "ball"

    def __post_init__(self):
        if not self.r > 0:
            raise ContractViolation(f"ball radius must be positive, got {self.r}")

    def G(self, space, x):
        x = space.conform(x)
        return np.sum(x * x, axis=-1) - self.r**2

    def grad(self, space, x):
        return 2.0 * space.conform(x)

    def to_config(self):
        return {"kind": "ball", "r": float(self.r)}


# graph profiles: callables on the complementary coordinates, shape (..., d-1)


@dataclass(frozen=True)
class ConstantProfile:
    c: float = 0.0
    kind = "constant"
    lipschitz = 0.0

    def __call__(self, y):
        return np.full(np.shape(y)[:-1], float(self.c))

    def grad(self, y):
        return np.zeros(np.shape(y))

    def params(self):
        return [float(self.c)]


@dataclass(frozen=True)
class LinearProfile:
    """F(y) = c + <a, y>."""

    c: float
    a: tuple
    kind = "linear"

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))

    @property
    def lipschitz(self):
        return float(np.linalg.norm(self.a))

    def __call__(self, y):
        return self.c + np.asarray(y) @ np.asarray(self.a)

    def grad(self, y):
        return np.broadcast_to(np.asarray(self.a), np.shape(y)).copy()

    def params(self):
        return [float(self.c), *self.a]


@dataclass(frozen=True)
class QuadraticProfile:
    """F(y) = c + <a, y> + sum_i b_i y_i^2 (not globally Lipschitz)."""

    c: float
    a: tuple
    b: tuple
    kind = "quadratic"
    lipschitz = float("inf")

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        if len(self.a) != len(self.b):
            raise ContractViolation("quadratic profile needs as many b as a coefficients")

    def __call__(self, y):
        y = np.asarray(y)
        return self.c + y @ np.asarray(self.a) + (y * y) @ np.asarray(self.b)

    def grad(self, y):
        return np.asarray(self.a) + 2.0 * np.asarray(self.b) * np.asarray(y)

    def params(self):
        return [float(self.c), *self.a, *self.b]


def make_profile(kind, params, n):
    """Build a profile over n complementary coordinates from config data."""
    params = [float(p) for p in params]
    if kind == "constant":
        if len(params) != 1:
            raise ContractViolation("constant profile takes params [c]")
        return ConstantProfile(params[0])
    if kind == "linear":
        if len(params) != 1 + n:
            raise ContractViolation(f"linear profile takes params [c, a_1..a_{n}]")
        return LinearProfile(params[0], tuple(params[1:]))
    if kind == "quadratic":
        if len(params) != 1 + 2 * n:
            raise ContractViolation(f"quadratic profile takes params [c, a_1..a_{n}, b_1..b_{n}]")
        return QuadraticProfile(params[0], tuple(params[1 : 1 + n]), tuple(params[1 + n :]))
    raise ContractViolation(f"unknown profile kind {kind!r}")


@dataclass(frozen=True)
class GraphRegion(LevelSetDomain):
    """Region below the graph of ``profile`` in the direction v_axis (axis is 1-based).

    ``profile`` is any object with ``__call__(y)`` and ``grad(y)`` on arrays of
    complementary coordinates; its admissibility is the caller's responsibility.
    """

    axis: int
    profile: object
    lipschitz: float = None
    kind = "graph"

    def __post_init__(self):
        if int(self.axis) < 1:
            raise ContractViolation(f"graph axis is 1-based, got {self.axis}")
        if self.lipschitz is None:
            object.__setattr__(self, "lipschitz", getattr(self.profile, "lipschitz", float("inf")))

    @property
    def j(self):
        return int(self.axis) - 1

    def validate(self, space):
        space.check_index(self.axis)

    def split(self, space, x):
        x = space.conform(x)
        self.validate(space)
        return x[..., self.j], np.delete(x, self.j, axis=-1)

    def G(self, space, x):
        xj, rest = self.split(space, x)
        return xj / space.sqrt_lam[self.j] - self.profile(rest)

    def grad(self, space, x):
        xj, rest = self.split(space, x)
        g = -np.asarray(self.profile.grad(rest), dtype=float)
        g = np.insert(g, self.j, 1.0 / space.sqrt_lam[self.j], axis=-1)
        return g

    def to_config(self):
        kind = getattr(self.profile, "kind", None)
        if kind is None:
            raise ContractViolation("custom profiles have no config representation")
        return {"kind": "graph", "axis": int(self.axis), "profile": {"kind": kind, "params": self.profile.params()}}


def HalfSpace(axis=1, level=0.0):
    """The half-space {vhat_axis < level}."""
    return GraphRegion(axis, ConstantProfile(float(level)))


def eval_G(domain, space, x):
    return domain.G(space, x)


def grad_H(domain, space, x):
    """D_H G(x) = Q grad G(x), in E-coordinates."""
    return space.lam * domain.grad(space, x)


def grad_H_norm(domain, space, x):
    g = grad_H(domain, space, x)
    return np.sqrt(h_inner(space, g, g))


def unit_normal(domain, space, x, threshold=SINGULAR_GRADIENT):
    """Outward unit normal nu_G = D_H G / |D_H G|_H."""
    g = grad_H(domain, space, x)
    norm = np.sqrt(h_inner(space, g, g))
    if np.any(norm <= threshold):
        raise DegenerateGradientError(np.asarray(x), float(np.min(norm)))
    return g / np.asarray(norm)[..., None]


def project_many(domain, space, x, tol=1e-10, max_iter=50):
    """Newton projection of a stack of points onto {G <= tol} in H-geometry.

    Points outside are moved by damped Newton steps along D_H G until
    |G(y)| <= tol, so they land on the boundary even when a full step would
    overshoot into O.  Returns (y, dL) where dL = |y - x|_H; rows already in
    {G <= tol} are returned unchanged with dL = 0.
    """
    x = np.atleast_2d(space.conform(x))
    y = x.copy()
    g = domain.G(space, y)
    active = np.nonzero(g > tol)[0]
    for _ in range(max_iter):
        if active.size == 0:
            break
        ya = y[active]
        ga = g[active]
        dh = grad_H(domain, space, ya)
        n2 = h_inner(space, dh, dh)
        if np.any(n2 <= SINGULAR_GRADIENT**2):
            bad = active[np.argmin(n2)]
            raise SchemeFailure("vanishing H-gradient during projection", state=x[bad].copy())
        step = (ga / n2)[:, None] * dh
        cand = ya - step
        gc = domain.G(space, cand)
        # damping: halve steps that do not reduce |G|
        for _ in range(30):
            worse = np.abs(gc) > np.abs(ga)
            if not worse.any():
                break
            step[worse] *= 0.5
            cand[worse] = ya[worse] - step[worse]
            gc[worse] = domain.G(space, cand[worse])
        y[active] = cand
        g[active] = gc
        active = active[np.abs(gc) > tol]
    if active.size:
        raise SchemeFailure(
            f"projection did not reach |G| <= {tol:g} in {max_iter} iterations", state=x[active[0]].copy()
        )
    d = y - x
    return y, np.sqrt(h_inner(space, d, d))


def project_to_closure(domain, space, x, tol=1e-10, max_iter=50):
    """Project one point onto the closure of O; returns (y, dL)."""
    if not tol > 0:
        raise ContractViolation("projection tolerance must be positive")
    single = np.ndim(x) == 1
    y, dl = project_many(domain, space, x, tol, max_iter)
    if single:
        return y[0], float(dl[0])
    return y, dl


def gamma_mass_estimate(domain, space, source, n=10_000):
    """Monte Carlo estimate of gamma(O) with its standard error."""
    from .gaussian_space import sample_gamma

    inside = domain.contains(space, sample_gamma(space, source, n))
    p = inside.mean()
    return float(p), float(np.sqrt(p * (1 - p) / n))


def inverse_gradient_moment(domain, space, source, q=2.0, n=10_000):
    """Monte Carlo spot check of E_gamma[|D_H G|_H^{-q}] with its standard error.

    A large or unstable value hints that 1/|D_H G|_H is not q-integrable.
    """
    from .gaussian_space import sample_gamma

    x = sample_gamma(space, source, n)
    v = grad_H_norm(domain, space, x) ** (-float(q))
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(n))
