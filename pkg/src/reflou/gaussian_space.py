"""Truncated model of a Gaussian Hilbert space (E, gamma, H(gamma)).

The covariance Q is diagonal in the basis e_1..e_d with eigenvalues
lambda_1 >= ... >= lambda_d > 0.  Vectors are plain float arrays of
E-coordinates; every function here broadcasts over leading axes, so an
array of shape (n, d) is treated as n vectors.

Indices k follow the mathematical convention 1..d.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation


@dataclass(frozen=True)
class GaussianSpace:
    lambdas: tuple

    def __post_init__(self):
        lam = tuple(float(v) for v in np.atleast_1d(np.asarray(self.lambdas, dtype=float)))
        if not lam:
            raise ContractViolation("spectrum must have at least one eigenvalue")
        if any(not np.isfinite(v) or v <= 0 for v in lam):
            raise ContractViolation(f"eigenvalues must be positive and finite, got {lam}")
        if any(a < b for a, b in zip(lam, lam[1:])):
            raise ContractViolation(f"eigenvalues must be nonincreasing, got {lam}")
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def power_law(cls, c, p, d):
        """Spectrum lambda_k = c * k**(-p), k = 1..d."""
        if c <= 0 or d < 1:
            raise ContractViolation("power-law spectrum needs c > 0 and d >= 1")
        k = np.arange(1, int(d) + 1, dtype=float)
        return cls(tuple(c * k ** (-float(p))))

    @property
    def dim(self):
        return len(self.lambdas)

    @property
    def lam(self):
        return np.asarray(self.lambdas)

    @property
    def sqrt_lam(self):
        return np.sqrt(self.lam)

    def conform(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dim:
            raise ContractViolation(f"vector of shape {x.shape} does not conform to dimension {self.dim}")
        return x

    def check_index(self, k):
        if not (1 <= int(k) <= self.dim):
            raise ContractViolation(f"component index {k} outside 1..{self.dim}")
        return int(k) - 1

    def basis(self, k):
        """The Cameron-Martin basis vector v_k = sqrt(lambda_k) e_k."""
        v = np.zeros(self.dim)
        i = self.check_index(k)
        v[i] = self.sqrt_lam[i]
        return v

    def whiten(self, x):
        """y = Q^{-1/2} x, the coordinates in which the H-metric is Euclidean."""
        return self.conform(x) / self.sqrt_lam

    def h_norm(self, u):
        return np.sqrt(h_inner(self, u, u))


def h_inner(space, u, v):
    """Cameron-Martin inner product [u, v]_H = sum_k u_k v_k / lambda_k."""
    u = space.conform(u)
    v = space.conform(v)
    return np.sum(u * v / space.lam, axis=-1)


def hat_functional(space, k, x):
    """v_k-hat(x) = x_k / sqrt(lambda_k); standard normal under gamma."""
    i = space.check_index(k)
    x = space.conform(x)
    return x[..., i] / space.sqrt_lam[i]


def apply_covariance(space, l):
    """(Q l)_k = lambda_k l_k, i.e. j_H after identifying E' with E."""
    return space.lam * space.conform(l)


def sample_gamma(space, source, size=None):
    """Karhunen-Loeve draw x_k = sqrt(lambda_k) xi_k from a seeded generator."""
    shape = (space.dim,) if size is None else (*np.atleast_1d(size), space.dim)
    return space.sqrt_lam * source.standard_normal(shape)


@dataclass(frozen=True)
class TestFunction:
    """A smooth function on R^d together with its Euclidean gradient.

    Both callables take an array of shape (..., d); ``value`` returns shape
    (...) and ``grad`` returns shape (..., d).  Sums and products carry their
    gradients along by the sum and product rules.
    """

    __test__ = False  # not a pytest class

    value: object
    grad: object
    name: str = field(default="phi", compare=False)

    def __call__(self, x):
        return np.asarray(self.value(np.asarray(x, dtype=float)), dtype=float)

    def gradient(self, x):
        return np.asarray(self.grad(np.asarray(x, dtype=float)), dtype=float)

    def d_h(self, space, x):
        """D_H phi = Q grad(phi)."""
        return space.lam * self.gradient(x)

    def d_k(self, space, k, x):
        """Directional derivative along v_k: [D_H phi, v_k]_H = sqrt(lambda_k) d_k phi."""
        i = space.check_index(k)
        return space.sqrt_lam[i] * self.gradient(x)[..., i]

    def __add__(self, other):
        other = _lift(other)
        return TestFunction(
            lambda x: self(x) + other(x),
            lambda x: self.gradient(x) + other.gradient(x),
            f"({self.name} + {other.name})",
        )

    __radd__ = __add__

    def __mul__(self, other):
        other = _lift(other)
        return TestFunction(
            lambda x: self(x) * other(x),
            lambda x: self(x)[..., None] * other.gradient(x) + other(x)[..., None] * self.gradient(x),
            f"{self.name}*{other.name}",
        )

    __rmul__ = __mul__

    def check_gradient(self, points, rtol=1e-5, h=1e-6):
        """True when grad matches central differences of value at every point."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        g = self.gradient(points)
        fd = np.empty_like(points)
        for i in range(points.shape[-1]):
            step = np.zeros(points.shape[-1])
            step[i] = h
            fd[:, i] = (self(points + step) - self(points - step)) / (2 * h)
        scale = np.maximum(np.abs(g), 1.0)
        return bool(np.all(np.abs(g - fd) <= rtol * scale))

    # a few standard test functions

    @staticmethod
    def constant(c=1.0):
        return TestFunction(
            lambda x: np.full(x.shape[:-1], float(c)),
            lambda x: np.zeros_like(x),
            f"{c:g}",
        )

    @staticmethod
    def coordinate(k):
        """phi(x) = x_k in E-coordinates (k is 1-based)."""
        i = int(k) - 1

        def grad(x):
            g = np.zeros_like(x)
            g[..., i] = 1.0
            return g

        return TestFunction(lambda x: x[..., i].copy(), grad, f"x_{k}")

    @staticmethod
    def hat(space, k):
        """phi = v_k-hat."""
        i = space.check_index(k)
        s = space.sqrt_lam[i]

        def grad(x):
            g = np.zeros_like(x)
            g[..., i] = 1.0 / s
            return g

        return TestFunction(lambda x: x[..., i] / s, grad, f"vhat_{k}")

    @staticmethod
    def gaussian_bump(width=1.0):
        """phi(x) = exp(-|x|^2 / (2 width^2))."""
        w2 = float(width) ** 2

        def value(x):
            return np.exp(-np.sum(x * x, axis=-1) / (2 * w2))

        return TestFunction(value, lambda x: -x / w2 * value(x)[..., None], f"bump({width:g})")

    @staticmethod
    def cosine(wave):
        """phi(x) = cos(<wave, x>)."""
        a = np.asarray(wave, dtype=float)
        return TestFunction(
            lambda x: np.cos(x @ a),
            lambda x: -np.sin(x @ a)[..., None] * a,
            f"cos(<{a.tolist()}, x>)",
        )


def _lift(other):
    if isinstance(other, TestFunction):
        return other
    return TestFunction.constant(float(other))
