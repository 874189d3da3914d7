"""Deterministic quadrature for gamma-volume and Hausdorff-Gauss surface integrals.

Surface integrals live in whitened coordinates y = Q^{-1/2} x where the
Cameron-Martin metric is Euclidean; the surface measure rho there has density
(2 pi)^{-d/2} exp(-|y|^2 / 2) with respect to the (d-1)-dimensional area.

Three rule families are used:

* ``polar`` for balls: x = s u with u on the unit sphere of E.  Radial
  integrals use Gauss-Legendre on [0, r]; the sphere uses two points
  (d = 1), the trapezoid rule in the angle (d = 2) or Gauss-Legendre in
  cos(theta) times the trapezoid rule in the azimuth (d = 3).
* ``graph`` for graph regions: probabilists' Gauss-Hermite over the
  whitened complementary coordinates, with the 1-d section along v_j done
  by Gauss-Legendre on a truncated window.
* ``tensor``: plain probabilists' Gauss-Hermite over all of R^d, used for
  whole-space expectations.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from .domain import Ball, GraphRegion, grad_H_norm
from .errors import ContractViolation

MAX_SPHERE_DIM = 3
MAX_TENSOR_DIM = 6
# the 1-d section along v_j is integrated over [-WINDOW, WINDOW] in whitened units
WINDOW = 12.0

_KINDS = ("tensor", "polar", "graph")


@dataclass(frozen=True)
class QuadratureRule:
    kind: str
    nodes_per_axis: int = 24
    dim: int = 1
    line_nodes: int = 96

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ContractViolation(f"unknown quadrature kind {self.kind!r}")
        if self.nodes_per_axis < 8 or self.line_nodes < 8:
            raise ContractViolation("quadrature rules need at least 8 nodes per axis")
        if self.kind == "polar" and self.dim > MAX_SPHERE_DIM:
            raise ContractViolation(f"sphere rules support d <= {MAX_SPHERE_DIM}, got {self.dim}")
        if self.kind in ("tensor", "graph") and self.dim > MAX_TENSOR_DIM:
            raise ContractViolation(f"tensor rules support d <= {MAX_TENSOR_DIM}, got {self.dim}")

    @classmethod
    def for_domain(cls, space, domain, nodes_per_axis=24, line_nodes=96):
        kind = "polar" if isinstance(domain, Ball) else "graph"
        return cls(kind, nodes_per_axis, space.dim, line_nodes)

    def refined(self, factor=2):
        return QuadratureRule(self.kind, self.nodes_per_axis * factor, self.dim, self.line_nodes * factor)


@lru_cache(maxsize=None)
def hermite_rule(n):
    """Probabilists' Gauss-Hermite nodes and weights normalised to sum 1."""
    t, w = np.polynomial.hermite_e.hermegauss(n)
    return t, w / w.sum()


@lru_cache(maxsize=None)
def legendre_rule(n):
    return np.polynomial.legendre.leggauss(n)


def tensor_hermite(n, m):
    """Tensor Gauss-Hermite rule for N(0, I_m): nodes (n^m, m), weights (n^m,)."""
    t, w = hermite_rule(n)
    if m == 0:
        return np.zeros((1, 0)), np.ones(1)
    nodes = np.array(list(product(t, repeat=m)))
    weights = np.prod(np.array(list(product(w, repeat=m))), axis=1)
    return nodes, weights


def sphere_rule(d, n):
    """Nodes u on the unit sphere S^{d-1} and weights summing to its area.

    The azimuth always gets 2n trapezoid points, the polar angle (d = 3) n
    Gauss-Legendre points in cos(theta).
    """
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.ones(2)
    if d == 2:
        m = 2 * n
        a = 2 * np.pi * np.arange(m) / m
        return np.column_stack([np.cos(a), np.sin(a)]), np.full(m, 2 * np.pi / m)
    if d == 3:
        z, wz = legendre_rule(n)
        m = 2 * n
        a = 2 * np.pi * np.arange(m) / m
        zz, aa = np.meshgrid(z, a, indexing="ij")
        s = np.sqrt(1 - zz**2)
        u = np.column_stack([(s * np.cos(aa)).ravel(), (s * np.sin(aa)).ravel(), zz.ravel()])
        w = np.outer(wz, np.full(m, 2 * np.pi / m)).ravel()
        return u, w
    raise ContractViolation(f"sphere rules support d <= {MAX_SPHERE_DIM}, got {d}")


def gamma_density(space, x):
    """Density of gamma with respect to Lebesgue measure in E-coordinates."""
    lam = space.lam
    return np.exp(-0.5 * np.sum(x * x / lam, axis=-1)) / np.sqrt(np.prod(2 * np.pi * lam))


def theta_density(space, x):
    """Density of rho with respect to the H-surface measure: (2 pi)^{-d/2} exp(-|Q^{-1/2} x|^2 / 2)."""
    y = space.whiten(x)
    return np.exp(-0.5 * np.sum(y * y, axis=-1)) / (2 * np.pi) ** (space.dim / 2)


def _check(space, rule, kind=None):
    if rule.dim != space.dim:
        raise ContractViolation(f"rule dimension {rule.dim} differs from space dimension {space.dim}")
    if kind is not None and rule.kind != kind:
        raise ContractViolation(f"{kind} rule required, got {rule.kind}")


def _rule_for(space, domain, rule):
    if rule is None:
        rule = QuadratureRule.for_domain(space, domain)
    _check(space, rule)
    expected = "polar" if isinstance(domain, Ball) else "graph"
    if rule.kind != expected:
        raise ContractViolation(f"{domain.kind} domains need a {expected} rule, got {rule.kind}")
    return rule


# volume side


def ball_volume_nodes(space, r, rule):
    """Nodes and weights for integrals of f dgamma over the ball of radius r."""
    u, wu = sphere_rule(space.dim, rule.nodes_per_axis)
    s, ws = legendre_rule(rule.line_nodes)
    s = 0.5 * r * (s + 1)
    ws = 0.5 * r * ws
    x = s[:, None, None] * u[None, :, :]
    jac = ws[:, None] * s[:, None] ** (space.dim - 1) * wu[None, :]
    x = x.reshape(-1, space.dim)
    return x, jac.ravel() * gamma_density(space, x)


def graph_volume_nodes(space, domain, rule):
    """Nodes and weights for integrals of f dgamma below a graph."""
    d, j = space.dim, domain.j
    t, wt = tensor_hermite(rule.nodes_per_axis, d - 1)
    rest = t * np.delete(space.sqrt_lam, j)
    top = np.clip(np.broadcast_to(domain.profile(rest), (t.shape[0],)), -WINDOW, WINDOW)
    z, wz = legendre_rule(rule.line_nodes)
    half = 0.5 * (top + WINDOW)
    # whitened v_j-coordinate of each node, shape (outer, line)
    yj = -WINDOW + half[:, None] * (z[None, :] + 1)
    w = wt[:, None] * half[:, None] * wz[None, :] * np.exp(-0.5 * yj**2) / np.sqrt(2 * np.pi)
    x = np.empty((t.shape[0], rule.line_nodes, d))
    x[..., j] = yj * space.sqrt_lam[j]
    x[..., np.arange(d) != j] = rest[:, None, :]
    return x.reshape(-1, d), w.ravel()


def volume_nodes(space, domain, rule=None):
    rule = _rule_for(space, domain, rule)
    if isinstance(domain, Ball):
        return ball_volume_nodes(space, domain.r, rule)
    if isinstance(domain, GraphRegion):
        domain.validate(space)
        return graph_volume_nodes(space, domain, rule)
    raise ContractViolation(f"no volume rule for domain {domain!r}")


def gamma_volume_integral(space, domain, f, rule=None):
    """Integral of f over O with respect to gamma."""
    x, w = volume_nodes(space, domain, rule)
    return float(np.dot(w, f(x)))


def gamma_integral(space, f, rule=None):
    """Integral of f over all of E with respect to gamma (tensor Gauss-Hermite)."""
    rule = rule or QuadratureRule("tensor", dim=space.dim)
    _check(space, rule, "tensor")
    t, w = tensor_hermite(rule.nodes_per_axis, space.dim)
    return float(np.dot(w, f(t * space.sqrt_lam)))


# surface side


def ball_surface_nodes(space, r, rule):
    """Nodes on {|x| = r} with weights for integrals against rho.

    The map y = Q^{-1/2} x sends the E-sphere to an ellipsoid; its area element
    is det(Q^{-1/2}) |Q^{1/2} u| r^{d-1} dsigma(u).
    """
    u, wu = sphere_rule(space.dim, rule.nodes_per_axis)
    x = r * u
    area = np.sqrt(np.sum(space.lam * u * u, axis=-1)) / np.prod(space.sqrt_lam) * r ** (space.dim - 1)
    return x, wu * area * theta_density(space, x)


def graph_surface_nodes(space, domain, rule, axes=None):
    """Nodes on the graph with weights for integrals against rho.

    With ``axes`` given (a count m of complementary axes, in increasing
    order), only the gradient components along those axes enter the area
    factor.  This is the finite-dimensional measure rho^F for F spanned by
    v_j and those m basis vectors, which increases to rho as m grows.
    """
    d, j = space.dim, domain.j
    t, wt = tensor_hermite(rule.nodes_per_axis, d - 1)
    sl = np.delete(space.sqrt_lam, j)
    rest = t * sl
    top = np.broadcast_to(domain.profile(rest), (t.shape[0],))
    tilde_grad = np.asarray(domain.profile.grad(rest)) * sl
    if axes is not None:
        if not 0 <= axes <= d - 1:
            raise ContractViolation(f"axes must lie in 0..{d - 1}")
        tilde_grad = tilde_grad[:, :axes]
    area = np.sqrt(1.0 + np.sum(tilde_grad**2, axis=-1))
    x = np.empty((t.shape[0], d))
    x[:, j] = top * space.sqrt_lam[j]
    x[:, np.arange(d) != j] = rest
    return x, wt * area * np.exp(-0.5 * top**2) / np.sqrt(2 * np.pi)


def surface_nodes(space, domain, rule=None):
    rule = _rule_for(space, domain, rule)
    if isinstance(domain, Ball):
        return ball_surface_nodes(space, domain.r, rule)
    if isinstance(domain, GraphRegion):
        domain.validate(space)
        return graph_surface_nodes(space, domain, rule)
    raise ContractViolation(f"no surface rule for domain {domain!r}")


def rho_surface_integral(space, domain, f, rule=None):
    """Integral of f over the boundary of O with respect to rho."""
    x, w = surface_nodes(space, domain, rule)
    return float(np.dot(w, f(x)))


def rho_partial_surface_integral(space, domain, f, axes, rule=None):
    """rho^F-integral for F = span(v_j, first ``axes`` complementary basis vectors)."""
    if not isinstance(domain, GraphRegion):
        raise ContractViolation("partial surface measures are implemented for graph regions only")
    rule = _rule_for(space, domain, rule)
    x, w = graph_surface_nodes(space, domain, rule, axes=axes)
    return float(np.dot(w, f(x)))


def standard_sphere_rho(d, radius):
    """rho-mass of the centred sphere of the given radius in whitened coordinates."""
    from math import gamma as gamma_fn

    area = 2 * np.pi ** (d / 2) / gamma_fn(d / 2) * radius ** (d - 1)
    return area * np.exp(-0.5 * radius**2) / (2 * np.pi) ** (d / 2)


def normal_component(space, domain, k, x):
    """nu_G^k(x) = [nu_G(x), v_k]_H = sqrt(lambda_k) d_k G / |D_H G|_H."""
    i = space.check_index(k)
    return space.sqrt_lam[i] * domain.grad(space, x)[..., i] / grad_H_norm(domain, space, x)
