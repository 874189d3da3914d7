"""Verifiers tying simulations and quadrature oracles to the analytic identities.

Analytic checks return plain residuals; Monte Carlo checks return
:class:`SummaryReport` objects whose pass flag is |estimate - reference| <= tolerance.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import rng
from .domain import GraphRegion
from .engine import Ensemble, reconstruct_noise, component_series, rejection_sample
from .errors import ContractViolation
from .gaussian_space import TestFunction, h_inner, hat_functional
from .quadrature import (
    QuadratureRule,
    gamma_volume_integral,
    normal_component,
    rho_surface_integral,
    surface_nodes,
)

# 95% asymptotic Kolmogorov-Smirnov constant
KS_95 = 1.358
ANALYTIC_TOL = 1e-6
MC_SIGMAS = 3.0
MC_REL = 0.05


@dataclass
class SummaryReport:
    name: str
    estimate: float
    reference: float
    tolerance: float
    samples: int = 0
    config_hash: str = ""
    detail: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(abs(self.estimate - self.reference) <= self.tolerance)

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, default=_jsonable)


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialise {type(v)}")


def mc_tolerance(reference, stderr):
    return max(MC_SIGMAS * stderr, MC_REL * abs(reference))


# integration by parts


def ibp_terms(space, domain, phi, k, rule=None):
    """The three integrals of the integration-by-parts formula in direction v_k.

    Returns (lhs, volume, boundary) with
    lhs = int_O D_k phi dgamma, volume = int_O vhat_k phi dgamma and
    boundary = int_{dO} nu_G^k phi drho (phi restricted to the boundary).
    """
    rule = rule or QuadratureRule.for_domain(space, domain)
    space.check_index(k)
    lhs = gamma_volume_integral(space, domain, lambda x: phi.d_k(space, k, x), rule)
    volume = gamma_volume_integral(space, domain, lambda x: hat_functional(space, k, x) * phi(x), rule)
    boundary = rho_surface_integral(space, domain, lambda x: normal_component(space, domain, k, x) * phi(x), rule)
    return lhs, volume, boundary


def ibp_residual(space, domain, phi, k, rule=None):
    lhs, volume, boundary = ibp_terms(space, domain, phi, k, rule)
    return abs(lhs - volume - boundary)


def gauss_green_residual(space, domain, k, rule=None):
    """|int_O vhat_k dgamma + int_{dO} nu_G^k drho|, the phi = 1 case of ibp_residual."""
    return ibp_residual(space, domain, TestFunction.constant(1.0), k, rule)


# energy measure


def energy_form(space, domain, phi, psi, rule=None):
    """E_O(phi, psi) = int_O [D_H phi, D_H psi]_H dgamma."""
    return gamma_volume_integral(
        space, domain, lambda x: h_inner(space, phi.d_h(space, x), psi.d_h(space, x)), rule
    )


def energy_identity_terms(space, domain, phi, psi, rule=None):
    """(2 E(phi, phi psi) - E(phi^2, psi), 2 int_O psi |D_H phi|_H^2 dgamma)."""
    lhs = 2 * energy_form(space, domain, phi, phi * psi, rule) - energy_form(space, domain, phi * phi, psi, rule)
    rhs = 2 * gamma_volume_integral(
        space, domain, lambda x: psi(x) * h_inner(space, phi.d_h(space, x), phi.d_h(space, x)), rule
    )
    return lhs, rhs


def energy_identity_residual(space, domain, phi, psi, rule=None):
    lhs, rhs = energy_identity_terms(space, domain, phi, psi, rule)
    return abs(lhs - rhs)


def printed_energy_identity_gap(space, domain, phi, psi, rule=None):
    """Gap of the variant 2E(phi, phi psi) - E(phi^2, psi) = int_O [D_H phi, D_H psi]_H dgamma.

    This variant drops the psi weight and the factor 2 of the product-rule
    computation; it is kept to show numerically that it does not hold.
    """
    lhs, _ = energy_identity_terms(space, domain, phi, psi, rule)
    return abs(lhs - energy_form(space, domain, phi, psi, rule))


# stationarity


def _states(ensemble):
    if isinstance(ensemble, Ensemble):
        return ensemble.final_states
    return np.atleast_2d(np.asarray(ensemble, dtype=float))


def burn_in_time(config):
    """Elapsed time in dirichlet-clock units."""
    return config.horizon * config.drift_rate


def oracle_sample(space, domain, seed, n):
    """Rejection sample of gamma|_O from the ORACLE stream, with acceptance rate."""
    return rejection_sample(space, domain, rng.stream(seed, rng.ORACLE), n)


def ks_band(n, m=None):
    """95% Kolmogorov-Smirnov band for one sample (m None) or two samples."""
    if m is None:
        return KS_95 / np.sqrt(n)
    return KS_95 * np.sqrt((n + m) / (n * m))


def stationarity_test(ensemble, space, domain, oracle_size=None, seed=0, config_hash="", min_burn_in=5.0):
    """Two-sample KS test of each vhat_k-marginal against rejection-sampled gamma|_O."""
    x = _states(ensemble)
    if x.shape[0] == 0:
        raise ContractViolation("empty ensemble")
    if isinstance(ensemble, Ensemble) and burn_in_time(ensemble.config) < min_burn_in:
        raise ContractViolation(f"burn-in {burn_in_time(ensemble.config):g} below {min_burn_in:g}")
    m = oracle_size or x.shape[0]
    oracle, rate = oracle_sample(space, domain, seed, m)
    reports = []
    for k in range(1, space.dim + 1):
        d = stats.ks_2samp(hat_functional(space, k, x), hat_functional(space, k, oracle)).statistic
        reports.append(
            SummaryReport(
                f"stationarity[vhat_{k}]",
                float(d),
                0.0,
                float(ks_band(x.shape[0], m)),
                x.shape[0],
                config_hash,
                {"oracle_size": m, "acceptance_rate": rate},
            )
        )
    return reports


def halfspace_cdf_test(ensemble, space, domain, config_hash=""):
    """One-sample KS test of vhat_j against the truncated normal CDF Phi(t) / Phi(c) on t <= c."""
    if not isinstance(domain, GraphRegion) or getattr(domain.profile, "kind", "") != "constant":
        raise ContractViolation("closed-form CDF is available for half-spaces only")
    x = _states(ensemble)
    c = float(domain.profile.c)
    t = hat_functional(space, domain.axis, x)
    d = stats.kstest(t, lambda v: np.minimum(stats.norm.cdf(v) / stats.norm.cdf(c), 1.0)).statistic
    return SummaryReport(f"stationarity_cdf[vhat_{domain.axis}]", float(d), 0.0, float(ks_band(t.size)), t.size, config_hash)


# Revuz correspondence


def revuz_reference(space, domain, f=None, rule=None, clock="dirichlet"):
    """int_{dO} f drho / gamma(O), halved for the probabilist clock."""
    f = f or TestFunction.constant(1.0)
    one = TestFunction.constant(1.0)
    ref = rho_surface_integral(space, domain, f, rule) / gamma_volume_integral(space, domain, one, rule)
    return ref if clock == "dirichlet" else 0.5 * ref


def revuz_test(ensemble, space, domain, f=None, rule=None, config_hash=""):
    """(1/T) E[int_0^T f(X) dL] from a stationary ensemble against the rho / gamma(O) reference."""
    cfg = ensemble.config
    if ensemble.meta.get("start") != "stationary":
        raise ContractViolation("the Revuz estimator needs a stationary start")
    if ensemble.n_paths == 0 or cfg.horizon <= 0:
        raise ContractViolation("empty ensemble")
    if f is None:
        a = ensemble.local_time
        name = "1"
    else:
        if ensemble.meta.get("weight") is not f:
            raise ContractViolation("ensemble was not run with this test function")
        a = ensemble.weighted_local_time
        name = f.name
    a = a / cfg.horizon
    est = float(a.mean())
    se = float(a.std(ddof=1) / np.sqrt(a.size)) if a.size > 1 else float("inf")
    ref = revuz_reference(space, domain, f, rule, cfg.clock)
    return SummaryReport(
        f"revuz[f={name}]",
        est,
        ref,
        mc_tolerance(ref, se),
        a.size,
        config_hash,
        {"stderr": se, "ci95": [est - 1.96 * se, est + 1.96 * se], "scheme": cfg.scheme, "dt": cfg.dt},
    )


# quadratic variation


def realized_covariation(paths, space, domain, config, k, l=None):
    """Realized (co)variation slope of <vhat_k, W>, <vhat_l, W> pooled over paths."""
    i = space.check_index(k)
    j = space.check_index(l if l is not None else k)
    total = 0.0
    for p in paths:
        dw = np.diff(reconstruct_noise(p, space, domain, config), axis=0)
        total += float(np.sum(dw[:, i] * dw[:, j]) / (space.sqrt_lam[i] * space.sqrt_lam[j]))
    return total / (len(paths) * config.horizon)


def qv_test(paths, space, domain, config, k, l=None, config_hash=""):
    """QV slope of a reconstructed component against the clock constant (2 or 1); cross terms against 0."""
    if config.dt > 1e-2:
        raise ContractViolation("quadratic-variation test needs dt <= 1e-2")
    if not paths:
        raise ContractViolation("no paths")
    slope = realized_covariation(paths, space, domain, config, k, l)
    if l is None or l == k:
        ref = config.qv_rate
        return SummaryReport(f"qv[{k}]", slope, ref, 0.03 * ref, len(paths), config_hash, {"clock": config.clock})
    return SummaryReport(f"qv[{k},{l}]", slope, 0.0, 0.03, len(paths), config_hash, {"clock": config.clock})


# path-level bookkeeping


def local_time_support_test(ensemble, config_hash=""):
    """Local time accumulated on steps without a boundary hit; must be exactly 0."""
    if isinstance(ensemble, Ensemble):
        off = float(np.sum(ensemble.off_hit_local_time))
        n = ensemble.n_paths
    else:
        off = float(sum(np.sum(p.increments[~p.hit_flags]) for p in ensemble))
        n = len(ensemble)
    return SummaryReport("local_time_support", off, 0.0, 0.0, n, config_hash)


def telescoping_test(paths, space, domain, config, config_hash=""):
    """Largest per-step residual of the componentwise decomposition over all paths and components."""
    worst = 0.0
    for p in paths:
        for k in range(1, space.dim + 1):
            worst = max(worst, float(np.max(np.abs(component_series(p, space, domain, config, k).residual))))
    return SummaryReport("telescoping", worst, 0.0, 1e-12, len(paths), config_hash)


def ball_normal_test(paths, space, domain, config, config_hash=""):
    """Max deviation of the reflection components from -sqrt(lambda_k) X^k / |Q^{1/2} X| dL at hits."""
    worst = 0.0
    for p in paths:
        hits = np.nonzero(p.hit_flags)[0]
        if hits.size == 0:
            continue
        x = p.states[hits]
        dl = p.increments[hits]
        scale = np.sqrt(np.sum(space.lam * x * x, axis=-1))
        for k in range(1, space.dim + 1):
            i = k - 1
            series = component_series(p, space, domain, config, k)
            incr = np.diff(series.refl, prepend=0.0)[hits]
            formula = -space.sqrt_lam[i] * x[:, i] / scale * dl
            worst = max(worst, float(np.max(np.abs(incr - formula))))
    return SummaryReport("ball_normal", worst, 0.0, 1e-12, len(paths), config_hash)


def closure_test(ensemble, tol, config_hash=""):
    """Largest G over stored states; passes when it does not exceed newton_tol."""
    g = float(np.max(ensemble.max_G))
    return SummaryReport("closure", max(g, 0.0), 0.0, tol, ensemble.n_paths, config_hash)


# scheme consistency


def _mean_se(a):
    return float(a.mean()), float(a.std(ddof=1) / np.sqrt(a.size))


def scheme_consistency_test(ens_a, ens_b, config_hash=""):
    """E[L_T] from two schemes agree within the combined 95% intervals."""
    ma, sa = _mean_se(ens_a.local_time)
    mb, sb = _mean_se(ens_b.local_time)
    return SummaryReport(
        f"scheme[{ens_a.config.scheme}~{ens_b.config.scheme}]",
        ma - mb,
        0.0,
        1.96 * (sa + sb),
        ens_a.n_paths + ens_b.n_paths,
        config_hash,
        {"means": [ma, mb], "stderrs": [sa, sb]},
    )


def dt_consistency_test(ensembles, config_hash=""):
    """Order-1/2 check of E[L_T] under dt-halving.

    ``ensembles`` are runs at dt, dt/2, dt/4, ...  The constant C is fitted on
    the coarsest pair as (|difference| - MC error) / sqrt(dt_0); the finest
    pair must then differ by less than its MC error plus C sqrt(dt).
    """
    if len(ensembles) < 3:
        raise ContractViolation("need at least three step sizes")
    stats_ = [_mean_se(e.local_time) for e in ensembles]
    dts = [e.config.dt for e in ensembles]

    def diff(i):
        (m0, s0), (m1, s1) = stats_[i], stats_[i + 1]
        return abs(m0 - m1), MC_SIGMAS * np.hypot(s0, s1)

    d0, e0 = diff(0)
    c = max(d0 - e0, 0.0) / np.sqrt(dts[0])
    d1, e1 = diff(len(ensembles) - 2)
    dt = dts[-2]
    return SummaryReport(
        "dt_halving",
        d1,
        0.0,
        float(e1 + c * np.sqrt(dt)),
        sum(e.n_paths for e in ensembles),
        config_hash,
        {"dts": dts, "means": [m for m, _ in stats_], "fitted_C": c},
    )


def surface_points_normal_check(space, domain, rule=None, eps=1e-4):
    """Fraction of boundary quadrature nodes where stepping along -nu_G lowers G."""
    from .domain import unit_normal

    x, _ = surface_nodes(space, domain, rule)
    nu = unit_normal(domain, space, x)
    return float(np.mean(domain.G(space, x - eps * nu) < domain.G(space, x)))

