"""Decay-condition checker: sup norms outside disks, band-regularized probes, verdicts."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .grid import Grid
from .observables import fit_power_law, op_norm_probe
from .potentials import AnisotropicProduct, PotentialSpec, Zero

log = logging.getLogger(__name__)

CONDITIONS = ("C18", "C20", "C21", "C23", "C28")
MARGIN = 0.1
RESIDUAL_THRESHOLD = 0.1
REFINE_RTOL = 1e-3
MAX_REFINEMENTS = 8


@dataclass
class DecayReport:
    """Sup norms outside each radius, their weighted sequence and the verdict.

    ``weighted`` is the sequence whose integrability decides the condition:
    ``rho * s(rho)`` for C18/C20, ``s(rho)`` for C21/C23 and the two-term
    combination for C28.
    """

    condition: str
    radii: np.ndarray
    sup_outside: np.ndarray
    weighted: np.ndarray
    exponent: float
    residual: float
    verdict: str
    margin: float = MARGIN
    converged: bool = True
    refinements: int = 0
    notes: list = field(default_factory=list)

    def rows(self) -> list[dict]:
        return [
            {"condition": self.condition, "rho": float(r), "sup_outside": float(s), "weighted": float(w)}
            for r, s, w in zip(self.radii, self.sup_outside, self.weighted)
        ]


def _check_radii(radii) -> np.ndarray:
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) < 8:
        raise ValueError("need at least 8 radii")
    if np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ValueError("radii must be positive and strictly increasing")
    if radii[-1] < 10.0 * radii[0] * (1 - 1e-12):
        raise ValueError("radii must span at least one decade")
    return radii


def verdict_for(radii, weighted, margin: float = MARGIN,
                residual_threshold: float = RESIDUAL_THRESHOLD,
                converged: bool = True) -> tuple[float, float, str]:
    """Fit ``weighted ~ rho**k``; pass iff ``k < -(1 + margin)``."""
    weighted = np.asarray(weighted, dtype=float)
    if np.all(weighted == 0):
        return -math.inf, 0.0, "pass"
    clean = weighted > 0
    if clean.sum() < 3:
        return math.nan, math.nan, "inconclusive"
    slope, _, res, _ = fit_power_law(radii, weighted)
    if not converged or res > residual_threshold:
        return slope, res, "inconclusive"
    return slope, res, "pass" if slope < -(1.0 + margin) else "fail"


def _suffix_max(values: np.ndarray) -> np.ndarray:
    return np.maximum.accumulate(values[::-1])[::-1]


def _radial_profile(f, r: np.ndarray, n_theta: int, chunk: int = 2_000_000):
    """``max_theta |f|`` on each circle of radius ``r`` and the maximizing angle."""
    theta = 2.0 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
    c, s = np.cos(theta), np.sin(theta)
    best = np.empty(len(r))
    arg = np.empty(len(r))
    rows = max(1, chunk // n_theta)
    for i in range(0, len(r), rows):
        rr = r[i:i + rows, None]
        vals = np.abs(f(rr * c, rr * s))
        j = vals.argmax(axis=1)
        best[i:i + rows] = vals[np.arange(len(j)), j]
        arg[i:i + rows] = theta[j]
    return best, arg


def _polish(f, r0: float, th0: float, r_lo: float, r_hi: float) -> float:
    """Local maximization of ``|f|`` in polar coordinates from a sampled peak."""

    def neg(z):
        return -float(np.abs(f(z[0] * np.cos(z[1]), z[0] * np.sin(z[1]))))

    res = optimize.minimize(neg, np.array([r0, th0]), method="L-BFGS-B",
                            bounds=[(r_lo, r_hi), (None, None)])
    return -float(res.fun)


def sup_outside(f, radii, r_outer: float, n_r: int = 256, n_theta: int = 256,
                rtol: float = REFINE_RTOL, max_refinements: int = MAX_REFINEMENTS,
                candidates: int = 3):
    """``sup_{rho <= |x| <= r_outer} |f|`` from dense polar sampling.

    The best sampled peaks outside each radius are polished by a local
    maximizer; radial and angular counts then double until no entry changes
    by more than ``rtol`` relative.  Returns ``(values, converged, refinements)``.
    """
    radii = np.asarray(radii, dtype=float)
    prev = None
    for k in range(max_refinements + 1):
        r = np.unique(np.concatenate([np.geomspace(radii[0], r_outer, n_r), radii]))
        prof, arg = _radial_profile(f, r, n_theta)
        cur = np.empty(len(radii))
        for i, rho in enumerate(radii):
            lo = np.searchsorted(r, rho)
            order = lo + np.argsort(prof[lo:])[::-1][:candidates]
            best = float(prof[lo:].max())
            for j in order:
                if prof[j] > 0:
                    best = max(best, _polish(f, r[j], arg[j], rho, r_outer))
            cur[i] = best
        cur = _suffix_max(cur)
        if prev is not None:
            scale = np.maximum(np.abs(cur), 1e-300)
            if np.all(np.abs(cur - prev) <= rtol * scale):
                return cur, True, k
        prev = cur
        n_r *= 2
        n_theta *= 2
    log.info("sup_outside: no convergence after %d refinements", max_refinements)
    return prev, False, max_refinements


def _sup_along_x1(f, radii, r_outer: float, n: int = 4096,
                  rtol: float = REFINE_RTOL, max_refinements: int = MAX_REFINEMENTS):
    """``sup_{rho <= |x1| <= r_outer} |f(x1)|``, refined like :func:`sup_outside`."""
    radii = np.asarray(radii, dtype=float)
    prev = None
    for k in range(max_refinements + 1):
        x = np.unique(np.concatenate([np.geomspace(radii[0], r_outer, n), radii]))
        prof = np.maximum(np.abs(f(x)), np.abs(f(-x)))
        cur = _suffix_max(prof)[np.searchsorted(x, radii)]
        if prev is not None and np.all(np.abs(cur - prev) <= rtol * np.maximum(np.abs(cur), 1e-300)):
            return cur, True, k
        prev = cur
        n *= 2
    return prev, False, max_refinements


def check_condition(V: PotentialSpec, cond: str, radii: Sequence[float],
                    r_outer: float | None = None, margin: float = MARGIN) -> DecayReport:
    """Evaluate C18, C21 or C28 on the given radii.

    C18: ``rho * sup_{|x|>rho} |V|``.  C21: ``sup_{|x|>rho} |d_phi V|``.
    C28 (product potentials ``V1(x1) V2(x2)``): ``rho^(1/2) sup |V1|`` plus
    ``(1+rho)^(-1/2) sup |V1'|`` over ``|x1| >= rho``.  Sups extend out to
    ``r_outer`` (default four times the largest radius).
    """
    if cond not in ("C18", "C21", "C28"):
        raise ValueError(f"check_condition handles C18, C21 and C28, not {cond!r}")
    radii = _check_radii(radii)
    r_outer = 4.0 * radii[-1] if r_outer is None else float(r_outer)
    if r_outer < radii[-1]:
        raise ValueError("outer sampling radius must not be below the largest radius")
    if cond == "C28":
        if not isinstance(V, AnisotropicProduct):
            raise ValueError("C28 needs a product potential V1(x1) V2(x2)")
        s1, ok1, k1 = _sup_along_x1(V.v1, radii, r_outer)
        s2, ok2, k2 = _sup_along_x1(V.v1_derivative, radii, r_outer)
        sup_v2 = float(np.abs(V.v2(np.linspace(-V.d, V.d, 2001))).max())
        weighted = (np.sqrt(radii) * s1 + s2 / np.sqrt(1.0 + radii)) * sup_v2
        sups, ok, k = s1 * sup_v2, ok1 and ok2, max(k1, k2)
    else:
        f = V.evaluate if cond == "C18" else V.azimuthal_derivative
        if isinstance(V, Zero) or (cond == "C21" and V.is_radial):
            sups, ok, k = np.zeros_like(radii), True, 0
        else:
            sups, ok, k = sup_outside(f, radii, r_outer)
        weighted = radii * sups if cond == "C18" else sups.copy()
    exponent, res, verdict = verdict_for(radii, weighted, margin, converged=ok)
    rep = DecayReport(cond, radii, sups, weighted, exponent, res, verdict, margin, ok, k)
    if not ok:
        rep.notes.append("sup sampling did not converge")
    return rep


def _multiplier(V: PotentialSpec, grid: Grid, cond: str) -> np.ndarray:
    x1, x2 = grid.meshgrid()
    if cond == "C20":
        return np.asarray(V.evaluate(x1, x2), dtype=float) * np.ones(grid.shape)
    return np.asarray(V.azimuthal_derivative(x1, x2), dtype=float) * np.ones(grid.shape)


def check_condition_regularized(V: PotentialSpec, cond: str, P: float, radii: Sequence[float],
                                grid: Grid, trials: int = 4, iters: int = 60, seed: int = 0,
                                rtol: float = 1e-4, margin: float = MARGIN,
                                min_radii: int = 8) -> DecayReport:
    """Band-regularized conditions C20 (``rho * ||V g(H0) F(|x|>rho)||``) and C23.

    Each norm is a power-iteration lower estimate on ``grid``; the outermost
    radius must stay inside ``0.4 L`` so the region is not dominated by the
    periodic wrap.  A non-converged probe marks the verdict inconclusive.
    """
    if cond not in ("C20", "C23"):
        raise ValueError(f"check_condition_regularized handles C20 and C23, not {cond!r}")
    radii = np.asarray(radii, dtype=float)
    if len(radii) < min_radii or np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ValueError(f"need at least {min_radii} positive, increasing radii")
    if radii[-1] > 0.4 * grid.L:
        raise ValueError(f"largest radius {radii[-1]:g} does not fit a box of side {grid.L:g} with margin")
    mult = _multiplier(V, grid, cond)
    r = grid.radius
    values, ok = [], True
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(len(radii))
    for rho, child in zip(radii, children):
        if not np.any(mult[r > rho]):
            values.append(0.0)
            continue
        mask = (r > rho).astype(float)

        def A(f, mult=mult):
            return f.with_values(f.values * mult)

        def R(f, mask=mask):
            return f.with_values(f.values * mask)

        est = op_norm_probe(A, grid, P, trials=trials, iters=iters,
                            seed=int(child.generate_state(1)[0]), right=R, rtol=rtol)
        values.append(est.value)
        ok &= est.converged
    sups = np.array(values)
    weighted = radii * sups if cond == "C20" else sups.copy()
    exponent, res, verdict = verdict_for(radii, weighted, margin, converged=ok)
    rep = DecayReport(cond, radii, sups, weighted, exponent, res, verdict, margin, ok, 0)
    if not ok:
        rep.notes.append("power iteration did not converge for every radius")
    return rep
