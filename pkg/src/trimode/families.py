"""Concrete coupler families, loops around the third-order degeneracy,
and discriminant cartography over coupling-parameter grids."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .algebra import check_finite, traceless_part
from .spectral import (Regime, _event_kind, classify, classify_matrix,
                       discriminant, invariants)

__all__ = [
    "CouplerFamily", "LoopSpec", "MapResult", "pt_cyclic", "chiral_1",
    "chiral_2", "ep3_loop", "constant_family", "from_callable",
    "from_samples", "find_ep2", "discriminant_map", "MAP_TEMPLATES",
]

EP3_CENTER = 1.0 / math.sqrt(2.0)   # (kappa1/gamma, kappa2/gamma) = (1/sqrt2, 0)

Param = "float | Callable[[float], float]"


def _at(p, z: float) -> float:
    return p(z) if callable(p) else p


@dataclass(frozen=True)
class CouplerFamily:
    """A z-parameterized 3x3 complex coupling matrix.

    `params` holds named scalar parameters (numbers or z-profiles);
    `z_domain` is the natural evaluation interval, when one exists (loops
    use it as the closed path).
    """
    kind: str
    params: dict
    matrix_fn: Callable[[float], np.ndarray] = field(repr=False)
    z_domain: tuple | None = None

    def matrix(self, z: float) -> np.ndarray:
        """Full coupling matrix M(z)."""
        return check_finite(self.matrix_fn(float(z)))

    def traceless(self, z: float) -> np.ndarray:
        """Traceless part M(z) - (Tr M(z)/3) * identity."""
        return traceless_part(self.matrix_fn(float(z)))


def pt_cyclic(gamma, kappa1, kappa2) -> CouplerFamily:
    """Family interpolating between the PT-symmetric trimer (kappa2 = 0)
    and the cyclic trimer (kappa1 = kappa2):

        [[i*gamma, kappa1,  kappa2 ],
         [kappa1,  0,       kappa1 ],
         [kappa2,  kappa1, -i*gamma]]

    Parameters may be real numbers or callables of z.  The nearest-
    neighbour couplings are locked to a single kappa1 because only then
    does the family reach third-order degeneracies (at gamma^2 =
    2 kappa1^2 with kappa2 = 0).
    """
    def build(z: float) -> np.ndarray:
        g, k1, k2 = _at(gamma, z), _at(kappa1, z), _at(kappa2, z)
        return np.array([[1j * g, k1, k2],
                         [k1, 0.0, k1],
                         [k2, k1, -1j * g]], dtype=complex)

    return CouplerFamily(kind="pt-cyclic",
                         params={"gamma": gamma, "kappa1": kappa1, "kappa2": kappa2},
                         matrix_fn=build)


def chiral_1(gamma, kappa1, kappa2) -> CouplerFamily:
    """Chiral variant with an imaginary corner coupling i*kappa2; supports
    the same third-order degeneracy as `pt_cyclic` but a deformed locus of
    second-order ones."""
    def build(z: float) -> np.ndarray:
        g, k1, k2 = _at(gamma, z), _at(kappa1, z), _at(kappa2, z)
        return np.array([[1j * g, k1, 1j * k2],
                         [k1, 0.0, k1],
                         [1j * k2, k1, -1j * g]], dtype=complex)

    return CouplerFamily(kind="chiral-1",
                         params={"gamma": gamma, "kappa1": kappa1, "kappa2": kappa2},
                         matrix_fn=build)


def chiral_2(gamma, kappa) -> CouplerFamily:
    """Chiral cyclic variant with a single coupling strength:

        [[i*gamma,  kappa,  -kappa ],
         [kappa,    0,      i*kappa],
         [-kappa,   i*kappa, -i*gamma]]

    Its only third-order degeneracy is the trivial zero matrix.
    """
    def build(z: float) -> np.ndarray:
        g, k = _at(gamma, z), _at(kappa, z)
        return np.array([[1j * g, k, -k],
                         [k, 0.0, 1j * k],
                         [-k, 1j * k, -1j * g]], dtype=complex)

    return CouplerFamily(kind="chiral-2",
                         params={"gamma": gamma, "kappa": kappa},
                         matrix_fn=build)


@dataclass(frozen=True)
class LoopSpec:
    """Circular parameter loop of radius `r` traversed `turns` times,
    centered on the third-order degeneracy at (1/sqrt2, 0)."""
    r: float
    turns: int = 1

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("loop radius must be positive")
        if self.turns < 1:
            raise ValueError("need at least one turn")


def ep3_loop(spec: LoopSpec, gamma: float = 1.0) -> CouplerFamily:
    """`pt_cyclic` family traversing the loop

        kappa1/gamma = 1/sqrt2 + r cos(2 pi gamma z)
        kappa2/gamma = r sin(2 pi gamma z)

    with gamma held constant, so z in [0, turns/gamma] covers `turns`
    full revolutions around the third-order degeneracy.
    """
    g = float(gamma)
    if g <= 0:
        raise ValueError("gamma must be positive")

    def k1(z: float) -> float:
        return g * (EP3_CENTER + spec.r * math.cos(2.0 * math.pi * g * z))

    def k2(z: float) -> float:
        return g * spec.r * math.sin(2.0 * math.pi * g * z)

    fam = pt_cyclic(g, k1, k2)
    return CouplerFamily(kind=fam.kind,
                         params={"gamma": g, "loop_r": spec.r, "loop_turns": spec.turns},
                         matrix_fn=fam.matrix_fn,
                         z_domain=(0.0, spec.turns / g))


def constant_family(M: np.ndarray) -> CouplerFamily:
    """Family with a z-independent coupling matrix."""
    M = check_finite(M).copy()
    return CouplerFamily(kind="custom", params={}, matrix_fn=lambda z: M)


def from_callable(fn: Callable[[float], np.ndarray],
                  z_domain: tuple | None = None) -> CouplerFamily:
    """Wrap an arbitrary z -> 3x3 matrix function."""
    return CouplerFamily(kind="custom", params={}, matrix_fn=fn, z_domain=z_domain)


def from_samples(z_grid, matrices) -> CouplerFamily:
    """Piecewise-cubic interpolation of externally supplied matrix samples
    (dense evaluation for the ODE integrators)."""
    z_grid = np.asarray(z_grid, dtype=float)
    matrices = np.asarray(matrices, dtype=complex)
    if matrices.shape != (len(z_grid), 3, 3):
        raise ValueError("matrices must have shape (len(z_grid), 3, 3)")
    spline = CubicSpline(z_grid, matrices, axis=0)
    return CouplerFamily(kind="custom", params={},
                         matrix_fn=lambda z: spline(z),
                         z_domain=(float(z_grid[0]), float(z_grid[-1])))


def find_ep2(kappa1_over_gamma: float, bracket, n_scan: int = 400,
             eps: float = 1e-9) -> list[float]:
    """Roots kappa2/gamma of the discriminant at fixed kappa1/gamma for
    the `pt_cyclic` family (gamma = 1).

    Scans the bracket for sign changes of the (real) discriminant and
    polishes each with a bracketed root solve.  Returns only genuine
    second-order degeneracies: points where the invariants also vanish
    (third-order boundary) are excluded.  No sign change, no roots.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not hi > lo:
        raise ValueError("bracket must satisfy lo < hi")
    k1 = float(kappa1_over_gamma)

    def delta_of(k2: float) -> float:
        d = discriminant(invariants(pt_cyclic(1.0, k1, k2).traceless(0.0)))
        return d.real

    grid = np.linspace(lo, hi, n_scan + 1)
    vals = np.array([delta_of(k) for k in grid])
    roots = []
    for i in range(n_scan):
        if vals[i] == 0.0:
            candidate = grid[i]
        elif vals[i] * vals[i + 1] < 0.0:
            candidate = brentq(delta_of, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-15)
        else:
            continue
        M1 = pt_cyclic(1.0, k1, candidate).traceless(0.0)
        if classify_matrix(M1, eps=max(eps, 1e-7)) is Regime.EP3:
            continue
        if not roots or abs(candidate - roots[-1]) > 1e-10 * max(1.0, hi - lo):
            roots.append(float(candidate))
    return roots


# templates for parameter-plane maps: name -> (axis labels, (x, y) -> family)
MAP_TEMPLATES = {
    "pt-cyclic": (("kappa1/gamma", "kappa2/gamma"),
                  lambda x, y: pt_cyclic(1.0, x, y)),
    "chiral-1": (("kappa1/gamma", "kappa2/gamma"),
                 lambda x, y: chiral_1(1.0, x, y)),
    "chiral-2": (("gamma", "kappa"),
                 lambda x, y: chiral_2(x, y)),
}


@dataclass
class MapResult:
    """Discriminant and regime over a parameter grid, plus the refined
    degeneracy loci found between grid points."""
    template: str
    axis_names: tuple
    x: np.ndarray
    y: np.ndarray
    delta: np.ndarray        # (len(x), len(y)) complex
    regime: np.ndarray       # (len(x), len(y)) of Regime
    loci: list               # of (x, y, kind)

    def records(self):
        for i, xv in enumerate(self.x):
            for j, yv in enumerate(self.y):
                yield (float(xv), float(yv), self.delta[i, j], self.regime[i, j])


def discriminant_map(template, x_values, y_values, eps: float = 1e-9,
                     refine: bool = True) -> MapResult:
    """Evaluate discriminant and regime on a parameter grid.

    `template` is a name from MAP_TEMPLATES or a callable (x, y) ->
    CouplerFamily.  Degeneracy loci (sign changes of the real
    discriminant along grid lines) are polished by bracketed root solves
    and labelled EP2 / EP3 / diabolic.
    """
    if callable(template):
        name, axes, make = "custom", ("x", "y"), template
    else:
        name = str(template)
        if name not in MAP_TEMPLATES:
            raise ValueError(f"unknown map template {name!r}; "
                             f"choose from {sorted(MAP_TEMPLATES)}")
        axes, make = MAP_TEMPLATES[name]

    x = np.asarray(x_values, dtype=float)
    y = np.asarray(y_values, dtype=float)
    delta = np.empty((len(x), len(y)), dtype=complex)
    regime = np.empty((len(x), len(y)), dtype=object)
    scale6 = np.empty((len(x), len(y)))
    for i, xv in enumerate(x):
        for j, yv in enumerate(y):
            M1 = make(xv, yv).traceless(0.0)
            s = np.linalg.norm(M1)
            if s < eps:
                delta[i, j] = 0.0
                regime[i, j] = Regime.ZERO_MATRIX
                scale6[i, j] = 0.0
                continue
            inv = invariants(M1)
            delta[i, j] = discriminant(inv)
            regime[i, j] = classify(inv, s, eps)
            scale6[i, j] = s ** 6

    loci: list[tuple] = []
    if refine:
        def polish(fixed, lo, hi, along_y: bool):
            def f(t: float) -> float:
                fam = make(fixed, t) if along_y else make(t, fixed)
                return discriminant(invariants(fam.traceless(0.0))).real
            t_star = brentq(f, lo, hi, xtol=1e-13, rtol=1e-14)
            fam = make(fixed, t_star) if along_y else make(t_star, fixed)
            M1 = fam.traceless(0.0)
            kind = _event_kind(M1, eps)
            pt = (fixed, t_star) if along_y else (t_star, fixed)
            loci.append((float(pt[0]), float(pt[1]), kind))

        re_d = delta.real
        for i in range(len(x)):
            for j in range(len(y) - 1):
                if re_d[i, j] * re_d[i, j + 1] < 0.0:
                    polish(x[i], y[j], y[j + 1], along_y=True)
        for j in range(len(y)):
            for i in range(len(x) - 1):
                if re_d[i, j] * re_d[i + 1, j] < 0.0:
                    polish(y[j], x[i], x[i + 1], along_y=False)

    return MapResult(template=name, axis_names=tuple(axes), x=x, y=y,
                     delta=delta, regime=regime, loci=loci)
