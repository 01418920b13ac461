"""Spectral analysis of traceless 3x3 coupling matrices.

Covers the trace invariants and discriminant that classify the spectrum,
a closed-form solver for the depressed cubic characteristic polynomial,
construction of biorthogonal eigenframes in the normal-ordered triangular
gauge, and continuous eigenvalue-branch tracking with degeneracy events.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .algebra import GeneratorLabel, check_finite, exp_generator
from .errors import FrameSingularError, NonTracelessError

__all__ = [
    "Invariants", "Regime", "SpectralFrame", "BranchEvent", "BranchPaths",
    "invariants", "trace_invariants", "discriminant", "discriminant_resultant",
    "cubic_roots", "classify", "classify_matrix", "local_frame",
    "project_biorthogonal", "track_branches",
]


@dataclass(frozen=True)
class Invariants:
    """Quadratic and cubic trace invariants of a traceless matrix."""
    beta2: complex
    beta3: complex


class Regime(Enum):
    DISTINCT = "Distinct"
    EP2 = "EP2"
    EP3 = "EP3"
    ZERO_MATRIX = "ZeroMatrix"


def invariants(M1: np.ndarray) -> Invariants:
    """Characteristic-polynomial coefficients beta2 = -Tr[M1^2]/2 and
    beta3 = -Tr[M1^3]/3 of a traceless matrix."""
    M1 = check_finite(M1)
    scale = max(1.0, np.linalg.norm(M1))
    if abs(np.trace(M1)) > 1e-12 * scale:
        raise NonTracelessError(
            f"invariants require a traceless matrix (trace {np.trace(M1):.3e})")
    M2 = M1 @ M1
    return Invariants(beta2=-np.trace(M2) / 2.0, beta3=-np.trace(M2 @ M1) / 3.0)


def trace_invariants(M: np.ndarray, order: int | None = None) -> np.ndarray:
    """Coefficients beta_0..beta_N of the characteristic polynomial of an
    NxN matrix via the trace recursion
    beta_k = -(1/k) sum_{j=1..k} beta_{k-j} Tr[M^j].

    Works for any N; the 3x3 `invariants` above is the specialization used
    throughout this package.
    """
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    if order is None:
        order = n
    traces = np.empty(order + 1, dtype=complex)
    P = np.eye(n, dtype=complex)
    for j in range(1, order + 1):
        P = P @ M
        traces[j] = np.trace(P)
    beta = np.zeros(order + 1, dtype=complex)
    beta[0] = 1.0
    for k in range(1, order + 1):
        beta[k] = -sum(beta[k - j] * traces[j] for j in range(1, k + 1)) / k
    return beta


def discriminant(inv: Invariants) -> complex:
    """Discriminant -4 beta2^3 - 27 beta3^2 of the depressed cubic."""
    return -4.0 * inv.beta2 ** 3 - 27.0 * inv.beta3 ** 2


def _sylvester(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Sylvester matrix of polynomials p (degree m) and q (degree n),
    coefficients in descending powers."""
    m, n = len(p) - 1, len(q) - 1
    S = np.zeros((m + n, m + n), dtype=complex)
    for i in range(n):
        S[i, i:i + m + 1] = p
    for i in range(m):
        S[n + i, i:i + n + 1] = q
    return S


def discriminant_resultant(coeffs) -> complex:
    """Discriminant of a degree-N polynomial from the resultant of the
    polynomial and its derivative,
    Delta = (-1)^(N(N-1)/2) Res(p, p') / a_N,
    with Res computed as the Sylvester-matrix determinant.

    `coeffs` are in descending powers; the leading one must be nonzero.
    """
    p = np.asarray(coeffs, dtype=complex)
    if p.ndim != 1 or len(p) < 2:
        raise ValueError("need a polynomial of degree >= 1")
    if p[0] == 0:
        raise ValueError("leading coefficient is zero")
    n = len(p) - 1
    dp = p[:-1] * np.arange(n, 0, -1)
    res = np.linalg.det(_sylvester(p, dp))
    sign = -1.0 if (n * (n - 1) // 2) % 2 else 1.0
    return sign * res / p[0]


def cubic_roots(inv: Invariants) -> tuple[complex, complex, complex]:
    """Roots of lambda^3 + beta2*lambda + beta3 = 0.

    Cardano's method with the numerically stable branch of the auxiliary
    cube root, one Newton polish per root, and the library-wide canonical
    ordering: descending real part, ties broken by descending imaginary
    part.
    """
    p, q = complex(inv.beta2), complex(inv.beta3)
    if p == 0 and q == 0:
        return (0j, 0j, 0j)

    omega = np.exp(2j * np.pi / 3)
    if p == 0:
        u = (-q) ** (1.0 / 3.0)
        roots = [u, u * omega, u * omega ** 2]
    else:
        s = np.sqrt(q * q / 4.0 + p ** 3 / 27.0)
        # pick the branch with larger magnitude to avoid cancellation
        w = -q / 2.0 + s if abs(-q / 2.0 + s) >= abs(-q / 2.0 - s) else -q / 2.0 - s
        u = w ** (1.0 / 3.0)
        roots = [u * omega ** k - p / (3.0 * u * omega ** k) for k in range(3)]

    # Newton polish, kept only when it actually reduces the residual
    # (near a double root f and f' both vanish and the step is noise)
    polished = []
    for r in roots:
        f = r ** 3 + p * r + q
        df = 3.0 * r ** 2 + p
        if df != 0:
            r_new = r - f / df
            if abs(r_new ** 3 + p * r_new + q) < abs(f):
                r = r_new
        polished.append(r)
    polished.sort(key=lambda t: (-t.real, -t.imag))
    return tuple(polished)


def classify(inv: Invariants, scale: float, eps: float = 1e-9) -> Regime:
    """Spectral regime from the invariants of a traceless matrix.

    `scale` should be the norm of the source matrix; thresholds scale as
    scale^2 for beta2, scale^3 for beta3, and scale^6 for the
    discriminant, matching the degrees of those quantities in the matrix
    entries.
    """
    if scale < 0:
        raise ValueError("scale must be non-negative")
    if scale < eps:
        return Regime.ZERO_MATRIX
    if abs(inv.beta2) < eps * scale ** 2 and abs(inv.beta3) < eps * scale ** 3:
        return Regime.EP3
    if abs(discriminant(inv)) < eps * scale ** 6:
        return Regime.EP2
    return Regime.DISTINCT


def classify_matrix(M1: np.ndarray, eps: float = 1e-9) -> Regime:
    """Convenience wrapper: classify a traceless matrix directly."""
    M1 = check_finite(M1)
    scale = np.linalg.norm(M1)
    if scale < eps:
        return Regime.ZERO_MATRIX
    return classify(invariants(M1), scale, eps)


# ---------------------------------------------------------------------------
# biorthogonal frames in the triangular gauge

_LADDER_ORDER = (GeneratorLabel.Ip, GeneratorLabel.Up, GeneratorLabel.Vp,
                 GeneratorLabel.Vm, GeneratorLabel.Um, GeneratorLabel.Im)


@dataclass(frozen=True)
class SpectralFrame:
    """Biorthogonal eigenframe of a traceless matrix at one position.

    Columns of `T` are right eigenvectors, rows of `T_inv` are the paired
    left eigenvectors, with l_j . r_k = delta_jk.  The frame is gauged so
    that T factors as (unit upper triangular) x (unit lower triangular);
    `alphas` holds the six ladder parameters of that factorization (the
    Cartan parameters are zero in this gauge).
    """
    z0: float
    lambdas: np.ndarray
    T: np.ndarray
    T_inv: np.ndarray
    alphas: dict

    @property
    def lambda_I0(self) -> complex:
        return self.lambdas[0] - self.lambdas[1]

    @property
    def lambda_Y(self) -> complex:
        return 1.5 * (self.lambdas[0] + self.lambdas[1])

    def right(self, j: int) -> np.ndarray:
        """Right eigenvector for lambdas[j]."""
        return self.T[:, j]

    def left(self, j: int) -> np.ndarray:
        """Left eigenvector (row) for lambdas[j]."""
        return self.T_inv[j, :]


def _adjugate3(A: np.ndarray) -> np.ndarray:
    """Adjugate of a 3x3 matrix; its columns span ker(A) when det A = 0."""
    c = np.empty((3, 3), dtype=complex)
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(A, i, axis=0), j, axis=1)
            c[i, j] = ((-1) ** (i + j)) * (minor[0, 0] * minor[1, 1]
                                           - minor[0, 1] * minor[1, 0])
    return c.T


def _eigvec(M1: np.ndarray, lam: complex) -> np.ndarray:
    adj = _adjugate3(M1 - lam * np.eye(3))
    norms = np.linalg.norm(adj, axis=0)
    k = int(np.argmax(norms))
    if norms[k] == 0.0:
        raise FrameSingularError(
            f"adjugate vanished for eigenvalue {lam:+.6e}; higher-order degeneracy")
    return adj[:, k] / norms[k]


def _factor_udl(V: np.ndarray, tol: float = 1e-8):
    """Factor V = R @ D @ L with R unit upper, D diagonal, L unit lower.

    Realized as an LDU factorization of the index-reversed matrix;
    raises FrameSingularError when a pivot (principal minor ratio)
    vanishes, i.e. the eigenbasis is incompatible with this gauge.
    """
    J = np.fliplr(np.eye(3))
    P = J @ V @ J
    U = P.astype(complex).copy()
    L1 = np.eye(3, dtype=complex)
    ref = np.linalg.norm(V)
    for k in range(3):
        if abs(U[k, k]) < tol * ref:
            raise FrameSingularError(f"vanishing principal minor (pivot {k})")
        for i in range(k + 1, 3):
            f = U[i, k] / U[k, k]
            L1[i, k] = f
            U[i, k:] -= f * U[k, k:]
    D1 = np.diag(U).copy()
    U1 = U / D1[:, None]
    R = J @ L1 @ J          # unit upper triangular
    D = J @ np.diag(D1) @ J
    L = J @ U1 @ J          # unit lower triangular
    return R, np.diag(D).copy(), L


def _ladder_alphas(R: np.ndarray, Lp: np.ndarray) -> dict:
    """Gauge parameters of T = R @ Lp from the triangular factors."""
    a_ip = -1j * R[0, 1]
    a_up = -1j * R[1, 2]
    a_vp = -1j * (R[0, 2] - R[0, 1] * R[1, 2])
    a_im = -1j * Lp[1, 0]
    a_um = -1j * Lp[2, 1]
    a_vm = -1j * (Lp[2, 0] - Lp[1, 0] * Lp[2, 1])
    return {GeneratorLabel.Ip: a_ip, GeneratorLabel.Up: a_up,
            GeneratorLabel.Vp: a_vp, GeneratorLabel.Vm: a_vm,
            GeneratorLabel.Um: a_um, GeneratorLabel.Im: a_im}


def _inverse_from_alphas(alphas: dict) -> np.ndarray:
    """Closed-form T^-1: reversed factor product with negated parameters."""
    out = np.eye(3, dtype=complex)
    for g in (GeneratorLabel.Im, GeneratorLabel.Um, GeneratorLabel.Vm,
              GeneratorLabel.Vp, GeneratorLabel.Up, GeneratorLabel.Ip):
        out = out @ exp_generator(g, -alphas[g])
    return out


def local_frame(M1: np.ndarray, z0: float = 0.0, eps: float = 1e-9,
                order=None) -> SpectralFrame:
    """Diagonalizing frame T, T^-1 with T in the triangular gauge.

    Parameters
    ----------
    M1 : (3, 3) complex array, traceless, with three distinct eigenvalues.
    z0 : position tag stored on the frame.
    eps : degeneracy tolerance forwarded to `classify`.
    order : optional explicit eigenvalue ordering (sequence of 3 complex
        values, or indices into the canonical ordering).  Branch tracking
        passes this to keep frames continuous along a path; when omitted,
        the canonical ordering is tried first and the remaining
        permutations in deterministic order, since the triangular gauge
        is singular for some orderings (e.g. a diagonal matrix only
        factors in its own diagonal order).

    Raises
    ------
    FrameSingularError : at exceptional points, or when no eigenvalue
        ordering admits the triangular factorization.
    """
    M1 = check_finite(M1)
    scale = np.linalg.norm(M1)
    inv = invariants(M1)
    regime = classify(inv, scale, eps)
    if regime is not Regime.DISTINCT:
        raise FrameSingularError(f"frame undefined in regime {regime.value}")

    canonical = np.array(cubic_roots(inv))
    if order is not None:
        order = np.asarray(order, dtype=complex)
        perms = [tuple(int(np.argmin(np.abs(canonical - w))) for w in order)]
        if len(set(perms[0])) != 3:
            raise ValueError("requested ordering does not match the spectrum")
    else:
        perms = list(itertools.permutations(range(3)))

    last_err = None
    for perm in perms:
        lams = canonical[list(perm)]
        try:
            V = np.column_stack([_eigvec(M1, lam) for lam in lams])
            R, D, L = _factor_udl(V)
        except FrameSingularError as err:
            last_err = err
            continue
        Lp = np.diag(D) @ L @ np.diag(1.0 / D)   # unit lower after rescaling
        T = R @ Lp
        alphas = _ladder_alphas(R, Lp)
        T_inv = _inverse_from_alphas(alphas)
        resid = np.linalg.norm(T_inv @ M1 @ T - np.diag(lams))
        if resid > 1e-6 * max(scale, 1e-300):
            last_err = FrameSingularError(
                f"ill-conditioned frame (residual {resid:.2e})")
            continue
        return SpectralFrame(z0=float(z0), lambdas=lams, T=T, T_inv=T_inv,
                             alphas=alphas)
    raise FrameSingularError(
        f"no eigenvalue ordering admits the triangular gauge: {last_err}")


def project_biorthogonal(frame: SpectralFrame, E: np.ndarray) -> np.ndarray:
    """Coefficients c_j = l_j . E of a field in the biorthogonal frame."""
    E = np.asarray(E, dtype=complex)
    return frame.T_inv @ E


# ---------------------------------------------------------------------------
# branch tracking

@dataclass(frozen=True)
class BranchEvent:
    """Degeneracy encountered along a parameter path."""
    z: float
    kind: str          # "EP2", "EP3", "diabolic", or "ambiguous"
    delta: complex
    detail: str = ""


@dataclass
class BranchPaths:
    """Continuously ordered eigenvalue branches over a refined grid."""
    z: np.ndarray           # (K,)
    lambdas: np.ndarray     # (K, 3)
    events: list = field(default_factory=list)

    def branch(self, j: int) -> np.ndarray:
        return self.lambdas[:, j]


_PERMS3 = list(itertools.permutations(range(3)))


def _match(prev: np.ndarray, new: np.ndarray):
    """Assign `new` roots to `prev` branches by minimal total distance.

    Returns (ordered roots, best cost, runner-up cost).
    """
    costs = [sum(abs(new[p[j]] - prev[j]) for j in range(3)) for p in _PERMS3]
    idx = np.argsort(costs)
    best = _PERMS3[idx[0]]
    return new[list(best)], costs[idx[0]], costs[idx[1]]


def _min_separation(lams: np.ndarray) -> float:
    return min(abs(lams[0] - lams[1]), abs(lams[0] - lams[2]),
               abs(lams[1] - lams[2]))


def track_branches(family, z_grid, eps: float = 1e-9,
                   max_depth: int = 40) -> BranchPaths:
    """Follow the three eigenvalue branches of `family` along `z_grid`.

    The grid is refined adaptively wherever the matched eigenvalue step
    exceeds half the branch separation, so branches stay unambiguous away
    from degeneracies.  Degeneracy events (sign changes or dips of the
    discriminant) are located by root polishing and classified; an
    assignment that remains ambiguous at the refinement floor is flagged
    rather than silently chosen.
    """
    z_grid = np.asarray(z_grid, dtype=float)
    if z_grid.ndim != 1 or len(z_grid) < 2 or np.any(np.diff(z_grid) <= 0):
        raise ValueError("z_grid must be strictly increasing with >= 2 points")
    span = z_grid[-1] - z_grid[0]
    min_dz = span * 1e-9

    def probe(z: float):
        M1 = family.traceless(z)
        inv = invariants(M1)
        return inv, np.array(cubic_roots(inv)), np.linalg.norm(M1)

    zs: list[float] = [float(z_grid[0])]
    inv0, lam0, sc0 = probe(z_grid[0])
    lams: list[np.ndarray] = [lam0]
    deltas: list[complex] = [discriminant(inv0)]
    scales: list[float] = [sc0]
    ambiguities: list[float] = []

    def advance(z_prev, lam_prev, z_next, depth):
        inv_n, roots_n, sc_n = probe(z_next)
        lam_n, best, second = _match(lam_prev, roots_n)
        sep = min(_min_separation(lam_prev), _min_separation(lam_n))
        step = max(abs(lam_n[j] - lam_prev[j]) for j in range(3))
        if step > 0.5 * sep and z_next - z_prev > min_dz and depth < max_depth:
            z_mid = 0.5 * (z_prev + z_next)
            lam_mid = advance(z_prev, lam_prev, z_mid, depth + 1)
            return advance(z_mid, lam_mid, z_next, depth + 1)
        if second - best < 1e-3 * max(best, sep, 1e-300):
            ambiguities.append(0.5 * (z_prev + z_next))
        zs.append(float(z_next))
        lams.append(lam_n)
        deltas.append(discriminant(inv_n))
        scales.append(sc_n)
        return lam_n

    lam_prev = lam0
    for z_next in z_grid[1:]:
        lam_prev = advance(zs[-1], lam_prev, float(z_next), 0)

    z_arr = np.array(zs)
    lam_arr = np.vstack(lams)
    d_arr = np.array(deltas)
    s_arr = np.array(scales)

    events = _degeneracy_events(family, z_arr, d_arr, s_arr, eps)
    # ambiguity already explained by a located degeneracy is not re-flagged
    window = max(10 * min_dz, span * 1e-6)
    for za in ambiguities:
        if not any(abs(ev.z - za) < window for ev in events):
            events.append(BranchEvent(z=za, kind="ambiguous", delta=np.nan,
                                      detail="branch assignment not unique"))
    events.sort(key=lambda ev: ev.z)
    return BranchPaths(z=z_arr, lambdas=lam_arr, events=events)


def _event_kind(M1: np.ndarray, eps: float) -> str:
    """EP3 / EP2 / diabolic decision at a located discriminant zero.

    A repeated eigenvalue with a rank-1 shifted matrix still has two
    independent eigenvectors (a diabolical crossing); rank 2 means a
    genuine Jordan block.
    """
    scale = np.linalg.norm(M1)
    inv = invariants(M1)
    if classify(inv, scale, max(eps, 1e-7)) is Regime.EP3:
        return "EP3"
    lams = np.array(cubic_roots(inv))
    pairs = [(0, 1), (0, 2), (1, 2)]
    i, j = min(pairs, key=lambda p: abs(lams[p[0]] - lams[p[1]]))
    lam_d = 0.5 * (lams[i] + lams[j])
    sv = np.linalg.svd(M1 - lam_d * np.eye(3), compute_uv=False)
    rank = int(np.sum(sv > 1e-6 * sv[0]))
    return "EP2" if rank >= 2 else "diabolic"


def _degeneracy_events(family, z, delta, scale, eps):
    tol6 = eps * np.maximum(scale, 1e-300) ** 6
    real_dominant = np.max(np.abs(delta.imag)) <= 1e-8 * max(np.max(np.abs(delta)), 1e-300)

    def delta_at(zz):
        return discriminant(invariants(family.traceless(zz)))

    def tol_at(zz):
        return eps * max(np.linalg.norm(family.traceless(zz)), 1e-300) ** 6

    located = []
    if real_dominant:
        sgn = np.sign(delta.real)
        for i in range(len(z) - 1):
            if sgn[i] != 0 and sgn[i + 1] != 0 and sgn[i] != sgn[i + 1]:
                z_star = brentq(lambda zz: delta_at(zz).real, z[i], z[i + 1],
                                xtol=1e-13 * max(1.0, abs(z[i + 1])))
                located.append(z_star)

    # tangential zeros: polish local minima of |Delta| that are already small
    mag = np.abs(delta)
    for i in range(1, len(z) - 1):
        if mag[i] <= mag[i - 1] and mag[i] <= mag[i + 1] and mag[i] < 1e-4 * max(scale[i], 1e-300) ** 6:
            res = minimize_scalar(lambda zz: abs(delta_at(zz)),
                                  bounds=(z[i - 1], z[i + 1]), method="bounded",
                                  options={"xatol": 1e-13 * max(1.0, abs(z[i + 1]))})
            z_star = float(res.x)
            if abs(delta_at(z_star)) < tol6[i]:
                located.append(z_star)

    # candidates connected by a |Delta| < tol well are one degeneracy: a
    # tangential zero produces a flat well whose interior sign wobble would
    # otherwise be reported many times over
    located.sort()
    groups: list[list[float]] = []
    for z_star in located:
        if groups and _same_well(delta_at, tol_at, groups[-1][-1], z_star):
            groups[-1].append(z_star)
        else:
            groups.append([z_star])

    events = []
    for group in groups:
        z_star = min(group, key=lambda zz: abs(delta_at(zz)))
        M1 = family.traceless(z_star)
        events.append(BranchEvent(z=float(z_star), kind=_event_kind(M1, eps),
                                  delta=delta_at(z_star)))
    return events


def _same_well(delta_at, tol_at, za: float, zb: float, n_probe: int = 9) -> bool:
    if zb - za <= 0:
        return True
    for t in np.linspace(za, zb, n_probe):
        if abs(delta_at(t)) > tol_at(t):
            return False
    return True
