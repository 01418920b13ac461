"""Photonic sector: fixed-excitation Fock bases, promotion of 3x3
couplers to number-conserving bosonic bilinears, quantum propagation,
detection amplitudes, and biorthogonal mode populations.

Everything here lives in the totally symmetric n-excitation subspace of
three bosonic modes, dimension (n+1)(n+2)/2.  Promotion is a Lie-algebra
morphism, so the spectral structure of the 3x3 coupler lifts wholesale:
an order-2 degeneracy becomes order n+1, an order-3 one becomes 2n+1.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.sparse import csr_matrix

from .algebra import check_finite, generator_matrix
from .errors import IntegrationError, RenormalizationError
from .propagator import _FACTOR_ORDER
from .spectral import SpectralFrame

__all__ = [
    "FockBasis", "FockVector", "WeightPoint", "PromotedFrame", "FockPropagation",
    "basis", "promote", "number_operator", "propagate_fock", "amplitudes",
    "biorthogonal_populations", "weight_coordinates", "promote_frame",
    "nilpotency_index", "largest_jordan_block",
]

DENSE_THRESHOLD = 8   # promote() returns sparse matrices above this n


@dataclass(frozen=True)
class FockBasis:
    """Occupation triples (n1, n2, n3) with n1+n2+n3 = n, ordered
    lexicographically descending in (n1, n2)."""
    n: int
    states: tuple

    @property
    def dim(self) -> int:
        return len(self.states)

    def index(self, state) -> int:
        return self._lookup[tuple(state)]

    @property
    def _lookup(self) -> dict:
        d = self.__dict__.get("_lookup_cache")
        if d is None:
            d = {s: i for i, s in enumerate(self.states)}
            object.__setattr__(self, "_lookup_cache", d)
        return d


def basis(n: int) -> FockBasis:
    """Fixed-excitation basis of size (n+1)(n+2)/2."""
    if n < 0:
        raise ValueError("excitation number must be non-negative")
    states = [(n1, n2, n - n1 - n2)
              for n1 in range(n, -1, -1)
              for n2 in range(n - n1, -1, -1)]
    return FockBasis(n=n, states=tuple(states))


@dataclass
class FockVector:
    """Complex amplitudes over a fixed-excitation basis.

    The norm is not conserved under non-Hermitian propagation; use
    `amplitudes` for renormalized detection probabilities.
    """
    basis: FockBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.basis.dim,):
            raise ValueError(
                f"need {self.basis.dim} amplitudes, got {self.amplitudes.shape}")

    @classmethod
    def unit(cls, b: FockBasis, state) -> "FockVector":
        amp = np.zeros(b.dim, dtype=complex)
        amp[b.index(state)] = 1.0
        return cls(b, amp)

    @classmethod
    def superposition(cls, b: FockBasis, terms) -> "FockVector":
        """Normalized superposition from (state, coefficient) pairs;
        e.g. the NOON pair [( (2,0,0), 1), ((0,2,0), 1)]."""
        amp = np.zeros(b.dim, dtype=complex)
        for state, coeff in terms:
            amp[b.index(state)] += coeff
        norm = np.linalg.norm(amp)
        if norm == 0:
            raise ValueError("superposition is identically zero")
        return cls(b, amp / norm)


def promote(M1: np.ndarray, n: int, sparse: bool | None = None):
    """Lift a 3x3 coupler to the n-excitation subspace as
    sum_jk [M1]_jk a_j^dag a_k.

    Matrix elements between occupation triples differing by one transfer
    are sqrt((m_j + 1) m_k).  Returns a dense array for small n and a CSR
    matrix above DENSE_THRESHOLD (or as forced by `sparse`).
    """
    M1 = check_finite(M1)
    b = basis(n)
    if sparse is None:
        sparse = n > DENSE_THRESHOLD
    rows, cols, vals = [], [], []
    for col, state in enumerate(b.states):
        for j in range(3):
            for k in range(3):
                if M1[j, k] == 0:
                    continue
                if j == k:
                    if state[k]:
                        rows.append(col)
                        cols.append(col)
                        vals.append(M1[j, j] * state[j])
                    continue
                if state[k] == 0:
                    continue
                target = list(state)
                target[k] -= 1
                target[j] += 1
                rows.append(b.index(target))
                cols.append(col)
                vals.append(M1[j, k] * np.sqrt((state[j] + 1) * state[k]))
    out = csr_matrix((vals, (rows, cols)), shape=(b.dim, b.dim), dtype=complex)
    return out if sparse else out.toarray()


def number_operator(j: int, n: int) -> np.ndarray:
    """Diagonal occupation-number operator of mode j (0-based) on basis(n)."""
    b = basis(n)
    return np.diag([float(s[j]) for s in b.states]).astype(complex)


@dataclass
class FockPropagation:
    """State samples along z in a fixed-excitation subspace."""
    basis: FockBasis
    z_samples: np.ndarray
    psi: np.ndarray           # (K, dim)

    def state_at(self, i: int) -> FockVector:
        return FockVector(self.basis, self.psi[i].copy())


def propagate_fock(family, n: int, psi0: FockVector, z_end: float,
                   tol: float = 1e-10, n_samples: int = 201,
                   z_eval=None) -> FockPropagation:
    """Integrate d/dz psi = i Mhat1(z) psi in the n-excitation subspace.

    The nine elementary bilinears are promoted once; the coupler matrix
    is assembled from them at each step, so z-dependent families cost no
    more than constant ones.
    """
    if psi0.basis.n != n:
        raise ValueError("initial state lives in a different subspace")
    b = psi0.basis
    units = np.zeros((3, 3), dtype=complex)
    ops = np.empty((3, 3, b.dim, b.dim), dtype=complex)
    for j in range(3):
        for k in range(3):
            units[j, k] = 1.0
            ops[j, k] = promote(units, n, sparse=False)
            units[j, k] = 0.0

    if z_eval is None:
        z_eval = np.linspace(0.0, float(z_end), n_samples)
    z_eval = np.asarray(z_eval, dtype=float)

    def rhs(z, y):
        M1 = family.traceless(z)
        A = np.tensordot(M1, ops, axes=2)
        return 1j * (A @ y)

    sol = solve_ivp(rhs, (z_eval[0], z_eval[-1]), psi0.amplitudes.astype(complex),
                    method="DOP853", rtol=tol, atol=tol * 1e-2, t_eval=z_eval)
    if not sol.success:
        raise IntegrationError(
            f"Fock propagation failed near z={sol.t[-1]:.6g}: {sol.message}")
    return FockPropagation(basis=b, z_samples=z_eval, psi=sol.y.T.copy())


def amplitudes(psi: FockVector):
    """Detection probabilities P = |<n1,n2,n3|psi>|^2 and their
    renormalization; raises when the state is identically zero."""
    P = np.abs(psi.amplitudes) ** 2
    total = P.sum()
    if total == 0.0:
        raise RenormalizationError("all detection amplitudes vanish")
    return P, P / total


def biorthogonal_populations(right: FockVector, left: FockVector):
    """Mode populations n_j = <l| n_j |r> with a left *row* vector.

    `left` holds the bra components (no conjugation is applied), e.g. a
    row of a promoted frame inverse or a state evolved with the
    inverse-adjoint dynamics.  Returns the three complex populations and
    their renormalization n_j / sum_j |n_j|; the populations sum to
    n * <l|r>, so the total is conserved along a propagation.
    """
    if right.basis.n != left.basis.n:
        raise ValueError("left and right states live in different subspaces")
    occ = np.array(right.basis.states, dtype=float)   # (dim, 3)
    weights = left.amplitudes * right.amplitudes
    n_j = weights @ occ
    denom = np.sum(np.abs(n_j))
    if denom == 0.0:
        raise RenormalizationError("populations vanish identically")
    return n_j, n_j / denom


@dataclass(frozen=True)
class WeightPoint:
    """Cartan labels of an occupation triple, plus the Dynkin labels of
    its ordered form."""
    I0: Fraction
    Y: Fraction
    dynkin_p: int
    dynkin_q: int


def weight_coordinates(state, n: int) -> WeightPoint:
    """Exact (I0, Y) = ((n - 2 n2 - n3)/2, (n - 3 n3)/3) and
    (p, q) = (n1 - n2, n2 - n3)."""
    n1, n2, n3 = (int(v) for v in state)
    if n1 + n2 + n3 != n or min(n1, n2, n3) < 0:
        raise ValueError(f"{state} is not an occupation triple with total {n}")
    return WeightPoint(I0=Fraction(n - 2 * n2 - n3, 2),
                       Y=Fraction(n - 3 * n3, 3),
                       dynkin_p=n1 - n2, dynkin_q=n2 - n3)


@dataclass(frozen=True)
class PromotedFrame:
    """Eigenframe of a promoted coupler, built from a 3x3 frame.

    Columns of `T_hat` are right eigenstates, rows of `T_hat_inv` the
    biorthogonal left eigenstates; the eigenvalue of the state built on
    occupation (n1, n2, n3) is n1*lam1 + n2*lam2 + n3*lam3.
    """
    base: SpectralFrame
    basis: FockBasis
    T_hat: np.ndarray
    T_hat_inv: np.ndarray

    def right_state(self, state) -> FockVector:
        return FockVector(self.basis, self.T_hat[:, self.basis.index(state)].copy())

    def left_state(self, state) -> FockVector:
        return FockVector(self.basis, self.T_hat_inv[self.basis.index(state), :].copy())

    def eigenvalue(self, state) -> complex:
        n1, n2, n3 = state
        lam = self.base.lambdas
        return n1 * lam[0] + n2 * lam[1] + n3 * lam[2]


def promote_frame(frame: SpectralFrame, n: int) -> PromotedFrame:
    """Promote a similarity frame to the n-excitation subspace.

    The group element T is an ordered product of one-generator
    exponentials, so its promotion is the same product of exponentials of
    the promoted generators (promotion preserves commutators, hence
    conjugation).
    """
    b = basis(n)
    T_hat = np.eye(b.dim, dtype=complex)
    T_hat_inv = np.eye(b.dim, dtype=complex)
    for g in _FACTOR_ORDER:
        alpha = frame.alphas.get(g, 0.0)
        if alpha == 0.0:
            continue
        X_hat = promote(generator_matrix(g), n, sparse=False)
        T_hat = T_hat @ expm(1j * complex(alpha) * X_hat)
    for g in reversed(_FACTOR_ORDER):
        alpha = frame.alphas.get(g, 0.0)
        if alpha == 0.0:
            continue
        X_hat = promote(generator_matrix(g), n, sparse=False)
        T_hat_inv = T_hat_inv @ expm(-1j * complex(alpha) * X_hat)
    return PromotedFrame(base=frame, basis=b, T_hat=T_hat, T_hat_inv=T_hat_inv)


def nilpotency_index(A, tol: float = 1e-8, max_power: int | None = None) -> int | None:
    """Smallest k with A^k numerically zero (spectral norm below
    tol * ||A||^k), or None if A is not nilpotent within dim powers."""
    A = np.asarray(A.toarray() if hasattr(A, "toarray") else A, dtype=complex)
    dim = A.shape[0]
    if max_power is None:
        max_power = dim
    norm0 = np.linalg.norm(A, 2)
    if norm0 == 0.0:
        return 1
    B = np.eye(dim, dtype=complex)
    for k in range(1, max_power + 1):
        B = B @ A
        if np.linalg.norm(B, 2) <= tol * norm0 ** k:
            return k
    return None


def _rank(B: np.ndarray, floor: float, tol: float) -> int:
    sv = np.linalg.svd(B, compute_uv=False)
    if sv[0] <= floor:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def largest_jordan_block(A, tol: float = 1e-8, cluster_tol: float = 1e-6) -> int:
    """Size of the largest Jordan block over all eigenvalue clusters,
    detected through the rank sequence of shifted powers."""
    A = np.asarray(A.toarray() if hasattr(A, "toarray") else A, dtype=complex)
    dim = A.shape[0]
    scale = max(np.linalg.norm(A, 2), 1e-300)
    eigs = np.linalg.eigvals(A)
    clusters: list[list[complex]] = []
    for lam in sorted(eigs, key=lambda w: (w.real, w.imag)):
        for cl in clusters:
            if abs(lam - np.mean(cl)) < cluster_tol * scale:
                cl.append(lam)
                break
        else:
            clusters.append([lam])
    largest = 1
    for cl in clusters:
        lam = np.mean(cl)
        mult = len(cl)
        if mult == 1:
            continue
        shifted = A - lam * np.eye(dim)
        B = np.eye(dim, dtype=complex)
        prev_rank = dim
        for k in range(1, mult + 1):
            B = B @ shifted
            r = _rank(B, floor=tol * scale ** k, tol=tol)
            if r == prev_rank:
                break
            if prev_rank - r > 0:
                largest = max(largest, k)
            prev_rank = r
    return largest
