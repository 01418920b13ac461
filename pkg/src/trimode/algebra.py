"""Complex 3x3 matrix algebra over the isospin-hypercharge basis of sl(3,C).

The basis consists of two Cartan generators (I0, Y) and six ladder
generators (I+, I-, U+, U-, V+, V-).  The Cartan pair encodes relative
phase and differential gain between the modes, the ladder generators
encode pairwise coupling: I links modes 1<->2, U links 2<->3, V links
1<->3.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.integrate import quad

from .errors import IntegrationError, NonTracelessError

__all__ = [
    "GeneratorLabel", "GellMannCoefficients", "generator_matrix",
    "traceless_part", "gauge_phase", "decompose", "reconstruct",
    "exp_generator", "elementary", "check_finite",
]


class GeneratorLabel(enum.Enum):
    I0 = "I0"
    Y = "Y"
    Ip = "I+"
    Im = "I-"
    Up = "U+"
    Um = "U-"
    Vp = "V+"
    Vm = "V-"

    @property
    def is_cartan(self) -> bool:
        return self in (GeneratorLabel.I0, GeneratorLabel.Y)

    @property
    def weight(self) -> Fraction:
        """Trace-pairing weight: 2 for I0, 3/2 for Y, 1 for ladders."""
        if self is GeneratorLabel.I0:
            return Fraction(2)
        if self is GeneratorLabel.Y:
            return Fraction(3, 2)
        return Fraction(1)


def elementary(j: int, k: int) -> np.ndarray:
    """Matrix unit O_{j,k} (1-based indices) with a single 1 at (j,k)."""
    m = np.zeros((3, 3), dtype=complex)
    m[j - 1, k - 1] = 1.0
    return m


_GENERATORS = {
    GeneratorLabel.I0: np.diag([0.5, -0.5, 0.0]).astype(complex),
    GeneratorLabel.Y: np.diag([1.0, 1.0, -2.0]).astype(complex) / 3.0,
    GeneratorLabel.Ip: elementary(1, 2),
    GeneratorLabel.Im: elementary(2, 1),
    GeneratorLabel.Up: elementary(2, 3),
    GeneratorLabel.Um: elementary(3, 2),
    GeneratorLabel.Vp: elementary(1, 3),
    GeneratorLabel.Vm: elementary(3, 1),
}


def generator_matrix(g: GeneratorLabel) -> np.ndarray:
    """Return a copy of the 3x3 matrix representing generator `g`."""
    return _GENERATORS[g].copy()


@dataclass(frozen=True)
class GellMannCoefficients:
    """Coordinates of a traceless matrix in the isospin-hypercharge basis."""
    mu_I0: complex = 0.0
    mu_Y: complex = 0.0
    mu_Ip: complex = 0.0
    mu_Im: complex = 0.0
    mu_Up: complex = 0.0
    mu_Um: complex = 0.0
    mu_Vp: complex = 0.0
    mu_Vm: complex = 0.0

    def as_dict(self) -> dict[GeneratorLabel, complex]:
        return {
            GeneratorLabel.I0: self.mu_I0, GeneratorLabel.Y: self.mu_Y,
            GeneratorLabel.Ip: self.mu_Ip, GeneratorLabel.Im: self.mu_Im,
            GeneratorLabel.Up: self.mu_Up, GeneratorLabel.Um: self.mu_Um,
            GeneratorLabel.Vp: self.mu_Vp, GeneratorLabel.Vm: self.mu_Vm,
        }


def check_finite(M: np.ndarray) -> np.ndarray:
    """Coerce to a 3x3 complex array and reject NaN/Inf entries."""
    M = np.asarray(M, dtype=complex)
    if M.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M.view(float))):
        raise ValueError("matrix contains non-finite entries")
    return M


def traceless_part(M: np.ndarray) -> np.ndarray:
    """Remove the trace: M - (Tr M / 3) * identity.

    The removed multiple of the identity carries the global phase and the
    uniform gain or loss of the coupler; what remains generates the
    nontrivial dynamics.
    """
    M = check_finite(M)
    return M - (np.trace(M) / 3.0) * np.eye(3)


def _require_traceless(M: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    M = check_finite(M)
    scale = max(1.0, np.linalg.norm(M))
    if abs(np.trace(M)) > tol * scale:
        raise NonTracelessError(
            f"matrix has trace {np.trace(M):.3e}; apply traceless_part first")
    return M


def gauge_phase(family, z: float, tol: float = 1e-10) -> complex:
    """Accumulated scalar gauge (1/3) * integral_0^z Tr M(zeta) d zeta.

    Multiplying mode amplitudes by exp(i * gauge_phase) restores the
    global phase and uniform gain/loss that `traceless_part` removed.
    Uses adaptive quadrature on the real and imaginary parts separately.
    """
    def trace_at(zeta: float) -> complex:
        try:
            t = np.trace(family.matrix(zeta)) / 3.0
        except ValueError as err:
            raise IntegrationError(f"bad coupling sample at z={zeta!r}: {err}") from err
        if not (np.isfinite(t.real) and np.isfinite(t.imag)):
            raise IntegrationError(f"non-finite trace sample at z={zeta!r}")
        return t

    if z == 0.0:
        return 0.0 + 0.0j
    re, re_err = quad(lambda s: trace_at(s).real, 0.0, z, epsabs=tol, epsrel=tol, limit=200)
    im, im_err = quad(lambda s: trace_at(s).imag, 0.0, z, epsabs=tol, epsrel=tol, limit=200)
    if max(re_err, im_err) > 10 * tol * max(1.0, abs(complex(re, im))):
        raise IntegrationError(
            f"quadrature error {max(re_err, im_err):.2e} exceeds tolerance {tol:.2e}")
    return complex(re, im)


def decompose(M1: np.ndarray) -> GellMannCoefficients:
    """Extract the 8 basis coefficients of a traceless matrix.

    Cartan coefficients come from weighted trace pairings,
    mu_X = w_X * Tr[M1 X].  Ladder coefficients pair each raising
    generator with its lowering partner (Tr[X+ X+] = 0, so the
    transposed pairing is the one that inverts `reconstruct`).
    """
    M1 = _require_traceless(M1)
    return GellMannCoefficients(
        mu_I0=M1[0, 0] - M1[1, 1],
        mu_Y=1.5 * (M1[0, 0] + M1[1, 1]),
        mu_Ip=M1[0, 1], mu_Im=M1[1, 0],
        mu_Up=M1[1, 2], mu_Um=M1[2, 1],
        mu_Vp=M1[0, 2], mu_Vm=M1[2, 0],
    )


def reconstruct(c: GellMannCoefficients) -> np.ndarray:
    """Rebuild the traceless matrix sum_X mu_X * X from its coefficients."""
    M = np.zeros((3, 3), dtype=complex)
    for label, mu in c.as_dict().items():
        M += complex(mu) * _GENERATORS[label]
    return M


def exp_generator(g: GeneratorLabel, alpha: complex) -> np.ndarray:
    """Closed-form exp(i * alpha * X_g).

    Ladder generators square to zero, so the series truncates at the
    linear term; Cartan generators are diagonal.
    """
    alpha = complex(alpha)
    if g.is_cartan:
        return np.diag(np.exp(1j * alpha * np.diag(_GENERATORS[g])))
    return np.eye(3, dtype=complex) + 1j * alpha * _GENERATORS[g]
