"""Small fixed-size complex matrix algebra, qubit states and metrics.

Everything here works on plain numpy arrays (complex128) of dimension 2 or 4.
Density matrices are validated Hermitian, unit-trace and positive
semidefinite; eigendecomposition of Hermitian matrices is done in-repo with
cyclic Jacobi rotations so the metric code has no dependence on LAPACK
internals and is exactly testable against an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# entrywise tolerances for state validation
HERMITICITY_ATOL = 1e-12
TRACE_ATOL = 1e-12
EIGENVALUE_FLOOR = -1e-10     # eigenvalues in [floor, 0) are numeric drift
PURITY_PURE_THRESHOLD = 1 - 1e-10

ID2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)
KET_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
KET_MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)
KET_PLUS_I = np.array([1, 1j], dtype=complex) / np.sqrt(2)
KET_MINUS_I = np.array([1, -1j], dtype=complex) / np.sqrt(2)

_SY_SY = np.kron(PAULI_Y, PAULI_Y)


def dagger(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return m.conj().T


def projector(ket: np.ndarray) -> np.ndarray:
    """|k><k| for a (not necessarily normalized) state vector."""
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a square complex array of dimension 2 or 4 with finite entries."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if m.shape[0] not in (2, 4):
        raise ValueError(f"{name} must have dimension 2 or 4, got {m.shape[0]}")
    if not np.all(np.isfinite(m.view(float))):
        raise ValueError(f"{name} has non-finite entries")
    return m


def check_density(rho, name: str = "rho") -> np.ndarray:
    """Validate a density matrix: Hermitian, trace 1, positive semidefinite."""
    rho = as_matrix(rho, name)
    if np.abs(rho - dagger(rho)).max() > HERMITICITY_ATOL:
        raise ValueError(f"{name} is not Hermitian within {HERMITICITY_ATOL}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_ATOL:
        raise ValueError(f"{name} has trace {tr}, expected 1")
    evals, _ = eig_hermitian(rho)
    if evals[-1] < EIGENVALUE_FLOOR:
        raise ValueError(f"{name} has negative eigenvalue {evals[-1]}")
    return rho


def purity(rho: np.ndarray) -> float:
    """Tr(rho^2), 1 for pure states."""
    return float(np.real(np.trace(rho @ rho)))


class BlochVector(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class InitialState:
    """Input state |psi> = cos(alpha/2)|+> + e^{i phi} (pair_sign) sin(alpha/2)|->.

    alpha in [0, pi/2] and phi in [0, 2 pi) place the state anywhere on the
    Bloch sphere octant swept in the comparison study; pair_sign selects a
    member of the nonorthogonal pair.
    """

    alpha: float
    phi: float = 0.0
    pair_sign: int = +1

    def __post_init__(self):
        if not 0.0 <= self.alpha <= np.pi / 2 + 1e-15:
            raise ValueError(f"alpha must be in [0, pi/2], got {self.alpha}")
        if not 0.0 <= self.phi < 2 * np.pi:
            raise ValueError(f"phi must be in [0, 2*pi), got {self.phi}")
        if self.pair_sign not in (+1, -1):
            raise ValueError(f"pair_sign must be +1 or -1, got {self.pair_sign}")

    def ket(self) -> np.ndarray:
        return (np.cos(self.alpha / 2) * KET_PLUS
                + self.pair_sign * np.exp(1j * self.phi) * np.sin(self.alpha / 2) * KET_MINUS)


def state_from_angles(s: InitialState) -> np.ndarray:
    """Pure density matrix |psi><psi| for the given angles."""
    return projector(s.ket())


def bloch_to_density(b) -> np.ndarray:
    """rho = 1/2 [[1+z, x+iy], [x-iy, 1-z]] for a Bloch vector inside the unit ball."""
    x, y, z = (float(v) for v in b)
    if x * x + y * y + z * z > 1 + 1e-12:
        raise ValueError(f"Bloch vector ({x}, {y}, {z}) lies outside the unit ball")
    return 0.5 * np.array([[1 + z, x + 1j * y], [x - 1j * y, 1 - z]], dtype=complex)


def density_to_bloch(rho) -> BlochVector:
    """Cartesian components x = 2 Re(rho01), y = 2 Im(rho01), z = 2 rho00 - 1."""
    rho = check_density(rho)
    if rho.shape[0] != 2:
        raise ValueError("Bloch vector is defined for single-qubit states only")
    return BlochVector(x=float(2 * rho[0, 1].real),
                       y=float(2 * rho[0, 1].imag),
                       z=float((rho[0, 0] - rho[1, 1]).real))


def eig_hermitian(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Returns (eigenvalues sorted descending, eigenvector matrix V with
    matching columns) such that m = V diag(w) V^dagger.
    """
    m = as_matrix(m, "m")
    if np.abs(m - dagger(m)).max() > 1e-10:
        raise ValueError("eig_hermitian requires a Hermitian matrix")
    n = m.shape[0]
    a = 0.5 * (m + dagger(m))                # symmetrize away roundoff
    v = np.eye(n, dtype=complex)
    scale = max(1.0, float(np.abs(a).max()))
    for _ in range(100):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off = max(off, abs(a[p, q]))
        if off <= 1e-15 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                b = abs(a[p, q])
                if b <= 1e-18 * scale:
                    continue
                phase = a[p, q] / b
                # zero a[p,q]: tan(2 th) = 2|a_pq| / (a_qq - a_pp)
                th = 0.5 * np.arctan2(2 * b, (a[q, q] - a[p, p]).real)
                c, s = np.cos(th), np.sin(th)
                u = np.eye(n, dtype=complex)
                u[p, p] = c
                u[p, q] = s * phase
                u[q, p] = -s * np.conj(phase)
                u[q, q] = c
                a = dagger(u) @ a @ u
                v = v @ u
    else:
        raise ArithmeticError("Jacobi eigendecomposition did not converge")
    w = np.real(np.diag(a))
    order = np.argsort(-w, kind="stable")
    return w[order].copy(), v[:, order].copy()


def _clip_spectrum(w: np.ndarray, what: str) -> np.ndarray:
    """Clip eigenvalues in [EIGENVALUE_FLOOR, 0) to 0; reject anything lower.

    Eigenvalues below the relative noise floor are zeroed as well: taking a
    square root amplifies O(eps) noise at zero to O(sqrt(eps)), which would
    otherwise dominate the metric error for (near-)pure states.
    """
    if w.min() < EIGENVALUE_FLOOR:
        raise ValueError(f"{what} has eigenvalue {w.min()} below {EIGENVALUE_FLOOR}")
    w = np.clip(w, 0.0, None)
    w[w < 1e-14 * max(1.0, float(w.max()))] = 0.0
    return w


def _sqrtm_psd(rho: np.ndarray) -> np.ndarray:
    w, v = eig_hermitian(rho)
    w = _clip_spectrum(w, "matrix square root input")
    return (v * np.sqrt(w)) @ dagger(v)


def _fidelity_general(rho_in: np.ndarray, rho_f: np.ndarray) -> float:
    """Tr sqrt(sqrt(rho_in) rho_f sqrt(rho_in)) without the purity shortcut."""
    root = _sqrtm_psd(rho_in)
    w, _ = eig_hermitian(root @ rho_f @ root)
    w = _clip_spectrum(w, "fidelity inner matrix")
    return min(1.0, float(np.sum(np.sqrt(w))))


def fidelity(rho_in, rho_f) -> float:
    """Uhlmann fidelity Tr sqrt(sqrt(rho_in) rho_f sqrt(rho_in)).

    For a pure rho_in this reduces to sqrt(<psi|rho_f|psi>), which is used
    whenever Tr(rho_in^2) >= 1 - 1e-10.
    """
    rho_in = check_density(rho_in, "rho_in")
    rho_f = check_density(rho_f, "rho_f")
    if rho_in.shape != rho_f.shape:
        raise ValueError(f"dimension mismatch: {rho_in.shape} vs {rho_f.shape}")
    if purity(rho_in) >= PURITY_PURE_THRESHOLD:
        overlap = float(np.real(np.trace(rho_in @ rho_f)))
        if overlap < EIGENVALUE_FLOOR:
            raise ValueError(f"negative overlap {overlap} beyond tolerance")
        return min(1.0, np.sqrt(max(overlap, 0.0)))
    return _fidelity_general(rho_in, rho_f)


def concurrence(rho) -> float:
    """Two-qubit concurrence max{0, l1 - l2 - l3 - l4}.

    The l_i are the descending square roots of the eigenvalues of
    rho (sy x sy) rho* (sy x sy), computed here through the Hermitian
    equivalent sqrt(rho) rho_tilde sqrt(rho) so only the Jacobi solver
    is needed.
    """
    rho = check_density(rho)
    if rho.shape[0] != 4:
        raise ValueError("concurrence is defined for two-qubit states (dim 4)")
    rho_tilde = _SY_SY @ rho.conj() @ _SY_SY
    root = _sqrtm_psd(rho)
    w, _ = eig_hermitian(root @ rho_tilde @ root)
    w = _clip_spectrum(w, "concurrence spectrum")
    lam = np.sqrt(w)
    return max(0.0, float(lam[0] - lam[1] - lam[2] - lam[3]))


def tensor(a, b) -> np.ndarray:
    """Kronecker product of two single-qubit operators, basis order 00,01,10,11."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[0] != 2 or b.shape[0] != 2:
        raise ValueError("tensor expects two 2x2 operators")
    return np.kron(a, b)
