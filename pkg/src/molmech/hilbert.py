"""Finite Hilbert-space primitives for the emitter + single-phonon-mode model.

The composite space is (two-level emitter) x (harmonic mode truncated at
``phonon_cutoff`` Fock states).  Everything downstream (Hamiltonians,
Liouvillians, observables) is built from the operators defined here.

Conventions
-----------
* Basis ordering is emitter-major: index = e_idx * N + n, with e_idx = 0 the
  electronic ground state |g> and e_idx = 1 the excited state |e>, and n the
  phonon Fock label 0..N-1.  ``embed_pair`` is the Kronecker product
  (emitter factor) x (phonon factor) and reproduces exactly that ordering.
* Operators are stored as dense complex ndarrays (the composite dimension in
  this project never exceeds ~128, so dense is both simpler and faster than
  sparse at this size).  Superoperators are assembled sparsely in
  :mod:`molmech.dynamics`, not here.
* The truncated ladder operator satisfies b|n> = sqrt(n)|n-1>.  Truncation is
  visible in the commutator: [b, b+] = 1 everywhere except the top Fock state,
  where it is -(N-1).  States must keep negligible weight on that edge for
  results to mean anything; the dynamics layer re-checks this by doubling the
  cutoff.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpaceDims",
    "QOperator",
    "DensityMatrix",
    "TruncationWarning",
    "annihilator",
    "number_operator",
    "identity",
    "emitter_lowering",
    "emitter_projector_excited",
    "embed_pair",
    "expectation",
    "displacement_operator",
    "fock_ket",
    "basis_ket",
    "ket_density",
    "dump_operator",
    "load_operator",
]

HERM_TOL = 1e-12
TRACE_TOL = 1e-9
DM_HERM_TOL = 1e-10
POSITIVITY_TOL = -1e-8


class TruncationWarning(UserWarning):
    """A requested object presses against the Fock-space truncation edge."""


@dataclass(frozen=True)
class SpaceDims:
    """Dimensions of the composite emitter (x) phonon space.

    Parameters
    ----------
    phonon_cutoff : int
        Number of Fock states kept for the phonon mode (N >= 2).
    emitter_levels : int
        Electronic levels; fixed at 2 in this model.
    """

    phonon_cutoff: int
    emitter_levels: int = 2

    def __post_init__(self) -> None:
        if self.emitter_levels != 2:
            raise ValueError("model is restricted to a two-level emitter")
        if self.phonon_cutoff < 2:
            raise ValueError(f"phonon cutoff must be >= 2, got {self.phonon_cutoff}")

    @property
    def total(self) -> int:
        return self.emitter_levels * self.phonon_cutoff

    def doubled(self) -> "SpaceDims":
        """Same space with twice the phonon cutoff (convergence checks)."""
        return SpaceDims(phonon_cutoff=2 * self.phonon_cutoff)


class QOperator:
    """Dense operator on a finite space, optionally tagged with SpaceDims.

    The matrix is stored read-only.  ``herm=True`` asserts Hermiticity at
    construction (tolerance 1e-12) and fails loudly otherwise, so that
    observables cannot silently pick up anti-Hermitian dirt.
    """

    __slots__ = ("mat", "dims", "herm")

    def __init__(self, mat, dims: SpaceDims | None = None, herm: bool | None = None):
        m = np.array(mat, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {m.shape}")
        if dims is not None and m.shape[0] != dims.total:
            raise ValueError(
                f"matrix dimension {m.shape[0]} does not match dims.total {dims.total}"
            )
        if herm is None:
            herm = bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= HERM_TOL)
        elif herm:
            err = float(np.max(np.abs(m - m.conj().T), initial=0.0))
            if err > HERM_TOL:
                raise ValueError(f"operator declared Hermitian but deviates by {err:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "herm", bool(herm))

    def __setattr__(self, name, value):
        raise AttributeError("QOperator is immutable")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def dag(self) -> "QOperator":
        return QOperator(self.mat.conj().T, dims=self.dims)

    def __add__(self, other: "QOperator") -> "QOperator":
        return QOperator(self.mat + other.mat, dims=self.dims or other.dims)

    def __sub__(self, other: "QOperator") -> "QOperator":
        return QOperator(self.mat - other.mat, dims=self.dims or other.dims)

    def __mul__(self, c: complex) -> "QOperator":
        return QOperator(self.mat * c, dims=self.dims)

    __rmul__ = __mul__

    def __matmul__(self, other: "QOperator") -> "QOperator":
        return QOperator(self.mat @ other.mat, dims=self.dims or other.dims)

    def __repr__(self) -> str:
        tag = "herm" if self.herm else "gen"
        return f"QOperator(dim={self.dim}, {tag})"


class DensityMatrix:
    """Validated density matrix on the composite space.

    Construction enforces trace within 1e-9 of one, Hermiticity within 1e-10
    and spectrum above -1e-8.  The stored matrix is the Hermitian part
    (rho + rho†)/2, which is a no-op within the admitted tolerance.
    """

    __slots__ = ("mat", "dims")

    def __init__(self, mat, dims: SpaceDims | None = None):
        m = np.array(mat, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {m.shape}")
        if dims is not None and m.shape[0] != dims.total:
            raise ValueError(
                f"matrix dimension {m.shape[0]} does not match dims.total {dims.total}"
            )
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace deviates from 1 by {abs(tr - 1.0):.3e}")
        herm_err = float(np.max(np.abs(m - m.conj().T), initial=0.0))
        if herm_err > DM_HERM_TOL:
            raise ValueError(f"density matrix not Hermitian within tolerance: {herm_err:.3e}")
        m = 0.5 * (m + m.conj().T)
        lo = float(np.linalg.eigvalsh(m)[0])
        if lo < POSITIVITY_TOL:
            raise ValueError(f"density matrix has eigenvalue {lo:.3e} below {POSITIVITY_TOL}")
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)
        object.__setattr__(self, "dims", dims)

    def __setattr__(self, name, value):
        raise AttributeError("DensityMatrix is immutable")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim})"


# ---------------------------------------------------------------------------
# elementary operators


def annihilator(cutoff: int) -> QOperator:
    """Truncated phonon lowering operator b on ``cutoff`` Fock states.

    b|n> = sqrt(n)|n-1>; the matrix has sqrt(n) on the first superdiagonal.
    """
    if cutoff < 2:
        raise ValueError("cutoff must be >= 2")
    m = np.zeros((cutoff, cutoff), dtype=np.complex128)
    ns = np.arange(1, cutoff)
    m[ns - 1, ns] = np.sqrt(ns)
    return QOperator(m)


def number_operator(cutoff: int) -> QOperator:
    """b+b truncated at ``cutoff`` Fock states: diag(0, 1, ..., N-1)."""
    return QOperator(np.diag(np.arange(cutoff, dtype=np.complex128)))


def identity(dim: int) -> QOperator:
    return QOperator(np.eye(dim, dtype=np.complex128))


def emitter_lowering() -> QOperator:
    """sigma = |g><e| in the (|g>, |e>) ordering."""
    m = np.zeros((2, 2), dtype=np.complex128)
    m[0, 1] = 1.0
    return QOperator(m)


def emitter_projector_excited() -> QOperator:
    """sigma+ sigma = |e><e|."""
    return QOperator(np.diag([0.0, 1.0]).astype(np.complex128))


def embed_pair(emitter_op: QOperator, phonon_op: QOperator) -> QOperator:
    """Kronecker-embed (2x2 emitter factor) x (NxN phonon factor).

    The result acts on the composite space with emitter-major ordering, and is
    tagged with the matching SpaceDims.
    """
    if emitter_op.dim != 2:
        raise ValueError(f"emitter factor must be 2x2, got {emitter_op.dim}")
    n = phonon_op.dim
    dims = SpaceDims(phonon_cutoff=n)
    return QOperator(np.kron(emitter_op.mat, phonon_op.mat), dims=dims)


def expectation(state: DensityMatrix, op: QOperator) -> float | complex:
    """Tr(rho O).  Returns a float for Hermitian O, complex otherwise.

    For Hermitian operators the imaginary part is checked to be numerical
    noise (< 1e-9 relative to scale) before being dropped.
    """
    if op.dim != state.dim:
        raise ValueError(f"dimension mismatch: state {state.dim}, operator {op.dim}")
    val = complex(np.einsum("ij,ji->", state.mat, op.mat))
    if op.herm:
        scale = max(1.0, abs(val))
        if abs(val.imag) > 1e-9 * scale:
            raise ValueError(
                f"expectation of Hermitian operator has imaginary part {val.imag:.3e}"
            )
        return float(val.real)
    return val


def displacement_operator(alpha: complex, cutoff: int) -> QOperator:
    """D(alpha) = exp(alpha b+ - conj(alpha) b) on the truncated space.

    Computed by exact exponentiation of the (anti-Hermitian) generator.  The
    truncated D(alpha) is unitary to machine precision but only represents a
    coherent displacement faithfully while |alpha|^2 << N; a warning is issued
    beyond |alpha|^2 > N/4.
    """
    from scipy.linalg import expm

    if abs(alpha) ** 2 > cutoff / 4:
        warnings.warn(
            f"|alpha|^2 = {abs(alpha)**2:.3g} exceeds cutoff/4 = {cutoff / 4:.3g}; "
            "displaced state is not well represented at this truncation",
            TruncationWarning,
            stacklevel=2,
        )
    b = annihilator(cutoff).mat
    gen = alpha * b.conj().T - np.conj(alpha) * b
    return QOperator(expm(gen))


# ---------------------------------------------------------------------------
# basis states


def fock_ket(n: int, cutoff: int) -> np.ndarray:
    """|n> as a length-``cutoff`` vector."""
    if not 0 <= n < cutoff:
        raise ValueError(f"Fock label {n} outside [0, {cutoff})")
    v = np.zeros(cutoff, dtype=np.complex128)
    v[n] = 1.0
    return v


def basis_ket(excited: bool, n: int, dims: SpaceDims) -> np.ndarray:
    """|g/e, n> on the composite space (emitter-major ordering)."""
    v = np.zeros(dims.total, dtype=np.complex128)
    v[(1 if excited else 0) * dims.phonon_cutoff + n] = 1.0
    return v


def ket_density(psi: np.ndarray, dims: SpaceDims | None = None) -> DensityMatrix:
    """|psi><psi| normalised to unit trace."""
    psi = np.asarray(psi, dtype=np.complex128)
    nrm = float(np.linalg.norm(psi))
    if nrm == 0.0:
        raise ValueError("cannot normalise the zero vector")
    psi = psi / nrm
    return DensityMatrix(np.outer(psi, psi.conj()), dims=dims)


# ---------------------------------------------------------------------------
# debugging dump format
#
# Line 1: "molmech-op 1 <nrows> <ncols>"
# Then one line per row, row-major, with "re im" pairs separated by spaces.


def dump_operator(op: QOperator, path) -> None:
    """Write a matrix as a row-major real/imaginary text table."""
    m = op.mat
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"molmech-op 1 {m.shape[0]} {m.shape[1]}\n")
        for row in m:
            fh.write(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row) + "\n")


def load_operator(path) -> QOperator:
    """Read a matrix written by :func:`dump_operator`."""
    with open(path, encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "molmech-op" or header[1] != "1":
            raise ValueError(f"unrecognised dump header: {header}")
        nr, nc = int(header[2]), int(header[3])
        m = np.zeros((nr, nc), dtype=np.complex128)
        for i in range(nr):
            vals = [float(x) for x in fh.readline().split()]
            if len(vals) != 2 * nc:
                raise ValueError(f"row {i} has {len(vals)} values, expected {2 * nc}")
            m[i] = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
    return QOperator(m)
