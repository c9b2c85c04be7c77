"""Tensor-product Hilbert space for two multi-level ions and shared motional modes.

The composite space is ordered ion1 (x) ion2 (x) mode3 [(x) mode4] with C-order
(row-major) index flattening, i.e. the last factor varies fastest.  Each ion
carries either three levels (down, up, aux) or four (down, up, aux, leak); the
motional modes are truncated harmonic oscillators.

Operators are returned as ``scipy.sparse`` CSR matrices with complex128 dtype.
States are plain dense numpy arrays (kets as 1-D vectors, density matrices as
2-D); :class:`DensityState` is a thin wrapper bundling a density matrix with
its layout and a timestamp.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import prod
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "DOWN",
    "UP",
    "AUX",
    "LEAK",
    "LEVEL_NAMES",
    "HilbertLayout",
    "LayoutError",
    "QuantumOperator",
    "DensityState",
    "build_layout",
    "identity",
    "embed_ion_operator",
    "embed_mode_operator",
    "ion_transition",
    "ion_projector",
    "mode_lowering",
    "mode_number",
    "product_ket",
    "singlet_ket",
    "triplet_ket",
    "imbalanced_singlet_ket",
    "ket_to_density",
    "thermal_mode_density",
    "assemble_density",
    "expectation",
    "mode_number_expectation",
    "partial_trace_modes",
    "mode_populations",
]

# Internal ion-level indices.  Order matters: it fixes the tensor layout and is
# relied on throughout the package.
DOWN, UP, AUX, LEAK = 0, 1, 2, 3
LEVEL_NAMES = ("down", "up", "aux", "leak")


class LayoutError(ValueError):
    """Raised for Hilbert-space layouts outside the supported family."""


@dataclass(frozen=True)
class HilbertLayout:
    """Dimensions and indexing conventions of the composite space.

    Parameters
    ----------
    ion_levels:
        Levels kept per ion: 3 (down, up, aux) or 4 (adds the leak level
        that collects population scattered out of the pumping cycle).
    mode_dims:
        Fock-space truncation of the shared motional modes.  One entry for
        the pumping mode alone, two when the bystander mode is retained.
    """

    ion_levels: int = 4
    mode_dims: tuple[int, ...] = (5, 3)

    def __post_init__(self):
        if self.ion_levels not in (3, 4):
            raise LayoutError(
                f"ion_levels must be 3 or 4, got {self.ion_levels}"
            )
        dims = tuple(int(d) for d in self.mode_dims)
        if not 1 <= len(dims) <= 2:
            raise LayoutError(
                f"expected one or two motional modes, got {len(dims)}"
            )
        if any(d < 2 for d in dims):
            raise LayoutError(f"mode dimensions must be >= 2, got {dims}")
        object.__setattr__(self, "mode_dims", dims)

    @property
    def dims(self) -> tuple[int, ...]:
        """Subsystem dimensions in tensor order (ion1, ion2, modes...)."""
        return (self.ion_levels, self.ion_levels) + self.mode_dims

    @property
    def total_dim(self) -> int:
        return prod(self.dims)

    @property
    def n_modes(self) -> int:
        return len(self.mode_dims)

    @property
    def has_leak_level(self) -> bool:
        return self.ion_levels == 4

    def strides(self) -> tuple[int, ...]:
        """C-order strides of each tensor factor in the flat index."""
        dims = self.dims
        out = []
        acc = 1
        for d in reversed(dims):
            out.append(acc)
            acc *= d
        return tuple(reversed(out))

    def index(self, levels: Sequence[int], fock: Sequence[int]) -> int:
        """Flat basis index of ``|levels[0], levels[1]; fock...>``."""
        if len(levels) != 2 or len(fock) != self.n_modes:
            raise LayoutError(
                f"need 2 ion levels and {self.n_modes} mode occupations"
            )
        labels = tuple(levels) + tuple(fock)
        idx = 0
        for lab, dim, stride in zip(labels, self.dims, self.strides()):
            if not 0 <= lab < dim:
                raise LayoutError(f"label {lab} out of range for dim {dim}")
            idx += lab * stride
        return idx


def build_layout(ion_levels: int, mode_dims: Iterable[int]) -> HilbertLayout:
    """Validated constructor mirroring :class:`HilbertLayout`."""
    return HilbertLayout(ion_levels=ion_levels, mode_dims=tuple(mode_dims))


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantumOperator:
    """Sparse operator tagged with its layout.

    Thin algebra wrapper: addition, scalar multiplication, composition and
    adjoint, all with layout-compatibility checks.  ``entries`` is the raw
    CSR matrix for consumers that work at the numpy/scipy level.
    """

    layout: HilbertLayout
    entries: sp.csr_matrix

    def __post_init__(self):
        mat = sp.csr_matrix(self.entries, dtype=np.complex128)
        n = self.layout.total_dim
        if mat.shape != (n, n):
            raise LayoutError(
                f"operator shape {mat.shape} does not match layout dim {n}"
            )
        object.__setattr__(self, "entries", mat)

    def _check(self, other: "QuantumOperator") -> None:
        if not isinstance(other, QuantumOperator):
            raise TypeError(f"expected QuantumOperator, got {type(other).__name__}")
        if other.layout != self.layout:
            raise LayoutError("operator layouts do not match")

    def __add__(self, other: "QuantumOperator") -> "QuantumOperator":
        self._check(other)
        return QuantumOperator(self.layout, self.entries + other.entries)

    def __sub__(self, other: "QuantumOperator") -> "QuantumOperator":
        self._check(other)
        return QuantumOperator(self.layout, self.entries - other.entries)

    def __mul__(self, scalar) -> "QuantumOperator":
        return QuantumOperator(self.layout, self.entries * complex(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "QuantumOperator":
        return QuantumOperator(self.layout, -self.entries)

    def __matmul__(self, other):
        if isinstance(other, QuantumOperator):
            self._check(other)
            return QuantumOperator(self.layout, self.entries @ other.entries)
        return self.entries @ np.asarray(other, dtype=np.complex128)

    def adjoint(self) -> "QuantumOperator":
        return QuantumOperator(self.layout, sp.csr_matrix(self.entries.conj().T))

    def hermiticity_defect(self) -> float:
        diff = self.entries - self.entries.conj().T
        return float(np.max(np.abs(diff.toarray()))) if diff.nnz else 0.0

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        scale = max(float(np.max(np.abs(self.entries.data))), 1.0) \
            if self.entries.nnz else 1.0
        return self.hermiticity_defect() <= tol * scale

    def to_dense(self) -> np.ndarray:
        return self.entries.toarray()

    @property
    def nnz(self) -> int:
        return self.entries.nnz


def _kron_chain(mats: Sequence[sp.spmatrix]) -> sp.csr_matrix:
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return sp.csr_matrix(out, dtype=np.complex128)


def identity(layout: HilbertLayout) -> QuantumOperator:
    return QuantumOperator(
        layout, sp.identity(layout.total_dim, dtype=np.complex128, format="csr")
    )


def embed_ion_operator(
    layout: HilbertLayout, ion: int, mat: np.ndarray
) -> QuantumOperator:
    """Embed a single-ion operator (``ion_levels`` square) at slot ``ion`` (0 or 1)."""
    if ion not in (0, 1):
        raise LayoutError(f"ion index must be 0 or 1, got {ion}")
    mat = np.asarray(mat, dtype=np.complex128)
    L = layout.ion_levels
    if mat.shape != (L, L):
        raise LayoutError(f"ion operator must be {L}x{L}, got {mat.shape}")
    factors: list[sp.spmatrix] = []
    for slot in range(2):
        factors.append(
            sp.csr_matrix(mat) if slot == ion else sp.identity(L, format="csr")
        )
    for d in layout.mode_dims:
        factors.append(sp.identity(d, format="csr"))
    return QuantumOperator(layout, _kron_chain(factors))


def embed_mode_operator(
    layout: HilbertLayout, mode: int, mat: np.ndarray
) -> QuantumOperator:
    """Embed a single-mode operator at mode slot ``mode`` (0 = pumping mode)."""
    if not 0 <= mode < layout.n_modes:
        raise LayoutError(f"mode index {mode} out of range")
    mat = np.asarray(mat, dtype=np.complex128)
    d = layout.mode_dims[mode]
    if mat.shape != (d, d):
        raise LayoutError(f"mode operator must be {d}x{d}, got {mat.shape}")
    L = layout.ion_levels
    factors: list[sp.spmatrix] = [
        sp.identity(L, format="csr"),
        sp.identity(L, format="csr"),
    ]
    for slot, dim in enumerate(layout.mode_dims):
        factors.append(
            sp.csr_matrix(mat) if slot == mode else sp.identity(dim, format="csr")
        )
    return QuantumOperator(layout, _kron_chain(factors))


def ion_transition(
    layout: HilbertLayout, ion: int, to_level: int, from_level: int
) -> QuantumOperator:
    """Embedded ``|to><from|`` on one ion."""
    L = layout.ion_levels
    if not (0 <= to_level < L and 0 <= from_level < L):
        raise LayoutError(
            f"levels ({to_level},{from_level}) out of range for {L}-level ion"
        )
    mat = np.zeros((L, L))
    mat[to_level, from_level] = 1.0
    return embed_ion_operator(layout, ion, mat)


def ion_projector(layout: HilbertLayout, ion: int, level: int) -> QuantumOperator:
    return ion_transition(layout, ion, level, level)


def _lowering_matrix(dim: int) -> np.ndarray:
    a = np.zeros((dim, dim))
    ns = np.arange(1, dim)
    a[ns - 1, ns] = np.sqrt(ns)
    return a


def mode_lowering(layout: HilbertLayout, mode: int = 0) -> QuantumOperator:
    """Embedded annihilation operator of the given motional mode."""
    return embed_mode_operator(layout, mode, _lowering_matrix(layout.mode_dims[mode]))


def mode_number(layout: HilbertLayout, mode: int = 0) -> QuantumOperator:
    d = layout.mode_dims[mode]
    return embed_mode_operator(layout, mode, np.diag(np.arange(d, dtype=float)))


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

def product_ket(
    layout: HilbertLayout,
    levels: Sequence[int],
    fock: Sequence[int] | None = None,
) -> np.ndarray:
    """Basis ket ``|l1 l2; n3 [n4]>`` as a dense vector."""
    if fock is None:
        fock = (0,) * layout.n_modes
    vec = np.zeros(layout.total_dim, dtype=np.complex128)
    vec[layout.index(levels, fock)] = 1.0
    return vec


def singlet_ket(
    layout: HilbertLayout, fock: Sequence[int] | None = None
) -> np.ndarray:
    """Spin singlet (|up,down> - |down,up>)/sqrt(2) at the given Fock occupation."""
    up_down = product_ket(layout, (UP, DOWN), fock)
    down_up = product_ket(layout, (DOWN, UP), fock)
    return (up_down - down_up) / np.sqrt(2.0)


def triplet_ket(
    layout: HilbertLayout, fock: Sequence[int] | None = None
) -> np.ndarray:
    """Spin triplet (|up,down> + |down,up>)/sqrt(2) at the given Fock occupation."""
    up_down = product_ket(layout, (UP, DOWN), fock)
    down_up = product_ket(layout, (DOWN, UP), fock)
    return (up_down + down_up) / np.sqrt(2.0)


def imbalanced_singlet_ket(
    layout: HilbertLayout,
    r: float,
    phi: float = 0.0,
    fock: Sequence[int] | None = None,
) -> np.ndarray:
    """Normalized (1-r/2)|up,down> - (1+r/2)e^{i phi}|down,up>.

    For sideband amplitudes (1-r/2) on ion 1 and (1+r/2)e^{i phi} on ion 2
    this is the spin state annihilated by the phonon-raising part of the
    coupling; at r=0, phi=0 it reduces to the plain singlet.  The residual
    phonon-lowering matrix element out of this state scales as r.
    """
    up_down = product_ket(layout, (UP, DOWN), fock)
    down_up = product_ket(layout, (DOWN, UP), fock)
    vec = (1.0 - r / 2.0) * up_down - (1.0 + r / 2.0) * np.exp(1j * phi) * down_up
    return vec / np.linalg.norm(vec)


def ket_to_density(ket: np.ndarray) -> np.ndarray:
    ket = np.asarray(ket, dtype=np.complex128)
    return np.outer(ket, ket.conj())


def thermal_mode_density(dim: int, nbar: float) -> np.ndarray:
    """Truncated thermal state of one mode, renormalized on the kept levels.

    For nbar=0 this is the ground state.  Populations follow the geometric
    distribution p_n ~ (nbar/(1+nbar))^n; renormalization after truncation
    means <n> falls slightly below nbar (negligibly so for nbar << dim).
    """
    if nbar < 0:
        raise ValueError(f"nbar must be >= 0, got {nbar}")
    if nbar == 0.0:
        p = np.zeros(dim)
        p[0] = 1.0
    else:
        ratio = nbar / (1.0 + nbar)
        p = ratio ** np.arange(dim)
        p /= p.sum()
    return np.diag(p.astype(np.complex128))


def assemble_density(
    layout: HilbertLayout,
    spin_density: np.ndarray,
    mode_densities: Sequence[np.ndarray],
) -> np.ndarray:
    """Tensor a two-ion spin density with per-mode density matrices."""
    L2 = layout.ion_levels ** 2
    spin_density = np.asarray(spin_density, dtype=np.complex128)
    if spin_density.shape != (L2, L2):
        raise LayoutError(
            f"spin density must be {L2}x{L2}, got {spin_density.shape}"
        )
    if len(mode_densities) != layout.n_modes:
        raise LayoutError(
            f"need {layout.n_modes} mode densities, got {len(mode_densities)}"
        )
    rho = spin_density
    for m in mode_densities:
        rho = np.kron(rho, np.asarray(m, dtype=np.complex128))
    return rho


# ---------------------------------------------------------------------------
# Expectations and reductions
# ---------------------------------------------------------------------------

def expectation(rho, op) -> complex:
    """tr(rho @ op), exploiting operator sparsity.

    ``rho`` may be a DensityState or plain matrix; ``op`` a QuantumOperator
    (layouts are then checked) or any sparse/dense matrix.
    """
    if isinstance(rho, DensityState):
        if isinstance(op, QuantumOperator) and op.layout != rho.layout:
            raise LayoutError("operator and state layouts do not match")
        rho = rho.data
    rho = np.asarray(rho)
    if isinstance(op, QuantumOperator):
        op = op.entries
    if sp.issparse(op):
        # tr(A rho) = sum_ij A_ij rho_ji
        return complex(op.multiply(rho.T).sum())
    return complex(np.trace(np.asarray(op) @ rho))


def _raw_density(rho) -> np.ndarray:
    return rho.data if isinstance(rho, DensityState) else np.asarray(rho)


def mode_number_expectation(
    rho, layout: HilbertLayout, mode: int = 0
) -> float:
    """<n> of one motional mode, from the diagonal of rho."""
    diag = np.real(np.diagonal(_raw_density(rho))).reshape(layout.dims)
    axis = 2 + mode
    occ = np.arange(layout.mode_dims[mode], dtype=float)
    # Sum the diagonal over every axis except the chosen mode's.
    other_axes = tuple(i for i in range(len(layout.dims)) if i != axis)
    marginal = diag.sum(axis=other_axes)
    return float(marginal @ occ)


def partial_trace_modes(rho, layout: HilbertLayout) -> np.ndarray:
    """Reduced two-ion spin density matrix (modes traced out)."""
    L = layout.ion_levels
    shape = layout.dims + layout.dims
    t = _raw_density(rho).reshape(shape)
    for _ in range(layout.n_modes):
        # Trace over the last mode axis pair; after each trace the tensor
        # loses one ket and one bra axis.
        k = (t.ndim // 2) - 1
        t = np.trace(t, axis1=k, axis2=t.ndim - 1)
    return t.reshape(L * L, L * L)


def mode_populations(
    rho, layout: HilbertLayout, mode: int = 0
) -> np.ndarray:
    """Marginal Fock populations of one mode."""
    diag = np.real(np.diagonal(_raw_density(rho))).reshape(layout.dims)
    axis = 2 + mode
    other_axes = tuple(i for i in range(len(layout.dims)) if i != axis)
    return diag.sum(axis=other_axes)


# ---------------------------------------------------------------------------
# State container
# ---------------------------------------------------------------------------

@dataclass
class DensityState:
    """Density matrix tagged with its layout and an evolution timestamp."""

    data: np.ndarray
    layout: HilbertLayout
    time: float = 0.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        n = self.layout.total_dim
        if self.data.shape != (n, n):
            raise LayoutError(
                f"density matrix shape {self.data.shape} does not match "
                f"layout dimension {n}"
            )

    def trace(self) -> float:
        return float(np.real(np.trace(self.data)))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.data + self.data.conj().T))[0])

    def expectation(self, op) -> complex:
        return expectation(self, op)

    def copy(self) -> "DensityState":
        return replace(self, data=self.data.copy())
