"""Hilbert-space layout, operators, canonical states and state metrics.

Composite space: ``n_spins`` qubits tensor one truncated boson mode. The boson
is the last tensor factor, so the flat index is
``spin_index * (fock_cutoff + 1) + fock``. Spin 1 is the most significant bit
of ``spin_index`` and a set bit means the dressed state ``|+>``.

Qubit operators are written in the dressed basis ``|+-> = (|-1> +- |0>)/sqrt(2)``
of the NV ground-state doublet. In that basis the bare-frame ``sigma_z`` (``|-1><-1| -
|0><0|``) becomes ``sigma_x`` and the resonant microwave drive becomes ``sigma_z``.

Operators and states are plain complex numpy arrays; the ``check_*`` helpers
enforce the physical invariants where a caller needs them.
"""
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
import math

import numpy as np

MAX_DIM = 4096

NORM_TOL = 1e-10
TRACE_TOL = 1e-8
POSITIVITY_TOL = 1e-8


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class HilbertSpace:
    n_spins: int
    fock_cutoff: int

    def __post_init__(self):
        if self.n_spins < 1:
            raise ValueError(f"n_spins must be >= 1, got {self.n_spins}")
        if self.fock_cutoff < 0:
            raise ValueError(f"fock_cutoff must be >= 0, got {self.fock_cutoff}")

    @property
    def n_fock(self):
        return self.fock_cutoff + 1

    @property
    def spin_dim(self):
        return 2**self.n_spins

    @property
    def dim(self):
        return self.spin_dim * self.n_fock

    def index(self, spins, fock):
        """Flat index of a spin configuration (tuple of 0/1, 1 = ``|+>``) and Fock level."""
        if len(spins) != self.n_spins:
            raise DimensionError(f"expected {self.n_spins} spins, got {len(spins)}")
        if not 0 <= fock <= self.fock_cutoff:
            raise DimensionError(f"Fock index {fock} outside [0, {self.fock_cutoff}]")
        s = 0
        for bit in spins:
            s = (s << 1) | int(bit)
        return s * self.n_fock + fock

    def unravel(self, flat):
        """Inverse of :meth:`index`."""
        if not 0 <= flat < self.dim:
            raise DimensionError(f"flat index {flat} outside [0, {self.dim})")
        s, fock = divmod(flat, self.n_fock)
        spins = tuple((s >> (self.n_spins - 1 - j)) & 1 for j in range(self.n_spins))
        return spins, fock

    @cached_property
    def spin_space(self):
        """The spin-only factor, represented as a space with a single Fock level."""
        return HilbertSpace(self.n_spins, 0)


def build_space(n_spins, fock_cutoff, max_dim=MAX_DIM):
    space = HilbertSpace(n_spins, fock_cutoff)
    if space.dim > max_dim:
        raise DimensionError(
            f"dim {space.dim} exceeds the dense-matrix bound {max_dim}"
        )
    return space


# -- operators ---------------------------------------------------------------

def _fock_annihilation(n_fock):
    return np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), 1).astype(complex)


def boson_annihilation(space):
    """``a`` on the Fock factor, identity on the spins; truncated at the cutoff."""
    return np.kron(np.eye(space.spin_dim), _fock_annihilation(space.n_fock))


def boson_number(space):
    a = boson_annihilation(space)
    return a.conj().T @ a


_SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |+><-| with |-> = index 0


def _single_spin(space, j, op):
    if not 1 <= j <= space.n_spins:
        raise IndexError(f"spin index {j} outside [1, {space.n_spins}]")
    left = np.eye(2 ** (j - 1))
    right = np.eye(2 ** (space.n_spins - j) * space.n_fock)
    return np.kron(np.kron(left, op), right)


def spin_raise(space, j):
    """``|+>_j<-|`` on spin ``j`` (1-based), identity elsewhere."""
    return _single_spin(space, j, _SIGMA_PLUS)


def spin_lower(space, j):
    return _single_spin(space, j, _SIGMA_PLUS.T.copy())


def spin_excited_projector(space, j):
    """``|+>_j<+|``."""
    return _single_spin(space, j, np.diag([0, 1]).astype(complex))


def spin_sigma_x(space, j):
    """Dressed-basis ``sigma_x`` on spin j; equal to the bare-frame ``sigma_z^j``."""
    return _single_spin(space, j, _SIGMA_PLUS + _SIGMA_PLUS.T)


def spin_sigma_z(space, j):
    """Dressed-basis ``|+><+| - |-><-|``; equal to the bare-frame resonant drive."""
    return _single_spin(space, j, np.diag([-1, 1]).astype(complex))


def excitation_number(space):
    """``N_ex = a^dag a + sum_j |+>_j<+|``."""
    n_ex = boson_number(space)
    for j in range(1, space.n_spins + 1):
        n_ex = n_ex + spin_excited_projector(space, j)
    return n_ex


def fock_projector(space, level):
    proj = np.zeros((space.n_fock, space.n_fock), dtype=complex)
    proj[level, level] = 1.0
    return np.kron(np.eye(space.spin_dim), proj)


# -- states ------------------------------------------------------------------

def basis_state(space, spins, fock=0):
    psi = np.zeros(space.dim, dtype=complex)
    psi[space.index(spins, fock)] = 1.0
    return psi


def fock_state(n_fock, level):
    v = np.zeros(n_fock, dtype=complex)
    v[level] = 1.0
    return v


def dicke_state(n, m):
    """Spin-only symmetric Dicke state with ``m`` of ``n`` spins in ``|+>``."""
    if not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got n={n}, m={m}")
    psi = np.zeros(2**n, dtype=complex)
    amp = 1.0 / math.sqrt(math.comb(n, m))
    for excited in combinations(range(n), m):
        idx = sum(1 << (n - 1 - j) for j in excited)
        psi[idx] = amp
    return psi


def embed(spin_state, fock, space):
    """``|spin> (x) |fock>`` as a full-space vector."""
    spin_state = np.asarray(spin_state, dtype=complex)
    if spin_state.shape != (space.spin_dim,):
        raise DimensionError(
            f"spin state of length {spin_state.shape} does not fit {space.spin_dim}"
        )
    return np.kron(spin_state, fock_state(space.n_fock, fock))


def symmetric_subspace_basis(n, total_excitations, fock_cutoff):
    """Ordered chain ``[D_n^(k) (x) |m - k>  for k = 0..min(n, m)]`` in the full space."""
    m = total_excitations
    if fock_cutoff < m:
        raise DimensionError(f"fock_cutoff {fock_cutoff} < total excitations {m}")
    space = HilbertSpace(n, fock_cutoff)
    return [embed(dicke_state(n, k), m - k, space) for k in range(min(n, m) + 1)]


def pure_to_density(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


# -- metrics -----------------------------------------------------------------

def fidelity(state, target):
    """``|<target|psi>|^2`` for vectors, ``<target|rho|target>`` for matrices."""
    state = np.asarray(state)
    target = np.asarray(target)
    if state.shape[0] != target.shape[0]:
        raise DimensionError(
            f"state dim {state.shape[0]} does not match target dim {target.shape[0]}"
        )
    if state.ndim == 1:
        value = abs(np.vdot(target, state)) ** 2
    else:
        value = np.vdot(target, state @ target).real
    return float(min(max(value, 0.0), 1.0))


def partial_trace_boson(rho, space):
    """Trace out the boson; returns a ``2**n x 2**n`` spin density matrix."""
    rho = np.asarray(rho)
    if rho.shape != (space.dim, space.dim):
        raise DimensionError(f"rho shape {rho.shape} does not match dim {space.dim}")
    s, f = space.spin_dim, space.n_fock
    return np.einsum("ikjk->ij", rho.reshape(s, f, s, f))


def reduced_spin_state(psi, space):
    """Spin density matrix of a pure composite state."""
    m = np.asarray(psi).reshape(space.spin_dim, space.n_fock)
    return m @ m.conj().T


def check_pure(psi, tol=NORM_TOL):
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"state norm {norm!r} deviates from 1 by more than {tol}")
    return psi


def check_density(rho, trace_tol=TRACE_TOL, herm_tol=NORM_TOL, pos_tol=POSITIVITY_TOL):
    rho = np.asarray(rho)
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        raise ValueError(f"density matrix not Hermitian (max deviation {herm:.3g})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {tr!r} deviates from 1")
    lowest = np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0]
    if lowest < -pos_tol:
        raise ValueError(f"density matrix has negative eigenvalue {lowest:.3g}")
    return rho


def is_hermitian(op, tol=NORM_TOL):
    return bool(np.max(np.abs(op - op.conj().T)) <= tol)


# -- permutation-symmetric representation -------------------------------------

@dataclass(frozen=True)
class SymmetricSpace:
    """Dicke levels ``k = 0..n`` tensor Fock levels ``0..fock_cutoff``.

    Index is ``k * (fock_cutoff + 1) + fock``. Only permutation-symmetric
    dynamics (equal couplings) stay inside this space.
    """

    n_spins: int
    fock_cutoff: int

    @property
    def n_fock(self):
        return self.fock_cutoff + 1

    @property
    def n_dicke(self):
        return self.n_spins + 1

    @property
    def dim(self):
        return self.n_dicke * self.n_fock

    def index(self, k, fock):
        if not 0 <= k <= self.n_spins or not 0 <= fock <= self.fock_cutoff:
            raise DimensionError(f"level ({k}, {fock}) outside the symmetric space")
        return k * self.n_fock + fock

    def full_space(self):
        return HilbertSpace(self.n_spins, self.fock_cutoff)


def collective_raise_symmetric(sym):
    """``sum_j |+>_j<-|`` in the Dicke basis: ``D^k -> sqrt((k+1)(n-k)) D^(k+1)``."""
    n = sym.n_spins
    jp = np.zeros((sym.n_dicke, sym.n_dicke), dtype=complex)
    for k in range(n):
        jp[k + 1, k] = math.sqrt((k + 1) * (n - k))
    return np.kron(jp, np.eye(sym.n_fock))


def boson_annihilation_symmetric(sym):
    return np.kron(np.eye(sym.n_dicke), _fock_annihilation(sym.n_fock))


def excitation_count_symmetric(sym):
    """Diagonal operator counting spin excitations ``k``."""
    return np.kron(np.diag(np.arange(sym.n_dicke, dtype=float)), np.eye(sym.n_fock)).astype(complex)


def symmetric_isometry(sym):
    """Columns are ``D_n^(k) (x) |f>`` embedded in the full composite space."""
    space = sym.full_space()
    cols = np.zeros((space.dim, sym.dim), dtype=complex)
    for k in range(sym.n_dicke):
        d = dicke_state(sym.n_spins, k)
        for f in range(sym.n_fock):
            cols[:, sym.index(k, f)] = embed(d, f, space)
    return cols


def reduced_dicke_state(rho, sym):
    """Trace the boson out of a symmetric-space density matrix (Dicke basis result)."""
    d, f = sym.n_dicke, sym.n_fock
    rho = np.asarray(rho)
    if rho.ndim == 1:
        m = rho.reshape(d, f)
        return m @ m.conj().T
    return np.einsum("ikjk->ij", rho.reshape(d, f, d, f))


def spin_ket(label):
    """Product spin state from a string such as ``"+--"``."""
    bits = []
    for ch in label:
        if ch not in "+-":
            raise ValueError(f"bad spin label {label!r}")
        bits.append(1 if ch == "+" else 0)
    psi = np.zeros(2 ** len(bits), dtype=complex)
    psi[int("".join(map(str, bits)), 2)] = 1.0
    return psi
