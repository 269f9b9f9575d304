"""Bright/dark decomposition of degenerate manifold couplings, and the
adiabaticity metric of a ladder under a drive schedule."""
from dataclasses import dataclass, field
import math

import numpy as np

from . import quantum as qc


class DegenerateSpectrumError(ArithmeticError):
    pass


@dataclass
class MSDecomposition:
    """``bright_pairs`` holds ``(lower, upper, coupling)`` with ``block @ lower = coupling * upper``."""

    bright_pairs: list = field(default_factory=list)
    dark_states: list = field(default_factory=list)

    @property
    def couplings(self):
        return np.array([g for _, _, g in self.bright_pairs])

    @property
    def rank(self):
        return len(self.bright_pairs)


def ms_decompose(coupling_block, rtol=None):
    """Singular-value factorisation of an ``upper x lower`` coupling block."""
    block = np.atleast_2d(np.asarray(coupling_block, dtype=complex))
    if not np.all(np.isfinite(block)):
        raise ValueError("coupling block contains non-finite entries")
    u, s, vh = np.linalg.svd(block)
    if rtol is None:
        rtol = max(block.shape) * np.finfo(float).eps
    cutoff = rtol * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff)) if s.size and s[0] > 0 else 0
    lower_states = vh.conj().T
    pairs = [(lower_states[:, i], u[:, i], float(s[i])) for i in range(rank)]
    dark = [lower_states[:, i] for i in range(rank, block.shape[1])]
    return MSDecomposition(pairs, dark)


def manifold_basis(n, spin_excitations, fock, space):
    """All product spin configurations with a fixed excitation count, times ``|fock>``."""
    states = []
    for idx in range(2**n):
        if bin(idx).count("1") == spin_excitations:
            spin = np.zeros(2**n, dtype=complex)
            spin[idx] = 1.0
            states.append(qc.embed(spin, fock, space))
    return np.array(states).T


def coupling_block(hamiltonian, upper, lower):
    """``<u_i|H|l_j>`` for basis matrices whose columns are the manifold states."""
    return upper.conj().T @ hamiltonian @ lower


_S6 = 1.0 / math.sqrt(6.0)
_S2 = 1.0 / math.sqrt(2.0)


def _combo(terms):
    return sum(c * qc.spin_ket(label) for c, label in terms)


def dark_state_catalogue_n3(m):
    """Decoupled states for three spins with ``m`` total excitations.

    m = 1: the two dark states left beside the ``|D_3^(1)>|0> <-> |--->|1>`` pair.
    m = 2: the two decoupled pairs ``(xi_2, eta_2)`` and ``(xi_3, eta_3)``, returned
    as ``[xi_2, eta_2, xi_3, eta_3]``; each pair exchanges population only within
    itself. Vectors live in ``HilbertSpace(3, m)``.
    """
    if m not in (1, 2):
        raise ValueError(f"catalogue covers m = 1 or 2 only, got {m}")
    space = qc.HilbertSpace(3, m)
    single_a = _combo([(_S6, "+--"), (-2 * _S6, "-+-"), (_S6, "--+")])
    single_b = _combo([(_S2, "+--"), (-_S2, "--+")])
    if m == 1:
        return [qc.embed(single_a, 0, space), qc.embed(single_b, 0, space)]
    double_a = _combo([(_S6, "++-"), (-2 * _S6, "+-+"), (_S6, "-++")])
    double_b = _combo([(_S2, "++-"), (-_S2, "-++")])
    return [
        qc.embed(double_a, 0, space),
        qc.embed(single_a, 1, space),
        qc.embed(double_b, 0, space),
        qc.embed(single_b, 1, space),
    ]


def adiabaticity_metric(ladder, schedule, grid=2001):
    """``max_t max_{l != k} |<E_l| dH/dt |E_k>| / (E_k - E_l)^2`` over a time grid.

    ``dH/dt = (d delta/dt) dH/d delta`` uses the schedule's analytic rate. ``grid``
    is either an array of times or a sample count spanning the schedule window.
    """
    if np.ndim(grid) == 0:
        grid = np.linspace(0.0, schedule.duration, int(grid))
    times = np.asarray(grid, dtype=float)
    h0 = ladder.matrix(0.0)
    dh = ladder.detuning_derivative()
    deltas = np.array([schedule.detuning(t) for t in times])
    rates = np.array([schedule.rate(t) for t in times])
    energies, vecs = np.linalg.eigh(h0[None] + deltas[:, None, None] * dh[None])

    gaps = np.abs(energies[:, :, None] - energies[:, None, :])
    k = ladder.levels
    off = ~np.eye(k, dtype=bool)
    min_gap = gaps[:, off].min() if k > 1 else np.inf
    # relative to the larger of the coupling and the detuning excursion
    floor = 1e-6 * max(ladder.lambda_base, float(np.max(np.abs(deltas), initial=0.0)))
    if min_gap <= floor:
        t_bad = times[np.argmin(gaps[:, off].min(axis=1))]
        raise DegenerateSpectrumError(
            f"spectral gap {min_gap:.3g} below {floor:.3g} at t = {t_bad:.6g} s"
        )
    if not np.any(rates):
        return 0.0
    elems = np.einsum("tki,kl,tlj->tij", vecs.conj(), dh, vecs) * rates[:, None, None]
    ratio = np.abs(elems[:, off]) / gaps[:, off] ** 2
    return float(ratio.max())
