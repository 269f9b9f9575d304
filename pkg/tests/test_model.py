import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nvdicke import quantum as qc
from nvdicke.model import (
    PAPER_PRESET, InteractionPictureHamiltonian, ParameterError, PhysicalParams, PulseSchedule,
    effective_ladder, hamiltonian_rwa, hamiltonian_symmetric, heating_rate, per_spin_couplings,
    rwa_source, symmetric_source, thermal_occupation,
)

LAM = PAPER_PRESET.lambda_base


def test_thermal_occupation_preset():
    # 1 / (exp(hbar nu / k_B T) - 1) at 114 uK; exactly 1/(e - 1) at T = hbar nu / k_B
    assert abs(PAPER_PRESET.n_bar - 0.582) < 0.005
    t_e = 1.054571817e-34 * 14.87e6 / 1.380649e-23
    assert math.isclose(thermal_occupation(t_e, 14.87e6), 1 / (math.e - 1), rel_tol=1e-9)
    assert thermal_occupation(0.0, 1.0) == 0.0
    assert thermal_occupation(1e-12, 1e9) == 0.0


def test_heating_rate():
    assert heating_rate(14.87e6, 1e4) == pytest.approx(1487.0)
    assert PAPER_PRESET.gamma == pytest.approx(148.7)
    assert PAPER_PRESET.with_(quality_factor=math.inf).gamma == 0.0


def test_per_spin_couplings():
    p = PAPER_PRESET.with_(coupling_error=0.02)
    assert np.allclose(per_spin_couplings(p), LAM * np.array([1.0, 0.98, 0.96]))
    assert np.allclose(per_spin_couplings(PAPER_PRESET), LAM)


@pytest.mark.parametrize("changes, key", [
    ({"lambda_base": -1.0}, "lambda"),
    ({"nu": 0.0}, "nu"),
    ({"quality_factor": -5.0}, "quality_factor"),
    ({"temperature": -1e-6}, "temperature"),
    ({"n_spins": 0}, "n_spins"),
    ({"coupling_error": 0.6}, "coupling_error"),
    ({"nu": float("nan")}, "nu"),
])
def test_parameter_errors_name_key(changes, key):
    with pytest.raises(ParameterError) as err:
        PhysicalParams(**changes)
    assert err.value.key == key


def test_schedules():
    s = PulseSchedule.linear_chirp(-2.0, 6.0, 4.0)
    assert s.detuning(0.0) == -2.0 and s.detuning(4.0) == 6.0 and s.detuning(1.0) == 0.0
    assert s.detuning(-1.0) == -2.0 and s.detuning(9.0) == 6.0
    assert s.rate(2.0) == 2.0 and s.rate(5.0) == 0.0
    assert s.reversed().detuning(0.0) == 6.0
    assert s.drive(0.0, 10.0) == 12.0
    sq = PulseSchedule.square(1.0, 0.5)
    assert sq.detuning(0.3) == 0.5 and sq.rate(0.3) == 0.0 and sq.reversed() is sq
    with pytest.raises(ParameterError):
        PulseSchedule.square(0.0)
    with pytest.raises(ParameterError):
        PulseSchedule("triangle", 1.0)
    with pytest.raises(ParameterError):
        PulseSchedule.square(1.0, 20.0).check_drive(10.0)


def brute_rwa(space, couplings, delta):
    """Matrix elements of the Tavis-Cummings form from basis-state rules."""
    h = np.zeros((space.dim, space.dim))
    for i in range(space.dim):
        spins, f = space.unravel(i)
        h[i, i] = -delta * sum(spins)
        for j, lam in enumerate(couplings):
            if spins[j] == 0 and f > 0:  # a sigma+ : absorb a phonon, raise spin j
                up = list(spins)
                up[j] = 1
                k = space.index(up, f - 1)
                h[k, i] += 0.5 * lam * math.sqrt(f)
                h[i, k] += 0.5 * lam * math.sqrt(f)
    return h


@given(st.integers(1, 3), st.integers(0, 3), st.floats(-2, 2), st.floats(0, 0.1))
def test_rwa_against_basis_rules(n, cutoff, delta, err):
    space = qc.HilbertSpace(n, cutoff)
    lam = (1 - err * np.arange(n))
    assert np.allclose(hamiltonian_rwa(space, lam, delta), brute_rwa(space, lam, delta))


@given(st.integers(1, 4), st.integers(0, 3), st.floats(-3, 3))
def test_rwa_conserves_excitations(n, cutoff, delta):
    space = qc.HilbertSpace(n, cutoff)
    h = hamiltonian_rwa(space, LAM * np.linspace(1, 0.9, n), delta * LAM)
    n_ex = qc.excitation_number(space)
    assert qc.is_hermitian(h)
    assert np.max(np.abs(h @ n_ex - n_ex @ h)) < 1e-12 * LAM


def test_rwa_shape_check():
    with pytest.raises(qc.DimensionError):
        hamiltonian_rwa(qc.HilbertSpace(3, 1), [1.0, 1.0], 0.0)


def test_interaction_picture_averages_to_rwa():
    """Over one carrier period in the drive frame only the resonant terms survive."""
    p = PAPER_PRESET.with_(n_spins=2, coupling_error=0.03)
    space = qc.HilbertSpace(2, 2)
    h_ip = InteractionPictureHamiltonian(space, p, p.nu)
    sz = np.real(np.diag(h_ip.drive_op))
    period = 2 * math.pi / p.nu
    samples = 64
    avg = np.zeros((space.dim, space.dim), dtype=complex)
    for t in np.arange(samples) * period / samples:
        u = np.exp(1j * p.nu * t * sz)
        avg += (u[:, None] * h_ip(t) * u.conj()[None, :] - p.nu * np.diag(sz)) / samples
    assert np.allclose(avg, hamiltonian_rwa(space, per_spin_couplings(p), 0.0), atol=1e-6 * LAM)
    assert qc.is_hermitian(h_ip(0.37e-6), tol=1e-6)


def test_ladder_three_spin_couplings():
    d31 = effective_ladder(3, 1, LAM)
    assert d31.couplings[0] == pytest.approx(math.sqrt(3) * LAM / 2, rel=1e-15)
    d32 = effective_ladder(3, 2, LAM)
    h = d32.matrix(0.0, top_down=True)
    assert h[0, 1].real == pytest.approx(LAM, rel=1e-15)
    assert h[1, 2].real == pytest.approx(LAM * math.sqrt(1.5), rel=1e-15)
    assert d32.basis_labels[-1] == "|D_3^(2)>|0>"
    assert np.allclose(d32.matrix(0.4), d32.matrix(0.0) + 0.4 * d32.detuning_derivative())


def test_ladder_saturates_at_n():
    lad = effective_ladder(2, 4, 1.0)
    assert lad.levels == 3
    assert lad.basis_labels == ("|D_2^(0)>|4>", "|D_2^(1)>|3>", "|D_2^(2)>|2>")


def test_ladder_source_is_affine_in_detuning():
    lad = effective_ladder(3, 2, LAM)
    s = PulseSchedule.linear_chirp(-LAM, LAM, 1e-5)
    src = lad.source(s)
    assert np.allclose(src(2.5e-6), lad.matrix(s.detuning(2.5e-6)))


@given(st.integers(1, 4), st.integers(0, 3), st.floats(-2, 2))
def test_symmetric_hamiltonian_is_projection(n, cutoff, delta):
    sym = qc.SymmetricSpace(n, cutoff)
    v = qc.symmetric_isometry(sym)
    full = hamiltonian_rwa(sym.full_space(), np.full(n, LAM), delta * LAM)
    assert np.allclose(v.conj().T @ full @ v, hamiltonian_symmetric(sym, LAM, delta * LAM), atol=1e-6)
    # equal couplings keep the symmetric subspace invariant
    assert np.allclose(full @ v, v @ (v.conj().T @ full @ v), atol=1e-6)


def test_sources_follow_schedule():
    s = PulseSchedule.linear_chirp(-2 * LAM, 3 * LAM, 2e-6)
    space = qc.HilbertSpace(2, 2)
    c = LAM * np.array([1.0, 0.9])
    assert np.allclose(rwa_source(space, c, s)(1e-6), hamiltonian_rwa(space, c, s.detuning(1e-6)))
    sym = qc.SymmetricSpace(3, 2)
    assert np.allclose(symmetric_source(sym, LAM, s)(0.5e-6), hamiltonian_symmetric(sym, LAM, s.detuning(0.5e-6)))
