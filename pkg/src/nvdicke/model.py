"""Physical parameters, drive schedules and the Hamiltonian hierarchy.

Every frequency (nu, lambda, delta, Omega, Gamma) is an angular frequency in
rad/s with hbar = 1, so the "MHz" figures quoted for the cantilever are read as
1e6 rad/s. That reading is the one consistent with the cantilever's quoted
zero-point amplitude and its 114 uK operating temperature:

>>> round(zero_point_amplitude(CANTILEVER["mass"], 14.87e6) * 1e13, 2)
6.98
>>> round(HBAR * 14.87e6 / K_B * 1e6, 1)
113.6
"""
from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy.constants import hbar as HBAR, k as K_B

from . import quantum as qc
from .dynamics import AffineHamiltonian

# Device geometry. Documentation only; none of it enters the dynamics.
CANTILEVER = {
    "length": 5e-6,
    "width": 50e-9,
    "thickness": 50e-9,
    "mass": 7.28e-18,
    # lambda_j = chi_e * B_g^j * z_0^j, evaluated once to the value below
    "field_gradient": 7.8e6,  # T/m
    "tip_distance": 25e-9,
    "tip_spacing": 150e-9,
}


class ParameterError(ValueError):
    """Invalid physical input. ``key`` is the config name of the offending field."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


def zero_point_amplitude(mass, nu):
    return math.sqrt(HBAR / (2.0 * mass * nu))


@dataclass(frozen=True)
class PhysicalParams:
    nu: float = 14.87e6
    lambda_base: float = 0.96e6
    coupling_error: float = 0.0
    quality_factor: float = 1e5
    temperature: float = 114e-6
    n_spins: int = 3

    def __post_init__(self):
        checks = [
            ("nu", math.isfinite(self.nu) and self.nu > 0, "must be > 0"),
            ("lambda", math.isfinite(self.lambda_base) and self.lambda_base >= 0, "must be >= 0"),
            ("coupling_error", math.isfinite(self.coupling_error), "must be finite"),
            ("quality_factor", self.quality_factor > 0, "must be > 0"),
            ("temperature", math.isfinite(self.temperature) and self.temperature >= 0, "must be >= 0"),
            ("n_spins", int(self.n_spins) == self.n_spins and self.n_spins >= 1, "must be a positive integer"),
        ]
        for key, ok, msg in checks:
            if not ok:
                raise ParameterError(key, msg)
        # raises for a too-large coupling error
        per_spin_couplings(self)

    @property
    def gamma(self):
        return heating_rate(self.nu, self.quality_factor)

    @property
    def n_bar(self):
        return thermal_occupation(self.temperature, self.nu)

    def with_(self, **changes):
        return replace(self, **changes)



def thermal_occupation(temperature, nu):
    """Bose occupation ``1 / (exp(hbar nu / k_B T) - 1)``; 0 at T = 0."""
    if temperature < 0 or nu <= 0:
        raise ValueError("need temperature >= 0 and nu > 0")
    if temperature == 0:
        return 0.0
    x = HBAR * nu / (K_B * temperature)
    if x > 700:
        return 0.0
    return 1.0 / math.expm1(x)


def heating_rate(nu, quality_factor):
    if quality_factor <= 0:
        raise ValueError("quality factor must be > 0")
    return nu / quality_factor


def per_spin_couplings(params):
    """``lambda_j = [1 - (j - 1) * Delta] * lambda`` for j = 1..n."""
    j = np.arange(params.n_spins)
    lam = (1.0 - j * params.coupling_error) * params.lambda_base
    if np.any(lam < 0):
        raise ParameterError(
            "coupling_error",
            f"coupling_error {params.coupling_error} makes a per-spin coupling negative",
        )
    return lam


PAPER_PRESET = PhysicalParams()


# -- drive schedules -----------------------------------------------------------

SQUARE = "square"
LINEAR_CHIRP = "linear_chirp"


@dataclass(frozen=True)
class PulseSchedule:
    """Detuning ``delta(t) = nu - Omega(t)`` over ``[0, duration]``.

    Outside the window the boundary value is held.
    """

    kind: str
    duration: float
    delta_constant: float = 0.0
    delta_start: float = 0.0
    delta_end: float = 0.0

    def __post_init__(self):
        if self.kind not in (SQUARE, LINEAR_CHIRP):
            raise ParameterError("kind", f"unknown schedule kind {self.kind!r}")
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ParameterError("duration", "must be finite and > 0")
        for key in ("delta_constant", "delta_start", "delta_end"):
            if not math.isfinite(getattr(self, key)):
                raise ParameterError(key, "must be finite")

    @classmethod
    def square(cls, duration, delta=0.0):
        return cls(SQUARE, duration, delta_constant=delta)

    @classmethod
    def linear_chirp(cls, delta_start, delta_end, duration):
        return cls(LINEAR_CHIRP, duration, delta_start=delta_start, delta_end=delta_end)

    def reversed(self):
        if self.kind == SQUARE:
            return self
        return replace(self, delta_start=self.delta_end, delta_end=self.delta_start)

    def detuning(self, t):
        if self.kind == SQUARE:
            return self.delta_constant
        s = min(max(t / self.duration, 0.0), 1.0)
        return self.delta_start + (self.delta_end - self.delta_start) * s

    def rate(self, t):
        """Analytic ``d delta / dt``."""
        if self.kind == SQUARE or not 0.0 <= t <= self.duration:
            return 0.0
        return (self.delta_end - self.delta_start) / self.duration

    def drive(self, t, nu):
        return nu - self.detuning(t)

    def check_drive(self, nu):
        """The microwave Rabi frequency must stay positive over the window."""
        worst = max(self.detuning(0.0), self.detuning(self.duration))
        if worst >= nu:
            raise ParameterError(
                "schedule", f"detuning {worst:.4g} >= nu {nu:.4g} implies a non-positive drive"
            )
        return self


def detuning_at(schedule, t):
    return schedule.detuning(t)


# -- Hamiltonians --------------------------------------------------------------

def hamiltonian_rwa(space, couplings, delta):
    """Tavis-Cummings form in the frame co-rotating with the detuning.

    ``H = sum_j (lambda_j / 2)(a |+>_j<-| + h.c.) - delta * sum_j |+>_j<+|``.
    """
    couplings = np.asarray(couplings, dtype=float)
    if couplings.shape != (space.n_spins,):
        raise qc.DimensionError(
            f"{couplings.size} couplings for {space.n_spins} spins"
        )
    a = qc.boson_annihilation(space)
    h = np.zeros((space.dim, space.dim), dtype=complex)
    for j, lam in enumerate(couplings, start=1):
        term = a @ qc.spin_raise(space, j)
        h += 0.5 * lam * (term + term.conj().T)
        h -= delta * qc.spin_excited_projector(space, j)
    return h


class InteractionPictureHamiltonian:
    """Resonant-carrier interaction-picture Hamiltonian before the RWA.

    ``H(t) = sum_j (Omega/2) sz_j + sum_j (lambda_j/2)(a e^{-i nu t} + a^dag e^{i nu t}) sx_j``
    in the dressed basis, i.e. the bare-frame drive ``|0><-1| + h.c.`` and the
    bare-frame ``sigma_z`` coupling. ``omega_rabi`` may be a float or a
    callable of time.
    """

    def __init__(self, space, params, omega_rabi):
        self.space = space
        self.nu = params.nu
        self.omega_rabi = omega_rabi
        couplings = per_spin_couplings(params)
        if couplings.size != space.n_spins:
            raise qc.DimensionError("params.n_spins does not match the space")
        a = qc.boson_annihilation(space)
        self.drive_op = 0.5 * sum(qc.spin_sigma_z(space, j) for j in range(1, space.n_spins + 1))
        self.lower = sum(
            0.5 * lam * a @ qc.spin_sigma_x(space, j)
            for j, lam in enumerate(couplings, start=1)
        )
        self.raise_ = self.lower.conj().T

    def omega(self, t):
        return self.omega_rabi(t) if callable(self.omega_rabi) else self.omega_rabi

    def __call__(self, t):
        phase = np.exp(-1j * self.nu * t)
        return self.omega(t) * self.drive_op + phase * self.lower + phase.conjugate() * self.raise_


def hamiltonian_interaction_picture(space, params, omega_rabi, t):
    return InteractionPictureHamiltonian(space, params, omega_rabi)(t)


@dataclass(frozen=True)
class LadderModel:
    """Bright chain ``|D_n^(k)>|m - k>``, k = 0..K-1, coupled nearest-neighbour.

    Levels are stored in ascending spin-excitation order; ``top_down=True``
    reverses to the ``{|D_n^(m)>|0>, ..., |D_n^(0)>|m>}`` display order.
    """

    n: int
    m: int
    lambda_base: float
    couplings: np.ndarray = field(repr=False)
    detuning_weights: np.ndarray = field(repr=False)
    basis_labels: tuple = ()

    @property
    def levels(self):
        return len(self.detuning_weights)

    def matrix(self, delta, top_down=False):
        h = np.diag(-self.detuning_weights * delta).astype(complex)
        idx = np.arange(self.levels - 1)
        h[idx, idx + 1] = self.couplings
        h[idx + 1, idx] = self.couplings
        return h[::-1, ::-1].copy() if top_down else h

    def detuning_derivative(self):
        """``dH/d delta``; constant because the ladder is linear in delta."""
        return np.diag(-self.detuning_weights.astype(float)).astype(complex)

    def source(self, schedule):
        """Time-indexed Hamiltonian for :func:`nvdicke.dynamics.evolve_schrodinger`."""
        return AffineHamiltonian(self.matrix(0.0), self.detuning_derivative(), schedule.detuning)

    def initial_state(self):
        """All spins down with m phonons: level k = 0."""
        psi = np.zeros(self.levels, dtype=complex)
        psi[0] = 1.0
        return psi

    def target_state(self):
        psi = np.zeros(self.levels, dtype=complex)
        psi[-1] = 1.0
        return psi


def effective_ladder(n, m, lam):
    if n < 1 or m < 0:
        raise ValueError(f"need n >= 1 and m >= 0, got n={n}, m={m}")
    levels = min(n, m) + 1
    couplings = np.array(
        [0.5 * lam * math.sqrt((m - k) * (k + 1) * (n - k)) for k in range(levels - 1)]
    )
    labels = tuple(f"|D_{n}^({k})>|{m - k}>" for k in range(levels))
    return LadderModel(n, m, lam, couplings, np.arange(levels), labels)


def hamiltonian_symmetric(sym, lam, delta):
    """Equal-coupling ``hamiltonian_rwa`` restricted to Dicke (x) Fock."""
    a = qc.boson_annihilation_symmetric(sym)
    jp = qc.collective_raise_symmetric(sym)
    term = a @ jp
    return 0.5 * lam * (term + term.conj().T) - delta * qc.excitation_count_symmetric(sym)


def symmetric_source(sym, lam, schedule):
    return AffineHamiltonian(
        hamiltonian_symmetric(sym, lam, 0.0), -qc.excitation_count_symmetric(sym), schedule.detuning
    )


def rwa_source(space, couplings, schedule):
    return AffineHamiltonian(
        hamiltonian_rwa(space, couplings, 0.0),
        hamiltonian_rwa(space, np.zeros(space.n_spins), 1.0),
        schedule.detuning,
    )
