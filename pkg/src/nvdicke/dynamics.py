"""Fixed-step RK4 propagation of pure states and Lindblad density matrices.

Step size starts at ``min(max_step, 2*pi / (steps_per_period * omega_fast))``
where ``omega_fast`` is the largest spectral radius of H seen on a coarse scan
of the window (or an explicit modulation frequency, whichever is larger). The
step is accepted once a run at twice that step agrees with it on the final
state to ``relative_tolerance``; otherwise it is halved and checked again.
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)


class IntegrationError(RuntimeError):
    def __init__(self, message, time=None):
        super().__init__(message if time is None else f"{message} at t = {time:.9g} s")
        self.time = time


class CutoffError(IntegrationError):
    """Population reached the highest retained Fock level."""


@dataclass(frozen=True)
class PropagatorConfig:
    max_step: float = 1e-8
    relative_tolerance: float = 1e-7
    norm_guard: float = 1e-8
    sample_stride: int = 0  # 0 picks a stride giving about ``target_samples`` samples
    target_samples: int = 400
    steps_per_period: int = 200
    max_refinements: int = 8
    leakage_guard: float = 1e-6
    store_states: bool = True

    def __post_init__(self):
        if not self.max_step > 0:
            raise ValueError("max_step must be > 0")
        if not 0 < self.relative_tolerance <= 1e-3:
            raise ValueError("relative_tolerance must lie in (0, 1e-3]")
        if self.sample_stride < 0:
            raise ValueError("sample_stride must be >= 0")


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    observables: dict
    final_state: np.ndarray
    steps: int
    step_size: float
    refinement_error: float
    extras: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.observables[name]


class AffineHamiltonian:
    """``H(t) = h0 + coeff(t) * h1``; callable like any other Hamiltonian source.

    The master-equation integrator recognises this form and precomputes the
    Liouvillian once instead of rebuilding it every stage.
    """

    def __init__(self, h0, h1, coeff):
        self.h0 = np.asarray(h0, dtype=complex)
        self.h1 = np.asarray(h1, dtype=complex)
        self.coeff = coeff

    def __call__(self, t):
        return self.h0 + self.coeff(t) * self.h1


def _is_diagonal(m):
    return np.count_nonzero(m - np.diag(np.diag(m))) == 0


def _as_source(hamiltonian):
    if callable(hamiltonian):
        return hamiltonian, False
    h = np.asarray(hamiltonian, dtype=complex)
    return (lambda t: h), True


def fastest_frequency(source, t_span, samples=9, spread=False):
    """Largest spectral radius of H (or eigenvalue spread) over a coarse scan."""
    t0, t1 = t_span
    best = 0.0
    for t in np.linspace(t0, t1, samples):
        h = source(t)
        ev = np.linalg.eigvalsh(0.5 * (h + h.conj().T))
        best = max(best, float(ev[-1] - ev[0]) if spread else float(np.max(np.abs(ev))))
    return best


def _initial_steps(source, t_span, cfg, frequency_hint):
    duration = t_span[1] - t_span[0]
    omega = frequency_hint or 0.0
    if source is not None:
        omega = max(omega, fastest_frequency(source, t_span))
    h = cfg.max_step
    if omega > 0:
        h = min(h, 2 * math.pi / (cfg.steps_per_period * omega))
    return max(1, math.ceil(duration / h))


def _rk4(rhs, y0, t_span, n_steps, cfg, sample=None):
    """Integrate ``dy/dt = rhs(t, y)`` in ``n_steps`` equal steps.

    ``sample(t, y)`` is called every stride steps (and at both ends) when given.
    """
    t0, t1 = t_span
    h = (t1 - t0) / n_steps
    stride = cfg.sample_stride or max(1, n_steps // cfg.target_samples)
    y = y0
    if sample is not None:
        sample(t0, y)
    for i in range(n_steps):
        t = t0 + i * h
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + (0.5 * h) * k1)
        k3 = rhs(t + 0.5 * h, y + (0.5 * h) * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if sample is not None and ((i + 1) % stride == 0 or i + 1 == n_steps):
            sample(t0 + (i + 1) * h, y)
    return y


def _refine(run, n_steps, cfg, distance, t_end=None):
    """Halve the step until successive final states agree to the tolerance.

    The first accepted candidate is ``n_steps``, checked against a run at twice
    the step.

    ``run(steps, record)`` returns the final state, or ``(recorder, final)``
    when recording. Guard violations on a not-yet-converged run trigger another
    halving; Fock-cutoff violations are physical and propagate.
    """
    n_steps = max(1, math.ceil(n_steps / 2))
    coarse = run(n_steps, record=False)
    err = math.inf
    for _ in range(cfg.max_refinements):
        n_steps *= 2
        try:
            rec, fine = run(n_steps, record=True)
        except CutoffError:
            raise
        except IntegrationError:
            rec, fine = None, run(n_steps, record=False)
        err = distance(coarse, fine)
        if err <= cfg.relative_tolerance and rec is not None:
            return rec, fine, n_steps, err
        log.debug("refining: %d steps, change %.3g", n_steps, err)
        coarse = fine
    raise IntegrationError(
        f"step refinement did not converge below {cfg.relative_tolerance:g} "
        f"after {cfg.max_refinements} halvings (last change {err:.3g})",
        t_end,
    )


def _max_abs_diff(x, y):
    return float(np.max(np.abs(x - y)))


class _Recorder:
    def __init__(self, observables, check, store):
        self.observables = observables or {}
        self.check = check
        self.store = store
        self.times = []
        self.states = []
        self.values = {name: [] for name in self.observables}

    def __call__(self, t, y):
        self.check(t, y)
        self.times.append(t)
        if self.store:
            self.states.append(y.copy())
        for name, fn in self.observables.items():
            self.values[name].append(fn(y))

    def trajectory(self, final, n_steps, h, err):
        return Trajectory(
            times=np.array(self.times),
            states=self.states,
            observables={k: np.array(v) for k, v in self.values.items()},
            final_state=final,
            steps=n_steps,
            step_size=h,
            refinement_error=err,
        )


def _leak_check(leakage, cfg):
    def check(t, y):
        if leakage is not None:
            value = leakage(y)
            if value > cfg.leakage_guard:
                raise CutoffError(
                    f"top Fock level population {value:.3g} exceeds {cfg.leakage_guard:g}", t
                )
    return check


def evolve_schrodinger(hamiltonian, psi0, t_span, cfg=None, observables=None,
                       leakage=None, frequency_hint=None, n_steps=None):
    """Propagate ``i d psi/dt = H(t) psi``.

    ``hamiltonian`` is a matrix or a callable ``t -> matrix``. ``observables``
    maps names to ``f(psi) -> float`` and is sampled along the way; a
    ``leakage`` callable is recorded and guarded. Passing ``n_steps`` fixes
    the step count and skips refinement.
    """
    cfg = cfg or PropagatorConfig()
    source, _ = _as_source(hamiltonian)
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError("initial state is not normalised")
    t0, t1 = t_span
    if t1 <= t0:
        raise ValueError("t_span must be increasing")

    if isinstance(source, AffineHamiltonian) and _is_diagonal(source.h1):
        h0, d1, coeff = -1j * source.h0, -1j * np.diag(source.h1), source.coeff

        def rhs(t, psi):
            return h0 @ psi + coeff(t) * (d1 * psi)
    else:
        def rhs(t, psi):
            return -1j * (source(t) @ psi)

    leak_check = _leak_check(leakage, cfg)

    def check(t, psi):
        drift = abs(np.linalg.norm(psi) - 1.0)
        if drift > cfg.norm_guard:
            raise IntegrationError(f"norm drift {drift:.3g} beyond guard {cfg.norm_guard:g}", t)
        leak_check(t, psi)

    def run(steps, record):
        if not record:
            return _rk4(rhs, psi0, t_span, steps, cfg)
        rec = _Recorder(observables, check, cfg.store_states)
        if leakage is not None:
            rec.observables = dict(rec.observables, leakage=leakage)
            rec.values["leakage"] = []
        final = _rk4(rhs, psi0, t_span, steps, cfg, rec)
        return rec, final

    if n_steps is None:
        rec, final, n_steps, err = _refine(
            run, _initial_steps(source, t_span, cfg, frequency_hint), cfg, _max_abs_diff, t_span[1]
        )
    else:
        (rec, final), err = run(n_steps, record=True), 0.0
    return rec.trajectory(final, n_steps, (t1 - t0) / n_steps, err)


def _gather_form(op):
    """``(cols, vals)`` if every row of ``op`` has at most one nonzero, else None."""
    nz = op != 0
    if np.any(nz.sum(axis=1) > 1):
        return None
    cols = np.where(nz.any(axis=1), nz.argmax(axis=1), 0)
    vals = op[np.arange(op.shape[0]), cols] * nz.any(axis=1)
    return cols, vals


class _Sandwich:
    """``rho -> op @ rho @ op^dag``, by index gathering when ``op`` allows it."""

    def __init__(self, op):
        self.op = op
        self.gather = _gather_form(op)
        if self.gather is not None:
            cols, vals = self.gather
            self.weights = np.outer(vals, vals.conj())
            self.index = np.ix_(cols, cols)

    def __call__(self, rho):
        if self.gather is not None:
            return self.weights * rho[self.index]
        return self.op @ rho @ self.op.conj().T


class _ThermalGenerator:
    """Right-hand side of the master equation for a Hermitian ``rho``.

    ``-i(Heff rho - rho Heff^dag)`` with ``Heff = H - i D`` equals ``-i(Y - Y^dag)``
    for ``Y = Heff rho``, so the coherent part costs one matrix product.
    """

    def __init__(self, a, gamma, n_bar):
        a = np.asarray(a, dtype=complex)
        ad = a.conj().T
        damping = 0.5 * gamma * ((n_bar + 1.0) * (ad @ a) + n_bar * (a @ ad))
        diag = np.diag(damping)
        self.damp_diag = diag.real.copy() if np.allclose(damping, np.diag(diag)) else None
        self.damp = damping
        self.down = _Sandwich(a) if gamma else None
        self.up = _Sandwich(ad) if gamma and n_bar else None
        self.rate_down = gamma * (n_bar + 1.0)
        self.rate_up = gamma * n_bar

    def __call__(self, h, rho):
        y = h @ rho
        if self.damp_diag is not None:
            y = y - 1j * (self.damp_diag[:, None] * rho)
        else:
            y = y - 1j * (self.damp @ rho)
        out = -1j * (y - y.conj().T)
        if self.down is not None:
            out += self.rate_down * self.down(rho)
        if self.up is not None:
            out += self.rate_up * self.up(rho)
        return out


def _commutator_super(h):
    eye = sp.identity(h.shape[0], dtype=complex, format="csr")
    hs = sp.csr_matrix(h)
    return -1j * (sp.kron(hs, eye) - sp.kron(eye, hs.T))


def _liouvillian_parts(source, a, gamma, n_bar):
    """Row-major vectorised generator ``L(t) = L0 + coeff(t) L1`` for an affine source.

    ``vec(A rho B) = kron(A, B^T) vec(rho)``. ``L1`` is returned as a vector when
    ``h1`` is diagonal so it can be applied elementwise.
    """
    a = sp.csr_matrix(np.asarray(a, dtype=complex))
    ad = a.conj().T.tocsr()
    eye = sp.identity(a.shape[0], dtype=complex, format="csr")

    def dissipator(c):
        cdc = (c.conj().T @ c).tocsr()
        return sp.kron(c, c.conj()) - 0.5 * (sp.kron(cdc, eye) + sp.kron(eye, cdc.T))

    l0 = _commutator_super(source.h0)
    if gamma:
        l0 = l0 + gamma * (n_bar + 1.0) * dissipator(a)
        if n_bar:
            l0 = l0 + gamma * n_bar * dissipator(ad)
    h1 = source.h1
    if _is_diagonal(h1):
        d = np.diag(h1)
        l1 = (-1j * (d[:, None] - d[None, :])).ravel()
    else:
        l1 = _commutator_super(h1).tocsr()
    return l0.tocsr(), l1


def lindblad_rhs(rho, hamiltonian, a, gamma, n_bar):
    """``-i[H, rho]`` plus the thermal-boson dissipator with rates Gamma(n+1), Gamma n.

    Plain dense form; the integrator uses an equivalent cheaper evaluation.
    """
    ad = a.conj().T
    out = -1j * (hamiltonian @ rho - rho @ hamiltonian)
    out += gamma * (n_bar + 1.0) * (a @ rho @ ad - 0.5 * (ad @ a @ rho + rho @ ad @ a))
    out += gamma * n_bar * (ad @ rho @ a - 0.5 * (a @ ad @ rho + rho @ a @ ad))
    return out


def evolve_lindblad(hamiltonian, rho0, gamma, n_bar, t_span, cfg=None, *, a,
                    observables=None, leakage=None, frequency_hint=None, n_steps=None):
    """Propagate the master equation with a thermal dissipator on mode ``a``."""
    cfg = cfg or PropagatorConfig()
    if gamma < 0 or n_bar < 0:
        raise ValueError("gamma and n_bar must be non-negative")
    source, is_constant = _as_source(hamiltonian)
    rho0 = np.asarray(rho0, dtype=complex)
    t0, t1 = t_span
    if t1 <= t0:
        raise ValueError("t_span must be increasing")
    dim = rho0.shape[0]
    if is_constant:
        source = AffineHamiltonian(source(t0), np.zeros((dim, dim)), lambda t: 0.0)

    if isinstance(source, AffineHamiltonian):
        l0, l1 = _liouvillian_parts(source, a, gamma, n_bar)
        coeff = source.coeff
        diag_l1 = isinstance(l1, np.ndarray)

        def vec_rhs(t, y):
            c = coeff(t)
            out = l0 @ y
            if c:
                out += c * (l1 * y if diag_l1 else l1 @ y)
            return out

        def integrate(steps, sample=None):
            wrapped = None if sample is None else (lambda t, y: sample(t, y.reshape(dim, dim)))
            return _rk4(vec_rhs, rho0.ravel(), t_span, steps, cfg, wrapped).reshape(dim, dim)
    else:
        generator = _ThermalGenerator(a, gamma, n_bar)

        def integrate(steps, sample=None):
            return _rk4(lambda t, rho: generator(source(t), rho), rho0, t_span, steps, cfg, sample)

    leak_check = _leak_check(leakage, cfg)

    def check(t, rho):
        drift = abs(np.trace(rho).real - 1.0)
        if drift > cfg.norm_guard:
            raise IntegrationError(f"trace drift {drift:.3g} beyond guard {cfg.norm_guard:g}", t)
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        if herm > cfg.norm_guard:
            raise IntegrationError(f"hermiticity loss {herm:.3g}", t)
        leak_check(t, rho)

    # the Liouvillian oscillates at differences of H eigenvalues
    hint = max(frequency_hint or 0.0, fastest_frequency(source, t_span, spread=True))

    def run(steps, record):
        if not record:
            return integrate(steps)
        rec = _Recorder(observables, check, cfg.store_states)
        if leakage is not None:
            rec.observables = dict(rec.observables, leakage=leakage)
            rec.values["leakage"] = []
        final = integrate(steps, rec)
        return rec, final

    if n_steps is None:
        rec, final, n_steps, err = _refine(
            run, _initial_steps(None, t_span, cfg, hint), cfg, _max_abs_diff, t_span[1]
        )
    else:
        (rec, final), err = run(n_steps, record=True), 0.0
    lowest = np.linalg.eigvalsh(0.5 * (final + final.conj().T))[0]
    if lowest < -1e-8:
        raise IntegrationError(f"density matrix lost positivity ({lowest:.3g})", t1)
    return rec.trajectory(final, n_steps, (t1 - t0) / n_steps, err)
