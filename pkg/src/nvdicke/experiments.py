"""Named, reproducible scenarios built from the model and the integrators.

Closed-system preparations run in the reduced bright ladder (and, where the
couplings are equal, cross-check against the full spin-boson space). Heated
runs use the Dicke (x) Fock representation so the boson operator is defined.
Unequal couplings break permutation symmetry and always run in the full space.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from . import quantum as qc
from .dynamics import PropagatorConfig, evolve_lindblad, evolve_schrodinger
from .model import (
    PAPER_PRESET,
    InteractionPictureHamiltonian,
    PulseSchedule,
    effective_ladder,
    per_spin_couplings,
    rwa_source,
    symmetric_source,
)
from .morris_shore import adiabaticity_metric

# Linear chirp for the two-excitation passage, found by ``tune_chirp`` at the
# default preset: delta runs from -8 lambda to +8 lambda and lambda * duration is
# the dimensionless product below (duration 51.0 us at lambda = 0.96e6 rad/s).
CHIRP_SPAN = 8.0
CHIRP_AREA = 0.96e6 * 51.0e-6
ADIABATIC_THRESHOLD = 0.1
OPEN_FOCK_MARGIN = 6
RESONANT_WINDOW = 30e-6
OPEN_CFG = PropagatorConfig(store_states=False)


class AdiabaticityWarning(UserWarning):
    pass


@dataclass
class ScenarioResult:
    name: str
    final_fidelity: float
    peak_fidelity: float
    peak_time: float
    trajectory: object
    params: object
    schedule: object = None
    excitations: int = 1
    diagnostics: dict = field(default_factory=dict)
    population_labels: tuple = ()


@dataclass
class SweepResult:
    parameter: str
    grid: np.ndarray
    fidelities: dict
    diagnostics: list
    rows: list = field(default_factory=list)


def gate_time(params, n=None):
    """Duration of the resonant single-excitation swap, ``pi / (sqrt(n) lambda)``."""
    n = n or params.n_spins
    return math.pi / (math.sqrt(n) * params.lambda_base)


def default_chirp(params, span=CHIRP_SPAN, area=CHIRP_AREA):
    lam = params.lambda_base
    return PulseSchedule.linear_chirp(-span * lam, span * lam, area / lam)


def _cfg(cfg):
    return cfg or PropagatorConfig()


def _ladder_observables(ladder):
    obs = {f"population_{k}": (lambda psi, k=k: float(abs(psi[k]) ** 2)) for k in range(ladder.levels)}
    obs["fidelity"] = lambda psi: float(abs(psi[-1]) ** 2)
    phonons = np.array([ladder.m - k for k in range(ladder.levels)], dtype=float)
    obs["n_phonon"] = lambda psi: float(phonons @ np.abs(psi) ** 2)
    return obs


def run_ladder(params, m, schedule, cfg=None, name=None, t_end=None, **evolve_kw):
    """Drive ``|-...->|m>`` through the bright ladder toward ``|D_n^(min(n,m))>|m - k>``."""
    schedule.check_drive(params.nu)
    ladder = effective_ladder(params.n_spins, m, params.lambda_base)
    t_end = schedule.duration if t_end is None else t_end
    traj = evolve_schrodinger(
        ladder.source(schedule), ladder.initial_state(), (0.0, t_end), _cfg(cfg),
        observables=_ladder_observables(ladder), **evolve_kw,
    )
    fid = traj["fidelity"]
    i = int(np.argmax(fid))
    return ScenarioResult(
        name=name or f"ladder_n{params.n_spins}_m{m}",
        final_fidelity=float(fid[-1]),
        peak_fidelity=float(fid[i]),
        peak_time=float(traj.times[i]),
        trajectory=traj,
        params=params,
        schedule=schedule,
        excitations=m,
        diagnostics={"steps": traj.steps, "max_leakage": 0.0, "duration": t_end},
        population_labels=ladder.basis_labels,
    )


def run_full_space(params, m, schedule, cfg=None, fock_cutoff=None):
    """Closed evolution of ``|-...->|m>`` under the RWA Hamiltonian with per-spin couplings.

    Returns the result and the final full-space state. Excitation number is
    conserved, so ``fock_cutoff = m + 1`` leaves the top level empty.
    """
    schedule.check_drive(params.nu)
    n = params.n_spins
    space = qc.build_space(n, m + 1 if fock_cutoff is None else fock_cutoff)
    couplings = per_spin_couplings(params)
    target = qc.dicke_state(n, min(n, m))
    psi0 = qc.basis_state(space, (0,) * n, m)
    n_ex = qc.excitation_number(space)
    top = qc.fock_projector(space, space.fock_cutoff)
    obs = {
        "fidelity": lambda psi: qc.fidelity(qc.reduced_spin_state(psi, space), target),
        "n_phonon": lambda psi, num=qc.boson_number(space): float(np.vdot(psi, num @ psi).real),
        "n_excitation": lambda psi: float(np.vdot(psi, n_ex @ psi).real),
    }
    traj = evolve_schrodinger(
        rwa_source(space, couplings, schedule), psi0, (0.0, schedule.duration), _cfg(cfg),
        observables=obs, leakage=lambda psi: float(np.vdot(psi, top @ psi).real),
    )
    fid = traj["fidelity"]
    i = int(np.argmax(fid))
    result = ScenarioResult(
        name=f"full_n{n}_m{m}",
        final_fidelity=float(fid[-1]),
        peak_fidelity=float(fid[i]),
        peak_time=float(traj.times[i]),
        trajectory=traj,
        params=params,
        schedule=schedule,
        excitations=m,
        diagnostics={
            "steps": traj.steps,
            "max_leakage": float(traj["leakage"].max()),
            "excitation_drift": float(np.ptp(traj["n_excitation"])),
            "duration": schedule.duration,
        },
    )
    return result, traj.final_state, space


def run_d31(params=PAPER_PRESET, cfg=None, duration=None, full_space=True):
    """Resonant swap ``|--->|1> -> |D_3^(1)>|0>`` at the gate time."""
    tg = gate_time(params)
    schedule = PulseSchedule.square(duration or tg, 0.0)
    result = run_ladder(params, 1, schedule, cfg, name="d31")
    result.diagnostics["gate_time"] = tg
    if full_space and params.coupling_error == 0:
        full, psi, space = run_full_space(params, 1, schedule, cfg)
        ladder_psi = result.trajectory.final_state
        chain = qc.symmetric_subspace_basis(params.n_spins, 1, space.fock_cutoff)
        embedded = sum(c * v for c, v in zip(ladder_psi, chain))
        result.diagnostics.update(
            full_space_fidelity=full.final_fidelity,
            full_space_agreement=abs(full.final_fidelity - result.final_fidelity),
            full_space_state_distance=float(np.linalg.norm(psi - embedded)),
            excitation_drift=full.diagnostics["excitation_drift"],
        )
    return result


def run_d32_resonant(params=PAPER_PRESET, cfg=None, t_max=RESONANT_WINDOW):
    """Two-excitation ladder at delta = 0; reports the peak target population in ``[0, t_max]``."""
    cfg = _cfg(cfg)
    if cfg.sample_stride == 0:
        cfg = PropagatorConfig(**{**cfg.__dict__, "sample_stride": 1, "store_states": False})
    schedule = PulseSchedule.square(t_max, 0.0)
    result = run_ladder(params, 2, schedule, cfg, name="d32_resonant")
    result.diagnostics["sample_interval"] = result.trajectory.step_size * cfg.sample_stride
    return result


def run_d32_adiabatic(params=PAPER_PRESET, chirp=None, cfg=None, threshold=ADIABATIC_THRESHOLD):
    """Linear-chirp passage ``|--->|2> -> |D_3^(2)>|0>``."""
    chirp = chirp or default_chirp(params)
    ladder = effective_ladder(params.n_spins, 2, params.lambda_base)
    metric = adiabaticity_metric(ladder, chirp)
    if metric >= threshold:
        warnings.warn(
            f"adiabaticity metric {metric:.3g} is not below {threshold:g}", AdiabaticityWarning
        )
    result = run_ladder(params, 2, chirp, cfg, name="d32_adiabatic")
    result.diagnostics.update(adiabaticity_metric=metric, adiabatic=metric < threshold)
    return result


def tune_chirp(params=PAPER_PRESET, span=CHIRP_SPAN, t_start=10e-6, t_step=0.5e-6,
               t_max=200e-6, threshold=ADIABATIC_THRESHOLD, target=0.99, cfg=None):
    """First duration on ``t_start + i * t_step`` meeting both passage conditions.

    Returns ``(schedule, final_population, metric)``.
    """
    lam = params.lambda_base
    ladder = effective_ladder(params.n_spins, 2, lam)
    n_points = int(round((t_max - t_start) / t_step)) + 1
    for i in range(n_points):
        duration = t_start + i * t_step
        chirp = PulseSchedule.linear_chirp(-span * lam, span * lam, duration)
        metric = adiabaticity_metric(ladder, chirp)
        if metric >= threshold:
            continue
        pop = run_ladder(params, 2, chirp, cfg).final_fidelity
        if pop > target:
            return chirp, pop, metric
    raise RuntimeError(f"no chirp duration up to {t_max:g} s reaches population {target}")


# -- open system -----------------------------------------------------------------

def run_open(params, m, schedule, cfg=None, n_bar=None, fock_margin=OPEN_FOCK_MARGIN, name=None):
    """Heated preparation in Dicke (x) Fock with ``Gamma = nu / Q``.

    Fidelity is scored on the spin state with the boson traced out.
    """
    schedule.check_drive(params.nu)
    n = params.n_spins
    sym = qc.SymmetricSpace(n, m + fock_margin)
    if sym.dim ** 2 > qc.MAX_DIM ** 2:
        raise qc.DimensionError("symmetric space exceeds the dense bound")
    k_target = min(n, m)
    rho0 = np.zeros((sym.dim, sym.dim), dtype=complex)
    i0 = sym.index(0, m)
    rho0[i0, i0] = 1.0
    gamma = params.gamma
    n_bar = params.n_bar if n_bar is None else n_bar
    a = qc.boson_annihilation_symmetric(sym)
    num = a.conj().T @ a
    top = np.array([sym.index(k, sym.fock_cutoff) for k in range(sym.n_dicke)])
    obs = {
        "fidelity": lambda r: float(qc.reduced_dicke_state(r, sym)[k_target, k_target].real),
        "n_phonon": lambda r: float(np.trace(num @ r).real),
    }
    for k in range(sym.n_dicke):
        obs[f"population_{k}"] = lambda r, k=k: float(qc.reduced_dicke_state(r, sym)[k, k].real)
    traj = evolve_lindblad(
        symmetric_source(sym, params.lambda_base, schedule), rho0, gamma, n_bar,
        (0.0, schedule.duration), cfg or OPEN_CFG, a=a, observables=obs,
        leakage=lambda r: float(r[top, top].real.sum()),
    )
    fid = traj["fidelity"]
    i = int(np.argmax(fid))
    return ScenarioResult(
        name=name or f"open_n{n}_m{m}",
        final_fidelity=float(fid[-1]),
        peak_fidelity=float(fid[i]),
        peak_time=float(traj.times[i]),
        trajectory=traj,
        params=params,
        schedule=schedule,
        excitations=m,
        diagnostics={
            "steps": traj.steps,
            "gamma": gamma,
            "n_bar": n_bar,
            "max_leakage": float(traj["leakage"].max()),
            "duration": schedule.duration,
        },
        population_labels=tuple(f"|D_{n}^({k})>" for k in range(sym.n_dicke)),
    )


def run_d31_open(params=PAPER_PRESET, cfg=None, n_bar=None):
    return run_open(params, 1, PulseSchedule.square(gate_time(params)), cfg, n_bar, name="d31_heated")


def run_d32_open(params=PAPER_PRESET, chirp=None, cfg=None, n_bar=None):
    chirp = chirp or default_chirp(params)
    return run_open(params, 2, chirp, cfg, n_bar, name="d32_heated")


# -- sweeps ------------------------------------------------------------------------

def _pmap(fn, items, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("sweep grid must be a non-empty 1-d sequence")
    d = np.diff(grid)
    if grid.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("sweep grid must be strictly monotone")
    return grid


def _coupling_point(job):
    params, delta, cfg, chirp = job
    p = params.with_(coupling_error=float(delta))
    d31, _, _ = run_full_space(p, 1, PulseSchedule.square(gate_time(p)), cfg)
    d32, _, _ = run_full_space(p, 2, chirp or default_chirp(p), cfg)
    return {
        "coupling_error": float(delta),
        "fidelity_d31": d31.final_fidelity,
        "fidelity_d32": d32.final_fidelity,
        "max_leakage": max(d31.diagnostics["max_leakage"], d32.diagnostics["max_leakage"]),
        "excitation_drift": max(d31.diagnostics["excitation_drift"], d32.diagnostics["excitation_drift"]),
    }


def sweep_coupling_error(params=PAPER_PRESET, delta_grid=(0.0, 0.01, 0.02, 0.03, 0.04, 0.05),
                         cfg=None, workers=1, chirp=None):
    """Both preparations in the full space with ``lambda_j = [1 - (j-1) Delta] lambda``."""
    grid = _check_grid(delta_grid)
    rows = _pmap(_coupling_point, [(params, d, cfg, chirp) for d in grid], workers)
    return SweepResult(
        parameter="coupling_error",
        grid=grid,
        fidelities={
            "d31": np.array([r["fidelity_d31"] for r in rows]),
            "d32": np.array([r["fidelity_d32"] for r in rows]),
        },
        diagnostics=[{k: r[k] for k in ("max_leakage", "excitation_drift")} for r in rows],
        rows=rows,
    )


def _heating_point(job):
    params, q, cfg, n_bar, chirp = job
    p = params.with_(quality_factor=float(q))
    d31 = run_d31_open(p, cfg, n_bar)
    d32 = run_d32_open(p, chirp, cfg, n_bar)
    return {
        "quality_factor": float(q),
        "gamma": p.gamma,
        "n_bar": d31.diagnostics["n_bar"],
        "fidelity_d31": d31.final_fidelity,
        "fidelity_d32": d32.final_fidelity,
        "max_leakage": max(d31.diagnostics["max_leakage"], d32.diagnostics["max_leakage"]),
    }


def sweep_heating(params=PAPER_PRESET, q_grid=(1e4, 1e5), cfg=None, workers=1, n_bar=None, chirp=None):
    """Heated preparations over quality factors; ``Q = inf`` gives Gamma = 0."""
    grid = _check_grid(q_grid)
    rows = _pmap(_heating_point, [(params, q, cfg, n_bar, chirp) for q in grid], workers)
    return SweepResult(
        parameter="quality_factor",
        grid=grid,
        fidelities={
            "d31": np.array([r["fidelity_d31"] for r in rows]),
            "d32": np.array([r["fidelity_d32"] for r in rows]),
        },
        diagnostics=[{k: r[k] for k in ("gamma", "n_bar", "max_leakage")} for r in rows],
        rows=rows,
    )


def calibrate_n_bar(anchors, params=PAPER_PRESET, n_bar_grid=np.linspace(0.0, 1.0, 11),
                    cfg=None, chirp=None):
    """Least-squares thermal occupation against ``{(Q, "d31"|"d32"): fidelity}`` anchors.

    Returns ``(best_n_bar, residuals)`` with one residual norm per grid value.
    """
    residuals = []
    for nb in n_bar_grid:
        sq = 0.0
        for (q, which), target in anchors.items():
            p = params.with_(quality_factor=q)
            res = run_d31_open(p, cfg, nb) if which == "d31" else run_d32_open(p, chirp, cfg, nb)
            sq += (res.final_fidelity - target) ** 2
        residuals.append(math.sqrt(sq))
    residuals = np.array(residuals)
    return float(np.asarray(n_bar_grid)[np.argmin(residuals)]), residuals


# -- rotating-wave check -------------------------------------------------------------

def validate_rwa(params=PAPER_PRESET, cfg=None, fock_cutoff=6, duration=None):
    """Single-excitation swap under the pre-RWA and post-RWA Hamiltonians.

    The pre-RWA state is carried into the frame of the post-RWA form by
    ``exp(i nu T S_z)`` with ``S_z = sum_j sz_j / 2`` before comparing.
    ``diagnostics["rwa_gap"]`` is ``1 - |<psi_rwa|psi_full>|^2``.
    """
    n = params.n_spins
    if n > 3:
        raise ValueError("RWA validation is limited to n <= 3")
    if duration is None:
        duration = gate_time(params) if params.lambda_base > 0 else 1e-6
    schedule = PulseSchedule.square(duration, 0.0)
    space = qc.build_space(n, fock_cutoff)
    psi0 = qc.basis_state(space, (0,) * n, 1)
    target = qc.dicke_state(n, 1)
    cfg = _cfg(cfg)
    top = qc.fock_projector(space, fock_cutoff)

    def fid(psi):
        return qc.fidelity(qc.reduced_spin_state(psi, space), target)

    leak = lambda psi: float(np.vdot(psi, top @ psi).real)  # noqa: E731
    rwa = evolve_schrodinger(
        rwa_source(space, per_spin_couplings(params), schedule), psi0, (0.0, duration), cfg,
        observables={"fidelity": fid}, leakage=leak,
    )
    full_h = InteractionPictureHamiltonian(space, params, lambda t: schedule.drive(t, params.nu))
    full = evolve_schrodinger(
        full_h, psi0, (0.0, duration), cfg, observables={"fidelity": fid}, leakage=leak,
        frequency_hint=params.nu,
    )
    sz_half = np.real(np.diag(full_h.drive_op))
    frame = np.exp(1j * params.nu * duration * sz_half)
    psi_full = frame * full.final_state
    gap = 1.0 - abs(np.vdot(rwa.final_state, psi_full)) ** 2
    return ScenarioResult(
        name="rwa",
        final_fidelity=float(rwa["fidelity"][-1]),
        peak_fidelity=float(rwa["fidelity"].max()),
        peak_time=float(rwa.times[int(np.argmax(rwa["fidelity"]))]),
        trajectory=rwa,
        params=params,
        schedule=schedule,
        diagnostics={
            "rwa_gap": float(max(gap, 0.0)),
            "full_fidelity": float(full["fidelity"][-1]),
            "fidelity_gap": abs(float(full["fidelity"][-1]) - float(rwa["fidelity"][-1])),
            "max_leakage": float(full["leakage"].max()),
            "steps": full.steps,
            "duration": duration,
        },
    )


SCENARIOS = {
    "d31": "one excitation: resonant swap |--->|1> -> |D_3^(1)>|0> at t = pi/(sqrt(3) lambda); expect fidelity 1",
    "d32-resonant": "two excitations at delta = 0; expect a peak target population of about 0.95",
    "d32-adiabatic": "two excitations under the tuned linear chirp; expect final population > 0.99",
    "tune-chirp": "re-run the chirp-duration search that fixes the d32-adiabatic preset",
    "rwa": "swap under the pre- and post-rotating-wave Hamiltonians; reports the terminal state gap",
    "d31-heated": "d31 with the thermal cantilever dissipator (Gamma = nu/Q)",
    "d32-heated": "d32-adiabatic with the thermal cantilever dissipator",
}

SWEEPS = {
    "heating": "fidelity of both preparations versus quality factor Q (Gamma = nu/Q)",
    "coupling": "fidelity of both preparations versus relative coupling error Delta",
}
