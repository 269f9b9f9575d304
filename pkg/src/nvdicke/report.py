"""CSV, gnuplot and figure output. Every file is written to a temp name and renamed."""
import contextlib
import csv
import io
import math
import os
import tempfile

import numpy as np

SCHEMA_VERSION = 1
SUMMARY_HEADER = f"# nvdicke summary v{SCHEMA_VERSION}"
TRAJECTORY_HEADER = f"# nvdicke trajectory v{SCHEMA_VERSION}"
SWEEP_HEADER = f"# nvdicke sweep v{SCHEMA_VERSION}"

SUMMARY_COLUMNS = (
    "scenario", "n_spins", "excitations", "nu", "lambda", "coupling_error",
    "quality_factor", "temperature", "gamma", "n_bar", "schedule_kind", "duration",
    "delta_start", "delta_end", "gate_time", "final_fidelity", "peak_fidelity",
    "peak_time", "steps", "max_leakage", "diagnostics",
)
SWEEP_COLUMNS = (
    "scenario", "parameter", "value", "fidelity_d31", "fidelity_d32",
    "gamma", "n_bar", "max_leakage", "excitation_drift",
)
TRAJECTORY_TAIL = ("fidelity", "n_phonon", "leakage")


def fmt(value):
    """12 significant digits for floats, plain text otherwise, empty for missing."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.12g" % value
    return str(value)


def atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def csv_text(header, columns, rows):
    buf = io.StringIO()
    buf.write(header + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def gnuplot_text(header, columns, rows, notes=()):
    """Whitespace table with ``#`` comment header; strings are quoted."""
    lines = [header] + [f"# {n}" for n in notes]
    lines.append("# " + " ".join(columns))
    for row in rows:
        cells = []
        for c in columns:
            v = row.get(c)
            s = fmt(v)
            if s == "":
                s = "NaN"
            elif isinstance(v, str):
                s = '"' + s.replace('"', "'") + '"'
            cells.append(s)
        lines.append(" ".join(cells))
    return "\n".join(lines) + "\n"


def _diagnostics_cell(diag):
    return ";".join(f"{k}={fmt(diag[k])}" for k in sorted(diag))


def summary_row(result):
    p = result.params
    s = result.schedule
    d = result.diagnostics
    row = {
        "scenario": result.name,
        "n_spins": p.n_spins,
        "excitations": result.excitations,
        "nu": p.nu,
        "lambda": p.lambda_base,
        "coupling_error": p.coupling_error,
        "quality_factor": p.quality_factor,
        "temperature": p.temperature,
        "gamma": d.get("gamma", p.gamma),
        "n_bar": d.get("n_bar", p.n_bar),
        "final_fidelity": result.final_fidelity,
        "peak_fidelity": result.peak_fidelity,
        "peak_time": result.peak_time,
        "steps": d.get("steps"),
        "max_leakage": d.get("max_leakage"),
        "gate_time": d.get("gate_time"),
        "diagnostics": _diagnostics_cell(
            {k: v for k, v in d.items() if k not in ("steps", "max_leakage", "gate_time", "gamma", "n_bar")}
        ),
    }
    if s is not None:
        row.update(schedule_kind=s.kind, duration=s.duration)
        if s.kind == "square":
            row.update(delta_start=s.delta_constant, delta_end=s.delta_constant)
        else:
            row.update(delta_start=s.delta_start, delta_end=s.delta_end)
    return row


def trajectory_columns(traj):
    pops = sorted(
        (k for k in traj.observables if k.startswith("population_")),
        key=lambda k: int(k.rsplit("_", 1)[1]),
    )
    return ("time", *pops, *TRAJECTORY_TAIL)


def trajectory_rows(traj):
    cols = trajectory_columns(traj)
    data = {"time": traj.times}
    for c in cols[1:]:
        # the ladder has no Fock truncation, so it cannot leak
        data[c] = traj.observables.get(c, np.zeros_like(traj.times) if c == "leakage" else None)
    rows = []
    for i in range(len(traj.times)):
        rows.append({c: (None if data[c] is None else float(data[c][i])) for c in cols})
    return cols, rows


def write_run(result, out_dir, plot=True):
    """``summary.csv``, ``trajectory.csv``, their gnuplot mirrors and ``populations.png``."""
    os.makedirs(out_dir, exist_ok=True)
    row = summary_row(result)
    paths = {}
    paths["summary"] = os.path.join(out_dir, "summary.csv")
    atomic_write(paths["summary"], csv_text(SUMMARY_HEADER, SUMMARY_COLUMNS, [row]))
    atomic_write(
        os.path.join(out_dir, "summary.gnuplot-dat"),
        gnuplot_text(SUMMARY_HEADER, SUMMARY_COLUMNS, [row]),
    )
    cols, rows = trajectory_rows(result.trajectory)
    notes = [f"population_{k} = {label}" for k, label in enumerate(result.population_labels)]
    paths["trajectory"] = os.path.join(out_dir, "trajectory.csv")
    atomic_write(paths["trajectory"], csv_text(TRAJECTORY_HEADER, cols, rows))
    atomic_write(
        os.path.join(out_dir, "trajectory.gnuplot-dat"),
        gnuplot_text(TRAJECTORY_HEADER, cols, rows, notes),
    )
    if plot:
        paths["figure"] = os.path.join(out_dir, "populations.png")
        plot_populations(result, paths["figure"])
    return paths


def sweep_rows(scenario, sweep):
    rows = []
    for r in sweep.rows:
        row = dict(r)
        row.update(scenario=scenario, parameter=sweep.parameter, value=r[sweep.parameter])
        rows.append(row)
    return rows


def write_sweep(scenario, sweep, out_dir, plot=True):
    """``sweep.csv`` with one row per grid point, its gnuplot mirror and ``sweep.png``."""
    rows = sweep_rows(scenario, sweep)
    paths = {"sweep": os.path.join(out_dir, "sweep.csv")}
    atomic_write(paths["sweep"], csv_text(SWEEP_HEADER, SWEEP_COLUMNS, rows))
    atomic_write(
        os.path.join(out_dir, "sweep.gnuplot-dat"), gnuplot_text(SWEEP_HEADER, SWEEP_COLUMNS, rows)
    )
    if plot:
        paths["figure"] = os.path.join(out_dir, "sweep.png")
        plot_sweep(sweep, paths["figure"])
    return paths


# -- figures -------------------------------------------------------------------------

def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".png")
    os.close(fd)
    try:
        fig.savefig(tmp, dpi=120, format="png", metadata={"Software": None})
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def plot_populations(result, path):
    """Level populations against time in microseconds."""
    plt = _pyplot()
    traj = result.trajectory
    t = traj.times * 1e6
    fig, ax = plt.subplots(figsize=(6, 4))
    pops = trajectory_columns(traj)[1:-len(TRAJECTORY_TAIL)]
    labels = list(result.population_labels) or pops
    for k, name in enumerate(pops):
        ax.plot(t, traj[name], label=labels[k] if k < len(labels) else name)
    if not pops:
        ax.plot(t, traj["fidelity"], label="fidelity")
    ax.set_xlabel("time (us)")
    ax.set_ylabel("population")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(result.name)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_sweep(sweep, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.asarray(sweep.grid, dtype=float)
    if sweep.parameter == "quality_factor":
        x = np.array([0.0 if math.isinf(q) else 1.0 / q for q in x])
        ax.set_xlabel("Gamma / nu = 1/Q")
    else:
        ax.set_xlabel(sweep.parameter)
    for name, f in sweep.fidelities.items():
        ax.plot(x, f, "o-", label=name)
    ax.set_ylabel("fidelity")
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
