"""Command-line front end: ``nvdicke {run,sweep,validate,list}``.

Exit codes: 0 success, 1 a validation check failed, 2 bad configuration
(message names the key), 3 numerical failure (scenario and time).
Errors are printed as one line ``error: <kind> <field>=<value> ...``.
"""
import argparse
from dataclasses import replace
import sys
import warnings

from . import config as conf
from . import experiments as ex
from . import report
from .dynamics import IntegrationError
from .model import ParameterError
from .quantum import DimensionError

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="nvdicke", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sweep=False):
        p.add_argument("--scenario", help="scenario or sweep name (see `list`)")
        p.add_argument("--preset", help="shipped preset, e.g. 'paper'")
        p.add_argument("--config", help="YAML config file; flags override its values")
        p.add_argument("--lambda", dest="lam", type=float, help="base coupling (rad/s)")
        p.add_argument("--nu", type=float, help="cantilever frequency (rad/s)")
        p.add_argument("--temperature", type=float, help="cantilever temperature (K)")
        p.add_argument("--n-spins", type=int, help="number of spins")
        if sweep:
            p.add_argument("--q", type=_float_list, help="quality factors, comma separated")
            p.add_argument("--delta", type=_float_list, help="coupling errors, comma separated")
            p.add_argument("--workers", type=int, help="worker processes")
        else:
            p.add_argument("--q", type=float, help="quality factor")
            p.add_argument("--delta", type=float, help="relative coupling error")
        p.add_argument("--out", help=f"output directory (default ${conf.OUTPUT_ENV} or runs/<scenario>)")
        p.add_argument("--echo-config", action="store_true", help="print the resolved config as YAML and exit")
        p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")

    common(sub.add_parser("run", help="run one scenario"))
    common(sub.add_parser("sweep", help="run a parameter sweep"), sweep=True)
    v = sub.add_parser("validate", help="run the oracle and property checks")
    v.add_argument("--check", action="append", help="run only this check (repeatable)")
    sub.add_parser("list", help="list scenarios, sweeps and checks")
    return parser


def _overrides(args, sweep):
    params = {"lambda": args.lam, "nu": args.nu, "temperature": args.temperature, "n_spins": args.n_spins}
    raw = {"scenario": args.scenario, "output_dir": args.out}
    if args.no_plot:
        raw["plot"] = False
    if sweep:
        raw["workers"] = args.workers
        if args.q is not None and args.delta is not None:
            raise ParameterError("delta", "give --q or --delta, not both")
        if args.q is not None:
            raw["sweep"] = {"parameter": "quality_factor", "values": args.q}
            raw["scenario"] = raw["scenario"] or "heating"
        if args.delta is not None:
            raw["sweep"] = {"parameter": "coupling_error", "values": args.delta}
            raw["scenario"] = raw["scenario"] or "coupling"
    else:
        params.update(quality_factor=args.q, coupling_error=args.delta)
    raw["params"] = params
    return raw


def resolve_config(args, sweep=False):
    """Preset, then config file, then flags."""
    raw = {}
    if args.preset:
        raw = conf.merge(raw, conf.preset(args.preset))
    if args.config:
        raw = conf.merge(raw, conf.load_yaml(args.config))
    raw = conf.merge(raw, _overrides(args, sweep))
    if "scenario" not in raw:
        raise ParameterError("scenario", "no scenario given")
    cfg = conf.parse_config(raw)
    if sweep != cfg.is_sweep:
        kind = "sweep" if sweep else "scenario"
        raise ParameterError("scenario", f"{cfg.scenario!r} is not a {kind}")
    return cfg


def _integrator(cfg, keep_states=False):
    return replace(cfg.integrator, store_states=keep_states)


def run_scenario(cfg):
    """Dispatch a single-run config to the experiments layer."""
    p, s, name = cfg.params, cfg.schedule, cfg.scenario
    icfg = _integrator(cfg)
    if name == "d31":
        if s is not None:
            r = ex.run_ladder(p, 1, s, icfg, name="d31")
            r.diagnostics["gate_time"] = ex.gate_time(p)
            return r
        return ex.run_d31(p, icfg)
    if name == "d32-resonant":
        if s is not None:
            return ex.run_ladder(p, 2, s, replace(icfg, sample_stride=icfg.sample_stride or 1), name="d32_resonant")
        return ex.run_d32_resonant(p, icfg)
    if name == "d32-adiabatic":
        return ex.run_d32_adiabatic(p, s, icfg)
    if name == "tune-chirp":
        chirp, pop, metric = ex.tune_chirp(p, cfg=icfg)
        r = ex.run_d32_adiabatic(p, chirp, icfg)
        r.name = "tune_chirp"
        r.diagnostics.update(tuned_population=pop, tuned_metric=metric)
        return r
    if name == "rwa":
        return ex.validate_rwa(p, icfg, duration=s.duration if s is not None else None)
    if name == "d31-heated":
        if s is not None:
            return ex.run_open(p, 1, s, icfg, name="d31_heated")
        return ex.run_d31_open(p, icfg)
    if name == "d32-heated":
        return ex.run_d32_open(p, s, icfg)
    raise ParameterError("scenario", f"unknown scenario {name!r}")


def run_sweep(cfg):
    icfg = _integrator(cfg)
    if cfg.scenario == "heating":
        grid = cfg.sweep_values or (1e4, 1e5)
        return ex.sweep_heating(cfg.params, grid, icfg, cfg.workers, chirp=cfg.schedule)
    grid = cfg.sweep_values or (0.0, 0.01, 0.02, 0.03, 0.04, 0.05)
    return ex.sweep_coupling_error(cfg.params, grid, icfg, cfg.workers, chirp=cfg.schedule)


def _line(fields):
    return " ".join(f"{k}={report.fmt(v)}" for k, v in fields.items())


def _cmd_run(args, sweep):
    cfg = resolve_config(args, sweep)
    if args.echo_config:
        sys.stdout.write(conf.dump_config(cfg))
        return EXIT_OK
    out = cfg.resolved_output_dir()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", ex.AdiabaticityWarning)
            result = run_sweep(cfg) if sweep else run_scenario(cfg)
    except IntegrationError as err:
        t = getattr(err, "time", None)
        print(f"error: numerical scenario={cfg.scenario} time={report.fmt(t)} message={str(err)!r}",
              file=sys.stderr)
        return EXIT_NUMERIC
    if sweep:
        paths = report.write_sweep(cfg.scenario, result, out, plot=cfg.plot)
        for row in report.sweep_rows(cfg.scenario, result):
            print(_line({c: row.get(c) for c in ("scenario", "parameter", "value", "fidelity_d31", "fidelity_d32")}))
    else:
        paths = report.write_run(result, out, plot=cfg.plot)
        row = report.summary_row(result)
        print(_line({c: row[c] for c in ("scenario", "final_fidelity", "peak_fidelity", "peak_time", "gate_time")}))
    print(_line({f"{k}_path": v for k, v in paths.items()}))
    return EXIT_OK


def _cmd_validate(args):
    from .validation import CHECKS, run_checks

    names = args.check
    for n in names or ():
        if n not in CHECKS:
            raise ParameterError("check", f"unknown check {n!r}")
    results = run_checks(names)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name} value={report.fmt(r.value)} limit={report.fmt(r.limit)}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_CHECK if failed else EXIT_OK


def _cmd_list():
    from .validation import CHECKS

    print("scenarios (run --scenario NAME):")
    for name, text in ex.SCENARIOS.items():
        print(f"  {name:14s} {text}")
    print("sweeps (sweep --scenario NAME):")
    for name, text in ex.SWEEPS.items():
        print(f"  {name:14s} {text}")
    print("checks (validate --check NAME):")
    for name in CHECKS:
        print(f"  {name}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list":
            return _cmd_list()
        if args.command == "validate":
            return _cmd_validate(args)
        return _cmd_run(args, sweep=args.command == "sweep")
    except ParameterError as err:
        msg = str(err).split(": ", 1)[-1]
        print(f"error: config key={err.key} message={msg!r}", file=sys.stderr)
        return EXIT_CONFIG
    except DimensionError as err:
        print(f"error: config key=n_spins message={str(err)!r}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as err:
        t = getattr(err, "time", None)
        print(f"error: numerical scenario={getattr(args, 'scenario', None)} time={report.fmt(t)} "
              f"message={str(err)!r}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
