#! /usr/bin/env python

from __future__ import absolute_import

import argparse
import json
import logging
import os
import sys

from .utils.process_utils import display_args
from .utils.process_utils import nproc_from_env
from .utils.process_utils import parse_seeds
from .utils.process_utils import setup_logging

logger = logging.getLogger(__name__)


def _load(args):
    from .scenario import load_config

    config = load_config(args.config)
    overrides = {}
    if getattr(args, "system", None) is not None:
        overrides["system"] = args.system
    if getattr(args, "vc_stas", None) is not None:
        overrides["n_vc_stas"] = args.vc_stas
    if getattr(args, "scenario", None) is not None:
        overrides["scenario"] = args.scenario
    if getattr(args, "sim_time_us", None) is not None:
        overrides["sim_time_us"] = args.sim_time_us
    if overrides:
        config = config.with_overrides(**overrides)
    return config


def _seeds(args, config):
    if args.seeds is None:
        return list(range(1, config.n_iterations + 1))
    return parse_seeds(args.seeds)


def _nproc(args):
    return args.nproc if args.nproc is not None else nproc_from_env()


def _write_outputs(args, config, summary, reports):
    from .metrics import write_raw_samples
    from .report import emit_report

    meta = {"config": config.to_dict(), "seeds": sorted(set(r.seed for r in reports))}
    paths = emit_report(summary, args.format, args.out, meta)
    if config.metrics["raw_samples"]:
        path = os.path.join(args.out, "raw_samples.csv")
        write_raw_samples(path, reports)
        paths.append(path)
    for path in paths:
        print(path)


def main_simulate(args):
    from .run_experiment import run_experiment

    display_args(args)
    config = _load(args)
    seeds = _seeds(args, config)
    if args.trace != "none" and not os.path.isdir(args.out):
        os.makedirs(args.out)
    pooled = args.pooled or config.metrics["pooled"]
    summary, reports = run_experiment(config, seeds, _nproc(args), pooled, args.trace, args.out)
    _write_outputs(args, config, summary, reports)


def main_sweep(args):
    from .run_experiment import sweep

    display_args(args)
    config = _load(args)
    seeds = _seeds(args, config)
    levels = list(range(args.vc_min, args.vc_max + 1))
    scenarios = args.scenarios.split(",") if args.scenarios else None
    systems = args.systems.split(",")
    pooled = args.pooled or config.metrics["pooled"]
    summary, reports = sweep(config, seeds, levels, systems, scenarios, args.independent_seeds, _nproc(args),
                             pooled)
    _write_outputs(args, config, summary, reports)


def main_gain(args):
    from .gain_model import write_gain_report
    from .run_experiment import gain_experiment

    display_args(args)
    config = _load(args)
    seeds = _seeds(args, config)
    levels = list(range(args.vc_min, args.vc_max + 1))
    rows = gain_experiment(config, levels, seeds, _nproc(args))
    if not os.path.isdir(args.out):
        os.makedirs(args.out)
    path = os.path.join(args.out, "gain.csv")
    write_gain_report(path, rows)
    print(path)


def main_check(args):
    from .trace import check_trace, read_frame_trace, read_grant_trace

    frames = read_frame_trace(args.frames)
    grants = read_grant_trace(args.grants) if args.grants else []
    violations = check_trace(frames, grants, coordinated=not args.baseline)
    print(json.dumps({rule: len(v) for rule, v in sorted(violations.items())}, sort_keys=True))
    bad = sum(len(v) for v in violations.values())
    for rule, messages in sorted(violations.items()):
        for m in messages[:args.max_show]:
            print("{}: {}".format(rule, m), file=sys.stderr)
    if bad:
        raise RuntimeError("{} trace violation(s)".format(bad))


def _add_common(sub, need_out=True):
    p_input = sub.add_argument_group("INPUT")
    p_input.add_argument("--config", "-c", action="store", type=str, required=False, default=None,
                         help="scenario file (JSON), default: built-in defaults")
    p_input.add_argument("--scenario", action="store", type=str, required=False, default=None,
                         choices=["RTMG", "VR"], help="LL traffic model, overrides the config")
    p_input.add_argument("--seeds", "-s", action="store", type=str, required=False, default=None,
                         help="seeds, 'a..b' (inclusive), 'a,b,c' or one integer. "
                              "default 1..n_iterations of the config")
    p_input.add_argument("--sim_time_us", "--sim-time-us", action="store", type=int, required=False,
                         default=None, help="simulated time per run in us, overrides the config")
    p_input.add_argument("--nproc", "-p", action="store", type=int, required=False, default=None,
                         help="number of worker processes, default $MAPCSIM_NPROC or 1")
    if need_out:
        p_output = sub.add_argument_group("OUTPUT")
        p_output.add_argument("--out", "-o", action="store", type=str, required=False, default=".",
                              help="output directory, default the working directory")
    p_log = sub.add_argument_group("LOGGING")
    p_log.add_argument("--verbose", "-v", action="store_true", default=False, help="debug logging")
    p_log.add_argument("--quiet", "-q", action="store_true", default=False, help="warnings and errors only")


def _add_report(sub):
    p_report = sub.add_argument_group("REPORT")
    p_report.add_argument("--format", "-f", action="store", type=str, default="csv",
                          choices=["csv", "json", "plot-data"], help="summary format, default csv")
    p_report.add_argument("--pooled", action="store_true", default=False,
                          help="latency percentiles over the samples of all seeds")


def build_parser():
    parser = argparse.ArgumentParser(prog='mapcsim',
                                     description="simulating Co-TDMA TXOP sharing between Wi-Fi APs, "
                                                 "mapcsim contains four modules: \n"
                                                 "\t%(prog)s simulate: one system and congestion level over "
                                                 "a seed list\n"
                                                 "\t%(prog)s sweep: congestion sweep of both systems with "
                                                 "paired seeds\n"
                                                 "\t%(prog)s gain: access-delay gain validation on two "
                                                 "saturated APs\n"
                                                 "\t%(prog)s check: check frame/grant traces against the "
                                                 "protocol rules",
                                     formatter_class=argparse.RawTextHelpFormatter)

    subparsers = parser.add_subparsers(title="modules", help='mapcsim modules, use -h/--help for help')
    sub_simulate = subparsers.add_parser("simulate", description="simulate one system and congestion level")
    sub_sweep = subparsers.add_parser("sweep", description="sweep the number of VC STAs for both systems")
    sub_gain = subparsers.add_parser("gain", description="validate the access-delay gain model")
    sub_check = subparsers.add_parser("check", description="check a frame trace and its grant trace")

    # sub_simulate ===========================================================================
    _add_common(sub_simulate)
    _add_report(sub_simulate)
    ss_run = sub_simulate.add_argument_group("RUN")
    ss_run.add_argument("--system", action="store", type=str, required=False, default=None,
                        choices=["coordinated", "uncoordinated"], help="overrides the config")
    ss_run.add_argument("--vc-stas", "--vc_stas", dest="vc_stas", action="store", type=int, required=False,
                        default=None, help="VC STAs per BSS, overrides the config")
    ss_run.add_argument("--trace", action="store", type=str, default="none",
                        choices=["frames", "grants", "all", "none"],
                        help="write per-run trace files to --out, default none")
    sub_simulate.set_defaults(func=main_simulate)

    # sub_sweep ==============================================================================
    _add_common(sub_sweep)
    _add_report(sub_sweep)
    sw_run = sub_sweep.add_argument_group("RUN")
    sw_run.add_argument("--vc_min", action="store", type=int, default=2, help="default 2")
    sw_run.add_argument("--vc_max", action="store", type=int, default=5, help="default 5")
    sw_run.add_argument("--systems", action="store", type=str, default="coordinated,uncoordinated",
                        help="comma separated, default coordinated,uncoordinated")
    sw_run.add_argument("--scenarios", action="store", type=str, default=None,
                        help="comma separated LL models, e.g. RTMG,VR. default the config's scenario")
    sw_run.add_argument("--independent-seeds", "--independent_seeds", dest="independent_seeds",
                        action="store_true", default=False,
                        help="offset the coordinated system's seeds instead of pairing them")
    sub_sweep.set_defaults(func=main_sweep)

    # sub_gain ===============================================================================
    _add_common(sub_gain)
    sg_run = sub_gain.add_argument_group("RUN")
    sg_run.add_argument("--vc_min", action="store", type=int, default=2, help="default 2")
    sg_run.add_argument("--vc_max", action="store", type=int, default=5, help="default 5")
    sub_gain.set_defaults(func=main_gain)

    # sub_check ==============================================================================
    sc_input = sub_check.add_argument_group("INPUT")
    sc_input.add_argument("--frames", action="store", type=str, required=True, help="frame trace file")
    sc_input.add_argument("--grants", action="store", type=str, required=False, default=None,
                          help="grant trace file")
    sc_input.add_argument("--baseline", action="store_true", default=False,
                          help="the trace is from an uncoordinated run")
    sc_input.add_argument("--max_show", action="store", type=int, default=10,
                          help="violations printed per rule, default 10")
    sc_input.add_argument("--verbose", "-v", action="store_true", default=False)
    sc_input.add_argument("--quiet", "-q", action="store_true", default=False)
    sub_check.set_defaults(func=main_check)
    return parser


def main(argv=None):
    from .scenario import ConfigError

    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help()
        return 2
    setup_logging(args.verbose, args.quiet)
    try:
        args.func(args)
    except ConfigError as e:
        print("mapcsim: {}".format(e), file=sys.stderr)
        return 2
    except (RuntimeError, OSError) as e:
        print("mapcsim: {}".format(e), file=sys.stderr)
        return 1
    except ValueError as e:
        print("mapcsim: {}".format(e), file=sys.stderr)
        return 2
    return 0


if __name__ == '__main__':
    sys.exit(main())
