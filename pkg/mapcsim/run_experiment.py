"""experiment orchestration: simulation runs over seed lists, fanned out
over worker processes, congestion sweeps with paired seeds and the
controlled two-AP gain validation.
"""

from __future__ import absolute_import

import logging
import multiprocessing as mp
import os
import time

from .gain_model import extract_interval_components, gain_report_rows
from .metrics import aggregate
from .network import simulate
from .scenario import SYSTEMS, build_scenario
from .trace import ArrivalTraceWriter, FrameTraceWriter, GrantTraceWriter, TraceRecorder

logger = logging.getLogger(__name__)

# seed offset of the coordinated runs in independent-seed mode
INDEPENDENT_SEED_OFFSET = 1000003

TRACE_KINDS = ("none", "frames", "grants", "all")


def trace_paths(out_dir, config, seed):
    stem = os.path.join(out_dir, "trace_{}_{}_vc{}_seed{}".format(config.scenario, config.system,
                                                                    config.n_vc_stas, seed))
    return {"frames": stem + ".frames.csv", "grants": stem + ".grants.csv", "arrivals": stem + ".arrivals.csv"}


def _make_tracer(trace, out_dir, config, seed):
    if trace in (None, "none"):
        return TraceRecorder()
    if trace not in TRACE_KINDS:
        raise ValueError("unknown trace kind {!r}, expected one of {}".format(trace, TRACE_KINDS))
    paths = trace_paths(out_dir, config, seed)
    frames = FrameTraceWriter(paths["frames"]) if trace in ("frames", "all") else None
    grants = GrantTraceWriter(paths["grants"])
    arrivals = ArrivalTraceWriter(paths["arrivals"]) if trace == "all" else None
    return TraceRecorder(frames, grants, arrivals)


def run_one(config, seed, trace="none", out_dir=None, keep_records=False):
    """
    build and simulate one (config, seed).
    :return: RunReport; errors come back as RuntimeError naming the run
    """
    try:
        scenario = build_scenario(config, seed)
        tracer = _make_tracer(trace, out_dir, config, seed)
        try:
            report, _ = simulate(scenario, seed, tracer, keep_records=keep_records)
        finally:
            tracer.close()
        return report
    except Exception as e:
        raise RuntimeError("run failed (scenario={}, system={}, vc_stas={}, seed={}): {}".format(
            config.scenario, config.system, config.n_vc_stas, seed, e)) from e


def _run_q(runs_q, reports_q, trace, out_dir, keep_records):
    logger.info("simulate process %d starts", os.getpid())
    count = 0
    while True:
        job = runs_q.get()
        if job == "kill":
            runs_q.put("kill")
            break
        index, config, seed = job
        logger.debug("simulate process %d takes run %d, seed %d", os.getpid(), index, seed)
        try:
            reports_q.put((index, run_one(config, seed, trace, out_dir, keep_records), None))
        except RuntimeError as e:
            reports_q.put((index, None, str(e)))
        count += 1
    logger.info("simulate process %d ending, proceed %d runs", os.getpid(), count)


def _sort_key(report):
    return report.scenario, report.system, report.n_vc_stas, report.seed


def run_jobs(jobs, nproc=1, trace="none", out_dir=None, keep_records=False):
    """
    :param jobs: list of (ScenarioConfig, seed)
    :return: RunReports sorted by (scenario, system, n_vc_stas, seed)
    """
    if not jobs:
        raise ValueError("no simulation runs requested")
    start = time.time()
    if nproc <= 1 or len(jobs) == 1:
        reports = [run_one(config, seed, trace, out_dir, keep_records) for config, seed in jobs]
    else:
        runs_q = mp.Queue()
        reports_q = mp.Queue()
        for index, (config, seed) in enumerate(jobs):
            runs_q.put((index, config, seed))
        runs_q.put("kill")
        procs = []
        for _ in range(min(nproc, len(jobs))):
            p = mp.Process(target=_run_q, args=(runs_q, reports_q, trace, out_dir, keep_records))
            p.daemon = True
            p.start()
            procs.append(p)
        results, errors = {}, []
        for _ in range(len(jobs)):
            index, report, error = reports_q.get()
            if error is not None:
                errors.append(error)
            else:
                results[index] = report
        for p in procs:
            p.join()
        if errors:
            raise RuntimeError("{} of {} runs failed, first: {}".format(len(errors), len(jobs), errors[0]))
        reports = [results[i] for i in range(len(jobs))]
    logger.info("%d runs cost %.2f seconds..", len(jobs), time.time() - start)
    return sorted(reports, key=_sort_key)


def run_experiment(config, seeds, nproc=1, pooled=False, trace="none", out_dir=None):
    """
    one system and congestion level over a seed list.
    :return: (summary rows, RunReports)
    """
    if not seeds:
        raise ValueError("empty seed list")
    reports = run_jobs([(config, s) for s in seeds], nproc, trace, out_dir)
    return aggregate(reports, pooled=pooled, alpha=config.metrics["alpha"]), reports


def sweep_jobs(config, seeds, vc_levels, systems=SYSTEMS, scenarios=None, independent_seeds=False):
    """
    the (scenario x n_vc_stas x system) grid. both systems get the same
    seeds unless independent_seeds is set.
    """
    jobs = []
    for scenario in scenarios or [config.scenario]:
        for n_vc in vc_levels:
            for system in systems:
                cfg = config.with_overrides(scenario=scenario, n_vc_stas=n_vc, system=system, mapc_pair=None)
                offset = INDEPENDENT_SEED_OFFSET if independent_seeds and system == "coordinated" else 0
                jobs.extend((cfg, s + offset) for s in seeds)
    return jobs


def sweep(config, seeds, vc_levels, systems=SYSTEMS, scenarios=None, independent_seeds=False, nproc=1,
          pooled=False, trace="none", out_dir=None):
    jobs = sweep_jobs(config, seeds, vc_levels, systems, scenarios, independent_seeds)
    logger.info("sweep: %d runs over %d congestion levels", len(jobs), len(vc_levels))
    reports = run_jobs(jobs, nproc, trace, out_dir)
    return aggregate(reports, pooled=pooled, alpha=config.metrics["alpha"]), reports


def gain_experiment(config, vc_levels, seeds, nproc=1):
    """
    two co-channel APs, both in the MAPC pair when coordinated; the access
    intervals of AP 0 are split into gain components in both systems.
    :return: one gain report row per congestion level
    """
    jobs = []
    for n_vc in vc_levels:
        base = config.with_overrides(n_bss=2, co_bss=[0, 1], mapc_pair=None, n_vc_stas=n_vc)
        for system in ("uncoordinated", "coordinated"):
            cfg = base.with_overrides(system=system, mapc_pair=None)
            jobs.extend((cfg, s) for s in seeds)
    reports = run_jobs(jobs, nproc, keep_records=True)
    rows = []
    for n_vc in vc_levels:
        u_rows, c_rows = [], []
        for r in reports:
            if r.n_vc_stas != n_vc:
                continue
            system = "u" if r.system == "uncoordinated" else "c"
            bucket = u_rows if system == "u" else c_rows
            bucket.extend(extract_interval_components(r.txop_records[0], r.txop_records[1], system,
                                                      busy_i=r.busy_intervals.get(0), busy_j=r.busy_intervals.get(1)))
        rows.append(gain_report_rows(n_vc, u_rows, c_rows))
        logger.info("gain at %d VC STAs: %d / %d access intervals, %d closed by a shared window", n_vc,
                    len(u_rows), len(c_rows), rows[-1]["n_shared_intervals"])
    return rows
