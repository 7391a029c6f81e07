"""one simulation run: devices contending on a shared medium, their traffic,
and the frame exchanges of every TXOP.

a TXOP is a generator program driven by engine.Process. it talks to the
medium through a TxopContext, which is also what the Co-TDMA programs in
mapcsim.cotdma run against.
"""

from __future__ import absolute_import

import itertools
import logging
from collections import namedtuple
from functools import partial
from itertools import islice

from .cotdma import (Action, InfoChannel, TxopState, execute_txs, polling_phase, room_to_share, snapshot_candidate,
                     txop_action_plan)
from .edca import (SCHED_LOOKAHEAD, CancelTimer, DeviceState, SetTimer, StartTx, Trigger, Txop, block_ack_ns,
                   cf_end_ns, dl_mu_allocate, eligible_acs, trigger_ul_mu)
from .engine import STREAM_BACKOFF, STREAM_TRAFFIC, EventKind, Process, RngStream, Simulator, make_stream_id
from .gain_model import TxopRecord
from .medium import Medium, rx_power_matrix
from .metrics import MetricsCollector
from .phy import ctrl_frame_duration_ns, multi_sta_block_ack_bytes
from .trace import ArrivalRecord, FrameRecord, GrantRecord, TraceRecorder
from .traffic import make_flow, next_arrival, packet_to_mpdus
from .utils.process_utils import NS_PER_US, us_to_ns

logger = logging.getLogger(__name__)

US = float(NS_PER_US)

DataExchange = namedtuple("DataExchange", ["ppdu", "acs"])
UlExchange = namedtuple("UlExchange", ["plan"])


def _outcome(tx):
    if not tx.links:
        return "ok"
    n = tx.n_delivered()
    if n == len(tx.links):
        return "ok"
    return "collided" if n == 0 else "partial"


def _all_ll(mpdu_lists):
    return "1" if all(m.is_ll for mpdus in mpdu_lists for m in mpdus) else "0"


class _Listener(object):
    __slots__ = ("net", "device")

    def __init__(self, net, device):
        self.net = net
        self.device = device

    def medium_busy(self, t):
        self.net.drive(self.device, Trigger.MEDIUM_BUSY)

    def medium_idle(self, t):
        self.net.drive(self.device, Trigger.MEDIUM_IDLE)


class TxopContext(object):
    """what a TXOP program may do: send frames, plan exchanges and run them."""

    def __init__(self, net, holder, txop, record):
        self.net = net
        self.holder = holder
        self.txop = txop
        self.record = record
        self.phy = net.phy
        self.window_end = None

    def now(self):
        return self.net.sim.now()

    def available(self, device_id):
        return self.net.devices[device_id].txop is None

    def _nav_end(self):
        if self.window_end is not None:
            return self.window_end
        return self.txop.end_ns if self.txop.end_ns > self.now() else None

    def send(self, links, duration_ns, event, nav_end=None, resets_nav=False, sources=None, n_mpdus=0, ac="",
             ll_only=""):
        """
        transmit for duration_ns and resume at the frame end.
        :return: the ended Transmission, outcomes resolved
        """
        net = self.net
        if nav_end is None and not resets_nav:
            nav_end = self._nav_end()
        tx = net.medium.start_tx(links, duration_ns, event, nav_end=nav_end, resets_nav=resets_nav,
                                 sources=sources)
        yield int(duration_ns)
        if net.tracer.wants_frames:
            net.tracer.frame(FrameRecord(tx.start / US, ";".join(str(s) for s in tx.sources), event, ac, n_mpdus,
                                         duration_ns / US, _outcome(tx), self.txop.txop_id, ll_only))
        return tx

    def candidate_info(self, ap_id, responded):
        return snapshot_candidate(self.net.devices[ap_id], self.net.stations(ap_id), responded,
                                  acs=self.net.ll_acs)

    def plan_dl(self, device_id, acs, budget_ns, ll_only=False):
        """DataExchange of device_id that fits budget_ns with its block-ack, None when nothing fits."""
        dev = self.net.devices[device_id]
        acs = [ac for ac in acs if dev.has_traffic(ac)]
        if ll_only:
            acs = [ac for ac in acs if any(m.is_ll for m in islice(dev.queue(ac), SCHED_LOOKAHEAD))]
        if not acs:
            return None
        ppdu_budget = budget_ns - self.phy.sifs_ns - block_ack_ns(self.phy)
        if ppdu_budget <= 0:
            return None
        ppdu, acs_used = dl_mu_allocate(dev, ppdu_budget, self.phy, acs=acs, ll_only=ll_only)
        if ppdu is None:
            return None
        return DataExchange(ppdu, acs_used)

    def plan_ul(self, ap_id, budget_ns, ll_only=True):
        stations = [s for s in self.net.stations(ap_id) if s.txop is None]
        plan = trigger_ul_mu(self.net.devices[ap_id], stations, ll_only, budget_ns, self.phy)
        return None if plan.empty else UlExchange(plan)

    def run_exchange(self, exchange, in_window=False):
        if isinstance(exchange, DataExchange):
            ok = yield from self._run_data(exchange, in_window)
        else:
            ok = yield from self._run_ul(exchange.plan, in_window)
        return ok

    def _run_data(self, exchange, in_window):
        net, phy = self.net, self.phy
        ppdu = exchange.ppdu
        holder = net.devices[ppdu.tx_device]
        src = holder.device_id
        if in_window:
            event = "shared_dl_data"
        else:
            event = "dl_data" if holder.is_ap else "ul_data"
        tx = yield from self.send([(src, r) for r in ppdu.mpdus], ppdu.duration_ns, event, n_mpdus=ppdu.n_mpdus,
                                  ac=max(exchange.acs.values()).name, ll_only=_all_ll(ppdu.mpdus.values()))
        acked = []
        for receiver, mpdus in ppdu.mpdus.items():
            ok = tx.delivered(src, receiver)
            delivered, dropped = holder.on_rx_result(exchange.acs[receiver], [(m, ok) for m in mpdus])
            net.collector.delivered(delivered, tx.end)
            net.collector.dropped(dropped)
            if ok:
                acked.append(receiver)
        if not acked:
            yield phy.pifs_ns
            return False
        yield phy.sifs_ns
        yield from self.send([(r, src) for r in acked], block_ack_ns(phy),
                             "shared_block_ack" if in_window else "block_ack")
        return True

    def _run_ul(self, plan, in_window):
        net, phy = self.net, self.phy
        ap = plan.ap
        stas = list(plan.tb.mpdus)
        trig = yield from self.send([(ap, s) for s in stas], plan.trigger.duration_ns,
                                    "shared_trigger" if in_window else "trigger")
        responders = []
        for s in stas:
            if trig.delivered(ap, s) and net.devices[s].txop is None:
                responders.append(s)
            else:
                # untriggered MPDUs go back to the head of the queue, no retry spent
                net.devices[s].queue(plan.acs[s]).extendleft(reversed(plan.tb.mpdus[s]))
        if not responders:
            yield phy.pifs_ns
            return False
        yield phy.sifs_ns
        tb = yield from self.send([(s, ap) for s in responders], plan.tb.duration_ns,
                                  "shared_ul_tb" if in_window else "ul_tb",
                                  n_mpdus=sum(len(plan.tb.mpdus[s]) for s in responders),
                                  ac=max(plan.acs[s] for s in responders).name,
                                  ll_only=_all_ll(plan.tb.mpdus[s] for s in responders))
        acked = []
        for s in responders:
            ok = tb.delivered(s, ap)
            delivered, dropped = net.devices[s].on_rx_result(plan.acs[s], [(m, ok) for m in plan.tb.mpdus[s]])
            net.collector.delivered(delivered, tb.end)
            net.collector.dropped(dropped)
            if ok:
                acked.append(s)
        if not acked:
            yield phy.pifs_ns
            return False
        yield phy.sifs_ns
        yield from self.send([(ap, s) for s in acked],
                             ctrl_frame_duration_ns(multi_sta_block_ack_bytes(len(acked)), phy),
                             "shared_block_ack" if in_window else "block_ack")
        return True

    # shared window hooks
    def accept_grant(self, shared_ap, window_end):
        dev = self.net.devices[shared_ap]
        if dev.txop is not None:
            return False
        dev.txop = Txop(self.txop.txop_id, self.txop.ac, self.now(), window_end, shared=True)
        return True

    def release_grant(self, shared_ap):
        dev = self.net.devices[shared_ap]
        self.net.apply(dev, dev.resume(self.now()))

    def begin_window(self, grant, start_ns, end_ns):
        self.window_end = end_ns
        self.net.record_grant(grant)

    def end_window(self, grant):
        self.window_end = None
        self.release_grant(grant.shared_ap)


class Network(object):
    """
    the devices, flows and medium of one run, built from a Scenario.
    """

    def __init__(self, scenario, seed, tracer=None):
        self.scenario = scenario
        self.seed = int(seed)
        self.sim = Simulator()
        self.phy = scenario.phy
        self.edca = scenario.edca
        self.pair = scenario.pair
        self.allow_ul_mu = scenario.allow_ul_mu
        self.tracer = tracer if tracer is not None else TraceRecorder()
        rx = rx_power_matrix(scenario.positions, self.phy.tx_power_dbm, scenario.walls, self.phy.wall_loss_db)
        self.medium = Medium(self.sim, rx, self.phy)
        self.collector = MetricsCollector(scenario.co_bss, scenario.warmup_ns)

        self.devices = []
        for node in scenario.nodes:
            rng = RngStream(self.seed, make_stream_id(STREAM_BACKOFF, node.bss, node.index))
            dev = DeviceState(node.device_id, node.role, node.bss, self.edca, rng)
            self.devices.append(dev)
            self.medium.attach(node.device_id, _Listener(self, dev))
        self._stations = {}
        for dev in self.devices:
            if not dev.is_ap:
                self._stations.setdefault(dev.bss_id, []).append(dev)

        self.flows = []
        for f in scenario.flows:
            rng = RngStream(self.seed, make_stream_id(STREAM_TRAFFIC, f.bss, f.index, f.sub))
            self.flows.append(make_flow(f.spec, rng, f.flow_id, f.source, f.destination, f.bss))
        self.ll_acs = sorted(set(f.ac for f in self.flows if f.is_ll))

        self._timers = [None] * len(self.devices)
        self._txop_ids = itertools.count(1)
        self.txop_records = {ap: [] for ap in scenario.co_bss}
        self.grants = []
        self.n_txops = 0

    def stations(self, ap_id):
        return self._stations.get(self.devices[ap_id].bss_id, [])

    # channel access
    def drive(self, dev, trigger, **kwargs):
        self.apply(dev, dev.advance(trigger, self.sim.now(), **kwargs))

    def apply(self, dev, actions):
        i = dev.device_id
        for action in actions:
            if isinstance(action, StartTx):
                self._start_txop(dev, action.ac)
            elif isinstance(action, SetTimer):
                handle = self._timers[i]
                if handle is not None and handle.pending and handle.fire_time == action.fire_time:
                    continue
                self.sim.cancel(handle)
                self._timers[i] = self.sim.schedule(action.fire_time, EventKind.BACKOFF, i,
                                                    partial(self.drive, dev, Trigger.TIMER))
            elif isinstance(action, CancelTimer):
                self.sim.cancel(self._timers[i])
                self._timers[i] = None

    def _start_txop(self, dev, ac):
        now = self.sim.now()
        txop = Txop(next(self._txop_ids), ac, now, now + self.edca.txop_limit_ns(ac))
        dev.txop = txop
        self.n_txops += 1
        ctx = TxopContext(self, dev, txop, TxopRecord(dev.device_id, txop.txop_id, now))
        Process(self.sim, self._txop_program(ctx), partial(self._txop_done, ctx), target=dev.device_id).start()

    def _txop_done(self, ctx, record):
        if ctx.holder.device_id in self.txop_records:
            self.txop_records[ctx.holder.device_id].append(record)
        self.drive(ctx.holder, Trigger.TX_COMPLETE, ac=ctx.txop.ac, success=record.success)

    def _ul_ll_bytes(self, ap_id):
        return sum(m.size_bytes for sta in self.stations(ap_id) for ac in self.ll_acs if ac in sta.acs
                   for m in sta.queue(ac) if m.is_ll)

    def _cf_end(self, ctx):
        t0 = ctx.now()
        yield from ctx.send([], cf_end_ns(self.phy), "cf_end", resets_nav=True, sources=[ctx.holder.device_id])
        ctx.record.cf_end_ns += ctx.now() - t0

    def _txop_program(self, ctx):
        """
        polling (Co-TDMA APs), then the action plan re-run after every
        exchange until the TXOP is used up, a frame exchange fails or
        the holder truncates it.
        """
        dev, txop, record, phy = ctx.holder, ctx.txop, ctx.record, self.phy
        limit = txop.end_ns - txop.start_ns
        if self.tracer.wants_frames:
            self.tracer.frame(FrameRecord(txop.start_ns / US, str(dev.device_id), "txop_start", txop.ac.name, 0,
                                          limit / US, "", txop.txop_id, ""))
        acs = [ac for ac in eligible_acs(txop.ac) if ac in dev.acs]
        coordinated = self.pair is not None and dev.device_id in self.pair and limit > 0
        candidates = []
        # a TXOP the own DL backlog already fills has nothing to share
        if coordinated and room_to_share(dev, acs, limit, phy):
            t0 = ctx.now()
            candidates = yield from polling_phase(ctx, dev, self.pair)
            record.polling_ns = ctx.now() - t0
        allow_ul = self.allow_ul_mu and dev.is_ap
        served = failed = False
        while True:
            now = ctx.now()
            if limit > 0:
                remaining = txop.remaining_ns(now)
            else:
                # a zero TXOP limit allows one exchange
                if served:
                    break
                remaining = phy.max_ppdu_ns + phy.sifs_ns + block_ack_ns(phy)
            has_dl = any(dev.has_traffic(ac) for ac in acs)
            exchange = ctx.plan_dl(dev.device_id, acs, remaining) if has_dl else None
            ul_bytes, ul_fits = 0, False
            if exchange is None and allow_ul:
                ul_bytes = self._ul_ll_bytes(dev.device_id)
                if ul_bytes:
                    exchange = ctx.plan_ul(dev.device_id, remaining, ll_only=True)
                    ul_fits = exchange is not None
            if coordinated and self.pair.info_channel is InfoChannel.BACKHAUL:
                candidates = [ctx.candidate_info(c.ap_id, c.responded) for c in candidates]
            state = TxopState(remaining, has_dl, exchange is not None and not ul_fits, ul_bytes, ul_fits,
                              allow_ul, txop.shared)
            plan = txop_action_plan(dev, state, candidates, phy)
            if dev.is_ap and self.tracer.wants_frames:
                self.tracer.frame(FrameRecord(now / US, str(dev.device_id), "plan", plan.action.value, 0, 0.0,
                                              "dl:{}|ul:{}".format(int(state.dl_fits), int(ul_fits)),
                                              txop.txop_id, ""))

            if plan.action in (Action.DL_TX, Action.UL_MU_TX):
                ok = yield from ctx.run_exchange(exchange)
                if ok:
                    served = True
                    txop.n_success += 1
                    if limit > 0:
                        yield phy.sifs_ns
                record.fe_ns += ctx.now() - now
                if not ok:
                    failed = not served
                    break
            elif plan.action is Action.COTDMA_SHARE:
                txop.shared = True
                grant = yield from execute_txs(ctx, plan, dev)
                if grant is None:
                    record.control_ns += ctx.now() - now
                    if txop.remaining_ns(ctx.now()) >= cf_end_ns(phy):
                        yield from self._cf_end(ctx)
                    break
                start = us_to_ns(grant.start_time_us)
                record.control_ns += start - now
                record.shared_ns += ctx.now() - start
                record.shared_ap, record.shared_start_ns = grant.shared_ap, start
            elif plan.action is Action.CF_END and limit > 0:
                yield from self._cf_end(ctx)
                break
            else:
                break
        record.end_ns = ctx.now()
        record.success = not failed
        return record

    def record_grant(self, grant):
        self.grants.append(grant)
        self.tracer.grant(GrantRecord(grant.start_time_us, grant.sharing_ap, grant.shared_ap, grant.duration_us,
                                      grant.dl_ll_bytes, grant.ul_ll_bytes))

    # traffic
    def _arrival(self, flow):
        now = self.sim.now()
        size, iat = next_arrival(flow)
        packet, mpdus = packet_to_mpdus(flow, size, now, self.scenario.fragment_threshold)
        holder = self.devices[flow.source]
        if len(holder.queue(flow.ac)) + len(mpdus) > self.edca.queue_limit:
            holder.acs[flow.ac].n_buffer_drops += len(mpdus)
            self.collector.buffer_drop(flow, packet, len(mpdus))
        else:
            for m in mpdus:
                holder.enqueue(m)
            self.drive(holder, Trigger.ENQUEUE, ac=flow.ac)
        if self.tracer.wants_arrivals:
            self.tracer.arrival(ArrivalRecord(now / US, flow.flow_id, flow.spec.model.value, flow.direction.value,
                                              size))
        self.sim.schedule(now + us_to_ns(iat), EventKind.ARRIVAL, flow.flow_id, partial(self._arrival, flow))

    def run(self, t_end_ns=None):
        """
        :return: number of events fired
        """
        t_end = self.scenario.sim_time_ns if t_end_ns is None else int(t_end_ns)
        for flow in self.flows:
            self.sim.schedule(us_to_ns(flow.first_arrival_us()), EventKind.ARRIVAL, flow.flow_id,
                              partial(self._arrival, flow))
        return self.sim.run_until(t_end)

    def report(self, keep_samples=True):
        s = self.scenario
        report = self.collector.report(s.name, s.system, s.n_vc_stas, self.seed, self.sim.now(),
                                       keep_samples=keep_samples)
        report.counters = {
            "events": self.sim.fired_total,
            "transmissions": self.medium.n_transmissions,
            "txops": self.n_txops,
            "grants": len(self.grants),
            "backoff_drops": sum(st.n_drops for d in self.devices for st in d.acs.values()),
        }
        return report


def simulate(scenario, seed, tracer=None, keep_samples=True, keep_records=False):
    """
    build and run one simulation, return its RunReport and the Network.
    :param keep_records: attach the TXOP records and the sensed busy periods of the co_bss APs to the report
    """
    net = Network(scenario, seed, tracer)
    if keep_records:
        net.medium.record_intervals(devices=scenario.co_bss)
    n = net.run()
    logger.debug("seed %d: %d events, %d txops, %d grants", seed, n, net.n_txops, len(net.grants))
    report = net.report(keep_samples=keep_samples)
    if keep_records:
        report.txop_records = net.txop_records
        report.busy_intervals = {ap: net.medium.sensed_intervals(ap) for ap in scenario.co_bss}
    return report, net
