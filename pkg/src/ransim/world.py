"""Deterministic TTI-stepped downlink world wiring senders, the RAN and
receivers into one closed loop.

Time is in milliseconds. Scheduling eligibility is quantized to TTI
boundaries (a packet that arrived at or before a boundary can be served in
that TTI), while enqueue timestamps keep their exact sub-TTI arrival times
for frame-pattern detection.
"""
from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass

from .baselines import (OracleSender, SconeFeedback, SconeSender,
                        decode_scone, encode_scone)
from .capacity import CellWindows, FlowEstimator
from .codec import GuidanceFeedback, decode_rate, encode_rate
from .eventlog import LEVEL_FULL, EventLog
from .predictor import FlowPredictor, mean_alloc_bw
from .ran import (OVERHEAD_FIXED, OVERHEAD_PER_SEGMENT, FailureScript,
                  FlowQueueState, Packet, RanConfig, assemble_block,
                  prbs_for_bytes, sample_rlc_queue, schedule_prbs)
from .sender import (FRAME_INTERVAL_MS, MTU_PAYLOAD, BaseSender, ChoirSender,
                     VideoFrame)

SCONE_CAPACITY_WINDOW_MS = 16.6  # smoothing horizon for the scone capacity field


@dataclass
class FlowConfig:
    """Scenario-level description of one flow."""

    flow_id: int
    controller: str = "choir"
    wired_nd_ms: float = 10.0
    ack_per_frames: int = 1
    epsilon: int = 1
    encoder_mode: str = "instant"
    start_s: float = 0.0
    stop_s: float | None = None
    initial_bitrate_bps: float = 5e6
    source: str = "video"  # "none" keeps the flow idle for injection tests

    def __post_init__(self):
        if self.source not in ("video", "none"):
            raise ValueError(f"unknown source {self.source!r}")
        if self.ack_per_frames < 1:
            raise ValueError("ack_per_frames must be at least 1")
        if self.epsilon < 1:
            raise ValueError("epsilon must be at least 1")
        if self.wired_nd_ms < 0:
            raise ValueError("wired_nd_ms must be nonnegative")
        if self.stop_s is not None and self.stop_s <= self.start_s:
            raise ValueError("stop_s must exceed start_s")


class ReceiverState:
    """UE-side frame assembly and ACK pacing.

    ACKs are emitted once per ``ack_per_frames`` completed frames. A
    delayed-ACK timer (scaled with the cadence) keeps acknowledgements
    flowing while a frame's completion is stalled behind a deep queue, as a
    real transport receiver would.
    """

    ACK_TIMEOUT_SCALE = 1.2

    def __init__(self, ack_per_frames: int,
                 frame_interval_ms: float = FRAME_INTERVAL_MS):
        self.ack_per_frames = ack_per_frames
        self.ack_timeout_ms = ack_per_frames * frame_interval_ms * \
            self.ACK_TIMEOUT_SCALE
        self.remaining: dict[int, int] = {}
        self.frames_since_ack = 0
        self.bytes_since_ack = 0
        self.last_ack_ts = -math.inf
        self.pending_acks: list[tuple[float, int]] = []

    def register(self, frame: VideoFrame) -> None:
        self.remaining[frame.frame_id] = frame.nbytes

    def on_bytes(self, frame_id: int, nbytes: int, now: float) -> bool:
        """Credit delivered payload; True when the frame just completed."""
        self.bytes_since_ack += nbytes
        left = self.remaining.get(frame_id)
        if left is None:
            return False
        left -= nbytes
        if left > 0:
            self.remaining[frame_id] = left
            return False
        del self.remaining[frame_id]
        return True

    def _emit(self, now: float) -> None:
        self.pending_acks.append((now, self.bytes_since_ack))
        self.frames_since_ack = 0
        self.bytes_since_ack = 0
        self.last_ack_ts = now

    def on_frame_complete(self, now: float) -> None:
        self.frames_since_ack += 1
        if self.frames_since_ack >= self.ack_per_frames:
            self._emit(now)

    def maybe_timeout_ack(self, now: float) -> None:
        if (self.bytes_since_ack > 0
                and now - self.last_ack_ts >= self.ack_timeout_ms):
            self._emit(now)


class FlowRuntime:
    """Everything the world tracks for one flow."""

    def __init__(self, cfg: FlowConfig, sender: BaseSender,
                 queue: FlowQueueState, estimator: FlowEstimator,
                 predictor: FlowPredictor):
        self.cfg = cfg
        self.sender = sender
        self.queue = queue
        self.estimator = estimator
        self.predictor = predictor
        self.receiver = ReceiverState(cfg.ack_per_frames)
        self.frames: list[VideoFrame] = []
        self.frame_by_id: dict[int, VideoFrame] = {}
        self.start_ms = cfg.start_s * 1000.0
        self.stop_ms = math.inf if cfg.stop_s is None else cfg.stop_s * 1000.0
        self.tick_count = 0
        self.attempt_counter = 0
        self.injected_payload = 0
        self.delivered_payload = 0

    def started(self, now: float) -> bool:
        return now >= self.start_ms


def _make_sender(cfg: FlowConfig) -> BaseSender:
    kwargs = dict(epsilon=cfg.epsilon, encoder_mode=cfg.encoder_mode,
                  initial_bps=cfg.initial_bitrate_bps)
    if cfg.controller == "choir":
        return ChoirSender(**kwargs)
    if cfg.controller == "scone":
        return SconeSender(**kwargs)
    if cfg.controller == "oracle":
        return OracleSender(**kwargs)
    raise ValueError(f"unknown controller {cfg.controller!r}")


CONTROLLERS = ("choir", "scone", "oracle")


class SimWorld:
    """One cell, one TTI clock, any number of flows."""

    def __init__(self, ran: RanConfig, seed: int = 0,
                 log_level: str = LEVEL_FULL,
                 failure_script: FailureScript | None = None,
                 check_conservation: bool = False):
        self.ran = ran
        self.pattern = ran.tdd_pattern
        self.rng = random.Random(seed)
        self.seed = seed
        self.tti_index = 0
        self.flows: dict[int, FlowRuntime] = {}
        self._flow_order: list[FlowRuntime] = []
        self.cell = CellWindows(ran.tti_ms)
        self.log = EventLog(log_level)
        self._log_full = log_level == LEVEL_FULL
        self.failure_script = failure_script
        self.check_conservation = check_conservation
        self._rotation = 0
        self._seq = 0
        self._sender_events: list = []   # (ts, seq, kind, flow_id, payload)
        self._gnb_arrivals: list = []    # (ts, seq, flow_id, packet)
        self._pkt_counter = 0
        self._bpp: list[float] = []
        self.duration_ms = 0.0

    # -- wiring -------------------------------------------------------------

    @property
    def now_ms(self) -> float:
        return self.tti_index * self.ran.tti_ms

    def add_flow(self, cfg: FlowConfig) -> FlowRuntime:
        if cfg.flow_id in self.flows:
            raise ValueError(f"duplicate flow_id {cfg.flow_id}")
        sender = _make_sender(cfg)
        if isinstance(sender, OracleSender):
            fid = cfg.flow_id
            sender.truth_fn = lambda now, _fid=fid: self.true_flow_rate(_fid)
        queue = FlowQueueState(cfg.flow_id, cfg.wired_nd_ms)
        estimator = FlowEstimator(self.cell, self.ran.prb_total, self.ran.tti_ms)
        predictor = FlowPredictor(self.ran.tti_ms, cfg.wired_nd_ms)
        fr = FlowRuntime(cfg, sender, queue, estimator, predictor)
        self.flows[cfg.flow_id] = fr
        self._flow_order = [self.flows[k] for k in sorted(self.flows)]
        if cfg.source == "video":
            self._push_sender_event(fr.start_ms, "tick", cfg.flow_id, None)
        return fr

    def inject_packet(self, flow_id: int, ts: float, nbytes: int
                      ) -> VideoFrame:
        """Place one packet, modeled as its own frame, at the base station
        at time ts. Bypasses the sender path; used for delay anatomy."""
        fr = self.flows[flow_id]
        frame = VideoFrame(frame_id=fr.sender.frame_seq, encode_ts=ts,
                           nbytes=nbytes, target_bps=0.0, actual_bps=0.0)
        fr.sender.frame_seq += 1
        fr.frames.append(frame)
        fr.frame_by_id[frame.frame_id] = frame
        fr.receiver.register(frame)
        self._pkt_counter += 1
        pkt = Packet(self._pkt_counter, flow_id, frame.frame_id, nbytes,
                     release_ts=ts)
        self._push_arrival(ts, flow_id, pkt)
        return frame

    def _push_sender_event(self, ts: float, kind: str, flow_id: int,
                           payload) -> None:
        self._seq += 1
        heapq.heappush(self._sender_events, (ts, self._seq, kind, flow_id, payload))

    def _push_arrival(self, ts: float, flow_id: int, packet: Packet) -> None:
        self._seq += 1
        heapq.heappush(self._gnb_arrivals, (ts, self._seq, flow_id, packet))

    def _bpp_at(self, tti_index: int) -> float:
        if tti_index >= len(self._bpp):
            self._bpp = self.ran.schedule.materialize(tti_index + 4096)
        return self._bpp[tti_index]

    def _n_started(self, now: float) -> int:
        return sum(1 for fr in self._flow_order if fr.started(now))

    def true_flow_rate(self, flow_id: int) -> float:
        """Ground-truth per-flow payload drain capacity, bytes/ms."""
        now = self.now_ms
        n = max(1, self._n_started(now))
        bpp = self._bpp_at(self.tti_index)
        share = self.ran.prb_total / n
        grant = share * bpp
        if grant <= OVERHEAD_FIXED + OVERHEAD_PER_SEGMENT + 1:
            return 0.0
        nseg = max(1, math.ceil(grant / MTU_PAYLOAD))
        gamma = 1.0 - (OVERHEAD_FIXED + OVERHEAD_PER_SEGMENT * nseg) / grant
        duty = self.pattern.downlink_duty()
        return grant * gamma * duty * (1.0 - self.ran.bler) / self.ran.tti_ms

    # -- main loop ----------------------------------------------------------

    def run(self, duration_s: float) -> None:
        n_ttis = int(round(duration_s * 1000.0 / self.ran.tti_ms))
        self._bpp = self.ran.schedule.materialize(n_ttis + 8)
        for _ in range(n_ttis):
            advance_tti(self)
            if self.check_conservation:
                self.assert_conservation()
        self.duration_ms = self.now_ms
        self.log.add(self.now_ms, "run_info", -1, 0,
                     f"duration_ms={self.duration_ms!r};seed={self.seed}")

    def step(self) -> None:
        """Advance exactly one TTI."""
        t0 = self.now_ms
        tti = self.ran.tti_ms
        t1 = t0 + tti
        self._process_arrivals(t0)
        self._estimate_and_predict(t0)
        factor = self.pattern.downlink_factor(self.tti_index)
        if factor > 0.0:
            self._downlink(t0, t1, factor)
        else:
            self.cell.close_tti(0.0, False, False, False, 0, 0)
        if self.pattern.can_uplink(self.tti_index):
            self._uplink(t0)
        self._process_sender_events(t0, t1)
        self.tti_index += 1
        self.duration_ms = self.now_ms

    def _process_arrivals(self, t0: float) -> None:
        heap = self._gnb_arrivals
        while heap and heap[0][0] <= t0:
            ts, _, flow_id, pkt = heapq.heappop(heap)
            fr = self.flows[flow_id]
            pkt.arrive_ts = ts
            fr.queue.enqueue(pkt, ts)
            fr.injected_payload += pkt.payload_bytes
            fr.predictor.on_enqueue(ts, pkt.payload_bytes)
            if self._log_full:
                self.log.add(ts, "enqueue", flow_id, pkt.payload_bytes,
                             f"pkt={pkt.pkt_id};frame={pkt.frame_id}")

    def _estimate_and_predict(self, t0: float) -> None:
        n_total = self._n_started(t0)
        for fr in self._flow_order:
            if not fr.started(t0):
                continue
            queued = sample_rlc_queue(fr.queue, t0)
            fr.queue.active = queued > 0
            cap = fr.estimator.compute(t0, n_total)
            fr.predictor.push_bw(cap.alloc_bw)
            pred = fr.predictor.compute(t0, fr.queue.samples)
            if self._log_full:
                self.log.add(
                    t0, "predict", fr.cfg.flow_id, queued,
                    f"pred_q={pred.pred_q!r};guidance={pred.guidance!r};"
                    f"fi={pred.fi!r};bw={cap.alloc_bw!r};"
                    f"mean_bw={pred.mean_bw!r}")

    def _downlink(self, t0: float, t1: float, factor: float) -> None:
        bpp = self._bpp_at(self.tti_index)
        unit = bpp * factor
        active = [fr for fr in self._flow_order
                  if fr.started(t0) and fr.queue.has_demand(t0)]
        capable = factor if unit > 0.0 else 0.0
        if not active or unit <= 0.0:
            self.cell.close_tti(capable, False, False, True, 0, len(active))
            for fr in self._flow_order:
                fr.queue.uprb_last = 0
                if fr.started(t0):
                    fr.estimator.note_grant(0)
            return
        demands: dict[int, int] = {}
        for fr in active:
            q = fr.queue
            if q.has_ready_retx(t0):
                demands[q.flow_id] = max(1, prbs_for_bytes(
                    q.harq_pending[0].bytes, unit))
            else:
                est_overhead = (OVERHEAD_FIXED + OVERHEAD_PER_SEGMENT
                                * (1 + q.queued_bytes // MTU_PAYLOAD))
                demands[q.flow_id] = max(1, prbs_for_bytes(
                    q.queued_bytes + est_overhead, unit))
        alloc = schedule_prbs([fr.queue for fr in active], self.ran.prb_total,
                              demands, self._rotation)
        self._rotation += 1
        prb_used = 0
        any_data = False
        any_retx = False
        active_ids = {fr.cfg.flow_id for fr in active}
        for fr in self._flow_order:
            if fr.cfg.flow_id not in active_ids:
                fr.queue.uprb_last = 0
                if fr.started(t0):
                    fr.estimator.note_grant(0)
                continue
            prbs = alloc.get(fr.cfg.flow_id, 0)
            if prbs <= 0:
                fr.queue.uprb_last = 0
                fr.estimator.note_grant(0)
                continue
            cap_bytes = int(prbs * unit + 1e-9)
            is_retx = fr.queue.has_ready_retx(t0)
            if is_retx:
                block = fr.queue.harq_pending.popleft()
                fr.queue.harq_flight_payload -= block.payload_bytes
            else:
                block = assemble_block(fr.queue, cap_bytes, self.tti_index)
            if block is None:
                fr.queue.uprb_last = 0
                fr.estimator.note_grant(0)
                continue
            uprb = min(prbs, max(1, prbs_for_bytes(block.bytes, unit)))
            fr.queue.uprb_last = uprb
            fr.estimator.note_grant(uprb)
            prb_used += uprb
            any_data = True
            any_retx = any_retx or is_retx
            fr.estimator.note_block(t0, block.bytes, block.overhead_bytes,
                                    uprb, factor)
            self._transmit(fr, block, is_retx, t0, t1, uprb)
        self.cell.close_tti(capable, any_data, any_retx, True,
                            prb_used, len(active))

    def _transmit(self, fr: FlowRuntime, block, is_retx: bool,
                  t0: float, t1: float, uprb: int) -> None:
        fr.attempt_counter += 1
        script = self.failure_script
        if script is not None and script.covers(fr.cfg.flow_id):
            fail = script.should_fail(fr.cfg.flow_id, fr.attempt_counter)
        else:
            fail = self.rng.random() < self.ran.bler
        if self._log_full:
            self.log.add(t0, "tx_block", fr.cfg.flow_id, block.bytes,
                         f"retx={int(is_retx)};prbs={uprb};fail={int(fail)};"
                         f"attempt={fr.attempt_counter}")
        if not fail:
            self._deliver_block(fr, block, t1)
            return
        if block.rtx_count < self.ran.harq_max_rtx:
            block.rtx_count += 1
            block.ready_ms = t0 + self.ran.harq_rtx_delay_ms
            fr.queue.harq_pending.append(block)
            fr.queue.harq_flight_payload += block.payload_bytes
            if self._log_full:
                self.log.add(t0, "harq_fail", fr.cfg.flow_id, block.bytes,
                             f"rtx={block.rtx_count};ready={block.ready_ms!r}")
        else:
            # HARQ exhausted: RLC AM pushes the payload back through the queue
            fr.queue.requeue_tail(block, t0)
            if self._log_full:
                self.log.add(t0, "rlc_requeue", fr.cfg.flow_id,
                             block.payload_bytes, f"rtx={block.rtx_count}")

    def _deliver_block(self, fr: FlowRuntime, block, t1: float) -> None:
        for pkt, nbytes in block.segments:
            fr.delivered_payload += nbytes
            done = fr.receiver.on_bytes(pkt.frame_id, nbytes, t1)
            if done:
                frame = fr.frame_by_id.get(pkt.frame_id)
                if frame is not None:
                    frame.decode_ts = t1
                    self.log.add(t1, "frame_done", fr.cfg.flow_id, frame.nbytes,
                                 f"frame={frame.frame_id};"
                                 f"delay={frame.delay_ms!r}")
                fr.receiver.on_frame_complete(t1)
        fr.receiver.maybe_timeout_ack(t1)
        if self._log_full:
            self.log.add(t1, "deliver", fr.cfg.flow_id, block.payload_bytes,
                         f"segs={len(block.segments)}")

    def _uplink(self, t0: float) -> None:
        for fr in self._flow_order:
            pending = fr.receiver.pending_acks
            while pending and pending[0][0] <= t0:
                ready, acked = pending.pop(0)
                self._stamp_and_forward(fr, t0, acked)

    def _stamp_and_forward(self, fr: FlowRuntime, t0: float,
                           acked_bytes: int) -> None:
        kind = fr.cfg.controller
        if kind == "choir":
            pred = fr.predictor.last_prediction
            guidance = pred.guidance if pred is not None else 0.0
            fb = encode_rate(guidance * 8000.0, stamped_ts=t0)
            wire = fb.to_bytes()
            decoded = decode_rate(fb)
            fr.predictor.record_stamp(t0, (decoded or 0.0) / 8000.0)
            detail = f"guidance={guidance!r}"
        elif kind == "scone":
            window = max(1, round(SCONE_CAPACITY_WINDOW_MS / self.ran.tti_ms))
            capacity = mean_alloc_bw(fr.predictor.bw_ring, window)
            scone_fb = SconeFeedback(capacity=capacity,
                                     queue_len=float(fr.queue.queued_bytes))
            wire = encode_scone(scone_fb, stamped_ts=t0)
            detail = f"capacity={capacity!r};queue={fr.queue.queued_bytes}"
        else:
            wire = b""
            detail = ""
        if self._log_full:
            self.log.add(t0, "ack_stamp", fr.cfg.flow_id, acked_bytes, detail)
        arrive = t0 + fr.cfg.wired_nd_ms
        self._push_sender_event(arrive, "feedback", fr.cfg.flow_id,
                                (kind, wire, t0, acked_bytes))

    def _process_sender_events(self, t0: float, t1: float) -> None:
        heap = self._sender_events
        while heap and heap[0][0] < t1:
            ts, _, kind, flow_id, payload = heapq.heappop(heap)
            fr = self.flows[flow_id]
            if kind == "tick":
                self._frame_tick(fr, ts)
            elif kind == "feedback":
                self._apply_feedback(fr, ts, payload)

    def _frame_tick(self, fr: FlowRuntime, ts: float) -> None:
        if ts >= fr.stop_ms:
            return
        frame = fr.sender.encode_frame(ts)
        fr.frames.append(frame)
        fr.frame_by_id[frame.frame_id] = frame
        fr.receiver.register(frame)
        self.log.add(ts, "frame_encode", fr.cfg.flow_id, frame.nbytes,
                     f"frame={frame.frame_id};target={frame.target_bps!r};"
                     f"actual={frame.actual_bps!r}")
        for nbytes, offset in fr.sender.packet_release_offsets(frame.nbytes):
            self._pkt_counter += 1
            pkt = Packet(self._pkt_counter, fr.cfg.flow_id, frame.frame_id,
                         nbytes, release_ts=ts + offset)
            self._push_arrival(ts + offset + fr.cfg.wired_nd_ms,
                               fr.cfg.flow_id, pkt)
        fr.tick_count += 1
        next_ts = fr.start_ms + fr.tick_count * fr.sender.frame_interval_ms
        if next_ts < fr.stop_ms:
            self._push_sender_event(next_ts, "tick", fr.cfg.flow_id, None)

    def _apply_feedback(self, fr: FlowRuntime, ts: float, payload) -> None:
        kind, wire, stamp_ts, acked_bytes = payload
        fr.sender.on_ack_bytes(ts, acked_bytes)
        if kind == "choir":
            fb = GuidanceFeedback.from_bytes(wire, stamped_ts=stamp_ts)
            fr.sender.on_feedback(fb, ts)
        elif kind == "scone":
            scone_fb = decode_scone(wire, stamped_ts=stamp_ts)
            fr.sender.on_feedback((scone_fb, stamp_ts), ts)
        if self._log_full:
            self.log.add(ts, "feedback_apply", fr.cfg.flow_id, acked_bytes,
                         f"stamp={stamp_ts!r}")

    # -- invariants ----------------------------------------------------------

    def assert_conservation(self) -> None:
        """Injected payload must equal delivered + queued + HARQ in flight."""
        for fr in self._flow_order:
            total = (fr.delivered_payload + fr.queue.queued_bytes
                     + fr.queue.harq_flight_payload)
            if total != fr.injected_payload:
                raise AssertionError(
                    f"flow {fr.cfg.flow_id}: injected {fr.injected_payload} "
                    f"!= accounted {total} at tti {self.tti_index}")

    def frames_by_flow(self) -> dict[int, list[VideoFrame]]:
        return {fid: fr.frames for fid, fr in sorted(self.flows.items())}


def advance_tti(world: SimWorld) -> SimWorld:
    """Process exactly one TTI of the world and return it."""
    world.step()
    return world
