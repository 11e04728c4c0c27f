"""Queue-length prediction and guidance bandwidth for one downlink flow.

From enqueue timestamps alone the base station learns the flow's frame
cadence, predicts how many in-flight frames will land before a rate change
can take effect, nets that against the expected drain, and feeds back the
rate that empties the queue within one frame interval while using 95% of the
allocated bandwidth.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

ETA_DEFAULT = 0.95           # fraction of allocated bandwidth handed out
FI_ALPHA = 0.8               # EWMA weight on the previous frame-interval estimate
ERR_WEIGHT = 0.5             # EWMA weight for the feedback error correction
FI_NOMINAL_MS = 16.6         # assumed cadence before the first frame is seen
GAP_THRESHOLD_MS = 2.5       # inter-packet gap that separates frames; paced
                             # release at rho=1.25 leaves only ~0.2*FI of idle
                             # gap between frames, so the threshold must sit
                             # between that and the in-frame packet spacing
HISTORY_CAPACITY = 256


def detect_frame_boundary(prev_pkt_ts: float, pkt_ts: float,
                          gap_threshold: float) -> bool:
    """True when the inter-packet gap strictly exceeds the threshold."""
    return pkt_ts - prev_pkt_ts > gap_threshold


def update_frame_interval(fi_est: float | None, new_fi: float,
                          alpha: float = FI_ALPHA) -> float | None:
    """EWMA update of the frame-interval estimate; rejects new_fi <= 0."""
    if new_fi <= 0:
        return fi_est
    if fi_est is None:
        return new_fi
    return alpha * fi_est + (1.0 - alpha) * new_fi


def mean_alloc_bw(bw_samples, n_tti: int) -> float:
    """Mean of the last n_tti per-TTI bandwidth samples (fewer during warm-up)."""
    if n_tti < 1:
        raise ValueError("n_tti must be at least 1")
    n = len(bw_samples)
    if n == 0:
        return 0.0
    take = min(n_tti, n)
    total = 0.0
    for i in range(n - take, n):
        total += bw_samples[i]
    return total / take


def inflight_frame_count(wired_nd: float, fi: float) -> int:
    """Frames in flight plus the one generated before feedback lands."""
    if fi <= 0:
        raise ValueError("frame interval must be positive")
    return int(math.floor(2.0 * wired_nd / fi)) + 1


def decision_horizon(tti_len: float, fi: float, fnum: int) -> float:
    """Time until a newly guided frame can reach the base station, ms."""
    return tti_len + fi * fnum


def history_window(now: float, fi: float, fnum: int, wired_nd: float
                   ) -> tuple[float, float]:
    """Lookback interval for the feedback that governed in-flight frame fnum.

    The raw bound arithmetic yields an inverted pair, so the result is
    normalized to (min, max).
    """
    a = now - fi * (fnum - 1) - 2.0 * wired_nd
    b = now - fi * fnum - 2.0 * wired_nd
    return (min(a, b), max(a, b))


def min_rlc_queue(samples, window: float, now: float) -> float:
    """Minimum queue sample in (now - window, now]; 0 when none fall inside."""
    lo = now - window
    best = None
    for ts, value in reversed(samples):
        if ts <= lo:
            break
        if ts <= now and (best is None or value < best):
            best = value
    return 0.0 if best is None else best


def predict_queue(hist, err: float, fi: float, rlc_q_min: float,
                  mean_bw: float, t_horizon: float) -> float:
    """Queue length expected once current guidance takes effect, clamped >= 0.

    hist carries one governing feedback rate per in-flight frame; each frame
    contributes a frame interval's worth of bytes at its corrected rate,
    while the allocated bandwidth drains over the whole decision horizon.
    """
    if fi <= 0:
        raise ValueError("frame interval must be positive")
    enqueued = sum(h - err for h in hist) * fi
    return max(0.0, enqueued + rlc_q_min - mean_bw * t_horizon)


def update_error_correction(err_est: float, hist_entry: float,
                            actual_arrival_rate: float,
                            weight: float = ERR_WEIGHT) -> float:
    """EWMA of guidance-vs-arrival discrepancy, applied to later predictions."""
    return (1.0 - weight) * err_est + weight * (hist_entry - actual_arrival_rate)


def guidance_bw(mean_bw: float, drain_rate: float, eta: float = ETA_DEFAULT
                ) -> float:
    """Feedback rate: eta of the allocated bandwidth minus the drain need.

    Clamped at zero: when draining the queue needs more than the allocation,
    the sender is told to stop.
    """
    if not 0 < eta < 1:
        raise ValueError("eta must be in (0, 1)")
    return max(0.0, eta * mean_bw - drain_rate)


@dataclass
class FramePatternState:
    """Frame cadence learned from enqueue timestamps."""

    gap_threshold: float = GAP_THRESHOLD_MS
    alpha: float = FI_ALPHA
    fi_est: float | None = None
    last_pkt_ts: float | None = None
    frame_head_ts: float | None = None
    frame_bytes: float = 0.0


@dataclass
class FeedbackHistory:
    """Ring of stamped guidance values plus the error-correction state."""

    capacity: int = HISTORY_CAPACITY
    err_est: float = 0.0
    entries: deque = field(default_factory=deque)

    def record(self, ts: float, bw: float) -> None:
        if self.entries and ts <= self.entries[-1][0]:
            return  # keep timestamps strictly increasing
        self.entries.append((ts, bw))
        if len(self.entries) > self.capacity:
            self.entries.popleft()

    def latest_at_or_before(self, ts: float) -> tuple[float, float] | None:
        for entry in reversed(self.entries):
            if entry[0] <= ts:
                return entry
        return None

    def latest_in(self, lo: float, hi: float) -> tuple[float, float] | None:
        for entry in reversed(self.entries):
            if entry[0] < lo:
                return None
            if entry[0] <= hi:
                return entry
        return None

    def select(self, now: float, fi: float, fnum: int, wired_nd: float
               ) -> list[float]:
        """Governing feedback rate for each of the fnum in-flight frames.

        Per frame k the most recent entry inside its lookback window is
        taken; an empty window falls back to the nearest entry below the
        window's upper bound. Frames with no usable entry are skipped.
        """
        rates: list[float] = []
        for k in range(1, fnum + 1):
            lo, hi = history_window(now, fi, k, wired_nd)
            entry = self.latest_in(lo, hi) or self.latest_at_or_before(hi)
            if entry is not None:
                rates.append(entry[1])
        return rates


@dataclass(frozen=True)
class QueuePrediction:
    """Full per-TTI prediction record, kept for logging and tests."""

    now: float
    fi: float
    n_tti: int
    mean_bw: float
    fnum: int
    t_horizon: float
    lower_t: float
    upper_t: float
    rlc_q_min: float
    pred_q: float
    drain_rate: float
    guidance: float
    eta: float
    warm_up: bool


class FlowPredictor:
    """Per-flow prediction state machine driven by the TTI loop."""

    def __init__(self, tti_ms: float, wired_nd: float,
                 eta: float = ETA_DEFAULT,
                 gap_threshold: float = GAP_THRESHOLD_MS,
                 fi_nominal: float = FI_NOMINAL_MS):
        self.tti_ms = tti_ms
        self.wired_nd = wired_nd
        self.eta = eta
        self.fi_nominal = fi_nominal
        self.pattern = FramePatternState(gap_threshold=gap_threshold)
        self.history = FeedbackHistory()
        self.bw_ring: list[float] = []
        self.last_prediction: QueuePrediction | None = None

    def on_enqueue(self, ts: float, nbytes: int) -> None:
        """Feed one wire arrival into frame detection and error correction."""
        p = self.pattern
        if p.last_pkt_ts is None:
            p.frame_head_ts = ts
            p.frame_bytes = float(nbytes)
        elif detect_frame_boundary(p.last_pkt_ts, ts, p.gap_threshold):
            fi_n = ts - p.frame_head_ts
            if fi_n > 0 and p.frame_bytes > 0:
                self._note_completed_frame(p.frame_head_ts, fi_n, p.frame_bytes)
            p.fi_est = update_frame_interval(p.fi_est, fi_n, p.alpha)
            p.frame_head_ts = ts
            p.frame_bytes = float(nbytes)
        else:
            p.frame_bytes += nbytes
        p.last_pkt_ts = ts

    def _note_completed_frame(self, head_ts: float, fi_n: float,
                              frame_bytes: float) -> None:
        # Pair the finished frame with the feedback the sender was acting on
        # when it was encoded: stamped roughly one wired round trip earlier.
        entry = self.history.latest_at_or_before(
            head_ts - 2.0 * self.wired_nd)
        if entry is None:
            return
        actual_rate = frame_bytes / fi_n
        self.history.err_est = update_error_correction(
            self.history.err_est, entry[1], actual_rate)

    def push_bw(self, bw: float) -> None:
        self.bw_ring.append(bw)
        if len(self.bw_ring) > 4096:
            del self.bw_ring[:2048]

    def compute(self, now: float, queue_samples) -> QueuePrediction:
        """Recompute the guidance for this TTI from current windows."""
        fi = self.pattern.fi_est if self.pattern.fi_est else self.fi_nominal
        n_tti = max(1, round(fi / self.tti_ms))
        mean_bw = mean_alloc_bw(self.bw_ring, n_tti)
        rlc_q_min = min_rlc_queue(queue_samples, fi, now)
        fnum = inflight_frame_count(self.wired_nd, fi)
        t_horizon = decision_horizon(self.tti_ms, fi, fnum)
        lower_t, upper_t = history_window(now, fi, fnum, self.wired_nd)
        warm_up = self.pattern.fi_est is None or not self.history.entries
        if warm_up:
            pred_q = rlc_q_min
        else:
            hist = self.history.select(now, fi, fnum, self.wired_nd)
            if hist:
                pred_q = predict_queue(hist, self.history.err_est, fi,
                                       rlc_q_min, mean_bw, t_horizon)
            else:
                pred_q = rlc_q_min
                warm_up = True
        drain_rate = pred_q / fi
        guidance = guidance_bw(mean_bw, drain_rate, self.eta)
        pred = QueuePrediction(
            now=now, fi=fi, n_tti=n_tti, mean_bw=mean_bw, fnum=fnum,
            t_horizon=t_horizon, lower_t=lower_t, upper_t=upper_t,
            rlc_q_min=rlc_q_min, pred_q=pred_q, drain_rate=drain_rate,
            guidance=guidance, eta=self.eta, warm_up=warm_up)
        self.last_prediction = pred
        return pred

    def record_stamp(self, ts: float, guidance: float) -> None:
        """Remember a guidance value actually placed on an uplink ACK."""
        self.history.record(ts, guidance)
