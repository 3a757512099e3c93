"""Tracking and verification as two cooperating workers.

Two logical workers cooperate through one-directional mailboxes:

* the tracking worker processes every frame, keeps a per-frame snapshot
  of its state since the last verified frame, and sends a
  :class:`VerifyRequest` every ``V`` frames;
* the verifying worker scores the requested box, re-detects on failure and
  answers with a :class:`VerifyResponse`.

A failed verification with an accepted detection makes the tracker roll
back to the snapshot before the verified frame, re-learn at the corrected
box and replay the frames it has already processed.

``mode="parallel"`` runs the verifier on its own thread. ``mode=
"deterministic"`` interleaves both workers on one thread: a request sent
after frame ``k`` is answered once the tracker has finished frame
``k + latency``.
"""

from __future__ import annotations

import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any

from .geometry import BoundingBox, Frame
from .tracker import CorrelationTracker
from .verifier import DetectionConfig, Verifier, adapt_search

log = logging.getLogger(__name__)

EVENT_KINDS = (
    "request",
    "pass",
    "fail",
    "correct",
    "replay",
    "stale",
    "v_change",
    "beta_change",
    "update",
)


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    V_default: int = 10
    V_min: int = 1
    mode: str = "deterministic"
    latency: int = 2  # frames, deterministic mode only
    verifier_delay: float = 0.0  # seconds added to every verification
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    mailbox_size: int = 16

    def __post_init__(self):
        if self.V_min < 1 or self.V_default < self.V_min:
            raise ValueError("need V_default >= V_min >= 1")
        if self.mode not in ("parallel", "deterministic"):
            raise ValueError(f"mode must be 'parallel' or 'deterministic', got {self.mode!r}")
        if self.latency < 0:
            raise ValueError("latency must be >= 0")
        if self.verifier_delay < 0:
            raise ValueError("verifier_delay must be >= 0")
        if self.mailbox_size < 1:
            raise ValueError("mailbox_size must be >= 1")


# -- messages --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class VerifyRequest:
    frame_index: int
    box: BoundingBox
    frame: Frame
    epoch: int = 0


@dataclass(frozen=True)
class VerifyResponse:
    frame_index: int
    passed: bool
    score: float
    V: int
    beta: float
    correction: BoundingBox | None = None
    detection_score: float | None = None
    epoch: int = 0

    def __post_init__(self):
        if self.V < 1:
            raise ValueError("V must be >= 1")
        if self.passed and self.correction is not None:
            raise ValueError("a passing response carries no correction")


@dataclass(frozen=True)
class _EpochNotice:
    epoch: int


_STOP = object()


@dataclass(frozen=True, eq=False)
class ModelSnapshot:
    frame_index: int
    state: Any  # tracker state after processing ``frame_index``
    box: BoundingBox

    @property
    def filter_model(self):
        return getattr(self.state, "filter", None)

    @property
    def scale_model(self):
        return getattr(self.state, "scale", None)


# -- event log -------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, BoundingBox):
        return ",".join(f"{v:.6f}" for v in value.as_tuple())
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


@dataclass(frozen=True)
class Event:
    frame: int
    kind: str
    fields: tuple = ()

    def get(self, key, default=None):
        for k, v in self.fields:
            if k == key:
                return v
        return default

    def format(self) -> str:
        parts = [f"frame={self.frame}", f"event={self.kind}"]
        parts += [f"{k}={_fmt(v)}" for k, v in self.fields]
        return " ".join(parts)


class EventLog:
    """Append-only, thread-safe list of :class:`Event` records."""

    def __init__(self):
        self._events: list[Event] = []
        self._lock = threading.Lock()

    def add(self, frame: int, kind: str, **fields) -> Event:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        ev = Event(frame, kind, tuple(fields.items()))
        with self._lock:
            self._events.append(ev)
        log.debug(ev.format())
        return ev

    def __iter__(self):
        return iter(self.snapshot())

    def __len__(self):
        with self._lock:
            return len(self._events)

    def snapshot(self) -> list[Event]:
        with self._lock:
            return list(self._events)

    def of_kind(self, kind: str) -> list[Event]:
        return [e for e in self.snapshot() if e.kind == kind]

    def count(self, kind: str) -> int:
        return len(self.of_kind(kind))

    def lines(self) -> list[str]:
        return [e.format() for e in self.snapshot()]


# -- mailbox ---------------------------------------------------------------


class Mailbox:
    """Bounded, never-blocking-on-put message box.

    When full, the oldest message is evicted and returned so the sender can
    log it; readers take everything that is pending in one call.
    """

    def __init__(self, maxsize: int):
        self._items: deque = deque()
        self._maxsize = maxsize
        self._cond = threading.Condition()

    def put(self, item):
        with self._cond:
            evicted = None
            if len(self._items) >= self._maxsize:
                evicted = self._items.popleft()
            self._items.append(item)
            self._cond.notify()
            return evicted

    def take_all(self, block: bool = False, timeout: float | None = None) -> list:
        with self._cond:
            if block:
                self._cond.wait_for(lambda: bool(self._items), timeout)
            items = list(self._items)
            self._items.clear()
            return items

    def __len__(self):
        with self._cond:
            return len(self._items)


# -- verifying worker ------------------------------------------------------


class VerifyingWorker:
    """Owns the verifier, its detection config and the current interval ``V``."""

    def __init__(self, verifier: Verifier, config: EngineConfig, events: EventLog):
        self.verifier = verifier
        self.config = config
        self.events = events
        self.detection = config.detection
        self.V = config.V_default
        self.epoch = 0
        self.processed = 0

    def select(self, items: list) -> VerifyRequest | None:
        """Keep only the newest current-epoch request; log the rest as stale."""
        requests = []
        for item in items:
            if isinstance(item, _EpochNotice):
                self.epoch = max(self.epoch, item.epoch)
            elif isinstance(item, VerifyRequest):
                requests.append(item)
        live = [r for r in requests if r.epoch >= self.epoch]
        for r in requests:
            if r not in live[-1:]:
                self.events.add(r.frame_index, "stale", source="verifier", epoch=r.epoch)
        return live[-1] if live else None

    def process(self, req: VerifyRequest) -> VerifyResponse:
        cfg = self.config
        if cfg.verifier_delay > 0:
            time.sleep(cfg.verifier_delay)
        self.processed += 1
        s = float(self.verifier.score(req.frame, req.box))
        det = self.detection
        if s >= det.tau1:
            self.events.add(req.frame_index, "pass", score=s)
            new_det, new_V = replace(det, beta=det.beta_default), cfg.V_default
            correction, det_score = None, None
        else:
            cand = self.verifier.detect(req.frame, req.box, det)
            det_score = float(cand.score)
            new_det, accepted = adapt_search(det, det_score)
            if accepted:
                correction, new_V = cand.box, cfg.V_default
            else:
                correction, new_V = None, max(cfg.V_min, self.V // 2)
            self.events.add(
                req.frame_index,
                "fail",
                score=s,
                detection=det_score,
                accepted=int(accepted),
                beta=det.beta,
            )
        if new_det.beta != det.beta:
            self.events.add(req.frame_index, "beta_change", old=det.beta, new=new_det.beta)
        self.detection = new_det
        self.V = new_V
        return VerifyResponse(
            frame_index=req.frame_index,
            passed=s >= det.tau1,
            score=s,
            V=new_V,
            beta=new_det.beta,
            correction=correction,
            detection_score=det_score,
            epoch=req.epoch,
        )


# -- tracking worker -------------------------------------------------------


@dataclass
class RunResult:
    boxes: list[BoundingBox]
    events: EventLog
    requests: int = 0
    corrections: int = 0
    replayed: int = 0
    step_times: list[float] = field(default_factory=list)


class TrackingWorker:
    """Owns the tracker state, the snapshot buffer and the verification schedule."""

    def __init__(self, tracker, frames: list[Frame], config: EngineConfig, events: EventLog, verify: bool):
        self.tracker = tracker
        self.frames = frames
        self.config = config
        self.events = events
        self.verify = verify
        self.V = config.V_default
        self.last_request = 0
        self.epoch = 0
        self.current = 0
        self.state = None
        self.boxes: list[BoundingBox | None] = [None] * len(frames)
        self.snapshots: dict[int, ModelSnapshot] = {}
        self.requests = 0
        self.corrections = 0
        self.replayed = 0
        self.step_times: list[float] = []

    def initialize(self, box: BoundingBox):
        frame = self.frames[0]
        self.state = self.tracker.initialize(frame, box)
        self.boxes[0] = box
        self.snapshots[0] = ModelSnapshot(0, self.state, box)

    def tracking_step(self, frame: Frame, replay: bool = False) -> VerifyRequest | None:
        t0 = time.perf_counter()
        self.state = self.tracker.step(self.state, frame)
        box = self.state.box
        self.boxes[frame.index] = box
        self.snapshots[frame.index] = ModelSnapshot(frame.index, self.state, box)
        self.current = frame.index
        if not replay:
            self.step_times.append(time.perf_counter() - t0)
        self.events.add(frame.index, "update", replay=int(replay))
        if replay or not self.verify:
            return None
        if frame.index - self.last_request >= self.V:
            self.last_request = frame.index
            self.requests += 1
            self.events.add(frame.index, "request", box=box, V=self.V, epoch=self.epoch)
            return VerifyRequest(frame.index, box, frame, self.epoch)
        return None

    def _trim(self, keep_from: int):
        for k in [k for k in self.snapshots if k < keep_from]:
            del self.snapshots[k]

    def handle_feedback(self, resp: VerifyResponse) -> bool:
        """Apply a response. Returns True when a rollback happened."""
        if resp.epoch != self.epoch:
            self.events.add(resp.frame_index, "stale", source="tracker", epoch=resp.epoch)
            return False
        if resp.frame_index not in self.snapshots:
            self.events.add(resp.frame_index, "stale", source="tracker", reason="unknown_frame")
            log.warning("response for frame %d has no snapshot; dropped", resp.frame_index)
            return False
        if resp.V != self.V:
            self.events.add(resp.frame_index, "v_change", old=self.V, new=resp.V)
            self.V = resp.V
        if resp.passed:
            self._trim(resp.frame_index)
            return False
        if resp.correction is not None:
            self.trace_back_and_resume(resp.frame_index, resp.correction)
            return True
        return False

    def trace_back_and_resume(self, anchor: int, box: BoundingBox):
        prev = self.snapshots.get(anchor - 1)
        if prev is None:
            raise ProtocolError(f"no snapshot before frame {anchor}")
        end = self.current
        self.corrections += 1
        self.events.add(anchor, "correct", box=box, replay_to=end)
        self.state = self.tracker.reinitialize(prev.state, self.frames[anchor], box)
        self.boxes[anchor] = box
        self.snapshots[anchor] = ModelSnapshot(anchor, self.state, box)
        self._trim(anchor)
        for k in [k for k in self.snapshots if k > anchor]:
            del self.snapshots[k]
        self.current = anchor
        for i in range(anchor + 1, end + 1):
            self.events.add(i, "replay", anchor=anchor)
            self.tracking_step(self.frames[i], replay=True)
            self.replayed += 1
        self.epoch += 1
        self.last_request = anchor

    def result(self) -> RunResult:
        return RunResult(
            boxes=list(self.boxes),
            events=self.events,
            requests=self.requests,
            corrections=self.corrections,
            replayed=self.replayed,
            step_times=list(self.step_times),
        )


# -- engine ----------------------------------------------------------------


class PTAVEngine:
    def __init__(self, tracker=None, verifier: Verifier | None = None, config: EngineConfig | None = None):
        self.tracker = tracker or CorrelationTracker()
        self.verifier = verifier
        self.config = config or EngineConfig()

    def run(self, frames: list[Frame], init_box: BoundingBox) -> RunResult:
        frames = list(frames)
        if not frames:
            raise ValueError("sequence has no frames")
        if init_box is None:
            raise ValueError("an initial box for frame 0 is required")
        for i, f in enumerate(frames):
            if f.index != i:
                raise ValueError(f"frame at position {i} has index {f.index}")
        events = EventLog()
        tw = TrackingWorker(self.tracker, frames, self.config, events, verify=self.verifier is not None)
        tw.initialize(init_box)
        vw = None
        if self.verifier is not None:
            self.verifier.initialize(frames[0], init_box)
            vw = VerifyingWorker(self.verifier, self.config, events)
        if vw is None:
            for f in frames[1:]:
                tw.tracking_step(f)
        elif self.config.mode == "deterministic":
            self._run_deterministic(tw, vw, frames)
        else:
            self._run_parallel(tw, vw, frames)
        return tw.result()

    def _run_deterministic(self, tw: TrackingWorker, vw: VerifyingWorker, frames):
        latency = self.config.latency
        inbox: deque = deque()
        in_flight: tuple[int, VerifyResponse] | None = None  # (due frame, response)

        def dispatch(now: int):
            nonlocal in_flight
            if in_flight is None and inbox:
                pending = list(inbox)
                inbox.clear()
                req = vw.select(pending)
                if req is not None:
                    in_flight = (now + latency, vw.process(req))

        def deliver(now: int):
            nonlocal in_flight
            while in_flight is not None and in_flight[0] <= now:
                _, resp = in_flight
                in_flight = None
                if tw.handle_feedback(resp):
                    inbox.append(_EpochNotice(tw.epoch))
                dispatch(now)

        for f in frames[1:]:
            deliver(f.index - 1)
            req = tw.tracking_step(f)
            if req is not None:
                inbox.append(req)
            dispatch(f.index)
        last = len(frames) - 1
        # drain: the sequence is over, answers are applied as they arrive
        while in_flight is not None or any(isinstance(i, VerifyRequest) for i in inbox):
            if in_flight is None:
                dispatch(last)
                if in_flight is None:
                    break
            deliver(in_flight[0])

    def _run_parallel(self, tw: TrackingWorker, vw: VerifyingWorker, frames):
        requests = Mailbox(self.config.mailbox_size)
        responses = Mailbox(self.config.mailbox_size)
        errors: list[BaseException] = []

        def verifying_loop():
            try:
                stop = False
                while not stop:
                    items = requests.take_all(block=True)
                    stop = any(i is _STOP for i in items)
                    req = vw.select([i for i in items if i is not _STOP])
                    if req is not None:
                        responses.put(vw.process(req))
            except BaseException as exc:  # surfaced on the tracking side
                errors.append(exc)

        def send(item):
            evicted = requests.put(item)
            if isinstance(evicted, VerifyRequest):
                tw.events.add(evicted.frame_index, "stale", source="mailbox", epoch=evicted.epoch)

        def apply(resps):
            for resp in resps:
                if tw.handle_feedback(resp):
                    send(_EpochNotice(tw.epoch))

        worker = threading.Thread(target=verifying_loop, name="ptav-verifier", daemon=True)
        worker.start()
        try:
            for f in frames[1:]:
                apply(responses.take_all())
                req = tw.tracking_step(f)
                if req is not None:
                    send(req)
        finally:
            send(_STOP)
            worker.join()
        if errors:
            raise errors[0]
        apply(responses.take_all())
