"""Sample paths of the fractional Erlang queue.

Two generators:

* :func:`simulate_gillespie` runs the semi-Markov chain directly: holding
  times are ``ML_nu(lambda)`` in the empty state and ``ML_nu(lambda + k mu)``
  elsewhere; the jump is an arrival with probability ``lambda/(lambda + k mu)``
  and a phase completion otherwise.
* :func:`simulate_subordinated` builds a classical path and maps every jump
  epoch ``tau`` through the stable subordinator, ``T = sigma_nu(tau)``.

Phases count down: an arrival to the empty queue enters ``(1, k)`` and the
customer in service leaves after phase 1.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError
from .randvar import RngStream, sample_stable
from .transient import QueueParams, StatePhase, m_of_state, state_of_m

__all__ = [
    "SamplePath",
    "SimConfig",
    "m_of_state",
    "state_of_m",
    "simulate_gillespie",
    "simulate_subordinated",
    "simulate_lengths_at",
    "extract_interarrivals",
    "extract_interphase",
    "extract_sojourns",
    "extract_busy_periods",
    "path_to_csv",
    "path_to_json",
]

_BLOCK = 4096


@dataclass(frozen=True)
class SamplePath:
    """Piecewise-constant path: state ``(n[i], s[i])`` holds on ``[times[i], times[i+1])``.

    ``horizon`` is the end of the observation window; for event-count stops
    it equals the last jump time.
    """

    times: np.ndarray
    n: np.ndarray
    s: np.ndarray
    k: int
    horizon: float
    clock: tuple | None = field(default=None, compare=False, repr=False)

    @classmethod
    def from_jumps(cls, jumps, k, horizon):
        times = np.array([float(t) for t, _ in jumps])
        n = np.array([st.n for _, st in jumps], dtype=np.int64)
        s = np.array([st.s for _, st in jumps], dtype=np.int64)
        return cls(times, n, s, int(k), float(horizon))

    @property
    def jumps(self):
        return [(float(t), StatePhase(int(a), int(b)))
                for t, a, b in zip(self.times, self.n, self.s)]

    @property
    def m(self):
        return np.where(self.n == 0, 0, self.k * (self.n - 1) + self.s)

    def state_at(self, t):
        if not 0.0 <= t <= self.horizon:
            raise DomainError("t outside the observation window")
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return StatePhase(int(self.n[i]), int(self.s[i]))

    def arrivals(self):
        """Boolean mask over jumps ``1..`` marking arrival events."""
        return self.n[1:] > self.n[:-1]

    def validate(self):
        """Raise :class:`DomainError` unless every transition is legal."""
        t, n, s, k = self.times, self.n, self.s, self.k
        if t.size == 0 or t[0] != 0.0:
            raise DomainError("path must start at time 0")
        if np.any(np.diff(t) <= 0):
            raise DomainError("jump times must be strictly increasing")
        if t[-1] > self.horizon:
            raise DomainError("jump after the horizon")
        if np.any((n == 0) != (s == 0)) or np.any(s > k) or np.any(n < 0):
            raise DomainError("invalid state in path")
        n0, s0, n1, s1 = n[:-1], s[:-1], n[1:], s[1:]
        start = (n0 == 0) & (n1 == 1) & (s1 == k)
        arrival = (n0 > 0) & (n1 == n0 + 1) & (s1 == s0)
        phase = (n0 > 0) & (s0 > 1) & (n1 == n0) & (s1 == s0 - 1)
        depart = (n0 > 1) & (s0 == 1) & (n1 == n0 - 1) & (s1 == k)
        empty = (n0 == 1) & (s0 == 1) & (n1 == 0) & (s1 == 0)
        bad = ~(start | arrival | phase | depart | empty)
        if bad.any():
            i = int(np.argmax(bad))
            raise DomainError(f"illegal transition at jump {i + 1}: "
                              f"({n0[i]},{s0[i]}) -> ({n1[i]},{s1[i]})")
        return self


@dataclass
class SimConfig:
    """Queue parameters, stop rule (exactly one of ``max_events``/``horizon``) and stream."""

    params: QueueParams
    rng: RngStream
    max_events: int | None = None
    horizon: float | None = None

    def __post_init__(self):
        if (self.max_events is None) == (self.horizon is None):
            raise DomainError("set exactly one of max_events and horizon")
        if self.max_events is not None and self.max_events < 1:
            raise DomainError("max_events must be >= 1")
        if self.horizon is not None and not self.horizon > 0:
            raise DomainError("horizon must be positive")

    def to_dict(self):
        return {"params": asdict(self.params), "seed": self.rng.seed,
                "stream_id": self.rng.stream_id, "max_events": self.max_events,
                "horizon": self.horizon}


class _UnitDraws:
    """Block-buffered ``ML_nu(1)`` variates and uniforms from one stream."""

    def __init__(self, nu, rng):
        self.nu, self.rng = nu, rng
        self._ml = self._u = ()
        self._i = self._j = 0
        # blocks grow so that short paths do not pay for long ones
        self._nml = self._nu = 32

    def ml(self):
        if self._i == len(self._ml):
            size = self._nml
            self._nml = min(2 * size, _BLOCK)
            e = self.rng.exponential(size)
            if self.nu < 1.0:
                e = e ** (1.0 / self.nu) * sample_stable(self.nu, self.rng, size)
            self._ml, self._i = e.tolist(), 0
        self._i += 1
        return self._ml[self._i - 1]

    def uniform(self):
        if self._j == len(self._u):
            size = self._nu
            self._nu = min(2 * size, _BLOCK)
            self._u, self._j = self.rng.uniform(size).tolist(), 0
        self._j += 1
        return self._u[self._j - 1]


def _step(n, s, k, arrival):
    if n == 0:
        return 1, k
    if arrival:
        return n + 1, s
    if s > 1:
        return n, s - 1
    return (n - 1, k) if n > 1 else (0, 0)


def _run_chain(p: QueueParams, nu, draws, stop_time, max_events):
    """Jump times and states of the chain with holding times ``ML_nu``."""
    lam, kmu, k = p.lam, p.phase_rate, p.k
    scale_empty = lam ** (-1.0 / nu)
    scale_busy = (lam + kmu) ** (-1.0 / nu)
    p_arrival = lam / (lam + kmu)
    times, ns, ss = [0.0], [0], [0]
    t, n, s = 0.0, 0, 0
    events = 0
    while events < max_events:
        t += draws.ml() * (scale_empty if n == 0 else scale_busy)
        if t > stop_time:
            break
        arrival = n == 0 or draws.uniform() < p_arrival
        n, s = _step(n, s, k, arrival)
        times.append(t)
        ns.append(n)
        ss.append(s)
        events += 1
    return np.array(times), np.array(ns, dtype=np.int64), np.array(ss, dtype=np.int64)


def simulate_gillespie(cfg: SimConfig) -> SamplePath:
    """Modified Gillespie algorithm with Mittag-Leffler holding times."""
    p = cfg.params
    draws = _UnitDraws(p.nu, cfg.rng)
    stop = math.inf if cfg.horizon is None else cfg.horizon
    limit = cfg.max_events if cfg.max_events is not None else math.inf
    times, n, s = _run_chain(p, p.nu, draws, stop, limit)
    horizon = cfg.horizon if cfg.horizon is not None else float(times[-1])
    return SamplePath(times, n, s, p.k, horizon)


def simulate_subordinated(cfg: SimConfig, resolution=None) -> SamplePath:
    """Classical path evaluated at the inverse stable subordinator.

    Each classical epoch ``tau_i`` maps to ``T_i = sigma_nu(tau_i)``, sampled
    exactly from independent increments ``(tau_i - tau_{i-1})^(1/nu) S_i``.
    With ``resolution`` the subordinator is also sampled on the grid
    ``j * resolution`` (merged with the epochs) and stored in ``path.clock``
    as ``(levels, passage)`` so that ``L_nu`` can be plotted.
    """
    p = cfg.params
    if resolution is not None and not resolution > 0:
        raise DomainError("resolution must be positive")
    classical = p.classical()
    draws = _UnitDraws(1.0, cfg.rng)
    if cfg.horizon is None:
        return _subordinate_events(p, classical, draws, cfg, resolution)
    # classical operational time needed: extend until sigma passes the horizon
    span = max(cfg.horizon ** p.nu, 1.0)
    times = [np.zeros(1)]
    ns, ss = [np.zeros(1, dtype=np.int64)], [np.zeros(1, dtype=np.int64)]
    levels, passage = [np.zeros(1)], [np.zeros(1)]
    tau0, sigma0, n_last, s_last = 0.0, 0.0, 0, 0
    while True:
        # continue the classical chain on (tau0, tau0 + span]
        seg_t, seg_n, seg_s = _continue_chain(classical, draws, tau0, n_last, s_last,
                                              tau0 + span)
        grid = np.empty(0)
        if resolution is not None:
            j0 = math.floor(tau0 / resolution) + 1
            j1 = math.floor((tau0 + span) / resolution)
            grid = resolution * np.arange(j0, j1 + 1)
        lv = np.union1d(np.union1d(seg_t, grid), [tau0 + span])
        inc = np.diff(np.concatenate(([tau0], lv)))
        if p.nu < 1.0:
            inc = inc ** (1.0 / p.nu) * sample_stable(p.nu, cfg.rng, inc.size)
        sig = sigma0 + np.cumsum(inc)
        levels.append(lv)
        passage.append(sig)
        epochs = sig[np.searchsorted(lv, seg_t)]
        keep = epochs <= cfg.horizon
        times.append(epochs[keep])
        ns.append(seg_n[keep])
        ss.append(seg_s[keep])
        if seg_t.size:
            n_last, s_last = int(seg_n[-1]), int(seg_s[-1])
        tau0, sigma0 = float(lv[-1]), float(sig[-1])
        if sigma0 > cfg.horizon:
            break
        span *= 2.0
    clock = None
    if resolution is not None:
        clock = (np.concatenate(levels), np.concatenate(passage))
    return SamplePath(np.concatenate(times), np.concatenate(ns), np.concatenate(ss), p.k,
                      float(cfg.horizon), clock)


def _subordinate_events(p, classical, draws, cfg, resolution):
    """Event-count stop: ``max_events`` classical jumps, each epoch mapped through ``sigma_nu``."""
    tau, n, s = _run_chain(classical, 1.0, draws, math.inf, cfg.max_events)
    grid = np.empty(0)
    if resolution is not None:
        grid = resolution * np.arange(1, math.floor(tau[-1] / resolution) + 1)
    lv = np.union1d(tau, grid)
    inc = np.diff(lv)
    if p.nu < 1.0:
        inc = inc ** (1.0 / p.nu) * sample_stable(p.nu, cfg.rng, inc.size)
    sig = np.concatenate(([0.0], np.cumsum(inc)))
    times = sig[np.searchsorted(lv, tau)]
    clock = (lv, sig) if resolution is not None else None
    return SamplePath(times, n, s, p.k, float(times[-1]), clock)


def _continue_chain(p, draws, tau0, n, s, tau1):
    """Classical chain from state ``(n, s)`` at ``tau0``; epochs in ``(tau0, tau1]``.

    The holding time in progress at ``tau0`` is redrawn, which is exact for
    exponential holding times.
    """
    lam, kmu, k = p.lam, p.phase_rate, p.k
    p_arrival = lam / (lam + kmu)
    times, ns, ss = [], [], []
    t = tau0
    while True:
        t += draws.ml() / (lam if n == 0 else lam + kmu)
        if t > tau1:
            break
        arrival = n == 0 or draws.uniform() < p_arrival
        n, s = _step(n, s, k, arrival)
        times.append(t)
        ns.append(n)
        ss.append(s)
    return np.array(times), np.array(ns, dtype=np.int64), np.array(ss, dtype=np.int64)


def simulate_lengths_at(params: QueueParams, t, paths, rng: RngStream):
    """Queue lengths ``m`` at time ``t`` for ``paths`` independent chains started empty.

    Runs the Gillespie chains in lockstep with vectorised draws; the law is
    that of :func:`simulate_gillespie` observed at ``t``.
    """
    if not t >= 0 or paths < 1:
        raise DomainError("need t >= 0 and paths >= 1")
    nu, lam, kmu, k = params.nu, params.lam, params.phase_rate, params.k
    clock = np.zeros(paths)
    n = np.zeros(paths, dtype=np.int64)
    s = np.zeros(paths, dtype=np.int64)
    active = np.arange(paths)
    while active.size:
        size = active.size
        unit = rng.exponential(size)
        if nu < 1.0:
            unit = unit ** (1.0 / nu) * sample_stable(nu, rng, size)
        na, sa = n[active], s[active]
        rate = np.where(na == 0, lam, lam + kmu)
        clock[active] += unit * rate ** (-1.0 / nu)
        u = rng.uniform(size)
        go = clock[active] <= t
        arrival = (na == 0) | (u < lam / (lam + kmu))
        n_new = np.where(na == 0, 1, np.where(arrival, na + 1, np.where(sa > 1, na, na - 1)))
        s_new = np.where(na == 0, k, np.where(arrival, sa, np.where(sa > 1, sa - 1, k)))
        s_new = np.where(n_new == 0, 0, s_new)
        idx = active[go]
        n[idx], s[idx] = n_new[go], s_new[go]
        active = idx
    return np.where(n == 0, 0, k * (n - 1) + s)


# ---------------------------------------------------------------------------
# extraction


def extract_interarrivals(path: SamplePath):
    """Gaps between successive arrival epochs."""
    epochs = path.times[1:][path.arrivals()]
    return np.diff(epochs)


def extract_interphase(path: SamplePath):
    """Durations from the start of a service phase to its completion.

    A phase starts when service begins at an arrival to the empty queue, or
    at a phase completion that leaves the queue nonempty.
    """
    t, n = path.times, path.n
    completion = np.concatenate(([False], ~path.arrivals()))
    starts = np.concatenate(([False], (n[:-1] == 0) & (n[1:] > 0))) | (completion & (n > 0))
    ends = completion
    end_times = t[ends]
    out = []
    j = 0
    for ts in t[starts]:
        j = np.searchsorted(end_times, ts, side="right")
        if j < end_times.size:
            out.append(end_times[j] - ts)
    return np.array(out)


def extract_sojourns(path: SamplePath, state_class="busy"):
    """Completed holding times in the empty state (``"empty"``) or in ``S*`` (``"busy"``).

    The holding time in progress at the horizon is censored and dropped.
    """
    if state_class not in ("busy", "empty"):
        raise DomainError("state_class must be 'busy' or 'empty'")
    hold = np.diff(path.times)
    empty = path.n[:-1] == 0
    return hold[empty] if state_class == "empty" else hold[~empty]


def extract_busy_periods(path: SamplePath):
    """Durations from each ``(0,0) -> (1,k)`` jump to the next return to ``(0,0)``."""
    n = path.n
    starts = np.flatnonzero((n[:-1] == 0) & (n[1:] > 0)) + 1
    ends = np.flatnonzero((n[:-1] > 0) & (n[1:] == 0)) + 1
    if ends.size == 0:
        return np.empty(0)
    starts = starts[starts < ends[-1]]
    j = np.searchsorted(ends, starts)
    return path.times[ends[j]] - path.times[starts]


# ---------------------------------------------------------------------------
# export


def path_to_csv(path: SamplePath) -> str:
    """CSV text with header ``t,n,s,m``; the state holds until the next row."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "n", "s", "m"])
    for t, a, b, m in zip(path.times, path.n, path.s, path.m):
        w.writerow([f"{t:.16e}", int(a), int(b), int(m)])
    return buf.getvalue()


def path_to_json(path: SamplePath, config=None) -> str:
    """JSON document with the jumps and an echo of the generating configuration."""
    doc = {"config": config, "k": path.k, "horizon": path.horizon,
           "jumps": [{"t": float(t), "n": int(a), "s": int(b)}
                     for t, a, b in zip(path.times, path.n, path.s)]}
    return json.dumps(doc, indent=1)
