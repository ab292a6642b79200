"""
Feedforward rate-1/n convolutional codes.

Register convention: the newest input bit sits on the most significant tap of
each octal generator. A trellis state holds the previous K-1 input bits with
the newest one in the most significant position, so that

    next_state = (u << (K-2)) | (state >> 1)

Every next state therefore fixes the input bit that led to it, and its two
predecessors are ``((ns << 1) & mask) | x`` for ``x`` in {0, 1}.
"""
from __future__ import annotations

import csv
import heapq
import io
from dataclasses import dataclass, field

import numpy as np


class CodeError(ValueError):
    """Invalid code description."""


class CatastrophicCodeError(CodeError):
    """The code has a zero-output cycle outside the all-zero state."""


class EnumerationLimitError(RuntimeError):
    """Error-event enumeration exceeded its configured event cap."""


@dataclass(frozen=True)
class CodeSpec:
    generators: tuple[int, ...]
    constraint_length: int

    def __post_init__(self):
        gens = tuple(int(g) for g in self.generators)
        object.__setattr__(self, "generators", gens)
        K = self.constraint_length
        if K < 2:
            raise CodeError(f"constraint length must be >= 2, got {K}")
        if len(gens) < 2:
            raise CodeError(f"need at least 2 generators, got {len(gens)}")
        for g in gens:
            if g <= 0:
                raise CodeError("generators must be nonzero")
            if g >= 1 << K:
                raise CodeError(f"generator {g:o} is wider than K={K} bits")
        if not any(g >> (K - 1) & 1 for g in gens):
            raise CodeError("no generator taps the newest bit; code is not delay-free")

    @property
    def n_out(self) -> int:
        return len(self.generators)

    @property
    def rate(self) -> float:
        return 1.0 / self.n_out

    @property
    def taps(self) -> np.ndarray:
        """(n_out, K) tap matrix; column k is the tap on the bit delayed by k."""
        K = self.constraint_length
        return np.array(
            [[(g >> (K - 1 - k)) & 1 for k in range(K)] for g in self.generators],
            dtype=np.uint8,
        )

    @classmethod
    def from_text(cls, text: str) -> "CodeSpec":
        """Parse ``"K=7 g=133,171"`` (generators in octal)."""
        fields = dict(
            tok.split("=", 1) for tok in text.replace(";", " ").split() if "=" in tok
        )
        unknown = set(fields) - {"K", "g"}
        if unknown or "K" not in fields or "g" not in fields:
            raise CodeError(f"cannot parse code description {text!r}; expected 'K=<int> g=<oct>,<oct>'")
        try:
            K = int(fields["K"])
            gens = tuple(int(g, 8) for g in fields["g"].split(",") if g)
        except ValueError as exc:
            raise CodeError(f"cannot parse code description {text!r}: {exc}") from None
        return cls(gens, K)

    def to_text(self) -> str:
        return f"K={self.constraint_length} g=" + ",".join(f"{g:o}" for g in self.generators)


@dataclass(frozen=True, eq=False)
class Trellis:
    code: CodeSpec
    next_state: np.ndarray  # (num_states, 2)
    outputs: np.ndarray  # (num_states, 2, n_out) uint8
    out_index: np.ndarray  # (num_states, 2) outputs packed MSB-first
    weight: np.ndarray  # (num_states, 2) Hamming weight of each branch

    @property
    def num_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def n_out(self) -> int:
        return self.code.n_out

    @property
    def memory(self) -> int:
        return self.code.constraint_length - 1

    def predecessors(self) -> np.ndarray:
        """(num_states, 2) predecessor states, lower index first."""
        ns = np.arange(self.num_states)
        mask = self.num_states - 1
        base = (ns << 1) & mask
        return np.stack([base, base | 1], axis=1)


def build_trellis(spec: CodeSpec) -> Trellis:
    K = spec.constraint_length
    num_states = 1 << (K - 1)
    taps = spec.taps
    next_state = np.empty((num_states, 2), dtype=np.int64)
    outputs = np.empty((num_states, 2, spec.n_out), dtype=np.uint8)
    for s in range(num_states):
        past = [(s >> (K - 2 - k)) & 1 for k in range(K - 1)]
        for u in (0, 1):
            reg = np.array([u] + past, dtype=np.uint8)
            outputs[s, u] = (taps @ reg) % 2
            next_state[s, u] = (u << (K - 2)) | (s >> 1)
    packed = np.zeros((num_states, 2), dtype=np.int64)
    for j in range(spec.n_out):
        packed = (packed << 1) | outputs[:, :, j]
    weight = outputs.sum(axis=2).astype(np.int64)
    for arr in (next_state, outputs, packed, weight):
        arr.setflags(write=False)
    return Trellis(spec, next_state, outputs, packed, weight)


def encode(spec: CodeSpec, info_bits, terminate: bool = True) -> np.ndarray:
    """Encode one sequence; output is serialized as [c0(0), c1(0), c0(1), ...]."""
    u = np.asarray(info_bits, dtype=np.uint8).reshape(-1)
    if u.size == 0:
        raise ValueError("info_bits must be nonempty")
    return encode_batch(spec, u[None, :], terminate)[0]


def encode_batch(spec: CodeSpec, info_bits: np.ndarray, terminate: bool = True) -> np.ndarray:
    """Encode each row of a (frames, length) bit array."""
    u = np.asarray(info_bits, dtype=np.uint8)
    K = spec.constraint_length
    if terminate:
        u = np.concatenate([u, np.zeros((u.shape[0], K - 1), dtype=np.uint8)], axis=1)
    F, T = u.shape
    taps = spec.taps
    out = np.zeros((F, T, spec.n_out), dtype=np.uint8)
    for k in range(K):
        delayed = np.zeros_like(u)
        delayed[:, k:] = u[:, : T - k]
        for j in range(spec.n_out):
            if taps[j, k]:
                out[:, :, j] ^= delayed
    return out.reshape(F, T * spec.n_out)


def viterbi_decode(trellis: Trellis, branch_metrics) -> np.ndarray:
    """Minimum-cost decoding of a zero-terminated frame.

    ``branch_metrics`` has shape (steps, n_out, 2): the cost of coded bit j at
    step t being 0 or 1. Returns the information bits without the K-1 tail.

    Ties go to the lower-indexed predecessor state. Since the next state fixes
    the input bit, both competitors at a state always share the same input.
    """
    m = np.asarray(branch_metrics, dtype=float)
    if m.ndim != 3:
        raise ValueError("branch_metrics must have shape (steps, n_out, 2)")
    return viterbi_decode_batch(trellis, m[None])[0]


def viterbi_decode_batch(trellis: Trellis, branch_metrics: np.ndarray) -> np.ndarray:
    """Decode a (frames, steps, n_out, 2) metric array; see :func:`viterbi_decode`."""
    m = np.asarray(branch_metrics, dtype=float)
    n = trellis.n_out
    if m.ndim != 4 or m.shape[2] != n or m.shape[3] != 2:
        raise ValueError(f"branch_metrics must have shape (frames, steps, {n}, 2), got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("branch_metrics contain non-finite values")
    F, T = m.shape[:2]
    mem = trellis.memory
    if T < mem:
        raise ValueError(f"need at least {mem} steps for a terminated trellis")
    S = trellis.num_states

    # cost of every output pattern at every step: (F, T, 2**n)
    patterns = (np.arange(1 << n)[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    bm = np.zeros((F, T, 1 << n))
    for j in range(n):
        bm += m[:, :, j, :][:, :, patterns[:, j]]

    pred = trellis.predecessors()
    u_in = np.arange(S) >> (mem - 1) if mem > 0 else np.zeros(S, dtype=int)
    out0 = trellis.out_index[pred[:, 0], u_in]
    out1 = trellis.out_index[pred[:, 1], u_in]

    pm = np.full((F, S), np.inf)
    pm[:, 0] = 0.0
    decisions = np.empty((T, F, S), dtype=bool)
    for t in range(T):
        c0 = pm[:, pred[:, 0]] + bm[:, t, out0]
        c1 = pm[:, pred[:, 1]] + bm[:, t, out1]
        choose = c1 < c0
        decisions[t] = choose
        pm = np.where(choose, c1, c0)

    bits = np.empty((F, T), dtype=np.uint8)
    state = np.zeros(F, dtype=np.int64)
    rows = np.arange(F)
    for t in range(T - 1, -1, -1):
        bits[:, t] = state >> (mem - 1) if mem > 0 else 0
        x = decisions[t, rows, state]
        state = ((state << 1) & (S - 1)) | x
    return bits[:, : T - mem]


def path_cost(trellis: Trellis, branch_metrics, info_bits) -> float:
    """Total metric of the terminated path that encodes ``info_bits``."""
    m = np.asarray(branch_metrics, dtype=float)
    u = np.concatenate([np.asarray(info_bits, dtype=np.uint8).reshape(-1),
                        np.zeros(trellis.memory, dtype=np.uint8)])
    coded = encode(trellis.code, u, terminate=False).reshape(-1, trellis.n_out)
    return float(np.take_along_axis(m, coded[..., None].astype(int), axis=2).sum())


@dataclass(frozen=True)
class ErrorEvent:
    input_bits: tuple[int, ...]
    coded_bits: tuple[int, ...]
    length: int
    d_H: int

    @property
    def input_weight(self) -> int:
        return sum(self.input_bits)

    def sort_key(self):
        return (self.d_H, self.length, self.coded_bits)


@dataclass(frozen=True)
class EventEnumeration:
    code: CodeSpec
    max_dH: int
    max_L: int
    complete_to_weight: int
    events: tuple[ErrorEvent, ...] = field(repr=False)

    @property
    def min_weight(self) -> int | None:
        return min((e.d_H for e in self.events), default=None)

    @property
    def max_coded_length(self) -> int:
        return max((len(e.coded_bits) for e in self.events), default=0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["event_id", "d_H", "L", "input_bits", "coded_bits"])
        for i, e in enumerate(self.events):
            w.writerow([i, e.d_H, e.length,
                        "".join(map(str, e.input_bits)), "".join(map(str, e.coded_bits))])
        return buf.getvalue()


def _zero_weight_cycle(trellis: Trellis) -> bool:
    """True if zero-output transitions among nonzero states contain a cycle."""
    S = trellis.num_states
    adj = {s: [int(trellis.next_state[s, u]) for u in (0, 1)
               if trellis.weight[s, u] == 0 and trellis.next_state[s, u] != 0]
           for s in range(1, S)}
    color = dict.fromkeys(adj, 0)
    for root in adj:
        if color[root]:
            continue
        stack = [(root, iter(adj[root]))]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = 2
                stack.pop()
            elif color[nxt] == 1:
                return True
            elif color[nxt] == 0:
                color[nxt] = 1
                stack.append((nxt, iter(adj[nxt])))
    return False


def check_noncatastrophic(trellis: Trellis) -> None:
    if _zero_weight_cycle(trellis):
        raise CatastrophicCodeError(f"code {trellis.code.to_text()} is catastrophic")


def _distance_to_zero(trellis: Trellis) -> np.ndarray:
    """Minimum output weight of any path from each state back to state 0."""
    S = trellis.num_states
    dist = np.full(S, np.iinfo(np.int64).max // 4, dtype=np.int64)
    dist[0] = 0
    # reverse Dijkstra
    incoming = [[] for _ in range(S)]
    for s in range(S):
        for u in (0, 1):
            incoming[int(trellis.next_state[s, u])].append((s, int(trellis.weight[s, u])))
    heap = [(0, 0)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for s, w in incoming[v]:
            if s != 0 and d + w < dist[s]:
                dist[s] = d + w
                heapq.heappush(heap, (d + w, s))
    return dist


def _long_path_bound(trellis: Trellis, dist: np.ndarray, steps: int) -> int:
    """Lower bound on d_H of any error event longer than ``steps`` trellis steps."""
    S = trellis.num_states
    inf = np.iinfo(np.int64).max // 4
    w = np.full(S, inf, dtype=np.int64)
    s1 = int(trellis.next_state[0, 1])
    w[s1] = int(trellis.weight[0, 1])
    for _ in range(steps - 1):
        nw = np.full(S, inf, dtype=np.int64)
        for u in (0, 1):
            np.minimum.at(nw, trellis.next_state[:, u], np.minimum(w + trellis.weight[:, u], inf))
        nw[0] = inf
        w = nw
    return int(np.min(w[1:] + dist[1:])) if S > 1 else inf


def completeness_length(trellis: Trellis, max_dH: int, limit: int = 4096) -> int:
    """Smallest L such that every error event longer than L has d_H > max_dH."""
    check_noncatastrophic(trellis)
    dist = _distance_to_zero(trellis)
    for L in range(1, limit + 1):
        if _long_path_bound(trellis, dist, L) > max_dH:
            return L
    raise RuntimeError(f"no completeness length below {limit} steps")


def enumerate_error_events(trellis: Trellis, max_dH: int, max_L: int | None = None,
                           max_events: int = 1_000_000) -> EventEnumeration:
    """All error events with d_H <= max_dH and length <= max_L.

    With ``max_L=None`` the length bound is chosen so that the enumeration is
    complete to ``max_dH``. ``complete_to_weight`` is the largest weight W for
    which every event with d_H <= W is guaranteed to be in the result.
    """
    if max_dH < 1:
        raise ValueError("max_dH must be >= 1")
    if max_L is None:
        max_L = completeness_length(trellis, max_dH)
    if max_L < 1:
        raise ValueError("max_L must be >= 1")

    check_noncatastrophic(trellis)
    dist = _distance_to_zero(trellis)
    unreachable = np.iinfo(np.int64).max // 4
    nxt = trellis.next_state.tolist()
    wt = trellis.weight.tolist()
    outs = [[tuple(int(b) for b in trellis.outputs[s, u]) for u in (0, 1)]
            for s in range(trellis.num_states)]
    # zeros shift the register toward the LSB; state 0 is reached after bit_length steps
    steps_home = [s.bit_length() for s in range(trellis.num_states)]

    events: dict[tuple[int, ...], ErrorEvent] = {}
    s1, w1 = nxt[0][1], wt[0][1]
    stack = [(s1, w1, (1,), outs[0][1])]
    while stack:
        state, w, inp, cod = stack.pop()
        L = len(inp)
        if state == 0:
            if w > max_dH or L > max_L:
                continue
            if cod in events:
                raise CodeError(f"two input paths share coded output {cod}")
            events[cod] = ErrorEvent(inp, cod, L, w)
            if len(events) > max_events:
                raise EnumerationLimitError(
                    f"more than {max_events} events with d_H <= {max_dH}, L <= {max_L}")
            continue
        if dist[state] >= unreachable or w + dist[state] > max_dH or L + steps_home[state] > max_L:
            continue
        for u in (1, 0):
            stack.append((nxt[state][u], w + wt[state][u], inp + (u,), cod + outs[state][u]))

    bound = _long_path_bound(trellis, dist, max_L)
    complete = min(max_dH, bound - 1)
    ordered = tuple(sorted(events.values(), key=ErrorEvent.sort_key))
    return EventEnumeration(trellis.code, max_dH, max_L, complete, ordered)


def free_distance(trellis: Trellis) -> int:
    """Minimum d_H over all error events, by Dijkstra over branch weights."""
    check_noncatastrophic(trellis)
    start = int(trellis.next_state[0, 1])
    best = {start: int(trellis.weight[0, 1])}
    heap = [(best[start], start)]
    while heap:
        d, v = heapq.heappop(heap)
        if v == 0:
            return d
        if d > best.get(v, d):
            continue
        for u in (0, 1):
            ns = int(trellis.next_state[v, u])
            nd = d + int(trellis.weight[v, u])
            if nd < best.get(ns, nd + 1):
                best[ns] = nd
                heapq.heappush(heap, (nd, ns))
    raise CodeError("no path returns to the zero state")

