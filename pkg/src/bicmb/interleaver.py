"""
Bit interleavers onto (stream, symbol time, bit slot[, subcarrier]) grids and
checks of the design criteria over enumerated error events.

Streams are 0-based in arrays and 1-based in every text, JSON and table output.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .convcode import CodeSpec, ErrorEvent, EventEnumeration

KINDS = ("round-robin", "block", "custom")
MODES = ("sc", "ofdm")

CRITERIA = {
    "sc": {1: "consecutive coded bits on different symbols",
           2: "alpha_s >= 1 for every stream"},
    "ofdm": {1: "consecutive coded bits on different symbols",
             2: "consecutive coded bits on different subcarriers",
             3: "alpha_s >= 1 for every stream"},
}


class InterleaverError(ValueError):
    pass


@dataclass(frozen=True)
class InterleaverSpec:
    num_streams: int
    bits_per_symbol: int
    period: int
    kind: str = "round-robin"
    mode: str = "sc"
    num_subcarriers: int = 1
    # custom kind only: one (stream [1-based], time, bit_slot[, subcarrier]) per coded bit
    table: Optional[tuple[tuple[int, ...], ...]] = None

    def __post_init__(self):
        S, B, P = self.num_streams, self.bits_per_symbol, self.period
        if S < 1 or B < 1 or P < 1:
            raise InterleaverError("S, B and P must be positive")
        if self.kind not in KINDS:
            raise InterleaverError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.mode not in MODES:
            raise InterleaverError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.num_subcarriers < 1:
            raise InterleaverError("Nc must be >= 1")
        if self.mode == "sc" and self.num_subcarriers != 1:
            raise InterleaverError("single-carrier mode takes no subcarriers")
        if P % (S * B):
            raise InterleaverError(f"P={P} is not a multiple of S*B={S * B}")
        if self.kind == "custom":
            if self.table is None or len(self.table) != P:
                raise InterleaverError(f"custom table must have exactly P={P} entries")
            width = 4 if self.mode == "ofdm" else 3
            table = tuple(tuple(int(v) for v in slot) for slot in self.table)
            if any(len(slot) != width for slot in table):
                raise InterleaverError(f"custom table entries need {width} fields in {self.mode} mode")
            object.__setattr__(self, "table", table)
        else:
            if self.table is not None:
                raise InterleaverError(f"kind {self.kind!r} takes no table")
            if P % (S * B * self.num_subcarriers):
                raise InterleaverError(
                    f"P={P} is not a multiple of S*B*Nc={S * B * self.num_subcarriers}")
            if self.kind == "block" and P // S < 1:
                raise InterleaverError("block kind needs P >= S")

    @classmethod
    def from_text(cls, text: str) -> "InterleaverSpec":
        """Parse ``S=2 B=1 mode=sc kind=round-robin P=32`` style descriptions.

        ``#`` starts a comment. Custom maps use ``kind=custom table=1:0:0,2:0:0,...``
        with one ``stream:time:slot[:subcarrier]`` tuple per coded bit.
        """
        tokens = []
        for line in text.splitlines():
            tokens += line.split("#", 1)[0].split()
        fields = {}
        for tok in tokens:
            if "=" not in tok:
                raise InterleaverError(f"malformed token {tok!r}")
            k, v = tok.split("=", 1)
            if k in fields:
                raise InterleaverError(f"duplicate key {k!r}")
            fields[k] = v
        unknown = set(fields) - {"S", "B", "P", "mode", "kind", "Nc", "table"}
        if unknown:
            raise InterleaverError(f"unknown keys: {sorted(unknown)}")
        try:
            table = None
            if "table" in fields:
                table = tuple(tuple(int(x) for x in slot.split(":"))
                              for slot in fields["table"].split(",") if slot)
            return cls(
                num_streams=int(fields["S"]),
                bits_per_symbol=int(fields.get("B", 1)),
                period=int(fields["P"]),
                kind=fields.get("kind", "round-robin"),
                mode=fields.get("mode", "sc"),
                num_subcarriers=int(fields.get("Nc", 1)),
                table=table,
            )
        except KeyError as exc:
            raise InterleaverError(f"missing key {exc.args[0]!r}") from None
        except ValueError as exc:
            if isinstance(exc, InterleaverError):
                raise
            raise InterleaverError(str(exc)) from None

    def to_text(self) -> str:
        parts = [f"S={self.num_streams}", f"B={self.bits_per_symbol}", f"mode={self.mode}"]
        if self.mode == "ofdm":
            parts.append(f"Nc={self.num_subcarriers}")
        parts += [f"kind={self.kind}", f"P={self.period}"]
        if self.table is not None:
            parts.append("table=" + ",".join(":".join(map(str, s)) for s in self.table))
        return " ".join(parts)

    def to_dict(self) -> dict:
        d = {"streams": self.num_streams, "bits_per_symbol": self.bits_per_symbol,
             "period": self.period, "kind": self.kind, "mode": self.mode,
             "subcarriers": self.num_subcarriers}
        if self.table is not None:
            d["table"] = [list(s) for s in self.table]
        return d


@dataclass(frozen=True, eq=False)
class InterleaverMap:
    spec: InterleaverSpec
    stream: np.ndarray  # 0-based
    time: np.ndarray
    bit_slot: np.ndarray
    subcarrier: Optional[np.ndarray]
    symbols_per_period: int

    @property
    def period(self) -> int:
        return self.spec.period

    @property
    def num_streams(self) -> int:
        return self.spec.num_streams

    def locate(self, index):
        """(stream, time, bit_slot, subcarrier) for coded-bit indices of any size."""
        idx = np.asarray(index, dtype=np.int64)
        r = idx % self.period
        t = self.time[r] + (idx // self.period) * self.symbols_per_period
        c = self.subcarrier[r] if self.subcarrier is not None else None
        return self.stream[r], t, self.bit_slot[r], c

    def slot(self, index: int) -> tuple[int, ...]:
        s, t, b, c = self.locate(index)
        out = (int(s) + 1, int(t), int(b))
        return out + (int(c),) if c is not None else out

    def as_custom_spec(self) -> InterleaverSpec:
        table = tuple(self.slot(i) for i in range(self.period))
        s = self.spec
        return InterleaverSpec(s.num_streams, s.bits_per_symbol, s.period, "custom",
                               s.mode, s.num_subcarriers, table)


def _fill(k: np.ndarray, B: int, Nc: int):
    """Within-stream fill: B bits per symbol, subcarriers before symbol times."""
    b = k % B
    q = k // B
    return q // Nc, b, q % Nc


def build_map(spec: InterleaverSpec) -> InterleaverMap:
    S, B, P, Nc = spec.num_streams, spec.bits_per_symbol, spec.period, spec.num_subcarriers
    i = np.arange(P)
    if spec.kind == "round-robin":
        stream = i % S
        t, b, c = _fill(i // S, B, Nc)
        per = P // (S * B * Nc)
    elif spec.kind == "block":
        share = P // S
        stream = i // share
        t, b, c = _fill(i % share, B, Nc)
        per = P // (S * B * Nc)
    else:
        tab = np.array(spec.table, dtype=np.int64)
        stream, t, b = tab[:, 0] - 1, tab[:, 1], tab[:, 2]
        c = tab[:, 3] if spec.mode == "ofdm" else np.zeros(P, dtype=np.int64)
        bad = ((stream < 0) | (stream >= S) | (t < 0) | (b < 0) | (b >= B)
               | (c < 0) | (c >= Nc))
        if bad.any():
            j = int(np.flatnonzero(bad)[0])
            raise InterleaverError(f"table entry {j} {spec.table[j]} is outside the S/B/Nc grid")
        per = int(t.max()) + 1
        seen = {}
        for j, slot in enumerate(spec.table):
            if slot in seen:
                raise InterleaverError(
                    f"custom table is not a bijection: slot {slot} used by bits {seen[slot]} and {j}")
            seen[slot] = j
    arrays = [np.ascontiguousarray(a, dtype=np.int64) for a in (stream, t, b, c)]
    for a in arrays:
        a.setflags(write=False)
    return InterleaverMap(spec, arrays[0], arrays[1], arrays[2],
                          arrays[3] if spec.mode == "ofdm" else None, per)


@dataclass(frozen=True)
class AlphaVector:
    alpha: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.alpha)

    @property
    def has_zero(self) -> bool:
        return 0 in self.alpha


def alpha_vector(imap: InterleaverMap, event: ErrorEvent, phase: int) -> AlphaVector:
    if not 0 <= phase < imap.period:
        raise ValueError(f"phase must lie in [0, {imap.period})")
    ones = np.flatnonzero(np.asarray(event.coded_bits, dtype=np.uint8))
    streams = imap.locate(phase + ones)[0]
    return AlphaVector(tuple(int(v) for v in np.bincount(streams, minlength=imap.num_streams)))


@dataclass(frozen=True)
class Violation:
    event_id: int
    phase: int
    criterion: int
    witness: dict

    def sort_key(self):
        return (self.event_id, self.phase, self.criterion)


@dataclass
class CriteriaReport:
    mode: str
    verdicts: dict[int, bool]
    violations: list[Violation]
    events_checked: int
    phases_checked: int
    complete_to_weight: Optional[int]
    warnings: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "passed": self.passed,
            "criteria": {str(k): {"description": CRITERIA[self.mode][k], "pass": v}
                         for k, v in self.verdicts.items()},
            "events_checked": self.events_checked,
            "phases_checked": self.phases_checked,
            "complete_to_weight": self.complete_to_weight,
            "violation_count": len(self.violations),
            "violations": [{"event_id": v.event_id, "phase": v.phase,
                            "criterion": v.criterion, "witness": v.witness}
                           for v in self.violations],
            "warnings": list(self.warnings),
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self, max_rows: int = 20) -> str:
        lines = [f"mode: {self.mode}    events: {self.events_checked}    "
                 f"phases: {self.phases_checked}    complete to d_H <= {self.complete_to_weight}",
                 f"{'criterion':<10}{'verdict':<9}description"]
        for k, ok in self.verdicts.items():
            lines.append(f"{k:<10}{'pass' if ok else 'FAIL':<9}{CRITERIA[self.mode][k]}")
        if self.violations:
            lines.append(f"violations: {len(self.violations)} (first {min(max_rows, len(self.violations))})")
            lines.append(f"{'event':>7}{'phase':>7}{'crit':>6}  witness")
            for v in self.violations[:max_rows]:
                lines.append(f"{v.event_id:>7}{v.phase:>7}{v.criterion:>6}  "
                             + json.dumps(v.witness, sort_keys=True))
        for w in self.warnings:
            lines.append(f"warning: {w}")
        for n in self.notes:
            lines.append(f"note: {n}")
        return "\n".join(lines)


def _check_event(imap: InterleaverMap, event_id: int, event: ErrorEvent, ofdm: bool) -> list[Violation]:
    P, S = imap.period, imap.num_streams
    coded = np.asarray(event.coded_bits, dtype=np.uint8)
    n_c = coded.size
    phases = np.arange(P)
    pos = phases[:, None] + np.arange(n_c)[None, :]
    stream, t, _, c = imap.locate(pos)
    alpha_id = 3 if ofdm else 2
    out = []

    same_symbol = (stream[:, :-1] == stream[:, 1:]) & (t[:, :-1] == t[:, 1:])
    if ofdm:
        same_symbol &= c[:, :-1] == c[:, 1:]
        same_sc = c[:, :-1] == c[:, 1:]
    ones = np.flatnonzero(coded)
    counts = np.zeros((P, S), dtype=np.int64)
    np.add.at(counts, (np.repeat(phases, ones.size), stream[:, ones].ravel()), 1)

    for p in range(P):
        if same_symbol[p].any():
            j = int(np.argmax(same_symbol[p]))
            out.append(Violation(event_id, p, 1, {
                "positions": [p + j, p + j + 1],
                "slots": [list(imap.slot(p + j)), list(imap.slot(p + j + 1))]}))
        if ofdm and same_sc[p].any():
            j = int(np.argmax(same_sc[p]))
            out.append(Violation(event_id, p, 2, {
                "positions": [p + j, p + j + 1],
                "subcarrier": int(c[p, j])}))
        if (counts[p] == 0).any():
            out.append(Violation(event_id, p, alpha_id, {
                "alpha": [int(v) for v in counts[p]], "d_H": event.d_H}))
    return out


def _structural_note(imap: InterleaverMap, code: Optional[CodeSpec]) -> Optional[str]:
    spec = imap.spec
    if (code is None or spec.kind != "round-robin" or spec.mode != "sc"
            or spec.num_streams < 2 or code.n_out % spec.num_streams):
        return None
    return ("structural argument (round-robin family, independent of the bounded check): "
            f"with S={spec.num_streams} dividing n_out={code.n_out}, at every phase each stream "
            "carries the complete output sequences of a fixed subset of generators; a nonzero "
            "generator applied to a nonzero finite input gives a nonzero output, so alpha_s >= 1 "
            "for every error event of any weight, and consecutive coded bits always change stream")


def _verify(imap: InterleaverMap, events: EventEnumeration, ofdm: bool, workers: int) -> CriteriaReport:
    mode = "ofdm" if ofdm else "sc"
    evs = list(events.events)
    if workers > 1 and len(evs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda a: _check_event(imap, a[0], a[1], ofdm), enumerate(evs)))
    else:
        chunks = [_check_event(imap, i, e, ofdm) for i, e in enumerate(evs)]
    violations = sorted((v for ch in chunks for v in ch), key=Violation.sort_key)
    failed = {v.criterion for v in violations}
    verdicts = {k: k not in failed for k in CRITERIA[mode]}
    warnings, notes = [], []
    if not evs:
        warnings.append("empty event set: nothing was checked")
    if imap.num_streams == 1:
        notes.append("single stream: the alpha criterion reduces to alpha_1 = d_H >= 1")
    note = _structural_note(imap, events.code)
    if note:
        notes.append(note)
    return CriteriaReport(mode, verdicts, violations, len(evs), imap.period,
                          events.complete_to_weight, warnings, notes)


def verify_single_carrier(imap: InterleaverMap, events: EventEnumeration,
                          workers: int = 1) -> CriteriaReport:
    """Check distinct-symbol and alpha criteria for every event at every phase."""
    if imap.spec.mode != "sc":
        raise InterleaverError("verify_single_carrier needs a single-carrier map")
    return _verify(imap, events, False, workers)


def verify_ofdm(imap: InterleaverMap, events: EventEnumeration, workers: int = 1) -> CriteriaReport:
    """As :func:`verify_single_carrier`, plus distinct subcarriers for consecutive bits."""
    if imap.spec.mode != "ofdm":
        raise InterleaverError("verify_ofdm needs an OFDM map")
    return _verify(imap, events, True, workers)


def verify(imap: InterleaverMap, events: EventEnumeration, workers: int = 1) -> CriteriaReport:
    if imap.spec.mode == "ofdm":
        return verify_ofdm(imap, events, workers)
    return verify_single_carrier(imap, events, workers)


@dataclass
class SearchResult:
    passed: bool
    map: InterleaverMap
    report: CriteriaReport
    candidates_evaluated: int
    best_violation_count: int


def _permuted_fill(base: InterleaverMap, rng: np.random.Generator) -> InterleaverMap:
    """Keep each bit's stream, shuffle which of that stream's slots it takes."""
    stream = base.stream
    t, b = base.time.copy(), base.bit_slot.copy()
    c = base.subcarrier.copy() if base.subcarrier is not None else None
    for s in range(base.num_streams):
        idx = np.flatnonzero(stream == s)
        perm = idx[rng.permutation(idx.size)]
        t[idx], b[idx] = base.time[perm], base.bit_slot[perm]
        if c is not None:
            c[idx] = base.subcarrier[perm]
    table = tuple(
        (int(stream[i]) + 1, int(t[i]), int(b[i])) + ((int(c[i]),) if c is not None else ())
        for i in range(base.period))
    s = base.spec
    return build_map(InterleaverSpec(s.num_streams, s.bits_per_symbol, s.period, "custom",
                                     s.mode, s.num_subcarriers, table))


def search_interleaver(code: CodeSpec, template: InterleaverSpec, events: EventEnumeration,
                       budget: int, seed: int = 0, workers: int = 1) -> SearchResult:
    """Return the first candidate map that passes every criterion.

    Candidate 0 is the template itself (round-robin for the default template);
    candidate k >= 1 shuffles the within-stream fill of the template with a
    generator seeded by ``(seed, k)``. On budget exhaustion the result carries
    the candidate with the fewest violations and ``passed=False``.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not events.events:
        raise ValueError("search needs a nonempty event set")
    if events.code != code:
        raise ValueError("events were enumerated for a different code")
    base = build_map(template)
    best = None
    for k in range(budget):
        cand = base if k == 0 else _permuted_fill(base, np.random.default_rng([seed, k]))
        report = verify(cand, events, workers)
        if report.passed:
            return SearchResult(True, cand, report, k + 1, 0)
        if best is None or len(report.violations) < len(best[1].violations):
            best = (cand, report)
    return SearchResult(False, best[0], best[1], budget, len(best[1].violations))
