"""JSON run configuration: sections ``code``, ``interleaver``, ``phy`` and ``sim``."""
from __future__ import annotations

import copy
import json
import math

from .convcode import CodeSpec
from .interleaver import InterleaverSpec
from .mimo_phy import get_constellation
from .simulator import SimConfig

DEFAULTS = {
    "code": {"constraint_length": 7, "generators": ["133", "171"]},
    "interleaver": {"streams": 2, "bits_per_symbol": None, "period": 4, "kind": "round-robin",
                    "mode": "sc", "subcarriers": 1, "table": None},
    "phy": {"constellation": "qpsk", "nt": 2, "nr": 2, "channel": "rayleigh"},
    "sim": {"snr_db": [0, 2, 4, 6, 8, 10, 12], "info_bits_per_frame": 1024, "max_frames": 10000,
            "target_bit_errors": 500, "coded": True, "batch_frames": 64, "fit_window": None,
            "min_fit_errors": 100, "seed": None},
}


class RunConfigError(ValueError):
    pass


def _merge(user: dict) -> dict:
    if not isinstance(user, dict):
        raise RunConfigError("config must be a JSON object")
    unknown = set(user) - set(DEFAULTS)
    if unknown:
        raise RunConfigError(f"unknown config sections: {sorted(unknown)}")
    out = copy.deepcopy(DEFAULTS)
    for section, values in user.items():
        if not isinstance(values, dict):
            raise RunConfigError(f"section {section!r} must be an object")
        bad = set(values) - set(DEFAULTS[section])
        if bad:
            raise RunConfigError(f"unknown keys in {section!r}: {sorted(bad)}")
        out[section].update(values)
    return out


def _snr(v) -> float:
    # "inf" is the noiseless sentinel
    if isinstance(v, str):
        v = float(v)
    return float(v)


def resolve(user: dict, seed: int | None = None) -> dict:
    """Fill defaults, reject unknown keys and pin the seed."""
    cfg = _merge(user)
    sim = cfg["sim"]
    if seed is not None:
        if sim["seed"] is not None and sim["seed"] != seed:
            raise RunConfigError(f"--seed {seed} disagrees with the config seed {sim['seed']}")
        sim["seed"] = seed
    if cfg["interleaver"]["bits_per_symbol"] is None:
        cfg["interleaver"]["bits_per_symbol"] = get_constellation(cfg["phy"]["constellation"]).bits_per_symbol
    sim["snr_db"] = [_snr(v) for v in sim["snr_db"]]
    return cfg


def code_spec(cfg: dict) -> CodeSpec:
    c = cfg["code"]
    return CodeSpec(tuple(int(str(g), 8) for g in c["generators"]), int(c["constraint_length"]))


def interleaver_spec(cfg: dict) -> InterleaverSpec:
    il = cfg["interleaver"]
    table = tuple(tuple(s) for s in il["table"]) if il.get("table") is not None else None
    return InterleaverSpec(int(il["streams"]), int(il["bits_per_symbol"]), int(il["period"]),
                           il["kind"], il["mode"], int(il.get("subcarriers", 1)), table)


def interleaver_section(spec: InterleaverSpec) -> dict:
    return {"streams": spec.num_streams, "bits_per_symbol": spec.bits_per_symbol,
            "period": spec.period, "kind": spec.kind, "mode": spec.mode,
            "subcarriers": spec.num_subcarriers,
            "table": [list(s) for s in spec.table] if spec.table is not None else None}


def sim_config(cfg: dict) -> SimConfig:
    if cfg["sim"]["seed"] is None:
        raise RunConfigError("simulation needs a seed")
    phy, sim = cfg["phy"], cfg["sim"]
    il = interleaver_spec(cfg)
    return SimConfig(
        code=code_spec(cfg),
        interleaver=il,
        constellation=phy["constellation"],
        nt=int(phy["nt"]),
        nr=int(phy["nr"]),
        streams=il.num_streams,
        snr_db=tuple(sim["snr_db"]),
        info_bits_per_frame=int(sim["info_bits_per_frame"]),
        max_frames=int(sim["max_frames"]),
        target_bit_errors=int(sim["target_bit_errors"]),
        master_seed=int(sim["seed"]),
        channel=phy["channel"],
        coded=bool(sim["coded"]),
        batch_frames=int(sim["batch_frames"]),
    )


def dumps(cfg: dict) -> str:
    """Canonical single-line JSON; infinite SNR is written as the string "inf"."""
    c = copy.deepcopy(cfg)
    c["sim"]["snr_db"] = ["inf" if math.isinf(v) and v > 0 else v for v in c["sim"]["snr_db"]]
    return json.dumps(c, sort_keys=True, separators=(",", ":"))
