"""
Command-line front end.

Exit codes: 0 success or pass, 1 usage or runtime error, 2 criteria violation.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from . import config as runcfg
from .convcode import CodeError, CodeSpec, build_trellis, enumerate_error_events, free_distance
from .interleaver import InterleaverError, InterleaverSpec, build_map, search_interleaver, verify
from .simulator import SNR_CONVENTION, InsufficientPointsError, estimate_diversity, sweep_snr

TOOL = f"bicmb {__version__}"
EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _events(code: CodeSpec, max_dh: int | None, max_len: int | None):
    trellis = build_trellis(code)
    dfree = free_distance(trellis)
    if max_dh is None:
        max_dh = dfree + 4
    if max_dh < 1:
        raise UsageError("--max-dh must be >= 1")
    if max_len is not None and max_len < 1:
        raise UsageError("--max-len must be >= 1")
    return dfree, enumerate_error_events(trellis, max_dh, max_len)


def _read_interleaver(path: str) -> InterleaverSpec:
    try:
        return InterleaverSpec.from_text(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read interleaver file: {exc}") from None


def cmd_enumerate(args) -> int:
    code = CodeSpec.from_text(args.code)
    dfree, en = _events(code, args.max_dh, args.max_len)
    header = (f"# tool={TOOL}\n# code={code.to_text()} max_dh={en.max_dH} max_len={en.max_L}\n")
    _write(args.out, header + en.to_csv())
    summary = (f"d_free={dfree} events={len(en.events)} max_dh={en.max_dH} "
               f"max_len={en.max_L} complete_to_weight={en.complete_to_weight}")
    print(summary, file=sys.stdout if args.out else sys.stderr)
    return EXIT_OK


def _verify_payload(code, spec, en, report) -> dict:
    return {"tool": TOOL, "code": code.to_text(), "interleaver": spec.to_text(),
            "bounds": {"max_dh": en.max_dH, "max_len": en.max_L}, "report": report.to_dict()}


def cmd_verify(args) -> int:
    code = CodeSpec.from_text(args.code)
    spec = _read_interleaver(args.interleaver)
    if args.mode is not None and args.mode != spec.mode:
        raise UsageError(f"--mode {args.mode} but the interleaver file is mode={spec.mode}")
    _, en = _events(code, args.max_dh, args.max_len)
    report = verify(build_map(spec), en, workers=args.workers)
    print(report.to_table())
    if args.out:
        Path(args.out).write_text(json.dumps(_verify_payload(code, spec, en, report),
                                             indent=2, sort_keys=True) + "\n")
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_search(args) -> int:
    if args.budget < 1:
        raise UsageError("--budget must be >= 1")
    code = CodeSpec.from_text(args.code)
    template = (_read_interleaver(args.interleaver) if args.interleaver
                else InterleaverSpec(2, 1, 2))
    _, en = _events(code, args.max_dh, args.max_len)
    if not en.events:
        raise UsageError("no error events within the bounds")
    result = search_interleaver(code, template, en, args.budget, seed=args.seed, workers=args.workers)
    if result.passed:
        spec = template if result.candidates_evaluated == 1 else result.map.spec
        text = f"# {TOOL} search: pass after {result.candidates_evaluated} candidate(s), " \
               f"code {code.to_text()}, complete to d_H <= {en.complete_to_weight}\n{spec.to_text()}\n"
        _write(args.out, text)
        print(result.report.to_table(), file=sys.stderr)
        return EXIT_OK
    payload = {"tool": TOOL, "code": code.to_text(), "template": template.to_text(),
               "budget": args.budget, "seed": args.seed, "passed": False,
               "best_violation_count": result.best_violation_count,
               "best_candidate": result.map.as_custom_spec().to_text(),
               "report": result.report.to_dict()}
    print(result.report.to_table(), file=sys.stderr)
    _write(args.out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_VIOLATION


def _run_sim(cfg: dict, workers: int):
    sc = runcfg.sim_config(cfg)
    curve = sweep_snr(sc, workers=workers)
    comments = [f"tool={TOOL}", f"snr_convention={SNR_CONVENTION}", f"config={runcfg.dumps(cfg)}"]
    csv_text = curve.to_csv(comments)
    sim = cfg["sim"]
    window = tuple(sim["fit_window"]) if sim["fit_window"] is not None else None
    try:
        est = estimate_diversity(curve, window, int(sim["min_fit_errors"]))
        div = est.to_dict()
    except InsufficientPointsError as exc:
        est, div = None, {"error": str(exc)}
    div_doc = {"tool": TOOL, "config": json.loads(runcfg.dumps(cfg)), "diversity": div}
    return csv_text, est, json.dumps(div_doc, indent=2, sort_keys=True) + "\n"


def cmd_simulate(args) -> int:
    if args.seed is None:
        raise UsageError("simulate requires --seed")
    if args.seed < 0:
        raise UsageError("--seed must be nonnegative")
    try:
        user = json.loads(Path(args.config).read_text()) if args.config else {}
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    cfg = runcfg.resolve(user, args.seed)
    csv_text, est, div_json = _run_sim(cfg, args.workers)

    outputs = {"ber.csv": csv_text, "diversity.json": div_json}
    if args.compare:
        other = _read_interleaver(args.compare)
        cfg2 = json.loads(json.dumps(cfg))
        cfg2["interleaver"] = runcfg.interleaver_section(other)
        csv2, est2, div2 = _run_sim(cfg2, args.workers)
        gap = (est.order - est2.order) if est and est2 else None
        comparison = {"tool": TOOL, "primary_interleaver": runcfg.interleaver_spec(cfg).to_text(),
                      "compare_interleaver": other.to_text(),
                      "primary_order": est.order if est else None,
                      "compare_order": est2.order if est2 else None, "order_gap": gap}
        outputs.update({"ber_compare.csv": csv2, "diversity_compare.json": div2,
                        "comparison.json": json.dumps(comparison, indent=2, sort_keys=True) + "\n"})

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in outputs.items():
            (out / name).write_text(text)
    else:
        sys.stdout.write(csv_text)
        for line in div_json.splitlines():
            sys.stdout.write(f"# diversity: {line}\n")
    if args.compare:
        gap = json.loads(outputs["comparison.json"])["order_gap"]
        print("order_gap=" + ("n/a" if gap is None else f"{gap:.3f}"),
              file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bicmb", description=__doc__.strip().splitlines()[0])
    p.add_argument("--version", action="version", version=TOOL)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def code_args(sp):
        sp.add_argument("--code", default="K=7 g=133,171", help="e.g. 'K=7 g=133,171' (octal)")
        sp.add_argument("--max-dh", type=int, default=None, help="default: d_free + 4")
        sp.add_argument("--max-len", type=int, default=None,
                        help="default: long enough to be complete to --max-dh")

    e = sub.add_parser("enumerate", help="list error events as CSV")
    code_args(e)
    e.add_argument("--out")
    e.set_defaults(func=cmd_enumerate)

    v = sub.add_parser("verify", help="check an interleaver against the design criteria")
    code_args(v)
    v.add_argument("--interleaver", required=True)
    v.add_argument("--mode", choices=["sc", "ofdm"])
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--out", help="write the JSON report here")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("search", help="search for a criteria-compliant interleaver")
    code_args(s)
    s.add_argument("--interleaver", help="template file (default: S=2 B=1 round-robin P=2)")
    s.add_argument("--budget", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_search)

    m = sub.add_parser("simulate", help="Monte Carlo BER sweep and diversity fit")
    m.add_argument("--config")
    m.add_argument("--seed", type=int)
    m.add_argument("--compare", help="second interleaver file to run on the same config")
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--out", help="output directory")
    m.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_ERROR
    if getattr(args, "workers", 1) < 1:
        print("bicmb: error: --workers must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (UsageError, CodeError, InterleaverError, runcfg.RunConfigError, ValueError) as exc:
        print(f"bicmb: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # runtime failure keeps the stable exit code
        print(f"bicmb: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
