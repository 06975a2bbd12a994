"""Command-line surface: correct, eval, selfcheck, trace-view.

Exit codes: 0 success, 1 usage error, 2 data error, 3 scorer transport
error, 4 selfcheck failure. All randomness flows from --seed; per-instance
chains derive their streams from (seed, instance id), so outputs and traces
are byte-identical across runs and across --jobs settings.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .data import ClaimInstance, LoadIssue, dump_record, load_instances
from .energy import EnergyWeights
from .engine import SamplerConfig, chain_rng, run
from .metrics import EvalItem, evaluate_corpus
from .oracle import run_selfcheck
from .protocol import ProtocolError, RemoteFailure, RemoteTimeout, ScorerClient, open_transport
from .reference import build_reference_scorers
from .remote import remote_suite
from .state import build_evidence, detokenize, tokenize

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TRANSPORT = 3
EXIT_SELFCHECK = 4

ENDPOINT_ENV = "VERIEDIT_ENDPOINT"
TRACE_SCHEMA = "veriedit-trace-v1"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def parse_weights(text: str) -> EnergyWeights:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("weights must be w_lm,w_v,w_h")
    try:
        w = [float(p) for p in parts]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    try:
        return EnergyWeights(*w)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` file; later keys win, '#' starts a comment."""
    out: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="veriedit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("correct", help="correct claims toward their evidence")
    pc.add_argument("input", help="line-delimited JSON instances")
    pc.add_argument("output", help="output records path")
    pc.add_argument("--config", help="key = value config file (CLI flags win)")
    pc.add_argument("--iterations", type=_positive_int, default=None)
    pc.add_argument("--seed", type=int, default=None)
    pc.add_argument("--alpha", type=float, default=None)
    pc.add_argument("--weights", type=parse_weights, default=None, metavar="W_LM,W_V,W_H")
    pc.add_argument("--scorer", choices=("reference", "remote"), default=None)
    pc.add_argument("--endpoint", default=None, help="tcp:HOST:PORT or stdio:CMD")
    pc.add_argument("--gazetteer", default=None, help="file with one extra entity per line")
    pc.add_argument("--jobs", type=_positive_int, default=None)
    pc.add_argument("--trace", default=None, help="write per-iteration trace records here")

    pe = sub.add_parser("eval", help="score outputs against gold corrections")
    pe.add_argument("outputs", help="records produced by the correct command")
    pe.add_argument("gold", help="instance file with gold/label fields")
    pe.add_argument("--report", default=None, help="write per-instance scores here")
    pe.add_argument("--sari-ngrams", type=_positive_int, default=4, help="max n-gram order")

    ps = sub.add_parser("selfcheck", help="certify the sampler on built-in toy spaces")
    ps.add_argument("--space", default=None, choices=("single-state", "symmetric", "full"))
    ps.add_argument("--steps", type=_positive_int, default=100_000, help="empirical chain length")
    ps.add_argument(
        "--mutation",
        default=None,
        choices=("corrupt-reverse", "drop-alpha", "stale-p1"),
        help="test hook: corrupt one kernel factor and expect detection to fail the run",
    )

    pt = sub.add_parser("trace-view", help="pretty-print a trace file")
    pt.add_argument("trace", help="trace file written by correct --trace")
    pt.add_argument("--instance", default=None, help="only this instance id")
    return parser


def _report_issues(issues: list[LoadIssue], path: str) -> None:
    for issue in issues:
        print(f"{path}:{issue.line}: {issue.reason}", file=sys.stderr)


def _correct_one(
    inst: ClaimInstance,
    config: SamplerConfig,
    scorer_kind: str,
    endpoint: str | None,
    extra_entities: tuple[tuple[str, ...], ...],
) -> tuple[dict, list[dict]]:
    claim = tokenize(inst.claim)
    evidence = build_evidence(
        (tokenize(p) for p in inst.evidence), claim, extra_entities=extra_entities
    )
    if scorer_kind == "remote":
        client = ScorerClient(open_transport(endpoint or ""))
        try:
            scorers, proposer = remote_suite(client)
            result = run(claim, evidence, scorers, proposer, config, rng=chain_rng(config.seed, inst.id))
        finally:
            client.close()
    else:
        scorers, proposer = build_reference_scorers(claim, evidence)
        result = run(claim, evidence, scorers, proposer, config, rng=chain_rng(config.seed, inst.id))
    record = {
        "id": inst.id,
        "corrected": detokenize(result.best),
        "energy": {
            "e_lm": result.best_energy.e_lm,
            "e_v": result.best_energy.e_v,
            "e_h": result.best_energy.e_h,
            "total": result.best_energy.total,
        },
        "iterations_run": config.iterations,
        "accepted_count": len(result.accepted_states),
    }
    trace_rows = [dict(rec.to_dict(), instance=inst.id) for rec in result.trace]
    return record, trace_rows


def cmd_correct(args: argparse.Namespace) -> int:
    file_cfg = parse_config_file(args.config) if args.config else {}

    def setting(flag_value, key: str, cast, default):
        if flag_value is not None:
            return flag_value
        if key in file_cfg:
            return cast(file_cfg[key])
        return default

    iterations = setting(args.iterations, "iterations", int, 20)
    if iterations < 1:
        raise UsageError("iterations must be >= 1")
    seed = setting(args.seed, "seed", int, 0)
    alpha = setting(args.alpha, "alpha", float, 0.5)
    weights = setting(args.weights, "weights", parse_weights, EnergyWeights())
    scorer_kind = setting(args.scorer, "scorer", str, "reference")
    jobs = setting(args.jobs, "jobs", int, 1)
    endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV) or file_cfg.get("endpoint")
    if scorer_kind == "remote" and not endpoint:
        raise UsageError("remote scorers need --endpoint (or VERIEDIT_ENDPOINT)")

    extra_entities: tuple[tuple[str, ...], ...] = ()
    gazetteer_path = args.gazetteer or file_cfg.get("gazetteer")
    if gazetteer_path:
        try:
            lines = Path(gazetteer_path).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise DataError(f"cannot read gazetteer: {exc}") from exc
        extra_entities = tuple(tokenize(line) for line in lines if line.strip())

    try:
        config = SamplerConfig(iterations=iterations, seed=seed, alpha=alpha, weights=weights)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    try:
        instances, issues = load_instances(args.input)
    except OSError as exc:
        raise DataError(str(exc)) from exc
    _report_issues(issues, args.input)
    if not instances and issues:
        raise DataError("no loadable instances")

    def work(inst: ClaimInstance):
        return _correct_one(inst, config, scorer_kind, endpoint, extra_entities)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, instances))
    else:
        results = [work(inst) for inst in instances]

    with open(args.output, "w", encoding="utf-8") as out:
        for record, _ in results:
            out.write(dump_record(record) + "\n")
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as tr:
            tr.write(dump_record({"schema": TRACE_SCHEMA, "seed": seed, "iterations": iterations}) + "\n")
            for _, rows in results:
                for row in rows:
                    tr.write(dump_record(row) + "\n")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        gold_instances, gold_issues = load_instances(args.gold)
    except OSError as exc:
        raise DataError(str(exc)) from exc
    _report_issues(gold_issues, args.gold)

    outputs: dict[str, str] = {}
    try:
        with open(args.outputs, "r", encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, 1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    outputs[str(obj["id"])] = obj["corrected"]
                except (json.JSONDecodeError, KeyError) as exc:
                    raise DataError(f"{args.outputs}:{line_no}: bad output record ({exc})") from exc
    except OSError as exc:
        raise DataError(str(exc)) from exc

    gold_ids = {g.id for g in gold_instances}
    missing = sorted(gold_ids - outputs.keys())
    extra = sorted(outputs.keys() - gold_ids)
    if missing or extra:
        raise DataError(
            f"id mismatch between outputs and gold (missing: {missing[:5]}, extra: {extra[:5]})"
        )

    items = []
    for inst in gold_instances:
        if inst.gold is not None:
            reference = inst.gold
        elif inst.label == "SUPPORTED":
            reference = inst.claim
        else:
            raise DataError(f"instance {inst.id} has no reference correction")
        items.append(
            EvalItem(
                id=inst.id,
                source=tokenize(inst.claim),
                output=tokenize(outputs[inst.id]),
                references=(tokenize(reference),),
                label=inst.label,
            )
        )
    report = evaluate_corpus(items, max_n=args.sari_ngrams)

    print(f"instances: {len(items)}  labels: {report.to_dict()['label_counts']}")
    print(
        "SARI keep/delete/add/final: "
        f"{report.mean_keep:.4f} / {report.mean_delete:.4f} / "
        f"{report.mean_add:.4f} / {report.mean_final:.4f}"
    )
    print(f"ROUGE-2: {report.mean_rouge2:.4f}   Hamming: {report.mean_hamming:.3f}")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as out:
            out.write(dump_record(dict(report.to_dict(), kind="corpus")) + "\n")
            for s in report.per_instance:
                out.write(
                    dump_record(
                        {
                            "id": s.id,
                            "keep": s.sari.keep_f1,
                            "delete": s.sari.delete_f1,
                            "add": s.sari.add_f1,
                            "final": s.sari.final,
                            "rouge2": s.rouge2,
                            "hamming": s.hamming,
                            "label": s.label,
                        }
                    )
                    + "\n"
                )
    return EXIT_OK


def cmd_selfcheck(args: argparse.Namespace) -> int:
    spaces = (args.space,) if args.space else ("single-state", "symmetric", "full")
    report = run_selfcheck(mutation=args.mutation, empirical_steps=args.steps, spaces=spaces)
    for line in report.lines():
        print(line)
    if args.mutation is not None:
        # the hook corrupts the kernel; a healthy harness must detect it,
        # and the command reports failure either way so callers can assert
        print(f"mutation hook active: {args.mutation}")
        return EXIT_SELFCHECK
    return EXIT_OK if report.ok else EXIT_SELFCHECK


def cmd_trace_view(args: argparse.Namespace) -> int:
    try:
        lines = Path(args.trace).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(str(exc)) from exc
    if not lines:
        raise DataError("empty trace file")
    header = json.loads(lines[0])
    if header.get("schema") != TRACE_SCHEMA:
        raise DataError(f"unknown trace schema: {header.get('schema')!r}")
    print(f"trace schema {header['schema']}  seed={header.get('seed')}")
    fmt = "{:<12} {:>4} {:<8} {:>4} {:<22} {:>9} {:>9} {:>3}"
    print(fmt.format("instance", "it", "action", "pos", "content", "A", "u", "acc"))
    for line in lines[1:]:
        if not line.strip():
            continue
        row = json.loads(line)
        if args.instance and row.get("instance") != args.instance:
            continue
        content = " ".join(row["content"]) if row.get("content") else "-"
        print(
            fmt.format(
                str(row.get("instance", "-"))[:12],
                row["iteration"],
                row.get("action") or row.get("reason") or "-",
                row["position"] if row.get("position") is not None else "-",
                content[:22],
                f"{row['acceptance']:.4f}",
                f"{row['u']:.4f}",
                "yes" if row["accepted"] else "no",
            )
        )
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; the documented usage code is 1
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "correct":
            return cmd_correct(args)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "selfcheck":
            return cmd_selfcheck(args)
        if args.command == "trace-view":
            return cmd_trace_view(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ProtocolError, RemoteFailure, RemoteTimeout, ConnectionError) as exc:
        print(f"scorer transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT


if __name__ == "__main__":
    sys.exit(main())
