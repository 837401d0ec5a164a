"""Command-line interface.

Subcommands:
  gen-data   synthetic Gaussian-cluster dataset -> CSV
  run        learn the dataset, process forget requests, report and persist
  verify     gap report for a persisted state against its dataset
  bench      per-forget-request timing across retained-set sizes
  resume     continue a persisted state with more forget requests

Exit codes: 0 success, 1 contract/input errors, 2 state-integrity errors.
Every random choice derives from the single --seed flag.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .core import DEFAULT_GAMMA
from .errors import InputError, RidgeForgetError, StateFormatError
from .features import (
    EncodedDataset,
    FeatureExtractor,
    RawDataset,
    SyntheticSpec,
    encode,
    generate_synthetic,
    load_csv,
    write_csv,
)
from .harness import (
    RunOptions,
    build_forget_stream,
    build_stream,
    run_stream,
)
from .state import load_state, save_state
from .verify import GAP_CSV_HEADER, gap_report

RUN_CSV_HEADER = (
    "kind,request,batch_size,wall_time_seconds,"
    "delta_params,delta_retain,delta_forget,delta_test,delta_mia"
)


def _derive_extractor_seed(seed: int) -> int:
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(2,))
    return int(seq.generate_state(1, np.uint64)[0])


def _encode_dataset(path, extractor, feature_dim, nonlinearity, seed, class_count=None):
    """Load a CSV; raw inputs are pushed through the extractor (built from
    the run seed unless one is supplied).  Returns (encoded, extractor)."""
    dataset = load_csv(path, class_count=class_count)
    if isinstance(dataset, EncodedDataset):
        return dataset, extractor
    if extractor is None:
        if feature_dim is None or nonlinearity is None:
            raise InputError(
                f"{path} holds raw inputs but no extractor is available; "
                "use a feature-mode CSV or a state saved with an extractor"
            )
        extractor = FeatureExtractor.from_seed(
            _derive_extractor_seed(seed), dataset.input_dim, feature_dim, nonlinearity
        )
    return encode(extractor, dataset, class_count=class_count), extractor


def _write_run_report(path, record):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(RUN_CSV_HEADER + "\n")
        for req in record.per_request:
            cells = [
                req.kind,
                str(req.request_index),
                str(req.batch_size),
                repr(req.wall_time_seconds),
            ]
            if req.report is not None:
                cells += req.report.to_csv_row().split(",")[1:]
            else:
                cells += [""] * 5
            handle.write(",".join(cells) + "\n")


def _cmd_gen_data(args) -> int:
    spec = SyntheticSpec(
        class_count=args.classes,
        samples_per_class=args.per_class,
        input_dim=args.input_dim,
        cluster_spread=args.spread,
        seed=args.seed,
    )
    raw = generate_synthetic(spec, draw=args.draw)
    write_csv(args.out, raw)
    print(f"wrote {len(raw)} rows ({args.classes} classes) to {args.out}")
    return 0


def _cmd_run(args) -> int:
    encoded, extractor = _encode_dataset(
        args.data, None, args.feature_dim, args.nonlinearity, args.seed
    )
    test_rows = None
    if args.test_data is not None:
        test_rows, _ = _encode_dataset(
            args.test_data, extractor, args.feature_dim, args.nonlinearity,
            args.seed, class_count=encoded.class_count,
        )
    if args.verify_every > 0 and test_rows is None:
        raise InputError("--verify-every > 0 requires --test-data")
    stream = build_stream(
        encoded, args.learn_chunks, args.forget_total, args.requests, args.seed
    )
    record, state = run_stream(
        stream,
        args.gamma,
        RunOptions(verify_every=args.verify_every),
        dataset=encoded,
        test_rows=test_rows,
    )
    state.extractor = extractor
    if args.out:
        _write_run_report(args.out, record)
    if args.state:
        save_state(state, args.state)
    reports = record.reports()
    worst = max((r.max_delta() for r in reports), default=None)
    print(
        f"processed {len(stream.learn_requests)} learn + "
        f"{len(stream.forget_requests)} forget requests in "
        f"{record.cumulative_time_seconds:.4f}s of update time"
    )
    if worst is not None:
        print(f"largest gap delta across {len(reports)} reports: {worst:.3e}")
    return 0


def _cmd_verify(args) -> int:
    state = load_state(args.state)
    encoded, _ = _encode_dataset(
        args.data, state.extractor, None, None, 0,
    )
    test_rows, _ = _encode_dataset(
        args.test_data, state.extractor, None, None, 0,
        class_count=encoded.class_count,
    )
    report = gap_report(state.model, encoded, state.ledger, test_rows, 0)
    lines = [GAP_CSV_HEADER, report.to_csv_row()]
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
    return 0


def _cmd_bench(args) -> int:
    from .harness import bench_scaling

    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    rows = bench_scaling(
        sizes, args.forget_size, args.dfeat, args.repeats,
        gamma=args.gamma, seed=args.seed,
    )
    lines = ["retained_size,forget_size,feature_dim,repeats,mean_seconds,std_seconds"]
    for row in rows:
        lines.append(
            f"{row.retained_size},{row.forget_size},{row.feature_dim},"
            f"{row.repeats},{row.mean_seconds!r},{row.std_seconds!r}"
        )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
    return 0


def _cmd_resume(args) -> int:
    state = load_state(args.state)
    encoded, _ = _encode_dataset(args.data, state.extractor, None, None, 0)
    test_rows = None
    if args.test_data is not None:
        test_rows, _ = _encode_dataset(
            args.test_data, state.extractor, None, None, 0,
            class_count=encoded.class_count,
        )
    if args.verify_every > 0 and test_rows is None:
        raise InputError("--verify-every > 0 requires --test-data")
    stream = build_forget_stream(
        encoded, state.ledger.retained_ids, args.forget_total, args.requests,
        args.seed,
    )
    record, state = run_stream(
        stream,
        state.gamma,
        RunOptions(verify_every=args.verify_every),
        initial_state=state,
        dataset=encoded,
        test_rows=test_rows,
    )
    if args.out:
        _write_run_report(args.out, record)
    save_state(state, args.state_out or args.state)
    print(
        f"resumed: {len(stream.forget_requests)} forget requests in "
        f"{record.cumulative_time_seconds:.4f}s of update time"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ridgeforget",
        description="Exact continual unlearning for closed-form ridge classifiers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="write a synthetic dataset CSV")
    gen.add_argument("--classes", type=int, default=10)
    gen.add_argument("--per-class", type=int, default=400)
    gen.add_argument("--input-dim", type=int, default=16)
    gen.add_argument("--spread", type=float, default=0.1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--draw", type=int, default=0,
                     help="independent sample draw sharing the class means")
    gen.add_argument("--out", required=True)
    gen.set_defaults(handler=_cmd_gen_data)

    run = sub.add_parser("run", help="learn a dataset, then process forget requests")
    run.add_argument("--data", required=True)
    run.add_argument("--test-data", default=None)
    run.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    run.add_argument("--learn-chunks", type=int, default=8)
    run.add_argument("--forget-total", type=int, default=1000)
    run.add_argument("--requests", type=int, default=25)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--verify-every", type=int, default=0)
    run.add_argument("--feature-dim", type=int, default=64,
                     help="extractor width when --data holds raw inputs")
    run.add_argument("--nonlinearity", choices=("relu", "identity"), default="relu")
    run.add_argument("--out", default=None, help="per-request report CSV")
    run.add_argument("--state", default=None, help="write final state here")
    run.set_defaults(handler=_cmd_run)

    ver = sub.add_parser("verify", help="gap report for a persisted state")
    ver.add_argument("--state", required=True)
    ver.add_argument("--data", required=True)
    ver.add_argument("--test-data", required=True)
    ver.add_argument("--out", default=None)
    ver.set_defaults(handler=_cmd_verify)

    bench = sub.add_parser("bench", help="forget-request timing vs retained size")
    bench.add_argument("--sizes", required=True, help="comma list, e.g. 1000,10000")
    bench.add_argument("--forget-size", type=int, default=100)
    bench.add_argument("--dfeat", type=int, default=64)
    bench.add_argument("--repeats", type=int, default=20)
    bench.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", default=None)
    bench.set_defaults(handler=_cmd_bench)

    res = sub.add_parser("resume", help="continue a saved state with more forgetting")
    res.add_argument("--state", required=True)
    res.add_argument("--data", required=True)
    res.add_argument("--test-data", default=None)
    res.add_argument("--forget-total", type=int, required=True)
    res.add_argument("--requests", type=int, required=True)
    res.add_argument("--seed", type=int, default=0)
    res.add_argument("--verify-every", type=int, default=0)
    res.add_argument("--out", default=None)
    res.add_argument("--state-out", default=None)
    res.set_defaults(handler=_cmd_resume)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except StateFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RidgeForgetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
