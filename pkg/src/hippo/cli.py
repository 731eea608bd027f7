"""Command-line entry point.

Commands: synth, simulate, annotate, train, evaluate, analyze, ablate. One
global --seed threads determinism through every stage (per-stage seeds are
derived by stable hashing), so re-running any command over the same inputs
rewrites outputs with identical bytes.

Config precedence: flags > --config file (JSON, keys = long flag names with
underscores) > built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import analysis
from .core import io as core_io
from .core.split import split_dataset
from .core.types import ParseError, SessionRecord, ValidationError
from .features import CachingProvider, HashedEmbeddingProvider
from .hipher import (
    HiPherConfig,
    MODALITIES,
    TrainConfig,
    TrainingError,
    build_examples,
    evaluate_model,
    fit,
    load_checkpoint,
    save_checkpoint,
)
from .seeding import derive_seed
from .simulator.engine import SessionParams, SimulatorError, annotate_saliency, run_session
from .simulator.ports import FixtureCatalog, HttpLanguageModel
from .synthworld import (
    SynthLanguageModel,
    SyntheticLatentProvider,
    WorldConfig,
    generate_world,
    load_world,
    save_world,
    simulate_world,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Bad flags or missing inputs; exits with code 2."""


def _fail_usage(message: str):
    raise UsageError(message)


def _load_records(path: str) -> list[SessionRecord]:
    if not Path(path).exists():
        _fail_usage(f"dataset file not found: {path}")
    return core_io.load_dataset(path)


def _make_provider(args: argparse.Namespace):
    if args.provider == "synthetic":
        if not args.world:
            _fail_usage("--provider synthetic requires --world")
        world = load_world(args.world)
        provider = SyntheticLatentProvider(world)
    else:
        provider = HashedEmbeddingProvider(seed=args.seed)
    if getattr(args, "embedding_cache", None):
        provider = CachingProvider(provider, args.embedding_cache)
    return provider


def _save_cache(provider) -> None:
    if isinstance(provider, CachingProvider):
        provider.save()


def _write_json(payload: dict, path: str) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", "utf-8")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_synth(args: argparse.Namespace) -> int:
    config = WorldConfig(
        seed=args.seed,
        n_users=args.users,
        n_videos=args.videos,
        dim=args.dim,
        m=args.m,
        n_segments=args.segments,
        l=args.l,
        n_topics=args.topics,
    )
    world = generate_world(config)
    save_world(world, args.out)
    if args.seeds_out:
        core_io.save_profile_seeds(world.seed_profiles(), args.seeds_out)
    print(f"wrote world with {len(world.users)} users, {len(world.videos)} videos to {args.out}")
    return EXIT_OK


def _simulate_mock(args: argparse.Namespace) -> list[SessionRecord]:
    world = load_world(args.world)
    params_ok = world.config.m == args.m and world.config.l == args.l
    if not params_ok:
        _fail_usage(
            f"world was generated with m={world.config.m}, l={world.config.l}; "
            f"rerun synth or pass matching --m/--l"
        )
    return simulate_world(world, seed=args.seed, jobs=args.jobs)


def _simulate_http(args: argparse.Namespace) -> list[SessionRecord]:
    if not args.seeds:
        _fail_usage("--llm http requires --seeds")
    if not args.catalog:
        _fail_usage("--llm http requires --catalog")
    seeds = core_io.load_profile_seeds(args.seeds)
    catalog = FixtureCatalog(args.catalog)
    lm = HttpLanguageModel(args.llm_url, model=args.llm_model)
    records = []
    for i, profile in enumerate(seeds):
        session_seed = derive_seed(args.seed, "session", str(i))
        session = run_session(
            profile,
            lm,
            catalog,
            params=SessionParams(l=args.l, m=args.m),
            seed=session_seed,
        )
        annotation = annotate_saliency(session, lm, seed=derive_seed(args.seed, "annotate", str(i)))
        records.append(SessionRecord(session=session, annotation=annotation))
    return sorted(records, key=lambda r: r.session.session_id)


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.llm == "mock":
        if not args.world:
            _fail_usage("--llm mock requires --world (build one with `hippo synth`)")
        records = _simulate_mock(args)
    else:
        records = _simulate_http(args)
    count = core_io.save_dataset(records, args.out, expected_turns=args.m)
    print(f"wrote {count} session records to {args.out}")
    return EXIT_OK


def cmd_annotate(args: argparse.Namespace) -> int:
    records = _load_records(args.sessions)
    out = []
    if args.llm == "mock":
        if not args.world:
            _fail_usage("--llm mock requires --world")
        world = load_world(args.world)
        users_by_id = {u.user_id: i for i, u in enumerate(world.users)}
        for record in records:
            sid = record.session.session_id
            if sid not in users_by_id:
                _fail_usage(f"session {sid} does not belong to a user of this world")
            lm = SynthLanguageModel(world, world.users[users_by_id[sid]])
            annotation = annotate_saliency(
                record.session, lm, seed=derive_seed(args.seed, "annotate", sid)
            )
            out.append(SessionRecord(record.session, annotation, record.extras))
    else:
        lm = HttpLanguageModel(args.llm_url, model=args.llm_model)
        for record in records:
            sid = record.session.session_id
            annotation = annotate_saliency(
                record.session, lm, seed=derive_seed(args.seed, "annotate", sid)
            )
            out.append(SessionRecord(record.session, annotation, record.extras))
    count = core_io.save_dataset(out, args.out, expected_turns=len(out[0].session.turns) if out else 0)
    print(f"re-annotated {count} records into {args.out}")
    return EXIT_OK


def _train_model(records, provider, args):
    examples = build_examples(
        records,
        provider,
        history_length=args.history_length,
        modality=args.modality,
        include_caption=args.include_captions,
        zero_preference=args.zero_preference,
    )
    if not examples:
        _fail_usage("no training examples; is the dataset empty?")
    model_config = HiPherConfig(
        feature_dim=examples[0].segments.shape[1],
        hidden_dim=args.hidden,
        heads=args.heads,
        encoder_layers=args.layers,
        dropout=args.dropout,
        positional=not args.no_positional,
    )
    train_config = TrainConfig(
        gamma=args.gamma,
        epochs=args.epochs,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
        aux_mse_weight=args.aux_mse,
    )
    model, trace = fit(examples, model_config, train_config)
    return model, trace, train_config


def cmd_train(args: argparse.Namespace) -> int:
    records = _load_records(args.data)
    provider = _make_provider(args)
    model, trace, train_config = _train_model(records, provider, args)
    _save_cache(provider)
    save_checkpoint(
        model,
        args.out,
        extra={"train_config": asdict(train_config), "loss_trace": trace},
    )
    print(f"trained {args.epochs} epochs; loss {trace[0]:.4f} -> {trace[-1]:.4f}; saved {args.out}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    records = _load_records(args.data)
    provider = _make_provider(args)
    model, _ = load_checkpoint(args.ckpt)
    examples = build_examples(
        records,
        provider,
        history_length=args.history_length,
        modality=args.modality,
        include_caption=args.include_captions,
        zero_preference=args.zero_preference,
    )
    if examples and examples[0].segments.shape[1] != model.config.feature_dim:
        raise ValueError(
            f"checkpoint expects feature dim {model.config.feature_dim} but the "
            f"dataset/provider produces {examples[0].segments.shape[1]}"
        )
    report = evaluate_model(model, examples, map_threshold=args.map_threshold)
    report.config["seed"] = args.seed
    report.config["data"] = args.data
    _save_cache(provider)
    report.write(args.report)
    shown = {k: round(v, 4) for k, v in report.means.items() if v is not None}
    print(f"evaluated {report.n_videos} videos -> {args.report}")
    print(json.dumps(shown, sort_keys=True))
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    records = _load_records(args.data)
    provider = _make_provider(args)
    stats_rows = []
    for record in records:
        ratio = analysis.exploration_ratio(record.session)
        mean, std = analysis.score_stats(record.annotation)
        stats_rows.append((record.session.session_id, ratio, mean, std))
    analysis.write_stats_table(stats_rows, f"{args.out_prefix}.stats.tsv")
    embedding_rows = analysis.export_history_embeddings(
        [r.session for r in records], provider
    )
    analysis.write_embedding_table(embedding_rows, f"{args.out_prefix}.embeddings.tsv")
    _save_cache(provider)
    ratios = [r[1] for r in stats_rows]
    print(
        f"analyzed {len(records)} sessions; exploration ratio "
        f"min {min(ratios):.3f} mean {sum(ratios)/len(ratios):.3f} max {max(ratios):.3f}"
    )
    print(f"wrote {args.out_prefix}.stats.tsv and {args.out_prefix}.embeddings.tsv")
    return EXIT_OK


_ABLATE_AXES = ("history_length", "modality", "gamma")


def cmd_ablate(args: argparse.Namespace) -> int:
    if args.axis not in _ABLATE_AXES:
        _fail_usage(f"unknown ablation axis {args.axis!r}; expected one of {_ABLATE_AXES}")
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        _fail_usage("--values must list at least one value")

    records = _load_records(args.data)
    provider = _make_provider(args)
    train_recs, test_recs = split_dataset(records, args.train_fraction, seed=args.seed)
    if not test_recs:
        _fail_usage(
            "the held-out split is empty; provide more records per topic "
            "(topics with a single record all go to train)"
        )

    rows = []
    for value in values:
        per_seed = []
        for rep in range(args.repeats):
            run_args = argparse.Namespace(**vars(args))
            run_args.seed = derive_seed(args.seed, "ablate", args.axis, value, str(rep))
            if args.axis == "history_length":
                run_args.history_length = int(value)
            elif args.axis == "modality":
                if value not in MODALITIES:
                    _fail_usage(f"modality must be one of {MODALITIES}, got {value!r}")
                run_args.modality = value
            else:
                run_args.gamma = float(value)
            model, _, _ = _train_model(train_recs, provider, run_args)
            examples = build_examples(
                test_recs,
                provider,
                history_length=run_args.history_length,
                modality=run_args.modality,
                include_caption=run_args.include_captions,
                zero_preference=run_args.zero_preference,
            )
            per_seed.append(evaluate_model(model, examples).means)
        averaged = {}
        for key in per_seed[0]:
            vals = [m[key] for m in per_seed if m[key] is not None]
            averaged[key] = sum(vals) / len(vals) if vals else None
        rows.append((value, averaged))
    _save_cache(provider)

    headers = ["mAP", "hit1@7", "hit1@9", "r1@0.5", "r1@0.7", "f1@5", "f1@7", "rmse"]
    print("\t".join([args.axis, *headers]))
    lines = []
    for value, means in rows:
        cells = [
            f"{means[h]:.4f}" if means.get(h) is not None else "n/a" for h in headers
        ]
        line = "\t".join([value, *cells])
        lines.append(line)
        print(line)
    if args.out:
        Path(args.out).write_text(
            "\t".join([args.axis, *headers]) + "\n" + "\n".join(lines) + "\n", "utf-8"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_provider_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--provider",
        choices=("hashed", "synthetic"),
        default="hashed",
        help="embedding provider (synthetic requires --world)",
    )
    parser.add_argument("--world", help="world dump file (for synthetic provider / mock llm)")
    parser.add_argument("--embedding-cache", help="optional embedding cache file (.npz)")


def _add_example_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--history-length", type=int, default=None, help="use only the last K history videos")
    parser.add_argument("--modality", choices=MODALITIES, default="both", help="zero the visual or text feature block")
    parser.add_argument("--include-captions", action="store_true", help="feed captions alongside transcripts to the text encoder")
    parser.add_argument("--zero-preference", action="store_true", help="replace the preference embedding with the zero vector")


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--gamma", type=float, default=0.15, help="ranking margin")
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--lr", type=float, default=3e-4)
    parser.add_argument("--batch-size", type=int, default=4)
    parser.add_argument("--hidden", type=int, default=256)
    parser.add_argument("--heads", type=int, default=4)
    parser.add_argument("--layers", type=int, default=2)
    parser.add_argument("--dropout", type=float, default=0.1)
    parser.add_argument("--aux-mse", type=float, default=0.0, help="weight of the optional calibration term")
    parser.add_argument("--no-positional", action="store_true", help="disable temporal positions on target segments")


class _SubParser(argparse.ArgumentParser):
    """Subcommand parser that also accepts --seed after the command name."""

    def __init__(self, *args, **kwargs):
        kwargs.setdefault("formatter_class", argparse.ArgumentDefaultsHelpFormatter)
        super().__init__(*args, **kwargs)
        # SUPPRESS keeps the global --seed value when the flag is absent here.
        self.add_argument(
            "--seed", type=int, default=argparse.SUPPRESS, help="seed for all stages"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hippo",
        description="Watch-history-conditioned video highlighting pipeline.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--seed", type=int, default=0, help="global seed for all stages")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_SubParser)

    p = sub.add_parser("synth", help="generate a synthetic oracle world")
    p.add_argument("--out", required=True, help="world dump file to write")
    p.add_argument("--seeds-out", help="also write the world's profile seeds as JSON")
    p.add_argument("--users", type=int, default=200)
    p.add_argument("--videos", type=int, default=320)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--topics", type=int, default=20)
    p.add_argument("--m", type=int, default=10, help="watched videos per session")
    p.add_argument("--segments", type=int, default=30, help="segments per video")
    p.add_argument("--l", type=int, default=8, help="candidates per turn")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="run watch-history sessions")
    p.add_argument("--out", required=True, help="session dataset to write (.jsonl)")
    p.add_argument("--llm", choices=("mock", "http"), default="mock")
    p.add_argument("--world", help="world dump (mock llm)")
    p.add_argument("--seeds", help="profile seed file (http llm)")
    p.add_argument("--catalog", help="fixture catalog directory (http llm)")
    p.add_argument("--llm-url", default="http://localhost:8080", help="completion endpoint base URL")
    p.add_argument("--llm-model", default="default")
    p.add_argument("--m", type=int, default=10, help="watched videos per session")
    p.add_argument("--l", type=int, default=8, help="candidates per turn")
    p.add_argument("--jobs", type=int, default=1, help="parallel sessions; output order is fixed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("annotate", help="re-annotate an existing sessions file")
    p.add_argument("--sessions", required=True, help="input dataset (.jsonl)")
    p.add_argument("--out", required=True)
    p.add_argument("--llm", choices=("mock", "http"), default="mock")
    p.add_argument("--world", help="world dump (mock llm)")
    p.add_argument("--llm-url", default="http://localhost:8080")
    p.add_argument("--llm-model", default="default")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("train", help="train the segment scorer")
    p.add_argument("--data", required=True, help="training dataset (.jsonl)")
    p.add_argument("--out", required=True, help="checkpoint file to write")
    _add_provider_flags(p)
    _add_example_flags(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", required=True, help="evaluation report file to write")
    p.add_argument("--map-threshold", type=int, default=7)
    _add_provider_flags(p)
    _add_example_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="dataset analyses and embedding export")
    p.add_argument("--data", required=True)
    p.add_argument("--out-prefix", required=True, help="prefix for .stats.tsv / .embeddings.tsv")
    _add_provider_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("ablate", help="train variants along one axis and compare")
    p.add_argument("--axis", required=True, choices=_ABLATE_AXES)
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--data", required=True, help="dataset; split into train/test internally")
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--repeats", type=int, default=1, help="seeds per value; metrics are averaged")
    p.add_argument("--out", help="also write the table to a file")
    _add_provider_flags(p)
    _add_example_flags(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_ablate)

    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    # Two-stage parse so --config supplies defaults that flags still override.
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if known.config:
        path = Path(known.config)
        if not path.exists():
            raise UsageError(f"config file not found: {known.config}")
        try:
            values = json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(values, dict):
            raise UsageError("config file must hold a JSON object of flag defaults")
        parser.set_defaults(**values)
        for action in parser._subparsers._group_actions:  # noqa: SLF001
            for sub in action.choices.values():
                sub.set_defaults(**{k: v for k, v in values.items() if k != "config"})
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, ParseError, SimulatorError, TrainingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
