"""Operator command line.

Subcommands: ``generate`` (full tournament), ``core`` (single pipeline or
single-agent ablation), ``eval`` (pairwise / six-way scoring, Spearman over
score CSVs), ``cost`` (recompute a run's ledger from its transcript), and
``ablate`` (sweep judge-panel size or style count over scripted backends).

Exit codes: 0 success, 1 runtime failure, 2 usage error. Everything printed
for humans is also written as key-sorted JSON (report.json) for scripting.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import EngineConfig, parse_backend_flag, resolve_config
from .core import run_core
from .costs import (
    CostLedger,
    PricingTable,
    cost_report,
    micro_to_display,
    micro_to_exact,
    total_micro,
)
from .domain import (
    CORE_SUPERVISOR,
    JUDGE_PANEL,
    BannerDraft,
    CampaignRequest,
    ImageRef,
    MediaType,
    StylePrompt,
)
from .errors import ConfigError, MimoError
from .gateway import ChatTurn, LiveBackend
from .loop import run_loop
from .prompts import render
from .runstore import Action, CounterClock, Run, RunStore, WallClock
from .scripting import ScriptedBackend, Strictness, load_script
from .evaluation import (
    evaluate_pair,
    evaluate_six_way,
    spearman_between_csvs,
)

DEFAULT_STYLE = StylePrompt(
    style_id=0,
    description="clean product-focused layout with a bold headline and clearly visible logo",
)


def _usage_error(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _runtime_error(exc: MimoError) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return 1


def _make_clock(config: EngineConfig):
    return CounterClock() if config.clock == "counter" else WallClock()


def _make_backend(config: EngineConfig, run: Run):
    if config.backend == "scripted":
        spec = load_script(config.script_path, Strictness(config.script_strictness))
        return ScriptedBackend(spec, run)
    return LiveBackend(
        run,
        base_url=config.base_url,
        model_name=config.model_name,
        temperature=config.temperature,
    )


def _store_image_file(run: Run, path: Path) -> ImageRef:
    data = path.read_bytes()
    return run.store_image(data, MediaType.from_extension(path.suffix or "png"))


def _overrides_from_args(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    if getattr(args, "backend", None):
        overrides.update(parse_backend_flag(args.backend))
    for flag, key in [
        ("n", "n"),
        ("k", "k"),
        ("max_revisions", "max_revisions"),
        ("jobs", "jobs"),
        ("seed", "seed"),
        ("out_dir", "out_dir"),
        ("clock", "clock"),
    ]:
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return overrides


def _build_request(args: argparse.Namespace, config: EngineConfig, logo: ImageRef) -> CampaignRequest:
    return CampaignRequest(
        prompt=args.prompt,
        logo=logo,
        product=getattr(args, "product", "") or "",
        style_pool_size=config.k,
        styles_to_run=config.n,
        banner_width=config.banner_width,
        banner_height=config.banner_height,
    )


def _start_run(config: EngineConfig, *, seed: int | None = None) -> Run:
    store = RunStore(config.out_dir)
    clock = _make_clock(config)
    return store.create_run(
        config.to_dict(), clock=clock, seed=config.seed if seed is None else seed
    )


# -- generate -----------------------------------------------------------------


def cmd_generate(args: argparse.Namespace) -> int:
    logo_path = Path(args.logo)
    if not logo_path.is_file():
        return _usage_error(f"logo file not found: {logo_path}")
    config = resolve_config(args.config, _overrides_from_args(args))
    run = _start_run(config)
    try:
        logo = _store_image_file(run, logo_path)
        request = _build_request(args, config, logo)
        backend = _make_backend(config, run)
        result = run_loop(
            request,
            backend,
            config.limits,
            run=run,
            jobs=config.jobs if config.jobs is not None else config.n,
            layout_planner_enabled=config.layout_planner_enabled,
            counter_clocks=config.clock == "counter",
        )
    except MimoError as exc:
        run.transcript.log(Action.ERROR, {"error": type(exc).__name__, "message": str(exc)})
        return _runtime_error(exc)

    report = {
        "command": "generate",
        "cost": cost_report(result.ledger, config.pricing),
        "per_style": {
            str(sid): {
                "final_image": res.final_draft.image.to_dict(),
                "steps_taken": res.steps_taken,
            }
            for sid, res in sorted(result.per_style_results.items())
        },
        "rounds": [r.to_dict() for r in result.rounds],
        "run_id": run.run_id,
        "styles": [
            {"description": s.description, "style_id": s.style_id} for s in result.styles
        ],
        "winner": {
            "image": result.winner.image.to_dict(),
            "path": result.winner.image.locator,
            "style_id": result.winner.style_id,
        },
    }
    run.write_report(report)
    micro = total_micro(result.ledger, config.pricing)
    print(f"run: {run.dir}")
    print(f"winner: style_{result.winner.style_id + 1} -> {run.image_path(result.winner.image)}")
    print(f"rounds: {len(result.rounds)}")
    print(f"cost: {micro_to_display(micro)} (exact {micro_to_exact(micro)})")
    return 0


# -- core ------------------------------------------------------------------------


def _single_agent_run(request: CampaignRequest, backend, run: Run) -> tuple[BannerDraft, CostLedger]:
    """One comprehensive prompt, one completion, one image: the ablation baseline."""
    ledger = CostLedger()
    item = request.product.strip() or request.prompt
    body = render("single_agent_ablation", {"item": item})
    text, usage = backend.complete(CORE_SUPERVISOR, [ChatTurn.user(body, (request.logo,))])
    ledger.add(usage)
    run.transcript.log(
        Action.CREATE, {"call": "single_agent"}, actor=CORE_SUPERVISOR.token(), usage=usage
    )
    ref, usage = backend.generate_image(
        CORE_SUPERVISOR, text, request.banner_width, request.banner_height
    )
    ledger.add(usage)
    run.transcript.log(
        Action.CREATE,
        {"call": "single_agent_image", "image": ref.to_dict()},
        actor=CORE_SUPERVISOR.token(),
        usage=usage,
    )
    draft = BannerDraft(image=ref, style_id=0, step=1, revisions_applied=0)
    run.transcript.log(
        Action.FINISH,
        {"draft": ref.to_dict(), "forced": False, "revisions": 0, "steps_taken": 1},
        actor=CORE_SUPERVISOR.token(),
    )
    return draft, ledger


def cmd_core(args: argparse.Namespace) -> int:
    logo_path = Path(args.logo)
    if not logo_path.is_file():
        return _usage_error(f"logo file not found: {logo_path}")
    config = resolve_config(args.config, _overrides_from_args(args))
    run = _start_run(config)
    try:
        logo = _store_image_file(run, logo_path)
        request = _build_request(args, config, logo)
        backend = _make_backend(config, run)
        style = StylePrompt(0, args.style) if args.style else DEFAULT_STYLE
        if args.single_agent:
            draft, ledger = _single_agent_run(request, backend, run)
            steps_taken = 1
        else:
            result = run_core(
                request,
                style,
                backend,
                config.limits,
                writer=run.transcript,
                layout_planner_enabled=config.layout_planner_enabled,
            )
            draft, ledger, steps_taken = result.final_draft, result.ledger, result.steps_taken
    except MimoError as exc:
        run.transcript.log(Action.ERROR, {"error": type(exc).__name__, "message": str(exc)})
        return _runtime_error(exc)

    micro = total_micro(ledger, config.pricing)
    report = {
        "command": "core",
        "cost": cost_report(ledger, config.pricing),
        "final_image": draft.image.to_dict(),
        "path": draft.image.locator,
        "revisions": draft.revisions_applied,
        "run_id": run.run_id,
        "single_agent": bool(args.single_agent),
        "steps_taken": steps_taken,
    }
    run.write_report(report)
    print(f"run: {run.dir}")
    print(f"banner: {run.image_path(draft.image)}")
    print(f"cost: {micro_to_display(micro)} (exact {micro_to_exact(micro)})")
    return 0


# -- eval ----------------------------------------------------------------------


def cmd_eval(args: argparse.Namespace) -> int:
    modes = [bool(args.spearman), bool(args.pairwise), bool(args.six_way)]
    if sum(modes) != 1:
        return _usage_error("choose exactly one of --spearman, --pairwise, --six-way")

    if args.spearman:
        for path in args.spearman:
            if not Path(path).is_file():
                return _usage_error(f"score file not found: {path}")
        try:
            rho, pairs = spearman_between_csvs(args.spearman[0], args.spearman[1])
        except MimoError as exc:
            return _runtime_error(exc)
        out_dir = Path(args.out_dir or "runs")
        out_dir.mkdir(parents=True, exist_ok=True)
        report = {"command": "eval", "mode": "spearman", "pairs": pairs, "spearman": rho}
        (out_dir / "report.json").write_text(
            json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        print(f"spearman: {rho}")
        return 0

    image_args = args.pairwise if args.pairwise else args.six_way
    paths = [Path(p) for p in image_args]
    for path in paths:
        if not path.is_file():
            return _usage_error(f"image not found: {path}")
    config = resolve_config(args.config, _overrides_from_args(args))
    run = _start_run(config)
    try:
        backend = _make_backend(config, run)
        refs = [_store_image_file(run, p) for p in paths]
        if args.pairwise:
            parsed, usage = evaluate_pair(refs[0], refs[1], backend)
            mode = "pairwise"
        else:
            parsed, usage = evaluate_six_way(refs, backend)
            mode = "six_way"
        run.transcript.log(Action.EVALUATE, {"call": mode}, usage=usage)
    except MimoError as exc:
        run.transcript.log(Action.ERROR, {"error": type(exc).__name__, "message": str(exc)})
        return _runtime_error(exc)
    report = {
        "command": "eval",
        "mode": mode,
        "report": parsed.to_dict(),
        "run_id": run.run_id,
    }
    run.write_report(report)
    print(json.dumps(parsed.to_dict(), sort_keys=True, indent=2))
    return 0


# -- cost --------------------------------------------------------------------------


def cmd_cost(args: argparse.Namespace) -> int:
    run_dir = Path(args.run)
    if not run_dir.is_dir():
        return _usage_error(f"run directory not found: {run_dir}")
    store = RunStore(run_dir.parent)
    try:
        config, events = store.load_run(run_dir.name)
        candidates = store.load_candidates(run_dir.name)
    except MimoError as exc:
        return _runtime_error(exc)

    ledger = CostLedger()
    for event in events:
        if event.usage is not None:
            ledger.add(event.usage)
    for _, candidate_events in sorted(candidates.items()):
        for event in candidate_events:
            if event.usage is not None:
                ledger.add(event.usage)

    pricing_data = config.get("pricing")
    pricing = PricingTable() if pricing_data is None else PricingTable.from_dict(pricing_data)
    micro = total_micro(ledger, pricing)
    report = cost_report(ledger, pricing)
    (run_dir / "cost_report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    print(f"input tokens: {ledger.input_tokens}")
    print(f"output tokens: {ledger.output_tokens}")
    print(f"images: {ledger.images_generated}")
    print(f"exact: {micro_to_exact(micro)}")
    print(f"total: {micro_to_display(micro)}")
    return 0


# -- ablate --------------------------------------------------------------------------


def _parse_sweep(value: str) -> tuple[str, list[int]]:
    if "=" not in value:
        raise ConfigError("--sweep expects axis=v1,v2,... (axis: styles or judges)")
    axis, _, values = value.partition("=")
    axis = axis.strip()
    if axis not in ("styles", "judges"):
        raise ConfigError(f"sweep axis must be styles or judges, got {axis!r}")
    try:
        points = [int(v) for v in values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad sweep values {values!r}") from exc
    if not points:
        raise ConfigError("sweep needs at least one value")
    if axis == "judges" and any(not 1 <= p <= len(JUDGE_PANEL) for p in points):
        raise ConfigError(f"judge counts must be within 1..{len(JUDGE_PANEL)}")
    if axis == "styles" and any(p < 1 for p in points):
        raise ConfigError("style counts must be >= 1")
    return axis, points


def cmd_ablate(args: argparse.Namespace) -> int:
    logo_path = Path(args.logo)
    if not logo_path.is_file():
        return _usage_error(f"logo file not found: {logo_path}")
    try:
        axis, points = _parse_sweep(args.sweep)
    except ConfigError as exc:
        return _usage_error(str(exc))

    rows = []
    for index, value in enumerate(points):
        overrides = _overrides_from_args(args)
        if axis == "styles":
            overrides["n"] = value
            overrides["k"] = max(overrides.get("k") or 5, value)
        config = resolve_config(args.config, overrides)
        if config.backend == "scripted" and "{value}" in (config.script_path or ""):
            config.script_path = config.script_path.replace("{value}", str(value))
        panel = JUDGE_PANEL[: value] if axis == "judges" else JUDGE_PANEL
        run = _start_run(config, seed=config.seed + index)
        try:
            logo = _store_image_file(run, logo_path)
            request = _build_request(args, config, logo)
            backend = _make_backend(config, run)
            result = run_loop(
                request,
                backend,
                config.limits,
                run=run,
                jobs=config.jobs if config.jobs is not None else config.n,
                layout_planner_enabled=config.layout_planner_enabled,
                panel=panel,
                counter_clocks=config.clock == "counter",
            )
        except MimoError as exc:
            run.transcript.log(Action.ERROR, {"error": type(exc).__name__, "message": str(exc)})
            return _runtime_error(exc)
        micro = total_micro(result.ledger, config.pricing)
        winner_id = result.winner.style_id
        rejections = sum(r.rejection_counts.get(winner_id, 0) for r in result.rounds)
        votes = len(panel) * len(result.rounds)
        share = None if votes == 0 else round(1 - rejections / votes, 6)
        row = {
            "axis": axis,
            "cost": micro_to_display(micro),
            "recommended_share": share,
            "rounds": len(result.rounds),
            "run_id": run.run_id,
            "value": value,
            "winner_style": winner_id,
        }
        rows.append(row)
        run.write_report({"command": "ablate", "row": row})

    out_dir = Path(args.out_dir or "runs")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "ablation-report.json").write_text(
        json.dumps({"command": "ablate", "rows": rows}, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    print(f"{'value':>6} {'winner':>8} {'rounds':>7} {'rec_share':>10} {'cost':>8}")
    for row in rows:
        share = "-" if row["recommended_share"] is None else f"{row['recommended_share']:.3f}"
        winner = f"style_{row['winner_style'] + 1}"
        print(
            f"{row['value']:>6} {winner:>8} {row['rounds']:>7} {share:>10} {row['cost']:>8}"
        )
    return 0


# -- parser ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser, *, request_flags: bool) -> None:
    parser.add_argument("--config", help="key-sorted JSON config file")
    parser.add_argument("--backend", help="live or scripted:<file>")
    parser.add_argument("--seed", type=int, help="run-id/backend seed")
    parser.add_argument("--out-dir", dest="out_dir", help="runs root directory")
    parser.add_argument("--clock", choices=["wall", "counter"], help="event clock source")
    parser.add_argument("--jobs", type=int, help="parallel pipelines (default: n)")
    if request_flags:
        parser.add_argument("--prompt", required=True, help="campaign prompt")
        parser.add_argument("--logo", required=True, help="logo image file")
        parser.add_argument("--product", help="product metadata")
        parser.add_argument("--n", type=int, help="styles to run")
        parser.add_argument("--k", type=int, help="style pool size")
        parser.add_argument(
            "--max-revisions", dest="max_revisions", type=int, help="revision cap per pipeline"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mimo",
        description="Two-level multi-agent ad banner generation engine.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_generate = sub.add_parser("generate", help="full style tournament")
    _add_common(p_generate, request_flags=True)
    p_generate.set_defaults(func=cmd_generate)

    p_core = sub.add_parser("core", help="single pipeline (or single-agent ablation)")
    _add_common(p_core, request_flags=True)
    p_core.add_argument("--style", help="style direction for the single pipeline")
    p_core.add_argument(
        "--single-agent",
        dest="single_agent",
        action="store_true",
        help="one comprehensive prompt, one completion, one image",
    )
    p_core.set_defaults(func=cmd_core)

    p_eval = sub.add_parser("eval", help="scoring protocols and rank correlation")
    _add_common(p_eval, request_flags=False)
    p_eval.add_argument("--spearman", nargs=2, metavar=("HUMAN_CSV", "MACHINE_CSV"))
    p_eval.add_argument("--pairwise", nargs=2, metavar=("IMAGE_1", "IMAGE_2"))
    p_eval.add_argument("--six-way", dest="six_way", nargs=6, metavar="IMAGE")
    p_eval.set_defaults(func=cmd_eval)

    p_cost = sub.add_parser("cost", help="recompute ledger totals from a run transcript")
    p_cost.add_argument("run", help="run directory (runs/<run_id>)")
    p_cost.set_defaults(func=cmd_cost)

    p_ablate = sub.add_parser("ablate", help="sweep style count or judge-panel size")
    _add_common(p_ablate, request_flags=True)
    p_ablate.add_argument("--sweep", required=True, help="styles=1,3,5 or judges=1,2,3,4,5")
    p_ablate.set_defaults(func=cmd_ablate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _usage_error(str(exc))
    except MimoError as exc:
        return _runtime_error(exc)


if __name__ == "__main__":
    sys.exit(main())
