"""命令行入口

每个子命令是独立的进程，彼此只通过输出目录交换数据（语料、检查点、报告）。
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .config import (
    ExperimentConfig,
    canonical_text,
    config_hash,
    get_settings,
    load_config,
    with_overrides,
)
from .datagen import (
    gen_corpus,
    gen_eval_suite,
    gen_probing_tasks,
    gen_zeroshot_dataset,
    load_corpus,
    save_corpus,
)
from .datagen.corpus import Corpus, save_pairs
from .evaluation import (
    EmbeddingCache,
    cascade_embed,
    embed_texts,
    embed_utterances,
    evaluate_probing,
    evaluate_retrieval,
    evaluate_zeroshot,
    project_2d,
    report_row,
    summarize_matrix,
    write_csv,
    write_report,
)
from .exceptions import ConfigurationError, JointEmbedError
from .logger import create_logger, get_logger
from .models import file_hash, init_bundle, load_checkpoint, save_checkpoint
from .training import (
    RunDirectory,
    build_scenario_bundle,
    pretrain_asr,
    pretrain_teacher,
    run_matrix,
    standard_matrix,
    train_joint,
    wer_vs_retrieval,
)
from .types.enums import CellStatus, InitMode, ProbingTask, ZeroShotKind
from .types.reports import ReportSummary

logger = get_logger(__name__)


# ---------------------------------------------------------------------------
# 公共工具
# ---------------------------------------------------------------------------


def _experiment(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = with_overrides(config, seed=args.seed)
    return config


def _corpus(args: argparse.Namespace) -> Corpus:
    path = Path(args.corpus) if args.corpus else Path(args.out) / "corpus"
    return load_corpus(path)


def _summary(
    kind: str, config: ExperimentConfig, checkpoints: Sequence[Path], **metrics: float
) -> ReportSummary:
    return ReportSummary(
        kind=kind,
        seed=config.seed,
        config_hash=config_hash(config),
        checkpoint_hashes={str(path): file_hash(path) for path in checkpoints},
        metrics={
            key: float(value) for key, value in metrics.items() if value is not None
        },
    )


def _load_bundle(
    config: ExperimentConfig,
    checkpoint: str,
    teacher: Optional[str] = None,
    seed: Optional[int] = None,
):
    return init_bundle(
        config.bundle,
        config.seed if seed is None else seed,
        InitMode.FROM_CHECKPOINT,
        checkpoint_path=checkpoint,
        teacher_path=teacher,
    )


def _scenario(config: ExperimentConfig, scenario_id: str):
    for scenario in standard_matrix(config.joint, config.seed):
        if scenario.scenario_id == scenario_id:
            return scenario
    raise ConfigurationError(
        f"unknown scenario '{scenario_id}'",
        config_key="scenario",
        config_value=scenario_id,
    )


# ---------------------------------------------------------------------------
# 子命令
# ---------------------------------------------------------------------------


def cmd_gen_data(args: argparse.Namespace) -> int:
    config = _experiment(args)
    out = Path(args.out)
    corpus = gen_corpus(config.seed, config.corpus, config.acoustic)
    save_corpus(corpus, out / "corpus")
    for name, pairs in gen_eval_suite(corpus, config.seed).items():
        save_pairs(pairs, out / "eval" / name)
    (out / "config.toml").write_text(canonical_text(config), encoding="utf-8")
    sizes = f"{len(corpus.train)}/{len(corpus.valid)}/{len(corpus.test)}"
    logger.info(f"generated corpus {sizes} under {out}")
    return 0


def cmd_pretrain_teacher(args: argparse.Namespace) -> int:
    config = _experiment(args)
    corpus = _corpus(args)
    outcome = pretrain_teacher(corpus, config, config.seed)
    path = Path(args.out) / "teacher.ckpt"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(path, config.bundle, outcome.bundle.state_dict(["teacher"]))
    rows = [
        {"metric": "initial_masked_accuracy", "value": outcome.initial_accuracy},
        {"metric": "masked_accuracy", "value": outcome.masked_accuracy},
        {"metric": "unigram_baseline", "value": outcome.baseline_accuracy},
        {"metric": "best_epoch", "value": outcome.result.best.epoch},
    ]
    summary = _summary(
        "pretrain-teacher", config, [path], masked_accuracy=outcome.masked_accuracy
    )
    write_report(Path(args.out) / "teacher.csv", rows, summary)
    return 0


def cmd_pretrain_asr(args: argparse.Namespace) -> int:
    config = _experiment(args)
    corpus = _corpus(args)
    outcome = pretrain_asr(
        corpus, config, config.seed, snapshot_steps=args.snapshot_steps
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "asr.ckpt"
    state = outcome.bundle.state_dict(["student", "decoder"])
    save_checkpoint(path, config.bundle, state)
    snapshots = []
    for step, snapshot_state in sorted(outcome.result.snapshots.items()):
        snapshot = out / f"asr-step{step}.ckpt"
        save_checkpoint(snapshot, config.bundle, snapshot_state)
        snapshots.append(snapshot)
    summary = _summary(
        "pretrain-asr",
        config,
        [path, *snapshots],
        valid_wer=outcome.valid_wer,
        initial_wer=outcome.initial_wer,
    )
    write_report(
        out / "asr.csv", [row.to_row() for row in outcome.result.history], summary
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _experiment(args)
    corpus = _corpus(args)
    scenario = _scenario(config, args.scenario)
    bundle = build_scenario_bundle(scenario, config, args.teacher, args.asr)
    result = train_joint(scenario, corpus, bundle)
    runs_dir = args.runs_dir or get_settings().runs_dir
    run_dir = RunDirectory(runs_dir, scenario.scenario_id, scenario.seed)
    run_dir.write_config(config, scenario)
    run_dir.write_history(result.history)
    hashes = run_dir.save_checkpoints(
        config.bundle, result.best.state, result.final.state
    )
    run_dir.write_summary(
        {
            "scenario_id": scenario.scenario_id,
            "seed": scenario.seed,
            "best_epoch": result.best.epoch,
            "valid_total": result.best.valid.total,
            "valid_l2": result.best.valid.l2,
            "ce_l2_ratio": result.ce_l2_ratio,
            "valid_wer": result.valid_wer,
            "config_hash": config_hash(config),
            "checkpoint_hashes": hashes,
        }
    )
    return 0


def _retrieval_on_test(
    config: ExperimentConfig, checkpoint: Path, corpus: Corpus, threads: int
):
    bundle = _load_bundle(config, str(checkpoint))
    pairs = corpus.test
    return evaluate_retrieval(
        embed_utterances(bundle, [p.frames for p in pairs], threads=threads),
        embed_texts(bundle, [p.tokens for p in pairs], threads=threads),
        "clean",
    )


def cmd_matrix(args: argparse.Namespace) -> int:
    config = _experiment(args)
    corpus = _corpus(args)
    runs_dir = Path(args.runs_dir or get_settings().runs_dir)
    run = run_matrix(
        config,
        corpus,
        args.seeds,
        args.teacher,
        args.asr,
        runs_dir,
        workers=args.workers,
    )
    write_csv(Path(args.out) / "matrix.csv", [report_row(cell) for cell in run.cells])

    results = []
    for cell in run.cells:
        if cell.status == CellStatus.FAILED:
            continue
        checkpoint = Path(cell.run_dir) / "best.ckpt"
        cell_config = with_overrides(config, seed=cell.seed)
        report = _retrieval_on_test(cell_config, checkpoint, corpus, args.threads)
        results.append((cell.scenario_id, cell.seed, report))
    if args.asr:
        frames = [p.frames for p in corpus.test]
        tokens = [p.tokens for p in corpus.test]
        for seed in args.seeds:
            bundle = _load_bundle(config, args.asr, args.teacher, seed=seed)
            cascade = cascade_embed(frames, bundle, threads=args.threads)
            text = embed_texts(bundle, tokens, threads=args.threads)
            report = evaluate_retrieval(cascade.embeddings, text, "clean")
            results.append(("I", seed, report))
    if not results:
        logger.error("every matrix cell failed")
        return 1
    summary = summarize_matrix(results)
    write_csv(Path(args.out) / "matrix_means.csv", summary.mean_rows())
    write_report(
        Path(args.out) / "ordering.csv",
        summary.rows(),
        ReportSummary(
            kind="matrix-ordering",
            seed=config.seed,
            config_hash=config_hash(config),
            metrics={
                f"{sid}.acc_t2s": values["acc_t2s"]
                for sid, values in summary.means.items()
            },
            notes=[
                f"pool size {summary.pool_size}",
                f"failed cells: {len(run.failed)}",
            ],
        ),
    )
    return 0 if not run.failed else 2


def cmd_eval_retrieval(args: argparse.Namespace) -> int:
    config = _experiment(args)
    corpus = _corpus(args)
    bundle = _load_bundle(config, args.checkpoint, args.teacher)
    reports = []
    for name, pairs in gen_eval_suite(corpus, corpus.seed).items():
        frames = [p.frames for p in pairs]
        speech = embed_utterances(bundle, frames, threads=args.threads)
        text = embed_texts(bundle, [p.tokens for p in pairs], threads=args.threads)
        reports.append(evaluate_retrieval(speech, text, name))
    metrics = {f"{r.dataset_id}.acc_t2s": r.acc_t2s for r in reports}
    write_report(
        Path(args.out) / "retrieval.csv",
        [report_row(r, asymmetry=r.asymmetry) for r in reports],
        _summary("eval-retrieval", config, [Path(args.checkpoint)], **metrics),
    )
    return 0


def _zeroshot_dataset(config: ExperimentConfig, corpus: Corpus, kind: ZeroShotKind):
    return gen_zeroshot_dataset(
        kind,
        corpus.language,
        corpus.acoustic,
        corpus.seed,
        config.zeroshot,
        config.corpus,
        corpus.sentences(),
    )


def cmd_eval_zeroshot(args: argparse.Namespace) -> int:
    config = _experiment(args)
    corpus = _corpus(args)
    bundle = _load_bundle(config, args.checkpoint, args.teacher)
    reports = []
    for kind in ZeroShotKind:
        dataset = _zeroshot_dataset(config, corpus, kind)
        reports.append(evaluate_zeroshot(bundle, dataset, threads=args.threads))
    metrics = {f"{r.kind.value}.accuracy": r.accuracy for r in reports}
    write_report(
        Path(args.out) / "zeroshot.csv",
        [report_row(r) for r in reports],
        _summary("eval-zeroshot", config, [Path(args.checkpoint)], **metrics),
    )
    return 0


def cmd_eval_probe(args: argparse.Namespace) -> int:
    config = _experiment(args)
    corpus = _corpus(args)
    before = _load_bundle(config, args.before, args.teacher)
    after = _load_bundle(config, args.after, args.teacher)
    cache = EmbeddingCache(args.cache_dir or get_settings().cache_dir)
    tasks = [ProbingTask(t) for t in args.tasks] if args.tasks else list(ProbingTask)
    datasets = gen_probing_tasks(
        corpus.seed,
        config.probing,
        corpus.language,
        corpus.acoustic,
        config.corpus,
        config.acoustic,
        corpus.sentences(),
        tasks,
    )
    reports = [
        evaluate_probing(datasets[t], before, after, config.probe, cache, args.threads)
        for t in tasks
    ]
    checkpoints = [Path(args.before), Path(args.after)]
    metrics = {f"{r.task}.delta": r.delta for r in reports}
    write_report(
        Path(args.out) / "probing.csv",
        [report_row(r, delta=r.delta, gap_to_text=r.gap_to_text) for r in reports],
        _summary("eval-probe", config, checkpoints, **metrics),
    )
    return 0


def cmd_eval_cascade(args: argparse.Namespace) -> int:
    config = _experiment(args)
    corpus = _corpus(args)
    bundle = _load_bundle(config, args.asr, args.teacher)
    reports = []
    flagged = 0
    for name, pairs in gen_eval_suite(corpus, corpus.seed).items():
        frames = [p.frames for p in pairs]
        cascade = cascade_embed(frames, bundle, threads=args.threads)
        flagged += cascade.n_flagged
        text = embed_texts(bundle, [p.tokens for p in pairs], threads=args.threads)
        reports.append(evaluate_retrieval(cascade.embeddings, text, name))
    checkpoints = [Path(args.asr), Path(args.teacher)]
    write_report(
        Path(args.out) / "cascade.csv",
        [report_row(r) for r in reports],
        _summary("eval-cascade", config, checkpoints, flagged=flagged),
    )
    return 0


def cmd_wer_trend(args: argparse.Namespace) -> int:
    config = _experiment(args)
    corpus = _corpus(args)
    teacher_state = load_checkpoint(args.teacher).state
    snapshots = []
    for path in args.snapshots:
        state = load_checkpoint(path).state
        step = int("".join(ch for ch in Path(path).stem if ch.isdigit()) or 0)
        snapshots.append((step, state))
    table = wer_vs_retrieval(
        snapshots,
        corpus,
        config,
        teacher_state,
        _scenario(config, "B"),
        threads=args.threads,
    )
    summary = _summary("wer-trend", config, [Path(p) for p in args.snapshots])
    if table.spearman is not None:
        summary.metrics["spearman"] = table.spearman
    rows = [report_row(row) for row in table.rows]
    write_report(Path(args.out) / "trend.csv", rows, summary)
    return 0


def cmd_export_2d(args: argparse.Namespace) -> int:
    config = _experiment(args)
    corpus = _corpus(args)
    bundle = _load_bundle(config, args.checkpoint, args.teacher)
    dataset = _zeroshot_dataset(config, corpus, ZeroShotKind(args.kind))
    frames = [item.frames for item in dataset.items]
    speech = embed_utterances(bundle, frames, threads=args.threads)
    text = embed_texts(bundle, dataset.labels, threads=args.threads)
    projection = project_2d(
        np.concatenate([speech, text]),
        list(dataset.truth) + list(range(dataset.n_classes)),
        ["speech"] * len(speech) + ["text"] * len(text),
    )
    summary = _summary(
        "export-2d",
        config,
        [Path(args.checkpoint)],
        variance_explained=projection.variance_explained,
    )
    if projection.rank_deficient:
        summary.notes.append("rank < 2: second axis set to zero")
    out = Path(args.out) / f"points-{args.kind}.csv"
    write_report(out, projection.rows(), summary)
    return 0


# ---------------------------------------------------------------------------
# 参数解析
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="joint-embed", description="语音-文本联合嵌入的桌面规模实验"
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    parser.add_argument("--seed", type=int, default=None, help="全局种子（覆盖配置）")
    parser.add_argument("--config", default=None, help="实验配置 TOML")
    parser.add_argument("--out", default="out", help="输出目录")
    parser.add_argument("--threads", type=int, default=None, help="嵌入线程数")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(
        name: str, handler, help_text: str, corpus: bool = True
    ) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(handler=handler)
        if corpus:
            p.add_argument("--corpus", default=None, help="语料目录（默认 <out>/corpus）")
        return p

    command("gen-data", cmd_gen_data, "生成配对语料与评估套件", corpus=False)
    command("pretrain-teacher", cmd_pretrain_teacher, "掩码词预测预训练教师")
    p = command("pretrain-asr", cmd_pretrain_asr, "ASR 预训练学生与解码器")
    p.add_argument("--snapshot-steps", type=int, nargs="*", default=None)

    p = command("train", cmd_train, "训练一个联合嵌入场景")
    p.add_argument("--scenario", required=True, choices=list("ABCDEF"))
    p.add_argument("--teacher", required=True)
    p.add_argument("--asr", default=None)
    p.add_argument("--runs-dir", default=None)

    p = command("matrix", cmd_matrix, "运行实验矩阵并汇总排序性质")
    p.add_argument("--teacher", required=True)
    p.add_argument("--asr", default=None)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--runs-dir", default=None)

    for name, handler, help_text in (
        ("eval-retrieval", cmd_eval_retrieval, "四个测试集上的双向检索"),
        ("eval-zeroshot", cmd_eval_zeroshot, "三类零样本分类"),
        ("export-2d", cmd_export_2d, "导出二维主成分坐标"),
    ):
        p = command(name, handler, help_text)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--teacher", default=None)
        if name == "export-2d":
            p.add_argument(
                "--kind",
                default=ZeroShotKind.SENTENCE_LIKE.value,
                choices=[k.value for k in ZeroShotKind],
            )

    p = command("eval-probe", cmd_eval_probe, "探针任务（对齐前后）")
    p.add_argument("--before", required=True)
    p.add_argument("--after", required=True)
    p.add_argument("--teacher", default=None)
    p.add_argument(
        "--tasks", nargs="*", default=None, choices=[t.value for t in ProbingTask]
    )
    p.add_argument("--cache-dir", default=None)

    p = command("eval-cascade", cmd_eval_cascade, "级联基线检索")
    p.add_argument("--asr", required=True)
    p.add_argument("--teacher", required=True)

    p = command("wer-trend", cmd_wer_trend, "ASR WER 与对齐后检索准确率的趋势")
    p.add_argument("--teacher", required=True)
    p.add_argument("--snapshots", nargs="+", required=True)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    create_logger(
        log_level=settings.log_level,
        log_format=settings.log_format,
        log_file=settings.log_file,
    )
    if args.threads is None:
        args.threads = settings.threads
    try:
        return args.handler(args)
    except JointEmbedError as exc:
        logger.error(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
