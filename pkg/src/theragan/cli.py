"""Command-line entry point.

One JSON project config drives every subcommand; the config is validated
strictly (unknown keys are errors) before any work starts. Progress is
logged as JSON lines on stdout with no timestamps, so identical runs
produce identical streams; a sidecar `run.log` in the output directory
carries the timestamped copy. Exit codes: 0 success, 2 config problem,
1 runtime failure, with a final machine-readable JSON line on stderr for
the failure cases.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from . import dataio, percsim, preprocess, simdata
from .evalharness import ExperimentPlan, emit_report, import_report_csv, run_experiment
from .gan import GanBundle, TrainConfig, generate, synthesize_complex, train_gan


class ConfigError(Exception):
    """The project config is structurally or numerically invalid."""


# ---------------------------------------------------------------------------
# project config


@dataclass
class ProjectConfig:
    dataset: str | None
    output_dir: str
    seed: int
    jobs: int
    corpus: dict | None
    preprocess_opts: dict
    train: TrainConfig
    spectrogram: percsim.SpectrogramConfig
    extractor_seed: int
    eval_plan: ExperimentPlan | None


def _check_keys(doc: dict, allowed: set[str], where: str) -> None:
    if not isinstance(doc, dict):
        raise ConfigError(f"config section {where or 'top level'} must be an object")
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"unknown config key {where}{key!r}")


def _int_field(doc: dict, key: str, default: int, where: str,
               minimum: int | None = None) -> int:
    value = doc.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"config key {where}{key!r} must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"config key {where}{key!r} must be >= {minimum}")
    return value


TOP_KEYS = {"dataset", "output_dir", "seed", "jobs", "corpus", "preprocess",
            "train", "percsim", "eval"}
CORPUS_KEYS = {"sensors", "simple_activities", "complex_activities", "subjects",
               "n_subjects", "samples_per_subject", "noise_sigma",
               "tempo_jitter", "amplitude_jitter"}
PREPROCESS_KEYS = {"m_frames"}
TRAIN_KEYS = {"noise_dim", "batch_size", "disc_loss_threshold", "disc_count_max",
              "gen_loss_threshold", "gen_count_max", "epoch_max",
              "similarity_threshold", "learning_rate", "beta1", "beta2"}
PERCSIM_KEYS = {"window", "hop", "extractor_seed"}
EVAL_KEYS = {"families", "ratios", "n_runs", "held_out_subjects",
             "held_out_count", "window", "stride", "train_epochs", "batch_size",
             "learning_rate", "blend_frames", "subsample"}


def load_project_config(path: str | Path, *, seed_override: int | None = None,
                        jobs_override: int | None = None,
                        out_override: str | None = None) -> ProjectConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    _check_keys(doc, TOP_KEYS, "")

    seed = _int_field(doc, "seed", 0, "")
    if seed_override is not None:
        seed = seed_override
    jobs = _int_field(doc, "jobs", 1, "", minimum=1)
    if jobs_override is not None:
        if jobs_override < 1:
            raise ConfigError("--jobs must be >= 1")
        jobs = jobs_override
    output_dir = out_override or doc.get("output_dir", "out")
    if not isinstance(output_dir, str):
        raise ConfigError("config key 'output_dir' must be a string")
    dataset = doc.get("dataset")
    if dataset is not None and not isinstance(dataset, str):
        raise ConfigError("config key 'dataset' must be a string path")

    corpus = doc.get("corpus")
    if corpus is not None:
        _check_keys(corpus, CORPUS_KEYS, "corpus.")

    pre = doc.get("preprocess", {})
    _check_keys(pre, PREPROCESS_KEYS, "preprocess.")
    if pre.get("m_frames") is not None:
        if not isinstance(pre["m_frames"], int) or pre["m_frames"] < 2:
            raise ConfigError("config key preprocess.'m_frames' must be an "
                              "integer >= 2 or null")

    train_doc = doc.get("train", {})
    _check_keys(train_doc, TRAIN_KEYS, "train.")
    try:
        train = TrainConfig(seed=seed, **train_doc)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid train section: {e}") from None

    ps_doc = doc.get("percsim", {})
    _check_keys(ps_doc, PERCSIM_KEYS, "percsim.")
    try:
        spectrogram = percsim.SpectrogramConfig(
            window=_int_field(ps_doc, "window", 64, "percsim.", minimum=1),
            hop=_int_field(ps_doc, "hop", 16, "percsim.", minimum=1))
    except ValueError as e:
        raise ConfigError(f"invalid percsim section: {e}") from None
    extractor_seed = _int_field(ps_doc, "extractor_seed", percsim.FEATURE_SEED,
                                "percsim.")

    eval_doc = doc.get("eval")
    eval_plan = None
    if eval_doc is not None:
        _check_keys(eval_doc, EVAL_KEYS, "eval.")
        try:
            eval_plan = ExperimentPlan(seed=seed, **eval_doc)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid eval section: {e}") from None

    return ProjectConfig(dataset=dataset, output_dir=output_dir, seed=seed,
                         jobs=jobs, corpus=corpus, preprocess_opts=pre,
                         train=train, spectrogram=spectrogram,
                         extractor_seed=extractor_seed, eval_plan=eval_plan)


def _corpus_spec(cfg: ProjectConfig) -> simdata.CorpusSpec:
    doc = cfg.corpus
    if doc is None:
        raise ConfigError("this subcommand needs a 'corpus' config section")
    subjects = doc.get("subjects")
    if subjects is None:
        n = _int_field(doc, "n_subjects", 0, "corpus.", minimum=1)
        subjects = [f"subj{i + 1:02d}" for i in range(n)]
    try:
        return simdata.CorpusSpec(
            sensors=list(doc.get("sensors", ["left_wrist"])),
            simple_activities=dict(doc.get("simple_activities", {})),
            complex_activities={k: list(v) for k, v in
                                doc.get("complex_activities", {}).items()},
            subjects=list(subjects),
            samples_per_subject=_int_field(doc, "samples_per_subject", 1,
                                           "corpus.", minimum=1),
            noise_sigma=float(doc.get("noise_sigma", 0.01)),
            tempo_jitter=tuple(doc.get("tempo_jitter", (0.9, 1.1))),
            amplitude_jitter=tuple(doc.get("amplitude_jitter", (0.9, 1.1))),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid corpus section: {e}") from None


# ---------------------------------------------------------------------------
# logging


class RunLogger:
    """JSON lines on stdout (timestamp-free); timestamped copy in run.log."""

    def __init__(self, out_dir: Path | None):
        self._sidecar = None
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            self._sidecar = open(out_dir / "run.log", "a", encoding="utf-8")

    def log(self, **fields) -> None:
        line = json.dumps(fields, sort_keys=True)
        print(line)
        if self._sidecar is not None:
            stamp = datetime.now().isoformat(timespec="milliseconds")
            self._sidecar.write(f"{stamp} {line}\n")
            self._sidecar.flush()

    def close(self) -> None:
        if self._sidecar is not None:
            self._sidecar.close()


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}, sort_keys=True),
          file=sys.stderr)
    return code


# ---------------------------------------------------------------------------
# subcommand helpers


def _model_dir(cfg: ProjectConfig, activity: str, sensor: str) -> Path:
    return Path(cfg.output_dir) / "models" / f"{activity}__{sensor}"


def _target_pairs(dataset: dataio.Dataset, activities: list[str] | None,
                  sensors: list[str] | None) -> list[tuple[str, str]]:
    all_activities = sorted(dataset.manifest.simple_activities)
    all_sensors = list(dataset.manifest.sensors)
    chosen_a = activities or all_activities
    chosen_s = sensors or all_sensors
    for a in chosen_a:
        if a not in all_activities:
            raise ConfigError(f"unknown activity {a!r}; dataset has {all_activities}")
    for s in chosen_s:
        if s not in all_sensors:
            raise ConfigError(f"unknown sensor {s!r}; dataset has {all_sensors}")
    return [(a, s) for a in chosen_a for s in chosen_s]


def _similarity_callback(cfg: ProjectConfig):
    extractor = percsim.FeatureExtractor(6, seed=cfg.extractor_seed,
                                         config=cfg.spectrogram)

    def call(gen_batch, real_batch):
        return percsim.similarity_distance(gen_batch, real_batch, extractor)

    return call


def _train_one(dataset_path: str, activity: str, sensor: str,
               train_doc: dict, m_frames: int | None, model_dir: str,
               spectrogram: tuple[int, int], extractor_seed: int) -> dict:
    """Worker: train a single (activity, sensor) bundle and persist it."""
    dataset = dataio.load_dataset(dataset_path)
    prepared = preprocess.prepare_training_set(dataset, activity, sensor,
                                               m_frames=m_frames)
    extractor = percsim.FeatureExtractor(
        6, seed=extractor_seed,
        config=percsim.SpectrogramConfig(*spectrogram))
    bundle = train_gan(
        prepared, TrainConfig(**train_doc),
        similarity=lambda g, r: percsim.similarity_distance(g, r, extractor))
    dataio.save_model(bundle, model_dir)
    _write_history_csv(bundle, Path(model_dir) / "history.csv")
    return {
        "activity": activity, "sensor": sensor, "m_frames": prepared.m_frames,
        "epochs": len(bundle.history),
        "final_similarity": bundle.final_similarity,
        "model_dir": model_dir,
    }


def _write_history_csv(bundle: GanBundle, path: Path) -> None:
    lines = ["epoch,disc_iters,gen_iters,temporal_loss,frequency_loss,"
             "generator_loss,similarity"]
    for r in bundle.history:
        lines.append(f"{r.epoch},{r.disc_iters},{r.gen_iters},"
                     f"{r.temporal_loss:.9g},{r.frequency_loss:.9g},"
                     f"{r.generator_loss:.9g},{r.similarity:.9g}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_bundles_for(dataset: dataio.Dataset, cfg: ProjectConfig,
                      complex_ids: list[str]) -> dict[tuple[str, str], GanBundle]:
    bundles = {}
    for cid in complex_ids:
        for sid in dataset.manifest.complex_activities[cid]:
            for sensor in dataset.manifest.sensors:
                key = (sid, sensor)
                if key not in bundles:
                    bundles[key] = dataio.load_model(_model_dir(cfg, sid, sensor))
    return bundles


# ---------------------------------------------------------------------------
# subcommands


def cmd_simdata(cfg: ProjectConfig, args, log: RunLogger) -> int:
    if cfg.dataset is None:
        raise ConfigError("config key 'dataset' (output path) is required")
    spec = _corpus_spec(cfg)
    try:
        dataset = simdata.synth_corpus(spec, cfg.dataset, cfg.seed)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    total_frames = 0
    for rec in dataset.iter_recordings():
        total_frames += rec.n_frames
    log.log(event="simdata", dataset=cfg.dataset,
            recordings=len(dataset.recording_ids()),
            subjects=len(spec.subjects), total_frames=total_frames)
    return 0


def cmd_preprocess(cfg: ProjectConfig, args, log: RunLogger) -> int:
    dataset = _open_dataset(cfg)
    out = Path(cfg.output_dir) / "preprocess"
    out.mkdir(parents=True, exist_ok=True)
    stats = []
    for activity, sensor in _target_pairs(dataset, args.activity, args.sensor):
        prepared = preprocess.prepare_training_set(
            dataset, activity, sensor, m_frames=cfg.preprocess_opts.get("m_frames"))
        blob = out / f"{activity}__{sensor}.bin"
        dataio.write_named_arrays(blob, {
            "samples": prepared.samples,
            "x_average": prepared.x_average,
            "norm_min": prepared.norm.minimum,
            "norm_max": prepared.norm.maximum,
        })
        entry = {
            "activity": activity, "sensor": sensor,
            "n_samples": int(prepared.samples.shape[0]),
            "m_frames": prepared.m_frames,
            "norm_min": [float(v) for v in prepared.norm.minimum],
            "norm_max": [float(v) for v in prepared.norm.maximum],
        }
        stats.append(entry)
        log.log(event="preprocess", **entry)
    (out / "stats.json").write_text(json.dumps(stats, indent=1) + "\n",
                                    encoding="utf-8")
    return 0


def cmd_train(cfg: ProjectConfig, args, log: RunLogger) -> int:
    dataset = _open_dataset(cfg)
    pairs = _target_pairs(dataset, args.activity, args.sensor)
    train_doc = asdict(cfg.train)
    m_frames = cfg.preprocess_opts.get("m_frames")
    tasks = [(cfg.dataset, a, s, train_doc, m_frames,
              str(_model_dir(cfg, a, s)),
              (cfg.spectrogram.window, cfg.spectrogram.hop), cfg.extractor_seed)
             for a, s in pairs]
    log.log(event="train-start", models=len(tasks), jobs=cfg.jobs)
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_train_one_star, tasks))
    else:
        results = [_train_one(*t) for t in tasks]
    for result in results:
        log.log(event="trained", **result)
    return 0


def _train_one_star(task):
    return _train_one(*task)


def cmd_generate(cfg: ProjectConfig, args, log: RunLogger) -> int:
    dataset = _open_dataset(cfg)
    out = Path(cfg.output_dir) / "generated"
    if args.complex:
        cid = args.complex
        if cid not in dataset.manifest.complex_activities:
            raise ConfigError(
                f"unknown complex activity {cid!r}; dataset has "
                f"{sorted(dataset.manifest.complex_activities)}")
        bundles = _load_bundles_for(dataset, cfg, [cid])
        parts = dataset.manifest.complex_activities[cid]
        sensors = dataset.manifest.sensors
        target = out / cid
        target.mkdir(parents=True, exist_ok=True)
        for k in range(args.count):
            signal = synthesize_complex(cid, parts, bundles, sensors,
                                        seed=cfg.seed + k,
                                        blend_frames=args.blend)
            for i, sensor in enumerate(sensors):
                path = target / f"sample{k:03d}_{sensor}.csv"
                dataio.export_signal_csv(signal[6 * i:6 * i + 6], path)
            log.log(event="generated-complex", complex=cid, sample=k,
                    frames=int(signal.shape[1]))
    else:
        pairs = _target_pairs(dataset, args.activity, args.sensor)
        for activity, sensor in pairs:
            bundle = dataio.load_model(_model_dir(cfg, activity, sensor))
            _, physical = generate(bundle, args.count, cfg.seed)
            target = out / f"{activity}__{sensor}"
            target.mkdir(parents=True, exist_ok=True)
            for k in range(args.count):
                dataio.export_signal_csv(physical[k],
                                         target / f"sample{k:03d}.csv")
            log.log(event="generated", activity=activity, sensor=sensor,
                    count=args.count, m_frames=bundle.m_frames)
    return 0


def cmd_similarity(cfg: ProjectConfig, args, log: RunLogger) -> int:
    dataset = _open_dataset(cfg)
    if not args.activity or not args.sensor:
        raise ConfigError("similarity needs --activity and --sensor")
    results = []
    out = Path(cfg.output_dir) / "similarity"
    out.mkdir(parents=True, exist_ok=True)
    extractor = percsim.FeatureExtractor(6, seed=cfg.extractor_seed,
                                         config=cfg.spectrogram)
    for activity, sensor in _target_pairs(dataset, args.activity, args.sensor):
        bundle = dataio.load_model(_model_dir(cfg, activity, sensor))
        raw = preprocess.collect_simple_samples(dataset, activity, sensor)
        if not raw:
            raise ConfigError(
                f"dataset holds no samples of {activity!r} on {sensor!r}")
        aligned = np.stack([
            preprocess.normalize(
                preprocess.align_length(x, bundle.m_frames), bundle.norm)
            for x in raw])
        batch, _ = generate(bundle, bundle.config.batch_size, cfg.seed)
        s_d = percsim.similarity_distance(batch, aligned, extractor)
        entry = {"activity": activity, "sensor": sensor,
                 "similarity": float(s_d),
                 "final_training_similarity": bundle.final_similarity}
        results.append(entry)
        log.log(event="similarity", **entry)
    (out / "similarity.json").write_text(json.dumps(results, indent=1) + "\n",
                                         encoding="utf-8")
    return 0


def cmd_eval(cfg: ProjectConfig, args, log: RunLogger) -> int:
    if cfg.eval_plan is None:
        raise ConfigError("this subcommand needs an 'eval' config section")
    dataset = _open_dataset(cfg)
    class_ids = sorted(dataset.manifest.complex_activities)
    bundles = _load_bundles_for(dataset, cfg, class_ids)
    report = run_experiment(dataset, bundles, cfg.eval_plan,
                            log_fn=lambda fields: log.log(**fields))
    out = Path(cfg.output_dir) / "eval"
    csv_path, svg_path = emit_report(report, out)
    (out / "summary.json").write_text(
        json.dumps(report.summary(), indent=1) + "\n", encoding="utf-8")
    log.log(event="eval-done", rows=len(report.rows), csv=str(csv_path),
            svg=str(svg_path))
    return 0


def cmd_report(cfg: ProjectConfig, args, log: RunLogger) -> int:
    csv_path = Path(args.input) if args.input else \
        Path(cfg.output_dir) / "eval" / "report.csv"
    if not csv_path.exists():
        raise dataio.MissingFileError(f"no report CSV at {csv_path}")
    report = import_report_csv(csv_path)
    out = csv_path.parent
    svg_path = out / "report.svg"
    from .evalharness import render_report_svg
    svg_path.write_text(render_report_svg(report), encoding="utf-8")
    (out / "summary.json").write_text(
        json.dumps(report.summary(), indent=1) + "\n", encoding="utf-8")
    log.log(event="report", rows=len(report.rows), svg=str(svg_path))
    return 0


def _open_dataset(cfg: ProjectConfig) -> dataio.Dataset:
    if cfg.dataset is None:
        raise ConfigError("config key 'dataset' is required for this subcommand")
    return dataio.load_dataset(cfg.dataset)


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="theragan",
        description="Conditional GAN pipeline for 6-channel activity signals")
    parser.add_argument("--config", required=True, help="project config JSON")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config master seed")
    parser.add_argument("--jobs", type=int, default=None,
                        help="parallel trainings (train subcommand)")
    parser.add_argument("--out", default=None, help="override output_dir")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simdata", help="write a synthetic corpus")

    p = sub.add_parser("preprocess", help="emit aligned/normalized sample archives")
    _pair_flags(p)

    p = sub.add_parser("train", help="train (activity, sensor) GAN bundles")
    _pair_flags(p)

    p = sub.add_parser("generate", help="emit generated signals as CSV")
    _pair_flags(p)
    p.add_argument("--complex", default=None, help="synthesize a complex activity")
    p.add_argument("--count", type=int, default=1, help="samples to generate")
    p.add_argument("--blend", type=int, default=0, help="crossfade width in frames")

    p = sub.add_parser("similarity", help="score generated vs real signals")
    _pair_flags(p)

    sub.add_parser("eval", help="run the classifier augmentation experiment")

    p = sub.add_parser("report", help="re-render plots from a report CSV")
    p.add_argument("--input", default=None, help="report CSV path")
    return parser


def _pair_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--activity", action="append", default=None,
                   help="simple-activity id filter (repeatable)")
    p.add_argument("--sensor", action="append", default=None,
                   help="sensor id filter (repeatable)")


COMMANDS = {
    "simdata": cmd_simdata,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "generate": cmd_generate,
    "similarity": cmd_similarity,
    "eval": cmd_eval,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_project_config(args.config, seed_override=args.seed,
                                  jobs_override=args.jobs,
                                  out_override=args.out)
        if getattr(args, "count", 1) < 0:
            raise ConfigError("--count must be >= 0")
        if getattr(args, "blend", 0) < 0:
            raise ConfigError("--blend must be >= 0")
    except ConfigError as e:
        return _fail("config", str(e), 2)

    log = RunLogger(Path(cfg.output_dir))
    try:
        return COMMANDS[args.command](cfg, args, log)
    except ConfigError as e:
        return _fail("config", str(e), 2)
    except Exception as e:  # noqa: BLE001 - boundary: report and set exit code
        return _fail("runtime", f"{type(e).__name__}: {e}", 1)
    finally:
        log.close()


if __name__ == "__main__":
    sys.exit(main())
