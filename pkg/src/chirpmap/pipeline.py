"""Stage orchestration over disk artifacts.

Each stage reads its inputs from the output directory and writes its
artifacts back there, so running stages one by one produces byte-for-
byte the same files as the single-shot pipeline. Every artifact embeds
the config hash and master seed; a failing stage leaves a FAILED marker
naming the stage and cause next to whatever partial outputs exist.

Artifacts: features.csv + ingest_meta.json + rejections.txt,
embedding.csv + embedding_meta.json, eval_report.json,
models/<scenario>_<classifier>.json, sensitivity.csv +
sensitivity_meta.json, figs/*.svg.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from types import SimpleNamespace

import numpy as np

from .errors import ChirpmapError, DataError, UsageError
from .evaluation import (
    SCENARIO_ORDER,
    SCENARIOS,
    encode_scenario,
    run_all_scenarios,
    save_eval_report,
    load_eval_report,
)
from .ingest import (
    CANONICAL_COLUMNS,
    FEATURE_NAMES,
    FeatureMatrix,
    FeatureWeights,
    apply_weights,
    class_distribution,
    load_records,
    records_to_matrix,
    standardize,
    subsample_records,
)
from .models import (
    CLASSIFIER_KINDS,
    SHORT_KIND_NAMES,
    LabeledPoints,
    default_config,
    load_model,
    save_model,
)
from .render import (
    PlotSpec,
    render_bars,
    render_boundary,
    render_confusion,
    render_labeled_embedding,
    render_metric_bars,
    render_sensitivity,
)
from .seeding import derive_seed
from .sensitivity import (
    SensitivityConfig,
    build_sensitivity_map,
    fit_coordinate_regressors,
    load_sensitivity_map,
    save_sensitivity_map,
    sensitivity_summary,
)
from .tsne import TsneConfig, load_embedding_csv, run_tsne, save_embedding

LONG_KIND_NAMES = {v: k for k, v in SHORT_KIND_NAMES.items()}

_TSNE_KEYS = (
    "perplexity",
    "n_iterations",
    "learning_rate",
    "momentum_early",
    "momentum_late",
    "momentum_switch_iter",
    "exaggeration_factor",
    "exaggeration_until_iter",
)

_TOP_KEYS = {
    "input",
    "out",
    "schema",
    "delimiter",
    "weights",
    "subsample",
    "tsne",
    "scenarios",
    "classifiers",
    "k_folds",
    "holdout_fraction",
    "classifier_configs",
    "sensitivity",
    "grid_resolution",
    "seed",
}


@dataclass(frozen=True)
class PipelineConfig:
    input: str | None = None
    out: str = "out"
    schema: dict | None = None
    delimiter: str = ","
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    subsample: int | None = None
    tsne: dict = field(default_factory=dict)
    scenarios: tuple[str, ...] = SCENARIO_ORDER
    classifiers: tuple[str, ...] = CLASSIFIER_KINDS
    k_folds: int = 5
    holdout_fraction: float = 0.3
    classifier_configs: dict = field(default_factory=dict)
    sensitivity: dict = field(default_factory=dict)
    grid_resolution: int = 300
    seed: int = 0

    def hash(self) -> str:
        """Identity of everything semantic; file locations excluded."""
        doc = {
            "schema": self.schema,
            "delimiter": self.delimiter,
            "weights": list(self.weights),
            "subsample": self.subsample,
            "tsne": self.tsne,
            "scenarios": list(self.scenarios),
            "classifiers": list(self.classifiers),
            "k_folds": self.k_folds,
            "holdout_fraction": self.holdout_fraction,
            "classifier_configs": self.classifier_configs,
            "sensitivity": self.sensitivity,
            "grid_resolution": self.grid_resolution,
            "seed": self.seed,
        }
        canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _normalize_scenarios(value) -> tuple[str, ...]:
    if value in (None, "all"):
        return SCENARIO_ORDER
    if isinstance(value, str):
        value = [value]
    keys = tuple(str(v).lower() for v in value)
    for k in keys:
        if k not in SCENARIOS:
            raise UsageError(f"unknown scenario {k!r}; expected s1, s2, s3, or all")
    return keys


def _normalize_classifiers(value) -> tuple[str, ...]:
    if value in (None, "all"):
        return CLASSIFIER_KINDS
    if isinstance(value, str):
        value = [value]
    out = []
    for v in value:
        name = SHORT_KIND_NAMES.get(str(v), str(v))
        if name not in CLASSIFIER_KINDS:
            raise UsageError(
                f"unknown classifier {v!r}; expected rf, svm, logreg, knn, or all"
            )
        out.append(name)
    return tuple(out)


def config_from_dict(doc: dict) -> PipelineConfig:
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")

    weights = doc.get("weights", (1.0, 1.0, 1.0))
    try:
        weights = tuple(float(w) for w in weights)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"weights must be three numbers: {exc}") from exc
    if len(weights) != 3:
        raise UsageError(f"weights must have exactly 3 entries, got {len(weights)}")

    tsne = dict(doc.get("tsne", {}))
    bad = set(tsne) - set(_TSNE_KEYS)
    if bad:
        raise UsageError(f"unknown tsne config keys: {', '.join(sorted(bad))}")

    classifier_configs = {}
    for raw_kind, overrides in dict(doc.get("classifier_configs", {})).items():
        kind = SHORT_KIND_NAMES.get(str(raw_kind), str(raw_kind))
        if kind not in CLASSIFIER_KINDS:
            raise UsageError(f"unknown classifier in classifier_configs: {raw_kind!r}")
        try:
            replace(default_config(kind), **overrides)
        except (TypeError, ChirpmapError) as exc:
            raise UsageError(f"bad config for {kind}: {exc}") from exc
        classifier_configs[kind] = dict(overrides)

    sens = dict(doc.get("sensitivity", {}))
    bad = set(sens) - {"n_trees", "max_depth", "combination"}
    if bad:
        raise UsageError(f"unknown sensitivity config keys: {', '.join(sorted(bad))}")

    subsample = doc.get("subsample")
    if subsample is not None:
        subsample = int(subsample)
        if subsample < 1:
            raise UsageError("subsample must be a positive integer")

    k_folds = int(doc.get("k_folds", 5))
    holdout_fraction = float(doc.get("holdout_fraction", 0.3))
    if k_folds < 2:
        raise UsageError("k_folds must be at least 2")
    if not 0.0 < holdout_fraction < 1.0:
        raise UsageError("holdout_fraction must be in (0, 1)")
    grid = int(doc.get("grid_resolution", 300))
    if grid < 2:
        raise UsageError("grid_resolution must be at least 2")
    delimiter = str(doc.get("delimiter", ","))
    if len(delimiter) != 1:
        raise UsageError("delimiter must be a single character")

    return PipelineConfig(
        input=doc.get("input"),
        out=str(doc.get("out", "out")),
        schema=doc.get("schema"),
        delimiter=delimiter,
        weights=weights,
        subsample=subsample,
        tsne=tsne,
        scenarios=_normalize_scenarios(doc.get("scenarios")),
        classifiers=_normalize_classifiers(doc.get("classifiers")),
        k_folds=k_folds,
        holdout_fraction=holdout_fraction,
        classifier_configs=classifier_configs,
        sensitivity=sens,
        grid_resolution=grid,
        seed=int(doc.get("seed", 0)),
    )


def load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return doc


def artifact_paths(out_dir: str) -> dict:
    return {
        "features": os.path.join(out_dir, "features.csv"),
        "ingest_meta": os.path.join(out_dir, "ingest_meta.json"),
        "rejections": os.path.join(out_dir, "rejections.txt"),
        "embedding": os.path.join(out_dir, "embedding.csv"),
        "embedding_meta": os.path.join(out_dir, "embedding_meta.json"),
        "eval_report": os.path.join(out_dir, "eval_report.json"),
        "models_dir": os.path.join(out_dir, "models"),
        "sensitivity": os.path.join(out_dir, "sensitivity.csv"),
        "sensitivity_meta": os.path.join(out_dir, "sensitivity_meta.json"),
        "figs_dir": os.path.join(out_dir, "figs"),
        "failed": os.path.join(out_dir, "FAILED"),
    }


def _log(message: str) -> None:
    print(f"[chirpmap] {message}", file=sys.stderr)


def _provenance(config: PipelineConfig) -> dict:
    return {"config": config.hash(), "seed": config.seed}


def _write_json(doc: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle, indent=2, sort_keys=True)
        handle.write("\n")


def stage_ingest(config: PipelineConfig) -> None:
    """Load, validate, optionally subsample, standardize, and weight."""
    if not config.input:
        raise UsageError("ingest needs an input file (--input or config 'input')")
    paths = artifact_paths(config.out)
    os.makedirs(config.out, exist_ok=True)

    records, report = load_records(config.input, schema=config.schema, delimiter=config.delimiter)
    n_loaded = len(records)
    if config.subsample is not None:
        records = subsample_records(records, config.subsample, derive_seed(config.seed, "subsample"))
    try:
        weights = FeatureWeights(*config.weights)
    except DataError as exc:
        raise DataError(f"apply_weights: {exc}") from exc
    matrix = apply_weights(standardize(records_to_matrix(records)), weights)

    with open(paths["features"], "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(CANONICAL_COLUMNS))
        for record, row in zip(records, matrix.values):
            writer.writerow(
                [record.id]
                + [repr(float(v)) for v in row]
                + [record.outcome, record.difficulty]
            )
    with open(paths["rejections"], "w", encoding="utf-8") as handle:
        handle.write(f"# config={config.hash()} seed={config.seed}\n")
        handle.write(report.to_text())
    meta = {
        "config_hash": config.hash(),
        "master_seed": config.seed,
        "input_basename": os.path.basename(config.input),
        "n_input": report.n_input,
        "n_rejected": report.n_rejected,
        "n_accepted": report.n_accepted,
        "n_after_subsample": len(records) if config.subsample is not None else None,
        "scaling": matrix.scaling,
        "weights": list(config.weights),
        "distribution": class_distribution(records),
    }
    _write_json(meta, paths["ingest_meta"])
    _log(
        f"ingest: {report.n_accepted}/{report.n_input} rows accepted"
        + (f", {len(records)} kept after subsampling" if len(records) != n_loaded else "")
    )


def _read_features(path: str) -> tuple[list[str], np.ndarray, list]:
    """features.csv back into (ids, values, rows-with-labels)."""
    if not os.path.exists(path):
        raise DataError("missing features artifact (run the ingest stage first)")
    ids: list[str] = []
    values: list[list[float]] = []
    rows: list[SimpleNamespace] = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != list(CANONICAL_COLUMNS):
            raise DataError(f"{path} does not hold the canonical feature columns")
        for row in reader:
            ids.append(row[0])
            values.append([float(v) for v in row[1:4]])
            rows.append(SimpleNamespace(outcome=row[4], difficulty=int(row[5])))
    if not ids:
        raise DataError(f"{path} contains no rows")
    return ids, np.array(values, dtype=np.float64), rows


def stage_embed(config: PipelineConfig) -> None:
    paths = artifact_paths(config.out)
    ids, values, _ = _read_features(paths["features"])
    tsne_config = TsneConfig(seed=derive_seed(config.seed, "embed"), **config.tsne)
    matrix = FeatureMatrix(ids=ids, values=values)
    embedding = run_tsne(matrix, tsne_config)
    save_embedding(
        embedding,
        paths["embedding"],
        paths["embedding_meta"],
        extra_metadata={"config_hash": config.hash(), "master_seed": config.seed},
    )
    _log(f"embed: {len(ids)} points, final KL {embedding.final_kl:.4f}")


def _read_embedding_aligned(paths: dict) -> tuple[list[str], np.ndarray, np.ndarray, list]:
    ids, values, rows = _read_features(paths["features"])
    if not os.path.exists(paths["embedding"]):
        raise DataError("missing embedding artifact (run the embed stage first)")
    emb_ids, coords = load_embedding_csv(paths["embedding"])
    if emb_ids != ids:
        raise DataError("embedding rows do not match features.csv rows")
    return ids, values, coords, rows


def stage_eval(config: PipelineConfig) -> None:
    paths = artifact_paths(config.out)
    _, _, coords, rows = _read_embedding_aligned(paths)
    report, models = run_all_scenarios(
        coords,
        rows,
        master_seed=config.seed,
        scenario_keys=config.scenarios,
        classifier_kinds=config.classifiers,
        k_folds=config.k_folds,
        holdout_fraction=config.holdout_fraction,
        classifier_configs=_built_classifier_configs(config),
    )
    report["config_hash"] = config.hash()
    report["classifier_configs"] = {
        kind: _config_doc(kind, config) for kind in config.classifiers
    }
    save_eval_report(report, paths["eval_report"])
    os.makedirs(paths["models_dir"], exist_ok=True)
    for (scenario, kind), model in models.items():
        save_model(
            model,
            os.path.join(paths["models_dir"], f"{scenario}_{LONG_KIND_NAMES[kind]}.json"),
            extra={"provenance": _provenance(config)},
        )
    _log(
        f"eval: {len(config.scenarios)} scenarios x {len(config.classifiers)} classifiers, "
        f"{config.k_folds}-fold CV + {config.holdout_fraction:.0%} hold-out"
    )


def _built_classifier_configs(config: PipelineConfig) -> dict:
    built = {}
    for kind, overrides in config.classifier_configs.items():
        built[kind] = replace(default_config(kind), **overrides)
    return built


def _config_doc(kind: str, config: PipelineConfig) -> dict:
    base = default_config(kind)
    overrides = config.classifier_configs.get(kind, {})
    return asdict(replace(base, **overrides))


def stage_explain(config: PipelineConfig) -> None:
    paths = artifact_paths(config.out)
    ids, values, coords, _ = _read_embedding_aligned(paths)
    sens_config = SensitivityConfig(
        n_trees=int(config.sensitivity.get("n_trees", 100)),
        max_depth=config.sensitivity.get("max_depth"),
        seed=derive_seed(config.seed, "explain"),
        combination=config.sensitivity.get("combination", "euclidean"),
    )
    matrix = FeatureMatrix(ids=ids, values=values)
    regressors = fit_coordinate_regressors(matrix, coords, sens_config)
    smap = build_sensitivity_map(regressors, matrix, combination=sens_config.combination)
    save_sensitivity_map(
        smap,
        paths["sensitivity"],
        paths["sensitivity_meta"],
        extra_metadata={
            "config_hash": config.hash(),
            "master_seed": config.seed,
            "summary": sensitivity_summary(smap),
        },
    )
    _log(
        f"explain: R^2 x={regressors.r2_x:.3f} y={regressors.r2_y:.3f}, "
        f"{len(ids)} records attributed"
    )


def stage_render(config: PipelineConfig) -> None:
    paths = artifact_paths(config.out)
    ids, _, coords, rows = _read_embedding_aligned(paths)
    if not os.path.exists(paths["eval_report"]):
        raise DataError("missing evaluation artifact (run the eval stage first)")
    report = load_eval_report(paths["eval_report"])
    if not os.path.exists(paths["sensitivity"]):
        raise DataError("missing sensitivity artifact (run the explain stage first)")
    smap = load_sensitivity_map(paths["sensitivity"], paths["sensitivity_meta"])
    if smap.ids != ids:
        raise DataError("sensitivity rows do not match embedding rows")

    os.makedirs(paths["figs_dir"], exist_ok=True)
    prov = _provenance(config)
    figs = paths["figs_dir"]

    dist = class_distribution(rows)
    _write_svg(
        render_bars(
            dist["outcome"],
            PlotSpec(kind="bars", title="Outcome distribution"),
            provenance=prov,
        ),
        figs,
        "fig_bars_outcome.svg",
    )
    _write_svg(
        render_bars(
            dist["difficulty"],
            PlotSpec(kind="bars", title="Difficulty distribution"),
            provenance=prov,
        ),
        figs,
        "fig_bars_difficulty.svg",
    )
    _write_svg(
        render_labeled_embedding(
            coords,
            [r.outcome for r in rows],
            PlotSpec(kind="scatter", title="Embedding by outcome", x_label="t-SNE x", y_label="t-SNE y"),
            provenance=prov,
        ),
        figs,
        "fig_embedding_outcome.svg",
    )
    _write_svg(
        render_labeled_embedding(
            coords,
            [r.difficulty for r in rows],
            PlotSpec(kind="scatter", title="Embedding by difficulty", x_label="t-SNE x", y_label="t-SNE y"),
            provenance=prov,
        ),
        figs,
        "fig_embedding_difficulty.svg",
    )

    for scenario in config.scenarios:
        labels, _ = encode_scenario(rows, SCENARIOS[scenario])
        points = LabeledPoints(coords, labels)
        for kind in config.classifiers:
            short = LONG_KIND_NAMES[kind]
            model_path = os.path.join(paths["models_dir"], f"{scenario}_{short}.json")
            if not os.path.exists(model_path):
                raise DataError(f"missing model artifact {model_path} (run the eval stage first)")
            model = load_model(model_path)
            _write_svg(
                render_boundary(
                    model,
                    points,
                    PlotSpec(
                        kind="boundary",
                        title=f"{scenario} decision regions ({short})",
                        width=640,
                        height=640,
                        x_label="t-SNE x",
                        y_label="t-SNE y",
                    ),
                    g=config.grid_resolution,
                    provenance=prov,
                ),
                figs,
                f"fig_boundary_{scenario}_{short}.svg",
            )
        scen_report = report["scenarios"][scenario]["classifiers"]
        confusions = {
            LONG_KIND_NAMES[kind]: scen_report[kind]["holdout"]["confusion"]
            for kind in config.classifiers
        }
        _write_svg(
            render_confusion(
                confusions,
                PlotSpec(kind="confusion", title=f"{scenario} hold-out confusion", width=760, height=260),
                provenance=prov,
            ),
            figs,
            f"fig_confusion_{scenario}.svg",
        )
        metrics = {}
        for kind in config.classifiers:
            entry = scen_report[kind]
            metrics[LONG_KIND_NAMES[kind]] = {
                "accuracy": entry["cv_accuracy_mean"],
                "precision": entry["holdout"]["precision"],
                "recall": entry["holdout"]["recall"],
                "f1": entry["holdout"]["f1"],
            }
        _write_svg(
            render_metric_bars(
                metrics,
                PlotSpec(
                    kind="bars",
                    title=f"{scenario}: CV accuracy and hold-out precision/recall/F1",
                    width=760,
                    height=360,
                ),
                provenance=prov,
            ),
            figs,
            f"fig_metrics_{scenario}.svg",
        )

    for j, feature in enumerate(smap.feature_names):
        _write_svg(
            render_sensitivity(
                coords,
                smap.combined[:, j],
                feature,
                PlotSpec(kind="sensitivity", x_label="t-SNE x", y_label="t-SNE y"),
                provenance=prov,
            ),
            figs,
            f"fig_sensitivity_{feature}.svg",
        )
    n_figs = 4 + len(config.scenarios) * (len(config.classifiers) + 2) + len(smap.feature_names)
    _log(f"render: {n_figs} figures written to {figs}")


def _write_svg(svg: str, directory: str, name: str) -> None:
    with open(os.path.join(directory, name), "w", encoding="utf-8") as handle:
        handle.write(svg)


_STAGES = (
    ("ingest", stage_ingest),
    ("embed", stage_embed),
    ("eval", stage_eval),
    ("explain", stage_explain),
    ("render", stage_render),
)


def run_stage(name: str, config: PipelineConfig) -> None:
    """Run one stage; on failure leave a FAILED marker naming it."""
    stage_fn = dict(_STAGES).get(name)
    if stage_fn is None:
        raise UsageError(f"unknown stage {name!r}")
    os.makedirs(config.out, exist_ok=True)
    paths = artifact_paths(config.out)
    try:
        stage_fn(config)
    except Exception as exc:
        with open(paths["failed"], "w", encoding="utf-8") as handle:
            handle.write(f"stage: {name}\ncause: {exc}\n")
        raise
    if os.path.exists(paths["failed"]):
        os.remove(paths["failed"])


def run_pipeline(config: PipelineConfig) -> None:
    """ingest -> embed -> eval -> explain -> render, stopping at the
    first failure.
    """
    for name, _ in _STAGES:
        run_stage(name, config)
    _log("pipeline: complete")
