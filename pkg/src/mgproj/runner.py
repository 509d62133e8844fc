"""Experiment orchestration: plain-vs-projector training pairs over seed
sweeps, artifact export (histories, grids, checkpoints, comparisons,
manifest), heuristics validation, and plot emission."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import dump_config
from .data import (
    SubspaceMixtureConfig,
    TokenTaskConfig,
    WigglyConfig,
    generate_subspace_mixture,
    generate_token_task,
    generate_wiggly,
    points_to_arrays,
    save_points_csv,
    wiggly_boundary,
    wiggly_x2_range,
)
from .errors import ConfigError
from .models import (
    TiedEncoder,
    ToyNet,
    decision_boundary_grid,
    load_grid_json,
    save_checkpoint,
    save_grid_json,
)
from .projectors import FeatureProjector, MultiScaleProjector, SequenceProjector
from .svgplot import bar_chart, heatmap, line_chart
from .training import (
    Dataset,
    RunHistory,
    TrainConfig,
    boundary_disagreement,
    compare_runs,
    error_rate_vs_gaussian,
    mixture_config_for_ratio,
    train,
    variance_shrink_check,
)

VARIANTS = ("plain", "proj")


def _wiggly_config(data: dict, seed: int) -> WigglyConfig:
    return WigglyConfig(
        n_train=data["n_train"],
        n_test=data["n_test"],
        a=data["a"],
        b=data["b"],
        c=data["c"],
        components=tuple(tuple(c) for c in data["components"]),
        x1_range=tuple(data["x1_range"]),
        noise_std=data["noise_std"],
        seed=seed,
    )


def _token_config(data: dict, seed: int) -> TokenTaskConfig:
    return TokenTaskConfig(
        vocab_size=data["vocab_size"],
        t=data["t"],
        pattern_pos=tuple(data["pattern_pos"]),
        pattern_neg=tuple(data["pattern_neg"]),
        noise_prob=data["noise_prob"],
        max_noise=data["max_noise"],
        positive_ratio=data["positive_ratio"],
        n_train=data["n_train"],
        n_test=data["n_test"],
        seed=seed,
    )


def _mixture_config(data: dict, seed: int) -> SubspaceMixtureConfig:
    c = data["c"]
    return SubspaceMixtureConfig(
        f=data["f"],
        c=c,
        basis_seed=data["basis_seed"],
        s_plus=(1.0,) + (0.0,) * (c - 1),
        s_minus=(-1.0,) + (0.0,) * (c - 1),
        sigma=data["sigma"],
        n=data["n"],
        seed=seed,
    )


def build_toynet(model_cfg: dict, seed: int, variant: str) -> ToyNet:
    projector = None
    if variant == "proj":
        projector = FeatureProjector(
            model_cfg["hidden_dim"],
            model_cfg["coarse_dim"],
            eps=model_cfg["eps"],
            tied=model_cfg["tied"],
            seed=seed,
        )
    return ToyNet(
        hidden_dim=model_cfg["hidden_dim"],
        n_layers=model_cfg["n_layers"],
        seed=seed,
        projector=projector,
        alpha_logit=model_cfg["alpha_logit"],
        n_proj_steps=model_cfg["n_proj_steps"],
    )


def build_encoder(model_cfg: dict, data_cfg: dict, train_cfg: dict, seed: int, variant: str) -> TiedEncoder:
    ms = None
    seq = None
    if variant == "proj":
        ms = MultiScaleProjector(
            model_cfg["dim"], tuple(model_cfg["scales"]), eps=model_cfg["eps"], seed=seed
        )
        if model_cfg["seq_coarse"] is not None:
            seq = SequenceProjector(data_cfg["t"], model_cfg["seq_coarse"], seed=seed)
    return TiedEncoder(
        vocab_size=data_cfg["vocab_size"],
        dim=model_cfg["dim"],
        mlp_hidden=model_cfg["mlp_hidden"],
        refinement_steps=model_cfg["refinement_steps"],
        seed=seed,
        ms=ms,
        seq=seq,
        learnable_eta=train_cfg["eta_mode"] == "learnable" and variant == "proj",
    )


def _train_config(train_cfg: dict, seed: int) -> TrainConfig:
    return TrainConfig(
        epochs=train_cfg["epochs"],
        batch_size=train_cfg["batch_size"],
        lr_start=train_cfg["lr_start"],
        lr_end=train_cfg["lr_end"],
        seed=seed,
        eta_mode=train_cfg["eta_mode"],
        eta_value=train_cfg["eta_value"],
        eta_decay=train_cfg["eta_decay"],
        shuffle=train_cfg["shuffle"],
    )


def run_seed(cfg: dict, seed: int, out_dir: Path) -> dict:
    """Train the plain and proj variants for one seed; returns file metadata."""
    task = cfg["task"]
    files: list[str] = []
    summary: dict = {"seed": seed}
    histories: dict[str, RunHistory] = {}

    if task == "wiggly":
        data_cfg = _wiggly_config(cfg["data"], seed)
        train_pts, test_pts = generate_wiggly(data_cfg)
        xtr, ytr = points_to_arrays(train_pts)
        xte, yte = points_to_arrays(test_pts)
        dtr, dte = Dataset(xtr, ytr), Dataset(xte, yte)
        x2r = wiggly_x2_range(data_cfg)
        for variant in VARIANTS:
            vdir = out_dir / str(seed) / variant
            vdir.mkdir(parents=True, exist_ok=True)
            model = build_toynet(cfg["model"], seed, variant)
            history = train(model, dtr, dte, _train_config(cfg["train"], seed))
            histories[variant] = history
            history.to_csv(vdir / "history.csv")
            history.to_json(vdir / "history.json")
            save_checkpoint(vdir / "checkpoint.json", model.describe(), model.named_parameters())
            grid = decision_boundary_grid(
                model, tuple(cfg["data"]["x1_range"]), x2r, cfg["grid"]["resolution"]
            )
            save_grid_json(vdir / "grid.json", grid)
            summary[f"{variant}_disagreement"] = boundary_disagreement(grid, data_cfg)
            files += [
                str((vdir / n).relative_to(out_dir))
                for n in ("history.csv", "history.json", "checkpoint.json", "grid.json")
            ]
    elif task == "token":
        data_cfg = _token_config(cfg["data"], seed)
        train_split, test_split = generate_token_task(data_cfg)
        dtr = Dataset(train_split.tokens, train_split.labels)
        dte = Dataset(test_split.tokens, test_split.labels)
        for variant in VARIANTS:
            vdir = out_dir / str(seed) / variant
            vdir.mkdir(parents=True, exist_ok=True)
            model = build_encoder(cfg["model"], cfg["data"], cfg["train"], seed, variant)
            history = train(model, dtr, dte, _train_config(cfg["train"], seed))
            histories[variant] = history
            history.to_csv(vdir / "history.csv")
            history.to_json(vdir / "history.json")
            save_checkpoint(vdir / "checkpoint.json", model.describe(), model.named_parameters())
            files += [
                str((vdir / n).relative_to(out_dir))
                for n in ("history.csv", "history.json", "checkpoint.json")
            ]
    else:
        raise ConfigError(f"run_seed does not handle task {task!r}")

    report = compare_runs(histories["plain"], histories["proj"])
    cmp_path = out_dir / str(seed) / "comparison.json"
    with open(cmp_path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=1)
        fh.write("\n")
    files.append(str(cmp_path.relative_to(out_dir)))
    summary["files"] = files
    summary["averaged_f1"] = {
        "plain": report.averaged["a"]["f1"],
        "proj": report.averaged["b"]["f1"],
    }
    return summary


def run_experiment(cfg: dict, out_root: str | Path | None = None, threads: int = 1) -> Path:
    """Run every seed of a wiggly or token experiment; writes the manifest and
    the resolved config echo.  Returns the output directory."""
    out_dir = Path(out_root if out_root is not None else cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out_dir / "config.json")

    seeds = cfg["seeds"]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            summaries = list(pool.map(lambda s: run_seed(cfg, s, out_dir), seeds))
    else:
        summaries = [run_seed(cfg, s, out_dir) for s in seeds]

    manifest = {
        "experiment": cfg["name"],
        "task": cfg["task"],
        "seeds": seeds,
        "files": sorted(f"{s['seed']}/{f}" if not f.startswith(str(s["seed"])) else f
                        for s in summaries for f in s["files"]),
        "summaries": summaries,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return out_dir


def export_datasets(cfg: dict, out_dir: Path) -> None:
    """Write the generated datasets for the first seed (reference copies)."""
    seed = cfg["seeds"][0]
    ddir = out_dir / "data"
    ddir.mkdir(parents=True, exist_ok=True)
    if cfg["task"] == "wiggly":
        train_pts, test_pts = generate_wiggly(_wiggly_config(cfg["data"], seed))
        save_points_csv(ddir / "train.csv", train_pts)
        save_points_csv(ddir / "test.csv", test_pts)
    elif cfg["task"] == "token":
        from .data import save_tokens_jsonl

        train_split, test_split = generate_token_task(_token_config(cfg["data"], seed))
        save_tokens_jsonl(ddir / "train.jsonl", train_split)
        save_tokens_jsonl(ddir / "test.jsonl", test_split)


# ---------------------------------------------------------------------------
# heuristics validation (variance shrinkage + normal-CDF error rates)


def validate_heuristics(cfg: dict, out_root: str | Path | None = None) -> Path:
    """Monte Carlo validation of the mean/variance/error-rate heuristics.

    Writes ``heuristics_report.json`` with one row per alpha (variance law)
    and one per ratio (error vs normal CDF), plus pass/fail flags:
    variance within +-5%, mean margin within 3 standard errors, error rate
    within +-0.01 absolute.  Small sample counts only warn.
    """
    out_dir = Path(out_root if out_root is not None else cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out_dir / "config.json")
    seed = cfg["seeds"][0]
    base = _mixture_config(cfg["data"], seed)
    rng = np.random.default_rng(cfg["validate"]["classifier_seed"])
    w = rng.standard_normal(base.f)
    insufficient = base.n < 10_000

    h, y, basis = generate_subspace_mixture(base)
    variance_rows = []
    for alpha in cfg["validate"]["alphas"]:
        res = variance_shrink_check(h, y, basis, w, alpha, base.sigma)
        rel = abs(res.measured_var - res.predicted_var) / max(res.predicted_var, 1e-30)
        margin_ok = all(
            abs(res.measured_margin[cls] - res.predicted_margin[cls]) <= 3.0 * res.margin_se[cls]
            for cls in (1, -1)
        )
        variance_rows.append(
            {
                "alpha": alpha,
                "predicted_var": res.predicted_var,
                "measured_var": res.measured_var,
                "var_rel_error": rel,
                "var_pass": bool(rel <= 0.05) or insufficient,
                "margin_pass": bool(margin_ok) or insufficient,
            }
        )

    error_rows = []
    for ratio in cfg["validate"]["ratios"]:
        alpha = 0.5
        mix_cfg = mixture_config_for_ratio(base, w, alpha, ratio)
        row = error_rate_vs_gaussian(mix_cfg, w, [alpha])[0]
        err = abs(row.empirical_error - row.predicted_error)
        error_rows.append(
            {
                "ratio": ratio,
                "alpha": alpha,
                "predicted_error": row.predicted_error,
                "empirical_error": row.empirical_error,
                "abs_error": err,
                "pass": bool(err <= 0.01) or insufficient,
            }
        )

    report = {
        "n": base.n,
        "insufficient_sample_warning": insufficient,
        "variance": variance_rows,
        "error_rate": error_rows,
        "all_pass": all(r["var_pass"] and r["margin_pass"] for r in variance_rows)
        and all(r["pass"] for r in error_rows),
    }
    with open(out_dir / "heuristics_report.json", "w") as fh:
        json.dump(report, fh, indent=1)
        fh.write("\n")
    return out_dir


# ---------------------------------------------------------------------------
# plot emission


def expected_plots(cfg: dict) -> list[str]:
    """The documented plot manifest for a run directory."""
    names = []
    for seed in cfg["seeds"]:
        names += [f"plots/metrics_{seed}.svg", f"plots/losses_{seed}.svg",
                  f"plots/gradnorm_{seed}.svg", f"plots/diff_{seed}.svg"]
        if cfg["task"] == "wiggly":
            names += [f"plots/boundary_{seed}_plain.svg", f"plots/boundary_{seed}_proj.svg"]
        if cfg["task"] == "token":
            names += [f"plots/alpha_weights_{seed}.svg"]
    return sorted(names)


def emit_plots(run_dir: str | Path) -> list[str]:
    """Render the SVG plot set for a completed run directory.

    Raises FileNotFoundError listing every absent input file.
    """
    run_dir = Path(run_dir)
    cfg_path = run_dir / "config.json"
    missing = []
    if not cfg_path.exists():
        raise FileNotFoundError(f"missing inputs: {cfg_path}")
    with open(cfg_path) as fh:
        cfg = json.load(fh)

    needed = []
    for seed in cfg["seeds"]:
        for variant in VARIANTS:
            needed.append(run_dir / str(seed) / variant / "history.json")
            if cfg["task"] == "wiggly":
                needed.append(run_dir / str(seed) / variant / "grid.json")
    missing = [str(p) for p in needed if not p.exists()]
    if missing:
        raise FileNotFoundError("missing inputs: " + ", ".join(missing))

    pdir = run_dir / "plots"
    pdir.mkdir(exist_ok=True)
    written = []
    for seed in cfg["seeds"]:
        hist = {
            variant: RunHistory.from_json(run_dir / str(seed) / variant / "history.json")
            for variant in VARIANTS
        }
        epochs = [r.epoch for r in hist["plain"].records]

        def series(metric):
            return {
                f"{variant} {metric}": (epochs, [getattr(r, metric) for r in hist[variant].records])
                for variant in VARIANTS
            }

        line_chart(
            pdir / f"metrics_{seed}.svg",
            {**series("accuracy"), **series("f1")},
            title=f"validation metrics, seed {seed}",
            y_label="metric",
        )
        line_chart(
            pdir / f"losses_{seed}.svg",
            {**series("train_loss"), **series("val_loss")},
            title=f"losses, seed {seed}",
            y_label="loss",
        )
        line_chart(
            pdir / f"gradnorm_{seed}.svg",
            series("grad_norm"),
            title=f"gradient norm, seed {seed}",
            y_label="|grad|",
        )
        diffs = [
            b.f1 - a.f1 for a, b in zip(hist["plain"].records, hist["proj"].records)
        ] + [
            b.accuracy - a.accuracy
            for a, b in zip(hist["plain"].records, hist["proj"].records)
        ]
        labels = [f"f1 e{e}" for e in epochs] + [f"acc e{e}" for e in epochs]
        bar_chart(
            pdir / f"diff_{seed}.svg",
            diffs,
            labels=labels if len(labels) <= 20 else None,
            title=f"proj minus plain, seed {seed}",
            y_label="difference",
        )
        written += [f"plots/metrics_{seed}.svg", f"plots/losses_{seed}.svg",
                    f"plots/gradnorm_{seed}.svg", f"plots/diff_{seed}.svg"]

        if cfg["task"] == "wiggly":
            data_cfg = _wiggly_config(cfg["data"], seed)
            for variant in VARIANTS:
                grid = load_grid_json(run_dir / str(seed) / variant / "grid.json")
                xs = list(np.linspace(grid.x1_range[0], grid.x1_range[1], 200))
                ys = [wiggly_boundary(data_cfg, x) for x in xs]
                heatmap(
                    pdir / f"boundary_{seed}_{variant}.svg",
                    grid.classes.tolist(),
                    grid.x1_range,
                    grid.x2_range,
                    title=f"decision boundary, seed {seed}, {variant}",
                    overlay=(xs, ys),
                )
                written.append(f"plots/boundary_{seed}_{variant}.svg")
        if cfg["task"] == "token":
            recs = hist["proj"].records
            n_ms = len(recs[0].ms_weights or ())
            traj = {
                f"alpha_{i}": (epochs, [r.ms_weights[i] for r in recs]) for i in range(n_ms)
            }
            line_chart(
                pdir / f"alpha_weights_{seed}.svg",
                traj,
                title=f"multi-scale weights, seed {seed}",
                y_label="weight",
                y_range=(0.0, 1.0),
            )
            written.append(f"plots/alpha_weights_{seed}.svg")

    # record the emitted plots alongside the data manifest
    manifest_path = run_dir / "manifest.json"
    if manifest_path.exists():
        with open(manifest_path) as fh:
            manifest = json.load(fh)
        manifest["plots"] = sorted(written)
        with open(manifest_path, "w") as fh:
            json.dump(manifest, fh, indent=1)
            fh.write("\n")
    return sorted(written)
