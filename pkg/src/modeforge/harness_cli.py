"""Command-line harness: feature extraction, experiment sweeps, and exports.

Subcommands: extract (images to a feature file), experiment (the accuracy
sweep grid), spectrum (per-mode eigenvalue table of one image), recon
(low-rank and sparse reconstruction PNGs), embed (feature file to an
embedding-ready CSV for external t-SNE tools).

Every command is deterministic: rerunning with the same config and seed
produces byte-identical outputs. Timing is therefore opt-in (--timings).
"""

import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import click
import numpy as np
from PIL import Image

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .color_flow import DEFAULT_ORDER, build_snapshots, read_image, rgb_to_lab
from .dmd_core import dmd, lowrank_sparse_split, spectrum_rows
from .feature_builder import (
    FeatureConfig,
    extract_feature,
    minmax_normalize,
    read_features,
    write_features_csv,
    write_features_dmdf,
)
from .classifiers import LabeledSet, evaluate, train_rks, train_svm_linear, train_svm_rbf
from .dataset import Dataset, SplitSpec, load_dir, split, synth_preset, synth_textures

VALID_CLASSIFIERS = ("rks", "svm_linear", "svm_rbf")

ACCURACY_HEADER = "test_pct,n_eigs,class_group,classifier,kernel,accuracy_pct,seed,wall_time_s"
SPECTRUM_HEADER = "mode_index,re_lambda,im_lambda,abs_lambda,abs_omega,amplitude_abs"


@dataclass
class ExperimentConfig:
    """One sweep description: dataset, grid axes, and hyperparameters."""

    root: str = None
    preset: str = None
    class_group: list = None
    group_name: str = None
    n_per_class: int = 100
    test_fractions: list = field(default_factory=lambda: [0.6])
    n_eigs: list = field(default_factory=lambda: [5])
    classifiers: list = field(default_factory=lambda: ["rks"])
    seed: int = 0
    eps: float = 1e-2
    pool_shape: tuple = (16, 20)
    order: tuple = DEFAULT_ORDER
    rks_k: int = 250
    rks_lambda: float = 1e-3
    rks_sigma: float = None
    svm_C: float = 1.0
    svm_epochs: int = 100
    svm_gamma: float = None

    def validate(self):
        if (self.root is None) == (self.preset is None):
            raise ValueError("config must name exactly one of dataset.root or dataset.preset")
        if not self.test_fractions or not self.n_eigs or not self.classifiers:
            raise ValueError("test_fractions, n_eigs and classifiers must be non-empty")
        max_j = len(self.order) - 1
        for j in self.n_eigs:
            if not 1 <= j <= max_j:
                raise ValueError(f"n_eigs value {j} outside [1, {max_j}] for order {self.order}")
        for name in self.classifiers:
            if name not in VALID_CLASSIFIERS:
                raise ValueError(f"unknown classifier {name!r}, expected one of {VALID_CLASSIFIERS}")

    def feature_config(self, J):
        rows, cols = self.pool_shape
        return FeatureConfig(J=J, D=2 * rows * cols, pool_shape=tuple(self.pool_shape),
                             eps=self.eps, order=tuple(self.order))

    def group_label(self):
        if self.group_name:
            return self.group_name
        if self.preset:
            return self.preset
        return "all"


def load_config(path):
    """Parse an experiment config from TOML."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    ds = raw.get("dataset", {})
    ex = raw.get("experiment", {})
    feats = raw.get("features", {})
    rks = raw.get("rks", {})
    svm = raw.get("svm", {})
    cfg = ExperimentConfig(
        root=ds.get("root"),
        preset=ds.get("preset"),
        class_group=ds.get("class_group"),
        group_name=ds.get("group_name"),
        n_per_class=ds.get("n_per_class", 100),
        test_fractions=ex.get("test_fractions", [0.6]),
        n_eigs=ex.get("n_eigs", [5]),
        classifiers=ex.get("classifiers", ["rks"]),
        seed=ex.get("seed", 0),
        eps=feats.get("eps", 1e-2),
        pool_shape=tuple(feats.get("pool", (16, 20))),
        order=tuple(feats.get("order", DEFAULT_ORDER)),
        rks_k=rks.get("k", 250),
        rks_lambda=rks.get("reg_lambda", 1e-3),
        rks_sigma=rks.get("sigma") or None,
        svm_C=svm.get("C_reg", 1.0),
        svm_epochs=svm.get("epochs", 100),
        svm_gamma=svm.get("gamma") or None,
    )
    cfg.validate()
    return cfg


def load_dataset(cfg):
    if cfg.preset is not None:
        return synth_textures(cfg.n_per_class, synth_preset(cfg.preset), seed=cfg.seed)
    return load_dir(cfg.root, class_filter=cfg.class_group)


def extract_matrix(ds, fcfg):
    """Feature matrix (n, D) for every dataset item, in dataset order."""
    out = np.empty((len(ds), fcfg.D))
    for i in range(len(ds)):
        out[i] = extract_feature(ds.image(i), fcfg, image_id=ds.ids[i]).values
    return out


def _derive_seed(*parts):
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _split_rows(ds, fraction, seed):
    """Train and test row positions of one seeded stratified split."""
    pos = {img_id: i for i, img_id in enumerate(ds.ids)}
    train, test = split(ds, SplitSpec(test_fraction=fraction, seed=seed))
    return [pos[i] for i in train.ids], [pos[i] for i in test.ids]


def _train_and_score(cfg, name, Xtr, ytr, Xte, yte, clf_seed):
    train = LabeledSet(features=Xtr, labels=ytr)
    test = LabeledSet(features=Xte, labels=yte)
    if name == "rks":
        model = train_rks(train, k=cfg.rks_k, sigma=cfg.rks_sigma,
                          reg_lambda=cfg.rks_lambda, seed=clf_seed)
    elif name == "svm_linear":
        model = train_svm_linear(train, C_reg=cfg.svm_C, epochs=cfg.svm_epochs, seed=clf_seed)
    else:
        model = train_svm_rbf(train, C_reg=cfg.svm_C, gamma=cfg.svm_gamma, seed=clf_seed)
    acc, _ = evaluate(model, test)
    return acc


def run_experiment(cfg, repeats=1, timings=False, workers=None):
    """Run the full cross-product sweep and return accuracy CSV rows.

    One row per (test_fraction, n_eigs, classifier) cell, in config order.
    With repeats > 1, each cell is rerun with derived seeds and the row
    gains accuracy_mean_pct and accuracy_std_pct columns.

    Returns
    -------
    (header, rows) : CSV header string and list of row strings
    """
    cfg.validate()
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    ds = load_dataset(cfg)
    features = {j: extract_matrix(ds, cfg.feature_config(j)) for j in dict.fromkeys(cfg.n_eigs)}
    splits = {}
    for fi, fraction in enumerate(cfg.test_fractions):
        for r in range(repeats):
            splits[(fi, r)] = _split_rows(ds, fraction, _derive_seed(cfg.seed, 101, fi, r))
    group = cfg.group_label()
    cells = list(product(enumerate(cfg.test_fractions), cfg.n_eigs, cfg.classifiers))

    def run_cell(cell):
        (fi, fraction), j, clf = cell
        accs = []
        started = time.perf_counter()
        for r in range(repeats):
            train_rows, test_rows = splits[(fi, r)]
            X = features[j]
            clf_seed = _derive_seed(cfg.seed, 202, fi, j, VALID_CLASSIFIERS.index(clf), r)
            accs.append(_train_and_score(
                cfg, clf,
                X[train_rows], ds.labels[train_rows],
                X[test_rows], ds.labels[test_rows],
                clf_seed,
            ))
        elapsed = time.perf_counter() - started
        return accs, elapsed

    n_workers = workers or min(4, len(cells))
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        results = list(pool.map(run_cell, cells))

    header = ACCURACY_HEADER
    if repeats > 1:
        header += ",accuracy_mean_pct,accuracy_std_pct"
    rows = []
    for ((_, fraction), j, clf), (accs, elapsed) in zip(cells, results):
        classifier, kernel = (clf, "") if clf == "rks" else ("svm", clf.split("_")[1])
        wall = f"{elapsed:.3f}" if timings else ""
        row = (f"{_format_fraction(fraction)},{j},{group},{classifier},{kernel},"
               f"{100.0 * accs[0]:.2f},{cfg.seed},{wall}")
        if repeats > 1:
            pct = 100.0 * np.asarray(accs)
            row += f",{pct.mean():.2f},{pct.std():.2f}"
        rows.append(row)
    return header, rows


def _format_fraction(fraction):
    pct = 100.0 * fraction
    if abs(pct - round(pct)) < 1e-9:
        return str(int(round(pct)))
    return f"{pct:g}"


def _format_float(v):
    return repr(float(v))


def _constant_image(image):
    return bool((image == image.reshape(-1, image.shape[-1])[0]).all())


def _recon_planes(image, J, eps):
    lab = rgb_to_lab(image)
    if _constant_image(image):
        # Static content is pure background: L is the image, S vanishes.
        return lab.L.copy(), np.zeros_like(lab.L)
    snaps = build_snapshots(lab)
    result = dmd(snaps, J)
    pair = lowrank_sparse_split(result, snaps, eps)
    col = snaps.order.index("L")
    shape = (snaps.height, snaps.width)
    return pair.lowrank[:, col].reshape(shape), pair.sparse[:, col].reshape(shape)


def _write_gray_png(path, plane):
    gray = (minmax_normalize(plane) * 255.0).round().astype(np.uint8)
    Image.fromarray(gray, mode="L").save(path)


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


@click.group()
def main():
    """DMD image features, random kitchen sinks, and SVM baselines."""


@main.command()
@click.argument("input_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--config", type=click.Path(exists=True), default=None,
              help="Experiment TOML; its [features] and dataset.class_group apply.")
@click.option("--out-dir", default=".", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "dmdf"]), default="csv",
              show_default=True)
@click.option("--n-eigs", default=None, type=int, help="Truncation rank (default from config or 5).")
def extract(input_dir, config, out_dir, fmt, n_eigs):
    """Extract feature vectors for every image under INPUT_DIR."""
    cfg = load_config(config) if config else ExperimentConfig(root=input_dir)
    j = n_eigs if n_eigs is not None else cfg.n_eigs[0]
    fcfg = cfg.feature_config(j)
    ds = load_dir(input_dir, class_filter=cfg.class_group)
    ids, labels, rows = [], [], []
    failures = 0
    for i in range(len(ds)):
        try:
            image = ds.image(i)
            rows.append(extract_feature(image, fcfg, image_id=ds.ids[i]).values)
        except Exception as exc:
            click.echo(f"error: {ds.sources[i]}: {exc}", err=True)
            failures += 1
            continue
        ids.append(ds.ids[i])
        labels.append(int(ds.labels[i]))
    out = _out_dir(out_dir) / f"features.{fmt}"
    values = np.array(rows) if rows else np.zeros((0, fcfg.D))
    if fmt == "csv":
        write_features_csv(out, ids, labels, values)
    else:
        write_features_dmdf(out, ids, labels, values)
    click.echo(f"wrote {len(ids)} feature rows to {out}")
    if failures:
        raise SystemExit(1)


@main.command()
@click.option("--config", type=click.Path(exists=True), required=True)
@click.option("--seed", default=None, type=int, help="Override the config seed.")
@click.option("--out-dir", default=".", show_default=True)
@click.option("--repeats", default=1, show_default=True)
@click.option("--timings", is_flag=True,
              help="Fill wall_time_s (breaks byte-identical reruns).")
@click.option("--workers", default=None, type=int, help="Sweep work pool size.")
def experiment(config, seed, out_dir, repeats, timings, workers):
    """Run the accuracy sweep grid defined by --config."""
    cfg = load_config(config)
    if seed is not None:
        cfg.seed = seed
    header, rows = run_experiment(cfg, repeats=repeats, timings=timings, workers=workers)
    out = _out_dir(out_dir) / "accuracy.csv"
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        fh.writelines(row + "\n" for row in rows)
    click.echo(f"wrote {len(rows)} rows to {out}")


@main.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.option("--n-eigs", default=5, show_default=True)
@click.option("--out-dir", default=".", show_default=True)
def spectrum(image, n_eigs, out_dir):
    """Emit the per-mode eigenvalue table of IMAGE as CSV."""
    arr = read_image(image)
    snaps = build_snapshots(rgb_to_lab(arr))
    if _constant_image(arr):
        # No dynamics to fit: the one stationary mode carries the image.
        amp = float(np.linalg.norm(snaps.data[:, 0]))
        rows = [(0, 1.0, 0.0, 1.0, 0.0, amp)]
    else:
        try:
            rows = spectrum_rows(dmd(snaps, n_eigs))
        except ValueError as exc:
            raise click.ClickException(str(exc))
    out = _out_dir(out_dir) / "spectrum.csv"
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(SPECTRUM_HEADER + "\n")
        for row in rows:
            fh.write(",".join([str(row[0])] + [_format_float(v) for v in row[1:]]) + "\n")
    click.echo(f"wrote {len(rows)} modes to {out}")


@main.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.option("--n-eigs", default=5, show_default=True)
@click.option("--eps", default=1e-2, show_default=True)
@click.option("--out-dir", default=".", show_default=True)
def recon(image, n_eigs, eps, out_dir):
    """Write low-rank and sparse reconstruction PNGs for IMAGE."""
    arr = read_image(image)
    try:
        low, sparse = _recon_planes(arr, n_eigs, eps)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    out = _out_dir(out_dir)
    stem = Path(image).stem
    _write_gray_png(out / f"{stem}_lowrank.png", low)
    _write_gray_png(out / f"{stem}_sparse.png", sparse)
    click.echo(f"wrote {stem}_lowrank.png and {stem}_sparse.png to {out}")


@main.command()
@click.argument("feature_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", default=".", show_default=True)
def embed(feature_file, out_dir):
    """Re-emit a feature file as an embedding-ready CSV (label column first)."""
    try:
        ids, labels, values = read_features(feature_file)
    except Exception as exc:
        raise click.ClickException(f"malformed feature file {feature_file}: {exc}")
    if len(values) == 0:
        raise click.ClickException(f"feature file {feature_file} is empty")
    out = _out_dir(out_dir) / "embedding.csv"
    header = "label," + ",".join(f"f{j:03d}" for j in range(values.shape[1]))
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for label, row in zip(labels, values):
            formatted = ",".join(
                np.format_float_positional(v, unique=True, trim="-") for v in row
            )
            fh.write(f"{label},{formatted}\n")
    click.echo(f"wrote {len(values)} rows to {out}")


if __name__ == "__main__":
    main()
