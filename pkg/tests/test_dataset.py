import numpy as np
import pytest
from PIL import Image

from modeforge import (
    Dataset,
    LabeledSet,
    SplitSpec,
    TextureSpec,
    evaluate,
    extract_feature,
    FeatureConfig,
    load_dir,
    split,
    synth_image,
    synth_preset,
    synth_textures,
    train_rks,
)


def write_tree(root, classes, per_class=10, size=8):
    gen = np.random.Generator(np.random.Philox(99))
    for name in classes:
        d = root / name
        d.mkdir(parents=True)
        for i in range(per_class):
            arr = gen.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
            Image.fromarray(arr).save(d / f"{i:03d}.png")


def test_load_dir_basic(tmp_path):
    write_tree(tmp_path, ["cat", "dog", "eel"])
    ds = load_dir(tmp_path)
    assert ds.n_classes == 3
    assert len(ds) == 30
    assert ds.class_names == ["cat", "dog", "eel"]
    assert list(ds.class_counts()) == [10, 10, 10]
    img = ds.image(0)
    assert img.shape == (8, 8, 3)


def test_load_dir_class_filter(tmp_path):
    write_tree(tmp_path, ["cat", "dog", "eel"])
    ds = load_dir(tmp_path, class_filter=["eel", "cat"])
    assert ds.n_classes == 2
    assert len(ds) == 20
    assert sorted(np.unique(ds.labels)) == [0, 1]


def test_load_dir_ordering(tmp_path):
    write_tree(tmp_path, ["b", "a"], per_class=2)
    ds = load_dir(tmp_path)
    assert ds.class_names == ["a", "b"]
    assert ds.ids[0] < ds.ids[1]


def test_load_dir_empty_class(tmp_path):
    write_tree(tmp_path, ["cat"])
    (tmp_path / "empty").mkdir()
    with pytest.raises(ValueError, match="empty"):
        load_dir(tmp_path)


def test_load_dir_missing_filter_name(tmp_path):
    write_tree(tmp_path, ["cat"])
    with pytest.raises(ValueError, match="zebra"):
        load_dir(tmp_path, class_filter=["zebra"])


def test_unreadable_image_error(tmp_path):
    write_tree(tmp_path, ["cat"], per_class=1)
    bad = tmp_path / "cat" / "broken.png"
    bad.write_text("not an image")
    ds = load_dir(tmp_path)
    idx = ds.ids.index("cat/broken.png")
    with pytest.raises(ValueError, match="broken.png"):
        ds.image(idx)


def test_split_stratified_counts(tmp_path):
    ds = synth_textures(100, synth_preset("distinctive")[:2], seed=0)
    train, test = split(ds, SplitSpec(test_fraction=0.6, seed=1))
    assert list(train.class_counts()) == [40, 40]
    assert list(test.class_counts()) == [60, 60]


def test_split_half_of_ten():
    ds = synth_textures(10, [TextureSpec(hue=0.1, frequency=4.0, noise=0.1)], seed=0)
    train, test = split(ds, SplitSpec(test_fraction=0.5, seed=0))
    assert len(train) == 5
    assert len(test) == 5


def test_split_deterministic():
    ds = synth_textures(12, synth_preset("distinctive")[:2], seed=3)
    a1, b1 = split(ds, SplitSpec(test_fraction=0.5, seed=7))
    a2, b2 = split(ds, SplitSpec(test_fraction=0.5, seed=7))
    assert a1.ids == a2.ids and b1.ids == b2.ids
    a3, b3 = split(ds, SplitSpec(test_fraction=0.5, seed=8))
    assert a3.ids != a1.ids
    assert sorted(a3.ids + b3.ids) == sorted(a1.ids + b1.ids)


def test_split_is_partition():
    ds = synth_textures(9, synth_preset("overlapped")[:3], seed=4)
    train, test = split(ds, SplitSpec(test_fraction=0.4, seed=2))
    assert not set(train.ids) & set(test.ids)
    assert sorted(train.ids + test.ids) == sorted(ds.ids)
    assert len(train) + len(test) == len(ds)


def test_split_errors():
    ds = synth_textures(1, synth_preset("distinctive")[:2], seed=0)
    with pytest.raises(ValueError):
        split(ds, SplitSpec(test_fraction=0.5, seed=0))
    ds2 = synth_textures(2, synth_preset("distinctive")[:2], seed=0)
    with pytest.raises(ValueError):
        split(ds2, SplitSpec(test_fraction=0.9, seed=0))
    with pytest.raises(ValueError):
        SplitSpec(test_fraction=1.0, seed=0)


def test_synth_deterministic():
    specs = synth_preset("distinctive")
    a = synth_textures(3, specs, seed=11)
    b = synth_textures(3, specs, seed=11)
    for i in range(len(a)):
        assert np.array_equal(a.image(i), b.image(i))
    c = synth_textures(3, specs, seed=12)
    assert any(not np.array_equal(a.image(i), c.image(i)) for i in range(len(a)))


def test_synth_shapes_and_labels():
    ds = synth_textures(4, synth_preset("overlapped"), seed=5)
    assert len(ds) == 20
    assert ds.n_classes == 5
    assert ds.origin == "synthetic"
    img = ds.image(0)
    assert img.shape == (64, 64, 3)
    assert img.dtype == np.uint8


def test_identical_specs_yield_chance_accuracy():
    # two indistinguishable noise-free classes: no better than guessing
    spec = TextureSpec(hue=0.3, frequency=5.0, noise=0.0)
    ds = synth_textures(20, [spec, spec], seed=6)
    cfg = FeatureConfig(J=3)
    X = np.stack([extract_feature(ds.image(i), cfg).values for i in range(len(ds))])
    train, test = split(ds, SplitSpec(test_fraction=0.5, seed=0))
    pos = {img_id: i for i, img_id in enumerate(ds.ids)}
    tr = [pos[i] for i in train.ids]
    te = [pos[i] for i in test.ids]
    model = train_rks(
        LabeledSet(features=X[tr], labels=train.labels), k=64, seed=0
    )
    acc, _ = evaluate(model, LabeledSet(features=X[te], labels=test.labels))
    assert abs(acc - 0.5) <= 0.1


def test_synth_presets():
    distinct = synth_preset("distinctive")
    overlap = synth_preset("overlapped")
    assert len(distinct) == 5 and len(overlap) == 5
    d_hues = [s.hue for s in distinct]
    o_hues = [s.hue for s in overlap]
    assert np.ptp(d_hues) > np.ptp(o_hues)
    assert all(s.noise < 0.1 for s in distinct)
    assert all(s.noise >= 0.3 for s in overlap)
    with pytest.raises(ValueError):
        synth_preset("nonsense")


def test_synth_image_direct():
    gen = np.random.Generator(np.random.Philox(0))
    img = synth_image(gen, TextureSpec(hue=0.5, frequency=8.0, noise=0.1), 0.3)
    assert img.shape == (64, 64, 3)
    assert img.dtype == np.uint8


def test_subset_reindexes():
    ds = synth_textures(3, synth_preset("distinctive"), seed=7)
    keep = [i for i in range(len(ds)) if ds.labels[i] != 4]
    sub = ds.subset(keep)
    assert len(sub) == 12
    assert isinstance(sub, Dataset)
