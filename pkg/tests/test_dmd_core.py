import numpy as np
import pytest

from modeforge import (
    build_snapshots,
    dmd,
    lowrank_sparse_split,
    reconstruct,
    rgb_to_lab,
    spectrum_rows,
    thin_svd,
)


def rotation_block(radius, angle):
    c, s = radius * np.cos(angle), radius * np.sin(angle)
    return np.array([[c, -s], [s, c]])


def stable_system(seed=0):
    """Real diagonalizable 8x8 with well separated stable spectrum."""
    gen = np.random.Generator(np.random.Philox(seed))
    D = np.zeros((8, 8))
    D[:2, :2] = rotation_block(0.95, 0.7)
    D[2:4, 2:4] = rotation_block(0.8, 1.9)
    np.fill_diagonal(D[4:, 4:], [0.9, 0.7, 0.6, 0.5])
    V, _ = np.linalg.qr(gen.normal(size=(8, 8)))
    return V @ D @ V.T


def trajectory(A, x0, m):
    cols = [x0]
    for _ in range(m - 1):
        cols.append(A @ cols[-1])
    return np.column_stack(cols)


def sort_eigs(lam):
    return lam[np.lexsort((np.angle(lam), -np.abs(lam)))]


def test_thin_svd_diagonal():
    svd = thin_svd(np.diag([3.0, 2.0, 1.0]), 3)
    assert np.allclose(svd.sigma, [3.0, 2.0, 1.0])
    assert svd.rank == 3
    assert not svd.rank_deficient


def test_thin_svd_rank_one():
    gen = np.random.Generator(np.random.Philox(1))
    u = gen.normal(size=12)
    v = gen.normal(size=5)
    svd = thin_svd(np.outer(u, v), 1)
    assert abs(svd.sigma[0] - np.linalg.norm(u) * np.linalg.norm(v)) < 1e-10


def test_thin_svd_gram_oracle():
    gen = np.random.Generator(np.random.Philox(2))
    X = gen.normal(size=(4096, 5))
    svd = thin_svd(X, 5)
    gram_eigs = np.linalg.eigvalsh(X.T @ X)[::-1]
    assert np.allclose(svd.sigma, np.sqrt(gram_eigs), atol=1e-8)


def test_thin_svd_orthonormal_factors():
    gen = np.random.Generator(np.random.Philox(3))
    for n, m, j in ((50, 5, 3), (4096, 5, 5), (7, 4, 2)):
        X = gen.normal(size=(n, m))
        svd = thin_svd(X, j)
        assert np.allclose(svd.Q.T @ svd.Q, np.eye(j), atol=1e-10)
        assert np.allclose(svd.B.T @ svd.B, np.eye(j), atol=1e-10)


def test_thin_svd_frobenius_residual():
    gen = np.random.Generator(np.random.Philox(4))
    X = gen.normal(size=(60, 5))
    full = np.linalg.svd(X, compute_uv=False)
    for j in (1, 2, 3, 4):
        svd = thin_svd(X, j)
        err = np.linalg.norm(X - svd.Q @ np.diag(svd.sigma) @ svd.B.T)
        rss = np.sqrt((full[j:] ** 2).sum())
        assert abs(err - rss) < 1e-8


def test_thin_svd_rank_deficient():
    gen = np.random.Generator(np.random.Philox(5))
    X = gen.normal(size=(30, 2)) @ gen.normal(size=(2, 5))
    svd = thin_svd(X, 4)
    assert svd.rank == 2
    assert svd.rank_deficient
    assert np.all(svd.sigma > 0)


def test_thin_svd_input_errors():
    with pytest.raises(ValueError):
        thin_svd(np.zeros((4, 3)), 1)
    with pytest.raises(ValueError):
        thin_svd(np.eye(3), 0)
    with pytest.raises(ValueError):
        thin_svd(np.eye(3), 4)


def test_dmd_constant_snapshots():
    gen = np.random.Generator(np.random.Philox(6))
    v = gen.normal(size=20)
    X = np.tile(v[:, None], (1, 6))
    result = dmd(X, 1)
    assert result.J == 1
    assert abs(result.eigenvalues[0] - 1.0) < 1e-10
    mode = result.modes[:, 0]
    align = mode @ v / (np.linalg.norm(mode) * np.linalg.norm(v))
    assert abs(abs(align) - 1.0) < 1e-10


def test_dmd_scalar_growth():
    X = (2.0 ** np.arange(6))[None, :]
    result = dmd(X, 1)
    assert abs(result.eigenvalues[0] - 2.0) < 1e-10


def test_dmd_linear_system_oracle():
    A = stable_system()
    gen = np.random.Generator(np.random.Philox(7))
    X = trajectory(A, gen.normal(size=8), 9)
    result = dmd(X, 8)
    oracle = sort_eigs(np.linalg.eigvals(A).astype(complex))
    assert np.allclose(result.eigenvalues, oracle, atol=1e-8)


def test_dmd_mode_unit_norm():
    A = stable_system(1)
    gen = np.random.Generator(np.random.Philox(8))
    X = trajectory(A, gen.normal(size=8), 9)
    result = dmd(X, 8)
    assert np.allclose(np.linalg.norm(result.modes, axis=0), 1.0, atol=1e-12)


def test_dmd_too_few_snapshots():
    with pytest.raises(ValueError):
        dmd(np.ones((4, 1)), 1)
    with pytest.raises(ValueError):
        dmd(np.ones((4, 3)), 3)


def test_dmd_truncates_tiny_singular_values():
    # two strong directions plus one at 1e-15 of sigma_1: must not be inverted
    gen = np.random.Generator(np.random.Philox(9))
    U, _ = np.linalg.qr(gen.normal(size=(20, 3)))
    V, _ = np.linalg.qr(gen.normal(size=(6, 3)))
    X = U @ np.diag([5.0, 2.0, 5e-15]) @ V.T
    result = dmd(X, 3)
    assert result.J == 2
    assert result.svd.rank_deficient
    assert np.all(np.abs(result.eigenvalues) < 1e6)


def test_reconstruct_constant():
    v = np.array([3.0, -1.0, 2.0])
    X = np.tile(v[:, None], (1, 5))
    result = dmd(X, 1)
    for t in (0, 1, 4, 9):
        assert np.allclose(reconstruct(result, t), v, atol=1e-10)


def test_reconstruct_matches_system():
    A = stable_system(2)
    gen = np.random.Generator(np.random.Philox(10))
    X = trajectory(A, gen.normal(size=8), 9)
    result = dmd(X, 8)
    for t in range(9):
        assert np.max(np.abs(reconstruct(result, t) - X[:, t])) < 1e-6


def test_reconstruct_truncation_residual():
    # growing tail keeps the discarded energy away from the fitted snapshot
    gen = np.random.Generator(np.random.Philox(11))
    V, _ = np.linalg.qr(gen.normal(size=(16, 3)))
    lams = np.array([0.95, -0.85, 1.25])
    amps = np.array([1.0, 0.4, 1e-4])
    X = np.real(V @ (amps[:, None] * lams[:, None] ** np.arange(9)[None, :]))
    result = dmd(X, 2)
    full = np.linalg.svd(X[:, :-1], compute_uv=False)
    rss = np.sqrt((full[2:] ** 2).sum())
    err = np.linalg.norm(reconstruct(result, 0) - X[:, 0])
    assert err <= rss + 1e-8


def test_reconstruct_negative_time():
    X = np.tile(np.ones(3)[:, None], (1, 4))
    result = dmd(X, 1)
    with pytest.raises(ValueError):
        reconstruct(result, -1)


def test_split_constant_snapshots():
    v = np.array([2.0, 1.0, -3.0, 4.0])
    X = np.tile(v[:, None], (1, 6))
    result = dmd(X, 1)
    pair = lowrank_sparse_split(result, X)
    assert pair.has_background
    assert np.allclose(pair.lowrank, X, atol=1e-8)
    assert np.allclose(pair.sparse, 0.0, atol=1e-8)


def test_split_pure_growth():
    X = (2.0 ** np.arange(6))[None, :] * np.ones((3, 1))
    result = dmd(X, 1)
    pair = lowrank_sparse_split(result, X, eps=0.01)
    assert not pair.has_background
    assert np.array_equal(pair.lowrank, np.zeros_like(X))
    assert np.array_equal(pair.sparse, X)


def test_split_background_plus_transient():
    gen = np.random.Generator(np.random.Philox(12))
    bg = gen.normal(size=50)
    tr = gen.normal(size=50)
    t = np.arange(8)
    X = bg[:, None] + tr[:, None] * 0.5 ** t[None, :]
    result = dmd(X, 2)
    pair = lowrank_sparse_split(result, X, eps=1e-2)
    truth = np.tile(bg[:, None], (1, 8))
    rel = np.linalg.norm(pair.lowrank - truth) / np.linalg.norm(truth)
    assert rel < 1e-3
    assert np.max(np.abs(pair.lowrank + pair.sparse - X)) < 1e-13


def test_split_eps_validation():
    X = np.tile(np.ones(3)[:, None], (1, 4))
    result = dmd(X, 1)
    with pytest.raises(ValueError):
        lowrank_sparse_split(result, X, eps=0.0)


def test_reduced_operator_diagonalized_by_modes():
    A = stable_system(3)
    gen = np.random.Generator(np.random.Philox(13))
    X = trajectory(A, gen.normal(size=8), 9)
    result = dmd(X, 6)
    svd = result.svd
    C = svd.Q.T @ X[:, 1:] @ svd.B / svd.sigma
    QPhi = svd.Q.T @ result.modes
    assert np.max(np.abs(C @ QPhi - QPhi * result.eigenvalues[None, :])) < 1e-8


def test_similarity_invariance():
    A = stable_system(4)
    gen = np.random.Generator(np.random.Philox(14))
    X = trajectory(A, gen.normal(size=8), 9)
    P, _ = np.linalg.qr(gen.normal(size=(8, 8)))
    base = dmd(X, 5)
    rotated = dmd(P @ X, 5)
    assert np.allclose(base.eigenvalues, rotated.eigenvalues, atol=1e-8)


def test_spectrum_cap_on_images():
    gen = np.random.Generator(np.random.Philox(15))
    img = gen.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
    snaps = build_snapshots(rgb_to_lab(img))
    result = dmd(snaps, 5)
    assert len(result.eigenvalues) <= 5


def test_spectrum_rows_table():
    A = stable_system(5)
    gen = np.random.Generator(np.random.Philox(16))
    X = trajectory(A, gen.normal(size=8), 9)
    rows = spectrum_rows(dmd(X, 8))
    mags = [r[3] for r in rows]
    assert mags == sorted(mags, reverse=True)
    assert [r[0] for r in rows] == list(range(8))
    for r in rows:
        lam = complex(r[1], r[2])
        assert abs(abs(lam) - r[3]) < 1e-12
        assert abs(abs(np.log(lam)) - r[4]) < 1e-10


def test_spectrum_rows_zero_eigenvalue():
    # one-step collapse to zero: the decayed mode reports infinite frequency
    X = np.column_stack([np.array([1.0, 2.0, -1.0, 0.5]), np.zeros(4), np.zeros(4)])
    rows = spectrum_rows(dmd(X, 1))
    assert rows[0][3] == 0.0
    assert rows[0][4] == np.inf
