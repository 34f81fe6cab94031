"""The three classifiers compared in the experiment grid.

RKS: random Fourier features followed by ridge regression on one-hot
targets. SVM-linear: one-vs-rest hinge loss minimized by Pegasos-style
stochastic subgradient steps. SVM-RBF: one-vs-rest dual coordinate ascent
(maximal-violating-pair SMO) on the Gaussian kernel matrix. All three are
one-vs-rest for comparability and deterministic given (data, hyperparameters,
seed).
"""

import struct
from dataclasses import dataclass

import numpy as np

from .rff_map import RffMap, median_bandwidth, sample_map, transform

DMDM_MAGIC = b"DMDM"
DMDM_VERSION = 1
_KIND_TAGS = {"rks": 0, "linear": 1, "rbf": 2}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}

# SMO stopping tolerance on the maximal violating pair gap.
SMO_TOL = 1e-3


@dataclass(frozen=True)
class LabeledSet:
    """Feature matrix plus dense integer class labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.features.shape}")
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels disagree on sample count")
        if len(self.features) < 1:
            raise ValueError("labeled set must contain at least one sample")

    @property
    def n_classes(self):
        return int(self.labels.max()) + 1

    @property
    def d(self):
        return self.features.shape[1]


@dataclass(frozen=True)
class RksModel:
    """RFF map plus ridge weights (2k x C)."""

    map: RffMap
    weights: np.ndarray
    reg_lambda: float


@dataclass(frozen=True)
class SvmModel:
    """One-vs-rest SVM, either linear or rbf.

    linear: weights is (C, d), bias is (C,). rbf: support is the training
    matrix, coef is (C, n) holding alpha_i * y_i per binary machine, bias is
    (C,), gamma the kernel width.
    """

    kind: str
    bias: np.ndarray
    weights: np.ndarray = None
    support: np.ndarray = None
    coef: np.ndarray = None
    gamma: float = None

    @property
    def n_classes(self):
        return len(self.bias)


def _check_training_set(train):
    present = np.unique(train.labels)
    expected = np.arange(train.n_classes)
    if not np.array_equal(present, expected):
        raise ValueError(
            f"training labels must cover every class in [0, {train.n_classes}), got {present}"
        )


def train_rks(train, k=250, sigma=None, reg_lambda=1e-3, seed=0):
    """Train the RKS classifier: ridge regression over z(x) features.

    sigma defaults to the median heuristic computed on a leading 256-sample
    subset of the training features. Solves (Z'Z + lambda I) W = Z'Y for
    one-hot Y through a Cholesky factorization of the symmetric system; when
    the feature dimension 2k exceeds n and lambda > 0 the identical solution
    is taken through the n x n dual system W = Z'(ZZ' + lambda I)^-1 Y.

    Returns
    -------
    RksModel
    """
    _check_training_set(train)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if reg_lambda < 0:
        raise ValueError(f"reg_lambda must be >= 0, got {reg_lambda}")
    if sigma is None:
        sigma = median_bandwidth(train.features)
    rmap = sample_map(seed, k, sigma, train.d)
    Z = transform(rmap, train.features)
    n = len(Z)
    C = train.n_classes
    Y = np.zeros((n, C))
    Y[np.arange(n), train.labels] = 1.0
    if reg_lambda > 0 and 2 * k > n:
        L = np.linalg.cholesky(Z @ Z.T + reg_lambda * np.eye(n))
        W = Z.T @ np.linalg.solve(L.T, np.linalg.solve(L, Y))
        return RksModel(map=rmap, weights=W, reg_lambda=float(reg_lambda))
    G = Z.T @ Z + reg_lambda * np.eye(2 * k)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise ValueError(
            "ridge system is singular (rank-deficient Z with reg_lambda = 0); use reg_lambda > 0"
        ) from None
    W = np.linalg.solve(L.T, np.linalg.solve(L, Z.T @ Y))
    return RksModel(map=rmap, weights=W, reg_lambda=float(reg_lambda))


def predict_rks(model, x):
    """Predict class indices and per-class scores for one vector or a batch.

    Ties in the score argmax resolve to the lowest class index.
    """
    x = np.asarray(x, dtype=np.float64)
    scores = transform(model.map, x) @ model.weights
    return np.argmax(scores, axis=-1), scores


def _pegasos(X, y, lam, epochs, orders):
    """Pegasos on one binary problem; X carries the constant bias feature."""
    w = np.zeros(X.shape[1])
    t = 0
    for epoch_order in orders:
        for i in epoch_order:
            t += 1
            violated = y[i] * (X[i] @ w) < 1.0
            w *= 1.0 - 1.0 / t
            if violated:
                w += (1.0 / (lam * t)) * y[i] * X[i]
    return w


def train_svm_linear(train, C_reg=1.0, epochs=100, seed=0):
    """Train the one-vs-rest linear SVM by Pegasos-style subgradient steps.

    The schedule is eta_t = 1/(lambda t) with lambda = 1/(C_reg * n). The
    seeded shuffle orders are drawn once and shared by all binary machines,
    which keeps training equivariant under class relabeling. The bias rides
    along as a constant augmented feature.

    Returns
    -------
    SvmModel with kind "linear"
    """
    _check_training_set(train)
    if C_reg <= 0:
        raise ValueError(f"C_reg must be positive, got {C_reg}")
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    X = np.asarray(train.features, dtype=np.float64)
    n = len(X)
    Xa = np.hstack([X, np.ones((n, 1))])
    lam = 1.0 / (C_reg * n)
    gen = np.random.Generator(np.random.Philox(seed))
    orders = [gen.permutation(n) for _ in range(epochs)]
    C = train.n_classes
    W = np.zeros((C, Xa.shape[1]))
    for c in range(C):
        y = np.where(train.labels == c, 1.0, -1.0)
        W[c] = _pegasos(Xa, y, lam, epochs, orders)
    return SvmModel(kind="linear", weights=W[:, :-1], bias=W[:, -1].copy())


def linear_objective(model, train, C_reg=1.0):
    """Primal objective 0.5 lambda ||w||^2 + mean hinge of one binary machine.

    Evaluates the one-vs-rest machine of class 0 (the bias feature counts
    toward the norm, matching the training objective).
    """
    X = np.asarray(train.features, dtype=np.float64)
    n = len(X)
    lam = 1.0 / (C_reg * n)
    w = np.concatenate([model.weights[0], model.bias[:1]])
    Xa = np.hstack([X, np.ones((n, 1))])
    y = np.where(train.labels == 0, 1.0, -1.0)
    hinge = np.maximum(0.0, 1.0 - y * (Xa @ w))
    return 0.5 * lam * (w @ w) + hinge.mean()


def rbf_kernel(X, Y, gamma):
    """Gaussian kernel matrix exp(-gamma ||x - y||^2) between row sets."""
    sq_x = (X * X).sum(axis=1)
    sq_y = (Y * Y).sum(axis=1)
    # non-finite inputs propagate to NaN here; callers check and report
    with np.errstate(invalid="ignore"):
        d2 = sq_x[:, None] + sq_y[None, :] - 2.0 * (X @ Y.T)
        return np.exp(-gamma * np.maximum(d2, 0.0))


def _smo(K, y, C_reg, tol=SMO_TOL, max_iter=None):
    """Dual coordinate ascent with maximal-violating-pair selection.

    Maximizes the SVM dual for one binary problem over 0 <= alpha <= C under
    y'alpha = 0, stopping when the violating-pair gap m - M drops below tol.
    The bias is the midpoint of the gap at termination, which bounds the KKT
    residual of every point by tol/2.
    """
    n = len(y)
    if max_iter is None:
        max_iter = max(20000, 200 * n)
    alpha = np.zeros(n)
    G = -np.ones(n)
    for _ in range(max_iter):
        yG = -y * G
        up = ((y > 0) & (alpha < C_reg - 1e-12)) | ((y < 0) & (alpha > 1e-12))
        dn = ((y < 0) & (alpha < C_reg - 1e-12)) | ((y > 0) & (alpha > 1e-12))
        if not up.any() or not dn.any():
            break
        iu = np.flatnonzero(up)
        idn = np.flatnonzero(dn)
        i = iu[np.argmax(yG[iu])]
        j = idn[np.argmin(yG[idn])]
        m = yG[i]
        M = yG[j]
        if m - M <= tol:
            break
        quad = max(K[i, i] + K[j, j] - 2.0 * K[i, j], 1e-12)
        step = (m - M) / quad
        # Clip the step against the box on both coordinates.
        step = min(step, C_reg - alpha[i] if y[i] > 0 else alpha[i])
        step = min(step, alpha[j] if y[j] > 0 else C_reg - alpha[j])
        alpha[i] += step * y[i]
        alpha[j] -= step * y[j]
        G += y * (K[:, i] - K[:, j]) * step
    yG = -y * G
    up = ((y > 0) & (alpha < C_reg - 1e-12)) | ((y < 0) & (alpha > 1e-12))
    dn = ((y < 0) & (alpha < C_reg - 1e-12)) | ((y > 0) & (alpha > 1e-12))
    hi = yG[up].max() if up.any() else 0.0
    lo = yG[dn].min() if dn.any() else 0.0
    bias = (hi + lo) / 2.0
    return alpha, bias


def train_svm_rbf(train, C_reg=1.0, gamma=None, seed=0):
    """Train the one-vs-rest RBF SVM by SMO on the kernel matrix.

    gamma defaults to 1/(d * var(features)). The solver is deterministic, so
    seed only keeps the signature uniform with the other trainers.

    Returns
    -------
    SvmModel with kind "rbf"
    """
    _check_training_set(train)
    del seed
    if C_reg <= 0:
        raise ValueError(f"C_reg must be positive, got {C_reg}")
    if gamma is None:
        var = float(train.features.var())
        gamma = 1.0 / (train.d * var) if var > 0 else 1.0
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    X = np.asarray(train.features, dtype=np.float64)
    K = rbf_kernel(X, X, gamma)
    if not np.all(np.isfinite(K)):
        raise ValueError("kernel matrix is non-finite; check feature scaling and gamma")
    C = train.n_classes
    coef = np.zeros((C, len(X)))
    bias = np.zeros(C)
    for c in range(C):
        y = np.where(train.labels == c, 1.0, -1.0)
        alpha, b = _smo(K, y, C_reg)
        coef[c] = alpha * y
        bias[c] = b
    return SvmModel(kind="rbf", support=X, coef=coef, bias=bias, gamma=float(gamma))


def decision_scores(model, x):
    """Per-class decision values of an SvmModel for a vector or batch."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if model.kind == "linear":
        return x @ model.weights.T + model.bias
    K = rbf_kernel(x, model.support, model.gamma)
    return K @ model.coef.T + model.bias


def predict(model, x):
    """Predict class indices for a vector or batch with any trained model."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if isinstance(model, RksModel):
        pred, _ = predict_rks(model, x)
    else:
        scores = decision_scores(model, x)
        pred = np.argmax(scores, axis=-1)
        if single:
            pred = pred[0]
    return pred


def evaluate(model, test):
    """Accuracy in [0, 1] plus the confusion matrix on a labeled set.

    Confusion rows are true classes, columns predictions; row sums equal the
    per-class test counts.
    """
    if len(test.features) == 0:
        raise ValueError("cannot evaluate on an empty test set")
    pred = np.atleast_1d(predict(model, test.features))
    correct = pred == test.labels
    C = max(test.n_classes, int(pred.max()) + 1)
    confusion = np.zeros((C, C), dtype=np.int64)
    np.add.at(confusion, (test.labels, pred), 1)
    return float(correct.mean()), confusion


def save_model(path, model):
    """Persist a model in the DMDM binary container.

    Weight payloads are stored as little-endian float32; the RKS map is
    stored as its (seed, k, sigma, d) tuple and regenerated on load.
    """
    with open(path, "wb") as fh:
        fh.write(DMDM_MAGIC)
        if isinstance(model, RksModel):
            fh.write(struct.pack("<HB", DMDM_VERSION, _KIND_TAGS["rks"]))
            m = model.map
            C = model.weights.shape[1]
            fh.write(struct.pack("<qIdId", m.seed, m.k, m.sigma, m.d, model.reg_lambda))
            fh.write(struct.pack("<I", C))
            fh.write(model.weights.astype("<f4").tobytes())
        elif model.kind == "linear":
            fh.write(struct.pack("<HB", DMDM_VERSION, _KIND_TAGS["linear"]))
            C, d = model.weights.shape
            fh.write(struct.pack("<II", C, d))
            fh.write(model.weights.astype("<f4").tobytes())
            fh.write(model.bias.astype("<f4").tobytes())
        elif model.kind == "rbf":
            fh.write(struct.pack("<HB", DMDM_VERSION, _KIND_TAGS["rbf"]))
            C, n = model.coef.shape
            d = model.support.shape[1]
            fh.write(struct.pack("<IIId", C, n, d, model.gamma))
            fh.write(model.support.astype("<f4").tobytes())
            fh.write(model.coef.astype("<f4").tobytes())
            fh.write(model.bias.astype("<f4").tobytes())
        else:
            raise ValueError(f"unknown model kind {model.kind!r}")


def load_model(path):
    """Load a model saved by save_model."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 7 or blob[:4] != DMDM_MAGIC:
        raise ValueError(f"{path} is not a DMDM model file")
    version, tag = struct.unpack_from("<HB", blob, 4)
    if version != DMDM_VERSION:
        raise ValueError(f"unsupported DMDM version {version}")
    kind = _TAG_KINDS.get(tag)
    off = 7
    if kind == "rks":
        seed, k, sigma, d, reg_lambda = struct.unpack_from("<qIdId", blob, off)
        off += struct.calcsize("<qIdId")
        (C,) = struct.unpack_from("<I", blob, off)
        off += 4
        W = np.frombuffer(blob, dtype="<f4", count=2 * k * C, offset=off)
        rmap = sample_map(seed, k, sigma, d)
        return RksModel(map=rmap, weights=W.reshape(2 * k, C).astype(np.float64),
                        reg_lambda=reg_lambda)
    if kind == "linear":
        C, d = struct.unpack_from("<II", blob, off)
        off += 8
        W = np.frombuffer(blob, dtype="<f4", count=C * d, offset=off)
        off += 4 * C * d
        bias = np.frombuffer(blob, dtype="<f4", count=C, offset=off)
        return SvmModel(kind="linear", weights=W.reshape(C, d).astype(np.float64),
                        bias=bias.astype(np.float64))
    if kind == "rbf":
        C, n, d, gamma = struct.unpack_from("<IIId", blob, off)
        off += struct.calcsize("<IIId")
        sup = np.frombuffer(blob, dtype="<f4", count=n * d, offset=off)
        off += 4 * n * d
        coef = np.frombuffer(blob, dtype="<f4", count=C * n, offset=off)
        off += 4 * C * n
        bias = np.frombuffer(blob, dtype="<f4", count=C, offset=off)
        return SvmModel(kind="rbf", support=sup.reshape(n, d).astype(np.float64),
                        coef=coef.reshape(C, n).astype(np.float64),
                        bias=bias.astype(np.float64), gamma=gamma)
    raise ValueError(f"unknown model kind tag {tag}")
