"""Experiment configuration, repeated train/test runs, sweeps and results CSV."""
import csv
import dataclasses
import json
import logging
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .classify import DEFAULT_LAMBDA_GRID, accuracy, nn1_classify, select_lambda
from .discriminant import tucker_project
from .data import SyntheticSpec, generate_synthetic, per_class_split
from .estimators import CMDA, DGTDA, LDA, TTDA, MultiBranchTTDA, ThreeWayTTDA, TwoWayTTDA
from .io import load_dataset, load_model, save_model
from .multibranch import BranchModel, BranchSpec
from .tt import subspace_matrix

__all__ = [
    "METHODS",
    "CSV_HEADER",
    "ExperimentConfig",
    "load_config",
    "build_estimator",
    "load_data",
    "run",
    "sweep",
    "write_results",
    "export_model",
    "model_features",
    "model_manifest",
]

log = logging.getLogger(__name__)

METHODS = ("lda", "cmda", "dgtda", "ttda", "2wttda", "3wttda")
CSV_HEADER = ("method", "tau", "ranks", "lambda", "storage_norm", "accuracy_mean",
              "accuracy_std", "train_seconds", "seed")


def _ints(text):
    return tuple(int(v) for v in str(text).replace("x", ",").split(",") if v.strip())


def _floats(text):
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _bool(text):
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt(conv):
    def parse(text):
        if text is None or str(text).strip().lower() in ("", "none"):
            return None
        return conv(text)
    return parse


def _lam(text):
    if str(text).strip().lower() == "auto":
        return "auto"
    return float(text)


@dataclasses.dataclass
class ExperimentConfig:
    """Everything a run needs. Defaults follow the evaluation protocol."""

    source: str = "synthetic"
    method: str = "ttda"
    reshape: tuple = None
    tau: float = None
    # "2,2,2,3" for one chain or Tucker; "2,3;2,3" for one rank list per branch
    ranks: str = None
    boundaries: tuple = None
    lam: object = 1.0
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    lambda_s: int = 1
    lambda_trials: int = 5
    # stop when the normalized subspace change drops below tol or at max_iter
    tt_tol: float = 0.1
    tt_max_iter: int = 200
    cmda_tol: float = 0.1
    cmda_max_iter: int = 20
    loop_iter: int = 3
    max_dense_dim: int = 4096
    repeats: int = 10
    train_fraction: float = 0.5
    train_count: int = None
    seed: int = 0
    workers: int = 1
    record_time: bool = True
    output: str = None
    model_dir: str = None
    trace: str = None
    synth_shape: tuple = (4, 4, 4, 4)
    synth_classes: int = 3
    synth_per_class: int = 20
    synth_ranks: tuple = (1, 2, 2, 2, 1)
    synth_separation: float = 1.0
    synth_sigma: float = 0.05
    synth_seed: int = 7

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.lam != "auto":
            self.lam = float(self.lam)
            if self.lam < 0:
                raise ValueError("lambda must be nonnegative")
        if self.tau is not None and not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        if self.train_count is None and not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")

    def synthetic_spec(self):
        return SyntheticSpec(shape=tuple(self.synth_shape), n_classes=self.synth_classes,
                             n_per_class=self.synth_per_class, ranks=tuple(self.synth_ranks),
                             separation=self.synth_separation, sigma=self.synth_sigma,
                             seed=self.synth_seed)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


CONFIG_PARSERS = {
    "source": str,
    "method": lambda v: str(v).strip().lower(),
    "reshape": _opt(_ints),
    "tau": _opt(float),
    "ranks": _opt(str),
    "boundaries": _opt(_ints),
    "lam": _lam,
    "lambda_grid": _floats,
    "lambda_s": int,
    "lambda_trials": int,
    "tt_tol": float,
    "tt_max_iter": int,
    "cmda_tol": float,
    "cmda_max_iter": int,
    "loop_iter": int,
    "max_dense_dim": int,
    "repeats": int,
    "train_fraction": float,
    "train_count": _opt(int),
    "seed": int,
    "workers": int,
    "record_time": _bool,
    "output": _opt(str),
    "model_dir": _opt(str),
    "trace": _opt(str),
    "synth_shape": _ints,
    "synth_classes": int,
    "synth_per_class": int,
    "synth_ranks": _ints,
    "synth_separation": float,
    "synth_sigma": float,
    "synth_seed": int,
}
_ALIASES = {"lambda": "lam"}


def parse_settings(pairs):
    """Typed settings from ``key=value`` strings or a mapping of strings."""
    items = pairs.items() if isinstance(pairs, dict) else (_split(p) for p in pairs)
    out = {}
    for key, value in items:
        key = _ALIASES.get(key.strip().replace("-", "_"), key.strip().replace("-", "_"))
        if key not in CONFIG_PARSERS:
            raise ValueError(f"unknown config key {key!r}")
        out[key] = CONFIG_PARSERS[key](value) if isinstance(value, str) else value
    return out


def _split(line):
    if "=" not in line:
        raise ValueError(f"expected key=value, got {line!r}")
    key, value = line.split("=", 1)
    return key.strip(), value.strip()


def load_config(path=None, overrides=None):
    """Read a flat ``key=value`` file (``#`` comments) and apply overrides."""
    settings = {}
    if path is not None:
        lines = []
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if line:
                lines.append(line)
        settings.update(parse_settings(lines))
    if overrides:
        settings.update(parse_settings(overrides))
    return ExperimentConfig(**settings)


def _rank_lists(text):
    return [list(_ints(part)) for part in str(text).split(";")]


def _tucker_tau_ranks(X, tau):
    ranks = []
    for n in range(1, X.ndim):
        s = np.linalg.svd(np.moveaxis(X, n, 0).reshape(X.shape[n], -1), compute_uv=False)
        ranks.append(max(1, int(np.sum(s >= tau * s[0]))) if s[0] > 0 else 1)
    return tuple(ranks)


def _lda_tau_rank(X, tau):
    s = np.linalg.svd(X.reshape((X.shape[0], -1), order="F"), compute_uv=False)
    return max(1, int(np.sum(s >= tau * s[0]))) if s[0] > 0 else 1


def build_estimator(config, X=None):
    """Unfitted estimator for ``config``; ``X`` resolves tau for the baselines."""
    c = config
    if c.tau is None and c.ranks is None:
        raise ValueError(f"method {c.method} needs tau or ranks")
    lam = 1.0 if c.lam == "auto" else c.lam
    tt = dict(tau=c.tau, lam=lam, max_iter=c.tt_max_iter, tol=c.tt_tol,
              max_dense_dim=c.max_dense_dim)
    if c.method == "ttda":
        ranks = None if c.ranks is None else _rank_lists(c.ranks)[0]
        return TTDA(ranks=ranks, **tt)
    if c.method in ("2wttda", "3wttda"):
        ranks = None if c.ranks is None else _rank_lists(c.ranks)
        cls = TwoWayTTDA if c.method == "2wttda" else ThreeWayTTDA
        return cls(boundaries=c.boundaries, ranks=ranks, loop_iter=c.loop_iter, **tt)
    if c.ranks is not None:
        ranks = _rank_lists(c.ranks)[0]
    elif X is None:
        raise ValueError("tau-based baselines need the training data to fix ranks")
    elif c.method == "lda":
        ranks = [_lda_tau_rank(X, c.tau)]
    else:
        ranks = list(_tucker_tau_ranks(X, c.tau))
    if c.method == "lda":
        return LDA(n_components=ranks[0], lam=lam)
    if c.method == "cmda":
        return CMDA(ranks=ranks, lam=lam, max_iter=c.cmda_max_iter, tol=c.cmda_tol)
    return DGTDA(ranks=ranks)


def load_data(config):
    if config.source == "synthetic":
        data = generate_synthetic(config.synthetic_spec())
        return data.reshape(config.reshape) if config.reshape is not None else data
    return load_dataset(config.source, reshape=config.reshape)


def _ranks_text(est):
    if isinstance(est, MultiBranchTTDA):
        return "|".join("-".join(map(str, ch.ranks)) for ch in est.chains_)
    if isinstance(est, TTDA):
        return "-".join(map(str, est.ranks_))
    if isinstance(est, LDA):
        return str(est.components_.shape[1])
    return "-".join(map(str, est.core_shape_))


def _one_repeat(config, data, ss):
    split_seed, lam_seed = ss.spawn(2)
    tr, te = per_class_split(data.y, n_train=config.train_count,
                             fraction=None if config.train_count else config.train_fraction,
                             rng=np.random.default_rng(split_seed))
    Xtr, ytr, Xte, yte = data.X[tr], data.y[tr], data.X[te], data.y[te]
    est = build_estimator(config, Xtr)
    lam = config.lam
    if lam == "auto" and "lam" in est.get_params():
        # validation draws come from the held-out part of the split
        lam, _ = select_lambda(est, Xtr, ytr, Xte, yte, grid=config.lambda_grid,
                               s=config.lambda_s, trials=config.lambda_trials,
                               random_state=np.random.default_rng(lam_seed))
        est.set_params(lam=lam)
    elif lam == "auto":
        lam = float("nan")
    start = time.perf_counter()
    est.fit(Xtr, ytr)
    seconds = time.perf_counter() - start
    train_f = est.transform(Xtr)
    acc = accuracy(nn1_classify(train_f, ytr, est.transform(Xte)), yte)
    return {
        "estimator": est,
        "lambda": float(lam),
        "accuracy": acc,
        "seconds": seconds,
        "storage": est.normalized_storage(len(ytr)),
        "ranks": _ranks_text(est),
        "train_features": train_f,
        "train_labels": ytr,
    }


def _fmt(v):
    return "" if v is None else repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def run(config, data=None):
    """Repeat split/select/train/evaluate and summarize.

    Timing covers the subspace fit only. Each repeat draws from its own
    child of the master seed, so the record depends only on ``config``.
    Returns the result record; writes the CSV, model directory and trace
    when the config names them.
    """
    if data is None:
        data = load_data(config)
    children = np.random.SeedSequence(config.seed).spawn(config.repeats)
    reps = [_one_repeat(config, data, ss) for ss in children]
    accs = np.array([r["accuracy"] for r in reps])
    lams = Counter(r["lambda"] for r in reps)
    lam = min(lams, key=lambda v: (-lams[v], v))
    record = {
        "method": config.method,
        "tau": config.tau,
        "ranks": reps[0]["ranks"],
        "lambda": lam,
        "storage_norm": float(np.mean([r["storage"] for r in reps])),
        "accuracy_mean": float(accs.mean()),
        "accuracy_std": float(accs.std()),
        "train_seconds": float(np.mean([r["seconds"] for r in reps])) if config.record_time else None,
        "seed": config.seed,
        "objective": _objective_trace(reps[0]["estimator"]),
        "accuracies": accs.tolist(),
        "error": None,
    }
    first = reps[0]
    if config.model_dir:
        export_model(first["estimator"], config.model_dir, first["train_features"],
                     first["train_labels"], extra={"lambda": first["lambda"], "seed": config.seed})
    if config.trace:
        write_objective_trace(record["objective"], config.trace)
    if config.output:
        write_results([record], config.output)
    return record


def _objective_trace(est):
    obj = getattr(est, "objective_", None)
    if obj is None:
        return []
    if np.isscalar(obj):
        return [float(obj)]
    flat = []
    for v in obj:
        flat.extend(v if isinstance(v, (list, tuple)) else [v])
    return [float(v) for v in flat]


def write_objective_trace(values, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["update", "objective"])
        for i, v in enumerate(values):
            w.writerow([i, repr(float(v))])


def write_results(records, path):
    """Results CSV with the fixed header; failed points keep empty numeric fields.

    ``path`` may be an open text stream. For a file path, failed points are
    also listed with their error in ``<path>.errors``.
    """
    if hasattr(path, "write"):
        _write_rows(records, path)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(records, fh)
    failed = [r for r in records if r.get("error")]
    if failed:
        with open(str(path) + ".errors", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "tau", "ranks", "error"])
            for r in failed:
                w.writerow([r["method"], _fmt(r["tau"]), _fmt(r["ranks"]), r["error"]])


def _write_rows(records, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([_fmt(r.get(k)) for k in CSV_HEADER])


def _run_point(args):
    config, data = args
    try:
        return run(config.replace(output=None, model_dir=None, trace=None), data)
    except Exception as exc:  # a failed grid point is recorded, not fatal
        log.warning("sweep point %s tau=%s ranks=%s failed: %s", config.method, config.tau,
                    config.ranks, exc)
        return {"method": config.method, "tau": config.tau, "ranks": config.ranks,
                "lambda": None if config.lam == "auto" else config.lam, "seed": config.seed,
                "error": f"{type(exc).__name__}: {exc}"}


def sweep(config, taus=None, ranks=None, methods=None):
    """Run every (method, grid point) combination; rows come back in grid order."""
    methods = list(methods) if methods else [config.method]
    if taus is not None and ranks is not None:
        raise ValueError("sweep over taus or over ranks, not both")
    if taus is not None:
        points = [dict(tau=float(t), ranks=None) for t in taus]
    elif ranks is not None:
        points = [dict(ranks=str(r), tau=None) for r in ranks]
    else:
        points = [{}]
    try:
        data = load_data(config)
    except Exception as exc:
        raise ValueError(f"cannot load data: {exc}") from exc
    jobs = []
    for m in methods:
        for p in points:
            try:
                jobs.append((config.replace(method=m, **p), data))
            except ValueError as exc:
                jobs.append((_Invalid(m, p, exc), None))
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_safe_point, jobs))
    else:
        records = [_safe_point(j) for j in jobs]
    if config.output:
        write_results(records, config.output)
    return records


@dataclasses.dataclass
class _Invalid:
    method: str
    point: dict
    exc: Exception


def _safe_point(job):
    cfg, data = job
    if isinstance(cfg, _Invalid):
        return {"method": cfg.method, "tau": cfg.point.get("tau"), "ranks": cfg.point.get("ranks"),
                "error": f"{type(cfg.exc).__name__}: {cfg.exc}"}
    return _run_point(job)


def export_model(est, path, train_features, train_labels, extra=None):
    """Model directory readable by :func:`model_features`."""
    manifest = dict(extra or {})
    manifest["sample_shape"] = list(est.sample_shape_)
    manifest["train_labels"] = np.asarray(train_labels).tolist()
    manifest["objective"] = _objective_trace(est)
    arrays = {"train_features": np.asarray(train_features)}
    chains = []
    if isinstance(est, MultiBranchTTDA):
        manifest["kind"] = "branches"
        manifest["boundaries"] = list(est.spec_.boundaries)
        chains = list(est.chains_)
    elif isinstance(est, TTDA):
        manifest["kind"] = "branches"
        manifest["boundaries"] = []
        chains = [est.chain_]
    elif isinstance(est, LDA):
        manifest["kind"] = "vector"
        arrays["components"] = est.components_
    else:
        manifest["kind"] = "tucker"
        manifest["n_factors"] = len(est.subspaces_)
        for i, U in enumerate(est.subspaces_):
            arrays[f"factor_{i}"] = U
    manifest["estimator"] = type(est).__name__
    manifest["params"] = {k: v for k, v in est.get_params().items()
                          if isinstance(v, (int, float, str, type(None), list, tuple))}
    save_model(path, chains, manifest, arrays)


def model_manifest(path):
    return json.loads((Path(path) / "manifest.json").read_text())


def model_features(path, X):
    """Load a saved model and return ``(features of X, train features, train labels, manifest)``."""
    chains, manifest, arrays = load_model(path)
    X = np.asarray(X, dtype=float)
    shape = tuple(manifest["sample_shape"])
    if tuple(X.shape[1:]) != shape:
        raise ValueError(f"samples of shape {X.shape[1:]} do not match the model shape {shape}")
    kind = manifest["kind"]
    if kind == "branches":
        spec = BranchSpec(shape, tuple(manifest["boundaries"]))
        if spec.n_branches == 1:
            F = X.reshape((X.shape[0], -1), order="F") @ subspace_matrix(chains[0])
        else:
            F = BranchModel(spec, chains, 0.0).transform(X)
    elif kind == "vector":
        F = X.reshape((X.shape[0], -1), order="F") @ arrays["components"]
    else:
        Us = [arrays[f"factor_{i}"] for i in range(manifest["n_factors"])]
        F = tucker_project(X, Us)
    F = F.reshape((F.shape[0], -1), order="F")
    return F, arrays["train_features"], np.asarray(manifest["train_labels"]), manifest

