"""End-to-end SVD-entropy run over sliding market windows.

For each term: coefficients -> trained sign-aware loader (best of several
trials) -> post-selection -> variational Schmidt decomposition -> entropy,
next to the exact entropy from diagonalizing the correlation matrix.  The
optional baseline trains a sign-blind loader and runs the same tail.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .encoding import Case, TargetEncoding, fwht
from .finance import (
    MarketDataError,
    StockSeries,
    build_data_vector,
    exact_svd_entropy,
    register_sizes,
    term_returns,
    window_coefficients,
)
from .mmd_train import KernelConfig, TrainConfig, TrainRecord, select_best_trial, train_trials
from .postprocess import PostSelectionError, overlap, post_select
from .qsvd import (
    QSVDError,
    QSVDResult,
    SvdAnsatzPair,
    apply_pair,
    extract_schmidt_spectrum,
    svd_entropy,
    train_qsvd,
)
from .simulator import AnsatzSpec, run_ansatz

log = logging.getLogger(__name__)

# stage tags for per-term seed derivation
_AAE, _NAIVE, _QSVD, _QSVD_NAIVE = range(4)


@dataclass(frozen=True)
class QSVDConfig:
    n_layers: int = 8
    iterations: int = 500
    lr: float = 0.01
    restarts: int = 1
    threshold: float = 1e-4
    shots: int | None = None

    def __post_init__(self):
        if self.n_layers < 1 or self.iterations < 0 or self.restarts < 1:
            raise QSVDError("qSVD needs >= 1 layer, >= 0 iterations and >= 1 restart")
        if not self.lr > 0 or not 0 <= self.threshold < 1:
            raise QSVDError("qSVD learning rate must be positive and threshold in [0, 1)")
        if self.shots is not None and self.shots < 1:
            raise QSVDError("shots must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    window: int = 5
    step: int = 1
    n_layers: int = 8
    train: TrainConfig = field(default_factory=TrainConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    qsvd: QSVDConfig = field(default_factory=QSVDConfig)
    baseline: bool = True
    seed: int = 7

    def __post_init__(self):
        if self.window < 3 or self.step < 1 or self.n_layers < 1:
            raise MarketDataError("need window >= 3, step >= 1 and at least one layer")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["train"] = self.train.to_dict()
        return d


def stage_seed(master: int, term: int, stage: int) -> int:
    return int(np.random.SeedSequence(master, spawn_key=(term, stage)).generate_state(1)[0])


@dataclass
class TermResult:
    term: str
    exact: float | None = None
    aae: float | None = None
    naive: float | None = None
    overlap: float | None = None
    L1: float | None = None
    L2: float | None = None
    qsvd_cost: float | None = None
    naive_qsvd_cost: float | None = None
    error: str | None = None


@dataclass
class EntropyReport:
    terms: list[TermResult]
    config: dict

    def to_dict(self) -> dict:
        return {"config": self.config, "terms": [asdict(t) for t in self.terms]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["term", "exact", "aae", "naive", "overlap", "L1", "L2"]
        w.writerow(cols)
        for t in self.terms:
            w.writerow([_fmt(getattr(t, c)) for c in cols])
        return buf.getvalue()


def _fmt(x):
    if x is None:
        return ""
    return repr(x) if isinstance(x, float) else x


def train_loader(enc: TargetEncoding, n_layers: int, cfg: TrainConfig,
                 kernel: KernelConfig) -> TrainRecord:
    spec = AnsatzSpec.all_y(enc.n_qubits, n_layers)
    return select_best_trial(train_trials(enc, spec, cfg, kernel))


def loaded_data_state(enc: TargetEncoding, record: TrainRecord) -> tuple[np.ndarray, float]:
    """Data-register state produced by a trained loader, and its overlap with the target."""
    out = run_ansatz(record.spec, record.best_params)
    if enc.case is Case.MIXED_SIGN:
        return post_select(out).data_state, overlap(out, enc.d)
    return out, float(abs(np.vdot(enc.d, out)))


def schmidt_entropy(state, n_s: int, n_t: int, cfg: QSVDConfig, seed: int) -> tuple[float, QSVDResult]:
    """Best-of-``cfg.restarts`` variational Schmidt decomposition, then the entropy."""
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(cfg.restarts):
        pair = SvdAnsatzPair.random(n_s, n_t, cfg.n_layers, rng)
        res = train_qsvd(state, pair, cfg.iterations, cfg.lr, seed=int(rng.integers(2**31)),
                         shots=cfg.shots)
        if best is None or res.final_cost < best.final_cost:
            best = res
    spectrum = extract_schmidt_spectrum(apply_pair(state, best.pair), n_s, n_t, cfg.threshold)
    return svd_entropy(spectrum.normalized()), best


def naive_target(enc: TargetEncoding) -> TargetEncoding:
    """Sign-blind target: only the squared data amplitudes are trained."""
    d = enc.d
    return TargetEncoding(d=d, case=enc.case, d_bar=None, p=d**2, p_hadamard=fwht(d) ** 2)


def run_term(index: int, label: str, returns, cfg: PipelineConfig,
             res: TermResult | None = None) -> TermResult:
    """Fill ``res`` stage by stage so partial results survive a later failure."""
    res = res if res is not None else TermResult(term=label)
    a, C = window_coefficients(returns)
    res.exact = exact_svd_entropy(C)
    n_s, n_t = register_sizes(*a.shape)
    enc = build_data_vector(a)

    train_cfg = replace(cfg.train, seed=stage_seed(cfg.seed, index, _AAE), objective="aae")
    record = train_loader(enc, cfg.n_layers, train_cfg, cfg.kernel)
    _, res.L1, res.L2 = record.cost_at()
    state, res.overlap = loaded_data_state(enc, record)
    res.aae, q = schmidt_entropy(state, n_s, n_t, cfg.qsvd, stage_seed(cfg.seed, index, _QSVD))
    res.qsvd_cost = q.final_cost

    if cfg.baseline:
        naive_cfg = replace(cfg.train, seed=stage_seed(cfg.seed, index, _NAIVE), objective="naive")
        naive_rec = train_loader(naive_target(enc), cfg.n_layers, naive_cfg, cfg.kernel)
        naive_state = run_ansatz(naive_rec.spec, naive_rec.best_params)
        res.naive, nq = schmidt_entropy(naive_state, n_s, n_t, cfg.qsvd,
                                        stage_seed(cfg.seed, index, _QSVD_NAIVE))
        res.naive_qsvd_cost = nq.final_cost
    return res


def run_entropy_pipeline(series: StockSeries, cfg: PipelineConfig | None = None) -> EntropyReport:
    """Run every sliding term; a failing term is recorded and the run continues."""
    cfg = cfg or PipelineConfig()
    terms = []
    for i, (label, returns) in enumerate(term_returns(series, cfg.window, cfg.step)):
        res = TermResult(term=label)
        try:
            run_term(i, label, returns, cfg, res)
        except (MarketDataError, QSVDError, PostSelectionError) as exc:
            log.warning("term %s failed: %s", label, exc)
            res.error = f"{type(exc).__name__}: {exc}"
        log.info("term %s: exact=%s aae=%s naive=%s", label, res.exact, res.aae, res.naive)
        terms.append(res)
    config = cfg.to_dict()
    config["symbols"] = list(series.symbols)
    return EntropyReport(terms, config)
