"""Command-line entry point: ``aae {encode, qsvd, entropy, verify}``.

Exit status is 0 on success, 1 on a domain error (bad data, failed
training stage, failing self-check) and 2 on a usage error.  Errors are
also written to stderr as one JSON object.  Output files go to
``--out-dir``, defaulting to ``$AAE_OUTPUT_DIR`` or ``./aae-output``.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .encoding import EncodingError, TargetEncoding
from .finance import (
    MarketDataError,
    build_data_vector,
    bundled_dataset,
    load_prices,
    register_sizes,
    term_returns,
    window_coefficients,
)
from .mmd_train import KernelConfig, TrainConfig, TrainingError, select_best_trial, train_trials
from .pipeline import (
    PipelineConfig,
    QSVDConfig,
    loaded_data_state,
    run_entropy_pipeline,
    schmidt_entropy,
)
from .postprocess import PostSelectionError
from .qsvd import QSVDError, apply_pair, extract_schmidt_spectrum
from .simulator import AnsatzSpec, SimulationError

log = logging.getLogger("aae")

ENV_OUTPUT_DIR = "AAE_OUTPUT_DIR"
BUNDLED = ("table2", "table4")
DOMAIN_ERRORS = (
    MarketDataError,
    EncodingError,
    TrainingError,
    QSVDError,
    PostSelectionError,
    SimulationError,
    OSError,
    RuntimeError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit_error(kind: str, message: str, **extra) -> None:
    record = {"error": kind, "message": message, **extra}
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text)
    log.info("wrote %s", path)
    return path


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")


def _load_series(source: str):
    path = Path(source)
    if path.exists():
        return load_prices(path)
    if path.stem in BUNDLED and path.parent == Path("."):
        return bundled_dataset(path.stem)
    raise MarketDataError(f"no such data file {source!r} (bundled: {', '.join(BUNDLED)})")


# ---------------------------------------------------------------- configs


def _validated(build, args):
    """Library-side validation of flag values counts as a usage error."""
    try:
        return build(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        n_shot=args.shots,
        iterations=args.iters,
        lr_schedule=((args.lr_switch, args.lr), (None, args.lr_final)),
        n_trials=args.trials,
        checkpoint_iterations=args.checkpoints,
        seed=args.seed,
        gradient_mode=args.gradient,
    )


def _kernel_config(args) -> KernelConfig:
    return KernelConfig(sigma_sq=args.sigma_sq, scale=args.kernel_scale)


def _qsvd_config(args) -> QSVDConfig:
    return QSVDConfig(n_layers=args.qsvd_layers, iterations=args.qsvd_iters, lr=args.qsvd_lr,
                      restarts=args.qsvd_restarts, threshold=args.threshold, shots=args.qsvd_shots)


def _add_train_options(p, layers_default=8):
    g = p.add_argument_group("loader training")
    g.add_argument("--layers", type=int, default=layers_default, help="ansatz layers (default %(default)s)")
    g.add_argument("--iters", type=int, default=200, help="training iterations (default %(default)s)")
    g.add_argument("--trials", type=int, default=10, help="independent trials (default %(default)s)")
    g.add_argument("--shots", type=int, default=400, help="samples per distribution (default %(default)s)")
    g.add_argument("--lr", type=float, default=0.1, help="initial learning rate (default %(default)s)")
    g.add_argument("--lr-final", type=float, default=0.01, help="learning rate after the switch")
    g.add_argument("--lr-switch", type=int, default=100, help="iteration of the learning-rate switch")
    g.add_argument("--checkpoints", type=_int_list, default=(),
                   help="comma-separated iterations whose parameters are kept for selection")
    g.add_argument("--gradient", choices=["sampled", "exact"], default="sampled")
    g.add_argument("--sigma-sq", type=float, default=0.125, help="Gaussian kernel sigma^2")
    g.add_argument("--kernel-scale", type=float, default=1.0, help="Gaussian kernel prefactor")


def _add_qsvd_options(p):
    g = p.add_argument_group("Schmidt decomposition")
    g.add_argument("--qsvd-layers", type=int, default=8)
    g.add_argument("--qsvd-iters", type=int, default=500)
    g.add_argument("--qsvd-lr", type=float, default=0.01)
    g.add_argument("--qsvd-restarts", type=int, default=1, help="keep the lowest-cost of this many runs")
    g.add_argument("--qsvd-shots", type=int, default=None, help="shot-based gradients (default exact)")
    g.add_argument("--threshold", type=float, default=1e-4, help="spectrum cut-off")


def _add_common(p):
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--out-dir", type=Path, default=None,
                   help=f"output directory (default ${ENV_OUTPUT_DIR} or ./aae-output)")
    p.add_argument("--svg", action="store_true", help="also write SVG charts (needs matplotlib)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aae", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="train an amplitude-encoding circuit")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--vector", type=_float_list, help="comma-separated target entries")
    src.add_argument("--data", help="price CSV (or bundled table2 / table4)")
    p.add_argument("--term", help="term label of the window to encode (default: first)")
    p.add_argument("--window", type=int, default=5, help="prices per window (default %(default)s)")
    _add_train_options(p)
    _add_common(p)

    p = sub.add_parser("qsvd", help="Schmidt decomposition of a trained loader's state")
    p.add_argument("--record", type=Path, required=True, help="encode.json from `aae encode`")
    p.add_argument("--stock-qubits", type=int, default=None,
                   help="qubits of the first register (default: from the record, else half)")
    _add_qsvd_options(p)
    _add_common(p)

    p = sub.add_parser("entropy", help="SVD entropy of every sliding window")
    p.add_argument("--data", default="table2", help="price CSV (or bundled table2 / table4)")
    p.add_argument("--window", type=int, default=5, help="prices per window (default %(default)s)")
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--no-baseline", action="store_true", help="skip the sign-blind baseline")
    _add_train_options(p)
    _add_qsvd_options(p)
    _add_common(p)

    p = sub.add_parser("verify", help="run the oracle self-checks")
    p.add_argument("--suite", action="append", choices=["fwht", "gradients", "theorem1",
                                                        "postselect", "amplify"])
    _add_common(p)
    return parser


# ---------------------------------------------------------------- commands


def _encode_target(args):
    if args.vector is not None:
        return TargetEncoding.from_raw(args.vector), {"vector": args.vector}, None
    series = _load_series(args.data)
    terms = term_returns(series, args.window)
    if args.term is None:
        label, ret = terms[0]
    else:
        match = [t for t in terms if t[0] == args.term]
        if not match:
            raise MarketDataError(f"no term {args.term!r}; available: {[t[0] for t in terms]}")
        label, ret = match[0]
    a, _ = window_coefficients(ret)
    source = {"data": args.data, "term": label, "window": args.window, "symbols": series.symbols}
    return build_data_vector(a), source, list(register_sizes(*a.shape))


def cmd_encode(args, out_dir: Path) -> int:
    args.seed = 0 if args.seed is None else args.seed
    enc, source, registers = _encode_target(args)
    cfg, kernel = _validated(_train_config, args), _validated(_kernel_config, args)
    spec = AnsatzSpec.all_y(enc.n_qubits, args.layers)
    records = train_trials(enc, spec, cfg, kernel)
    best = select_best_trial(records)
    _, O = loaded_data_state(enc, best)
    L, L1, L2 = best.cost_at()
    out = {
        "config": {"train": cfg.to_dict(), "kernel": asdict(kernel), "layers": args.layers,
                   "source": source},
        "target": {"d": enc.d.tolist(), "case": enc.case.value, "registers": registers},
        "best": best.to_dict(include_timing=False),
        "summary": {"trial": best.trial, "iteration": best.iteration, "L": L, "L1": L1, "L2": L2,
                    "overlap": O},
        "trials": [
            {"trial": r.trial, "final": list(r.cost_at(r.final_iteration))} for r in records
        ],
    }
    _write(out_dir, "encode.json", _dump(out))
    if args.svg:
        from .plots import cost_chart

        _write(out_dir, "encode.svg", cost_chart(best.costs.tolist(), f"trial {best.trial}"))
    print(f"best trial {best.trial} at iteration {best.iteration}: "
          f"L={L:.3e} L1={L1:.3e} L2={L2:.3e} overlap={O:.4f}")
    return 0


def _reduced_entropy(d: np.ndarray, n_s: int, n_t: int) -> float:
    sv = np.linalg.svd(d.reshape(1 << n_s, 1 << n_t), compute_uv=False)
    lam = sv**2
    lam = lam[lam > 1e-12]
    return float(-np.sum(lam * np.log(lam))) + 0.0  # no negative zero


def cmd_qsvd(args, out_dir: Path) -> int:
    from .mmd_train import TrainRecord

    args.seed = 0 if args.seed is None else args.seed
    cfg = _validated(_qsvd_config, args)
    saved = json.loads(args.record.read_text())
    try:
        d = np.asarray(saved["target"]["d"], dtype=float)
        record = TrainRecord.from_dict(saved["best"])
    except (KeyError, TypeError, ValueError) as exc:
        raise TrainingError(f"{args.record} is not an encode record: {exc}") from None
    enc = TargetEncoding.from_raw(d)
    n_data = int(round(math.log2(d.size)))
    registers = saved["target"].get("registers")
    if args.stock_qubits is not None:
        n_s = args.stock_qubits
    elif registers:
        n_s = registers[0]
    else:
        n_s = (n_data + 1) // 2
    n_t = n_data - n_s
    if n_s < 1 or n_t < 1:
        raise QSVDError(f"cannot split {n_data} data qubits into two non-empty registers")
    state, O = loaded_data_state(enc, record)
    entropy, res = schmidt_entropy(state, n_s, n_t, cfg, args.seed)
    spectrum = extract_schmidt_spectrum(apply_pair(state, res.pair), n_s, n_t, cfg.threshold)
    exact = _reduced_entropy(enc.d, n_s, n_t)
    out = {
        "config": {"qsvd": asdict(cfg), "seed": args.seed, "registers": [n_s, n_t],
                   "record": str(args.record)},
        "overlap": O,
        "entropy": entropy,
        "exact_entropy": exact,
        "spectrum": {"probabilities": spectrum.probabilities.tolist(),
                     "residual": spectrum.residual},
        "result": res.to_dict(),
    }
    _write(out_dir, "qsvd.json", _dump(out))
    print(f"qSVD cost {res.final_cost:.3e}; entropy {entropy:.4f} (exact {exact:.4f})")
    return 0


def cmd_entropy(args, out_dir: Path) -> int:
    args.seed = 7 if args.seed is None else args.seed
    cfg = _validated(lambda a: PipelineConfig(
        window=a.window,
        step=a.step,
        n_layers=a.layers,
        train=_train_config(a),
        kernel=_kernel_config(a),
        qsvd=_qsvd_config(a),
        baseline=not a.no_baseline,
        seed=a.seed,
    ), args)
    series = _load_series(args.data)
    report = run_entropy_pipeline(series, cfg)
    report.config["data"] = args.data
    _write(out_dir, "entropy.json", report.to_json())
    _write(out_dir, "entropy.csv", report.to_csv())
    if args.svg:
        from .plots import entropy_chart

        _write(out_dir, "entropy.svg", entropy_chart(report))
    sys.stdout.write(report.to_csv())
    failed = [t.term for t in report.terms if t.error]
    if failed:
        _emit_error("term_failed", f"{len(failed)} term(s) failed", terms=failed)
        return 1
    return 0


def cmd_verify(args, out_dir: Path) -> int:
    from .verify import SUITES, run_suites

    seed = 0 if args.seed is None else args.seed
    results = run_suites(seed, args.suite or SUITES)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.seconds:6.2f}s  {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        _emit_error("verify_failed", "self-check failed", suites=failed)
        return 1
    return 0


COMMANDS = {"encode": cmd_encode, "qsvd": cmd_qsvd, "entropy": cmd_entropy, "verify": cmd_verify}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        _emit_error("usage", str(exc))
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    out_dir = args.out_dir or Path(os.environ.get(ENV_OUTPUT_DIR, "aae-output"))
    try:
        return COMMANDS[args.command](args, out_dir)
    except UsageError as exc:
        _emit_error("usage", str(exc))
        return 2
    except DOMAIN_ERRORS as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
