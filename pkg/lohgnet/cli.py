"""
Command-line entry point.

Usage:
    # Invariant suite and gradient checks
    python -m lohgnet selftest
    python -m lohgnet gradcheck --module horl

    # Generate, train, infer, evaluate
    python -m lohgnet gen --out data --count 8 --size 64 --seed 1
    python -m lohgnet train --data data --config tiny.json --out run/net.lohgw
    python -m lohgnet infer --ckpt run/net.lohgw --image data --out pred
    python -m lohgnet eval --pred pred --gt data --report run/report.json

Exit codes: 0 success, 1 a check ran and failed, 2 usage or input error,
3 numeric failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from lohgnet import __version__
from lohgnet.config import NetworkConfig, print_settings, settings
from lohgnet.core.constants import ChannelPreset, ExitCode, GradcheckTarget, Precision
from lohgnet.core.errors import ContractError, InputError, LohgError
from lohgnet.core.log import configure_logging
from lohgnet.data.dataset import IMAGE_DIR, PROBABILITY_SUFFIX, write_dataset
from lohgnet.data.pgm import read_pgm, write_pgm
from lohgnet.models.network import LoHGNet
from lohgnet.numerics.gradcheck import DEFAULT_FLOOR
from lohgnet.services.ablation import (
    DEFAULT_HYPEREDGE_GRID,
    DEFAULT_SPARSITY_GRID,
    VARIANTS,
    run_ablation,
    run_sweep,
)
from lohgnet.services.gradcheck_suite import GradcheckSuite
from lohgnet.services.metrics import MATCH_RADIUS, binarize, evaluate_directories
from lohgnet.services.selftest import SelfTest
from lohgnet.services.trainer import fit_dataset

logger = logging.getLogger(__name__)

PROBABILITY_BITS = 16

EPILOG = """
Examples:
    python -m lohgnet selftest
    python -m lohgnet gradcheck --module e2e
    python -m lohgnet gen --out data --count 3 --size 64 --seed 7
    python -m lohgnet train --data data --config tiny.json --out net.lohgw --steps 200
    python -m lohgnet infer --ckpt net.lohgw --image data/images/0000.pgm --out 0000.pgm
    python -m lohgnet eval --pred pred --gt data --report report.json
    python -m lohgnet ablate --data data --steps 100 --variants no-horl no-hypergraph
    python -m lohgnet sweep --data data --steps 100 --sparsity-grid 0.25 0.5 --hyperedge-grid 64 256
    python -m lohgnet dump-hypergraph --ckpt net.lohgw --image 0000.pgm --out dump

Notes:
    - Config precedence: defaults < LOHG_* environment < --config JSON < flags
    - Image extents must be divisible by 16
    - infer on a directory writes NAME.pgm masks and NAME.prob.pgm
      probabilities, so the output directory can be passed to eval --pred
    - Fa is printed in units of 1e-6
"""


# ========================================
# Helpers
# ========================================

def _network_config(args: argparse.Namespace, **overrides) -> NetworkConfig:
    """Defaults and environment, then the JSON file, then explicit flags."""
    config_path = getattr(args, "config", None)
    base = NetworkConfig.from_file(config_path) if config_path else NetworkConfig()
    for flag in ("seed", "precision", "preset", "steps", "sparsity", "hyperedges"):
        overrides.setdefault(flag, getattr(args, flag, None))
    overrides.setdefault("learning_rate", getattr(args, "lr", None))
    return base.with_overrides(**overrides)


def _image_paths(source: Path) -> List[Path]:
    """A single PGM, a dataset root (its images/), or a directory of PGMs."""
    if source.is_file():
        return [source]
    directory = source / IMAGE_DIR if (source / IMAGE_DIR).is_dir() else source
    if not directory.is_dir():
        raise InputError(f"image not found: {source}")
    paths = sorted(directory.glob("*.pgm"))
    if not paths:
        raise InputError(f"no .pgm files in {directory}")
    return paths


def _probability_path(mask_path: Path) -> Path:
    return mask_path.with_name(mask_path.stem + PROBABILITY_SUFFIX)


def _status(passed: bool) -> int:
    return ExitCode.OK if passed else ExitCode.FAILED


# ========================================
# Commands
# ========================================

def cmd_selftest(args: argparse.Namespace) -> int:
    report = SelfTest(seed=args.seed, instances=args.instances, inject_fault=args.inject_fault).run()
    for line in report.lines():
        print(line)
    return _status(report.passed)


def cmd_gradcheck(args: argparse.Namespace) -> int:
    result = GradcheckSuite(seed=args.seed, samples=args.samples).run(GradcheckTarget(args.module))
    for line in result.lines():
        print(line)
    print(f"max relative error (floored at {DEFAULT_FLOOR:.0e}) {result.max_rel_error:.3e}")
    return _status(result.passed)


def cmd_gen(args: argparse.Namespace) -> int:
    manifest = write_dataset(args.out, count=args.count, size=args.size, seed=args.seed)
    print(f"wrote {manifest.count} scenes ({args.size}x{args.size}) to {args.out}")
    return ExitCode.OK


def cmd_train(args: argparse.Namespace) -> int:
    config = _network_config(args)
    log = fit_dataset(args.data, config, args.out, loss_log=args.loss_log)
    final = "n/a" if log.final_loss is None else f"{log.final_loss:.6f}"
    print(f"trained {config.steps} steps, final loss {final}; checkpoint {args.out}")
    return ExitCode.OK


def cmd_infer(args: argparse.Namespace) -> int:
    model = LoHGNet.load(args.ckpt)
    paths = _image_paths(args.image)
    batch = args.image.is_dir()
    for path in paths:
        probabilities = model.predict(read_pgm(path))[0, 0]
        mask = binarize(probabilities, model.config.threshold)
        mask_path = args.out / f"{path.stem}.pgm" if batch else args.out
        write_pgm(_probability_path(mask_path), probabilities, bits=PROBABILITY_BITS)
        write_pgm(mask_path, mask.astype(np.float64), bits=8)
        logger.info("%s: %d foreground pixels", path.name, int(mask.sum()))
    print(f"wrote {len(paths)} prediction(s) to {args.out}")
    return ExitCode.OK


def cmd_eval(args: argparse.Namespace) -> int:
    report = evaluate_directories(args.pred, args.gt, radius=args.radius)
    report.write_json(args.report)
    if args.csv:
        report.write_csv(args.csv)
    for line in report.summary_lines():
        print(line)
    return ExitCode.OK


def cmd_ablate(args: argparse.Namespace) -> int:
    report = run_ablation(args.data, _network_config(args), variants=args.variants, steps=args.steps)
    for line in report.table_lines():
        print(line)
    if args.report:
        report.write_json(args.report)
    return ExitCode.OK


def cmd_sweep(args: argparse.Namespace) -> int:
    report = run_sweep(
        args.data,
        _network_config(args),
        sparsities=args.sparsity_grid,
        hyperedges=args.hyperedge_grid,
        steps=args.steps,
    )
    for line in report.table_lines():
        print(line)
    if args.report:
        report.write_json(args.report)
    return ExitCode.OK


def cmd_dump_hypergraph(args: argparse.Namespace) -> int:
    model = LoHGNet.load(args.ckpt)
    states = model.hypergraph_states(read_pgm(args.image))
    if not states:
        raise ContractError("network produced no hypergraph state")
    written = states[0].dump_csv(args.out)
    print(f"wrote {', '.join(path.name for path in written)} to {args.out}")
    return ExitCode.OK


def cmd_config(args: argparse.Namespace) -> int:
    config = _network_config(args)
    print_settings()
    print("NetworkConfig")
    print(config.to_json())
    print(f"widths {list(config.widths)}  input {config.resolved_input_size}  "
          f"hyperedges {config.resolved_hyperedges}  vertex width {config.vertex_width}")
    return ExitCode.OK


# ========================================
# Parser
# ========================================

def _add_network_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON file with NetworkConfig keys")
    parser.add_argument("--seed", type=int, help="Initialization and data-order seed")
    parser.add_argument("--precision", choices=[p.value for p in Precision], help="Tensor precision")
    parser.add_argument("--preset", choices=[p.value for p in ChannelPreset], help="Channel widths")
    parser.add_argument("--lr", type=float, help="SGD learning rate")
    parser.add_argument("--sparsity", type=float, help="HORL sparsity factor lambda")
    parser.add_argument("--hyperedges", type=int, help="HORL hyperedge count M")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lohgnet",
        description="Lorentz-manifold and hypergraph kernels for infrared small target detection.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=EPILOG,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        type=str.upper,
        help="Override LOHG_LOG_LEVEL",
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    selftest = commands.add_parser("selftest", help="Run the invariant suite")
    selftest.add_argument("--seed", type=int, default=settings.default_seed)
    selftest.add_argument("--instances", type=int, help="Random instances per check")
    selftest.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    selftest.set_defaults(handler=cmd_selftest)

    gradcheck = commands.add_parser("gradcheck", help="Finite-difference gradient checks (f64)")
    gradcheck.add_argument(
        "--module",
        choices=[target.value for target in GradcheckTarget],
        default=GradcheckTarget.ALL.value,
    )
    gradcheck.add_argument("--seed", type=int, default=settings.default_seed)
    gradcheck.add_argument("--samples", type=int, help="Entries sampled per block parameter")
    gradcheck.set_defaults(handler=cmd_gradcheck)

    gen = commands.add_parser("gen", help="Generate a synthetic dataset")
    gen.add_argument("--out", type=Path, required=True)
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--size", type=int, default=64)
    gen.add_argument("--seed", type=int, default=settings.default_seed)
    gen.set_defaults(handler=cmd_gen)

    train = commands.add_parser("train", help="Train on a generated dataset")
    train.add_argument("--data", type=Path, required=True)
    train.add_argument("--out", type=Path, required=True, help="Checkpoint path")
    train.add_argument("--steps", type=int)
    train.add_argument("--loss-log", type=Path, help="Default: <checkpoint>.loss.csv")
    _add_network_flags(train)
    train.set_defaults(handler=cmd_train)

    infer = commands.add_parser("infer", help="Write probability and mask PGMs")
    infer.add_argument("--ckpt", type=Path, required=True)
    infer.add_argument("--image", type=Path, required=True, help="PGM file or directory")
    infer.add_argument("--out", type=Path, required=True, help="Mask PGM, or a directory")
    infer.set_defaults(handler=cmd_infer)

    evaluate = commands.add_parser("eval", help="Score predicted masks against ground truth")
    evaluate.add_argument("--pred", type=Path, required=True)
    evaluate.add_argument("--gt", type=Path, required=True)
    evaluate.add_argument("--report", type=Path, required=True, help="JSON report path")
    evaluate.add_argument("--csv", type=Path, help="Per-image CSV path")
    evaluate.add_argument("--radius", type=float, default=MATCH_RADIUS, help="Centroid match radius")
    evaluate.set_defaults(handler=cmd_eval)

    ablate = commands.add_parser("ablate", help="Train and score component ablations")
    ablate.add_argument("--data", type=Path, required=True)
    ablate.add_argument("--steps", type=int, required=True)
    ablate.add_argument("--variants", nargs="+", choices=list(VARIANTS))
    ablate.add_argument("--report", type=Path)
    _add_network_flags(ablate)
    ablate.set_defaults(handler=cmd_ablate)

    sweep = commands.add_parser("sweep", help="Train and score a sparsity x hyperedge grid")
    sweep.add_argument("--data", type=Path, required=True)
    sweep.add_argument("--steps", type=int, required=True)
    sweep.add_argument(
        "--sparsity-grid", type=float, nargs="+", default=list(DEFAULT_SPARSITY_GRID),
        help="Sparsity factors lambda",
    )
    sweep.add_argument(
        "--hyperedge-grid", type=int, nargs="+", default=list(DEFAULT_HYPEREDGE_GRID),
        help="Hyperedge counts M",
    )
    sweep.add_argument("--report", type=Path)
    _add_network_flags(sweep)
    sweep.set_defaults(handler=cmd_sweep)

    dump = commands.add_parser("dump-hypergraph", help="Write HORL matrices as CSV")
    dump.add_argument("--ckpt", type=Path, required=True)
    dump.add_argument("--image", type=Path, required=True)
    dump.add_argument("--out", type=Path, required=True)
    dump.set_defaults(handler=cmd_dump_hypergraph)

    config = commands.add_parser("config", help="Print settings and the resolved network config")
    _add_network_flags(config)
    config.set_defaults(handler=cmd_config)

    return parser


# ========================================
# Main
# ========================================

Handler = Callable[[argparse.Namespace], int]


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    handler: Handler = args.handler
    try:
        return int(handler(args))
    except LohgError as exc:
        print(f"lohgnet {args.command}: {exc}", file=sys.stderr)
        return int(exc.exit_code)
    except ValidationError as exc:
        print(f"lohgnet {args.command}: invalid value: {exc}", file=sys.stderr)
        return int(ExitCode.USAGE)
    except OSError as exc:
        print(f"lohgnet {args.command}: {exc}", file=sys.stderr)
        return int(ExitCode.USAGE)

