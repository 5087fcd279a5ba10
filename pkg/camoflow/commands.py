"""
CamoFlow CLI Commands

Command-line interface for the detector pipeline:
- gen-data: write a synthetic camouflage corpus
- train / eval / infer: fit, score and apply a model
- gradcheck: finite-difference check of every component
- ablate: train and score the module substitutions side by side

Usage:
    camoflow gen-data --out data --seed 7 --n 8 --size 64 --val 4
    camoflow train data/train.tsv --val data/val.tsv --out runs/full --input-size 64
    camoflow eval runs/full/best.cofi data/val.tsv --out runs/full/eval
    camoflow infer runs/full/best.cofi photo.ppm --out photo.pgm --emit-intermediate
    camoflow gradcheck --seeds 5
    camoflow ablate data/train.tsv --val data/val.tsv --out runs/ablation

Exit codes: 0 success, 1 unexpected error, 2 configuration error,
3 I/O or format error, 4 numeric error, 5 gradient check failure,
130 interrupted.
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from camoflow.cli import CLI, get_cli
from camoflow.config import Config, load_config, load_environment
from camoflow.exceptions import CamoFlowError, GradCheckFailure, exit_code_for
from camoflow.logging_config import get_logger, setup_logging
from camoflow.performance import timed

logger = get_logger('camoflow.commands')

CONFIG_FIELDS = (
    'seed', 'input_size', 'lr', 'weight_decay', 'batch_size', 'epochs',
    'early_stop_patience', 'mskm_depth', 'max_steps',
)


def config_from_args(args: argparse.Namespace, checkpoint: Optional[Path] = None) -> Config:
    """
    Build the run configuration: defaults < JSON file < flags

    Without --config, a config.json next to the checkpoint is used when present.
    """
    from camoflow.training import CONFIG_FILE

    path = getattr(args, 'config', None)
    if path is None and checkpoint is not None and (checkpoint.parent / CONFIG_FILE).is_file():
        path = checkpoint.parent / CONFIG_FILE
        logger.info(f"Using {path} saved with the checkpoint")
    overrides: Dict[str, Any] = {name: getattr(args, name, None) for name in CONFIG_FIELDS}
    overrides['ablation'] = {
        'use_msfi': False if getattr(args, 'no_msfi', False) else None,
        'use_mskm': False if getattr(args, 'no_mskm', False) else None,
        'use_sbd': False if getattr(args, 'no_sbd', False) else None,
    }
    return load_config(path, **overrides)


class CamoFlowCommands:
    """
    Command handlers for the CamoFlow CLI

    Every handler returns an exit code; failures surface as CamoFlowError
    subclasses and are mapped to exit codes by main().
    """

    def __init__(self, cli: Optional[CLI] = None):
        self.cli = cli or get_cli()

    # ==========================================================================
    # Data
    # ==========================================================================

    @timed
    def cmd_gen_data(self, cfg: Config, out: Path, n: int, size: int, val: int = 0, test: int = 0) -> int:
        """
        Write train (and optionally val/test) splits of the synthetic corpus

        Returns:
            Exit code (0 = success)
        """
        from camoflow.data.synthetic import gen_synthetic

        counts = [('train', n), ('val', val), ('test', test)]
        rows = []
        with self.cli.status(f"Generating synthetic corpus in {out}"):
            for split, count in counts:
                if count <= 0:
                    continue
                manifest = gen_synthetic(
                    out, cfg.seed, count, size, split=split,
                    similarity=cfg.similarity, occluder_prob=cfg.occluder_prob,
                )
                rows.append([split, len(manifest), str(Path(out) / f"{split}.tsv")])
        self.cli.table("Synthetic corpus", ["split", "samples", "manifest"], rows)
        self.cli.success(f"Wrote {sum(row[1] for row in rows)} samples (seed {cfg.seed}, {size}x{size})")
        return 0

    # ==========================================================================
    # Training and evaluation
    # ==========================================================================

    @timed
    def cmd_train(self, cfg: Config, train_manifest: Path, val_manifest: Optional[Path], out: Path, resume: bool = False) -> int:
        """Train a model, keeping best.cofi and train_log.tsv in out"""
        from camoflow.data.dataset import read_manifest
        from camoflow.training import train

        train_set = read_manifest(train_manifest, 'train')
        val_set = read_manifest(val_manifest, 'val') if val_manifest else None
        self.cli.info(
            f"Training {cfg.ablation.label()} on {len(train_set)} samples "
            f"({cfg.input_size}x{cfg.input_size}, batch {cfg.batch_size}, lr {cfg.lr})"
        )

        def report(record) -> None:
            self.cli.print(
                f"epoch {record.epoch:3d}  loss {record.total:.6f}  "
                f"(final {record.final:.4f} coarse {record.coarse:.4f} fine {record.fine:.4f} "
                f"aux {record.aux:.4f})  val MAE {record.val_mae:.6f}"
            )

        result = train(cfg, train_set, val_set, out, resume=resume, on_epoch_end=report)
        if result.stopped_early:
            self.cli.warning(f"Early stopping after {result.epochs_run} epochs")
        self.cli.success(
            f"Best val MAE {result.best_val_mae:.6f} after {result.steps} steps; checkpoint {result.checkpoint}"
        )
        return 0

    def _print_metrics(self, title: str, report) -> None:
        aggregate = report.aggregate()
        self.cli.table(
            title, ["metric", "value"],
            [[name, f"{value:.6f}"] for name, value in aggregate.items()],
        )

    @timed
    def cmd_eval(self, cfg: Config, checkpoint: Path, manifest: Path, out: Path) -> int:
        """Predict every manifest sample and write masks plus report.json"""
        from camoflow.data.dataset import read_manifest
        from camoflow.evaluation import REPORT_FILE, eval_cmd

        samples = read_manifest(manifest)
        with self.cli.status(f"Evaluating {len(samples)} samples"):
            report = eval_cmd(cfg, checkpoint, samples, out)
        self._print_metrics(f"Evaluation ({samples.split})", report)
        self.cli.success(f"Wrote {Path(out) / REPORT_FILE}")
        return 0

    @timed
    def cmd_infer(self, cfg: Config, checkpoint: Path, image: Path, out: Path, emit_intermediate: bool = False) -> int:
        """Write the final mask (and optionally the coarse and fine masks)"""
        from camoflow.evaluation import infer

        written = infer(cfg, checkpoint, image, out, emit_intermediate=emit_intermediate)
        for path in written:
            self.cli.success(f"Wrote {path}")
        return 0

    # ==========================================================================
    # Diagnostics
    # ==========================================================================

    @timed
    def cmd_gradcheck(self, cfg: Config, seeds: int = 1, samples: int = 6) -> int:
        """
        Gradient check of every component

        Raises:
            GradCheckFailure: If any component reaches the error threshold
        """
        from camoflow.diagnostics import run_gradcheck

        with self.cli.status(f"Checking gradients over {seeds} seed(s)"):
            report = run_gradcheck(cfg, seeds=seeds, samples=samples)
        rows = [
            [row.module, f"{row.worst:.3e}", row.checked, 'ok' if row.passed(report.threshold) else 'FAIL']
            for row in report.rows
        ]
        styles = [None if row.passed(report.threshold) else 'red' for row in report.rows]
        self.cli.table(
            f"Gradient check (seeds {report.seeds[0]}..{report.seeds[-1]})",
            ["module", "worst relative error", "checked", "status"], rows, styles,
        )
        if not report.passed:
            names = ', '.join(row.module for row in report.failures())
            raise GradCheckFailure(
                f"Relative error >= {report.threshold:g} in: {names} (worst {report.worst:.3e})"
            )
        self.cli.success(f"All {len(report.rows)} components below {report.threshold:g}")
        return 0

    @timed
    def cmd_ablate(self, cfg: Config, train_manifest: Path, val_manifest: Optional[Path], out: Path) -> int:
        """Train and score every ablation variant, writing ablation.json"""
        from camoflow.ablation import ABLATION_FILE, run_ablation
        from camoflow.data.dataset import read_manifest

        train_set = read_manifest(train_manifest, 'train')
        val_set = read_manifest(val_manifest, 'val') if val_manifest else None
        result = run_ablation(cfg, train_set, val_set, out)
        rows = [
            [run.variant, f"{run.parameters:,}", run.epochs_run,
             f"{run.metrics.mae:.4f}", f"{run.metrics.s_alpha:.4f}",
             f"{run.metrics.e_xi:.4f}", f"{run.metrics.f_beta:.4f}"]
            for run in result.runs
        ]
        self.cli.table("Ablation", ["variant", "parameters", "epochs", "MAE", "S", "E", "F"], rows)
        self.cli.success(f"Wrote {Path(out) / ABLATION_FILE}")
        return 0


# ==========================================================================
# Argument parsing
# ==========================================================================

def _config_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group('configuration')
    group.add_argument('--config', type=Path, help='JSON config file')
    group.add_argument('--seed', type=int, help='Random seed')
    group.add_argument('--input-size', type=int, dest='input_size', help='Model input side (multiple of 32)')
    group.add_argument('--no-sbd', action='store_true', dest='no_sbd', help='Remove the fine-mask decoder')
    group.add_argument('--no-mskm', action='store_true', dest='no_mskm', help='Replace MSKM with plain conv blocks')
    group.add_argument('--no-msfi', action='store_true', dest='no_msfi', help='Replace MSFI with plain fusion')
    return parent


def _training_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group('training')
    group.add_argument('--lr', type=float, help='Adam learning rate')
    group.add_argument('--weight-decay', type=float, dest='weight_decay', help='Decoupled weight decay')
    group.add_argument('--batch-size', type=int, dest='batch_size', help='Samples per batch')
    group.add_argument('--epochs', type=int, help='Maximum epochs')
    group.add_argument('--early-stop-patience', type=int, dest='early_stop_patience',
                       help='Epochs without val MAE improvement before stopping')
    group.add_argument('--mskm-depth', type=int, dest='mskm_depth', help='MSKM blocks per level')
    group.add_argument('--max-steps', type=int, dest='max_steps', help='Cap on optimizer steps')
    return parent


def create_parser() -> argparse.ArgumentParser:
    """Create argument parser for CLI"""
    parser = argparse.ArgumentParser(
        prog='camoflow',
        description='CamoFlow - coarse-to-fine camouflaged object detection',
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument('--verbose', '-v', action='store_true', help='Show INFO logs on the console')
    parser.add_argument('--log-dir', type=Path, dest='log_dir', help='Directory for log files')

    subparsers = parser.add_subparsers(dest='command', help='Commands')
    config = _config_parent()
    training = _training_parent()

    gen_parser = subparsers.add_parser('gen-data', parents=[config], help='Write a synthetic corpus')
    gen_parser.add_argument('--out', type=Path, required=True, help='Corpus directory')
    gen_parser.add_argument('--n', type=int, default=8, help='Training samples')
    gen_parser.add_argument('--val', type=int, default=0, help='Validation samples')
    gen_parser.add_argument('--test', type=int, default=0, help='Test samples')
    gen_parser.add_argument('--size', type=int, default=64, help='Image side (multiple of 32)')

    train_parser = subparsers.add_parser('train', parents=[config, training], help='Train a model')
    train_parser.add_argument('train_manifest', type=Path, help='Training manifest (.tsv)')
    train_parser.add_argument('--val', type=Path, help='Validation manifest (defaults to the training set)')
    train_parser.add_argument('--out', type=Path, required=True, help='Run directory')
    train_parser.add_argument('--resume', action='store_true', help='Continue from the state saved in --out')

    eval_parser = subparsers.add_parser('eval', parents=[config], help='Score a checkpoint on a manifest')
    eval_parser.add_argument('checkpoint', type=Path, help='Checkpoint (.cofi)')
    eval_parser.add_argument('manifest', type=Path, help='Manifest (.tsv)')
    eval_parser.add_argument('--out', type=Path, required=True, help='Output directory')

    infer_parser = subparsers.add_parser('infer', parents=[config], help='Predict the mask of one image')
    infer_parser.add_argument('checkpoint', type=Path, help='Checkpoint (.cofi)')
    infer_parser.add_argument('image', type=Path, help='Input image (.ppm)')
    infer_parser.add_argument('--out', type=Path, required=True, help='Output mask (.pgm)')
    infer_parser.add_argument('--emit-intermediate', action='store_true', dest='emit_intermediate',
                              help='Also write .coarse.pgm and .fine.pgm')

    grad_parser = subparsers.add_parser('gradcheck', parents=[config], help='Finite-difference gradient check')
    grad_parser.add_argument('--seeds', type=int, default=1, help='Consecutive seeds to check')
    grad_parser.add_argument('--samples', type=int, default=6, help='Coordinates per component and seed')

    ablate_parser = subparsers.add_parser('ablate', parents=[config, training], help='Compare module substitutions')
    ablate_parser.add_argument('train_manifest', type=Path, help='Training manifest (.tsv)')
    ablate_parser.add_argument('--val', type=Path, help='Validation manifest (defaults to the training set)')
    ablate_parser.add_argument('--out', type=Path, required=True, help='Output directory')

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for CLI

    Args:
        argv: Command line arguments (defaults to sys.argv)

    Returns:
        Exit code
    """
    parser = create_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 0

    load_environment()
    setup_logging(log_dir=args.log_dir, console_level='INFO' if args.verbose else 'WARNING')
    commands = CamoFlowCommands()

    try:
        if args.command == 'gen-data':
            return commands.cmd_gen_data(
                config_from_args(args), args.out, args.n, args.size, val=args.val, test=args.test
            )

        elif args.command == 'train':
            return commands.cmd_train(config_from_args(args), args.train_manifest, args.val, args.out, resume=args.resume)

        elif args.command == 'eval':
            return commands.cmd_eval(
                config_from_args(args, args.checkpoint), args.checkpoint, args.manifest, args.out
            )

        elif args.command == 'infer':
            return commands.cmd_infer(
                config_from_args(args, args.checkpoint), args.checkpoint, args.image, args.out,
                emit_intermediate=args.emit_intermediate,
            )

        elif args.command == 'gradcheck':
            return commands.cmd_gradcheck(config_from_args(args), seeds=args.seeds, samples=args.samples)

        elif args.command == 'ablate':
            return commands.cmd_ablate(config_from_args(args), args.train_manifest, args.val, args.out)

        else:
            parser.print_help()
            return 1

    except KeyboardInterrupt:
        commands.cli.error("Interrupted")
        return 130
    except CamoFlowError as e:
        logger.error(f"{args.command} failed: {e}")
        commands.cli.error(f"{type(e).__name__}: {e}")
        return exit_code_for(e)
    except Exception as e:
        logger.error(f"Command failed: {e}", exc_info=True)
        commands.cli.error(f"Error: {e}")
        return 1


if __name__ == '__main__':
    sys.exit(main())
