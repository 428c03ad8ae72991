"""Command-line interface.

Verbs:
    dapt pretrain  --spec NAME [--objective emix|shed|none] [--steps N] ...
    dapt transfer  [--run-name NAME | --checkpoint PATH] ...
    dapt report    [--run-name NAME | --run-dir DIR]
    dapt all       --spec NAME ...        (pretrain, then transfer, then report)

Outputs land under $DAPT_OUTPUT_ROOT (default ./runs), one directory per run.
Exit codes: 0 on success, 1 for configuration or usage errors, 2 for runtime
failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from . import workflows as wf


class UsageError(Exception):
    """Bad arguments or configuration; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; route through UsageError so
    # validation problems report as exit code 1 instead.
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dapt", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"dapt {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_config_flags(p, include_training=True):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--spec", help="registered dataset spec name")
        p.add_argument("--seed", type=int)
        p.add_argument("--run-name", dest="run_name",
                       help="run directory name (default SPEC-OBJECTIVE-sSEED)")
        if include_training:
            p.add_argument("--objective", choices=("emix", "shed", "none"))
            p.add_argument("--steps", type=int)
            p.add_argument("--batch-size", dest="batch_size", type=int)
            p.add_argument("--lr", type=float)
            p.add_argument("--weight-decay", dest="weight_decay", type=float)
            p.add_argument("--temperature", type=float)
            p.add_argument("--shuffle-rate", dest="shuffle_rate", type=float)
            p.add_argument("--label-mode", dest="label_mode",
                           choices=("literal", "consistent"))
            p.add_argument("--grad-clip", dest="grad_clip", type=float)
            p.add_argument("--log-every", dest="log_every", type=int)
        p.add_argument("--probe-epochs", dest="probe_epochs", type=int)
        p.add_argument("--probe-lr", dest="probe_lr", type=float)
        p.add_argument("--probe-batch-size", dest="probe_batch_size", type=int)
        p.add_argument("--deterministic", action="store_const", const=True,
                       default=None, help="force the single-stream execution mode "
                       "(already the default)")

    p_pre = sub.add_parser("pretrain", help="train on a registered spec")
    add_config_flags(p_pre)
    p_pre.add_argument("--resume", action="store_true",
                       help="continue from the run directory's checkpoint")

    p_tr = sub.add_parser("transfer", help="linear-probe a checkpoint")
    add_config_flags(p_tr, include_training=False)
    p_tr.add_argument("--checkpoint", help="checkpoint path "
                      "(default: the run directory's ckpt.dapt)")

    p_rep = sub.add_parser("report", help="render recorded metrics")
    p_rep.add_argument("--run-name", dest="run_name")
    p_rep.add_argument("--run-dir", dest="run_dir",
                       help="explicit run directory (overrides --run-name)")

    p_all = sub.add_parser("all", help="pretrain, transfer, report")
    add_config_flags(p_all)
    p_all.add_argument("--resume", action="store_true")
    return parser


_OVERRIDE_KEYS = tuple(wf.CONFIG_DEFAULTS)


def _config_from_args(args: argparse.Namespace) -> dict:
    overrides = {k: getattr(args, k) for k in _OVERRIDE_KEYS if hasattr(args, k)}
    return wf.parse_config(getattr(args, "config", None), overrides)


def _resolve_run_dir(args: argparse.Namespace, cfg: dict | None = None) -> Path:
    run_dir = getattr(args, "run_dir", None)
    if run_dir:
        return Path(run_dir)
    name = getattr(args, "run_name", None)
    if not name:
        if cfg is None or not cfg["spec"]:
            raise UsageError("need --run-name or --run-dir (or --spec) to "
                             "locate the run")
        name = wf.run_name_for(cfg)
    return wf.output_root() / name


def _do_pretrain(args, cfg) -> Path:
    run_dir = _resolve_run_dir(args, cfg)
    ck = wf.run_pretrain_workflow(cfg, run_dir, resume=args.resume)
    print(f"pretrained {cfg['spec']} with {cfg['objective']} to step {ck.step}")
    print(f"checkpoint {run_dir / wf.CHECKPOINT_FILE} ({ck.checkpoint_id})")
    return run_dir


def _do_transfer(args, cfg) -> Path:
    run_dir = _resolve_run_dir(args, cfg)
    metrics = wf.run_transfer_workflow(cfg, run_dir,
                                       checkpoint_path=getattr(args, "checkpoint", None))
    for metric, value in metrics.items():
        print(f"{metric}: {value:.2f}")
    return run_dir


def _do_report(run_dir: Path) -> None:
    print(wf.run_report_workflow(run_dir), end="")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"dapt: error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:        # --help / --version
        return int(e.code or 0)

    try:
        if args.verb == "report":
            run_dir = _resolve_run_dir(args)
            _do_report(run_dir)
            return 0
        cfg = _config_from_args(args)
        if args.verb == "pretrain":
            _do_pretrain(args, cfg)
        elif args.verb == "transfer":
            _do_transfer(args, cfg)
        elif args.verb == "all":
            run_dir = _do_pretrain(args, cfg)
            wf.run_transfer_workflow(cfg, run_dir)
            _do_report(run_dir)
        return 0
    except (UsageError, ValueError, FileNotFoundError) as e:
        print(f"dapt: error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001  - runtime failures map to exit 2
        print(f"dapt: runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
