"""Command-line entry points.

Exit codes: 0 success, 1 invalid input (bad arguments, failed validation,
missing files), 2 unexpected runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import simulate as sim
from . import synth
from .session import Session
from .store import StoreError, ingest, load_annotation_file, load_project, write_annotation_file

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; bad user input is 1 in our scheme."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="avloop", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("ingest", help="validate a project directory and write its manifest")
    p.add_argument("directory", type=Path)
    p.add_argument("--name", help="project name (default: directory name)")

    p = commands.add_parser("synth", help="generate a synthetic project with ground truth")
    p.add_argument("directory", type=Path)
    p.add_argument("--frames", type=int, default=80)
    p.add_argument("--changes", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--miss-rate", type=float, default=0.0)
    p.add_argument("--spurious-rate", type=float, default=0.0)
    p.add_argument("--name")

    p = commands.add_parser("simulate", help="run the scripted annotator over a project")
    p.add_argument("directory", type=Path)
    p.add_argument("--policy", choices=("perfect", "noisy"), default="perfect")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter", type=float, default=2.0, help="box jitter sigma (noisy only)")
    p.add_argument("--wrong-pick", type=float, default=0.05,
                   help="wrong detection probability (noisy only)")
    p.add_argument("--manual", action="store_true",
                   help="hand-annotate every frame; no scheduling assistance")
    p.add_argument("--export", type=Path, help="write the session export here")

    p = commands.add_parser("evaluate", help="score a session against reference annotations")
    p.add_argument("session", type=Path, help="path to sessions/<id> directory")
    p.add_argument("--truth", type=Path,
                   help="export-shaped reference (default: project ground_truth.json)")

    p = commands.add_parser("export", help="print a session's annotations as JSON")
    p.add_argument("session", type=Path, help="path to sessions/<id> directory")
    p.add_argument("--out", type=Path, help="write to file instead of stdout")

    p = commands.add_parser("serve", help="run the HTTP API")
    p.add_argument("directory", type=Path, help="data directory containing projects")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default="127.0.0.1")

    return parser


def _open_session_path(path: Path) -> Session:
    path = path.resolve()
    if not (path / "session.json").is_file():
        raise StoreError(f"not a session directory (no session.json): {path}")
    project = load_project(path.parent.parent)
    return Session.open(project, path.name)


def _cmd_ingest(args) -> int:
    project = ingest(args.directory, name=args.name)
    m = project.manifest
    print(f"ok: {m.name}: {m.n_frames} frames @ {m.fps} fps, "
          f"{m.frame_width}x{m.frame_height}")
    return 0


def _cmd_synth(args) -> int:
    project = synth.synthesize(
        args.directory, n_frames=args.frames, changes=args.changes, seed=args.seed,
        miss_rate=args.miss_rate, spurious_rate=args.spurious_rate, name=args.name,
    )
    print(f"ok: wrote {project.manifest.n_frames} frames to {args.directory}")
    return 0


def _cmd_simulate(args) -> int:
    project = load_project(args.directory)
    if args.policy == "noisy":
        policy = sim.SimPolicy.noisy(args.jitter, args.wrong_pick, args.seed)
    else:
        policy = sim.SimPolicy(seed=args.seed)
    report = sim.run_simulation(project, policy, manual=args.manual)
    session = Session.open(project, report.session_id)
    print(f"session {report.session_id}: {report.steps} steps, "
          f"{report.human_frames} human frames")
    print(session.stats().text_table())
    if args.export:
        write_annotation_file(args.export, report.export)
        print(f"export written to {args.export}")
    return 0


def _cmd_evaluate(args) -> int:
    session = _open_session_path(args.session)
    truth = (load_annotation_file(args.truth) if args.truth
             else session.project.ground_truth())
    if truth is None:
        raise StoreError("no reference annotations: pass --truth or add ground_truth.json")
    from .evaluation import compute_session_stats

    stats = compute_session_stats(
        session.state.status, session.state.annotations,
        session.project.dims, truth,
        mean_seconds_per_human_frame=session._mean_human_seconds(),
    )
    print(stats.text_table())
    return 0


def _cmd_export(args) -> int:
    session = _open_session_path(args.session)
    if args.out:
        session.export_to(args.out)
        print(f"export written to {args.out}")
    else:
        json.dump(session.export(), sys.stdout, indent=2, sort_keys=True)
        print()
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    serve(data_dir=args.directory, port=args.port, host=args.host)
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "synth": _cmd_synth,
    "simulate": _cmd_simulate,
    "evaluate": _cmd_evaluate,
    "export": _cmd_export,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return _COMMANDS[args.command](args)
    except (StoreError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # pragma: no cover - last-resort diagnostics
        logger.exception("unexpected failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
