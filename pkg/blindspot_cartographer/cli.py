"""
Command-line interface
Generates blind-spot labels from sequence directories, renders synthetic scenes, evaluates
predictions, draws overlays and runs the loss and alignment self-checks.

Machine-readable key=value lines go to stdout; rich tables, logs and errors go to stderr.
Every option can also be set through a BLINDSPOT_<COMMAND>_<OPTION> environment variable.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence as Seq

import click
import numpy as np
from rich.console import Console

from .align import DEFAULT_GATE_THRESHOLD, DepthDomain, fit_alignment, gate_video
from .errors import (
    BlindSpotError, FrameCountMismatchError, GateRejectedError, GradientCheckError,
    OutputWriteError, WindowUnderflowError,
)
from .evaluation import (
    binarize, compare_with_oracle, detection2d_baseline, evaluate_frames,
    threshold_sweep,
)
from .losses import gradient_suite
from .performance import profiler
from .pipeline import PipelineParams, generate_sequence, last_processable_index, visibility_mask
from .sequence import resample_sequence
from .synthworld import oracle_blind_spots, perturb_depth, perturb_poses, resolve_scene
from .ui.colors import ReportColors, colorize_labels
from .ui.report import alignment_table, gradient_table, metric_table, oracle_table, profile_table
from .utils.log import configure_logging, get_logger
from .utils.overlay import load_base_image, write_overlay
from .utils.sequence_io import (
    BLINDSPOT_DIR, VISIBILITY_DIR, frame_name, load_sequence, mask_frames, read_landmarks,
    read_mask, read_probability, save_outputs, save_sequence, write_mask,
)

logger = get_logger(__name__)

CONTEXT_SETTINGS = {"auto_envvar_prefix": "BLINDSPOT", "help_option_names": ["-h", "--help"]}
PROFILE_ROWS = 10


@dataclass
class CliState:
    console: Console
    verbosity: int = 0
    profile: bool = False


class BlindSpotGroup(click.Group):
    """Turns BlindSpotError into a red message and the error's exit code"""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except BlindSpotError as e:
            Console(stderr=True).print(f"error: {e}", style=ReportColors.ERROR, markup=False)
            logger.debug("command failed", exc_info=True)
            ctx.exit(e.exit_code)


def _state(ctx: click.Context) -> CliState:
    return ctx.find_object(CliState)


def _echo_lines(lines: Seq[str]) -> None:
    for line in lines:
        click.echo(line)


def _write_json(path: Path, payload) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n")
    except OSError as e:
        raise OutputWriteError(path, e) from e


def _print_profile(state: CliState) -> None:
    slowest = profiler.get_slowest_functions(PROFILE_ROWS)
    if slowest:
        state.console.print(profile_table(slowest))


@click.group(cls=BlindSpotGroup, context_settings=CONTEXT_SETTINGS)
@click.option("-v", "--verbose", count=True, help="-v for progress, -vv for debug output.")
@click.option("--profile", is_flag=True, help="Print a timing table when the command ends.")
@click.pass_context
def cli(ctx: click.Context, verbose: int, profile: bool):
    """Blind-spot label generation for driving sequences."""
    console = Console(stderr=True)
    configure_logging(verbose, console)
    state = CliState(console=console, verbosity=verbose, profile=profile)
    ctx.obj = state
    if profile:
        profiler.reset()
        ctx.call_on_close(lambda: _print_profile(state))


PATH = click.Path(path_type=Path)


@cli.command()
@click.argument("sequence_dir", type=PATH)
@click.argument("out_dir", type=PATH)
@click.option("--t-seconds", default=5.0, show_default=True, help="Look-ahead window in seconds.")
@click.option("--fps", default=5.0, show_default=True, help="Processing frame rate; slower sequences are rejected, faster ones resampled.")
@click.option("--l-d", "l_d", default=1.0, show_default=True, help="Depth agreement tolerance in metres.")
@click.option("--min-area", default=100, show_default=True, help="Smallest kept component in pixels.")
@click.option("--vis-distance", default=16.0, show_default=True, help="Visibility distance L in metres.")
@click.option("--jobs", default=1, show_default=True, type=click.IntRange(min=1), help="Worker threads.")
@click.option("--debug-rasters", is_flag=True, help="Also write aggregated surface, raw blind spots and aggregated depth.")
@click.option("--no-rectify", is_flag=True, help="Skip depth rectification.")
@click.option("--keep-sky", is_flag=True, help="Keep blind-spot pixels labelled sky.")
@click.option("--full-footprint", is_flag=True, help="Count every pixel of the 2x2 splat as a landing, not only the nearest.")
@click.option("--overlays", is_flag=True, help="Also write overlay images under overlay/.")
@click.pass_context
def generate(ctx, sequence_dir, out_dir, t_seconds, fps, l_d, min_area, vis_distance, jobs,
             debug_rasters, no_rectify, keep_sky, full_footprint, overlays):
    """Generate T-frame blind spots and visibility masks for a sequence."""
    params = PipelineParams(t_seconds=t_seconds, fps=fps, l_d=l_d, min_area=min_area,
                            vis_distance=vis_distance, rectify=not no_rectify,
                            suppress_sky=not keep_sky, landing_only=not full_footprint)
    seq = load_sequence(sequence_dir)
    seq = resample_sequence(seq, fps)
    last = last_processable_index(seq, params)
    if last < 0:
        raise WindowUnderflowError(0, params.window, last)

    written = 0
    with profiler.measure("cli.generate"):
        for result in generate_sequence(seq, params, jobs=jobs):
            save_outputs(result, out_dir, debug=debug_rasters)
            if overlays:
                frame = seq[result.frame]
                base = frame.rgb if frame.rgb is not None else colorize_labels(frame.semantic)
                write_overlay(out_dir / "overlay" / frame_name(result.frame), base,
                              result.omega, result.visibility)
            written += 1

    _echo_lines([
        f"window={params.window}",
        f"frames_written={written}",
        f"frames_skipped={len(seq) - written}",
        f"last_index={last}",
    ])


@cli.command("synth-gen")
@click.argument("scene")
@click.argument("out_dir", type=PATH)
@click.option("--oracle-window", type=click.IntRange(min=1), default=None,
              help="Also write ray-cast T-frame blind spots for this window under oracle/.")
@click.option("--vis-distance", default=16.0, show_default=True,
              help="Visibility distance for the oracle visibility masks.")
@click.pass_context
def synth_gen(ctx, scene, out_dir, oracle_window, vis_distance):
    """Render a synthetic scene (sample name or TOML file) to a sequence directory."""
    world = resolve_scene(scene)
    seq = world.to_sequence()
    save_sequence(seq, out_dir)
    lines = [f"scene={world.name}", f"frames={len(seq)}"]

    if oracle_window is not None:
        last = len(seq) - 1 - oracle_window
        if last < 0:
            raise WindowUnderflowError(0, oracle_window, last)
        for t in range(last + 1):
            oracle = oracle_blind_spots(world, t, oracle_window)
            frame = seq[t]
            visible = visibility_mask(frame.semantic, frame.depth, seq.K, seq.labels, vis_distance)
            write_mask(out_dir / "oracle" / BLINDSPOT_DIR / frame_name(t), oracle.tframe_blind)
            write_mask(out_dir / "oracle" / VISIBILITY_DIR / frame_name(t), visible)
        lines.append(f"oracle_frames={last + 1}")
    _echo_lines(lines)


def _read_predictions(pred_dir: Path, frames: List[int], probabilities: bool) -> List[np.ndarray]:
    root = pred_dir / BLINDSPOT_DIR if (pred_dir / BLINDSPOT_DIR).is_dir() else pred_dir
    files = mask_frames(root, "*")
    missing = [f for f in frames if f not in files]
    if missing:
        raise FrameCountMismatchError(
            f"no prediction for frame(s) {', '.join(map(str, missing[:5]))}", root
        )
    reader = read_probability if probabilities else read_mask
    return [reader(files[f]) for f in frames]


@cli.command()
@click.argument("pred_dir", type=PATH)
@click.argument("gt_dir", type=PATH)
@click.option("--threshold", type=click.FloatRange(0, 1, min_open=True, max_open=True),
              default=None, help="Binarize probability maps at this threshold.")
@click.option("--sweep", is_flag=True, help="Pick the best threshold on a 0.1..0.9 grid.")
@click.option("--report", "report_path", type=PATH, default=None, help="Write the report as JSON.")
@click.option("--sparse-gt", is_flag=True, help="Ground truth is sparse; precision is not applicable.")
@click.option("--baseline", type=click.Choice(["detection2d"]), default=None,
              help="Score a baseline instead of PRED_DIR contents; its masks are written to PRED_DIR.")
@click.option("--sequence", "sequence_dir", type=PATH, default=None,
              help="Sequence directory the baseline reads semantic maps from.")
@click.pass_context
def evaluate(ctx, pred_dir, gt_dir, threshold, sweep, report_path, sparse_gt, baseline,
             sequence_dir):
    """Score predicted blind spots against ground truth inside the visibility masks."""
    if threshold is not None and sweep:
        raise click.UsageError("--threshold and --sweep are mutually exclusive")
    if baseline and sequence_dir is None:
        raise click.UsageError("--baseline needs --sequence")
    if baseline and (threshold is not None or sweep):
        raise click.UsageError("--baseline produces masks; drop --threshold/--sweep")

    gt_files = mask_frames(gt_dir / BLINDSPOT_DIR)
    vis_files = mask_frames(gt_dir / VISIBILITY_DIR)
    if sorted(gt_files) != sorted(vis_files):
        raise FrameCountMismatchError(
            f"{len(gt_files)} blind-spot masks but {len(vis_files)} visibility masks", gt_dir
        )
    frames = sorted(gt_files)
    if not frames:
        raise FrameCountMismatchError("no ground-truth frames", gt_dir / BLINDSPOT_DIR)
    gts = [read_mask(gt_files[f]) for f in frames]
    visibilities = [read_mask(vis_files[f]) for f in frames]

    if baseline:
        seq = load_sequence(sequence_dir)
        if frames[-1] >= len(seq):
            raise FrameCountMismatchError(
                f"ground truth has frame {frames[-1]}, sequence has {len(seq)} frames", sequence_dir
            )
        preds = []
        for f in frames:
            pred = detection2d_baseline(seq[f].semantic, seq.labels.obstacle_ids, seq.labels)
            write_mask(pred_dir / BLINDSPOT_DIR / frame_name(f), pred)
            preds.append(pred)
        report = evaluate_frames(preds, gts, visibilities, sparse_gt)
    elif sweep:
        probs = _read_predictions(pred_dir, frames, probabilities=True)
        _, report = threshold_sweep(probs, gts, visibilities, sparse_gt=sparse_gt)
    elif threshold is not None:
        probs = _read_predictions(pred_dir, frames, probabilities=True)
        preds = [binarize(p, threshold) for p in probs]
        report = evaluate_frames(preds, gts, visibilities, sparse_gt, threshold)
    else:
        preds = _read_predictions(pred_dir, frames, probabilities=False)
        report = evaluate_frames(preds, gts, visibilities, sparse_gt)

    _state(ctx).console.print(metric_table(report))
    _echo_lines(report.to_lines())
    if report_path is not None:
        _write_json(report_path, report.to_dict())


@cli.command()
@click.argument("result_dir", type=PATH)
@click.argument("out_dir", type=PATH)
@click.option("--sequence", "sequence_dir", type=PATH, default=None,
              help="Sequence whose RGB (or label colours) forms the base image.")
@click.option("--base", "base_dir", type=PATH, default=None,
              help="Directory of per-frame base images (000000.png, ...) used instead of a sequence.")
@click.pass_context
def overlay(ctx, result_dir, out_dir, sequence_dir, base_dir):
    """Draw blind spots and hidden regions over the frames of a result directory."""
    if sequence_dir is not None and base_dir is not None:
        raise click.UsageError("--sequence and --base are mutually exclusive")
    blind = mask_frames(result_dir / BLINDSPOT_DIR)
    vis_dir = result_dir / VISIBILITY_DIR
    visible = mask_frames(vis_dir) if vis_dir.is_dir() else {}
    seq = load_sequence(sequence_dir) if sequence_dir is not None else None

    for f in sorted(blind):
        omega = read_mask(blind[f])
        v = read_mask(visible[f]) if f in visible else np.ones_like(omega)
        if seq is not None and f < len(seq):
            frame = seq[f]
            base = frame.rgb if frame.rgb is not None else colorize_labels(frame.semantic)
        elif base_dir is not None:
            base = load_base_image(base_dir / frame_name(f), omega.shape)
        else:
            base = load_base_image(None, omega.shape)
        write_overlay(out_dir / frame_name(f), base, omega, v)
    _echo_lines([f"overlays={len(blind)}"])


@cli.command("losses-check")
@click.option("--instances", default=20, show_default=True, type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True)
@click.pass_context
def losses_check(ctx, instances, seed):
    """Compare analytic loss gradients with central finite differences."""
    with profiler.measure("cli.losses_check"):
        checks = gradient_suite(instances=instances, seed=seed)
    failed = [c for c in checks if not c.passed]
    _state(ctx).console.print(gradient_table(checks))
    _echo_lines([
        f"checks={len(checks)}",
        f"failed={len(failed)}",
        f"max_rel_error={max(c.max_rel_error for c in checks):.3e}",
    ])
    if failed:
        worst = max(failed, key=lambda c: c.max_rel_error)
        raise GradientCheckError(
            f"{len(failed)} gradient check(s) failed; worst {worst.loss} instance "
            f"{worst.instance} with relative error {worst.max_rel_error:.3e}"
        )


@cli.command("align-fit")
@click.argument("landmarks", type=PATH)
@click.option("--domain", type=click.Choice([d.value for d in DepthDomain]),
              default=DepthDomain.INVERSE_DEPTH.value, show_default=True)
@click.option("--no-shift", is_flag=True, help="Fit scale only.")
@click.option("--threshold", default=DEFAULT_GATE_THRESHOLD, show_default=True,
              help="Minimum correlation to keep the video.")
@click.option("--fail-on-reject", is_flag=True, help="Exit non-zero when the gate rejects.")
@click.option("--report", "report_path", type=PATH, default=None, help="Write the fit as JSON.")
@click.pass_context
def align_fit(ctx, landmarks, domain, no_shift, threshold, fail_on_reject, report_path):
    """Fit monocular depth to SLAM landmarks and apply the correlation gate."""
    samples = read_landmarks(landmarks)
    fit = fit_alignment(samples, DepthDomain(domain), fit_shift=not no_shift)
    accepted = gate_video(fit, threshold)
    logger.info("gate %s video (r=%.4f, threshold %.2f)",
                "accepts" if accepted else "rejects", fit.pearson_r, threshold)

    _state(ctx).console.print(alignment_table(fit, accepted, threshold))
    payload = dict(fit.to_dict(), threshold=threshold, accepted=accepted)
    _echo_lines([
        f"scale={fit.scale:.12g}",
        f"shift={fit.shift:.12g}",
        f"pearson_r={fit.pearson_r:.12g}",
        f"n={fit.n}",
        f"domain={fit.domain.value}",
        f"decision={'accept' if accepted else 'reject'}",
    ])
    if report_path is not None:
        _write_json(report_path, payload)
    if fail_on_reject and not accepted:
        raise GateRejectedError(
            f"correlation {fit.pearson_r:.4f} is below the gate threshold {threshold:g}"
        )


@cli.command("oracle-eval")
@click.argument("scene")
@click.option("--window", "windows", multiple=True, type=click.IntRange(min=1),
              default=(25,), show_default=True, help="Window length in frames; repeatable.")
@click.option("--pose-noise", default=0.0, show_default=True, help="Position noise std in metres.")
@click.option("--depth-noise", default=0.0, show_default=True, help="Relative depth noise std.")
@click.option("--seed", default=0, show_default=True)
@click.option("--l-d", "l_d", default=1.0, show_default=True)
@click.option("--min-area", default=1, show_default=True)
@click.option("--vis-distance", default=16.0, show_default=True)
@click.option("--no-rectify", is_flag=True)
@click.option("--full-footprint", is_flag=True, help="Count every pixel of the 2x2 splat as a landing.")
@click.option("--report", "report_path", type=PATH, default=None, help="Write the rows as JSON.")
@click.pass_context
def oracle_eval(ctx, scene, windows, pose_noise, depth_noise, seed, l_d, min_area,
                vis_distance, no_rectify, full_footprint, report_path):
    """Score generated blind spots of a synthetic scene against its ray-cast oracle."""
    world = resolve_scene(scene)
    seq = world.to_sequence()
    if pose_noise > 0:
        seq = perturb_poses(seq, pose_noise, seed)
    if depth_noise > 0:
        seq = perturb_depth(seq, depth_noise, seed)

    rows: List[Dict[str, float]] = []
    with profiler.measure("cli.oracle_eval"):
        for window in windows:
            params = PipelineParams.with_window(
                window, fps=world.fps, l_d=l_d, min_area=min_area, vis_distance=vis_distance,
                rectify=not no_rectify, landing_only=not full_footprint,
            )
            rows.append(compare_with_oracle(world, params, seq=seq).to_dict())

    _state(ctx).console.print(oracle_table(rows))
    for row in rows:
        click.echo(" ".join(
            f"{key}={value}" if isinstance(value, int) else f"{key}={value:.6f}"
            for key, value in row.items()
        ))
    if report_path is not None:
        _write_json(report_path, {"scene": world.name, "rows": rows})
