import json
import logging
import os
from functools import wraps
from pathlib import Path
from typing import Optional

import click
from dotenv import load_dotenv

from maet import (
    AcousticSynthStage,
    ArtifactStore,
    ForwardEMStage,
    MeasurementSet,
    PhantomKind,
    PhantomSpec,
    PipelineConfig,
    add_noise,
    export_profile,
    export_slice,
    make_phantom,
    metrics,
    read_field,
    read_vector_field,
    reconstruct,
    run_pipeline,
    save_reconstruction,
)

logger = logging.getLogger("maet")

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


def default_out_dir() -> Path:
    return Path(os.environ.get("MAET_OUT_DIR", "maet-out"))


def load_config(
    config_path: Optional[str],
    grid: Optional[int] = None,
    seed: Optional[int] = None,
    noise_level: Optional[float] = None,
) -> PipelineConfig:
    """Config file (or defaults) with the command-line flags applied on top."""
    config = PipelineConfig.from_file(config_path) if config_path else PipelineConfig()
    return config.with_overrides(n=grid, seed=seed, noise_level=noise_level)


def load_spec(kind: str, spec_path: Optional[str]) -> PhantomSpec:
    if spec_path:
        return PhantomSpec.model_validate_json(Path(spec_path).read_text())
    return PhantomSpec.default_for(kind)


def config_options(command):
    """--config, --grid, --seed, --noise-level and --out-dir."""
    options = [
        click.option(
            "--config",
            "config_path",
            type=click.Path(exists=True, dir_okay=False),
            help="Pipeline config (JSON or TOML)",
        ),
        click.option("--grid", type=click.IntRange(min=5), help="Volume grid size n"),
        click.option("--seed", type=int, help="Noise seed"),
        click.option("--noise-level", type=click.FloatRange(min=0.0), help="Relative L2 noise"),
        click.option("--out-dir", type=click.Path(file_okay=False), help="Output directory"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def reports_errors(command):
    """Turn any failure into a ClickException so the exit status is non-zero."""

    @wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except click.ClickException:
            raise
        except Exception as e:
            logger.debug("Command failed", exc_info=True)
            raise click.ClickException(str(e)) from e

    return wrapper


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
def main(verbose: bool):
    """MAET workbench - simulate and invert magneto-acousto-electric data on the unit cube"""
    load_dotenv()
    level = "DEBUG" if verbose else os.environ.get("MAET_LOG_LEVEL", "WARNING")
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, force=True)


@main.command()
@click.option(
    "--kind",
    type=click.Choice([k.value for k in PhantomKind]),
    default=PhantomKind.SMOOTH_BUMPS.value,
    help="Phantom family (default: smooth-bumps)",
)
@click.option("--spec", "spec_path", type=click.Path(exists=True), help="PhantomSpec JSON")
@config_options
@reports_errors
def phantom(kind, spec_path, config_path, grid, seed, noise_level, out_dir):
    """Write the ln(sigma) field of a phantom"""
    config = load_config(config_path, grid, seed, noise_level)
    spec = load_spec(kind, spec_path)
    _, log_sigma = make_phantom(spec, config.n)
    store = ArtifactStore(out_dir or default_out_dir(), {"phantom": spec.model_dump(mode="json")})
    path = store.save_field(log_sigma, "log_sigma")
    store.write_manifest()
    click.echo(f"Wrote {spec.kind.value} phantom (n={config.n}) to {path}")


@main.command()
@click.argument("log_sigma", type=click.Path(exists=True, dir_okay=False))
@config_options
@reports_errors
def forward(log_sigma, config_path, grid, seed, noise_level, out_dir):
    """Solve the three lead problems for a ln(sigma) field file"""
    field = read_field(log_sigma)
    config = load_config(config_path, grid or field.n, seed, noise_level)
    stage = ForwardEMStage(config)
    lead = stage.process(field)
    store = ArtifactStore(out_dir or default_out_dir(), config.model_dump(mode="json"))
    for k in (1, 2, 3):
        store.save_field(lead.potentials[k - 1], f"potential_k{k}")
        store.save_vector_field(lead.current(k), f"current_k{k}")
        store.save_vector_field(lead.curl(k), f"curl_k{k}")
    store.save_json(stage.report, "forward_em")
    store.add_timing(stage.name, stage.elapsed)
    store.write_manifest()
    for r in stage.report.leads:
        click.echo(f"Lead k={r.k}: {r.iterations} CG iterations, residual {r.residual:.2e}")
    click.echo(f"Wrote potentials, currents and curls to {store.root}")


@main.command()
@click.argument("forward_dir", type=click.Path(exists=True, file_okay=False))
@config_options
@reports_errors
def synthesize(forward_dir, config_path, grid, seed, noise_level, out_dir):
    """Synthesize boundary measurements from the curls in FORWARD_DIR"""
    curls = [read_vector_field(Path(forward_dir) / f"curl_k{k}") for k in (1, 2, 3)]
    config = load_config(config_path, grid or curls[0].n, seed, noise_level)
    stage = AcousticSynthStage(config)
    data = stage.process(curls)
    target = Path(out_dir) if out_dir else default_out_dir() / "measurements"
    data.save(target)
    click.echo(
        f"Wrote 9 x 6 x {data.m}^2 series of {data.n_t} samples "
        f"(noise {config.noise_level}) to {target}"
    )


@main.command()
@click.argument("measurements", type=click.Path(exists=True, file_okay=False))
@click.option("--noise-level", type=click.FloatRange(min=0.0), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@reports_errors
def noise(measurements, noise_level, seed, out_dir):
    """Add per-series L2-scaled uniform noise to a measurement set"""
    data = add_noise(MeasurementSet.load(measurements), noise_level, seed)
    data.save(out_dir)
    click.echo(f"Wrote noisy measurements (level {noise_level}, seed {seed}) to {out_dir}")


@main.command("reconstruct")
@click.argument("measurements", type=click.Path(exists=True, file_okay=False))
@click.option("--two-directions", is_flag=True, help="Use only B(1), B(2) and complete the curls")
@config_options
@reports_errors
def reconstruct_command(
    measurements, two_directions, config_path, grid, seed, noise_level, out_dir
):
    """Recover ln(sigma) from a measurement set"""
    data = MeasurementSet.load(measurements)
    config = load_config(config_path, grid or data.metadata.n, seed, noise_level)
    if two_directions:
        config = config.with_overrides(two_directions=True)
    result = reconstruct(data, config)
    store = ArtifactStore(out_dir or default_out_dir(), config.model_dump(mode="json"))
    save_reconstruction(store, result)
    store.write_manifest()
    click.echo(f"Reconstruction took {result.elapsed:.2f}s; results in {store.root}")


@main.command()
@click.option(
    "--phantom",
    "kind",
    type=click.Choice([k.value for k in PhantomKind]),
    default=PhantomKind.SMOOTH_BUMPS.value,
    help="Phantom family (default: smooth-bumps)",
)
@click.option("--spec", "spec_path", type=click.Path(exists=True), help="PhantomSpec JSON")
@config_options
@reports_errors
def pipeline(kind, spec_path, config_path, grid, seed, noise_level, out_dir):
    """Run phantom -> measurements -> reconstruction and report the errors"""
    config = load_config(config_path, grid, seed, noise_level)
    spec = load_spec(kind, spec_path)
    result = run_pipeline(spec, config, out_dir or default_out_dir())
    click.echo(f"Relative L2 error: {result.metrics.relative_l2:.4e}")
    click.echo(f"Relative L2 error over the interior: {result.metrics.relative_l2_interior:.4e}")
    click.echo(f"Max abs error: {result.metrics.max_abs:.4e}")
    for k, value in result.curl_errors.items():
        click.echo(f"Curl {k} relative error: {value:.4e}")
    click.echo(f"Artifacts and manifest in {result.out_dir}")


@main.command("metrics")
@click.argument("recon", type=click.Path(exists=True, dir_okay=False))
@click.argument("truth", type=click.Path(exists=True, dir_okay=False))
@click.option("--margin", type=click.FloatRange(0.0, 0.5), default=0.1, show_default=True)
@reports_errors
def metrics_command(recon, truth, margin):
    """Compare two field files"""
    scores = metrics(read_field(recon), read_field(truth), margin=margin)
    click.echo(json.dumps(scores.model_dump(mode="json"), indent=2))


@main.command("slice")
@click.argument("field", type=click.Path(exists=True, dir_okay=False))
@click.option("--plane", default="x3=0.5", show_default=True, help="Plane such as x3=0.5")
@click.option(
    "--format", "fmt", type=click.Choice(["png", "csv"]), default="png", show_default=True
)
@click.option("--vmin", type=float, help="Value mapped to black")
@click.option("--vmax", type=float, help="Value mapped to white")
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@reports_errors
def slice_command(field, plane, fmt, vmin, vmax, output):
    """Export a planar section of a field file"""
    value_range = None
    if vmin is not None or vmax is not None:
        if vmin is None or vmax is None:
            raise click.UsageError("--vmin and --vmax must be given together")
        value_range = (vmin, vmax)
    paths = export_slice(read_field(field), plane, output, fmt=fmt, value_range=value_range)
    click.echo(f"Wrote {', '.join(str(p) for p in paths)}")


@main.command("profile")
@click.argument("field", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--line", default="x1=0.25,x3=0.5", show_default=True, help="Line such as x1=0.25,x3=0.5"
)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@reports_errors
def profile_command(field, line, output):
    """Export a line profile of a field file as CSV"""
    path = export_profile(read_field(field), line, output)
    click.echo(f"Wrote {path}")


if __name__ == "__main__":
    main()
