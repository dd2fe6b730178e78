"""End-to-end runs: phantom -> leads -> measurements -> curls -> currents -> ln(sigma)."""

import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
import polars as pl
from pydantic import BaseModel, ConfigDict

from ..core.enums import Face, PhantomKind
from ..core.fields import ScalarField3, VectorField3
from ..core.measurements import MeasurementSet
from ..core.models import (
    CurrentRecoveryReport,
    ForwardEMReport,
    InversionReport,
    PhantomSpec,
    PipelineConfig,
)
from ..core.store import ArtifactStore
from ..stages.acoustic_synth import AcousticSynthStage
from ..stages.conductivity_recovery import ConductivityRecoveryStage
from ..stages.current_recovery import CurrentRecoveryStage
from ..stages.forward_em import ForwardEMStage, LeadSystem
from ..stages.tat_inversion import TATInversionStage
from .exports import LineSpec, PlaneSpec, export_slice, profile_values
from .metrics import ReconstructionMetrics, metrics, relative_error
from .phantoms import make_phantom

logger = logging.getLogger(__name__)

RECONSTRUCTION_STAGES = ("tat_inversion", "current_recovery", "conductivity_recovery")


class Reconstruction(BaseModel):
    """Outputs of the three reconstruction stages for one measurement set."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    curls: list[VectorField3]
    currents: list[VectorField3]
    log_sigma: ScalarField3
    inversion: InversionReport
    current_reports: list[CurrentRecoveryReport]
    gradient_summary: dict
    timings: dict[str, float]

    @property
    def elapsed(self) -> float:
        return sum(self.timings[name] for name in RECONSTRUCTION_STAGES)


class PipelineResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    truth: ScalarField3
    lead: LeadSystem
    forward: ForwardEMReport
    measurements: MeasurementSet
    clean_measurements: MeasurementSet
    reconstruction: Reconstruction
    metrics: ReconstructionMetrics
    curl_errors: dict[str, float]
    current_errors: dict[str, float]
    out_dir: Optional[Path] = None

    @property
    def log_sigma(self) -> ScalarField3:
        return self.reconstruction.log_sigma


def reconstruct(data: MeasurementSet, config: PipelineConfig) -> Reconstruction:
    """Run time reversal, current recovery and conductivity recovery."""
    tat = TATInversionStage(config)
    curls = tat.process(data)
    current = CurrentRecoveryStage(config)
    currents = current.process(curls)
    conductivity = ConductivityRecoveryStage(config)
    log_sigma = conductivity.process((currents, curls))
    return Reconstruction(
        curls=curls,
        currents=currents,
        log_sigma=log_sigma,
        inversion=tat.report,
        current_reports=current.reports,
        gradient_summary=conductivity.report.summary(),
        timings={stage.name: stage.elapsed for stage in (tat, current, conductivity)},
    )


def save_reconstruction(store: ArtifactStore, result: Reconstruction) -> None:
    for k, (c, j) in enumerate(zip(result.curls, result.currents), start=1):
        store.save_vector_field(c, f"reconstruction/curl_k{k}")
        store.save_vector_field(j, f"reconstruction/current_k{k}")
    store.save_field(result.log_sigma, "reconstruction/log_sigma")
    store.save_json(result.inversion, "reports/tat_inversion")
    store.save_json(
        [r.model_dump(mode="json") for r in result.current_reports], "reports/current_recovery"
    )
    store.save_json(result.gradient_summary, "reports/conductivity_recovery")
    for name, seconds in result.timings.items():
        store.add_timing(name, seconds)
    store.add_timing("reconstruction", result.elapsed)


def _face_point_index(m: int, face: Face, point: tuple[float, float, float]) -> int:
    a, b = face.tangential_axes
    ia = int(round(point[a] * (m - 1)))
    ib = int(round(point[b] * (m - 1)))
    return ia * m + ib


def measurement_profile(
    clean: MeasurementSet,
    noisy: Optional[MeasurementSet] = None,
    k: int = 1,
    j: int = 3,
    point: tuple[float, float, float] = (1.0, 0.5, 0.5),
) -> pl.DataFrame:
    """Time series of M_{I_k, B^(j)} at the face node nearest to `point`."""
    axis = next((a for a in range(3) if point[a] in (0.0, 1.0)), None)
    if axis is None:
        raise ValueError(f"Point {point} does not lie on the boundary")
    face = Face(2 * axis + int(point[axis]))
    index = _face_point_index(clean.m, face, point)
    columns = {"t": clean.times, "clean": clean.family(k, j)[face.value, index]}
    if noisy is not None:
        columns["noisy"] = noisy.family(k, j)[face.value, index]
    return pl.DataFrame(columns)


def curl_profile(
    recon: VectorField3, truth: VectorField3, component: int = 2
) -> pl.DataFrame:
    """One curl component along the line x2 = x3 = 0.5."""
    line = LineSpec(axis=0, fixed={1: 0.5, 2: 0.5})
    x, recovered = profile_values(recon[component], line)
    _, exact = profile_values(truth[component], line)
    return pl.DataFrame({"x1": x, "exact": exact, "recovered": recovered})


def _figure_plane(spec: PhantomSpec) -> tuple[PlaneSpec, LineSpec]:
    if spec.kind is PhantomKind.SMOOTHED_BALLS:
        return PlaneSpec(axis=2, position=0.25), LineSpec(axis=1, fixed={0: 0.25, 2: 0.25})
    return PlaneSpec(axis=2, position=0.5), LineSpec(axis=1, fixed={0: 0.25, 2: 0.5})


def save_figures(
    store: ArtifactStore, spec: PhantomSpec, truth: ScalarField3, recon: ScalarField3
) -> None:
    """Slices of truth and reconstruction on a shared gray scale, plus a line profile."""
    plane, line = _figure_plane(spec)
    lo = float(min(truth.values.min(), recon.values.min()))
    hi = float(max(truth.values.max(), recon.values.max()))
    for name, field in (("truth", truth), ("reconstruction", recon)):
        for path in export_slice(
            field, plane, store.path_for(f"figures/slice_{name}.png"), value_range=(lo, hi)
        ):
            store.record(path, "figure")
    x, exact = profile_values(truth, line)
    _, recovered = profile_values(recon, line)
    coordinate = f"x{line.axis + 1}"
    store.save_table(
        pl.DataFrame({coordinate: x, "phantom": exact, "recovered": recovered}),
        "figures/profile_log_sigma",
    )


def run_pipeline(
    spec: PhantomSpec,
    config: PipelineConfig,
    out_dir: Optional[Union[str, Path]] = None,
) -> PipelineResult:
    """Synthesize data for `spec` and reconstruct ln(sigma) from it.

    With `out_dir` every intermediate field, the measurement sets,
    reports, metrics, figures and a hashed manifest are written there.
    """
    logger.info(f"Pipeline: {spec.kind.value} phantom, n={config.n}, noise {config.noise_level}")
    conductivity, truth = make_phantom(spec, config.n)
    store = None
    if out_dir is not None:
        store = ArtifactStore(
            out_dir,
            config_snapshot={
                "pipeline": config.model_dump(mode="json"),
                "phantom": spec.model_dump(mode="json"),
            },
        )
        store.save_field(truth, "phantom/log_sigma")

    forward = ForwardEMStage(config)
    lead = forward.process(conductivity)
    synth = AcousticSynthStage(config)
    data = synth.process(lead)
    recon = reconstruct(data, config)

    curl_errors = {
        f"k{k}": relative_error(recon.curls[k - 1], lead.curl(k)) for k in (1, 2, 3)
    }
    current_errors = {
        f"k{k}": relative_error(recon.currents[k - 1], lead.current(k)) for k in (1, 2, 3)
    }
    scores = metrics(recon.log_sigma, truth, margin=config.margin)
    logger.info(
        f"Pipeline done: relative L2 error {scores.relative_l2:.3e}, "
        f"interior {scores.relative_l2_interior:.3e}"
    )

    if store is not None:
        for k in (1, 2, 3):
            store.save_field(lead.potentials[k - 1], f"forward/potential_k{k}")
            store.save_vector_field(lead.current(k), f"forward/current_k{k}")
            store.save_vector_field(lead.curl(k), f"forward/curl_k{k}")
        store.save_json(forward.report, "reports/forward_em")
        store.add_timing(forward.name, forward.elapsed)
        store.save_measurements(synth.clean, "measurements/clean")
        if synth.clean is not data:
            store.save_measurements(data, "measurements/noisy")
        store.add_timing(synth.name, synth.elapsed)
        save_reconstruction(store, recon)
        store.save_json(
            {
                "log_sigma": scores.model_dump(mode="json"),
                "curl_relative_l2": curl_errors,
                "current_relative_l2": current_errors,
            },
            "metrics",
            kind="metrics",
        )
        store.save_table(curl_profile(recon.curls[0], lead.curl(1)), "profiles/curl_k1_j3")
        store.save_table(
            measurement_profile(synth.clean, data if synth.clean is not data else None),
            "profiles/measurement_k1_j3",
        )
        save_figures(store, spec, truth, recon.log_sigma)
        store.write_manifest()

    return PipelineResult(
        truth=truth,
        lead=lead,
        forward=forward.report,
        measurements=data,
        clean_measurements=synth.clean,
        reconstruction=recon,
        metrics=scores,
        curl_errors=curl_errors,
        current_errors=current_errors,
        out_dir=Path(out_dir) if out_dir is not None else None,
    )


def noise_ratio(clean: PipelineResult, noisy: PipelineResult) -> float:
    """Error of the noisy run relative to the noiseless one."""
    base = clean.metrics.relative_l2_interior
    return noisy.metrics.relative_l2_interior / base if base > 0.0 else float(np.inf)


__all__ = [
    "RECONSTRUCTION_STAGES",
    "Reconstruction",
    "PipelineResult",
    "reconstruct",
    "save_reconstruction",
    "measurement_profile",
    "curl_profile",
    "save_figures",
    "run_pipeline",
    "noise_ratio",
]
