import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from django.conf import settings

from apps.calibrated.services import CalibratedService
from apps.core.exceptions import ConfigError, SignScanError
from apps.oracles.services import gradient_parallelism
from apps.transform.context import TransformContext
from apps.transform.services import TransformService
from apps.uncalibrated.services import RecalibrationResult, UncalibratedService

from .constants import (
    ADIABATS_FILE,
    ENTROPY_GRID_FILE,
    PLOT_FILE,
    RECALIBRATION_FILE,
    REPORT_FILE,
    TEMPERATURE_GRID_FILE,
    Mode,
)
from .loaders import Model, effective_config
from .svg import render_levels
from .writers import (
    grid_rows,
    polylines_payload,
    write_csv,
    write_json,
)

logger = logging.getLogger(__name__)

# fraction of the domain kept clear of the edges when drawing audit points
AUDIT_MARGIN = 0.02

# fraction of the valid X~ band kept clear of its ends in the oracle comparison
BAND_MARGIN = 0.02


@dataclass
class Outcome:
    """Everything a reconstruct or recalibrate run produces"""

    model: Model
    xs: np.ndarray
    ys: np.ndarray
    S: np.ndarray
    curves: List[List[np.ndarray]]
    report: dict
    recalibration: Optional[RecalibrationResult] = None
    temperature: Optional[np.ndarray] = None

    @property
    def adiabats_document(self) -> dict:
        return {
            "mode": self.model.config.mode,
            "title": self.model.config.name,
            "domain": self.model.config.domain.model_dump(),
            "levels": polylines_payload(self.model.config.levels, self.curves),
        }


@dataclass
class CheckRow:
    invariant: str
    measured: Optional[float]
    tolerance: Optional[float]
    passed: bool
    detail: str = ""

    @property
    def status(self) -> str:
        return "pass" if self.passed else "FAIL"

    def as_dict(self) -> dict:
        return {
            "invariant": self.invariant,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "status": self.status,
        }


@dataclass
class CheckReport:
    rows: List[CheckRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    @property
    def first_failure(self) -> Optional[CheckRow]:
        return next((row for row in self.rows if not row.passed), None)

    def table(self) -> str:
        header = f"{'invariant':<28}{'measured':>14}{'tolerance':>14}  status"
        lines = [header, "-" * len(header)]
        for row in self.rows:
            measured = "-" if row.measured is None else f"{row.measured:.3e}"
            tolerance = "-" if row.tolerance is None else f"{row.tolerance:.1e}"
            lines.append(f"{row.invariant:<28}{measured:>14}{tolerance:>14}  {row.status}")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "rows": [row.as_dict() for row in self.rows]}


def _require_mode(model: Model, mode: Mode, command: str) -> None:
    if model.config.mode != mode:
        other = "reconstruct" if model.config.mode == Mode.CALIBRATED else "recalibrate"
        raise ConfigError(
            f"'{command}' needs a {mode.value} config, got mode '{model.config.mode}'; use '{other}'"
        )


def _band(valid_range: Tuple[float, float]) -> dict:
    return {"X_min": valid_range[0], "X_max": valid_range[1]}


def _audit_points(ctx: TransformContext, count: int) -> np.ndarray:
    d = ctx.domain
    rng = np.random.default_rng(settings.ADIABAT_AUDIT_SEED)
    mx, my = AUDIT_MARGIN * d.width, AUDIT_MARGIN * d.height
    xs = rng.uniform(d.x_min + mx, d.x_max - mx, count)
    ys = rng.uniform(d.y_min + my, d.y_max - my, count)
    return np.column_stack([xs, ys])


class PipelineService:
    @staticmethod
    def reconstruct(model: Model) -> Outcome:
        """Full calibrated pipeline for a config, without touching the filesystem"""
        _require_mode(model, Mode.CALIBRATED, "reconstruct")
        config = model.config
        ctx = model.context()
        entropy = CalibratedService.reconstruct(ctx, model.curves[0], config.samples)
        xs, ys, S = CalibratedService.entropy_grid(entropy, *config.grid)
        curves = CalibratedService.contour(xs, ys, S, config.levels)

        report = {
            "mode": config.mode,
            "config": effective_config(config),
            "valid_band": _band(entropy.valid_range),
            "gauge": entropy.gauge,
            "orientation": ctx.orientation.value,
            "expected_det": ctx.expected_det,
            "curve_samples": int(len(entropy.adiabat)),
            "masked_cells": int(np.count_nonzero(np.isnan(S))),
        }
        return Outcome(model=model, xs=xs, ys=ys, S=S, curves=curves, report=report)

    @staticmethod
    def recalibrate(model: Model) -> Outcome:
        """Two-adiabat recalibration for an uncalibrated config"""
        _require_mode(model, Mode.UNCALIBRATED, "recalibrate")
        config = model.config
        ctx = model.context()
        result = UncalibratedService.reconstruct(ctx, model.curves[0], model.curves[1], config.samples)
        xs, ys, S = UncalibratedService.normalized_entropy_grid(result, *config.grid)
        _, _, T = UncalibratedService.temperature_grid(result, *config.grid)
        curves = CalibratedService.contour(xs, ys, S, config.levels)

        report = {
            "mode": config.mode,
            "config": effective_config(config),
            "valid_band": _band(result.overlap),
            "gauge": result.gauge,
            "orientation": ctx.orientation.value,
            "graphs": {"f0": _band(result.f0.valid_range), "f1": _band(result.f1.valid_range)},
            "power_law": UncalibratedService.fit_power_law(result).as_dict(),
            "phi_range": [float(result.phi.values[0]), float(result.phi.values[-1])],
            "masked_cells": int(np.count_nonzero(np.isnan(S))),
        }
        return Outcome(
            model=model,
            xs=xs,
            ys=ys,
            S=S,
            curves=curves,
            report=report,
            recalibration=result,
            temperature=T,
        )

    @staticmethod
    def write(outcome: Outcome, out_dir: Path) -> List[Path]:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"Cannot create output directory {out_dir}: {e.strerror or e}")

        written = [out_dir / ENTROPY_GRID_FILE, out_dir / ADIABATS_FILE, out_dir / REPORT_FILE]
        write_csv(written[0], ("x", "y", "S"), grid_rows(outcome.xs, outcome.ys, outcome.S))
        write_json(written[1], outcome.adiabats_document)
        write_json(written[2], outcome.report)

        if outcome.recalibration is not None and outcome.temperature is not None:
            phi_path = out_dir / RECALIBRATION_FILE
            temperature_path = out_dir / TEMPERATURE_GRID_FILE
            write_csv(phi_path, ("X_tilde", "phi"), outcome.recalibration.phi_table())
            write_csv(
                temperature_path,
                ("x", "y", "T_star"),
                grid_rows(outcome.xs, outcome.ys, outcome.temperature),
            )
            written += [phi_path, temperature_path]
        return written

    @staticmethod
    def audit(model: Model) -> CheckReport:
        """
        Invariant audit: sign scan, area preservation, round trip, the gauge
        and, for fixtures with a closed form, level-curve agreement.
        """
        config = model.config
        tol = config.tolerances.audit
        report = CheckReport()
        scan_name = "f_y sign scan" if config.orientation == "y-solve" else "f_x sign scan"

        try:
            ctx = model.context()
        except SignScanError as e:
            report.rows.append(CheckRow(scan_name, None, None, False, e.message))
            return report
        # a lattice twice as fine keeps the construction nodes
        scan = TransformService.sign_scan(ctx, points=2 * config.tolerances.scan_grid - 1)
        margin = min(abs(scan.minimum), abs(scan.maximum))
        report.rows.append(CheckRow(scan_name, margin, None, scan.ok, scan.message))
        if not scan.ok:
            return report

        points = _audit_points(ctx, config.tolerances.audit_points)
        x, y = points[:, 0], points[:, 1]
        h = settings.ADIABAT_STENCIL_STEP * ctx.domain.scale

        det = ctx.jacobian_det_many(x, y, h, h)
        jacobian = float(np.max(np.abs(det * ctx.expected_det - 1.0)))
        report.rows.append(CheckRow("max |jacobian - 1|", jacobian, tol, jacobian <= tol))

        X_t, Y_t = ctx.forward_tilde_many(x, y)
        xr, yr = ctx.invert_tilde_many(X_t, Y_t)
        round_trip = float(np.max(np.maximum(np.abs(xr - x), np.abs(yr - y))))
        report.rows.append(CheckRow("max round-trip error", round_trip, tol, round_trip <= tol))

        if config.mode == Mode.CALIBRATED:
            entropy = CalibratedService.reconstruct(ctx, model.curves[0], config.samples)
            gauge = float(np.max(np.abs(entropy.evaluate_many(entropy.adiabat[:, 0], entropy.adiabat[:, 1]))))
            report.rows.append(CheckRow("max |S| on adiabat", gauge, tol, gauge <= tol))
            field_ = entropy
        else:
            field_ = UncalibratedService.reconstruct(ctx, model.curves[0], model.curves[1], config.samples)

        if model.oracle is not None and config.oracle is not None:
            oracle = model.oracle
            inner = _inside_band(field_, ctx, points, h)
            if inner.size:
                parallel = gradient_parallelism(
                    field_.evaluate_many,
                    lambda px, py: oracle.evaluate(x=px, y=py),
                    inner,
                    h=h,
                )
                limit = config.oracle.tolerance
                report.rows.append(
                    CheckRow("oracle gradient deviation", parallel, limit, parallel <= limit)
                )
        return report

    @staticmethod
    def plot(out_dir: Path) -> Path:
        source = out_dir / ADIABATS_FILE
        if not source.exists():
            raise ConfigError(f"Missing input file {source}; run 'reconstruct' first")
        try:
            document = json.loads(source.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{source} is not valid JSON: {e.msg}")
        target = out_dir / PLOT_FILE
        target.write_text(render_levels(document), encoding="utf-8")
        logger.info(f"Wrote {target}")
        return target


def _inside_band(field_, ctx: TransformContext, points: np.ndarray, h: float) -> np.ndarray:
    """Audit points whose whole gradient stencil stays in the band interior and the domain"""
    x, y = points[:, 0], points[:, 1]
    stencil_x = np.stack([x + h, x - h, x, x])
    stencil_y = np.stack([y, y, y + h, y - h])
    X_t = ctx.f.evaluate(x=stencil_x, y=stencil_y)
    # end slopes of the graphs are one-sided
    lo, hi = field_.valid_range
    margin = BAND_MARGIN * (hi - lo)
    interior = (X_t >= lo + margin) & (X_t <= hi - margin)
    keep = np.all(interior, axis=0) & np.all(ctx.domain.contains(stencil_x, stencil_y), axis=0)
    return points[keep]


def run_report(outcome: Outcome) -> dict:
    """Report plus level curves, as served over HTTP"""
    results = dict(outcome.report)
    results.pop("mode")
    results.pop("config")
    results["adiabats"] = outcome.adiabats_document["levels"]
    return {"mode": outcome.report["mode"], "config": outcome.report["config"], "results": results}

