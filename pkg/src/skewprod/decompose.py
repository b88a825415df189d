"""Path-level radial/angular decomposition with a continuously chosen
section, exit-time detection, and angular jump extraction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cosets import CosetPoint, SignedFrameCoset, SphereCoset
from .paths import CadlagPath
from .scenarios import BoundaryError, ScenarioGeometry


@dataclass
class DecomposedPath:
    radial: CadlagPath
    angular: CadlagPath
    exit_index: int | None = None
    chart_switches: list = field(default_factory=list)


def detect_exit(x: CadlagPath, geometry: ScenarioGeometry) -> int | None:
    """First grid index where the point and its left limit both sit outside
    the interior orbit set.

    A jump that lands outside while its left limit was interior does not
    trigger the exit; the clock only stops once both sides have left.
    """
    for i in range(1, len(x)):
        if not geometry.in_interior(x.points[i]) \
                and not geometry.in_interior(x.left_limit(i)):
            return i
    return None


def decompose_path(x: CadlagPath, geometry: ScenarioGeometry) -> DecomposedPath:
    """Project a path onto its radial and angular parts.

    The angular representative is chosen continuously: for the signed-frame
    coset the representative nearest (in the group) to the previous choice
    wins, starting from the canonical representative of the first point.
    Stops at the exit time; starting outside the interior is an error.
    """
    if not geometry.in_interior(x.points[0]):
        raise BoundaryError("path starts outside the interior orbit set")
    exit_index = detect_exit(x, geometry)
    last = len(x) if exit_index is None else exit_index
    coset = geometry.coset
    signed = isinstance(coset, SignedFrameCoset)
    y_rows = []
    z_rows = []
    charts = []
    prev_rep = None
    prev_z = None
    for i in range(last):
        pt = x.points[i]
        try:
            y = geometry.project_radial(pt)
            z = geometry.project_angular(pt)
        except BoundaryError:
            # isolated boundary touch without exit: carry the last angular
            # value through (cadlag placeholder)
            y_rows.append(y_rows[-1])
            z_rows.append(prev_z)
            charts.append(charts[-1] if charts else 0)
            continue
        if signed:
            anchor = prev_rep if prev_rep is not None else None
            rep = coset.nearest_representative(z, anchor) \
                if anchor is not None else z.value
            prev_rep = rep
            z_val = rep
        else:
            z_val = z.value
        y_rows.append(y.coords)
        z_rows.append(z_val)
        prev_z = z_val
        charts.append(coset.section_chart(CosetPoint(z_val, coset.space))
                      if isinstance(coset, SphereCoset) else 0)
    chart_switches = [i for i in range(1, len(charts)) if charts[i] != charts[i - 1]]
    times = x.times[:last]
    radial_marks = {}
    angular_marks = {}
    for idx, pre in x.jump_marks.items():
        if idx >= last:
            continue
        try:
            radial_marks[idx] = geometry.project_radial(pre).coords
            zpre = geometry.project_angular(pre)
            angular_marks[idx] = coset.nearest_representative(
                zpre, z_rows[idx - 1] if idx > 0 else None) \
                if signed and idx > 0 else zpre.value
        except BoundaryError:
            pass
    radial = CadlagPath(times, np.asarray(y_rows), kind=f"radial:{geometry.name}",
                        jump_marks=radial_marks, seed=x.seed, exit_index=exit_index)
    angular = CadlagPath(times, np.asarray(z_rows),
                         kind=f"angular:{coset.space}",
                         jump_marks=angular_marks, seed=x.seed,
                         exit_index=exit_index)
    return DecomposedPath(radial, angular, exit_index, chart_switches)


def reconstruction_error(d: DecomposedPath, x: CadlagPath,
                         geometry: ScenarioGeometry) -> float:
    """Max over the pre-exit grid of |S(z_t) y_t - x_t|."""
    from .scenarios import RadialPoint
    worst = 0.0
    coset = geometry.coset
    for i in range(len(d.radial)):
        z = CosetPoint(d.angular.points[i], coset.space)
        y = RadialPoint(d.radial.points[i], geometry.name)
        rec = geometry.reconstruct(z, y)
        worst = max(worst, float(np.linalg.norm(rec - x.points[i])))
    return worst


def extract_angular_jumps(d: DecomposedPath, geometry: ScenarioGeometry):
    """Left increments S(z_{tau-})^{-1} z_tau of the angular path at its jump
    marks, as (time, coset point) pairs."""
    coset = geometry.coset
    out = []
    for idx in sorted(d.angular.jump_marks):
        z_pre = CosetPoint(np.asarray(d.angular.jump_marks[idx]), coset.space)
        z_post = CosetPoint(d.angular.points[idx], coset.space)
        out.append((float(d.angular.times[idx]), coset.increment(z_pre, z_post)))
    return out
