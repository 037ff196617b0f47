"""Spline tracks: centerline, tangent frame, borders, and racing error terms.

A track interpolates its waypoints with natural cubic splines parameterized
by knot index, so one unit of the curve parameter advances one waypoint.
Waypoints spaced roughly one length unit apart make the parameter behave
like arc length; the reference speed of the racing costs is expressed in
these units per second.  Evaluation is generic over scalar type so costs
built on it can be differentiated through the curve parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline

from .. import autodiff as ad
from ..errors import ShapeError

__all__ = [
    "Track",
    "TrackPoint",
    "track_build",
    "track_load",
    "track_loads",
    "bundled_track",
    "track_eval",
    "contouring_errors",
    "border_cost",
]

BORDER_SHARPNESS = 0.01


class TrackPoint(NamedTuple):
    """Centerline point with tangent angle and border normals at parameter s.

    Both normals point from the inner border side toward the outer one;
    the signed border distances flip the sign for the inner side so each
    distance grows positive outside its border.
    """

    x: object
    y: object
    theta: object
    normal_in: tuple
    normal_out: tuple


@dataclass(frozen=True)
class Track:
    """Waypoint spline with width; coefficients are per-segment cubics."""

    waypoints: np.ndarray
    width: float
    x_coeffs: np.ndarray  # (4, n-1), highest degree first
    y_coeffs: np.ndarray

    @property
    def knots(self) -> int:
        return self.waypoints.shape[0]

    @property
    def length(self) -> float:
        """Parameter-domain length (number of segments)."""
        return float(self.knots - 1)


def track_build(waypoints, width: float) -> Track:
    """Interpolate waypoints with natural cubic splines.

    Natural boundary conditions give twice continuously differentiable
    centerlines; duplicate consecutive waypoints are rejected because they
    would degenerate the tangent.
    """
    pts = np.asarray(waypoints, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ShapeError("a track needs at least two (x, y) waypoints")
    if not np.all(np.isfinite(pts)):
        raise ShapeError("track waypoints must be finite")
    if width <= 0.0:
        raise ShapeError(f"track width must be positive, got {width}")
    gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if np.any(gaps == 0.0):
        raise ShapeError("duplicate consecutive waypoints")
    s = np.arange(pts.shape[0], dtype=float)
    sx = CubicSpline(s, pts[:, 0], bc_type="natural")
    sy = CubicSpline(s, pts[:, 1], bc_type="natural")
    return Track(pts, float(width), sx.c.copy(), sy.c.copy())


def track_loads(text: str) -> Track:
    """Parse the track file format: a width header then one x,y pair per line."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or not lines[0].startswith("width="):
        raise ShapeError("track file must start with a 'width=<float>' line")
    width = float(lines[0].split("=", 1)[1])
    pts = []
    for ln in lines[1:]:
        sx, sy = ln.split(",")
        x, y = float(sx), float(sy)
        if math.isnan(x) or math.isnan(y):
            raise ShapeError(f"track file contains NaN coordinates: {ln!r}")
        pts.append((x, y))
    return track_build(pts, width)


def track_load(path) -> Track:
    with open(path, "r", encoding="utf-8") as fh:
        return track_loads(fh.read())


def bundled_track(name: str) -> Track:
    """One of the tracks shipped with the package ('simple' or 'complex')."""
    data = resources.files(__package__).joinpath(f"tracks/{name}.txt")
    try:
        return track_loads(data.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ShapeError(f"no bundled track named {name!r}") from None


def _segment(track: Track, s) -> tuple[int, object]:
    s_val = s.value if isinstance(s, ad.HyperDual) else float(s)
    idx = min(max(int(math.floor(s_val)), 0), track.knots - 2)
    return idx, s - float(idx)


def _cubic(coeffs, idx: int, local):
    c0, c1, c2, c3 = (float(coeffs[k, idx]) for k in range(4))
    return ((c0 * local + c1) * local + c2) * local + c3


def _cubic_deriv(coeffs, idx: int, local):
    c0, c1, c2 = (float(coeffs[k, idx]) for k in range(3))
    return (3.0 * c0 * local + 2.0 * c1) * local + c2


def track_eval(track: Track, s) -> TrackPoint:
    """Centerline point, tangent angle and border normals at parameter s.

    The parameter is clamped to the spline domain at both ends; evaluation
    accepts hyper-dual parameters so costs can differentiate through s.
    """
    idx, local = _segment(track, s)
    x = _cubic(track.x_coeffs, idx, local)
    y = _cubic(track.y_coeffs, idx, local)
    dx = _cubic_deriv(track.x_coeffs, idx, local)
    dy = _cubic_deriv(track.y_coeffs, idx, local)
    theta = ad.arctan2(dy, dx)
    normal = (ad.sin(theta), -1.0 * ad.cos(theta))
    return TrackPoint(x, y, theta, normal, normal)


def contouring_errors(track: Track, x, y, s):
    """Signed normal and tangential displacement from the curve point at s.

    The first component measures sideways deviation from the centerline,
    the second how far the position trails the reference point along the
    track direction.
    """
    pt = track_eval(track, s)
    sin_t, cos_t = ad.sin(pt.theta), ad.cos(pt.theta)
    ex, ey = x - pt.x, y - pt.y
    e_contour = sin_t * ex - cos_t * ey
    e_lag = -1.0 * cos_t * ex - sin_t * ey
    return e_contour, e_lag


def border_cost(track: Track, x, y, s, w_car: float, sharpness: float = BORDER_SHARPNESS):
    """Squared smooth-hinge penalty on crossing either track border.

    The signed distances grow positive once the car body (half-width
    ``w_car``) passes a border; inside the track both hinges are
    exponentially small.
    """
    pt = track_eval(track, s)
    half = 0.5 * track.width
    sin_t, cos_t = ad.sin(pt.theta), ad.cos(pt.theta)
    # borders offset from the centerline along the left normal (-sin, cos)
    in_x, in_y = pt.x - half * sin_t, pt.y + half * cos_t
    out_x, out_y = pt.x + half * sin_t, pt.y - half * cos_t
    nx, ny = pt.normal_in
    d_in = -1.0 * ((x - in_x) * nx + (y - in_y) * ny)
    nx, ny = pt.normal_out
    d_out = (x - out_x) * nx + (y - out_y) * ny
    hinge_in = ad.smoothmax(w_car + d_in, sharpness)
    hinge_out = ad.smoothmax(w_car + d_out, sharpness)
    return hinge_in * hinge_in + hinge_out * hinge_out
