"""Zeros of the Dirac inner function in the upper half-plane and their flow.

Resonances are the conjugates of the zeros of E(t, .); they are located as
zeros of ``theta = E#/E`` in the closed upper half-plane, which keeps every
evaluation on the bounded side.  Zero counting is by the argument principle
on box boundaries with adaptive sampling (phase steps must stay under pi/2),
recursive quadrisection isolates single zeros, and Newton on theta polishes
them.

Tracking uses the zero dynamics

    z'(t) = -f(t) / theta_z(t, z(t)),

with a Newton corrector after every predictor step, and the NN/ND eigenvalue
flows ``x' = -2 i x theta / theta_z`` restricted to the real line (theta is
pinned to +1 or -1 there).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BoundaryNearZeroError,
    DerivativeDegenerateError,
    InvariantViolation,
    PreconditionError,
    ValidationError,
)
from .potential import SampledPotential, integral
from .propagator import (
    theta_derivs,
    transfer_batch,
    transfer_derivative,
    _theta_from_entries,
)

__all__ = [
    "ZERO_RESIDUAL_TOL",
    "THETA_Z_FLOOR_SCALE",
    "IM_FLOOR",
    "Box",
    "ResonanceTrack",
    "EigenTrack",
    "MotionSegment",
    "HorizonSample",
    "find_zeros",
    "track_resonance",
    "track_eigenvalue",
    "classify_track",
    "zero_free_horizon",
]

#: An accepted zero must satisfy |theta| below this.
ZERO_RESIDUAL_TOL = 1e-9

#: Newton / velocity formulas abort when |theta_z| < THETA_Z_FLOOR_SCALE * t
#: (the universality regime predicts |theta_z| of order t).
THETA_Z_FLOOR_SCALE = 1e-8

#: Tracked zeros must keep Im z above this floor.
IM_FLOOR = 1e-12

_MAX_CONTOUR_REFINES = 48
_MAX_QUAD_DEPTH = 40
_NEWTON_MAX_ITER = 60


@dataclass(frozen=True)
class Box:
    """Square search box centered at a real frequency.

    ``half_width`` plays the role of C/t in the scaling regime; only the
    part of the square with Im z >= 0 is searched for zeros of theta.
    """

    s: float
    half_width: float
    grid_n: int = 16

    def __post_init__(self):
        if not (self.half_width > 0):
            raise ValidationError(f"half_width must be > 0, got {self.half_width}")
        if self.grid_n < 8:
            raise ValidationError(f"grid_n must be >= 8, got {self.grid_n}")

    @property
    def re_lo(self) -> float:
        return self.s - self.half_width

    @property
    def re_hi(self) -> float:
        return self.s + self.half_width

    def contains(self, z: complex, slack: float = 0.0) -> bool:
        """Membership in the upper-half part of the square."""
        return (
            self.re_lo - slack <= z.real <= self.re_hi + slack
            and -slack <= z.imag <= self.half_width + slack
        )

    def tensor_grid(self, full: bool = True) -> np.ndarray:
        """grid_n x grid_n complex tensor grid over the square.

        ``full=True`` spans Im in [-half_width, half_width] (kernel probes
        use the whole square); ``full=False`` only the upper half.
        """
        re = np.linspace(self.re_lo, self.re_hi, self.grid_n)
        lo = -self.half_width if full else 0.0
        im = np.linspace(lo, self.half_width, self.grid_n)
        return (re[None, :] + 1j * im[:, None]).ravel()


@dataclass(frozen=True)
class ResonanceTrack:
    """Zero trajectory: samples are (t, z, theta_z) with |theta| tracked."""

    samples: tuple  # of (t, z, theta_z)
    residuals: tuple
    status: str  # completed | exited_real_axis | newton_diverged
    dt: float

    @property
    def times(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    @property
    def zs(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples], dtype=complex)

    @property
    def theta_zs(self) -> np.ndarray:
        return np.array([s[2] for s in self.samples], dtype=complex)


@dataclass(frozen=True)
class EigenTrack:
    """NN (theta = 1) or ND (theta = -1) eigenvalue trajectory on R."""

    kind: str  # "NN" | "ND"
    samples: tuple  # of (t, x)
    residuals: tuple
    monotone: bool
    status: str

    @property
    def times(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    @property
    def xs(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples])


@dataclass(frozen=True)
class MotionSegment:
    """Maximal run of V (vertical) or H (horizontal) motion of a track."""

    t1: float
    t2: float
    label: str  # "V" | "H"
    mean_direction: complex


@dataclass(frozen=True)
class HorizonSample:
    """Zero membership of a shrinking box at one time."""

    t: float
    contains_zero: bool
    nearest: float  # distance from s to the nearest found zero (inf if none)
    n_zeros: int


# ---------------------------------------------------------------------------
# theta evaluation helpers
# ---------------------------------------------------------------------------


def _theta_many(pot, t, pts) -> np.ndarray:
    B = transfer_batch(pot, np.asarray(pts, dtype=complex), t)
    return _theta_from_entries(B.A, B.C)


def _theta_z_floor(t: float) -> float:
    return THETA_Z_FLOOR_SCALE * max(t, 1e-6)


def _newton_zero(pot, t, z0, max_iter=_NEWTON_MAX_ITER, bounds=None):
    """Polish a zero of theta(t, .) from z0; returns (z, theta_z, residual).

    ``bounds`` is an optional (re_lo, re_hi, im_lo, im_hi) basin; iterates
    escaping its doubled extent count as divergence rather than wandering
    into the overflow range.

    Raises DerivativeDegenerateError when theta_z drops under its floor.
    Returns None when Newton fails to reach the residual tolerance.
    """
    z = complex(z0)
    floor = _theta_z_floor(t)
    if bounds is not None:
        re_lo, re_hi, im_lo, im_hi = bounds
        pad = max(re_hi - re_lo, im_hi - im_lo, 1e-9)
        re_lo, re_hi = re_lo - pad, re_hi + pad
        im_lo, im_hi = max(im_lo - pad, -0.5 * pad), im_hi + pad
    best = None
    for _ in range(max_iter):
        if bounds is not None and not (
            re_lo <= z.real <= re_hi and im_lo <= z.imag <= im_hi
        ):
            break  # left the basin: no zero here for this start
        aug = transfer_derivative(pot, z, t, order=1)
        th, th_z = theta_derivs(aug)
        res = abs(th)
        if best is None or res < best[2]:
            best = (z, th_z, res)
        if res <= 1e-13:
            return z, th_z, res
        if abs(th_z) < floor:
            raise DerivativeDegenerateError(
                f"|theta_z| = {abs(th_z):.3g} under floor {floor:.3g} at z={z}: "
                "multiple/degenerate zero suspected"
            )
        step = -th / th_z
        if not np.isfinite(step.real) or not np.isfinite(step.imag):
            break
        if abs(step) > 1.0 + abs(z):
            break  # wild step: Newton left its basin
        z = z + step
    if best is not None and best[2] <= ZERO_RESIDUAL_TOL:
        return best
    return None


# ---------------------------------------------------------------------------
# argument-principle machinery
# ---------------------------------------------------------------------------


class _Rect:
    """Axis-aligned rectangle with perimeter parametrization (internal)."""

    def __init__(self, re_lo, re_hi, im_lo, im_hi):
        self.re_lo, self.re_hi = re_lo, re_hi
        self.im_lo, self.im_hi = im_lo, im_hi
        self.w = re_hi - re_lo
        self.h = im_hi - im_lo
        self.L = 2.0 * (self.w + self.h)

    def point(self, tau):
        """Map perimeter parameter(s) in [0, L) to boundary points (ccw)."""
        tau = np.asarray(tau, dtype=float) % self.L
        w, h = self.w, self.h
        out = np.empty(tau.shape, dtype=complex)
        m0 = tau < w
        m1 = (tau >= w) & (tau < w + h)
        m2 = (tau >= w + h) & (tau < 2 * w + h)
        m3 = ~(m0 | m1 | m2)
        out[m0] = self.re_lo + tau[m0] + 1j * self.im_lo
        out[m1] = self.re_hi + 1j * (self.im_lo + (tau[m1] - w))
        out[m2] = self.re_hi - (tau[m2] - w - h) + 1j * self.im_hi
        out[m3] = self.re_lo + 1j * (self.im_hi - (tau[m3] - 2 * w - h))
        return out

    def center(self) -> complex:
        return complex((self.re_lo + self.re_hi) / 2.0, (self.im_lo + self.im_hi) / 2.0)

    def quadrants(self, fx: float = 0.5, fy: float = 0.5):
        rm = self.re_lo + fx * self.w
        im = self.im_lo + fy * self.h
        return [
            _Rect(self.re_lo, rm, self.im_lo, im),
            _Rect(rm, self.re_hi, self.im_lo, im),
            _Rect(self.re_lo, rm, im, self.im_hi),
            _Rect(rm, self.re_hi, im, self.im_hi),
        ]


def _winding(pot, t, rect: _Rect, n0: int) -> int:
    """Winding number of theta(t, .) around the rectangle boundary.

    Adaptive: parameters are inserted until every phase step is < pi/2.
    """
    L = rect.L
    params = np.linspace(0.0, L, 4 * n0, endpoint=False)
    vals = _theta_many(pot, t, rect.point(params))
    for _ in range(_MAX_CONTOUR_REFINES):
        nxt = np.roll(vals, -1)
        steps = np.angle(nxt / vals)
        bad = np.abs(steps) >= (np.pi / 2.0) * 0.999
        if not np.any(bad):
            total = float(np.sum(steps))
            wind = total / (2.0 * np.pi)
            rounded = int(round(wind))
            if abs(wind - rounded) > 0.2:
                raise BoundaryNearZeroError(
                    f"winding {wind:.4f} is not close to an integer on "
                    f"[{rect.re_lo},{rect.re_hi}]x[{rect.im_lo},{rect.im_hi}]"
                )
            return rounded
        gaps = (np.roll(params, -1) - params) % L
        if float(np.min(gaps[bad])) < 1e-13 * max(L, 1.0):
            raise BoundaryNearZeroError(
                "a zero of theta sits on (or hugs) the counting contour; "
                "shift or shrink the box"
            )
        mids = (params[bad] + 0.5 * gaps[bad]) % L
        mid_vals = _theta_many(pot, t, rect.point(mids))
        params = np.concatenate([params, mids])
        vals = np.concatenate([vals, mid_vals])
        order = np.argsort(params, kind="stable")
        params = params[order]
        vals = vals[order]
    raise BoundaryNearZeroError(
        "contour refinement budget exhausted; a zero is (numerically) on the boundary"
    )


def _collect_zeros(pot, t, rect: _Rect, n0: int, depth: int, out: list) -> None:
    wind = _winding(pot, t, rect, n0)
    if wind < 0:
        raise InvariantViolation(
            f"negative winding {wind} of theta on a box in the closed upper "
            "half-plane: a pole entered the contour"
        )
    if wind == 0:
        return
    size = max(rect.w, rect.h)
    scale = 1.0 + abs(rect.center())
    if wind == 1:
        polished = _newton_zero(
            pot, t, rect.center(),
            bounds=(rect.re_lo, rect.re_hi, rect.im_lo, rect.im_hi),
        )
        if polished is not None:
            z, th_z, res = polished
            if (rect.re_lo - 1e-9 * scale <= z.real <= rect.re_hi + 1e-9 * scale
                    and rect.im_lo - 1e-9 * scale <= z.imag <= rect.im_hi + 1e-9 * scale):
                out.append((z, th_z, res))
                return
        # Newton missed (zero near a corner, say): fall through to splitting.
    if depth >= _MAX_QUAD_DEPTH or size < 1e-9 * scale:
        raise DerivativeDegenerateError(
            f"could not isolate {wind} zero(s) in a box of size {size:.3g}; "
            "a zero cluster is beyond the resolving power"
        )
    # deterministic split-jitter schedule: re-split off-center if a child
    # contour keeps hitting a zero
    for fx, fy in ((0.5, 0.5), (0.53125, 0.5), (0.5, 0.53125), (0.46875, 0.515625)):
        try:
            found: list = []
            for sub in rect.quadrants(fx, fy):
                _collect_zeros(pot, t, sub, max(8, n0 // 2), depth + 1, found)
            out.extend(found)
            return
        except BoundaryNearZeroError:
            continue
    raise BoundaryNearZeroError(
        "every deterministic sub-box split left a zero on a contour; "
        "shift the outer box instead"
    )


def find_zeros(pot: SampledPotential, t: float, box: Box):
    """All zeros of theta(t, .) inside the upper-half part of ``box``.

    Argument-principle count on the boundary, quadrisection to single
    windings, Newton polish.  Returns a list of ``(z, theta_z)`` sorted by
    real part, every zero satisfying ``|theta| <= 1e-9`` and ``Im z > 0``.

    Raises:
        BoundaryNearZeroError: a zero sits numerically on the initial
            boundary (caller should shift/shrink the box).
    """
    if t <= 0:
        raise ValidationError(f"need t > 0, got {t}")
    rect = _Rect(box.re_lo, box.re_hi, 0.0, box.half_width)
    raw: list = []
    _collect_zeros(pot, t, rect, box.grid_n, 0, raw)
    # dedupe (quadrisection borders can hand the same zero to two children)
    uniq: list = []
    for z, th_z, res in raw:
        if res > ZERO_RESIDUAL_TOL or z.imag <= IM_FLOOR:
            continue
        if not box.contains(z, slack=1e-9 * (1.0 + abs(z))):
            continue
        if any(abs(z - u[0]) <= 1e-9 * (1.0 + abs(z)) for u in uniq):
            continue
        uniq.append((z, th_z))
    uniq.sort(key=lambda p: (p[0].real, p[0].imag))
    return uniq


# ---------------------------------------------------------------------------
# tracking
# ---------------------------------------------------------------------------


def _mean_f(pot, t_a, t_b) -> float:
    if t_b <= t_a:
        return 0.0
    return integral(pot, t_a, t_b) / (t_b - t_a)


def track_resonance(
    pot: SampledPotential,
    z0: complex,
    t0: float,
    t1: float,
    dt: float,
    pre_tol: float = 1e-6,
) -> ResonanceTrack:
    """Follow a zero of theta from (t0, z0) to t1 with steps of dt.

    Predictor ``z <- z - dt * f_avg / theta_z`` (cell-averaged f over the
    step), then a Newton corrector re-solves ``theta(t + dt, .) = 0``.

    The track stops early with status ``exited_real_axis`` when the zero
    meets the Im floor, or ``newton_diverged`` when correction fails;
    :class:`DerivativeDegenerateError` (with the partial track attached as
    ``.track``) signals a degenerate ``theta_z``.

    Raises:
        PreconditionError: theta(t0, z0) is not a zero within 1e-6.
    """
    if dt <= 0 or t1 <= t0:
        raise ValidationError(f"need t1 > t0 and dt > 0, got [{t0}, {t1}], dt={dt}")
    th0 = _theta_many(pot, t0, [z0])[0]
    if abs(th0) > pre_tol:
        raise PreconditionError(
            f"theta(t0, z0) = {abs(th0):.3g} is not a zero (tolerance {pre_tol:g}); "
            "run find_zeros first"
        )
    samples: list = []
    residuals: list = []
    status = "completed"

    def _fail(exc: DerivativeDegenerateError):
        exc.track = ResonanceTrack(
            samples=tuple(samples), residuals=tuple(residuals),
            status="derivative_degenerate", dt=dt,
        )
        return exc

    try:
        polished = _newton_zero(pot, t0, z0)
    except DerivativeDegenerateError as exc:
        raise _fail(exc) from None
    if polished is None:
        raise PreconditionError("Newton could not refine the starting zero")
    z, th_z, res = polished
    samples.append((t0, z, th_z))
    residuals.append(res)
    t = t0
    while t < t1 - 1e-12:
        step = min(dt, t1 - t)
        f_avg = _mean_f(pot, t, t + step)
        z_pred = z - step * (f_avg / th_z)
        try:
            polished = _newton_zero(pot, t + step, z_pred)
        except DerivativeDegenerateError as exc:
            raise _fail(exc) from None
        if polished is None:
            status = "newton_diverged"
            break
        z_new, th_z_new, res = polished
        if z_new.imag <= IM_FLOOR:
            status = "exited_real_axis"
            break
        t += step
        z, th_z = z_new, th_z_new
        samples.append((t, z, th_z))
        residuals.append(res)
    return ResonanceTrack(
        samples=tuple(samples), residuals=tuple(residuals), status=status, dt=dt
    )


_EIGEN_TARGET = {"NN": 1.0 + 0.0j, "ND": -1.0 + 0.0j}


def _newton_level(pot, t, x0, target, max_iter=_NEWTON_MAX_ITER):
    """Solve theta(t, x) = target on the real axis near x0.

    Returns (x, theta_z, |theta - target|) or None.
    """
    x = float(x0)
    floor = _theta_z_floor(t)
    best = None
    for _ in range(max_iter):
        aug = transfer_derivative(pot, x, t, order=1)
        th, th_z = theta_derivs(aug)
        res = abs(th - target)
        if best is None or res < best[2]:
            best = (x, th_z, res)
        if res <= 1e-13:
            return x, th_z, res
        if abs(th_z) < floor:
            raise DerivativeDegenerateError(
                f"|theta_z| = {abs(th_z):.3g} under floor {floor:.3g} at x={x}"
            )
        g = math.atan2((th * np.conj(target)).imag, (th * np.conj(target)).real)
        gp = (th_z / th).imag
        if abs(gp) < floor:
            raise DerivativeDegenerateError("level-set slope Im(theta_z/theta) degenerate")
        step = -g / gp
        if not math.isfinite(step) or abs(step) > 1.0 + abs(x):
            break
        x = x + step
    if best is not None and best[2] <= ZERO_RESIDUAL_TOL:
        return best
    return None


def track_eigenvalue(
    pot: SampledPotential,
    kind: str,
    x0: float,
    t0: float,
    t1: float,
    dt: float,
    pre_tol: float = 1e-6,
) -> EigenTrack:
    """Follow an NN (theta = 1) or ND (theta = -1) real level point.

    The exact flow is ``x' = -2 i x theta / theta_z`` (theta pinned at the
    target), which is real and drives x monotonically toward 0; a Newton
    corrector on ``arg(theta / target)`` re-solves the level set after each
    step.
    """
    if kind not in _EIGEN_TARGET:
        raise ValidationError(f"kind must be 'NN' or 'ND', got {kind!r}")
    if dt <= 0 or t1 <= t0:
        raise ValidationError(f"need t1 > t0 and dt > 0, got [{t0}, {t1}], dt={dt}")
    target = _EIGEN_TARGET[kind]
    th0 = _theta_many(pot, t0, [x0])[0]
    if abs(th0 - target) > pre_tol:
        raise PreconditionError(
            f"theta(t0, x0) is {abs(th0 - target):.3g} away from the {kind} target "
            f"(tolerance {pre_tol:g})"
        )
    polished = _newton_level(pot, t0, x0, target)
    if polished is None:
        raise PreconditionError("Newton could not refine the starting level point")
    x, th_z, res = polished
    samples = [(t0, x)]
    residuals = [res]
    status = "completed"
    t = t0
    while t < t1 - 1e-12:
        step = min(dt, t1 - t)
        vel = (-2j * x * target / th_z).real
        x_pred = x + step * vel
        polished = _newton_level(pot, t + step, x_pred, target)
        if polished is None:
            status = "newton_diverged"
            break
        x, th_z, res = polished
        t += step
        samples.append((t, x))
        residuals.append(res)
    xs = np.array([s[1] for s in samples])
    dx = np.diff(xs)
    if xs[0] > 0:
        monotone = bool(np.all(dx < 0))
    elif xs[0] < 0:
        monotone = bool(np.all(dx > 0))
    else:
        monotone = bool(np.all(dx == 0))
    return EigenTrack(
        kind=kind, samples=tuple(samples), residuals=tuple(residuals),
        monotone=monotone, status=status,
    )


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


def classify_track(track: ResonanceTrack, tau_V: float = 0.1, tau_H: float = 0.25):
    """Split a track into maximal vertical / horizontal motion segments.

    A sample is V when ``|Re z'| <= tau_V |z'|`` and H when
    ``|Re z'| >= tau_H |z'|`` (velocities by central differences); runs of
    equal labels become :class:`MotionSegment`s, the in-between hysteresis
    band stays unlabeled.  Since the per-sample inequalities are summed, the
    segment-averaged criterion holds automatically on every segment.
    """
    if not (0.0 < tau_V < tau_H < 1.0):
        raise ValidationError(f"need 0 < tau_V < tau_H < 1, got {tau_V}, {tau_H}")
    n = len(track.samples)
    if n < 3:
        raise PreconditionError("classify_track needs at least 3 samples")
    ts = track.times
    zs = track.zs
    vel = np.empty(n, dtype=complex)
    vel[1:-1] = (zs[2:] - zs[:-2]) / (ts[2:] - ts[:-2])
    vel[0] = (zs[1] - zs[0]) / (ts[1] - ts[0])
    vel[-1] = (zs[-1] - zs[-2]) / (ts[-1] - ts[-2])
    speed = np.abs(vel)
    ratio = np.where(speed > 0, np.abs(vel.real) / np.where(speed > 0, speed, 1.0), 0.0)
    labels = np.where(ratio <= tau_V, "V", np.where(ratio >= tau_H, "H", ""))
    segments: list[MotionSegment] = []
    i = 0
    while i < n:
        lab = labels[i]
        j = i
        while j + 1 < n and labels[j + 1] == lab:
            j += 1
        if lab:
            units = vel[i:j + 1][speed[i:j + 1] > 0]
            if units.size:
                mean = np.sum(units / np.abs(units))
                direction = mean / abs(mean) if abs(mean) > 0 else 1j
            else:
                direction = 1j  # stationary: pure dwell counts as vertical rest
            segments.append(
                MotionSegment(t1=float(ts[i]), t2=float(ts[j]), label=str(lab),
                              mean_direction=complex(direction))
            )
        i = j + 1
    return segments


# ---------------------------------------------------------------------------
# horizon scan
# ---------------------------------------------------------------------------


def zero_free_horizon(pot: SampledPotential, s: float, C: float, t_grid, grid_n: int = 16):
    """Zero membership of the shrinking box Q(s, C/t) along a time grid.

    Zeros of E in Q(s, C/t) are the conjugates of zeros of theta in the same
    box reflected to the upper half-plane, so each t runs :func:`find_zeros`
    there.  Returns a list of :class:`HorizonSample`.
    """
    ts = [float(t) for t in t_grid]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValidationError("t_grid must be strictly increasing")
    if C <= 0:
        raise ValidationError(f"need C > 0, got {C}")
    out = []
    for t in ts:
        zeros = find_zeros(pot, t, Box(s=s, half_width=C / t, grid_n=grid_n))
        if zeros:
            nearest = min(abs(z - s) for z, _ in zeros)
        else:
            nearest = math.inf
        out.append(
            HorizonSample(t=t, contains_zero=bool(zeros), nearest=nearest,
                          n_zeros=len(zeros))
        )
    return out
