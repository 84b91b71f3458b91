"""Transfer matrices of the half-line Dirac system.

For a piecewise-constant potential the fundamental solution is an ordered
product of exact cell propagators

    P(q, w, z) = cosh(l w) I + sinh(l w)/l * G,   G = [[q, -z], [z, -q]],

with ``l^2 = q^2 - z^2``.  Everything is evaluated through even functions of
``l`` (functions of ``m = l^2``), so no square-root branch ever matters.

The running matrix ``M = [[A, B], [C, D]]`` starts at the identity; its
columns are the frequency-domain solutions with Neumann-type (A, C) and
Dirichlet-type (B, D) initial data.  ``det M = 1`` identically; a stably
tracked determinant (product of per-cell closed-form determinants) is carried
alongside the entries, because the direct ``A D - B C`` of the accumulated
product loses all precision once ``exp(2 |Im z| t)`` overtakes ``1/eps``.

First and second z-derivatives propagate by the product rule.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvariantViolation,
    OverflowRangeError,
    PoleProximityError,
    RangeError,
)
from .potential import SampledPotential, cell_cover

__all__ = [
    "WORK_RANGE_LIMIT",
    "DET_DRIFT_ABORT",
    "TransferMatrix",
    "BatchTransfer",
    "AugmentedTransfer",
    "HermiteBiehlerPair",
    "cell_propagator",
    "transfer",
    "transfer_batch",
    "transfer_derivative",
    "transfer_derivative_batch",
    "transfer_checkpoints",
    "hermite_biehler",
    "theta",
    "theta_derivs",
    "corrupted_propagator",
]

#: Supported working range: propagation refuses when |Im z| * t exceeds this.
WORK_RANGE_LIMIT = 50.0

#: Tracked-determinant drift that aborts a propagation as numerically rotten.
DET_DRIFT_ABORT = 1e-8

#: Relative floor under which 1/E (and theta) is considered at a pole.
POLE_FLOOR = 1e-14

# Taylor switch for the raw coefficients (4 terms in m w^2 below this).
_SERIES_EVAL = 1e-6
# Taylor switch for the m-derivative recurrences, which cancel more strongly.
_SERIES_DERIV = 1e-3
# Max |l| * width per propagated chunk; keeps the per-cell determinant
# conditioned (error ~ eps * exp(2 * cap)) while coalesced cells stay exact.
_CHUNK_CAP = 2.5

# Test hook: cmd_verify perturbs the cosh coefficient through this to prove
# the invariant monitor trips (never set outside tests / the verify command).
_TEST_CORRUPTION = 0.0


@contextmanager
def corrupted_propagator(eps: float):
    """Context manager that deliberately skews every cell propagator.

    Only for self-test machinery: a non-zero ``eps`` must trip the
    determinant monitor downstream.
    """
    global _TEST_CORRUPTION
    old = _TEST_CORRUPTION
    _TEST_CORRUPTION = float(eps)
    try:
        yield
    finally:
        _TEST_CORRUPTION = old


# ---------------------------------------------------------------------------
# result containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransferMatrix:
    """Fundamental solution M(t, z) = [[A, B], [C, D]] at a single point."""

    t: float
    z: complex
    A: complex
    B: complex
    C: complex
    D: complex
    det_tracked: complex = 1.0 + 0.0j

    @property
    def det(self) -> complex:
        """Direct determinant A D - B C (ill-conditioned for large |Im z| t)."""
        return self.A * self.D - self.B * self.C

    @property
    def det_drift(self) -> float:
        """|tracked det - 1|: the conditioning-safe determinant residual."""
        return abs(self.det_tracked - 1.0)

    def matrix(self) -> np.ndarray:
        return np.array([[self.A, self.B], [self.C, self.D]], dtype=complex)


@dataclass(frozen=True)
class BatchTransfer:
    """Vectorized transfer matrix: entries are arrays over the z batch."""

    t: float
    z: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    det_tracked: np.ndarray

    def at(self, i: int) -> TransferMatrix:
        return TransferMatrix(
            t=self.t,
            z=complex(self.z[i]),
            A=complex(self.A[i]),
            B=complex(self.B[i]),
            C=complex(self.C[i]),
            D=complex(self.D[i]),
            det_tracked=complex(self.det_tracked[i]),
        )

    @property
    def det(self) -> np.ndarray:
        return self.A * self.D - self.B * self.C

    @property
    def det_drift(self) -> np.ndarray:
        return np.abs(self.det_tracked - 1.0)


@dataclass(frozen=True)
class AugmentedTransfer:
    """Transfer matrix together with d/dz (and optionally d^2/dz^2) entries."""

    m: TransferMatrix
    dA: complex
    dB: complex
    dC: complex
    dD: complex
    d2A: complex | None = None
    d2B: complex | None = None
    d2C: complex | None = None
    d2D: complex | None = None

    @property
    def order(self) -> int:
        return 1 if self.d2A is None else 2

    def dM(self) -> np.ndarray:
        return np.array([[self.dA, self.dB], [self.dC, self.dD]], dtype=complex)

    def d2M(self) -> np.ndarray | None:
        if self.d2A is None:
            return None
        return np.array([[self.d2A, self.d2B], [self.d2C, self.d2D]], dtype=complex)

    def trace_inv_d(self) -> complex:
        """trace(M^-1 dM); identically zero since det M == 1."""
        m = self.m
        return m.D * self.dA - m.B * self.dC - m.C * self.dB + m.A * self.dD


@dataclass(frozen=True)
class HermiteBiehlerPair:
    """First-kind entire functions built from a transfer matrix.

    ``E = A - iC`` and ``Etilde = B - iD`` are zero-free in the closed upper
    half-plane (E strictly, by the determinant identity); the sharp partners
    are ``A + iC`` and ``B + iD``.
    """

    E: complex
    Etilde: complex
    Esharp: complex
    Etildesharp: complex

    def det2i(self) -> complex:
        """E*Etildesharp - Etilde*Esharp; equals 2i * det M."""
        return self.E * self.Etildesharp - self.Etilde * self.Esharp


# ---------------------------------------------------------------------------
# scalar cell coefficients
# ---------------------------------------------------------------------------


def _coeffs(m: np.ndarray, w: float, order: int):
    """Even-in-l coefficient functions of one cell.

    Returns ``c = cosh(l w)`` and ``s = sinh(l w)/l`` as functions of
    ``m = l^2``, plus ``ds/dm`` (order >= 1) and ``d2s/dm2`` (order >= 2).
    ``dc/dm = w s / 2`` and ``d2c/dm2 = w (ds/dm) / 2`` are exact identities
    applied by the caller.  Series are used near ``m w^2 = 0`` where the
    closed forms cancel.
    """
    x = m * (w * w)
    c = np.empty_like(m)
    s = np.empty_like(m)
    big = np.abs(x) >= _SERIES_EVAL
    if np.any(big):
        lam = np.sqrt(m[big])
        lw = lam * w
        c[big] = np.cosh(lw)
        s[big] = np.sinh(lw) / lam
    if not np.all(big):
        xs = x[~big]
        c[~big] = 1.0 + xs * (0.5 + xs * (1.0 / 24.0 + xs * (1.0 / 720.0)))
        s[~big] = w * (1.0 + xs * (1.0 / 6.0 + xs * (1.0 / 120.0 + xs * (1.0 / 5040.0))))
    if order == 0:
        return c, s, None, None

    sm = np.empty_like(m)
    bigd = np.abs(x) >= _SERIES_DERIV
    if np.any(bigd):
        sm[bigd] = (w * c[bigd] - s[bigd]) / (2.0 * m[bigd])
    if not np.all(bigd):
        xs = x[~bigd]
        w3 = w**3
        sm[~bigd] = (w3 / 2.0) * (
            1.0 / 3.0 + xs * (1.0 / 30.0 + xs * (1.0 / 840.0 + xs * (1.0 / 45360.0)))
        )
    if order == 1:
        return c, s, sm, None

    smm = np.empty_like(m)
    if np.any(bigd):
        cm_big = 0.5 * w * s[bigd]
        smm[bigd] = (w * cm_big - 3.0 * sm[bigd]) / (2.0 * m[bigd])
    if not np.all(bigd):
        xs = x[~bigd]
        w5 = w**5
        smm[~bigd] = (w5 / 2.0) * (
            1.0 / 30.0 + xs * (1.0 / 420.0 + xs * (1.0 / 15120.0 + xs * (1.0 / 997920.0)))
        )
    return c, s, sm, smm


def cell_propagator(q: float, width: float, z: complex) -> np.ndarray:
    """Exact propagator of a single constant cell, as a 2x2 complex array.

    ``P = cosh(l w) I + sinh(l w)/l * [[q, -z], [z, -q]]`` with
    ``l^2 = q^2 - z^2``; even in ``l``, exact for any width.
    """
    if width < 0:
        raise RangeError(f"cell width must be >= 0, got {width}")
    zarr = np.asarray([z], dtype=complex)
    m = np.asarray([q * q - z * z], dtype=complex)
    c, s, _, _ = _coeffs(m, float(width), 0)
    c0 = complex(c[0]) + _TEST_CORRUPTION
    s0 = complex(s[0])
    return np.array(
        [[c0 + s0 * q, -s0 * z], [s0 * z, c0 - s0 * q]],
        dtype=complex,
    )


# ---------------------------------------------------------------------------
# batch propagation
# ---------------------------------------------------------------------------


class PropagationState:
    """Mutable accumulator for one batch propagation (internal)."""

    __slots__ = ("z", "order", "A", "B", "C", "D", "dA", "dB", "dC", "dD",
                 "d2A", "d2B", "d2C", "d2D", "det")

    def __init__(self, z: np.ndarray, order: int = 0):
        z = np.asarray(z, dtype=complex)
        self.z = z
        self.order = order
        one = np.ones(z.shape, dtype=complex)
        zero = np.zeros(z.shape, dtype=complex)
        self.A, self.B, self.C, self.D = one.copy(), zero.copy(), zero.copy(), one.copy()
        self.det = one.copy()
        self.dA = self.dB = self.dC = self.dD = None
        self.d2A = self.d2B = self.d2C = self.d2D = None
        if order >= 1:
            self.dA, self.dB, self.dC, self.dD = (
                zero.copy(), zero.copy(), zero.copy(), zero.copy())
        if order >= 2:
            self.d2A, self.d2B, self.d2C, self.d2D = (
                zero.copy(), zero.copy(), zero.copy(), zero.copy())

    def copy(self) -> "PropagationState":
        out = PropagationState.__new__(PropagationState)
        out.z = self.z
        out.order = self.order
        for name in ("A", "B", "C", "D", "dA", "dB", "dC", "dD",
                     "d2A", "d2B", "d2C", "d2D", "det"):
            val = getattr(self, name)
            setattr(out, name, None if val is None else val.copy())
        return out


def _prepared_cells(pot: SampledPotential, t1: float, t2: float, z: np.ndarray):
    """Cell cover of [t1, t2], coalesced then re-chunked for conditioning.

    Coalescing equal-value neighbours is exact (one generator); chunks are
    capped so |l| * width stays small enough that each per-cell determinant
    is computed at full precision.
    """
    qs, ws = cell_cover(pot, t1, t2, coalesce=True)
    if len(qs) == 0:
        return qs, ws
    im_max = float(np.max(np.abs(np.imag(np.asarray(z, dtype=complex)))))
    scale = np.abs(qs) + im_max
    n = np.maximum(1, np.ceil(ws * scale / _CHUNK_CAP).astype(int))
    if np.any(n > 1):
        qs = np.repeat(qs, n)
        ws = np.repeat(ws / n, n)
    return qs, ws


def _advance(state: PropagationState, qs, ws) -> PropagationState:
    """Multiply the ordered cell propagators onto ``state`` (in place)."""
    z = state.z
    order = state.order
    corruption = _TEST_CORRUPTION
    for q, w in zip(qs, ws):
        m = (q * q) - z * z
        c, s, sm, smm = _coeffs(m, float(w), order)
        if corruption != 0.0:
            c = c + corruption
        p11 = c + s * q
        p12 = -s * z
        p21 = s * z
        p22 = c - s * q
        if order >= 1:
            cm = 0.5 * w * s
            cz = -2.0 * z * cm
            sz = -2.0 * z * sm
            q11 = cz + sz * q
            q12 = -(sz * z + s)
            q21 = sz * z + s
            q22 = cz - sz * q
        if order >= 2:
            cmm = 0.5 * w * sm
            czz = -2.0 * cm + 4.0 * (z * z) * cmm
            szz = -2.0 * sm + 4.0 * (z * z) * smm
            r11 = czz + szz * q
            r12 = -(szz * z + 2.0 * sz)
            r21 = szz * z + 2.0 * sz
            r22 = czz - szz * q
            n2A = r11 * state.A + r12 * state.C + 2.0 * (q11 * state.dA + q12 * state.dC) \
                + p11 * state.d2A + p12 * state.d2C
            n2C = r21 * state.A + r22 * state.C + 2.0 * (q21 * state.dA + q22 * state.dC) \
                + p21 * state.d2A + p22 * state.d2C
            n2B = r11 * state.B + r12 * state.D + 2.0 * (q11 * state.dB + q12 * state.dD) \
                + p11 * state.d2B + p12 * state.d2D
            n2D = r21 * state.B + r22 * state.D + 2.0 * (q21 * state.dB + q22 * state.dD) \
                + p21 * state.d2B + p22 * state.d2D
        if order >= 1:
            n1A = q11 * state.A + q12 * state.C + p11 * state.dA + p12 * state.dC
            n1C = q21 * state.A + q22 * state.C + p21 * state.dA + p22 * state.dC
            n1B = q11 * state.B + q12 * state.D + p11 * state.dB + p12 * state.dD
            n1D = q21 * state.B + q22 * state.D + p21 * state.dB + p22 * state.dD
        nA = p11 * state.A + p12 * state.C
        nC = p21 * state.A + p22 * state.C
        nB = p11 * state.B + p12 * state.D
        nD = p21 * state.B + p22 * state.D
        state.A, state.B, state.C, state.D = nA, nB, nC, nD
        if order >= 1:
            state.dA, state.dB, state.dC, state.dD = n1A, n1B, n1C, n1D
        if order >= 2:
            state.d2A, state.d2B, state.d2C, state.d2D = n2A, n2B, n2C, n2D
        state.det = state.det * (c * c - m * (s * s))
    return state


def _check_range(z: np.ndarray, t: float) -> None:
    im_max = float(np.max(np.abs(np.imag(np.asarray(z, dtype=complex))))) if np.size(z) else 0.0
    if im_max * t > WORK_RANGE_LIMIT:
        raise OverflowRangeError(
            f"|Im z| * t = {im_max * t:.3g} exceeds the supported working range "
            f"{WORK_RANGE_LIMIT}; split the evaluation or shrink the box"
        )


def _check_drift(state: PropagationState) -> None:
    drift = float(np.max(np.abs(state.det - 1.0))) if np.size(state.det) else 0.0
    if drift > DET_DRIFT_ABORT:
        raise InvariantViolation(
            f"tracked determinant drifted by {drift:.3g} (> {DET_DRIFT_ABORT}); "
            "the cell propagators are numerically corrupt"
        )


def _resolve_t(pot: SampledPotential, t: float | None) -> float:
    if t is None:
        return pot.T
    if t < 0:
        raise RangeError(f"propagation time must be >= 0, got {t}")
    return float(t)


def _propagate(pot, z, t, order):
    t = _resolve_t(pot, t)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    _check_range(z, t)
    qs, ws = _prepared_cells(pot, 0.0, t, z)
    state = _advance(PropagationState(z, order=order), qs, ws)
    _check_drift(state)
    return state, t


def transfer(pot: SampledPotential, z: complex, t: float | None = None) -> TransferMatrix:
    """Transfer matrix M(t, z) for one frequency.

    Args:
        pot: piecewise-constant potential.
        z: complex frequency; ``|Im z| * t`` must stay within the working range.
        t: evaluation time (defaults to ``pot.T``); may exceed the support,
            in which case the potential is extended by zero.
    """
    state, t = _propagate(pot, z, t, order=0)
    return BatchTransfer(
        t=t, z=state.z, A=state.A, B=state.B, C=state.C, D=state.D,
        det_tracked=state.det,
    ).at(0)


def transfer_batch(pot: SampledPotential, z, t: float | None = None) -> BatchTransfer:
    """Vectorized :func:`transfer` over an array of frequencies."""
    state, t = _propagate(pot, z, t, order=0)
    return BatchTransfer(
        t=t, z=state.z, A=state.A, B=state.B, C=state.C, D=state.D,
        det_tracked=state.det,
    )


def transfer_derivative(
    pot: SampledPotential, z: complex, t: float | None = None, order: int = 1
) -> AugmentedTransfer:
    """Transfer matrix with its z-derivatives (order 1 or 2).

    Derivatives are exact (product rule over exact cell derivatives), not
    finite differences.  ``dM`` vanishes at ``t = 0`` and satisfies
    ``trace(M^-1 dM) = 0`` up to rounding.
    """
    if order not in (1, 2):
        raise RangeError(f"derivative order must be 1 or 2, got {order}")
    state, t = _propagate(pot, z, t, order=order)
    tm = BatchTransfer(
        t=t, z=state.z, A=state.A, B=state.B, C=state.C, D=state.D,
        det_tracked=state.det,
    ).at(0)
    kw = {}
    if order >= 2:
        kw = dict(
            d2A=complex(state.d2A[0]), d2B=complex(state.d2B[0]),
            d2C=complex(state.d2C[0]), d2D=complex(state.d2D[0]),
        )
    return AugmentedTransfer(
        m=tm,
        dA=complex(state.dA[0]), dB=complex(state.dB[0]),
        dC=complex(state.dC[0]), dD=complex(state.dD[0]),
        **kw,
    )


def transfer_derivative_batch(
    pot: SampledPotential, z, t: float | None = None, order: int = 1
) -> PropagationState:
    """Batch propagation carrying derivative entries; returns the raw state."""
    if order not in (1, 2):
        raise RangeError(f"derivative order must be 1 or 2, got {order}")
    state, _ = _propagate(pot, z, t, order=order)
    return state


def transfer_checkpoints(pot: SampledPotential, z, t_list) -> list[BatchTransfer]:
    """Transfer matrices at several increasing times, in one sweep.

    Equivalent to calling :func:`transfer_batch` at each ``t`` but the
    propagation is shared; returned in the order of ``sorted(t_list)``.
    """
    ts = sorted(float(t) for t in t_list)
    if ts and ts[0] < 0:
        raise RangeError("checkpoint times must be >= 0")
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if ts:
        _check_range(z, ts[-1])
    state = PropagationState(z, order=0)
    out: list[BatchTransfer] = []
    prev = 0.0
    for t in ts:
        qs, ws = _prepared_cells(pot, prev, t, z)
        state = _advance(state, qs, ws)
        out.append(
            BatchTransfer(
                t=t, z=z, A=state.A.copy(), B=state.B.copy(),
                C=state.C.copy(), D=state.D.copy(), det_tracked=state.det.copy(),
            )
        )
        prev = t
    _check_drift(state)
    return out


# ---------------------------------------------------------------------------
# Hermite-Biehler functions and theta
# ---------------------------------------------------------------------------


def hermite_biehler(m: TransferMatrix | BatchTransfer) -> HermiteBiehlerPair:
    """First-kind entire functions of a transfer matrix (E = A - iC, ...)."""
    return HermiteBiehlerPair(
        E=m.A - 1j * m.C,
        Etilde=m.B - 1j * m.D,
        Esharp=m.A + 1j * m.C,
        Etildesharp=m.B + 1j * m.D,
    )


def _theta_from_entries(A, C):
    E = A - 1j * C
    Esharp = A + 1j * C
    floor = POLE_FLOOR * (np.abs(A) + np.abs(C) + 1.0)
    bad = np.abs(E) <= floor
    if np.any(bad):
        raise PoleProximityError(
            "theta evaluated too close to a pole (|A - iC| under its floor); "
            "the point sits at a conjugate zero of the first-kind function"
        )
    return Esharp / E


def theta(m: TransferMatrix | BatchTransfer):
    """Inner-function value theta = (A + iC)/(A - iC).

    Unimodular on the real axis, strictly contractive in the open upper
    half-plane.  Raises :class:`PoleProximityError` at (numerical) poles.
    """
    val = _theta_from_entries(np.asarray(m.A, dtype=complex), np.asarray(m.C, dtype=complex))
    if isinstance(m, TransferMatrix):
        return complex(val)
    return val


def theta_derivs(aug: AugmentedTransfer):
    """theta with its z-derivatives from an augmented transfer matrix.

    Returns ``(theta, theta_z)`` for order 1 and ``(theta, theta_z,
    theta_zz)`` for order 2.  Uses the exact reduction
    ``theta_z = 2i (A C' - A' C) / E^2``.
    """
    m = aug.m
    E = m.A - 1j * m.C
    floor = POLE_FLOOR * (abs(m.A) + abs(m.C) + 1.0)
    if abs(E) <= floor:
        raise PoleProximityError("theta derivative requested at a pole of theta")
    th = (m.A + 1j * m.C) / E
    wronsk = m.A * aug.dC - aug.dA * m.C
    th_z = 2j * wronsk / (E * E)
    if aug.order < 2:
        return th, th_z
    dE = aug.dA - 1j * aug.dC
    d2N = aug.d2A + 1j * aug.d2C
    d2E = aug.d2A - 1j * aug.d2C
    th_zz = (d2N - 2.0 * th_z * dE - th * d2E) / E
    return th, th_z, th_zz
