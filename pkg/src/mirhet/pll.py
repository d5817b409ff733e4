"""Optical phase-locked loop: limiter phase detector + PI controller on the LO frequency.

The loop sees the beat-note reference as a complex envelope relative to the
RF clock, u = exp(i theta) (+ noise). Mixing with the clock and low-pass
filtering gives the error sin(theta - psi); a proportional-integral
controller steers the LO so that its phase correction psi tracks theta.

Linearised, the closed loop is a type-2 second-order system with
omega_n^2 = 2 pi ki and 2 zeta omega_n = 2 pi kp (kp in Hz/rad, ki in Hz/(rad s)).
"""

from dataclasses import dataclass, field, replace
import math

import numba
import numpy as np

from .optics import Field

LOCK_RMS_LIMIT = 1.0  # [rad]


def critical_gains(f_n, zeta=1.0):
    """(kp, ki) for natural frequency ``f_n`` [Hz] and damping ``zeta``."""
    return 2.0 * zeta * f_n, 2.0 * math.pi * f_n**2


def residual_phase_variance(linewidth_sum, kp):
    """Linearised in-lock residual variance [rad^2] for Wiener phase noise.

    With a type-2 loop the result, 2 pi dnu / (4 zeta omega_n), reduces to
    dnu / (2 kp), independent of ki.
    """
    if kp <= 0:
        return math.inf
    return linewidth_sum / (2.0 * kp)


@dataclass(frozen=True)
class PllConfig:
    f_clock: float = 100e6  # [Hz]
    loop_bandwidth: float = 2e6  # loop natural frequency [Hz]
    kp: float | None = None  # [Hz/rad]; None -> critically damped from loop_bandwidth
    ki: float | None = None  # [Hz/(rad s)]
    ref_detector_bandwidth: float = 200e6  # [Hz]
    clock_spur_dbm: float | None = None
    damping: float = 1.0
    settle_time: float | None = None  # excluded from the residual statistics [s]

    def __post_init__(self):
        if self.f_clock <= 0:
            raise ValueError("f_clock must be > 0")
        if not 0 < self.loop_bandwidth < self.ref_detector_bandwidth:
            raise ValueError("need 0 < loop_bandwidth < ref_detector_bandwidth")
        for name in ("kp", "ki"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.damping <= 0:
            raise ValueError("damping must be > 0")

    @property
    def gains(self):
        kp0, ki0 = critical_gains(self.loop_bandwidth, self.damping)
        return (kp0 if self.kp is None else self.kp), (ki0 if self.ki is None else self.ki)

    @property
    def settle(self):
        if self.settle_time is not None:
            return self.settle_time
        return 10.0 / (2.0 * math.pi * self.loop_bandwidth)

    def replace(self, **changes):
        return replace(self, **changes)


@numba.njit(cache=True)
def _loop(u_re, u_im, kp, ki, dt, psi, integ, theta_prev, skip, acc):
    """Run the loop over one chunk.

    ``acc`` = [sum theta^2, count, slips, unwrapped theta, cycle index]. A slip
    is a net 2 pi step: the unwrapped residual leaving its cycle by > 3 pi / 2.
    """
    n = u_re.size
    out = np.empty(n)
    two_pi = 2.0 * np.pi
    for k in range(n):
        c = math.cos(psi)
        s = math.sin(psi)
        # u * exp(-i psi)
        re = u_re[k] * c + u_im[k] * s
        im = u_im[k] * c - u_re[k] * s
        mag = math.hypot(re, im)
        e = im / mag if mag > 0.0 else 0.0
        theta = math.atan2(im, re)
        d = theta - theta_prev
        d -= two_pi * math.floor((d + np.pi) / two_pi)
        acc[3] += d
        if abs(acc[3] - two_pi * acc[4]) > 1.5 * np.pi:
            if k >= skip:
                acc[2] += 1.0
            acc[4] = math.floor(acc[3] / two_pi + 0.5)
        theta_prev = theta
        if k >= skip:
            acc[0] += theta * theta
            acc[1] += 1.0
        out[k] = psi
        integ += ki * e * dt
        psi += two_pi * dt * (kp * e + integ)
        if psi > np.pi or psi < -np.pi:
            psi -= two_pi * math.floor((psi + np.pi) / two_pi)
    return out, psi, integ, theta_prev


@dataclass
class LockReport:
    locked: bool
    residual_rms: float  # [rad]
    cycle_slips: int
    kp: float
    ki: float
    f_clock: float
    samples: int

    def as_dict(self):
        return dict(locked=self.locked, residual_rms_rad=self.residual_rms,
                    cycle_slips=self.cycle_slips, kp=self.kp, ki=self.ki,
                    f_clock=self.f_clock, samples=self.samples)


@dataclass
class PllState:
    """Loop state carried between chunks of a long record."""

    psi: float = 0.0
    integ: float = 0.0
    theta_prev: float = 0.0
    n_seen: int = 0
    acc: np.ndarray = field(default_factory=lambda: np.zeros(5))

    def report(self, pll: PllConfig) -> LockReport:
        kp, ki = pll.gains
        n = int(self.acc[1])
        rms = math.sqrt(self.acc[0] / n) if n else math.nan
        return LockReport(locked=bool(n and rms <= LOCK_RMS_LIMIT), residual_rms=rms,
                          cycle_slips=int(self.acc[2]), kp=kp, ki=ki, f_clock=pll.f_clock,
                          samples=n)


def reference_beat(e_lo: Field, e_sig: Field, f_clock):
    """Unit-amplitude beat envelope of the reference detector, relative to the clock."""
    d = e_sig.carrier - e_lo.carrier - f_clock
    u = np.conj(e_lo.samples) * e_sig.samples
    if d != 0.0:
        u = u * np.exp(2j * np.pi * d * e_lo.times())
    mag = np.abs(u)
    return np.where(mag > 0, u / np.where(mag > 0, mag, 1.0), 0.0)


def run_pll(beat_reference, pll: PllConfig, lo_field: Field, state: PllState | None = None,
            fs=None):
    """Close the loop over ``beat_reference`` and return (corrected LO, report, state).

    ``beat_reference`` is the complex envelope of the reference beat relative
    to ``f_clock`` (array or TimeSeries). The corrected LO carries the phase
    correction psi, so its beat against the signal sits at the clock with
    phase theta - psi. Loss of lock is reported, never raised.
    """
    u = np.asarray(getattr(beat_reference, "samples", beat_reference), dtype=complex)
    fs = lo_field.fs if fs is None else fs
    if u.size != len(lo_field):
        raise ValueError("reference and LO lengths differ")
    if state is None:
        state = PllState()
    kp, ki = pll.gains
    skip = max(0, int(round(pll.settle * fs)) - state.n_seen)
    psi, state.psi, state.integ, state.theta_prev = _loop(
        np.ascontiguousarray(u.real), np.ascontiguousarray(u.imag), kp, ki, 1.0 / fs,
        state.psi, state.integ, state.theta_prev, min(skip, u.size), state.acc)
    state.n_seen += u.size
    corrected = replace(lo_field, samples=lo_field.samples * np.exp(1j * psi))
    return corrected, state.report(pll), state
