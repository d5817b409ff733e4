"""Optical fields as sampled complex envelopes.

Each :class:`Field` carries its own ``carrier``: the offset [Hz] of its
rotating frame from a shared optical reference. Only carrier differences
matter for the photocurrent, so a frequency shifter moves the frame instead
of multiplying by a fast exponential and never aliases, whatever ``fs``.
A field can still be written out in any other frame with
:meth:`Field.in_frame` when that frame is within Nyquist.
"""

from dataclasses import dataclass, replace

import numpy as np

from .budget import LaserSource


class AliasingError(ValueError):
    pass


def as_generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class Field:
    samples: np.ndarray  # complex envelope [sqrt(W)]
    fs: float
    carrier: float = 0.0  # [Hz]
    t0: float = 0.0  # [s]
    rin: float = 0.0  # relative intensity noise at RF [1/Hz], linear

    def __len__(self):
        return self.samples.size

    def times(self):
        return self.t0 + np.arange(self.samples.size) / self.fs

    def power(self):
        """Mean optical power [W]."""
        return float(np.mean(np.abs(self.samples) ** 2))

    def scaled(self, power_factor):
        return replace(self, samples=self.samples * np.sqrt(power_factor))

    def in_frame(self, carrier):
        """Envelope referred to another frame (needs |offset| < fs/2)."""
        d = self.carrier - carrier
        if abs(d) >= self.fs / 2:
            raise AliasingError(f"frame offset {d:g} Hz not representable at fs = {self.fs:g} Hz")
        return self.samples * np.exp(2j * np.pi * d * self.times())


class LaserStream:
    """Chunked Wiener-phase laser: exp(i phi) with phi increments of
    variance 2 pi FWHM / fs, which gives a Lorentzian line of that FWHM."""

    def __init__(self, src: LaserSource, fs, seed=None, carrier=0.0, phase0=0.0):
        self.src = src
        self.fs = float(fs)
        self.rng = as_generator(seed)
        self.carrier = carrier
        self.phase = phase0
        self.n = 0

    def next(self, n) -> Field:
        sigma = np.sqrt(2 * np.pi * self.src.linewidth_fwhm / self.fs)
        if sigma > 0:
            phi = self.phase + np.cumsum(self.rng.standard_normal(n) * sigma)
        else:
            phi = np.full(n, self.phase)
        out = Field(np.sqrt(self.src.power) * np.exp(1j * phi), self.fs, self.carrier,
                    t0=self.n / self.fs, rin=self.src.rin_linear)
        self.phase = float(phi[-1])
        self.n += n
        return out


def synth_field(src: LaserSource, fs, n, seed=None, carrier=0.0) -> Field:
    """``n`` samples of a free-running laser envelope.

    Intensity noise at RF (``src.rin_db_hz``) travels with the field as its
    ``rin`` level and is drawn at detection, where the RF band is known.
    """
    if n < 2 or fs <= 0:
        raise ValueError("need n >= 2 and fs > 0")
    return LaserStream(src, fs, seed, carrier).next(n)


@dataclass(frozen=True)
class AomConfig:
    f_shift: float = 105e6  # [Hz]
    diffraction_efficiency: float = 1.0

    def __post_init__(self):
        if self.f_shift <= 0:
            raise ValueError("f_shift must be > 0")
        if not 0 < self.diffraction_efficiency <= 1:
            raise ValueError("diffraction_efficiency must lie in (0, 1]")


def apply_aom(field: Field, aom: AomConfig) -> Field:
    """First-order diffracted beam: frame moved by ``f_shift``, phase noise kept."""
    return replace(field, samples=field.samples * np.sqrt(aom.diffraction_efficiency),
                   carrier=field.carrier + aom.f_shift)


@dataclass(frozen=True)
class OpticalPath:
    od_total: float = 0.0
    splitter_t: float = 0.5  # mixing splitter intensity transmission
    splitter_loss: float = 0.0
    chopper_freq: float | None = None  # [Hz]
    chopper_duty: float = 0.5

    def __post_init__(self):
        if self.od_total < 0:
            raise ValueError("od_total must be >= 0")
        if not (0 <= self.splitter_t <= 1 and 0 <= self.splitter_loss < 1):
            raise ValueError("splitter_t and splitter_loss must lie in [0, 1]")
        if self.splitter_reflection < -1e-15:
            raise ValueError("splitter_t + splitter_loss must not exceed 1")
        if not 0 < self.chopper_duty <= 1:
            raise ValueError("chopper_duty must lie in (0, 1]")
        if self.chopper_freq is not None and self.chopper_freq <= 0:
            raise ValueError("chopper_freq must be > 0")

    @property
    def attenuation(self):
        return 10.0 ** (-self.od_total)

    @property
    def splitter_reflection(self):
        return 1.0 - self.splitter_t - self.splitter_loss


def chopper_gate(t, freq, duty):
    return (np.mod(t * freq, 1.0) < duty).astype(float)


def attenuate_and_chop(field: Field, path: OpticalPath) -> Field:
    """Power times 10^-OD, then on/off square-wave chopping when configured."""
    s = field.samples * np.sqrt(path.attenuation)
    if path.chopper_freq is not None:
        s = s * chopper_gate(field.times(), path.chopper_freq, path.chopper_duty)
    return replace(field, samples=s)


def apply_mzi(field: Field, delta_phi, coupling="in_phase") -> Field:
    """Two identical copies of the field recombined with relative phase ``delta_phi``.

    ``coupling="field"`` sums the complex amplitudes, E (1 + exp(i dphi)).
    ``coupling="in_phase"`` keeps only the in-phase part, E (1 + cos dphi): the
    form whose squared beat amplitude gives the (1 + cos dphi)^2 fringe.
    Both give four times the single-arm beat power at dphi = 0.
    """
    if coupling == "in_phase":
        factor = 1.0 + np.cos(delta_phi)
    elif coupling == "field":
        factor = 1.0 + np.exp(1j * delta_phi)
    else:
        raise ValueError(f"unknown coupling {coupling!r}")
    return replace(field, samples=field.samples * factor)


def split_ports(e_lo: Field, e_sig: Field, path: OpticalPath):
    """Output-port envelopes of the mixing splitter, [[sqrt T, i sqrt R], [i sqrt R, sqrt T]].

    Both inputs are taken in their own frames; port powers summed over the
    two outputs do not depend on that choice.
    """
    if len(e_lo) != len(e_sig):
        raise ValueError("field lengths differ")
    t = np.sqrt(path.splitter_t)
    r = np.sqrt(max(path.splitter_reflection, 0.0))
    a, b = e_lo.samples, e_sig.samples
    return t * a + 1j * r * b, 1j * r * a + t * b
