"""Labeled tensor-product state engine for two photons and three NV spins.

Basis packing (little-endian, first field varies fastest)::

    photon-local index = pol + 2*freq + 4*spatial + 8*timebin [+ 16*port]
    spin index         = s1 + 2*s2 + 4*s3
    joint index        = ia + da*ib + da*db*spin

where ``da``/``db`` are 16, or 32 while the photon carries a transient
port (arm) label. Every label value is 0/1 as given by the enums below.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple, Sequence

import numpy as np

ATOL = 1e-12
INPUT_ATOL = 1e-10

PHOTON_FIELDS = ("pol", "freq", "spatial", "timebin")
PORT_FIELD = "port"


class Pol(IntEnum):
    R = 0
    L = 1


class Freq(IntEnum):
    W1 = 0
    W2 = 1


class Spatial(IntEnum):
    M1 = 0
    M2 = 1


class TimeBin(IntEnum):
    L = 0  # long (early-labelled l)
    S = 1  # short


class Port(IntEnum):
    UP = 0
    DOWN = 1


class Spin(IntEnum):
    PLUS = 0
    MINUS = 1

    @property
    def sign(self) -> str:
        return "+" if self is Spin.PLUS else "-"

    @classmethod
    def parse(cls, value) -> "Spin":
        if isinstance(value, Spin):
            return value
        if value in ("+", "plus", 0):
            return cls.PLUS
        if value in ("-", "minus", 1):
            return cls.MINUS
        raise ValueError(f"not a spin outcome: {value!r}")


FIELD_ENUMS = {
    "pol": Pol,
    "freq": Freq,
    "spatial": Spatial,
    "timebin": TimeBin,
    "port": Port,
}


class HilbertError(Exception):
    """Base class for state-engine errors."""


class NormalizationError(HilbertError, ValueError):
    pass


class DimensionError(HilbertError, ValueError):
    pass


class ZeroStateError(HilbertError, ValueError):
    pass


class PhotonMode(NamedTuple):
    pol: Pol
    freq: Freq
    spatial: Spatial
    timebin: TimeBin
    port: Port | None = None

    @property
    def index(self) -> int:
        i = self.pol + 2 * self.freq + 4 * self.spatial + 8 * self.timebin
        if self.port is not None:
            i += 16 * self.port
        return int(i)

    @classmethod
    def from_index(cls, index: int, with_port: bool = False) -> "PhotonMode":
        dim = 32 if with_port else 16
        if not 0 <= index < dim:
            raise DimensionError(f"photon index {index} outside [0, {dim})")
        bits = [(index >> k) & 1 for k in range(5)]
        port = Port(bits[4]) if with_port else None
        return cls(Pol(bits[0]), Freq(bits[1]), Spatial(bits[2]), TimeBin(bits[3]), port)

    def label(self) -> str:
        parts = [self.pol.name, self.freq.name.lower(), self.spatial.name.lower(),
                 self.timebin.name.lower()]
        if self.port is not None:
            parts.append(self.port.name.lower())
        return ",".join(parts)


def photon_dim(with_port: bool) -> int:
    return 32 if with_port else 16


def spin_index(spins: Sequence[Spin]) -> int:
    s1, s2, s3 = spins
    return int(s1 + 2 * s2 + 4 * s3)


def spins_from_index(index: int) -> tuple[Spin, Spin, Spin]:
    return tuple(Spin((index >> k) & 1) for k in range(3))


def pack(mode_a: PhotonMode, mode_b: PhotonMode, spins: Sequence[Spin]) -> int:
    """Joint basis index of a labelled basis ket."""
    da = photon_dim(mode_a.port is not None)
    db = photon_dim(mode_b.port is not None)
    return mode_a.index + da * mode_b.index + da * db * spin_index(spins)


def unpack(index: int, a_port: bool = False, b_port: bool = False):
    """Inverse of :func:`pack`; returns ``(mode_a, mode_b, spins)``."""
    da, db = photon_dim(a_port), photon_dim(b_port)
    if not 0 <= index < da * db * 8:
        raise DimensionError(f"joint index {index} out of range")
    ia = index % da
    ib = (index // da) % db
    ispin = index // (da * db)
    return (PhotonMode.from_index(ia, a_port), PhotonMode.from_index(ib, b_port),
            spins_from_index(ispin))


@dataclass(frozen=True)
class PhotonInputSpec:
    """Amplitude pairs of one photon's frequency, spatial and time-bin qubits.

    Polarization is always prepared in R.
    """

    freq_amps: tuple[complex, complex]
    spatial_amps: tuple[complex, complex]
    time_amps: tuple[complex, complex]

    def __post_init__(self):
        for name in ("freq_amps", "spatial_amps", "time_amps"):
            pair = tuple(complex(c) for c in getattr(self, name))
            if len(pair) != 2:
                raise NormalizationError(f"{name} must hold exactly two amplitudes")
            norm = abs(pair[0]) ** 2 + abs(pair[1]) ** 2
            if abs(norm - 1.0) > INPUT_ATOL:
                raise NormalizationError(
                    f"{name} has |c1|^2 + |c2|^2 = {norm:.12g}, expected 1"
                )
            object.__setattr__(self, name, pair)

    @classmethod
    def basis(cls, freq=Freq.W1, spatial=Spatial.M1, timebin=TimeBin.L) -> "PhotonInputSpec":
        def ket(bit):
            return (1.0, 0.0) if int(bit) == 0 else (0.0, 1.0)
        return cls(ket(freq), ket(spatial), ket(timebin))

    @classmethod
    def uniform(cls) -> "PhotonInputSpec":
        h = 1 / np.sqrt(2)
        return cls((h, h), (h, h), (h, h))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "PhotonInputSpec":
        pairs = []
        for _ in range(3):
            v = rng.normal(size=2) + 1j * rng.normal(size=2)
            v /= np.linalg.norm(v)
            pairs.append((complex(v[0]), complex(v[1])))
        return cls(*pairs)

    @property
    def pairs(self) -> tuple[tuple[complex, complex], ...]:
        return (self.freq_amps, self.spatial_amps, self.time_amps)

    def vector(self) -> np.ndarray:
        """16-dim photon-local vector (polarization R)."""
        pol = np.array([1.0, 0.0], dtype=complex)
        f, s, t = (np.asarray(p, dtype=complex) for p in self.pairs)
        # kron runs most-significant field first
        return np.kron(t, np.kron(s, np.kron(f, pol)))


@dataclass(frozen=True)
class StateVector:
    """Immutable dense amplitudes over (photon a, photon b, spins).

    ``amplitudes`` has shape ``(da, db, 8)``; ``tracked_norm`` is the squared
    norm, recorded when the value is built.
    """

    amplitudes: np.ndarray
    tracked_norm: float = field(init=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex, copy=True)
        if amps.ndim != 3 or amps.shape[0] not in (16, 32) or amps.shape[1] not in (16, 32) \
                or amps.shape[2] != 8:
            raise DimensionError(f"bad amplitude shape {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "tracked_norm", float(np.vdot(amps, amps).real))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.amplitudes.shape

    @property
    def a_port(self) -> bool:
        return self.shape[0] == 32

    @property
    def b_port(self) -> bool:
        return self.shape[1] == 32

    @property
    def norm_sq(self) -> float:
        return self.tracked_norm

    def vector(self) -> np.ndarray:
        """Flat amplitudes in joint-index order."""
        return self.amplitudes.reshape(-1, order="F")

    @classmethod
    def from_vector(cls, vec, a_port: bool = False, b_port: bool = False) -> "StateVector":
        da, db = photon_dim(a_port), photon_dim(b_port)
        vec = np.asarray(vec, dtype=complex)
        if vec.size != da * db * 8:
            raise DimensionError(f"vector of size {vec.size} does not match {(da, db, 8)}")
        return cls(vec.reshape((da, db, 8), order="F"))

    def amplitude(self, mode_a: PhotonMode, mode_b: PhotonMode, spins) -> complex:
        return complex(self.amplitudes[mode_a.index, mode_b.index, spin_index(spins)])

    def normalized(self) -> "StateVector":
        if self.tracked_norm <= ATOL ** 2:
            raise ZeroStateError("cannot normalize a zero state")
        return StateVector(self.amplitudes / np.sqrt(self.tracked_norm))

    def spin_tensor(self) -> np.ndarray:
        """View with the spin axis split into (s1, s2, s3)."""
        da, db, _ = self.shape
        return self.amplitudes.reshape((da, db, 2, 2, 2), order="F")

    def nonzero(self, atol: float = ATOL):
        """Yield ``(index, amplitude)`` for amplitudes above ``atol``."""
        vec = self.vector()
        for i in np.flatnonzero(np.abs(vec) > atol):
            yield int(i), complex(vec[i])

    def to_json(self, atol: float = ATOL) -> dict:
        """Sparse JSON form; complex numbers are ``{re, im}`` objects."""
        return {
            "packing": "ia + da*ib + da*db*(s1 + 2*s2 + 4*s3); "
                       "photon: pol + 2*freq + 4*spatial + 8*timebin + 16*port",
            "a_port": self.a_port,
            "b_port": self.b_port,
            "amplitudes": [
                {"index": i, "re": a.real, "im": a.imag} for i, a in self.nonzero(atol)
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "StateVector":
        a_port, b_port = bool(data["a_port"]), bool(data["b_port"])
        vec = np.zeros(photon_dim(a_port) * photon_dim(b_port) * 8, dtype=complex)
        for entry in data["amplitudes"]:
            vec[int(entry["index"])] = complex(entry["re"], entry["im"])
        return cls.from_vector(vec, a_port, b_port)


def _spin_ket_plus_minus() -> np.ndarray:
    return np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)


def make_initial_state(spec_a: PhotonInputSpec, spec_b: PhotonInputSpec) -> StateVector:
    """Product of both photon inputs and three spins in (|+> + |->)/sqrt(2)."""
    for spec in (spec_a, spec_b):
        if not isinstance(spec, PhotonInputSpec):
            raise TypeError("expected PhotonInputSpec")
    s = _spin_ket_plus_minus()
    spins = np.kron(s, np.kron(s, s))
    amps = np.einsum("i,j,k->ijk", spec_a.vector(), spec_b.vector(), spins)
    return StateVector(amps)


def _check_photon(photon: str) -> int:
    if photon not in ("a", "b"):
        raise ValueError(f"photon must be 'a' or 'b', got {photon!r}")
    return 0 if photon == "a" else 1


def apply_single_photon_map(state: StateVector, photon: str, op) -> StateVector:
    """Apply ``op`` (shape ``(out, in)``) to one photon's local space.

    ``in`` must equal the photon's current dimension; ``out`` may be 16 or 32,
    which attaches or drops the port label.
    """
    axis = _check_photon(photon)
    op = np.asarray(op, dtype=complex)
    d_in = state.shape[axis]
    if op.ndim != 2 or op.shape[1] != d_in or op.shape[0] not in (16, 32):
        raise DimensionError(f"map of shape {op.shape} cannot act on photon {photon} (dim {d_in})")
    if axis == 0:
        amps = np.einsum("ij,jkl->ikl", op, state.amplitudes)
    else:
        amps = np.einsum("ij,kjl->kil", op, state.amplitudes)
    return StateVector(amps)


def apply_photon_spin_map(state: StateVector, photon: str, nv: int, op) -> StateVector:
    """Apply ``op`` on (photon-local x spin ``nv``); local index ``p + d*s``."""
    axis = _check_photon(photon)
    if nv not in (1, 2, 3):
        raise ValueError(f"nv must be 1, 2 or 3, got {nv!r}")
    d = state.shape[axis]
    op = np.asarray(op, dtype=complex)
    if op.shape != (2 * d, 2 * d):
        raise DimensionError(f"map of shape {op.shape} does not match photon-spin dim {2 * d}")
    op4 = op.reshape((d, 2, d, 2), order="F")  # [p', s', p, s]
    t = state.spin_tensor()
    spin_axis = 1 + nv
    # contract photon and spin axes, then put the new axes back in place
    out = np.tensordot(op4, t, axes=([2, 3], [axis, spin_axis]))
    out = np.moveaxis(out, [0, 1], [axis, spin_axis])
    da, db = out.shape[:2]
    return StateVector(out.reshape((da, db, 8), order="F"))


def apply_spin_map(state: StateVector, nv: int, op) -> StateVector:
    """Apply a 2x2 map to spin ``nv`` only."""
    if nv not in (1, 2, 3):
        raise ValueError(f"nv must be 1, 2 or 3, got {nv!r}")
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise DimensionError(f"spin map must be 2x2, got {op.shape}")
    t = state.spin_tensor()
    spin_axis = 1 + nv
    out = np.moveaxis(np.tensordot(op, t, axes=([1], [spin_axis])), 0, spin_axis)
    da, db = out.shape[:2]
    return StateVector(out.reshape((da, db, 8), order="F"))


def project_spin(state: StateVector, nv: int, spin: Spin) -> StateVector:
    """Unnormalized projection of spin ``nv`` onto ``spin``."""
    proj = np.zeros((2, 2), dtype=complex)
    proj[spin, spin] = 1.0
    return apply_spin_map(state, nv, proj)


class SpinReadout(NamedTuple):
    nv: int
    spin: Spin
    probability: float


def measure_spin(state: StateVector, nv: int, source) -> tuple[SpinReadout, StateVector]:
    """Measure spin ``nv`` in the {|+>, |->} basis.

    ``source`` is either a ``numpy.random.Generator`` (sampled outcome) or a
    forced outcome (``Spin``, ``'+'``/``'-'``). The reported probability is
    the squared norm of the projected branch, so both branches sum to the
    current squared norm. The returned state is the branch scaled to unit norm.
    """
    branches = {s: project_spin(state, nv, s) for s in Spin}
    p = {s: b.tracked_norm for s, b in branches.items()}
    total = p[Spin.PLUS] + p[Spin.MINUS]
    if total <= ATOL ** 2:
        raise ZeroStateError("both measurement branches vanish")
    if isinstance(source, np.random.Generator):
        outcome = Spin.PLUS if source.random() < p[Spin.PLUS] / total else Spin.MINUS
    else:
        outcome = Spin.parse(source)
    if p[outcome] <= ATOL ** 2:
        raise ZeroStateError(f"forced outcome {outcome.sign} on NV{nv} has zero probability")
    return SpinReadout(nv, outcome, p[outcome]), branches[outcome].normalized()


def branch_norms(state: StateVector) -> dict[tuple[Spin, Spin, Spin], float]:
    """Squared norm of every joint spin projection (all 8 outcomes)."""
    sq = np.sum(np.abs(state.amplitudes) ** 2, axis=(0, 1))
    return {spins_from_index(i): float(sq[i]) for i in range(8)}


def overlap(x: StateVector, y: StateVector) -> complex:
    """<x|y>, conjugate-linear in ``x``."""
    if x.shape != y.shape:
        raise DimensionError(f"cannot overlap states of shape {x.shape} and {y.shape}")
    return complex(np.vdot(x.amplitudes, y.amplitudes))


def gauge(vec, atol: float = ATOL) -> np.ndarray:
    """Remove the global phase: first amplitude above ``atol`` made real positive."""
    vec = np.asarray(vec, dtype=complex).ravel()
    big = np.flatnonzero(np.abs(vec) > atol)
    if big.size == 0:
        return vec.copy()
    a = vec[big[0]]
    return vec * (abs(a) / a)


def phase_distance(x, y, atol: float = ATOL) -> float:
    """Max amplitude difference between two vectors after phase gauging."""
    if isinstance(x, StateVector):
        x = x.vector()
    if isinstance(y, StateVector):
        y = y.vector()
    gx, gy = gauge(x, atol), gauge(y, atol)
    return float(np.max(np.abs(gx - gy))) if gx.size else 0.0


def all_basis_labels(a_port: bool = False, b_port: bool = False):
    """Every ``(mode_a, mode_b, spins)`` label in joint-index order."""
    da, db = photon_dim(a_port), photon_dim(b_port)
    for ispin, ib, ia in itertools.product(range(8), range(db), range(da)):
        yield (PhotonMode.from_index(ia, a_port), PhotonMode.from_index(ib, b_port),
               spins_from_index(ispin))
