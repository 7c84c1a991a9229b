"""Dense maps for the optical and spin elements, and the composite Block.

Local spaces are described by a tuple of two-level field names; the first
field is the least significant bit of the local index (same packing as
:mod:`nvhyper.hilbert`).
"""
from __future__ import annotations

import itertools
from typing import Mapping, Sequence

import numpy as np

from .cavity import ScatteringCoeffs, transition_table
from .hilbert import ATOL, Freq, HilbertError, Pol, Port, Spin

SQRT1_2 = 1 / np.sqrt(2)

BLOCK_SPACE = ("pol", "freq", "spin")
INTERFEROMETER_SPACE = ("pol", "freq", "port", "spin")


class CompositionMismatchError(HilbertError):
    """Amplitude leaked into an arm the composition treats as empty."""


def identity(n: int = 2) -> np.ndarray:
    return np.eye(n, dtype=complex)


def sigma_x() -> np.ndarray:
    return np.array([[0, 1], [1, 0]], dtype=complex)


def sigma_z() -> np.ndarray:
    """pi phase on the second basis label."""
    return np.diag([1.0, -1.0]).astype(complex)


def hwp_hadamard() -> np.ndarray:
    """Half-wave plate at 22.5 deg on {R, L}."""
    return SQRT1_2 * np.array([[1, 1], [1, -1]], dtype=complex)


def spin_hadamard() -> np.ndarray:
    """Electron-spin Hadamard on {+, -}."""
    return SQRT1_2 * np.array([[1, 1], [1, -1]], dtype=complex)


def frequency_shift() -> np.ndarray:
    """w1 <-> w2."""
    return sigma_x()


def pockels_conditional_flip() -> np.ndarray:
    """Polarization bit flip on the long time bin; space (pol, timebin)."""
    return embed(sigma_x(), ("pol",), ("pol", "timebin"), where={"timebin": 0})


def pbs_route() -> np.ndarray:
    """Circular PBS on (pol, port): R keeps its arm, L switches arm, no phase."""
    return embed(sigma_x(), ("port",), ("pol", "port"), where={"pol": Pol.L})


def embed(op, targets: Sequence[str], space: Sequence[str],
          where: Mapping[str, int] | None = None) -> np.ndarray:
    """Lift ``op`` acting on ``targets`` into the local space ``space``.

    With ``where``, the map acts only on the subspace where those fields take
    the given values and is the identity elsewhere.
    """
    op = np.asarray(op, dtype=complex)
    space = tuple(space)
    targets = tuple(targets)
    where = dict(where or {})
    k, n = len(targets), len(space)
    if op.shape != (2 ** k, 2 ** k):
        raise ValueError(f"op of shape {op.shape} does not act on {k} two-level fields")
    missing = [f for f in (*targets, *where) if f not in space]
    if missing:
        raise ValueError(f"fields {missing} not in space {space}")
    if set(targets) & set(where):
        raise ValueError("condition fields must be disjoint from target fields")
    pos = [space.index(f) for f in targets]
    cond = [(space.index(f), int(v)) for f, v in where.items()]
    dim = 2 ** n
    m = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        bits = [(col >> j) & 1 for j in range(n)]
        if any(bits[p] != v for p, v in cond):
            m[col, col] = 1.0
            continue
        sub_in = sum(bits[p] << j for j, p in enumerate(pos))
        for sub_out in range(2 ** k):
            val = op[sub_out, sub_in]
            if val == 0:
                continue
            out = list(bits)
            for j, p in enumerate(pos):
                out[p] = (sub_out >> j) & 1
            m[sum(b << j for j, b in enumerate(out)), col] += val
    return m


def basis_index(space: Sequence[str], **labels) -> int:
    return sum(int(labels[f]) << j for j, f in enumerate(space))


def block_branch_factor(coeffs: ScatteringCoeffs,
                        coupled: tuple[Freq, Spin] = (Freq.W1, Spin.PLUS)) -> np.ndarray:
    """Diagonal Block map on (pol, label, spin).

    R inputs pick up ``t + r`` on the coupled (label, spin) branch and
    ``t0 + r0`` elsewhere; L inputs pick up ``t - r`` and ``t0 - r0``.
    """
    c = coeffs
    d = np.zeros(8, dtype=complex)
    for pol, label, spin in itertools.product(Pol, Freq, Spin):
        hit = (label, spin) == tuple(coupled)
        if pol is Pol.R:
            f = c.t + c.r if hit else c.t0 + c.r0
        else:
            f = c.t - c.r if hit else c.t0 - c.r0
        d[basis_index(BLOCK_SPACE, pol=pol, freq=label, spin=spin)] = f
    return np.diag(d)


def block_interferometer_stages(coeffs: ScatteringCoeffs) -> list[tuple[str, np.ndarray]]:
    """HWP -> PBS -> cavity -> PBS -> HWP as 16x16 maps on (pol, freq, port, spin)."""
    space = INTERFEROMETER_SPACE
    hwp = embed(hwp_hadamard(), ("pol",), space)
    pbs = embed(pbs_route(), ("pol", "port"), space)
    return [
        ("hwp1", hwp),
        ("pbs1", pbs),
        ("nv", transition_table(coeffs).matrix()),
        ("pbs2", pbs),
        ("hwp2", hwp),
    ]


def _arm_isometry(port: Port) -> np.ndarray:
    """8 -> 16 injection of (pol, freq, spin) into the given arm."""
    m = np.zeros((16, 8), dtype=complex)
    for pol, freq, spin in itertools.product(Pol, Freq, Spin):
        m[basis_index(INTERFEROMETER_SPACE, pol=pol, freq=freq, port=port, spin=spin),
          basis_index(BLOCK_SPACE, pol=pol, freq=freq, spin=spin)] = 1.0
    return m


def block_compose_from_elements(coeffs: ScatteringCoeffs, atol: float = ATOL) -> np.ndarray:
    """Block as an explicit element product, restricted to the down arm.

    The photon enters and leaves travelling down; any amplitude left in the up
    arm means the routing convention is inconsistent.
    """
    total = np.eye(16, dtype=complex)
    for _, op in block_interferometer_stages(coeffs):
        total = op @ total
    down, up = _arm_isometry(Port.DOWN), _arm_isometry(Port.UP)
    full = total @ down
    leak = np.linalg.norm(up.conj().T @ full)
    if leak > atol:
        raise CompositionMismatchError(f"amplitude {leak:.3g} left in the discarded arm")
    return down.conj().T @ full


def is_unitary(m, atol: float = ATOL) -> bool:
    m = np.asarray(m)
    return np.allclose(m.conj().T @ m, np.eye(m.shape[1]), atol=atol, rtol=0)


def largest_singular_value(m) -> float:
    return float(np.linalg.norm(np.asarray(m), 2))
