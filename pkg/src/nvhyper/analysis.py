"""Block fidelity/efficiency, angle averages and the (kappa_s/kappa, g^2/kappa*gamma) sweep."""
from __future__ import annotations

import csv
import io
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .cavity import CavityParams, ScatteringCoeffs, scattering_coeffs
from .circuit import (MeasurementOutcome, ProtocolConfig, photon_amplitudes,
                      pre_measurement_state, run_hyper_cpf)
from .hilbert import PhotonInputSpec, ZeroStateError

# Amplitude index within a Block state: fa + 2*fb + 4*spin.
_SQRT1_2 = 1 / np.sqrt(2)
DEFAULT_NODES = 128
SWEEP_HEADER = ("ks_over_k", "cooperativity", "avg_fidelity", "avg_efficiency")


class ConvergenceWarning(UserWarning):
    pass


class BlockStates(NamedTuple):
    """Initial, ideal and realistic two-photon Block states.

    Arrays are indexed ``[freq_a, freq_b, spin]``; both photons are R.
    """

    init: np.ndarray
    ideal: np.ndarray
    real: np.ndarray


def _block_amplitudes(alpha, beta, c: ScatteringCoeffs):
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    ca, sa, cb, sb = np.cos(alpha), np.sin(alpha), np.cos(beta), np.sin(beta)
    a, b = c.coupled_factor, c.uncoupled_factor
    # entries in (fa, fb, spin) little-endian order:
    # 11+, 21+, 12+, 22+, 11-, 21-, 12-, 22-
    init = [ca * cb, sa * cb, ca * sb, sa * sb] * 2
    ideal = [ca * cb, -sa * cb, -ca * sb, sa * sb,
             ca * cb, sa * cb, ca * sb, sa * sb]
    real = [ca * cb * a * a, sa * cb * b * a, ca * sb * b * a, sa * sb * b * b,
            ca * cb * b * b, sa * cb * b * b, ca * sb * b * b, sa * sb * b * b]

    def stack(parts):
        return _SQRT1_2 * np.stack(np.broadcast_arrays(*parts), axis=-1).astype(complex)

    return stack(init), stack(ideal), stack(real)


def block_states(alpha: float, beta: float, c: ScatteringCoeffs) -> BlockStates:
    init, ideal, real = _block_amplitudes(alpha, beta, c)
    return BlockStates(*(v.reshape((2, 2, 2), order="F") for v in (init, ideal, real)))


def _fidelity(ideal, real, normalize: bool):
    ov = np.abs(np.sum(real.conj() * ideal, axis=-1))
    if not normalize:
        return ov
    nr = np.sqrt(np.sum(np.abs(real) ** 2, axis=-1))
    if np.any(nr == 0):
        raise ZeroStateError("realistic Block state vanishes (t + r = t0 + r0 = 0)")
    ni = np.sqrt(np.sum(np.abs(ideal) ** 2, axis=-1))
    return ov / (nr * ni)


def _efficiency(init, real):
    return np.sum(np.abs(real) ** 2, axis=-1) / np.sum(np.abs(init) ** 2, axis=-1)


def block_fidelity(alpha, beta, c: ScatteringCoeffs, normalize: bool = True):
    """|<psi_real|psi_ideal>| with psi_real scaled to unit norm (unless ``normalize=False``)."""
    init, ideal, real = _block_amplitudes(alpha, beta, c)
    return _fidelity(ideal, real, normalize)


def block_efficiency(alpha, beta, c: ScatteringCoeffs):
    """Surviving probability ||psi_real||^2 / ||psi_init||^2 at fixed angles."""
    init, _, real = _block_amplitudes(alpha, beta, c)
    return _efficiency(init, real)


def block_efficiency_closed_form(c: ScatteringCoeffs) -> float:
    a2 = abs(c.coupled_factor) ** 2
    b2 = abs(c.uncoupled_factor) ** 2
    return (a2 * a2 + 2 * a2 * b2 + 5 * b2 * b2) / 8


@dataclass(frozen=True)
class BlockMetrics:
    avg_fidelity: float
    avg_efficiency: float
    method: str
    fidelity_stderr: float | None = None
    efficiency_stderr: float | None = None


def angle_grid(n_nodes: int = DEFAULT_NODES, rule: str = "gauss", offset: float = 0.0):
    """Nodes and weights on [offset, offset + 2*pi]; weights sum to 1."""
    if n_nodes < 1:
        raise ValueError("n_nodes must be positive")
    if rule == "gauss":
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        return offset + np.pi * (x + 1), w / 2
    if rule == "trapezoid":
        return offset + 2 * np.pi * np.arange(n_nodes) / n_nodes, np.full(n_nodes, 1 / n_nodes)
    raise ValueError(f"unknown quadrature rule {rule!r}")


def _quadrature(c, n_nodes, rule, offset, normalize):
    theta, w = angle_grid(n_nodes, rule, offset)
    A, B = np.meshgrid(theta, theta, indexing="ij")
    W = np.outer(w, w)
    init, ideal, real = _block_amplitudes(A, B, c)
    return (float(np.sum(W * _fidelity(ideal, real, normalize))),
            float(np.sum(W * _efficiency(init, real))))


def average_block_metrics(c: ScatteringCoeffs, method: str = "quadrature", *,
                          n_nodes: int = DEFAULT_NODES, rule: str = "gauss",
                          offset: float = 0.0, n_samples: int = 100_000, seed: int = 0,
                          normalize: bool = True, check_convergence: bool = True
                          ) -> BlockMetrics:
    """Average Block fidelity and efficiency over alpha, beta in [0, 2*pi].

    ``method`` is ``"quadrature"`` (tensor-product rule, Gauss-Legendre by
    default), ``"monte_carlo"`` (uniform angles from ``seed``) or
    ``"closed_form"`` (closed-form efficiency, fidelity by quadrature).
    """
    if method in ("quadrature", "closed_form"):
        if n_nodes < 2:
            raise ValueError("quadrature needs at least 2 nodes per axis")
        f, e = _quadrature(c, n_nodes, rule, offset, normalize)
        if check_convergence:
            f2, e2 = _quadrature(c, 2 * n_nodes, rule, offset, normalize)
            if max(abs(f2 - f), abs(e2 - e)) > 1e-7:
                warnings.warn(f"quadrature with {n_nodes} nodes moved by "
                              f"{max(abs(f2 - f), abs(e2 - e)):.2g} on doubling",
                              ConvergenceWarning, stacklevel=2)
        if method == "closed_form":
            return BlockMetrics(f, block_efficiency_closed_form(c), "closed_form")
        return BlockMetrics(f, e, f"quadrature({rule},{n_nodes})")
    if method == "monte_carlo":
        if n_samples < 2:
            raise ValueError("monte carlo needs at least 2 samples")
        rng = np.random.default_rng(seed)
        A, B = rng.uniform(0, 2 * np.pi, size=(2, n_samples))
        init, ideal, real = _block_amplitudes(A, B, c)
        fs = _fidelity(ideal, real, normalize)
        es = _efficiency(init, real)
        return BlockMetrics(float(fs.mean()), float(es.mean()),
                            f"monte_carlo({n_samples},{seed})",
                            float(fs.std(ddof=1) / np.sqrt(n_samples)),
                            float(es.std(ddof=1) / np.sqrt(n_samples)))
    raise ValueError(f"unknown averaging method {method!r}")


@dataclass(frozen=True)
class SweepGrid:
    ks_over_k: tuple[float, ...]
    cooperativity: tuple[float, ...]

    def __post_init__(self):
        for name in ("ks_over_k", "cooperativity"):
            axis = tuple(float(v) for v in getattr(self, name))
            if not axis:
                raise ValueError(f"{name} axis is empty")
            if any(b <= a for a, b in zip(axis, axis[1:])):
                raise ValueError(f"{name} axis must be strictly increasing")
            object.__setattr__(self, name, axis)
        if self.ks_over_k[0] < 0:
            raise ValueError("ks_over_k must be >= 0")
        if self.cooperativity[0] <= 0:
            raise ValueError("cooperativity must be > 0")


class SweepRow(NamedTuple):
    ks_over_k: float
    cooperativity: float
    avg_fidelity: float
    avg_efficiency: float


def resonant_coeffs(ks_over_k: float, cooperativity: float) -> ScatteringCoeffs:
    c = scattering_coeffs(CavityParams.from_ratios(cooperativity, ks_over_k))
    imag = max(abs(v.imag) for v in c.as_tuple())
    assert imag < 1e-12, f"resonant coefficients should be real, got imag {imag:.3g}"
    return c


def _sweep_row(point, n_nodes):
    ks, coop = point
    c = resonant_coeffs(ks, coop)
    m = average_block_metrics(c, n_nodes=n_nodes, check_convergence=False)
    return SweepRow(ks, coop, m.avg_fidelity, block_efficiency_closed_form(c))


def sweep(grid: SweepGrid, n_nodes: int = DEFAULT_NODES, workers: int | None = None
          ) -> list[SweepRow]:
    """Resonant Block metrics on every grid point, ks-major order."""
    points = [(ks, coop) for ks in grid.ks_over_k for coop in grid.cooperativity]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda p: _sweep_row(p, n_nodes), points))


def write_sweep_csv(rows: Iterable[SweepRow], out) -> int:
    """Write the sweep table (9 significant digits, LF endings); returns the row count."""
    own = isinstance(out, (str, bytes)) or hasattr(out, "__fspath__")
    fh = open(out, "w", newline="", encoding="utf-8") if own else out
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        n = 0
        for row in rows:
            writer.writerow([f"{v:.9g}" for v in row])
            n += 1
        return n
    finally:
        if own:
            fh.close()


def sweep_csv_text(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    write_sweep_csv(rows, buf)
    return buf.getvalue()


def protocol_metrics(spec_a: PhotonInputSpec, spec_b: PhotonInputSpec,
                     coeffs: Sequence[ScatteringCoeffs], outcome="+++"
                     ) -> tuple[float, float]:
    """Fidelity and efficiency of a lossy hyper-CPF run against the ideal one.

    Efficiency is the squared norm reaching the spin readout; fidelity compares
    the renormalized corrected photon states for the given readout.
    """
    outcome = MeasurementOutcome.parse(outcome)
    lossy_cfg = ProtocolConfig(coeffs=tuple(coeffs), forced_outcomes=outcome)
    efficiency = pre_measurement_state(spec_a, spec_b, lossy_cfg)[0].tracked_norm
    real = photon_amplitudes(run_hyper_cpf(spec_a, spec_b, lossy_cfg).final_state, outcome)
    ideal = photon_amplitudes(
        run_hyper_cpf(spec_a, spec_b, ProtocolConfig(forced_outcomes=outcome)).final_state,
        outcome)
    fidelity = abs(np.vdot(real, ideal)) / (np.linalg.norm(real) * np.linalg.norm(ideal))
    return float(fidelity), float(efficiency)
