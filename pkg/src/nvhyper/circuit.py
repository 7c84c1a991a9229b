"""Hyper-CPF and hyper-parity pipelines for two photons and three NV spins.

Each photon passes, in order:

* ``block1`` on NV1 (frequency qubit),
* a WDM/FS sandwich around ``block2`` on NV2: spatial mode 1 is split by
  frequency, the w2 arm is shifted to w1 so both arms drive the NV, then the
  shift and split are undone; spatial mode 2 bypasses NV2,
* for each spatial path: a Pockels cell flips the long time bin to L, the PBS
  sends R (short bin) through another WDM/FS sandwich around ``block3`` on
  NV3 while L bypasses, and a second Pockels cell undoes the flip.

The transient ``port`` label marks the WDM arm (up = unshifted, down =
shifted) while the photon is inside a sandwich.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .cavity import IDEAL, ScatteringCoeffs
from .elements import (CompositionMismatchError, block_branch_factor, embed,
                       pockels_conditional_flip, sigma_x, sigma_z, spin_hadamard)
from .hilbert import (ATOL, PHOTON_FIELDS, Freq, PhotonInputSpec, PhotonMode, Pol, Port,
                      Spatial, Spin, StateVector, apply_photon_spin_map,
                      apply_single_photon_map, apply_spin_map, branch_norms,
                      make_initial_state, project_spin, spin_index, spins_from_index)

PORT_SPACE = PHOTON_FIELDS + ("port",)
DOF_OF_NV = {1: "freq", 2: "spatial", 3: "timebin"}


class MeasurementOutcome(NamedTuple):
    s1: Spin
    s2: Spin
    s3: Spin

    @classmethod
    def parse(cls, text) -> "MeasurementOutcome":
        if isinstance(text, MeasurementOutcome):
            return text
        if isinstance(text, str):
            text = text.replace("−", "-")
            if len(text) != 3:
                raise ValueError(f"outcome must be three of '+'/'-', got {text!r}")
        return cls(*(Spin.parse(ch) for ch in text))

    @classmethod
    def all(cls) -> list["MeasurementOutcome"]:
        return [cls(*spins_from_index(i)) for i in range(8)]

    def __str__(self) -> str:
        return "".join(s.sign for s in self)


class ParityTriple(NamedTuple):
    freq: str
    spatial: str
    timebin: str


# (nv, outcome) -> (operation on photon a, operation on photon b), on that NV's DOF
FEED_FORWARD_TABLE = {
    (1, Spin.PLUS): ("-I", "I"),
    (1, Spin.MINUS): ("Z", "I"),
    (2, Spin.PLUS): ("-Z", "Z"),
    (2, Spin.MINUS): ("I", "Z"),
    (3, Spin.PLUS): ("I", "I"),
    (3, Spin.MINUS): ("Z", "I"),
}

_FF_OPS = {
    "I": np.eye(2, dtype=complex),
    "-I": -np.eye(2, dtype=complex),
    "Z": sigma_z(),
    "-Z": -sigma_z(),
}


@dataclass(frozen=True)
class ProtocolConfig:
    """How to run a protocol.

    ``coeffs`` holds one scattering quadruple per NV; ``None`` means ideal.
    Without ``forced_outcomes`` the spins are sampled from ``seed``.
    """

    mode: str = "hyper_cpf"
    coeffs: tuple[ScatteringCoeffs, ScatteringCoeffs, ScatteringCoeffs] | None = None
    forced_outcomes: MeasurementOutcome | None = None
    record_intermediates: bool = False
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in ("hyper_cpf", "hyper_parity"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.coeffs is not None:
            coeffs = tuple(self.coeffs)
            if len(coeffs) != 3 or not all(isinstance(c, ScatteringCoeffs) for c in coeffs):
                raise ValueError("lossy mode needs exactly three ScatteringCoeffs, one per NV")
            object.__setattr__(self, "coeffs", coeffs)
        if self.forced_outcomes is not None:
            object.__setattr__(self, "forced_outcomes",
                               MeasurementOutcome.parse(self.forced_outcomes))

    @property
    def ideal(self) -> bool:
        return self.coeffs is None

    def nv_coeffs(self, nv: int) -> ScatteringCoeffs:
        return IDEAL if self.coeffs is None else self.coeffs[nv - 1]


@dataclass(frozen=True)
class ProtocolResult:
    final_state: StateVector
    outcome: MeasurementOutcome
    success_probability: float
    outcome_probability: float
    intermediates: tuple[tuple[str, StateVector], ...] | None = None
    parity: ParityTriple | None = None
    notes: tuple[str, ...] = field(default_factory=tuple)

    def to_json(self) -> dict:
        data = {
            "outcome": str(self.outcome),
            "success_probability": self.success_probability,
            "outcome_probability": self.outcome_probability,
            "final_state": self.final_state.to_json(),
            "notes": list(self.notes),
        }
        if self.parity is not None:
            data["parity_triple"] = list(self.parity)
        if self.intermediates is not None:
            data["intermediates"] = [
                {"stage": label, "state": s.to_json()} for label, s in self.intermediates
            ]
        return data

    @classmethod
    def from_json(cls, data: dict) -> "ProtocolResult":
        inter = data.get("intermediates")
        return cls(
            final_state=StateVector.from_json(data["final_state"]),
            outcome=MeasurementOutcome.parse(data["outcome"]),
            success_probability=float(data["success_probability"]),
            outcome_probability=float(data["outcome_probability"]),
            intermediates=None if inter is None else tuple(
                (e["stage"], StateVector.from_json(e["state"])) for e in inter),
            parity=None if "parity_triple" not in data else ParityTriple(*data["parity_triple"]),
            notes=tuple(data.get("notes", ())),
        )


class Stage(NamedTuple):
    label: str
    kind: str  # "photon", "photon_spin", "spin" or "merge"
    photon: str | None
    nv: int | None
    op: np.ndarray


def wdm_fs_split(where: dict) -> np.ndarray:
    """32x16 isometry: matching components split by frequency, w2 arm shifted to w1.

    Non-matching components stay in the up arm untouched.
    """
    m = np.zeros((32, 16), dtype=complex)
    for i in range(16):
        mode = PhotonMode.from_index(i)
        if all(getattr(mode, f) == v for f, v in where.items()):
            port = Port.UP if mode.freq is Freq.W1 else Port.DOWN
            out = mode._replace(freq=Freq.W1, port=port)
        else:
            out = mode._replace(port=Port.UP)
        m[out.index, i] = 1.0
    return m


def _lift_block(block8: np.ndarray, where: dict) -> np.ndarray:
    return embed(block8, ("pol", "freq", "spin"), PORT_SPACE + ("spin",), where=where)


def photon_stages(photon: str, cfg: ProtocolConfig, hadamards: bool) -> list[Stage]:
    """Element stages for one photon; ``hadamards`` interleaves H_e after each NV."""
    p = photon
    stages = []

    block1 = embed(block_branch_factor(cfg.nv_coeffs(1)), ("pol", "freq", "spin"),
                   PHOTON_FIELDS + ("spin",))
    stages.append(Stage(f"{p}.block1", "photon_spin", p, 1, block1))
    if hadamards:
        stages.append(Stage(f"{p}.he1", "spin", None, 1, spin_hadamard()))

    where2 = {"spatial": Spatial.M1}
    split2 = wdm_fs_split(where2)
    stages.append(Stage(f"{p}.wdm1_fs1", "photon", p, None, split2))
    stages.append(Stage(f"{p}.block2", "photon_spin", p, 2,
                        _lift_block(block_branch_factor(cfg.nv_coeffs(2)), where2)))
    stages.append(Stage(f"{p}.fs2_wdm2", "merge", p, None, split2.conj().T))
    if hadamards:
        stages.append(Stage(f"{p}.he2", "spin", None, 2, spin_hadamard()))

    # R sector of the Block only: L components bypass NV3 via the PBS
    block3_r = block_branch_factor(cfg.nv_coeffs(3))[np.ix_([0, 2, 4, 6], [0, 2, 4, 6])]
    for path, (pc_in, pc_out) in zip(Spatial, (("pc_l1", "pc_l2"), ("pc_l3", "pc_l4"))):
        k = path.value + 1
        pc = embed(pockels_conditional_flip(), ("pol", "timebin"), PHOTON_FIELDS,
                   where={"spatial": path})
        where3 = {"spatial": path, "pol": Pol.R}
        split3 = wdm_fs_split(where3)
        block3 = embed(block3_r, ("freq", "spin"), PORT_SPACE + ("spin",), where=where3)
        stages += [
            Stage(f"{p}.{pc_in}", "photon", p, None, pc),
            Stage(f"{p}.path{k}.pbs_wdm_fs_in", "photon", p, None, split3),
            Stage(f"{p}.path{k}.block3", "photon_spin", p, 3, block3),
            Stage(f"{p}.path{k}.fs_wdm_pbs_out", "merge", p, None, split3.conj().T),
            Stage(f"{p}.{pc_out}", "photon", p, None, pc),
        ]
    if hadamards:
        stages.append(Stage(f"{p}.he3", "spin", None, 3, spin_hadamard()))
    return stages


def spin_hadamard_stages(label: str) -> list[Stage]:
    return [Stage(f"{label}{nv}", "spin", None, nv, spin_hadamard()) for nv in (1, 2, 3)]


def pipeline(cfg: ProtocolConfig) -> list[Stage]:
    """Ordered stages up to (not including) the spin readout."""
    return list(_pipeline(cfg.mode, cfg.coeffs))


@functools.lru_cache(maxsize=64)
def _pipeline(mode: str, coeffs) -> tuple[Stage, ...]:
    cfg = ProtocolConfig(mode=mode, coeffs=coeffs)
    stages = photon_stages("a", cfg, hadamards=True)
    if cfg.mode == "hyper_parity":
        stages += spin_hadamard_stages("b.he_pre")
    stages += photon_stages("b", cfg, hadamards=False)
    stages += spin_hadamard_stages("b.he")
    for stage in stages:
        stage.op.flags.writeable = False
    return tuple(stages)


def apply_stage(state: StateVector, stage: Stage) -> StateVector:
    if stage.kind == "spin":
        return apply_spin_map(state, stage.nv, stage.op)
    if stage.kind == "photon_spin":
        return apply_photon_spin_map(state, stage.photon, stage.nv, stage.op)
    out = apply_single_photon_map(state, stage.photon, stage.op)
    if stage.kind == "merge":
        # amplitude outside the sandwich's range would be silently dropped
        residual = state.tracked_norm - out.tracked_norm
        if residual > ATOL:
            raise CompositionMismatchError(
                f"{stage.label}: {residual:.3g} of probability outside the recombined arms")
    return out


def run_stages(state: StateVector, stages: Sequence[Stage], record: bool = False):
    trail = [("input", state)] if record else None
    for stage in stages:
        state = apply_stage(state, stage)
        if record:
            trail.append((stage.label, state))
    return state, trail


def pre_measurement_state(spec_a: PhotonInputSpec, spec_b: PhotonInputSpec,
                          cfg: ProtocolConfig):
    """Joint state just before the spin readout, plus the stage trail if recorded."""
    state = make_initial_state(spec_a, spec_b)
    return run_stages(state, pipeline(cfg), cfg.record_intermediates)


def project_outcome(state: StateVector, outcome: MeasurementOutcome) -> StateVector:
    for nv, spin in zip((1, 2, 3), outcome):
        state = project_spin(state, nv, spin)
    return state


def _measure_all(state: StateVector, cfg: ProtocolConfig):
    norms = branch_norms(state)
    total = sum(norms.values())
    if cfg.forced_outcomes is not None:
        outcome = cfg.forced_outcomes
    else:
        outcome = sample_outcomes(state, 1, np.random.default_rng(cfg.seed))[0]
    p = norms[tuple(outcome)]
    if p <= ATOL ** 2:
        raise ValueError(f"outcome {outcome} has zero probability")
    return outcome, p / total, project_outcome(state, outcome).normalized()


def sample_outcomes(state: StateVector, shots: int, rng: np.random.Generator
                    ) -> list[MeasurementOutcome]:
    """Draw spin-readout triplets from the branch weights of ``state``."""
    norms = branch_norms(state)
    weights = np.array([norms[spins_from_index(i)] for i in range(8)])
    draws = rng.choice(8, size=shots, p=weights / weights.sum())
    return [MeasurementOutcome(*spins_from_index(int(i))) for i in draws]


def _run(spec_a, spec_b, cfg: ProtocolConfig):
    state, trail = pre_measurement_state(spec_a, spec_b, cfg)
    success = state.tracked_norm
    outcome, p_outcome, collapsed = _measure_all(state, cfg)
    notes = ()
    if success < 1 - 1e-12:
        notes = (f"lossy run: photons survive with probability {success:.6g}; "
                 "post-measurement state renormalized",)
    if trail is not None:
        trail.append(("measure", collapsed))
    return success, outcome, p_outcome, collapsed, trail, notes


def run_hyper_cpf(spec_a: PhotonInputSpec, spec_b: PhotonInputSpec,
                  cfg: ProtocolConfig | None = None) -> ProtocolResult:
    """Hyper-CPF gate including the spin readout and feed-forward corrections."""
    cfg = replace(cfg or ProtocolConfig(), mode="hyper_cpf")
    success, outcome, p_outcome, state, trail, notes = _run(spec_a, spec_b, cfg)
    state = apply_feed_forward(state, outcome)
    if trail is not None:
        trail.append(("feed_forward", state))
    return ProtocolResult(state, outcome, success, p_outcome,
                          None if trail is None else tuple(trail), notes=notes)


def run_hyper_parity(spec_a: PhotonInputSpec, spec_b: PhotonInputSpec,
                     cfg: ProtocolConfig | None = None) -> ProtocolResult:
    """Hyper-parity gate; the final state is the collapsed (uncorrected) state."""
    cfg = replace(cfg or ProtocolConfig(), mode="hyper_parity")
    success, outcome, p_outcome, state, trail, notes = _run(spec_a, spec_b, cfg)
    return ProtocolResult(state, outcome, success, p_outcome,
                          None if trail is None else tuple(trail),
                          parity=classify_parity_outcome(outcome), notes=notes)


def _dof_op(op2: np.ndarray, dof: str) -> np.ndarray:
    return embed(op2, (dof,), PHOTON_FIELDS)


def apply_feed_forward(state: StateVector, outcome: MeasurementOutcome,
                       table: dict | None = None) -> StateVector:
    """Per-DOF corrections on both photons conditioned on each spin readout."""
    table = FEED_FORWARD_TABLE if table is None else table
    outcome = MeasurementOutcome.parse(outcome)
    for nv, spin in zip((1, 2, 3), outcome):
        op_a, op_b = table[(nv, spin)]
        dof = DOF_OF_NV[nv]
        state = apply_single_photon_map(state, "a", _dof_op(_FF_OPS[op_a], dof))
        state = apply_single_photon_map(state, "b", _dof_op(_FF_OPS[op_b], dof))
    return state


def classify_parity_outcome(outcome) -> ParityTriple:
    outcome = MeasurementOutcome.parse(outcome)
    return ParityTriple(*("even" if s is Spin.PLUS else "odd" for s in outcome))


def parity_feed_forward(state: StateVector, outcome) -> tuple[StateVector, ParityTriple]:
    """Bit-flip photon b on every odd DOF so each factor takes the even form."""
    triple = classify_parity_outcome(outcome)
    for dof, parity in zip(("freq", "spatial", "timebin"), triple):
        if parity == "odd":
            state = apply_single_photon_map(state, "b", _dof_op(sigma_x(), dof))
    return state, triple


def cpf_phase(mode_a: PhotonMode, mode_b: PhotonMode) -> int:
    """Truth-table phase of the hyper-CPF gate on a two-photon basis ket."""
    phase = 1
    for f in ("freq", "spatial", "timebin"):
        if getattr(mode_a, f) == 1 and getattr(mode_b, f) == 1:
            phase = -phase
    return phase


def photon_amplitudes(state: StateVector, spins) -> np.ndarray:
    """16x16 photon-pair amplitudes in the given spin configuration."""
    return np.array(state.amplitudes[:, :, spin_index(MeasurementOutcome.parse(spins))])


def dof_basis_inputs() -> list[PhotonInputSpec]:
    """The eight three-DOF basis inputs of one photon."""
    return [PhotonInputSpec.basis(f, s, t)
            for t, s, f in itertools.product(range(2), repeat=3)]
