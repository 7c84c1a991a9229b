"""Command-line front end: ``nvhyper <command> [options]``.

Exit codes: 0 success / PASS, 1 oracle mismatch, 2 usage or validation error.
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import dataclass

import numpy as np

from . import analysis
from .cavity import (GAMMA_ZPL_GHZ, G_ZPL_GHZ, IDEAL, KAPPA_GHZ, TWO_PI, CavityParams,
                     InvalidParameterError, ScatteringCoeffs, scattering_coeffs)
from .circuit import (MeasurementOutcome, ProtocolConfig, cpf_phase, dof_basis_inputs,
                      parity_feed_forward, photon_amplitudes, pre_measurement_state,
                      run_hyper_cpf, run_hyper_parity, sample_outcomes)
from .hilbert import HilbertError, PhotonInputSpec, PhotonMode, StateVector, unpack

CAVITY_KEYS = ("g", "kappa", "kappa_s", "gamma", "detuning_c", "detuning_x")
PHOTON_KEYS = ("freq_amps", "spatial_amps", "time_amps")
CONFIG_KEYS = {"units", "cavity", "coeffs", "photon_a", "photon_b", "seed"}
REALISTIC_POINT = (0.1, 8.654)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Merged file + flag settings shared by the subcommands."""

    units: str
    cavity: dict
    coeffs: ScatteringCoeffs | None
    photon_a: PhotonInputSpec | None
    photon_b: PhotonInputSpec | None
    seed: int


def _complex(obj, where: str) -> complex:
    if not isinstance(obj, dict) or set(obj) != {"re", "im"}:
        raise ConfigError(f"{where}: complex numbers must be {{\"re\": ..., \"im\": ...}} objects")
    return complex(float(obj["re"]), float(obj["im"]))


def _photon_from_json(data, where: str) -> PhotonInputSpec:
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(data) - set(PHOTON_KEYS)
    if unknown or set(data) != set(PHOTON_KEYS):
        raise ConfigError(f"{where}: expected keys {PHOTON_KEYS}, got {sorted(data)}")
    pairs = []
    for key in PHOTON_KEYS:
        amps = data[key]
        if not isinstance(amps, list) or len(amps) != 2:
            raise ConfigError(f"{where}.{key} must be a list of two complex numbers")
        pairs.append(tuple(_complex(a, f"{where}.{key}") for a in amps))
    return PhotonInputSpec(*pairs)


def photon_to_json(spec: PhotonInputSpec) -> dict:
    return {key: [{"re": c.real, "im": c.imag} for c in pair]
            for key, pair in zip(PHOTON_KEYS, spec.pairs)}


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "cavity" in data:
        bad = set(data["cavity"]) - set(CAVITY_KEYS)
        if bad:
            raise ConfigError(f"unknown cavity keys: {sorted(bad)}")
    if "coeffs" in data and set(data["coeffs"]) != {"r", "t", "r0", "t0"}:
        raise ConfigError("coeffs must hold exactly r, t, r0, t0")
    return data


def _base_cavity(units: str) -> dict:
    """Realistic preset (kappa_s = 0.1 kappa, resonant) in the chosen units."""
    if units == "kappa":
        return {"g": G_ZPL_GHZ / KAPPA_GHZ, "kappa": 1.0, "kappa_s": 0.1,
                "gamma": GAMMA_ZPL_GHZ / KAPPA_GHZ, "detuning_c": 0.0, "detuning_x": 0.0}
    return {"g": G_ZPL_GHZ, "kappa": KAPPA_GHZ, "kappa_s": 0.1 * KAPPA_GHZ,
            "gamma": GAMMA_ZPL_GHZ, "detuning_c": 0.0, "detuning_x": 0.0}


def _parse_spec_flag(text: str, where: str) -> PhotonInputSpec:
    vals = [float(v) for v in text.replace(" ", "").split(",") if v]
    if len(vals) != 12:
        raise ConfigError(f"{where} needs 12 numbers (re,im pairs of six amplitudes)")
    c = [complex(vals[i], vals[i + 1]) for i in range(0, 12, 2)]
    return PhotonInputSpec((c[0], c[1]), (c[2], c[3]), (c[4], c[5]))


def build_run_config(args) -> RunConfig:
    conf = load_config(getattr(args, "config", None))
    units = getattr(args, "units", None) or conf.get("units", "ghz")
    if units not in ("ghz", "kappa"):
        raise ConfigError(f"units must be 'ghz' or 'kappa', got {units!r}")
    cavity = _base_cavity(units)
    if not getattr(args, "preset", None):
        cavity.update({k: float(v) for k, v in conf.get("cavity", {}).items()})
    for key in CAVITY_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cavity[key] = value
    if getattr(args, "ks_over_k", None) is not None:
        cavity["kappa_s"] = args.ks_over_k * cavity["kappa"]
    if getattr(args, "cooperativity", None) is not None:
        if args.cooperativity < 0:
            raise InvalidParameterError("cooperativity >= 0 violated")
        cavity["g"] = math.sqrt(args.cooperativity * cavity["kappa"] * cavity["gamma"])
    if getattr(args, "resonant", False):
        cavity["detuning_c"] = cavity["detuning_x"] = 0.0

    coeffs = None
    if getattr(args, "coeffs", None):
        vals = [float(v) for v in args.coeffs.split(",")]
        if len(vals) != 4:
            raise ConfigError("--coeffs needs r,t,r0,t0")
        coeffs = ScatteringCoeffs(*vals)
    elif "coeffs" in conf:
        coeffs = ScatteringCoeffs(*(_complex(conf["coeffs"][k], f"coeffs.{k}")
                                    for k in ("r", "t", "r0", "t0")))

    photons = {}
    for name in ("photon_a", "photon_b"):
        flag = getattr(args, "spec_" + name[-1], None)
        if flag:
            photons[name] = _parse_spec_flag(flag, "--spec-" + name[-1])
        elif name in conf:
            photons[name] = _photon_from_json(conf[name], name)
        else:
            photons[name] = None

    seed = args.seed if getattr(args, "seed", None) is not None else conf.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    rc = RunConfig(units, cavity, coeffs, photons["photon_a"], photons["photon_b"], seed)
    cavity_params(rc)  # revalidate the merged physics
    return rc


def cavity_params(rc: RunConfig) -> CavityParams:
    c = dict(rc.cavity)
    scale = TWO_PI if rc.units == "ghz" else 1.0
    return CavityParams(g=scale * c["g"], kappa=scale * c["kappa"],
                        kappa_s=scale * c["kappa_s"], gamma=scale * c["gamma"],
                        omega=0.0, omega_c=scale * c["detuning_c"],
                        omega_x=scale * c["detuning_x"])


def resolve_coeffs(rc: RunConfig) -> ScatteringCoeffs:
    return rc.coeffs if rc.coeffs is not None else scattering_coeffs(cavity_params(rc))


def resolve_specs(rc: RunConfig, random_specs: bool):
    rng = np.random.default_rng(rc.seed)
    out = []
    for spec in (rc.photon_a, rc.photon_b):
        if spec is None:
            spec = PhotonInputSpec.random(rng) if random_specs else PhotonInputSpec.uniform()
        out.append(spec)
    return out


def _cjson(z: complex) -> dict:
    return {"re": z.real, "im": z.imag}


def _emit(args, payload: dict, text_lines) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        for line in text_lines:
            print(line)


def _ket_label(index: int, state: StateVector) -> str:
    ma, mb, spins = unpack(index, state.a_port, state.b_port)
    return (f"|{ma.label()}>_a |{mb.label()}>_b |{''.join(s.sign for s in spins)}>")


def _state_lines(state: StateVector, atol: float = 1e-10):
    for i, amp in state.nonzero(atol):
        yield f"  {amp.real:+.6f}{amp.imag:+.6f}j  {_ket_label(i, state)}"


# -- commands ---------------------------------------------------------------

def cmd_coeffs(args) -> int:
    rc = build_run_config(args)
    p = cavity_params(rc)
    c = resolve_coeffs(rc)
    payload = {**c.to_json(), "cooperativity": p.cooperativity, "ks_over_k": p.ks_over_k,
               "coupled_factor": _cjson(c.coupled_factor),
               "uncoupled_factor": _cjson(c.uncoupled_factor)}
    lines = [f"{name:>3} = {v.real:+.9f}{v.imag:+.9f}j"
             for name, v in zip(("r", "t", "r0", "t0"), c.as_tuple())]
    lines += [f"g^2/(kappa*gamma) = {p.cooperativity:.6g}", f"kappa_s/kappa = {p.ks_over_k:.6g}"]
    _emit(args, payload, lines)
    return 0


def _dof_label(mode: PhotonMode) -> str:
    return f"{mode.freq.name.lower()},{mode.spatial.name.lower()},{mode.timebin.name.lower()}"


def truth_table_rows(seed: int = 0, atol: float = 1e-10):
    """Ideal hyper-CPF on all 64 basis inputs; rows of (in_a, in_b, phase, ok)."""
    rows = []
    rng = np.random.default_rng(seed)
    for spec_a in dof_basis_inputs():
        for spec_b in dof_basis_inputs():
            cfg = ProtocolConfig(seed=int(rng.integers(2 ** 63)))
            res = run_hyper_cpf(spec_a, spec_b, cfg)
            got = photon_amplitudes(res.final_state, res.outcome)
            ia = int(np.argmax(np.abs(spec_a.vector())))
            ib = int(np.argmax(np.abs(spec_b.vector())))
            ma, mb = PhotonMode.from_index(ia), PhotonMode.from_index(ib)
            expected = np.zeros((16, 16), dtype=complex)
            expected[ia, ib] = cpf_phase(ma, mb)
            phase = got[ia, ib]
            err = float(np.max(np.abs(got - expected)))
            rows.append((ma, mb, phase, err <= atol))
    return rows


def cmd_truth_table(args) -> int:
    rc = build_run_config(args)
    rows = truth_table_rows(rc.seed)
    ok = all(r[3] for r in rows)
    lines = [f"{'photon a':>10} | {'photon b':<10} -> {'output':<23} phase"]
    for ma, mb, phase, good in rows:
        out = f"{_dof_label(ma)} | {_dof_label(mb)}"
        lines.append(f"{_dof_label(ma):>10} | {_dof_label(mb):<10} -> {out:<23} "
                     f"{phase.real:+.0f}{'' if good else '  MISMATCH'}")
    lines.append("PASS: matches CPF x CPF x CPF" if ok else "FAIL: oracle mismatch")
    payload = {"rows": [{"input_a": _dof_label(ma), "input_b": _dof_label(mb),
                         "phase": _cjson(phase), "ok": good} for ma, mb, phase, good in rows],
               "pass": ok}
    _emit(args, payload, lines)
    return 0 if ok else 1


def cmd_parity(args) -> int:
    rc = build_run_config(args)
    spec_a, spec_b = resolve_specs(rc, args.random_specs)
    coeffs = None if not args.lossy else (resolve_coeffs(rc),) * 3
    payload = {"photon_a": photon_to_json(spec_a), "photon_b": photon_to_json(spec_b)}
    lines = []
    if args.shots:
        state, _ = pre_measurement_state(spec_a, spec_b,
                                         ProtocolConfig(mode="hyper_parity", coeffs=coeffs))
        draws = sample_outcomes(state, args.shots, np.random.default_rng(rc.seed))
        counts = {str(o): 0 for o in MeasurementOutcome.all()}
        for o in draws:
            counts[str(o)] += 1
        freqs = {k: v / args.shots for k, v in counts.items()}
        payload["shots"] = args.shots
        payload["frequencies"] = freqs
        lines.append(f"{args.shots} shots")
        lines += [f"  {k}: {v:.5f}" for k, v in freqs.items()]
    cfg = ProtocolConfig(mode="hyper_parity", coeffs=coeffs,
                         forced_outcomes=args.force_outcome, seed=rc.seed)
    res = run_hyper_parity(spec_a, spec_b, cfg)
    fixed, triple = parity_feed_forward(res.final_state, res.outcome)
    payload.update({"outcome": str(res.outcome), "parity_triple": list(triple),
                    "outcome_probability": res.outcome_probability,
                    "success_probability": res.success_probability,
                    "final_state": fixed.to_json()})
    lines += [f"outcome: {res.outcome}",
              "parity (freq, spatial, time-bin): " + ", ".join(triple),
              f"branch probability: {res.outcome_probability:.9g}",
              "post-feed-forward state:", *_state_lines(fixed)]
    _emit(args, payload, lines)
    return 0


def cmd_block_metrics(args) -> int:
    rc = build_run_config(args)
    c = IDEAL if args.ideal else resolve_coeffs(rc)
    quad = analysis.average_block_metrics(c, n_nodes=args.nodes)
    closed = analysis.block_efficiency_closed_form(c)
    payload = {"coeffs": c.to_json(),
               "closed_form": {"avg_efficiency": closed},
               "quadrature": {"nodes": args.nodes, "avg_fidelity": quad.avg_fidelity,
                              "avg_efficiency": quad.avg_efficiency}}
    lines = [f"closed form : eta = {closed:.6f}",
             f"quadrature  : F = {quad.avg_fidelity:.6f}  eta = {quad.avg_efficiency:.6f}"
             f"  ({args.nodes} nodes/axis)"]
    if args.method == "monte-carlo":
        mc = analysis.average_block_metrics(c, "monte_carlo", n_samples=args.samples,
                                            seed=rc.seed)
        zf = _zscore(mc.avg_fidelity - quad.avg_fidelity, mc.fidelity_stderr)
        ze = _zscore(mc.avg_efficiency - quad.avg_efficiency, mc.efficiency_stderr)
        agree = max(zf, ze) <= 3
        payload["monte_carlo"] = {"samples": args.samples, "seed": rc.seed,
                                  "avg_fidelity": mc.avg_fidelity,
                                  "fidelity_stderr": mc.fidelity_stderr,
                                  "avg_efficiency": mc.avg_efficiency,
                                  "efficiency_stderr": mc.efficiency_stderr,
                                  "z_fidelity": zf, "z_efficiency": ze,
                                  "agrees_3sigma": agree}
        lines.append(f"monte carlo : F = {mc.avg_fidelity:.6f} +- {mc.fidelity_stderr:.2g}"
                     f"  eta = {mc.avg_efficiency:.6f} +- {mc.efficiency_stderr:.2g}"
                     f"  (z = {zf:.2f}, {ze:.2f}; {'agrees' if agree else 'outside'} 3 sigma)")
    _emit(args, payload, lines)
    return 0


def _zscore(diff: float, stderr: float) -> float:
    return abs(diff) / stderr if stderr > 0 else (0.0 if diff == 0 else math.inf)


def _parse_axis(text: str) -> list[float]:
    if ":" in text:
        start, stop, count = text.split(":")
        n = int(count)
        if n < 1:
            raise ConfigError("grid axis count must be >= 1")
        return [float(v) for v in np.linspace(float(start), float(stop), n)]
    return [float(v) for v in text.split(",")]


def parse_grid(text: str | None) -> analysis.SweepGrid:
    """``ks=START:STOP:COUNT coop=START:STOP:COUNT`` (or comma lists).

    Without ``text`` the default 26 x 60 grid is used, with the realistic
    point (0.1, 8.654) added to both axes.
    """
    if text is None:
        ks = set(np.round(np.linspace(0, 0.5, 26), 12)) | {REALISTIC_POINT[0]}
        coop = set(np.linspace(0.1, 30, 60)) | {REALISTIC_POINT[1]}
        return analysis.SweepGrid(tuple(sorted(ks)), tuple(sorted(coop)))
    axes = {}
    for part in text.split():
        key, _, value = part.partition("=")
        if key not in ("ks", "coop") or not value:
            raise ConfigError(f"bad grid term {part!r}; use ks=... coop=...")
        axes[key] = _parse_axis(value)
    if set(axes) != {"ks", "coop"}:
        raise ConfigError("grid needs both ks= and coop= axes")
    return analysis.SweepGrid(tuple(axes["ks"]), tuple(axes["coop"]))


def cmd_sweep(args) -> int:
    build_run_config(args)
    grid = parse_grid(args.grid)
    rows = analysis.sweep(grid, n_nodes=args.nodes, workers=args.workers)
    n = analysis.write_sweep_csv(rows, args.output)
    payload = {"rows": n, "output": args.output}
    _emit(args, payload, [f"wrote {n} rows to {args.output}"])
    return 0


def cmd_simulate(args) -> int:
    rc = build_run_config(args)
    spec_a, spec_b = resolve_specs(rc, args.random_specs)
    coeffs = None if not args.lossy else (resolve_coeffs(rc),) * 3
    mode = "hyper_cpf" if args.mode == "cpf" else "hyper_parity"
    cfg = ProtocolConfig(mode=mode, coeffs=coeffs, forced_outcomes=args.force_outcome,
                         record_intermediates=args.record_intermediates, seed=rc.seed)
    run = run_hyper_cpf if mode == "hyper_cpf" else run_hyper_parity
    res = run(spec_a, spec_b, cfg)
    text = json.dumps(res.to_json(), indent=2)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text + "\n")
        print(f"wrote {args.output}")
    else:
        print(text)
    return 0


# -- parser -----------------------------------------------------------------

def _common(suppress: bool) -> argparse.ArgumentParser:
    default = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=default, help="JSON config file")
    p.add_argument("--json", action="store_true",
                   default=argparse.SUPPRESS if suppress else False,
                   help="machine-readable output")
    p.add_argument("--seed", type=int, default=default, help="RNG seed (u64)")
    return p


def _physics_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("cavity parameters")
    g.add_argument("--preset", choices=["realistic"], help="microdisk NV preset (default base)")
    g.add_argument("--units", choices=["ghz", "kappa"], help="GHz (times 2 pi) or units of kappa")
    for key in CAVITY_KEYS:
        g.add_argument("--" + key.replace("_", "-"), dest=key, type=float)
    g.add_argument("--ks-over-k", type=float, help="set kappa_s = value * kappa")
    g.add_argument("--cooperativity", type=float, help="set g from g^2/(kappa*gamma)")
    g.add_argument("--resonant", action="store_true", help="zero both detunings")
    g.add_argument("--coeffs", help="direct real r,t,r0,t0 (overrides the cavity model)")


def _spec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spec-a", help="12 numbers: re,im of freq c1,c2, spatial c1,c2, time c1,c2")
    p.add_argument("--spec-b", help="same for photon b")
    p.add_argument("--random-specs", action="store_true",
                   help="draw unspecified photon inputs from --seed (default: uniform)")
    p.add_argument("--force-outcome", type=MeasurementOutcome.parse,
                   help="spin readout such as '+-+'")
    p.add_argument("--lossy", action="store_true", help="use the cavity model on all NVs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nvhyper", parents=[_common(False)],
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common(True)

    p = sub.add_parser("coeffs", parents=[common], help="scattering coefficients")
    _physics_args(p)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("truth-table", parents=[common], help="64-row hyper-CPF truth table")
    p.set_defaults(func=cmd_truth_table)

    p = sub.add_parser("parity", parents=[common], help="hyper-parity gate run")
    _physics_args(p)
    _spec_args(p)
    p.add_argument("--shots", type=int, default=0, help="also sample this many readouts")
    p.set_defaults(func=cmd_parity)

    p = sub.add_parser("block-metrics", parents=[common], help="average Block F and eta")
    _physics_args(p)
    p.add_argument("--ideal", action="store_true", help="ideal coefficients")
    p.add_argument("--method", choices=["quadrature", "monte-carlo"], default="quadrature")
    p.add_argument("--nodes", type=int, default=analysis.DEFAULT_NODES)
    p.add_argument("--samples", type=int, default=100_000)
    p.set_defaults(func=cmd_block_metrics)

    p = sub.add_parser("sweep", parents=[common], help="Block metrics over a parameter grid")
    p.add_argument("--grid", help="e.g. 'ks=0:0.5:26 coop=0.1:30:60'")
    p.add_argument("--output", default="sweep.csv")
    p.add_argument("--nodes", type=int, default=analysis.DEFAULT_NODES)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", parents=[common], help="full protocol run as JSON")
    _physics_args(p)
    _spec_args(p)
    p.add_argument("--mode", choices=["cpf", "parity"], default="cpf")
    p.add_argument("--record-intermediates", action="store_true")
    p.add_argument("--output", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_simulate)
    return parser


# options whose values may begin with "-" ("---", "-0.2,0.1,...")
DASH_VALUED = ("--force-outcome", "--spec-a", "--spec-b", "--coeffs", "--grid")


def _attach_dash_values(argv):
    """Rewrite ``--opt -value`` as ``--opt=-value`` so argparse keeps the value."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if tok in DASH_VALUED and nxt is not None and (
                not nxt.startswith("--") or re.fullmatch(r"[+-]{3}", nxt)):
            out.append(f"{tok}={nxt}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parser.parse_args(_attach_dash_values(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (InvalidParameterError, ConfigError, HilbertError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
