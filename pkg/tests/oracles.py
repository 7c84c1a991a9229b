"""Independent reference constructions used by the tests.

Nothing here calls the pipeline code: every state is written down directly
from the printed coefficient patterns, with its own bit bookkeeping.
Joint arrays are indexed [photon_a, photon_b, spin] with photon index
pol + 2*freq + 4*spatial + 8*timebin (pol R = 0) and spin index
s1 + 2*s2 + 4*s3 (plus = 0).
"""
import itertools

import numpy as np

PLUS, MINUS = 0, 1
S2 = 1 / np.sqrt(2)


def photon_index(f, s, t):
    return 2 * f + 4 * s + 8 * t


def product_state(t_freq, t_spatial, t_time):
    """Joint (16, 16, 8) array from per-DOF tensors T[x_a, x_b, spin_of_that_nv]."""
    out = np.zeros((16, 16, 8), dtype=complex)
    for fa, fb, sa, sb, ta, tb, s1, s2, s3 in itertools.product(range(2), repeat=9):
        amp = t_freq[fa, fb, s1] * t_spatial[sa, sb, s2] * t_time[ta, tb, s3]
        out[photon_index(fa, sa, ta), photon_index(fb, sb, tb), s1 + 2 * s2 + 4 * s3] += amp
    return out


def _ket(*amps):
    return np.asarray(amps, dtype=complex)


def untouched(c_a, c_b):
    """DOF factor before any NV interaction: c_a x c_b x (|+> + |->)/sqrt2."""
    return np.einsum("i,j,k->ijk", c_a, c_b, _ket(S2, S2))


def freq_after_block1(alpha, beta):
    t = np.zeros((2, 2, 2), dtype=complex)
    for fb in range(2):
        t[0, fb] = S2 * alpha[0] * beta[fb] * _ket(1, -1)
        t[1, fb] = -S2 * alpha[1] * beta[fb] * _ket(1, 1)
    return t


def freq_after_he1(alpha, beta):
    t = np.zeros((2, 2, 2), dtype=complex)
    for fb in range(2):
        t[0, fb, MINUS] = alpha[0] * beta[fb]
        t[1, fb, PLUS] = -alpha[1] * beta[fb]
    return t


def spatial_after_photon_a(gamma, delta):
    t = np.zeros((2, 2, 2), dtype=complex)
    for sb in range(2):
        t[0, sb, MINUS] = gamma[0] * delta[sb]
        t[1, sb, PLUS] = gamma[1] * delta[sb]
    return t


def time_after_photon_a(vs, xi):
    t = np.zeros((2, 2, 2), dtype=complex)
    for tb in range(2):
        t[0, tb, PLUS] = vs[0] * xi[tb]
        t[1, tb, MINUS] = vs[1] * xi[tb]
    return t


def cpf_premeasure_factors(alpha, beta, gamma, delta, vs, xi):
    a1, a2 = alpha
    b1, b2 = beta
    f = np.zeros((2, 2, 2), dtype=complex)
    f[0, :, PLUS] = -a1 * _ket(b1, b2)
    f[1, :, PLUS] = a2 * _ket(-b1, b2)
    f[0, :, MINUS] = a1 * _ket(b1, b2)
    f[1, :, MINUS] = a2 * _ket(-b1, b2)
    g1, g2 = gamma
    d1, d2 = delta
    s = np.zeros((2, 2, 2), dtype=complex)
    s[0, :, PLUS] = g1 * _ket(-d1, d2)
    s[1, :, PLUS] = g2 * _ket(d1, d2)
    s[0, :, MINUS] = g1 * _ket(d1, -d2)
    s[1, :, MINUS] = g2 * _ket(d1, d2)
    v1, v2 = vs
    x1, x2 = xi
    t = np.zeros((2, 2, 2), dtype=complex)
    t[0, :, PLUS] = v1 * _ket(x1, x2)
    t[1, :, PLUS] = v2 * _ket(x1, -x2)
    t[0, :, MINUS] = v1 * _ket(x1, x2)
    t[1, :, MINUS] = v2 * _ket(-x1, x2)
    return f, s, t


def parity_factor(c, d, parity):
    """2x2 two-photon factor: even c1 d1|11> + c2 d2|22>, odd c1 d2|12> + c2 d1|21>."""
    m = np.zeros((2, 2), dtype=complex)
    if parity == "even":
        m[0, 0], m[1, 1] = c[0] * d[0], c[1] * d[1]
    else:
        m[0, 1], m[1, 0] = c[0] * d[1], c[1] * d[0]
    return m


def parity_premeasure_factors(alpha, beta, gamma, delta, vs, xi):
    out = []
    for k, (c, d) in enumerate(((alpha, beta), (gamma, delta), (vs, xi))):
        t = np.zeros((2, 2, 2), dtype=complex)
        t[:, :, PLUS] = parity_factor(c, d, "even")
        # only the frequency odd branch carries a minus sign
        t[:, :, MINUS] = (-1 if k == 0 else 1) * parity_factor(c, d, "odd")
        out.append(t)
    return out


def parity_collapse(amps_a, amps_b, outcome):
    """Photon-pair (16, 16) amplitudes of the collapsed state for a +/- triple."""
    mats = [parity_factor(c, d, "even" if o == "+" else "odd")
            for c, d, o in zip(amps_a, amps_b, outcome)]
    out = np.zeros((16, 16), dtype=complex)
    for fa, fb, sa, sb, ta, tb in itertools.product(range(2), repeat=6):
        out[photon_index(fa, sa, ta), photon_index(fb, sb, tb)] = (
            mats[0][fa, fb] * mats[1][sa, sb] * mats[2][ta, tb])
    return out


def photon_vector(amps):
    """16-dim photon ket (pol R) from three (c1, c2) pairs."""
    v = np.zeros(16, dtype=complex)
    for f, s, t in itertools.product(range(2), repeat=3):
        v[photon_index(f, s, t)] = amps[0][f] * amps[1][s] * amps[2][t]
    return v


def cpf3_matrix():
    """Diagonal 256x256 CPF x CPF x CPF on (photon a index + 16 * photon b index)."""
    d = np.ones(256, dtype=complex)
    for ia, ib in itertools.product(range(16), repeat=2):
        fa, sa, ta = (ia >> 1) & 1, (ia >> 2) & 1, (ia >> 3) & 1
        fb, sb, tb = (ib >> 1) & 1, (ib >> 2) & 1, (ib >> 3) & 1
        d[ia + 16 * ib] = (-1) ** (fa * fb + sa * sb + ta * tb)
    return np.diag(d)


def cpf3_output(amps_a, amps_b):
    """(16, 16) photon-pair amplitudes of CPF^3 applied to the product input."""
    joint = np.kron(photon_vector(amps_b), photon_vector(amps_a))
    return (cpf3_matrix() @ joint).reshape(16, 16).T


# Transition rules exactly as printed for the ideal cavity:
# (port, pol, freq, spin) -> (coefficient, port, pol)
IDEAL_TRANSITIONS = {
    ("up", "R", 1, "+"): (-1, "up", "R"), ("down", "R", 1, "+"): (1, "up", "L"),
    ("up", "R", 2, "+"): (-1, "up", "R"), ("down", "R", 2, "+"): (-1, "down", "R"),
    ("up", "R", 1, "-"): (-1, "up", "R"), ("down", "R", 1, "-"): (-1, "down", "R"),
    ("up", "R", 2, "-"): (1, "down", "L"), ("down", "R", 2, "-"): (-1, "down", "R"),
    ("up", "L", 1, "+"): (1, "down", "R"), ("down", "L", 1, "+"): (-1, "down", "L"),
    ("up", "L", 2, "+"): (-1, "up", "L"), ("down", "L", 2, "+"): (-1, "down", "L"),
    ("up", "L", 1, "-"): (-1, "up", "L"), ("down", "L", 1, "-"): (-1, "down", "L"),
    ("up", "L", 2, "-"): (-1, "up", "L"), ("down", "L", 2, "-"): (1, "up", "R"),
}

# Block signs on R-down inputs: (freq, spin) -> sign
BLOCK_SIGNS_R = {(1, "+"): 1, (1, "-"): -1, (2, "+"): -1, (2, "-"): -1}
# and on L-up inputs
BLOCK_SIGNS_L = {(1, "+"): -1, (1, "-"): -1, (2, "+"): -1, (2, "-"): -1}


def random_pairs(rng):
    pairs = []
    for _ in range(3):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        pairs.append(tuple(v / np.linalg.norm(v)))
    return pairs


def gauge(v, atol=1e-12):
    v = np.asarray(v, dtype=complex).ravel()
    k = np.flatnonzero(np.abs(v) > atol)
    return v if k.size == 0 else v * (abs(v[k[0]]) / v[k[0]])


def same_up_to_phase(x, y, normalize=True):
    """Max amplitude error between x and y after norm and phase alignment."""
    x = np.asarray(x, dtype=complex).ravel()
    y = np.asarray(y, dtype=complex).ravel()
    if normalize:
        x = x / np.linalg.norm(x)
        y = y / np.linalg.norm(y)
    phase = np.vdot(x, y)
    if abs(phase) > 0:
        x = x * phase / abs(phase)
    return float(np.max(np.abs(x - y)))
