"""Exact Laurent-series arithmetic for harmonic functions on annuli.

A harmonic function with zero-flux part u = d log|z| + Re(sum_k a_k z^k)
has closed-form Dirichlet energy on any sub-annulus (Parseval, no mode
coupling), and its gradient modulus is |2 du/dz| with
2 du/dz = d/z + sum_k k a_k z^{k-1}.  Everything here is exact except where
a check deliberately samples circles; those checks approximate suprema from
below and say so.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadT,
    EmptyRange,
    FluxNotZero,
    NegativeModes,
    SingularAtOrigin,
    SingularPoint,
)
from .kernels import laurent_gradient_samples

MAX_MODE = 64


@dataclass
class AnnulusSpec:
    a: float
    b: float

    def __post_init__(self):
        if not (0 <= self.a < self.b < np.inf):
            raise ValueError("need 0 <= a < b < inf")

    @property
    def L(self):
        if self.a == 0:
            raise ValueError("conformal class undefined for a = 0")
        return float(np.log(self.b / self.a))


@dataclass
class LaurentHarmonic:
    d: float = 0.0
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for k, v in self.coeffs.items():
            k = int(k)
            if abs(k) > MAX_MODE:
                raise ValueError(f"mode {k} beyond cutoff {MAX_MODE}")
            v = complex(v)
            if not (np.isfinite(v.real) and np.isfinite(v.imag)):
                raise ValueError("coefficients must be finite")
            if v != 0:
                clean[k] = v
        self.coeffs = clean
        self.d = float(self.d)

    def modes(self):
        ks = np.array(sorted(self.coeffs), dtype=np.int64)
        return ks, np.array([self.coeffs[int(k)] for k in ks], dtype=np.complex128)

    def has_negative_modes(self):
        return any(k < 0 for k in self.coeffs)

    def to_json(self):
        K = max((abs(k) for k in self.coeffs), default=0)
        re = [self.coeffs.get(k, 0j).real for k in range(-K, K + 1)]
        im = [self.coeffs.get(k, 0j).imag for k in range(-K, K + 1)]
        return json.dumps({"d": self.d, "K": K, "re": re, "im": im})

    @classmethod
    def from_json(cls, text):
        rec = json.loads(text)
        K = int(rec["K"])
        coeffs = {
            k: complex(rec["re"][k + K], rec["im"][k + K]) for k in range(-K, K + 1)
        }
        return cls(d=float(rec["d"]), coeffs=coeffs)


def _require_regular_at_origin(h, ann):
    if ann.a == 0 and (h.d != 0 or h.has_negative_modes()):
        raise SingularAtOrigin("log term or negative modes on a disk")


def dirichlet_energy(h: LaurentHarmonic, ann: AnnulusSpec) -> float:
    """Exact Dirichlet energy of h over the annulus, by Parseval.

    int |grad u|^2 = pi sum_{k != 0} |k| |a_k|^2 |b^{2k} - a^{2k}|
                     + 2 pi d^2 log(b/a).
    """
    _require_regular_at_origin(h, ann)
    a, b = ann.a, ann.b
    total = 0.0
    for k, c in h.coeffs.items():
        if k == 0:
            continue
        total += np.pi * abs(k) * abs(c) ** 2 * abs(b ** (2 * k) - a ** (2 * k))
    if h.d != 0:
        total += 2 * np.pi * h.d**2 * np.log(b / a)
    return float(total)


def value_at(h: LaurentHarmonic, z) -> float:
    z = complex(z)
    if z == 0 and (h.d != 0 or h.has_negative_modes()):
        raise SingularPoint("value singular at the origin")
    u = h.d * np.log(abs(z)) if h.d != 0 else 0.0
    for k, c in h.coeffs.items():
        u += (c * z**k).real
    return float(u)


def gradient_at(h: LaurentHarmonic, z) -> complex:
    """2 du/dz at z; its modulus is |grad u|."""
    z = complex(z)
    if z == 0 and (h.d != 0 or h.has_negative_modes()):
        raise SingularPoint("gradient singular at the origin")
    g = h.d / z if h.d != 0 else 0j
    for k, c in h.coeffs.items():
        if k != 0:
            g += k * c * z ** (k - 1)
    return g


def gradient_moduli(h: LaurentHarmonic, z_samples):
    ks, cs = h.modes()
    keep = ks != 0
    return laurent_gradient_samples(h.d, ks[keep], cs[keep], np.asarray(z_samples, dtype=complex))


def _sample_radii(ann: AnnulusSpec, n_circles):
    lo = ann.a if ann.a > 0 else ann.b * 1e-3
    return np.geomspace(lo, ann.b, n_circles + 2)[1:-1]


def check_pointwise_bound(h, ann, n_circles=64, n_angles=256) -> dict:
    """Sampled check of the interior gradient bound for zero-flux harmonics.

    ratio(z) = |grad u(z)| / [ (2/sqrt(3 pi)) (b/(b^2-|z|^2) + a/(|z|^2-a^2))
                               ||grad u||_{L^2(annulus)} ]
    The supremum over the annulus is approximated from below on a log-uniform
    circle grid, so pass means "no violation found", a necessary condition.
    """
    if h.d != 0:
        raise FluxNotZero("pointwise bound needs zero flux (d = 0)")
    energy = dirichlet_energy(h, ann)
    if energy == 0:
        return {"max_ratio": 0.0, "pass": True}
    norm = np.sqrt(energy)
    a, b = ann.a, ann.b
    radii = _sample_radii(ann, n_circles)
    theta = np.linspace(0, 2 * np.pi, n_angles, endpoint=False)
    max_ratio = 0.0
    const = 2.0 / np.sqrt(3 * np.pi)
    for r in radii:
        z = r * np.exp(1j * theta)
        grad = gradient_moduli(h, z)
        envelope = b / (b**2 - r**2)
        if a > 0:
            envelope += a / (r**2 - a**2)
        bound = const * envelope * norm
        max_ratio = max(max_ratio, float(grad.max() / bound))
    return {"max_ratio": max_ratio, "pass": max_ratio <= 1 + 1e-9}


def check_average_bound(h, ann, n_radii=33) -> dict:
    """Dyadic-annulus energy bound, exact Parseval on both sides.

    For |z| in [4a, b/4] the energy on B_{2|z|} minus B_{|z|/2} is compared
    against (8/3) sqrt(5/2) (|z|/b + a/|z|) times the total energy.
    """
    if h.d != 0:
        raise FluxNotZero("average bound needs zero flux (d = 0)")
    a, b = ann.a, ann.b
    if 4 * a > b / 4:
        raise EmptyRange("no radii satisfy 4a <= |z| <= b/4")
    lo = 4 * a if a > 0 else (b / 4) * 1e-3
    radii = np.geomspace(lo, b / 4, n_radii)
    total = dirichlet_energy(h, ann)
    if total == 0:
        return {"max_ratio": 0.0, "pass": True, "radii": radii}
    norm = np.sqrt(total)
    const = (8.0 / 3.0) * np.sqrt(2.5)
    max_ratio = 0.0
    worst = radii[0]
    for r in radii:
        sub = dirichlet_energy(h, AnnulusSpec(r / 2, 2 * r))
        rhs = const * (r / b + (a / r if a > 0 else 0.0)) * norm
        ratio = float(np.sqrt(sub) / rhs)
        if ratio > max_ratio:
            max_ratio, worst = ratio, r
    return {"max_ratio": max_ratio, "pass": max_ratio <= 1 + 1e-9, "worst_radius": float(worst)}


def check_monotonicity(h, ann, t) -> bool:
    """Energy of the shrunk annulus B_{tb} minus B_{a/t} vs t times total."""
    if h.d != 0:
        raise FluxNotZero("monotonicity stated for zero-flux harmonics")
    if ann.a > 0:
        t_min = np.sqrt(ann.a / ann.b)
    else:
        t_min = 0.0
    if not (t_min < t <= 1.0):
        raise BadT(f"need t in ({t_min:.6g}, 1], got {t}")
    inner = ann.a / t if ann.a > 0 else 0.0
    lhs = np.sqrt(dirichlet_energy(h, AnnulusSpec(inner, t * ann.b)))
    rhs = t * np.sqrt(dirichlet_energy(h, ann))
    return bool(lhs <= rhs + 1e-12)


def monotonicity_ratio(h, ann, t) -> float:
    inner = ann.a / t if ann.a > 0 else 0.0
    lhs = np.sqrt(dirichlet_energy(h, AnnulusSpec(inner, t * ann.b)))
    rhs = t * np.sqrt(dirichlet_energy(h, ann))
    return float(lhs / rhs)


def check_ball_decay(h) -> bool:
    """Energy on the ring (1/4, 1/2) is at most a quarter of that on (1/2, 1).

    Holds for harmonics with only positive modes; k = 1 saturates it.
    """
    if h.d != 0:
        raise FluxNotZero("ball decay stated for d = 0")
    if h.has_negative_modes():
        raise NegativeModes("ball decay needs modes k >= 1 only")
    lhs = dirichlet_energy(h, AnnulusSpec(0.25, 0.5))
    rhs = dirichlet_energy(h, AnnulusSpec(0.5, 1.0))
    return bool(lhs <= 0.25 * rhs + 1e-14)


def sequence_kernel_sum(values, t, k, lo, hi):
    l = np.arange(lo, hi + 1)
    w = t ** np.abs(l - k + 1)
    v = np.zeros(hi - lo + 1)
    n = len(values)
    m = min(hi + 1, n)
    if m > lo:
        v[: m - lo] = values[lo:m]
    return float(np.sum(w * v**2))


def check_sequence_lemma(a_seq, b_seq, s, t, Gamma, N1, N2=None) -> dict:
    """Verify the dyadic sequence implication with explicit constant.

    Hypothesis, for every k in [N1, N2]:
        a_k <= b_k + Gamma (sum_{n>=0} s^{|n-k+1|} a_n^2)^{1/2}
    Conclusion, same k range, with C = 2 Gamma (1/(1-st) + 1/(1-s/t)):
        (sum_{l=N1..N2} t^{|l-k+1|} a_l^2)^{1/2}
            <= (sum_{l=N1..N2} t^{|l-k+1|} b_l^2)^{1/2}
               + C (sum_{l>=0} t^{|l-k+1|} a_l^2)^{1/2}

    The hypothesis is checked first; if it fails the report says so and the
    conclusion is not judged (the lemma claims nothing then).
    """
    a_seq = np.asarray(a_seq, dtype=np.float64)
    b_seq = np.asarray(b_seq, dtype=np.float64)
    if np.any(a_seq < 0) or np.any(b_seq < 0):
        raise ValueError("sequences must be non-negative")
    if not (0 < s < t < 1):
        raise ValueError("need 0 < s < t < 1")
    n = max(len(a_seq), len(b_seq))
    hi = n + 8 if N2 is None else min(N2, n + 8)
    support_hi = len(a_seq) - 1

    def a_at(k):
        return a_seq[k] if k < len(a_seq) else 0.0

    def b_at(k):
        return b_seq[k] if k < len(b_seq) else 0.0

    hyp_margin = np.inf
    for k in range(N1, hi + 1):
        rhs = b_at(k) + Gamma * np.sqrt(
            sequence_kernel_sum(a_seq, s, k, 0, support_hi if support_hi >= 0 else 0)
        )
        hyp_margin = min(hyp_margin, rhs - a_at(k))
    if hyp_margin < -1e-12:
        return {"hypothesis_holds": False, "conclusion_holds": None, "margin": float(hyp_margin)}

    C = 2 * Gamma * (1.0 / (1 - s * t) + 1.0 / (1 - s / t))
    top = support_hi if N2 is None else min(N2, support_hi)
    margin = np.inf
    worst_k = N1
    for k in range(N1, hi + 1):
        lhs = np.sqrt(sequence_kernel_sum(a_seq, t, k, N1, top if top >= N1 else N1))
        rhs = np.sqrt(sequence_kernel_sum(b_seq, t, k, N1, top if top >= N1 else N1))
        tail = np.sqrt(sequence_kernel_sum(a_seq, t, k, 0, support_hi if support_hi >= 0 else 0))
        m = rhs + C * tail - lhs
        if m < margin:
            margin, worst_k = m, k
    return {
        "hypothesis_holds": True,
        "conclusion_holds": bool(margin >= -1e-12),
        "margin": float(margin),
        "worst_k": int(worst_k),
        "constant": float(C),
    }


def random_zero_flux(rng, K=8, negative=True):
    """Random zero-flux harmonic: a_k complex Gaussian, scale 1/|k|."""
    coeffs = {}
    lo = -K if negative else 1
    for k in range(lo, K + 1):
        if k == 0:
            continue
        sigma = 1.0 / abs(k)
        coeffs[k] = complex(rng.normal(0, sigma), rng.normal(0, sigma))
    return LaurentHarmonic(d=0.0, coeffs=coeffs)


def gradient_field_on_annulus(h, ann, n_r=96, n_theta=128, radial="log"):
    """|grad u| sampled as a measured field, for Lorentz-norm checks."""
    from .lorentz_norms import sample_annulus

    return sample_annulus(lambda z: gradient_moduli(h, z.ravel()).reshape(z.shape),
                          ann.a, ann.b, n_r, n_theta, radial=radial)
