"""RC ladder model of a capacitive strain-sensing fibre.

The fibre is split into ``n`` lumped stages, stage 1 nearest the readout. Each
stage is a series core resistance followed by a shunt capacitance; both scale
linearly with the stage's local strain (``eps = l / l0 - 1``)::

    R(eps) = R(0) * (1 + eps * gf_r)
    C(eps) = C(0) * (1 + eps * gf_c)

The input impedance is evaluated with the backward recursion

    Z_n = R_n + 1 / (jwC_n)
    Z_i = R_i + 1 / (jwC_i + 1 / Z_{i+1})

Everything here is vectorised over frequency and works on immutable values.
"""

from dataclasses import dataclass, field

import numpy as np

from .units import parse_eng


class StrainRangeError(ValueError):
    """A strain value lies outside a segment's admissible range."""


@dataclass(frozen=True)
class SegmentSpec:
    length0: float
    r0: float
    c0: float
    gf_c: float
    gf_r: float = 0.1
    max_strain: float = 0.4
    label: str = ""

    def __post_init__(self):
        if not (self.r0 > 0 and self.c0 > 0 and self.length0 > 0):
            raise ValueError(f"segment {self.label!r}: r0, c0 and length0 must be positive")
        if not 0 < self.max_strain <= 1:
            raise ValueError(f"segment {self.label!r}: max_strain must lie in (0, 1]")
        if self.gf_c < 0 or self.gf_r < 0:
            raise ValueError(f"segment {self.label!r}: gauge factors must be non-negative")

    @classmethod
    def from_dict(cls, d):
        return cls(
            length0=parse_eng(d["length0"]),
            r0=parse_eng(d["r0"]),
            c0=parse_eng(d["c0"]),
            gf_c=parse_eng(d["gf_c"]),
            gf_r=parse_eng(d.get("gf_r", 0.1)),
            max_strain=parse_eng(d.get("max_strain", 0.4)),
            label=str(d.get("label", "")),
        )

    def to_dict(self):
        return {
            "label": self.label,
            "length0": self.length0,
            "r0": self.r0,
            "c0": self.c0,
            "gf_c": self.gf_c,
            "gf_r": self.gf_r,
            "max_strain": self.max_strain,
        }


@dataclass(frozen=True)
class RCParams:
    r: float
    c: float

    def __post_init__(self):
        if not (self.r > 0 and self.c > 0):
            raise ValueError("RC parameters must be positive")


@dataclass(frozen=True)
class LadderModel:
    """Ordered segments, index 0 (label usually "I") closest to the readout.

    ``joint_r`` holds optional series resistances of the interconnects between
    consecutive segments (length ``n - 1``); zero means an ideal jumper.
    """

    segments: tuple
    joint_r: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if len(self.segments) < 1:
            raise ValueError("a ladder needs at least one segment")
        jr = tuple(float(x) for x in self.joint_r) or (0.0,) * (len(self.segments) - 1)
        if len(jr) != len(self.segments) - 1:
            raise ValueError("joint_r needs one entry per interconnect (n - 1)")
        if any(x < 0 for x in jr):
            raise ValueError("interconnect resistances must be non-negative")
        object.__setattr__(self, "joint_r", jr)

    @property
    def n(self):
        return len(self.segments)

    @property
    def labels(self):
        return [s.label or str(i + 1) for i, s in enumerate(self.segments)]

    def rest_params(self):
        """Rest-state (R, C) arrays."""
        r = np.array([s.r0 for s in self.segments])
        c = np.array([s.c0 for s in self.segments])
        return r, c

    def params(self, strains):
        """(R, C) arrays at the given per-segment strains."""
        strains = check_strains(self, strains)
        pairs = [params_at_strain(s, e) for s, e in zip(self.segments, strains)]
        return np.array([p.r for p in pairs]), np.array([p.c for p in pairs])

    @classmethod
    def from_dict(cls, d):
        segs = [SegmentSpec.from_dict(s) for s in d["segments"]]
        jr = d.get("joint_r", ())
        if isinstance(jr, (int, float, str)):
            jr = [jr] * (len(segs) - 1)
        return cls(tuple(segs), tuple(parse_eng(x) for x in jr))

    def to_dict(self):
        return {"segments": [s.to_dict() for s in self.segments], "joint_r": list(self.joint_r)}


def paper_ladder(n=4, gf_c=0.5, gf_r=0.1):
    """Bench-test fibre: 10 cm segments at 0.75 kOhm/cm and 4.7 pF/cm."""
    labels = ["I", "II", "III", "IV", "V", "VI", "VII", "VIII"]
    segs = [
        SegmentSpec(length0=0.10, r0=7.5e3, c0=47e-12, gf_c=gf_c, gf_r=gf_r,
                    max_strain=0.4, label=labels[i] if i < len(labels) else str(i + 1))
        for i in range(n)
    ]
    return LadderModel(tuple(segs))


def params_at_strain(seg, eps):
    if not (0.0 <= eps <= seg.max_strain) or not np.isfinite(eps):
        raise StrainRangeError(
            f"strain {eps!r} outside [0, {seg.max_strain}] for segment {seg.label!r}"
        )
    return RCParams(r=seg.r0 * (1.0 + eps * seg.gf_r), c=seg.c0 * (1.0 + eps * seg.gf_c))


def check_strains(model, strains):
    if strains is None:
        return np.zeros(model.n)
    strains = np.asarray(strains, dtype=float)
    if strains.shape != (model.n,):
        raise ValueError(f"expected {model.n} strains, got shape {strains.shape}")
    return strains


def rc_ladder_impedance(r, c, omega, joint_r=None):
    """Input impedance of a ladder with explicit element values.

    ``r`` and ``c`` are length-``n`` arrays, ``omega`` scalar or array; the
    result has the shape of ``omega``. With 2-D ``r`` / ``c`` of shape ``(m, n)`` and 1-D ``omega`` the result is
    ``(m, len(omega))``.
    """
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    jw = 1j * np.asarray(omega, dtype=float)
    if r.ndim == 2:
        # stage axis first; each stage broadcasts (m, 1) against the frequencies
        r = r.T[:, :, None]
        c = c.T[:, :, None]
    z = r[-1] + 1.0 / (jw * c[-1])
    for i in range(len(r) - 2, -1, -1):
        if joint_r is not None:
            z = z + joint_r[i]
        z = r[i] + 1.0 / (jw * c[i] + 1.0 / z)
    return z


def ladder_impedance(model, strains, omega):
    """Complex input impedance of ``model`` at ``omega`` (rad/s, scalar or array)."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValueError("omega must be positive")
    r, c = model.params(strains)
    return rc_ladder_impedance(r, c, w, model.joint_r)


def ladder_impedance_series(model, strain_series, omega):
    """Impedance for many strain states at once, shape ``(m, len(omega))``."""
    eps = np.atleast_2d(np.asarray(strain_series, dtype=float))
    if eps.shape[1] != model.n:
        raise ValueError(f"expected {model.n} strains per row, got {eps.shape[1]}")
    caps = np.array([s.max_strain for s in model.segments])
    bad = ~np.isfinite(eps) | (eps < 0) | (eps > caps)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise StrainRangeError(
            f"strain {eps[row, col]!r} outside [0, {caps[col]}] for segment "
            f"{model.segments[col].label!r}"
        )
    r0, c0 = model.rest_params()
    gr = np.array([s.gf_r for s in model.segments])
    gc = np.array([s.gf_c for s in model.segments])
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    return rc_ladder_impedance(r0 * (1 + eps * gr), c0 * (1 + eps * gc), w, model.joint_r)


def parallel_capacitance(z, omega):
    """Equivalent parallel-RC capacitance ``Im(1/Z) / omega``."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) == 0):
        raise ZeroDivisionError("zero impedance has no parallel-model capacitance")
    out = (1.0 / z).imag / np.asarray(omega, dtype=float)
    return out if out.ndim else float(out)


@dataclass
class Sweep:
    freq_hz: np.ndarray
    z: np.ndarray
    cp: np.ndarray

    def rows(self):
        return list(zip(self.freq_hz, self.z, self.cp))


def frequency_sweep(model, strains, freq_grid):
    f = np.asarray(freq_grid, dtype=float)
    if f.size == 0:
        raise ValueError("frequency grid is empty")
    if np.any(f <= 0) or np.any(np.diff(f) <= 0):
        raise ValueError("frequency grid must be positive and strictly ascending")
    w = 2 * np.pi * f
    z = ladder_impedance(model, strains, w)
    return Sweep(freq_hz=f, z=z, cp=parallel_capacitance(z, w))


def delta_cp(model, strains, freq_grid):
    """Change in parallel capacitance relative to the rest state."""
    return (frequency_sweep(model, strains, freq_grid).cp
            - frequency_sweep(model, None, freq_grid).cp)


def segment_responses(model, freqs, strain=None):
    """ΔC_p of each segment strained alone, shape ``(n, len(freqs))``.

    ``strain`` defaults to each segment's ``max_strain``.
    """
    f = np.unique(np.asarray(freqs, dtype=float))
    rows = []
    for i, seg in enumerate(model.segments):
        eps = np.zeros(model.n)
        eps[i] = seg.max_strain if strain is None else strain
        rows.append(delta_cp(model, eps, f))
    return np.array(rows)


def discrimination_score(model, candidate_freqs, strain=None):
    """How well the candidate tones tell single-segment strain events apart.

    For every pair of segments the unit-normalised ΔC_p response vectors are
    compared, and the distance is weighted by the weaker response relative to
    the strongest one. Direction alone would reward bands where a far segment
    responds with a vanishing but differently shaped signal; the weight keeps
    such bands low. The score is the minimum over pairs. Duplicate
    frequencies are ignored.
    """
    if len(candidate_freqs) == 0:
        raise ValueError("no candidate frequencies")
    resp = segment_responses(model, candidate_freqs, strain)
    norms = np.linalg.norm(resp, axis=1)
    top = norms.max()
    n = resp.shape[0]
    if top == 0:
        return 0.0
    if n < 2:
        return 1.0
    shape = resp / np.where(norms > 0, norms, 1.0)[:, None]
    return float(min(np.linalg.norm(shape[i] - shape[j]) * min(norms[i], norms[j]) / top
                     for i in range(n) for j in range(i + 1, n)))


def garment_ladder(sensitive_gf=1.06, insensitive_gf=0.15, gf_r=0.1,
                   lengths=(0.10, 0.25, 0.10, 0.25, 0.10)):
    """80 cm garment fibre: sensitive regions I, III, V around shoulder, elbow, wrist."""
    labels = ["I", "II", "III", "IV", "V"]
    segs = []
    for i, length in enumerate(lengths):
        cm = length * 100
        segs.append(SegmentSpec(
            length0=length, r0=750.0 * cm, c0=4.7e-12 * cm,
            gf_c=sensitive_gf if i % 2 == 0 else insensitive_gf,
            gf_r=gf_r, max_strain=0.4, label=labels[i],
        ))
    return LadderModel(tuple(segs))
