"""Synthetic experiment protocols and end-to-end validation runs.

Two protocols are simulated:

* a bench staircase: one or two adjacent segments strained 10 % at a time up
  to 40 % and back, repeated once per trial for every segment combination;
* a garment scenario: repeated shoulder, elbow and wrist movements mapped to
  strain on the sensitive fibre regions, one set of movements per trial.

Each run goes ladder -> signal chain -> reconstruction and scores the result
against the simulated ground truth.
"""

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import filters
from .io import read_csv
from .ladder import delta_cp
from .reconstruction import lsq
from .reconstruction.metrics import evaluate_columns
from .reconstruction.mlp import (
    JOINT_ARCH,
    JOINT_TRAIN,
    STRAIN_ARCH,
    STRAIN_TRAIN,
    mlp_forward,
    mlp_train,
)
from .signal_chain import IQFrames, NoiseConfig, complex_impedance_from_iq, simulate_frames

DEFAULT_COMBOS = ((0,), (1,), (2,), (3,), (0, 1), (1, 2), (2, 3))


@dataclass(frozen=True)
class StaircaseSpec:
    step: float = 0.10
    ramp_rate: float = 0.01  # strain per second
    max_strain: float = 0.40
    hold: float = 5.0
    repetitions: int = 6
    combos: tuple = DEFAULT_COMBOS
    rest_pad: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "combos", tuple(tuple(int(i) for i in c) for c in self.combos))
        if self.step < 0 or self.step > self.max_strain:
            raise ValueError("step must lie in [0, max_strain]")
        if self.ramp_rate <= 0 or self.hold < 0 or self.rest_pad < 0 or self.repetitions < 1:
            raise ValueError("invalid staircase timing")
        for c in self.combos:
            if len(c) == 1:
                continue
            if len(c) != 2 or c[1] != c[0] + 1:
                raise ValueError(f"combo {c} is neither a single segment nor an adjacent pair")

    @property
    def levels(self):
        if self.step == 0:
            return []
        k = int(math.floor(self.max_strain / self.step + 1e-9))
        up = [self.step * i for i in range(1, k + 1)]
        return up + up[-2::-1]

    @property
    def cycle_duration(self):
        lv = self.levels
        if not lv:
            return 0.0
        path = [0.0, *lv, 0.0]
        ramps = sum(abs(b - a) for a, b in zip(path, path[1:])) / self.ramp_rate
        return ramps + self.hold * len(lv)

    @property
    def trial_duration(self):
        return len(self.combos) * (self.cycle_duration + 2 * self.rest_pad)

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        d.pop("type", None)
        return cls(**d)

    def to_dict(self):
        return {"type": "staircase", "step": self.step, "ramp_rate": self.ramp_rate,
                "max_strain": self.max_strain, "hold": self.hold,
                "repetitions": self.repetitions, "combos": [list(c) for c in self.combos],
                "rest_pad": self.rest_pad}


def staircase_waveform(spec, t):
    """Strain of one up-down cycle at times ``t`` (seconds from cycle start)."""
    t = np.asarray(t, dtype=float)
    lv = spec.levels
    if not lv:
        return np.zeros_like(t)
    knots_t, knots_v = [0.0], [0.0]
    for v in lv:
        knots_t.append(knots_t[-1] + abs(v - knots_v[-1]) / spec.ramp_rate)
        knots_v.append(v)
        knots_t.append(knots_t[-1] + spec.hold)
        knots_v.append(v)
    knots_t.append(knots_t[-1] + knots_v[-1] / spec.ramp_rate)
    knots_v.append(0.0)
    return np.interp(t, knots_t, knots_v, left=0.0, right=0.0)


@dataclass
class StrainProfile:
    """Per-frame strain targets, ``eps`` shaped ``(n_frames, n_segments)``."""

    t: np.ndarray
    eps: np.ndarray
    trial: np.ndarray
    rate: float
    names: list = field(default_factory=list)
    group: np.ndarray = None  # protocol-specific tag, e.g. combo index

    def __len__(self):
        return len(self.t)


def staircase_profile(spec, frame_rate, n_segments=4, combo=(0,)):
    """One staircase cycle on ``combo`` with rest padding on both sides."""
    duration = spec.cycle_duration + 2 * spec.rest_pad
    nf = int(round(duration * frame_rate))
    t = np.arange(nf) / frame_rate
    eps = np.zeros((nf, n_segments))
    wave = staircase_waveform(spec, t - spec.rest_pad)
    for i in combo:
        eps[:, i] = wave
    return StrainProfile(t, eps, np.ones(nf, dtype=int), frame_rate,
                         [f"seg{i + 1}" for i in range(n_segments)], np.zeros(nf, dtype=int))


def staircase_protocol(spec, frame_rate, n_segments=4):
    """Every combo once per trial, trials numbered from 1.

    Frames are sampled on one clock over ``repetitions * trial_duration`` so
    the frame count is the duration times the frame rate, rounded once.
    ``group`` holds the combo index of each frame.
    """
    for c in spec.combos:
        if max(c) >= n_segments:
            raise ValueError(f"combo {c} exceeds the {n_segments}-segment ladder")
    piece = spec.cycle_duration + 2 * spec.rest_pad
    nf = int(round(spec.repetitions * spec.trial_duration * frame_rate))
    t = np.arange(nf) / frame_rate
    idx = np.minimum((t // piece).astype(int), spec.repetitions * len(spec.combos) - 1)
    wave = staircase_waveform(spec, t - idx * piece - spec.rest_pad)
    combo = idx % len(spec.combos)
    eps = np.zeros((nf, n_segments))
    for ci, c in enumerate(spec.combos):
        sel = combo == ci
        for i in c:
            eps[sel, i] = wave[sel]
    return StrainProfile(t, eps, idx // len(spec.combos) + 1, frame_rate,
                         [f"seg{i + 1}" for i in range(n_segments)], combo)


def _concat_profiles(parts, rate):
    eps = np.concatenate([p.eps for p in parts])
    nf = len(eps)
    return StrainProfile(np.arange(nf) / rate, eps, np.concatenate([p.trial for p in parts]),
                         rate, parts[0].names, np.concatenate([p.group for p in parts]))


JOINTS = ("shoulder", "elbow", "wrist")


@dataclass(frozen=True)
class JointScenarioSpec:
    ranges: tuple = (90.0, 180.0, 45.0)  # degrees: shoulder, elbow, wrist
    reps_per_joint: int = 10
    sets: int = 10
    movement_rate: float = 0.5  # Hz, one repetition per period
    prestrain: float = 0.10
    peak_strain: float = 0.30
    crosstalk: float = 0.02
    sensitive: tuple = (0, 2, 4)  # ladder index per joint
    amplitude_jitter: float = 0.1
    rate_jitter: float = 0.2
    rest: float = 3.0
    rest_pad: float = 5.0
    reference_noise: float = 0.0  # degrees, white noise on the reference angles
    seed: int = 0

    def __post_init__(self):
        if self.movement_rate <= 0 or self.movement_rate > 1:
            raise ValueError("movement_rate must lie in (0, 1] Hz")
        if not 0 <= self.prestrain < self.peak_strain:
            raise ValueError("need 0 <= prestrain < peak_strain")
        if self.crosstalk < 0 or self.crosstalk > 0.02 + 1e-12:
            raise ValueError("crosstalk is limited to 2 % strain")
        if len(self.ranges) != 3 or len(self.sensitive) != 3:
            raise ValueError("three joints expected")
        if not 0 <= self.amplitude_jitter < 1 or not 0 <= self.rate_jitter < 1:
            raise ValueError("jitter fractions must lie in [0, 1)")

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        d.pop("type", None)
        for k in ("ranges", "sensitive"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)

    def to_dict(self):
        return {"type": "joint", "ranges": list(self.ranges),
                "reps_per_joint": self.reps_per_joint, "sets": self.sets,
                "movement_rate": self.movement_rate, "prestrain": self.prestrain,
                "peak_strain": self.peak_strain, "crosstalk": self.crosstalk,
                "sensitive": list(self.sensitive), "amplitude_jitter": self.amplitude_jitter,
                "rate_jitter": self.rate_jitter, "rest": self.rest, "rest_pad": self.rest_pad,
                "reference_noise": self.reference_noise, "seed": self.seed}


def joint_trial_angles(spec, frame_rate, rng):
    """One set: each joint in turn performs ``reps`` raised-cosine cycles.

    Returns ``(angles, moving)`` where ``angles`` is ``(n_frames, 3)`` in
    degrees and ``moving`` is the index of the joint in motion per frame
    (-1 during rests).
    """
    pad = int(round(spec.rest_pad * frame_rate))
    rest = int(round(spec.rest * frame_rate))
    blocks, tags = [np.zeros((pad, 3))], [np.full(pad, -1)]
    for j, rom in enumerate(spec.ranges):
        for _ in range(spec.reps_per_joint):
            period = (1 + rng.uniform(-spec.rate_jitter, spec.rate_jitter)) / spec.movement_rate
            amp = rom * (1 - rng.uniform(0, spec.amplitude_jitter))
            nf = int(round(period * frame_rate))
            phase = np.arange(nf) / nf
            block = np.zeros((nf, 3))
            block[:, j] = amp * 0.5 * (1 - np.cos(2 * np.pi * phase))
            blocks.append(block)
            tags.append(np.full(nf, j))
        blocks.append(np.zeros((rest, 3)))
        tags.append(np.full(rest, -1))
    blocks.append(np.zeros((pad, 3)))
    tags.append(np.full(pad, -1))
    return np.concatenate(blocks), np.concatenate(tags)


def angles_to_strain(spec, angles, n_segments):
    """Affine angle-to-strain map with pre-strain and neighbour cross-talk."""
    x = np.asarray(angles, dtype=float) / np.asarray(spec.ranges)
    eps = np.full((len(x), n_segments), spec.prestrain)
    for j, seg in enumerate(spec.sensitive):
        eps[:, seg] += (spec.peak_strain - spec.prestrain) * x[:, j]
        for nb in (seg - 1, seg + 1):
            if 0 <= nb < n_segments and nb not in spec.sensitive:
                eps[:, nb] += 0.5 * spec.crosstalk * x[:, j]
    return eps


def joint_protocol(spec, frame_rate, n_segments=5):
    """Angles and fibre strain for all sets; returns ``(profile, angles)``.

    ``profile.group`` holds the moving-joint tag of every frame. With
    ``reference_noise`` the returned angles (not the strain) carry white
    noise, standing in for motion-capture jitter.
    """
    if max(spec.sensitive) >= n_segments:
        raise ValueError("sensitive segment index beyond the ladder")
    parts, angle_parts = [], []
    for trial in range(1, spec.sets + 1):
        rng = np.random.default_rng([spec.seed, trial])
        ang, moving = joint_trial_angles(spec, frame_rate, rng)
        nf = len(ang)
        parts.append(StrainProfile(np.arange(nf) / frame_rate, angles_to_strain(spec, ang, n_segments),
                                   np.full(nf, trial), frame_rate,
                                   [f"seg{i + 1}" for i in range(n_segments)], moving))
        if spec.reference_noise:
            ang = ang + rng.normal(0.0, spec.reference_noise, ang.shape)
        angle_parts.append(ang)
    return _concat_profiles(parts, frame_rate), np.concatenate(angle_parts)


@dataclass
class Dataset:
    """Frames paired with targets; every row carries its trial and group tag."""

    frames: IQFrames
    targets: np.ndarray
    target_names: list
    trial: np.ndarray
    group: np.ndarray
    rate: float
    kind: str  # "strain" or "joint"

    def __len__(self):
        return len(self.targets)

    def mask(self, trials):
        return np.isin(self.trial, list(trials))

    def frame_header(self):
        nt = self.frames.i_hat.shape[1]
        return ["t_s"] + [x for i in range(1, nt + 1) for x in (f"i{i}", f"q{i}")]

    def frame_rows(self):
        return [[t, *row] for t, row in zip(self.frames.t, self.frames.features())]

    def target_header(self):
        return ["t_s", "trial", "group", *self.target_names]

    def target_rows(self):
        return [[t, int(tr), int(g), *row]
                for t, tr, g, row in zip(self.frames.t, self.trial, self.group, self.targets)]


def synthesize_dataset(model, exc_cfg, noise, profile, angles=None, method="waveform"):
    """Run the signal chain once per frame of ``profile``.

    Each trial draws noise from its own generator seeded by
    ``(noise.seed, trial)``, so trials are reproducible independently.
    Targets are segment strain, or the joint ``angles`` when given.
    """
    noise = noise or NoiseConfig()
    parts = []
    for trial in np.unique(profile.trial):
        sel = profile.trial == trial
        rng = np.random.default_rng([noise.seed, int(trial)])
        parts.append(simulate_frames(model, profile.eps[sel], exc_cfg, noise, rng=rng, method=method))
    frames = IQFrames.concat(parts)
    frames.t = np.arange(len(frames)) / exc_cfg.frame_rate
    if angles is None:
        targets, names, kind = profile.eps.copy(), list(profile.names), "strain"
    else:
        targets, names, kind = np.asarray(angles, dtype=float), list(JOINTS), "joint"
    return Dataset(frames, targets, names, profile.trial.copy(), profile.group.copy(),
                   exc_cfg.frame_rate, kind)


def load_dataset(frames_csv, targets_csv, rate, kind):
    """Inverse of the ``frames.csv`` / ``targets.csv`` export."""
    fh, frows = read_csv(frames_csv)
    th, trows = read_csv(targets_csv)
    if len(frows) != len(trows):
        raise ValueError("frames and targets differ in length")
    f = np.array(frows, dtype=float).reshape(len(frows), len(fh))
    t = np.array(trows, dtype=float).reshape(len(trows), len(th))
    frames = IQFrames(f[:, 0], f[:, 1::2], f[:, 2::2])
    return Dataset(frames, t[:, 3:], th[3:], t[:, 1].astype(int), t[:, 2].astype(int), rate, kind)


def _per_trial(fn, x, trials):
    out = np.empty_like(x, dtype=float)
    for tr in np.unique(trials):
        sel = trials == tr
        out[sel] = fn(x[sel])
    return out


@dataclass
class StrainReport:
    metrics: dict  # median-filtered test predictions, percent strain
    raw_metrics: dict
    lsq_metrics: dict
    model: object
    history: object
    test_t: np.ndarray
    test_pred: np.ndarray
    test_ref: np.ndarray
    lsq_t: np.ndarray = None
    lsq_pred: np.ndarray = None
    lsq_ref: np.ndarray = None
    lsq_failures: int = 0
    lsq_clamps: int = 0


def strain_predictions(model, dataset, trials, median_window=2.0):
    """Raw and median-filtered MLP predictions (percent strain) on ``trials``."""
    sel = dataset.mask(trials)
    raw = mlp_forward(model, dataset.frames.features()[sel])
    filt = _per_trial(lambda a: filters.moving_median(a, dataset.rate, median_window), raw,
                      dataset.trial[sel])
    return sel, raw, filt


def run_strain_validation(dataset, train_cfg=STRAIN_TRAIN, arch=STRAIN_ARCH, ladder=None,
                          exc_cfg=None, train_trials=(1, 2, 3, 4), val_trials=(5,),
                          test_trials=(6,), median_window=2.0, control=None,
                          lsq_param="rc", lsq_stride=1):
    """Train on trials 1-4, stop early on 5, score on 6 (percent strain).

    ``control="shuffle"`` permutes the training targets as a sanity check.
    Passing the ``ladder`` and ``exc_cfg`` used for synthesis adds a
    least-squares inversion of every ``lsq_stride``-th test frame as an
    independent estimate, either over all R and C (``lsq_param="rc"``) or
    over the strains directly (``"strain"``).
    """
    x = dataset.frames.features()
    y = dataset.targets * 100.0
    tr, va, te = (dataset.mask(s) for s in (train_trials, val_trials, test_trials))
    if not (tr.any() and va.any() and te.any()):
        raise ValueError("dataset does not contain the requested trials")
    y_train = y[tr]
    if control == "shuffle":
        y_train = y_train[np.random.default_rng(train_cfg.seed).permutation(len(y_train))]
    elif control is not None:
        raise ValueError(f"unknown control {control!r}")
    model, hist = mlp_train(x[tr], y_train, x[va], y[va], arch, train_cfg)
    _, raw, pred = strain_predictions(model, dataset, test_trials, median_window)
    names = dataset.target_names
    report = StrainReport(
        metrics=evaluate_columns(pred, y[te], names),
        raw_metrics=evaluate_columns(raw, y[te], names),
        lsq_metrics={}, model=model, history=hist,
        test_t=dataset.frames.t[te], test_pred=pred, test_ref=y[te],
    )
    if ladder is not None and exc_cfg is not None and lsq_param is not None:
        idx = np.flatnonzero(te)[::lsq_stride]
        est, fails, clamps = lsq_strain(dataset.frames[idx], ladder, exc_cfg, lsq_param)
        report.lsq_t = dataset.frames.t[idx]
        report.lsq_pred = est * 100
        report.lsq_ref = y[idx]
        report.lsq_failures = fails
        report.lsq_clamps = clamps
        report.lsq_metrics = evaluate_columns(est * 100, y[idx], names)
    return report


def lsq_strain(frames, ladder, exc_cfg, param="rc"):
    """Per-frame model inversion to strain.

    Returns ``(strain, n_unconverged, n_clamped)``.
    """
    z = complex_impedance_from_iq(frames, exc_cfg)
    if param == "strain":
        ests = lsq.invert_strain_series(z, exc_cfg.omegas, ladder)
        return (np.array([e.eps for e in ests]), sum(not e.converged for e in ests),
                sum(e.clamped for e in ests))
    if param != "rc":
        raise ValueError(f"unknown LSQ parameterisation {param!r}")
    ests = lsq.invert_series(z, exc_cfg.omegas, ladder)
    eps, clamps = [], 0
    for e in ests:
        v, k = lsq.strain_from_capacitance(e.c, ladder)
        eps.append(v)
        clamps += k
    return np.array(eps), sum(not e.converged for e in ests), clamps


@dataclass
class FoldResult:
    test_trial: int
    metrics: dict
    spearman: dict
    model: object
    t: np.ndarray
    pred: np.ndarray
    ref: np.ndarray
    group: np.ndarray
    best_epoch: int = -1


@dataclass
class JointReport:
    folds: list
    metrics: dict  # pooled over all held-out trials
    spearman: dict  # per joint, over that joint's movement frames
    spearman_all: dict  # per joint, over every frame


def prepare_joint_inputs(dataset, cutoff=2.0, order=4, sg_window=2.0, sg_order=4):
    """Butterworth-filtered I/Q features and Savitzky-Golay-smoothed reference angles."""
    x = _per_trial(lambda a: filters.butterworth_lowpass(a, dataset.rate, order, cutoff),
                   dataset.frames.features(), dataset.trial)
    y = _per_trial(lambda a: filters.savitzky_golay(a, dataset.rate, sg_window, sg_order),
                   dataset.targets, dataset.trial)
    return x, y


def fold_split(dataset, test_trial, k, val_fraction, seed):
    """Indices ``(train, val, test)`` for fold ``k``: random frames from the other trials."""
    te = np.flatnonzero(dataset.trial == test_trial)
    rest = np.flatnonzero(dataset.trial != test_trial)
    perm = np.random.default_rng([seed, k]).permutation(rest)
    nval = int(round(val_fraction * len(perm)))
    return np.sort(perm[nval:]), np.sort(perm[:nval]), te


def movement_spearman(pred, ref, group):
    """Spearman per joint over the frames in which that joint is moving.

    Outside its own movement blocks a joint sits at a tied reference of 0
    while the others move, so ranks there carry only estimator noise.
    """
    out = {}
    for j, name in enumerate(JOINTS):
        sel = group == j
        out[name] = spearman(pred[sel, j], ref[sel, j]) if sel.sum() > 2 else float("nan")
    return out


def score_fold(model, x, y, dataset, test_trial, ranges):
    te = dataset.trial == test_trial
    pred = mlp_forward(model, x[te])
    return FoldResult(
        test_trial,
        evaluate_columns(pred, y[te], list(JOINTS), list(ranges)),
        movement_spearman(pred, y[te], dataset.group[te]),
        model, dataset.frames.t[te], pred, y[te], dataset.group[te],
    )


def run_joint_scenario(dataset, train_cfg=JOINT_TRAIN, arch=JOINT_ARCH, ranges=(90.0, 180.0, 45.0),
                       val_fraction=0.2, folds=None):
    """Leave-one-trial-out cross-validation of joint-angle regression.

    For each held-out trial the frames of the other trials are split at
    random into train and validation parts (``val_fraction``). Fold ``k``
    trains with seed ``train_cfg.seed + k``.
    """
    trials = [int(t) for t in np.unique(dataset.trial)]
    x, y = prepare_joint_inputs(dataset)
    results = []
    for k, test in enumerate(trials):
        if folds is not None and test not in folds:
            continue
        tr, va, _ = fold_split(dataset, test, k, val_fraction, train_cfg.seed)
        cfg = dataclasses.replace(train_cfg, seed=train_cfg.seed + k)
        model, hist = mlp_train(x[tr], y[tr], x[va], y[va], arch, cfg)
        res = score_fold(model, x, y, dataset, test, ranges)
        res.best_epoch = hist.best_epoch
        results.append(res)
    return summarize_folds(results, ranges)


def summarize_folds(results, ranges):
    pred = np.concatenate([r.pred for r in results])
    ref = np.concatenate([r.ref for r in results])
    group = np.concatenate([r.group for r in results])
    return JointReport(
        results, evaluate_columns(pred, ref, list(JOINTS), list(ranges)),
        movement_spearman(pred, ref, group),
        {j: spearman(pred[:, i], ref[:, i]) for i, j in enumerate(JOINTS)},
    )


def spearman(a, b):
    return float(stats.spearmanr(a, b).statistic)


def fig4_rows(model, freqs, levels=(0.1, 0.2, 0.3, 0.4)):
    """``freq_hz,segment,strain,delta_cp_farad`` rows, one segment strained at a time."""
    rows = []
    for i, label in enumerate(model.labels):
        for lv in levels:
            eps = np.zeros(model.n)
            eps[i] = lv
            for f, d in zip(freqs, delta_cp(model, eps, freqs)):
                rows.append([f, label, lv, d])
    return rows


def metrics_rows(metrics):
    """``target,rmse,nrmse,r2`` rows from a metrics dict."""
    return [[name, m.rmse, m.nrmse, m.r2] for name, m in metrics.items()]


METRICS_HEADER = ["target", "rmse", "nrmse", "r2"]
