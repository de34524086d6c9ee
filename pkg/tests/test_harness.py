import dataclasses

import numpy as np
import pytest

from fibresense import harness
from fibresense.harness import (
    JointScenarioSpec,
    StaircaseSpec,
    StrainProfile,
    angles_to_strain,
    joint_protocol,
    staircase_profile,
    staircase_protocol,
    staircase_waveform,
    synthesize_dataset,
)
from fibresense.io import write_csv
from fibresense.reconstruction.mlp import TrainConfig
from fibresense.signal_chain import ExcitationConfig, NoiseConfig

RATE = 30.517578125


# staircase


def plateaus(x, t, dt):
    """(level, duration) of every run where the value stays constant."""
    out = []
    start = 0
    for k in range(1, len(x) + 1):
        if k == len(x) or abs(x[k] - x[start]) > 1e-12:
            if k - start > 1:
                out.append((round(float(x[start]), 6), (k - start - 1) * dt))
            start = k
    return out


def test_bench_cycle_levels_and_timing():
    spec = StaircaseSpec()
    dt = 0.01
    t = np.arange(0, spec.cycle_duration + dt / 2, dt)
    wave = staircase_waveform(spec, t)
    runs = [(lv, d) for lv, d in plateaus(wave, t, dt) if lv > 0]
    assert [lv for lv, _ in runs] == [0.1, 0.2, 0.3, 0.4, 0.3, 0.2, 0.1]
    for _, d in runs:
        assert d == pytest.approx(5.0, abs=1e-6)
    # 0 -> 10 % at 1 %/s
    assert np.interp(10.0, t, wave) == pytest.approx(0.1)
    assert np.interp(5.0, t, wave) == pytest.approx(0.05)
    assert spec.cycle_duration == pytest.approx(8 * 10 + 7 * 5)


def test_zero_step_is_all_zero():
    prof = staircase_profile(StaircaseSpec(step=0.0), RATE)
    assert not np.any(prof.eps)


def test_pair_combo_strains_both_segments():
    prof = staircase_profile(StaircaseSpec(), RATE, combo=(0, 1))
    assert np.array_equal(prof.eps[:, 0], prof.eps[:, 1]) and prof.eps[:, 0].max() == pytest.approx(0.4)
    assert not np.any(prof.eps[:, 2:])


@pytest.mark.parametrize("combos", [[[0, 2]], [[1, 0]], [[0, 1, 2]]])
def test_non_adjacent_combos_rejected(combos):
    with pytest.raises(ValueError):
        StaircaseSpec(combos=combos)


def test_step_above_max_rejected():
    with pytest.raises(ValueError):
        StaircaseSpec(step=0.5)


def test_protocol_covers_every_combo_per_trial():
    spec = StaircaseSpec()
    prof = staircase_protocol(spec, RATE)
    assert set(np.unique(prof.trial)) == {1, 2, 3, 4, 5, 6}
    assert len(prof) == round(spec.repetitions * spec.trial_duration * RATE)
    for trial in range(1, 7):
        sel = prof.trial == trial
        assert set(np.unique(prof.group[sel])) == set(range(7))
    # every segment is strained to 40 % somewhere and stays within bounds
    assert np.all(prof.eps >= 0) and np.allclose(prof.eps.max(axis=0), 0.4, atol=2e-3)


def test_protocol_rejects_combo_beyond_ladder():
    with pytest.raises(ValueError):
        staircase_protocol(StaircaseSpec(combos=((4,),)), RATE, n_segments=4)


# synthesis


def small_exc():
    return ExcitationConfig.snapped(1e6, (12.5e3, 25e3, 50e3, 100e3), 1e-5, 4096)


def profile_from(eps, trial=None):
    eps = np.asarray(eps, dtype=float)
    nf = len(eps)
    trial = np.ones(nf, dtype=int) if trial is None else np.asarray(trial)
    return StrainProfile(np.arange(nf) / RATE, eps, trial, RATE, [f"seg{i + 1}" for i in range(eps.shape[1])],
                         np.zeros(nf, dtype=int))


def test_rest_frames_identical(ladder):
    ds = synthesize_dataset(ladder, small_exc(), NoiseConfig(), profile_from(np.zeros((20, 4))))
    feats = ds.frames.features()
    assert np.max(np.abs(feats - feats[0])) <= 1e-9 * np.max(np.abs(feats[0]))


def excursions(ladder, exc, combo):
    spec = StaircaseSpec(step=0.1, ramp_rate=0.05, hold=1.0, repetitions=1, combos=(combo,), rest_pad=1.0)
    prof = staircase_protocol(spec, exc.frame_rate)
    ds = synthesize_dataset(ladder, exc, NoiseConfig(), prof, method="analytic")
    i, q = ds.frames.i_hat, ds.frames.q_hat
    return np.ptp(i, axis=0) / np.abs(i[0]), np.ptp(q, axis=0) / np.abs(q[0])


def test_spatial_frequency_coupling_in_frames(ladder, exc):
    ex = [excursions(ladder, exc, (s,)) for s in range(4)]
    i_hi = [e[0][-1] for e in ex]
    q_hi = [e[1][-1] for e in ex]
    q_lo = np.array([e[1][0] for e in ex])
    # segment I moves the highest-tone frames most
    assert int(np.argmax(i_hi)) == 0 and int(np.argmax(q_hi)) == 0
    # at the lowest tone every single-segment staircase moves the quadrature
    # frames by nearly the same amount
    assert np.ptp(q_lo) / q_lo.mean() < 0.05


def test_same_seed_same_bytes(ladder, tmp_path):
    exc = small_exc()
    prof = staircase_protocol(StaircaseSpec(step=0.2, ramp_rate=0.1, hold=0.5, repetitions=2,
                                            combos=((0,), (2, 3)), rest_pad=0.5), exc.frame_rate)
    paths = []
    for k in range(2):
        ds = synthesize_dataset(ladder, exc, NoiseConfig(snr_db=40, seed=3), prof)
        p = tmp_path / f"frames{k}.csv"
        write_csv(p, ds.frame_header(), ds.frame_rows())
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_trials_seeded_independently(ladder):
    exc = small_exc()
    eps = np.zeros((10, 4))
    both = synthesize_dataset(ladder, exc, NoiseConfig(snr_db=40, seed=1), profile_from(np.r_[eps, eps],
                                                                                         [1] * 10 + [2] * 10))
    second = synthesize_dataset(ladder, exc, NoiseConfig(snr_db=40, seed=1), profile_from(eps, [2] * 10))
    assert np.array_equal(both.frames.features()[10:], second.frames.features())


def test_strain_step_reaches_frames_at_its_index_only(ladder):
    exc = small_exc()
    k = 7
    eps = np.zeros((15, 4))
    eps[k:, 1] = 0.3
    ds = synthesize_dataset(ladder, exc, NoiseConfig(), profile_from(eps))
    f = ds.frames.features()
    assert np.array_equal(f[:k], np.repeat(f[:1], k, axis=0))
    assert np.all(np.abs(f[k:] - f[0]).max(axis=1) > 0)
    assert np.array_equal(ds.targets[:, 1] > 0, np.arange(15) >= k)
    np.testing.assert_allclose(ds.frames.t, np.arange(15) / exc.frame_rate)


def test_dataset_csv_round_trip(ladder, tmp_path):
    exc = small_exc()
    eps = np.linspace(0, 0.4, 12)[:, None] * np.ones(4)
    ds = synthesize_dataset(ladder, exc, NoiseConfig(), profile_from(eps, [1] * 6 + [2] * 6))
    write_csv(tmp_path / "f.csv", ds.frame_header(), ds.frame_rows())
    write_csv(tmp_path / "t.csv", ds.target_header(), ds.target_rows())
    back = harness.load_dataset(tmp_path / "f.csv", tmp_path / "t.csv", ds.rate, ds.kind)
    assert np.array_equal(back.frames.features(), ds.frames.features())
    assert np.array_equal(back.targets, ds.targets) and np.array_equal(back.trial, ds.trial)
    assert ds.frame_header() == ["t_s", "i1", "q1", "i2", "q2", "i3", "q3", "i4", "q4"]


# strain validation


@pytest.fixture(scope="module")
def small_strain_dataset(ladder):
    exc = small_exc()
    spec = StaircaseSpec(step=0.1, ramp_rate=0.04, hold=1.0, repetitions=6, combos=((0,), (1, 2), (3,)), rest_pad=1.0)
    return synthesize_dataset(ladder, exc, NoiseConfig(), staircase_protocol(spec, exc.frame_rate),
                              method="analytic"), exc


def test_shuffled_control_has_no_skill(small_strain_dataset):
    ds, _ = small_strain_dataset
    cfg = TrainConfig(batch_size=256, optimizer="adagrad", lr=0.1, patience=20, max_epochs=100)
    rep = harness.run_strain_validation(ds, cfg, control="shuffle")
    assert abs(rep.metrics["aggregate"].r2) < 0.05


def test_validation_report_and_lsq_cross_check(small_strain_dataset, ladder):
    ds, exc = small_strain_dataset
    cfg = TrainConfig(batch_size=256, optimizer="adagrad", lr=0.1, patience=20, max_epochs=30)
    rep = harness.run_strain_validation(ds, cfg, ladder=ladder, exc_cfg=exc, lsq_param="strain", lsq_stride=7)
    assert set(rep.metrics) == {"seg1", "seg2", "seg3", "seg4", "aggregate"}
    assert len(rep.test_pred) == int(np.sum(ds.trial == 6))
    assert rep.lsq_metrics["aggregate"].rmse < 1e-4
    assert rep.lsq_failures == 0


def test_missing_trials_rejected(small_strain_dataset):
    ds, _ = small_strain_dataset
    with pytest.raises(ValueError):
        harness.run_strain_validation(ds, test_trials=(9,))


# joint scenario


def test_joint_angles_within_ranges_and_strain_map():
    spec = JointScenarioSpec(reps_per_joint=2, sets=2)
    prof, ang = joint_protocol(spec, RATE)
    assert ang.shape == (len(prof), 3)
    assert np.all(ang >= 0) and np.all(ang <= np.array(spec.ranges) + 1e-9)
    # pre-strain everywhere, peak strain only at full range
    assert prof.eps.min() == pytest.approx(0.10)
    assert prof.eps[:, [0, 2, 4]].max() <= 0.30 + 1e-12
    # cross-talk on insensitive segments stays within 2 % strain
    assert np.all(prof.eps[:, [1, 3]] - 0.10 <= 0.02 + 1e-12)
    assert set(np.unique(prof.group)) == {-1, 0, 1, 2}


def test_strain_map_monotone():
    spec = JointScenarioSpec()
    a = np.linspace(0, 1, 50)[:, None] * np.array(spec.ranges)
    eps = angles_to_strain(spec, a, 5)
    assert np.all(np.diff(eps[:, [0, 2, 4]], axis=0) > 0)
    assert eps[-1, 0] == pytest.approx(0.3)


@pytest.mark.parametrize("kw", [dict(crosstalk=0.03), dict(movement_rate=1.5), dict(prestrain=0.4),
                                dict(ranges=(90, 180))])
def test_joint_spec_invariants(kw):
    with pytest.raises(ValueError):
        JointScenarioSpec(**kw)


def test_leave_one_out_uses_every_trial_once(garment):
    exc = small_exc()
    spec = JointScenarioSpec(reps_per_joint=1, sets=10, rest=1.0, rest_pad=1.0)
    prof, ang = joint_protocol(spec, exc.frame_rate)
    ds = synthesize_dataset(garment, exc, NoiseConfig(), prof, ang, method="analytic")
    cfg = dataclasses.replace(harness.JOINT_TRAIN, max_epochs=2, patience=2)
    rep = harness.run_joint_scenario(ds, cfg)
    assert len(rep.folds) == 10
    assert sorted(f.test_trial for f in rep.folds) == list(range(1, 11))
    assert sum(len(f.pred) for f in rep.folds) == len(ds)
    for k, f in enumerate(rep.folds):
        tr, va, te = harness.fold_split(ds, f.test_trial, k, 0.2, cfg.seed)
        assert not set(tr) & set(te) and not set(va) & set(te) and not set(tr) & set(va)
        assert len(va) == pytest.approx(0.2 * (len(tr) + len(va)), abs=1)


def test_fig4_rows(ladder):
    rows = harness.fig4_rows(ladder, [1e3, 1e5], levels=(0.2,))
    assert len(rows) == 8 and rows[0][:3] == [1e3, "I", 0.2]
