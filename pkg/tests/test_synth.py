import numpy as np
import pytest

from gaitpred.data import trial_csv_bytes
from gaitpred.rng import derive_seed
from gaitpred.synth import (
    GaitProfile,
    generate_participant,
    generate_trial,
    profile_from_config,
    profile_to_config,
    sample_profile,
)


def test_profile_invariants():
    with pytest.raises(ValueError):
        GaitProfile(stance_fraction=0.0)
    with pytest.raises(ValueError):
        GaitProfile(stance_fraction=1.2)
    with pytest.raises(ValueError):
        GaitProfile(amplitudes=(1, 1, 1, 1, 1, -1))
    with pytest.raises(ValueError):
        GaitProfile(sample_rate_hz=0)


def test_trial_length_matches_duration():
    trial = generate_trial(GaitProfile(), 10.0, seed=1)
    assert len(trial) == 1250
    assert trial.sample_period_ms == 8.0


def test_duration_below_one_cycle_errors():
    with pytest.raises(ValueError):
        generate_trial(GaitProfile(cadence_hz=0.5), 1.0, seed=1)


def test_noiseless_output_is_periodic():
    profile = GaitProfile(noise_std=0.0, cadence_jitter=0.0, cadence_hz=1.25)
    trial = generate_trial(profile, 8.0, seed=3)
    period = round(profile.sample_rate_hz / profile.cadence_hz)
    v = trial.values
    n_full = (len(v) // period) - 1
    np.testing.assert_array_equal(v[:n_full * period], v[period:(n_full + 1) * period])


def test_determinism_byte_identical_csv():
    profile = GaitProfile(noise_std=0.02)
    a = generate_trial(profile, 6.0, seed=77)
    b = generate_trial(profile, 6.0, seed=77)
    assert trial_csv_bytes(a) == trial_csv_bytes(b)
    c = generate_trial(profile, 6.0, seed=78)
    assert trial_csv_bytes(a) != trial_csv_bytes(c)


def test_non_negative_values():
    trial = generate_trial(GaitProfile(noise_std=0.05), 10.0, seed=5)
    assert (trial.values >= 0).all()


def test_stance_occupancy_near_stance_fraction():
    # threshold-counting oracle: fraction of steps whose summed pressure
    # exceeds 10% of max should be close to the stance fraction
    for seed in (1, 2, 3):
        profile = GaitProfile(noise_std=0.02, cadence_jitter=0.02)
        trial = generate_trial(profile, 20.0, seed=seed)
        sums = trial.values.sum(axis=1)
        occupancy = np.mean(sums > 0.1 * sums.max())
        assert abs(occupancy - profile.stance_fraction) <= 0.05


def test_heel_peaks_before_forefoot():
    profile = GaitProfile(noise_std=0.0, cadence_jitter=0.0)
    trial = generate_trial(profile, 4.0, seed=2)
    period = round(profile.sample_rate_hz / profile.cadence_hz)
    cycle = trial.values[:period]
    heel_peak = np.argmax(cycle[:, 3:].sum(axis=1))
    forefoot_peak = np.argmax(cycle[:, :3].sum(axis=1))
    assert heel_peak < forefoot_peak


def test_generate_participant_basic():
    profile = GaitProfile(cadence_jitter=0.02)
    trials = generate_participant(profile, 3, base_seed=9)
    assert len(trials) == 3
    assert len({len(t) for t in trials}) == 3  # jitter makes lengths distinct
    again = generate_participant(profile, 3, base_seed=9)
    for a, b in zip(trials, again):
        np.testing.assert_array_equal(a.values, b.values)
    with pytest.raises(ValueError):
        generate_participant(profile, 2, base_seed=9)
    with pytest.raises(ValueError):
        generate_participant(profile, 13, base_seed=9)


def test_within_participant_correlation_exceeds_across():
    # trials sharing a profile correlate more than trials from different
    # profiles (comparing summed signals truncated to a common length)
    base = GaitProfile(noise_std=0.01, cadence_jitter=0.005)
    profiles = [sample_profile(base, derive_seed(31, "p", i)) for i in range(3)]
    corpora = [generate_participant(p, 3, base_seed=derive_seed(31, "t", i))
               for i, p in enumerate(profiles)]

    def corr(t1, t2):
        n = min(len(t1), len(t2))
        a = t1.values[:n].sum(axis=1)
        b = t2.values[:n].sum(axis=1)
        return np.corrcoef(a, b)[0, 1]

    within = []
    for trials in corpora:
        for i in range(len(trials)):
            for j in range(i + 1, len(trials)):
                within.append(corr(trials[i], trials[j]))
    across = []
    for pi in range(len(corpora)):
        for pj in range(pi + 1, len(corpora)):
            across.append(corr(corpora[pi][0], corpora[pj][0]))
    assert np.mean(within) > np.mean(across)


def test_profile_config_round_trip():
    profile = GaitProfile(cadence_hz=1.1, noise_std=0.03,
                          amplitudes=(0.5, 1, 1.5, 2, 1, 0.25))
    text = profile_to_config(profile)
    back = profile_from_config(text)
    assert back == profile
    with pytest.raises(ValueError):
        profile_from_config("nonsense line")
    with pytest.raises(ValueError):
        profile_from_config("unknown_key=3")
