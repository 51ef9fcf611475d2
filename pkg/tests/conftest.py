import numpy as np
import pytest

from fedaug import (
    CEConfig,
    CurveParams,
    DeviceProfile,
    Scenario,
    ScenarioConfig,
    generate_scenario,
)


@pytest.fixture
def unit_curve():
    """alpha=1, beta=0.5, gamma=0: closed forms are easy to check by hand."""
    return CurveParams(alpha=1.0, beta=0.5, gamma=0.0)


@pytest.fixture
def default_curve():
    return CurveParams(alpha=5.0, beta=0.35, gamma=0.1)


@pytest.fixture
def default_scenario():
    return generate_scenario(ScenarioConfig(), seed=0)


@pytest.fixture
def fast_ce():
    return CEConfig(samples_per_iter=40, elite_count=5, max_iters=25, seed=0)


def make_device(
    i=0,
    energy_coeff=5e-27,
    max_freq=1.5e9,
    channel_gain=4.85e-12,
    max_power=0.15,
    local_count=1250,
    categories=10,
    distance_km=0.4,
):
    base = local_count // categories
    counts = [base] * categories
    counts[0] += local_count - base * categories
    return DeviceProfile(
        id=i,
        energy_coeff=energy_coeff,
        max_freq=max_freq,
        channel_gain=channel_gain,
        max_power=max_power,
        local_count=local_count,
        category_counts=tuple(counts),
        distance_km=distance_km,
    )


def make_scenario(devices, curve=None, **overrides):
    fields = dict(
        devices=tuple(devices),
        bandwidth_total=20e6,
        noise_psd=10.0 ** (-20.4),
        update_size=111.7e6,
        workload_per_sample=5e6,
        local_epochs=1,
        t_max=60.0,
        delta_max=0.2,
        d_gen_max=5000,
        categories=10,
        curve=curve or CurveParams(alpha=5.0, beta=0.35, gamma=0.1),
    )
    fields.update(overrides)
    return Scenario(**fields)


def random_small_scenario(rng, n_devices, curve=None, **overrides):
    """Random heterogeneous scenario with n_devices in the default cell."""
    from fedaug.system_model import dbm_to_watts, path_loss_gain

    devices = []
    for i in range(n_devices):
        dist = float(np.sqrt(rng.uniform(0.01**2, 0.4**2)))
        devices.append(
            make_device(
                i=i,
                energy_coeff=float(rng.uniform(4e-27, 6e-27)),
                max_freq=float(rng.uniform(1e9, 2e9)),
                channel_gain=path_loss_gain(dist),
                max_power=dbm_to_watts(float(rng.uniform(20.0, 23.0))),
                distance_km=dist,
            )
        )
    return make_scenario(devices, curve=curve, **overrides)
