"""Device, channel, and cost models plus randomized scenario generation.

Energy and latency follow the standard edge-FL models: compute energy
``tau * eps * omega * D * f^2``, compute latency ``tau * omega * D / f``,
FDMA uplink rate ``b * log2(1 + g P / (N0 b))``, and uplink cost S/r
seconds and S*P/r joules for an S-bit model update.  Scenario generation
draws device fleets matching a 400 m cell with uniform placement and
Dirichlet non-IID local category counts.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .augmentation import integerize
from .errors import (
    ConfigError,
    FrequencyExceeded,
    InvalidFrequency,
    UnreachableServer,
)
from .learning_curve import CurveParams

__all__ = [
    "DeviceProfile",
    "Scenario",
    "DeviceAllocation",
    "Allocation",
    "PerDeviceCost",
    "RoundMetrics",
    "ScenarioConfig",
    "compute_energy",
    "compute_latency",
    "uplink_rate",
    "uplink_cost",
    "path_loss_gain",
    "round_metrics",
    "dirichlet_partition",
    "generate_scenario",
    "dbm_to_watts",
    "scenario_to_json",
    "scenario_from_json",
    "allocation_to_json",
    "allocation_from_json",
    "write_device_csv",
]


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class DeviceProfile:
    """One device's compute, channel, power, and local-data characteristics."""

    id: int
    energy_coeff: float      # J*s^2/cycle^3
    max_freq: float          # cycles/s
    channel_gain: float      # linear power gain
    max_power: float         # W
    local_count: int
    category_counts: tuple
    distance_km: float

    def __post_init__(self):
        if sum(self.category_counts) != self.local_count:
            raise ConfigError(
                "category_counts",
                f"sum {sum(self.category_counts)} != local_count {self.local_count}",
            )
        for name in (
            "energy_coeff",
            "max_freq",
            "max_power",
            "local_count",
            "distance_km",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(name, "must be positive")
        if not (0.0 < self.channel_gain < 1.0):
            raise ConfigError(
                "channel_gain", f"must lie in (0, 1), got {self.channel_gain}"
            )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "energy_coeff": self.energy_coeff,
            "max_freq": self.max_freq,
            "channel_gain": self.channel_gain,
            "max_power": self.max_power,
            "local_count": self.local_count,
            "category_counts": list(self.category_counts),
            "distance_km": self.distance_km,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceProfile":
        return cls(
            id=int(d["id"]),
            energy_coeff=float(d["energy_coeff"]),
            max_freq=float(d["max_freq"]),
            channel_gain=float(d["channel_gain"]),
            max_power=float(d["max_power"]),
            local_count=int(d["local_count"]),
            category_counts=tuple(int(c) for c in d["category_counts"]),
            distance_km=float(d["distance_km"]),
        )


@dataclass(frozen=True)
class Scenario:
    """A device fleet plus the shared system constants."""

    devices: tuple
    bandwidth_total: float   # Hz
    noise_psd: float         # W/Hz
    update_size: float       # bits
    workload_per_sample: float  # cycles
    local_epochs: int
    t_max: float             # s
    delta_max: float
    d_gen_max: int
    categories: int
    curve: CurveParams

    def __post_init__(self):
        if not self.devices:
            raise ConfigError("devices", "scenario needs at least one device")
        if not (0.0 < self.delta_max < 1.0):
            raise ConfigError(
                "delta_max", f"must lie in (0, 1), got {self.delta_max}"
            )
        for name in (
            "bandwidth_total",
            "noise_psd",
            "update_size",
            "workload_per_sample",
            "local_epochs",
            "t_max",
            "categories",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(name, "must be positive")
        if self.d_gen_max < 0:
            raise ConfigError("d_gen_max", "must be >= 0")

    @property
    def device_count(self) -> int:
        return len(self.devices)

    def to_dict(self) -> dict:
        return {
            "devices": [d.to_dict() for d in self.devices],
            "bandwidth_total": self.bandwidth_total,
            "noise_psd": self.noise_psd,
            "update_size": self.update_size,
            "workload_per_sample": self.workload_per_sample,
            "local_epochs": self.local_epochs,
            "t_max": self.t_max,
            "delta_max": self.delta_max,
            "d_gen_max": self.d_gen_max,
            "categories": self.categories,
            "curve": self.curve.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(
            devices=tuple(DeviceProfile.from_dict(x) for x in d["devices"]),
            bandwidth_total=float(d["bandwidth_total"]),
            noise_psd=float(d["noise_psd"]),
            update_size=float(d["update_size"]),
            workload_per_sample=float(d["workload_per_sample"]),
            local_epochs=int(d["local_epochs"]),
            t_max=float(d["t_max"]),
            delta_max=float(d["delta_max"]),
            d_gen_max=int(d["d_gen_max"]),
            categories=int(d["categories"]),
            curve=CurveParams.from_dict(d["curve"]),
        )


@dataclass(frozen=True)
class DeviceAllocation:
    device_id: int
    d_gen: float
    freq: float
    bandwidth: float
    power: float
    eta: float
    category_gen: tuple = ()

    def to_dict(self) -> dict:
        return {
            "device_id": self.device_id,
            "d_gen": self.d_gen,
            "freq": self.freq,
            "bandwidth": self.bandwidth,
            "power": self.power,
            "eta": self.eta,
            "category_gen": list(self.category_gen),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceAllocation":
        return cls(
            device_id=int(d["device_id"]),
            d_gen=float(d["d_gen"]),
            freq=float(d["freq"]),
            bandwidth=float(d["bandwidth"]),
            power=float(d["power"]),
            eta=float(d["eta"]),
            category_gen=tuple(int(c) for c in d.get("category_gen", [])),
        )


@dataclass(frozen=True)
class Allocation:
    devices: tuple

    def to_dict(self) -> dict:
        return {"devices": [d.to_dict() for d in self.devices]}

    @classmethod
    def from_dict(cls, d: dict) -> "Allocation":
        return cls(
            devices=tuple(DeviceAllocation.from_dict(x) for x in d["devices"])
        )


@dataclass(frozen=True)
class PerDeviceCost:
    device_id: int
    e_cmp: float
    e_com: float
    t_cmp: float
    t_com: float


@dataclass(frozen=True)
class RoundMetrics:
    energy_j: float
    latency_s: float
    uplink_bits: float
    per_device: tuple


def compute_energy(
    dev: DeviceProfile, total_data: float, freq: float, scenario: Scenario
) -> float:
    """Single-round local-training energy (J)."""
    if freq <= 0:
        raise InvalidFrequency(f"freq must be positive, got {freq}")
    if freq > dev.max_freq * (1 + 1e-9):
        raise FrequencyExceeded(
            f"freq {freq:.6g} exceeds device {dev.id} max {dev.max_freq:.6g}"
        )
    return (
        scenario.local_epochs
        * dev.energy_coeff
        * scenario.workload_per_sample
        * total_data
        * freq**2
    )


def compute_latency(
    dev: DeviceProfile, total_data: float, freq: float, scenario: Scenario
) -> float:
    """Single-round local-training latency (s)."""
    if freq <= 0:
        raise InvalidFrequency(f"freq must be positive, got {freq}")
    return scenario.local_epochs * scenario.workload_per_sample * total_data / freq


def uplink_rate(bandwidth: float, power: float, gain: float, noise_psd: float) -> float:
    """Achievable uplink rate (bit/s) on an FDMA sub-band."""
    if bandwidth <= 0:
        raise ConfigError("bandwidth", "must be positive")
    if power < 0:
        raise ConfigError("power", "must be >= 0")
    return bandwidth * math.log2(1.0 + gain * power / (noise_psd * bandwidth))


def uplink_cost(
    update_size: float,
    bandwidth: float,
    power: float,
    gain: float,
    noise_psd: float,
) -> tuple[float, float]:
    """(latency_s, energy_j) for shipping one model update uplink."""
    r = uplink_rate(bandwidth, power, gain, noise_psd)
    if r <= 0:
        raise UnreachableServer("uplink rate is zero")
    return update_size / r, update_size * power / r


def path_loss_gain(distance_km: float) -> float:
    """Linear channel power gain at a given server distance (km)."""
    if distance_km <= 0:
        raise ConfigError("distance_km", "must be positive")
    loss_db = 128.1 + 37.6 * math.log10(distance_km)
    return 10.0 ** (-loss_db / 10.0)


def round_metrics(scenario: Scenario, alloc: Allocation) -> RoundMetrics:
    """Aggregate per-device energy/latency costs for one training round."""
    per_device = []
    for dev, a in zip(scenario.devices, alloc.devices):
        total = dev.local_count + a.d_gen
        e_cmp = compute_energy(dev, total, a.freq, scenario)
        t_cmp = compute_latency(dev, total, a.freq, scenario)
        t_com, e_com = uplink_cost(
            scenario.update_size,
            a.bandwidth,
            a.power,
            dev.channel_gain,
            scenario.noise_psd,
        )
        per_device.append(
            PerDeviceCost(
                device_id=dev.id, e_cmp=e_cmp, e_com=e_com, t_cmp=t_cmp, t_com=t_com
            )
        )
    return RoundMetrics(
        energy_j=sum(c.e_cmp + c.e_com for c in per_device),
        latency_s=max(c.t_cmp + c.t_com for c in per_device),
        uplink_bits=scenario.update_size * len(per_device),
        per_device=tuple(per_device),
    )


def dirichlet_partition(
    concentration: float,
    categories: int,
    per_device_total: int,
    device_count: int,
    seed,
) -> np.ndarray:
    """Per-device category counts from Dir(concentration * 1_C) proportions.

    Counts are integers summing exactly to per_device_total for each device
    (largest-remainder rounding, ties to the lowest category index).
    """
    if concentration <= 0:
        raise ConfigError("concentration", "must be positive")
    rng = np.random.default_rng(seed)
    props = rng.dirichlet(np.full(categories, concentration), size=device_count)
    counts = np.empty((device_count, categories), dtype=int)
    for i in range(device_count):
        counts[i] = integerize(props[i] * per_device_total, per_device_total)
    return counts


@dataclass(frozen=True)
class ScenarioConfig:
    """Knobs for randomized scenario generation (defaults: 20-device cell)."""

    devices: int = 20
    bandwidth_total: float = 20e6
    noise_psd: float = 10.0 ** (-20.4)      # -174 dBm/Hz
    update_size: float = 111.7e6            # bits
    workload_per_sample: float = 5e6        # cycles
    local_epochs: int = 1
    t_max: float = 60.0
    delta_max: float = 0.2
    d_gen_max: int = 5000
    categories: int = 10
    local_count: int = 1250
    cell_radius_km: float = 0.4
    min_distance_km: float = 0.01
    p_max_dbm_low: float = 20.0
    p_max_dbm_high: float = 23.0
    f_max_low: float = 1e9
    f_max_high: float = 2e9
    energy_coeff_low: float = 4e-27
    energy_coeff_high: float = 6e-27
    dirichlet_concentration: float = 0.4
    curve: CurveParams = field(
        default_factory=lambda: CurveParams(
            alpha=5.0, beta=0.35, gamma=0.1, zeta=100.0, global_rounds=200
        )
    )

    def validated(self) -> "ScenarioConfig":
        if self.devices < 1:
            raise ConfigError("devices", f"must be >= 1, got {self.devices}")
        positives = (
            "bandwidth_total",
            "noise_psd",
            "update_size",
            "workload_per_sample",
            "local_epochs",
            "t_max",
            "categories",
            "local_count",
            "cell_radius_km",
            "min_distance_km",
            "dirichlet_concentration",
        )
        for name in positives:
            if getattr(self, name) <= 0:
                raise ConfigError(name, "must be positive")
        if not (0.0 < self.delta_max < 1.0):
            raise ConfigError("delta_max", "must lie in (0, 1)")
        if self.d_gen_max < 0:
            raise ConfigError("d_gen_max", "must be >= 0")
        if self.min_distance_km > self.cell_radius_km:
            raise ConfigError(
                "min_distance_km", "must not exceed cell_radius_km"
            )
        for low, high in (
            ("p_max_dbm_low", "p_max_dbm_high"),
            ("f_max_low", "f_max_high"),
            ("energy_coeff_low", "energy_coeff_high"),
        ):
            if getattr(self, low) > getattr(self, high):
                raise ConfigError(low, f"must not exceed {high}")
        return self


def generate_scenario(config: ScenarioConfig, seed) -> Scenario:
    """Draw a random scenario; deterministic given (config, seed)."""
    config = config.validated()
    rng = np.random.default_rng(seed)
    n = config.devices
    # uniform over the annulus area between min distance and cell radius
    distances = np.sqrt(
        rng.uniform(config.min_distance_km**2, config.cell_radius_km**2, size=n)
    )
    p_max = dbm_to_watts(
        rng.uniform(config.p_max_dbm_low, config.p_max_dbm_high, size=n)
    )
    f_max = rng.uniform(config.f_max_low, config.f_max_high, size=n)
    eps = rng.uniform(config.energy_coeff_low, config.energy_coeff_high, size=n)
    counts = dirichlet_partition(
        config.dirichlet_concentration,
        config.categories,
        config.local_count,
        n,
        rng,
    )
    devices = tuple(
        DeviceProfile(
            id=i,
            energy_coeff=float(eps[i]),
            max_freq=float(f_max[i]),
            channel_gain=path_loss_gain(float(distances[i])),
            max_power=float(p_max[i]),
            local_count=config.local_count,
            category_counts=tuple(int(c) for c in counts[i]),
            distance_km=float(distances[i]),
        )
        for i in range(n)
    )
    return Scenario(
        devices=devices,
        bandwidth_total=config.bandwidth_total,
        noise_psd=config.noise_psd,
        update_size=config.update_size,
        workload_per_sample=config.workload_per_sample,
        local_epochs=config.local_epochs,
        t_max=config.t_max,
        delta_max=config.delta_max,
        d_gen_max=config.d_gen_max,
        categories=config.categories,
        curve=config.curve,
    )


def scenario_to_json(scenario: Scenario) -> str:
    return json.dumps(scenario.to_dict(), indent=2) + "\n"


def scenario_from_json(text: str) -> Scenario:
    return Scenario.from_dict(json.loads(text))


def allocation_to_json(alloc: Allocation) -> str:
    return json.dumps(alloc.to_dict(), indent=2) + "\n"


def allocation_from_json(text: str) -> Allocation:
    return Allocation.from_dict(json.loads(text))


def write_device_csv(path_or_buf, devices: Sequence[DeviceProfile]):
    """Device summary table with the canonical header."""
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "id",
                "energy_coeff",
                "max_freq",
                "gain",
                "max_power",
                "local_count",
                "distance_km",
            ]
        )
        for d in devices:
            writer.writerow(
                [
                    d.id,
                    repr(d.energy_coeff),
                    repr(d.max_freq),
                    repr(d.channel_gain),
                    repr(d.max_power),
                    d.local_count,
                    repr(d.distance_km),
                ]
            )
    finally:
        if own:
            fh.close()


def device_csv_string(devices: Sequence[DeviceProfile]) -> str:
    buf = io.StringIO()
    write_device_csv(buf, devices)
    return buf.getvalue()
