"""Per-bit data-movement energy along interconnect paths.

A path is source endpoint -> N switch hops -> destination endpoint and
its per-bit energy is the sum of those stage costs. Traffic classes map
to scenario mixes (weights over the five standard path scenarios), and
a ledger of bits per class converts to joules for an electronic
baseline and a photonic alternative side by side.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .errors import ValidationError, require
from .parallel import TrafficLedger

ELECTRONIC = "electronic"
PHOTONIC = "photonic"
TECHNOLOGIES = (ELECTRONIC, PHOTONIC)

INTRA_TRAY = "intra_tray"
INTRA_RACK = "intra_rack"
INTER_RACK = "inter_rack"
OFFLOAD_TRAY = "offload_tray"
OFFLOAD_EXTERNAL = "offload_external"
SCENARIOS = (INTRA_TRAY, INTRA_RACK, INTER_RACK, OFFLOAD_TRAY, OFFLOAD_EXTERNAL)

TRAFFIC_CLASSES = ("tp_comm", "pp_comm", "dp_comm", "offload_tray",
                   "offload_external")

# endpoint and switch kinds
ADAPTER = "adapter"
TRANSCEIVER = "photonic_transceiver"
TRAY_LINK = "tray_link"
NO_ENDPOINT = "none"
ENDPOINT_KINDS = (ADAPTER, TRANSCEIVER, TRAY_LINK, NO_ENDPOINT)

EXTERNAL_SWITCH_RANGE = (4, 12)


class PathRangeWarning(UserWarning):
    """A path override stepped outside its documented range."""


@dataclass(frozen=True)
class EnergyParams:
    """Per-bit energies (pJ/bit) for each path stage, by technology."""

    adapter: float = 65.0
    switch: float = 35.0
    nvlink_intra_tray: float = 50.0
    photonic_transceiver: float = 5.0
    photonic_switch: float = 25.0
    photonic_intra_tray: float = 10.0

    def __post_init__(self):
        for name in ("adapter", "switch", "nvlink_intra_tray",
                     "photonic_transceiver", "photonic_switch",
                     "photonic_intra_tray"):
            require(getattr(self, name) >= 0, f"{name} must be >= 0")

    def endpoint_cost(self, kind: str, technology: str) -> float:
        if kind == NO_ENDPOINT:
            return 0.0
        if kind == ADAPTER:
            return self.adapter
        if kind == TRANSCEIVER:
            return self.photonic_transceiver
        if kind == TRAY_LINK:
            return (self.photonic_intra_tray if technology == PHOTONIC
                    else self.nvlink_intra_tray)
        raise ValidationError(f"unknown endpoint kind {kind!r}")

    def switch_cost(self, technology: str) -> float:
        return self.photonic_switch if technology == PHOTONIC else self.switch


@dataclass(frozen=True)
class PathProfile:
    """One source -> switches -> destination path."""

    scenario: str
    technology: str
    source: str
    dest: str
    switch_count: int = 0

    def __post_init__(self):
        require(self.scenario in SCENARIOS,
                f"scenario must be one of {SCENARIOS}")
        require(self.technology in TECHNOLOGIES,
                f"technology must be one of {TECHNOLOGIES}")
        require(self.source in ENDPOINT_KINDS, "bad source endpoint kind")
        require(self.dest in ENDPOINT_KINDS, "bad dest endpoint kind")
        require(self.switch_count >= 0, "switch_count must be >= 0")


def path_energy(profile: PathProfile, params: EnergyParams) -> float:
    """pJ per bit along the path: source + N * switch + destination."""
    return (params.endpoint_cost(profile.source, profile.technology)
            + profile.switch_count * params.switch_cost(profile.technology)
            + params.endpoint_cost(profile.dest, profile.technology))


def scenario_profile(scenario: str, technology: str,
                     switch_count: int | None = None) -> PathProfile:
    """Default path shape for one scenario and technology.

    Intra-tray traffic rides the direct link with no adapters or
    switches. Rack-level scenarios traverse adapters (electronic) or
    transceivers (photonic) with 1 switch hop inside a rack and 3
    between racks. Tray offload crosses adapters only in the electronic
    world; photonic offload of either class reaches the shared fabric
    through its single-stage switch. External electronic offload
    defaults to 8 switch hops and is documented for 4 to 12; overrides
    outside that range warn instead of failing.
    """
    require(scenario in SCENARIOS, f"scenario must be one of {SCENARIOS}")
    require(technology in TECHNOLOGIES,
            f"technology must be one of {TECHNOLOGIES}")
    photonic = technology == PHOTONIC

    if scenario == INTRA_TRAY:
        n = 0 if switch_count is None else switch_count
        if n != 0:
            warnings.warn("intra_tray paths have no switch hops; override "
                          f"of {n} kept", PathRangeWarning, stacklevel=2)
        return PathProfile(scenario, technology, TRAY_LINK, NO_ENDPOINT, n)

    end = TRANSCEIVER if photonic else ADAPTER
    if scenario == INTRA_RACK:
        default_n = 1
    elif scenario == INTER_RACK:
        default_n = 3
    elif scenario == OFFLOAD_TRAY:
        default_n = 1 if photonic else 0
    else:  # OFFLOAD_EXTERNAL
        default_n = 1 if photonic else 8
    n = default_n if switch_count is None else switch_count

    if scenario == OFFLOAD_EXTERNAL and not photonic:
        lo, hi = EXTERNAL_SWITCH_RANGE
        if not lo <= n <= hi:
            warnings.warn(
                f"external offload switch count {n} outside documented "
                f"range [{lo}, {hi}]", PathRangeWarning, stacklevel=2)
    return PathProfile(scenario, technology, end, end, n)


@dataclass(frozen=True)
class ScenarioMix:
    """Per traffic class, probability weights over the five scenarios."""

    weights: dict[str, dict[str, float]]

    def __post_init__(self):
        for cls in TRAFFIC_CLASSES:
            require(cls in self.weights, f"missing traffic class {cls!r}")
            mix = self.weights[cls]
            total = 0.0
            for scenario, w in mix.items():
                require(scenario in SCENARIOS,
                        f"unknown scenario {scenario!r} for class {cls!r}")
                require(w >= 0, f"negative weight for {cls}/{scenario}")
                total += w
            require(abs(total - 1.0) <= 1e-9,
                    f"weights for class {cls!r} sum to {total}, expected 1")

    @classmethod
    def default(cls) -> "ScenarioMix":
        """Point masses: tp in tray, pp in rack, dp across racks,
        offload classes on their own scenarios."""
        return cls(weights={
            "tp_comm": {INTRA_TRAY: 1.0},
            "pp_comm": {INTRA_RACK: 1.0},
            "dp_comm": {INTER_RACK: 1.0},
            "offload_tray": {OFFLOAD_TRAY: 1.0},
            "offload_external": {OFFLOAD_EXTERNAL: 1.0},
        })


def expected_per_bit(mix: ScenarioMix, traffic_class: str,
                     params: EnergyParams, technology: str,
                     switch_overrides: dict[str, int] | None = None) -> float:
    """Mix-weighted pJ/bit for one traffic class and technology."""
    require(traffic_class in TRAFFIC_CLASSES,
            f"traffic_class must be one of {TRAFFIC_CLASSES}")
    overrides = switch_overrides or {}
    total = 0.0
    for scenario, weight in mix.weights[traffic_class].items():
        profile = scenario_profile(scenario, technology,
                                   overrides.get(scenario))
        total += weight * path_energy(profile, params)
    return total


@dataclass(frozen=True)
class ClassEnergy:
    """Energy of one traffic class under baseline and photonic pricing."""

    traffic_class: str
    bits: float
    baseline_pj_per_bit: float
    photonic_pj_per_bit: float
    baseline_joules: float
    photonic_joules: float

    @property
    def percent_of_baseline(self) -> float:
        if self.baseline_pj_per_bit == 0:
            return 0.0
        return 100.0 * self.photonic_pj_per_bit / self.baseline_pj_per_bit

    @property
    def savings_fraction(self) -> float:
        if self.baseline_pj_per_bit == 0:
            return 0.0
        return 1.0 - self.photonic_pj_per_bit / self.baseline_pj_per_bit


def workload_energy(ledger: TrafficLedger, mix: ScenarioMix,
                    params_baseline: EnergyParams,
                    params_photonic: EnergyParams | None = None,
                    switch_overrides: dict[str, int] | None = None,
                    ) -> list[ClassEnergy]:
    """Joules per traffic class for electronic baseline vs photonic.

    Both columns price the same ledger bits; joules = bits * pJ/bit *
    1e-12.
    """
    params_photonic = params_photonic or params_baseline
    bits_by_class = ledger.as_dict()
    rows = []
    for cls in TRAFFIC_CLASSES:
        bits = bits_by_class[cls]
        base = expected_per_bit(mix, cls, params_baseline, ELECTRONIC,
                                switch_overrides)
        photo = expected_per_bit(mix, cls, params_photonic, PHOTONIC,
                                 switch_overrides)
        rows.append(ClassEnergy(
            traffic_class=cls,
            bits=bits,
            baseline_pj_per_bit=base,
            photonic_pj_per_bit=photo,
            baseline_joules=bits * base * 1e-12,
            photonic_joules=bits * photo * 1e-12,
        ))
    return rows
