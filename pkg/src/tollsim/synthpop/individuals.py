"""Individual and household synthesis (plumbing around income and VOT draws)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tollsim.rng import substream

# lognormal sigma for a coefficient of variation of 0.2
VOT_CV = 0.2
_VOT_SIGMA = math.sqrt(math.log(1.0 + VOT_CV ** 2))


@dataclass
class Individual:
    id: int
    household_id: int
    home_zone: int
    income: float            # annual household income, $
    vot: float               # value of time, $/h
    work_zone: int = -1      # -1 means no fixed work location
    edu_zone: int = -1
    income_group: int = 0    # quartile index 0..3

    def __post_init__(self):
        if self.vot <= 0 or self.income <= 0:
            raise ValueError("income and VOT must be positive")


@dataclass
class IncomeSpec:
    """Income groups with medians; VOT medians scale with the income medians."""

    group_medians: tuple = (32_000.0, 58_000.0, 88_000.0, 132_000.0)
    group_shares: tuple = (0.25, 0.25, 0.25, 0.25)
    vot_share_of_wage: float = 0.5   # VOT median = share * income / 2080 h
    income_sigma: float = 0.25       # lognormal spread around the group median

    def vot_median(self, group: int) -> float:
        return self.vot_share_of_wage * self.group_medians[group] / 2080.0


def draw_vot(median: float, rng: np.random.Generator) -> float:
    """Lognormal VOT with the given median and a CV of 0.2."""
    return float(median * math.exp(rng.normal(0.0, _VOT_SIGMA)))


def generate_individuals(zone_populations: dict, spec: IncomeSpec, seed: int,
                         work_weights: dict = None, edu_weights: dict = None,
                         worker_share: float = 0.62, student_share: float = 0.10,
                         household_size_probs=(0.30, 0.42, 0.28)) -> list:
    """Synthesize individuals grouped into households.

    zone_populations maps home zone to person count.  Income group and income
    are household-level; each member draws an individual VOT from the group's
    lognormal.  A share of individuals gets a fixed work (or education) zone
    sampled from the supplied attraction weights.
    """
    if not zone_populations or any(v <= 0 for v in zone_populations.values()):
        raise ValueError("zone populations must be positive")
    rng = substream(seed, "individuals")
    w_zones, w_p = _weights(work_weights)
    e_zones, e_p = _weights(edu_weights if edu_weights is not None else work_weights)
    out = []
    hh_id = 0
    hh_probs = np.array(household_size_probs, dtype=float)
    hh_probs /= hh_probs.sum()
    for zone in sorted(zone_populations):
        remaining = int(zone_populations[zone])
        while remaining > 0:
            size = min(int(rng.choice(len(hh_probs), p=hh_probs)) + 1, remaining)
            group = int(rng.choice(len(spec.group_shares), p=np.asarray(spec.group_shares)))
            income = float(spec.group_medians[group] *
                           math.exp(rng.normal(0.0, spec.income_sigma)))
            for _ in range(size):
                vot = draw_vot(spec.vot_median(group), rng)
                work = -1
                edu = -1
                u = rng.random()
                if u < worker_share and w_zones is not None:
                    work = int(w_zones[rng.choice(len(w_zones), p=w_p)])
                elif u < worker_share + student_share and e_zones is not None:
                    edu = int(e_zones[rng.choice(len(e_zones), p=e_p)])
                out.append(Individual(id=len(out), household_id=hh_id,
                                      home_zone=zone, income=income, vot=vot,
                                      work_zone=work, edu_zone=edu,
                                      income_group=group))
            hh_id += 1
            remaining -= size
    return out


def _weights(table):
    if not table:
        return None, None
    zones = sorted(table)
    p = np.array([max(table[z], 0.0) for z in zones], dtype=float)
    if p.sum() <= 0:
        return None, None
    return zones, p / p.sum()
