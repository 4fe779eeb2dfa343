"""Discrete choice machinery: MNL, two-level nested logit, logsums, path size.

All probability computations are overflow-guarded by max-shifting inside the
log-sum-exp evaluations.  Utilities are systematic (V); the scale parameter
multiplies V before exponentiation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Nest:
    """One nest of a two-level tree. coef is the nest (logsum) parameter."""

    coef: float
    members: tuple

    def __post_init__(self):
        if not (0.0 < self.coef <= 1.0):
            raise ValueError("nest coefficient must be in (0, 1]")


@dataclass
class ChoiceModel:
    """Alternatives with systematic utilities, a scale, and an optional nest tree.

    With nests=None this is plain MNL: p = softmax(scale * V).  With nests the
    standard nested-logit closed form applies; every alternative must belong
    to exactly one nest.
    """

    alternatives: list
    utilities: np.ndarray
    scale: float = 1.0
    nests: list = None

    def __post_init__(self):
        self.utilities = np.asarray(self.utilities, dtype=float)
        if len(self.alternatives) == 0:
            raise ValueError("empty choice set")
        if len(self.alternatives) != len(self.utilities):
            raise ValueError("alternatives and utilities differ in length")
        if not np.all(np.isfinite(self.utilities)):
            raise ValueError("utilities must be finite (NaN or inf found)")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.nests is not None:
            seen = sorted(i for n in self.nests for i in n.members)
            if seen != list(range(len(self.alternatives))):
                raise ValueError("nests must partition the alternatives")


def _lse(x: np.ndarray) -> float:
    m = float(np.max(x))
    return m + math.log(float(np.sum(np.exp(x - m))))


def probabilities(model: ChoiceModel) -> np.ndarray:
    """Choice probabilities; nested-logit closed form when nests are present."""
    v = model.scale * model.utilities
    if model.nests is None:
        m = float(np.max(v))
        e = np.exp(v - m)
        return e / e.sum()
    p = np.zeros(len(v))
    gammas = []
    inner = []
    for nest in model.nests:
        idx = np.array(nest.members)
        ls = _lse(v[idx] / nest.coef)
        inner.append((idx, ls, nest.coef))
        gammas.append(nest.coef * ls)
    gammas = np.array(gammas)
    gm = float(np.max(gammas))
    nest_p = np.exp(gammas - gm)
    nest_p /= nest_p.sum()
    for (idx, ls, coef), np_ in zip(inner, nest_p):
        within = np.exp(v[idx] / coef - ls)
        p[idx] = np_ * within
    return p


def logsum(model: ChoiceModel) -> float:
    """Expected maximum utility, (1/scale) * ln sum exp(scale * V).

    For nested models the top-level inclusive value is returned.
    """
    v = model.scale * model.utilities
    if model.nests is None:
        return _lse(v) / model.scale
    gammas = np.array([n.coef * _lse(v[np.array(n.members)] / n.coef)
                       for n in model.nests])
    return _lse(gammas) / model.scale


def choose(model: ChoiceModel, rng: np.random.Generator):
    """Sample one alternative; returns (alternative, probability vector)."""
    p = probabilities(model)
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(p), u, side="right"))
    idx = min(idx, len(p) - 1)
    return model.alternatives[idx], p


def mnl_choose(model: ChoiceModel, rng: np.random.Generator):
    return choose(model, rng)


# ---------------------------------------------------------------------------
# path size logit
# ---------------------------------------------------------------------------

def path_sizes(paths, link_length=None) -> np.ndarray:
    """Path-size factor per path: sum over links of (l_a / L_i) / N_a where
    N_a counts the paths in the set using link a.  A path sharing no link with
    any other gets exactly 1.

    link_length maps link id to km; without it, links of a path are assumed
    equal length (true for the grid generator).
    """
    if not paths:
        raise ValueError("empty path set")
    use_count = {}
    for p in paths:
        for lid in p.link_ids:
            use_count[lid] = use_count.get(lid, 0) + 1
    sizes = []
    for p in paths:
        if p.length_km <= 0:
            raise ValueError("path with nonpositive length")
        links = list(p.link_ids)
        if link_length is None:
            lengths = [p.length_km / len(links)] * len(links)
        else:
            lengths = [link_length[lid] for lid in links]
        sizes.append(sum(l / p.length_km / use_count[lid]
                         for l, lid in zip(lengths, links)))
    return np.array(sizes)


def path_size_logit(paths, utilities, scale: float = 1.0, ps_coef: float = 1.0,
                    rng: np.random.Generator = None, link_length=None):
    """MNL over paths with ln(path size) correction; returns (index, probs)."""
    ps = path_sizes(paths, link_length)
    v = np.asarray(utilities, dtype=float) + ps_coef * np.log(ps)
    model = ChoiceModel(alternatives=list(range(len(paths))), utilities=v, scale=scale)
    if rng is None:
        return None, probabilities(model)
    return choose(model, rng)
