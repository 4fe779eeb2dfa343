"""Freight fleet generation (IPF over type x industry margins) and allocation
of vehicles to establishments in proportion to employment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VEHICLE_TYPES = ("LGV", "HGV", "VHGV")
# passenger-car-unit weights by class; cars are 1.0
PCU = {"car": 1.0, "LGV": 1.5, "HGV": 2.0, "VHGV": 2.5}
DEFAULT_CAPACITY_KG = {"LGV": 800.0, "HGV": 5000.0, "VHGV": 15000.0}


@dataclass
class Vehicle:
    id: int
    owner: int              # establishment id
    body_type: str          # LGV | HGV | VHGV
    capacity_kg: float
    driver_type: str = "for_hire"   # or owner_operator
    parking_zone: int = -1


def largest_remainder(values: np.ndarray, total: int = None) -> np.ndarray:
    """Integerize nonnegative values preserving the (rounded) grand total.

    Remainder units go to the largest fractional parts; ties break by index
    order for determinism.
    """
    values = np.asarray(values, dtype=float)
    if np.any(values < -1e-9):
        raise ValueError("largest_remainder expects nonnegative values")
    values = np.maximum(values, 0.0)
    if total is None:
        total = int(round(values.sum()))
    floors = np.floor(values + 1e-9).astype(int)
    short = total - int(floors.sum())
    if short < 0:
        order = np.lexsort((np.arange(len(values)), values - floors))
        out = floors.copy()
        while short < 0:
            progressed = False
            for idx in order:
                if short == 0:
                    break
                if out[idx] > 0:
                    out[idx] -= 1
                    short += 1
                    progressed = True
            if not progressed:
                raise ValueError("cannot reduce counts to the requested total")
        return out
    frac = values - floors
    order = np.lexsort((np.arange(len(values)), -frac))
    out = floors.copy()
    while short > 0:
        for idx in order[:min(short, len(order))]:
            out[idx] += 1
        short -= min(short, len(order))
    return out


def generate_fleet(type_totals: dict, industry_totals: dict, seed_matrix=None,
                   rescale: bool = False, tol: float = 1e-3,
                   max_iter: int = 500, integerize: bool = True) -> np.ndarray:
    """IPF cell counts of vehicles by (type, industry).

    Margins must agree in grand total; pass rescale=True to scale the industry
    margins onto the type grand total first (the growth-rate adjustment).
    Returns an integer matrix whose grand total is exact and whose margins
    match targets within tol (relative) before integerization; pass
    integerize=False for the raw fitted matrix.
    """
    types = list(type_totals)
    industries = list(industry_totals)
    rows = np.array([float(type_totals[t]) for t in types])
    cols = np.array([float(industry_totals[i]) for i in industries])
    if np.any(rows < 0) or np.any(cols < 0):
        raise ValueError("margins must be nonnegative")
    if rows.sum() <= 0 or cols.sum() <= 0:
        raise ValueError("margins must have positive grand totals")
    if abs(rows.sum() - cols.sum()) > 1e-9 * max(rows.sum(), cols.sum()):
        if not rescale:
            raise ValueError("margin grand totals differ; pass rescale=True")
        cols = cols * (rows.sum() / cols.sum())
    for r, lbl in ((rows, "type"), (cols, "industry")):
        if np.any(r == 0) and r.sum() > 0:
            pass  # zero margins allowed; their cells stay zero
    m = np.ones((len(rows), len(cols))) if seed_matrix is None \
        else np.asarray(seed_matrix, dtype=float).copy()
    if m.shape != (len(rows), len(cols)):
        raise ValueError("seed matrix shape mismatch")
    for a in range(len(rows)):
        if rows[a] > 0 and m[a].sum() == 0:
            raise ValueError("zero seed row with nonzero margin")
    for bcol in range(len(cols)):
        if cols[bcol] > 0 and m[:, bcol].sum() == 0:
            raise ValueError("zero seed column with nonzero margin")

    for _ in range(max_iter):
        rs = m.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            m *= np.where(rs > 0, rows / np.where(rs > 0, rs, 1), 0.0)[:, None]
        cs = m.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            m *= np.where(cs > 0, cols / np.where(cs > 0, cs, 1), 0.0)[None, :]
        rerr = np.max(np.abs(m.sum(axis=1) - rows) / np.maximum(rows, 1e-12))
        cerr = np.max(np.abs(m.sum(axis=0) - cols) / np.maximum(cols, 1e-12))
        if max(rerr, cerr) < tol:
            break
    else:
        raise RuntimeError("IPF did not converge within the iteration cap")

    if not integerize:
        return m
    flat = largest_remainder(m.ravel(), total=int(round(rows.sum())))
    return flat.reshape(m.shape)


def allocate_vehicles(establishments, z_split: dict, n_by_type_industry,
                      types=VEHICLE_TYPES, industries=None,
                      capacity_kg=None) -> list:
    """Distribute the IPF vehicle totals to establishments.

    z_split[(function, industry, type)] gives the share of industry-type
    vehicles owned by each function type (shares sum to 1 over functions).
    Within an (industry, function) group the count varies linearly with
    employment and is integerized by largest remainder.  One driver per
    vehicle; the driver is an owner operator when the establishment has a
    single employee.
    """
    if industries is None:
        industries = sorted({m.industry for m in establishments})
    capacity_kg = capacity_kg or DEFAULT_CAPACITY_KG
    n_by_type_industry = np.asarray(n_by_type_industry)
    functions = sorted({f for (f, _, _) in z_split})

    groups = {}
    for m in establishments:
        groups.setdefault((m.industry, m.function), []).append(m)

    vehicles = []
    for ti, t in enumerate(types):
        for ii, ind in enumerate(industries):
            target_iv = int(n_by_type_industry[ti, ii])
            if target_iv == 0:
                continue
            shares = np.array([z_split.get((f, ind, t), 0.0) for f in functions])
            if shares.sum() <= 0:
                raise ValueError(f"no function split for industry {ind}, type {t}")
            if abs(shares.sum() - 1.0) > 1e-6:
                raise ValueError("function split shares must sum to 1")
            per_f = largest_remainder(shares * target_iv, total=target_iv)
            for fi, f in enumerate(functions):
                target = int(per_f[fi])
                if target == 0:
                    continue
                members = sorted(groups.get((ind, f), []), key=lambda m: m.id)
                total_emp = sum(m.employment for m in members)
                if total_emp == 0:
                    raise ValueError(
                        f"vehicle target {target} for ({ind}, {f}, {t}) but the "
                        "group has no employment")
                weights = np.array([m.employment / total_emp for m in members])
                counts = largest_remainder(weights * target, total=target)
                for m, n in zip(members, counts):
                    for _ in range(int(n)):
                        vehicles.append(Vehicle(
                            id=len(vehicles), owner=m.id, body_type=t,
                            capacity_kg=capacity_kg[t],
                            driver_type="for_hire" if m.employment > 1
                            else "owner_operator",
                            parking_zone=m.zone))
                        m.fleet.append(vehicles[-1].id)
    for m in establishments:
        m.is_carrier = len(m.fleet) > 0
    return vehicles
