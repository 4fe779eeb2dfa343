"""Business establishment synthesis.

Five-stage pipeline over zip-level aggregates: sample establishments from
count tables, solve the industry-to-property mapping (minimum-cardinality
binary cover), estimate floor areas (alternating nonnegative least squares
and per-zone allocation shares), readjust areas to fit building stock, and
assign establishments to buildings (greedy plus pairwise swaps).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from tollsim.rng import substream


@dataclass(frozen=True)
class Building:
    id: int
    zip_zone: int
    taz_zone: int
    property_type: str
    floor_area_m2: float

    def __post_init__(self):
        if self.floor_area_m2 <= 0:
            raise ValueError("building floor area must be positive")


@dataclass
class Establishment:
    id: int
    zip_zone: int
    industry: str
    employment: int
    zone: int = -1          # TAZ, set when housed in a building
    function: str = ""
    floor_area_m2: float = 0.0
    building_id: int = -1
    fleet: list = field(default_factory=list)
    is_shipper: bool = False
    is_carrier: bool = False
    is_receiver: bool = False

    def __post_init__(self):
        if self.employment < 1:
            raise ValueError("establishment employment must be >= 1")


@dataclass
class AggregateEstCounts:
    """Rows of (zip_zone, industry, (size_lo, size_hi), count)."""

    rows: list

    def industries(self):
        return sorted({r[1] for r in self.rows})

    def zips(self):
        return sorted({r[0] for r in self.rows})


def sample_establishments(counts: AggregateEstCounts, seed: int):
    """One establishment per counted unit, employment uniform in its class."""
    if not counts.rows or all(r[3] == 0 for r in counts.rows):
        raise ValueError("empty establishment counts table")
    rng = substream(seed, "sample_establishments")
    out = []
    for zip_zone, industry, (lo, hi), count in sorted(counts.rows):
        if count < 0:
            raise ValueError("negative count")
        if lo > hi or lo < 1:
            raise ValueError("size class bounds must satisfy 1 <= lo <= hi")
        for _ in range(count):
            emp = int(rng.integers(lo, hi + 1))
            out.append(Establishment(id=len(out), zip_zone=zip_zone,
                                     industry=industry, employment=emp))
    return out


# ---------------------------------------------------------------------------
# industry-to-property mapping (minimum-cardinality cover, exact B&B)
# ---------------------------------------------------------------------------

def solve_mapping(a: np.ndarray, b: np.ndarray, forbidden=frozenset()):
    """Minimal binary mapping x[i, j] between industries and property types.

    a[i, k] marks industry i present in zip k; b[j, k] marks property j
    present in zip k.  Constraints: every present industry maps to at least
    one property, every present property receives at least one industry, and
    every (industry, zip) pair can be housed locally, i.e. some mapped
    property exists in that zip.  Objective: minimize the number of ones.
    Solved exactly by branch and bound on unsatisfied constraints with a
    greedy warm start.
    """
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    I, K = a.shape
    J = b.shape[0]
    if b.shape[1] != K:
        raise ValueError("a and b must share the zip dimension")
    forbidden = {(int(i), int(j)) for i, j in forbidden}
    allowed = [[j for j in range(J) if (i, j) not in forbidden] for i in range(I)]

    constraints = []
    for i in range(I):
        if a[i].any():
            opts = frozenset((i, j) for j in allowed[i])
            if not opts:
                raise ValueError(f"industry {i} has no permitted property type")
            constraints.append(opts)
    for j in range(J):
        if b[j].any():
            opts = frozenset((i, j) for i in range(I) if j in allowed[i])
            if not opts:
                raise ValueError(f"property {j} admits no industry")
            constraints.append(opts)
    for i in range(I):
        for k in range(K):
            if a[i, k]:
                opts = frozenset((i, j) for j in allowed[i] if b[j, k])
                if not opts:
                    raise ValueError(
                        f"infeasible: industry {i} in zip {k} has no permitted "
                        "property type present there")
                constraints.append(opts)

    # drop dominated duplicates
    constraints = sorted(set(constraints), key=lambda s: (len(s), sorted(s)))

    def unsatisfied(chosen):
        return [c for c in constraints if not (c & chosen)]

    # greedy warm start
    chosen = set()
    while True:
        unsat = unsatisfied(chosen)
        if not unsat:
            break
        counts = {}
        for c in unsat:
            for p in c:
                counts[p] = counts.get(p, 0) + 1
        best_pair = min(counts, key=lambda p: (-counts[p], p))
        chosen.add(best_pair)
    best = set(chosen)

    def lower_bound(unsat):
        rows = {next(iter(c))[0] for c in unsat if len({p[0] for p in c}) == 1}
        cols = {next(iter(c))[1] for c in unsat if len({p[1] for p in c}) == 1}
        return max(len(rows), len(cols), 1 if unsat else 0)

    def search(chosen, unsat):
        nonlocal best
        if not unsat:
            if len(chosen) < len(best):
                best = set(chosen)
            return
        if len(chosen) + lower_bound(unsat) >= len(best):
            return
        target = min(unsat, key=lambda c: (len(c), sorted(c)))
        for pair in sorted(target):
            chosen.add(pair)
            search(chosen, [c for c in unsat if pair not in c])
            chosen.discard(pair)

    search(set(), list(constraints))

    x = np.zeros((I, J), dtype=int)
    for i, j in best:
        x[i, j] = 1
    return x


# ---------------------------------------------------------------------------
# floor area model (alternating NNLS / per-zone share allocation)
# ---------------------------------------------------------------------------

@dataclass
class FloorModel:
    industries: list
    zips: list
    properties: list
    c: np.ndarray       # per-industry m2/employee component
    d: np.ndarray       # per-zip m2/employee component
    p: np.ndarray       # [I, K] m2 per establishment constant
    q: np.ndarray       # [I, J, K] share of industry-zone floor to property
    objective: float

    def rate(self, i, k):
        return self.c[i] + self.d[k]

    def floor_area(self, industry_idx: int, zip_idx: int, employment: int) -> float:
        """Estimated establishment floor area r_ik * employees + p_ik."""
        return self.rate(industry_idx, zip_idx) * employment + self.p[industry_idx, zip_idx]


def _project_simplex(v):
    """Euclidean projection of v onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, len(v) + 1) > (css - 1))[0]
    if len(rho) == 0:
        out = np.zeros_like(v)
        out[int(np.argmax(v))] = 1.0
        return out
    rho = rho[-1]
    theta = (css[rho] - 1.0) / (rho + 1)
    return np.maximum(v - theta, 0.0)


def estimate_floor_areas(establishments, buildings, x, industries, properties,
                         zips, max_iter: int = 10_000, n_starts: int = 8,
                         seed: int = 0, tol: float = 1e-10) -> FloorModel:
    """Fit the floor-area model by alternating optimization with multi-start.

    Given allocation shares q, the (c, d, p) step is a nonnegative least
    squares problem; given (c, d, p), the q step is solved per zip by exact
    cyclic simplex-projected coordinate descent.  Raises if the alternation
    fails to converge within max_iter sweeps for every start.
    """
    I, J, K = len(industries), len(properties), len(zips)
    ind_idx = {s: i for i, s in enumerate(industries)}
    zip_idx = {z: k for k, z in enumerate(zips)}
    prop_idx = {s: j for j, s in enumerate(properties)}
    x = np.asarray(x, dtype=int)

    NE = np.zeros((I, K))
    NT = np.zeros((I, K))
    for m in establishments:
        i, k = ind_idx[m.industry], zip_idx[m.zip_zone]
        NE[i, k] += m.employment
        NT[i, k] += 1
    FB = np.zeros((J, K))
    for bld in buildings:
        FB[prop_idx[bld.property_type], zip_idx[bld.zip_zone]] += bld.floor_area_m2

    active = NT > 0
    permitted = [np.nonzero(x[i])[0] for i in range(I)]
    for i in range(I):
        if active[i].any() and len(permitted[i]) == 0:
            raise ValueError(f"industry {industries[i]} maps to no property type")

    # vars: c (I), d (K), p restricted to active cells
    p_cells = [(i, k) for i in range(I) for k in range(K) if active[i, k]]
    p_pos = {cell: n for n, cell in enumerate(p_cells)}

    def cdp_step(q):
        rows = []
        targets = []
        for j in range(J):
            for k in range(K):
                coef = np.zeros(I + K + len(p_cells))
                any_term = False
                for i in range(I):
                    if not active[i, k] or x[i, j] == 0:
                        continue
                    w = q[i, j, k]
                    if w == 0:
                        continue
                    coef[i] += w * NE[i, k]
                    coef[I + k] += w * NE[i, k]
                    coef[I + K + p_pos[(i, k)]] += w * NT[i, k]
                    any_term = True
                if any_term or FB[j, k] > 0:
                    rows.append(coef)
                    targets.append(FB[j, k])
        if not rows:
            return np.zeros(I), np.zeros(K), np.zeros((I, K))
        A = np.vstack(rows)
        y = np.array(targets)
        sol, _ = nnls(A, y, maxiter=10 * A.shape[1] + 200)
        c = sol[:I]
        d = sol[I:I + K]
        p = np.zeros((I, K))
        for (i, k), n in p_pos.items():
            p[i, k] = sol[I + K + n]
        return c, d, p

    def objective(q, c, d, p):
        f = (c[:, None] + d[None, :]) * NE + p * NT
        pred = np.einsum("ik,ijk->jk", f * active, q)
        return float(np.sum((pred - FB) ** 2))

    def q_step(q, c, d, p, sweeps=50):
        f = (c[:, None] + d[None, :]) * NE + p * NT
        for k in range(K):
            acts = [i for i in range(I) if active[i, k]]
            if not acts:
                continue
            for _ in range(sweeps):
                moved = 0.0
                for i in acts:
                    js = permitted[i]
                    if len(js) == 0:
                        continue
                    if f[i, k] <= 0:
                        continue
                    resid = FB[:, k].copy()
                    for i2 in acts:
                        if i2 != i:
                            resid -= f[i2, k] * q[i2, :, k]
                    new_row = np.zeros(J)
                    new_row[js] = _project_simplex(resid[js] / f[i, k])
                    moved += float(np.abs(new_row - q[i, :, k]).sum())
                    q[i, :, k] = new_row
                if moved < 1e-12:
                    break
        return q

    best = None
    for start in range(n_starts):
        rng = substream(seed, "floor_model", start)
        q = np.zeros((I, J, K))
        for i in range(I):
            js = permitted[i]
            if len(js) == 0:
                continue
            for k in range(K):
                if not active[i, k]:
                    continue
                if start == 0:
                    q[i, js, k] = 1.0 / len(js)
                else:
                    q[i, js, k] = rng.dirichlet(np.ones(len(js)))
        prev_obj = np.inf
        converged = False
        for sweep in range(max_iter):
            c, d, p = cdp_step(q)
            q = q_step(q, c, d, p)
            obj = objective(q, c, d, p)
            if prev_obj - obj < tol * max(1.0, abs(prev_obj)):
                converged = True
                break
            prev_obj = obj
        if not converged:
            raise RuntimeError("floor model alternation did not converge")
        if best is None or obj < best.objective:
            best = FloorModel(industries=list(industries), zips=list(zips),
                              properties=list(properties), c=c, d=d, p=p, q=q,
                              objective=obj)
    return best


def readjust_floor_areas(establishments, buildings, floor_model) -> dict:
    """Scale estimated floor areas per zip so the building stock can hold them.

    Returns {establishment_id: adjusted floor area}.  This is the aggregate
    fit step applied before building assignment.
    """
    ind_idx = {s: i for i, s in enumerate(floor_model.industries)}
    zip_idx = {z: k for k, z in enumerate(floor_model.zips)}
    est_area = {}
    total_est = {}
    for m in establishments:
        f = floor_model.floor_area(ind_idx[m.industry], zip_idx[m.zip_zone],
                                   m.employment)
        est_area[m.id] = max(f, 1.0)
        total_est[m.zip_zone] = total_est.get(m.zip_zone, 0.0) + est_area[m.id]
    total_bld = {}
    for b in buildings:
        total_bld[b.zip_zone] = total_bld.get(b.zip_zone, 0.0) + b.floor_area_m2
    for m in establishments:
        cap = total_bld.get(m.zip_zone, 0.0)
        need = total_est[m.zip_zone]
        if need > cap and cap > 0:
            est_area[m.id] *= cap / need
    return est_area


def assign_to_buildings(establishments, buildings, x, industries, properties,
                        floor_areas: dict, max_sweeps: int = 100):
    """Assign each establishment to one permitted building in its zip.

    Greedy construction followed by improvement sweeps of single moves and
    pairwise swaps, minimizing the sum over buildings of squared (assigned
    area - building area) gaps.  Three construction orders are tried and the
    best local optimum kept.  Returns {establishment_id: building_id}.
    """
    ind_idx = {s: i for i, s in enumerate(industries)}
    prop_idx = {s: j for j, s in enumerate(properties)}
    x = np.asarray(x, dtype=int)

    by_zip = {}
    for b in buildings:
        by_zip.setdefault(b.zip_zone, []).append(b)
    assignment = {}

    for zip_zone in sorted({m.zip_zone for m in establishments}):
        members = [m for m in establishments if m.zip_zone == zip_zone]
        blds = sorted(by_zip.get(zip_zone, []), key=lambda b: b.id)
        area = {b.id: b.floor_area_m2 for b in blds}

        def permitted_for(m):
            return [b for b in blds
                    if x[ind_idx[m.industry], prop_idx[b.property_type]] == 1]

        for m in members:
            if not permitted_for(m):
                raise ValueError(
                    f"establishment {m.id} ({m.industry}) has no permitted "
                    f"building in zip {zip_zone}")

        orders = [
            sorted(members, key=lambda m: (-floor_areas[m.id], m.id)),
            sorted(members, key=lambda m: (floor_areas[m.id], m.id)),
            sorted(members, key=lambda m: m.id),
        ]
        best_local, best_obj = None, float("inf")
        for ests in orders:
            local, obj = _greedy_plus_swaps(ests, blds, area, permitted_for,
                                            floor_areas, max_sweeps)
            if obj < best_obj - 1e-12:
                best_local, best_obj = local, obj
        assignment.update(best_local)
    return assignment


def _greedy_plus_swaps(ests, blds, area, permitted_for, floor_areas, max_sweeps):
    load = {b.id: 0.0 for b in blds}

    def delta(bid, add):
        cur = load[bid] - area[bid]
        return (cur + add) ** 2 - cur ** 2

    local = {}
    for m in ests:
        cands = permitted_for(m)
        best_b = min(cands, key=lambda b: (delta(b.id, floor_areas[m.id]), b.id))
        local[m.id] = best_b.id
        load[best_b.id] += floor_areas[m.id]

    for _ in range(max_sweeps):
        improved = False
        for m in ests:
            cur_b = local[m.id]
            f = floor_areas[m.id]
            for b in permitted_for(m):
                if b.id == cur_b:
                    continue
                if delta(cur_b, -f) + delta(b.id, f) < -1e-9:
                    load[cur_b] -= f
                    load[b.id] += f
                    local[m.id] = b.id
                    cur_b = b.id
                    improved = True
        for m1, m2 in itertools.combinations(ests, 2):
            b1, b2 = local[m1.id], local[m2.id]
            if b1 == b2:
                continue
            f1, f2 = floor_areas[m1.id], floor_areas[m2.id]
            if not any(b.id == b2 for b in permitted_for(m1)):
                continue
            if not any(b.id == b1 for b in permitted_for(m2)):
                continue
            before = (load[b1] - area[b1]) ** 2 + (load[b2] - area[b2]) ** 2
            nl1 = load[b1] - f1 + f2
            nl2 = load[b2] - f2 + f1
            after = (nl1 - area[b1]) ** 2 + (nl2 - area[b2]) ** 2
            if after < before - 1e-9:
                load[b1], load[b2] = nl1, nl2
                local[m1.id], local[m2.id] = b2, b1
                improved = True
        if not improved:
            break
    obj = sum((load[b.id] - area[b.id]) ** 2 for b in blds)
    return local, obj
