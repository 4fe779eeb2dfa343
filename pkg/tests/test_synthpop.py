import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tollsim.synthpop import (
    AggregateEstCounts,
    Building,
    Establishment,
    allocate_vehicles,
    assign_to_buildings,
    estimate_floor_areas,
    generate_fleet,
    generate_individuals,
    readjust_floor_areas,
    sample_establishments,
    solve_mapping,
)
from tollsim.synthpop.fleet import largest_remainder
from tollsim.synthpop.individuals import IncomeSpec


def exhaustive_mapping_optimum(a, b, forbidden=frozenset()):
    """Enumerate all binary matrices; oracle for solve_mapping."""
    a = np.asarray(a, bool)
    b = np.asarray(b, bool)
    I, K = a.shape
    J = b.shape[0]
    best = None
    for bits in itertools.product([0, 1], repeat=I * J):
        x = np.array(bits).reshape(I, J)
        if any(x[i, j] for (i, j) in forbidden):
            continue
        ok = True
        for i in range(I):
            if a[i].any() and x[i].sum() < 1:
                ok = False
                break
        if ok:
            for j in range(J):
                if b[j].any() and x[:, j].sum() < 1:
                    ok = False
                    break
        if ok:
            for i in range(I):
                for k in range(K):
                    if a[i, k] and not np.any(x[i] & b[:, k]):
                        ok = False
                        break
                if not ok:
                    break
        if ok and (best is None or x.sum() < best):
            best = int(x.sum())
    return best


class TestSampleEstablishments:
    def test_counts_and_bounds(self):
        counts = AggregateEstCounts(rows=[(0, "retail", (1, 4), 3)])
        ests = sample_establishments(counts, seed=1)
        assert len(ests) == 3
        assert all(1 <= e.employment <= 4 for e in ests)

    def test_uniform_mean(self):
        counts = AggregateEstCounts(rows=[(0, "retail", (5, 9), 10_000)])
        ests = sample_establishments(counts, seed=2)
        mean = np.mean([e.employment for e in ests])
        assert abs(mean - 7.0) / 7.0 < 0.05

    def test_empty_counts_rejected(self):
        with pytest.raises(ValueError):
            sample_establishments(AggregateEstCounts(rows=[(0, "retail", (1, 4), 0)]), 1)

    def test_deterministic(self):
        counts = AggregateEstCounts(rows=[(0, "retail", (1, 9), 50)])
        a = [e.employment for e in sample_establishments(counts, seed=9)]
        b = [e.employment for e in sample_establishments(counts, seed=9)]
        assert a == b


class TestSolveMapping:
    def test_forced_single(self):
        x = solve_mapping(np.array([[1]]), np.array([[1]]))
        assert x.tolist() == [[1]]

    def test_two_by_two_matching(self):
        a = np.ones((2, 1), dtype=bool)
        b = np.ones((2, 1), dtype=bool)
        x = solve_mapping(a, b)
        assert x.sum() == 2
        assert exhaustive_mapping_optimum(a, b) == 2

    def test_forbidden_infeasible(self):
        # single property column which is forbidden for the industry
        a = np.array([[1]])
        b = np.array([[1]])
        with pytest.raises(ValueError):
            solve_mapping(a, b, forbidden={(0, 0)})

    @settings(max_examples=20, deadline=None)
    @given(data=st.data())
    def test_matches_exhaustive_on_random_4x4(self, data):
        rng = np.random.default_rng(data.draw(st.integers(0, 10_000)))
        K = 3
        a = rng.random((4, K)) < 0.6
        b = rng.random((4, K)) < 0.7
        # keep feasible: every present industry can be housed in every zip
        for k in range(K):
            if a[:, k].any() and not b[:, k].any():
                b[rng.integers(0, 4), k] = True
        if not a.any() or not b.any():
            a[0, 0] = True
            b[0, 0] = True
        oracle = exhaustive_mapping_optimum(a, b)
        if oracle is None:
            with pytest.raises(ValueError):
                solve_mapping(a, b)
        else:
            x = solve_mapping(a, b)
            assert int(x.sum()) == oracle


class TestFloorModel:
    def test_single_cell_closed_form(self):
        ests = [Establishment(id=0, zip_zone=0, industry="retail", employment=10)]
        blds = [Building(id=0, zip_zone=0, taz_zone=0, property_type="shop",
                         floor_area_m2=1000.0)]
        x = np.array([[1]])
        fm = estimate_floor_areas(ests, blds, x, ["retail"], ["shop"], [0],
                                  n_starts=2, seed=3)
        assert fm.objective == pytest.approx(0.0, abs=1e-6)
        assert fm.floor_area(0, 0, 10) == pytest.approx(1000.0, rel=1e-4)

    def test_zone_without_establishments_vacuous(self):
        ests = [Establishment(id=0, zip_zone=0, industry="retail", employment=5)]
        blds = [
            Building(id=0, zip_zone=0, taz_zone=0, property_type="shop",
                     floor_area_m2=500.0),
            Building(id=1, zip_zone=1, taz_zone=9, property_type="shop",
                     floor_area_m2=700.0),
        ]
        x = np.array([[1]])
        fm = estimate_floor_areas(ests, blds, x, ["retail"], ["shop"], [0, 1],
                                  n_starts=1, seed=0)
        # the empty zone contributes its building area squared at best; the
        # model cannot allocate anything there
        assert np.all(fm.q[:, :, 1] == 0)

    def test_shared_property_sums_to_building_area(self):
        ests = [
            Establishment(id=0, zip_zone=0, industry="a", employment=10),
            Establishment(id=1, zip_zone=0, industry="b", employment=30),
        ]
        blds = [Building(id=0, zip_zone=0, taz_zone=0, property_type="shop",
                         floor_area_m2=1000.0)]
        x = np.array([[1], [1]])
        fm = estimate_floor_areas(ests, blds, x, ["a", "b"], ["shop"], [0],
                                  n_starts=4, seed=1)
        f = (fm.c[:, None] + fm.d[None, :]) * np.array([[10.0], [30.0]]) + fm.p * 1.0
        pred = float(np.sum(f[:, 0] * fm.q[:, 0, 0]))
        assert pred == pytest.approx(1000.0, rel=1e-3)

    def test_constraint_shares_sum_to_one(self):
        ests = [
            Establishment(id=0, zip_zone=0, industry="a", employment=4),
            Establishment(id=1, zip_zone=0, industry="b", employment=8),
            Establishment(id=2, zip_zone=1, industry="a", employment=2),
        ]
        blds = [
            Building(id=0, zip_zone=0, taz_zone=0, property_type="p1", floor_area_m2=300.0),
            Building(id=1, zip_zone=0, taz_zone=0, property_type="p2", floor_area_m2=200.0),
            Building(id=2, zip_zone=1, taz_zone=5, property_type="p1", floor_area_m2=100.0),
        ]
        x = np.array([[1, 1], [1, 0]])
        fm = estimate_floor_areas(ests, blds, x, ["a", "b"], ["p1", "p2"], [0, 1],
                                  n_starts=2, seed=5)
        for i, k in [(0, 0), (1, 0), (0, 1)]:
            assert float(np.sum(fm.q[i, :, k])) == pytest.approx(1.0, abs=1e-9)
        assert np.all(fm.q <= np.asarray(x)[:, :, None] + 1e-12)
        assert np.all(fm.c >= 0) and np.all(fm.d >= 0) and np.all(fm.p >= 0)


class TestAssignToBuildings:
    def _x(self):
        return np.array([[1]])

    def test_forced_assignment(self):
        ests = [Establishment(id=0, zip_zone=0, industry="retail", employment=3)]
        blds = [Building(id=0, zip_zone=0, taz_zone=0, property_type="shop",
                         floor_area_m2=100.0)]
        out = assign_to_buildings(ests, blds, self._x(), ["retail"], ["shop"],
                                  {0: 90.0})
        assert out == {0: 0}

    def test_size_matched_zero_objective(self):
        ests = [
            Establishment(id=0, zip_zone=0, industry="retail", employment=6),
            Establishment(id=1, zip_zone=0, industry="retail", employment=4),
        ]
        blds = [
            Building(id=0, zip_zone=0, taz_zone=0, property_type="shop", floor_area_m2=600.0),
            Building(id=1, zip_zone=0, taz_zone=0, property_type="shop", floor_area_m2=400.0),
        ]
        areas = {0: 600.0, 1: 400.0}
        out = assign_to_buildings(ests, blds, self._x(), ["retail"], ["shop"], areas)
        assert out == {0: 0, 1: 1}
        # enumeration oracle: all four assignments
        best = min(
            (areas[0] * (a == 0) + areas[1] * (b == 0) - 600.0) ** 2 +
            (areas[0] * (a == 1) + areas[1] * (b == 1) - 400.0) ** 2
            for a in (0, 1) for b in (0, 1)
        )
        assert best == 0.0

    def test_unpermitted_rejected(self):
        ests = [Establishment(id=0, zip_zone=0, industry="restaurant", employment=3)]
        blds = [Building(id=0, zip_zone=0, taz_zone=0, property_type="factory",
                         floor_area_m2=100.0)]
        with pytest.raises(ValueError):
            assign_to_buildings(ests, blds, np.array([[0]]), ["restaurant"],
                                ["factory"], {0: 50.0})

    @settings(max_examples=15, deadline=None)
    @given(data=st.data())
    def test_within_5pct_of_enumeration(self, data):
        rng = np.random.default_rng(data.draw(st.integers(0, 99_999)))
        n_est = data.draw(st.integers(1, 6))
        n_bld = data.draw(st.integers(1, 3))
        ests = [Establishment(id=i, zip_zone=0, industry="r", employment=2)
                for i in range(n_est)]
        blds = [Building(id=j, zip_zone=0, taz_zone=0, property_type="shop",
                         floor_area_m2=float(rng.integers(100, 1000)))
                for j in range(n_bld)]
        areas = {i: float(rng.integers(50, 500)) for i in range(n_est)}
        x = np.array([[1]])
        out = assign_to_buildings(ests, blds, x, ["r"], ["shop"], areas)

        def objective(assign):
            load = {b.id: 0.0 for b in blds}
            for e, bid in assign.items():
                load[bid] += areas[e]
            return sum((load[b.id] - b.floor_area_m2) ** 2 for b in blds)

        best = min(
            objective(dict(zip(range(n_est), combo)))
            for combo in itertools.product(range(n_bld), repeat=n_est)
        )
        assert objective(out) <= best * 1.05 + 1e-9


class TestFleet:
    def test_single_cell(self):
        out = generate_fleet({"LGV": 100}, {"retail": 100})
        assert out.tolist() == [[100]]

    def test_closed_form_uniform_seed(self):
        out = generate_fleet({"LGV": 60, "HGV": 40}, {"a": 50, "b": 50})
        assert out.tolist() == [[30, 30], [20, 20]]

    def test_mismatched_totals_rejected(self):
        with pytest.raises(ValueError):
            generate_fleet({"LGV": 100}, {"a": 60})

    def test_rescale(self):
        out = generate_fleet({"LGV": 100}, {"a": 60}, rescale=True)
        assert out.sum() == 100

    def test_margins_within_tolerance(self):
        rows = {"LGV": 213, "HGV": 88, "VHGV": 41}
        cols = {c: v for c, v in zip("abcdef", (30, 77, 55, 90, 60, 30))}
        m = generate_fleet(rows, cols, integerize=False)
        assert np.allclose(m.sum(axis=1), list(rows.values()), rtol=1e-3)
        assert np.allclose(m.sum(axis=0), list(cols.values()), rtol=1e-3)
        n = generate_fleet(rows, cols)
        assert n.sum() == sum(rows.values())

    def test_zero_seed_with_margin_rejected(self):
        with pytest.raises(ValueError):
            generate_fleet({"LGV": 10}, {"a": 10}, seed_matrix=[[0.0]])

    @given(st.lists(st.floats(0, 50), min_size=1, max_size=8), st.integers(0, 60))
    def test_largest_remainder_preserves_total(self, vals, total):
        total = min(total, int(sum(vals)) + len(vals))
        out = largest_remainder(np.array(vals), total=total)
        assert out.sum() == total
        assert np.all(out >= 0)


class TestAllocateVehicles:
    def _ests(self, emps):
        out = []
        for i, e in enumerate(emps):
            m = Establishment(id=i, zip_zone=0, industry="wholesale", employment=e)
            m.function = "logistics"
            m.zone = 0
            out.append(m)
        return out

    def test_single_establishment_gets_all(self):
        ests = self._ests([4])
        z = {("logistics", "wholesale", "LGV"): 1.0}
        n = np.array([[5], [0], [0]])
        vehicles = allocate_vehicles(ests, z, n, industries=["wholesale"])
        assert len(vehicles) == 5
        assert all(v.owner == 0 for v in vehicles)

    def test_largest_remainder_split(self):
        ests = self._ests([10, 30])
        z = {("logistics", "wholesale", "LGV"): 1.0}
        n = np.array([[4], [0], [0]])
        vehicles = allocate_vehicles(ests, z, n, industries=["wholesale"])
        counts = {0: 0, 1: 0}
        for v in vehicles:
            counts[v.owner] += 1
        assert counts == {0: 1, 1: 3}

    def test_owner_operator_for_single_employee(self):
        ests = self._ests([1])
        z = {("logistics", "wholesale", "HGV"): 1.0}
        n = np.array([[0], [2], [0]])
        vehicles = allocate_vehicles(ests, z, n, industries=["wholesale"])
        assert all(v.driver_type == "owner_operator" for v in vehicles)

    def test_conservation(self):
        ests = self._ests([3, 7, 2, 9])
        z = {("logistics", "wholesale", t): 1.0 for t in ("LGV", "HGV", "VHGV")}
        n = np.array([[7], [3], [2]])
        vehicles = allocate_vehicles(ests, z, n, industries=["wholesale"])
        assert len(vehicles) == 12
        assert sum(len(m.fleet) for m in ests) == 12

    def test_zero_employment_group_rejected(self):
        z = {("logistics", "wholesale", "LGV"): 1.0}
        n = np.array([[5], [0], [0]])
        with pytest.raises(ValueError):
            allocate_vehicles([], z, n, industries=["wholesale"])


class TestIndividuals:
    def test_vot_cv_in_range(self):
        spec = IncomeSpec(group_medians=(83_200.0,), group_shares=(1.0,))
        assert spec.vot_median(0) == pytest.approx(20.0)
        people = generate_individuals({0: 100}, spec, seed=11)
        vots = np.array([p.vot for p in people])
        cv = vots.std() / vots.mean()
        assert 0.15 <= cv <= 0.25

    def test_group_mean_vots_ordered(self):
        spec = IncomeSpec(group_medians=(30_000.0, 120_000.0),
                          group_shares=(0.5, 0.5))
        people = generate_individuals({0: 2000}, spec, seed=4)
        lo = np.mean([p.vot for p in people if p.income_group == 0])
        hi = np.mean([p.vot for p in people if p.income_group == 1])
        assert hi > lo

    def test_zero_population_rejected(self):
        with pytest.raises(ValueError):
            generate_individuals({0: 0}, IncomeSpec(), seed=1)

    def test_deterministic_and_work_zones(self):
        spec = IncomeSpec()
        a = generate_individuals({0: 50, 1: 50}, spec, seed=3,
                                 work_weights={5: 2.0, 6: 1.0})
        b = generate_individuals({0: 50, 1: 50}, spec, seed=3,
                                 work_weights={5: 2.0, 6: 1.0})
        assert [(p.home_zone, p.income, p.vot, p.work_zone) for p in a] == \
               [(p.home_zone, p.income, p.vot, p.work_zone) for p in b]
        assert any(p.work_zone in (5, 6) for p in a)


class TestReadjust:
    def test_scales_down_to_fit(self):
        ests = [Establishment(id=0, zip_zone=0, industry="r", employment=10)]
        blds = [Building(id=0, zip_zone=0, taz_zone=0, property_type="shop",
                         floor_area_m2=100.0)]
        x = np.array([[1]])
        fm = estimate_floor_areas(ests, blds, x, ["r"], ["shop"], [0],
                                  n_starts=1, seed=0)
        areas = readjust_floor_areas(ests, blds, fm)
        assert areas[0] <= 100.0 + 1e-9
