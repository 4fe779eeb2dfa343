"""Synthetic city network: zones, links, segments, paths, and travel time indices.

The generator builds a directed grid with one node per zone, an optional
arterial overlay (every n-th row/column upgraded), and a contiguous
rectangular toll area.  The network is immutable after construction; all
time-varying state lives in the supply simulator.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field


@dataclass
class Zone:
    """Traffic analysis zone. Density is filled in after establishment synthesis."""

    id: int
    centroid_node: int
    in_toll_area: bool
    area_km2: float = 1.0
    establishment_density: float = 0.0

    def __post_init__(self):
        if self.area_km2 <= 0:
            raise ValueError("zone area must be positive")


@dataclass(frozen=True)
class Segment:
    id: int
    link_id: int
    length_km: float
    capacity_vph: float
    free_flow_kmh: float
    jam_density_vpkm: float

    def __post_init__(self):
        if self.capacity_vph <= 0 or self.free_flow_kmh <= 0:
            raise ValueError("segment capacity and free-flow speed must be positive")

    @property
    def free_flow_h(self) -> float:
        return self.length_km / self.free_flow_kmh


@dataclass(frozen=True)
class Link:
    id: int
    from_node: int
    to_node: int
    segment_ids: tuple
    length_km: float
    free_flow_h: float
    is_radial_entry: bool
    in_toll_area: bool
    signalized_end: bool


@dataclass(frozen=True)
class Path:
    """Contiguous link sequence with the attributes used by route choice."""

    link_ids: tuple
    length_km: float
    free_flow_h: float
    n_signals: int
    n_right_turns: int


@dataclass
class GridSpec:
    """Synthetic grid description consumed by :func:`build_network`."""

    rows: int = 20
    cols: int = 20
    zone_km: float = 1.0
    toll_rows: tuple = (7, 12)  # inclusive row range of the toll rectangle
    toll_cols: tuple = (7, 12)
    arterial_every: int = 5
    local_capacity_vph: float = 500.0
    arterial_capacity_vph: float = 900.0
    local_speed_kmh: float = 40.0
    arterial_speed_kmh: float = 60.0
    jam_density_vpkm: float = 130.0
    segments_per_link: int = 1
    ring_upgrade: bool = False  # upgrade links along the toll boundary
    removed_links: tuple = ()  # (from_node, to_node) pairs, for tests


class Network:
    """Immutable directed network over a zone grid (one centroid node per zone)."""

    def __init__(self, zones, links, segments, node_xy):
        self.zones = zones
        self.links = links
        self.segments = segments
        self.node_xy = node_xy
        self.n_nodes = len(node_xy)
        self.out_links = [[] for _ in range(self.n_nodes)]
        self.in_links = [[] for _ in range(self.n_nodes)]
        self._link_by_od = {}
        for lk in links:
            self.out_links[lk.from_node].append(lk.id)
            self.in_links[lk.to_node].append(lk.id)
            self._link_by_od[(lk.from_node, lk.to_node)] = lk.id
        for lst in self.out_links:
            lst.sort()
        self.toll_zones = frozenset(z.id for z in zones if z.in_toll_area)

    # -- basic lookups --------------------------------------------------

    def link_between(self, a: int, b: int):
        return self._link_by_od.get((a, b))

    def zone_of_node(self, node: int) -> int:
        return node  # generator builds one centroid node per zone, same index

    def neighbors_zone(self, zone_id: int):
        return sorted(self.links[l].to_node for l in self.out_links[zone_id])

    # -- path utilities --------------------------------------------------

    def link_cost(self, link, metric: str) -> float:
        if metric == "time":
            return link.free_flow_h
        if metric == "distance":
            return link.length_km
        raise ValueError(f"unknown metric {metric!r}")

    def make_path(self, link_ids) -> Path:
        links = [self.links[i] for i in link_ids]
        for a, b in zip(links, links[1:]):
            if a.to_node != b.from_node:
                raise ValueError("links are not contiguous")
        n_sig = sum(1 for lk in links if lk.signalized_end)
        n_right = self._count_right_turns(links)
        return Path(
            link_ids=tuple(link_ids),
            length_km=sum(lk.length_km for lk in links),
            free_flow_h=sum(lk.free_flow_h for lk in links),
            n_signals=n_sig,
            n_right_turns=n_right,
        )

    def _count_right_turns(self, links) -> int:
        n = 0
        for a, b in zip(links, links[1:]):
            ax, ay = self.node_xy[a.from_node]
            bx, by = self.node_xy[a.to_node]
            cx, cy = self.node_xy[b.to_node]
            v1 = (bx - ax, by - ay)
            v2 = (cx - bx, cy - by)
            if v1[0] * v2[1] - v1[1] * v2[0] < 0:
                n += 1
        return n

    def dijkstra(self, origin: int, dest=None, metric: str = "time",
                 weights=None, banned_links=frozenset(), banned_nodes=frozenset()):
        """Shortest paths from origin; returns (cost array, predecessor-link array).

        Equal-cost ties are resolved toward the lexicographically smallest
        link-id sequence so results are deterministic.
        """
        INF = float("inf")
        cost = [INF] * self.n_nodes
        pred = [-1] * self.n_nodes
        cost[origin] = 0.0
        heap = [(0.0, origin)]
        while heap:
            c, u = heapq.heappop(heap)
            if c > cost[u] + 1e-15:
                continue
            if dest is not None and u == dest:
                break
            for lid in self.out_links[u]:
                if lid in banned_links:
                    continue
                lk = self.links[lid]
                v = lk.to_node
                if v in banned_nodes:
                    continue
                w = weights[lid] if weights is not None else self.link_cost(lk, metric)
                nc = c + w
                if nc < cost[v] - 1e-15 or (abs(nc - cost[v]) <= 1e-15 and pred[v] >= 0 and lid < pred[v]):
                    cost[v] = nc
                    pred[v] = lid
                    heapq.heappush(heap, (nc, v))
        return cost, pred

    def extract_path_links(self, pred, origin: int, dest: int):
        links = []
        node = dest
        while node != origin:
            lid = pred[node]
            if lid < 0:
                return None
            links.append(lid)
            node = self.links[lid].from_node
        links.reverse()
        return links


def build_network(spec: GridSpec) -> Network:
    """Build the synthetic grid network described by spec.

    Raises ValueError for grids smaller than 2x2, an empty toll area, or a
    disconnected result (possible when removed_links is used).
    """
    if spec.rows < 2 or spec.cols < 2:
        raise ValueError("grid must be at least 2x2")
    r0, r1 = spec.toll_rows
    c0, c1 = spec.toll_cols
    in_area = lambda r, c: r0 <= r <= r1 and c0 <= c <= c1

    node_xy = []
    zones = []
    for r in range(spec.rows):
        for c in range(spec.cols):
            nid = r * spec.cols + c
            node_xy.append((float(c) * spec.zone_km, float(r) * spec.zone_km))
            zones.append(Zone(id=nid, centroid_node=nid, in_toll_area=in_area(r, c),
                              area_km2=spec.zone_km ** 2))
    if not any(z.in_toll_area for z in zones):
        raise ValueError("empty toll area")

    removed = set(spec.removed_links)

    def is_arterial(r, c, rr, cc):
        if spec.arterial_every > 0:
            if r == rr and r % spec.arterial_every == 0:
                return True
            if c == cc and c % spec.arterial_every == 0:
                return True
        if spec.ring_upgrade:
            # links along the toll-area boundary ring
            on_ring = lambda a, b: (a in (r0 - 1, r1 + 1) and c0 - 1 <= b <= c1 + 1) or \
                                   (b in (c0 - 1, c1 + 1) and r0 - 1 <= a <= r1 + 1)
            if on_ring(r, c) and on_ring(rr, cc):
                return True
        return False

    links = []
    segments = []

    def add_link(n_from, n_to, arterial):
        if (n_from, n_to) in removed:
            return
        lid = len(links)
        cap = spec.arterial_capacity_vph if arterial else spec.local_capacity_vph
        vf = spec.arterial_speed_kmh if arterial else spec.local_speed_kmh
        seg_len = spec.zone_km / spec.segments_per_link
        seg_ids = []
        for _ in range(spec.segments_per_link):
            sid = len(segments)
            segments.append(Segment(id=sid, link_id=lid, length_km=seg_len,
                                    capacity_vph=cap, free_flow_kmh=vf,
                                    jam_density_vpkm=spec.jam_density_vpkm))
            seg_ids.append(sid)
        fr, fc = divmod(n_from, spec.cols)
        tr, tc = divmod(n_to, spec.cols)
        from_in = in_area(fr, fc)
        to_in = in_area(tr, tc)
        to_r, to_c = tr, tc
        signal = (spec.arterial_every > 0 and
                  (to_r % spec.arterial_every == 0 or to_c % spec.arterial_every == 0))
        links.append(Link(
            id=lid, from_node=n_from, to_node=n_to, segment_ids=tuple(seg_ids),
            length_km=spec.zone_km, free_flow_h=spec.zone_km / vf,
            is_radial_entry=(not from_in) and to_in,
            in_toll_area=from_in and to_in,
            signalized_end=signal,
        ))

    for r in range(spec.rows):
        for c in range(spec.cols):
            n = r * spec.cols + c
            if c + 1 < spec.cols:
                art = is_arterial(r, c, r, c + 1)
                add_link(n, n + 1, art)
                add_link(n + 1, n, art)
            if r + 1 < spec.rows:
                art = is_arterial(r, c, r + 1, c)
                add_link(n, n + spec.cols, art)
                add_link(n + spec.cols, n, art)

    net = Network(zones, links, segments, node_xy)
    _check_connected(net)
    return net


def _check_connected(net: Network):
    seen = {0}
    q = deque([0])
    while q:
        u = q.popleft()
        for lid in net.out_links[u]:
            v = net.links[lid].to_node
            if v not in seen:
                seen.add(v)
                q.append(v)
    if len(seen) != net.n_nodes:
        raise ValueError("disconnected network spec")


# ---------------------------------------------------------------------------
# k shortest loop-free paths (Yen's algorithm, deterministic tie-breaking)
# ---------------------------------------------------------------------------

def k_shortest_paths(net: Network, origin_zone: int, dest_zone: int, k: int,
                     metric: str = "time"):
    """Return up to k loop-free paths between two distinct zones, sorted
    ascending by the chosen metric.  Spur computations ban root-path nodes, so
    no path repeats a node; ties are broken by lexicographic link-id order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if origin_zone == dest_zone:
        raise ValueError("origin and destination zones must be distinct")
    o = net.zones[origin_zone].centroid_node
    d = net.zones[dest_zone].centroid_node

    cost0, pred0 = net.dijkstra(o, d, metric)
    first = net.extract_path_links(pred0, o, d)
    if first is None:
        raise ValueError("unreachable OD")

    def path_cost(link_ids):
        return sum(net.link_cost(net.links[i], metric) for i in link_ids)

    accepted = [tuple(first)]
    candidates = []  # heap of (cost, link_tuple)
    seen = {tuple(first)}

    while len(accepted) < k:
        base = accepted[-1]
        base_nodes = [o] + [net.links[i].to_node for i in base]
        for i in range(len(base)):
            spur_node = base_nodes[i]
            root = base[:i]
            banned_links = set()
            for p in accepted:
                if tuple(p[:i]) == tuple(root) and len(p) > i:
                    banned_links.add(p[i])
            banned_nodes = set(base_nodes[:i])  # no repeated nodes
            cost, pred = net.dijkstra(spur_node, d, metric,
                                      banned_links=frozenset(banned_links),
                                      banned_nodes=frozenset(banned_nodes))
            spur = net.extract_path_links(pred, spur_node, d)
            if spur is None:
                continue
            cand = tuple(root) + tuple(spur)
            if cand in seen:
                continue
            nodes = [o] + [net.links[j].to_node for j in cand]
            if len(set(nodes)) != len(nodes):
                continue
            seen.add(cand)
            heapq.heappush(candidates, (path_cost(cand), cand))
        if not candidates:
            break
        _, best = heapq.heappop(candidates)
        accepted.append(best)

    return [net.make_path(p) for p in accepted]


def perturbed_choice_sets(net: Network, ods, k: int = 3, seed: int = 0,
                          spread: float = 0.3):
    """Cheap route-choice-set supply for the pipeline.

    Runs k one-to-all shortest path trees per origin under deterministic
    multiplicative link-weight perturbations and collects distinct paths per
    OD.  Exactness is not claimed; :func:`k_shortest_paths` is the exact
    operation.  Returns {(o, d): [Path, ...]} for the requested zone pairs.
    """
    import numpy as np

    origins = sorted({o for o, _ in ods})
    by_origin = {}
    for o, d in ods:
        by_origin.setdefault(o, set()).add(d)

    base_w = [lk.free_flow_h for lk in net.links]
    out = {}
    for o in origins:
        dests = by_origin[o]
        found = {d: [] for d in dests}
        for variant in range(k):
            if variant == 0:
                weights = base_w
            else:
                rng = np.random.Generator(np.random.PCG64(
                    np.random.SeedSequence([seed & 0xFFFFFFFF, variant, o])))
                weights = [w * (1.0 + spread * rng.random()) for w in base_w]
            _, pred = net.dijkstra(net.zones[o].centroid_node, None, weights=weights)
            for d in dests:
                links = net.extract_path_links(pred, net.zones[o].centroid_node,
                                               net.zones[d].centroid_node)
                if links is None:
                    raise ValueError(f"unreachable OD ({o}, {d})")
                t = tuple(links)
                if t not in [p.link_ids for p in found[d]]:
                    found[d].append(net.make_path(t))
        for d in dests:
            found[d].sort(key=lambda p: (p.free_flow_h, p.link_ids))
            out[(o, d)] = found[d]
    return out


# ---------------------------------------------------------------------------
# travel time index
# ---------------------------------------------------------------------------

def trip_tti(link_events, net: Network) -> float:
    """Trip-level travel time index: realized over free-flow trip time.

    link_events is the trajectory's [(link_id, t_in, t_out), ...] record.
    """
    if not link_events:
        raise ValueError("empty trajectory")
    realized = sum(t_out - t_in for _, t_in, t_out in link_events)
    free = sum(net.links[lid].free_flow_h for lid, _, _ in link_events)
    if free <= 0:
        raise ValueError("trajectory has no free-flow time")
    return realized / free


def weighted_tti(length_tti_pairs) -> float:
    """Trip-length weighted mean TTI over (length_km, tti) pairs."""
    pairs = list(length_tti_pairs)
    total = sum(l for l, _ in pairs)
    if total <= 0:
        raise ValueError("no trip length to weight")
    return sum(l * t for l, t in pairs) / total


def dump_network_csv(net: Network, out_dir):
    """Write nodes/links/segments/zones CSV tables for inspection."""
    import pandas as pd
    from pathlib import Path as FsPath

    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(
        [{"node": i, "x_km": x, "y_km": y} for i, (x, y) in enumerate(net.node_xy)]
    ).to_csv(out / "nodes.csv", index=False)
    pd.DataFrame(
        [{"link": lk.id, "from_node": lk.from_node, "to_node": lk.to_node,
          "length_km": lk.length_km, "free_flow_h": lk.free_flow_h,
          "is_radial_entry": lk.is_radial_entry, "in_toll_area": lk.in_toll_area,
          "signalized_end": lk.signalized_end} for lk in net.links]
    ).to_csv(out / "links.csv", index=False)
    pd.DataFrame(
        [{"segment": s.id, "link": s.link_id, "length_km": s.length_km,
          "capacity_vph": s.capacity_vph, "free_flow_kmh": s.free_flow_kmh,
          "jam_density_vpkm": s.jam_density_vpkm} for s in net.segments]
    ).to_csv(out / "segments.csv", index=False)
    pd.DataFrame(
        [{"zone": z.id, "centroid_node": z.centroid_node,
          "in_toll_area": z.in_toll_area, "area_km2": z.area_km2,
          "establishment_density": z.establishment_density} for z in net.zones]
    ).to_csv(out / "zones.csv", index=False)
