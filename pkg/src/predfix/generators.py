"""Synthetic desk-scale generators for six temporal MILP families.

Each family builds one structural skeleton per dataset (topology, paths,
coefficient patterns) and then draws per-series temporal processes, so
variable positions line up across series and timesteps.  Instances are
emitted in normalized standard form, sized so the bundled enumeration
oracle can label them; real-world traces are replaced by synthetic
processes of the same qualitative shape (diurnal sinusoids, stable AR
demand, Zipf popularity with slowly rotating ranks).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, SizeExceedsOracle
from .milp import MilpInstance, normalize, to_standard_form
from .oracle import ENUMERATION_CAP, Label, enumerate_solve
from .seriesio import InstanceSeries
from .simplex import OPTIMAL, solve_lp

FAMILIES = (
    "routing",
    "facility-loc",
    "tsp",
    "revenue-max",
    "energy-grid",
    "caching",
)

_DEFAULT_PARAMS: dict[str, dict] = {
    "routing": {
        "nodes": 5,
        "edges": 6,
        "commodities": 3,
        "max_paths": 3,
        "installment_types": 2,
        "period": 24.0,
        "capacity_range": (0.4, 0.9),
        "install_cost_range": (1.0, 3.0),
        "install_capacity_range": (2.0, 5.0),
    },
    "facility-loc": {
        "clients": 4,
        "facilities": 3,
        "open_cost_range": (1.0, 4.0),
        "assign_cost_range": (0.5, 2.0),
        "demand_init_range": (5.0, 15.0),
        "periods": (20.0, 70.0),
    },
    "tsp": {
        "cities": 4,
        "walk_fraction": 0.05,
    },
    "revenue-max": {
        "items": 12,
        "rows": 3,
        "revenue_init_range": (1.0, 3.0),
        "capacity_fraction_range": (0.25, 0.5),
        "periods": (20.0, 70.0),
    },
    "energy-grid": {
        "prosumers": 3,
        "batteries": 3,
        "primary": 3,
        "period": 20.0,
    },
    "caching": {
        "items": 30,
        "size_range": (1.0, 10.0),
        "capacity_fraction_range": (0.3, 0.5),
        "rotation_rate": 1.0,
        "zipf_exponent": 1.0,
    },
}

_MAX_RESAMPLES = 100


@dataclass
class GeneratorSpec:
    """Family choice, split sizes, timesteps, seed, and family knobs.

    Unknown knob names are a hard error; every knob has a documented
    default in `_DEFAULT_PARAMS`.
    """

    family: str
    n_train: int = 8
    n_val: int = 2
    n_test: int = 2
    timesteps: int = 20
    seed: int = 0
    params: dict = field(default_factory=dict)

    def resolved_params(self) -> dict:
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        defaults = dict(_DEFAULT_PARAMS[self.family])
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown {self.family} params: {sorted(unknown)}")
        defaults.update(self.params)
        return defaults


@dataclass
class TemporalProcess:
    """Named process kind with its parameters, for reproducibility logs."""

    kind: str
    params: dict


def _finalize(c, a_rows, b, eq_mask, n_binary, n_continuous) -> MilpInstance:
    raw = MilpInstance(
        c=np.asarray(c, dtype=float),
        a=sp.csr_matrix(np.asarray(a_rows, dtype=float).reshape(len(b), len(c))),
        b=np.asarray(b, dtype=float),
        n_binary=n_binary,
        n_continuous=n_continuous,
        equality_rows=np.asarray(eq_mask, dtype=bool),
    )
    return normalize(to_standard_form(raw))


def _split_series(spec: GeneratorSpec, builder) -> dict[str, list[InstanceSeries]]:
    """Run `builder(series_rng, split, index)` over all splits."""
    seq = np.random.SeedSequence(spec.seed)
    children = seq.spawn(spec.n_train + spec.n_val + spec.n_test)
    out: dict[str, list[InstanceSeries]] = {"train": [], "val": [], "test": []}
    counts = (("train", spec.n_train), ("val", spec.n_val), ("test", spec.n_test))
    cursor = 0
    for split, count in counts:
        for index in range(count):
            rng = np.random.default_rng(children[cursor])
            out[split].append(builder(rng, split, index))
            cursor += 1
    return out


# --------------------------------------------------------------------------
# routing: joint path selection and capacity installment
# --------------------------------------------------------------------------


def _random_connected_graph(rng, nodes, edges):
    g = nx.Graph()
    g.add_nodes_from(range(nodes))
    order = rng.permutation(nodes)
    for i in range(1, nodes):
        g.add_edge(int(order[i]), int(order[rng.integers(0, i)]))
    while g.number_of_edges() < edges:
        u, v = rng.integers(0, nodes, 2)
        if u != v:
            g.add_edge(int(u), int(v))
    return g


def gen_routing(spec: GeneratorSpec) -> dict[str, list[InstanceSeries]]:
    p = spec.resolved_params()
    skeleton_rng = np.random.default_rng([spec.seed, 1])

    graph = _random_connected_graph(skeleton_rng, p["nodes"], p["edges"])
    edge_list = sorted(tuple(sorted(e)) for e in graph.edges)
    edge_index = {e: i for i, e in enumerate(edge_list)}
    n_edges = len(edge_list)
    n_inst = p["installment_types"]

    commodities = []
    for _ in range(p["commodities"]):
        for _ in range(_MAX_RESAMPLES):
            src, dst = skeleton_rng.choice(p["nodes"], size=2, replace=False)
            paths = list(
                itertools.islice(
                    nx.shortest_simple_paths(graph, int(src), int(dst)), p["max_paths"]
                )
            )
            if len(paths) >= 2:
                break
        else:
            raise SizeExceedsOracle("could not find a commodity with 2+ candidate paths")
        n_paths = int(skeleton_rng.integers(2, len(paths) + 1))
        chosen = paths[:n_paths]
        arcs = [
            [edge_index[tuple(sorted((a, b)))] for a, b in zip(path, path[1:])]
            for path in chosen
        ]
        costs = [len(path_arcs) * skeleton_rng.uniform(0.5, 1.5) for path_arcs in arcs]
        commodities.append({"paths": arcs, "costs": costs})

    n_path_vars = sum(len(k["paths"]) for k in commodities)
    n_binary = n_path_vars + n_edges * n_inst
    if n_binary > ENUMERATION_CAP:
        raise SizeExceedsOracle(
            f"routing skeleton has {n_binary} binaries > cap {ENUMERATION_CAP}"
        )

    base_capacity = skeleton_rng.uniform(*p["capacity_range"], n_edges)
    install_cost = skeleton_rng.uniform(*p["install_cost_range"], n_inst)
    install_capacity = skeleton_rng.uniform(*p["install_capacity_range"], n_inst)
    budget = float((base_capacity + install_capacity.sum()).min())

    def build(series_rng, split, index):
        k = len(commodities)
        base = series_rng.uniform(1.0, 3.0, k)
        amp = series_rng.uniform(0.3, 0.8) * base
        phase = series_rng.uniform(0.0, 2 * np.pi, k)
        noise = 0.05 * base
        steps = np.arange(spec.timesteps)
        demand = np.maximum(
            0.0,
            base[None, :]
            + amp[None, :] * np.sin(2 * np.pi * steps[:, None] / p["period"] + phase[None, :])
            + noise[None, :] * series_rng.standard_normal((spec.timesteps, k)),
        )
        # One path per commodity plus all installments is the feasibility
        # witness; scale demands so it always fits the tightest edge.
        peak = demand.sum(axis=1).max()
        if peak > 0.95 * budget:
            demand *= 0.95 * budget / peak

        instances = []
        for t in range(spec.timesteps):
            c = np.zeros(n_binary)
            rows, b, eq = [], [], []
            col = 0
            path_cols = []
            for ki, com in enumerate(commodities):
                cols_k = list(range(col, col + len(com["paths"])))
                path_cols.append(cols_k)
                for li, cost in enumerate(com["costs"]):
                    c[col + li] = cost * demand[t, ki]
                col += len(com["paths"])
            for ei in range(n_edges):
                for ii in range(n_inst):
                    c[n_path_vars + ei * n_inst + ii] = install_cost[ii]
            for ki, com in enumerate(commodities):
                row = np.zeros(n_binary)
                row[path_cols[ki]] = 1.0
                rows.append(row)
                b.append(1.0)
                eq.append(True)
            for ei in range(n_edges):
                row = np.zeros(n_binary)
                for ki, com in enumerate(commodities):
                    for li, path_arcs in enumerate(com["paths"]):
                        if ei in path_arcs:
                            row[path_cols[ki][li]] = demand[t, ki]
                for ii in range(n_inst):
                    row[n_path_vars + ei * n_inst + ii] = -install_capacity[ii]
                rows.append(row)
                b.append(base_capacity[ei])
                eq.append(False)
            instances.append(_finalize(c, rows, b, eq, n_binary, 0))
        return InstanceSeries(
            series_id=f"routing-{split}-{index:03d}",
            instances=instances,
            family="routing",
            meta={"process": TemporalProcess("sinusoid-plus-noise", {"period": p["period"]}).__dict__},
        )

    return _split_series(spec, build)


# --------------------------------------------------------------------------
# facility location
# --------------------------------------------------------------------------


def gen_facility_location(spec: GeneratorSpec) -> dict[str, list[InstanceSeries]]:
    p = spec.resolved_params()
    skeleton_rng = np.random.default_rng([spec.seed, 1])
    n_j, n_i = p["clients"], p["facilities"]
    assign_cost = skeleton_rng.uniform(*p["assign_cost_range"], (n_j, n_i))
    n_binary = n_j * n_i + n_i
    if n_binary > ENUMERATION_CAP:
        raise SizeExceedsOracle(f"facility skeleton has {n_binary} binaries")

    def build(series_rng, split, index):
        lam = series_rng.uniform(0.98, 0.999, n_j)
        q, _ = np.linalg.qr(series_rng.standard_normal((n_j, n_j)))
        stable = q @ np.diag(lam) @ q.T
        a1 = series_rng.uniform(1.0, 5.0)
        a2 = series_rng.uniform(2.0, 10.0)
        p1, p2 = p["periods"]
        d = series_rng.uniform(*p["demand_init_range"], n_j)
        instances = []
        for t in range(spec.timesteps):
            f_cost = series_rng.uniform(*p["open_cost_range"], n_i)
            c = np.concatenate([(assign_cost * d[:, None]).reshape(-1), f_cost])
            rows, b, eq = [], [], []
            for j in range(n_j):
                row = np.zeros(n_binary)
                row[j * n_i : (j + 1) * n_i] = 1.0
                rows.append(row)
                b.append(1.0)
                eq.append(True)
            for i in range(n_i):
                row = np.zeros(n_binary)
                row[i : n_j * n_i : n_i] = 1.0
                row[n_j * n_i + i] = -2.0 * n_j
                rows.append(row)
                b.append(0.0)
                eq.append(False)
            instances.append(_finalize(c, rows, b, eq, n_binary, 0))
            w = series_rng.standard_normal(n_j)
            d = np.maximum(0.0, stable @ d + a1 * np.sin(t / p1) + a2 * np.sin(t / p2) + w)
        return InstanceSeries(
            series_id=f"facility-loc-{split}-{index:03d}",
            instances=instances,
            family="facility-loc",
            meta={"process": TemporalProcess("ar-with-sinusoids", {"periods": p["periods"]}).__dict__},
        )

    return _split_series(spec, build)


# --------------------------------------------------------------------------
# travelling salesman (subtour-elimination formulation)
# --------------------------------------------------------------------------


def tsp_arc_index(n_cities: int):
    """Arc list [(i, j) for i != j] in row-major order with its index map."""
    arcs = [(i, j) for i in range(n_cities) for j in range(n_cities) if i != j]
    return arcs, {arc: k for k, arc in enumerate(arcs)}


def tsp_subtour_rows(n_cities: int):
    """All subsets 2 <= |S| <= N-1 for the subtour-elimination rows."""
    subsets = []
    for size in range(2, n_cities):
        subsets.extend(itertools.combinations(range(n_cities), size))
    return subsets


def gen_tsp(spec: GeneratorSpec) -> dict[str, list[InstanceSeries]]:
    p = spec.resolved_params()
    n = p["cities"]
    if n > 8:
        raise SizeExceedsOracle("tsp generator supports at most 8 cities")
    arcs, arc_of = tsp_arc_index(n)
    n_binary = len(arcs)
    subsets = tsp_subtour_rows(n)

    def build(series_rng, split, index):
        points = series_rng.uniform(0.0, 1.0, (n, 2))
        cost = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
        c_vec = np.array([cost[i, j] for i, j in arcs])
        scale = p["walk_fraction"] * float(c_vec.mean())
        instances = []
        for _ in range(spec.timesteps):
            rows, b, eq = [], [], []
            for i in range(n):  # out-degree
                row = np.zeros(n_binary)
                for j in range(n):
                    if i != j:
                        row[arc_of[(i, j)]] = 1.0
                rows.append(row)
                b.append(1.0)
                eq.append(True)
            for j in range(n):  # in-degree
                row = np.zeros(n_binary)
                for i in range(n):
                    if i != j:
                        row[arc_of[(i, j)]] = 1.0
                rows.append(row)
                b.append(1.0)
                eq.append(True)
            for subset in subsets:
                row = np.zeros(n_binary)
                for i in subset:
                    for j in subset:
                        if i != j:
                            row[arc_of[(i, j)]] = 1.0
                rows.append(row)
                b.append(len(subset) - 1.0)
                eq.append(False)
            instances.append(_finalize(c_vec, rows, b, eq, n_binary, 0))
            c_vec = np.maximum(0.0, c_vec + series_rng.uniform(-scale, scale, n_binary))
        return InstanceSeries(
            series_id=f"tsp-{split}-{index:03d}",
            instances=instances,
            family="tsp",
            meta={"cities": n, "process": TemporalProcess("random-walk", {"scale": scale}).__dict__},
        )

    return _split_series(spec, build)


def tsp_best_tour(instance: MilpInstance) -> Label:
    """Exact TSP label by enumerating all (N-1)! directed tours.

    Ties resolve to the lexicographically smallest arc-incidence vector,
    matching the enumeration oracle's convention.
    """
    import time as _time

    started = _time.perf_counter()
    nb = instance.n_binary
    n = int(round((1 + np.sqrt(1 + 4 * nb)) / 2))
    arcs, arc_of = tsp_arc_index(n)
    best = None
    for perm in itertools.permutations(range(1, n)):
        tour = (0, *perm, 0)
        z = np.zeros(nb)
        for a_node, b_node in zip(tour, tour[1:]):
            z[arc_of[(a_node, b_node)]] = 1.0
        objective = float(instance.c @ z)
        key = (objective, tuple(z))
        if best is None or key < best:
            best = key
    objective, z = best
    return Label(OPTIMAL, np.array(z), objective, _time.perf_counter() - started)


# --------------------------------------------------------------------------
# revenue maximization (multi-row knapsack)
# --------------------------------------------------------------------------


def gen_revenue_max(spec: GeneratorSpec) -> dict[str, list[InstanceSeries]]:
    p = spec.resolved_params()
    skeleton_rng = np.random.default_rng([spec.seed, 1])
    items, n_rows = p["items"], p["rows"]
    if items > ENUMERATION_CAP:
        raise SizeExceedsOracle(f"revenue-max skeleton has {items} binaries")
    usage = skeleton_rng.uniform(0.0, 1.0, (n_rows, items))

    def build(series_rng, split, index):
        revenue = series_rng.uniform(*p["revenue_init_range"], items)
        capacity = series_rng.uniform(*p["capacity_fraction_range"], n_rows) * usage.sum(axis=1)
        a1 = series_rng.uniform(0.02, 0.1)
        a2 = series_rng.uniform(0.05, 0.15)
        p1, p2 = p["periods"]
        instances = []
        for t in range(spec.timesteps):
            rows = [usage[i] for i in range(n_rows)]
            instances.append(
                _finalize(-revenue, rows, capacity, [False] * n_rows, items, 0)
            )
            revenue = np.maximum(
                0.0,
                revenue
                + a1 * np.sin(t / p1)
                + a2 * np.sin(t / p2)
                + 0.02 * series_rng.standard_normal(items),
            )
            capacity = np.maximum(0.0, capacity + 0.02 * series_rng.standard_normal(n_rows))
        return InstanceSeries(
            series_id=f"revenue-max-{split}-{index:03d}",
            instances=instances,
            family="revenue-max",
            meta={"process": TemporalProcess("sinusoid-plus-walk", {"periods": p["periods"]}).__dict__},
        )

    return _split_series(spec, build)


# --------------------------------------------------------------------------
# energy grid (the one family with continuous variables)
# --------------------------------------------------------------------------


def gen_energy_grid(spec: GeneratorSpec) -> dict[str, list[InstanceSeries]]:
    p = spec.resolved_params()
    skeleton_rng = np.random.default_rng([spec.seed, 1])
    n_f, n_i, n_n = p["prosumers"], p["batteries"], p["primary"]
    transfer = skeleton_rng.uniform(0.5, 1.5, (n_n, n_f))
    relief = skeleton_rng.uniform(0.2, 1.0, (n_n, n_i))
    n_binary, n_continuous = n_i, n_f

    def build(series_rng, split, index):
        price = series_rng.uniform(1.0, 3.0, n_f)
        battery_cost = series_rng.uniform(0.5, 1.5, n_i)
        capacity = series_rng.uniform(1.5, 3.0, n_n)
        amp = series_rng.uniform(0.05, 0.2)
        instances = []
        for t in range(spec.timesteps):
            for attempt in range(_MAX_RESAMPLES + 1):
                c = np.concatenate([battery_cost, -price])
                rows, b, eq = [], [], []
                for nrow in range(n_n):
                    row = np.zeros(n_binary + n_continuous)
                    row[:n_binary] = -relief[nrow]
                    row[n_binary:] = transfer[nrow]
                    rows.append(row)
                    b.append(capacity[nrow])
                    eq.append(False)
                share = np.zeros(n_binary + n_continuous)
                share[n_binary:] = 1.0
                rows.append(share)
                b.append(1.0)
                eq.append(True)
                inst = _finalize(c, rows, b, eq, n_binary, n_continuous)
                # Reject price/capacity draws that make the step unbounded
                # or infeasible even with every battery deployed.
                probe = solve_lp(
                    inst.c[n_binary:],
                    inst.a.toarray()[:, n_binary:],
                    inst.b - inst.a.toarray()[:, :n_binary] @ np.ones(n_binary),
                    bounds=[(None, None)] * n_continuous,
                )
                if probe.status == OPTIMAL:
                    break
                price = series_rng.uniform(1.0, 3.0, n_f)
                capacity = series_rng.uniform(1.5, 3.0, n_n)
            else:
                raise SizeExceedsOracle("energy-grid: no feasible bounded draw in 100 tries")
            instances.append(inst)
            price = price + amp * np.sin(t / p["period"]) + 0.05 * series_rng.standard_normal(n_f)
            price = np.maximum(0.1, price)
            capacity = np.maximum(0.5, capacity + 0.05 * series_rng.standard_normal(n_n))
        return InstanceSeries(
            series_id=f"energy-grid-{split}-{index:03d}",
            instances=instances,
            family="energy-grid",
            meta={"process": TemporalProcess("sinusoid-plus-walk", {"period": p["period"]}).__dict__},
        )

    return _split_series(spec, build)


# --------------------------------------------------------------------------
# caching (single knapsack with Zipf popularity)
# --------------------------------------------------------------------------


def gen_caching(spec: GeneratorSpec) -> dict[str, list[InstanceSeries]]:
    p = spec.resolved_params()
    skeleton_rng = np.random.default_rng([spec.seed, 1])
    items = p["items"]
    sizes = skeleton_rng.uniform(*p["size_range"], items)
    capacity = skeleton_rng.uniform(*p["capacity_fraction_range"]) * sizes.sum()

    def build(series_rng, split, index):
        ranks = series_rng.permutation(items)
        instances = []
        for _ in range(spec.timesteps):
            popularity = (ranks + 1.0) ** (-p["zipf_exponent"])
            popularity = popularity / popularity.sum()
            instances.append(
                _finalize(-popularity, [sizes], [capacity], [False], items, 0)
            )
            for _ in range(series_rng.poisson(p["rotation_rate"])):
                pos = int(series_rng.integers(0, items - 1))
                lower = np.flatnonzero(ranks == pos)[0]
                upper = np.flatnonzero(ranks == pos + 1)[0]
                ranks[lower], ranks[upper] = ranks[upper], ranks[lower]
        return InstanceSeries(
            series_id=f"caching-{split}-{index:03d}",
            instances=instances,
            family="caching",
            meta={
                "process": TemporalProcess(
                    "popularity-trace", {"rotation_rate": p["rotation_rate"]}
                ).__dict__
            },
        )

    return _split_series(spec, build)


_GENERATORS = {
    "routing": gen_routing,
    "facility-loc": gen_facility_location,
    "tsp": gen_tsp,
    "revenue-max": gen_revenue_max,
    "energy-grid": gen_energy_grid,
    "caching": gen_caching,
}


def generate(spec: GeneratorSpec) -> dict[str, list[InstanceSeries]]:
    """Dispatch on family; identical specs produce bit-identical datasets."""
    spec.resolved_params()
    return _GENERATORS[spec.family](spec)


def label_dataset(
    series_list: list[InstanceSeries],
    backend: str = "oracle",
    fraction: float = 1.0,
    seed: int = 0,
    max_binaries: int = ENUMERATION_CAP,
) -> list[InstanceSeries]:
    """Attach exact labels to a seeded random subset of the instances.

    TSP series above the enumeration cap are labeled by tour
    enumeration; everything else goes through `enumerate_solve`.
    """
    if backend != "oracle":
        raise ConfigError(f"unsupported labeling backend {backend!r}")
    slots = [(si, t) for si, series in enumerate(series_list) for t in range(len(series))]
    count = int(round(fraction * len(slots)))
    rng = np.random.default_rng(seed)
    chosen_idx = rng.choice(len(slots), size=count, replace=False) if count else []
    chosen = {slots[i] for i in np.sort(np.asarray(chosen_idx, dtype=int))}

    out = []
    for si, series in enumerate(series_list):
        labels: list[Label | None] = list(series.labels)
        for t, inst in enumerate(series.instances):
            if (si, t) not in chosen:
                continue
            if series.family == "tsp" and inst.n_binary > max_binaries:
                labels[t] = tsp_best_tour(inst)
            else:
                labels[t] = enumerate_solve(inst, max_binaries=max_binaries)
        out.append(
            InstanceSeries(
                series_id=series.series_id,
                instances=series.instances,
                labels=labels,
                family=series.family,
                meta=dict(series.meta),
            )
        )
    return out
