"""Constrained NSGA-II and exhaustive enumeration over DCIM design points.

Genes are (log2 H, log2 L, index into divisors of Bx); N follows from the
capacity equality N = W_store * Bw / (H * L).  Every individual is kept
feasible by a deterministic repair walk, so no penalty terms are needed.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import partial
from typing import Iterable, Sequence

import numpy as np

from ..costmodel import CostVector, macro_cost
from ..design import Arch, DesignPoint, Precision, resolve_precision
from ..errors import CapExceeded, NoFeasibleDesign
from ..techlib import DEFAULT_LIB, TechLibrary
from .pareto import crowding_distance, fast_nondominated_sort, hypervolume, nondominated_indices, reference_point

DEFAULT_CAP = 10**6


def divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


@dataclass(frozen=True)
class DcimSpec:
    """User requirements.  ``n_min`` is an exclusive lower bound on N
    (None means 4 * Bw); ``h_max`` and ``l_max`` are inclusive."""

    w_store: int
    precision: Precision
    archs: tuple[Arch, ...] = (Arch.INT, Arch.FP)
    n_min: int | None = None
    h_max: int = 2048
    l_max: int = 64
    alpha: Fraction = Fraction(1)

    def __post_init__(self):
        if isinstance(self.precision, str):
            object.__setattr__(self, "precision", resolve_precision(self.precision))
        object.__setattr__(self, "archs", tuple(sorted({Arch(a) for a in self.archs}, key=lambda a: a.value)))
        if not isinstance(self.w_store, int) or self.w_store < 1:
            raise ValueError(f"w_store must be a positive integer, got {self.w_store!r}")
        for name in ("h_max", "l_max"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_min is not None and self.n_min < 1:
            raise ValueError("n_min must be positive")
        a = Fraction(repr(self.alpha)) if isinstance(self.alpha, float) else Fraction(self.alpha)
        if not 0 < a <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        object.__setattr__(self, "alpha", a)

    @property
    def n_floor(self) -> int:
        return 4 * self.precision.Bw if self.n_min is None else self.n_min

    @property
    def active_archs(self) -> tuple[Arch, ...]:
        """Requested architectures able to execute the precision."""
        return tuple(a for a in self.archs if a is self.precision.arch)

    @property
    def h_exp_range(self) -> range:
        return range(1, self.h_max.bit_length())

    @property
    def l_exp_range(self) -> range:
        return range(0, self.l_max.bit_length())

    @property
    def k_choices(self) -> list[int]:
        return divisors(self.precision.Bx)

    def to_dict(self) -> dict:
        return {
            "w_store": self.w_store,
            "precision": self.precision.name,
            "archs": [a.value for a in self.archs],
            "n_min": self.n_floor,
            "h_max": self.h_max,
            "l_max": self.l_max,
            "alpha": str(self.alpha),
        }

    def digest(self, lib: TechLibrary | None = None) -> str:
        payload = self.to_dict()
        if lib is not None:
            payload["tech"] = lib.to_dict()
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True)
class Genome:
    h_exp: int
    l_exp: int
    k_idx: int


@dataclass(frozen=True)
class GaParams:
    population: int = 100
    generations: int = 100
    crossover: float = 0.9
    mutation: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.population < 4 or self.population % 2:
            raise ValueError(f"population must be even and >= 4, got {self.population}")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        for name in ("crossover", "mutation"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} probability must be in [0, 1], got {p}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def _feasible(spec: DcimSpec, arch: Arch, h_exp: int, l_exp: int, k: int) -> DesignPoint | None:
    prec = spec.precision
    H, L = 1 << h_exp, 1 << l_exp
    num = spec.w_store * prec.Bw
    if num % (H * L):
        return None
    N = num // (H * L)
    if N % prec.Bw or N <= spec.n_floor or H > spec.h_max or L > spec.l_max:
        return None
    return DesignPoint(arch, N, H, L, k, prec.Bw, prec.Bx, prec.BE, prec.BM)


def repair_to_feasible(g: Genome, spec: DcimSpec, arch: Arch | None = None) -> DesignPoint | None:
    """Decode ``g`` or walk it to the nearest feasible point; None if impossible.

    Only shrinking H*L can fix a violated capacity or N bound, so the walk
    lowers log2 H one step at a time first, then lowers log2 L and rescans H
    from the genome's value downwards.
    """
    arch = arch or spec.precision.arch
    ks = spec.k_choices
    if not 0 <= g.k_idx < len(ks):
        raise ValueError(f"k_idx {g.k_idx} outside [0, {len(ks)})")
    k = ks[g.k_idx]
    hs, ls = spec.h_exp_range, spec.l_exp_range
    if not hs or not ls:
        return None
    h0 = min(max(g.h_exp, hs.start), hs.stop - 1)
    l0 = min(max(g.l_exp, ls.start), ls.stop - 1)
    for l in range(l0, ls.start - 1, -1):
        for h in range(h0, hs.start - 1, -1):
            dp = _feasible(spec, arch, h, l, k)
            if dp is not None:
                return dp
    return None


def genome_of(dp: DesignPoint, spec: DcimSpec) -> Genome:
    return Genome(dp.log2H, dp.L.bit_length() - 1, spec.k_choices.index(dp.k))


def sort_key(dp: DesignPoint, cost: CostVector) -> tuple:
    """Total order used for every tie-break and for archive output."""
    return (cost.area, cost.delay, cost.energy, -cost.throughput, dp.N, dp.H, dp.L, dp.k, dp.arch.value)


@dataclass
class ParetoArchive:
    entries: list[tuple[DesignPoint, CostVector]] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    history: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.entries = sorted(self.entries, key=lambda e: sort_key(*e))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def costs(self) -> list[CostVector]:
        return [c for _, c in self.entries]

    @property
    def designs(self) -> list[DesignPoint]:
        return [d for d, _ in self.entries]

    def filtered(self, keep) -> ParetoArchive:
        return ParetoArchive([e for e in self.entries if keep(*e)], dict(self.metadata))

    def to_json(self) -> str:
        rows = []
        for dp, c in self.entries:
            rows.append({
                "design": dp.to_dict(),
                "tag": dp.tag,
                "cost": {name: str(getattr(c, name)) for name in ("area", "delay", "energy", "throughput")},
                "cost_float": dict(zip(("area", "delay", "energy", "throughput"), c.as_floats())),
            })
        return json.dumps({"metadata": self.metadata, "entries": rows}, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> ParetoArchive:
        data = json.loads(text)
        entries = []
        for row in data["entries"]:
            dp = DesignPoint.from_dict(row["design"])
            c = {k: Fraction(v) for k, v in row["cost"].items()}
            entries.append((dp, CostVector(c["area"], c["delay"], c["energy"], c["throughput"],
                                           c["throughput"] * c["delay"])))
        return cls(entries, data.get("metadata", {}))


def _nondominated(entries: list[tuple[DesignPoint, CostVector]]) -> list[tuple[DesignPoint, CostVector]]:
    uniq = {dp: c for dp, c in entries}
    items = list(uniq.items())
    if not items:
        return []
    return [items[i] for i in nondominated_indices([c for _, c in items])]


class Evaluator:
    """Memoizing cost evaluation; optional process pool keeps input order."""

    def __init__(self, lib: TechLibrary, alpha, jobs: int = 1):
        self.fn = partial(_evaluate, lib, alpha)
        self.jobs = max(1, int(jobs))
        self.cache: dict[DesignPoint, CostVector] = {}
        self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __call__(self, dps: Sequence[DesignPoint]) -> list[CostVector]:
        todo = list(dict.fromkeys(d for d in dps if d not in self.cache))
        if todo:
            if self.jobs > 1 and len(todo) > 1:
                if self._pool is None:
                    self._pool = ProcessPoolExecutor(max_workers=self.jobs)
                results = list(self._pool.map(self.fn, todo, chunksize=max(1, len(todo) // (4 * self.jobs))))
            else:
                results = [self.fn(d) for d in todo]
            self.cache.update(zip(todo, results))
        return [self.cache[d] for d in dps]


def _evaluate(lib, alpha, dp):
    return macro_cost(lib, dp, alpha)


def _check_archs(spec: DcimSpec) -> tuple[Arch, ...]:
    archs = spec.active_archs
    if not archs:
        raise NoFeasibleDesign(
            f"none of the requested architectures can run {spec.precision.name}",
            {"archs": f"{spec.precision.name} needs {spec.precision.arch.value}"},
        )
    return archs


def feasible_grid(spec: DcimSpec, arch: Arch) -> list[DesignPoint]:
    pts = []
    for h in spec.h_exp_range:
        for l in spec.l_exp_range:
            for k in spec.k_choices:
                dp = _feasible(spec, arch, h, l, k)
                if dp is not None:
                    pts.append(dp)
    return pts


def explain_infeasible(spec: DcimSpec) -> dict:
    """Name the bounds that leave the design space empty."""
    prec = spec.precision
    num = spec.w_store * prec.Bw
    ns = []
    for h in spec.h_exp_range:
        for l in spec.l_exp_range:
            if num % ((1 << h) << l) == 0 and (num >> (h + l)) % prec.Bw == 0:
                ns.append(num >> (h + l))
    if not ns:
        return {"w_store": f"W_store={spec.w_store} admits no N with Bw | N on the H/L grid "
                           f"(H in [2, {spec.h_max}], L in [1, {spec.l_max}])"}
    return {"n_min": f"largest attainable N={max(ns)} is not greater than {spec.n_floor}"}


def _no_feasible(spec: DcimSpec) -> NoFeasibleDesign:
    return NoFeasibleDesign(f"no feasible design for W_store={spec.w_store}, {spec.precision.name}",
                            explain_infeasible(spec))


def evaluate_grid(spec: DcimSpec, lib: TechLibrary = DEFAULT_LIB, cap: int = DEFAULT_CAP,
                  jobs: int = 1) -> list[tuple[DesignPoint, CostVector]]:
    archs = _check_archs(spec)
    size = len(archs) * len(spec.h_exp_range) * len(spec.l_exp_range) * len(spec.k_choices)
    if size > cap:
        raise CapExceeded(f"grid of {size} points exceeds cap {cap}")
    dps = [dp for a in archs for dp in feasible_grid(spec, a)]
    if not dps:
        raise _no_feasible(spec)
    with Evaluator(lib, spec.alpha, jobs) as ev:
        return list(zip(dps, ev(dps)))


def enumerate_bruteforce(spec: DcimSpec, lib: TechLibrary = DEFAULT_LIB, cap: int = DEFAULT_CAP,
                         jobs: int = 1) -> ParetoArchive:
    """Exact frontier of the whole feasible grid."""
    evaluated = evaluate_grid(spec, lib, cap, jobs)
    meta = {
        "method": "enumerate",
        "spec": spec.to_dict(),
        "spec_sha256": spec.digest(lib),
        "evaluated": len(evaluated),
    }
    return ParetoArchive(_nondominated(evaluated), meta)


@dataclass
class _Individual:
    genome: Genome
    dp: DesignPoint
    cost: CostVector | None = None


class _Nsga2:
    def __init__(self, spec: DcimSpec, params: GaParams, arch: Arch, rng: np.random.Generator, evaluate):
        self.spec, self.params, self.arch, self.rng = spec, params, arch, rng
        self.evaluate = evaluate
        self.hs, self.ls, self.nk = spec.h_exp_range, spec.l_exp_range, len(spec.k_choices)

    def _random_gene(self, i: int) -> int:
        if i == 0:
            return int(self.rng.integers(self.hs.start, self.hs.stop))
        if i == 1:
            return int(self.rng.integers(self.ls.start, self.ls.stop))
        return int(self.rng.integers(0, self.nk))

    def _decode(self, g: Genome) -> _Individual | None:
        dp = repair_to_feasible(g, self.spec, self.arch)
        if dp is None:
            return None
        # Lamarckian repair: the genome follows its design point
        return _Individual(genome_of(dp, self.spec), dp)

    def initial(self) -> list[_Individual]:
        pop = []
        fallback = Genome(self.hs.stop - 1, self.ls.stop - 1, 0)
        tries = 0
        while len(pop) < self.params.population:
            tries += 1
            if tries > 1000 * self.params.population:
                ind = self._decode(fallback)
            else:
                ind = self._decode(Genome(*(self._random_gene(i) for i in range(3))))
            if ind is not None:
                pop.append(ind)
        return pop

    def score(self, pop: list[_Individual]) -> tuple[list[int], list[float]]:
        costs = self.evaluate([p.dp for p in pop])
        for p, c in zip(pop, costs):
            p.cost = c
        rank = [0] * len(pop)
        crowd = [0.0] * len(pop)
        for r, front in enumerate(fast_nondominated_sort(costs)):
            for i, d in zip(front, crowding_distance([costs[i] for i in front])):
                rank[i], crowd[i] = r, d
        return rank, crowd

    def _better(self, a: int, b: int, pop, rank, crowd) -> int:
        if rank[a] != rank[b]:
            return a if rank[a] < rank[b] else b
        if crowd[a] != crowd[b]:
            return a if crowd[a] > crowd[b] else b
        ka, kb = sort_key(pop[a].dp, pop[a].cost), sort_key(pop[b].dp, pop[b].cost)
        if ka != kb:
            return a if ka < kb else b
        return min(a, b)

    def _tournament(self, pop, rank, crowd) -> _Individual:
        a, b = (int(v) for v in self.rng.integers(0, len(pop), size=2))
        return pop[self._better(a, b, pop, rank, crowd)]

    def _vary(self, p1: Genome, p2: Genome) -> tuple[Genome, Genome]:
        g1, g2 = [p1.h_exp, p1.l_exp, p1.k_idx], [p2.h_exp, p2.l_exp, p2.k_idx]
        if self.rng.random() < self.params.crossover:
            swap = self.rng.random(3) < 0.5
            for i in range(3):
                if swap[i]:
                    g1[i], g2[i] = g2[i], g1[i]
        for g in (g1, g2):
            hit = self.rng.random(3) < self.params.mutation
            for i in range(3):
                if hit[i]:
                    g[i] = self._random_gene(i)
        return Genome(*g1), Genome(*g2)

    def offspring(self, pop, rank, crowd) -> list[_Individual]:
        kids = []
        while len(kids) < len(pop):
            a = self._tournament(pop, rank, crowd)
            b = self._tournament(pop, rank, crowd)
            for child, parent in zip(self._vary(a.genome, b.genome), (a, b)):
                ind = self._decode(child)
                kids.append(ind if ind is not None else _Individual(parent.genome, parent.dp))
        return kids

    def survivors(self, merged: list[_Individual]) -> list[_Individual]:
        costs = [m.cost for m in merged]
        chosen: list[int] = []
        mu = self.params.population
        for front in fast_nondominated_sort(costs):
            if len(chosen) + len(front) <= mu:
                chosen.extend(front)
                if len(chosen) == mu:
                    break
                continue
            dist = crowding_distance([costs[i] for i in front])
            order = sorted(range(len(front)),
                           key=lambda j: (-dist[j], sort_key(merged[front[j]].dp, costs[front[j]]), front[j]))
            chosen.extend(front[j] for j in order[: mu - len(chosen)])
            break
        return [merged[i] for i in sorted(chosen)]


def nsga2_evolve(spec: DcimSpec, params: GaParams = GaParams(), lib: TechLibrary = DEFAULT_LIB,
                 jobs: int = 1, track_hv: Sequence[float] | None = None) -> ParetoArchive:
    """Per-architecture NSGA-II merged into one external Pareto archive.

    All randomness comes from a single PCG64 stream seeded with
    ``params.seed``; cost evaluation is pure, so results do not depend on
    ``jobs``.  With ``track_hv`` (a reference point) the archive hypervolume
    after every generation is recorded in ``archive.history``.
    """
    archs = _check_archs(spec)
    if not any(feasible_grid(spec, a) for a in archs):
        raise _no_feasible(spec)
    rng = np.random.Generator(np.random.PCG64(params.seed))
    archive: dict[DesignPoint, CostVector] = {}
    history: list[float] = []

    def absorb(pop):
        for p in pop:
            archive[p.dp] = p.cost
        kept = _nondominated(list(archive.items()))
        archive.clear()
        archive.update(kept)
        if track_hv is not None:
            history.append(hypervolume(list(archive.values()), track_hv))

    with Evaluator(lib, spec.alpha, jobs) as ev:
        for arch in archs:
            if not feasible_grid(spec, arch):
                continue
            ga = _Nsga2(spec, params, arch, rng, ev)
            pop = ga.initial()
            rank, crowd = ga.score(pop)
            absorb(pop)
            for _ in range(params.generations):
                kids = ga.offspring(pop, rank, crowd)
                merged = pop + kids
                ga.score(merged)
                pop = ga.survivors(merged)
                rank, crowd = ga.score(pop)
                absorb(kids)
        evaluations = len(ev.cache)

    meta = {
        "method": "nsga2",
        "spec": spec.to_dict(),
        "spec_sha256": spec.digest(lib),
        "seed": params.seed,
        "population": params.population,
        "generations": params.generations,
        "crossover": params.crossover,
        "mutation": params.mutation,
        "rng": "numpy PCG64",
        "evaluated": evaluations,
    }
    return ParetoArchive(list(archive.items()), meta, history)


def hypervolume_ratio(candidate: ParetoArchive, exact: ParetoArchive, margin: float = 0.1) -> float:
    """HV(candidate) / HV(exact) with the reference derived from the exact front."""
    ref = reference_point(exact.costs, margin)
    return hypervolume(candidate.costs, ref) / hypervolume(exact.costs, ref)


def merge_archives(archives: Iterable[ParetoArchive], metadata: dict | None = None) -> ParetoArchive:
    entries = [e for a in archives for e in a.entries]
    return ParetoArchive(_nondominated(entries), dict(metadata or {}))


def with_precision(spec: DcimSpec, name: str) -> DcimSpec:
    return replace(spec, precision=resolve_precision(name))
