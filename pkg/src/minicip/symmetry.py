"""Symmetry handling: permutation groups, SST cuts, symresacks.

Permutations act on variable indices; ``Permutation.image[i]`` is the image
of ``i``.  A permutation acts on a vector by ``gamma(x)[gamma(i)] = x[i]``,
i.e. ``gamma(x)_i = x[gamma^-1(i)]``.  Symresack constraints require
``x >=_lex gamma(x)`` in variable-index order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from . import kernels
from .relax import Cut

MIN_INDEX = "min_index"
MAX_ORBIT = "max_orbit"


@dataclass(frozen=True)
class Permutation:
    image: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.image) != list(range(len(self.image))):
            raise ValueError("not a permutation")

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def from_cycles(cls, n: int, cycles: Iterable[Sequence[int]]) -> "Permutation":
        img = list(range(n))
        seen: set[int] = set()
        for cyc in cycles:
            for k, a in enumerate(cyc):
                if a in seen or not 0 <= a < n:
                    raise ValueError(f"bad cycle element {a}")
                seen.add(a)
                img[a] = cyc[(k + 1) % len(cyc)]
        return cls(tuple(img))

    @property
    def n(self) -> int:
        return len(self.image)

    def __call__(self, i: int) -> int:
        return self.image[i]

    def __mul__(self, other: "Permutation") -> "Permutation":
        """Composition: (self * other)(i) = self(other(i))."""
        return Permutation(tuple(self.image[j] for j in other.image))

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, g in enumerate(self.image):
            inv[g] = i
        return Permutation(tuple(inv))

    def is_identity(self) -> bool:
        return all(i == g for i, g in enumerate(self.image))

    @property
    def support(self) -> list[int]:
        return [i for i, g in enumerate(self.image) if i != g]

    def act(self, x: Sequence[float]) -> list[float]:
        out = [0.0] * self.n
        for i, g in enumerate(self.image):
            out[g] = x[i]
        return out

    def cycles(self) -> list[tuple[int, ...]]:
        seen = [False] * self.n
        out = []
        for i in range(self.n):
            if seen[i] or self.image[i] == i:
                continue
            cyc = [i]
            seen[i] = True
            j = self.image[i]
            while j != i:
                cyc.append(j)
                seen[j] = True
                j = self.image[j]
            out.append(tuple(cyc))
        return out

    def cycle_text(self) -> str:
        """1-based cycle notation, e.g. ``(1 2)(3 4)``; identity prints ``()``."""
        cyc = self.cycles()
        if not cyc:
            return "()"
        return "".join("(" + " ".join(str(a + 1) for a in c) + ")" for c in cyc)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb


def compute_orbits(generators: Sequence[Permutation], n: int | None = None) -> list[list[int]]:
    """Orbit partition of ``{0..n-1}`` (sorted, singletons included)."""
    if n is None:
        n = generators[0].n if generators else 0
    uf = _UnionFind(n)
    for g in generators:
        for i, j in enumerate(g.image):
            uf.union(i, j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(uf.find(i), []).append(i)
    return sorted(groups.values())


@dataclass
class SymComponent:
    generators: list[Permutation]
    affected: list[int]

    @property
    def n(self) -> int:
        return self.generators[0].n if self.generators else 0


def components(generators: Sequence[Permutation], n: int) -> list[SymComponent]:
    """Split generators into factors acting on pairwise disjoint variable sets."""
    uf = _UnionFind(n)
    for g in generators:
        sup = g.support
        for a in sup[1:]:
            uf.union(sup[0], a)
    comps: dict[int, list[Permutation]] = {}
    for g in generators:
        sup = g.support
        if sup:
            comps.setdefault(uf.find(sup[0]), []).append(g)
    out = []
    for r in sorted(comps):
        gens = comps[r]
        out.append(SymComponent(gens, sorted({j for g in gens for j in g.support})))
    return out


def _sims_filter(perms: Iterable[Permutation], n: int) -> list[Permutation]:
    """Reduce a generating set to at most n(n-1)/2 elements (same group)."""
    table: dict[tuple[int, int], Permutation] = {}
    for g in perms:
        while not g.is_identity():
            i = next(k for k in range(n) if g.image[k] != k)
            key = (i, g.image[i])
            h = table.get(key)
            if h is None:
                table[key] = g
                break
            g = h.inverse() * g
    return [table[k] for k in sorted(table)]


def stabilizer(generators: Sequence[Permutation], point: int, n: int) -> list[Permutation]:
    """Generators of the pointwise stabilizer of ``point`` (Schreier's lemma)."""
    if not generators:
        return []
    transversal = {point: Permutation.identity(n)}
    queue = [point]
    while queue:
        b = queue.pop(0)
        for g in generators:
            c = g.image[b]
            if c not in transversal:
                transversal[c] = g * transversal[b]
                queue.append(c)
    schreier = []
    for b in sorted(transversal):
        ub = transversal[b]
        for g in generators:
            s = transversal[g.image[b]].inverse() * g * ub
            if not s.is_identity():
                schreier.append(s)
    return _sims_filter(schreier, n)


@dataclass
class SSTCut:
    """``x[leader] >= x[follower]``."""

    leader: int
    follower: int

    def as_cut(self) -> Cut:
        return Cut({self.leader: -1.0, self.follower: 1.0}, rhs=0.0, origin="sst")


@dataclass
class SstCutSet:
    leaders: list[int]
    orbits: list[list[int]]
    cuts: list[SSTCut]

    def __len__(self) -> int:
        return len(self.cuts)

    def pairs(self) -> list[tuple[int, int]]:
        return [(c.leader, c.follower) for c in self.cuts]


def build_sst_cuts(component, leader_rule: str = MIN_INDEX, n: int | None = None,
                   domains: Sequence[tuple[float, float, bool]] | None = None) -> SstCutSet:
    """SST cuts along a stabilizer chain of the group generated by ``component``.

    ``component`` is a :class:`SymComponent` or a list of generators.
    ``domains`` holds (lb, ub, integer) per variable; all variables of a
    nontrivial orbit must share it.
    """
    if leader_rule not in (MIN_INDEX, MAX_ORBIT):
        raise ValueError(f"unknown leader rule {leader_rule!r}")
    gens = list(component.generators if isinstance(component, SymComponent) else component)
    gens = [g for g in gens if not g.is_identity()]
    if n is None:
        n = gens[0].n if gens else 0
    if domains is not None:
        for orbit in compute_orbits(gens, n):
            if len({tuple(domains[j]) for j in orbit}) > 1:
                raise ValueError("symmetric variables with different domains")
    out = SstCutSet([], [], [])
    while gens:
        orbits = [o for o in compute_orbits(gens, n) if len(o) > 1]
        if not orbits:
            break
        if leader_rule == MIN_INDEX:
            orbit = min(orbits, key=lambda o: o[0])
        else:
            orbit = min(orbits, key=lambda o: (-len(o), o[0]))
        leader = orbit[0]
        out.leaders.append(leader)
        out.orbits.append(orbit)
        out.cuts.extend(SSTCut(leader, j) for j in orbit[1:])
        gens = stabilizer(gens, leader, n)
    return out


# ---------------------------------------------------------------------------
# symresacks

INFEASIBLE = None


def _inverse_image(perm: Permutation) -> list[int]:
    return list(perm.inverse().image)


def _fixed_from_bounds(bounds: Sequence[tuple[float, float]]) -> list[int]:
    fixed = []
    for lo, hi in bounds:
        if lo > 0.5:
            fixed.append(1)
        elif hi < 0.5:
            fixed.append(0)
        else:
            fixed.append(-1)
    return fixed


def lex_feasible(perm: Permutation, fixed: Sequence[int]) -> bool:
    """Whether some 0/1 completion of ``fixed`` (-1 free) satisfies x >=_lex gamma(x)."""
    return bool(kernels.lex_feasible(_inverse_image(perm), list(fixed)))


def propagate_lex(perm: Permutation, bounds: Sequence[tuple[float, float]]):
    """All fixings implied by ``x >=_lex gamma(x)`` on binary bounds.

    Returns a dict ``{var: value}`` of new fixings, or ``None`` when no
    completion exists.
    """
    fixed = _fixed_from_bounds(bounds)
    ok, new = kernels.lex_propagate(_inverse_image(perm), fixed)
    if not ok:
        return INFEASIBLE
    return {j: int(v) for j, v in enumerate(new) if fixed[j] == -1 and v != -1}


def separate_cover(perm: Permutation, xstar: Sequence[float], tol: float = 1e-6,
                   return_ops: bool = False):
    """Most violated minimal cover inequality of the symresack, or None.

    The inequality reads ``sum_{C1} x - sum_{C0} x <= |C1| - 1``; its
    violation at ``xstar`` is ``1 - cost``, where ``cost`` is minimised over
    prefixes by one sweep that merges components of the auxiliary graph.
    """
    inv = _inverse_image(perm)
    bestk, cost, ops = kernels.cover_scan(inv, [float(v) for v in xstar])
    cut = None
    if bestk >= 0 and cost < 1.0 - tol:
        cut = _cover_cut(perm, inv, xstar, bestk)
    if return_ops:
        return cut, ops
    return cut


def _cover_cut(perm, inv, xstar, k) -> Cut:
    n = perm.n
    uf = _UnionFind(n)
    for i in range(k):
        uf.union(i, inv[i])
    c0_root, c1_root = uf.find(k), uf.find(inv[k])
    comps: dict[int, list[int]] = {}
    for i in range(n):
        comps.setdefault(uf.find(i), []).append(i)
    coeffs: dict[int, float] = {}
    ones = 0
    for root, members in comps.items():
        if root == c0_root:
            val = 0
        elif root == c1_root:
            val = 1
        elif len(members) == 1:
            continue  # not linked to any earlier position; stays free
        else:
            s0 = sum(xstar[j] for j in members)
            s1 = sum(1.0 - xstar[j] for j in members)
            val = 0 if s0 <= s1 else 1
        for j in members:
            coeffs[j] = 1.0 if val else -1.0
        ones += len(members) if val else 0
    return Cut(coeffs, rhs=float(ones - 1), origin="cover")


def cover_is_valid(perm: Permutation, cut: Cut) -> bool:
    """Exhaustive check that no lex-feasible 0/1 point violates ``cut``."""
    import itertools

    n = perm.n
    for bits in itertools.product((0, 1), repeat=n):
        if list(bits) >= perm.act(bits) and cut.activity(bits) > cut.rhs + 1e-9:
            return False
    return True


def symmetric_domains_ok(instance, perm: Permutation) -> bool:
    """Bounds and integrality are invariant under ``perm``."""
    vs = instance.variables
    return all((vs[i].lb, vs[i].ub, vs[i].integer) == (vs[g].lb, vs[g].ub, vs[g].integer)
               for i, g in enumerate(perm.image))


def objective_invariant(instance, perm: Permutation, tol: float = 1e-12) -> bool:
    c = instance.objective
    return all(abs(c.get(i, 0.0) - c.get(g, 0.0)) <= tol for i, g in enumerate(perm.image))


@dataclass
class SymmetryHandler:
    """Per-component method choice: symresacks on binary components, SST otherwise."""

    generators: list[Permutation]
    n: int
    sst: list[SSTCut]
    symresacks: list[Permutation]

    @classmethod
    def build(cls, instance, generators: Sequence[Permutation], leader_rule: str = MIN_INDEX):
        n = instance.n
        gens = [g for g in generators if not g.is_identity()]
        for g in gens:
            if g.n != n:
                raise ValueError("permutation length differs from variable count")
            if not symmetric_domains_ok(instance, g):
                raise ValueError("permutation maps variables with different domains")
        domains = [(v.lb, v.ub, v.integer) for v in instance.variables]
        sst: list[SSTCut] = []
        sacks: list[Permutation] = []
        for comp in components(gens, n):
            if all(instance.variables[j].binary for j in comp.affected):
                sacks.extend(comp.generators)
            else:
                sst.extend(build_sst_cuts(comp, leader_rule, n, domains).cuts)
        return cls(gens, n, sst, sacks)

    def cuts(self) -> list[Cut]:
        return [c.as_cut() for c in self.sst]

    def propagate(self, bounds: list[tuple[float, float]]):
        """Fixpoint of symresack propagation; None if infeasible."""
        changed = True
        out: dict[int, int] = {}
        while changed:
            changed = False
            for g in self.symresacks:
                fix = propagate_lex(g, bounds)
                if fix is None:
                    return None
                for j, v in fix.items():
                    bounds[j] = (float(v), float(v))
                    out[j] = v
                    changed = True
        return out

    def separate(self, x: Sequence[float]) -> list[Cut]:
        cuts = []
        for g in self.symresacks:
            c = separate_cover(g, x)
            if c is not None:
                cuts.append(c)
        return cuts
