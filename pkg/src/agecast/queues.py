"""Encoder-side virtual queue network, packet movement under feedback, and
enumeration of feasible coding actions.

Each (owner, cache set) queue retains up to `buffer_depth` packets, oldest
evicted first.  Transmissions always use the freshest packet of the chosen
queue: only the freshest generation time can reduce the owner's age, and the
delivery count is indifferent to which packet is delivered.  Depth one
reproduces the strict freshest-only discipline; deeper buffers retain
superseded packets so that per-user rate targets near the arrival rate stay
reachable.
"""
from __future__ import annotations

from bisect import insort
from dataclasses import dataclass
from typing import Iterator, NamedTuple

from .config import ContractViolation, members, popcount, set_text


class QueueKey(NamedTuple):
    owner: int
    cached: int  # bitmask of users holding this packet, owner excluded

    def text(self) -> str:
        if self.cached:
            return f"{self.owner + 1}|{set_text(self.cached)}"
        return f"{self.owner + 1}|-"


class Action(NamedTuple):
    """A scheduled transmission: one source queue per served user.

    A single component drawn from an owner's arrival queue is an uncoded
    transmission; two or more components form an XOR packet whose cache sets
    must mutually cover the served group.
    """

    components: tuple[QueueKey, ...]

    @property
    def coded(self) -> bool:
        return len(self.components) > 1

    def owners(self) -> tuple[int, ...]:
        return tuple(c.owner for c in self.components)

    def sort_key(self):
        return (
            self.coded,
            self.owners(),
            tuple(members(c.cached) for c in self.components),
        )

    def encode(self) -> str:
        if not self.coded:
            owner, cached = self.components[0]
            if cached == 0:
                return f"u{owner + 1}"
            return f"r{owner + 1}|{set_text(cached)}"
        return "x" + "+".join(
            f"{o + 1}|{set_text(s)}" for o, s in self.components
        )


def coding_condition_holds(components) -> bool:
    """True iff every component's cache set covers all other served users."""
    group = 0
    for owner, _ in components:
        group |= 1 << owner
    for owner, cached in components:
        rest = group & ~(1 << owner)
        if cached & rest != rest:
            return False
    return True


@dataclass(frozen=True)
class SideInfoGraph:
    """Directed graph over users: arc i->j iff some packet of i is cached at j."""

    out: tuple[int, ...]

    def has_arc(self, i: int, j: int) -> bool:
        return bool(self.out[i] >> j & 1)

    def bidirectional(self) -> tuple[int, ...]:
        m = len(self.out)
        incoming = [0] * m
        for j in range(m):
            oj = self.out[j]
            for i in members(oj):
                incoming[i] |= 1 << j
        return tuple(o & inc for o, inc in zip(self.out, incoming))


class Outcome(NamedTuple):
    d_mask: int                      # users that decoded their own packet
    t: tuple[QueueKey, ...]          # queues whose freshest packet was sent
    delivered_gen: dict              # owner -> generation time of delivery
    moves: tuple[tuple, ...]         # (owner, src_mask, dst_mask, gen, kept)


# Memoized structural clique enumeration.  Key: per-user downward closures of
# the nonempty cache sets (a bitmap over rest-masks), plus the size cap.
# Feasibility of a group only depends on whether each member's closure covers
# the rest of the group, so distinct queue layouts with equal closures share
# one table.  Value: canonically ordered tuple of (member_tuple, group_mask).
_CLIQUE_MEMO: dict = {}
_CLIQUE_MEMO_LIMIT = 1 << 17

# members() lookup table for small masks, grown on demand
_MEMBERS_TAB: list[tuple[int, ...]] = [()]

# _SUBSETS_TAB[s] = bitmap with bit r set for every r that is a subset of s
_SUBSETS_TAB: list[int] = [1]


def _members_tab(limit: int):
    tab = _MEMBERS_TAB
    while len(tab) < limit:
        n = len(tab)
        low = n & -n
        if low == n:
            tab.append((low.bit_length() - 1,))
        else:
            tab.append(tab[low] + tab[n ^ low])
    return tab


def _subsets_tab(limit: int):
    tab = _SUBSETS_TAB
    while len(tab) < limit:
        n = len(tab)
        low = n & -n
        below = tab[n ^ low]
        tab.append(below | below << low)
    return tab


def _canon(mask: int):
    return members(mask)


def _max_cliques(adj, nodes: int) -> list[int]:
    """Maximal cliques (as masks) of an undirected graph, pivoted search."""
    out = []

    def grow(r: int, p: int, xx: int):
        if not p and not xx:
            out.append(r)
            return
        pivot_pool = p | xx
        rest = pivot_pool
        best = -1
        best_deg = -1
        while rest:
            v = (rest & -rest).bit_length() - 1
            rest &= rest - 1
            deg = popcount(pivot_pool & adj[v])
            if deg > best_deg:
                best_deg = deg
                best = v
        cand = p & ~adj[best]
        while cand:
            vbit = cand & -cand
            v = vbit.bit_length() - 1
            cand &= cand - 1
            grow(r | vbit, p & adj[v], xx & adj[v])
            p &= ~vbit
            xx |= vbit

    if nodes:
        grow(0, nodes, 0)
    return out


def _enumerate_cliques(closures: tuple, cap: int):
    m = len(closures)
    tab = _members_tab(1 << m)
    out = []
    # mutual single-user coverage gives the bidirectional adjacency
    adj = [0] * m
    nodes = 0
    for i in range(m):
        ci = closures[i]
        if ci <= 1:
            continue
        a = 0
        for j in range(m):
            if j != i and ci >> (1 << j) & 1 and closures[j] >> (1 << i) & 1:
                a |= 1 << j
        if a:
            adj[i] = a
            nodes |= 1 << i

    if cap == 2:
        for i in tab[nodes]:
            ai = adj[i]
            while ai:
                jbit = ai & -ai
                ai &= ai - 1
                j = jbit.bit_length() - 1
                if j > i:
                    out.append(((i, j), (1 << i) | jbit))
        return tuple(out)

    feas: dict[int, bool] = {}
    for cl in _max_cliques(adj, nodes):
        sub = cl
        while sub:
            if sub not in feas:
                mems = tab[sub]
                ok = 2 <= len(mems) <= cap
                if ok:
                    for t in mems:
                        if not closures[t] >> (sub & ~(1 << t)) & 1:
                            ok = False
                            break
                feas[sub] = ok
            sub = (sub - 1) & cl

    for cmask, ok in feas.items():
        if not ok:
            continue
        mems = tab[cmask]
        if len(mems) < cap:
            ext = nodes & ~cmask
            extendable = False
            while ext:
                vbit = ext & -ext
                ext &= ext - 1
                if feas.get(cmask | vbit):
                    extendable = True
                    break
            if extendable:
                continue
        out.append((mems, cmask))
    out.sort()
    return tuple(out)


class VirtualQueueNetwork:
    """State of all virtual queues {Q_(i,S)} at the encoder."""

    def __init__(self, m: int, buffer_depth: int = 1):
        self.m = m
        self.depth = buffer_depth
        # per queue: generation times ascending; freshest is the last entry
        self.q0: list[list[int]] = [[] for _ in range(m)]
        self.sq: list[dict[int, list[int]]] = [dict() for _ in range(m)]
        self._skeys: list[tuple | None] = [()] * m  # cache sets, canonical order
        self._closures: list[int | None] = [0] * m
        _subsets_tab(1 << m)
        _members_tab(1 << m)

    # -- state inspection ---------------------------------------------------

    def gen_of(self, key: QueueKey) -> int | None:
        owner, cached = key
        if cached == 0:
            lst = self.q0[owner]
        else:
            lst = self.sq[owner].get(cached)
        return lst[-1] if lst else None

    def sorted_cache_sets(self, i: int) -> tuple:
        ks = self._skeys[i]
        if ks is None:
            ks = self._skeys[i] = tuple(sorted(self.sq[i], key=_canon))
        return ks

    def nonempty_keys(self) -> Iterator[tuple[QueueKey, int]]:
        """(key, freshest generation time) for every populated queue."""
        for i in range(self.m):
            lst = self.q0[i]
            if lst:
                yield QueueKey(i, 0), lst[-1]
            for s in self.sorted_cache_sets(i):
                yield QueueKey(i, s), self.sq[i][s][-1]

    def packets(self) -> Iterator[tuple[QueueKey, int]]:
        """(key, generation time) for every retained packet."""
        for i in range(self.m):
            for g in self.q0[i]:
                yield QueueKey(i, 0), g
            for s in self.sorted_cache_sets(i):
                for g in self.sq[i][s]:
                    yield QueueKey(i, s), g

    def closure_key(self) -> tuple:
        cs = self._closures
        tab = _SUBSETS_TAB
        for i in range(self.m):
            if cs[i] is None:
                c = 0
                for s in self.sq[i]:
                    c |= tab[s]
                cs[i] = c
        return tuple(cs)

    # -- mutation -----------------------------------------------------------

    def enqueue_arrival(self, i: int, k: int) -> None:
        """A packet for user i generated at slot k; beyond the buffer depth
        the oldest retained packet is evicted."""
        lst = self.q0[i]
        lst.append(k)
        if len(lst) > self.depth:
            del lst[0]

    def set_queue(self, owner: int, cached: int, gens) -> None:
        """Force one queue's content (None or [] empties it); setup helper."""
        lst = sorted(gens) if isinstance(gens, (list, tuple)) else (
            [] if gens is None else [gens]
        )
        if cached == 0:
            self.q0[owner][:] = lst
            return
        if lst:
            self.sq[owner][cached] = lst
        else:
            self.sq[owner].pop(cached, None)
        self._skeys[owner] = None
        self._closures[owner] = None

    def _place(self, owner: int, dst: int, gen: int, moves, src: int) -> None:
        d = self.sq[owner]
        lst = d.get(dst)
        kept = True
        if lst is None:
            d[dst] = [gen]
            self._skeys[owner] = None
            self._closures[owner] = None
        else:
            insort(lst, gen)
            if len(lst) > self.depth:
                kept = lst[0] != gen
                del lst[0]
        moves.append((owner, src, dst, gen, kept))

    def _pop(self, owner: int, cached: int) -> None:
        """Remove the freshest packet; drop the key when the queue empties."""
        lst = self.sq[owner][cached]
        lst.pop()
        if not lst:
            del self.sq[owner][cached]
            self._skeys[owner] = None
            self._closures[owner] = None

    # -- graph and actions ----------------------------------------------------

    def build_graph(self) -> SideInfoGraph:
        return SideInfoGraph(
            tuple(self._out_mask(i) for i in range(self.m))
        )

    def _out_mask(self, i: int) -> int:
        o = 0
        for s in self.sq[i]:
            o |= s
        return o

    def clique_table(self, cap: int):
        """Memoized feasible-and-maximal coded groups for the current queues.

        Maximality is with respect to the size cap: groups of exactly cap
        users are kept whenever feasible, smaller ones only when no feasible
        extension within the cap exists.
        """
        key = (self.closure_key(), cap)
        hit = _CLIQUE_MEMO.get(key)
        if hit is None:
            if len(_CLIQUE_MEMO) >= _CLIQUE_MEMO_LIMIT:
                _CLIQUE_MEMO.clear()
            hit = _enumerate_cliques(key[0], cap)
            _CLIQUE_MEMO[key] = hit
        return hit

    def select_component_queue(
        self, member: int, clique_mask: int, h_member: int, k: int
    ) -> QueueKey:
        """Pick the qualifying queue with maximal age-gain; ties favour the
        canonically smallest cache set."""
        rest = clique_mask & ~(1 << member)
        best_s = None
        best_gain = -1
        d = self.sq[member]
        for s in self.sorted_cache_sets(member):
            if s & rest != rest:
                continue
            gain = h_member + d[s][-1] - k
            if gain < 0:
                gain = 0
            if gain > best_gain:
                best_gain = gain
                best_s = s
        if best_s is None:
            raise ContractViolation(
                f"no qualifying queue for user {member + 1} in group "
                f"{set_text(clique_mask)}"
            )
        return QueueKey(member, best_s)

    def enumerate_actions(
        self,
        clique_cap: int,
        h,
        k: int,
        include_singleton_retx: bool = False,
    ) -> list[Action]:
        """All schedulable actions in canonical order.

        Uncoded transmissions for every nonempty arrival queue, plus one XOR
        action per maximal feasible group of the side-information graph (with
        the per-member source queue chosen by age-gain).  Re-sending an
        already-cached packet on its own is excluded unless explicitly asked
        for.
        """
        acts = []
        for i in range(self.m):
            if self.q0[i]:
                acts.append(Action((QueueKey(i, 0),)))
        if include_singleton_retx:
            for i in range(self.m):
                for s in self.sorted_cache_sets(i):
                    acts.append(Action((QueueKey(i, s),)))
        if clique_cap >= 2:
            for mems, cmask in self.clique_table(clique_cap):
                comps = tuple(
                    self.select_component_queue(t, cmask, h[t], k) for t in mems
                )
                acts.append(Action(comps))
        acts.sort(key=Action.sort_key)
        return acts

    # -- outcome application --------------------------------------------------

    def apply_outcome(self, action: Action | None, received: int, k: int) -> Outcome:
        """Move packets according to one slot's feedback.

        A served user that received decodes its own packet; a missed packet
        propagates to the queue keyed by its (enlarged) cache set when any
        receiver can fully decode it, and is otherwise retained in place.
        """
        if action is None:
            return Outcome(0, (), {}, ())
        comps = action.components
        d_mask = 0
        delivered: dict[int, int] = {}
        moves: list[tuple] = []
        t = comps
        if len(comps) == 1:
            owner, cached = comps[0]
            if cached == 0:
                lst = self.q0[owner]
                if not lst:
                    raise ContractViolation(f"u{owner + 1} transmitted while empty")
                gen = lst[-1]
                if received >> owner & 1:
                    d_mask = 1 << owner
                    delivered[owner] = gen
                    lst.pop()
                else:
                    caught = received & ~(1 << owner)
                    if caught:
                        lst.pop()
                        self._place(owner, caught, gen, moves, 0)
            else:
                lst = self.sq[owner].get(cached)
                if not lst:
                    raise ContractViolation(
                        f"{QueueKey(owner, cached).text()} transmitted while empty"
                    )
                gen = lst[-1]
                if received >> owner & 1:
                    d_mask = 1 << owner
                    delivered[owner] = gen
                    self._pop(owner, cached)
                else:
                    fresh = received & ~(1 << owner) & ~cached
                    if fresh:
                        self._pop(owner, cached)
                        self._place(owner, cached | fresh, gen, moves, cached)
        else:
            gens = []
            for owner, cached in comps:
                lst = self.sq[owner].get(cached)
                if not lst:
                    raise ContractViolation(
                        f"{QueueKey(owner, cached).text()} transmitted while empty"
                    )
                gens.append(lst[-1])
            # cache-set intersections of the other components, per component
            n = len(comps)
            pref = [~0] * (n + 1)
            for u in range(n):
                pref[u + 1] = pref[u] & comps[u].cached
            suff = [~0] * (n + 1)
            for u in range(n - 1, -1, -1):
                suff[u] = suff[u + 1] & comps[u].cached
            for u, (owner, cached) in enumerate(comps):
                gen = gens[u]
                if received >> owner & 1:
                    d_mask |= 1 << owner
                    delivered[owner] = gen
                    self._pop(owner, cached)
                else:
                    others = pref[u] & suff[u + 1]
                    decoders = received & ~cached & ~(1 << owner) & others
                    if decoders:
                        self._pop(owner, cached)
                        self._place(owner, cached | decoders, gen, moves, cached)
        return Outcome(d_mask, t, delivered, tuple(moves))
