"""Query rewriting for linear rules plus transitivity.

Pipeline: split the rules, compile one pattern per transitive predicate,
patternize rule bodies, saturate the pattern definitions with internal
rewriting, then rewrite the patternized query with external rewriting
until no new PCQ (up to isomorphism) appears.

Two implementations of external rewriting live here. The production one
searches minimally-unifiable instances directly, growing a piece from a
seed and forcing exactly the extensions the piece condition demands. The
literal one enumerates instances of interest, classifies every unifier
and then replaces each relevant repeatable pattern by cases (i)-(iv); it
is slow and exists so tests can compare the two.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .analysis import RuleSplit, RuleSplitError, Safety, is_safe, normalize_heads, split_rules
from .model import CONST, VAR, M1, M2, Atom, ConjunctiveQuery, ExistentialRule, Fresh, Term
from .patterns import (
    Instance,
    PatternCQ,
    PatternRule,
    PatternSet,
    Repeatable,
    canonical_atom,
    chain_bound,
    init_pattern_set,
    instances_of_interest,
    instantiate,
    patternize,
    patternize_rule,
    reanchor,
)
from .unification import TermPartition, enumerate_piece_unifiers, substitution_of

MODIFIED = "modified"
UNMODIFIED = "unmodified"
CASES = ("i", "ii", "iii", "iv")


class InvariantViolation(AssertionError):
    """An internal invariant of the rewriting procedure does not hold."""


class NonContiguousBlock(InvariantViolation):
    """The relevant steps of one repeatable pattern do not form a single run.

    Happens when both ends of a chain land in existential classes, e.g. a
    loop P+[t,t] whose first and last steps touch t.
    """


@dataclass(frozen=True)
class RewriterConfig:
    mode: str = MODIFIED
    max_external_steps: int | None = None
    max_pcq_count: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in (MODIFIED, UNMODIFIED):
            raise ValueError(f"unknown mode {self.mode!r}")

    def limits(self, query_size: int) -> tuple[int | None, int | None]:
        if self.mode == MODIFIED:
            return self.max_external_steps, self.max_pcq_count
        steps = self.max_external_steps if self.max_external_steps is not None else 10 * max(query_size, 1)
        count = self.max_pcq_count if self.max_pcq_count is not None else 10000
        return steps, count


# internal rewriting -----------------------------------------------------------


def freshen_pattern_rule(rule: PatternRule, taken: Iterable[str], prefix: str = "W") -> PatternRule:
    fresh = Fresh(prefix, taken)
    ren: dict[Term, Term] = {}
    for t in (*rule.body.args, *rule.head.args):
        if t.kind == VAR and t not in ren:
            ren[t] = fresh()
    return rule.substitute(ren)


def _class_state(part: TermPartition, existentials: frozenset[Term], head_vars: frozenset[Term]):
    """Return (dead, roots of existential classes)."""
    roots = set()
    for root, cls in part.groups().items():
        consts = sum(1 for t in cls if t.kind == CONST)
        if consts > 1:
            return True, roots
        ex = cls & existentials
        if ex:
            if len(ex) > 1 or any(t.kind != VAR for t in cls) or (cls & head_vars) - ex:
                return True, roots
            roots.add(root)
    return False, roots


def internal_rewritings(ps: PatternSet, name: str, rule: PatternRule) -> list[Atom]:
    """Atoms that one internal rewriting step may add to the definition of ``name``.

    Chains of definition atoms run from #1 to #2. A chain is unified as a
    whole with the rule head; its inner points must fall into existential
    classes (otherwise the chain is not a single piece), while #1 and #2
    must stay apart and away from existential variables.
    """
    defn = ps[name]
    taken = {t.name for a in defn.atoms for t in a.args}
    rule = freshen_pattern_rule(rule, taken)
    head = rule.head
    cands = defn.with_predicate(head.pred)
    if not cands:
        return []
    bound = chain_bound(head.arity, len(cands))
    existentials = rule.existentials
    head_vars = frozenset(t for t in head.args if t.kind == VAR)
    found: dict[Atom, None] = {}
    fresh = Fresh("Y", taken | {t.name for t in rule.variables()})

    def unify_into(part: TermPartition, atom: Atom) -> TermPartition:
        part = part.copy()
        for s, t in zip(atom.args, head.args):
            part.union(s, t)
        return part

    def emit(part: TermPartition) -> None:
        if part.same(M1, M2):
            return
        sigma = substitution_of(part)
        body = rule.body.substitute(sigma)
        if isinstance(body, Repeatable):
            ends = (body.t1, body.t2)
            if ends == (M1, M2):
                new = ps[body.name].atoms
            elif ends == (M2, M1):
                swap = {M1: M2, M2: M1}
                new = tuple(a.substitute(swap) for a in ps[body.name].atoms)
            else:
                raise InvariantViolation(f"repeatable body {body!r} lost its external terms")
        else:
            new = (body,)
        for a in new:
            if M1 not in a.args or M2 not in a.args:
                raise InvariantViolation(f"added atom {a!r} misses a marker")
            found.setdefault(canonical_atom(a), None)

    def grow(part: TermPartition, start: Term, depth: int) -> None:
        for a in cands:
            # close the chain at #2
            last = unify_into(part, instantiate(a, start, M2, fresh))
            dead, roots = _class_state(last, existentials, head_vars)
            if not dead and last.find(M1) not in roots and last.find(M2) not in roots:
                emit(last)
            if depth + 1 < bound:
                mid = fresh()
                nxt = unify_into(part, instantiate(a, start, mid, fresh))
                dead, roots = _class_state(nxt, existentials, head_vars)
                if not dead and nxt.find(mid) in roots and nxt.find(M1) not in roots:
                    grow(nxt, mid, depth + 1)

    root = TermPartition()
    root.add(M1)
    root.add(M2)
    grow(root, M1, 0)
    return sorted(found)


def internal_rewrite_step(ps: PatternSet, name: str, rule: PatternRule) -> set[PatternSet]:
    """One pattern set per atom the step can add to ``name``'s definition."""
    current = set(ps[name].atoms)
    return {ps.with_atoms(name, [a]) for a in internal_rewritings(ps, name, rule) if a not in current}


def saturate_patterns(ps: PatternSet, rules: Iterable[PatternRule]) -> tuple[PatternSet, int]:
    """Apply internal rewriting until no definition grows; returns (set, rounds)."""
    rules = list(rules)
    rounds = 0
    changed = True
    while changed:
        changed = False
        rounds += 1
        for name in list(ps):
            for rule in rules:
                current = set(ps[name].atoms)
                new = [a for a in internal_rewritings(ps, name, rule) if a not in current]
                if new:
                    ps = ps.with_atoms(name, new)
                    changed = True
    return ps, rounds


# external rewriting -----------------------------------------------------------


@dataclass(frozen=True)
class Involvement:
    """How one repeatable pattern takes part in a minimally-unifiable instance."""

    rep: Repeatable
    case: str
    start: Term
    end: Term
    stubs: tuple[Repeatable, ...]
    block: tuple[Atom, ...]


@dataclass(frozen=True)
class Candidate:
    """A minimally-unifiable instance together with its unifier."""

    plain: frozenset[Atom]
    involved: tuple[Involvement, ...]
    untouched: frozenset[Repeatable]
    others: frozenset[Atom]
    partition: frozenset[frozenset[Term]]
    rule: PatternRule = field(compare=False)

    @property
    def q_prime(self) -> frozenset[Atom]:
        return self.plain | frozenset(a for inv in self.involved for a in inv.block)

    def instance(self) -> PatternCQ:
        atoms = set(self.plain) | set(self.others)
        reps = set(self.untouched)
        for inv in self.involved:
            atoms.update(inv.block)
            reps.update(inv.stubs)
        return PatternCQ(atoms, reps)

    def substitution(self) -> dict[Term, Term]:
        return substitution_of(self.partition)

    def existential_terms(self) -> set[Term]:
        ex = self.rule.existentials
        return {t for cls in self.partition if cls & ex for t in cls if t not in ex}


@dataclass(frozen=True)
class Rewriting:
    result: PatternCQ
    excluded: bool
    candidate: Candidate


def _stubs(rep: Repeatable, case: str, x1: Term, x2: Term) -> tuple[Term, Term, tuple[Repeatable, ...]]:
    if case == "i":
        return x1, x2, (Repeatable(rep.name, rep.t1, x1), Repeatable(rep.name, x2, rep.t2))
    if case == "ii":
        return x1, rep.t2, (Repeatable(rep.name, rep.t1, x1),)
    if case == "iii":
        return rep.t1, x2, (Repeatable(rep.name, x2, rep.t2),)
    return rep.t1, rep.t2, ()


def _partition(atoms: Iterable[Atom], head: Atom) -> TermPartition:
    part = TermPartition()
    for a in atoms:
        for s, t in zip(a.args, head.args):
            part.union(s, t)
    return part


def _connected(atoms: list[Atom], ex_terms: set[Term]) -> bool:
    if len(atoms) <= 1:
        return True
    seen = {0}
    todo = [0]
    while todo:
        i = todo.pop()
        vs = {t for t in atoms[i].args if t in ex_terms}
        for j, b in enumerate(atoms):
            if j not in seen and vs & set(b.args):
                seen.add(j)
                todo.append(j)
    return len(seen) == len(atoms)


class _Search:
    """Direct enumeration of minimally-unifiable instances for one PCQ and rule."""

    def __init__(self, pcq: PatternCQ, ps: PatternSet, rule: PatternRule) -> None:
        self.pcq = pcq
        self.rule = rule
        self.head = rule.head
        self.existentials = rule.existentials
        self.head_vars = frozenset(t for t in self.head.args if t.kind == VAR)
        self.plain = sorted(pcq.atoms)
        self.reps = sorted(pcq.repeatables)
        self.cands = [ps[r.name].with_predicate(self.head.pred) for r in self.reps]
        self.bounds = [chain_bound(self.head.arity, len(c)) for c in self.cands]
        self.taken = {t.name for t in pcq.variables()} | {t.name for t in rule.variables()}
        self.seen: set = set()
        self.results: dict = {}
        self.internal_skipped = 0
        self._blocks: dict = {}
        self._prefixes: dict = {}

    # block construction is a pure function of (rep index, case, sequence)
    def block(self, ri: int, case: str, seq: tuple[int, ...]) -> Involvement:
        key = (ri, case, seq)
        if key not in self._blocks:
            self._blocks[key] = self._make_block(ri, case, seq)
        return self._blocks[key]

    def _make_block(self, ri: int, case: str, seq: tuple[int, ...]) -> Involvement:
        rep = self.reps[ri]
        fresh = Fresh(f"Z{ri}_", self.taken)
        x1, x2 = fresh(), fresh()
        start, end, stubs = _stubs(rep, case, x1, x2)
        atoms = []
        point = start
        for k, ai in enumerate(seq):
            nxt = end if k == len(seq) - 1 else fresh()
            atoms.append(instantiate(self.cands[ri][ai], point, nxt, fresh))
            point = nxt
        return Involvement(rep, case, start, end, stubs, tuple(atoms))

    def open_prefix(self, ri: int, case: str, seq: tuple[int, ...]) -> list[Atom]:
        """Atoms of a partial block whose last point is still an inner point."""
        key = (ri, case, seq)
        if key in self._prefixes:
            return self._prefixes[key]
        rep = self.reps[ri]
        fresh = Fresh(f"Z{ri}_", self.taken)
        x1, x2 = fresh(), fresh()
        start, _, _ = _stubs(rep, case, x1, x2)
        atoms = []
        point = start
        for ai in seq:
            nxt = fresh()
            atoms.append(instantiate(self.cands[ri][ai], point, nxt, fresh))
            point = nxt
        self._prefixes[key] = atoms
        return atoms

    def evaluate(self, plain: frozenset[int], inv: dict[int, tuple[str, tuple[int, ...]]]):
        """Classify a state: ('dead',), ('forced', atom idx), ('branch', rep idx, cases), ('done', ...)."""
        invs = {ri: self.block(ri, c, s) for ri, (c, s) in inv.items()}
        q_prime = [self.plain[i] for i in sorted(plain)]
        for ri in sorted(invs):
            q_prime.extend(invs[ri].block)
        part = _partition(q_prime, self.head)
        dead, roots = _class_state(part, self.existentials, self.head_vars)
        if dead:
            return ("dead",)
        if not roots:
            return ("done", invs, part, q_prime)
        terms = part.terms()

        def ex(t: Term) -> bool:
            return t in terms and t.kind == VAR and part.find(t) in roots

        for inv_ in invs.values():
            for stub in inv_.stubs:
                if ex(stub.t1) or ex(stub.t2):
                    return ("dead",)
        for i, a in enumerate(self.plain):
            if i in plain:
                continue
            if any(ex(t) for t in a.args):
                if a.pred == self.head.pred and a.arity == self.head.arity:
                    return ("forced", i)
                return ("dead",)
        for ri, rep in enumerate(self.reps):
            if ri in invs:
                continue
            s, e = ex(rep.t1), ex(rep.t2)
            if s or e:
                if not self.cands[ri]:
                    return ("dead",)
                if s and e:
                    cases = ("iv",)
                elif s:
                    cases = ("iii", "iv")
                else:
                    cases = ("ii", "iv")
                return ("branch", ri, cases)
        return ("done", invs, part, q_prime)

    def quick_dead(self, plain: frozenset[int], inv: dict, extra: list[Atom]) -> bool:
        atoms = [self.plain[i] for i in plain] + extra
        for ri, (c, s) in inv.items():
            atoms.extend(self.block(ri, c, s).block)
        part = _partition(atoms, self.head)
        return _class_state(part, self.existentials, self.head_vars)[0]

    def blocks(self, plain: frozenset[int], inv: dict, ri: int, cases: Iterable[str]) -> Iterator[tuple[str, tuple]]:
        """Complete blocks for pattern ri, pruned on partial chains that are already dead."""
        n = len(self.cands[ri])
        bound = self.bounds[ri]
        for case in cases:
            stack: list[tuple[int, ...]] = [()]
            while stack:
                prefix = stack.pop()
                for ai in range(n):
                    seq = prefix + (ai,)
                    yield case, seq
                    if len(seq) < bound and not self.quick_dead(plain, inv, self.open_prefix(ri, case, seq)):
                        stack.append(seq)

    def run(self) -> list[Candidate]:
        for i, a in enumerate(self.plain):
            if a.pred == self.head.pred and a.arity == self.head.arity:
                self.visit(frozenset({i}), {})
        for ri in range(len(self.reps)):
            if self.cands[ri]:
                for case, seq in self.blocks(frozenset(), {}, ri, CASES):
                    self.visit(frozenset(), {ri: (case, seq)})
        return [self.results[k] for k in sorted(self.results, key=repr)]

    def visit(self, plain: frozenset[int], inv: dict) -> None:
        stack = [(plain, inv)]
        while stack:
            plain, inv = stack.pop()
            key = (plain, frozenset(inv.items()))
            if key in self.seen:
                continue
            self.seen.add(key)
            verdict = self.evaluate(plain, inv)
            kind = verdict[0]
            if kind == "dead":
                continue
            if kind == "forced":
                stack.append((plain | {verdict[1]}, inv))
                continue
            if kind == "branch":
                _, ri, cases = verdict
                for case, seq in self.blocks(plain, inv, ri, cases):
                    stack.append((plain, {**inv, ri: (case, seq)}))
                continue
            _, invs, part, q_prime = verdict
            self.finish(plain, invs, part, q_prime)

    def finish(self, plain, invs, part: TermPartition, q_prime: list[Atom]) -> None:
        # Q' is a set: steps of one block may expand to the same atom, and an
        # atom equal to a member of Q' (a plain atom or a one-step expansion
        # of another pattern) is consumed with it
        qset = set(q_prime)
        plain = plain | {i for i, a in enumerate(self.plain) if a in qset}
        options = []
        for ri in range(len(self.reps)):
            if ri in invs:
                continue
            hits = [
                self.block(ri, "iv", (ai,))
                for ai in range(len(self.cands[ri]))
                if set(self.block(ri, "iv", (ai,)).block) <= qset
            ]
            if hits:
                options.append((ri, [None] + hits))
        for choice in itertools.product(*(hits for _, hits in options)):
            extra = {ri: inv for (ri, _), inv in zip(options, choice) if inv is not None}
            self._emit(plain, {**invs, **extra}, part, qset)

    def _emit(self, plain, invs, part: TermPartition, qset: set[Atom]) -> None:
        cand = Candidate(
            frozenset(self.plain[i] for i in plain),
            tuple(invs[ri] for ri in sorted(invs)),
            frozenset(r for ri, r in enumerate(self.reps) if ri not in invs),
            frozenset(a for i, a in enumerate(self.plain) if i not in plain),
            part.frozen(),
            self.rule,
        )
        if not _connected(sorted(qset), cand.existential_terms()):
            return
        if is_internal(cand):
            self.internal_skipped += 1
            return
        self.results.setdefault(cand, cand)


def _same(sigma: dict[Term, Term], a: Term, b: Term) -> bool:
    return sigma.get(a, a) == sigma.get(b, b)


def is_internal(cand: Candidate) -> bool:
    """Single pattern, no plain atom, block ends kept apart and non-existential."""
    if cand.plain or len(cand.involved) != 1:
        return False
    inv = cand.involved[0]
    sigma = cand.substitution()
    ex = cand.existential_terms()
    return not _same(sigma, inv.start, inv.end) and inv.start not in ex and inv.end not in ex


def is_excluded(cand: Candidate, pcq: PatternCQ) -> bool:
    """The two exclusion conditions of the modified algorithm."""
    if cand.plain:
        return False
    sigma = cand.substitution()
    if len(cand.involved) == 1:
        inv = cand.involved[0]
        if inv.case != "iv" and _same(sigma, inv.start, inv.end):
            return True
    ex = cand.existential_terms()
    plain_terms = {t for a in pcq.atoms for t in a.args}
    cases = {inv.rep: inv.case for inv in cand.involved}
    for t in sorted({t for r in pcq.repeatables for t in r.args}):
        if t not in ex or t in plain_terms:
            continue
        holders = [r for r in pcq.repeatables if t in r.args]
        ok = True
        for r in holders:
            case = cases.get(r)
            if r.t1 == r.t2 or case is None:
                ok = False
            elif t == r.t2 and case != "ii":
                ok = False
            elif t == r.t1 and case != "iii":
                ok = False
            if not ok:
                break
        if ok:
            return True
    return False


def apply_candidate(cand: Candidate) -> PatternCQ:
    """mu'(Q_i) minus mu'(H), plus mu'(B)."""
    sigma = cand.substitution()
    inst = cand.instance().substitute(sigma)
    head = cand.rule.head.substitute(sigma)
    body = cand.rule.body.substitute(sigma)
    atoms = {a for a in inst.atoms if a != head}
    reps = set(inst.repeatables)
    if isinstance(body, Repeatable):
        reps.add(body)
    else:
        atoms.add(body)
    return PatternCQ(atoms, reps).canonical_copy()


def external_candidates(pcq: PatternCQ, ps: PatternSet, rule: PatternRule) -> list[Candidate]:
    rule = freshen_pattern_rule(rule, {t.name for t in pcq.variables()})
    return _Search(pcq, ps, rule).run()


def external_rewritings(pcq: PatternCQ, ps: PatternSet, rule: PatternRule) -> list[Rewriting]:
    return [Rewriting(apply_candidate(c), is_excluded(c, pcq), c) for c in external_candidates(pcq, ps, rule)]


def external_rewrite_step(
    pcq: PatternCQ, ps: PatternSet, rule: PatternRule, config: RewriterConfig = RewriterConfig()
) -> list[PatternCQ]:
    """Distinct direct rewritings (non-excluded only in modified mode)."""
    out: dict[tuple, PatternCQ] = {}
    for rw in external_rewritings(pcq, ps, rule):
        if config.mode == MODIFIED and rw.excluded:
            continue
        out.setdefault(rw.result.canonical(), rw.result)
    return list(out.values())


# literal procedure (test oracle) --------------------------------------------


@dataclass(frozen=True)
class UnifierContext:
    """Relevant blocks of a unifier on an instance of interest."""

    instance: Instance
    q_prime: frozenset[Atom]
    partition: frozenset[frozenset[Term]]
    blocks: tuple[tuple[Repeatable, int, int], ...]  # (pattern, first index, last index)
    external_terms: tuple[tuple[Term, Term], ...]
    internal_terms: tuple[frozenset[Term], ...]
    kind: str
    rule: PatternRule = field(compare=False)


def _as_rule(rule: PatternRule) -> ExistentialRule:
    body = rule.body
    body_atom = Atom("+" + body.name, body.args) if isinstance(body, Repeatable) else body
    return ExistentialRule((body_atom,), (rule.head,))


def classify_unifier(inst: Instance, mu, rule: PatternRule) -> UnifierContext:
    """Relevant blocks, external/internal terms and internal/external classification."""
    q_prime = mu.q_prime
    blocks, externals, internals = [], [], []
    for rep, points, atoms in inst.chains:
        idx = [i for i, a in enumerate(atoms) if a in q_prime]
        if not idx:
            continue
        lo, hi = idx[0], idx[-1]
        if idx != list(range(lo, hi + 1)):
            raise NonContiguousBlock(f"relevant steps of {rep!r} are not contiguous")
        blocks.append((rep, lo, hi))
        externals.append((points[lo], points[hi + 1]))
        internals.append(frozenset(points[lo + 1 : hi + 1]))
    sigma = substitution_of(mu.partition)
    ex = {t for cls in mu.partition if cls & rule.existentials for t in cls}
    from_chains = {a for _, _, atoms in inst.chains for a in atoms}
    kind = "external"
    if len(blocks) == 1 and q_prime <= from_chains:
        u, v = externals[0]
        if not _same(sigma, u, v) and u not in ex and v not in ex:
            kind = "internal"
    return UnifierContext(
        inst, q_prime, mu.partition, tuple(blocks), tuple(externals), tuple(internals), kind, rule
    )


def minimally_unifiable_instances(pcq: PatternCQ, ctx: UnifierContext) -> list[Candidate]:
    """Replace each relevant pattern by cases (i)-(iv) and keep those still unifiable.

    The remapped unifier is recomputed as the most general unifier of the
    renamed atoms and rechecked against both unifier conditions and the
    single-piece requirement.
    """
    rule = ctx.rule
    head = rule.head
    chains = {
        rep: (points, atoms, defs)
        for (rep, points, atoms), defs in zip(ctx.instance.chains, ctx.instance.steps)
    }
    plain = frozenset(a for a in ctx.q_prime if a in pcq.atoms)
    others = frozenset(pcq.atoms - plain)
    taken = {t.name for a in ctx.instance.atoms for t in a.args} | {t.name for t in rule.variables()}
    fresh = Fresh("X", taken)
    involved_reps = [b[0] for b in ctx.blocks]
    out = []
    for combo in itertools.product(CASES, repeat=len(ctx.blocks)):
        invs = []
        for (rep, lo, hi), case in zip(ctx.blocks, combo):
            points, atoms, defs = chains[rep]
            start, end, stubs = _stubs(rep, case, fresh(), fresh())
            block = []
            for i in range(lo, hi + 1):
                s_i = start if i == lo else points[i]
                e_i = end if i == hi else points[i + 1]
                block.append(reanchor(defs[i], atoms[i], s_i, e_i))
            invs.append(Involvement(rep, case, start, end, stubs, tuple(block)))
        cand_atoms = list(plain) + [a for inv in invs for a in inv.block]
        part = _partition(cand_atoms, head)
        dead, roots = _class_state(part, rule.existentials, frozenset(t for t in head.args if t.kind == VAR))
        if dead:
            continue
        cand = Candidate(
            plain,
            tuple(invs),
            frozenset(pcq.repeatables - set(involved_reps)),
            others,
            part.frozen(),
            rule,
        )
        ex = cand.existential_terms()
        inst = cand.instance()
        outside = {t for a in inst.atoms - cand.q_prime for t in a.args}
        outside |= {t for r in inst.repeatables for t in r.args}
        if ex & outside:
            continue
        if not _connected(sorted(cand.q_prime), ex):
            continue
        out.append(cand)
    return out


def external_rewritings_literal(
    pcq: PatternCQ, ps: PatternSet, rule: PatternRule, skipped: list | None = None
) -> list[Rewriting]:
    """Rewritings by explicit instantiation and unifier enumeration.

    Unifiers with non-contiguous relevant steps have no case (i)-(iv)
    counterpart; they raise unless a `skipped` list is given to collect them.
    """
    rule = freshen_pattern_rule(rule, {t.name for t in pcq.variables()})
    xr = _as_rule(rule)
    out = []
    for inst in instances_of_interest(pcq, ps, rule.head):
        items = set(inst.atoms) | {Atom("+" + r.name, r.args) for r in inst.repeatables}
        for mu in enumerate_piece_unifiers(items, xr):
            try:
                ctx = classify_unifier(inst, mu, rule)
            except NonContiguousBlock:
                if skipped is None:
                    raise
                skipped.append((inst, mu))
                continue
            if ctx.kind == "internal":
                continue
            for cand in minimally_unifiable_instances(pcq, ctx):
                if is_internal(cand):
                    continue
                out.append(Rewriting(apply_candidate(cand), is_excluded(cand, pcq), cand))
    return out


# pipeline -----------------------------------------------------------------------


@dataclass
class CompiledRules:
    """Query-independent part of the pipeline."""

    split: RuleSplit
    linear: tuple[ExistentialRule, ...]
    pattern_set: PatternSet
    pattern_rules: tuple[PatternRule, ...]
    safety: Safety
    internal_rounds: int


def compile_rules(rules: Iterable[ExistentialRule]) -> CompiledRules:
    split = split_rules(rules)
    if not split.ok:
        raise RuleSplitError(split)
    linear = tuple(normalize_heads(split.linear))
    ps0 = init_pattern_set(split.transitivity)
    prules = tuple(patternize_rule(r, ps0) for r in linear)
    ps, rounds = saturate_patterns(ps0, prules)
    safety = is_safe(RuleSplit(linear, split.transitivity, (), split.transitive))
    return CompiledRules(split, linear, ps, prules, safety, rounds)


@dataclass
class RewriteStats:
    steps: int = 0
    generated: int = 0
    excluded: int = 0
    dedup_hits: int = 0
    internal_skipped: int = 0
    max_size: int = 0

    def as_dict(self) -> dict:
        return {
            "steps": self.steps,
            "generated": self.generated,
            "excluded": self.excluded,
            "dedup_hits": self.dedup_hits,
            "internal_skipped": self.internal_skipped,
            "max_size": self.max_size,
        }


@dataclass
class RewriterOutput:
    pattern_set: PatternSet
    pcqs: list[PatternCQ]
    stats: RewriteStats
    termination_flag: str
    query: PatternCQ
    complete: bool
    notes: list[str] = field(default_factory=list)


def rewrite_compiled(q: ConjunctiveQuery, compiled: CompiledRules, config: RewriterConfig = RewriterConfig()) -> RewriterOutput:
    ps = compiled.pattern_set
    start = patternize(q, ps).canonical_copy()
    max_steps, max_count = config.limits(start.size)
    stats = RewriteStats(max_size=start.size)
    seen = {start.canonical(): start}
    order = [start]
    queue = deque([start])
    flag = "completed"
    while queue:
        if max_steps is not None and stats.steps >= max_steps:
            flag = "limit_hit"
            break
        cur = queue.popleft()
        stats.steps += 1
        for rule in compiled.pattern_rules:
            fresh_rule = freshen_pattern_rule(rule, {t.name for t in cur.variables()})
            search = _Search(cur, ps, fresh_rule)
            cands = search.run()
            stats.internal_skipped += search.internal_skipped
            for cand in cands:
                excluded = is_excluded(cand, cur)
                if excluded:
                    stats.excluded += 1
                    if config.mode == MODIFIED:
                        continue
                res = apply_candidate(cand)
                stats.generated += 1
                if config.mode == MODIFIED and res.size > cur.size:
                    raise InvariantViolation(
                        f"non-excluded rewriting grew from {cur.size} to {res.size}: {cur!r} -> {res!r}"
                    )
                key = res.canonical()
                if key in seen:
                    stats.dedup_hits += 1
                    continue
                if max_count is not None and len(seen) >= max_count:
                    flag = "limit_hit"
                    break
                seen[key] = res
                order.append(res)
                queue.append(res)
                stats.max_size = max(stats.max_size, res.size)
            if flag == "limit_hit":
                break
        if flag == "limit_hit":
            break
    notes = []
    if config.mode == MODIFIED:
        guaranteed = len(q.atoms) == 1 or compiled.safety.safe
        if not guaranteed:
            notes.append("sound, completeness not guaranteed (unsafe rule set, non-atomic query)")
    else:
        guaranteed = True
    complete = flag == "completed" and guaranteed
    return RewriterOutput(ps, order, stats, flag, start, complete, notes)


def rewrite(q: ConjunctiveQuery, rules: Iterable[ExistentialRule], config: RewriterConfig = RewriterConfig()) -> RewriterOutput:
    return rewrite_compiled(q, compile_rules(rules), config)
