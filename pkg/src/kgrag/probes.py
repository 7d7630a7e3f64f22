"""Seeded multiple-choice probe synthesis from graph structure, plus validation.

Three item kinds are produced:

* ``single_hop``: "<head> <relation>:" with the true tail and three distractors
  drawn from the head's in-neighbours, matched on in-degree bucket.
* ``multi_hop_pair``: four numbered atomic options, lettered 2-combinations, one
  of which is fully made of direct causes of the target. Probe 2 uses directed
  edge statements as atomics so a reversed edge is a distractor.
* ``fitb``: the head or tail of a triple is blanked out.

All randomness comes from ``numpy.random.default_rng`` (PCG64) seeded per kind
from the generation seed, so identical inputs give byte-identical probe files.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ParseError, ValidationError
from .kg import (IntersectionItem, KnowledgeGraph, SynonymMap, direct_and_two_hop_causes,
                 intersection_graph, merge_graphs)

log = logging.getLogger(__name__)

KINDS = ("single_hop", "multi_hop_pair", "fitb")
LETTERS = "ABCDE"
RNG_NAME = "numpy.PCG64"
COMPOSITION = {"single_hop": 0.4, "multi_hop_pair": 0.4, "fitb": 0.2}
ARROW = "→"


@dataclass
class ProbeItem:
    item_id: str
    kind: str
    stem: str
    options: list[tuple[str, str]]
    allowed_letters: list[str]
    key: str
    source_triples: list[tuple[str, str, str]]
    seed: int
    atomic_options: list[str] | None = None
    atomic_refs: list | None = None
    pairs: list[tuple[int, int]] | None = None
    target: str | None = None
    masked: str | None = None
    directional: bool = False

    def option_text(self, letter: str) -> str | None:
        for l, text in self.options:
            if l == letter:
                return text
        return None

    @property
    def key_text(self) -> str | None:
        return self.option_text(self.key)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["options"] = [list(o) for o in self.options]
        d["source_triples"] = [list(t) for t in self.source_triples]
        if self.pairs is not None:
            d["pairs"] = [list(p) for p in self.pairs]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProbeItem":
        d = dict(d)
        d["options"] = [tuple(o) for o in d["options"]]
        d["source_triples"] = [tuple(t) for t in d["source_triples"]]
        if d.get("pairs") is not None:
            d["pairs"] = [tuple(p) for p in d["pairs"]]
        if d.get("atomic_refs") is not None:
            d["atomic_refs"] = [r if isinstance(r, str) else tuple(r) for r in d["atomic_refs"]]
        return cls(**d)


@dataclass
class ProbeSet:
    items: list[ProbeItem]
    origin: str
    graph_fingerprint: str
    generation_seed: int
    rng: str = RNG_NAME

    def header(self) -> dict:
        return {"type": "header", "origin": self.origin, "generation_seed": self.generation_seed,
                "graph_fingerprint": self.graph_fingerprint, "rng": self.rng, "n_items": len(self.items)}


def write_probe_set(ps: ProbeSet, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(ps.header(), ensure_ascii=False) + "\n")
        for item in ps.items:
            f.write(json.dumps(item.to_dict(), ensure_ascii=False) + "\n")


def read_probe_set(path) -> ProbeSet:
    header = None
    items = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if rec.get("type") == "header":
                    header = rec
                else:
                    items.append(ProbeItem.from_dict(rec))
            except (json.JSONDecodeError, TypeError, KeyError, AttributeError) as e:
                raise ParseError(f"malformed probe record: {e}", line=lineno) from None
    if header is None:
        raise ParseError(f"{path}: missing header line")
    return ProbeSet(items, header["origin"], header["graph_fingerprint"], int(header["generation_seed"]),
                    header.get("rng", RNG_NAME))


def intersection_fingerprint(items: Sequence[IntersectionItem]) -> str:
    payload = json.dumps([[list(i.triple_a.key), list(i.triple_b.key)] for i in items],
                         ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def degree_bucket(d: int) -> int:
    return int(math.floor(math.log2(d + 1)))


class _View:
    """Cached lookups over a graph shared by the generators."""

    def __init__(self, g: KnowledgeGraph, syn: SynonymMap | None):
        self.g = g
        self.syn = syn or (lambda s: " ".join(s.split()))
        self.show = {e: self.syn(e) for e in g.entities}
        indeg = g.in_degrees()
        self.bucket = {e: degree_bucket(int(indeg[i])) for i, e in enumerate(g.entities)}
        self.out_any: dict[str, set[str]] = {}
        self.in_any: dict[str, set[str]] = {}
        self.by_head_rel: dict[tuple[str, str], set[str]] = {}
        self.by_rel_tail: dict[tuple[str, str], set[str]] = {}
        for h, r, t in g.keys:
            self.out_any.setdefault(h, set()).add(t)
            self.in_any.setdefault(t, set()).add(h)
            self.by_head_rel.setdefault((h, r), set()).add(t)
            self.by_rel_tail.setdefault((r, t), set()).add(h)

    def pick(self, rng, candidates: Iterable[str], k: int, taken: set[str], ref_bucket: int) -> list[str]:
        """Up to ``k`` candidates, nearest in-degree bucket first (within +-1 preferred),
        shuffled within each tier, skipping canonical collisions with ``taken``."""
        cands = sorted(set(candidates))
        if not cands:
            return []
        order = rng.permutation(len(cands))
        ranked = sorted((max(abs(self.bucket[cands[i]] - ref_bucket) - 1, 0), pos)
                        for pos, i in enumerate(order))
        out = []
        taken = set(taken)
        for _, pos in ranked:
            c = cands[order[pos]]
            if self.show[c] in taken:
                continue
            out.append(c)
            taken.add(self.show[c])
            if len(out) == k:
                break
        return out


def _lettered(rng, texts: list[str], correct_index: int) -> tuple[list[tuple[str, str]], str]:
    perm = rng.permutation(len(texts))
    options = [(LETTERS[pos], texts[i]) for pos, i in enumerate(perm)]
    key = LETTERS[int(np.flatnonzero(perm == correct_index)[0])]
    return options, key


def _causal_sources(g: KnowledgeGraph, sources) -> list[tuple[str, str, str]]:
    keys = g.keys if sources is None else sorted(set(sources))
    return [k for k in keys if k[1] in g.causal_relations]


def gen_single_hop(g: KnowledgeGraph, n: int, seed: int, syn: SynonymMap | None = None,
                   sources: Sequence[tuple[str, str, str]] | None = None, _view: _View | None = None,
                   _rng=None) -> list[ProbeItem]:
    """Single-hop items: which entity does ``head`` ``relation``?"""
    v_ = _view or _View(g, syn)
    rng = _rng if _rng is not None else np.random.default_rng([seed, 0])
    pool = _causal_sources(g, sources)
    items: list[ProbeItem] = []
    used = set()
    for idx in (rng.permutation(len(pool)) if pool else []):
        if len(items) >= n:
            break
        u, r, v = pool[idx]
        if (u, r) in used:
            continue
        if v_.show[u] == v_.show[v]:
            continue
        excluded = v_.out_any.get(u, set()) | {u, v}
        cands = [c for c in g.in_neighbors(u) if c not in excluded]
        chosen = v_.pick(rng, cands, 3, {v_.show[v], v_.show[u]}, v_.bucket[v])
        if len(chosen) < 3:
            log.debug("single-hop: distractor pool too small for %s", (u, r, v))
            continue
        used.add((u, r))
        texts = [v_.show[v]] + [v_.show[c] for c in chosen]
        options, key = _lettered(rng, texts, 0)
        items.append(ProbeItem(
            item_id=f"single_hop-{len(items):04d}", kind="single_hop", stem=f"{v_.show[u]} {r}:",
            options=options, allowed_letters=[o[0] for o in options], key=key,
            source_triples=[(u, r, v)], seed=seed))
    if len(items) < n:
        log.warning("single-hop: generated %d of %d requested items", len(items), n)
    return items


def _pair_options(rng, atomics_n: int, keyed: tuple[int, int], n_choices: int):
    """Pick ``n_choices`` 2-combinations of 1..atomics_n including ``keyed``; letter them."""
    combos = list(itertools.combinations(range(1, atomics_n + 1), 2))
    others = [c for c in combos if c != keyed]
    pick = sorted(rng.choice(len(others), size=n_choices - 1, replace=False))
    chosen = [keyed] + [others[i] for i in pick]
    chosen_sorted = sorted(chosen)
    options = [(LETTERS[i], f"{a} and {b}") for i, (a, b) in enumerate(chosen_sorted)]
    key = LETTERS[chosen_sorted.index(keyed)]
    return options, key, chosen_sorted


def gen_multihop_pair(g: KnowledgeGraph, n: int, seed: int, syn: SynonymMap | None = None,
                      targets: Sequence[str] | None = None, _view: _View | None = None,
                      _rng=None) -> list[ProbeItem]:
    """Pick two direct causes of a target among four atomic options."""
    v_ = _view or _View(g, syn)
    rng = _rng if _rng is not None else np.random.default_rng([seed, 1])
    cand_targets = sorted(targets if targets is not None else g.entities)
    items: list[ProbeItem] = []
    for idx in (rng.permutation(len(cand_targets)) if cand_targets else []):
        if len(items) >= n:
            break
        x = cand_targets[idx]
        p1, p2 = direct_and_two_hop_causes(g, x)
        parents = sorted(p for p in p1 if v_.show[p] != v_.show[x])
        if len(parents) < 2:
            continue
        pair = sorted(rng.choice(len(parents), size=2, replace=False))
        u, v = parents[pair[0]], parents[pair[1]]
        if v_.show[u] == v_.show[v]:
            continue
        blocked = p1 | {x}
        two_hop = [c for c in p2 if c not in blocked]
        near = set(g.out_neighbors(x))
        for p in p1:
            near.update(g.out_neighbors(p))
        near = [c for c in near - set(two_hop) if c not in blocked]
        taken = {v_.show[u], v_.show[v], v_.show[x]}
        distractors = v_.pick(rng, two_hop, 2, taken, v_.bucket[u])
        taken |= {v_.show[d] for d in distractors}
        if len(distractors) < 2:
            distractors += v_.pick(rng, near, 2 - len(distractors), taken, v_.bucket[u])
        if len(distractors) < 2:
            log.debug("multi-hop: not enough distractors for target %s", x)
            continue
        refs = [u, v] + distractors
        perm = rng.permutation(4)
        atom_refs = [refs[i] for i in perm]
        keyed = tuple(sorted(int(np.flatnonzero(perm == k)[0]) + 1 for k in (0, 1)))
        options, key, pairs = _pair_options(rng, 4, keyed, 4)
        items.append(ProbeItem(
            item_id=f"multi_hop_pair-{len(items):04d}", kind="multi_hop_pair",
            stem=f"Which two are direct causes of {v_.show[x]}?",
            options=options, allowed_letters=[o[0] for o in options], key=key,
            source_triples=sorted(k for k in g.keys if k[2] == x and k[0] in (u, v)
                                  and k[1] in g.causal_relations),
            seed=seed, atomic_options=[v_.show[a] for a in atom_refs], atomic_refs=atom_refs,
            pairs=pairs, target=x))
    if len(items) < n:
        log.warning("multi-hop: generated %d of %d requested items", len(items), n)
    return items


def gen_fitb(g: KnowledgeGraph, n: int, seed: int, syn: SynonymMap | None = None,
             sources: Sequence[tuple[str, str, str]] | None = None, _view: _View | None = None,
             _rng=None) -> list[ProbeItem]:
    """Blank out the head or tail of a causal triple; only its canonical label is keyed."""
    v_ = _view or _View(g, syn)
    rng = _rng if _rng is not None else np.random.default_rng([seed, 2])
    pool = _causal_sources(g, sources)
    items: list[ProbeItem] = []
    used = set()
    for idx in (rng.permutation(len(pool)) if pool else []):
        if len(items) >= n:
            break
        u, r, v = pool[idx]
        slot = "tail" if rng.integers(2) == 1 else "head"
        if slot == "tail":
            answer, stem_key = v, (u, r, "tail")
            excluded = v_.by_head_rel.get((u, r), set()) | {u}
            neighbourhood = set(g.in_neighbors(u)) | set(v_.out_any.get(u, ()))
            stem = f"{v_.show[u]} {r} ___."
        else:
            answer, stem_key = u, (r, v, "head")
            excluded = v_.by_rel_tail.get((r, v), set()) | {v}
            neighbourhood = set(g.in_neighbors(v)) | set(v_.in_any.get(v, ()))
            stem = f"___ {r} {v_.show[v]}."
        if stem_key in used or v_.show[u] == v_.show[v]:
            continue
        other = v_.show[v] if slot == "head" else v_.show[u]
        taken = {v_.show[answer], other}
        near = [c for c in neighbourhood if c not in excluded and c != answer]
        chosen = v_.pick(rng, near, 3, taken, v_.bucket[answer])
        if len(chosen) < 3:
            taken |= {v_.show[c] for c in chosen}
            rest = [c for c in g.entities if c not in excluded and c != answer and c not in chosen]
            chosen += v_.pick(rng, rest, 3 - len(chosen), taken, v_.bucket[answer])
        if len(chosen) < 3:
            continue
        used.add(stem_key)
        texts = [v_.show[answer]] + [v_.show[c] for c in chosen]
        options, key = _lettered(rng, texts, 0)
        items.append(ProbeItem(
            item_id=f"fitb-{len(items):04d}", kind="fitb", stem=stem, options=options,
            allowed_letters=[o[0] for o in options], key=key, source_triples=[(u, r, v)],
            seed=seed, masked=slot))
    if len(items) < n:
        log.warning("fitb: generated %d of %d requested items", len(items), n)
    return items


def gen_directional_pair(g: KnowledgeGraph, n: int, seed: int, syn: SynonymMap | None = None,
                         sources: Sequence[tuple[str, str, str]] | None = None,
                         _view: _View | None = None, _rng=None) -> list[ProbeItem]:
    """Pick the two edge statements that point into a target; reversed edges are distractors.

    Five of the six 2-combinations of the four statements are offered (A-E),
    exactly one keyed. Targets whose chosen edges also exist reversed are skipped.
    """
    v_ = _view or _View(g, syn)
    rng = _rng if _rng is not None else np.random.default_rng([seed, 3])
    pool = _causal_sources(g, sources)
    into: dict[str, set[str]] = {}
    for h, _, t in pool:
        if h != t:
            into.setdefault(t, set()).add(h)
    targets = sorted(t for t, hs in into.items() if len(hs) >= 2)
    items: list[ProbeItem] = []
    for idx in (rng.permutation(len(targets)) if targets else []):
        if len(items) >= n:
            break
        x = targets[idx]
        heads = sorted(h for h in into[x] if not g.has_edge(x, h) and v_.show[h] != v_.show[x])
        if len(heads) < 2:
            log.debug("directional: reverse edges exist for target %s, skipped", x)
            continue
        pair = sorted(rng.choice(len(heads), size=2, replace=False))
        u, v = heads[pair[0]], heads[pair[1]]
        if v_.show[u] == v_.show[v]:
            continue
        _, p2 = direct_and_two_hop_causes(g, x)
        traps = sorted(w for w in p2 if not g.has_edge(w, x) and v_.show[w] not in
                       {v_.show[u], v_.show[v], v_.show[x]})
        fourth = (x, v)
        if traps and rng.integers(2) == 1:
            fourth = (traps[int(rng.integers(len(traps)))], x)
        refs = [(u, x), (v, x), (x, u), fourth]
        perm = rng.permutation(4)
        atom_refs = [refs[i] for i in perm]
        keyed = tuple(sorted(int(np.flatnonzero(perm == k)[0]) + 1 for k in (0, 1)))
        options, key, pairs = _pair_options(rng, 4, keyed, 5)
        items.append(ProbeItem(
            item_id=f"multi_hop_pair-{len(items):04d}", kind="multi_hop_pair",
            stem=f"Which two statements are direct causal links into {v_.show[x]}?",
            options=options, allowed_letters=[o[0] for o in options], key=key,
            source_triples=sorted(k for k in pool if k[2] == x and k[0] in (u, v)),
            seed=seed, atomic_options=[f"{v_.show[a]} {ARROW} {v_.show[b]}" for a, b in atom_refs],
            atomic_refs=atom_refs, pairs=pairs, target=x, directional=True))
    if len(items) < n:
        log.warning("directional multi-hop: generated %d of %d requested items", len(items), n)
    return items


def _split(n: int) -> dict[str, int]:
    n_single = int(round(n * COMPOSITION["single_hop"]))
    n_multi = int(round(n * COMPOSITION["multi_hop_pair"]))
    return {"single_hop": n_single, "multi_hop_pair": n_multi, "fitb": n - n_single - n_multi}


def _compose(n: int, seed: int, makers: dict[str, Callable[[int], list[ProbeItem]]], prefix: str) -> list[ProbeItem]:
    """Fill the 40/40/20 composition; shortfalls roll over to the next kind."""
    quota = _split(n)
    multi = makers["multi_hop_pair"](quota["multi_hop_pair"])
    short = quota["multi_hop_pair"] - len(multi)
    single = makers["single_hop"](quota["single_hop"] + short)
    short = quota["single_hop"] + short - len(single)
    fitb = makers["fitb"](quota["fitb"] + short)
    short = quota["fitb"] + short - len(fitb)
    if short > 0:
        extra = makers["single_hop"](len(single) + short)[len(single):]
        single += extra
        short -= len(extra)
    if short > 0:
        log.warning("%s: generated %d of %d requested items", prefix, n - short, n)
    items = single + multi + fitb
    for i, item in enumerate(items):
        item.item_id = f"{prefix}-{i:04d}"
    return items


def gen_probe1(g: KnowledgeGraph, n: int = 100, seed: int = 0, syn: SynonymMap | None = None) -> ProbeSet:
    view = _View(g, syn)
    makers = {
        "single_hop": lambda k: gen_single_hop(g, k, seed, syn, _view=view),
        "multi_hop_pair": lambda k: gen_multihop_pair(g, k, seed, syn, _view=view),
        "fitb": lambda k: gen_fitb(g, k, seed, syn, _view=view),
    }
    return ProbeSet(_compose(n, seed, makers, "p1"), "probe1", g.fingerprint(), seed)


def probe2_graphs(inter: Sequence[IntersectionItem], context: KnowledgeGraph | None = None):
    """(intersection subgraph, graph used for truth and distractors)."""
    rels = set().union(*[{i.triple_a.relation, i.triple_b.relation} for i in inter])
    if context is not None:
        rels |= set(context.causal_relations)
    sub = intersection_graph(inter, rels)
    pool = merge_graphs([context, sub]) if context is not None else sub
    return sub, pool


def gen_probe2(inter: Sequence[IntersectionItem], n: int = 110, seed: int = 0, syn: SynonymMap | None = None,
               context: KnowledgeGraph | None = None) -> ProbeSet:
    """Probe 2 restricted to intersection triples.

    ``context`` (e.g. the union of both source graphs) widens the distractor
    pool and is also used to reject distractors that would be true.
    """
    if not inter:
        raise ValidationError("probe 2 needs a non-empty intersection")
    sub, pool = probe2_graphs(inter, context)
    sources = sub.keys
    view = _View(pool, syn)
    makers = {
        "single_hop": lambda k: gen_single_hop(pool, k, seed, syn, sources=sources, _view=view),
        "multi_hop_pair": lambda k: gen_directional_pair(pool, k, seed, syn, sources=sources, _view=view),
        "fitb": lambda k: gen_fitb(pool, k, seed, syn, sources=sources, _view=view),
    }
    return ProbeSet(_compose(n, seed, makers, "p2"), "probe2", intersection_fingerprint(inter), seed)


@dataclass(frozen=True)
class Finding:
    item_id: str
    code: str
    message: str


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)
    n_items: int = 0

    @property
    def ok(self) -> bool:
        return not self.findings

    def add(self, item_id: str, code: str, message: str) -> None:
        self.findings.append(Finding(item_id, code, message))

    def codes(self) -> list[str]:
        return [f.code for f in self.findings]


def _check_structure(item: ProbeItem, show, rep: ValidationReport) -> bool:
    ok = True
    if item.kind not in KINDS:
        rep.add(item.item_id, "unknown kind", item.kind)
        return False
    letters = [o[0] for o in item.options]
    if len(item.options) not in (4, 5):
        rep.add(item.item_id, "option count", f"{len(item.options)} options")
        ok = False
    if letters != list(LETTERS[:len(letters)]) or letters != list(item.allowed_letters):
        rep.add(item.item_id, "letter mismatch", f"options {letters} vs allowed {item.allowed_letters}")
        ok = False
    if item.key not in item.allowed_letters:
        rep.add(item.item_id, "key not allowed", f"key {item.key!r} not in {item.allowed_letters}")
        ok = False
    if not item.source_triples:
        rep.add(item.item_id, "missing source", "no source triples")
        ok = False
    texts = item.atomic_options if item.kind == "multi_hop_pair" else [t for _, t in item.options]
    canon = [show(t) for t in texts or []]
    if len(set(canon)) != len(canon):
        dupes = sorted({c for c in canon if canon.count(c) > 1})
        rep.add(item.item_id, "canonical-space collision", f"options collapse to {dupes}")
        ok = False
    if item.kind == "multi_hop_pair":
        if not item.atomic_options or not item.pairs or len(item.pairs) != len(item.options) \
                or item.atomic_refs is None or len(item.atomic_refs) != len(item.atomic_options):
            rep.add(item.item_id, "malformed pairs", "pair item without atomic options/pairs")
            ok = False
        elif len(set(t for _, t in item.options)) != len(item.options):
            rep.add(item.item_id, "canonical-space collision", "duplicate pair choices")
            ok = False
    return ok


def validate_probe_set(ps: ProbeSet, source, syn: SynonymMap | None = None,
                       context: KnowledgeGraph | None = None) -> ValidationReport:
    """Check item invariants and every keyed answer against the source graph.

    ``source`` is a KnowledgeGraph (probe 1) or a list of IntersectionItem
    (probe 2); ``context`` must match the one used at generation for probe 2.
    """
    if isinstance(source, KnowledgeGraph):
        sub, g = None, source
    else:
        sub, g = probe2_graphs(list(source), context)
    rep = ValidationReport(n_items=len(ps.items))
    view = _View(g, syn)
    show = view.syn
    seen_ids: set[str] = set()
    for item in ps.items:
        if item.item_id in seen_ids:
            rep.add(item.item_id, "duplicate id", "item id repeated")
        seen_ids.add(item.item_id)
        if not _check_structure(item, show, rep):
            continue
        missing = [t for t in item.source_triples if not g.has_triple(*t)]
        if missing:
            rep.add(item.item_id, "unknown source triple", f"{missing[0]} not in graph")
            continue
        if sub is not None and any(not sub.has_triple(*t) for t in item.source_triples):
            rep.add(item.item_id, "non-intersection source", "source triple outside the intersection")
            continue
        if item.kind == "single_hop":
            u, r, v = item.source_triples[0]
            truths = {show(c) for c in view.by_head_rel.get((u, r), ())}
            _check_keyed(item, show(v), truths, rep)
        elif item.kind == "fitb":
            u, r, v = item.source_triples[0]
            if item.masked == "tail":
                truths = {show(c) for c in view.by_head_rel.get((u, r), ())}
                _check_keyed(item, show(v), truths, rep)
            elif item.masked == "head":
                truths = {show(c) for c in view.by_rel_tail.get((r, v), ())}
                _check_keyed(item, show(u), truths, rep)
            else:
                rep.add(item.item_id, "malformed fitb", f"masked slot {item.masked!r}")
        else:
            _check_pairs(item, g, rep)
    return rep


def _check_keyed(item: ProbeItem, expected: str, truths: set[str], rep: ValidationReport) -> None:
    if item.key_text != expected:
        rep.add(item.item_id, "key mismatch", f"keyed {item.key_text!r}, graph says {expected!r}")
        return
    extra = [t for l, t in item.options if l != item.key and t in truths]
    if extra:
        rep.add(item.item_id, "distractor is correct", f"{extra} also true in graph")


def _check_pairs(item: ProbeItem, g: KnowledgeGraph, rep: ValidationReport) -> None:
    x = item.target
    if x not in g.index:
        rep.add(item.item_id, "unknown target", f"{x!r} not in graph")
        return
    p1, _ = direct_and_two_hop_causes(g, x)

    def true_atom(ref) -> bool:
        if item.directional:
            a, b = ref
            return b == x and a in p1
        return ref in p1

    truth = [true_atom(r) for r in item.atomic_refs]
    correct = [l for (l, _), (i, j) in zip(item.options, item.pairs) if truth[i - 1] and truth[j - 1]]
    if item.key not in correct:
        rep.add(item.item_id, "key mismatch", f"keyed pair {item.key_text!r} is not fully causal")
    elif len(correct) > 1:
        rep.add(item.item_id, "distractor is correct", f"pairs {correct} are all fully causal")
