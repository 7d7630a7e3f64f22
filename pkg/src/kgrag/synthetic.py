"""A small seeded causal world rendered as abstract corpora.

The world has entities that are specific to T2DM, specific to AD, and shared
between the two. Causal edges among shared entities occur in both single-domain
corpora, so their graphs have a non-trivial intersection; the combined corpus
also carries cross-domain edges. Abstracts are templated prose that the
rule-based extraction client can read back, with a few deliberate wrinkles:
semicolon compounds, vague subjects ("It ..."), associative statements,
synonym surface forms, and some abstracts below the length cutoff.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .corpus import MIN_WORDS, word_count

SHARED = (
    "Insulin resistance", "Hyperglycemia", "Neuroinflammation", "Oxidative stress",
    "Mitochondrial dysfunction", "Advanced glycation end products", "Impaired insulin signaling",
    "Vascular damage", "Obesity", "Chronic inflammation", "Hyperinsulinemia", "Endothelial dysfunction",
    "Physical inactivity", "Elevated cortisol", "Insulin-degrading enzyme deficiency", "Reactive oxygen species",
    "Dysregulated lipid metabolism", "Autophagy impairment",
)
T2DM_ONLY = (
    "T2DM", "HbA1c", "Beta-cell dysfunction", "Visceral adiposity", "Hepatic steatosis", "Dyslipidemia",
    "Diabetic nephropathy", "Diabetic retinopathy", "Peripheral neuropathy", "Hypertension",
    "Sedentary lifestyle", "Gut dysbiosis", "Glucotoxicity", "Lipotoxicity", "Islet amyloid deposition",
    "Elevated fasting glucose", "Adiponectin deficiency", "Sleep apnea", "Impaired GLP-1 secretion",
    "Ectopic fat deposition", "Microvascular disease", "Hepatic glucose overproduction",
)
AD_ONLY = (
    "AD", "Abeta", "APOE4", "Tau hyperphosphorylation", "Neurofibrillary tangles", "Synaptic loss",
    "Hippocampal atrophy", "Cognitive decline", "Memory impairment", "Microglial activation",
    "Blood-brain barrier disruption", "Cerebral hypoperfusion", "Neuronal apoptosis", "Amyloid plaques",
    "Cholinergic deficit", "Brain insulin resistance", "Astrocyte reactivity", "Cerebral small vessel disease",
    "Executive dysfunction", "P-tau-217 elevation", "Neurofilament light increase", "White matter lesions",
)

# "because" reads badly in the head-relation-tail template, so it is never generated
TEMPLATE_RELATIONS = ("causes", "leads to", "results in", "contributes to", "induces",
                      "increases risk of", "reduces", "promotes")
ASSOCIATIVE = "is associated with"
VAGUE_SUBJECTS = ("It", "This")

FILLER = (
    "A longitudinal prospective cohort of {n} adults was followed for {y} years.",
    "Mendelian randomization analyses used {k} genetic instruments drawn from published consortia.",
    "Participants were recruited from {k} regional clinics between {y1} and {y2}.",
    "Baseline assessments included fasting glucose, HbA1c, lipid panels and blood pressure.",
    "Cognitive testing covered memory, attention and executive function at every visit.",
    "Plasma biomarkers such as p-tau-217, amyloid beta and interleukin-6 were measured by immunoassay.",
    "Models were adjusted for age, sex, education, smoking status and body mass index.",
    "Sensitivity analyses excluded participants with prevalent dementia at enrollment.",
    "Missing covariate data were handled with multiple imputation across {k} datasets.",
    "The mechanism was explored with pathway enrichment of {n} differentially expressed genes.",
    "Imaging data were acquired on {k} scanners with harmonized acquisition protocols.",
    "All procedures were approved by the institutional ethics board and participants gave written consent.",
    "Hazard ratios were estimated with Cox proportional hazards regression.",
    "The median follow-up time was {y} years with {k} percent retention.",
    "Secondary outcomes included hippocampal atrophy and cognitive impairment on standardized scales.",
    "These findings motivate randomized controlled trial designs in high-risk groups.",
)
TITLES = (
    "Longitudinal evidence linking {a} and {b}",
    "{a} and {b}: a prospective cohort analysis",
    "Mechanistic pathways from {a} to {b}",
    "Mendelian randomization of {a} with respect to {b}",
)

_RELATION_WORDS = re.compile(
    r"(?<!\w)(causes|because|leads to|results in|contributes to|induces|increases risk of|reduces|"
    r"promotes|is associated with|was associated with|influences|is linked to)(?!\w)", re.IGNORECASE)


@dataclass(frozen=True)
class Fact:
    head: str
    relation: str
    tail: str


@dataclass(frozen=True)
class World:
    facts_t2dm: tuple[Fact, ...]
    facts_ad: tuple[Fact, ...]
    facts_cross: tuple[Fact, ...]

    @property
    def shared(self) -> tuple[Fact, ...]:
        ad = set(self.facts_ad)
        return tuple(f for f in self.facts_t2dm if f in ad)


def _edges(rng, nodes, p: float, seen: set) -> list[Fact]:
    out = []
    for i, u in enumerate(nodes):
        for v in nodes[i + 1:]:
            if rng.random() >= p:
                continue
            h, t = (u, v) if rng.random() < 0.5 else (v, u)
            if (h, t) in seen or (t, h) in seen:
                continue
            seen.add((h, t))
            rel = ASSOCIATIVE if rng.random() < 0.12 else TEMPLATE_RELATIONS[rng.integers(len(TEMPLATE_RELATIONS))]
            out.append(Fact(h, rel, t))
    return out


def build_world(seed: int = 0) -> World:
    rng = np.random.default_rng([seed, 101])
    seen: set = set()
    shared = _edges(rng, list(SHARED), 0.45, seen)

    def domain_edges(own):
        # edges touching at least one domain-specific node, plus every shared edge
        nodes = list(own) + list(SHARED)
        cand = _edges(rng, nodes, 0.11, seen)
        return shared + [f for f in cand if f.head in own or f.tail in own]

    t2dm = domain_edges(T2DM_ONLY)
    ad = domain_edges(AD_ONLY)
    cross = []
    for _ in range(30):
        u = T2DM_ONLY[rng.integers(len(T2DM_ONLY))]
        v = AD_ONLY[rng.integers(len(AD_ONLY))]
        if (u, v) in seen or (v, u) in seen:
            continue
        seen.add((u, v))
        cross.append(Fact(u, TEMPLATE_RELATIONS[rng.integers(len(TEMPLATE_RELATIONS))], v))
    return World(tuple(t2dm), tuple(ad), tuple(cross))


def _surface_forms() -> dict[str, list[str]]:
    """Canonical name -> its non-trivial surface variants from the bundled synonym map."""
    raw = json.loads(resources.files("kgrag.data").joinpath("synonyms.json").read_text("utf-8"))
    forms: dict[str, list[str]] = {}
    for surface, canon in sorted(raw.items()):
        if surface.casefold() != canon.casefold():
            forms.setdefault(canon, []).append(surface)
    return forms


def _name(rng, entity: str, forms: dict[str, list[str]]) -> str:
    alts = forms.get(entity)
    if alts and rng.random() < 0.4:
        return alts[rng.integers(len(alts))]
    return entity


def _fact_sentence(rng, f: Fact, forms) -> str:
    return f"{_name(rng, f.head, forms)} {f.relation} {_name(rng, f.tail, forms)}."


def _filler(rng) -> str:
    tpl = FILLER[rng.integers(len(FILLER))]
    y1 = int(rng.integers(1995, 2012))
    return tpl.format(n=int(rng.integers(120, 9000)), y=int(rng.integers(2, 15)), k=int(rng.integers(3, 40)),
                      y1=y1, y2=y1 + int(rng.integers(3, 10)))


def render_abstract(rng, facts: list[Fact], forms, min_words: int = MIN_WORDS) -> str:
    """Fact sentences (some compounded or vague) interleaved with filler up to ``min_words``."""
    sentences = []
    i = 0
    while i < len(facts):
        roll = rng.random()
        if roll < 0.2 and i + 1 < len(facts):
            a, b = facts[i], facts[i + 1]
            sentences.append(f"{_name(rng, a.head, forms)} {a.relation} {_name(rng, a.tail, forms)}; "
                             f"{_name(rng, b.head, forms)} {b.relation} {_name(rng, b.tail, forms)}.")
            i += 2
            continue
        sentences.append(_fact_sentence(rng, facts[i], forms))
        if roll > 0.9:
            f = facts[i]
            sentences.append(f"{VAGUE_SUBJECTS[rng.integers(2)]} {TEMPLATE_RELATIONS[rng.integers(8)]} {f.tail}.")
        i += 1
    body = []
    for s in sentences:
        body.append(s)
        body.append(_filler(rng))
    while word_count(" ".join(body)) < min_words:
        body.insert(int(rng.integers(len(body) + 1)), _filler(rng))
    return " ".join(body)


def make_corpus(facts, prefix: str, seed: int, per_doc: int = 7, copies: int = 2,
                n_short: int = 4) -> list[dict]:
    """Each fact appears in ``copies`` abstracts; ``n_short`` extra abstracts fall below the cutoff."""
    rng = np.random.default_rng([seed, sum(map(ord, prefix))])
    forms = _surface_forms()
    pool = []
    for _ in range(copies):
        order = rng.permutation(len(facts))
        pool.extend(facts[j] for j in order)
    docs = []
    for start in range(0, len(pool), per_doc):
        chunk = pool[start:start + per_doc]
        a, b = chunk[0].head, chunk[-1].tail
        title = TITLES[rng.integers(len(TITLES))].format(a=a, b=b)
        docs.append({"id": f"{prefix}-{len(docs) + 1:04d}", "title": title,
                     "abstract": render_abstract(rng, chunk, forms)})
    for _ in range(n_short):
        f = facts[rng.integers(len(facts))]
        docs.append({"id": f"{prefix}-{len(docs) + 1:04d}", "title": f"Brief report on {f.tail}",
                     "abstract": f"{_fact_sentence(rng, f, forms)} {_filler(rng)}"})
    for d in docs:
        for s in re.split(r"(?<=\.)\s+", d["abstract"]):
            hits = _RELATION_WORDS.findall(s)
            assert len(hits) <= 2, f"ambiguous synthetic sentence: {s}"
    return docs


CORPORA = ("t2dm", "ad", "t2dm_ad")


def synthetic_corpora(seed: int = 0) -> dict[str, list[dict]]:
    w = build_world(seed)
    combined = list(dict.fromkeys(w.facts_t2dm + w.facts_ad + w.facts_cross))
    return {
        "t2dm": make_corpus(list(w.facts_t2dm), "T2D", seed),
        "ad": make_corpus(list(w.facts_ad), "ALZ", seed),
        "t2dm_ad": make_corpus(combined, "MIX", seed),
    }


def write_synthetic(out_dir, seed: int = 0) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, docs in synthetic_corpora(seed).items():
        p = out / f"{name}.jsonl"
        with open(p, "w", encoding="utf-8") as f:
            for d in docs:
                f.write(json.dumps(d, ensure_ascii=False) + "\n")
        paths[name] = p
    return paths


def bundled_corpus(name: str) -> Path:
    """Path of a corpus shipped in the package (``t2dm``, ``ad`` or ``t2dm_ad``)."""
    if name not in CORPORA:
        raise KeyError(f"no bundled corpus {name!r}; choose from {', '.join(CORPORA)}")
    return Path(__file__).parent / "data" / "synthetic" / f"{name}.jsonl"


if __name__ == "__main__":
    import sys

    for p in write_synthetic(sys.argv[1] if len(sys.argv) > 1 else "synthetic").values():
        print(p)
