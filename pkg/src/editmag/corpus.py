"""Synthetic source texts, prompt catalog and mirrors for desk-scale runs.

Source texts are written only with the plain member of every synonym group,
so any fancier synonym in an edited text is a trace of editing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import hash64
from .perturb import apply_edit

PROMPT_CATEGORIES = (
    "Tone and Style Adjustments",
    "Adding Detail",
    "Concision",
    "Fluency and Flow",
    "Paraphrasing",
    "Structure and Organization",
    "General Improvement",
    "Clarity and Precision",
    "Grammar and Mechanics",
)

CATEGORY_PROFILE = {
    "Grammar and Mechanics": "proofread",
    "Paraphrasing": "paraphrase",
    "Clarity and Precision": "paraphrase",
    "Concision": "paraphrase",
    "Structure and Organization": "restructure",
    "Fluency and Flow": "restructure",
    "Tone and Style Adjustments": "rewrite",
    "General Improvement": "rewrite",
    "Adding Detail": "rewrite",
}

DOMAINS = {
    "science": ["cell", "sample", "signal", "model", "field", "lab", "test", "result", "team", "method",
                "plant", "water", "light", "star", "tool", "data", "rock", "layer", "engine", "graph"],
    "cooking": ["pan", "soup", "bread", "onion", "sauce", "oven", "knife", "recipe", "dish", "spice",
                "kitchen", "plate", "garden", "butter", "lemon", "table", "pot", "meal", "salad", "cook"],
    "travel": ["train", "city", "road", "map", "hotel", "bag", "ticket", "beach", "river", "guide",
               "bridge", "market", "island", "village", "station", "trip", "coast", "boat", "museum", "trail"],
    "sports": ["ball", "coach", "match", "player", "goal", "court", "season", "runner", "bike", "pool",
               "league", "score", "fan", "stadium", "race", "helmet", "net", "drill", "squad", "game"],
    "business": ["market", "client", "budget", "office", "report", "product", "store", "price", "deal", "plan",
                 "meeting", "brand", "loan", "staff", "owner", "sale", "contract", "bank", "firm", "fund"],
}

ADJ = ["big", "small", "important", "good", "bad", "fast", "clear", "old", "new", "quiet", "simple"]
VERB = ["use", "help", "show", "make", "get", "need", "try", "change", "look at", "start", "end",
        "move", "fix", "check"]
ADV = ["slowly", "often", "well", "early", "late", "together", "again", "carefully", "quickly"]
CONN = ["Also,", "But", "So", "Then", "Later"]
QUANT = ["many", "some", "few"]
THINK = ["think", "feel"]

FRAMES = [
    "The {adj} {noun} can {verb} the {noun2} near the {noun3}.",
    "{conn} the {noun} will {verb} a {adj} {noun2} {adv}.",
    "We {verb} the {noun} because the {noun2} is {adj}.",
    "Most people {verb} the {noun} {adv} when the {noun2} is {adj}.",
    "I {think} the {noun} is {adj}, but the {noun2} is {adj2}.",
    "People often {verb} their {noun} to {verb2} the {noun2}.",
    "There are {quant} {noun}s near the {noun2}, so we {verb} them {adv}.",
    "After the {noun} is done, the {noun2} tends to {verb} the {noun3}.",
    "My friend said the {adj} {noun} would {verb} our {noun2}.",
    "You should {verb} the {noun} before the {adj} {noun2} arrives.",
    "{conn} a {adj} {noun} and a {adj2} {noun2} {verb} the {noun3}.",
    "It was {adj} to see the {noun} {verb} the {noun2} {adv}.",
    "We need to {verb} this part of the {noun}, so {quant} people {think} it is {adj}.",
    "{conn} it is important to {verb} the {adj} {noun} and also {verb2} the {noun2}.",
]


@dataclass(frozen=True)
class Prompt:
    prompt_id: str
    category: str
    profile: str


def prompt_catalog(n_per_category: int = 6) -> list[Prompt]:
    return [
        Prompt(f"p{ci:02d}-{k:02d}", cat, CATEGORY_PROFILE[cat])
        for ci, cat in enumerate(PROMPT_CATEGORIES)
        for k in range(n_per_category)
    ]


def human_text(seed: int, domain: str | None = None, min_words: int = 80) -> tuple[str, str]:
    """Generate one plain-style text. Returns ``(text, domain)``."""
    rng = np.random.default_rng(hash64("human", seed))
    if domain is None:
        domain = sorted(DOMAINS)[int(rng.integers(len(DOMAINS)))]
    nouns = DOMAINS[domain]

    def pick(seq):
        return seq[int(rng.integers(len(seq)))]

    sentences: list[str] = []
    words = 0
    while words < min_words:
        n1, n2, n3 = rng.choice(len(nouns), size=3, replace=False)
        a1, a2 = rng.choice(len(ADJ), size=2, replace=False)
        v1, v2 = rng.choice(len(VERB), size=2, replace=False)
        s = pick(FRAMES).format(
            adj=ADJ[a1], adj2=ADJ[a2], noun=nouns[n1], noun2=nouns[n2], noun3=nouns[n3],
            verb=VERB[v1], verb2=VERB[v2], adv=pick(ADV), conn=pick(CONN), quant=pick(QUANT),
            think=pick(THINK),
        )
        s = s[0].upper() + s[1:]
        sentences.append(s)
        words += len(s.split())
    return " ".join(sentences), domain


def mirror_text(seed: int, domain: str) -> str:
    """A fully rewritten text on the same domain, independent of any source's content."""
    text, _ = human_text(hash64("mirror", seed), domain)
    edited, _ = apply_edit(text, 1.0, hash64("mirror-edit", seed), "rewrite")
    return edited
