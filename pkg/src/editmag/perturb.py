"""Rule-based editing operator with replayable traces.

A document is held as a list of sentences, each a list of whitespace tokens.
Every random choice is drawn once per unit (word or sentence) up front and
compared against ``lambda * rate``; the set of edited units therefore grows
monotonically with lambda for a fixed seed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .embedding import _read_data_lines, hash64, synonym_groups
from .errors import InvalidInput

PROFILES = ("proofread", "paraphrase", "restructure", "rewrite")
REORDER = "@reorder"

# per-profile rates; the affected share of eligible units is lambda * rate
PROFILE_RATES = {
    "proofread": {"typo": 0.15},
    "paraphrase": {"synonym": 1.0, "delete": 0.03, "template": 0.6},
    "restructure": {"swap": 0.5, "reorder": 0.6, "template": 0.8, "delete": 0.02},
    "rewrite": {"synonym": 1.0, "delete": 0.05, "template": 1.0, "reorder": 0.3, "swap": 0.3, "typo": 0.05},
}

_SENT_SPLIT = re.compile(r"(?<=[.!?])\s+")
_TERMINALS = ".!?"


@lru_cache(maxsize=None)
def sentence_templates() -> tuple[str, ...]:
    return tuple(_read_data_lines("templates.txt")) + (REORDER,)


@lru_cache(maxsize=None)
def _synonym_index() -> dict[str, tuple[str, ...]]:
    return {w: g for g in synonym_groups() for w in g}


@dataclass(frozen=True)
class MicroEdit:
    op: str
    args: tuple

    def to_json(self) -> list:
        return [self.op, *self.args]

    @classmethod
    def from_json(cls, item: Sequence) -> "MicroEdit":
        return cls(item[0], tuple(item[1:]))


@dataclass
class EditTrace:
    ops: list[MicroEdit] = field(default_factory=list)
    lam: float = 0.0
    seed: int = 0
    profile: str = "paraphrase"

    def to_json(self) -> dict:
        return {"ops": [m.to_json() for m in self.ops], "lambda": self.lam, "seed": self.seed,
                "profile": self.profile}

    @classmethod
    def from_json(cls, d: dict) -> "EditTrace":
        return cls([MicroEdit.from_json(x) for x in d["ops"]], d["lambda"], d["seed"], d["profile"])


# --------------------------------------------------------------------------
# document model


def split_sentences(text: str) -> list[list[str]]:
    return [s.split() for s in _SENT_SPLIT.split(text.strip()) if s.strip()]


def render(doc: list[list[str]]) -> str:
    return " ".join(" ".join(s) for s in doc if s)


def _locate(doc: list[list[str]], i: int) -> tuple[int, int]:
    for si, sent in enumerate(doc):
        if i < len(sent):
            return si, i
        i -= len(sent)
    raise InvalidInput("word index out of range")


def _split_edges(token: str) -> tuple[str, str, str]:
    m = re.match(r"^(\W*)(.*?)(\W*)$", token, flags=re.S)
    return m.group(1), m.group(2), m.group(3)


def _match_case(new: str, old: str) -> str:
    if old[:1].isupper():
        return new[:1].upper() + new[1:]
    return new


def typo_of(token: str) -> str:
    """Deterministic misspelling: swap the 2nd and 3rd letters, or double the last."""
    pre, core, post = _split_edges(token)
    if len(core) >= 4:
        core = core[0] + core[2] + core[1] + core[3:]
    elif core:
        core = core + core[-1]
    return pre + core + post


def _lower_first(tokens: list[str]) -> list[str]:
    if tokens and tokens[0][:1].isupper() and tokens[0] != "I" and not tokens[0][1:2].isupper():
        return [tokens[0][:1].lower() + tokens[0][1:]] + tokens[1:]
    return tokens


def _upper_first(tokens: list[str]) -> list[str]:
    if tokens:
        return [tokens[0][:1].upper() + tokens[0][1:]] + tokens[1:]
    return tokens


def rewrite_tokens(tokens: list[str], template_id: int) -> list[str]:
    templates = sentence_templates()
    if not 0 <= template_id < len(templates):
        raise InvalidInput(f"unknown template id {template_id}")
    if not tokens:
        return tokens
    body = list(tokens)
    stripped = body[-1].rstrip(_TERMINALS)
    end = body[-1][-1] if stripped != body[-1] else "."
    if stripped:
        body[-1] = stripped
    else:
        body.pop()
    if not body:
        return tokens
    template = templates[template_id]
    if template == REORDER:
        if len(body) < 2:
            return tokens
        cut = next((k for k, t in enumerate(body[:-1]) if t.endswith(",") and k > 0), len(body) // 2 - 1)
        cut = max(0, cut)
        first = _lower_first(body[: cut + 1])
        first[-1] = first[-1].rstrip(",")
        second = body[cut + 1 :]
        second = second[:-1] + [second[-1].rstrip(",") + ","]
        out = _upper_first(second) + [t for t in first if t]
    else:
        out = _upper_first(template.replace("{}", " ".join(_lower_first(body))).split())
    out[-1] = out[-1] + end
    return out


def apply_op(doc: list[list[str]], m: MicroEdit) -> None:
    op, args = m.op, m.args
    if op == "delete_word":
        si, wi = _locate(doc, args[0])
        del doc[si][wi]
    elif op == "substitute_word":
        si, wi = _locate(doc, args[0])
        doc[si][wi] = args[1]
    elif op == "inject_typo":
        si, wi = _locate(doc, args[0])
        doc[si][wi] = typo_of(doc[si][wi])
    elif op == "swap_sentences":
        i, j = args
        if not (0 <= i < len(doc) and 0 <= j < len(doc)):
            raise InvalidInput("sentence index out of range")
        doc[i], doc[j] = doc[j], doc[i]
    elif op == "rewrite_sentence":
        i, t = args
        if not 0 <= i < len(doc):
            raise InvalidInput("sentence index out of range")
        doc[i] = rewrite_tokens(doc[i], t)
    else:
        raise InvalidInput(f"unknown micro-edit {op!r}")


def replay(trace: EditTrace, source: str) -> str:
    if not trace.ops:
        return source
    doc = split_sentences(source)
    for m in trace.ops:
        apply_op(doc, m)
    return render(doc)


# --------------------------------------------------------------------------
# planning


def _plan(doc: list[list[str]], lam: float, seed: int, profile: str) -> list[MicroEdit]:
    rates = PROFILE_RATES[profile]
    rng = np.random.default_rng(hash64("edit", seed))
    words = [w for s in doc for w in s]
    n_w, n_s = len(words), len(doc)
    # one draw per unit per op family, independent of lambda
    u_typo, u_syn, u_syn_pick, u_del = rng.random((4, n_w))
    u_tpl, u_tpl_pick, u_reorder, u_swap, u_swap_pick = rng.random((5, n_s))
    syn = _synonym_index()
    templates = sentence_templates()
    n_plain_templates = len(templates) - 1

    p = {k: lam * r for k, r in rates.items()}
    touched: set[int] = set()
    ops: list[MicroEdit] = []

    for i, tok in enumerate(words):
        pre, core, post = _split_edges(tok)
        group = syn.get(core.lower())
        if group and u_syn[i] < p.get("synonym", 0.0):
            choices = [g for g in group if g != core.lower()]
            new = _match_case(choices[int(u_syn_pick[i] * len(choices))], core)
            ops.append(MicroEdit("substitute_word", (i, pre + new + post)))
            touched.add(i)
        elif core and u_typo[i] < p.get("typo", 0.0):
            ops.append(MicroEdit("inject_typo", (i,)))
            touched.add(i)

    deletions = [i for i in range(n_w) if i not in touched and u_del[i] < p.get("delete", 0.0)]
    # keep at least one word per sentence so sentences survive
    per_sent = {}
    offset = 0
    for si, s in enumerate(doc):
        for k in range(len(s)):
            per_sent[offset + k] = si
        offset += len(s)
    remaining = [len(s) for s in doc]
    kept_del = []
    for i in deletions:
        si = per_sent[i]
        if remaining[si] > 1:
            remaining[si] -= 1
            kept_del.append(i)
    ops.extend(MicroEdit("delete_word", (i,)) for i in sorted(kept_del, reverse=True))

    for si in range(n_s):
        if u_reorder[si] < p.get("reorder", 0.0):
            ops.append(MicroEdit("rewrite_sentence", (si, n_plain_templates)))
        elif u_tpl[si] < p.get("template", 0.0):
            ops.append(MicroEdit("rewrite_sentence", (si, int(u_tpl_pick[si] * n_plain_templates))))

    if n_s >= 2:
        for si in range(n_s):
            if u_swap[si] < p.get("swap", 0.0):
                other = int(u_swap_pick[si] * (n_s - 1))
                other = other + 1 if other >= si else other
                ops.append(MicroEdit("swap_sentences", (si, other)))
    return ops


def apply_edit(source: str, lam: float, seed: int, profile: str = "paraphrase") -> tuple[str, EditTrace]:
    if not source or not source.split():
        raise InvalidInput("source text is empty")
    if not 0.0 <= lam <= 1.0:
        raise InvalidInput(f"lambda must lie in [0, 1], got {lam}")
    if profile not in PROFILES:
        raise InvalidInput(f"unknown profile {profile!r}")
    if lam == 0.0:
        return source, EditTrace([], lam, seed, profile)
    doc = split_sentences(source)
    ops = _plan(doc, lam, seed, profile)
    trace = EditTrace(ops, lam, seed, profile)
    return replay(trace, source), trace


def apply_edit_sequence(source: str, k: int, lambdas: Sequence[float], seeds: Sequence[int],
                        profiles: Sequence[str]) -> list[tuple[str, EditTrace]]:
    if not k == len(lambdas) == len(seeds) == len(profiles):
        raise InvalidInput("k, lambdas, seeds and profiles must have equal lengths")
    out = []
    text = source
    for lam, seed, profile in zip(lambdas, seeds, profiles):
        text, trace = apply_edit(text, lam, seed, profile)
        out.append((text, trace))
    return out
