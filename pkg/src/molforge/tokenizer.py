"""Word-level closed-world tokenizer with continuous numeric payload tokens.

The corpus is finite (template sentences plus template descriptions), so a
closed vocabulary is exact: every word maps to one id, and numbers never
appear as digit strings. A numeric quantity occupies a reserved NUM token
whose embedding is later computed by an MLP from a raw patch of up to
``PATCH_WIDTH`` scalars.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .catalog import NUM_PLACEHOLDER, PATCH_WIDTH, SentenceWithSlots
from .errors import (EmptyCorpus, InvalidId, SequenceTooLong, SlotMismatch,
                     UnknownToken)

PAD, BOS, EOS, NUM, SEP_TEXT_START = 0, 1, 2, 3, 4
SPECIAL_TOKENS = ("<pad>", "<bos>", "<eos>", NUM_PLACEHOLDER, "<sep>")
N_SPECIALS = len(SPECIAL_TOKENS)
MAX_SEQ_LEN = 512


class Segment(Enum):
    PROMPT = 0
    TEXT_TARGET = 1


@dataclass(frozen=True)
class Vocab:
    token_to_id: dict[str, int]
    id_to_token: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def lookup(self, word: str) -> int:
        try:
            return self.token_to_id[word]
        except KeyError:
            raise UnknownToken(f"word {word!r} is outside the closed corpus "
                               "(template/vocab drift?)") from None

    def to_json(self) -> str:
        entries = [{"token": t, "id": i, "special": i < N_SPECIALS}
                   for i, t in enumerate(self.id_to_token)]
        return json.dumps({"format_version": 1, "tokens": entries}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Vocab":
        entries = json.loads(text)["tokens"]
        id_to_token = tuple(e["token"] for e in sorted(entries, key=lambda e: e["id"]))
        return cls(token_to_id={t: i for i, t in enumerate(id_to_token)},
                   id_to_token=id_to_token)


@dataclass
class TokenSequence:
    ids: np.ndarray                                 # [n] int64
    numeric_payloads: list[tuple[int, np.ndarray]]  # (position, patch[P])
    segments: np.ndarray                            # [n] int64 of Segment values
    attention_mask: np.ndarray = field(default=None)  # [n] bool

    def __post_init__(self):
        if self.attention_mask is None:
            self.attention_mask = np.ones(self.ids.shape[0], dtype=bool)
        positions = [p for p, _ in self.numeric_payloads]
        num_positions = set(np.flatnonzero(self.ids == NUM).tolist())
        if set(positions) != num_positions or len(positions) != len(num_positions):
            raise SlotMismatch("NUM token positions and payloads disagree")

    def __len__(self) -> int:
        return int(self.ids.shape[0])


def tokenize_words(text: str) -> list[str]:
    """Whitespace-and-punctuation split; punctuation marks become tokens."""
    out: list[str] = []
    for chunk in text.split():
        word = chunk
        # peel trailing punctuation (possibly several, e.g. ".)")
        tail: list[str] = []
        while word and word[-1] in ".,;:!?)":
            tail.append(word[-1])
            word = word[:-1]
        while word and word[0] in "(":
            out.append(word[0])
            word = word[1:]
        if word:
            out.append(word)
        out.extend(reversed(tail))
    return out


def build_vocab(corpus: list[str]) -> Vocab:
    """Closed-world vocabulary; ids ordered by frequency then lexicographic."""
    if not corpus:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    counts: Counter[str] = Counter()
    for sentence in corpus:
        counts.update(w for w in tokenize_words(sentence)
                      if w != NUM_PLACEHOLDER)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    id_to_token = list(SPECIAL_TOKENS) + [w for w, _ in ordered]
    return Vocab(token_to_id={t: i for i, t in enumerate(id_to_token)},
                 id_to_token=tuple(id_to_token))


def patch_scalars(values: np.ndarray, width: int = PATCH_WIDTH) -> list[np.ndarray]:
    """One zero-padded patch per scalar (slot semantics stay one-to-one)."""
    patches = []
    for v in np.asarray(values, dtype=np.float64).ravel():
        p = np.zeros(width)
        p[0] = v
        patches.append(p)
    return patches


def patch_vector(values: np.ndarray, width: int = PATCH_WIDTH) -> list[np.ndarray]:
    """Chunk a grid vector into consecutive patches, zero-padding the last."""
    flat = np.asarray(values, dtype=np.float64).ravel()
    n_patches = -(-flat.shape[0] // width)
    padded = np.zeros(n_patches * width)
    padded[: flat.shape[0]] = flat
    return [padded[i * width:(i + 1) * width] for i in range(n_patches)]


def encode_multimodal(sentence: SentenceWithSlots, coeff_values: np.ndarray,
                      ic_values: np.ndarray, target_text: str, vocab: Vocab,
                      max_len: int = MAX_SEQ_LEN) -> TokenSequence:
    """BOS + prompt tokens + SEP + target text tokens + EOS.

    Coefficient slots become one NUM patch each; the IC vector is chunked
    into PATCH_WIDTH-wide patches filling the IC slots in order.
    """
    coeff_patches = patch_scalars(coeff_values)
    ic_patches = patch_vector(ic_values)
    if len(coeff_patches) != sentence.n_coeff_slots:
        raise SlotMismatch(f"{len(coeff_patches)} coefficient patches for "
                           f"{sentence.n_coeff_slots} slots")
    if len(ic_patches) != sentence.n_ic_slots:
        raise SlotMismatch(f"{len(ic_patches)} IC patches for "
                           f"{sentence.n_ic_slots} slots")

    payload_iter = iter(coeff_patches + ic_patches)
    ids: list[int] = [BOS]
    payloads: list[tuple[int, np.ndarray]] = []
    for word in tokenize_words(sentence.text):
        if word == NUM_PLACEHOLDER:
            payloads.append((len(ids), next(payload_iter)))
            ids.append(NUM)
        else:
            ids.append(vocab.lookup(word))
    remaining = sum(1 for _ in payload_iter)
    if remaining:
        raise SlotMismatch(f"{remaining} numeric patches had no slot")
    n_prompt = len(ids) + 1          # prompt segment includes SEP
    ids.append(SEP_TEXT_START)
    for word in tokenize_words(target_text):
        if word == NUM_PLACEHOLDER:
            raise UnknownToken("numeric placeholder not allowed in target text")
        ids.append(vocab.lookup(word))
    ids.append(EOS)
    if len(ids) > max_len:
        raise SequenceTooLong(f"sequence of {len(ids)} tokens exceeds {max_len}")
    segments = np.where(np.arange(len(ids)) < n_prompt,
                        Segment.PROMPT.value, Segment.TEXT_TARGET.value)
    return TokenSequence(ids=np.asarray(ids, dtype=np.int64),
                         numeric_payloads=payloads,
                         segments=segments.astype(np.int64))


def decode_text(ids, vocab: Vocab) -> str:
    """Inverse word mapping; specials are stripped, NUM renders literally."""
    words: list[str] = []
    for i in np.asarray(ids, dtype=np.int64).ravel():
        if i < 0 or i >= vocab.size:
            raise InvalidId(f"token id {int(i)} outside vocabulary of size {vocab.size}")
        if i == NUM:
            words.append(NUM_PLACEHOLDER)
        elif i < N_SPECIALS:
            continue
        else:
            words.append(vocab.id_to_token[int(i)])
    return " ".join(words)
