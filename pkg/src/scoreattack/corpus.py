"""Email corpus ingestion, keyword extraction and attacker/server splits."""
from __future__ import annotations

import email
import email.policy
import logging
import mailbox
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from nltk.stem.porter import PorterStemmer

logger = logging.getLogger(__name__)

CACHE_HEADER = "#scoreattack-corpus\tv1"
SENT_MAIL_FOLDER = "_sent_mail"
UNSUBSCRIBE_MARKER = re.compile(r"^\s*To unsubscribe,\s*e-mail:", re.IGNORECASE)
_RULE = re.compile(r"^-{10,}\s*$")
_TOKEN = re.compile(r"[a-z]+")


class IngestionError(OSError):
    """Raised when a raw archive cannot be read."""


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    body: str


@dataclass
class Corpus:
    """Preprocessed documents as ``(doc_id, keyword set)`` pairs."""

    documents: list[tuple[str, frozenset[str]]]
    name: str = "corpus"

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def doc_ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.documents]

    def keyword_sets(self) -> list[frozenset[str]]:
        return [kws for _, kws in self.documents]

    def subset(self, positions: Iterable[int], name: str | None = None) -> "Corpus":
        docs = [self.documents[i] for i in positions]
        return Corpus(docs, name=name or self.name)

    def document_frequencies(self) -> Counter:
        counts: Counter = Counter()
        for _, kws in self.documents:
            counts.update(kws)
        return counts


@dataclass
class Vocabulary:
    """Keywords ordered by descending document frequency (ties lexicographic)."""

    keywords: list[str]
    positions: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.keywords = list(self.keywords)
        self.positions = {kw: i for i, kw in enumerate(self.keywords)}
        if len(self.positions) != len(self.keywords):
            raise ValueError("vocabulary contains duplicate keywords")

    def __len__(self) -> int:
        return len(self.keywords)

    def __contains__(self, keyword) -> bool:
        return keyword in self.positions

    def __iter__(self):
        return iter(self.keywords)

    def __getitem__(self, i):
        return self.keywords[i]

    def pos(self, keyword: str) -> int:
        return self.positions[keyword]


def load_stopwords() -> frozenset[str]:
    """Bundled snapshot of the NLTK English stopword list."""
    text = resources.files("scoreattack").joinpath("data/english_stopwords.txt").read_text()
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def _message_body(msg: email.message.Message) -> str:
    if msg.is_multipart():
        parts = []
        for part in msg.walk():
            if part.get_content_maintype() == "multipart":
                continue
            if part.get_content_type() == "text/plain":
                parts.append(_decode_payload(part))
        return "\n".join(parts)
    return _decode_payload(msg)


def _decode_payload(part: email.message.Message) -> str:
    payload = part.get_payload(decode=True)
    if payload is None:
        raw = part.get_payload()
        return raw if isinstance(raw, str) else ""
    charset = part.get_content_charset() or "latin-1"
    try:
        return payload.decode(charset, errors="replace")
    except LookupError:
        return payload.decode("latin-1", errors="replace")


def parse_enron(maildir_root) -> list[RawDocument]:
    """Read every email stored under a ``_sent_mail`` folder of an Enron maildir.

    Files that do not parse as an email with a header block are skipped; the
    number of skipped files is logged as a warning.
    """
    root = Path(maildir_root)
    if not root.is_dir():
        raise IngestionError(f"Enron maildir not found or not a directory: {root}")
    docs = []
    skipped = 0
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        rel = path.relative_to(root)
        if SENT_MAIL_FOLDER not in rel.parts[:-1]:
            continue
        try:
            msg = email.message_from_bytes(path.read_bytes(), policy=email.policy.compat32)
        except OSError:
            skipped += 1
            continue
        if not msg.keys():
            skipped += 1
            continue
        docs.append(RawDocument(doc_id=rel.as_posix(), body=_message_body(msg)))
    if skipped:
        logger.warning("skipped %d malformed email files under %s", skipped, root)
    return docs


def strip_list_signature(body: str) -> str:
    """Drop the mailing-list unsubscribe footer and everything after it."""
    lines = body.splitlines()
    for i, line in enumerate(lines):
        if UNSUBSCRIBE_MARKER.match(line):
            cut = i - 1 if i > 0 and _RULE.match(lines[i - 1]) else i
            return "\n".join(lines[:cut])
    return body


def parse_apache(mbox_files: Sequence) -> list[RawDocument]:
    """One document per message of the given mbox archives, signature removed."""
    docs = []
    for mbox_path in mbox_files:
        path = Path(mbox_path)
        if not path.is_file():
            raise IngestionError(f"mbox archive not readable: {path}")
        try:
            box = mailbox.mbox(str(path), create=False)
            messages = list(box)
        except (OSError, mailbox.Error) as exc:
            raise IngestionError(f"mbox archive not readable: {path}: {exc}") from exc
        for j, msg in enumerate(messages):
            body = strip_list_signature(_message_body(msg))
            docs.append(RawDocument(doc_id=f"{path.name}:{j}", body=body))
    return docs


class KeywordExtractor:
    """Lowercase, tokenize on non-letters, drop stopwords, Porter-stem."""

    min_length = 2

    def __init__(self, stopwords: Iterable[str] | None = None):
        self.stopwords = frozenset(load_stopwords() if stopwords is None else stopwords)
        self._stemmer = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)
        self._cache: dict[str, str] = {}

    def stem(self, word: str) -> str:
        stem = self._cache.get(word)
        if stem is None:
            stem = self._cache[word] = self._stemmer.stem(word)
        return stem

    def keywords(self, text: str) -> frozenset[str]:
        return frozenset(
            self.stem(tok)
            for tok in _TOKEN.findall(text.lower())
            if len(tok) >= self.min_length and tok not in self.stopwords
        )


def preprocess(docs: Sequence[RawDocument], stopwords: Iterable[str] | None = None,
               name: str = "corpus") -> Corpus:
    extractor = KeywordExtractor(stopwords)
    return Corpus([(d.doc_id, extractor.keywords(d.body)) for d in docs], name=name)


def extract_vocabulary(corpus: Corpus, m: int) -> Vocabulary:
    """The ``m`` keywords with the highest document frequency."""
    counts = corpus.document_frequencies()
    if m > len(counts):
        raise ValueError(
            f"requested m={m} keywords but corpus '{corpus.name}' has only "
            f"{len(counts)} distinct keywords"
        )
    if m < 0:
        raise ValueError(f"m must be non-negative, got {m}")
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return Vocabulary([kw for kw, _ in ranked[:m]])


def split_corpus(corpus: Corpus, fraction_real: float, seed=None) -> tuple[Corpus, Corpus]:
    """Random disjoint split into (server side, attacker side).

    The server side gets ``floor(fraction_real * n)`` documents.
    """
    if not 0 < fraction_real < 1:
        raise ValueError(f"fraction_real must lie in (0, 1), got {fraction_real}")
    rng = np.random.default_rng(seed)
    n = len(corpus)
    perm = rng.permutation(n)
    n_real = int(np.floor(fraction_real * n))
    real_pos = np.sort(perm[:n_real])
    sim_pos = np.sort(perm[n_real:])
    return (corpus.subset(real_pos, name=f"{corpus.name}-real"),
            corpus.subset(sim_pos, name=f"{corpus.name}-sim"))


def subsample(corpus: Corpus, size: int, seed=None) -> Corpus:
    """Uniform random subset of ``size`` documents, original order kept."""
    if size > len(corpus):
        raise ValueError(f"cannot subsample {size} documents from {len(corpus)}")
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(corpus), size=size, replace=False))
    return corpus.subset(keep)


def synthetic_corpus(n_docs: int = 2000, vocab_size: int = 500, zipf_exponent: float = 1.0,
                     n_topics: int = 20, doc_length: float = 30.0, seed=None,
                     name: str = "synthetic") -> Corpus:
    """Seeded topic-mixture corpus whose keyword popularity follows a Zipf law.

    Every topic re-weights a random slice of the vocabulary so keywords get
    distinctive co-occurrence profiles; a document draws its words from one or
    two topics.
    """
    rng = np.random.default_rng(seed)
    base = 1.0 / np.arange(1, vocab_size + 1) ** zipf_exponent
    topics = []
    for _ in range(n_topics):
        boost = np.ones(vocab_size)
        favoured = rng.choice(vocab_size, size=max(1, vocab_size // 10), replace=False)
        boost[favoured] = rng.uniform(5.0, 30.0, size=favoured.size)
        p = base * boost
        topics.append(p / p.sum())
    topics = np.asarray(topics)
    words = [f"kw{j:05d}" for j in range(vocab_size)]
    docs = []
    for i in range(n_docs):
        picked = rng.choice(n_topics, size=rng.integers(1, 3), replace=False)
        p = topics[picked].mean(axis=0)
        length = 1 + rng.poisson(doc_length)
        drawn = np.unique(rng.choice(vocab_size, size=length, p=p))
        docs.append((f"doc{i:06d}", frozenset(words[j] for j in drawn)))
    return Corpus(docs, name=name)


def save_corpus(corpus: Corpus, path) -> None:
    """Write the line-oriented cache: header, then ``doc_id<TAB>keywords``."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"{CACHE_HEADER}\t{corpus.name}\n")
        for doc_id, kws in corpus.documents:
            if "\t" in doc_id or "\n" in doc_id:
                raise ValueError(f"doc_id {doc_id!r} contains a tab or newline")
            fh.write(f"{doc_id}\t{' '.join(sorted(kws))}\n")


def load_corpus(path) -> Corpus:
    path = Path(path)
    try:
        fh = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot read corpus cache {path}: {exc}") from exc
    with fh:
        header = fh.readline().rstrip("\n").split("\t")
        if "\t".join(header[:2]) != CACHE_HEADER:
            raise IngestionError(f"{path} is not a v1 corpus cache file")
        name = header[2] if len(header) > 2 else path.stem
        docs = []
        for line in fh:
            doc_id, _, kws = line.rstrip("\n").partition("\t")
            docs.append((doc_id, frozenset(kws.split())))
    return Corpus(docs, name=name)
