"""Line-oriented JSON corpus files and a DocRED converter.

One document per line::

    {"doc_id": str,
     "sentences": [{"tokens": [str], "dep_head": [int]}],
     "entities": [{"id": int, "mentions": [{"sent": int, "start": int, "end": int}]}],
     "facts": [{"h": int, "t": int, "r": int}]}

``dep_head`` is 1-based with 0 for the root; mention ``end`` is exclusive.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .types import Corpus, CorpusError, Document, Entity, Mention, RelationFact, Sentence


def _field(obj, key, where, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise CorpusError(f"{where}: missing field {key!r}")
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise CorpusError(f"{where}: field {key!r} has type {type(val).__name__}")
    return val


def document_from_dict(rec: dict, line: int | None = None) -> Document:
    doc_id = rec.get("doc_id") if isinstance(rec, dict) else None
    where = f"doc {doc_id!r}" if doc_id is not None else f"line {line}"
    doc_id = str(_field(rec, "doc_id", where))
    sentences = []
    for si, s in enumerate(_field(rec, "sentences", where, list)):
        path = f"{where} sentences[{si}]"
        try:
            sentences.append(Sentence(tuple(_field(s, "tokens", path, list)),
                                      tuple(_field(s, "dep_head", path, list))))
        except CorpusError as exc:
            raise CorpusError(f"{path}: {exc}") from None
    entities = []
    for ei, e in enumerate(_field(rec, "entities", where, list)):
        path = f"{where} entities[{ei}]"
        eid = int(_field(e, "id", path))
        ms = []
        for mi, m in enumerate(_field(e, "mentions", path, list)):
            mpath = f"{path}.mentions[{mi}]"
            ms.append(Mention(eid, int(_field(m, "sent", mpath)), int(_field(m, "start", mpath)),
                              int(_field(m, "end", mpath))))
        entities.append(Entity(eid, tuple(ms)))
    facts = []
    for fi, f in enumerate(rec.get("facts", [])):
        path = f"{where} facts[{fi}]"
        facts.append(RelationFact(int(_field(f, "h", path)), int(_field(f, "t", path)),
                                  int(_field(f, "r", path))))
    return Document(doc_id, tuple(sentences), tuple(entities), tuple(facts))


def document_to_dict(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "sentences": [{"tokens": list(s.tokens), "dep_head": list(s.dep_head)} for s in doc.sentences],
        "entities": [{"id": e.id, "mentions": [{"sent": m.sent, "start": m.start, "end": m.end}
                                               for m in e.mentions]} for e in doc.entities],
        "facts": [{"h": f.h, "t": f.t, "r": f.r} for f in doc.facts],
    }


def load_corpus(path) -> Corpus:
    """Read and validate a corpus file (JSON lines, or a single JSON array)."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            records = [(i + 1, r) for i, r in enumerate(json.loads(stripped))]
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}: invalid JSON: {exc}") from None
    else:
        records = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                records.append((lineno, json.loads(line)))
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from None
    docs = [document_from_dict(rec, line) for line, rec in records]
    return Corpus(docs)


def save_corpus(corpus: Iterable[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus:
            fh.write(json.dumps(document_to_dict(doc), ensure_ascii=False) + "\n")


def convert_docred(docred_path, heads_path, rel2id: dict[str, int] | None = None
                   ) -> tuple[Corpus, dict[str, int]]:
    """Convert DocRED's published JSON into our corpus.

    DocRED carries no parses, so ``heads_path`` must be a JSON object mapping
    each document title to a list of per-sentence ``dep_head`` arrays.
    Relation ids are assigned in sorted order unless ``rel2id`` is given.
    """
    raw = json.loads(Path(docred_path).read_text(encoding="utf-8"))
    heads = json.loads(Path(heads_path).read_text(encoding="utf-8"))
    if rel2id is None:
        names = sorted({lab["r"] for d in raw for lab in d.get("labels", [])})
        rel2id = {name: i for i, name in enumerate(names)}
    docs = []
    for di, d in enumerate(raw):
        title = d.get("title", f"doc{di}")
        if title not in heads:
            raise CorpusError(f"doc {title!r}: no dependency heads in sidecar file")
        sents = d["sents"]
        rec = {
            "doc_id": title,
            "sentences": [{"tokens": toks, "dep_head": hs} for toks, hs in zip(sents, heads[title])],
            "entities": [{"id": ei, "mentions": [{"sent": m["sent_id"], "start": m["pos"][0], "end": m["pos"][1]}
                                                 for m in _dedupe(vs)]}
                         for ei, vs in enumerate(d["vertexSet"])],
            "facts": [],
        }
        if len(heads[title]) != len(sents):
            raise CorpusError(f"doc {title!r}: sidecar has {len(heads[title])} sentences, document {len(sents)}")
        seen = set()
        for lab in d.get("labels", []):
            if lab["r"] not in rel2id:
                raise CorpusError(f"doc {title!r}: relation {lab['r']!r} not in relation map")
            key = (lab["h"], lab["t"], rel2id[lab["r"]])
            if key not in seen:
                seen.add(key)
                rec["facts"].append({"h": key[0], "t": key[1], "r": key[2]})
        docs.append(document_from_dict(rec))
    return Corpus(docs), rel2id


def _dedupe(mentions: list[dict]) -> list[dict]:
    # DocRED occasionally repeats or nests mention spans; keep the first non-overlapping ones
    kept: list[dict] = []
    for m in sorted(mentions, key=lambda m: (m["sent_id"], m["pos"][0], -m["pos"][1])):
        if any(k["sent_id"] == m["sent_id"] and k["pos"][0] < m["pos"][1] and m["pos"][0] < k["pos"][1]
               for k in kept):
            continue
        kept.append(m)
    return kept
