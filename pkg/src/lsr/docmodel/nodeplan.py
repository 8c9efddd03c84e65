from __future__ import annotations

from .paths import extract_mdp
from .types import Document, NodeDesc, NodeKind, NodePlan, PlanMode


def build_node_plan(doc: Document, mode: PlanMode | str = PlanMode.WITH_MDP) -> NodePlan:
    """Mentions in document order, then entities by id, then MDP (or all) tokens."""
    mode = PlanMode(mode)
    nodes = [NodeDesc(NodeKind.MENTION, m) for m in doc.mentions]
    nodes += [NodeDesc(NodeKind.ENTITY, e.id) for e in sorted(doc.entities, key=lambda e: e.id)]
    if mode is PlanMode.WITH_MDP:
        by_sent: dict[int, list] = {}
        for m in doc.mentions:
            by_sent.setdefault(m.sent, []).append(m)
        for s in sorted(by_sent):
            for tok in extract_mdp(doc.sentences[s], by_sent[s]):
                nodes.append(NodeDesc(NodeKind.MDP, (s, tok)))
    else:
        for s, sent in enumerate(doc.sentences):
            nodes += [NodeDesc(NodeKind.TOKEN, (s, t)) for t in range(len(sent))]
    return NodePlan(tuple(nodes), mode)


def node_label(doc: Document, desc: NodeDesc) -> dict:
    """Kind, surface text and sentence index for structure dumps."""
    if desc.kind is NodeKind.MENTION:
        return {"kind": desc.kind.value, "text": doc.mention_text(desc.ref), "sent": desc.ref.sent}
    if desc.kind is NodeKind.ENTITY:
        e = doc.entity(desc.ref)
        return {"kind": desc.kind.value, "text": doc.mention_text(e.mentions[0]), "sent": None}
    s, t = desc.ref
    return {"kind": desc.kind.value, "text": doc.sentences[s].tokens[t], "sent": s}
