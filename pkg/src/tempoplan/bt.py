"""Behavior trees from the ordering DAG of a consistent STN."""
from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Optional, Union
from xml.sax.saxutils import quoteattr

import networkx as nx

from .domain import Effect
from .dsl import parse_term
from .planner import TotalOrderPlan
from .stn import ORDERING_KINDS, Stn


class CycleRemains(Exception):
    pass


class BtFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Sequence:
    children: tuple = ()


@dataclass(frozen=True)
class Parallel:
    children: tuple = ()
    success_threshold: int = 0


@dataclass(frozen=True)
class CheckCondition:
    literal: object


@dataclass(frozen=True)
class ApplyEffect:
    effect: Effect


@dataclass(frozen=True)
class ActionLeaf:
    snap: object
    role: str  # "start" | "end"
    step: Optional[int] = None


BtNode = Union[Sequence, Parallel, CheckCondition, ApplyEffect, ActionLeaf]


@dataclass
class BtDag:
    graph: nx.DiGraph = field(default_factory=nx.DiGraph)

    @property
    def edges(self) -> list:
        return sorted(self.graph.edges())

    @property
    def nodes(self) -> list:
        return sorted(self.graph.nodes())


def strip_backward_edges(stn: Stn) -> BtDag:
    """Keep only the ordering edges, turned into precedence arcs ``i -> j``."""
    g = nx.DiGraph()
    g.add_nodes_from(range(stn.n))
    for e in stn.edges:
        if e.kind in ORDERING_KINDS:
            g.add_edge(e.dst, e.src)
    if not nx.is_directed_acyclic_graph(g):
        raise CycleRemains(f"ordering cycle: {nx.find_cycle(g)}")
    return BtDag(g)


def snap_subtree(step) -> Sequence:
    act = step.action
    role = "start" if act.is_start else "end"
    kids = [CheckCondition(c) for c in act.preconditions()]
    kids.append(ActionLeaf(act.ground_name, role, step.index))
    kids.extend(ApplyEffect(e) for e in act.effects())
    return Sequence(tuple(kids))


def _seq(items: list):
    return items[0] if len(items) == 1 else Sequence(tuple(items))


def emit_bt(dag: BtDag, plan: TotalOrderPlan) -> Sequence:
    """Series-parallel tree whose execution order respects every DAG edge.

    A node comparable with every other node splits the set into what comes
    before and after it; otherwise incomparable groups run under a Parallel,
    and as a last resort the minimal nodes run before the rest.
    """
    g = dag.graph.copy()
    if 0 in g:
        g.remove_node(0)
    order = list(nx.lexicographical_topological_sort(g))
    rank = {x: i for i, x in enumerate(order)}
    desc = {x: nx.descendants(g, x) for x in g}
    anc = {x: nx.ancestors(g, x) for x in g}
    steps = {s.index: s for s in plan.steps}

    def emit(nodes: set) -> list:
        if not nodes:
            return []
        ordered = sorted(nodes, key=rank.__getitem__)
        if len(ordered) == 1:
            return [snap_subtree(steps[ordered[0]])]
        for x in ordered:
            related = anc[x] | desc[x]
            if nodes - {x} <= related:
                return emit(nodes & anc[x]) + [snap_subtree(steps[x])] + emit(nodes & desc[x])
        comparable = nx.Graph()
        comparable.add_nodes_from(nodes)
        comparable.add_edges_from((x, y) for x in nodes for y in desc[x] & nodes)
        comps = sorted((sorted(c, key=rank.__getitem__) for c in nx.connected_components(comparable)),
                       key=lambda c: rank[c[0]])
        if len(comps) > 1:
            branches = tuple(_seq(emit(set(c))) for c in comps)
            return [Parallel(branches, len(branches))]
        sources = {x for x in nodes if not (anc[x] & nodes)}
        return emit(sources) + emit(nodes - sources)

    return Sequence(tuple(emit(set(g.nodes))))


def build_bt(stn: Stn, plan: TotalOrderPlan) -> Sequence:
    return emit_bt(strip_backward_edges(stn), plan)


def action_leaves(bt) -> list:
    if isinstance(bt, ActionLeaf):
        return [bt]
    if isinstance(bt, (Sequence, Parallel)):
        return [leaf for c in bt.children for leaf in action_leaves(c)]
    return []


# -- XML ---------------------------------------------------------------------

def _attrs(pairs) -> str:
    return "".join(f" {k}={quoteattr(str(v))}" for k, v in pairs)


def _xml_lines(node, depth: int, out: list):
    pad = "  " * depth
    if isinstance(node, (Sequence, Parallel)):
        tag = type(node).__name__
        attrs = _attrs([("success_threshold", node.success_threshold)]) if isinstance(node, Parallel) else ""
        if not node.children:
            out.append(f"{pad}<{tag}{attrs}/>")
            return
        out.append(f"{pad}<{tag}{attrs}>")
        for c in node.children:
            _xml_lines(c, depth + 1, out)
        out.append(f"{pad}</{tag}>")
    elif isinstance(node, CheckCondition):
        out.append(f"{pad}<Condition{_attrs([('literal', node.literal)])}/>")
    elif isinstance(node, ActionLeaf):
        pairs = [("id", node.snap), ("role", node.role)]
        if node.step is not None:
            pairs.append(("step", node.step))
        out.append(f"{pad}<Action{_attrs(pairs)}/>")
    elif isinstance(node, ApplyEffect):
        out.append(f"{pad}<Effect{_attrs([('op', node.effect.kind), ('literal', node.effect.literal)])}/>")
    else:
        raise TypeError(f"not a behavior-tree node: {node!r}")


def serialize_xml(bt) -> str:
    out: list = []
    _xml_lines(bt, 0, out)
    return "\n".join(out) + "\n"


def _from_element(el):
    tag = el.tag
    if tag == "Sequence":
        return Sequence(tuple(_from_element(c) for c in el))
    if tag == "Parallel":
        kids = tuple(_from_element(c) for c in el)
        return Parallel(kids, int(el.get("success_threshold", len(kids))))
    try:
        if tag == "Condition":
            return CheckCondition(parse_term(el.attrib["literal"], aliases=False))
        if tag == "Action":
            step = el.get("step")
            return ActionLeaf(parse_term(el.attrib["id"], aliases=False), el.attrib["role"],
                              None if step is None else int(step))
        if tag == "Effect":
            return ApplyEffect(Effect(el.attrib["op"], parse_term(el.attrib["literal"], aliases=False)))
    except KeyError as exc:
        raise BtFormatError(f"<{tag}> lacks attribute {exc}") from None
    raise BtFormatError(f"unknown element <{tag}>")


def parse_xml(text: str):
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise BtFormatError(str(exc)) from None
    return _from_element(root)


# -- DOT ---------------------------------------------------------------------

def _dot_label(node) -> str:
    if isinstance(node, Parallel):
        return f"Parallel ({node.success_threshold})"
    if isinstance(node, Sequence):
        return "Sequence"
    if isinstance(node, CheckCondition):
        return f"? {node.literal}"
    if isinstance(node, ActionLeaf):
        return f"{node.snap}"
    return str(node.effect)


_SHAPES = {Sequence: "box", Parallel: "box", CheckCondition: "ellipse",
           ActionLeaf: "box", ApplyEffect: "note"}


def bt_to_dot(bt) -> str:
    lines = ["digraph bt {", "  node [fontname=monospace];"]
    counter = [0]

    def walk(node) -> int:
        me = counter[0]
        counter[0] += 1
        style = ' style=filled fillcolor="#dddddd"' if isinstance(node, ActionLeaf) else ""
        label = _dot_label(node).replace('"', '\\"')
        lines.append(f'  n{me} [label="{label}" shape={_SHAPES[type(node)]}{style}];')
        for c in getattr(node, "children", ()):
            lines.append(f"  n{me} -> n{walk(c)};")
        return me

    walk(bt)
    lines.append("}")
    return "\n".join(lines) + "\n"
