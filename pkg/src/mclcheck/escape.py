"""Points-to graphs, escape summaries, and lifetime-annotation checks.

Each method gets one flow-insensitive exit graph.  Nodes are allocation
sites (solid), parameters and field loads (dotted), plus a single global
node.  Calls inline the callee's pruned summary: parameter nodes map to
argument nodes, allocation sites keep their identity, load nodes replay
their field chain in the caller.  Recursive components iterate from
empty summaries to a fixpoint; everything only grows, so the fixpoint
is reached once no graph changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import callgraph
from .frontend.syntax import (
    Assign,
    AugAssign,
    CallStmt,
    ClassDecl,
    Expr,
    FieldRef,
    ForStmt,
    IfStmt,
    IndexRef,
    LocalDecl,
    MethodDecl,
    NewStmt,
    OutArg,
    ParenExpr,
    PathExpr,
    Program,
    ReturnStmt,
    Stmt,
    Tag,
    ThisRef,
    VarRef,
)

ARRAY_FIELD = "[*]"
LOAD_DEPTH_CAP = 3

OK = "Ok"
TAG_MISMATCH = "TagMismatch"
ESCAPES_UNANNOTATED = "EscapesButUnannotated"
ANNOTATED_CAPTURED = "AnnotatedButCaptured"
SUPPRESSED = "SuppressedByDestLocal"


class MissingSummary(Exception):
    pass


class UnknownTag(Exception):
    pass


@dataclass(frozen=True)
class PTGNode:
    kind: str  # inside | param | load | global
    key: str
    base: "PTGNode | None" = None  # load nodes only
    field: str | None = None
    depth: int = 0

    def sort_key(self):
        return (self.kind, self.depth, self.key)

    def __str__(self) -> str:
        return self.key


GLOBAL_NODE = PTGNode("global", "<global>")


def inside_node(site: str) -> PTGNode:
    return PTGNode("inside", site)


def param_node(name: str) -> PTGNode:
    return PTGNode("param", name)


class PointsToGraph:
    """L/N/E plus the returned set; mutated only while building."""

    def __init__(self):
        self.L: dict[str, set[PTGNode]] = {}
        self.N: set[PTGNode] = set()
        self.E: set[tuple[PTGNode, str, PTGNode]] = set()
        self.returned: set[PTGNode] = set()
        self.changed = False
        # populated by the builder for the lifetime checker
        self.tagged: dict[Tag, set[PTGNode]] = {}
        self.call_records: list[CallRecord] = []
        self.site_records: list[SiteRecord] = []

    def add_node(self, n: PTGNode) -> None:
        if n not in self.N:
            self.N.add(n)
            self.changed = True

    def add_edge(self, a: PTGNode, f: str, b: PTGNode) -> None:
        self.add_node(a)
        self.add_node(b)
        e = (a, f, b)
        if e not in self.E:
            self.E.add(e)
            self.changed = True

    def bind(self, var: str, nodes: set[PTGNode]) -> None:
        cur = self.L.setdefault(var, set())
        fresh = nodes - cur
        if fresh:
            for n in fresh:
                self.add_node(n)
            cur |= fresh
            self.changed = True

    def var_set(self, var: str) -> set[PTGNode]:
        return self.L.get(var, set())

    def targets(self, n: PTGNode, f: str) -> set[PTGNode]:
        return {b for (a, g, b) in self.E if a == n and g == f}

    def load(self, bases: set[PTGNode], f: str) -> set[PTGNode]:
        """Field read: existing targets, else a fresh collapsed load node."""
        out: set[PTGNode] = set()
        for b in bases:
            tgts = self.targets(b, f)
            if tgts:
                out |= tgts
            elif b.depth >= LOAD_DEPTH_CAP:
                # x = x.next style chains: fold back onto the base
                self.add_edge(b, f, b)
                out.add(b)
            else:
                ln = PTGNode("load", f"{b.key}.{f}", base=b, field=f, depth=b.depth + 1)
                self.add_edge(b, f, ln)
                out.add(ln)
        return out

    def reach_from(self, start: set[PTGNode]) -> set[PTGNode]:
        seen = set(start)
        work = list(start)
        while work:
            n = work.pop()
            for (a, _, b) in self.E:
                if a == n and b not in seen:
                    seen.add(b)
                    work.append(b)
        return seen

    def canonical(self) -> dict:
        return {
            "L": {v: sorted(n.key for n in ns) for v, ns in sorted(self.L.items()) if ns},
            "N": sorted(n.key for n in self.N),
            "E": sorted((a.key, f, b.key) for (a, f, b) in self.E),
            "returned": sorted(n.key for n in self.returned),
        }


def reachable(ptg: PointsToGraph, from_nodes: set[PTGNode], target: PTGNode) -> bool:
    return target in ptg.reach_from(from_nodes)


@dataclass
class CallRecord:
    """One call (or ctor) site: what the callee's tags map to here."""

    site: str
    add_esc: list[tuple[Tag, Tag]]
    mapped_tagged: dict[Tag, set[PTGNode]]
    callee: str


@dataclass
class SiteRecord:
    """One allocation site with its lifetime annotation, if any."""

    site: str
    node: PTGNode
    dest_esc: Tag | None
    dest_local: bool


@dataclass
class EscapeSummary:
    method: str
    ptg: PointsToGraph  # pruned exit graph
    escaping: dict[str, list[str]]  # alloc site -> escape roots
    param_names: list[str]  # reference params, "this" first when present
    out_sets: dict[str, set[PTGNode]]
    tagged: dict[Tag, set[PTGNode]]
    returned: set[PTGNode]


@dataclass(frozen=True)
class LifetimeVerdict:
    method: str
    where: str  # allocation site or call site
    kind: str
    tag: str | None = None
    note: str = ""

    def to_json(self) -> dict:
        out = {"method": self.method, "where": self.where, "kind": self.kind}
        if self.tag:
            out["tag"] = self.tag
        if self.note:
            out["note"] = self.note
        return out


def _ref_params(method: MethodDecl, class_map: dict[str, ClassDecl]) -> list[str]:
    names = ["this"]
    for p in method.params:
        if p.decl_type.name in class_map and not p.is_out:
            names.append(p.name)
    return names


class _Builder:
    def __init__(self, method: MethodDecl, cls: ClassDecl,
                 summaries: dict[str, EscapeSummary],
                 class_map: dict[str, ClassDecl]):
        self.m = method
        self.cls = cls
        self.summaries = summaries
        self.class_map = class_map
        self.g = PointsToGraph()
        for name in _ref_params(method, class_map):
            self.g.bind(name, {param_node(name)})
        self.recording = False

    # -- expression nodes -----------------------------------------------------

    def nodes_of(self, e: Expr | None) -> set[PTGNode]:
        if e is None:
            return set()
        if isinstance(e, ParenExpr):
            return self.nodes_of(e.inner)
        if isinstance(e, VarRef):
            return self.g.var_set(e.name)
        if isinstance(e, ThisRef):
            return self.g.var_set("this")
        if isinstance(e, FieldRef):
            return self.g.load(self.nodes_of(e.base), e.field)
        if isinstance(e, IndexRef):
            return self.g.load(self.nodes_of(e.base), ARRAY_FIELD)
        return set()  # literals, arithmetic, null: never references

    def store(self, target: Expr, values: set[PTGNode]) -> None:
        if isinstance(target, VarRef):
            self.g.bind(target.name, values)
        elif isinstance(target, FieldRef):
            for a in self.nodes_of(target.base):
                for b in values:
                    self.g.add_edge(a, target.field, b)
        elif isinstance(target, IndexRef):
            for a in self.nodes_of(target.base):
                for b in values:
                    self.g.add_edge(a, ARRAY_FIELD, b)

    # -- summary inlining -------------------------------------------------------

    def inline(self, summary: EscapeSummary, argmap: dict[str, set[PTGNode]]):
        memo: dict[PTGNode, set[PTGNode]] = {}

        def mu(n: PTGNode) -> set[PTGNode]:
            if n in memo:
                return memo[n]
            if n.kind == "param":
                out = set(argmap.get(n.key, set()))
            elif n.kind == "inside":
                self.g.add_node(n)
                out = {n}
            elif n.kind == "global":
                self.g.add_node(GLOBAL_NODE)
                out = {GLOBAL_NODE}
            else:  # load: replay the field access on the mapped base
                memo[n] = set()  # cut cycles from the cap's self-edges
                out = self.g.load(mu(n.base), n.field)
            memo[n] = out
            return out

        for (a, f, b) in sorted(summary.ptg.E, key=lambda e: (e[0].sort_key(), e[1], e[2].sort_key())):
            for ma in mu(a):
                for mb in mu(b):
                    self.g.add_edge(ma, f, mb)
        returned = set()
        for n in sorted(summary.returned, key=PTGNode.sort_key):
            returned |= mu(n)
        outs = {p: set().union(*(mu(n) for n in ns)) if ns else set()
                for p, ns in summary.out_sets.items()}
        tagged = {t: set().union(*(mu(n) for n in ns)) if ns else set()
                  for t, ns in summary.tagged.items()}
        return returned, outs, tagged

    def callee_summary(self, qname: str) -> EscapeSummary | None:
        return self.summaries.get(qname)

    def apply_call(self, callee_q: str, this_nodes: set[PTGNode],
                   pos_args: list, out_targets: dict[str, Expr],
                   target: Expr | None, add_esc, site: str) -> None:
        summary = self.callee_summary(callee_q)
        callee = None
        try:
            callee = _method_of(self.class_map, callee_q)
        except KeyError:
            pass
        if summary is None or callee is None:
            return  # empty bootstrap summary: no effect this round
        argmap: dict[str, set[PTGNode]] = {"this": this_nodes}
        for p, a in zip(callee.params, pos_args):
            if isinstance(a, OutArg):
                continue
            if p.decl_type.name in self.class_map:
                argmap[p.name] = self.nodes_of(a)
        returned, outs, tagged = self.inline(summary, argmap)
        if target is not None:
            self.store(target, returned)
        for p_name, lv in out_targets.items():
            self.store(lv, outs.get(p_name, set()))
        if self.recording:
            self.g.call_records.append(
                CallRecord(site=site, add_esc=list(add_esc),
                           mapped_tagged=tagged, callee=callee_q))

    # -- statement interpretation ----------------------------------------------

    def walk(self, body: list[Stmt]) -> None:
        for s in body:
            self.stmt(s)

    def stmt(self, s: Stmt) -> None:
        if isinstance(s, LocalDecl):
            if s.init is not None:
                self.g.bind(s.name, self.nodes_of(s.init))
        elif isinstance(s, Assign):
            self.store(s.target, self.nodes_of(s.value))
        elif isinstance(s, AugAssign):
            pass  # integer counters only
        elif isinstance(s, NewStmt):
            node = inside_node(s.site)
            self.g.add_node(node)
            self.store(s.target, {node})
            if self.recording:
                self.g.site_records.append(
                    SiteRecord(site=s.site, node=node,
                               dest_esc=s.dest_esc, dest_local=s.dest_local))
            if not s.class_ref.is_array:
                cls = self.class_map.get(s.class_ref.name)
                ctor = cls.ctor() if cls else None
                if ctor is not None:
                    self.apply_call(ctor.qname, {node}, s.args, {}, None,
                                    s.add_esc, s.site)
        elif isinstance(s, CallStmt):
            callee_q = s.resolved
            if callee_q is None:
                return
            callee = _method_of(self.class_map, callee_q)
            this_nodes = self.nodes_of(s.receiver) if s.receiver is not None \
                else self.g.var_set("this")
            out_targets = {}
            for p, a in zip(callee.params, s.args):
                if isinstance(a, OutArg):
                    out_targets[p.name] = a.target
            self.apply_call(callee_q, this_nodes, s.args, out_targets,
                            s.target, s.add_esc, s.site)
        elif isinstance(s, ReturnStmt):
            if s.value is not None:
                vals = self.nodes_of(s.value)
                fresh = vals - self.g.returned
                if fresh:
                    self.g.returned |= fresh
                    self.g.changed = True
        elif isinstance(s, IfStmt):
            self.walk(s.then_body)
            self.walk(s.else_body)
        elif isinstance(s, ForStmt):
            self.walk(s.body)
        # contract statements and annotations carry no heap effect

    def run(self) -> PointsToGraph:
        while True:
            self.g.changed = False
            self.walk(self.m.body)
            if not self.g.changed:
                break
        # one stable pass to record call/site facts and tag sets
        self.recording = True
        self.g.call_records = []
        self.g.site_records = []
        self.walk(self.m.body)
        self.g.changed = False
        self.g.tagged = self._collect_tagged()
        return self.g

    def _collect_tagged(self) -> dict[Tag, set[PTGNode]]:
        tagged: dict[Tag, set[PTGNode]] = {}
        for rec in self.g.site_records:
            if rec.dest_esc is not None:
                tagged.setdefault(rec.dest_esc, set()).add(rec.node)
        for rec in self.g.call_records:
            for dst, src in rec.add_esc:
                pulled = rec.mapped_tagged.get(src, set())
                if pulled:
                    tagged.setdefault(dst, set()).update(pulled)
        return tagged


def _method_of(class_map: dict[str, ClassDecl], qname: str) -> MethodDecl:
    cls_name, _, name = qname.partition(".")
    for m in class_map[cls_name].methods:
        if m.name == name:
            return m
    raise KeyError(qname)


def build_ptg(method: MethodDecl, summaries: dict[str, EscapeSummary],
              class_map: dict[str, ClassDecl]) -> PointsToGraph:
    cls = class_map[method.cls]
    return _Builder(method, cls, summaries, class_map).run()


def _root_sets(g: PointsToGraph, method: MethodDecl,
               class_map: dict[str, ClassDecl]) -> dict[str, set[PTGNode]]:
    roots: dict[str, set[PTGNode]] = {}
    for name in _ref_params(method, class_map):
        roots["This" if name == "this" else f"Param({name})"] = {param_node(name)}
    for p in method.params:
        if p.is_out and p.decl_type.name in class_map:
            roots[f"Param({p.name})"] = set(g.var_set(p.name))
    roots["Return"] = set(g.returned)
    if GLOBAL_NODE in g.N:
        roots["Global"] = {GLOBAL_NODE}
    return roots


def _tag_root(g: PointsToGraph, method: MethodDecl, tag: Tag,
              bindings: dict[Tag, PathExpr]) -> set[PTGNode]:
    if tag.kind == "return":
        return set(g.returned)
    if tag.kind == "this":
        return {param_node("this")}
    path = bindings.get(tag)
    if path is None:
        raise UnknownTag(str(tag))
    if path.root == "return":
        cur = set(g.returned)
    elif path.root == "this":
        cur = {param_node("this")}
    else:
        cur = set(g.var_set(path.root))
    for f in path.fields:
        nxt: set[PTGNode] = set()
        for n in cur:
            nxt |= g.targets(n, f)
        cur = nxt
    return cur


def check_lifetimes(method: MethodDecl, ptg: PointsToGraph,
                    class_map: dict[str, ClassDecl]) -> list[LifetimeVerdict]:
    contract = method.contract
    roots = _root_sets(ptg, method, class_map)
    all_roots: set[PTGNode] = set().union(*roots.values()) if roots else set()
    escaped = ptg.reach_from(all_roots)

    def roots_reaching(n: PTGNode) -> list[str]:
        return sorted(r for r, ns in roots.items() if n in ptg.reach_from(ns))

    out: list[LifetimeVerdict] = []
    for rec in ptg.site_records:
        if rec.dest_local:
            out.append(LifetimeVerdict(method.qname, rec.site, SUPPRESSED))
            continue
        if rec.dest_esc is None:
            if rec.node in escaped:
                out.append(LifetimeVerdict(
                    method.qname, rec.site, ESCAPES_UNANNOTATED,
                    note=f"reachable from {', '.join(roots_reaching(rec.node))}"))
            else:
                out.append(LifetimeVerdict(method.qname, rec.site, OK))
            continue
        tag = rec.dest_esc
        if rec.node not in escaped:
            out.append(LifetimeVerdict(
                method.qname, rec.site, ANNOTATED_CAPTURED, tag=str(tag),
                note="annotated as escaping but unreachable from every root"))
            continue
        tag_nodes = _tag_root(ptg, method, tag, contract.bindings)
        if rec.node in ptg.reach_from(tag_nodes):
            out.append(LifetimeVerdict(method.qname, rec.site, OK, tag=str(tag)))
        else:
            out.append(LifetimeVerdict(
                method.qname, rec.site, TAG_MISMATCH, tag=str(tag),
                note=f"actually reachable from {', '.join(roots_reaching(rec.node))}"))

    for rec in ptg.call_records:
        covered = {src for (_, src) in rec.add_esc}
        for dst, src in rec.add_esc:
            pulled = rec.mapped_tagged.get(src, set())
            if not pulled:
                out.append(LifetimeVerdict(
                    method.qname, rec.site, OK, tag=str(dst),
                    note=f"callee has no objects under tag {src}"))
                continue
            dst_nodes = _tag_root(ptg, method, dst, contract.bindings)
            reach = ptg.reach_from(dst_nodes)
            if all(n in reach for n in pulled):
                out.append(LifetimeVerdict(method.qname, rec.site, OK, tag=str(dst)))
            else:
                out.append(LifetimeVerdict(
                    method.qname, rec.site, TAG_MISMATCH, tag=str(dst),
                    note=f"objects from {rec.callee} tag {src} do not reach {dst}"))
        for src, pulled in sorted(rec.mapped_tagged.items(), key=lambda kv: str(kv[0])):
            if src in covered or not pulled:
                continue
            leaking = sorted(n.key for n in pulled if n in escaped)
            if leaking:
                out.append(LifetimeVerdict(
                    method.qname, rec.site, ESCAPES_UNANNOTATED, tag=str(src),
                    note=f"callee {rec.callee} objects ({', '.join(leaking)}) stay "
                         f"reachable but no add_esc claims them"))
    return out


def summarize_ptg(method: MethodDecl, g: PointsToGraph,
                  class_map: dict[str, ClassDecl]) -> EscapeSummary:
    """Prune to what callers can observe and classify escaping sites."""
    roots = _root_sets(g, method, class_map)
    out_sets = {p.name: set(g.var_set(p.name))
                for p in method.params
                if p.is_out and p.decl_type.name in class_map}
    keep_seeds: set[PTGNode] = set().union(*roots.values()) if roots else set()
    for t, ns in g.tagged.items():
        keep_seeds |= ns
    keep = g.reach_from(keep_seeds)

    pruned = PointsToGraph()
    for n in keep:
        pruned.add_node(n)
    for (a, f, b) in g.E:
        if a in keep and b in keep:
            pruned.add_edge(a, f, b)
    pruned.returned = set(g.returned) & keep
    pruned.changed = False

    escaping: dict[str, list[str]] = {}
    for rec in g.site_records:
        hit = sorted(r for r, ns in roots.items()
                     if rec.node in g.reach_from(ns))
        if hit:
            escaping[rec.site] = hit

    return EscapeSummary(
        method=method.qname,
        ptg=pruned,
        escaping=escaping,
        param_names=_ref_params(method, class_map),
        out_sets={p: ns & keep for p, ns in out_sets.items()},
        tagged={t: ns & keep for t, ns in g.tagged.items()},
        returned=set(pruned.returned),
    )


@dataclass
class EscapeAnalysis:
    summaries: dict[str, EscapeSummary]
    graphs: dict[str, PointsToGraph]
    lifetimes: dict[str, list[LifetimeVerdict]]


def analyze(program: Program) -> EscapeAnalysis:
    class_map = program.class_map()
    methods = {m.qname: m for m in program.methods()}
    summaries: dict[str, EscapeSummary] = {}
    graphs: dict[str, PointsToGraph] = {}

    for comp in callgraph.sccs(program):
        while True:
            stable = True
            for qname in comp:
                m = methods[qname]
                g = build_ptg(m, summaries, class_map)
                new = summarize_ptg(m, g, class_map)
                old = summaries.get(qname)
                if old is None or _summary_fingerprint(old) != _summary_fingerprint(new):
                    stable = False
                summaries[qname] = new
                graphs[qname] = g
            if stable:
                break

    lifetimes = {q: check_lifetimes(methods[q], graphs[q], class_map)
                 for q in methods}
    return EscapeAnalysis(summaries=summaries, graphs=graphs, lifetimes=lifetimes)


def escape_summaries(program: Program) -> dict[str, EscapeSummary]:
    return analyze(program).summaries


def _summary_fingerprint(s: EscapeSummary):
    return (
        s.ptg.canonical()["E"],
        sorted(s.ptg.canonical()["N"]),
        sorted(n.key for n in s.returned),
        sorted((p, tuple(sorted(n.key for n in ns))) for p, ns in s.out_sets.items()),
        sorted((str(t), tuple(sorted(n.key for n in ns))) for t, ns in s.tagged.items()),
    )


# --- DOT export ---------------------------------------------------------------

def site_id_map(program: Program) -> dict[str, int]:
    ids: dict[str, int] = {}

    def scan(body):
        for s in body:
            if isinstance(s, NewStmt) and s.site is not None:
                ids[s.site] = s.site_id
            elif isinstance(s, IfStmt):
                scan(s.then_body)
                scan(s.else_body)
            elif isinstance(s, ForStmt):
                scan(s.body)

    for m in program.methods():
        scan(m.body)
    return ids


def to_dot(name: str, g: PointsToGraph, site_ids: dict[str, int]) -> str:
    nodes = sorted(g.N, key=PTGNode.sort_key)
    load_ids: dict[PTGNode, int] = {}
    for n in nodes:
        if n.kind == "load":
            load_ids[n] = len(load_ids) + 1

    def nid(n: PTGNode) -> str:
        if n.kind == "inside":
            return f"n{site_ids.get(n.key, 0)}"
        if n.kind == "param":
            return f"p_{n.key}"
        if n.kind == "global":
            return "g0"
        return f"l{load_ids[n]}"

    lines = [f'digraph "{name}" {{']
    for n in nodes:
        style = "solid" if n.kind == "inside" else "dashed"
        marker = " peripheries=2" if n in g.returned else ""
        lines.append(f'  {nid(n)} [shape=ellipse style={style} label="{n.key}"{marker}];')
    for (a, f, b) in sorted(g.E, key=lambda e: (nid(e[0]), e[1], nid(e[2]))):
        lines.append(f'  {nid(a)} -> {nid(b)} [label="{f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
