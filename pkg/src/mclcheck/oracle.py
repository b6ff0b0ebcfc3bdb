"""Reference interpreter measuring ground-truth allocation behavior.

Runs a resolved program on concrete inputs and records, for every method
activation, the peak number of simultaneously live objects of each class
among those allocated while the activation was on the stack, together with
the number of such objects still live and reachable from each escape root
(return value, receiver, bound out-parameters) at the moment the activation
returns.  Reclamation is idealized: by default unreachable objects are
collected after every statement, the smallest peaks any collector could
achieve.  A coarser mode sweeps only when a call returns, and a third mode
never reclaims; peaks from the default mode can only be lower.

Arrays account with their length; strings and integers are values and never
touch the heap.  Live counts are double-checked on every step by recomputing
them from the heap itself, and reclaimed object ids are poisoned so that any
later read fails loudly instead of silently resurrecting garbage.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .frontend import (
    Assign,
    AugAssign,
    Binary,
    BoolLit,
    CallStmt,
    EnsureStmt,
    Expr,
    FieldRef,
    ForStmt,
    IfStmt,
    IndexRef,
    IntLit,
    LengthRef,
    LocalDecl,
    MaxExpr,
    MethodDecl,
    NewStmt,
    NullLit,
    OutArg,
    ParenExpr,
    PathExpr,
    Program,
    RequiresStmt,
    ReturnStmt,
    StrLit,
    ThisRef,
    TypeRef,
    Unary,
    VarRef,
    expr_to_str,
)
from .summary import OBJECT_KEY, entry_vars
from .symexpr import GridTooLarge, SymExpr

GC_MODES = ("ideal", "method-exit", "none")

HARNESS = "<harness>"


class OracleError(Exception):
    """Any error raised while interpreting a program."""


class RequiresViolation(OracleError):
    def __init__(self, method: str, env: dict, direct: bool):
        super().__init__(f"requires violated entering {method} with {env}")
        self.method = method
        self.env = env
        self.direct = direct  # raised by the harness-invoked activation itself


class NullDereference(OracleError):
    pass


class ArrayBounds(OracleError):
    pass


class StepBudgetExceeded(OracleError):
    pass


@dataclass(frozen=True)
class Ref:
    """Heap reference; a distinct type so ints never masquerade as objects."""

    oid: int


@dataclass
class HeapObject:
    oid: int
    cls: str                     # class name, or "C[]" for arrays
    fields: dict                 # field name -> value; arrays: index -> value
    length: int | None
    weight: int                  # arrays count as their length
    site: str
    counted_by: tuple[int, ...]  # serials of activations live at allocation


@dataclass
class Activation:
    serial: int
    method: MethodDecl | None    # None only for the synthetic harness frame
    instance: str
    this: Ref | None
    locals: dict
    entry_env: dict[str, int]
    ensures: list[EnsureStmt]
    current: dict[str, int] = field(default_factory=dict)
    peak: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class AssertionFailure:
    """An instrumented `ensure` that evaluated to false at method exit."""

    method: str
    instance: str
    cond: str


@dataclass
class Observation:
    method: str
    instance: str
    entry_env: dict[str, int]
    peak: dict[str, int]                 # class key -> peak live count
    esc: dict[str, dict[str, int]]       # tag -> class key -> live escape count
    double_counted: tuple[str, ...] = () # classes reachable from several tags

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "instance": self.instance,
            "entryEnv": dict(sorted(self.entry_env.items())),
            "peakLive": dict(sorted(self.peak.items())),
            "escByTag": {
                t: dict(sorted(by.items()))
                for t, by in sorted(self.esc.items())
            },
            "doubleCounted": list(self.double_counted),
        }


@dataclass
class RunResult:
    return_value: object
    observations: list[Observation]
    assertion_failures: list[AssertionFailure]
    trace: list[tuple]

    def observation(self, qname: str) -> Observation:
        # recursion finishes innermost-first; hand back the outermost call
        matches = self.observations_for(qname)
        if not matches:
            raise KeyError(qname)
        return min(matches, key=lambda o: int(o.instance.rsplit("@", 1)[1]))

    def observations_for(self, qname: str) -> list[Observation]:
        return [o for o in self.observations if o.method == qname]


def _default(t: TypeRef):
    if t.is_array:
        return None
    return {"int": 0, "bool": False, "string": ""}.get(t.name)


def _elem_default(cls_key: str):
    return _default(TypeRef(cls_key[:-2]))


class _Return(Exception):
    def __init__(self, value):
        self.value = value


class Interp:
    """One program run; heap, stack, and measurements live here."""

    def __init__(self, program: Program, gc: str = "ideal",
                 max_steps: int = 1_000_000):
        if gc not in GC_MODES:
            raise ValueError(f"unknown gc mode {gc!r}")
        if not program.resolved:
            raise ValueError("interpretation requires a resolved program")
        self.program = program
        self.gc = gc
        self.max_steps = max_steps
        self.classes = program.class_map()
        self.methods = {m.qname: m for m in program.methods()}
        self.heap: dict[int, HeapObject] = {}
        self.poisoned: set[int] = set()
        self.stack: list[Activation] = []
        self.active: dict[int, Activation] = {}
        self.trace: list[tuple] = []
        self.observations: list[Observation] = []
        self.failures: list[AssertionFailure] = []
        self.steps = 0
        self._next_oid = 1
        self._next_serial = 1

    # -- frames ------------------------------------------------------------

    def push_harness(self) -> Activation:
        act = Activation(0, None, f"{HARNESS}@0", None, {}, {}, [])
        self.stack.append(act)
        self.active[0] = act
        return act

    def _push(self, method: MethodDecl, this: Ref | None,
              locals_: dict, direct: bool) -> Activation:
        serial = self._next_serial
        self._next_serial += 1
        act = Activation(serial, method, f"{method.qname}@{serial}",
                         this, locals_, {}, [])
        self.stack.append(act)
        self.active[serial] = act
        act.ensures = [s for s in method.body if isinstance(s, EnsureStmt)]
        act.entry_env = self._snapshot_entry(act)
        self.trace.append(("call", method.qname, act.instance))
        self._check_requires(act, direct)
        return act

    def _snapshot_entry(self, act: Activation) -> dict[str, int]:
        env: dict[str, int] = {}
        cls = self.classes[act.method.cls]
        for name in entry_vars(act.method, cls):
            base, _, rest = name.partition(".")
            if base == "this":
                if act.this is None:
                    continue
                fname = rest.removesuffix(".length")
                val = self._obj(act.this).fields.get(fname)
                if rest.endswith(".length"):
                    val = self._obj(val).length if isinstance(val, Ref) else None
            elif name.endswith(".length"):
                arr = act.locals.get(base)
                val = self._obj(arr).length if isinstance(arr, Ref) else None
            else:
                val = act.locals.get(name)
            if isinstance(val, int) and not isinstance(val, bool):
                env[name] = val
        return env

    def _check_requires(self, act: Activation, direct: bool):
        for s in act.method.body:
            if not isinstance(s, RequiresStmt):
                continue
            for c in s.constraints:
                if not self._compare(c.rel, self._eval(c.left),
                                     self._eval(c.right)):
                    raise RequiresViolation(act.method.qname,
                                            dict(act.entry_env), direct)

    # -- heap --------------------------------------------------------------

    def _obj(self, ref) -> HeapObject:
        if not isinstance(ref, Ref):
            raise NullDereference("null dereference")
        assert ref.oid not in self.poisoned, f"read of reclaimed object {ref.oid}"
        return self.heap[ref.oid]

    def _alloc(self, cls_key: str, weight: int, site: str,
               fields_: dict, length: int | None) -> Ref:
        oid = self._next_oid
        self._next_oid += 1
        counted = tuple(a.serial for a in self.stack)
        self.heap[oid] = HeapObject(oid, cls_key, fields_, length, weight,
                                    site, counted)
        for act in self.stack:
            for key in (cls_key, OBJECT_KEY):
                cur = act.current.get(key, 0) + weight
                act.current[key] = cur
                if cur > act.peak.get(key, 0):
                    act.peak[key] = cur
        self.trace.append(("alloc", oid, cls_key, weight, site,
                           self.stack[-1].instance))
        return Ref(oid)

    def _reach(self, roots) -> set[int]:
        seen: set[int] = set()
        work = [v for v in roots if isinstance(v, Ref)]
        while work:
            oid = work.pop().oid
            if oid in seen:
                continue
            seen.add(oid)
            for v in self.heap[oid].fields.values():
                if isinstance(v, Ref) and v.oid not in seen:
                    work.append(v)
        return seen

    def _roots(self):
        for act in self.stack:
            if act.this is not None:
                yield act.this
            yield from act.locals.values()

    def _sweep(self):
        live = self._reach(self._roots())
        dead = sorted(set(self.heap) - live)
        for oid in dead:
            obj = self.heap.pop(oid)
            for serial in obj.counted_by:
                act = self.active.get(serial)
                if act is not None and act in self.stack:
                    for key in (obj.cls, OBJECT_KEY):
                        act.current[key] -= obj.weight
                        assert act.current[key] >= 0, \
                            f"negative live count for {key} in {act.instance}"
            self.poisoned.add(oid)
            self.trace.append(("reclaim", oid))

    def _assert_accounting(self):
        # the incremental counters must agree with a from-scratch recount
        expected: dict[int, dict[str, int]] = {a.serial: {} for a in self.stack}
        for obj in self.heap.values():
            for serial in obj.counted_by:
                acc = expected.get(serial)
                if acc is None:
                    continue
                for key in (obj.cls, OBJECT_KEY):
                    acc[key] = acc.get(key, 0) + obj.weight
        for act in self.stack:
            have = {k: v for k, v in act.current.items() if v}
            want = {k: v for k, v in expected[act.serial].items() if v}
            assert have == want, \
                f"live-count drift in {act.instance}: {have} != {want}"

    def _post_stmt(self):
        self.steps += 1
        if self.steps > self.max_steps:
            raise StepBudgetExceeded(f"exceeded {self.max_steps} steps")
        if self.gc == "ideal":
            self._sweep()
        self._assert_accounting()

    # -- expressions ---------------------------------------------------------

    def _eval(self, e: Expr):
        act = self.stack[-1]
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, StrLit):
            return e.value
        if isinstance(e, BoolLit):
            return e.value
        if isinstance(e, NullLit):
            return None
        if isinstance(e, VarRef):
            try:
                return act.locals[e.name]
            except KeyError:
                raise OracleError(f"undefined local {e.name!r}") from None
        if isinstance(e, ThisRef):
            return act.this
        if isinstance(e, ParenExpr):
            return self._eval(e.inner)
        if isinstance(e, FieldRef):
            return self._obj(self._eval(e.base)).fields[e.field]
        if isinstance(e, LengthRef):
            base = self._eval(e.base)
            if isinstance(base, str):
                return len(base)
            obj = self._obj(base)
            if obj.length is None:
                raise OracleError(f"{obj.cls} has no length")
            return obj.length
        if isinstance(e, IndexRef):
            obj = self._obj(self._eval(e.base))
            idx = self._eval(e.index)
            if obj.length is None or not 0 <= idx < obj.length:
                raise ArrayBounds(f"index {idx} outside [0, {obj.length})")
            return obj.fields[idx]
        if isinstance(e, Unary):
            v = self._eval(e.operand)
            return -v if e.op == "-" else not v
        if isinstance(e, MaxExpr):
            return max(self._eval(e.left), self._eval(e.right))
        if isinstance(e, Binary):
            if e.op == "&&":
                return bool(self._eval(e.left)) and bool(self._eval(e.right))
            if e.op == "||":
                return bool(self._eval(e.left)) or bool(self._eval(e.right))
            lhs = self._eval(e.left)
            rhs = self._eval(e.right)
            if e.op == "+":
                return lhs + rhs
            if e.op == "-":
                return lhs - rhs
            if e.op == "*":
                return lhs * rhs
            if e.op == "/":
                return _trunc_div(lhs, rhs)
            return self._compare(e.op, lhs, rhs)
        raise OracleError(f"cannot evaluate {type(e).__name__}")

    @staticmethod
    def _compare(rel: str, lhs, rhs) -> bool:
        if rel == "==":
            return lhs == rhs
        if rel == "!=":
            return lhs != rhs
        if rel == "<":
            return lhs < rhs
        if rel == "<=":
            return lhs <= rhs
        if rel == ">":
            return lhs > rhs
        if rel == ">=":
            return lhs >= rhs
        raise OracleError(f"unknown comparison {rel!r}")

    def _store(self, target: Expr, value):
        act = self.stack[-1]
        if isinstance(target, VarRef):
            act.locals[target.name] = value
        elif isinstance(target, FieldRef):
            self._obj(self._eval(target.base)).fields[target.field] = value
        elif isinstance(target, IndexRef):
            obj = self._obj(self._eval(target.base))
            idx = self._eval(target.index)
            if obj.length is None or not 0 <= idx < obj.length:
                raise ArrayBounds(f"index {idx} outside [0, {obj.length})")
            obj.fields[idx] = value
        else:
            raise OracleError(f"bad assignment target {type(target).__name__}")

    # -- statements ----------------------------------------------------------

    def _exec_block(self, stmts):
        for s in stmts:
            self._exec(s)
            self._post_stmt()

    def _exec(self, s):
        if isinstance(s, LocalDecl):
            value = self._eval(s.init) if s.init is not None \
                else _default(s.decl_type)
            self.stack[-1].locals[s.name] = value
        elif isinstance(s, Assign):
            self._store(s.target, self._eval(s.value))
        elif isinstance(s, AugAssign):
            self._store(s.target, self._eval(s.target) + self._eval(s.value))
        elif isinstance(s, NewStmt):
            self._do_new(s)
        elif isinstance(s, CallStmt):
            self._do_call(s)
        elif isinstance(s, ReturnStmt):
            raise _Return(self._eval(s.value) if s.value is not None else None)
        elif isinstance(s, IfStmt):
            branch = s.then_body if self._eval(s.cond) else s.else_body
            self._exec_block(branch)
        elif isinstance(s, ForStmt):
            lo = self._eval(s.lo)
            hi = self._eval(s.hi)
            for i in range(lo, hi + 1):
                self.stack[-1].locals[s.var] = i
                self._exec_block(s.body)
        # contract and escape annotations carry no runtime behavior; requires
        # is checked at entry and ensure at exit
        return None

    def _do_new(self, s: NewStmt):
        ctor_ran = False
        if s.length is not None:
            length = self._eval(s.length)
            if length < 0:
                raise ArrayBounds(f"negative array length {length}")
            key = s.class_ref.key()
            elems = dict.fromkeys(range(length), _elem_default(key))
            ref = self._alloc(key, length, s.site or "", elems, length)
        else:
            cls = self.classes[s.class_ref.name]
            fields_ = {f.name: _default(f.decl_type) for f in cls.fields}
            ref = self._alloc(s.class_ref.key(), 1, s.site or "", fields_, None)
            ctor = cls.ctor()
            if ctor is not None:
                values = [self._eval(a) for a in s.args]
                self._invoke(ctor, ref, values, [], direct=False)
                ctor_ran = True
        if s.target is not None:
            self._store(s.target, ref)
        if ctor_ran:
            self._method_exit_sweep()

    def _do_call(self, s: CallStmt):
        callee = self.methods[s.resolved]
        if s.receiver is not None:
            this = self._eval(s.receiver)
            if this is None:
                raise NullDereference(f"call to {s.method} on null")
        else:
            this = self.stack[-1].this
        values = []
        outs = []
        for param, arg in zip(callee.params, s.args):
            if isinstance(arg, OutArg):
                outs.append((param.name, arg.target))
                values.append(_default(param.decl_type))
            else:
                values.append(self._eval(arg))
        ret = self._invoke(callee, this, values, outs, direct=False)
        if s.target is not None:
            self._store(s.target, ret)
        self._method_exit_sweep()

    def _invoke(self, callee: MethodDecl, this: Ref | None, values: list,
                outs: list, direct: bool):
        locals_ = {p.name: v for p, v in zip(callee.params, values)}
        act = self._push(callee, this, locals_, direct)
        ret = None
        try:
            self._exec_block(callee.body)
        except _Return as r:
            ret = r.value
        self._finish(act, ret)
        out_values = {name: act.locals[name] for name, _ in outs}
        self.stack.pop()
        del self.active[act.serial]
        for name, target in outs:
            if target is not None:
                self._store(target, out_values[name])
        return ret

    def _method_exit_sweep(self):
        # runs once per return, but only after the caller has rooted the
        # returned or constructed object; a real collector sees that value
        # in a register, not garbage
        if self.gc == "method-exit":
            self._sweep()
            self._assert_accounting()

    def _finish(self, act: Activation, ret):
        """Exit protocol: ensures, then escape measurement, before any sweep."""
        for e in act.ensures:
            if not self._eval(e.cond):
                self.failures.append(AssertionFailure(
                    act.method.qname, act.instance, expr_to_str(e.cond)))
        roots: dict[str, object] = {}
        if act.method.return_type.key() != "void" and ret is not None:
            roots["Return"] = ret
        if act.this is not None:
            roots["This"] = act.this
        contract = act.method.contract
        if contract is not None:
            for tag, path in contract.bindings.items():
                val = self._follow(act, ret, path)
                if val is not None:
                    roots[tag.counter_str()] = val
        esc: dict[str, dict[str, int]] = {}
        counted_per_tag: dict[str, set[int]] = {}
        for tag_name, root in roots.items():
            reached = self._reach([root])
            mine = {oid for oid in reached
                    if act.serial in self.heap[oid].counted_by}
            counted_per_tag[tag_name] = mine
            by_cls: dict[str, int] = {}
            for oid in mine:
                obj = self.heap[oid]
                if obj.weight:  # zero-length arrays contribute nothing
                    by_cls[obj.cls] = by_cls.get(obj.cls, 0) + obj.weight
            if by_cls:
                by_cls[OBJECT_KEY] = sum(by_cls.values())
                esc[tag_name] = by_cls
        doubled: set[str] = set()
        for a, b in itertools.combinations(counted_per_tag.values(), 2):
            for oid in a & b:
                doubled.add(self.heap[oid].cls)
        self.observations.append(Observation(
            act.method.qname, act.instance, act.entry_env,
            {k: v for k, v in act.peak.items() if v},
            esc, tuple(sorted(doubled))))
        self.trace.append(("ret", act.method.qname, act.instance))

    def _follow(self, act: Activation, ret, path: PathExpr):
        if path.root == "this":
            val = act.this
        elif path.root == "return":
            val = ret
        else:
            val = act.locals.get(path.root)
        for fname in path.fields:
            if val is None:
                return None
            val = self._obj(val).fields.get(fname)
        return val

    def result(self, return_value) -> RunResult:
        return RunResult(return_value, self.observations, self.failures,
                         self.trace)


def _trunc_div(a: int, b: int) -> int:
    if b == 0:
        raise OracleError("division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


# -- single entry run ----------------------------------------------------


def _materialize(interp: Interp, param, raw):
    """Turn a plain Python argument into a runtime value, allocating arrays
    on behalf of the harness frame."""
    t = param.decl_type
    if raw is None:
        return None
    if t.is_array:
        if not isinstance(raw, list):
            raise OracleError(f"argument {param.name} must be an array")
        elems = dict(enumerate(raw))
        for i in range(len(raw)):
            if elems[i] is None:
                elems[i] = _elem_default(t.key())
        return interp._alloc(t.key(), len(raw), HARNESS, elems, len(raw))
    if t.name == "int" and isinstance(raw, int) and not isinstance(raw, bool):
        return raw
    if t.name == "bool" and isinstance(raw, bool):
        return raw
    if t.name == "string" and isinstance(raw, str):
        return raw
    raise OracleError(f"argument {param.name} must be {t.key()}")


def run(program: Program, entry: str, args=(), gc: str = "ideal",
        max_steps: int = 1_000_000) -> RunResult:
    """Run one method on concrete arguments and measure every activation.

    `entry` is a qualified name.  Constructors allocate and return the new
    instance; other methods run with a null receiver, so entries that read
    receiver state need the grid harness instead.
    """
    interp = Interp(program, gc=gc, max_steps=max_steps)
    method = interp.methods.get(entry)
    if method is None:
        raise OracleError(f"no method named {entry}")
    harness = interp.push_harness()
    values = []
    outs = []
    for i, param in enumerate(method.params):
        if param.is_out:
            outs.append((param.name, None))
            values.append(_default(param.decl_type))
        else:
            if i >= len(args):
                raise OracleError(f"missing argument {param.name}")
            values.append(_materialize(interp, param, args[i]))
    if method.is_ctor:
        cls = interp.classes[method.cls]
        fields_ = {f.name: _default(f.decl_type) for f in cls.fields}
        ref = interp._alloc(method.cls, 1, HARNESS, fields_, None)
        interp._invoke(method, ref, values, outs, direct=True)
        ret = ref
    else:
        ret = interp._invoke(method, None, values, outs, direct=True)
    harness.locals["<result>"] = ret
    interp._method_exit_sweep()
    if interp.gc == "ideal":
        interp._sweep()
        interp._assert_accounting()
    return interp.result(ret)


# -- grid harness ----------------------------------------------------------


@dataclass(frozen=True)
class Knob:
    name: str            # "n", "names.length", "ctor.size", ...
    values: tuple


@dataclass
class HarnessPlan:
    method: str
    receiver: str              # "none" | "bare" | "ctor"
    knobs: list[Knob]
    skip_reason: str | None = None

    def points(self):
        names = [k.name for k in self.knobs]
        for combo in itertools.product(*(k.values for k in self.knobs)):
            yield dict(zip(names, combo))

    def point_count(self) -> int:
        n = 1
        for k in self.knobs:
            n *= len(k.values)
        return n


def _param_knobs(params, prefix: str, lo: int, hi: int):
    """Knobs for a parameter list, or a reason it cannot be synthesized."""
    span = tuple(range(lo, hi + 1))
    knobs = []
    for p in params:
        if p.is_out:
            continue
        t = p.decl_type
        if t.is_array:
            knobs.append(Knob(f"{prefix}{p.name}.length", span))
        elif t.name == "int":
            knobs.append(Knob(f"{prefix}{p.name}", span))
        elif t.name == "bool":
            knobs.append(Knob(f"{prefix}{p.name}", (False, True)))
        elif t.name == "string":
            pass  # fixed text, no knob
        else:
            return None, f"cannot synthesize a {t.key()} argument"
    return knobs, None


def harness_plan(program: Program, qname: str, lo: int = 0,
                 hi: int = 8) -> HarnessPlan:
    method = program.method(qname)
    cls = program.class_map()[method.cls]
    knobs: list[Knob] = []
    if method.is_ctor:
        receiver = "none"
    elif cls.ctor() is not None:
        receiver = "ctor"
        ctor_knobs, reason = _param_knobs(cls.ctor().params, "ctor.", lo, hi)
        if reason:
            return HarnessPlan(qname, receiver, [], reason)
        knobs.extend(ctor_knobs)
    else:
        receiver = "bare"
    arg_knobs, reason = _param_knobs(method.params, "", lo, hi)
    if reason:
        return HarnessPlan(qname, receiver, [], reason)
    knobs.extend(arg_knobs)
    return HarnessPlan(qname, receiver, knobs)


def _array_contents(key: str, length: int) -> list:
    if key == "string[]":
        return [f"s{i}" for i in range(length)]
    if key == "int[]":
        return [0] * length
    return [None] * length  # class elements start null


def _point_args(interp: Interp, params, prefix: str, point: dict):
    values = []
    outs = []
    for p in params:
        if p.is_out:
            outs.append((p.name, None))
            values.append(_default(p.decl_type))
            continue
        t = p.decl_type
        if t.is_array:
            length = point[f"{prefix}{p.name}.length"]
            elems = dict(enumerate(_array_contents(t.key(), length)))
            values.append(interp._alloc(t.key(), length, HARNESS, elems, length))
        elif t.name in ("int", "bool"):
            values.append(point[f"{prefix}{p.name}"])
        else:
            values.append("x")
    return values, outs


def run_point(program: Program, qname: str, point: dict, gc: str = "ideal",
              max_steps: int = 1_000_000) -> RunResult:
    """One harness-driven run: build a receiver if needed, then the call.

    Raises RequiresViolation with direct=True when the point itself is
    outside the method's (or the receiver constructor's) precondition.
    """
    interp = Interp(program, gc=gc, max_steps=max_steps)
    method = interp.methods[qname]
    cls = interp.classes[method.cls]
    harness = interp.push_harness()
    this = None
    if not method.is_ctor:
        fields_ = {f.name: _default(f.decl_type) for f in cls.fields}
        this = interp._alloc(method.cls, 1, HARNESS, fields_, None)
        harness.locals["<receiver>"] = this
        ctor = cls.ctor()
        if ctor is not None:
            values, outs = _point_args(interp, ctor.params, "ctor.", point)
            interp._invoke(ctor, this, values, outs, direct=True)
            interp._method_exit_sweep()
    values, outs = _point_args(interp, method.params, "", point)
    if method.is_ctor:
        fields_ = {f.name: _default(f.decl_type) for f in cls.fields}
        this = interp._alloc(method.cls, 1, HARNESS, fields_, None)
        interp._invoke(method, this, values, outs, direct=True)
        ret = this
    else:
        ret = interp._invoke(method, this, values, outs, direct=True)
    harness.locals["<result>"] = ret
    interp._method_exit_sweep()
    if interp.gc == "ideal":
        interp._sweep()
        interp._assert_accounting()
    return interp.result(ret)


# -- grid validation -------------------------------------------------------


@dataclass
class BoundViolation:
    entry: str
    point: dict
    method: str
    instance: str
    clause: str
    declared: str
    declared_value: int
    observed: int
    entry_env: dict[str, int]
    trace: list[tuple]

    def to_json(self) -> dict:
        return {
            "entry": self.entry,
            "point": {k: v for k, v in sorted(self.point.items())},
            "method": self.method,
            "instance": self.instance,
            "clause": self.clause,
            "declared": self.declared,
            "declaredValue": self.declared_value,
            "observed": self.observed,
            "entryEnv": dict(sorted(self.entry_env.items())),
            "trace": [list(ev) for ev in self.trace],
        }


@dataclass
class OracleReport:
    violations: list[BoundViolation]
    ensure_failures: list[tuple]   # (entry, point, AssertionFailure)
    requires_aborts: list[tuple]   # (entry, point, callee qname)
    runtime_errors: list[tuple]    # (entry, point, message)
    runs: int
    points_skipped: int
    methods_skipped: list[tuple]   # (qname, reason)

    @property
    def clean(self) -> bool:
        return not (self.violations or self.ensure_failures
                    or self.requires_aborts or self.runtime_errors)

    def to_json(self) -> dict:
        return {
            "violations": [v.to_json() for v in self.violations],
            "ensureFailures": [
                {"entry": e, "point": dict(sorted(p.items())),
                 "method": f.method, "instance": f.instance, "cond": f.cond}
                for e, p, f in self.ensure_failures
            ],
            "requiresAborts": [
                {"entry": e, "point": dict(sorted(p.items())), "callee": c}
                for e, p, c in self.requires_aborts
            ],
            "runtimeErrors": [
                {"entry": e, "point": dict(sorted(p.items())), "error": msg}
                for e, p, msg in self.runtime_errors
            ],
            "runs": self.runs,
            "pointsSkipped": self.points_skipped,
            "methodsSkipped": [list(t) for t in self.methods_skipped],
        }


def _declared_value(bound: SymExpr, env: dict[str, int]):
    if not bound.variables() <= set(env):
        return None
    return bound.eval(env)


def _compare_observation(obs: Observation, method: MethodDecl, entry: str,
                         point: dict, trace: list, out: list):
    contract = method.contract
    if contract is None or not contract.has_clauses():
        return
    for key, bound in contract.mem_req.items():
        declared = _declared_value(bound, obs.entry_env)
        if declared is None:
            continue
        observed = obs.peak.get(key, 0)
        if observed > declared:
            out.append(BoundViolation(
                entry, point, obs.method, obs.instance, f"memreq<{key}>",
                str(bound), int(declared), observed, obs.entry_env, trace))
    for (tag, key), bound in contract.esc.items():
        declared = _declared_value(bound, obs.entry_env)
        if declared is None:
            continue
        observed = obs.esc.get(tag.counter_str(), {}).get(key, 0)
        if observed > declared:
            out.append(BoundViolation(
                entry, point, obs.method, obs.instance,
                f"esc<{key}>({tag.source_str()})",
                str(bound), int(declared), observed, obs.entry_env, trace))


def validate(program: Program, lo: int = 0, hi: int = 8, gc: str = "ideal",
             max_points: int = 20_000,
             max_steps: int = 1_000_000) -> OracleReport:
    """Drive every contracted method over an argument grid and compare the
    measured peaks and escapes against its declared bounds."""
    report = OracleReport([], [], [], [], 0, 0, [])
    plans = []
    total = 0
    for m in sorted(program.methods(), key=lambda m: m.qname):
        if m.contract is None or not m.contract.has_clauses():
            continue
        plan = harness_plan(program, m.qname, lo, hi)
        if plan.skip_reason:
            report.methods_skipped.append((m.qname, plan.skip_reason))
            continue
        plans.append(plan)
        total += plan.point_count()
    if total > max_points:
        raise GridTooLarge(f"{total} grid points exceed the {max_points} cap")
    for plan in plans:
        method = program.method(plan.method)
        for point in plan.points():
            try:
                result = run_point(program, plan.method, point, gc=gc,
                                   max_steps=max_steps)
            except RequiresViolation as rv:
                if rv.direct:
                    report.points_skipped += 1
                else:
                    report.requires_aborts.append(
                        (plan.method, point, rv.method))
                continue
            except OracleError as err:
                report.runtime_errors.append((plan.method, point, str(err)))
                continue
            report.runs += 1
            for failure in result.assertion_failures:
                report.ensure_failures.append((plan.method, point, failure))
            for obs in result.observations:
                _compare_observation(obs, program.method(obs.method),
                                     plan.method, point, result.trace,
                                     report.violations)
    return report
