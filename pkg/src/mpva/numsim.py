"""Floating-point evaluation on periodic lattices and RK4 flows.

Expressions are compiled once into lists of ``(coefficient, factors)`` and
evaluated at every site at the same time with ``numpy.roll``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .diffalg import DEFINED, IDENTITY, SHIFTCONST, DiffExpr, SymbolTable


class EvaluationError(ValueError):
    pass


class BlowUpError(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"non-finite lattice value at step {step}")
        self.step = step


@dataclass
class LatticeState:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 3:
            raise ValueError("a lattice needs at least 3 sites")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("lattice values must be finite")

    @property
    def M(self) -> int:
        return self.values.size

    @classmethod
    def random(cls, M: int, seed: int, low: float = 0.5, high: float = 1.5) -> "LatticeState":
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(low, high, M))


@dataclass(frozen=True)
class Realization:
    """One of: scale*x^k (identity, power, reciprocal, constant), scale*log x, a*x + b."""

    kind: str
    k: float = 1.0
    scale: float = 1.0
    b: float = 0.0

    @classmethod
    def identity(cls):
        return cls("power", 1.0)

    @classmethod
    def power(cls, k, scale=1.0):
        return cls("power", float(k), float(scale))

    @classmethod
    def reciprocal(cls, scale=1.0):
        return cls("power", -1.0, float(scale))

    @classmethod
    def constant(cls, v):
        return cls("power", 0.0, float(v))

    @classmethod
    def log(cls, scale=1.0):
        return cls("log", 0.0, float(scale))

    @classmethod
    def affine(cls, a, b):
        return cls("affine", 0.0, float(a), float(b))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "power":
            if self.k == 0:
                return np.full_like(x, self.scale, dtype=float)
            if self.k != int(self.k) and np.any(x <= 0):
                raise EvaluationError("fractional power of a non-positive value")
            if self.k < 0 and np.any(x == 0):
                raise EvaluationError("negative power of zero")
            return self.scale * x ** self.k
        if self.kind == "log":
            if np.any(x <= 0):
                raise EvaluationError("log of a non-positive value")
            return self.scale * np.log(x)
        return self.scale * x + self.b

    def derivative(self) -> "Realization":
        if self.kind == "power":
            if self.k == 0:
                return Realization.constant(0.0)
            return Realization("power", self.k - 1, self.scale * self.k)
        if self.kind == "log":
            return Realization.reciprocal(self.scale)
        return Realization.constant(self.scale)


@dataclass
class SymbolBinding:
    functions: Dict[str, Realization] = field(default_factory=dict)
    params: Dict[str, float] = field(default_factory=dict)
    shiftconsts: Dict[str, Sequence[float]] = field(default_factory=dict)  # periodic site values
    eps: Optional[complex] = None

    def realization(self, table: SymbolTable, idx: int) -> Optional[Realization]:
        s = table.symbols[idx]
        if s.kind == IDENTITY:
            return Realization.identity()
        if s.name in self.functions:
            return self.functions[s.name]
        if s.parent is not None:
            parent = self.realization(table, s.parent)
            return parent.derivative() if parent is not None else None
        return None


def _coefficient_value(key, q, bind: SymbolBinding):
    e, params = key
    v = float(q)
    if e:
        if bind.eps is None:
            raise EvaluationError("expression involves eps; bind a numeric eps value")
        v = v * bind.eps ** e
    for name, p in params:
        if name not in bind.params:
            raise EvaluationError(f"parameter {name!r} is not specialized")
        v = v * bind.params[name] ** p
    return v


class Compiled:
    """Expression compiled against a binding; ``values -> per-site array``."""

    def __init__(self, e: DiffExpr, bind: SymbolBinding):
        table = e.table
        self.terms = []
        self.funcs: Dict[int, object] = {}
        for (mono, key), q in e.terms.items():
            c = _coefficient_value(key, q, bind)
            if c == 0:
                continue
            factors = []
            for site, sym, exp in mono:
                if sym not in self.funcs:
                    s = table.symbols[sym]
                    if s.kind == SHIFTCONST:
                        if s.name not in bind.shiftconsts:
                            raise EvaluationError(f"shift constant {s.name!r} is not bound")
                        self.funcs[sym] = ("const", np.asarray(bind.shiftconsts[s.name], float))
                    else:
                        r = bind.realization(table, sym)
                        if r is None:
                            raise EvaluationError(f"symbol {s.name!r} is not bound")
                        self.funcs[sym] = ("fn", r)
                factors.append((site, sym, exp))
            self.terms.append((c, factors))
        self.complex = any(isinstance(c, complex) for c, _ in self.terms)

    def __call__(self, values: np.ndarray) -> np.ndarray:
        M = values.size
        base = {}
        for sym, (kind, f) in self.funcs.items():
            if kind == "fn":
                base[sym] = f(values)
            else:
                if f.size != M:
                    raise EvaluationError("shift constant length differs from lattice size")
                base[sym] = f
        out = np.zeros(M, dtype=complex if self.complex else float)
        for c, factors in self.terms:
            acc = np.full(M, c, dtype=out.dtype)
            for site, sym, exp in factors:
                v = base[sym]
                if site:
                    v = np.roll(v, -site)
                if exp < 0 and np.any(v == 0):
                    raise EvaluationError("division by zero in evaluation")
                acc = acc * v ** exp
            out += acc
        return out


def evaluate_all(e: DiffExpr, state: LatticeState, bind: SymbolBinding) -> np.ndarray:
    return Compiled(e, bind)(state.values)


def evaluate(e: DiffExpr, state: LatticeState, site: int, bind: SymbolBinding) -> float:
    return evaluate_all(e, state, bind)[site % state.M]


def functional_value(h: DiffExpr, state: LatticeState, bind: SymbolBinding) -> float:
    return evaluate_all(h, state, bind).sum()


def check_binding(table: SymbolTable, bind: SymbolBinding, low: float = 0.5, high: float = 1.5,
                  samples: int = 100, tol: float = 1e-9) -> Dict[str, float]:
    """Worst |phi'(x) - rule(x)| per bound defined symbol over sample points.

    Raises when a residual exceeds ``tol * max(1, |rule(x)|)``.
    """
    xs = np.linspace(low, high, samples)
    out = {}
    for idx, s in enumerate(table.symbols):
        if s.kind != DEFINED or s.name not in bind.functions:
            continue
        rule = Compiled(s.template, bind)
        deriv = bind.functions[s.name].derivative()
        worst = 0.0
        for x in xs:
            state = np.full(3, x)
            want = rule(state)[0]
            got = deriv(np.array([x]))[0]
            err = abs(got - want)
            if err > tol * max(1.0, abs(want)):
                raise EvaluationError(f"binding of {s.name!r} violates its rule at x={x}: {err:g}")
            worst = max(worst, err)
        out[s.name] = worst
    return out


def rk4_step(rhs: Compiled, u: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs(u)
    k2 = rhs(u + dt / 2 * k1)
    k3 = rhs(u + dt / 2 * k2)
    k4 = rhs(u + dt * k3)
    return u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_flow(P: DiffExpr, state: LatticeState, dt: float, steps: int,
                   bind: SymbolBinding, every: int = 1) -> np.ndarray:
    """RK4 trajectory, shape (steps // every + 1, M); row 0 is the initial state."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    rhs = Compiled(P, bind)
    u = state.values.copy()
    rows = [u.copy()]
    for n in range(1, steps + 1):
        u = rk4_step(rhs, u, dt)
        if not np.all(np.isfinite(u)):
            raise BlowUpError(n)
        if n % every == 0:
            rows.append(u.copy())
    return np.array(rows)


def conservation_report(flows: Mapping[str, DiffExpr], densities: Mapping[str, DiffExpr],
                        state: LatticeState, dt: float, T: float, bind: SymbolBinding,
                        every: int = 1) -> List[Dict]:
    """max_t |H(t) - H(0)| / max(1, |H(0)|) for every flow and density."""
    steps = int(round(T / dt))
    rows = []
    for fname, P in flows.items():
        traj = integrate_flow(P, state, dt, steps, bind, every)
        for dname, h in densities.items():
            comp = Compiled(h, bind)
            vals = np.array([comp(u).sum() for u in traj])
            drift = np.max(np.abs(vals - vals[0])) / max(1.0, abs(vals[0]))
            rows.append({"flow": fname, "density": dname, "initial": float(vals[0]),
                         "drift": float(drift)})
    return rows


def commutativity_check(P: DiffExpr, Q: DiffExpr, state: LatticeState, t: float, dt: float,
                        bind: SymbolBinding) -> float:
    if t <= 0:
        raise ValueError("t must be positive")
    steps = max(1, int(round(t / dt)))
    h = t / steps
    rp, rq = Compiled(P, bind), Compiled(Q, bind)

    def run(rhs, u):
        for _ in range(steps):
            u = rk4_step(rhs, u, h)
        return u

    pq = run(rq, run(rp, state.values.copy()))
    qp = run(rp, run(rq, state.values.copy()))
    return float(np.max(np.abs(pq - qp)))


def gradient_check(h: DiffExpr, grad: DiffExpr, state: LatticeState, bind: SymbolBinding,
                   step: float = 1e-5) -> float:
    """Largest |fd - symbolic| / max(1, |symbolic|) over sites (central differences)."""
    comp = Compiled(h, bind)
    sym = Compiled(grad, bind)(state.values)
    worst = 0.0
    for n in range(state.M):
        up = state.values.copy()
        dn = state.values.copy()
        up[n] += step
        dn[n] -= step
        fd = (comp(up).sum() - comp(dn).sum()) / (2 * step)
        worst = max(worst, abs(fd - sym[n]) / max(1.0, abs(sym[n])))
    return float(worst)


def write_csv(path, trajectory: np.ndarray, dt: float, functionals: Mapping[str, np.ndarray] = None,
              sites: bool = True, every: int = 1) -> None:
    functionals = functionals or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["step", "t"]
        if sites:
            header += [f"u{n}" for n in range(trajectory.shape[1])]
        header += list(functionals)
        w.writerow(header)
        for i, row in enumerate(trajectory):
            line = [i * every, repr(i * every * dt)]
            if sites:
                line += [repr(float(x)) for x in row]
            line += [repr(float(v[i])) for v in functionals.values()]
            w.writerow(line)
