"""Truncated CTMCs with tagged transitions, and their stationary laws."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from ..errors import NonConvergence, SingularChain

ARRIVAL, DEPARTURE, INTERNAL = "A", "D", "I"


@dataclass(frozen=True)
class Transition:
    """One thinned rate q_u^{A|D|I}(src, dst).

    ``triggers`` lists (departure class, probability) pairs fired when this
    transition happens. Self-loops (src == dst) are kept for the
    quasi-reversibility bookkeeping but do not enter the generator.
    """

    src: int
    dst: int
    rate: float
    kind: str
    label: str
    triggers: tuple = ()


class CtmcModel:
    def __init__(self, shape, transitions):
        self.shape = tuple(int(k) + 1 for k in shape)
        self.states = list(itertools.product(*(range(n) for n in self.shape)))
        self.transitions = list(transitions)
        for t in self.transitions:
            if t.kind not in (ARRIVAL, DEPARTURE, INTERNAL):
                raise ValueError(f"bad transition kind {t.kind!r}")
            if t.rate < 0:
                raise ValueError("negative rate")
        self._q = None

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def caps(self) -> tuple:
        return tuple(s - 1 for s in self.shape)

    def index(self, state) -> int:
        return int(np.ravel_multi_index(state, self.shape))

    @property
    def generator(self) -> sp.csr_matrix:
        if self._q is None:
            src = np.array([t.src for t in self.transitions if t.src != t.dst], dtype=np.int64)
            dst = np.array([t.dst for t in self.transitions if t.src != t.dst], dtype=np.int64)
            val = np.array([t.rate for t in self.transitions if t.src != t.dst], dtype=float)
            off = sp.coo_matrix((val, (src, dst)), shape=(self.n, self.n)).tocsr()
            off.sum_duplicates()
            off.eliminate_zeros()
            diag = -np.asarray(off.sum(axis=1)).ravel()
            self._q = (off + sp.diags(diag)).tocsr()
        return self._q

    def boundary_mask(self) -> np.ndarray:
        """States with some coordinate at its truncation level."""
        grid = np.indices(self.shape).reshape(len(self.shape), -1)
        caps = np.array(self.caps)[:, None]
        return (grid == caps).any(axis=0)

    def rates_by(self, kind, label) -> sp.csr_matrix:
        """Matrix of q_label^kind(x, x'), self-loops included."""
        sel = [t for t in self.transitions if t.kind == kind and t.label == label]
        m = sp.coo_matrix(([t.rate for t in sel], ([t.src for t in sel], [t.dst for t in sel])),
                          shape=(self.n, self.n))
        return m.tocsr()

    def labels(self, kind) -> list:
        return sorted({t.label for t in self.transitions if t.kind == kind})


def build(shape, rule) -> CtmcModel:
    """Compile a transition rule over the box [0, shape] into a model.

    ``rule(state)`` yields (target, rate, kind, label, triggers); targets
    are clamped into the box, so arrivals at the cap level are lost.
    """
    caps = tuple(int(k) for k in shape)
    dims = tuple(k + 1 for k in caps)
    out = []
    for state in itertools.product(*(range(n) for n in dims)):
        i = int(np.ravel_multi_index(state, dims))
        for target, rate, kind, label, trig in rule(state):
            if rate == 0:
                continue
            tgt = tuple(min(max(x, 0), k) for x, k in zip(target, caps))
            out.append(Transition(i, int(np.ravel_multi_index(tgt, dims)), float(rate), kind, label,
                                  tuple(trig)))
    return CtmcModel(caps, out)


def _closed_class(q):
    n = q.shape[0]
    ncomp, lab = connected_components(q, directed=True, connection="strong")
    coo = q.tocoo()
    leaving = np.zeros(ncomp, dtype=bool)
    mask = (coo.row != coo.col) & (coo.data > 0) & (lab[coo.row] != lab[coo.col])
    leaving[lab[coo.row[mask]]] = True
    closed = np.flatnonzero(~leaving)
    if closed.size != 1:
        raise SingularChain(f"{closed.size} closed classes among {n} states")
    return np.flatnonzero(lab == closed[0])


GTH_MAX_STATES = 1500


def _gth(q):
    # Grassmann-Taksar-Heyman elimination: no subtractions, so every entry
    # of pi keeps full relative accuracy, even far out in the tail
    a = q.toarray()
    np.fill_diagonal(a, 0.0)
    n = a.shape[0]
    for k in range(n - 1):
        scale = a[k, k + 1:].sum()
        if scale <= 0:
            raise SingularChain("chain is reducible")
        a[k + 1:, k] /= scale
        a[k + 1:, k + 1:] += np.outer(a[k + 1:, k], a[k, k + 1:])
    x = np.zeros(n)
    x[-1] = 1.0
    for k in range(n - 2, -1, -1):
        x[k] = x[k + 1:] @ a[k + 1:, k]
    return x


def stationary(model, method: str = "auto", tol: float = 1e-14, max_iter: int = 10**6) -> np.ndarray:
    """Stationary distribution of the chain's unique closed class.

    Transient states get probability zero. ``method`` is "gth" (dense,
    entrywise accurate), "direct" (sparse LU with one equation replaced
    by the normalization), "power" (uniformized power iteration) or
    "auto" (gth for small chains, else direct).
    """
    q = model.generator if isinstance(model, CtmcModel) else sp.csr_matrix(model)
    keep = _closed_class(q)
    sub = q[keep][:, keep].tocsc()
    n = sub.shape[0]
    pi = np.zeros(q.shape[0])
    if n == 1:
        pi[keep] = 1.0
        return pi
    if method == "auto":
        method = "gth" if n <= GTH_MAX_STATES else "direct"
    if method == "gth":
        x = _gth(sub)
    elif method == "direct":
        a = sub.T.tolil()
        a[n - 1, :] = np.ones(n)
        rhs = np.zeros(n)
        rhs[-1] = 1.0
        a = a.tocsc()
        x = spsolve(a, rhs)
        # one step of iterative refinement
        x += spsolve(a, rhs - a @ x)
    elif method == "power":
        lam = float(np.max(-sub.diagonal())) * 1.0001
        p = (sp.identity(n, format="csr") + sub.tocsr() / lam).T.tocsr()
        x = np.full(n, 1.0 / n)
        for _ in range(max_iter):
            nx = p @ x
            nx /= nx.sum()
            if np.abs(nx - x).sum() < tol:
                x = nx
                break
            x = nx
        else:
            raise NonConvergence("power iteration did not converge")
    else:
        raise ValueError(f"unknown method {method!r}")
    x = np.where(np.abs(x) < 1e-300, 0.0, x)
    x = np.clip(x, 0.0, None)
    pi[keep] = x / x.sum()
    return pi


def residual(model, pi) -> float:
    q = model.generator if isinstance(model, CtmcModel) else model
    return float(np.max(np.abs(q.T @ pi)))
