"""Small dense kernels: softmax, cosine, Adam and a finite-difference checker."""
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np


def softmax(v, axis=-1):
    """Numerically stable softmax along ``axis``."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("softmax of an empty vector")
    shifted = v - np.max(v, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def cosine_similarity(u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("zero-norm input")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def unit_rows(x, eps=0.0):
    """Rows of ``x`` scaled to unit L2 norm; zero rows stay zero."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return np.divide(x, norms + eps, out=np.zeros_like(x), where=norms > 0)


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params, grads, state: AdamState):
    """One bias-corrected Adam update, in place on ``params``.

    ``params`` and ``grads`` are dicts of arrays keyed by parameter name.
    Returns ``(params, state)``.
    """
    if params.keys() != grads.keys():
        raise ValueError("parameter/gradient names differ")
    for name, g in grads.items():
        if np.shape(params[name]) != np.shape(g):
            raise ValueError(
                f"shape mismatch for {name!r}: {np.shape(params[name])} vs {np.shape(g)}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, g in grads.items():
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(params[name], dtype=np.float64)
            state.v[name] = np.zeros_like(params[name], dtype=np.float64)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        params[name] -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


@dataclass
class GradCheckReport:
    max_rel_error: float
    n_checked: int
    worst: Optional[tuple] = None  # (param name, flat index)
    analytic: list = field(default_factory=list)
    numeric: list = field(default_factory=list)

    def ok(self, tol):
        return self.max_rel_error < tol


def finite_difference_check(loss_fn: Callable[[], float], params, grads, h=1e-5,
                            n_samples=None, rng=None):
    """Compare analytic ``grads`` with central differences of ``loss_fn``.

    ``loss_fn`` takes no arguments and reads ``params`` (a dict of arrays)
    which are perturbed in place and restored. With ``n_samples`` set,
    that many coordinates are drawn uniformly over all parameters.
    Relative error is ``|g - n| / max(1, |g|, |n|)``.
    """
    names = sorted(params)
    sizes = [params[k].size for k in names]
    coords = [(k, i) for k, s in zip(names, sizes) for i in range(s)]
    if n_samples is not None and n_samples < len(coords):
        rng = np.random.default_rng(rng)
        pick = rng.choice(len(coords), size=n_samples, replace=False)
        coords = [coords[i] for i in sorted(pick)]

    report = GradCheckReport(max_rel_error=0.0, n_checked=0)
    for name, idx in coords:
        flat = params[name].reshape(-1)
        old = flat[idx]
        flat[idx] = old + h
        fp = loss_fn()
        flat[idx] = old - h
        fm = loss_fn()
        flat[idx] = old
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError("non-finite loss during gradient check")
        num = (fp - fm) / (2.0 * h)
        ana = float(np.asarray(grads[name]).reshape(-1)[idx])
        err = abs(ana - num) / max(1.0, abs(ana), abs(num))
        report.analytic.append(ana)
        report.numeric.append(num)
        report.n_checked += 1
        if report.worst is None or err > report.max_rel_error:
            report.max_rel_error = err
            report.worst = (name, idx)
    return report
