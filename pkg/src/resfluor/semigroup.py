"""Fast batched evaluation of exp(x*G) for a fixed 4x4 generator.

The counting-map quadratures evaluate one and the same semigroup at very many
times, so we eigendecompose the generator once and evaluate
U diag(e^{lambda x}) U^{-1} in a single einsum.  If the generator is too
close to defective for that to be trustworthy, a batched
scaling-and-squaring fallback is used instead; both paths are exercised by
the test suite against the plain series exponential.
"""

from __future__ import annotations

import numpy as np

from .linalg import superop_exp

__all__ = ["SemigroupCache"]


def _batch_expm(G: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Scaling-and-squaring of x*G for an array of x >= 0, vectorized."""
    xs = np.asarray(xs, dtype=float)
    d = G.shape[0]
    xmax = float(np.max(xs, initial=0.0))
    norm = np.linalg.norm(G, 2) * xmax
    s = 0 if norm <= 0.5 else int(np.ceil(np.log2(norm / 0.5)))
    M = (xs[:, None, None] / 2**s) * G
    out = np.broadcast_to(np.eye(d, dtype=complex), M.shape).copy()
    term = out.copy()
    for k in range(1, 60):
        term = term @ M / k
        out = out + term
        if np.abs(term).max() <= 1e-16 * max(1.0, np.abs(out).max()):
            break
    for _ in range(s):
        out = out @ out
    return out


class SemigroupCache:
    """Evaluate exp(x*G) at scalar or array arguments for a fixed generator."""

    def __init__(self, G: np.ndarray):
        G = np.asarray(G, dtype=complex)
        self.G = G
        self._diagonalizable = False
        try:
            lam, U = np.linalg.eig(G)
            Uinv = np.linalg.inv(U)
            recon = (U * lam) @ Uinv
            ok = (
                np.linalg.cond(U) < 1e7
                and np.linalg.norm(recon - G) <= 1e-11 * max(1.0, np.linalg.norm(G))
            )
            if ok:
                self.lam, self.U, self.Uinv = lam, U, Uinv
                self._diagonalizable = True
        except np.linalg.LinAlgError:
            pass

    def at(self, x):
        """exp(x*G); ``x`` may be a scalar or a 1-D array (returns a stack)."""
        scalar = np.isscalar(x)
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(xs < 0):
            raise ValueError("semigroup arguments must be >= 0")
        if self._diagonalizable:
            ph = np.exp(np.outer(xs, self.lam))
            out = np.einsum("ij,bj,jk->bik", self.U, ph, self.Uinv)
        else:
            out = _batch_expm(self.G, xs)
        return out[0] if scalar else out

    def at_checked(self, x: float) -> np.ndarray:
        """Scalar evaluation cross-checked against the series exponential."""
        fast = self.at(float(x))
        ref = superop_exp(self.G, float(x)) if self.G.shape == (4, 4) else None
        if ref is not None and np.linalg.norm(fast - ref) > 1e-9 * max(1.0, np.linalg.norm(ref)):
            return ref
        return fast
