"""Vector-valued Hermitian forms and the group structure they induce.

A quadric geometry is described by m Hermitian n x n matrices ``A_k``.  The
form ``phi(z, w) = (w^H A_1 z, ..., w^H A_m z)`` is linear in its first slot
and conjugate-linear in the second, so ``phi(z, w) = conj(phi(w, z))`` and
``phi(z, z)`` is real componentwise.  The associated group on C^n x R^m is

    (z, t) (z', t') = (z + z', t + t' + 2 Im phi(z, z')).

Everything here is immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITIAN_DEFECT_TOL = 1e-10


def _as_complex_matrix(a, n: int, k: int) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.shape != (n, n):
        raise ValueError(f"matrix A[{k}] has shape {a.shape}, expected ({n}, {n})")
    return a


@dataclass(frozen=True)
class QuadricForm:
    """m Hermitian n x n matrices defining the vector-valued form.

    Matrices whose Hermitian defect ``|A - A^H|_F`` is below
    ``1e-10 * max(1, |A|_F)`` are symmetrized to ``(A + A^H)/2`` on
    construction (tolerating serialization round-off); larger defects are
    rejected.
    """

    n: int
    m: int
    A: tuple = field(repr=False)

    def __init__(self, n: int, m: int, A):
        if n < 1 or m < 1:
            raise ValueError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
        A = list(A)
        if len(A) != m:
            raise ValueError(f"got {len(A)} matrices, expected m={m}")
        mats = []
        for k, a in enumerate(A):
            a = _as_complex_matrix(a, n, k)
            defect = np.linalg.norm(a - a.conj().T)
            if defect > HERMITIAN_DEFECT_TOL * max(1.0, np.linalg.norm(a)):
                raise ValueError(
                    f"matrix A[{k}] is not Hermitian (defect {defect:.3e})"
                )
            h = 0.5 * (a + a.conj().T)
            h.setflags(write=False)
            mats.append(h)
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "m", int(m))
        object.__setattr__(self, "A", tuple(mats))

    def to_json(self) -> dict:
        """JSON object {"n", "m", "A"}; matrices are row-major [re, im] pairs."""
        return {
            "n": self.n,
            "m": self.m,
            "A": [
                [[float(x.real), float(x.imag)] for x in a.ravel()] for a in self.A
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "QuadricForm":
        for key in ("n", "m", "A"):
            if key not in obj:
                raise ValueError(f"quadric JSON is missing field '{key}'")
        n, m = int(obj["n"]), int(obj["m"])
        mats = []
        for k, flat in enumerate(obj["A"]):
            if len(flat) != n * n:
                raise ValueError(
                    f"matrix A[{k}] has {len(flat)} entries, expected {n * n}"
                )
            vals = np.array([complex(re, im) for re, im in flat], dtype=complex)
            mats.append(vals.reshape(n, n))
        return cls(n, m, mats)


@dataclass(frozen=True)
class GroupElement:
    """A point g = (z, t) of the group C^n x R^m."""

    z: np.ndarray
    t: np.ndarray

    def __init__(self, z, t):
        z = np.asarray(z, dtype=complex).reshape(-1)
        t = np.asarray(t, dtype=float).reshape(-1)
        z.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "t", t)


def heisenberg(n: int = 1) -> QuadricForm:
    """The classic case: phi(z, z) = |z|^2, i.e. a single identity matrix."""
    return QuadricForm(n, 1, [np.eye(n, dtype=complex)])


def phi_eval(Q: QuadricForm, z, w) -> np.ndarray:
    """Evaluate the form: component k is ``w^H A_k z``.

    Linear in ``z``, conjugate-linear in ``w``; satisfies
    ``phi_eval(Q, z, w) == conj(phi_eval(Q, w, z))``.
    """
    z = np.asarray(z, dtype=complex).reshape(-1)
    w = np.asarray(w, dtype=complex).reshape(-1)
    if z.shape != (Q.n,) or w.shape != (Q.n,):
        raise ValueError(
            f"vectors must have length n={Q.n}, got {z.shape[0]} and {w.shape[0]}"
        )
    return np.array([np.vdot(w, a @ z) for a in Q.A])


def phi_lambda_matrix(Q: QuadricForm, lam) -> np.ndarray:
    """The Hermitian matrix of the scalar form ``phi(., .) . lam``."""
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.shape != (Q.m,):
        raise ValueError(f"lambda must have length m={Q.m}, got {lam.shape[0]}")
    out = np.zeros((Q.n, Q.n), dtype=complex)
    for lk, a in zip(lam, Q.A):
        out += lk * a
    return out


def group_mul(Q: QuadricForm, g: GroupElement, h: GroupElement) -> GroupElement:
    """Group law (z,t)(z',t') = (z+z', t+t' + 2 Im phi(z,z'))."""
    if g.z.shape != (Q.n,) or h.z.shape != (Q.n,):
        raise ValueError(f"group elements must have z of length n={Q.n}")
    if g.t.shape != (Q.m,) or h.t.shape != (Q.m,):
        raise ValueError(f"group elements must have t of length m={Q.m}")
    return GroupElement(g.z + h.z, g.t + h.t + 2.0 * phi_eval(Q, g.z, h.z).imag)


def group_inverse(g: GroupElement) -> GroupElement:
    """The inverse of (z, t) is (-z, -t)."""
    return GroupElement(-g.z, -g.t)
