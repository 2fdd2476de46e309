"""Lanczos exponentials and a commutator-free Magnus stepper with step doubling."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

Matvec = Callable[[np.ndarray], np.ndarray]

KRYLOV_MAX = 40

# Gauss-Legendre nodes and the weights of the two-exponential 4th-order commutator-free scheme
C1 = 0.5 - math.sqrt(3) / 6
C2 = 0.5 + math.sqrt(3) / 6
W1 = 0.25 + math.sqrt(3) / 6
W2 = 0.25 - math.sqrt(3) / 6


class KrylovError(RuntimeError):
    pass


class StepControlError(RuntimeError):
    pass


def _small_expm_e1(alpha, beta, dt):
    if not beta:
        return np.exp(-1j * dt * np.asarray(alpha))
    evals, evecs = eigh_tridiagonal(np.asarray(alpha), np.asarray(beta))
    return evecs @ (np.exp(-1j * dt * evals) * evecs[0])


def lanczos_expm(matvec: Matvec, v: np.ndarray, dt: float, tol: float, m_max: int = KRYLOV_MAX):
    """``exp(-i dt H) v`` for Hermitian ``H``; returns ``(result, matvecs)``.

    The subspace grows until the a-posteriori estimate
    ``beta_m * ||v|| * |[exp(-i dt T_m) e_1]_m|`` drops below ``tol``.
    Raises :class:`KrylovError` if ``m_max`` vectors are not enough.
    """
    beta0 = float(np.linalg.norm(v))
    if beta0 == 0.0:
        return np.zeros_like(v, dtype=complex), 0
    basis = np.empty((m_max + 1, len(v)), dtype=complex)
    basis[0] = v / beta0
    alpha: list[float] = []
    beta: list[float] = []
    for j in range(m_max):
        w = matvec(basis[j]).astype(complex, copy=False)
        a = float(np.vdot(basis[j], w).real)
        w = w - a * basis[j]
        if j:
            w -= beta[-1] * basis[j - 1]
        # reorthogonalise against the whole basis; keeps degenerate clusters honest
        w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        alpha.append(a)
        b = float(np.linalg.norm(w))
        c = _small_expm_e1(alpha, beta, dt)
        if b * abs(c[-1]) * beta0 < tol or b < 1e-12 * max(1.0, abs(a)):
            return beta0 * (basis[: j + 1].T @ c), j + 1
        beta.append(b)
        basis[j + 1] = w / b
    raise KrylovError(f"no convergence with {m_max} Lanczos vectors (dt={dt:g})")


def expm_apply(matvec: Matvec, v: np.ndarray, dt: float, tol: float, m_max: int = KRYLOV_MAX):
    """Like :func:`lanczos_expm` but splits ``dt`` into substeps when the subspace is too small."""
    pieces = 1
    while True:
        try:
            out, count = v, 0
            for _ in range(pieces):
                out, k = lanczos_expm(matvec, out, dt / pieces, tol / pieces, m_max)
                count += k
            return out, count
        except KrylovError:
            pieces *= 2
            if pieces > 1024:
                raise


class MagnusStepper:
    """Solves ``d psi / ds = -i K(s) psi`` with ``K`` Hermitian.

    ``combine(s1, s2, w1, w2)`` must return a matvec for ``w1 K(s1) + w2 K(s2)``.
    Each step uses two exponentials at the Gauss nodes.  Local error is estimated
    by comparing one step of size ``h`` against two of size ``h/2``; the two half
    steps are kept.
    """

    def __init__(self, combine, tol: float, h0: float = 0.01, h_min: float = 1e-12):
        self.combine = combine
        self.tol = tol
        self.h0 = h0
        self.h_min = h_min
        self.matvecs = 0
        self.steps = 0
        self.rejected = 0

    def _step(self, psi, s, h):
        a, b = s + C1 * h, s + C2 * h
        ktol = self.tol * 1e-2
        # the earlier node dominates the first exponential
        psi, k1 = expm_apply(self.combine(a, b, W1, W2), psi, h, ktol)
        psi, k2 = expm_apply(self.combine(a, b, W2, W1), psi, h, ktol)
        self.matvecs += k1 + k2
        return psi

    def run(self, psi: np.ndarray, s0: float, s1: float) -> np.ndarray:
        s, h = s0, self.h0
        while s1 - s > 1e-15 * max(1.0, abs(s1)):
            clamped = h > s1 - s
            step = s1 - s if clamped else h
            full = self._step(psi, s, step)
            half = self._step(self._step(psi, s, 0.5 * step), s + 0.5 * step, 0.5 * step)
            err = float(np.linalg.norm(half - full)) / 15.0
            accepted = err <= self.tol
            if accepted:
                psi, s = half, s + step
                self.steps += 1
            else:
                self.rejected += 1
            factor = 2.0 if err == 0 else min(2.0, max(0.2, 0.9 * (self.tol / err) ** 0.2))
            # a step shortened to hit s1 should not shrink the next one
            h = max(h, step * factor) if (accepted and clamped) else step * factor
            if h < self.h_min:
                raise StepControlError(f"step size underflow at s={s:.6g} (error {err:.2e})")
        self.h0 = h
        return psi
