"""Rasch baseline: marginal maximum likelihood via EM with a normal latent
ability (mean 0, scale estimated) on a Gauss-Hermite grid, and EAP person
scores. Provides the entry-wise accuracy matrix for the D1 comparison.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import ResponseMatrix

_PSI_CLAMP = 10.0


@dataclass
class RaschFit:
    psi: np.ndarray          # item difficulties, logit units
    xi: np.ndarray           # EAP person abilities, logit units
    sigma: float             # latent ability scale
    loglik: float            # log marginal likelihood at the final iterate
    converged: bool
    n_iterations: int
    clamped_items: list      # indices of constant columns clamped at +/-10
    loglik_path: np.ndarray  # per-iteration log marginal likelihood

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(
                {
                    "psi": self.psi.tolist(),
                    "xi": self.xi.tolist(),
                    "sigma": float(self.sigma),
                    "loglik": float(self.loglik),
                    "converged": bool(self.converged),
                    "n_iterations": int(self.n_iterations),
                    "clamped_items": list(map(int, self.clamped_items)),
                },
                fh,
            )

    @classmethod
    def load(cls, path) -> "RaschFit":
        with open(path) as fh:
            d = json.load(fh)
        return cls(
            psi=np.asarray(d["psi"], dtype=np.float64),
            xi=np.asarray(d["xi"], dtype=np.float64),
            sigma=float(d["sigma"]),
            loglik=float(d["loglik"]),
            converged=bool(d["converged"]),
            n_iterations=int(d["n_iterations"]),
            clamped_items=d.get("clamped_items", []),
            loglik_path=np.zeros(0),
        )


def _logistic(x):
    return 1.0 / (1.0 + np.exp(-x))


def fit_rasch(
    X: ResponseMatrix,
    n_quadrature: int = 21,
    max_iter: int = 500,
    tol: float = 1e-6,
) -> RaschFit:
    """MML-EM fit of P(X_ij = 1) = logistic(sigma z_i - psi_j), z ~ N(0,1).

    The latent mean is fixed at 0 and difficulties are free; sigma is the
    estimated ability scale. Each M step solves the per-item difficulty and
    the scale by Newton iterations on the (concave) expected complete-data
    log likelihood, so the marginal likelihood is nondecreasing. Person
    abilities are EAP: xi_i = sigma * E[z | x_i].
    """
    Xe = X.entries.astype(np.float64)
    n, D = Xe.shape
    colmean = Xe.mean(axis=0)
    clamped = [j for j in range(D) if colmean[j] in (0.0, 1.0)]

    # standard-normal Gauss-Hermite grid (probabilists' convention)
    gh_x, gh_w = np.polynomial.hermite.hermgauss(n_quadrature)
    z = gh_x * np.sqrt(2.0)
    wq = gh_w / np.sqrt(np.pi)

    # moment starting values
    psi = -np.log(np.clip(colmean, 1e-3, 1 - 1e-3) / np.clip(1 - colmean, 1e-3, 1))
    sigma = 1.0
    loglik_path = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # E step: posterior over grid points per person
        eta = sigma * z[:, None] - psi[None, :]          # (Q, D)
        logp = -np.logaddexp(0.0, -eta)                  # log logistic(eta)
        logq = -np.logaddexp(0.0, eta)                   # log (1 - logistic)
        ll_iq = Xe @ logp.T + (1.0 - Xe) @ logq.T        # (n, Q)
        ll_iq += np.log(wq)[None, :]
        mx = ll_iq.max(axis=1, keepdims=True)
        post = np.exp(ll_iq - mx)
        norm = post.sum(axis=1, keepdims=True)
        loglik = float((np.log(norm) + mx).sum())
        loglik_path.append(loglik)
        post /= norm                                     # (n, Q)

        nq = post.sum(axis=0)                            # expected persons per node
        rq = post.T @ Xe                                 # (Q, D) expected correct

        # M step: per-item Newton on psi (concave in psi_j)
        psi_new = psi.copy()
        for _ in range(50):
            p = _logistic(sigma * z[:, None] - psi_new[None, :])
            score = (nq[:, None] * p - rq).sum(axis=0)
            info = (nq[:, None] * p * (1.0 - p)).sum(axis=0)
            step = score / np.maximum(info, 1e-12)
            psi_new = np.clip(psi_new + step, -_PSI_CLAMP, _PSI_CLAMP)
            if np.abs(step).max() < 1e-10:
                break
        # then Newton on sigma (concave in sigma)
        sigma_new = sigma
        for _ in range(50):
            p = _logistic(sigma_new * z[:, None] - psi_new[None, :])
            score = float((z[:, None] * (rq - nq[:, None] * p)).sum())
            info = float((z[:, None] ** 2 * nq[:, None] * p * (1.0 - p)).sum())
            step = score / max(info, 1e-12)
            sigma_new = max(sigma_new + step, 1e-6)
            if abs(step) < 1e-10:
                break

        change = max(float(np.abs(psi_new - psi).max()), abs(sigma_new - sigma))
        psi, sigma = psi_new, sigma_new
        if change < tol:
            converged = True
            break

    # final E step for EAP scores and the reported likelihood
    eta = sigma * z[:, None] - psi[None, :]
    logp = -np.logaddexp(0.0, -eta)
    logq = -np.logaddexp(0.0, eta)
    ll_iq = Xe @ logp.T + (1.0 - Xe) @ logq.T + np.log(wq)[None, :]
    mx = ll_iq.max(axis=1, keepdims=True)
    post = np.exp(ll_iq - mx)
    norm = post.sum(axis=1, keepdims=True)
    loglik = float((np.log(norm) + mx).sum())
    post /= norm
    xi = sigma * (post @ z)

    return RaschFit(
        psi=psi,
        xi=xi,
        sigma=float(sigma),
        loglik=loglik,
        converged=converged,
        n_iterations=it,
        clamped_items=clamped,
        loglik_path=np.asarray(loglik_path),
    )


def rasch_accuracy_matrix(fit: RaschFit) -> np.ndarray:
    """Entry (i, j) = logistic(xi_i - psi_j)."""
    return _logistic(fit.xi[:, None] - fit.psi[None, :])
