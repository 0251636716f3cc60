"""Fit a 6-phase Coxian distribution to |N(0,1)| (the half-normal law).

Produces the jump representation used by fixtures/case1.json. The fit matches
the Laplace transform on a log-spaced grid (that is all the scale functions
see) plus the first three moments, and keeps rates well separated.

Usage: python3 fixtures/fit_half_normal.py
"""
import json

import numpy as np
from scipy.linalg import expm, inv
from scipy.optimize import minimize
from scipy.special import erfcx

M = 6
LAMBDAS = np.concatenate([np.logspace(-3, 2, 60)])
TRUE_LT = erfcx(LAMBDAS / np.sqrt(2.0))
TRUE_MOMENTS = np.array([np.sqrt(2 / np.pi), 1.0, 2 * np.sqrt(2 / np.pi)])


def unpack(theta):
    rates = np.exp(theta[:M])
    cont = 1.0 / (1.0 + np.exp(-theta[M:]))
    T = np.zeros((M, M))
    for i in range(M):
        T[i, i] = -rates[i]
        if i + 1 < M:
            T[i, i + 1] = rates[i] * cont[i]
    alpha = np.zeros(M)
    alpha[0] = 1.0
    return alpha, T


def laplace(alpha, T, lam):
    t = -T.sum(axis=1)
    eye = np.eye(M)
    return np.array([alpha @ np.linalg.solve(l * eye - T, t) for l in lam])


def moments(alpha, T):
    U = inv(-T)
    one = np.ones(M)
    return np.array([alpha @ U @ one, 2 * alpha @ U @ U @ one, 6 * alpha @ U @ U @ U @ one])


def objective(theta):
    alpha, T = unpack(theta)
    lt = laplace(alpha, T, LAMBDAS)
    err = np.sum(((lt - TRUE_LT) / TRUE_LT) ** 2)
    mom = np.sum(((moments(alpha, T) - TRUE_MOMENTS) / TRUE_MOMENTS) ** 2)
    rates = -np.diag(T)
    gaps = np.abs(rates[:, None] - rates[None, :])[np.triu_indices(M, 1)]
    sep = np.sum(np.maximum(0.0, 0.05 - gaps) ** 2)
    return err + 100.0 * mom + 10.0 * sep


def main():
    rng = np.random.default_rng(7)
    best = None
    for _ in range(12):
        theta0 = np.concatenate([np.log(rng.uniform(2, 15, M)), rng.normal(1.0, 1.0, M - 1)])
        res = minimize(objective, theta0, method="Nelder-Mead",
                       options={"maxiter": 6000, "xatol": 1e-10, "fatol": 1e-14})
        res = minimize(objective, res.x, method="BFGS")
        if best is None or res.fun < best.fun:
            best = res
    alpha, T = unpack(best.x)
    print("objective", best.fun)
    print("moments", moments(alpha, T), "target", TRUE_MOMENTS)
    print("max rel LT err", np.max(np.abs(laplace(alpha, T, LAMBDAS) / TRUE_LT - 1)))
    print(json.dumps({"alpha": alpha.round(15).tolist(), "T": T.round(15).tolist()}))


if __name__ == "__main__":
    main()
