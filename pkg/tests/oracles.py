"""Independent reference computations used by the tests (no lipgeo graph code)."""
import numpy as np


def epsilon_adjacency(points, eps, rtol=1e-9):
    """Dense weight matrix of the epsilon-ball rule (inclusive, relative margin rtol); inf where no edge."""
    diff = points[:, None, :] - points[None, :, :]
    E = np.sqrt(np.sum(diff * diff, axis=2))
    W = np.where(E <= eps * (1 + rtol), E, np.inf)
    np.fill_diagonal(W, 0.0)
    return W


def floyd_warshall(W):
    D = W.copy()
    for k in range(D.shape[0]):
        D = np.minimum(D, D[:, k, None] + D[None, k, :])
    return D


def cone_geodesic(s1, th1, s2, th2):
    """Geodesic length on the unrolled cone x^2 + y^2 = z^2 (slant lengths s, polar angles th)."""
    d = np.abs(np.mod(th1 - th2 + np.pi, 2 * np.pi) - np.pi)
    phi = d / np.sqrt(2.0)
    return np.sqrt(s1 * s1 + s2 * s2 - 2 * s1 * s2 * np.cos(phi))


def parabola_arclength(u):
    """Length of (x, x^2) for x in [0, u]."""
    return 0.5 * u * np.sqrt(1 + 4 * u * u) + 0.25 * np.arcsinh(2 * u)


def random_orthogonal(n, rng):
    Q, R = np.linalg.qr(rng.normal(size=(n, n)))
    return Q * np.sign(np.diag(R))
