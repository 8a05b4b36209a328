import math

import numpy as np
import pytest
from scipy.optimize import brentq

from graphks import (
    DiscreteLaplacian,
    GridFunction,
    Mesh,
    apply_fractional_power,
    eigendecompose,
    interval_graph,
    spectral_heat,
    star_graph,
)


def star_secular_eigenvalues(arms: int, length: float, count: int):
    """Independent oracle for the equilateral star: bisection on the secular factors.

    Symmetric modes solve sin(k l) = 0 (simple); antisymmetric modes solve
    cos(k l) = 0 with multiplicity arms - 1.
    """
    ks = [(0.0, 1)]
    n = 0
    while len(ks) < count + 2:
        n += 1
        # bracket each secular root and bisect; no closed-form values enter
        k_anti = brentq(
            lambda k: math.cos(k * length),
            (n - 0.75) * math.pi / length,
            (n - 0.25) * math.pi / length,
            xtol=1e-14,
        )
        k_sym = brentq(
            lambda k: math.sin(k * length),
            (n - 0.5) * math.pi / length,
            (n + 0.5) * math.pi / length,
            xtol=1e-14,
        )
        ks.append((k_anti, arms - 1))
        ks.append((k_sym, 1))
    out = []
    for k, mult in sorted(ks):
        out.extend([-k * k] * mult)
    return np.array(out[:count])


def test_annihilates_constants(star3_mesh):
    L = DiscreteLaplacian(star3_mesh)
    assert np.abs(L.apply(np.ones(L.size))).max() < 1e-12


def test_self_adjointness(lollipop):
    mesh = Mesh(lollipop, 20)
    L = DiscreteLaplacian(mesh)
    rng = np.random.default_rng(1)
    for _ in range(5):
        u, v = rng.normal(size=L.size), rng.normal(size=L.size)
        assert abs(L.inner(L.apply(u), v) - L.inner(u, L.apply(v))) < 1e-12 * L.size


def test_nonpositive_spectrum(star3_mesh):
    L = DiscreteLaplacian(star3_mesh)
    dec = eigendecompose(L, 12)
    assert dec.eigenvalues[0] == pytest.approx(0.0, abs=1e-10)
    assert np.all(dec.eigenvalues <= 1e-10)
    assert dec.residuals().max() < 1e-8


def test_interval_spectrum_corrected():
    L = DiscreteLaplacian(Mesh(interval_graph(math.pi), 64))
    dec = eigendecompose(L, 6)
    for n in range(5):
        assert dec.eigenvalues_corrected[n] == pytest.approx(-float(n * n), abs=1e-9)


def test_interval_raw_convergence_order():
    errs, hs = [], []
    for npl in (32, 64, 128):
        mesh = Mesh(interval_graph(math.pi), npl)
        dec = eigendecompose(DiscreteLaplacian(mesh), 5)
        errs.append(max(abs(dec.eigenvalues[n] + n * n) for n in (1, 2, 3)))
        hs.append(mesh.h[0])
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)


def test_star_spectrum_vs_secular():
    L = DiscreteLaplacian(Mesh(star_graph(3, 1.0), 200))
    dec = eigendecompose(L, 10)
    ref = star_secular_eigenvalues(3, 1.0, 10)
    assert np.abs(dec.eigenvalues_corrected - ref).max() < 1e-8


def test_eigenvectors_weighted_orthonormal(star3_mesh):
    L = DiscreteLaplacian(star3_mesh)
    dec = eigendecompose(L, 8)
    G = dec.vectors.T @ (L.weights[:, None] * dec.vectors)
    assert np.abs(G - np.eye(8)).max() < 1e-10


def test_resolvent_matches_spectral_sum(star3_mesh):
    L = DiscreteLaplacian(star3_mesh)
    dec = eigendecompose(L, L.size)
    rng = np.random.default_rng(3)
    f = GridFunction.from_shared(star3_mesh, rng.normal(size=L.size))
    sigma = 2.3
    direct = L.resolvent_solve(sigma, f).to_shared()
    c = dec.coefficients(f)
    viaspec = dec.synthesize(c / (sigma - dec.eigenvalues)).to_shared()
    assert np.abs(direct - viaspec).max() < 1e-9


def test_spectral_heat_consistency(interval_laplacian, interval_mesh, interval_plan):
    dec = eigendecompose(interval_laplacian, interval_laplacian.size)
    u = interval_mesh.sample(lambda eid, x: np.cos(math.pi * x) + 0.3 * np.cos(2 * math.pi * x))
    for t in (0.02, 0.3):
        a = interval_plan.apply_heat(t, 0.0, u)
        b = spectral_heat(dec, t, 0.0, u)
        err = max(np.abs(x - y).max() for x, y in zip(a.samples, b.samples))
        assert err < 1e-8


def test_fractional_power_limits(star3_mesh):
    L = DiscreteLaplacian(star3_mesh)
    dec = eigendecompose(L, L.size)
    rng = np.random.default_rng(5)
    u = GridFunction.from_shared(star3_mesh, rng.normal(size=L.size))
    sigma = 1.5
    # alpha = 1 is (sigma - L) applied directly
    one = apply_fractional_power(dec, sigma, 1.0, u).to_shared()
    direct = sigma * u.to_shared() - L.apply(u.to_shared())
    assert np.abs(one - direct).max() < 1e-8
    # alpha = 0 is the identity
    zero = apply_fractional_power(dec, sigma, 0.0, u).to_shared()
    assert np.abs(zero - u.to_shared()).max() < 1e-10
    # halves compose
    half = apply_fractional_power(dec, sigma, 0.5, u)
    again = apply_fractional_power(dec, sigma, 0.5, half).to_shared()
    assert np.abs(again - one).max() < 1e-8


def test_fractional_power_on_eigenvector(interval_laplacian):
    dec = eigendecompose(interval_laplacian, 4)
    mesh = interval_laplacian.mesh
    v = GridFunction.from_shared(mesh, dec.vectors[:, 2].copy())
    lam = dec.eigenvalues[2]
    sigma, alpha = 2.0, 0.37
    out = apply_fractional_power(dec, sigma, alpha, v).to_shared()
    assert np.abs(out - (sigma - lam) ** alpha * dec.vectors[:, 2]).max() < 1e-9
