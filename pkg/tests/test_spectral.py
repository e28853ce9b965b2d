"""Transform, Poisson, projection and dealiasing checks on the torus."""

import numpy as np
import pytest

from nsverify.errors import SolvabilityError
from nsverify.fields import (
    ScalarField,
    VectorField,
    divergence,
    energy,
    gradient,
    laplacian,
)
from nsverify.spectral import (
    DealiasPolicy,
    SpectralField,
    dealias_product,
    leray_project,
    solve_poisson_periodic,
)

from conftest import random_smooth_scalar, taylor_green


# --- transform pair ----------------------------------------------------------

def test_roundtrip_within_tolerance(torus64):
    s = random_smooth_scalar(torus64, 1)
    back = SpectralField.from_real(s).to_real()
    scale = max(s.max_abs(), 1e-300)
    assert np.max(np.abs(back.values - s.values)) / scale < 1e-12


def test_conjugate_symmetry_exact(torus32):
    s = random_smooth_scalar(torus32, 2)
    m = SpectralField.from_real(s).modes
    n0, n1 = m.shape
    for i in (0, 1, 5, 17):
        for j in (0, 1, 9, 20):
            assert m[i, j] == np.conj(m[(-i) % n0, (-j) % n1])


# --- Poisson inversion --------------------------------------------------------

def test_poisson_zero_source_gives_zero(torus64):
    p = solve_poisson_periodic(ScalarField.zeros(torus64))
    assert p.max_abs() == 0.0


def test_poisson_single_mode(torus64):
    rhs = ScalarField.from_function(torus64, lambda x, y: -np.sin(x) + 0.0 * y)
    p = solve_poisson_periodic(rhs)
    x = torus64.meshes()[0]
    assert np.max(np.abs(p.values - (np.sin(x) + 0.0 * p.values))) < 1e-10


def test_poisson_product_mode(torus64):
    rhs = ScalarField.from_function(torus64, lambda x, y: -2.0 * np.sin(x) * np.sin(y))
    p = solve_poisson_periodic(rhs)
    x, y = np.meshgrid(torus64.axis_coords(0), torus64.axis_coords(1), indexing="ij")
    assert np.max(np.abs(p.values - np.sin(x) * np.sin(y))) < 1e-10


def test_poisson_rejects_nonzero_mean(torus64):
    rhs = ScalarField.from_function(torus64, lambda x, y: np.sin(x) + 0.25 + 0.0 * y)
    with pytest.raises(SolvabilityError) as err:
        solve_poisson_periodic(rhs)
    assert "2.5" in str(err.value)  # measured mean is named


def test_poisson_zero_mean_gauge(torus64):
    rhs = ScalarField.from_function(torus64, lambda x, y: np.sin(2 * x) * np.cos(y))
    p = solve_poisson_periodic(rhs)
    assert abs(float(np.mean(p.values))) < 1e-12


def test_poisson_linearity(torus64):
    a = ScalarField.from_function(torus64, lambda x, y: np.sin(x) * np.cos(2 * y))
    b = ScalarField.from_function(torus64, lambda x, y: np.cos(3 * x) * np.sin(y))
    pa = solve_poisson_periodic(a)
    pb = solve_poisson_periodic(b)
    pab = solve_poisson_periodic(a + b)
    assert np.max(np.abs(pab.values - (pa.values + pb.values))) < 1e-12


def test_poisson_solves_discrete_laplacian(torus64):
    rhs = random_smooth_scalar(torus64, 6)
    rhs = rhs - ScalarField.from_function(
        torus64, lambda x, y: np.full_like(x + y, float(np.mean(rhs.values)))
    )
    p = solve_poisson_periodic(rhs)
    assert np.max(np.abs(laplacian(p).values - rhs.values)) < 1e-10


# --- Leray projection ---------------------------------------------------------

def test_leray_keeps_solenoidal_fields(torus64):
    v = taylor_green(torus64)
    pv = leray_project(v)
    for a, b in zip(pv.components, v.components):
        assert np.max(np.abs(a.values - b.values)) < 1e-12


def test_leray_kills_gradients(torus64):
    s = random_smooth_scalar(torus64, 9)
    g = gradient(s)
    assert leray_project(g).max_abs() < 1e-10


def test_leray_output_divergence_free(torus64):
    v = VectorField.from_function(torus64, lambda x, y: (np.sin(x) + 0.0 * y, 0.0 * (x + y)))
    pv = leray_project(v)
    assert divergence(pv).max_abs() < 1e-10


def test_leray_idempotent(torus64):
    v = VectorField(
        torus64, (random_smooth_scalar(torus64, 13), random_smooth_scalar(torus64, 14))
    )
    once = leray_project(v)
    twice = leray_project(once)
    for a, b in zip(once.components, twice.components):
        assert np.max(np.abs(a.values - b.values)) < 1e-12


def test_parseval(torus64):
    v = VectorField(
        torus64, (random_smooth_scalar(torus64, 15), random_smooth_scalar(torus64, 16))
    )
    # mode-sum oracle computed directly with the raw FFT
    total = 0.0
    m = float(np.prod(torus64.cells))
    for comp in v.components:
        spec = np.fft.fftn(comp.values)
        total += torus64.volume * float(np.sum(np.abs(spec) ** 2)) / m**2
    assert abs(energy(v) - total) / total < 1e-10


# --- dealiasing ---------------------------------------------------------------

def test_dealias_constant_untouched(torus64):
    one = ScalarField.from_function(torus64, lambda x, y: np.ones_like(x + y))
    out = dealias_product(one, one, DealiasPolicy.two_thirds())
    assert np.max(np.abs(out.values - 1.0)) < 1e-14


def test_dealias_low_mode_untouched(torus64):
    a = ScalarField.from_function(torus64, lambda x, y: np.sin(x) + 0.0 * y)
    one = ScalarField.from_function(torus64, lambda x, y: np.ones_like(x + y))
    out = dealias_product(a, one, DealiasPolicy.two_thirds())
    assert np.max(np.abs(out.values - a.values)) < 1e-14


def test_dealias_removes_high_modes(torus64):
    n = 64
    k_hi = n // 2 - 1
    a = ScalarField.from_function(torus64, lambda x, y: np.sin(k_hi * x) + 0.0 * y)
    out = dealias_product(a, a, DealiasPolicy.two_thirds())
    # brute-force mode inspection of the result
    spec = np.fft.fft2(out.values) / n**2
    freq = np.fft.fftfreq(n, d=1.0 / n)
    cutoff = n / 3.0
    bad = (np.abs(freq)[:, None] > cutoff) | (np.abs(freq)[None, :] > cutoff)
    assert np.max(np.abs(spec[bad])) < 1e-12
    # sin^2 keeps its zero-mode part below the cutoff
    assert abs(spec[0, 0] - 0.5) < 1e-12


def test_dealias_none_is_pointwise_product(torus64):
    a = random_smooth_scalar(torus64, 17)
    b = random_smooth_scalar(torus64, 18)
    out = dealias_product(a, b, DealiasPolicy.none())
    assert np.array_equal(out.values, a.values * b.values)


def test_projection_concurrent_on_distinct_inputs(torus64):
    import concurrent.futures

    fields = [
        VectorField(
            torus64,
            (random_smooth_scalar(torus64, 100 + i), random_smooth_scalar(torus64, 200 + i)),
        )
        for i in range(8)
    ]
    serial = [leray_project(v) for v in fields]
    with concurrent.futures.ThreadPoolExecutor(max_workers=4) as pool:
        parallel = list(pool.map(leray_project, fields))
    for a, b in zip(serial, parallel):
        for ca, cb in zip(a.components, b.components):
            assert np.array_equal(ca.values, cb.values)
