import mpmath
import numpy as np
import pytest

from thermolab.kernels import (Angular, DoubleKernelSpec, KernelId, cosine_kernel, double_kernel,
                               kernel_radial, kernel_spec, profile_amplitude, undamped)
from thermolab.params import UNIT, ModelParams, derive
from thermolab.solution import Target, solution_arrays

DP = derive(UNIT)
DP2 = undamped(DP)


def mp_kernel(spec, t, r, dps=60):
    with mpmath.workdps(dps):
        r, t = mpmath.mpf(r), mpmath.mpf(t)

        def wave(l, beta, c):
            return l * mpmath.sin(beta * r * t) / (beta * r) * mpmath.exp(-c * r * r * t)
        v = wave(spec.l1, spec.beta1, spec.c1) - wave(spec.l2, spec.beta2, spec.c2)
        return float(v / r ** int(spec.sigma))


SPECS = [
    kernel_spec("G1", DP), kernel_spec("G2", DP), kernel_spec("G3", DP2), kernel_spec("G4", DP2),
    DoubleKernelSpec(1.0, 2.0, 1.0, 1.0, 0.3, 0.1, 1),
    DoubleKernelSpec(1.0, 0.0, 1.3, 0.7, 0.2, 0.0, 0),
]


@pytest.mark.parametrize("spec", SPECS)
def test_against_high_precision_oracle(spec):
    rng = np.random.default_rng(1)
    for _ in range(60):
        r = float(10 ** rng.uniform(-7, 1))
        t = float(10 ** rng.uniform(-2, 5))
        want = mp_kernel(spec, t, r)
        got = float(double_kernel(spec, t, np.array([r]))[0])
        assert got == pytest.approx(want, rel=1e-9, abs=1e-300)


def test_g2_limit_is_t():
    for t in (0.5, 7.0, 300.0):
        assert kernel_radial("G2", DP, t, np.array([1e-12]))[0] == pytest.approx(t, rel=1e-8)
        assert kernel_radial("G2", DP, t, np.array([0.0]))[0] == pytest.approx(t, rel=1e-12)


def test_g3_small_argument_magnitude():
    coef = DP.gamma / DP.alpha2 * (DP.nu1 ** 2 - DP.nu2 ** 2) / 6
    assert coef == pytest.approx(1 / 6)
    for t, r in ((1.0, 1e-3), (10.0, 1e-5), (100.0, 1e-7)):
        got = abs(kernel_radial("G3", DP2, t, np.array([r]))[0])
        assert got == pytest.approx(coef * t ** 3 * r, rel=0.01)


def test_g0_vanishes_at_t0():
    assert np.all(cosine_kernel(DP, 0.0, np.linspace(0, 5, 11)) == 0)


def test_g3_is_g1_without_damping():
    r = np.geomspace(1e-6, 10, 200)
    for t in (0.1, 5.0, 1e3):
        a = kernel_radial("G3", DP, t, r)
        b = double_kernel(kernel_spec("G1", DP2), t, r)
        assert np.array_equal(a, b)


def test_profile_identities():
    r = np.geomspace(1e-4, 3, 50)
    assert np.all(profile_amplitude("phi", DP, 0.0, 2.0, r) == 0)
    assert profile_amplitude("psi", DP, 2.5, 4.0, np.array([1e-10]))[0] == pytest.approx(10.0, rel=1e-8)
    assert np.array_equal(profile_amplitude("psi_tilde", DP2, 1.7, 3.0, r),
                          profile_amplitude("psi", DP2, 1.7, 3.0, r))
    with pytest.raises(ValueError):
        profile_amplitude("chi", DP, 1.0, 1.0, r)


def test_type2_solution_is_kernel_times_data():
    p2 = UNIT.with_delta(0.0)
    r = np.geomspace(1e-3, 5, 40)
    for t in (0.3, 20.0):
        out = solution_arrays(p2, r, t, (0, 0, 0, 1.0), "TypeII")
        np.testing.assert_allclose(out[Target.U], kernel_radial("G3", DP2, t, r), rtol=1e-10, atol=1e-14)
        np.testing.assert_allclose(out[Target.THETA], kernel_radial("G4", DP2, t, r), rtol=1e-10, atol=1e-14)


def test_special_cases():
    r = np.geomspace(1e-4, 2, 30)
    single = DoubleKernelSpec(1.0, 0.0, 1.0, 1.0, 0.2, 0.0, 0)
    assert np.all(double_kernel(single, 0.0, r) == 0)
    same = DoubleKernelSpec(1.0, 1.0, 1.3, 1.3, 0.2, 0.2, 0)
    assert np.all(double_kernel(same, 3.0, r) == 0)


def test_non_cancelling_singular_limit():
    spec = DoubleKernelSpec(1.0, 2.0, 1.0, 1.0, 0.3, 0.1, 1)
    for r in (1e-6, 1e-8):
        v = double_kernel(spec, 1.0, np.array([r]))[0]
        assert v * r == pytest.approx(-1.0, rel=1e-5)


def test_series_and_direct_agree_in_overlap():
    spec = kernel_spec("G1", DP)
    t = 10.0
    r = np.geomspace(1e-3, 1e-1, 200) / t
    a = double_kernel(spec, t, r, branch="series")
    b = double_kernel(spec, t, r, branch="direct")
    np.testing.assert_allclose(a, b, rtol=1e-8)


def test_swap_symmetry_and_bounds():
    rng = np.random.default_rng(6)
    for _ in range(50):
        l1, l2 = rng.uniform(-2, 2, 2)
        b1, b2 = rng.uniform(0.2, 3, 2)
        c1, c2 = rng.uniform(0, 1, 2)
        sigma = int(rng.integers(0, 2))
        spec = DoubleKernelSpec(l1, l2, b1, b2, c1, c2, sigma)
        r = np.geomspace(1e-4, 10, 100)
        t = float(10 ** rng.uniform(-1, 3))
        v = double_kernel(spec, t, r)
        np.testing.assert_allclose(double_kernel(spec.swapped(), t, r), -v, rtol=1e-12, atol=1e-300)
        bound1 = (abs(l1) / b1 + abs(l2) / b2) * r ** (-1.0 - sigma)
        bound2 = (abs(l1) + abs(l2)) * t * r ** (-float(sigma))
        assert np.all(np.abs(v) <= bound1 * (1 + 1e-12))
        assert np.all(np.abs(v) <= bound2 * (1 + 1e-12))


def test_kernel_ids():
    assert KernelId("G1").angular == Angular.VECTOR
    assert KernelId("G3").angular == Angular.VECTOR
    assert KernelId("G2").angular == Angular.SCALAR
    with pytest.raises(ValueError):
        KernelId("G9")
    with pytest.raises(ValueError):
        KernelId("M")
    spec = DoubleKernelSpec(1, 0, 1, 1)
    assert kernel_spec(KernelId("M", spec), DP) is spec


def test_spec_validation():
    with pytest.raises(ValueError):
        DoubleKernelSpec(1, 1, 0.0, 1)
    with pytest.raises(ValueError):
        DoubleKernelSpec(1, 1, 1, 1, c1=-1)
    with pytest.raises(ValueError):
        DoubleKernelSpec(1, 1, 1, 1, sigma=-1)
    with pytest.raises(ValueError):
        double_kernel(SPECS[0], -1.0, np.array([1.0]))


def test_g1_profile_depends_on_damping():
    dp = derive(ModelParams(2.0, 1.0, 0.5, 0.8))
    r = np.array([0.3])
    assert kernel_radial("G1", dp, 5.0, r)[0] != kernel_radial("G3", dp, 5.0, r)[0]
