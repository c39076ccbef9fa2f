import warnings

import numpy as np
import pytest

from kleinstep.core import EnergyZone, InputError, PhysParams
from kleinstep.scatter import Family
from kleinstep.wavepacket import (
    GridTooNarrow,
    ZoneStraddle,
    asymptotic_time,
    build_gaussian,
    evolve,
    reflection_and_penetration,
    spectral_transmission,
    suggest_x_grid,
    trapezoid_weights,
)

P = PhysParams(1.0, 4.0)


def _norm(x, field):
    return float(np.trapezoid(np.sum(np.abs(field) ** 2, axis=0), x))


def test_trapezoid_weights_integrate_linear():
    x = np.linspace(0.0, 2.0, 11)
    assert np.sum(trapezoid_weights(x) * (3 * x + 1)) == pytest.approx(8.0, abs=1e-14)


@pytest.mark.parametrize("E0,zone", [(2.0, EnergyZone.KLEIN), (3.5, EnergyZone.EVANESCENT),
                                      (6.0, EnergyZone.OVER_BARRIER)])
def test_gaussian_spectrum(E0, zone):
    with warnings.catch_warnings():
        warnings.simplefilter("error", ZoneStraddle)
        g = build_gaussian(P, E0, 0.1)
    assert g.norm == pytest.approx(1.0, abs=1e-10)
    assert set(g.zones) == {zone}
    assert g.zone_fractions()[str(zone)] == pytest.approx(1.0)


def test_straddle_warns_and_truncates():
    with pytest.warns(ZoneStraddle):
        g = build_gaussian(P, 3.0, 0.2)
    assert g.straddle
    assert g.norm == pytest.approx(1.0, abs=1e-10)
    fr = g.zone_fractions()
    assert fr["Klein"] > 0.3 and fr["Evanescent"] > 0.3


@pytest.mark.parametrize("kw", [dict(sigma_E=0.0), dict(n_samples=8), dict(x0=5.0)])
def test_gaussian_rejects_bad_input(kw):
    args = dict(params=P, E0=2.0, sigma_E=0.1)
    args.update(kw)
    with pytest.raises(InputError):
        build_gaussian(**args)


def test_initial_norm_matches_spectral_norm():
    g = build_gaussian(P, 2.0, 0.1)
    x = suggest_x_grid(g, 0.0)
    st = evolve(g, 0.0, x)
    assert _norm(x, st.incident) == pytest.approx(1.0, abs=1e-3)
    d = reflection_and_penetration(st)
    assert d.left_norm == pytest.approx(1.0, abs=1e-3)


@pytest.fixture(scope="module")
def klein_run():
    g = build_gaussian(P, 2.0, 0.1)
    T = asymptotic_time(g)
    x = suggest_x_grid(g, T)
    return g, T, x


def test_klein_packet_reflects(klein_run):
    g, T, x = klein_run
    d = reflection_and_penetration(evolve(g, T, x))
    assert d.pen_prob < 1e-3
    assert d.refl_norm > 1 - 1e-3


def test_traditional_packet_shows_partial_reflection(klein_run):
    g, T, x = klein_run
    d = reflection_and_penetration(evolve(g, T, x, Family.TRADITIONAL))
    assert 0.2 < d.refl_norm < 0.3
    assert d.trans_norm == pytest.approx(1 - d.refl_norm, abs=1e-3)


def test_full_field_norm_conserved(klein_run):
    g, T, x = klein_run
    norms = [_norm(x, evolve(g, t, x).full) for t in (0.0, T / 2, T)]
    assert max(norms) - min(norms) < 1e-3


def test_evanescent_packet_penetrates_then_reflects():
    g = build_gaussian(P, 3.5, 0.1)
    T = asymptotic_time(g)
    x = suggest_x_grid(g, T)
    pens, last = [], None
    for t in np.linspace(0, T, 9):
        last = reflection_and_penetration(evolve(g, t, x))
        pens.append(last.pen_prob)
    assert max(pens) > 1e-2
    assert last.refl_norm > 1 - 1e-3


def test_over_barrier_transmission_matches_spectrum():
    g = build_gaussian(P, 6.0, 0.1)
    T = asymptotic_time(g)
    x = suggest_x_grid(g, T)
    d = reflection_and_penetration(evolve(g, T, x))
    assert d.trans_norm == pytest.approx(spectral_transmission(g), abs=1e-3)
    assert d.refl_norm + d.trans_norm == pytest.approx(1.0, abs=1e-3)


def test_superposition_is_linear():
    g = build_gaussian(P, 2.0, 0.1)
    h = build_gaussian(P, 2.0, 0.1, x0=-30.0)
    x = np.linspace(-60, 20, 801)
    a, b = 0.7 - 0.2j, 1.3
    lhs = evolve(a * g + b * h, 10.0, x, check_grid=False).full
    rhs = a * evolve(g, 10.0, x, check_grid=False).full + b * evolve(h, 10.0, x, check_grid=False).full
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_narrow_grid_detected():
    g = build_gaussian(P, 2.0, 0.1)
    with pytest.raises(GridTooNarrow):
        evolve(g, 0.0, np.linspace(-20, 20, 401))


def test_virtual_family_rejected():
    g = build_gaussian(P, 2.0, 0.1)
    with pytest.raises(InputError):
        evolve(g, 0.0, np.linspace(-100, 50, 100), Family.VIRTUAL)


def test_density_vanishes_only_in_image_region(klein_run):
    g, T, x = klein_run
    st = evolve(g, T, x)
    assert np.all(st.density[x >= 0] == 0.0)
    assert np.any(np.abs(st.virtual[:, x >= 0]) > 0)
