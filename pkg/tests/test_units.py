import numpy as np
import pytest

from voltacell import units
from voltacell.units import Dim, ScaleSet


def test_identity_scales_are_si():
    s = ScaleSet.identity()
    for dim in (units.VOLT, units.STRESS, units.CONDUCTIVITY,
                units.DIFFUSIVITY, units.GAS_CONSTANT, units.FARADAY):
        assert s.factor(dim) == 1.0
    assert s.k_bv_factor() == 1.0


def test_default_length_scale():
    s = ScaleSet()
    assert s.to_internal(30e-6, units.LENGTH) == pytest.approx(0.3, rel=1e-15)
    assert s.to_internal(60.0, units.TIME) == pytest.approx(1.0, rel=1e-15)


def test_round_trip_identity():
    s = ScaleSet()
    rng = np.random.default_rng(3)
    dims = [units.VOLT, units.STRESS, units.CONDUCTIVITY, units.DIFFUSIVITY,
            units.VOL_HEAT_CAPACITY, units.THERMAL_CONDUCTIVITY,
            units.CONCENTRATION, units.CURRENT_DENSITY, units.MOLAR_VOLUME,
            units.GAS_CONSTANT, units.FARADAY, units.DIFF_CONDUCTIVITY]
    for dim in dims:
        for value in 10.0 ** rng.uniform(-14, 9, size=8):
            back = s.to_si(s.to_internal(value, dim), dim)
            assert back == pytest.approx(value, rel=1e-12)


def test_dim_algebra():
    ohm_m = units.VOLT / Dim(m=1) / units.CURRENT_DENSITY
    assert ohm_m == Dim(kg=1, m=3, s=-3, A=-2)
    assert units.CONDUCTIVITY * ohm_m == Dim()


def test_positive_scales_required():
    with pytest.raises(ValueError):
        ScaleSet(length=-1.0)
    with pytest.raises(ValueError):
        ScaleSet(time=0.0)


def test_material_round_trip(mats_si, scales):
    scaled = mats_si.scaled(scales)
    assert scaled.anode.diffusivity0 * scales.factor(units.DIFFUSIVITY) \
        == pytest.approx(mats_si.anode.diffusivity0, rel=1e-12)
    assert scaled.faraday * scales.factor(units.FARADAY) \
        == pytest.approx(mats_si.faraday, rel=1e-12)
    assert scaled.pi_max * scales.factor(units.STRESS) \
        == pytest.approx(mats_si.pi_max, rel=1e-12)
    # dimensionless groups are invariant under the unit change
    arg_si = mats_si.faraday * 0.05 / (2 * mats_si.gas_constant * 298.15)
    eta = scales.to_internal(0.05, units.VOLT)
    theta = scales.to_internal(298.15, units.TEMPERATURE)
    arg_scaled = scaled.faraday * eta / (2 * scaled.gas_constant * theta)
    assert arg_scaled == pytest.approx(arg_si, rel=1e-12)
    # scaled OCP returns scaled volts
    assert scaled.anode.ocp(0.5) * scales.factor(units.VOLT) \
        == pytest.approx(mats_si.anode.ocp(0.5), rel=1e-12)
