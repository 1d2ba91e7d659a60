import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import berglab as bl
from berglab.errors import BerglabError, ConfigError
from berglab.weights import (
    CutoffSpec,
    cutoff_derivative_density,
    cutoff_values,
    eval_weight,
    radial_kink_radii,
    ramp_band_radii,
    sup_bound,
    tramp_cutoff_values,
    weight_from_config,
    weight_to_config,
)

PI = math.pi


def test_eval_log_atom_examples():
    w = bl.LogAbsLinear((1.0, 0.0), 3.5)  # (4 - 0.5) ln|z1|
    assert eval_weight(w, np.array([0.5, 0.3])) == pytest.approx(3.5 * math.log(0.5))
    assert eval_weight(w, np.array([0.0, 0.3])) == -math.inf
    wm = bl.WeightMax(bl.LogAbsLinear((1.0,), 1.0), bl.ConstWeight(-1.0))
    assert eval_weight(wm, np.array([0.0])) == -1.0


def test_eval_combinators():
    w = bl.WeightSum(((2.0, bl.ConstWeight(-1.0)), (1.0, bl.SquareNorm(3.0))))
    assert eval_weight(w, np.array([0.5 + 0.0j])) == pytest.approx(-2.0 + 3.0 * 0.25)
    t = bl.truncate(bl.LogAbsLinear((1.0,), 1.0), 1.0)
    assert eval_weight(t, np.array([0.0j])) == -1.0
    s = bl.ShiftWeight(bl.ConstWeight(0.0), -0.25)
    assert eval_weight(s, np.array([0.1j])) == -0.25


def test_constructor_validation():
    with pytest.raises(ConfigError):
        bl.LogAbsLinear((1.0,), -0.5)
    with pytest.raises(ConfigError):
        bl.LogAbsLinear((0.0,), 1.0)
    with pytest.raises(ConfigError):
        bl.WeightSum(((-1.0, bl.ConstWeight(0.0)),))
    with pytest.raises(ConfigError):
        bl.truncate(bl.ConstWeight(0.0), -1.0)


def test_enforce_negative_log_atom(disc):
    w = bl.LogAbsLinear((1.0,), 1.5)
    out = bl.enforce_negative(w, disc)
    # sup = 0 at the boundary: shifted down by the margin only
    assert isinstance(out, bl.ShiftWeight)
    assert out.offset == pytest.approx(-1e-9)
    assert out.certified_negative


def test_enforce_negative_const(disc):
    out = bl.enforce_negative(bl.ConstWeight(2.0), disc)
    assert out.offset == pytest.approx(-(2.0 + 1e-9))


def test_enforce_negative_polydisc_shift(polydisc):
    # sup of |z1 + z2/3| over the unit polydisc is 4/3
    out = bl.enforce_negative(bl.LogAbsLinear((1.0, 1 / 3), 1.0), polydisc)
    assert out.offset == pytest.approx(-(math.log(4 / 3) + 1e-9))


def test_enforce_negative_already_negative(disc):
    w = bl.ConstWeight(-5.0)
    out = bl.enforce_negative(w, disc)
    assert out is not w and out.certified_negative
    assert eval_weight(out, np.array([0.1j])) == -5.0


def test_enforced_weight_nonpositive_on_denser_grid(polydisc):
    out = bl.enforce_negative(bl.LogAbsLinear((1.0, 1 / 3), 1.0), polydisc, sample_n=64)
    # 10x denser check grid never sees a positive value
    m = 64
    th1 = np.arange(10 * m) * (2 * PI / (10 * m))
    z_bd = np.exp(1j * th1)
    grid = np.stack([np.repeat(z_bd, 32), np.tile(z_bd[::20][:32], len(z_bd))], axis=1)
    assert float(out.evaluate(grid).max()) <= 0.0


def test_sup_bound_ball():
    ball = bl.build_domain("ball", (1.0,))
    # sup |z1 + i z2| over the unit ball is sqrt(2) (Cauchy-Schwarz, attained)
    w = bl.LogAbsLinear((1.0, 1j), 1.0)
    assert sup_bound(w, ball) == pytest.approx(0.5 * math.log(2.0))


def test_l1_distance_examples(disc, refined_disc_rule):
    phi = bl.LogAbsLinear((1.0,), 1.0)
    assert bl.l1_distance(phi, phi, refined_disc_rule) == 0.0
    minus_c = bl.ShiftWeight(phi, -0.7)
    assert bl.l1_distance(phi, minus_c, refined_disc_rule) == pytest.approx(0.7 * PI, rel=1e-12)
    # int of eta |ln r| over the disc = eta pi/2
    psi = bl.LogAbsLinear((1.0,), 1.25)
    assert bl.l1_distance(phi, psi, refined_disc_rule) == pytest.approx(0.25 * PI / 2, rel=1e-12)


def test_l1_distance_pseudometric(refined_disc_rule):
    a = bl.LogAbsLinear((1.0,), 0.5)
    b = bl.truncate(bl.LogAbsLinear((1.0,), 1.2), 3)
    c = bl.ConstWeight(-0.4)
    dab = bl.l1_distance(a, b, refined_disc_rule)
    dba = bl.l1_distance(b, a, refined_disc_rule)
    assert dab == pytest.approx(dba, rel=1e-15)
    dac = bl.l1_distance(a, c, refined_disc_rule)
    dcb = bl.l1_distance(c, b, refined_disc_rule)
    assert dab <= dac + dcb + 1e-12 * (1 + dab)


def test_truncate_examples():
    w = bl.LogAbsLinear((1.0,), 1.0)
    t1 = bl.truncate(w, 1)
    assert eval_weight(t1, np.array([0.0j])) == -1.0
    # where w >= -j truncation changes nothing
    assert eval_weight(bl.truncate(w, 2), np.array([0.9 + 0j])) == eval_weight(
        w, np.array([0.9 + 0j])
    )
    # pointwise contraction instance: phi=-5, psi=-1, j=3
    assert abs(max(-5, -3) - max(-1, -3)) == 2 <= abs(-5 - (-1))


@given(
    j1=st.floats(0.5, 6),
    j2=st.floats(0.5, 6),
    scale=st.floats(0.1, 3),
    r=st.floats(1e-6, 0.999),
)
@settings(max_examples=60, deadline=None)
def test_truncation_monotone_and_contracting(j1, j2, scale, r):
    lo, hi = min(j1, j2), max(j1, j2)
    w = bl.LogAbsLinear((1.0,), scale)
    z = np.array([r + 0j])
    v = eval_weight(w, z)
    v_lo = eval_weight(bl.truncate(w, lo), z)
    v_hi = eval_weight(bl.truncate(w, hi), z)
    assert v_lo >= v_hi >= v
    # contraction against a second weight
    u = bl.ConstWeight(-1.3)
    for j in (lo, hi):
        a = eval_weight(bl.truncate(w, j), z) - eval_weight(bl.truncate(u, j), z)
        assert abs(a) <= abs(v - (-1.3)) + 1e-12


def test_cutoff_spec_validation():
    phi = bl.ConstWeight(-1.0)
    with pytest.raises(ConfigError):
        CutoffSpec(phi=phi, psi=phi, epsilon=0.0)
    with pytest.raises(ConfigError):
        CutoffSpec(phi=phi, psi=phi, epsilon=0.5, smoothing=0.6)
    with pytest.raises(ConfigError):
        CutoffSpec(phi=phi, psi=phi, epsilon=0.5, smoothing=-0.1)


def test_cutoff_examples(disc):
    phi = bl.LogAbsLinear((1.0,), 2.0)
    same = CutoffSpec(phi=phi, psi=phi, epsilon=0.3)
    Z = np.array([[0.1 + 0.2j], [0.8j], [0.99 + 0j]])
    assert np.all(cutoff_values(same, Z) == 1.0)
    # phi = 2 ln|z|, psi = 3 ln|z|: cutoff is 1 iff |z| >= e^-0.1
    spec = CutoffSpec(phi=phi, psi=bl.LogAbsLinear((1.0,), 3.0), epsilon=0.1)
    r0 = math.exp(-0.1)
    inside = np.array([[(r0 - 1e-6) + 0j]])
    outside = np.array([[(r0 + 1e-6) + 0j]])
    assert cutoff_values(spec, inside)[0] == 0.0
    assert cutoff_values(spec, outside)[0] == 1.0
    # midpoint of the ramp
    smooth = CutoffSpec(phi=phi, psi=bl.LogAbsLinear((1.0,), 3.0), epsilon=0.1, smoothing=0.04)
    r_mid = math.exp(-(0.1 - 0.02))  # phi - psi = eps - s/2 there
    assert cutoff_values(smooth, np.array([[r_mid + 0j]]))[0] == pytest.approx(0.5, abs=1e-9)


def test_cutoff_neginf_conventions():
    phi = bl.LogAbsLinear((1.0, 0.0), 1.0)  # -inf on z1 = 0
    psi = bl.LogAbsLinear((0.0, 1.0), 1.0)  # -inf on z2 = 0
    spec = CutoffSpec(phi=phi, psi=psi, epsilon=0.5)
    both = np.array([[0.0, 0.0]])  # both -inf -> 1
    phi_only = np.array([[0.0, 0.5]])  # phi -inf -> 1
    psi_only = np.array([[0.5, 0.0]])  # psi -inf, phi finite -> 0
    assert cutoff_values(spec, both)[0] == 1.0
    assert cutoff_values(spec, phi_only)[0] == 1.0
    assert cutoff_values(spec, psi_only)[0] == 0.0
    smooth = CutoffSpec(phi=phi, psi=psi, epsilon=0.5, smoothing=0.2)
    assert cutoff_values(smooth, both)[0] == 1.0
    assert cutoff_values(smooth, phi_only)[0] == 1.0
    assert cutoff_values(smooth, psi_only)[0] == 0.0


@given(r=st.floats(1e-4, 0.999), eps=st.floats(0.05, 1.0), frac=st.floats(0.05, 0.95))
@settings(max_examples=60, deadline=None)
def test_cutoff_range_and_band_agreement(r, eps, frac):
    phi = bl.LogAbsLinear((1.0,), 1.4)
    psi = bl.LogAbsLinear((1.0,), 2.1)
    s = frac * eps
    sharp = CutoffSpec(phi=phi, psi=psi, epsilon=eps)
    smooth = CutoffSpec(phi=phi, psi=psi, epsilon=eps, smoothing=s)
    z = np.array([r + 0j])
    cv_sharp = cutoff_values(sharp, z)[0]
    cv_smooth = cutoff_values(smooth, z)[0]
    assert cv_sharp in (0.0, 1.0)
    assert 0.0 <= cv_smooth <= 1.0
    diff = eval_weight(phi, z) - eval_weight(psi, z)
    if not (eps - s < diff <= eps):
        assert cv_smooth == cv_sharp


def test_derivative_density_zero_cases(disc, bounded_pair):
    phi, psi = bounded_pair
    f = bl.poly_coordinate(0)
    spec = CutoffSpec(phi=phi, psi=psi, epsilon=0.6, smoothing=0.2)
    # far outside the ramp band
    H = cutoff_derivative_density(spec, f, np.array([[0.95 + 0j]]))
    assert H[0] == 0.0
    zero = bl.HoloPoly.from_dict({}, 1)
    Hz = cutoff_derivative_density(spec, zero, np.array([[0.3 + 0j]]))
    assert Hz[0] == 0.0
    # huge epsilon: the cutoff never drops, H vanishes identically
    big = CutoffSpec(phi=phi, psi=psi, epsilon=50.0, smoothing=1.0)
    Hb = cutoff_derivative_density(big, f, np.array([[0.3 + 0j], [0.9 + 0j]]))
    assert np.all(Hb == 0.0)


def test_derivative_density_finite_difference_oracle(disc, bounded_pair):
    phi, psi = bounded_pair
    f = bl.poly_coordinate(0)
    spec = CutoffSpec(phi=phi, psi=psi, epsilon=0.6, smoothing=0.3)
    radii = (0.25, 0.3, 0.35)
    H = cutoff_derivative_density(spec, f, np.array([[r + 0j] for r in radii]))

    def chi(r):
        return float(tramp_cutoff_values(spec, np.array([[r + 0j]]))[0])

    def t(r):
        return math.log(-eval_weight(psi, np.array([r + 0j])))

    h = 1e-6
    for i, r in enumerate(radii):
        dchi_dt = (chi(r + h) - chi(r - h)) / (t(r + h) - t(r - h))
        expected = r ** 2 * dchi_dt ** 2
        assert H[i] == pytest.approx(expected, rel=1e-4)


def test_derivative_density_requires_negative_psi(disc):
    spec = CutoffSpec(
        phi=bl.ConstWeight(-1.0), psi=bl.ConstWeight(0.5), epsilon=0.5, smoothing=0.1
    )
    with pytest.raises(BerglabError):
        cutoff_derivative_density(spec, bl.poly_const(1.0), np.array([[0.3 + 0j]]))


def test_tramp_cutoff_no_reopening(bounded_pair):
    # the plain ramp re-opens to 1 deep inside truncated pairs; the t-ramp
    # variant stays 0 there
    phi, psi = bounded_pair
    spec = CutoffSpec(phi=phi, psi=psi, epsilon=0.3, smoothing=0.1)
    deep = np.array([[1e-4 + 0j]])
    assert cutoff_values(spec, deep)[0] == 1.0
    assert tramp_cutoff_values(spec, deep)[0] == 0.0
    band = ramp_band_radii(spec)
    assert band is not None and 0 < band[0] < band[1] < 1


def test_radial_kink_radii(bounded_pair):
    phi, _ = bounded_pair
    # max(1.5 ln r, -5) has its kink at e^(-5/1.5)
    radii = radial_kink_radii(phi, 1.0)
    assert any(abs(r - math.exp(-5 / 1.5)) < 1e-12 for r in radii)


# --- serialization round trip ----------------------------------------------

def weight_strategy():
    atom = st.one_of(
        st.builds(
            bl.LogAbsLinear,
            coeffs=st.tuples(st.complex_numbers(min_magnitude=0.1, max_magnitude=2.0)),
            scale=st.floats(0.0, 3.0),
        ),
        st.builds(bl.ConstWeight, value=st.floats(-5.0, 5.0)),
        st.builds(bl.SquareNorm, scale=st.floats(0.0, 2.0)),
    )

    def extend(children):
        return st.one_of(
            st.builds(
                bl.WeightSum,
                terms=st.lists(
                    st.tuples(st.floats(0.0, 2.0), children), min_size=1, max_size=3
                ).map(tuple),
            ),
            st.builds(bl.WeightMax, left=children, right=children),
            st.builds(bl.TruncateBelow, child=children, floor=st.floats(-8.0, -0.5)),
            st.builds(bl.ShiftWeight, child=children, offset=st.floats(-2.0, 2.0)),
        )

    return st.recursive(atom, extend, max_leaves=6)


@given(w=weight_strategy(), r=st.floats(1e-3, 0.99), theta=st.floats(0, 2 * math.pi))
@settings(max_examples=80, deadline=None)
def test_weight_config_round_trip(w, r, theta):
    back = weight_from_config(weight_to_config(w))
    z = np.array([r * np.exp(1j * theta)])
    a = eval_weight(w, z)
    b = eval_weight(back, z)
    assert a == b or (math.isinf(a) and math.isinf(b))


def test_weight_config_rejects_unknown():
    with pytest.raises(ConfigError):
        weight_from_config({"op": "exp", "scale": 1.0})
    with pytest.raises(ConfigError):
        weight_from_config([1, 2, 3])
