import math
from dataclasses import replace

import numpy as np
import pytest

import berglab as bl
from berglab.bounds import (
    TheoremConfig,
    blocki_check,
    compact_sup_sq,
    pair_rule,
    run_sweep,
    run_theorem_pair,
    run_truncation,
    unweighted_pairing_identity,
    weighted_mass,
)
from berglab.errors import ConfigError, DivergenceError
from berglab.projection import eval_poly_values
from berglab.quadrature import build_shell_rule, weighted_sum

PI = math.pi


def std_config(disc, bounded_pair, **kw):
    phi, psi = bounded_pair
    base = dict(domain=disc, phi=phi, psi=psi, f=bl.poly_coordinate(0), degree=12)
    base.update(kw)
    return TheoremConfig(**base)


def test_weighted_mass_flat(disc, disc_rule):
    f = bl.poly_coordinate(0)
    assert weighted_mass(f, bl.ConstWeight(0.0), disc_rule) == pytest.approx(PI / 2)


def test_weighted_mass_log_weight(disc, refined_disc_rule):
    f = bl.poly_coordinate(0)
    phi = bl.LogAbsLinear((1.0,), 1.5)
    assert weighted_mass(f, phi, refined_disc_rule) == pytest.approx(0.8 * PI, rel=1e-9)


def test_weighted_mass_polydisc_tensor(polydisc):
    # f = z1, phi = (4 - 1/2) ln|z1| on the unit polydisc: 4 pi * pi
    rule = build_shell_rule(polydisc, 0, k_max=20, other_radial_n=16)
    f = bl.poly_coordinate(0, dim=2)
    phi = bl.LogAbsLinear((1.0, 0.0), 3.5)
    assert weighted_mass(f, phi, rule, k_max=16) == pytest.approx(4 * PI ** 2, rel=1e-8)


def test_weighted_mass_divergent(disc, refined_disc_rule):
    f = bl.poly_const(1.0)
    phi = bl.LogAbsLinear((1.0,), 2.5)
    with pytest.raises(DivergenceError):
        weighted_mass(f, phi, refined_disc_rule)


def test_pair_requires_flags_and_boundedness(disc, bounded_pair):
    phi, psi = bounded_pair
    raw = bl.LogAbsLinear((1.0,), 1.5)
    with pytest.raises(ConfigError):
        run_theorem_pair(TheoremConfig(domain=disc, phi=raw, psi=psi, f=bl.poly_const(1.0), degree=8))
    neg_unbounded = bl.enforce_negative(raw, disc)
    with pytest.raises(ConfigError):
        run_theorem_pair(
            TheoremConfig(domain=disc, phi=neg_unbounded, psi=psi, f=bl.poly_const(1.0), degree=8)
        )
    with pytest.raises(ConfigError):
        run_theorem_pair(
            TheoremConfig(domain=disc, phi=phi, psi=psi, f=bl.poly_coordinate(0, power=9), degree=8)
        )


def test_pair_trivial_same_weight(disc, bounded_pair):
    phi, _ = bounded_pair
    cfg = TheoremConfig(domain=disc, phi=phi, psi=phi, f=bl.poly_coordinate(0), degree=10, epsilon=0.3)
    rep = run_theorem_pair(cfg)
    assert rep.hypothesis_ok
    assert rep.delta <= 1e-8
    assert rep.all_bounds_ok and rep.verdict_five
    got = rep.g.as_dict().get((1,), 0j)
    assert got == pytest.approx(1.0, abs=1e-8)


def test_pair_standard_example(disc, bounded_pair):
    cfg = std_config(disc, bounded_pair)
    rep = run_theorem_pair(cfg)
    assert rep.hypothesis_ok
    assert rep.all_bounds_ok and rep.verdict_five
    assert rep.ortho_residual <= 1e-8 * rep.chi_f_norm
    # cross-check against an independent double-resolution quadrature
    fine = replace(cfg, radial_n=2 * cfg.radial_n, angular_n=64, levels=cfg.levels + 8)
    rep2 = run_theorem_pair(fine)
    assert rep2.M == pytest.approx(rep.M, rel=1e-3)
    assert rep2.l1 == pytest.approx(rep.l1, rel=1e-3)
    assert rep2.norm_g_psi_sq == pytest.approx(rep.norm_g_psi_sq, rel=1e-3)
    assert rep2.delta == pytest.approx(rep.delta, rel=1e-3)


def test_pair_constant_shift_identity(disc, bounded_pair):
    phi, _ = bounded_pair
    c = 0.2
    psi = replace(bl.ShiftWeight(phi, -c), negative=True)
    cfg = TheoremConfig(domain=disc, phi=phi, psi=psi, f=bl.poly_coordinate(0), degree=10)
    rep = run_theorem_pair(cfg)
    assert rep.delta <= 1e-6
    # same space, rescaled metric: int |g|^2 e^-psi = e^c int |g|^2 e^-phi
    rule = pair_rule(cfg, epsilon=rep.epsilon)
    gv = eval_poly_values(rep.g, rule.nodes)
    phi_v = phi.evaluate(rule.nodes)
    lhs = float(weighted_sum(rule, np.abs(gv) ** 2 * np.exp(-phi_v + c)))
    assert rep.norm_g_psi_sq == pytest.approx(lhs, rel=1e-8)


def test_unweighted_pairing_identity(disc, bounded_pair):
    cfg = std_config(disc, bounded_pair, epsilon=0.5)
    lhs, rhs, f_mass = unweighted_pairing_identity(cfg)
    assert abs(lhs - rhs) <= cfg.indicator_slack * f_mass
    # for the projection taken in the unweighted space this is exact
    assert abs(lhs - rhs) <= 1e-10 * f_mass


def test_compact_sup_sq(disc):
    f2 = bl.poly_coordinate(0, power=2)
    assert compact_sup_sq(f2, disc) == pytest.approx(0.9 ** 4, rel=1e-12)
    one = bl.poly_const(1.0)
    assert compact_sup_sq(one, disc) == pytest.approx(1.0)


def test_truncation_ladder(disc):
    phi = bl.enforce_negative(bl.LogAbsLinear((1.0,), 1.5), disc)
    psi = bl.enforce_negative(bl.LogAbsLinear((1.0,), 1.9), disc)
    cfg = TheoremConfig(
        domain=disc, phi=phi, psi=psi, f=bl.poly_coordinate(0), degree=12, epsilon=0.2, levels=40
    )
    rep = run_truncation(cfg, [1, 2, 4, 8])
    assert rep.M == pytest.approx(0.8 * PI, rel=1e-8)
    assert rep.l1_full == pytest.approx(0.4 * PI / 2, rel=1e-10)
    assert rep.monotone_ok
    assert all(r.verdict_eM for r in rep.rows)
    assert all(r.contraction_ok for r in rep.rows)
    cauchy = [r.coeff_cauchy for r in rep.rows[1:]]
    assert all(b < a for a, b in zip(cauchy, cauchy[1:]))


def test_truncation_validation(disc, bounded_pair):
    cfg = std_config(disc, bounded_pair)
    with pytest.raises(ConfigError):
        run_truncation(cfg, [1, 2])
    with pytest.raises(ConfigError):
        run_truncation(cfg, [4, 2, 1])


def test_sweep_zero_eta_floor(disc):
    phi = bl.enforce_negative(bl.ConstWeight(0.0), disc)
    atom = bl.truncate(bl.LogAbsLinear((1.0,), 1.0), 12)
    cfg = TheoremConfig(domain=disc, phi=phi, psi=phi, f=bl.poly_coordinate(0), degree=10, levels=24)
    rep = run_sweep(cfg, atom, [0.4, 0.2, 0.1], epsilon_rule="sqrt")
    assert rep.floor_delta <= 1e-8
    assert rep.row_bounds_ok
    for r in rep.rows:
        assert r.delta <= math.sqrt(r.bound_C * (1 + cfg.slack))
    # rows sorted by epsilon descending
    eps = [r.epsilon for r in rep.rows]
    assert eps == sorted(eps, reverse=True)
    assert rep.rows[0].l1 == pytest.approx(0.4 * PI / 2, rel=1e-6)


def test_sweep_rejects_unbounded_atom(disc, bounded_pair):
    cfg = std_config(disc, bounded_pair)
    with pytest.raises(ConfigError):
        run_sweep(cfg, bl.LogAbsLinear((1.0,), 1.0), [0.1], epsilon_rule="sqrt")
    with pytest.raises(ConfigError):
        run_sweep(cfg, bl.truncate(bl.LogAbsLinear((1.0,), 1.0), 5), [0.1], epsilon_rule="cubic")


def test_blocki_degenerate_cutoff(disc, bounded_pair):
    phi, psi = bounded_pair
    cfg = TheoremConfig(
        domain=disc, phi=phi, psi=psi, f=bl.poly_coordinate(0), degree=10,
        epsilon=50.0, smoothing=1.0,
    )
    res = blocki_check(cfg)
    assert res.rhs == 0.0 and res.lhs <= 1e-12
    assert res.verdict and res.ratio == 0.0


def test_blocki_bounded_config(disc, bounded_pair):
    phi, psi = bounded_pair
    probe = TheoremConfig(domain=disc, phi=phi, psi=psi, f=bl.poly_coordinate(0), degree=10)
    eps = run_theorem_pair(probe).epsilon
    cfg = replace(probe, epsilon=eps, smoothing=eps / 2)
    res = blocki_check(cfg)
    assert 0.0 <= res.ratio <= 1.0
    assert res.verdict
    assert res.band_nodes > 0


def test_blocki_requires_smoothing(disc, bounded_pair):
    cfg = std_config(disc, bounded_pair)
    with pytest.raises(ConfigError):
        blocki_check(cfg)
