import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmsubgrad import (
    ConfigError,
    ExplicitTable,
    GammaDiagnostics,
    PowerInverse,
    SolverConfig,
    SqrtInverse,
    StronglyConvexHarmonic,
    TheoryRegimeWarning,
    config_from_json,
    config_from_keyvalues,
    config_to_json,
    config_to_keyvalues,
    gamma_value,
    gamma_values,
    sequence_diagnostics,
    validate_config,
)
from nmsubgrad.core import IterationRecord, as_point, build_report

from oracles import gamma_ref


# ----- as_point -----


def test_as_point_coerces_lists():
    a = as_point([1, 2, 3])
    assert a.dtype == np.float64
    assert a.flags["C_CONTIGUOUS"]
    np.testing.assert_array_equal(a, [1.0, 2.0, 3.0])


def test_as_point_rejects_matrix_and_nan():
    with pytest.raises(ValueError):
        as_point([[1.0, 2.0]])
    with pytest.raises(ValueError):
        as_point([1.0, math.nan])


# ----- gamma sequences: frozen values -----


def test_sqrt_inverse_quarter():
    assert gamma_value(SqrtInverse(1.0), 4) == 0.5


def test_sqrt_inverse_first_value_is_zeta():
    assert gamma_value(SqrtInverse(2.0), 1) == 2.0


def test_strongly_convex_harmonic_value():
    seq = StronglyConvexHarmonic(sigma=1.0, beta=0.9, big_theta=0.5)
    assert gamma_value(seq, 2) == pytest.approx(2.0 / 0.9, rel=1e-12)
    assert gamma_value(seq, 2) == pytest.approx(2.2222222222, rel=1e-9)


def test_power_inverse_dyadic_value():
    # 16**(1 - 0.25) = 8 exactly
    assert gamma_value(PowerInverse(1.0, 0.5), 16) == pytest.approx(0.125, rel=1e-15)


@given(
    zeta=st.floats(1e-3, 1e3),
    k=st.integers(1, 10_000),
)
def test_sqrt_inverse_matches_reference(zeta, k):
    assert gamma_value(SqrtInverse(zeta), k) == pytest.approx(
        gamma_ref("sqrt_inverse", k, zeta=zeta), rel=1e-12
    )


@given(
    zeta=st.floats(1e-3, 1e3),
    theta=st.floats(0.01, 0.99),
    k=st.integers(1, 10_000),
)
def test_power_inverse_matches_reference(zeta, theta, k):
    assert gamma_value(PowerInverse(zeta, theta), k) == pytest.approx(
        gamma_ref("power_inverse", k, zeta=zeta, theta=theta), rel=1e-12
    )


@given(k=st.integers(1, 1000))
def test_gamma_kinds_positive_nonincreasing(k):
    for seq in (
        SqrtInverse(0.7),
        PowerInverse(2.0, 0.3),
        StronglyConvexHarmonic(2.0, 0.8, 0.4),
    ):
        a, b = gamma_value(seq, k), gamma_value(seq, k + 1)
        assert a > 0.0
        assert b <= a


def test_gamma_value_rejects_k_zero():
    with pytest.raises(ValueError):
        gamma_value(SqrtInverse(), 0)


def test_gamma_values_vector_matches_scalar():
    seq = PowerInverse(1.5, 0.4)
    vec = gamma_values(seq, 50)
    assert vec.shape == (50,)
    for k in (1, 7, 50):
        assert vec[k - 1] == pytest.approx(gamma_value(seq, k), rel=1e-15)


# ----- explicit tables -----


def test_explicit_table_lookup_and_overrun():
    t = ExplicitTable((3.0, 2.0, 1.0))
    assert gamma_value(t, 3) == 1.0
    with pytest.raises(ValueError):
        gamma_value(t, 4)
    with pytest.raises(ValueError):
        gamma_values(t, 4)


def test_explicit_table_rejects_bad_values():
    with pytest.raises(ConfigError):
        ExplicitTable(())
    with pytest.raises(ConfigError):
        ExplicitTable((1.0, 0.0))
    with pytest.raises(ConfigError):
        ExplicitTable((1.0, math.inf))
    with pytest.raises(ConfigError):
        ExplicitTable((1.0, 2.0))  # increasing


def test_gamma_param_validation():
    with pytest.raises(ConfigError):
        SqrtInverse(0.0)
    with pytest.raises(ConfigError):
        PowerInverse(1.0, 1.0)
    with pytest.raises(ConfigError):
        StronglyConvexHarmonic(1.0, 0.9, 0.0)


# ----- sequence diagnostics -----


def test_diagnostics_fields_match_direct_sums():
    seq = SqrtInverse(2.0)
    N = 100
    g = [gamma_ref("sqrt_inverse", k, zeta=2.0) for k in range(1, N + 2)]
    d = sequence_diagnostics(seq, N)
    assert isinstance(d, GammaDiagnostics)
    s5 = sum(v * v for v in g[:N])
    s6 = sum(g[:N])
    assert d.s5 == pytest.approx(s5, rel=1e-12)
    assert d.s6 == pytest.approx(s6, rel=1e-12)
    assert d.r3 == pytest.approx(s5 / sum(g[1 : N + 1]), rel=1e-12)
    assert d.r4 == pytest.approx(s5 / (N * g[N]), rel=1e-12)


def test_sqrt_inverse_ratios_decay():
    seq = SqrtInverse(1.0)
    assert sequence_diagnostics(seq, 10_000).r3 < sequence_diagnostics(seq, 100).r3
    assert sequence_diagnostics(seq, 10_000).r4 < sequence_diagnostics(seq, 100).r4


def test_constant_table_ratio_is_one():
    N = 64
    t = ExplicitTable((1.0,) * (N + 1))
    d = sequence_diagnostics(t, N)
    assert d.r3 == pytest.approx(1.0, rel=1e-15)


def test_sqrt_inverse_partial_sum_lower_bound():
    # sum_{k<=N} 1/sqrt(k) >= 2*(sqrt(N+1) - 1)
    N = 10_000
    d = sequence_diagnostics(SqrtInverse(1.0), N)
    assert d.s6 >= 2.0 * (math.sqrt(N + 1) - 1.0)


def test_diagnostics_rejects_n_zero():
    with pytest.raises(ValueError):
        sequence_diagnostics(SqrtInverse(), 0)


# ----- config validation -----


def test_validate_config_passes_defaults():
    cfg = SolverConfig()
    assert validate_config(cfg) is cfg
    assert cfg.theory_regime


def test_validate_config_rejects_beta_one():
    with pytest.raises(ConfigError, match="beta"):
        validate_config(SolverConfig(beta=1.0))


def test_validate_config_warns_small_rho():
    cfg = SolverConfig(rho=0.4)
    with pytest.warns(TheoryRegimeWarning):
        validate_config(cfg)
    assert not cfg.theory_regime


def test_validate_config_collects_every_violation():
    bad = SolverConfig(c=-1.0, beta=2.0, rho=0.0, alpha1=0.0, max_iters=0)
    with pytest.raises(ConfigError) as err:
        validate_config(bad)
    msg = str(err.value)
    for field in ("c ", "beta", "rho", "alpha1", "max_iters"):
        assert field in msg


# ----- config serialization -----


def test_config_json_has_contracted_keys():
    cfg = SolverConfig(gamma=PowerInverse(0.5, 0.25))
    obj = json.loads(config_to_json(cfg))
    assert set(obj) == {
        "c", "beta", "rho", "alpha1", "gamma.kind", "gamma.zeta", "gamma.theta",
        "max_iters", "backtrack_cap", "seed",
    }
    assert obj["gamma.kind"] == "power_inverse"
    assert obj["gamma.zeta"] == 0.5
    assert obj["gamma.theta"] == 0.25


def test_config_json_roundtrip_all_kinds():
    for gamma in (
        SqrtInverse(0.01),
        PowerInverse(2.0, 0.75),
        StronglyConvexHarmonic(1.0, 0.9, 0.5),
        ExplicitTable((2.0, 1.0, 1.0)),
    ):
        cfg = SolverConfig(c=1.25, beta=0.85, rho=0.7, alpha1=0.3,
                           gamma=gamma, max_iters=17, backtrack_cap=33, seed=5)
        assert config_from_json(config_to_json(cfg)) == cfg


def test_config_keyvalues_roundtrip():
    cfg = SolverConfig(gamma=SqrtInverse(3.0), seed=11)
    text = config_to_keyvalues(cfg)
    assert "gamma.kind = sqrt_inverse" in text
    assert config_from_keyvalues(text) == cfg


@pytest.mark.filterwarnings("ignore::nmsubgrad.core.TheoryRegimeWarning")
@settings(max_examples=60)
@given(
    c=st.floats(1e-3, 1e3),
    beta=st.floats(0.01, 0.99),
    rho=st.floats(0.01, 0.99),
    alpha1=st.floats(1e-6, 1e3),
    zeta=st.floats(1e-6, 1e6),
    max_iters=st.integers(1, 10**6),
    cap=st.integers(1, 10**4),
    seed=st.integers(0, 2**31 - 1),
)
def test_config_roundtrip_property(c, beta, rho, alpha1, zeta, max_iters, cap, seed):
    cfg = SolverConfig(c=c, beta=beta, rho=rho, alpha1=alpha1,
                       gamma=SqrtInverse(zeta), max_iters=max_iters,
                       backtrack_cap=cap, seed=seed)
    assert config_from_json(config_to_json(cfg)) == cfg
    assert config_from_keyvalues(config_to_keyvalues(cfg)) == cfg


def test_config_from_json_rejects_unknown_gamma():
    cfg = SolverConfig()
    obj = json.loads(config_to_json(cfg))
    obj["gamma.kind"] = "geometric"
    with pytest.raises(ConfigError):
        config_from_json(json.dumps(obj))


# ----- run reports -----


def _rec(k, f):
    return IterationRecord(k=k, x=None, f=f, gamma=1.0, alpha=0.1,
                           ell=1, step=0.09, snorm=1.0, alpha_next=0.1)


def test_build_report_best_is_first_minimum():
    rep = build_report([_rec(1, 3.0), _rec(2, 1.0), _rec(3, 1.0), _rec(4, 2.0)],
                       "max_iters")
    assert rep.f_best == 1.0
    assert rep.it_best == 2
    assert rep.n_steps == 4


def test_build_report_requires_records():
    with pytest.raises(ValueError):
        build_report([], "max_iters")
