import math

import pytest

from tracerecon.params import derive_params, icbrt_ceil, parse_overrides


def test_desk_constants():
    p = derive_params(10**5, delta=1e-5)
    assert (p.m, p.M, p.sigma) == (47, 95, 17)
    assert p.N == 101 and p.N % 2 == 1
    assert p.C == 12 and p.alpha == 10
    assert p.gamma == math.ceil(8 * 17**2 * math.log2(10**5))
    assert p.warnings == ()
    assert all(v == "derived" for v in p.provenance.values())


def test_epsilon_to_delta():
    p = derive_params(10**6, epsilon=0.1)
    assert p.delta == pytest.approx(10 ** (6 * (-13 / 30)))
    assert p.delta == pytest.approx(2.51e-3, rel=1e-3)


def test_override_provenance():
    p = derive_params(10**5, delta=1e-5, overrides={"m": 60})
    assert p.m == 60 and p.M == 121
    assert p.provenance["m"] == "override"
    assert p.provenance["sigma"] == "derived"


def test_gamma_follows_overridden_sigma():
    p = derive_params(10**5, delta=1e-5, overrides={"sigma": 10})
    assert p.gamma == math.ceil(8 * 100 * math.log2(10**5))


def test_validation():
    with pytest.raises(ValueError):
        derive_params(4, delta=0.1)
    with pytest.raises(ValueError):
        derive_params(1000, delta=1.0)
    with pytest.raises(ValueError):
        derive_params(1000, delta=-0.1)
    with pytest.raises(ValueError):
        derive_params(1000)
    with pytest.raises(ValueError):
        derive_params(1000, delta=0.1, epsilon=0.1)
    with pytest.raises(ValueError):
        derive_params(1000, delta=0.1, overrides={"q": 1})


def test_regime_warnings():
    p = derive_params(10**4, delta=0.01)
    assert any("sigma" in w for w in p.warnings)
    assert any("M*delta" in w for w in p.warnings)


def test_zero_delta_is_noiseless():
    p = derive_params(1000, delta=0.0)
    assert p.sigma == 1 and p.epsilon == math.inf


@pytest.mark.parametrize("n", [1, 7, 8, 9, 26, 27, 28, 10**5, 10**6, 10**6 + 1, 999_999_999])
def test_icbrt_ceil(n):
    m = icbrt_ceil(n)
    assert m**3 >= n and (m - 1) ** 3 < n


def test_parse_overrides():
    assert parse_overrides(["m=60", "N=31"]) == {"m": 60, "N": 31}
    with pytest.raises(ValueError):
        parse_overrides(["m60"])
    with pytest.raises(ValueError):
        parse_overrides(["zz=1"])
