import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import stats

from embedcal import likelihood as lk
from embedcal.likelihood import MomentSummary

GAMMA = math.sqrt(math.pi / 2)


def abc_oracle(mu, sigma, y, s_n, eps, gamma=GAMMA):
    # product of the two Gaussian factors per output, renormalised with a
    # single 2*pi per output as the ABC likelihood is conventionally written
    total = 0.5 * len(mu) * math.log(2 * math.pi)
    for m, s, yy in zip(mu, sigma, y):
        total += stats.norm(yy, s_n).logpdf(m)
        total += stats.norm(gamma * abs(m - yy), eps).logpdf(s + s_n)
    return total


def in_oracle(mu, sigma, y, s_n):
    return sum(stats.norm(m, math.sqrt(s * s + s_n * s_n)).logpdf(yy) for m, s, yy in zip(mu, sigma, y))


def gmm_oracle(u, var_f):
    n = len(u)
    s2 = np.sum(np.asarray(u) ** 2) / (n - 1)
    l1 = stats.norm(0.0, math.sqrt(var_f / n)).logpdf(np.mean(u))
    l2 = stats.chi2(n - 1).logpdf(n * s2 / var_f)
    return l1, l2


arrays = st.integers(2, 12).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(-5, 5), min_size=n, max_size=n),
        st.lists(st.floats(0, 3), min_size=n, max_size=n),
        st.lists(st.floats(-5, 5), min_size=n, max_size=n),
    )
)


@settings(max_examples=60)
@given(arrays, st.floats(0.01, 2), st.floats(0.01, 1))
def test_abc_matches_gaussian_product(data, s_n, eps):
    mu, sigma, y = data
    ms = MomentSummary(mu, sigma, s_n)
    assert lk.log_abc(ms, y, eps) == pytest.approx(abc_oracle(mu, sigma, y, s_n, eps), rel=1e-9, abs=1e-9)


@settings(max_examples=60)
@given(arrays, st.floats(0.01, 2))
def test_in_matches_scipy(data, s_n):
    mu, sigma, y = data
    ms = MomentSummary(mu, sigma, s_n)
    assert lk.log_in(ms, y) == pytest.approx(in_oracle(mu, sigma, y, s_n), rel=1e-10, abs=1e-9)


def test_gmm_terms_match_oracle_on_random_inputs():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(3, 40))
        mu, sigma, y = rng.normal(size=n), rng.uniform(0, 2, n), rng.normal(size=n)
        s_n = float(rng.uniform(0.05, 1))
        ms = MomentSummary(mu, sigma, s_n)
        st_ = lk.residual_stats(ms, y)
        var_f = np.mean(sigma**2) + s_n**2
        l1, l2 = lk.gmm_terms(st_, n)
        o1, o2 = gmm_oracle(y - mu, var_f)
        assert l1 == pytest.approx(o1, rel=1e-10, abs=1e-10)
        assert l2 == pytest.approx(o2, rel=1e-10, abs=1e-10)
        ur = (y - mu) / np.sqrt(sigma**2 + s_n**2)
        r1, r2 = lk.gmm_terms(st_, n, relative=True)
        o1, o2 = gmm_oracle(ur, 1.0)
        assert r1 == pytest.approx(o1, rel=1e-10, abs=1e-10)
        assert r2 == pytest.approx(o2, rel=1e-10, abs=1e-10)
        assert lk.log_gmm(st_, n) == pytest.approx(l1 + l2, rel=1e-12)


@settings(max_examples=50)
@given(st.integers(2, 30), st.floats(0, 2), st.floats(0.01, 1), st.integers(0, 2**31))
def test_homoscedastic_rgmm_is_rescaled_gmm(n, s_h, s_n, seed):
    rng = np.random.default_rng(seed)
    mu, y = rng.normal(size=n), rng.normal(size=n)
    ms = MomentSummary(mu, np.full(n, s_h), s_n)
    st_ = lk.residual_stats(ms, y)
    var_f = s_h**2 + s_n**2
    g1, g2 = lk.gmm_terms(st_, n)
    r1, r2 = lk.gmm_terms(st_, n, relative=True)
    # standardising by a common sigma_F only changes the normal term by its Jacobian
    assert r2 == pytest.approx(g2, rel=1e-10, abs=1e-10)
    assert r1 == pytest.approx(g1 + 0.5 * math.log(var_f), rel=1e-10, abs=1e-10)


def test_center_variance_flag():
    ms = MomentSummary([0.0, 0.0, 0.0], [0.0, 0.0, 0.0], 1.0)
    y = np.array([1.0, 2.0, 3.0])
    assert lk.residual_stats(ms, y).s2_u == pytest.approx(14 / 2)
    assert lk.residual_stats(ms, y, center=True).s2_u == pytest.approx(1.0)


def test_gmm_zero_spread_is_minus_inf():
    ms = MomentSummary([1.0, 1.0], [0.0, 0.0], 0.1)
    assert lk.evaluate("gmm", ms, [1.0, 1.0]) == -math.inf
    assert lk.evaluate("rgmm", ms, [1.0, 1.0]) == -math.inf


def test_errors():
    ms = MomentSummary([1.0], [0.0], 0.1)
    with pytest.raises(ValueError):
        lk.log_abc(ms, [1.0], 0.0)
    with pytest.raises(ValueError):
        lk.log_abc(MomentSummary([1.0], [0.0], 0.0), [1.0], 0.1)
    with pytest.raises(ValueError):
        lk.residual_stats(ms, [1.0])
    with pytest.raises(ValueError):
        lk.log_in(ms, [1.0, 2.0])
    with pytest.raises(ValueError):
        lk.log_in(MomentSummary([1.0], [0.0], 0.0), [1.0])
    with pytest.raises(ValueError):
        lk.evaluate("foo", ms, [1.0])
    with pytest.raises(ValueError):
        MomentSummary([1.0], [-1.0], 0.1)
    with pytest.raises(ValueError):
        MomentSummary([np.nan], [1.0], 0.1)


def test_problem_level_matches_closed_form(linear_obs):
    from conftest import linear_problem

    for kind in ("abc", "in", "gmm", "rgmm"):
        p = linear_problem(linear_obs, kind)
        sample = np.array([4.0, 0.9])
        mu, sig = 4.0 * linear_obs.x, 0.9 * linear_obs.x
        ref = lk.evaluate(kind, MomentSummary(mu, sig, 0.01), linear_obs.y, 0.05)
        assert p.log_likelihood(sample) == pytest.approx(ref, rel=1e-12)
        assert p.log_posterior([4.0, -0.1]) == -math.inf


# ---------------------------------------------------------------------------
# sign structure of the ABC log-likelihood in the (A, B) plane, where every
# output shares the mean offset A = |mu - y| and the spread B = sigma_h + sigma_N
# ---------------------------------------------------------------------------

S_N, EPS = 0.1, 0.05
N_PTS = 5


def abc_ab(a, b, s_n=S_N, eps=EPS, n=N_PTS):
    y = np.linspace(-1, 1, n)
    ms = MomentSummary(y + a, np.full(n, b - s_n), s_n)
    return lk.log_abc(ms, y, eps)


def grad_ab(a, b, s_n=S_N, eps=EPS, n=N_PTS, gamma=GAMMA):
    da = -n * ((1 / s_n**2 + gamma**2 / eps**2) * a - gamma * b / eps**2)
    db = -n * (b - gamma * a) / eps**2
    return da, db


def boundary(a, s_n=S_N, eps=EPS, gamma=GAMMA):
    return (gamma + eps**2 / (gamma * s_n**2)) * a


def fd_grad(a, b, h=1e-6, one_sided=False):
    if one_sided:
        da = (abc_ab(a + h, b) - abc_ab(a, b)) / h
    else:
        da = (abc_ab(a + h, b) - abc_ab(a - h, b)) / (2 * h)
    db = (abc_ab(a, b + h) - abc_ab(a, b - h)) / (2 * h)
    return da, db


A0 = 0.2
CASES = [
    ("I", A0, 0.20, -1, 1),
    ("II", A0, GAMMA * A0, -1, 0),
    ("III", A0, 0.27, -1, -1),
    ("IV", A0, boundary(A0), 0, -1),
    ("V", A0, 0.32, 1, -1),
]


@pytest.mark.parametrize("name,a,b,sa,sb", CASES, ids=[c[0] for c in CASES])
def test_abc_sign_table(name, a, b, sa, sb):
    da, db = fd_grad(a, b)
    ea, eb = grad_ab(a, b)
    assert da == pytest.approx(ea, rel=1e-5, abs=1e-3)
    assert db == pytest.approx(eb, rel=1e-5, abs=1e-3)
    for value, sign in ((da, sa), (db, sb)):
        if sign == 0:
            assert abs(value) < 1e-3
        else:
            assert np.sign(value) == sign


def test_abc_sign_case_vi_and_vii():
    da, db = fd_grad(0.0, 0.3, one_sided=True)
    assert da > 0 and db < 0
    assert grad_ab(0.0, 0.0) == (0.0, 0.0)


def test_abc_hessian_negative_definite():
    h = 1e-4
    a, b = 0.2, 0.27
    f = abc_ab
    haa = (f(a + h, b) - 2 * f(a, b) + f(a - h, b)) / h**2
    hbb = (f(a, b + h) - 2 * f(a, b) + f(a, b - h)) / h**2
    hab = (f(a + h, b + h) - f(a + h, b - h) - f(a - h, b + h) + f(a - h, b - h)) / (4 * h**2)
    n = N_PTS
    assert haa == pytest.approx(-n * (1 / S_N**2 + GAMMA**2 / EPS**2), rel=1e-5)
    assert hbb == pytest.approx(-n / EPS**2, rel=1e-5)
    assert hab == pytest.approx(GAMMA * n / EPS**2, rel=1e-5)
    det = haa * hbb - hab**2
    assert haa < 0 and det > 0
    assert det == pytest.approx(n**2 / (EPS**2 * S_N**2), rel=1e-3)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.15, 3.0))
def test_abc_gradient_sign_property(a, b):
    ea, eb = grad_ab(a, b)
    assume(abs(ea) > 1.0 and abs(eb) > 1.0)
    da, db = fd_grad(a, b)
    assert np.sign(da) == np.sign(ea) and np.sign(db) == np.sign(eb)
    # the B-derivative flips exactly at B = gamma A, the A-derivative at the derived boundary
    assert np.sign(eb) == np.sign(GAMMA * a - b)
    assert np.sign(ea) == np.sign(b - boundary(a))
