import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aae.encoding import Case
from aae.finance import (
    MarketDataError,
    StockSeries,
    build_data_vector,
    bundled_dataset,
    data_matrix,
    exact_svd_entropy,
    load_prices,
    log_returns,
    register_sizes,
    sliding_windows,
    term_returns,
    window_coefficients,
)
from aae.qsvd import svd_entropy

TABLE2_TERMS = ["Aug 08", "Sep 08", "Oct 08", "Nov 08", "Dec 08", "Jan 09", "Feb 09", "Mar 09"]


@pytest.fixture(scope="module")
def table2():
    return bundled_dataset("table2")


class TestLoad:
    def test_table2_corners(self, table2):
        assert table2.symbols[0] == "XOM" and table2.symbols[3] == "MSFT"
        assert table2.prices[0, 0] == 84.80
        assert table2.prices[3, -1] == 15.96
        assert table2.dates[0] == "Apr 08" and table2.dates[-1] == "Mar 09"

    def test_table4_shape(self):
        s = bundled_dataset("table4")
        assert s.prices.shape == (8, 12)

    def test_from_path(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("Symbol,Jan 20,Feb 20\nA,1.5,2\nB,3,4\n")
        s = load_prices(p)
        assert s.symbols == ["A", "B"]
        np.testing.assert_array_equal(s.prices, [[1.5, 2], [3, 4]])
        assert load_prices(str(p)).symbols == ["A", "B"]

    @pytest.mark.parametrize(
        "text",
        [
            "Symbol,Jan 20,Feb 20\nA,1.0,0.00\n",  # zero price
            "Symbol,Jan 20,Feb 20\nA,1.0,-2\n",
            "Symbol,Jan 20,Feb 20\nA,1.0\n",  # ragged
            "Symbol,Jan 20,Feb 20\nA,1,2\nA,3,4\n",  # duplicate
            "Symbol,Jan 20,Feb 20\nA,1,x\n",
            "Symbol,Feb 20,Jan 20\nA,1,2\n",  # dates go backwards
            "Symbol,Jan 20\n",
        ],
    )
    def test_rejects(self, text):
        with pytest.raises(MarketDataError):
            load_prices(text)


class TestReturns:
    def test_xom_first_return(self, table2):
        assert log_returns(table2)[0, 0] == pytest.approx(math.log(90.10 / 84.80), abs=1e-15)
        assert log_returns(table2)[0, 0] == pytest.approx(0.06062, abs=1e-5)

    def test_constant_price(self):
        s = StockSeries(["A"], ["Jan 20", "Feb 20"], [[5.0, 5.0]])
        assert log_returns(s)[0, 0] == 0

    def test_column_count(self, table2):
        assert log_returns(table2).shape == (4, 11)

    def test_needs_two_dates(self):
        with pytest.raises(MarketDataError):
            log_returns(StockSeries(["A"], ["Jan 20"], [[5.0]]))


def random_returns(rng, n_s, T):
    return rng.normal(0, 0.1, (n_s, T))


class TestWindow:
    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n_s=st.integers(1, 8), T=st.integers(2, 9))
    def test_trace_psd_and_norm(self, seed, n_s, T):
        a, C = window_coefficients(random_returns(np.random.default_rng(seed), n_s, T))
        assert abs(np.trace(C) - 1) < 1e-10
        assert abs(np.sum(a**2) - 1) < 1e-10
        assert np.linalg.eigvalsh(C).min() > -1e-10
        np.testing.assert_allclose(C, C.T, atol=1e-15)

    def test_population_sigma(self):
        r = np.array([[0.1, -0.1, 0.3, 0.0]])
        a, _ = window_coefficients(r)
        sig = np.std(r, ddof=0)
        np.testing.assert_allclose(a, (r - r.mean()) / (sig * 2))

    def test_duplicate_stock_rank_deficient(self, rng):
        r = random_returns(rng, 3, 4)
        r[2] = r[0]
        _, C = window_coefficients(r)
        assert np.linalg.eigvalsh(C).min() == pytest.approx(0, abs=1e-12)

    def test_single_stock(self, rng):
        a, C = window_coefficients(random_returns(rng, 1, 4))
        np.testing.assert_allclose(C, [[1.0]])
        assert exact_svd_entropy(C) == 0

    def test_zero_variance_rejected(self):
        with pytest.raises(MarketDataError, match="zero variance"):
            window_coefficients([[0.1, 0.2, 0.3], [0.05, 0.05, 0.05]])

    def test_too_short(self):
        with pytest.raises(MarketDataError):
            window_coefficients([[0.1], [0.2]])


class TestExactEntropy:
    def test_rank_one(self):
        assert exact_svd_entropy(np.diag([1.0, 0, 0, 0])) == 0

    def test_uniform(self):
        assert exact_svd_entropy(np.eye(4) / 4) == pytest.approx(math.log(4), abs=1e-12)

    def test_asymmetric(self):
        with pytest.raises(MarketDataError):
            exact_svd_entropy([[0.5, 0.1], [0.0, 0.5]])

    def test_negative_eigenvalue(self):
        with pytest.raises(MarketDataError):
            exact_svd_entropy([[0.5, 0.9], [0.9, 0.5]])

    def test_consistent_with_spectrum_entropy(self, rng):
        for _ in range(20):
            _, C = window_coefficients(random_returns(rng, 4, 4))
            lam = np.clip(np.linalg.eigvalsh(C), 0, None)
            assert exact_svd_entropy(C) == pytest.approx(svd_entropy(lam / lam.sum()), abs=1e-10)

    def test_table2_dip_and_recovery(self, table2):
        ent = {w.label: w.exact_entropy for w in sliding_windows(table2)}
        assert list(ent) == TABLE2_TERMS
        crisis = min(ent[t] for t in TABLE2_TERMS[2:7])
        assert ent["Aug 08"] > crisis and ent["Mar 09"] > crisis
        assert abs(ent["Aug 08"] - 0.9) <= 0.1
        assert abs(crisis - 0.7) <= 0.1
        for t, s in ent.items():
            assert 0 <= s <= math.log(4)


class TestDataVector:
    def test_register_sizes(self):
        assert register_sizes(4, 4) == (2, 2)
        assert register_sizes(8, 4) == (3, 2)
        assert register_sizes(5, 3) == (3, 2)
        assert register_sizes(1, 2) == (1, 1)

    def test_padding_keeps_values(self, rng):
        a, _ = window_coefficients(random_returns(rng, 3, 3))
        m = data_matrix(a)
        assert m.shape == (4, 4)
        np.testing.assert_array_equal(m[:3, :3], a)
        assert np.all(m[3] == 0) and np.all(m[:, 3] == 0)

    def test_demo_index_layout(self, table2):
        _, ret = term_returns(table2)[0]
        a, _ = window_coefficients(ret)
        enc = build_data_vector(a)
        assert enc.case is Case.MIXED_SIGN and enc.d_bar.size == 32
        for j in range(4):
            for t in range(4):
                k = 8 * j + 2 * t + (1 if a[j, t] < 0 else 0)
                assert enc.d_bar[k] == pytest.approx(abs(a[j, t]), abs=1e-15)

    def test_index_13_rule(self):
        # a_{2,3} < 0 in one-based terms lands at 8 + 4 + 1
        a = np.full((4, 4), 0.25)
        a[1, 2] = -0.25
        enc = build_data_vector(a)
        assert enc.d_bar[13] == 0.25 and enc.d_bar[12] == 0

    def test_all_positive_is_case1(self):
        enc = build_data_vector(np.full((2, 2), 0.5))
        assert enc.case is Case.UNIFORM_SIGN and enc.d_bar is None and enc.n_qubits == 2

    def test_norm_checked(self):
        with pytest.raises(MarketDataError):
            build_data_vector(np.ones((2, 2)))

    def test_partial_trace_is_correlation_matrix(self, table2):
        for w in sliding_windows(table2):
            M = build_data_vector(w.a).d.reshape(4, 4)
            rho = M @ M.T  # trace over the time register
            np.testing.assert_allclose(rho, w.C, atol=1e-10)

    def test_partial_trace_with_padding(self, rng):
        a, C = window_coefficients(random_returns(rng, 5, 3))
        n_s, n_t = register_sizes(5, 3)
        M = build_data_vector(a).d.reshape(1 << n_s, 1 << n_t)
        np.testing.assert_allclose((M @ M.T)[:5, :5], C, atol=1e-10)


class TestWindows:
    def test_table2_terms(self, table2):
        labels = [lab for lab, _ in term_returns(table2)]
        assert labels == TABLE2_TERMS

    def test_return_columns_per_term(self, table2):
        for _, r in term_returns(table2):
            assert r.shape == (4, 4)

    def test_step(self, table2):
        assert [lab for lab, _ in term_returns(table2, step=3)] == ["Aug 08", "Nov 08", "Feb 09"]

    def test_not_enough_dates(self):
        s = StockSeries(["A"], ["Jan 20", "Feb 20", "Mar 20"], [[1.0, 2.0, 3.0]])
        with pytest.raises(MarketDataError):
            term_returns(s, window=5)
