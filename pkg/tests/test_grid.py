import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from besov_rough.grid import (
    GridFormatError,
    GridPath,
    TwoParamField,
    UniformGrid,
    delta,
    delta2,
    load_path_csv,
    save_path_csv,
    load_germ_csv,
    save_field_csv,
)


def test_grid_nodes_exact():
    g = UniformGrid(2.0, 5)
    assert g.n == 33
    assert g.mesh == 2.0 / 32
    t = g.times()
    assert t[0] == 0.0 and t[-1] == 2.0
    # node times are exactly i*T/2^L
    assert np.all(t == np.arange(33) * 2.0 / 32)


def test_refine_contains_original_nodes():
    g = UniformGrid(1.0, 4)
    fine = g.refine(2)
    assert fine.level == 6
    assert set(np.round(g.times(), 15)) <= set(np.round(fine.times(), 15))


def test_subsample_refine_roundtrip():
    g = UniformGrid(1.0, 6)
    f = GridPath(g, np.sin(g.times()))
    coarse = f.subsample(2)
    assert coarse.grid.level == 4
    assert np.array_equal(coarse.values, f.values[::4])


def test_delta_examples():
    g = UniformGrid(1.0, 1)
    ident = GridPath(g, g.times())
    d = delta(ident)
    assert d.at(0, 1)[0] == pytest.approx(0.5)
    assert d.at(0, 2)[0] == pytest.approx(1.0)
    assert d.at(1, 2)[0] == pytest.approx(0.5)
    const = GridPath(g, np.ones(3))
    assert np.all(delta(const).to_dense() == 0.0)
    g2 = UniformGrid(1.0, 2)
    sq = GridPath(g2, g2.times() ** 2)
    assert delta(sq).at(1, 3)[0] == pytest.approx(0.75**2 - 0.25**2)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 4), st.integers(0, 200))
def test_delta2_of_delta_is_zero(level_extra, seed):
    g = UniformGrid(1.0, 3 + level_extra % 3)
    rng = np.random.default_rng(seed)
    f = GridPath(g, rng.standard_normal((g.n, 2)))
    d = delta(f)
    scale = np.abs(f.values).max()
    for (i, u, j) in [(0, 0, 0), (0, g.n // 2, g.n - 1), (1, 2, 3)]:
        assert np.abs(delta2(d, i, u, j)).max() <= 4 * np.finfo(float).eps * max(
            1.0, scale
        )


def test_delta2_product_germ_identity():
    # A_{st} = f_s (g_t - g_s)  =>  delta2 A_{sut} = -(f_u - f_s)(g_t - g_u)
    rng = np.random.default_rng(0)
    g = UniformGrid(1.0, 4)
    fv = rng.standard_normal(g.n)
    gv = rng.standard_normal(g.n)
    A = TwoParamField.from_germ(
        g, 1, lambda ii, jj: (fv[ii] * (gv[jj] - gv[ii]))[:, None]
    )
    for (i, u, j) in [(0, 3, 9), (2, 5, 16), (1, 1, 4)]:
        expected = -(fv[u] - fv[i]) * (gv[j] - gv[u])
        assert delta2(A, i, u, j)[0] == pytest.approx(expected, abs=1e-12)


def test_delta2_index_order_rejected():
    g = UniformGrid(1.0, 3)
    A = delta(GridPath(g, g.times()))
    with pytest.raises(IndexError):
        A.delta2(5, 2, 7)


def test_lazy_eager_agree():
    rng = np.random.default_rng(1)
    g = UniformGrid(1.0, 5)
    fv = rng.standard_normal((g.n, 2))
    f = GridPath(g, fv)
    lazy = delta(f, mode="lazy")
    eager = delta(f, mode="eager")
    assert lazy.is_lazy and not eager.is_lazy
    for k in (1, 7, g.n - 1):
        assert np.array_equal(lazy.band(k), eager.band(k))
    ii = np.array([0, 3, 5])
    jj = np.array([4, 3, 30])
    assert np.array_equal(lazy.pairs(ii, jj), eager.pairs(ii, jj))


def test_auto_mode_eager_below_level_12():
    g = UniformGrid(1.0, 5)
    f = GridPath(g, np.sin(g.times()))
    assert not delta(f).is_lazy  # materialized on coarse grids


def test_field_restrict_matches():
    rng = np.random.default_rng(2)
    g = UniformGrid(1.0, 5)
    f = GridPath(g, rng.standard_normal(g.n))
    A = delta(f)
    sub = A.restrict(8, 24)
    assert sub.grid.level == 4
    assert sub.at(0, 16)[0] == pytest.approx(A.at(8, 24)[0])


def test_path_csv_roundtrip(tmp_path):
    g = UniformGrid(1.5, 4)
    f = GridPath(g, np.column_stack([np.sin(g.times()), np.cos(g.times())]))
    p = tmp_path / "path.csv"
    save_path_csv(p, f)
    back = load_path_csv(p)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)


def test_path_csv_rejects_nondyadic(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,v0\n0.0,1.0\n0.3,2.0\n1.0,3.0\n")
    with pytest.raises(GridFormatError):
        load_path_csv(p)


def test_path_csv_rejects_wrong_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,v0\n0.0,1.0\n")
    with pytest.raises(GridFormatError):
        load_path_csv(p)


def test_germ_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    g = UniformGrid(1.0, 3)
    A = delta(GridPath(g, rng.standard_normal((g.n, 2))))
    p = tmp_path / "germ.csv"
    save_field_csv(p, A)
    back = load_germ_csv(p)
    assert back.grid.level == 3
    assert np.allclose(back.to_dense(), A.to_dense())
