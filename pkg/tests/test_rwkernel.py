import numpy as np
import pytest

from helpers import bare_path, random_cfg
from mrkernel.cfg import default_similarity_table
from mrkernel.rwkernel import (
    KernelParams,
    build_product_graph,
    format_gram,
    gram,
    gram_from_profiles,
    kernel,
    kernel_bruteforce,
    parse_gram,
    walk_profile,
)

TABLE = default_similarity_table()


def test_identical_single_nodes():
    g = bare_path("g", ["add"])
    for lam in (0.0, 0.5, 0.9):
        for max_len in (0, 1, 4):
            assert kernel(g, g, TABLE, KernelParams(lam, max_len)) == 1.0


def test_dissimilar_single_nodes():
    a = bare_path("a", ["add"])
    m = bare_path("m", ["mul"])
    assert kernel(a, m, TABLE, KernelParams(0.5, 3)) == 0.0


def test_worked_path_examples():
    p = KernelParams(lam=0.5, max_len=3)
    g = bare_path("g", ["assign", "add"])
    assert kernel(g, g, TABLE, p) == pytest.approx(2.5, abs=1e-12)
    g1 = bare_path("g1", ["add", "mul"])
    g2 = bare_path("g2", ["sub", "mul"])
    assert kernel(g1, g2, TABLE, p) == pytest.approx(1.75, abs=1e-12)
    # Brute force agrees on both.
    assert kernel_bruteforce(g, g, TABLE, p) == pytest.approx(2.5, abs=1e-12)
    assert kernel_bruteforce(g1, g2, TABLE, p) == pytest.approx(1.75, abs=1e-12)


def _label_sum(g1, g2):
    return sum(
        TABLE.score(a, b) for a in g1.label_keys() for b in g2.label_keys()
    )


def test_lambda_zero_and_length_zero_closed_forms():
    rng = np.random.default_rng(11)
    for i in range(20):
        g1 = random_cfg(rng, f"a{i}")
        g2 = random_cfg(rng, f"b{i}")
        expected = _label_sum(g1, g2)
        assert kernel(g1, g2, TABLE, KernelParams(0.0, 4)) == pytest.approx(
            expected, abs=1e-12
        )
        assert kernel(g1, g2, TABLE, KernelParams(0.7, 0)) == pytest.approx(
            expected, abs=1e-12
        )
        assert kernel_bruteforce(g1, g2, TABLE, KernelParams(0.0, 4)) == pytest.approx(
            expected, abs=1e-12
        )


def test_kernel_matches_bruteforce_on_random_graphs():
    rng = np.random.default_rng(3)
    for i in range(15):
        g1 = random_cfg(rng, f"a{i}")
        g2 = random_cfg(rng, f"b{i}")
        for lam in (0.0, 0.5, 0.9):
            for max_len in (0, 1, 4):
                params = KernelParams(lam, max_len)
                fast = kernel(g1, g2, TABLE, params)
                slow = kernel_bruteforce(g1, g2, TABLE, params)
                assert fast == pytest.approx(slow, abs=1e-9)


def test_kernel_is_symmetric():
    rng = np.random.default_rng(17)
    params = KernelParams(0.9, 6)
    for i in range(10):
        g1 = random_cfg(rng, f"a{i}")
        g2 = random_cfg(rng, f"b{i}")
        assert kernel(g1, g2, TABLE, params) == pytest.approx(
            kernel(g2, g1, TABLE, params), abs=1e-12
        )


def test_monotone_in_max_len():
    rng = np.random.default_rng(23)
    g1 = random_cfg(rng, "a")
    g2 = random_cfg(rng, "b")
    values = [kernel(g1, g2, TABLE, KernelParams(0.9, L)) for L in range(6)]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_affine_in_lambda_at_length_one():
    rng = np.random.default_rng(29)
    g1 = random_cfg(rng, "a")
    g2 = random_cfg(rng, "b")
    k = lambda lam: kernel(g1, g2, TABLE, KernelParams(lam, 1))
    k0, k_half, k1 = k(0.0), k(0.45), k(0.9)
    # k(lam) = c0 + lam*c1, so the midpoint value interpolates linearly.
    assert k_half == pytest.approx((k0 + k1) / 2.0, abs=1e-9)


def test_normalized_self_kernel_is_one():
    rng = np.random.default_rng(31)
    for i in range(5):
        g = random_cfg(rng, f"g{i}")
        value = kernel(g, g, TABLE, KernelParams(0.9, 5, normalize=True))
        assert value == pytest.approx(1.0, abs=1e-12)


def test_bruteforce_guards():
    rng = np.random.default_rng(5)
    g = random_cfg(rng, "g")
    with pytest.raises(ValueError, match="L <="):
        kernel_bruteforce(g, g, TABLE, KernelParams(0.5, 7))
    big = bare_path("big", ["add"] * 9)
    with pytest.raises(ValueError, match=r"\|V1\|\*\|V2\|"):
        kernel_bruteforce(big, big, TABLE, KernelParams(0.5, 2))


def test_product_graph_shape():
    g1 = bare_path("g1", ["add", "mul"])
    g2 = bare_path("g2", ["sub", "mul"])
    product = build_product_graph(g1, g2, TABLE)
    # (add,sub) at 0.5 and (mul,mul) at 1.0 are the only positive pairs.
    assert set(product.pnodes) == {(0, 0), (1, 1)}
    assert sorted(product.weights.tolist()) == [0.5, 1.0]
    assert product.adjacency.nnz == 1


def test_walk_profile_values():
    g = bare_path("g", ["assign", "add"])
    profile = walk_profile(g, g, TABLE, 3)
    assert profile.tolist() == [2.0, 1.0, 0.0, 0.0]


def test_gram_single_graph_lower_bound():
    g = bare_path("g", ["assign", "add", "return"])
    gm = gram([g], TABLE, KernelParams(0.9, 4))
    assert gm.values.shape == (1, 1)
    assert gm.values[0, 0] >= g.n_nodes


def test_gram_duplicate_graph_rows_identical():
    rng = np.random.default_rng(41)
    g = random_cfg(rng, "g")
    h = random_cfg(rng, "h")
    gm = gram([g, h, g], TABLE, KernelParams(0.9, 5))
    assert np.array_equal(gm.values[0], gm.values[2])
    assert np.array_equal(gm.values[:, 0], gm.values[:, 2])


def test_gram_is_exactly_symmetric_and_worker_independent():
    rng = np.random.default_rng(43)
    cfgs = [random_cfg(rng, f"g{i}") for i in range(6)]
    one = gram(cfgs, TABLE, KernelParams(0.9, 8), workers=1)
    two = gram(cfgs, TABLE, KernelParams(0.9, 8), workers=3)
    assert np.array_equal(one.values, one.values.T)
    assert np.array_equal(one.values, two.values)


def test_normalized_gram_unit_diagonal():
    rng = np.random.default_rng(47)
    cfgs = [random_cfg(rng, f"g{i}") for i in range(5)]
    gm = gram(cfgs, TABLE, KernelParams(0.9, 6, normalize=True))
    assert np.allclose(np.diag(gm.values), 1.0, atol=1e-12)


def test_gram_serialization_roundtrip():
    rng = np.random.default_rng(53)
    cfgs = [random_cfg(rng, f"g{i}") for i in range(4)]
    gm = gram(cfgs, TABLE, KernelParams(0.9, 6))
    back = parse_gram(format_gram(gm))
    assert back.names == gm.names
    assert back.params == gm.params
    assert back.table_digest == gm.table_digest
    assert np.allclose(back.values, gm.values, rtol=1e-11, atol=1e-11)


def test_gram_serialization_significant_digits():
    g = bare_path("g", ["assign", "add"])
    text = format_gram(gram([g], TABLE, KernelParams(0.5, 3)))
    row = text.strip().splitlines()[-1]
    mantissa = row.split()[0].split("e")[0]
    assert len(mantissa.replace(".", "").replace("-", "")) >= 12


def test_parse_gram_rejects_asymmetry():
    g = bare_path("g", ["assign", "add"])
    h = bare_path("h", ["assign", "mul"])
    text = format_gram(gram([g, h], TABLE, KernelParams(0.5, 3)))
    lines = text.splitlines()
    row = lines[-1].split()
    row[0] = repr(float(row[0]) + 1.0)
    lines[-1] = " ".join(row)
    with pytest.raises(ValueError, match="not symmetric"):
        parse_gram("\n".join(lines))


def test_gram_psd_warning_on_indefinite_values():
    profiles = np.zeros((2, 2, 1))
    profiles[:, :, 0] = [[1.0, 2.0], [2.0, 1.0]]  # eigenvalues 3 and -1
    with pytest.warns(UserWarning, match="not positive semidefinite"):
        gram_from_profiles(profiles, ["a", "b"], KernelParams(0.0, 0), "x")


def test_params_validation():
    with pytest.raises(ValueError, match="lambda"):
        KernelParams(1.0, 5)
    with pytest.raises(ValueError, match="lambda"):
        KernelParams(-0.1, 5)
    with pytest.raises(ValueError, match="walk length"):
        KernelParams(0.5, -1)
    with pytest.raises(ValueError, match="at least one"):
        gram([], TABLE, KernelParams(0.5, 3))
