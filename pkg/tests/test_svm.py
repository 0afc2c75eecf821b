import numpy as np
import pytest

from helpers import svm_dual_optimum
from mrkernel.svm import (
    SingleClassError,
    SvmModel,
    SvmParams,
    decision_values,
    dual_objective,
    format_model,
    parse_model,
    predict,
    train,
)


def random_psd_kernel(rng, n=4, scale=1.0):
    g = rng.normal(size=(n, n))
    return scale * (g @ g.T)


def test_two_point_identity_kernel():
    model = train(np.eye(2), [1, -1], SvmParams(C=1.0))
    assert model.alphas == pytest.approx([1.0, 1.0], abs=1e-9)
    assert model.bias == pytest.approx(0.0, abs=1e-9)
    scores = decision_values(model, np.eye(2))
    assert scores == pytest.approx([1.0, -1.0], abs=1e-9)
    assert predict(model, np.eye(2)).tolist() == [1, -1]


def test_one_hot_kernel_separates_training_set():
    kernel = np.eye(4)
    y = [1, -1, 1, -1]
    model = train(kernel, y, SvmParams(C=1000.0))
    assert predict(model, kernel).tolist() == y


def test_conflicting_duplicate_hits_the_box():
    kernel = np.ones((2, 2))
    model = train(kernel, [1, -1], SvmParams(C=0.1))
    assert model.alphas == pytest.approx([0.1, 0.1], abs=1e-12)


def test_single_class_refused():
    with pytest.raises(SingleClassError):
        train(np.eye(3), [1, 1, 1], SvmParams(C=1.0))


def test_non_square_kernel_refused():
    with pytest.raises(ValueError, match="square"):
        train(np.ones((2, 3)), [1, -1], SvmParams(C=1.0))


def test_label_values_checked():
    with pytest.raises(ValueError, match=r"\+1 or -1"):
        train(np.eye(2), [1, 0], SvmParams(C=1.0))


def test_params_validation():
    with pytest.raises(ValueError, match="C must be positive"):
        SvmParams(C=0.0)
    with pytest.raises(ValueError, match="tolerance"):
        SvmParams(C=1.0, tolerance=0.0)


def test_dual_feasibility_invariants():
    rng = np.random.default_rng(7)
    for trial in range(25):
        n = int(rng.integers(3, 8))
        kernel = random_psd_kernel(rng, n)
        y = rng.choice([-1, 1], size=n)
        if len(set(y.tolist())) < 2:
            y[0] = -y[1]
        c = float(rng.choice([0.1, 1.0, 10.0]))
        params = SvmParams(C=c, tolerance=1e-5, seed=trial)
        model = train(kernel, y, params)
        assert np.all(model.alphas >= -1e-15)
        assert np.all(model.alphas <= c + 1e-15)
        assert abs(float(model.alphas @ model.labels)) <= 1e-6
        # Free support vectors sit on the margin.
        raw = kernel @ (model.alphas * model.labels) + model.bias
        free = (model.alphas > 1e-12) & (model.alphas < c - 1e-12)
        if np.any(free):
            margins = model.labels[free] * raw[free]
            assert np.all(np.abs(margins - 1.0) <= 10 * params.tolerance)


def test_objective_matches_active_set_enumeration():
    rng = np.random.default_rng(19)
    for trial in range(30):
        kernel = random_psd_kernel(rng, 4)
        y = rng.choice([-1, 1], size=4)
        if len(set(y.tolist())) < 2:
            y[0] = -y[1]
        for c in (0.1, 1.0, 1000.0):
            model = train(kernel, y, SvmParams(C=c, tolerance=1e-8, seed=trial))
            ours = dual_objective(kernel, y, model.alphas)
            best = svm_dual_optimum(kernel, y, c)
            assert ours == pytest.approx(best, abs=1e-4)


def test_training_is_deterministic():
    rng = np.random.default_rng(23)
    kernel = random_psd_kernel(rng, 6)
    y = [1, -1, 1, -1, 1, -1]
    a = train(kernel, y, SvmParams(C=10.0, seed=5))
    b = train(kernel, y, SvmParams(C=10.0, seed=5))
    assert np.array_equal(a.alphas, b.alphas)
    assert a.bias == b.bias


def test_zero_alpha_instance_does_not_change_decisions():
    rng = np.random.default_rng(29)
    kernel = random_psd_kernel(rng, 4)
    y = np.array([1, -1, 1, -1])
    model = train(kernel, y, SvmParams(C=1.0))
    cross = rng.normal(size=(3, 4))
    base = decision_values(model, cross)

    extended = SvmModel(
        alphas=np.concatenate([model.alphas, [0.0]]),
        labels=np.concatenate([model.labels, [1]]),
        bias=model.bias,
        support_indices=model.support_indices,
        params=model.params,
    )
    cross_ext = np.concatenate([cross, rng.normal(size=(3, 1))], axis=1)
    assert decision_values(extended, cross_ext) == pytest.approx(base, abs=1e-12)


def test_all_zero_cross_row_returns_bias():
    model = train(np.eye(2), [1, -1], SvmParams(C=1.0))
    scores = decision_values(model, np.zeros((1, 2)))
    assert scores[0] == pytest.approx(model.bias, abs=1e-15)


def test_dimension_mismatch_rejected():
    model = train(np.eye(2), [1, -1], SvmParams(C=1.0))
    with pytest.raises(ValueError, match="columns"):
        decision_values(model, np.zeros((1, 3)))


def test_sign_zero_is_positive():
    model = train(np.eye(2), [1, -1], SvmParams(C=1.0))
    assert predict(model, np.zeros((1, 2))).tolist() == [1]


def test_model_serialization_roundtrip():
    rng = np.random.default_rng(31)
    kernel = random_psd_kernel(rng, 5)
    y = [1, 1, -1, -1, 1]
    model = train(kernel, y, SvmParams(C=2.5, tolerance=1e-5, seed=3))
    text = format_model(model, mr="Additive", meta={"lambda": "0.9"})
    back, mr, meta = parse_model(text)
    assert mr == "Additive"
    assert meta["lambda"] == "0.9"
    assert back.params.C == 2.5
    assert back.bias == model.bias
    assert back.n_train == model.n_train
    assert np.allclose(back.alphas, model.alphas)
    sv = list(model.support_indices)
    assert list(back.support_indices) == sv
    assert np.array_equal(back.labels[sv], model.labels[sv])


def test_parse_model_rejects_bad_support_index():
    with pytest.raises(ValueError, match="support index"):
        parse_model("C: 1.0\nbias: 0.0\nn: 2\nsv: 5 1 0.5\n")
