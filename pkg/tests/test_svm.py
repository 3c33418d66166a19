import math

import numpy as np
import pytest

from camid.svm import (BinarySvm, KernelSpec, MulticlassSvm, SvmError, fit_standardizer, kernel_eval,
                       kernel_matrix, predict, scale_gamma, train_binary_svm, train_multiclass)

SEP_X = np.array([[1.0, 0.0], [2.0, 0.0], [-1.0, 0.0], [-2.0, 0.0]])
SEP_Y = np.array([1.0, 1.0, -1.0, -1.0])
XOR_X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
XOR_Y = np.array([-1.0, -1.0, 1.0, 1.0])
LINEAR = KernelSpec("linear")


def blobs(rng, n_per=20, sigma=0.2):
    centers = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float) * 5 * sigma * 2
    X = np.concatenate([c + sigma * rng.standard_normal((n_per, 2)) for c in centers])
    y = np.repeat(np.arange(4), n_per)
    return X, y


# -- standardizer ---------------------------------------------------------------

def test_standardizer_two_point_column():
    s = fit_standardizer(np.array([[1.0], [3.0]]))
    assert s.mean[0] == 2.0 and s.std[0] == 1.0
    assert s.apply(np.array([[1.0], [3.0]]))[:, 0].tolist() == [-1.0, 1.0]


def test_standardizer_constant_column_passes_through():
    s = fit_standardizer(np.array([[5.0], [5.0], [5.0]]))
    assert s.apply(np.array([[5.0], [5.0], [5.0]]))[:, 0].tolist() == [0.0, 0.0, 0.0]


def test_standardized_training_columns(rng):
    X = rng.normal(3, 7, (30, 6))
    Z = fit_standardizer(X).apply(X)
    assert np.all(np.abs(Z.mean(axis=0)) < 1e-9)
    np.testing.assert_allclose(Z.std(axis=0), 1.0, atol=1e-9)


def test_standardizer_needs_two_rows():
    with pytest.raises(SvmError):
        fit_standardizer(np.ones((1, 3)))


def test_standardizer_dim_check():
    with pytest.raises(SvmError):
        fit_standardizer(np.ones((3, 2))).apply(np.ones((1, 3)))


# -- kernels ------------------------------------------------------------------

def test_kernel_examples():
    rbf = KernelSpec("rbf", 0.5)
    assert kernel_eval([1.0, 2.0], [1.0, 2.0], rbf) == 1.0
    assert kernel_eval([0.0, 0.0], [1.0, 1.0], rbf) == pytest.approx(math.exp(-1), abs=1e-15)
    assert kernel_eval([0.0, 0.0], [1.0, 1.0], rbf) == pytest.approx(0.367879, abs=1e-6)
    assert kernel_eval([1, 2], [3, 4], LINEAR) == 11.0
    with pytest.raises(SvmError):
        kernel_eval([1, 2], [1, 2, 3], LINEAR)


def test_kernel_spec_validation():
    with pytest.raises(SvmError):
        KernelSpec("rbf")
    with pytest.raises(SvmError):
        KernelSpec("rbf", -1.0)
    with pytest.raises(SvmError):
        KernelSpec("poly", 1.0)


def test_rbf_matrix_symmetric_unit_diagonal(rng):
    X = rng.normal(size=(15, 4))
    K = kernel_matrix(X, None, KernelSpec("rbf", 0.3))
    assert np.array_equal(K, K.T)
    assert np.all(np.diag(K) == 1.0)
    assert K[2, 7] == pytest.approx(kernel_eval(X[2], X[7], KernelSpec("rbf", 0.3)), abs=1e-15)


def test_scale_gamma():
    X = np.array([[1.0, -1.0], [-1.0, 1.0]])
    assert scale_gamma(X) == pytest.approx(0.5)


# -- binary solver -------------------------------------------------------------

def test_max_margin_recovery():
    m = train_binary_svm(SEP_X, SEP_Y, LINEAR, C=1.0)
    f = m.decision_function(SEP_X)
    assert np.all(np.sign(f) == SEP_Y)
    assert abs(m.bias) < 0.1
    w = m.dual_coef @ m.support_vectors
    # analytic hard-margin solution: w = (1, 0), b = 0, margin points at x1 = +-1
    np.testing.assert_allclose(w, [1.0, 0.0], atol=1e-3)
    assert m.decision_function(np.array([[0.0, 5.0]]))[0] == pytest.approx(0.0, abs=0.01)
    np.testing.assert_allclose(m.alpha, [0.5, 0.0, 0.5, 0.0], atol=1e-3)


def test_xor_needs_rbf():
    m = train_binary_svm(XOR_X, XOR_Y, KernelSpec("rbf", 1.0), C=10.0)
    assert np.all(np.sign(m.decision_function(XOR_X)) == XOR_Y)
    lin = train_binary_svm(XOR_X, XOR_Y, LINEAR, C=10.0)
    assert np.mean(np.sign(lin.decision_function(XOR_X)) == XOR_Y) < 1.0


def test_dual_feasibility_and_monotone_objective(rng):
    X = rng.normal(size=(40, 3))
    y = np.where(X[:, 0] + 0.5 * rng.normal(size=40) > 0, 1.0, -1.0)
    C = 0.7
    m = train_binary_svm(X, y, KernelSpec("rbf", 0.5), C=C, record_objective=True)
    assert np.all(m.alpha >= 0) and np.all(m.alpha <= C)
    assert abs(np.sum(m.alpha * y)) < 1e-6
    trace = np.array(m.objective_trace)
    assert len(trace) == m.n_iter + 1
    assert np.all(np.diff(trace) >= -1e-12)
    assert m.converged


def test_deterministic_training(rng):
    X = rng.normal(size=(30, 4))
    y = np.where(X[:, 1] > 0, 1.0, -1.0)
    a = train_binary_svm(X, y, KernelSpec("rbf", 0.25))
    b = train_binary_svm(X.copy(), y.copy(), KernelSpec("rbf", 0.25))
    assert a.alpha.tobytes() == b.alpha.tobytes()
    assert a.bias == b.bias


def test_permuted_rows_agree_on_decisions(rng):
    X = rng.normal(size=(30, 3))
    y = np.where(X[:, 0] - X[:, 2] > 0, 1.0, -1.0)
    perm = rng.permutation(30)
    k = KernelSpec("rbf", 0.4)
    a = train_binary_svm(X, y, k, C=1.0, tol=1e-10)
    b = train_binary_svm(X[perm], y[perm], k, C=1.0, tol=1e-10)
    probe = rng.normal(size=(25, 3))
    np.testing.assert_allclose(a.decision_function(probe), b.decision_function(probe), atol=1e-6)


def test_binary_errors():
    with pytest.raises(SvmError, match="both classes"):
        train_binary_svm(SEP_X, np.ones(4), LINEAR)
    bad = SEP_X.copy()
    bad[0, 0] = np.inf
    with pytest.raises(SvmError, match="non-finite"):
        train_binary_svm(bad, SEP_Y, LINEAR)
    with pytest.raises(SvmError):
        train_binary_svm(SEP_X, SEP_Y, LINEAR, C=0.0)


def test_iteration_cap_is_reported(rng):
    X = rng.normal(size=(40, 2))
    y = np.where(rng.random(40) > 0.5, 1.0, -1.0)
    m = train_binary_svm(X, y, KernelSpec("rbf", 1.0), C=10.0, max_iter=3)
    assert m.n_iter == 3 and not m.converged


# -- multiclass ---------------------------------------------------------------

def test_two_class_reduces_to_binary():
    labels = np.where(SEP_Y > 0, 0, 1)
    mc = train_multiclass(SEP_X, labels, LINEAR, 1.0)
    binary = train_binary_svm(SEP_X, np.where(labels == 0, 1.0, -1.0), LINEAR, 1.0)
    probe = np.array([[0.3, 1.0], [-0.2, 0.0], [5.0, 5.0], [-3.0, 1.0]])
    expected = np.where(binary.decision_function(probe) > 0, 0, 1)
    assert mc.predict(probe).tolist() == expected.tolist()


def test_four_blobs(rng):
    X, y = blobs(rng)
    Xt, yt = blobs(np.random.default_rng(99))
    m = train_multiclass(X, y, KernelSpec("rbf", 1.0), 1.0)
    assert len(m.models) == 4
    assert np.mean(m.predict(Xt) == yt) == 1.0


def test_tie_goes_to_lowest_class():
    k = KernelSpec("linear")
    flat = BinarySvm(np.zeros((0, 2)), np.zeros(0), 0.0, k, 1.0)
    mc = MulticlassSvm((flat, flat, flat, flat), 2)
    assert mc.predict(np.array([[1.0, 2.0], [3.0, -1.0]])).tolist() == [0, 0]


def test_predict_contracts():
    labels = np.array([0, 0, 1, 1])
    mc = train_multiclass(SEP_X, labels, LINEAR, 1.0)
    assert predict(mc, SEP_X).tolist() == [0, 0, 1, 1]
    assert predict(mc, np.zeros((0, 2))).tolist() == []
    assert len(set(predict(mc, np.tile([[0.4, 0.0]], (5, 1))).tolist())) == 1
    with pytest.raises(SvmError):
        predict(mc, np.zeros((3, 5)))


def test_multiclass_needs_two_classes():
    with pytest.raises(SvmError):
        train_multiclass(SEP_X, np.zeros(4, int), LINEAR)
