import math

import numpy as np
import pytest

import fdcheck
from bracketlab.brackets import LengthCapExceeded, label_binary, label_ternary
from bracketlab.lrn import LrnParams
from bracketlab import training
from bracketlab.training import (
    BinaryHead,
    Model,
    TernaryHead,
    TrainConfig,
    apply_update,
    build_train_set,
    default_batch_size,
    evaluate,
    gradients,
    head_forward,
    init_model,
    loss,
    predict,
    train_run,
)


def binary_model(w_open=0.3, w_close=-0.2, u=0.4, w_b=0.0, v=0.7, c=0.0, bias="off"):
    return Model(cell=LrnParams(w_open, w_close, u, w_b), head=BinaryHead(v, c), bias_mode=bias)


def ternary_model(rng=None, bias="off"):
    rng = rng or np.random.default_rng(0)
    return init_model("ternary", bias, rng)


# ---------------------------------------------------------------------------
# datasets


def test_build_train_set_length2():
    data = build_train_set(2)
    assert data.size == 4
    labels = [label_ternary(s) for s in data.seqs]
    assert labels.count("pos") == 1
    assert labels.count("zero") == 2
    assert labels.count("neg") == 1


def test_build_train_set_counts():
    data = build_train_set(4)
    assert data.size == 16
    assert int((data.diffs == 0).sum()) == math.comb(4, 2)
    assert build_train_set(8).size == 256
    with pytest.raises(LengthCapExceeded):
        build_train_set(13)


def test_labels_agree_with_label_functions():
    data = build_train_set(6)
    for i, seq in enumerate(data.seqs):
        assert (data.y_binary[i] == 1.0) == (label_binary(seq) == "pos")
        expected = training.TERNARY_CLASS_ORDER.index(label_ternary(seq))
        assert data.y_ternary[i] == expected


# ---------------------------------------------------------------------------
# heads and loss


def test_head_forward_binary():
    m = binary_model(v=1.0)
    assert head_forward(m, 0.0) == pytest.approx(0.5)
    m10 = binary_model(v=10.0)
    assert head_forward(m10, 1.0) == pytest.approx(1.0 / (1.0 + math.exp(-10.0)))


def test_head_forward_ternary_uniform():
    m = Model(
        cell=LrnParams(0.0, 0.0, 0.0, 0.0),
        head=TernaryHead(v=(0.0, 0.0, 0.0), c=(0.0, 0.0, 0.0)),
        bias_mode="off",
    )
    p = head_forward(m, 7.3)
    assert p == pytest.approx([1 / 3, 1 / 3, 1 / 3])


def test_loss_uniform_predictors():
    data = build_train_set(4)
    m = binary_model(v=0.0)
    assert loss(m, data.open_bits, data.y_binary) == pytest.approx(math.log(2), abs=1e-9)
    t = Model(
        cell=LrnParams(0.1, -0.4, 0.2, 0.0),
        head=TernaryHead(v=(0.0, 0.0, 0.0), c=(0.0, 0.0, 0.0)),
        bias_mode="off",
    )
    assert loss(t, data.open_bits, data.y_ternary) == pytest.approx(math.log(3), abs=1e-9)


def test_loss_confident_predictions():
    data = build_train_set(2)
    m = Model(cell=LrnParams(1.0, -1.0, 1.0, 0.0), head=BinaryHead(v=50.0, c=0.0), bias_mode="off")
    # h equals diff: logit 50*diff separates pos (diff 2) from nonpos; diff 0 sits at ln 2
    subset = data.diffs != 0
    assert loss(m, data.open_bits[subset], data.y_binary[subset]) < 1e-3


def test_loss_extreme_logits_stable():
    data = build_train_set(2)
    m = binary_model(w_open=400.0, w_close=-400.0, u=1.0, v=10.0)
    value = loss(m, data.open_bits, data.y_binary)
    assert math.isfinite(value)


# ---------------------------------------------------------------------------
# gradients vs central finite differences (the oracle)


@pytest.mark.parametrize("task", ["binary", "ternary"])
@pytest.mark.parametrize("bias_mode", ["off", "on"])
def test_gradients_match_finite_differences(task, bias_mode):
    rng = np.random.default_rng(42)
    for _ in range(50):
        model, bits, y = fdcheck.random_case(task, bias_mode, rng)
        grads = gradients(model, bits, y)
        for name in fdcheck.trainable_coords(model):
            analytic = fdcheck.grad_coord(grads, name)
            numeric = fdcheck.central_difference(model, bits, y, name)
            assert abs(analytic - numeric) / max(1.0, abs(analytic)) < 1e-4, (name, analytic, numeric)


def test_gradients_empty_sequences():
    model = binary_model(bias="on", c=0.1)
    bits = np.zeros((5, 0))
    y = np.zeros(5)
    grads = gradients(model, bits, y)
    assert grads.w_open == grads.w_close == grads.u == grads.w_b == 0.0
    assert float(grads.v) == 0.0  # h is identically 0
    assert float(grads.c) != 0.0


def test_gradients_saturated_optimum():
    data = build_train_set(4)
    pos = data.diffs > 0
    model = Model(cell=LrnParams(1.0, -1.0, 1.0, 0.0), head=BinaryHead(v=500.0, c=0.0), bias_mode="off")
    grads = gradients(model, data.open_bits[pos], data.y_binary[pos])
    norm = math.hypot(grads.w_open, grads.w_close, grads.u, float(grads.v))
    assert norm < 1e-6


def test_nobias_gradient_and_update_freeze():
    rng = np.random.default_rng(1)
    model, bits, y = fdcheck.random_case("binary", "off", rng)
    grads = gradients(model, bits, y)
    assert grads.w_b == 0.0
    assert float(grads.c) == 0.0
    stepped = model
    for _ in range(25):
        stepped = apply_update(stepped, gradients(stepped, bits, y), 0.1)
    assert stepped.cell.w_b == 0.0
    assert stepped.head.c == 0.0


def test_ternary_head_bias_trains_in_nobias_mode():
    rng = np.random.default_rng(2)
    model, bits, y = fdcheck.random_case("ternary", "off", rng)
    grads = gradients(model, bits, y)
    assert np.any(np.asarray(grads.c) != 0.0)
    assert grads.w_b == 0.0


# ---------------------------------------------------------------------------
# runs


def test_default_batch_size():
    assert default_batch_size(4) == 1
    assert default_batch_size(16) == 2
    assert default_batch_size(256) == 32
    assert default_batch_size(1) == 1


def test_train_run_deterministic():
    cfg = TrainConfig(task="binary", bias_mode="off", train_length=4, epochs=12, n_runs=2, seed=9)
    first = train_run(cfg, 1)
    second = train_run(cfg, 1)
    assert first.to_dict() == second.to_dict()
    other = train_run(cfg, 0)
    assert other.to_dict() != first.to_dict()


def test_train_run_record_shape():
    cfg = TrainConfig(task="ternary", bias_mode="on", train_length=2, epochs=5, seed=3)
    rec = train_run(cfg, 0)
    assert rec.status == "ok"
    assert len(rec.epoch_loss) == 5
    assert len(rec.epoch_accuracy) == 5
    assert set(rec.eval_accuracy) == {"20", "50"}
    assert all(0.0 <= v <= 100.0 for v in rec.eval_accuracy.values())
    # length-2 training set has all three classes: pos, two zeros, neg
    assert set(rec.train_class_accuracy) == {"pos", "zero", "neg"}
    assert rec.eval_sampling == "uniform-iid"
    assert rec.indicators["tol"] == 1e-6
    model = rec.final_model()
    assert isinstance(model.head, TernaryHead)


def test_train_run_loss_decreases_mostly():
    for length in (4, 8):
        cfg = TrainConfig(task="binary", bias_mode="off", train_length=length, seed=0)
        records = [train_run(cfg, i) for i in range(10)]
        improved = sum(r.epoch_loss[-1] < r.initial_loss for r in records)
        assert improved >= 9


def test_train_run_divergence_guard():
    cfg = TrainConfig(task="binary", bias_mode="off", train_length=8, epochs=40, seed=0, learning_rate=4.0)
    rec = train_run(cfg, 0)
    assert rec.status == "diverged"
    assert rec.diagnostics
    assert rec.eval_accuracy == {}


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(task="other")
    with pytest.raises(ValueError):
        TrainConfig(bias_mode="none")
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(eval_lengths=(0,))


def test_config_roundtrip():
    cfg = TrainConfig(task="ternary", bias_mode="on", train_length=4, seed=7)
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


# ---------------------------------------------------------------------------
# evaluation


def test_evaluate_separated_head():
    model = Model(cell=LrnParams(1.0, -1.0, 1.0, 0.0), head=BinaryHead(v=50.0, c=0.0), bias_mode="off")
    acc = evaluate(model, "binary", 50, 400, np.random.default_rng(0))
    assert acc == 100.0


def test_evaluate_uniform_model_majority_rate():
    # exact majority-class rate at length 20: P(diff <= 0) = 1/2 + C(20,10)/2^21
    expected = 100.0 * (0.5 + math.comb(20, 10) / 2**21)
    model = binary_model(v=0.0)
    acc = evaluate(model, "binary", 20, 4000, np.random.default_rng(8))
    assert acc == pytest.approx(expected, abs=3.0)


def test_evaluate_single_sample():
    model = binary_model()
    acc = evaluate(model, "binary", 5, 1, np.random.default_rng(3))
    assert acc in (0.0, 100.0)


def test_predict_threshold_and_tiebreak():
    m = binary_model(v=1.0)
    h = np.array([-1.0, 0.0, 1.0])
    assert predict(m, h).tolist() == [0, 0, 1]  # logit exactly 0 is nonpos
    t = Model(
        cell=LrnParams(0.0, 0.0, 0.0, 0.0),
        head=TernaryHead(v=(0.0, 0.0, 0.0), c=(0.5, 0.5, 0.0)),
        bias_mode="off",
    )
    # tie between the first two classes resolves to the lowest index
    assert predict(t, np.array([1.0])).tolist() == [0]
