import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnmsr import diffcore as dc
from rnmsr import gbp
from rnmsr.model import RNMSR, ModelConfig, dump_attention
from conftest import loss_and_grads, numeric_grad, rel_error

V = 20


def flat_repeat(model):
    for k in ("W_r", "U_r", "q_r", "b_r"):
        model.params[k].data[...] = 0.0


def test_distribution_contract(tiny_model, tiny_batch):
    prefixes, _ = tiny_batch
    tr = tiny_model.forward(tiny_model.batch(prefixes))
    probs = tr.probs.data
    assert probs.shape == (3, V + 1)
    np.testing.assert_allclose(probs.sum(1), 1.0, atol=1e-9)
    assert (probs[:, 0] == 0).all()
    np.testing.assert_allclose(tr.mode.data.sum(1), 1.0, atol=1e-12)
    for b, prefix in enumerate(prefixes):
        window = set(prefix[-6:])
        outside = [v for v in range(1, V + 1) if v not in window]
        assert (tr.repeat_items.data[b, outside] == 0).all()
        assert (tr.explore.data[b, sorted(window)] == 0).all()


def test_repeat_uniform_over_distinct_items(tiny_model):
    flat_repeat(tiny_model)
    tr = tiny_model.forward([[1, 2, 3]])
    np.testing.assert_allclose(tr.repeat_items.data[0, [1, 2, 3]], [1 / 3] * 3)


def test_repeat_sums_over_positions(tiny_model):
    flat_repeat(tiny_model)
    tr = tiny_model.forward([[1, 2, 1]])
    np.testing.assert_allclose(tr.repeat_items.data[0, [1, 2]], [2 / 3, 1 / 3])


def test_repeat_ignores_positions_before_window(tiny_model):
    flat_repeat(tiny_model)
    tr = tiny_model.forward([[9, 1, 2, 3, 4, 5, 6]])
    assert tr.repeat_items.data[0, 9] == 0
    np.testing.assert_allclose(tr.repeat_items.data[0, 1:7], 1 / 6)
    # the early item is back in the explore support
    assert tr.explore.data[0, 9] > 0


def test_combine_arithmetic():
    mode = dc.Tensor([[0.7, 0.3]])
    rep = dc.Tensor([[0.0, 0.5, 0.5, 0.0]])
    exp = dc.Tensor([[0.0, 0.0, 0.0, 1.0]])
    np.testing.assert_allclose(RNMSR.combine(mode, rep, exp).data, [[0.0, 0.35, 0.35, 0.3]])


def test_single_item_prefix(tiny_model):
    tr = tiny_model.forward([[7]])
    assert tr.repeat_items.data[0, 7] == pytest.approx(1.0)
    assert tr.probs.data[0, 7] == pytest.approx(tr.p_repeat[0])


def test_long_prefix_pattern_is_known(tiny_model):
    b = tiny_model.batch([list(range(1, 16))])
    assert b.pattern_idx[0] == gbp.PatternVocab.full(6).index((1, 2, 3, 4, 5, 6))
    assert b.pattern_idx[0] != tiny_model.vocab.unk


def perturb_patterns(model):
    model.params["pattern_emb"].data += np.random.default_rng(0).normal(size=model.params["pattern_emb"].shape)


@pytest.mark.parametrize(
    "flags, mode_fixed, repeat_fixed",
    [
        ({"no_gbp_d": True}, True, False),
        ({"no_gbp_r": True}, False, True),
        ({"no_gbp": True}, True, True),
        ({}, False, False),
    ],
)
def test_pattern_ablations_cut_the_right_paths(flags, mode_fixed, repeat_fixed, tiny_batch):
    model = RNMSR(V, ModelConfig(dim=8, dropout=0.0, dtype="float64", **flags), seed=1)
    prefixes, _ = tiny_batch
    before = model.forward(prefixes)
    perturb_patterns(model)
    after = model.forward(prefixes)
    assert np.allclose(before.mode.data, after.mode.data) == mode_fixed
    assert np.allclose(before.repeat_items.data, after.repeat_items.data) == repeat_fixed
    np.testing.assert_array_equal(before.explore.data, after.explore.data)


def test_dump_attention(tiny_model):
    text = dump_attention(tiny_model, [1, 2, 1, 3])
    lines = text.splitlines()
    assert lines[0] == "pattern: A→B→A→C"
    w_r = float(lines[1].split(":")[1])
    w_e = float(lines[2].split(":")[1])
    assert w_r + w_e == pytest.approx(1.0, abs=2e-4)
    rows = lines[4:]
    assert len(rows) == 4
    assert sum(float(r.split()[3]) for r in rows) == pytest.approx(1.0, abs=1e-3)
    zero = dump_attention(tiny_model, [1, 2, 1, 3], viz_zero=True)
    assert zero != text


def test_dump_attention_marks_positions_outside_window(tiny_model):
    rows = dump_attention(tiny_model, list(range(1, 9)), raw_ids={i: f"x{i}" for i in range(1, 9)}).splitlines()[4:]
    assert [r.split()[2] for r in rows] == ["-", "-", "A", "B", "C", "D", "E", "F"]
    assert rows[0].split()[1] == "x1"
    assert float(rows[0].split()[4]) == 0.0


def test_recommend_order(tiny_model):
    recs = tiny_model.recommend([1, 2, 3], topk=20)
    assert len(recs) == 20
    scores = [s for _, s in recs]
    assert scores == sorted(scores, reverse=True)
    probs = tiny_model.predict([[1, 2, 3]])[0]
    assert recs[0][0] == int(np.argmax(probs[1:])) + 1


def test_save_load_roundtrip(tiny_model, tiny_batch, tmp_path):
    prefixes, _ = tiny_batch
    tiny_model.save(tmp_path / "m.ckpt", {"note": "x"})
    back, meta = RNMSR.load(tmp_path / "m.ckpt")
    assert meta["note"] == "x"
    assert back.config == tiny_model.config
    np.testing.assert_array_equal(back.predict(prefixes), tiny_model.predict(prefixes))


def test_snapshot_restore(tiny_model, tiny_batch):
    prefixes, _ = tiny_batch
    snap = tiny_model.snapshot()
    before = tiny_model.predict(prefixes)
    tiny_model.params["item_emb"].data += 1.0
    tiny_model.restore(snap)
    np.testing.assert_array_equal(tiny_model.predict(prefixes), before)


def test_loss_examples(tiny_model, tiny_batch):
    prefixes, targets = tiny_batch
    tr = tiny_model.forward(tiny_model.batch(prefixes, targets))
    expected = -np.mean(np.log(tr.probs.data[np.arange(3), targets]))
    assert float(tiny_model.loss(tr).data) == pytest.approx(expected)


def test_full_model_gradient(tiny_model, tiny_batch):
    prefixes, targets = tiny_batch
    loss_and_grads(tiny_model, prefixes, targets)
    for name, p in tiny_model.params.items():
        analytic = p.grad.copy()
        numeric = numeric_grad(lambda: float(tiny_model.loss(tiny_model.forward(tiny_model.batch(prefixes, targets))).data), p.data)
        assert rel_error(analytic, numeric) < 1e-4, name


prefixes_st = st.lists(st.lists(st.integers(1, V), min_size=1, max_size=12), min_size=1, max_size=5)


@settings(max_examples=60, deadline=None)
@given(prefixes_st)
def test_random_inputs_are_distributions(prefixes):
    model = RNMSR(V, ModelConfig(dim=8, dropout=0.0), seed=0)
    tr = model.forward(prefixes)
    np.testing.assert_allclose(tr.probs.data.sum(1), 1.0, atol=1e-5)
    assert (tr.probs.data >= 0).all()


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(l_max=0)
    with pytest.raises(ValueError):
        ModelConfig(mlp_act="swish")


def test_gradient_at_default_init_within_absolute_tolerance(tiny_batch):
    # at std 0.1 some gradients are ~1e-7, below what relative FD error can resolve
    model = RNMSR(V, ModelConfig(dim=8, dropout=0.0, dtype="float64"), seed=3)
    prefixes, targets = tiny_batch
    loss_and_grads(model, prefixes, targets)

    def f():
        return float(model.loss(model.forward(model.batch(prefixes, targets))).data)

    for name, p in model.params.items():
        assert np.abs(p.grad - numeric_grad(f, p.data)).max() < 1e-8, name


def test_repeat_dedup_gives_one_share_per_item():
    model = RNMSR(V, ModelConfig(dim=8, dropout=0.0, dtype="float64", repeat_dedup=True), seed=0)
    flat_repeat(model)
    tr = model.forward([[1, 2, 1]])
    np.testing.assert_allclose(tr.repeat_items.data[0, [1, 2]], [0.5, 0.5])
    # only the latest occurrence carries position mass
    np.testing.assert_allclose(tr.repeat_pos.data[0], [0.0, 0.5, 0.5])
