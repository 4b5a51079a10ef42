import numpy as np
import pytest

from rnmsr import diffcore as dc
from rnmsr.model import RNMSR, ModelConfig


def numeric_grad(f, arr, h=1e-5):
    """Central differences of scalar ``f()`` w.r.t. every entry of ``arr`` (mutated in place)."""
    out = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), out.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f()
        flat[i] = orig - h
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return out


def rel_error(analytic, numeric):
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-30)
    return float(np.max(np.abs(analytic - numeric)) / scale)


@pytest.fixture
def tiny_model():
    cfg = ModelConfig(dim=8, dropout=0.0, dtype="float64", init_std=0.3)
    return RNMSR(20, cfg, seed=3)


@pytest.fixture
def tiny_batch():
    prefixes = [[1, 2, 1, 3], [4], [5, 6, 7, 8, 9, 10, 11, 5]]
    targets = [3, 6, 12]
    return prefixes, targets


def loss_and_grads(model, prefixes, targets):
    params = list(model.params.values())
    dc.zero_grad(params)
    loss = model.loss(model.forward(model.batch(prefixes, targets)))
    dc.backward(loss)
    return float(loss.data)


def overfit_pairs(n_sessions=100, n_items=200, seed=0):
    """Prefix/target pairs of a small synthetic log, unfiltered, items indexed from 1."""
    from rnmsr import data, synth

    sessions = synth.synth_generate(n_sessions, n_items, 0.3, min_len=2, max_len=8, seed=seed)
    vocab = data.build_vocab(sessions)
    pairs = [p for s in sessions for p in data.sequence_split([vocab[i] for i in s.items])]
    return pairs, len(vocab)


# ---- one PASS/FAIL line per acceptance criterion at the end of the run

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    key = marker.args[0]
    failed = rep.failed or (rep.when == "call" and not rep.passed)
    if rep.when == "call" or failed:
        prev = _ACCEPTANCE.get(key, (marker.args[1], True))
        _ACCEPTANCE[key] = (prev[0], prev[1] and not failed)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key:>2}. {title}")
