"""Shared fixtures: small deterministic dataset builds and model handles.

The heavier builds are session-scoped so the acceptance criteria and the
module tests share them instead of re-solving the same trajectories.
"""

import numpy as np
import pytest

from molforge.dataset import BuildConfig, build_dataset, load_samples
from molforge.model import build_model
from molforge.tokenizer import Vocab

# Mixed-class subset: two families per ODE class, the spectral-PDE
# extrapolation families, and one family per conservation-law label kind.
MIXED_FAMILIES = (2, 6, 8, 13, 19, 24, 25, 29, 30, 35, 44)


@pytest.fixture(scope="session")
def mixed_data(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds_mixed")
    cfg = BuildConfig(out_dir=str(out), master_seed=7, n_params=2, n_ics=2,
                      n_ood_params=1, n_ood_ics=2, families=MIXED_FAMILIES)
    manifest = build_dataset(cfg)
    return out, manifest


@pytest.fixture(scope="session")
def mixed_vocab(mixed_data):
    out, _ = mixed_data
    return Vocab.from_json((out / "vocab.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def mixed_samples(mixed_data):
    out, _ = mixed_data
    return {split: list(load_samples(str(out), split))
            for split in ("train", "id", "ood20", "ood30")}


@pytest.fixture(scope="session")
def small_model(mixed_vocab):
    """A scaled-down model: fast enough for per-test forward passes."""
    return build_model(mixed_vocab, seed=0, d_model=32, heads=2,
                       backbone_layers=2, decoder_layers=1)


def finite_difference_grads(fn, params, h=1e-5):
    """Central finite differences of a scalar-valued fn over Tensors."""
    grads = []
    for p in params:
        g = np.zeros_like(p.data, dtype=np.float64)
        it = np.nditer(p.data, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p.data[idx]
            p.data[idx] = orig + h
            fp = fn()
            p.data[idx] = orig - h
            fm = fn()
            p.data[idx] = orig
            g[idx] = (fp - fm) / (2 * h)
        grads.append(g)
    return grads


def gradcheck(fn, params, h=1e-5, tol=1e-4):
    """Compare reverse-mode grads against central differences.

    The comparison is a per-parameter vector-norm relative error,
    ||g_ad - g_fd|| / max(||g_fd||, 1), which is robust to roundoff on
    individual near-zero gradient components.
    """
    for p in params:
        p.zero_grad()
    loss = fn(backward=True)
    loss.backward()
    analytic = [np.array(p.grad, dtype=np.float64) for p in params]
    numeric = finite_difference_grads(lambda: float(fn().data), params, h=h)
    worst = 0.0
    for ga, gf in zip(analytic, numeric):
        denom = max(np.linalg.norm(gf), 1.0)
        worst = max(worst, np.linalg.norm(ga - gf) / denom)
    return worst
