import numpy as np
import pytest

from tokdenoise.nn import Tensor


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def mini_corpus(tmp_path_factory):
    """Small rendered corpus shared by pipeline, CLI and acceptance tests."""
    from tokdenoise.audio.corpus import CorpusConfig, build_corpus

    root = tmp_path_factory.mktemp("mini_corpus")
    build_corpus(CorpusConfig(out_dir=str(root), train_clips=8, val_clips=3, test_clips=3, duration_s=0.5, seed=3))
    return root


@pytest.fixture(scope="session")
def smoke_artifacts(mini_corpus, tmp_path_factory):
    """Briefly trained codec + denoiser checkpoints over the mini corpus.

    These are deliberately undertrained; tests using them check contracts
    (shapes, formats, determinism), not quality thresholds.
    """
    from tokdenoise.codec.training import CodecTrainConfig, train_codec
    from tokdenoise.pipeline import TrainConfig, train_denoiser

    out = tmp_path_factory.mktemp("smoke_models")
    codec, codec_history = train_codec(
        mini_corpus, train=CodecTrainConfig(epochs=1, batch_size=4, warmup_steps=2)
    )
    codec_path = out / "codec.tdnz"
    codec.save(codec_path)
    model, history = train_denoiser(
        mini_corpus, codec, train=TrainConfig(epochs=2, batch_size=4, warmup_steps=2)
    )
    denoiser_path = out / "denoiser.tdnz"
    model.save(denoiser_path)
    return {
        "corpus": mini_corpus,
        "codec": codec_path,
        "denoiser": denoiser_path,
        "codec_history": codec_history,
        "history": history,
    }


def numerical_gradient(fn, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar-valued fn at x."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = fn()
        flat[i] = orig - step
        lo = fn()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def assert_grads_close(analytic: np.ndarray, numeric: np.ndarray, rel_tol: float = 1e-4, context: str = ""):
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-8)
    err = np.abs(analytic - numeric).max() / scale
    assert err <= rel_tol, f"gradient mismatch{' for ' + context if context else ''}: rel err {err:.3e}"


def gradcheck(build_loss, params: list[Tensor], step: float = 1e-5, rel_tol: float = 1e-4, names=None):
    """Compare backward() gradients of build_loss() against central differences.

    build_loss must rebuild the graph from scratch on every call (it is
    re-evaluated at perturbed parameter values).
    """
    for p in params:
        p.zero_grad()
    loss = build_loss()
    loss.backward()
    analytic = [p.grad.copy() for p in params]
    for i, p in enumerate(params):
        numeric = numerical_gradient(lambda: build_loss().item(), p.data, step=step)
        label = names[i] if names else f"param {i}"
        assert_grads_close(analytic[i], numeric, rel_tol=rel_tol, context=label)
