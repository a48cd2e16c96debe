import numpy as np
import pytest

from tokdenoise.codec import Codebooks, CodecConfig, TokenMatrix
from tokdenoise.denoiser import (
    DenoiserConfig,
    DenoiserModel,
    EmbeddingRefiner,
    TokenDenoiser,
    denoise_tokens,
    er_loss,
    refine,
    teacher_force,
    token_ce_loss,
)
from tokdenoise.errors import ConfigError, CorruptionError, DegenerateInputError, DimensionError
from tokdenoise.nn import Tensor

from conftest import gradcheck


TINY_CODEC = CodecConfig(strides=(2, 2), channels=(8, 8), stem_channels=8, num_quantizers=3, codebook_size=6, latent_dim=4)
TINY = DenoiserConfig(d_model=8, td_blocks=1, er_blocks=1, num_heads=2, conv_kernel=3, ff_expansion=2, num_groups=2)


def tiny_model(rng, num_groups=2):
    cfg = DenoiserConfig(
        d_model=8, td_blocks=1, er_blocks=1, num_heads=2, conv_kernel=3, ff_expansion=2, num_groups=num_groups
    )
    codebooks = Codebooks.random(TINY_CODEC, rng)
    return DenoiserModel(cfg, TINY_CODEC, codebooks, rng)


class TestDenoiserConfig:
    def test_desk_defaults(self):
        cfg = DenoiserConfig.desk()
        assert cfg.d_model == 32
        assert cfg.td_blocks == 4
        assert cfg.er_blocks == 2
        assert cfg.num_groups == 2

    def test_paper_scale_block_counts(self):
        cfg = DenoiserConfig.paper_scale()
        assert cfg.td_blocks == 12
        assert cfg.er_blocks == 6

    def test_head_divisibility_checked(self):
        with pytest.raises(ConfigError):
            DenoiserConfig(d_model=10, num_heads=4)

    def test_even_conv_kernel_rejected(self):
        with pytest.raises(ConfigError):
            DenoiserConfig(conv_kernel=4)

    def test_nonpositive_blocks_rejected(self):
        with pytest.raises(ConfigError):
            DenoiserConfig(td_blocks=0)


class TestTokenDenoiser:
    def test_output_shape_one_distribution_per_group(self, rng):
        net = TokenDenoiser(TINY, TINY_CODEC, rng)
        y = net(Tensor(rng.normal(size=(2, 5, TINY_CODEC.latent_dim))))
        assert y.shape == (2, 5, TINY.num_groups, TINY_CODEC.codebook_size)

    def test_requires_batched_input(self, rng):
        net = TokenDenoiser(TINY, TINY_CODEC, rng)
        with pytest.raises(DimensionError):
            net(Tensor(rng.normal(size=(5, TINY_CODEC.latent_dim))))

    def test_forward_is_deterministic(self, rng):
        net = TokenDenoiser(TINY, TINY_CODEC, rng)
        x = Tensor(rng.normal(size=(1, 4, TINY_CODEC.latent_dim)))
        assert np.array_equal(net(x).data, net(x).data)


class TestEmbeddingRefiner:
    def test_concat_in_latent_out(self, rng):
        net = EmbeddingRefiner(TINY, TINY_CODEC, rng)
        y = net(Tensor(rng.normal(size=(2, 5, 2 * TINY_CODEC.latent_dim))))
        assert y.shape == (2, 5, TINY_CODEC.latent_dim)


class TestDenoiserModel:
    def test_codebook_shape_mismatch_rejected(self, rng):
        other = CodecConfig(strides=(2, 2), channels=(8, 8), stem_channels=8, num_quantizers=3, codebook_size=6, latent_dim=5)
        with pytest.raises(DimensionError):
            DenoiserModel(TINY, TINY_CODEC, Codebooks.random(other, rng), rng)

    def test_more_groups_than_stages_rejected(self, rng):
        cfg = DenoiserConfig(d_model=8, num_heads=2, num_groups=4)
        with pytest.raises(DimensionError):
            DenoiserModel(cfg, TINY_CODEC, Codebooks.random(TINY_CODEC, rng), rng)

    def test_save_load_round_trip(self, rng, tmp_path):
        model = tiny_model(rng)
        path = tmp_path / "denoiser.tdnz"
        model.save(path)
        loaded = DenoiserModel.load(path)
        assert loaded.config == model.config
        assert loaded.codec_config == model.codec_config
        assert np.array_equal(loaded.codebooks.vectors, model.codebooks.vectors)
        for a, b in zip(model.denoiser.parameters(), loaded.denoiser.parameters()):
            assert np.array_equal(a.data, b.data)
        noisy = TokenMatrix(rng.integers(0, 6, size=(5, 3)), 6)
        probs_a, tok_a = denoise_tokens(noisy, model)
        probs_b, tok_b = denoise_tokens(noisy, loaded)
        assert np.array_equal(probs_a, probs_b)
        assert np.array_equal(tok_a.tokens, tok_b.tokens)


class TestTokenCeLoss:
    def test_matches_log_softmax_oracle(self, rng):
        t, g, c = 4, 2, 6
        logits = Tensor(rng.normal(size=(t, g, c)))
        targets = rng.integers(0, c, size=(t, g))

        shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
        log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        expected = -sum(log_probs[i, j, targets[i, j]] for i in range(t) for j in range(g))

        got = token_ce_loss(logits, targets).item()
        assert abs(got - expected) / abs(expected) < 1e-10

    def test_uniform_logits_closed_form(self):
        # every row uniform over C codes: loss is exactly (T*G) * ln C
        t, g, c = 7, 2, 64
        logits = Tensor(np.zeros((t, g, c)))
        targets = np.zeros((t, g), dtype=np.int64)
        expected = t * g * np.log(c)
        assert abs(token_ce_loss(logits, targets).item() - expected) < 1e-12 * expected

    def test_accepts_token_matrix(self, rng):
        t, g, c = 3, 2, 5
        logits = Tensor(rng.normal(size=(t, g, c)))
        tm = TokenMatrix(rng.integers(0, c, size=(t, g)), c)
        assert token_ce_loss(logits, tm).item() == token_ce_loss(logits, tm.tokens).item()

    def test_target_out_of_range_is_corruption(self, rng):
        logits = Tensor(rng.normal(size=(3, 2, 5)))
        bad = np.array([[0, 1], [2, 5], [0, 0]])
        with pytest.raises(CorruptionError):
            token_ce_loss(logits, bad)

    def test_shape_mismatch_rejected(self, rng):
        logits = Tensor(rng.normal(size=(3, 2, 5)))
        with pytest.raises(DimensionError):
            token_ce_loss(logits, np.zeros((3, 3), dtype=np.int64))

    def test_gradcheck(self, rng):
        t, g, c = 3, 2, 4
        logits = Tensor(rng.normal(size=(t, g, c)), requires_grad=True)
        targets = rng.integers(0, c, size=(t, g))
        gradcheck(lambda: token_ce_loss(logits, targets), [logits], names=["logits"])


class TestErLoss:
    def test_matches_numpy_oracle(self, rng):
        t, d = 6, 4
        pred = rng.normal(size=(t, d))
        target = rng.normal(size=(t, d))
        delta = pred - target
        expected = np.abs(delta).sum() + np.sqrt((delta**2).sum())
        got = er_loss(Tensor(pred), Tensor(target)).item()
        assert abs(got - expected) / expected < 1e-10

    def test_zero_at_exact_match(self, rng):
        x = rng.normal(size=(4, 3))
        assert er_loss(Tensor(x.copy()), Tensor(x.copy())).item() == 0.0

    def test_shape_mismatch_rejected(self, rng):
        with pytest.raises(DimensionError):
            er_loss(Tensor(rng.normal(size=(4, 3))), Tensor(rng.normal(size=(3, 4))))

    def test_requires_2d(self, rng):
        with pytest.raises(DimensionError):
            er_loss(Tensor(rng.normal(size=(2, 4, 3))), Tensor(rng.normal(size=(2, 4, 3))))

    def test_gradcheck_away_from_kinks(self, rng):
        # keep |delta| well off zero where the L1 subgradient jumps
        pred = Tensor(rng.normal(size=(3, 4)) + 3.0, requires_grad=True)
        target = Tensor(rng.normal(size=(3, 4)) - 3.0)
        gradcheck(lambda: er_loss(pred, target), [pred], names=["pred"])


class TestTeacherForce:
    def test_p_zero_keeps_predictions(self, rng):
        pred = TokenMatrix(rng.integers(0, 6, size=(10, 2)), 6)
        clean = TokenMatrix(rng.integers(0, 6, size=(10, 2)), 6)
        out = teacher_force(pred, clean, 0.0, seed=1)
        assert np.array_equal(out.tokens, pred.tokens)

    def test_p_one_returns_clean(self, rng):
        pred = TokenMatrix(rng.integers(0, 6, size=(10, 2)), 6)
        clean = TokenMatrix(rng.integers(0, 6, size=(10, 2)), 6)
        out = teacher_force(pred, clean, 1.0, seed=1)
        assert np.array_equal(out.tokens, clean.tokens)

    def test_half_rate_within_binomial_bound(self, rng):
        n = 4000
        pred = TokenMatrix(np.zeros((n, 2), dtype=np.int64), 6)
        clean = TokenMatrix(np.ones((n, 2), dtype=np.int64), 6)
        out = teacher_force(pred, clean, 0.5, seed=9)
        frac = (out.tokens == 1).mean()
        # 2n Bernoulli(0.5) draws: five sigma is 5/(2*sqrt(2n))
        assert abs(frac - 0.5) < 5.0 / (2.0 * np.sqrt(2.0 * n))

    def test_same_seed_same_mask(self, rng):
        pred = TokenMatrix(rng.integers(0, 6, size=(20, 2)), 6)
        clean = TokenMatrix(rng.integers(0, 6, size=(20, 2)), 6)
        a = teacher_force(pred, clean, 0.5, seed=4)
        b = teacher_force(pred, clean, 0.5, seed=4)
        assert np.array_equal(a.tokens, b.tokens)

    def test_probability_validated(self, rng):
        pred = TokenMatrix(np.zeros((2, 2), dtype=np.int64), 6)
        with pytest.raises(ConfigError):
            teacher_force(pred, pred, 1.5, seed=0)

    def test_shape_mismatch_rejected(self, rng):
        a = TokenMatrix(np.zeros((2, 2), dtype=np.int64), 6)
        b = TokenMatrix(np.zeros((3, 2), dtype=np.int64), 6)
        with pytest.raises(DimensionError):
            teacher_force(a, b, 0.5, seed=0)


class TestDenoiseTokens:
    def test_shapes_and_normalized_probs(self, rng):
        model = tiny_model(rng)
        noisy = TokenMatrix(rng.integers(0, 6, size=(5, 3)), 6)
        probs, tokens = denoise_tokens(noisy, model)
        assert probs.shape == (5, 2, 6)
        assert tokens.tokens.shape == (5, 2)
        assert np.allclose(probs.sum(axis=-1), 1.0, atol=1e-12)
        assert (probs >= 0).all()

    def test_tokens_are_argmax_of_probs(self, rng):
        model = tiny_model(rng)
        noisy = TokenMatrix(rng.integers(0, 6, size=(5, 3)), 6)
        probs, tokens = denoise_tokens(noisy, model)
        assert np.array_equal(tokens.tokens, np.argmax(probs, axis=-1))

    def test_empty_input_rejected(self, rng):
        model = tiny_model(rng)
        with pytest.raises(DegenerateInputError):
            denoise_tokens(TokenMatrix(np.zeros((0, 3), dtype=np.int64), 6), model)

    def test_group_count_must_match_stages(self, rng):
        model = tiny_model(rng)
        with pytest.raises(DimensionError):
            denoise_tokens(TokenMatrix(np.zeros((4, 2), dtype=np.int64), 6), model)

    def test_deterministic(self, rng):
        model = tiny_model(rng)
        noisy = TokenMatrix(rng.integers(0, 6, size=(5, 3)), 6)
        _, a = denoise_tokens(noisy, model)
        _, b = denoise_tokens(noisy, model)
        assert np.array_equal(a.tokens, b.tokens)


class TestRefine:
    def test_output_is_latent_sequence(self, rng):
        model = tiny_model(rng)
        enhanced = TokenMatrix(rng.integers(0, 6, size=(5, 2)), 6)
        noisy = TokenMatrix(rng.integers(0, 6, size=(5, 3)), 6)
        out = refine(enhanced, noisy, model.refiner, model.codebooks)
        assert out.shape == (5, TINY_CODEC.latent_dim)

    def test_frame_count_mismatch_rejected(self, rng):
        model = tiny_model(rng)
        enhanced = TokenMatrix(rng.integers(0, 6, size=(4, 2)), 6)
        noisy = TokenMatrix(rng.integers(0, 6, size=(5, 3)), 6)
        with pytest.raises(DimensionError):
            refine(enhanced, noisy, model.refiner, model.codebooks)

    def test_pure_function_of_inputs(self, rng):
        model = tiny_model(rng)
        enhanced = TokenMatrix(rng.integers(0, 6, size=(5, 2)), 6)
        noisy = TokenMatrix(rng.integers(0, 6, size=(5, 3)), 6)
        a = refine(enhanced, noisy, model.refiner, model.codebooks)
        b = refine(enhanced, noisy, model.refiner, model.codebooks)
        assert np.array_equal(a.data, b.data)


class TestJointGradients:
    def test_ce_reaches_denoiser_weights(self, rng):
        model = tiny_model(rng)
        x = Tensor(rng.normal(size=(1, 4, TINY_CODEC.latent_dim)))
        logits = model.denoiser(x)
        targets = rng.integers(0, 6, size=(1, 4, 2))
        loss = token_ce_loss(logits.reshape(4, 2, 6), targets[0])
        model.denoiser.zero_grad()
        loss.backward()
        grads = [p.grad for p in model.denoiser.parameters() if p.grad is not None]
        assert grads and any(np.abs(g).max() > 0 for g in grads)

    def test_er_reaches_refiner_but_not_denoiser(self, rng):
        model = tiny_model(rng)
        enhanced = TokenMatrix(rng.integers(0, 6, size=(4, 2)), 6)
        noisy = TokenMatrix(rng.integers(0, 6, size=(4, 3)), 6)
        model.refiner.zero_grad()
        model.denoiser.zero_grad()
        pred = refine(enhanced, noisy, model.refiner, model.codebooks)
        loss = er_loss(pred, Tensor(rng.normal(size=pred.shape)))
        loss.backward()
        refiner_grads = [p.grad for p in model.refiner.parameters() if p.grad is not None]
        assert refiner_grads and any(np.abs(g).max() > 0 for g in refiner_grads)
        assert all(p.grad is None or not np.abs(p.grad).any() for p in model.denoiser.parameters())
