import json

import numpy as np
import pytest

from tokdenoise.audio import SAMPLE_RATE, AudioClip
from tokdenoise.codec import CodecConfig, CodecModel
from tokdenoise.codec.training import train_codec
from tokdenoise.denoiser import DenoiserConfig, DenoiserModel
from tokdenoise.errors import ConfigError, DegenerateInputError, DimensionError
from tokdenoise.nn import Tensor
from tokdenoise.pipeline import (
    SI_SNR_CAP_DB,
    TrainConfig,
    ablate_groups,
    ablation_table,
    encode_split_tokens,
    enhance,
    evaluate,
    flops_estimate,
    joint_step_loss,
    log_spectral_distance,
    si_snr,
    token_accuracy,
    total_loss,
    train_denoiser,
)


class TestSiSnr:
    def test_perfect_reconstruction_hits_cap(self, rng):
        x = rng.normal(size=2000)
        assert si_snr(x.copy(), x.copy()) == SI_SNR_CAP_DB

    def test_scaled_copy_hits_cap(self, rng):
        x = rng.normal(size=2000)
        assert si_snr(3.7 * x, x) == SI_SNR_CAP_DB

    def test_scale_invariance(self, rng):
        ref = rng.normal(size=2000)
        est = ref + 0.3 * rng.normal(size=2000)
        assert abs(si_snr(2.5 * est, ref) - si_snr(est, ref)) < 1e-9

    def test_equal_power_orthogonal_noise_is_zero_db(self, rng):
        ref = rng.normal(size=4000)
        ref -= ref.mean()
        w = rng.normal(size=4000)
        w -= w.mean()
        w -= (w @ ref) / (ref @ ref) * ref  # exactly orthogonal
        est = ref + w * np.linalg.norm(ref) / np.linalg.norm(w)
        assert abs(si_snr(est, ref)) < 1e-6

    def test_known_noise_level_exact_db(self, rng):
        ref = rng.normal(size=4000)
        ref -= ref.mean()
        w = rng.normal(size=4000)
        w -= w.mean()
        w -= (w @ ref) / (ref @ ref) * ref
        alpha = 0.1  # -20*log10(0.1) = +20 dB
        est = ref + alpha * w * np.linalg.norm(ref) / np.linalg.norm(w)
        assert abs(si_snr(est, ref) - 20.0) < 1e-6

    def test_zero_estimate_hits_negative_cap(self, rng):
        assert si_snr(np.zeros(100), rng.normal(size=100)) == -SI_SNR_CAP_DB

    def test_silent_reference_rejected(self, rng):
        with pytest.raises(DegenerateInputError):
            si_snr(rng.normal(size=100), np.zeros(100))

    def test_length_mismatch_rejected(self, rng):
        with pytest.raises(DimensionError):
            si_snr(rng.normal(size=99), rng.normal(size=100))

    def test_accepts_audio_clips(self, rng):
        x = rng.normal(size=1600) * 0.1
        a = AudioClip(x.copy())
        b = AudioClip((x + 0.01 * rng.normal(size=1600)).copy())
        assert si_snr(b, a) == si_snr(b.samples, a.samples)


class TestLogSpectralDistance:
    def test_zero_for_identical_signals(self, rng):
        x = rng.normal(size=4000)
        assert log_spectral_distance(x.copy(), x.copy()) == 0.0

    def test_constant_power_ratio_exact(self, rng):
        # doubling the waveform scales every power bin by 4: LSD = 10*log10(4)
        x = rng.normal(size=4000)
        got = log_spectral_distance(2.0 * x, x)
        assert abs(got - 10.0 * np.log10(4.0)) < 1e-6

    def test_symmetric(self, rng):
        a = rng.normal(size=4000)
        b = rng.normal(size=4000)
        assert log_spectral_distance(a, b) == pytest.approx(log_spectral_distance(b, a), abs=1e-12)

    def test_length_mismatch_rejected(self, rng):
        with pytest.raises(DimensionError):
            log_spectral_distance(rng.normal(size=999), rng.normal(size=1000))


class TestTokenAccuracy:
    def test_hand_case(self):
        from tokdenoise.codec import TokenMatrix

        pred = TokenMatrix(np.array([[1, 2], [3, 4], [5, 6], [7, 0]]), 8)
        truth = TokenMatrix(np.array([[1, 0], [3, 4], [0, 6], [7, 0]]), 8)
        acc = token_accuracy(pred, truth)
        assert np.allclose(acc, [0.75, 0.75])

    def test_shape_mismatch_rejected(self):
        from tokdenoise.codec import TokenMatrix

        a = TokenMatrix(np.zeros((4, 2), dtype=np.int64), 8)
        b = TokenMatrix(np.zeros((4, 3), dtype=np.int64), 8)
        with pytest.raises(DimensionError):
            token_accuracy(a, b)


class TestFlops:
    def test_desk_total_matches_hand_summation(self):
        # Every term written out from the layer shapes at 1 s of 16 kHz audio
        # (T frames after each stride). Convention: 2 FLOPs per multiply-add.
        t = 250
        enc = (
            2 * 16000 * 7 * 1 * 32  # stem k7
            + 2 * 8000 * 4 * 32 * 32  # s2 block, k=2s
            + 2 * 4000 * 4 * 32 * 32
            + 2 * 1000 * 8 * 32 * 64  # s4 block
            + 2 * 250 * 8 * 64 * 64
            + 2 * 250 * 3 * 64 * 32  # projection to latent width
            + 2 * t * 64 * 32 * 8  # RVQ nearest-code search, C*D per stage
        )
        dec = (
            2 * 250 * 3 * 32 * 64
            + 2 * 250 * 8 * 64 * 64
            + 2 * 1000 * 8 * 64 * 32
            + 2 * 4000 * 4 * 32 * 32
            + 2 * 8000 * 4 * 32 * 32
            + 2 * 16000 * 7 * 32 * 1
        )
        ff = 2 * (2 * t * 32 * 64)  # expand + project
        attn = 2 * (2 * t * t * 32) + 4 * (2 * t * 32 * 32)
        conv = 2 * t * 32 * 64 + 2 * t * 7 * 32 + 2 * t * 32 * 32
        block = 2 * ff + attn + conv
        den = 2 * t * 32 * 32 + 4 * block + 2 * (2 * t * 32 * 64)
        ref = 2 * t * 64 * 32 + 2 * block + 2 * t * 32 * 32
        expected = enc + dec + den + ref

        got = flops_estimate()
        assert got.total == expected == 422_432_000
        assert got.encoder_total == enc
        assert got.decoder_total == dec
        assert got.denoiser_total == den
        assert got.refiner_total == ref

    def test_strictly_increasing_in_group_count(self):
        codec = CodecConfig.desk()
        totals = [
            flops_estimate(codec, DenoiserConfig(num_groups=g)).total for g in (1, 2, 4, 8)
        ]
        assert all(b > a for a, b in zip(totals, totals[1:]))

    def test_linear_in_denoiser_depth(self):
        f4 = flops_estimate(denoiser_config=DenoiserConfig(td_blocks=4)).total
        f8 = flops_estimate(denoiser_config=DenoiserConfig(td_blocks=8)).total
        f12 = flops_estimate(denoiser_config=DenoiserConfig(td_blocks=12)).total
        assert f12 - f8 == f8 - f4

    def test_rows_sum_to_total(self):
        got = flops_estimate()
        assert sum(v for _, v in got.rows) == got.total

    def test_table_renders(self):
        text = flops_estimate().table()
        assert "total" in text and "422,432,000" in text


class TestTotalLoss:
    def test_reference_weighting(self):
        ce = Tensor(np.array(3.0))
        er = Tensor(np.array(5.0))
        assert total_loss(ce, er).item() == 3.0 + 0.5 * 5.0

    def test_custom_weights_exact(self):
        ce = Tensor(np.array(2.0))
        er = Tensor(np.array(7.0))
        assert total_loss(ce, er, lambda_ce=0.25, lambda_er=4.0).item() == 0.25 * 2.0 + 4.0 * 7.0


class TestJointStepLoss:
    def _setup(self, rng):
        codec_cfg = CodecConfig(
            strides=(2, 2), channels=(8, 8), stem_channels=8, num_quantizers=3, codebook_size=6, latent_dim=4
        )
        from tokdenoise.codec import Codebooks

        cfg = DenoiserConfig(d_model=8, td_blocks=1, er_blocks=1, num_heads=2, conv_kernel=3, num_groups=2)
        model = DenoiserModel(cfg, codec_cfg, Codebooks.random(codec_cfg, rng), rng)
        noisy = rng.integers(0, 6, size=(2, 5, 3))
        clean = rng.integers(0, 6, size=(2, 5, 3))
        return model, noisy, clean

    def test_returns_scalar_and_raw_terms(self, rng):
        model, noisy, clean = self._setup(rng)
        loss, ce, er = joint_step_loss(model, noisy, clean, TrainConfig(), rng)
        assert loss.data.shape == ()
        assert ce > 0 and er > 0

    def test_no_teacher_forcing_is_deterministic(self, rng):
        model, noisy, clean = self._setup(rng)
        a = joint_step_loss(model, noisy, clean, TrainConfig(), rng, teacher_forcing=False)
        b = joint_step_loss(model, noisy, clean, TrainConfig(), rng, teacher_forcing=False)
        assert a[0].item() == b[0].item()

    def test_gradients_reach_both_nets(self, rng):
        model, noisy, clean = self._setup(rng)
        loss, _, _ = joint_step_loss(model, noisy, clean, TrainConfig(), rng)
        model.denoiser.zero_grad()
        model.refiner.zero_grad()
        loss.backward()
        for net in (model.denoiser, model.refiner):
            assert any(p.grad is not None and np.abs(p.grad).max() > 0 for p in net.parameters())


class TestTrainConfig:
    def test_negative_weight_rejected(self):
        with pytest.raises(ConfigError):
            TrainConfig(lambda_ce=-1.0)

    def test_probability_bounds(self):
        with pytest.raises(ConfigError):
            TrainConfig(p_replace=1.5)


class TestTrainDenoiser:
    def test_history_and_loss_decrease(self, smoke_artifacts):
        history = smoke_artifacts["history"]
        assert all({"epoch", "step", "lr", "loss_ce", "loss_er", "loss"} <= set(row) for row in history)
        steps = [row["step"] for row in history]
        assert steps == list(range(1, len(history) + 1))
        first_epoch = np.mean([r["loss"] for r in history if r["epoch"] == 0])
        last_epoch = np.mean([r["loss"] for r in history if r["epoch"] == history[-1]["epoch"]])
        assert last_epoch < first_epoch

    def test_codec_untouched_by_denoiser_training(self, mini_corpus, smoke_artifacts):
        codec = CodecModel.load(smoke_artifacts["codec"])
        before = [p.data.copy() for p in codec.parameters()]
        train_denoiser(mini_corpus, codec, train=TrainConfig(epochs=1, batch_size=4, warmup_steps=2, max_clips=4))
        assert all(np.array_equal(a, p.data) for a, p in zip(before, codec.parameters()))

    def test_same_seed_reproduces_weights(self, mini_corpus, smoke_artifacts):
        codec = CodecModel.load(smoke_artifacts["codec"])
        cfg = TrainConfig(epochs=1, batch_size=4, warmup_steps=2, max_clips=4, seed=7)
        m1, h1 = train_denoiser(mini_corpus, codec, train=cfg)
        m2, h2 = train_denoiser(mini_corpus, codec, train=cfg)
        assert [r["loss"] for r in h1] == [r["loss"] for r in h2]
        for a, b in zip(m1.denoiser.parameters(), m2.denoiser.parameters()):
            assert np.array_equal(a.data, b.data)


class TestEncodeSplitTokens:
    def test_shape_and_range(self, mini_corpus, smoke_artifacts):
        from tokdenoise.audio.corpus import load_split_waveforms

        codec = CodecModel.load(smoke_artifacts["codec"])
        clips = load_split_waveforms(mini_corpus, "val", "noisy_path")
        tokens = encode_split_tokens(codec, clips)
        k = codec.config.num_quantizers
        assert tokens.shape == (clips.shape[0], clips.shape[1] // codec.config.downsample_rate, k)
        assert tokens.min() >= 0 and tokens.max() < codec.config.codebook_size


class TestEnhance:
    def test_preserves_length_and_returns_prompt(self, rng, smoke_artifacts):
        codec = CodecModel.load(smoke_artifacts["codec"])
        model = DenoiserModel.load(smoke_artifacts["denoiser"])
        noisy = AudioClip(0.1 * rng.normal(size=SAMPLE_RATE // 2))
        out, prompt = enhance(noisy, codec, model)
        assert len(out) == len(noisy)
        assert prompt.num_groups == model.config.num_groups
        assert prompt.num_frames == len(noisy) // codec.config.downsample_rate

    def test_mismatched_codebooks_rejected(self, rng, smoke_artifacts):
        codec = CodecModel.load(smoke_artifacts["codec"])
        model = DenoiserModel.load(smoke_artifacts["denoiser"])
        model.codebooks.vectors = model.codebooks.vectors + 1e-3
        with pytest.raises(ConfigError):
            enhance(AudioClip(0.1 * rng.normal(size=SAMPLE_RATE // 2)), codec, model)


class TestEvaluate:
    def test_report_rows_and_aggregate(self, smoke_artifacts, tmp_path):
        report = evaluate(
            smoke_artifacts["corpus"], smoke_artifacts["codec"], smoke_artifacts["denoiser"], split="test"
        )
        assert len(report.rows) == 3
        for row in report.rows:
            assert {"clip", "snr_db", "si_snr_noisy", "si_snr_enhanced", "si_snr_improvement", "lsd"} <= set(row)
            assert "acc_group1" in row and "acc_group2" in row
        agg = report.aggregate
        assert agg["clips"] == 3
        assert agg["chance_accuracy"] == pytest.approx(1 / 64)
        assert agg["flops_total"] > 0

        path = tmp_path / "report.jsonl"
        report.to_jsonl(path)
        lines = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(lines) == 4
        assert "aggregate" in lines[-1]
        assert report.text_table().count("\n") >= 5

    def test_parallel_matches_sequential(self, smoke_artifacts):
        seq = evaluate(
            smoke_artifacts["corpus"], smoke_artifacts["codec"], smoke_artifacts["denoiser"], split="test"
        )
        par = evaluate(
            smoke_artifacts["corpus"], smoke_artifacts["codec"], smoke_artifacts["denoiser"], split="test", jobs=2
        )
        assert seq.rows == par.rows

    def test_unknown_split_rejected(self, smoke_artifacts):
        with pytest.raises(ConfigError):
            evaluate(smoke_artifacts["corpus"], smoke_artifacts["codec"], smoke_artifacts["denoiser"], split="dev")


class TestAblation:
    def test_group_bounds_checked(self, smoke_artifacts):
        codec = CodecModel.load(smoke_artifacts["codec"])
        with pytest.raises(ConfigError):
            ablate_groups(smoke_artifacts["corpus"], codec, (0, 2))
        with pytest.raises(ConfigError):
            ablate_groups(smoke_artifacts["corpus"], codec, (2, 16))

    def test_rows_and_flops_monotone(self, smoke_artifacts):
        codec = CodecModel.load(smoke_artifacts["codec"])
        rows = ablate_groups(
            smoke_artifacts["corpus"],
            codec,
            (1, 2),
            train=TrainConfig(epochs=1, batch_size=4, warmup_steps=2, max_clips=4),
            eval_limit=2,
        )
        assert [r["groups"] for r in rows] == [1, 2]
        assert rows[1]["flops"] > rows[0]["flops"]
        assert all({"groups", "flops", "ce_per_token", "acc_group1", "si_snr_improvement"} <= set(r) for r in rows)
        assert "groups" in ablation_table(rows)
