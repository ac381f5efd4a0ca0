from __future__ import annotations

import numpy as np
import pytest

from swcaptcha.audio import AudioClip, rms_envelope
from swcaptcha.sinewave import (
    ClipTooShortError,
    FormantTrack,
    SineWaveParams,
    analyze_formants,
    render_sinewave,
    synthesize,
)

from conftest import sine_clip


def fft_peaks(samples: np.ndarray, rate: int, n_peaks: int) -> list[float]:
    """Independent oracle: strongest spectral peaks of the whole signal."""
    spec = np.abs(np.fft.rfft(samples * np.hanning(len(samples))))
    freqs = np.fft.rfftfreq(len(samples), 1.0 / rate)
    order = np.argsort(spec)[::-1]
    peaks: list[float] = []
    for idx in order:
        f = freqs[idx]
        if all(abs(f - p) > 100.0 for p in peaks):
            peaks.append(float(f))
        if len(peaks) == n_peaks:
            break
    return sorted(peaks)


class TestParams:
    def test_defaults_valid(self):
        p = SineWaveParams()
        assert p.window_size == 512 and p.hop_length == 160
        assert p.num_formants == 4 and p.lpc_order == 12

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"window_size": 100, "hop_length": 80},
            {"num_formants": 0},
            {"num_formants": 9},
            {"num_formants": 4, "lpc_order": 9},
            {"pre_emphasis": 1.0},
        ],
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            SineWaveParams(**kwargs)


class TestAnalyze:
    def test_pure_440_single_partial(self):
        clip = sine_clip(440.0, 0.5)
        # oracle first: the FFT peak of these frames must itself be at 440
        oracle = fft_peaks(clip.samples, clip.sample_rate, 1)[0]
        assert abs(oracle - 440.0) < 16.0
        track = analyze_formants(clip, SineWaveParams(num_formants=1, lpc_order=8))
        voiced = track.frames[track.frames[:, 0, 1] > 0]
        assert voiced.shape[0] > 0
        assert np.all(np.abs(voiced[:, 0, 0] - 440.0) <= 20.0)

    def test_silence_all_zero_amplitude(self):
        track = analyze_formants(AudioClip(np.zeros(16000), 16000), SineWaveParams())
        assert np.all(track.frames[:, :, 1] == 0.0)

    def test_two_tone_two_partials(self):
        rate = 16000
        t = np.arange(rate) / rate
        clip = AudioClip(0.4 * np.sin(2 * np.pi * 500 * t) + 0.4 * np.sin(2 * np.pi * 1500 * t), rate)
        oracle = fft_peaks(clip.samples, rate, 2)
        assert abs(oracle[0] - 500.0) < 16.0 and abs(oracle[1] - 1500.0) < 16.0
        track = analyze_formants(clip, SineWaveParams(num_formants=2, lpc_order=8))
        voiced = track.frames[track.frames[:, :, 1].sum(axis=1) > 0]
        assert np.all(np.abs(voiced[:, 0, 0] - 500.0) <= 30.0)
        assert np.all(np.abs(voiced[:, 1, 0] - 1500.0) <= 30.0)

    def test_too_short_clip(self):
        with pytest.raises(ClipTooShortError):
            analyze_formants(AudioClip(np.zeros(100), 16000), SineWaveParams())

    def test_frames_sorted_with_k_partials(self, bundled_corpus):
        track = analyze_formants(bundled_corpus.entries[0].clip, SineWaveParams())
        assert track.frames.shape[1] == 4
        freqs = track.frames[:, :, 0]
        assert np.all(np.diff(freqs, axis=1) >= 0)
        assert np.all(track.frames[:, :, 1] >= 0)
        assert np.all(track.frames[:, :, 1] <= 1.0)

    def test_track_json_round_trip(self, bundled_corpus):
        track = analyze_formants(bundled_corpus.entries[0].clip, SineWaveParams())
        back = FormantTrack.from_json(track.to_json())
        assert back.source_length == track.source_length
        assert back.sample_rate == track.sample_rate
        assert back.hop_length == track.hop_length
        assert np.allclose(back.frames, track.frames, atol=1e-4)


class TestSynthesize:
    def test_constant_440_track(self):
        frames = np.zeros((50, 1, 2))
        frames[:, 0, 0] = 440.0
        frames[:, 0, 1] = 0.8
        track = FormantTrack(frames=frames, hop_length=160, source_length=8000, sample_rate=16000)
        out = synthesize(track)
        assert len(out) == 8000
        spec = np.abs(np.fft.rfft(out.samples))
        peak = np.fft.rfftfreq(8000, 1 / 16000)[int(np.argmax(spec))]
        assert abs(peak - 440.0) <= 16000 / 8000  # within one FFT bin
        assert np.isclose(np.max(np.abs(out.samples)), 0.9)

    def test_all_zero_amplitudes(self):
        frames = np.zeros((10, 2, 2))
        frames[:, 0, 0] = 300.0
        frames[:, 1, 0] = 1000.0
        track = FormantTrack(frames=frames, hop_length=160, source_length=2000, sample_rate=16000)
        out = synthesize(track)
        assert len(out) == 2000
        assert np.all(out.samples == 0.0)

    def test_no_phase_reset_clicks(self, bundled_corpus):
        track = analyze_formants(bundled_corpus.entries[0].clip, SineWaveParams())
        out = synthesize(track)
        f_max = float(track.frames[:, :, 0].max())
        bound = 2 * np.pi * f_max / track.sample_rate * 1.1
        assert float(np.max(np.abs(np.diff(out.samples)))) <= bound


class TestRender:
    def test_silence_renders_silence(self):
        out = render_sinewave(AudioClip(np.zeros(16000), 16000), SineWaveParams())
        assert np.all(out.samples == 0.0)
        assert len(out) == 16000

    def test_length_preserved(self, bundled_corpus):
        clip = bundled_corpus.entries[0].clip
        out = render_sinewave(clip, SineWaveParams())
        assert len(out) == len(clip)
        assert out.sample_rate == clip.sample_rate

    def test_deterministic(self, bundled_corpus):
        clip = bundled_corpus.entries[1].clip
        a = render_sinewave(clip, SineWaveParams())
        b = render_sinewave(clip, SineWaveParams())
        assert np.array_equal(a.samples, b.samples)

    def test_sparsity_on_bundled_clip(self, bundled_corpus):
        """>= 80% of each non-silent frame's energy near the k partials."""
        params = SineWaveParams()
        clip = bundled_corpus.entries[0].clip
        track = analyze_formants(clip, params)
        out = synthesize(track)
        ratios = band_energy_ratios(out, track, params)
        assert ratios, "no non-silent frames found"
        assert min(ratios) >= 0.8

    def test_envelope_preserved_on_bundled_clip(self, bundled_corpus):
        clip = bundled_corpus.entries[0].clip
        out = render_sinewave(clip, SineWaveParams())
        e1 = rms_envelope(clip, 400, 160).values
        e2 = rms_envelope(out, 400, 160).values
        corr = float(np.corrcoef(e1, e2)[0, 1])
        assert corr >= 0.8


def band_energy_ratios(
    rendered: AudioClip,
    track: FormantTrack,
    params: SineWaveParams,
    band_hz: float = 50.0,
    nonsilent_rms: float = 0.02,
) -> list[float]:
    """STFT oracle: per-frame fraction of energy within band_hz of partials.

    Frames quieter than nonsilent_rms (twice the analysis silence floor)
    count as silent and are skipped.
    """
    x = rendered.samples
    win, hop = params.window_size, params.hop_length
    window = np.hanning(win)
    freqs = np.fft.rfftfreq(win, 1.0 / rendered.sample_rate)
    n_frames = 1 + (len(x) - win) // hop
    ratios: list[float] = []
    for i in range(min(n_frames, track.frames.shape[0])):
        frame = x[i * hop : i * hop + win]
        if np.sqrt(np.mean(frame**2)) < nonsilent_rms:
            continue
        spec = np.abs(np.fft.rfft(frame * window)) ** 2
        total = float(spec.sum())
        mask = np.zeros(len(freqs), dtype=bool)
        for f, _a in track.frames[i]:
            mask |= np.abs(freqs - f) <= band_hz
        ratios.append(float(spec[mask].sum()) / total if total > 0 else 1.0)
    return ratios
