import numpy as np
import pytest

from nrhlc.autodiff import Tape, Tensor, backward, gradient_check, ops
from nrhlc.dsp import stft_array
from nrhlc.processor import (BandSplitSpec, Processor, ProcessorConfig, apply_mask, audiogram_embed,
                             band_split, count_params, dual_path_layer, expected_param_count, film,
                             forward, init_params, mask_estimate)

RNG = np.random.default_rng


def spec_tensor(x):
    s = stft_array(np.atleast_2d(x))
    return np.stack([s.real, s.imag], axis=-1)


def randomized(params, seed=0, scale=0.3):
    """Replace every parameter with random values so no branch is trivially zero."""
    rng = RNG(seed)
    return {k: Tensor(scale * rng.standard_normal(t.shape), requires_grad=True, name=k) for k, t in params.items()}


# ---------------------------------------------------------------------------
# band layout

def test_default_band_schedule():
    b = BandSplitSpec.default()
    assert b.n_bands == 27
    bins = [i for k in range(27) for i in b.band_bins(k)]
    assert sorted(bins) == list(range(257)) and len(bins) == len(set(bins))
    assert b.band_bins(0)[0] == 0 and b.band_bins(26)[-1] == 256
    widths_hz = np.diff(b.edges_hz)
    assert list(widths_hz) == [200.0] * 20 + [500.0] * 6 + [1000.0]


def test_band_spec_validation():
    with pytest.raises(ValueError):
        BandSplitSpec((0.0, 4000.0))
    with pytest.raises(ValueError):
        BandSplitSpec((0.0, 10.0, 20.0, 8000.0))  # second band holds no bin
    with pytest.raises(ValueError):
        BandSplitSpec((0.0, 3000.0, 2000.0, 8000.0))


# ---------------------------------------------------------------------------
# parameter counts

def test_tiny_param_count_by_hand():
    cfg = ProcessorConfig.tiny()
    # bands of 64, 64 and 129 bins; N = 4, time hidden 16, band hidden 8, head hidden 16
    band_fc = sum(2 * (2 * w) + 2 * w * 4 + 4 for w in (64, 64, 129))
    embed = 10 * 4 + 4
    film_p = 4 * 8 + 8
    time = 2 * 4 + 4 * 16 * (4 + 16 + 1) + 16 * 4 + 4
    band = 2 * 4 + 2 * 4 * 8 * (4 + 8 + 1) + 16 * 4 + 4
    head = sum(4 * 16 + 16 + 16 * 4 * w + 4 * w for w in (64, 64, 129))
    hand = band_fc + embed + film_p + time + band + head
    assert count_params(init_params(cfg, RNG(0))) == hand == expected_param_count(cfg)


@pytest.mark.parametrize("heads", [("NR",), ("HLC",), ("NR", "HLC")])
def test_full_scale_param_count(heads):
    cfg = ProcessorConfig.full_scale(heads)
    n = expected_param_count(cfg)
    assert 3.7e6 <= n <= 5.2e6


def test_param_names_follow_convention():
    names = list(init_params(ProcessorConfig.tiny(("NR", "HLC")), RNG(0)))
    for prefix in ("band_fc.0.", "embed.", "film.0.", "layer.0.time_lstm.", "layer.0.band_lstm_fwd.",
                   "head.NR.band.2.", "head.HLC.band.0."):
        assert any(n.startswith(prefix) for n in names), prefix


# ---------------------------------------------------------------------------
# blocks

def test_band_split_zero_input_gives_bias():
    cfg = ProcessorConfig.tiny()
    p = randomized(init_params(cfg, RNG(0)))
    out = band_split(np.zeros((1, 257, 5, 2)), cfg, p).value
    assert out.shape == (1, 3, 5, 4)
    for k in range(3):
        expect = p[f"band_fc.{k}.norm.bias"].value @ p[f"band_fc.{k}.weight"].value + p[f"band_fc.{k}.bias"].value
        np.testing.assert_allclose(out[0, k], np.broadcast_to(expect, (5, 4)), atol=1e-12)


def test_band_split_default_shape_and_locality():
    cfg = ProcessorConfig()
    p = init_params(cfg, RNG(1))
    X = spec_tensor(RNG(2).standard_normal(4000))
    base = band_split(X, cfg, p).value
    assert base.shape == (1, 27, X.shape[2], 16)
    X2 = X.copy()
    lo, hi = cfg.bands.bounds[5], cfg.bands.bounds[6]
    X2[:, lo:hi] *= 3.0
    changed = np.any(band_split(X2, cfg, p).value != base, axis=(0, 2, 3))
    assert list(np.flatnonzero(changed)) == [5]


def test_band_split_rejects_wrong_bins():
    cfg = ProcessorConfig.tiny()
    with pytest.raises(ValueError, match="bins"):
        band_split(np.zeros((1, 100, 4, 2)), cfg, init_params(cfg, RNG(0)))


def test_audiogram_embedding():
    cfg = ProcessorConfig.tiny()
    p = init_params(cfg, RNG(0))
    zero = {k: Tensor(np.zeros(t.shape)) for k, t in p.items()}
    assert np.all(audiogram_embed(np.zeros((1, 10)), zero).value == 0)
    e = audiogram_embed(np.array([np.full(10, 105.0), np.linspace(0, 80, 10)]), randomized(p, scale=1.0)).value
    assert np.all(np.abs(e) < 1)
    assert not np.allclose(e[0], e[1])


def test_film_identity_at_init():
    cfg = ProcessorConfig.tiny()
    p = init_params(cfg, RNG(0))
    h = RNG(1).standard_normal((2, 3, 5, 4))
    e = audiogram_embed(RNG(2).uniform(0, 100, (2, 10)), p)
    np.testing.assert_array_equal(film(h, e, p, 0).value, h)


def test_film_scale_and_shift():
    N = 4
    p = {"film.0.weight": Tensor(np.zeros((N, 2 * N))), "film.0.bias": Tensor(np.r_[np.full(N, 1.0), np.full(N, 0.5)])}
    h = RNG(3).standard_normal((1, 2, 3, N))
    np.testing.assert_allclose(film(h, np.zeros((1, N)), p, 0).value, 2 * h + 0.5)


def test_dual_path_identity_with_zero_weights():
    cfg = ProcessorConfig.tiny()
    p = {k: Tensor(np.zeros(t.shape)) for k, t in init_params(cfg, RNG(0)).items()}
    h = RNG(1).standard_normal((2, 3, 6, 4))
    np.testing.assert_array_equal(dual_path_layer(h, p, 0).value, h)


def test_time_path_is_causal():
    cfg = ProcessorConfig.tiny()
    p = randomized(init_params(cfg, RNG(0)))
    h = RNG(1).standard_normal((1, 3, 10, 4))
    h2 = h.copy()
    h2[:, :, 6:] = RNG(2).standard_normal((1, 3, 4, 4))
    a, b = dual_path_layer(h, p, 0).value, dual_path_layer(h2, p, 0).value
    np.testing.assert_array_equal(a[:, :, :6], b[:, :, :6])
    assert not np.allclose(a[:, :, 6:], b[:, :, 6:])


def test_mask_zero_weights_give_silence():
    cfg = ProcessorConfig.tiny(conditioning=False)
    p = {k: Tensor(np.zeros(t.shape)) for k, t in init_params(cfg, RNG(0)).items()}
    x = RNG(1).standard_normal(2000)
    y = forward(p, cfg, x)["NR"].value
    assert y.shape == x.shape and np.all(y == 0)
    m, r = mask_estimate(Tensor(np.zeros((1, 3, 5, 4))), "NR", cfg, p)
    assert m.shape == r.shape == (1, 257, 5, 2)
    with pytest.raises(ValueError, match="head"):
        mask_estimate(Tensor(np.zeros((1, 3, 5, 4))), "HLC", cfg, p)


def test_apply_mask_complex_product():
    rng = RNG(4)
    X, M, R = (rng.standard_normal((3, 2, 2)) for _ in range(3))
    Y = apply_mask(X, M, R).value
    expect = (M[..., 0] + 1j * M[..., 1]) * (X[..., 0] + 1j * X[..., 1]) + R[..., 0] + 1j * R[..., 1]
    np.testing.assert_allclose(Y[..., 0] + 1j * Y[..., 1], expect)


def test_heads_are_independent():
    cfg = ProcessorConfig.tiny(("NR", "HLC"))
    p = randomized(init_params(cfg, RNG(0)))
    x, a = RNG(1).standard_normal(2000), np.full(10, 40.0)
    before = forward(p, cfg, x, a)
    p2 = dict(p)
    for k in p2:
        if k.startswith("head.NR."):
            p2[k] = Tensor(p[k].value + 1.0)
    after = forward(p2, cfg, x, a)
    np.testing.assert_array_equal(before["HLC"].value, after["HLC"].value)
    assert not np.allclose(before["NR"].value, after["NR"].value)


# ---------------------------------------------------------------------------
# forward

def test_forward_single_head_and_length():
    cfg = ProcessorConfig(heads=("NR",))
    proc = Processor(cfg, seed=3)
    x = RNG(1).standard_normal((2, 3000)) * 0.1
    out = proc(x, np.zeros((2, 10)))
    assert set(out) == {"NR"}
    assert out["NR"].shape == x.shape


def test_forward_deterministic():
    cfg = ProcessorConfig.tiny(("NR", "HLC"))
    x, a = RNG(1).standard_normal(1500), np.full(10, 20.0)
    y1 = Processor(cfg, seed=5)(x, a)
    y2 = Processor(cfg, seed=5)(x, a)
    for h in cfg.heads:
        np.testing.assert_array_equal(y1[h].value, y2[h].value)


def test_forward_audiogram_contract():
    cond, plain = Processor(ProcessorConfig.tiny()), Processor(ProcessorConfig.tiny(conditioning=False))
    x = np.zeros(1000)
    with pytest.raises(ValueError, match="needs an audiogram"):
        cond(x)
    with pytest.raises(ValueError, match="not audiogram-conditioned"):
        plain(x, np.zeros(10))


def test_identity_mask_init_starts_near_passthrough():
    proc = Processor(ProcessorConfig.tiny(conditioning=False), seed=0)
    x = RNG(2).standard_normal(4000)
    zero_fc2 = dict(proc.params)
    for k in zero_fc2:
        if k.endswith("fc2.weight"):
            zero_fc2[k] = Tensor(np.zeros(zero_fc2[k].shape))
    np.testing.assert_allclose(forward(zero_fc2, proc.cfg, x)["NR"].value, x, atol=1e-12)


def test_every_parameter_gets_gradient():
    cfg = ProcessorConfig.tiny(("NR", "HLC"))
    p = randomized(init_params(cfg, RNG(0)))
    x, a = RNG(1).standard_normal(1200), np.linspace(0, 90, 10)
    with Tape():
        out = forward(p, cfg, x, a)
        grads = backward(ops.mean(ops.square(out["NR"])) + ops.mean(ops.abs(out["HLC"])))
    dead = [k for k, t in p.items() if not np.any(grads.get(t, np.zeros(1)) != 0)]
    assert dead == []


def test_processor_gradcheck_wrt_input():
    cfg = ProcessorConfig.tiny()
    p = randomized(init_params(cfg, RNG(0)))
    a = np.full(10, 30.0)
    rep = gradient_check(lambda v: ops.mean(ops.square(forward(p, cfg, v, a)["NR"])),
                         RNG(1).standard_normal(1200), n_probes=6, rng=RNG(2))
    assert rep.passed(1e-5), rep.worst


def test_processor_gradcheck_wrt_embedding():
    cfg = ProcessorConfig.tiny()
    p = randomized(init_params(cfg, RNG(0)))
    x, a = RNG(1).standard_normal(1200), np.full(10, 30.0)

    def f(w):
        q = dict(p)
        q["embed.weight"] = w
        return ops.mean(ops.square(forward(q, cfg, x, a)["NR"]))
    rep = gradient_check(f, p["embed.weight"].value, n_probes=6, rng=RNG(3))
    assert rep.passed(1e-5), rep.worst
    assert max(abs(w[1]) for w in rep.worst) > 0


def test_state_round_trip():
    cfg = ProcessorConfig.tiny(("NR", "HLC"))
    proc = Processor(cfg, seed=1)
    clone = Processor.from_state(cfg, proc.state_dict())
    x = RNG(0).standard_normal(1000)
    np.testing.assert_array_equal(proc(x, np.zeros(10))["HLC"].value, clone(x, np.zeros(10))["HLC"].value)
    with pytest.raises(ValueError):
        Processor.from_state(ProcessorConfig.tiny(("NR",)), proc.state_dict())


def test_config_dict_round_trip():
    cfg = ProcessorConfig.tiny(("NR", "HLC"))
    assert ProcessorConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError, match="unknown"):
        ProcessorConfig.from_dict({"n_chanels": 3})
    with pytest.raises(ValueError, match="heads"):
        ProcessorConfig(heads=("XX",))
