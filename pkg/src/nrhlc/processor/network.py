"""Band-split recurrent processor with audiogram FiLM conditioning.

Internal feature layout is (B, K, T, N): batch, band, frame, channel.
Spectrograms are (B, F, T, 2) with real and imaginary parts last.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..autodiff import LstmWeights, Tensor, as_tensor, lstm_sequence, ops
from ..dsp import StftConfig
from .bands import BandSplitSpec

HEADS = ("NR", "HLC")
AUDIOGRAM_SCALE = 105.0
N_AUDIOGRAM = 10


@dataclass(frozen=True)
class ProcessorConfig:
    n_channels: int = 16
    n_layers: int = 2
    heads: tuple = ("NR",)
    audiogram_conditioning: bool = True
    bands: BandSplitSpec = field(default_factory=BandSplitSpec.default)
    time_hidden: int | None = None   # defaults to 4N
    band_hidden: int | None = None   # per direction, defaults to 2N
    head_hidden: int | None = None   # defaults to 4N
    mask_identity_init: bool = True

    def __post_init__(self):
        heads = tuple(self.heads)
        object.__setattr__(self, "heads", heads)
        if not heads or len(set(heads)) != len(heads) or any(h not in HEADS for h in heads):
            raise ValueError(f"heads must be a non-empty subset of {HEADS}, got {heads}")
        if self.n_channels < 1 or self.n_layers < 0:
            raise ValueError("need n_channels >= 1 and n_layers >= 0")

    @property
    def n_bands(self) -> int:
        return self.bands.n_bands

    @property
    def stft(self) -> StftConfig:
        return self.bands.stft

    @property
    def h_time(self) -> int:
        return self.time_hidden or 4 * self.n_channels

    @property
    def h_band(self) -> int:
        return self.band_hidden or 2 * self.n_channels

    @property
    def h_head(self) -> int:
        return self.head_hidden or 4 * self.n_channels

    @classmethod
    def full_scale(cls, heads=("NR", "HLC")) -> "ProcessorConfig":
        return cls(n_channels=64, n_layers=6, heads=heads)

    @classmethod
    def tiny(cls, heads=("NR",), conditioning: bool = True) -> "ProcessorConfig":
        return cls(n_channels=4, n_layers=1, heads=heads, audiogram_conditioning=conditioning,
                   bands=BandSplitSpec((0.0, 2000.0, 4000.0, 8000.0)))

    def with_heads(self, heads) -> "ProcessorConfig":
        return replace(self, heads=tuple(heads))

    def to_dict(self) -> dict:
        return {"n_channels": self.n_channels, "n_layers": self.n_layers, "heads": list(self.heads),
                "audiogram_conditioning": self.audiogram_conditioning, "bands": self.bands.to_dict(),
                "time_hidden": self.time_hidden, "band_hidden": self.band_hidden,
                "head_hidden": self.head_hidden, "mask_identity_init": self.mask_identity_init}

    @classmethod
    def from_dict(cls, d: dict) -> "ProcessorConfig":
        d = dict(d)
        d["bands"] = BandSplitSpec.from_dict(d["bands"]) if "bands" in d else BandSplitSpec.default()
        d["heads"] = tuple(d.get("heads", ("NR",)))
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown processor config keys {sorted(unknown)}")
        return cls(**d)


# ----------------------------------------------------------------------------
# parameters

def _uniform(rng, fan_in, shape):
    k = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-k, k, shape)


def init_params(cfg: ProcessorConfig, rng: np.random.Generator) -> dict[str, Tensor]:
    """Fresh parameters keyed by their stable checkpoint names."""
    N, p = cfg.n_channels, {}

    def add(name, value):
        p[name] = Tensor(value, requires_grad=True, name=name)

    def add_lstm(prefix, n_in, hidden):
        for k, t in LstmWeights.init(n_in, hidden, rng).tensors().items():
            add(f"{prefix}.{k}", t.value)

    for k, w in enumerate(cfg.bands.widths):
        d = 2 * int(w)
        add(f"band_fc.{k}.norm.weight", np.ones(d))
        add(f"band_fc.{k}.norm.bias", np.zeros(d))
        add(f"band_fc.{k}.weight", _uniform(rng, d, (d, N)))
        add(f"band_fc.{k}.bias", np.zeros(N))
    if cfg.audiogram_conditioning:
        add("embed.weight", _uniform(rng, N_AUDIOGRAM, (N_AUDIOGRAM, N)))
        add("embed.bias", np.zeros(N))
    for l in range(cfg.n_layers):
        if cfg.audiogram_conditioning:
            add(f"film.{l}.weight", np.zeros((N, 2 * N)))
            add(f"film.{l}.bias", np.zeros(2 * N))
        pre = f"layer.{l}"
        add(f"{pre}.time_norm.weight", np.ones(N))
        add(f"{pre}.time_norm.bias", np.zeros(N))
        add_lstm(f"{pre}.time_lstm", N, cfg.h_time)
        add(f"{pre}.time_fc.weight", _uniform(rng, cfg.h_time, (cfg.h_time, N)))
        add(f"{pre}.time_fc.bias", np.zeros(N))
        add(f"{pre}.band_norm.weight", np.ones(N))
        add(f"{pre}.band_norm.bias", np.zeros(N))
        add_lstm(f"{pre}.band_lstm_fwd", N, cfg.h_band)
        add_lstm(f"{pre}.band_lstm_bwd", N, cfg.h_band)
        add(f"{pre}.band_fc.weight", _uniform(rng, 2 * cfg.h_band, (2 * cfg.h_band, N)))
        add(f"{pre}.band_fc.bias", np.zeros(N))
    for head in cfg.heads:
        for k, w in enumerate(cfg.bands.widths):
            pre, out = f"head.{head}.band.{k}", 4 * int(w)
            add(f"{pre}.fc1.weight", _uniform(rng, N, (N, cfg.h_head)))
            add(f"{pre}.fc1.bias", np.zeros(cfg.h_head))
            add(f"{pre}.fc2.weight", _uniform(rng, cfg.h_head, (cfg.h_head, out)))
            bias = np.zeros(out)
            if cfg.mask_identity_init:
                bias[0::4] = 1.0  # real part of the mask
            add(f"{pre}.fc2.bias", bias)
    return p


def count_params(params: dict) -> int:
    return int(sum(t.size for t in params.values()))


def expected_param_count(cfg: ProcessorConfig) -> int:
    """Closed-form parameter count, independent of init_params."""
    N, K, F = cfg.n_channels, cfg.n_bands, cfg.bands.n_bins
    lstm = lambda n_in, h: 4 * h * (n_in + h + 1)  # noqa: E731
    total = 2 * 2 * F + 2 * F * N + K * N
    if cfg.audiogram_conditioning:
        total += N_AUDIOGRAM * N + N + cfg.n_layers * (2 * N * N + 2 * N)
    per_layer = (2 * N + lstm(N, cfg.h_time) + cfg.h_time * N + N
                 + 2 * N + 2 * lstm(N, cfg.h_band) + 2 * cfg.h_band * N + N)
    total += cfg.n_layers * per_layer
    per_head = K * (N * cfg.h_head + cfg.h_head) + cfg.h_head * 4 * F + 4 * F
    return total + len(cfg.heads) * per_head


# ----------------------------------------------------------------------------
# building blocks

def linear(x, w, b) -> Tensor:
    return ops.add(ops.matmul(x, w), b)


def layer_norm(x, w, b) -> Tensor:
    return ops.add(ops.mul(ops.standardize(x), w), b)


def _lstm_weights(params, prefix) -> LstmWeights:
    return LstmWeights(params[f"{prefix}.w_ih"], params[f"{prefix}.w_hh"], params[f"{prefix}.bias"])


def band_split(spec, cfg: ProcessorConfig, params) -> Tensor:
    """(B, F, T, 2) spectrogram -> (B, K, T, N) features.

    Each band's real parts then imaginary parts form one feature vector per
    frame, which is layer-normalised and mapped to N channels.
    """
    spec = as_tensor(spec)
    if spec.ndim != 4 or spec.shape[1] != cfg.bands.n_bins or spec.shape[-1] != 2:
        raise ValueError(f"spectrogram shape {spec.shape} does not match {cfg.bands.n_bins} bins")
    B, _, T, _ = spec.shape
    xt = ops.transpose(spec, (0, 2, 3, 1))  # (B, T, 2, F)
    feats = []
    for k, (lo, hi) in enumerate(zip(cfg.bands.bounds[:-1], cfg.bands.bounds[1:])):
        band = ops.reshape(xt[..., int(lo):int(hi)], (B, T, 2 * int(hi - lo)))
        band = layer_norm(band, params[f"band_fc.{k}.norm.weight"], params[f"band_fc.{k}.norm.bias"])
        feats.append(linear(band, params[f"band_fc.{k}.weight"], params[f"band_fc.{k}.bias"]))
    return ops.stack(feats, axis=1)


def audiogram_embed(thresholds, params) -> Tensor:
    """(B, 10) thresholds in dB HL -> (B, N) embedding in (-1, 1)."""
    a = np.asarray(thresholds, dtype=np.float64) / AUDIOGRAM_SCALE
    return ops.tanh(linear(a, params["embed.weight"], params["embed.bias"]))


def film(h, e, params, layer: int) -> Tensor:
    """(1 + dgamma) * h + beta with (dgamma, beta) projected from the embedding e."""
    N = h.shape[-1]
    gb = linear(e, params[f"film.{layer}.weight"], params[f"film.{layer}.bias"])  # (B, 2N)
    B = gb.shape[0]
    gamma = ops.reshape(ops.add(gb[:, :N], 1.0), (B, 1, 1, N))
    beta = ops.reshape(gb[:, N:], (B, 1, 1, N))
    return ops.add(ops.mul(h, gamma), beta)


def dual_path_layer(h, params, layer: int) -> Tensor:
    """Residual time LSTM per band, then residual bidirectional band LSTM per frame."""
    B, K, T, N = h.shape
    pre = f"layer.{layer}"
    z = layer_norm(h, params[f"{pre}.time_norm.weight"], params[f"{pre}.time_norm.bias"])
    z = lstm_sequence(ops.reshape(z, (B * K, T, N)), _lstm_weights(params, f"{pre}.time_lstm"))
    z = linear(z, params[f"{pre}.time_fc.weight"], params[f"{pre}.time_fc.bias"])
    h = ops.add(h, ops.reshape(z, (B, K, T, N)))

    hb = ops.transpose(h, (0, 2, 1, 3))  # (B, T, K, N)
    z = layer_norm(hb, params[f"{pre}.band_norm.weight"], params[f"{pre}.band_norm.bias"])
    z = ops.reshape(z, (B * T, K, N))
    z = ops.concat([lstm_sequence(z, _lstm_weights(params, f"{pre}.band_lstm_fwd")),
                    lstm_sequence(z, _lstm_weights(params, f"{pre}.band_lstm_bwd"), reverse=True)], axis=-1)
    z = linear(z, params[f"{pre}.band_fc.weight"], params[f"{pre}.band_fc.bias"])
    hb = ops.add(hb, ops.reshape(z, (B, T, K, N)))
    return ops.transpose(hb, (0, 2, 1, 3))


def mask_estimate(h, head: str, cfg: ProcessorConfig, params) -> tuple[Tensor, Tensor]:
    """(B, K, T, N) -> complex mask and residual, each (B, F, T, 2)."""
    if head not in cfg.heads:
        raise ValueError(f"unknown head {head!r}; configured heads are {cfg.heads}")
    B, K, T, _ = h.shape
    outs = []
    for k, w in enumerate(cfg.bands.widths):
        pre = f"head.{head}.band.{k}"
        z = ops.tanh(linear(h[:, k], params[f"{pre}.fc1.weight"], params[f"{pre}.fc1.bias"]))
        z = linear(z, params[f"{pre}.fc2.weight"], params[f"{pre}.fc2.bias"])  # (B, T, 4w)
        outs.append(ops.reshape(z, (B, T, int(w), 4)))
    full = ops.transpose(ops.concat(outs, axis=2), (0, 2, 1, 3))  # (B, F, T, 4)
    return full[..., 0:2], full[..., 2:4]


def apply_mask(X, mask, residual) -> Tensor:
    """Complex M * X + R on (..., 2) real/imag tensors."""
    xr, xi = X[..., 0], X[..., 1]
    mr, mi = mask[..., 0], mask[..., 1]
    yr = ops.add(ops.sub(ops.mul(mr, xr), ops.mul(mi, xi)), residual[..., 0])
    yi = ops.add(ops.add(ops.mul(mr, xi), ops.mul(mi, xr)), residual[..., 1])
    return ops.stack([yr, yi], axis=-1)


def _check_audiograms(cfg: ProcessorConfig, audiograms, batch: int):
    if not cfg.audiogram_conditioning:
        if audiograms is not None:
            raise ValueError("this processor is not audiogram-conditioned; pass audiograms=None")
        return None
    if audiograms is None:
        raise ValueError("this processor is audiogram-conditioned and needs an audiogram")
    thr = np.asarray(getattr(audiograms, "thresholds", audiograms), dtype=np.float64)
    if thr.ndim == 1:
        thr = np.broadcast_to(thr, (batch, thr.size))
    if thr.shape != (batch, N_AUDIOGRAM):
        raise ValueError(f"audiograms must be ({batch}, {N_AUDIOGRAM}), got {thr.shape}")
    return thr


def forward(params, cfg: ProcessorConfig, x, audiograms=None) -> dict[str, Tensor]:
    """Process signals x (B, n) or (n,); returns {head: output with x's shape}."""
    x = as_tensor(x)
    single = x.ndim == 1
    if single:
        x = ops.reshape(x, (1, x.shape[0]))
    B, n = x.shape
    thr = _check_audiograms(cfg, audiograms, B)
    X = ops.stft(x, cfg.stft)  # (B, F, T, 2)
    h = band_split(X, cfg, params)
    e = audiogram_embed(thr, params) if thr is not None else None
    for l in range(cfg.n_layers):
        if e is not None:
            h = film(h, e, params, l)
        h = dual_path_layer(h, params, l)
    out = {}
    for head in cfg.heads:
        y = ops.istft(apply_mask(X, *mask_estimate(h, head, cfg, params)), n, cfg.stft)
        out[head] = ops.reshape(y, (n,)) if single else y
    return out


class Processor:
    """Config plus parameters; thin convenience wrapper over `forward`."""

    def __init__(self, cfg: ProcessorConfig, params: dict | None = None, seed: int = 0):
        self.cfg = cfg
        self.params = params if params is not None else init_params(cfg, np.random.default_rng(seed))
        expected = set(init_param_names(cfg))
        if set(self.params) != expected:
            missing, extra = expected - set(self.params), set(self.params) - expected
            raise ValueError(f"parameter names do not match config (missing {sorted(missing)[:3]}, "
                             f"unexpected {sorted(extra)[:3]})")

    def __call__(self, x, audiograms=None) -> dict[str, Tensor]:
        return forward(self.params, self.cfg, x, audiograms)

    @property
    def n_params(self) -> int:
        return count_params(self.params)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: t.value for k, t in self.params.items()}

    @classmethod
    def from_state(cls, cfg: ProcessorConfig, arrays: dict) -> "Processor":
        params = {k: Tensor(np.array(v, dtype=np.float64), requires_grad=True, name=k) for k, v in arrays.items()}
        shapes = {k: t.shape for k, t in init_params(cfg, np.random.default_rng(0)).items()}
        for k, t in params.items():
            if k in shapes and shapes[k] != t.shape:
                raise ValueError(f"parameter {k} has shape {t.shape}, config expects {shapes[k]}")
        return cls(cfg, params)


def init_param_names(cfg: ProcessorConfig) -> list[str]:
    return list(init_params(cfg, np.random.default_rng(0)))
