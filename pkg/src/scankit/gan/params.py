"""Network parameters, training configuration, and checkpoint container."""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass, field

import numpy as np

_MAGIC = b"SKIT"
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class EquirectImage:
    """An equirectangular panorama with pixels in [0, 1], W = 2H."""

    pixels: np.ndarray
    image_id: str = ""

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=float)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError("EquirectImage: pixels must have shape (H, W, 3)")
        if px.shape[1] != 2 * px.shape[0]:
            raise ValueError("EquirectImage: width must equal twice the height")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("EquirectImage: pixel values must lie in [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def shape_hw(self):
        return self.pixels.shape[0], self.pixels.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the desk-scale generator/discriminator pair.

    The optimization schedule (learning rates, momenta, batch size, the
    2:1 generator/discriminator cadence, and the warped-distance weight)
    is fixed; architecture widths are free knobs.
    """

    lr_g: float = 1e-4
    lr_d: float = 1e-5
    adam_betas: tuple = (0.5, 0.99)
    batch: int = 8
    gen_cycles_per_disc: int = 2
    lambda_dtw: float = 0.1
    gamma: float = 1.0
    epochs: int = 10
    seed: int = 0
    d_z: int = 32
    path_len: int = 30
    image_h: int = 64
    conv_k: int = 3
    conv_channels: tuple = (8, 16)
    conv_strides: tuple = (8, 2)
    dense_widths: tuple = (128, 64)
    gen_widths: tuple = (128, 128)
    disc_widths: tuple = (128, 64)
    non_saturating: bool = False
    max_steps: int | None = None
    val_gen_per_image: int = 4

    def __post_init__(self):
        if min(self.lr_g, self.lr_d) <= 0:
            raise ValueError("TrainConfig: learning rates must be positive")
        if self.lambda_dtw < 0:
            raise ValueError("TrainConfig: lambda_dtw must be >= 0")
        if self.batch < 1 or self.gen_cycles_per_disc < 1:
            raise ValueError("TrainConfig: batch and cycle counts must be >= 1")
        h, k = self.image_h, self.conv_k
        for s in self.conv_strides:
            if h % s:
                raise ValueError("TrainConfig: conv strides must divide the grid")
            h //= s

    @property
    def image_w(self) -> int:
        return 2 * self.image_h

    @property
    def feat_dim(self) -> int:
        return self.dense_widths[-1]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        kwargs = dict(d)
        for key in ("adam_betas", "conv_channels", "conv_strides", "dense_widths", "gen_widths", "disc_widths"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


def _layer_dims(cfg: TrainConfig):
    """(in_dim, out_dim) for every weight matrix, in a fixed name order."""
    h, w = cfg.image_h, cfg.image_w
    k2 = cfg.conv_k**2
    c1, c2 = cfg.conv_channels
    s1, s2 = cfg.conv_strides
    cells2 = (h // s1 // s2) * (w // s1 // s2)
    dims = {}
    for p in ("g", "d"):
        dims[f"{p}_feat_conv1"] = (k2 * 5, c1)
        dims[f"{p}_feat_conv2"] = (k2 * c1, c2)
        dims[f"{p}_feat_fc1"] = (cells2 * c2, cfg.dense_widths[0])
        dims[f"{p}_feat_fc2"] = (cfg.dense_widths[0], cfg.dense_widths[1])
    gin = cfg.d_z + cfg.feat_dim
    dims["g_fc1"] = (gin, cfg.gen_widths[0])
    dims["g_fc2"] = (cfg.gen_widths[0], cfg.gen_widths[1])
    dims["g_out"] = (cfg.gen_widths[1], 3 * cfg.path_len)
    din = 3 * cfg.path_len + cfg.feat_dim
    dims["d_fc1"] = (din, cfg.disc_widths[0])
    dims["d_fc2"] = (cfg.disc_widths[0], cfg.disc_widths[1])
    dims["d_out"] = (cfg.disc_widths[1], 1)
    return dims


@dataclass
class ParameterStore:
    """All weights of both networks plus per-parameter Adam accumulators."""

    cfg: TrainConfig
    params: dict = field(default_factory=dict)
    adam_m: dict = field(default_factory=dict)
    adam_v: dict = field(default_factory=dict)
    step_g: int = 0
    step_d: int = 0
    completed_epochs: int = 0

    def keys_for(self, net: str):
        """Parameter names for one network, 'g' or 'd'."""
        return [k for k in self.params if k.startswith(net + "_")]

    def check_finite(self):
        for name, value in self.params.items():
            if not np.all(np.isfinite(value)):
                raise FloatingPointError(f"non-finite parameter tensor: {name}")

    def copy_params(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}


def init_params(cfg: TrainConfig, seed: int | None = None) -> ParameterStore:
    """Seeded uniform(-a, a) init with a = 1 / sqrt(fan_in), biases included."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    store = ParameterStore(cfg)
    for name, (fan_in, fan_out) in _layer_dims(cfg).items():
        a = 1.0 / np.sqrt(fan_in)
        store.params[name + "_w"] = rng.uniform(-a, a, size=(fan_in, fan_out))
        store.params[name + "_b"] = rng.uniform(-a, a, size=fan_out)
    for k, v in store.params.items():
        store.adam_m[k] = np.zeros_like(v)
        store.adam_v[k] = np.zeros_like(v)
    return store


def save_params(store: ParameterStore, path) -> None:
    """Versioned binary container: JSON header + little-endian f32 payload."""
    names = list(store.params)
    header = {
        "format_version": _FORMAT_VERSION,
        "cfg": store.cfg.to_dict(),
        "names": names,
        "shapes": {k: list(store.params[k].shape) for k in names},
        "step_g": store.step_g,
        "step_d": store.step_d,
        "completed_epochs": store.completed_epochs,
        "sections": ["params", "adam_m", "adam_v"],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for section in ("params", "adam_m", "adam_v"):
            data = getattr(store, section) if section != "params" else store.params
            for k in names:
                fh.write(np.asarray(data[k], dtype="<f4").tobytes())


def load_params(path) -> ParameterStore:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a scankit checkpoint")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != _FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(fh.read(hlen).decode("utf-8"))
        cfg = TrainConfig.from_dict(header["cfg"])
        store = ParameterStore(
            cfg,
            step_g=header["step_g"],
            step_d=header["step_d"],
            completed_epochs=header["completed_epochs"],
        )
        for section in header["sections"]:
            target = getattr(store, section) if section != "params" else store.params
            for k in header["names"]:
                shape = tuple(header["shapes"][k])
                n = int(np.prod(shape)) if shape else 1
                buf = fh.read(4 * n)
                target[k] = np.frombuffer(buf, dtype="<f4").astype(float).reshape(shape)
    return store
