from __future__ import annotations

from dataclasses import asdict, dataclass, field


class ConfigError(ValueError):
    pass


BASEBAND_ARCHS = (
    "edge_gcn",
    "rgnn",
    "model_gnn",
    "transformer_1d",
    "transformer_1d_an",
    "gat",
    "f_2d_gformer",
    "gformer_2d",
    "gformer_2d_no_uk",
    "gformer_2d_no_uv",
)
HYBRID_ARCHS = ("gformer_3d", "edge_gcn_3d")
ARCHS = BASEBAND_ARCHS + HYBRID_ARCHS

# which index sets each architecture is equivariant to
EQUIVARIANT_AXES = {
    "edge_gcn": ("user", "antenna"),
    "rgnn": ("user", "antenna"),
    "model_gnn": ("user", "antenna"),
    "f_2d_gformer": ("user", "antenna"),
    "gformer_2d": ("user", "antenna"),
    "gformer_2d_no_uk": ("user", "antenna"),
    "gformer_2d_no_uv": ("user", "antenna"),
    "transformer_1d": ("user",),
    "gat": ("user",),
    "transformer_1d_an": ("antenna",),
    "gformer_3d": ("user", "antenna", "rf"),
    "edge_gcn_3d": ("user", "antenna", "rf"),
}

# archs whose weight shapes are tied to N (resp. K); they zero-pad to max_n (max_k)
DENSE_IN_N = ("transformer_1d", "gat")
DENSE_IN_K = ("transformer_1d_an",)

# full-size configuration per architecture: (hidden widths, learning rate)
REFERENCE_HYPERPARAMS = {
    "edge_gcn": ((128, 128, 128, 128), 0.002),
    "model_gnn": ((32, 32, 32), 0.002),
    "rgnn": ((32, 32, 32), 0.002),
    "transformer_1d": ((32, 32, 32), 0.0005),
    "transformer_1d_an": ((32, 32, 32), 0.002),
    "gformer_2d": ((32, 32, 32), 0.002),
    "gformer_3d": ((128, 128, 128, 128), 0.005),
}
REFERENCE_HEADS = 32


@dataclass
class ModelSpec:
    """Architecture plus system dimensions.

    ``widths`` are the hidden per-edge widths; a final layer of the same form
    maps to the 2-wide (Re, Im) output without activation. ``max_n`` /
    ``max_k`` fix the padded input size of dense Transformers.
    """

    arch: str
    widths: tuple[int, ...] = (32, 32, 32)
    heads: int = 1
    n: int = 8
    k: int = 4
    nrf: int = 0
    pos_enc: bool = False
    max_n: int | None = None
    max_k: int | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        if self.arch not in ARCHS:
            raise ConfigError(f"unknown arch {self.arch!r}; expected one of {ARCHS}")
        if any(w < 1 for w in self.widths):
            raise ConfigError(f"widths must be positive, got {self.widths}")
        if self.heads < 1:
            raise ConfigError("heads must be >= 1")
        if self.n < 1 or self.k < 1:
            raise ConfigError(f"N and K must be >= 1, got N={self.n}, K={self.k}")
        if self.hybrid and self.nrf < 1:
            raise ConfigError(f"{self.arch} needs nrf >= 1")
        if self.pos_enc and self.arch != "transformer_1d":
            raise ConfigError("positional encoding is only defined for transformer_1d")
        if self.arch == "model_gnn" and any(w % 2 for w in self.widths):
            raise ConfigError("model_gnn widths must be even (pairs encode complex numbers)")
        if self.max_n is None and self.arch in DENSE_IN_N:
            self.max_n = self.n
        if self.max_k is None and self.arch in DENSE_IN_K:
            self.max_k = self.k

    @property
    def hybrid(self) -> bool:
        return self.arch in HYBRID_ARCHS

    @property
    def layer_widths(self) -> tuple[int, ...]:
        """J^(0), ..., J^(L) including the 2-wide input and output."""
        return (2,) + self.widths + (2,)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["widths"] = list(self.widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        d = dict(d)
        d["widths"] = tuple(d.get("widths", (32, 32, 32)))
        return cls(**d)


def reference_spec(arch: str, n: int, k: int, nrf: int = 0) -> tuple[ModelSpec, float]:
    """Full-size configuration and learning rate."""
    base = {"f_2d_gformer": "gformer_2d", "gformer_2d_no_uk": "gformer_2d",
            "gformer_2d_no_uv": "gformer_2d", "gat": "transformer_1d",
            "edge_gcn_3d": "gformer_3d"}.get(arch, arch)
    widths, lr = REFERENCE_HYPERPARAMS[base]
    heads = REFERENCE_HEADS if "former" in arch else 1
    return ModelSpec(arch, widths, heads, n, k, nrf), lr
