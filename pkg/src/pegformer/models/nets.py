"""Forward passes for the compared precoding networks.

Edge-based models keep the state as a real tensor (batch, K, N, J): the
representation of edge (n, k) is X[:, k, n, :]. Token representations of
the user-as-token models are the flattened (N*J) rows of the same tensor.
Hybrid models carry an extra RF-chain axis in front: (batch, R, K, N, J).
"""
from __future__ import annotations

import math

import numpy as np

from ..equivariance import StructuredWeight, structured_apply
from ..numkit import ComplexMatrix, Tensor
from ..numkit import tensor as T
from ..precoding.core import effective_precoder, normalize_hybrid, normalize_power, sum_se_tensor
from .spec import ConfigError, ModelSpec

VIRTUAL_LEN = 64
VIRTUAL_RANGE = 1.0  # a_r ~ U[-VIRTUAL_RANGE, VIRTUAL_RANGE]


def edge_input(H: np.ndarray) -> np.ndarray:
    """(B, N, K) complex -> (B, K, N, 2) real with [Re h_nk, Im h_nk]."""
    X = np.stack([H.real, H.imag], axis=-1)
    return np.ascontiguousarray(X.transpose(0, 2, 1, 3))


def edge_output(X: Tensor) -> tuple[Tensor, Tensor]:
    """(B, K, N, 2) -> (Re V, Im V) each (B, N, K)."""
    return T.swapaxes(X[..., 0], -1, -2), T.swapaxes(X[..., 1], -1, -2)


def largest_divisor_at_most(n: int, cap: int) -> int:
    for h in range(min(n, cap), 0, -1):
        if n % h == 0:
            return h
    return 1


def sinusoidal_encoding(n_pos: int, dim: int) -> np.ndarray:
    pos = np.arange(n_pos)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / dim)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


def score_scale(spec: ModelSpec, dim: int) -> float:
    """Constant factor on attention scores / interference terms.

    "fixed" (default) divides by the score's inner-product dimension taken
    from the ModelSpec, never from the input, so the factor is a constant
    reparametrization of U^K (or U) and every permutation property and the
    size-adaptivity of the weights are untouched. "none" uses raw scores.
    """
    mode = spec.extra.get("score_norm", "fixed")
    if mode == "fixed":
        return 1.0 / dim
    if mode == "none":
        return 1.0
    raise ConfigError(f"unknown score_norm {mode!r}")


def _act(x: Tensor, last: bool) -> Tensor:
    return x if last else T.tanh(x)


class Model:
    def __init__(self, spec: ModelSpec, seed: int = 0):
        self.spec = spec
        self.seed = seed
        self.params: dict[str, Tensor] = {}
        self._rng = np.random.default_rng(seed)
        self.a: np.ndarray | None = None
        self.build()

    # ---- parameter helpers
    def _param(self, name: str, shape, fan_in: int) -> Tensor:
        bound = 1.0 / math.sqrt(fan_in)
        t = Tensor(self._rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)
        self.params[name] = t
        return t

    def _structured(self, name: str, j_out: int, j_in: int) -> StructuredWeight:
        fan = self.spec.n * j_in
        return StructuredWeight(self._param(name + ".W1", (j_out, j_in), fan),
                                self._param(name + ".W2", (j_out, j_in), fan))

    def param_list(self) -> list[Tensor]:
        return list(self.params.values())

    def param_names(self) -> list[str]:
        return list(self.params.keys())

    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.data.ravel() for p in self.params.values()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.n_params():
            raise ConfigError(f"flat vector has {flat.size} entries, model needs {self.n_params()}")
        i = 0
        for p in self.params.values():
            p.data = flat[i:i + p.size].reshape(p.shape).copy()
            i += p.size

    def zero_(self) -> "Model":
        for p in self.params.values():
            p.data = np.zeros_like(p.data)
        return self

    def build(self) -> None:
        raise NotImplementedError

    # ---- inference
    def forward(self, H: np.ndarray, a: np.ndarray | None = None):
        raise NotImplementedError

    def raw_outputs(self, H: np.ndarray, a: np.ndarray | None = None) -> dict:
        H = np.asarray(H, dtype=np.complex128)
        if H.ndim == 2:
            H = H[None]
        out = self.forward(H, a)
        if self.spec.hybrid:
            rf, bb = out
            return {"V_RF": rf.to_complex(), "V_BB": bb.to_complex()}
        Vr, Vi = out
        return {"V": Vr.data + 1j * Vi.data}

    def precode(self, H: np.ndarray, pt: float = 1.0, a: np.ndarray | None = None) -> np.ndarray:
        """Normalized (effective) N x K precoders for a batch."""
        raw = self.raw_outputs(H, a)
        if self.spec.hybrid:
            rf, bb = normalize_hybrid(raw["V_RF"], raw["V_BB"], pt)
            return effective_precoder(rf, bb)
        return normalize_power(raw["V"], pt)

    def se_tensor(self, H: np.ndarray, sigma2: float, pt: float = 1.0,
                  a: np.ndarray | None = None) -> Tensor:
        """Differentiable per-sample sum rate after output normalization."""
        out = self.forward(H, a)
        if self.spec.hybrid:
            rf, bb = normalize_hybrid(out[0], out[1], pt)
            eff = effective_precoder(rf, bb)
            return sum_se_tensor(H, eff.re, eff.im, sigma2)
        Vr, Vi = normalize_power(out, pt)
        return sum_se_tensor(H, Vr, Vi, sigma2)

    def loss(self, H: np.ndarray, sigma2: float, pt: float = 1.0, a: np.ndarray | None = None) -> Tensor:
        """Negative mean sum rate over the batch."""
        return -T.mean(self.se_tensor(H, sigma2, pt, a))

    def virtual_vector(self, nrf: int) -> np.ndarray:
        if self.a is None:
            raise ConfigError(f"{self.spec.arch} has no virtual vector")
        if nrf > self.a.size:
            raise ConfigError(f"virtual vector holds {self.a.size} entries, {nrf} requested")
        return self.a[:nrf]

    def _check_dims(self, H: np.ndarray) -> None:
        _, N, K = H.shape
        s = self.spec
        if s.max_n is not None and N > s.max_n:
            raise ConfigError(f"{s.arch} accepts at most N={s.max_n} antennas, got {N}")
        if s.max_k is not None and K > s.max_k:
            raise ConfigError(f"{s.arch} accepts at most K={s.max_k} users, got {K}")


# ======================================================================== edge GNNs


class EdgeGCN(Model):
    def build(self):
        J = self.spec.layer_widths
        self.layers = [
            (self._structured(f"l{l}.W", J[l + 1], J[l]), self._structured(f"l{l}.U", J[l + 1], J[l]))
            for l in range(len(J) - 1)
        ]

    def forward(self, H, a=None):
        X = Tensor(edge_input(H))
        for l, (W, U) in enumerate(self.layers):
            pooled = T.set_sum(X, axis=-3, keepdims=True)
            X = _act(structured_apply(W, X) + structured_apply(U, pooled), l == len(self.layers) - 1)
        return edge_output(X)


class ModelGNN(Model):
    """Taylor-expansion attention: alpha_ki = <d_k, h_i> computed per complex channel."""

    def build(self):
        J = self.spec.layer_widths
        self.layers = [
            (self._structured(f"l{l}.W", J[l + 1], J[l]), self._structured(f"l{l}.U", J[l + 1], J[l]))
            for l in range(len(J) - 1)
        ]

    @staticmethod
    def mui_term(X: Tensor, H: np.ndarray) -> Tensor:
        """sum_i alpha_ki d_i with complex pairs (2c, 2c+1) of each edge feature."""
        B, K, N, J = X.shape
        Hr = H.real[:, None]  # (B, 1, N, K)
        Hi = H.imag[:, None]
        Zr = T.transpose(X[..., 0::2], (0, 3, 1, 2))  # (B, C, K, N)
        Zi = T.transpose(X[..., 1::2], (0, 3, 1, 2))
        ar = Zr @ Hr + Zi @ Hi  # (B, C, K, K)
        ai = Zr @ Hi - Zi @ Hr
        Mr = ar @ Zr - ai @ Zi
        Mi = ar @ Zi + ai @ Zr
        M = T.stack([Mr, Mi], axis=-1)  # (B, C, K, N, 2)
        return T.reshape(T.transpose(M, (0, 2, 3, 1, 4)), (B, K, N, J))

    def forward(self, H, a=None):
        X = Tensor(edge_input(H))
        c = score_scale(self.spec, self.spec.n * self.spec.k)
        for l, (W, U) in enumerate(self.layers):
            M = self.mui_term(X, H) * c
            X = _act(structured_apply(W, X) + structured_apply(U, M), l == len(self.layers) - 1)
        return edge_output(X)


class RGNN(Model):
    """Recursive GNN: user-level processor/combiner, each antenna-equivariant."""

    def _pe_block(self, name: str, din: int, dout: int, hidden: int) -> dict:
        return {
            "A": self._param(name + ".psi_a", (din, hidden), 2 * din),
            "B": self._param(name + ".psi_b", (din, hidden), 2 * din),
            "O": self._param(name + ".psi_out", (hidden, hidden), hidden),
            "Ca": self._param(name + ".phi_a", (din, hidden), din + hidden),
            "Cb": self._param(name + ".phi_b", (hidden, hidden), din + hidden),
            "Co": self._param(name + ".phi_out", (hidden, dout), hidden),
        }

    @staticmethod
    def _pe_apply(p: dict, X: Tensor) -> Tensor:
        """y_n = phi(x_n, sum_m psi(x_n, x_m)) over the antenna axis (-2)."""
        XA = T.expand_dims(X @ p["A"], -2)  # (..., N, 1, h)
        XB = T.expand_dims(X @ p["B"], -3)  # (..., 1, N, h)
        S = T.tsum(T.tanh(XA + XB), axis=-2) @ p["O"]
        return T.tanh(X @ p["Ca"] + S @ p["Cb"]) @ p["Co"]

    def build(self):
        J = self.spec.layer_widths
        self.layers = []
        for l in range(len(J) - 1):
            jin, jout = J[l], J[l + 1]
            hid = max(jout, J[l]) if l == len(J) - 2 else jout
            q = self._pe_block(f"l{l}.q", 2 * jin, jout, hid)
            f = self._pe_block(f"l{l}.f", jin + jout, jout, hid)
            self.layers.append((q, f))

    def forward(self, H, a=None):
        X = Tensor(edge_input(H))
        for l, (q, f) in enumerate(self.layers):
            B, K, N, J = X.shape
            Xk = T.broadcast_to(T.expand_dims(X, 2), (B, K, K, N, J))
            Xi = T.broadcast_to(T.expand_dims(X, 1), (B, K, K, N, J))
            pair = self._pe_apply(q, T.concat([Xk, Xi], axis=-1))  # (B, K, K, N, jout)
            s = T.tsum(pair, axis=2)
            X = _act(self._pe_apply(f, T.concat([X, s], axis=-1)), l == len(self.layers) - 1)
        return edge_output(X)


# ======================================================================== graph transformers


def _split_heads(Y: Tensor, h: int) -> Tensor:
    """(*L, K, N, h*j) -> (*L, h, K, N*j)."""
    lead = Y.shape[:-3]
    K, N, hj = Y.shape[-3:]
    j = hj // h
    nl = len(lead)
    Y = T.reshape(Y, lead + (K, N, h, j))
    Y = T.transpose(Y, tuple(range(nl)) + (nl + 2, nl, nl + 1, nl + 3))
    return T.reshape(Y, lead + (h, K, N * j))


def _merge_heads(C: Tensor, N: int) -> Tensor:
    """(*L, h, K, N*j) -> (*L, K, N, h*j)."""
    lead = C.shape[:-3]
    h, K, Nj = C.shape[-3:]
    j = Nj // N
    nl = len(lead)
    C = T.reshape(C, lead + (h, K, N, j))
    C = T.transpose(C, tuple(range(nl)) + (nl + 1, nl + 2, nl, nl + 3))
    return T.reshape(C, lead + (K, N, h * j))


class Gformer2D(Model):
    """Graph Transformer over the antenna-user graph.

    variant "full": alpha_ki = d_k^T U^K d_i (no query, no softmax)
    variant "softmax": softmax_i((U^Q d_k)^T (U^K d_i))   [F-2D-Gformer]
    variant "no_uk": alpha_ki = d_k^T d_i
    variant "no_uv": value path uses d_i directly
    Heads per layer: the largest divisor of J^(l-1) not above spec.heads.
    """

    variant = "full"

    def build(self):
        J = self.spec.layer_widths
        self.layers = []
        for l in range(len(J) - 1):
            jin, jout = J[l], J[l + 1]
            h = largest_divisor_at_most(jin, self.spec.heads)
            w = {"h": h}
            if self.variant == "softmax":
                w["UQ"] = self._structured(f"l{l}.UQ", h * jin, jin)
            if self.variant != "no_uk":
                w["UK"] = self._structured(f"l{l}.UK", h * jin, jin)
            if self.variant != "no_uv":
                w["UV"] = self._structured(f"l{l}.UV", jin, jin)
            w["UF"] = self._structured(f"l{l}.UF", jout, jin)
            self.layers.append(w)

    def _score_scale(self, S: Tensor, j_in: int) -> Tensor:
        return S * score_scale(self.spec, self.spec.n * j_in)

    def layer(self, w: dict, X: Tensor, last: bool) -> Tensor:
        lead = X.shape[:-3]
        K, N, J = X.shape[-3:]
        h = w["h"]
        nl = len(lead)
        if self.variant == "softmax":
            Q = _split_heads(structured_apply(w["UQ"], X), h)
            Kh = _split_heads(structured_apply(w["UK"], X), h)
            S = T.softmax(self._score_scale(Q @ T.swapaxes(Kh, -1, -2), J), axis=-1)
        else:
            Xf = T.reshape(X, lead + (1, K, N * J))
            Kh = Xf if self.variant == "no_uk" else _split_heads(structured_apply(w["UK"], X), h)
            S = self._score_scale(Xf @ T.swapaxes(Kh, -1, -2), J)  # (*L, h|1, K, K)
        Vsrc = X if self.variant == "no_uv" else structured_apply(w["UV"], X)
        Vh = _split_heads(Vsrc, h)
        if S.shape[nl] != h:
            S = T.broadcast_to(S, lead + (h, K, K))
        C = _merge_heads(S @ Vh, N)
        return _act(structured_apply(w["UF"], X + C), last)

    def forward(self, H, a=None):
        X = Tensor(edge_input(H))
        for l, w in enumerate(self.layers):
            X = self.layer(w, X, l == len(self.layers) - 1)
        return edge_output(X)


class FGformer2D(Gformer2D):
    variant = "softmax"


class Gformer2DNoUK(Gformer2D):
    variant = "no_uk"


class Gformer2DNoUV(Gformer2D):
    variant = "no_uv"


# ======================================================================== hybrid (3D) models


class _Hybrid(Model):
    def build(self):
        self.a = np.random.default_rng([self.seed, 7]).uniform(-VIRTUAL_RANGE, VIRTUAL_RANGE, size=VIRTUAL_LEN)
        self.build_layers()

    def hyper_input(self, H: np.ndarray, a: np.ndarray) -> np.ndarray:
        """(B, R, K, N, 2) with [Re h_nk + a_r, Im h_nk]."""
        X = edge_input(H)[:, None]
        shift = np.zeros((a.size, 1, 1, 2))
        shift[:, 0, 0, 0] = a
        return X + shift[None]

    @staticmethod
    def readout(X: Tensor) -> tuple[ComplexMatrix, ComplexMatrix]:
        rf = T.tsum(X, axis=2)  # (B, R, N, 2): sum over users
        bb = T.transpose(T.tsum(X, axis=3), (0, 2, 1, 3))  # (B, K, R, 2): sum over antennas
        return ComplexMatrix(rf[..., 0], rf[..., 1]), ComplexMatrix(bb[..., 0], bb[..., 1])

    def forward(self, H, a=None):
        if a is None:
            a = self.virtual_vector(self.spec.nrf)
        X = Tensor(self.hyper_input(H, np.asarray(a, dtype=np.float64)))
        for l, w in enumerate(self.layers):
            X = self.layer(w, X, l == len(self.layers) - 1)
        return self.readout(X)


class Gformer3D(_Hybrid):
    """N_RF copies of one shared 2D-Gformer layer, one per RF-chain slice."""

    def build_layers(self):
        Gformer2D.build(self)

    def layer(self, w, X, last):
        return Gformer2D.layer(self, w, X, last)

    _score_scale = Gformer2D._score_scale
    variant = "full"


class EdgeGCN3D(_Hybrid):
    """Control: sum-pooling over users and RF chains, no attention."""

    def build_layers(self):
        J = self.spec.layer_widths
        self.layers = [
            {
                "W": self._structured(f"l{l}.W", J[l + 1], J[l]),
                "U": self._structured(f"l{l}.U", J[l + 1], J[l]),
                "P": self._structured(f"l{l}.P", J[l + 1], J[l]),
            }
            for l in range(len(J) - 1)
        ]

    def layer(self, w, X, last):
        users = T.set_sum(X, axis=-3, keepdims=True)
        chains = T.set_sum(X, axis=-4, keepdims=True)
        Y = (structured_apply(w["W"], X) + structured_apply(w["U"], users)
             + structured_apply(w["P"], chains))
        return _act(Y, last)


# ======================================================================== dense token models


class _Dense(Model):
    """Shared machinery for models whose weights act on whole token vectors."""

    tokens = "user"

    def _pad(self, H: np.ndarray) -> np.ndarray:
        self._check_dims(H)
        B, N, K = H.shape
        n_to = self.spec.max_n if self.tokens == "user" else N
        k_to = self.spec.max_k if self.tokens == "antenna" else K
        if (n_to, k_to) == (N, K):
            return H
        out = np.zeros((B, n_to, k_to), dtype=np.complex128)
        out[:, :N, :K] = H
        return out

    def tokens_in(self, H: np.ndarray) -> Tensor:
        X = edge_input(self._pad(H))  # (B, K, N, 2)
        B, K, N, _ = X.shape
        if self.tokens == "user":
            return Tensor(X.reshape(B, K, N * 2))
        return Tensor(X.transpose(0, 2, 1, 3).reshape(B, N, K * 2))

    def tokens_out(self, Y: Tensor, N: int, K: int):
        B, ntok, d = Y.shape
        if self.tokens == "user":
            Y = T.reshape(Y, (B, ntok, d // 2, 2))[:, :, :N]  # (B, K, N, 2)
            return edge_output(Y)
        Y = T.reshape(Y, (B, ntok, d // 2, 2))[:, :, :K]  # (B, N, K, 2)
        return Y[..., 0], Y[..., 1]

    def token_width(self) -> int:
        return self.spec.max_n if self.tokens == "user" else self.spec.max_k

    def forward(self, H, a=None):
        _, N, K = H.shape
        Y = self.tokens_in(H)
        if getattr(self.spec, "pos_enc", False):
            Y = Y + sinusoidal_encoding(Y.shape[1], Y.shape[2])
        for l, w in enumerate(self.layers):
            Y = self.layer(w, Y, l == len(self.layers) - 1)
        return self.tokens_out(Y, N, K)


class Transformer1D(_Dense):
    """Encoder-only Transformer without positional encoding (unless flagged)."""

    tokens = "user"

    def build(self):
        J = self.spec.layer_widths
        m = self.token_width()
        self.layers = []
        for l in range(len(J) - 1):
            din, dout = m * J[l], m * J[l + 1]
            h = largest_divisor_at_most(din, self.spec.heads)
            self.layers.append({
                "h": h,
                "WQ": self._param(f"l{l}.WQ", (din, din), din),
                "WK": self._param(f"l{l}.WK", (din, din), din),
                "WV": self._param(f"l{l}.WV", (din, din), din),
                "WF": self._param(f"l{l}.WF", (din, dout), din),
            })

    @staticmethod
    def _heads(Y: Tensor, h: int) -> Tensor:
        B, n, d = Y.shape
        return T.transpose(T.reshape(Y, (B, n, h, d // h)), (0, 2, 1, 3))

    def layer(self, w, Y, last):
        B, n, d = Y.shape
        h = w["h"]
        Q = self._heads(Y @ w["WQ"], h)
        Kx = self._heads(Y @ w["WK"], h)
        V = self._heads(Y @ w["WV"], h)
        S = T.softmax((Q @ T.swapaxes(Kx, -1, -2)) * score_scale(self.spec, d // h), axis=-1)
        C = T.reshape(T.transpose(S @ V, (0, 2, 1, 3)), (B, n, d))
        return _act((Y + C) @ w["WF"], last)


class Transformer1DAN(Transformer1D):
    tokens = "antenna"


class GAT(_Dense):
    """d_k' = sum_i tanh(W^Q d_k + W^K d_i) * (W^V d_i), unnormalized scores."""

    tokens = "user"

    def build(self):
        J = self.spec.layer_widths
        m = self.token_width()
        self.layers = []
        for l in range(len(J) - 1):
            din, dout = m * J[l], m * J[l + 1]
            self.layers.append({
                "WQ": self._param(f"l{l}.WQ", (din, dout), din),
                "WK": self._param(f"l{l}.WK", (din, dout), din),
                "WV": self._param(f"l{l}.WV", (din, dout), din),
            })

    def layer(self, w, Y, last):
        q = T.expand_dims(Y @ w["WQ"], 2)  # (B, K, 1, d)
        k = T.expand_dims(Y @ w["WK"], 1)  # (B, 1, K, d)
        v = T.expand_dims(Y @ w["WV"], 1)
        return T.tsum(T.tanh(q + k) * v, axis=2)


MODEL_CLASSES = {
    "edge_gcn": EdgeGCN,
    "rgnn": RGNN,
    "model_gnn": ModelGNN,
    "transformer_1d": Transformer1D,
    "transformer_1d_an": Transformer1DAN,
    "gat": GAT,
    "f_2d_gformer": FGformer2D,
    "gformer_2d": Gformer2D,
    "gformer_2d_no_uk": Gformer2DNoUK,
    "gformer_2d_no_uv": Gformer2DNoUV,
    "gformer_3d": Gformer3D,
    "edge_gcn_3d": EdgeGCN3D,
}


def build_model(spec: ModelSpec, seed: int = 0) -> Model:
    return MODEL_CLASSES[spec.arch](spec, seed)
