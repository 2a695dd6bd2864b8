"""Bipartite-graph convolution, per-node LSTM, and Beta/continuous heads.

Instances (possibly several, merged as a disjoint union) are embedded
from their parameter triplets, convolved over the normalized adjacency,
advanced through a per-node LSTM that threads state across timesteps,
and projected to per-binary-variable Beta parameters plus direct values
for continuous variables.  Everything acts per node with shared weights
or through the graph structure, so variable/constraint permutations
commute with the whole pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .errors import ShapeMismatch
from .features import NodeTriplets, build_triplets
from .milp import MilpInstance

_ACTIVATIONS = ("relu", "none")


@dataclass
class ModelConfig:
    """Architecture knobs; defaults sit in the small end of the usual ranges."""

    feature_dim: int = 8  # width of the triplet embedding
    gcn_layers: int = 2
    gcn_width: int = 8
    lstm_layers: int = 1
    lstm_width: int = 16
    feature_activation: str = "relu"
    gcn_activation: str = "relu"
    gcn_layer_norm: bool = True
    seed: int = 0

    def validate(self) -> None:
        if min(self.feature_dim, self.gcn_width, self.lstm_width) <= 0:
            raise ValueError("widths must be positive")
        if self.gcn_layers < 1 or self.lstm_layers < 1:
            raise ValueError("need at least one GCN and one LSTM layer")
        if self.feature_activation not in _ACTIVATIONS or self.gcn_activation not in _ACTIVATIONS:
            raise ValueError(f"activations must be one of {_ACTIVATIONS}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        config = cls(**data)
        config.validate()
        return config


@dataclass(frozen=True)
class ModelOutput:
    """Per-instance predictions: Beta parameters and continuous values."""

    alpha: ad.Tensor  # (n_binary,), always >= 1
    beta: ad.Tensor  # (n_binary,), always >= 1
    z_continuous: ad.Tensor  # (n_continuous,)

    @property
    def alpha_values(self) -> np.ndarray:
        return self.alpha.value

    @property
    def beta_values(self) -> np.ndarray:
        return self.beta.value

    @property
    def continuous_values(self) -> np.ndarray:
        return self.z_continuous.value


@dataclass(frozen=True)
class BatchData:
    """A disjoint union of instances prepared for one forward step.

    Node layout: all variable nodes first (member-major), then all
    constraint nodes.  `var_offsets` locate each member's variable rows.
    The union system (block-diagonal A, stacked b and c) doubles as the
    batched unsupervised-loss operand.
    """

    adjacency: sp.csr_matrix  # symmetric, so it is its own transpose
    var_triplets: np.ndarray
    var_mask: np.ndarray
    con_triplets: np.ndarray
    con_mask: np.ndarray
    instances: list[MilpInstance]
    var_offsets: np.ndarray
    n_var_nodes: int
    n_con_nodes: int
    a_union: sp.csr_matrix
    a_union_t: sp.csr_matrix
    b_union: np.ndarray
    c_union: np.ndarray


def build_normalized_adjacency(a: sp.spmatrix) -> sp.csr_matrix:
    """[[I, A'], [A, I]] scaled by D^-1/2 on both sides.

    Degrees use absolute coefficient values; self-loops keep them >= 1,
    so signed rows cannot zero a degree out.
    """
    n_rows, n_vars = a.shape
    coo = a.tocoo()
    n = n_vars + n_rows
    rows = np.concatenate([np.arange(n), coo.col, n_vars + coo.row])
    cols = np.concatenate([np.arange(n), n_vars + coo.row, coo.col])
    data = np.concatenate([np.ones(n), coo.data, coo.data])
    degrees = np.bincount(rows, weights=np.abs(data), minlength=n)
    inv_sqrt = 1.0 / np.sqrt(degrees)
    return sp.csr_matrix((data * inv_sqrt[rows] * inv_sqrt[cols], (rows, cols)), shape=(n, n))


def make_batch(
    instances: list[MilpInstance],
    triplets: list[NodeTriplets] | None = None,
    m_c: int | None = None,
    m_v: int | None = None,
) -> BatchData:
    if triplets is None:
        triplets = [build_triplets(inst, m_c, m_v) for inst in instances]
    a_union = sp.block_diag([inst.a for inst in instances], format="csr")
    var_offsets = np.concatenate([[0], np.cumsum([inst.n_vars for inst in instances])])
    return BatchData(
        adjacency=build_normalized_adjacency(a_union),
        var_triplets=np.concatenate([t.variable_triplets for t in triplets]),
        var_mask=np.concatenate([t.variable_mask for t in triplets]),
        con_triplets=np.concatenate([t.constraint_triplets for t in triplets]),
        con_mask=np.concatenate([t.constraint_mask for t in triplets]),
        instances=list(instances),
        var_offsets=var_offsets,
        n_var_nodes=int(var_offsets[-1]),
        n_con_nodes=sum(inst.n_rows for inst in instances),
        a_union=a_union,
        a_union_t=a_union.T.tocsr(),
        b_union=np.concatenate([inst.b for inst in instances]),
        c_union=np.concatenate([inst.c for inst in instances]),
    )


def _glorot(rng, fan_in, fan_out, shape=None):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape if shape is not None else (fan_in, fan_out))


class Model:
    """Holds the ParameterStore and runs forward passes."""

    def __init__(self, config: ModelConfig, store: ad.ParameterStore | None = None):
        config.validate()
        self.config = config
        self.store = store if store is not None else ad.ParameterStore()
        if not self.store.params:
            self._init_params()

    def _init_params(self):
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        add = self.store.add
        du, dx, dh = cfg.feature_dim, cfg.gcn_width, cfg.lstm_width
        add("feat/var_map/w", _glorot(rng, 3, du))
        add("feat/var_map/b", np.zeros(du))
        add("feat/con_map/w", _glorot(rng, 3, du))
        add("feat/con_map/b", np.zeros(du))
        for layer in range(cfg.gcn_layers):
            fan_in = du if layer == 0 else dx + du  # skip connections widen inputs
            add(f"gcn{layer}/w", _glorot(rng, fan_in, dx))
            add(f"gcn{layer}/b", np.zeros(dx))
            if cfg.gcn_layer_norm:
                add(f"gcn{layer}/ln_gain", np.ones(dx))
                add(f"gcn{layer}/ln_bias", np.zeros(dx))
        for layer in range(cfg.lstm_layers):
            fan_in = dx if layer == 0 else dh
            add(f"lstm{layer}/wx", _glorot(rng, fan_in, 4 * dh, (fan_in, 4 * dh)))
            add(f"lstm{layer}/wh", _glorot(rng, dh, 4 * dh, (dh, 4 * dh)))
            bias = np.zeros(4 * dh)
            bias[dh : 2 * dh] = 1.0  # forget gate starts open
            add(f"lstm{layer}/b", bias)
        head_in = dx + dh
        add("head/binary/w", _glorot(rng, head_in, 2))
        add("head/binary/b", np.zeros(2))
        add("head/continuous/w", _glorot(rng, head_in, 1))
        add("head/continuous/b", np.zeros(1))

    # -- blocks ----------------------------------------------------------

    def _activate(self, x, kind):
        return ad.relu(x) if kind == "relu" else x

    def _embed_block(self, triplets, mask, which):
        n_nodes, m, _ = triplets.shape
        w = self.store[f"feat/{which}_map/w"]
        b = self.store[f"feat/{which}_map/b"]
        if m == 0:
            return ad.constant(np.zeros((n_nodes, self.config.feature_dim)))
        flat = ad.reshape(ad.constant(triplets), (n_nodes * m, 3))
        mapped = ad.add(ad.matmul(flat, w), b)
        mapped = self._activate(mapped, self.config.feature_activation)
        mapped = ad.reshape(mapped, (n_nodes, m, self.config.feature_dim))
        masked = ad.mul(mapped, ad.constant(mask[:, :, None]))
        counts = np.maximum(mask.sum(axis=1, keepdims=True), 1.0)
        return ad.div(ad.sum_(masked, axis=1), ad.constant(counts))

    def embed_features(self, batch: BatchData) -> ad.Tensor:
        """Mean of the mapped unmasked triplets, variables then constraints."""
        u_var = self._embed_block(batch.var_triplets, batch.var_mask, "var")
        u_con = self._embed_block(batch.con_triplets, batch.con_mask, "con")
        return ad.concat([u_var, u_con], axis=0)

    def gcn_forward(self, u: ad.Tensor, adjacency: sp.spmatrix) -> ad.Tensor:
        cfg = self.config
        x = u
        for layer in range(cfg.gcn_layers):
            inp = x if layer == 0 else ad.concat([x, u], axis=1)
            h = ad.matmul(
                ad.spmatmul(adjacency, inp, matrix_t=adjacency), self.store[f"gcn{layer}/w"]
            )
            h = ad.add(h, self.store[f"gcn{layer}/b"])
            if cfg.gcn_layer_norm:
                h = ad.layer_norm(
                    h, self.store[f"gcn{layer}/ln_gain"], self.store[f"gcn{layer}/ln_bias"]
                )
            x = self._activate(h, cfg.gcn_activation)
        return x

    def state_zero(self, n_nodes: int) -> list[tuple[ad.Tensor, ad.Tensor]]:
        dh = self.config.lstm_width
        return [
            (ad.constant(np.zeros((n_nodes, dh))), ad.constant(np.zeros((n_nodes, dh))))
            for _ in range(self.config.lstm_layers)
        ]

    def lstm_step(self, state, x: ad.Tensor):
        """Standard cell applied per node; gates act on the feature axis only."""
        dh = self.config.lstm_width
        new_state = []
        inp = x
        for layer, (h_prev, c_prev) in enumerate(state):
            gates = ad.add(
                ad.add(
                    ad.matmul(inp, self.store[f"lstm{layer}/wx"]),
                    ad.matmul(h_prev, self.store[f"lstm{layer}/wh"]),
                ),
                self.store[f"lstm{layer}/b"],
            )
            i = ad.sigmoid(ad.slice_axis(gates, 1, 0, dh))
            f = ad.sigmoid(ad.slice_axis(gates, 1, dh, 2 * dh))
            g = ad.tanh(ad.slice_axis(gates, 1, 2 * dh, 3 * dh))
            o = ad.sigmoid(ad.slice_axis(gates, 1, 3 * dh, 4 * dh))
            c = ad.add(ad.mul(f, c_prev), ad.mul(i, g))
            h = ad.mul(o, ad.tanh(c))
            new_state.append((h, c))
            inp = h
        return new_state, inp

    def project_heads(self, x: ad.Tensor, h: ad.Tensor, batch: BatchData) -> list[ModelOutput]:
        """Per-variable projections; constraint-node rows are discarded.

        The GCN embedding rows enter alongside the LSTM output as a skip
        connection.
        """
        nv = batch.n_var_nodes
        feats = ad.concat([ad.slice_axis(x, 0, 0, nv), ad.slice_axis(h, 0, 0, nv)], axis=1)
        bin_raw = ad.add(ad.matmul(feats, self.store["head/binary/w"]), self.store["head/binary/b"])
        con_raw = ad.add(
            ad.matmul(feats, self.store["head/continuous/w"]), self.store["head/continuous/b"]
        )
        outputs = []
        for k, inst in enumerate(batch.instances):
            start = int(batch.var_offsets[k])
            nb, nc = inst.n_binary, inst.n_continuous
            rows = ad.slice_axis(bin_raw, 0, start, start + nb)
            alpha = ad.add(1.0, ad.softplus(ad.reshape(ad.slice_axis(rows, 1, 0, 1), (nb,))))
            beta = ad.add(1.0, ad.softplus(ad.reshape(ad.slice_axis(rows, 1, 1, 2), (nb,))))
            cont = ad.reshape(
                ad.slice_axis(con_raw, 0, start + nb, start + nb + nc), (nc,)
            )
            outputs.append(ModelOutput(alpha=alpha, beta=beta, z_continuous=cont))
        return outputs

    # -- full passes -----------------------------------------------------

    def forward_batch(self, batch: BatchData, state=None):
        n_nodes = batch.n_var_nodes + batch.n_con_nodes
        if state is None:
            state = self.state_zero(n_nodes)
        if state[0][0].shape[0] != n_nodes:
            raise ShapeMismatch("LSTM state does not match the batch node count")
        u = self.embed_features(batch)
        x = self.gcn_forward(u, batch.adjacency)
        state, h_top = self.lstm_step(state, x)
        return self.project_heads(x, h_top, batch), state

    def forward_series(self, batches: list[BatchData], state=None):
        """Thread LSTM state across timesteps; one output list per step.

        State never leaks across series: each call starts from zeros
        unless an explicit state is handed in.
        """
        outputs = []
        for batch in batches:
            step_out, state = self.forward_batch(batch, state)
            outputs.append(step_out)
        return outputs, state
