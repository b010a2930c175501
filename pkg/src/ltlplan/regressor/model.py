"""Formula-conditioned value network.

A relational graph convolution embeds the formula AST (per-relation weights,
mean aggregation over each relation's in-neighbors, root readout), an MLP
encodes the flattened noisy trajectory, and a fusion head maps the
concatenated formula/trajectory/timestep features to a scalar. The scalar is
a satisfaction value for the regressor variant and a logit for the binary
classifier ablation; either way the guidance field is the input-gradient of
the scalar w.r.t. the trajectory.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Tape, Tensor, ops
from ..diffusion.model import Normalizer, mlp_params, sinusoidal_embedding
from ..diffusion.schedule import NoiseSchedule
from .graph import NODE_KINDS, RELATIONS, FormulaGraph

__all__ = ["ValueNet", "embed_formula"]


def _relation_matrices(graph: FormulaGraph) -> list[np.ndarray]:
    """Normalized adjacency per relation: A[dst, src] = 1 / indegree(dst)."""
    n = graph.n_nodes
    mats = []
    for src, dst in graph.edges:
        a = np.zeros((n, n))
        if len(src):
            np.add.at(a, (dst, src), 1.0)
            indeg = a.sum(axis=1, keepdims=True)
            a = np.divide(a, indeg, out=a, where=indeg > 0)
        mats.append(a)
    return mats


def _node_features(graph: FormulaGraph, atom_emb: Tensor) -> Tensor:
    n = graph.n_nodes
    onehot = np.zeros((n, len(NODE_KINDS)))
    onehot[np.arange(n), graph.kinds] = 1.0
    is_atom = (graph.atom_index >= 0).astype(float)[:, None]
    safe_idx = np.maximum(graph.atom_index, 0)
    gathered = ops.gather_rows(atom_emb, safe_idx)
    masked = ops.mul(gathered, is_atom)  # zero features (and grads) off atoms
    return ops.concat([Tensor(onehot), masked], axis=1)


def embed_formula(graph: FormulaGraph, params: dict[str, Tensor], depth: int) -> Tensor:
    """Root-node state after ``depth`` relational message-passing rounds."""
    h = _node_features(graph, params["atom_emb"])
    mats = _relation_matrices(graph)
    for layer in range(depth):
        agg = None
        for r, _ in enumerate(RELATIONS):
            term = ops.matmul(Tensor(mats[r]), ops.matmul(h, params[f"g{layer}_r{r}_w"]))
            agg = term if agg is None else ops.add(agg, term)
        h = ops.tanh(ops.add(agg, params[f"g{layer}_b"]))
    return ops.gather_rows(h, np.array([0]))


class ValueNet:
    """Scalar network over (formula graph, noisy trajectory, diffusion step)."""

    def __init__(
        self,
        horizon: int,
        dim: int,
        n_props: int,
        sched: NoiseSchedule,
        normalizer: Normalizer,
        kind: str = "regressor",
        hidden: int = 64,
        depth: int = 3,
        atom_dim: int = 8,
        traj_width: int = 128,
        time_dim: int = 64,
        rng: np.random.Generator | None = None,
        params: dict[str, Tensor] | None = None,
    ):
        if kind not in ("regressor", "classifier"):
            raise ValueError(f"unknown value-net kind {kind!r}")
        self.horizon = horizon
        self.dim = dim
        self.n_props = n_props
        self.sched = sched
        self.normalizer = normalizer
        self.kind = kind
        self.hidden = hidden
        self.depth = depth
        self.atom_dim = atom_dim
        self.traj_width = traj_width
        self.time_dim = time_dim
        if params is not None:
            self.params = params
            return
        rng = rng if rng is not None else np.random.default_rng(0)
        flat = (horizon + 1) * dim
        feat = len(NODE_KINDS) + atom_dim
        sizes = [("enc1", flat, traj_width), ("enc2", traj_width, traj_width),
                 ("fuse1", traj_width + hidden + time_dim, traj_width), ("fuse2", traj_width, 1)]
        self.params = mlp_params(rng, sizes)
        self.params["atom_emb"] = Tensor(rng.normal(0.0, 0.5, size=(n_props, atom_dim)), requires_grad=True)
        for layer in range(depth):
            fan_in = feat if layer == 0 else hidden
            scale = np.sqrt(2.0 / (fan_in + hidden))
            for r, _ in enumerate(RELATIONS):
                self.params[f"g{layer}_r{r}_w"] = Tensor(
                    rng.normal(0.0, scale, size=(fan_in, hidden)), requires_grad=True
                )
            self.params[f"g{layer}_b"] = Tensor(np.zeros((1, hidden)), requires_grad=True)

    def parameters(self) -> list[Tensor]:
        return [self.params[k] for k in sorted(self.params)]

    def embed(self, graph: FormulaGraph) -> Tensor:
        return embed_formula(graph, self.params, self.depth)

    def value_tensor(self, graph: FormulaGraph, tau_flat: Tensor, i_steps) -> Tensor:
        """(B, 1) scalar outputs; differentiable w.r.t. tau and parameters."""
        p = self.params
        batch = tau_flat.data.shape[0]
        steps = np.broadcast_to(np.asarray(i_steps), (batch,))
        h = ops.tanh(ops.affine(tau_flat, p["enc1_w"], p["enc1_b"]))
        h = ops.tanh(ops.affine(h, p["enc2_w"], p["enc2_b"]))
        femb = self.embed(graph)
        tiled = ops.matmul(Tensor(np.ones((batch, 1))), femb)
        temb = Tensor(sinusoidal_embedding(steps, self.time_dim))
        fused = ops.concat([h, tiled, temb], axis=1)
        fused = ops.tanh(ops.affine(fused, p["fuse1_w"], p["fuse1_b"]))
        return ops.affine(fused, p["fuse2_w"], p["fuse2_b"])

    def value(self, graph: FormulaGraph, tau: np.ndarray, i: int) -> np.ndarray:
        """Values for a normalized batch (B, T+1, d); returns (B,)."""
        tau = np.asarray(tau, float)
        squeeze = tau.ndim == 2
        if squeeze:
            tau = tau[None]
        out = self.value_tensor(graph, Tensor(tau.reshape(tau.shape[0], -1)), i).data[:, 0]
        return out[0] if squeeze else out

    def value_input_gradient(self, graph: FormulaGraph, tau: np.ndarray, i: int) -> np.ndarray:
        """Gradient of each sample's scalar w.r.t. its own trajectory entries.

        Summing over the batch before backward is exact because sample b's
        output does not depend on sample b' != b.
        """
        tau = np.asarray(tau, float)
        squeeze = tau.ndim == 2
        if squeeze:
            tau = tau[None]
        flat = Tensor(tau.reshape(tau.shape[0], -1), requires_grad=True)
        with Tape() as tape:
            out = ops.reduce_sum(self.value_tensor(graph, flat, i))
            tape.backward(out)
        grad = flat.grad.reshape(tau.shape)
        return grad[0] if squeeze else grad
