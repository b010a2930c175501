import numpy as np
import pytest

from ltlplan.autodiff import Tensor
from ltlplan.diffusion import Normalizer, cosine_schedule
from ltlplan.labeling import Circle, LabelingConfig
from ltlplan.ltlf import And, Atom, Eventually, Not, PropSet, SoftConfig, Truth, Until, evaluate_soft
from ltlplan.regressor import (
    NODE_KINDS,
    RELATIONS,
    FormulaGraph,
    RegressorTrainConfig,
    ValueNet,
    compute_targets,
    formula_to_graph,
    load_value_net,
    save_value_net,
    train_value_net,
)

PROPS = PropSet(["p0", "p1"])
LABELING = LabelingConfig(PROPS, (Circle((1.0, 1.0), 0.8), Circle((3.0, 3.0), 0.8)))


def toy_net(kind="regressor", seed=0):
    sched = cosine_schedule(8)
    norm = Normalizer(np.zeros(2), np.ones(2))
    return ValueNet(horizon=4, dim=2, n_props=2, sched=sched, normalizer=norm,
                    kind=kind, rng=np.random.default_rng(seed))


# ------------------------- graph encoding -------------------------


def test_atom_graph_single_node_self_loop():
    g = formula_to_graph(Atom(0))
    assert g.n_nodes == 1
    assert NODE_KINDS[g.kinds[0]] == "atom"
    assert g.atom_index[0] == 0
    unary, left, right, self_loop = g.edges
    assert len(unary[0]) == len(left[0]) == len(right[0]) == 0
    assert self_loop[0].tolist() == [0] and self_loop[1].tolist() == [0]


def test_not_graph_two_nodes_one_unary_edge():
    g = formula_to_graph(Not(Atom(0)))
    assert g.n_nodes == 2
    assert [NODE_KINDS[k] for k in g.kinds] == ["not", "atom"]
    unary = g.edges[RELATIONS.index("unary")]
    assert unary[0].tolist() == [1] and unary[1].tolist() == [0]
    self_loop = g.edges[RELATIONS.index("self")]
    assert self_loop[0].tolist() == [0, 1]


def test_until_graph_left_right_typed_edges():
    g = formula_to_graph(Until(Not(Atom(1)), Atom(0)))
    assert g.n_nodes == 4
    assert [NODE_KINDS[k] for k in g.kinds] == ["until", "not", "atom", "atom"]
    assert g.atom_index.tolist() == [-1, -1, 1, 0]
    left = g.edges[RELATIONS.index("left")]
    right = g.edges[RELATIONS.index("right")]
    assert left[0].tolist() == [1] and left[1].tolist() == [0]
    assert right[0].tolist() == [3] and right[1].tolist() == [0]
    unary = g.edges[RELATIONS.index("unary")]
    assert unary[0].tolist() == [2] and unary[1].tolist() == [1]


def test_equal_formulas_give_identical_graphs():
    a = formula_to_graph(Until(Not(Atom(1)), And(Atom(0), Eventually(Atom(1)))))
    b = formula_to_graph(Until(Not(Atom(1)), And(Atom(0), Eventually(Atom(1)))))
    assert a == b


# ------------------------- embedding -------------------------


def test_zero_weights_give_zero_embedding():
    net = toy_net()
    for name, tensor in net.params.items():
        if name.startswith("g") or name == "atom_emb":
            tensor.data = np.zeros_like(tensor.data)
    emb = net.embed(formula_to_graph(Atom(0))).data
    assert np.allclose(emb, np.tanh(0.0))


def test_different_atoms_embed_differently():
    net = toy_net()
    e0 = net.embed(formula_to_graph(Atom(0))).data
    e1 = net.embed(formula_to_graph(Atom(1))).data
    assert not np.allclose(e0, e1)


def test_embedding_invariant_to_node_relabeling():
    # Messages aggregate by edge structure only, so renumbering nodes (and
    # permuting edge arrays consistently) must leave the root state intact.
    rng = np.random.default_rng(1)
    net = toy_net()
    for _ in range(100):
        f = Until(Not(Atom(int(rng.integers(2)))), And(Atom(int(rng.integers(2))), Atom(1)))
        g = formula_to_graph(f)
        perm = rng.permutation(g.n_nodes)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(g.n_nodes)
        relabeled = FormulaGraph(
            kinds=g.kinds[inv],
            atom_index=g.atom_index[inv],
            edges=tuple((perm[s], perm[d]) for s, d in g.edges),
        )
        base = net.embed(g).data
        # root moved to perm[0]; read it back out of the relabeled graph
        from ltlplan.regressor.model import _relation_matrices, _node_features
        from ltlplan.autodiff import ops

        h = _node_features(relabeled, net.params["atom_emb"])
        mats = _relation_matrices(relabeled)
        for layer in range(net.depth):
            agg = None
            for r in range(len(RELATIONS)):
                term = ops.matmul(Tensor(mats[r]), ops.matmul(h, net.params[f"g{layer}_r{r}_w"]))
                agg = term if agg is None else ops.add(agg, term)
            h = ops.tanh(ops.add(agg, net.params[f"g{layer}_b"]))
        moved = h.data[perm[0]][None]
        assert np.array_equal(base, moved)


# ------------------------- value head -------------------------


def test_zero_head_outputs_zero():
    net = toy_net()
    net.params["fuse2_w"].data = np.zeros_like(net.params["fuse2_w"].data)
    net.params["fuse2_b"].data = np.zeros_like(net.params["fuse2_b"].data)
    g = formula_to_graph(Atom(0))
    tau = np.random.default_rng(2).normal(size=(3, 5, 2))
    assert np.array_equal(net.value(g, tau, 1), np.zeros(3))


def test_value_input_gradient_matches_central_differences():
    net = toy_net()
    g = formula_to_graph(Until(Not(Atom(1)), Atom(0)))
    rng = np.random.default_rng(3)
    tau = rng.normal(size=(2, 5, 2))
    grad = net.value_input_gradient(g, tau, 3)
    h = 1e-5
    for b in (0, 1):
        flat = tau.copy().reshape(2, -1)
        for j in range(flat.shape[1]):
            up, dn = flat.copy(), flat.copy()
            up[b, j] += h
            dn[b, j] -= h
            num = (net.value(g, up.reshape(tau.shape), 3)[b] - net.value(g, dn.reshape(tau.shape), 3)[b]) / (2 * h)
            ana = grad.reshape(2, -1)[b, j]
            assert ana == pytest.approx(num, rel=1e-4, abs=1e-8)


def test_constant_output_net_has_zero_input_gradient():
    net = toy_net()
    for name in ("enc1_w", "enc2_w", "fuse1_w"):
        net.params[name].data = np.zeros_like(net.params[name].data)
    g = formula_to_graph(Atom(0))
    tau = np.random.default_rng(4).normal(size=(2, 5, 2))
    assert np.allclose(net.value_input_gradient(g, tau, 2), 0.0)


# ------------------------- training -------------------------


def toy_trajectories(n, rng):
    # Straight lines across the 4x4 box holding both regions.
    starts = rng.uniform(0, 4, size=(n, 2))
    ends = rng.uniform(0, 4, size=(n, 2))
    ts = np.linspace(0, 1, 5)[None, :, None]
    return starts[:, None, :] * (1 - ts) + ends[:, None, :] * ts


def test_targets_match_fresh_evaluator_calls_bitwise():
    rng = np.random.default_rng(5)
    trajs = toy_trajectories(12, rng)
    formulas = [Eventually(Atom(0)), Until(Not(Atom(1)), Atom(0))]
    targets = compute_targets(formulas, trajs, LABELING, SoftConfig(), clamp=10.0)
    from ltlplan.labeling import label

    for fi, f in enumerate(formulas):
        for ti in range(len(trajs)):
            fresh = evaluate_soft(f, label(trajs[ti], LABELING), 0, SoftConfig())
            assert targets[fi, ti] == np.clip(fresh, -10, 10)


def test_targets_are_clamped():
    rng = np.random.default_rng(6)
    trajs = toy_trajectories(8, rng)
    targets = compute_targets([Truth(), Not(Truth())], trajs, LABELING, SoftConfig(), 10.0)
    assert targets.max() <= 10.0 and targets.min() >= -10.0
    assert np.allclose(targets[0], 10.0)


def test_constant_formula_regression_learns_constant():
    rng = np.random.default_rng(7)
    trajs = toy_trajectories(64, rng)
    sched = cosine_schedule(8)
    norm = Normalizer.fit(trajs)
    cfg = RegressorTrainConfig(batch_size=32, steps=400, learning_rate=3e-3, seed=0,
                               train_fraction=1.0, val_every=0)
    net, info = train_value_net(trajs, [Truth()], LABELING, sched, norm, cfg)
    x = norm.to_normalized(trajs[:16])
    pred = net.value(formula_to_graph(Truth()), x, 1)
    target_scale = 10.0
    assert np.mean((pred - 10.0) ** 2) < 1e-2 * target_scale**2


def test_training_improves_held_out_loss_and_correlation():
    rng = np.random.default_rng(8)
    trajs = toy_trajectories(256, rng)
    sched = cosine_schedule(8)
    norm = Normalizer.fit(trajs)
    formulas = [
        Eventually(Atom(0)),
        Eventually(Atom(1)),
        Not(Eventually(Atom(0))),
        Until(Not(Atom(1)), Atom(0)),
        And(Eventually(Atom(0)), Eventually(Atom(1))),
    ]
    cfg = RegressorTrainConfig(batch_size=64, steps=1500, learning_rate=1e-3, seed=0,
                               train_fraction=0.8, val_every=250)
    net, info = train_value_net(trajs, formulas, LABELING, sched, norm, cfg)
    first_val = info["val_losses"][0][1]
    last_val = info["val_losses"][-1][1]
    assert last_val < first_val / 2 or last_val < 1.0
    # prediction on clean trajectories correlates with targets
    f_idx = int(info["train_idx"][0])
    g = formula_to_graph(formulas[f_idx])
    preds = net.value(g, norm.to_normalized(trajs), 1)
    targets = info["targets"][f_idx]
    r = np.corrcoef(preds, targets)[0, 1]
    assert r >= 0.8


def test_classifier_reaches_high_accuracy_on_separable_labels():
    # Two well-separated trajectory families: through the p0 region center
    # versus hugging the opposite corner. Labels are robust to input noise.
    rng = np.random.default_rng(9)
    ts = np.linspace(0, 1, 5)[None, :, None]
    through = (np.array([0.2, 0.2]) + ts * np.array([1.6, 1.6]))[0][None] + rng.normal(0, 0.05, (128, 5, 2))
    away = (np.array([3.0, 3.8]) + ts * np.array([0.8, 0.0]))[0][None] + rng.normal(0, 0.05, (128, 5, 2))
    trajs = np.concatenate([through, away])
    sched = cosine_schedule(8)
    norm = Normalizer.fit(trajs)
    formulas = [Eventually(Atom(0))]
    cfg = RegressorTrainConfig(batch_size=64, steps=800, learning_rate=2e-3, seed=0,
                               train_fraction=1.0, val_every=0)
    net, info = train_value_net(trajs, formulas, LABELING, sched, norm, cfg, kind="classifier")
    labels = info["targets"][0] > 0
    assert labels[:128].all() and not labels[128:].any()
    logits = net.value(formula_to_graph(formulas[0]), norm.to_normalized(trajs), 1)
    acc = ((logits > 0) == labels).mean()
    assert acc >= 0.95


def test_classifier_input_gradient_matches_central_differences():
    net = toy_net(kind="classifier")
    g = formula_to_graph(Eventually(Atom(0)))
    rng = np.random.default_rng(10)
    tau = rng.normal(size=(1, 5, 2))
    grad = net.value_input_gradient(g, tau, 2)
    h = 1e-5
    flat = tau.reshape(1, -1)
    for j in range(flat.shape[1]):
        up, dn = flat.copy(), flat.copy()
        up[0, j] += h
        dn[0, j] -= h
        num = (net.value(g, up.reshape(tau.shape), 2)[0] - net.value(g, dn.reshape(tau.shape), 2)[0]) / (2 * h)
        assert grad.reshape(1, -1)[0, j] == pytest.approx(num, rel=1e-4, abs=1e-8)


def test_empty_formula_set_rejected():
    with pytest.raises(ValueError):
        train_value_net(np.zeros((4, 5, 2)), [], LABELING, cosine_schedule(8),
                        Normalizer(np.zeros(2), np.ones(2)))


def test_value_net_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(11)
    trajs = toy_trajectories(32, rng)
    sched = cosine_schedule(8)
    norm = Normalizer.fit(trajs)
    cfg = RegressorTrainConfig(batch_size=16, steps=30, val_every=0, train_fraction=1.0)
    net, _ = train_value_net(trajs, [Eventually(Atom(0))], LABELING, sched, norm, cfg)
    path = str(tmp_path / "value.ckpt")
    save_value_net(path, net, list(PROPS.names))
    loaded, props = load_value_net(path)
    assert props == list(PROPS.names)
    g = formula_to_graph(Eventually(Atom(0)))
    tau = rng.normal(size=(2, 5, 2))
    assert np.array_equal(loaded.value(g, tau, 3), net.value(g, tau, 3))
