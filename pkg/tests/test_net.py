import numpy as np
import pytest
import torch

from tsex.errors import ConditioningMismatchError, EmptyInputError
from tsex.gradcheck import make_toy_batch, net_grad_max_rel_error
from tsex.losses import LossWeights, mtsal
from tsex.net import (NetConfig, backward, batch_loss, build_model,
                      count_parameters, load_checkpoint, save_checkpoint,
                      torch_delta)
from tsex.temporal import delta


def test_config_presets():
    desk = NetConfig.desk()
    assert (desk.aux_hidden, desk.mask_hidden) == (32, 64)
    paper = NetConfig.paper("adapt")
    assert paper.mask_hidden == 512
    assert paper.embed_dim == paper.n_sublayers == 30


def test_adapt_requires_matching_sublayers():
    with pytest.raises(ValueError):
        NetConfig(mode="adapt", embed_dim=16, n_sublayers=30)


def test_embedding_dimension_default(rng):
    model = build_model(NetConfig.desk("concat"), seed=0, dtype=torch.float64)
    enr = torch.from_numpy(rng.uniform(0, 1, (1, 7, 129)))
    emb = model.condition(enr)
    assert emb.shape == (1, 30)


def test_adapt_weights_dimension_default(rng):
    model = build_model(NetConfig.desk("adapt"), seed=0, dtype=torch.float64)
    enr = torch.from_numpy(rng.uniform(0, 1, (1, 7, 129)))
    assert model.condition(enr).shape == (1, 30)


def test_mean_pooling_single_frame_equals_frame_output(rng):
    model = build_model(NetConfig.desk("concat"), seed=1, dtype=torch.float64)
    enr = torch.from_numpy(rng.uniform(0, 1, (1, 1, 129)))
    emb = model.condition(enr)
    h, _ = model.aux.blstm(enr)
    frame_out = model.aux.embed(torch.relu(model.aux.hidden(h)))[0, 0]
    assert torch.allclose(emb[0], frame_out)


def test_mean_pooling_is_order_free(rng):
    # pooling a fixed matrix of per-frame outputs ignores frame order
    x = torch.from_numpy(rng.standard_normal((1, 9, 30)))
    perm = torch.randperm(9)
    assert torch.allclose(x.mean(dim=1), x[:, perm].mean(dim=1))


def test_adapt_aux_framewise_duplication_invariant(rng):
    model = build_model(NetConfig.desk("adapt"), seed=2, dtype=torch.float64)
    a = torch.from_numpy(rng.uniform(0, 1, (1, 6, 129)))
    doubled = torch.cat([a, a], dim=1)
    assert torch.allclose(model.condition(a), model.condition(doubled))


def test_adapt_aux_zero_input_is_bias_driven(rng):
    model = build_model(NetConfig.desk("adapt"), seed=3, dtype=torch.float64)
    zero = torch.zeros((1, 4, 129), dtype=torch.float64)
    out = model.condition(zero)
    single = model.condition(torch.zeros((1, 1, 129), dtype=torch.float64))
    assert torch.allclose(out, single)


def test_mask_output_shape_and_range(rng):
    for mode in ("concat", "adapt"):
        model = build_model(NetConfig.desk(mode), seed=4, dtype=torch.float64)
        mix = torch.from_numpy(rng.uniform(0, 1, (2, 11, 129)))
        enr = torch.from_numpy(rng.uniform(0, 1, (2, 6, 129)))
        mask = model(mix, enr)
        assert mask.shape == (2, 11, 129)
        assert torch.all(mask > 0) and torch.all(mask < 1)


def test_adapt_one_hot_alpha_selects_sublayer(rng):
    model = build_model(NetConfig.desk("adapt"), seed=5, dtype=torch.float64)
    h = torch.from_numpy(rng.standard_normal((1, 4, 128)))
    alpha = torch.zeros((1, 30), dtype=torch.float64)
    alpha[0, 7] = 1.0
    out = model.masknet.adapt(h, alpha)
    sub = torch.relu(h @ model.masknet.adapt.weight[7].T + model.masknet.adapt.bias[7])
    assert torch.allclose(out, sub)


def test_adapt_alpha_homogeneity(rng):
    model = build_model(NetConfig.desk("adapt"), seed=6, dtype=torch.float64)
    h = torch.from_numpy(rng.standard_normal((1, 4, 128)))
    alpha = torch.from_numpy(rng.uniform(0.1, 1, (1, 30)))
    pre = torch.einsum("btj,khj->btkh", h, model.masknet.adapt.weight) \
        + model.masknet.adapt.bias
    combined = torch.einsum("btkh,bk->bth", pre, alpha)
    scaled = torch.einsum("btkh,bk->bth", pre, 3.0 * alpha)
    assert torch.allclose(scaled, 3.0 * combined)


def test_conditioning_mismatch_raises(rng):
    model = build_model(NetConfig.desk("concat"), seed=0, dtype=torch.float64)
    mix = torch.from_numpy(rng.uniform(0, 1, (1, 5, 129)))
    with pytest.raises(ConditioningMismatchError):
        model.estimate_mask(mix, torch.zeros((1, 12), dtype=torch.float64))


def test_empty_enrollment_raises():
    model = build_model(NetConfig.desk("concat"), seed=0, dtype=torch.float64)
    with pytest.raises(EmptyInputError):
        model.condition(torch.zeros((1, 0, 129), dtype=torch.float64))


def test_forward_deterministic(rng):
    cfg = NetConfig.desk("concat")
    mix = torch.from_numpy(rng.uniform(0, 1, (1, 8, 129)))
    enr = torch.from_numpy(rng.uniform(0, 1, (1, 5, 129)))
    m1 = build_model(cfg, seed=11, dtype=torch.float64)(mix, enr)
    m2 = build_model(cfg, seed=11, dtype=torch.float64)(mix, enr)
    assert torch.equal(m1, m2)


def test_torch_delta_matches_numpy(rng):
    x = rng.standard_normal((1, 9, 5))
    out = torch_delta(torch.from_numpy(x)).numpy()[0]
    assert np.allclose(out, delta(x[0]), atol=1e-12)


def test_batch_loss_matches_numpy_mtsal(rng):
    mix = rng.uniform(0.1, 1, (1, 7, 129))
    psm = rng.uniform(-0.5, 1, (1, 7, 129))
    mask = rng.uniform(0, 1, (1, 7, 129))
    got = batch_loss(torch.from_numpy(mask), torch.from_numpy(mix),
                     torch.from_numpy(psm), torch.zeros((1, 7, 129)),
                     torch.tensor([7]), "MTSAL")
    assert float(got) == pytest.approx(mtsal(mask[0], mix[0], psm[0]), rel=1e-10)


def test_batch_loss_excludes_padded_frames(rng):
    mix = rng.uniform(0.1, 1, (1, 7, 9))
    psm = rng.uniform(-0.5, 1, (1, 7, 9))
    mask = rng.uniform(0, 1, (1, 7, 9))
    padded = lambda a: np.concatenate([a, np.zeros((1, 3, 9))], axis=1)
    got = batch_loss(torch.from_numpy(padded(mask)), torch.from_numpy(padded(mix)),
                     torch.from_numpy(padded(psm)), torch.zeros((1, 10, 9)),
                     torch.tensor([7]), "MSAL")
    want = batch_loss(torch.from_numpy(mask), torch.from_numpy(mix),
                      torch.from_numpy(psm), torch.zeros((1, 7, 9)),
                      torch.tensor([7]), "MSAL")
    assert float(got) == pytest.approx(float(want), rel=1e-12)


@pytest.mark.parametrize("mode", ["concat", "adapt"])
def test_parameter_gradients_match_finite_differences(mode):
    err = net_grad_max_rel_error(NetConfig.desk(mode), "MTSAL",
                                 n_coords=30, seed=0)
    assert err <= 1e-3


def test_zero_gradient_at_zero_loss(rng):
    # with target equal to the emitted masked magnitude, MSAL loss and
    # gradients vanish
    cfg = NetConfig.desk("concat")
    model = build_model(cfg, seed=8, dtype=torch.float64)
    mix, enr, _, ibm_t, lengths = make_toy_batch(cfg, rng)
    with torch.no_grad():
        psm = model(mix, enr) * mix
    loss, grads = backward(model, mix, enr, psm, ibm_t, lengths, "MSAL")
    assert float(loss) == 0.0
    assert all(float(g.abs().max()) == 0.0 for g in grads.values())


def test_joint_training_reaches_auxiliary(rng):
    cfg = NetConfig.desk("concat")
    model = build_model(cfg, seed=9, dtype=torch.float64)
    mix, enr, psm, ibm_t, lengths = make_toy_batch(cfg, rng)
    _, grads = backward(model, mix, enr, psm, ibm_t, lengths, "MTSAL")
    aux_norm = sum(float(g.abs().sum()) for n, g in grads.items()
                   if n.startswith("aux."))
    assert aux_norm > 0.0


def test_paper_parameter_counts_match_reported():
    assert count_parameters(NetConfig.paper("concat")) == pytest.approx(8.9e6, rel=0.10)
    assert count_parameters(NetConfig.paper("adapt")) == pytest.approx(19.3e6, rel=0.10)


def test_checkpoint_roundtrip_and_shape_validation(tmp_path, rng):
    cfg = NetConfig.desk("concat")
    model = build_model(cfg, seed=10, dtype=torch.float64)
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, model, seed=10, extra={"epoch": 3})
    loaded, meta = load_checkpoint(path)
    assert meta["seed"] == 10 and meta["extra"]["epoch"] == 3
    mix = torch.from_numpy(rng.uniform(0, 1, (1, 6, 129)))
    enr = torch.from_numpy(rng.uniform(0, 1, (1, 4, 129)))
    assert torch.equal(model(mix, enr), loaded(mix, enr))
