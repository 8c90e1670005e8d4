"""
网络, EMA 与检查点测试
"""

import numpy as np
import pytest

from losses import rotation_loss
from model import (
    NUM_ROTATIONS,
    CheckpointError,
    EmaError,
    EmaState,
    ModelArch,
    ModelState,
    ema_update,
    load_checkpoint,
    read_tensors,
    save_checkpoint,
    write_tensors,
)
from tensorcore import ShapeError, Tensor, grad_check, no_grad, precision
from tensorcore import ops


def _images(n, size=16, seed=0):
    return np.random.default_rng(seed).uniform(0, 1, size=(n, 3, size, size)).astype(np.float32)


def test_forward_shapes(small_arch):
    state = ModelState.create(small_arch, seed=0)
    out = state.forward(_images(2))
    assert out.feat_a.shape == (2, 16, 2, 2)
    assert out.feat_b.shape == (2, 16)
    assert out.logits.shape == (2, 3)
    assert out.proj.shape == (2, 8)
    assert state.rot_forward(out.feat_b).shape == (2, NUM_ROTATIONS)


@pytest.mark.parametrize("placement,head,dim", [
    ("a", "none", 64),
    ("b", "none", 16),
    ("b", "linear", 8),
    ("a", "mlp", 8),
])
def test_projection_variants(placement, head, dim):
    arch = ModelArch(num_classes=3, width=4, proj_dim=8, image_size=16, dist_placement=placement, proj_head=head)
    state = ModelState.create(arch, seed=0)
    assert state.forward(_images(2)).proj.shape == (2, dim)
    assert arch.proj_out_dim == dim


def test_invalid_arch():
    with pytest.raises(ValueError):
        ModelArch(num_classes=3, image_size=20)
    with pytest.raises(ValueError):
        ModelArch(num_classes=3, proj_head="deep")
    with pytest.raises(ValueError):
        ModelArch(num_classes=1)


def test_wrong_input_shape(small_arch):
    state = ModelState.create(small_arch, seed=0)
    with pytest.raises(ShapeError):
        state.forward(_images(2, size=32))
    with pytest.raises(ShapeError):
        state.rot_forward(Tensor(np.zeros((2, 5))))


def test_init_is_deterministic(small_arch):
    a = ModelState.create(small_arch, seed=3)
    b = ModelState.create(small_arch, seed=3)
    c = ModelState.create(small_arch, seed=4)
    assert a.checksum() == b.checksum()
    assert a.checksum() != c.checksum()
    assert not a.params["classifier.bias"].data.any()


def test_batch_matches_single_samples(small_arch):
    state = ModelState.create(small_arch, seed=0)
    images = _images(3)
    with no_grad():
        batch = state.forward(images).logits.data
        single = np.concatenate([state.forward(images[i:i + 1]).logits.data for i in range(3)])
    np.testing.assert_allclose(batch, single, rtol=1e-5, atol=1e-6)


def test_identical_images_give_identical_outputs(small_arch):
    state = ModelState.create(small_arch, seed=0)
    img = _images(1)
    out = state.forward(np.concatenate([img, img])).logits.data
    np.testing.assert_allclose(out[0], out[1], rtol=1e-6, atol=1e-7)


def test_linear_projection_is_affine(small_arch):
    with precision(np.float64):
        state = ModelState.create(small_arch, seed=0)
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(2, 16, 2, 2)), rng.normal(size=(2, 16, 2, 2))

        def proj(x):
            t = Tensor(x)
            return state.project(t, ops.global_avg_pool(t)).data

        zero = proj(np.zeros_like(a))
        np.testing.assert_allclose(proj(a + b) - zero, (proj(a) - zero) + (proj(b) - zero), atol=1e-10)


def test_rotation_head_gradient():
    arch = ModelArch(num_classes=3, width=4, proj_dim=8, image_size=16)
    with precision(np.float64):
        state = ModelState.create(arch, seed=0)
        rng = np.random.default_rng(0)
        weight = state.params["rothead.fc1.weight"].data
        while True:
            feat_b = rng.normal(size=(3, arch.feat_b_dim))
            if np.abs(feat_b @ weight).min() > 1e-2:
                break
        feat_b = Tensor(feat_b)
        targets = [0, 1, 3]
        leaves = [p for name, p in state.named_parameters() if name.startswith("rothead.")]
        error = grad_check(lambda *_: rotation_loss(state.rot_forward(feat_b), targets), leaves)
    assert error < 1e-4


def _fill(state, value):
    for p in state.parameters():
        p.data[...] = value


def test_ema_single_update(small_arch):
    state = ModelState.create(small_arch, seed=0)
    ema = EmaState.from_state(state, decay=0.9)
    _fill(state, 2.0)
    for shadow in ema.shadow.values():
        shadow[...] = 1.0
    ema.update(state)
    for shadow in ema.shadow.values():
        np.testing.assert_allclose(shadow, 1.1, rtol=1e-6)


def test_ema_closed_form(small_arch):
    with precision(np.float64):
        state = ModelState.create(small_arch, seed=0)
    ema = EmaState.from_state(state, decay=0.99)
    for shadow in ema.shadow.values():
        shadow[...] = 1.0
    _fill(state, 2.0)
    before = state.checksum()
    for _ in range(100):
        ema_update(ema, state, 0.99)
    expected = 2.0 + 0.99 ** 100 * (1.0 - 2.0)
    for shadow in ema.shadow.values():
        np.testing.assert_allclose(shadow, expected, atol=1e-7)
    assert state.checksum() == before


def test_ema_errors(small_arch):
    state = ModelState.create(small_arch, seed=0)
    with pytest.raises(EmaError):
        EmaState.from_state(state, decay=1.0)
    ema = EmaState.from_state(state, decay=0.5)
    ema.shadow["classifier.bias"] = np.zeros(7, dtype=np.float32)
    with pytest.raises(EmaError):
        ema.update(state)
    del ema.shadow["classifier.bias"]
    with pytest.raises(EmaError):
        ema.update(state)


def test_ema_as_state_is_independent(small_arch):
    state = ModelState.create(small_arch, seed=0)
    ema = EmaState.from_state(state, decay=0.5)
    evaluated = ema.as_state()
    assert evaluated.checksum() == state.checksum()
    evaluated.params["classifier.bias"].data[...] = 9.0
    assert not ema.shadow["classifier.bias"].any()


def test_checkpoint_round_trip(tmp_path, small_arch):
    state = ModelState.create(small_arch, seed=0)
    ema = EmaState.from_state(state, decay=0.9)
    _fill(state, 0.5)
    path = tmp_path / "model.crmt"
    save_checkpoint(path, state, ema)

    loaded, loaded_ema = load_checkpoint(path, small_arch, ema_decay=0.9)
    assert loaded.checksum() == state.checksum()
    assert loaded_ema.as_state().checksum() == ema.as_state().checksum()
    assert loaded_ema.decay == 0.9


def test_checkpoint_without_ema(tmp_path, small_arch):
    state = ModelState.create(small_arch, seed=0)
    save_checkpoint(tmp_path / "raw.crmt", state)
    _, ema = load_checkpoint(tmp_path / "raw.crmt", small_arch)
    assert ema is None


def test_checkpoint_format_errors(tmp_path, small_arch):
    path = tmp_path / "model.crmt"
    save_checkpoint(path, ModelState.create(small_arch, seed=0))
    data = path.read_bytes()

    (tmp_path / "magic.crmt").write_bytes(b"XXXX" + data[4:])
    with pytest.raises(CheckpointError):
        read_tensors(tmp_path / "magic.crmt")
    (tmp_path / "short.crmt").write_bytes(data[:-3])
    with pytest.raises(CheckpointError):
        read_tensors(tmp_path / "short.crmt")
    (tmp_path / "long.crmt").write_bytes(data + b"\0")
    with pytest.raises(CheckpointError):
        read_tensors(tmp_path / "long.crmt")
    with pytest.raises(CheckpointError):
        read_tensors(tmp_path / "missing.crmt")


def test_checkpoint_architecture_mismatch(tmp_path, small_arch):
    path = tmp_path / "model.crmt"
    save_checkpoint(path, ModelState.create(small_arch, seed=0))
    with pytest.raises(CheckpointError):
        load_checkpoint(path, ModelArch(num_classes=5, width=4, proj_dim=8, image_size=16))
    write_tensors(tmp_path / "partial.crmt", {"classifier.bias": np.zeros(3)})
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "partial.crmt", small_arch)
