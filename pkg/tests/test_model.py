import numpy as np
import pytest

from gradcheck import TOL, ReluPattern, directional_error, param_grad_error
from spos_gebd import encoder as encoder_mod
from spos_gebd import head as head_mod
from spos_gebd.encoder import EncoderConfig
from spos_gebd.head import HeadConfig
from spos_gebd.model import BoundaryModel, ModelConfig
from spos_gebd.numerics import ContractError, Parameter, checkpoint, precision, tensor


def tiny_config(**kw):
    base = dict(window=2, channels=8, groups=2, encoder=EncoderConfig(layers=1, model_dim=8), seed=0)
    base.update(kw)
    return ModelConfig(**base)


def _bce_like(model, videos, weights):
    """Smooth scalar of every video's scores."""
    total = None
    for s, w in zip(model.forward(videos), weights):
        term = (s.scores * tensor(w)).sum()
        total = term if total is None else total + term
    return total


def test_config_validation_and_defaults():
    cfg = ModelConfig()
    assert (cfg.window, cfg.channels, cfg.groups, cfg.similarity) == (8, 256, 4, "cosine")
    assert cfg.encoder.kind == "transformer" and cfg.encoder.layers == 6
    assert cfg.head.fcn_channels == (32, 64, 128, 256)
    with pytest.raises(ContractError):
        ModelConfig(channels=10, groups=4)
    with pytest.raises(ContractError):
        ModelConfig(window=0)
    assert ModelConfig(similarity="manhattan").similarity == "neg-manhattan"


def test_config_json_round_trip():
    cfg = tiny_config(similarity="chebyshev", head=HeadConfig(fcn_channels=(4, 4, 4, 8)))
    assert ModelConfig.from_json(cfg.to_json()) == cfg


def test_scores_per_real_frame_for_all_lengths():
    rng = np.random.default_rng(0)
    models = {k: BoundaryModel(tiny_config(window=k, head=HeadConfig(fcn_channels=(2, 2, 2, 8)))) for k in range(1, 11)}
    for t in range(1, 41):
        for k, model in models.items():
            (s,) = model.forward([rng.standard_normal((t, 8))])
            assert s.scores.shape == (t,) and s.real_length == t


def test_batched_equals_single():
    model = BoundaryModel(tiny_config())
    rng = np.random.default_rng(1)
    videos = [rng.standard_normal((t, 8)) for t in (5, 9, 3)]
    batched = model.forward(videos)
    for v, s in zip(videos, batched):
        np.testing.assert_allclose(model.forward([v])[0].scores.data, s.scores.data, atol=1e-6)


def test_deterministic_under_seed():
    x = np.random.default_rng(2).standard_normal((12, 8))
    a = BoundaryModel(tiny_config(seed=3)).forward([x])[0].scores.data
    b = BoundaryModel(tiny_config(seed=3)).forward([x])[0].scores.data
    assert np.array_equal(a, b)


def test_parameter_names_unique_and_pathlike():
    names = [n for n, _ in BoundaryModel(tiny_config()).named_parameters()]
    assert len(names) == len(set(names))
    assert "encoder.layers.0.attn.qkv.weight" in names
    assert all(p.name == n for n, p in BoundaryModel(tiny_config()).named_parameters())


def test_input_projection_when_feature_dim_differs():
    model = BoundaryModel(tiny_config(feature_dim=5))
    (s,) = model.forward([np.zeros((4, 5))])
    assert s.scores.shape == (4,)


def test_save_load_round_trip(tmp_path):
    model = BoundaryModel(tiny_config(similarity="euclidean"))
    path = tmp_path / "m.ckpt"
    model.save(path)
    loaded = BoundaryModel.load(path)
    x = np.random.default_rng(4).standard_normal((6, 8))
    assert np.array_equal(model.forward([x])[0].scores.data, loaded.forward([x])[0].scores.data)
    blob = path.read_bytes()
    assert checkpoint.encode(checkpoint.decode(blob)) == blob


def test_load_state_mismatch():
    model = BoundaryModel(tiny_config())
    state = model.state()
    state.pop(next(iter(state)))
    with pytest.raises(ContractError):
        model.load_state(state)


def test_full_pipeline_gradients(monkeypatch):
    """T=7, K=2, C=8, G=2, one encoder layer, 64-bit, default head widths.

    Inputs are checked on every coordinate; each parameter tensor on 30
    sampled coordinates; all parameters jointly along 12 random directions.
    Stencils that flip a ReLU unit are excluded, and at most 10% may be.
    """
    pattern = ReluPattern(monkeypatch, [encoder_mod, head_mod])
    with precision(64):
        model = BoundaryModel(tiny_config())
        rng = np.random.default_rng(5)
        x = rng.standard_normal((7, 8))
        w = rng.standard_normal(7)

        def loss():
            return _bce_like(model, [x], [w])

        params = model.parameters()
        err, checked, skipped = param_grad_error(params, loss, max_coords=30, pattern=pattern)
        assert err <= TOL and skipped <= 0.1 * (checked + skipped)
        err, checked, skipped = directional_error(params, loss, directions=12, pattern=pattern)
        assert err <= TOL and checked >= 8
        xp = Parameter(x.copy())
        err, checked, skipped = param_grad_error(
            [xp], lambda: _bce_like(model, [xp], [w]), pattern=pattern
        )
        assert err <= TOL and skipped <= 0.1 * (checked + skipped)
