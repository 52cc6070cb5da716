import numpy as np
import pytest

from g2t.autodiff import AdamState
from g2t.checkpoint import Checkpoint, CheckpointError, atomic_write_text
from g2t.config import TrainConfig, load_config, parse_overrides
from g2t.model import Dims, init_params


def test_defaults():
    cfg = TrainConfig()
    assert (cfg.lr, cfg.batch_size, cfg.embed_dim, cfg.hidden) == (0.001, 50, 300, 512)
    assert cfg.ce_epochs == 16


def test_precedence(tmp_path):
    path = tmp_path / "train.cfg"
    path.write_text("# comment\ngamma = 0.5\nepochs=4  # trailing\nmasking=false\n")
    cfg = load_config(path, ["epochs=7", "ce_pretrain_epochs=none"])
    assert cfg.gamma == 0.5 and cfg.epochs == 7 and cfg.masking is False and cfg.ce_pretrain_epochs is None


@pytest.mark.parametrize("pairs", [["nope=1"], ["gamma"], ["gamma=2"], ["hidden=7"], ["masking=maybe"]])
def test_bad_overrides(pairs):
    with pytest.raises(ValueError):
        load_config(None, pairs)


def test_parse_overrides_types():
    assert parse_overrides(["lr=0.5", "seed=3", "freeze_embeddings=yes"]) == \
        {"lr": 0.5, "seed": 3, "freeze_embeddings": True}


def make_ckpt():
    params = init_params(Dims(7, 4, 6, 1), np.random.default_rng(0))
    adam = AdamState(lr=0.01, step=3)
    for name, t in params.items():
        adam.m[name] = np.full(t.shape, 0.5)
        adam.v[name] = np.full(t.shape, 0.25)
    return Checkpoint(params, ["<pad>", "<unk>", "<s>", "</s>", "a", "b", "c"], TrainConfig().to_dict(), adam,
                      {"best_epoch": 2})


def test_checkpoint_roundtrip(tmp_path):
    ckpt = make_ckpt()
    ckpt.save(tmp_path / "m.ckpt")
    back = Checkpoint.load(tmp_path / "m.ckpt")
    assert back.vocab == ckpt.vocab and back.config == ckpt.config and back.meta == ckpt.meta
    assert back.params.dims == ckpt.params.dims
    for name, t in ckpt.params.items():
        assert back.params[name].data.tobytes() == t.data.tobytes()
        np.testing.assert_array_equal(back.adam.m[name], ckpt.adam.m[name])
    assert back.adam.step == 3 and back.adam.lr == 0.01
    assert back.dumps() == ckpt.dumps()


def test_checkpoint_header_and_truncation():
    text = make_ckpt().dumps()
    assert text.startswith("G2T-CKPT v1\n")
    with pytest.raises(CheckpointError, match="G2T-CKPT"):
        Checkpoint.loads("junk\n")
    with pytest.raises(CheckpointError, match="truncated"):
        Checkpoint.loads(text.replace("end\n", ""))
    with pytest.raises(CheckpointError):
        Checkpoint.loads(text.replace("param ", "weird ", 1))


def test_atomic_write_leaves_nothing_on_failure(tmp_path):
    target = tmp_path / "out.txt"
    with pytest.raises(TypeError):
        atomic_write_text(target, 123)  # type: ignore[arg-type]
    assert list(tmp_path.iterdir()) == []
