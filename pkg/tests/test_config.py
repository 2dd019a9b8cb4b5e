import numpy as np
import pytest

from gradhyd.config import RunConfig, load_config, parse_config
from gradhyd.errors import ConfigError

FULL = """
[run]
model = hmodel
loss = nse
optimizer = lm
spin_up = 10   # days
n_starts = 3
seed = 7

[solver]
abstol = 1e-6
reltol = 1e-6

[losses]
huber_c = 2.0
huber_scale_mode = fixed
huber_sigma0 = 0.5

[optimizers]
k_max = 50
nu = 5

[bounds]
r_f = 0.2, 0.8

[parameters]
r_f = 0.3
"""


def test_full_config():
    cfg = parse_config(FULL)
    assert (cfg.model, cfg.loss, cfg.optimizer, cfg.spin_up, cfg.n_starts, cfg.seed) == ("hmodel", "nse", "lm", 10, 3, 7)
    assert cfg.solver.abstol == 1e-6
    assert cfg.huber.c == 2.0 and cfg.huber.scale_mode == "fixed"
    assert cfg.gd.k_max == 50 and cfg.lm.k_max == 50 and cfg.lm.nu == 5
    model = cfg.build_model()
    i = model.space.names.index("r_f")
    assert (model.space.lower[i], model.space.upper[i]) == (0.2, 0.8)
    assert cfg.theta(model.space)[i] == 0.3


def test_defaults():
    cfg = load_config(None)
    assert cfg == RunConfig()
    theta = cfg.theta(cfg.build_model().space)
    assert np.allclose(theta, cfg.build_model().space.midpoint())


@pytest.mark.parametrize("text", [
    "[run]\noptimizer = lm\nloss = kge\n",
    "[run]\nmodel = nope\n",
    "[run]\nloss = l1\n",
    "[run]\nbogus = 1\n",
    "[weird]\na = 1\n",
    "[run]\nseed = x\n",
    "[solver]\nabstol = -1\n",
    "[solver]\nfoo = 1\n",
    "[losses]\nhuber_c = 0\n",
    "[losses]\ngls_weights = diagonal:missing.csv\n",
    "[losses]\ngls_weights = cholesky\n",
    "[optimizers]\nnu = 0.5\n",
    "[bounds]\nk_f = 0.5\n",
    "[bounds]\nnot_a_param = 0, 1\n",
    "[parameters]\nk_f = 5\n",
    "[parameters]\nzzz = 1\n",
    "no section\n",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_gls_weight_paths_resolve(tmp_path):
    (tmp_path / "sigma.csv").write_text("1\n2\n")
    cfg = parse_config("[losses]\ngls_weights = diagonal:sigma.csv\n", tmp_path)
    w = cfg.build_gls_weights()
    assert w.kind == "diagonal"


def test_overrides():
    cfg = RunConfig().with_overrides(model="hmodel", seed=None, spin_up=3)
    assert cfg.model == "hmodel" and cfg.seed == 0 and cfg.spin_up == 3
    with pytest.raises(ConfigError):
        RunConfig().with_overrides(optimizer="lm", loss="fdc")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")
