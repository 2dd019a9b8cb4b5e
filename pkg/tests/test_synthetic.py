import numpy as np

from gradhyd.dataio import write_forcing_csv
from gradhyd.models import Hmodel, Hymod
from gradhyd.synthetic import SyntheticSpec, generate_synthetic, synthetic_forcing


def test_same_seed_bitwise_identical(tmp_path):
    spec = SyntheticSpec(seed=11, n_total=200, spin_up=50)
    for k in range(2):
        data = generate_synthetic(spec, Hymod())
        write_forcing_csv(tmp_path / f"f{k}.csv", data.forcing, data.discharge)
    assert (tmp_path / "f0.csv").read_bytes() == (tmp_path / "f1.csv").read_bytes()


def test_forcing_statistics():
    f = synthetic_forcing(SyntheticSpec(seed=0, n_total=20000, spin_up=0))
    wet = f.precip > 0
    assert abs(wet.mean() - 0.4) < 0.02
    assert abs(f.precip[wet].mean() - 8.0) < 0.3
    assert abs(f.pet.mean() - 3.0) < 0.01 and f.pet.min() >= 1.0 - 1e-12 and f.pet.max() <= 5.0 + 1e-12


def test_midpoint_truth_mass_balance(hymod_data, hmodel_data):
    for data, model in ((hymod_data, Hymod()), (hmodel_data, Hmodel())):
        assert data.forcing.n_total == 730
        assert np.allclose(data.theta_star, model.space.midpoint())
        assert np.all(data.discharge >= 0.0)
        assert data.discharge.sum() <= data.forcing.precip.sum()
        assert data.observed.size == data.forcing.n


def test_truth_unit_is_used():
    spec = SyntheticSpec(seed=1, n_total=30, spin_up=0, theta_star_unit=(0.1, 0.2, 0.3, 0.4, 0.5))
    data = generate_synthetic(spec, Hymod())
    assert np.allclose(Hymod().space.to_unit(data.theta_star), [0.1, 0.2, 0.3, 0.4, 0.5])
