import importlib.util
from pathlib import Path

import numpy as np
import pytest

from netembed.harness.scenario import load_scenario
from netembed.netlattice import PointNet, load_net

ROOT = Path(__file__).resolve().parents[1]


def _tool():
    spec = importlib.util.spec_from_file_location("export_net", ROOT / "tools" / "export_net.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def test_export_restricts_and_reloads(tmp_path, capsys) -> None:
    """The exported net and table load back and drive a file-based scenario."""
    out = tmp_path / "shear_net.txt"
    table = tmp_path / "shear_table.txt"
    code = _tool().main([
        str(ROOT / "config" / "scenarios" / "shear_pullback.yaml"), str(out),
        "--half-width", "3", "--table", str(table),
    ])
    assert code == 0
    assert capsys.readouterr().out.strip() == str(out)

    net = load_net(out)
    assert isinstance(net, PointNet)
    assert net.delta == 0.75
    assert np.array_equal(net.nu([0.2, 2.9]), [0.0, 3.0])

    data = {
        "name": "from_file",
        "dimension": 2,
        "metric": {"family": "linear-pullback", "matrix": [[1.0, 1.0], [0.0, 1.0]]},
        "net": {"file": str(out), "box": [-3.0, 3.0]},
        "embedding": {"mode": "table", "table": str(table)},
        "lattice": {"epsilon": 1.0},
        "directions": {"enabled": False},
        "audit": {"expect_isometry": False},
    }
    scenario = load_scenario(data=data, output_dir=tmp_path / "results")
    assert isinstance(scenario.net, PointNet)
    assert scenario.embedding.mode == "table"
    assert np.allclose(scenario.embedding.image([1.0, 1.0]), [0.0, 1.0])


def test_export_rejects_non_positive_width(tmp_path) -> None:
    """--half-width must be positive."""
    config = str(ROOT / "config" / "scenarios" / "flat_identity.yaml")
    with pytest.raises(SystemExit) as info:
        _tool().main([config, str(tmp_path / "n.txt"), "--half-width", "0"])
    assert info.value.code == 2
