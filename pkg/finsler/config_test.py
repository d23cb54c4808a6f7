import pytest

from .config import Config
from .errors import ConfigValidationError


def _write(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text, encoding='utf-8')
    return str(path)


def test_missing_file_uses_schema_defaults(tmp_path):
    cfg = Config(str(tmp_path / "absent.yaml"), use_env=False)
    assert cfg.is_valid()
    assert cfg.get('pde.eps_schedule') == [1e-2, 1e-4, 1e-6, 0.0]
    assert cfg.get('pde.residual_tolerance') == 1e-8
    assert cfg.get('radial.max_doublings') == 40
    assert cfg.log_level == 'INFO'


def test_out_of_range_value_falls_back_to_default(tmp_path):
    cfg = Config(_write(tmp_path, "pde:\n  layer_width: 50.0\n  k_base: 3.0\n"), use_env=False)
    assert not cfg.is_valid()
    assert cfg.get('pde.layer_width') == 3.0
    assert cfg.get('pde.k_base') == 3.0
    report = cfg.get_validation_report()
    assert any('pde.layer_width' in e for e in report['errors'])
    assert any('pde.layer_width' in w for w in report['warnings'])


def test_wrong_type_is_reported(tmp_path):
    cfg = Config(_write(tmp_path, "radial:\n  grid_points: many\n"), use_env=False)
    assert any('radial.grid_points' in e for e in cfg.get_validation_report()['errors'])
    assert cfg.get('radial.grid_points') == 2000


def test_broken_yaml_uses_defaults(tmp_path):
    cfg = Config(_write(tmp_path, "pde: [unclosed\n"), use_env=False)
    assert cfg.get('pde.max_iterations') == 100


def test_environment_override(tmp_path, monkeypatch):
    monkeypatch.setenv("FINSLER__PDE__MAX_ITERATIONS", "7")
    cfg = Config(str(tmp_path / "absent.yaml"), use_env=True)
    assert cfg.get('pde.max_iterations') == 7


def test_get_set_and_section(tmp_path):
    cfg = Config(str(tmp_path / "absent.yaml"), use_env=False)
    cfg.set('pde.k_start', 4.0)
    assert cfg.get('pde.k_start') == 4.0
    assert cfg.section('pde')['k_start'] == 4.0
    with pytest.raises(KeyError):
        cfg.get('pde.no_such_key')
    assert cfg.get('pde.no_such_key', 5) == 5


def test_config_error_is_finsler_error():
    from .errors import FinslerError
    assert issubclass(ConfigValidationError, FinslerError)
