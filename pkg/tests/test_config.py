import pytest

from config import PipelineConfig, dump_config, load_config
from correlation import DissimilarityKind
from errors import ConfigError
from filtering import FilterKind


def write_yaml(tmp_path, text):
    path = tmp_path / 'run.yaml'
    path.write_text(text, encoding='utf-8')
    return str(path)


class TestDefaults:
    def test_production_defaults(self):
        cfg = load_config()
        assert cfg.horizons_s == [15, 60, 900, 3600, 14400, 86400]
        assert cfg.filters == [FilterKind.MST, FilterKind.TMFG]
        assert cfg.dissimilarity_kind is DissimilarityKind.POWER
        assert cfg.bootstrap_replicas == 1000
        assert cfg.shuffle_count == 100
        assert cfg.bootstrap_threshold == 0.95

    def test_testing_profile(self, monkeypatch):
        monkeypatch.setenv('NETFILTER_ENV', 'testing')
        cfg = load_config()
        assert cfg.bootstrap_replicas == 20
        assert cfg.workers == 1

    def test_unknown_profile(self):
        with pytest.raises(ConfigError):
            PipelineConfig.from_profile('staging')


class TestFile:
    def test_values_override_profile(self, tmp_path):
        path = write_yaml(tmp_path, 'horizons_s: [60, 15]\nfilters: [tmfg, pmfg]\nmaster_seed: 7\n'
                                    'dissimilarity_kind: euclidean\n')
        cfg = load_config(path)
        assert cfg.horizons_s == [15, 60]
        assert cfg.filters == [FilterKind.PMFG, FilterKind.TMFG]
        assert cfg.master_seed == 7
        assert cfg.dissimilarity_kind is DissimilarityKind.EUCLIDEAN

    def test_non_divisible_horizon(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_yaml(tmp_path, 'horizons_s: [7]\n'))

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            load_config(write_yaml(tmp_path, 'bootstrap_reps: 10\n'))
        assert 'bootstrap_reps' in str(info.value)

    def test_nested_section(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_yaml(tmp_path, 'validation:\n  bootstrap_replicas: 10\n'))

    def test_not_yaml(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_yaml(tmp_path, 'horizons_s: [15\n'))

    @pytest.mark.parametrize('text', [
        'bootstrap_threshold: 0\n',
        'bootstrap_threshold: 1.5\n',
        'filters: []\n',
        'percentile_levels: [0, 50]\n',
        'export_formats: [svg]\n',
        'bootstrap_replicas: zero\n',
        'log_level: LOUD\n',
    ])
    def test_invalid_values(self, tmp_path, text):
        with pytest.raises(ConfigError):
            load_config(write_yaml(tmp_path, text))

    def test_dump_then_load(self, tmp_path):
        cfg = load_config(None, horizons_s='15,900', filters='MST,PMFG')
        path = str(tmp_path / 'snapshot.yaml')
        dump_config(cfg, path)
        assert load_config(path) == cfg


class TestOverrides:
    def test_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv('NETFILTER_OUTPUT_DIR', str(tmp_path / 'env-out'))
        monkeypatch.setenv('NETFILTER_MASTER_SEED', '99')
        cfg = load_config(write_yaml(tmp_path, 'master_seed: 5\noutput_dir: file-out\n'))
        assert cfg.master_seed == 99
        assert cfg.output_dir == str(tmp_path / 'env-out')

    def test_command_line_beats_environment(self, monkeypatch):
        monkeypatch.setenv('NETFILTER_MASTER_SEED', '99')
        cfg = load_config(None, master_seed=3, horizons_s='60, 15', filters=None)
        assert cfg.master_seed == 3
        assert cfg.horizons_s == [15, 60]
        assert cfg.filters == [FilterKind.MST, FilterKind.TMFG]

    def test_with_overrides_validates(self):
        cfg = load_config()
        with pytest.raises(ConfigError):
            cfg.with_overrides(base_horizon_s=0)
        assert cfg.with_overrides(workers=2).workers == 2
