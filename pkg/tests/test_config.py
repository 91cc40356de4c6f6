import pytest

from urlguard.config import ConfigError, RunConfig, load_config, parse_config_text
from urlguard.labeling import LabelingConfig
from urlguard.nn import ModelConfig, TrainConfig


def test_defaults_build_every_section():
    cfg = RunConfig()
    assert isinstance(cfg.build("labeling"), LabelingConfig)
    assert isinstance(cfg.build("model"), ModelConfig)
    assert cfg.build("train").seed == 0
    assert cfg.collection_datetime is None
    assert cfg.cutoff_time.year == 2022


def test_file_values_are_coerced_by_field_type(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# comment line\n"
        "seed = 7\n"
        "live_dns = yes   # trailing comment\n"
        "labeling.quality_threshold = 1.25\n"
        "model.kernel_sizes = 3, 5\n"
        "model.word_branch = conv\n"
        "train.loss_mode = binary\n"
        "feat.entropy_base = 2\n"
        "\n")
    cfg = load_config(path)
    assert cfg.seed == 7 and cfg.live_dns is True
    assert cfg.build("labeling").quality_threshold == 1.25
    m = cfg.build("model")
    assert m.kernel_sizes == (3, 5) and m.word_branch == "conv"
    t = cfg.build("train")
    assert t.loss_mode == "binary" and t.seed == 7
    assert cfg.build("feat").entropy_base == 2.0
    assert ("model.kernel_sizes", (3, 5)) in list(cfg.items())


def test_later_values_override_earlier_ones():
    cfg = parse_config_text("seed = 1\nseed = 2\n")
    cfg.set("seed", "3")
    assert cfg.seed == 3
    assert cfg.build("train", seed=9).seed == 9


@pytest.mark.parametrize("line", [
    "nonsense = 1",
    "model.no_such_field = 1",
    "model.lex_dim = 4",  # derived from the data, not configurable
    "bogus.section = 1",
    "seed = seven",
    "live_dns = maybe",
    "cutoff = yesterday",
    "just a line without equals",
])
def test_bad_lines_raise_config_error(line):
    with pytest.raises(ConfigError):
        parse_config_text(line)


def test_invalid_section_values_surface_on_build():
    cfg = parse_config_text("train.optimizer = sgd9\nmodel.word_branch = lstm\n")
    with pytest.raises(ConfigError):
        cfg.build("train")
    with pytest.raises(ConfigError):
        cfg.build("model")


def test_error_message_names_the_line():
    with pytest.raises(ConfigError, match=r"<config>:2"):
        parse_config_text("seed = 1\nnope = 2\n")
