import json
import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from osb_lib import parse_spec, realize  # noqa: E402

SPECS_DIR = os.path.join(ROOT, 'examples_specs')


@pytest.fixture(scope='session', autouse=True)
def disabled_logging(tmp_path_factory):
    """Point OSB_LOG_CONFIG at a config with file and stream logging switched off"""
    config_path = tmp_path_factory.mktemp('logcfg') / 'logging_config.json'
    config_path.write_text(json.dumps({'logging': {'enabled': False}, 'streaming_logs': {'enabled': False}}))
    previous = os.environ.get('OSB_LOG_CONFIG')
    os.environ['OSB_LOG_CONFIG'] = str(config_path)
    yield str(config_path)
    if previous is None:
        os.environ.pop('OSB_LOG_CONFIG', None)
    else:
        os.environ['OSB_LOG_CONFIG'] = previous


def load_spec(name):
    with open(os.path.join(SPECS_DIR, f'{name}.json'), 'r', encoding='utf-8') as f:
        return parse_spec(f.read())


@pytest.fixture(scope='session')
def disk():
    return realize(load_spec('disk'))


@pytest.fixture(scope='session')
def ellipse():
    return realize(load_spec('ellipse'))


@pytest.fixture(scope='session')
def ball4():
    return realize(load_spec('ball4'))


@pytest.fixture(scope='session')
def lagrangian_l4():
    return realize(load_spec('lagrangian_l4'))


@pytest.fixture(scope='session')
def symplectic_sum():
    return realize(load_spec('symplectic_sum'))


@pytest.fixture(scope='session')
def patched2():
    return realize(load_spec('patched2'))


@pytest.fixture(scope='session')
def patched4():
    return realize(load_spec('patched4'))
