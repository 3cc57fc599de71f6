import json

import pytest

from conftest import load_spec
from osb_lib import (
    Ball,
    InvalidInputError,
    LagrangianSum,
    LpBall,
    SpecParseError,
    parse_spec,
    realize,
    serialize_spec,
    spec_hash,
)


def test_parse_nested_spec():
    spec = parse_spec('{"type": "lagrangian_sum", "k": {"type": "lp_ball", "p": 4, "dim": 2}, "v": 1}')
    assert spec == LagrangianSum(k=LpBall(p=4.0, dim=2))
    assert isinstance(spec.k.p, float)


@pytest.mark.parametrize('name', ['ball4', 'disk', 'ellipse', 'lagrangian_l4', 'symplectic_sum', 'patched2'])
def test_serialization_round_trip(name):
    spec = load_spec(name)
    text = serialize_spec(spec)
    assert parse_spec(text) == spec
    assert serialize_spec(parse_spec(text)) == text
    assert json.loads(text)['v'] == 1


def test_hash_depends_only_on_content():
    a = parse_spec('{"type": "ball", "dim": 4, "v": 1}')
    b = parse_spec('{"v": 1,   "dim": 4, "type": "ball"}')
    assert spec_hash(a) == spec_hash(b)
    assert spec_hash(a) != spec_hash(Ball(dim=2))


def test_version_is_mandatory():
    with pytest.raises(SpecParseError) as excinfo:
        parse_spec('{"type": "ball", "dim": 4}')
    assert excinfo.value.path == '$.v'
    with pytest.raises(SpecParseError):
        parse_spec('{"type": "ball", "dim": 4, "v": 2}')


def test_nested_errors_carry_the_field_path():
    with pytest.raises(SpecParseError) as excinfo:
        parse_spec('{"type": "lagrangian_sum", "k": {"type": "lp_ball", "p": 0.5, "dim": 2}, "v": 1}')
    assert excinfo.value.path == '$.k.p'
    with pytest.raises(SpecParseError) as excinfo:
        parse_spec('{"type": "l2_sum", "left": {"type": "ball", "dim": 2}, "right": {"type": "cube"}, "v": 1}')
    assert excinfo.value.path == '$.right.type'


def test_syntax_errors_carry_line_and_column():
    with pytest.raises(SpecParseError) as excinfo:
        parse_spec('{"type": "ball",\n "dim": }')
    assert excinfo.value.line == 2
    assert excinfo.value.column is not None
    assert excinfo.value.details['line'] == 2


def test_schema_violations():
    cases = [
        ('{"dim": 2, "v": 1}', '$'),
        ('{"type": "ball", "dim": 2, "radius": 1, "v": 1}', '$.radius'),
        ('{"type": "ball", "dim": true, "v": 1}', '$.dim'),
        ('{"type": "ball", "dim": 1, "v": 1}', '$.dim'),
        ('{"type": "interval", "half_width": -1, "v": 1}', '$.half_width'),
        ('{"type": "linear_image", "inner": {"type": "ball", "dim": 2}, "matrix": [[1, 0]], "v": 1}',
         '$.matrix[0]'),
        ('{"type": "patched_self_polar", "n": 1, "epsilon": 0.9, "delta": 0.1, "seed": 0, "v": 1}',
         '$.epsilon'),
    ]
    for text, path in cases:
        with pytest.raises(SpecParseError) as excinfo:
            parse_spec(text)
        assert excinfo.value.path == path, text


def test_odd_dimension_is_rejected_at_realization():
    spec = parse_spec('{"type": "ball", "dim": 3, "v": 1}')
    with pytest.raises(InvalidInputError):
        realize(spec)
    with pytest.raises(InvalidInputError):
        realize(parse_spec('{"type": "interval", "half_width": 1, "v": 1}'))


def test_realize_records_hash_and_tolerances():
    spec = load_spec('ellipse')
    body = realize(spec, {'eq_tol': 1e-7, 'newton_tol': None})
    assert body.meta['spec_hash'] == spec_hash(spec)
    assert body.tolerances.eq_tol == 1e-7
    assert body.tolerances.newton_tol == 1e-12
    assert body.spec == spec
    assert realize(spec).meta['spec_hash'] == body.meta['spec_hash']
