import numpy as np

from osb_lib import dumps_report, format_float


def test_report_keys_are_sorted_at_every_level():
    payload = {'b': 1, 'a': {'z': True, 'm': None}}
    assert dumps_report(payload) == '{\n  "a": {\n    "m": null,\n    "z": true\n  },\n  "b": 1\n}\n'


def test_insertion_order_does_not_change_the_output():
    first = dumps_report({'worst_value': 0.1, 'check': 'star', 'details': {'rays': 8, 'dim': 4}})
    second = dumps_report({'details': {'dim': 4, 'rays': 8}, 'check': 'star', 'worst_value': 0.1})
    assert first == second


def test_numeric_lists_stay_on_one_line():
    assert dumps_report({'point': np.array([1.0, 0.5])}) == '{\n  "point": [1.0, 0.5]\n}\n'


def test_floats_keep_seventeen_digits():
    assert format_float(0.1) == '0.10000000000000001'
    assert format_float(2.0) == '2.0'
    assert format_float(float('inf')) == 'Infinity'
