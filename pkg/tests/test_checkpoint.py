import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from dualvd import checkpoint
from dualvd.checkpoint import CheckpointError

arrays = hnp.arrays(np.float64, hnp.array_shapes(min_dims=0, max_dims=3, max_side=4),
                    elements=st.floats(allow_nan=False, width=64))


@given(st.dictionaries(st.text(min_size=1, max_size=12), arrays, max_size=5))
def test_round_trip_is_byte_identical(params):
    blob = checkpoint.dumps(params)
    back = checkpoint.loads(blob)
    assert list(back) == list(params)
    for k in params:
        assert back[k].shape == np.shape(params[k])
        assert back[k].tobytes() == np.asarray(params[k], dtype=np.float64).tobytes()
    assert checkpoint.dumps(back) == blob


def test_layout_is_little_endian():
    blob = checkpoint.dumps({"ab": np.array([[1.0, 2.0]])})
    assert blob[:4] == b"DVD1"
    assert blob[4:8] == (1).to_bytes(4, "little")
    assert blob[8:10] == (2).to_bytes(2, "little") and blob[10:12] == b"ab"
    assert blob[12] == 2 and blob[13:21] == (1).to_bytes(4, "little") + (2).to_bytes(4, "little")
    assert np.frombuffer(blob[21:], "<f8").tolist() == [1.0, 2.0]


@pytest.mark.parametrize("blob", [b"XXXX\x00\x00\x00\x00", b"DVD1\x01\x00\x00\x00\x05", b"DVD1\x00\x00\x00\x00junk"])
def test_corrupt_files_are_rejected(blob):
    with pytest.raises(CheckpointError):
        checkpoint.loads(blob)


def test_save_load_files(tmp_path):
    p = {"w": np.arange(6.0).reshape(2, 3)}
    checkpoint.save(tmp_path / "a.dvd", p)
    checkpoint.save(tmp_path / "b.dvd", checkpoint.load(tmp_path / "a.dvd"))
    assert (tmp_path / "a.dvd").read_bytes() == (tmp_path / "b.dvd").read_bytes()
