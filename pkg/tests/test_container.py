import struct

import pytest

from msrc.codec import encode_image
from msrc.container import ChannelStreams, Container, read_container, write_container
from msrc.errors import BadMagic, CrcMismatch, InvalidHeader, LengthMismatch, UnsupportedVersion
from msrc.estimator import DEFAULT_PARAMS, PARAMS_BLOB_SIZE
from msrc.lossy import LossyBackend
from msrc.pixio import generate_synthetic
from msrc.sampler import MaskSchedule


def minimal(**kw):
    fields = dict(
        width=1, height=1, backend=LossyBackend(), schedule=MaskSchedule(), params=DEFAULT_PARAMS,
        lossy=b"\x01\x02", channels=[ChannelStreams(-2, 0, b"abcdefgh")], pmf_digest=0x1234,
    )
    fields.update(kw)
    return Container(**fields)


def test_header_size_one_channel():
    fixed = 4 + 1 + 4 + 4 + 1 + 1 + 1 + 1 + 1 + 8 + 8
    expected = fixed + 2 + PARAMS_BLOB_SIZE + (2 + 1 + 4 + 4) + 4 + 8 + 4
    c = minimal()
    assert c.header_size == expected == 313
    assert len(write_container(c)) == expected + 2 + 8


def test_roundtrip_fields():
    c = minimal(channels=[ChannelStreams(-2, 1, b"lsb", b"\x00\x01"), ChannelStreams(0, 0, b"x"), ChannelStreams(3, 0, b"y")])
    assert read_container(write_container(c)) == c


def test_flag_zero_rejects_msb():
    with pytest.raises(ValueError):
        write_container(minimal(channels=[ChannelStreams(0, 0, b"", b"\x01")]))


def test_errors():
    data = write_container(minimal())
    with pytest.raises(BadMagic):
        read_container(b"XXXX" + data[4:])
    with pytest.raises(BadMagic):
        read_container(b"")
    with pytest.raises(UnsupportedVersion):
        read_container(data[:4] + b"\x02" + data[5:])
    with pytest.raises(LengthMismatch):
        read_container(data[:-1])
    with pytest.raises(LengthMismatch):
        read_container(data + b"\x00")
    with pytest.raises(LengthMismatch):
        read_container(data[:40])
    flipped = bytearray(data)
    flipped[-1] ^= 0x10
    with pytest.raises(CrcMismatch):
        read_container(bytes(flipped))
    header = bytearray(data)
    header[30] ^= 0x01  # inside the seed field
    with pytest.raises(CrcMismatch):
        read_container(bytes(header))


def test_semantic_checks_after_crc():
    bad = minimal(channels=[ChannelStreams(0, 0, b"")] * 2)
    with pytest.raises(InvalidHeader):
        read_container(write_container(bad))


def test_declared_size_needs_long_enough_streams():
    with pytest.raises(InvalidHeader):
        read_container(write_container(minimal(width=4096, height=4096)))


def test_real_image_roundtrip():
    img = generate_synthetic("checker", 9, 6, 3, seed=1)
    result = encode_image(img, MaskSchedule(T=3))
    c = read_container(result.data)
    assert c == result.container
    assert struct.unpack_from("<II", result.data, 5) == (9, 6)
