import numpy as np
import pytest

from msrc import DEFAULT_PARAMS, LossyBackend, MaskSchedule, decode_image, encode_image, generate_synthetic
from msrc.errors import CodecError
from msrc.pixio import Image


@pytest.mark.parametrize("kind", ["constant", "uniform_noise", "gradient", "checker", "natural"])
@pytest.mark.parametrize("backend", [LossyBackend("quantize", 16), LossyBackend("quantize", 2), LossyBackend("down2x")])
@pytest.mark.parametrize("channels", [1, 3])
def test_roundtrip(kind, backend, channels):
    img = generate_synthetic(kind, 13, 9, channels, seed=5)
    result = encode_image(img, MaskSchedule("square", 4, 10.5, 3), backend)
    assert decode_image(result.data) == img


@pytest.mark.parametrize("shape", [(1, 1), (1, 7), (7, 1), (2, 2)])
def test_tiny_images(shape):
    img = generate_synthetic("uniform_noise", shape[1], shape[0], seed=2)
    assert decode_image(encode_image(img, MaskSchedule(T=12)).data) == img


def test_wide_residual_uses_msb_plane():
    # q=128 leaves residuals spanning more than 64 values
    img = generate_synthetic("gradient", 64, 4)
    result = encode_image(img, MaskSchedule(T=2), LossyBackend("quantize", 128))
    assert result.container.channels[0].flag == 1
    assert result.msb_bpp > 0
    assert decode_image(result.data) == img


def test_extreme_values():
    planes = np.zeros((1, 4, 4), np.uint8)
    planes[0, ::2, ::2] = 255
    img = Image(planes)
    for backend in (LossyBackend("down2x"), LossyBackend("quantize", 128)):
        assert decode_image(encode_image(img, MaskSchedule(T=3), backend).data) == img


def test_bpp_accounting():
    img = generate_synthetic("natural", 24, 16, seed=1)
    r = encode_image(img, MaskSchedule(T=4))
    parts = r.lossy_bpp + r.msb_bpp + r.lsb_bpp + r.header_bpp
    assert parts == pytest.approx(r.total_bpp)


def test_fitted_params_travel_in_container():
    img = generate_synthetic("constant", 16, 16)
    r = encode_image(img, MaskSchedule(T=4), LossyBackend("down2x"), fit_steps=2)
    assert decode_image(r.data) == img
    assert r.container.params != DEFAULT_PARAMS or r.total_bpp > 0


def test_deterministic_bytes():
    img = generate_synthetic("natural", 20, 20, 3, seed=4)
    assert encode_image(img).data == encode_image(img).data
    assert encode_image(img).data != encode_image(img, MaskSchedule(seed=43)).data


def test_tampered_stream_never_silent():
    img = generate_synthetic("natural", 16, 16, seed=4)
    data = bytearray(encode_image(img, MaskSchedule(T=4)).data)
    data[-3] ^= 0x40
    with pytest.raises(CodecError):
        decode_image(bytes(data))
