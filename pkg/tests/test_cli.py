import numpy as np
import pytest

from msrc.bench import read_csv
from msrc.cli import main
from msrc.estimator import EstimatorParams
from msrc.pixio import generate_synthetic, read_image_file, write_image_file


@pytest.fixture
def gray(tmp_path):
    path = tmp_path / "g.pgm"
    write_image_file(path, generate_synthetic("natural", 20, 14, seed=3))
    return path


def test_encode_decode_roundtrip(tmp_path, gray):
    enc = tmp_path / "g.msrc"
    out = tmp_path / "out.pgm"
    assert main(["encode", "--input", str(gray), "--output", str(enc), "--T", "4", "--scheduler", "square"]) == 0
    assert main(["decode", "--input", str(enc), "--output", str(out)]) == 0
    assert out.read_bytes() == gray.read_bytes()


def test_color_roundtrip(tmp_path):
    src = tmp_path / "c.ppm"
    write_image_file(src, generate_synthetic("checker", 9, 7, 3, seed=1))
    enc = tmp_path / "c.msrc"
    out = tmp_path / "c2.ppm"
    assert main(["encode", "--input", str(src), "--output", str(enc), "--lossy", "down2x", "--T", "3"]) == 0
    assert main(["decode", "--input", str(enc), "--output", str(out)]) == 0
    assert out.read_bytes() == src.read_bytes()


def test_usage_error_on_zero_T(tmp_path, gray):
    with pytest.raises(SystemExit) as exc:
        main(["encode", "--input", str(gray), "--output", str(tmp_path / "x"), "--T", "0"])
    assert exc.value.code == 1


def test_corrupt_file_leaves_no_output(tmp_path, gray, capsys):
    enc = tmp_path / "g.msrc"
    main(["encode", "--input", str(gray), "--output", str(enc), "--T", "2"])
    data = bytearray(enc.read_bytes())
    data[-1] ^= 1
    enc.write_bytes(bytes(data))
    out = tmp_path / "bad.pgm"
    assert main(["decode", "--input", str(enc), "--output", str(out)]) == 1
    assert "CrcMismatch" in capsys.readouterr().err
    assert not out.exists()


def test_inspect(tmp_path, gray, capsys):
    enc = tmp_path / "g.msrc"
    main(["encode", "--input", str(gray), "--output", str(enc), "--T", "5", "--scheduler", "linear"])
    capsys.readouterr()
    assert main(["inspect", "--input", str(enc), "--machine"]) == 0
    fields = dict(line.split("=", 1) for line in capsys.readouterr().out.splitlines())
    assert fields["T"] == "5" and fields["scheduler"] == "linear"
    assert fields["ch0.msb_bytes"] == "0" and fields["ch0.flag"] == "0"
    int(fields["pmf_digest"], 16)
    assert len(fields["pmf_digest"]) == 16


def test_bench_and_fit(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for i, kind in enumerate(["gradient", "natural", "checker"]):
        write_image_file(corpus / f"{i}_{kind}.pgm", generate_synthetic(kind, 16, 12, seed=i))
    csv_path = tmp_path / "bench.csv"
    assert main(["bench", "--corpus", str(corpus), "--T-sweep", "1,2,5,8,12", "--schedulers", "cosine,square", "--csv", str(csv_path)]) == 0
    rows = read_csv(csv_path)
    assert len(rows) == 3 * 2 * 5
    for r in rows:
        bpsp = r.bpsp
        assert len(bpsp) == r.T
    params_path = tmp_path / "p.bin"
    assert main(["fit", "--corpus", str(corpus), "--out", str(params_path), "--iters", "3", "--seed", "1"]) == 0
    first = params_path.read_bytes()
    EstimatorParams.from_bytes(first)
    assert main(["fit", "--corpus", str(corpus), "--out", str(params_path), "--iters", "3", "--seed", "1"]) == 0
    assert params_path.read_bytes() == first


def test_bench_rejects_unknown_scheduler(tmp_path):
    corpus = tmp_path / "c"
    corpus.mkdir()
    write_image_file(corpus / "a.pgm", generate_synthetic("constant", 4, 4))
    assert main(["bench", "--corpus", str(corpus), "--schedulers", "sine", "--csv", str(tmp_path / "x.csv")]) == 1


def test_generate(tmp_path):
    out = tmp_path / "n.ppm"
    assert main(["generate", "--kind", "uniform_noise", "--width", "5", "--height", "4", "--channels", "3", "--seed", "7", "--output", str(out)]) == 0
    assert np.array_equal(read_image_file(out).planes, generate_synthetic("uniform_noise", 5, 4, 3, 7).planes)
