import struct

import numpy as np
import pytest

from factorcast import io
from factorcast import tcn
from factorcast.errors import (
    BadMagicError,
    ConfigError,
    HeaderInconsistencyError,
    PayloadSizeError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
)
from factorcast.factor_model import itipup_fit


def sample_series(seed=0, n=6):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, 3, 2)), rng.standard_normal((n, 2, 2))


class TestSeriesFile:
    def test_roundtrip_byte_exact(self, tmp_path):
        cov, resp = sample_series()
        blob = io.series_to_bytes(cov, resp)
        cov2, resp2 = io.series_from_bytes(blob)
        np.testing.assert_array_equal(cov, cov2)
        np.testing.assert_array_equal(resp, resp2)
        assert io.series_to_bytes(cov2, resp2) == blob

        path = tmp_path / "data.fatt"
        io.write_series(path, cov, resp)
        cov3, resp3 = io.read_series(path)
        np.testing.assert_array_equal(cov, cov3)
        np.testing.assert_array_equal(resp, resp3)

    def test_covariates_only(self):
        cov, _ = sample_series()
        cov2, resp2 = io.series_from_bytes(io.series_to_bytes(cov))
        np.testing.assert_array_equal(cov, cov2)
        assert resp2 is None

    def test_bad_magic(self):
        cov, resp = sample_series()
        blob = bytearray(io.series_to_bytes(cov, resp))
        blob[:4] = b"XATT"
        with pytest.raises(BadMagicError):
            io.series_from_bytes(bytes(blob))

    def test_unknown_version(self):
        cov, resp = sample_series()
        blob = bytearray(io.series_to_bytes(cov, resp))
        blob[4:8] = struct.pack("<I", 99)
        with pytest.raises(UnsupportedVersionError):
            io.series_from_bytes(bytes(blob))

    def test_foreign_endian_dtype_rejected(self):
        cov, resp = sample_series()
        blob = bytearray(io.series_to_bytes(cov, resp))
        blob[8:12] = struct.pack("<I", 2)  # reserved big-endian code
        with pytest.raises(UnsupportedDtypeError):
            io.series_from_bytes(bytes(blob))

    def test_truncated_payload(self):
        cov, resp = sample_series()
        blob = io.series_to_bytes(cov, resp)
        with pytest.raises(PayloadSizeError):
            io.series_from_bytes(blob[:-8])

    def test_trailing_garbage(self):
        cov, resp = sample_series()
        blob = io.series_to_bytes(cov, resp) + b"\x00" * 16
        with pytest.raises(PayloadSizeError):
            io.series_from_bytes(blob)

    def test_inconsistent_header_dims(self):
        cov, resp = sample_series()
        blob = bytearray(io.series_to_bytes(cov, resp))
        # first covariate dim lives right after magic+version+dtype+K
        blob[16:20] = struct.pack("<I", 0)
        with pytest.raises(HeaderInconsistencyError):
            io.series_from_bytes(bytes(blob))

    def test_truncated_header(self):
        cov, resp = sample_series()
        blob = io.series_to_bytes(cov, resp)
        with pytest.raises(PayloadSizeError):
            io.series_from_bytes(blob[:10])


class TestLoadingsFile:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        series = rng.standard_normal((20, 5, 4))
        fit = itipup_fit(series, (2, 3))
        path = tmp_path / "loadings.fldg"
        io.write_loadings(path, fit)
        loadings, iterations, change = io.read_loadings(path)
        assert loadings.ranks == (2, 3)
        assert iterations == fit.iterations_used
        assert change == fit.final_subspace_change
        for a, b in zip(loadings.loadings, fit.loadings.loadings):
            np.testing.assert_array_equal(a, b)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.fldg"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(BadMagicError):
            io.read_loadings(path)


class TestCheckpointErrors:
    def test_corrupt_checkpoint_distinct_errors(self):
        model = tcn.init_model(tcn.TcnConfig(input_width=2, output_width=1,
                                             channels=(3,), kernel_size=2,
                                             dilations=(1,)))
        blob = tcn.model_to_bytes(model)
        bad_magic = b"YUCK" + blob[4:]
        with pytest.raises(BadMagicError):
            tcn.model_from_bytes(bad_magic)
        bad_version = blob[:4] + struct.pack("<I", 77) + blob[8:]
        with pytest.raises(UnsupportedVersionError):
            tcn.model_from_bytes(bad_version)
        with pytest.raises(PayloadSizeError):
            tcn.model_from_bytes(blob[:-4])
        # weight count field disagreeing with the config
        mutated = bytearray(blob)
        (header_len,) = struct.unpack("<I", blob[8:12])
        count_pos = 12 + header_len + 8 * (2 + 2 + 1 + 1)
        mutated[count_pos : count_pos + 8] = struct.pack("<Q", 5)
        with pytest.raises(HeaderInconsistencyError):
            tcn.model_from_bytes(bytes(mutated))


class TestReportAndConfig:
    def test_report_roundtrip_preserves_floats(self, tmp_path):
        fields = {
            "method": "factor-tcn",
            "test_mse": 696.712345678901234,
            "ci_lo": 0.1 + 0.2,
            "seconds.train": 1.0 / 3.0,
            "ranks": (4, 3, 4),
            "seed": 7,
        }
        path = tmp_path / "report.txt"
        io.write_report(path, fields)
        back = io.read_report(path)
        assert float(back["test_mse"]) == fields["test_mse"]
        assert float(back["ci_lo"]) == fields["ci_lo"]
        assert float(back["seconds.train"]) == fields["seconds.train"]
        assert back["ranks"] == "4,3,4"
        assert int(back["seed"]) == 7

    def test_keyvalue_parser(self):
        text = """
        # comment line
        alpha = 1.5
        name = run-3  # trailing comment
        dims = 12,3,12
        """
        out = io.parse_keyvalue(text)
        assert out == {"alpha": "1.5", "name": "run-3", "dims": "12,3,12"}

    def test_malformed_line_rejected(self):
        with pytest.raises(ConfigError):
            io.parse_keyvalue("just some words\n")
        with pytest.raises(ConfigError):
            io.parse_keyvalue("= value\n")

    def test_missing_config_file(self):
        with pytest.raises(ConfigError):
            io.read_config_file("/nonexistent/path.cfg")
