import json

import jsonschema
import numpy as np
import pytest

import cropemu


def load(path):
    with open(path) as f:
        return json.load(f)


@pytest.mark.parametrize("name", ["desk.json", "tiny.json"])
def test_shipped_configs_validate(source_dir, name):
    schema = load(source_dir / "schemas" / "config.schema.json")
    doc = load(source_dir / "config" / name)
    jsonschema.validate(doc, schema)
    full = json.loads(cropemu.load_config(str(source_dir / "config" / name)))
    jsonschema.validate(full, schema)


def test_unknown_key_rejected_by_both(source_dir):
    schema = load(source_dir / "schemas" / "config.schema.json")
    doc = {"discovery": {"topk": 10}}
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(doc, schema)
    with pytest.raises(cropemu.ConfigError, match="discovery.topk: unknown key"):
        cropemu.parse_config(json.dumps(doc))


def test_config_hash_ignores_output_dir():
    a = cropemu.config_hash(json.dumps({"paths": {"outputDir": "a"}}))
    b = cropemu.config_hash(json.dumps({"paths": {"outputDir": "b"}}))
    c = cropemu.config_hash(json.dumps({"seed": 1}))
    assert a == b != c


def test_report_validates(tiny_run, source_dir):
    schema = load(source_dir / "schemas" / "report.schema.json")
    report = load(tiny_run / "report.json")
    jsonschema.validate(report, schema)
    assert report["discovery"]["environmentCount"] == 18
    assert len(report["uncertainty"]["calibration"]["perOutput"]) == 13


def test_manifest_checksums(tiny_run):
    manifest = load(tiny_run / "manifest.json")
    outputs = manifest["stages"]["discover"]["outputs"]

    def fnv(path):
        h = 0xCBF29CE484222325
        for byte in path.read_bytes():
            h = ((h ^ byte) * 0x100000001B3) % (1 << 64)
        return f"{h:016x}"

    for name in ["pca.csv", "resilient.csv", "discovery.json"]:
        assert outputs[name] == fnv(tiny_run / name)


def test_pca_matches_numpy(tiny_run):
    disc = load(tiny_run / "discovery.json")
    traits = np.genfromtxt(tiny_run / "resilient.csv", delimiter=",", names=True)
    cols = np.column_stack([traits[n] for n in disc["traitNames"]])
    sd = cols.std(axis=0, ddof=1)
    keep = sd > 0
    z = (cols[:, keep] - cols[:, keep].mean(axis=0)) / sd[keep]
    eig = np.sort(np.linalg.eigvalsh(np.cov(z, rowvar=False)))[::-1]
    np.testing.assert_allclose(disc["pca"]["explained"], eig[:2] / eig.sum(), rtol=1e-9)


def test_missing_upstream_names_stage(tmp_path, source_dir):
    with pytest.raises(cropemu.InputError, match="cropemu swag"):
        cropemu.run_stage("discover", str(source_dir / "config" / "tiny.json"), str(tmp_path / "run"))
