import gzip
import io
import json
import tarfile

import pytest

import firmscan


def test_entropy_bounds():
    assert firmscan.shannon_entropy(b"\x00" * 4096) == 0.0
    uniform = bytes(range(256)) * 16
    assert abs(firmscan.shannon_entropy(uniform) - 8.0) < 1e-9
    with pytest.raises(Exception):
        firmscan.shannon_entropy(b"")


def test_parse_version():
    v = firmscan.parse_version("v1.36.0")
    assert v is not None
    assert v.numeric == [1, 36, 0]
    assert firmscan.parse_version("2009") is None
    assert firmscan.parse_version("dnsmasq-2.33").numeric == [2, 33]
    pre = firmscan.parse_version("1.0.0-rc1")
    assert pre.prerelease == ["rc1"]


def test_compare_and_satisfies():
    assert firmscan.compare("1.9.2", "1.36.0") == -1
    assert firmscan.compare("2.33", "2.33.0") == 0
    assert firmscan.satisfies("1.4.5", "~", "1.4.4")
    assert not firmscan.satisfies("1.5.0", "~", "1.4.4")
    assert firmscan.satisfies("1.9.0", "^", "1.4.4")
    assert not firmscan.satisfies("2.0.0", "^", "1.4.4")


def test_scan_signatures_and_classify():
    blob = gzip.compress(b"hello firmware")
    hits = firmscan.scan_signatures(blob)
    assert hits and hits[0][:2] == (0, "gzip")
    verdict = firmscan.classify_encryption(blob)
    assert not verdict.encrypted


def test_extract_python_built_archive(tmp_path):
    payload = b"BusyBox v1.21.1 (2013-07-13) multi-call binary"
    inner = io.BytesIO()
    with tarfile.open(fileobj=inner, mode="w") as tar:
        info = tarfile.TarInfo("bin/busybox")
        info.size = len(payload)
        tar.addfile(info, io.BytesIO(payload))
    blob = gzip.compress(inner.getvalue())

    tree = firmscan.extract(blob, tmp_path / "out")
    paths = {entry[0]: entry[2] for entry in tree["files"]}
    assert paths["bin/busybox"] == 2
    assert not tree["max_depth_reached"]

    extracted = (tmp_path / "out" / "bin" / "busybox").read_bytes()
    assert extracted == payload
    evidence = firmscan.extract_library_version(extracted, "busybox")
    assert evidence["version"] == "1.21.1"


def test_cpe_and_match(tmp_path):
    cpe = firmscan.parse_cpe("cpe:/a:samba:samba:4.0")
    assert cpe.part == "a"
    assert cpe.product == "samba"
    assert cpe.version_text == "4.0"

    feed = [
        {
            "cve_id": "CVE-2018-1000517",
            "published": "2018-06-26",
            "cvss_base": 9.8,
            "cwe_ids": ["CWE-119"],
            "applicability": [
                {"cpe": "cpe:2.3:a:busybox:busybox:1.21.1:*:*:*:*:*:*:*"}
            ],
        }
    ]
    feed_path = tmp_path / "feed.json"
    feed_path.write_text(json.dumps(feed))
    db = firmscan.VulnDatabase.load(feed_path)
    assert db.entry_count == 1
    findings = db.match("busybox", "1.21.1")
    assert [f.cve_id for f in findings] == ["CVE-2018-1000517"]
    assert db.match("busybox", "1.21.2") == []
