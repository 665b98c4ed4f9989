import xml.etree.ElementTree as ET

import pytest

from remem import bench, plotting
from remem.pagetable import Backend

ROWS = [
    {
        "backend": backend,
        "size_bytes": size,
        "n": 10,
        "mean_ns": base * size,
        "median_ns": base * size,
        "stddev_ns": 0.1 * base * size,
        "min_ns": int(0.8 * base * size),
        "max_ns": int(1.3 * base * size),
        "mean_mb_s": 1e12 / (base * size),
    }
    for backend, base in (("local", 0.5), ("vfs", 8.0), ("remote", 2.0))
    for size in (1_000_000, 2_000_000, 3_000_000)
]


def test_plot_is_wellformed_svg(tmp_path):
    out = plotting.plot_summary(ROWS, tmp_path / "fig.svg")
    content = out.read_text()
    assert content
    ET.fromstring(content)  # well-formed XML


def test_plot_has_one_series_per_backend(tmp_path):
    out = plotting.plot_summary(ROWS, tmp_path / "fig.svg")
    content = out.read_text()
    for label in ("local", "vfs", "remote"):
        assert f">{label}<" in content or f">{label} <" in content or label in content


def test_plot_deterministic_re_render(tmp_path):
    a = plotting.plot_summary(ROWS, tmp_path / "a.svg", deterministic=True)
    b = plotting.plot_summary(ROWS, tmp_path / "b.svg", deterministic=True)
    assert a.read_bytes() == b.read_bytes()


def test_plot_throughput_mode(tmp_path):
    out = plotting.plot_summary(ROWS, tmp_path / "fig.svg", metric="throughput")
    ET.fromstring(out.read_text())


def test_plot_rejects_unknown_metric(tmp_path):
    with pytest.raises(ValueError):
        plotting.plot_summary(ROWS, tmp_path / "fig.svg", metric="latency")


def test_plot_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        plotting.plot_summary([], tmp_path / "fig.svg")


def test_plot_from_real_summary(tmp_path, table):
    result = bench.run_local(100_000, 3, 42, table=table)
    stats = bench.summarize(result.records)
    path = tmp_path / "summary.csv"
    bench.write_summary_csv(stats, path)
    rows = bench.read_summary_csv(path)
    out = plotting.plot_summary(rows, tmp_path / "fig.svg")
    ET.fromstring(out.read_text())
    assert Backend.LOCAL.value in out.read_text()
