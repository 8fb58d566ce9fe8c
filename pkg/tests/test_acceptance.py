"""Acceptance suite: the seven top-level criteria at their stated tolerances.

Each test prints one PASS/FAIL line. The evidence is built once per module
on the default configuration and reused where a criterion aggregates
earlier ones.
"""

import filecmp
import time
from pathlib import Path

import numpy as np
import pytest

from blochdegen.cli import COMMANDS, main
from blochdegen.config import load_config
from blochdegen.experiments import (
    build_setup,
    degeneracy_ladder,
    external_channel,
    null_result,
    operator_identities,
    transformation_laws,
)

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "default.yaml"


def _report(capsys, number, title, failures, detail):
    status = "PASS" if not failures else "FAIL"
    line = f"criterion {number} {status}: {title}: {detail}"
    if failures:
        line += " | " + "; ".join(failures)
    with capsys.disabled():
        print(f"\n{line}")
    assert not failures, line


def _failed(checks):
    return [f"{c['name']} = {c['value']:.3e} vs {c['limit']:.1e}" for c in checks if not c["passed"]]


def _worst(checks, prefix=""):
    values = [c["value"] for c in checks if c["name"].startswith(prefix) and c["mode"] == "le"]
    return max(values) if values else float("nan")


def _timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


@pytest.fixture(scope="module")
def setup():
    return build_setup(load_config(CONFIG))


@pytest.fixture(scope="module")
def ladder(setup):
    return _timed(degeneracy_ladder, setup)


@pytest.fixture(scope="module")
def null(setup):
    return _timed(null_result, setup)


@pytest.fixture(scope="module")
def external(setup):
    return _timed(external_channel, setup)


def test_criterion_1_operator_identities(setup, capsys):
    result, elapsed = _timed(operator_identities, setup)
    failures = _failed(result["checks"])
    if result["basis_size"] < 250:
        failures.append(f"basis has only {result['basis_size']} G-vectors")
    if min(r["n_states"] for r in result["runs"]) < 50:
        failures.append("fewer than 50 random states")
    if elapsed >= 5:
        failures.append(f"runtime {elapsed:.1f} s >= 5 s")
    worst = max(c["value"] for c in result["checks"] if c["name"] != "mutant_time_reversal_detected")
    _report(capsys, 1, "operator identities", failures,
            f"max residual {worst:.2e} over {result['basis_size']} G-vectors, {elapsed:.2f} s")


def test_criterion_2_transformation_laws(setup, capsys):
    result, elapsed = _timed(transformation_laws, setup)
    failures = _failed(result["checks"])
    regimes = {(r["regime"], r["spin_orbit"]) for r in result["rows"]}
    if len(regimes) < 3:
        failures.append(f"only {len(regimes)} regimes")
    if result["n_eigenstates"] < 10:
        failures.append("fewer than 10 eigenstates")
    if elapsed >= 30:
        failures.append(f"runtime {elapsed:.1f} s >= 30 s")
    _report(capsys, 2, "transformation laws", failures,
            f"max eigen residual {_worst(result['checks'], 'eigen'):.2e}, "
            f"spin sign residual {_worst(result['checks'], 'spin'):.2e}, {elapsed:.2f} s")


def test_criterion_3_degeneracy_ladder(ladder, capsys):
    result, elapsed = ladder
    failures = _failed(result["checks"])
    names = {c["name"] for c in result["checks"]}
    for needed in ("fourfold_only pinacoidal_noso", "fourfold_only pinacoidal_so", "fourfold_only pedial_noso",
                   "doublets_only pedial_so", "kramers_spread pedial_so", "E1_equals_a1 pinacoidal_so"):
        if needed not in names:
            failures.append(f"missing check {needed}")
    if elapsed >= 120:
        failures.append(f"runtime {elapsed:.1f} s >= 2 min")
    spread = max(c["value"] for c in result["checks"] if "spread" in c["name"])
    _report(capsys, 3, "degeneracy ladder", failures,
            f"max cluster spread {spread:.2e} Ha, {elapsed:.2f} s")


def test_criterion_4_null_result(null, capsys):
    result, elapsed = null
    failures = _failed(result["checks"])
    if len(result["rows"]) < 20:
        failures.append(f"only {len(result['rows'])} seeded pairs")
    if any(r["scan"] is None for r in result["rows"]):
        failures.append("a seeded pair has no first-order split")
    if elapsed >= 180:
        failures.append(f"runtime {elapsed:.1f} s >= 3 min")
    ratio = max(r["null_ratio"] for r in result["rows"])
    exponent = min(r["scan"]["exponent"] for r in result["rows"] if r["scan"])
    _report(capsys, 4, "null result", failures,
            f"max null ratio {ratio:.2e}, min same-k exponent {exponent:.3f}, {elapsed:.2f} s")


@pytest.mark.slow
def test_criterion_5_external_channel(external, capsys):
    result, elapsed = external
    failures = _failed(result["checks"])
    names = {c["name"] for c in result["checks"]}
    for needed in ("beta_prime_vs_quadrature", "pinacoidal_pt_vs_oracle", "pinacoidal_ladder_exponent",
                   "pedial_pt_vs_oracle"):
        if needed not in names:
            failures.append(f"missing check {needed}")
    if result["pinacoidal"]["supercell"]["dimension"] > 2000:
        failures.append("supercell matrix larger than 2000")
    if elapsed >= 600:
        failures.append(f"runtime {elapsed:.1f} s >= 10 min")
    pin, ped = result["pinacoidal"], result["pedial"]
    _report(capsys, 5, "external-field channel", failures,
            f"beta' vs quadrature {next(c['value'] for c in result['checks'] if c['name'] == 'beta_prime_vs_quadrature'):.1e}, "
            f"pinacoidal {pin['relative_error']:.2%}, pedial {ped['relative_error']:.2%}, "
            f"ladder exponent {result['scan']['exponent']:.3f}, {elapsed:.1f} s")


@pytest.mark.slow
def test_criterion_6_subspace_maps(ladder, null, external, capsys):
    maps = {}
    maps["degeneracy pedial_so"] = next(
        c["value"] for c in ladder[0]["checks"] if c["name"] == "subspace_maps pedial_so")
    for row in null[0]["rows"]:
        residuals = row["outcome"]["residuals"]
        maps[f"null seed {row['index']}"] = max(v for k, v in residuals.items() if k.startswith("subspace_"))
    for regime in ("pinacoidal", "pedial"):
        residuals = external[0][regime]["outcome"]["residuals"]
        maps[f"external {regime}"] = max(v for k, v in residuals.items() if k.startswith("subspace_"))
    failures = [f"{k} = {v:.3e}" for k, v in maps.items() if not v <= 1e-10]
    _report(capsys, 6, "subspace maps", failures,
            f"{len(maps)} split cases, max projector residual {max(maps.values()):.2e}")


@pytest.mark.slow
def test_criterion_7_determinism(tmp_path, capsys):
    runs = []
    start = time.perf_counter()
    for label in ("first", "second"):
        root = tmp_path / label
        codes = {cmd: main([cmd, "--config", str(CONFIG), "--out", str(root / cmd)]) for cmd in COMMANDS}
        runs.append((root, codes))
    elapsed = time.perf_counter() - start
    failures = [f"{cmd} exited {rc}" for cmd, rc in runs[0][1].items() if rc != 0]
    compared = 0
    for cmd in COMMANDS:
        a, b = runs[0][0] / cmd, runs[1][0] / cmd
        names = sorted(p.name for p in a.iterdir())
        if names != sorted(p.name for p in b.iterdir()):
            failures.append(f"{cmd}: different file sets")
            continue
        for name in names:
            compared += 1
            if not filecmp.cmp(a / name, b / name, shallow=False):
                failures.append(f"{cmd}/{name} differs")
    _report(capsys, 7, "determinism", failures,
            f"{compared} output files byte-identical across two runs of all commands, {elapsed:.0f} s")
