import json
import math

import numpy as np
import pytest

from clickcount import cli
from clickcount.errors import StabilityError
from clickcount.states import load_pnd
from clickcount.tables import parse


def run(tmp_path, *argv, name="out.csv"):
    out = tmp_path / name
    code = cli.main([*argv, "-o", str(out)])
    assert code == 0
    return parse(out.read_text())


def column(table, name):
    _, cols, rows = table
    i = cols.index(name)
    return np.array([r[i] for r in rows])


class TestClicks:
    def test_fock8_mode(self, tmp_path):
        table = run(tmp_path, "clicks", "--state", "fock:8", "--detectors", "10000")
        assert int(np.argmax(column(table, "p_click"))) == 8

    def test_squeezed_steps(self, tmp_path):
        table = run(tmp_path, "clicks", "--state", "squeezed:1", "--steps", "3")
        p = column(table, "p_click")
        assert p.size == 9
        assert p[1::2].sum() > 0

    def test_coherent_vacuum(self, tmp_path):
        p = column(run(tmp_path, "clicks", "--state", "coherent:0", "--detectors", "5"), "p_click")
        assert p[0] == 1.0

    def test_steps_alias_identical(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert cli.main(["clicks", "--state", "odd:2", "--steps", "4", "-o", str(a)]) == 0
        assert cli.main(["clicks", "--state", "odd:2", "--detectors", "16", "-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_array_alias_identical(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert cli.main(["clicks", "--state", "coherent:3", "--array", "5", "--eta", "0.7", "-o", str(a)]) == 0
        assert cli.main(["clicks", "--state", "coherent:3", "--detectors", "25", "--eta", "0.7", "-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_nu_total(self, tmp_path):
        manifest, _, _ = run(tmp_path, "clicks", "--state", "fock:2", "-N", "25", "--nu-total", "0.2")
        assert manifest["nu"] == pytest.approx(0.008)

    def test_fig2_preset_has_two_columns(self, tmp_path):
        manifest, cols, rows = run(tmp_path, "clicks", "--preset", "fig2b")
        assert cols == ["k", "p_click[fock:8]", "p_click[fock:9]"]
        assert manifest["n_detectors"] == 100
        assert len(rows) == 101

    def test_round_trip_through_load_pnd(self, tmp_path):
        p = column(run(tmp_path, "clicks", "--state", "squeezed:0.5", "-N", "8", "--eta", "0.9"), "p_click")
        pnd = load_pnd({"probabilities": p.tolist()})
        np.testing.assert_array_equal(pnd.probs, p)

    def test_weights_with_coherent(self, tmp_path):
        p = column(run(tmp_path, "clicks", "--state", "coherent:2", "-N", "3", "--weights", "0.5,0.3,0.2"), "p_click")
        assert p.sum() == pytest.approx(1.0, abs=1e-14)

    def test_weights_rejected_for_fock(self, tmp_path):
        assert cli.main(["clicks", "--state", "fock:2", "-N", "2", "--weights", "0.3,0.7"]) == cli.EXIT_USAGE

    def test_json_format(self, tmp_path):
        manifest, cols, rows = run(tmp_path, "clicks", "--state", "fock:1", "-N", "3", "--format", "json", name="o.json")
        assert manifest["command"] == "clicks"
        assert rows[1] == [1, 1.0]

    def test_file_state(self, tmp_path):
        doc = tmp_path / "s.json"
        doc.write_text(json.dumps({"probabilities": [0.0, 0.0, 1.0]}))
        p = column(run(tmp_path, "clicks", "--state", f"file:{doc}", "-N", "2"), "p_click")
        np.testing.assert_allclose(p, [0, 0.5, 0.5], atol=1e-15)

    def test_17_digits(self, tmp_path):
        out = tmp_path / "o.csv"
        cli.main(["clicks", "--state", "coherent:1", "-N", "3", "-o", str(out)])
        line = [ln for ln in out.read_text().splitlines() if ln.startswith("1,")][0]
        value = line.split(",")[1]
        assert len(value.replace(".", "").lstrip("0").split("e")[0]) == 17


class TestCompare:
    def test_fig4_layout(self, tmp_path):
        manifest, cols, rows = run(tmp_path, "compare", "--preset", "fig4", "--alpha2", "4")
        assert cols[1:] == [
            "p_click_perfect", "p_mandel_perfect", "p_click_loss", "p_mandel_loss",
            "p_click_noise", "p_mandel_noise", "p_click_both", "p_mandel_both",
        ]
        both = manifest["scenarios"][3]
        assert both["nu"] == pytest.approx(0.008) and both["nu_total"] == pytest.approx(0.2)
        assert column((manifest, cols, rows), "p_click_perfect")[0] == 0.0

    def test_odd_perfect(self, tmp_path):
        table = run(tmp_path, "compare", "--state", "odd:4", "-N", "25")
        assert column(table, "p_click")[0] == 0.0
        assert column(table, "p_mandel")[0] == 0.0

    def test_mandel_uses_total_noise(self, tmp_path):
        manifest, _, _ = run(tmp_path, "compare", "--state", "odd:4", "-N", "25", "--eta", "0.8", "--nu", "0.008")
        assert manifest["scenarios"][0]["nu_total"] == pytest.approx(0.2)

    def test_vacuum(self, tmp_path):
        table = run(tmp_path, "compare", "--state", "vacuum", "-N", "6", "--eta", "0.5")
        assert column(table, "p_click")[0] == 1.0
        assert column(table, "p_mandel")[0] == 1.0

    def test_fig4_needs_alpha2(self):
        assert cli.main(["compare", "--preset", "fig4"]) == cli.EXIT_USAGE


class TestQscan:
    def test_fig5(self, tmp_path):
        table = run(tmp_path, "qscan", "--preset", "fig5")
        n = column(table, "N")
        closed = column(table, "Q_closed")
        numeric = column(table, "Q_from_distribution")
        assert n[0] == 1 and n[-1] == 1024
        assert np.max(np.abs(closed - numeric)) <= 1e-10
        assert closed[199] == pytest.approx(-0.09516, abs=1e-5)
        assert closed[0] == pytest.approx(-1.0, abs=1e-8)
        assert closed[-1] == pytest.approx(math.exp(-20 / 1024) - 1, abs=1e-15)
        assert closed[-1] == pytest.approx(-0.01934, abs=1e-5)

    def test_n_list(self, tmp_path):
        table = run(tmp_path, "qscan", "--alpha2", "5", "--n-list", "1,10,100")
        assert column(table, "N").tolist() == [1, 10, 100]

    def test_needs_alpha2(self):
        assert cli.main(["qscan"]) == cli.EXIT_USAGE


class TestSimulate:
    def test_single_photon(self, tmp_path):
        table = run(tmp_path, "simulate", "--state", "fock:1", "-N", "4", "--samples", "2000", "--seed", "9")
        p = column(table, "p_empirical")
        assert p.tolist() == [0.0, 1.0, 0.0, 0.0, 0.0]

    def test_same_seed_same_file(self, tmp_path):
        args = ["simulate", "--state", "coherent:3", "-N", "8", "--eta", "0.8", "--samples", "50000", "--seed", "123"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert cli.main([*args, "-o", str(a)]) == 0
        assert cli.main([*args, "-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert json.loads(a.read_text().splitlines()[7].split("=", 1)[1]) == 123


class TestPovm:
    def test_n2(self, tmp_path):
        manifest, cols, rows = run(tmp_path, "povm", "-N", "2", "--n-max", "3")
        assert rows[2][cols.index("n=3")] == 0.75
        m = np.array([r[1:] for r in rows])
        np.testing.assert_allclose(m.sum(axis=0), 1.0, atol=1e-15)
        assert m[:, 0].tolist() == [1.0, 0.0, 0.0]

    def test_methods_agree(self, tmp_path):
        a = run(tmp_path, "povm", "-N", "6", "--n-max", "8", "--eta", "0.7", "--nu", "0.05", name="a.csv")
        b = run(tmp_path, "povm", "-N", "6", "--n-max", "8", "--eta", "0.7", "--nu", "0.05", "--method", "closed", name="b.csv")
        np.testing.assert_allclose(np.array(a[2]), np.array(b[2]), atol=1e-13)

    def test_budget_exit_code(self):
        assert cli.main(["povm", "-N", "100000", "--n-max", "1000"]) == cli.EXIT_RESOURCE


class TestPhotons:
    def test_fig3a(self, tmp_path):
        table = run(tmp_path, "photons", "--preset", "fig3a")
        p = column(table, "p_photon")
        assert p[0] == pytest.approx(1 / math.cosh(1), rel=1e-14)
        assert p[1::2].sum() == 0


def test_stability_failure_exit_code(monkeypatch, tmp_path):
    def boom(*a, **k):
        raise StabilityError("forced")

    monkeypatch.setattr(cli, "click_distribution", boom)
    assert cli.main(["clicks", "--state", "fock:3", "-N", "4"]) == cli.EXIT_STABILITY


def test_bad_state_exit_code():
    assert cli.main(["clicks", "--state", "banana:2", "-N", "3"]) == cli.EXIT_USAGE


def test_argparse_errors_exit_1():
    with pytest.raises(SystemExit) as info:
        cli.main(["clicks", "--detectors", "notanint"])
    assert info.value.code == cli.EXIT_USAGE


def test_negative_alpha_is_usage_error():
    assert cli.main(["clicks", "--state", "coherent:-1", "-N", "3"]) == cli.EXIT_USAGE
