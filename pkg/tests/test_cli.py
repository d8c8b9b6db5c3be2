import json
from fractions import Fraction

import pytest

from padic_forms.cli import (
    EXIT_CERTIFICATION,
    EXIT_NOT_INDEPENDENT,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_SINGULAR,
    EXIT_WRONG_VERDICT,
    main,
    run_sweep,
)
from padic_forms.finite import CyclicGroup, FiniteDistribution, Subgroup, haar_on, uniform
from padic_forms.forms import LAMBDA1, LAMBDA2


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def write(tmp_path, name, mu):
    path = tmp_path / name
    path.write_text(json.dumps(mu.to_json()))
    return str(path)


class TestClassify:
    def test_forced_non_unit(self, capsys):
        code, out, _ = run(capsys, "classify", "--p", "3", "--matrix", "1,1,1;1,3,9;1,9,3")
        assert code == EXIT_OK
        assert (out["verdict"], out["q"], out["k"]) == ("IdempotentForced", 1, 1)

    def test_singular(self, capsys):
        code, out, err = run(capsys, "classify", "--p", "2", "--matrix", "1,1,1;1,1,1;1,1,1")
        assert code == EXIT_SINGULAR and out["verdict"] == "Singular" and err

    def test_one_unit_with_trace(self, capsys):
        # det = 6 - 4 - 3 + 2 + 2 - 2 = 1, but only delta1 = 3 is a unit
        code, out, _ = run(capsys, "classify", "--p", "2", "--matrix", "1,1,1;1,3,2;1,2,2")
        assert code == EXIT_OK
        assert out["q"] == 0 and out["verdict"] == "CounterexampleExists"
        assert ["unit_grid", False] in out["trace"]
        assert out["recipe"]["template"] == "OneUnitDelta1"

    @pytest.mark.parametrize("argv", [
        ("classify", "--p", "2", "--matrix", "1,1,1;1,1"),
        ("classify", "--p", "4", "--matrix", "1,1,1;1,1,1;1,1,1"),
        ("classify", "--p", "2", "--matrix", "1,1,1;1,0,1;1,1,2"),
        ("classify", "--p", "2"),
        ("bogus",),
    ])
    def test_parse_errors(self, capsys, argv):
        assert run(capsys, *argv)[0] == EXIT_PARSE

    def test_raw_matrix_is_normalized(self, capsys):
        code, out, _ = run(capsys, "classify", "--p", "3", "--matrix", "3,3,3;3,9,27;3,27,9")
        assert code == EXIT_OK and out["k"] == 1 and out["shape"] == "L1"


class TestWitness:
    def test_shared_minimum_case(self, capsys):
        code, out, _ = run(capsys, "witness", "--p", "3", "--matrix", "1,1,1;1,3,9;1,6,18")
        assert code == EXIT_OK
        assert out["non_idempotent_index"] == 3 and out["report"]["independent"]

    def test_forced_instance(self, capsys):
        code, _, err = run(capsys, "witness", "--p", "3", "--matrix", "1,1,1;1,3,9;1,9,3")
        assert code == EXIT_WRONG_VERDICT and "IdempotentForced" in err

    def test_singular(self, capsys):
        assert run(capsys, "witness", "--p", "2", "--matrix", "1,1,1;1,1,1;1,1,1")[0] == EXIT_SINGULAR

    def test_one_unit(self, capsys):
        code, out, _ = run(capsys, "witness", "--p", "2", "--matrix", "1,1,1;1,3,2;1,2,2")
        assert code == EXIT_OK
        g = CyclicGroup(2, out["n"])
        mus = [FiniteDistribution.from_json(d) for d in out["distributions"]]
        assert mus[1] == mus[2] == uniform(g)

    def test_model_override(self, capsys):
        code, out, _ = run(capsys, "witness", "--p", "3", "--matrix", "1,1,1;1,3,9;1,6,18", "--n", "5")
        assert code == EXIT_OK and out["n"] == 5

    def test_idempotent_inner_fails_certification(self, capsys, tmp_path):
        path = write(tmp_path, "inner.json", uniform(CyclicGroup(2, 1)))
        code, _, _ = run(capsys, "witness", "--p", "2", "--matrix", "1,1,1;1,3,2;1,2,2", "--inner", path)
        assert code == EXIT_CERTIFICATION

    def test_missing_inner_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "witness", "--p", "2", "--matrix", "1,1,1;1,3,2;1,2,2", "--inner", str(tmp_path / "none"))
        assert code == EXIT_PARSE


class TestVerify:
    def test_haar_triple(self, capsys, tmp_path):
        g = CyclicGroup(3, 3)
        paths = [write(tmp_path, "a.json", haar_on(Subgroup(g, 1))), write(tmp_path, "b.json", uniform(g)), write(tmp_path, "c.json", uniform(g))]
        code, out, _ = run(capsys, "verify", "--p", "3", "--n", "3", "--matrix", "1,1,1;1,3,9;1,9,3", *paths)
        assert code == EXIT_OK and out["independent"] and out["method"] == "ExactJoint"

    def witness_files(self, capsys, tmp_path):
        code, out, _ = run(capsys, "witness", "--p", "3", "--matrix", "1,1,1;1,3,9;1,6,18")
        assert code == EXIT_OK
        mus = [FiniteDistribution.from_json(d) for d in out["distributions"]]
        return out["n"], mus

    def test_witness_round_trip(self, capsys, tmp_path):
        n, mus = self.witness_files(capsys, tmp_path)
        paths = [write(tmp_path, f"{i}.json", mu) for i, mu in enumerate(mus)]
        code, out, _ = run(capsys, "verify", "--p", "3", "--n", str(n), "--matrix", "1,1,1;1,3,9;1,6,18", "--method", "both", *paths)
        assert code == EXIT_OK
        assert out["method"] == "ExactJoint+FunctionalEquation"
        assert [r["independent"] for r in out["reports"]] == [True, True]

    def test_tampered_witness(self, capsys, tmp_path):
        n, mus = self.witness_files(capsys, tmp_path)
        mu = mus[2]
        x = mu.support[0]
        probs = list(mu.probs)
        probs[x] += Fraction(1, 64)
        total = sum(probs)
        mus[2] = FiniteDistribution(mu.group, tuple(q / total for q in probs))
        paths = [write(tmp_path, f"{i}.json", m) for i, m in enumerate(mus)]
        for method in ("exact", "spectral", "both"):
            code, out, _ = run(capsys, "verify", "--p", "3", "--n", str(n), "--matrix", "1,1,1;1,3,9;1,6,18", "--method", method, *paths)
            assert code == EXIT_NOT_INDEPENDENT and out["independent"] is False

    def test_group_mismatch(self, capsys, tmp_path):
        paths = [write(tmp_path, f"{i}.json", uniform(CyclicGroup(3, 2))) for i in range(3)]
        assert run(capsys, "verify", "--p", "3", "--n", "3", "--matrix", "1,1,1;1,3,9;1,9,3", *paths)[0] == EXIT_PARSE

    def test_bad_json(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{")
        assert run(capsys, "verify", "--p", "3", "--n", "1", "--matrix", "1,1,1;1,3,9;1,9,3", *[str(bad)] * 3)[0] == EXIT_PARSE

    def test_negative_valuation_entry(self, capsys, tmp_path):
        paths = [write(tmp_path, f"{i}.json", uniform(CyclicGroup(3, 1))) for i in range(3)]
        assert run(capsys, "verify", "--p", "3", "--n", "1", "--matrix", "1,1,1;1,3^-1,9;1,9,3", *paths)[0] == EXIT_PARSE


class TestSweep:
    def test_small_grid_has_no_failures(self):
        report = run_sweep(2, 2, n=3)
        assert report.failures == []
        assert len(report.records) == 2 * 6**4
        assert {r.status for r in report.records} <= {"certified", "no_violation", "singular"}

    @pytest.mark.parametrize("p", [2, 3])
    def test_all_unit_grid_is_forced(self, p):
        report = run_sweep(p, 0, shapes=(LAMBDA1,), classify_only=True)
        assert "CounterexampleExists" not in report.counts
        assert set(report.counts) <= {"IdempotentForced", "DegenerateForced", "Singular"}

    def test_lambda2_non_units_have_q_zero(self):
        report = run_sweep(3, 2, n=2, shapes=(LAMBDA2,), classify_only=True)
        non_unit = [r for r in report.records if all(c.startswith("3^") for c in r.coefficients)]
        assert len(non_unit) == 6**4 * 2**4
        assert all(r.q == 0 for r in non_unit)

    def test_cli_summary(self, capsys):
        code, out, _ = run(capsys, "sweep", "--p", "2", "-V", "1", "--shape", "L1", "--summary", "--budget", "50")
        assert code == EXIT_OK
        assert "records" not in out and out["failures"] == []
        assert out["instances"] == 4**4

    def test_cli_records_round_trip(self, capsys):
        code, out, _ = run(capsys, "sweep", "--p", "2", "-V", "1", "--shape", "L2", "--classify-only")
        assert code == EXIT_OK
        assert len(out["records"]) == out["instances"] == 4**4
        assert json.loads(json.dumps(out)) == out
        assert {r["status"] for r in out["records"]} <= {"classified", "singular"}
