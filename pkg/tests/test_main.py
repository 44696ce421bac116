"""
Tests unitarios para main.py
"""

import csv
import json

import numpy as np
import pytest

from main import EXIT_IO, EXIT_OK, EXIT_USAGE, main
from matrix_io import load_matrix, store_matrix, store_vector
from synthetic import gen_dictionary


def _last_json(capsys) -> dict:
    out = capsys.readouterr().out.strip().splitlines()
    return json.loads(out[-1])


class TestDesignCommand:
    """Tests para el subcomando design"""

    def setup_method(self):
        """Setup para cada test"""
        self.psi = gen_dictionary(20, 24, seed=1)

    def test_random_design(self, tmp_path, capsys):
        """Test design --algo random escribe Φ y su reporte"""
        dict_path = tmp_path / "psi.csv"
        store_matrix(self.psi.entries, dict_path)
        out = tmp_path / "phi.csv"
        code = main(["design", "--algo", "random", "--dict", str(dict_path), "--m", "6", "--seed", "7", "--out", str(out)])
        assert code == EXIT_OK
        assert load_matrix(out).shape == (6, 20)
        sidecar = json.loads((tmp_path / "phi.csv.json").read_text(encoding="utf-8"))
        assert sidecar["algo"] == "random" and sidecar["m"] == 6
        assert _last_json(capsys)["objective"] >= 0.0

    def test_random_design_reproducible(self, tmp_path):
        """Test misma semilla, mismo archivo"""
        dict_path = tmp_path / "psi.csv"
        store_matrix(self.psi.entries, dict_path)
        for name in ("a.csv", "b.csv"):
            args = ["design", "--algo", "random", "--dict", str(dict_path), "--m", "6", "--seed", "7"]
            assert main(args + ["--out", str(tmp_path / name)]) == EXIT_OK
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_pwdsmd_with_prior(self, tmp_path):
        """Test design --algo pwdsmd con un prior"""
        dict_path, prior_path = tmp_path / "psi.csv", tmp_path / "xi.csv"
        store_matrix(self.psi.entries, dict_path)
        store_vector(np.linspace(0.05, 0.5, 24), prior_path)
        out = tmp_path / "phi.csv"
        args = ["design", "--algo", "pwdsmd", "--dict", str(dict_path), "--m", "6", "--prior", str(prior_path)]
        assert main(args + ["--tau", "0.2", "--out", str(out)]) == EXIT_OK
        assert load_matrix(out).shape == (6, 20)

    def test_params_record(self, tmp_path):
        """Test parámetros desde JSON con banderas que los sobrescriben"""
        dict_path, params_path = tmp_path / "psi.csv", tmp_path / "params.json"
        store_matrix(self.psi.entries, dict_path)
        params_path.write_text(json.dumps({"algo": "dcs", "m": 4}), encoding="utf-8")
        out = tmp_path / "phi.csv"
        assert main(["design", "--dict", str(dict_path), "--params", str(params_path), "--m", "5", "--out", str(out)]) == EXIT_OK
        assert load_matrix(out).shape == (5, 20)

    def test_pwdsmd_without_prior(self, tmp_path):
        """Test pwdsmd sin --prior"""
        dict_path = tmp_path / "psi.csv"
        store_matrix(self.psi.entries, dict_path)
        code = main(["design", "--algo", "pwdsmd", "--dict", str(dict_path), "--m", "6", "--out", str(tmp_path / "phi.csv")])
        assert code == EXIT_USAGE

    def test_random_without_seed(self, tmp_path):
        """Test random sin --seed"""
        dict_path = tmp_path / "psi.csv"
        store_matrix(self.psi.entries, dict_path)
        code = main(["design", "--algo", "random", "--dict", str(dict_path), "--m", "6", "--out", str(tmp_path / "phi.csv")])
        assert code == EXIT_USAGE

    def test_missing_dictionary(self, tmp_path):
        """Test diccionario inexistente"""
        code = main(["design", "--algo", "dcs", "--dict", str(tmp_path / "none.csv"), "--m", "6", "--out", str(tmp_path / "phi.csv")])
        assert code == EXIT_IO

    def test_malformed_dictionary(self, tmp_path):
        """Test archivo de matriz mal formado"""
        dict_path = tmp_path / "psi.csv"
        dict_path.write_text("# rows=2 cols=2\n1.0,abc\n0.0,1.0\n", encoding="utf-8")
        code = main(["design", "--algo", "dcs", "--dict", str(dict_path), "--m", "1", "--out", str(tmp_path / "phi.csv")])
        assert code == EXIT_IO

    def test_missing_required_flag(self, tmp_path):
        """Test argparse sin --dict"""
        assert main(["design", "--algo", "dcs", "--m", "6", "--out", str(tmp_path / "phi.csv")]) == EXIT_USAGE

    def test_binary_dictionary(self, tmp_path):
        """Test archivo de matriz que no es texto UTF-8"""
        dict_path = tmp_path / "psi.csv"
        dict_path.write_bytes(b"# rows=1 cols=1\n\xff\xfe\x00\n")
        code = main(["design", "--algo", "dcs", "--dict", str(dict_path), "--m", "1", "--out", str(tmp_path / "phi.csv")])
        assert code == EXIT_IO


class TestSynthCommand:
    """Tests para el subcomando synth"""

    def test_writes_batch(self, tmp_path, capsys):
        """Test archivos de salida y dimensiones"""
        out = tmp_path / "data"
        code = main(["synth", "--n", "12", "--group-sizes", "8,4,2,2", "--sparsity", "4", "--l", "5", "--snr", "20", "--seed", "3", "--out", str(out)])
        assert code == EXIT_OK
        assert load_matrix(out / "dictionary.csv").shape == (12, 16)
        assert load_matrix(out / "coefficients.csv").shape == (16, 5)
        assert load_matrix(out / "signals.csv").shape == (12, 5)
        assert load_matrix(out / "prior.csv").shape == (16, 1)
        assert _last_json(capsys)["l"] == 5

    def test_exact_mode_and_measurements(self, tmp_path):
        """Test --exact y medidas Y = ΦX"""
        phi_path = tmp_path / "phi.csv"
        store_matrix(np.random.default_rng(0).standard_normal((5, 12)), phi_path)
        out = tmp_path / "data"
        args = ["synth", "--n", "12", "--group-sizes", "8,4,2,2", "--sparsity", "4", "--exact"]
        assert main(args + ["--l", "6", "--phi", str(phi_path), "--seed", "3", "--out", str(out)]) == EXIT_OK
        coeffs = load_matrix(out / "coefficients.csv")
        assert np.all(np.count_nonzero(coeffs, axis=0) == 4)
        y = load_matrix(out / "measurements.csv")
        assert np.allclose(y, load_matrix(phi_path) @ load_matrix(out / "signals.csv"))

    def test_infeasible_groups(self, tmp_path):
        """Test grupos que no admiten la esparcidad pedida"""
        code = main(["synth", "--n", "12", "--group-sizes", "14,2", "--sparsity", "6", "--seed", "1", "--out", str(tmp_path)])
        assert code == EXIT_USAGE

    def test_zero_trials(self, tmp_path):
        """Test --l 0 es un error de uso"""
        args = ["synth", "--n", "12", "--group-sizes", "8,4,2,2", "--sparsity", "4", "--l", "0", "--seed", "3"]
        assert main(args + ["--out", str(tmp_path / "data")]) == EXIT_USAGE
        assert not (tmp_path / "data").exists()

    def test_empty_group(self, tmp_path):
        """Test grupo de tamaño cero"""
        code = main(["synth", "--n", "5", "--group-sizes", "0,5", "--sparsity", "1", "--seed", "1", "--out", str(tmp_path)])
        assert code == EXIT_USAGE


class TestRecoverCommand:
    """Tests para el subcomando recover"""

    def setup_method(self):
        """Setup para cada test"""
        rng = np.random.default_rng(5)
        self.psi = gen_dictionary(20, 24, seed=2)
        self.phi = rng.standard_normal((6, 20))
        coeffs = np.zeros((24, 4))
        for l in range(4):
            support = rng.choice(24, size=2, replace=False)
            coeffs[support, l] = rng.standard_normal(2)
        self.y = self.phi @ self.psi.entries @ coeffs

    def _write(self, tmp_path):
        store_matrix(self.phi, tmp_path / "phi.csv")
        store_matrix(self.psi.entries, tmp_path / "psi.csv")
        store_matrix(self.y, tmp_path / "y.csv")
        store_vector(np.full(24, 0.1), tmp_path / "xi.csv")
        return ["--phi", str(tmp_path / "phi.csv"), "--dict", str(tmp_path / "psi.csv"), "--y", str(tmp_path / "y.csv")]

    def test_residual_vanishes_with_m_atoms(self, tmp_path, capsys):
        """Test S = M deja residuo nulo"""
        files = self._write(tmp_path)
        out = tmp_path / "alpha.csv"
        assert main(["recover", "--algo", "omp", *files, "--sparsity", "6", "--out", str(out)]) == EXIT_OK
        report = _last_json(capsys)
        assert report["max_residual"] < 1e-9
        assert load_matrix(out).shape == (24, 4)
        assert load_matrix(tmp_path / "alpha_recon.csv").shape == (20, 4)

    def test_pdomp_beta_zero_matches_omp(self, tmp_path):
        """Test PDOMP con β = 0 idéntico a OMP byte a byte"""
        files = self._write(tmp_path)
        assert main(["recover", "--algo", "omp", *files, "--sparsity", "3", "--out", str(tmp_path / "omp.csv")]) == EXIT_OK
        args = ["recover", "--algo", "pdomp", *files, "--prior", str(tmp_path / "xi.csv"), "--beta", "0"]
        assert main(args + ["--sparsity", "3", "--out", str(tmp_path / "pdomp.csv")]) == EXIT_OK
        assert (tmp_path / "omp.csv").read_bytes() == (tmp_path / "pdomp.csv").read_bytes()

    def test_lwomp(self, tmp_path):
        """Test LW-OMP con prior"""
        files = self._write(tmp_path)
        args = ["recover", "--algo", "lwomp", *files, "--prior", str(tmp_path / "xi.csv")]
        assert main(args + ["--sparsity", "2", "--out", str(tmp_path / "lw.csv")]) == EXIT_OK

    def test_prior_required(self, tmp_path):
        """Test pdomp sin --prior"""
        files = self._write(tmp_path)
        assert main(["recover", "--algo", "pdomp", *files, "--sparsity", "3", "--out", str(tmp_path / "a.csv")]) == EXIT_USAGE

    def test_sparsity_above_m(self, tmp_path):
        """Test S > M"""
        files = self._write(tmp_path)
        assert main(["recover", "--algo", "omp", *files, "--sparsity", "7", "--out", str(tmp_path / "a.csv")]) == EXIT_USAGE

    def test_missing_measurements(self, tmp_path):
        """Test archivo de medidas inexistente"""
        self._write(tmp_path)
        args = ["recover", "--algo", "omp", "--phi", str(tmp_path / "phi.csv"), "--dict", str(tmp_path / "psi.csv")]
        assert main(args + ["--y", str(tmp_path / "none.csv"), "--sparsity", "2", "--out", str(tmp_path / "a.csv")]) == EXIT_IO


class TestExperimentCommand:
    """Tests para el subcomando experiment"""

    def test_unknown_case(self, tmp_path):
        """Test caso desconocido"""
        assert main(["experiment", "--case", "nonsense", "--seed", "1", "--out", str(tmp_path / "r.csv")]) == EXIT_USAGE

    def test_case_from_json(self, tmp_path, capsys):
        """Test caso pequeño descrito en JSON"""
        config = tmp_path / "case.json"
        config.write_text(
            json.dumps(
                {
                    "case_id": "beta_sweep",
                    "m": 6,
                    "n": 10,
                    "k": 12,
                    "sparsity": 2,
                    "trials": 8,
                    "group_spec": {"group_sizes": [6, 3, 2, 1], "sparsity": 2},
                    "algorithms": [{"design": "random", "recovery": "pdomp"}, {"design": "pwdsmd", "recovery": "pdomp"}],
                    "sweep": {"parameter": "beta", "values": [0.0, 0.01]},
                }
            ),
            encoding="utf-8",
        )
        out = tmp_path / "r.csv"
        assert main(["experiment", "--case", str(config), "--seed", "5", "--workers", "2", "--out", str(out)]) == EXIT_OK
        with open(out, newline="", encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 4
        assert all(row["seed"] == "5" and row["trials"] == "8" for row in rows)
        assert _last_json(capsys)["rows"] == 4

    def test_invalid_json_case(self, tmp_path):
        """Test configuración inválida"""
        config = tmp_path / "case.json"
        config.write_text(json.dumps({"case_id": "beta_sweep"}), encoding="utf-8")
        assert main(["experiment", "--case", str(config), "--seed", "5", "--out", str(tmp_path / "r.csv")]) == EXIT_USAGE

    def test_replicates_flag(self, tmp_path):
        """Test --replicates acumula diccionarios independientes en cada fila"""
        config = tmp_path / "case.json"
        config.write_text(
            json.dumps(
                {
                    "case_id": "tau_sweep",
                    "m": 6,
                    "n": 10,
                    "k": 12,
                    "sparsity": 2,
                    "trials": 5,
                    "group_spec": {"group_sizes": [6, 3, 2, 1], "sparsity": 2},
                    "algorithms": [{"design": "pwdsmd", "recovery": "omp"}],
                    "sweep": {"parameter": "tau", "values": [0.2, 1.0]},
                }
            ),
            encoding="utf-8",
        )
        out = tmp_path / "r.csv"
        assert main(["experiment", "--case", str(config), "--seed", "5", "--replicates", "3", "--out", str(out)]) == EXIT_OK
        with open(out, newline="", encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        assert [row["trials"] for row in rows] == ["15", "15"]
        assert all(row["secondary_value"] == "" for row in rows)

    def test_replicates_must_be_positive(self, tmp_path):
        """Test --replicates 0"""
        code = main(["experiment", "--case", "tau_sweep", "--seed", "1", "--replicates", "0", "--out", str(tmp_path / "r.csv")])
        assert code == EXIT_USAGE


class TestMetricsCommand:
    """Tests para el subcomando metrics"""

    def test_perfect_reconstruction(self, tmp_path, capsys):
        """Test X̂ = X"""
        x = np.random.default_rng(1).standard_normal((5, 3))
        store_matrix(x, tmp_path / "x.csv")
        assert main(["metrics", "--x", str(tmp_path / "x.csv"), "--x-hat", str(tmp_path / "x.csv")]) == EXIT_OK
        record = _last_json(capsys)
        assert record["mse"] == 0.0
        assert record["psnr_db"] is None

    def test_full_record(self, tmp_path, capsys):
        """Test e_r, μ y cota de Welch"""
        psi = gen_dictionary(20, 24, seed=2)
        store_matrix(psi.entries, tmp_path / "psi.csv")
        store_matrix(np.random.default_rng(3).standard_normal((6, 20)), tmp_path / "phi.csv")
        store_matrix(np.zeros((20, 2)), tmp_path / "x.csv")
        store_matrix(np.ones((20, 2)), tmp_path / "xh.csv")
        coeffs = np.zeros((24, 2))
        coeffs[[1, 2], 0] = 1.0
        coeffs[[3, 4], 1] = 1.0
        coeffs_hat = np.zeros((24, 2))
        coeffs_hat[[1, 9], 0] = 1.0
        coeffs_hat[[3, 4], 1] = 1.0
        store_matrix(coeffs, tmp_path / "a.csv")
        store_matrix(coeffs_hat, tmp_path / "ah.csv")
        args = ["metrics", "--x", str(tmp_path / "x.csv"), "--x-hat", str(tmp_path / "xh.csv")]
        args += ["--coeffs", str(tmp_path / "a.csv"), "--coeffs-hat", str(tmp_path / "ah.csv")]
        args += ["--phi", str(tmp_path / "phi.csv"), "--dict", str(tmp_path / "psi.csv"), "--sparsity", "2"]
        assert main(args) == EXIT_OK
        record = _last_json(capsys)
        assert record["mse"] == pytest.approx(1.0)
        assert record["e_r"] == pytest.approx(0.75)
        assert record["mu"] >= record["welch"]
        assert isinstance(record["guarantee_holds"], bool)

    def test_unpaired_flags(self, tmp_path):
        """Test --phi sin --dict"""
        store_matrix(np.zeros((2, 2)), tmp_path / "x.csv")
        args = ["metrics", "--x", str(tmp_path / "x.csv"), "--x-hat", str(tmp_path / "x.csv"), "--phi", str(tmp_path / "x.csv")]
        assert main(args) == EXIT_USAGE
