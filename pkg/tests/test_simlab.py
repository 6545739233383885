from fractions import Fraction

import numpy as np
import pytest
from click.testing import CliRunner

from postcons.bayes import DiscretePrior
from postcons.exceptions import (
    ConfigurationError,
    DegenerateInputError,
    IllDefinedPosteriorError,
    InstanceTooLargeError,
)
from postcons.measures import DominatingGrid
from postcons.rng import make_generator, replication_seed
from postcons.simlab import (
    brute_force_posterior_expectation,
    check_instance,
    config_from_dict,
    decay_fit,
    emit_report,
    load_config,
    random_instance,
    read_csv,
    run_experiment,
)
from postcons.certify import Certificate
from postcons.simlab.cli import main
from postcons.simlab.experiment import run_replication
from postcons.simlab.factory import Scenario
from postcons.simlab.report import COLUMNS, format_rows
from postcons.transforms import ht_bound_iid

from .conftest import density

BERNOULLI = {
    "experiment": {"scenario_id": "tiny", "master_seed": 7, "replications": 3,
                   "n_schedule": [10, 20, 40]},
    "scenario": {"kind": "bernoulli", "mesh": 0.05, "theta0": 0.3},
    "prior": {"kind": "net", "p0_mass": 0.5},
    "certificate": {"epsilon": 0.1},
    "target": {"kind": "hellinger_complement", "radius": 0.2},
}

TOML = """[experiment]
scenario_id = "tiny"
master_seed = 7
replications = 4
n_schedule = [10, 20, 40]

[scenario]
kind = "bernoulli"
mesh = 0.05
theta0 = 0.3

[certificate]
epsilon = 0.1

[target]
kind = "hellinger_complement"
radius = 0.2
"""


def with_changes(section, **kw):
    d = {k: dict(v) for k, v in BERNOULLI.items()}
    d[section].update(kw)
    return d


@pytest.fixture(scope="module")
def tiny_result():
    return run_experiment(config_from_dict(BERNOULLI))


@pytest.fixture
def toml_file(tmp_path):
    p = tmp_path / "tiny.toml"
    p.write_text(TOML)
    return p


class TestConfig:
    def test_parse(self):
        cfg = config_from_dict(BERNOULLI)
        assert cfg.n_schedule == (10, 20, 40) and cfg.replications == 3
        assert cfg.certificate_enabled
        assert cfg.replace(replications=9).replications == 9

    @pytest.mark.parametrize("section,change", [
        ("experiment", {"n_schedule": [10, 10]}),
        ("experiment", {"n_schedule": []}),
        ("experiment", {"replications": 0}),
        ("experiment", {"master_seed": -1}),
        ("experiment", {"replications": 2.5}),
        ("scenario", {"kind": "poisson"}),
        ("target", {"kind": "everything"}),
    ])
    def test_invalid(self, section, change):
        with pytest.raises(ConfigurationError):
            config_from_dict(with_changes(section, **change))

    def test_missing_table(self):
        d = dict(BERNOULLI)
        del d["target"]
        with pytest.raises(ConfigurationError, match="target"):
            config_from_dict(d)

    def test_load_keeps_raw(self, toml_file):
        cfg = load_config(toml_file)
        assert cfg.raw == toml_file.read_bytes()

    def test_load_errors(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "absent.toml")
        bad = tmp_path / "bad.toml"
        bad.write_text("[experiment\n")
        with pytest.raises(ConfigurationError):
            load_config(bad)


class TestReplication:
    def test_single_atom_prior(self):
        P0 = density([0.3, 0.7])
        prior = DiscretePrior(P0.grid, [P0.values], [1.0])
        t = run_replication(prior, P0, np.array([False]), [5, 50, 500], 11)
        np.testing.assert_array_equal(t.target_mass, 0.0)
        assert t.domination_ok.all() and t.breach is None

    def test_equal_seeds(self):
        P0 = density([0.3, 0.7])
        prior = DiscretePrior(P0.grid, [[0.3, 0.7], [0.6, 0.4]], [0.5, 0.5])
        a = run_replication(prior, P0, np.array([False, True]), [5, 10], 99, 0)
        b = run_replication(prior, P0, np.array([False, True]), [5, 10], 99, 4)
        np.testing.assert_array_equal(a.log_target_mass, b.log_target_mass)

    def test_breach_recorded(self):
        P0 = density([0.5, 0.5])
        prior = DiscretePrior(P0.grid, [[1.0, 0.0], [0.0, 1.0]], [0.5, 0.5])
        t = run_replication(prior, P0, np.array([True, False]), [1, 50], 3)
        assert t.breach is not None and t.breach >= 2
        assert t.domination_ok[0] and not t.domination_ok[1]
        assert np.isnan(t.target_mass[1])

    def test_seed_replays_stream(self):
        s = replication_seed(5, 2)
        assert make_generator(s).random() == make_generator(s).random()
        assert replication_seed(5, 2) != replication_seed(5, 3)


class TestExperiment:
    def test_shapes(self, tiny_result):
        r = tiny_result
        assert r.masses.shape == (3, 3)
        assert np.all((r.masses >= 0) & (r.masses <= 1))
        assert r.certificate.passed
        assert [t.replication for t in r.trajectories] == [0, 1, 2]

    def test_bound_recomputation(self, tiny_result):
        r = tiny_result
        sc, cert = r.scenario, r.certificate
        D, w = sc.prior.densities, sc.prior.masses
        for j, n in enumerate(r.config.n_schedule):
            total = 0.0
            for rec in cert.pieces:
                total += ht_bound_iid(sc.P0, D[rec.atoms], (D[rec.B], w[rec.B] / w[rec.B].sum()),
                                      rec.prior_mass_B, n, rec.alpha_star)
            assert r.bound[j] == pytest.approx(total, rel=1e-12, abs=1e-300)

    def test_parallel_identical(self, tiny_result):
        par = run_experiment(config_from_dict(BERNOULLI), workers=2)
        assert format_rows(par.rows()) == format_rows(tiny_result.rows())

    def test_no_certificate(self):
        r = run_experiment(config_from_dict(BERNOULLI), certify=False, replications=1)
        assert r.certificate is None and np.all(np.isnan(r.bound))


class TestDecayFit:
    def test_exponential(self):
        ns = np.arange(10, 200, 10)
        fit = decay_fit(np.exp(-0.1 * ns), ns)
        assert fit.slope == pytest.approx(-0.1, abs=1e-9)

    def test_constant(self):
        ns = np.arange(1, 8)
        assert decay_fit(np.full(7, 0.5), ns).slope == pytest.approx(0.0, abs=1e-12)

    def test_all_zero(self):
        fit = decay_fit(np.zeros((3, 4)), [1, 2, 3, 4])
        assert fit.slope == -np.inf and fit.zero_fraction == 1.0 and fit.note

    def test_censored(self):
        fit = decay_fit([0.5, 0.1, 0.01, 0.0], [1, 2, 3, 4])
        assert fit.n_points == 3 and fit.zero_fraction == 0.25

    def test_too_few(self):
        with pytest.raises(DegenerateInputError):
            decay_fit([0.5, 0.0, 0.0], [1, 2, 3])


class TestReport:
    def test_round_trip(self, tiny_result, tmp_path):
        paths = emit_report(tiny_result, tmp_path, svg=True)
        rows = read_csv(paths["csv"])
        assert rows == list(tiny_result.rows())
        assert paths["csv"].read_text().splitlines()[0] == ",".join(COLUMNS)
        assert paths["svg"].read_text().lstrip().startswith("<?xml")
        assert "verdict: pass" in paths["certificate"].read_text()

    def test_empty(self, tiny_result, tmp_path):
        empty = type(tiny_result)(tiny_result.config, tiny_result.scenario, [], None,
                                  tiny_result.bound, None)
        out = tmp_path / "out"
        with pytest.raises(DegenerateInputError):
            emit_report(empty, out)
        assert not out.exists()

    def test_bad_header(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(DegenerateInputError):
            read_csv(p)


class TestOracle:
    def test_n_zero(self):
        w = [Fraction(1, 4), Fraction(3, 4)]
        atoms = [[Fraction(1, 2)] * 2, [Fraction(1, 3), Fraction(2, 3)]]
        assert brute_force_posterior_expectation(atoms[0], atoms, w, 0, [1]) == Fraction(3, 4)

    def test_single_atom(self):
        one = [[Fraction(1, 2), Fraction(1, 2)]]
        assert brute_force_posterior_expectation(one[0], one, [1], 4, [0]) == 1
        assert brute_force_posterior_expectation(one[0], one, [1], 4, []) == 0

    def test_limits(self):
        with pytest.raises(InstanceTooLargeError):
            brute_force_posterior_expectation([0.25] * 4, [[0.25] * 4], [1.0], 1, [0])
        with pytest.raises(InstanceTooLargeError):
            brute_force_posterior_expectation([0.5, 0.5], [[0.5, 0.5]], [1.0], 7, [0])

    def test_ill_defined(self):
        with pytest.raises(IllDefinedPosteriorError):
            brute_force_posterior_expectation([0.5, 0.5], [[1.0, 0.0]], [1.0], 1, [0])

    def test_two_point_n4(self):
        rng = make_generator(31)
        for _ in range(10):
            inst = random_instance(rng)
            chk = check_instance(inst)
            assert chk.passed, chk.bounds


class TestCli:
    def test_check(self, toml_file):
        res = CliRunner().invoke(main, ["check", str(toml_file)])
        assert res.exit_code == 0 and "verdict: pass" in res.output

    def test_config_error(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[experiment]\nn_schedule = [3, 2]\n[scenario]\nkind='bernoulli'\n"
                       "[target]\nkind='atoms'\natoms=[0]\n")
        res = CliRunner().invoke(main, ["check", str(bad)])
        assert res.exit_code == 2

    def test_simulate_and_report(self, toml_file, tmp_path):
        out = tmp_path / "run"
        r = CliRunner().invoke(main, ["simulate", str(toml_file), "--out", str(out),
                                      "--reps", "2", "--seed", "3"])
        assert r.exit_code == 0, r.output
        csv1 = (out / "trajectories.csv").read_bytes()
        assert (out / "config.toml").read_bytes() == toml_file.read_bytes()
        r = CliRunner().invoke(main, ["report", str(out), "--svg"])
        assert r.exit_code == 0 and (out / "mass_vs_n.svg").exists()
        assert (out / "trajectories.csv").read_bytes() == csv1

    def test_failed_certificate_exit(self, toml_file, tmp_path, monkeypatch):
        monkeypatch.setattr(Scenario, "certify", lambda self, opts=None: Certificate(
            "main", [], np.nan, False, "prior_mass_B"))
        r = CliRunner().invoke(main, ["check", str(toml_file)])
        assert r.exit_code == 1 and "prior_mass_B" in r.output
        r = CliRunner().invoke(main, ["simulate", str(toml_file), "--out", str(tmp_path / "o"),
                                      "--reps", "1"])
        assert r.exit_code == 1

    def test_report_missing(self, tmp_path):
        r = CliRunner().invoke(main, ["report", str(tmp_path)])
        assert r.exit_code == 2

    def test_oracle(self, tmp_path):
        p = tmp_path / "o.toml"
        p.write_text("[oracle]\ninstances = 5\nseed = 1\n")
        r = CliRunner().invoke(main, ["oracle", str(p)])
        assert r.exit_code == 0 and "violations=0" in r.output
        p.write_text("[nothing]\n")
        assert CliRunner().invoke(main, ["oracle", str(p)]).exit_code == 2
