import pytest

from prodmoment.config import ConfigError, SolverConfig, format_config, parse_config, preset


class TestPresets:
    def test_table2(self):
        cfg = preset("table2")
        assert (cfg.d + 1, cfg.gamma, cfg.rank, cfg.L) == (9, 8.0, 9, 4)
        assert (cfg.tol_kkt_rel_grad, cfg.tol_kkt_abs_val, cfg.tol_feasibility) == (1e-2, 1e-4, 1e-2)
        assert (cfg.lbfgs_order, cfg.beta, cfg.tol_inner_rel_grad, cfg.tol_inner_abs_val) == (100, 0.3, 1e-3, 1e-4)

    def test_table3(self):
        cfg = preset("table3")
        assert (cfg.d + 1, cfg.gamma, cfg.rank, cfg.L) == (5, 10.0, 5, 6)
        assert (cfg.tol_kkt_rel_grad, cfg.tol_kkt_abs_val, cfg.tol_feasibility) == (1e-2, 1e-3, 1e-2)
        assert (cfg.lbfgs_order, cfg.beta, cfg.tol_inner_rel_grad, cfg.tol_inner_abs_val) == (40, 0.4, 1e-2, 1e-5)

    def test_unknown(self):
        with pytest.raises(ConfigError):
            preset("table9")


class TestParse:
    def test_round_trip(self):
        cfg = preset("table3").replace(seed=7, noise=True)
        assert parse_config(format_config(cfg)) == cfg

    def test_comments_and_defaults(self):
        cfg = parse_config("# tuned\npenalty_gamma = 3.5  # lower\n\n")
        assert cfg.gamma == 3.5 and cfg.L == SolverConfig().L

    @pytest.mark.parametrize("text, msg", [
        ("wolfe_beta = 1.5\n", "beta out of range"),
        ("foo = 1\n", "line 1: unknown key"),
        ("num_measures\n", "line 1"),
        ("\nbm_rank = two\n", "line 2: bad value"),
        ("product_constraints = maybe\n", "line 1"),
    ])
    def test_errors(self, text, msg):
        with pytest.raises(ConfigError, match=msg):
            parse_config(text)

    @pytest.mark.parametrize("changes", [
        dict(L=1), dict(rank=10), dict(rank=0), dict(gamma=0.0), dict(beta=0.0),
        dict(tol_feasibility=1.0), dict(tol_kkt_abs_val=0.0), dict(max_outer_iters=0),
        dict(gamma_growth=0.5), dict(restart_cap=-1),
    ])
    def test_validation(self, changes):
        with pytest.raises(ConfigError):
            SolverConfig(**changes)
