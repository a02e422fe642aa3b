import math
import pathlib

import pytest

qalign = pytest.importorskip("qalign")

ROOT = pathlib.Path(__file__).resolve().parents[2]
SPACES = ROOT / "configs" / "spaces"


def test_acceptance_probability_examples():
    assert qalign.acceptance_probability(0.3, 0.3, 1.0, 7, 7) == 1.0
    assert qalign.acceptance_probability(0.2, 0.5, 1.0, 8, 10) == pytest.approx(math.exp(-0.3) * 1.25, rel=1e-12)
    assert qalign.acceptance_probability(1.0, 0.0, 0.5, 20, 10) == 1.0


def test_exact_target_and_kernel():
    space = qalign.EnumerableSpace.load(SPACES / "four_sequence.json")
    target = dict(qalign.exact_target(space, 1.0))
    e = math.e
    assert target["A A"] == pytest.approx(e / (e + 3))
    check = qalign.kernel_check(space, 1.0)
    assert check["stationarity_l1"] < 1e-12
    assert check["detailed_balance"] < 1e-12


def test_chain_matches_target():
    space = qalign.EnumerableSpace.load(SPACES / "thirty_sequence.json")
    out = qalign.run_chain(space, 1.0, 20000, seed=3)
    assert len(out["states"]) == 20001
    kept = out["states"][2000:]
    target = dict(qalign.exact_target(space, 1.0))
    tv = 0.5 * sum(abs(kept.count(y) / len(kept) - p) for y, p in target.items())
    assert tv < 0.05


def test_weights_and_vote():
    w = qalign.is_weights([0.0, math.log(3.0)], 1.0)
    assert w == pytest.approx([0.25, 0.75])
    idx, eu = qalign.mbr_select(["so 4", "it is 5", "4"], None, "exact_match", "last_number")
    assert idx == 0 and eu == pytest.approx(2 / 3)
    assert qalign.extract_answer("boxed_latex", r"\boxed{12}") == "12"


def test_gumbel_and_beta_star():
    a, b = qalign.gumbel_approx_normal(0.0, 1.0, 100)
    assert a == pytest.approx(2.3663, abs=1e-4)
    assert b == pytest.approx(0.3295, abs=1e-4)
    fit = {"w1": 0.5, "w2": 0.5, "mu1": 0.0, "mu2": 1.0, "sigma1": 1.0, "sigma2": 0.5, "dominant_index": 1}
    bs = qalign.beta_star(fit, 200)
    a_n, _, _ = qalign.gumbel_approx(fit, 200)
    assert 1.0 / bs == pytest.approx(a_n - 0.0)
    with pytest.raises(ValueError):
        qalign.beta_star(fit, 4)


def test_mixture_and_bon_density():
    import random

    rng = random.Random(0)
    data = [rng.gauss(0, 1) if rng.random() < 0.5 else rng.gauss(5, 0.5) for _ in range(4000)]
    fit = qalign.fit_reward_mixture(data)
    assert fit["mu1"] == pytest.approx(0.0, abs=0.1)
    assert fit["mu2"] == pytest.approx(5.0, abs=0.1)
    assert qalign.bon_max_density([0.0, 1.0], [0.5, 0.5], 2) == pytest.approx([0.25, 0.75])


def test_toml_and_run(tmp_path):
    assert qalign.parse_toml("a = [1, 2]\n[t]\nb = 'x'\n") == {"a": [1, 2], "t": {"b": "x"}}
    run_dir = qalign.run(ROOT / "configs" / "examples" / "toy_qalign.toml", tmp_path / "runs")
    assert (run_dir / "toy-1" / "chain_0.jsonl").exists()
    csv, svg, warnings = qalign.curve([run_dir], tmp_path / "curve")
    assert csv.exists() and svg.exists() and warnings == []


def test_verify_subset():
    report = qalign.verify(only=[1, 9])
    assert [c["id"] for c in report["criteria"]] == [1, 9]
    assert report["all_pass"] is True
    mutated = qalign.verify(only=[1], mutation="flip-length-ratio")
    assert mutated["all_pass"] is False
