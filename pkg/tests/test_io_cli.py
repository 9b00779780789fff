import io
import json
import os
import subprocess
import sys

import pytest
from gmpy2 import mpfr

from sogkit import VpConfig, build_sog, evaluate, exponential_kernel, imq_kernel, localize, reduce
from sogkit.cli import main
from sogkit.io import PrecisionLossWarning, dumps, export_csv, load, loads, read_csv, save
from sogkit.numerics import workprec
from sogkit.reduction import evaluate_reduced


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    rc = main(argv, out, err)
    return rc, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def small():
    return build_sog(exponential_kernel(), VpConfig(10, 3))


def test_json_roundtrip_bit_identical(small, tmp_path):
    path = tmp_path / "a.json"
    save(small, path, 1e-3)
    back, eps = load(path)
    assert eps == 1e-3 and back.is_ladder and back.bits == small.bits
    assert back.kernel.name == "exp" and back.n_c == 3
    assert list(back.weights) == list(small.weights)
    with workprec(small.bits):
        for x in ("0", "0.37", "1"):
            assert evaluate(back, mpfr(x)) == evaluate(small, mpfr(x))
    assert dumps(back, 1e-3) == path.read_text()


def test_reduced_roundtrip(small):
    red = reduce(small, q=5)
    back, _ = loads(dumps(red))
    assert back.q == red.q and back.hankel_bound == red.hankel_bound
    assert list(back.weights) == list(red.weights)
    with workprec(red.bits):
        assert evaluate_reduced(back, mpfr("0.4")) == evaluate_reduced(red, mpfr("0.4"))


def test_localized_kernel_roundtrip():
    k = localize(imq_kernel(), 2, "0.5")
    approx = build_sog(k, VpConfig(6, 2))
    back, _ = loads(dumps(approx))
    assert back.kernel.x_c == 2 and back.kernel.params["delta"] == k.params["delta"]


def test_csv_export_roundtrip(small):
    red = reduce(small, q=4)
    with pytest.warns(PrecisionLossWarning):
        text = export_csv(red)
    rows = read_csv(text)
    assert len(rows) == red.q + 1
    assert rows[0] == (complex(float(red.constant_term)), 0j)
    for (w, t), (wr, tr) in zip(rows[1:], red.terms):
        assert w == complex(wr) and t == complex(tr)


def test_malformed_file():
    from sogkit.errors import InvalidInput
    with pytest.raises(InvalidInput):
        loads("{}")
    with pytest.raises(InvalidInput):
        loads("not json")


def test_cli_build_eval_reduce_export(tmp_path):
    a = tmp_path / "g.json"
    rc, out, _ = run(["build", "--kernel", "gauss", "--param", "h=0.1", "--n", "2",
                      "--nc", "0.01", "--out", str(a)])
    assert rc == 0 and "p=4" in out
    approx, _ = load(a)
    assert sum(1 for w in approx.weights if abs(w) > 1e-30) == 1
    rc, out, _ = run(["eval", "--in", str(a), "--format", "json"])
    assert rc == 0 and json.loads(out)["eps_inf"] < 1e-30

    b = tmp_path / "e.json"
    assert run(["build", "--kernel", "exp", "--n", "10", "--nc", "3", "--out", str(b)])[0] == 0
    r = tmp_path / "r.json"
    rc, out, _ = run(["reduce", "--in", str(b), "--q", "5", "--out", str(r)])
    assert rc == 0 and out.startswith("q=5 ")
    rc, out, err = run(["export", "--in", str(r)])
    assert rc == 0 and out.startswith("w_re,w_im,t_re,t_im\n")
    rc, _, err = run(["reduce", "--in", str(r), "--q", "2", "--out", str(tmp_path / "x.json")])
    assert rc == 2 and "ladder" in err


def test_cli_exit_codes(tmp_path):
    out = str(tmp_path / "o.json")
    assert run(["build", "--kernel", "imq", "--out", out])[0] == 2
    assert run(["build", "--kernel", "nope", "--n", "4", "--out", out])[0] == 2
    rc, _, err = run(["build", "--kernel", "gauss", "--param", "h=-1", "--n", "4", "--out", out])
    assert rc == 2 and "kernel" in err
    assert run(["eval", "--in", str(tmp_path / "missing.json")])[0] == 2
    assert run(["build", "--kernel", "exp", "--n", "4", "--out", out])[0] == 0
    rc, out_text, _ = run(["reduce", "--in", out, "--delta", "1e-300", "--out", out + ".r"])
    assert rc == 0 and out_text.startswith("q=7 ")
    assert run(["build", "--kernel", "exp", "--n", "4", "--precision", "12", "--out", out])[0] == 2


def test_cli_numerical_failure_exit_code(tmp_path, monkeypatch):
    from sogkit import cli
    from sogkit.errors import ConvergenceFailure

    def boom(*args, **kwargs):
        raise ConvergenceFailure("no convergence")

    monkeypatch.setattr(cli, "build_sog", boom)
    rc, _, err = run(["build", "--kernel", "exp", "--n", "4", "--out", str(tmp_path / "f.json")])
    assert rc == 3 and "construction" in err


def test_cli_determinism(tmp_path):
    files = []
    for i in range(2):
        a, r = tmp_path / f"a{i}.json", tmp_path / f"r{i}.json"
        s = tmp_path / f"s{i}.csv"
        assert run(["build", "--kernel", "matern", "--param", "nu=2", "--n", "8", "--out", str(a)])[0] == 0
        assert run(["reduce", "--in", str(a), "--q", "4", "--out", str(r)])[0] == 0
        assert run(["sweep", "--kernel", "imq", "--mode", "p", "--n-list", "4,8",
                    "--out", str(s)])[0] == 0
        files.append([p.read_bytes() for p in (a, r, s)])
    assert files[0] == files[1]


def test_env_precision_override(tmp_path, monkeypatch):
    monkeypatch.setenv("SOGKIT_PRECISION_BITS", "300")
    a = tmp_path / "a.json"
    rc, out, _ = run(["build", "--kernel", "exp", "--n", "4", "--out", str(a)])
    assert rc == 0 and "precision_bits=300" in out
    rc, out, _ = run(["build", "--kernel", "exp", "--n", "4", "--precision", "200", "--out", str(a)])
    assert "precision_bits=200" in out


def test_module_entry_point(tmp_path):
    env = dict(os.environ)
    env.pop("SOGKIT_PRECISION_BITS", None)
    proc = subprocess.run([sys.executable, "-m", "sogkit", "build", "--kernel", "exp", "--n", "3",
                           "--out", str(tmp_path / "m.json")], capture_output=True, text=True, env=env)
    assert proc.returncode == 0 and proc.stdout.startswith("p=6 ")
    proc = subprocess.run([sys.executable, "-m", "sogkit"], capture_output=True, text=True)
    assert proc.returncode == 2
