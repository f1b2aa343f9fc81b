"""Smoke test for the calderon extension module.

Build and install first:  maturin develop -m crates/py/Cargo.toml --release
"""

import json
import math

import calderon


def norm_diff(a, b):
    return max(abs(x - y) for ra, rb in zip(a, b) for x, y in zip(ra, rb))


def main():
    s3 = calderon.Algebra.preset("S3")
    assert s3.rep_dim == 6 and s3.dim == 6, s3

    m2 = calderon.Algebra.matrix(2)
    seg = calderon.Model.segment(m2, [[0.3, 0.1], [0.1, -0.2]], [[0.8, 0.0], [0.0, 0.8]])
    sys = calderon.DoubleSystem(seg, 32)
    assert all(k == 0 for k in sys.kernel_dims)
    assert sys.sigma_min > 1.0
    c = sys.calderon()
    assert c.idempotency < 1e-9, c.idempotency
    perp = c.orthogonalized()
    assert perp.self_adjointness < 1e-10

    cyl = calderon.Model.cylinder(s3, 1, {0: [[0.4 if i == j else 0.0 for j in range(6)] for i in range(6)]})
    dbl = calderon.DoubleSystem(cyl, 16, 8)
    assert dbl.modes == [-2, -1, 0, 1, 2]
    assert dbl.calderon().a_linearity < 1e-10
    assert dbl.aps_index() == 0

    free = calderon.Model.cylinder(calderon.Algebra.matrix(1), 1, {}, phase=0.0)
    assert calderon.DoubleSystem(free, 16, 8).aps_index() == 2

    ladder = cyl.symbol_limit([4.0, 8.0, 16.0])
    assert all(b[1] <= a[1] for a, b in zip(ladder, ladder[1:]))

    b = [[1.0, 0.5j], [-0.5j, -2.0]]
    q = calderon.spectral_projection(b)
    assert norm_diff(q, calderon.nonnegative_spectral_projection(b)) < 1e-10

    try:
        calderon.spectral_projection([[0.0]])
    except ValueError as e:
        assert "pinched" in str(e)
    else:
        raise AssertionError("expected a pinched contour")

    report = json.loads(
        calderon.run(
            json.dumps(
                {
                    "algebra": {"kind": "matrix", "n": 1},
                    "model": {"base": "segment", "potential": [[0.2]], "coupling": [[0.9]]},
                    "grid": {"n_u": 16},
                    "tasks": ["double", "calderon"],
                }
            )
        )
    )
    assert report["passed"], report
    sigma = next(c for c in report["tasks"][0]["checks"] if c["name"] == "sigma_min")["value"]
    assert math.isfinite(sigma)
    print("smoke test passed")


if __name__ == "__main__":
    main()
