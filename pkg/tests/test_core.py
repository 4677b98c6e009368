import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from markovcap import channels
from markovcap.core import (
    BoundaryError,
    DimensionError,
    ObjectiveSequence,
    ParamDomain,
    PointClass,
    SequenceConstants,
    classify_point,
    gradient_fd,
    hessian_probe,
)

EPS = np.finfo(float).eps


def synthetic(fn, lo=0.0, hi=1.0, **kw):
    consts = SequenceConstants.constant(1.0, 0.5, 2.0, 2.0, 0)
    return ObjectiveSequence(ParamDomain.interval(lo, hi), consts, lambda k, th: fn(th[0]), **kw)


class TestClassifyPoint:
    dom = ParamDomain.interval(0.2, 0.6)

    def test_center_is_interior(self):
        assert classify_point(self.dom, 0.4) is PointClass.INTERIOR

    def test_outside(self):
        assert classify_point(self.dom, 0.7) is PointClass.OUTSIDE
        assert classify_point(self.dom, 0.1999) is PointClass.OUTSIDE

    def test_face_and_margin(self):
        assert classify_point(self.dom, 0.6) is PointClass.BOUNDARY
        assert classify_point(self.dom, 0.2 + 1e-10) is PointClass.BOUNDARY
        assert classify_point(self.dom, 0.2 + 2e-9) is PointClass.INTERIOR

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError) as err:
            classify_point(self.dom, [0.3, 0.4])
        assert err.value.expected == 1 and err.value.actual == 2

    @given(st.floats(-2, 2, allow_nan=False), st.floats(-2, 2, allow_nan=False))
    def test_labels_partition_the_plane(self, x, y):
        dom = ParamDomain((0.0, -1.0), (1.0, 0.5))
        label = classify_point(dom, [x, y])
        inside = 0 <= x <= 1 and -1 <= y <= 0.5
        deep = 1e-9 <= x <= 1 - 1e-9 and -1 + 1e-9 <= y <= 0.5 - 1e-9
        expected = PointClass.INTERIOR if deep else PointClass.BOUNDARY if inside else PointClass.OUTSIDE
        assert label is expected


class TestDomainAndConstants:
    def test_rejects_empty_box(self):
        with pytest.raises(ValueError):
            ParamDomain.interval(0.5, 0.5)

    def test_rejects_wide_margin(self):
        with pytest.raises(ValueError):
            ParamDomain.interval(0.0, 1.0, margin=0.6)

    def test_grid_includes_faces(self):
        g = ParamDomain((0, 0), (1, 2)).grid(3)
        assert g.shape == (9, 2)
        assert ParamDomain((0, 0), (1, 2)).on_face(g).sum() == 8

    def test_polynomial_N(self):
        c = SequenceConstants((46587.2, 6207.73, 374.945), 0.875, 10.37, 1.2, 120)
        assert c.N(0) == 46587.2
        assert c.N(2) == pytest.approx(46587.2 + 2 * 6207.73 + 4 * 374.945)

    @pytest.mark.parametrize(
        "kw",
        [dict(rho=1.0), dict(rho=0.0), dict(M=0.0), dict(m=3.0), dict(k0=-1), dict(k0=1.5)],
    )
    def test_invalid_constants(self, kw):
        args = dict(N_poly=(1.0,), rho=0.5, M=2.0, m=1.0, k0=0) | kw
        with pytest.raises(ValueError):
            SequenceConstants(**args)


class TestGradientFd:
    def test_affine_is_exact(self):
        g, _ = gradient_fd(synthetic(lambda x: 3 * x), 0, 0.4)
        assert g[0] == pytest.approx(3.0, abs=1e-9)

    def test_quadratic(self):
        g, h = gradient_fd(synthetic(lambda x: -((x - 0.3) ** 2)), 0, 0.5, h=1e-5)
        assert h == 1e-5
        assert g[0] == pytest.approx(-0.4, abs=1e-9)

    def test_step_shrinks_near_face(self):
        seq = synthetic(lambda x: x * x)
        _, h = gradient_fd(seq, 0, 1 - 1e-7, h=1e-3)
        assert h <= 1e-7

    def test_boundary_error(self):
        with pytest.raises(BoundaryError, match="too close to boundary"):
            gradient_fd(synthetic(lambda x: x), 0, 1.0)

    def test_ge_gradient_at_terminal_iterate(self, ge_seq):
        g = ge_seq.gradient(16, 0.423653)
        assert g[0] == pytest.approx(0.000258353, abs=5e-4)

    def test_two_dimensional(self):
        dom = ParamDomain((0, 0), (1, 1))
        seq = ObjectiveSequence(dom, SequenceConstants.constant(1, 0.5, 1, None, 0), lambda k, th: th[0] * th[1])
        g, _ = gradient_fd(seq, 0, [0.3, 0.7])
        np.testing.assert_allclose(g, [0.7, 0.3], atol=1e-9)


class TestHessianProbe:
    def test_constant_curvature(self):
        m_est, M_est = hessian_probe(synthetic(lambda x: -2 * x * x), 0, np.linspace(0.1, 0.9, 9))
        assert m_est == pytest.approx(4, abs=1e-4)
        assert M_est == pytest.approx(4, abs=1e-4)

    def test_noiseless_strictly_concave(self, noiseless_seq):
        h = 1e-4
        m_est, _ = hessian_probe(noiseless_seq, 200, np.linspace(0.4 + h, 0.9 - h, 26), h)
        assert m_est > 0


# --------------------------------------------------------------------------
# channel-wide audits

def _channels():
    return {
        "bec": (channels.bec_objective(), 60),
        "noiseless": (channels.noiseless_objective(), 200),
        "gilbert-elliott": (channels.ge_objective(), 10),
    }


@pytest.mark.parametrize("name", ["bec", "noiseless", "gilbert-elliott"])
def test_richardson_consistency(name):
    """Halving h shrinks the step-to-step change of the FD gradient like h^2."""
    seq, k = _channels()[name]
    rng = np.random.default_rng(20240611)
    lo, hi = seq.domain.lo[0] + 0.03, seq.domain.hi[0] - 0.03
    pts = rng.uniform(lo, hi, 20)
    h0 = 1e-2

    def change(x, h):
        g1, _ = gradient_fd(seq, k, x, h)
        g2, _ = gradient_fd(seq, k, x, h / 2)
        return abs(g1[0] - g2[0])

    C = max(change(x, h0) for x in pts) / h0**2
    roundoff = 1e3 * EPS / (h0 / 4)
    for x in pts:
        assert change(x, h0 / 2) <= 1.1 * C * (h0 / 2) ** 2 + roundoff


def _audit(seq, top):
    c = seq.constants
    grid = np.linspace(seq.domain.lo[0] + 1e-6, seq.domain.hi[0] - 1e-6, 50)
    for x in grid:
        prev = seq.value(c.k0 - 1, x)
        for k in range(c.k0, top + 1):
            cur = seq.value(k, x)
            assert abs(cur - prev) <= c.tail(k) + 64 * EPS * abs(cur), (seq.name, x, k)
            prev = cur


@pytest.mark.parametrize("name", ["bec", "noiseless"])
def test_assumption_audit(name):
    """|f_k - f_{k-1}| <= N(k) rho^k on a 50-point grid, plus a few ulps of roundoff."""
    seq, _ = _channels()[name]
    _audit(seq, seq.constants.k0 + 30)


# GE orders above 16 cost seconds per point and sit at the rounding floor anyway
GE_AUDIT_TOP = 16


@pytest.mark.xfail(
    strict=True,
    reason="GE default constants (N=10, rho=0.1) are pinned by the iterate table, but the "
    "differences decay at only ~0.3 per order near theta=0.95 and exceed 10*0.1^14 near theta=0.42",
)
def test_assumption_audit_ge_default_constants(ge_seq):
    _audit(ge_seq, GE_AUDIT_TOP)


def test_assumption_audit_ge_domain_wide_constants():
    seq = channels.ge_objective(N=1.0, rho=0.35)
    _audit(seq, GE_AUDIT_TOP)


def test_eval_is_deterministic_across_processes():
    code = (
        "from markovcap import channels as c;"
        "print(repr(c.bec_objective().value(100, 0.4)),"
        "repr(c.noiseless_objective().value(300, 0.61)),"
        "repr(c.ge_objective().value(14, 0.37)))"
    )
    runs = [subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
            for _ in range(2)]
    assert runs[0] == runs[1]
    local = (channels.bec_objective().value(100, 0.4), channels.noiseless_objective().value(300, 0.61),
             channels.ge_objective().value(14, 0.37))
    assert runs[0].split() == [repr(v) for v in local]
