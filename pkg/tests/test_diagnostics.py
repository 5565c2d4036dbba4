import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qlg import initcond
from qlg.diagnostics import (
    EnergyBudget,
    IndeterminateWindingError,
    RecurrenceTrace,
    TraceRecorder,
    coherence_length,
    detect_recurrence,
    diffusion_scaling_check,
    energies,
    fidelity,
    madelung,
    plaquette,
    point_inversion,
    vortex_core_mask,
    winding_number,
)
from qlg.evolution import SimParams, run
from qlg.lattice import GridSpec, SpinorField

P = SimParams()


def plane_wave(n, m):
    x = np.arange(n)[:, None, None] * np.ones((1, n, n))
    return np.exp(1j * 2 * np.pi * m * x / n), 2 * np.pi * m / n


def test_madelung_plane_wave():
    phi, k = plane_wave(16, 1)
    flow = madelung(phi)
    assert np.allclose(flow.rho, 1, atol=1e-12)
    assert np.allclose(flow.w[0], 2 * math.sin(k), atol=1e-12)
    assert np.allclose(flow.w[1:], 0) and np.allclose(flow.sqrt_rho_grad, 0)


def test_madelung_real_field_has_no_flow(rng):
    phi = 1 + rng.random((8, 8, 8))
    assert np.all(madelung(phi).w == 0)


def test_madelung_zero_region_is_finite():
    phi, _ = plane_wave(8, 1)
    phi[2:5, 2:5, :] = 0
    flow = madelung(phi)
    assert np.all(np.isfinite(flow.w))
    assert np.all(flow.w[:, 3, 3, :] == 0)
    with pytest.raises(ValueError):
        madelung(phi, density_floor=0.0)


def test_energies_uniform_and_plane_wave():
    g = GridSpec.cube(8)
    p = SimParams(g=2.0, a=0.5)
    e = energies(SpinorField.from_phi(np.full(g.shape, 1 / math.sqrt(2.0))), p)
    assert e.E_kin == 0 and e.E_qu == 0
    assert e.E_int == pytest.approx(p.g / p.a**2 * g.sites * 0.25)
    phi, _ = plane_wave(8, 1)
    e = energies(phi, p)
    assert e.E_kin > 0 and e.E_int > 0 and e.E_qu == pytest.approx(0, abs=1e-20)
    assert e.E_tot == e.E_kin + e.E_qu + e.E_int


@given(st.integers(0, 2**32 - 1))
def test_helmholtz_closure_in_budget(seed):
    f = SpinorField.random(GridSpec(8, 6, 10), np.random.default_rng(seed))
    e = energies(f, P)
    assert e.E_kin_incomp + e.E_kin_comp == pytest.approx(e.E_kin, rel=1e-9)


def test_winding_examples():
    g = GridSpec.cube(16)
    one = initcond.line_vortex(g, initcond.VortexSpec("z", (8.5, 8.5), 1, 1), P)
    two = initcond.line_vortex(g, initcond.VortexSpec("z", (8.5, 8.5), 2, -1), P)
    assert winding_number(one, plaquette(2, (8, 8, 0))) == 1
    # a 4-site loop cannot resolve winding 2 (each step is exactly pi), so use a wider circuit
    wide = [(x, 6, 0) for x in range(6, 12)] + [(11, y, 0) for y in range(7, 12)] + \
        [(x, 11, 0) for x in range(10, 5, -1)] + [(6, y, 0) for y in range(10, 6, -1)]
    assert winding_number(two, wide) == -2
    assert winding_number(one, plaquette(2, (1, 1, 0))) == 0


def test_winding_invariant_under_refinement():
    g = GridSpec.cube(16)
    phi = initcond.line_vortex(g, initcond.VortexSpec("z", (8.5, 8.5), 1, 1), P)
    small = plaquette(2, (8, 8, 4))
    big = [(x, 6, 4) for x in range(6, 11)] + [(10, y, 4) for y in range(7, 11)] + \
        [(x, 10, 4) for x in range(9, 5, -1)] + [(6, y, 4) for y in range(9, 6, -1)]
    assert winding_number(phi, small) == winding_number(phi, big) == 1


def test_winding_errors():
    g = GridSpec.cube(8)
    phi = initcond.line_vortex(g, initcond.VortexSpec("z", (4.0, 4.0)), P)
    with pytest.raises(IndeterminateWindingError):
        winding_number(phi, plaquette(2, (4, 4, 0)))
    with pytest.raises(ValueError):
        winding_number(phi, [(0, 0, 0), (2, 0, 0), (2, 2, 0), (0, 2, 0)])


def test_winding_loop_may_cross_the_boundary():
    g = GridSpec.cube(8)
    layout = initcond.preset("twelve", g)
    f = initcond.compose(g, layout, P)
    v = next(v for v in layout.vortices if v.axis == "z" and v.center == (2.5, 0.5))
    assert winding_number(f, plaquette(2, (2, 0, 3))) == v.charge
    # a taller loop through y = -1 wraps across the face and still encloses only that core
    tall = [(2, -1, 3), (3, -1, 3), (3, 0, 3), (3, 1, 3), (3, 2, 3), (2, 2, 3), (2, 1, 3), (2, 0, 3)]
    assert winding_number(f, tall) == v.charge
    assert winding_number(f, plaquette(2, (2, -1, 3))) == 0


def test_core_mask_counts():
    g = GridSpec.cube(16)
    assert vortex_core_mask(np.ones(g.shape), 0.5).voxels == 0
    phi = initcond.line_vortex(g, initcond.VortexSpec("z", (8.0, 8.0)), SimParams(a=0.5))
    m = vortex_core_mask(phi, 0.1)
    assert m.n_components == 1 and m.mask[8, 8].all()
    with pytest.raises(ValueError):
        vortex_core_mask(phi, 1.0)


def test_core_mask_joins_across_periodic_faces():
    mask_src = np.ones((8, 8, 8))
    mask_src[0, 3, 3] = mask_src[7, 3, 3] = 0  # touching through the x wrap
    mask_src[4, 0, 0] = mask_src[4, 7, 7] = 0  # diagonal through the corner: not 6-connected
    m = vortex_core_mask(mask_src, 0.5)
    assert m.voxels == 4 and m.n_components == 3


def test_fidelity_properties(rng):
    a = rng.standard_normal((6, 6, 6)) + 1j * rng.standard_normal((6, 6, 6))
    b = rng.standard_normal((6, 6, 6)) + 1j * rng.standard_normal((6, 6, 6))
    assert fidelity(a, a) == pytest.approx(1.0)
    assert fidelity(a, np.exp(1.3j) * a) == pytest.approx(1.0)
    assert fidelity(a, b) == pytest.approx(fidelity(b, a))
    assert 0 <= fidelity(a, b) <= 1
    with pytest.raises(ValueError):
        fidelity(a, np.zeros_like(a))
    with pytest.raises(ValueError):
        fidelity(a, a[:5])


def test_point_inversion(rng):
    a = rng.standard_normal((5, 6, 7))
    inv = point_inversion(a)
    assert inv[0, 0, 0] == a[0, 0, 0] and inv[1, 2, 3] == a[-1, -2, -3]
    assert np.array_equal(point_inversion(inv), a)
    f = SpinorField.random(GridSpec.cube(4), rng)
    assert point_inversion(point_inversion(f)) == f


def test_coherence_length():
    assert coherence_length(SimParams(a=1.0), 1.0) == 1.0
    assert coherence_length(SimParams(a=0.04), 1.0) == pytest.approx(5.0)
    assert coherence_length(SimParams(a=0.16), 1.0) == pytest.approx(2.5)
    with pytest.raises(ValueError):
        coherence_length(P, 0.0)


def test_detect_recurrence_synthetic():
    t = np.arange(0, 301)
    f = np.cos(np.pi * t / 200) ** 2
    assert detect_recurrence((t, f), 0.9) == [(200, 1.0)]
    assert detect_recurrence((t[:150], f[:150]), 0.9) == []
    with pytest.raises(ValueError):
        detect_recurrence((t[:2], f[:2]), 0.9)
    with pytest.raises(ValueError):
        detect_recurrence((t, f), 1.0)


def test_diffusion_scaling_fixture():
    ratio, = diffusion_scaling_check([(512, 41775), (1200, 230000)])
    assert ratio == pytest.approx(1.0023, abs=5e-5)
    assert abs(ratio - 1) < 0.003
    assert diffusion_scaling_check([(10, 100), (20, 400), (40, 1600)]) == [1.0, 1.0]


def test_trace_recorder_and_csv_round_trip(tmp_path):
    g = GridSpec.cube(16)
    f0 = initcond.compose(g, initcond.preset("twelve", g), P)
    rec = TraceRecorder(f0, P)
    run(f0, P, 6, 2, {"trace": rec})
    tr = rec.trace
    assert tr.timesteps == [0, 2, 4, 6]
    assert tr.fidelity[0] == pytest.approx(1.0)
    assert all(0 <= x <= 1 for x in tr.fidelity + tr.fidelity_inversion)
    tr.write_csv(tmp_path / "trace.csv")
    back = RecurrenceTrace.read_csv(tmp_path / "trace.csv")
    assert back.timesteps == tr.timesteps and back.fidelity == tr.fidelity
    assert [b.E_tot for b in back.budgets] == pytest.approx([b.E_tot for b in tr.budgets], rel=1e-15)
    with pytest.raises(ValueError):
        tr.append(6, tr.budgets[-1], 1, 1, 0)


def test_budget_total_is_sum():
    e = EnergyBudget(1.0, 2.0, 3.0, 0.9, 0.1)
    assert e.E_tot == 6.0
