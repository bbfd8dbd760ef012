import numpy as np
import pytest

from shapeopt import assembly
from shapeopt.geometry import BoundaryCurve, build_mesh, curve_eval
from shapeopt.spaces import FEFunction, interpolate
from shapeopt.state import (
    NonconvergenceError,
    PhysicalParams,
    StateSolution,
    evaluate_cost,
    mean_temperature,
    solve_state,
)

PAPER = PhysicalParams()  # re=1, pr=0.7, gr=1, alpha=10
LAM = (0.5, 1.5e4, 1e3, 0.1)


def flat_mesh(m):
    return build_mesh(BoundaryCurve.flat(m), 1.0 / m)


class TestPhysicalParams:
    def test_positivity(self):
        with pytest.raises(ValueError):
            PhysicalParams(re=-1.0)
        with pytest.raises(ValueError):
            PhysicalParams(pr=0.0)


class TestSolveState:
    def test_zero_data_is_exact_zero(self):
        mesh = flat_mesh(6)
        state = solve_state(mesh, PhysicalParams(alpha=0.0))
        assert state.picard_iters == 1
        for field in (state.v, state.p, state.T_hat, state.T):
            assert np.abs(field.coeffs).max() == 0.0

    def test_buoyancy_off_decouples(self):
        # with gr ~ 0 and no momentum source the flow is at rest and the
        # temperature solves one diffusion problem with the boundary lift
        mesh = flat_mesh(8)
        params = PhysicalParams(gr=1e-300)
        state = solve_state(mesh, params)
        assert np.abs(state.v.coeffs).max() <= 1e-14

        td = assembly.interpolate_Td(mesh, params.alpha)
        heat = assembly.heat_operator(mesh, params.re, params.pr)
        lift = assembly.assemble_temperature_laplacian(mesh, params.re, params.pr) @ td.coeffs
        t_hat = heat.solve(-lift)
        assert np.allclose(state.T_hat.coeffs, t_hat, atol=1e-12)

    def test_paper_contraction(self):
        mesh = build_mesh(BoundaryCurve.flat(17), 0.06)
        state = solve_state(mesh, PAPER, tol=1e-10)
        assert state.picard_iters <= 30
        inc = state.increments
        ratios = [inc[k + 1] / inc[k] for k in range(2, len(inc) - 1)]
        assert all(r < 0.9 for r in ratios)

    def test_fixed_point_property(self):
        # one extra sweep from the converged state barely moves it
        mesh = flat_mesh(8)
        tol = 1e-10
        state = solve_state(mesh, PAPER, tol=tol)
        td = assembly.interpolate_Td(mesh, PAPER.alpha)
        stokes = assembly.stokes_operator(mesh, PAPER.re)
        heat = assembly.heat_operator(mesh, PAPER.re, PAPER.pr)
        buoy = assembly.assemble_buoyancy(mesh, PAPER.gr, PAPER.re)
        lift = assembly.assemble_temperature_laplacian(mesh, PAPER.re, PAPER.pr) @ td.coeffs

        rhs_m = buoy @ (state.T_hat.coeffs + td.coeffs) - assembly.b1_vector(mesh, state.v.coeffs)
        v_new, _ = stokes.solve(rhs_m)
        rhs_t = -lift - assembly.b2_vector(mesh, v_new, state.T_hat.coeffs + td.coeffs)
        t_new = heat.solve(rhs_t)

        dv = np.sqrt(assembly.h1_seminorm_sq(mesh, v_new - state.v.coeffs))
        dt = np.sqrt(assembly.h1_seminorm_sq(mesh, t_new - state.T_hat.coeffs))
        scale = np.sqrt(assembly.h1_seminorm_sq(mesh, state.v.coeffs)) + np.sqrt(
            assembly.h1_seminorm_sq(mesh, state.T_hat.coeffs)
        )
        assert (dv + dt) / scale <= 10 * tol

    def test_weak_incompressibility(self):
        mesh = build_mesh(BoundaryCurve.from_callable(lambda x: -0.1 * np.sin(3 * np.pi * x), 17), 0.06)
        state = solve_state(mesh, PAPER)
        b = assembly.divergence_matrix(mesh)
        assert np.abs(b @ state.v.coeffs).max() <= 1e-11

    def test_dirichlet_conditions(self):
        mesh = flat_mesh(8)
        state = solve_state(mesh, PAPER)
        sv = assembly.vector_space(mesh)
        s2 = assembly.p2_space(mesh)
        assert np.abs(state.v.coeffs[sv.dirichlet_mask()]).max() == 0.0
        assert np.abs(state.T_hat.coeffs[s2.dirichlet_mask()]).max() == 0.0

    def test_nonconvergence_carries_history(self):
        mesh = flat_mesh(6)
        with pytest.raises(NonconvergenceError) as err:
            solve_state(mesh, PAPER, tol=1e-30, max_iter=3)
        assert len(err.value.history) == 3

    def test_symmetry_at_matched_nodes(self):
        mesh = build_mesh(BoundaryCurve.from_callable(lambda x: -0.1 * np.sin(3 * np.pi * x), 16), 0.1)
        state = solve_state(mesh, PAPER)
        s2 = assembly.p2_space(mesh)
        coords = s2.node_coords
        lookup = {(round(x, 12), round(y, 12)): i for i, (x, y) in enumerate(coords)}
        mirror = np.array(
            [lookup[(round(1.0 - x, 12), round(y, 12))] for x, y in coords]
        )
        ns = s2.n_dofs
        vx, vy = state.v.coeffs[:ns], state.v.coeffs[ns:]
        assert np.abs(vx + vx[mirror]).max() <= 1e-10   # odd component
        assert np.abs(vy - vy[mirror]).max() <= 1e-10   # even component
        assert np.abs(state.T.coeffs - state.T.coeffs[mirror]).max() <= 1e-10
        p = state.p.coeffs
        mirror_v = np.array(
            [lookup[(round(1.0 - x, 12), round(y, 12))] for x, y in mesh.vertices]
        )
        assert np.abs(p - p[mirror_v]).max() <= 1e-10

    def test_j1_mesh_convergence_order(self):
        # geometric (boundary interpolation) error dominates: J1 converges
        # at second order, so successive differences shrink by about 4
        # (the 1/8 mesh is still pre-asymptotic, start at 1/16)
        curve = BoundaryCurve.from_callable(lambda x: -0.1 * np.sin(3 * np.pi * x), 200)
        values = []
        for h in (1 / 16, 1 / 32, 1 / 64):
            mesh = build_mesh(curve, h)
            state = solve_state(mesh, PAPER)
            values.append(evaluate_cost(state, curve, *LAM).J1)
        d1 = abs(values[0] - values[1])
        d2 = abs(values[1] - values[2])
        assert 2.5 <= d1 / d2 <= 6.0


class TestMeanTemperature:
    def test_constant(self):
        mesh = flat_mesh(4)
        t = interpolate(assembly.p2_space(mesh), lambda x, y: 3.7)
        assert mean_temperature(t, mesh) == pytest.approx(3.7, abs=1e-13)

    def test_linear_on_square(self):
        mesh = flat_mesh(4)
        t = interpolate(assembly.p2_space(mesh), lambda x, y: y)
        assert mean_temperature(t, mesh) == pytest.approx(0.5, abs=1e-13)

    def test_against_1d_reduction_on_curved_domain(self):
        # for T = x1 the mesh integral reduces to 1d integrals of the
        # piecewise-linear bottom; Simpson is exact on each subinterval
        n = 10
        curve = BoundaryCurve.from_callable(lambda x: -0.1 * np.sin(3 * np.pi * x), n)
        mesh = build_mesh(curve, 1.0 / n)
        t = interpolate(assembly.p2_space(mesh), lambda x, y: x)

        xs = curve.grid
        num = den = 0.0
        for a, b in zip(xs[:-1], xs[1:]):
            for f, acc in ((lambda x: x * (1 - curve_eval(curve, x)[0]), "num"),
                           (lambda x: 1 - curve_eval(curve, x)[0], "den")):
                mid = 0.5 * (a + b)
                val = (b - a) / 6 * (f(a) + 4 * f(mid) + f(b))
                if acc == "num":
                    num += val
                else:
                    den += val
        assert mean_temperature(t, mesh) == pytest.approx(num / den, abs=1e-12)


class TestEvaluateCost:
    def _zero_state(self, mesh, t_coeffs):
        s2 = assembly.p2_space(mesh)
        sv = assembly.vector_space(mesh)
        s1 = assembly.p1_space(mesh)
        return StateSolution(
            v=FEFunction(sv, np.zeros(sv.n_dofs)),
            p=FEFunction(s1, np.zeros(s1.n_dofs)),
            T_hat=FEFunction(s2, np.zeros(s2.n_dofs)),
            T=FEFunction(s2, t_coeffs),
            picard_iters=1,
            final_increment=0.0,
        )

    def test_constant_temperature_zero_variance(self):
        mesh = flat_mesh(4)
        s2 = assembly.p2_space(mesh)
        state = self._zero_state(mesh, np.full(s2.n_dofs, 2.0))
        cost = evaluate_cost(state, BoundaryCurve.flat(4), *LAM)
        assert abs(cost.J1) <= 1e-14
        assert cost.I_T == pytest.approx(2.0, abs=1e-13)

    def test_flat_curve_only_j1(self):
        mesh = flat_mesh(8)
        state = solve_state(mesh, PAPER)
        cost = evaluate_cost(state, BoundaryCurve.flat(8), *LAM)
        assert cost.curve_energy == 0.0 and cost.mean_sq == 0.0 and cost.obstacle == 0.0
        assert cost.total == cost.J1

    def test_total_identity(self):
        curve = BoundaryCurve.from_callable(lambda x: -0.1 * np.sin(3 * np.pi * x), 10)
        mesh = build_mesh(curve, 0.1)
        state = solve_state(mesh, PAPER)
        c = evaluate_cost(state, curve, *LAM)
        lam1, lam2, lam3, _ = LAM
        total = c.J1 + 0.5 * lam1 * c.curve_energy + 0.5 * lam2 * c.mean_sq + 0.5 * lam3 * c.obstacle
        assert c.total == pytest.approx(total, rel=1e-14)

    def test_obstacle_plateau_value(self):
        n = 16
        vals = np.full(n + 1, 0.95)
        vals[0] = vals[-1] = 0.0
        curve = BoundaryCurve(vals)
        mesh = flat_mesh(4)
        state = self._zero_state(mesh, np.zeros(assembly.p2_space(mesh).n_dofs))
        cost = evaluate_cost(state, curve, *LAM)
        assert cost.obstacle == pytest.approx(0.05**2 * (n - 1) / n, abs=1e-15)
