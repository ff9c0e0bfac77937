import math

import numpy as np
import pytest

from slam2d.geometry import Pose2, between, compose, wrap_angle
from slam2d.posegraph import (
    Anchor,
    Chain1D,
    GraphEdge,
    OptimizeOptions,
    PoseGraph,
    PoseNode,
    UnobservableChainError,
    UnobservableGraphError,
    build_graph_front_end,
    edge_jacobians,
    load_graph,
    objective,
    optimize,
    residual,
    save_graph,
    solve_chain_1d,
)

from _support import (
    chain_objective,
    embed_chain,
    noisy_square_loop,
    random_chain,
    trajectory_rmse,
)


def lstsq_chain_solve(chain, paper_literal_eq2=False):
    """Reference chain solve via QR least squares on the stacked weighted rows."""
    n_states = len(chain.motions) + 1
    lids = []
    for _, lid, _, _ in chain.measurements:
        if lid not in lids:
            lids.append(lid)
    n = n_states + len(lids)
    rows, rhs = [], []
    if chain.prior_info > 0.0:
        r = [0.0] * n
        r[0] = math.sqrt(chain.prior_info)
        rows.append(r)
        rhs.append(math.sqrt(chain.prior_info) * chain.prior_mean)
    for t, (u, sigma) in enumerate(chain.motions, start=1):
        r = [0.0] * n
        r[t], r[t - 1] = 1.0 / sigma, -1.0 / sigma
        rows.append(r)
        rhs.append(u / sigma)
    for t, lid, z, sigma in chain.measurements:
        r = [0.0] * n
        r[t] = (1.0 if paper_literal_eq2 else -1.0) / sigma
        r[n_states + lids.index(lid)] = 1.0 / sigma
        rows.append(r)
        rhs.append(z / sigma)
    sol, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    return list(sol[:n_states]), {lid: sol[n_states + i] for i, lid in enumerate(lids)}


class TestChain1D:
    def test_consistent_chain_has_zero_objective(self):
        chain = Chain1D(0.0, 100.0, [(1.0, 0.1), (0.5, 0.1)], [(2, 7, 1.5, 0.2)])
        states, landmarks, j = solve_chain_1d(chain)
        assert states == pytest.approx([0.0, 1.0, 1.5], abs=1e-12)
        assert landmarks[7] == pytest.approx(3.0, abs=1e-12)
        assert j == pytest.approx(0.0, abs=1e-20)

    def test_matches_least_squares_oracle_on_random_chains(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            chain = random_chain(rng)
            states, landmarks, j = solve_chain_1d(chain)
            ref_states, ref_landmarks = lstsq_chain_solve(chain)
            assert states == pytest.approx(ref_states, abs=1e-9)
            for lid, m in ref_landmarks.items():
                assert landmarks[lid] == pytest.approx(m, abs=1e-9)
            assert j == pytest.approx(
                chain_objective(chain, states, landmarks), abs=1e-9, rel=1e-9
            )

    def test_solution_is_a_local_minimum(self):
        rng = np.random.default_rng(5)
        chain = random_chain(rng)
        states, landmarks, j = solve_chain_1d(chain)
        for _ in range(200):
            ds = rng.normal(0.0, 1e-3, len(states))
            dl = {lid: rng.normal(0.0, 1e-3) for lid in landmarks}
            perturbed = chain_objective(
                chain,
                [s + d for s, d in zip(states, ds)],
                {lid: m + dl[lid] for lid, m in landmarks.items()},
            )
            assert perturbed >= j - 1e-15

    def test_finite_difference_gradient_vanishes_at_solution(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            chain = random_chain(rng)
            states, landmarks, _ = solve_chain_1d(chain)
            h = 1e-6
            for k in range(len(states)):
                up = list(states)
                dn = list(states)
                up[k] += h
                dn[k] -= h
                grad = (
                    chain_objective(chain, up, landmarks)
                    - chain_objective(chain, dn, landmarks)
                ) / (2 * h)
                assert abs(grad) < 1e-7
            for lid in landmarks:
                up = dict(landmarks)
                dn = dict(landmarks)
                up[lid] += h
                dn[lid] -= h
                grad = (
                    chain_objective(chain, states, up)
                    - chain_objective(chain, states, dn)
                ) / (2 * h)
                assert abs(grad) < 1e-7

    def test_doubling_sigmas_quarters_objective(self):
        chain = Chain1D(0.3, 16.0, [(1.0, 0.1), (-0.4, 0.3)], [(1, 0, 2.0, 0.2)])
        soft = Chain1D(
            0.3,
            4.0,
            [(u, 2 * s) for u, s in chain.motions],
            [(t, lid, z, 2 * s) for t, lid, z, s in chain.measurements],
        )
        states, landmarks, j = solve_chain_1d(chain)
        s2, l2, j2 = solve_chain_1d(soft)
        assert s2 == pytest.approx(states, abs=1e-12)
        assert l2[0] == pytest.approx(landmarks[0], abs=1e-12)
        assert j2 == pytest.approx(j / 4.0, abs=1e-12, rel=1e-12)

    def test_chain_without_prior_is_unobservable(self):
        with pytest.raises(UnobservableChainError, match="gauge"):
            solve_chain_1d(Chain1D(0.0, 0.0, [(1.0, 0.1)], []))

    def test_landmark_readings_do_not_fix_the_gauge(self):
        # z = m - x is invariant when states and landmarks shift together
        chain = Chain1D(0.0, 0.0, [(1.0, 0.1)], [(0, 0, 2.0, 0.2), (1, 0, 1.0, 0.2)])
        with pytest.raises(UnobservableChainError):
            solve_chain_1d(chain)

    def test_literal_measurement_model_flag(self):
        chain = Chain1D(1.0, 1e8, [], [(0, 0, 2.0, 0.1)])
        _, landmarks, _ = solve_chain_1d(chain)
        _, literal, _ = solve_chain_1d(chain, paper_literal_eq2=True)
        assert landmarks[0] == pytest.approx(3.0, abs=1e-6)
        assert literal[0] == pytest.approx(1.0, abs=1e-6)

    def test_rejects_bad_sigmas_and_indices(self):
        with pytest.raises(ValueError):
            Chain1D(0.0, 1.0, [(1.0, 0.0)], [])
        with pytest.raises(ValueError):
            Chain1D(0.0, 1.0, [(1.0, 0.1)], [(5, 0, 1.0, 0.1)])
        with pytest.raises(ValueError):
            Chain1D(0.0, -1.0, [], [])


class TestResidual:
    def test_zero_for_consistent_measurement(self):
        xf = Pose2(1.0, 2.0, 0.7)
        xt = Pose2(-0.5, 3.0, -1.9)
        edge = GraphEdge("odometry", 0, 1, between(xf, xt), np.eye(3))
        assert residual(edge, xf, xt) == pytest.approx([0.0, 0.0, 0.0], abs=1e-15)

    def test_heading_component_is_wrapped(self):
        xf = Pose2(0.0, 0.0, 3.1)
        xt = Pose2(1.0, 0.0, -3.1)
        edge = GraphEdge("loop", 0, 1, Pose2(1.0, 0.0, 0.0), np.eye(3))
        r = residual(edge, xf, xt)
        assert -np.pi < r[2] <= np.pi
        # true heading change is a small positive wrap-around, not ~ -2 pi
        assert r[2] == pytest.approx(-(wrap_angle(-3.1 - 3.1)), abs=1e-12)

    def test_jacobians_match_finite_differences(self):
        rng = np.random.default_rng(42)
        h = 1e-6
        worst = 0.0
        for _ in range(100):
            xf = Pose2(*rng.normal(0.0, 2.0, 2), rng.uniform(-3.0, 3.0))
            xt = Pose2(*rng.normal(0.0, 2.0, 2), rng.uniform(-3.0, 3.0))
            edge = GraphEdge(
                "odometry",
                0,
                1,
                Pose2(*rng.normal(0.0, 1.0, 2), rng.uniform(-3.0, 3.0)),
                np.eye(3),
            )
            ja, jb = edge_jacobians(edge, xf, xt)
            for which, jac in ((0, ja), (1, jb)):
                for k in range(3):
                    d = np.zeros(3)
                    d[k] = h

                    def shifted(p, dv):
                        return Pose2(p.x + dv[0], p.y + dv[1], p.theta + dv[2])

                    if which == 0:
                        rp = residual(edge, shifted(xf, d), xt)
                        rm = residual(edge, shifted(xf, -d), xt)
                    else:
                        rp = residual(edge, xf, shifted(xt, d))
                        rm = residual(edge, xf, shifted(xt, -d))
                    diff = rp - rm
                    diff[2] = wrap_angle(diff[2])
                    fd = diff / (2 * h)
                    err = np.abs(fd - jac[:, k]).max() / max(1.0, np.abs(jac[:, k]).max())
                    worst = max(worst, err)
        assert worst < 1e-5

    def test_edge_validation(self):
        with pytest.raises(ValueError):
            GraphEdge("odometry", 1, 1, Pose2(0, 0, 0), np.eye(3))
        with pytest.raises(ValueError):
            GraphEdge("teleport", 0, 1, Pose2(0, 0, 0), np.eye(3))
        skew = np.eye(3)
        skew[0, 1] = 0.5
        with pytest.raises(ValueError):
            GraphEdge("loop", 0, 1, Pose2(0, 0, 0), skew)
        with pytest.raises(ValueError):
            GraphEdge("loop", 0, 1, Pose2(0, 0, 0), -np.eye(3))


class TestOptimize:
    def test_consistent_graph_is_a_fixed_point(self):
        rng = np.random.default_rng(9)
        poses = [Pose2(0.0, 0.0, 0.0)]
        deltas = []
        for _ in range(6):
            d = Pose2(*rng.normal(0.0, 0.5, 2), rng.uniform(-0.5, 0.5))
            deltas.append(d)
            poses.append(compose(poses[-1], d))
        graph = build_graph_front_end(deltas, [(0, 6, between(poses[0], poses[6]))])
        before = [n.estimate.as_tuple() for n in graph.nodes]
        optimized, stats = optimize(graph)
        assert stats.j_initial == pytest.approx(0.0, abs=1e-18)
        assert stats.j_final <= stats.j_initial + 1e-18
        for node, prev in zip(optimized.nodes, before):
            assert node.estimate.as_tuple() == pytest.approx(prev, abs=1e-12)

    def test_noisy_square_loop_improves_and_never_worsens(self):
        noisy, truth, loops = noisy_square_loop(seed=42)
        graph = build_graph_front_end(noisy, loops)
        assert len(graph.nodes) == 20
        rmse_before = trajectory_rmse(graph.nodes, truth)
        optimized, stats = optimize(graph)
        assert stats.j_final < stats.j_initial
        for a, b in zip(stats.j_history, stats.j_history[1:]):
            assert b <= a + 1e-12
        rmse_after = trajectory_rmse(optimized.nodes, truth)
        assert rmse_after <= 0.5 * rmse_before

    def test_objective_decreases_monotonically_on_random_graphs(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            deltas = [
                Pose2(*rng.normal(0.0, 1.0, 2), rng.uniform(-1.0, 1.0)) for _ in range(8)
            ]
            loops = [(2, 7, Pose2(*rng.normal(0.0, 1.0, 2), rng.uniform(-1.0, 1.0)))]
            graph = build_graph_front_end(deltas, loops)
            _, stats = optimize(graph)
            assert stats.j_final <= stats.j_initial + 1e-12
            for a, b in zip(stats.j_history, stats.j_history[1:]):
                assert b <= a + 1e-12

    def test_gradient_descent_reaches_the_same_minimum(self):
        deltas = [Pose2(1.0, 0.0, 0.0), Pose2(1.0, 0.0, 0.0)]
        loops = [(0, 2, Pose2(1.8, 0.0, 0.0))]
        anchor_info = np.diag([100.0, 100.0, 100.0])
        graph = build_graph_front_end(deltas, loops, anchor_info=anchor_info)
        gn, gn_stats = optimize(graph)
        gd, gd_stats = optimize(
            graph, OptimizeOptions(method="gradient_descent", max_iter=2000, tol=1e-12)
        )
        assert gd_stats.j_final == pytest.approx(gn_stats.j_final, abs=1e-6)
        for a, b in zip(gd_stats.j_history, gd_stats.j_history[1:]):
            assert b <= a + 1e-12

    def test_gauge_freedom_with_soft_anchor(self):
        noisy, _, loops = noisy_square_loop(seed=3)
        graph = build_graph_front_end(
            noisy, loops, anchor_info=np.diag([1e-12, 1e-12, 1e-12])
        )
        j0 = objective(graph)
        shift = Pose2(5.0, -2.0, 0.8)
        moved = PoseGraph(
            [PoseNode(n.id, compose(shift, n.estimate)) for n in graph.nodes],
            graph.edges,
            graph.anchor,
        )
        assert abs(objective(moved) - j0) < 1e-6 * j0

    def test_disconnected_node_is_unobservable(self):
        graph = PoseGraph(
            [PoseNode(0, Pose2(0, 0, 0)), PoseNode(1, Pose2(1, 0, 0))],
            [],
            Anchor(0, Pose2(0, 0, 0), np.eye(3)),
        )
        with pytest.raises(UnobservableGraphError, match="gauge"):
            optimize(graph)

    def test_single_anchored_node_converges_to_prior(self):
        graph = PoseGraph(
            [PoseNode(0, Pose2(1.0, -2.0, 0.5))],
            [],
            Anchor(0, Pose2(0.0, 0.0, 0.0), np.diag([10.0, 10.0, 10.0])),
        )
        optimized, stats = optimize(graph)
        assert stats.j_final == pytest.approx(0.0, abs=1e-15)
        assert optimized.nodes[0].estimate.as_tuple() == pytest.approx(
            (0.0, 0.0, 0.0), abs=1e-9
        )

    def test_rejects_unknown_method(self):
        with pytest.raises(ValueError):
            OptimizeOptions(method="newton")


class TestAxisEmbedding:
    def test_se2_optimizer_reproduces_chain_solutions(self):
        rng = np.random.default_rng(1234)
        for _ in range(20):
            chain = random_chain(rng)
            states, landmarks, j = solve_chain_1d(chain)
            graph, n_states, landmark_node = embed_chain(chain)
            optimized, stats = optimize(graph)
            for t in range(n_states):
                est = optimized.nodes[t].estimate
                assert est.x == pytest.approx(states[t], abs=1e-9)
                assert est.y == pytest.approx(0.0, abs=1e-9)
                assert est.theta == pytest.approx(0.0, abs=1e-9)
            for lid, node_id in landmark_node.items():
                assert optimized.nodes[node_id].estimate.x == pytest.approx(
                    landmarks[lid], abs=1e-9
                )
            assert stats.j_final == pytest.approx(j, abs=1e-9)


class TestFrontEnd:
    def test_node_and_edge_counts(self):
        deltas = [Pose2(1.0, 0.0, 0.1)] * 5
        loops = [(0, 5, Pose2(0.0, 0.0, 0.0)), (1, 4, Pose2(0.1, 0.0, 0.0))]
        graph = build_graph_front_end(deltas, loops)
        assert len(graph.nodes) == 6
        kinds = [e.kind for e in graph.edges]
        assert kinds.count("odometry") == 5
        assert kinds.count("loop") == 2
        assert graph.anchor.node_id == 0

    def test_estimates_are_dead_reckoned(self):
        start = Pose2(2.0, 1.0, 0.3)
        deltas = [Pose2(1.0, 0.0, 0.2), Pose2(0.5, -0.1, -0.4)]
        graph = build_graph_front_end(deltas, [], start=start)
        expected = start
        assert graph.nodes[0].estimate.as_tuple() == expected.as_tuple()
        for i, d in enumerate(deltas):
            expected = compose(expected, d)
            assert graph.nodes[i + 1].estimate.as_tuple() == pytest.approx(
                expected.as_tuple(), abs=1e-15
            )
        assert graph.anchor.prior.as_tuple() == start.as_tuple()

    def test_unknown_loop_nodes_are_skipped_with_warning(self):
        deltas = [Pose2(1.0, 0.0, 0.0)] * 2
        with pytest.warns(UserWarning, match="unknown node"):
            graph = build_graph_front_end(deltas, [(0, 9, Pose2(0, 0, 0))])
        assert all(e.kind == "odometry" for e in graph.edges)

    def test_accepts_constraint_objects(self):
        class Constraint:
            from_id = 0
            to_id = 2
            relative = Pose2(2.0, 0.0, 0.0)

        graph = build_graph_front_end([Pose2(1, 0, 0)] * 2, [Constraint()])
        assert graph.edges[-1].kind == "loop"
        assert graph.edges[-1].to_id == 2

    def test_default_information_matrices(self):
        graph = build_graph_front_end([Pose2(1, 0, 0)], [(0, 1, Pose2(1, 0, 0))])
        np.testing.assert_array_equal(
            graph.edges[0].information, np.diag([50.0, 50.0, 100.0])
        )
        np.testing.assert_array_equal(
            graph.edges[1].information, np.diag([100.0, 100.0, 200.0])
        )


class TestGraphText:
    def test_round_trip_is_exact(self, tmp_path):
        noisy, _, loops = noisy_square_loop(seed=8)
        graph = build_graph_front_end(noisy, loops)
        path = tmp_path / "graph.txt"
        save_graph(graph, path)
        loaded = load_graph(path)
        assert len(loaded.nodes) == len(graph.nodes)
        for a, b in zip(graph.nodes, loaded.nodes):
            assert a.estimate.as_tuple() == b.estimate.as_tuple()
        assert len(loaded.edges) == len(graph.edges)
        for a, b in zip(graph.edges, loaded.edges):
            assert a.kind == b.kind
            assert (a.from_id, a.to_id) == (b.from_id, b.to_id)
            assert a.measurement.as_tuple() == b.measurement.as_tuple()
            np.testing.assert_array_equal(a.information, b.information)
        assert loaded.anchor.node_id == graph.anchor.node_id
        assert loaded.anchor.prior.as_tuple() == graph.anchor.prior.as_tuple()
        np.testing.assert_array_equal(
            loaded.anchor.information, graph.anchor.information
        )

    def test_objective_survives_round_trip(self, tmp_path):
        noisy, _, loops = noisy_square_loop(seed=21)
        graph = build_graph_front_end(noisy, loops)
        path = tmp_path / "graph.txt"
        save_graph(graph, path)
        assert objective(load_graph(path)) == objective(graph)

    def test_bad_record_reports_line_number(self, tmp_path):
        path = tmp_path / "graph.txt"
        path.write_text("ANCHOR 0 0.0 0.0 0.0 1.0 0.0 0.0 1.0 0.0 1.0\nVERTEX 0 0.0 0.0 0.0\nWOBBLE 1 2 3\n")
        with pytest.raises(ValueError, match="graph.txt:3"):
            load_graph(path)

    def test_truncated_edge_reports_line_number(self, tmp_path):
        path = tmp_path / "graph.txt"
        path.write_text(
            "ANCHOR 0 0.0 0.0 0.0 1.0 0.0 0.0 1.0 0.0 1.0\n"
            "VERTEX 0 0.0 0.0 0.0\nVERTEX 1 1.0 0.0 0.0\n"
            "EDGE odometry 0 1 1.0 0.0\n"
        )
        with pytest.raises(ValueError, match=":4"):
            load_graph(path)

    def test_missing_anchor_rejected(self, tmp_path):
        path = tmp_path / "graph.txt"
        path.write_text("VERTEX 0 0.0 0.0 0.0\n")
        with pytest.raises(ValueError, match="ANCHOR"):
            load_graph(path)


class TestGraphValidation:
    def test_node_ids_must_be_dense(self):
        with pytest.raises(ValueError):
            PoseGraph(
                [PoseNode(0, Pose2(0, 0, 0)), PoseNode(2, Pose2(0, 0, 0))],
                [],
                Anchor(0, Pose2(0, 0, 0), np.eye(3)),
            )

    def test_edges_must_reference_existing_nodes(self):
        with pytest.raises(ValueError):
            PoseGraph(
                [PoseNode(0, Pose2(0, 0, 0)), PoseNode(1, Pose2(1, 0, 0))],
                [GraphEdge("odometry", 0, 5, Pose2(1, 0, 0), np.eye(3))],
                Anchor(0, Pose2(0, 0, 0), np.eye(3)),
            )
