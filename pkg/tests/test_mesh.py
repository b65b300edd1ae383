import numpy as np
import pytest

from nlch.mesh import build_disk_mesh, dump_mesh, h1_seminorm_bulk, h1_seminorm_surf

# degree-4 quadrature on the reference triangle (barycentric points, weights)
_QP = np.array([
    [0.108103018168070, 0.445948490915965, 0.445948490915965],
    [0.445948490915965, 0.108103018168070, 0.445948490915965],
    [0.445948490915965, 0.445948490915965, 0.108103018168070],
    [0.816847572980459, 0.091576213509771, 0.091576213509771],
    [0.091576213509771, 0.816847572980459, 0.091576213509771],
    [0.091576213509771, 0.091576213509771, 0.816847572980459],
])
_QW = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)


def _triangle_quad(mesh, f_of_xy_and_nodal):
    """Integrate f(x, bary-interpolated nodal data) with the degree-4 rule."""
    total = 0.0
    for tri in mesh.triangles:
        p = mesh.nodes[tri]
        area = 0.5 * abs(np.cross(p[1] - p[0], p[2] - p[0]))
        for lam, w in zip(_QP, _QW):
            x = lam @ p
            total += w * area * f_of_xy_and_nodal(x, lam, tri)
    return total


def test_coarse_area_within_5_percent(mesh0):
    assert abs(mesh0.wb.sum() - np.pi) <= 0.05 * np.pi


def test_area_refinement_richardson():
    errs, hs = [], []
    for lvl in range(4):
        m = build_disk_mesh(lvl)
        errs.append(abs(m.wb.sum() - np.pi))
        hs.append(m.h)
    c_fit = max(errs[1] / hs[1] ** 2, errs[2] / hs[2] ** 2)
    assert errs[3] <= 1.2 * c_fit * hs[3] ** 2
    assert abs(build_disk_mesh(3).ws.sum() - 2 * np.pi) <= c_fit * hs[3] ** 2 * 4


def test_h_halves_per_level():
    hs = [build_disk_mesh(lvl).h for lvl in range(4)]
    for a, b in zip(hs, hs[1:]):
        assert 0.4 <= b / a <= 0.6


def test_stiffness_annihilates_constants():
    for lvl in range(3):
        m = build_disk_mesh(lvl)
        assert np.abs(m.stiff_b @ np.ones(m.n_bulk)).max() <= 1e-12
        assert np.abs(m.stiff_s @ np.ones(m.n_surf)).max() <= 1e-12


def test_boundary_loop_single_closed_cycle(mesh1):
    # boundary edges = edges owned by exactly one triangle
    edges = {}
    for tri in mesh1.triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            edges[key] = edges.get(key, 0) + 1
    boundary_edges = {k for k, cnt in edges.items() if cnt == 1}
    loop = mesh1.boundary
    loop_edges = {
        (min(a, b), max(a, b))
        for a, b in zip(loop, np.roll(loop, -1))
    }
    assert loop_edges == boundary_edges
    assert len(set(loop)) == len(loop)


def test_mass_matrices_spd(mesh1):
    rng = np.random.default_rng(0)
    assert (mesh1.mass_b != mesh1.mass_b.T).nnz == 0
    assert (mesh1.mass_s != mesh1.mass_s.T).nnz == 0
    for _ in range(20):
        u = rng.standard_normal(mesh1.n_bulk)
        assert u @ (mesh1.mass_b @ u) > 0
        assert u @ (mesh1.stiff_b @ u) >= -1e-13
    assert mesh1.wb.min() > 0 and mesh1.ws.min() > 0


def test_trace_of_constant_is_constant(mesh1):
    assert np.array_equal(mesh1.trace(np.ones(mesh1.n_bulk)), np.ones(mesh1.n_surf))


def test_bulk_seminorm_constant_and_coordinate(mesh2):
    assert h1_seminorm_bulk(np.full(mesh2.n_bulk, 3.7), mesh2) == 0.0
    val = h1_seminorm_bulk(mesh2.nodes[:, 0], mesh2)
    assert abs(val - np.sqrt(np.pi)) <= 0.01


def test_bulk_seminorm_matches_element_loop_oracle(mesh1):
    rng = np.random.default_rng(5)
    u = rng.standard_normal(mesh1.n_bulk)

    total = 0.0
    for tri in mesh1.triangles:
        p = mesh1.nodes[tri]
        area = 0.5 * abs(np.cross(p[1] - p[0], p[2] - p[0]))
        # P1 gradient from the nodal plane through (p_i, u_i)
        mat = np.column_stack([p[:, 0], p[:, 1], np.ones(3)])
        coeff = np.linalg.solve(mat, u[tri])
        total += area * (coeff[0] ** 2 + coeff[1] ** 2)
    assert abs(h1_seminorm_bulk(u, mesh1) - np.sqrt(total)) <= 1e-12


def test_surf_seminorm_constant_and_sine(mesh2):
    assert h1_seminorm_surf(np.zeros(mesh2.n_surf), mesh2) == 0.0
    val = h1_seminorm_surf(np.sin(mesh2.boundary_angles), mesh2)
    assert abs(val - np.sqrt(np.pi)) <= 0.01


def test_surf_seminorm_matches_edge_loop_oracle(mesh1):
    rng = np.random.default_rng(6)
    u = rng.standard_normal(mesh1.n_surf)
    pts = mesh1.nodes[mesh1.boundary]
    total = 0.0
    for j in range(mesh1.n_surf):
        k = (j + 1) % mesh1.n_surf
        ell = np.linalg.norm(pts[k] - pts[j])
        total += (u[k] - u[j]) ** 2 / ell
    assert abs(h1_seminorm_surf(u, mesh1) - np.sqrt(total)) <= 1e-12


def test_seminorm_dimension_mismatch():
    m = build_disk_mesh(0)
    with pytest.raises(ValueError):
        h1_seminorm_bulk(np.ones(m.n_bulk + 1), m)
    with pytest.raises(ValueError):
        h1_seminorm_surf(np.ones(m.n_surf - 1), m)


def test_interpolation_l2_second_order():
    f = lambda x: np.sin(2.0 * x[0]) * np.cos(1.5 * x[1])
    errs, hs = [], []
    for lvl in range(3):
        m = build_disk_mesh(lvl)
        nodal = np.array([f(x) for x in m.nodes])

        def sq_err(x, lam, tri):
            return (f(x) - lam @ nodal[tri]) ** 2

        errs.append(np.sqrt(_triangle_quad(m, sq_err)))
        hs.append(m.h)
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 1.8 <= slope <= 2.2


def test_mesh_dump(tmp_path, mesh0):
    path = tmp_path / "mesh.txt"
    dump_mesh(mesh0, str(path))
    lines = path.read_text().splitlines()
    assert lines[0].split() == [
        "nodes", str(mesh0.n_bulk), "triangles", str(mesh0.triangles.shape[0]),
        "boundary", str(mesh0.n_surf),
    ]
    assert len(lines) == 1 + mesh0.n_bulk + mesh0.triangles.shape[0] + 1


def test_negative_level_rejected():
    with pytest.raises(ValueError):
        build_disk_mesh(-1)
