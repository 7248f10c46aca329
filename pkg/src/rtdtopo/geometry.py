"""Iso-level extraction on structured grids by marching simplices.

Each quad is split into 4 triangles around its centre; each hexahedron into
6 pyramids (one per face, apex at the cell centre), and each pyramid into 4
tetrahedra around the face centre, for 24 tetrahedra per cell.  Centre and
face-centre values are the multilinear interpolants there, i.e. the mean of
the 8 corners and of the 4 face corners.  The split is symmetric, so mirror
symmetries of the nodal field are preserved, and every simplex is handled by
the unambiguous linear sign table.

Nodal values ``psi >= iso`` count as the positive (hard) side.
"""

from dataclasses import dataclass

import numpy as np

from .mesh import corner_offsets

HARD = 1
CUT = 0
SOFT = -1

_HEX_FACES = (
    (0, 3, 2, 1),  # z-
    (4, 5, 6, 7),  # z+
    (0, 1, 5, 4),  # y-
    (3, 7, 6, 2),  # y+
    (0, 4, 7, 3),  # x-
    (1, 2, 6, 5),  # x+
)


def _simplex_template(dim):
    """Weights expressing each simplex vertex as a combination of cell corners.

    Returns an array ``(n_simplex, dim + 1, n_corners)``.
    """
    nc = 2 ** dim
    centre = np.full(nc, 1.0 / nc)
    eye = np.eye(nc)
    simplices = []
    if dim == 2:
        for k in range(4):
            simplices.append([eye[k], eye[(k + 1) % 4], centre])
    else:
        for face in _HEX_FACES:
            fc = np.zeros(nc)
            fc[list(face)] = 0.25
            for k in range(4):
                a, b = face[k], face[(k + 1) % 4]
                simplices.append([centre, fc, eye[a], eye[b]])
    return np.array(simplices)


_TEMPLATES = {2: _simplex_template(2), 3: _simplex_template(3)}


@dataclass
class CutElementData:
    """Hard/soft split of one bi-material element."""

    element: int
    vol_plus: float
    vol_minus: float
    patches: np.ndarray

    def check(self, cell_volume, rtol=1e-12):
        if self.vol_plus < 0 or self.vol_minus < 0:
            raise ValueError(f"negative sub-volume in element {self.element}")
        if abs(self.vol_plus + self.vol_minus - cell_volume) > rtol * cell_volume:
            raise ValueError(
                f"sub-volumes of element {self.element} sum to "
                f"{self.vol_plus + self.vol_minus}, expected {cell_volume}"
            )


@dataclass
class TopologySnapshot:
    """Phase volumes and interface of a nodal field cut at an iso level.

    ``vol_plus`` holds the hard volume of every element; ``phase`` is
    ``HARD``/``SOFT``/``CUT`` per element.  ``patches`` are interface triangles
    (3D, shape ``(n, 3, 3)``) or segments (2D, ``(n, 2, 2)``), with
    ``normals`` pointing into the hard phase and ``patch_element`` naming the
    owning element.
    """

    grid: object
    vol_plus: np.ndarray
    phase: np.ndarray
    patches: np.ndarray
    normals: np.ndarray
    patch_element: np.ndarray
    patch_measure: np.ndarray

    @property
    def vol_minus(self):
        return self.grid.element_volume - self.vol_plus

    @property
    def hard_volume(self):
        return float(self.vol_plus.sum())

    @property
    def soft_volume(self):
        return float(self.vol_minus.sum())

    @property
    def hard_fraction(self):
        return self.hard_volume / self.grid.volume

    @property
    def soft_fraction(self):
        return self.soft_volume / self.grid.volume

    @property
    def interface_measure(self):
        return float(self.patch_measure.sum())

    @property
    def cut_indices(self):
        return np.flatnonzero(self.phase == CUT)

    def cut_elements(self):
        """Per-element :class:`CutElementData` for every bi-material element."""
        out = []
        vm = self.vol_minus
        for e in self.cut_indices:
            out.append(CutElementData(int(e), float(self.vol_plus[e]), float(vm[e]),
                                      self.patches[self.patch_element == e]))
        return out


def tessellate_cell(psi_corners, origin, h):
    """Split one cell into simplices carrying interpolated vertex values.

    Parameters
    ----------
    psi_corners : array (2**dim,)
        Corner values in element-local node order.
    origin, h : array (dim,)
        Lower corner and edge lengths of the cell.

    Returns
    -------
    coords : array (n_simplex, dim + 1, dim)
    values : array (n_simplex, dim + 1)
    """
    psi_corners = np.asarray(psi_corners, dtype=float)
    dim = int(round(np.log2(psi_corners.size)))
    W = _TEMPLATES[dim]
    corners = np.asarray(origin, float) + (corner_offsets(dim) + 1.0) / 2.0 * np.asarray(h, float)
    return W @ corners, W @ psi_corners


def _edge_param(a, b):
    # a >= 0 > b: position of the zero along a -> b
    t = a / (a - b)
    return np.clip(t, 0.0, 1.0)


def _positive_fraction_tri(v):
    """Area fraction of ``{v >= 0}`` on linear triangles, ``v`` shape (n, 3)."""
    pos = v >= 0
    npos = pos.sum(axis=1)
    frac = np.where(npos == 3, 1.0, 0.0)
    for k, flip in ((1, False), (2, True)):
        sel = npos == k
        if not sel.any():
            continue
        vv = v[sel]
        pp = pos[sel]
        # the lone vertex: the positive one when k == 1, the negative one when k == 2
        lone = np.argmax(pp if not flip else ~pp, axis=1)
        rows = np.arange(vv.shape[0])
        a = vv[rows, lone]
        o1 = vv[rows, (lone + 1) % 3]
        o2 = vv[rows, (lone + 2) % 3]
        # fraction of the corner triangle at the lone vertex
        corner = np.clip(a / (a - o1), 0.0, 1.0) * np.clip(a / (a - o2), 0.0, 1.0)
        frac[sel] = 1.0 - corner if flip else corner
    return frac


def _det4_fraction(bary):
    """|det| of ``(n, 4, 4)`` barycentric vertex matrices (sub-tet volume fraction)."""
    return np.abs(np.linalg.det(bary))


def _positive_fraction_tet(v):
    """Volume fraction of ``{v >= 0}`` on linear tetrahedra, ``v`` shape (n, 4)."""
    pos = v >= 0
    npos = pos.sum(axis=1)
    frac = np.where(npos == 4, 1.0, 0.0)

    for k in (1, 3):
        sel = npos == k
        if not sel.any():
            continue
        vv = v[sel]
        lone_mask = pos[sel] if k == 1 else ~pos[sel]
        lone = np.argmax(lone_mask, axis=1)
        rows = np.arange(vv.shape[0])
        a = vv[rows, lone]
        prod = np.ones(vv.shape[0])
        for s in (1, 2, 3):
            o = vv[rows, (lone + s) % 4]
            prod *= np.clip(a / (a - o), 0.0, 1.0)
        frac[sel] = prod if k == 1 else 1.0 - prod

    sel = npos == 2
    if sel.any():
        vv = v[sel]
        order = np.argsort(~pos[sel], axis=1, kind="stable")  # positives first
        rows = np.arange(vv.shape[0])[:, None]
        p = vv[rows, order]
        a, b, c, d = (p[:, i] for i in range(4))
        n = vv.shape[0]
        eye = np.eye(4)

        def edge_point(x, y, ix, iy):
            t = _edge_param(x, y)[:, None]
            return (1.0 - t) * eye[ix] + t * eye[iy]

        A = np.broadcast_to(eye[0], (n, 4))
        B = np.broadcast_to(eye[1], (n, 4))
        Pac = edge_point(a, c, 0, 2)
        Pad = edge_point(a, d, 0, 3)
        Pbc = edge_point(b, c, 1, 2)
        Pbd = edge_point(b, d, 1, 3)
        # convex prism (A, Pac, Pad) -> (B, Pbc, Pbd) split into three tets
        t1 = np.stack([A, Pac, Pad, Pbd], axis=1)
        t2 = np.stack([A, Pac, Pbc, Pbd], axis=1)
        t3 = np.stack([A, B, Pbc, Pbd], axis=1)
        frac[sel] = _det4_fraction(t1) + _det4_fraction(t2) + _det4_fraction(t3)
    return frac


def _simplex_values(grid, psi, elements=None):
    corner_vals = psi[grid.element_nodes if elements is None else grid.element_nodes[elements]]
    W = _TEMPLATES[grid.dim]
    # (ne, nc) x (ns, nv, nc) -> (ne, ns, nv)
    return np.einsum("ec,svc->esv", corner_vals, W)


def hard_volumes(grid, psi, iso=0.0):
    """Per-element hard-phase volume and phase classification of ``psi - iso``.

    This is the cheap path used inside the volume-constraint root search; it
    skips interface extraction.
    """
    psi = np.asarray(psi, dtype=float) - iso
    corner = psi[grid.element_nodes]
    pos = corner >= 0
    all_pos = pos.all(axis=1)
    all_neg = ~pos.any(axis=1)
    phase = np.full(grid.n_elements, CUT, dtype=np.int8)
    phase[all_pos] = HARD
    phase[all_neg] = SOFT
    vol = np.where(all_pos, grid.element_volume, 0.0)
    cut = np.flatnonzero(phase == CUT)
    if cut.size:
        sv = _simplex_values(grid, psi, cut)
        ns, nv = sv.shape[1], sv.shape[2]
        flat = sv.reshape(-1, nv)
        frac = _positive_fraction_tri(flat) if grid.dim == 2 else _positive_fraction_tet(flat)
        vol[cut] = frac.reshape(-1, ns).sum(axis=1) * (grid.element_volume / ns)
    return vol, phase


def soft_fraction(grid, psi, iso=0.0):
    vol, _ = hard_volumes(grid, psi, iso)
    return 1.0 - vol.sum() / grid.volume


def _interface_2d(xy, v):
    """Zero-level segments of linear triangles with mixed signs."""
    pos = v >= 0
    npos = pos.sum(axis=1)
    sel = (npos == 1) | (npos == 2)
    idx = np.flatnonzero(sel)
    segs = np.empty((idx.size, 2, 2))
    for n, s in enumerate(idx):
        pts = []
        for i, j in ((0, 1), (1, 2), (2, 0)):
            if pos[s, i] != pos[s, j]:
                p, q = (i, j) if pos[s, i] else (j, i)
                t = _edge_param(v[s, p], v[s, q])
                pts.append(xy[s, p] + t * (xy[s, q] - xy[s, p]))
        segs[n] = pts
    return idx, segs


def _interface_3d(xyz, v):
    pos = v >= 0
    npos = pos.sum(axis=1)
    idx = np.flatnonzero((npos > 0) & (npos < 4))
    tris = []
    owner = []
    for s in idx:
        pts = []
        P = np.flatnonzero(pos[s])
        N = np.flatnonzero(~pos[s])
        for p in P:
            for q in N:
                t = _edge_param(v[s, p], v[s, q])
                pts.append(xyz[s, p] + t * (xyz[s, q] - xyz[s, p]))
        if len(pts) == 3:
            tris.append(pts)
            owner.append(s)
        else:
            # order: (p0,n0), (p0,n1), (p1,n0), (p1,n1) -> quad p0n0, p1n0, p1n1, p0n1
            q0, q1, q2, q3 = pts[0], pts[2], pts[3], pts[1]
            tris.append([q0, q1, q2])
            tris.append([q0, q2, q3])
            owner += [s, s]
    if not tris:
        return np.zeros(0, dtype=np.int64), np.zeros((0, 3, 3))
    return np.array(owner), np.array(tris)


def _simplex_gradient(coords, v):
    """Gradient of the linear interpolant on each simplex."""
    E = coords[:, 1:, :] - coords[:, :1, :]
    dv = v[:, 1:] - v[:, :1]
    return np.linalg.solve(E, dv[..., None])[..., 0]


def classify_and_measure(grid, psi, iso=0.0):
    """Cut a nodal field at ``iso`` and measure both phases and the interface.

    Returns a :class:`TopologySnapshot`.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (grid.n_nodes,):
        raise ValueError(f"psi must have {grid.n_nodes} nodal values")
    vol, phase = hard_volumes(grid, psi, iso)
    cut = np.flatnonzero(phase == CUT)
    dim = grid.dim
    if cut.size == 0:
        shape = (0, dim, dim)
        return TopologySnapshot(grid, vol, phase, np.zeros(shape), np.zeros((0, dim)),
                                np.zeros(0, dtype=np.int64), np.zeros(0))

    W = _TEMPLATES[dim]
    ns = W.shape[0]
    corners = grid.node_coords[grid.element_nodes[cut]]  # (nc_e, ncorner, dim)
    coords = np.einsum("svc,ecd->esvd", W, corners).reshape(-1, dim + 1, dim)
    vals = _simplex_values(grid, psi - iso, cut).reshape(-1, dim + 1)
    if dim == 2:
        sidx, patches = _interface_2d(coords, vals)
    else:
        sidx, patches = _interface_3d(coords, vals)
    owner = cut[sidx // ns] if sidx.size else np.zeros(0, dtype=np.int64)

    if dim == 2:
        tang = patches[:, 1] - patches[:, 0]
        measure = np.linalg.norm(tang, axis=1)
        normals = np.stack([-tang[:, 1], tang[:, 0]], axis=1)
    else:
        cross = np.cross(patches[:, 1] - patches[:, 0], patches[:, 2] - patches[:, 0])
        measure = 0.5 * np.linalg.norm(cross, axis=1)
        normals = cross
    # patches through a vertex or edge that sits exactly on the level have
    # zero measure and no defined normal; they carry no geometry
    keep = measure > 1e-12 * max(grid.h) ** (dim - 1)
    sidx, patches, owner, measure, normals = (a[keep] for a in
                                              (sidx, patches, owner, measure, normals))
    grads = _simplex_gradient(coords[sidx], vals[sidx]) if sidx.size else normals
    flip = np.einsum("nd,nd->n", normals, grads) < 0
    # reversing the vertex order keeps winding consistent with the flipped normal
    patches[flip] = patches[flip][:, ::-1]
    normals[flip] *= -1.0
    norm = np.linalg.norm(normals, axis=1)
    ok = norm > 0
    normals[ok] /= norm[ok, None]
    return TopologySnapshot(grid, vol, phase, patches, normals, owner, measure)


def export_isosurface(snapshot):
    """Flatten the interface of a snapshot into ``(points, cells, normals)``.

    ``points`` is ``(n_points, 3)`` (2D grids get ``z = 0``); ``cells`` is
    ``(n_cells, k)`` vertex indices with ``k = 3`` for triangles and ``k = 2``
    for segments; ``normals`` are unit vectors toward the hard phase.
    """
    p = snapshot.patches
    if p.shape[0] == 0:
        k = 2 if snapshot.grid.dim == 2 else 3
        return np.zeros((0, 3)), np.zeros((0, k), dtype=np.int64), np.zeros((0, 3))
    n, k, dim = p.shape
    pts = p.reshape(-1, dim)
    normals = snapshot.normals
    if dim == 2:
        pts = np.column_stack([pts, np.zeros(len(pts))])
        normals = np.column_stack([normals, np.zeros(len(normals))])
    cells = np.arange(n * k).reshape(n, k)
    return pts, cells, normals
