//! Unstructured triangulation of the region outside the neck.

use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation,
};

use crate::error::{Error, Result};

/// Minimum angle requested from the refiner.
pub const ANGLE_LIMIT_DEG: f64 = 28.0;

/// Triangulates the region bounded by closed node loops (holes by parity)
/// with a quality refinement. Boundary loop edges are never split, so the
/// loop nodes are exactly the boundary nodes of the result.
///
/// Steiner points are appended to `nodes`; triangles are counter-clockwise.
pub fn triangulate(
    loops: &[Vec<usize>],
    nodes: &mut Vec<[f64; 2]>,
    max_edge: f64,
) -> Result<Vec<[usize; 3]>> {
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::new();
    // spade vertex index -> global node index
    let mut global: Vec<Option<usize>> = Vec::new();
    let mut inserted = 0usize;
    for lp in loops {
        let mut handles = Vec::with_capacity(lp.len());
        for &n in lp {
            let p = nodes[n];
            let h = cdt
                .insert(Point2::new(p[0], p[1]))
                .map_err(|e| Error::mesh(p, format!("cannot insert boundary node: {e:?}")))?;
            let i = h.index();
            if i >= global.len() {
                global.resize(i + 1, None);
            }
            match global[i] {
                Some(prev) if prev != n => {
                    return Err(Error::mesh(p, format!("boundary nodes {prev} and {n} coincide")))
                }
                _ => global[i] = Some(n),
            }
            handles.push(h);
            inserted += 1;
        }
        for k in 0..handles.len() {
            let (a, b) = (handles[k], handles[(k + 1) % handles.len()]);
            if cdt.try_add_constraint(a, b).is_empty() {
                let p = nodes[lp[k]];
                return Err(Error::mesh(p, "boundary segment crosses another boundary segment"));
            }
        }
    }

    let params = RefinementParameters::<f64>::new()
        .keep_constraint_edges()
        .exclude_outer_faces(true)
        .with_angle_limit(AngleLimit::from_deg(ANGLE_LIMIT_DEG))
        .with_max_allowed_area(3f64.sqrt() / 4.0 * max_edge * max_edge)
        .with_max_additional_vertices(200 * inserted + 100_000);
    let res = cdt.refine(params);

    let mut tris = Vec::new();
    for f in cdt.inner_faces() {
        if res.excluded_faces.contains(&f.fix()) {
            continue;
        }
        let vs = f.vertices();
        let mut t = [0usize; 3];
        for (slot, v) in t.iter_mut().zip(vs.iter()) {
            let i = v.fix().index();
            if i >= global.len() {
                global.resize(i + 1, None);
            }
            *slot = match global[i] {
                Some(g) => g,
                None => {
                    let p = v.position();
                    nodes.push([p.x, p.y]);
                    global[i] = Some(nodes.len() - 1);
                    nodes.len() - 1
                }
            };
        }
        tris.push(t);
    }
    if tris.is_empty() {
        return Err(Error::mesh([0.0, 0.0], "outer triangulation is empty"));
    }
    Ok(tris)
}
