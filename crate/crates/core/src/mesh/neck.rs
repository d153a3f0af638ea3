//! Structured mapped grid in the neck `|x'| ≤ R1`.

use super::sizing::equidistribute;
use super::MeshParams;
use crate::geometry::GapGeometry;

/// Column abscissae on `[0, R1]` with spacing `neck_step · δ(x)^g`.
pub fn columns(geom: &GapGeometry, params: &MeshParams) -> Vec<f64> {
    let g = params.grading_exponent;
    let s = params.neck_step;
    equidistribute(0.0, geom.r1(), |x| 1.0 / (s * geom.delta(x).powf(g)))
}

/// Row `k` of `L` above abscissa `x`. In symmetric geometries the rows are
/// built from the upper wall alone so the middle row sits exactly on
/// `x_n = 0` and rows `k`, `L - k` are exact mirrors.
pub fn row_y(geom: &GapGeometry, x: f64, k: usize, layers: usize) -> f64 {
    let top = geom.upper_y(x);
    if k == layers {
        return top;
    }
    if geom.symmetric {
        return (2.0 * k as f64 - layers as f64) / layers as f64 * top;
    }
    let bot = geom.lower_y(x);
    if k == 0 {
        return bot;
    }
    bot + (k as f64 / layers as f64) * (top - bot)
}

/// Splits each quad along the diagonal that satisfies the Delaunay
/// criterion. Corners are bottom-left, bottom-right, top-right, top-left.
pub fn split_quad(nodes: &[[f64; 2]], q: [usize; 4]) -> [[usize; 3]; 2] {
    let [a, b, c, d] = q;
    let angle = |o: usize, p: usize, r: usize| {
        let (o, p, r) = (nodes[o], nodes[p], nodes[r]);
        let u = [p[0] - o[0], p[1] - o[1]];
        let v = [r[0] - o[0], r[1] - o[1]];
        (u[0] * v[1] - u[1] * v[0]).abs().atan2(u[0] * v[0] + u[1] * v[1])
    };
    // With diagonal a-c the opposite angles sit at b and d.
    if angle(b, c, a) + angle(d, a, c) <= std::f64::consts::PI {
        [[a, b, c], [a, c, d]]
    } else {
        [[a, b, d], [b, c, d]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Mode, Order, Profile};

    #[test]
    fn rows_span_the_gap() {
        let g = GapGeometry::symmetric(
            Profile::power(Order::integer(2), 1.0, 0.5),
            1e-2,
            1.0,
            4.0,
            Mode::Planar,
        );
        for x in [0.0, 0.1, 0.5] {
            assert_eq!(row_y(&g, x, 0, 8), g.lower_y(x));
            assert_eq!(row_y(&g, x, 8, 8), g.upper_y(x));
            assert_eq!(row_y(&g, x, 4, 8), 0.0);
            for k in 0..=8 {
                assert_eq!(row_y(&g, x, k, 8), -row_y(&g, x, 8 - k, 8));
            }
        }
    }

    #[test]
    fn column_spacing_follows_gap() {
        let g = GapGeometry::symmetric(
            Profile::power(Order::integer(2), 1.0, 0.5),
            1e-4,
            1.0,
            4.0,
            Mode::Planar,
        );
        let p = MeshParams::default();
        let xs = columns(&g, &p);
        assert_eq!(xs[0], 0.0);
        assert_eq!(*xs.last().unwrap(), 0.5);
        for w in xs.windows(2) {
            let target = p.neck_step * g.delta(0.5 * (w[0] + w[1])).sqrt();
            let h = w[1] - w[0];
            assert!(h / target > 0.8 && h / target < 1.25, "{h} vs {target}");
        }
    }

    #[test]
    fn split_prefers_short_diagonal() {
        let nodes = [[0.0, 0.0], [1.0, 0.0], [1.2, 1.0], [0.2, 1.0]];
        let t = split_quad(&nodes, [0, 1, 2, 3]);
        assert_eq!(t, [[0, 1, 3], [1, 2, 3]]);
        let nodes = [[0.0, 0.0], [1.0, 0.0], [0.8, 1.0], [-0.2, 1.0]];
        let t = split_quad(&nodes, [0, 1, 2, 3]);
        assert_eq!(t, [[0, 1, 2], [0, 2, 3]]);
    }
}
