//! One-dimensional node placement.

/// Places nodes on `[a, b]` so that each cell holds the same share of
/// `∫ density`. The cell count is that integral rounded, at least 1, and
/// both endpoints are included.
pub fn equidistribute(a: f64, b: f64, density: impl Fn(f64) -> f64) -> Vec<f64> {
    assert!(b > a, "empty interval [{a}, {b}]");
    let table = cumulative(a, b, &density);
    let total = table.last().unwrap().1;
    let n = (total.round() as usize).max(1);
    let mut out = Vec::with_capacity(n + 1);
    out.push(a);
    let mut j = 1;
    for k in 1..n {
        let target = total * k as f64 / n as f64;
        while table[j].1 < target {
            j += 1;
        }
        let (x0, c0) = table[j - 1];
        let (x1, c1) = table[j];
        let t = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
        out.push(x0 + t * (x1 - x0));
    }
    out.push(b);
    out
}

/// `(x, ∫_a^x density)` on an adaptively bisected grid.
fn cumulative(a: f64, b: f64, density: &impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    const SEED: usize = 64;
    const MAX_DEPTH: u32 = 40;
    let mut table = vec![(a, 0.0)];
    let mut acc = 0.0;
    let min_w = 1e-13 * (b - a);
    for i in 0..SEED {
        let x0 = a + (b - a) * i as f64 / SEED as f64;
        let x1 = if i + 1 == SEED {
            b
        } else {
            a + (b - a) * (i + 1) as f64 / SEED as f64
        };
        let mut stack = vec![(x0, x1, density(x0), density(x1), 0u32)];
        while let Some((l, r, dl, dr, depth)) = stack.pop() {
            let smooth = (dl - dr).abs() <= 0.02 * dl.max(dr);
            if smooth || r - l <= min_w || depth >= MAX_DEPTH {
                acc += 0.5 * (dl + dr) * (r - l);
                table.push((r, acc));
            } else {
                let m = 0.5 * (l + r);
                let dm = density(m);
                // Right half pushed first so the left one is processed next.
                stack.push((m, r, dm, dr, depth + 1));
                stack.push((l, m, dl, dm, depth + 1));
            }
        }
    }
    table
}

/// Mesh size growing linearly with distance from the neck ends.
#[derive(Clone, Debug)]
pub struct SizeField {
    /// Vertical stitch segments `(x, y_lo, y_hi)`.
    pub stitches: Vec<(f64, f64, f64)>,
    pub h0: f64,
    pub growth: f64,
}

impl SizeField {
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        self.stitches
            .iter()
            .map(|&(x, lo, hi)| {
                let dy = if p[1] < lo {
                    lo - p[1]
                } else if p[1] > hi {
                    p[1] - hi
                } else {
                    0.0
                };
                (p[0] - x).hypot(dy)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn size(&self, p: [f64; 2], hmax: f64) -> f64 {
        (self.h0 + self.growth * self.distance(p)).min(hmax)
    }
}

/// Parameters `t ∈ (0, 1)` of interior nodes along a parametric curve
/// spaced by `size`.
pub fn curve_parameters(curve: impl Fn(f64) -> [f64; 2], size: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let dt = 1e-7;
    let speed = |t: f64| {
        let (a, b) = ((t - dt).max(0.0), (t + dt).min(1.0));
        let (p, q) = (curve(a), curve(b));
        (q[0] - p[0]).hypot(q[1] - p[1]) / (b - a)
    };
    let ts = equidistribute(0.0, 1.0, |t| speed(t) / size(curve(t)));
    ts[1..ts.len() - 1].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_density_gives_uniform_cells() {
        let xs = equidistribute(0.0, 2.0, |_| 5.0);
        assert_eq!(xs.len(), 11);
        for (i, x) in xs.iter().enumerate() {
            assert!((x - 0.2 * i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn cells_hold_equal_mass() {
        // density 1/(ε + x) has antiderivative ln(ε + x).
        let eps = 1e-4;
        let xs = equidistribute(0.0, 1.0, |x| 10.0 / (eps + x));
        let mass: Vec<f64> = xs
            .windows(2)
            .map(|w| 10.0 * ((eps + w[1]).ln() - (eps + w[0]).ln()))
            .collect();
        let total = 10.0 * ((1.0 + eps) / eps).ln();
        assert_eq!(mass.len(), total.round() as usize);
        for m in mass {
            assert!((m - 1.0).abs() < 0.02, "{m}");
        }
    }

    #[test]
    fn tiny_integral_still_one_cell() {
        assert_eq!(equidistribute(0.0, 1.0, |_| 0.01), vec![0.0, 1.0]);
    }

    #[test]
    fn size_field_grows_away_from_stitch() {
        let f = SizeField {
            stitches: vec![(1.0, -0.5, 0.5)],
            h0: 0.1,
            growth: 0.3,
        };
        assert_eq!(f.size([1.0, 0.2], 1.0), 0.1);
        assert!((f.size([1.0, 1.5], 1.0) - 0.4).abs() < 1e-15);
        assert_eq!(f.size([10.0, 0.0], 0.5), 0.5);
    }
}
