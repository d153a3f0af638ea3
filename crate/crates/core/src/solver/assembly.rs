//! P1 stiffness assembly.

use rayon::prelude::*;

use crate::geometry::Mode;
use crate::mesh::Mesh;

/// Compressed sparse row matrix with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Sums duplicate entries. Equal keys are summed in input order, so the
    /// result only depends on the order of `triplets`.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Csr {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).find(|&(j, _)| j == i).map_or(0.0, |(_, v)| v))
            .collect()
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Quadrature weight of a triangle: 1 when planar, `2πr` at the centroid
/// when axisymmetric, so integrals are true three-dimensional values.
pub fn weight(mode: Mode, centroid: [f64; 2]) -> f64 {
    match mode {
        Mode::Planar => 1.0,
        Mode::Axisymmetric => 2.0 * std::f64::consts::PI * centroid[0],
    }
}

/// Gradients of the three barycentric basis functions and the area.
pub fn basis_gradients(c: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]);
    let g = [
        [(c[1][1] - c[2][1]) / det, (c[2][0] - c[1][0]) / det],
        [(c[2][1] - c[0][1]) / det, (c[0][0] - c[2][0]) / det],
        [(c[0][1] - c[1][1]) / det, (c[1][0] - c[0][0]) / det],
    ];
    (g, 0.5 * det)
}

/// Element stiffness `w |T| ∇φᵢ·∇φⱼ`.
pub fn element_matrix(mesh: &Mesh, t: usize) -> [[f64; 3]; 3] {
    let (g, area) = basis_gradients(mesh.corners(t));
    let w = weight(mesh.mode, mesh.centroid(t)) * area;
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    k
}

/// Global stiffness matrix. Element matrices are computed in parallel and
/// accumulated in triangle order, so the result is bit-identical across
/// thread counts.
pub fn stiffness(mesh: &Mesh) -> Csr {
    let elems: Vec<[[f64; 3]; 3]> = (0..mesh.tri_count())
        .into_par_iter()
        .map(|t| element_matrix(mesh, t))
        .collect();
    let mut trip = Vec::with_capacity(9 * elems.len());
    for (t, k) in elems.iter().enumerate() {
        let tri = mesh.triangles[t];
        for i in 0..3 {
            for j in 0..3 {
                trip.push((tri[i], tri[j], k[i][j]));
            }
        }
    }
    Csr::from_triplets(mesh.node_count(), trip)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let a = Csr::from_triplets(2, vec![(1, 0, 1.0), (0, 0, 2.0), (1, 0, 3.0), (0, 1, -1.0)]);
        assert_eq!(a.row_ptr, vec![0, 2, 3]);
        assert_eq!(a.cols, vec![0, 1, 0]);
        assert_eq!(a.vals, vec![2.0, -1.0, 4.0]);
        assert_eq!(a.matvec(&[1.0, 2.0]), vec![0.0, 4.0]);
        assert_eq!(a.diag(), vec![2.0, 0.0]);
    }

    #[test]
    fn reference_element() {
        let (g, area) = basis_gradients([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(area, 0.5);
        assert_eq!(g, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
    }
}
