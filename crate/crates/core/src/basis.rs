//! Dirichlet Laplacian eigenbasis on a tensor-product box.
//!
//! Each axis `(0, L)` carries the orthonormal modes `sqrt(2/L) sin(j pi x / L)`,
//! `j = 1..=M`. Multi-dimensional modes are tensor products, stored in ascending
//! eigenvalue order with a lexicographic tie-break on the multi-index.
//!
//! The quadrature grid has `G` uniform intervals per axis and includes both
//! boundary nodes, so it carries `G + 1` nodes per axis. The composite
//! trapezoidal rule on that grid integrates `cos(m pi x / L)` exactly for
//! `0 < m < 2G`; with `G >= 4M` this covers every product of up to six sine
//! modes, which is what the quintic Galerkin source needs.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    edge_lengths: Vec<f64>,
}

impl Domain {
    pub fn new(edge_lengths: Vec<f64>) -> Result<Self> {
        if edge_lengths.is_empty() || edge_lengths.len() > 3 {
            return Err(Error::InvalidDomain(format!(
                "dimension must be 1, 2 or 3 (got {})",
                edge_lengths.len()
            )));
        }
        if let Some(l) = edge_lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidDomain(format!("edge length {l} is not positive")));
        }
        Ok(Domain { edge_lengths })
    }

    /// The cube `(0, L)^d`.
    pub fn cube(dimension: usize, length: f64) -> Result<Self> {
        Self::new(vec![length; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.edge_lengths.len()
    }

    pub fn edge_lengths(&self) -> &[f64] {
        &self.edge_lengths
    }

    pub fn volume(&self) -> f64 {
        self.edge_lengths.iter().product()
    }
}

/// Coefficients of a scalar field in the sorted eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField(pub Vec<f64>);

impl SpectralField {
    pub fn zeros(len: usize) -> Self {
        SpectralField(vec![0.0; len])
    }

    /// The unit vector selecting sorted mode `index` (0-based).
    pub fn unit(len: usize, index: usize) -> Self {
        let mut c = vec![0.0; len];
        c[index] = 1.0;
        SpectralField(c)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn dot(&self, other: &SpectralField) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn axpy(&self, alpha: f64, other: &SpectralField) -> SpectralField {
        SpectralField(self.0.iter().zip(&other.0).map(|(a, b)| a + alpha * b).collect())
    }

    pub fn scaled(&self, alpha: f64) -> SpectralField {
        SpectralField(self.0.iter().map(|a| alpha * a).collect())
    }
}

/// Samples of a scalar field on the quadrature grid, row-major with axis 0 outermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField(pub Vec<f64>);

impl GridField {
    pub fn zeros(len: usize) -> Self {
        GridField(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

#[derive(Debug, Clone)]
struct AxisTables {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `(G+1) x M`, row-major: `sine[i * M + j] = phi_{j+1}(x_i)`.
    sine: Vec<f64>,
    /// `(G+1) x M`: derivative of each 1D mode at each node.
    dsine: Vec<f64>,
    /// `M x (G+1)`: `sine^T W`, the discrete projection onto the modes.
    analysis: Vec<f64>,
    /// `M x (G+1)`: `dsine^T W`.
    danalysis: Vec<f64>,
}

impl AxisTables {
    fn new(length: f64, modes: usize, intervals: usize) -> Self {
        let n = intervals + 1;
        let h = length / intervals as f64;
        let nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let weights: Vec<f64> = (0..n)
            .map(|i| if i == 0 || i == intervals { 0.5 * h } else { h })
            .collect();
        let norm = (2.0 / length).sqrt();
        let mut sine = vec![0.0; n * modes];
        let mut dsine = vec![0.0; n * modes];
        for i in 0..n {
            for j in 0..modes {
                let k = (j + 1) as f64 * PI / length;
                // Integer-argument phase keeps the boundary zeros exact.
                let phase = ((i * (j + 1)) % (2 * intervals)) as f64 * PI / intervals as f64;
                sine[i * modes + j] = if i == 0 || i == intervals { 0.0 } else { norm * phase.sin() };
                dsine[i * modes + j] = norm * k * phase.cos();
            }
        }
        let mut analysis = vec![0.0; modes * n];
        let mut danalysis = vec![0.0; modes * n];
        for j in 0..modes {
            for i in 0..n {
                analysis[j * n + i] = sine[i * modes + j] * weights[i];
                danalysis[j * n + i] = dsine[i * modes + j] * weights[i];
            }
        }
        AxisTables { nodes, weights, sine, dsine, analysis, danalysis }
    }
}

/// Apply a dense `rows x cols` matrix along one axis of a row-major tensor.
fn contract_axis(data: &[f64], shape: &[usize], axis: usize, mat: &[f64], rows: usize) -> (Vec<f64>, Vec<usize>) {
    let cols = shape[axis];
    debug_assert_eq!(mat.len(), rows * cols);
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![0.0; outer * rows * inner];
    for o in 0..outer {
        let src = &data[o * cols * inner..(o + 1) * cols * inner];
        let dst = &mut out[o * rows * inner..(o + 1) * rows * inner];
        for r in 0..rows {
            let row = &mat[r * cols..(r + 1) * cols];
            let d = &mut dst[r * inner..(r + 1) * inner];
            for (c, &m) in row.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let s = &src[c * inner..(c + 1) * inner];
                for (di, si) in d.iter_mut().zip(s) {
                    *di += m * si;
                }
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = rows;
    (out, new_shape)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AxisOp {
    Sine,
    Derivative,
}

#[derive(Debug, Clone)]
pub struct Basis {
    domain: Domain,
    modes_per_axis: usize,
    grid_intervals: usize,
    /// 1-based per-axis mode numbers, in sorted order.
    multi_indices: Vec<Vec<usize>>,
    eigenvalues: Vec<f64>,
    /// Position of each sorted mode in the row-major `M^d` tensor.
    tensor_position: Vec<usize>,
    axes: Vec<AxisTables>,
    weights: Vec<f64>,
}

impl Basis {
    /// Eigenpairs of the Dirichlet Laplacian with `modes_per_axis` modes per axis and
    /// `grid_intervals` quadrature intervals per axis.
    pub fn new(domain: Domain, modes_per_axis: usize, grid_intervals: usize) -> Result<Self> {
        if modes_per_axis == 0 {
            return Err(Error::InvalidParameter("modes per axis must be at least 1".into()));
        }
        if grid_intervals < 4 * modes_per_axis {
            return Err(Error::AliasingGuard { modes: modes_per_axis, grid: grid_intervals });
        }
        let d = domain.dimension();
        let m = modes_per_axis;
        let count = m.pow(d as u32);
        let mut entries: Vec<(f64, Vec<usize>, usize)> = (0..count)
            .map(|pos| {
                let mut idx = vec![0; d];
                let mut rem = pos;
                for a in (0..d).rev() {
                    idx[a] = rem % m + 1;
                    rem /= m;
                }
                let lambda = idx
                    .iter()
                    .zip(domain.edge_lengths())
                    .map(|(&j, &l)| (j as f64 * PI / l).powi(2))
                    .sum();
                (lambda, idx, pos)
            })
            .collect();
        // Row-major position order is already lexicographic, so a stable sort on the
        // eigenvalue gives the lexicographic tie-break.
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));

        let axes: Vec<AxisTables> = domain
            .edge_lengths()
            .iter()
            .map(|&l| AxisTables::new(l, m, grid_intervals))
            .collect();
        let n = grid_intervals + 1;
        let mut weights = vec![1.0; n.pow(d as u32)];
        for (flat, w) in weights.iter_mut().enumerate() {
            let mut rem = flat;
            for a in (0..d).rev() {
                *w *= axes[a].weights[rem % n];
                rem /= n;
            }
        }
        Ok(Basis {
            domain,
            modes_per_axis: m,
            grid_intervals,
            eigenvalues: entries.iter().map(|e| e.0).collect(),
            multi_indices: entries.iter().map(|e| e.1.clone()).collect(),
            tensor_position: entries.iter().map(|e| e.2).collect(),
            axes,
            weights,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    pub fn modes_per_axis(&self) -> usize {
        self.modes_per_axis
    }

    pub fn grid_intervals(&self) -> usize {
        self.grid_intervals
    }

    pub fn mode_count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn multi_index(&self, mode: usize) -> &[usize] {
        &self.multi_indices[mode]
    }

    /// Index of the sorted mode with the given 1-based multi-index.
    pub fn mode_of(&self, multi_index: &[usize]) -> Option<usize> {
        self.multi_indices.iter().position(|m| m == multi_index)
    }

    /// Largest resolved frequency `sqrt(lambda_max)`.
    pub fn max_frequency(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0).sqrt()
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.grid_intervals + 1
    }

    pub fn grid_len(&self) -> usize {
        self.weights.len()
    }

    pub fn grid_shape(&self) -> Vec<usize> {
        vec![self.nodes_per_axis(); self.dimension()]
    }

    pub fn axis_nodes(&self, axis: usize) -> &[f64] {
        &self.axes[axis].nodes
    }

    pub fn axis_spacing(&self, axis: usize) -> f64 {
        self.domain.edge_lengths()[axis] / self.grid_intervals as f64
    }

    /// Tensor-product trapezoidal weights, one per grid node.
    pub fn quadrature_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Coordinates of grid node `flat`.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let n = self.nodes_per_axis();
        let d = self.dimension();
        let mut x = vec![0.0; d];
        let mut rem = flat;
        for a in (0..d).rev() {
            x[a] = self.axes[a].nodes[rem % n];
            rem /= n;
        }
        x
    }

    /// Samples `f` at every grid node.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> GridField {
        GridField((0..self.grid_len()).map(|i| f(&self.node(i))).collect())
    }

    /// Value of sorted mode `mode` at the point `x` (closed form).
    pub fn eigenfunction(&self, mode: usize, x: &[f64]) -> f64 {
        self.multi_indices[mode]
            .iter()
            .zip(self.domain.edge_lengths())
            .zip(x)
            .map(|((&j, &l), &xi)| (2.0 / l).sqrt() * (j as f64 * PI * xi / l).sin())
            .product()
    }

    /// Quadrature of a grid field.
    pub fn integrate(&self, f: &GridField) -> f64 {
        f.0.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    fn check_spectral(&self, c: &SpectralField) -> Result<()> {
        if c.len() != self.mode_count() {
            return Err(Error::LengthMismatch { expected: self.mode_count(), got: c.len() });
        }
        Ok(())
    }

    fn check_grid(&self, f: &GridField) -> Result<()> {
        if f.len() != self.grid_len() {
            return Err(Error::LengthMismatch { expected: self.grid_len(), got: f.len() });
        }
        Ok(())
    }

    fn synthesize(&self, c: &SpectralField, derivative_axis: Option<usize>) -> GridField {
        let d = self.dimension();
        let m = self.modes_per_axis;
        let mut data = vec![0.0; m.pow(d as u32)];
        for (k, &pos) in self.tensor_position.iter().enumerate() {
            data[pos] = c.0[k];
        }
        let mut shape = vec![m; d];
        let rows = self.nodes_per_axis();
        for a in 0..d {
            let op = if derivative_axis == Some(a) { AxisOp::Derivative } else { AxisOp::Sine };
            let mat = match op {
                AxisOp::Sine => &self.axes[a].sine,
                AxisOp::Derivative => &self.axes[a].dsine,
            };
            let (next, next_shape) = contract_axis(&data, &shape, a, mat, rows);
            data = next;
            shape = next_shape;
        }
        GridField(data)
    }

    fn analyze(&self, f: &GridField, derivative_axis: Option<usize>) -> SpectralField {
        let d = self.dimension();
        let m = self.modes_per_axis;
        let mut data = f.0.clone();
        let mut shape = self.grid_shape();
        for a in 0..d {
            let mat = if derivative_axis == Some(a) { &self.axes[a].danalysis } else { &self.axes[a].analysis };
            let (next, next_shape) = contract_axis(&data, &shape, a, mat, m);
            data = next;
            shape = next_shape;
        }
        SpectralField(self.tensor_position.iter().map(|&pos| data[pos]).collect())
    }

    /// Discrete projection `c_j = sum_i w_i f_i phi_j(x_i)`.
    pub fn to_spectral(&self, f: &GridField) -> Result<SpectralField> {
        self.check_grid(f)?;
        Ok(self.analyze(f, None))
    }

    /// Pointwise synthesis `sum_j c_j phi_j` on the grid.
    pub fn from_spectral(&self, c: &SpectralField) -> Result<GridField> {
        self.check_spectral(c)?;
        Ok(self.synthesize(c, None))
    }

    /// Coefficients of `Laplacian u`, i.e. `-lambda_j c_j`.
    pub fn apply_laplacian(&self, c: &SpectralField) -> Result<SpectralField> {
        self.check_spectral(c)?;
        Ok(SpectralField(c.0.iter().zip(&self.eigenvalues).map(|(x, l)| -l * x).collect()))
    }

    /// `d u / d x_axis` on the grid, by analytic differentiation of the sine synthesis.
    pub fn partial_on_grid(&self, c: &SpectralField, axis: usize) -> Result<GridField> {
        self.check_spectral(c)?;
        if axis >= self.dimension() {
            return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
        }
        Ok(self.synthesize(c, Some(axis)))
    }

    pub fn gradient_on_grid(&self, c: &SpectralField) -> Result<Vec<GridField>> {
        (0..self.dimension()).map(|a| self.partial_on_grid(c, a)).collect()
    }

    /// Transpose of [`Basis::partial_on_grid`] with respect to the quadrature inner
    /// product: returns `(g, d phi_j / d x_axis)_quad` for every mode.
    pub fn partial_adjoint(&self, g: &GridField, axis: usize) -> Result<SpectralField> {
        self.check_grid(g)?;
        if axis >= self.dimension() {
            return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
        }
        Ok(self.analyze(g, Some(axis)))
    }

    /// Galerkin multiplication: coefficients of `P_M (a u)` for a grid weight `a`.
    pub fn multiply(&self, a: &GridField, c: &SpectralField) -> Result<SpectralField> {
        self.check_grid(a)?;
        let u = self.from_spectral(c)?;
        let prod = GridField(u.0.iter().zip(&a.0).map(|(x, y)| x * y).collect());
        Ok(self.analyze(&prod, None))
    }

    pub fn l2_norm(&self, c: &SpectralField) -> f64 {
        c.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `||grad u||_{L^2} = sqrt(sum lambda_j c_j^2)`.
    pub fn h1_norm(&self, c: &SpectralField) -> f64 {
        c.0.iter().zip(&self.eigenvalues).map(|(x, l)| l * x * x).sum::<f64>().sqrt()
    }

    /// `||Laplacian u||_{L^2}`.
    pub fn h2_norm(&self, c: &SpectralField) -> f64 {
        c.0.iter().zip(&self.eigenvalues).map(|(x, l)| l * l * x * x).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn interval(l: f64, m: usize) -> Basis {
        Basis::new(Domain::new(vec![l]).unwrap(), m, 4 * m).unwrap()
    }

    #[test]
    fn sine_eigenvalues_on_pi_interval() {
        let b = interval(PI, 3);
        for (got, want) in b.eigenvalues().iter().zip([1.0, 4.0, 9.0]) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn square_eigenvalues_with_ties() {
        let b = Basis::new(Domain::cube(2, PI).unwrap(), 2, 8).unwrap();
        let want = [2.0, 5.0, 5.0, 8.0];
        for (got, w) in b.eigenvalues().iter().zip(want) {
            assert_relative_eq!(*got, w, epsilon = 1e-12);
        }
        // lexicographic tie-break
        assert_eq!(b.multi_index(1), &[1, 2]);
        assert_eq!(b.multi_index(2), &[2, 1]);
    }

    #[test]
    fn unit_interval_scaling() {
        let b = interval(1.0, 2);
        assert_relative_eq!(b.eigenvalues()[0], PI * PI, epsilon = 1e-12);
        assert_relative_eq!(b.eigenvalues()[1], 4.0 * PI * PI, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = Domain::new(vec![1.0]).unwrap();
        assert!(matches!(Basis::new(d.clone(), 4, 15), Err(Error::AliasingGuard { .. })));
        assert!(Basis::new(d, 0, 4).is_err());
        assert!(Domain::new(vec![1.0, -2.0]).is_err());
        assert!(Domain::new(vec![]).is_err());
        assert!(Domain::new(vec![1.0; 4]).is_err());
    }

    #[test]
    fn first_mode_projects_to_unit_vector() {
        let b = interval(PI, 6);
        let f = b.sample(|x| b.eigenfunction(0, x));
        let c = b.to_spectral(&f).unwrap();
        assert_relative_eq!(c.0[0], 1.0, epsilon = 1e-13);
        assert!(c.0[1..].iter().all(|x| x.abs() < 1e-13));
        let zero = b.to_spectral(&GridField::zeros(b.grid_len())).unwrap();
        assert!(zero.0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn superposition_projects_exactly() {
        let b = interval(PI, 6);
        let f = b.sample(|x| 2.0 * b.eigenfunction(0, x) + 3.0 * b.eigenfunction(1, x));
        let c = b.to_spectral(&f).unwrap();
        // Independent oracle: direct quadrature against each closed-form mode.
        let w = b.quadrature_weights();
        for j in 0..b.mode_count() {
            let oracle: f64 = (0..b.grid_len())
                .map(|i| w[i] * f.0[i] * b.eigenfunction(j, &b.node(i)))
                .sum();
            assert!((c.0[j] - oracle).abs() < 1e-12);
        }
        assert!((c.0[0] - 2.0).abs() < 1e-12 && (c.0[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn synthesis_of_unit_vector_samples_the_mode() {
        let b = Basis::new(Domain::new(vec![1.0, 2.0]).unwrap(), 3, 12).unwrap();
        for j in 0..b.mode_count() {
            let g = b.from_spectral(&SpectralField::unit(b.mode_count(), j)).unwrap();
            for i in 0..b.grid_len() {
                assert!((g.0[i] - b.eigenfunction(j, &b.node(i))).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn laplacian_examples() {
        let b = interval(PI, 4);
        let c = SpectralField(vec![2.0, 0.0, 1.0, 0.0]);
        let l = b.apply_laplacian(&c).unwrap();
        assert_eq!(l.0, vec![-2.0, 0.0, -9.0, 0.0]);
        assert!(b.apply_laplacian(&SpectralField::zeros(3)).is_err());
    }

    #[test]
    fn derivative_of_first_mode_is_cosine() {
        let b = interval(PI, 4);
        let g = b.partial_on_grid(&SpectralField::unit(4, 0), 0).unwrap();
        for (i, x) in b.axis_nodes(0).iter().enumerate() {
            assert!((g.0[i] - (2.0 / PI).sqrt() * x.cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn norms_on_simple_vectors() {
        let b = interval(PI, 2);
        let c = SpectralField(vec![3.0, 4.0]);
        assert_relative_eq!(b.l2_norm(&c), 5.0);
        assert_relative_eq!(b.h1_norm(&SpectralField::unit(2, 1)), 2.0, epsilon = 1e-14);
        assert_eq!(b.h1_norm(&SpectralField::zeros(2)), 0.0);
    }

    #[test]
    fn boundary_nodes_are_exact_zeros() {
        let b = interval(2.5, 5);
        let g = b.from_spectral(&SpectralField(vec![1.0; 5])).unwrap();
        assert_eq!(g.0[0], 0.0);
        assert_eq!(*g.0.last().unwrap(), 0.0);
    }
}
