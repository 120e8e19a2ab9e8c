//! Damping coefficients `a(x)`, the structural check `|grad a|^2 <= C_a a`, and the
//! Kelvin-Voigt matrix `K_ij = (a grad phi_i, grad phi_j)`.
//!
//! Localized presets are built as `a = eta * psi^2` with `psi` a smooth plateau,
//! so that `|grad a|^2 = 4 eta |grad psi|^2 a` and `C_a = 4 eta sup |grad psi|^2`
//! is known in closed form.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, GridField, SpectralField};
use crate::error::{Error, Result};
use crate::multipliers::{smooth_step, smooth_step_max_slope, smooth_step_prime};

/// Largest mode count for which the dense Kelvin-Voigt matrix is assembled.
pub const MAX_DENSE_MODES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum DampingPreset {
    Constant {
        alpha: f64,
    },
    SquaredBump {
        eta: f64,
        center: Vec<f64>,
        radius: f64,
    },
    /// Band `lo < x_axis < hi` across the whole box.
    Strip {
        eta: f64,
        axis: usize,
        lo: f64,
        hi: f64,
    },
    /// Disjoint cube bumps around `centers` whose supports total `measure_fraction |Omega|`.
    BumpUnion {
        eta: f64,
        centers: Vec<Vec<f64>>,
        measure_fraction: f64,
    },
    /// Raw samples on the quadrature grid (row-major) with an optional declared `C_a`.
    Grid {
        values: Vec<f64>,
        #[serde(default)]
        declared_constant: Option<f64>,
    },
}

impl DampingPreset {
    pub fn tag(&self) -> &'static str {
        match self {
            DampingPreset::Constant { .. } => "constant",
            DampingPreset::SquaredBump { .. } => "squared_bump",
            DampingPreset::Strip { .. } => "strip",
            DampingPreset::BumpUnion { .. } => "bump_union",
            DampingPreset::Grid { .. } => "grid",
        }
    }

    /// Same preset with the amplitude multiplied by `factor` (`grad a` scales with it).
    pub fn scaled(&self, factor: f64) -> DampingPreset {
        let mut p = self.clone();
        match &mut p {
            DampingPreset::Constant { alpha } => *alpha *= factor,
            DampingPreset::SquaredBump { eta, .. }
            | DampingPreset::Strip { eta, .. }
            | DampingPreset::BumpUnion { eta, .. } => *eta *= factor,
            DampingPreset::Grid { values, declared_constant } => {
                values.iter_mut().for_each(|v| *v *= factor);
                if let Some(c) = declared_constant {
                    *c *= factor;
                }
            }
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantProvenance {
    /// Closed form from the `eta psi^2` construction.
    Analytic,
    /// Supplied with a grid-loaded profile.
    Declared,
    /// Not known; the grid estimate is the only information.
    Unknown,
}

/// Smooth plateau on `(lo, hi)` with ramps of width `ramp` at both ends.
#[derive(Debug, Clone, Copy)]
struct Plateau {
    lo: f64,
    hi: f64,
    ramp: f64,
}

impl Plateau {
    fn value(&self, x: f64) -> f64 {
        smooth_step((x - self.lo) / self.ramp) * smooth_step((self.hi - x) / self.ramp)
    }

    fn derivative(&self, x: f64) -> f64 {
        let l = (x - self.lo) / self.ramp;
        let r = (self.hi - x) / self.ramp;
        (smooth_step_prime(l) * smooth_step(r) - smooth_step(l) * smooth_step_prime(r)) / self.ramp
    }

    fn max_slope(&self) -> f64 {
        smooth_step_max_slope() / self.ramp
    }
}

#[derive(Debug, Clone)]
pub struct DampingProfile {
    pub a_grid: GridField,
    pub grad_a_grid: Vec<GridField>,
    /// `C_a` in `|grad a|^2 <= C_a a`.
    pub structural_constant: f64,
    pub provenance: ConstantProvenance,
    pub preset_tag: String,
    /// Lebesgue measure of `{a > 0}`.
    pub support_measure: f64,
    /// Set when `a` is a constant; the commutator with any multiplier then vanishes.
    pub constant_value: Option<f64>,
}

fn bump_plateaus(center: &[f64], radius: f64) -> Vec<Plateau> {
    center
        .iter()
        .map(|&c| Plateau { lo: c - radius, hi: c + radius, ramp: 0.5 * radius })
        .collect()
}

fn check_inside(basis: &Basis, plateaus: &[Plateau], what: &str) -> Result<()> {
    for (axis, p) in plateaus.iter().enumerate() {
        let l = basis.domain().edge_lengths()[axis];
        if p.lo < -1e-12 || p.hi > l + 1e-12 || !(p.hi > p.lo) {
            return Err(Error::SupportOutsideDomain(format!(
                "{what}: axis {axis} support ({}, {}) not inside (0, {l})",
                p.lo, p.hi
            )));
        }
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be positive (got {v})")));
    }
    Ok(())
}

/// Build `a = eta (sum_b psi_b)^2` for product plateaus with disjoint supports.
fn squared_plateaus(basis: &Basis, eta: f64, bumps: &[Vec<Plateau>]) -> (GridField, Vec<GridField>) {
    let d = basis.dimension();
    let len = basis.grid_len();
    let mut a = vec![0.0; len];
    let mut grads = vec![vec![0.0; len]; d];
    for i in 0..len {
        let x = basis.node(i);
        let mut psi = 0.0;
        let mut dpsi = vec![0.0; d];
        for bump in bumps {
            let vals: Vec<f64> = bump.iter().zip(&x).map(|(p, &xi)| p.value(xi)).collect();
            let prod: f64 = vals.iter().product();
            if prod == 0.0 {
                continue;
            }
            psi += prod;
            for (axis, g) in dpsi.iter_mut().enumerate() {
                let mut term = bump[axis].derivative(x[axis]);
                for (b, v) in vals.iter().enumerate() {
                    if b != axis {
                        term *= v;
                    }
                }
                *g += term;
            }
        }
        a[i] = eta * psi * psi;
        for axis in 0..d {
            grads[axis][i] = 2.0 * eta * psi * dpsi[axis];
        }
    }
    (GridField(a), grads.into_iter().map(GridField).collect())
}

fn product_bound(plateaus: &[Plateau]) -> f64 {
    plateaus.iter().map(|p| p.max_slope().powi(2)).sum()
}

/// Sample a damping preset on the basis grid.
pub fn make_profile(preset: &DampingPreset, basis: &Basis) -> Result<DampingProfile> {
    let d = basis.dimension();
    let len = basis.grid_len();
    let volume = basis.domain().volume();
    let lengths = basis.domain().edge_lengths().to_vec();
    match preset {
        DampingPreset::Grid { values, declared_constant } => profile_from_grid(values.clone(), basis, *declared_constant),
        DampingPreset::Constant { alpha } => {
            if !(*alpha >= 0.0) || !alpha.is_finite() {
                return Err(Error::InvalidParameter(format!("alpha must be nonnegative (got {alpha})")));
            }
            Ok(DampingProfile {
                a_grid: GridField(vec![*alpha; len]),
                grad_a_grid: vec![GridField::zeros(len); d],
                structural_constant: 0.0,
                provenance: ConstantProvenance::Analytic,
                preset_tag: preset.tag().into(),
                support_measure: if *alpha > 0.0 { volume } else { 0.0 },
                constant_value: Some(*alpha),
            })
        }
        DampingPreset::SquaredBump { eta, center, radius } => {
            positive("eta", *eta)?;
            positive("radius", *radius)?;
            if center.len() != d {
                return Err(Error::InvalidParameter(format!("center has {} coordinates, domain has {d}", center.len())));
            }
            let plateaus = bump_plateaus(center, *radius);
            check_inside(basis, &plateaus, "squared_bump")?;
            let (a, grad) = squared_plateaus(basis, *eta, std::slice::from_ref(&plateaus));
            Ok(DampingProfile {
                a_grid: a,
                grad_a_grid: grad,
                structural_constant: 4.0 * eta * product_bound(&plateaus),
                provenance: ConstantProvenance::Analytic,
                preset_tag: preset.tag().into(),
                support_measure: (2.0 * radius).powi(d as i32),
                constant_value: None,
            })
        }
        DampingPreset::Strip { eta, axis, lo, hi } => {
            positive("eta", *eta)?;
            if *axis >= d {
                return Err(Error::InvalidParameter(format!("strip axis {axis} out of range")));
            }
            let width = hi - lo;
            positive("strip width", width)?;
            // Plateaus on the other axes cover the whole box (ramp never reached).
            let plateaus: Vec<Plateau> = (0..d)
                .map(|b| {
                    if b == *axis {
                        Plateau { lo: *lo, hi: *hi, ramp: 0.25 * width }
                    } else {
                        Plateau { lo: -1.0, hi: lengths[b] + 1.0, ramp: 0.5 }
                    }
                })
                .collect();
            check_inside(basis, &plateaus[*axis..*axis + 1], "strip")
                .map_err(|_| Error::SupportOutsideDomain(format!("strip ({lo}, {hi}) not inside (0, {})", lengths[*axis])))?;
            let (a, grad) = squared_plateaus(basis, *eta, std::slice::from_ref(&plateaus));
            Ok(DampingProfile {
                a_grid: a,
                grad_a_grid: grad,
                structural_constant: 4.0 * eta * plateaus[*axis].max_slope().powi(2),
                provenance: ConstantProvenance::Analytic,
                preset_tag: preset.tag().into(),
                support_measure: width / lengths[*axis] * volume,
                constant_value: None,
            })
        }
        DampingPreset::BumpUnion { eta, centers, measure_fraction } => {
            positive("eta", *eta)?;
            positive("measure_fraction", *measure_fraction)?;
            if centers.is_empty() {
                return Err(Error::InvalidParameter("bump_union needs at least one center".into()));
            }
            if *measure_fraction > 1.0 {
                return Err(Error::InvalidParameter("measure_fraction must not exceed 1".into()));
            }
            let per_bump = measure_fraction * volume / centers.len() as f64;
            // Shrink by one part in 1e12 so the reported measure never exceeds the target.
            let radius = 0.5 * per_bump.powf(1.0 / d as f64) * (1.0 - 1e-12);
            let mut bumps = Vec::with_capacity(centers.len());
            for c in centers {
                if c.len() != d {
                    return Err(Error::InvalidParameter(format!("center has {} coordinates, domain has {d}", c.len())));
                }
                let p = bump_plateaus(c, radius);
                check_inside(basis, &p, "bump_union")?;
                bumps.push(p);
            }
            for (i, ci) in centers.iter().enumerate() {
                for cj in &centers[i + 1..] {
                    if ci.iter().zip(cj).all(|(x, y)| (x - y).abs() < 2.0 * radius) {
                        return Err(Error::InvalidParameter(format!("bump_union supports around {ci:?} and {cj:?} overlap")));
                    }
                }
            }
            let (a, grad) = squared_plateaus(basis, *eta, &bumps);
            Ok(DampingProfile {
                a_grid: a,
                grad_a_grid: grad,
                structural_constant: 4.0 * eta * product_bound(&bumps[0]),
                provenance: ConstantProvenance::Analytic,
                preset_tag: preset.tag().into(),
                support_measure: centers.len() as f64 * (2.0 * radius).powi(d as i32),
                constant_value: None,
            })
        }
    }
}

/// Profile from raw grid samples (row-major, axis 0 outermost).
///
/// The gradient is taken by second-order finite differences. `declared_constant`
/// is the user's claimed `C_a`; without it the structural check has nothing to
/// compare against.
pub fn profile_from_grid(values: Vec<f64>, basis: &Basis, declared_constant: Option<f64>) -> Result<DampingProfile> {
    if values.len() != basis.grid_len() {
        return Err(Error::LengthMismatch { expected: basis.grid_len(), got: values.len() });
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("damping values must be finite and nonnegative (found {v})")));
    }
    let d = basis.dimension();
    let n = basis.nodes_per_axis();
    let mut grads = Vec::with_capacity(d);
    for axis in 0..d {
        let h = basis.axis_spacing(axis);
        let stride = n.pow((d - 1 - axis) as u32);
        let mut g = vec![0.0; values.len()];
        for (i, gi) in g.iter_mut().enumerate() {
            let pos = (i / stride) % n;
            *gi = if pos == 0 {
                (-3.0 * values[i] + 4.0 * values[i + stride] - values[i + 2 * stride]) / (2.0 * h)
            } else if pos == n - 1 {
                (3.0 * values[i] - 4.0 * values[i - stride] + values[i - 2 * stride]) / (2.0 * h)
            } else {
                (values[i + stride] - values[i - stride]) / (2.0 * h)
            };
        }
        grads.push(GridField(g));
    }
    let cell: f64 = (0..d).map(|a| basis.axis_spacing(a)).product();
    let measure = basis.quadrature_weights().iter().zip(&values).filter(|(_, v)| **v > 0.0).count() as f64 * cell;
    let first = values[0];
    let constant_value = values.iter().all(|v| *v == first).then_some(first);
    Ok(DampingProfile {
        a_grid: GridField(values),
        grad_a_grid: grads,
        structural_constant: declared_constant.unwrap_or(f64::NAN),
        provenance: if declared_constant.is_some() { ConstantProvenance::Declared } else { ConstantProvenance::Unknown },
        preset_tag: "grid".into(),
        support_measure: measure.min(basis.domain().volume()),
        constant_value,
    })
}

impl DampingProfile {
    /// Measure of `{a > 0}` by counting grid cells, for comparison with the analytic report.
    pub fn grid_support_measure(&self, basis: &Basis) -> f64 {
        let cell: f64 = (0..basis.dimension()).map(|a| basis.axis_spacing(a)).product();
        self.a_grid.0.iter().filter(|v| **v > 0.0).count() as f64 * cell
    }

    pub fn max_value(&self) -> f64 {
        self.a_grid.max_abs()
    }

    /// `max |grad a|` over the grid.
    pub fn max_gradient(&self) -> f64 {
        (0..self.a_grid.len())
            .map(|i| self.grad_a_grid.iter().map(|g| g.0[i] * g.0[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Default floor `1e-8 max a` for the structural check.
    pub fn default_floor(&self) -> f64 {
        1e-8 * self.max_value()
    }

    /// `a - const` when `a` is a constant, else `a`: multipliers commute with constants.
    pub fn variable_part(&self) -> GridField {
        match self.constant_value {
            Some(c) => GridField(self.a_grid.0.iter().map(|v| v - c).collect()),
            None => self.a_grid.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuralEstimate {
    /// `max |grad a|^2 / a` over `{a > floor}`.
    pub value: f64,
    pub witness: Vec<f64>,
    pub a_at_witness: f64,
    pub floor: f64,
    /// `value <= C_a (1 + 1e-2)`; false when no constant is known.
    pub compliant: bool,
}

pub fn structural_constant_estimate(profile: &DampingProfile, basis: &Basis, floor: f64) -> Result<StructuralEstimate> {
    if !(floor > 0.0) {
        return Err(Error::InvalidParameter(format!("floor must be positive (got {floor})")));
    }
    let mut best: Option<(f64, usize)> = None;
    for (i, &a) in profile.a_grid.0.iter().enumerate() {
        if a > floor {
            let g2: f64 = profile.grad_a_grid.iter().map(|g| g.0[i] * g.0[i]).sum();
            let r = g2 / a;
            if best.is_none_or(|(b, _)| r > b) {
                best = Some((r, i));
            }
        }
    }
    let (value, at) = match best {
        Some(b) => b,
        None if profile.constant_value.is_some() => (0.0, 0),
        None => return Err(Error::EmptySet(format!("no grid point with a > {floor}"))),
    };
    let bound = profile.structural_constant;
    let compliant = bound.is_finite() && value <= bound * (1.0 + 1e-2);
    Ok(StructuralEstimate {
        value,
        witness: basis.node(at),
        a_at_witness: profile.a_grid.0[at],
        floor,
        compliant,
    })
}

/// Dense symmetric `K_ij = (a grad phi_i, grad phi_j)_quad`.
#[derive(Debug, Clone)]
pub struct KelvinVoigtMatrix {
    matrix: DMatrix<f64>,
}

/// `K e_j` for the grid weight `a`.
fn kv_column(a: &GridField, basis: &Basis, j: usize) -> Vec<f64> {
    let n = basis.mode_count();
    let e = SpectralField::unit(n, j);
    let mut col = vec![0.0; n];
    for axis in 0..basis.dimension() {
        let dphi = basis.partial_on_grid(&e, axis).expect("sizes match");
        let weighted = GridField(dphi.0.iter().zip(&a.0).map(|(x, y)| x * y).collect());
        let proj = basis.partial_adjoint(&weighted, axis).expect("sizes match");
        for (c, p) in col.iter_mut().zip(&proj.0) {
            *c += p;
        }
    }
    col
}

pub fn assemble_kv_matrix(profile: &DampingProfile, basis: &Basis) -> Result<KelvinVoigtMatrix> {
    let n = basis.mode_count();
    if n > MAX_DENSE_MODES {
        return Err(Error::TooManyModes { modes: n, cap: MAX_DENSE_MODES });
    }
    if profile.a_grid.len() != basis.grid_len() {
        return Err(Error::LengthMismatch { expected: basis.grid_len(), got: profile.a_grid.len() });
    }
    let columns: Vec<Vec<f64>> = (0..n).into_par_iter().map(|j| kv_column(&profile.a_grid, basis, j)).collect();
    let mut m = DMatrix::from_fn(n, n, |i, j| columns[j][i]);
    // Average with the transpose; the two halves come from different reduction orders.
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    Ok(KelvinVoigtMatrix { matrix: m })
}

impl KelvinVoigtMatrix {
    pub fn zeros(n: usize) -> Self {
        KelvinVoigtMatrix { matrix: DMatrix::zeros(n, n) }
    }

    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        KelvinVoigtMatrix { matrix }
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, v: &SpectralField) -> Result<SpectralField> {
        if v.len() != self.size() {
            return Err(Error::LengthMismatch { expected: self.size(), got: v.len() });
        }
        let x = DVector::from_column_slice(&v.0);
        Ok(SpectralField((&self.matrix * x).as_slice().to_vec()))
    }

    /// `v^T K v`, the instantaneous Kelvin-Voigt dissipation.
    pub fn dissipation_quadratic_form(&self, v: &SpectralField) -> Result<f64> {
        let kv = self.apply(v)?;
        Ok(v.dot(&kv))
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Domain;
    use std::f64::consts::PI;

    fn line(m: usize) -> Basis {
        Basis::new(Domain::new(vec![PI]).unwrap(), m, 4 * m).unwrap()
    }

    #[test]
    fn constant_profile() {
        let b = line(3);
        let p = make_profile(&DampingPreset::Constant { alpha: 1.0 }, &b).unwrap();
        assert_eq!(p.structural_constant, 0.0);
        assert!(p.a_grid.0.iter().all(|&v| v == 1.0));
        let k = assemble_kv_matrix(&p, &b).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { ((i + 1) * (i + 1)) as f64 } else { 0.0 };
                assert!((k.matrix()[(i, j)] - want).abs() < 1e-12);
            }
        }
        let est = structural_constant_estimate(&p, &b, 1e-8).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(est.compliant);
    }

    #[test]
    fn zero_damping_gives_zero_matrix() {
        let b = line(4);
        let p = make_profile(&DampingPreset::Constant { alpha: 0.0 }, &b).unwrap();
        let k = assemble_kv_matrix(&p, &b).unwrap();
        assert_eq!(k.max_abs(), 0.0);
        assert_eq!(k.dissipation_quadratic_form(&SpectralField(vec![1.0, 2.0, 3.0, 4.0])).unwrap(), 0.0);
    }

    #[test]
    fn squared_bump_structural_ratio_matches_construction() {
        let b = line(32);
        let eta = 1.3;
        let p = make_profile(&DampingPreset::SquaredBump { eta, center: vec![1.5], radius: 0.6 }, &b).unwrap();
        let plateau = Plateau { lo: 0.9, hi: 2.1, ramp: 0.3 };
        for i in 0..b.grid_len() {
            let a = p.a_grid.0[i];
            if a > 1e-10 {
                let x = b.node(i)[0];
                let ratio = p.grad_a_grid[0].0[i].powi(2) / a;
                let want = 4.0 * eta * plateau.derivative(x).powi(2);
                assert!((ratio - want).abs() <= 1e-9 * (1.0 + want));
            }
        }
        let est = structural_constant_estimate(&p, &b, p.default_floor()).unwrap();
        assert!(est.value <= p.structural_constant * (1.0 + 1e-2));
        assert!(est.compliant);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let err = |g: usize| {
            let b = Basis::new(Domain::new(vec![PI]).unwrap(), 8, g).unwrap();
            let p = make_profile(&DampingPreset::SquaredBump { eta: 1.0, center: vec![1.5], radius: 0.8 }, &b).unwrap();
            let fd = profile_from_grid(p.a_grid.0.clone(), &b, None).unwrap();
            (0..b.grid_len())
                .map(|i| (fd.grad_a_grid[0].0[i] - p.grad_a_grid[0].0[i]).abs())
                .fold(0.0, f64::max)
                / p.max_gradient()
        };
        let (coarse, fine) = (err(128), err(512));
        assert!(fine < 1e-2, "{fine}");
        assert!(coarse / fine > 8.0, "{coarse} {fine}");
    }

    #[test]
    fn linear_ramp_is_noncompliant() {
        let b = Basis::new(Domain::new(vec![1.0]).unwrap(), 16, 64).unwrap();
        let values: Vec<f64> = b.axis_nodes(0).to_vec();
        let p = profile_from_grid(values, &b, Some(10.0)).unwrap();
        let est = structural_constant_estimate(&p, &b, 1e-6).unwrap();
        // |grad a|^2 / a = 1 / x, maximal at the first node above the floor.
        let h = b.axis_spacing(0);
        assert!((est.value - 1.0 / h).abs() < 1e-9 / h);
        assert!((est.witness[0] - h).abs() < 1e-15);
        assert!(!est.compliant);
        let none = profile_from_grid(vec![0.0; b.grid_len()], &b, None).unwrap();
        assert!(structural_constant_estimate(&none, &b, 1e-6).is_ok());
    }

    #[test]
    fn empty_set_is_an_error() {
        let b = line(8);
        let mut values = vec![0.0; b.grid_len()];
        values[5] = 1e-9;
        let p = profile_from_grid(values, &b, None).unwrap();
        assert!(matches!(structural_constant_estimate(&p, &b, 1e-6), Err(Error::EmptySet(_))));
        assert!(structural_constant_estimate(&p, &b, 0.0).is_err());
    }

    #[test]
    fn bump_union_measure_respects_target() {
        let b = Basis::new(Domain::cube(2, PI).unwrap(), 8, 128).unwrap();
        let target = 0.05;
        let preset = DampingPreset::BumpUnion {
            eta: 1.0,
            centers: vec![vec![0.8, 0.8], vec![2.3, 1.6], vec![1.0, 2.4]],
            measure_fraction: target,
        };
        let p = make_profile(&preset, &b).unwrap();
        let vol = b.domain().volume();
        assert!(p.support_measure <= target * vol);
        // Grid counting oracle: open cubes contain at most ceil(2r/h)^2 nodes each.
        let counted = p.grid_support_measure(&b);
        assert!((counted - p.support_measure).abs() < 0.3 * p.support_measure);
    }

    #[test]
    fn preset_errors() {
        let b = line(8);
        assert!(matches!(
            make_profile(&DampingPreset::SquaredBump { eta: 1.0, center: vec![0.2], radius: 0.5 }, &b),
            Err(Error::SupportOutsideDomain(_))
        ));
        assert!(make_profile(&DampingPreset::Strip { eta: 1.0, axis: 0, lo: 2.0, hi: 4.0 }, &b).is_err());
        assert!(make_profile(&DampingPreset::Strip { eta: 1.0, axis: 1, lo: 0.0, hi: 1.0 }, &b).is_err());
        assert!(make_profile(
            &DampingPreset::BumpUnion { eta: 1.0, centers: vec![vec![1.0], vec![1.01]], measure_fraction: 0.2 },
            &b
        )
        .is_err());
    }

    #[test]
    fn strip_measure_and_constant() {
        let b = line(16);
        let p = make_profile(&DampingPreset::Strip { eta: 2.0, axis: 0, lo: 0.0, hi: 0.2 * PI }, &b).unwrap();
        assert!((p.support_measure - 0.2 * PI).abs() < 1e-12);
        let est = structural_constant_estimate(&p, &b, p.default_floor()).unwrap();
        assert!(est.compliant, "{} vs {}", est.value, p.structural_constant);
    }

    #[test]
    fn dissipation_matches_grid_quadrature() {
        let b = line(16);
        let p = make_profile(&DampingPreset::SquaredBump { eta: 1.0, center: vec![1.2], radius: 0.7 }, &b).unwrap();
        let k = assemble_kv_matrix(&p, &b).unwrap();
        let v = SpectralField((0..16).map(|j| ((j * 37 % 11) as f64 - 5.0) / (1.0 + j as f64)).collect());
        let dv = b.partial_on_grid(&v, 0).unwrap();
        let oracle: f64 = (0..b.grid_len()).map(|i| b.quadrature_weights()[i] * p.a_grid.0[i] * dv.0[i].powi(2)).sum();
        let got = k.dissipation_quadratic_form(&v).unwrap();
        assert!((got - oracle).abs() < 1e-10 * oracle.max(1.0));
        assert!(got >= 0.0);
    }
}
