//! Orthogonal matching pursuit and frame reconstruction from measurements.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::dictionary::Dictionary;
use crate::error::{domain, Result};
use crate::firmware::SensingMatrix;
use crate::frontend::MeasurementVector;
use crate::tactile::{CircuitParams, GridGeometry, TactileFrame};

/// Residual norm below which OMP stops adding atoms.
pub const RESIDUAL_FLOOR: f64 = 1e-10;

/// Relative size under which a new column is treated as lying in the span of
/// the already selected ones.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseCode {
    /// Selected atom indices in selection order.
    pub indices: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// Target sparsity the code was computed for.
    pub sparsity: usize,
}

impl SparseCode {
    pub fn empty(sparsity: usize) -> Self {
        Self {
            indices: Vec::new(),
            coefficients: Vec::new(),
            sparsity,
        }
    }

    pub fn support_len(&self) -> usize {
        self.indices.len()
    }

    pub fn coefficient(&self, atom: usize) -> Option<f64> {
        self.indices
            .iter()
            .position(|&i| i == atom)
            .map(|p| self.coefficients[p])
    }

    /// Dense K-vector.
    pub fn to_dense(&self, k: usize) -> DVector<f64> {
        let mut v = DVector::zeros(k);
        for (&i, &c) in self.indices.iter().zip(&self.coefficients) {
            v[i] = c;
        }
        v
    }
}

/// Iteration trace of one OMP run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OmpReport {
    /// Residual norm before the first iteration and after each accepted atom.
    pub residual_norms: Vec<f64>,
    /// Columns rejected because they were numerically dependent on the support.
    pub dropped: Vec<usize>,
}

impl OmpReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_norms.last().copied().unwrap_or(0.0)
    }
}

/// `round(m / 4)` with halves rounded up, never below one.
pub fn sparsity_target(m: usize) -> Result<usize> {
    if m == 0 {
        return Err(domain("sparsity target needs at least one measurement"));
    }
    Ok(((m + 2) / 4).max(1))
}

pub fn omp(a: &DMatrix<f64>, y: &DVector<f64>, s: usize) -> Result<SparseCode> {
    omp_with_report(a, y, s).map(|(code, _)| code)
}

/// Greedy OMP on the columns of `a`.
///
/// Selection uses correlations divided by column norms. The least-squares fit
/// on the support is kept as an incrementally grown QR factorization with
/// re-orthogonalized Gram-Schmidt, so the residual is the exact projection of
/// `y` onto the orthogonal complement of the selected columns.
pub fn omp_with_report(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    s: usize,
) -> Result<(SparseCode, OmpReport)> {
    if s == 0 {
        return Err(domain("sparsity must be at least one"));
    }
    let (m, k) = a.shape();
    if y.len() != m {
        return Err(domain(format!(
            "measurement vector has {} entries, matrix has {m} rows",
            y.len()
        )));
    }

    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let mut eligible: Vec<bool> = norms.iter().map(|&n| n > 0.0 && n.is_finite()).collect();

    let mut support: Vec<usize> = Vec::with_capacity(s);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(s);
    // Column j of the triangular factor, stored per selected atom.
    let mut r_cols: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut qty: Vec<f64> = Vec::with_capacity(s);
    let mut residual = y.clone();
    let mut report = OmpReport {
        residual_norms: vec![residual.norm()],
        dropped: Vec::new(),
    };

    while support.len() < s && report.final_residual() >= RESIDUAL_FLOOR {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..k {
            if !eligible[j] {
                continue;
            }
            let score = (a.column(j).dot(&residual) / norms[j]).abs();
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((j, score));
            }
        }
        let Some((j, score)) = best else { break };
        if score == 0.0 {
            break;
        }
        eligible[j] = false;

        let mut v: DVector<f64> = a.column(j).into_owned();
        let mut coeffs = vec![0.0; basis.len()];
        for _ in 0..2 {
            for (q, c) in basis.iter().zip(coeffs.iter_mut()) {
                let h = q.dot(&v);
                v.axpy(-h, q, 1.0);
                *c += h;
            }
        }
        let diag = v.norm();
        if !(diag > RANK_TOLERANCE * norms[j]) {
            report.dropped.push(j);
            continue;
        }
        v /= diag;
        coeffs.push(diag);
        r_cols.push(coeffs);
        qty.push(v.dot(y));
        let h = v.dot(&residual);
        residual.axpy(-h, &v, 1.0);
        basis.push(v);
        support.push(j);
        report.residual_norms.push(residual.norm());
    }

    // Back substitution R c = Q^T y.
    let p = support.len();
    let mut coefficients = vec![0.0; p];
    for i in (0..p).rev() {
        let mut acc = qty[i];
        for jj in (i + 1)..p {
            acc -= r_cols[jj][i] * coefficients[jj];
        }
        coefficients[i] = acc / r_cols[i][i];
    }
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(crate::Error::Numerical("non-finite OMP coefficients".into()));
    }

    Ok((
        SparseCode {
            indices: support,
            coefficients,
            sparsity: s,
        },
        report,
    ))
}

/// A decoded frame together with how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub frame: TactileFrame,
    pub code: SparseCode,
    pub m_used: usize,
    /// `||y - Phi Psi alpha||`, volts.
    pub residual_norm: f64,
    /// Pixels whose decoded conductance was negative and clamped to zero.
    pub clamped_pixels: usize,
    pub dropped_columns: Vec<usize>,
}

fn check_dims(phi: &SensingMatrix, psi: &Dictionary, y: &MeasurementVector) -> Result<()> {
    if phi.m() != y.len() {
        return Err(domain(format!(
            "sensing matrix has {} rows for {} measurements",
            phi.m(),
            y.len()
        )));
    }
    if phi.n() != psi.n() {
        return Err(domain(format!(
            "sensing matrix has {} columns, dictionary atoms {} entries",
            phi.n(),
            psi.n()
        )));
    }
    if y.rows().start != phi.row_offset() {
        return Err(domain(format!(
            "measurements start at stream row {}, sensing matrix at {}",
            y.rows().start,
            phi.row_offset()
        )));
    }
    Ok(())
}

/// Recovers the frame observed through `phi`: OMP on `Phi Psi` with
/// `S = sparsity_target(M)`, then `x = Psi alpha` and `C_i = -x_i / R_f`.
pub fn reconstruct(
    phi: &SensingMatrix,
    psi: &Dictionary,
    y: &MeasurementVector,
    geometry: &GridGeometry,
    circuit: &CircuitParams,
) -> Result<Reconstruction> {
    check_dims(phi, psi, y)?;
    let product = phi.weights() * psi.atoms();
    decode(&product, psi, y, geometry, circuit)
}

fn decode(
    product: &DMatrix<f64>,
    psi: &Dictionary,
    y: &MeasurementVector,
    geometry: &GridGeometry,
    circuit: &CircuitParams,
) -> Result<Reconstruction> {
    if geometry.len() != psi.n() {
        return Err(domain("geometry does not match dictionary atom length"));
    }
    let m = y.len();
    let s = sparsity_target(m)?;
    let yv = DVector::from_column_slice(y.values());
    let (code, report) = omp_with_report(product, &yv, s)?;

    let mut x = DVector::zeros(psi.n());
    for (&i, &c) in code.indices.iter().zip(&code.coefficients) {
        x.axpy(c, &psi.atoms().column(i), 1.0);
    }
    let mut fitted = DVector::zeros(m);
    for (&i, &c) in code.indices.iter().zip(&code.coefficients) {
        fitted.axpy(c, &product.column(i), 1.0);
    }
    let residual_norm = (&yv - fitted).norm();

    let mut clamped_pixels = 0;
    let conductance: Vec<f64> = x
        .iter()
        .map(|&xi| {
            let c = -xi / circuit.feedback_resistance;
            if c < 0.0 {
                clamped_pixels += 1;
                0.0
            } else {
                c
            }
        })
        .collect();
    let t = y.timestamps().iter().sum::<f64>() / m as f64;
    Ok(Reconstruction {
        frame: TactileFrame::new(*geometry, conductance, t)?,
        code,
        m_used: m,
        residual_norm,
        clamped_pixels,
        dropped_columns: report.dropped,
    })
}

/// Reconstructs from growing prefixes of one measurement stream.
pub fn adaptive_reconstruct(
    phi_full: &SensingMatrix,
    psi: &Dictionary,
    y_stream: &MeasurementVector,
    schedule: &[usize],
    geometry: &GridGeometry,
    circuit: &CircuitParams,
) -> Result<Vec<Reconstruction>> {
    if schedule.is_empty() {
        return Err(domain("empty prefix schedule"));
    }
    if schedule[0] == 0 || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain(format!(
            "schedule must be strictly increasing and positive: {schedule:?}"
        )));
    }
    let last = *schedule.last().unwrap();
    if last > y_stream.len() || last > phi_full.m() {
        return Err(domain(format!(
            "schedule asks for {last} samples, stream has {}",
            y_stream.len().min(phi_full.m())
        )));
    }
    let phi = phi_full.prefix(last)?;
    let y_all = y_stream.prefix(last)?;
    check_dims(&phi, psi, &y_all)?;
    let product = phi.weights() * psi.atoms();
    schedule
        .par_iter()
        .map(|&mp| {
            let rows = product.rows(0, mp).into_owned();
            decode(&rows, psi, &y_all.prefix(mp)?, geometry, circuit)
        })
        .collect()
}
