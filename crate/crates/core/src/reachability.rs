//! Reachability analysis of the orthogonal subsystem.
//!
//! Everything the feasibility formulas need is derived here: the
//! controllability index `kappa`, the reachability matrices of `(A2, B2)`
//! and `(A2, I)`, the Moore-Penrose pseudoinverse of the control map (full
//! row rank case, `R' (R R')^{-1}`), and induced Euclidean norms.
//!
//! The matrices involved are small (state dimensions in the tens at most),
//! so the kernels favor robustness and reproducibility over speed: rank via
//! Gaussian elimination with partial pivoting and a relative pivot
//! threshold, the Gram solve via pivoted LU, and the spectral norm via
//! deterministically seeded power iteration.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::SystemModel;
use crate::rng::splitmix64;

/// Relative tolerance for the power-iteration stopping rule.
const POWER_ITERATION_TOL: f64 = 1e-10;
/// Iteration cap before power iteration reports non-convergence.
const POWER_ITERATION_MAX: usize = 10_000;
/// Fixed seed for the power-iteration start vector, so norms are
/// reproducible run to run.
const POWER_ITERATION_SEED: u64 = 0x5D1E_C7A1_0F1B_ED01;

/// `[A^{k-1} M | ... | A M | M]`, the k-step reachability stack of `(A, M)`.
///
/// The leftmost block carries the highest power, so the stack multiplies a
/// stacked sequence `[v_0; v_1; ...; v_{k-1}]` with the earliest entry
/// propagated the longest.
pub fn reachability_matrix(a: &DMatrix<f64>, m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    debug_assert_eq!(m.nrows(), n);
    let q = m.ncols();
    let mut r = DMatrix::<f64>::zeros(n, k * q);
    let mut power = m.clone();
    for i in (0..k).rev() {
        r.view_mut((0, i * q), (n, q)).copy_from(&power);
        if i > 0 {
            power = a * power;
        }
    }
    r
}

/// Numerical rank by Gaussian elimination with partial pivoting. Pivots with
/// magnitude at most `rel_tol` times the largest entry of the input count as
/// zero.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let (nrows, ncols) = m.shape();
    if nrows == 0 || ncols == 0 {
        return 0;
    }
    let scale = m.amax();
    if scale == 0.0 {
        return 0;
    }
    let threshold = rel_tol * scale;
    let mut a = m.clone_owned();
    let mut row = 0;
    for col in 0..ncols {
        if row == nrows {
            break;
        }
        let mut pivot_row = row;
        let mut pivot_abs = a[(row, col)].abs();
        for i in (row + 1)..nrows {
            let v = a[(i, col)].abs();
            if v > pivot_abs {
                pivot_abs = v;
                pivot_row = i;
            }
        }
        if pivot_abs <= threshold {
            continue;
        }
        a.swap_rows(row, pivot_row);
        for i in (row + 1)..nrows {
            let factor = a[(i, col)] / a[(row, col)];
            if factor != 0.0 {
                for j in col..ncols {
                    a[(i, j)] -= factor * a[(row, j)];
                }
            }
        }
        row += 1;
    }
    row
}

/// Smallest `k <= d2` for which the k-step reachability stack of `(A2, B2)`
/// has full row rank.
pub fn controllability_index(a2: &DMatrix<f64>, b2: &DMatrix<f64>, rank_tol: f64) -> Result<usize> {
    let d2 = a2.nrows();
    if d2 == 0 {
        return Err(Error::Dimension(
            "controllability index needs d2 >= 1".into(),
        ));
    }
    for k in 1..=d2 {
        let r = reachability_matrix(a2, b2, k);
        if rank(&r, rank_tol) == d2 {
            return Ok(k);
        }
    }
    Err(Error::NotReachable { d2 })
}

/// Pseudoinverse of a full-row-rank matrix: `R' (R R')^{-1}`, with the Gram
/// inverse applied through a pivoted LU solve rather than formed explicitly.
pub fn pinv_full_row_rank(r: &DMatrix<f64>, rank_tol: f64) -> Result<DMatrix<f64>> {
    let rows = r.nrows();
    if rows == 0 {
        return Ok(r.transpose());
    }
    let rk = rank(r, rank_tol);
    if rk < rows {
        return Err(Error::RankDeficient {
            rank: rk,
            expected: rows,
        });
    }
    let gram = r * r.transpose();
    // Solve G X = R, so X = G^{-1} R and the pseudoinverse is X'.
    let lu = gram.clone().lu();
    let deficient = Error::RankDeficient {
        rank: rk,
        expected: rows,
    };
    let mut x = lu.solve(r).ok_or(deficient.clone())?;
    // One step of iterative refinement: the Gram matrix squares the
    // conditioning of R, and the refined solve recovers most of the lost
    // digits.
    let residual_rhs = r - &gram * &x;
    if let Some(correction) = lu.solve(&residual_rhs) {
        x += correction;
    }
    let pinv = x.transpose();
    let residual = (r * &pinv - DMatrix::<f64>::identity(rows, rows)).amax();
    if residual > 1e-9 {
        // Full rank by the pivot test but too ill conditioned to certify a
        // right inverse.
        return Err(deficient);
    }
    Ok(pinv)
}

/// Largest singular value by power iteration on `M' M`, started from a
/// deterministically seeded direction and run to `1e-10` relative accuracy.
/// Exactly zero for zero (or empty) matrices.
///
/// Successive Rayleigh estimates converge geometrically, so the iteration
/// stops once the extrapolated remaining tail `diff * rho / (1 - rho)`
/// (with `rho` the observed step-to-step contraction) drops below the
/// tolerance, rather than on the raw step difference.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    let (nrows, ncols) = m.shape();
    if nrows == 0 || ncols == 0 || m.amax() == 0.0 {
        return Ok(0.0);
    }
    let mut v = seeded_direction(ncols, POWER_ITERATION_SEED);
    let mut estimate = (m * &v).norm();
    let mut prev_diff = f64::INFINITY;
    let mut best = estimate;
    for _ in 0..POWER_ITERATION_MAX {
        let w = m.transpose() * (m * &v);
        let wn = w.norm();
        if wn == 0.0 {
            // Start vector fell in the null space; reseed once.
            v = seeded_direction(ncols, splitmix64(POWER_ITERATION_SEED ^ 0xA5A5));
            continue;
        }
        v = w / wn;
        let next = (m * &v).norm();
        let diff = (next - estimate).abs();
        best = next;
        // Roundoff floor: degenerate spectra plateau immediately and the
        // step difference never contracts further.
        if diff <= 4.0 * f64::EPSILON * next {
            return Ok(next);
        }
        if prev_diff.is_finite() && prev_diff > 0.0 {
            let rho = (diff / prev_diff).min(1.0 - 1e-12);
            let tail = diff * rho / (1.0 - rho);
            if rho < 1.0 && tail <= POWER_ITERATION_TOL * next.max(f64::MIN_POSITIVE) {
                return Ok(next);
            }
        }
        prev_diff = diff;
        estimate = next;
    }
    Err(Error::NonConvergence {
        best,
        iterations: POWER_ITERATION_MAX,
    })
}

/// Deterministic pseudo-random unit vector.
fn seeded_direction(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = crate::rng::stream(seed, 0, crate::rng::Purpose::ProbeDirection);
    loop {
        let v = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
        let norm = v.norm();
        if norm > 1e-6 {
            return v / norm;
        }
    }
}

/// Reachability data of a validated model: the controllability index, the
/// control and noise maps over one replanning window, the pseudoinverse of
/// the control map, their induced norms, and `A2^kappa`.
///
/// Immutable once built; shared read-only by planners and simulators.
#[derive(Debug, Clone)]
pub struct ReachabilityData {
    /// Controllability index of `(A2, B2)`; the replanning period.
    pub kappa: usize,
    /// `R_kappa(A2, B2)`: maps a stacked kappa-step control sequence to its
    /// effect on the orthogonal state.
    pub control_map: DMatrix<f64>,
    /// Right inverse of `control_map`.
    pub control_map_pinv: DMatrix<f64>,
    /// `R_kappa(A2, I)`: maps stacked process noise over a window to its
    /// effect on the orthogonal state.
    pub noise_map: DMatrix<f64>,
    /// Induced Euclidean norm of `control_map`.
    pub control_map_norm: f64,
    /// Induced Euclidean norm of `control_map_pinv`.
    pub pinv_norm: f64,
    /// Induced Euclidean norm of `noise_map`.
    pub noise_map_norm: f64,
    /// `A2^kappa`, the free motion of the orthogonal state over one window.
    pub a2_pow_kappa: DMatrix<f64>,
    pub d2: usize,
    pub m: usize,
}

/// Compute [`ReachabilityData`] for a model, using the model's `rank_rel`
/// default pivot threshold.
pub fn build(model: &SystemModel) -> Result<ReachabilityData> {
    build_with_tol(
        model,
        crate::model::ValidationTolerances::default().rank_rel,
    )
}

pub fn build_with_tol(model: &SystemModel, rank_tol: f64) -> Result<ReachabilityData> {
    let d2 = model.d2();
    let m = model.m();
    if d2 == 0 {
        // Pure Schur-stable plant: nothing to steer. kappa = 1 keeps the
        // replanning schedule well defined; all maps are empty.
        return Ok(ReachabilityData {
            kappa: 1,
            control_map: DMatrix::zeros(0, m),
            control_map_pinv: DMatrix::zeros(m, 0),
            noise_map: DMatrix::zeros(0, 0),
            control_map_norm: 0.0,
            pinv_norm: 0.0,
            noise_map_norm: 0.0,
            a2_pow_kappa: DMatrix::zeros(0, 0),
            d2,
            m,
        });
    }
    let a2 = model.a2();
    let kappa = controllability_index(a2, model.b2(), rank_tol)?;
    let control_map = reachability_matrix(a2, model.b2(), kappa);
    let control_map_pinv = pinv_full_row_rank(&control_map, rank_tol)?;
    let identity = DMatrix::<f64>::identity(d2, d2);
    let noise_map = reachability_matrix(a2, &identity, kappa);
    let control_map_norm = spectral_norm(&control_map)?;
    let pinv_norm = spectral_norm(&control_map_pinv)?;
    let noise_map_norm = spectral_norm(&noise_map)?;
    let mut a2_pow_kappa = identity;
    for _ in 0..kappa {
        a2_pow_kappa = a2 * a2_pow_kappa;
    }
    Ok(ReachabilityData {
        kappa,
        control_map,
        control_map_pinv,
        noise_map,
        control_map_norm,
        pinv_norm,
        noise_map_norm,
        a2_pow_kappa,
        d2,
        m,
    })
}
