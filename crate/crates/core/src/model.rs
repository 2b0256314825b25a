//! Block-structured plant model.
//!
//! The plant is supplied already split into a Schur-stable part `A1` and an
//! orthogonal part `A2`, with matching input maps `B1`, `B2`:
//!
//! ```text
//! x1' = A1 x1 + B1 u~ + w1
//! x2' = A2 x2 + B2 u~ + w2
//! ```
//!
//! `A2` is assembled from declared blocks (+1, -1, or a 2x2 rotation), which
//! makes it orthogonal by construction. Computing this decomposition from a
//! raw `(A, B)` pair is a non-goal: the similarity transform to real Jordan
//! form is numerically ill-posed, so callers provide the block form directly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One diagonal block of the orthogonal part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrthBlock {
    /// 1x1 block with value +1.
    PlusOne,
    /// 1x1 block with value -1.
    MinusOne,
    /// 2x2 rotation by `theta` radians, `theta` in (0, 2pi) excluding pi.
    Rotation { theta: f64 },
}

impl OrthBlock {
    /// Side length of the realized block.
    pub fn dim(&self) -> usize {
        match self {
            OrthBlock::PlusOne | OrthBlock::MinusOne => 1,
            OrthBlock::Rotation { .. } => 2,
        }
    }
}

/// Assemble the orthogonal part from its block list, in listed order.
///
/// Rejects rotation angles outside (0, 2pi) and the degenerate angles 0 and
/// pi, which realize `+/-I` and must be declared as `+/-1` blocks.
pub fn build_orthogonal(blocks: &[OrthBlock]) -> Result<DMatrix<f64>> {
    let d2: usize = blocks.iter().map(OrthBlock::dim).sum();
    let mut a2 = DMatrix::<f64>::zeros(d2, d2);
    let mut at = 0;
    for block in blocks {
        match *block {
            OrthBlock::PlusOne => a2[(at, at)] = 1.0,
            OrthBlock::MinusOne => a2[(at, at)] = -1.0,
            OrthBlock::Rotation { theta } => {
                if !theta.is_finite()
                    || theta <= 0.0
                    || theta >= 2.0 * std::f64::consts::PI
                    || theta == std::f64::consts::PI
                {
                    return Err(Error::DegenerateRotation { theta });
                }
                let (s, c) = theta.sin_cos();
                a2[(at, at)] = c;
                a2[(at, at + 1)] = -s;
                a2[(at + 1, at)] = s;
                a2[(at + 1, at + 1)] = c;
            }
        }
        at += block.dim();
    }
    Ok(a2)
}

/// Partitioned plant. Immutable after construction; all operations on it are
/// pure functions, so it can be shared freely across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    d1: usize,
    d2: usize,
    m: usize,
    a1: DMatrix<f64>,
    blocks: Vec<OrthBlock>,
    a2: DMatrix<f64>,
    b1: DMatrix<f64>,
    b2: DMatrix<f64>,
}

impl SystemModel {
    /// Build a model from its parts, checking structural consistency and
    /// realizing the orthogonal part. Numerical checks (Schur stability,
    /// orthogonality residual, reachability) live in [`validate`].
    pub fn new(
        a1: DMatrix<f64>,
        blocks: Vec<OrthBlock>,
        b1: DMatrix<f64>,
        b2: DMatrix<f64>,
    ) -> Result<Self> {
        let d1 = a1.nrows();
        if a1.ncols() != d1 {
            return Err(Error::Dimension(format!(
                "A1 must be square, got {}x{}",
                a1.nrows(),
                a1.ncols()
            )));
        }
        let d2: usize = blocks.iter().map(OrthBlock::dim).sum();
        if d1 + d2 == 0 {
            return Err(Error::Dimension("total state dimension is zero".into()));
        }
        if b1.nrows() != d1 {
            return Err(Error::Dimension(format!(
                "B1 has {} rows, expected d1 = {}",
                b1.nrows(),
                d1
            )));
        }
        if b2.nrows() != d2 {
            return Err(Error::Dimension(format!(
                "B2 has {} rows, expected d2 = {}",
                b2.nrows(),
                d2
            )));
        }
        // The input dimension comes from whichever input map is nonempty.
        let m = if d1 > 0 && d2 > 0 {
            if b1.ncols() != b2.ncols() {
                return Err(Error::Dimension(format!(
                    "B1 has {} columns but B2 has {}",
                    b1.ncols(),
                    b2.ncols()
                )));
            }
            b1.ncols()
        } else if d1 > 0 {
            b1.ncols()
        } else {
            b2.ncols()
        };
        if m == 0 {
            return Err(Error::Dimension("input dimension m must be >= 1".into()));
        }
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        if !finite(&a1) || !finite(&b1) || !finite(&b2) {
            return Err(Error::Scenario("matrix entries must be finite".into()));
        }
        let a2 = build_orthogonal(&blocks)?;
        Ok(Self {
            d1,
            d2,
            m,
            a1,
            blocks,
            a2,
            b1,
            b2,
        })
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    /// Total state dimension.
    pub fn d(&self) -> usize {
        self.d1 + self.d2
    }

    /// Input dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn a1(&self) -> &DMatrix<f64> {
        &self.a1
    }

    pub fn a2(&self) -> &DMatrix<f64> {
        &self.a2
    }

    pub fn b1(&self) -> &DMatrix<f64> {
        &self.b1
    }

    pub fn b2(&self) -> &DMatrix<f64> {
        &self.b2
    }

    pub fn blocks(&self) -> &[OrthBlock] {
        &self.blocks
    }

    /// Assemble the full pair `(A, B)` with `A = blockdiag(A1, A2)` and
    /// `B = [B1; B2]`.
    pub fn compose(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let d = self.d();
        let mut a = DMatrix::<f64>::zeros(d, d);
        a.view_mut((0, 0), (self.d1, self.d1)).copy_from(&self.a1);
        a.view_mut((self.d1, self.d1), (self.d2, self.d2))
            .copy_from(&self.a2);
        let mut b = DMatrix::<f64>::zeros(d, self.m);
        b.view_mut((0, 0), (self.d1, self.m)).copy_from(&self.b1);
        b.view_mut((self.d1, 0), (self.d2, self.m))
            .copy_from(&self.b2);
        (a, b)
    }
}

/// Partitioned state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub x1: DVector<f64>,
    pub x2: DVector<f64>,
}

impl State {
    pub fn new(x1: DVector<f64>, x2: DVector<f64>) -> Self {
        Self { x1, x2 }
    }

    /// Zero state matching the model dimensions.
    pub fn zeros(model: &SystemModel) -> Self {
        Self {
            x1: DVector::zeros(model.d1()),
            x2: DVector::zeros(model.d2()),
        }
    }

    /// Split a full-dimension vector into its partitioned parts.
    pub fn from_concat(model: &SystemModel, x: &DVector<f64>) -> Result<Self> {
        if x.len() != model.d() {
            return Err(Error::Dimension(format!(
                "state has length {}, expected {}",
                x.len(),
                model.d()
            )));
        }
        Ok(Self {
            x1: x.rows(0, model.d1()).into_owned(),
            x2: x.rows(model.d1(), model.d2()).into_owned(),
        })
    }

    pub fn norm_sq(&self) -> f64 {
        self.x1.norm_squared() + self.x2.norm_squared()
    }
}

/// Tolerances used by [`validate`].
#[derive(Debug, Clone, Copy)]
pub struct ValidationTolerances {
    /// Frobenius bound on `A2' A2 - I`.
    pub orthogonality: f64,
    /// Norm level under which `A1^n` counts as decayed.
    pub schur_norm: f64,
    /// Largest power tried in the decay test.
    pub schur_max_power: usize,
    /// Relative pivot threshold for rank decisions.
    pub rank_rel: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        Self {
            orthogonality: 1e-12,
            schur_norm: 1e-6,
            schur_max_power: 1024,
            rank_rel: 1e-9,
        }
    }
}

/// Outcome of [`validate`], with the measured residuals. A failing report is
/// data, not an error; callers decide what to do with it.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// Frobenius norm of `A2' A2 - I`.
    pub orthogonality_residual: f64,
    pub orthogonality_ok: bool,
    /// Smallest `n` with `||A1^n|| < schur_norm`, when one exists.
    pub schur_power: Option<usize>,
    /// The norm reached at `schur_power` (or at the last power tried).
    pub schur_norm_reached: f64,
    pub schur_ok: bool,
    /// Rank of the d2-step reachability matrix of `(A2, B2)`.
    pub reach_rank: usize,
    /// Controllability index, when the subsystem is reachable.
    pub kappa: Option<usize>,
    pub reachable: bool,
    pub pass: bool,
}

/// Check the model against the standing hypotheses: `A2` orthogonal within
/// tolerance, `A1` Schur stable (geometric norm decay, the property actually
/// used downstream, instead of an eigenvalue solve), and `(A2, B2)` reachable
/// within `d2` steps.
pub fn validate(model: &SystemModel, tol: &ValidationTolerances) -> ValidationReport {
    let d2 = model.d2();

    let orthogonality_residual = if d2 == 0 {
        0.0
    } else {
        (model.a2().transpose() * model.a2() - DMatrix::<f64>::identity(d2, d2)).norm()
    };
    let orthogonality_ok = orthogonality_residual <= tol.orthogonality;

    let (schur_power, schur_norm_reached) = schur_decay(model.a1(), tol);
    let schur_ok = model.d1() == 0 || schur_power.is_some();

    let (reach_rank, kappa) = if d2 == 0 {
        // Degenerate pure-stable plant: nothing to steer. The replanning
        // period is taken as 1 so downstream schedules stay well defined.
        (0, Some(1))
    } else {
        let r_full = crate::reachability::reachability_matrix(model.a2(), model.b2(), d2);
        let rank = crate::reachability::rank(&r_full, tol.rank_rel);
        let kappa =
            crate::reachability::controllability_index(model.a2(), model.b2(), tol.rank_rel).ok();
        (rank, kappa)
    };
    let reachable = d2 == 0 || (reach_rank == d2 && kappa.is_some());

    ValidationReport {
        orthogonality_residual,
        orthogonality_ok,
        schur_power,
        schur_norm_reached,
        schur_ok,
        reach_rank,
        kappa,
        reachable,
        pass: orthogonality_ok && schur_ok && reachable,
    }
}

/// Smallest `n <= max_power` with `||A1^n||_F` below the threshold, together
/// with the norm reached there (or at the last power tried).
fn schur_decay(a1: &DMatrix<f64>, tol: &ValidationTolerances) -> (Option<usize>, f64) {
    let d1 = a1.nrows();
    if d1 == 0 {
        return (Some(0), 0.0);
    }
    let mut power = a1.clone();
    let mut norm = power.norm();
    if norm < tol.schur_norm {
        return (Some(1), norm);
    }
    for n in 2..=tol.schur_max_power {
        power = a1 * power;
        norm = power.norm();
        if !norm.is_finite() {
            return (None, norm);
        }
        if norm < tol.schur_norm {
            return (Some(n), norm);
        }
    }
    (None, norm)
}
