//! Linear precoders for rate splitting.
//!
//! RS uses zero-forcing private precoders plus one common direction. HRS
//! adds an outer tier: each group is confined to the null space of every
//! other group's channel (block diagonalization), and the inner tier applies
//! RS on the resulting effective channel of the group.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dependent_rows, full_right_singular, numerical_rank, rank_tolerance, rows_of};
use crate::ratesplit::Grouping;

/// Relative gap under which the top singular values count as tied.
const DEGENERATE_REL_TOL: f64 = 1e-9;
/// Ridge applied on rank failure, relative to `trace(HH^T) / K`.
pub const FALLBACK_RIDGE_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommonStrategy {
    /// Dominant right-singular vector of the channel.
    #[default]
    Principal,
    /// Normalized sum of the unit-norm user channels.
    EqualGainMrt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsPrecoders {
    /// N x K, one unit-norm column per user (zero for users with no channel).
    pub private: DMatrix<f64>,
    pub common: DVector<f64>,
    /// The private precoder needed the fallback ridge.
    pub regularized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HrsPrecoders {
    /// Per group, an N x r_g matrix with orthonormal columns.
    pub outer: Vec<DMatrix<f64>>,
    /// Per group, an r_g x K_g matrix with unit-norm columns.
    pub inner: Vec<DMatrix<f64>>,
    pub inner_common: Vec<DVector<f64>>,
    pub outer_common: DVector<f64>,
    /// Groups whose outer precoder used the regularized fallback.
    pub regularized_outer: Vec<usize>,
    /// Groups whose inner private precoder used the fallback ridge.
    pub regularized_inner: Vec<usize>,
}

impl HrsPrecoders {
    pub fn is_regularized(&self) -> bool {
        !self.regularized_outer.is_empty() || !self.regularized_inner.is_empty()
    }
}

fn normalize_columns(w: &mut DMatrix<f64>) {
    for mut col in w.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
}

/// Zero-forcing directions for the rows of `h`.
///
/// With `ridge = 0` the pseudo-inverse is formed from a QR factorization of
/// `h^T`, so that `h_k^T w_j` vanishes to working precision for `j != k`.
/// A positive ridge gives the regularized inverse `h^T (h h^T + ridge I)^-1`.
pub fn zf_precoder(h: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    let (k, n) = h.shape();
    if k > n {
        return Err(Error::Infeasible { users: k, elements: n });
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::validation("ridge", format!("{ridge} must be >= 0")));
    }
    let mut w = if ridge == 0.0 {
        // Row scaling only rescales the normalized columns, so work on unit rows.
        let mut unit_rows = h.clone();
        for mut row in unit_rows.row_iter_mut() {
            let m = row.amax();
            if m > 0.0 {
                row /= m;
                let n = row.norm();
                row /= n;
            }
        }
        let rank = numerical_rank(&unit_rows);
        if rank < k {
            let mut users = dependent_rows(&unit_rows);
            if users.is_empty() {
                users.push(k - 1);
            }
            return Err(Error::RankDeficient { rank, users });
        }
        let qr = unit_rows.transpose().qr();
        let r_t = qr.r().transpose();
        let inv = r_t
            .solve_lower_triangular(&DMatrix::identity(k, k))
            .ok_or(Error::RankDeficient { rank, users: vec![] })?;
        qr.q() * inv
    } else {
        let gram = h * h.transpose() + DMatrix::identity(k, k) * ridge;
        let inv = gram
            .cholesky()
            .ok_or_else(|| Error::validation("ridge", "regularized Gram matrix is not positive definite"))?
            .inverse();
        h.transpose() * inv
    };
    normalize_columns(&mut w);
    Ok(w)
}

/// ZF with the scale-invariant ridge fallback on rank failure.
///
/// All-zero rows (unserved users) are left out of the inversion and get
/// all-zero columns. Returns the precoder and whether the fallback was used.
pub fn zf_precoder_with_fallback(h: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    let (k, n) = h.shape();
    let active: Vec<usize> = (0..k).filter(|r| h.row(*r).iter().any(|v| *v != 0.0)).collect();
    let mut w = DMatrix::zeros(n, k);
    if active.is_empty() {
        return Ok((w, false));
    }
    let mut sub = rows_of(h, &active);
    sub /= sub.amax();
    let (sub_w, fallback) = match zf_precoder(&sub, 0.0) {
        Ok(w) => (w, false),
        Err(Error::RankDeficient { .. }) => {
            let trace = sub.iter().map(|v| v * v).sum::<f64>();
            (zf_precoder(&sub, FALLBACK_RIDGE_SCALE * trace / active.len() as f64)?, true)
        }
        Err(e) => return Err(e),
    };
    for (j, &user) in active.iter().enumerate() {
        w.set_column(user, &sub_w.column(j));
    }
    Ok((w, fallback))
}

/// Unit-norm precoder for a message that every row of `h` must decode.
pub fn common_precoder(h: &DMatrix<f64>, strategy: CommonStrategy) -> Result<DVector<f64>> {
    if h.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroChannel);
    }
    let row_sum: DVector<f64> = h.row_sum().transpose();
    let mut w = match strategy {
        CommonStrategy::Principal => {
            let (s, v) = full_right_singular(h);
            let top = s[0];
            let tied = s.iter().take_while(|&&x| x >= top * (1.0 - DEGENERATE_REL_TOL)).count();
            if tied == 1 {
                v.column(0).into_owned()
            } else {
                // Tied top directions: project the summed channel onto the tied subspace.
                let sub = v.columns(0, tied);
                let proj = sub * (sub.transpose() * &row_sum);
                if proj.norm() > top * DEGENERATE_REL_TOL {
                    proj
                } else {
                    v.column(0).into_owned()
                }
            }
        }
        CommonStrategy::EqualGainMrt => {
            let mut acc = DVector::zeros(h.ncols());
            for row in h.row_iter() {
                let n = row.norm();
                if n > 0.0 {
                    acc += row.transpose() / n;
                }
            }
            acc
        }
    };
    let n = w.norm();
    if n == 0.0 {
        return Err(Error::ZeroChannel);
    }
    w /= n;
    let alignment = row_sum.dot(&w);
    if alignment < 0.0 || (alignment == 0.0 && first_nonzero(&w) < 0.0) {
        w = -w;
    }
    Ok(w)
}

fn first_nonzero(v: &DVector<f64>) -> f64 {
    v.iter().copied().find(|x| *x != 0.0).unwrap_or(0.0)
}

pub fn rs_precoders(h: &DMatrix<f64>, strategy: CommonStrategy) -> Result<RsPrecoders> {
    let (private, regularized) = zf_precoder_with_fallback(h)?;
    Ok(RsPrecoders {
        private,
        common: common_precoder(h, strategy)?,
        regularized,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterPrecoders {
    pub blocks: Vec<DMatrix<f64>>,
    /// Groups that fell back to the regularized construction.
    pub regularized: Vec<usize>,
}

/// Outer precoder of each group: the null space of the other groups'
/// channels, truncated to the `K_g + 1` directions that keep the most of
/// the group's own channel energy.
///
/// When the null space cannot host the group's `K_g` streams, the group
/// falls back to a ridge-regularized construction (maximizing own energy
/// against leakage plus a ridge on the stacked Gram matrix) and is listed
/// in `regularized`.
pub fn block_diagonal_precoder(h: &DMatrix<f64>, grouping: &Grouping) -> Result<OuterPrecoders> {
    let n = h.ncols();
    if grouping.user_count() != h.nrows() {
        return Err(Error::validation(
            "grouping",
            format!("{} users grouped but channel has {} rows", grouping.user_count(), h.nrows()),
        ));
    }
    let mut blocks = Vec::with_capacity(grouping.group_count());
    let mut regularized = Vec::new();
    for g in 0..grouping.group_count() {
        let members = grouping.members(g);
        let others: Vec<usize> = (0..h.nrows()).filter(|k| grouping.group_of(*k) != g).collect();
        let own = rows_of(h, &members);
        let want = members.len() + 1;

        let null_basis = if others.is_empty() {
            DMatrix::identity(n, n)
        } else {
            let other = rows_of(h, &others);
            let (s, v) = full_right_singular(&other);
            let tol = rank_tolerance(s[0], other.nrows(), n);
            let rank = s.iter().filter(|&&x| x > tol).count();
            v.columns(rank, n - rank).into_owned()
        };

        if null_basis.ncols() >= members.len() && null_basis.ncols() > 0 {
            let projected = &own * &null_basis;
            let (_, v) = full_right_singular(&projected);
            let r = want.min(null_basis.ncols());
            blocks.push(&null_basis * v.columns(0, r));
        } else {
            regularized.push(g);
            blocks.push(regularized_outer(h, &own, &others, want.min(n)));
        }
    }
    Ok(OuterPrecoders { blocks, regularized })
}

fn regularized_outer(h: &DMatrix<f64>, own: &DMatrix<f64>, others: &[usize], r: usize) -> DMatrix<f64> {
    let n = h.ncols();
    let other = rows_of(h, others);
    let leak = other.transpose() * &other;
    let trace = leak.trace();
    let ridge = if trace > 0.0 {
        FALLBACK_RIDGE_SCALE * trace / others.len() as f64
    } else {
        1.0
    };
    let m = leak + DMatrix::identity(n, n) * ridge;
    let eig = SymmetricEigen::new(m);
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x.max(f64::MIN_POSITIVE).sqrt()))
        * eig.eigenvectors.transpose();
    let target = &inv_sqrt * own.transpose() * own * &inv_sqrt;
    let target = (&target + target.transpose()) * 0.5;
    let eig = SymmetricEigen::new(target);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let dirs = DMatrix::from_fn(n, r, |i, j| eig.eigenvectors[(i, order[j])]);
    (inv_sqrt * dirs).qr().q()
}

/// Two-tier HRS precoders: block-diagonal outer tier, ZF and common
/// directions on each group's effective channel, and a common direction
/// over the full channel for the outer common message.
pub fn hrs_precoders(h: &DMatrix<f64>, grouping: &Grouping, strategy: CommonStrategy) -> Result<HrsPrecoders> {
    let outer = block_diagonal_precoder(h, grouping)?;
    let mut inner = Vec::with_capacity(grouping.group_count());
    let mut inner_common = Vec::with_capacity(grouping.group_count());
    let mut regularized_inner = Vec::new();
    for (g, b) in outer.blocks.iter().enumerate() {
        let effective = rows_of(h, &grouping.members(g)) * b;
        let (w, fallback) = zf_precoder_with_fallback(&effective)?;
        if fallback {
            regularized_inner.push(g);
        }
        inner.push(w);
        inner_common.push(match common_precoder(&effective, strategy) {
            Ok(c) => c,
            // Nobody in the group is reachable: the stream carries nothing.
            Err(Error::ZeroChannel) => DVector::zeros(b.ncols()),
            Err(e) => return Err(e),
        });
    }
    Ok(HrsPrecoders {
        outer: outer.blocks,
        inner,
        inner_common,
        outer_common: common_precoder(h, strategy)?,
        regularized_outer: outer.regularized,
        regularized_inner,
    })
}
