//! Equality-constrained least squares
//! `min ½(α‖Bc − g‖² + β‖Hc‖²)` subject to `Kc = b` and optionally `ρ·c = t`.
//!
//! The hard constraints are eliminated block by block: columns coupled by
//! rows of `K` form independent blocks, each reduced with an SVD to a
//! particular solution plus a null-space basis `Z`. The remaining problem
//! in the null-space coordinates is a sparse symmetric system factored once
//! and reused for every right-hand side.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use faer::prelude::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Relative singular-value cutoff for the constraint blocks.
const RANK_TOL: f64 = 1e-10;
/// Weight ratio of the fallback penalty formulation.
pub const FALLBACK_LAMBDA: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditioningFlag {
    Ok,
    Regularized,
    RankDeficient,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub coeffs: Vec<f64>,
    /// `‖Kc − b‖₂`.
    pub constraint_residual: f64,
    /// `|ρ·c − t|` when a mean row is present.
    pub mean_residual: f64,
    pub objective: f64,
    pub iterations: usize,
    pub conditioning_flag: ConditioningFlag,
    /// Relative residual of the reduced stationarity system (0 when regularised).
    pub kkt_residual: f64,
}

/// Default constraint tolerance `max(1e-8‖b‖, 1e-12)`.
pub fn default_eps1(b: &[f64]) -> f64 {
    (1e-8 * norm(b)).max(1e-12)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Block {
    cols: Vec<usize>,
    rows: Vec<usize>,
    /// `n × r` pseudo-inverse of the block of `K`.
    pinv: DMatrix<f64>,
    /// `n × k` orthonormal null-space basis.
    z: DMatrix<f64>,
    offset: usize,
}

// One factor lives per block and is never moved, so the size gap is harmless.
#[allow(clippy::large_enum_variant)]
enum Factor {
    Llt(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

impl Factor {
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        match self {
            Factor::Llt(f) => f.solve_in_place(x.as_mut()),
            Factor::Lu(f) => f.solve_in_place(x.as_mut()),
        }
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }
}

/// Symmetric sparse matrix built from triplets, used for residual checks.
struct SymSystem {
    n: usize,
    triplets: Vec<Triplet<usize, usize, f64>>,
}

impl SymSystem {
    fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for t in &self.triplets {
            y[t.row] += t.val * x[t.col];
        }
        y
    }

    fn factor(&self, indefinite: bool) -> Option<Factor> {
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &self.triplets)
            .ok()?;
        if indefinite {
            m.sp_lu().ok().map(Factor::Lu)
        } else {
            m.sp_cholesky(Side::Lower).ok().map(Factor::Llt)
        }
    }

    fn max_diag(&self) -> f64 {
        self.triplets
            .iter()
            .filter(|t| t.row == t.col)
            .fold(0.0f64, |a, t| a.max(t.val.abs()))
    }
}

/// A factored constrained least-squares problem; `K`, `B`, `H`, the mean
/// row and the weights are fixed, right-hand sides vary per solve.
pub struct ConstrainedLsq {
    n: usize,
    k: CsrMatrix,
    b: CsrMatrix,
    h: CsrMatrix,
    mean_row: Option<Vec<f64>>,
    alpha: f64,
    beta: f64,
    blocks: Vec<Block>,
    nred: usize,
    rank_deficient: bool,
    /// Reduced mean row `Zᵀρ`, pre-scaled.
    mean_red: Option<(Vec<f64>, f64)>,
    system: SymSystem,
    primary: Option<Factor>,
    fallback: OnceLock<Option<(Factor, SymSystem)>>,
}

impl std::fmt::Debug for ConstrainedLsq {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstrainedLsq")
            .field("n", &self.n)
            .field("reduced_dim", &self.nred)
            .field("blocks", &self.blocks.len())
            .field("rank_deficient", &self.rank_deficient)
            .field("factored", &self.primary.is_some())
            .finish()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

impl ConstrainedLsq {
    pub fn factor(
        k: CsrMatrix,
        b: CsrMatrix,
        h: CsrMatrix,
        mean_row: Option<Vec<f64>>,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let n = k.ncols();
        if b.ncols() != n || h.ncols() != n || mean_row.as_ref().is_some_and(|r| r.len() != n) {
            return Err(Error::Dimension(
                "constraint and objective matrices differ in column count".into(),
            ));
        }
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::Config(
                "weights alpha and beta must be positive".into(),
            ));
        }
        for (name, m) in [("K", &k), ("B", &b), ("H", &h)] {
            if (0..m.nrows()).any(|i| m.row(i).1.iter().any(|v| !v.is_finite())) {
                return Err(Error::NonFinite(format!(
                    "matrix {name} has non-finite entries"
                )));
            }
        }
        if mean_row
            .as_ref()
            .is_some_and(|r| r.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite("mean row has non-finite entries".into()));
        }

        let (blocks, col_block, nred, rank_deficient) = build_blocks(&k, n);
        let system = reduced_system(&b, &h, alpha, beta, &blocks, &col_block, nred);

        let mean_red = mean_row.as_ref().map(|rho| {
            let mut a = vec![0.0; nred];
            for blk in &blocks {
                let local =
                    DVector::from_iterator(blk.cols.len(), blk.cols.iter().map(|&c| rho[c]));
                let red = blk.z.tr_mul(&local);
                a[blk.offset..blk.offset + red.len()].copy_from_slice(red.as_slice());
            }
            let an = norm(&a);
            let scale = if an > 0.0 {
                (system.max_diag().max(f64::MIN_POSITIVE)).sqrt() / an
            } else {
                1.0
            };
            (a, scale)
        });

        let mut full = SymSystem {
            n: nred + usize::from(mean_red.is_some()),
            triplets: system.triplets.clone(),
        };
        if let Some((a, s)) = &mean_red {
            for (i, &v) in a.iter().enumerate() {
                if v != 0.0 {
                    full.triplets.push(Triplet::new(i, nred, s * v));
                    full.triplets.push(Triplet::new(nred, i, s * v));
                }
            }
        }
        let primary = if full.n == 0 {
            None
        } else {
            full.factor(mean_red.is_some())
        };

        Ok(ConstrainedLsq {
            n,
            k,
            b,
            h,
            mean_row,
            alpha,
            beta,
            blocks,
            nred,
            rank_deficient,
            mean_red,
            system: full,
            primary,
            fallback: OnceLock::new(),
        })
    }

    pub fn ncols(&self) -> usize {
        self.n
    }

    /// Dimension of the null space of the hard constraints.
    pub fn reduced_dim(&self) -> usize {
        self.nred
    }

    pub fn objective(&self, c: &[f64], g: &[f64]) -> f64 {
        let bc = self.b.mul_vec(c);
        let hc = self.h.mul_vec(c);
        let rb: f64 = bc.iter().zip(g).map(|(x, y)| (x - y).powi(2)).sum();
        let rh: f64 = hc.iter().map(|x| x * x).sum();
        0.5 * (self.alpha * rb + self.beta * rh)
    }

    /// Solves for right-hand sides `b` (hard), `g` (soft) and the mean target.
    pub fn solve(&self, b: &[f64], g: &[f64], mean_target: f64, eps1: f64) -> Result<SolveReport> {
        if b.len() != self.k.nrows() || g.len() != self.b.nrows() {
            return Err(Error::Dimension(format!(
                "right-hand sides have lengths {}/{}, expected {}/{}",
                b.len(),
                g.len(),
                self.k.nrows(),
                self.b.nrows()
            )));
        }
        if b.iter().chain(g).any(|v| !v.is_finite()) || !mean_target.is_finite() {
            return Err(Error::NonFinite("right-hand side".into()));
        }

        let primary = if self.system.n == 0 {
            Some((self.particular(b), 0.0))
        } else {
            self.primary
                .as_ref()
                .and_then(|f| self.solve_reduced(f, b, g, mean_target))
        };
        let (c, flag, kkt, iterations) = match primary {
            Some((c, kkt)) if norm(&self.constraint_residual_vec(&c, b)) <= eps1 => {
                let flag = if self.rank_deficient {
                    ConditioningFlag::RankDeficient
                } else {
                    ConditioningFlag::Ok
                };
                (c, flag, kkt, 1)
            }
            _ => {
                let c = self.solve_regularized(b, g, mean_target)?;
                (c, ConditioningFlag::Regularized, 0.0, 2)
            }
        };
        let constraint_residual = norm(&self.constraint_residual_vec(&c, b));
        let mean_residual = self
            .mean_row
            .as_ref()
            .map_or(0.0, |r| (dot(r, &c) - mean_target).abs());
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("least-squares solution".into()));
        }
        if constraint_residual > eps1 {
            return Err(Error::Infeasible {
                residual: constraint_residual,
                tolerance: eps1,
            });
        }
        let objective = self.objective(&c, g);
        Ok(SolveReport {
            coeffs: c,
            constraint_residual,
            mean_residual,
            objective,
            iterations,
            conditioning_flag: flag,
            kkt_residual: kkt,
        })
    }

    fn constraint_residual_vec(&self, c: &[f64], b: &[f64]) -> Vec<f64> {
        self.k
            .mul_vec(c)
            .iter()
            .zip(b)
            .map(|(x, y)| x - y)
            .collect()
    }

    fn particular(&self, b: &[f64]) -> Vec<f64> {
        let mut cp = vec![0.0; self.n];
        for blk in &self.blocks {
            if blk.rows.is_empty() {
                continue;
            }
            let rb = DVector::from_iterator(blk.rows.len(), blk.rows.iter().map(|&r| b[r]));
            let x = &blk.pinv * rb;
            for (&c, v) in blk.cols.iter().zip(x.iter()) {
                cp[c] = *v;
            }
        }
        cp
    }

    fn solve_reduced(
        &self,
        f: &Factor,
        b: &[f64],
        g: &[f64],
        mean_target: f64,
    ) -> Option<(Vec<f64>, f64)> {
        let cp = self.particular(b);
        // w = α Bᵀ(B c_p − g) + β Hᵀ H c_p
        let rb: Vec<f64> = self
            .b
            .mul_vec(&cp)
            .iter()
            .zip(g)
            .map(|(x, y)| self.alpha * (x - y))
            .collect();
        let rh: Vec<f64> = self.h.mul_vec(&cp).iter().map(|x| self.beta * x).collect();
        let mut w = self.b.transpose_mul_vec(&rb);
        for (wi, hi) in w.iter_mut().zip(self.h.transpose_mul_vec(&rh)) {
            *wi += hi;
        }
        let mut rhs = vec![0.0; self.system.n];
        for blk in &self.blocks {
            let local = DVector::from_iterator(blk.cols.len(), blk.cols.iter().map(|&c| w[c]));
            let red = blk.z.tr_mul(&local);
            for (i, v) in red.iter().enumerate() {
                rhs[blk.offset + i] = -v;
            }
        }
        if let (Some((_, s)), Some(rho)) = (&self.mean_red, &self.mean_row) {
            rhs[self.nred] = s * (mean_target - dot(rho, &cp));
        }
        let y = f.solve(&rhs);
        if y.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let my = self.system.mul(&y);
        let res: Vec<f64> = my.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        let scale = norm(&rhs)
            .max(self.system.max_diag() * norm(&y))
            .max(f64::MIN_POSITIVE);
        let kkt = norm(&res) / scale;
        if kkt > 1e-6 {
            return None;
        }
        let mut c = cp;
        for blk in &self.blocks {
            let yb = DVector::from_column_slice(&y[blk.offset..blk.offset + blk.z.ncols()]);
            let dc = &blk.z * yb;
            for (&col, v) in blk.cols.iter().zip(dc.iter()) {
                c[col] += v;
            }
        }
        Some((c, kkt))
    }

    /// Penalty formulation `‖Kc−b‖² + (α/λ)‖Bc−g‖² + (β/λ)‖Hc‖²`, with the
    /// mean row kept as a hard constraint.
    fn solve_regularized(&self, b: &[f64], g: &[f64], mean_target: f64) -> Result<Vec<f64>> {
        let fallback = self.fallback.get_or_init(|| self.build_fallback());
        let (f, sys) = fallback
            .as_ref()
            .ok_or_else(|| Error::NonFinite("regularised system could not be factored".into()))?;
        let wa = self.alpha / FALLBACK_LAMBDA;
        let mut rhs = self.k.transpose_mul_vec(b);
        let bg: Vec<f64> = g.iter().map(|v| wa * v).collect();
        for (r, v) in rhs.iter_mut().zip(self.b.transpose_mul_vec(&bg)) {
            *r += v;
        }
        if self.mean_row.is_some() {
            rhs.push(mean_target);
        }
        let mut x = f.solve(&rhs);
        // One step of iterative refinement.
        let r: Vec<f64> = sys.mul(&x).iter().zip(&rhs).map(|(a, b)| b - a).collect();
        let dx = f.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        x.truncate(self.n);
        Ok(x)
    }

    fn build_fallback(&self) -> Option<(Factor, SymSystem)> {
        let mut trip = Vec::new();
        let wa = self.alpha / FALLBACK_LAMBDA;
        let wb = self.beta / FALLBACK_LAMBDA;
        for (m, w) in [(&self.k, 1.0), (&self.b, wa), (&self.h, wb)] {
            for i in 0..m.nrows() {
                let (idx, val) = m.row(i);
                for (&a, &va) in idx.iter().zip(val) {
                    for (&c, &vc) in idx.iter().zip(val) {
                        trip.push(Triplet::new(a, c, w * va * vc));
                    }
                }
            }
        }
        let mut sys = SymSystem {
            n: self.n,
            triplets: trip,
        };
        let ridge = 1e-14 * sys.max_diag().max(f64::MIN_POSITIVE);
        for i in 0..self.n {
            sys.triplets.push(Triplet::new(i, i, ridge));
        }
        if let Some(rho) = &self.mean_row {
            sys.n += 1;
            for (i, &v) in rho.iter().enumerate() {
                if v != 0.0 {
                    sys.triplets.push(Triplet::new(i, self.n, v));
                    sys.triplets.push(Triplet::new(self.n, i, v));
                }
            }
        }
        let f = sys.factor(self.mean_row.is_some())?;
        Some((f, sys))
    }
}

type ColBlock = Vec<(usize, usize)>;

fn build_blocks(k: &CsrMatrix, n: usize) -> (Vec<Block>, ColBlock, usize, bool) {
    let mut uf = UnionFind((0..n).collect());
    let mut touched = vec![false; n];
    for i in 0..k.nrows() {
        let (idx, _) = k.row(i);
        for &c in idx {
            touched[c] = true;
            uf.union(idx[0], c);
        }
    }
    // Group columns and rows by root; untouched columns are free singletons.
    let mut by_root: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (c, _) in touched.iter().enumerate().filter(|(_, &t)| t) {
        by_root.entry(uf.find(c)).or_default().0.push(c);
    }
    for i in 0..k.nrows() {
        let (idx, _) = k.row(i);
        if let Some(&c) = idx.first() {
            by_root.get_mut(&uf.find(c)).expect("root").1.push(i);
        }
    }
    let mut col_block = vec![(usize::MAX, 0); n];
    let mut blocks: Vec<Block> = Vec::new();
    let mut rank_deficient = false;
    let mut offset = 0;
    let mut free = (0..n).filter(|&c| !touched[c]).peekable();
    let mut constrained = by_root.into_values().peekable();
    // Interleave by smallest column for a stable, locality-friendly ordering.
    loop {
        let next_free = free.peek().copied();
        let next_con = constrained.peek().map(|(cols, _)| cols[0]);
        let blk = match (next_free, next_con) {
            (None, None) => break,
            (Some(f), c) if c.is_none_or(|c| f < c) => {
                free.next();
                Block {
                    cols: vec![f],
                    rows: Vec::new(),
                    pinv: DMatrix::zeros(1, 0),
                    z: DMatrix::identity(1, 1),
                    offset,
                }
            }
            _ => {
                let (cols, rows) = constrained.next().expect("peeked");
                let (pinv, z, rank) = reduce_block(k, &cols, &rows);
                if rank < rows.len() {
                    rank_deficient = true;
                }
                Block {
                    cols,
                    rows,
                    pinv,
                    z,
                    offset,
                }
            }
        };
        for (pos, &c) in blk.cols.iter().enumerate() {
            col_block[c] = (blocks.len(), pos);
        }
        offset += blk.z.ncols();
        blocks.push(blk);
    }
    (blocks, col_block, offset, rank_deficient)
}

/// SVD of one constraint block: pseudo-inverse, null basis and rank.
fn reduce_block(
    k: &CsrMatrix,
    cols: &[usize],
    rows: &[usize],
) -> (DMatrix<f64>, DMatrix<f64>, usize) {
    let nc = cols.len();
    let nr = rows.len();
    let pos: BTreeMap<usize, usize> = cols.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut a = DMatrix::zeros(nr.max(nc), nc);
    for (ri, &r) in rows.iter().enumerate() {
        let (idx, val) = k.row(r);
        for (&c, &v) in idx.iter().zip(val) {
            a[(ri, pos[&c])] += v;
        }
    }
    let svd = a.svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let s = &svd.singular_values;
    let smax = s.iter().fold(0.0f64, |m, &v| m.max(v));
    let keep: Vec<bool> = s
        .iter()
        .map(|&v| smax > 0.0 && v > RANK_TOL * smax)
        .collect();
    let rank = keep.iter().filter(|&&b| b).count();
    let mut pinv = DMatrix::zeros(nc, nr);
    for (i, &kp) in keep.iter().enumerate() {
        if !kp {
            continue;
        }
        for col in 0..nr {
            let uc = u[(col, i)] / s[i];
            if uc == 0.0 {
                continue;
            }
            for row in 0..nc {
                pinv[(row, col)] += vt[(i, row)] * uc;
            }
        }
    }
    let null: Vec<usize> = (0..nc).filter(|&i| !keep[i]).collect();
    let mut z = DMatrix::zeros(nc, null.len());
    for (j, &i) in null.iter().enumerate() {
        for row in 0..nc {
            z[(row, j)] = vt[(i, row)];
        }
    }
    (pinv, z, rank)
}

/// `Zᵀ(αBᵀB + βHᵀH)Z` as triplets, accumulated per group of rows touching
/// the same set of blocks.
fn reduced_system(
    b: &CsrMatrix,
    h: &CsrMatrix,
    alpha: f64,
    beta: f64,
    blocks: &[Block],
    col_block: &ColBlock,
    nred: usize,
) -> SymSystem {
    let mut groups: BTreeMap<Vec<usize>, Vec<(&CsrMatrix, usize, f64)>> = BTreeMap::new();
    for (m, w) in [(b, alpha), (h, beta)] {
        for i in 0..m.nrows() {
            let (idx, _) = m.row(i);
            let mut set: Vec<usize> = idx.iter().map(|&c| col_block[c].0).collect();
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                continue;
            }
            groups.entry(set).or_default().push((m, i, w));
        }
    }
    let mut triplets = Vec::new();
    for (set, rows) in groups {
        let dims: Vec<usize> = set.iter().map(|&bi| blocks[bi].z.ncols()).collect();
        let kk: usize = dims.iter().sum();
        if kk == 0 {
            continue;
        }
        let mut starts = Vec::with_capacity(set.len());
        let mut acc = 0;
        for &d in &dims {
            starts.push(acc);
            acc += d;
        }
        let mut r = DMatrix::<f64>::zeros(rows.len(), kk);
        for (ri, &(m, i, w)) in rows.iter().enumerate() {
            let sw = w.sqrt();
            let (idx, val) = m.row(i);
            for (&c, &v) in idx.iter().zip(val) {
                let (bi, pos) = col_block[c];
                let slot = set.binary_search(&bi).expect("block in set");
                let z = &blocks[bi].z;
                for j in 0..z.ncols() {
                    r[(ri, starts[slot] + j)] += sw * v * z[(pos, j)];
                }
            }
        }
        let gram = r.tr_mul(&r);
        let global: Vec<usize> = set
            .iter()
            .zip(&dims)
            .flat_map(|(&bi, &d)| (0..d).map(move |j| blocks[bi].offset + j))
            .collect();
        for (a, &ga) in global.iter().enumerate() {
            for (c, &gc) in global.iter().enumerate() {
                let v = gram[(a, c)];
                if v != 0.0 {
                    triplets.push(Triplet::new(ga, gc, v));
                }
            }
        }
    }
    SymSystem { n: nred, triplets }
}

/// One-shot convenience wrapper around [`ConstrainedLsq`].
#[allow(clippy::too_many_arguments)]
pub fn solve_equality_ls(
    k: &CsrMatrix,
    b: &[f64],
    bmat: &CsrMatrix,
    g: &[f64],
    h: &CsrMatrix,
    mean_row: Option<&[f64]>,
    mean_target: f64,
    alpha: f64,
    beta: f64,
    eps1: f64,
) -> Result<SolveReport> {
    ConstrainedLsq::factor(
        k.clone(),
        bmat.clone(),
        h.clone(),
        mean_row.map(<[f64]>::to_vec),
        alpha,
        beta,
    )?
    .solve(b, g, mean_target, eps1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: &[&[f64]], n: usize) -> CsrMatrix {
        CsrMatrix::from_dense(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), n)
    }

    #[test]
    fn exactly_determined() {
        let k = dense(&[&[1.0, 0.0], &[0.0, 1.0]], 2);
        let e = CsrMatrix::new(2);
        let r =
            solve_equality_ls(&k, &[1.0, 2.0], &e, &[], &e, None, 0.0, 1.0, 1.0, 1e-12).unwrap();
        assert!(
            (r.coeffs[0] - 1.0).abs() < 1e-14 && (r.coeffs[1] - 2.0).abs() < 1e-14,
            "{:?}",
            r
        );
        assert!(r.constraint_residual < 1e-14);
    }

    #[test]
    fn pure_least_squares() {
        let k = CsrMatrix::new(2);
        let b = dense(&[&[1.0, 0.0], &[0.0, 1.0]], 2);
        let h = CsrMatrix::new(2);
        let r =
            solve_equality_ls(&k, &[], &b, &[3.0, 4.0], &h, None, 0.0, 1.0, 1.0, 1e-12).unwrap();
        assert!((r.coeffs[0] - 3.0).abs() < 1e-12 && (r.coeffs[1] - 4.0).abs() < 1e-12);
        assert_eq!(r.conditioning_flag, ConditioningFlag::Ok);
    }

    #[test]
    fn lagrange_oracle() {
        // min |c|² s.t. c1 + c2 = 2  →  c = (1, 1)
        let k = dense(&[&[1.0, 1.0]], 2);
        let b = dense(&[&[1.0, 0.0], &[0.0, 1.0]], 2);
        let h = CsrMatrix::new(2);
        let r =
            solve_equality_ls(&k, &[2.0], &b, &[0.0, 0.0], &h, None, 0.0, 1.0, 1.0, 1e-12).unwrap();
        assert!((r.coeffs[0] - 1.0).abs() < 1e-12 && (r.coeffs[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_constraint_is_hard() {
        // Only smoothness: c1 = c2 = c3; mean row fixes the level.
        let k = CsrMatrix::new(3);
        let b = CsrMatrix::new(3);
        let h = dense(&[&[1.0, -1.0, 0.0], &[0.0, 1.0, -1.0]], 3);
        let r = solve_equality_ls(
            &k,
            &[],
            &b,
            &[],
            &h,
            Some(&[1.0, 1.0, 1.0]),
            6.0,
            1.0,
            1.0,
            1e-12,
        )
        .unwrap();
        for v in &r.coeffs {
            assert!((v - 2.0).abs() < 1e-12);
        }
        assert!(r.mean_residual < 1e-12);
    }

    #[test]
    fn redundant_consistent_constraints() {
        let k = dense(&[&[1.0, 1.0, 0.0], &[2.0, 2.0, 0.0]], 3);
        let b = dense(&[&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]], 3);
        let h = CsrMatrix::new(3);
        let r = solve_equality_ls(
            &k,
            &[1.0, 2.0],
            &b,
            &[0.0, 5.0],
            &h,
            None,
            0.0,
            1.0,
            1.0,
            1e-10,
        )
        .unwrap();
        assert_eq!(r.conditioning_flag, ConditioningFlag::RankDeficient);
        assert!(
            (r.coeffs[0]).abs() < 1e-12
                && (r.coeffs[1] - 1.0).abs() < 1e-12
                && (r.coeffs[2] - 5.0).abs() < 1e-12
        );
    }

    #[test]
    fn singular_objective_falls_back() {
        // Null space of K is not seen by B or H.
        let k = dense(&[&[1.0, 1.0, 0.0]], 3);
        let b = dense(&[&[0.0, 0.0, 1.0]], 3);
        let h = CsrMatrix::new(3);
        let r = solve_equality_ls(&k, &[2.0], &b, &[1.0], &h, None, 0.0, 1.0, 1.0, 1e-8).unwrap();
        assert_eq!(r.conditioning_flag, ConditioningFlag::Regularized);
        assert!((r.coeffs[0] + r.coeffs[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn inconsistent_constraints_are_infeasible() {
        let k = dense(&[&[1.0, 1.0], &[1.0, 1.0]], 2);
        let b = dense(&[&[1.0, 0.0], &[0.0, 1.0]], 2);
        let h = CsrMatrix::new(2);
        let r = solve_equality_ls(
            &k,
            &[1.0, 3.0],
            &b,
            &[0.0, 0.0],
            &h,
            None,
            0.0,
            1.0,
            1.0,
            1e-8,
        );
        assert!(matches!(r, Err(Error::Infeasible { .. })));
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let k = dense(&[&[1.0, f64::NAN]], 2);
        let e = CsrMatrix::new(2);
        assert!(matches!(
            ConstrainedLsq::factor(k, e.clone(), e, None, 1.0, 1.0),
            Err(Error::NonFinite(_))
        ));
    }
}
