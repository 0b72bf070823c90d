//! Constraint families for the SDP formulations: interpolation (within- and
//! cross-realization), initial condition, variance, uncorrelation, covariance
//! classes, and the recursive PSD reduction for super-symmetric assemblies.
//!
//! Every generator returns [`AffineGramExpr`] values; inequalities are in the
//! form `expression <= 0`, equalities in the form `expression = 0`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::SpecError;
use crate::gram::{inner, AffineGramExpr, BlockId, GramLayout, Symbol};
use crate::model::{
    FunctionClass, InitKind, InitialCondition, Method, NoiseModel, PerfKind, PerformanceMeasure,
};

/// Which pair of realization copies an interpolation family couples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopyPair {
    /// Both points live in the same realization; all terms on `Diag`.
    Within,
    /// Point `i` in copy 1, point `j` in copy `j0`; mixed products on
    /// `Cross(j0)`.
    Cross(usize),
}

/// A bundle of constraints: equalities (`= 0`), inequalities (`<= 0`), and
/// PSD requirements on signed combinations of blocks.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    pub equalities: Vec<AffineGramExpr>,
    pub inequalities: Vec<AffineGramExpr>,
    pub psd_blocks: Vec<PsdCombination>,
}

/// One positive-semidefiniteness requirement on a signed sum of blocks,
/// `sum_B signs[B] * block_B >= 0`, with coefficients in `{-1, 0, +1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PsdCombination {
    pub signs: BTreeMap<BlockId, i8>,
}

impl PsdCombination {
    pub fn singleton(block: BlockId) -> Self {
        let mut signs = BTreeMap::new();
        signs.insert(block, 1);
        Self { signs }
    }
}

/// A covariance class: `R` realization copies linked through diagonal
/// matrices `Sigma^{1j}` (`j = 2..=R`), stored as their length-`N` diagonals.
/// All remaining blocks of the assembled matrix are determined by
/// super-symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceClass {
    r: usize,
    diagonals: Vec<Vec<f64>>,
}

impl CovarianceClass {
    pub fn new(r: usize, diagonals: Vec<Vec<f64>>) -> Result<Self, SpecError> {
        if r < 2 {
            return Err(SpecError::Covariance(format!("requires R >= 2, got {r}")));
        }
        if diagonals.len() != r - 1 {
            return Err(SpecError::Covariance(format!(
                "expected {} diagonals for R = {r}, got {}",
                r - 1,
                diagonals.len()
            )));
        }
        let n = diagonals[0].len();
        for (idx, d) in diagonals.iter().enumerate() {
            if d.len() != n {
                return Err(SpecError::Covariance(format!(
                    "diagonal {} has length {}, expected {n}",
                    idx + 2,
                    d.len()
                )));
            }
            if d.iter().any(|v| v.abs() > 1.0 + 1e-12) {
                return Err(SpecError::Covariance(format!(
                    "diagonal {} has an entry of magnitude > 1",
                    idx + 2
                )));
            }
        }
        Ok(Self { r, diagonals })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn n(&self) -> usize {
        self.diagonals[0].len()
    }

    /// Diagonal of `Sigma^{1j}` for `j in 2..=R`.
    pub fn diagonal(&self, j: usize) -> &[f64] {
        &self.diagonals[j - 2]
    }

    pub fn is_power_of_two(&self) -> bool {
        self.r.is_power_of_two()
    }
}

/// The completely anti-correlated class on `R = 2^N` copies: the diagonals
/// of `Sigma^{1j}` enumerate `{-1, 1}^N` in descending lexicographic order
/// (with `1 > -1`), the all-ones vector excluded.
pub fn exact_covariance(n: usize) -> Result<CovarianceClass, SpecError> {
    if n == 0 {
        return Err(SpecError::Covariance("requires N >= 1".into()));
    }
    if n > 16 {
        return Err(SpecError::Covariance(format!(
            "2^{n} copies is far beyond desk scale"
        )));
    }
    let r = 1usize << n;
    let diagonals = (1..r).map(|m| sign_vector(m, n)).collect();
    CovarianceClass::new(r, diagonals)
}

/// Sign vector number `m` in the descending lexicographic enumeration of
/// `{-1, 1}^N`: bit `0` of `m` drives the last entry, with `+1` for a clear
/// bit. `m = 0` is the all-ones vector.
pub(crate) fn sign_vector(m: usize, n: usize) -> Vec<f64> {
    (0..n)
        .map(|pos| {
            if (m >> (n - 1 - pos)) & 1 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

/// The two-copy class with `Sigma^{12} = -Id`, i.e. completely
/// anti-correlated noise across a single pair of realizations.
pub fn anti_correlated_pair(n: usize) -> Result<CovarianceClass, SpecError> {
    if n == 0 {
        return Err(SpecError::Covariance("requires N >= 1".into()));
    }
    CovarianceClass::new(2, vec![vec![-1.0; n]])
}

/// Interpolation conditions for the class `F_{mu,L}` over every ordered pair
/// of points in `{x_0, ..., x_N, x_*}`, rewritten as `expression <= 0`:
///
/// ```text
/// f_i - f_j + <g_i, x_j - x_i>
///   + 1/(2(L-mu)) ||g_i - g_j||^2
///   + mu L/(2(L-mu)) ||x_i - x_j||^2
///   - mu/(L-mu) <g_i - g_j, x_i - x_j>  <= 0
/// ```
///
/// For `L = inf` the limit form drops the gradient terms and keeps
/// `(mu/2) ||x_i - x_j||^2`.
///
/// Within a copy, identical pairs are skipped. For a cross pair, points `i`
/// and `j` live in distinct copies: all ordered pairs are emitted, including
/// `i = j`, with mixed products routed to the cross block; the cross
/// quadratic term is the block-wise expansion, e.g.
/// `||g_i - g_j||^2 -> <g_i,g_i>_D + <g_j,g_j>_D - 2 <g_i,g_j>_C`.
pub fn interpolation_constraints(
    layout: &GramLayout,
    method: &Method,
    fclass: &FunctionClass,
    copy_pair: CopyPair,
) -> Result<Vec<AffineGramExpr>, SpecError> {
    let n = layout.n();
    let (c_grad, c_dist, c_mixed) = if fclass.is_smooth() {
        let (mu, l) = (fclass.mu(), fclass.l());
        (
            1.0 / (2.0 * (l - mu)),
            mu * l / (2.0 * (l - mu)),
            mu / (l - mu),
        )
    } else {
        (0.0, fclass.mu() / 2.0, 0.0)
    };
    let cross = match copy_pair {
        CopyPair::Within => None,
        CopyPair::Cross(j) => {
            if j < 2 {
                return Err(SpecError::Covariance(format!(
                    "cross pair index must be >= 2, got {j}"
                )));
            }
            Some(BlockId::Cross(j))
        }
    };

    // Points 0..=n are iterates, n+1 stands for the optimum.
    let point = |idx: usize| -> (Symbol, Symbol, Option<usize>) {
        if idx <= n {
            (Symbol::X(idx), Symbol::Grad(idx), Some(idx))
        } else {
            (Symbol::XStar, Symbol::GradStar, None)
        }
    };

    let mut out = Vec::new();
    for pi in 0..=n + 1 {
        for pj in 0..=n + 1 {
            match cross {
                None if pi == pj => continue,
                // Both points starred: every term vanishes structurally.
                Some(_) if pi == n + 1 && pj == n + 1 => continue,
                _ => {}
            }
            let (xi_s, gi_s, fi) = point(pi);
            let (xj_s, gj_s, fj) = point(pj);
            let xi = layout.point_vector(method, xi_s)?;
            let gi = layout.point_vector(method, gi_s)?;
            let xj = layout.point_vector(method, xj_s)?;
            let gj = layout.point_vector(method, gj_s)?;

            let mut e = AffineGramExpr::zero(layout.f_dim());
            if let Some(i) = fi {
                e.add_f(i, 1.0);
            }
            if let Some(j) = fj {
                e.add_f(j, -1.0);
            }
            match cross {
                None => {
                    let dx = &xj - &xi;
                    e.add_inner(BlockId::Diag, &gi, &dx, 1.0);
                    let dg = &gi - &gj;
                    e.add_inner(BlockId::Diag, &dg, &dg, c_grad);
                    e.add_inner(BlockId::Diag, &dx, &dx, c_dist);
                    // <g_i - g_j, x_i - x_j> = -<g_i - g_j, x_j - x_i>
                    e.add_inner(BlockId::Diag, &dg, &dx, c_mixed);
                }
                Some(cb) => {
                    // <g_i^(1), x_j^(b) - x_i^(1)>
                    e.add_inner(cb, &gi, &xj, 1.0);
                    e.add_inner(BlockId::Diag, &gi, &xi, -1.0);
                    // ||g_i^(1) - g_j^(b)||^2
                    e.add_inner(BlockId::Diag, &gi, &gi, c_grad);
                    e.add_inner(BlockId::Diag, &gj, &gj, c_grad);
                    e.add_inner(cb, &gi, &gj, -2.0 * c_grad);
                    // ||x_i^(1) - x_j^(b)||^2
                    e.add_inner(BlockId::Diag, &xi, &xi, c_dist);
                    e.add_inner(BlockId::Diag, &xj, &xj, c_dist);
                    e.add_inner(cb, &xi, &xj, -2.0 * c_dist);
                    // -<g_i^(1) - g_j^(b), x_i^(1) - x_j^(b)>
                    e.add_inner(BlockId::Diag, &gi, &xi, -c_mixed);
                    e.add_inner(cb, &gi, &xj, c_mixed);
                    e.add_inner(cb, &gj, &xi, c_mixed);
                    e.add_inner(BlockId::Diag, &gj, &xj, -c_mixed);
                }
            }
            e.prune(0.0);
            if !e.is_structurally_zero() {
                out.push(e);
            }
        }
    }
    Ok(out)
}

/// The expression of an initial condition on the deterministic starting
/// state (to be bounded by `init.bound`).
pub fn initial_condition_expression(
    layout: &GramLayout,
    method: &Method,
    init: &InitialCondition,
) -> Result<AffineGramExpr, SpecError> {
    let x0 = layout.point_vector(method, Symbol::X(0))?;
    let xs = layout.point_vector(method, Symbol::XStar)?;
    let d = &x0 - &xs;
    let mut e = inner(layout, &d, &d, BlockId::Diag);
    if let InitKind::DistanceSqPlusSigma { coeff } = init.kind {
        let s0 = layout.point_vector(method, Symbol::Sig(0))?;
        e.add_inner(BlockId::Diag, &s0, &s0, coeff);
    }
    Ok(e)
}

/// The initial condition as a constraint set: the single inequality
/// `expression - bound <= 0`. Method dynamics and `g_* = 0` are structural
/// under this layout and contribute no constraints.
pub fn init_optimality_constraints(
    layout: &GramLayout,
    method: &Method,
    init: &InitialCondition,
) -> Result<ConstraintSet, SpecError> {
    let mut e = initial_condition_expression(layout, method, init)?;
    e.add_constant(-init.bound);
    Ok(ConstraintSet {
        equalities: Vec::new(),
        inequalities: vec![e],
        psd_blocks: Vec::new(),
    })
}

/// The performance measure as an expression over the final state.
pub fn performance_expression(
    layout: &GramLayout,
    method: &Method,
    perf: &PerformanceMeasure,
) -> Result<AffineGramExpr, SpecError> {
    let n = layout.n();
    match perf.kind {
        PerfKind::FGap => {
            let mut e = AffineGramExpr::zero(layout.f_dim());
            e.add_f(n, 1.0);
            Ok(e)
        }
        PerfKind::DistanceSq => {
            let xn = layout.point_vector(method, Symbol::X(n))?;
            let xs = layout.point_vector(method, Symbol::XStar)?;
            let d = &xn - &xs;
            Ok(inner(layout, &d, &d, BlockId::Diag))
        }
        PerfKind::DistanceSqPlusSigma { coeff } => {
            let xn = layout.point_vector(method, Symbol::X(n))?;
            let xs = layout.point_vector(method, Symbol::XStar)?;
            let d = &xn - &xs;
            let mut e = inner(layout, &d, &d, BlockId::Diag);
            let sn = layout.point_vector(method, Symbol::Sig(n))?;
            e.add_inner(BlockId::Diag, &sn, &sn, coeff);
            Ok(e)
        }
    }
}

/// Variance constraints, `expression <= 0` (or `= 0` via `as_equalities`):
/// for every `k in [0, N-1]`
///
/// ```text
/// ||eps_k||^2 - A1 (f_k - f_*) - B1 ||g_k||^2 - C1 ||x_k - x_*||^2 - D1 - E1 sigma_k^2
/// ```
///
/// and, when the layout tracks sigma, the recursion
///
/// ```text
/// sigma_{k+1}^2 - A2 (f_k - f_*) - B2 ||g_k||^2 - C2 ||x_k - x_*||^2 - D2 - (1-rho) sigma_k^2
/// ```
pub fn variance_constraints(
    layout: &GramLayout,
    method: &Method,
    noise: &NoiseModel,
) -> Result<Vec<AffineGramExpr>, SpecError> {
    noise.validate()?;
    if !noise.is_sigma_free() && !layout.tracks_sigma() {
        return Err(SpecError::SigmaFree(
            "noise model references sigma_k".into(),
        ));
    }
    let n = layout.n();
    let mut out = Vec::new();
    for k in 0..n {
        let eps = layout.point_vector(method, Symbol::Eps(k))?;
        let g = layout.point_vector(method, Symbol::Grad(k))?;
        let x = layout.point_vector(method, Symbol::X(k))?;
        let mut e = inner(layout, &eps, &eps, BlockId::Diag);
        e.add_f(k, -noise.a1);
        e.add_inner(BlockId::Diag, &g, &g, -noise.b1);
        e.add_inner(BlockId::Diag, &x, &x, -noise.c1);
        e.add_constant(-noise.d1);
        if noise.e1 != 0.0 {
            let s = layout.point_vector(method, Symbol::Sig(k))?;
            e.add_inner(BlockId::Diag, &s, &s, -noise.e1);
        }
        out.push(e);
    }
    if layout.tracks_sigma() {
        for k in 0..n {
            let s_next = layout.point_vector(method, Symbol::Sig(k + 1))?;
            let s = layout.point_vector(method, Symbol::Sig(k))?;
            let g = layout.point_vector(method, Symbol::Grad(k))?;
            let x = layout.point_vector(method, Symbol::X(k))?;
            let mut e = inner(layout, &s_next, &s_next, BlockId::Diag);
            e.add_f(k, -noise.a2);
            e.add_inner(BlockId::Diag, &g, &g, -noise.b2);
            e.add_inner(BlockId::Diag, &x, &x, -noise.c2);
            e.add_constant(-noise.d2);
            e.add_inner(BlockId::Diag, &s, &s, -(1.0 - noise.rho));
            out.push(e);
        }
    }
    Ok(out)
}

/// Uncorrelation equalities on the `Diag` block: for every `k in [0, N-1]`,
/// `<eps_k, eps_l> = 0` for `l < k` (once per unordered pair) and
/// `<eps_k, x_i> = <eps_k, g_i> = 0` (plus `<eps_k, sigma_i> = 0` when
/// tracked) for `i <= k`. Pairs involving the starred symbols are
/// structurally zero and never emitted.
pub fn uncorrelation_constraints(
    layout: &GramLayout,
    method: &Method,
) -> Result<Vec<AffineGramExpr>, SpecError> {
    let n = layout.n();
    let mut out = Vec::new();
    for k in 0..n {
        let eps_k = layout.point_vector(method, Symbol::Eps(k))?;
        for l in 0..k {
            let eps_l = layout.point_vector(method, Symbol::Eps(l))?;
            out.push(inner(layout, &eps_k, &eps_l, BlockId::Diag));
        }
        for i in 0..=k {
            let x = layout.point_vector(method, Symbol::X(i))?;
            out.push(inner(layout, &eps_k, &x, BlockId::Diag));
            let g = layout.point_vector(method, Symbol::Grad(i))?;
            out.push(inner(layout, &eps_k, &g, BlockId::Diag));
            if layout.tracks_sigma() {
                let s = layout.point_vector(method, Symbol::Sig(i))?;
                out.push(inner(layout, &eps_k, &s, BlockId::Diag));
            }
        }
    }
    Ok(out)
}

/// Covariance equalities tying cross and diagonal blocks: for each copy
/// `j = 2..=R` and step `k`,
/// `<eps_k, eps_k>_Cross(j) - diag_j[k] * <eps_k, eps_k>_Diag = 0`.
pub fn covariance_constraints(
    layout: &GramLayout,
    method: &Method,
    cov: &CovarianceClass,
) -> Result<Vec<AffineGramExpr>, SpecError> {
    if cov.n() != layout.n() {
        return Err(SpecError::Covariance(format!(
            "covariance class is for N = {}, layout has N = {}",
            cov.n(),
            layout.n()
        )));
    }
    let mut out = Vec::new();
    for j in 2..=cov.r() {
        let diag = cov.diagonal(j);
        for k in 0..layout.n() {
            let eps = layout.point_vector(method, Symbol::Eps(k))?;
            let mut e = inner(layout, &eps, &eps, BlockId::Cross(j));
            e.add_inner(BlockId::Diag, &eps, &eps, -diag[k]);
            out.push(e);
        }
    }
    Ok(out)
}

/// Optional strengthening: ties the deterministic starting symbols across
/// copies, `<x_0, x_0>_Cross(j) = ||x_0||^2` and `<g_0, g_0>_Cross(j) =
/// ||g_0||^2` for each cross block. Valid because all copies share `x_0`;
/// not part of the base formulation.
pub fn tie_deterministic_constraints(
    layout: &GramLayout,
    method: &Method,
    r: usize,
) -> Result<Vec<AffineGramExpr>, SpecError> {
    let x0 = layout.point_vector(method, Symbol::X(0))?;
    let g0 = layout.point_vector(method, Symbol::Grad(0))?;
    let mut out = Vec::new();
    for j in 2..=r {
        for v in [&x0, &g0] {
            let mut e = inner(layout, v, v, BlockId::Cross(j));
            e.add_inner(BlockId::Diag, v, v, -1.0);
            out.push(e);
        }
    }
    Ok(out)
}

/// Recursive reduction of the PSD constraint on a `2^p x 2^p`
/// super-symmetric block matrix to `3^p` PSD conditions on signed sums of
/// its first-row blocks: for a block row split in halves `[H | T]`,
/// `conditions(row) = conditions(H) ++ conditions(H + T) ++ conditions(H - T)`,
/// with the singleton block as base case.
pub fn psd_reduction(p: usize, block_ids: &[BlockId]) -> Result<Vec<PsdCombination>, SpecError> {
    if block_ids.len() != (1usize << p) {
        return Err(SpecError::PsdReduction(format!(
            "expected 2^{p} = {} block ids, got {}",
            1usize << p,
            block_ids.len()
        )));
    }
    if !block_ids.is_empty() && block_ids[0] != BlockId::Diag && p > 0 {
        return Err(SpecError::PsdReduction(
            "first block of the row must be the diagonal block".into(),
        ));
    }
    let row: Vec<BTreeMap<BlockId, i8>> = block_ids
        .iter()
        .map(|&b| {
            let mut m = BTreeMap::new();
            m.insert(b, 1i8);
            m
        })
        .collect();
    Ok(reduce_row(&row)
        .into_iter()
        .map(|signs| PsdCombination { signs })
        .collect())
}

fn reduce_row(row: &[BTreeMap<BlockId, i8>]) -> Vec<BTreeMap<BlockId, i8>> {
    if row.len() == 1 {
        return vec![row[0].clone()];
    }
    let half = row.len() / 2;
    let (h, t) = (&row[..half], &row[half..]);
    let combine = |sign: i8| -> Vec<BTreeMap<BlockId, i8>> {
        let merged: Vec<BTreeMap<BlockId, i8>> = h
            .iter()
            .zip(t.iter())
            .map(|(a, b)| {
                let mut m = a.clone();
                for (k, v) in b {
                    *m.entry(*k).or_insert(0) += sign * v;
                }
                m.retain(|_, v| *v != 0);
                m
            })
            .collect();
        reduce_row(&merged)
    };
    let mut out = reduce_row(h);
    out.extend(combine(1));
    out.extend(combine(-1));
    out
}

/// Assembles the full `2^p * dim` super-symmetric matrix from its first
/// block row: block `(a, b)` is first-row block number `(a XOR b)`.
pub fn assemble_super_symmetric(blocks: &[DMatrix<f64>]) -> Result<DMatrix<f64>, SpecError> {
    let r = blocks.len();
    if !r.is_power_of_two() {
        return Err(SpecError::PsdReduction(format!(
            "block row length {r} is not a power of two"
        )));
    }
    let dim = blocks[0].nrows();
    if blocks.iter().any(|b| b.nrows() != dim || b.ncols() != dim) {
        return Err(SpecError::PsdReduction("blocks must share one square size".into()));
    }
    let mut big = DMatrix::zeros(r * dim, r * dim);
    for a in 0..r {
        for b in 0..r {
            let src = &blocks[a ^ b];
            big.view_mut((a * dim, b * dim), (dim, dim)).copy_from(src);
        }
    }
    Ok(big)
}

/// The assembled covariance matrix of a class: identity diagonal blocks and
/// `Sigma` blocks determined by super-symmetry from the first row.
pub fn assemble_covariance_matrix(cov: &CovarianceClass) -> Result<DMatrix<f64>, SpecError> {
    let n = cov.n();
    let mut first_row = vec![DMatrix::identity(n, n)];
    for j in 2..=cov.r() {
        first_row.push(DMatrix::from_diagonal(&DVector::from_vec(
            cov.diagonal(j).to_vec(),
        )));
    }
    assemble_super_symmetric(&first_row)
}

/// The `2^p` index permutations under which an order-`p` super-symmetric
/// matrix is invariant, built by the half-swap recursion.
pub fn super_symmetric_permutations(p: usize) -> Vec<Vec<usize>> {
    if p == 0 {
        return vec![vec![0]];
    }
    let inner = super_symmetric_permutations(p - 1);
    let half = 1usize << (p - 1);
    let mut out = Vec::with_capacity(2 * inner.len());
    for swap in [false, true] {
        for pi in &inner {
            let lo: Vec<usize> = pi.iter().map(|&i| i).collect();
            let hi: Vec<usize> = pi.iter().map(|&i| i + half).collect();
            let mut perm = Vec::with_capacity(2 * half);
            if swap {
                perm.extend(hi);
                perm.extend(lo);
            } else {
                perm.extend(lo);
                perm.extend(hi);
            }
            out.push(perm);
        }
    }
    out
}
