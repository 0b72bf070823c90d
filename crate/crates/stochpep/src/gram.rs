//! Symbol-to-coordinate bookkeeping and the algebra of affine expressions
//! over function values and Gram-block inner products.
//!
//! The layout is the reduced one with `x_* = 0`, `g_* = 0`, `f_* = 0`:
//! the Gram matrix is formed over the basis
//! `[x_0, g_0, ..., g_N, eps_0, ..., eps_{N-1}, sigma_0, ..., sigma_N]`
//! (the sigma tail only when tracked). With that convention the method
//! dynamics and the optimality condition are structural: iterates are affine
//! combinations of basis vectors, and the optimal point never appears.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::SpecError;
use crate::model::Method;

/// Identifier of a Gram matrix variable.
///
/// `Diag` is the within-realization block `G`. `Cross(j)` (for `j >= 2`) is
/// the block `G^{1j}` of inner products between realization copy 1 and copy
/// `j`. `Slot(i)` names the `i`-th block of a problem assembled from an
/// interchange file, where blocks carry no realization semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockId {
    Diag,
    Cross(usize),
    Slot(usize),
}

impl std::fmt::Display for BlockId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlockId::Diag => write!(f, "G"),
            BlockId::Cross(j) => write!(f, "G^(1{j})"),
            BlockId::Slot(i) => write!(f, "B{i}"),
        }
    }
}

/// A primitive or derived point symbol addressable in the layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symbol {
    /// Iterate `x_k`, `k in [0, N]`.
    X(usize),
    /// Subgradient `g_k`, `k in [0, N]`.
    Grad(usize),
    /// Noise `eps_k`, `k in [0, N-1]`.
    Eps(usize),
    /// Auxiliary `sigma_k`, `k in [0, sigma_count - 1]`.
    Sig(usize),
    /// Optimal point (the origin).
    XStar,
    /// Gradient at the optimum (zero).
    GradStar,
}

/// Coordinate bookkeeping for one realization copy.
///
/// Coordinates are 1-based to match the usual selection-vector convention:
/// `x_0 -> 1`, `g_k -> k + 2`, `eps_k -> N + 3 + k`, `sigma_k -> 2N + 3 + k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GramLayout {
    n: usize,
    sigma_count: usize,
    dim: usize,
}

impl GramLayout {
    /// Builds the layout for `N` iterations. With `track_sigma` the layout
    /// carries `sigma_0, ..., sigma_N` (the variance recursion constrains up
    /// to `sigma_N`), giving dimension `3N + 3`; without, `2N + 2`.
    pub fn new(n: usize, track_sigma: bool) -> Result<Self, SpecError> {
        if n == 0 {
            return Err(SpecError::Layout("layout requires N >= 1".into()));
        }
        let sigma_count = if track_sigma { n + 1 } else { 0 };
        Ok(Self {
            n,
            sigma_count,
            dim: 1 + (n + 1) + n + sigma_count,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tracks_sigma(&self) -> bool {
        self.sigma_count > 0
    }

    pub fn sigma_count(&self) -> usize {
        self.sigma_count
    }

    /// Number of scalar function values `f_0, ..., f_N` (with `f_*` fixed
    /// at zero and absent).
    pub fn f_dim(&self) -> usize {
        self.n + 1
    }

    /// 1-based coordinate of a primitive symbol. The derived symbols `x_k`
    /// (`k >= 1`) and the starred symbols have no coordinate.
    pub fn coordinate(&self, sym: Symbol) -> Result<usize, SpecError> {
        match sym {
            Symbol::X(0) => Ok(1),
            Symbol::Grad(k) if k <= self.n => Ok(k + 2),
            Symbol::Eps(k) if k < self.n => Ok(self.n + 3 + k),
            Symbol::Sig(k) => {
                if self.sigma_count == 0 {
                    Err(SpecError::SigmaFree(format!("sigma_{k}")))
                } else if k < self.sigma_count {
                    Ok(2 * self.n + 3 + k)
                } else {
                    Err(SpecError::Layout(format!(
                        "sigma_{k} out of range (sigma_count = {})",
                        self.sigma_count
                    )))
                }
            }
            Symbol::X(k) => Err(SpecError::Layout(format!(
                "x_{k} is not a primitive coordinate; use point_vector"
            ))),
            Symbol::Grad(k) => Err(SpecError::Layout(format!("g_{k} exceeds N = {}", self.n))),
            Symbol::Eps(k) => Err(SpecError::Layout(format!(
                "eps_{k} out of range [0, {})",
                self.n
            ))),
            Symbol::XStar | Symbol::GradStar => Err(SpecError::Layout(
                "starred symbols map to the zero vector, not a coordinate".into(),
            )),
        }
    }

    /// Inverse of [`coordinate`](Self::coordinate) on `[1, dim]`.
    pub fn symbol_at(&self, coord: usize) -> Result<Symbol, SpecError> {
        if coord == 0 || coord > self.dim {
            return Err(SpecError::Layout(format!(
                "coordinate {coord} out of range [1, {}]",
                self.dim
            )));
        }
        let c = coord - 1;
        if c == 0 {
            Ok(Symbol::X(0))
        } else if c <= self.n + 1 {
            Ok(Symbol::Grad(c - 1))
        } else if c <= 2 * self.n + 1 {
            Ok(Symbol::Eps(c - (self.n + 2)))
        } else {
            Ok(Symbol::Sig(c - (2 * self.n + 2)))
        }
    }

    fn basis(&self, coord_1based: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim);
        v[coord_1based - 1] = 1.0;
        v
    }

    /// Selection vector of a symbol: a basis vector for primitives, the zero
    /// vector for `x_*` and `g_*`, and the affine combination
    /// `x_0 + sum_{j<k} alpha_{k-1,j} (g_j + eps_j)` for iterates `x_k`.
    pub fn point_vector(&self, method: &Method, sym: Symbol) -> Result<DVector<f64>, SpecError> {
        if method.n() != self.n {
            return Err(SpecError::Layout(format!(
                "method has N = {}, layout has N = {}",
                method.n(),
                self.n
            )));
        }
        match sym {
            Symbol::XStar | Symbol::GradStar => Ok(DVector::zeros(self.dim)),
            Symbol::X(0) => Ok(self.basis(1)),
            Symbol::X(k) if k <= self.n => {
                let mut v = self.basis(1);
                for j in 0..k {
                    let a = method.alpha(k - 1, j);
                    let g = self.coordinate(Symbol::Grad(j))?;
                    let e = self.coordinate(Symbol::Eps(j))?;
                    v[g - 1] += a;
                    v[e - 1] += a;
                }
                Ok(v)
            }
            Symbol::X(k) => Err(SpecError::Layout(format!("x_{k} exceeds N = {}", self.n))),
            other => Ok(self.basis(self.coordinate(other)?)),
        }
    }
}

/// An affine expression `constant + fcoeffs . F + sum_B <quad[B], block_B>`,
/// linear in the function-value vector `F` and in the entries of the Gram
/// blocks. This is the carrier for every constraint and objective.
#[derive(Debug, Clone)]
pub struct AffineGramExpr {
    pub constant: f64,
    pub fcoeffs: DVector<f64>,
    pub quad: BTreeMap<BlockId, DMatrix<f64>>,
}

impl AffineGramExpr {
    pub fn zero(f_dim: usize) -> Self {
        Self {
            constant: 0.0,
            fcoeffs: DVector::zeros(f_dim),
            quad: BTreeMap::new(),
        }
    }

    pub fn f_dim(&self) -> usize {
        self.fcoeffs.len()
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn add_f(&mut self, index: usize, coeff: f64) -> &mut Self {
        self.fcoeffs[index] += coeff;
        self
    }

    /// Adds `coeff * <a, b>` routed to `block`, with the symmetrized
    /// coefficient matrix `(a b^T + b a^T) / 2`.
    pub fn add_inner(
        &mut self,
        block: BlockId,
        a: &DVector<f64>,
        b: &DVector<f64>,
        coeff: f64,
    ) -> &mut Self {
        if coeff == 0.0 {
            return self;
        }
        let dim = a.len();
        let entry = self
            .quad
            .entry(block)
            .or_insert_with(|| DMatrix::zeros(dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                entry[(i, j)] += coeff * 0.5 * (a[i] * b[j] + b[i] * a[j]);
            }
        }
        self
    }

    /// Adds `coeff * other` term-wise.
    pub fn add_scaled(&mut self, other: &AffineGramExpr, coeff: f64) -> &mut Self {
        self.constant += coeff * other.constant;
        self.fcoeffs += coeff * &other.fcoeffs;
        for (block, mat) in &other.quad {
            let entry = self
                .quad
                .entry(*block)
                .or_insert_with(|| DMatrix::zeros(mat.nrows(), mat.ncols()));
            *entry += coeff * mat;
        }
        self
    }

    pub fn scaled(&self, coeff: f64) -> Self {
        let mut out = Self::zero(self.f_dim());
        out.add_scaled(self, coeff);
        out
    }

    /// Drops blocks whose coefficient matrix is identically zero.
    pub fn prune(&mut self, tol: f64) -> &mut Self {
        self.quad.retain(|_, m| m.iter().any(|v| v.abs() > tol));
        self
    }

    /// True when every coefficient (and the constant) is exactly zero.
    pub fn is_structurally_zero(&self) -> bool {
        self.constant == 0.0
            && self.fcoeffs.iter().all(|&c| c == 0.0)
            && self.quad.values().all(|m| m.iter().all(|&v| v == 0.0))
    }

    /// Evaluates the expression on concrete values.
    pub fn evaluate(&self, f: &DVector<f64>, blocks: &BTreeMap<BlockId, DMatrix<f64>>) -> f64 {
        let mut value = self.constant + self.fcoeffs.dot(f);
        for (block, coeffs) in &self.quad {
            let target = blocks
                .get(block)
                .unwrap_or_else(|| panic!("missing block {block} in evaluation"));
            value += coeffs.zip_fold(target, 0.0, |acc, c, g| acc + c * g);
        }
        value
    }
}

/// The expression `<a, b>` on the given block, i.e. the quadratic form with
/// coefficient matrix `(a b^T + b a^T) / 2` there and zero elsewhere.
pub fn inner(
    layout: &GramLayout,
    a: &DVector<f64>,
    b: &DVector<f64>,
    block: BlockId,
) -> AffineGramExpr {
    let mut e = AffineGramExpr::zero(layout.f_dim());
    e.add_inner(block, a, b, 1.0);
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sgd_method;

    #[test]
    fn layout_dims() {
        let l = GramLayout::new(1, false).unwrap();
        assert_eq!(l.dim(), 4);
        let l = GramLayout::new(1, true).unwrap();
        assert_eq!(l.dim(), 6);
        assert_eq!(l.sigma_count(), 2);
        let l = GramLayout::new(3, false).unwrap();
        assert_eq!(l.dim(), 8);
        assert!(GramLayout::new(0, false).is_err());
    }

    #[test]
    fn layout_coordinates_match_selection_vector_convention() {
        let l = GramLayout::new(3, false).unwrap();
        assert_eq!(l.coordinate(Symbol::X(0)).unwrap(), 1);
        assert_eq!(l.coordinate(Symbol::Grad(2)).unwrap(), 4);
        assert_eq!(l.coordinate(Symbol::Eps(1)).unwrap(), 7);
        let l = GramLayout::new(3, true).unwrap();
        assert_eq!(l.coordinate(Symbol::Sig(0)).unwrap(), 9);
        assert_eq!(l.coordinate(Symbol::Sig(3)).unwrap(), 12);
    }

    #[test]
    fn layout_round_trip_total() {
        for (n, track) in [(1, false), (1, true), (4, false), (4, true)] {
            let l = GramLayout::new(n, track).unwrap();
            for c in 1..=l.dim() {
                let sym = l.symbol_at(c).unwrap();
                assert_eq!(l.coordinate(sym).unwrap(), c, "n={n} track={track} c={c}");
            }
        }
    }

    #[test]
    fn sigma_on_sigma_free_layout_errors() {
        let l = GramLayout::new(2, false).unwrap();
        assert!(matches!(
            l.coordinate(Symbol::Sig(0)),
            Err(SpecError::SigmaFree(_))
        ));
    }

    #[test]
    fn star_symbols_are_zero_vectors() {
        let l = GramLayout::new(2, false).unwrap();
        let m = sgd_method(2, &[0.5, 0.5]).unwrap();
        assert!(l.point_vector(&m, Symbol::XStar).unwrap().iter().all(|&v| v == 0.0));
        assert!(l
            .point_vector(&m, Symbol::GradStar)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn x1_expands_single_sgd_step() {
        // x_1 = x_0 - a (g_0 + eps_0) on the N=1 sigma-free layout.
        let a = 0.75;
        let l = GramLayout::new(1, false).unwrap();
        let m = sgd_method(1, &[a]).unwrap();
        let v = l.point_vector(&m, Symbol::X(1)).unwrap();
        assert_eq!(v.as_slice(), &[1.0, -a, 0.0, -a]);
    }

    #[test]
    fn grad_is_basis_vector() {
        let l = GramLayout::new(3, false).unwrap();
        let m = sgd_method(3, &[0.1, 0.2, 0.3]).unwrap();
        let v = l.point_vector(&m, Symbol::Grad(2)).unwrap();
        let mut expected = vec![0.0; 8];
        expected[3] = 1.0;
        assert_eq!(v.as_slice(), expected.as_slice());
    }

    #[test]
    fn inner_with_star_is_zero_expression() {
        let l = GramLayout::new(1, false).unwrap();
        let m = sgd_method(1, &[1.0]).unwrap();
        let star = l.point_vector(&m, Symbol::XStar).unwrap();
        let x0 = l.point_vector(&m, Symbol::X(0)).unwrap();
        let e = inner(&l, &star, &x0, BlockId::Diag);
        assert!(e.is_structurally_zero());
    }

    #[test]
    fn inner_eps_eps_reads_norm() {
        let l = GramLayout::new(1, false).unwrap();
        let m = sgd_method(1, &[1.0]).unwrap();
        let e0 = l.point_vector(&m, Symbol::Eps(0)).unwrap();
        let expr = inner(&l, &e0, &e0, BlockId::Diag);
        let mut g = DMatrix::zeros(4, 4);
        g[(3, 3)] = 2.5;
        let mut blocks = BTreeMap::new();
        blocks.insert(BlockId::Diag, g);
        let f = DVector::zeros(2);
        assert!((expr.evaluate(&f, &blocks) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn inner_routes_to_cross_block() {
        let l = GramLayout::new(1, false).unwrap();
        let m = sgd_method(1, &[1.0]).unwrap();
        let e0 = l.point_vector(&m, Symbol::Eps(0)).unwrap();
        let expr = inner(&l, &e0, &e0, BlockId::Cross(2));
        assert!(expr.quad.contains_key(&BlockId::Cross(2)));
        assert!(!expr.quad.contains_key(&BlockId::Diag));
    }

    #[test]
    fn bilinearity_coefficientwise() {
        let l = GramLayout::new(2, false).unwrap();
        let m = sgd_method(2, &[0.4, 0.9]).unwrap();
        let a = l.point_vector(&m, Symbol::X(1)).unwrap();
        let b = l.point_vector(&m, Symbol::Grad(1)).unwrap();
        let c = l.point_vector(&m, Symbol::Eps(0)).unwrap();
        let sum = &a + &b;
        let lhs = inner(&l, &sum, &c, BlockId::Diag);
        let mut rhs = inner(&l, &a, &c, BlockId::Diag);
        rhs.add_scaled(&inner(&l, &b, &c, BlockId::Diag), 1.0);
        let (ml, mr) = (&lhs.quad[&BlockId::Diag], &rhs.quad[&BlockId::Diag]);
        assert!((ml - mr).iter().all(|v| v.abs() < 1e-14));
    }
}
