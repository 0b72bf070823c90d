//! Domain vocabulary: methods, function classes, noise models, schedules,
//! performance measures, initial conditions, and validated problem
//! specifications.
//!
//! All types here are immutable value objects after construction and can be
//! shared freely between threads.

use std::collections::BTreeMap;

use crate::error::SpecError;

/// The class of `mu`-strongly convex, `L`-smooth functions.
///
/// `L = f64::INFINITY` selects the strongly convex non-smooth limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionClass {
    mu: f64,
    l: f64,
}

impl FunctionClass {
    pub fn new(mu: f64, l: f64) -> Result<Self, SpecError> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(SpecError::FunctionClass(format!(
                "strong-convexity modulus must be finite and >= 0, got {mu}"
            )));
        }
        if l.is_nan() || l <= 0.0 {
            return Err(SpecError::FunctionClass(format!(
                "smoothness constant must be > 0 (possibly infinite), got {l}"
            )));
        }
        if mu >= l {
            return Err(SpecError::FunctionClass(format!(
                "requires mu < L strictly, got mu = {mu}, L = {l}"
            )));
        }
        Ok(Self { mu, l })
    }

    /// Convex `L`-smooth functions (`mu = 0`).
    pub fn smooth_convex(l: f64) -> Result<Self, SpecError> {
        Self::new(0.0, l)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn is_smooth(&self) -> bool {
        self.l.is_finite()
    }
}

/// Parameters of the conditional variance bound and of the recursion on the
/// auxiliary sequence `sigma_k^2`:
///
/// ```text
/// E[||eps_k||^2 | A_k]   <= A1 (f_k - f_*) + B1 ||g_k||^2 + C1 ||x_k - x_*||^2 + D1 + E1 sigma_k^2
/// E[sigma_{k+1}^2 | A_k] <= A2 (f_k - f_*) + B2 ||g_k||^2 + C2 ||x_k - x_*||^2 + D2 + (1 - rho) sigma_k^2
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub d1: f64,
    pub e1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
    pub d2: f64,
    pub rho: f64,
}

impl NoiseModel {
    /// A model with every parameter zero (noiseless method).
    pub fn zero() -> Self {
        Self {
            a1: 0.0,
            b1: 0.0,
            c1: 0.0,
            d1: 0.0,
            e1: 0.0,
            a2: 0.0,
            b2: 0.0,
            c2: 0.0,
            d2: 0.0,
            rho: 0.0,
        }
    }

    /// Validates the recursion coefficient: `rho <= 1` so that `1 - rho >= 0`.
    pub fn validate(&self) -> Result<(), SpecError> {
        let params = [
            self.a1, self.b1, self.c1, self.d1, self.e1, self.a2, self.b2, self.c2, self.d2,
            self.rho,
        ];
        if params.iter().any(|p| !p.is_finite()) {
            return Err(SpecError::NoiseModel(
                "all noise parameters must be finite".into(),
            ));
        }
        if self.rho > 1.0 {
            return Err(SpecError::NoiseModel(format!(
                "rho must satisfy rho <= 1, got {}",
                self.rho
            )));
        }
        Ok(())
    }

    /// True when the model itself never references the sigma sequence:
    /// `E1 = 0` and `A2 = B2 = C2 = D2 = 0`. A sigma-free model combined
    /// with sigma-free measures lets the layout omit the sigma vectors.
    pub fn is_sigma_free(&self) -> bool {
        self.e1 == 0.0 && self.a2 == 0.0 && self.b2 == 0.0 && self.c2 == 0.0 && self.d2 == 0.0
    }

    /// Additive bounded noise: `E||eps_k||^2 <= sigma2`.
    pub fn additive_bounded(sigma2: f64) -> Self {
        Self {
            d1: sigma2,
            ..Self::zero()
        }
    }

    /// Relative noise: `E||eps_k||^2 <= sigma2 ||g_k||^2`.
    pub fn relative(sigma2: f64) -> Self {
        Self {
            b1: sigma2,
            ..Self::zero()
        }
    }

    /// Finite-sum sampling with variance at the optimum `sigma_star_f`:
    /// `A1 = 4L`, `D1 = 2 sigma_star_f`.
    pub fn finite_sum_general(l: f64, sigma_star_f: f64) -> Self {
        Self {
            a1: 4.0 * l,
            d1: 2.0 * sigma_star_f,
            ..Self::zero()
        }
    }

    /// Interpolated finite-sum regime (`sigma_star_f = 0`): `A1 = 2L`.
    pub fn finite_sum_interpolated(l: f64) -> Self {
        Self {
            a1: 2.0 * l,
            ..Self::zero()
        }
    }

    /// Strong growth condition, satisfied in particular by randomized
    /// coordinate descent in dimension `d`: `B1 = d - 1`.
    pub fn strong_growth(d: f64) -> Self {
        Self {
            b1: d - 1.0,
            ..Self::zero()
        }
    }

    /// SAGA on an `n`-component finite sum with `L = max_i L_i`:
    /// `A1 = 4L`, `B1 = -1`, `E1 = 2`, `rho = 1/n`, `A2 = 2L/n`.
    pub fn saga(l: f64, n: f64) -> Self {
        Self {
            a1: 4.0 * l,
            b1: -1.0,
            e1: 2.0,
            rho: 1.0 / n,
            a2: 2.0 * l / n,
            ..Self::zero()
        }
    }
}

/// Builds a named noise preset from a parameter map.
///
/// Recognized names: `additive-bounded` (needs `sigma2`), `relative`
/// (`sigma2`), `finite-sum-general` (`l`, `sigma_star_f`),
/// `finite-sum-interpolated` (`l`), `strong-growth` / `rcd` (`d`),
/// `saga` (`l`, `n`).
pub fn noise_preset(name: &str, params: &BTreeMap<String, f64>) -> Result<NoiseModel, SpecError> {
    let need = |key: &str| -> Result<f64, SpecError> {
        params.get(key).copied().ok_or(SpecError::MissingParameter {
            preset: name.to_string(),
            param: key.to_string(),
        })
    };
    let model = match name {
        "additive-bounded" => NoiseModel::additive_bounded(need("sigma2")?),
        "relative" => NoiseModel::relative(need("sigma2")?),
        "finite-sum-general" => NoiseModel::finite_sum_general(need("l")?, need("sigma_star_f")?),
        "finite-sum-interpolated" => NoiseModel::finite_sum_interpolated(need("l")?),
        "strong-growth" | "rcd" => {
            let d = need("d")?;
            if d < 1.0 {
                return Err(SpecError::NoiseModel(format!(
                    "strong-growth requires d >= 1, got {d}"
                )));
            }
            NoiseModel::strong_growth(d)
        }
        "saga" => {
            let n = need("n")?;
            if n < 1.0 {
                return Err(SpecError::NoiseModel(format!("saga requires n >= 1, got {n}")));
            }
            NoiseModel::saga(need("l")?, n)
        }
        other => return Err(SpecError::UnknownPreset(other.to_string())),
    };
    model.validate()?;
    Ok(model)
}

/// A fixed-step linear first-order method in unrolled form:
///
/// ```text
/// x_{k+1} = x_0 + sum_{j <= k} alpha_{k,j} (g_j + eps_j),   k = 0, ..., N-1
/// ```
///
/// Row `k` of the coefficient triangle holds `alpha_{k,0..=k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Method {
    n: usize,
    alpha: Vec<Vec<f64>>,
}

impl Method {
    pub fn new(n: usize, alpha: Vec<Vec<f64>>) -> Result<Self, SpecError> {
        if n == 0 {
            return Err(SpecError::Method("iteration count N must be >= 1".into()));
        }
        if alpha.len() != n {
            return Err(SpecError::Method(format!(
                "coefficient triangle must have {n} rows, got {}",
                alpha.len()
            )));
        }
        for (k, row) in alpha.iter().enumerate() {
            if row.len() != k + 1 {
                return Err(SpecError::Method(format!(
                    "row {k} must have {} coefficients, got {}",
                    k + 1,
                    row.len()
                )));
            }
            if row.iter().any(|a| !a.is_finite()) {
                return Err(SpecError::Method(format!("row {k} has a non-finite coefficient")));
            }
        }
        Ok(Self { n, alpha })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Coefficient `alpha_{k,j}`, `j <= k < N`.
    pub fn alpha(&self, k: usize, j: usize) -> f64 {
        self.alpha[k][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.alpha
    }
}

/// SGD with per-step sizes, unrolled into [`Method`] form:
/// `x_{k+1} = x_k - steps[k] (g_k + eps_k)` becomes
/// `alpha_{k,j} = -steps[j]` for all `j <= k`.
pub fn sgd_method(n: usize, steps: &[f64]) -> Result<Method, SpecError> {
    if steps.len() != n {
        return Err(SpecError::Method(format!(
            "expected {n} stepsizes, got {}",
            steps.len()
        )));
    }
    let alpha = (0..n)
        .map(|k| steps[..=k].iter().map(|s| -s).collect())
        .collect();
    Method::new(n, alpha)
}

/// Constant-stepsize SGD over `n` iterations.
pub fn sgd_constant(n: usize, step: f64) -> Result<Method, SpecError> {
    sgd_method(n, &vec![step; n])
}

/// Which exponent the middle element of the silver schedule uses.
///
/// The printed recursion puts `1 + (1 + sqrt(2))^{j-1}` in the middle, which
/// gives a middle step of 2 at `k = 2`. `Shifted` uses exponent `j` instead,
/// growing the middle steps faster. Default is `AsPrinted`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SilverExponent {
    #[default]
    AsPrinted,
    Shifted,
}

/// The silver stepsize schedule of length `2^k - 1`, built recursively:
/// `[sqrt(2)]` for `k = 1`, then `sched <- [sched, middle_j, sched]` for
/// `j = 1, ..., k-1`.
pub fn silver_schedule(k: usize) -> Result<Vec<f64>, SpecError> {
    silver_schedule_with(k, SilverExponent::AsPrinted)
}

pub fn silver_schedule_with(k: usize, exponent: SilverExponent) -> Result<Vec<f64>, SpecError> {
    if k == 0 {
        return Err(SpecError::Schedule("silver schedule requires k >= 1".into()));
    }
    let rho = 1.0 + std::f64::consts::SQRT_2;
    let mut sched = vec![std::f64::consts::SQRT_2];
    for j in 1..k {
        let exp = match exponent {
            SilverExponent::AsPrinted => (j - 1) as i32,
            SilverExponent::Shifted => j as i32,
        };
        let middle = 1.0 + rho.powi(exp);
        let mut next = Vec::with_capacity(2 * sched.len() + 1);
        next.extend_from_slice(&sched);
        next.push(middle);
        next.extend_from_slice(&sched);
        sched = next;
    }
    Ok(sched)
}

/// Named performance measures on the final state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerfKind {
    /// `E[f(x_N) - f_*]`
    FGap,
    /// `E[||x_N - x_*||^2]`
    DistanceSq,
    /// `E[||x_N - x_*||^2 + coeff * sigma_N^2]`
    DistanceSqPlusSigma { coeff: f64 },
}

/// A Gram-representable performance measure to maximize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerformanceMeasure {
    pub kind: PerfKind,
}

impl PerformanceMeasure {
    pub fn fgap() -> Self {
        Self { kind: PerfKind::FGap }
    }

    pub fn distance_sq() -> Self {
        Self {
            kind: PerfKind::DistanceSq,
        }
    }

    pub fn distance_sq_plus_sigma(coeff: f64) -> Self {
        Self {
            kind: PerfKind::DistanceSqPlusSigma { coeff },
        }
    }

    pub fn uses_sigma(&self) -> bool {
        matches!(self.kind, PerfKind::DistanceSqPlusSigma { .. })
    }
}

/// Named initial conditions on the deterministic starting state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitKind {
    /// `||x_0 - x_*||^2 <= bound`
    DistanceSq,
    /// `||x_0 - x_*||^2 + coeff * sigma_0^2 <= bound`
    DistanceSqPlusSigma { coeff: f64 },
}

/// A Gram-representable initial condition `expression <= bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCondition {
    pub kind: InitKind,
    pub bound: f64,
}

impl InitialCondition {
    pub fn distance_sq(bound: f64) -> Self {
        Self {
            kind: InitKind::DistanceSq,
            bound,
        }
    }

    pub fn distance_sq_plus_sigma(coeff: f64, bound: f64) -> Self {
        Self {
            kind: InitKind::DistanceSqPlusSigma { coeff },
            bound,
        }
    }

    pub fn uses_sigma(&self) -> bool {
        matches!(self.kind, InitKind::DistanceSqPlusSigma { .. })
    }
}

/// A complete, validated problem description: method, function class, noise
/// model, initial condition, and performance measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub method: Method,
    pub fclass: FunctionClass,
    pub noise: NoiseModel,
    pub init: InitialCondition,
    pub perf: PerformanceMeasure,
}

impl ProblemSpec {
    pub fn new(
        method: Method,
        fclass: FunctionClass,
        noise: NoiseModel,
        init: InitialCondition,
        perf: PerformanceMeasure,
    ) -> Result<Self, SpecError> {
        noise.validate()?;
        if !init.bound.is_finite() {
            return Err(SpecError::Problem("initial-condition bound must be finite".into()));
        }
        Ok(Self {
            method,
            fclass,
            noise,
            init,
            perf,
        })
    }

    pub fn n(&self) -> usize {
        self.method.n()
    }

    /// Whether any part of the problem references the sigma sequence; decides
    /// whether the Gram layout carries sigma vectors.
    pub fn tracks_sigma(&self) -> bool {
        !self.noise.is_sigma_free() || self.init.uses_sigma() || self.perf.uses_sigma()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn function_class_rejects_mu_not_below_l() {
        assert!(FunctionClass::new(1.0, 1.0).is_err());
        assert!(FunctionClass::new(2.0, 1.0).is_err());
        assert!(FunctionClass::new(0.0, 0.0).is_err());
        assert!(FunctionClass::new(0.5, f64::INFINITY).is_ok());
    }

    #[test]
    fn sgd_single_step_unrolls() {
        let m = sgd_method(1, &[1.0]).unwrap();
        assert_eq!(m.alpha(0, 0), -1.0);
    }

    #[test]
    fn sgd_two_steps_telescope() {
        let (a, b) = (0.3, 0.7);
        let m = sgd_method(2, &[a, b]).unwrap();
        assert_eq!(m.alpha(0, 0), -a);
        assert_eq!(m.alpha(1, 0), -a);
        assert_eq!(m.alpha(1, 1), -b);
    }

    #[test]
    fn sgd_silver_three_steps() {
        let l = 2.0;
        let steps: Vec<f64> = silver_schedule(2).unwrap().iter().map(|s| s / l).collect();
        let m = sgd_method(3, &steps).unwrap();
        for k in 0..3 {
            for j in 0..=k {
                assert_eq!(m.alpha(k, j), -steps[j]);
            }
        }
        assert!((m.alpha(2, 0) + SQRT2 / l).abs() < 1e-15);
        assert!((m.alpha(2, 1) + 2.0 / l).abs() < 1e-15);
        assert!((m.alpha(2, 2) + SQRT2 / l).abs() < 1e-15);
    }

    #[test]
    fn sgd_rejects_length_mismatch() {
        assert!(sgd_method(2, &[1.0]).is_err());
    }

    #[test]
    fn silver_matches_printed_recursion() {
        assert_eq!(silver_schedule(1).unwrap(), vec![SQRT2]);
        let s2 = silver_schedule(2).unwrap();
        assert_eq!(s2.len(), 3);
        assert!((s2[0] - SQRT2).abs() < 1e-15);
        assert!((s2[1] - 2.0).abs() < 1e-15);
        assert!((s2[2] - SQRT2).abs() < 1e-15);
        let s3 = silver_schedule(3).unwrap();
        let expected = [SQRT2, 2.0, SQRT2, 2.0 + SQRT2, SQRT2, 2.0, SQRT2];
        assert_eq!(s3.len(), 7);
        for (got, want) in s3.iter().zip(expected.iter()) {
            assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
        }
    }

    #[test]
    fn silver_rejects_k_zero() {
        assert!(silver_schedule(0).is_err());
    }

    #[test]
    fn silver_palindromic_with_length_pow2_minus_1() {
        for k in 1..=5 {
            let s = silver_schedule(k).unwrap();
            assert_eq!(s.len(), (1 << k) - 1);
            let rev: Vec<f64> = s.iter().rev().copied().collect();
            assert_eq!(s, rev);
        }
    }

    #[test]
    fn silver_shifted_variant_grows_faster() {
        let s = silver_schedule_with(2, SilverExponent::Shifted).unwrap();
        assert!((s[1] - (2.0 + SQRT2)).abs() < 1e-15);
    }

    #[test]
    fn preset_additive_bounded() {
        let mut p = BTreeMap::new();
        p.insert("sigma2".to_string(), 0.01);
        let m = noise_preset("additive-bounded", &p).unwrap();
        assert_eq!(m.d1, 0.01);
        assert_eq!(
            (m.a1, m.b1, m.c1, m.e1, m.a2, m.b2, m.c2, m.d2, m.rho),
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        );
        assert!(m.is_sigma_free());
    }

    #[test]
    fn preset_strong_growth() {
        let mut p = BTreeMap::new();
        p.insert("d".to_string(), 10.0);
        let m = noise_preset("strong-growth", &p).unwrap();
        assert_eq!(m.b1, 9.0);
        assert_eq!(m.d1, 0.0);
    }

    #[test]
    fn preset_saga() {
        let mut p = BTreeMap::new();
        p.insert("l".to_string(), 1.0);
        p.insert("n".to_string(), 10.0);
        let m = noise_preset("saga", &p).unwrap();
        assert_eq!(m.a1, 4.0);
        assert_eq!(m.b1, -1.0);
        assert_eq!(m.e1, 2.0);
        assert!((m.rho - 0.1).abs() < 1e-15);
        assert!((m.a2 - 0.2).abs() < 1e-15);
        assert!(!m.is_sigma_free());
    }

    #[test]
    fn preset_errors() {
        let p = BTreeMap::new();
        assert!(matches!(
            noise_preset("no-such", &p),
            Err(SpecError::UnknownPreset(_))
        ));
        assert!(matches!(
            noise_preset("additive-bounded", &p),
            Err(SpecError::MissingParameter { .. })
        ));
    }

    #[test]
    fn presets_respect_rho_bound() {
        for (name, params) in [
            ("additive-bounded", vec![("sigma2", 0.5)]),
            ("relative", vec![("sigma2", 0.5)]),
            ("finite-sum-general", vec![("l", 2.0), ("sigma_star_f", 0.1)]),
            ("finite-sum-interpolated", vec![("l", 2.0)]),
            ("strong-growth", vec![("d", 4.0)]),
            ("saga", vec![("l", 2.0), ("n", 5.0)]),
        ] {
            let map: BTreeMap<String, f64> =
                params.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            let m = noise_preset(name, &map).unwrap();
            assert!(m.rho <= 1.0, "{name} violates rho <= 1");
        }
    }

    #[test]
    fn spec_tracks_sigma_from_any_component() {
        let method = sgd_constant(1, 1.0).unwrap();
        let fc = FunctionClass::new(0.1, 1.0).unwrap();
        let spec = ProblemSpec::new(
            method.clone(),
            fc,
            NoiseModel::additive_bounded(0.01),
            InitialCondition::distance_sq(1.0),
            PerformanceMeasure::distance_sq(),
        )
        .unwrap();
        assert!(!spec.tracks_sigma());

        let spec = ProblemSpec::new(
            method,
            fc,
            NoiseModel::saga(1.0, 10.0),
            InitialCondition::distance_sq_plus_sigma(0.4, 1.0),
            PerformanceMeasure::distance_sq_plus_sigma(0.4),
        )
        .unwrap();
        assert!(spec.tracks_sigma());
    }
}
