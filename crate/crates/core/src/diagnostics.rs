//! Quantities checked against the theory: mass, extrema, `L^k` norms, the
//! weighted functional `∫ u^k exp(β²v² + γ²w²)` and the admissible ranges of
//! the taxis coefficients.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{field_extrema, ScalarField, SimState, NONNEG_SLACK};
use crate::par;
use crate::stepper::{ModelParams, ModelVariant, StepFlags};

/// Shrink factor that keeps the default ε-tuple strictly inside the
/// admissible set.
pub const EPS_SHRINK: f64 = 0.99;
/// Largest exponent accepted inside the weight `exp(β²v² + γ²w²)`.
pub const MAX_WEIGHT_EXPONENT: f64 = 700.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("field has a negative value {0} (beyond the round-off slack)")]
    NegativeValue(f64),
    #[error("exponent k must satisfy {requirement}, got {k}")]
    InvalidExponent { k: f64, requirement: &'static str },
    #[error("{name} = {value} violates the functional's hypothesis {name} < {bound}")]
    OutsideAdmissibleRange {
        name: &'static str,
        value: f64,
        bound: f64,
    },
    #[error("epsilon tuple lies outside the admissible set: {lhs} >= {rhs}")]
    OutsideAdmissibleSet { lhs: f64, rhs: f64 },
    #[error("weight exponent {0} exceeds {MAX_WEIGHT_EXPONENT}; beta/gamma are misconfigured")]
    WeightOverflow(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Default exponent just above `n/2`.
pub fn default_k(dim: usize) -> f64 {
    dim as f64 / 2.0 + 0.5
}

/// `Σ V_c f_c`.
pub fn mass(f: &ScalarField) -> f64 {
    let v = f.values();
    par::sum_indexed(v.len(), |i| v[i]) * f.grid().cell_volume()
}

fn clamp_nonneg(x: f64) -> Result<f64, DiagnosticsError> {
    if x >= 0.0 {
        Ok(x)
    } else if x >= -NONNEG_SLACK {
        Ok(0.0)
    } else {
        Err(DiagnosticsError::NegativeValue(x))
    }
}

/// `(Σ V_c f_c^k)^(1/k)` for nonnegative `f` and `k >= 1`.
pub fn lk_norm(f: &ScalarField, k: f64) -> Result<f64, DiagnosticsError> {
    if !(k >= 1.0 && k.is_finite()) {
        return Err(DiagnosticsError::InvalidExponent {
            k,
            requirement: "k >= 1",
        });
    }
    let (lo, _) = field_extrema(f);
    clamp_nonneg(lo)?;
    let v = f.values();
    let sum = par::sum_indexed(v.len(), |i| v[i].max(0.0).powf(k)) * f.grid().cell_volume();
    Ok(sum.powf(1.0 / k))
}

/// Exponent and ε-parameters of the weighted functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConfig {
    pub k: f64,
    pub eps1_sq: f64,
    pub eps2_sq: f64,
    pub eps3_sq: f64,
    pub eps4_sq: f64,
    pub beta_sq: f64,
    pub gamma_sq: f64,
}

impl LyapunovConfig {
    /// Builds a configuration from explicit ε² values, deriving
    /// `β² = ε₁² / (10 k v_sup²)` and `γ² = ε₃² / (10 k w_sup²)` and checking
    /// `ε₁² + χ(k−1)ε₂²/2 + ε₃² + ξ(k−1)ε₄²/2 < k − 1`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_eps(
        k: f64,
        eps_sq: [f64; 4],
        chi: f64,
        xi: f64,
        v_sup0: f64,
        w_sup0: Option<f64>,
    ) -> Result<Self, DiagnosticsError> {
        if !(k > 1.0 && k.is_finite()) {
            return Err(DiagnosticsError::InvalidExponent {
                k,
                requirement: "k > 1",
            });
        }
        if !(v_sup0 > 0.0) {
            return Err(DiagnosticsError::InvalidInput(format!("v_sup0 must be > 0, got {v_sup0}")));
        }
        let [e1, e2, e3, e4] = eps_sq;
        let lhs = e1 + chi * (k - 1.0) * e2 / 2.0 + e3 + xi * (k - 1.0) * e4 / 2.0;
        if !(lhs < k - 1.0) {
            return Err(DiagnosticsError::OutsideAdmissibleSet { lhs, rhs: k - 1.0 });
        }
        let beta_sq = e1 / (10.0 * k * v_sup0 * v_sup0);
        let gamma_sq = match w_sup0 {
            Some(w) if w > 0.0 => e3 / (10.0 * k * w * w),
            _ => 0.0,
        };
        Ok(Self {
            k,
            eps1_sq: e1,
            eps2_sq: e2,
            eps3_sq: e3,
            eps4_sq: e4,
            beta_sq,
            gamma_sq,
        })
    }

    /// Upper bound `b = exp(β² v_sup² + γ² w_sup²)` of the weight.
    pub fn weight_bound(&self, v_sup0: f64, w_sup0: Option<f64>) -> f64 {
        let w = w_sup0.unwrap_or(0.0);
        (self.beta_sq * v_sup0 * v_sup0 + self.gamma_sq * w * w).exp()
    }
}

/// ε₁² = ε₃² = 0.99 (k−1)/4, ε₂² = 0.99/(2χ), ε₄² = 0.99/(2ξ); the `w`
/// terms are dropped for the attraction-only model.
///
/// Fails when χ or ξ is not below `1/(10 k sup)`.
pub fn default_lyapunov_config(
    params: &ModelParams,
    dim: usize,
    v_sup0: f64,
    w_sup0: Option<f64>,
    k: f64,
) -> Result<LyapunovConfig, DiagnosticsError> {
    if !(k > dim as f64 / 2.0) {
        return Err(DiagnosticsError::InvalidExponent {
            k,
            requirement: "k > n/2",
        });
    }
    let chi_bound = 1.0 / (10.0 * k * v_sup0);
    if !(params.chi < chi_bound) {
        return Err(DiagnosticsError::OutsideAdmissibleRange {
            name: "chi",
            value: params.chi,
            bound: chi_bound,
        });
    }
    // Any positive ε₂ (ε₄) is admissible when χ (ξ) vanishes.
    let split = |coef: f64| if coef > 0.0 { EPS_SHRINK / (2.0 * coef) } else { 1.0 };
    let eps1 = EPS_SHRINK * (k - 1.0) / 4.0;
    let eps2 = split(params.chi);
    let (xi, eps3, eps4) = match (params.variant, w_sup0) {
        (ModelVariant::AttractionRepulsion, Some(w_sup)) => {
            let xi_bound = 1.0 / (10.0 * k * w_sup);
            if !(params.xi < xi_bound) {
                return Err(DiagnosticsError::OutsideAdmissibleRange {
                    name: "xi",
                    value: params.xi,
                    bound: xi_bound,
                });
            }
            (params.xi, eps1, split(params.xi))
        }
        (ModelVariant::AttractionRepulsion, None) => {
            return Err(DiagnosticsError::InvalidInput(
                "attraction-repulsion model needs w_sup0".into(),
            ))
        }
        (ModelVariant::AttractionOnly, _) => (0.0, 0.0, 0.0),
    };
    LyapunovConfig::from_eps(k, [eps1, eps2, eps3, eps4], params.chi, xi, v_sup0, w_sup0)
}

/// `Σ V_c u_c^k exp(β² v_c² + γ² w_c²)`.
pub fn lyapunov(state: &SimState, cfg: &LyapunovConfig) -> Result<f64, DiagnosticsError> {
    let (u_lo, _) = field_extrema(&state.u);
    clamp_nonneg(u_lo)?;
    let v = state.v.values();
    let w = state.w.as_ref().map(|w| w.values());
    let exponent = |c: usize| {
        let wc = w.map_or(0.0, |w| w[c]);
        cfg.beta_sq * v[c] * v[c] + cfg.gamma_sq * wc * wc
    };
    let n = v.len();
    let max_exp = par::max_indexed(n, exponent);
    if max_exp > MAX_WEIGHT_EXPONENT {
        return Err(DiagnosticsError::WeightOverflow(max_exp));
    }
    let u = state.u.values();
    let k = cfg.k;
    Ok(par::sum_indexed(n, |c| u[c].max(0.0).powf(k) * exponent(c).exp()) * state.grid().cell_volume())
}

/// Coefficient ranges implied by the theory, for dimension `n` and initial
/// signal maxima.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub n: usize,
    pub v_sup0: f64,
    pub w_sup0: Option<f64>,
    /// `1/(5 n v_sup)`: global boundedness for the attraction-repulsion model.
    pub chi_max_theorem: f64,
    /// `1/(5 n w_sup)`.
    pub xi_max_theorem: Option<f64>,
    /// `2/(3 n v_sup)`: improved range for the attraction-only model.
    pub chi_interval_attraction_only: f64,
    /// `2/(5 n v_sup)`: limit of the attraction-repulsion range as ξ → 0.
    pub chi_sup_limit_attr_rep: f64,
    /// `1/(6 (n+1) v_sup)`.
    pub reference_taoboun: f64,
    /// `π / (v_sup sqrt(2 (n+1)))`.
    pub reference_baghaei: f64,
}

impl ThresholdReport {
    /// `1/(10 k v_sup)`: χ range of the `L^k` estimate.
    pub fn chi_max_lemma(&self, k: f64) -> f64 {
        1.0 / (10.0 * k * self.v_sup0)
    }

    /// `1/(10 k w_sup)`.
    pub fn xi_max_lemma(&self, k: f64) -> Option<f64> {
        self.w_sup0.map(|w| 1.0 / (10.0 * k * w))
    }

    /// Strict nesting `chi_max_theorem < chi_sup_limit_attr_rep <
    /// chi_interval_attraction_only`.
    pub fn ordering_holds(&self) -> bool {
        self.chi_max_theorem < self.chi_sup_limit_attr_rep
            && self.chi_sup_limit_attr_rep < self.chi_interval_attraction_only
    }
}

pub fn thresholds(n: usize, v_sup0: f64, w_sup0: Option<f64>) -> Result<ThresholdReport, DiagnosticsError> {
    if n == 0 {
        return Err(DiagnosticsError::InvalidInput("dimension must be positive".into()));
    }
    let positive = |x: f64| x > 0.0 && x.is_finite();
    if !positive(v_sup0) || w_sup0.is_some_and(|w| !positive(w)) {
        return Err(DiagnosticsError::InvalidInput("signal maxima must be positive and finite".into()));
    }
    let nf = n as f64;
    Ok(ThresholdReport {
        n,
        v_sup0,
        w_sup0,
        chi_max_theorem: 1.0 / (5.0 * nf * v_sup0),
        xi_max_theorem: w_sup0.map(|w| 1.0 / (5.0 * nf * w)),
        chi_interval_attraction_only: 2.0 / (3.0 * nf * v_sup0),
        chi_sup_limit_attr_rep: 2.0 / (5.0 * nf * v_sup0),
        reference_taoboun: 1.0 / (6.0 * (nf + 1.0) * v_sup0),
        reference_baghaei: std::f64::consts::PI / (v_sup0 * (2.0 * (nf + 1.0)).sqrt()),
    })
}

/// One row of the diagnostics series.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass_u: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub min_w: Option<f64>,
    pub max_w: Option<f64>,
    pub lk_u: f64,
    pub lyapunov: Option<f64>,
    pub flags: StepFlags,
}

pub const CSV_COLUMNS: [&str; 11] = [
    "t", "mass_u", "min_u", "max_u", "min_v", "max_v", "min_w", "max_w", "lk_u", "lyapunov", "flags",
];

fn fmt_num(x: f64) -> String {
    format!("{x:.14e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

impl DiagnosticsRecord {
    /// Fields in [`CSV_COLUMNS`] order; numbers carry 15 significant digits,
    /// absent values are empty.
    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            fmt_num(self.t),
            fmt_num(self.mass_u),
            fmt_num(self.min_u),
            fmt_num(self.max_u),
            fmt_num(self.min_v),
            fmt_num(self.max_v),
            fmt_opt(self.min_w),
            fmt_opt(self.max_w),
            fmt_num(self.lk_u),
            fmt_opt(self.lyapunov),
            self.flags.names().join(";"),
        ]
    }

    pub fn from_csv_fields<S: AsRef<str>>(fields: &[S]) -> Result<Self, DiagnosticsError> {
        if fields.len() != CSV_COLUMNS.len() {
            return Err(DiagnosticsError::InvalidInput(format!(
                "expected {} columns, got {}",
                CSV_COLUMNS.len(),
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<f64, DiagnosticsError> {
            let s = fields[i].as_ref().trim();
            s.parse::<f64>()
                .map_err(|_| DiagnosticsError::InvalidInput(format!("column {}: bad number {s:?}", CSV_COLUMNS[i])))
        };
        let opt = |i: usize| -> Result<Option<f64>, DiagnosticsError> {
            if fields[i].as_ref().trim().is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let mut flags = StepFlags::default();
        for name in fields[10].as_ref().split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let set = StepFlags::parse(name)
                .ok_or_else(|| DiagnosticsError::InvalidInput(format!("unknown flag {name:?}")))?;
            set(&mut flags);
        }
        Ok(Self {
            t: num(0)?,
            mass_u: num(1)?,
            min_u: num(2)?,
            max_u: num(3)?,
            min_v: num(4)?,
            max_v: num(5)?,
            min_w: opt(6)?,
            max_w: opt(7)?,
            lk_u: num(8)?,
            lyapunov: opt(9)?,
            flags,
        })
    }
}

/// Diagnostics row for `state`.
pub fn record(
    state: &SimState,
    k: f64,
    lyapunov_cfg: Option<&LyapunovConfig>,
    flags: StepFlags,
) -> Result<DiagnosticsRecord, DiagnosticsError> {
    let (min_u, max_u) = field_extrema(&state.u);
    let (min_v, max_v) = field_extrema(&state.v);
    let w_ext = state.w.as_ref().map(field_extrema);
    Ok(DiagnosticsRecord {
        t: state.t,
        mass_u: mass(&state.u),
        min_u,
        max_u,
        min_v,
        max_v,
        min_w: w_ext.map(|e| e.0),
        max_w: w_ext.map(|e| e.1),
        lk_u: lk_norm(&state.u, k)?,
        lyapunov: lyapunov_cfg.map(|cfg| lyapunov(state, cfg)).transpose()?,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{init_field, InitialData};
    use crate::geometry::{build_grid, DomainSpec, Grid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn unit_box(n: usize) -> Arc<Grid> {
        Arc::new(build_grid(&DomainSpec::boxed(&[0.0, 0.0], &[1.0, 1.0]), &[n, n]).unwrap())
    }

    #[test]
    fn mass_examples() {
        let g = unit_box(10);
        assert!((mass(&ScalarField::constant(Arc::clone(&g), 2.0)) - 2.0).abs() < 1e-13);
        assert_eq!(mass(&ScalarField::zeros(Arc::clone(&g))), 0.0);
        // ∫ 20 exp(-30 r²) over the plane is 20π/30; tails beyond [-1,1]² are ~e^-30.
        let fine = Arc::new(build_grid(&DomainSpec::boxed(&[-1.0, -1.0], &[1.0, 1.0]), &[400, 400]).unwrap());
        let f = init_field(&fine, &InitialData::gaussian(20.0, 30.0, &[0.0, 0.0])).unwrap();
        let exact = 20.0 * std::f64::consts::PI / 30.0;
        assert!((mass(&f) - exact).abs() / exact < 1e-6, "{}", mass(&f));
    }

    #[test]
    fn lk_norm_examples() {
        let g = unit_box(8);
        let c = ScalarField::constant(Arc::clone(&g), 3.0);
        assert!((lk_norm(&c, 2.5).unwrap() - 3.0).abs() < 1e-13);
        let gauss = init_field(&g, &InitialData::gaussian(2.0, 3.0, &[0.5, 0.5])).unwrap();
        assert!((lk_norm(&gauss, 1.0).unwrap() - mass(&gauss)).abs() < 1e-14);
        // Two cells of volume 0.5: (0.5 * 1 + 0.5 * 4)^(1/2).
        let wide = Arc::new(Grid::from_predicate(&[0.0, 0.0], &[1.0, 2.0], &[2, 2], |x| x[1] < 1.0).unwrap());
        assert_eq!(wide.cell_volume(), 0.5);
        let f = ScalarField::from_values(wide, vec![1.0, 2.0]).unwrap();
        assert!((lk_norm(&f, 2.0).unwrap() - 2.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn lk_norm_rejects_negative_and_small_k() {
        let g = unit_box(3);
        assert!(matches!(
            lk_norm(&ScalarField::constant(Arc::clone(&g), -1e-6), 2.0),
            Err(DiagnosticsError::NegativeValue(_))
        ));
        assert!(lk_norm(&ScalarField::constant(Arc::clone(&g), -1e-13), 2.0).is_ok());
        assert!(lk_norm(&ScalarField::constant(g, 1.0), 0.5).is_err());
    }

    #[test]
    fn default_config_values() {
        let k = 2.0;
        let chi = 0.001;
        let p = ModelParams::attraction_repulsion(chi, chi, 1e-3, 1.0);
        let cfg = default_lyapunov_config(&p, 3, 1.0, Some(1.0), k).unwrap();
        assert!((cfg.eps1_sq - 0.2475).abs() < 1e-15);
        assert!((cfg.eps3_sq - 0.2475).abs() < 1e-15);
        assert!((cfg.eps2_sq - 0.99 / (2.0 * chi)).abs() < 1e-9);
        let lhs = cfg.eps1_sq + chi * (k - 1.0) * cfg.eps2_sq / 2.0 + cfg.eps3_sq + chi * (k - 1.0) * cfg.eps4_sq / 2.0;
        assert!(lhs < k - 1.0);
        assert!((cfg.beta_sq - 0.2475 / 20.0).abs() < 1e-15);
        let only = default_lyapunov_config(&ModelParams::attraction_only(chi, 1e-3, 1.0), 2, 1.0, None, k).unwrap();
        assert_eq!((only.eps3_sq, only.eps4_sq, only.gamma_sq), (0.0, 0.0, 0.0));
    }

    #[test]
    fn default_config_rejects_large_coefficients() {
        let k = 2.0;
        let bound = 1.0 / (10.0 * k * 2.0);
        let p = ModelParams::attraction_repulsion(bound, 0.0, 1e-3, 1.0);
        assert!(matches!(
            default_lyapunov_config(&p, 2, 2.0, Some(1.0), k),
            Err(DiagnosticsError::OutsideAdmissibleRange { name: "chi", .. })
        ));
        let p = ModelParams::attraction_repulsion(0.0, 1.0, 1e-3, 1.0);
        assert!(matches!(
            default_lyapunov_config(&p, 2, 2.0, Some(1.0), k),
            Err(DiagnosticsError::OutsideAdmissibleRange { name: "xi", .. })
        ));
        let p = ModelParams::attraction_only(0.001, 1e-3, 1.0);
        assert!(default_lyapunov_config(&p, 3, 1.0, None, 1.5).is_err());
        assert!(matches!(
            LyapunovConfig::from_eps(2.0, [0.5, 1.0, 0.5, 1.0], 0.1, 0.1, 1.0, Some(1.0)),
            Err(DiagnosticsError::OutsideAdmissibleSet { .. })
        ));
    }

    fn state_with(g: &Arc<Grid>, u: f64, v: f64, w: Option<f64>) -> SimState {
        let c = |x| ScalarField::constant(Arc::clone(g), x);
        SimState::new(c(u), c(v), w.map(c)).unwrap()
    }

    #[test]
    fn lyapunov_constants() {
        let g = unit_box(6);
        let p = ModelParams::attraction_repulsion(0.01, 0.01, 1e-3, 1.0);
        let cfg = default_lyapunov_config(&p, 2, 1.0, Some(1.0), 2.0).unwrap();
        let s = state_with(&g, 1.0, 0.0, Some(0.0));
        assert!((lyapunov(&s, &cfg).unwrap() - 1.0).abs() < 1e-13);
        let c = 0.7;
        let s = state_with(&g, 1.0, c, Some(0.0));
        assert!((lyapunov(&s, &cfg).unwrap() - (cfg.beta_sq * c * c).exp()).abs() < 1e-13);
    }

    #[test]
    fn lyapunov_overflow_is_an_error() {
        let g = unit_box(3);
        let cfg = LyapunovConfig {
            k: 2.0,
            eps1_sq: 0.1,
            eps2_sq: 0.1,
            eps3_sq: 0.0,
            eps4_sq: 0.0,
            beta_sq: 10.0,
            gamma_sq: 0.0,
        };
        let s = state_with(&g, 1.0, 10.0, None);
        assert!(matches!(lyapunov(&s, &cfg), Err(DiagnosticsError::WeightOverflow(_))));
    }

    #[test]
    fn lyapunov_sandwich_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = Arc::new(build_grid(&DomainSpec::disk([0.0, 0.0], 1.0), &[20, 20]).unwrap());
        let n = g.num_active();
        for _ in 0..50 {
            let mut rand_field = |hi: f64| {
                ScalarField::from_values(Arc::clone(&g), (0..n).map(|_| rng.random_range(0.0..hi)).collect()).unwrap()
            };
            let (u, v, w) = (rand_field(30.0), rand_field(20.0), rand_field(5.0));
            let s = SimState::new(u, v, Some(w)).unwrap();
            let k = rng.random_range(1.01..3.0);
            let p = ModelParams::attraction_repulsion(0.001, 0.001, 1e-3, 1.0);
            let cfg = default_lyapunov_config(&p, 2, s.v_sup0(), s.w_sup0(), k).unwrap();
            let e = lyapunov(&s, &cfg).unwrap();
            let lk = lk_norm(&s.u, k).unwrap().powf(k);
            let b = cfg.weight_bound(s.v_sup0(), s.w_sup0());
            assert!(e >= lk * (1.0 - 1e-13) && e <= b * lk * (1.0 + 1e-13));
        }
    }

    #[test]
    fn threshold_values() {
        let r = thresholds(3, 20.0, Some(20.0)).unwrap();
        assert!((r.chi_max_theorem - 1.0 / 300.0).abs() < 1e-15);
        assert_eq!(r.xi_max_theorem, Some(r.chi_max_theorem));
        assert!((r.reference_baghaei - 0.055536).abs() < 5e-7);
        let r2 = thresholds(2, 1.0, None).unwrap();
        assert!((r2.chi_interval_attraction_only - 1.0 / 3.0).abs() < 1e-15);
        assert!((r2.chi_max_lemma(1.5) - 1.0 / 15.0).abs() < 1e-15);
        assert_eq!(r2.xi_max_lemma(1.5), None);
        assert!((r2.reference_taoboun - 1.0 / 18.0).abs() < 1e-15);
        assert!(thresholds(2, 0.0, None).is_err());
        assert!(thresholds(2, 1.0, Some(-1.0)).is_err());
    }

    #[test]
    fn threshold_ordering_for_many_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 2..=8 {
            for _ in 0..20 {
                let v = 10f64.powf(rng.random_range(-3.0..3.0));
                assert!(thresholds(n, v, Some(v)).unwrap().ordering_holds());
            }
        }
    }

    #[test]
    fn record_csv_round_trip() {
        let g = unit_box(4);
        let s = state_with(&g, 2.0, 1.0, None);
        let flags = StepFlags {
            cfl_clamped: true,
            ..StepFlags::default()
        };
        let rec = record(&s, 1.5, None, flags).unwrap();
        let fields = rec.csv_fields();
        assert_eq!(fields[6], "");
        assert_eq!(fields[10], "cfl_clamped");
        let back = DiagnosticsRecord::from_csv_fields(&fields).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * a.abs().max(b.abs());
        assert!(close(back.t, rec.t) && close(back.mass_u, rec.mass_u) && close(back.lk_u, rec.lk_u));
        assert_eq!((back.min_w, back.lyapunov, back.flags), (None, None, rec.flags));
        assert_eq!(back.csv_fields(), fields);
        assert!(DiagnosticsRecord::from_csv_fields(&fields[..5]).is_err());
    }
}
