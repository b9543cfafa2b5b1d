//! Closed-form capacity quantities: φ, θ, w̄, w̄*, depth regime and φ₀.
//!
//! Layer `l` (1-based) has log term `a_l = ln(n · w_{l-1} · σ²_{S_l})`.
//! The slice-level functions take `ln w_0..ln w_L` and `ln(n σ²_{S_l})` so the
//! planner can evaluate them without building profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphStats;
use crate::propagation::LayerVariances;
use crate::LN_2PI_E;

/// Widths `w_0..w_L`. Entries may be fractional during continuous optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WidthProfile {
    widths: Vec<f64>,
}

impl WidthProfile {
    pub fn new(widths: Vec<f64>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::invalid("a width profile needs w_0 and at least one layer"));
        }
        for (l, &w) in widths.iter().enumerate() {
            if !w.is_finite() || w < 2.0 {
                return Err(Error::invalid(format!("width w_{l} = {w} must be at least 2")));
            }
        }
        Ok(WidthProfile { widths })
    }

    pub fn from_integers(widths: &[usize]) -> Result<Self> {
        Self::new(widths.iter().map(|&w| w as f64).collect())
    }

    /// `w_0 = m`, `w_1..w_{L-1} = hidden`, `w_L = classes`.
    pub fn uniform(m: usize, hidden: usize, classes: usize, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::invalid("depth must be at least 1"));
        }
        let mut w = vec![m as f64];
        w.extend(std::iter::repeat_n(hidden as f64, depth - 1));
        w.push(classes as f64);
        Self::new(w)
    }

    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn log_widths(&self) -> Vec<f64> {
        self.widths.iter().map(|w| w.ln()).collect()
    }

    /// Integer widths if every entry is integral.
    pub fn as_integers(&self) -> Option<Vec<usize>> {
        self.widths
            .iter()
            .map(|&w| (w.fract() == 0.0).then_some(w as usize))
            .collect()
    }

    pub fn parameter_count(&self) -> f64 {
        self.widths.windows(2).map(|p| p[0] * p[1]).sum()
    }
}

impl TryFrom<Vec<f64>> for WidthProfile {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<WidthProfile> for Vec<f64> {
    fn from(p: WidthProfile) -> Self {
        p.widths
    }
}

/// Mean and variance of the weight entries of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightMoments {
    pub mean: f64,
    pub variance: f64,
}

impl WeightMoments {
    pub const UNIT: WeightMoments = WeightMoments { mean: 0.0, variance: 1.0 };

    pub fn second_moment(&self) -> f64 {
        self.variance + self.mean * self.mean
    }

    fn validate(&self) -> Result<()> {
        if !(self.mean.is_finite() && self.variance.is_finite() && self.variance >= 0.0) {
            return Err(Error::invalid("weight moments must be finite with variance >= 0"));
        }
        if self.second_moment() <= 0.0 {
            return Err(Error::invalid("weight second moment must be positive"));
        }
        Ok(())
    }
}

impl Default for WeightMoments {
    fn default() -> Self {
        Self::UNIT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// θ grows with depth.
    Wide,
    /// θ shrinks with depth.
    Narrow,
}

/// One layer of the capacity breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerTerm {
    /// `ln(n w_{l-1} σ²_{S_l})`.
    pub log_term: f64,
    /// `ln(w_{l-1} w_l / (w_{l-1} + w_l))`.
    pub mutual_information: f64,
    /// `a_l / (ln 2πe + Σ_{o≤l} a_o)`.
    pub retention_ratio: f64,
    /// This layer's share of φ, `a_l / 2`.
    pub capacity_increment: f64,
    /// This layer's share of φ₀.
    pub phi0_contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub phi: f64,
    pub phi0: f64,
    pub theta: f64,
    pub wbar: f64,
    pub wbar_star: f64,
    pub kbar: f64,
    pub regime: Regime,
    pub per_layer: Vec<LayerTerm>,
}

fn check_inputs(stats: &GraphStats, vars: &LayerVariances, prof: &WidthProfile) -> Result<()> {
    if vars.depth() != prof.depth() {
        return Err(Error::invalid(format!(
            "profile has {} layers but {} layer variances were given",
            prof.depth(),
            vars.depth()
        )));
    }
    if vars.n() != stats.n {
        return Err(Error::invalid(format!(
            "variances were computed for n={} but the graph has n={}",
            vars.n(),
            stats.n
        )));
    }
    let w = prof.widths();
    if w[0] != stats.m as f64 {
        return Err(Error::invalid(format!("w_0 = {} must equal m = {}", w[0], stats.m)));
    }
    if w[w.len() - 1] != stats.num_classes as f64 {
        return Err(Error::invalid(format!(
            "w_L = {} must equal the class count {}",
            w[w.len() - 1],
            stats.num_classes
        )));
    }
    Ok(())
}

/// `a_l = ln w_{l-1} + ln(n σ²_{S_l})` for each layer.
pub fn layer_log_terms(log_widths: &[f64], log_prop: &[f64]) -> Vec<f64> {
    debug_assert_eq!(log_widths.len(), log_prop.len() + 1);
    log_prop.iter().zip(log_widths).map(|(k, lw)| k + lw).collect()
}

/// φ from log widths and `ln(n σ²_{S_l})`.
pub fn phi_from_logs(log_widths: &[f64], log_prop: &[f64]) -> f64 {
    let sum: f64 = log_prop.iter().zip(log_widths).map(|(k, lw)| k + lw).sum();
    0.5 * LN_2PI_E + 0.5 * sum
}

/// `ln w̄ = (1/L) Σ_{l=1..L} ln w_l`.
pub fn log_wbar_from_logs(log_widths: &[f64]) -> f64 {
    let l = log_widths.len() - 1;
    log_widths[1..].iter().sum::<f64>() / l as f64
}

/// `w̄*` from its ingredients: depth, `Σ ln(n σ²_{S_l})`, `ln m`, `ln w_L`.
pub fn width_threshold_from_parts(depth: usize, sum_log_prop: f64, ln_m: f64, ln_wl: f64) -> f64 {
    (1.0 - (LN_2PI_E + ln_m - ln_wl + sum_log_prop) / depth as f64).exp()
}

/// φ₀ from log widths and `ln(n σ²_{S_l})`, with the per-layer terms.
pub fn phi0_terms_from_logs(log_widths: &[f64], log_prop: &[f64]) -> Result<Vec<LayerTerm>> {
    let mut cumulative = LN_2PI_E;
    let mut out = Vec::with_capacity(log_prop.len());
    for (l, &k) in log_prop.iter().enumerate() {
        let a = log_widths[l] + k;
        cumulative += a;
        if cumulative <= 0.0 || !cumulative.is_finite() {
            return Err(Error::RetentionUndefined { layer: l + 1, value: cumulative });
        }
        let retention = a / cumulative;
        let mi = bottleneck_log(log_widths[l], log_widths[l + 1]);
        out.push(LayerTerm {
            log_term: a,
            mutual_information: mi,
            retention_ratio: retention,
            capacity_increment: 0.5 * a,
            phi0_contribution: retention * mi,
        });
    }
    Ok(out)
}

/// φ₀ alone; same error behaviour as [`phi0_terms_from_logs`].
pub fn phi0_from_logs(log_widths: &[f64], log_prop: &[f64]) -> Result<f64> {
    let mut cumulative = LN_2PI_E;
    let mut phi0 = 0.0;
    for (l, &k) in log_prop.iter().enumerate() {
        let a = log_widths[l] + k;
        cumulative += a;
        if cumulative <= 0.0 || !cumulative.is_finite() {
            return Err(Error::RetentionUndefined { layer: l + 1, value: cumulative });
        }
        phi0 += a / cumulative * bottleneck_log(log_widths[l], log_widths[l + 1]);
    }
    Ok(phi0)
}

/// `ln(u v / (u + v))` for `u = e^x`, `v = e^y`, written to stay exact at `u = v = 2`.
fn bottleneck_log(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    lo - (lo - hi).exp().ln_1p()
}

fn log_prop(vars: &LayerVariances) -> Vec<f64> {
    vars.log_propagation().collect()
}

/// Channel capacity φ under unit weight second moments.
pub fn channel_capacity(stats: &GraphStats, vars: &LayerVariances, prof: &WidthProfile) -> Result<f64> {
    check_inputs(stats, vars, prof)?;
    Ok(phi_from_logs(&prof.log_widths(), &log_prop(vars)))
}

/// Channel capacity with per-layer weight moments `(μ_l, σ²_l)`.
pub fn channel_capacity_with_moments(
    stats: &GraphStats,
    vars: &LayerVariances,
    prof: &WidthProfile,
    moments: &[WeightMoments],
) -> Result<f64> {
    check_inputs(stats, vars, prof)?;
    if moments.len() != prof.depth() {
        return Err(Error::invalid("one weight-moment pair is needed per layer"));
    }
    for m in moments {
        m.validate()?;
    }
    let base = phi_from_logs(&prof.log_widths(), &log_prop(vars));
    let extra: f64 = moments.iter().map(|m| m.second_moment().ln()).sum();
    Ok(base + 0.5 * extra)
}

pub fn geometric_mean_width(prof: &WidthProfile) -> f64 {
    log_wbar_from_logs(&prof.log_widths()).exp()
}

/// θ = φ / w̄.
pub fn compression_ratio(phi: f64, prof: &WidthProfile) -> f64 {
    phi / geometric_mean_width(prof)
}

/// Width threshold w̄* maximizing θ at fixed depth.
pub fn width_threshold(stats: &GraphStats, vars: &LayerVariances, prof: &WidthProfile) -> Result<f64> {
    check_inputs(stats, vars, prof)?;
    let w = prof.widths();
    let sum: f64 = vars.log_propagation().sum();
    Ok(width_threshold_from_parts(
        prof.depth(),
        sum,
        w[0].ln(),
        w[w.len() - 1].ln(),
    ))
}

/// Limit of w̄* as depth grows with fixed K̄.
pub fn width_threshold_limit(kbar: f64) -> f64 {
    (1.0 - kbar).exp()
}

pub fn regime_for(kbar: f64, wbar: f64) -> Regime {
    if wbar.ln() > -kbar {
        Regime::Wide
    } else {
        Regime::Narrow
    }
}

pub fn depth_regime(vars: &LayerVariances, prof: &WidthProfile) -> Result<Regime> {
    if vars.depth() != prof.depth() {
        return Err(Error::invalid("profile and variances disagree on depth"));
    }
    Ok(regime_for(vars.kbar(), geometric_mean_width(prof)))
}

/// Approximate `∂θ/∂L` at fixed w̄.
pub fn theta_depth_slope(kbar: f64, wbar: f64) -> f64 {
    (kbar + wbar.ln()) / (2.0 * wbar)
}

/// θ as a function of a continuous w̄ at fixed depth, m, w_L and variances.
pub fn theta_at_wbar(vars: &LayerVariances, m: f64, w_last: f64, wbar: f64) -> f64 {
    let l = vars.depth() as f64;
    let sum: f64 = vars.log_propagation().sum();
    let phi = 0.5 * LN_2PI_E + 0.5 * (sum + m.ln() + l * wbar.ln() - w_last.ln());
    phi / wbar
}

pub struct EffectiveCapacity {
    pub phi0: f64,
    pub per_layer: Vec<LayerTerm>,
}

/// Effective capacity φ₀ with its per-layer breakdown.
pub fn effective_capacity(
    stats: &GraphStats,
    vars: &LayerVariances,
    prof: &WidthProfile,
) -> Result<EffectiveCapacity> {
    check_inputs(stats, vars, prof)?;
    let per_layer = phi0_terms_from_logs(&prof.log_widths(), &log_prop(vars))?;
    let phi0 = per_layer.iter().map(|t| t.phi0_contribution).sum();
    Ok(EffectiveCapacity { phi0, per_layer })
}

/// Diagnostic variant of φ₀ that replaces the cumulative denominator by
/// `ln 2πe + l · a_l`, exact only when every layer has the same log term.
pub fn effective_capacity_constant_approx(
    stats: &GraphStats,
    vars: &LayerVariances,
    prof: &WidthProfile,
) -> Result<f64> {
    check_inputs(stats, vars, prof)?;
    let lw = prof.log_widths();
    let mut phi0 = 0.0;
    for (i, k) in vars.log_propagation().enumerate() {
        let a = lw[i] + k;
        let denom = LN_2PI_E + (i + 1) as f64 * a;
        if denom <= 0.0 {
            return Err(Error::RetentionUndefined { layer: i + 1, value: denom });
        }
        phi0 += a / denom * bottleneck_log(lw[i], lw[i + 1]);
    }
    Ok(phi0)
}

/// Every closed-form quantity for one profile.
pub fn evaluate(stats: &GraphStats, vars: &LayerVariances, prof: &WidthProfile) -> Result<CapacityReport> {
    let phi = channel_capacity(stats, vars, prof)?;
    let eff = effective_capacity(stats, vars, prof)?;
    let wbar = geometric_mean_width(prof);
    let kbar = vars.kbar();
    Ok(CapacityReport {
        phi,
        phi0: eff.phi0,
        theta: phi / wbar,
        wbar,
        wbar_star: width_threshold(stats, vars, prof)?,
        kbar,
        regime: regime_for(kbar, wbar),
        per_layer: eff.per_layer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(n: usize, m: usize, classes: usize) -> GraphStats {
        GraphStats::new(n, m, classes).unwrap()
    }

    #[test]
    fn profile_validation() {
        assert!(WidthProfile::new(vec![4.0]).is_err());
        assert!(WidthProfile::new(vec![4.0, 1.0]).is_err());
        assert!(WidthProfile::new(vec![4.0, f64::NAN]).is_err());
        let p = WidthProfile::uniform(10, 16, 3, 3).unwrap();
        assert_eq!(p.widths(), &[10.0, 16.0, 16.0, 3.0]);
        assert_eq!(p.parameter_count(), 160.0 + 256.0 + 48.0);
        assert_eq!(p.as_integers(), Some(vec![10, 16, 16, 3]));
    }

    #[test]
    fn unit_log_terms_give_the_gaussian_constant() {
        for depth in 1..6 {
            let n = 8;
            let w = 4;
            let vars = LayerVariances::constant(n, 1.0 / (n * w) as f64, depth).unwrap();
            let prof = WidthProfile::uniform(w, w, w, depth).unwrap();
            let phi = channel_capacity(&stats(n, w, w), &vars, &prof).unwrap();
            assert!((phi - 1.418_938_533_204_672_7).abs() < 1e-12);
        }
    }

    #[test]
    fn single_layer_log_term_two() {
        let n = 10;
        let m = 5;
        let sigma2 = std::f64::consts::E.powi(2) / (n * m) as f64;
        let vars = LayerVariances::constant(n, sigma2, 1).unwrap();
        let prof = WidthProfile::from_integers(&[m, 3]).unwrap();
        let phi = channel_capacity(&stats(n, m, 3), &vars, &prof).unwrap();
        assert!((phi - (0.5 * LN_2PI_E + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn compression_ratio_examples() {
        let p = WidthProfile::from_integers(&[7, 4, 4]).unwrap();
        assert_eq!(geometric_mean_width(&p), 4.0);
        assert_eq!(compression_ratio(4.0, &p), 1.0);
        let p = WidthProfile::from_integers(&[7, 2, 8]).unwrap();
        assert!((geometric_mean_width(&p) - 4.0).abs() < 1e-15);
        let p = WidthProfile::from_integers(&[3703, 16]).unwrap();
        assert!((compression_ratio(8.928, &p) - 0.558).abs() < 1e-12);
    }

    #[test]
    fn threshold_single_layer() {
        let vars = LayerVariances::constant(10, 0.1, 1).unwrap();
        let prof = WidthProfile::from_integers(&[6, 6]).unwrap();
        let w = width_threshold(&stats(10, 6, 6), &vars, &prof).unwrap();
        assert!((w - (1.0 - LN_2PI_E).exp()).abs() < 1e-15);
    }

    #[test]
    fn regime_examples() {
        assert_eq!(regime_for(0.0, 2.0), Regime::Wide);
        assert_eq!(regime_for(-2.0, 2.0), Regime::Narrow);
        assert!(theta_depth_slope(0.0, 2.0) > 0.0);
        assert!(theta_depth_slope(-2.0, 2.0) < 0.0);
    }

    #[test]
    fn equal_two_widths_contribute_zero() {
        assert_eq!(bottleneck_log(2f64.ln(), 2f64.ln()), 0.0);
        let vars = LayerVariances::constant(50, 0.3, 3).unwrap();
        let prof = WidthProfile::from_integers(&[2, 2, 8, 2]).unwrap();
        let eff = effective_capacity(&stats(50, 2, 2), &vars, &prof).unwrap();
        assert_eq!(eff.per_layer[0].phi0_contribution, 0.0);
        assert!(eff.per_layer[1].phi0_contribution > 0.0);
    }

    #[test]
    fn single_layer_retention_is_half() {
        let n = 4;
        let sigma2 = LN_2PI_E.exp() / (n * 4) as f64;
        let vars = LayerVariances::constant(n, sigma2, 1).unwrap();
        let prof = WidthProfile::from_integers(&[4, 4]).unwrap();
        let eff = effective_capacity(&stats(n, 4, 4), &vars, &prof).unwrap();
        assert!((eff.per_layer[0].retention_ratio - 0.5).abs() < 1e-15);
        assert!((eff.phi0 - 0.5 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_denominator_names_the_layer() {
        // a_1 = ln(10 · 2 · 0.001) < -ln 2πe
        let vars = LayerVariances::constant(10, 0.001, 2).unwrap();
        let prof = WidthProfile::from_integers(&[2, 4, 2]).unwrap();
        match effective_capacity(&stats(10, 2, 2), &vars, &prof) {
            Err(Error::RetentionUndefined { layer: 1, value }) => assert!(value <= 0.0),
            other => panic!("unexpected {:?}", other.map(|e| e.phi0)),
        }
    }

    #[test]
    fn constant_approximation_matches_when_terms_equal() {
        // identical log terms only for L=1, where both forms coincide
        let vars = LayerVariances::constant(30, 0.2, 1).unwrap();
        let prof = WidthProfile::from_integers(&[12, 5]).unwrap();
        let s = stats(30, 12, 5);
        let exact = effective_capacity(&s, &vars, &prof).unwrap().phi0;
        let approx = effective_capacity_constant_approx(&s, &vars, &prof).unwrap();
        assert!((exact - approx).abs() < 1e-15);
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let vars = LayerVariances::constant(10, 0.1, 2).unwrap();
        let prof = WidthProfile::from_integers(&[6, 6]).unwrap();
        assert!(channel_capacity(&stats(10, 6, 6), &vars, &prof).is_err());
        let prof = WidthProfile::from_integers(&[6, 6, 4]).unwrap();
        assert!(channel_capacity(&stats(10, 7, 4), &vars, &prof).is_err());
        assert!(channel_capacity(&stats(11, 6, 4), &vars, &prof).is_err());
    }

    #[test]
    fn moments_shift_phi() {
        let vars = LayerVariances::constant(10, 0.1, 2).unwrap();
        let prof = WidthProfile::from_integers(&[6, 6, 4]).unwrap();
        let s = stats(10, 6, 4);
        let base = channel_capacity(&s, &vars, &prof).unwrap();
        let m = [WeightMoments { mean: 0.0, variance: 2.0 }, WeightMoments::UNIT];
        let shifted = channel_capacity_with_moments(&s, &vars, &prof, &m).unwrap();
        assert!((shifted - base - 0.5 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn report_is_consistent() {
        let vars = LayerVariances::constant(40, 0.04, 3).unwrap();
        let prof = WidthProfile::from_integers(&[20, 16, 8, 4]).unwrap();
        let r = evaluate(&stats(40, 20, 4), &vars, &prof).unwrap();
        assert!((r.theta * r.wbar - r.phi).abs() < 1e-12 * r.phi.abs());
        assert_eq!(r.per_layer.len(), 3);
        let sum: f64 = r.per_layer.iter().map(|t| t.phi0_contribution).sum();
        assert_eq!(sum, r.phi0);
        let json = serde_json::to_value(&r).unwrap();
        for key in ["phi", "phi0", "theta", "wbar", "wbar_star", "kbar", "regime", "per_layer"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
