//! Pointwise risk analysis of the 0-1-c-d loss and its surrogates.
//!
//! Everything here works at a single input `x`, described by its class
//! posterior `(π₊, π₀, π₋)`. The closed forms (optimal regime, surrogate
//! minimizers, the random-relabelling identity) are checked against brute
//! force by the sweep functions, which the `verify-theory` command runs.

use std::fmt;

use rand::Rng;
use rand_distr::{Dirichlet, Distribution};

use crate::error::{Error, Result};
use crate::losses::{loss_01c, loss_01cd, loss_mh, loss_mha, Label, LossParams};
use crate::seed;

/// Tolerance on `π₊ + π₀ + π₋ = 1`.
const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Risk differences at or below this are treated as ties between regimes.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Default grid of rejection costs.
pub const COST_GRID: [f64; 4] = [0.03, 0.06, 0.2, 0.45];

/// Default grid of ambiguity penalties.
pub const AMBIGUITY_GRID: [f64; 4] = [0.03, 0.06, 0.2, 0.5];

/// Class posterior at one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassPosterior {
    plus: f64,
    zero: f64,
    minus: f64,
}

impl ClassPosterior {
    pub fn new(plus: f64, zero: f64, minus: f64) -> Result<Self> {
        let all = [plus, zero, minus];
        if all.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid(format!("posterior ({plus}, {zero}, {minus}) has an entry outside [0, 1]")));
        }
        if ((plus + zero + minus) - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::invalid(format!("posterior ({plus}, {zero}, {minus}) does not sum to 1")));
        }
        Ok(ClassPosterior { plus, zero, minus })
    }

    /// Builds the posterior from `π₊` and `π₋`, with `π₀` taking the rest.
    pub fn from_plus_minus(plus: f64, minus: f64) -> Result<Self> {
        ClassPosterior::new(plus, (1.0 - plus - minus).max(0.0), minus)
    }

    pub fn plus(&self) -> f64 {
        self.plus
    }

    pub fn zero(&self) -> f64 {
        self.zero
    }

    pub fn minus(&self) -> f64 {
        self.minus
    }

    /// The posterior with `π₊` and `π₋` exchanged.
    pub fn mirrored(&self) -> Self {
        ClassPosterior {
            plus: self.minus,
            zero: self.zero,
            minus: self.plus,
        }
    }

    fn weights(&self) -> [(Label, f64); 3] {
        [
            (Label::Positive, self.plus),
            (Label::Ambiguous, self.zero),
            (Label::Negative, self.minus),
        ]
    }

    /// Posterior of the randomly relabelled label `z`: each ambiguous
    /// sample becomes positive or negative with probability ½.
    pub fn relabelled(&self) -> [(Label, f64); 2] {
        [
            (Label::Positive, self.plus + 0.5 * self.zero),
            (Label::Negative, self.minus + 0.5 * self.zero),
        ]
    }
}

impl fmt::Display for ClassPosterior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(π+={:.6}, π0={:.6}, π-={:.6})", self.plus, self.zero, self.minus)
    }
}

/// Pointwise optimal action under the 0-1-c-d loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeLabel {
    AcceptPositive,
    AcceptNegative,
    Reject,
}

impl RegimeLabel {
    pub const ALL: [RegimeLabel; 3] = [RegimeLabel::AcceptPositive, RegimeLabel::AcceptNegative, RegimeLabel::Reject];

    /// The regime a pair `(h, r)` falls into, with the same boundary
    /// convention as the losses (`r ≤ 0` rejects, `h ≤ 0` predicts negative).
    pub fn of(h: f64, r: f64) -> RegimeLabel {
        if r <= 0.0 {
            RegimeLabel::Reject
        } else if h > 0.0 {
            RegimeLabel::AcceptPositive
        } else {
            RegimeLabel::AcceptNegative
        }
    }

    pub fn mirrored(self) -> RegimeLabel {
        match self {
            RegimeLabel::AcceptPositive => RegimeLabel::AcceptNegative,
            RegimeLabel::AcceptNegative => RegimeLabel::AcceptPositive,
            RegimeLabel::Reject => RegimeLabel::Reject,
        }
    }
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RegimeLabel::AcceptPositive => "accept-positive",
            RegimeLabel::AcceptNegative => "accept-negative",
            RegimeLabel::Reject => "reject",
        };
        f.write_str(name)
    }
}

/// Conditional risk of the 0-1-c-d loss for an action in the given regime.
pub fn expected_01cd_risk(posterior: &ClassPosterior, regime: RegimeLabel, c: f64, d: f64) -> f64 {
    let ClassPosterior { plus, zero, minus } = *posterior;
    match regime {
        RegimeLabel::AcceptPositive => d * zero + minus,
        RegimeLabel::AcceptNegative => d * zero + plus,
        RegimeLabel::Reject => c * (plus + minus),
    }
}

/// Closed-form optimal regime. Acceptance wins ties, positive before negative.
pub fn lemma1_optimal_regime(posterior: &ClassPosterior, c: f64, d: f64) -> RegimeLabel {
    let ClassPosterior { plus, minus, .. } = *posterior;
    if plus >= (d + (1.0 - c - d) * minus) / (c + d) {
        RegimeLabel::AcceptPositive
    } else if minus >= (d + (1.0 - c - d) * plus) / (c + d) {
        RegimeLabel::AcceptNegative
    } else {
        RegimeLabel::Reject
    }
}

/// Regime of smallest 0-1-c-d risk, or `None` when the two smallest risks tie.
pub fn brute_force_regime(posterior: &ClassPosterior, c: f64, d: f64) -> Option<RegimeLabel> {
    let mut risks = RegimeLabel::ALL.map(|g| (expected_01cd_risk(posterior, g, c, d), g));
    risks.sort_by(|a, b| a.0.total_cmp(&b.0));
    (risks[1].0 - risks[0].0 > TIE_TOLERANCE).then_some(risks[0].1)
}

/// `h` coordinate of the calibrated acceptance points, `2/(1−4c²)`.
pub fn acceptance_h(c: f64) -> f64 {
    2.0 / (1.0 - 4.0 * c * c)
}

/// `|r|` at the calibrated minimizers, `1/(1+2c)`.
pub fn minimizer_r(c: f64) -> f64 {
    1.0 / (1.0 + 2.0 * c)
}

/// The surrogate minimizer for a regime, under the calibrated parameters.
pub fn regime_point(regime: RegimeLabel, c: f64) -> (f64, f64) {
    match regime {
        RegimeLabel::AcceptPositive => (acceptance_h(c), minimizer_r(c)),
        RegimeLabel::AcceptNegative => (-acceptance_h(c), minimizer_r(c)),
        RegimeLabel::Reject => (0.0, -minimizer_r(c)),
    }
}

/// Closed-form minimizer of the expected MHA loss, in the regime chosen by
/// [`lemma1_optimal_regime`].
pub fn theorem1_minimizer(posterior: &ClassPosterior, c: f64, d: f64) -> (f64, f64) {
    regime_point(lemma1_optimal_regime(posterior, c, d), c)
}

/// `E_y[L_MHA(h, r, y)]`.
pub fn expected_mha_risk(posterior: &ClassPosterior, h: f64, r: f64, params: &LossParams) -> f64 {
    posterior
        .weights()
        .iter()
        .map(|&(y, p)| p * loss_mha(h, r, y, params))
        .sum()
}

/// `E_y[L_01cd(h, r, y)]`.
pub fn expected_01cd_at(posterior: &ClassPosterior, h: f64, r: f64, params: &LossParams) -> f64 {
    posterior
        .weights()
        .iter()
        .map(|&(y, p)| p * loss_01cd(h, r, y, params))
        .sum()
}

/// Expected max-hinge loss over the relabelled label `z`, with the rejection
/// term scaled by `params.eta()`. At `η = 1` this is the plain MH loss.
pub fn expected_rl_mh_risk(posterior: &ClassPosterior, h: f64, r: f64, params: &LossParams) -> f64 {
    posterior
        .relabelled()
        .iter()
        .map(|&(z, p)| p * loss_mha(h, r, z, params))
        .sum()
}

/// Ambiguity penalty equivalent to random relabelling, `½ − c`.
pub fn relabelling_penalty(c: f64) -> f64 {
    0.5 - c
}

fn relabelling_params(c: f64) -> Result<LossParams> {
    LossParams::calibrated(c, relabelling_penalty(c))
}

/// `E_z[L_01c] − E_y[L_01cd]` with `d = ½ − c`.
///
/// Equals `π₀·c` whenever `h ≠ 0`. At `h = 0` with `r > 0` both relabelled
/// outcomes count as errors and the gap grows to `π₀·(½ + c)`.
pub fn theorem2_risk_gap(posterior: &ClassPosterior, h: f64, r: f64, c: f64) -> Result<f64> {
    let params = relabelling_params(c)?;
    let mut relabelled = 0.0;
    for (z, p) in posterior.relabelled() {
        relabelled += p * loss_01c(h, r, z, c)?;
    }
    Ok(relabelled - expected_01cd_at(posterior, h, r, &params))
}

/// Checks that the expected MH loss over a fair relabelling bounds the
/// 0-1-c-d loss of an ambiguous sample (`d = ½ − c`), and that the MH loss
/// bounds the 0-1-c-d loss of both definite labels. Only `α`, `β` and `c`
/// are read from `params`.
pub fn theorem3_bound_check(h: f64, r: f64, params: &LossParams) -> Result<bool> {
    let c = params.c();
    let rl = relabelling_params(c)?;
    let mh = |z| loss_mh(h, r, z, params);
    let (pos, neg) = (mh(Label::Positive)?, mh(Label::Negative)?);
    let ambiguous = 0.5 * pos + 0.5 * neg >= loss_01cd(h, r, Label::Ambiguous, &rl);
    let definite = pos >= loss_01cd(h, r, Label::Positive, &rl) && neg >= loss_01cd(h, r, Label::Negative, &rl);
    Ok(ambiguous && definite)
}

/// Regime minimizing the expected relabelled MH risk, read off the closed
/// form: accept a class when its posterior exceeds the other's by `1 − 2c`.
pub fn theorem4_regime(posterior: &ClassPosterior, c: f64) -> RegimeLabel {
    let margin = 1.0 - 2.0 * c;
    if posterior.plus >= margin + posterior.minus {
        RegimeLabel::AcceptPositive
    } else if posterior.minus >= margin + posterior.plus {
        RegimeLabel::AcceptNegative
    } else {
        RegimeLabel::Reject
    }
}

/// Compares [`theorem4_regime`] with the regime of [`lemma1_optimal_regime`]
/// at `d = ½ − c`, and with the candidate point of smallest expected
/// relabelled risk under the calibrated `α`, `β`, `η`.
///
/// The calibrated `η` matters: with `η = 1` the rejection side of the loss is
/// too cheap and the minimizer can leave the three candidate points.
pub fn theorem4_minimizer_check(posterior: &ClassPosterior, c: f64) -> Result<bool> {
    let params = relabelling_params(c)?;
    let closed = theorem4_regime(posterior, c);
    let lemma = lemma1_optimal_regime(posterior, c, relabelling_penalty(c));
    let mut candidates = RegimeLabel::ALL.map(|g| {
        let (h, r) = regime_point(g, c);
        (expected_rl_mh_risk(posterior, h, r, &params), g)
    });
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let evaluated_ok = candidates[1].0 - candidates[0].0 <= TIE_TOLERANCE || candidates[0].1 == closed;
    Ok(closed == lemma && evaluated_ok)
}

/// Points `(π₊, π₋)` of the probability simplex on a regular grid.
pub fn simplex_grid(step: f64) -> Result<Vec<ClassPosterior>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::invalid(format!("simplex step {step} must lie in (0, 1]")));
    }
    let n = (1.0 / step).round() as usize;
    let mut out = Vec::with_capacity((n + 1) * (n + 2) / 2);
    for i in 0..=n {
        for j in 0..=(n - i) {
            let plus = i as f64 / n as f64;
            let minus = j as f64 / n as f64;
            out.push(ClassPosterior::from_plus_minus(plus, minus)?);
        }
    }
    Ok(out)
}

/// Outcome of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub name: String,
    /// Cases checked.
    pub checked: usize,
    /// Cases skipped as ties.
    pub skipped: usize,
    /// First failing case, if any.
    pub counterexample: Option<String>,
}

impl SweepReport {
    fn new(name: &str) -> Self {
        SweepReport {
            name: name.to_string(),
            checked: 0,
            skipped: 0,
            counterexample: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }

    fn fail(&mut self, message: String) {
        if self.counterexample.is_none() {
            self.counterexample = Some(message);
        }
    }
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{}: {verdict} (n={}", self.name, self.checked)?;
        if self.skipped > 0 {
            write!(f, ", ties skipped={}", self.skipped)?;
        }
        write!(f, ")")?;
        if let Some(ce) = &self.counterexample {
            write!(f, " counterexample: {ce}")?;
        }
        Ok(())
    }
}

/// Closed-form regime against brute force over a simplex grid and every
/// `(c, d)` pair; ties are skipped.
pub fn lemma1_sweep(step: f64, costs: &[f64], penalties: &[f64]) -> Result<SweepReport> {
    let grid = simplex_grid(step)?;
    let mut report = SweepReport::new("lemma1");
    for &c in costs {
        for &d in penalties {
            for p in &grid {
                let Some(brute) = brute_force_regime(p, c, d) else {
                    report.skipped += 1;
                    continue;
                };
                report.checked += 1;
                let closed = lemma1_optimal_regime(p, c, d);
                if closed != brute {
                    report.fail(format!("{p} c={c} d={d}: closed form {closed}, brute force {brute}"));
                }
            }
        }
    }
    Ok(report)
}

/// Settings of [`theorem1_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Config {
    pub costs: Vec<f64>,
    pub penalties: Vec<f64>,
    pub posteriors_per_cost: usize,
    /// Half-width of the square `(h, r)` grid.
    pub extent: f64,
    pub grid_step: f64,
    /// Allowed excess of the closed-form value over the grid minimum.
    pub value_tolerance: f64,
    /// Posteriors whose best two regimes are closer than this in 0-1-c-d
    /// risk are redrawn.
    pub tie_margin: f64,
    /// Replaces the calibrated `η`; used as a negative control.
    pub eta_override: Option<f64>,
    pub seed: u64,
}

impl Default for Theorem1Config {
    fn default() -> Self {
        Theorem1Config {
            costs: vec![0.03, 0.2, 0.45],
            penalties: AMBIGUITY_GRID.to_vec(),
            posteriors_per_cost: 20,
            extent: 6.0,
            grid_step: 0.01,
            value_tolerance: 1e-3,
            tie_margin: 1e-2,
            eta_override: None,
            seed: 0,
        }
    }
}

/// Minimum of `f` over the square grid `[−extent, extent]²`, returning the
/// value and the first minimizing point in row-major `(h, r)` order.
pub fn grid_minimum(extent: f64, step: f64, f: impl Fn(f64, f64) -> f64) -> (f64, f64, f64) {
    let n = (2.0 * extent / step).round() as i64;
    let coord = |k: i64| -extent + k as f64 * step;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=n {
        let h = coord(i);
        for j in 0..=n {
            let r = coord(j);
            let v = f(h, r);
            if v < best.0 {
                best = (v, h, r);
            }
        }
    }
    best
}

fn regime_margin(p: &ClassPosterior, c: f64, d: f64) -> f64 {
    let mut risks = RegimeLabel::ALL.map(|g| expected_01cd_risk(p, g, c, d));
    risks.sort_by(f64::total_cmp);
    risks[1] - risks[0]
}

/// Grid minimization of the expected MHA loss against the closed-form
/// minimizers, for random posteriors drawn uniformly from the simplex.
///
/// A case passes when the closed-form point's value is at most the grid
/// minimum plus `value_tolerance` and the grid minimizer has the sign of `r`
/// (and, when accepting, of `h`) that the optimal regime prescribes.
pub fn theorem1_sweep(config: &Theorem1Config) -> Result<SweepReport> {
    let mut report = SweepReport::new("theorem1");
    let dirichlet = Dirichlet::new(&[1.0; 3]).map_err(|e| Error::invalid(e.to_string()))?;
    for (ci, &c) in config.costs.iter().enumerate() {
        let mut rng = seed::rng(seed::derive_seed(config.seed, ci as u64));
        let mut drawn = 0;
        while drawn < config.posteriors_per_cost {
            let d = config.penalties[rng.gen_range(0..config.penalties.len())];
            let v = dirichlet.sample(&mut rng);
            let p = ClassPosterior::from_plus_minus(v[0], v[2])?;
            if regime_margin(&p, c, d) < config.tie_margin {
                report.skipped += 1;
                continue;
            }
            drawn += 1;
            report.checked += 1;
            let mut params = LossParams::calibrated(c, d)?;
            if let Some(eta) = config.eta_override {
                params = params.with_eta(eta)?;
            }
            let objective = |h, r| expected_mha_risk(&p, h, r, &params);
            let (h_star, r_star) = theorem1_minimizer(&p, c, d);
            let closed = objective(h_star, r_star);
            let (grid_min, h_grid, r_grid) = grid_minimum(config.extent, config.grid_step, objective);
            let regime = lemma1_optimal_regime(&p, c, d);
            let signs_match = match regime {
                RegimeLabel::Reject => r_grid < 0.0,
                RegimeLabel::AcceptPositive => r_grid > 0.0 && h_grid > 0.0,
                RegimeLabel::AcceptNegative => r_grid > 0.0 && h_grid < 0.0,
            };
            if closed > grid_min + config.value_tolerance {
                report.fail(format!(
                    "{p} c={c} d={d}: closed-form value {closed:.6} exceeds grid minimum {grid_min:.6}"
                ));
            } else if !signs_match {
                report.fail(format!(
                    "{p} c={c} d={d}: grid minimizer ({h_grid:.2}, {r_grid:.2}) is not in regime {regime}"
                ));
            }
        }
    }
    Ok(report)
}

/// The relabelling identity on random tuples with `h ≠ 0`.
pub fn theorem2_sweep(n: usize, seed_value: u64, tolerance: f64) -> Result<SweepReport> {
    let mut report = SweepReport::new("theorem2");
    let mut rng = seed::rng(seed_value);
    let dirichlet = Dirichlet::new(&[1.0; 3]).map_err(|e| Error::invalid(e.to_string()))?;
    for _ in 0..n {
        let v = dirichlet.sample(&mut rng);
        let p = ClassPosterior::from_plus_minus(v[0], v[2])?;
        let c = rng.gen_range(0.001..0.499);
        let mut h = rng.gen_range(-3.0..3.0);
        if h == 0.0 {
            h = 1.0;
        }
        let r = rng.gen_range(-3.0..3.0);
        let gap = theorem2_risk_gap(&p, h, r, c)?;
        report.checked += 1;
        if (gap - p.zero * c).abs() > tolerance {
            report.fail(format!("{p} h={h} r={r} c={c}: gap {gap:e}, expected {:e}", p.zero * c));
        }
    }
    Ok(report)
}

/// [`theorem3_bound_check`] on random `(h, r, c)` with calibrated `α`, `β`.
pub fn theorem3_sweep(n: usize, seed_value: u64) -> Result<SweepReport> {
    let mut report = SweepReport::new("theorem3");
    let mut rng = seed::rng(seed_value);
    for _ in 0..n {
        let h = rng.gen_range(-5.0..5.0);
        let r = rng.gen_range(-5.0..5.0);
        let c = rng.gen_range(0.001..0.499);
        let params = LossParams::calibrated(c, relabelling_penalty(c))?;
        report.checked += 1;
        if !theorem3_bound_check(h, r, &params)? {
            report.fail(format!("h={h} r={r} c={c}"));
        }
    }
    Ok(report)
}

/// [`theorem4_minimizer_check`] over a simplex grid; ties of the lemma's
/// regimes at `d = ½ − c` are skipped.
pub fn theorem4_sweep(step: f64, costs: &[f64]) -> Result<SweepReport> {
    let grid = simplex_grid(step)?;
    let mut report = SweepReport::new("theorem4");
    for &c in costs {
        for p in &grid {
            if brute_force_regime(p, c, relabelling_penalty(c)).is_none() {
                report.skipped += 1;
                continue;
            }
            report.checked += 1;
            if !theorem4_minimizer_check(p, c)? {
                report.fail(format!(
                    "{p} c={c}: closed form {}, lemma {}",
                    theorem4_regime(p, c),
                    lemma1_optimal_regime(p, c, relabelling_penalty(c))
                ));
            }
        }
    }
    Ok(report)
}

/// Settings for [`verify_all`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub lemma1_step: f64,
    pub theorem1: Theorem1Config,
    pub theorem2_samples: usize,
    pub theorem3_samples: usize,
    pub theorem4_step: f64,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            lemma1_step: 0.005,
            theorem1: Theorem1Config::default(),
            theorem2_samples: 1000,
            theorem3_samples: 100_000,
            theorem4_step: 0.01,
            seed: 0,
        }
    }
}

/// Runs every sweep and returns one report per result.
pub fn verify_all(config: &VerifyConfig) -> Result<Vec<SweepReport>> {
    let mut t1 = config.theorem1.clone();
    t1.seed = seed::derive_named_seed(config.seed, "theorem1");
    Ok(vec![
        lemma1_sweep(config.lemma1_step, &COST_GRID, &AMBIGUITY_GRID)?,
        theorem1_sweep(&t1)?,
        theorem2_sweep(config.theorem2_samples, seed::derive_named_seed(config.seed, "theorem2"), 1e-12)?,
        theorem3_sweep(config.theorem3_samples, seed::derive_named_seed(config.seed, "theorem3"))?,
        theorem4_sweep(config.theorem4_step, &[0.03, 0.2, 0.45])?,
    ])
}
