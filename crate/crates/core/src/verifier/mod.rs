//! Monte-Carlo checks of the rank-ratio inequality and of simulated rates against
//! the closed-form region.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::correlation::{build_joint_pmf, CorrelationParams, User};
use crate::error::{Error, Result};
use crate::linalg::{Echelon, FieldSpec};
use crate::protocol::{run_batch, simulate_detailed, trial_seed, Mode, SimConfig, SimReport};
use crate::region::{beta, max_symmetric_sum_rate, Region};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRatioEstimate {
    pub e_rank_cross: f64,
    pub e_rank_direct: f64,
    pub trials: usize,
    pub beta_ref: f64,
    /// Number of packets (precoder columns); ranks are compared per packet.
    pub columns: usize,
    /// (cross, direct) rank per trial.
    pub per_trial: Vec<(usize, usize)>,
}

impl RankRatioEstimate {
    pub fn ratio(&self) -> f64 {
        if self.e_rank_direct == 0.0 {
            f64::INFINITY
        } else {
            self.e_rank_cross / self.e_rank_direct
        }
    }

    /// cross/m >= direct/(m beta) - tol.
    pub fn holds(&self, tol: f64) -> bool {
        let m = self.columns.max(1) as f64;
        self.e_rank_cross / m >= self.e_rank_direct / (m * self.beta_ref) - tol
    }

    /// Same inequality on the normalized ratio, as used for reporting.
    pub fn ratio_holds(&self, tol: f64) -> bool {
        self.ratio() >= 1.0 / self.beta_ref - tol
    }

    fn from_pairs(per_trial: Vec<(usize, usize)>, beta_ref: f64, columns: usize) -> Self {
        let n = per_trial.len().max(1) as f64;
        Self {
            e_rank_cross: per_trial.iter().map(|p| p.0 as f64).sum::<f64>() / n,
            e_rank_direct: per_trial.iter().map(|p| p.1 as f64).sum::<f64>() / n,
            trials: per_trial.len(),
            beta_ref,
            columns,
            per_trial,
        }
    }
}

fn check_p(params: &CorrelationParams) -> Result<()> {
    if params.p() <= 0.0 {
        return Err(Error::Config("the rank-ratio estimate needs p > 0".into()));
    }
    Ok(())
}

/// Ranks of Tx1's precoder rows seen through the cross link and through the direct
/// link, with the precoders produced by the protocol itself.
pub fn estimate_rank_ratio(
    params: &CorrelationParams,
    m: usize,
    trials: usize,
    seed: u64,
    field: FieldSpec,
) -> Result<RankRatioEstimate> {
    check_p(params)?;
    let pmf = Arc::new(build_joint_pmf(params)?);
    let mut pairs = Vec::with_capacity(trials);
    for k in 0..trials {
        let mut cfg = SimConfig::new(*params, m, Mode::Algebraic)
            .with_seed(trial_seed(seed, k as u64))
            .with_field(field);
        cfg.record_tx_log = true;
        let out = simulate_detailed(&cfg, pmf.clone())?;
        let log = out.tx_log.unwrap_or_default();
        let mut cross = Echelon::new(field, m);
        let mut direct = Echelon::new(field, m);
        for rec in &log {
            let Some(v) = &rec.sent[0] else { continue };
            if rec.alpha.link(User::Two, User::One) {
                cross.insert(v);
            }
            if rec.alpha.link(User::One, User::One) {
                direct.insert(v);
            }
        }
        pairs.push((cross.rank(), direct.rank()));
    }
    Ok(RankRatioEstimate::from_pairs(pairs, beta(params.p(), params.rho_tx()), m))
}

/// Same estimate with i.i.d. uniformly random precoder rows, `slots` per trial.
pub fn estimate_rank_ratio_random(
    params: &CorrelationParams,
    m: usize,
    slots: usize,
    trials: usize,
    seed: u64,
    field: FieldSpec,
) -> Result<RankRatioEstimate> {
    check_p(params)?;
    let pmf = build_joint_pmf(params)?;
    let mut pairs = Vec::with_capacity(trials);
    for k in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, k as u64));
        let mut cross = Echelon::new(field, m);
        let mut direct = Echelon::new(field, m);
        for _ in 0..slots {
            let alpha = pmf.sample_alpha(&mut rng);
            let v: Vec<(usize, u64)> = (0..m)
                .map(|c| (c, rng.gen_range(0..field.modulus())))
                .filter(|e| e.1 != 0)
                .collect();
            if alpha.link(User::Two, User::One) {
                cross.insert(&v);
            }
            if alpha.link(User::One, User::One) {
                direct.insert(&v);
            }
        }
        pairs.push((cross.rank(), direct.rank()));
    }
    Ok(RankRatioEstimate::from_pairs(pairs, beta(params.p(), params.rho_tx()), m))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionComparison {
    pub count: usize,
    pub max_sum_rate: Option<f64>,
    pub mean_sum_rate: Option<f64>,
    pub gap_to_max_symmetric: Option<f64>,
    pub violations: usize,
}

pub fn compare_to_region(reports: &[SimReport], region: &Region, tol: f64) -> RegionComparison {
    let done: Vec<&SimReport> = reports.iter().filter(|r| !r.halted.is_halted()).collect();
    if done.is_empty() {
        return RegionComparison::default();
    }
    let violations = done
        .iter()
        .filter(|r| !region.contains_with_tol(r.r1, r.r2, tol))
        .count();
    let max = done.iter().map(|r| r.sum_rate()).fold(f64::MIN, f64::max);
    let mean = done.iter().map(|r| r.sum_rate()).sum::<f64>() / done.len() as f64;
    let params = CorrelationParams::new(region.p, region.rho_tx, region.rho_rx)
        .expect("region built from valid parameters");
    RegionComparison {
        count: done.len(),
        max_sum_rate: Some(max),
        mean_sum_rate: Some(mean),
        gap_to_max_symmetric: Some(max_symmetric_sum_rate(&params) - max),
        violations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    P,
    RhoTx,
    RhoRx,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" => Ok(SweepAxis::P),
            "rho-tx" | "rho_tx" => Ok(SweepAxis::RhoTx),
            "rho-rx" | "rho_rx" => Ok(SweepAxis::RhoRx),
            _ => Err(Error::Config(format!("unknown sweep axis {s:?}"))),
        }
    }
}

/// Simulation settings for the empirical sweep column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSim {
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub analytic: Option<f64>,
    pub simulated: Option<f64>,
    pub trials: usize,
    pub stderr: Option<f64>,
    pub skipped: Option<String>,
}

/// Evaluates the maximum symmetric sum-rate (and optionally a ledger-mode
/// estimate) at each value of `axis`, holding the other two parameters fixed.
pub fn sweep(axis: SweepAxis, values: &[f64], fixed: (f64, f64, f64), sim: Option<SweepSim>) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&x| {
            let (p, tx, rx) = match axis {
                SweepAxis::P => (x, fixed.1, fixed.2),
                SweepAxis::RhoTx => (fixed.0, x, fixed.2),
                SweepAxis::RhoRx => (fixed.0, fixed.1, x),
            };
            let params = match CorrelationParams::new(p, tx, rx) {
                Ok(v) => v,
                Err(e) => {
                    return SweepRow {
                        param: x,
                        analytic: None,
                        simulated: None,
                        trials: 0,
                        stderr: None,
                        skipped: Some(e.to_string()),
                    }
                }
            };
            let mut row = SweepRow {
                param: x,
                analytic: Some(max_symmetric_sum_rate(&params)),
                simulated: None,
                trials: 0,
                stderr: None,
                skipped: None,
            };
            if let Some(s) = sim {
                if p <= 0.0 {
                    row.skipped = Some("p = 0 cannot be simulated".into());
                    return row;
                }
                let cfg = SimConfig::new(params, s.m, Mode::Ledger).with_seed(s.seed);
                match run_batch(&cfg, s.trials, s.jobs) {
                    Ok(reports) => {
                        let rates: Vec<f64> = reports
                            .iter()
                            .filter(|r| !r.halted.is_halted())
                            .map(|r| r.sum_rate())
                            .collect();
                        row.trials = rates.len();
                        if !rates.is_empty() {
                            let n = rates.len() as f64;
                            let mean = rates.iter().sum::<f64>() / n;
                            let var = if rates.len() > 1 {
                                rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
                            } else {
                                0.0
                            };
                            row.simulated = Some(mean);
                            row.stderr = Some((var / n).sqrt());
                        }
                    }
                    Err(e) => row.skipped = Some(e.to_string()),
                }
            }
            row
        })
        .collect()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}
