//! The multi-phase opportunistic retransmission protocol.

mod common;
mod ledger;
mod sim;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use common::{build_common_packets, CommonItem, CommonPackets, ItemKind, SlotRecord};
pub use ledger::{classify_packet, PacketLedger, PacketRecord, Status, SubLabel, Transition};
pub use sim::{generic_rank, phase1_budget, MulticastOutcome, Phase1Outcome, SimOutcome, Simulation, SparseVec, TxRecord};

use crate::correlation::{build_joint_pmf, CorrelationParams, JointStatePmf};
use crate::error::{Error, Result};
use crate::linalg::FieldSpec;

pub const DEFAULT_ALGEBRAIC_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ledger,
    Algebraic,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ledger" => Ok(Mode::Ledger),
            "algebraic" => Ok(Mode::Algebraic),
            _ => Err(Error::Config(format!("unknown mode {s:?}"))),
        }
    }
}

/// `Drain` ends Phase 1 once both initial queues are empty; `Fixed` always runs
/// the whole deadline, idling when there is nothing left to send.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase1Length {
    #[default]
    Drain,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Halt {
    #[default]
    #[serde(rename = "none")]
    None,
    I,
    II,
    III,
    /// A later phase ran out of its slot budget.
    #[serde(rename = "expired")]
    Expired,
}

impl Halt {
    pub fn is_halted(self) -> bool {
        self != Halt::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: CorrelationParams,
    pub m: usize,
    pub mode: Mode,
    pub field: FieldSpec,
    pub seed: u64,
    pub phase1_length: Phase1Length,
    pub algebraic_cap: usize,
    pub record_tx_log: bool,
}

impl SimConfig {
    pub fn new(params: CorrelationParams, m: usize, mode: Mode) -> Self {
        Self {
            params,
            m,
            mode,
            field: FieldSpec::default(),
            seed: 0,
            phase1_length: Phase1Length::Drain,
            algebraic_cap: DEFAULT_ALGEBRAIC_CAP,
            record_tx_log: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_field(mut self, field: FieldSpec) -> Self {
        self.field = field;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.params.p() <= 0.0 {
            return Err(Error::Config("p must be positive to simulate".into()));
        }
        if self.mode == Mode::Algebraic && self.m > self.algebraic_cap {
            return Err(Error::Config(format!(
                "m = {} exceeds the algebraic-mode cap of {}",
                self.m, self.algebraic_cap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxCensus {
    pub n1: usize,
    pub n2: usize,
    pub n1_c: usize,
    pub n1_nc: usize,
    pub n2_c: usize,
    pub n2_nc: usize,
    pub padding1: usize,
    pub padding2: usize,
    pub delivered_phase1: usize,
    pub common: usize,
    pub leftovers: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueCensus {
    pub tx1: TxCensus,
    pub tx2: TxCensus,
    pub common_total: usize,
    pub all_on_pairs: usize,
    pub combined_pairs: usize,
    /// Missing decodable dimensions per receiver before the top-up.
    pub rank_deficit: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub phase1_slots: usize,
    pub phase2_slots: usize,
    pub phase3_slots: usize,
    pub topup_slots: usize,
    pub halted: Halt,
    pub r1: f64,
    pub r2: f64,
    pub decodable: Option<bool>,
    pub queue_census: QueueCensus,
    #[serde(skip)]
    pub pmf_used: Option<Arc<JointStatePmf>>,
}

impl SimReport {
    pub fn total_slots(&self) -> usize {
        self.phase1_slots + self.phase2_slots + self.phase3_slots + self.topup_slots
    }

    pub fn sum_rate(&self) -> f64 {
        self.r1 + self.r2
    }
}

pub fn simulate(config: &SimConfig) -> Result<SimReport> {
    let pmf = Arc::new(build_joint_pmf(&config.params)?);
    simulate_with_pmf(config, pmf)
}

pub fn simulate_with_pmf(config: &SimConfig, pmf: Arc<JointStatePmf>) -> Result<SimReport> {
    Ok(Simulation::new(*config, pmf)?.run().report)
}

pub fn simulate_detailed(config: &SimConfig, pmf: Arc<JointStatePmf>) -> Result<SimOutcome> {
    Ok(Simulation::new(*config, pmf)?.run())
}

/// Seed of trial `k` in a batch started from `base`.
pub fn trial_seed(base: u64, k: u64) -> u64 {
    let mut z = base ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `trials` independent trials; the result order and content do not depend on `jobs`.
pub fn run_batch(config: &SimConfig, trials: usize, jobs: usize) -> Result<Vec<SimReport>> {
    config.validate()?;
    let pmf = Arc::new(build_joint_pmf(&config.params)?);
    let run = |k: usize| simulate_with_pmf(&config.with_seed(trial_seed(config.seed, k as u64)), pmf.clone());
    if jobs <= 1 {
        return (0..trials).map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| (0..trials).into_par_iter().map(run).collect())
}

/// Mean of `f` over the reports that did not halt.
pub fn mean_over_completed(reports: &[SimReport], f: impl Fn(&SimReport) -> f64) -> Option<f64> {
    let done: Vec<f64> = reports.iter().filter(|r| !r.halted.is_halted()).map(f).collect();
    (!done.is_empty()).then(|| done.iter().sum::<f64>() / done.len() as f64)
}
