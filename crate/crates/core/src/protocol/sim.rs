use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::common::{build_common_packets, CommonPackets, SlotRecord};
use super::ledger::{classify_packet, PacketLedger, Status, SubLabel, Transition};
use super::{Halt, Mode, Phase1Length, QueueCensus, SimConfig, SimReport, TxCensus};
use crate::correlation::{Alpha, JointStatePmf, User};
use crate::error::Result;
use crate::linalg::{DecodeTracker, EquationStore, FieldSpec};
use crate::region::p_rx_00;

pub type SparseVec = Vec<(usize, u64)>;

/// What each transmitter put on the air in one slot, over its own packet indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxRecord {
    pub phase: u8,
    pub alpha: Alpha,
    pub sent: [Option<SparseVec>; 2],
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub report: SimReport,
    pub ledgers: [PacketLedger; 2],
    pub common: Option<CommonPackets>,
    pub stores: Option<[EquationStore; 2]>,
    pub payloads: Option<[Vec<u64>; 2]>,
    pub tx_log: Option<Vec<TxRecord>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase1Outcome {
    pub slots: usize,
    pub halted: Halt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MulticastOutcome {
    pub slots: usize,
    pub expired: bool,
}

fn slack(m: usize) -> f64 {
    (m as f64).powf(2.0 / 3.0)
}

/// Phase-1 deadline: ceil(m / (1 - p00)) + ceil(m^(2/3)).
pub fn phase1_budget(m: usize, p_tx_00: f64) -> usize {
    (m as f64 / (1.0 - p_tx_00)).ceil() as usize + slack(m).ceil() as usize
}

/// Rank a receiver can reach from generic combinations, given how many of its
/// unknowns sit in each pool and how many slots it heard each link pattern in.
pub fn generic_rank(u1: usize, u2: usize, r10: usize, r01: usize, r11: usize) -> usize {
    let none = if u1 > 0 { r10 } else { 0 } + if u2 > 0 { r01 } else { 0 } + if u1 + u2 > 0 { r11 } else { 0 };
    let cover1 = u1 + if u2 > 0 { r01 + r11 } else { 0 };
    let cover2 = u2 + if u1 > 0 { r10 + r11 } else { 0 };
    none.min(cover1).min(cover2).min(u1 + u2)
}

struct Algebra {
    stores: [EquationStore; 2],
    payloads: [Vec<u64>; 2],
}

/// One protocol run. Phases are exposed individually; `run` chains them.
pub struct Simulation {
    cfg: SimConfig,
    pmf: Arc<JointStatePmf>,
    state_rng: ChaCha8Rng,
    coef_rng: ChaCha8Rng,
    slot: usize,
    ledgers: [PacketLedger; 2],
    phase1: Vec<SlotRecord>,
    alg: Option<Algebra>,
    tx_log: Option<Vec<TxRecord>>,
    phase: u8,
}

impl Simulation {
    pub fn new(cfg: SimConfig, pmf: Arc<JointStatePmf>) -> Result<Self> {
        cfg.validate()?;
        let mut state_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        state_rng.set_stream(1);
        let mut coef_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        coef_rng.set_stream(2);
        let m = cfg.m;
        let alg = (cfg.mode == Mode::Algebraic).then(|| {
            let mut prng = ChaCha8Rng::seed_from_u64(cfg.seed);
            prng.set_stream(3);
            let payloads = [
                (0..m).map(|_| cfg.field.random(&mut prng)).collect(),
                (0..m).map(|_| cfg.field.random(&mut prng)).collect(),
            ];
            Algebra {
                stores: [EquationStore::new(User::One, m, m), EquationStore::new(User::Two, m, m)],
                payloads,
            }
        });
        let tx_log = (cfg.record_tx_log && cfg.mode == Mode::Algebraic).then(Vec::new);
        Ok(Self {
            ledgers: [PacketLedger::new(User::One, m), PacketLedger::new(User::Two, m)],
            cfg,
            pmf,
            state_rng,
            coef_rng,
            slot: 0,
            phase1: Vec::new(),
            alg,
            tx_log,
            phase: 1,
        })
    }

    pub fn ledgers(&self) -> &[PacketLedger; 2] {
        &self.ledgers
    }

    pub fn phase1_slots(&self) -> &[SlotRecord] {
        &self.phase1
    }

    fn draw_alpha(&mut self, active: [bool; 2]) -> Alpha {
        self.pmf.sample_alpha(&mut self.state_rng).with_active(active)
    }

    fn field(&self) -> FieldSpec {
        self.cfg.field
    }

    /// Delivers one slot's transmissions to both receivers' equation stores.
    fn observe(&mut self, alpha: Alpha, sent: [Option<SparseVec>; 2]) -> [Option<SparseVec>; 2] {
        let slot = self.slot;
        if let Some(log) = self.tx_log.as_mut() {
            log.push(TxRecord {
                phase: self.phase,
                alpha,
                sent: sent.clone(),
            });
        }
        let f = self.field();
        let m = self.cfg.m;
        let mut gains = [0u64; 4];
        for g in gains.iter_mut() {
            *g = f.random_nonzero(&mut self.coef_rng);
        }
        let alg = self.alg.as_mut().expect("observe outside algebraic mode");
        let mut rows: [Option<SparseVec>; 2] = [None, None];
        for rx in User::BOTH {
            let mut coeffs = Vec::new();
            let mut rhs = 0;
            for tx in User::BOTH {
                let Some(v) = &sent[tx.index()] else { continue };
                if !alpha.link(rx, tx) {
                    continue;
                }
                let g = gains[2 * rx.index() + tx.index()];
                let off = tx.index() * m;
                for &(k, c) in v {
                    let x = f.mul(g, c);
                    coeffs.push((off + k, x));
                    rhs = f.add(rhs, f.mul(x, alg.payloads[tx.index()][k]));
                }
            }
            if !coeffs.is_empty() {
                alg.stores[rx.index()].push(slot, coeffs.clone(), rhs);
                rows[rx.index()] = Some(coeffs);
            }
        }
        rows
    }

    fn algebraic(&self) -> bool {
        self.alg.is_some()
    }

    pub fn run_phase1(&mut self) -> Phase1Outcome {
        self.phase = 1;
        let cfg = self.cfg;
        let m = cfg.m;
        let tx = cfg.params.tx_joint();
        let budget = phase1_budget(m, tx.p00);
        let mut heads = [0usize; 2];
        let mut slots = 0;
        while slots < budget {
            let active = [heads[0] < m, heads[1] < m];
            if cfg.phase1_length == Phase1Length::Drain && !active[0] && !active[1] {
                break;
            }
            let alpha = self.draw_alpha(active);
            let mut sent = [None, None];
            for user in User::BOTH {
                let i = user.index();
                if !active[i] {
                    continue;
                }
                let t = classify_packet(alpha, user);
                self.ledgers[i].apply(heads[i], t, slots);
                sent[i] = Some(heads[i] as u32);
                if t != Transition::Stay {
                    heads[i] += 1;
                }
            }
            if self.algebraic() {
                let v = sent.map(|s| s.map(|k| vec![(k as usize, 1u64)]));
                self.observe(alpha, v);
            }
            self.phase1.push(SlotRecord { alpha, sent });
            self.slot += 1;
            slots += 1;
        }
        let halted = if heads[0] < m || heads[1] < m {
            Halt::I
        } else {
            self.error_ii_iii()
        };
        Phase1Outcome { slots, halted }
    }

    /// Expected queue sizes and their thresholds n_{i,1}, n_{i,2}.
    pub fn thresholds(&self) -> (f64, f64) {
        let tx = self.cfg.params.tx_joint();
        let m = self.cfg.m as f64;
        let s = 2.0 * slack(self.cfg.m);
        (tx.p11 * m / (1.0 - tx.p00) + s, tx.p01 * m / (1.0 - tx.p00) + s)
    }

    fn known_fraction(&self, owner: User, queue: Status) -> Option<f64> {
        let other = owner.other();
        let own_on = queue == Status::Q1;
        self.pmf.conditional(
            |a| !a.link(other, other),
            |a| a.link(owner, owner) == own_on && a.link(other, owner),
        )
    }

    fn error_ii_iii(&self) -> Halt {
        let (n1, n2) = self.thresholds();
        for l in &self.ledgers {
            if l.count(Status::Q1, None) as f64 > n1 || l.count(Status::Q2, None) as f64 > n2 {
                return Halt::II;
            }
        }
        let s = 2.0 * slack(self.cfg.m);
        for l in &self.ledgers {
            for (q, n) in [(Status::Q1, n1), (Status::Q2, n2)] {
                if let Some(f) = self.known_fraction(l.owner, q) {
                    // deterministic padding is known to every receiver
                    let real = l.count(q, None) as f64;
                    let padding = (n.floor() - real).max(0.0);
                    let known = l.count(q, Some(SubLabel::Nc)) as f64 + padding;
                    if known < f * n - s {
                        return Halt::III;
                    }
                }
            }
        }
        Halt::None
    }

    pub fn build_common_packets(&self) -> CommonPackets {
        build_common_packets(&self.ledgers, &self.phase1)
    }

    fn random_combination(&mut self, len: usize) -> Vec<u64> {
        let f = self.field();
        if f.is_binary() {
            loop {
                let c: Vec<u64> = (0..len).map(|_| self.coef_rng.gen_range(0..2u64)).collect();
                if c.iter().any(|&x| x != 0) {
                    return c;
                }
            }
        }
        (0..len).map(|_| f.random_nonzero(&mut self.coef_rng)).collect()
    }

    pub fn run_two_multicast(&mut self, common: &CommonPackets) -> MulticastOutcome {
        self.phase = 2;
        let m = self.cfg.m;
        let sizes = [common.pools[0].len(), common.pools[1].len()];
        let u = [
            [common.unknown(User::One, User::One), common.unknown(User::One, User::Two)],
            [common.unknown(User::Two, User::One), common.unknown(User::Two, User::Two)],
        ];
        let p00 = p_rx_00(self.cfg.params.p(), self.cfg.params.rho_rx());
        let budget = (2.0 * sizes[0].max(sizes[1]) as f64 / (1.0 - p00)).ceil() as usize + slack(m).ceil() as usize;
        // per receiver: slots heard from Tx1 only, Tx2 only, both
        let mut heard = [[0usize; 3]; 2];
        let done = |heard: &[[usize; 3]; 2], j: usize| {
            generic_rank(u[j][0], u[j][1], heard[j][0], heard[j][1], heard[j][2]) == u[j][0] + u[j][1]
        };
        let mut slots = 0;
        while !(done(&heard, 0) && done(&heard, 1)) {
            if slots == budget {
                return MulticastOutcome { slots, expired: true };
            }
            let active = [sizes[0] > 0, sizes[1] > 0];
            let alpha = self.draw_alpha(active);
            for rx in User::BOTH {
                match (alpha.link(rx, User::One), alpha.link(rx, User::Two)) {
                    (true, false) => heard[rx.index()][0] += 1,
                    (false, true) => heard[rx.index()][1] += 1,
                    (true, true) => heard[rx.index()][2] += 1,
                    (false, false) => {}
                }
            }
            if self.algebraic() {
                let mut sent: [Option<SparseVec>; 2] = [None, None];
                for tx in User::BOTH {
                    let pool = &common.pools[tx.index()];
                    if pool.is_empty() {
                        continue;
                    }
                    let c = self.random_combination(pool.len());
                    let mut v = Vec::new();
                    for (item, &ck) in pool.iter().zip(&c) {
                        if ck != 0 {
                            v.extend(item.packets.iter().map(|&k| (k, ck)));
                        }
                    }
                    sent[tx.index()] = Some(v);
                }
                self.observe(alpha, sent);
            }
            self.slot += 1;
            slots += 1;
        }
        MulticastOutcome { slots, expired: false }
    }

    /// Point-to-point retransmission of packets the cross receiver already holds.
    pub fn run_phase3(&mut self, leftovers: &[Vec<usize>; 2]) -> MulticastOutcome {
        self.phase = 3;
        let p = self.cfg.params.p();
        let longest = leftovers[0].len().max(leftovers[1].len());
        let cap = ((20 * longest + 100) as f64 / p).ceil() as usize;
        let mut heads = [0usize; 2];
        let mut slots = 0;
        loop {
            let active = [heads[0] < leftovers[0].len(), heads[1] < leftovers[1].len()];
            if !active[0] && !active[1] {
                return MulticastOutcome { slots, expired: false };
            }
            if slots == cap {
                return MulticastOutcome { slots, expired: true };
            }
            let alpha = self.draw_alpha(active);
            if self.algebraic() {
                let sent = [0, 1].map(|i| active[i].then(|| vec![(leftovers[i][heads[i]], 1u64)]));
                self.observe(alpha, sent);
            }
            for tx in User::BOTH {
                if active[tx.index()] && alpha.link(tx, tx) {
                    heads[tx.index()] += 1;
                }
            }
            self.slot += 1;
            slots += 1;
        }
    }

    /// Extra generic transmissions until both receivers can decode.
    /// Returns (slots, initial deficits, decodable).
    pub fn run_topup(&mut self) -> (usize, [usize; 2], bool) {
        self.phase = 4;
        let f = self.field();
        let m = self.cfg.m;
        let alg = self.alg.as_ref().expect("top-up needs algebraic mode");
        let mut trackers = [
            DecodeTracker::from_store(f, &alg.stores[0]),
            DecodeTracker::from_store(f, &alg.stores[1]),
        ];
        let deficits = [trackers[0].deficit(), trackers[1].deficit()];
        let cap = ((10 * m + 200) as f64 / self.cfg.params.p()).ceil() as usize;
        let mut slots = 0;
        let mut turn = 0usize;
        loop {
            let pending: Vec<User> = User::BOTH
                .into_iter()
                .filter(|u| !trackers[u.index()].is_decodable())
                .collect();
            if pending.is_empty() || slots == cap {
                break;
            }
            let tx = pending[turn % pending.len()];
            turn += 1;
            let mut active = [false; 2];
            active[tx.index()] = true;
            let alpha = self.draw_alpha(active);
            let c = self.random_combination(m);
            let v: SparseVec = c.into_iter().enumerate().filter(|e| e.1 != 0).collect();
            let mut sent = [None, None];
            sent[tx.index()] = Some(v);
            let rows = self.observe(alpha, sent);
            for (t, r) in trackers.iter_mut().zip(rows) {
                if let Some(r) = r {
                    t.add(&r);
                }
            }
            self.slot += 1;
            slots += 1;
        }
        let ok = trackers.iter().all(|t| t.is_decodable());
        (slots, deficits, ok)
    }

    fn census(&self, common: Option<&CommonPackets>) -> QueueCensus {
        let (n1, n2) = self.thresholds();
        let tx = |i: usize| {
            let l = &self.ledgers[i];
            let q1 = l.count(Status::Q1, None);
            let q2 = l.count(Status::Q2, None);
            TxCensus {
                n1: q1,
                n2: q2,
                n1_c: l.count(Status::Q1, Some(SubLabel::C)),
                n1_nc: l.count(Status::Q1, Some(SubLabel::Nc)),
                n2_c: l.count(Status::Q2, Some(SubLabel::C)),
                n2_nc: l.count(Status::Q2, Some(SubLabel::Nc)),
                padding1: (n1.floor() as usize).saturating_sub(q1),
                padding2: (n2.floor() as usize).saturating_sub(q2),
                delivered_phase1: l.count(Status::Delivered, None),
                common: common.map_or(0, |c| c.pools[i].len()),
                leftovers: common.map_or(0, |c| c.leftovers[i].len()),
            }
        };
        QueueCensus {
            tx1: tx(0),
            tx2: tx(1),
            common_total: common.map_or(0, |c| c.total()),
            all_on_pairs: common.map_or(0, |c| c.all_on_pairs),
            combined_pairs: common.map_or(0, |c| c.combined_pairs),
            rank_deficit: None,
        }
    }

    pub fn run(mut self) -> SimOutcome {
        let m = self.cfg.m;
        let mut report = SimReport {
            phase1_slots: 0,
            phase2_slots: 0,
            phase3_slots: 0,
            topup_slots: 0,
            halted: Halt::None,
            r1: 0.0,
            r2: 0.0,
            decodable: None,
            queue_census: QueueCensus::default(),
            pmf_used: Some(self.pmf.clone()),
        };
        let p1 = self.run_phase1();
        report.phase1_slots = p1.slots;
        if p1.halted != Halt::None {
            report.halted = p1.halted;
            report.queue_census = self.census(None);
            return self.finish(report, None);
        }
        let common = self.build_common_packets();
        report.queue_census = self.census(Some(&common));
        let p2 = self.run_two_multicast(&common);
        report.phase2_slots = p2.slots;
        if p2.expired {
            report.halted = Halt::Expired;
            return self.finish(report, Some(common));
        }
        let p3 = self.run_phase3(&common.leftovers);
        report.phase3_slots = p3.slots;
        if p3.expired {
            report.halted = Halt::Expired;
            return self.finish(report, Some(common));
        }
        if self.algebraic() {
            let (slots, deficits, ok) = self.run_topup();
            report.topup_slots = slots;
            report.decodable = Some(ok);
            report.queue_census.rank_deficit = Some(deficits);
            if !ok {
                report.halted = Halt::Expired;
                return self.finish(report, Some(common));
            }
        }
        for l in self.ledgers.iter_mut() {
            for k in 0..m {
                if matches!(l.packets[k].status, Status::Q1 | Status::Q2) {
                    l.resolve(k);
                }
            }
        }
        let total = report.total_slots();
        report.r1 = m as f64 / total as f64;
        report.r2 = report.r1;
        self.finish(report, Some(common))
    }

    fn finish(self, report: SimReport, common: Option<CommonPackets>) -> SimOutcome {
        let (stores, payloads) = match self.alg {
            Some(a) => (Some(a.stores), Some(a.payloads)),
            None => (None, None),
        };
        SimOutcome {
            report,
            ledgers: self.ledgers,
            common,
            stores,
            payloads,
            tx_log: self.tx_log,
        }
    }
}
