use serde::{Deserialize, Serialize};

use super::ledger::{PacketLedger, Status, SubLabel};
use crate::correlation::{Alpha, User};

/// One Phase-1 slot: the effective state and the packet each transmitter sent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub alpha: Alpha,
    pub sent: [Option<u32>; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    /// A packet heard only by the cross receiver while the cross receiver also held interference.
    Multicast,
    /// Cross-only packet summed with a packet the cross receiver already holds.
    Combined,
    /// Like `Combined` but using one half of an all-links-on pair; the partner does the same.
    PairCombined,
    /// Needed only at the cross receiver.
    CrossOnly,
    /// Delivers one half of an all-links-on pair to both receivers, resolving both halves.
    Carrier,
}

/// A packet (or field sum of packets) to be multicast in Phase 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommonItem {
    pub owner: User,
    pub packets: Vec<usize>,
    pub needed_by: [bool; 2],
    pub kind: ItemKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommonPackets {
    pub pools: [Vec<CommonItem>; 2],
    /// Packets retransmitted point-to-point after Phase 2.
    pub leftovers: [Vec<usize>; 2],
    /// All-links-on collisions found in Phase 1.
    pub all_on_pairs: usize,
    /// Pairs whose halves were both combined.
    pub combined_pairs: usize,
}

impl CommonPackets {
    pub fn total(&self) -> usize {
        self.pools[0].len() + self.pools[1].len()
    }

    /// Items of pool `tx` that receiver `rx` still needs.
    pub fn unknown(&self, rx: User, tx: User) -> usize {
        self.pools[tx.index()].iter().filter(|it| it.needed_by[rx.index()]).count()
    }
}

struct Buckets {
    q2c: Vec<usize>,
    q2nc: Vec<usize>,
    single: Vec<usize>,
    paired: Vec<usize>,
}

fn buckets(ledger: &PacketLedger, slots: &[SlotRecord]) -> Buckets {
    let owner = ledger.owner;
    let other = owner.other();
    let mut b = Buckets {
        q2c: Vec::new(),
        q2nc: Vec::new(),
        single: Vec::new(),
        paired: Vec::new(),
    };
    for (idx, rec) in ledger.packets.iter().enumerate() {
        match (rec.status, rec.sub_label) {
            (Status::Q2, Some(SubLabel::C)) => b.q2c.push(idx),
            (Status::Q2, Some(SubLabel::Nc)) => b.q2nc.push(idx),
            (Status::Q1, Some(SubLabel::C)) => {
                let slot = rec.tx_slot.expect("queued packet without slot");
                if slots[slot].alpha.link(owner, other) {
                    b.paired.push(idx);
                } else {
                    b.single.push(idx);
                }
            }
            _ => {}
        }
    }
    b
}

/// Turns the Phase-1 retransmission queues into Phase-2 multicast pools and
/// Phase-3 leftovers.
pub fn build_common_packets(ledgers: &[PacketLedger; 2], slots: &[SlotRecord]) -> CommonPackets {
    let b = [buckets(&ledgers[0], slots), buckets(&ledgers[1], slots)];
    let mut out = CommonPackets::default();
    let both = [true, true];

    // all-links-on pairs, keyed by Tx1's packet
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for &a in &b[0].paired {
        let slot = ledgers[0].packets[a].tx_slot.unwrap();
        let partner = slots[slot].sent[1].expect("all-on slot with a silent transmitter") as usize;
        debug_assert_eq!(ledgers[1].packets[partner].status, Status::Q1);
        pairs.push((a, partner));
    }
    debug_assert_eq!(pairs.len(), b[1].paired.len());
    out.all_on_pairs = pairs.len();

    let mut need: [std::collections::VecDeque<usize>; 2] = [b[0].q2nc.iter().copied().collect(), b[1].q2nc.iter().copied().collect()];
    let mut single_left: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for tx in User::BOTH {
        let i = tx.index();
        for &s in &b[i].single {
            match need[i].pop_front() {
                Some(c) => out.pools[i].push(CommonItem {
                    owner: tx,
                    packets: vec![s, c],
                    needed_by: both,
                    kind: ItemKind::Combined,
                }),
                None => single_left[i].push(s),
            }
        }
    }

    let n_pair = need[0].len().min(need[1].len()).min(pairs.len());
    for &(a, bb) in &pairs[..n_pair] {
        let c = need[0].pop_front().unwrap();
        let d = need[1].pop_front().unwrap();
        out.pools[0].push(CommonItem {
            owner: User::One,
            packets: vec![a, c],
            needed_by: both,
            kind: ItemKind::PairCombined,
        });
        out.pools[1].push(CommonItem {
            owner: User::Two,
            packets: vec![bb, d],
            needed_by: both,
            kind: ItemKind::PairCombined,
        });
    }
    out.combined_pairs = n_pair;

    for tx in User::BOTH {
        let i = tx.index();
        out.leftovers[i] = need[i].drain(..).collect();
        let mut needed_by = [false; 2];
        needed_by[tx.other().index()] = true;
        for &s in &single_left[i] {
            out.pools[i].push(CommonItem {
                owner: tx,
                packets: vec![s],
                needed_by,
                kind: ItemKind::CrossOnly,
            });
        }
        for &c in &b[i].q2c {
            out.pools[i].push(CommonItem {
                owner: tx,
                packets: vec![c],
                needed_by: both,
                kind: ItemKind::Multicast,
            });
        }
    }

    // one carrier per remaining pair, sent by whichever pool is currently lighter
    for (k, &(a, bb)) in pairs[n_pair..].iter().enumerate() {
        let load = |i: usize| out.pools[i].len();
        let tx = match load(0).cmp(&load(1)) {
            std::cmp::Ordering::Less => User::One,
            std::cmp::Ordering::Greater => User::Two,
            std::cmp::Ordering::Equal if k % 2 == 0 => User::One,
            _ => User::Two,
        };
        let packet = if tx == User::One { a } else { bb };
        out.pools[tx.index()].push(CommonItem {
            owner: tx,
            packets: vec![packet],
            needed_by: both,
            kind: ItemKind::Carrier,
        });
    }
    out
}
