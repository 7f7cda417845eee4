use serde::{Deserialize, Serialize};

use crate::correlation::{Alpha, User};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Initial,
    Delivered,
    Q1,
    Q2,
}

/// Whether the other transmitter's own link was on (`C`) or off (`Nc`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubLabel {
    C,
    Nc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transition {
    Stay,
    Deliver,
    Queue(Status, SubLabel),
}

/// Status change for a packet of `owner` sent in a slot with (effective) state `alpha`.
pub fn classify_packet(alpha: Alpha, owner: User) -> Transition {
    let other = owner.other();
    let own = alpha.link(owner, owner);
    let cross = alpha.link(other, owner);
    let label = if alpha.link(other, other) { SubLabel::C } else { SubLabel::Nc };
    match (own, cross) {
        (true, true) => Transition::Queue(Status::Q1, label),
        (false, true) => Transition::Queue(Status::Q2, label),
        (true, false) => Transition::Deliver,
        (false, false) => Transition::Stay,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub status: Status,
    pub sub_label: Option<SubLabel>,
    pub tx_slot: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketLedger {
    pub owner: User,
    pub packets: Vec<PacketRecord>,
}

impl PacketLedger {
    pub fn new(owner: User, m: usize) -> Self {
        Self {
            owner,
            packets: vec![
                PacketRecord {
                    status: Status::Initial,
                    sub_label: None,
                    tx_slot: None,
                };
                m
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    /// Applies a Phase-1 transition to an Initial packet.
    pub fn apply(&mut self, idx: usize, t: Transition, slot: usize) {
        let rec = &mut self.packets[idx];
        assert_eq!(rec.status, Status::Initial, "packet {idx} already left the initial queue");
        rec.tx_slot = Some(slot);
        match t {
            Transition::Stay => {}
            Transition::Deliver => rec.status = Status::Delivered,
            Transition::Queue(s, l) => {
                debug_assert!(matches!(s, Status::Q1 | Status::Q2));
                rec.status = s;
                rec.sub_label = Some(l);
            }
        }
    }

    /// Marks a queued packet as delivered by a later phase.
    pub fn resolve(&mut self, idx: usize) {
        let rec = &mut self.packets[idx];
        assert!(
            matches!(rec.status, Status::Q1 | Status::Q2),
            "packet {idx} is not in a retransmission queue"
        );
        rec.status = Status::Delivered;
    }

    pub fn count(&self, status: Status, label: Option<SubLabel>) -> usize {
        self.packets
            .iter()
            .filter(|r| r.status == status && (label.is_none() || r.sub_label == label))
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(s: &str) -> Alpha {
        Alpha::parse(s).unwrap()
    }

    #[test]
    fn tx2_is_mirrored() {
        assert_eq!(classify_packet(a("1101"), User::Two), Transition::Queue(Status::Q1, SubLabel::C));
        assert_eq!(classify_packet(a("0110"), User::Two), Transition::Queue(Status::Q2, SubLabel::Nc));
        assert_eq!(classify_packet(a("0011"), User::Two), Transition::Deliver);
        assert_eq!(classify_packet(a("1010"), User::Two), Transition::Stay);
    }
}
