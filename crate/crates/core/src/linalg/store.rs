use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::echelon::Echelon;
use super::field::FieldSpec;
use crate::correlation::User;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Equation {
    pub slot: usize,
    /// Sparse coefficients over columns Tx1 packets then Tx2 packets.
    pub coeffs: Vec<(usize, u64)>,
    pub rhs: u64,
}

/// Linear observations collected by one receiver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquationStore {
    pub receiver: User,
    pub m1: usize,
    pub m2: usize,
    pub rows: Vec<Equation>,
}

impl EquationStore {
    pub fn new(receiver: User, m1: usize, m2: usize) -> Self {
        Self {
            receiver,
            m1,
            m2,
            rows: Vec::new(),
        }
    }

    pub fn ncols(&self) -> usize {
        self.m1 + self.m2
    }

    pub fn push(&mut self, slot: usize, coeffs: Vec<(usize, u64)>, rhs: u64) {
        debug_assert!(coeffs.iter().all(|e| e.0 < self.ncols()));
        self.rows.push(Equation { slot, coeffs, rhs });
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// (own, interferer) column counts for this receiver.
    pub fn split(&self) -> (usize, usize) {
        match self.receiver {
            User::One => (self.m1, self.m2),
            User::Two => (self.m2, self.m1),
        }
    }

    pub fn own_columns(&self) -> std::ops::Range<usize> {
        match self.receiver {
            User::One => 0..self.m1,
            User::Two => self.m1..self.m1 + self.m2,
        }
    }

    /// Dense rows in storage column order.
    pub fn to_dense(&self) -> Vec<Vec<u64>> {
        self.rows
            .iter()
            .map(|r| {
                let mut v = vec![0; self.ncols()];
                for &(c, x) in &r.coeffs {
                    v[c] = x;
                }
                v
            })
            .collect()
    }

    /// Maps a storage column to the interferer-first order used for the rank test.
    fn ordered(&self, c: usize) -> usize {
        match self.receiver {
            User::One => {
                if c < self.m1 {
                    self.m2 + c
                } else {
                    c - self.m1
                }
            }
            User::Two => c,
        }
    }
}

/// Tracks how many own-packet dimensions a receiver can separate from interference.
#[derive(Debug, Clone)]
pub struct DecodeTracker {
    echelon: Echelon,
    receiver: User,
    m1: usize,
    m2: usize,
    own_count: usize,
    interferer_count: usize,
}

impl DecodeTracker {
    pub fn new(field: FieldSpec, receiver: User, m1: usize, m2: usize) -> Self {
        let (own_count, interferer_count) = match receiver {
            User::One => (m1, m2),
            User::Two => (m2, m1),
        };
        Self {
            echelon: Echelon::new(field, m1 + m2),
            receiver,
            m1,
            m2,
            own_count,
            interferer_count,
        }
    }

    pub fn from_store(field: FieldSpec, store: &EquationStore) -> Self {
        let mut t = Self::new(field, store.receiver, store.m1, store.m2);
        let mut order: Vec<&Equation> = store.rows.iter().collect();
        order.sort_by_key(|r| r.coeffs.len());
        for r in order {
            t.add(&r.coeffs);
        }
        t
    }

    pub fn add(&mut self, coeffs: &[(usize, u64)]) -> bool {
        let probe = EquationStore::new(self.receiver, self.m1, self.m2);
        let row: Vec<(usize, u64)> = coeffs.iter().map(|&(c, x)| (probe.ordered(c), x)).collect();
        self.echelon.insert(&row).is_some()
    }

    pub fn rank(&self) -> usize {
        self.echelon.rank()
    }

    pub fn interference_rank(&self) -> usize {
        self.echelon.pivots_below(self.interferer_count)
    }

    /// Own dimensions resolvable after removing the interference span.
    pub fn useful(&self) -> usize {
        self.rank() - self.interference_rank()
    }

    pub fn own_count(&self) -> usize {
        self.own_count
    }

    pub fn deficit(&self) -> usize {
        self.own_count - self.useful()
    }

    pub fn is_decodable(&self) -> bool {
        self.useful() == self.own_count
    }
}

/// True iff rank(all rows) - rank(interferer columns) equals `own_count`.
pub fn decodable(store: &EquationStore, own_count: usize, interferer_count: usize, field: &FieldSpec) -> bool {
    assert_eq!(store.split(), (own_count, interferer_count), "column split mismatch");
    DecodeTracker::from_store(*field, store).is_decodable()
}

/// Substitutes known packet values, zeroing their columns.
pub fn project_out_known(store: &EquationStore, known: &BTreeMap<usize, u64>, field: &FieldSpec) -> EquationStore {
    let mut out = store.clone();
    for row in out.rows.iter_mut() {
        let mut rhs = row.rhs;
        row.coeffs.retain(|&(c, x)| match known.get(&c) {
            Some(&val) => {
                rhs = field.sub(rhs, field.mul(x, val));
                false
            }
            None => true,
        });
        row.rhs = rhs;
    }
    out
}

/// Solves for the receiver's own packet values; `None` unless decodable.
pub fn decode_own(store: &EquationStore, field: &FieldSpec) -> Option<Vec<u64>> {
    let (own, intf) = store.split();
    let n = own + intf;
    let mut rows: Vec<Vec<u64>> = store
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![0; n + 1];
            for &(c, x) in &r.coeffs {
                v[store.ordered(c)] = x;
            }
            v[n] = r.rhs;
            v
        })
        .collect();
    // reduced row echelon form with interferer columns first
    let mut pivot_row_of = vec![usize::MAX; n];
    let mut next = 0;
    for col in 0..n {
        let Some(pr) = (next..rows.len()).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(next, pr);
        let inv = field.inv(rows[next][col]);
        for x in rows[next].iter_mut() {
            *x = field.mul(*x, inv);
        }
        let piv = rows[next].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != next && row[col] != 0 {
                let f = row[col];
                for (a, &b) in row.iter_mut().zip(&piv) {
                    *a = field.sub(*a, field.mul(f, b));
                }
            }
        }
        pivot_row_of[col] = next;
        next += 1;
    }
    let mut values = Vec::with_capacity(own);
    for k in 0..own {
        let r = pivot_row_of[intf + k];
        if r == usize::MAX {
            return None;
        }
        if rows[r][..n].iter().enumerate().any(|(c, &x)| x != 0 && c != intf + k) {
            return None;
        }
        values.push(rows[r][n]);
    }
    Some(values)
}
