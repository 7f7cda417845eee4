//! Correlated binary shadowing process and its 16-state joint law.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::FieldSpec;

const EPS: f64 = 1e-12;
const IPF_TOL: f64 = 1e-10;
const IPF_MAX_SWEEPS: usize = 10_000;
const CHECK_TOL: f64 = 1e-9;

/// One of the two users. Transmitter `i` serves receiver `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum User {
    One,
    Two,
}

impl User {
    pub const BOTH: [User; 2] = [User::One, User::Two];

    pub fn index(self) -> usize {
        match self {
            User::One => 0,
            User::Two => 1,
        }
    }

    pub fn other(self) -> User {
        match self {
            User::One => User::Two,
            User::Two => User::One,
        }
    }

    pub fn from_index(i: usize) -> User {
        if i == 0 {
            User::One
        } else {
            User::Two
        }
    }
}

impl fmt::Display for User {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index() + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo - EPS && x <= self.hi + EPS
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Range of on-probabilities compatible with a pairwise correlation `rho`.
pub fn feasible_range(rho: f64) -> Interval {
    if rho >= 1.0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    Interval {
        lo: (-rho / (1.0 - rho)).max(0.0),
        hi: (1.0 / (1.0 - rho)).min(1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationParams {
    p: f64,
    rho_tx: f64,
    rho_rx: f64,
}

fn check_rho(name: &'static str, rho: f64, p: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::CorrelationOutOfRange { name, value: rho });
    }
    let r = feasible_range(rho);
    if !r.contains(p) {
        return Err(Error::Infeasible {
            name,
            rho,
            p,
            lo: r.lo,
            hi: r.hi,
        });
    }
    Ok(())
}

impl CorrelationParams {
    pub fn new(p: f64, rho_tx: f64, rho_rx: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        check_rho("rho_tx", rho_tx, p)?;
        check_rho("rho_rx", rho_rx, p)?;
        Ok(Self { p, rho_tx, rho_rx })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    pub fn rho_tx(&self) -> f64 {
        self.rho_tx
    }

    pub fn rho_rx(&self) -> f64 {
        self.rho_rx
    }

    pub fn tx_joint(&self) -> PairwiseJoint {
        joint_unchecked(self.p, self.rho_tx)
    }

    pub fn rx_joint(&self) -> PairwiseJoint {
        joint_unchecked(self.p, self.rho_rx)
    }
}

/// Joint law of two correlated Bernoulli(p) bits; `pkl` is P(first = k, second = l).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseJoint {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl PairwiseJoint {
    pub fn get(&self, a: u8, b: u8) -> f64 {
        match (a, b) {
            (0, 0) => self.p00,
            (0, 1) => self.p01,
            (1, 0) => self.p10,
            _ => self.p11,
        }
    }

    fn max_diff(&self, other: &PairwiseJoint) -> f64 {
        [
            self.p00 - other.p00,
            self.p01 - other.p01,
            self.p10 - other.p10,
            self.p11 - other.p11,
        ]
        .iter()
        .fold(0.0f64, |m, d| m.max(d.abs()))
    }
}

fn snap(x: f64) -> f64 {
    if x.abs() < EPS {
        0.0
    } else {
        x
    }
}

fn joint_unchecked(p: f64, rho: f64) -> PairwiseJoint {
    let q = 1.0 - p;
    let p11 = snap(p * q * rho + p * p);
    let p10 = snap(p - p11);
    let p00 = snap(1.0 - p11 - 2.0 * p10);
    PairwiseJoint {
        p00,
        p01: p10,
        p10,
        p11,
    }
}

pub fn pairwise_joint(p: f64, rho: f64) -> Result<PairwiseJoint> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    check_rho("rho", rho, p)?;
    Ok(joint_unchecked(p, rho))
}

/// Shadowing quadruple packed as the bit string `a11 a12 a21 a22` (a11 is the MSB).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Alpha(pub u8);

impl Alpha {
    pub const ALL_ON: Alpha = Alpha(0b1111);

    pub fn from_bits(a11: bool, a12: bool, a21: bool, a22: bool) -> Alpha {
        Alpha((a11 as u8) << 3 | (a12 as u8) << 2 | (a21 as u8) << 1 | a22 as u8)
    }

    /// Parses strings such as `"1011"`.
    pub fn parse(s: &str) -> Option<Alpha> {
        if s.len() != 4 {
            return None;
        }
        u8::from_str_radix(s, 2).ok().map(Alpha)
    }

    fn var(v: usize) -> u8 {
        1 << (3 - v)
    }

    /// Link from transmitter `tx` into receiver `rx`.
    pub fn link(self, rx: User, tx: User) -> bool {
        self.0 & Self::var(2 * rx.index() + tx.index()) != 0
    }

    /// Zeroes every link leaving a silent transmitter.
    pub fn with_active(self, active: [bool; 2]) -> Alpha {
        let mut a = self.0;
        for tx in User::BOTH {
            if !active[tx.index()] {
                for rx in User::BOTH {
                    a &= !Self::var(2 * rx.index() + tx.index());
                }
            }
        }
        Alpha(a)
    }

    pub fn bitstring(self) -> String {
        format!("{:04b}", self.0)
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04b}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelState {
    pub alpha: Alpha,
    /// g11, g12, g21, g22.
    pub gains: [u64; 4],
}

impl ChannelState {
    pub fn gain(&self, rx: User, tx: User) -> u64 {
        self.gains[2 * rx.index() + tx.index()]
    }
}

/// Probability of each of the 16 shadowing quadruples, indexed by `Alpha.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointStatePmf {
    probs: [f64; 16],
    cdf: [f64; 16],
}

const TX_PAIRS: [(usize, usize); 2] = [(0, 2), (1, 3)];
const RX_PAIRS: [(usize, usize); 2] = [(0, 1), (2, 3)];

fn bit(state: usize, v: usize) -> u8 {
    ((state >> (3 - v)) & 1) as u8
}

impl JointStatePmf {
    pub fn from_probs(probs: [f64; 16]) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|&x| x < -CHECK_TOL || !x.is_finite()) || (total - 1.0).abs() > CHECK_TOL {
            return Err(Error::Config("state probabilities must be nonnegative and sum to 1".into()));
        }
        let mut clean = probs;
        for x in clean.iter_mut() {
            *x = x.max(0.0);
        }
        let mut cdf = [0.0; 16];
        let mut acc = 0.0;
        for (i, &x) in clean.iter().enumerate() {
            acc += x;
            cdf[i] = acc;
        }
        Ok(Self { probs: clean, cdf })
    }

    pub fn probs(&self) -> &[f64; 16] {
        &self.probs
    }

    pub fn prob(&self, alpha: Alpha) -> f64 {
        self.probs[alpha.0 as usize]
    }

    /// P(link rx <- tx is on).
    pub fn marginal(&self, rx: User, tx: User) -> f64 {
        (0..16)
            .filter(|&s| Alpha(s as u8).link(rx, tx))
            .map(|s| self.probs[s])
            .sum()
    }

    /// Joint law of two links, each given as (rx, tx).
    pub fn pairwise(&self, a: (User, User), b: (User, User)) -> PairwiseJoint {
        let mut t = [[0.0; 2]; 2];
        for s in 0..16 {
            let al = Alpha(s as u8);
            t[al.link(a.0, a.1) as usize][al.link(b.0, b.1) as usize] += self.probs[s];
        }
        PairwiseJoint {
            p00: t[0][0],
            p01: t[0][1],
            p10: t[1][0],
            p11: t[1][1],
        }
    }

    /// Largest deviation from the four pairwise constraints and the four marginals.
    pub fn max_violation(&self, params: &CorrelationParams) -> f64 {
        let tx = params.tx_joint();
        let rx = params.rx_joint();
        let mut worst = 0.0f64;
        for &(u, v) in &TX_PAIRS {
            worst = worst.max(self.var_pair(u, v).max_diff(&tx));
        }
        for &(u, v) in &RX_PAIRS {
            worst = worst.max(self.var_pair(u, v).max_diff(&rx));
        }
        for v in 0..4 {
            let m: f64 = (0..16).filter(|&s| bit(s, v) == 1).map(|s| self.probs[s]).sum();
            worst = worst.max((m - params.p).abs());
        }
        worst = worst.max((self.probs.iter().sum::<f64>() - 1.0).abs());
        worst
    }

    fn var_pair(&self, u: usize, v: usize) -> PairwiseJoint {
        let mut t = [[0.0; 2]; 2];
        for s in 0..16 {
            t[bit(s, u) as usize][bit(s, v) as usize] += self.probs[s];
        }
        PairwiseJoint {
            p00: t[0][0],
            p01: t[0][1],
            p10: t[1][0],
            p11: t[1][1],
        }
    }

    /// Conditional probability of `event` given `given`.
    pub fn conditional(&self, event: impl Fn(Alpha) -> bool, given: impl Fn(Alpha) -> bool) -> Option<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for s in 0..16 {
            let a = Alpha(s as u8);
            if given(a) {
                den += self.probs[s];
                if event(a) {
                    num += self.probs[s];
                }
            }
        }
        (den > 0.0).then(|| num / den)
    }

    pub fn entropy(&self) -> f64 {
        self.probs
            .iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| -x * x.ln())
            .sum()
    }

    pub fn sample_alpha<R: Rng + ?Sized>(&self, rng: &mut R) -> Alpha {
        let u: f64 = rng.gen();
        for (i, &c) in self.cdf.iter().enumerate() {
            if u < c {
                return Alpha(i as u8);
            }
        }
        // rounding left u above the last cumulative value
        let last = (0..16).rev().find(|&i| self.probs[i] > 0.0).unwrap_or(15);
        Alpha(last as u8)
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        (0..16)
            .map(|s| (Alpha(s as u8).bitstring(), self.probs[s]))
            .collect()
    }
}

pub fn sample_state<R: Rng + ?Sized>(pmf: &JointStatePmf, rng: &mut R, field: &FieldSpec) -> ChannelState {
    let alpha = pmf.sample_alpha(rng);
    let gains = [
        field.random_nonzero(rng),
        field.random_nonzero(rng),
        field.random_nonzero(rng),
        field.random_nonzero(rng),
    ];
    ChannelState { alpha, gains }
}

/// A pairwise table over two variables of the full quadruple.
#[derive(Clone, Copy)]
struct Edge {
    u: usize,
    v: usize,
    joint: PairwiseJoint,
    label: &'static str,
}

fn edges(params: &CorrelationParams) -> [Edge; 4] {
    let tx = params.tx_joint();
    let rx = params.rx_joint();
    [
        Edge { u: 0, v: 2, joint: tx, label: "tx(a11,a21)" },
        Edge { u: 1, v: 3, joint: tx, label: "tx(a12,a22)" },
        Edge { u: 0, v: 1, joint: rx, label: "rx(a11,a12)" },
        Edge { u: 2, v: 3, joint: rx, label: "rx(a21,a22)" },
    ]
}

fn all_labels() -> String {
    "{tx(a11,a21), tx(a12,a22), rx(a11,a12), rx(a21,a22)}".to_string()
}

struct Dsu {
    parent: [usize; 4],
    parity: [u8; 4],
}

impl Dsu {
    fn new() -> Self {
        Self { parent: [0, 1, 2, 3], parity: [0; 4] }
    }

    fn find(&mut self, x: usize) -> (usize, u8) {
        if self.parent[x] == x {
            return (x, 0);
        }
        let (r, par) = self.find(self.parent[x]);
        self.parent[x] = r;
        self.parity[x] ^= par;
        (r, self.parity[x])
    }

    /// Records x xor y = rel. Returns false on contradiction.
    fn union(&mut self, x: usize, y: usize, rel: u8) -> bool {
        let (rx, px) = self.find(x);
        let (ry, py) = self.find(y);
        if rx == ry {
            return px ^ py == rel;
        }
        self.parent[ry] = rx;
        self.parity[ry] = px ^ py ^ rel;
        true
    }
}

/// One IPF constraint: each reduced state belongs to one cell with a target mass.
struct Constraint {
    cell_of: Vec<usize>,
    targets: Vec<f64>,
}

/// Maximum-entropy joint law consistent with the four pairwise constraints.
pub fn build_joint_pmf(params: &CorrelationParams) -> Result<JointStatePmf> {
    if let Some(pmf) = fit_ipf(params)? {
        if pmf.max_violation(params) < CHECK_TOL {
            return Ok(pmf);
        }
    }
    fit_linear(params)
}

fn fit_ipf(params: &CorrelationParams) -> Result<Option<JointStatePmf>> {
    let es = edges(params);
    let mut dsu = Dsu::new();
    let mut collapsed = [false; 4];
    for (k, e) in es.iter().enumerate() {
        let rho = if k < 2 { params.rho_tx } else { params.rho_rx };
        if rho.abs() >= 1.0 - EPS {
            let rel = if rho > 0.0 { 0 } else { 1 };
            if !dsu.union(e.u, e.v, rel) {
                return Err(Error::JointInfeasible(all_labels()));
            }
            collapsed[k] = true;
        }
    }
    let mut reps: Vec<usize> = Vec::new();
    let mut comp = [0usize; 4];
    let mut par = [0u8; 4];
    for v in 0..4 {
        let (r, p) = dsu.find(v);
        let idx = match reps.iter().position(|&x| x == r) {
            Some(i) => i,
            None => {
                reps.push(r);
                reps.len() - 1
            }
        };
        comp[v] = idx;
        par[v] = p;
    }
    let k = reps.len();
    let n = 1usize << k;
    let value = |s: usize, v: usize| -> u8 { ((s >> comp[v]) & 1) as u8 ^ par[v] };

    let mut constraints = Vec::new();
    for (i, e) in es.iter().enumerate() {
        if collapsed[i] {
            continue;
        }
        let cell_of: Vec<usize> = (0..n).map(|s| 2 * value(s, e.u) as usize + value(s, e.v) as usize).collect();
        let targets = vec![e.joint.p00, e.joint.p01, e.joint.p10, e.joint.p11];
        if comp[e.u] == comp[e.v] {
            // both ends are tied; the forced cells must carry all the mass
            let forbidden: f64 = (0..4)
                .filter(|c| !cell_of.contains(c))
                .map(|c| targets[c])
                .sum();
            if forbidden > EPS {
                return Err(Error::JointInfeasible(e.label.to_string()));
            }
        }
        constraints.push(Constraint { cell_of, targets });
    }
    for c in 0..k {
        let v = (0..4).find(|&v| comp[v] == c).unwrap();
        let cell_of: Vec<usize> = (0..n).map(|s| value(s, v) as usize).collect();
        constraints.push(Constraint {
            cell_of,
            targets: vec![params.q(), params.p],
        });
    }

    let mut w = vec![1.0 / n as f64; n];
    let mut converged = false;
    for _ in 0..IPF_MAX_SWEEPS {
        for c in &constraints {
            let mut mass = vec![0.0; c.targets.len()];
            for s in 0..n {
                mass[c.cell_of[s]] += w[s];
            }
            for s in 0..n {
                let cell = c.cell_of[s];
                w[s] = if mass[cell] > 0.0 { w[s] * c.targets[cell] / mass[cell] } else { 0.0 };
            }
        }
        let mut worst = 0.0f64;
        for c in &constraints {
            let mut mass = vec![0.0; c.targets.len()];
            for s in 0..n {
                mass[c.cell_of[s]] += w[s];
            }
            for (m, t) in mass.iter().zip(&c.targets) {
                worst = worst.max((m - t).abs());
            }
        }
        if worst < IPF_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Ok(None);
    }
    let mut probs = [0.0; 16];
    for (s, &ws) in w.iter().enumerate() {
        let full = (0..4).fold(0usize, |acc, v| acc | (value(s, v) as usize) << (3 - v));
        probs[full] += ws;
    }
    JointStatePmf::from_probs(probs).map(Some)
}

/// Linear-feasibility fallback: least-norm solution when nonnegative, otherwise
/// the centroid of the feasible basic solutions.
fn fit_linear(params: &CorrelationParams) -> Result<JointStatePmf> {
    let es = edges(params);
    let mut rows: Vec<([f64; 16], f64)> = Vec::new();
    for e in &es {
        for a in 0..2u8 {
            for b in 0..2u8 {
                let mut r = [0.0; 16];
                for (s, x) in r.iter_mut().enumerate() {
                    if bit(s, e.u) == a && bit(s, e.v) == b {
                        *x = 1.0;
                    }
                }
                rows.push((r, e.joint.get(a, b)));
            }
        }
    }
    rows.push(([1.0; 16], 1.0));
    let (a, b) = independent_rows(&rows);
    let r = a.len();

    let infeasible = || Error::JointInfeasible(all_labels());

    // least-norm x = A^T (A A^T)^{-1} b
    let mut gram = vec![vec![0.0; r]; r];
    for i in 0..r {
        for j in 0..r {
            gram[i][j] = (0..16).map(|c| a[i][c] * a[j][c]).sum();
        }
    }
    if let Some(y) = solve(gram, b.clone()) {
        let mut x = [0.0; 16];
        for (c, xc) in x.iter_mut().enumerate() {
            *xc = (0..r).map(|i| a[i][c] * y[i]).sum();
        }
        if x.iter().all(|&v| v >= -EPS) {
            let pmf = JointStatePmf::from_probs(x)?;
            if pmf.max_violation(params) < CHECK_TOL {
                return Ok(pmf);
            }
        }
    }

    let mut vertices: Vec<[f64; 16]> = Vec::new();
    let mut cols = Vec::with_capacity(r);
    for_each_subset(16, r, &mut cols, &mut |cols| {
        let m: Vec<Vec<f64>> = (0..r).map(|i| cols.iter().map(|&c| a[i][c]).collect()).collect();
        if let Some(xs) = solve(m, b.clone()) {
            if xs.iter().all(|&v| v >= -EPS) {
                let mut x = [0.0; 16];
                for (k, &c) in cols.iter().enumerate() {
                    x[c] = xs[k].max(0.0);
                }
                if !vertices.iter().any(|v| v.iter().zip(&x).all(|(p, q)| (p - q).abs() < 1e-9)) {
                    vertices.push(x);
                }
            }
        }
    });
    if vertices.is_empty() {
        return Err(infeasible());
    }
    let mut x = [0.0; 16];
    for v in &vertices {
        for (xc, vc) in x.iter_mut().zip(v) {
            *xc += vc / vertices.len() as f64;
        }
    }
    let pmf = JointStatePmf::from_probs(x)?;
    if pmf.max_violation(params) < CHECK_TOL {
        Ok(pmf)
    } else {
        Err(infeasible())
    }
}

fn independent_rows(rows: &[([f64; 16], f64)]) -> (Vec<[f64; 16]>, Vec<f64>) {
    let mut basis: Vec<[f64; 16]> = Vec::new();
    let mut kept_a = Vec::new();
    let mut kept_b = Vec::new();
    for (r, rhs) in rows {
        let mut v = *r;
        for bvec in &basis {
            let lead = bvec.iter().position(|x| x.abs() > 1e-9).unwrap();
            let f = v[lead] / bvec[lead];
            if f != 0.0 {
                for c in 0..16 {
                    v[c] -= f * bvec[c];
                }
            }
        }
        if v.iter().any(|x| x.abs() > 1e-9) {
            basis.push(v);
            kept_a.push(*r);
            kept_b.push(*rhs);
        }
    }
    (kept_a, kept_b)
}

fn for_each_subset(n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if cur.len() == k {
        f(cur);
        return;
    }
    let start = cur.last().map_or(0, |&c| c + 1);
    for c in start..n {
        if n - c < k - cur.len() {
            break;
        }
        cur.push(c);
        for_each_subset(n, k, cur, f);
        cur.pop();
    }
}

/// Square solve with partial pivoting; `None` when singular.
fn solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                if f != 0.0 {
                    for c in col..n {
                        m[row][c] -= f * m[col][c];
                    }
                    b[row] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / m[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_links() {
        let a = Alpha::parse("1011").unwrap();
        assert!(a.link(User::One, User::One));
        assert!(!a.link(User::One, User::Two));
        assert!(a.link(User::Two, User::One));
        assert!(a.link(User::Two, User::Two));
        assert_eq!(a.with_active([true, false]), Alpha::parse("1010").unwrap());
        assert_eq!(a.to_string(), "1011");
    }

    #[test]
    fn dsu_detects_parity_conflict() {
        let mut d = Dsu::new();
        assert!(d.union(0, 1, 0));
        assert!(d.union(1, 2, 1));
        assert!(!d.union(0, 2, 0));
        assert!(d.union(0, 2, 1));
    }

    #[test]
    fn linear_fallback_matches_constraints() {
        let params = CorrelationParams::new(0.5, 0.3, -0.4).unwrap();
        let pmf = fit_linear(&params).unwrap();
        assert!(pmf.max_violation(&params) < 1e-9);
    }
}
