//! Closed-form throughput region and derived scalars.

use serde::{Deserialize, Serialize};

use crate::correlation::CorrelationParams;

pub const DEFAULT_TOL: f64 = 1e-12;

pub fn beta(p: f64, rho_tx: f64) -> f64 {
    1.0 + (1.0 - rho_tx) * (1.0 - p)
}

/// Probability that both links into a receiver are off.
pub fn p_rx_00(p: f64, rho_rx: f64) -> f64 {
    let v = 1.0 + p * p + p * (1.0 - p) * rho_rx - 2.0 * p;
    debug_assert!((-1e-12..=1.0 + 1e-12).contains(&v), "p_rx_00 = {v} out of range");
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub p: f64,
    pub rho_tx: f64,
    pub rho_rx: f64,
    pub individual_cap: f64,
    pub beta: f64,
    pub p_rx_00: f64,
    pub rhs: f64,
    /// Counter-clockwise from the origin.
    pub vertices: Vec<(f64, f64)>,
}

/// Half-plane a1*R1 + a2*R2 <= b.
#[derive(Debug, Clone, Copy)]
struct HalfPlane {
    a1: f64,
    a2: f64,
    b: f64,
}

impl HalfPlane {
    fn slack(&self, x: (f64, f64)) -> f64 {
        self.b - self.a1 * x.0 - self.a2 * x.1
    }
}

impl Region {
    fn half_planes(&self) -> [HalfPlane; 6] {
        let (p, bt, rhs) = (self.individual_cap, self.beta, self.rhs);
        [
            HalfPlane { a1: -1.0, a2: 0.0, b: 0.0 },
            HalfPlane { a1: 0.0, a2: -1.0, b: 0.0 },
            HalfPlane { a1: 1.0, a2: 0.0, b: p },
            HalfPlane { a1: 0.0, a2: 1.0, b: p },
            HalfPlane { a1: 1.0, a2: bt, b: rhs },
            HalfPlane { a1: bt, a2: 1.0, b: rhs },
        ]
    }

    pub fn contains(&self, r1: f64, r2: f64) -> bool {
        self.contains_with_tol(r1, r2, DEFAULT_TOL)
    }

    pub fn contains_with_tol(&self, r1: f64, r2: f64, tol: f64) -> bool {
        self.half_planes().iter().all(|h| h.slack((r1, r2)) >= -tol)
    }

    /// Number of constraints that hold with equality at `x`.
    pub fn active_constraints(&self, x: (f64, f64)) -> usize {
        self.half_planes()
            .iter()
            .filter(|h| h.slack(x).abs() <= 1e-9)
            .count()
    }

    /// The Pareto frontier from (p, 0) to (0, p).
    pub fn frontier(&self) -> Vec<(f64, f64)> {
        self.vertices
            .iter()
            .copied()
            .filter(|&(a, b)| a > DEFAULT_TOL || b > DEFAULT_TOL)
            .collect()
    }
}

pub fn region(params: &CorrelationParams) -> Region {
    let p = params.p();
    let bt = beta(p, params.rho_tx());
    let p00 = p_rx_00(p, params.rho_rx());
    let mut r = Region {
        p,
        rho_tx: params.rho_tx(),
        rho_rx: params.rho_rx(),
        individual_cap: p,
        beta: bt,
        p_rx_00: p00,
        rhs: bt * (1.0 - p00),
        vertices: Vec::new(),
    };
    r.vertices = enumerate_vertices(&r);
    r
}

fn enumerate_vertices(r: &Region) -> Vec<(f64, f64)> {
    let hs = r.half_planes();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for i in 0..hs.len() {
        for j in i + 1..hs.len() {
            let (h, g) = (hs[i], hs[j]);
            let det = h.a1 * g.a2 - h.a2 * g.a1;
            if det.abs() < 1e-15 {
                continue;
            }
            let x = ((h.b * g.a2 - h.a2 * g.b) / det, (h.a1 * g.b - h.b * g.a1) / det);
            let x = (clean(x.0), clean(x.1));
            if hs.iter().all(|c| c.slack(x) >= -1e-12)
                && !pts.iter().any(|q| (q.0 - x.0).abs() < 1e-12 && (q.1 - x.1).abs() < 1e-12)
            {
                pts.push(x);
            }
        }
    }
    // the polygon contains the origin, so sorting by angle around it orders the boundary
    pts.sort_by(|a, b| {
        let ka = sort_key(*a);
        let kb = sort_key(*b);
        ka.total_cmp(&kb)
    });
    pts
}

fn clean(x: f64) -> f64 {
    if x.abs() < 1e-15 {
        0.0
    } else {
        x
    }
}

fn sort_key(x: (f64, f64)) -> f64 {
    if x.0 == 0.0 && x.1 == 0.0 {
        -1.0
    } else {
        x.1.atan2(x.0)
    }
}

pub fn max_symmetric_sum_rate(params: &CorrelationParams) -> f64 {
    let p = params.p();
    let bt = beta(p, params.rho_tx());
    let p00 = p_rx_00(p, params.rho_rx());
    (2.0 * p).min(2.0 * bt * (1.0 - p00) / (1.0 + bt))
}

/// Frontier polyline with `resolution` evenly spaced points by arc length; corner
/// vertices are always kept.
pub fn export_boundary(region: &Region, resolution: usize) -> Vec<(f64, f64)> {
    let resolution = resolution.max(2);
    let f = region.frontier();
    if f.len() < 2 {
        return vec![(0.0, 0.0); 1];
    }
    let mut cum = vec![0.0];
    for w in f.windows(2) {
        let d = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    let mut samples: Vec<(f64, (f64, f64))> = f.iter().zip(&cum).map(|(&x, &s)| (s, x)).collect();
    for k in 0..resolution {
        let s = total * k as f64 / (resolution - 1) as f64;
        let seg = (1..cum.len()).find(|&i| cum[i] >= s).unwrap_or(cum.len() - 1);
        let len = cum[seg] - cum[seg - 1];
        let t = if len > 0.0 { (s - cum[seg - 1]) / len } else { 0.0 };
        let (a, b) = (f[seg - 1], f[seg]);
        samples.push((s, (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))));
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (_, x) in samples {
        if !out.iter().any(|q| (q.0 - x.0).abs() < 1e-12 && (q.1 - x.1).abs() < 1e-12) {
            out.push(x);
        }
    }
    out
}
