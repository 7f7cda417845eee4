use corrlink::region::*;
use corrlink::CorrelationParams;
use proptest::prelude::*;

fn params(p: f64, tx: f64, rx: f64) -> CorrelationParams {
    CorrelationParams::new(p, tx, rx).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

#[test]
fn beta_examples() {
    for p in [0.0, 0.3, 0.7, 1.0] {
        assert!(close(beta(p, 1.0), 1.0));
    }
    for rho in [-1.0, -0.2, 0.4, 1.0] {
        assert!(close(beta(1.0, rho), 1.0));
    }
    assert!(close(beta(0.5, 0.5), 1.25));
}

#[test]
fn p_rx_00_examples() {
    assert!(close(p_rx_00(0.5, 0.5), 0.375));
    for p in [0.0, 0.25, 0.5, 0.8, 1.0] {
        assert!(close(p_rx_00(p, 0.0), (1.0 - p) * (1.0 - p)));
    }
    assert!(close(p_rx_00(0.45, -0.75), 0.116875));
}

#[test]
fn max_symmetric_sum_rate_examples() {
    assert!(close(max_symmetric_sum_rate(&params(0.5, 0.5, 0.5)), 25.0 / 36.0));
    assert!(close(max_symmetric_sum_rate(&params(0.45, 0.0, -0.75)), 0.9));
    // the cap 2p binds at (0.45, 0, -0.75)
    let r = region(&params(0.45, 0.0, -0.75));
    assert!(2.0 * r.beta * (1.0 - r.p_rx_00) / (1.0 + r.beta) > 0.9);
    assert!(close(max_symmetric_sum_rate(&params(0.5, 0.0, 0.0)), 2.0 * 1.5 * 0.75 / 2.5));
    assert!(close(max_symmetric_sum_rate(&params(0.5, 0.0, 0.0)), 0.9));
}

#[test]
fn anticorrelated_transmitters_reach_the_corner() {
    let r = region(&params(0.5, -1.0, 0.0));
    assert!(r.contains(0.5, 0.5));
    assert!(r.vertices.iter().any(|&(a, b)| close(a, 0.5) && close(b, 0.5)));
}

#[test]
fn fully_correlated_transmitters_match_no_feedback_region() {
    let r = region(&params(0.5, 1.0, 0.0));
    assert!(close(r.beta, 1.0));
    assert!(close(r.rhs, 0.75));
    assert!(r.contains(0.5, 0.25));
    assert!(r.contains(0.25, 0.5));
    assert!(r.contains(0.375, 0.375));
    assert!(!r.contains(0.5, 0.5));
    assert!(!r.contains(0.4, 0.36));
    let mut v = r.vertices.clone();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(v, vec![(0.0, 0.0), (0.0, 0.5), (0.25, 0.5), (0.5, 0.0), (0.5, 0.25)]);
}

#[test]
fn degenerate_region_at_p_zero() {
    let r = region(&params(0.0, 0.3, 0.0));
    assert_eq!(r.vertices, vec![(0.0, 0.0)]);
    assert!(r.contains(0.0, 0.0));
    assert!(!r.contains(1e-6, 0.0));
}

#[test]
fn contains_examples() {
    let r = region(&params(0.5, 0.5, 0.5));
    assert!(r.contains(25.0 / 72.0, 25.0 / 72.0));
    assert!(!r.contains(25.0 / 72.0 + 1e-9, 25.0 / 72.0));
    assert!(r.contains(0.0, 0.0));
    assert!(!region(&params(0.5, 1.0, 0.0)).contains(0.5, 0.5));
    assert!(r.contains_with_tol(0.355, 0.355, 0.02));
}

#[test]
fn boundary_export() {
    let r = region(&params(0.5, 0.5, 0.5));
    let b = export_boundary(&r, 2);
    assert_eq!(b.first(), Some(&(0.5, 0.0)));
    assert_eq!(b.last(), Some(&(0.0, 0.5)));
    // R1 = p meets beta*R1 + R2 = rhs at R2 = rhs - 1.25 * 0.5
    let corner = (0.5, 0.78125 - 0.625);
    assert!(b.iter().any(|&(x, y)| close(x, corner.0) && close(y, corner.1)));
    let sym = 0.78125 / 2.25;
    assert!(b.iter().any(|&(x, y)| close(x, sym) && close(y, sym)));

    let fine = export_boundary(&r, 50);
    assert!(fine.len() >= 50);
    for w in fine.windows(2) {
        assert!(w[1].0 <= w[0].0 + 1e-12 && w[1].1 >= w[0].1 - 1e-12);
    }
    for &(x, y) in &fine {
        assert!(r.contains(x, y));
        assert!(!r.contains_with_tol(x + 1e-6, y + 1e-6, 0.0));
    }

    let rect = export_boundary(&region(&params(0.5, -1.0, 0.0)), 2);
    assert!(rect.iter().any(|&(x, y)| close(x, 0.5) && close(y, 0.5)));
}

#[test]
fn independent_links_region() {
    for p in [0.2, 0.5, 0.8] {
        let q = 1.0 - p;
        let r = region(&params(p, 0.0, 0.0));
        assert!(close(r.beta, 1.0 + q));
        assert!(close(r.rhs, (1.0 + q) * (1.0 - q * q)));
    }
}

#[test]
fn vertices_are_tight() {
    for (p, tx, rx) in [(0.5, 0.5, 0.5), (0.45, 0.0, -0.75), (0.5, -1.0, 0.0), (0.5, 1.0, 0.0), (0.3, 0.0, 0.2)] {
        let r = region(&params(p, tx, rx));
        for &v in &r.vertices {
            assert!(r.active_constraints(v) >= 2, "{v:?}");
            assert!(r.contains(v.0, v.1));
        }
    }
}

fn grid() -> Vec<(f64, f64)> {
    let mut g = Vec::new();
    for i in 0..=40 {
        for j in 0..=40 {
            g.push((i as f64 / 40.0, j as f64 / 40.0));
        }
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lower_rho_tx_enlarges(a in -1.0f64..=1.0, b in -1.0f64..=1.0, rx in -1.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p = 0.5;
        let small = region(&params(p, hi, rx));
        let big = region(&params(p, lo, rx));
        for &(x, y) in small.vertices.iter().chain(grid().iter()) {
            if small.contains(x, y) {
                prop_assert!(big.contains(x, y));
            }
        }
    }

    #[test]
    fn lower_rho_rx_enlarges(a in -1.0f64..=1.0, b in -1.0f64..=1.0, tx in -1.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p = 0.5;
        let small = region(&params(p, tx, hi));
        let big = region(&params(p, tx, lo));
        for &(x, y) in small.vertices.iter().chain(grid().iter()) {
            if small.contains(x, y) {
                prop_assert!(big.contains(x, y));
            }
        }
    }

    #[test]
    fn symmetric_membership(x in 0.0f64..1.0, y in 0.0f64..1.0, tx in -0.5f64..=1.0, rx in -0.5f64..=1.0) {
        let r = region(&params(0.55, tx, rx));
        prop_assert_eq!(r.contains(x, y), r.contains(y, x));
    }

    #[test]
    fn rhs_and_beta_in_range(t in 0.0f64..=1.0, tx in 0.0f64..=1.0, rx in 0.0f64..=1.0) {
        let p = t;
        let r = region(&params(p, tx, rx));
        prop_assert!((0.0..=1.0).contains(&r.p_rx_00));
        prop_assert!(r.beta >= 1.0);
        prop_assert!(r.rhs >= 0.0);
    }
}
