use std::collections::BTreeMap;
use std::sync::Arc;

use corrlink::linalg::*;
use corrlink::protocol::{simulate_detailed, Mode, SimConfig};
use corrlink::{build_joint_pmf, CorrelationParams, User};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn big() -> FieldSpec {
    FieldSpec::default()
}

/// Elimination by cross-multiplication, no inverses.
fn fraction_free_rank(rows: &[Vec<u64>], q: u64) -> usize {
    let mut m: Vec<Vec<u128>> = rows.iter().map(|r| r.iter().map(|&x| x as u128 % q as u128).collect()).collect();
    let q = q as u128;
    let ncols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..ncols {
        let Some(p) = (rank..m.len()).find(|&i| m[i][c] != 0) else { continue };
        m.swap(rank, p);
        let piv = m[rank].clone();
        for row in m.iter_mut().skip(rank + 1) {
            let f = row[c];
            if f == 0 {
                continue;
            }
            for k in 0..ncols {
                row[k] = (piv[c] * row[k] % q + q * q - f * piv[k] % q) % q;
            }
        }
        rank += 1;
    }
    rank
}

fn naive_gf2_rank(rows: &[Vec<u8>]) -> usize {
    let mut m = rows.to_vec();
    let ncols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..ncols {
        let Some(p) = (rank..m.len()).find(|&i| m[i][c] == 1) else { continue };
        m.swap(rank, p);
        let piv = m[rank].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != rank && row[c] == 1 {
                for k in 0..ncols {
                    row[k] ^= piv[k];
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Own columns are uniquely determined iff no kernel vector touches them.
fn brute_unique(rows: &[Vec<u64>], n: usize, own: &[usize], q: u64) -> bool {
    let total = q.pow(n as u32);
    let mut x = vec![0u64; n];
    for code in 0..total {
        let mut c = code;
        for xi in x.iter_mut() {
            *xi = c % q;
            c /= q;
        }
        if own.iter().all(|&k| x[k] == 0) {
            continue;
        }
        if rows.iter().all(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum::<u64>() % q == 0) {
            return false;
        }
    }
    true
}

fn store_from(receiver: User, m1: usize, m2: usize, rows: &[Vec<u64>]) -> EquationStore {
    let mut s = EquationStore::new(receiver, m1, m2);
    for (t, r) in rows.iter().enumerate() {
        let coeffs = r.iter().enumerate().filter(|e| *e.1 != 0).map(|(c, &x)| (c, x)).collect();
        s.push(t, coeffs, 0);
    }
    s
}

#[test]
fn rank_examples() {
    let id = vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]];
    assert_eq!(rank(&id, &big()), 3);
    assert_eq!(rank(&id, &FieldSpec::gf2()), 3);
    assert_eq!(rank(&[vec![1, 1], vec![1, 1]], &FieldSpec::gf2()), 1);
    assert_eq!(rank(&[], &big()), 0);
    assert_eq!(rank(&[vec![0, 0, 0]], &big()), 0);
}

#[test]
fn prime_rank_matches_fraction_free_oracle() {
    let f = big();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..40 {
        // mix full-rank and rank-deficient shapes
        let rows: Vec<Vec<u64>> = if trial % 2 == 0 {
            (0..50).map(|_| (0..30).map(|_| f.random(&mut rng)).collect()).collect()
        } else {
            let basis: Vec<Vec<u64>> = (0..(trial % 25 + 1)).map(|_| (0..30).map(|_| f.random(&mut rng)).collect()).collect();
            (0..50)
                .map(|_| {
                    let mut v = vec![0u64; 30];
                    for b in &basis {
                        let c = f.random(&mut rng);
                        for (x, y) in v.iter_mut().zip(b) {
                            *x = f.add(*x, f.mul(c, *y));
                        }
                    }
                    v
                })
                .collect()
        };
        assert_eq!(rank(&rows, &f), fraction_free_rank(&rows, f.modulus()), "trial {trial}");
    }
}

#[test]
fn small_prime_rank_matches_oracle() {
    for q in [3u64, 5, 7, 101] {
        let f = FieldSpec::new(q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(q);
        for _ in 0..200 {
            let r = rng.gen_range(1..12);
            let c = rng.gen_range(1..12);
            let rows: Vec<Vec<u64>> = (0..r)
                .map(|_| (0..c).map(|_| if rng.gen_bool(0.4) { f.random(&mut rng) } else { 0 }).collect())
                .collect();
            assert_eq!(rank(&rows, &f), fraction_free_rank(&rows, q));
        }
    }
}

#[test]
fn bitpacked_rank_matches_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let f = FieldSpec::gf2();
    for _ in 0..1000 {
        let r = rng.gen_range(1..=64);
        let c = rng.gen_range(1..=64);
        let density = rng.gen_range(0.02..0.6);
        let rows8: Vec<Vec<u8>> = (0..r).map(|_| (0..c).map(|_| rng.gen_bool(density) as u8).collect()).collect();
        let rows: Vec<Vec<u64>> = rows8.iter().map(|r| r.iter().map(|&x| x as u64).collect()).collect();
        assert_eq!(rank(&rows, &f), naive_gf2_rank(&rows8));
    }
}

#[test]
fn wide_gf2_rows_cross_word_boundaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    let f = FieldSpec::gf2();
    for _ in 0..50 {
        let c = rng.gen_range(65..300);
        let r = rng.gen_range(1..200);
        let rows8: Vec<Vec<u8>> = (0..r).map(|_| (0..c).map(|_| rng.gen_bool(0.05) as u8).collect()).collect();
        let rows: Vec<Vec<u64>> = rows8.iter().map(|r| r.iter().map(|&x| x as u64).collect()).collect();
        assert_eq!(rank(&rows, &f), naive_gf2_rank(&rows8));
    }
}

#[test]
fn decodable_examples() {
    let f = big();
    let s = store_from(User::One, 1, 1, &[vec![1, 0]]);
    assert!(decodable(&s, 1, 1, &f));
    let s = store_from(User::One, 1, 1, &[vec![1, 1], vec![1, 1]]);
    assert!(!decodable(&s, 1, 1, &f));
    let s = store_from(User::Two, 1, 1, &[vec![1, 1], vec![0, 1]]);
    assert!(decodable(&s, 1, 1, &f));
    let s = store_from(User::Two, 1, 1, &[vec![1, 0]]);
    assert!(!decodable(&s, 1, 1, &f));
}

/// Exhaustive over all GF(2) stores with up to 3 rows and 4 columns, every split.
#[test]
fn decodable_matches_brute_force_exhaustively() {
    let f = FieldSpec::gf2();
    for n in 1..=4usize {
        let vectors: Vec<Vec<u64>> = (0..(1u32 << n)).map(|v| (0..n).map(|k| ((v >> k) & 1) as u64).collect()).collect();
        for m1 in 0..=n {
            let m2 = n - m1;
            for receiver in User::BOTH {
                let own: Vec<usize> = match receiver {
                    User::One => (0..m1).collect(),
                    User::Two => (m1..n).collect(),
                };
                let (oc, ic) = if receiver == User::One { (m1, m2) } else { (m2, m1) };
                for a in &vectors {
                    for b in &vectors {
                        for c in &vectors {
                            for k in 0..=3 {
                                let rows: Vec<Vec<u64>> = [a, b, c][..k].iter().map(|r| (*r).clone()).collect();
                                let s = store_from(receiver, m1, m2, &rows);
                                assert_eq!(decodable(&s, oc, ic, &f), brute_unique(&rows, n, &own, 2), "{rows:?} m1={m1} rx={receiver:?}");
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Protocol transcripts over small fields, checked after every received row.
#[test]
fn decodable_matches_brute_force_on_transcripts() {
    let pmf = Arc::new(build_joint_pmf(&CorrelationParams::new(0.5, 0.5, 0.5).unwrap()).unwrap());
    for (q, m_max, seeds) in [(2u64, 4usize, 12u64), (3, 4, 8), (5, 3, 8)] {
        let f = FieldSpec::new(q).unwrap();
        for m in 1..=m_max {
            for seed in 0..seeds {
                let cfg = SimConfig::new(CorrelationParams::new(0.5, 0.5, 0.5).unwrap(), m, Mode::Algebraic)
                    .with_field(f)
                    .with_seed(seed);
                let out = simulate_detailed(&cfg, pmf.clone()).unwrap();
                let Some(stores) = out.stores else { continue };
                for s in &stores {
                    let dense = s.to_dense();
                    let own: Vec<usize> = s.own_columns().collect();
                    let (oc, ic) = s.split();
                    for k in 0..=dense.len() {
                        let mut prefix = s.clone();
                        prefix.rows.truncate(k);
                        assert_eq!(
                            decodable(&prefix, oc, ic, &f),
                            brute_unique(&dense[..k], s.ncols(), &own, q),
                            "q={q} m={m} seed={seed} rows={k}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn project_out_known_examples() {
    let f = big();
    let mut s = EquationStore::new(User::One, 1, 1);
    s.push(0, vec![(0, 1), (1, 1)], f.add(10, 20));
    let same = project_out_known(&s, &BTreeMap::new(), &f);
    assert_eq!(same, s);
    let known = BTreeMap::from([(1usize, 20u64)]);
    let p = project_out_known(&s, &known, &f);
    assert_eq!(p.rows.len(), 1);
    assert_eq!(p.rows[0].coeffs, vec![(0, 1)]);
    assert_eq!(p.rows[0].rhs, 10);
    assert_eq!(decode_own(&p, &f), Some(vec![10]));
}

/// Receiver 1 of a two-packet-per-user exchange: a+2b and c+3d from colliding slots,
/// then the two combined packets superposed. Interference blocks decoding until the
/// cross packets are substituted.
#[test]
fn substituting_cross_packets_enables_decoding() {
    let f = big();
    let (a, c, b, d) = (11u64, 22, 33, 44);
    let vals = [a, c, b, d];
    let rows = [vec![1u64, 0, 2, 0], vec![0, 1, 0, 3], vec![1, 1, 1, 1]];
    let mut s = EquationStore::new(User::One, 2, 2);
    for (t, r) in rows.iter().enumerate() {
        let rhs = r.iter().zip(&vals).fold(0, |acc, (x, v)| f.add(acc, f.mul(*x, *v)));
        s.push(t, r.iter().enumerate().filter(|e| *e.1 != 0).map(|(k, &x)| (k, x)).collect(), rhs);
    }
    assert!(!decodable(&s, 2, 2, &f));
    assert_eq!(decode_own(&s, &f), None);
    let known = BTreeMap::from([(2usize, b), (3usize, d)]);
    let p = project_out_known(&s, &known, &f);
    assert_eq!(p.rows.len(), 3);
    assert!(decodable(&p, 2, 2, &f));
    assert_eq!(decode_own(&p, &f), Some(vec![a, c]));
}

#[test]
fn tracker_counts_own_dimensions() {
    let f = big();
    let mut t = DecodeTracker::new(f, User::Two, 2, 2);
    // rx2: own columns 2,3, interferer 0,1
    assert!(t.add(&[(0, 1), (2, 1)]));
    assert_eq!(t.useful(), 0);
    assert!(t.add(&[(0, 1)]));
    assert_eq!(t.useful(), 1);
    assert!(t.add(&[(3, 5), (1, 1)]));
    assert_eq!(t.useful(), 1);
    assert!(!t.add(&[(0, 2)]));
    assert!(t.add(&[(1, 7)]));
    assert!(t.is_decodable());
}

#[test]
fn incremental_echelon_agrees_with_batch_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for f in [big(), FieldSpec::gf2(), FieldSpec::new(3).unwrap()] {
        for _ in 0..100 {
            let n = rng.gen_range(1..40);
            let mut e = Echelon::new(f, n);
            let mut dense = Vec::new();
            let mut innovative = 0;
            for _ in 0..rng.gen_range(0..60) {
                let nnz = if rng.gen_bool(0.6) { rng.gen_range(1..=2) } else { n };
                let mut v = vec![0u64; n];
                for _ in 0..nnz {
                    v[rng.gen_range(0..n)] = f.random(&mut rng);
                }
                if e.insert_dense(&v).is_some() {
                    innovative += 1;
                }
                dense.push(v);
            }
            assert_eq!(e.rank(), innovative);
            assert_eq!(e.rank(), fraction_free_rank(&dense, f.modulus()));
            let k = rng.gen_range(0..=n);
            let restricted: Vec<Vec<u64>> = dense.iter().map(|r| r[..k].to_vec()).collect();
            assert_eq!(e.pivots_below(k), fraction_free_rank(&restricted, f.modulus()));
        }
    }
}

#[test]
fn field_arithmetic() {
    for q in [2u64, 3, 7, 65_521, (1 << 31) - 1, 4_294_967_291] {
        let f = FieldSpec::new(q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(q);
        for _ in 0..200 {
            let a = f.random_nonzero(&mut rng);
            let b = f.random(&mut rng);
            assert_eq!(f.mul(a, f.inv(a)), 1);
            assert_eq!(f.mul(a, b) as u128, a as u128 * b as u128 % q as u128);
            assert_eq!(f.add(f.sub(b, a), a), b);
        }
    }
    assert!(FieldSpec::new(4).is_err());
    assert!(FieldSpec::new(1).is_err());
    assert!(FieldSpec::new(1 << 33).is_err());
}

fn matrix(q: u64, max: usize) -> impl Strategy<Value = Vec<Vec<u64>>> {
    (1..max, 1..max).prop_flat_map(move |(r, c)| proptest::collection::vec(proptest::collection::vec(0..q, c), r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn rank_invariant_under_scaling_and_permutation(rows in matrix(101, 10), seed in any::<u64>()) {
        let f = FieldSpec::new(101).unwrap();
        let base = rank(&rows, &f);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t: Vec<Vec<u64>> = rows
            .iter()
            .map(|r| {
                let s = f.random_nonzero(&mut rng);
                r.iter().map(|&x| f.mul(s, x)).collect()
            })
            .collect();
        for i in (1..t.len()).rev() {
            let j = rng.gen_range(0..=i);
            t.swap(i, j);
        }
        prop_assert_eq!(rank(&t, &f), base);
    }

    #[test]
    fn rank_bounds(a in matrix(2, 20), extra in proptest::collection::vec(proptest::collection::vec(0u64..2, 19), 0..10)) {
        let f = FieldSpec::gf2();
        let ra = rank(&a, &f);
        prop_assert!(ra <= a.len().min(a[0].len()));
        let cols = a[0].len();
        let b: Vec<Vec<u64>> = extra.iter().map(|r| r[..cols.min(r.len())].to_vec()).filter(|r| r.len() == cols).collect();
        let mut both = a.clone();
        both.extend(b.iter().cloned());
        let rb = if b.is_empty() { 0 } else { rank(&b, &f) };
        prop_assert!(rank(&both, &f) >= ra.max(rb));
    }

    #[test]
    fn adding_rows_keeps_decodability(rows in matrix(3, 9), extra in proptest::collection::vec(proptest::collection::vec(0u64..3, 8), 1..4)) {
        let f = FieldSpec::new(3).unwrap();
        let n = rows[0].len();
        prop_assume!(n >= 2);
        let m1 = n / 2;
        let s = store_from(User::One, m1, n - m1, &rows);
        if decodable(&s, m1, n - m1, &f) {
            let mut all = rows.clone();
            for e in &extra {
                if e.len() >= n {
                    all.push(e[..n].to_vec());
                }
            }
            let s2 = store_from(User::One, m1, n - m1, &all);
            prop_assert!(decodable(&s2, m1, n - m1, &f));
        }
    }
}
