use super::field::FieldSpec;

/// Rows with at most this many nonzeros stay in sparse form while no dense row exists.
const SPARSE_LIMIT: usize = 6;

/// Incremental row-echelon basis.
///
/// Short rows are kept sparse as long as possible; once a dense row arrives every
/// later row is swept against the sparse pivots and then reduced densely.
#[derive(Debug, Clone)]
pub struct Echelon {
    field: FieldSpec,
    ncols: usize,
    sparse_pivot: Vec<u32>,
    sparse_rows: Vec<Vec<(usize, u64)>>,
    dense_pivot: Vec<u32>,
    dense: DenseRows,
    pivot_cols: Vec<usize>,
}

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
enum DenseRows {
    Prime(Vec<Vec<u64>>),
    Binary { words: usize, rows: Vec<Vec<u64>> },
}

impl DenseRows {
    fn is_empty(&self) -> bool {
        match self {
            DenseRows::Prime(r) => r.is_empty(),
            DenseRows::Binary { rows, .. } => rows.is_empty(),
        }
    }
}

impl Echelon {
    pub fn new(field: FieldSpec, ncols: usize) -> Self {
        let dense = if field.is_binary() {
            DenseRows::Binary {
                words: ncols.div_ceil(64),
                rows: Vec::new(),
            }
        } else {
            DenseRows::Prime(Vec::new())
        };
        Self {
            field,
            ncols,
            sparse_pivot: vec![NONE; ncols],
            sparse_rows: Vec::new(),
            dense_pivot: vec![NONE; ncols],
            dense,
            pivot_cols: Vec::new(),
        }
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn rank(&self) -> usize {
        self.pivot_cols.len()
    }

    /// Pivots located in columns `< col`.
    pub fn pivots_below(&self, col: usize) -> usize {
        self.pivot_cols.iter().filter(|&&c| c < col).count()
    }

    pub fn is_pivot(&self, col: usize) -> bool {
        self.sparse_pivot[col] != NONE || self.dense_pivot[col] != NONE
    }

    pub fn insert_dense(&mut self, row: &[u64]) -> Option<usize> {
        let sparse: Vec<(usize, u64)> = row
            .iter()
            .enumerate()
            .filter(|(_, &v)| v % self.field.modulus() != 0)
            .map(|(c, &v)| (c, v % self.field.modulus()))
            .collect();
        self.insert(&sparse)
    }

    /// Adds a row given as (column, value) pairs. Returns the new pivot column when the
    /// row is independent of the rows inserted so far.
    pub fn insert(&mut self, row: &[(usize, u64)]) -> Option<usize> {
        let mut r: Vec<(usize, u64)> = Vec::with_capacity(row.len());
        let mut sorted = row.to_vec();
        sorted.sort_unstable_by_key(|e| e.0);
        for (c, v) in sorted {
            assert!(c < self.ncols, "column {c} out of range");
            let v = v % self.field.modulus();
            match r.last_mut() {
                Some(last) if last.0 == c => last.1 = self.field.add(last.1, v),
                _ => r.push((c, v)),
            }
        }
        r.retain(|e| e.1 != 0);
        if r.is_empty() {
            return None;
        }
        if self.dense.is_empty() && r.len() <= SPARSE_LIMIT {
            match self.reduce_sparse(r) {
                Ok(None) => None,
                Ok(Some(mut r)) => {
                    let c = r[0].0;
                    let inv = self.field.inv(r[0].1);
                    for e in r.iter_mut() {
                        e.1 = self.field.mul(e.1, inv);
                    }
                    self.sparse_pivot[c] = self.sparse_rows.len() as u32;
                    self.sparse_rows.push(r);
                    self.pivot_cols.push(c);
                    Some(c)
                }
                Err(r) => self.insert_dense_path(&r),
            }
        } else {
            self.insert_dense_path(&r)
        }
    }

    /// Ok(None): dependent; Ok(Some): reduced sparse row; Err: grew too dense.
    fn reduce_sparse(&self, mut r: Vec<(usize, u64)>) -> Result<Option<Vec<(usize, u64)>>, Vec<(usize, u64)>> {
        let f = self.field;
        let mut i = 0;
        while i < r.len() {
            let (c, v) = r[i];
            let pi = self.sparse_pivot[c];
            if pi == NONE {
                i += 1;
                continue;
            }
            let p = &self.sparse_rows[pi as usize];
            let mut out = Vec::with_capacity(r.len() + p.len());
            out.extend_from_slice(&r[..i]);
            let (mut a, mut b) = (i + 1, 1);
            while a < r.len() || b < p.len() {
                let ca = r.get(a).map_or(usize::MAX, |e| e.0);
                let cb = p.get(b).map_or(usize::MAX, |e| e.0);
                if ca < cb {
                    out.push(r[a]);
                    a += 1;
                } else if cb < ca {
                    out.push((cb, f.neg(f.mul(v, p[b].1))));
                    b += 1;
                } else {
                    let x = f.sub(r[a].1, f.mul(v, p[b].1));
                    if x != 0 {
                        out.push((ca, x));
                    }
                    a += 1;
                    b += 1;
                }
            }
            r = out;
            if r.len() > SPARSE_LIMIT {
                return Err(r);
            }
        }
        Ok(if r.is_empty() { None } else { Some(r) })
    }

    fn insert_dense_path(&mut self, r: &[(usize, u64)]) -> Option<usize> {
        let f = self.field;
        let ncols = self.ncols;
        match &mut self.dense {
            DenseRows::Prime(rows) => {
                let mut v = vec![0u64; ncols];
                for &(c, x) in r {
                    v[c] = x;
                }
                if !self.sparse_rows.is_empty() {
                    for c in 0..ncols {
                        let x = v[c];
                        if x == 0 {
                            continue;
                        }
                        let pi = self.sparse_pivot[c];
                        if pi == NONE {
                            continue;
                        }
                        for &(c2, y) in &self.sparse_rows[pi as usize] {
                            v[c2] = f.sub(v[c2], f.mul(x, y));
                        }
                    }
                }
                let mut c = 0;
                loop {
                    while c < ncols && v[c] == 0 {
                        c += 1;
                    }
                    if c == ncols {
                        return None;
                    }
                    let di = self.dense_pivot[c];
                    if di == NONE {
                        let inv = f.inv(v[c]);
                        for x in v[c..].iter_mut() {
                            if *x != 0 {
                                *x = f.mul(*x, inv);
                            }
                        }
                        self.dense_pivot[c] = rows.len() as u32;
                        rows.push(v);
                        self.pivot_cols.push(c);
                        return Some(c);
                    }
                    let d = &rows[di as usize];
                    let x = v[c];
                    sub_scaled(&f, &mut v[c..], &d[c..], x);
                    c += 1;
                }
            }
            DenseRows::Binary { words, rows } => {
                let words = *words;
                let mut v = vec![0u64; words];
                for &(c, _) in r {
                    v[c / 64] |= 1 << (c % 64);
                }
                if !self.sparse_rows.is_empty() {
                    for w in 0..words {
                        // bits may be added above the current one, so rescan the word
                        loop {
                            let mut bits = v[w];
                            let mut hit = None;
                            while bits != 0 {
                                let b = bits.trailing_zeros() as usize;
                                let c = w * 64 + b;
                                if self.sparse_pivot[c] != NONE {
                                    hit = Some(c);
                                    break;
                                }
                                bits &= bits - 1;
                            }
                            let Some(c) = hit else { break };
                            for &(c2, _) in &self.sparse_rows[self.sparse_pivot[c] as usize] {
                                v[c2 / 64] ^= 1 << (c2 % 64);
                            }
                        }
                    }
                }
                let mut w = 0;
                loop {
                    while w < words && v[w] == 0 {
                        w += 1;
                    }
                    if w == words {
                        return None;
                    }
                    let c = w * 64 + v[w].trailing_zeros() as usize;
                    let di = self.dense_pivot[c];
                    if di == NONE {
                        self.dense_pivot[c] = rows.len() as u32;
                        rows.push(v);
                        self.pivot_cols.push(c);
                        return Some(c);
                    }
                    let d = &rows[di as usize];
                    for (a, b) in v[w..].iter_mut().zip(&d[w..]) {
                        *a ^= *b;
                    }
                }
            }
        }
    }
}

#[inline]
fn sub_scaled(f: &FieldSpec, v: &mut [u64], d: &[u64], x: u64) {
    let m = f.modulus();
    for (a, &b) in v.iter_mut().zip(d) {
        if b != 0 {
            // a + (m - x*b mod m), kept below 2m then folded once
            let t = f.mul(x, b);
            let s = *a + m - t;
            *a = if s >= m { s - m } else { s };
        }
    }
}

/// Rank of a dense matrix over the field.
pub fn rank(rows: &[Vec<u64>], field: &FieldSpec) -> usize {
    let ncols = rows.first().map_or(0, |r| r.len());
    assert!(rows.iter().all(|r| r.len() == ncols), "inconsistent row lengths");
    let mut e = Echelon::new(*field, ncols);
    for r in rows {
        e.insert_dense(r);
    }
    e.rank()
}
