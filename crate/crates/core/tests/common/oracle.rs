//! Scalar reference implementations: plain loops over `Vec<Vec<f64>>`,
//! explicit one-hot matrices, no shared helpers with the library.

#![allow(dead_code, clippy::needless_range_loop, clippy::unnecessary_map_or)]

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    ZeroShot,
    Ta,
    TaPlus,
    Tx,
    TxPlus,
    Ape,
    ApePlus,
}

#[derive(Debug, Clone)]
pub struct Case {
    pub test: Rows,
    pub test_adapted: Rows,
    pub keys: Rows,
    pub keys_adapted: Rows,
    pub key_labels: Vec<usize>,
    pub text: Rows,
}

#[derive(Debug, Clone, Copy)]
pub struct Params {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub gamma_ape: f64,
}

pub fn rows_of(m: &[Vec<f32>]) -> Rows {
    m.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect()
}

fn matmul_t(a: &Rows, b: &Rows) -> Rows {
    let mut out = vec![vec![0.0; b.len()]; a.len()];
    for i in 0..a.len() {
        for j in 0..b.len() {
            let mut s = 0.0;
            for k in 0..a[i].len() {
                s += a[i][k] * b[j][k];
            }
            out[i][j] = s;
        }
    }
    out
}

fn matmul(a: &Rows, b: &Rows) -> Rows {
    let n = if b.is_empty() { 0 } else { b[0].len() };
    let mut out = vec![vec![0.0; n]; a.len()];
    for i in 0..a.len() {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..b.len() {
                s += a[i][k] * b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

fn one_hot(labels: &[usize], classes: usize) -> Rows {
    let mut l = vec![vec![0.0; classes]; labels.len()];
    for (k, &y) in labels.iter().enumerate() {
        l[k][y] = 1.0;
    }
    l
}

fn add(a: &Rows, b: &Rows, scale: f64) -> Rows {
    let mut out = a.clone();
    for i in 0..a.len() {
        for j in 0..a[i].len() {
            out[i][j] += scale * b[i][j];
        }
    }
    out
}

pub fn affinity(q: &Rows, keys: &Rows, beta: f64) -> Rows {
    let sim = matmul_t(q, keys);
    sim.iter()
        .map(|r| r.iter().map(|&s| (-beta * (1.0 - s)).exp()).collect())
        .collect()
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|&x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        if p[i] > 0.0 {
            s += p[i] * (p[i] / q[i].max(1e-12)).ln();
        }
    }
    s
}

fn global_min_max(m: &Rows) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in m {
        for &v in r {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

/// `φ(−M)` mapped onto the range of `a`.
pub fn bridge(test: &Rows, keys: &Rows, text: &Rows, a: &Rows) -> Rows {
    let s: Rows = matmul_t(test, text).iter().map(|r| softmax(r)).collect();
    let big_s: Rows = matmul_t(keys, text).iter().map(|r| softmax(r)).collect();
    let neg: Rows = s
        .iter()
        .map(|p| big_s.iter().map(|q| -kl(p, q)).collect())
        .collect();
    let (tlo, thi) = global_min_max(a);
    let (lo, hi) = global_min_max(&neg);
    neg.iter()
        .map(|r| {
            r.iter()
                .map(|&v| {
                    if tlo == thi {
                        tlo
                    } else if lo == hi {
                        0.5 * (tlo + thi)
                    } else {
                        tlo + (v - lo) / (hi - lo) * (thi - tlo)
                    }
                })
                .collect()
        })
        .collect()
}

/// Keeps `channels` and re-normalizes, storing as f32 like the library does.
pub fn refine(rows: &Rows, channels: &[usize]) -> Rows {
    rows.iter()
        .map(|r| {
            let sel: Vec<f64> = channels.iter().map(|&c| r[c]).collect();
            let n = sel.iter().map(|x| x * x).sum::<f64>().sqrt();
            sel.iter()
                .map(|&x| if n > 0.0 { ((x / n) as f32) as f64 } else { x })
                .collect()
        })
        .collect()
}

pub fn logits(kind: Kind, c: &Case, p: &Params, mask: &[usize]) -> Rows {
    let classes = c.text.len();
    let l = one_hot(&c.key_labels, classes);
    let clip = matmul_t(&c.test, &c.text);
    match kind {
        Kind::ZeroShot => clip,
        Kind::Ta | Kind::TaPlus | Kind::Tx | Kind::TxPlus => {
            let (q, k) = if matches!(kind, Kind::TaPlus | Kind::TxPlus) {
                (&c.test_adapted, &c.keys_adapted)
            } else {
                (&c.test, &c.keys)
            };
            let a = affinity(q, k, p.beta);
            let mut out = add(&clip, &matmul(&a, &l), p.alpha);
            if matches!(kind, Kind::Tx | Kind::TxPlus) {
                let phi = bridge(&c.test, &c.keys, &c.text, &a);
                out = add(&out, &matmul(&phi, &l), p.gamma);
            }
            out
        }
        Kind::Ape | Kind::ApePlus => {
            let text_r = refine(&c.text, mask);
            let keys_r = refine(&c.keys, mask);
            let w: Vec<f64> = matmul_t(&keys_r, &text_r)
                .iter()
                .zip(&c.key_labels)
                .map(|(r, &y)| {
                    let ce = -softmax(r)[y].max(1e-12).ln();
                    (p.gamma_ape * ce).exp()
                })
                .collect();
            let (q, k) = if kind == Kind::ApePlus {
                (refine(&c.test_adapted, mask), refine(&c.keys_adapted, mask))
            } else {
                (refine(&c.test, mask), keys_r)
            };
            let a = affinity(&q, &k, p.beta);
            let mut wl = l.clone();
            for (row, wk) in wl.iter_mut().zip(&w) {
                for v in row.iter_mut() {
                    *v *= wk;
                }
            }
            add(&clip, &matmul(&a, &wl), p.alpha)
        }
    }
}

/// Channel selection by brute force: explicit pair loops, two-pass moments,
/// repeated max extraction.
pub fn select_channels(text: &Rows, budget: usize, lambda: f64) -> Vec<usize> {
    let n = text.len();
    let d = text[0].len();
    let mut var = vec![0.0; d];
    let mut sim = vec![0.0; d];
    for c in 0..d {
        let col: Vec<f64> = text.iter().map(|r| r[c]).collect();
        var[c] = variance(&col);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += col[i] * col[j];
                }
            }
        }
        sim[c] = if n > 1 { s / (n * (n - 1)) as f64 } else { 0.0 };
    }
    let z = |x: &[f64]| -> Vec<f64> {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let sd = variance(x).sqrt();
        if sd < 1e-12 {
            vec![0.0; x.len()]
        } else {
            x.iter().map(|v| (v - m) / sd).collect()
        }
    };
    let (zv, zs) = (z(&var), z(&sim));
    let score: Vec<f64> = (0..d).map(|c| lambda * zv[c] - (1.0 - lambda) * zs[c]).collect();
    let mut taken = vec![false; d];
    let mut keep = Vec::new();
    for _ in 0..budget {
        let mut best: Option<usize> = None;
        for c in 0..d {
            if !taken[c] && best.map_or(true, |b| score[c] > score[b]) {
                best = Some(c);
            }
        }
        taken[best.unwrap()] = true;
        keep.push(best.unwrap());
    }
    keep.sort();
    keep
}

/// Population variance, two passes.
pub fn variance(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Counts by comparing against explicit bin edges.
pub fn histogram_counts(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let mut out = vec![0u64; bins];
    for &v in values {
        let v = v.clamp(lo, hi);
        for b in 0..bins {
            let left = lo + (hi - lo) * b as f64 / bins as f64;
            let right = lo + (hi - lo) * (b + 1) as f64 / bins as f64;
            if (v >= left && v < right) || (b == bins - 1 && v == hi) {
                out[b] += 1;
                break;
            }
        }
    }
    out
}

pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..row.len() {
        if row[i] > row[best] {
            best = i;
        }
    }
    best
}

pub fn max_abs_diff(a: &Rows, b: &Rows) -> f64 {
    let mut m: f64 = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            m = m.max((x - y).abs());
        }
    }
    m
}
