//! Independent dense references shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qsd_core::Model;

/// Constant-coefficient model parameters drawn for the oracle comparison.
#[derive(Debug, Clone)]
pub struct RandomModel {
    pub gamma: f64,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    pub level: u64,
}

impl RandomModel {
    pub fn draw(rng: &mut ChaCha8Rng) -> Self {
        let dim = rng.gen_range(1..=2usize);
        let gamma = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
        let b = (0..dim).map(|_| rng.gen_range(0.5..3.0)).collect();
        let d = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
        let c = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| if i == j { rng.gen_range(0.5..1.5) } else { rng.gen_range(0.0..0.5) })
                    .collect()
            })
            .collect();
        let level = if dim == 1 { rng.gen_range(10..=50) } else { rng.gen_range(8..=31) };
        RandomModel { gamma, b, d, c, level }
    }

    pub fn batch(seed: u64, count: usize) -> Vec<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| Self::draw(&mut rng)).collect()
    }

    pub fn model(&self) -> Model {
        Model::constant(self.gamma, &self.b, &self.d, &self.c).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Interior states with `|n| <= level`, in lexicographic order.
    pub fn states(&self) -> Vec<Vec<u64>> {
        let mut out = Vec::new();
        let mut cur = vec![1u64; self.dim()];
        fill(&mut out, &mut cur, 0, self.level);
        out
    }

    /// Dense killed generator built from the rate formulas.
    pub fn dense(&self) -> (Vec<Vec<u64>>, DMatrix<f64>) {
        let states = self.states();
        let n = states.len();
        let index = |s: &[u64]| states.binary_search_by(|x| x.as_slice().cmp(s)).ok();
        let mut q = DMatrix::zeros(n, n);
        for (i, s) in states.iter().enumerate() {
            let mut exit = 0.0;
            for k in 0..self.dim() {
                let nk = s[k] as f64;
                let birth = nk * self.b[k];
                let pressure: f64 = (0..self.dim()).map(|j| self.c[k][j] * s[j] as f64).sum();
                let death = nk * (self.d[k] + pressure.powf(self.gamma));
                let mut up = s.clone();
                up[k] += 1;
                let mut down = s.clone();
                down[k] -= 1;
                for (target, rate) in [(up, birth), (down, death)] {
                    if let Some(j) = index(&target) {
                        q[(i, j)] += rate;
                    }
                    exit += rate;
                }
            }
            q[(i, i)] = -exit;
        }
        (states, q)
    }
}

fn fill(out: &mut Vec<Vec<u64>>, cur: &mut Vec<u64>, k: usize, level: u64) {
    if k == cur.len() {
        if cur.iter().sum::<u64>() <= level {
            out.push(cur.clone());
        }
        return;
    }
    let used: u64 = cur[..k].iter().sum();
    let rest = (cur.len() - k - 1) as u64;
    let mut v = 1;
    while used + v + rest <= level {
        cur[k] = v;
        fill(out, cur, k + 1, level);
        v += 1;
    }
    cur[k] = 1;
}

/// `(lambda0, alpha)` from a dense eigendecomposition. The rightmost
/// eigenvalue of `Q` shifts `A = Q + lambda I`; the singular vectors of its
/// smallest singular value start a few steps of inverse iteration (dense LU)
/// on each side, and `lambda0` is the two-sided quotient
/// `-(alpha Q eta) / (alpha eta)`.
pub fn dense_qsd(q: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let n = q.nrows();
    let top = q
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let a = q + DMatrix::identity(n, n) * (-top);
    let svd = a.clone().svd(true, true);
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .unwrap()
        .0;
    let mut left = svd.u.unwrap().column(k).into_owned();
    let mut right = svd.v_t.unwrap().row(k).transpose();
    let (lu, lu_t) = (a.clone().lu(), a.transpose().lu());
    for _ in 0..3 {
        if let Some(x) = lu_t.solve(&left) {
            left = &x / x.norm();
        }
        if let Some(x) = lu.solve(&right) {
            right = &x / x.norm();
        }
    }
    let quotient = -(left.transpose() * q * &right)[(0, 0)] / left.dot(&right);
    let s: f64 = left.sum();
    (quotient, left.iter().map(|x| x / s).collect())
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

/// `exp(tA)` for a 2x2 matrix with real distinct eigenvalues (Sylvester).
pub fn expm2(a: [[f64; 2]; 2], t: f64) -> [[f64; 2]; 2] {
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = (tr * tr / 4.0 - det).sqrt();
    let (l1, l2) = (tr / 2.0 + disc, tr / 2.0 - disc);
    let (e1, e2) = ((l1 * t).exp(), (l2 * t).exp());
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { 1.0 } else { 0.0 };
            out[i][j] = (e1 * (a[i][j] - l2 * id) - e2 * (a[i][j] - l1 * id)) / (l1 - l2);
        }
    }
    out
}
