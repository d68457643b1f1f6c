//! Independent reference implementations used as test oracles.
//!
//! Everything here is written from the model equations with plain nested
//! vectors and no code shared with the library, so agreement between the two
//! is evidence that both transcribe the same formulas.
#![allow(dead_code)]

use std::collections::BTreeSet;

use crowdfuse::model::{Response, ResponseMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Dense response table, [item][annotator], 0-based labels.
pub type Dense = Vec<Vec<Option<usize>>>;

pub fn random_instance(
    rng: &mut ChaCha8Rng,
    n_max: usize,
    m_max: usize,
    k_max: usize,
    p_respond: f64,
) -> (ResponseMatrix, Dense, usize) {
    let n = rng.gen_range(1..=n_max);
    let m = rng.gen_range(1..=m_max);
    let k = rng.gen_range(2..=k_max);
    let dense: Dense = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| rng.gen_bool(p_respond).then(|| rng.gen_range(0..k)))
                .collect()
        })
        .collect();
    (to_matrix(&dense, m, k), dense, k)
}

pub fn to_matrix(dense: &Dense, m: usize, k: usize) -> ResponseMatrix {
    let mut responses = Vec::new();
    for (n, row) in dense.iter().enumerate() {
        for (a, l) in row.iter().enumerate() {
            if let Some(l) = l {
                responses.push(Response {
                    item: n,
                    annotator: a,
                    label: *l,
                });
            }
        }
    }
    ResponseMatrix::new(dense.len(), m, k, responses).unwrap()
}

/// Asymptotic series after shifting the argument up to 40.
pub fn digamma(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 40.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let x2 = x * x;
    shift + x.ln() - 0.5 / x - 1.0 / (12.0 * x2) + 1.0 / (120.0 * x2 * x2)
        - 1.0 / (252.0 * x2 * x2 * x2)
}

fn normalize_log(v: &mut [f64]) {
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for x in v.iter_mut() {
        *x = (*x - mx).exp();
        z += *x;
    }
    for x in v.iter_mut() {
        *x /= z;
    }
}

/// Majority-vote histogram (uniform rows for silent items).
pub fn histogram(dense: &Dense, k: usize) -> Vec<Vec<f64>> {
    dense
        .iter()
        .map(|row| {
            let mut h = vec![0.0; k];
            let mut c = 0.0;
            for l in row.iter().flatten() {
                h[*l] += 1.0;
                c += 1.0;
            }
            if c == 0.0 {
                vec![1.0 / k as f64; k]
            } else {
                h.iter().map(|x| x / c).collect()
            }
        })
        .collect()
}

/// Dawid–Skene EM posteriors after each of `iters` iterations.
pub fn ds_trajectory(dense: &Dense, m: usize, k: usize, iters: usize) -> Vec<Vec<Vec<f64>>> {
    let s = 1e-10;
    let mut q = histogram(dense, k);
    let mut out = Vec::new();
    for _ in 0..iters {
        let mut pi = vec![s; k];
        for row in &q {
            for c in 0..k {
                pi[c] += row[c];
            }
        }
        let tot: f64 = pi.iter().sum();
        for p in pi.iter_mut() {
            *p /= tot;
        }
        let mut g = vec![vec![vec![s; k]; k]; m];
        for (n, row) in dense.iter().enumerate() {
            for (a, l) in row.iter().enumerate() {
                if let Some(l) = l {
                    for c in 0..k {
                        g[a][c][*l] += q[n][c];
                    }
                }
            }
        }
        for mat in g.iter_mut() {
            for row in mat.iter_mut() {
                let tot: f64 = row.iter().sum();
                for x in row.iter_mut() {
                    *x /= tot;
                }
            }
        }
        let next: Vec<Vec<f64>> = dense
            .iter()
            .map(|row| {
                let mut v: Vec<f64> = (0..k).map(|c| pi[c].ln()).collect();
                for (a, l) in row.iter().enumerate() {
                    if let Some(l) = l {
                        for c in 0..k {
                            v[c] += g[a][c][*l].ln();
                        }
                    }
                }
                normalize_log(&mut v);
                v
            })
            .collect();
        q = next;
        out.push(q.clone());
    }
    out
}

/// VBEM posteriors after each of `iters` iterations, with shared β₀ (K×K).
pub fn vb_trajectory(
    dense: &Dense,
    m: usize,
    k: usize,
    alpha0: &[f64],
    beta0: &[Vec<f64>],
    iters: usize,
) -> Vec<Vec<Vec<f64>>> {
    let mut q = histogram(dense, k);
    let mut out = Vec::new();
    for _ in 0..iters {
        let mut alpha = alpha0.to_vec();
        for row in &q {
            for c in 0..k {
                alpha[c] += row[c];
            }
        }
        let mut beta = vec![beta0.to_vec(); m];
        for (n, row) in dense.iter().enumerate() {
            for (a, l) in row.iter().enumerate() {
                if let Some(l) = l {
                    for c in 0..k {
                        beta[a][c][*l] += q[n][c];
                    }
                }
            }
        }
        let a_sum: f64 = alpha.iter().sum();
        let e_pi: Vec<f64> = alpha.iter().map(|&x| digamma(x) - digamma(a_sum)).collect();
        let e_g: Vec<Vec<Vec<f64>>> = beta
            .iter()
            .map(|mat| {
                mat.iter()
                    .map(|row| {
                        let s: f64 = row.iter().sum();
                        row.iter().map(|&x| digamma(x) - digamma(s)).collect()
                    })
                    .collect()
            })
            .collect();
        let next: Vec<Vec<f64>> = dense
            .iter()
            .map(|row| {
                let mut v = e_pi.clone();
                for (a, l) in row.iter().enumerate() {
                    if let Some(l) = l {
                        for c in 0..k {
                            v[c] += e_g[a][c][*l];
                        }
                    }
                }
                normalize_log(&mut v);
                v
            })
            .collect();
        q = next;
        out.push(q.clone());
    }
    out
}

/// Closed (ML, CL) sets by naive rule iteration, or None on a contradiction.
pub fn brute_close(
    n: usize,
    ml: &[(usize, usize)],
    cl: &[(usize, usize)],
) -> Option<(BTreeSet<(usize, usize)>, BTreeSet<(usize, usize)>)> {
    let mut m = vec![vec![false; n]; n];
    let mut c = vec![vec![false; n]; n];
    for &(a, b) in ml {
        m[a][b] = true;
        m[b][a] = true;
    }
    for &(a, b) in cl {
        c[a][b] = true;
        c[b][a] = true;
    }
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if !m[i][j] {
                    continue;
                }
                for l in 0..n {
                    if m[j][l] && i != l && !m[i][l] {
                        m[i][l] = true;
                        m[l][i] = true;
                        changed = true;
                    }
                    if c[j][l] && !c[i][l] {
                        c[i][l] = true;
                        c[l][i] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut out_m = BTreeSet::new();
    let mut out_c = BTreeSet::new();
    for i in 0..n {
        if c[i][i] {
            return None;
        }
        for j in i + 1..n {
            if m[i][j] && c[i][j] {
                return None;
            }
            if m[i][j] {
                out_m.insert((i, j));
            }
            if c[i][j] {
                out_c.insert((i, j));
            }
        }
    }
    Some((out_m, out_c))
}

/// Exact P(item ∈ sample) for `draws` sequential weighted draws from `pool`
/// without replacement (uniform when every remaining weight is zero).
pub fn inclusion_probabilities(weights: &[f64], pool: &[usize], draws: usize) -> Vec<f64> {
    let mut out = vec![0.0; weights.len()];
    ordered_samples(weights, pool, draws, &mut |seq, p| {
        for &i in seq {
            out[i] += p;
        }
    });
    out
}

/// Calls `visit(sequence, probability)` for every ordered draw sequence.
pub fn ordered_samples(weights: &[f64], pool: &[usize], draws: usize, visit: &mut dyn FnMut(&[usize], f64)) {
    fn rec(
        weights: &[f64],
        remaining: &mut Vec<usize>,
        left: usize,
        seq: &mut Vec<usize>,
        p: f64,
        visit: &mut dyn FnMut(&[usize], f64),
    ) {
        if left == 0 {
            visit(seq, p);
            return;
        }
        let total: f64 = remaining.iter().map(|&i| weights[i]).sum();
        let len = remaining.len() as f64;
        for pos in 0..remaining.len() {
            let i = remaining[pos];
            let pi = if total > 0.0 { weights[i] / total } else { 1.0 / len };
            if pi == 0.0 {
                continue;
            }
            remaining.remove(pos);
            seq.push(i);
            rec(weights, remaining, left - 1, seq, p * pi, visit);
            seq.pop();
            remaining.insert(pos, i);
        }
    }
    let mut remaining = pool.to_vec();
    rec(weights, &mut remaining, draws, &mut Vec::new(), 1.0, visit);
}

/// Plain transcription of the bound formulas.
pub mod bounds {
    use crowdfuse::model::PriorConfig;
    use crowdfuse::numerics::ProbVector;
    use crowdfuse::synth::CrowdSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub struct Setup {
        pub n: usize,
        pub pi: Vec<f64>,
        /// [m][k][k'].
        pub gamma: Vec<Vec<Vec<f64>>>,
        pub mu: Vec<f64>,
        pub alpha0: Vec<f64>,
        /// [m][k][k'].
        pub beta0: Vec<Vec<Vec<f64>>>,
    }

    pub struct Label {
        pub d_pi: f64,
        pub d_gamma: f64,
        pub f_pi: Option<f64>,
        pub f_gamma: Option<f64>,
        pub u: f64,
        pub eps_q: f64,
        pub w: Vec<f64>,
        pub tilde: Vec<f64>,
    }

    fn kl(p: &[f64], q: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..p.len() {
            if p[i] > 0.0 {
                s += p[i] * (p[i] / q[i]).ln();
            }
        }
        s
    }

    impl Setup {
        pub fn m(&self) -> usize {
            self.gamma.len()
        }
        pub fn k(&self) -> usize {
            self.pi.len()
        }
        pub fn rho_pi(&self) -> f64 {
            self.pi.iter().cloned().fold(1.0, f64::min)
        }
        pub fn rho_gamma(&self) -> f64 {
            let mut r: f64 = 1.0;
            for mat in &self.gamma {
                for row in mat {
                    for &x in row {
                        r = r.min(x);
                    }
                }
            }
            r
        }

        pub fn d_pi(&self) -> f64 {
            let mut best = f64::INFINITY;
            for a in 0..self.k() {
                for b in 0..self.k() {
                    if a != b {
                        best = best.min((self.pi[a] / self.pi[b]).ln());
                    }
                }
            }
            best
        }

        pub fn d_gamma(&self) -> f64 {
            let mut best = f64::INFINITY;
            for a in 0..self.k() {
                for b in 0..self.k() {
                    if a == b {
                        continue;
                    }
                    let mut s = 0.0;
                    for m in 0..self.m() {
                        s += self.mu[m] * kl(&self.gamma[m][a], &self.gamma[m][b]);
                    }
                    best = best.min(s / self.m() as f64);
                }
            }
            best
        }

        pub fn f_pi(&self, eps: f64) -> Option<f64> {
            let rho = self.rho_pi();
            let a_bar: f64 = self.alpha0.iter().sum();
            let arg = (rho - eps) / rho - 1.0 / (2.0 * rho * (self.n as f64 + a_bar));
            (arg > 0.0).then(|| arg.ln())
        }

        pub fn f_gamma(&self, eps: f64) -> Option<f64> {
            let rho = self.rho_gamma();
            let mut b_bar = f64::INFINITY;
            for mat in &self.beta0 {
                for row in mat {
                    b_bar = b_bar.min(row.iter().sum());
                }
            }
            let arg = (rho - eps) / rho - 1.0 / (2.0 * rho * b_bar);
            (arg > 0.0).then(|| arg.ln())
        }

        /// Theorem-form (`lemma == false`) or lemma-form exponent and bounds.
        /// `counts` holds (N_ML,n, N_CL,n, N_CL,n,min) per item.
        pub fn label(
            &self,
            eps_pi: f64,
            eps_gamma: f64,
            eps_q: f64,
            eta: f64,
            counts: &[(usize, usize, usize)],
            lemma: bool,
        ) -> Label {
            let m = self.m() as f64;
            let k = self.k() as f64;
            let d_pi = self.d_pi();
            let d_gamma = self.d_gamma();
            let f_pi = self.f_pi(eps_pi);
            let f_gamma = self.f_gamma(eps_gamma);
            let fp = f_pi.unwrap_or(-1e300);
            let fg = f_gamma.unwrap_or(-1e300);
            let u = if lemma {
                d_pi + 2.0 * fp + m * (d_gamma / 2.0 + 2.0 * fg)
            } else {
                let d = d_pi + m * d_gamma / 2.0;
                d + fp + m * fg
            };
            let eps_bound = k * (-u).exp();
            let mut w = Vec::new();
            let mut tilde = Vec::new();
            for &(ml, cl, clmin) in counts {
                let wn = ml as f64 * (1.0 - 2.0 * eps_q) - 2.0 * cl as f64 * eps_q + clmin as f64;
                w.push(wn);
                tilde.push(k * (-u - eta * wn).exp());
            }
            Label {
                d_pi,
                d_gamma,
                f_pi,
                f_gamma,
                u,
                eps_q: eps_bound,
                w,
                tilde,
            }
        }

        /// Constrained-form parameter bounds, ([k], [m][k][k']).
        pub fn params(
            &self,
            eps_q: f64,
            tilde: f64,
            g_pi: f64,
            g_gamma: f64,
            n_c: usize,
        ) -> (Vec<f64>, Vec<Vec<Vec<f64>>>) {
            let n = self.n as f64;
            let nt = n_c as f64;
            let nb = (self.n - n_c) as f64;
            let a_bar: f64 = self.alpha0.iter().sum();
            let rho = self.rho_pi();
            let pi_b = (0..self.k())
                .map(|k| (nt * tilde + nb * eps_q + n * g_pi + self.alpha0[k] + rho * a_bar) / (n + a_bar))
                .collect();
            let mut g = vec![vec![vec![0.0; self.k()]; self.k()]; self.m()];
            for m in 0..self.m() {
                for k in 0..self.k() {
                    let bb: f64 = self.beta0[m][k].iter().sum();
                    for k2 in 0..self.k() {
                        let num = 2.0 * n * g_gamma + 2.0 * nt * tilde + 2.0 * nb * eps_q + self.beta0[m][k][k2] + bb;
                        let den = n * self.mu[m] * self.pi[k] - n * g_gamma / self.gamma[m][k][k2]
                            - nt * tilde
                            - nb * eps_q
                            + bb;
                        g[m][k][k2] = num / den;
                    }
                }
            }
            (pi_b, g)
        }

        /// The three summands of ν.
        pub fn nu(&self, t: &[Vec<Vec<f64>>], r: &[f64]) -> [f64; 3] {
            let n = self.n as f64;
            let m = self.m() as f64;
            let k = self.k() as f64;
            let first = k * n * (-(m * self.d_gamma()) / (33.0 * self.rho_gamma().ln())).exp();
            let mut second = 0.0;
            for mm in 0..self.m() {
                for a in 0..self.k() {
                    for b in 0..self.k() {
                        second += 4.0
                            * (-n * t[mm][a][b].powi(2) / (3.0 * self.pi[a] * self.mu[mm] * self.gamma[mm][a][b]))
                                .exp();
                    }
                }
            }
            let mut third = 0.0;
            for a in 0..self.k() {
                third += 2.0 * (-n * r[a].powi(2) / (3.0 * self.pi[a])).exp();
            }
            [first, second, third]
        }
    }

    /// A small heterogeneous crowd: uneven π*, per-annotator confusion and rates.
    pub fn desk(seed: u64) -> (CrowdSpec<f64>, PriorConfig<f64>, Setup) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m, k) = (400, 5, 3);
        let pi = vec![0.5, 0.3, 0.2];
        let gamma: Vec<Vec<Vec<f64>>> = (0..m)
            .map(|_| {
                (0..k)
                    .map(|r| {
                        let d = rng.gen_range(0.6..0.9);
                        let s = rng.gen_range(0.3..0.7);
                        (0..k)
                            .map(|c| match (c == r, c == (r + 1) % k) {
                                (true, _) => d,
                                (_, true) => (1.0 - d) * s,
                                _ => (1.0 - d) * (1.0 - s),
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mu: Vec<f64> = (0..m).map(|_| rng.gen_range(0.6..1.0)).collect();
        let alpha0: Vec<f64> = (0..k).map(|_| rng.gen_range(1.0..3.0)).collect();
        let beta0: Vec<Vec<Vec<f64>>> = (0..m)
            .map(|_| (0..k).map(|_| (0..k).map(|_| rng.gen_range(5.0..60.0)).collect()).collect())
            .collect();
        let spec = CrowdSpec {
            n_items: n,
            n_annotators: m,
            n_classes: k,
            pi_star: ProbVector::new(pi.clone()).unwrap(),
            gamma_star: gamma
                .iter()
                .map(|mat| mat.iter().map(|r| ProbVector::new(r.clone()).unwrap()).collect())
                .collect(),
            mu: mu.clone(),
            seed,
        };
        let priors = PriorConfig::per_annotator(alpha0.clone(), beta0.concat().concat(), m).unwrap();
        let setup = Setup {
            n,
            pi,
            gamma,
            mu,
            alpha0,
            beta0,
        };
        (spec, priors, setup)
    }
}
