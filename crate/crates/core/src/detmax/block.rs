//! Barrier method with Newton centering for log-det maximization over
//! Hermitian PSD blocks.
//!
//! The objective depends on the blocks only through the small receiver
//! matrices `T_r = Σ_k B_rk Q_k B_rkᴴ` and a linear term, so the Newton system
//! is block-diagonal (from the `ln det Q_k` barrier) plus a low-rank term.
//! It is solved either with the Woodbury identity in receiver/budget space or
//! densely in block coordinates, whichever dimension is smaller.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::{SolverCertificate, TraceRow};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, HermitianBasis};

/// One log-det term `weight · ln det(I + Σ_k B_k Q_k B_kᴴ)`.
#[derive(Debug, Clone)]
pub struct Receiver {
    pub weight: f64,
    pub dim: usize,
    /// `(block, B_k)` with `B_k` of shape `dim × block_size`.
    pub links: Vec<(usize, CMat)>,
}

/// `Σ_k Σ_a weights_k[a] · Q_k[a,a] ≤ bound`.
#[derive(Debug, Clone)]
pub struct LinearBudget {
    pub bound: f64,
    pub terms: Vec<(usize, Vec<f64>)>,
}

/// Maximize `Σ_r w_r ln det(I + T_r(Q)) − Σ_k ⟨L_k, Q_k⟩ + constant`
/// over `Q_k ⪰ 0` subject to the linear budgets. Values are in nats.
#[derive(Debug, Clone)]
pub struct BlockProblem {
    pub block_sizes: Vec<usize>,
    pub receivers: Vec<Receiver>,
    pub penalty: Vec<Option<CMat>>,
    pub constant: f64,
    pub budgets: Vec<LinearBudget>,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub gap_abs: f64,
    pub gap_rel: f64,
    pub barrier_decrease: f64,
    pub max_stages: usize,
    pub max_newton_per_stage: usize,
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_abs: 1e-7,
            gap_rel: 1e-6,
            barrier_decrease: 0.1,
            max_stages: 60,
            max_newton_per_stage: 200,
            trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockSolution {
    pub blocks: Vec<CMat>,
    pub certificate: SolverCertificate,
    pub trace: Vec<TraceRow>,
}

impl BlockProblem {
    pub fn new(block_sizes: Vec<usize>) -> Self {
        let n = block_sizes.len();
        Self { block_sizes, receivers: Vec::new(), penalty: vec![None; n], constant: 0.0, budgets: Vec::new() }
    }

    fn validate(&self) -> Result<()> {
        let nb = self.block_sizes.len();
        if self.block_sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidInput("empty block".into()));
        }
        if self.penalty.len() != nb {
            return Err(Error::InvalidInput("penalty list does not match block count".into()));
        }
        for (r, rec) in self.receivers.iter().enumerate() {
            if !(rec.weight.is_finite() && rec.weight >= 0.0) {
                return Err(Error::InvalidInput(format!("receiver {r}: weight {} invalid", rec.weight)));
            }
            let mut seen = vec![false; nb];
            for (k, b) in &rec.links {
                if *k >= nb {
                    return Err(Error::IndexOutOfRange { index: *k, limit: nb });
                }
                if seen[*k] {
                    return Err(Error::InvalidInput(format!("receiver {r} links block {k} twice")));
                }
                seen[*k] = true;
                if b.shape() != (rec.dim, self.block_sizes[*k]) {
                    return Err(Error::InvalidInput(format!(
                        "receiver {r}, block {k}: link is {:?}, expected {:?}",
                        b.shape(),
                        (rec.dim, self.block_sizes[*k])
                    )));
                }
                if b.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Numerical(format!("receiver {r}: non-finite link")));
                }
            }
        }
        for (k, p) in self.penalty.iter().enumerate() {
            if let Some(p) = p {
                if p.shape() != (self.block_sizes[k], self.block_sizes[k]) {
                    return Err(Error::InvalidInput(format!("penalty {k} has wrong shape")));
                }
                if p.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Numerical(format!("penalty {k} is not finite")));
                }
            }
        }
        let mut covered: Vec<Vec<bool>> = self.block_sizes.iter().map(|&n| vec![false; n]).collect();
        for (j, budget) in self.budgets.iter().enumerate() {
            if !(budget.bound.is_finite() && budget.bound > 0.0) {
                return Err(Error::InvalidInput(format!("budget {j}: bound {} must be > 0", budget.bound)));
            }
            for (k, w) in &budget.terms {
                if *k >= nb || w.len() != self.block_sizes[*k] {
                    return Err(Error::InvalidInput(format!("budget {j}: bad term for block {k}")));
                }
                for (a, &x) in w.iter().enumerate() {
                    if !(x.is_finite() && x >= 0.0) {
                        return Err(Error::InvalidInput(format!("budget {j}: weight {x} invalid")));
                    }
                    if x > 0.0 {
                        covered[*k][a] = true;
                    }
                }
            }
        }
        for (k, cov) in covered.iter().enumerate() {
            if let Some(a) = cov.iter().position(|x| !x) {
                return Err(Error::InvalidInput(format!(
                    "block {k}, coordinate {a} is not limited by any budget"
                )));
            }
        }
        Ok(())
    }

    /// Objective value in nats; `None` if some `I + T_r` is not positive definite.
    pub fn objective(&self, q: &[CMat]) -> Option<f64> {
        let mut f = self.constant;
        for rec in &self.receivers {
            if rec.weight == 0.0 {
                continue;
            }
            let mut a = linalg::identity(rec.dim);
            for (k, b) in &rec.links {
                a += b * &q[*k] * b.adjoint();
            }
            f += rec.weight * linalg::logdet_hpd(&a)?;
        }
        for (k, p) in self.penalty.iter().enumerate() {
            if let Some(p) = p {
                f -= linalg::re_inner(p, &q[k]);
            }
        }
        Some(f)
    }

    /// Gradient of the objective with respect to each block.
    pub fn gradient(&self, q: &[CMat]) -> Option<Vec<CMat>> {
        let mut g: Vec<CMat> = self
            .penalty
            .iter()
            .zip(&self.block_sizes)
            .map(|(p, &n)| match p {
                Some(p) => -p,
                None => CMat::zeros(n, n),
            })
            .collect();
        for rec in &self.receivers {
            if rec.weight == 0.0 {
                continue;
            }
            let mut a = linalg::identity(rec.dim);
            for (k, b) in &rec.links {
                a += b * &q[*k] * b.adjoint();
            }
            let s = linalg::inverse_hpd(&a)?;
            for (k, b) in &rec.links {
                g[*k] += (b.adjoint() * &s * b).scale(rec.weight);
            }
        }
        Some(g.iter().map(linalg::hermitian_part).collect())
    }

    /// `Σ_k Σ_a w_k[a] Q_k[a,a]` for each budget.
    pub fn budget_usage(&self, q: &[CMat]) -> Vec<f64> {
        self.budgets
            .iter()
            .map(|b| b.terms.iter().map(|(k, w)| diag_dot(w, &q[*k])).sum())
            .collect()
    }

    fn is_trivial(&self) -> bool {
        let no_links = self
            .receivers
            .iter()
            .all(|r| r.weight == 0.0 || r.links.iter().all(|(_, b)| b.iter().all(|z| z.norm() == 0.0)));
        let no_penalty = self.penalty.iter().all(|p| p.as_ref().map_or(true, |p| linalg::max_abs(p) == 0.0));
        no_links && no_penalty
    }
}

fn diag_dot(w: &[f64], q: &CMat) -> f64 {
    w.iter().enumerate().map(|(a, x)| x * q[(a, a)].re).sum()
}

fn add_diag(m: &mut CMat, w: &[f64], scale: f64) {
    for (a, x) in w.iter().enumerate() {
        m[(a, a)] += c(scale * x);
    }
}

/// Scaled copy of the problem with per-block lookups precomputed.
struct Prepared {
    sizes: Vec<usize>,
    receivers: Vec<Receiver>,
    penalty: Vec<Option<CMat>>,
    constant: f64,
    bounds: Vec<f64>,
    /// Per block: `(budget, weights)`.
    block_budgets: Vec<Vec<(usize, Vec<f64>)>>,
    /// Per block: `(receiver, link index)` for receivers with positive weight.
    block_links: Vec<Vec<(usize, usize)>>,
    active: Vec<usize>,
    row_offset: Vec<usize>,
    budget_row: usize,
    rows: usize,
    bases: HashMap<usize, HermitianBasis>,
    /// Per block: largest trace over the feasible set, bounded coordinate-wise.
    tau: Vec<f64>,
    barrier_degree: f64,
    scale: f64,
}

struct Eval {
    phi: f64,
    f: f64,
    q_inv: Vec<CMat>,
    slack: Vec<f64>,
    s_mats: Vec<Option<CMat>>,
}

impl Prepared {
    fn new(problem: &BlockProblem) -> Self {
        let nb = problem.block_sizes.len();
        let scale = problem.budgets.iter().map(|b| b.bound).sum::<f64>() / problem.budgets.len().max(1) as f64;
        let root = scale.sqrt();
        let receivers: Vec<Receiver> = problem
            .receivers
            .iter()
            .map(|r| Receiver {
                weight: r.weight,
                dim: r.dim,
                links: r.links.iter().map(|(k, b)| (*k, b.scale(root))).collect(),
            })
            .collect();
        let penalty = problem.penalty.iter().map(|p| p.as_ref().map(|p| p.scale(scale))).collect();
        let bounds: Vec<f64> = problem.budgets.iter().map(|b| b.bound / scale).collect();

        let mut block_budgets = vec![Vec::new(); nb];
        for (j, b) in problem.budgets.iter().enumerate() {
            for (k, w) in &b.terms {
                if w.iter().any(|x| *x > 0.0) {
                    block_budgets[*k].push((j, w.clone()));
                }
            }
        }
        let mut block_links = vec![Vec::new(); nb];
        let mut active = Vec::new();
        let mut row_offset = vec![usize::MAX; receivers.len()];
        let mut rows = 0;
        let mut bases = HashMap::new();
        for (r, rec) in receivers.iter().enumerate() {
            if rec.weight == 0.0 {
                continue;
            }
            active.push(r);
            row_offset[r] = rows;
            rows += rec.dim * rec.dim;
            bases.entry(rec.dim).or_insert_with(|| HermitianBasis::new(rec.dim));
            for (li, (k, _)) in rec.links.iter().enumerate() {
                block_links[*k].push((r, li));
            }
        }
        for &n in &problem.block_sizes {
            bases.entry(n).or_insert_with(|| HermitianBasis::new(n));
        }
        let budget_row = rows;
        rows += bounds.len();

        let mut tau = vec![0.0; nb];
        for (k, &n) in problem.block_sizes.iter().enumerate() {
            for a in 0..n {
                let cap = block_budgets[k]
                    .iter()
                    .filter(|(_, w)| w[a] > 0.0)
                    .map(|(j, w)| bounds[*j] / w[a])
                    .fold(f64::INFINITY, f64::min);
                tau[k] += cap;
            }
        }
        let barrier_degree = (problem.block_sizes.iter().sum::<usize>() + bounds.len()) as f64;
        Self {
            sizes: problem.block_sizes.clone(),
            receivers,
            penalty,
            constant: problem.constant,
            bounds,
            block_budgets,
            block_links,
            active,
            row_offset,
            budget_row,
            rows,
            bases,
            tau,
            barrier_degree,
            scale,
        }
    }

    fn basis(&self, n: usize) -> &HermitianBasis {
        &self.bases[&n]
    }

    fn usage(&self, q: &[CMat]) -> Vec<f64> {
        let mut u = vec![0.0; self.bounds.len()];
        for (k, list) in self.block_budgets.iter().enumerate() {
            for (j, w) in list {
                u[*j] += diag_dot(w, &q[k]);
            }
        }
        u
    }

    fn objective(&self, q: &[CMat]) -> Option<f64> {
        let mut f = self.constant;
        for &r in &self.active {
            let rec = &self.receivers[r];
            let mut a = linalg::identity(rec.dim);
            for (k, b) in &rec.links {
                a += b * &q[*k] * b.adjoint();
            }
            f += rec.weight * linalg::logdet_hpd(&a)?;
        }
        for (k, p) in self.penalty.iter().enumerate() {
            if let Some(p) = p {
                f -= linalg::re_inner(p, &q[k]);
            }
        }
        Some(f)
    }

    fn evaluate(&self, q: &[CMat], t: f64, derivatives: bool) -> Option<Eval> {
        let slack: Vec<f64> = self.usage(q).iter().zip(&self.bounds).map(|(u, b)| b - u).collect();
        if slack.iter().any(|s| !(*s > 0.0)) {
            return None;
        }
        let mut phi = t * slack.iter().map(|s| s.ln()).sum::<f64>();
        let mut q_inv = Vec::new();
        for qk in q {
            let (chol, ld) = linalg::cholesky_hpd(qk)?;
            phi += t * ld;
            if derivatives {
                q_inv.push(linalg::hermitian_part(&chol.inverse()));
            }
        }
        let mut f = self.constant;
        let mut s_mats = vec![None; self.receivers.len()];
        for &r in &self.active {
            let rec = &self.receivers[r];
            let mut a = linalg::identity(rec.dim);
            for (k, b) in &rec.links {
                a += b * &q[*k] * b.adjoint();
            }
            let a = linalg::hermitian_part(&a);
            let (chol, ld) = linalg::cholesky_hpd(&a)?;
            f += rec.weight * ld;
            if derivatives {
                s_mats[r] = Some(linalg::hermitian_part(&chol.inverse()));
            }
        }
        for (k, p) in self.penalty.iter().enumerate() {
            if let Some(p) = p {
                f -= linalg::re_inner(p, &q[k]);
            }
        }
        phi += f;
        if !phi.is_finite() {
            return None;
        }
        Some(Eval { phi, f, q_inv, slack, s_mats })
    }

    fn objective_gradient(&self, q_len: usize, ev: &Eval) -> Vec<CMat> {
        let mut g: Vec<CMat> = (0..q_len)
            .map(|k| match &self.penalty[k] {
                Some(p) => -p,
                None => CMat::zeros(self.sizes[k], self.sizes[k]),
            })
            .collect();
        for &r in &self.active {
            let rec = &self.receivers[r];
            let s = ev.s_mats[r].as_ref().expect("derivatives evaluated");
            for (k, b) in &rec.links {
                g[*k] += (b.adjoint() * s * b).scale(rec.weight);
            }
        }
        g.iter().map(linalg::hermitian_part).collect()
    }

    /// Barrier gradient without the `t Q⁻¹` term, which callers apply through `Q`.
    fn reduced_gradient(&self, grad_f: &[CMat], ev: &Eval, t: f64) -> Vec<CMat> {
        let mut g: Vec<CMat> = grad_f.to_vec();
        for (k, list) in self.block_budgets.iter().enumerate() {
            for (j, w) in list {
                add_diag(&mut g[k], w, -t / ev.slack[*j]);
            }
        }
        g
    }

    fn full_gradient(&self, g_red: &[CMat], ev: &Eval, t: f64) -> Vec<CMat> {
        g_red.iter().zip(&ev.q_inv).map(|(g, qi)| g + qi.scale(t)).collect()
    }

    /// `⟨g, Δ⟩` for the full barrier gradient.
    fn decrement_squared(&self, g_red: &[CMat], ev: &Eval, t: f64, dir: &[CMat]) -> f64 {
        g_red
            .iter()
            .zip(dir)
            .zip(&ev.q_inv)
            .map(|((g, d), qi)| linalg::re_inner(g, d) + t * (qi * d).trace().re)
            .sum()
    }

    /// Negative barrier Hessian applied to `delta` (blocks flagged `false` are zero).
    fn hess_apply(&self, q_inv: &[CMat], ev: &Eval, t: f64, delta: &[CMat], nonzero: &[bool]) -> Vec<CMat> {
        let mut out: Vec<CMat> = (0..delta.len())
            .map(|k| {
                if nonzero[k] {
                    (&q_inv[k] * &delta[k] * &q_inv[k]).scale(t)
                } else {
                    CMat::zeros(self.sizes[k], self.sizes[k])
                }
            })
            .collect();
        for &r in &self.active {
            let rec = &self.receivers[r];
            let mut dt = CMat::zeros(rec.dim, rec.dim);
            let mut touched = false;
            for (k, b) in &rec.links {
                if nonzero[*k] {
                    dt += b * &delta[*k] * b.adjoint();
                    touched = true;
                }
            }
            if !touched {
                continue;
            }
            let s = ev.s_mats[r].as_ref().expect("derivatives evaluated");
            let inner = (s * dt * s).scale(rec.weight);
            for (k, b) in &rec.links {
                out[*k] += b.adjoint() * &inner * b;
            }
        }
        let mut dp = vec![0.0; self.bounds.len()];
        for (k, list) in self.block_budgets.iter().enumerate() {
            if nonzero[k] {
                for (j, w) in list {
                    dp[*j] += diag_dot(w, &delta[k]);
                }
            }
        }
        for (k, list) in self.block_budgets.iter().enumerate() {
            for (j, w) in list {
                if dp[*j] != 0.0 {
                    add_diag(&mut out[k], w, t * dp[*j] / (ev.slack[*j] * ev.slack[*j]));
                }
            }
        }
        out.iter().map(linalg::hermitian_part).collect()
    }

    fn dense_direction(&self, q: &[CMat], ev: &Eval, g_red: &[CMat], t: f64) -> Option<Vec<CMat>> {
        let g = &self.full_gradient(g_red, ev, t);
        let offsets: Vec<usize> = self
            .sizes
            .iter()
            .scan(0, |acc, &n| {
                let o = *acc;
                *acc += n * n;
                Some(o)
            })
            .collect();
        let d: usize = self.sizes.iter().map(|n| n * n).sum();
        let mut h = DMatrix::<f64>::zeros(d, d);
        let mut rhs = DVector::<f64>::zeros(d);
        let zero: Vec<CMat> = self.sizes.iter().map(|&n| CMat::zeros(n, n)).collect();
        for k in 0..q.len() {
            let basis = self.basis(self.sizes[k]);
            for (b, coord) in basis.coords(&g[k]).into_iter().enumerate() {
                rhs[offsets[k] + b] = coord;
            }
            let mut nonzero = vec![false; q.len()];
            nonzero[k] = true;
            for (b, e) in basis.elements().iter().enumerate() {
                let mut delta = zero.clone();
                delta[k] = e.clone();
                let col = self.hess_apply(&ev.q_inv, ev, t, &delta, &nonzero);
                for (k2, blk) in col.iter().enumerate() {
                    for (b2, v) in self.basis(self.sizes[k2]).coords(blk).into_iter().enumerate() {
                        h[(offsets[k2] + b2, offsets[k] + b)] = v;
                    }
                }
            }
        }
        let h = (&h + h.transpose()).scale(0.5);
        let x = h.cholesky()?.solve(&rhs);
        Some(
            (0..q.len())
                .map(|k| {
                    let n2 = self.sizes[k] * self.sizes[k];
                    self.basis(self.sizes[k]).from_coords(&x.as_slice()[offsets[k]..offsets[k] + n2])
                })
                .collect(),
        )
    }

    fn woodbury_direction(&self, q: &[CMat], ev: &Eval, g_red: &[CMat], t: f64) -> Option<Vec<CMat>> {
        let m = self.rows;
        let nblocks = q.len();
        // V_rk = B_rk Q_k for every active link.
        let v: Vec<Vec<CMat>> = self
            .receivers
            .iter()
            .map(|rec| {
                if rec.weight == 0.0 {
                    Vec::new()
                } else {
                    rec.links.iter().map(|(k, b)| b * &q[*k]).collect()
                }
            })
            .collect();

        let mut mm = DMatrix::<f64>::zeros(m, m);
        for k in 0..nblocks {
            let links = &self.block_links[k];
            for (x, &(r, li)) in links.iter().enumerate() {
                let rec = &self.receivers[r];
                let vr = &v[r][li];
                let off_r = self.row_offset[r];
                for &(r2, li2) in &links[x..] {
                    let rec2 = &self.receivers[r2];
                    let off_r2 = self.row_offset[r2];
                    let z = vr * rec2.links[li2].1.adjoint();
                    if rec.dim == 1 && rec2.dim == 1 {
                        let val = z[(0, 0)].norm_sqr();
                        mm[(off_r, off_r2)] += val;
                        if r2 != r {
                            mm[(off_r2, off_r)] += val;
                        }
                        continue;
                    }
                    let basis_r = self.basis(rec.dim);
                    let basis_r2 = self.basis(rec2.dim);
                    for (b2, e2) in basis_r2.elements().iter().enumerate() {
                        let y = &z * e2 * z.adjoint();
                        for (b, e) in basis_r.elements().iter().enumerate() {
                            let val = linalg::re_inner(e, &y);
                            mm[(off_r + b, off_r2 + b2)] += val;
                            if r2 != r {
                                mm[(off_r2 + b2, off_r + b)] += val;
                            }
                        }
                    }
                }
                for (j, w) in &self.block_budgets[k] {
                    let row_j = self.budget_row + j;
                    let mut vw = vr.clone();
                    for (a, x) in w.iter().enumerate() {
                        vw.column_mut(a).scale_mut(*x);
                    }
                    let xm = vw * vr.adjoint();
                    for (b, e) in self.basis(rec.dim).elements().iter().enumerate() {
                        let val = linalg::re_inner(e, &xm);
                        mm[(off_r + b, row_j)] += val;
                        mm[(row_j, off_r + b)] += val;
                    }
                }
            }
            let qk = &q[k];
            for (j, w) in &self.block_budgets[k] {
                for (j2, w2) in &self.block_budgets[k] {
                    let mut val = 0.0;
                    for (a, wa) in w.iter().enumerate() {
                        if *wa == 0.0 {
                            continue;
                        }
                        for (cc, wc) in w2.iter().enumerate() {
                            val += wa * wc * qk[(a, cc)].norm_sqr();
                        }
                    }
                    mm[(self.budget_row + j, self.budget_row + j2)] += val;
                }
            }
        }
        mm.scale_mut(1.0 / t);

        // Square root of the curvature weights, block diagonal.
        let mut wh = DMatrix::<f64>::zeros(m, m);
        for &r in &self.active {
            let rec = &self.receivers[r];
            let off = self.row_offset[r];
            let s = ev.s_mats[r].as_ref().expect("derivatives evaluated");
            let root_w = rec.weight.sqrt();
            if rec.dim == 1 {
                wh[(off, off)] = root_w * s[(0, 0)].re;
                continue;
            }
            let sr = linalg::sqrt_hpsd(s);
            let basis = self.basis(rec.dim);
            for (b2, e2) in basis.elements().iter().enumerate() {
                let y = &sr * e2 * &sr;
                for (b, e) in basis.elements().iter().enumerate() {
                    wh[(off + b, off + b2)] = root_w * linalg::re_inner(e, &y);
                }
            }
        }
        for (j, s) in ev.slack.iter().enumerate() {
            let row = self.budget_row + j;
            wh[(row, row)] = t.sqrt() / s;
        }

        // r = A D⁻¹ g with D⁻¹ g = Q g_red Q / t + Q.
        let x: Vec<CMat> = q.iter().zip(g_red).map(|(qk, gk)| (qk * gk * qk).scale(1.0 / t) + qk).collect();
        let mut rvec = DVector::<f64>::zeros(m);
        for &r in &self.active {
            let rec = &self.receivers[r];
            let mut acc = CMat::zeros(rec.dim, rec.dim);
            for (k, b) in &rec.links {
                acc += b * &x[*k] * b.adjoint();
            }
            for (b, e) in self.basis(rec.dim).elements().iter().enumerate() {
                rvec[self.row_offset[r] + b] = linalg::re_inner(e, &acc);
            }
        }
        for (k, list) in self.block_budgets.iter().enumerate() {
            for (j, w) in list {
                rvec[self.budget_row + j] += diag_dot(w, &x[k]);
            }
        }

        let mut kmat = &wh * &mm * &wh;
        for i in 0..m {
            kmat[(i, i)] += 1.0;
        }
        let kmat = (&kmat + kmat.transpose()).scale(0.5);
        let y = kmat.cholesky()?.solve(&(&wh * rvec));
        let z = &wh * y;

        // Δ_k = Q_k (g_k − (Aᵀ z)_k) Q_k / t.
        let mut corr: Vec<CMat> = g_red.to_vec();
        for &r in &self.active {
            let rec = &self.receivers[r];
            let zr = self
                .basis(rec.dim)
                .from_coords(&z.as_slice()[self.row_offset[r]..self.row_offset[r] + rec.dim * rec.dim]);
            for (k, b) in &rec.links {
                corr[*k] -= b.adjoint() * &zr * b;
            }
        }
        for (k, list) in self.block_budgets.iter().enumerate() {
            for (j, w) in list {
                add_diag(&mut corr[k], w, -z[self.budget_row + j]);
            }
        }
        Some(
            q.iter()
                .zip(&corr)
                .map(|(qk, ck)| linalg::hermitian_part(&((qk * ck * qk).scale(1.0 / t) + qk)))
                .collect(),
        )
    }

    fn newton_direction(&self, q: &[CMat], ev: &Eval, g: &[CMat], t: f64) -> Option<Vec<CMat>> {
        let d: usize = self.sizes.iter().map(|n| n * n).sum();
        if d <= self.rows {
            self.dense_direction(q, ev, g, t)
        } else {
            self.woodbury_direction(q, ev, g, t)
        }
    }

    /// Upper bound on `optimum − f(q)`: the better of the dual points
    /// `μ_j = t / s_j` and a least-squares fit of the stationarity condition.
    fn certified_gap(&self, q: &[CMat], grad_f: &[CMat], ev: &Eval, t: f64) -> f64 {
        let barrier_mu: Vec<f64> = ev.slack.iter().map(|s| t / s).collect();
        let mut best = self.gap_for(q, grad_f, &barrier_mu);
        if let Some(mu) = self.fitted_multipliers(q, grad_f, &ev.slack, t) {
            best = best.min(self.gap_for(q, grad_f, &mu));
        }
        best
    }

    fn gap_for(&self, q: &[CMat], grad_f: &[CMat], mu: &[f64]) -> f64 {
        let mut gap: f64 = mu.iter().zip(&self.bounds).map(|(m, b)| m * b).sum();
        for k in 0..q.len() {
            gap -= linalg::re_inner(&grad_f[k], &q[k]);
            let mut diff = grad_f[k].clone();
            for (j, w) in &self.block_budgets[k] {
                add_diag(&mut diff, w, -mu[*j]);
            }
            gap += linalg::max_eigenvalue(&diff).max(0.0) * self.tau[k];
        }
        gap
    }

    /// Minimize `Σ_k ‖Q_k^½ (G_k + t Q_k⁻¹ − Λ_k(μ)) Q_k^½‖² + Σ_j (μ_j s_j − t)²`
    /// over `μ ≥ 0` (unconstrained solve, then clamped).
    fn fitted_multipliers(&self, q: &[CMat], grad_f: &[CMat], slack: &[f64], t: f64) -> Option<Vec<f64>> {
        let nj = self.bounds.len();
        if nj == 0 {
            return None;
        }
        let mut a = DMatrix::<f64>::zeros(nj, nj);
        let mut rhs = DVector::<f64>::zeros(nj);
        for (k, list) in self.block_budgets.iter().enumerate() {
            let qk = &q[k];
            let qgq = qk * &grad_f[k] * qk;
            for (j, w) in list {
                rhs[*j] += diag_dot(w, &qgq) + t * diag_dot(w, qk);
                for (l, w2) in list {
                    let mut v = 0.0;
                    for (x, wa) in w.iter().enumerate() {
                        if *wa == 0.0 {
                            continue;
                        }
                        for (y, wc) in w2.iter().enumerate() {
                            v += wa * wc * qk[(x, y)].norm_sqr();
                        }
                    }
                    a[(*j, *l)] += v;
                }
            }
        }
        for j in 0..nj {
            a[(j, j)] += slack[j] * slack[j];
            rhs[j] += t * slack[j];
            a[(j, j)] += 1e-14 * (1.0 + a[(j, j)]);
        }
        let mu = a.cholesky()?.solve(&rhs);
        Some(mu.iter().map(|m| m.max(0.0)).collect())
    }

    /// A strictly feasible point using half of every budget.
    fn centre(&self) -> Vec<CMat> {
        let mut counts = vec![0usize; self.bounds.len()];
        for list in &self.block_budgets {
            for (j, w) in list {
                counts[*j] += w.iter().filter(|x| **x > 0.0).count();
            }
        }
        self.sizes
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let mut m = CMat::zeros(n, n);
                for a in 0..n {
                    let v = self.block_budgets[k]
                        .iter()
                        .filter(|(_, w)| w[a] > 0.0)
                        .map(|(j, w)| self.bounds[*j] / (2.0 * w[a] * counts[*j] as f64))
                        .fold(f64::INFINITY, f64::min);
                    m[(a, a)] = c(v);
                }
                m
            })
            .collect()
    }

    /// Clip to PSD and shrink uniformly into the feasible set.
    fn feasible_warm(&self, warm: &[CMat]) -> Vec<CMat> {
        let clipped: Vec<CMat> = warm.iter().map(linalg::clip_psd).collect();
        let usage = self.usage(&clipped);
        let shrink = usage
            .iter()
            .zip(&self.bounds)
            .map(|(u, b)| if *u > *b { b / u } else { 1.0 })
            .fold(1.0, f64::min);
        clipped.iter().map(|q| q.scale(shrink)).collect()
    }
}

/// Solve a [`BlockProblem`] from an optional warm start.
///
/// The returned blocks are PSD and budget-feasible. If the warm start has a
/// higher objective than the barrier iterate it is returned instead, so the
/// objective never drops below the warm start's.
pub fn solve_block_concave(
    problem: &BlockProblem,
    warm_start: Option<&[CMat]>,
    options: &SolverOptions,
) -> Result<BlockSolution> {
    problem.validate()?;
    if let Some(w) = warm_start {
        if w.len() != problem.block_sizes.len()
            || w.iter().zip(&problem.block_sizes).any(|(q, &n)| q.shape() != (n, n))
        {
            return Err(Error::InvalidInput("warm start does not match block sizes".into()));
        }
    }
    let zero_blocks: Vec<CMat> = problem.block_sizes.iter().map(|&n| CMat::zeros(n, n)).collect();
    if problem.is_trivial() {
        let objective = problem.objective(&zero_blocks).unwrap_or(problem.constant);
        return Ok(BlockSolution {
            blocks: zero_blocks,
            certificate: SolverCertificate {
                objective,
                feasibility_residual: 0.0,
                stationarity_residual: 0.0,
                duality_gap: 0.0,
                iterations: 0,
                stages: 0,
                converged: true,
                kept_warm_start: false,
            },
            trace: Vec::new(),
        });
    }

    let prep = Prepared::new(problem);
    let warm_scaled: Option<Vec<CMat>> = warm_start
        .filter(|w| w.iter().any(|q| linalg::max_abs(q) > 0.0))
        .map(|w| prep.feasible_warm(&w.iter().map(|q| q.scale(1.0 / prep.scale)).collect::<Vec<_>>()));
    let centre = prep.centre();
    let (mut q, cold) = match &warm_scaled {
        Some(w) => {
            let theta = 1e-1;
            (w.iter().zip(&centre).map(|(a, b)| a.scale(1.0 - theta) + b.scale(theta)).collect::<Vec<_>>(), false)
        }
        None => (centre, true),
    };

    let f0 = prep
        .objective(&q)
        .ok_or_else(|| Error::Numerical("objective undefined at the starting point".into()))?;
    let mut t = (1.0 + f0.abs()) / prep.barrier_degree * if cold { 1.0 } else { 1e-2 };
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut stages = 0;
    let mut decrement = f64::INFINITY;
    // Smallest certified upper bound on the optimum seen so far.
    let mut upper = f64::INFINITY;
    let mut best_q = q.clone();
    let mut best_f = f64::NEG_INFINITY;
    let mut idle_stages = 0;
    let tol = |f: f64| options.gap_abs + options.gap_rel * f.abs();

    while stages < options.max_stages {
        stages += 1;
        let mut stalled = false;
        let mut best_lambda2 = f64::INFINITY;
        let mut flat = 0;
        for _ in 0..options.max_newton_per_stage {
            let ev = prep
                .evaluate(&q, t, true)
                .ok_or_else(|| Error::Numerical("lost strict feasibility during centering".into()))?;
            let grad_f = prep.objective_gradient(q.len(), &ev);
            let g = prep.reduced_gradient(&grad_f, &ev, t);
            if g.iter().any(|m| m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
                return Err(Error::Numerical("non-finite gradient".into()));
            }
            let dir = match prep.newton_direction(&q, &ev, &g, t) {
                Some(d) => d,
                None => {
                    stalled = true;
                    break;
                }
            };
            let lambda2 = prep.decrement_squared(&g, &ev, t, &dir);
            decrement = lambda2.max(0.0).sqrt();
            if options.trace {
                trace.push(TraceRow { iteration: iterations, stage: stages, barrier_weight: t, objective: ev.f, decrement });
            }
            if !lambda2.is_finite() {
                return Err(Error::Numerical("non-finite Newton decrement".into()));
            }
            if lambda2 < 0.0 {
                stalled = true;
                break;
            }
            if lambda2 / 2.0 <= 1e-10 * t * prep.barrier_degree || lambda2 <= 1e-24 {
                break;
            }
            // Roundoff floor: the decrement stops shrinking.
            if lambda2 < 0.5 * best_lambda2 || lambda2 > 1e-2 * t {
                best_lambda2 = best_lambda2.min(lambda2);
                flat = 0;
            } else {
                flat += 1;
                if flat >= 4 {
                    stalled = true;
                    break;
                }
            }
            iterations += 1;
            let mut alpha = 1.0;
            let mut accepted = false;
            while alpha > 1e-14 {
                let trial: Vec<CMat> = q.iter().zip(&dir).map(|(a, d)| a + d.scale(alpha)).collect();
                if let Some(tr) = prep.evaluate(&trial, t, false) {
                    let quadratic_region = alpha == 1.0 && lambda2 <= 1e-2 * t;
                    if quadratic_region || tr.phi >= ev.phi + 0.25 * alpha * lambda2 {
                        q = trial;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                stalled = true;
                break;
            }
        }
        let ev = prep
            .evaluate(&q, t, true)
            .ok_or_else(|| Error::Numerical("lost strict feasibility".into()))?;
        let grad_f = prep.objective_gradient(q.len(), &ev);
        let stage_gap = prep.certified_gap(&q, &grad_f, &ev, t);
        if ev.f >= best_f {
            best_f = ev.f;
            best_q = q.clone();
        }
        if ev.f + stage_gap < upper {
            upper = ev.f + stage_gap;
            idle_stages = 0;
        } else {
            idle_stages += 1;
        }
        if upper - best_f <= 1e-2 * tol(best_f) || (stalled && idle_stages >= 2) {
            break;
        }
        t *= options.barrier_decrease;
    }

    let mut q = best_q;
    let mut last_f = best_f;
    let gap = (upper - best_f).max(0.0);
    let converged = gap <= tol(best_f);
    let mut kept_warm_start = false;
    if let Some(w) = &warm_scaled {
        if let Some(fw) = prep.objective(w) {
            if fw > last_f {
                q = w.clone();
                last_f = fw;
                kept_warm_start = true;
            }
        }
    }
    let blocks: Vec<CMat> = q.iter().map(|b| linalg::hermitian_part(&b.scale(prep.scale))).collect();
    let usage = problem.budget_usage(&blocks);
    let feasibility_residual = usage
        .iter()
        .zip(&problem.budgets)
        .map(|(u, b)| (u - b.bound).max(0.0))
        .fold(0.0, f64::max);
    Ok(BlockSolution {
        blocks,
        certificate: SolverCertificate {
            objective: last_f,
            feasibility_residual,
            stationarity_residual: decrement,
            duality_gap: gap,
            iterations,
            stages,
            converged,
            kept_warm_start,
        },
        trace,
    })
}
