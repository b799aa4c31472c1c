use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::params::{tri_index, ModelParams};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-12;
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    #[default]
    Analytic,
    /// Central differences, one pair of loss evaluations per real parameter.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    /// Damped Gauss-Newton on the difference residuals.
    #[default]
    LevenbergMarquardt,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub optimizer: Optimizer,
    /// Adam learning rate (unused by Levenberg-Marquardt).
    pub step: f64,
    /// Iteration budget per restart; 300 for Levenberg-Marquardt, 3000 for Adam when unset.
    pub max_iters: Option<usize>,
    pub seed: u64,
    /// Standard deviation of the complex Gaussian initialization of the `K` blocks.
    pub init_scale: f64,
    /// Training loss at which a restart stops.
    pub tol: f64,
    pub gradient: GradientMode,
    pub restarts: usize,
    /// A restart is abandoned when its best loss has not halved over this many
    /// iterations; 40 for Levenberg-Marquardt, 600 for Adam when unset.
    pub patience: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::LevenbergMarquardt,
            step: 1e-2,
            max_iters: None,
            seed: 0,
            init_scale: 0.1,
            tol: 1e-10,
            gradient: GradientMode::Analytic,
            restarts: 5,
            patience: None,
        }
    }
}

impl FitConfig {
    pub fn iteration_budget(&self) -> usize {
        self.max_iters.unwrap_or(match self.optimizer {
            Optimizer::LevenbergMarquardt => 300,
            Optimizer::Adam => 3000,
        })
    }

    pub fn plateau_window(&self) -> usize {
        self.patience.unwrap_or(match self.optimizer {
            Optimizer::LevenbergMarquardt => 40,
            Optimizer::Adam => 600,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    Plateau,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub iterations: usize,
    pub best_loss: f64,
    pub stop: StopReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub restarts: Vec<RestartSummary>,
    /// Index of the restart whose parameters were kept.
    pub best_restart: usize,
    /// Training loss per iteration of the kept restart.
    pub trajectory: Vec<f64>,
    pub final_loss: f64,
}

/// Difference-loss problem over a dataset, with preallocated buffers.
pub(crate) struct Problem {
    n_t: usize,
    n_r: usize,
    n_c: usize,
    m: usize,
    bits: Vec<bool>,
    /// `h_{m+1} − h_m`, row-major per pair.
    dh: Vec<Complex64>,
    denom: f64,
    // buffers
    k: Vec<Complex64>,
    kct: Vec<Complex64>,
    krc: Vec<Complex64>,
    a: Vec<Complex64>,
    /// per configuration: `[U | V]`, `n_c × (n_t + n_r)` row-major
    uv: Vec<Complex64>,
    h: Vec<Complex64>,
    abar: Vec<Complex64>,
    g_k: Vec<Complex64>,
    g_ct: Vec<Complex64>,
    g_rc: Vec<Complex64>,
    tmp_p: Vec<Complex64>,
    tmp_w: Vec<Complex64>,
    tmp_y: Vec<Complex64>,
    /// per configuration and channel entry: derivatives with respect to every complex
    /// parameter except `k_rt`
    jac: Vec<Complex64>,
}

impl Problem {
    pub(crate) fn new(d: &Dataset) -> Result<Self> {
        if d.len() < 2 {
            return Err(Error::DegenerateDataset("need at least two samples".into()));
        }
        let (n_t, n_r, n_c, m) = (d.n_t(), d.n_r(), d.n_c(), d.len());
        let s = d.samples();
        if s.windows(2).all(|w| w[0].0 == w[1].0) {
            return Err(Error::DegenerateDataset("all configurations are identical".into()));
        }
        let bits: Vec<bool> = s.iter().flat_map(|(b, _)| b.bits().iter().copied()).collect();
        let mut dh = Vec::with_capacity((m - 1) * n_r * n_t);
        for w in s.windows(2) {
            for r in 0..n_r {
                for t in 0..n_t {
                    dh.push(w[1].1[(r, t)] - w[0].1[(r, t)]);
                }
            }
        }
        let denom: f64 = dh.iter().map(|v| v.norm_sqr()).sum();
        if !(denom > 0.0 && denom.is_finite()) {
            return Err(Error::DegenerateDataset("zero difference signal".into()));
        }
        let z = Complex64::ZERO;
        let w = n_t + n_r;
        Ok(Self {
            n_t,
            n_r,
            n_c,
            m,
            bits,
            dh,
            denom,
            k: vec![z; n_c * n_c],
            kct: vec![z; n_c * n_t],
            krc: vec![z; n_r * n_c],
            a: vec![z; n_c * n_c],
            uv: vec![z; m * n_c * w],
            h: vec![z; m * n_r * n_t],
            abar: vec![z; m * n_r * n_t],
            g_k: vec![z; n_c * n_c],
            g_ct: vec![z; n_c * n_t],
            g_rc: vec![z; n_r * n_c],
            tmp_p: vec![z; n_c * n_t],
            tmp_w: vec![z; n_r * n_c],
            tmp_y: vec![z; n_c * n_t],
            jac: Vec::new(),
        })
    }

    fn check(&self, p: &ModelParams) -> Result<()> {
        if (p.n_t(), p.n_r(), p.n_c()) != (self.n_t, self.n_r, self.n_c) {
            return Err(Error::DimensionMismatch(format!(
                "model is {}x{} with {} loads, data is {}x{} with {}",
                p.n_r(),
                p.n_t(),
                p.n_c(),
                self.n_r,
                self.n_t,
                self.n_c
            )));
        }
        Ok(())
    }

    fn load(&mut self, p: &ModelParams) {
        let (n_t, n_r, n_c) = (self.n_t, self.n_r, self.n_c);
        let up = p.k_cc_upper();
        for i in 0..n_c {
            for j in i..n_c {
                let v = up[tri_index(n_c, i, j)];
                self.k[i * n_c + j] = v;
                self.k[j * n_c + i] = v;
            }
        }
        for i in 0..n_c {
            for t in 0..n_t {
                self.kct[i * n_t + t] = p.k_ac[(t, i)];
            }
            for r in 0..n_r {
                self.krc[r * n_c + i] = p.k_ac[(n_t + r, i)];
            }
        }
    }

    /// Solves every configuration and fills `h` (channels without `k_rt`). Returns the loss.
    fn forward(&mut self, p: &ModelParams) -> f64 {
        let (n_t, n_r, n_c) = (self.n_t, self.n_r, self.n_c);
        let w = n_t + n_r;
        self.load(p);
        for m in 0..self.m {
            let bits = &self.bits[m * n_c..(m + 1) * n_c];
            let uv = &mut self.uv[m * n_c * w..(m + 1) * n_c * w];
            for i in 0..n_c {
                let phi = if bits[i] { p.r_b } else { p.r_a };
                for j in 0..n_c {
                    self.a[i * n_c + j] = -phi * self.k[i * n_c + j];
                }
                self.a[i * n_c + i] += 1.0;
                for t in 0..n_t {
                    uv[i * w + t] = phi * self.kct[i * n_t + t];
                }
                for r in 0..n_r {
                    uv[i * w + n_t + r] = phi * self.krc[r * n_c + i];
                }
            }
            if !lu_solve(&mut self.a, n_c, uv, w) {
                return f64::NAN;
            }
            let h = &mut self.h[m * n_r * n_t..(m + 1) * n_r * n_t];
            for r in 0..n_r {
                for t in 0..n_t {
                    let mut acc = Complex64::ZERO;
                    for i in 0..n_c {
                        acc += self.krc[r * n_c + i] * uv[i * w + t];
                    }
                    h[r * n_t + t] = acc;
                }
            }
        }
        let q = n_r * n_t;
        self.abar.iter_mut().for_each(|v| *v = Complex64::ZERO);
        let mut total = 0.0;
        for m in 0..self.m - 1 {
            for k in 0..q {
                let e = (self.h[(m + 1) * q + k] - self.h[m * q + k]) - self.dh[m * q + k];
                total += e.norm_sqr();
                let e = e / self.denom;
                self.abar[(m + 1) * q + k] += e;
                self.abar[m * q + k] -= e;
            }
        }
        total / self.denom
    }

    pub(crate) fn loss(&mut self, p: &ModelParams) -> Result<f64> {
        self.check(p)?;
        Ok(self.forward(p))
    }

    /// Loss and its gradient with respect to the real parameter vector of `p`.
    pub(crate) fn loss_grad(&mut self, p: &ModelParams, grad: &mut [f64]) -> Result<f64> {
        self.check(p)?;
        assert_eq!(grad.len(), p.dof());
        let loss = self.forward(p);
        if !loss.is_finite() {
            return Ok(loss);
        }
        let (n_t, n_r, n_c) = (self.n_t, self.n_r, self.n_c);
        let w = n_t + n_r;
        let q = n_r * n_t;
        let z = Complex64::ZERO;
        self.g_k.iter_mut().for_each(|v| *v = z);
        self.g_ct.iter_mut().for_each(|v| *v = z);
        self.g_rc.iter_mut().for_each(|v| *v = z);
        let (mut g_ra, mut g_rb) = (z, z);
        for m in 0..self.m {
            let ab = &self.abar[m * q..(m + 1) * q];
            let uv = &self.uv[m * n_c * w..(m + 1) * n_c * w];
            let bits = &self.bits[m * n_c..(m + 1) * n_c];
            // P = conj(V) Ā
            for i in 0..n_c {
                for t in 0..n_t {
                    let mut acc = z;
                    for r in 0..n_r {
                        acc += uv[i * w + n_t + r].conj() * ab[r * n_t + t];
                    }
                    self.tmp_p[i * n_t + t] = acc;
                    self.g_ct[i * n_t + t] += acc;
                }
            }
            // g_RC += Ā Uᴴ
            for r in 0..n_r {
                for i in 0..n_c {
                    let mut acc = z;
                    for t in 0..n_t {
                        acc += ab[r * n_t + t] * uv[i * w + t].conj();
                    }
                    self.g_rc[r * n_c + i] += acc;
                }
            }
            // G_K += P Uᴴ
            for i in 0..n_c {
                for j in 0..n_c {
                    let mut acc = z;
                    for t in 0..n_t {
                        acc += self.tmp_p[i * n_t + t] * uv[j * w + t].conj();
                    }
                    self.g_k[i * n_c + j] += acc;
                }
            }
            // W = K_RC + Vᵀ K, Y = K_CT + K U
            for r in 0..n_r {
                for i in 0..n_c {
                    let mut acc = self.krc[r * n_c + i];
                    for j in 0..n_c {
                        acc += uv[j * w + n_t + r] * self.k[j * n_c + i];
                    }
                    self.tmp_w[r * n_c + i] = acc;
                }
            }
            for i in 0..n_c {
                for t in 0..n_t {
                    let mut acc = self.kct[i * n_t + t];
                    for j in 0..n_c {
                        acc += self.k[i * n_c + j] * uv[j * w + t];
                    }
                    self.tmp_y[i * n_t + t] = acc;
                }
            }
            for i in 0..n_c {
                let mut g_phi = z;
                for r in 0..n_r {
                    let mut acc = z;
                    for t in 0..n_t {
                        acc += ab[r * n_t + t] * self.tmp_y[i * n_t + t].conj();
                    }
                    g_phi += self.tmp_w[r * n_c + i].conj() * acc;
                }
                if bits[i] {
                    g_rb += g_phi;
                } else {
                    g_ra += g_phi;
                }
            }
        }

        // scatter into the parameter order: k_rt, k_ac, k_cc triangle, r_a, r_b
        let mut out = Vec::with_capacity(p.complex_len());
        out.extend(std::iter::repeat_n(z, n_r * n_t));
        for t in 0..n_t {
            for i in 0..n_c {
                out.push(self.g_ct[i * n_t + t]);
            }
        }
        for r in 0..n_r {
            for i in 0..n_c {
                out.push(self.g_rc[r * n_c + i]);
            }
        }
        for i in 0..n_c {
            for j in i..n_c {
                let g = if i == j {
                    self.g_k[i * n_c + i]
                } else {
                    self.g_k[i * n_c + j] + self.g_k[j * n_c + i]
                };
                out.push(g);
            }
        }
        out.push(g_ra);
        out.push(g_rb);
        for (slot, g) in grad.chunks_exact_mut(2).zip(&out) {
            slot[0] = 2.0 * g.re;
            slot[1] = 2.0 * g.im;
        }
        Ok(loss)
    }

    pub(crate) fn loss_grad_fd(&mut self, p: &ModelParams, grad: &mut [f64]) -> Result<f64> {
        self.check(p)?;
        let x0 = p.to_vec();
        let mut probe = p.clone();
        let mut x = x0.clone();
        for k in 0..x.len() {
            x[k] = x0[k] + FD_STEP;
            probe.set_from_vec(&x);
            let up = self.forward(&probe);
            x[k] = x0[k] - FD_STEP;
            probe.set_from_vec(&x);
            let down = self.forward(&probe);
            x[k] = x0[k];
            grad[k] = (up - down) / (2.0 * FD_STEP);
        }
        Ok(self.forward(p))
    }

    /// Number of complex parameters the loss depends on (all but `k_rt`).
    pub(crate) fn n_free(&self) -> usize {
        (self.n_t + self.n_r) * self.n_c + self.n_c * (self.n_c + 1) / 2 + 2
    }

    /// Fills `jac` with `∂H/∂θ` for every configuration, after [`Self::forward`].
    fn jacobian(&mut self) {
        let (n_t, n_r, n_c) = (self.n_t, self.n_r, self.n_c);
        let (w, q, np) = (n_t + n_r, n_r * n_t, self.n_free());
        let z = Complex64::ZERO;
        self.jac.clear();
        self.jac.resize(self.m * q * np, z);
        let tri_base = (n_t + n_r) * n_c;
        for m in 0..self.m {
            let uv = &self.uv[m * n_c * w..(m + 1) * n_c * w];
            let bits = &self.bits[m * n_c..(m + 1) * n_c];
            for r in 0..n_r {
                for i in 0..n_c {
                    let mut acc = self.krc[r * n_c + i];
                    for j in 0..n_c {
                        acc += uv[j * w + n_t + r] * self.k[j * n_c + i];
                    }
                    self.tmp_w[r * n_c + i] = acc;
                }
            }
            for i in 0..n_c {
                for t in 0..n_t {
                    let mut acc = self.kct[i * n_t + t];
                    for j in 0..n_c {
                        acc += self.k[i * n_c + j] * uv[j * w + t];
                    }
                    self.tmp_y[i * n_t + t] = acc;
                }
            }
            for r in 0..n_r {
                for t in 0..n_t {
                    let row = &mut self.jac[(m * q + r * n_t + t) * np..(m * q + r * n_t + t + 1) * np];
                    for i in 0..n_c {
                        row[t * n_c + i] = uv[i * w + n_t + r];
                        row[(n_t + r) * n_c + i] = uv[i * w + t];
                    }
                    let mut col = tri_base;
                    for i in 0..n_c {
                        let (vi, ui) = (uv[i * w + n_t + r], uv[i * w + t]);
                        row[col] = vi * ui;
                        col += 1;
                        for j in i + 1..n_c {
                            row[col] = vi * uv[j * w + t] + uv[j * w + n_t + r] * ui;
                            col += 1;
                        }
                    }
                    let (mut da, mut db) = (z, z);
                    for i in 0..n_c {
                        let v = self.tmp_w[r * n_c + i] * self.tmp_y[i * n_t + t];
                        if bits[i] {
                            db += v;
                        } else {
                            da += v;
                        }
                    }
                    row[np - 2] = da;
                    row[np - 1] = db;
                }
            }
        }
    }

    /// Central-difference version of [`Self::jacobian`]. Leaves `h` at `p`.
    fn jacobian_fd(&mut self, p: &ModelParams) {
        let (q, np, skip) = (self.n_r * self.n_t, self.n_free(), self.n_r * self.n_t);
        let mut jac = vec![Complex64::ZERO; self.m * q * np];
        let v0 = p.to_complex_vec();
        let mut probe = p.clone();
        for k in 0..np {
            let mut v = v0.clone();
            v[skip + k] += FD_STEP;
            probe.set_from_complex(&v);
            self.forward(&probe);
            let up = self.h.clone();
            v[skip + k] = v0[skip + k] - FD_STEP;
            probe.set_from_complex(&v);
            self.forward(&probe);
            for (row, (a, b)) in up.iter().zip(&self.h).enumerate() {
                jac[row * np + k] = (a - b) / (2.0 * FD_STEP);
            }
        }
        self.forward(p);
        self.jac = jac;
    }

    /// Loss, Gauss-Newton matrix `JᴴJ` and gradient `Jᴴr` of the difference residuals
    /// (both scaled like the loss) over the parameters returned by [`Self::n_free`].
    pub(crate) fn normal_equations(&mut self, p: &ModelParams, mode: GradientMode, a: &mut CMatrix, g: &mut [Complex64]) -> f64 {
        let loss = self.forward(p);
        if !loss.is_finite() {
            return loss;
        }
        match mode {
            GradientMode::Analytic => self.jacobian(),
            GradientMode::FiniteDifference => self.jacobian_fd(p),
        }
        let (q, np) = (self.n_r * self.n_t, self.n_free());
        let mut acc = vec![Complex64::ZERO; np * np];
        let mut dj = vec![Complex64::ZERO; np];
        g.iter_mut().for_each(|v| *v = Complex64::ZERO);
        for m in 0..self.m - 1 {
            for k in 0..q {
                let e = (self.h[(m + 1) * q + k] - self.h[m * q + k]) - self.dh[m * q + k];
                let next = &self.jac[((m + 1) * q + k) * np..((m + 1) * q + k + 1) * np];
                let cur = &self.jac[(m * q + k) * np..(m * q + k + 1) * np];
                for c in 0..np {
                    dj[c] = next[c] - cur[c];
                }
                for i in 0..np {
                    let ci = dj[i].conj();
                    g[i] += ci * e;
                    let row = &mut acc[i * np..(i + 1) * np];
                    for j in i..np {
                        row[j] += ci * dj[j];
                    }
                }
            }
        }
        let scale = 1.0 / self.denom;
        for i in 0..np {
            g[i] *= scale;
            for j in i..np {
                let v = acc[i * np + j] * scale;
                a[(i, j)] = v;
                a[(j, i)] = v.conj();
            }
        }
        loss
    }

    /// Least-squares `k_rt`: mean residual of the absolute channels.
    fn recover_k_rt(&mut self, p: &mut ModelParams, d: &Dataset) {
        p.k_rt.fill(Complex64::ZERO);
        self.forward(p);
        let q = self.n_r * self.n_t;
        let mut acc = CMatrix::zeros(self.n_r, self.n_t);
        for (m, (_, h)) in d.samples().iter().enumerate() {
            for r in 0..self.n_r {
                for t in 0..self.n_t {
                    acc[(r, t)] += h[(r, t)] - self.h[m * q + r * self.n_t + t];
                }
            }
        }
        p.k_rt = acc / Complex64::from(self.m as f64);
    }
}

/// In-place LU with partial pivoting on the row-major `n × n` matrix `a`, then solves for
/// the `k` right-hand-side columns stored row-major in `b`. Returns `false` on a zero or
/// non-finite pivot.
fn lu_solve(a: &mut [Complex64], n: usize, b: &mut [Complex64], k: usize) -> bool {
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].norm_sqr();
        for row in col + 1..n {
            let v = a[row * n + col].norm_sqr();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if !(best > 0.0 && best.is_finite()) {
            return false;
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            for j in 0..k {
                b.swap(col * k + j, piv * k + j);
            }
        }
        let inv = a[col * n + col].inv();
        for row in col + 1..n {
            let f = a[row * n + col] * inv;
            if f == Complex64::ZERO {
                continue;
            }
            for j in col + 1..n {
                let v = a[col * n + j];
                a[row * n + j] -= f * v;
            }
            for j in 0..k {
                let v = b[col * k + j];
                b[row * k + j] -= f * v;
            }
        }
    }
    for col in (0..n).rev() {
        let inv = a[col * n + col].inv();
        for j in 0..k {
            let mut acc = b[col * k + j];
            for c in col + 1..n {
                acc -= a[col * n + c] * b[c * k + j];
            }
            b[col * k + j] = acc * inv;
        }
    }
    true
}

fn complex_normal<R: Rng>(rng: &mut R, scale: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * (scale / std::f64::consts::SQRT_2)
}

fn unit_disk<R: Rng>(rng: &mut R) -> Complex64 {
    let rho = rng.random::<f64>().sqrt();
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    Complex64::from_polar(rho, theta)
}

fn initial_params(n_t: usize, n_r: usize, n_c: usize, cfg: &FitConfig, restart: usize) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64);
    let mut p = ModelParams::zeros(n_t, n_r, n_c);
    let mut v: Vec<Complex64> = (0..p.complex_len() - 2).map(|_| complex_normal(&mut rng, cfg.init_scale)).collect();
    let r_a = unit_disk(&mut rng);
    let r_b = loop {
        let c = unit_disk(&mut rng);
        if (c - r_a).norm() > 1e-3 {
            break c;
        }
    };
    v.push(r_a);
    v.push(r_b);
    p.set_from_complex(&v);
    p
}

fn validate_config(cfg: &FitConfig) -> Result<()> {
    let bad = |what: &str| Err(Error::InvalidArgument(format!("fit configuration: {what}")));
    if !(cfg.step > 0.0 && cfg.step.is_finite()) {
        return bad("step must be positive");
    }
    if !(cfg.init_scale > 0.0 && cfg.init_scale.is_finite()) {
        return bad("init_scale must be positive");
    }
    if !(cfg.tol >= 0.0) {
        return bad("tol must be non-negative");
    }
    if cfg.iteration_budget() == 0 || cfg.restarts == 0 || cfg.plateau_window() == 0 {
        return bad("max_iters, restarts and patience must be positive");
    }
    Ok(())
}

struct RestartOutcome {
    params: ModelParams,
    best_loss: f64,
    trajectory: Vec<f64>,
    stop: StopReason,
}

fn run_adam(prob: &mut Problem, mut p: ModelParams, cfg: &FitConfig, restart: usize) -> Result<RestartOutcome> {
    let mut x = p.to_vec();
    let n = x.len();
    let (mut m1, mut m2, mut g) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let budget = cfg.iteration_budget();
    let window = cfg.plateau_window();
    let mut traj = Vec::with_capacity(budget);
    let mut best = (f64::INFINITY, x.clone());
    let mut checkpoint = f64::INFINITY;
    let mut stop = StopReason::Budget;

    for it in 0..budget {
        let loss = match cfg.gradient {
            GradientMode::Analytic => prob.loss_grad(&p, &mut g)?,
            GradientMode::FiniteDifference => prob.loss_grad_fd(&p, &mut g)?,
        };
        if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { restart, iteration: it });
        }
        traj.push(loss);
        if loss < best.0 {
            best = (loss, x.clone());
        }
        if loss <= cfg.tol {
            stop = StopReason::Converged;
            break;
        }
        if (it + 1) % window == 0 {
            if best.0 > 0.5 * checkpoint {
                stop = StopReason::Plateau;
                break;
            }
            checkpoint = best.0;
        }
        let t = (it + 1) as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for k in 0..n {
            m1[k] = ADAM_BETA1 * m1[k] + (1.0 - ADAM_BETA1) * g[k];
            m2[k] = ADAM_BETA2 * m2[k] + (1.0 - ADAM_BETA2) * g[k] * g[k];
            x[k] -= cfg.step * (m1[k] / c1) / ((m2[k] / c2).sqrt() + ADAM_EPS);
        }
        p.set_from_vec(&x);
    }
    p.set_from_vec(&best.1);
    Ok(RestartOutcome { params: p, best_loss: best.0, trajectory: traj, stop })
}

/// Damping beyond which a restart counts as stuck.
const LM_MAX_DAMPING: f64 = 1e16;

fn run_lm(prob: &mut Problem, mut p: ModelParams, cfg: &FitConfig, restart: usize) -> Result<RestartOutcome> {
    let np = prob.n_free();
    let skip = p.complex_len() - np;
    let mut a = CMatrix::zeros(np, np);
    let mut g = vec![Complex64::ZERO; np];
    let mut loss = prob.normal_equations(&p, cfg.gradient, &mut a, &mut g);
    if !loss.is_finite() {
        return Err(Error::Diverged { restart, iteration: 0 });
    }
    let max_diag = |a: &CMatrix| (0..np).map(|i| a[(i, i)].re).fold(0.0, f64::max);
    let mut mu = 1e-3;
    let mut nu = 2.0;
    let budget = cfg.iteration_budget();
    let window = cfg.plateau_window();
    let mut traj = Vec::with_capacity(budget);
    let mut checkpoint = f64::INFINITY;
    let mut stop = StopReason::Budget;
    let mut trial = p.clone();

    'outer: for it in 0..budget {
        traj.push(loss);
        if loss <= cfg.tol {
            stop = StopReason::Converged;
            break;
        }
        if (it + 1) % window == 0 {
            if loss > 0.5 * checkpoint {
                stop = StopReason::Plateau;
                break;
            }
            checkpoint = loss;
        }
        let floor = 1e-12 * max_diag(&a).max(f64::MIN_POSITIVE);
        loop {
            if mu > LM_MAX_DAMPING {
                stop = StopReason::Plateau;
                break 'outer;
            }
            let mut damped = a.clone();
            for i in 0..np {
                damped[(i, i)] += mu * a[(i, i)].re.max(floor);
            }
            let Some(chol) = damped.cholesky() else {
                mu *= nu;
                nu *= 2.0;
                continue;
            };
            let rhs = CMatrix::from_iterator(np, 1, g.iter().map(|v| -v));
            let delta = chol.solve(&rhs);
            let mut v = p.to_complex_vec();
            for (slot, d) in v[skip..].iter_mut().zip(delta.iter()) {
                *slot += d;
            }
            trial.set_from_complex(&v);
            let new_loss = prob.forward(&trial);
            let dg: Complex64 = delta.iter().zip(&g).map(|(d, gi)| d.conj() * gi).sum();
            let d_ad = (delta.adjoint() * &a * &delta)[(0, 0)].re;
            let predicted = -2.0 * dg.re - d_ad;
            let rho = (loss - new_loss) / predicted;
            if new_loss.is_finite() && predicted > 0.0 && rho > 0.0 {
                std::mem::swap(&mut p, &mut trial);
                loss = prob.normal_equations(&p, cfg.gradient, &mut a, &mut g);
                if !loss.is_finite() {
                    return Err(Error::Diverged { restart, iteration: it + 1 });
                }
                mu *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                break;
            }
            mu *= nu;
            nu *= 2.0;
        }
    }
    Ok(RestartOutcome { params: p, best_loss: loss, trajectory: traj, stop })
}

/// Fits the model parameters to `d` on the difference loss, restarting from new random
/// points while the loss stays above `cfg.tol`, then recovers `k_rt`.
pub fn fit(d: &Dataset, cfg: &FitConfig) -> Result<(ModelParams, FitReport)> {
    validate_config(cfg)?;
    let mut prob = Problem::new(d)?;
    let mut best: Option<(RestartOutcome, usize)> = None;
    let mut summaries = Vec::new();

    for restart in 0..cfg.restarts {
        let p0 = initial_params(d.n_t(), d.n_r(), d.n_c(), cfg, restart);
        let out = match cfg.optimizer {
            Optimizer::LevenbergMarquardt => run_lm(&mut prob, p0, cfg, restart)?,
            Optimizer::Adam => run_adam(&mut prob, p0, cfg, restart)?,
        };
        summaries.push(RestartSummary { iterations: out.trajectory.len(), best_loss: out.best_loss, stop: out.stop });
        let converged = out.stop == StopReason::Converged;
        if best.as_ref().is_none_or(|(b, _)| out.best_loss < b.best_loss) {
            best = Some((out, restart));
        }
        if converged {
            break;
        }
    }

    let (out, best_restart) = best.expect("at least one restart");
    let mut p = out.params;
    prob.recover_k_rt(&mut p, d);
    Ok((p, FitReport { restarts: summaries, best_restart, trajectory: out.trajectory, final_loss: out.best_loss }))
}
