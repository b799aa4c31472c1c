//! RSSI maximization over binary load configurations.
//!
//! [`coordinate_ascent`] flips one random load at a time and keeps improvements;
//! [`exhaustive_search`] walks all configurations in Gray-code order. Both evaluate the
//! channel through a [`FlipEvaluator`], which for cascade-type oracles updates the
//! resolvent by a rank-1 (Sherman-Morrison) correction in `O(N_C²)` per flip.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuits::{BinaryConfig, LoadBank};
use crate::environment::CascadeModel;
use crate::error::{Error, Result};
use crate::estimation::ModelParams;
use crate::linalg::{self, CMatrix};
use crate::network::terminated_response;
use crate::Complex64;

/// Rank-1 denominators smaller than this trigger a full refactorization.
pub const SM_DENOM_TOL: f64 = 1e-12;

const RESTARTS: usize = 10;
const ITERS_PER_LOAD: usize = 10;
const EXHAUSTIVE_MAX_BITS: usize = 24;
const EXHAUSTIVE_REFRESH: u64 = 1024;

/// `‖H‖_F²`, i.e. `|h|²` for a single link.
pub fn rssi(h: &CMatrix) -> f64 {
    h.norm_squared()
}

/// Deterministic map from configurations to channels.
pub trait ChannelOracle {
    fn n_c(&self) -> usize;

    fn channel(&self, b: &BinaryConfig) -> Result<CMatrix>;

    /// Incremental evaluator positioned at `b0`. The default re-evaluates the oracle on
    /// every flip.
    fn flip_evaluator(&self, b0: &BinaryConfig) -> Result<Box<dyn FlipEvaluator + '_>> {
        Ok(Box::new(DirectEvaluator::new(self, b0)?))
    }
}

/// Work done by a flip evaluator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCount {
    pub flips: u64,
    pub rank1_updates: u64,
    pub refactorizations: u64,
    /// Complex multiply-adds; a refactorization is charged `n³`.
    pub madds: u64,
}

/// Stateful channel evaluator under single-bit flips.
///
/// `flip` applies immediately; `rollback` returns to the state at the last `commit`
/// (or construction).
pub trait FlipEvaluator {
    fn config(&self) -> &BinaryConfig;

    fn channel(&self) -> &CMatrix;

    fn flip(&mut self, i: usize) -> Result<&CMatrix>;

    fn commit(&mut self);

    fn rollback(&mut self);

    /// Recomputes the state from scratch, discarding accumulated rounding.
    fn refresh(&mut self) -> Result<()> {
        Ok(())
    }

    fn ops(&self) -> OpCount {
        OpCount::default()
    }
}

struct DirectEvaluator<'a, O: ?Sized> {
    oracle: &'a O,
    b: BinaryConfig,
    h: CMatrix,
    saved: Option<(BinaryConfig, CMatrix)>,
}

impl<'a, O: ChannelOracle + ?Sized> DirectEvaluator<'a, O> {
    fn new(oracle: &'a O, b0: &BinaryConfig) -> Result<Self> {
        let h = oracle.channel(b0)?;
        Ok(Self { oracle, b: b0.clone(), h, saved: None })
    }
}

impl<O: ChannelOracle + ?Sized> FlipEvaluator for DirectEvaluator<'_, O> {
    fn config(&self) -> &BinaryConfig {
        &self.b
    }

    fn channel(&self) -> &CMatrix {
        &self.h
    }

    fn flip(&mut self, i: usize) -> Result<&CMatrix> {
        if self.saved.is_none() {
            self.saved = Some((self.b.clone(), self.h.clone()));
        }
        self.b.flip(i);
        self.h = self.oracle.channel(&self.b)?;
        Ok(&self.h)
    }

    fn commit(&mut self) {
        self.saved = None;
    }

    fn rollback(&mut self) {
        if let Some((b, h)) = self.saved.take() {
            self.b = b;
            self.h = h;
        }
    }
}

/// Blocks of a cascade `H = K_RT + K_RC (I − Φ K_CC)⁻¹ Φ K_CT` with two-state loads.
#[derive(Debug, Clone)]
pub struct CascadeBlocks {
    pub k_rt: CMatrix,
    pub k_rc: CMatrix,
    pub k_cc: CMatrix,
    pub k_ct: CMatrix,
    pub r_a: Complex64,
    pub r_b: Complex64,
}

impl CascadeBlocks {
    pub fn n_c(&self) -> usize {
        self.k_cc.nrows()
    }

    fn reflection(&self, bit: bool) -> Complex64 {
        if bit {
            self.r_b
        } else {
            self.r_a
        }
    }
}

struct SmState {
    b: BinaryConfig,
    /// `(I − Φ K_CC)⁻¹`
    inv: CMatrix,
    /// `K_RC · inv`
    x: CMatrix,
    h: CMatrix,
}

/// Sherman-Morrison flip evaluator. Flipping load `i` changes `Φ_ii` by
/// `Δ = ±(r_b − r_a)`, a rank-1 change `−Δ e_i K_CC[i, :]` of the resolvent matrix.
pub struct FastFlipEvaluator<'a> {
    blocks: &'a CascadeBlocks,
    state: SmState,
    saved: Option<SmState>,
    ops: OpCount,
    z: Vec<Complex64>,
}

impl<'a> FastFlipEvaluator<'a> {
    pub fn new(blocks: &'a CascadeBlocks, b0: &BinaryConfig) -> Result<Self> {
        let n = blocks.n_c();
        if b0.len() != n {
            return Err(Error::DimensionMismatch(format!("configuration has {} bits, model has {n} loads", b0.len())));
        }
        let mut ops = OpCount::default();
        let state = Self::factor(blocks, b0.clone(), &mut ops)?;
        Ok(Self { blocks, state, saved: None, ops, z: vec![Complex64::ZERO; n] })
    }

    fn factor(blocks: &CascadeBlocks, b: BinaryConfig, ops: &mut OpCount) -> Result<SmState> {
        let n = blocks.n_c();
        let phi: Vec<Complex64> = b.bits().iter().map(|&bit| blocks.reflection(bit)).collect();
        let a = CMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { Complex64::ONE } else { Complex64::ZERO };
            id - phi[i] * blocks.k_cc[(i, j)]
        });
        let inv = linalg::inverse(&a).ok_or_else(|| Error::SingularResolvent {
            context: "flip evaluator",
            spectral_radius: linalg::spectral_radius(&(linalg::diag(&phi) * &blocks.k_cc)),
        })?;
        ops.refactorizations += 1;
        ops.madds += (n * n * n) as u64;
        let x = &blocks.k_rc * &inv;
        let h = Self::assemble(blocks, &b, &x, ops);
        Ok(SmState { b, inv, x, h })
    }

    fn assemble(blocks: &CascadeBlocks, b: &BinaryConfig, x: &CMatrix, ops: &mut OpCount) -> CMatrix {
        let (n_r, n) = x.shape();
        let n_t = blocks.k_ct.ncols();
        let mut h = blocks.k_rt.clone();
        for i in 0..n {
            let phi = blocks.reflection(b.get(i));
            for r in 0..n_r {
                let xi = x[(r, i)] * phi;
                for t in 0..n_t {
                    h[(r, t)] += xi * blocks.k_ct[(i, t)];
                }
            }
        }
        ops.madds += (n * n_r * (n_t + 1)) as u64;
        h
    }
}

impl FlipEvaluator for FastFlipEvaluator<'_> {
    fn config(&self) -> &BinaryConfig {
        &self.state.b
    }

    fn channel(&self) -> &CMatrix {
        &self.state.h
    }

    fn flip(&mut self, i: usize) -> Result<&CMatrix> {
        let n = self.blocks.n_c();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        if self.saved.is_none() {
            self.saved = Some(SmState {
                b: self.state.b.clone(),
                inv: self.state.inv.clone(),
                x: self.state.x.clone(),
                h: self.state.h.clone(),
            });
        }
        self.ops.flips += 1;
        let old = self.blocks.reflection(self.state.b.get(i));
        self.state.b.flip(i);
        let delta = self.blocks.reflection(self.state.b.get(i)) - old;

        // z = K_CC[i, :] · inv
        let (k, inv) = (&self.blocks.k_cc, &self.state.inv);
        for (c, zc) in self.z.iter_mut().enumerate() {
            let mut acc = Complex64::ZERO;
            for j in 0..n {
                acc += k[(i, j)] * inv[(j, c)];
            }
            *zc = acc;
        }
        self.ops.madds += (n * n) as u64;
        let denom = Complex64::ONE - delta * self.z[i];
        if denom.norm() < SM_DENOM_TOL || !denom.is_finite() {
            let b = self.state.b.clone();
            self.state = Self::factor(self.blocks, b, &mut self.ops)?;
            return Ok(&self.state.h);
        }
        let s = delta / denom;
        let col: Vec<Complex64> = (0..n).map(|r| self.state.inv[(r, i)] * s).collect();
        for c in 0..n {
            let zc = self.z[c];
            for r in 0..n {
                self.state.inv[(r, c)] += col[r] * zc;
            }
        }
        let n_r = self.state.x.nrows();
        for r in 0..n_r {
            let xr = self.state.x[(r, i)] * s;
            for c in 0..n {
                self.state.x[(r, c)] += xr * self.z[c];
            }
        }
        self.ops.rank1_updates += 1;
        self.ops.madds += (n * n + n_r * n) as u64;
        self.state.h = Self::assemble(self.blocks, &self.state.b, &self.state.x, &mut self.ops);
        Ok(&self.state.h)
    }

    fn commit(&mut self) {
        self.saved = None;
    }

    fn rollback(&mut self) {
        if let Some(s) = self.saved.take() {
            self.state = s;
        }
    }

    fn refresh(&mut self) -> Result<()> {
        self.saved = None;
        let b = self.state.b.clone();
        self.state = Self::factor(self.blocks, b, &mut self.ops)?;
        Ok(())
    }

    fn ops(&self) -> OpCount {
        self.ops
    }
}

/// Ground-truth oracle: a cascade `K` and its load bank.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    blocks: CascadeBlocks,
}

impl GroundTruth {
    pub fn new(k: &CascadeModel, bank: &LoadBank) -> Self {
        Self {
            blocks: CascadeBlocks {
                k_rt: k.blk("R", "T"),
                k_rc: k.blk("R", "C"),
                k_cc: k.blk("C", "C"),
                k_ct: k.blk("C", "T"),
                r_a: bank.r_a,
                r_b: bank.r_b,
            },
        }
    }

    pub fn blocks(&self) -> &CascadeBlocks {
        &self.blocks
    }
}

/// Full solve, independent of the incremental evaluator.
fn full_channel(blocks: &CascadeBlocks, b: &BinaryConfig) -> Result<CMatrix> {
    if b.len() != blocks.n_c() {
        return Err(Error::DimensionMismatch(format!(
            "configuration has {} bits, model has {} loads",
            b.len(),
            blocks.n_c()
        )));
    }
    let phi: Vec<Complex64> = b.bits().iter().map(|&bit| blocks.reflection(bit)).collect();
    terminated_response(&blocks.k_rt, &blocks.k_rc, &blocks.k_cc, &blocks.k_ct, &linalg::diag(&phi), "channel")
}

impl ChannelOracle for GroundTruth {
    fn n_c(&self) -> usize {
        self.blocks.n_c()
    }

    fn channel(&self, b: &BinaryConfig) -> Result<CMatrix> {
        full_channel(&self.blocks, b)
    }

    fn flip_evaluator(&self, b0: &BinaryConfig) -> Result<Box<dyn FlipEvaluator + '_>> {
        Ok(Box::new(FastFlipEvaluator::new(&self.blocks, b0)?))
    }
}

/// Fitted-model oracle.
#[derive(Debug, Clone)]
pub struct FittedModel {
    blocks: CascadeBlocks,
}

impl FittedModel {
    pub fn new(p: &ModelParams) -> Self {
        Self {
            blocks: CascadeBlocks {
                k_rt: p.k_rt.clone(),
                k_rc: p.k_rc(),
                k_cc: p.k_cc(),
                k_ct: p.k_ct(),
                r_a: p.r_a,
                r_b: p.r_b,
            },
        }
    }

    pub fn blocks(&self) -> &CascadeBlocks {
        &self.blocks
    }
}

impl ChannelOracle for FittedModel {
    fn n_c(&self) -> usize {
        self.blocks.n_c()
    }

    fn channel(&self, b: &BinaryConfig) -> Result<CMatrix> {
        full_channel(&self.blocks, b)
    }

    fn flip_evaluator(&self, b0: &BinaryConfig) -> Result<Box<dyn FlipEvaluator + '_>> {
        Ok(Box::new(FastFlipEvaluator::new(&self.blocks, b0)?))
    }
}

/// Oracle backed by a closure; evaluated directly on every flip.
pub struct FnOracle<F> {
    n_c: usize,
    f: F,
}

impl<F: Fn(&BinaryConfig) -> Result<CMatrix>> FnOracle<F> {
    pub fn new(n_c: usize, f: F) -> Self {
        Self { n_c, f }
    }
}

impl<F: Fn(&BinaryConfig) -> Result<CMatrix>> ChannelOracle for FnOracle<F> {
    fn n_c(&self) -> usize {
        self.n_c
    }

    fn channel(&self, b: &BinaryConfig) -> Result<CMatrix> {
        (self.f)(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub b_opt: BinaryConfig,
    pub r_opt: f64,
    /// Channel evaluations, counting each flip as one.
    pub evaluations: u64,
    /// RSSI after each accepted move of the run that produced `b_opt`, starting from
    /// its initial configuration.
    pub trajectory: Vec<f64>,
}

fn check_n_c<O: ChannelOracle + ?Sized>(oracle: &O, n_c: usize) -> Result<()> {
    if n_c == 0 {
        return Err(Error::InvalidArgument("no tunable loads".into()));
    }
    if oracle.n_c() != n_c {
        return Err(Error::DimensionMismatch(format!("oracle has {} loads, asked for {n_c}", oracle.n_c())));
    }
    Ok(())
}

/// Coordinate ascent: 10 runs, each from a uniformly random configuration and
/// `10·n_c` single-bit flips at uniformly random positions, keeping a flip only when
/// it strictly increases the RSSI. Returns the best configuration over all runs.
pub fn coordinate_ascent<O: ChannelOracle + ?Sized>(oracle: &O, n_c: usize, seed: u64) -> Result<OptResult> {
    coordinate_ascent_with(oracle, n_c, seed, RESTARTS, ITERS_PER_LOAD * n_c)
}

/// [`coordinate_ascent`] with an explicit number of runs and flips per run.
pub fn coordinate_ascent_with<O: ChannelOracle + ?Sized>(
    oracle: &O,
    n_c: usize,
    seed: u64,
    restarts: usize,
    flips_per_run: usize,
) -> Result<OptResult> {
    check_n_c(oracle, n_c)?;
    if restarts == 0 {
        return Err(Error::InvalidArgument("coordinate ascent needs at least one run".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut evaluations = 0;
    let mut best: Option<(BinaryConfig, f64, Vec<f64>)> = None;
    for _ in 0..restarts {
        let b0 = BinaryConfig::random(n_c, &mut rng);
        let mut ev = oracle.flip_evaluator(&b0)?;
        evaluations += 1;
        let mut r_curr = rssi(ev.channel());
        let mut traj = vec![r_curr];
        for _ in 0..flips_per_run {
            let i = rng.random_range(0..n_c);
            let r_new = rssi(ev.flip(i)?);
            evaluations += 1;
            if r_new > r_curr {
                ev.commit();
                r_curr = r_new;
                traj.push(r_curr);
            } else {
                ev.rollback();
            }
        }
        if best.as_ref().is_none_or(|(_, r, _)| r_curr > *r) {
            best = Some((ev.config().clone(), r_curr, traj));
        }
    }
    let (b_opt, _, trajectory) = best.expect("at least one run");
    let r_opt = rssi(&oracle.channel(&b_opt)?);
    Ok(OptResult { b_opt, r_opt, evaluations, trajectory })
}

/// Evaluates all `2^n_c` configurations in Gray-code order (one flip per step) and
/// returns the first maximum.
pub fn exhaustive_search<O: ChannelOracle + ?Sized>(oracle: &O, n_c: usize) -> Result<OptResult> {
    check_n_c(oracle, n_c)?;
    if n_c > EXHAUSTIVE_MAX_BITS {
        return Err(Error::BudgetExceeded(n_c));
    }
    let mut ev = oracle.flip_evaluator(&BinaryConfig::zeros(n_c))?;
    let mut best_r = rssi(ev.channel());
    let mut b_opt = ev.config().clone();
    let mut trajectory = vec![best_r];
    let total = 1u64 << n_c;
    for k in 1..total {
        let r = rssi(ev.flip(k.trailing_zeros() as usize)?);
        ev.commit();
        if r > best_r {
            best_r = r;
            b_opt = ev.config().clone();
            trajectory.push(r);
        }
        if k % EXHAUSTIVE_REFRESH == 0 {
            ev.refresh()?;
        }
    }
    let r_opt = rssi(&oracle.channel(&b_opt)?);
    Ok(OptResult { b_opt, r_opt, evaluations: total, trajectory })
}
