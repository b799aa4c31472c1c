//! Radio environment, the static cascade `K` and the two channel-evaluation routes.
//!
//! The conventional route terminates the RIS ports of `S^RE` with the full
//! (non-diagonal) load network `S^L`. The diagonal route first folds the static load
//! circuit into the environment (a Redheffer star product giving `S^K`) and then
//! terminates only the tunable-load ports with the diagonal `S^IL`. Both routes give
//! the same channel.

mod matrix_file;
mod touchstone;

pub use matrix_file::{read_matrix_file, write_matrix_file, parse_matrix, format_matrix};
pub use touchstone::{parse_touchstone, read_touchstone, Touchstone, TouchstoneFormat};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::circuits::{il_matrix, BinaryConfig, LoadBank, StaticLoadCircuit};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::network::{redheffer_star, terminated_response, validate, PortPartition, SMatrix, TOL_STRUCTURAL};

/// Radio environment `S^RE` with ports ordered transmitters, receivers, RIS elements.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioEnvironment {
    s_re: SMatrix,
    part: PortPartition,
}

impl RadioEnvironment {
    /// Checks reciprocity and strict sub-unitarity.
    pub fn new(s_re: SMatrix, n_t: usize, n_r: usize, n_s: usize) -> Result<Self> {
        if n_t == 0 || n_r == 0 || n_s == 0 {
            return Err(Error::InvalidArgument("environment needs N_T, N_R, N_S >= 1".into()));
        }
        if s_re.n() != n_t + n_r + n_s {
            return Err(Error::DimensionMismatch(format!(
                "S^RE has {} ports, expected N_T + N_R + N_S = {}",
                s_re.n(),
                n_t + n_r + n_s
            )));
        }
        let rep = validate(&s_re);
        if !rep.is_reciprocal(TOL_STRUCTURAL) {
            return Err(Error::InvalidMatrix(format!(
                "S^RE is not reciprocal (max |S - S^T| = {:.3e})",
                rep.reciprocity_err
            )));
        }
        if rep.passivity_margin <= 0.0 {
            return Err(Error::InvalidMatrix(format!(
                "S^RE is not strictly sub-unitary (sigma_max = {:.6})",
                1.0 - rep.passivity_margin
            )));
        }
        let part = PortPartition::contiguous(&[("T", n_t), ("R", n_r), ("S", n_s)])?;
        Ok(Self { s_re, part })
    }

    /// Like [`RadioEnvironment::new`] but replaces the matrix by its symmetric part first,
    /// for measured data whose reciprocity only holds up to measurement noise.
    pub fn from_measured(s_re: SMatrix, n_t: usize, n_r: usize, n_s: usize) -> Result<Self> {
        let d = s_re.data();
        let sym = (d + d.transpose()) * Complex64::from(0.5);
        Self::new(SMatrix::new(sym, s_re.z0())?, n_t, n_r, n_s)
    }

    pub fn s_re(&self) -> &SMatrix {
        &self.s_re
    }

    pub fn part(&self) -> &PortPartition {
        &self.part
    }

    pub fn n_t(&self) -> usize {
        self.ports("T").len()
    }

    pub fn n_r(&self) -> usize {
        self.ports("R").len()
    }

    pub fn n_s(&self) -> usize {
        self.ports("S").len()
    }

    fn ports(&self, name: &str) -> &[usize] {
        self.part.get(name).expect("environment partition has T, R, S")
    }
}

/// Symmetrized complex Gaussian matrix scaled to the given largest singular value.
pub fn random_reciprocal<R: Rng + ?Sized>(rng: &mut R, n: usize, sigma_max: f64) -> SMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * scale
    });
    let mut sym = (&g + g.transpose()) * Complex64::from(0.5);
    // exact symmetry after scaling
    for i in 0..n {
        for j in 0..i {
            sym[(i, j)] = sym[(j, i)];
        }
    }
    let factor = sigma_max / linalg::sigma_max(&sym);
    SMatrix::from_data(sym * Complex64::from(factor)).expect("finite gaussian draw")
}

/// Synthetic reciprocal environment with `σ_max(S^RE) = 1 − loss_factor`.
pub fn synth_re(n_t: usize, n_r: usize, n_s: usize, loss_factor: f64, seed: u64) -> Result<RadioEnvironment> {
    if !(loss_factor > 0.0 && loss_factor < 1.0) {
        return Err(Error::InvalidArgument(format!("loss_factor {loss_factor} must lie in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = random_reciprocal(&mut rng, n_t + n_r + n_s, 1.0 - loss_factor);
    RadioEnvironment::new(s, n_t, n_r, n_s)
}

/// Cascade `K` of environment and static load circuit, ports ordered `T`, `R`, `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    s_k: SMatrix,
    part: PortPartition,
}

impl CascadeModel {
    pub fn new(s_k: SMatrix, n_t: usize, n_r: usize, n_c: usize) -> Result<Self> {
        if s_k.n() != n_t + n_r + n_c {
            return Err(Error::DimensionMismatch(format!(
                "S^K has {} ports, expected {}",
                s_k.n(),
                n_t + n_r + n_c
            )));
        }
        let part = PortPartition::contiguous(&[("T", n_t), ("R", n_r), ("C", n_c)])?;
        Ok(Self { s_k, part })
    }

    pub fn s_k(&self) -> &SMatrix {
        &self.s_k
    }

    pub fn part(&self) -> &PortPartition {
        &self.part
    }

    pub fn n_t(&self) -> usize {
        self.ports("T").len()
    }

    pub fn n_r(&self) -> usize {
        self.ports("R").len()
    }

    pub fn n_c(&self) -> usize {
        self.ports("C").len()
    }

    pub fn n_a(&self) -> usize {
        self.n_t() + self.n_r()
    }

    pub fn ports(&self, name: &str) -> &[usize] {
        self.part.get(name).expect("cascade partition has T, R, C")
    }

    /// `S^K_{rows, cols}` for named port sets.
    pub fn blk(&self, rows: &str, cols: &str) -> CMatrix {
        linalg::select(self.s_k.data(), self.ports(rows), self.ports(cols))
    }

    /// Channel for a configuration of the given load bank.
    pub fn channel(&self, bank: &LoadBank, b: &BinaryConfig) -> Result<CMatrix> {
        channel_diagonal(self, &il_matrix(b, bank)?)
    }
}

/// Folds the static load circuit into the environment. Port `i` of the environment's
/// RIS set connects to element port `i` of the circuit.
pub fn build_k(env: &RadioEnvironment, slc: &StaticLoadCircuit) -> Result<CascadeModel> {
    if env.n_s() != slc.n_s() {
        return Err(Error::DimensionMismatch(format!(
            "environment has {} RIS ports, load circuit has {}",
            env.n_s(),
            slc.n_s()
        )));
    }
    let a = env.part().union(&["T", "R"])?;
    let s_k = redheffer_star(
        env.s_re(),
        &a,
        env.ports("S"),
        slc.s(),
        slc.element_ports(),
        slc.load_ports(),
    )?;
    CascadeModel::new(s_k, env.n_t(), env.n_r(), slc.n_c())
}

/// `H = S_RT + S_RS (I − S^L S_SS)⁻¹ S^L S_ST` on the environment.
pub fn channel_conventional(env: &RadioEnvironment, s_l: &SMatrix) -> Result<CMatrix> {
    let d = env.s_re().data();
    let (t, r, s) = (env.ports("T"), env.ports("R"), env.ports("S"));
    terminated_response(
        &linalg::select(d, r, t),
        &linalg::select(d, r, s),
        &linalg::select(d, s, s),
        &linalg::select(d, s, t),
        s_l.data(),
        "channel_conventional",
    )
}

/// `H = K_RT + K_RC (I − S^IL K_CC)⁻¹ S^IL K_CT` on the cascade.
pub fn channel_diagonal(k: &CascadeModel, s_il: &SMatrix) -> Result<CMatrix> {
    terminated_response(
        &k.blk("R", "T"),
        &k.blk("R", "C"),
        &k.blk("C", "C"),
        &k.blk("C", "T"),
        s_il.data(),
        "channel_diagonal",
    )
}

/// Ground-truth channel for configuration `b`: builds `K` and evaluates the diagonal
/// route. Use [`CascadeModel::channel`] when evaluating many configurations.
pub fn end_to_end(
    env: &RadioEnvironment,
    slc: &StaticLoadCircuit,
    bank: &LoadBank,
    b: &BinaryConfig,
) -> Result<CMatrix> {
    if b.len() != slc.n_c() {
        return Err(Error::DimensionMismatch(format!(
            "configuration has {} bits, circuit has {} loads",
            b.len(),
            slc.n_c()
        )));
    }
    build_k(env, slc)?.channel(bank, b)
}
