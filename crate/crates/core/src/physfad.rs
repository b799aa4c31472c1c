//! Coupled-dipole formulation of RIS-parametrized channels.
//!
//! A system of `N` dipoles is described by a symmetric interaction matrix `W` whose
//! diagonal holds inverse polarizabilities and whose off-diagonal entries are the
//! negated background Green's functions. The channel is the `RT` block of `W⁻¹`.
//! Tuning the RIS dipoles subtracts `diag(c)` from the `SS` block of `W`.
//!
//! With `Ω⁰ = W⁻¹(c = 0)` and `Φ = diag(c)` the channel has the reduced form
//!
//! `H(c) = Ω⁰_RT + Ω⁰_RS (I − Φ Ω⁰_SS)⁻¹ Φ Ω⁰_ST`,
//!
//! which is exactly the multiport channel with `S^RE ↦ Ω⁰` and `S^L ↦ Φ`; both are
//! evaluated by [`terminated_response`]. `Φ` enters linearly, so `c = 0` returns `Ω⁰_RT`.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::circuits::{il_reflections, BinaryConfig, LoadBank};
use crate::environment::CascadeModel;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::network::{terminated_response, PortPartition, TOL_STRUCTURAL};

#[derive(Debug, Clone, PartialEq)]
pub struct DipoleSystem {
    w0: CMatrix,
    part: PortPartition,
}

impl DipoleSystem {
    pub fn new(w0: CMatrix, n_t: usize, n_r: usize, n_s: usize) -> Result<Self> {
        if !w0.is_square() || w0.nrows() != n_t + n_r + n_s || n_t == 0 || n_r == 0 {
            return Err(Error::DimensionMismatch(format!(
                "interaction matrix is {}x{}, expected {} dipoles",
                w0.nrows(),
                w0.ncols(),
                n_t + n_r + n_s
            )));
        }
        if linalg::max_abs_diff(&w0, &w0.transpose()) > TOL_STRUCTURAL {
            return Err(Error::InvalidMatrix("interaction matrix must be symmetric".into()));
        }
        let part = PortPartition::contiguous(&[("T", n_t), ("R", n_r), ("S", n_s)])?;
        Ok(Self { w0, part })
    }

    /// Random system: inverse polarizabilities `α⁻¹ ~ 2 + CN(0, 0.25)` on the diagonal and
    /// couplings `−G ~ CN(0, coupling²)` off it.
    pub fn random(n_t: usize, n_r: usize, n_s: usize, coupling: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = n_t + n_r + n_s;
        let mut w0 = CMatrix::zeros(n, n);
        for i in 0..n {
            w0[(i, i)] = Complex64::new(2.0, 0.0) + gaussian(&mut rng) * 0.5;
            for j in 0..i {
                let g = gaussian(&mut rng) * coupling;
                w0[(i, j)] = g;
                w0[(j, i)] = g;
            }
        }
        Self::new(w0, n_t, n_r, n_s)
    }

    pub fn w0(&self) -> &CMatrix {
        &self.w0
    }

    pub fn part(&self) -> &PortPartition {
        &self.part
    }

    pub fn n_s(&self) -> usize {
        self.part.get("S").map_or(0, <[usize]>::len)
    }

    /// `W(c)`: `w0` with `diag(c)` subtracted on the RIS block.
    pub fn interaction_matrix(&self, c: &DipoleConfig) -> Result<CMatrix> {
        let s = self.part.require("S")?;
        if c.0.len() != s.len() {
            return Err(Error::DimensionMismatch(format!(
                "configuration has {} entries, system has {} RIS dipoles",
                c.0.len(),
                s.len()
            )));
        }
        let mut w = self.w0.clone();
        for (&p, &ci) in s.iter().zip(&c.0) {
            w[(p, p)] -= ci;
        }
        Ok(w)
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        * std::f64::consts::FRAC_1_SQRT_2
}

/// Offsets of the RIS dipoles' inverse polarizabilities from their reference values.
#[derive(Debug, Clone, PartialEq)]
pub struct DipoleConfig(pub Vec<Complex64>);

impl DipoleConfig {
    pub fn zeros(n: usize) -> Self {
        Self(vec![Complex64::ZERO; n])
    }
}

/// `H(c) = [W(c)⁻¹]_RT` by a dense solve.
pub fn channel_direct(sys: &DipoleSystem, c: &DipoleConfig) -> Result<CMatrix> {
    let w = sys.interaction_matrix(c)?;
    let (t, r) = (sys.part.require("T")?, sys.part.require("R")?);
    // columns T of W⁻¹
    let rhs = CMatrix::from_fn(w.nrows(), t.len(), |i, j| if i == t[j] { Complex64::ONE } else { Complex64::ZERO });
    let cols = linalg::solve(&w, &rhs).ok_or(Error::Singular("channel_direct: W(c) is resonant"))?;
    let all: Vec<usize> = (0..t.len()).collect();
    Ok(linalg::select(&cols, r, &all))
}

/// `Ω⁰ = W⁻¹(c = 0)` with the partition of its dipoles.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDipoleModel {
    omega0: CMatrix,
    part: PortPartition,
}

impl ReducedDipoleModel {
    pub fn from_system(sys: &DipoleSystem) -> Result<Self> {
        let omega0 = linalg::inverse(&sys.w0).ok_or(Error::Singular("W(0)"))?;
        Ok(Self { omega0, part: sys.part.clone() })
    }

    /// Wraps an arbitrary `Ω⁰` over sets `T`, `R`, `S`.
    pub fn from_parts(omega0: CMatrix, part: PortPartition) -> Result<Self> {
        part.require("T")?;
        part.require("R")?;
        part.require("S")?;
        if omega0.shape() != (part.n(), part.n()) {
            return Err(Error::DimensionMismatch("Ω⁰ does not match its partition".into()));
        }
        Ok(Self { omega0, part })
    }

    pub fn omega0(&self) -> &CMatrix {
        &self.omega0
    }

    pub fn part(&self) -> &PortPartition {
        &self.part
    }

    pub fn blk(&self, rows: &str, cols: &str) -> Result<CMatrix> {
        Ok(linalg::select(&self.omega0, self.part.require(rows)?, self.part.require(cols)?))
    }
}

/// Reduced closed-form channel; never inverts `Φ`.
pub fn channel_reduced(red: &ReducedDipoleModel, c: &DipoleConfig) -> Result<CMatrix> {
    let phi = linalg::diag(&c.0);
    terminated_response(
        &red.blk("R", "T")?,
        &red.blk("R", "S")?,
        &red.blk("S", "S")?,
        &red.blk("S", "T")?,
        &phi,
        "channel_reduced",
    )
}

/// Reads `S^K` as `Ω⁰` of a dipole system whose tunable dipoles are the `N_C` load
/// ports; setting `Φ` to the load reflections reproduces the diagonal-route channel.
pub fn bdris_dipole_model(k: &CascadeModel) -> Result<ReducedDipoleModel> {
    let part = PortPartition::new(
        k.s_k().n(),
        vec![
            ("T", k.ports("T").to_vec()),
            ("R", k.ports("R").to_vec()),
            ("S", k.ports("C").to_vec()),
        ],
    )?;
    ReducedDipoleModel::from_parts(k.s_k().data().clone(), part)
}

/// Dipole configuration equivalent to the load state `b`.
pub fn config_for_loads(b: &BinaryConfig, bank: &LoadBank) -> DipoleConfig {
    DipoleConfig(il_reflections(b, bank))
}
