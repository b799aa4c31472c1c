use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuits::{BinaryConfig, LoadBank};
use crate::environment::CascadeModel;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::network::terminated_response;

/// Number of real unknowns for `n_a` antennas and `n_c` tunable loads in the
/// single-link case: `4 + (n_a + n_c)(n_a + n_c + 1) − 4`.
pub fn param_count(n_a: usize, n_c: usize) -> Result<usize> {
    if n_c == 0 {
        return Err(Error::InvalidArgument("no tunable loads".into()));
    }
    if n_a == 0 {
        return Err(Error::InvalidArgument("no antenna ports".into()));
    }
    let n_k = n_a + n_c;
    Ok(4 + (n_k * (n_k + 1) - 4))
}

/// Estimable parameters of the diagonal representation: the `RT`, `AC` and `CC` blocks of
/// `S^K` and the two load reflections. `k_cc` is stored as its row-major upper triangle.
///
/// The real parameter vector (see [`ModelParams::to_vec`]) lists `k_rt` (row-major),
/// `k_ac` (row-major, rows `T` then `R`), the `k_cc` triangle, `r_a` and `r_b`, each
/// complex number as `(re, im)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    n_t: usize,
    n_r: usize,
    n_c: usize,
    pub k_rt: CMatrix,
    pub k_ac: CMatrix,
    k_cc_upper: Vec<Complex64>,
    pub r_a: Complex64,
    pub r_b: Complex64,
}

fn tri_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Row-major position of `(i, j)`, `i <= j`, in an upper triangle of size `n`.
pub(crate) fn tri_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * n - i * (i + 1) / 2 + j
}

impl ModelParams {
    pub fn zeros(n_t: usize, n_r: usize, n_c: usize) -> Self {
        Self {
            n_t,
            n_r,
            n_c,
            k_rt: CMatrix::zeros(n_r, n_t),
            k_ac: CMatrix::zeros(n_t + n_r, n_c),
            k_cc_upper: vec![Complex64::ZERO; tri_len(n_c)],
            r_a: Complex64::ZERO,
            r_b: Complex64::ZERO,
        }
    }

    /// Symmetrizes `k_cc` from its upper triangle.
    pub fn new(
        k_rt: CMatrix,
        k_ac: CMatrix,
        k_cc: &CMatrix,
        r_a: Complex64,
        r_b: Complex64,
    ) -> Result<Self> {
        let (n_r, n_t) = k_rt.shape();
        let n_c = k_cc.nrows();
        if n_t == 0 || n_r == 0 || n_c == 0 || !k_cc.is_square() || k_ac.shape() != (n_t + n_r, n_c) {
            return Err(Error::DimensionMismatch(format!(
                "inconsistent blocks: RT {n_r}x{n_t}, AC {}x{}, CC {}x{}",
                k_ac.nrows(),
                k_ac.ncols(),
                k_cc.nrows(),
                k_cc.ncols()
            )));
        }
        let mut p = Self::zeros(n_t, n_r, n_c);
        p.k_rt = k_rt;
        p.k_ac = k_ac;
        for i in 0..n_c {
            for j in i..n_c {
                p.k_cc_upper[tri_index(n_c, i, j)] = k_cc[(i, j)];
            }
        }
        p.r_a = r_a;
        p.r_b = r_b;
        Ok(p)
    }

    /// Ground-truth parameters of a cascade and load bank.
    pub fn from_cascade(k: &CascadeModel, bank: &LoadBank) -> Self {
        let a = k.part().union(&["T", "R"]).expect("cascade has T and R");
        let k_ac = linalg::select(k.s_k().data(), &a, k.ports("C"));
        Self::new(k.blk("R", "T"), k_ac, &k.blk("C", "C"), bank.r_a, bank.r_b).expect("consistent cascade")
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn n_a(&self) -> usize {
        self.n_t + self.n_r
    }

    pub fn k_cc_upper(&self) -> &[Complex64] {
        &self.k_cc_upper
    }

    pub fn k_cc(&self) -> CMatrix {
        let n = self.n_c;
        CMatrix::from_fn(n, n, |i, j| self.k_cc_upper[tri_index(n, i.min(j), i.max(j))])
    }

    /// `K_CT`, i.e. the transposed `T` rows of `k_ac`.
    pub fn k_ct(&self) -> CMatrix {
        self.k_ac.rows(0, self.n_t).transpose()
    }

    pub fn k_rc(&self) -> CMatrix {
        self.k_ac.rows(self.n_t, self.n_r).into_owned()
    }

    /// Number of complex unknowns.
    pub fn complex_len(&self) -> usize {
        self.n_r * self.n_t + self.k_ac.len() + self.k_cc_upper.len() + 2
    }

    /// Number of real degrees of freedom.
    pub fn dof(&self) -> usize {
        2 * self.complex_len()
    }

    pub fn to_complex_vec(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.complex_len());
        for i in 0..self.n_r {
            for j in 0..self.n_t {
                out.push(self.k_rt[(i, j)]);
            }
        }
        for i in 0..self.n_a() {
            for j in 0..self.n_c {
                out.push(self.k_ac[(i, j)]);
            }
        }
        out.extend_from_slice(&self.k_cc_upper);
        out.push(self.r_a);
        out.push(self.r_b);
        out
    }

    pub fn set_from_complex(&mut self, v: &[Complex64]) {
        assert_eq!(v.len(), self.complex_len(), "parameter vector length");
        let mut it = v.iter().copied();
        for i in 0..self.n_r {
            for j in 0..self.n_t {
                self.k_rt[(i, j)] = it.next().unwrap();
            }
        }
        for i in 0..self.n_a() {
            for j in 0..self.n_c {
                self.k_ac[(i, j)] = it.next().unwrap();
            }
        }
        for slot in &mut self.k_cc_upper {
            *slot = it.next().unwrap();
        }
        self.r_a = it.next().unwrap();
        self.r_b = it.next().unwrap();
    }

    /// Real parameter vector, `(re, im)` interleaved.
    pub fn to_vec(&self) -> Vec<f64> {
        self.to_complex_vec().iter().flat_map(|c| [c.re, c.im]).collect()
    }

    pub fn set_from_vec(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dof(), "parameter vector length");
        let v: Vec<Complex64> = x.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
        self.set_from_complex(&v);
    }

    /// Largest absolute difference over all complex parameters.
    pub fn max_entry_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.complex_len(), other.complex_len());
        self.to_complex_vec()
            .iter()
            .zip(other.to_complex_vec())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn reflections(&self, b: &BinaryConfig) -> Vec<Complex64> {
        b.bits().iter().map(|&bit| if bit { self.r_b } else { self.r_a }).collect()
    }

    /// Channel of configuration `b`:
    /// `k_rt + K_RC (I − Φ K_CC)⁻¹ Φ K_CT` with `Φ = diag(r_a + (r_b − r_a) b)`.
    pub fn predict(&self, b: &BinaryConfig) -> Result<CMatrix> {
        if b.len() != self.n_c {
            return Err(Error::DimensionMismatch(format!(
                "configuration has {} bits, model has {} loads",
                b.len(),
                self.n_c
            )));
        }
        terminated_response(
            &self.k_rt,
            &self.k_rc(),
            &self.k_cc(),
            &self.k_ct(),
            &linalg::diag(&self.reflections(b)),
            "predict",
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ParamsFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<ParamsFile>(text)?.try_into()
    }
}

/// On-disk form of [`ModelParams`]. Complex numbers are `[re, im]` pairs; matrices are
/// row-major lists of rows.
#[derive(Serialize, Deserialize)]
struct ParamsFile {
    format: String,
    n_t: usize,
    n_r: usize,
    n_c: usize,
    k_rt: Vec<Vec<[f64; 2]>>,
    k_ac: Vec<Vec<[f64; 2]>>,
    k_cc_upper: Vec<[f64; 2]>,
    r_a: [f64; 2],
    r_b: [f64; 2],
}

const PARAMS_FORMAT: &str = "bdris-params-v1";

fn pair(c: Complex64) -> [f64; 2] {
    [c.re, c.im]
}

fn rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| pair(m[(i, j)])).collect()).collect()
}

fn from_rows(rows: &[Vec<[f64; 2]>], n_rows: usize, n_cols: usize, what: &str) -> Result<CMatrix> {
    if rows.len() != n_rows || rows.iter().any(|r| r.len() != n_cols) {
        return Err(Error::DimensionMismatch(format!("{what} must be {n_rows}x{n_cols}")));
    }
    Ok(CMatrix::from_fn(n_rows, n_cols, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

impl From<&ModelParams> for ParamsFile {
    fn from(p: &ModelParams) -> Self {
        Self {
            format: PARAMS_FORMAT.to_string(),
            n_t: p.n_t,
            n_r: p.n_r,
            n_c: p.n_c,
            k_rt: rows(&p.k_rt),
            k_ac: rows(&p.k_ac),
            k_cc_upper: p.k_cc_upper.iter().copied().map(pair).collect(),
            r_a: pair(p.r_a),
            r_b: pair(p.r_b),
        }
    }
}

impl TryFrom<ParamsFile> for ModelParams {
    type Error = Error;

    fn try_from(f: ParamsFile) -> Result<Self> {
        if f.format != PARAMS_FORMAT {
            return Err(Error::InvalidArgument(format!("unknown parameter format `{}`", f.format)));
        }
        if f.k_cc_upper.len() != tri_len(f.n_c) {
            return Err(Error::DimensionMismatch(format!(
                "k_cc_upper must hold {} entries",
                tri_len(f.n_c)
            )));
        }
        let mut p = ModelParams::zeros(f.n_t, f.n_r, f.n_c);
        p.k_rt = from_rows(&f.k_rt, f.n_r, f.n_t, "k_rt")?;
        p.k_ac = from_rows(&f.k_ac, f.n_t + f.n_r, f.n_c, "k_ac")?;
        p.k_cc_upper = f.k_cc_upper.iter().map(|c| Complex64::new(c[0], c[1])).collect();
        p.r_a = Complex64::new(f.r_a[0], f.r_a[1]);
        p.r_b = Complex64::new(f.r_b[0], f.r_b[1]);
        Ok(p)
    }
}
