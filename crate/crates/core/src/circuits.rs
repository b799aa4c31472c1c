//! Static load circuits, two-state tunable load banks and the diagonal load matrix.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix};
use crate::network::{PortPartition, SMatrix, Z0_DEFAULT};

/// Scattering matrix of the ideal T network with its three impedances replaced by
/// auxiliary ports. Ports 0/1 face the RIS elements; ports 2, 3, 4 replace Z₁, Z₂, Z₃.
const T_NETWORK: [[f64; 5]; 5] = [
    [0.25, 0.25, -0.75, -0.25, 0.5],
    [0.25, 0.25, 0.25, 0.75, 0.5],
    [-0.75, 0.25, 0.25, -0.25, 0.5],
    [-0.25, 0.75, -0.25, 0.25, -0.5],
    [0.5, 0.5, 0.5, -0.5, 0.0],
];

/// Ideal π network with auxiliary ports. Port 2 replaces the series branch Y₃ between
/// the two outer ports, port 3 the shunt Y₁ at port 0, port 4 the shunt Y₂ at port 1.
const PI_NETWORK: [[f64; 5]; 5] = [
    [-0.25, 0.25, -0.5, 0.75, 0.25],
    [0.25, -0.25, 0.5, 0.25, 0.75],
    [-0.5, 0.5, 0.0, -0.5, 0.5],
    [0.75, 0.25, -0.5, -0.25, 0.25],
    [0.25, 0.75, 0.5, 0.25, -0.25],
];

/// Static (non-tunable) part of a load circuit: an `(N_S + N_C)`-port network whose
/// first `N_S` ports face the RIS elements and whose last `N_C` ports face the
/// individual tunable loads.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticLoadCircuit {
    s: SMatrix,
    part: PortPartition,
}

impl StaticLoadCircuit {
    pub fn new(s: SMatrix, n_s: usize, n_c: usize) -> Result<Self> {
        if n_s == 0 || n_c == 0 || s.n() != n_s + n_c {
            return Err(Error::DimensionMismatch(format!(
                "{}-port circuit cannot split into {n_s} element ports and {n_c} load ports",
                s.n()
            )));
        }
        let part = PortPartition::contiguous(&[("Sbar", n_s), ("C", n_c)])?;
        Ok(Self { s, part })
    }

    pub fn s(&self) -> &SMatrix {
        &self.s
    }

    pub fn part(&self) -> &PortPartition {
        &self.part
    }

    pub fn n_s(&self) -> usize {
        self.part.get("Sbar").map_or(0, <[usize]>::len)
    }

    pub fn n_c(&self) -> usize {
        self.part.get("C").map_or(0, <[usize]>::len)
    }

    pub fn element_ports(&self) -> &[usize] {
        self.part.get("Sbar").unwrap_or(&[])
    }

    pub fn load_ports(&self) -> &[usize] {
        self.part.get("C").unwrap_or(&[])
    }

    /// Terminates the tunable ports with `s_il`, giving the load network `S^L` seen by the
    /// RIS elements.
    pub fn load_with(&self, s_il: &SMatrix) -> Result<SMatrix> {
        crate::network::cascade_load(&self.s, self.element_ports(), self.load_ports(), s_il)
    }
}

fn from_table(table: &[[f64; 5]; 5]) -> StaticLoadCircuit {
    let data = CMatrix::from_fn(5, 5, |i, j| c64(table[i][j], 0.0));
    StaticLoadCircuit::new(SMatrix::new(data, Z0_DEFAULT).expect("finite table"), 2, 3).expect("5 = 2 + 3")
}

/// Ideal two-port T network with auxiliary load ports (5 ports).
pub fn t_network() -> StaticLoadCircuit {
    from_table(&T_NETWORK)
}

/// Ideal two-port π network with auxiliary load ports (5 ports).
pub fn pi_network() -> StaticLoadCircuit {
    from_table(&PI_NETWORK)
}

/// Trivial load circuit of a diagonal RIS: element port `i` is wired straight to load
/// port `n_s + i`.
pub fn dris_slc(n_s: usize) -> Result<StaticLoadCircuit> {
    if n_s == 0 {
        return Err(Error::InvalidArgument("dris_slc needs n_s >= 1".into()));
    }
    let mut data = CMatrix::zeros(2 * n_s, 2 * n_s);
    for i in 0..n_s {
        data[(i, n_s + i)] = Complex64::ONE;
        data[(n_s + i, i)] = Complex64::ONE;
    }
    StaticLoadCircuit::new(SMatrix::from_data(data)?, n_s, n_s)
}

/// Block-diagonal assembly of independent groups. All element ports come first, in list
/// order, followed by all load ports.
pub fn group_connected(groups: &[StaticLoadCircuit]) -> Result<StaticLoadCircuit> {
    let first = groups
        .first()
        .ok_or_else(|| Error::InvalidArgument("group_connected needs at least one group".into()))?;
    let z0 = first.s.z0();
    let n_s: usize = groups.iter().map(StaticLoadCircuit::n_s).sum();
    let n_c: usize = groups.iter().map(StaticLoadCircuit::n_c).sum();
    let mut global = Vec::with_capacity(groups.len());
    let (mut s_off, mut c_off) = (0, n_s);
    for g in groups {
        if g.s.z0() != z0 {
            return Err(Error::InvalidArgument("groups use different reference impedances".into()));
        }
        // local port -> global port
        let mut map = vec![0; g.s.n()];
        for (k, &p) in g.element_ports().iter().enumerate() {
            map[p] = s_off + k;
        }
        for (k, &p) in g.load_ports().iter().enumerate() {
            map[p] = c_off + k;
        }
        s_off += g.n_s();
        c_off += g.n_c();
        global.push(map);
    }
    let mut data = CMatrix::zeros(n_s + n_c, n_s + n_c);
    for (g, map) in groups.iter().zip(&global) {
        let d = g.s.data();
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                data[(map[i], map[j])] = d[(i, j)];
            }
        }
    }
    StaticLoadCircuit::new(SMatrix::new(data, z0)?, n_s, n_c)
}

/// `(z − z0) / (z + z0)`.
pub fn reflection_from_impedance(z_load: Complex64, z0: f64) -> Result<Complex64> {
    let den = z_load + z0;
    if den.norm() <= f64::EPSILON * z0.max(z_load.norm()) {
        return Err(Error::ReflectionPole(z_load));
    }
    Ok((z_load - z0) / den)
}

/// Two-state individual tunable load: reflection `r_a` for bit 0, `r_b` for bit 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadBank {
    pub r_a: Complex64,
    pub r_b: Complex64,
}

impl LoadBank {
    pub fn new(r_a: Complex64, r_b: Complex64) -> Result<Self> {
        for r in [r_a, r_b] {
            if !(r.norm() <= 1.0 + 1e-12) {
                return Err(Error::InvalidArgument(format!("reflection {r} is not passive")));
            }
        }
        Ok(Self { r_a, r_b })
    }

    pub fn from_impedances(z_a: Complex64, z_b: Complex64, z0: f64) -> Result<Self> {
        Self::new(reflection_from_impedance(z_a, z0)?, reflection_from_impedance(z_b, z0)?)
    }

    /// PIN diode at 800 MHz: 5.2 Ω when on (bit 0), a 25 fF capacitance when off (bit 1).
    pub fn pin_diode() -> Self {
        let z_off = Complex64::new(0.0, -1.0) / (2.0 * std::f64::consts::PI * 800e6 * 25e-15);
        Self::from_impedances(c64(5.2, 0.0), z_off, Z0_DEFAULT).expect("passive diode states")
    }

    pub fn reflection(&self, bit: bool) -> Complex64 {
        if bit {
            self.r_b
        } else {
            self.r_a
        }
    }
}

/// Binary configuration of the tunable loads.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryConfig(Vec<bool>);

impl BinaryConfig {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![true; n])
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self((0..n).map(|_| rng.random::<bool>()).collect())
    }

    /// Bit `i` is `(index >> i) & 1`.
    pub fn from_index(index: u64, n: usize) -> Self {
        Self((0..n).map(|i| (index >> i) & 1 == 1).collect())
    }

    pub fn from_u8(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidArgument(format!("bit value {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.flip(i);
        out
    }

    pub fn as_u8(&self) -> Vec<u8> {
        self.0.iter().map(|&b| u8::from(b)).collect()
    }
}

impl std::fmt::Display for BinaryConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Diagonal reflections `r_a + (r_b − r_a) b_i`, evaluated by selecting the state so
/// that each entry is bit-identical to `r_a` or `r_b`.
pub fn il_reflections(b: &BinaryConfig, bank: &LoadBank) -> Vec<Complex64> {
    b.bits().iter().map(|&bit| bank.reflection(bit)).collect()
}

/// Scattering matrix of the individual loads, always diagonal.
pub fn il_matrix(b: &BinaryConfig, bank: &LoadBank) -> Result<SMatrix> {
    if b.is_empty() {
        return Err(Error::InvalidArgument("empty configuration".into()));
    }
    SMatrix::from_data(linalg::diag(&il_reflections(b, bank)))
}
