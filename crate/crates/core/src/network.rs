//! Single-frequency scattering-parameter algebra.
//!
//! Port indices are zero-based throughout. Every loaded-network formula is evaluated
//! in the resolvent form `M_PP + M_PQ (I − L M_QQ)⁻¹ L M_QP`, which never inverts the
//! load `L` and therefore accepts matched (`r = 0`) terminations.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Default reference impedance in ohms.
pub const Z0_DEFAULT: f64 = 50.0;

/// Tolerance for structural checks (symmetry, unitarity of ideal circuits).
pub const TOL_STRUCTURAL: f64 = 1e-12;
/// Tolerance for composed quantities (cascades, route equivalence).
pub const TOL_COMPOSED: f64 = 1e-10;
/// Tolerance for passivity of composed networks.
pub const TOL_PASSIVITY: f64 = 1e-9;

/// Square complex scattering matrix with its reference impedance.
#[derive(Debug, Clone, PartialEq)]
pub struct SMatrix {
    data: CMatrix,
    z0: f64,
}

impl SMatrix {
    pub fn new(data: CMatrix, z0: f64) -> Result<Self> {
        if !data.is_square() || data.nrows() == 0 {
            return Err(Error::InvalidMatrix(format!(
                "scattering matrix must be square with n >= 1, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if !linalg::is_finite(&data) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        if !(z0.is_finite() && z0 > 0.0) {
            return Err(Error::InvalidMatrix(format!("reference impedance {z0} must be positive")));
        }
        Ok(Self { data, z0 })
    }

    /// Scattering matrix referenced to 50 Ω.
    pub fn from_data(data: CMatrix) -> Result<Self> {
        Self::new(data, Z0_DEFAULT)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_data(self) -> CMatrix {
        self.data
    }

    pub fn block(&self, rows: &[usize], cols: &[usize]) -> Result<CMatrix> {
        block(self, rows, cols)
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

/// Named, ordered, pairwise-disjoint port index sets covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortPartition {
    n: usize,
    sets: Vec<(String, Vec<usize>)>,
}

impl PortPartition {
    pub fn new<S: Into<String>>(n: usize, sets: Vec<(S, Vec<usize>)>) -> Result<Self> {
        let sets: Vec<(String, Vec<usize>)> = sets.into_iter().map(|(k, v)| (k.into(), v)).collect();
        let mut seen = vec![false; n];
        for (name, idx) in &sets {
            if sets.iter().filter(|(other, _)| other == name).count() > 1 {
                return Err(Error::InvalidPartition(format!("duplicate set name `{name}`")));
            }
            for &i in idx {
                if i >= n {
                    return Err(Error::IndexOutOfRange { index: i, n });
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidPartition(format!("port {i} appears twice")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("port {missing} is not covered")));
        }
        Ok(Self { n, sets })
    }

    /// Builds a partition of consecutive blocks, e.g. `[("T", 1), ("R", 1), ("S", 6)]`.
    pub fn contiguous(sizes: &[(&str, usize)]) -> Result<Self> {
        let mut start = 0;
        let mut sets = Vec::with_capacity(sizes.len());
        for &(name, len) in sizes {
            sets.push((name.to_string(), (start..start + len).collect::<Vec<_>>()));
            start += len;
        }
        Self::new(start, sets)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, name: &str) -> Option<&[usize]> {
        self.sets
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[usize]> {
        self.get(name)
            .ok_or_else(|| Error::InvalidPartition(format!("missing port set `{name}`")))
    }

    /// Concatenation of the named sets, in argument order.
    pub fn union(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for name in names {
            out.extend_from_slice(self.require(name)?);
        }
        Ok(out)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sets.iter().map(|(k, _)| k.as_str())
    }
}

/// Impedance matrix in ohms.
#[derive(Debug, Clone, PartialEq)]
pub struct ZMatrix {
    pub data: CMatrix,
}

impl ZMatrix {
    pub fn new(data: CMatrix) -> Result<Self> {
        if !data.is_square() || data.nrows() == 0 || !linalg::is_finite(&data) {
            return Err(Error::InvalidMatrix("impedance matrix must be square and finite".into()));
        }
        Ok(Self { data })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    /// `max |S − Sᵀ|`
    pub reciprocity_err: f64,
    /// `1 − σ_max(S)`; zero for lossless, negative for active networks.
    pub passivity_margin: f64,
}

impl ValidationReport {
    pub fn is_reciprocal(&self, tol: f64) -> bool {
        self.reciprocity_err <= tol
    }

    pub fn is_passive(&self, tol: f64) -> bool {
        self.passivity_margin >= -tol
    }
}

pub fn validate(s: &SMatrix) -> ValidationReport {
    let d = s.data();
    ValidationReport {
        reciprocity_err: linalg::max_abs_diff(d, &d.transpose()),
        passivity_margin: 1.0 - linalg::sigma_max(d),
    }
}

fn check_indices(n: usize, idx: &[usize]) -> Result<()> {
    match idx.iter().find(|&&i| i >= n) {
        Some(&index) => Err(Error::IndexOutOfRange { index, n }),
        None => Ok(()),
    }
}

/// Submatrix `S_{rows, cols}` in the given order.
pub fn block(s: &SMatrix, rows: &[usize], cols: &[usize]) -> Result<CMatrix> {
    check_indices(s.n(), rows)?;
    check_indices(s.n(), cols)?;
    Ok(linalg::select(s.data(), rows, cols))
}

/// Response of a network whose `Q` ports are terminated by `load`, seen between the
/// remaining port groups:
///
/// `M_PP' + M_PQ (I − L M_QQ)⁻¹ L M_QP'`
///
/// This one kernel serves cascade loading, both channel routes and the reduced
/// coupled-dipole channel.
pub fn terminated_response(
    m_pp: &CMatrix,
    m_pq: &CMatrix,
    m_qq: &CMatrix,
    m_qp: &CMatrix,
    load: &CMatrix,
    context: &'static str,
) -> Result<CMatrix> {
    let q = m_qq.nrows();
    if load.shape() != (q, q) || m_pq.ncols() != q || m_qp.nrows() != q {
        return Err(Error::DimensionMismatch(format!(
            "{context}: load is {}x{}, terminated block is {q}x{q}",
            load.nrows(),
            load.ncols()
        )));
    }
    let loop_gain = load * m_qq;
    let resolvent = linalg::identity(q) - &loop_gain;
    let rhs = load * m_qp;
    let x = linalg::solve(&resolvent, &rhs).ok_or_else(|| Error::SingularResolvent {
        context,
        spectral_radius: linalg::spectral_radius(&loop_gain),
    })?;
    Ok(m_pp + m_pq * x)
}

/// Terminates ports `terminated` of `s` with `load` and returns the reduced network over
/// `kept` (in that order).
pub fn cascade_load(s: &SMatrix, kept: &[usize], terminated: &[usize], load: &SMatrix) -> Result<SMatrix> {
    check_indices(s.n(), kept)?;
    check_indices(s.n(), terminated)?;
    if kept.is_empty() || terminated.is_empty() {
        return Err(Error::InvalidPartition("cascade loading needs non-empty port sets".into()));
    }
    if load.n() != terminated.len() {
        return Err(Error::DimensionMismatch(format!(
            "load has {} ports, {} ports are terminated",
            load.n(),
            terminated.len()
        )));
    }
    let d = s.data();
    let out = terminated_response(
        &linalg::select(d, kept, kept),
        &linalg::select(d, kept, terminated),
        &linalg::select(d, terminated, terminated),
        &linalg::select(d, terminated, kept),
        load.data(),
        "cascade_load",
    )?;
    SMatrix::new(out, s.z0())
}

/// Redheffer star product: connects port `first_link[i]` of `first` to port
/// `second_link[i]` of `second`. The result is ordered `first_free` then `second_free`.
pub fn redheffer_star(
    first: &SMatrix,
    first_free: &[usize],
    first_link: &[usize],
    second: &SMatrix,
    second_link: &[usize],
    second_free: &[usize],
) -> Result<SMatrix> {
    for (s, idx) in [
        (first, first_free),
        (first, first_link),
        (second, second_link),
        (second, second_free),
    ] {
        check_indices(s.n(), idx)?;
    }
    if first_link.len() != second_link.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} link ports cannot connect to {}",
            first_link.len(),
            second_link.len()
        )));
    }
    if first_free.is_empty() || second_free.is_empty() || first_link.is_empty() {
        return Err(Error::InvalidPartition("star product needs non-empty port sets".into()));
    }
    let (a, s) = (first_free, first_link);
    let (sb, c) = (second_link, second_free);
    let re = first.data();
    let lc = second.data();
    let re_aa = linalg::select(re, a, a);
    let re_as = linalg::select(re, a, s);
    let re_sa = linalg::select(re, s, a);
    let re_ss = linalg::select(re, s, s);
    let lc_ss = linalg::select(lc, sb, sb);
    let lc_sc = linalg::select(lc, sb, c);
    let lc_cs = linalg::select(lc, c, sb);
    let lc_cc = linalg::select(lc, c, c);
    let eye = linalg::identity(s.len());

    // X1 = (RE_SS LC_SS − I)⁻¹, X2 = (LC_SS RE_SS − I)⁻¹
    let x1_sys = &re_ss * &lc_ss - &eye;
    let x2_sys = &lc_ss * &re_ss - &eye;
    let singular = |m: &CMatrix| Error::SingularResolvent {
        context: "redheffer_star",
        spectral_radius: linalg::spectral_radius(&(m + &eye)),
    };
    let x1_re_sa = linalg::solve(&x1_sys, &re_sa).ok_or_else(|| singular(&x1_sys))?;
    let x2_lc_sc = linalg::solve(&x2_sys, &lc_sc).ok_or_else(|| singular(&x2_sys))?;

    let k_aa = &re_aa - &re_as * &lc_ss * &x1_re_sa;
    let k_ac = -(&re_as * &x2_lc_sc);
    let k_ca = -(&lc_cs * &x1_re_sa);
    let k_cc = &lc_cc - &lc_cs * &re_ss * &x2_lc_sc;

    let na = a.len();
    let nc = c.len();
    let mut out = CMatrix::zeros(na + nc, na + nc);
    out.view_mut((0, 0), (na, na)).copy_from(&k_aa);
    out.view_mut((0, na), (na, nc)).copy_from(&k_ac);
    out.view_mut((na, 0), (nc, na)).copy_from(&k_ca);
    out.view_mut((na, na), (nc, nc)).copy_from(&k_cc);
    SMatrix::new(out, first.z0())
}

/// `Z = z0 (I − S)⁻¹ (I + S)`.
pub fn s_to_z(s: &SMatrix) -> Result<ZMatrix> {
    let n = s.n();
    let eye = linalg::identity(n);
    let z = linalg::solve(&(&eye - s.data()), &(&eye + s.data())).ok_or(Error::NoImpedanceRepresentation)?;
    ZMatrix::new(z * Complex64::from(s.z0()))
}

/// `S = (Z + z0 I)⁻¹ (Z − z0 I)`.
pub fn z_to_s(z: &ZMatrix, z0: f64) -> Result<SMatrix> {
    let n = z.data.nrows();
    let shift = linalg::identity(n) * Complex64::from(z0);
    let s = linalg::solve(&(&z.data + &shift), &(&z.data - &shift)).ok_or(Error::Singular("z_to_s"))?;
    SMatrix::new(s, z0)
}

/// Channel from the `k`-th order truncation of the multiple-scattering series:
///
/// `S_RT + S_RS (Σ_{j=0..k} (S^L S_SS)^j) S^L S_ST`
///
/// Order 0 is the simplified cascaded model. `part` must contain sets `T`, `R`, `S`.
pub fn neumann_channel(s_re: &SMatrix, part: &PortPartition, s_l: &SMatrix, order: usize) -> Result<CMatrix> {
    let (t, r, s) = (part.require("T")?, part.require("R")?, part.require("S")?);
    if part.n() != s_re.n() {
        return Err(Error::DimensionMismatch("partition does not match S^RE".into()));
    }
    if s_l.n() != s.len() {
        return Err(Error::DimensionMismatch(format!(
            "load has {} ports, environment has {} RIS ports",
            s_l.n(),
            s.len()
        )));
    }
    let d = s_re.data();
    let loop_gain = s_l.data() * linalg::select(d, s, s);
    let mut term = linalg::identity(s.len());
    let mut sum = term.clone();
    for _ in 0..order {
        term = &term * &loop_gain;
        sum += &term;
    }
    Ok(linalg::select(d, r, t) + linalg::select(d, r, s) * sum * s_l.data() * linalg::select(d, s, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;
    use crate::environment::random_reciprocal as random_passive_reciprocal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn block_examples() {
        let eye = SMatrix::from_data(linalg::identity(3)).unwrap();
        let b = eye.block(&[0], &[0]).unwrap();
        assert_eq!(b[(0, 0)], c64(1.0, 0.0));
        let all: Vec<usize> = (0..3).collect();
        assert_eq!(eye.block(&all, &all).unwrap(), *eye.data());
        assert!(matches!(
            eye.block(&[3], &[0]),
            Err(Error::IndexOutOfRange { index: 3, n: 3 })
        ));
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(SMatrix::from_data(CMatrix::zeros(2, 3)).is_err());
        assert!(SMatrix::from_data(CMatrix::zeros(0, 0)).is_err());
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c64(f64::NAN, 0.0);
        assert!(SMatrix::from_data(m).is_err());
    }

    #[test]
    fn partition_rules() {
        assert!(PortPartition::new(3, vec![("A", vec![0, 1]), ("B", vec![2])]).is_ok());
        assert!(PortPartition::new(3, vec![("A", vec![0, 1]), ("B", vec![1, 2])]).is_err());
        assert!(PortPartition::new(3, vec![("A", vec![0]), ("B", vec![2])]).is_err());
        assert!(PortPartition::new(2, vec![("A", vec![0]), ("A", vec![1])]).is_err());
        let p = PortPartition::contiguous(&[("T", 1), ("R", 2), ("S", 3)]).unwrap();
        assert_eq!(p.get("S").unwrap(), &[3, 4, 5]);
        assert_eq!(p.union(&["T", "R"]).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn cascade_load_through_connection_returns_load() {
        let n = 3;
        let mut thru = CMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            thru[(i, n + i)] = c64(1.0, 0.0);
            thru[(n + i, i)] = c64(1.0, 0.0);
        }
        let thru = SMatrix::from_data(thru).unwrap();
        let load = SMatrix::from_data(linalg::diag(&[c64(0.3, 0.1), c64(-0.5, 0.0), c64(0.0, 0.9)])).unwrap();
        let kept: Vec<usize> = (0..n).collect();
        let term: Vec<usize> = (n..2 * n).collect();
        let out = cascade_load(&thru, &kept, &term, &load).unwrap();
        assert!(linalg::max_abs_diff(out.data(), load.data()) < 1e-15);
    }

    #[test]
    fn cascade_load_matched_load_keeps_pp_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_passive_reciprocal(&mut rng, 4, 0.8);
        let load = SMatrix::from_data(CMatrix::zeros(2, 2)).unwrap();
        let out = cascade_load(&s, &[0, 1], &[2, 3], &load).unwrap();
        assert_eq!(*out.data(), s.block(&[0, 1], &[0, 1]).unwrap());
    }

    #[test]
    fn cascade_load_matches_brute_force_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_passive_reciprocal(&mut rng, 3, 0.9);
        let r = c64(0.5, 0.0);
        let load = SMatrix::from_data(linalg::diag(&[r])).unwrap();
        let out = cascade_load(&s, &[0, 1], &[2], &load).unwrap();

        // Σ_k S_PQ (r S_QQ)^k r S_QP, independent scalar series
        let d = s.data();
        let mut series = linalg::select(d, &[0, 1], &[0, 1]);
        let mut gain = c64(1.0, 0.0);
        for _ in 0..=200 {
            for i in 0..2 {
                for j in 0..2 {
                    series[(i, j)] += d[(i, 2)] * gain * r * d[(2, j)];
                }
            }
            gain *= r * d[(2, 2)];
        }
        assert!(linalg::max_abs_diff(out.data(), &series) < 1e-10);
    }

    #[test]
    fn cascade_load_reports_active_loop() {
        let s = SMatrix::from_data(CMatrix::from_row_slice(
            2,
            2,
            &[c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0)],
        ))
        .unwrap();
        let load = SMatrix::from_data(linalg::diag(&[c64(1.0, 0.0)])).unwrap();
        match cascade_load(&s, &[0], &[1], &load) {
            Err(Error::SingularResolvent { spectral_radius, .. }) => assert!((spectral_radius - 1.0).abs() < 1e-12),
            other => panic!("expected singular resolvent, got {other:?}"),
        }
    }

    #[test]
    fn z_conversion_examples() {
        let zero = SMatrix::from_data(CMatrix::zeros(3, 3)).unwrap();
        let z = s_to_z(&zero).unwrap();
        assert!(linalg::max_abs_diff(&z.data, &(linalg::identity(3) * c64(50.0, 0.0))) < 1e-12);

        let r = (5.2 - 50.0) / (5.2 + 50.0);
        let s = SMatrix::from_data(linalg::diag(&[c64(r, 0.0)])).unwrap();
        let z = s_to_z(&s).unwrap();
        assert!((z.data[(0, 0)] - c64(5.2, 0.0)).norm() < 1e-12);

        let thru = SMatrix::from_data(CMatrix::from_row_slice(
            2,
            2,
            &[c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)],
        ))
        .unwrap();
        assert!(matches!(s_to_z(&thru), Err(Error::NoImpedanceRepresentation)));
    }

    #[test]
    fn validate_examples() {
        let s = SMatrix::from_data(linalg::identity(2) * c64(1.1, 0.0)).unwrap();
        let rep = validate(&s);
        assert!((rep.passivity_margin + 0.1).abs() < 1e-12);
        assert_eq!(rep.reciprocity_err, 0.0);
        assert!(!rep.is_passive(TOL_PASSIVITY));
    }

    #[test]
    fn neumann_order_zero_is_simplified_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_passive_reciprocal(&mut rng, 5, 0.9);
        let part = PortPartition::contiguous(&[("T", 1), ("R", 1), ("S", 3)]).unwrap();
        let l = SMatrix::from_data(linalg::diag(&[c64(0.2, 0.3), c64(-0.7, 0.0), c64(0.0, -0.4)])).unwrap();
        let h0 = neumann_channel(&s, &part, &l, 0).unwrap();
        let d = s.data();
        let expect = linalg::select(d, &[1], &[0])
            + linalg::select(d, &[1], &[2, 3, 4]) * l.data() * linalg::select(d, &[2, 3, 4], &[0]);
        assert_eq!(h0, expect);
    }

    #[test]
    fn neumann_without_coupling_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut d = random_passive_reciprocal(&mut rng, 5, 0.9).into_data();
        for i in 2..5 {
            for j in 2..5 {
                d[(i, j)] = Complex64::ZERO;
            }
        }
        let s = SMatrix::from_data(d).unwrap();
        let part = PortPartition::contiguous(&[("T", 1), ("R", 1), ("S", 3)]).unwrap();
        let l = SMatrix::from_data(linalg::diag(&[c64(0.9, 0.0), c64(-0.7, 0.1), c64(0.0, 1.0)])).unwrap();
        let exact = cascade_load(&s, &[0, 1], &[2, 3, 4], &l).unwrap();
        for k in [0, 1, 5] {
            let h = neumann_channel(&s, &part, &l, k).unwrap();
            assert!((h[(0, 0)] - exact.data()[(1, 0)]).norm() < 1e-15);
        }
    }

    // The truncated tail of the loop series shrinks geometrically, and the channel error
    // stays under the matching envelope. The channel error itself need not be monotone.
    #[test]
    fn neumann_error_within_geometric_envelope() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let part = PortPartition::contiguous(&[("T", 1), ("R", 2), ("S", 6)]).unwrap();
        let (t, r, s_idx) = ([0], [1, 2], [3, 4, 5, 6, 7, 8]);
        for _ in 0..50 {
            let s = random_passive_reciprocal(&mut rng, 9, 0.9);
            let l = random_passive_reciprocal(&mut rng, 6, 1.0);
            let d = s.data();
            let a = l.data() * linalg::select(d, &s_idx, &s_idx);
            let sigma = linalg::sigma_max(&a);
            assert!(sigma < 1.0);
            let exact = cascade_load(&s, &[0, 1, 2], &s_idx, &l).unwrap();
            let exact = linalg::select(exact.data(), &r, &t);
            let resolvent = linalg::inverse(&(linalg::identity(6) - &a)).unwrap();
            let outer = linalg::sigma_max(&linalg::select(d, &r, &s_idx))
                * linalg::sigma_max(&(l.data() * linalg::select(d, &s_idx, &t)));
            let mut tail = &a * &resolvent;
            let mut prev_tail = f64::INFINITY;
            for k in 0..=20 {
                let err = linalg::sigma_max(&(neumann_channel(&s, &part, &l, k).unwrap() - &exact));
                let envelope = outer * sigma.powi(k as i32 + 1) / (1.0 - sigma);
                assert!(err <= envelope * (1.0 + 1e-9) + 1e-14, "k={k}: {err} > {envelope}");
                let tail_norm = linalg::sigma_max(&tail);
                assert!(tail_norm <= prev_tail * (1.0 + 1e-12));
                prev_tail = tail_norm;
                tail = &a * &tail;
            }
        }
    }
}
