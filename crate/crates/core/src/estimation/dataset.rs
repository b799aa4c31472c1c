use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::circuits::{BinaryConfig, LoadBank, StaticLoadCircuit};
use crate::environment::{build_k, RadioEnvironment};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Ordered `(b, h)` pairs with optional noise metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_c: usize,
    n_r: usize,
    n_t: usize,
    samples: Vec<(BinaryConfig, CMatrix)>,
    pub snr_db: Option<f64>,
}

impl Dataset {
    pub fn new(samples: Vec<(BinaryConfig, CMatrix)>, snr_db: Option<f64>) -> Result<Self> {
        let (b0, h0) = samples
            .first()
            .ok_or_else(|| Error::DegenerateDataset("no samples".into()))?;
        let (n_c, (n_r, n_t)) = (b0.len(), h0.shape());
        if n_c == 0 || n_r == 0 || n_t == 0 {
            return Err(Error::DegenerateDataset("empty configuration or channel".into()));
        }
        for (m, (b, h)) in samples.iter().enumerate() {
            if b.len() != n_c || h.shape() != (n_r, n_t) {
                return Err(Error::DimensionMismatch(format!(
                    "sample {m}: {} bits and {}x{} channel, expected {n_c} bits and {n_r}x{n_t}",
                    b.len(),
                    h.nrows(),
                    h.ncols()
                )));
            }
        }
        Ok(Self { n_c, n_r, n_t, samples, snr_db })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn samples(&self) -> &[(BinaryConfig, CMatrix)] {
        &self.samples
    }

    /// First `n` samples and the rest.
    pub fn split(&self, n: usize) -> Result<(Self, Self)> {
        if n == 0 || n >= self.len() {
            return Err(Error::InvalidArgument(format!("cannot split {} samples at {n}", self.len())));
        }
        let (a, b) = self.samples.split_at(n);
        Ok((Self::new(a.to_vec(), self.snr_db)?, Self::new(b.to_vec(), self.snr_db)?))
    }

    fn header(&self) -> Vec<String> {
        let mut cols: Vec<String> = (1..=self.n_c).map(|i| format!("b_{i}")).collect();
        for part in ["re", "im"] {
            for i in 1..=self.n_r {
                for j in 1..=self.n_t {
                    cols.push(format!("{part}_h_{i}_{j}"));
                }
            }
        }
        cols
    }

    /// CSV with header `b_1..b_NC, re_h_i_j..., im_h_i_j...` (1-based, row-major). A
    /// leading `# snr_db=<x>` line carries the noise level when present.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        if let Some(snr) = self.snr_db {
            writeln!(out, "# snr_db={snr}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header()).map_err(csv_err)?;
        for (b, h) in &self.samples {
            let mut rec: Vec<String> = b.as_u8().iter().map(|v| v.to_string()).collect();
            for i in 0..self.n_r {
                for j in 0..self.n_t {
                    rec.push(h[(i, j)].re.to_string());
                }
            }
            for i in 0..self.n_r {
                for j in 0..self.n_t {
                    rec.push(h[(i, j)].im.to_string());
                }
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let mut snr_db = None;
        let mut body = text.as_str();
        if let Some(rest) = body.strip_prefix('#') {
            let (meta, tail) = rest.split_once('\n').unwrap_or((rest, ""));
            let value = meta
                .trim()
                .strip_prefix("snr_db=")
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse { line: 1, msg: format!("unknown metadata `#{meta}`") })?;
            snr_db = Some(value);
            body = tail;
        }
        let offset = usize::from(snr_db.is_some());
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let (n_c, n_r, n_t) = parse_header(&header).ok_or_else(|| Error::Parse {
            line: 1 + offset,
            msg: "expected header b_1..b_NC, re_h_i_j..., im_h_i_j...".into(),
        })?;
        let n_h = n_r * n_t;
        let mut samples = Vec::new();
        for (m, rec) in r.records().enumerate() {
            let line = m + 2 + offset;
            let rec = rec.map_err(csv_err)?;
            let num = |k: usize| -> Result<f64> {
                rec[k].trim().parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("invalid number `{}` in column {}", &rec[k], header[k]),
                })
            };
            let bits = (0..n_c)
                .map(|k| match rec[k].trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    v => Err(Error::Parse { line, msg: format!("bit `{v}` is not 0 or 1") }),
                })
                .collect::<Result<Vec<_>>>()?;
            let mut h = CMatrix::zeros(n_r, n_t);
            for k in 0..n_h {
                h[(k / n_t, k % n_t)] = Complex64::new(num(n_c + k)?, num(n_c + n_h + k)?);
            }
            samples.push((BinaryConfig::new(bits), h));
        }
        Self::new(samples, snr_db)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.into()),
        _ => Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        },
    }
}

fn parse_header(h: &[String]) -> Option<(usize, usize, usize)> {
    let n_c = h.iter().take_while(|c| c.starts_with("b_")).count();
    let rest = &h[n_c..];
    let last = rest.last()?.strip_prefix("im_h_")?;
    let (r, t) = last.split_once('_')?;
    let (n_r, n_t): (usize, usize) = (r.parse().ok()?, t.parse().ok()?);
    let expected: Vec<String> = (1..=n_c)
        .map(|i| format!("b_{i}"))
        .chain(["re", "im"].iter().flat_map(|p| {
            (1..=n_r).flat_map(move |i| (1..=n_t).map(move |j| format!("{p}_h_{i}_{j}")))
        }))
        .collect();
    (n_c > 0 && expected == h).then_some((n_c, n_r, n_t))
}

/// `n` uniformly random configurations and their ground-truth channels, with optional
/// additive complex Gaussian noise at `snr_db` per sample.
pub fn generate_dataset(
    env: &RadioEnvironment,
    slc: &StaticLoadCircuit,
    bank: &LoadBank,
    n: usize,
    seed: u64,
    snr_db: Option<f64>,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("dataset size must be positive".into()));
    }
    let k = build_k(env, slc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = rng.clone();
    noise_rng.set_stream(1);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let b = BinaryConfig::random(slc.n_c(), &mut rng);
        let mut h = k.channel(bank, &b)?;
        if let Some(snr) = snr_db {
            let per_entry = h.norm_squared() / h.len() as f64 / 10f64.powf(snr / 10.0);
            let sigma = (per_entry / 2.0).sqrt();
            for v in h.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut noise_rng);
                let im: f64 = StandardNormal.sample(&mut noise_rng);
                *v += Complex64::new(re, im) * sigma;
            }
        }
        samples.push((b, h));
    }
    Dataset::new(samples, snr_db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{group_connected, pi_network};
    use crate::environment::{end_to_end, synth_re};

    fn scenario() -> (RadioEnvironment, StaticLoadCircuit) {
        let env = synth_re(1, 1, 6, 0.1, 5).unwrap();
        let slc = group_connected(&[pi_network(), pi_network(), pi_network()]).unwrap();
        (env, slc)
    }

    #[test]
    fn deterministic_and_noiseless_matches_end_to_end() {
        let (env, slc) = scenario();
        let bank = LoadBank::pin_diode();
        let a = generate_dataset(&env, &slc, &bank, 20, 9, None).unwrap();
        let b = generate_dataset(&env, &slc, &bank, 20, 9, None).unwrap();
        assert_eq!(a, b);
        for (cfg, h) in a.samples() {
            assert_eq!(*h, end_to_end(&env, &slc, &bank, cfg).unwrap());
        }
    }

    #[test]
    fn empirical_snr() {
        let (env, slc) = scenario();
        let bank = LoadBank::pin_diode();
        let clean = generate_dataset(&env, &slc, &bank, 10_000, 4, None).unwrap();
        let noisy = generate_dataset(&env, &slc, &bank, 10_000, 4, Some(20.0)).unwrap();
        let (mut sig, mut noise) = (0.0, 0.0);
        for ((b1, h1), (b2, h2)) in clean.samples().iter().zip(noisy.samples()) {
            assert_eq!(b1, b2);
            sig += h1.norm_squared();
            noise += (h2 - h1).norm_squared();
        }
        let snr = 10.0 * (sig / noise).log10();
        assert!((snr - 20.0).abs() < 0.5, "empirical SNR {snr}");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let env = synth_re(2, 1, 3, 0.2, 1).unwrap();
        let slc = crate::circuits::dris_slc(3).unwrap();
        let d = generate_dataset(&env, &slc, &LoadBank::pin_diode(), 7, 2, Some(15.0)).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# snr_db=15\nb_1,b_2,b_3,re_h_1_1,re_h_1_2,im_h_1_1,im_h_1_2\n"));
        assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(Dataset::read_csv("b_1,re_h_1_1\n0,1\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("b_1,re_h_1_1,im_h_1_1\n2,1,0\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("b_1,re_h_1_1,im_h_1_1\n1,x,0\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("b_1,re_h_1_1,im_h_1_1\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("# foo\nb_1,re_h_1_1,im_h_1_1\n1,0,0\n".as_bytes()).is_err());
    }

    #[test]
    fn inconsistent_samples_rejected() {
        let s = vec![
            (BinaryConfig::zeros(2), CMatrix::zeros(1, 1)),
            (BinaryConfig::zeros(3), CMatrix::zeros(1, 1)),
        ];
        assert!(matches!(Dataset::new(s, None), Err(Error::DimensionMismatch(_))));
        assert!(Dataset::new(vec![], None).is_err());
    }
}
