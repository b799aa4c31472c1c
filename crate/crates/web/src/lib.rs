//! Browser demo over a small BD-RIS scenario (one transmit and one receive antenna,
//! six RIS elements, PIN-diode loads). Three operations are exposed to JavaScript:
//! the channel of a chosen configuration by both routes, the RSSI landscape with the
//! coordinate-ascent and exhaustive optima, and the truncation error of the
//! multiple-scattering series.
//!
//! The computations live in [`Scenario`] so they can be tested natively; the
//! `wasm_bindgen` wrapper [`Demo`] only converts errors and serializes results.

use bdris::circuits::{dris_slc, group_connected, il_matrix, pi_network, t_network, BinaryConfig, LoadBank, StaticLoadCircuit};
use bdris::environment::{build_k, channel_conventional, channel_diagonal, synth_re, CascadeModel, RadioEnvironment};
use bdris::linalg::sigma_max;
use bdris::network::neumann_channel;
use bdris::optimization::{coordinate_ascent, exhaustive_search, rssi, ChannelOracle, GroundTruth};
use bdris::{Error, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const N_S: usize = 6;

pub struct Scenario {
    env: RadioEnvironment,
    slc: StaticLoadCircuit,
    bank: LoadBank,
    k: CascadeModel,
}

#[derive(Debug, Serialize)]
pub struct ChannelView {
    pub diagonal: [f64; 2],
    pub conventional: [f64; 2],
    pub amplitude: f64,
    pub phase_deg: f64,
    pub rssi: f64,
    pub route_rel_diff: f64,
}

#[derive(Debug, Serialize)]
pub struct Landscape {
    /// Left edges of the bins followed by the last right edge.
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub ascent_bits: Vec<u8>,
    pub ascent_rssi: f64,
    pub ascent_evaluations: u64,
    pub exhaustive_bits: Vec<u8>,
    pub exhaustive_rssi: f64,
}

#[derive(Debug, Serialize)]
pub struct Truncation {
    pub loop_gain: f64,
    /// Spectral-norm error of the series truncated after order k, for k = 0, 1, ...
    pub errors: Vec<f64>,
    /// Geometric bound on the same errors.
    pub bound: Vec<f64>,
}

impl Scenario {
    /// `layout` is `pi` (three π groups), `t` (three T groups) or `dris` (no coupling
    /// between elements through the load circuit).
    pub fn new(seed: u64, loss_factor: f64, layout: &str) -> Result<Self> {
        let slc = match layout {
            "pi" => group_connected(&[pi_network(), pi_network(), pi_network()])?,
            "t" => group_connected(&[t_network(), t_network(), t_network()])?,
            "dris" => dris_slc(N_S)?,
            other => return Err(Error::InvalidArgument(format!("unknown layout `{other}`"))),
        };
        let env = synth_re(1, 1, N_S, loss_factor, seed)?;
        let k = build_k(&env, &slc)?;
        Ok(Self { env, slc, bank: LoadBank::pin_diode(), k })
    }

    pub fn n_c(&self) -> usize {
        self.k.n_c()
    }

    fn config(&self, bits: &[u8]) -> Result<BinaryConfig> {
        let b = BinaryConfig::from_u8(bits)?;
        if b.len() != self.n_c() {
            return Err(Error::DimensionMismatch(format!("{} bits for {} loads", b.len(), self.n_c())));
        }
        Ok(b)
    }

    pub fn channel(&self, bits: &[u8]) -> Result<ChannelView> {
        let b = self.config(bits)?;
        let s_il = il_matrix(&b, &self.bank)?;
        let h = channel_diagonal(&self.k, &s_il)?[(0, 0)];
        let c = channel_conventional(&self.env, &self.slc.load_with(&s_il)?)?[(0, 0)];
        Ok(ChannelView {
            diagonal: [h.re, h.im],
            conventional: [c.re, c.im],
            amplitude: h.norm(),
            phase_deg: h.arg().to_degrees(),
            rssi: h.norm_sqr(),
            route_rel_diff: (h - c).norm() / c.norm(),
        })
    }

    pub fn landscape(&self, bins: usize, ascent_seed: u64) -> Result<Landscape> {
        if bins == 0 {
            return Err(Error::InvalidArgument("need at least one bin".into()));
        }
        let truth = GroundTruth::new(&self.k, &self.bank);
        let n_c = self.n_c();
        let values = (0..1u64 << n_c)
            .map(|i| truth.channel(&BinaryConfig::from_index(i, n_c)).map(|h| rssi(&h)))
            .collect::<Result<Vec<_>>>()?;
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![0usize; bins];
        for v in &values {
            counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
        }
        let ca = coordinate_ascent(&truth, n_c, ascent_seed)?;
        let ex = exhaustive_search(&truth, n_c)?;
        Ok(Landscape {
            edges: (0..=bins).map(|i| lo + i as f64 * width).collect(),
            density: counts.iter().map(|&c| c as f64 / (values.len() as f64 * width)).collect(),
            ascent_bits: ca.b_opt.as_u8(),
            ascent_rssi: ca.r_opt,
            ascent_evaluations: ca.evaluations,
            exhaustive_bits: ex.b_opt.as_u8(),
            exhaustive_rssi: ex.r_opt,
        })
    }

    pub fn truncation(&self, bits: &[u8], max_order: usize) -> Result<Truncation> {
        let b = self.config(bits)?;
        let s_l = self.slc.load_with(&il_matrix(&b, &self.bank)?)?;
        let exact = channel_conventional(&self.env, &s_l)?;
        let (part, d) = (self.env.part(), self.env.s_re().data());
        let (t, r, s) = (part.require("T")?, part.require("R")?, part.require("S")?);
        let select = bdris::linalg::select;
        let loop_gain = sigma_max(&(s_l.data() * select(d, s, s)));
        let outer = sigma_max(&select(d, r, s)) * sigma_max(&(s_l.data() * select(d, s, t)));
        let mut errors = Vec::with_capacity(max_order + 1);
        for k in 0..=max_order {
            errors.push(sigma_max(&(neumann_channel(self.env.s_re(), part, &s_l, k)? - &exact)));
        }
        let bound = (0..=max_order)
            .map(|k| outer * loop_gain.powi(k as i32 + 1) / (1.0 - loop_gain))
            .collect();
        Ok(Truncation { loop_gain, errors, bound })
    }
}

fn js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub struct Demo(Scenario);

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, loss_factor: f64, layout: &str) -> std::result::Result<Demo, JsError> {
        Scenario::new(seed as u64, loss_factor, layout)
            .map(Demo)
            .map_err(|e| JsError::new(&e.to_string()))
    }

    #[wasm_bindgen(js_name = loadCount)]
    pub fn load_count(&self) -> usize {
        self.0.n_c()
    }

    /// JSON [`ChannelView`] for one configuration (one byte per load, 0 or 1).
    pub fn channel(&self, bits: &[u8]) -> std::result::Result<String, JsError> {
        js(self.0.channel(bits))
    }

    /// JSON [`Landscape`] over all configurations.
    pub fn landscape(&self, bins: usize, ascent_seed: u32) -> std::result::Result<String, JsError> {
        js(self.0.landscape(bins, ascent_seed as u64))
    }

    /// JSON [`Truncation`] for one configuration.
    pub fn truncation(&self, bits: &[u8], max_order: usize) -> std::result::Result<String, JsError> {
        js(self.0.truncation(bits, max_order))
    }
}
