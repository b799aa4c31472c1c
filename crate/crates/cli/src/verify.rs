use bdris::circuits::{
    dris_slc, group_connected, il_matrix, pi_network, reflection_from_impedance, t_network, BinaryConfig, LoadBank,
    StaticLoadCircuit,
};
use bdris::environment::{build_k, channel_conventional, channel_diagonal, random_reciprocal, synth_re, CascadeModel};
use bdris::estimation::ModelParams;
use bdris::linalg::{c64, diag, identity, inverse, max_abs_diff, rel_error, select, sigma_max};
use bdris::network::{cascade_load, neumann_channel, s_to_z, validate, SMatrix};
use bdris::optimization::{ChannelOracle, GroundTruth};
use bdris::physfad::{
    bdris_dipole_model, channel_direct, channel_reduced, config_for_loads, DipoleConfig, DipoleSystem,
    ReducedDipoleModel,
};
use bdris::{CMatrix, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::CliError;

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

type Outcome = bdris::Result<(bool, String)>;

struct Scenario {
    env: bdris::environment::RadioEnvironment,
    slc: StaticLoadCircuit,
    bank: LoadBank,
    k: CascadeModel,
}

/// Runs every check and prints a table; fails with the number of failing checks.
pub fn run(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let sc = &cfg.scenario;
    let env = synth_re(sc.n_t, sc.n_r, sc.n_s, sc.loss_factor, sc.seed)?;
    let slc = cfg.slc()?;
    let bank = cfg.bank()?;
    let k = build_k(&env, &slc)?;
    let s = Scenario { env, slc, bank, k };
    let seed = sc.seed;

    let battery: Vec<(&'static str, Outcome)> = vec![
        ("canonical circuits symmetric and unitary", canonical_unitary()),
        ("T network impedance matrix", t_impedances(seed)),
        ("pi network admittance matrix", pi_admittances(seed)),
        ("cascade K reciprocal and passive", cascade_valid(&s.k)),
        ("routes agree on scenario", routes_on_scenario(&s, seed)),
        ("routes agree on random scenarios", routes_random(seed)),
        ("reduced dipole form equals direct", dipole_equivalence(seed)),
        ("cascade as dipole model", cascade_as_dipoles(&s, seed)),
        ("rank-1 flips match full solves", flips_match(&s, seed)),
        ("Neumann series convergence", neumann_convergence(&s, seed)),
        ("parameter model reproduces ground truth", params_forward(&s, seed)),
    ];
    let checks: Vec<Check> = battery
        .into_iter()
        .map(|(name, outcome)| {
            let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
            Check { name, pass, detail }
        })
        .collect();

    println!("{:<42} {:<6} detail", "check", "result");
    for c in &checks {
        println!("{:<42} {:<6} {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(CliError::Verification(failed));
    }
    Ok(checks)
}

fn canonical_unitary() -> Outcome {
    let mut worst = 0.0f64;
    for c in [t_network(), pi_network()] {
        let m = c.s().data();
        worst = worst.max(max_abs_diff(m, &m.transpose()));
        worst = worst.max(max_abs_diff(&(m.adjoint() * m), &identity(5)));
    }
    Ok((worst <= 1e-12, format!("max deviation {worst:.1e}")))
}

fn random_impedance(rng: &mut ChaCha8Rng) -> Complex64 {
    c64(rng.random_range(1.0..200.0), rng.random_range(-200.0..200.0))
}

fn loaded_two_port(slc: &StaticLoadCircuit, z: &[Complex64]) -> bdris::Result<CMatrix> {
    let refl = z.iter().map(|&zi| reflection_from_impedance(zi, 50.0)).collect::<bdris::Result<Vec<_>>>()?;
    let load = SMatrix::from_data(diag(&refl))?;
    let loaded = cascade_load(slc.s(), &[0, 1], &[2, 3, 4], &load)?;
    Ok(s_to_z(&loaded)?.data)
}

fn t_impedances(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let z: Vec<Complex64> = (0..3).map(|_| random_impedance(&mut rng)).collect();
        let expected = CMatrix::from_row_slice(2, 2, &[z[0] + z[2], z[2], z[2], z[1] + z[2]]);
        worst = worst.max(rel_error(&loaded_two_port(&t_network(), &z)?, &expected));
    }
    Ok((worst <= 1e-10, format!("100 load triples, rel err {worst:.1e}")))
}

fn pi_admittances(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        // aux ports: series branch, shunt at port 1, shunt at port 2
        let z: Vec<Complex64> = (0..3).map(|_| random_impedance(&mut rng)).collect();
        let y: Vec<Complex64> = z.iter().map(|zi| zi.inv()).collect();
        let (y3, y1, y2) = (y[0], y[1], y[2]);
        let expected = CMatrix::from_row_slice(2, 2, &[y1 + y3, -y3, -y3, y2 + y3]);
        let zm = loaded_two_port(&pi_network(), &z)?;
        let ym = inverse(&zm).ok_or(bdris::Error::Singular("pi network impedance matrix"))?;
        worst = worst.max(rel_error(&ym, &expected));
    }
    Ok((worst <= 1e-10, format!("100 load triples, rel err {worst:.1e}")))
}

fn cascade_valid(k: &CascadeModel) -> Outcome {
    let rep = validate(k.s_k());
    let pass = rep.is_reciprocal(1e-12) && rep.is_passive(1e-9);
    Ok((
        pass,
        format!("reciprocity err {:.1e}, passivity margin {:.1e}", rep.reciprocity_err, rep.passivity_margin),
    ))
}

/// All configurations when there are at most 512, otherwise 512 random ones.
fn scenario_configs(n_c: usize, seed: u64) -> Vec<BinaryConfig> {
    if n_c <= 9 {
        (0..1u64 << n_c).map(|i| BinaryConfig::from_index(i, n_c)).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..512).map(|_| BinaryConfig::random(n_c, &mut rng)).collect()
    }
}

fn routes_on_scenario(s: &Scenario, seed: u64) -> Outcome {
    let mut worst = 0.0f64;
    let configs = scenario_configs(s.k.n_c(), seed);
    for b in &configs {
        let s_il = il_matrix(b, &s.bank)?;
        let conventional = channel_conventional(&s.env, &s.slc.load_with(&s_il)?)?;
        worst = worst.max(rel_error(&channel_diagonal(&s.k, &s_il)?, &conventional));
    }
    Ok((worst <= 1e-10, format!("{} configurations, rel err {worst:.1e}", configs.len())))
}

fn random_slc(kind: usize, rng: &mut ChaCha8Rng) -> bdris::Result<StaticLoadCircuit> {
    match kind {
        0 => group_connected(&vec![t_network(); rng.random_range(1..=3)]),
        1 => group_connected(&vec![pi_network(); rng.random_range(1..=3)]),
        2 => dris_slc(rng.random_range(1..=6)),
        3 => group_connected(&[t_network(), pi_network()]),
        _ => {
            let (n_s, n_c) = (rng.random_range(1..=5), rng.random_range(1..=5));
            let sigma = rng.random_range(0.5..1.0);
            StaticLoadCircuit::new(random_reciprocal(rng, n_s + n_c, sigma), n_s, n_c)
        }
    }
}

fn routes_random(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let slc = random_slc(i % 5, &mut rng)?;
        let env = synth_re(rng.random_range(1..=3), rng.random_range(1..=3), slc.n_s(), rng.random_range(0.02..0.5), rng.random())?;
        let polar = |rng: &mut ChaCha8Rng| Complex64::from_polar(rng.random_range(0.0..1.0), rng.random_range(-3.1..3.1));
        let bank = LoadBank::new(polar(&mut rng), polar(&mut rng))?;
        let s_il = il_matrix(&BinaryConfig::random(slc.n_c(), &mut rng), &bank)?;
        let conventional = channel_conventional(&env, &slc.load_with(&s_il)?)?;
        worst = worst.max(rel_error(&channel_diagonal(&build_k(&env, &slc)?, &s_il)?, &conventional));
    }
    Ok((worst <= 1e-10, format!("100 scenarios (T, pi, D-RIS, mixed, random), rel err {worst:.1e}")))
}

fn dipole_equivalence(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3c);
    let (mut worst, mut zero_exact) = (0.0f64, true);
    for i in 0..100 {
        let n_s = rng.random_range(1..=10);
        let sys = DipoleSystem::random(rng.random_range(1..=3), rng.random_range(1..=3), n_s, rng.random_range(0.05..0.4), seed.wrapping_add(i))?;
        let red = ReducedDipoleModel::from_system(&sys)?;
        let c = DipoleConfig((0..n_s).map(|_| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect());
        worst = worst.max(rel_error(&channel_reduced(&red, &c)?, &channel_direct(&sys, &c)?));
        zero_exact &= channel_reduced(&red, &DipoleConfig::zeros(n_s))? == red.blk("R", "T")?;
    }
    Ok((worst <= 1e-10 && zero_exact, format!("100 systems, rel err {worst:.1e}, c = 0 exact: {zero_exact}")))
}

fn cascade_as_dipoles(s: &Scenario, seed: u64) -> Outcome {
    let red = bdris_dipole_model(&s.k)?;
    let mut worst = 0.0f64;
    let configs = scenario_configs(s.k.n_c(), seed);
    for b in &configs {
        let h = channel_reduced(&red, &config_for_loads(b, &s.bank))?;
        worst = worst.max(rel_error(&h, &channel_diagonal(&s.k, &il_matrix(b, &s.bank)?)?));
    }
    Ok((worst <= 1e-10, format!("{} configurations, rel err {worst:.1e}", configs.len())))
}

fn flips_match(s: &Scenario, seed: u64) -> Outcome {
    let gt = GroundTruth::new(&s.k, &s.bank);
    let n_c = s.k.n_c();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ev = gt.flip_evaluator(&BinaryConfig::random(n_c, &mut rng))?;
    let refactorizations = ev.ops().refactorizations;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        ev.flip(rng.random_range(0..n_c))?;
        ev.commit();
        worst = worst.max(rel_error(ev.channel(), &gt.channel(ev.config())?));
    }
    let extra = ev.ops().refactorizations - refactorizations;
    Ok((worst <= 1e-9 && extra == 0, format!("1000 flips, rel err {worst:.1e}, refactorizations {extra}")))
}

fn neumann_convergence(s: &Scenario, seed: u64) -> Outcome {
    let (env, part) = (&s.env, s.env.part());
    let d = env.s_re().data();
    let (t, r, sp) = (part.require("T")?, part.require("R")?, part.require("S")?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
    let (mut ok, mut max_sigma, mut orders) = (true, 0.0f64, 0);
    for _ in 0..20 {
        let b = BinaryConfig::random(s.k.n_c(), &mut rng);
        let s_l = s.slc.load_with(&il_matrix(&b, &s.bank)?)?;
        let exact = channel_conventional(env, &s_l)?;
        let sigma = sigma_max(&(s_l.data() * select(d, sp, sp)));
        max_sigma = max_sigma.max(sigma);
        if sigma >= 1.0 {
            ok = false;
            continue;
        }
        let simplified = select(d, r, t) + select(d, r, sp) * s_l.data() * select(d, sp, t);
        ok &= neumann_channel(env.s_re(), part, &s_l, 0)? == simplified;
        // order after which the geometric envelope drops below 1e-10 of the channel
        let outer = sigma_max(&select(d, r, sp)) * sigma_max(&(s_l.data() * select(d, sp, t)));
        let target = 1e-10 * sigma_max(&exact).max(f64::MIN_POSITIVE);
        let mut k = 0;
        while outer * sigma.powi(k as i32 + 1) / (1.0 - sigma) > target && k < 5000 {
            k += 1;
        }
        orders = orders.max(k);
        for order in [0, k / 4, k / 2, k] {
            let err = sigma_max(&(neumann_channel(env.s_re(), part, &s_l, order)? - &exact));
            let envelope = outer * sigma.powi(order as i32 + 1) / (1.0 - sigma);
            ok &= err <= envelope * (1.0 + 1e-9) + 1e-15;
        }
        ok &= sigma_max(&(neumann_channel(env.s_re(), part, &s_l, k)? - &exact)) <= 1.01 * target + 1e-15;
    }
    Ok((ok, format!("20 configurations, max loop gain {max_sigma:.3}, converged by order {orders}")))
}

fn params_forward(s: &Scenario, seed: u64) -> Outcome {
    let p = ModelParams::from_cascade(&s.k, &s.bank);
    let mut worst = 0.0f64;
    let configs = scenario_configs(s.k.n_c(), seed);
    for b in &configs {
        worst = worst.max(rel_error(&p.predict(b)?, &s.k.channel(&s.bank, b)?));
    }
    Ok((worst <= 1e-12, format!("{} configurations, rel err {worst:.1e}", configs.len())))
}
