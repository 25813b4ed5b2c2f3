//! Experiment registry: every runnable operation is registered with a
//! descriptive anchor (or the "plumbing" tag) and fixed CSV columns.

use crate::artifact::{Csv, Outcome};
use dnls_lab::chaos_stats::{chaos_l2_exact, chaos_l2_mc, gaussian_block_tail, hypercontractivity_check};
use dnls_lab::dnls_flow::invariance_harness;
use dnls_lab::fixed_mass::{
    change_of_variables_check, covariance_positivity, decomposition_check, disk_scaling_demo,
    exp_moment_fixed_mass, gamma_cov_oracle, radon_nikodym_check, regression_suite,
    CylinderObservable, DiskFunction,
};
use dnls_lab::functionals::CoefficientScaling;
use dnls_lab::mass_distributions::{
    default_curve, density_difference_decay, invert_density, shell_finite_s_k, shell_finite_s_k0,
    shell_limit_k, shell_limit_k0, shell_pair_mc, CharFunction, CharFunctionSpec, ModeSet,
    DEFAULT_DX, DEFAULT_DXI, DEFAULT_XI_MAX, DEFAULT_X_MAX,
};
use dnls_lab::rng::{freq_slot, CounterRng};
use dnls_lab::stats::{chunked_accumulate, MomentAccumulator};
use dnls_lab::torus_field::{japanese_bracket, mean_mass_mc};
use serde_json::{json, Value};

/// Typed access to the `[params]` table with unknown-key rejection.
pub struct Params<'a> {
    table: &'a toml::Table,
}

impl<'a> Params<'a> {
    pub fn new(table: &'a toml::Table, allowed: &[&str]) -> Result<Self, String> {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(format!(
                    "unknown parameter `{key}` (allowed: {})",
                    allowed.join(", ")
                ));
            }
        }
        Ok(Params { table })
    }

    fn u64(&self, key: &str, default: u64, lo: u64, hi: u64) -> Result<u64, String> {
        let v = match self.table.get(key) {
            None => default,
            Some(toml::Value::Integer(i)) if *i >= 0 => *i as u64,
            Some(other) => return Err(format!("`{key}` must be a nonnegative integer, got {other}")),
        };
        if v < lo || v > hi {
            return Err(format!("`{key}` = {v} outside [{lo}, {hi}]"));
        }
        Ok(v)
    }

    fn i64(&self, key: &str, default: i64, lo: i64, hi: i64) -> Result<i64, String> {
        let v = match self.table.get(key) {
            None => default,
            Some(toml::Value::Integer(i)) => *i,
            Some(other) => return Err(format!("`{key}` must be an integer, got {other}")),
        };
        if v < lo || v > hi {
            return Err(format!("`{key}` = {v} outside [{lo}, {hi}]"));
        }
        Ok(v)
    }

    fn f64(&self, key: &str, default: f64, lo: f64, hi: f64) -> Result<f64, String> {
        let v = match self.table.get(key) {
            None => default,
            Some(toml::Value::Float(x)) => *x,
            Some(toml::Value::Integer(i)) => *i as f64,
            Some(other) => return Err(format!("`{key}` must be a number, got {other}")),
        };
        if !(v >= lo && v <= hi) {
            return Err(format!("`{key}` = {v} outside [{lo}, {hi}]"));
        }
        Ok(v)
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool, String> {
        match self.table.get(key) {
            None => Ok(default),
            Some(toml::Value::Boolean(b)) => Ok(*b),
            Some(other) => Err(format!("`{key}` must be a boolean, got {other}")),
        }
    }

    fn i64_list(&self, key: &str, default: &[i64], lo: i64, hi: i64) -> Result<Vec<i64>, String> {
        let vals = match self.table.get(key) {
            None => default.to_vec(),
            Some(toml::Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    toml::Value::Integer(i) => Ok(*i),
                    other => Err(format!("`{key}` entries must be integers, got {other}")),
                })
                .collect::<Result<Vec<i64>, String>>()?,
            Some(other) => return Err(format!("`{key}` must be an array, got {other}")),
        };
        if vals.is_empty() {
            return Err(format!("`{key}` must be nonempty"));
        }
        for &v in &vals {
            if v < lo || v > hi {
                return Err(format!("`{key}` entry {v} outside [{lo}, {hi}]"));
            }
        }
        Ok(vals)
    }

    fn str(&self, key: &str, default: &str, allowed: &[&str]) -> Result<String, String> {
        let v = match self.table.get(key) {
            None => default.to_string(),
            Some(toml::Value::String(s)) => s.clone(),
            Some(other) => return Err(format!("`{key}` must be a string, got {other}")),
        };
        if !allowed.contains(&v.as_str()) {
            return Err(format!("`{key}` = `{v}` not one of {allowed:?}"));
        }
        Ok(v)
    }
}

type Runner = fn(&Params, u64, usize) -> Result<Outcome, String>;

pub struct Experiment {
    pub id: &'static str,
    /// descriptive anchor for the mathematical statement being exercised,
    /// or "plumbing" for infrastructure-only operations
    pub anchor: &'static str,
    pub csv_columns: &'static str,
    pub default_seed: u64,
    pub run: Runner,
}

pub fn registry() -> Vec<Experiment> {
    vec![
        Experiment {
            id: "sampler_moments",
            anchor: "moments of the Gaussian coefficients and the truncated mean mass of the base measure",
            csv_columns: "freq,second_moment,fourth_moment",
            default_seed: 101,
            run: run_sampler_moments,
        },
        Experiment {
            id: "chaos_decay",
            anchor: "L2 Cauchy decay of the quartic chaos between cutoffs N and 2N",
            csv_columns: "N,exact,mc,stderr,sigma",
            default_seed: 301,
            run: run_chaos_decay,
        },
        Experiment {
            id: "tail_bounds",
            anchor: "sub-exponential tails of dyadic block masses and the hypercontractive fourth-moment ratio",
            csv_columns: "N,lambda,empirical,wilson_hi,bound",
            default_seed: 401,
            run: run_tail_bounds,
        },
        Experiment {
            id: "mass_density",
            anchor: "characteristic-function inversion of the density of the (partial) mass",
            csv_columns: "x,density",
            default_seed: 0,
            run: run_mass_density,
        },
        Experiment {
            id: "density_decay",
            anchor: "uniform convergence of the pair-removed mass densities at rate <N>^-2",
            csv_columns: "N,sup_distance,l2_distance",
            default_seed: 0,
            run: run_density_decay,
        },
        Experiment {
            id: "change_of_variables",
            anchor: "exact interior change of variables for one-pair frequency scaling",
            csv_columns: "observable,lhs,lhs_stderr,rhs,rhs_stderr,sigma",
            default_seed: 601,
            run: run_change_of_variables,
        },
        Experiment {
            id: "disk_demo",
            anchor: "two-dimensional disk model of divergence-by-scaling: three routes to the circle average",
            csv_columns: "-",
            default_seed: 0,
            run: run_disk_demo,
        },
        Experiment {
            id: "fixed_mass_identities",
            anchor: "Radon-Nikodym relation and mode decomposition of the fixed-mass measure",
            csv_columns: "-",
            default_seed: 701,
            run: run_fixed_mass_identities,
        },
        Experiment {
            id: "shell_limits",
            anchor: "small-shell limits of one-pair scaling shells against finite-s quadrature",
            csv_columns: "k,mc,mc_stderr,quadrature,limit,lower_bound",
            default_seed: 703,
            run: run_shell_limits,
        },
        Experiment {
            id: "covariance",
            anchor: "covariance positivity of exponentiated chaos components against the pair mass",
            csv_columns: "k,j,cov,stderr,accepted",
            default_seed: 801,
            run: run_covariance,
        },
        Experiment {
            id: "exp_moment",
            anchor: "exponential moments of the quartic chaos at fixed small mass",
            csv_columns: "N,eps,value,stderr,ess",
            default_seed: 901,
            run: run_exp_moment,
        },
        Experiment {
            id: "invariance",
            anchor: "empirical invariance of the truncated Gibbs density under the truncated flow",
            csv_columns: "-",
            default_seed: 1004,
            run: run_invariance,
        },
    ]
}

fn estimate_json(e: &dnls_lab::stats::Estimate) -> Value {
    json!({ "value": e.value, "stderr": e.stderr })
}

fn run_sampler_moments(p: &Params, seed: u64, threads: usize) -> Result<Outcome, String> {
    let n_max = p.i64("n_max", 256, 1, 4096)?;
    let samples = p.u64("samples", 100_000, 100, 100_000_000)?;
    let moment_samples = p.u64("moment_samples", 200_000, 100, 100_000_000)?;
    let freqs = p.i64_list("freqs", &[0, 1, -5, 17], -1_000_000, 1_000_000)?;

    let tol2 = 0.003 * (1_000_000.0 / moment_samples as f64).sqrt();
    let tol4 = 0.01 * (1_000_000.0 / moment_samples as f64).sqrt();
    let mut verdict = true;
    let mut rows = Vec::new();
    let mut moment_json = Vec::new();
    for &freq in &freqs {
        let slot = freq_slot(freq);
        let acc = chunked_accumulate(
            moment_samples,
            8192,
            threads,
            |range| {
                let mut a = (MomentAccumulator::default(), MomentAccumulator::default());
                for i in range {
                    let g = CounterRng::new(seed, i).complex_gaussian(slot);
                    let m = g.norm_sqr();
                    a.0.push(m);
                    a.1.push(m * m);
                }
                a
            },
            |a, b| (a.0.merge(b.0), a.1.merge(b.1)),
            (MomentAccumulator::default(), MomentAccumulator::default()),
        );
        let (m2, m4) = (acc.0.estimate(), acc.1.estimate());
        verdict &= (m2.value - 1.0).abs() < tol2 && (m4.value - 2.0).abs() < tol4;
        rows.push(format!("{freq},{},{}", m2.value, m4.value));
        moment_json.push(json!({
            "freq": freq,
            "second_moment": estimate_json(&m2),
            "fourth_moment": estimate_json(&m4),
        }));
    }
    let mean_mass = mean_mass_mc(seed.wrapping_add(1), samples, n_max, threads);
    let partial: f64 = (-n_max..=n_max)
        .map(|n| 1.0 / japanese_bracket(n).powi(2))
        .sum();
    verdict &= (mean_mass.value - partial).abs() < 3.0 * mean_mass.stderr;
    Ok(Outcome {
        verdict,
        results: json!({
            "moments": moment_json,
            "moment_tolerances": { "second": tol2, "fourth": tol4 },
            "mean_mass": estimate_json(&mean_mass),
            "partial_series": partial,
            "full_series": std::f64::consts::PI / std::f64::consts::PI.tanh(),
        }),
        csv: Some(Csv {
            header: "freq,second_moment,fourth_moment",
            rows,
        }),
    })
}

fn run_chaos_decay(p: &Params, seed: u64, _threads: usize) -> Result<Outcome, String> {
    let n_values = p.i64_list("n_values", &[8, 16, 32, 64], 2, 128)?;
    let mc_up_to = p.i64("mc_up_to", 32, 0, 128)?;
    let samples = p.u64("samples", 20_000, 100, 10_000_000)?;
    let scaling = CoefficientScaling::constant(2 * n_values.iter().max().unwrap(), 1.0);
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let mut verdict = true;
    let mut scaled = Vec::new();
    for &n in &n_values {
        let exact = chaos_l2_exact(n, 2 * n, &scaling).map_err(|e| e.to_string())?;
        scaled.push(n as f64 * exact);
        if n <= mc_up_to {
            let rep = chaos_l2_mc(n, 2 * n, &scaling, samples, seed);
            let sigma = rep.sigma_distance.unwrap();
            verdict &= sigma < 4.0;
            rows.push(format!(
                "{n},{exact},{},{},{sigma}",
                rep.mc_l2_sq.value, rep.mc_l2_sq.stderr
            ));
            entries.push(json!({
                "n": n, "exact": exact,
                "mc": estimate_json(&rep.mc_l2_sq),
                "sigma": sigma,
            }));
        } else {
            rows.push(format!("{n},{exact},,,"));
            entries.push(json!({ "n": n, "exact": exact }));
        }
    }
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().cloned().fold(0.0f64, f64::max);
    verdict &= hi / lo < 3.0;
    Ok(Outcome {
        verdict,
        results: json!({ "rows": entries, "n_times_exact_spread": [lo, hi] }),
        csv: Some(Csv {
            header: "N,exact,mc,stderr,sigma",
            rows,
        }),
    })
}

fn run_tail_bounds(p: &Params, seed: u64, _threads: usize) -> Result<Outcome, String> {
    let block_n = p.i64_list("block_n", &[8, 16], 2, 1024)?;
    let block_lambda_int = p.i64_list("block_lambda", &[40, 60], 1, 10_000)?;
    if block_n.len() != block_lambda_int.len() {
        return Err("`block_n` and `block_lambda` must have equal length".into());
    }
    for &n in &block_n {
        if !n.is_positive() || n & (n - 1) != 0 {
            return Err(format!("`block_n` entry {n} is not a power of two"));
        }
    }
    let samples = p.u64("samples", 200_000, 1000, 100_000_000)?;
    let hyper_n = p.i64("hyper_n", 16, 2, 128)?;
    let hyper_p = p.f64("hyper_p", 4.0, 4.0, 8.0)?;
    let hyper_samples = p.u64("hyper_samples", 100_000, 1000, 100_000_000)?;

    let mut rows = Vec::new();
    let mut blocks = Vec::new();
    let mut verdict = true;
    for (&n, &lam) in block_n.iter().zip(&block_lambda_int) {
        let est = gaussian_block_tail(n, lam as f64, samples, seed);
        verdict &= est.bound_applicable && !est.violated;
        rows.push(format!(
            "{n},{lam},{},{},{}",
            est.empirical_prob, est.wilson.1, est.bound
        ));
        blocks.push(serde_json::to_value(&est).unwrap());
    }
    let ratio = hypercontractivity_check(hyper_n, hyper_p, hyper_samples, seed.wrapping_add(1));
    let bound = 5.0f64.sqrt() * (hyper_p - 1.0).powi(2);
    verdict &= ratio <= bound;
    Ok(Outcome {
        verdict,
        results: json!({
            "blocks": blocks,
            "hypercontractivity": { "n": hyper_n, "p": hyper_p, "ratio": ratio, "bound": bound },
        }),
        csv: Some(Csv {
            header: "N,lambda,empirical,wilson_hi,bound",
            rows,
        }),
    })
}

fn parse_mode_set(p: &Params) -> Result<ModeSet, String> {
    let set = p.str("set", "tail_from", &["tail_from", "all_except"])?;
    let index = p.i64("index", 0, 0, 100_000)?;
    Ok(match set.as_str() {
        "tail_from" => ModeSet::TailFrom(index),
        _ => ModeSet::AllExcept(index),
    })
}

fn run_mass_density(p: &Params, _seed: u64, _threads: usize) -> Result<Outcome, String> {
    let set = parse_mode_set(p)?;
    let cutoff = p.i64("cutoff", 512, 64, 1_000_000)?;
    let tail = p.bool("tail_correction", true)?;
    let xi_max = p.f64("xi_max", DEFAULT_XI_MAX, 1.0, 10_000.0)?;
    let dxi = p.f64("dxi", DEFAULT_DXI, 1e-5, 1.0)?;
    let x_max = p.f64("x_max", DEFAULT_X_MAX, 1.0, 1000.0)?;
    let dx = p.f64("dx", DEFAULT_DX, 1e-5, 1.0)?;
    let mut spec = CharFunctionSpec::new(set, cutoff);
    if !tail {
        spec = spec.without_tail();
    }
    let expected_mean = spec.mean();
    let cf = CharFunction::new(spec);
    let curve = invert_density(&cf, x_max, dx, xi_max, dxi).map_err(|e| e.to_string())?;
    let total = curve.total_mass();
    let mean = curve.mean();
    // normalization is the strongest available check; the mean additionally
    // matches the series when the tail correction is active
    let verdict = (total - 1.0).abs() < 1e-5 && (!tail || (mean - expected_mean).abs() < 1e-3);
    let rows = curve
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| format!("{},{v}", curve.x0 + curve.dx * i as f64))
        .collect();
    Ok(Outcome {
        verdict,
        results: json!({
            "total_mass": total,
            "mean": mean,
            "expected_mean": expected_mean,
            "points": curve.values.len(),
        }),
        csv: Some(Csv {
            header: "x,density",
            rows,
        }),
    })
}

fn run_density_decay(p: &Params, _seed: u64, _threads: usize) -> Result<Outcome, String> {
    let n_values = p.i64_list("n_values", &[2, 4, 8, 16], 1, 256)?;
    let rows = density_difference_decay(&n_values);
    let mut verdict = true;
    for w in rows.windows(2) {
        let ratio = w[0].sup_distance / w[1].sup_distance;
        verdict &= (3.0..=5.5).contains(&ratio);
    }
    Ok(Outcome {
        verdict,
        results: json!({ "rows": serde_json::to_value(&rows).unwrap() }),
        csv: Some(Csv {
            header: "N,sup_distance,l2_distance",
            rows: rows
                .iter()
                .map(|r| format!("{},{},{}", r.n, r.sup_distance, r.l2_distance))
                .collect(),
        }),
    })
}

fn run_change_of_variables(p: &Params, seed: u64, _threads: usize) -> Result<Outcome, String> {
    let m = p.f64("m", 1.0, 0.01, 10.0)?;
    let k = p.i64("k", 2, 0, 1000)?;
    let s = p.f64("s", 1.2, 1.0 + 1e-9, 2.0)?;
    let n_max = p.i64("n_max", 256, 8, 4096)?;
    let samples = p.u64("samples", 200_000, 1000, 100_000_000)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut verdict = true;
    for f in &regression_suite() {
        let rep = change_of_variables_check(f, m, k, s, n_max, samples, seed);
        verdict &= rep.sigma < 3.0;
        rows.push(format!(
            "{},{},{},{},{},{}",
            f.name, rep.lhs.value, rep.lhs.stderr, rep.rhs.value, rep.rhs.stderr, rep.sigma
        ));
        reports.push(serde_json::to_value(&rep).unwrap());
    }
    Ok(Outcome {
        verdict,
        results: json!({ "observables": reports }),
        csv: Some(Csv {
            header: "observable,lhs,lhs_stderr,rhs,rhs_stderr,sigma",
            rows,
        }),
    })
}

fn disk_functions() -> Vec<DiskFunction> {
    vec![
        DiskFunction {
            name: "one",
            f: Box::new(|_, _| 1.0),
            fx: Box::new(|_, _| 0.0),
            fy: Box::new(|_, _| 0.0),
        },
        DiskFunction {
            name: "x2_plus_3y4",
            f: Box::new(|x: f64, y: f64| x * x + 3.0 * y.powi(4)),
            fx: Box::new(|x: f64, _| 2.0 * x),
            fy: Box::new(|_, y: f64| 12.0 * y.powi(3)),
        },
    ]
}

fn run_disk_demo(p: &Params, _seed: u64, _threads: usize) -> Result<Outcome, String> {
    let n_r = p.u64("n_r", 2000, 10, 1_000_000)? as usize;
    let n_theta = p.u64("n_theta", 4096, 16, 1_000_000)? as usize;
    let mut verdict = true;
    let mut reports = Vec::new();
    for tf in &disk_functions() {
        let r = disk_scaling_demo(tf, n_r, n_theta);
        verdict &= (r.scaling - r.circle).abs() < 1e-6
            && (r.divergence - r.circle).abs() < 1e-6
            && (r.sv_scaling - r.sv_measure).abs() < 1e-6
            && (r.sv_divergence - r.sv_measure).abs() < 1e-6
            && r.decomposition_gap < 1e-6;
        reports.push(json!({ "function": tf.name, "report": serde_json::to_value(&r).unwrap() }));
    }
    Ok(Outcome {
        verdict,
        results: json!({ "functions": reports }),
        csv: None,
    })
}

fn run_fixed_mass_identities(p: &Params, seed: u64, _threads: usize) -> Result<Outcome, String> {
    let m = p.f64("m", 1.0, 0.01, 10.0)?;
    let rn_k = p.i64("rn_k", 2, 0, 1000)?;
    let rn_n_max = p.i64("rn_n_max", 64, 8, 1024)?;
    let k_max = p.i64("k_max", 64, 1, 256)?;
    let dec_n_max = p.i64("dec_n_max", 128, 8, 1024)?;
    if dec_n_max <= k_max {
        return Err("`dec_n_max` must exceed `k_max`".into());
    }
    let samples = p.u64("samples", 300_000, 1000, 100_000_000)?;
    let suite = regression_suite();
    let mut verdict = true;
    let mut rn_reports = Vec::new();
    for f in [&suite[1], &suite[3]] {
        let rep =
            radon_nikodym_check(f, m, rn_k, rn_n_max, samples, seed).map_err(|e| e.to_string())?;
        verdict &= rep.sigma < 3.0;
        rn_reports.push(serde_json::to_value(&rep).unwrap());
    }
    let mut dec_reports = Vec::new();
    for f in [&suite[0], &suite[1]] {
        let rep = decomposition_check(f, m, k_max, dec_n_max, samples, seed.wrapping_add(100))
            .map_err(|e| e.to_string())?;
        verdict &= rep.pass;
        dec_reports.push(serde_json::to_value(&rep).unwrap());
    }
    Ok(Outcome {
        verdict,
        results: json!({ "radon_nikodym": rn_reports, "decomposition": dec_reports }),
        csv: None,
    })
}

fn run_shell_limits(p: &Params, seed: u64, threads: usize) -> Result<Outcome, String> {
    let m = p.f64("m", 1.0, 0.01, 10.0)?;
    let s = p.f64("s", 1.05, 1.0 + 1e-9, 2.0)?;
    let ks = p.i64_list("ks", &[0, 2, 8], 0, 1000)?;
    let n_trunc = p.i64("n_trunc", 256, 16, 4096)?;
    let samples = p.u64("samples", 300_000, 1000, 100_000_000)?;
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let mut verdict = true;
    for &k in &ks {
        let spec = CharFunctionSpec::new(ModeSet::AllExcept(k), n_trunc).without_tail();
        let cf = CharFunction::new(spec);
        let pk = invert_density(&cf, DEFAULT_X_MAX, DEFAULT_DX, DEFAULT_XI_MAX, DEFAULT_DXI)
            .map_err(|e| e.to_string())?;
        let (quad, limit) = if k == 0 {
            let p0 = default_curve(ModeSet::TailFrom(0));
            (shell_finite_s_k0(m, s, &pk), shell_limit_k0(m, &pk, &p0))
        } else {
            (shell_finite_s_k(m, k, s, &pk), shell_limit_k(m, k, &pk))
        };
        let mc = shell_pair_mc(m, k, s, n_trunc, samples, seed, threads);
        let combined = (mc.stderr.powi(2) + (5e-3 * quad).powi(2)).sqrt();
        verdict &= (mc.value - quad).abs() < 3.0 * combined;
        rows.push(format!(
            "{k},{},{},{quad},{},{}",
            mc.value, mc.stderr, limit.limit, limit.lower_bound
        ));
        entries.push(json!({
            "k": k,
            "mc": estimate_json(&mc),
            "finite_s_quadrature": quad,
            "limit": limit.limit,
            "lower_bound": limit.lower_bound,
        }));
    }
    Ok(Outcome {
        verdict,
        results: json!({ "shells": entries, "s": s, "m": m }),
        csv: Some(Csv {
            header: "k,mc,mc_stderr,quadrature,limit,lower_bound",
            rows,
        }),
    })
}

fn run_covariance(p: &Params, seed: u64, _threads: usize) -> Result<Outcome, String> {
    let m = p.f64("m", 1.0, 0.01, 10.0)?;
    let pp = p.f64("p", 1.0, 0.01, 4.0)?;
    let ks = p.i64_list("ks", &[1, 2, 4], 1, 64)?;
    let n_cut = p.i64("n_cut", 16, 2, 256)?;
    let samples = p.u64("samples", 200_000, 1000, 100_000_000)?;
    let gamma_samples = p.u64("gamma_samples", 2_000_000, 1000, 100_000_000)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut verdict = true;
    for &k in &ks {
        for j in 1..=4usize {
            let rep = covariance_positivity(m, k, j, pp, n_cut, samples, seed);
            verdict &= rep.cov.value >= -4.0 * rep.cov.stderr;
            rows.push(format!(
                "{k},{j},{},{},{}",
                rep.cov.value, rep.cov.stderr, rep.accepted
            ));
            reports.push(serde_json::to_value(&rep).unwrap());
        }
    }
    let gamma = gamma_cov_oracle(gamma_samples, seed.wrapping_add(1));
    verdict &= (gamma.value - 12.0).abs() < 0.01 * 12.0 + 3.0 * gamma.stderr;
    Ok(Outcome {
        verdict,
        results: json!({
            "covariances": reports,
            "gamma_oracle": estimate_json(&gamma),
            "gamma_exact": 12.0,
        }),
        csv: Some(Csv {
            header: "k,j,cov,stderr,accepted",
            rows,
        }),
    })
}

fn run_exp_moment(p: &Params, seed: u64, _threads: usize) -> Result<Outcome, String> {
    let m = p.f64("m", 0.5, 0.01, 2.0)?;
    let pp = p.f64("p", 1.0, 0.01, 4.0)?;
    let n_values = p.i64_list("n_values", &[16, 32, 64], 2, 1024)?;
    let samples = p.u64("samples", 50_000, 1000, 100_000_000)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut verdict = true;
    for &n in &n_values {
        let rep = exp_moment_fixed_mass(m, pp, n, samples, seed).map_err(|e| e.to_string())?;
        verdict &= rep.ess >= 1000.0;
        for &(eps, est) in &rep.per_eps {
            verdict &= est.value.is_finite();
            rows.push(format!("{n},{eps},{},{},{}", est.value, est.stderr, rep.ess));
        }
        let (_, mid) = rep.per_eps[1];
        verdict &= mid.value + 3.0 * mid.stderr >= rep.jensen_floor;
        reports.push(serde_json::to_value(&rep).unwrap());
    }
    Ok(Outcome {
        verdict,
        results: json!({ "reports": reports }),
        csv: Some(Csv {
            header: "N,eps,value,stderr,ess",
            rows,
        }),
    })
}

pub fn invariance_observables() -> Vec<CylinderObservable> {
    vec![
        CylinderObservable::new("u_hat_1_sq", 1, |u| u.weighted_coefficient(1).norm_sqr()),
        CylinderObservable::new("l4_norm_4", 16, |u| {
            let a = u.weighted_coeffs();
            let a2 = dnls_lab::functionals::convolve(&a, &a);
            a2.iter().map(|z| z.norm_sqr()).sum()
        }),
        CylinderObservable::new("re_u_hat_0", 0, |u| u.g(0).re),
    ]
}

fn run_invariance(p: &Params, seed: u64, _threads: usize) -> Result<Outcome, String> {
    let m = p.f64("m", 1.0, 0.01, 10.0)?;
    let n_max = p.i64("n_max", 16, 2, 64)?;
    let t = p.f64("t", 1.0, 0.01, 10.0)?;
    let samples = p.u64("samples", 2_000, 100, 10_000_000)?;
    let rep = invariance_harness(m, n_max, t, samples, seed, &invariance_observables());
    let conservative = rep.max_energy_drift < 1e-6;
    // the raw Galerkin truncation is not proven to preserve the truncated
    // Gibbs weight (the invariance proof passes through a gauged equation);
    // when energy visibly drifts, the z-scores are reported as measurements
    // and the verdict rests on mass conservation alone
    let verdict = if conservative {
        rep.observables.iter().all(|o| o.z <= 5.0)
    } else {
        rep.max_mass_drift < 1e-8
    };
    Ok(Outcome {
        verdict,
        results: json!({
            "report": serde_json::to_value(&rep).unwrap(),
            "energy_conservative": conservative,
            "gauged_truncation_open_question": !conservative,
        }),
        csv: None,
    })
}
