//! Subcommand bodies. Each returns a [`Report`] holding the table and one
//! verdict per comparison.

use std::time::Instant;

use ipsdual_core::duality::{check_lattice_duality, check_sir_duality};
use ipsdual_core::exact::{
    absorption_law, absorption_law_transient, correlation_direct, correlation_via_duality, lemma_bound_check,
    spectral_gap, stationary_lattice, transient, Series, StationaryMeasure,
};
use ipsdual_core::gdcp::{evolve_one_point, one_point_closed_form};
use ipsdual_core::generator::{fast_stirring_chain, DualConfiguration, Layer, LatticeModel, StirringConvention};
use ipsdual_core::lattice::{Configuration, DcpParams, GdcpParams, SirParams};
use ipsdual_core::mc::{burn_in_from_gap, LatticeEvent, LatticeSim, SirSim};
use ipsdual_core::sir::{
    cluster_indicator, dual_walk_transient, g_cluster, h_cluster, j_cluster, ClusterKind, SirConfiguration, SirState,
};
use ipsdual_core::small_lattice::{
    one_site_no_absorption, one_site_stationary, two_site_count_law_infinite, AbsorptionClosedFormN2,
    TwoSiteStationary,
};
use rayon::prelude::*;

use crate::config::RunSpec;
use crate::draws;
use crate::parallel::{par_estimate, par_estimate_vec, with_threads};
use crate::report::{num, Attachment, Report, Verdict};
use crate::CliError;

type Res<T> = Result<T, CliError>;

/// Dispatches `spec` to its subcommand on the configured thread pool.
pub fn run(spec: &RunSpec) -> Res<Report> {
    let threads: usize = spec.get("threads")?;
    with_threads(threads, || match spec.command.as_str() {
        "duality-check" => duality_check(spec),
        "stationary" => stationary(spec),
        "absorption" => absorption(spec),
        "correlate" => correlate(spec),
        "gdcp-profile" => gdcp_profile(spec),
        "gdcp-evolve" => gdcp_evolve(spec),
        "fast-stirring" => fast_stirring(spec),
        "sir-cluster" => sir_cluster(spec),
        "simulate" => simulate(spec),
        other => Err(CliError::Spec(format!("unknown subcommand {other}"))),
    })
}

fn gdcp_params(spec: &RunSpec) -> Res<GdcpParams> {
    let lambda: f64 = spec.get("lambda")?;
    let mu2: f64 = spec.get("mu2")?;
    let mu1 = match spec.str("mu1")? {
        "auto" => lambda + mu2,
        _ => spec.get("mu1")?,
    };
    Ok(GdcpParams::new(
        spec.get("alpha")?,
        spec.get("beta")?,
        spec.get("gamma")?,
        spec.get("delta")?,
        lambda,
        spec.get("diffusion")?,
        mu1,
        mu2,
    )?)
}

fn dcp_params(spec: &RunSpec) -> Res<DcpParams> {
    Ok(DcpParams::new(
        spec.get("alpha")?,
        spec.get("beta")?,
        spec.get("gamma")?,
        spec.get("delta")?,
        spec.get("lambda")?,
        spec.get("diffusion")?,
    )?)
}

fn lattice_model(spec: &RunSpec) -> Res<LatticeModel> {
    match spec.str("model")?.trim_end_matches("-dual") {
        "dcp" => Ok(LatticeModel::Dcp(dcp_params(spec)?)),
        "gdcp" => Ok(LatticeModel::Gdcp(gdcp_params(spec)?)),
        other => Err(CliError::Spec(format!("model `{other}` is not a lattice model"))),
    }
}

fn param_cells(m: &LatticeModel) -> Vec<String> {
    let v = match *m {
        LatticeModel::Dcp(p) => [p.alpha, p.beta, p.gamma, p.delta, p.lambda, p.diffusion, f64::NAN, f64::NAN],
        LatticeModel::Gdcp(p) => [p.alpha, p.beta, p.gamma, p.delta, p.lambda, p.diffusion, p.mu1, p.mu2],
    };
    v.iter().map(|&x| if x.is_nan() { String::new() } else { num(x) }).collect()
}

/// `empty`, `full`, a 0/1 string of length n, or a comma list of occupied sites.
pub fn parse_configuration(s: &str, n: usize) -> Res<Configuration> {
    let s = s.trim();
    let c = match s {
        "empty" => Configuration::empty(n),
        "full" => Configuration::full(n),
        _ if s.len() == n && n > 1 && s.chars().all(|c| c == '0' || c == '1') => {
            Configuration::from_sites(&s.bytes().map(|b| b - b'0').collect::<Vec<_>>())
        }
        _ => {
            let sites = s
                .split(',')
                .map(|x| x.trim().parse::<usize>().map_err(|e| CliError::Spec(format!("site `{x}`: {e}"))))
                .collect::<Res<Vec<_>>>()?;
            Configuration::from_occupied(n, &sites)
        }
    };
    Ok(c?)
}

fn config_text(c: &Configuration) -> String {
    c.sites().iter().map(|b| char::from(b'0' + b)).collect()
}

fn density(law: &[f64], n: usize) -> Vec<f64> {
    let mut rho = vec![0.0; n];
    for (w, p) in law.iter().enumerate() {
        for (x, r) in rho.iter_mut().enumerate() {
            if (w >> (n - 1 - x)) & 1 == 1 {
                *r += p;
            }
        }
    }
    rho
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn burn_in(spec: &RunSpec, model: &LatticeModel, n: usize) -> Res<f64> {
    match spec.str("t-burn")? {
        "auto" => Ok(burn_in_from_gap(spectral_gap(&model.build_primal(n)?)?)?),
        _ => spec.get("t-burn"),
    }
}

fn duality_check(spec: &RunSpec) -> Res<Report> {
    let model = spec.str("model")?.to_string();
    let (n, draws_n, cap, tol, seed): (usize, u64, usize, f64, u64) =
        (spec.get("n")?, spec.get("draws")?, spec.get("cap")?, spec.get("tol")?, spec.get("seed")?);
    let mut rep = Report::new(
        spec,
        &["draw", "alpha", "beta", "gamma", "delta", "lambda", "diffusion", "mu1", "mu2", "residual", "columns"],
    );
    let rows: Vec<(Vec<String>, f64)> = (0..draws_n)
        .into_par_iter()
        .map(|i| -> Res<(Vec<String>, f64)> {
            let mut rng = draws::draw_rng(seed, i);
            let mut cells = vec![i.to_string()];
            let (res, cols) = match model.as_str() {
                "sir" => {
                    let p = draws::sir(&mut rng);
                    let mut worst = 0.0f64;
                    let mut count = 0;
                    for len in 1..=n as u32 {
                        for layer in [Layer::G, Layer::J] {
                            let w = -2..=(len as i64 + 1);
                            worst = worst.max(check_sir_duality(w, 0, len, layer, &p)?);
                            count += 1;
                        }
                    }
                    let blank = String::new();
                    cells.extend([blank.clone(), num(p.beta_inf), num(p.gamma_rec), blank.clone()]);
                    cells.extend([blank.clone(), blank.clone(), blank.clone(), blank]);
                    (worst, count)
                }
                "dcp" | "gdcp" => {
                    let m = if model == "dcp" {
                        LatticeModel::Dcp(draws::dcp(&mut rng))
                    } else {
                        LatticeModel::Gdcp(draws::gdcp(&mut rng))
                    };
                    let r = check_lattice_duality(&m, n, cap)?;
                    cells.extend(param_cells(&m));
                    (r.residual, r.columns)
                }
                other => return Err(CliError::Spec(format!("model `{other}` has no duality check"))),
            };
            cells.push(num(res));
            cells.push(cols.to_string());
            Ok((cells, res))
        })
        .collect::<Res<Vec<_>>>()?;
    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    for (cells, _) in rows {
        rep.row(cells);
    }
    rep.verdict(Verdict::below("max_residual", worst, tol, format!("model={model} n={n} draws={draws_n}")));
    Ok(rep)
}

fn stationary(spec: &RunSpec) -> Res<Report> {
    let m = lattice_model(spec)?;
    let (n, tol): (usize, f64) = (spec.get("n")?, spec.get("tol")?);
    let mu = stationary_lattice(&m, n)?;
    let l = m.build_primal(n)?;
    let closed: Option<Vec<f64>> = match (m, n) {
        (LatticeModel::Dcp(p), 1) => Some(one_site_stationary(&p).to_vec()),
        (LatticeModel::Dcp(p), 2) => Some(TwoSiteStationary::new(&p).by_word().to_vec()),
        _ => None,
    };
    let mut rep = Report::new(spec, &["word", "configuration", "probability", "closed_form", "abs_error"]);
    let mut worst = 0.0f64;
    for (w, &p) in mu.probabilities.iter().enumerate() {
        let c = Configuration::from_word(n, w as u64)?;
        let (cf, err) = match &closed {
            Some(v) => {
                worst = worst.max((v[w] - p).abs());
                (num(v[w]), num((v[w] - p).abs()))
            }
            None => (String::new(), String::new()),
        };
        rep.row(vec![w.to_string(), config_text(&c), num(p), cf, err]);
    }
    rep.verdict(Verdict::below("balance_residual", mu.residual(&l), 1e-12, ""));
    if closed.is_some() {
        rep.verdict(Verdict::below("closed_form", worst, tol, format!("n={n}")));
    }
    if let (LatticeModel::Dcp(p), 2) = (m, n) {
        let (r1, r2, r12) = TwoSiteStationary::new(&p).moments();
        let d1 = correlation_direct(&mu, 2, &[1])?.value;
        let d2 = correlation_direct(&mu, 2, &[2])?.value;
        let d12 = correlation_direct(&mu, 2, &[1, 2])?.value;
        let e = [(r1 - d1).abs(), (r2 - d2).abs(), (r12 - d12).abs()].into_iter().fold(0.0, f64::max);
        rep.verdict(Verdict::below("moments", e, tol, "rho1(1), rho1(2), rho2(1,2)"));
    }
    Ok(rep)
}

fn absorption(spec: &RunSpec) -> Res<Report> {
    let m = lattice_model(spec)?;
    let (n, k_max, tol): (usize, usize, f64) = (spec.get("n")?, spec.get("k-max")?, spec.get("tol")?);
    let init = parse_configuration(spec.str("init")?, n)?;
    let law = absorption_law(&m, &init, k_max)?;
    let law_t = absorption_law_transient(&m, &init, k_max)?;
    let closed = match m {
        LatticeModel::Dcp(p) if p.beta == 0.0 && p.delta == 0.0 && n <= 2 => Some(p),
        _ => None,
    };
    let mut rep = Report::new(
        spec,
        &["k", "left_marginal", "right_marginal", "closed_form", "closed_form_printed", "abs_error"],
    );
    let mut worst = 0.0f64;
    let mut worst_printed = 0.0f64;
    for k in 0..=k_max {
        let left = law.left_marginal(k);
        let (cf, printed) = match closed {
            Some(p) if n == 1 => {
                let x0 = one_site_no_absorption(p.alpha, p.gamma);
                let v = match k {
                    0 => x0,
                    1 => 1.0 - x0,
                    _ => 0.0,
                };
                (Some(v), Some(v))
            }
            Some(p) => {
                let idx = match init.word() {
                    0b10 => Some(0),
                    0b11 => Some(1),
                    0b01 => Some(2),
                    _ => None,
                };
                let cf = AbsorptionClosedFormN2::new(p.alpha, p.gamma, p.lambda, p.diffusion);
                (idx.map(|i| cf.x(k)[i]), idx.map(|i| cf.x_quoted(k)[i]))
            }
            None => (None, None),
        };
        if let Some(v) = cf {
            worst = worst.max((v - left).abs());
        }
        if let Some(v) = printed {
            worst_printed = worst_printed.max((v - left).abs());
        }
        rep.row(vec![
            k.to_string(),
            num(left),
            num(law.right_marginal(k)),
            cf.map(num).unwrap_or_default(),
            printed.map(num).unwrap_or_default(),
            cf.map(|v| num((v - left).abs())).unwrap_or_default(),
        ]);
    }
    rep.verdict(Verdict::below("jump_chain_vs_transient", law.tv_distance(&law_t), 1e-10, "total variation"));
    if closed.is_some() && (n == 1 || init.word() != 0) {
        rep.verdict(Verdict::below("closed_form", worst, tol, format!("k<={k_max}")));
        rep.verdict(Verdict::info("printed_general_display_deviation", worst_printed, format!("k<={k_max}")));
    }
    rep.verdict(Verdict::info("tail_mass", law.tail, ""));
    Ok(rep)
}

fn correlate(spec: &RunSpec) -> Res<Report> {
    let m = lattice_model(spec)?;
    let (n, series_tol, tol, replicas, seed): (usize, f64, f64, u64, u64) =
        (spec.get("n")?, spec.get("series-tol")?, spec.get("tol")?, spec.get("replicas")?, spec.get("seed")?);
    let sites: Vec<usize> = spec.list("sites")?;
    let mut rep = Report::new(spec, &["route", "value", "error"]);

    let t0 = Instant::now();
    let mu = stationary_lattice(&m, n)?;
    let direct = correlation_direct(&mu, n, &sites)?;
    let t_direct = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let series = Series::new(series_tol).max_cap(spec.get("max-cap")?);
    let dual = correlation_via_duality(&m, n, &sites, series)?;
    let t_dual = t1.elapsed().as_secs_f64();
    rep.row(vec!["direct".into(), num(direct.value), "0".into()]);
    rep.row(vec!["duality".into(), num(dual.value), num(dual.error_bound)]);
    rep.verdict(Verdict::below("duality_vs_direct", (dual.value - direct.value).abs(), tol, format!("sites={sites:?}")));

    if replicas > 0 {
        let burn = burn_in(spec, &m, n)?;
        let rates = m.primal_rates()?;
        let empty = Configuration::empty(n)?;
        let est = par_estimate(replicas, seed, |r| {
            let mut sim = LatticeSim::new(rates, &empty, seed, r)?;
            sim.run_until(burn)?;
            Ok(sites.iter().all(|&x| sim.occupancy()[x - 1]) as u8 as f64)
        })?;
        rep.row(vec!["monte-carlo".into(), num(est.mean), num(est.std_error)]);
        let z = est.proportion_z_score(direct.value);
        rep.verdict(Verdict::check("mc_vs_direct", z <= 3.0, z, 3.0, format!("replicas={replicas} burn={burn}")));
    }
    for &y in &sites {
        let b = lemma_bound_check(&m, n, y, series)?;
        rep.verdict(Verdict::check(
            &format!("lemma_bound_site_{y}"),
            b.holds,
            b.rho1 - b.bound,
            0.0,
            format!("rho1={} bound={}", b.rho1, b.bound),
        ));
    }
    rep.verdict(Verdict::info("direct_seconds", t_direct, ""));
    rep.verdict(Verdict::info("duality_seconds", t_dual, ""));
    Ok(rep)
}

/// Per-site time-averaged density of `replicas` runs from the empty lattice.
pub fn mc_density(
    model: &LatticeModel,
    n: usize,
    burn: f64,
    window: f64,
    replicas: u64,
    seed: u64,
) -> Res<Vec<ipsdual_core::mc::Estimate>> {
    let rates = model.primal_rates()?;
    let empty = Configuration::empty(n)?;
    Ok(par_estimate_vec(replicas, seed, n, |r| {
        let mut sim = LatticeSim::new(rates, &empty, seed, r)?;
        sim.time_average(burn, burn + window)
    })?)
}

fn gdcp_profile(spec: &RunSpec) -> Res<Report> {
    let p = gdcp_params(spec)?;
    let m = LatticeModel::Gdcp(p);
    let (n, tol, replicas, seed): (usize, f64, u64, u64) =
        (spec.get("n")?, spec.get("tol")?, spec.get("replicas")?, spec.get("seed")?);
    let cf = one_point_closed_form(&p, n)?;
    let (cm, cp) = (p.c_minus().unwrap_or(1.0), p.c_plus().unwrap_or(1.0));
    let mut u_s = Vec::with_capacity(n);
    let mut v_s = Vec::with_capacity(n);
    for x in 1..=n {
        let law = absorption_law(&m, &Configuration::from_occupied(n, &[x])?, 1)?;
        u_s.push(law.left_marginal(1));
        v_s.push(law.right_marginal(1));
    }
    let rho_s: Vec<f64> = (0..n).map(|i| u_s[i] * (1.0 - cm) + v_s[i] * (1.0 - cp)).collect();
    let direct: Option<Vec<f64>> = match stationary_lattice(&m, n) {
        Ok(mu) => Some(density(&mu.probabilities, n)),
        Err(ipsdual_core::error::Error::MultipleClosedClasses(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let mc = if replicas > 0 {
        let burn = burn_in(spec, &m, n)?;
        let window = match spec.str("avg-window")? {
            "auto" => burn,
            _ => spec.get("avg-window")?,
        };
        Some(mc_density(&m, n, burn, window, replicas, seed)?)
    } else {
        None
    };
    let mut rep = Report::new(
        spec,
        &["x", "u_closed", "v_closed", "rho_closed", "u_absorption", "v_absorption", "rho_absorption", "rho_direct", "mc_mean", "mc_stderr"],
    );
    for i in 0..n {
        rep.row(vec![
            (i + 1).to_string(),
            num(cf.u[i]),
            num(cf.v[i]),
            num(cf.rho[i]),
            num(u_s[i]),
            num(v_s[i]),
            num(rho_s[i]),
            direct.as_ref().map(|d| num(d[i])).unwrap_or_default(),
            mc.as_ref().map(|e| num(e[i].mean)).unwrap_or_default(),
            mc.as_ref().map(|e| num(e[i].std_error)).unwrap_or_default(),
        ]);
    }
    let err = max_abs_diff(&cf.u, &u_s).max(max_abs_diff(&cf.v, &v_s)).max(max_abs_diff(&cf.rho, &rho_s));
    rep.verdict(Verdict::below("closed_vs_absorption", err, tol, format!("branch={:?}", cf.branch)));
    if let Some(d) = &direct {
        rep.verdict(Verdict::below("closed_vs_direct", max_abs_diff(&cf.rho, d), tol, ""));
    }
    if let Some(e) = &mc {
        let z = (0..n).map(|i| e[i].z_score(cf.rho[i], 0.0)).fold(0.0, f64::max);
        rep.verdict(Verdict::check("mc_vs_closed", z <= 3.0, z, 3.0, format!("replicas={replicas} max over sites")));
    }
    Ok(rep)
}

fn gdcp_evolve(spec: &RunSpec) -> Res<Report> {
    let p = gdcp_params(spec)?;
    let m = LatticeModel::Gdcp(p);
    let (n, tol, stol, replicas, seed): (usize, f64, f64, u64, u64) =
        (spec.get("n")?, spec.get("tol")?, spec.get("stationary-tol")?, spec.get("replicas")?, spec.get("seed")?);
    let times: Vec<f64> = spec.list("times")?;
    let l = m.build_primal(n)?;
    let init_s = spec.str("init")?;
    let stationary_init = init_s == "stationary";
    let (profile, law, init_cfg) = if stationary_init {
        let rho = one_point_closed_form(&p, n)?.rho;
        let mu: StationaryMeasure = stationary_lattice(&m, n)?;
        (rho, mu.probabilities, None)
    } else {
        let c = parse_configuration(init_s, n)?;
        let mut law = vec![0.0; 1 << n];
        law[c.word() as usize] = 1.0;
        (c.sites().iter().map(|&b| b as f64).collect(), law, Some(c))
    };
    let mut rep = Report::new(spec, &["t", "x", "ode", "exact", "abs_error", "mc_mean", "mc_stderr"]);
    let mut worst = 0.0f64;
    let mut drift = 0.0f64;
    let mut worst_z = 0.0f64;
    let rates = m.primal_rates()?;
    for (ti, &t) in times.iter().enumerate() {
        let ode = evolve_one_point(&p, &profile, t, t.max(1e-300))?.final_profile().to_vec();
        let exact = density(&transient(&l, &law, t)?, n);
        worst = worst.max(max_abs_diff(&ode, &exact));
        if stationary_init {
            drift = drift.max(max_abs_diff(&ode, &profile));
        }
        let mc = match (&init_cfg, replicas > 0) {
            (Some(c), true) => {
                let stream_base = ti as u64 * replicas;
                let est = par_estimate_vec(replicas, seed, n, |r| {
                    let mut sim = LatticeSim::new(rates, c, seed, stream_base + r)?;
                    sim.run_until(t)?;
                    Ok(sim.occupancy().iter().map(|&o| o as u8 as f64).collect())
                })?;
                for x in 0..n {
                    worst_z = worst_z.max(est[x].proportion_z_score(exact[x]));
                }
                Some(est)
            }
            _ => None,
        };
        for x in 0..n {
            rep.row(vec![
                num(t),
                (x + 1).to_string(),
                num(ode[x]),
                num(exact[x]),
                num((ode[x] - exact[x]).abs()),
                mc.as_ref().map(|e| num(e[x].mean)).unwrap_or_default(),
                mc.as_ref().map(|e| num(e[x].std_error)).unwrap_or_default(),
            ]);
        }
    }
    rep.verdict(Verdict::below("ode_vs_exact", worst, tol, format!("times={times:?}")));
    if stationary_init {
        rep.verdict(Verdict::below("stationary_drift", drift, stol, "max |g|"));
    }
    if init_cfg.is_some() && replicas > 0 {
        rep.verdict(Verdict::check("mc_vs_exact", worst_z <= 3.0, worst_z, 3.0, format!("replicas={replicas}")));
    }
    Ok(rep)
}

/// Particle-count law of a measure on {0,1}^n.
fn count_law(probabilities: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for (w, p) in probabilities.iter().enumerate() {
        out[(w as u64).count_ones() as usize] += p;
    }
    out
}

fn fast_stirring(spec: &RunSpec) -> Res<Report> {
    let p = dcp_params(spec)?;
    let (n, big_d, tol, big_tol): (usize, f64, f64, f64) =
        (spec.get("n")?, spec.get("big-d")?, spec.get("tol")?, spec.get("big-d-tol")?);
    let conv = spec.str("convention")?;
    let (want_printed, want_corrected) = match conv {
        "paper" => (true, false),
        "corrected" => (false, true),
        "both" => (true, true),
        other => return Err(CliError::Spec(format!("convention `{other}`"))),
    };
    let printed = fast_stirring_chain(&p, n, StirringConvention::Printed)?.stationary();
    let corrected = fast_stirring_chain(&p, n, StirringConvention::Corrected)?.stationary();
    let mut fast = p;
    fast.diffusion = big_d;
    let exact = count_law(&stationary_lattice(&LatticeModel::Dcp(fast), n)?.probabilities, n);
    let limit: Option<Vec<f64>> = (n == 2).then(|| two_site_count_law_infinite(&p).to_vec());
    let mut rep = Report::new(spec, &["k", "paper", "corrected", "limit", "exact_big_d"]);
    for k in 0..=n {
        rep.row(vec![
            k.to_string(),
            if want_printed { num(printed[k]) } else { String::new() },
            if want_corrected { num(corrected[k]) } else { String::new() },
            limit.as_ref().map(|l| num(l[k])).unwrap_or_default(),
            num(exact[k]),
        ]);
    }
    let reference = limit.clone().unwrap_or_else(|| exact.clone());
    if want_corrected {
        match &limit {
            Some(l) => rep.verdict(Verdict::below("corrected_vs_limit", max_abs_diff(&corrected, l), tol, "")),
            None => rep.verdict(Verdict::below("corrected_vs_exact_big_d", max_abs_diff(&corrected, &exact), big_tol, "")),
        }
    }
    if let Some(l) = &limit {
        rep.verdict(Verdict::below("exact_big_d_vs_limit", max_abs_diff(&exact, l), big_tol, format!("D={big_d}")));
    }
    if want_printed {
        rep.verdict(Verdict::info("paper_convention_deviation", max_abs_diff(&printed, &reference), "birth factor 1"));
    }
    Ok(rep)
}

/// Window, cluster query and closed-form oracle of a named fixture.
fn sir_fixture(spec: &mut RunSpec) -> Res<Option<fn(&SirParams, f64) -> f64>> {
    let preset: Option<(&str, i64, &str, fn(&SirParams, f64) -> f64)> = match spec.str("fixture")? {
        "single-s" => Some(("IIISIII", -3, "g", |p, t| (-2.0 * (p.beta_inf + p.gamma_rec) * t).exp())),
        "rsi" => Some(("RRSIRR", -2, "j", |p, t| (-(p.beta_inf + p.gamma_rec) * t).exp())),
        "custom" => None,
        other => return Err(CliError::Spec(format!("fixture `{other}`"))),
    };
    Ok(preset.map(|(w, lo, kind, f)| {
        spec.set("window", w);
        spec.set("lo", lo);
        spec.set("kind", kind);
        spec.set("outside", "R");
        spec.set("r", 0);
        spec.set("n", 1);
        f
    }))
}

fn parse_state(s: &str) -> Res<SirState> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(SirState::from_char(c)?),
        _ => Err(CliError::Spec(format!("state `{s}`"))),
    }
}

fn sir_cluster(spec: &RunSpec) -> Res<Report> {
    let mut spec = spec.clone();
    let oracle = sir_fixture(&mut spec)?;
    let p = SirParams::new(spec.get("beta")?, spec.get("gamma")?)?;
    let eta = SirConfiguration::parse(spec.get("lo")?, spec.str("window")?, parse_state(spec.str("outside")?)?)?;
    let (r, n, t, tol, replicas, seed): (i64, u32, f64, f64, u64, u64) = (
        spec.get("r")?,
        spec.get("n")?,
        spec.get("t")?,
        spec.get("series-tol")?,
        spec.get("replicas")?,
        spec.get("seed")?,
    );
    let kind = match spec.str("kind")? {
        "g" => ClusterKind::G,
        "j" => ClusterKind::J,
        "h" => ClusterKind::H,
        other => return Err(CliError::Spec(format!("cluster kind `{other}`"))),
    };
    let series = match kind {
        ClusterKind::G => g_cluster(&eta, &p, r, n as u64, t, tol)?,
        ClusterKind::J => j_cluster(&eta, &p, r, n as u64, t, tol)?,
        ClusterKind::H => h_cluster(&eta, &p, r, n as u64, t, tol, None)?,
    };
    let mut rep = Report::new(&spec, &["route", "value", "error"]);
    rep.row(vec!["series".into(), num(series.value), num(series.error)]);
    if let Some(f) = oracle {
        let v = f(&p, t);
        rep.row(vec!["closed".into(), num(v), "0".into()]);
        rep.verdict(Verdict::below("series_vs_closed", (series.value - v).abs(), 1e-12, ""));
    }
    let layer = match kind {
        ClusterKind::G => Some(Layer::G),
        ClusterKind::J => Some(Layer::J),
        ClusterKind::H => None,
    };
    if let Some(layer) = layer {
        let law = dual_walk_transient(&p, r, n, layer, t, tol)?;
        let mut v = 0.0;
        for (q, w) in &law.walkers {
            if let ipsdual_core::generator::SirDualState::Walker { r, n, layer } = *q {
                let k = if layer == Layer::G { ClusterKind::G } else { ClusterKind::J };
                v += w * cluster_indicator(&eta, r, n, k)? as u8 as f64;
            }
        }
        rep.row(vec!["dual-walk".into(), num(v), num(law.truncated)]);
        rep.verdict(Verdict::below("dual_walk_vs_series", (v - series.value).abs(), 1e-9, ""));
    }
    if replicas > 0 {
        let samples: Vec<(f64, bool)> = (0..replicas)
            .into_par_iter()
            .map(|rep_i| -> Res<(f64, bool)> {
                let mut sim = SirSim::new(p, eta.clone(), seed, rep_i)?;
                sim.run_until(t)?;
                Ok((cluster_indicator(sim.state(), r, n, kind)? as u8 as f64, sim.edge_touched()))
            })
            .collect::<Res<Vec<_>>>()?;
        let values: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let touched = samples.iter().filter(|s| s.1).count();
        let est = ipsdual_core::mc::Estimate::from_samples(&values, seed)?;
        rep.row(vec!["monte-carlo".into(), num(est.mean), num(est.std_error)]);
        let z = est.proportion_z_score(series.value);
        rep.verdict(Verdict::check("mc_vs_series", z <= 3.0, z, 3.0, format!("replicas={replicas}")));
        rep.verdict(Verdict::check("light_cone", touched == 0, touched as f64, 0.0, "edge infections"));
    }
    Ok(rep)
}

fn event_text(e: LatticeEvent) -> String {
    match e {
        LatticeEvent::Flip(x) => format!("flip:{x}"),
        LatticeEvent::Absorb { site, left: true } => format!("absorb-left:{site}"),
        LatticeEvent::Absorb { site, left: false } => format!("absorb-right:{site}"),
        LatticeEvent::Swap(x) => format!("swap:{x}"),
    }
}

fn simulate(spec: &RunSpec) -> Res<Report> {
    let model = spec.str("model")?.to_string();
    let (replicas, seed, t_end): (u64, u64, f64) = (spec.get("replicas")?, spec.get("seed")?, spec.get("t-end")?);
    let want_traj = spec.flag("trajectory")?;
    let mut rep = Report::new(spec, &["observable", "mean", "stderr", "replicas", "seed"]);
    let push = |rep: &mut Report, name: String, e: &ipsdual_core::mc::Estimate| {
        rep.row(vec![name, num(e.mean), num(e.std_error), e.replicas.to_string(), e.seed.to_string()]);
    };
    let mut traj: Vec<Vec<String>> = Vec::new();
    let reproducible;
    if model == "sir" {
        let p = SirParams::new(spec.get("beta")?, spec.get("gamma")?)?;
        let eta = SirConfiguration::parse(spec.get("lo")?, spec.str("init")?, parse_state(spec.str("outside")?)?)?;
        let len = eta.states().len();
        let run = |r: u64| -> ipsdual_core::error::Result<SirSim> {
            let mut sim = SirSim::new(p, eta.clone(), seed, r)?;
            sim.run_until(t_end)?;
            Ok(sim)
        };
        let est = par_estimate_vec(replicas, seed, 2 * len, |r| {
            let sim = run(r)?;
            let s = sim.state();
            let mut v: Vec<f64> = s.window().map(|x| (s.get(x) == SirState::I) as u8 as f64).collect();
            v.extend(s.window().map(|x| (s.get(x) == SirState::R) as u8 as f64));
            Ok(v)
        })?;
        for (i, x) in eta.window().enumerate() {
            push(&mut rep, format!("infected[{x}]"), &est[i]);
        }
        for (i, x) in eta.window().enumerate() {
            push(&mut rep, format!("recovered[{x}]"), &est[len + i]);
        }
        reproducible = run(0)?.outcome() == run(0)?.outcome();
        if want_traj {
            let mut sim = SirSim::new(p, eta.clone(), seed, 0)?;
            traj.push(vec!["0".into(), "init".into(), sim.state().window_index().to_string()]);
            loop {
                let mut probe = sim.clone();
                match probe.step() {
                    Some(x) if probe.time() <= t_end => {
                        sim = probe;
                        traj.push(vec![num(sim.time()), format!("site:{x}"), sim.state().window_index().to_string()]);
                    }
                    _ => break,
                }
            }
        }
    } else {
        let m = lattice_model(spec)?;
        let n: usize = spec.get("n")?;
        let init = parse_configuration(spec.str("init")?, n)?;
        if model.ends_with("-dual") {
            let max_steps: u64 = spec.get("max-steps")?;
            let rates = m.dual_rates()?;
            let z = DualConfiguration::new(0, init.clone(), 0);
            let est = par_estimate_vec(replicas, seed, 3, |r| {
                let mut sim = LatticeSim::from_dual(rates, &z, seed, r)?;
                if !sim.run_until_extinct(max_steps) {
                    return Err(ipsdual_core::error::Error::StepBudget(sim.events()));
                }
                let (a, b) = sim.sinks();
                Ok(vec![sim.time(), a as f64, b as f64])
            })?;
            push(&mut rep, "extinction_time".into(), &est[0]);
            push(&mut rep, "left_sink".into(), &est[1]);
            push(&mut rep, "right_sink".into(), &est[2]);
            let once = || -> Res<_> {
                let mut sim = LatticeSim::from_dual(rates, &z, seed, 0)?;
                sim.run_until_extinct(max_steps);
                Ok(sim.outcome())
            };
            reproducible = once()? == once()?;
            if want_traj {
                let mut sim = LatticeSim::from_dual(rates, &z, seed, 0)?;
                traj.push(vec!["0".into(), "init".into(), sim.word().to_string()]);
                while sim.particle_count() > 0 && sim.events() < max_steps {
                    let Some(e) = sim.step() else { break };
                    traj.push(vec![num(sim.time()), event_text(e), sim.word().to_string()]);
                }
            }
        } else {
            let rates = m.primal_rates()?;
            let est = par_estimate_vec(replicas, seed, n + 1, |r| {
                let mut sim = LatticeSim::new(rates, &init, seed, r)?;
                sim.run_until(t_end)?;
                let mut v: Vec<f64> = sim.occupancy().iter().map(|&o| o as u8 as f64).collect();
                v.push(sim.particle_count() as f64);
                Ok(v)
            })?;
            for x in 0..n {
                push(&mut rep, format!("density[{}]", x + 1), &est[x]);
            }
            push(&mut rep, "particles".into(), &est[n]);
            let once = || -> Res<_> {
                let mut sim = LatticeSim::new(rates, &init, seed, 0)?;
                sim.run_until(t_end)?;
                Ok(sim.outcome())
            };
            reproducible = once()? == once()?;
            if want_traj {
                let mut sim = LatticeSim::new(rates, &init, seed, 0)?;
                traj.push(vec!["0".into(), "init".into(), sim.word().to_string()]);
                loop {
                    let mut probe = sim.clone();
                    match probe.step() {
                        Some(e) if probe.time() <= t_end => {
                            sim = probe;
                            traj.push(vec![num(sim.time()), event_text(e), sim.word().to_string()]);
                        }
                        _ => break,
                    }
                }
            }
        }
    }
    rep.verdict(Verdict::check("replica_reproducible", reproducible, reproducible as u8 as f64, 1.0, "replica 0 rerun"));
    if want_traj {
        rep.attachments.push(Attachment {
            suffix: "trajectory".into(),
            columns: vec!["t".into(), "event".into(), "state_index".into()],
            rows: traj,
        });
    }
    Ok(rep)
}
