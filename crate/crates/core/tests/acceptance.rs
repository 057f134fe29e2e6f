//! Acceptance suite: one PASS/FAIL line per criterion.

use std::ffi::OsString;
use std::path::Path;
use std::time::{Duration, Instant};

use lifebranch::extinction::{
    extinction_curve, extinction_prob, mean_y_by_difference, phi_limit, psi_with,
};
use lifebranch::model::fixtures::{exp_base, exp_base_doc, exp_pois, subcritical};
use lifebranch::model::{ModelSpec, TestFunction};
use lifebranch::renewal::{
    limit_functionals, malthusian, mean_measure, mean_semigroup, second_moment, ReproKernel,
};
use lifebranch::sim::{ensemble, sample_y_many};
use lifebranch::verify::stats::mean_se;
use lifebranch::verify::{
    check_clt_with, check_distributional_with, check_first_moments_with, check_variance_with, CheckKind,
    CheckReport,
};

type Outcome = Result<String, String>;

const SEED: u64 = 42;
const MAX_POP: usize = 1_000_000;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let el = start.elapsed();
    ensure(el < limit, format!("took {el:.1?}, limit {limit:?}"))
}

fn report<'a>(reports: &'a [CheckReport], name: &str) -> Result<&'a CheckReport, String> {
    reports.iter().find(|r| r.name == name).ok_or_else(|| format!("missing check {name}"))
}

fn c1_malthusian() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    for (label, spec) in [("EXP-BASE", exp_base()), ("EXP-POIS", exp_pois())] {
        let sol = malthusian(&spec).map_err(|e| e.to_string())?;
        ensure((sol.alpha_tilde - 1.0).abs() < 1e-8, format!("{label}: alpha_tilde = {}", sol.alpha_tilde))?;
        ensure(sol.residual < 1e-10, format!("{label}: residual {:e}", sol.residual))?;
        notes.push(format!("{label} alpha_tilde={:.12}", sol.alpha_tilde));
    }
    within_time(start, Duration::from_secs(1))?;
    Ok(notes.join(", "))
}

fn max_rel_error(spec: &ModelSpec, t_end: f64) -> f64 {
    let grid = mean_measure(spec);
    grid.t
        .iter()
        .zip(&grid.m_f)
        .filter(|(t, _)| **t <= t_end + 1e-9)
        .map(|(t, m)| (m - t.exp()).abs() / t.exp())
        .fold(0.0, f64::max)
}

fn c2_renewal_mean() -> Outcome {
    let start = Instant::now();
    let spec = exp_base();
    let err = max_rel_error(&spec, 10.0);
    ensure(err < 1e-3, format!("max relative error {err:e}"))?;
    within_time(start, Duration::from_secs(5))?;
    let with_h = |h: f64| {
        let mut s = exp_base();
        s.numerics.h = h;
        s.numerics.horizon = 10.0;
        max_rel_error(&s, 10.0)
    };
    let (e1, e2) = (with_h(0.04), with_h(0.02));
    let order = (e1 / e2).log2();
    ensure((1.7..2.3).contains(&order), format!("observed order {order:.3}"))?;
    Ok(format!("max rel error {err:.2e}, observed order {order:.2}"))
}

fn c3_limit_functionals() -> Outcome {
    let spec = exp_base();
    let sol = malthusian(&spec).map_err(|e| e.to_string())?;
    let lf = limit_functionals(&spec, &sol);
    let tol = 1e-5;
    ensure((lf.n1 - 1.0).abs() < tol, format!("n1 = {}", lf.n1))?;
    ensure((lf.a_f - 1.0).abs() < tol, format!("a(1) = {}", lf.a_f))?;
    ensure((lf.v_mass - 1.0).abs() < tol, format!("<G,V> = {}", lf.v_mass))?;
    for x in [0.5f64, 1.0, 2.0] {
        let a = lf.a_curve(x);
        ensure((a - (1.0 - (-x).exp())).abs() < tol, format!("A({x}) = {a}"))?;
        let v = lf.v(x);
        ensure((v - 2.0 * (1.0 - (-x).exp())).abs() < tol, format!("V({x}) = {v}"))?;
    }
    for (label, spec) in [("EXP-BASE", exp_base()), ("EXP-POIS", exp_pois())] {
        for f in [TestFunction::One, TestFunction::Indicator { x: 1.0 }, TestFunction::Expdecay { rate: 0.5 }] {
            let s = spec.with_f(f);
            let sol = malthusian(&s).map_err(|e| e.to_string())?;
            let lf = limit_functionals(&s, &sol);
            let d = (lf.a_f - lf.n1 * lf.cap_a_f).abs();
            ensure(d < 1e-10, format!("{label}: |a(f) - n1 A(f)| = {d:e}"))?;
        }
    }
    Ok(format!("n1={:.8}, <G,V>={:.8}", lf.n1, lf.v_mass))
}

fn c4_eigen_relation() -> Outcome {
    let base = exp_base();
    let sol = malthusian(&base).map_err(|e| e.to_string())?;
    let lf = limit_functionals(&base, &sol);
    let spec = base.with_f(lf.v_table());
    let grid = mean_measure(&spec);
    let mut worst: f64 = 0.0;
    for k in 0..=16 {
        let t = 0.5 * k as f64;
        for x in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let lhs = mean_semigroup(&spec, &grid, t, x).map_err(|e| e.to_string())?;
            let rhs = (sol.alpha_tilde * t).exp() * lf.v(x);
            worst = worst.max((lhs - rhs).abs() / rhs);
        }
    }
    ensure(worst < 1e-3, format!("max relative error {worst:e}"))?;
    Ok(format!("max relative error {worst:.2e}"))
}

fn c5_extinction() -> Outcome {
    let start = Instant::now();
    let base = extinction_curve(&exp_base()).map_err(|e| e.to_string())?;
    ensure((base.q - 0.5).abs() < 1e-9, format!("EXP-BASE q = {}", base.q))?;
    let pois = extinction_curve(&exp_pois()).map_err(|e| e.to_string())?;
    ensure((pois.q - 0.605).abs() < 1e-3, format!("EXP-POIS q = {}", pois.q))?;
    // independent oracle: bisection on 1/(3 − 2e^{s−1}) = s
    let (mut lo, mut hi) = (0.0f64, 0.9f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 1.0 / (3.0 - 2.0 * (mid - 1.0).exp()) - mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    ensure((pois.q - lo).abs() < 1e-9, format!("EXP-POIS q = {} vs oracle {lo}", pois.q))?;
    for (label, r) in [("EXP-BASE", &base), ("EXP-POIS", &pois)] {
        let c = r.q_curve.as_ref().ok_or("no curve")?;
        ensure(c.windows(2).all(|w| w[1] >= w[0]), format!("{label}: q(t) decreases"))?;
        ensure(c.iter().all(|&v| v <= r.q), format!("{label}: q(t) exceeds q"))?;
    }
    let sub = extinction_prob(&subcritical()).map_err(|e| e.to_string())?;
    ensure(sub.q == 1.0, format!("subcritical q = {}", sub.q))?;
    within_time(start, Duration::from_secs(5))?;
    Ok(format!("q_base={:.12}, q_pois={:.12}", base.q, pois.q))
}

fn c6_limit_law() -> Outcome {
    let spec = exp_base();
    let sol = malthusian(&spec).map_err(|e| e.to_string())?;
    let curve = phi_limit(&spec, &sol, &[0.25, 1.0, 4.0, 100.0]).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for theta in [0.25, 1.0, 4.0] {
        let exact = 0.5 + 0.25 / (0.5 + theta);
        worst = worst.max((curve.value_at(theta) - exact).abs());
    }
    ensure(worst < 5e-3, format!("max deviation {worst:e}"))?;
    let rmax = curve.residual.iter().copied().fold(0.0, f64::max);
    ensure(rmax < 1e-2, format!("max residual {rmax:e}"))?;
    let tail = (curve.value_at(100.0) - curve.q).abs();
    ensure(tail < 5e-3, format!("phi(100) - q = {tail:e}"))?;
    Ok(format!("max deviation {worst:.2e}, max residual {rmax:.2e}, tail gap {tail:.2e}"))
}

fn c7_psi_y() -> Outcome {
    let start = Instant::now();
    let spec = exp_base();
    let sol = malthusian(&spec).map_err(|e| e.to_string())?;
    let slope = mean_y_by_difference(&spec, &sol, 1e-4);
    ensure((slope - 1.0).abs() < 1e-4, format!("E Y slope {slope}"))?;
    let ys = sample_y_many(&spec, &sol, SEED, 100_000);
    let (m, se) = mean_se(&ys);
    ensure(((m - 1.0) / se).abs() < 4.0, format!("mean Y {m} (se {se})"))?;
    let kernel = ReproKernel::new(&spec);
    for j in -12..=8 {
        let u = 10f64.powf(j as f64 / 2.0);
        let p = psi_with(&spec, &sol, &kernel, u).map_err(|e| e.to_string())?;
        ensure(p >= 0.0, format!("psi({u}) = {p}"))?;
    }
    let small = psi_with(&spec, &sol, &kernel, 1e-6).map_err(|e| e.to_string())?;
    ensure(small < 1e-4, format!("psi(1e-6) = {small}"))?;
    within_time(start, Duration::from_secs(10))?;
    Ok(format!("slope={slope:.8}, mean Y={m:.4}±{se:.4}, psi(1e-6)={small:.2e}"))
}

fn c8_first_moments() -> Outcome {
    let start = Instant::now();
    let spec = exp_base();
    let sol = malthusian(&spec).map_err(|e| e.to_string())?;
    let reps = check_first_moments_with(&spec, &sol, &[2.0, 4.0, 5.0, 6.0, 8.0], 10_000, 10_000, SEED, MAX_POP)
        .map_err(|e| e.to_string())?;
    let pop = report(&reps, "first_moment[t=5]")?;
    ensure((pop.target.unwrap() - 5f64.exp()).abs() / 5f64.exp() < 1e-3, "M_1(5) target is not e^5")?;
    ensure(pop.pass, format!("mean population at t=5: z = {:.2}", pop.statistic))?;
    for t in [2, 4, 6, 8] {
        let r = report(&reps, &format!("martingale[t={t}]"))?;
        ensure(r.pass, format!("martingale at t={t}: z = {:.2}", r.statistic))?;
    }
    let xi = report(&reps, "offspring_mean")?;
    ensure((xi.target.unwrap() - 2.0).abs() < 1e-6 && xi.pass, format!("xi1 mean z = {:.2}", xi.statistic))?;
    within_time(start, Duration::from_secs(60))?;
    Ok(format!("z(pop,5)={:.2}, z(xi1)={:.2}", pop.statistic, xi.statistic))
}

fn c9_second_moment() -> Outcome {
    let start = Instant::now();
    let spec = exp_base();
    let sol = malthusian(&spec).map_err(|e| e.to_string())?;
    let oracle = 3.0 * (8f64.exp() - 4f64.exp());
    let grid = mean_measure(&spec);
    let sm = second_moment(&spec, &sol, &grid).map_err(|e| e.to_string())?;
    let solver = sm.var[grid.node(4.0).map_err(|e| e.to_string())?];
    let rel = (solver - oracle).abs() / oracle;
    ensure(rel < 0.01, format!("solver {solver} vs oracle {oracle}"))?;
    let r = check_variance_with(&spec, &sol, 4.0, 10_000, SEED, MAX_POP).map_err(|e| e.to_string())?;
    ensure(r.pass, format!("target outside bootstrap interval: {}", r.note.clone().unwrap_or_default()))?;
    within_time(start, Duration::from_secs(60))?;
    Ok(format!("solver rel error {rel:.2e}, sample variance {:.1}", r.estimate))
}

fn c10_age_distribution() -> Outcome {
    let start = Instant::now();
    let spec = exp_base();
    let sol = malthusian(&spec).map_err(|e| e.to_string())?;
    let ind = TestFunction::Indicator { x: 1.0 };
    let runs = ensemble(&spec, &sol, SEED, 0, 5000, &[10.0], MAX_POP, |_, r| {
        let s = &r.snapshots[0];
        (r.truncated || s.alive() == 0).then_some(f64::NAN).unwrap_or_else(|| s.sum(|x| ind.eval(x)) / s.alive() as f64)
    });
    let xs: Vec<f64> = runs.into_iter().filter(|v| v.is_finite()).collect();
    let (m, se) = mean_se(&xs);
    let target = 1.0 - (-1f64).exp();
    let z = (m - target) / se;
    ensure(z.abs() < 4.0, format!("mean {m} (se {se}), z = {z:.2}"))?;
    within_time(start, Duration::from_secs(60))?;
    Ok(format!("{} survivors, mean {m:.5}, z={z:.2}", xs.len()))
}

fn c11_clt() -> Outcome {
    let start = Instant::now();
    let spec = exp_base();
    let sol = malthusian(&spec).map_err(|e| e.to_string())?;
    let reps = check_clt_with(&spec, &sol, 8.0, 2.0, 6.0, 2000, SEED, MAX_POP).map_err(|e| e.to_string())?;
    let ks = &reps[0];
    ensure(ks.kind == CheckKind::Pass && ks.n == 2000, "KS check did not run on 2000 samples")?;
    ensure(ks.pass, format!("KS rejects: {}", ks.note.clone().unwrap_or_default()))?;
    let v6 = report(&reps, "clt_infinite[t=6]")?;
    let v8 = report(&reps, "clt_infinite[t=8]")?;
    ensure(v8.estimate > v6.estimate, "empirical variance does not grow")?;
    ensure(v8.note.as_deref().unwrap_or("").contains("divergent"), "D_f not flagged divergent")?;
    within_time(start, Duration::from_secs(300))?;
    Ok(format!("{}; var6={:.0}, var8={:.0}", ks.note.clone().unwrap_or_default(), v6.estimate, v8.estimate))
}

fn c12_gf_discrimination() -> Outcome {
    let spec = exp_pois();
    let sol = malthusian(&spec).map_err(|e| e.to_string())?;
    let reps = check_distributional_with(&spec, &sol, 6.0, &[], 10_000, SEED, MAX_POP).map_err(|e| e.to_string())?;
    let mut max_poisson: f64 = 0.0;
    for s in ["0.3", "0.6", "0.9"] {
        let c = report(&reps, &format!("offspring_gf[compound,s={s}]"))?;
        ensure(c.pass, format!("compound mode rejected at s={s}: z = {:.2}", c.statistic))?;
        let p = report(&reps, &format!("offspring_gf[poisson,s={s}]"))?;
        max_poisson = max_poisson.max(p.statistic.abs());
    }
    ensure(max_poisson > 6.0, format!("Poisson form deviates by at most {max_poisson:.2} SE"))?;
    Ok(format!("max |z| against the Poisson form {max_poisson:.1}"))
}

fn cli(args: &[&str]) -> i32 {
    let mut argv: Vec<OsString> = vec!["lifebranch".into()];
    argv.extend(args.iter().map(OsString::from));
    lifebranch::cli::run_cli(argv)
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| !n.starts_with("manifest_"))
        .map(|n| {
            let bytes = std::fs::read(dir.join(&n)).unwrap();
            (n, bytes)
        })
        .collect();
    out.sort();
    out
}

fn c13_reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut doc = exp_base_doc();
    doc.sim.distributional_time = 6.0;
    doc.sim.clt_time = 6.0;
    doc.sim.clt_compare_time = 4.0;
    doc.sim.clt_samples = 300;
    doc.sim.y_samples = 20_000;
    let config = tmp.path().join("config.json");
    std::fs::write(&config, serde_json::to_string(&doc).unwrap()).map_err(|e| e.to_string())?;
    let config = config.to_string_lossy().into_owned();
    let mut dirs = Vec::new();
    for (k, threads) in ["1", "3", "1"].iter().enumerate() {
        let out = tmp.path().join(format!("run{k}"));
        let out_s = out.to_string_lossy().into_owned();
        let base = ["--config", &config, "--out", &out_s, "--seed", "42", "--trajectories", "2000", "--threads", threads];
        let code = cli(&[&["verify", "all"], &base[..]].concat());
        ensure(code == 0, format!("verify all exited with {code} (threads {threads})"))?;
        let code = cli(&[&["simulate"], &base[..]].concat());
        ensure(code == 0, format!("simulate exited with {code}"))?;
        dirs.push(out);
    }
    let first = data_files(&dirs[0]);
    ensure(first.len() >= 2, "no data files written")?;
    for d in &dirs[1..] {
        ensure(data_files(d) == first, format!("{} differs from {}", d.display(), dirs[0].display()))?;
    }
    Ok(format!("{} data files identical across 3 runs (threads 1, 3, 1)", first.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("Malthusian root", c1_malthusian),
        ("renewal mean", c2_renewal_mean),
        ("limit functionals", c3_limit_functionals),
        ("eigen-relation", c4_eigen_relation),
        ("extinction", c5_extinction),
        ("limit law", c6_limit_law),
        ("psi and Y diagnostics", c7_psi_y),
        ("simulation first moments", c8_first_moments),
        ("second moment", c9_second_moment),
        ("age distribution", c10_age_distribution),
        ("fixed-window CLT", c11_clt),
        ("generating-function discrimination", c12_gf_discrimination),
        ("reproducibility", c13_reproducibility),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let el = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({el:.1}s): {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({el:.1}s): {why}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
