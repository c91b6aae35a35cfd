//! Acceptance run: one PASS/FAIL line per criterion, then a non-zero exit if
//! any criterion failed. Built with `harness = false` so the lines always
//! reach the test log.

use std::time::Instant;

use hermite_stokes::basis::{fourier_by_quadrature, fourier_diagonal};
use hermite_stokes::config::Config;
use hermite_stokes::dissipativity::{
    compute_thresholds, derive_thresholds, test_dissipativity, test_j_time_lipschitz, Dynamics, Ensemble, Force, ForceKind,
    ForceModel, Lambda0Rule, LinearForm, ModelSpec, Notion, ThresholdParams,
};
use hermite_stokes::estimates::{empirical_c, inverse_b_power, run_suite, Sampling, SuiteConfig};
use hermite_stokes::evolution::{
    detect_regularity, diagnostics_csv, heat_semigroup, in_ball_data, RegularityVerdict, SimConfig, Simulation,
};
use hermite_stokes::field::gradient;
use hermite_stokes::operators::{apply_a, apply_b, leray_project, nonlinear_c};
use hermite_stokes::rng;
use hermite_stokes::{random_field, BasisTable, FieldSpec, OpKind, SpectralField, Truncation};
use ndarray::Array3;
use num_complex::Complex64;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

struct Shared {
    t8: Truncation,
    c8: f64,
    ensemble: Vec<(RegularityVerdict, String)>,
}

fn raw_spec() -> FieldSpec {
    FieldSpec {
        divergence_free: false,
        ..FieldSpec::default()
    }
}

fn basis_exactness() -> Outcome {
    let b = BasisTable::new(16, 24)?;
    let gram_err = b
        .gram()
        .indexed_iter()
        .map(|((m, n), v)| (v - if m == n { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    // ½(⟨h′ₘ,h′ₙ⟩ + ⟨x hₘ, x hₙ⟩) by quadrature, compared with diag(n+½).
    let (v, d, x, w) = (b.values(), b.derivs(), b.points(), b.qweights());
    let mut eig_err: f64 = 0.0;
    for m in 0..16 {
        for n in 0..16 {
            let h: f64 = (0..24)
                .map(|j| 0.5 * w[j] * (d[(m, j)] * d[(n, j)] + x[j] * x[j] * v[(m, j)] * v[(n, j)]))
                .sum();
            let target = if m == n { n as f64 + 0.5 } else { 0.0 };
            eig_err = eig_err.max((h - target).abs());
        }
    }
    Ok((
        gram_err <= 1e-10 && eig_err <= 1e-10,
        format!("max |G-I| {gram_err:.2e}, oscillator residual {eig_err:.2e}"),
    ))
}

fn fourier_diagonality() -> Outcome {
    let n = 8;
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let mut r = rng::stream_rng(2, rng::stream_id(rng::purpose::SAMPLE, i));
        let c = Array3::from_shape_fn((n, n, n), |_| Complex64::new(rng::normal(&mut r), rng::normal(&mut r)));
        let q = fourier_by_quadrature(&c, 40)?;
        let d = fourier_diagonal(&c);
        let err = (&q - &d).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let scale = d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(err / scale);
    }
    Ok((
        worst <= 1e-7,
        format!("worst relative error {worst:.2e} over 100 vectors at n_modes = 8"),
    ))
}

fn projection(s: &Shared) -> Outcome {
    let d = &s.t8.disc;
    let (mut idem, mut sym): (f64, f64) = (0.0, 0.0);
    for i in 0..100 {
        let u = random_field(1000 + i, raw_spec(), d)?;
        let v = random_field(5000 + i, raw_spec(), d)?;
        let pu = leray_project(&u, d)?;
        idem = idem.max((&leray_project(&pu, d)? - &pu).norm_h() / u.norm_h());
        let pv = leray_project(&v, d)?;
        sym = sym.max((pu.inner(&v) - u.inner(&pv)).abs() / (u.norm_h() * v.norm_h()));
    }
    let mut grad: f64 = 0.0;
    let n = d.n_modes();
    for i in 0..20 {
        let mut r = rng::stream_rng(3, rng::stream_id(rng::purpose::SAMPLE, i));
        let q = Array3::from_shape_fn((n, n, n), |(a, b, c)| {
            rng::normal(&mut r) / (1.0 + (a + b + c) as f64).powi(2)
        });
        let g = gradient(q.view(), d.id());
        grad = grad.max(leray_project(&g, d)?.norm_h() / g.norm_h());
    }
    Ok((
        idem <= 1e-9 && sym <= 1e-9 && grad <= 1e-6,
        format!("|P²-P| {idem:.2e}, |P*-P| {sym:.2e}, |P grad q|/|grad q| {grad:.2e}"),
    ))
}

fn operator_cross_validation() -> Outcome {
    let t = Truncation::build(6, None)?;
    let (mut ea, mut eb): (f64, f64) = (0.0, 0.0);
    for i in 0..20 {
        let u = t.sample(11, i, FieldSpec::default())?;
        let a = apply_a(&u, &t.disc)?;
        ea = ea.max((&a - &t.cache.dense_apply(OpKind::A, &u)?).norm_h() / a.norm_h());
        let b = apply_b(&u, &t.disc)?;
        eb = eb.max((&b - &t.cache.dense_apply(OpKind::B, &u)?).norm_h() / b.norm_h());
    }
    Ok((
        ea <= 1e-7 && eb <= 1e-7,
        format!("d_df {}, A mismatch {ea:.2e}, B mismatch {eb:.2e}", t.cache.d_df()),
    ))
}

fn inverse_power_bound(s: &Shared) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for beta in [0.5, 11.0 / 8.0] {
        let r = inverse_b_power(&s.t8, beta, Sampling::new(1000, 4))?;
        let bound = r.measured["bound"];
        let rel = (r.empirical_constant - bound).abs() / bound;
        ok &= r.violations == 0 && rel <= 1e-9;
        parts.push(format!(
            "beta {beta}: max {:.10e} vs bound {bound:.10e} (rel {rel:.1e}, random max {:.4e}, violations {})",
            r.empirical_constant, r.measured["max_random_ratio"], r.violations
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn trilinear_identities(s: &Shared) -> Outcome {
    let d = &s.t8.disc;
    let spec = FieldSpec::default();
    let (mut zero, mut skew): (f64, f64) = (0.0, 0.0);
    for i in 0..200 {
        let u = s.t8.sample(21, i, spec)?;
        let v = s.t8.sample(22, i, spec)?;
        let w = s.t8.sample(23, i, spec)?;
        let scale = u.norm_h() * v.norm_h() * w.norm_h();
        let cuv = nonlinear_c(&u, &v, d)?;
        let cuw = nonlinear_c(&u, &w, d)?;
        zero = zero.max(cuv.inner(&v).abs() / (u.norm_h() * v.norm_h() * v.norm_h()));
        skew = skew.max((cuv.inner(&w) + cuw.inner(&v)).abs() / scale);
    }
    Ok((
        zero <= 1e-8 && skew <= 1e-8,
        format!("<C(u,v),v> {zero:.2e}, skew residual {skew:.2e}"),
    ))
}

fn threshold_algebra() -> Outcome {
    let (c, a, lambda1, lambda0, eps) = (0.035, 1.86, 2.46, 40.0, 0.25);
    let mut root: f64 = 0.0;
    let mut unforced: f64 = 0.0;
    let mut mismatched = 0;
    for i in 0..10 {
        let nu = 0.05 * 2f64.powi(i);
        let base = compute_thresholds(nu, 0.0, c, a, lambda1, lambda0, eps, (None, 1.0))?;
        let d = base.delta;
        let closed = nu * lambda1.powf(1.0 + d) / (c * lambda0 * a.powf(d));
        unforced = unforced
            .max((base.u_plus.unwrap() - closed).abs() / closed)
            .max(base.u_minus.unwrap().abs());
        let f_crit = base.f_for_gamma(1.0);
        for j in 0..10 {
            let f = f_crit * 10f64.powf(-2.0 + 0.45 * j as f64);
            let p = compute_thresholds(nu, f, c, a, lambda1, lambda0, eps, (None, 1.0))?;
            if (p.gamma < 1.0) != (nu > p.viscosity_bound) || p.rejected != (p.gamma >= 1.0) {
                mismatched += 1;
            }
            if let (Some(lo), Some(hi)) = (p.u_minus, p.u_plus) {
                root = root.max(p.quadratic(lo).abs()).max(p.quadratic(hi).abs());
            }
        }
    }
    Ok((
        root <= 1e-12 && unforced <= 1e-12 && mismatched == 0,
        format!("root residual {root:.1e}, unforced closed-form error {unforced:.1e}, regime mismatches {mismatched}/100"),
    ))
}

fn model(s: &Shared, rule: Lambda0Rule) -> ModelSpec {
    ModelSpec {
        nu: 1.0,
        epsilon: 0.25,
        c: s.c8,
        lambda0_rule: rule,
        lambda1_override: None,
    }
}

/// Zero violations of the zero notion and the strong constant check, at γ = ½.
fn dissipativity_at(s: &Shared, rule: Lambda0Rule) -> Result<(bool, String), Box<dyn std::error::Error>> {
    let spec = model(s, rule);
    let (base, _) = derive_thresholds(&s.t8, &spec, 0.0)?;
    let fm = ForceModel {
        kind: ForceKind::Hoelder,
        amplitude: base.f_for_gamma(0.5),
        ..ForceModel::default()
    };
    let (p, _) = derive_thresholds(&s.t8, &spec, fm.f_sup())?;
    let force = fm.realize(&s.t8)?;
    let dy = Dynamics::new(&s.t8, &p, &force, LinearForm::Printed);
    let zero = test_dissipativity(&dy, Notion::ZeroDiss, Ensemble::new(500, 0))?;
    let strong = test_dissipativity(&dy, Notion::Strong, Ensemble::new(500, 0))?;
    let alpha = p.alpha_strong.unwrap();
    let ok = zero.violations == 0 && strong.alpha_measured >= 0.95 * alpha;
    Ok((
        ok,
        format!(
            "lambda0 {:.4e}, gamma {:.3}, zero-notion violations {}, strong alpha {:.3e} vs 0.95*{:.3e}",
            p.lambda0, p.gamma, zero.violations, strong.alpha_measured, alpha
        ),
    ))
}

fn dissipativity_suite(s: &Shared) -> Outcome {
    let (ok, detail) = dissipativity_at(s, Lambda0Rule::Envelope)?;
    let (lit_ok, lit) = dissipativity_at(s, Lambda0Rule::Indexed { n_sel: 1, omega: 1.0 })?;
    Ok((
        ok,
        format!(
            "c {:.4e}; envelope rule: {detail} | indexed rule (n_sel 1, omega 1, not the verdict): {} {lit}",
            s.c8,
            if lit_ok { "pass" } else { "fail" }
        ),
    ))
}

fn time_lipschitz(s: &Shared) -> Outcome {
    let spec = model(s, Lambda0Rule::Envelope);
    let fm = ForceModel {
        kind: ForceKind::Hoelder,
        amplitude: 1.0,
        theta: 0.5,
        ..ForceModel::default()
    };
    let (p, _) = derive_thresholds(&s.t8, &spec, fm.f_sup())?;
    let force = fm.realize(&s.t8)?;
    let dy = Dynamics::new(&s.t8, &p, &force, LinearForm::Printed);
    let r = test_j_time_lipschitz(&dy, 1000, 0, 1.0)?;
    Ok((
        r.violations == 0,
        format!(
            "1000 pairs, theta 1/2: violations {}, max ratio {:.4e}",
            r.violations, r.empirical_constant
        ),
    ))
}

fn unforced_params(s: &Shared) -> Result<ThresholdParams, Box<dyn std::error::Error>> {
    Ok(derive_thresholds(&s.t8, &model(s, Lambda0Rule::Envelope), 0.0)?.0)
}

fn run_to<'a>(
    t: &'a Truncation,
    force: &'a Force,
    p: Option<&ThresholdParams>,
    u0: SpectralField,
    dt: f64,
    t_end: f64,
) -> hermite_stokes::Result<Simulation<'a>> {
    let mut sim = Simulation::new(t, SimConfig::new(1.0, dt, t_end), force, p, u0)?;
    sim.run()?;
    Ok(sim)
}

fn evolution(s: &mut Shared) -> Outcome {
    let t = &s.t8;
    let p = unforced_params(s)?;
    let force = Force::zero(t);
    let mut notes = Vec::new();

    let zero = run_to(t, &force, Some(&p), SpectralField::zeros(t.disc.id()), 1e-3, 0.1)?;
    let fixed = zero.state().coeffs().iter().all(|&v| v == 0.0) && zero.rows().iter().all(|r| r.norm_h == 0.0);
    notes.push(format!("(a) zero stays zero: {fixed}"));

    let mut monotone = 0;
    s.ensemble.clear();
    for i in 0..20 {
        let u0 = in_ball_data(t, &p, 0, i, 1.0)?;
        let cfg = SimConfig {
            diagnostics_every: 10,
            ..SimConfig::new(1.0, 1e-3, 1.0)
        };
        let mut sim = Simulation::new(t, cfg, &force, Some(&p), u0)?;
        let blown = sim.run().is_err();
        let v = detect_regularity(sim.rows(), Some(&p), blown, true);
        let flux_ok = sim.rows().iter().all(|r| r.energy_flux <= 0.0);
        if v.energy_monotone && flux_ok {
            monotone += 1;
        }
        s.ensemble.push((v, diagnostics_csv(sim.rows())));
    }
    notes.push(format!("(b) monotone decay in {monotone}/20 runs"));

    let tiny = in_ball_data(t, &p, 0, 99, 1.0)?.scaled(1e-6);
    let lin = run_to(t, &force, None, tiny.clone(), 1e-3, 0.1)?;
    let heat = heat_semigroup(t, &tiny, 1.0, 0.1)?;
    let lin_err = (lin.state() - &heat).norm_h() / heat.norm_h();
    notes.push(format!("(c) heat-oracle error {lin_err:.2e}"));

    let u0 = t.sample(5, 0, FieldSpec::default())?;
    let u0 = u0.scaled(3.0 / u0.norm_h());
    let reference = run_to(t, &force, None, u0.clone(), 0.000625, 0.2)?.state().clone();
    let errs: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| run_to(t, &force, None, u0.clone(), dt, 0.2).map(|r| (r.state() - &reference).norm_h()))
        .collect::<hermite_stokes::Result<_>>()?;
    let orders = [(errs[0] / errs[1]).log2(), (errs[1] / errs[2]).log2()];
    let orders_ok = orders.iter().all(|o| (1.8..=2.2).contains(o));
    notes.push(format!("(d) orders {:.3}, {:.3}", orders[0], orders[1]));

    let again = {
        let u0 = in_ball_data(t, &p, 0, 0, 1.0)?;
        let cfg = SimConfig {
            diagnostics_every: 10,
            ..SimConfig::new(1.0, 1e-3, 1.0)
        };
        let mut sim = Simulation::new(t, cfg, &force, Some(&p), u0)?;
        sim.run()?;
        diagnostics_csv(sim.rows())
    };
    let identical = again == s.ensemble[0].1;
    notes.push(format!("(e) repeat run bit-identical: {identical}"));

    Ok((
        fixed && monotone == 20 && lin_err <= 1e-8 && orders_ok && identical,
        notes.join("; "),
    ))
}

fn regularity(s: &Shared) -> Outcome {
    if s.ensemble.is_empty() {
        return Ok((false, "ensemble missing".into()));
    }
    let blow_ups = s.ensemble.iter().filter(|(v, _)| v.blow_up).count();
    let growth = s.ensemble.iter().map(|(v, _)| v.norm_v_growth).fold(0.0, f64::max);
    let exits: usize = s.ensemble.iter().map(|(v, _)| v.ball_exits).sum();
    let ratio = s.ensemble.iter().filter_map(|(v, _)| v.max_ball_ratio).fold(0.0, f64::max);
    Ok((
        blow_ups == 0 && growth <= 2.0,
        format!("blow-ups {blow_ups}, max norm_V growth {growth:.4}, ball exits {exits}, max ball ratio {ratio:.4}"),
    ))
}

fn main() {
    let start = Instant::now();
    let cfg = Config::default();
    let shared = (|| -> Result<Shared, Box<dyn std::error::Error>> {
        let t8 = Truncation::build(8, None)?;
        let reports = run_suite(&t8, &SuiteConfig::new(cfg.estimate_samples, cfg.seed))?;
        let c8 = empirical_c(&reports).ok_or("no trilinear constant")?;
        Ok(Shared {
            t8,
            c8,
            ensemble: Vec::new(),
        })
    })();
    let mut shared = match shared {
        Ok(s) => s,
        Err(e) => {
            println!("setup failed: {e}");
            std::process::exit(1);
        }
    };
    println!(
        "setup: n_modes 8 truncation and estimate constant in {:.1}s",
        start.elapsed().as_secs_f64()
    );

    type Check = Box<dyn Fn(&mut Shared) -> Outcome>;
    let checks: Vec<(&str, f64, Check)> = vec![
        ("basis exactness", 1.0, Box::new(|_| basis_exactness())),
        ("Fourier diagonality", 30.0, Box::new(|_| fourier_diagonality())),
        ("Leray projection", 60.0, Box::new(|s| projection(s))),
        ("operator cross-validation", 120.0, Box::new(|_| operator_cross_validation())),
        ("inverse-power bound", 60.0, Box::new(|s| inverse_power_bound(s))),
        ("trilinear identities", 300.0, Box::new(|s| trilinear_identities(s))),
        ("threshold algebra", 1.0, Box::new(|_| threshold_algebra())),
        ("dissipativity suite", 600.0, Box::new(|s| dissipativity_suite(s))),
        ("time-Hoelder continuity of J", 120.0, Box::new(|s| time_lipschitz(s))),
        ("evolution", 900.0, Box::new(evolution)),
        ("regularity corroboration", 900.0, Box::new(|s| regularity(s))),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in checks.iter().enumerate() {
        let clock = Instant::now();
        let (ok, detail) = match check(&mut shared) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = clock.elapsed().as_secs_f64();
        let in_time = secs <= *budget;
        let pass = ok && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<29} {} ({secs:.2}s of {budget}s) {detail}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        checks.len() - failed,
        checks.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
