use std::path::Path;

use projenergy::energy::{conjectured_value_unchecked, energy as energy_of, Convention, Particles};
use projenergy::equivalence::is_in_pdelta;
use projenergy::geometry::{exp_map, random_tangent_in_ball};
use projenergy::measures::{equidistributed_basis, random_configuration};
use projenergy::optimize::{
    aggregation_constant, estimate_threshold, maximize_particles, stability_experiment, AscentOptions,
    Verdict, ORTHOGONAL_SUPPORT_TOL,
};
use projenergy::rng::stream;
use projenergy::transport::distance;
use projenergy::verify::{chain_check, frame_bound_check, majorization_check, sample_uniform_moments};
use projenergy::{DiscreteMeasure, KernelSpec, SpherePoint};

use crate::args::{
    AggregationArgs, AscentArgs, ChainArgs, ConventionArg, EnergyArgs, FrameArgs, MajorizationArgs,
    OptimizeArgs, ScanArgs, StabilityArgs, Suite, TransportArgs, WeightsArg,
};
use crate::output::{file_float, term_float, Sink};
use crate::Failure;

type Outcome = Result<bool, Failure>;

fn load(path: &Path) -> Result<DiscreteMeasure, Failure> {
    DiscreteMeasure::load(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn ascent_options(a: &AscentArgs) -> AscentOptions {
    AscentOptions {
        restarts: a.restarts,
        max_iters: a.max_iters,
        seed: a.seed,
        ..AscentOptions::default()
    }
}

fn pass_word(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

pub fn energy(a: &EnergyArgs, sink: &mut Sink) -> Outcome {
    let mu = load(&a.measure)?;
    let spec = KernelSpec::lambda(a.alpha)?;
    let report = energy_of(&spec, &mu, a.convention.into())?;
    let convention = match a.convention {
        ConventionArg::Half => "half",
        ConventionArg::Plain => "plain",
    };
    say!("energy {}", term_float(report.value));
    say!("convention {convention}");
    say!("kernel lambda alpha={}", a.alpha);
    sink.csv(
        "energy.csv",
        &["value", "convention", "alpha"],
        &[vec![file_float(report.value), convention.into(), file_float(a.alpha)]],
        None,
    )?;
    Ok(true)
}

pub fn optimize(a: &OptimizeArgs, sink: &mut Sink) -> Outcome {
    if a.dim < 1 || a.n_points < 1 {
        return Err(Failure::input("need --dim ≥ 1 and --n-points ≥ 1"));
    }
    let conjectured = conjectured_value_unchecked(a.dim, Particles::Finite(a.n_points), Convention::Half)?;
    let (best, best_energy, rows) = if a.n_points == 1 {
        // a single particle has nothing to interact with
        let point = SpherePoint::basis(a.dim, 0)?;
        let row = vec!["0".into(), file_float(0.0), "0".into(), "true".into()];
        (DiscreteMeasure::dirac(point), 0.0, vec![row])
    } else {
        let result = maximize_particles(a.dim, a.n_points, a.alpha, &ascent_options(&a.ascent))?;
        let rows = (0..result.per_restart_energies.len())
            .map(|k| {
                vec![
                    k.to_string(),
                    file_float(result.per_restart_energies[k]),
                    result.iterations[k].to_string(),
                    result.converged_flags[k].to_string(),
                ]
            })
            .collect();
        (result.best, result.best_energy, rows)
    };
    sink.text("best_measure.json", &(best.to_json()? + "\n"))?;
    sink.csv(
        "restarts.csv",
        &["restart", "final_energy", "iterations", "converged"],
        &rows,
        None,
    )?;
    let converged = rows.iter().filter(|r| r[3] == "true").count();
    say!(
        "best energy {} conjectured {} gap {} ({converged}/{} restarts converged)",
        term_float(best_energy),
        term_float(conjectured),
        term_float(conjectured - best_energy),
        rows.len()
    );
    Ok(true)
}

pub fn scan_alpha(a: &ScanArgs, sink: &mut Sink) -> Outcome {
    if !(a.alpha_lo < a.alpha_hi) {
        return Err(Failure::input("need --alpha-lo < --alpha-hi"));
    }
    let est = estimate_threshold(
        a.dim,
        a.n_points,
        a.alpha_lo,
        a.alpha_hi,
        a.alpha_tol,
        &ascent_options(&a.ascent),
    )?;
    let verdict = |v: Verdict| match v {
        Verdict::Below => "below",
        Verdict::Above => "above",
    };
    let rows: Vec<Vec<String>> = est
        .samples
        .iter()
        .map(|s| {
            vec![
                file_float(s.alpha),
                file_float(s.best_found_energy),
                file_float(s.conjectured),
                file_float(s.conjectured - s.best_found_energy),
                verdict(s.verdict).into(),
            ]
        })
        .collect();
    let (lo, hi) = est.bracket;
    let trailer = format!("# bracket {} {}", file_float(lo), file_float(hi));
    sink.csv(
        "scan.csv",
        &["alpha", "best_energy", "conjectured", "gap", "verdict"],
        &rows,
        Some(&trailer),
    )?;
    for s in &est.samples {
        say!(
            "alpha {} best {} conjectured {} {}{}",
            term_float(s.alpha),
            term_float(s.best_found_energy),
            term_float(s.conjectured),
            verdict(s.verdict),
            if s.tie { " (tie)" } else { "" }
        );
    }
    if est.samples.is_empty() {
        say!("N <= d+1: orthogonal particles are optimal at every exponent");
    }
    for f in &est.flags {
        say!("note: {f}");
    }
    say!("bracket {} {}", term_float(lo), term_float(hi));
    Ok(true)
}

pub fn transport(a: &TransportArgs, sink: &mut Sink) -> Outcome {
    let mu = load(&a.source)?;
    let nu = load(&a.target)?;
    let (value, plan) = distance(&mu, &nu, a.p.into(), a.metric.into())?;
    say!("distance {}", term_float(value));
    let rows: Vec<Vec<String>> = plan
        .entries()
        .into_iter()
        .map(|(i, j, m)| vec![i.to_string(), j.to_string(), file_float(m)])
        .collect();
    sink.csv("plan.csv", &["i", "j", "mass"], &rows, None)?;
    Ok(true)
}

pub fn verify(suite: &Suite, sink: &mut Sink) -> Outcome {
    let pass = match suite {
        Suite::Majorization(a) => majorization(a, sink)?,
        Suite::Chain(a) => chain(a, sink)?,
        Suite::Stability(a) => stability(a, sink)?,
        Suite::Aggregation(a) => aggregation(a, sink)?,
        Suite::Frame(a) => frame(a, sink)?,
    };
    say!("{}: {}", suite.name(), pass_word(pass));
    Ok(pass)
}

fn majorization(a: &MajorizationArgs, sink: &mut Sink) -> Outcome {
    let r = majorization_check(a.alpha, a.grid)?;
    say!(
        "alpha {} min gap {} at |t| = {}, equality at {:?}",
        a.alpha,
        term_float(r.min_gap),
        term_float(r.worst_t),
        r.equality_points
    );
    if !r.pass {
        say!("violation within 0.05 of |t| = 1: {}", r.violation_near_endpoint);
    }
    sink.csv(
        "majorization.csv",
        &["alpha", "grid_size", "min_gap", "worst_t", "violation_near_endpoint", "pass"],
        &[vec![
            file_float(a.alpha),
            r.grid_size.to_string(),
            file_float(r.min_gap),
            file_float(r.worst_t),
            r.violation_near_endpoint.to_string(),
            r.pass.to_string(),
        ]],
        None,
    )?;
    Ok(r.pass)
}

fn chain(a: &ChainArgs, sink: &mut Sink) -> Outcome {
    let mut cases = vec![("basis".to_string(), equidistributed_basis(a.dim)?)];
    for i in 0..a.trials {
        // alternate uniform and weighted random measures
        let mu = random_configuration(a.dim, a.n_points, a.seed.wrapping_add(i as u64), i % 2 == 1)?;
        cases.push((format!("random-{i}"), mu));
    }
    let mut rows = Vec::new();
    let mut pass = true;
    let mut failures = 0;
    for (name, mu) in &cases {
        let r = chain_check(mu, a.alpha)?;
        // equality throughout exactly on equidistributed orthogonal lines
        let expect_equal = is_in_pdelta(mu, ORTHOGONAL_SUPPORT_TOL) && mu.is_uniform(1e-12);
        let ok = r.pass && (!expect_equal || r.all_equal);
        if !ok {
            failures += 1;
            say!("{name}: E_f {} E_g {} bound {}", term_float(r.e_f), term_float(r.e_g), term_float(r.e_g_sigma));
        }
        pass &= ok;
        rows.push(vec![
            name.clone(),
            file_float(r.e_f),
            file_float(r.e_g),
            file_float(r.e_g_sigma),
            ok.to_string(),
            r.all_equal.to_string(),
        ]);
    }
    say!("{} measures, {failures} failures", cases.len());
    sink.csv("chain.csv", &["case", "e_f", "e_g", "e_g_sigma", "pass", "all_equal"], &rows, None)?;
    Ok(pass)
}

fn stability(a: &StabilityArgs, sink: &mut Sink) -> Outcome {
    let basis = equidistributed_basis(a.dim)?;
    let xi = match a.weights {
        WeightsArg::Uniform => basis,
        WeightsArg::Skewed => {
            let rest = 0.4 / a.dim as f64;
            let weights = (0..=a.dim).map(|k| if k == 0 { 0.6 } else { rest }).collect();
            basis.with_weights(weights)?
        }
    };
    let r = stability_experiment(&xi, a.alpha, a.radius, a.k_split, a.trials, a.seed)?;
    say!(
        "{} trials, {} violations, largest energy gain {}",
        r.trials,
        r.violations,
        term_float(r.max_energy_gain)
    );
    sink.csv(
        "stability.csv",
        &["dim", "alpha", "radius", "k_split", "trials", "violations", "max_energy_gain"],
        &[vec![
            a.dim.to_string(),
            file_float(a.alpha),
            file_float(a.radius),
            a.k_split.to_string(),
            r.trials.to_string(),
            r.violations.to_string(),
            file_float(r.max_energy_gain),
        ]],
        None,
    )?;
    Ok(r.violations == 0)
}

fn aggregation(a: &AggregationArgs, sink: &mut Sink) -> Outcome {
    if a.n_points < 1 {
        return Err(Failure::input("--n-points must be at least 1"));
    }
    let mut rng = stream(a.seed, u64::MAX);
    let mut nus = Vec::with_capacity(a.dim);
    for i in 1..=a.dim {
        let centre = SpherePoint::basis(a.dim, i)?;
        let nu = if a.n_points == 1 {
            DiscreteMeasure::dirac(centre)
        } else {
            let pts = (0..a.n_points)
                .map(|_| exp_map(&random_tangent_in_ball(&centre, a.radius, &mut rng)))
                .collect::<projenergy::Result<Vec<_>>>()?;
            DiscreteMeasure::uniform(pts)?
        };
        nus.push(nu);
    }
    let r = aggregation_constant(&nus, a.radius, a.c_target, a.trials, a.seed)?;
    say!(
        "empirical constant {} target {} (F(x̄) = {})",
        term_float(r.c_empirical),
        term_float(r.c_target),
        term_float(r.f_at_xbar)
    );
    sink.csv(
        "aggregation.csv",
        &["dim", "radius", "sample_count", "c_empirical", "c_target", "f_at_xbar", "pass"],
        &[vec![
            a.dim.to_string(),
            file_float(a.radius),
            r.sample_count.to_string(),
            file_float(r.c_empirical),
            file_float(r.c_target),
            file_float(r.f_at_xbar),
            r.passes().to_string(),
        ]],
        None,
    )?;
    Ok(r.passes())
}

fn frame(a: &FrameArgs, sink: &mut Sink) -> Outcome {
    let bound = 1.0 / (a.dim + 1) as f64;
    let mc = sample_uniform_moments(a.dim, a.n_points, a.seed)?;
    let dev = (mc.tr_i2 - bound).abs();
    let mc_pass = dev <= 3.0 * mc.tr_i2_std_error;
    say!(
        "uniform samples: Tr(I²) {} vs {} ({} standard errors)",
        term_float(mc.tr_i2),
        term_float(bound),
        term_float(dev / mc.tr_i2_std_error)
    );
    let mut rows = vec![vec![
        "monte-carlo".into(),
        file_float(mc.tr_i2),
        file_float(bound),
        file_float(dev),
        mc_pass.to_string(),
    ]];
    let basis = frame_bound_check(&equidistributed_basis(a.dim)?)?;
    let mut pass = mc_pass && basis.tight && basis.identity_holds;
    rows.push(vec![
        "basis".into(),
        file_float(basis.tr_i2),
        file_float(bound),
        file_float((basis.tr_i2 - bound).abs()),
        (basis.tight && basis.identity_holds).to_string(),
    ]);
    let mut worst: f64 = 0.0;
    for i in 0..a.trials {
        let n = 2 + i % 8;
        let mu = random_configuration(a.dim, n, a.seed.wrapping_add(1 + i as u64), true)?;
        let r = frame_bound_check(&mu)?;
        let identity_gap = (r.e_g - (1.0 - r.tr_i2)).abs();
        worst = worst.max(identity_gap);
        let ok = r.identity_holds && r.tr_i2 >= bound - 1e-12;
        pass &= ok;
        rows.push(vec![
            format!("random-{i}"),
            file_float(r.tr_i2),
            file_float(1.0 - r.e_g),
            file_float(identity_gap),
            ok.to_string(),
        ]);
    }
    say!("{} random measures, max |E_g - (1 - Tr I²)| = {}", a.trials, term_float(worst));
    sink.csv("frame.csv", &["case", "tr_i2", "reference", "deviation", "pass"], &rows, None)?;
    Ok(pass)
}
