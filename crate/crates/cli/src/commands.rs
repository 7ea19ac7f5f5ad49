use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use fforge::algebra::{value_to_complex, AnyAlgebra, Decompose, PointAlgebra};
use fforge::linalg::Scalar;
use fforge::permuto::{build_fan, containing_maximal_cones, fubini, locate, verify_fan_faces, MAX_FACE_CHECK_N};
use fforge::potentials::{
    oriented_associativity_of_tensor, EulerData, EulerDoc, FlatMetric, MetricDoc, StructureTensor, TensorDoc,
    VectorPotential, VectorPotentialDoc, WdvvPotential,
};
use fforge::qcoh::{euler_field_p_r, quantum_potential, solve_gw, QcohError, QcohSetup};
use fforge::saito::{build_chart, random_charts, SaitoChart, DEFAULT_FD_STEP};
use fforge::series::{parse_rational, Rational, TruncatedSeries};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::report::RunReport;
use crate::{AlgebraArgs, AnArgs, AssocArgs, FanArgs, GwArgs, TwistArgs, WdvvArgs};

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).with_context(|| format!("malformed document {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn fmt_c(z: Complex64) -> String {
    format!("{:.12}{:+.12}i", z.re, z.im)
}

fn fmt_list(v: &[Complex64]) -> String {
    format!("[{}]", v.iter().map(|z| fmt_c(*z)).collect::<Vec<_>>().join(", "))
}

pub fn gw(args: &GwArgs) -> Result<RunReport> {
    let mut report = RunReport::new("gw");
    report.param("r", args.r);
    report.param("max_degree", args.max_degree);
    let setup = QcohSetup::new(args.r, args.max_degree)?;
    report.param("order", setup.order());

    let start = Instant::now();
    let table = match solve_gw(&setup) {
        Ok(table) => table,
        Err(
            err @ (QcohError::Inconsistent { .. }
            | QcohError::Underdetermined { .. }
            | QcohError::NotANonNegativeInteger { .. }),
        ) => {
            report.flag("solve", false, Some(err.to_string()));
            return Ok(report);
        }
        Err(err) => return Err(err.into()),
    };
    report.time("solve", start.elapsed());
    for (d, n, v) in table.iter() {
        let mut fields = vec![d.to_string()];
        fields.extend(n.iter().map(u32::to_string));
        fields.push(v.to_string());
        println!("{}", fields.join(" "));
    }
    report.flag("solve", true, Some(format!("{} non-negative integer entries", table.len())));

    if let Some(path) = &args.table_out {
        write_text(path, &serde_json::to_string_pretty(&table.to_doc())?)?;
    }
    let wants_potential =
        args.check || args.potential_out.is_some() || args.metric_out.is_some() || args.euler_out.is_some();
    if !wants_potential {
        return Ok(report);
    }
    let start = Instant::now();
    let potential = quantum_potential(&setup, &table)?;
    let euler = euler_field_p_r(&setup);
    report.param("certified_order", setup.certified_order());
    if let Some(path) = &args.potential_out {
        write_text(path, &potential.phi().to_json())?;
    }
    if let Some(path) = &args.metric_out {
        write_text(path, &serde_json::to_string(&potential.metric().to_doc())?)?;
    }
    if let Some(path) = &args.euler_out {
        write_text(path, &serde_json::to_string(&euler.to_doc())?)?;
    }
    if args.check {
        report.exact("wdvv", &potential.wdvv_residual()?);
        report.exact("flat_identity", &potential.flat_identity_residual(0)?);
        report.exact("euler", &potential.euler_residual(&euler)?);
    }
    report.time("potential", start.elapsed());
    Ok(report)
}

pub fn wdvv(args: &WdvvArgs) -> Result<RunReport> {
    let mut report = RunReport::new("wdvv");
    report.param("potential", args.potential.display().to_string());
    report.param("metric", args.metric.display().to_string());
    let phi = TruncatedSeries::from_json(&read_text(&args.potential)?)
        .with_context(|| format!("malformed series document {}", args.potential.display()))?;
    let metric = FlatMetric::from_doc(&read_json::<MetricDoc>(&args.metric)?)?;
    let euler = match &args.euler {
        Some(path) => Some(EulerData::from_doc(&read_json::<EulerDoc>(path)?)?),
        None => None,
    };
    let potential = WdvvPotential::new(phi, metric)?;
    if args.identity >= potential.dim() {
        bail!("identity index {} out of range for dimension {}", args.identity, potential.dim());
    }
    let start = Instant::now();
    report.exact("wdvv", &potential.wdvv_residual()?);
    report.exact("flat_identity", &potential.flat_identity_residual(args.identity)?);
    if let Some(euler) = &euler {
        report.exact("euler", &potential.euler_residual(euler)?);
    }
    report.time("checks", start.elapsed());
    Ok(report)
}

pub fn assoc(args: &AssocArgs) -> Result<RunReport> {
    let mut report = RunReport::new("assoc");
    let start = Instant::now();
    if let Some(path) = &args.input.potential {
        report.param("potential", path.display().to_string());
        let c = VectorPotential::from_doc(&read_json::<VectorPotentialDoc>(path)?)?;
        let oriented = c.oriented_associativity_residual()?;
        let flat = fforge::permuto::flatness_check(&c.connection_matrix()?)?;
        let agree =
            oriented.is_zero() == flat.is_zero() && oriented.first_defect_degree() == flat.first_defect_degree();
        report.exact("oriented_associativity", &oriented);
        report.exact("flatness", &flat);
        report.flag("flatness_agrees", agree, None);
        let t = c.structure_tensor()?;
        report.flag("supersymmetric", t.is_supersymmetric(), None);
        report.exact("structure_identity", &t.structure_identity_residual()?);
    } else if let Some(path) = &args.input.tensor {
        report.param("tensor", path.display().to_string());
        let t = StructureTensor::from_doc(&read_json::<TensorDoc>(path)?)?;
        report.flag("supersymmetric", t.is_supersymmetric(), None);
        report.exact("oriented_associativity", &oriented_associativity_of_tensor(&t)?);
        report.exact("structure_identity", &t.structure_identity_residual()?);
    }
    report.time("checks", start.elapsed());
    Ok(report)
}

fn parse_coefficients(path: &Path, n: usize) -> Result<Vec<Complex64>> {
    let values: Vec<Value> = read_json(path)?;
    if values.len() != n {
        bail!("expected {n} coefficients in {}, found {}", path.display(), values.len());
    }
    Ok(values.iter().map(value_to_complex).collect::<std::result::Result<_, _>>()?)
}

pub fn an(args: &AnArgs, seed: u64, tol: Option<f64>) -> Result<RunReport> {
    let n = args.n as usize;
    let tol = tol.unwrap_or(1e-6);
    let step = args.fd_step.unwrap_or(DEFAULT_FD_STEP);
    let mut report = RunReport::new("an");
    report.param("n", n);
    report.param("fd_step", step);
    report.param("tol", tol);

    let charts: Vec<SaitoChart> = match (&args.coeffs, args.random) {
        (Some(path), _) => {
            let a = parse_coefficients(path, n)?;
            vec![build_chart(n, &a, args.ordering)?]
        }
        (None, true) => {
            report.param("samples", args.samples);
            report.param("seed", seed);
            random_charts(n, args.samples, seed)?
        }
        (None, false) => bail!("give --coeffs FILE or --random"),
    };

    let start = Instant::now();
    let (mut roots, mut metric, mut rotation, mut flow, mut euler, mut identity) = (0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
    for chart in &charts {
        let m = chart.metric_data()?;
        let de = chart.darboux_egoroff_residual(step)?;
        let e = chart.euler_consistency()?;
        roots = roots.max(chart.root_residual() / chart.coefficient_scale());
        metric = metric.max(m.metric_identity_error());
        rotation = rotation.max(de.rotation);
        flow = flow.max(de.identity_flow);
        euler = euler.max(e.euler);
        identity = identity.max(e.flat_identity);
        if charts.len() == 1 {
            report.note(format!("a      = {}", fmt_list(&chart.a)));
            report.note(format!("rho    = {}", fmt_list(&chart.rho)));
            report.note(format!("u      = {}", fmt_list(&chart.u)));
            report.note(format!("eta    = {}", fmt_c(m.eta)));
            report.note(format!("g_diag = {}", fmt_list(&m.g_diag)));
            report.note(format!("eta_i  = {}", fmt_list(&m.eta_grad_u)));
            report.note(format!("e eta  = {}", fmt_c(de.e_eta)));
            report.note(format!("E eta  = {} eta + {}", fmt_c(e.eta_weight), fmt_c(e.eta_constant)));
        }
    }
    report.note(format!("{} chart(s) checked", charts.len()));
    report.check("root_residual", roots, 1e-12, None);
    report.check("metric_identity", metric, 1e-8, None);
    report.check("darboux_egoroff_rotation", rotation, tol, None);
    report.check("darboux_egoroff_identity", flow, tol, None);
    report.check("euler_consistency", euler, 1e-8, None);
    report.check("flat_identity", identity, 1e-10, None);
    report.time("checks", start.elapsed());
    Ok(report)
}

fn parse_vector(text: &str) -> Result<Vec<i64>> {
    text.split(',').map(|s| s.trim().parse::<i64>().with_context(|| format!("bad integer {s:?}"))).collect()
}

pub fn fan(args: &FanArgs, seed: u64) -> Result<RunReport> {
    let mut report = RunReport::new("fan");
    report.param("n", args.n);
    let start = Instant::now();
    let fan = build_fan(args.n)?;
    report.time("build", start.elapsed());
    let mut summary = format!("{} cones, {} maximal", fan.cone_count(), fan.maximal_count());

    if args.list {
        for cone in &fan.cones {
            println!("{}", serde_json::to_string(cone)?);
        }
    }
    if let Some(text) = &args.locate {
        let v = parse_vector(text)?;
        let location = locate(&v, &fan)?;
        report.note(format!(
            "locate {:?} -> {} certificate {}",
            v,
            serde_json::to_string(&location.partition)?,
            serde_json::to_string(&location)?
        ));
    }
    if args.verify {
        let start = Instant::now();
        let factorial: usize = (1..=args.n).product();
        report.flag("cone_count", fan.cone_count() as u64 == fubini(args.n), None);
        report.flag("maximal_count", fan.maximal_count() == factorial, None);
        if args.n <= MAX_FACE_CHECK_N {
            let faces = verify_fan_faces(&fan)?;
            let detail = match &faces.failure {
                None => format!("{} pairs", faces.pairs_checked),
                Some((a, b)) => format!("{a} and {b} overlap"),
            };
            report.flag("face_intersections", faces.passes(), Some(detail));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut located = true;
        for _ in 0..200 {
            let v = loop {
                let v: Vec<i64> = (0..args.n).map(|_| rng.random_range(-100..=100)).collect();
                if v.iter().collect::<BTreeSet<_>>().len() == args.n {
                    break v;
                }
            };
            let location = locate(&v, &fan)?;
            located &= containing_maximal_cones(&v, &fan) == vec![location.cone_index];
        }
        report.flag("locate_consistency", located, Some("200 generic vectors".into()));
        report.time("verify", start.elapsed());
        summary.push_str(if report.passed() { ", verify: pass" } else { ", verify: fail" });
    }
    report.notes.insert(0, summary);
    Ok(report)
}

fn parse_rationals(text: &str) -> Result<Vec<Rational>> {
    text.split(',').map(|s| parse_rational(s.trim()).with_context(|| format!("bad rational {s:?}"))).collect()
}

fn parse_complexes(text: &str) -> Result<Vec<Complex64>> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            let (re, im) = s.split_once(':').unwrap_or((s, "0"));
            Ok(Complex64::new(re.trim().parse()?, im.trim().parse()?))
        })
        .collect::<Result<_>>()
        .with_context(|| format!("bad complex list {text:?}"))
}

fn max_gap<S: Scalar>(x: &PointAlgebra<S>, y: &PointAlgebra<S>) -> f64 {
    x.structure()
        .iter()
        .flatten()
        .flatten()
        .zip(y.structure().iter().flatten().flatten())
        .map(|(a, b)| (a.clone() - b.clone()).magnitude())
        .fold(0.0, f64::max)
}

fn vector_gap<S: Scalar>(x: &[S], y: &[S]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a.clone() - b.clone()).magnitude()).fold(0.0, f64::max)
}

fn twist_checks<S: Scalar>(report: &mut RunReport, alg: &PointAlgebra<S>, epsilon: &[S]) -> Result<PointAlgebra<S>> {
    if epsilon.len() != alg.dim() {
        bail!("epsilon has {} entries for an algebra of dimension {}", epsilon.len(), alg.dim());
    }
    let e = alg.identity().context("algebra has no identity")?;
    let twisted = alg.twist(epsilon)?;
    let verdict = twisted.verify();
    report.flag("commutative", verdict.commutative, None);
    report.flag("associative", verdict.associative, None);
    report.flag("unital", verdict.unital, Some("identity is epsilon".into()));
    let tol = if S::EXACT { 0.0 } else { 1e-9 };
    let inverse_gap = vector_gap(&twisted.invert(&e)?, &alg.product(epsilon, epsilon));
    report.check("old_identity_inverse", inverse_gap, tol, Some("e^{*-1} = epsilon^2".into()));
    let back = twisted.twist(&e)?;
    report.check("double_twist", max_gap(&back, alg), tol, None);
    Ok(twisted)
}

pub fn twist(args: &TwistArgs) -> Result<RunReport> {
    let mut report = RunReport::new("twist");
    report.param("algebra", args.algebra.display().to_string());
    report.param("epsilon", args.epsilon.clone());
    let alg = AnyAlgebra::from_json(&read_text(&args.algebra)?)?;
    let twisted = match &alg {
        AnyAlgebra::Rational(a) => {
            AnyAlgebra::Rational(twist_checks(&mut report, a, &parse_rationals(&args.epsilon)?)?)
        }
        AnyAlgebra::Complex(a) => AnyAlgebra::Complex(twist_checks(&mut report, a, &parse_complexes(&args.epsilon)?)?),
    };
    let doc = twisted.to_json();
    match &args.out {
        Some(path) => write_text(path, &doc)?,
        None => println!("{doc}"),
    }
    Ok(report)
}

fn describe<A: Decompose>(report: &mut RunReport, alg: &A, seed: u64) -> Result<()> {
    let decomposition = alg.decompose(seed)?;
    report.note(format!("blocks: {:?} ({:?})", decomposition.block_dims(), decomposition.mode()));
    report.note(format!("semisimple: {}", decomposition.block_dims().iter().all(|&k| k == 1)));
    let points = alg.spectral_points(seed)?;
    for (i, chi) in points.characters.iter().enumerate() {
        report.note(format!("character {i}: {}", fmt_list(chi)));
    }
    Ok(())
}

pub fn algebra(args: &AlgebraArgs, seed: u64, _tol: Option<f64>) -> Result<RunReport> {
    let mut report = RunReport::new("algebra");
    report.param("algebra", args.algebra.display().to_string());
    let alg = AnyAlgebra::from_json(&read_text(&args.algebra)?)?;
    let verdict = match &alg {
        AnyAlgebra::Rational(a) => a.verify(),
        AnyAlgebra::Complex(a) => a.verify(),
    };
    report.note(format!("dimension {}", alg.dim()));
    report.flag("commutative", verdict.commutative, None);
    report.flag("associative", verdict.associative, None);
    report.flag("unital", verdict.unital, None);
    if verdict.all() {
        match &alg {
            AnyAlgebra::Rational(a) => describe(&mut report, a, seed)?,
            AnyAlgebra::Complex(a) => describe(&mut report, a, seed)?,
        }
    }
    Ok(report)
}
