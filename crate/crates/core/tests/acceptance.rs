//! Acceptance criteria 1 to 10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;

use nalgebra::DMatrix;
use qs3_core::catalog::{self, CatalogSpec};
use qs3_core::contact3::{eta_jets, rank_at, rank_at_by_wedges, reeb_constant};
use qs3_core::geometry::{d_one_form, fd, riemann_at, ChartedManifold};
use qs3_core::report::{run_suite, run_suite_on, CheckId, RunConfig};
use qs3_core::sampling::{gaussian_vector, point_rng, sample_points};
use qs3_core::verify::{classify_chsc, IdentityId, PointAnalysis, Verdict};
use qs3_core::Result;

const POINTS: usize = 16;
const SEED: u64 = 20_240_601;

fn build(name: &str) -> ChartedManifold {
    CatalogSpec::parse(name).and_then(|s| s.build()).expect("catalog name")
}

fn points(m: &ChartedManifold) -> Vec<Vec<f64>> {
    sample_points(SEED, POINTS, m.dim(), 1.0)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Worst `|K − k|` over `per_point` random planes at each sample point.
fn sectional_deviation(m: &ChartedManifold, k: f64, per_point: usize) -> Result<(f64, usize)> {
    let mut worst = 0.0_f64;
    let mut planes = 0;
    for (i, p) in points(m).iter().enumerate() {
        let geom = riemann_at(m, p)?;
        let mut rng = point_rng(SEED, i as u64);
        for _ in 0..per_point {
            let x = gaussian_vector(&mut rng, m.dim());
            let y = gaussian_vector(&mut rng, m.dim());
            worst = worst.max((geom.sectional(&x, &y)? - k).abs());
            planes += 1;
        }
    }
    Ok((worst, planes))
}

fn criterion_1() -> Result<(bool, String)> {
    let m = build("sphere7");
    let (dev, planes) = sectional_deviation(&m, 1.0, 4)?;
    let c = reeb_constant(&m, &points(&m))?;
    let ok = dev <= 1e-7 && planes >= 50 && (c - 2.0).abs() <= 1e-9;
    Ok((ok, format!("sphere7 |K-1| = {dev:.2e} over {planes} planes, c = {c}")))
}

fn criterion_2() -> Result<(bool, String)> {
    let m = build("csasakian7:c=4");
    let (dev, planes) = sectional_deviation(&m, 4.0, 4)?;
    let c = reeb_constant(&m, &points(&m))?;
    let ok = dev <= 1e-6 && (c - 4.0).abs() <= 1e-8;
    Ok((ok, format!("csasakian7:c=4 |K-4| = {dev:.2e} over {planes} planes, c = {c}")))
}

fn criterion_3() -> Result<(bool, String)> {
    let m = build("flat7");
    let pts = points(&m);
    let mut riem = 0.0_f64;
    let mut nabla_xi = 0.0_f64;
    let mut ranks = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        let geom = riemann_at(&m, p)?;
        riem = riem.max(geom.riemann_slice().iter().fold(0.0, |a: f64, v| a.max(v.abs())));
        let s = m.jets_at(p)?;
        let mut rng = point_rng(SEED, i as u64);
        for a in 0..3 {
            ranks.push(rank_at(&m, p, a)?);
            let x = gaussian_vector(&mut rng, m.dim());
            nabla_xi = nabla_xi.max(geom.nabla_vector(&s.xi[a], &x).amax());
        }
    }
    let c = reeb_constant(&m, &pts)?;
    let ok = riem <= 1e-10 && ranks.iter().all(|&r| r == 1) && c.abs() <= 1e-10 && nabla_xi <= 1e-10;
    Ok((ok, format!("flat7 max|R| = {riem:.2e}, ranks all 1: {}, c = {c:.2e}, max|nabla xi| = {nabla_xi:.2e}", ranks.iter().all(|&r| r == 1))))
}

const CRITERION_4_IDS: [IdentityId; 11] = [
    IdentityId::SymPsi2,
    IdentityId::PsiCube,
    IdentityId::NablaEta,
    IdentityId::DetaCpsi,
    IdentityId::NablaXi,
    IdentityId::NablaPsi,
    IdentityId::NablaPsiSq,
    IdentityId::RXi,
    IdentityId::RPhiCommute,
    IdentityId::PIdentity,
    IdentityId::Phi4,
];

fn criterion_4() -> Result<(bool, String)> {
    let mut ok = true;
    let mut notes = Vec::new();
    for name in ["sphere7", "csasakian7:c=4", "product11", "flat7"] {
        let r = run_suite(&RunConfig { fd_check: false, ..RunConfig::new(name) })?;
        let flat = name == "flat7";
        let mut worst = 0.0_f64;
        for id in CRITERION_4_IDS {
            for a in 0..3 {
                let Some(c) = r.check(CheckId::Identity(id), Some(a)) else {
                    ok = false;
                    notes.push(format!("{name} {id} missing"));
                    continue;
                };
                let within = c.normalized() <= 1e-8;
                if c.error.is_some() || c.vacuous != flat || (!flat && !within) {
                    ok = false;
                    notes.push(format!("{name} {id}[{}] normalized {:e} vacuous {}", a + 1, c.normalized(), c.vacuous));
                }
                worst = worst.max(c.normalized());
            }
        }
        notes.push(if flat { format!("{name} vacuous") } else { format!("{name} worst {worst:.2e}") });
    }
    Ok((ok, notes.join(", ")))
}

fn criterion_5() -> Result<(bool, String)> {
    let m = build("product11");
    let mut worst = [0.0_f64; 3];
    for (i, p) in points(&m).iter().enumerate() {
        let pa = PointAnalysis::new(&m, p)?;
        let g = pa.metric();
        let mut rng = point_rng(SEED, i as u64);
        let u = g.normalize(&(&pa.split.p_e4l * gaussian_vector(&mut rng, m.dim())))?;
        let v = g.normalize(&(&pa.split.p_e4m * gaussian_vector(&mut rng, m.dim())))?;
        let sum = |x: &nalgebra::DVector<f64>| -> Result<f64> { Ok(pa.phi_sectional_sum(x)?.h.iter().sum()) };
        worst[0] = worst[0].max((sum(&u)? - 3.0).abs());
        worst[1] = worst[1].max(sum(&v)?.abs());
        for t in [0.2_f64, 0.5, 0.9] {
            let x = &u * t.sqrt() + &v * (1.0 - t).sqrt();
            let measured_t = g.inner(&(&pa.split.p_e4l * &x), &(&pa.split.p_e4l * &x));
            worst[2] = worst[2].max((sum(&x)? - 3.0 * t * t).abs()).max((measured_t - t).abs());
        }
    }
    let sphere = build("sphere7");
    let mut sphere_worst = 0.0_f64;
    for (i, p) in points(&sphere).iter().enumerate() {
        let pa = PointAnalysis::new(&sphere, p)?;
        let x = pa.random_horizontal(&mut point_rng(SEED, i as u64))?;
        sphere_worst = sphere_worst.max((pa.phi_sectional_sum(&x)?.h.iter().sum::<f64>() - 3.0).abs());
    }
    let ok = worst.iter().all(|&w| w <= 1e-7) && sphere_worst <= 1e-7;
    Ok((
        ok,
        format!(
            "product11 E4l {:.2e}, E4m {:.2e}, mixed {:.2e}; sphere7 {sphere_worst:.2e}",
            worst[0], worst[1], worst[2]
        ),
    ))
}

fn criterion_6() -> Result<(bool, String)> {
    let mut ok = true;
    let mut notes = Vec::new();
    for name in ["sphere7", "csasakian7:c=4", "flat7", "product11"] {
        let m = build(name);
        let v = classify_chsc(&m, &points(&m), 8, 1e-8, SEED)?.verdict;
        let good = match (name, &v) {
            ("sphere7", Verdict::ThreeCSasakian { c, k }) => rel(*c, 2.0) <= 1e-8 && rel(*k, 1.0) <= 1e-8,
            ("csasakian7:c=4", Verdict::ThreeCSasakian { c, k }) => rel(*c, 4.0) <= 1e-8 && rel(*k, 4.0) <= 1e-8,
            ("flat7", Verdict::ThreeCosymplecticFlat) => true,
            ("product11", Verdict::NonConstantHSC { .. }) => true,
            _ => false,
        };
        ok &= good;
        notes.push(format!("{name}: {v}"));
    }
    Ok((ok, notes.join("; ")))
}

fn criterion_7() -> Result<(bool, String)> {
    let m = build("product11");
    let mut ranks = Vec::new();
    for p in points(&m) {
        ranks.push([rank_at(&m, &p, 0)?, rank_at(&m, &p, 1)?, rank_at(&m, &p, 2)?]);
    }
    let product_ok = ranks.iter().all(|r| *r == [7, 7, 7]);
    let mut agree = true;
    for name in ["flat7", "sphere7", "csasakian7:c=4"] {
        let m = build(name);
        for p in points(&m) {
            for a in 0..3 {
                agree &= rank_at(&m, &p, a)? == rank_at_by_wedges(&m, &p, a)?;
            }
        }
    }
    Ok((product_ok && agree, format!("product11 rank 7 for all alpha: {product_ok}, wedge agreement on dim 7: {agree}")))
}

fn criterion_8() -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    let mut names = Vec::new();
    for entry in catalog::list().into_iter().filter(|e| e.expected.c != 0.0) {
        let m = build(&entry.name);
        let pts = points(&m);
        let c = reeb_constant(&m, &pts)?;
        for p in &pts {
            let pa = PointAnalysis::new(&m, p)?;
            let s = m.jets_at(p)?;
            for a in 0..3 {
                let deta: DMatrix<f64> = d_one_form(&eta_jets(&s, a)).to_skew_matrix();
                let cpsi = pa.split.big_psi[a].to_skew_matrix() * c;
                let scale = deta.amax().max(cpsi.amax()).max(1.0);
                worst = worst.max((&deta - &cpsi).amax() / scale);
            }
        }
        names.push(entry.name);
    }
    Ok((worst <= 1e-8, format!("max |d eta - c Psi| = {worst:.2e} on {}", names.join(", "))))
}

fn criterion_9() -> Result<(bool, String)> {
    let mut worst = (0.0_f64, 0.0_f64);
    for entry in catalog::list() {
        let m = build(&entry.name);
        for p in sample_points(SEED, 10, m.dim(), 1.0) {
            let a = fd::compare(&m, &p)?;
            worst = (worst.0.max(a.christoffel), worst.1.max(a.riemann));
        }
    }
    let ok = worst.0 <= 1e-5 && worst.1 <= 1e-5;
    Ok((ok, format!("relative error Christoffel {:.2e}, Riemann {:.2e}", worst.0, worst.1)))
}

fn criterion_10() -> Result<(bool, String)> {
    let config = RunConfig::new("product11");
    let a = run_suite(&config)?.to_json();
    let b = run_suite(&config)?.to_json();
    let m = build("product11");
    let expected = Some(CatalogSpec::parse("product11")?.expected());
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("pool");
    let c = single.install(|| run_suite_on(&m, expected, &config)).to_json();
    let ok = a == b && a == c;
    Ok((ok, format!("{} bytes, repeat identical: {}, single-thread identical: {}", a.len(), a == b, a == c)))
}

type Criterion = fn() -> Result<(bool, String)>;

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 10] = [
        ("sphere curvature and Reeb constant", criterion_1),
        ("homothety to c = 4", criterion_2),
        ("flat 3-cosymplectic case", criterion_3),
        ("identity suite", criterion_4),
        ("phi-sectional sums", criterion_5),
        ("classification", criterion_6),
        ("rank machinery", criterion_7),
        ("d eta = c Psi with c from the Reeb bracket", criterion_8),
        ("finite-difference oracle", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!("{} {:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
