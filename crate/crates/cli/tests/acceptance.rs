//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::Command;
use std::time::{Duration, Instant};

use hnn_core::builtins::{builtin, builtin_group_data};
use hnn_core::fock::{build_truncated_fock, masked_residual, DEFAULT_DIM_CAP};
use hnn_core::qgroup::Sign;
use hnn_core::report::CheckReport;
use hnn_core::suites::{build_jv_data, lemma_iso_residual, oracle_phi_agreement};
use hnn_core::wordalg::{basis_words, context, fock_evaluate, random_element, SymbolicElement};
use hnn_core::{Result, C64};
use hnn_forge::config::DEFAULT_SEED;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BUILTINS: [(&str, usize); 4] = [("z2-free", 2), ("z4-sigma2", 2), ("s3-quotient", 1), ("trivial", 2)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit: f64) -> bool {
    elapsed.as_secs_f64() <= limit
}

fn oracle_equivalence() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut words = 0;
    for name in ["z2-free", "z4-sigma2"] {
        let ctx = context(builtin(name)?);
        let data = builtin_group_data(name)?.expect("group-algebra builtin");
        let (w, n) = oracle_phi_agreement(&ctx, &data, 1000, 6, DEFAULT_SEED)?;
        worst = worst.max(w);
        words += n;
    }
    let t = start.elapsed();
    Ok(outcome(worst <= 1e-9 && within(t, 10.0), format!("max |phi_m - oracle| = {worst:.2e} over {words} words, {:.2}s", t.as_secs_f64())))
}

fn hnn_relation() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for (name, l) in BUILTINS {
        let input = builtin(name)?;
        let fock = build_truncated_fock(&input, l, DEFAULT_DIM_CAP)?;
        let mask = fock.interior_mask();
        let up = fock.u_epsilon(Sign::Plus).matrix;
        let um = fock.u_epsilon(Sign::Minus).matrix;
        for b in input.b_basis_in(Sign::Plus) {
            let lhs = &up * fock.pi_action(&b).matrix * &um;
            let rhs = fock.pi_action(&input.transport(Sign::Plus, &b)).matrix;
            worst = worst.max(masked_residual(&lhs, &rhs, &mask));
        }
    }
    Ok(outcome(worst <= 1e-9, format!("max interior residual {worst:.2e}")))
}

fn isometry_lemma() -> Result<Outcome> {
    let start = Instant::now();
    let (z4, n4) = lemma_iso_residual(&context(builtin("z4-sigma2")?), 3)?;
    let (s3, n3) = lemma_iso_residual(&context(builtin("s3-quotient")?), 2)?;
    let t = start.elapsed();
    let worst = z4.max(s3);
    Ok(outcome(
        worst <= 1e-9 && n4 > 0 && n3 > 0 && within(t, 60.0),
        format!("max residual {worst:.2e} over {n4} + {n3} words, {:.2}s", t.as_secs_f64()),
    ))
}

fn haar_invariance() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (name, _) in BUILTINS {
        let ctx = context(builtin(name)?);
        let mut elements: Vec<SymbolicElement> =
            ctx.input().a().basis().iter().map(|a| SymbolicElement::from_a(&ctx, a)).collect();
        for n in 1..=2 {
            for key in basis_words(&ctx, n) {
                elements.push(SymbolicElement::basis_word(&ctx, key)?);
            }
        }
        for x in &elements {
            let (l, r) = x.haar_invariance_residual();
            worst = worst.max(l).max(r);
        }
        count += elements.len();
    }
    Ok(outcome(worst <= 1e-9, format!("max residual {worst:.2e} over {count} basis elements")))
}

fn gns_consistency() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for (name, l) in BUILTINS {
        let input = builtin(name)?;
        let fock = build_truncated_fock(&input, l, DEFAULT_DIM_CAP)?;
        let ctx = context(input);
        let omega = fock.vacuum();
        let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
        for _ in 0..200 {
            let x = random_element(&ctx, &mut rng, l, 3);
            let v = fock_evaluate(&x, &fock)?.matrix * &omega;
            let expected = (&x.star() * &x).phi_m();
            worst = worst.max((C64::new(v.norm_squared(), 0.0) - expected).norm());
        }
    }
    Ok(outcome(worst <= 1e-8, format!("max | |pi(x)Omega|^2 - phi_m(x*x) | = {worst:.2e}, 200 elements per builtin")))
}

fn failures(checks: &[CheckReport]) -> String {
    let bad: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| format!("{} ({:.2e})", c.name, c.residual)).collect();
    if bad.is_empty() {
        format!("{} checks", checks.len())
    } else {
        format!("failing: {}", bad.join(", "))
    }
}

fn julg_valette() -> Result<Outcome> {
    let jv = build_jv_data(&context(builtin("z4-sigma2")?), 2)?;
    let mut checks = jv.verify_commutators()?;
    checks.extend(jv.verify_augmented());
    let named = |n: &str| checks.iter().any(|c| c.name.starts_with(n));
    let covered = named("F*F") && named("FF*") && named("[F, pi(a)]") && named("[F, pi(u)] top") && named("[F, pi(u*)] image");
    let pass = covered && checks.iter().all(|c| c.pass);
    Ok(outcome(pass, failures(&checks)))
}

fn homotopy_path() -> Result<Outcome> {
    let jv = build_jv_data(&context(builtin("z4-sigma2")?), 2)?;
    let (path, checks) = hnn_core::jvkk::homotopy(&jv, &[0.0, 0.25, 0.5, 0.75, 1.0], DEFAULT_SEED, 50)?;
    let mut detail = failures(&checks);
    if let Some(n) = path.branch_note {
        detail.push_str(&format!("; {n}"));
    }
    Ok(outcome(checks.iter().all(|c| c.pass), detail))
}

fn trivial_case() -> Result<Outcome> {
    let ctx = context(builtin("trivial")?);
    let mut worst: f64 = 0.0;
    for n in -4..=4 {
        let expected = if n == 0 { 1.0 } else { 0.0 };
        worst = worst.max((SymbolicElement::generator_power(&ctx, n).phi_m() - C64::new(expected, 0.0)).norm());
    }
    Ok(outcome(worst <= 1e-12, format!("max |phi_m(u^n) - delta_n0| = {worst:.2e} for |n| <= 4")))
}

fn full_run() -> Result<Outcome> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_hnn-forge"))
        .args(["run", "--builtin", "z4-sigma2"])
        .output()
        .expect("binary runs");
    let t = start.elapsed();
    let overall = String::from_utf8_lossy(&out.stdout).contains("overall: PASS");
    Ok(outcome(
        out.status.success() && overall && within(t, 120.0),
        format!("exit {:?}, {:.2}s", out.status.code(), t.as_secs_f64()),
    ))
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 oracle equivalence", oracle_equivalence),
        ("2 HNN relation on the Fock space", hnn_relation),
        ("3 isometry lemma", isometry_lemma),
        ("4 Haar invariance", haar_invariance),
        ("5 GNS consistency", gns_consistency),
        ("6 Julg-Valette operator", julg_valette),
        ("7 homotopy", homotopy_path),
        ("8 trivial case", trivial_case),
        ("9 full CLI run on z4-sigma2", full_run),
    ];
    let mut all = true;
    for (name, f) in criteria {
        let o = f().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        all &= o.pass;
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if !all {
        std::process::exit(1);
    }
}
