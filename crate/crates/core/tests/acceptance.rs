//! One line per acceptance criterion. Runs as a plain binary so the lines are
//! always visible in `cargo test` output. A failing criterion prints FAIL with
//! its evidence; the process exits non-zero only when
//! `HEATMOI_ACCEPTANCE_STRICT=1` is set (see README).

use heatmoi::coeff::CoefficientFunction;
use heatmoi::config::RunConfig;
use heatmoi::emit::{diff, parse};
use heatmoi::recursion::{expand_t, expand_t_fixed, local_invariant};
use heatmoi::term::{Atom, Generator, Label, XTerm};
use heatmoi::verify::{self, Report, Suite};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::time::{Duration, Instant};

const COR32: &str = include_str!("golden/cor32.tex");

struct Outcome {
    passed: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(passed: bool, summary: impl Into<String>) -> Self {
        Outcome { passed, summary: summary.into(), details: Vec::new() }
    }
}

fn config(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn report_outcome(report: Report, elapsed: Duration) -> Outcome {
    let failing: Vec<&str> = report.checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
    let worst = report
        .checks
        .iter()
        .filter(|c| c.tolerance > 0.0)
        .map(|c| c.deviation / c.tolerance)
        .fold(0.0, f64::max);
    let summary = if failing.is_empty() {
        format!("{} checks, worst deviation/tolerance {worst:.1e}, {:.1}s", report.checks.len(), elapsed.as_secs_f64())
    } else {
        format!("failing: {}", failing.join(", "))
    };
    let mut out = Outcome::new(report.passed(), summary);
    out.details = report.to_string().lines().map(str::to_owned).collect();
    out
}

fn suite(s: Suite, cfg: &RunConfig) -> Outcome {
    let start = Instant::now();
    match verify::run(s, cfg) {
        Ok(r) => report_outcome(r, start.elapsed()),
        Err(e) => Outcome::new(false, format!("error: {e}")),
    }
}

fn term_counts() -> Outcome {
    const TARGET: [(u32, usize); 4] = [(0, 1), (2, 13), (4, 1046), (6, 140845)];
    let mut passed = true;
    let mut parts = Vec::new();
    let mut details = Vec::new();
    for (k, want) in TARGET {
        let start = Instant::now();
        let e = local_invariant(k).expect("even order");
        let secs = start.elapsed().as_secs_f64();
        let limit = match k {
            4 => 5.0,
            6 => 900.0,
            _ => f64::INFINITY,
        };
        let ok = e.len() == want && secs <= limit;
        passed &= ok;
        parts.push(format!("count({k})={} target {want} ({secs:.2}s)", e.len()));
        if e.len() != want {
            let by_family: Vec<String> = e.family_counts().iter().map(|(f, n)| format!("{f:?}:{n}")).collect();
            details.push(format!("k={k} terms per coefficient family {}", by_family.join(" ")));
        }
    }
    if !passed {
        let golden = parse(COR32).expect("golden file parses");
        let d = diff(&golden, &local_invariant(2).unwrap());
        if d.is_empty() {
            details.push("k=2 agrees with the golden file term by term (13 terms, identical coefficients)".into());
        } else {
            details.push("k=2 diff against the golden file:".into());
            details.extend(d);
        }
    }
    let mut out = Outcome::new(passed, parts.join(", "));
    out.details = details;
    out
}

fn golden() -> Outcome {
    let golden = parse(COR32).expect("golden file parses");
    let d = diff(&golden, &local_invariant(2).unwrap());
    let mut out = Outcome::new(d.is_empty(), format!("{} golden terms, {} differences", golden.len(), d.len()));
    out.details = d;
    out
}

fn one_slot(atom: Atom, formal: &[Label]) -> Vec<XTerm> {
    vec![XTerm::new(CoefficientFunction::one(), atom, formal)]
}

fn example_expansions() -> Outcome {
    let a = Atom::new(Generator::Apot, &[]);
    let b = Atom::new(Generator::A(5), &[]);
    let c = Atom::new(Generator::A(6), &[]);
    let dx = Atom::new(Generator::X, &[0]);
    let first = expand_t_fixed(&[one_slot(a.clone(), &[0]), one_slot(b.clone(), &[]), one_slot(c.clone(), &[])]);
    let expected = [
        vec![a.clone(), dx.clone(), b.clone(), c.clone()],
        vec![a.clone(), b.differentiate(0), c.clone()],
        vec![a.clone(), b.clone(), dx.clone(), c.clone()],
        vec![a.clone(), b.clone(), c.differentiate(0)],
        vec![a.clone(), b.clone(), c.clone(), dx],
    ];
    let five = first.len() == 5 && expected.iter().all(|args| first.get(&(vec![], args.clone())).is_some_and(|q| *q == 1.into()));
    let second = expand_t_fixed(&[one_slot(a, &[0, 1]), one_slot(b, &[2]), one_slot(c, &[])]).len();
    Outcome::new(five && second == 145, format!("first expansion {} terms (exact match {five}), second {second} terms", first.len()))
}

fn random_slots(rng: &mut ChaCha8Rng) -> Vec<(Generator, Vec<Label>)> {
    let n = rng.gen_range(1..=3);
    let mut slots: Vec<(Generator, Vec<Label>)> = (0..n)
        .map(|_| {
            let g = match rng.gen_range(0..3) {
                0 => Generator::X,
                1 => Generator::Apot,
                _ => Generator::A(rng.gen_range(0..4)),
            };
            let len = rng.gen_range(0..3);
            (g, (0..len).map(|_| rng.gen_range(0..4)).collect())
        })
        .collect();
    let t = rng.gen_range(0..n);
    let len = rng.gen_range(2..=3);
    slots[t].1 = (0..len).map(|_| rng.gen_range(0..4)).collect();
    slots
}

fn swaps() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let build = |s: &[(Generator, Vec<Label>)]| -> Vec<Vec<XTerm>> { s.iter().map(|(g, w)| one_slot(Atom::new(*g, &[]), w)).collect() };
    let mut mismatches = 0;
    for _ in 0..200 {
        let slots = random_slots(&mut rng);
        let candidates: Vec<usize> = (0..slots.len()).filter(|&j| slots[j].1.len() >= 2).collect();
        let t = candidates[rng.gen_range(0..candidates.len())];
        let pos = rng.gen_range(0..slots[t].1.len() - 1);
        let mut swapped = slots.clone();
        swapped[t].1.swap(pos, pos + 1);
        let (before, after) = (build(&slots), build(&swapped));
        if expand_t_fixed(&before) != expand_t_fixed(&after) || expand_t(2, &before) != expand_t(2, &after) {
            mismatches += 1;
        }
    }
    Outcome::new(mismatches == 0, format!("200 swaps, {mismatches} mismatches"))
}

fn heat_trace() -> Outcome {
    let cfg = config("heatfit.toml");
    let setup_ok = cfg.d == 2 && cfg.theta.get(0, 1) == 0.3 && cfg.truncation == 32 && cfg.check_truncation == Some(24) && cfg.y.is_none();
    let start = Instant::now();
    let main = suite(Suite::Heatfit, &cfg);
    let secs = start.elapsed().as_secs_f64();
    let control = suite(Suite::Heatfit, &config("heatfit_constant.toml"));
    let passed = setup_ok && main.passed && control.passed && secs <= 600.0;
    let mut out = Outcome::new(
        passed,
        format!(
            "theta=0.3 N=32: {} ({secs:.0}s); constant control: {}",
            if main.passed { "pass" } else { "fail" },
            if control.passed { "pass" } else { "fail" }
        ),
    );
    out.details = main.details.into_iter().chain(control.details).collect();
    out
}

fn main() {
    let defaults = RunConfig::default();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("term counts", Box::new(term_counts)),
        ("second-order golden file", Box::new(golden)),
        ("worked expansions (5 and 145 terms)", Box::new(example_expansions)),
        ("derivative-order swaps", Box::new(swaps)),
        ("divided differences", Box::new(|| suite(Suite::Dd, &defaults))),
        ("simplex vs spectral oracle", Box::new(|| suite(Suite::Moi, &defaults))),
        ("scalar symbol identities", Box::new(|| suite(Suite::Symbols, &defaults))),
        ("heat-trace coefficients", Box::new(heat_trace)),
        ("conjugation property", Box::new(|| suite(Suite::Conjugation, &config("conjugation.toml")))),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {} [{tag}] {name}: {}", i + 1, o.summary);
        for line in &o.details {
            println!("    {line}");
        }
        if !o.passed {
            failed.push(i + 1);
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("acceptance: failing criteria {failed:?}");
        if std::env::var("HEATMOI_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
