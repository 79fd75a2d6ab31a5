//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion, nonzero exit on any failure.
//!
//! `cargo test -p mbm-core --release --test acceptance -- 3 7` runs only criteria 3 and 7.

mod common;

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use common::nested_dirichlet;
use mbm_core::harness::config::parse_config;
use mbm_core::harness::{parse_config_with, run_experiment, Overrides, Report, Verdict};
use mbm_core::localtime::dirichlet_integral;
use mbm_core::regularity::v_constant;
use mbm_core::stats::mean_se;
use mbm_core::synth::{verify_variance_bounds, KernelQuadrature, SynthSettings, Synthesizer};
use mbm_core::{run_replicas, Error, HurstFunction, HurstKind, Representation, TimeGrid, VGrouping};

struct Outcome {
    pass: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            pass: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }
}

/// Config text with the common header filled in.
struct Setup<'a> {
    rep: &'a str,
    hurst: &'a str,
    params: &'a str,
    grid: (f64, f64, usize),
    replicas: usize,
    seed: u64,
    kappa: f64,
}

impl Setup<'_> {
    fn doc(&self, statistics: &str) -> String {
        let (t0, dt, n) = self.grid;
        format!(
            "version = 1\nseed = {}\nreplicas = {}\nrepresentation = \"{}\"\n\n\
             [hurst]\nkind = \"{}\"\nparams = {}\n\n\
             [grid]\nt0 = {t0:?}\ndt = {dt:?}\nn = {n}\n\n\
             [localtime]\nkappa = {:?}\n\n{statistics}",
            self.seed, self.replicas, self.rep, self.hurst, self.params, self.kappa
        )
    }
}

const BM: Setup = Setup {
    rep: "fbm-exact",
    hurst: "constant",
    params: "[0.5]",
    grid: (0.0, 1.0 / 1024.0, 1025),
    replicas: 200,
    seed: 2024,
    kappa: 1.0,
};

const SINE: &str = "[0.5, 0.2, 6.283185307179586, 0.0]";

fn run_in(dir: &Path, text: &str) -> Report {
    let cfg = parse_config_with(
        text,
        &Overrides {
            output: Some(dir.to_path_buf()),
            ..Default::default()
        },
    )
    .unwrap_or_else(|e| panic!("config rejected: {e}\n{text}"));
    run_experiment(&cfg).expect("experiment runs")
}

fn run(text: &str) -> Report {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), text)
}

fn summary(r: &Report, i: usize) -> &Value {
    let s = &r.statistics[i];
    if let Some(e) = &s.error {
        panic!("statistic {} errored: {e}", s.name);
    }
    &s.summary
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or(f64::NAN)
}

fn occupation_identity() -> Outcome {
    let mut o = Outcome::new();
    let stat = "[[statistics]]\nname = \"occupation-identity\"\nindicators = 40\n";
    for (label, setup) in [
        ("fBm H=0.5", Setup { grid: (0.0, 1.0 / 4096.0, 4097), ..BM }),
        (
            "mBm moving-average sinusoidal",
            Setup {
                rep: "moving-average",
                hurst: "sinusoidal",
                params: SINE,
                grid: (0.0, 1.0 / 4096.0, 4097),
                ..BM
            },
        ),
    ] {
        let r = run(&setup.doc(stat));
        let s = summary(&r, 0);
        o.check(
            r.statistics[0].verdict == Verdict::Pass && r.statistics[0].failures == 0,
            format!(
                "{label}: max rel error {:.2e} over {} replicas (tol 1e-12)",
                num(s, "max_rel_error"),
                r.statistics[0].replicas
            ),
        );
    }
    o
}

fn constant_h_reduction() -> Outcome {
    let mut o = Outcome::new();
    let h = HurstFunction::constant(0.5).unwrap();
    // only the checked times are synthesized
    let grid = TimeGrid::spanning(0.0, 1.0, 6).unwrap();
    let ks = [1usize, 2, 3, 4, 5];
    let settings = SynthSettings {
        kq: KernelQuadrature::default(),
        ..Default::default()
    };
    for rep in [
        Representation::MovingAverage,
        Representation::RiemannLiouville,
        Representation::Harmonizable,
    ] {
        let synth = Synthesizer::new(&h, &grid, rep, &settings).unwrap();
        let ens = run_replicas(10_000, 77, 0.0, |_, s| {
            let p = synth.sample(s)?;
            Ok(ks.map(|k| p.values[k] * p.values[k]))
        })
        .unwrap();
        let stats: Vec<(f64, f64, f64)> = (0..ks.len())
            .map(|j| {
                let sq: Vec<f64> = ens.items.iter().map(|r| r[j]).collect();
                let (m, se) = mean_se(&sq);
                (grid.time(ks[j]), m, se)
            })
            .collect();
        let scale = if rep == Representation::Harmonizable {
            stats.iter().map(|s| s.1).sum::<f64>() / stats.iter().map(|s| s.0).sum::<f64>()
        } else {
            1.0
        };
        let worst = stats
            .iter()
            .map(|&(t, m, se)| (m / scale - t).abs() / (se / scale))
            .fold(0.0, f64::max);
        o.check(
            worst <= 3.0,
            format!(
                "{rep}: max |Var/c - t|/SE = {worst:.2} at t in {{0.2..1}}, c = {scale:.4}, 10^4 replicas"
            ),
        );
    }
    o
}

fn variance_bounds() -> Outcome {
    let mut o = Outcome::new();
    let kinds = [
        ("linear", HurstKind::from_params("linear", &[0.3, 0.4]).and_then(|k| HurstFunction::new(k, 1.0))),
        ("sinusoidal", HurstKind::from_params("sinusoidal", &[0.5, 0.2, std::f64::consts::TAU, 0.0])
                .and_then(|k| HurstFunction::new(k, 1.0))),
    ];
    for (label, h) in kinds {
        let h = h.unwrap();
        for rep in [
            Representation::MovingAverage,
            Representation::RiemannLiouville,
            Representation::Harmonizable,
        ] {
            let r = verify_variance_bounds(&h, (0.05, 1.0), 50, KernelQuadrature::default(), rep, 31).unwrap();
            let dets: Vec<String> = r
                .determinants
                .iter()
                .map(|d| format!("m={} violations {} min ratio {:.3}", d.m, d.violations, d.min_ratio))
                .collect();
            o.check(
                r.violations() == 0,
                format!(
                    "{label} {rep}: lower-bound violations {} (min ratio {:.3}); {}",
                    r.lower_violations,
                    r.min_lower_ratio,
                    dets.join(", ")
                ),
            );
        }
    }
    o
}

fn moments() -> Outcome {
    let mut o = Outcome::new();
    let levy = Setup {
        grid: (0.0, 1.0 / 65536.0, 65537),
        replicas: 4000,
        ..BM
    };
    let r = run(&levy.doc(
        "[[statistics]]\nname = \"moments\"\nmode = \"levy\"\norders = [1, 2, 3]\nlevel = { mode = \"fixed\", x = 0.0 }\n",
    ));
    for e in summary(&r, 0)["orders"].as_array().unwrap() {
        let z = num(e, "z");
        o.check(
            z <= 3.0,
            format!(
                "BM E[L(1,0)^{}] = {:.4} ± {:.4} vs closed form {:.4} (z = {z:.2})",
                e["m"],
                num(e, "mean"),
                num(e, "se"),
                num(e, "closed_form")
            ),
        );
    }
    let mbm = Setup {
        rep: "moving-average",
        hurst: "sinusoidal",
        params: SINE,
        grid: (0.0, 1.0 / 4096.0, 4097),
        replicas: 1000,
        ..BM
    };
    let r = run(&mbm.doc(
        "[[statistics]]\nname = \"moments\"\nmode = \"fit\"\norders = [2, 3, 4, 5]\nt = 0.5\nwindow = 0.25\nlevel = { mode = \"path-point\" }\n",
    ));
    let s = summary(&r, 0);
    o.check(
        r.statistics[0].verdict == Verdict::Pass,
        format!(
            "mBm normalized moments m=2..5 dominated by C^m (m!)^H: {} with C = {:.4} (halves {:.4}, {:.4})",
            s["dominated"],
            num(s, "c_hat"),
            s["c_hat_halves"][0].as_f64().unwrap_or(f64::NAN),
            s["c_hat_halves"][1].as_f64().unwrap_or(f64::NAN)
        ),
    );
    o
}

fn dirichlet() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let m = rng.gen_range(1..=3);
        let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.5..0.8)).collect();
        let h = rng.gen_range(0.1..3.0);
        let closed = dirichlet_integral(&b, h).unwrap();
        let quad = nested_dirichlet(&b, h);
        worst = worst.max((closed - quad).abs() / closed.abs());
    }
    o.check(worst <= 1e-6, format!("10 random instances, max rel error {worst:.2e} (tol 1e-6)"));
    o
}

fn holder() -> Outcome {
    let mut o = Outcome::new();
    for h in [0.3, 0.5, 0.7] {
        let setup = Setup {
            params: &format!("[{h}]"),
            grid: (0.0, 1.0 / 65536.0, 65537),
            replicas: 1000,
            ..BM
        };
        let r = run(&setup.doc(
            "[[statistics]]\nname = \"holder-path\"\nt0 = 0.5\ndelta_max = 0.25\nscales = 8\ntolerance = 0.05\n",
        ));
        let s = summary(&r, 0);
        o.check(
            r.statistics[0].verdict == Verdict::Pass,
            format!("fBm H={h}: path exponent {:.4} (target {h}, tol 0.05)", num(s, "alpha_hat")),
        );
    }
    let w = 1.0 / 32.0;
    for t0 in [0.5, 1.0 / 12.0, 0.25] {
        let setup = Setup {
            rep: "moving-average",
            hurst: "sinusoidal",
            params: SINE,
            grid: (t0, w / 8192.0, 8193),
            replicas: 1000,
            ..BM
        };
        let r = run(&setup.doc(&format!(
            "[[statistics]]\nname = \"holder-localtime\"\nt0 = {t0:?}\ndelta_max = {w:?}\nscales = 8\ntolerance = 0.07\n"
        )));
        let s = summary(&r, 0);
        o.check(
            r.statistics[0].verdict == Verdict::Pass,
            format!(
                "mBm local time at t0={t0:.4}: exponent {:.4} (target 1-H(t0) = {:.4}, tol 0.07)",
                num(s, "alpha_hat"),
                num(s, "target")
            ),
        );
    }
    o
}

fn chung() -> Outcome {
    let mut o = Outcome::new();
    let grid = (0.0, 0.1 / 65536.0, 65537);
    let stat = "[[statistics]]\nname = \"chung\"\ndelta_max = 0.1\ndelta_floor = 1e-4\n";
    let r = run(&Setup { grid, replicas: 1000, ..BM }.doc(stat));
    let s = summary(&r, 0);
    o.check(
        s["in_bracket"] == true,
        format!(
            "BM median final running inf {:.4} (IQR {:.4}..{:.4}), bracket [0.85, 1.45]",
            num(s, "median"),
            num(s, "q25"),
            num(s, "q75")
        ),
    );
    let mbm = Setup {
        rep: "moving-average",
        hurst: "linear",
        params: "[0.5, 0.1]",
        grid,
        replicas: 1000,
        ..BM
    };
    let r = run(&mbm.doc(&format!("{stat}compare_bm = true\n")));
    let s = summary(&r, 0);
    o.check(
        num(s, "bm_p_value") > 0.01,
        format!(
            "mBm H(t0)=0.5 vs BM: medians {:.4} / {:.4}, energy-test p = {:.3} (need > 0.01)",
            num(s, "median"),
            num(s, "bm_median"),
            num(s, "bm_p_value")
        ),
    );
    o
}

fn lil() -> Outcome {
    let mut o = Outcome::new();
    let ma = v_constant(0.5, Representation::MovingAverage, VGrouping::Printed).unwrap();
    o.check(ma == 1.0, format!("v_constant(0.5, moving-average) = {ma:.17}"));
    let hz = v_constant(0.5, Representation::Harmonizable, VGrouping::Printed).unwrap();
    let want = (2.0 * std::f64::consts::PI).sqrt();
    o.check(
        (hz - want).abs() <= 1e-6,
        format!("v_constant(0.5, harmonizable) = {hz:.10} (sqrt(2 pi) = {want:.10})"),
    );
    let setup = Setup {
        rep: "moving-average",
        grid: (0.0, 0.1 / 65536.0, 65537),
        replicas: 1000,
        ..BM
    };
    let r = run(&setup.doc("[[statistics]]\nname = \"lil\"\ndelta_max = 0.1\ndelta_floor = 1e-4\n"));
    let s = summary(&r, 0);
    o.check(
        r.statistics[0].verdict == Verdict::Pass,
        format!("moving-average BM median final running sup {:.4}, bracket [1.0, 1.9]", num(s, "median")),
    );
    o
}

fn lass() -> Outcome {
    let mut o = Outcome::new();
    let setup = Setup {
        rep: "moving-average",
        hurst: "sinusoidal",
        params: SINE,
        replicas: 1000,
        ..BM
    };
    let describe = |s: &Value| {
        s["per_rho"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| format!("rho {} d {:.2e} p {:.3}", x["rho"], num(x, "distance"), num(x, "p_value")))
            .collect::<Vec<_>>()
            .join("; ")
    };
    for t0 in [0.5, 0.25] {
        let r = run(&setup.doc(&format!("[[statistics]]\nname = \"lass-localtime\"\nt0 = {t0}\n")));
        let s = summary(&r, 0);
        o.check(
            s["converged"] == true,
            format!("t0={t0} H0={:.2}: monotone {} final p {:.3} [{}]", num(s, "h0"), s["monotone"], num(s, "final_p"), describe(s)),
        );
    }
    let r = run(&setup.doc("[[statistics]]\nname = \"lass-localtime\"\nt0 = 0.5\nreference_shift = 0.2\n"));
    let s = summary(&r, 0);
    o.check(
        num(s, "final_p") < 0.01,
        format!("negative control (reference H0+0.2): final p {:.4} (need < 0.01)", num(s, "final_p")),
    );
    o
}

fn limit_theorems() -> Outcome {
    let mut o = Outcome::new();
    let setup = Setup {
        rep: "moving-average",
        hurst: "sinusoidal",
        params: SINE,
        replicas: 1000,
        ..BM
    };
    for y in [0.0, 1.0] {
        let r = run(&setup.doc(&format!(
            "[[statistics]]\nname = \"weighted-occupation\"\nt0 = 0.5\nrho = 0.01\ny = {y:?}\ngrid_n = 4096\n"
        )));
        for f in summary(&r, 0)["functions"].as_array().unwrap() {
            let p = num(f, "p_value");
            o.check(
                p > 0.01,
                format!(
                    "y={y} {}: mean {:.4} vs reference {:.4}, p = {p:.3}",
                    f["function"]["kind"].as_str().unwrap_or("?"),
                    num(f, "mean"),
                    num(f, "reference_mean")
                ),
            );
        }
    }
    let bad = setup.doc("[[statistics]]\nname = \"weighted-occupation\"\nt0 = 0.5\na = 0.4\n");
    let rejected = match parse_config(&bad) {
        Err(Error::Config(v)) => v.iter().any(|v| v.path.ends_with(".a")),
        _ => false,
    };
    o.check(rejected, format!("scaling pair a = 0.4 < H(t0) rejected at config time: {rejected}"));
    o
}

fn exponent_sensitivity() -> Outcome {
    let mut o = Outcome::new();
    let bm = Setup {
        grid: (0.0, 5e-4 / 65536.0, 65537),
        replicas: 400,
        ..BM
    };
    let mbm = Setup {
        rep: "moving-average",
        hurst: "linear",
        params: "[0.3, 0.4]",
        grid: (0.5, 5e-9, 32769),
        replicas: 400,
        ..BM
    };
    let space = Setup {
        grid: (0.0, 4e-12 / 65536.0, 65537),
        replicas: 400,
        kappa: 2.0,
        ..BM
    };
    // dyadic t0 and dt keep every grid time exact at this resolution
    let mbm_space = Setup {
        params: "[0.5, 0.4]",
        grid: (1.0 / 1024.0, 2f64.powi(-54), 32769),
        kappa: 2.0,
        ..mbm
    };
    let ladder = |s: &Setup| format!("delta_max = {:?}\ndelta_floor = 1e-8\n", s.grid.1 * (s.grid.2 - 1) as f64);
    let cases = [
        ("BM local modulus, x = 0", bm.doc(&format!(
            "[[statistics]]\nname = \"local-modulus\"\nlevel = {{ mode = \"fixed\", x = 0.0 }}\n{}",
            ladder(&bm)
        ))),
        ("BM uniform modulus", bm.doc(&format!("[[statistics]]\nname = \"uniform-modulus\"\n{}", ladder(&bm)))),
        ("mBm local modulus, x = B(t0)", mbm.doc(&format!(
            "[[statistics]]\nname = \"local-modulus\"\nt = 0.5\nlevel = {{ mode = \"path-point\" }}\n{}",
            ladder(&mbm)
        ))),
        ("mBm uniform modulus", mbm.doc(&format!("[[statistics]]\nname = \"uniform-modulus\"\n{}", ladder(&mbm)))),
        ("BM space modulus", space.doc("[[statistics]]\nname = \"space-modulus\"\n")),
        ("mBm space modulus", mbm_space.doc("[[statistics]]\nname = \"space-modulus\"\n")),
    ];
    for (label, text) in cases {
        let r = run(&text);
        let s = summary(&r, 0);
        o.check(
            r.statistics[0].verdict == Verdict::Pass,
            format!(
                "{label}: growth {:.4} (bounded < 0.05), inflation {:.2} at delta {:.2e} (need >= 5)",
                num(s, "growth_exponent"),
                num(s, "inflation"),
                num(s, "smallest_delta")
            ),
        );
    }
    o
}

fn determinism() -> Outcome {
    let mut o = Outcome::new();
    let setup = Setup {
        rep: "moving-average",
        hurst: "sinusoidal",
        params: SINE,
        grid: (0.0, 1.0 / 2048.0, 2049),
        replicas: 200,
        ..BM
    };
    let text = setup.doc(
        "[[statistics]]\nname = \"occupation-identity\"\n\n\
         [[statistics]]\nname = \"holder-localtime\"\ndelta_max = 0.25\n\n\
         [[statistics]]\nname = \"lil\"\ndelta_max = 0.1\ndelta_floor = 0.005\n\n\
         [[statistics]]\nname = \"uniform-modulus\"\ndelta_max = 0.5\ndelta_floor = 0.005\n\n\
         [[statistics]]\nname = \"weighted-occupation\"\ngrid_n = 512\npermutations = 100\n",
    );
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, rb) = (run_in(a.path(), &text), run_in(b.path(), &text));
    for st in ra.statistics.iter().filter(|s| s.error.is_some()) {
        o.check(false, format!("{} errored: {}", st.name, st.error.as_deref().unwrap_or("")));
    }
    let json_same = ra.deterministic_json().unwrap() == rb.deterministic_json().unwrap();
    o.check(json_same, "report.json identical apart from runtime".into());
    let files: Vec<&String> = ra.statistics.iter().flat_map(|s| &s.files).collect();
    let differing: Vec<&&String> = files
        .iter()
        .filter(|f| std::fs::read(a.path().join(f)).ok() != std::fs::read(b.path().join(f)).ok())
        .collect();
    o.check(
        differing.is_empty() && !files.is_empty(),
        format!("{} output files byte-identical, differing: {differing:?}", files.len()),
    );
    o
}

type Criterion = (u32, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 12] = [
    (1, "occupation identity", occupation_identity),
    (2, "constant-H reduction", constant_h_reduction),
    (3, "variance bounds", variance_bounds),
    (4, "moment structure", moments),
    (5, "Dirichlet integral", dirichlet),
    (6, "Hölder exponents", holder),
    (7, "Chung statistic", chung),
    (8, "LIL constants", lil),
    (9, "LASS of local time", lass),
    (10, "limit theorems", limit_theorems),
    (11, "exponent sensitivity", exponent_sensitivity),
    (12, "determinism", determinism),
];

fn main() {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, f) in CRITERIA {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let clock = Instant::now();
        let out = f();
        println!(
            "[{}] {id:>2} {name} ({:.1}s)",
            if out.pass { "PASS" } else { "FAIL" },
            clock.elapsed().as_secs_f64()
        );
        for l in &out.lines {
            println!("       {l}");
        }
        if !out.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
