//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! Criteria 3 and 7 need the four normalized dataset files in
//! `$SBRFEW_DATA_DIR` (`camel`, `ambari`, `derby`, `wicket`, as `.csv` or
//! `.jsonl`). Criterion 7 also needs `SBRFEW_FULL_SCALE=1` and a loadable
//! pretrained encoder; it is a soft gate and never fails the suite.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sbrfew_core::corpus::toy::{toy_corpus, ToyCorpusSpec};
use sbrfew_core::corpus::{write_csv, BugReport, Label};
use sbrfew_core::evalkit::{
    mcc, precision_recall_f, roc_auc, run_cv, stratified_folds, ConfusionMatrix, CvOptions, CvTechnique,
};
use sbrfew_core::fewshot::{ContrastivePair, EncoderBackend, HashEncoder, PretrainedConfig, PretrainedEncoder};
use sbrfew_core::runner::{ExperimentConfig, ResultsTable};
use sbrfew_core::{load_dataset, DataFormat, LabeledDataset, Result};

const DATA_DIR_ENV: &str = "SBRFEW_DATA_DIR";
const FULL_SCALE_ENV: &str = "SBRFEW_FULL_SCALE";
const DATASETS: [&str; 4] = ["camel", "ambari", "derby", "wicket"];

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
    /// Reported but does not fail the suite.
    Soft(bool, String),
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sbrfew")
}

fn timed(budget: Duration, f: impl FnOnce() -> std::result::Result<String, String>) -> Verdict {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    match out {
        Ok(detail) if took <= budget => Verdict::Pass(format!("{detail}; {took:.2?} (budget {budget:?})")),
        Ok(detail) => Verdict::Fail(format!("{detail}; took {took:.2?}, budget {budget:?}")),
        Err(e) => Verdict::Fail(e),
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn pairwise_auc(truth: &[bool], scores: &[f64]) -> f64 {
    let (mut credit, mut pairs) = (0.0, 0.0);
    for (i, &ti) in truth.iter().enumerate() {
        for (j, &tj) in truth.iter().enumerate() {
            if ti && !tj {
                pairs += 1.0;
                credit += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
    }
    credit / pairs
}

fn criterion_1() -> Verdict {
    timed(Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let hi = if rng.gen_bool(0.25) { 2 } else { 1000 };
            let [tp, fp, tn, fn_] = [0u64; 4].map(|_| rng.gen_range(0..=hi));
            let cm = ConfusionMatrix::new(tp, fp, tn, fn_);
            let (t, f, n, m) = (tp as f64, fp as f64, tn as f64, fn_ as f64);
            let den = [t + f, t + m, n + f, n + m];
            let want_mcc = if den.contains(&0.0) {
                0.0
            } else {
                (t * n - f * m) / den.iter().product::<f64>().sqrt()
            };
            let p = ratio(t, t + f);
            let r = ratio(t, t + m);
            let want = [want_mcc, p, r, ratio(2.0 * p * r, p + r)];
            let (gp, gr, gf) = precision_recall_f(&cm);
            let got = [mcc(&cm), gp, gr, gf];
            for (g, w) in got.iter().zip(want) {
                ensure((g - w).abs() <= 1e-12, || format!("{cm:?}: {got:?} vs {want:?}"))?;
            }
        }
        let mut sets = 0;
        while sets < 500 {
            let n = rng.gen_range(2..=50);
            let truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
            if truth.iter().all(|&b| b) || truth.iter().all(|&b| !b) {
                continue;
            }
            let levels = if sets % 2 == 0 { 4 } else { 1 << 20 };
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
            let labels: Vec<Label> = truth.iter().map(|&b| Label::from_bool(b)).collect();
            let got = roc_auc(&labels, &scores).map_err(|e| e.to_string())?;
            let want = pairwise_auc(&truth, &scores);
            ensure((got - want).abs() <= 1e-12, || format!("auc {got} vs pairwise {want}"))?;
            sets += 1;
        }
        Ok("1000 confusion matrices, 500 score sets agree to 1e-12".into())
    })
}

fn criterion_2() -> Verdict {
    timed(Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for case in 0..200 {
            let n = rng.gen_range(10..=500);
            let p = if case % 4 == 0 { 0.02 } else { rng.gen_range(0.02..0.5) };
            let mut labels: Vec<Label> = (0..n).map(|_| Label::from_bool(rng.gen_bool(p))).collect();
            labels[rng.gen_range(0..n)] = Label::Security;
            let k = rng.gen_range(2..=10.min(n));
            let seed = rng.gen();
            let folds = stratified_folds(&labels, k, seed).map_err(|e| e.to_string())?;
            let mut hits = vec![0usize; n];
            let (mut sizes, mut pos) = (vec![0usize; k], vec![0usize; k]);
            for f in 0..k {
                for i in folds.test_indices(f) {
                    hits[i] += 1;
                    sizes[f] += 1;
                    pos[f] += labels[i].is_security() as usize;
                }
            }
            let spread = |v: &[usize]| v.iter().max().unwrap() - v.iter().min().unwrap();
            ensure(hits.iter().all(|&h| h == 1), || format!("case {case}: not a partition"))?;
            ensure(spread(&sizes) <= 1, || format!("case {case}: sizes {sizes:?}"))?;
            ensure(spread(&pos) <= 1, || format!("case {case}: positives {pos:?}"))?;
            let again = stratified_folds(&labels, k, seed).map_err(|e| e.to_string())?;
            ensure(again == folds, || format!("case {case}: seed not reproducible"))?;
        }
        Ok("200 random datasets: partition, size and positive balance, reproducible".into())
    })
}

fn find_dataset(dir: &Path, name: &str) -> Option<PathBuf> {
    let title = format!("{}{}", name[..1].to_uppercase(), &name[1..]);
    [name, title.as_str()]
        .iter()
        .flat_map(|stem| ["csv", "jsonl"].map(|ext| dir.join(format!("{stem}.{ext}"))))
        .find(|p| p.is_file())
}

fn dataset_files() -> std::result::Result<Vec<PathBuf>, String> {
    let dir = std::env::var_os(DATA_DIR_ENV).ok_or_else(|| format!("{DATA_DIR_ENV} not set"))?;
    let dir = PathBuf::from(dir);
    DATASETS
        .iter()
        .map(|n| find_dataset(&dir, n).ok_or_else(|| format!("{n} not found in {}", dir.display())))
        .collect()
}

fn criterion_3() -> Verdict {
    let files = match dataset_files() {
        Ok(f) => f,
        Err(why) => return Verdict::Skip(format!("dataset files unavailable ({why})")),
    };
    let expected: BTreeMap<&str, (usize, usize)> = [
        ("camel", (58, 580)),
        ("ambari", (48, 871)),
        ("derby", (157, 731)),
        ("wicket", (43, 663)),
    ]
    .into();
    let out = match Command::new(bin()).arg("stats").args(&files).output() {
        Ok(o) => o,
        Err(e) => return Verdict::Fail(format!("cannot run stats: {e}")),
    };
    if !out.status.success() {
        return Verdict::Fail(format!("stats exited {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let mut seen = BTreeMap::new();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if let [name, total, security, _] = cols[..] {
            if let (Ok(t), Ok(s)) = (total.parse::<usize>(), security.parse::<usize>()) {
                seen.insert(name.to_lowercase(), (s, t));
            }
        }
    }
    for (name, want) in &expected {
        match seen.get(*name) {
            Some(got) if got == want => {}
            got => return Verdict::Fail(format!("{name}: got {got:?}, want {want:?}\n{text}")),
        }
    }
    Verdict::Pass("stats prints 58/580, 48/871, 157/731, 43/663".into())
}

fn criterion_4() -> Verdict {
    timed(Duration::from_secs(120), || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let ds = toy_corpus(&ToyCorpusSpec {
            size: 200,
            positive_ratio: 0.1,
            ..Default::default()
        });
        write_csv(&ds, dir.path().join("toy.csv")).map_err(|e| e.to_string())?;
        let config = "seed = 0\nk = 5\n\n[[datasets]]\nname = \"toy\"\npath = \"toy.csv\"\n\n\
                      [[techniques]]\nkind = \"lr\"\n\n[[techniques]]\nkind = \"rf\"\n\n\
                      [[techniques]]\nkind = \"setfit\"\nbackend = \"hash\"\n";
        std::fs::write(dir.path().join("toy.toml"), config).map_err(|e| e.to_string())?;
        let out = Command::new(bin())
            .args(["run", "--config"])
            .arg(dir.path().join("toy.toml"))
            .arg("--out")
            .arg(dir.path().join("out"))
            .env("SBRFEW_OFFLINE", "1")
            .env("HF_HUB_OFFLINE", "1")
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || {
            format!("run exited {}: {}", out.status, String::from_utf8_lossy(&out.stderr))
        })?;
        let table = ResultsTable::read(dir.path().join("out/results.csv")).map_err(|e| e.to_string())?;
        let auc = |t: &str| {
            table
                .mean_rows()
                .find(|r| r.technique == t)
                .and_then(|r| r.metrics)
                .map(|m| m.auc)
                .ok_or_else(|| format!("no mean row for {t}"))
        };
        let (setfit, lr, rf) = (auc("setfit")?, auc("lr")?, auc("rf")?);
        let detail = format!("setfit {setfit:.3}, lr {lr:.3}, rf {rf:.3}");
        ensure(setfit >= 0.95 && lr >= 0.95 && rf >= 0.85, || format!("below floor: {detail}"))?;
        Ok(detail)
    })
}

fn criterion_5() -> Verdict {
    const WORDS: [&str; 8] = ["heap", "token", "render", "null", "auth", "cache", "race", "leak"];
    timed(Duration::from_secs(30), || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst: f64 = 0.0;
        for instance in 0..20 {
            let dim = rng.gen_range(3..=8);
            let mut enc = HashEncoder::new(dim).map_err(|e| e.to_string())?;
            for w in enc.projection_mut() {
                *w += rng.gen_range(-0.5..0.5);
            }
            let text = |rng: &mut ChaCha8Rng| {
                (0..rng.gen_range(1..4)).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
            };
            let mut pairs = Vec::new();
            while pairs.len() < 4 {
                let (a, b) = (text(&mut rng), text(&mut rng));
                if enc.embed(&[&a, &b]).is_err() {
                    continue;
                }
                pairs.push(ContrastivePair::new("a", a, "b", b, rng.gen_range(0..2) as f64));
            }
            let (_, grad) = enc.pair_loss_gradient(&pairs).map_err(|e| e.to_string())?;
            let h = 1e-6;
            let mut diff = 0.0;
            let mut scale: f64 = 0.0;
            for (k, g) in grad.iter().enumerate() {
                let at = |delta: f64| {
                    let mut e = enc.clone();
                    e.projection_mut()[k] += delta;
                    e.pair_loss(&pairs)
                };
                let fd = (at(h).map_err(|e| e.to_string())? - at(-h).map_err(|e| e.to_string())?) / (2.0 * h);
                diff += (g - fd).powi(2);
                scale = scale.max(g.abs()).max(fd.abs());
            }
            let norm_g = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            let rel = if norm_g == 0.0 && diff == 0.0 { 0.0 } else { diff.sqrt() / norm_g.max(scale) };
            worst = worst.max(rel);
            ensure(rel <= 1e-4, || format!("instance {instance}: relative error {rel:e}"))?;
        }
        Ok(format!("20 instances, worst relative error {worst:.1e}"))
    })
}

/// Predicts "not security" for everything with a constant score.
struct AlwaysNegative;

impl CvTechnique for AlwaysNegative {
    fn name(&self) -> String {
        "constant-negative".into()
    }

    fn fit_score(&self, _train: &[BugReport], test: &[&str], _seed: u64) -> Result<Vec<f64>> {
        Ok(vec![0.0; test.len()])
    }
}

fn criterion_6() -> Verdict {
    let mut sets: Vec<LabeledDataset> = vec![toy_corpus(&ToyCorpusSpec {
        size: 120,
        positive_ratio: 0.055,
        ..Default::default()
    })];
    if let Ok(files) = dataset_files() {
        for f in files {
            match load_dataset(&f, DataFormat::from_path(&f)) {
                Ok(d) => sets.push(d),
                Err(e) => return Verdict::Fail(e.to_string()),
            }
        }
    }
    let mut names = Vec::new();
    for ds in &sets {
        let out = match run_cv(ds, &AlwaysNegative, &CvOptions::default()) {
            Ok(o) => o,
            Err(e) => return Verdict::Fail(format!("{}: {e}", ds.name)),
        };
        let shown: Vec<String> = out.summary.values().iter().map(|v| format!("{v:.3}")).collect();
        if shown != ["0.500", "0.000", "0.000", "0.000", "0.000"] {
            return Verdict::Fail(format!("{}: {shown:?}", ds.name));
        }
        names.push(ds.name.clone());
    }
    Verdict::Pass(format!("AUC 0.500, MCC/F/precision/recall 0.000 on {}", names.join(", ")))
}

/// Published per-dataset AUCs used only to report the gap.
const REFERENCE_AUC: [(&str, [f64; 4]); 4] = [
    ("Camel", [0.772, 0.567, 0.508, 0.807]),
    ("Ambari", [0.500, 0.500, 0.500, 0.567]),
    ("Derby", [0.775, 0.659, 0.641, 0.834]),
    ("Wicket", [0.777, 0.557, 0.500, 0.865]),
];

fn criterion_7() -> Verdict {
    let files = match dataset_files() {
        Ok(f) => f,
        Err(why) => return Verdict::Skip(format!("soft gate: dataset files unavailable ({why})")),
    };
    if std::env::var(FULL_SCALE_ENV).as_deref() != Ok("1") {
        return Verdict::Skip(format!("soft gate: set {FULL_SCALE_ENV}=1 to run the multi-hour default config"));
    }
    if let Err(e) = PretrainedEncoder::load(PretrainedConfig::from_env()) {
        return Verdict::Skip(format!("soft gate: pretrained encoder unavailable ({e})"));
    }
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let mut cfg = match ExperimentConfig::load(root.join("configs/full.toml")) {
        Ok(c) => c,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    for (entry, file) in cfg.datasets.iter_mut().zip(&files) {
        entry.path = file.canonicalize().unwrap_or_else(|_| file.clone());
    }
    let out_dir = root.join("target/acceptance-full-scale");
    let config_path = out_dir.join("full.toml");
    if let Err(e) = std::fs::create_dir_all(&out_dir).and_then(|_| std::fs::write(&config_path, cfg.to_toml())) {
        return Verdict::Fail(e.to_string());
    }
    let status = Command::new(bin())
        .args(["run", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&out_dir)
        .status();
    if let Err(e) = status {
        return Verdict::Fail(e.to_string());
    }
    let table = match ResultsTable::read(out_dir.join("results.csv")) {
        Ok(t) => t,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let mut wins = 0;
    let mut lines = Vec::new();
    for (name, reference) in REFERENCE_AUC {
        let auc = |t: &str| {
            table
                .mean_rows()
                .find(|r| r.dataset == name && r.technique == t)
                .and_then(|r| r.metrics)
                .map(|m| m.auc)
        };
        let got: Vec<Option<f64>> = ["lr", "svm", "rf", "setfit"].iter().map(|t| auc(t)).collect();
        let baselines_max = got[..3].iter().flatten().fold(f64::MIN, |a, &b| a.max(b));
        if got[3].is_some_and(|s| s > baselines_max) {
            wins += 1;
        }
        let cells: Vec<String> = got
            .iter()
            .zip(reference)
            .map(|(g, r)| g.map_or("n/a".into(), |g| format!("{g:.3} ({:+.3})", g - r)))
            .collect();
        lines.push(format!("    {name}: lr/svm/rf/setfit AUC (gap) {}", cells.join(", ")));
    }
    let report = lines.join("\n");
    let _ = std::fs::write(out_dir.join("reference_gap.txt"), format!("{report}\n"));
    Verdict::Soft(wins >= 3, format!("setfit beats every baseline on {wins}/4 datasets\n{report}"))
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 7] = [
        ("metric oracle suite", criterion_1),
        ("fold suite", criterion_2),
        ("dataset table reproduction", criterion_3),
        ("toy corpus end to end", criterion_4),
        ("gradient check", criterion_5),
        ("degenerate predictor", criterion_6),
        ("full-scale direction", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match run() {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
            Verdict::Soft(true, d) => ("PASS", d),
            Verdict::Soft(false, d) => ("SOFT-FAIL", d),
        };
        println!("criterion {}: {tag} {name}: {detail}", i + 1);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
