use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde_json::{json, Value};

use qcka::analysis::config::{ExperimentConfig, OutputConfig};
use qcka::analysis::otp::{otp_decrypt, otp_encrypt, placeholder_image, Ciphertext, KeyStore, UsageLedger};
use qcka::analysis::pipeline::{run_pipeline, PipelineOutcome, PipelineStatus};
use qcka::analysis::report::{self, Report, Timing};
use qcka::analysis::studies::{reference_topologies, run_akr_study, run_finite_key_sweep, MEASURED_RATE_HZ};
use qcka::analysis::surface::topology_noise_surface;
use qcka::keyrate::{akr, finite_key_length, optimize_budget, RateInputs, SecurityBudget};
use qcka::network_sim::{run_session, SessionOutcome};
use qcka::postprocess::packed::PackedBits;
use qcka::protocol::{estimate_params, RoundLedger};
use qcka::{rng, Error, Result};

use crate::{Common, SessionOverrides};

const LEDGER_FILE: &str = "ledger.bin";

struct Run {
    cfg: ExperimentConfig,
    out: PathBuf,
    digest: String,
    timing: Timing,
    clock: Instant,
}

impl Run {
    fn load(command: &str, c: &Common, session: Option<&SessionOverrides>) -> Result<Self> {
        let mut cfg = ExperimentConfig::load(&c.config)?;
        if let Some(seed) = c.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &c.out {
            cfg.output.dir = out.clone();
        }
        cfg.output.gnuplot |= c.gnuplot;
        if let Some(s) = session {
            if let Some(l) = s.rounds {
                cfg.protocol.rounds = Some(l);
            }
            if let Some(p) = s.p {
                cfg.protocol.p = p;
            }
        }
        cfg.validate()?;
        // The output location is not part of the experiment.
        let mut canonical = cfg.clone();
        canonical.output = OutputConfig::default();
        let digest = canonical.digest();
        let out = cfg.output.dir.clone();
        Ok(Self { cfg, out, digest, timing: Timing::new(command), clock: Instant::now() })
    }

    fn lap(&mut self, stage: &str) {
        self.timing.record(stage, self.clock.elapsed().as_secs_f64());
        self.clock = Instant::now();
    }

    fn finish(mut self, command: &str, body: Value) -> Result<()> {
        self.lap("write");
        let path = self.out.join(format!("{command}.json"));
        Report::new(command, self.cfg.seed, Some(self.digest.clone()), body)?.write(&path)?;
        self.timing.write(&Timing::sidecar_path(&path))?;
        println!("{}", path.display());
        Ok(())
    }
}

fn default_ledger(run: &Run, ledger: Option<PathBuf>) -> PathBuf {
    ledger.unwrap_or_else(|| run.out.join(LEDGER_FILE))
}

fn read_ledger(path: &Path) -> Result<RoundLedger> {
    let f = fs::File::open(path).map_err(|e| Error::Config(format!("cannot open ledger {}: {e}", path.display())))?;
    RoundLedger::read_binary(std::io::BufReader::new(f))
}

/// Observed disagreement per Bob on all type-1 rounds and the odd-parity
/// fraction on all type-2 rounds.
fn empirical_rates(l: &RoundLedger) -> Value {
    let flags = l.schedule.flags.words();
    let m = l.schedule.m();
    let key_rounds = (l.rounds() - m).max(1) as f64;
    let alice = l.outcomes[0].words();
    let q_ab: Vec<f64> = l.outcomes[1..]
        .iter()
        .map(|b| {
            let d: u32 = alice.iter().zip(b.words()).zip(flags).map(|((a, b), f)| ((a ^ b) & !f).count_ones()).sum();
            d as f64 / key_rounds
        })
        .collect();
    let odd: u32 = (0..flags.len())
        .map(|w| (l.outcomes.iter().fold(0u64, |acc, row| acc ^ row.words()[w]) & flags[w]).count_ones())
        .sum();
    json!({ "q_ab": q_ab, "q_x": odd as f64 / m.max(1) as f64 })
}

pub fn simulate(c: &Common, s: &SessionOverrides) -> Result<u8> {
    let mut run = Run::load("simulate", c, Some(s))?;
    let cfg = &run.cfg;
    let outcome = run_session(
        &cfg.topology()?,
        cfg.session_switching()?.as_ref(),
        &cfg.drift,
        &cfg.noise()?,
        &cfg.session_plan(),
    )?;
    run.lap("session");
    let body = match outcome {
        SessionOutcome::Empty { expected_rounds } => json!({ "status": "empty", "expected_rounds": expected_rounds }),
        SessionOutcome::Completed(session) => {
            let path = run.out.join(LEDGER_FILE);
            fs::create_dir_all(&run.out)?;
            session.ledger.write_binary(std::io::BufWriter::new(fs::File::create(&path)?))?;
            json!({
                "status": "completed",
                "rounds": session.ledger.rounds(),
                "test_rounds": session.ledger.schedule.m(),
                "p": session.ledger.schedule.p,
                "parties": session.ledger.party_names,
                "rate_hz": session.rate_hz,
                "expected_rounds": session.expected_rounds,
                "measuring_time_s": session.measuring_time_s,
                "empirical": empirical_rates(&session.ledger),
                "ledger": LEDGER_FILE,
            })
        }
    };
    run.finish("simulate", body)?;
    Ok(0)
}

pub fn estimate(c: &Common, ledger: Option<PathBuf>) -> Result<u8> {
    let mut run = Run::load("estimate", c, None)?;
    let ledger = read_ledger(&default_ledger(&run, ledger))?;
    let settings = run.cfg.pipeline_settings()?;
    let est = estimate_params(&ledger, rng::derive_seed(settings.seed, "pe-sample"))?;
    let inputs = RateInputs::new(
        ledger.rounds() as u64,
        est.m as u64,
        ledger.schedule.p,
        est.q_x_m,
        est.qber_m,
        ledger.parties(),
    )?;
    let bound = finite_key_length(&inputs, &settings.budget)?;
    run.lap("estimate");
    let body = json!({
        "rounds": est.rounds,
        "m": est.m,
        "n": est.n,
        "p": ledger.schedule.p,
        "q_x_m": est.q_x_m,
        "q_ab_m": est.q_ab_m,
        "qber_m": est.qber_m,
        "akr": akr(est.q_x_m, est.qber_m)?,
        "budget": settings.budget,
        "bound": bound,
    });
    run.finish("estimate", body)?;
    Ok(0)
}

fn status_code(s: PipelineStatus) -> u8 {
    match s {
        PipelineStatus::Key => 0,
        PipelineStatus::NoKey => 3,
        PipelineStatus::NoCode => 4,
    }
}

fn key_file(party: &str) -> String {
    format!("key_{party}.qckb")
}

/// Report body for a pipeline run; writes one key file per party.
fn pipeline_body(out: &Path, ledger: &RoundLedger, o: &PipelineOutcome) -> Result<Value> {
    let key = match &o.key {
        Some(k) => {
            fs::create_dir_all(out)?;
            let mut files = Vec::new();
            for (name, bits) in ledger.party_names.iter().zip(&k.bits) {
                let file = key_file(name);
                PackedBits::key(bits.clone(), k.security_label).write(fs::File::create(out.join(&file))?)?;
                files.push(file);
            }
            json!({
                "length": k.length,
                "parties": k.parties(),
                "all_identical": k.all_identical(),
                "security_label": k.security_label,
                "preshared_bits": k.preshared_bits,
                "net_bits": k.net_bits(),
                "key_growing": k.key_growing(),
                "crc32": format!("{:08x}", crc32fast::hash(&k.bits[0].to_bytes())),
                "files": files,
            })
        }
        None => Value::Null,
    };
    Ok(json!({
        "status": o.status,
        "estimate": o.estimate,
        "qber_corrected": o.qber_corrected,
        "bound": o.bound,
        "realized": o.realized,
        "reconciliation": o.reconciliation,
        "tag_bits": o.tag_bits,
        "leakage_bits": o.leakage_bits,
        "schedule_compressed_bits": o.schedule_compressed_bits,
        "announcements": o.channel.log,
        "key": key,
    }))
}

pub fn postprocess(c: &Common, ledger: Option<PathBuf>) -> Result<u8> {
    let mut run = Run::load("postprocess", c, None)?;
    let ledger = read_ledger(&default_ledger(&run, ledger))?;
    run.lap("read");
    let o = run_pipeline(&ledger, &run.cfg.pipeline_settings()?)?;
    run.lap("pipeline");
    let body = pipeline_body(&run.out, &ledger, &o)?;
    run.finish("postprocess", body)?;
    Ok(status_code(o.status))
}

#[derive(Args, Debug, Clone)]
pub struct KeyrateArgs {
    /// Config supplying defaults for every flag below.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub qx: Option<f64>,
    #[arg(long)]
    pub qber: Option<f64>,
    /// Total rounds L; enables the finite-key length.
    #[arg(long)]
    pub rounds: Option<u64>,
    /// Test rounds m; defaults to round(p L).
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub parties: usize,
    #[arg(long)]
    pub eps_tot: Option<f64>,
    #[arg(long)]
    pub eps_ec: Option<f64>,
    #[arg(long)]
    pub eps_pa: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub z_share: f64,
    /// Optimise p and the budget split for the given L and eps_tot.
    #[arg(long)]
    pub optimize: bool,
    /// Also write the report here.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

pub fn keyrate(a: &KeyrateArgs) -> Result<u8> {
    let cfg = a.config.as_deref().map(ExperimentConfig::load).transpose()?;
    let noise = cfg.as_ref().map(|c| c.noise()).transpose()?;
    let q_x = a.qx.or(noise.as_ref().map(|n| n.q_x));
    let qber = a.qber.or(noise.as_ref().map(|n| n.qber()));
    let (Some(q_x), Some(qber)) = (q_x, qber) else {
        return Err(Error::Config("keyrate needs --qx and --qber, or --config".into()));
    };
    let parties = cfg.as_ref().map_or(a.parties, |c| c.topology.bobs_km.len() + 1);
    let rounds = a.rounds.or(cfg.as_ref().and_then(|c| c.protocol.rounds.map(|l| l as u64)));
    let p = a.p.or(cfg.as_ref().map(|c| c.protocol.p));
    let cb = cfg.as_ref().map(|c| &c.budget);
    let eps_tot = a.eps_tot.or(cb.map(|b| b.eps_tot));
    let eps_ec = a.eps_ec.or(cb.map(|b| b.eps_ec));
    let eps_pa = a.eps_pa.or(cb.map(|b| b.eps_pa));
    let z_share = cb.map_or(a.z_share, |b| b.z_share);

    let asymptotic = akr(q_x, qber)?;
    let mut body = json!({
        "inputs": { "q_x": q_x, "qber": qber, "parties": parties, "rounds": rounds, "p": p },
        "akr": asymptotic,
        "rate": asymptotic,
        "l": Value::Null,
        "budget": Value::Null,
        "feasible": asymptotic > 0.0,
    });
    if a.optimize {
        let (Some(l), Some(tot)) = (rounds, eps_tot) else {
            return Err(Error::Config("--optimize needs --rounds and --eps-tot".into()));
        };
        let opt = optimize_budget(q_x, qber, l, parties, tot)?;
        body["optimized"] = serde_json::to_value(&opt)?;
        body["budget"] = serde_json::to_value(&opt.budget)?;
        body["l"] = json!(opt.key.secret_bits);
        body["l_net"] = json!(opt.key.net_bits);
        body["rate"] = json!(opt.key.fraction);
        body["feasible"] = json!(opt.feasible);
        body["inputs"]["p"] = json!(opt.p);
    } else if let Some(l) = rounds {
        let (Some(tot), Some(ec), Some(pa)) = (eps_tot, eps_ec, eps_pa) else {
            return Err(Error::Config("finite-key rates need --eps-tot, --eps-ec and --eps-pa".into()));
        };
        let m = match (a.m, p) {
            (Some(m), _) => m,
            (None, Some(p)) => (p * l as f64).round() as u64,
            (None, None) => return Err(Error::Config("finite-key rates need --m or --p".into())),
        };
        let p = p.unwrap_or(m as f64 / l as f64);
        let budget = SecurityBudget::from_total(tot, ec, pa, z_share, parties)?;
        let key = finite_key_length(&RateInputs::new(l, m, p, q_x, qber, parties)?, &budget)?;
        body["inputs"]["m"] = json!(m);
        body["inputs"]["p"] = json!(p);
        body["budget"] = serde_json::to_value(&budget)?;
        body["l"] = json!(key.secret_bits);
        body["l_net"] = json!(key.net_bits);
        body["rate"] = json!(key.fraction);
        body["feasible"] = json!(key.feasible);
        body["finite_key"] = serde_json::to_value(&key)?;
    }
    let feasible = body["feasible"].as_bool().unwrap_or(false);
    let seed = cfg.as_ref().map_or(0, |c| c.seed);
    let r = Report::new("keyrate", seed, cfg.as_ref().map(|c| c.digest()), body)?;
    if let Some(path) = &a.out {
        r.write(path)?;
    }
    print!("{}", r.to_json()?);
    Ok(if feasible { 0 } else { 3 })
}

pub fn sweep(c: &Common) -> Result<u8> {
    let mut run = Run::load("sweep", c, None)?;
    let cfg = &run.cfg;
    let post = cfg.pipeline_settings()?.post;
    let rows = run_finite_key_sweep(
        &cfg.sweep.rounds,
        &cfg.noise()?,
        cfg.budget.eps_tot,
        &post,
        rng::derive_seed(cfg.seed, "sweep"),
    )?;
    run.lap("sweep");
    report::write_table(&run.out, "sweep.csv", &report::sweep_csv(&rows))?;
    if run.cfg.output.gnuplot {
        report::write_table(&run.out, "sweep.gp", &report::sweep_gnuplot("sweep.csv"))?;
    }
    let eps_tot = run.cfg.budget.eps_tot;
    run.finish("sweep", json!({ "eps_tot": eps_tot, "rows": rows, "table": "sweep.csv" }))?;
    Ok(0)
}

#[derive(Args, Debug, Clone)]
pub struct SurfaceArgs {
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Total link noise `p1 + p2 + p3`.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub gnuplot: bool,
}

pub fn surface(a: &SurfaceArgs) -> Result<u8> {
    let cfg = a.config.as_deref().map(ExperimentConfig::load).transpose()?;
    let c = a.c.or(cfg.as_ref().map(|k| k.surface.c)).unwrap_or(1.5);
    let step = a.step.or(cfg.as_ref().map(|k| k.surface.grid_step)).unwrap_or(0.01);
    let out = a.out.clone().or(cfg.as_ref().map(|k| k.output.dir.clone())).unwrap_or_else(|| PathBuf::from("out"));
    let gnuplot = a.gnuplot || cfg.as_ref().is_some_and(|k| k.output.gnuplot);
    let mut timing = Timing::new("surface");
    let t0 = Instant::now();
    let s = topology_noise_surface(c, step)?;
    timing.record("surface", t0.elapsed().as_secs_f64());
    report::write_table(&out, "surface.csv", &report::surface_csv(&s))?;
    if gnuplot {
        report::write_table(&out, "surface.gp", &report::surface_gnuplot("surface.csv"))?;
    }
    let body = json!({
        "c": s.c,
        "grid_step": s.grid_step,
        "feasible_points": s.points.len(),
        "masked": s.masked,
        "argmin": [s.argmin.0, s.argmin.1],
        "min_q_x": s.min_q_x,
        "table": "surface.csv",
    });
    let path = out.join("surface.json");
    Report::new("surface", cfg.as_ref().map_or(0, |k| k.seed), cfg.as_ref().map(|k| k.digest()), body)?.write(&path)?;
    timing.write(&Timing::sidecar_path(&path))?;
    println!("{}", path.display());
    Ok(0)
}

#[derive(Args, Debug, Clone)]
pub struct PadArgs {
    /// Packed key file (this party's copy).
    #[arg(short, long)]
    pub key: PathBuf,
    /// Input file; plaintext for encrypt, ciphertext for decrypt.
    #[arg(short, long, required_unless_present = "demo_image")]
    pub input: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Key usage ledger; defaults to `<key>.usage.json`.
    #[arg(long)]
    pub usage: Option<PathBuf>,
    /// Encrypt only: start at this key offset instead of the ledger cursor.
    #[arg(long)]
    pub offset: Option<usize>,
    /// Encrypt only: write a 211x211 placeholder image here and encrypt it.
    #[arg(long)]
    pub demo_image: Option<PathBuf>,
}

fn open_store(a: &PadArgs) -> Result<(KeyStore, PathBuf)> {
    let packed = PackedBits::read(fs::File::open(&a.key)?)?;
    let usage_path = a.usage.clone().unwrap_or_else(|| {
        let mut s = a.key.clone().into_os_string();
        s.push(".usage.json");
        PathBuf::from(s)
    });
    let usage = if usage_path.exists() {
        serde_json::from_str::<UsageLedger>(&fs::read_to_string(&usage_path)?)
            .map_err(|e| Error::Corrupt(format!("usage ledger {}: {e}", usage_path.display())))?
    } else {
        UsageLedger::default()
    };
    Ok((KeyStore::with_usage(packed.bits, usage)?, usage_path))
}

fn save_store(store: &KeyStore, path: &Path, offset: usize, bytes: usize) -> Result<u8> {
    fs::write(path, serde_json::to_string_pretty(store.usage())? + "\n")?;
    println!(
        "{}",
        json!({ "offset": offset, "bits": 8 * bytes, "remaining_bits": store.remaining(), "usage": path.display().to_string() })
    );
    Ok(0)
}

pub fn encrypt(a: &PadArgs) -> Result<u8> {
    let (mut store, usage_path) = open_store(a)?;
    let message = match (&a.demo_image, &a.input) {
        (Some(img), _) => {
            let data = placeholder_image(211, 211);
            fs::write(img, &data)?;
            data
        }
        (None, Some(input)) => fs::read(input)?,
        (None, None) => return Err(Error::Config("encrypt needs --input or --demo-image".into())),
    };
    let ct = otp_encrypt(&message, &mut store, a.offset)?;
    fs::write(&a.output, ct.to_bytes())?;
    save_store(&store, &usage_path, ct.offset, message.len())
}

pub fn decrypt(a: &PadArgs) -> Result<u8> {
    let (mut store, usage_path) = open_store(a)?;
    let Some(input) = &a.input else {
        return Err(Error::Config("decrypt needs --input".into()));
    };
    let ct = Ciphertext::from_bytes(&fs::read(input)?)?;
    let plain = otp_decrypt(&ct, &mut store)?;
    fs::write(&a.output, &plain)?;
    save_store(&store, &usage_path, ct.offset, plain.len())
}

pub fn report(c: &Common, s: &SessionOverrides) -> Result<u8> {
    let mut run = Run::load("report", c, Some(s))?;
    let cfg = run.cfg.clone();
    let noise = cfg.noise()?;
    let akr_rows = run_akr_study(&reference_topologies(), &noise, &cfg.switching()?, Some(&MEASURED_RATE_HZ))?;
    report::write_table(&run.out, "akr.csv", &report::akr_csv(&akr_rows))?;
    if cfg.output.gnuplot {
        report::write_table(&run.out, "akr.gp", &report::akr_gnuplot("akr.csv"))?;
    }
    run.lap("akr");
    let outcome =
        run_session(&cfg.topology()?, cfg.session_switching()?.as_ref(), &cfg.drift, &noise, &cfg.session_plan())?;
    run.lap("session");
    let (session, code) = match outcome {
        SessionOutcome::Empty { expected_rounds } => {
            (json!({ "status": "empty", "expected_rounds": expected_rounds }), 3)
        }
        SessionOutcome::Completed(sess) => {
            let o = run_pipeline(&sess.ledger, &cfg.pipeline_settings()?)?;
            run.lap("pipeline");
            let pipeline = pipeline_body(&run.out, &sess.ledger, &o)?;
            (
                json!({
                    "status": "completed",
                    "rounds": sess.ledger.rounds(),
                    "rate_hz": sess.rate_hz,
                    "expected_rounds": sess.expected_rounds,
                    "measuring_time_s": sess.measuring_time_s,
                    "empirical": empirical_rates(&sess.ledger),
                    "pipeline": pipeline,
                }),
                status_code(o.status),
            )
        }
    };
    run.finish("report", json!({ "akr": akr_rows, "akr_table": "akr.csv", "session": session }))?;
    Ok(code)
}
