//! Command execution: configuration to artifacts.
//!
//! Everything the configuration can get wrong is checked before sampling
//! starts. Output files are written once, after all computation completes.

use std::path::{Path, PathBuf};

use postselect::channels::{classify, noise_sums, ChannelClass};
use postselect::codec::{make_bases, is_weak_signal, MAX_PHASE};
use postselect::epr::pair_quadratures;
use postselect::metrics::{
    gamma_from_standard_error, run_trials, run_waveform, summarize, sweep as run_sweep, SweepGrid, SweepSettings,
};
use postselect::{
    BasisSet64, Ensemble64, Error, Experiment, FlipKind, KrausChannel64, Link, Mode, NoiseParams, RunSummary,
    SamplingPlan, TrialRecord,
};

use crate::config::{ChannelSpec, Config, CorrectionName, Detection, LinkName, ModeName};
use crate::output::{config_hash, csv_table, fmt17, provenance, write, JsonObject};
use crate::waveform::{ingest, write_rows};
use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Sweep,
    ChannelInfo,
}

#[derive(Debug, Clone)]
pub struct Options {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub exact: bool,
    pub out: PathBuf,
}

/// What a successful command produced.
#[derive(Debug, Default)]
pub struct Report {
    pub written: Vec<PathBuf>,
    pub warnings: Vec<String>,
    /// Human-readable text for standard output.
    pub text: String,
}

struct Context {
    cfg: Config,
    hash: String,
    seed: u64,
    exact: bool,
    base: PathBuf,
    out: PathBuf,
}

pub fn execute(cmd: Command, opts: &Options) -> Result<Report, Failure> {
    let raw = std::fs::read(&opts.config).map_err(|e| Failure::io(opts.config.display(), e))?;
    let text = std::str::from_utf8(&raw).map_err(|_| Failure::schema("<document>", "configuration is not UTF-8"))?;
    let cfg = Config::parse(text)?;
    let ctx = Context {
        seed: opts.seed.unwrap_or(cfg.seed),
        exact: opts.exact || cfg.exact,
        hash: config_hash(&raw),
        base: opts.config.parent().map(Path::to_path_buf).unwrap_or_default(),
        out: opts.out.clone(),
        cfg,
    };
    match (cmd, ctx.cfg.mode) {
        (Command::Run, ModeName::Single) => run(&ctx, LinkName::Single),
        (Command::Run, ModeName::Epr) => run(&ctx, LinkName::Epr),
        (Command::Sweep, ModeName::Sweep) => sweep(&ctx),
        (Command::ChannelInfo, _) => channel_info(&ctx),
        (Command::Run, m) => Err(Failure::schema("mode", format!("`run` needs mode single or epr, found {}", m.as_str()))),
        (Command::Sweep, m) => Err(Failure::schema("mode", format!("`sweep` needs mode sweep, found {}", m.as_str()))),
    }
}

/// Channel specs of the configured link.
enum LinkSpec<'a> {
    Single(&'a ChannelSpec),
    Pair(&'a ChannelSpec, &'a ChannelSpec),
}

impl<'a> LinkSpec<'a> {
    fn from_config(cfg: &'a Config, kind: LinkName) -> Result<Self, Failure> {
        let need = |c: &'a Option<ChannelSpec>, field: &str| c.as_ref().ok_or_else(|| Failure::schema(field, "missing"));
        Ok(match kind {
            LinkName::Single => LinkSpec::Single(need(&cfg.channel, "channel")?),
            LinkName::Epr => LinkSpec::Pair(need(&cfg.signal_channel, "signal_channel")?, need(&cfg.reference_channel, "reference_channel")?),
        })
    }

    fn signal(&self) -> &'a ChannelSpec {
        match *self {
            LinkSpec::Single(s) | LinkSpec::Pair(s, _) => s,
        }
    }

    fn signal_field(&self) -> &'static str {
        match self {
            LinkSpec::Single(_) => "channel",
            LinkSpec::Pair(..) => "signal_channel",
        }
    }

    fn name(&self) -> &'static str {
        match self {
            LinkSpec::Single(_) => "single",
            LinkSpec::Pair(..) => "epr",
        }
    }

    /// Signal spec with the scheduled parameter set to `value`.
    fn signal_at(&self, value: f64, field: &str) -> Result<ChannelSpec, Failure> {
        self.signal()
            .with_param(value)
            .ok_or_else(|| Failure::schema(field, format!("{} has no adjustable parameter", self.signal_field())))
    }

    fn reference(&self, base: &Path) -> Result<Option<KrausChannel64>, Failure> {
        match self {
            LinkSpec::Single(_) => Ok(None),
            LinkSpec::Pair(_, r) => r.build(base, "reference_channel").map(Some),
        }
    }
}

fn make_link(signal: KrausChannel64, reference: &Option<KrausChannel64>) -> Link {
    match reference {
        None => Link::Single(signal),
        Some(r) => Link::Pair {
            signal,
            reference: r.clone(),
        },
    }
}

fn ensemble(cfg: &Config) -> Result<Ensemble64, Failure> {
    if cfg.ensemble.is_empty() {
        return Err(Failure::schema("ensemble", "missing"));
    }
    Ensemble64::new(cfg.ensemble.iter().map(|c| (c.weight, c.theta)).collect()).map_err(|e| Failure::schema("ensemble", e))
}

fn detection(cfg: &Config) -> Result<&Detection, Failure> {
    cfg.detection.as_ref().ok_or_else(|| Failure::schema("detection", "missing"))
}

fn bases(det: &Detection, epsilon: f64, field: &str) -> Result<BasisSet64, Failure> {
    let b = make_bases(epsilon, det.axis).map_err(|e| match e {
        Error::ParameterOutOfRange { name: "axis", .. } => Failure::schema("detection.axis", e),
        other => Failure::schema(field, other),
    })?;
    Ok(if det.extended { b.with_extended() } else { b })
}

fn correction(name: CorrectionName, signal: &KrausChannel64) -> Option<FlipKind> {
    match name {
        CorrectionName::None => None,
        CorrectionName::BitFlip => Some(FlipKind::BitFlip),
        CorrectionName::BitPhaseFlip => Some(FlipKind::BitPhaseFlip),
        CorrectionName::Auto => noise_sums(signal).ok().and_then(|s| FlipKind::from_sums(&s)),
    }
}

fn check_correction(det: &Detection) -> Result<(), Failure> {
    if det.correction != CorrectionName::None && !det.extended {
        return Err(Failure::schema("detection.correction", "flip correction needs `extended = true`"));
    }
    Ok(())
}

fn mode(ctx: &Context, n_bases: usize) -> Result<Mode, Failure> {
    if ctx.exact {
        return Ok(Mode::Exact);
    }
    let s = ctx.cfg.sampling.as_ref().ok_or_else(|| Failure::schema("sampling", "missing (or set exact = true)"))?;
    let photons = s.photons.ok_or_else(|| Failure::schema("sampling.photons", "missing"))?;
    if photons == 0 {
        return Err(Failure::schema("sampling.photons", "must be positive"));
    }
    if s.trials == 0 {
        return Err(Failure::schema("sampling.trials", "must be positive"));
    }
    let plan = match &s.allocation {
        None => SamplingPlan::uniform(photons, n_bases, s.trials, ctx.seed),
        Some(a) if a.len() != n_bases => {
            return Err(Failure::schema("sampling.allocation", format!("{} entries for {n_bases} bases", a.len())))
        }
        Some(a) => SamplingPlan::new(photons, a.clone(), s.trials, ctx.seed),
    };
    plan.map(Mode::Shots).map_err(|e| Failure::schema("sampling.allocation", e))
}

/// Threshold rule: a fixed `gamma`, or `gamma_sigma` times the spread of `Δφ`.
enum Threshold {
    Fixed(f64),
    Sigma(f64),
}

fn threshold(cfg: &Config) -> Result<Threshold, Failure> {
    let m = cfg.metrics.as_ref().ok_or_else(|| Failure::schema("metrics", "missing"))?;
    match (m.gamma, m.gamma_sigma) {
        (Some(g), None) if g > 0.0 && g.is_finite() => Ok(Threshold::Fixed(g)),
        (Some(_), None) => Err(Failure::schema("metrics.gamma", "must be positive and finite")),
        (None, Some(k)) if k > 0.0 && k.is_finite() => Ok(Threshold::Sigma(k)),
        (None, Some(_)) => Err(Failure::schema("metrics.gamma_sigma", "must be positive and finite")),
        _ => Err(Failure::schema("metrics", "set exactly one of gamma, gamma_sigma")),
    }
}

fn resolve_gamma(rule: &Threshold, records: &[TrialRecord]) -> Result<f64, Failure> {
    match *rule {
        Threshold::Fixed(g) => Ok(g),
        Threshold::Sigma(k) => gamma_from_standard_error(records, k).map_err(|e| Failure::numerical(None, e)),
    }
}

fn experiment_error(index: Option<u64>, e: Error) -> Failure {
    Failure::numerical(index, e)
}

fn run(ctx: &Context, kind: LinkName) -> Result<Report, Failure> {
    let cfg = &ctx.cfg;
    let spec = LinkSpec::from_config(cfg, kind)?;
    let ens = ensemble(cfg)?;
    let det = detection(cfg)?;
    let bases = bases(det, det.epsilon, "detection.epsilon")?;
    check_correction(det)?;
    let rule = threshold(cfg)?;
    let signal = spec.signal().build(&ctx.base, spec.signal_field())?;
    let reference = spec.reference(&ctx.base)?;
    let mode = mode(ctx, bases.len())?;
    let input = cfg.input.as_ref().ok_or_else(|| Failure::schema("input", "missing"))?;

    let mut timeline = Vec::new();
    if let Some(tl) = &cfg.timeline {
        tl.validate()?;
        for (i, &v) in tl.values.iter().enumerate() {
            let field = format!("timeline.values[{i}]");
            spec.signal_at(v, "timeline")?.build(&ctx.base, &field).map_err(|f| match f {
                Failure::Schema { message, .. } => Failure::schema(field.clone(), message),
                other => other,
            })?;
        }
        timeline.push(tl);
    }

    let build = |signal: KrausChannel64, index: Option<u64>| {
        let kind = correction(det.correction, &signal);
        Experiment::new(make_link(signal, &reference), ens.clone(), bases.clone(), kind).map_err(|e| experiment_error(index, e))
    };

    let mut report = Report::default();
    let meta = provenance(&ctx.hash, ctx.seed);
    let (records, chi, chi_target, input_kind) = match (&input.waveform, input.phi) {
        (Some(path), None) => {
            let w = ingest(&ctx.base.join(path)).map_err(|e| Failure::schema("input.waveform", e))?;
            if w.weak_signal_exceedances() > 0 {
                report.warnings.push(format!(
                    "{} of {} samples exceed |phi| = 0.05; the small-signal approximation degrades",
                    w.weak_signal_exceedances(),
                    w.len()
                ));
            }
            let fixed = if timeline.is_empty() { Some(build(signal.clone(), Some(0))?) } else { None };
            let mut samples = Vec::with_capacity(w.len());
            for (i, &(t, phi)) in w.samples().iter().enumerate() {
                let exp = match (&fixed, timeline.first()) {
                    (Some(e), _) => e.clone(),
                    (None, Some(tl)) => {
                        let ch = spec.signal_at(tl.at(t), "timeline")?.build(&ctx.base, "timeline")?;
                        build(ch, Some(i as u64))?
                    }
                    (None, None) => unreachable!("either fixed or scheduled"),
                };
                samples.push((exp, phi));
            }
            let mut records = Vec::with_capacity(w.len());
            for (i, r) in run_waveform(&samples, &mode).into_iter().enumerate() {
                let r = r.map_err(|e| Failure::numerical(Some(i as u64), e))?;
                if let Err(e) = &r.outcome {
                    return Err(Failure::numerical(Some(i as u64), e.clone()));
                }
                records.push(r);
            }
            let rows: Vec<(f64, f64)> = w.times().zip(records.iter().map(|r| r.phi_tilde().expect("decoded"))).collect();
            let mut buf = Vec::new();
            write_rows(&rows, &meta, &mut buf).map_err(|e| Failure::io("waveform", e))?;
            report.written.push(write(&ctx.out, "waveform.csv", &buf)?);
            let (chi, target) = match &fixed {
                Some(e) => (Some(e.chi()), Some(e.chi_target())),
                None => (None, None),
            };
            (records, chi, target, "waveform")
        }
        (None, Some(phi)) => {
            if !(phi.abs() <= MAX_PHASE) {
                return Err(Failure::schema("input.phi", format!("|phi| = {} exceeds {MAX_PHASE}", phi.abs())));
            }
            if !timeline.is_empty() {
                return Err(Failure::schema("timeline", "a timeline needs a waveform input"));
            }
            if !is_weak_signal(phi) {
                report.warnings.push(format!("|phi| = {} exceeds 0.05; the small-signal approximation degrades", phi.abs()));
            }
            let exp = build(signal.clone(), None)?;
            let records = run_trials(&exp, phi, &mode).map_err(|e| Failure::numerical(None, e))?;
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|r| match &r.outcome {
                    Ok(d) => vec![r.trial.to_string(), fmt17(d.phi_tilde), fmt17(d.delta_phi.unwrap_or(f64::NAN)), "ok".into()],
                    Err(e) => vec![r.trial.to_string(), String::new(), String::new(), e.to_string()],
                })
                .collect();
            let table = csv_table(&meta, &["trial", "phi_tilde", "delta_phi", "status"], &rows)?;
            report.written.push(write(&ctx.out, "trials.csv", table.as_bytes())?);
            (records, Some(exp.chi()), Some(exp.chi_target()), "phase")
        }
        _ => return Err(Failure::schema("input", "set exactly one of waveform, phi")),
    };

    let undecodable = records.iter().filter(|r| !r.is_decodable()).count();
    if undecodable > 0 {
        report.warnings.push(format!("{undecodable} of {} trials were undecodable", records.len()));
    }
    let gamma = resolve_gamma(&rule, &records)?;
    let summary = summarize(&records, gamma).map_err(|e| Failure::numerical(None, e))?;
    let mut j = JsonObject::new();
    j.string("config_sha256", &ctx.hash)
        .int("seed", ctx.seed)
        .string("mode", cfg.mode.as_str())
        .string("link", spec.name())
        .string("input", input_kind)
        .boolean("exact", ctx.exact)
        .opt_int(
            "photons",
            match &mode {
                Mode::Shots(p) => Some(p.total_photons()),
                Mode::Exact => None,
            },
        )
        .num("epsilon", det.epsilon)
        .num("axis", det.axis)
        .opt_num("chi", chi)
        .opt_num("chi_target", chi_target);
    summary_fields(&mut j, &summary);
    report.written.push(write(&ctx.out, "summary.json", j.render().as_bytes())?);
    report.text = format!("d_mse = {}\nf_t = {}\ngamma = {}\n", fmt17(summary.d_mse), fmt17(summary.f_t), fmt17(summary.gamma));
    Ok(report)
}

fn summary_fields(j: &mut JsonObject, s: &RunSummary) {
    j.num("d_mse", s.d_mse)
        .num("f_t", s.f_t)
        .num("gamma", s.gamma)
        .num("mean_phi_tilde", s.mean_phi_tilde)
        .num("var_phi_tilde", s.var_phi_tilde)
        .num("mean_delta_phi", s.mean_delta_phi)
        .int("trials", s.trials)
        .int("decodable", s.decodable);
}

const SWEEP_HEADER: [&str; 12] = [
    "photons",
    "epsilon",
    "param",
    "gamma",
    "d_mse",
    "f_t",
    "mean_phi_tilde",
    "var_phi_tilde",
    "mean_delta_phi",
    "trials",
    "decodable",
    "error",
];

fn sweep(ctx: &Context) -> Result<Report, Failure> {
    let cfg = &ctx.cfg;
    let sw = cfg.sweep.as_ref().ok_or_else(|| Failure::schema("sweep", "missing"))?;
    let spec = LinkSpec::from_config(cfg, sw.link)?;
    let ens = ensemble(cfg)?;
    let det = detection(cfg)?;
    check_correction(det)?;
    if sw.photons.is_empty() || sw.photons.contains(&0) {
        return Err(Failure::schema("sweep.photons", "must be a nonempty list of positive integers"));
    }
    if sw.gammas.is_empty() {
        return Err(Failure::schema("sweep.gammas", "must be nonempty"));
    }
    if let Some(i) = sw.gammas.iter().position(|g| !(*g > 0.0)) {
        return Err(Failure::schema(format!("sweep.gammas[{i}]"), "must be positive"));
    }
    if !(sw.phi.abs() <= MAX_PHASE) {
        return Err(Failure::schema("sweep.phi", format!("|phi| exceeds {MAX_PHASE}")));
    }
    let epsilons = sw.epsilons.clone().unwrap_or_else(|| vec![det.epsilon]);
    if epsilons.is_empty() {
        return Err(Failure::schema("sweep.epsilons", "must be nonempty"));
    }
    for (i, &e) in epsilons.iter().enumerate() {
        bases(det, e, &format!("sweep.epsilons[{i}]"))?;
    }
    let fixed_signal = spec.signal().build(&ctx.base, spec.signal_field())?;
    let params = match &sw.params {
        Some(p) if p.is_empty() => return Err(Failure::schema("sweep.params", "must be nonempty")),
        Some(p) => {
            spec.signal_at(p[0], "sweep.params")?;
            p.clone()
        }
        None => vec![spec.signal().param().unwrap_or(f64::NAN)],
    };
    let scheduled = sw.params.is_some();
    let reference = spec.reference(&ctx.base)?;
    let trials = match (&cfg.sampling, ctx.exact) {
        (_, true) => 1,
        (Some(s), false) if s.trials > 0 => s.trials,
        (Some(_), false) => return Err(Failure::schema("sampling.trials", "must be positive")),
        (None, false) => return Err(Failure::schema("sampling", "missing (or set exact = true)")),
    };
    if !ctx.exact && cfg.sampling.as_ref().is_some_and(|s| s.allocation.is_some()) {
        return Err(Failure::schema("sampling.allocation", "sweeps use a uniform allocation"));
    }

    let grid = SweepGrid {
        photons: sw.photons.clone(),
        epsilons,
        params,
        gammas: sw.gammas.clone(),
    };
    let settings = SweepSettings {
        phi: sw.phi,
        axis: det.axis,
        extended: det.extended,
        trials,
        seed: ctx.seed,
        exact: ctx.exact,
    };
    let signal_spec = spec.signal();
    let build = |p: f64, b: BasisSet64| -> postselect::Result<Experiment> {
        let signal = if scheduled {
            let s = signal_spec.with_param(p).expect("checked above");
            s.catalog().expect("parameterized channels are catalog entries")?
        } else {
            fixed_signal.clone()
        };
        let kind = correction(det.correction, &signal);
        Experiment::new(make_link(signal, &reference), ens.clone(), b, kind)
    };
    let rows = run_sweep(&grid, &settings, build).map_err(|e| Failure::numerical(None, e))?;

    let mut report = Report::default();
    let mut failed = 0;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let head = vec![
                r.photons.to_string(),
                fmt17(r.epsilon),
                if r.param.is_nan() { String::new() } else { fmt17(r.param) },
                fmt17(r.gamma),
            ];
            let tail = match &r.outcome {
                Ok(s) => vec![
                    fmt17(s.d_mse),
                    fmt17(s.f_t),
                    fmt17(s.mean_phi_tilde),
                    fmt17(s.var_phi_tilde),
                    fmt17(s.mean_delta_phi),
                    s.trials.to_string(),
                    s.decodable.to_string(),
                    String::new(),
                ],
                Err(e) => {
                    failed += 1;
                    let mut v = vec![String::new(); 7];
                    v.push(e.to_string());
                    v
                }
            };
            head.into_iter().chain(tail).collect()
        })
        .collect();
    if failed > 0 {
        report.warnings.push(format!("{failed} of {} grid points failed; see the error column", rows.len()));
    }
    let mut meta = provenance(&ctx.hash, ctx.seed);
    meta.push(("link", spec.name().to_string()));
    meta.push(("exact", ctx.exact.to_string()));
    let csv = csv_table(&meta, &SWEEP_HEADER, &table)?;
    report.written.push(write(&ctx.out, "sweep.csv", csv.as_bytes())?);
    report.text = format!("{} grid points\n", rows.len());
    Ok(report)
}

const INFO_HEADER: [&str; 15] = [
    "channel", "name", "a1", "a2", "a3", "a4", "b1", "b2", "c1", "c2", "chi1", "chi2", "chi", "class", "status",
];

fn class_name(c: ChannelClass) -> &'static str {
    match c {
        ChannelClass::Dephasing => "dephasing",
        ChannelClass::Flip => "flip",
        ChannelClass::General => "general",
    }
}

fn channel_info(ctx: &Context) -> Result<Report, Failure> {
    let cfg = &ctx.cfg;
    let listed: Vec<(&str, &ChannelSpec)> = [
        ("channel", &cfg.channel),
        ("signal_channel", &cfg.signal_channel),
        ("reference_channel", &cfg.reference_channel),
    ]
    .into_iter()
    .filter_map(|(k, v)| v.as_ref().map(|s| (k, s)))
    .collect();
    if listed.is_empty() {
        return Err(Failure::schema("channel", "no channel configured"));
    }
    let mut rows = Vec::new();
    let mut built = Vec::new();
    for (field, spec) in &listed {
        let ch = spec.build(&ctx.base, field)?;
        let sums = noise_sums(&ch).map_err(|e| Failure::schema(*field, e))?;
        let mut row = vec![field.to_string(), ch.name().to_string()];
        row.extend(sums.as_array().iter().map(|&x| fmt17(x)));
        row.push(fmt17(sums.chi1()));
        row.push(fmt17(sums.chi2()));
        match NoiseParams::from_sums(sums) {
            Ok(p) => {
                row.push(fmt17(p.chi));
                row.push(class_name(classify(&sums)).into());
                row.push("ok".into());
            }
            Err(_) => {
                row.push(String::new());
                row.push(class_name(classify(&sums)).into());
                row.push("degenerate".into());
            }
        }
        rows.push(row);
        built.push((*field, ch));
    }
    let sig = built.iter().find(|b| b.0 == "signal_channel");
    let refc = built.iter().find(|b| b.0 == "reference_channel");
    if let (Some((_, s)), Some((_, r))) = (sig, refc) {
        let mut row = vec!["pair".to_string(), format!("{} / {}", s.name(), r.name())];
        row.extend(std::iter::repeat_n(String::new(), 8));
        match pair_quadratures(s, r) {
            Ok(q) => row.extend([fmt17(q.chi1), fmt17(q.chi2), fmt17(q.chi), String::new(), "ok".into()]),
            Err(_) => row.extend([String::new(), String::new(), String::new(), String::new(), "degenerate".into()]),
        }
        rows.push(row);
    }
    let csv = csv_table(&provenance(&ctx.hash, ctx.seed), &INFO_HEADER, &rows)?;
    let mut report = Report::default();
    report.written.push(write(&ctx.out, "channel_info.csv", csv.as_bytes())?);
    report.text = render_info(&rows);
    Ok(report)
}

/// Aligned `channel name b1 b2 chi class` columns with short numbers.
fn render_info(rows: &[Vec<String>]) -> String {
    let short = |s: &String| s.parse::<f64>().map_or_else(|_| if s.is_empty() { "-".to_string() } else { s.clone() }, |x| format!("{x:.6}"));
    let mut out = format!("{:<18} {:<28} {:>10} {:>10} {:>10} {:<10}\n", "channel", "name", "B1", "B2", "chi", "class");
    for r in rows {
        out.push_str(&format!(
            "{:<18} {:<28} {:>10} {:>10} {:>10} {:<10}\n",
            r[0],
            r[1],
            short(&r[6]),
            short(&r[7]),
            short(&r[12]),
            if r[13].is_empty() { "-" } else { &r[13] }
        ));
    }
    out
}
