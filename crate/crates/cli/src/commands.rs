use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use esampling::analysis::{self, Spectrum};
use esampling::config::RunConfig;
use esampling::eh_branch::size_capacitor;
use esampling::engine::{self, EngineError, SimulationResult};
use esampling::frontend::SwitchModel;
use esampling::sar_adc::{c_dac, AdcCode, AdcConfig};
use esampling::signal::PowerProvenance;

pub const OUT_DIR_ENV: &str = "ESAMPLE_OUT_DIR";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    NotConverged(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::NotConverged(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::NotConverged(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        if e.is_not_converged() {
            CliError::NotConverged(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn load(config: &Path) -> Result<RunConfig, CliError> {
    RunConfig::load(config).map_err(|e| CliError::Config(format!("{}: {e}", config.display())))
}

fn out_dir(configured: &Path) -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| configured.to_path_buf())
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

enum Field {
    Num(Option<f64>),
    Int(usize),
    Str(Option<&'static str>),
}

/// Flat table-style summary of one run, rendered as JSON with every float in
/// shortest round-trip scientific notation. Infinite or unavailable values
/// are `null`.
struct Summary(Vec<(&'static str, Field)>);

impl Summary {
    fn from_result(r: &SimulationResult<f64>) -> Self {
        use Field::*;
        let sc = &r.scenario;
        let p_in = sc.input_power().ok();
        let eh = r.eh_metrics;
        let adc = r.adc_metrics;
        let r_on_s1 = match sc.adc.s1 {
            SwitchModel::ConstantR { r_on } => Some(r_on),
            _ => None,
        };
        Self(vec![
            ("f_s", Num(Some(sc.clock.f_s))),
            ("f_in", Num(sc.source.as_sine().map(|s| s.frequency))),
            ("t_s", Num(Some(sc.clock.t_s()))),
            ("t_aq", Num(Some(sc.clock.t_aq()))),
            ("t_eh", Num(Some(sc.clock.t_eh()))),
            ("periods", Int(r.trace.periods.len())),
            ("c_dac", Num(Some(c_dac(&sc.adc)))),
            ("r_on_s1", Num(r_on_s1)),
            ("c_eh", Num(Some(sc.eh.c_eh))),
            ("p_in", Num(p_in.map(|p| p.p_in_rms))),
            (
                "p_in_provenance",
                Str(p_in.map(|p| match p.provenance {
                    PowerProvenance::Configured => "configured",
                    PowerProvenance::ComputedFromSource => "computed_from_source",
                })),
            ),
            ("v_eh", Num(eh.map(|m| m.v_eh))),
            ("t_ceh", Num(eh.map(|m| m.t_ceh))),
            ("eta_v", Num(eh.map(|m| m.eta_v))),
            ("eta_e", Num(eh.map(|m| m.eta_e))),
            ("e_h", Num(eh.map(|m| m.e_h))),
            ("sndr_db", Num(adc.map(|m| m.sndr_db))),
            ("enob", Num(adc.map(|m| m.enob))),
            (
                "saturated_samples",
                Int(r.trace.periods.iter().filter(|p| p.saturated).count()),
            ),
        ])
    }

    fn to_json(&self) -> String {
        let body: Vec<String> = self
            .0
            .iter()
            .map(|(k, v)| {
                let value = match v {
                    Field::Num(Some(x)) if x.is_finite() => format!("{x:e}"),
                    Field::Int(n) => n.to_string(),
                    Field::Str(Some(s)) => format!("\"{s}\""),
                    _ => "null".to_string(),
                };
                format!("  \"{k}\": {value}")
            })
            .collect();
        format!("{{\n{}\n}}", body.join(",\n"))
    }
}

pub fn run(config: &Path) -> Result<(), CliError> {
    let cfg = load(config)?;
    let result = engine::run(&cfg.scenario)?;
    let summary = Summary::from_result(&result);
    let json = summary.to_json();

    let dir = out_dir(&cfg.output.dir);
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    write_file(&dir.join("trace.csv"), |w| {
        result.trace.write_csv(w, cfg.output.trace_stride)
    })?;
    write_file(&dir.join("codes.csv"), |w| result.trace.write_codes_csv(w))?;
    if let Some(spec) = &result.spectrum {
        write_file(&dir.join("spectrum.csv"), |w| spec.write_csv(w))?;
    }
    write_file(&dir.join("summary.json"), |w| writeln!(w, "{json}"))?;

    println!("{json}");
    Ok(())
}

/// `a,b,c` or inclusive `start:stop:step`.
pub fn parse_values(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("cannot parse --values {spec:?}"));
    let num = |s: &str| s.trim().parse::<f64>().ok().filter(|x| x.is_finite());
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start).ok_or_else(bad)?, num(stop).ok_or_else(bad)?, num(step).ok_or_else(bad)?);
            if !(step > 0.0) || stop < start {
                return Err(bad());
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| start + i as f64 * step).collect())
        }
        [list] => list.split(',').map(|s| num(s).ok_or_else(bad)).collect(),
        _ => Err(bad()),
    }
}

fn opt(x: Option<f64>) -> String {
    x.filter(|v| v.is_finite()).map(|v| format!("{v:e}")).unwrap_or_default()
}

pub fn sweep(config: &Path, param: &str, values: &str, jobs: usize) -> Result<(), CliError> {
    let cfg = load(config)?;
    let values = parse_values(values)?;
    let rows = engine::sweep(&cfg.scenario, param, &values, jobs)?;

    let dir = out_dir(&cfg.output.dir);
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let path = dir.join("sweep.csv");
    write_file(&path, |w| {
        writeln!(w, "param,value,v_eh,t_ceh,eta_v,eta_e,e_h,sndr_db,enob,error")?;
        for row in &rows {
            match &row.outcome {
                Ok(s) => writeln!(
                    w,
                    "{param},{:e},{},{},{},{},{},{},{},",
                    row.value,
                    opt(s.eh.map(|m| m.v_eh)),
                    opt(s.eh.map(|m| m.t_ceh)),
                    opt(s.eh.map(|m| m.eta_v)),
                    opt(s.eh.map(|m| m.eta_e)),
                    opt(s.eh.map(|m| m.e_h)),
                    opt(s.adc.map(|m| m.sndr_db)),
                    opt(s.adc.map(|m| m.enob)),
                )?,
                Err(e) => {
                    let msg = e.to_string().replace([',', '\n'], ";");
                    writeln!(w, "{param},{:e},,,,,,,,{msg}", row.value)?
                }
            }
        }
        Ok(())
    })?;
    println!("{} rows written to {}", rows.len(), path.display());
    Ok(())
}

pub fn size_cap(i_load: f64, t_p: f64, delta_v: f64) -> Result<(), CliError> {
    let c = size_capacitor(i_load, t_p, delta_v).map_err(|e| CliError::Config(e.to_string()))?;
    println!("{c:e} F");
    Ok(())
}

fn read_codes(path: &Path) -> Result<Vec<AdcCode>, CliError> {
    let bad = |line: usize, msg: String| CliError::Config(format!("{}: line {line}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    let col = headers
        .iter()
        .position(|h| h == "code")
        .ok_or_else(|| bad(1, "missing `code` column".into()))?;
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| bad(i + 2, e.to_string()))?;
            rec.get(col)
                .and_then(|s| s.trim().parse::<u32>().ok())
                .map(AdcCode)
                .ok_or_else(|| bad(i + 2, "code is not an unsigned integer".into()))
        })
        .collect()
}

pub fn analyze(
    codes_csv: &Path,
    n_bits: u32,
    v_ref: f64,
    f_s: f64,
    signal_bin: usize,
    n_fft: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let adc = AdcConfig::new(n_bits, v_ref, 1.0, SwitchModel::Ideal)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut codes = read_codes(codes_csv)?;
    if let Some(bad) = codes.iter().find(|c| c.0 > adc.max_code().0) {
        return Err(CliError::Config(format!("code {} exceeds {n_bits}-bit range", bad.0)));
    }
    let n = n_fft.unwrap_or(codes.len());
    if n > codes.len() {
        return Err(CliError::Config(format!("file has {} codes, --n-fft is {n}", codes.len())));
    }
    codes.truncate(n);
    let spec: Spectrum<f64> = analysis::spectrum(&codes, &adc, f_s, signal_bin, n)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let sndr = analysis::sndr(&spec);
    let enob = analysis::enob(sndr);

    let path = out.unwrap_or_else(|| out_dir(Path::new(".")).join("spectrum.csv"));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    write_file(&path, |w| spec.write_csv(w))?;
    println!("sndr_db = {sndr}");
    println!("enob = {enob}");
    Ok(())
}
