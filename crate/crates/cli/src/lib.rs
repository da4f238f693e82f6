//! Subcommand implementations behind the `qmce` binary.
//!
//! Every command writes CSV with a header row and reals printed with 17
//! significant digits, so identical flags give byte-identical files.

pub mod args;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use qmce_core::montecarlo::{estimate_dos_with_threads, verify_against};
use qmce_core::{
    build_dos, canonical::canonical_eval, critical_points, energy_of_temperature, equilibrate,
    grand_dos, ising_spectrum, load_spectrum, make_spectrum, marginalize_to_energy,
    thermo_curve_at, Branch, GridSpec, IsingChainSpec, McConfig, PiecewiseDos, Sampler, Spectrum,
};

use args::{
    CanonicalArgs, ChainArgs, Cli, Command, DosArgs, EquilibrateArgs, GrandArgs, IsingArgs,
    McVerifyArgs, OutputArgs, SamplerArg, SourceArgs, ThermoArgs,
};

/// Fraction of histogram bins that must fall within the sigma threshold.
pub const MC_PASS_FRACTION: f64 = 0.99;
pub const MC_THRESHOLD_SIGMA: f64 = 4.0;
/// Environment variable capping Monte Carlo worker threads.
pub const THREADS_ENV: &str = "QMCE_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] qmce_core::Error),
    #[error("{0}")]
    Verification(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Write(#[from] io::Error),
}

impl CliError {
    /// 1 for bad input, 2 for numerical failure, 3 for a failed verification.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(qmce_core::Error::NonConvergence(_)) => 2,
            CliError::Verification(_) => 3,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Seventeen significant digits.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Dos(a) => cmd_dos(a, stdout),
        Command::Thermo(a) => cmd_thermo(a, stdout, stderr),
        Command::Canonical(a) => cmd_canonical(a, stdout),
        Command::McVerify(a) => cmd_mc_verify(a, stdout, stderr),
        Command::Grand(a) => cmd_grand(a, stdout),
        Command::Equilibrate(a) => cmd_equilibrate(a, stdout, stderr),
        Command::Ising(a) => cmd_ising(a, stdout),
    }
}

fn level_spectrum(levels: &[f64], degeneracy: Option<&[usize]>) -> Result<Spectrum> {
    let raw: Vec<(f64, usize)> = match degeneracy {
        Some(m) if m.len() != levels.len() => {
            return Err(usage(format!(
                "--degeneracy has {} entries but --levels has {}",
                m.len(),
                levels.len()
            )))
        }
        Some(m) => levels.iter().copied().zip(m.iter().copied()).collect(),
        None => levels.iter().map(|&e| (e, 1)).collect(),
    };
    Ok(make_spectrum(&raw)?)
}

fn chain_spectrum(chain: &ChainArgs) -> Result<Spectrum> {
    let spins = chain.spins.ok_or_else(|| usage("--ising needs --spins"))?;
    Ok(ising_spectrum(&IsingChainSpec::new(
        spins,
        chain.coupling,
        chain.field,
    ))?)
}

pub fn resolve_source(src: &SourceArgs) -> Result<Spectrum> {
    let given = [src.levels.is_some(), src.spectrum.is_some(), src.ising]
        .iter()
        .filter(|&&g| g)
        .count();
    if given != 1 {
        return Err(usage(
            "give exactly one spectrum source: --levels, --spectrum or --ising",
        ));
    }
    if !src.ising && src.chain.spins.is_some() {
        return Err(usage("--spins is only meaningful with --ising"));
    }
    if let Some(levels) = &src.levels {
        level_spectrum(levels, src.degeneracy.as_deref())
    } else if let Some(path) = &src.spectrum {
        Ok(load_spectrum(path)?)
    } else {
        chain_spectrum(&src.chain)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Runs `body` against `--out` or standard output and flushes.
fn with_output(
    path: Option<&Path>,
    stdout: &mut dyn Write,
    body: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    match path {
        Some(p) => {
            let mut file = create(p)?;
            body(&mut file)?;
            file.flush()?;
        }
        None => {
            body(stdout)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn write_gnuplot(output: &OutputArgs, xlabel: &str, ylabel: &str, columns: &str) -> Result<()> {
    if !output.gnuplot {
        return Ok(());
    }
    let data = output
        .out
        .as_ref()
        .expect("clap requires --out with --gnuplot");
    let mut script = data.clone().into_os_string();
    script.push(".gp");
    let script = PathBuf::from(script);
    let name = data.file_name().map_or_else(
        || data.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    );
    let mut w = create(&script)?;
    writeln!(w, "set datafile separator ','")?;
    writeln!(w, "set key off")?;
    writeln!(w, "set xlabel '{xlabel}'")?;
    writeln!(w, "set ylabel '{ylabel}'")?;
    writeln!(w, "plot '{name}' every ::1 using {columns} with lines")?;
    w.flush()?;
    Ok(())
}

/// `points` values from `a` to `b` with both endpoints exact.
fn linspace(a: f64, b: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..points)
            .map(|i| {
                if i + 1 == points {
                    b
                } else {
                    a + (b - a) * i as f64 / (points - 1) as f64
                }
            })
            .collect(),
    }
}

fn dos_of(s: &Spectrum) -> Result<PiecewiseDos> {
    Ok(build_dos(s)?)
}

pub fn cmd_dos(a: &DosArgs, stdout: &mut dyn Write) -> Result<()> {
    let s = resolve_source(&a.source)?;
    if a.grid < 2 {
        return Err(usage("--grid must be at least 2"));
    }
    let d = dos_of(&s)?;
    let (lo, hi) = d.support();
    let mut energies = linspace(lo, hi, a.grid);
    energies.extend(d.breakpoints());
    energies.sort_by(f64::total_cmp);
    energies.dedup();
    with_output(a.output.out.as_deref(), stdout, |w| {
        writeln!(w, "E,Omega")?;
        for e in energies {
            writeln!(w, "{},{}", real(e), real(d.eval(e)))?;
        }
        Ok(())
    })?;
    write_gnuplot(&a.output, "E", "Omega(E)", "1:2")
}

fn criticals_path(a: &ThermoArgs) -> Option<PathBuf> {
    if let Some(p) = &a.criticals {
        return Some(p.clone());
    }
    let out = a.output.out.as_ref()?;
    let stem = out
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    Some(out.with_file_name(format!("{stem}_criticals.csv")))
}

pub fn cmd_thermo(a: &ThermoArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let s = resolve_source(&a.source)?;
    if a.grid < 2 {
        return Err(usage("--grid must be at least 2"));
    }
    if !(a.kb > 0.0 && a.kb.is_finite()) {
        return Err(usage(format!("--kb must be positive, got {}", a.kb)));
    }
    let d = dos_of(&s)?;
    let energies = match (a.t_min, a.t_max, a.e_min, a.e_max) {
        (Some(t0), Some(t1), _, _) => {
            if !(t0 > 0.0 && t0 < t1 && t1.is_finite()) {
                return Err(usage("temperature range needs 0 < --t-min < --t-max"));
            }
            linspace(t0, t1, a.grid)
                .into_iter()
                .map(|t| energy_of_temperature(&d, t * a.kb, Branch::Positive))
                .collect::<qmce_core::Result<Vec<f64>>>()?
        }
        (_, _, Some(e0), Some(e1)) => GridSpec::new(a.grid).with_range(e0, e1).energies(&d)?,
        _ => GridSpec::new(a.grid).energies(&d)?,
    };
    let curve = thermo_curve_at(&d, energies, a.kb)?;
    if d.degree() == 0 {
        writeln!(
            stderr,
            "note: the density of states is flat; C is reported as 0"
        )?;
    }
    with_output(a.output.out.as_deref(), stdout, |w| {
        writeln!(w, "E,S,T,C")?;
        for i in 0..curve.energy.len() {
            writeln!(
                w,
                "{},{},{},{}",
                real(curve.energy[i]),
                real(curve.entropy[i]),
                real(curve.temperature[i]),
                real(curve.specific_heat[i])
            )?;
        }
        Ok(())
    })?;

    let criticals = critical_points(&d);
    let write_criticals = |w: &mut dyn Write| -> Result<()> {
        writeln!(w, "E_c,T_c,order")?;
        for c in &criticals {
            writeln!(
                w,
                "{},{},{}",
                real(c.energy),
                real(c.temperature / a.kb),
                c.discontinuity_order
            )?;
        }
        Ok(())
    };
    match criticals_path(a) {
        Some(p) => {
            let mut f = create(&p)?;
            write_criticals(&mut f)?;
            f.flush()?;
        }
        None => write_criticals(stderr)?,
    }
    write_gnuplot(&a.output, "T", "C", "3:4")
}

pub fn cmd_canonical(a: &CanonicalArgs, stdout: &mut dyn Write) -> Result<()> {
    let s = resolve_source(&a.source)?;
    let betas = match (a.beta, a.beta_min, a.beta_max) {
        (Some(b), _, _) => vec![b],
        (None, Some(b0), Some(b1)) => {
            if b0.is_nan() || b1.is_nan() || b0 > b1 {
                return Err(usage("--beta-min must not exceed --beta-max"));
            }
            if a.grid < 1 {
                return Err(usage("--grid must be at least 1"));
            }
            linspace(b0, b1, if b0 == b1 { 1 } else { a.grid.max(2) })
        }
        _ => return Err(usage("give --beta or both --beta-min and --beta-max")),
    };
    if let Some(&bad) = betas.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(usage(format!(
            "inverse temperature must be positive and finite, got {bad}"
        )));
    }
    let rows = betas
        .iter()
        .map(|&b| canonical_eval(&s, b))
        .collect::<qmce_core::Result<Vec<_>>>()?;
    with_output(a.output.out.as_deref(), stdout, |w| {
        writeln!(w, "beta,Z,U")?;
        for r in &rows {
            writeln!(w, "{},{},{}", real(r.beta), real(r.z), real(r.u))?;
        }
        Ok(())
    })?;
    write_gnuplot(&a.output, "beta", "Z", "1:2")
}

/// Worker threads for Monte Carlo: the machine's parallelism, capped by
/// `QMCE_THREADS` when set.
pub fn mc_threads() -> Result<usize> {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(cap) if cap >= 1 => Ok(cap.min(available)),
            _ => Err(usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(available),
    }
}

pub fn cmd_mc_verify(
    a: &McVerifyArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<()> {
    let s = resolve_source(&a.source)?;
    let sampler = match a.sampler {
        SamplerArg::Exponential => Sampler::Exponential,
        SamplerArg::Gaussian => Sampler::Gaussian,
    };
    let cfg = McConfig::new(a.samples, a.seed)
        .with_bins(a.bins)
        .with_sampler(sampler);
    cfg.validate()?;
    let d = dos_of(&s)?;
    let est = estimate_dos_with_threads(&s, &cfg, mc_threads()?)?;
    let v = verify_against(&est, &d, MC_THRESHOLD_SIGMA);
    with_output(a.output.out.as_deref(), stdout, |w| {
        writeln!(w, "E_lo,E_hi,Omega_hat,stderr,Omega_exact,z")?;
        for b in &v.bins {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                real(b.lo),
                real(b.hi),
                real(b.estimate),
                real(b.stderr),
                real(b.exact),
                real(b.z)
            )?;
        }
        Ok(())
    })?;
    let fraction = v.fraction_within();
    let pass = fraction >= MC_PASS_FRACTION;
    writeln!(
        stderr,
        "{}/{} bins within {} sigma ({:.2}%), required {:.0}%: {}",
        v.within(),
        v.bins.len(),
        MC_THRESHOLD_SIGMA,
        100.0 * fraction,
        100.0 * MC_PASS_FRACTION,
        if pass { "PASS" } else { "FAIL" }
    )?;
    write_gnuplot(&a.output, "E", "Omega", "1:3")?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "only {:.2}% of bins within {MC_THRESHOLD_SIGMA} sigma",
            100.0 * fraction
        )))
    }
}

pub fn cmd_grand(a: &GrandArgs, stdout: &mut dyn Write) -> Result<()> {
    let s = resolve_source(&a.source)?;
    if s.dim() != 3 {
        return Err(usage(format!(
            "grand needs a three-level system, got dimension {}",
            s.dim()
        )));
    }
    if a.grid < 1 {
        return Err(usage("--grid must be at least 1"));
    }
    let centres: Vec<f64> = (0..a.grid)
        .map(|i| (i as f64 + 0.5) / a.grid as f64)
        .collect();
    let marginal = match &a.marginal {
        Some(path) => {
            let (lo, hi) = (s.min_energy(), s.max_energy());
            let rows = linspace(lo, hi, a.grid.max(2))
                .into_iter()
                .map(|e| Ok((e, marginalize_to_energy(&s, e)?)))
                .collect::<qmce_core::Result<Vec<_>>>()?;
            Some((path, rows))
        }
        None => None,
    };
    with_output(a.output.out.as_deref(), stdout, |w| {
        writeln!(w, "p,q,Omega")?;
        for &p in &centres {
            for &q in &centres {
                writeln!(w, "{},{},{}", real(p), real(q), real(grand_dos(p, q)))?;
            }
        }
        Ok(())
    })?;
    if let Some((path, rows)) = marginal {
        let mut f = create(path)?;
        writeln!(f, "E,Omega")?;
        for (e, o) in rows {
            writeln!(f, "{},{}", real(e), real(o))?;
        }
        f.flush()?;
    }
    Ok(())
}

fn equilibrate_source(
    levels: &Option<Vec<f64>>,
    degeneracy: &Option<Vec<usize>>,
    spectrum: &Option<PathBuf>,
    which: u8,
) -> Result<Spectrum> {
    match (levels, spectrum) {
        (Some(l), None) => level_spectrum(l, degeneracy.as_deref()),
        (None, Some(p)) => Ok(load_spectrum(p)?),
        _ => Err(usage(format!(
            "give exactly one of --levels{which} or --spectrum{which}"
        ))),
    }
}

pub fn cmd_equilibrate(
    a: &EquilibrateArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<()> {
    let s1 = equilibrate_source(&a.levels1, &a.degeneracy1, &a.spectrum1, 1)?;
    let s2 = equilibrate_source(&a.levels2, &a.degeneracy2, &a.spectrum2, 2)?;
    let (d1, d2) = (dos_of(&s1)?, dos_of(&s2)?);
    let r = equilibrate(&d1, a.e1, a.n1, &d2, a.e2, a.n2)?;
    if r.boundary {
        writeln!(
            stderr,
            "note: entropy maximum lies on the feasibility boundary; temperatures need not match"
        )?;
    }
    if r.kink {
        writeln!(
            stderr,
            "note: entropy maximum sits on a knot where Omega' jumps; temperatures need not match"
        )?;
    }
    with_output(a.out.as_deref(), stdout, |w| {
        writeln!(w, "epsilon,T1,T2,S_total")?;
        writeln!(
            w,
            "{},{},{},{}",
            real(r.epsilon),
            real(r.t1),
            real(r.t2),
            real(r.total_entropy)
        )?;
        Ok(())
    })
}

pub fn cmd_ising(a: &IsingArgs, stdout: &mut dyn Write) -> Result<()> {
    let spins = a.chain.spins.ok_or_else(|| usage("ising needs --spins"))?;
    let s = chain_spectrum(&a.chain)?;
    with_output(a.out.as_deref(), stdout, |w| {
        writeln!(
            w,
            "# periodic Ising chain L={spins} J={} B={}",
            a.chain.coupling, a.chain.field
        )?;
        write!(w, "{s}")?;
        Ok(())
    })
}
