//! Command-line front end. Exit codes: 0 stable, 2 not stable, 3 undetermined,
//! 64 usage or input error, 70 solver inconsistency.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use crate::analysis::{certify, AnalysisVerdict, CertifyOptions};
use crate::error::{invalid, Error, Result};
use crate::lmi::{MultiplierClass, SlopeBand};
use crate::simulate::{integrate, vector_field_grid, write_vector_field_csv, SimOptions};
use crate::system::{dd_counterexample, dhd_counterexample, StateSpace};
use crate::witness::WitnessFile;

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_SOFTWARE: i32 = 70;

#[derive(Debug, Parser)]
#[command(
    name = "lure",
    version,
    about = "Absolute stability analysis of Lur'e systems with static OZF multipliers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClassArg {
    Dhd,
    Dd,
}

impl From<ClassArg> for MultiplierClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::Dhd => MultiplierClass::Dhd,
            ClassArg::Dd => MultiplierClass::Dd,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify absolute stability or extract an instability witness.
    Certify {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, value_enum)]
        class: ClassArg,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
        /// Strictness of the primal LMI (default scales with ‖A‖ and ‖C‖).
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the loop closed with the witness nonlinearity.
    Simulate {
        #[arg(long)]
        system: PathBuf,
        /// Witness JSON, or a verdict JSON that contains one.
        #[arg(long)]
        witness: PathBuf,
        /// Initial state, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline on a built-in example system.
    Demo {
        #[arg(value_enum)]
        name: ClassArg,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::SolverInconsistency(_) | Error::ToleranceConflict(_) => EXIT_SOFTWARE,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Certify {
            system,
            class,
            mu,
            nu,
            eps,
            seed,
            out,
        } => {
            let sys = StateSpace::load(&system)?;
            let opts = CertifyOptions {
                eps,
                seed,
                ..Default::default()
            };
            let v = certify(&sys, class.into(), SlopeBand::new(mu, nu)?, &opts)?;
            std::fs::write(&out, serde_json::to_string_pretty(&v)?)?;
            print_verdict(&v);
            Ok(v.verdict.exit_code())
        }
        Command::Simulate {
            system,
            witness,
            x0,
            t_end,
            dt,
            out,
        } => {
            let sys = StateSpace::load(&system)?;
            let w = load_witness(&witness)?;
            let x0 = parse_vector(&x0)?;
            simulate_to_files(&sys, &w, &x0, t_end, dt, &out)?;
            Ok(0)
        }
        Command::Demo { name, out_dir } => demo(name.into(), &out_dir),
    }
}

fn print_verdict(v: &AnalysisVerdict) {
    println!("verdict: {:?}", v.verdict);
    println!(
        "primal: {:?} ({} iterations)",
        v.primal_report.status, v.primal_report.iterations
    );
    if let Some(d) = &v.dual_report {
        println!("dual:   {:?} ({} iterations)", d.status, d.iterations);
    }
    for n in &v.notes {
        println!("note: {n}");
    }
}

/// Reads a witness file, or the `witness` field of a verdict file.
pub fn load_witness(path: &Path) -> Result<WitnessFile> {
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let inner = match value.get("verdict") {
        Some(_) => value
            .get("witness")
            .filter(|w| !w.is_null())
            .cloned()
            .ok_or_else(|| invalid("verdict file carries no witness"))?,
        None => value,
    };
    Ok(serde_json::from_value(inner)?)
}

pub fn parse_vector(s: &str) -> Result<DVector<f64>> {
    let v: std::result::Result<Vec<f64>, _> =
        s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let v = v.map_err(|e| invalid(format!("cannot parse {s:?} as a vector: {e}")))?;
    Ok(DVector::from_vec(v))
}

fn field_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("trajectory");
    out.with_file_name(format!("{stem}_field.csv"))
}

/// Writes the trajectory CSV and, for planar systems, a vector-field CSV next
/// to it (`<stem>_field.csv`) over a box containing the trajectory.
pub fn simulate_to_files(
    sys: &StateSpace,
    w: &WitnessFile,
    x0: &DVector<f64>,
    t_end: f64,
    dt: f64,
    out: &Path,
) -> Result<()> {
    let phi = w.pwl()?;
    let opts = SimOptions {
        dt,
        t_end,
        ..Default::default()
    };
    let traj = integrate(sys, &phi, x0, &opts)?;
    traj.write_csv(BufWriter::new(File::create(out)?))?;
    if sys.n() == 2 {
        let span = traj
            .states
            .iter()
            .chain(std::iter::once(&DVector::from_column_slice(&w.h1)))
            .map(|x| x.amax())
            .fold(0.0, f64::max)
            .max(1e-3)
            * 1.2;
        let field = vector_field_grid(sys, &phi, (-span, span), (-span, span), 21)?;
        write_vector_field_csv(&field, BufWriter::new(File::create(field_path(out))?))?;
    }
    Ok(())
}

fn demo(class: MultiplierClass, dir: &Path) -> Result<i32> {
    std::fs::create_dir_all(dir)?;
    let sys = match class {
        MultiplierClass::Dhd => dhd_counterexample(),
        MultiplierClass::Dd => dd_counterexample(),
    };
    sys.save(dir.join("system.json"))?;
    let v = certify(&sys, class, SlopeBand::unit(), &CertifyOptions::default())?;
    std::fs::write(dir.join("verdict.json"), serde_json::to_string_pretty(&v)?)?;
    print_verdict(&v);

    if let (Some(wf), Some(phi)) = (&v.witness, &v.phi) {
        wf.save(dir.join("witness.json"))?;
        let fmt = |x: &[f64]| {
            x.iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        println!("h1     = ({})", fmt(&wf.h1));
        println!("h2     = ({})", fmt(&wf.h2));
        println!("z*     = ({})", fmt(&wf.z_star));
        println!("w*     = ({})", fmt(&wf.w_star));
        println!("slope check: {}", v.slope_verified.unwrap_or(false));
        if let Some(eq) = &v.equilibrium {
            println!("equilibrium residual at h1: {:.3e}", eq.residual);
        }

        // input-output map of phi_wc
        let bp = phi.breakpoints();
        let (lo, hi) = (bp[0].0, bp[bp.len() - 1].0);
        let pad = 0.25 * (hi - lo).max(1e-3);
        let mut csv = String::from("z,phi\n");
        for k in 0..=400 {
            let z = lo - pad + (hi - lo + 2.0 * pad) * k as f64 / 400.0;
            csv.push_str(&format!("{z},{}\n", phi.eval(z)));
        }
        std::fs::write(dir.join("phi_wc.csv"), csv)?;

        let h1 = DVector::from_column_slice(&wf.h1);
        simulate_to_files(&sys, wf, &h1, 10.0, 1e-3, &dir.join("trajectory_h1.csv"))?;
        let x0 = DVector::from_element(sys.n(), -0.5);
        simulate_to_files(
            &sys,
            wf,
            &x0,
            50.0,
            1e-3,
            &dir.join("trajectory_minus_half.csv"),
        )?;
        println!("wrote plot data to {}", dir.display());
    }
    Ok(v.verdict.exit_code())
}
