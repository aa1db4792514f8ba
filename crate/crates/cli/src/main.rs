mod manifest;
mod svg;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tvbar_core::appendix;
use tvbar_core::barcode::generate;
use tvbar_core::certify::{self, Certificate};
use tvbar_core::convolve::{blur, default_spacing, GridSpec};
use tvbar_core::energy::{dual_norm, trivial_thresholds};
use tvbar_core::io::{self, Format};
use tvbar_core::kernel::{JGrid, J_TOL};
use tvbar_core::oracle::{self, as_piecewise};
use tvbar_core::solver::{self, Init, Scheme, TimeStep};
use tvbar_core::{
    BarCode, EndpointConstraint, EnergyParams, Functional, GeneratorConfig, Kernel, NoiseConfig, OracleConfig,
    SearchSpace, Signal, SolverConfig,
};

use manifest::Recorder;

/// Blur, deblur and certify one-dimensional bar codes.
#[derive(Parser, Debug)]
#[command(name = "tvbar", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a random bar code with X-dimension at least ω.
    Synth(SynthArgs),
    /// Blur a bar code with a kernel.
    Blur(BlurArgs),
    /// Add block-constant uniform noise to a signal.
    Noise(NoiseArgs),
    /// Phase-field deblurring of a signal to a bar code.
    Deblur(DeblurArgs),
    /// Check the sufficient conditions for exact recovery.
    Certify(CertifyArgs),
    /// Exhaustive minimization over grid bar codes.
    Oracle(OracleArgs),
    /// Dual norm of a signal, or the trivial-minimizer thresholds of a code.
    Dualnorm(DualnormArgs),
    /// Class-𝒦 and 𝒥-condition check for a kernel.
    KernelCheck(KernelCheckArgs),
    /// Verify the hat-kernel closed forms, the counterexample and the 𝒥 condition.
    PaperCheck(PaperCheckArgs),
}

#[derive(Args, Debug, Serialize)]
struct Common {
    /// Seed for all randomness (also read from TVBAR_SEED).
    #[arg(long, env = "TVBAR_SEED", default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Manifest path (default: next to the output file).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum KernelKind {
    Hat,
    Gaussian,
}

#[derive(Args, Debug, Serialize)]
struct KernelArgs {
    #[arg(long, value_enum, default_value = "hat")]
    kernel: KernelKind,
    /// Kernel size σ (hat half-width, Gaussian standard deviation).
    #[arg(long)]
    sigma: Option<f64>,
    /// Gaussian truncation in units of σ.
    #[arg(long)]
    truncation: Option<f64>,
    /// Kernel as JSON (overrides --kernel/--sigma).
    #[arg(long)]
    kernel_file: Option<PathBuf>,
}

impl KernelArgs {
    fn build(&self) -> anyhow::Result<Kernel> {
        if let Some(p) = &self.kernel_file {
            let k: Kernel = io::from_json(&read_text(Some(p))?)?;
            k.validate()?;
            return Ok(k);
        }
        let sigma = self.sigma.ok_or_else(|| usage("--sigma is required"))?;
        Ok(match self.kernel {
            KernelKind::Hat => Kernel::hat(sigma)?,
            KernelKind::Gaussian => Kernel::gaussian(sigma, self.truncation)?,
        })
    }
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    #[arg(long)]
    omega: f64,
    #[arg(long, default_value_t = 12)]
    max_bars: usize,
    /// Endpoint class `ij` (i, j ∈ {0,1}): whether the code starts/ends with a bar.
    #[arg(long)]
    endpoints: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct BlurArgs {
    /// Bar code JSON; stdin when omitted.
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[command(flatten)]
    kernel: KernelArgs,
    /// X-dimension used for the default grid spacing ω/400 (default: the code's).
    #[arg(long)]
    omega: Option<f64>,
    /// Sample on a grid of this spacing instead of the exact result.
    #[arg(long)]
    h: Option<f64>,
    /// Output format (default: json for exact results, csv for grids).
    #[arg(long)]
    format: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct NoiseArgs {
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    amplitude: f64,
    /// Default: the ω recorded in the signal's provenance.
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long, default_value = "csv")]
    format: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum InitArg {
    Zero,
    Half,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum SchemeArg {
    SemiImplicit,
    Explicit,
}

#[derive(Args, Debug, Serialize)]
struct DeblurArgs {
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "F2")]
    functional: String,
    #[arg(long)]
    lambda: f64,
    /// Blur size; the hat φ_σ is the fidelity kernel for F2. Default: the
    /// kernel in the signal's provenance.
    #[arg(long)]
    sigma: Option<f64>,
    /// Hat size of the deblurring kernel (F3).
    #[arg(long)]
    rho: Option<f64>,
    /// Default: the ω in the signal's provenance, else the truth's X-dimension.
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long, default_value_t = 4e-4)]
    epsilon: f64,
    /// Time step; automatic when omitted.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum, default_value = "semi-implicit")]
    scheme: SchemeArg,
    #[arg(long, default_value_t = 200_000)]
    max_steps: usize,
    #[arg(long, default_value_t = 1e-8)]
    steady_tol: f64,
    #[arg(long, value_enum, default_value = "zero")]
    init: InitArg,
    /// Add noise of this amplitude before deblurring.
    #[arg(long)]
    noise: Option<f64>,
    /// Generating code, drawn in the plot and compared against.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Directory for the field CSV, code JSON, SVG and manifest.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value = "deblur")]
    prefix: String,
    /// Refuse parameters outside the certified regime.
    #[arg(long)]
    strict: bool,
    #[arg(long, env = "TVBAR_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct CertifyArgs {
    /// F1, F2, F3 or unified.
    #[arg(long)]
    functional: String,
    #[arg(long)]
    omega: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    lambda: f64,
    /// Print the certificate as JSON.
    #[arg(long)]
    json: bool,
    /// Exit 1 when the parameters are not certified.
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct OracleArgs {
    /// Observed signal; otherwise the noiseless hat blur of --code.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Generating code (also added to the candidates).
    #[arg(long)]
    code: Option<PathBuf>,
    #[arg(long, default_value = "F2")]
    functional: String,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    rho: Option<f64>,
    /// Comma-separated λ values; runs a sweep instead of a single search.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<f64>>,
    #[arg(long, default_value_t = 25)]
    grid_points: usize,
    #[arg(long, default_value_t = 6)]
    max_interfaces: usize,
    #[arg(long)]
    endpoints: Option<String>,
    /// Extra candidate codes (JSON files).
    #[arg(long)]
    extra: Vec<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value_t = 5_000_000)]
    budget: u128,
    /// ω for the certificate check (default: X-dimension of --code).
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct DualnormArgs {
    /// Signal whose dual norm is computed.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Bar code: report λ_star and λ₀ instead.
    #[arg(long)]
    code: Option<PathBuf>,
    #[arg(long, default_value = "F2")]
    functional: String,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct KernelCheckArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, default_value_t = 16)]
    n_tau: usize,
    #[arg(long, default_value_t = 8)]
    n_c: usize,
    #[arg(long, default_value_t = 64)]
    n_x: usize,
    /// Exit 1 unless the kernel is admissible.
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct PaperCheckArgs {
    /// Random parameter sets per case.
    #[arg(long, default_value_t = 20)]
    sets: usize,
    #[command(flatten)]
    common: Common,
}

/// Missing or contradictory arguments detected after parsing.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A request outside the certified regime under `--strict`, or a failed check.
#[derive(Debug)]
struct DomainError(String);

impl std::fmt::Display for DomainError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DomainError {}

fn usage(msg: &str) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.to_string()))
}

fn domain(msg: String) -> anyhow::Error {
    anyhow::Error::new(DomainError(msg))
}

fn read_text(path: Option<&Path>) -> anyhow::Result<String> {
    match path {
        Some(p) if p != Path::new("-") => {
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
        }
        _ => Ok(io::read_all(std::io::stdin().lock())?),
    }
}

fn write_file(p: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
}

fn write_stdout(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn emit(rec: &mut Recorder, path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            write_file(p, text)?;
            rec.output(p);
            Ok(())
        }
        None => write_stdout(text),
    }
}

fn parse_functional(s: &str) -> anyhow::Result<Functional> {
    s.parse::<Functional>().map_err(|_| usage(&format!("unknown functional '{s}' (F1, F2 or F3)")))
}

fn parse_endpoints(s: Option<&str>) -> anyhow::Result<Option<EndpointConstraint>> {
    s.map(|e| e.parse::<EndpointConstraint>().map_err(|_| usage(&format!("endpoint class must be 00, 01, 10 or 11, got '{e}'"))))
        .transpose()
}

fn parse_format(s: &str) -> anyhow::Result<Format> {
    s.parse::<Format>().map_err(|_| usage(&format!("unknown format '{s}' (json or csv)")))
}

fn params(functional: Functional, lambda: f64, sigma: f64, rho: Option<f64>) -> anyhow::Result<EnergyParams> {
    if functional == Functional::F3 && rho.is_none() {
        return Err(usage("F3 needs --rho"));
    }
    Ok(EnergyParams::new(functional, lambda, sigma, rho)?)
}

/// Prints the certificate verdict; an error under `--strict` when uncertified.
fn gate(cert: &Certificate, strict: bool) -> anyhow::Result<()> {
    if cert.verdict {
        return Ok(());
    }
    if strict {
        return Err(domain(format!("parameters are outside the proven regime\n{cert}")));
    }
    eprintln!("warning: parameters are outside the proven regime; running anyway");
    Ok(())
}

fn synth(a: &SynthArgs) -> anyhow::Result<()> {
    let mut rec = Recorder::new("synth", a, Some(a.common.seed));
    let cfg = GeneratorConfig {
        omega: a.omega,
        max_bars: a.max_bars,
        endpoints: parse_endpoints(a.endpoints.as_deref())?,
        seed: a.common.seed,
    };
    let z = generate(&cfg)?;
    emit(&mut rec, a.common.output.as_deref(), &io::to_json_pretty(&z)?)?;
    rec.finish(a.common.manifest.clone())
}

fn blur_cmd(a: &BlurArgs) -> anyhow::Result<()> {
    let mut rec = Recorder::new("blur", a, None);
    rec.input(a.input.as_deref());
    let z = io::parse_code(&read_text(a.input.as_deref())?)?;
    let k = a.kernel.build()?;
    let omega = match a.omega {
        Some(w) => Some(w),
        None => z.x_dimension().ok(),
    };
    let grid = match a.h {
        Some(h) => {
            let r = k.effective_radius();
            Some(GridSpec::covering(-r, 1.0 + r, h)?)
        }
        None => None,
    };
    let mut f = blur(&z, &k, grid.as_ref(), omega)?;
    f.provenance.omega = omega;
    f.provenance.kernel = Some(k.clone());
    f.provenance.source = Some("blur".into());
    let format = match &a.format {
        Some(s) => parse_format(s)?,
        None if f.as_grid().is_some() => Format::Csv,
        None => Format::Json,
    };
    let text = io::signal_to_string(&f, format, a.h.unwrap_or_else(|| default_spacing(omega, &k)))?;
    emit(&mut rec, a.common.output.as_deref(), &text)?;
    rec.finish(a.common.manifest.clone())
}

fn noise_cmd(a: &NoiseArgs) -> anyhow::Result<()> {
    let mut rec = Recorder::new("noise", a, Some(a.common.seed));
    rec.input(a.input.as_deref());
    let f = io::parse_signal(&read_text(a.input.as_deref())?, None)?;
    let omega = a
        .omega
        .or(f.provenance.omega)
        .ok_or_else(|| usage("--omega is required (the signal records none)"))?;
    let noisy = solver::add_noise(&f, &NoiseConfig::new(a.amplitude, a.common.seed), omega)?;
    let text = io::signal_to_string(&noisy, parse_format(&a.format)?, omega / 400.0)?;
    emit(&mut rec, a.common.output.as_deref(), &text)?;
    rec.finish(a.common.manifest.clone())
}

#[derive(Serialize)]
struct DeblurSummary<'a> {
    code: &'a BarCode,
    steps: usize,
    converged: bool,
    dt: f64,
    residual: f64,
    u_min: f64,
    u_max: f64,
    energy_descends: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_interface_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    interface_count_matches: Option<bool>,
    certified: bool,
}

fn deblur_cmd(a: &DeblurArgs) -> anyhow::Result<()> {
    let mut rec = Recorder::new("deblur", a, Some(a.seed));
    rec.input(a.input.as_deref());
    let functional = parse_functional(&a.functional)?;
    let mut f = io::parse_signal(&read_text(a.input.as_deref())?, None)?;
    let truth = match &a.truth {
        Some(p) => {
            rec.input(Some(p));
            Some(io::parse_code(&read_text(Some(p))?)?)
        }
        None => None,
    };
    let omega = a
        .omega
        .or(f.provenance.omega)
        .or_else(|| truth.as_ref().and_then(|z| z.x_dimension().ok()))
        .ok_or_else(|| usage("--omega is required (neither the signal nor --truth provide one)"))?;
    let blur_kernel = match (a.sigma, &f.provenance.kernel) {
        (Some(s), _) => Kernel::hat(s)?,
        (None, Some(k)) => k.clone(),
        (None, None) => return Err(usage("--sigma is required (the signal records no kernel)")),
    };
    let deblur_kernel = match functional {
        Functional::F1 => None,
        Functional::F2 => Some(blur_kernel.clone()),
        Functional::F3 => Some(Kernel::hat(a.rho.ok_or_else(|| usage("F3 needs --rho"))?)?),
    };
    let cert = match (functional, &blur_kernel, &deblur_kernel) {
        (Functional::F1, Kernel::Hat { size }, _) => Some(certify::certify_f1(omega, *size, a.lambda)),
        (Functional::F2, Kernel::Hat { size }, _) => Some(certify::certify_f2(omega, *size, a.lambda)),
        (Functional::F3, Kernel::Hat { size }, Some(Kernel::Hat { size: rho })) => {
            Some(certify::certify_f3(omega, *size, *rho, a.lambda))
        }
        _ => None,
    };
    match &cert {
        Some(c) => gate(c, a.strict)?,
        None if a.strict => return Err(domain("no certificate exists for non-hat kernels".into())),
        None => eprintln!("warning: no certificate exists for non-hat kernels; running anyway"),
    }
    if let Some(amp) = a.noise {
        f = solver::add_noise(&f, &NoiseConfig::new(amp, a.seed), omega)?;
    }
    let mut cfg = SolverConfig::new(functional, a.lambda, blur_kernel, deblur_kernel, omega);
    cfg.epsilon = a.epsilon;
    cfg.dt = a.dt.map_or(TimeStep::Auto, TimeStep::Fixed);
    cfg.scheme = match a.scheme {
        SchemeArg::SemiImplicit => Scheme::SemiImplicit,
        SchemeArg::Explicit => Scheme::Explicit,
    };
    cfg.max_steps = a.max_steps;
    cfg.steady_tol = a.steady_tol;
    cfg.init = match a.init {
        InitArg::Zero => Init::Zero,
        InitArg::Half => Init::Half,
    };
    let out = solver::deblur(&f, &cfg)?;
    if !out.converged {
        eprintln!("warning: no steady state after {} steps (last change {:.3e})", out.steps, out.last_change);
    }
    let field = out.field.as_grid().expect("solver output is a grid");

    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let path = |ext: &str| a.out_dir.join(format!("{}{ext}", a.prefix));
    let field_path = path("_field.csv");
    emit(&mut rec, Some(&field_path), &io::signal_to_string(&out.field, Format::Csv, field.h)?)?;
    let code_path = path("_code.json");
    emit(&mut rec, Some(&code_path), &io::to_json_pretty(&out.code)?)?;
    emit(&mut rec, Some(&path(".svg")), &svg::render(truth.as_ref(), &f, field, &out.code))?;

    let summary = DeblurSummary {
        code: &out.code,
        steps: out.steps,
        converged: out.converged,
        dt: out.dt,
        residual: out.residual,
        u_min: out.u_min,
        u_max: out.u_max,
        energy_descends: out.energy_descends(),
        max_interface_deviation: truth.as_ref().and_then(|z| z.max_interface_deviation(&out.code)),
        interface_count_matches: truth.as_ref().map(|z| z.total_variation() == out.code.total_variation()),
        certified: cert.as_ref().is_some_and(|c| c.verdict),
    };
    write_stdout(&io::to_json_pretty(&summary)?)?;
    rec.finish(Some(path("_manifest.json")))
}

fn certify_cmd(a: &CertifyArgs) -> anyhow::Result<()> {
    let mut rec = Recorder::new("certify", a, None);
    let cert = if a.functional.eq_ignore_ascii_case("unified") {
        let rho = a.rho.ok_or_else(|| usage("the unified condition needs --rho"))?;
        certify::unified_condition(a.omega, a.sigma, rho, a.lambda)?
    } else {
        let p = params(parse_functional(&a.functional)?, a.lambda, a.sigma, a.rho)?;
        certify::certify(&p, a.omega)
    };
    let text = if a.json { io::to_json_pretty(&cert)? } else { format!("{cert}\n") };
    emit(&mut rec, a.common.output.as_deref(), &text)?;
    rec.finish(a.common.manifest.clone())?;
    if a.strict && !cert.verdict {
        return Err(domain("parameters are outside the proven regime".into()));
    }
    Ok(())
}

fn oracle_cmd(a: &OracleArgs) -> anyhow::Result<()> {
    let mut rec = Recorder::new("oracle", a, None);
    let functional = parse_functional(&a.functional)?;
    let z = match &a.code {
        Some(p) => {
            rec.input(Some(p));
            Some(io::parse_code(&read_text(Some(p))?)?)
        }
        None => None,
    };
    let f = match (&a.input, &z) {
        (Some(p), _) => {
            rec.input(Some(p));
            io::parse_signal(&read_text(Some(p))?, None)?
        }
        (None, Some(z)) => tvbar_core::convolve::hat_convolve(z, a.sigma)?,
        (None, None) => return Err(usage("oracle needs --input or --code")),
    };
    let mut space = SearchSpace::new(a.grid_points, a.max_interfaces)?;
    space.endpoints = parse_endpoints(a.endpoints.as_deref())?;
    if let Some(z) = &z {
        space.extra_candidates.push(z.clone());
    }
    for p in &a.extra {
        rec.input(Some(p));
        space.extra_candidates.push(io::parse_code(&read_text(Some(p))?)?);
    }
    let cfg = OracleConfig { budget_cap: a.budget, jobs: a.jobs, ..Default::default() };
    let omega = a.omega.or_else(|| z.as_ref().and_then(|z| z.x_dimension().ok()));

    let text = match &a.sweep {
        Some(lambdas) => {
            let z = z.as_ref().ok_or_else(|| usage("--sweep needs --code"))?;
            let template = params(functional, lambdas.first().copied().unwrap_or(1.0), a.sigma, a.rho)?;
            io::to_json_pretty(&oracle::sweep_lambda(&space, z, &template, lambdas, &cfg)?)?
        }
        None => {
            let lambda = a.lambda.ok_or_else(|| usage("--lambda or --sweep is required"))?;
            let p = params(functional, lambda, a.sigma, a.rho)?;
            match omega {
                Some(w) => gate(&certify::certify(&p, w), a.strict)?,
                None if a.strict => return Err(usage("--strict needs --omega or --code")),
                None => {}
            }
            let f = Signal::piecewise(as_piecewise(&f)).with_provenance(f.provenance.clone());
            io::to_json_pretty(&oracle::minimize(&space, &f, &p, &cfg)?)?
        }
    };
    emit(&mut rec, a.common.output.as_deref(), &text)?;
    rec.finish(a.common.manifest.clone())
}

fn dualnorm_cmd(a: &DualnormArgs) -> anyhow::Result<()> {
    let mut rec = Recorder::new("dualnorm", a, None);
    let value = match (&a.code, &a.input) {
        (Some(p), _) => {
            rec.input(Some(p));
            let z = io::parse_code(&read_text(Some(p))?)?;
            let sigma = a.sigma.ok_or_else(|| usage("--sigma is required with --code"))?;
            let p = params(parse_functional(&a.functional)?, 1.0, sigma, a.rho)?;
            let t = trivial_thresholds(&z, &p)?;
            let f = tvbar_core::convolve::hat_double_convolve(&z, p.rho, sigma)?;
            serde_json::json!({ "dual_norm": dual_norm(&f), "lambda_star": t.lambda_star, "lambda_0": t.lambda_0 })
        }
        (None, input) => {
            rec.input(input.as_deref());
            let f = io::parse_signal(&read_text(input.as_deref())?, None)?;
            serde_json::json!({ "dual_norm": dual_norm(&f) })
        }
    };
    emit(&mut rec, a.common.output.as_deref(), &io::to_json_pretty(&value)?)?;
    rec.finish(a.common.manifest.clone())
}

fn kernel_check_cmd(a: &KernelCheckArgs) -> anyhow::Result<()> {
    let mut rec = Recorder::new("kernel-check", a, None);
    let k = a.kernel.build()?;
    let report = k.check_condition_j(&JGrid::new(a.n_tau, a.n_c, a.n_x))?;
    emit(&mut rec, a.common.output.as_deref(), &io::to_json_pretty(&report)?)?;
    rec.finish(a.common.manifest.clone())?;
    if a.strict && !report.in_class_k3 {
        return Err(domain(format!("{} kernel is not admissible", k.name())));
    }
    Ok(())
}

#[derive(Serialize)]
struct Check {
    name: String,
    passed: bool,
    detail: String,
}

fn paper_check_cmd(a: &PaperCheckArgs) -> anyhow::Result<()> {
    let mut rec = Recorder::new("paper-check", a, Some(a.common.seed));
    let mut checks = Vec::new();

    let rows = appendix::run_battery(a.sets, a.common.seed)?;
    let mut cases: Vec<String> = rows.iter().map(|r| r.case.clone()).collect();
    cases.dedup();
    for case in cases {
        let worst = rows.iter().filter(|r| r.case == case).map(|r| r.abs_error).fold(0.0, f64::max);
        checks.push(Check {
            name: format!("closed form {case} vs quadrature"),
            passed: worst <= 1e-6,
            detail: format!("worst abs error {worst:.3e} over {} sets", a.sets),
        });
    }

    let ce = appendix::counterexample()?;
    let rel = |v: f64, r: f64| ((v - r) / r).abs();
    let (e1, e2) = (rel(ce.original_fidelity, 2.407e-4), rel(ce.competitor_fidelity, 2.378e-4));
    checks.push(Check {
        name: "counterexample fidelities".into(),
        passed: e1 <= 0.01 && e2 <= 0.01 && ce.competitor_fidelity < ce.original_fidelity,
        detail: format!("original {:.4e}, competitor {:.4e}", ce.original_fidelity, ce.competitor_fidelity),
    });

    let hat = Kernel::hat(1.0)?.check_condition_j(&JGrid::default())?;
    checks.push(Check {
        name: "hat kernel 𝒥 condition".into(),
        passed: hat.in_class_k3 && hat.worst_j.is_some_and(|w| w.abs() <= J_TOL),
        detail: format!("worst 𝒥 {:.3e}, route {:?}", hat.worst_j.unwrap_or(f64::NAN), hat.sufficient_condition),
    });

    let all = checks.iter().all(|c| c.passed);
    let text = match &a.common.output {
        Some(_) => io::to_json_pretty(&checks)?,
        None => checks
            .iter()
            .map(|c| format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect(),
    };
    emit(&mut rec, a.common.output.as_deref(), &text)?;
    rec.finish(a.common.manifest.clone())?;
    if !all {
        return Err(domain("some checks failed".into()));
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Blur(a) => blur_cmd(a),
        Command::Noise(a) => noise_cmd(a),
        Command::Deblur(a) => deblur_cmd(a),
        Command::Certify(a) => certify_cmd(a),
        Command::Oracle(a) => oracle_cmd(a),
        Command::Dualnorm(a) => dualnorm_cmd(a),
        Command::KernelCheck(a) => kernel_check_cmd(a),
        Command::PaperCheck(a) => paper_check_cmd(a),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 64;
        }
        if let Some(c) = cause.downcast_ref::<tvbar_core::Error>() {
            return if c.is_io() { 2 } else { 1 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(64) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
