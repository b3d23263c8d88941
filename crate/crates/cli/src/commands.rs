use std::fmt;
use std::path::Path;

use anharmonic::numerics::{format_fixed, format_scientific, make_context, parse_decimal, rational_to_f64};
use anharmonic::operator::ModelParams;
use anharmonic::spectrum::{
    convergence_table, fit_omega0_model, optimize_omega0, predict_omega0_for, solve_levels,
    Omega0Model, Omega0Policy, SolveRequest,
};
use anharmonic::wavefunction::{sample, sample_potential, Grid, WaveFunction};

use crate::args::{
    ConvergeArgs, EnergyArgs, LevelsArgs, Omega0Command, Physics, PotentialArgs, Solver,
    WavefunctionArgs,
};
use crate::report::{Cell, Report};

#[derive(Debug)]
pub enum CliError {
    /// Malformed argument value.
    Usage(String),
    Solver(anharmonic::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(anharmonic::Error::NotConverged { .. }) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Solver(anharmonic::Error::NotConverged { digits, n_max, last_rows }) => {
                write!(f, "energies not converged to {digits} decimals by order {n_max}")?;
                for row in last_rows {
                    let energies: Vec<String> =
                        row.energies.iter().map(|e| format_fixed(e, *digits)).collect();
                    write!(f, "\n  N = {}: {}", row.order, energies.join(", "))?;
                }
                Ok(())
            }
            CliError::Solver(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<anharmonic::Error> for CliError {
    fn from(e: anharmonic::Error) -> Self {
        CliError::Solver(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn params(physics: &Physics) -> Result<ModelParams> {
    Ok(ModelParams::from_decimal(&physics.omega, &physics.lambda)?)
}

fn positive(text: &str, what: &str) -> Result<f64> {
    let value = parse_decimal(text)
        .map_err(|_| CliError::Usage(format!("invalid {what} `{text}`")))?;
    let value = rational_to_f64(&value);
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::Usage(format!("{what} must be positive, got `{text}`")))
    }
}

fn policy(text: &str) -> Result<Omega0Policy> {
    match text {
        "auto" => Ok(Omega0Policy::Optimize),
        "formula" => Ok(Omega0Policy::Formula),
        other => Ok(Omega0Policy::Fixed(positive(other, "--omega0")?)),
    }
}

fn request(params: ModelParams, levels: Vec<usize>, solver: &Solver) -> Result<SolveRequest> {
    Ok(SolveRequest::new(params, levels, solver.digits)
        .with_policy(policy(&solver.omega0)?)
        .with_n_start(solver.n_start)
        .with_n_max(solver.n_max))
}

fn real(x: f64) -> Cell {
    Cell::num(format!("{x}"))
}

fn int(n: usize) -> Cell {
    Cell::num(n.to_string())
}

/// Parses `a..b`, `a..b:step` (inclusive) or `a,b,c`.
pub fn parse_orders(text: &str) -> Result<Vec<usize>> {
    let bad = || CliError::Usage(format!("invalid --orders `{text}`; expected a..b[:step] or a,b,c"));
    let number = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let orders: Vec<usize> = if let Some((lo, rest)) = text.split_once("..") {
        let (hi, step) = match rest.split_once(':') {
            Some((hi, step)) => (number(hi)?, number(step)?),
            None => (number(rest)?, 1),
        };
        let lo = number(lo)?;
        if step == 0 || lo > hi {
            return Err(bad());
        }
        (lo..=hi).step_by(step).collect()
    } else {
        text.split(',').map(number).collect::<Result<_>>()?
    };
    if orders.is_empty() || orders.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad());
    }
    Ok(orders)
}

/// Parses `min:max:step`.
pub fn parse_grid(text: &str) -> Result<Grid> {
    let bad = || CliError::Usage(format!("invalid grid `{text}`; expected min:max:step"));
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        return Err(bad());
    };
    let value = |s: &str| parse_decimal(s).map_err(|_| bad());
    Ok(Grid::from_rationals(value(lo)?, value(hi)?, value(step)?)?)
}

pub fn energy(args: &EnergyArgs) -> Result<Report> {
    let params = params(&args.physics)?;
    let digits = args.solver.digits;
    let solution = solve_levels(&request(params, vec![args.level], &args.solver)?)?;
    let mut report = Report::new(&["level", "energy", "order", "omega0"])
        .meta("lambda", Cell::num(&args.physics.lambda))
        .meta("omega", Cell::num(&args.physics.omega));
    report.push(vec![
        int(args.level),
        Cell::num(format_fixed(&solution.pairs[0].value, digits)),
        int(solution.final_order),
        real(solution.omega0),
    ]);
    Ok(report)
}

pub fn levels(args: &LevelsArgs) -> Result<Report> {
    if args.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let params = params(&args.physics)?;
    let digits = args.solver.digits;
    let solution = solve_levels(&request(params, (0..args.count).collect(), &args.solver)?)?;
    let mut columns = vec!["lambda".to_string()];
    columns.extend((0..args.count).map(|n| format!("E{n}")));
    let mut report = Report::with_columns(columns)
        .meta("omega", Cell::num(&args.physics.omega))
        .meta("omega0", real(solution.omega0))
        .meta("order", int(solution.final_order));
    let mut row = vec![Cell::num(&args.physics.lambda)];
    row.extend(solution.pairs.iter().map(|p| Cell::num(format_fixed(&p.value, digits))));
    report.push(row);
    Ok(report)
}

pub fn converge(args: &ConvergeArgs) -> Result<Report> {
    let params = params(&args.physics)?;
    let omega0 = positive(&args.omega0, "--omega0")?;
    let orders = parse_orders(&args.orders)?;
    let ctx = make_context(args.digits)?;
    let rows = convergence_table(&params, omega0, &orders, args.level, &ctx)?;
    let mut report = Report::with_columns(vec!["N".into(), format!("E{}", args.level)])
        .meta("lambda", Cell::num(&args.physics.lambda))
        .meta("omega", Cell::num(&args.physics.omega))
        .meta("omega0", real(omega0));
    for row in rows {
        report.push(vec![int(row.order), Cell::num(format_fixed(&row.energies[0], args.digits))]);
    }
    Ok(report)
}

pub fn wavefunction(args: &WavefunctionArgs) -> Result<Report> {
    let params = params(&args.physics)?;
    let grid = parse_grid(&args.x)?;
    let digits = args.solver.digits;
    let solution = solve_levels(&request(params, vec![args.level], &args.solver)?)?;
    let pair = &solution.pairs[0];
    let wf = WaveFunction::from_pair(solution.basis_for(args.level)?, pair)?;
    let ctx = make_context(digits)?;
    let mut report = Report::new(&["x", "psi"])
        .meta("lambda", Cell::num(&args.physics.lambda))
        .meta("level", int(args.level))
        .meta("energy", Cell::num(format_fixed(&pair.value, digits)))
        .meta("omega0", real(solution.omega0))
        .meta("order", int(solution.final_order));
    for (x, psi) in sample(&wf, &grid, &ctx) {
        report.push(vec![real(x), Cell::num(format_scientific(&psi, digits + 1))]);
    }
    Ok(report)
}

pub fn potential(args: &PotentialArgs) -> Result<Report> {
    let params = params(&args.physics)?;
    let omega0 = positive(&args.omega0, "--omega0")?;
    let grid = parse_grid(&args.x)?;
    let series = sample_potential(&params, omega0, &grid)?;
    let mut report = Report::new(&["x", "harmonic", "perturbation"])
        .meta("lambda", Cell::num(&args.physics.lambda))
        .meta("omega0", real(omega0));
    for i in 0..series.x.len() {
        report.push(vec![real(series.x[i]), real(series.harmonic[i]), real(series.perturbation[i])]);
    }
    Ok(report)
}

pub fn omega0(command: &Omega0Command) -> Result<Report> {
    match command {
        Omega0Command::Predict { physics } => {
            let params = params(physics)?;
            let w = predict_omega0_for(&params, &Omega0Model::PUBLISHED)?;
            let mut report = Report::new(&["lambda", "omega0"]);
            report.push(vec![Cell::num(&physics.lambda), real(w)]);
            Ok(report)
        }
        Omega0Command::Optimize { physics, order, level, digits } => {
            let params = params(physics)?;
            let ctx = make_context(*digits)?;
            let (w, e) = optimize_omega0(&params, *order, *level, &ctx)?;
            let mut report = Report::new(&["lambda", "order", "level", "omega0", "energy"]);
            report.push(vec![
                Cell::num(&physics.lambda),
                int(*order),
                int(*level),
                real(w),
                Cell::num(format_fixed(&e, *digits)),
            ]);
            Ok(report)
        }
        Omega0Command::Fit { input } => {
            let points = read_points(input)?;
            let model = fit_omega0_model(&points)?;
            let mut report = Report::new(&["a", "b", "c", "alpha", "sse", "max_abs_error"])
                .meta("points", int(points.len()))
                .meta("reference_sse", real(Omega0Model::PUBLISHED.sse(&points)));
            report.push(vec![
                real(model.a),
                real(model.b),
                real(model.c),
                real(model.alpha),
                real(model.sse(&points)),
                real(model.max_abs_error(&points)),
            ]);
            Ok(report)
        }
    }
}

/// Reads `lambda,omega0` rows.
fn read_points(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("{}: missing column `{name}`", path.display())))
    };
    let (li, wi) = (column("lambda")?, column("omega0")?);
    let mut points = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let field = |i: usize| {
            record
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| CliError::Usage(format!("{}: bad number on row {}", path.display(), line + 1)))
        };
        points.push((field(li)?, field(wi)?));
    }
    Ok(points)
}
