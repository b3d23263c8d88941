use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "anharm", version, about = "Quartic anharmonic oscillator energies and wavefunctions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,

    /// Write output to a file instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Energy of a single level, converged in the basis order.
    Energy(EnergyArgs),
    /// The lowest `count` levels.
    Levels(LevelsArgs),
    /// Energies at fixed truncation orders, no convergence control.
    Converge(ConvergeArgs),
    /// Sampled eigenfunction ψ(x).
    Wavefunction(WavefunctionArgs),
    /// Harmonic and quartic parts of the potential on a grid.
    Potential(PotentialArgs),
    /// Basis frequency tools.
    #[command(subcommand)]
    Omega0(Omega0Command),
}

#[derive(Args, Debug, Clone)]
pub struct Physics {
    /// Coupling constant λ of the x⁴ term.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: String,

    /// Oscillator frequency ω.
    #[arg(long, default_value = "1")]
    pub omega: String,
}

#[derive(Args, Debug, Clone)]
pub struct Solver {
    /// Decimal places the energies are converged to.
    #[arg(long, default_value_t = 8)]
    pub digits: u32,

    /// Basis frequency: `auto` (optimized), `formula` or a positive number.
    #[arg(long, default_value = "auto")]
    pub omega0: String,

    /// Largest basis order tried.
    #[arg(long, default_value_t = 2000)]
    pub n_max: usize,

    /// First basis order tried.
    #[arg(long, default_value_t = 8)]
    pub n_start: usize,
}

#[derive(Args, Debug)]
pub struct EnergyArgs {
    #[command(flatten)]
    pub physics: Physics,

    #[arg(long, default_value_t = 0)]
    pub level: usize,

    #[command(flatten)]
    pub solver: Solver,
}

#[derive(Args, Debug)]
pub struct LevelsArgs {
    #[command(flatten)]
    pub physics: Physics,

    /// Number of levels, starting from the ground state.
    #[arg(long)]
    pub count: usize,

    #[command(flatten)]
    pub solver: Solver,
}

#[derive(Args, Debug)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub physics: Physics,

    /// Orders as `a..b`, `a..b:step` or a comma list.
    #[arg(long)]
    pub orders: String,

    #[arg(long, default_value = "1")]
    pub omega0: String,

    #[arg(long, default_value_t = 0)]
    pub level: usize,

    #[arg(long, default_value_t = 8)]
    pub digits: u32,
}

#[derive(Args, Debug)]
pub struct WavefunctionArgs {
    #[command(flatten)]
    pub physics: Physics,

    #[arg(long, default_value_t = 0)]
    pub level: usize,

    /// Sample grid `min:max:step`.
    #[arg(long, default_value = "-5:5:0.01", allow_hyphen_values = true)]
    pub x: String,

    #[command(flatten)]
    pub solver: Solver,
}

#[derive(Args, Debug)]
pub struct PotentialArgs {
    #[command(flatten)]
    pub physics: Physics,

    #[arg(long)]
    pub omega0: String,

    /// Sample grid `min:max:step`.
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
}

#[derive(Subcommand, Debug)]
pub enum Omega0Command {
    /// ω₀ from the fitted formula.
    Predict {
        #[command(flatten)]
        physics: Physics,
    },
    /// ω₀ minimizing the truncated energy at a fixed order.
    Optimize {
        #[command(flatten)]
        physics: Physics,

        #[arg(long)]
        order: usize,

        #[arg(long, default_value_t = 0)]
        level: usize,

        #[arg(long, default_value_t = 8)]
        digits: u32,
    },
    /// Fit the formula parameters to `lambda,omega0` rows.
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
}
