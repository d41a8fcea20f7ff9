use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{LatticeFlags, OutputFlags, SolverFlags};

#[derive(Debug, Parser)]
#[command(name = "brach", version, about = "Time-optimal excitation transfer on constrained qubit lattices")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Solution store directory (also read from BRACH_STORE).
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// Suppress progress messages on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one lattice and write its protocol.
    Solve {
        #[command(flatten)]
        lattice: LatticeFlags,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        output: OutputFlags,
        /// Protocol JSON path (default: protocol-n<N>.json in the output directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the coupling series as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sweep lattice size or the three-site long-link weight.
    Sweep {
        #[command(subcommand)]
        kind: SweepKind,
    },
    /// Time every forward trajectory of an N-site lattice.
    Trajectories {
        #[command(flatten)]
        lattice: LatticeFlags,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        output: OutputFlags,
        /// Allow N above the enumeration cap.
        #[arg(long)]
        override_cap: bool,
    },
    /// Print closed-form reference values.
    Oracle {
        #[command(subcommand)]
        which: OracleKind,
    },
    /// Re-check a protocol file by forward propagation.
    Verify {
        protocol: PathBuf,
        /// Also integrate the full-matrix flow.
        #[arg(long)]
        qbe: bool,
    },
    /// Compare against reference values and report pass/fail per quantity.
    Reproduce {
        suite: Suite,
        /// Largest lattice for the size sweeps.
        #[arg(long)]
        max_n: Option<usize>,
        /// Reuse and extend the solution store.
        #[arg(long)]
        use_store: bool,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        output: OutputFlags,
    },
}

#[derive(Debug, Subcommand)]
pub enum SweepKind {
    /// Sizes `from..=to`, warm-started from the store.
    N {
        #[arg(long)]
        from: usize,
        #[arg(long)]
        to: usize,
        /// Re-solve sizes already in the store.
        #[arg(long)]
        no_reuse: bool,
        #[command(flatten)]
        lattice: LatticeFlags,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        output: OutputFlags,
    },
    /// Three sites, long-link weight over a grid.
    G {
        #[arg(long, default_value_t = 1.0)]
        g_min: f64,
        #[arg(long, default_value_t = 10.0)]
        g_max: f64,
        #[arg(long, default_value_t = 37)]
        steps: usize,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        output: OutputFlags,
    },
}

#[derive(Debug, Subcommand)]
pub enum OracleKind {
    /// Closed-form three-site optimum.
    ThreeQubit {
        #[arg(long)]
        g: f64,
    },
    /// Weighted two-link chain with link weights 1 and g.
    Elliptic {
        #[arg(long)]
        g: f64,
    },
    /// Single hop of weight g.
    DirectHop {
        #[arg(long)]
        g: f64,
    },
    /// Classical transport estimate for N sites.
    ClassicalBound {
        #[arg(long)]
        n: usize,
    },
    /// Large-N expansion of the optimal time.
    Asymptotic {
        #[arg(long)]
        n: usize,
    },
    /// Unweighted two-level speed limit.
    Unpenalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    TableS1,
    TableS2,
    Fig2,
    Fits,
    All,
}
