//! [`ConicBackend`] implementation on top of the Clarabel interior-point solver.

use cellfree_otfs_core::conic::{Cone, ConeProgram, ConicBackend, ConicError, ConicSolution, ConicStatus};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

/// Clarabel with tolerances tightened to match the built-in dense solver.
#[derive(Debug, Clone)]
pub struct ClarabelBackend {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iter: u32,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        ClarabelBackend {
            tol_feas: 1e-9,
            tol_gap: 1e-9,
            max_iter: 200,
        }
    }
}

fn map_status(status: SolverStatus) -> ConicStatus {
    match status {
        SolverStatus::Solved => ConicStatus::Solved,
        SolverStatus::AlmostSolved => ConicStatus::AlmostSolved,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => ConicStatus::PrimalInfeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => ConicStatus::DualInfeasible,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => ConicStatus::MaxIterations,
        _ => ConicStatus::NumericalError,
    }
}

impl ConicBackend for ClarabelBackend {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn solve(&self, program: &ConeProgram) -> Result<ConicSolution, ConicError> {
        program.validate()?;
        let n = program.num_vars;
        let m = program.num_rows();
        let (rows, (cols, vals)): (Vec<usize>, (Vec<usize>, Vec<f64>)) =
            program.a.iter().map(|&(r, c, v)| (r, (c, v))).unzip();
        let a = CscMatrix::new_from_triplets(m, n, rows, cols, vals);
        let p = CscMatrix::zeros((n, n));
        let cones: Vec<SupportedConeT<f64>> = program
            .cones
            .iter()
            .map(|c| match *c {
                Cone::Nonnegative(d) => SupportedConeT::NonnegativeConeT(d),
                Cone::SecondOrder(d) => SupportedConeT::SecondOrderConeT(d),
            })
            .collect();
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_feas(self.tol_feas)
            .tol_gap_abs(self.tol_gap)
            .tol_gap_rel(self.tol_gap)
            .max_iter(self.max_iter)
            .build()
            .map_err(|e| ConicError::Backend(format!("settings: {e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &program.c, &a, &program.b, &cones, settings)
            .map_err(|e| ConicError::Backend(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        Ok(ConicSolution {
            status: map_status(sol.status),
            x: sol.x.clone(),
            s: sol.s.clone(),
            z: sol.z.clone(),
            iterations: sol.iterations as usize,
            primal_residual: sol.r_prim,
            dual_residual: sol.r_dual,
        })
    }
}
