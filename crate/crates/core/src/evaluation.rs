//! Error metrics, model-variant switching, K-fold cross-validation over the
//! regularization weights and the paired experiment grid.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{sample_omega, synth_graph_tensor, SamplingSpec, SyntheticSpec};
use crate::error::{Error, Result};
use crate::graph::GraphLaplacian;
use crate::solvers::{admm, altmin_cg, AdmmConfig, CgConfig, SolverReport, StoppingRule};
use crate::subproblem::Regularization;
use crate::tensor::{residual_on_omega, CpFactors, SparseObservations};

/// ||P_Omega'([[U]] - T*)||_F / ||P_Omega'(T*)||_F.
pub fn relative_error(factors: &CpFactors, truth: &SparseObservations) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::invalid("relative error over an empty index set"));
    }
    let norm = truth.norm();
    if norm == 0.0 {
        return Err(Error::invalid("relative error against zero-norm truth"));
    }
    Ok(residual_on_omega(factors, truth)?.norm() / norm)
}

/// ||P_Omega'([[U]] - T*)||_F / sqrt(|Omega'|).
pub fn rmse(factors: &CpFactors, truth: &SparseObservations) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::invalid("RMSE over an empty index set"));
    }
    Ok(residual_on_omega(factors, truth)?.norm() / (truth.nnz() as f64).sqrt())
}

/// Arithmetic mean over an N_test x N_init error matrix.
pub fn aggregate_err(results: &[Vec<f64>]) -> Result<f64> {
    let count: usize = results.iter().map(|r| r.len()).sum();
    if count == 0 {
        return Err(Error::invalid("aggregate over an empty error matrix"));
    }
    Ok(results.iter().flatten().sum::<f64>() / count as f64)
}

/// The three model configurations compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    /// lambda_i > 0 and lambda_L > 0 (graph-regularized).
    GReg,
    /// lambda_i > 0, lambda_L = 0 (norm regularizers only).
    NuclReg,
    /// No regularization at all.
    Unreg,
}

impl ModelVariant {
    pub fn tag(&self) -> &'static str {
        match self {
            ModelVariant::GReg => "greg",
            ModelVariant::NuclReg => "nuclreg",
            ModelVariant::Unreg => "unreg",
        }
    }

    /// Builds the regularization for this variant, enforcing its lambda
    /// constraints. The same lambda is applied to every mode.
    pub fn regularization(
        &self,
        lambda: f64,
        lambda_l: f64,
        laplacians: Vec<Option<GraphLaplacian>>,
    ) -> Result<Regularization> {
        let order = laplacians.len();
        match self {
            ModelVariant::GReg => {
                if !(lambda > 0.0) || !(lambda_l > 0.0) {
                    return Err(Error::invalid(
                        "GReg requires lambda > 0 and lambda_L > 0",
                    ));
                }
                if laplacians.iter().all(|l| l.is_none()) {
                    return Err(Error::invalid("GReg requires at least one graph"));
                }
                Regularization::new(vec![lambda; order], lambda_l, laplacians)
            }
            ModelVariant::NuclReg => {
                if !(lambda > 0.0) {
                    return Err(Error::invalid("NuclReg requires lambda > 0"));
                }
                Regularization::new(vec![lambda; order], 0.0, laplacians)
            }
            ModelVariant::Unreg => Regularization::new(
                vec![0.0; order],
                0.0,
                (0..order).map(|_| None).collect(),
            ),
        }
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "greg" | "greg-tc" => Ok(ModelVariant::GReg),
            "nuclreg" | "nuclreg-tc" => Ok(ModelVariant::NuclReg),
            "unreg" | "unreg-tc" => Ok(ModelVariant::Unreg),
            other => Err(Error::invalid(format!("unknown model variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    AltminCg,
    Admm,
}

impl SolverChoice {
    pub fn tag(&self) -> &'static str {
        match self {
            SolverChoice::AltminCg => "altmin-cg",
            SolverChoice::Admm => "admm",
        }
    }
}

impl std::str::FromStr for SolverChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "altmin-cg" | "altmin_cg" | "altmincg" => Ok(SolverChoice::AltminCg),
            "admm" => Ok(SolverChoice::Admm),
            other => Err(Error::invalid(format!("unknown solver '{other}'"))),
        }
    }
}

/// Solver parameters shared by the evaluation drivers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub stop: StoppingRule,
    pub cg: CgConfig,
    pub admm: AdmmConfig,
}

pub fn run_solver(
    choice: SolverChoice,
    train: &SparseObservations,
    test: Option<&SparseObservations>,
    init: &CpFactors,
    reg: &Regularization,
    settings: &SolverSettings,
) -> Result<(CpFactors, SolverReport)> {
    match choice {
        SolverChoice::AltminCg => {
            altmin_cg(train, test, init, reg, &settings.stop, &settings.cg)
        }
        SolverChoice::Admm => admm(train, test, init, reg, &settings.stop, &settings.admm),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    /// Number of random (lambda, lambda_L) draws.
    pub n_samples: usize,
    /// Bounds of the log-uniform draw.
    pub log_range: (f64, f64),
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 3,
            n_samples: 20,
            log_range: (1e-4, 1e1),
            seed: 0,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::invalid("cross-validation needs K >= 2 folds"));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("need at least one parameter candidate"));
        }
        let (lo, hi) = self.log_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::invalid("log range bounds must be positive and ordered"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda: f64,
    pub lambda_l: f64,
    pub mean_rmse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvOutcome {
    pub best_lambda: f64,
    pub best_lambda_l: f64,
    pub table: Vec<CvRow>,
}

/// Splits the observation positions into K folds of near-equal size
/// (shuffled deterministically by the seed).
fn fold_assignment(nnz: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..nnz).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng);
    let mut out = vec![Vec::new(); folds];
    for (at, pos) in order.into_iter().enumerate() {
        out[at % folds].push(pos);
    }
    out
}

fn subset(obs: &SparseObservations, keep: &[bool]) -> Result<SparseObservations> {
    let entries = obs
        .iter()
        .enumerate()
        .filter(|(pos, _)| keep[*pos])
        .map(|(_, (idx, v))| (idx.to_vec(), v))
        .collect();
    SparseObservations::new(obs.shape().clone(), entries)
}

/// K-fold cross-validation over log-uniform (lambda, lambda_L) draws: for
/// each candidate the validation RMSE is averaged over the folds and the
/// minimizer is returned, ties broken toward the larger lambda_L. The folds
/// partition the training entries only.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate(
    train: &SparseObservations,
    laplacians: &[Option<GraphLaplacian>],
    variant: ModelVariant,
    rank: usize,
    cfg: &CvConfig,
    solver: SolverChoice,
    settings: &SolverSettings,
) -> Result<CvOutcome> {
    cfg.validate()?;
    if train.nnz() < cfg.folds {
        return Err(Error::invalid(format!(
            "{} observations cannot fill {} folds",
            train.nnz(),
            cfg.folds
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = cfg.log_range;
    let mut draw = |rng: &mut ChaCha8Rng| -> f64 {
        let t: f64 = rng.random();
        (lo.ln() + t * (hi.ln() - lo.ln())).exp()
    };
    let candidates: Vec<(f64, f64)> = match variant {
        ModelVariant::GReg => (0..cfg.n_samples)
            .map(|_| {
                let l = draw(&mut rng);
                let ll = draw(&mut rng);
                (l, ll)
            })
            .collect(),
        ModelVariant::NuclReg => (0..cfg.n_samples).map(|_| (draw(&mut rng), 0.0)).collect(),
        ModelVariant::Unreg => vec![(0.0, 0.0)],
    };

    let folds = fold_assignment(train.nnz(), cfg.folds, cfg.seed ^ 0x5eed_f01d);
    let shape = train.shape().clone();
    // one init per fold, shared across candidates for a paired comparison
    let inits: Vec<CpFactors> = (0..cfg.folds)
        .map(|f| {
            let mut frng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(101 + f as u64));
            CpFactors::random_gaussian(&shape, rank, &mut frng)
        })
        .collect();

    let mut table = Vec::with_capacity(candidates.len());
    for &(lambda, lambda_l) in &candidates {
        let reg = match variant {
            ModelVariant::Unreg => variant.regularization(0.0, 0.0, laplacians.to_vec())?,
            _ => variant.regularization(lambda, lambda_l, laplacians.to_vec())?,
        };
        let mut total = 0.0;
        for (f, fold) in folds.iter().enumerate() {
            let mut keep = vec![true; train.nnz()];
            for &pos in fold {
                keep[pos] = false;
            }
            let fit_obs = subset(train, &keep)?;
            for flag in keep.iter_mut() {
                *flag = !*flag;
            }
            let val_obs = subset(train, &keep)?;
            let (solution, _) = run_solver(solver, &fit_obs, None, &inits[f], &reg, settings)?;
            total += rmse(&solution, &val_obs)?;
        }
        table.push(CvRow {
            lambda,
            lambda_l,
            mean_rmse: total / cfg.folds as f64,
        });
    }
    let best = table
        .iter()
        .min_by(|a, b| {
            a.mean_rmse
                .partial_cmp(&b.mean_rmse)
                .unwrap()
                .then(b.lambda_l.partial_cmp(&a.lambda_l).unwrap())
        })
        .expect("candidate list is nonempty");
    Ok(CvOutcome {
        best_lambda: best.lambda,
        best_lambda_l: best.lambda_l,
        table,
    })
}

/// One arm of the experiment grid: a model variant with its weights.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VariantArm {
    pub variant: ModelVariant,
    pub lambda: f64,
    pub lambda_l: f64,
}

/// Full experiment description: a synthetic ground truth, N_test observation
/// draws, N_init initial points per draw, and the variant/solver grid run on
/// identical (Omega, init) pairs.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub synthetic: SyntheticSpec,
    pub sampling: SamplingSpec,
    pub n_test: usize,
    pub n_init: usize,
    /// Rank of the fitted model (may differ from the generator's rank).
    pub model_rank: usize,
    pub arms: Vec<VariantArm>,
    pub solvers: Vec<SolverChoice>,
    pub settings: SolverSettings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: ModelVariant,
    pub solver: SolverChoice,
    pub trial: usize,
    pub init: usize,
    pub train_re: f64,
    pub train_rmse: f64,
    pub test_re: f64,
    pub test_rmse: f64,
    #[serde(skip)]
    pub report: Option<SolverReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub variant: ModelVariant,
    pub solver: SolverChoice,
    pub aggregate_test_re: f64,
    pub aggregate_test_rmse: f64,
    pub aggregate_train_re: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub cells: Vec<CellSummary>,
    pub runs: Vec<RunRecord>,
}

impl ExperimentReport {
    pub fn cell(&self, variant: ModelVariant, solver: SolverChoice) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.variant == variant && c.solver == solver)
    }

    /// Comparison table: one row per solver, one column per variant.
    pub fn table_csv(&self) -> String {
        let mut variants: Vec<ModelVariant> = Vec::new();
        for c in &self.cells {
            if !variants.contains(&c.variant) {
                variants.push(c.variant);
            }
        }
        let mut out = String::from("solver");
        for v in &variants {
            out.push(',');
            out.push_str(v.tag());
        }
        out.push('\n');
        let mut solvers: Vec<SolverChoice> = Vec::new();
        for c in &self.cells {
            if !solvers.contains(&c.solver) {
                solvers.push(c.solver);
            }
        }
        for s in solvers {
            out.push_str(s.tag());
            for v in &variants {
                out.push(',');
                if let Some(cell) = self.cell(*v, s) {
                    out.push_str(&cell.aggregate_test_re.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Runs the N_test x N_init grid for every (variant, solver) pair on paired
/// data: trial l always uses the same Omega split and init j across arms.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    if spec.n_test == 0 || spec.n_init == 0 {
        return Err(Error::invalid("experiment grid must be nonempty"));
    }
    if spec.arms.is_empty() || spec.solvers.is_empty() {
        return Err(Error::invalid("need at least one variant and one solver"));
    }
    let truth = synth_graph_tensor(&spec.synthetic)?;
    let shape = truth.shape().clone();
    let base_lap = GraphLaplacian::from_adjacency(&spec.synthetic.graph);
    let order = shape.order();

    struct Trial {
        train: SparseObservations,
        test: SparseObservations,
        inits: Vec<CpFactors>,
    }
    let mut trials = Vec::with_capacity(spec.n_test);
    for l in 0..spec.n_test {
        let sampling = SamplingSpec {
            seed: spec.sampling.seed.wrapping_add(1 + l as u64),
            ..spec.sampling
        };
        let (train_idx, test_idx) = sample_omega(&shape, &sampling)?;
        if test_idx.is_empty() {
            return Err(Error::invalid("experiment needs a nonempty test split"));
        }
        let inits = (0..spec.n_init)
            .map(|j| {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    spec.sampling
                        .seed
                        .wrapping_add(7919 * (1 + l as u64))
                        .wrapping_add(104729 * (1 + j as u64)),
                );
                CpFactors::random_gaussian(&shape, spec.model_rank, &mut rng)
            })
            .collect();
        trials.push(Trial {
            train: truth.observe(&train_idx)?,
            test: truth.observe(&test_idx)?,
            inits,
        });
    }

    let mut runs = Vec::new();
    let mut cells = Vec::new();
    for arm in &spec.arms {
        let laplacians: Vec<Option<GraphLaplacian>> = (0..order)
            .map(|i| (i == 0).then(|| base_lap.clone()))
            .collect();
        let reg = arm.variant.regularization(arm.lambda, arm.lambda_l, laplacians)?;
        for &solver in &spec.solvers {
            let mut test_re = vec![Vec::with_capacity(spec.n_init); spec.n_test];
            let mut test_rmse = vec![Vec::with_capacity(spec.n_init); spec.n_test];
            let mut train_re_all = vec![Vec::with_capacity(spec.n_init); spec.n_test];
            for (l, trial) in trials.iter().enumerate() {
                for (j, init) in trial.inits.iter().enumerate() {
                    let (solution, report) = run_solver(
                        solver,
                        &trial.train,
                        Some(&trial.test),
                        init,
                        &reg,
                        &spec.settings,
                    )?;
                    let run = RunRecord {
                        variant: arm.variant,
                        solver,
                        trial: l,
                        init: j,
                        train_re: relative_error(&solution, &trial.train)?,
                        train_rmse: rmse(&solution, &trial.train)?,
                        test_re: relative_error(&solution, &trial.test)?,
                        test_rmse: rmse(&solution, &trial.test)?,
                        report: Some(report),
                    };
                    test_re[l].push(run.test_re);
                    test_rmse[l].push(run.test_rmse);
                    train_re_all[l].push(run.train_re);
                    runs.push(run);
                }
            }
            cells.push(CellSummary {
                variant: arm.variant,
                solver,
                aggregate_test_re: aggregate_err(&test_re)?,
                aggregate_test_rmse: aggregate_err(&test_rmse)?,
                aggregate_train_re: aggregate_err(&train_re_all)?,
            });
        }
    }
    Ok(ExperimentReport { cells, runs })
}

/// Convenience for tests and the CLI: factors with entries drawn N(0, 1).
pub fn gaussian_init(shape: &crate::tensor::Shape, rank: usize, seed: u64) -> CpFactors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CpFactors::random_gaussian(shape, rank, &mut rng)
}

/// Dense zero-filled matrix of the observations' mode-i unfolding, the
/// feature matrix used for graph construction from partially observed data.
pub fn zero_filled_unfolding(obs: &SparseObservations, mode: usize) -> Result<DMatrix<f64>> {
    let map = crate::tensor::ModeIndexMap::new(obs.shape(), mode)?;
    let mut m = DMatrix::zeros(map.n_rows(), map.n_cols());
    for (idx, v) in obs.iter() {
        let (r, c) = map.to_pair(idx)?;
        m[(r, c)] = v;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    #[test]
    fn metrics_basics() {
        let shape = Shape::new(vec![2, 2]).unwrap();
        let mut rng = crate::testutil::rng(71);
        let f = CpFactors::random_gaussian(&shape, 1, &mut rng);
        let entries = vec![
            (vec![0, 0], f.value_at(&[0, 0])),
            (vec![1, 1], f.value_at(&[1, 1])),
        ];
        let obs = SparseObservations::new(shape.clone(), entries).unwrap();
        assert!(relative_error(&f, &obs).unwrap() < 1e-14);
        assert!(rmse(&f, &obs).unwrap() < 1e-14);

        let zero = CpFactors::zeros(&shape, 1);
        assert!((relative_error(&zero, &obs).unwrap() - 1.0).abs() < 1e-14);

        // single entry with error e -> RMSE |e|
        let one = SparseObservations::new(shape, vec![(vec![0, 1], f.value_at(&[0, 1]) + 0.25)])
            .unwrap();
        assert!((rmse(&f, &one).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn metrics_reject_degenerate_truth() {
        let shape = Shape::new(vec![2, 2]).unwrap();
        let f = CpFactors::zeros(&shape, 1);
        let empty = SparseObservations::new(shape.clone(), vec![]).unwrap();
        assert!(relative_error(&f, &empty).is_err());
        assert!(rmse(&f, &empty).is_err());
        let zeros = SparseObservations::new(shape, vec![(vec![0, 0], 0.0)]).unwrap();
        assert!(relative_error(&f, &zeros).is_err());
    }

    #[test]
    fn aggregate_is_flat_mean() {
        assert!((aggregate_err(&[vec![0.2, 0.4]]).unwrap() - 0.3).abs() < 1e-15);
        assert!((aggregate_err(&[vec![0.7; 10]; 5]).unwrap() - 0.7).abs() < 1e-15);
        let mut rng = crate::testutil::rng(72);
        let m: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..10).map(|_| rng.random::<f64>()).collect())
            .collect();
        let flat: f64 = m.iter().flatten().sum::<f64>() / 50.0;
        assert!((aggregate_err(&m).unwrap() - flat).abs() < 1e-15);
        assert!(aggregate_err(&[]).is_err());
    }

    #[test]
    fn variant_constraints_enforced() {
        let laps = vec![None, None];
        assert!(ModelVariant::GReg.regularization(0.1, 0.0, laps.clone()).is_err());
        assert!(ModelVariant::GReg.regularization(0.1, 1.0, laps.clone()).is_err());
        assert!(ModelVariant::NuclReg.regularization(0.0, 0.0, laps.clone()).is_err());
        let unreg = ModelVariant::Unreg.regularization(9.0, 9.0, laps).unwrap();
        assert!(unreg.lambdas().iter().all(|&l| l == 0.0));
        assert_eq!(unreg.lambda_l(), 0.0);
    }

    #[test]
    fn fold_sizes_differ_by_at_most_one() {
        let folds = fold_assignment(10, 3, 1);
        let sizes: Vec<usize> = folds.iter().map(|f| f.len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 10);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}
