use std::collections::HashMap;
use std::path::Path;

use fbsde_core::analysis::{ExactReference, HjbMcReference, SolutionReference};
use fbsde_core::model::{FeatureLinear, ModelFamily};
use fbsde_core::pde::{
    scaled_exact_model, BsbProblem, BzProblem, HjbProblem, HjbReferenceCache, Lqr1dProblem,
    McEstimate,
};
use fbsde_core::problem::PdeProblem;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::report::write_atomic;

/// Instantiate the configured benchmark problem with its overrides.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<Box<dyn PdeProblem>> {
    let p = &cfg.problem;
    let horizon = p.horizon.unwrap_or(1.0);
    let problem: Box<dyn PdeProblem> = match p.name.as_str() {
        "hjb" => {
            let mut prob = HjbProblem::with_params(p.dim, p.sigma.unwrap_or(2.0f64.sqrt()), horizon);
            if let Some(x0) = &p.x0 {
                prob = prob.with_x0(x0.clone());
            }
            Box::new(prob)
        }
        "bsb" => {
            let mut prob = BsbProblem::with_params(
                p.dim,
                p.sigma.unwrap_or(0.4),
                p.rate.unwrap_or(0.05),
                horizon,
            );
            if let Some(x0) = &p.x0 {
                prob = prob.with_x0(x0.clone());
            }
            Box::new(prob)
        }
        "bz" => {
            let mut prob = BzProblem::with_params(
                p.dim,
                p.rate.unwrap_or(0.1),
                p.sigma.unwrap_or(0.3),
                p.dcoef.unwrap_or(0.1),
                horizon,
            );
            if let Some(x0) = &p.x0 {
                prob = prob.with_x0(x0.clone());
            }
            Box::new(prob)
        }
        "lqr1d" => {
            if p.dim != 1 {
                return Err(CliError::Config("lqr1d is one-dimensional".into()));
            }
            let mut prob =
                Lqr1dProblem::with_params(p.sigma.unwrap_or(2.0f64.sqrt()), 1.0, 1.0, 1.0, horizon);
            if let Some(x0) = &p.x0 {
                prob = prob.with_x0(x0[0]);
            }
            Box::new(prob)
        }
        other => return Err(CliError::Config(format!("unknown problem '{other}'"))),
    };
    Ok(problem)
}

/// Instantiate the configured model family.
pub fn build_model(cfg: &ExperimentConfig, problem: &dyn PdeProblem) -> Result<Box<dyn ModelFamily>> {
    match cfg.model.family.as_str() {
        "feature_linear" => Ok(Box::new(FeatureLinear::new(problem.dim(), problem.horizon()))),
        "scaled_exact" => Ok(Box::new(
            scaled_exact_model(&cfg.problem.name, problem.dim())
                .map_err(|e| CliError::Config(e.to_string()))?,
        )),
        other => Err(CliError::Config(format!("unknown model family '{other}'"))),
    }
}

const CACHE_FILE: &str = "hjb_reference_cache.json";

/// Load the persisted HJB reference cache from the output directory.
pub fn load_hjb_cache(out_dir: &Path) -> HjbReferenceCache {
    let path = out_dir.join(CACHE_FILE);
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(entries) = serde_json::from_str::<HashMap<String, McEstimate>>(&text) {
            return HjbReferenceCache::from_entries(entries);
        }
    }
    HjbReferenceCache::new()
}

/// Persist the HJB reference cache beside the results. Keys are sorted by
/// the BTreeMap so reruns emit identical bytes.
pub fn save_hjb_cache(out_dir: &Path, cache: &HjbReferenceCache) -> Result<()> {
    let snapshot = cache.snapshot();
    let ordered: std::collections::BTreeMap<String, McEstimate> = snapshot.into_iter().collect();
    let text = serde_json::to_string_pretty(&ordered).expect("serializable");
    write_atomic(&out_dir.join(CACHE_FILE), &text)
}

/// Reference dispatch: closed forms where available, the cached MC formula
/// for HJB.
pub enum Reference<'a> {
    Exact(ExactReference<'a>),
    HjbMc(HjbMcReference<'a>),
}

impl Reference<'_> {
    pub fn as_dyn(&self) -> &dyn SolutionReference {
        match self {
            Reference::Exact(r) => r,
            Reference::HjbMc(r) => r,
        }
    }
}

pub fn build_reference<'a>(
    cfg: &ExperimentConfig,
    problem: &'a dyn PdeProblem,
    hjb: Option<(&'a HjbProblem, &'a HjbReferenceCache)>,
) -> Result<Reference<'a>> {
    if problem.has_exact() {
        Ok(Reference::Exact(ExactReference(problem)))
    } else {
        let (hjb_problem, cache) = hjb.ok_or_else(|| {
            CliError::Config("hjb reference requested without MC cache".into())
        })?;
        Ok(Reference::HjbMc(HjbMcReference {
            problem: hjb_problem,
            cache,
            n_mc: cfg.eval.hjb_mc_samples,
            seed: cfg.eval.hjb_mc_seed,
        }))
    }
}

/// Configure the global rayon pool from --threads (0 = auto). Safe to call
/// more than once; later calls are no-ops.
pub fn init_threads(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}
