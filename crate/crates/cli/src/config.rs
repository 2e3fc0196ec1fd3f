//! The JSON run configuration and its resolution against command-line flags.

use std::fs;
use std::path::Path;

use fh_tabnet::cascade::{Stage2Rows, StagePlan};
use fh_tabnet::data::{SyntheticSpec, DEFAULT_MISSING_THRESHOLD};
use fh_tabnet::encoder::EncoderConfig;
use fh_tabnet::eval::CvSettings;
use serde::{Deserialize, Serialize};

use crate::exit::{CliError, CliResult};

/// Overrides for one encoder path; unset fields keep the stage default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderOverrides {
    pub n_steps: Option<usize>,
    pub n_a: Option<usize>,
    pub n_d: Option<usize>,
    pub gamma: Option<f64>,
    pub lambda_sparse: Option<f64>,
    pub n_shared_glu: Option<usize>,
    pub n_step_glu: Option<usize>,
    pub virtual_batch_size: Option<usize>,
    pub bn_momentum: Option<f64>,
}

impl EncoderOverrides {
    fn apply(&self, cfg: &mut EncoderConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { cfg.$f = v; })* };
        }
        set!(n_steps, n_a, n_d, gamma, lambda_sparse, n_shared_glu, n_step_glu, virtual_batch_size, bn_momentum);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanOverrides {
    pub stage1: EncoderOverrides,
    pub stage2p: EncoderOverrides,
    pub stage2h: EncoderOverrides,
    pub epochs: Option<usize>,
    pub base_lr: Option<f64>,
    pub lr_step: Option<usize>,
    pub lr_factor: Option<f64>,
    pub batch_size: Option<usize>,
    pub class_weighting: Option<bool>,
    pub patience: Option<usize>,
    pub stage2_rows: Option<Stage2Rows>,
    pub recalibrate_bn: Option<bool>,
}

impl PlanOverrides {
    fn resolve(&self, seed: u64) -> StagePlan {
        let mut plan = StagePlan::new(0).with_seed(seed);
        self.stage1.apply(&mut plan.stage1);
        self.stage2p.apply(&mut plan.stage2p);
        self.stage2h.apply(&mut plan.stage2h);
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { plan.$f = v; })* };
        }
        set!(epochs, base_lr, lr_step, lr_factor, batch_size, class_weighting, stage2_rows, recalibrate_bn);
        if self.patience.is_some() {
            plan.patience = self.patience;
        }
        plan
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<String>,
    pub model: Option<String>,
    pub metrics: Option<String>,
    pub out: Option<String>,
}

/// Contents of `--config`. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub synthetic: Option<SyntheticSpec>,
    pub plan: PlanOverrides,
    pub cv: Option<CvSettings>,
    pub missing_threshold: Option<f64>,
    pub paths: Paths,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Fully resolved settings; embedded in every artifact as provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub seed: u64,
    pub jobs: usize,
    pub synthetic: SyntheticSpec,
    pub plan: StagePlan,
    pub cv: CvSettings,
    pub missing_threshold: f64,
    pub paths: Paths,
}

/// Flags win over the config file, which wins over the defaults. The single
/// resolved seed drives the generator, the plan and the CV folds.
pub fn resolve(config: RunConfig, seed_flag: Option<u64>, jobs_flag: Option<usize>) -> CliResult<Resolved> {
    let seed = seed_flag.or(config.seed).unwrap_or(0);
    let jobs = jobs_flag.or(config.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    let synthetic = SyntheticSpec {
        seed,
        ..config.synthetic.unwrap_or_default()
    };
    let missing_threshold = config.missing_threshold.unwrap_or(DEFAULT_MISSING_THRESHOLD);
    let cv = CvSettings {
        seed,
        missing_threshold,
        ..config.cv.unwrap_or_default()
    };
    Ok(Resolved {
        seed,
        jobs,
        synthetic,
        plan: config.plan.resolve(seed),
        cv,
        missing_threshold,
        paths: config.paths,
    })
}
