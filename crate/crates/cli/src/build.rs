//! Turns a validated configuration into core objects.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use adiabat::evolution::{EvolutionConfig, Target};
use adiabat::models::{neel_index, HamiltonianPath, DEFAULT_MEMORY_CAP};
use adiabat::schedules::{
    beta_schedule, gap_informed_schedule, linear_schedule, smoothed_beta_schedule, sqrt_schedule,
    truncated_cosine, Schedule, DEFAULT_GAP_FIT_DEGREE, DEFAULT_SMOOTHING_WIDTH,
};
use adiabat::spectral::{gap_profile, GapProfile};
use adiabat::specfun::Interval01;
use adiabat::QuantumState;

use crate::config::{ExperimentConfig, ReferenceChoice, ScheduleBlock, ScheduleChoice, TargetChoice};
use crate::error::CliError;

pub fn model_path(cfg: &ExperimentConfig) -> Result<Arc<dyn HamiltonianPath>, CliError> {
    cfg.model
        .build(DEFAULT_MEMORY_CAP)
        .map_err(|e| CliError::Config(format!("model: {e}")))
}

pub fn target(cfg: &ExperimentConfig, path: &dyn HamiltonianPath) -> Target {
    match cfg.run.target {
        TargetChoice::Ground => Target::SolvedGround,
        TargetChoice::Neel => Target::State(QuantumState::basis(
            path.dim(),
            neel_index(path.num_sites()),
        )),
    }
}

pub fn evolution_template(cfg: &ExperimentConfig, total_time: f64) -> EvolutionConfig {
    let mut e = EvolutionConfig::new(total_time)
        .with_samples(cfg.run.samples)
        .with_tolerance(cfg.run.tolerance);
    if let Some(m) = cfg.run.max_steps {
        e.max_steps = m;
    }
    e
}

/// Builds schedules, computing the model's gap profile at most once.
pub struct ScheduleFactory<'a> {
    cfg: &'a ExperimentConfig,
    path: &'a dyn HamiltonianPath,
    computed: Option<GapProfile>,
    loaded: HashMap<PathBuf, GapProfile>,
}

impl<'a> ScheduleFactory<'a> {
    pub fn new(cfg: &'a ExperimentConfig, path: &'a dyn HamiltonianPath) -> Self {
        ScheduleFactory {
            cfg,
            path,
            computed: None,
            loaded: HashMap::new(),
        }
    }

    fn gap(&mut self, block: &ScheduleBlock) -> Result<GapProfile, CliError> {
        if let Some(p) = &block.gap_table_path {
            if let Some(g) = self.loaded.get(p) {
                return Ok(g.clone());
            }
            let file = std::fs::File::open(p)
                .map_err(|e| CliError::Config(format!("gap_table_path {}: {e}", p.display())))?;
            let g = GapProfile::read_csv(file)
                .map_err(|e| CliError::Config(format!("gap_table_path {}: {e}", p.display())))?;
            self.loaded.insert(p.clone(), g.clone());
            return Ok(g);
        }
        if self.computed.is_none() {
            log::info!("computing gap profile on {} points", self.cfg.run.gap_points);
            let g = gap_profile(self.path, self.cfg.run.gap_points)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            self.computed = Some(g);
        }
        Ok(self.computed.clone().expect("just computed"))
    }

    fn gap_informed(&mut self, block: &ScheduleBlock) -> Result<Schedule, CliError> {
        let gap = self.gap(block)?;
        let weight = |x: f64| truncated_cosine(Interval01::saturating(x));
        gap_informed_schedule(
            gap.as_table(),
            &weight,
            block.degree.unwrap_or(DEFAULT_GAP_FIT_DEGREE),
        )
        .map_err(|e| CliError::Numerical(e.to_string()))
    }

    pub fn build(&mut self, block: &ScheduleBlock) -> Result<Schedule, CliError> {
        let d = block.d.unwrap_or(DEFAULT_SMOOTHING_WIDTH);
        let reference = |f: &mut Self| match block.reference.unwrap_or_default() {
            ReferenceChoice::Linear => Ok(linear_schedule()),
            ReferenceChoice::GapInformed => f.gap_informed(block),
        };
        let invalid = |e: adiabat::schedules::ScheduleError| CliError::Config(format!("schedule: {e}"));
        Ok(match block.kind {
            ScheduleChoice::Linear => linear_schedule(),
            ScheduleChoice::Beta => beta_schedule(block.n.unwrap_or(0)),
            ScheduleChoice::SmoothedBeta => {
                smoothed_beta_schedule(block.n.unwrap_or(0), reference(self)?, d).map_err(invalid)?
            }
            ScheduleChoice::Sqrt => sqrt_schedule(reference(self)?, d).map_err(invalid)?,
            ScheduleChoice::GapInformed => self.gap_informed(block)?,
        })
    }

    pub fn build_all(&mut self) -> Result<Vec<Schedule>, CliError> {
        self.cfg.schedule.iter().map(|b| self.build(b)).collect()
    }
}
