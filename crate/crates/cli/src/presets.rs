//! Pinned desk-scale experiment sets.

use adiabat::models::ModelSpec;
use clap::ValueEnum;

use crate::config::{
    ExperimentConfig, OutputBlock, ReferenceChoice, RunBlock, ScheduleBlock, ScheduleChoice,
    TargetChoice,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Ising L=9: smoothed beta n = 0, 1, 2 and the square-root schedule.
    #[value(name = "fig3-desk")]
    Fig3Desk,
    /// Ising L = 7 and 9: beta_1 against its smoothed counterpart.
    #[value(name = "fig4-desk")]
    Fig4Desk,
    /// Rydberg L=7: gap-informed reference, its smoothed beta_1 and
    /// square-root variants.
    #[value(name = "fig5a-desk")]
    Fig5aDesk,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig3Desk => "fig3-desk",
            Preset::Fig4Desk => "fig4-desk",
            Preset::Fig5aDesk => "fig5a-desk",
        }
    }
}

/// Thirteen log-spaced total times from 40 to 10⁴.
fn ising_times() -> Vec<f64> {
    let (lo, hi, n) = (40f64.ln(), 1e4f64.ln(), 13);
    (0..n)
        .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn ising(sites: usize, schedule: Vec<ScheduleBlock>) -> ExperimentConfig {
    ExperimentConfig {
        model: ModelSpec::ising(sites),
        schedule,
        run: RunBlock {
            total_times: Some(ising_times()),
            target: TargetChoice::Neel,
            ..RunBlock::default()
        },
        output: OutputBlock::default(),
    }
}

fn smoothed(n: u32) -> ScheduleBlock {
    ScheduleBlock::of(ScheduleChoice::SmoothedBeta).with_n(n)
}

/// Named parts of a preset; each part runs as one sweep.
pub fn configs(preset: Preset) -> Vec<(String, ExperimentConfig)> {
    match preset {
        Preset::Fig3Desk => vec![(
            String::new(),
            ising(
                9,
                vec![
                    smoothed(0),
                    smoothed(1),
                    smoothed(2),
                    ScheduleBlock::of(ScheduleChoice::Sqrt),
                ],
            ),
        )],
        Preset::Fig4Desk => [7, 9]
            .into_iter()
            .map(|l| {
                (
                    format!("L{l}"),
                    ising(l, vec![ScheduleBlock::of(ScheduleChoice::Beta).with_n(1), smoothed(1)]),
                )
            })
            .collect(),
        Preset::Fig5aDesk => {
            let gap = ReferenceChoice::GapInformed;
            vec![(
                String::new(),
                ExperimentConfig {
                    model: ModelSpec::rydberg(7),
                    schedule: vec![
                        ScheduleBlock::of(ScheduleChoice::GapInformed),
                        smoothed(1).with_reference(gap),
                        ScheduleBlock::of(ScheduleChoice::Sqrt).with_reference(gap),
                    ],
                    run: RunBlock {
                        // µs
                        total_times: Some(vec![
                            0.25, 0.35, 0.5, 0.7, 1.0, 1.4, 2.0, 2.8, 4.0, 5.6, 8.0,
                        ]),
                        ..RunBlock::default()
                    },
                    output: OutputBlock::default(),
                },
            )]
        }
    }
}
