use std::sync::Arc;

use rlvr_forge::gateway::{ModelBackend, RemoteBackend, RemoteConfig, Role, SimulatedWorld};
use rlvr_forge::synth::Backends;
use rlvr_forge::{Origin, Sample};

use crate::config::{FileConfig, ProfileConfig, MOCK_PROFILE};
use crate::error::{CliError, CliResult};

/// Backends named by `--backend-profile`. Remote clients are built on first
/// use so that commands only need credentials for the roles they call.
pub enum Profile {
    Mock(Arc<SimulatedWorld>),
    Remote { name: String, cfg: Box<ProfileConfig> },
}

/// Builds the offline world from sample metadata. Synthesized samples
/// without `mock_p_solve` use their recorded verifier pass rate.
fn mock_world(cfg: &FileConfig, samples: &[&Sample]) -> SimulatedWorld {
    let mut world = SimulatedWorld::default();
    world.variant = cfg.mock.variant;
    world.quality = cfg.mock.quality;
    world.marker_drop_rate = cfg.mock.marker_drop_rate;
    world.tie_rate = cfg.mock.tie_rate;
    let n = f64::from(cfg.pipeline.n_rollouts);
    for s in samples {
        let meta = |k: &str| s.meta.get(k).and_then(|v| v.as_f64());
        let p = meta("mock_p_solve")
            .or_else(|| (s.origin == Origin::Synthesized).then(|| meta("c_cand").map(|c| c / n)).flatten())
            .unwrap_or(cfg.mock.default_p_solve);
        world.add_question(s.question.clone(), s.answer.clone(), p, meta("mock_theta").unwrap_or(0.0));
    }
    world
}

impl Profile {
    pub fn new(cfg: &FileConfig, samples: &[&Sample]) -> CliResult<Self> {
        if cfg.backend_profile == MOCK_PROFILE {
            return Ok(Self::Mock(Arc::new(mock_world(cfg, samples))));
        }
        let profile = cfg
            .backends
            .get(&cfg.backend_profile)
            .ok_or_else(|| CliError::invalid(format!("unknown backend profile `{}`", cfg.backend_profile)))?;
        Ok(Self::Remote { name: cfg.backend_profile.clone(), cfg: Box::new(profile.clone()) })
    }

    fn remote(name: &str, role: &str, roles: Vec<Role>, cfg: &RemoteConfig) -> CliResult<Arc<dyn ModelBackend>> {
        Ok(Arc::new(RemoteBackend::new(format!("{name}/{role}"), roles, cfg.clone())?))
    }

    fn missing(name: &str, role: &str) -> CliError {
        CliError::invalid(format!("backend profile `{name}` has no `{role}` endpoint"))
    }

    /// Policy being trained; also the verifier unless one is configured.
    pub fn target(&self) -> CliResult<Arc<dyn ModelBackend>> {
        match self {
            Self::Mock(world) => Ok(Arc::new(world.solver("mock-target"))),
            Self::Remote { name, cfg } => {
                let roles = if cfg.verifier.is_some() { vec![Role::Target] } else { vec![Role::Target, Role::Verifier] };
                Self::remote(name, "target", roles, &cfg.target)
            }
        }
    }

    pub fn synth_backends(&self, quality_gate: bool) -> CliResult<Backends> {
        match self {
            Self::Mock(world) => {
                let mut b = Backends::new(Arc::new(world.solver("mock-target")), Arc::new(world.synthesizer("mock-synthesizer")));
                if quality_gate {
                    b = b.with_judge(Arc::new(world.quality_judge("mock-judge")));
                }
                Ok(b)
            }
            Self::Remote { name, cfg } => {
                let synth = cfg.synthesizer.as_ref().ok_or_else(|| Self::missing(name, "synthesizer"))?;
                let mut b = Backends::new(self.target()?, Self::remote(name, "synthesizer", vec![Role::Synthesizer], synth)?);
                if let Some(v) = &cfg.verifier {
                    b = b.with_verifier(Self::remote(name, "verifier", vec![Role::Verifier], v)?);
                }
                if quality_gate {
                    let judge = cfg.judge.as_ref().ok_or_else(|| Self::missing(name, "judge"))?;
                    b = b.with_judge(Self::remote(name, "judge", vec![Role::Judge], judge)?);
                }
                Ok(b)
            }
        }
    }

    pub fn battle_judge(&self) -> CliResult<Arc<dyn ModelBackend>> {
        match self {
            Self::Mock(world) => Ok(Arc::new(world.battle_judge("mock-judge"))),
            Self::Remote { name, cfg } => {
                let judge = cfg.judge.as_ref().ok_or_else(|| Self::missing(name, "judge"))?;
                Self::remote(name, "judge", vec![Role::Judge], judge)
            }
        }
    }
}
