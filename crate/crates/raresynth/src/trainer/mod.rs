//! The training procedure: a semi-supervised conditional GAN over packet
//! spaces, with staged labeling under a strict budget, a rare-fraction
//! estimate feeding class-weighted losses, and the classifier doubling as a
//! surrogate labeler for unlabeled and generated samples.

mod loss;
mod networks;
mod propositions;
mod select;
mod train;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use loss::{
    alpha_variance, classification_loss, compute_weight, estimate_alpha, gan_loss,
    ClassificationLoss, GanLoss, LossConfig, LossFamily, Lipschitz, Weighting, LOG_CLAMP,
};
pub use networks::{CriticOutput, GanModels, GenOutput, ModelShape, CONDITION_WIDTH};
pub use propositions::{
    default_candidate_family, rare_recovery_check, verify_propositions,
    weighted_loss_equivalence, CandidatePair, EquivalenceCheck, FiniteSupportInstance,
    PropositionsReport, RecoveryCheck,
};
pub use select::{select_for_labeling, SelectionPolicy};
pub use train::{sample_rare, train};

use crate::error::io_err;
use crate::nn::{load_net, save_net, AdamConfig};
use crate::oracle::Label;
use crate::schema::{Packet, PacketSchema};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainerConfig {
    /// Active-learning stages; the budget is split as evenly as possible and
    /// the final stage absorbs any remainder.
    pub stages: usize,
    /// Total labeling budget for the run.
    pub budget: usize,
    /// Training iterations per stage.
    pub iterations: usize,
    pub batch_size: usize,
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub loss: LossConfig,
    /// Selection policy for stages after the first; the first stage always
    /// labels randomly because the classifier is untrained.
    pub policy: SelectionPolicy,
    /// Candidate-pool size per stage. Spaces that fit entirely within this
    /// bound are enumerated instead of sampled.
    pub pool_size: usize,
    pub seed: u64,
    /// Use fresh unlabeled draws for the GAN loss (the labeled pool is used
    /// when off, which reintroduces selection bias).
    pub use_unlabeled: bool,
    /// Baseline mode: an unconditional GAN trained only on the rare subset
    /// of the labeled pool. Disables the classifier, conditioning, and
    /// weighting.
    pub gan_only: bool,
    /// Re-estimate the rare fraction from all labeled samples instead of
    /// only the first (uniformly sampled) stage. Off by default: later
    /// stages label non-uniformly, which biases the estimate.
    pub alpha_from_all_stages: bool,
    /// Gumbel-softmax temperature for generator sampling; `None` feeds
    /// plain per-field softmax probabilities to the critic.
    pub gumbel_temperature: Option<f64>,
    pub adam: AdamConfig,
}

impl TrainerConfig {
    pub fn new(budget: usize) -> Self {
        TrainerConfig {
            stages: 2,
            budget,
            iterations: 2000,
            batch_size: 64,
            latent_dim: 32,
            hidden_dim: 64,
            loss: LossConfig::wasserstein(3.0),
            policy: SelectionPolicy::LeastConfident,
            pool_size: 100_000,
            seed: 0,
            use_unlabeled: true,
            gan_only: false,
            alpha_from_all_stages: false,
            gumbel_temperature: None,
            adam: AdamConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 {
            return Err(Error::InvalidConfig("stages must be positive".into()));
        }
        if self.budget < self.stages {
            return Err(Error::InvalidConfig(format!(
                "budget {} cannot cover {} stages",
                self.budget, self.stages
            )));
        }
        if self.batch_size == 0 || self.latent_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidConfig(
                "batch, latent, and hidden sizes must be positive".into(),
            ));
        }
        if self.pool_size < self.budget / self.stages {
            return Err(Error::InvalidConfig(format!(
                "pool size {} is below the per-stage quota {}",
                self.pool_size,
                self.budget / self.stages
            )));
        }
        if let Some(tau) = self.gumbel_temperature {
            if !(tau > 0.0) {
                return Err(Error::InvalidConfig("gumbel temperature must be positive".into()));
            }
        }
        self.loss.validate()
    }

    /// Labels bought in the given stage: `budget / stages`, with the final
    /// stage absorbing the remainder.
    pub fn stage_quota(&self, stage: usize) -> usize {
        let base = self.budget / self.stages;
        if stage + 1 == self.stages {
            self.budget - base * (self.stages - 1)
        } else {
            base
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub packet: Packet,
    pub label: Label,
    pub score: f64,
}

/// Everything a finished (or in-progress) run carries.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub models: GanModels,
    pub labeled: Vec<LabeledSample>,
    pub alpha_hat: f64,
    pub stage: usize,
    pub schema: PacketSchema,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageMetrics {
    pub stage: usize,
    pub new_labels: usize,
    pub total_spent: usize,
    pub alpha_hat: f64,
    pub effective_weight: f64,
    pub mean_gan_loss: f64,
    pub mean_classification_loss: f64,
    pub mean_generator_loss: f64,
    /// Fraction of rare-conditioned samples that score above the threshold,
    /// measured with the unmetered diagnostic scorer when one is provided.
    pub rare_hit_rate: Option<f64>,
}

/// Appends stage metrics as CSV with a header row.
pub fn write_stage_metrics(path: &Path, metrics: &[StageMetrics]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display())))?;
    writer
        .write_record([
            "stage",
            "new_labels",
            "total_spent",
            "alpha_hat",
            "effective_weight",
            "mean_gan_loss",
            "mean_classification_loss",
            "mean_generator_loss",
            "rare_hit_rate",
        ])
        .and_then(|_| {
            for m in metrics {
                writer.write_record([
                    m.stage.to_string(),
                    m.new_labels.to_string(),
                    m.total_spent.to_string(),
                    m.alpha_hat.to_string(),
                    m.effective_weight.to_string(),
                    m.mean_gan_loss.to_string(),
                    m.mean_classification_loss.to_string(),
                    m.mean_generator_loss.to_string(),
                    m.rare_hit_rate.map(|r| r.to_string()).unwrap_or_default(),
                ])?;
            }
            writer.flush()?;
            Ok(())
        })
        .map_err(|e| Error::InvalidConfig(format!("csv write failed: {e}")))
}

/// Checkpoint metadata stored next to the network files.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointMeta {
    version: u32,
    latent_dim: usize,
    hidden_dim: usize,
    family: LossFamily,
    gumbel_temperature: Option<f64>,
    alpha_hat: f64,
    stage: usize,
}

const CHECKPOINT_VERSION: u32 = 1;

impl TrainState {
    /// Writes the schema, the three nets, and a metadata file into `dir`.
    /// The labeled pool is not persisted; checkpoints serve generation and
    /// evaluation.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir.display().to_string(), e))?;
        self.schema.save(&dir.join("schema.toml"))?;
        save_net(&dir.join("generator.net"), &self.models.generator)?;
        save_net(&dir.join("trunk.net"), &self.models.trunk)?;
        save_net(&dir.join("d_head.net"), &self.models.d_head)?;
        save_net(&dir.join("c_head.net"), &self.models.c_head)?;
        let meta = CheckpointMeta {
            version: CHECKPOINT_VERSION,
            latent_dim: self.models.shape.latent_dim,
            hidden_dim: self.models.shape.hidden_dim,
            family: self.models.shape.family,
            gumbel_temperature: self.models.shape.gumbel_temperature,
            alpha_hat: self.alpha_hat,
            stage: self.stage,
        };
        let text = toml::to_string(&meta)
            .map_err(|e| Error::InvalidConfig(format!("meta serialize: {e}")))?;
        fs::write(dir.join("checkpoint.toml"), text)
            .map_err(|e| io_err(dir.display().to_string(), e))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("checkpoint.toml");
        if !meta_path.exists() {
            return Err(Error::FileNotFound(meta_path.display().to_string()));
        }
        let text =
            fs::read_to_string(&meta_path).map_err(|e| io_err(meta_path.display().to_string(), e))?;
        let meta: CheckpointMeta = toml::from_str(&text).map_err(|e| Error::CheckpointFormat {
            path: meta_path.display().to_string(),
            what: e.to_string(),
        })?;
        if meta.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointFormat {
                path: meta_path.display().to_string(),
                what: format!("unsupported version {}", meta.version),
            });
        }
        let schema = PacketSchema::load(&dir.join("schema.toml"))?;
        let generator = load_net(&dir.join("generator.net"))?;
        let trunk = load_net(&dir.join("trunk.net"))?;
        let d_head = load_net(&dir.join("d_head.net"))?;
        let c_head = load_net(&dir.join("c_head.net"))?;
        let shape = ModelShape {
            latent_dim: meta.latent_dim,
            hidden_dim: meta.hidden_dim,
            family: meta.family,
            gumbel_temperature: meta.gumbel_temperature,
        };
        let expected_in = meta.latent_dim + CONDITION_WIDTH;
        if generator.input_dim() != expected_in
            || generator.output_dim() != schema.encoded_width()
            || trunk.input_dim() != schema.encoded_width()
        {
            return Err(Error::CheckpointFormat {
                path: dir.display().to_string(),
                what: "network dimensions do not match the stored schema".into(),
            });
        }
        let models = GanModels::from_parts(generator, trunk, d_head, c_head, shape, &schema)?;
        Ok(TrainState {
            models,
            labeled: Vec::new(),
            alpha_hat: meta.alpha_hat,
            stage: meta.stage,
            schema,
        })
    }
}
