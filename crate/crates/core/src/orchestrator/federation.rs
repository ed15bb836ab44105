use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::datasim::{
    dirichlet_partition, materialize, stratified_split, ClientHandle, Dataset, GaussianMixture,
    Partition,
};
use crate::numkit::{Batch, ClientData, Evaluation, ModelSpec, ParamVector};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    #[default]
    Softmax,
    Mlp {
        hidden: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub classes: usize,
    pub features: usize,
    /// Rows partitioned across the clients.
    pub samples: usize,
    /// Rows of a separate global test set (0 disables it).
    #[serde(default)]
    pub test_samples: usize,
    pub class_sep: f64,
    /// Dirichlet concentration.
    pub alpha: f64,
    /// Number of clients.
    #[serde(rename = "M")]
    pub num_clients: usize,
    #[serde(default)]
    pub model: ModelConfig,
}

impl DataConfig {
    pub fn model_spec(&self) -> ModelSpec {
        match self.model {
            ModelConfig::Softmax => ModelSpec::Softmax {
                classes: self.classes,
                features: self.features,
            },
            ModelConfig::Mlp { hidden } => ModelSpec::Mlp {
                classes: self.classes,
                features: self.features,
                hidden,
            },
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let field = |name: &str| alloc::format!("{prefix}.{name}");
        if self.classes < 2 {
            return Err(Error::config(field("classes"), "must be >= 2"));
        }
        if self.features == 0 {
            return Err(Error::config(field("features"), "must be >= 1"));
        }
        if self.samples < self.classes {
            return Err(Error::config(field("samples"), "must be >= classes"));
        }
        if !(self.class_sep.is_finite() && self.class_sep >= 0.0) {
            return Err(Error::config(field("class_sep"), "must be finite and >= 0"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::config(field("alpha"), "must be finite and > 0"));
        }
        if self.num_clients == 0 || self.num_clients > self.samples {
            return Err(Error::config(field("M"), "must lie in [1, samples]"));
        }
        if let ModelConfig::Mlp { hidden: 0 } = self.model {
            return Err(Error::config(field("model.hidden"), "must be >= 1"));
        }
        Ok(())
    }
}

/// Materialized clients plus the global test set for one seed.
#[derive(Debug, Clone)]
pub struct Federation {
    pub model: ModelSpec,
    pub dataset: Dataset,
    pub partition: Partition,
    pub handles: Vec<ClientHandle>,
    pub clients: Vec<ClientData>,
    pub test: Option<Batch>,
}

impl Federation {
    /// Draws data, partitions it and splits every client, all keyed on `run_seed`.
    pub fn build(cfg: &DataConfig, run_seed: u64) -> Result<Self> {
        cfg.validate("data")?;
        let mixture = GaussianMixture::new(cfg.classes, cfg.features, cfg.class_sep)?;
        let dataset = mixture.sample(cfg.samples, seed::derive(run_seed, &[seed::tag::DATA]));
        let test = (cfg.test_samples > 0).then(|| {
            mixture
                .sample(
                    cfg.test_samples,
                    seed::derive(run_seed, &[seed::tag::TEST_DATA]),
                )
                .rows()
                .clone()
        });
        let partition = dirichlet_partition(
            dataset.labels(),
            cfg.classes,
            cfg.num_clients,
            cfg.alpha,
            run_seed,
        )?;
        let handles = stratified_split(&partition, dataset.labels(), cfg.classes, run_seed);
        let clients = materialize(&handles, &dataset);
        Federation::from_parts(cfg.model_spec(), dataset, partition, handles, clients, test)
    }

    pub fn from_parts(
        model: ModelSpec,
        dataset: Dataset,
        partition: Partition,
        handles: Vec<ClientHandle>,
        clients: Vec<ClientData>,
        test: Option<Batch>,
    ) -> Result<Self> {
        if clients.iter().all(|c| c.val.is_empty()) {
            return Err(Error::config(
                "data",
                "no client holds validation rows; increase samples",
            ));
        }
        Ok(Federation {
            model,
            dataset,
            partition,
            handles,
            clients,
            test,
        })
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.clients.iter().map(|c| c.weight).collect()
    }

    /// Validation loss and accuracy over all clients' validation splits,
    /// weighted by split size.
    pub fn evaluate_global(&self, params: &ParamVector) -> Result<Evaluation> {
        let mut loss = 0.0;
        let mut correct = 0.0;
        let mut count = 0;
        for c in self.clients.iter().filter(|c| !c.val.is_empty()) {
            let e = self.model.evaluate(params, &c.val)?;
            loss += e.loss * e.count as f64;
            correct += e.accuracy * e.count as f64;
            count += e.count;
        }
        Ok(Evaluation {
            loss: loss / count as f64,
            accuracy: correct / count as f64,
            count,
        })
    }

    pub fn evaluate_test(&self, params: &ParamVector) -> Result<Option<Evaluation>> {
        self.test
            .as_ref()
            .map(|t| self.model.evaluate(params, t))
            .transpose()
    }
}
