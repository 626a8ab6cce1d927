//! Network definitions built on [`crate::gradnet`], with parameter accounting and
//! bundle persistence.
//!
//! A bundle is a [`WeightFile`] whose manifest records `architecture`, `seed` and
//! `normalization`.

mod autoencoder;
mod discriminator;
mod ensemble;
mod layers;

use std::path::Path;

pub use autoencoder::{build_autoencoder, AutoencoderModel, ConvBlock, KERNEL};
pub use discriminator::{build_discriminator, DiscriminatorModel, DROPOUT, LEAKY_SLOPE};
pub use ensemble::{
    argmax_level, build_lc_ensemble, BaseModel, CnnBase, HybridBase, LcEnsembleModel, LstmBase,
    MetaClassifier, BASES, CLASSES, FRAME,
};
pub use layers::{count_params, BatchNormLayer, Binding, Conv1dLayer, DenseLayer, LstmLayer, Network};

use crate::error::{Error, Result};
use crate::gradnet::WeightFile;

/// Normalization conventions recorded in bundle manifests.
pub const NORM_MINMAX: &str = "minmax";
pub const NORM_P99: &str = "p99";

/// Trainable scalars on the inference path (ensemble plus autoencoder).
pub fn inference_param_count(lc: &LcEnsembleModel, ae: &AutoencoderModel) -> usize {
    count_params(lc) + count_params(ae)
}

pub fn bundle_of(net: &dyn Network, seed: u64, normalization: &str) -> WeightFile {
    let mut wf = net.to_weights();
    wf.set_meta("seed", seed);
    wf.set_meta("normalization", normalization);
    wf
}

fn bundle_seed(wf: &WeightFile) -> Result<u64> {
    wf.meta("seed")
        .ok_or_else(|| Error::Format("bundle manifest lacks 'seed'".into()))?
        .parse()
        .map_err(|_| Error::Format("bundle seed is not an integer".into()))
}

pub fn save_autoencoder(ae: &AutoencoderModel, path: &Path) -> Result<()> {
    bundle_of(ae, ae.seed, NORM_MINMAX).save(path)
}

pub fn load_autoencoder(path: &Path) -> Result<AutoencoderModel> {
    let wf = WeightFile::load(path)?;
    let mut ae = build_autoencoder(bundle_seed(&wf)?);
    ae.load_weights(&wf)?;
    Ok(ae)
}

pub fn save_discriminator(d: &DiscriminatorModel, path: &Path) -> Result<()> {
    bundle_of(d, d.seed, NORM_P99).save(path)
}

pub fn load_discriminator(path: &Path) -> Result<DiscriminatorModel> {
    let wf = WeightFile::load(path)?;
    let mut d = build_discriminator(bundle_seed(&wf)?);
    d.load_weights(&wf)?;
    Ok(d)
}

pub fn save_lc_ensemble(lc: &LcEnsembleModel, path: &Path) -> Result<()> {
    bundle_of(lc, lc.seed, NORM_MINMAX).save(path)
}

pub fn load_lc_ensemble(path: &Path) -> Result<LcEnsembleModel> {
    let wf = WeightFile::load(path)?;
    let mut lc = build_lc_ensemble(bundle_seed(&wf)?);
    lc.load_weights(&wf)?;
    if let Some(mask) = wf.meta("active") {
        let bits: Vec<bool> = mask.split(',').map(|b| b.trim() == "1").collect();
        if bits.len() != BASES {
            return Err(Error::Format(format!("bad ensemble mask '{mask}'")));
        }
        lc.active.copy_from_slice(&bits);
    }
    Ok(lc)
}
