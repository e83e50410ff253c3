use super::config::{DatasetKind, FederationConfig};
use super::HarnessError;
use crate::data::{
    gaussian_blobs, load_container, load_idx, pca_fit_transform, restrict_classes, subsample, Dataset, Split,
};
use crate::seed::{self, tag};

/// Load, restrict, subsample and PCA-encode the configured dataset. The
/// result depends only on the dataset section, so every seed shares it.
pub fn prepare_data(cfg: &FederationConfig) -> Result<(Dataset, Dataset), HarnessError> {
    let d = &cfg.dataset;
    let path = |p: &Option<String>| cfg.resolve(p.as_deref().unwrap_or_default());
    let (train, test) = match d.name {
        DatasetKind::Blobs => gaussian_blobs(d.train_size, d.test_size, d.blobs, d.data_seed)?,
        DatasetKind::Mnist | DatasetKind::Fmnist => {
            let train = load_idx(path(&d.train_images), path(&d.train_labels), Split::Train)?;
            let test = load_idx(path(&d.test_images), path(&d.test_labels), Split::Test)?;
            (train, test)
        }
        DatasetKind::Container => {
            (load_container(path(&d.train_path), Split::Train)?, load_container(path(&d.test_path), Split::Test)?)
        }
    };
    let (train, test) = if d.name == DatasetKind::Blobs {
        (train, test)
    } else {
        (restrict_classes(&train, &d.classes)?, restrict_classes(&test, &d.classes)?)
    };
    let train = subsample(&train, d.train_size, seed::derive(d.data_seed, &[tag::SUBSAMPLE, 0]));
    let test = subsample(&test, d.test_size, seed::derive(d.data_seed, &[tag::SUBSAMPLE, 1]));
    let (_, train, test) = pca_fit_transform(&train, &test, cfg.model.qubits)?;
    Ok((train, test))
}
