//! Run configuration read from a `key = value` file.

use std::path::{Path, PathBuf};

use pdc_core::fields::{ModelConfig, SdcMode};
use pdc_core::io::KeyValues;
use pdc_core::losses::{ConsistencyPoints, LossWeights, ReconWeights};
use pdc_core::training::{AdamConfig, TrainConfig};
use pdc_core::Result;

/// Every recognised key with its default and a short description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("data", "data", "dataset directory of .shape files"),
    ("out", "run", "output directory for checkpoint and log"),
    ("latent_dim", "256", "global latent code size"),
    ("prior_dim", "64", "part deformation prior size"),
    ("parts", "auto", "semantic parts; auto takes the dataset's k"),
    ("template_width", "128", "template field hidden width"),
    ("template_depth", "5", "template field layers"),
    ("deform_width", "128", "deformation field hidden width"),
    ("deform_depth", "6", "deformation field layers"),
    ("hyper_hidden", "64", "hypernetwork hidden width"),
    ("omega", "30", "sine frequency of the first layer"),
    ("sdc", "soft", "part assignment: soft|hard"),
    ("code_std", "0.01", "initial code and prior spread"),
    ("epochs", "1000", "passes over the dataset"),
    ("max_steps", "0", "step cap; 0 means epochs decide"),
    ("batch_size", "8", "shapes per step"),
    ("n_surface", "512", "surface points per shape per step"),
    ("n_query", "512", "query points per shape per step"),
    ("lr", "1e-4", "Adam learning rate"),
    ("beta1", "0.9", "Adam first moment decay"),
    ("beta2", "0.999", "Adam second moment decay"),
    ("adam_eps", "1e-8", "Adam denominator guard"),
    ("clip", "10", "global gradient norm bound; 0 disables"),
    ("seed", "0", "seed for initialisation and sampling"),
    ("checkpoint_every", "500", "steps between checkpoints; 0 only at the end"),
    ("w_pdc_geo", "250", "geometric part deformation consistency"),
    ("w_pdc_sem", "50", "semantic part deformation consistency"),
    ("w_scale", "500", "global scale consistency"),
    ("w_geo", "50", "deformed shape Chamfer"),
    ("w_smooth", "1", "deformation smoothness"),
    ("w_normal", "100", "deformed normal consistency"),
    ("w_correction", "500", "minimal SDF correction"),
    ("w_emb", "1e6", "code and prior magnitude"),
    ("w_rec_sdf", "3e3", "reconstruction: SDF values"),
    ("w_rec_normal", "1e2", "reconstruction: surface normals"),
    ("w_rec_eikonal", "5e1", "reconstruction: unit gradient"),
    ("w_rec_off", "1e2", "reconstruction: off-surface penalty"),
    ("delta", "100", "off-surface penalty sharpness"),
    ("uncertainty_gamma", "10", "correspondence uncertainty modulation"),
    ("consistency_points", "surface", "points for consistency terms: surface|all"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub out: PathBuf,
    /// `None` takes the feature width of the dataset.
    pub parts: Option<usize>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub checkpoint_every: usize,
    /// `(key, value, from file)` for every key, in table order.
    pub echo: Vec<(String, String, bool)>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(&KeyValues::load(path)?)
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        kv.check_known(&KEYS.iter().map(|k| k.0).collect::<Vec<_>>())?;
        let echo = KEYS
            .iter()
            .map(|&(k, d, _)| match kv.get(k) {
                Some((v, _)) => (k.to_string(), v.to_string(), true),
                None => (k.to_string(), d.to_string(), false),
            })
            .collect();
        // Parse each key from the file, or from its documented default.
        let val = |key: &str| -> String {
            kv.get(key)
                .map(|(v, _)| v.to_string())
                .unwrap_or_else(|| KEYS.iter().find(|k| k.0 == key).expect("listed key").1.to_string())
        };
        let num = |key: &str| -> Result<f64> { parse(kv, key, &val(key)) };
        let int = |key: &str| -> Result<usize> { parse(kv, key, &val(key)) };

        let parts = match val("parts").as_str() {
            "auto" => None,
            v => Some(parse(kv, "parts", v)?),
        };
        let model = ModelConfig {
            latent_dim: int("latent_dim")?,
            prior_dim: int("prior_dim")?,
            parts: parts.unwrap_or(1),
            shapes: 1,
            template_width: int("template_width")?,
            template_depth: int("template_depth")?,
            deform_width: int("deform_width")?,
            deform_depth: int("deform_depth")?,
            hyper_hidden: int("hyper_hidden")?,
            omega: num("omega")?,
            sdc: parse::<SdcMode>(kv, "sdc", &val("sdc"))?,
            code_std: num("code_std")?,
        };
        let weights = LossWeights {
            pdc_geo: num("w_pdc_geo")?,
            pdc_sem: num("w_pdc_sem")?,
            scale: num("w_scale")?,
            geo: num("w_geo")?,
            smooth: num("w_smooth")?,
            normal: num("w_normal")?,
            correction: num("w_correction")?,
            emb: num("w_emb")?,
            delta: num("delta")?,
            uncertainty_gamma: num("uncertainty_gamma")?,
            recon: ReconWeights {
                sdf: num("w_rec_sdf")?,
                normal: num("w_rec_normal")?,
                eikonal: num("w_rec_eikonal")?,
                off_surface: num("w_rec_off")?,
            },
            consistency_points: parse::<ConsistencyPoints>(kv, "consistency_points", &val("consistency_points"))?,
        };
        weights.validate()?;
        let max_steps = int("max_steps")?;
        let train = TrainConfig {
            epochs: int("epochs")?,
            max_steps: (max_steps > 0).then_some(max_steps),
            batch_size: int("batch_size")?,
            n_surface: int("n_surface")?,
            n_query: int("n_query")?,
            adam: AdamConfig {
                lr: num("lr")?,
                beta1: num("beta1")?,
                beta2: num("beta2")?,
                eps: num("adam_eps")?,
            },
            clip: num("clip")?,
            weights,
            seed: parse(kv, "seed", &val("seed"))?,
        };
        train.adam.validate()?;
        Ok(Self {
            data: val("data").into(),
            out: val("out").into(),
            parts,
            model,
            train,
            checkpoint_every: int("checkpoint_every")?,
            echo,
        })
    }

    /// The effective settings, one `key = value` per line, defaults marked.
    pub fn echo_text(&self) -> String {
        self.echo
            .iter()
            .map(|(k, v, set)| {
                if *set {
                    format!("{k} = {v}\n")
                } else {
                    format!("{k} = {v}  # default\n")
                }
            })
            .collect()
    }
}

fn parse<T: std::str::FromStr>(kv: &KeyValues, key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| pdc_core::Error::Parse {
        path: kv.path.clone(),
        line: kv.get(key).map_or(0, |(_, l)| l),
        msg: format!("bad value {v:?} for {key}: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(text: &str) -> KeyValues {
        KeyValues::parse(text, Path::new("run.cfg")).unwrap()
    }

    #[test]
    fn defaults_match_library_defaults() {
        let c = RunConfig::from_kv(&kv("")).unwrap();
        assert_eq!(c.train.weights, LossWeights::default());
        let lib = TrainConfig::default();
        assert_eq!((c.train.epochs, c.train.batch_size, c.train.max_steps), (lib.epochs, lib.batch_size, None));
        assert_eq!(c.train.adam, AdamConfig::default());
        assert_eq!(c.model, ModelConfig { parts: 1, ..ModelConfig::default() });
        assert_eq!(c.parts, None);
        assert!(c.echo.iter().all(|e| !e.2));
    }

    #[test]
    fn set_keys_are_echoed_as_set() {
        let c = RunConfig::from_kv(&kv("lr = 1e-3\nmax_steps = 20\nparts = 4\n")).unwrap();
        assert_eq!(c.train.adam.lr, 1e-3);
        assert_eq!(c.train.max_steps, Some(20));
        assert_eq!(c.parts, Some(4));
        let text = c.echo_text();
        assert!(text.contains("lr = 1e-3\n"));
        assert!(text.contains("epochs = 1000  # default\n"));
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let e = RunConfig::from_kv(&kv("lr = 1\nlearning_rate = 2\n")).unwrap_err();
        assert!(matches!(e, pdc_core::Error::Parse { line: 2, .. }), "{e}");
    }

    #[test]
    fn bad_value_names_key_and_line() {
        let e = RunConfig::from_kv(&kv("\n\nbatch_size = many\n")).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("run.cfg:3") && msg.contains("batch_size"), "{msg}");
    }
}
