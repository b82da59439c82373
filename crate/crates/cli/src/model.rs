//! Model selection shared by the subcommands.

use std::path::Path;

use clap::{Args, ValueEnum};
use inar_core::presets::find_preset;
use inar_core::{InarError, InnovationSpec, Result, StationaryModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Family {
    Logarithmic,
    Bernoulli,
    Binomial,
    PoissonianBinomial,
    Heine,
    Poisson,
}

/// Exactly one of `--model`, `--preset` or `--innovation` selects the model.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Model config: a JSON file path, or inline JSON starting with '{'.
    #[arg(long, value_name = "FILE|JSON", conflicts_with_all = ["preset", "innovation"])]
    pub model: Option<String>,

    /// Named example model (see `inar presets`).
    #[arg(long, conflicts_with = "innovation")]
    pub preset: Option<String>,

    /// Innovation family, configured by the flags below.
    #[arg(long, value_enum)]
    pub innovation: Option<Family>,

    /// Success probability (logarithmic, bernoulli, binomial).
    #[arg(long)]
    pub p: Option<f64>,
    /// Number of trials (binomial, poissonian_binomial).
    #[arg(long)]
    pub m: Option<u32>,
    /// Ratio of the q-series (poissonian_binomial, heine).
    #[arg(long)]
    pub q: Option<f64>,
    /// Leading probability (poissonian_binomial).
    #[arg(long)]
    pub c: Option<f64>,
    /// Rate (heine, poisson).
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Thinning coefficient; overrides the preset's value if given.
    #[arg(long)]
    pub alpha: Option<f64>,
}

fn need<T>(value: Option<T>, name: &'static str, family: &str) -> Result<T> {
    value.ok_or_else(|| {
        InarError::param(
            name,
            format!("--{name} is required for --innovation {family}"),
        )
    })
}

fn reject(args: &ModelArgs, allowed: &[&str], family: &str) -> Result<()> {
    let given = [
        ("p", args.p.is_some()),
        ("m", args.m.is_some()),
        ("q", args.q.is_some()),
        ("c", args.c.is_some()),
        ("lambda", args.lambda.is_some()),
    ];
    for (name, present) in given {
        if present && !allowed.contains(&name) {
            return Err(InarError::Config(format!(
                "--{name} does not apply to --innovation {family}"
            )));
        }
    }
    Ok(())
}

impl ModelArgs {
    pub fn resolve(&self) -> Result<StationaryModel> {
        let model = if let Some(src) = &self.model {
            let mut model = load_model(src)?;
            if let Some(alpha) = self.alpha {
                model.alpha = alpha;
            }
            model
        } else if let Some(name) = &self.preset {
            let mut model = find_preset(name)?;
            if let Some(alpha) = self.alpha {
                model.alpha = alpha;
            }
            model
        } else if let Some(family) = self.innovation {
            let innovation = self.innovation_spec(family)?;
            let alpha = self.alpha.ok_or_else(|| {
                InarError::param("alpha", "--alpha is required with --innovation")
            })?;
            StationaryModel { innovation, alpha }
        } else {
            return Err(InarError::Config(
                "no model given; use --model, --preset or --innovation".to_string(),
            ));
        };
        model.validate()?;
        Ok(model)
    }

    fn innovation_spec(&self, family: Family) -> Result<InnovationSpec> {
        let name = family
            .to_possible_value()
            .map(|v| v.get_name().to_string())
            .unwrap_or_default();
        let name = name.as_str();
        let spec = match family {
            Family::Logarithmic => {
                reject(self, &["p"], name)?;
                InnovationSpec::Logarithmic {
                    p: need(self.p, "p", name)?,
                }
            }
            Family::Bernoulli => {
                reject(self, &["p"], name)?;
                InnovationSpec::Bernoulli {
                    p: need(self.p, "p", name)?,
                }
            }
            Family::Binomial => {
                reject(self, &["m", "p"], name)?;
                InnovationSpec::Binomial {
                    m: need(self.m, "m", name)?,
                    p: need(self.p, "p", name)?,
                }
            }
            Family::PoissonianBinomial => {
                reject(self, &["m", "q", "c"], name)?;
                InnovationSpec::PoissonianBinomial {
                    m: need(self.m, "m", name)?,
                    q: need(self.q, "q", name)?,
                    c: need(self.c, "c", name)?,
                }
            }
            Family::Heine => {
                reject(self, &["lambda", "q"], name)?;
                InnovationSpec::Heine {
                    lambda: need(self.lambda, "lambda", name)?,
                    q: need(self.q, "q", name)?,
                }
            }
            Family::Poisson => {
                reject(self, &["lambda"], name)?;
                InnovationSpec::Poisson {
                    lambda: need(self.lambda, "lambda", name)?,
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn load_model(src: &str) -> Result<StationaryModel> {
    if src.trim_start().starts_with('{') {
        return StationaryModel::from_json(src);
    }
    let text = std::fs::read_to_string(Path::new(src))
        .map_err(|e| InarError::Config(format!("cannot read model file {src}: {e}")))?;
    StationaryModel::from_json(&text).map_err(|e| match e {
        InarError::Config(msg) => InarError::Config(format!("{src}: {msg}")),
        other => other,
    })
}
