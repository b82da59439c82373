//! Named example models, including the Poisson-convolution innovations.

use crate::error::{InarError, Result};
use crate::innovations::InnovationSpec;
use crate::marginal::StationaryModel;

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub model: StationaryModel,
}

fn preset(
    name: &'static str,
    description: &'static str,
    innovation: InnovationSpec,
    alpha: f64,
) -> Preset {
    Preset {
        name,
        description,
        model: StationaryModel { innovation, alpha },
    }
}

/// All presets, in a stable order.
pub fn presets() -> Vec<Preset> {
    use InnovationSpec::*;
    vec![
        preset(
            "bernoulli",
            "Bernoulli(0.2) innovations",
            Bernoulli { p: 0.2 },
            0.5,
        ),
        preset(
            "binomial",
            "Binomial(3, 0.2) innovations",
            Binomial { m: 3, p: 0.2 },
            0.5,
        ),
        preset(
            "poissonian-binomial",
            "Poissonian binomial(3, q=0.5, c=0.4) innovations",
            PoissonianBinomial {
                m: 3,
                q: 0.5,
                c: 0.4,
            },
            0.5,
        ),
        preset(
            "heine",
            "Heine(1, 0.5) innovations",
            Heine {
                lambda: 1.0,
                q: 0.5,
            },
            0.5,
        ),
        preset(
            "logarithmic",
            "Logarithmic(0.5) innovations",
            Logarithmic { p: 0.5 },
            0.5,
        ),
        preset(
            "poisson",
            "Poisson(1) innovations",
            Poisson { lambda: 1.0 },
            0.5,
        ),
        preset(
            "poisson-logarithmic",
            "Poisson(0.5) * Logarithmic(0.5) innovations",
            Convolution {
                parts: vec![Poisson { lambda: 0.5 }, Logarithmic { p: 0.5 }],
            },
            0.5,
        ),
        preset(
            "pl1",
            "Power-law of the first kind: Poisson(0.5) * Bernoulli(0.3)",
            Convolution {
                parts: vec![Poisson { lambda: 0.5 }, Bernoulli { p: 0.3 }],
            },
            0.5,
        ),
        preset(
            "pl-star",
            "Power-law of order 3: Poisson(0.5) * Binomial(3, 0.2)",
            Convolution {
                parts: vec![Poisson { lambda: 0.5 }, Binomial { m: 3, p: 0.2 }],
            },
            0.5,
        ),
        preset(
            "poisson-heine",
            "Poisson(0.5) * Heine(1, 0.5) innovations",
            Convolution {
                parts: vec![
                    Poisson { lambda: 0.5 },
                    Heine {
                        lambda: 1.0,
                        q: 0.5,
                    },
                ],
            },
            0.5,
        ),
    ]
}

pub fn find_preset(name: &str) -> Result<StationaryModel> {
    presets()
        .into_iter()
        .find(|p| p.name == name)
        .map(|p| p.model)
        .ok_or_else(|| {
            let names: Vec<&str> = presets().iter().map(|p| p.name).collect();
            InarError::param(
                "preset",
                format!("unknown preset {name:?}; known: {}", names.join(", ")),
            )
        })
}

/// For a convolution preset `Poisson(lambda) * base`, the Poisson rate and
/// the base innovation.
pub fn poisson_factor(model: &StationaryModel) -> Option<(f64, InnovationSpec)> {
    match &model.innovation {
        InnovationSpec::Convolution { parts } if parts.len() == 2 => match (&parts[0], &parts[1]) {
            (InnovationSpec::Poisson { lambda }, base) => Some((*lambda, base.clone())),
            _ => None,
        },
        _ => None,
    }
}
