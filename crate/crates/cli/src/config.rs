use anyhow::{bail, Result};
use l1ssl::bow::RefineConfig;
use l1ssl::experiments::MoonsConfig;
use l1ssl::graph::{GraphConfig, Symmetrization};

use crate::args::{GraphArgs, Preset, RefineArgs};

/// Graph and L1 solver parameters of a classification run.
#[derive(Debug, Clone, Copy)]
pub struct Params {
    pub graph: GraphConfig,
    pub m: usize,
    pub lambda: f64,
}

impl Params {
    pub fn mnist_style() -> Self {
        Self {
            graph: GraphConfig {
                sigma: 1.0,
                k: 4,
                symmetrization: Symmetrization::Union,
            },
            m: 20,
            lambda: 0.01,
        }
    }

    pub fn moons() -> Self {
        let d = MoonsConfig::default();
        Self {
            graph: d.graph,
            m: d.m,
            lambda: d.lambda_l1,
        }
    }

    /// Preset first, then explicit flags on top of `base`.
    pub fn resolve(base: Self, args: &GraphArgs, lambda: Option<f64>) -> Result<Self> {
        let mut p = match args.preset {
            None => base,
            Some(Preset::MnistStyle) => Self::mnist_style(),
            Some(p) => bail!("preset {p:?} applies to refine-bow only"),
        };
        if let Some(k) = args.k {
            p.graph.k = k;
        }
        if let Some(s) = args.sigma {
            p.graph.sigma = s;
        }
        if let Some(m) = args.m {
            p.m = m;
        }
        if let Some(l) = lambda {
            p.lambda = l;
        }
        if args.mutual {
            p.graph.symmetrization = Symmetrization::Mutual;
        }
        Ok(p)
    }
}

/// Visual and textual refinement parameters.
pub fn refine_configs(args: &RefineArgs) -> Result<(RefineConfig, RefineConfig)> {
    let (mut v, mut t) = match args.preset {
        None => (RefineConfig::table2_visual(), RefineConfig::table2_textual()),
        Some(Preset::Table2Visual) => (RefineConfig::table2_visual(), RefineConfig::table2_visual()),
        Some(Preset::Table2Textual) => (RefineConfig::table2_textual(), RefineConfig::table2_textual()),
        Some(Preset::MnistStyle) => bail!("preset mnist-style does not apply to refine-bow"),
    };
    for c in [&mut v, &mut t] {
        if let Some(k) = args.k {
            c.k = k;
        }
        if let Some(m) = args.m {
            c.m = m;
        }
        if let Some(l) = args.lambda {
            c.lambda = l;
        }
        if let Some(g) = args.gamma {
            c.gamma = g;
        }
        c.clamp_nonnegative = args.clamp;
        c.validate()?;
    }
    Ok((v, t))
}
