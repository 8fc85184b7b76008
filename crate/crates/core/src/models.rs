//! Published closed-form predictors of the longitudinal dispersion
//! coefficient, plus the formula recovered by the evolutionary search.
//!
//! Most formulas give `Dl/(d·U*)` as a function of the aspect ratio `w/d`
//! and the velocity ratio `U/U*`; a few give `Dl` directly.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::network::guarded_exp;

/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    Elder1959,
    Fischer1979,
    Liu1977,
    SeoCheong1998,
    Koussis1998,
    Deng2001,
    Kashefipour2002,
    ZengHuai2014,
    Disley2014,
    SahayDutta2009,
    Li2013,
    SattarA,
    SattarB,
    WangHuai2016,
    WangHuai2017,
    Alizadeh2017,
    Riahi2019,
    MemarzadehA,
    MemarzadehB,
    Riahi2020A,
    Riahi2020B,
    EsrnFinal,
}

impl ModelId {
    pub const ALL: [ModelId; 22] = [
        ModelId::Elder1959,
        ModelId::Fischer1979,
        ModelId::Liu1977,
        ModelId::SeoCheong1998,
        ModelId::Koussis1998,
        ModelId::Deng2001,
        ModelId::Kashefipour2002,
        ModelId::ZengHuai2014,
        ModelId::Disley2014,
        ModelId::SahayDutta2009,
        ModelId::Li2013,
        ModelId::SattarA,
        ModelId::SattarB,
        ModelId::WangHuai2016,
        ModelId::WangHuai2017,
        ModelId::Alizadeh2017,
        ModelId::Riahi2019,
        ModelId::MemarzadehA,
        ModelId::MemarzadehB,
        ModelId::Riahi2020A,
        ModelId::Riahi2020B,
        ModelId::EsrnFinal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Elder1959 => "elder1959",
            ModelId::Fischer1979 => "fischer1979",
            ModelId::Liu1977 => "liu1977",
            ModelId::SeoCheong1998 => "seo_cheong1998",
            ModelId::Koussis1998 => "koussis1998",
            ModelId::Deng2001 => "deng2001",
            ModelId::Kashefipour2002 => "kashefipour2002",
            ModelId::ZengHuai2014 => "zeng_huai2014",
            ModelId::Disley2014 => "disley2014",
            ModelId::SahayDutta2009 => "sahay_dutta2009",
            ModelId::Li2013 => "li2013",
            ModelId::SattarA => "sattar_a",
            ModelId::SattarB => "sattar_b",
            ModelId::WangHuai2016 => "wang_huai2016",
            ModelId::WangHuai2017 => "wang_huai2017",
            ModelId::Alizadeh2017 => "alizadeh2017",
            ModelId::Riahi2019 => "riahi2019",
            ModelId::MemarzadehA => "memarzadeh_a",
            ModelId::MemarzadehB => "memarzadeh_b",
            ModelId::Riahi2020A => "riahi2020_a",
            ModelId::Riahi2020B => "riahi2020_b",
            ModelId::EsrnFinal => "esrn_final",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownModel(pub String);

impl fmt::Display for UnknownModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown model id `{}`", self.0)
    }
}

impl std::error::Error for UnknownModel {}

impl FromStr for ModelId {
    type Err = UnknownModel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelId::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| UnknownModel(s.to_string()))
    }
}

/// Froude number U / sqrt(g·d).
pub fn froude(u: f64, d: f64) -> f64 {
    u / (GRAVITY * d).sqrt()
}

/// The ε term of the Deng et al. formula: 0.145 + (w/d)^1.38·(U/U*)/3520.
pub fn deng_epsilon(wd: f64, uu: f64) -> f64 {
    0.145 + wd.powf(1.38) * uu / 3520.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub model: ModelId,
    pub dl: f64,
    /// `Dl/(d·U*)` for formulas stated in that form.
    pub normalized: Option<f64>,
    /// The formula produced a negative coefficient (kept as is).
    pub negative: bool,
}

fn sigmoid_term(k: f64, arg: f64) -> f64 {
    k / (1.0 + guarded_exp(arg))
}

/// `Dl/(d·U*)` for the formulas stated in that form.
fn normalized(id: ModelId, s: &Sample) -> Option<f64> {
    let wd = s.w / s.d;
    let uu = s.u / s.ustar;
    let fr = froude(s.u, s.d);
    let x = match id {
        ModelId::Elder1959 => 5.86,
        ModelId::Fischer1979 => 0.011 * wd.powi(2) * uu.powi(2),
        ModelId::Liu1977 => 0.18 * wd.powi(2) * uu.powf(0.5),
        ModelId::SeoCheong1998 => 5.915 * wd.powf(0.62) * uu.powf(1.428),
        ModelId::Koussis1998 => 0.6 * wd.powi(2),
        ModelId::Deng2001 => 0.15 / (8.0 * deng_epsilon(wd, uu)) * wd.powf(1.67) * uu.powi(2),
        ModelId::Kashefipour2002 => {
            if wd > 50.0 {
                10.612 * uu.powi(2)
            } else {
                (7.428 + 1.775 * wd.powf(0.62) * uu.powf(0.572)) * uu.powi(2)
            }
        }
        ModelId::ZengHuai2014 => 5.4 * wd.powf(0.7) * uu.powf(1.13),
        ModelId::Disley2014 => 3.563 * fr.powf(-0.4117) * wd.powf(0.6776) * uu.powf(1.0132),
        ModelId::SahayDutta2009 => 2.0 * wd.powf(0.96) * uu.powf(1.25),
        ModelId::Li2013 => 2.2820 * wd.powf(0.7613) * uu.powf(1.4713),
        ModelId::SattarA => {
            let a = 2.9 * 4.6f64.powf(fr.sqrt());
            let b = 0.5 - fr;
            let c = 1.0 + fr.sqrt();
            a * wd.powf(b) * uu.powf(c)
        }
        ModelId::SattarB => {
            let a = 8.45;
            let b = 0.5 - 0.514 * fr.powf(0.516) + uu * 0.42f64.powf(uu);
            let c = 1.65;
            a * wd.powf(b) * uu.powf(c)
        }
        ModelId::WangHuai2016 => 17.648 * wd.powf(0.3619) * uu.powf(1.16),
        ModelId::Alizadeh2017 => {
            if wd > 28.0 {
                9.931 * wd.powf(0.187) * uu.powf(1.802)
            } else {
                5.319 * wd.powf(1.206) * uu.powf(0.075)
            }
        }
        ModelId::Riahi2019 => {
            33.99 * wd.powf(0.5)
                + 8.497 * wd * (s.ustar / s.u).powi(2)
                + 8.497 * s.w * s.ustar / (s.d * s.u)
                + 16.99 * s.w * s.ustar / (s.d * s.u)
                + (0.0000486 * wd.powf(0.5) - 0.00021) / (s.d.powf(1.5) * s.ustar.powi(4)) * s.w.powf(1.6) * s.u.powi(4)
                + 0.01478
        }
        ModelId::MemarzadehA => {
            if wd > 27.0 {
                (0.35 + 8.7 * (s.d / s.w)) * (6.4 + 8.0 * wd) * uu.powf(0.5)
            } else {
                0.2694 * wd.powf(2.2456)
            }
        }
        ModelId::MemarzadehB => 4.5 * wd * uu.powf(0.5),
        ModelId::WangHuai2017 | ModelId::Riahi2020A | ModelId::Riahi2020B | ModelId::EsrnFinal => return None,
    };
    Some(x)
}

/// `Dl` for the formulas stated directly.
fn direct(id: ModelId, s: &Sample) -> f64 {
    let (w, d, u, us) = (s.w, s.d, s.u, s.ustar);
    match id {
        // Printed with a right-hand side that is not dimensionless; read as
        // Dl/(w·U) = 0.718 + 47.9·d/w.
        ModelId::WangHuai2017 => (0.718 + 47.9 * d / w) * u * w,
        ModelId::Riahi2020A => {
            sigmoid_term(-124.74, -0.02 * w + 0.39 * d + 3.52 * u + 11.37 * us - 3.72)
                + sigmoid_term(374.99, 0.02 * w - 0.48 * d + 0.69 * u + 11.37 * us + 2.37)
                + sigmoid_term(-517.15, 0.02 * w + 0.87 * d - 3.52 * u - 2.04 * us - 4.48)
                + sigmoid_term(-636.76, 0.03 * w + 1.6 * d + 3.52 * u - 4.49 * us - 11.6)
                + 227.59
        }
        ModelId::Riahi2020B => {
            sigmoid_term(471.22, 0.04 * w - 0.62 * d - 2.71 * u + 23.26 * us - 9.21)
                + sigmoid_term(315.96, -0.023 * w + 1.31 * d + 0.54 * u + 10.18 * us + 1.91)
                + sigmoid_term(-306.77, 0.021 * w + 0.11 * d + 2.04 * u - 3.60 * us - 7.25)
                + sigmoid_term(-818.23, 0.01 * w + 1.07 * d + 2.14 * u + 0.335 * us - 7.20)
                + sigmoid_term(-583.71, -0.01 * w - 0.24 * d + 7.94 * u + 1.49 * us + 2.33)
                + 227.59
        }
        ModelId::EsrnFinal => 13.89 * w * us,
        _ => unreachable!("normalized form handled by caller"),
    }
}

pub fn predict(id: ModelId, sample: &Sample) -> Prediction {
    let norm = normalized(id, sample);
    let dl = match norm {
        Some(x) => x * sample.d * sample.ustar,
        None => direct(id, sample),
    };
    Prediction {
        model: id,
        dl,
        normalized: norm,
        negative: dl < 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: ModelId,
    pub citation: String,
    pub formula: String,
    pub inputs: Vec<String>,
    pub known_poor: bool,
    pub notes: Vec<String>,
}

pub fn catalog() -> Vec<CatalogEntry> {
    ModelId::ALL.iter().map(|&id| catalog_entry(id)).collect()
}

pub fn catalog_entry(id: ModelId) -> CatalogEntry {
    const RATIOS: &[&str] = &["w", "d", "U", "Ustar"];
    let (citation, formula, inputs, notes): (&str, &str, &[&str], &[&str]) = match id {
        ModelId::Elder1959 => ("Elder (1959)", "Dl = 5.86*d*Ustar", &["d", "Ustar"], &[]),
        ModelId::Fischer1979 => ("Fischer et al. (1979)", "Dl/(d*Ustar) = 0.011*(w/d)^2*(U/Ustar)^2", RATIOS, &[]),
        ModelId::Liu1977 => ("Liu (1977)", "Dl/(d*Ustar) = 0.18*(w/d)^2*(U/Ustar)^0.5", RATIOS, &[]),
        ModelId::SeoCheong1998 => ("Seo and Cheong (1998)", "Dl/(d*Ustar) = 5.915*(w/d)^0.62*(U/Ustar)^1.428", RATIOS, &[]),
        ModelId::Koussis1998 => ("Koussis and Rodriguez-Mirasol (1998)", "Dl/(d*Ustar) = 0.6*(w/d)^2", &["w", "d", "Ustar"], &[]),
        ModelId::Deng2001 => (
            "Deng et al. (2001)",
            "Dl/(d*Ustar) = 0.15/(8*eps)*(w/d)^1.67*(U/Ustar)^2, eps = 0.145 + (w/d)^1.38*(U/Ustar)/3520",
            RATIOS,
            &[],
        ),
        ModelId::Kashefipour2002 => (
            "Kashefipour and Falconer (2002)",
            "w/d > 50: Dl/(d*Ustar) = 10.612*(U/Ustar)^2; w/d <= 50: (7.428 + 1.775*(w/d)^0.62*(U/Ustar)^0.572)*(U/Ustar)^2",
            RATIOS,
            &[],
        ),
        ModelId::ZengHuai2014 => ("Zeng and Huai (2014)", "Dl/(d*Ustar) = 5.4*(w/d)^0.7*(U/Ustar)^1.13", RATIOS, &[]),
        ModelId::Disley2014 => (
            "Disley et al. (2015)",
            "Dl/(d*Ustar) = 3.563*Fr^-0.4117*(w/d)^0.6776*(U/Ustar)^1.0132, Fr = U/sqrt(g*d)",
            RATIOS,
            &[],
        ),
        ModelId::SahayDutta2009 => ("Sahay and Dutta (2009)", "Dl/(d*Ustar) = 2*(w/d)^0.96*(U/Ustar)^1.25", RATIOS, &[]),
        ModelId::Li2013 => ("Li et al. (2013)", "Dl/(d*Ustar) = 2.2820*(w/d)^0.7613*(U/Ustar)^1.4713", RATIOS, &[]),
        ModelId::SattarA => (
            "Sattar and Gharabaghi (2015), model A",
            "Dl/(d*Ustar) = a*(w/d)^b*(U/Ustar)^c, a = 2.9*4.6^sqrt(Fr), b = 0.5 - Fr, c = 1 + sqrt(Fr)",
            RATIOS,
            &["a fourth printed parameter (d = -0.5) has no place in the formula and is ignored"],
        ),
        ModelId::SattarB => (
            "Sattar and Gharabaghi (2015), model B",
            "Dl/(d*Ustar) = a*(w/d)^b*(U/Ustar)^c, a = 8.45, b = 0.5 - 0.514*Fr^0.516 + (U/Ustar)*0.42^(U/Ustar), c = 1.65",
            RATIOS,
            &["a fourth printed parameter (d = 0) has no place in the formula and is ignored"],
        ),
        ModelId::WangHuai2016 => ("Wang and Huai (2016)", "Dl/(d*Ustar) = 17.648*(w/d)^0.3619*(U/Ustar)^1.16", RATIOS, &[]),
        ModelId::WangHuai2017 => (
            "Wang et al. (2017)",
            "Dl/(w*U) = 0.718 + 47.9*d/w",
            &["w", "d", "U"],
            &["the printed form Dl/(d*Ustar) = (0.718 + 47.9*d/w)*U/w is not dimensionally consistent; implemented as Dl = (0.718 + 47.9*d/w)*U*w"],
        ),
        ModelId::Alizadeh2017 => (
            "Alizadeh et al. (2017)",
            "w/d > 28: Dl/(d*Ustar) = 9.931*(w/d)^0.187*(U/Ustar)^1.802; w/d <= 28: 5.319*(w/d)^1.206*(U/Ustar)^0.075",
            RATIOS,
            &[],
        ),
        ModelId::Riahi2019 => (
            "Riahi-Madvar et al. (2019)",
            "Dl/(d*Ustar) = 33.99*(w/d)^0.5 + 8.497*(w/d)*(Ustar/U)^2 + 8.497*w*Ustar/(d*U) + 16.99*w*Ustar/(d*U) + (0.0000486*(w/d)^0.5 - 0.00021)/(d^1.5*Ustar^4)*w^1.6*U^4 + 0.01478",
            RATIOS,
            &[
                "the formula is printed over two lines; the lines are summed",
                "the term w*Ustar/(d*U) appears twice with coefficients 8.497 and 16.99; both are kept as printed",
            ],
        ),
        ModelId::MemarzadehA => (
            "Memarzadeh et al. (2020), model A",
            "w/d > 27: Dl/(d*Ustar) = (0.35 + 8.7*d/w)*(6.4 + 8*w/d)*(U/Ustar)^0.5; w/d <= 27: 0.2694*(w/d)^2.2456",
            RATIOS,
            &[],
        ),
        ModelId::MemarzadehB => ("Memarzadeh et al. (2020), model B", "Dl/(d*Ustar) = 4.5*(w/d)*(U/Ustar)^0.5", RATIOS, &[]),
        ModelId::Riahi2020A => (
            "Riahi-Madvar et al. (2020), model A",
            "Dl = -124.74/a + 374.99/b - 517.15/c - 636.76/e + 227.59 with four logistic terms in w, d, U, Ustar",
            RATIOS,
            &["neural-network fit reported to overfit its training data"],
        ),
        ModelId::Riahi2020B => (
            "Riahi-Madvar et al. (2020), model B",
            "Dl = 471.22/a + 315.96/b - 306.77/c - 818.23/d' - 583.71/e + 227.59 with five logistic terms in w, d, U, Ustar",
            RATIOS,
            &["neural-network fit reported to overfit its training data"],
        ),
        ModelId::EsrnFinal => ("Evolutionary symbolic regression network", "Dl = 13.89*w*Ustar", &["w", "Ustar"], &[]),
    };
    CatalogEntry {
        id,
        citation: citation.to_string(),
        formula: formula.to_string(),
        inputs: inputs.iter().map(|s| s.to_string()).collect(),
        known_poor: matches!(id, ModelId::Riahi2020A | ModelId::Riahi2020B),
        notes: notes.iter().map(|s| s.to_string()).collect(),
    }
}

/// Inclusive sampling bounds for each input variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub struct VariableRanges {
    pub w: Bounds,
    pub d: Bounds,
    #[serde(rename = "U")]
    pub u: Bounds,
    #[serde(rename = "Ustar")]
    pub ustar: Bounds,
}

impl Default for VariableRanges {
    /// Ranges spanned by the field measurements used in the literature.
    fn default() -> Self {
        let b = |lo, hi| Bounds { lo, hi };
        VariableRanges {
            w: b(0.20, 867.0),
            d: b(0.03, 19.94),
            u: b(0.03, 1.74),
            ustar: b(0.002, 0.553),
        }
    }
}

/// Synthetic data: inputs log-uniform within `ranges`; `Dl` from `model`
/// multiplied by exp(noise·z), z standard normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub model: ModelId,
    pub n: usize,
    pub noise: f64,
    pub seed: u64,
    pub ranges: VariableRanges,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            model: ModelId::EsrnFinal,
            n: 500,
            noise: 0.05,
            seed: 0,
            ranges: VariableRanges::default(),
        }
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, b: Bounds) -> f64 {
    if b.lo == b.hi {
        return b.lo;
    }
    let x = (b.lo.ln() + rng.random::<f64>() * (b.hi.ln() - b.lo.ln())).exp();
    x.clamp(b.lo, b.hi)
}

pub fn synthesize(spec: &SynthSpec) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let r = &spec.ranges;
    (0..spec.n)
        .map(|_| {
            let w = log_uniform(&mut rng, r.w);
            let d = log_uniform(&mut rng, r.d);
            let u = log_uniform(&mut rng, r.u);
            let ustar = log_uniform(&mut rng, r.ustar);
            let mut s = Sample::new(w, d, u, ustar, 0.0);
            let z: f64 = rng.sample(StandardNormal);
            s.dl = predict(spec.model, &s).dl;
            if spec.noise > 0.0 {
                s.dl *= (spec.noise * z).exp();
            }
            s
        })
        .collect()
}
