//! Synthetic stand-in for a clinical FH cohort.
//!
//! Each sample gets a latent risk: a weighted sum of the standardized
//! informative features (the first `n_informative` columns) plus Gaussian
//! noise. Weight magnitudes decay geometrically, so `ldl_c` dominates the way
//! the LDL criterion dominates a real Dutch score. Samples are ranked by risk and dealt into the four classes by exact
//! quotas (largest-remainder rounding of `n_samples · prior`), lowest risk
//! first. The Dutch score is then placed inside the class band by the
//! sample's rank within its class, so score order follows risk order and
//! the thresholds recover the quota labels exactly.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::table::{Cell, ColumnSpec, RawTable};
use crate::error::{Error, Result};
use crate::label::FHLabel;
use crate::numeric::Matrix;

/// Class priors of the synthetic cohort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassPriors {
    pub definite: f64,
    pub probable: f64,
    pub possible: f64,
    pub unlikely: f64,
}

impl Default for ClassPriors {
    fn default() -> Self {
        Self {
            definite: 0.029,
            probable: 0.064,
            possible: 0.402,
            unlikely: 0.505,
        }
    }
}

impl ClassPriors {
    /// Priors indexed by [`FHLabel::index`].
    pub fn by_index(&self) -> [f64; 4] {
        [self.unlikely, self.possible, self.probable, self.definite]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub class_priors: ClassPriors,
    pub n_informative: usize,
    /// Magnitude ratio between consecutive informative weights: weight `j`
    /// is `±ratio^j` before normalization. 1 gives equal weights.
    pub weight_ratio: f64,
    /// Standard deviation of the risk noise; the informative signal has unit variance.
    pub noise_scale: f64,
    /// Per-column missing fraction; empty means no missing values.
    pub missing_rates: Vec<f64>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_samples: 1591,
            n_features: 50,
            class_priors: ClassPriors::default(),
            n_informative: 10,
            weight_ratio: 0.5,
            noise_scale: 0.1,
            missing_rates: Vec::new(),
            seed: 0,
        }
    }
}

fn spec_err(field: &str, message: impl Into<String>) -> Error {
    Error::Spec {
        field: field.into(),
        message: message.into(),
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let p = self.class_priors.by_index();
        if p.iter().any(|&v| !(v >= 0.0)) {
            return Err(spec_err("class_priors", "priors must be non-negative"));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(spec_err("class_priors", format!("priors sum to {total}, expected 1")));
        }
        if self.n_samples == 0 {
            return Err(spec_err("n_samples", "must be at least 1"));
        }
        if self.n_features == 0 {
            return Err(spec_err("n_features", "must be at least 1"));
        }
        if self.n_informative == 0 || self.n_informative > self.n_features {
            return Err(spec_err("n_informative", "must lie in 1..=n_features"));
        }
        if !(self.weight_ratio > 0.0 && self.weight_ratio <= 1.0) {
            return Err(spec_err("weight_ratio", "must lie in (0, 1]"));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(spec_err("noise_scale", "must be >= 0"));
        }
        if !self.missing_rates.is_empty() && self.missing_rates.len() != self.n_features {
            return Err(spec_err("missing_rates", "needs one rate per feature column"));
        }
        if self.missing_rates.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
            return Err(spec_err("missing_rates", "rates must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Class counts by [`FHLabel::index`] (largest-remainder rounding).
    pub fn class_quotas(&self) -> [usize; 4] {
        quotas(self.n_samples, &self.class_priors.by_index())
    }
}

/// Largest-remainder apportionment of `n` over `weights` (which sum to 1).
/// Remainder ties go to the lower index.
pub fn quotas(n: usize, weights: &[f64; 4]) -> [usize; 4] {
    let exact: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut out = [0usize; 4];
    for (o, e) in out.iter_mut().zip(&exact) {
        *o = e.floor() as usize;
    }
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        out[i] += 1;
    }
    out
}

#[derive(Debug, Clone)]
enum Kind {
    Binary { levels: [&'static str; 2], p: f64 },
    Graded { levels: [&'static str; 3], probs: [f64; 3] },
    Marker { center: f64, spread: f64 },
}

const FLAG: [&str; 2] = ["no", "yes"];

/// Name and kind of column `i`. The first sixteen mimic clinical attributes;
/// the rest are generic flags, grades and markers in the same 5-periodic mix.
fn column_template(i: usize) -> (String, Kind) {
    let named: Option<(&str, Kind)> = match i {
        0 => Some(("ldl_c", Kind::Marker { center: 4.2, spread: 1.3 })),
        1 => Some(("corneal_arcus", Kind::Binary { levels: FLAG, p: 0.25 })),
        2 => Some(("total_cholesterol", Kind::Marker { center: 6.1, spread: 1.4 })),
        3 => Some((
            "family_history",
            Kind::Graded {
                levels: ["none", "second_degree", "first_degree"],
                probs: [0.5, 0.3, 0.2],
            },
        )),
        4 => Some(("triglycerides", Kind::Marker { center: 1.7, spread: 0.8 })),
        5 => Some(("xanthelasma", Kind::Binary { levels: FLAG, p: 0.15 })),
        6 => Some(("hdl_c", Kind::Marker { center: 1.3, spread: 0.35 })),
        7 => Some(("age", Kind::Marker { center: 48.0, spread: 14.0 })),
        8 => Some((
            "cardiovascular_disease",
            Kind::Graded {
                levels: ["none", "suspected", "confirmed"],
                probs: [0.6, 0.25, 0.15],
            },
        )),
        9 => Some(("fasting_blood_glucose", Kind::Marker { center: 5.4, spread: 1.1 })),
        10 => Some(("myocardial_infarction", Kind::Binary { levels: FLAG, p: 0.1 })),
        11 => Some(("weight", Kind::Marker { center: 78.0, spread: 15.0 })),
        12 => Some(("bmi", Kind::Marker { center: 27.0, spread: 4.5 })),
        13 => Some((
            "smoking",
            Kind::Graded {
                levels: ["never", "former", "current"],
                probs: [0.55, 0.25, 0.2],
            },
        )),
        14 => Some(("systolic_bp", Kind::Marker { center: 128.0, spread: 16.0 })),
        15 => Some((
            "gender",
            Kind::Binary {
                levels: ["female", "male"],
                p: 0.48,
            },
        )),
        _ => None,
    };
    if let Some((name, kind)) = named {
        return (name.to_string(), kind);
    }
    match i % 5 {
        0 => (format!("flag_{i:02}"), Kind::Binary { levels: FLAG, p: 0.3 }),
        3 => (
            format!("grade_{i:02}"),
            Kind::Graded {
                levels: ["low", "mid", "high"],
                probs: [0.4, 0.35, 0.25],
            },
        ),
        _ => (format!("marker_{i:02}"), Kind::Marker { center: 0.0, spread: 1.0 }),
    }
}

impl Kind {
    fn spec(&self, name: &str) -> ColumnSpec {
        match self {
            Kind::Binary { levels, .. } => ColumnSpec::categorical(name, levels.iter().copied()),
            Kind::Graded { levels, .. } => ColumnSpec::categorical(name, levels.iter().copied()),
            Kind::Marker { .. } => ColumnSpec::continuous(name),
        }
    }

    /// Draws a cell and its standardized signal.
    fn draw(&self, rng: &mut ChaCha8Rng) -> (Cell, f64) {
        match self {
            Kind::Binary { levels, p } => {
                let on = rng.random::<f64>() < *p;
                let z = (f64::from(u8::from(on)) - p) / (p * (1.0 - p)).sqrt();
                (Cell::Category(levels[usize::from(on)].to_string()), z)
            }
            Kind::Graded { levels, probs } => {
                let u: f64 = rng.random();
                let k = if u < probs[0] {
                    0
                } else if u < probs[0] + probs[1] {
                    1
                } else {
                    2
                };
                let mean = probs[1] + 2.0 * probs[2];
                let var = probs[1] + 4.0 * probs[2] - mean * mean;
                (Cell::Category(levels[k].to_string()), (k as f64 - mean) / var.sqrt())
            }
            Kind::Marker { center, spread } => {
                let z: f64 = StandardNormal.sample(rng);
                (Cell::Number(center + spread * z), z)
            }
        }
    }
}

/// Synthetic cohort plus the latent quantities it was built from.
#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub table: RawTable,
    /// Risk weight of each informative column (the first `n_informative`).
    pub weights: Vec<f64>,
    pub risk: Vec<f64>,
}

pub fn generate_synthetic_cohort(spec: &SyntheticSpec) -> Result<RawTable> {
    Ok(generate_synthetic_cohort_detailed(spec)?.table)
}

pub fn generate_synthetic_cohort_detailed(spec: &SyntheticSpec) -> Result<SyntheticCohort> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let templates: Vec<(String, Kind)> = (0..spec.n_features).map(column_template).collect();
    let columns: Vec<ColumnSpec> = templates.iter().map(|(n, k)| k.spec(n)).collect();

    // weights ±ratio^j, normalized so the signal has unit variance
    let mut weights: Vec<f64> = (0..spec.n_informative)
        .map(|j| {
            let mag = spec.weight_ratio.powi(j as i32);
            if j == 0 || rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    weights.iter_mut().for_each(|w| *w /= norm);

    let n = spec.n_samples;
    let mut rows = Vec::with_capacity(n);
    let mut risk = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::with_capacity(spec.n_features);
        let mut r = 0.0;
        for (j, (_, kind)) in templates.iter().enumerate() {
            let (cell, z) = kind.draw(&mut rng);
            if j < spec.n_informative {
                r += weights[j] * z;
            }
            row.push(cell);
        }
        let noise: f64 = StandardNormal.sample(&mut rng);
        risk.push(r + spec.noise_scale * noise);
        rows.push(row);
    }

    let counts = spec.class_quotas();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| risk[a].total_cmp(&risk[b]).then(a.cmp(&b)));
    const BANDS: [(f64, f64); 4] = [(0.0, 3.0), (3.0, 5.0), (5.0, 8.0), (8.0, 12.0)];
    let mut scores = vec![0.0; n];
    let mut start = 0;
    for (class, &count) in counts.iter().enumerate() {
        let (lo, hi) = BANDS[class];
        for (k, &i) in order[start..start + count].iter().enumerate() {
            scores[i] = lo + (hi - lo) * (k as f64 + 0.5) / count as f64;
        }
        start += count;
    }

    for (j, &rate) in spec.missing_rates.iter().enumerate() {
        let k = (rate * n as f64).round() as usize;
        for i in sample(&mut rng, n, k.min(n)) {
            rows[i][j] = Cell::Missing;
        }
    }

    let table = RawTable::new(columns, rows)?.with_scores(scores)?;
    Ok(SyntheticCohort {
        table,
        weights,
        risk,
    })
}

/// A small, cleanly separable four-class fixture: each class has a random
/// ±2 prototype over the first `n_informative` columns, plus N(0, 0.3²)
/// jitter everywhere. Labels are balanced and interleaved.
pub fn generate_separable_fixture(
    n_per_class: usize,
    n_features: usize,
    n_informative: usize,
    seed: u64,
) -> Result<(Matrix, Vec<FHLabel>)> {
    if n_informative == 0 || n_informative > n_features {
        return Err(spec_err("n_informative", "must lie in 1..=n_features"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prototypes: Vec<Vec<f64>> = (0..4)
        .map(|_| {
            (0..n_informative)
                .map(|_| if rng.random::<bool>() { 2.0 } else { -2.0 })
                .collect()
        })
        .collect();
    let mut data = Vec::with_capacity(4 * n_per_class * n_features);
    let mut labels = Vec::with_capacity(4 * n_per_class);
    for i in 0..4 * n_per_class {
        let class = i % 4;
        for j in 0..n_features {
            let jitter: f64 = StandardNormal.sample(&mut rng);
            let base = if j < n_informative { prototypes[class][j] } else { 0.0 };
            data.push(base + 0.3 * jitter);
        }
        labels.push(FHLabel::ALL[class]);
    }
    Ok((Matrix::from_vec(4 * n_per_class, n_features, data)?, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_quotas() {
        let counts = SyntheticSpec::default().class_quotas();
        // indices: Unlikely, Possible, Probable, Definite
        assert_eq!(counts, [803, 640, 102, 46]);
    }

    #[test]
    fn labels_follow_quotas_exactly() {
        let spec = SyntheticSpec {
            n_samples: 400,
            seed: 3,
            ..Default::default()
        };
        let t = generate_synthetic_cohort(&spec).unwrap();
        let mut counts = [0usize; 4];
        for l in t.labels().unwrap() {
            counts[l.index()] += 1;
        }
        assert_eq!(counts, spec.class_quotas());
    }

    #[test]
    fn injected_missing_rates_are_exact_counts() {
        let mut rates = vec![0.0; 20];
        rates[2] = 0.1;
        rates[7] = 0.033;
        let spec = SyntheticSpec {
            n_samples: 300,
            n_features: 20,
            n_informative: 5,
            missing_rates: rates,
            ..Default::default()
        };
        let t = generate_synthetic_cohort(&spec).unwrap();
        let missing = |j: usize| t.rows.iter().filter(|r| r[j].is_missing()).count();
        assert_eq!(missing(2), 30);
        assert_eq!(missing(7), 10);
        assert_eq!(missing(0), 0);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = SyntheticSpec::default();
        spec.class_priors.definite = 0.5;
        assert!(matches!(spec.validate(), Err(Error::Spec { ref field, .. }) if field == "class_priors"));
        let spec = SyntheticSpec {
            n_informative: 51,
            ..Default::default()
        };
        assert!(spec.validate().is_err());
    }
}
