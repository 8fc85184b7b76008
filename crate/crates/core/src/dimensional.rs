//! Buckingham-π candidate generation: dimensionless input groups from the
//! nullspace of the unit matrix, output normalizers from the bounded set of
//! exponent vectors reproducing the output's unit.

use std::fmt;

use indexmap::IndexMap;
use num_integer::Integer;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Sample;

#[derive(Debug, Error, PartialEq)]
pub enum DimensionError {
    #[error("output unit {0:?} is not a product of powers of the input units")]
    NotExpressible(Vec<i64>),
    #[error("no normalizer with exponents in [{lo}, {hi}] reproduces the output unit")]
    NoNormalizer { lo: i64, hi: i64 },
    #[error("unit vectors must all have {expected} base dimensions")]
    RaggedUnits { expected: usize },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
}

/// Exponents of one variable over the base dimensions.
pub type UnitVector = Vec<i64>;

/// Units of a problem's variables over a shared list of base dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitTable {
    pub dimensions: Vec<String>,
    /// Input variables with their units, in schema order.
    pub inputs: Vec<(String, UnitVector)>,
    pub output: (String, UnitVector),
}

impl UnitTable {
    /// Width, depth, mean and shear velocity over (L, T), with Dl in m²/s.
    pub fn ldc() -> Self {
        let v = |name: &str, l: i64, t: i64| (name.to_string(), vec![l, t]);
        UnitTable {
            dimensions: vec!["L".into(), "T".into()],
            inputs: vec![v("w", 1, 0), v("d", 1, 0), v("U", 1, -1), v("Ustar", 1, -1)],
            output: v("Dl", 2, -1),
        }
    }

    /// Dimensions × variables matrix of the inputs.
    pub fn matrix(&self) -> Vec<Vec<i64>> {
        (0..self.dimensions.len())
            .map(|r| self.inputs.iter().map(|(_, u)| u[r]).collect())
            .collect()
    }

    fn check(&self) -> Result<(), DimensionError> {
        let m = self.dimensions.len();
        if self.inputs.iter().any(|(_, u)| u.len() != m) || self.output.1.len() != m {
            return Err(DimensionError::RaggedUnits { expected: m });
        }
        Ok(())
    }

    pub fn unit_of(&self, name: &str) -> Option<&UnitVector> {
        if self.output.0 == name {
            return Some(&self.output.1);
        }
        self.inputs.iter().find(|(n, _)| n == name).map(|(_, u)| u)
    }
}

/// A dimensionless group ∏ xⱼ^eⱼ. Output groups carry the dependent variable
/// with exponent 1 and the normalizer with negated exponents, so that
/// `Dl/(d·U)` is `{"Dl":1,"d":-1,"U":-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiGroup {
    pub exponents: IndexMap<String, i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl PiGroup {
    /// The constant group `1`.
    pub fn constant() -> Self {
        PiGroup {
            exponents: IndexMap::new(),
            output: None,
        }
    }

    pub fn input(names: &[String], exponents: &[i64]) -> Self {
        PiGroup {
            exponents: names
                .iter()
                .zip(exponents)
                .filter(|(_, &e)| e != 0)
                .map(|(n, &e)| (n.clone(), e as i32))
                .collect(),
            output: None,
        }
    }

    /// `output / ∏ names^normalizer`.
    pub fn output(output: &str, names: &[String], normalizer: &[i64]) -> Self {
        let mut exponents = IndexMap::new();
        exponents.insert(output.to_string(), 1);
        for (n, &e) in names.iter().zip(normalizer) {
            if e != 0 {
                exponents.insert(n.clone(), -(e as i32));
            }
        }
        PiGroup {
            exponents,
            output: Some(output.to_string()),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn is_output(&self) -> bool {
        self.output.is_some()
    }

    /// Normalizer exponents of an output group (the exponents of ∏ xⱼ^pⱼ
    /// dividing the output), or the group's own exponents for an input group.
    pub fn normalizer(&self) -> IndexMap<String, i32> {
        match &self.output {
            Some(out) => self
                .exponents
                .iter()
                .filter(|(n, _)| *n != out)
                .map(|(n, &e)| (n.clone(), -e))
                .collect(),
            None => self.exponents.clone(),
        }
    }

    /// Value of the normalizer ∏ xⱼ^pⱼ at a sample (1 for input groups).
    pub fn normalizer_value(&self, sample: &Sample) -> f64 {
        if self.output.is_none() {
            return 1.0;
        }
        power_product(&self.normalizer(), sample)
    }

    /// Sum of `exponent × unit` over the group's variables.
    pub fn unit(&self, table: &UnitTable) -> Result<UnitVector, DimensionError> {
        let mut total = vec![0; table.dimensions.len()];
        for (name, &e) in &self.exponents {
            let u = table
                .unit_of(name)
                .ok_or_else(|| DimensionError::UnknownVariable(name.clone()))?;
            for (t, x) in total.iter_mut().zip(u) {
                *t += e as i64 * x;
            }
        }
        Ok(total)
    }

    fn fmt_side(f: &mut fmt::Formatter<'_>, factors: &[(&String, i32)]) -> fmt::Result {
        for (i, (name, e)) in factors.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            if *e == 1 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{name}^{e}")?;
            }
        }
        Ok(())
    }
}

fn power_product(exponents: &IndexMap<String, i32>, sample: &Sample) -> f64 {
    exponents
        .iter()
        .map(|(name, &e)| {
            let x = sample
                .value_of(name)
                .unwrap_or_else(|| panic!("sample has no variable `{name}`"));
            x.powi(e)
        })
        .product()
}

impl fmt::Display for PiGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_constant() {
            return f.write_str("1");
        }
        let num: Vec<(&String, i32)> = self.exponents.iter().filter(|(_, &e)| e > 0).map(|(n, &e)| (n, e)).collect();
        let den: Vec<(&String, i32)> = self.exponents.iter().filter(|(_, &e)| e < 0).map(|(n, &e)| (n, -e)).collect();
        if num.is_empty() {
            f.write_str("1")?;
        } else {
            PiGroup::fmt_side(f, &num)?;
        }
        match den.len() {
            0 => Ok(()),
            1 if den[0].1 == 1 => write!(f, "/{}", den[0].0),
            _ => {
                f.write_str("/(")?;
                PiGroup::fmt_side(f, &den)?;
                f.write_str(")")
            }
        }
    }
}

/// Value of a group at a sample: the product of variable powers.
pub fn evaluate_group(group: &PiGroup, sample: &Sample) -> f64 {
    power_product(&group.exponents, sample)
}

/// Dimensionless candidates: input groups (nullspace basis plus the constant)
/// and output groups (one per admissible normalizer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub inputs: Vec<PiGroup>,
    pub outputs: Vec<PiGroup>,
}

impl CandidateSet {
    /// Candidates for a unit table with normalizer exponents bounded to
    /// `[lo, hi]` per variable.
    pub fn from_units(table: &UnitTable, bounds: (i64, i64)) -> Result<Self, DimensionError> {
        table.check()?;
        let names: Vec<String> = table.inputs.iter().map(|(n, _)| n.clone()).collect();
        let matrix = table.matrix();
        let mut inputs: Vec<PiGroup> = nullspace_exponents(&matrix)
            .iter()
            .map(|v| PiGroup::input(&names, v))
            .collect();
        inputs.push(PiGroup::constant());
        let outputs = output_normalizers(&matrix, &table.output.1, bounds)?
            .iter()
            .map(|p| PiGroup::output(&table.output.0, &names, p))
            .collect();
        Ok(CandidateSet { inputs, outputs })
    }

    /// The river dispersion instance with the default {-1, 0, 1} bound.
    pub fn ldc() -> Self {
        CandidateSet::from_units(&UnitTable::ldc(), (-1, 1)).expect("LDC unit table is consistent")
    }
}

fn rat(x: i64) -> Rational64 {
    Rational64::from_integer(x)
}

/// Reduced row echelon form in place; returns the pivot columns.
fn rref(a: &mut [Vec<Rational64>]) -> Vec<usize> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| a[i][c] != rat(0)) else {
            continue;
        };
        a.swap(r, p);
        let lead = a[r][c];
        for x in a[r].iter_mut() {
            *x /= lead;
        }
        for i in 0..rows {
            if i != r && a[i][c] != rat(0) {
                let factor = a[i][c];
                for j in 0..cols {
                    let v = a[r][j];
                    a[i][j] -= factor * v;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Rational nullspace basis with a 1 in each free column.
fn rational_nullspace(matrix: &[Vec<i64>], n: usize) -> Vec<Vec<Rational64>> {
    let mut a: Vec<Vec<Rational64>> = matrix.iter().map(|row| row.iter().map(|&x| rat(x)).collect()).collect();
    let pivots = rref(&mut a);
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![rat(0); n];
            v[f] = rat(1);
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[row][f];
            }
            v
        })
        .collect()
}

/// Smallest integer multiple of a rational vector, leading entry positive.
fn primitive(v: &[Rational64]) -> Vec<i64> {
    let lcm = v.iter().fold(1i64, |acc, x| acc.lcm(x.denom()));
    let mut ints: Vec<i64> = v.iter().map(|x| (x * rat(lcm)).to_integer()).collect();
    let g = ints.iter().fold(0i64, |acc, &x| acc.gcd(&x));
    if g > 1 {
        ints.iter_mut().for_each(|x| *x /= g);
    }
    if ints.iter().find(|&&x| x != 0).is_some_and(|&x| x < 0) {
        ints.iter_mut().for_each(|x| *x = -*x);
    }
    ints
}

/// Integer basis of the exponent vectors making `∏ xⱼ^eⱼ` dimensionless.
/// `matrix` is dimensions × variables. A zero matrix yields the identity
/// basis (every variable is already dimensionless).
pub fn nullspace_exponents(matrix: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let n = matrix.first().map_or(0, Vec::len);
    rational_nullspace(matrix, n).iter().map(|v| primitive(v)).collect()
}

/// Every integer exponent vector `p` with all entries in `[lo, hi]` and
/// `matrix · p = output_unit`, in descending lexicographic order.
///
/// Solutions are enumerated on the lattice `p₀ + Σ cᵢ nᵢ` where `p₀` is the
/// particular solution with zero free variables and `nᵢ` the nullspace basis
/// with a unit free entry; `cᵢ` then equals the free exponent, so sweeping it
/// over `[lo, hi]` is exhaustive.
pub fn output_normalizers(
    matrix: &[Vec<i64>],
    output_unit: &[i64],
    (lo, hi): (i64, i64),
) -> Result<Vec<Vec<i64>>, DimensionError> {
    let n = matrix.first().map_or(0, Vec::len);
    let mut aug: Vec<Vec<Rational64>> = matrix
        .iter()
        .zip(output_unit)
        .map(|(row, &y)| row.iter().map(|&x| rat(x)).chain(std::iter::once(rat(y))).collect())
        .collect();
    let pivots = rref(&mut aug);
    if pivots.contains(&n) {
        return Err(DimensionError::NotExpressible(output_unit.to_vec()));
    }
    let mut particular = vec![rat(0); n];
    for (row, &pc) in pivots.iter().enumerate() {
        particular[pc] = aug[row][n];
    }
    let basis = rational_nullspace(matrix, n);

    let mut found = Vec::new();
    let mut coeffs = vec![lo; basis.len()];
    loop {
        let mut p = particular.clone();
        for (c, b) in coeffs.iter().zip(&basis) {
            for (x, y) in p.iter_mut().zip(b) {
                *x += rat(*c) * y;
            }
        }
        if p.iter().all(|x| x.is_integer() && (lo..=hi).contains(&x.to_integer())) {
            found.push(p.iter().map(Rational64::to_integer).collect::<Vec<_>>());
        }
        // odometer over the coefficient box
        let mut i = 0;
        loop {
            if i == coeffs.len() {
                found.sort_by(|a, b| b.cmp(a));
                found.dedup();
                return if found.is_empty() {
                    Err(DimensionError::NoNormalizer { lo, hi })
                } else {
                    Ok(found)
                };
            }
            if coeffs[i] < hi {
                coeffs[i] += 1;
                break;
            }
            coeffs[i] = lo;
            i += 1;
        }
    }
}
