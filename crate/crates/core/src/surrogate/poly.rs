//! Least-squares polynomial baselines in the normalized kinematics.

use crate::datagen::DatasetRow;
use crate::error::{Error, Result};
use crate::gait::{Axis, Material};

use super::{ForwardModel, InputNorm, ModelBody, Target};

pub const MAX_DEGREE: usize = 5;

/// Exponent tuple `[f, stroke, pitch, spo]`.
pub type Exponents = [u8; 4];

/// Every monomial of total degree `<= degree`, ordered by total degree and
/// then by descending exponent of the earlier axis.
pub fn monomials(degree: usize) -> Vec<Exponents> {
    let mut out = Vec::new();
    for total in 0..=degree as u8 {
        for a in (0..=total).rev() {
            for b in (0..=total - a).rev() {
                for c in (0..=total - a - b).rev() {
                    out.push([a, b, c, total - a - b - c]);
                }
            }
        }
    }
    out
}

pub fn monomial_name(e: &Exponents) -> String {
    let parts: Vec<String> = Axis::ALL
        .iter()
        .zip(e)
        .filter(|(_, &k)| k > 0)
        .map(|(axis, &k)| {
            if k == 1 {
                axis.name().to_string()
            } else {
                format!("{}^{k}", axis.name())
            }
        })
        .collect();
    if parts.is_empty() {
        "1".to_string()
    } else {
        parts.join("*")
    }
}

pub(crate) fn parse_monomial(s: &str) -> Result<Exponents> {
    let mut e = [0u8; 4];
    if s == "1" {
        return Ok(e);
    }
    for factor in s.split('*') {
        let (name, power) = match factor.split_once('^') {
            Some((n, p)) => (
                n,
                p.parse::<u8>()
                    .map_err(|_| Error::input(format!("bad exponent in monomial '{s}'")))?,
            ),
            None => (factor, 1),
        };
        let axis: Axis = name.parse()?;
        e[axis.index()] += power;
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialModel {
    pub degree: usize,
    pub terms: Vec<Exponents>,
    pub coeffs: Vec<f64>,
}

impl PolynomialModel {
    pub fn eval(&self, u: &[f64; 4]) -> f64 {
        let mut pows = [[1.0; MAX_DEGREE + 1]; 4];
        for (axis, p) in pows.iter_mut().enumerate() {
            for k in 1..=self.degree {
                p[k] = p[k - 1] * u[axis];
            }
        }
        self.terms
            .iter()
            .zip(&self.coeffs)
            .map(|(e, c)| {
                c * pows[0][e[0] as usize]
                    * pows[1][e[1] as usize]
                    * pows[2][e[2] as usize]
                    * pows[3][e[3] as usize]
            })
            .sum()
    }

    pub fn term_names(&self) -> Vec<String> {
        self.terms.iter().map(monomial_name).collect()
    }
}

/// What to do with monomials that are linear combinations of earlier ones
/// on the training design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    /// Fail with [`Error::RankDeficient`].
    Strict,
    /// Drop them and fit the remaining terms.
    Prune,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyFitOptions {
    pub degeneracy: Degeneracy,
    /// A column is degenerate when its norm after orthogonalization falls
    /// below this fraction of its original norm.
    pub rank_tol: f64,
    pub norm: InputNorm,
}

impl Default for PolyFitOptions {
    fn default() -> Self {
        PolyFitOptions {
            degeneracy: Degeneracy::Strict,
            rank_tol: 1e-8,
            norm: InputNorm::default(),
        }
    }
}

impl PolyFitOptions {
    pub fn prune() -> Self {
        PolyFitOptions {
            degeneracy: Degeneracy::Prune,
            ..Default::default()
        }
    }
}

/// Strict fit: any degenerate monomial is an error.
pub fn fit_polynomial(train: &[DatasetRow], degree: usize, target: Target) -> Result<ForwardModel> {
    fit_polynomial_with(train, degree, target, &PolyFitOptions::default())
}

pub fn fit_polynomial_with(
    train: &[DatasetRow],
    degree: usize,
    target: Target,
    opts: &PolyFitOptions,
) -> Result<ForwardModel> {
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(Error::input(format!("polynomial degree must be 1..={MAX_DEGREE}, got {degree}")));
    }
    opts.norm.validate()?;
    let material = single_material(train)?;
    let candidates = monomials(degree);
    if train.len() < candidates.len() {
        return Err(Error::input(format!(
            "degree {degree} needs at least {} training rows, got {}",
            candidates.len(),
            train.len()
        )));
    }

    // A canonical row order makes the fit independent of how rows arrive.
    let mut rows: Vec<([f64; 4], f64)> = train
        .iter()
        .map(|r| (opts.norm.apply(&r.gait), target.of(r)))
        .collect();
    rows.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.total_cmp(&b.1))
    });

    let n = rows.len();
    let column = |e: &Exponents| -> Vec<f64> {
        rows.iter()
            .map(|(u, _)| (0..4).map(|i| u[i].powi(e[i] as i32)).product())
            .collect()
    };

    // Incremental modified Gram-Schmidt with one re-orthogonalization pass.
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut r: Vec<Vec<f64>> = Vec::new(); // r[j][i] for i <= j
    let mut kept: Vec<Exponents> = Vec::new();
    let mut degenerate: Vec<Exponents> = Vec::new();
    for e in &candidates {
        let mut v = column(e);
        let norm0 = dot(&v, &v).sqrt();
        let mut rcol = vec![0.0; q.len() + 1];
        for _pass in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let proj = dot(qi, &v);
                rcol[i] += proj;
                for (vk, qk) in v.iter_mut().zip(qi) {
                    *vk -= proj * qk;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm0 == 0.0 || norm <= opts.rank_tol * norm0 {
            degenerate.push(*e);
            continue;
        }
        for vk in &mut v {
            *vk /= norm;
        }
        rcol[q.len()] = norm;
        q.push(v);
        r.push(rcol);
        kept.push(*e);
    }
    if !degenerate.is_empty() && opts.degeneracy == Degeneracy::Strict {
        return Err(Error::RankDeficient {
            monomials: degenerate.iter().map(monomial_name).collect(),
        });
    }

    let y: Vec<f64> = rows.iter().map(|(_, t)| *t).collect();
    let qty: Vec<f64> = q.iter().map(|qi| dot(qi, &y)).collect();
    let m = kept.len();
    let mut coeffs = vec![0.0; m];
    for j in (0..m).rev() {
        let mut s = qty[j];
        for k in j + 1..m {
            s -= r[k][j] * coeffs[k];
        }
        coeffs[j] = s / r[j][j];
    }

    let poly = PolynomialModel {
        degree,
        terms: kept,
        coeffs,
    };
    let mae = rows
        .iter()
        .map(|(u, t)| (poly.eval(u) - t).abs())
        .sum::<f64>()
        / n as f64;
    Ok(ForwardModel {
        target,
        material,
        norm: opts.norm,
        body: ModelBody::Polynomial(poly),
        train_mae: Some(mae),
        holdout_mae: None,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn single_material(rows: &[DatasetRow]) -> Result<Material> {
    let first = rows
        .first()
        .ok_or_else(|| Error::input("no training rows"))?
        .material;
    if let Some(other) = rows.iter().find(|r| r.material != first) {
        return Err(Error::input(format!(
            "training rows mix materials {} and {}",
            first.name(),
            other.material.name()
        )));
    }
    Ok(first)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait::Gait;
    use crate::surrogate::predict_avg;
    use proptest::prelude::*;

    fn row(g: Gait, t: f64) -> DatasetRow {
        DatasetRow {
            material: Material::Rigid,
            gait: g,
            voltage: 4.98,
            thrust_avg: t,
            power_avg: 0.0,
            trace_ref: None,
        }
    }

    fn scattered(n: usize, surface: impl Fn(&Gait) -> f64) -> Vec<DatasetRow> {
        // Low-discrepancy points so every axis has many distinct levels.
        (0..n)
            .map(|i| {
                let x = i as f64;
                let g = Gait::new(
                    0.75 + 1.25 * (x * 0.618_033_988_7).fract(),
                    55.0 * (x * 0.414_213_562_3).fract(),
                    55.0 * (x * 0.732_050_807_6).fract(),
                    -22.5 + 67.5 * (x * 0.236_067_977_5).fract(),
                );
                row(g, surface(&g))
            })
            .collect()
    }

    #[test]
    fn monomial_counts_match_binomials() {
        // C(d + 4, 4)
        for (d, n) in [(1, 5), (2, 15), (3, 35), (4, 70), (5, 126)] {
            assert_eq!(monomials(d).len(), n);
        }
        assert_eq!(monomials(1)[0], [0, 0, 0, 0]);
    }

    #[test]
    fn monomial_names_roundtrip() {
        for e in monomials(4) {
            assert_eq!(parse_monomial(&monomial_name(&e)).unwrap(), e);
        }
        assert_eq!(monomial_name(&[2, 1, 0, 0]), "f^2*stroke");
    }

    #[test]
    fn constant_target_fits_exactly() {
        let rows = scattered(40, |_| 1.75);
        let m = fit_polynomial(&rows, 1, Target::Thrust).unwrap();
        assert!(m.train_mae.unwrap() < 1e-12);
        for g in [Gait::new(1.0, 10.0, 10.0, 0.0), Gait::new(2.0, 1.0, 1.0, 45.0)] {
            assert!((predict_avg(&m, &g) - 1.75).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_quadratic_is_recovered() {
        let norm = InputNorm::default();
        let surface = move |g: &Gait| {
            let u = norm.apply(g);
            0.3 - 1.2 * u[0] + 0.7 * u[1] * u[2] + 0.25 * u[3] * u[3] - 0.4 * u[0] * u[3]
        };
        let rows = scattered(60, surface);
        let m = fit_polynomial(&rows, 2, Target::Thrust).unwrap();
        for r in &rows {
            assert!((predict_avg(&m, &r.gait) - r.thrust_avg).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_levels_is_rank_deficient() {
        // Three spo levels cannot support spo^3.
        let mut rows = Vec::new();
        for (i, f) in [0.75, 1.0, 1.5, 1.75, 2.0].iter().enumerate() {
            for s in [0.0, 15.0, 32.5, 40.0, 55.0] {
                for p in [0.0, 15.0, 32.0, 38.0, 55.0] {
                    for d in [-22.5, 22.5, 45.0] {
                        rows.push(row(Gait::new(*f, s, p, d), i as f64 + s * 0.01));
                    }
                }
            }
        }
        match fit_polynomial(&rows, 4, Target::Thrust) {
            Err(Error::RankDeficient { monomials }) => {
                assert!(monomials.contains(&"spo^3".to_string()));
                assert!(monomials.contains(&"spo^4".to_string()));
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        let pruned = fit_polynomial_with(&rows, 4, Target::Thrust, &PolyFitOptions::prune()).unwrap();
        let names = match &pruned.body {
            ModelBody::Polynomial(p) => p.term_names(),
            _ => unreachable!(),
        };
        assert!(!names.contains(&"spo^3".to_string()));
        assert!(names.contains(&"spo^2".to_string()));
    }

    #[test]
    fn rejects_bad_degree_and_short_data() {
        let rows = scattered(10, |_| 0.0);
        assert!(fit_polynomial(&rows, 0, Target::Thrust).is_err());
        assert!(fit_polynomial(&rows, 6, Target::Thrust).is_err());
        assert!(matches!(fit_polynomial(&rows, 2, Target::Thrust), Err(Error::Input(_))));
    }

    #[test]
    fn training_rows_are_within_training_mae_on_average() {
        let rows = scattered(80, |g| (g.frequency * g.stroke_amp / 30.0).sin());
        let m = fit_polynomial(&rows, 3, Target::Thrust).unwrap();
        let mae = m.train_mae.unwrap();
        let recomputed: f64 = rows
            .iter()
            .map(|r| (predict_avg(&m, &r.gait) - r.thrust_avg).abs())
            .sum::<f64>()
            / rows.len() as f64;
        assert!((mae - recomputed).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn fit_is_invariant_to_row_order(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let rows = scattered(50, |g| g.frequency * g.pitch_amp.sqrt() - 0.01 * g.spo);
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = fit_polynomial(&rows, 2, Target::Thrust).unwrap();
            let b = fit_polynomial(&shuffled, 2, Target::Thrust).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
