//! Vertex weights of the stochastic higher spin six vertex model.
//!
//! The general-`J` weight `L^{(J)}_alpha(i1, j1; i2, j2)` is available by three
//! independent routes: the closed-form `4phi3` expression, fusion of a column of
//! `J = 1` vertices whose spectral parameters grow by `q` from bottom to top,
//! and the same fusion with the progression reversed. Exact agreement of the
//! three in rational arithmetic is the main identity suite of the crate.

use crate::error::{Error, Result};
use crate::qnum::{check_not_root_of_unity, q_pochhammer, q_pochhammer_signed, reg_phi_4_3, z_norm, Scalar};

/// Which stochasticity region the parameters fall in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StochasticBranch {
    /// `0 < q < 1` and `alpha < -q^{-I-J+1}`.
    SmallQ,
    /// `q > 1` and `-q^{-I-J+1} < alpha < 0`.
    LargeQ,
}

/// `(q, alpha, I, J)` with the derived `nu = q^{-I}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S> {
    q: S,
    alpha: S,
    nu: S,
    spin_i: usize,
    spin_j: usize,
}

impl<S: Scalar> ModelParams<S> {
    /// Builds parameters and requires the weights to be stochastic.
    pub fn new(q: S, alpha: S, spin_i: usize, spin_j: usize) -> Result<Self> {
        let p = Self::new_unchecked(q, alpha, spin_i, spin_j)?;
        p.stochastic_branch()?;
        Ok(p)
    }

    /// Builds parameters without the stochasticity requirement. The weights
    /// still sum to one along each row but may be negative.
    pub fn new_unchecked(q: S, alpha: S, spin_i: usize, spin_j: usize) -> Result<Self> {
        if spin_i == 0 || spin_j == 0 {
            return Err(Error::InvalidParameter(format!(
                "spins must be positive, got I={spin_i}, J={spin_j}"
            )));
        }
        if !q.is_positive() || q.is_one() {
            return Err(Error::InvalidParameter(format!(
                "q must be positive and different from 1, got {}",
                q.to_f64()
            )));
        }
        if (alpha.clone() + S::one()).is_zero() {
            return Err(Error::SingularParameter("alpha = -1".into()));
        }
        let nu = q.powi(-(spin_i as i64));
        Ok(Self {
            q,
            alpha,
            nu,
            spin_i,
            spin_j,
        })
    }

    pub fn q(&self) -> &S {
        &self.q
    }

    pub fn alpha(&self) -> &S {
        &self.alpha
    }

    pub fn nu(&self) -> &S {
        &self.nu
    }

    /// Maximal number of vertical lines through a vertex.
    pub fn spin_i(&self) -> usize {
        self.spin_i
    }

    /// Maximal number of horizontal lines through a vertex.
    pub fn spin_j(&self) -> usize {
        self.spin_j
    }

    /// `b1 = (alpha + nu) / (1 + alpha)`.
    pub fn b1(&self) -> S {
        (self.alpha.clone() + self.nu.clone()) / (S::one() + self.alpha.clone())
    }

    /// `b2 = (1 + alpha q^J) / (1 + alpha)`.
    pub fn b2(&self) -> S {
        (S::one() + self.alpha.clone() * self.q.powi(self.spin_j as i64)) / (S::one() + self.alpha.clone())
    }

    /// Checks the sufficient stochasticity condition and names the branch.
    pub fn stochastic_branch(&self) -> Result<StochasticBranch> {
        let threshold = self.q.powi(1 - (self.spin_i + self.spin_j) as i64);
        let neg = -threshold;
        if self.q < S::one() {
            if self.alpha < neg {
                Ok(StochasticBranch::SmallQ)
            } else {
                Err(Error::NotStochastic(format!(
                    "q = {} < 1 requires alpha < -q^(-I-J+1) = {}, got alpha = {}",
                    self.q.to_f64(),
                    neg.to_f64(),
                    self.alpha.to_f64()
                )))
            }
        } else if neg < self.alpha && self.alpha.is_negative() {
            Ok(StochasticBranch::LargeQ)
        } else {
            Err(Error::NotStochastic(format!(
                "q = {} > 1 requires -q^(-I-J+1) = {} < alpha < 0, got alpha = {}",
                self.q.to_f64(),
                neg.to_f64(),
                self.alpha.to_f64()
            )))
        }
    }

    fn check_config(&self, c: &VertexConfig) -> Result<()> {
        for (what, value, max) in [
            ("i1", c.i1, self.spin_i),
            ("j1", c.j1, self.spin_j),
            ("i2", c.i2, self.spin_i),
            ("j2", c.j2, self.spin_j),
        ] {
            if value > max {
                return Err(Error::OutOfRange {
                    what,
                    value: value as f64,
                    min: 0.0,
                    max: max as f64,
                });
            }
        }
        Ok(())
    }
}

/// Line counts at a vertex: vertical and horizontal in, vertical and horizontal out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VertexConfig {
    pub i1: usize,
    pub j1: usize,
    pub i2: usize,
    pub j2: usize,
}

impl VertexConfig {
    pub fn new(i1: usize, j1: usize, i2: usize, j2: usize) -> Self {
        Self { i1, j1, i2, j2 }
    }

    pub fn conserves_lines(&self) -> bool {
        self.i1 + self.j1 == self.i2 + self.j2
    }

    /// All configurations with `i1, i2 <= spin_i` and `j1, j2 <= spin_j`.
    pub fn all(spin_i: usize, spin_j: usize) -> impl Iterator<Item = VertexConfig> {
        (0..=spin_i).flat_map(move |i1| {
            (0..=spin_j).flat_map(move |j1| {
                (0..=spin_i).flat_map(move |i2| (0..=spin_j).map(move |j2| VertexConfig::new(i1, j1, i2, j2)))
            })
        })
    }
}

/// `J = 1` weight `L^{(1)}(m, j1; m2, j2)` with `alpha` replaced by `spectral`.
pub fn l1_weight<S: Scalar>(p: &ModelParams<S>, spectral: &S, m: usize, j1: usize, m2: usize, j2: usize) -> Result<S> {
    if m > p.spin_i {
        return Err(Error::OutOfRange {
            what: "m",
            value: m as f64,
            min: 0.0,
            max: p.spin_i as f64,
        });
    }
    let denom = S::one() + spectral.clone();
    if denom.is_zero() {
        return Err(Error::SingularParameter("spectral parameter equals -1".into()));
    }
    let qm = p.q.powi(m as i64);
    let num = match (j1, j2) {
        (0, 0) if m2 == m => S::one() + spectral.clone() * qm,
        (0, 1) if m2 + 1 == m => spectral.clone() * (S::one() - qm),
        (1, 1) if m2 == m => spectral.clone() + p.nu.clone() * qm,
        (1, 0) if m2 == m + 1 => S::one() - p.nu.clone() * qm,
        _ => return Ok(S::zero()),
    };
    Ok(num / denom)
}

/// Closed-form general-`J` weight via the regularized `4phi3` series.
pub fn lj_weight_hypergeom<S: Scalar>(p: &ModelParams<S>, c: &VertexConfig) -> Result<S> {
    p.check_config(c)?;
    if !c.conserves_lines() {
        return Ok(S::zero());
    }
    let (i1, j1, i2, j2) = (c.i1 as i64, c.j1 as i64, c.i2 as i64, c.j2 as i64);
    let jj = p.spin_j as i64;
    let q = &p.q;
    let alpha = &p.alpha;
    let nu = &p.nu;
    check_not_root_of_unity(q, (p.spin_i + p.spin_j).max(1))?;
    if alpha.is_zero() {
        return Err(Error::SingularParameter("alpha = 0".into()));
    }

    // Four times the q-exponent of the prefactor; an integer multiple of 4
    // whenever lines are conserved.
    let e4 = (2 * j1 - j1 * j1) - (2 * j2 - j2 * j2) + (i2 * i2 + i1 * i1) + 2 * (i2 * (j2 - 1) + i1 * j1);
    if e4 % 4 != 0 {
        return Err(Error::EvaluationFailure(format!("non-integral q exponent {e4}/4")));
    }

    let minus_alpha = -alpha.clone();
    let denom_alpha = q_pochhammer(&minus_alpha, q, (i2 + j2) as usize);
    if denom_alpha.is_zero() {
        return Err(Error::SingularParameter(format!(
            "(-alpha; q)_{} vanishes at alpha = {}",
            i2 + j2,
            alpha.to_f64()
        )));
    }
    let numer_poch = q_pochhammer_signed(&(minus_alpha.clone() / nu.clone()), q, j2 - i1)?;
    let j_poch = q_pochhammer_signed(&q.powi(jj + 1 - j1), q, j1 - j2)?;
    let qq = q_pochhammer(q, q, i2 as usize);

    let prefactor = q.powi(e4 / 4) * nu.powi(j1 - i2) * alpha.powi(j2 - j1 + i2) * numer_poch / (qq * denom_alpha * j_poch);

    let upper = [
        q.powi(-i1),
        minus_alpha.clone() * q.powi(jj),
        -(q.clone() * nu.clone() / alpha.clone()),
    ];
    let lower = [nu.clone(), q.powi(1 + j2 - i1), q.powi(jj + 1 - i2 - j2)];
    let series = reg_phi_4_3(i2 as usize, &upper, &lower, q, q)?;
    Ok(prefactor * series)
}

/// Direction in which spectral parameters progress along a fused column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralOrder {
    /// Vertex `k` (counted from the bottom, 1-based) has spectral parameter
    /// `alpha q^{k-1}`; a set input bit `k` carries weight `q^{k-1}`.
    BottomUp,
    /// Vertex `k` has spectral parameter `alpha q^{J-k}`; input bit `k`
    /// carries weight `q^{J-k}`.
    TopDown,
}

impl SpectralOrder {
    fn exponent(self, k: usize, j: usize) -> i64 {
        match self {
            SpectralOrder::BottomUp => (k - 1) as i64,
            SpectralOrder::TopDown => (j - k) as i64,
        }
    }
}

/// Full output row `(i2, j2) -> weight` of a fused column, indexed as
/// `i2 * (J + 1) + j2`. `input_weight(bits)` gives the weight assigned to an
/// input bit-string with `bits[k-1]` the horizontal line entering vertex `k`.
#[allow(clippy::needless_range_loop)]
pub fn fused_row_with<S, F>(p: &ModelParams<S>, i1: usize, j1: usize, order: SpectralOrder, input_weight: F) -> Result<Vec<S>>
where
    S: Scalar,
    F: Fn(&[bool]) -> S,
{
    let (ni, nj) = (p.spin_i, p.spin_j);
    if i1 > ni || j1 > nj {
        return Err(Error::OutOfRange {
            what: "row input",
            value: (if i1 > ni { i1 } else { j1 }) as f64,
            min: 0.0,
            max: (if i1 > ni { ni } else { nj }) as f64,
        });
    }
    // Per-vertex J = 1 tables: weight[k][v][in_bit][out_bit].
    let mut tables = Vec::with_capacity(nj);
    for k in 1..=nj {
        let spectral = p.alpha.clone() * p.q.powi(order.exponent(k, nj));
        let mut t = vec![[[S::zero(), S::zero()], [S::zero(), S::zero()]]; ni + 1];
        for (v, slot) in t.iter_mut().enumerate() {
            for hin in 0..2 {
                for hout in 0..2 {
                    let v2 = (v + hin).checked_sub(hout);
                    if let Some(v2) = v2.filter(|&v2| v2 <= ni) {
                        slot[hin][hout] = l1_weight(p, &spectral, v, hin, v2, hout)?;
                    }
                }
            }
        }
        tables.push(t);
    }

    let width = nj + 1;
    let mut row = vec![S::zero(); (ni + 1) * width];
    let mut bits = vec![false; nj];
    for mask in 0u64..(1u64 << nj) {
        if mask.count_ones() as usize != j1 {
            continue;
        }
        for (k, b) in bits.iter_mut().enumerate() {
            *b = mask >> k & 1 == 1;
        }
        let lambda = input_weight(&bits);
        if lambda.is_zero() {
            continue;
        }
        // state[v * width + s]: vertical count v after the current vertex,
        // s horizontal lines emitted so far.
        let mut state = vec![S::zero(); (ni + 1) * width];
        state[i1 * width] = lambda;
        for (k, table) in tables.iter().enumerate() {
            let hin = bits[k] as usize;
            let mut next = vec![S::zero(); (ni + 1) * width];
            for v in 0..=ni {
                for s in 0..=k {
                    let w = &state[v * width + s];
                    if w.is_zero() {
                        continue;
                    }
                    for hout in 0..2 {
                        let Some(v2) = (v + hin).checked_sub(hout).filter(|&v2| v2 <= ni) else {
                            continue;
                        };
                        let t = &table[v][hin][hout];
                        if t.is_zero() {
                            continue;
                        }
                        let idx = v2 * width + s + hout;
                        next[idx] = next[idx].clone() + w.clone() * t.clone();
                    }
                }
            }
            state = next;
        }
        for (acc, s) in row.iter_mut().zip(state) {
            *acc = acc.clone() + s;
        }
    }
    Ok(row)
}

/// Normalized fusion weight of an input bit-string: `q^e / Z_J(j1)`, with
/// `e` the sum of the exponents of the set bits under `order`.
pub fn fusion_input_weight<S: Scalar>(p: &ModelParams<S>, j1: usize, order: SpectralOrder) -> Result<impl Fn(&[bool]) -> S> {
    let norm = z_norm(p.spin_j, j1, &p.q)?;
    let q = p.q.clone();
    let nj = p.spin_j;
    Ok(move |bits: &[bool]| {
        let e: i64 = bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| order.exponent(k + 1, nj))
            .sum();
        q.powi(e) / norm.clone()
    })
}

/// Output row of the fused column with the standard fusion input weights.
pub fn fused_row<S: Scalar>(p: &ModelParams<S>, i1: usize, j1: usize, order: SpectralOrder) -> Result<Vec<S>> {
    let lambda = fusion_input_weight(p, j1, order)?;
    fused_row_with(p, i1, j1, order, lambda)
}

fn fused_weight<S: Scalar>(p: &ModelParams<S>, c: &VertexConfig, order: SpectralOrder) -> Result<S> {
    p.check_config(c)?;
    if !c.conserves_lines() {
        return Ok(S::zero());
    }
    let row = fused_row(p, c.i1, c.j1, order)?;
    Ok(row[c.i2 * (p.spin_j + 1) + c.j2].clone())
}

/// General-`J` weight by fusion with spectral parameters `alpha q^{k-1}`.
pub fn lj_weight_fused<S: Scalar>(p: &ModelParams<S>, c: &VertexConfig) -> Result<S> {
    fused_weight(p, c, SpectralOrder::BottomUp)
}

/// General-`J` weight by fusion with the spectral progression reversed.
pub fn lj_weight_fused_reversed<S: Scalar>(p: &ModelParams<S>, c: &VertexConfig) -> Result<S> {
    fused_weight(p, c, SpectralOrder::TopDown)
}

/// How [`row_distribution_with`] evaluates weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightRoute {
    Hypergeometric,
    Fused,
    FusedReversed,
}

/// Admissible outputs of a vertex with inputs `(i1, j1)` and their
/// probabilities, in increasing `i2`.
pub fn row_distribution_with<S: Scalar>(
    p: &ModelParams<S>,
    i1: usize,
    j1: usize,
    route: WeightRoute,
) -> Result<Vec<((usize, usize), S)>> {
    let total = i1 + j1;
    let width = p.spin_j + 1;
    let row = match route {
        WeightRoute::Fused => Some(fused_row(p, i1, j1, SpectralOrder::BottomUp)?),
        WeightRoute::FusedReversed => Some(fused_row(p, i1, j1, SpectralOrder::TopDown)?),
        WeightRoute::Hypergeometric => None,
    };
    let mut out = Vec::new();
    for i2 in total.saturating_sub(p.spin_j)..=total.min(p.spin_i) {
        let j2 = total - i2;
        let w = match &row {
            Some(row) => row[i2 * width + j2].clone(),
            None => lj_weight_hypergeom(p, &VertexConfig::new(i1, j1, i2, j2))?,
        };
        if !w.is_zero() {
            out.push(((i2, j2), w));
        }
    }
    Ok(out)
}

/// [`row_distribution_with`] on the fused route. Fusion only adds and
/// multiplies nonnegative `J = 1` weights, so it is also the numerically
/// stable choice in binary64.
pub fn row_distribution<S: Scalar>(p: &ModelParams<S>, i1: usize, j1: usize) -> Result<Vec<((usize, usize), S)>> {
    row_distribution_with(p, i1, j1, WeightRoute::Fused)
}

/// Precomputed cumulative output distributions for every input pair.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    spin_i: usize,
    spin_j: usize,
    rows: Vec<Vec<(u32, u32, f64)>>,
}

impl TransitionTable {
    pub fn new(p: &ModelParams<f64>) -> Result<Self> {
        p.stochastic_branch()?;
        let mut rows = Vec::with_capacity((p.spin_i + 1) * (p.spin_j + 1));
        for i1 in 0..=p.spin_i {
            for j1 in 0..=p.spin_j {
                let dist = row_distribution(p, i1, j1)?;
                let mut acc = 0.0;
                let mut cum = Vec::with_capacity(dist.len());
                for ((i2, j2), w) in dist {
                    if w < 0.0 {
                        return Err(Error::NotStochastic(format!("negative weight {w} at ({i1},{j1};{i2},{j2})")));
                    }
                    acc += w;
                    cum.push((i2 as u32, j2 as u32, acc));
                }
                if let Some(last) = cum.last_mut() {
                    last.2 = f64::INFINITY;
                }
                rows.push(cum);
            }
        }
        Ok(Self {
            spin_i: p.spin_i,
            spin_j: p.spin_j,
            rows,
        })
    }

    pub fn spin_i(&self) -> usize {
        self.spin_i
    }

    pub fn spin_j(&self) -> usize {
        self.spin_j
    }

    /// Output `(i2, j2)` selected by a uniform draw `u` in `[0, 1)`.
    #[inline]
    pub fn draw(&self, i1: u32, j1: u32, u: f64) -> (u32, u32) {
        let row = &self.rows[i1 as usize * (self.spin_j + 1) + j1 as usize];
        for &(i2, j2, c) in row {
            if u < c {
                return (i2, j2);
            }
        }
        unreachable!("last cumulative entry is infinite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qnum::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn params(q: Rational, alpha: Rational, i: usize, j: usize) -> ModelParams<Rational> {
        ModelParams::new(q, alpha, i, j).unwrap()
    }

    #[test]
    fn l1_examples() {
        let p = params(r(2, 1), r(-1, 4), 1, 1);
        let a = p.alpha().clone();
        assert_eq!(l1_weight(&p, &a, 0, 0, 0, 0).unwrap(), r(1, 1));
        assert_eq!(l1_weight(&p, &a, 1, 0, 1, 0).unwrap(), r(2, 3));
        // nu q^I = 1 kills the overflow transition.
        assert_eq!(l1_weight(&p, &a, 1, 1, 2, 0).unwrap(), r(0, 1));
        assert!(l1_weight(&p, &r(-1, 1), 0, 0, 0, 0).is_err());
    }

    #[test]
    fn l1_rows_sum_to_one() {
        let p = params(r(3, 2), r(-1, 5), 3, 1);
        for spectral in [r(-1, 5), r(7, 3), r(-9, 2)] {
            for m in 0..=3 {
                for j1 in 0..2 {
                    let mut sum = r(0, 1);
                    for m2 in 0..=4 {
                        for j2 in 0..2 {
                            sum += l1_weight(&p, &spectral, m, j1, m2, j2).unwrap();
                        }
                    }
                    assert_eq!(sum, r(1, 1));
                }
            }
        }
    }

    #[test]
    fn hypergeom_reduces_to_j1() {
        for (q, alpha) in [(r(2, 1), r(-1, 16)), (r(1, 3), r(-50, 1))] {
            for i in 1..=3 {
                let p = params(q.clone(), alpha.clone(), i, 1);
                for c in VertexConfig::all(i, 1) {
                    let direct = l1_weight(&p, p.alpha(), c.i1, c.j1, c.i2, c.j2).unwrap();
                    assert_eq!(lj_weight_hypergeom(&p, &c).unwrap(), direct, "{c:?}");
                    assert_eq!(lj_weight_fused(&p, &c).unwrap(), direct, "{c:?}");
                    assert_eq!(lj_weight_fused_reversed(&p, &c).unwrap(), direct, "{c:?}");
                }
            }
        }
    }

    #[test]
    fn three_routes_agree_at_q2() {
        for i in 1..=3 {
            for j in 1..=3 {
                let p = params(r(2, 1), r(-1, 64), i, j);
                for c in VertexConfig::all(i, j) {
                    let h = lj_weight_hypergeom(&p, &c).unwrap();
                    assert_eq!(h, lj_weight_fused(&p, &c).unwrap(), "I={i} J={j} {c:?}");
                    assert_eq!(h, lj_weight_fused_reversed(&p, &c).unwrap(), "I={i} J={j} {c:?}");
                }
            }
        }
    }

    #[test]
    fn reversal_two_site_four_term_sum() {
        // h = h' = 1, J = 2: both fusion orders equal the common four-term sum.
        let (q, alpha) = (r(5, 2), r(-1, 40));
        let p = params(q.clone(), alpha.clone(), 3, 2);
        let nu = p.nu().clone();
        let one = r(1, 1);
        for v in 1..=2usize {
            let qv = q.powi(v as i64);
            let terms = q.clone() * (alpha.clone() * q.clone() + nu.clone() * qv.clone()) * (one.clone() + alpha.clone() * qv.clone())
                + q.clone() * alpha.clone() * (one.clone() - nu.clone() * qv.clone()) * (one.clone() - qv.clone() * q.clone())
                + alpha.clone() * q.clone() * (one.clone() - qv.clone()) * (one.clone() - nu.clone() * q.powi(v as i64 - 1))
                + (one.clone() + alpha.clone() * q.powi(v as i64 + 1)) * (alpha.clone() + nu.clone() * qv.clone());
            let denom = (one.clone() + q.clone()) * (one.clone() + alpha.clone()) * (one.clone() + alpha.clone() * q.clone());
            let expected = terms / denom;
            let c = VertexConfig::new(v, 1, v, 1);
            assert_eq!(lj_weight_fused(&p, &c).unwrap(), expected);
            assert_eq!(lj_weight_fused_reversed(&p, &c).unwrap(), expected);
        }
    }

    #[test]
    fn conservation_and_range_errors() {
        let p = params(r(2, 1), r(-1, 64), 2, 2);
        let c = VertexConfig::new(1, 1, 1, 0);
        assert_eq!(lj_weight_hypergeom(&p, &c).unwrap(), r(0, 1));
        assert_eq!(lj_weight_fused(&p, &c).unwrap(), r(0, 1));
        assert!(lj_weight_fused(&p, &VertexConfig::new(3, 0, 3, 0)).is_err());
    }

    #[test]
    fn hypergeom_rejects_pole() {
        // alpha = -q^{-1} makes (-alpha; q)_{i2+j2} vanish once i2 + j2 >= 2.
        let p = ModelParams::new_unchecked(r(2, 1), r(-1, 2), 1, 2).unwrap();
        let err = lj_weight_hypergeom(&p, &VertexConfig::new(1, 1, 1, 1)).unwrap_err();
        assert!(matches!(err, Error::SingularParameter(_)), "{err:?}");
    }

    #[test]
    fn stochastic_branches() {
        assert_eq!(
            params(r(2, 1), r(-1, 64), 3, 3).stochastic_branch().unwrap(),
            StochasticBranch::LargeQ
        );
        assert_eq!(
            params(r(1, 2), r(-64, 1), 3, 3).stochastic_branch().unwrap(),
            StochasticBranch::SmallQ
        );
        // -q^{-5} = -1/32 is the boundary at q = 2, I = J = 3.
        let err = ModelParams::new(r(2, 1), r(-1, 32), 3, 3).unwrap_err();
        assert!(matches!(err, Error::NotStochastic(ref m) if m.contains("q = 2 > 1")));
        let err = ModelParams::new(r(1, 2), r(-1, 1) + r(1, 3), 1, 1).unwrap_err();
        assert!(matches!(err, Error::NotStochastic(ref m) if m.contains("< 1")));
    }

    #[test]
    fn row_distribution_edges() {
        let p = params(r(3, 1), r(-1, 200), 2, 3);
        assert_eq!(row_distribution(&p, 0, 0).unwrap(), vec![((0, 0), r(1, 1))]);
        assert_eq!(row_distribution(&p, 2, 3).unwrap(), vec![((2, 3), r(1, 1))]);
        for i1 in 0..=2 {
            for j1 in 0..=3 {
                for route in [WeightRoute::Hypergeometric, WeightRoute::Fused, WeightRoute::FusedReversed] {
                    let row = row_distribution_with(&p, i1, j1, route).unwrap();
                    let total = row.iter().fold(r(0, 1), |a, (_, w)| a + w.clone());
                    assert_eq!(total, r(1, 1));
                    assert!(row.iter().all(|((i2, j2), w)| i2 + j2 == i1 + j1 && *w > r(0, 1)));
                }
            }
        }
    }

    #[test]
    fn float_rows_sum_to_one() {
        let p = ModelParams::new(1.013_f64, -0.45, 3, 3).unwrap();
        for i1 in 0..=3 {
            for j1 in 0..=3 {
                let total: f64 = row_distribution(&p, i1, j1).unwrap().iter().map(|(_, w)| w).sum();
                assert!((total - 1.0).abs() <= 1e-14, "{total}");
            }
        }
    }

    #[test]
    fn transition_table_draws() {
        let p = ModelParams::new(2.0_f64, -0.25, 1, 1).unwrap();
        let t = TransitionTable::new(&p).unwrap();
        assert_eq!(t.draw(0, 0, 0.999), (0, 0));
        // (1,0): turn with probability 1/3 (listed first), stay with 2/3.
        assert_eq!(t.draw(1, 0, 0.3), (0, 1));
        assert_eq!(t.draw(1, 0, 0.34), (1, 0));
    }
}
