//! Sequential sampling of the stochastic path ensemble on a rectangle and its
//! height function.

use std::io::{self, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_range, Error, Result};
use crate::weights::{ModelParams, TransitionTable};

/// Seeded counter-based random stream. Identical seeds give identical
/// sequences on every platform.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream of replica `r`: seeded with `base_seed ^ r`.
    pub fn for_replica(base_seed: u64, replica: u64) -> Self {
        Self::new(base_seed ^ replica)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw from `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Line counts entering the rectangle: `v_bottom[x]` from below at `(x, 0)`,
/// `h_left[y]` from the left at `(0, y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryCondition {
    pub v_bottom: Vec<u32>,
    pub h_left: Vec<u32>,
}

impl BoundaryCondition {
    pub fn validate(&self, spin_i: usize, spin_j: usize, x_len: usize, y_len: usize) -> Result<()> {
        if self.v_bottom.len() < x_len || self.h_left.len() < y_len {
            return Err(Error::InvalidParameter(format!(
                "boundary covers {}x{} but the rectangle is {x_len}x{y_len}",
                self.v_bottom.len(),
                self.h_left.len()
            )));
        }
        for &v in &self.v_bottom[..x_len] {
            check_range("v_bottom", v as f64, 0.0, spin_i as f64)?;
        }
        for &h in &self.h_left[..y_len] {
            check_range("h_left", h as f64, 0.0, spin_j as f64)?;
        }
        Ok(())
    }
}

/// Boundary families.
#[derive(Clone, Copy)]
pub enum BoundaryKind<'a> {
    /// No vertical lines from below, `J` lines entering every row.
    Packed,
    Empty,
    /// Each of the `I` (resp. `J`) slots is occupied independently.
    Bernoulli { rho_v: f64, rho_h: f64 },
    /// Rounds macroscopic height profiles: `H(x, 0) ~ L chi(x / L)` and
    /// `H(0, y) ~ L psi(y / L)`, with `chi(0) = psi(0) = 0`.
    FromProfile {
        chi: &'a dyn Fn(f64) -> f64,
        psi: &'a dyn Fn(f64) -> f64,
    },
}

/// Size and scale of the boundary to build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryDims {
    pub spin_i: usize,
    pub spin_j: usize,
    pub x_len: usize,
    pub y_len: usize,
    /// Macroscopic scale `L`; only used by [`BoundaryKind::FromProfile`].
    pub scale: f64,
}

const PROFILE_SLACK: f64 = 1e-9;

/// Greedy rounding of cumulative targets into increments in `[0, max]`.
fn round_increments(len: usize, max: u32, target: impl Fn(usize) -> f64, what: &str) -> Result<Vec<u32>> {
    let mut out = Vec::with_capacity(len);
    let mut prev_target = target(0);
    if prev_target.abs() > PROFILE_SLACK {
        return Err(Error::BoundaryMismatch(format!("{what} profile must vanish at the origin")));
    }
    let mut sum: i64 = 0;
    for k in 0..len {
        let t = target(k + 1);
        let step = t - prev_target;
        if !(step >= -PROFILE_SLACK && step <= max as f64 + PROFILE_SLACK) {
            return Err(Error::InvalidParameter(format!(
                "{what} profile increment {step} at {k} is outside [0, {max}]"
            )));
        }
        let next = (t.round() as i64).clamp(sum, sum + max as i64);
        out.push((next - sum) as u32);
        sum = next;
        prev_target = t;
    }
    Ok(out)
}

pub fn make_boundary(kind: BoundaryKind<'_>, dims: BoundaryDims, rng: Option<&mut RngStream>) -> Result<BoundaryCondition> {
    let BoundaryDims {
        spin_i,
        spin_j,
        x_len,
        y_len,
        scale,
    } = dims;
    match kind {
        BoundaryKind::Packed => Ok(BoundaryCondition {
            v_bottom: vec![0; x_len],
            h_left: vec![spin_j as u32; y_len],
        }),
        BoundaryKind::Empty => Ok(BoundaryCondition {
            v_bottom: vec![0; x_len],
            h_left: vec![0; y_len],
        }),
        BoundaryKind::Bernoulli { rho_v, rho_h } => {
            check_range("rho_v", rho_v, 0.0, 1.0)?;
            check_range("rho_h", rho_h, 0.0, 1.0)?;
            let rng = rng.ok_or_else(|| Error::InvalidParameter("bernoulli boundary needs a random stream".into()))?;
            let mut count = |slots: usize, rho: f64| (0..slots).filter(|_| rng.uniform() < rho).count() as u32;
            let v_bottom = (0..x_len).map(|_| count(spin_i, rho_v)).collect();
            let h_left = (0..y_len).map(|_| count(spin_j, rho_h)).collect();
            Ok(BoundaryCondition { v_bottom, h_left })
        }
        BoundaryKind::FromProfile { chi, psi } => {
            if scale.is_nan() || scale <= 0.0 {
                return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
            }
            // Cumulative vertical lines up to column x is -H(x, 0).
            let v_bottom = round_increments(x_len, spin_i as u32, |x| -scale * chi(x as f64 / scale), "chi")?;
            let h_left = round_increments(y_len, spin_j as u32, |y| scale * psi(y as f64 / scale), "psi")?;
            Ok(BoundaryCondition { v_bottom, h_left })
        }
    }
}

/// Integer heights on `[0, X] x [0, Y]`, stored row-major by `y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeightField {
    x_len: usize,
    y_len: usize,
    data: Vec<i32>,
}

impl HeightField {
    pub fn from_raw(x_len: usize, y_len: usize, data: Vec<i32>) -> Result<Self> {
        if data.len() != (x_len + 1) * (y_len + 1) {
            return Err(Error::InvalidParameter(format!(
                "height data has {} entries, expected {}",
                data.len(),
                (x_len + 1) * (y_len + 1)
            )));
        }
        Ok(Self { x_len, y_len, data })
    }

    pub fn x_len(&self) -> usize {
        self.x_len
    }

    pub fn y_len(&self) -> usize {
        self.y_len
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> i32 {
        self.data[y * (self.x_len + 1) + x]
    }

    pub fn values(&self) -> &[i32] {
        &self.data
    }

    /// Checks `H(0,0) = 0`, `0 <= H(x,y) - H(x+1,y) <= I` and
    /// `0 <= H(x,y+1) - H(x,y) <= J`.
    pub fn check_invariants(&self, spin_i: usize, spin_j: usize) -> Result<()> {
        if self.get(0, 0) != 0 {
            return Err(Error::EvaluationFailure("H(0,0) != 0".into()));
        }
        for y in 0..=self.y_len {
            for x in 0..=self.x_len {
                if x < self.x_len {
                    let d = self.get(x, y) - self.get(x + 1, y);
                    if d < 0 || d as usize > spin_i {
                        return Err(Error::EvaluationFailure(format!("horizontal step {d} at ({x},{y})")));
                    }
                }
                if y < self.y_len {
                    let d = self.get(x, y + 1) - self.get(x, y);
                    if d < 0 || d as usize > spin_j {
                        return Err(Error::EvaluationFailure(format!("vertical step {d} at ({x},{y})")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Rows `x,y,H` with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,y,H")?;
        for y in 0..=self.y_len {
            for x in 0..=self.x_len {
                writeln!(w, "{x},{y},{}", self.get(x, y))?;
            }
        }
        Ok(())
    }

    /// `X` and `Y` as little-endian `u32`, then the `(X+1)(Y+1)` heights as
    /// little-endian `i32`, row-major by `y`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        let dim = |n: usize| u32::try_from(n).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "dimension exceeds u32"));
        w.write_all(&dim(self.x_len)?.to_le_bytes())?;
        w.write_all(&dim(self.y_len)?.to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> io::Result<Self> {
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let x_len = u32::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let y_len = u32::from_le_bytes(word) as usize;
        let n = (x_len + 1)
            .checked_mul(y_len + 1)
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "dimensions overflow"))?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut word)?;
            data.push(i32::from_le_bytes(word));
        }
        Ok(Self { x_len, y_len, data })
    }
}

/// Height at a real point: linear interpolation in `x` on the two bracketing
/// rows, then linear interpolation in `y`.
pub fn height_interpolate(f: &HeightField, x: f64, y: f64) -> Result<f64> {
    check_range("x", x, 0.0, f.x_len as f64)?;
    check_range("y", y, 0.0, f.y_len as f64)?;
    let bracket = |t: f64, len: usize| -> (usize, usize, f64) {
        if len == 0 {
            return (0, 0, 0.0);
        }
        let lo = (t.floor() as usize).min(len - 1);
        (lo, lo + 1, t - lo as f64)
    };
    let (x0, x1, tx) = bracket(x, f.x_len);
    let (y0, y1, ty) = bracket(y, f.y_len);
    let row = |yy: usize| f.get(x0, yy) as f64 * (1.0 - tx) + f.get(x1, yy) as f64 * tx;
    Ok(row(y0) * (1.0 - ty) + row(y1) * ty)
}

/// Samples the path ensemble for fixed parameters; reusable across replicas.
#[derive(Debug, Clone)]
pub struct Sampler {
    table: TransitionTable,
}

impl Sampler {
    pub fn new(p: &ModelParams<f64>) -> Result<Self> {
        Ok(Self {
            table: TransitionTable::new(p)?,
        })
    }

    pub fn table(&self) -> &TransitionTable {
        &self.table
    }

    /// Updates vertices `(x, y)`, `0 <= x < X`, `0 <= y < Y`, along
    /// anti-diagonals `x + y = d` (decreasing `x` within a diagonal), one
    /// uniform draw per vertex.
    pub fn sample(&self, b: &BoundaryCondition, x_len: usize, y_len: usize, rng: &mut RngStream) -> Result<HeightField> {
        b.validate(self.table.spin_i(), self.table.spin_j(), x_len, y_len)?;
        if x_len == 0 || y_len == 0 {
            return Err(Error::InvalidParameter("rectangle must have positive size".into()));
        }
        let mut col_v: Vec<u32> = b.v_bottom[..x_len].to_vec();
        let mut row_h: Vec<u32> = b.h_left[..y_len].to_vec();
        // vertical[x * (Y + 1) + y]: lines entering (x, y) from below.
        let stride = y_len + 1;
        let mut vertical = vec![0u32; x_len * stride];
        for d in 0..(x_len + y_len - 1) {
            let x_hi = d.min(x_len - 1);
            let x_lo = d.saturating_sub(y_len - 1);
            for x in (x_lo..=x_hi).rev() {
                let y = d - x;
                let (vin, hin) = (col_v[x], row_h[y]);
                vertical[x * stride + y] = vin;
                let (vout, hout) = self.table.draw(vin, hin, rng.uniform());
                col_v[x] = vout;
                row_h[y] = hout;
            }
        }
        for (x, &v) in col_v.iter().enumerate() {
            vertical[x * stride + y_len] = v;
        }

        let width = x_len + 1;
        let mut data = vec![0i32; width * (y_len + 1)];
        for y in 0..=y_len {
            let base = y * width;
            if y > 0 {
                data[base] = data[base - width] + b.h_left[y - 1] as i32;
            }
            for x in 0..x_len {
                data[base + x + 1] = data[base + x] - vertical[x * stride + y] as i32;
            }
        }
        HeightField::from_raw(x_len, y_len, data)
    }
}

/// One-shot convenience around [`Sampler`].
pub fn sample_quadrant(
    p: &ModelParams<f64>,
    b: &BoundaryCondition,
    x_len: usize,
    y_len: usize,
    rng: &mut RngStream,
) -> Result<HeightField> {
    Sampler::new(p)?.sample(b, x_len, y_len, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::l1_weight;
    use proptest::prelude::*;

    fn dims(spin_i: usize, spin_j: usize, n: usize) -> BoundaryDims {
        BoundaryDims {
            spin_i,
            spin_j,
            x_len: n,
            y_len: n,
            scale: n as f64,
        }
    }

    fn params(i: usize, j: usize) -> ModelParams<f64> {
        ModelParams::new(1.5, -0.05, i, j).unwrap()
    }

    #[test]
    fn empty_boundary_gives_zero_field() {
        let p = params(2, 3);
        let b = make_boundary(BoundaryKind::Empty, dims(2, 3, 12), None).unwrap();
        let f = sample_quadrant(&p, &b, 12, 12, &mut RngStream::new(3)).unwrap();
        assert!(f.values().iter().all(|&h| h == 0));
    }

    #[test]
    fn packed_boundary_edges() {
        let p = params(2, 3);
        let b = make_boundary(BoundaryKind::Packed, dims(2, 3, 4), None).unwrap();
        assert_eq!(b.h_left, vec![3, 3, 3, 3]);
        let f = sample_quadrant(&p, &b, 4, 4, &mut RngStream::new(9)).unwrap();
        for y in 0..=4 {
            assert_eq!(f.get(0, y), 3 * y as i32);
        }
        for x in 0..=4 {
            assert_eq!(f.get(x, 0), 0);
        }
        f.check_invariants(2, 3).unwrap();
    }

    #[test]
    fn same_seed_same_field() {
        let p = params(3, 2);
        let mut seed_rng = RngStream::new(1);
        let b = make_boundary(BoundaryKind::Bernoulli { rho_v: 0.4, rho_h: 0.6 }, dims(3, 2, 30), Some(&mut seed_rng)).unwrap();
        let a = sample_quadrant(&p, &b, 30, 25, &mut RngStream::new(77)).unwrap();
        let c = sample_quadrant(&p, &b, 30, 25, &mut RngStream::new(77)).unwrap();
        assert_eq!(a, c);
        let d = sample_quadrant(&p, &b, 30, 25, &mut RngStream::new(78)).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn rejects_bad_boundary() {
        let p = params(1, 1);
        let b = BoundaryCondition {
            v_bottom: vec![2, 0],
            h_left: vec![0, 0],
        };
        assert!(sample_quadrant(&p, &b, 2, 2, &mut RngStream::new(0)).is_err());
        let short = BoundaryCondition {
            v_bottom: vec![0],
            h_left: vec![0, 0],
        };
        assert!(sample_quadrant(&p, &short, 2, 2, &mut RngStream::new(0)).is_err());
    }

    #[test]
    fn from_profile_matches_packed() {
        let zero = |_: f64| 0.0;
        let lin = |y: f64| 2.0 * y;
        let b = make_boundary(BoundaryKind::FromProfile { chi: &zero, psi: &lin }, dims(1, 2, 16), None).unwrap();
        assert_eq!(b, make_boundary(BoundaryKind::Packed, dims(1, 2, 16), None).unwrap());
        let steep = |x: f64| -3.0 * x;
        assert!(make_boundary(BoundaryKind::FromProfile { chi: &steep, psi: &lin }, dims(1, 2, 16), None).is_err());
    }

    #[test]
    fn interpolation() {
        let f = HeightField::from_raw(2, 1, vec![0, -1, -2, 1, 0, -2]).unwrap();
        assert_eq!(height_interpolate(&f, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(height_interpolate(&f, 0.5, 0.0).unwrap(), -0.5);
        assert_eq!(height_interpolate(&f, 2.0, 0.5).unwrap(), -2.0);
        assert_eq!(height_interpolate(&f, 0.5, 0.5).unwrap(), 0.0);
        assert!(height_interpolate(&f, 2.5, 0.0).is_err());
        let zero = HeightField::from_raw(3, 3, vec![0; 16]).unwrap();
        assert_eq!(height_interpolate(&zero, 1.3, 2.7).unwrap(), 0.0);
    }

    #[test]
    fn binary_and_csv_layout() {
        let f = HeightField::from_raw(1, 1, vec![0, -1, 2, 1]).unwrap();
        let mut bin = Vec::new();
        f.write_binary(&mut bin).unwrap();
        assert_eq!(bin.len(), 8 + 16);
        assert_eq!(&bin[..8], &[1, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(HeightField::read_binary(&bin[..]).unwrap(), f);
        let mut csv = Vec::new();
        f.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "x,y,H\n0,0,0\n1,0,-1\n0,1,2\n1,1,1\n");
    }

    #[test]
    fn six_vertex_single_step_frequencies() {
        // One vertex with inputs (v, h) = (1, 0): turn probability alpha(1-q)/(1+alpha).
        let p = ModelParams::new(2.0, -0.25, 1, 1).unwrap();
        let sampler = Sampler::new(&p).unwrap();
        let turn = l1_weight(&p, p.alpha(), 1, 0, 0, 1).unwrap();
        let b = BoundaryCondition {
            v_bottom: vec![1],
            h_left: vec![0],
        };
        let mut rng = RngStream::new(2024);
        let n = 100_000;
        let mut turns = 0usize;
        for _ in 0..n {
            let f = sampler.sample(&b, 1, 1, &mut rng).unwrap();
            // A turning line leaves to the right: H(1,1) = H(0,1) - 0.
            if f.get(1, 1) == 0 {
                turns += 1;
            }
        }
        let freq = turns as f64 / n as f64;
        let sigma = (turn * (1.0 - turn) / n as f64).sqrt();
        assert!((freq - turn).abs() <= 3.0 * sigma, "{freq} vs {turn}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn sampled_fields_are_monotone_lipschitz(
            seed in any::<u64>(),
            spin_i in 1usize..=4,
            spin_j in 1usize..=4,
            rho_v in 0.0f64..=1.0,
            rho_h in 0.0f64..=1.0,
            x_len in 1usize..20,
            y_len in 1usize..20,
        ) {
            let p = ModelParams::new(1.2, -0.01, spin_i, spin_j).unwrap();
            let mut rng = RngStream::new(seed);
            let d = BoundaryDims { spin_i, spin_j, x_len, y_len, scale: 1.0 };
            let b = make_boundary(BoundaryKind::Bernoulli { rho_v, rho_h }, d, Some(&mut rng)).unwrap();
            let f = sample_quadrant(&p, &b, x_len, y_len, &mut rng).unwrap();
            prop_assert!(f.check_invariants(spin_i, spin_j).is_ok());
            // Lines crossing the bottom-right staircase: entering minus
            // leaving through the top equals leaving through the right.
            let entering: i32 = b.v_bottom.iter().map(|&v| v as i32).sum::<i32>() + b.h_left.iter().map(|&h| h as i32).sum::<i32>();
            let top = f.get(0, y_len) - f.get(x_len, y_len);
            let right = f.get(x_len, y_len) - f.get(x_len, 0);
            prop_assert_eq!(entering, top + right);
        }

        #[test]
        fn profile_rounding_tracks_target(slopes in proptest::collection::vec(0.0f64..=3.0, 1..6), n in 4usize..64) {
            let k = slopes.len();
            let knots: Vec<(f64, f64)> = std::iter::once((0.0, 0.0))
                .chain((1..=k).scan(0.0, |acc, i| { *acc -= slopes[i - 1] / k as f64; Some((i as f64 / k as f64, *acc)) }))
                .collect();
            let chi = crate::profile::PiecewiseLinear::new(knots).unwrap();
            let chi_f = |x: f64| chi.value(x);
            let psi_f = |y: f64| y;
            let d = BoundaryDims { spin_i: 3, spin_j: 1, x_len: n, y_len: n, scale: n as f64 };
            let b = make_boundary(BoundaryKind::FromProfile { chi: &chi_f, psi: &psi_f }, d, None).unwrap();
            let mut cum = 0.0;
            for (x, &v) in b.v_bottom.iter().enumerate() {
                cum += v as f64;
                let target = -(n as f64) * chi.value((x + 1) as f64 / n as f64);
                prop_assert!((cum - target).abs() <= 1.0, "x={} cum={} target={}", x, cum, target);
            }
        }
    }
}
