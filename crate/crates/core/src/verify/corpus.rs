//! Seeded test functions: dyadic indicators, tents and trigonometric bumps,
//! all nonnegative and supported in `[-L/2, L/2]^n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Grid, GridFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusKind {
    /// Indicator of a box whose corners sit on the `L/8` lattice.
    Indicator,
    /// `max(0, 1 - |x - c|_∞ / r)`.
    Tent,
    /// `∏ cos²(π (x_i - c_i) / (2r))` on `|x - c|_∞ < r`.
    Bump,
}

const KINDS: [CorpusKind; 3] = [CorpusKind::Indicator, CorpusKind::Tent, CorpusKind::Bump];

/// One corpus function drawn from `rng`.
pub fn corpus_function(grid: &Grid, kind: CorpusKind, rng: &mut impl Rng) -> Result<GridFunction> {
    let n = grid.dim();
    let l = grid.half_width();
    let half = l / 2.0;
    match kind {
        CorpusKind::Indicator => {
            // corners on multiples of L/8 inside [-L/2, L/2]
            let step = l / 8.0;
            let mut lo = vec![0.0; n];
            let mut hi = vec![0.0; n];
            for axis in 0..n {
                let a = rng.gen_range(0..8usize);
                let b = rng.gen_range(a + 1..=8usize);
                lo[axis] = -half + a as f64 * step;
                hi[axis] = -half + b as f64 * step;
            }
            let height = rng.gen_range(0.5..2.0);
            GridFunction::from_fn(grid, |x| {
                let inside = (0..n).all(|i| x[i] >= lo[i] && x[i] < hi[i]);
                if inside {
                    height
                } else {
                    0.0
                }
            })
        }
        CorpusKind::Tent | CorpusKind::Bump => {
            let r = rng.gen_range(0.1 * l..0.25 * l);
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-half + r..half - r)).collect();
            let height = rng.gen_range(0.5..2.0);
            let is_tent = kind == CorpusKind::Tent;
            GridFunction::from_fn(grid, |x| {
                let d = (0..n).map(|i| (x[i] - c[i]).abs()).fold(0.0, f64::max);
                if d >= r {
                    0.0
                } else if is_tent {
                    height * (1.0 - d / r)
                } else {
                    height
                        * (0..n)
                            .map(|i| (std::f64::consts::FRAC_PI_2 * (x[i] - c[i]) / r).cos().powi(2))
                            .product::<f64>()
                }
            })
        }
    }
}

/// `size` tuples of `m` functions. Tuple `k` mixes kinds in rotation, so
/// every kind appears in every slot once `size ≥ 3`.
pub fn corpus(grid: &Grid, m: usize, size: usize, seed: u64) -> Result<Vec<Vec<GridFunction>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..size)
        .map(|k| {
            (0..m)
                .map(|i| corpus_function(grid, KINDS[(k + i) % KINDS.len()], &mut rng))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supported_in_half_box_and_nonnegative() {
        let g = Grid::new(1, 2.0, 64).unwrap();
        for tuple in corpus(&g, 2, 12, 7).unwrap() {
            for f in tuple {
                assert!(f.is_nonnegative());
                assert!(!f.is_zero());
                for (i, v) in f.values().iter().enumerate() {
                    if g.coord(i).abs() > 1.0 {
                        assert_eq!(*v, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn seeded() {
        let g = Grid::new(2, 1.0, 16).unwrap();
        assert_eq!(corpus(&g, 2, 4, 3).unwrap(), corpus(&g, 2, 4, 3).unwrap());
        assert_ne!(corpus(&g, 2, 4, 3).unwrap(), corpus(&g, 2, 4, 4).unwrap());
    }
}
