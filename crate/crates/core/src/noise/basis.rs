//! Enumeration of the real trigonometric basis on the frequency lattice.

use crate::scalar::Real;
use crate::spectral::Grid;

/// Flavor of a real basis mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    /// The normalized constant function `1/sqrt(V)`.
    Constant,
    /// `sqrt(2/V) * cos(xi . x)` for a canonical frequency.
    Cosine,
    /// `sqrt(2/V) * sin(xi . x)` for a canonical frequency.
    Sine,
}

impl ModeKind {
    fn rank(self) -> u8 {
        match self {
            ModeKind::Constant => 0,
            ModeKind::Cosine => 1,
            ModeKind::Sine => 2,
        }
    }
}

/// One real basis mode: integer frequency coordinates plus flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisMode {
    /// Integer frequency coordinates (axes beyond the grid dimension are 0).
    pub freq: [i64; 3],
    pub kind: ModeKind,
}

impl BasisMode {
    /// Integer squared frequency `|m|^2`.
    pub fn freq_sq_int(&self) -> i64 {
        self.freq.iter().map(|&m| m * m).sum()
    }
}

/// True when `m` is the canonical representative of the pair `{m, -m}`:
/// its first nonzero coordinate is positive.
fn is_canonical(m: &[i64; 3]) -> bool {
    for &mi in m {
        if mi > 0 {
            return true;
        }
        if mi < 0 {
            return false;
        }
    }
    false // the zero vector is handled as the constant mode
}

/// Enumerate every real basis mode inside the dealiasing band, sorted by
/// `(|m|^2, lexicographic frequency, constant < cosine < sine)`.
///
/// The cap at `|m_i| <= floor(N/3)` keeps all noise modes invariant under
/// the two-thirds filter; the Nyquist row can never appear.
pub fn enumerate_modes<T: Real>(grid: &Grid<T>) -> Vec<BasisMode> {
    let limit = grid.dealias_limit();
    let dim = grid.dim();
    let mut modes = vec![BasisMode {
        freq: [0, 0, 0],
        kind: ModeKind::Constant,
    }];

    let range = |axis: usize| -> std::ops::RangeInclusive<i64> {
        if axis < dim {
            -limit..=limit
        } else {
            0..=0
        }
    };
    for m0 in range(0) {
        for m1 in range(1) {
            for m2 in range(2) {
                let m = [m0, m1, m2];
                if m == [0, 0, 0] || !is_canonical(&m) {
                    continue;
                }
                modes.push(BasisMode {
                    freq: m,
                    kind: ModeKind::Cosine,
                });
                modes.push(BasisMode {
                    freq: m,
                    kind: ModeKind::Sine,
                });
            }
        }
    }
    modes.sort_by_key(|mode| {
        (
            mode.freq_sq_int(),
            mode.freq[0],
            mode.freq[1],
            mode.freq[2],
            mode.kind.rank(),
        )
    });
    modes
}
