//! Search windows, per-shift score surfaces and extremum selection, shared by
//! the correlation and SAD matchers.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("search window bounds are inverted: u [{u_min}, {u_max}], v [{v_min}, {v_max}]")]
    InvalidWindow {
        u_min: i32,
        u_max: i32,
        v_min: i32,
        v_max: i32,
    },
    #[error("every shift in the surface is invalid")]
    AllShiftsInvalid,
}

/// Inclusive shift bounds: horizontal `u`, vertical `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchWindow {
    pub u_min: i32,
    pub u_max: i32,
    pub v_min: i32,
    pub v_max: i32,
}

impl SearchWindow {
    pub fn new(u_min: i32, u_max: i32, v_min: i32, v_max: i32) -> Result<Self, ScoreError> {
        if u_min > u_max || v_min > v_max {
            return Err(ScoreError::InvalidWindow {
                u_min,
                u_max,
                v_min,
                v_max,
            });
        }
        Ok(Self {
            u_min,
            u_max,
            v_min,
            v_max,
        })
    }

    /// Symmetric window `[-radius_u, radius_u] x [-radius_v, radius_v]`.
    pub fn symmetric(radius_u: u32, radius_v: u32) -> Self {
        Self {
            u_min: -(radius_u as i32),
            u_max: radius_u as i32,
            v_min: -(radius_v as i32),
            v_max: radius_v as i32,
        }
    }

    #[inline]
    pub fn u_count(&self) -> usize {
        (self.u_max - self.u_min) as usize + 1
    }

    #[inline]
    pub fn v_count(&self) -> usize {
        (self.v_max - self.v_min) as usize + 1
    }

    /// Total number of shifts in the window.
    #[inline]
    pub fn shift_count(&self) -> usize {
        self.u_count() * self.v_count()
    }

    #[inline]
    pub fn contains(&self, u: i32, v: i32) -> bool {
        u >= self.u_min && u <= self.u_max && v >= self.v_min && v <= self.v_max
    }

    /// Shifts in a fixed order: `v` outer, `u` inner, both ascending. Noise
    /// keying and surface indices rely on this enumeration.
    pub fn shifts(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        let (u_min, u_max) = (self.u_min, self.u_max);
        (self.v_min..=self.v_max).flat_map(move |v| (u_min..=u_max).map(move |u| (u, v)))
    }

    #[inline]
    pub(crate) fn index_of(&self, u: i32, v: i32) -> usize {
        (v - self.v_min) as usize * self.u_count() + (u - self.u_min) as usize
    }
}

/// Per-shift similarity values for one block over a search window, with a
/// validity mask for shifts that were out of bounds or degenerate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSurface {
    window: SearchWindow,
    scores: Vec<f64>,
    valid: Vec<bool>,
}

impl ScoreSurface {
    /// A surface with every shift marked invalid.
    pub(crate) fn invalid(window: SearchWindow) -> Self {
        let n = window.shift_count();
        Self {
            window,
            scores: vec![0.0; n],
            valid: vec![false; n],
        }
    }

    pub(crate) fn set(&mut self, u: i32, v: i32, score: f64) {
        let i = self.window.index_of(u, v);
        self.scores[i] = score;
        self.valid[i] = true;
    }

    #[inline]
    pub fn window(&self) -> SearchWindow {
        self.window
    }

    /// Score at a shift, or `None` when out of window or invalid.
    pub fn score_at(&self, u: i32, v: i32) -> Option<f64> {
        if !self.window.contains(u, v) {
            return None;
        }
        let i = self.window.index_of(u, v);
        self.valid[i].then(|| self.scores[i])
    }

    #[inline]
    pub fn is_valid(&self, u: i32, v: i32) -> bool {
        self.window.contains(u, v) && self.valid[self.window.index_of(u, v)]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// `(u, v, score)` triples over the window; `score` is `None` for invalid
    /// shifts.
    pub fn iter(&self) -> impl Iterator<Item = (i32, i32, Option<f64>)> + '_ {
        self.window.shifts().map(move |(u, v)| {
            let i = self.window.index_of(u, v);
            (u, v, self.valid[i].then(|| self.scores[i]))
        })
    }
}

/// Whether a surface's best shift is its maximum (correlation) or minimum
/// (dissimilarity).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestShift {
    pub u: i32,
    pub v: i32,
    pub score: f64,
}

/// Picks the extremal valid score. Ties break toward the smallest `|u| + |v|`,
/// then lexicographically by `(v, u)`, so the result is deterministic.
pub fn best_shift(surface: &ScoreSurface, mode: Extremum) -> Result<BestShift, ScoreError> {
    let mut best: Option<BestShift> = None;
    for (u, v, score) in surface.iter() {
        let Some(score) = score else { continue };
        let replace = match &best {
            None => true,
            Some(b) => {
                if score == b.score {
                    tie_key(u, v) < tie_key(b.u, b.v)
                } else {
                    match mode {
                        Extremum::Maximize => score > b.score,
                        Extremum::Minimize => score < b.score,
                    }
                }
            }
        };
        if replace {
            best = Some(BestShift { u, v, score });
        }
    }
    best.ok_or(ScoreError::AllShiftsInvalid)
}

#[inline]
fn tie_key(u: i32, v: i32) -> (i32, i32, i32) {
    (u.abs() + v.abs(), v, u)
}
