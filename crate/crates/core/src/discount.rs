//! Discounted forward sums of outcomes (`G`) and treatments (`H`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::TrajectoryPanel;

/// Dense `n x periods` matrix of reals, unit-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    periods: usize,
    values: Vec<f64>,
}

impl Grid {
    pub fn from_fn(n: usize, periods: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * periods);
        for i in 0..n {
            for t in 0..periods {
                values.push(f(i, t));
            }
        }
        Self { n, periods, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn get(&self, unit: usize, period: usize) -> f64 {
        self.values[unit * self.periods + period]
    }

    pub fn row(&self, unit: usize) -> &[f64] {
        &self.values[unit * self.periods..(unit + 1) * self.periods]
    }

    /// Outcomes `Y` of a panel as a grid.
    pub fn outcomes(panel: &TrajectoryPanel) -> Self {
        Self::from_fn(panel.n(), panel.periods(), |i, t| panel.get(i, t).y)
    }

    /// Treatments `A` of a panel as a grid.
    pub fn treatments(panel: &TrajectoryPanel) -> Self {
        Self::from_fn(panel.n(), panel.periods(), |i, t| panel.get(i, t).a_f64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Window {
    /// Sum to the end of the panel.
    Full,
    /// Sum `l` periods forward.
    Truncated(usize),
}

/// `g[i, t]` and `h[i, t]` for every period on which the sums are defined:
/// all of `0..=T` for [`Window::Full`], `0..=T-l+1` for `Window::Truncated(l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedSums {
    pub g: Grid,
    pub h: Grid,
    pub gamma: f64,
    pub window: Window,
}

impl DiscountedSums {
    /// Number of leading periods with defined sums.
    pub fn valid_periods(&self) -> usize {
        self.g.periods()
    }
}

/// `G[i,t] = sum_{j=0}^{T-t} gamma^j Y[i,t+j]` by backward recursion; same for `H` with `A`.
pub fn full_sums(panel: &TrajectoryPanel, gamma: f64) -> DiscountedSums {
    let periods = panel.periods();
    let mut g = Vec::with_capacity(panel.n() * periods);
    let mut h = Vec::with_capacity(panel.n() * periods);
    let mut gu = vec![0.0; periods];
    let mut hu = vec![0.0; periods];
    for unit in panel.units() {
        let (mut gn, mut hn) = (0.0, 0.0);
        for t in (0..periods).rev() {
            gn = unit[t].y + gamma * gn;
            hn = unit[t].a_f64() + gamma * hn;
            gu[t] = gn;
            hu[t] = hn;
        }
        g.extend_from_slice(&gu);
        h.extend_from_slice(&hu);
    }
    DiscountedSums {
        g: Grid {
            n: panel.n(),
            periods,
            values: g,
        },
        h: Grid {
            n: panel.n(),
            periods,
            values: h,
        },
        gamma,
        window: Window::Full,
    }
}

/// `G[i,t](l) = sum_{j=0}^{l-1} gamma^j Y[i,t+j]` for `t = 0..=T-l+1`.
pub fn truncated_sums(
    panel: &TrajectoryPanel,
    gamma: f64,
    window: usize,
) -> Result<DiscountedSums> {
    let periods = panel.periods();
    if window == 0 {
        return Err(Error::InvalidSpec(
            "truncation window must be at least 1".into(),
        ));
    }
    if window > periods {
        return Err(Error::WindowTooLarge {
            window,
            horizon: panel.horizon(),
        });
    }
    let valid = periods - window + 1;
    let powers: Vec<f64> = (0..window).map(|j| gamma.powi(j as i32)).collect();
    let sum = |f: &dyn Fn(usize, usize) -> f64| {
        Grid::from_fn(panel.n(), valid, |i, t| {
            powers
                .iter()
                .enumerate()
                .map(|(j, w)| w * f(i, t + j))
                .sum()
        })
    };
    Ok(DiscountedSums {
        g: sum(&|i, t| panel.get(i, t).y),
        h: sum(&|i, t| panel.get(i, t).a_f64()),
        gamma,
        window: Window::Truncated(window),
    })
}
