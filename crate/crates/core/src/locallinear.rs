//! Pooled, kernel- and time-weighted local linear regression.
//!
//! Every `(unit, period)` row with an observed running variable gets the
//! weight `gamma^t K(|Z - c| / h)`. Rows with zero weight, an unobserved
//! running variable, or `t > t_max` are dropped before anything else.
//!
//! The regressors are `r(z) = (1, D, z - c, (z - c) D)` with `D = 1{z >= c}`,
//! optionally followed by one dummy per included period `1..=t_max` (period 0
//! is the omitted category). Because the base columns split by side and the
//! dummies are period indicators, the normal equations depend on the data
//! only through per-(period, side) sums, which is what the design stores.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::discount::Grid;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernels::KernelKind;
use crate::linalg::{rcond_sym2, solve_sym2, SymSolver, RCOND_FLOOR};
use crate::panel::TrajectoryPanel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regressors {
    #[default]
    Base,
    TimeFe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub variant: Regressors,
    pub cutoff: f64,
    /// Last period that may enter the fit.
    pub horizon: usize,
}

impl RegressorSpec {
    pub fn new(variant: Regressors, cutoff: f64, horizon: usize) -> Self {
        Self {
            variant,
            cutoff,
            horizon,
        }
    }

    /// Nominal dimension: 4 base columns plus one dummy per period `1..=horizon`.
    pub fn dimension(&self) -> usize {
        match self.variant {
            Regressors::Base => 4,
            Regressors::TimeFe => 4 + self.horizon,
        }
    }
}

/// Result of one weighted least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct WlsFit {
    /// `(alpha, jump, slope_below, slope_change, dummies..)`.
    pub coefficients: Vec<f64>,
    /// `X'WX` in the same column order as `coefficients`.
    pub weighted_gram: DMatrix<f64>,
    pub total_weight: f64,
    pub n_effective: usize,
    /// Period of each dummy column, in column order.
    pub dummy_periods: Vec<usize>,
    pub cutoff: f64,
}

impl WlsFit {
    /// Coefficient on `1{z >= c}`.
    pub fn jump(&self) -> f64 {
        self.coefficients[1]
    }

    /// Fitted value `r(z)' theta` for a row at offset `x = z - c` in `period`.
    pub fn predict(&self, x: f64, period: usize) -> f64 {
        let c = &self.coefficients;
        let d = if x >= 0.0 { 1.0 } else { 0.0 };
        let mut v = c[0] + c[1] * d + c[2] * x + c[3] * x * d;
        if let Ok(k) = self.dummy_periods.binary_search(&period) {
            v += c[4 + k];
        }
        v
    }
}

pub fn jump(fit: &WlsFit) -> f64 {
    fit.jump()
}

/// A retained row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub period: usize,
    /// `z - c`
    pub x: f64,
    pub treated: bool,
    pub w: f64,
}

/// `[sum w, sum w x, sum w x^2]` on one side of the cutoff.
type SideMoments = [f64; 3];

#[derive(Debug, Clone)]
enum Solver {
    /// Base regressors: two independent 2x2 systems.
    Sides,
    /// Time dummies eliminated analytically; `SymSolver` holds the 4x4 Schur complement.
    Schur(SymSolver),
}

/// Weights, retained rows and the factorized normal equations for one
/// `(panel, regressors, kernel, gamma, h, t_max)` combination. Any number of
/// responses can then be fitted against the same design.
#[derive(Debug, Clone)]
pub struct LocalDesign {
    spec: RegressorSpec,
    t_max: usize,
    rows: Vec<Row>,
    unit_start: Vec<usize>,
    /// Per period `0..=t_max`: moments of the control (0) and treated (1) side.
    moments: Vec<[SideMoments; 2]>,
    dummy_periods: Vec<usize>,
    solver: Solver,
    exec: Execution,
}

impl LocalDesign {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        panel: &TrajectoryPanel,
        spec: &RegressorSpec,
        kernel: KernelKind,
        gamma: f64,
        h: f64,
        t_max: usize,
        exec: Execution,
    ) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "bandwidth must be positive, got {h}"
            )));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidSpec(format!(
                "gamma must lie in [0, 1], got {gamma}"
            )));
        }
        if t_max > panel.horizon() {
            return Err(Error::InvalidSpec(format!(
                "t_max {t_max} exceeds panel horizon {}",
                panel.horizon()
            )));
        }
        let c = spec.cutoff;
        let discount: Vec<f64> = (0..=t_max).map(|t| gamma.powi(t as i32)).collect();

        let mut rows = Vec::new();
        let mut unit_start = Vec::with_capacity(panel.n() + 1);
        for unit in panel.units() {
            unit_start.push(rows.len());
            for (t, obs) in unit[..=t_max].iter().enumerate() {
                let Some(z) = obs.z else { continue };
                let w = discount[t] * kernel.eval((z - c).abs() / h);
                if w > 0.0 {
                    rows.push(Row {
                        period: t,
                        x: z - c,
                        treated: z >= c,
                        w,
                    });
                }
            }
        }
        unit_start.push(rows.len());
        if rows.is_empty() {
            return Err(Error::NoSupport);
        }

        let n = panel.n();
        let moments = exec
            .block_reduce(
                n,
                |units| {
                    let mut m = vec![[[0.0; 3]; 2]; t_max + 1];
                    for r in &rows[unit_start[units.start]..unit_start[units.end]] {
                        let s = &mut m[r.period][usize::from(r.treated)];
                        s[0] += r.w;
                        s[1] += r.w * r.x;
                        s[2] += r.w * r.x * r.x;
                    }
                    m
                },
                add_moments,
            )
            .expect("panel has at least one unit");

        let dummy_periods: Vec<usize> = match spec.variant {
            Regressors::Base => Vec::new(),
            Regressors::TimeFe => (1..=t_max)
                .filter(|&p| moments[p][0][0] + moments[p][1][0] > 0.0)
                .collect(),
        };

        let solver = if dummy_periods.is_empty() {
            let [lo, hi] = side_totals(&moments);
            let rcond = rcond_sym2(lo[0], lo[1], lo[2]).min(rcond_sym2(hi[0], hi[1], hi[2]));
            if rcond < RCOND_FLOOR {
                return Err(Error::SingularDesign { rcond });
            }
            Solver::Sides
        } else {
            let mut schur = base_block(&moments);
            for &p in &dummy_periods {
                let (cp, wp) = dummy_column(&moments[p]);
                schur -= cp * cp.transpose() / wp;
            }
            let solver = SymSolver::new(&DMatrix::from_iterator(4, 4, schur.iter().cloned()));
            if solver.is_singular() {
                return Err(Error::SingularDesign {
                    rcond: solver.rcond,
                });
            }
            Solver::Schur(solver)
        };

        Ok(Self {
            spec: *spec,
            t_max,
            rows,
            unit_start,
            moments,
            dummy_periods,
            solver,
            exec,
        })
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn cutoff(&self) -> f64 {
        self.spec.cutoff
    }

    pub fn n_units(&self) -> usize {
        self.unit_start.len() - 1
    }

    /// Retained rows of one unit, in period order.
    pub fn unit_rows(&self, unit: usize) -> &[Row] {
        &self.rows[self.unit_start[unit]..self.unit_start[unit + 1]]
    }

    /// `[sum w, sum w x, sum w x^2]` over all retained rows, control side first.
    pub fn side_moments(&self) -> [[f64; 3]; 2] {
        side_totals(&self.moments)
    }

    pub fn exec(&self) -> Execution {
        self.exec
    }

    pub fn total_weight(&self) -> f64 {
        self.moments.iter().map(|m| m[0][0] + m[1][0]).sum()
    }

    /// Fits `response[i, t]` on the regressors. The response must be defined
    /// on periods `0..=t_max`.
    pub fn fit(&self, response: &Grid) -> Result<WlsFit> {
        if response.n() != self.n_units() || response.periods() <= self.t_max {
            return Err(Error::InvalidSpec(format!(
                "response grid is {}x{}, design needs {}x{}",
                response.n(),
                response.periods(),
                self.n_units(),
                self.t_max + 1
            )));
        }
        // Per period and side: [sum w y, sum w x y].
        let cross = self
            .exec
            .block_reduce(
                self.n_units(),
                |units| {
                    let mut m = vec![[[0.0; 2]; 2]; self.t_max + 1];
                    for i in units {
                        for r in self.unit_rows(i) {
                            let y = response.get(i, r.period);
                            let s = &mut m[r.period][usize::from(r.treated)];
                            s[0] += r.w * y;
                            s[1] += r.w * r.x * y;
                        }
                    }
                    m
                },
                |mut a, b| {
                    for (pa, pb) in a.iter_mut().zip(&b) {
                        for side in 0..2 {
                            pa[side][0] += pb[side][0];
                            pa[side][1] += pb[side][1];
                        }
                    }
                    a
                },
            )
            .expect("panel has at least one unit");

        let coefficients = match &self.solver {
            Solver::Sides => {
                let [lo, hi] = side_totals(&self.moments);
                let (mut rlo, mut rhi) = ([0.0; 2], [0.0; 2]);
                for p in &cross {
                    rlo[0] += p[0][0];
                    rlo[1] += p[0][1];
                    rhi[0] += p[1][0];
                    rhi[1] += p[1][1];
                }
                let [a0, b0] = solve_sym2(lo[0], lo[1], lo[2], rlo);
                let [a1, b1] = solve_sym2(hi[0], hi[1], hi[2], rhi);
                vec![a0, a1 - a0, b0, b1 - b0]
            }
            Solver::Schur(solver) => {
                let mut rhs = Vector4::zeros();
                for p in &cross {
                    rhs += cross_column(p);
                }
                let mut dummy_rhs = Vec::with_capacity(self.dummy_periods.len());
                for &p in &self.dummy_periods {
                    let (cp, wp) = dummy_column(&self.moments[p]);
                    let dp = cross[p][0][0] + cross[p][1][0];
                    rhs -= cp * (dp / wp);
                    dummy_rhs.push((cp, wp, dp));
                }
                let beta = solver.solve(&DVector::from_iterator(4, rhs.iter().cloned()));
                let beta = Vector4::new(beta[0], beta[1], beta[2], beta[3]);
                let mut coef: Vec<f64> = beta.iter().cloned().collect();
                coef.extend(
                    dummy_rhs
                        .iter()
                        .map(|(cp, wp, dp)| (dp - cp.dot(&beta)) / wp),
                );
                coef
            }
        };

        Ok(WlsFit {
            coefficients,
            weighted_gram: self.gram(),
            total_weight: self.total_weight(),
            n_effective: self.rows.len(),
            dummy_periods: self.dummy_periods.clone(),
            cutoff: self.spec.cutoff,
        })
    }

    /// Full `X'WX` in coefficient order.
    pub fn gram(&self) -> DMatrix<f64> {
        let k = self.dummy_periods.len();
        let mut g = DMatrix::zeros(4 + k, 4 + k);
        g.view_mut((0, 0), (4, 4))
            .copy_from(&base_block(&self.moments));
        for (j, &p) in self.dummy_periods.iter().enumerate() {
            let (cp, wp) = dummy_column(&self.moments[p]);
            g.view_mut((0, 4 + j), (4, 1)).copy_from(&cp);
            g.view_mut((4 + j, 0), (1, 4)).copy_from(&cp.transpose());
            g[(4 + j, 4 + j)] = wp;
        }
        g
    }
}

/// Builds the design and fits a single response.
#[allow(clippy::too_many_arguments)]
pub fn fit(
    panel: &TrajectoryPanel,
    response: &Grid,
    spec: &RegressorSpec,
    kernel: KernelKind,
    gamma: f64,
    h: f64,
    t_max: usize,
) -> Result<WlsFit> {
    LocalDesign::build(panel, spec, kernel, gamma, h, t_max, Execution::default())?.fit(response)
}

fn add_moments(mut a: Vec<[SideMoments; 2]>, b: Vec<[SideMoments; 2]>) -> Vec<[SideMoments; 2]> {
    for (pa, pb) in a.iter_mut().zip(&b) {
        for side in 0..2 {
            for j in 0..3 {
                pa[side][j] += pb[side][j];
            }
        }
    }
    a
}

fn side_totals(moments: &[[SideMoments; 2]]) -> [SideMoments; 2] {
    let mut out = [[0.0; 3]; 2];
    for p in moments {
        for side in 0..2 {
            for j in 0..3 {
                out[side][j] += p[side][j];
            }
        }
    }
    out
}

/// Contribution of one period's moments to the 4x4 block of the base columns
/// `(1, D, x, x D)`.
fn period_block(m: &[SideMoments; 2]) -> Matrix4<f64> {
    let [lo, hi] = m;
    let (s0, s1, s2) = (lo[0] + hi[0], lo[1] + hi[1], lo[2] + hi[2]);
    let (t0, t1, t2) = (hi[0], hi[1], hi[2]);
    Matrix4::new(
        s0, t0, s1, t1, //
        t0, t0, t1, t1, //
        s1, t1, s2, t2, //
        t1, t1, t2, t2,
    )
}

fn base_block(moments: &[[SideMoments; 2]]) -> Matrix4<f64> {
    moments.iter().map(period_block).sum()
}

/// Cross products of the base columns with a period dummy, and the dummy's own weight.
fn dummy_column(m: &[SideMoments; 2]) -> (Vector4<f64>, f64) {
    let [lo, hi] = m;
    let w = lo[0] + hi[0];
    (Vector4::new(w, hi[0], lo[1] + hi[1], hi[1]), w)
}

fn cross_column(p: &[[f64; 2]; 2]) -> Vector4<f64> {
    let [lo, hi] = p;
    Vector4::new(lo[0] + hi[0], hi[0], lo[1] + hi[1], hi[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::Observation;
    use proptest::prelude::*;

    fn build_panel(
        n: usize,
        horizon: usize,
        z: impl Fn(usize, usize) -> f64,
        y: impl Fn(usize, usize, f64) -> f64,
    ) -> TrajectoryPanel {
        let mut data = Vec::new();
        for i in 0..n {
            for t in 0..=horizon {
                let zi = z(i, t);
                data.push(Observation::new(Some(zi), zi >= 0.0, y(i, t, zi)));
            }
        }
        TrajectoryPanel::new(n, horizon, data, Some(0.0)).unwrap()
    }

    fn spread(i: usize, t: usize) -> f64 {
        ((i * 29 + t * 7) % 53) as f64 / 26.0 - 1.0
    }

    fn design(panel: &TrajectoryPanel, variant: Regressors, gamma: f64, h: f64) -> LocalDesign {
        let spec = RegressorSpec::new(variant, 0.0, panel.horizon());
        LocalDesign::build(
            panel,
            &spec,
            KernelKind::Triangular,
            gamma,
            h,
            panel.horizon(),
            Execution::Sequential,
        )
        .unwrap()
    }

    /// Weighted least squares on the explicitly materialized design.
    fn dense_wls(
        panel: &TrajectoryPanel,
        variant: Regressors,
        kernel: KernelKind,
        gamma: f64,
        h: f64,
    ) -> Vec<f64> {
        let horizon = panel.horizon();
        let dummies: Vec<usize> = match variant {
            Regressors::Base => vec![],
            Regressors::TimeFe => (1..=horizon).collect(),
        };
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for i in 0..panel.n() {
            for t in 0..=horizon {
                let obs = panel.get(i, t);
                let x = obs.z.unwrap();
                let w = gamma.powi(t as i32) * kernel.eval(x.abs() / h);
                if w == 0.0 {
                    continue;
                }
                let d = if x >= 0.0 { 1.0 } else { 0.0 };
                let mut r = vec![1.0, d, x, x * d];
                r.extend(dummies.iter().map(|&p| if p == t { 1.0 } else { 0.0 }));
                rows.push(r.into_iter().map(|v| v * w.sqrt()).collect::<Vec<_>>());
                ys.push(obs.y * w.sqrt());
            }
        }
        let p = rows[0].len();
        let x = DMatrix::from_fn(rows.len(), p, |a, b| rows[a][b]);
        let y = DVector::from_vec(ys);
        x.svd(true, true)
            .solve(&y, 1e-14)
            .unwrap()
            .iter()
            .copied()
            .collect()
    }

    #[test]
    fn noiseless_jump() {
        let p = build_panel(50, 3, spread, |_, _, z| {
            1.0 + 2.0 * z + if z >= 0.0 { 3.0 } else { 0.0 }
        });
        let fit = design(&p, Regressors::Base, 0.8, 1.5)
            .fit(&Grid::outcomes(&p))
            .unwrap();
        assert!((fit.jump() - 3.0).abs() < 1e-10);
        assert!((fit.coefficients[2] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn time_effects_absorb_period_shifts() {
        let p = build_panel(50, 4, spread, |_, t, z| {
            5.0 * t as f64 - z + if z >= 0.0 { 3.0 } else { 0.0 }
        });
        let fe = design(&p, Regressors::TimeFe, 0.9, 1.5)
            .fit(&Grid::outcomes(&p))
            .unwrap();
        assert!((fe.jump() - 3.0).abs() < 1e-10);
        for (k, &period) in fe.dummy_periods.iter().enumerate() {
            assert!((fe.coefficients[4 + k] - 5.0 * period as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn dummies_are_harmless_without_period_structure() {
        let p = build_panel(
            60,
            3,
            |i, _| spread(i, 0),
            |i, _, z| (i as f64).sin() + z + if z >= 0.0 { 1.0 } else { 0.0 },
        );
        let base = design(&p, Regressors::Base, 0.7, 1.2)
            .fit(&Grid::outcomes(&p))
            .unwrap();
        let fe = design(&p, Regressors::TimeFe, 0.7, 1.2)
            .fit(&Grid::outcomes(&p))
            .unwrap();
        assert!((base.jump() - fe.jump()).abs() < 1e-8);
    }

    #[test]
    fn static_fit_matches_two_sided_regressions() {
        let p = build_panel(80, 0, spread, |i, _, z| {
            (i as f64 * 0.7).cos() + z * z + if z >= 0.0 { 0.5 } else { 0.0 }
        });
        let h = 0.8;
        let side = |above: bool| {
            let pts: Vec<(f64, f64, f64)> = (0..80)
                .map(|i| p.get(i, 0))
                .filter(|o| (o.z.unwrap() >= 0.0) == above)
                .map(|o| {
                    (
                        o.z.unwrap(),
                        o.y,
                        KernelKind::Uniform.eval(o.z.unwrap().abs() / h),
                    )
                })
                .filter(|&(_, _, w)| w > 0.0)
                .collect();
            let x = DMatrix::from_fn(pts.len(), 2, |a, b| {
                if b == 0 {
                    pts[a].2.sqrt()
                } else {
                    pts[a].0 * pts[a].2.sqrt()
                }
            });
            let y = DVector::from_fn(pts.len(), |a, _| pts[a].1 * pts[a].2.sqrt());
            x.svd(true, true).solve(&y, 1e-14).unwrap()[0]
        };
        let spec = RegressorSpec::new(Regressors::Base, 0.0, 0);
        let fit = fit(
            &p,
            &Grid::outcomes(&p),
            &spec,
            KernelKind::Uniform,
            0.3,
            h,
            0,
        )
        .unwrap();
        assert!((fit.jump() - (side(true) - side(false))).abs() < 1e-10);
    }

    #[test]
    fn matches_dense_least_squares() {
        let p = build_panel(40, 3, spread, |i, t, z| {
            ((i * 3 + t) as f64).sin() + z + 0.3 * t as f64 + if z >= 0.0 { 1.0 } else { 0.0 }
        });
        for variant in [Regressors::Base, Regressors::TimeFe] {
            let fit = design(&p, variant, 0.8, 0.9)
                .fit(&Grid::outcomes(&p))
                .unwrap();
            let dense = dense_wls(&p, variant, KernelKind::Triangular, 0.8, 0.9);
            assert_eq!(fit.coefficients.len(), dense.len());
            for (a, b) in fit.coefficients.iter().zip(&dense) {
                assert!((a - b).abs() < 1e-9, "{variant:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn gram_is_symmetric_psd() {
        let p = build_panel(30, 2, spread, |_, _, z| z);
        let g = design(&p, Regressors::TimeFe, 0.6, 1.0).gram();
        assert_eq!(g, g.transpose());
        assert!(g.symmetric_eigenvalues().iter().all(|&l| l > -1e-10));
    }

    #[test]
    fn zero_discount_uses_only_first_period() {
        let p = build_panel(40, 3, spread, |i, t, z| {
            if t == 0 {
                z + if z >= 0.0 { 2.0 } else { 0.0 }
            } else {
                1e3 * (i as f64).sin()
            }
        });
        let fit = design(&p, Regressors::Base, 0.0, 1.5)
            .fit(&Grid::outcomes(&p))
            .unwrap();
        assert!((fit.jump() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn no_support_and_singular_design() {
        let far = build_panel(5, 1, |i, t| 10.0 + (i + t) as f64, |_, _, _| 0.0);
        let spec = RegressorSpec::new(Regressors::Base, 0.0, 1);
        assert!(matches!(
            LocalDesign::build(
                &far,
                &spec,
                KernelKind::Uniform,
                0.9,
                1.0,
                1,
                Execution::Sequential
            ),
            Err(Error::NoSupport)
        ));
        // a single x value on the treated side
        let flat = build_panel(
            6,
            0,
            |i, _| if i < 3 { 0.5 } else { -0.2 - 0.1 * i as f64 },
            |_, _, _| 0.0,
        );
        let spec = RegressorSpec::new(Regressors::Base, 0.0, 0);
        assert!(matches!(
            LocalDesign::build(
                &flat,
                &spec,
                KernelKind::Uniform,
                0.9,
                1.0,
                0,
                Execution::Sequential
            ),
            Err(Error::SingularDesign { .. })
        ));
    }

    #[test]
    fn execution_modes_agree_bitwise() {
        let p = build_panel(500, 5, spread, |i, t, z| ((i * 7 + t) as f64).cos() + z);
        let spec = RegressorSpec::new(Regressors::TimeFe, 0.0, 5);
        let fit = |exec| {
            LocalDesign::build(&p, &spec, KernelKind::Triangular, 0.8, 0.7, 5, exec)
                .unwrap()
                .fit(&Grid::outcomes(&p))
                .unwrap()
        };
        assert_eq!(fit(Execution::Sequential), fit(Execution::Parallel));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn duplicated_units_leave_fit_unchanged(seed in 0usize..1000) {
            let y = move |i: usize, t: usize, z: f64| ((i * 13 + t + seed) as f64).sin() + z;
            let once = build_panel(25, 2, spread, y);
            let twice = build_panel(50, 2, |i, t| spread(i % 25, t), move |i, t, z| y(i % 25, t, z));
            let a = design(&once, Regressors::Base, 0.8, 1.0).fit(&Grid::outcomes(&once)).unwrap();
            let b = design(&twice, Regressors::Base, 0.8, 1.0).fit(&Grid::outcomes(&twice)).unwrap();
            prop_assert!((a.jump() - b.jump()).abs() < 1e-10);
        }

        #[test]
        fn jump_is_scale_equivariant(scale in -5.0f64..5.0, seed in 0usize..1000) {
            let p = build_panel(30, 2, spread, move |i, t, z| ((i * 5 + t * seed) as f64).cos() + z);
            let d = design(&p, Regressors::TimeFe, 0.7, 1.0);
            let a = d.fit(&Grid::outcomes(&p)).unwrap().jump();
            let b = d.fit(&Grid::outcomes(&p.map_outcomes(|v| scale * v))).unwrap().jump();
            prop_assert!((b - scale * a).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }
}
