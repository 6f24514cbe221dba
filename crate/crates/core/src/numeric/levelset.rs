//! Level sets and sublevel sets of piecewise-C¹ scalar functions on a window.
//!
//! A [`LevelIndex`] scans the window once (uniform cells plus every kink),
//! locates all critical points by bracketing sign changes of the derivative,
//! and stores the monotone pieces between them. Any number of level queries
//! then cost one bracketed root solve per piece whose range contains the
//! level.

use serde::{Deserialize, Serialize};

use super::roots::brent;
use super::{Interval, Side};
use crate::error::{Error, Result};

/// A function that can be evaluated and differentiated, with known kinks.
pub trait ScalarFn {
    fn value(&self, x: f64) -> f64;
    /// One-sided derivative; both sides agree away from kinks.
    fn slope(&self, x: f64, side: Side) -> f64;
    /// Points in `[lo, hi]` where the derivative may be discontinuous.
    fn kinks(&self, lo: f64, hi: f64) -> Vec<f64>;
}

impl<F: ScalarFn + ?Sized> ScalarFn for &F {
    fn value(&self, x: f64) -> f64 {
        (**self).value(x)
    }
    fn slope(&self, x: f64, side: Side) -> f64 {
        (**self).slope(x, side)
    }
    fn kinks(&self, lo: f64, hi: f64) -> Vec<f64> {
        (**self).kinks(lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LevelOptions {
    /// Number of uniform scan cells on the window.
    pub cells: usize,
    /// Absolute root tolerance; also scales the tangency test.
    pub tol_root: f64,
    /// Maximum recursive subdivision depth of a scan cell.
    pub max_depth: usize,
}

impl Default for LevelOptions {
    fn default() -> Self {
        Self {
            cells: 4096,
            tol_root: 1e-12,
            max_depth: 30,
        }
    }
}

/// One solution of `f(x) = v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelPoint {
    pub x: f64,
    /// The derivative vanishes at the root (touching or inflection contact).
    pub tangential: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeKind {
    WindowEnd,
    Kink,
    Critical,
}

#[derive(Debug, Clone)]
pub struct LevelIndex {
    window: Interval,
    nodes: Vec<f64>,
    values: Vec<f64>,
    kinds: Vec<NodeKind>,
    /// `flat[i]` marks a constant piece `[nodes[i], nodes[i+1]]`.
    flat: Vec<bool>,
    tol_root: f64,
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

impl LevelIndex {
    pub fn build<F: ScalarFn>(f: &F, window: Interval, opts: &LevelOptions) -> Result<Self> {
        if window.is_empty() {
            return Ok(Self {
                window,
                nodes: vec![window.lo],
                values: vec![f.value(window.lo)],
                kinds: vec![NodeKind::WindowEnd],
                flat: vec![],
                tol_root: opts.tol_root,
            });
        }
        let cells = opts.cells.max(1);
        let h = window.len() / cells as f64;
        let grid = (0..=cells).map(|i| {
            if i == cells {
                window.hi
            } else {
                window.lo + h * i as f64
            }
        });
        let kinks: Vec<f64> = f
            .kinks(window.lo, window.hi)
            .into_iter()
            .filter(|&k| k > window.lo && k < window.hi)
            .collect();
        let mut scan: Vec<(f64, bool)> = grid.map(|x| (x, false)).collect();
        scan.extend(kinks.iter().map(|&k| (k, true)));
        scan.sort_by(|a, b| a.0.total_cmp(&b.0));
        scan.dedup_by(|a, b| {
            if a.0 == b.0 {
                b.1 |= a.1;
                true
            } else {
                false
            }
        });

        let mut crit: Vec<f64> = Vec::new();
        let mut flat_cells: Vec<(f64, f64)> = Vec::new();
        for w in scan.windows(2) {
            let (a, b) = (w[0].0, w[1].0);
            let sa = f.slope(a, Side::Right);
            let sb = f.slope(b, Side::Left);
            find_critical(f, a, b, sa, sb, 0, opts.max_depth, &mut crit, &mut flat_cells)?;
        }
        // Slopes that vanish exactly at interior scan nodes (not kinks) are critical too.
        for &(x, is_kink) in &scan[1..scan.len() - 1] {
            let in_flat = flat_cells.iter().any(|&(lo, hi)| x >= lo && x <= hi);
            if !is_kink && !in_flat && f.slope(x, Side::Right) == 0.0 {
                crit.push(x);
            }
        }

        let mut nodes: Vec<(f64, NodeKind)> = vec![
            (window.lo, NodeKind::WindowEnd),
            (window.hi, NodeKind::WindowEnd),
        ];
        nodes.extend(kinks.iter().map(|&k| (k, NodeKind::Kink)));
        nodes.extend(
            crit.iter()
                .filter(|&&c| c > window.lo && c < window.hi)
                .map(|&c| (c, NodeKind::Critical)),
        );
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        nodes.dedup_by(|a, b| {
            if a.0 == b.0 {
                // Prefer the more specific tag.
                if a.1 == NodeKind::WindowEnd || b.1 == NodeKind::WindowEnd {
                    b.1 = NodeKind::WindowEnd;
                } else if a.1 == NodeKind::Kink || b.1 == NodeKind::Kink {
                    b.1 = NodeKind::Kink;
                }
                true
            } else {
                false
            }
        });
        // Merge consecutive flat cells so flat pieces are found by midpoint.
        let flat: Vec<bool> = nodes
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].0, w[1].0);
                let m = 0.5 * (a + b);
                flat_cells.iter().any(|&(lo, hi)| m >= lo && m <= hi)
            })
            .collect();
        let values = nodes.iter().map(|&(x, _)| f.value(x)).collect();
        Ok(Self {
            window,
            kinds: nodes.iter().map(|n| n.1).collect(),
            nodes: nodes.into_iter().map(|n| n.0).collect(),
            values,
            flat,
            tol_root: opts.tol_root,
        })
    }

    pub fn window(&self) -> Interval {
        self.window
    }

    /// Critical points (derivative zero) found in the window.
    pub fn critical_points(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.kinds)
            .filter(|(_, k)| **k == NodeKind::Critical)
            .map(|(x, _)| *x)
            .collect()
    }

    /// Piece boundaries with the function value at each.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.values.iter().copied())
    }

    /// Whether the function is constant on the whole window.
    pub fn is_constant(&self) -> bool {
        !self.flat.is_empty() && self.flat.iter().all(|&f| f)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn tangent_tol(&self, v: f64) -> f64 {
        self.tol_root * v.abs().max(1.0)
    }

    /// All solutions of `f(x) = v` in the window, ascending.
    pub fn roots<F: ScalarFn>(&self, f: &F, v: f64) -> Result<Vec<LevelPoint>> {
        let tol = self.tangent_tol(v);
        let shifted: Vec<f64> = self
            .values
            .iter()
            .zip(&self.kinds)
            .map(|(&val, &kind)| {
                let d = val - v;
                if kind == NodeKind::Critical && d.abs() <= tol {
                    0.0
                } else {
                    d
                }
            })
            .collect();
        let mut out: Vec<LevelPoint> = Vec::new();
        let push = |p: LevelPoint, out: &mut Vec<LevelPoint>| {
            if let Some(last) = out.last_mut() {
                if last.x == p.x {
                    last.tangential |= p.tangential;
                    return;
                }
            }
            out.push(p);
        };
        for i in 0..self.nodes.len() {
            if shifted[i] == 0.0 {
                let on_flat = (i > 0 && self.flat[i - 1]) || (i < self.flat.len() && self.flat[i]);
                if on_flat {
                    return Err(Error::DegenerateContinuum(format!(
                        "function is constant at level {v} near x = {}",
                        self.nodes[i]
                    )));
                }
                push(
                    LevelPoint {
                        x: self.nodes[i],
                        tangential: self.kinds[i] == NodeKind::Critical,
                    },
                    &mut out,
                );
            }
            if i + 1 < self.nodes.len() && !self.flat[i] {
                let (fa, fb) = (shifted[i], shifted[i + 1]);
                if fa != 0.0 && fb != 0.0 && sign(fa) != sign(fb) {
                    let g = |x: f64| f.value(x) - v;
                    let x = brent(g, self.nodes[i], self.nodes[i + 1], fa, fb, 0.0)?;
                    push(LevelPoint { x, tangential: false }, &mut out);
                }
            }
        }
        Ok(out)
    }

    /// `{x in window : f(x) <= v}` as disjoint closed intervals (isolated
    /// touching points are dropped).
    pub fn sublevel<F: ScalarFn>(&self, f: &F, v: f64) -> Result<Vec<Interval>> {
        let roots = self.roots(f, v)?;
        let mut cuts: Vec<f64> = Vec::with_capacity(roots.len() + 2);
        cuts.push(self.window.lo);
        cuts.extend(roots.iter().map(|r| r.x));
        cuts.push(self.window.hi);
        cuts.dedup();
        let mut out: Vec<Interval> = Vec::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            if f.value(0.5 * (a + b)) <= v {
                match out.last_mut() {
                    Some(last) if last.hi == a => last.hi = b,
                    _ => out.push(Interval { lo: a, hi: b }),
                }
            }
        }
        Ok(out)
    }

    /// Non-flat pieces `(x_a, x_b, f(x_a), f(x_b))` on which `f` is monotone.
    pub fn monotone_pieces(&self) -> Vec<(f64, f64, f64, f64)> {
        (0..self.flat.len())
            .filter(|&i| !self.flat[i])
            .map(|i| (self.nodes[i], self.nodes[i + 1], self.values[i], self.values[i + 1]))
            .collect()
    }

    /// Largest number of transversal solutions of `f(x) = v` over all levels `v`.
    pub fn max_root_count(&self) -> usize {
        let mut levels: Vec<f64> = self.values.clone();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let mut best = 0;
        for w in levels.windows(2) {
            let v = 0.5 * (w[0] + w[1]);
            let count = (0..self.flat.len())
                .filter(|&i| {
                    !self.flat[i] && {
                        let (a, b) = (self.values[i], self.values[i + 1]);
                        (a < v && v < b) || (b < v && v < a)
                    }
                })
                .count();
            best = best.max(count);
        }
        best
    }
}

#[allow(clippy::too_many_arguments)]
fn find_critical<F: ScalarFn>(
    f: &F,
    a: f64,
    b: f64,
    sa: f64,
    sb: f64,
    depth: usize,
    max_depth: usize,
    out: &mut Vec<f64>,
    flat: &mut Vec<(f64, f64)>,
) -> Result<()> {
    let m = 0.5 * (a + b);
    let sm = f.slope(m, Side::Right);
    if sa == 0.0 && sb == 0.0 && sm == 0.0 {
        flat.push((a, b));
        return Ok(());
    }
    let (ga, gb, gm) = (sign(sa), sign(sb), sign(sm));
    if ga != 0 && gb != 0 && ga != gb {
        let d = |x: f64| f.slope(x, Side::Right);
        let c = brent(d, a, b, sa, sb, 0.0)?;
        out.push(c);
        // Look for further sign changes on either side of c.
        for (lo, hi) in [(a, c), (c, b)] {
            if hi - lo <= 0.0 {
                continue;
            }
            let mid = 0.5 * (lo + hi);
            let s_mid = sign(f.slope(mid, Side::Right));
            let s_end = if lo == a { ga } else { gb };
            if s_mid != 0 && s_mid != s_end {
                if depth >= max_depth {
                    return Err(Error::Resolution { lo: a, hi: b });
                }
                let (slo, shi) = (f.slope(lo, Side::Right), f.slope(hi, Side::Left));
                find_critical(f, lo, mid, slo, f.slope(mid, Side::Left), depth + 1, max_depth, out, flat)?;
                find_critical(f, mid, hi, f.slope(mid, Side::Right), shi, depth + 1, max_depth, out, flat)?;
            }
        }
        return Ok(());
    }
    let same_ends = ga == gb && ga != 0;
    if same_ends && gm != ga {
        // An even number of critical points hides inside the cell.
        if depth >= max_depth {
            return Err(Error::Resolution { lo: a, hi: b });
        }
        find_critical(f, a, m, sa, f.slope(m, Side::Left), depth + 1, max_depth, out, flat)?;
        find_critical(f, m, b, sm, sb, depth + 1, max_depth, out, flat)?;
        return Ok(());
    }
    if ga == 0 || gb == 0 {
        // Zero slope at an end: critical at that end (recorded by the node pass)
        // unless an interior sign change remains between midpoint and the other end.
        if ga == 0 && gb != 0 && gm != 0 && gm != gb && depth < max_depth {
            find_critical(f, m, b, sm, sb, depth + 1, max_depth, out, flat)?;
        }
        if gb == 0 && ga != 0 && gm != 0 && gm != ga && depth < max_depth {
            find_critical(f, a, m, sa, f.slope(m, Side::Left), depth + 1, max_depth, out, flat)?;
        }
        if ga == 0 && gb == 0 && gm != 0 {
            // Zero at both ends but not inside: treat ends as critical.
            out.push(a);
            out.push(b);
        }
        if ga == 0 {
            out.push(a);
        }
        if gb == 0 {
            out.push(b);
        }
    }
    Ok(())
}

/// Convenience: level set of `f` on a window with default scan options.
pub fn level_set<F: ScalarFn>(f: &F, v: f64, window: Interval, opts: &LevelOptions) -> Result<Vec<LevelPoint>> {
    LevelIndex::build(f, window, opts)?.roots(f, v)
}

/// Convenience: sublevel set of `f` on a window.
pub fn sublevel_set<F: ScalarFn>(f: &F, v: f64, window: Interval, opts: &LevelOptions) -> Result<Vec<Interval>> {
    LevelIndex::build(f, window, opts)?.sublevel(f, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Poly(Vec<f64>);
    impl ScalarFn for Poly {
        fn value(&self, x: f64) -> f64 {
            self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
        }
        fn slope(&self, x: f64, _: Side) -> f64 {
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, &c)| acc * x + i as f64 * c)
        }
        fn kinks(&self, _: f64, _: f64) -> Vec<f64> {
            vec![]
        }
    }

    fn w(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn quartic_has_four_roots() {
        // (x^2-1)^2 = x^4 - 2x^2 + 1
        let p = Poly(vec![1.0, 0.0, -2.0, 0.0, 1.0]);
        let r = level_set(&p, 0.25, w(-2.0, 2.0), &LevelOptions::default()).unwrap();
        let xs: Vec<f64> = r.iter().map(|p| p.x).collect();
        let a = 0.5f64.sqrt();
        let b = 1.5f64.sqrt();
        let expect = [-b, -a, a, b];
        assert_eq!(xs.len(), 4);
        for (x, e) in xs.iter().zip(expect) {
            assert!((x - e).abs() < 1e-14, "{x} vs {e}");
        }
        assert!(r.iter().all(|p| !p.tangential));
    }

    #[test]
    fn tangential_contact_is_flagged() {
        let p = Poly(vec![1.0, 0.0, -2.0, 0.0, 1.0]);
        let r = level_set(&p, 0.0, w(-2.0, 2.0), &LevelOptions::default()).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|p| p.tangential));
        assert!((r[0].x + 1.0).abs() < 1e-9 && (r[1].x - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_roots_inside_one_coarse_cell() {
        // Narrow dip: roots at 0.3 +- 1e-4, with only 4 scan cells.
        let c = 0.3;
        let d = 1e-4;
        let p = Poly(vec![c * c - d * d, -2.0 * c, 1.0]);
        let opts = LevelOptions {
            cells: 4,
            ..Default::default()
        };
        let r = level_set(&p, 0.0, w(0.0, 1.0), &opts).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0].x - (c - d)).abs() < 1e-13);
        assert!((r[1].x - (c + d)).abs() < 1e-13);
    }

    #[test]
    fn sublevel_of_double_well() {
        let p = Poly(vec![1.0, 0.0, -2.0, 0.0, 1.0]);
        let s = sublevel_set(&p, 2.0, w(-3.0, 3.0), &LevelOptions::default()).unwrap();
        assert_eq!(s.len(), 1);
        let e = (1.0 + 2f64.sqrt()).sqrt();
        assert!((s[0].lo + e).abs() < 1e-13 && (s[0].hi - e).abs() < 1e-13);
    }

    #[test]
    fn constant_function_is_degenerate_at_its_level() {
        let p = Poly(vec![0.5]);
        let idx = LevelIndex::build(&p, w(0.0, 1.0), &LevelOptions::default()).unwrap();
        assert!(idx.is_constant());
        assert!(matches!(idx.roots(&p, 0.5), Err(Error::DegenerateContinuum(_))));
        assert!(idx.roots(&p, 0.7).unwrap().is_empty());
        assert_eq!(idx.max_root_count(), 0);
    }

    #[test]
    fn max_root_count_of_quartic_and_parabola() {
        let q = Poly(vec![1.0, 0.0, -2.0, 0.0, 1.0]);
        let idx = LevelIndex::build(&q, w(-2.0, 2.0), &LevelOptions::default()).unwrap();
        assert_eq!(idx.max_root_count(), 4);
        let p = Poly(vec![0.0, 0.0, 1.0]);
        let idx = LevelIndex::build(&p, w(-2.0, 2.0), &LevelOptions::default()).unwrap();
        assert_eq!(idx.max_root_count(), 2);
    }
}
