//! Loop decomposition of Λ × [0, β) induced by a bridge configuration.
//!
//! Each site column is cut at its bridge endpoints into vertical segments.
//! A segment has a bottom end and a top end; at every bridge the four ends
//! that meet there are paired up (crosses keep direction, bars reverse it).
//! Every end has exactly one partner, so the segments form disjoint cycles:
//! the loops.

use std::io::Write;

use crate::bridges::{BridgeConfig, BridgeKind};
use crate::lattice::Lattice;
use crate::weights::Field;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

/// A maximal vertical piece of a column between consecutive bridge endpoints.
///
/// Covers the cyclic time interval `[start, start + len)` mod β.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub site: u32,
    pub start: f64,
    pub len: f64,
}

#[inline]
fn bottom(seg: usize) -> usize {
    2 * seg
}

#[inline]
fn top(seg: usize) -> usize {
    2 * seg + 1
}

#[derive(Clone, Debug)]
pub struct LoopDecomposition {
    beta: f64,
    sites: usize,
    origin: usize,
    segments: Vec<Segment>,
    seg_offsets: Vec<usize>,
    partner: Vec<u32>,
    loop_of: Vec<u32>,
    order: Vec<(u32, Direction)>,
    loop_offsets: Vec<usize>,
}

/// Vertical lengths of the two arcs of γ_{0,x}, split at (0, 0) and the
/// terminal point.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitLengths {
    /// Arc from (0, 0+) upward to the terminal.
    pub plus: Vec<f64>,
    /// The complementary arc.
    pub minus: Vec<f64>,
}

/// Traces L(ω), starting each loop upward.
pub fn trace_loops(lattice: &Lattice, omega: &BridgeConfig) -> Result<LoopDecomposition> {
    LoopDecomposition::trace(lattice, omega, Direction::Up)
}

impl LoopDecomposition {
    pub fn trace(lattice: &Lattice, omega: &BridgeConfig, initial: Direction) -> Result<Self> {
        let n = lattice.len();
        if omega.sites() != n {
            return Err(Error::Malformed("configuration belongs to a different lattice".into()));
        }
        let beta = omega.beta();

        let mut seg_offsets = Vec::with_capacity(n + 1);
        let mut segments = Vec::with_capacity(2 * omega.len() + n);
        // Per bridge: (below, above) segment of its first and second endpoint.
        let mut ends = vec![[(u32::MAX, u32::MAX); 2]; omega.len()];
        seg_offsets.push(0);
        for x in 0..n {
            let events = omega.site_events(x);
            let base = segments.len();
            let k = events.len();
            if k == 0 {
                segments.push(Segment { site: x as u32, start: 0.0, len: beta });
            }
            for (j, ev) in events.iter().enumerate() {
                if j > 0 && ev.time <= events[j - 1].time {
                    return Err(Error::Malformed(format!("events at site {x} are not strictly increasing")));
                }
                let next = if j + 1 < k { events[j + 1].time } else { events[0].time + beta };
                segments.push(Segment { site: x as u32, start: ev.time, len: next - ev.time });
                let below = (base + (j + k - 1) % k) as u32;
                let above = (base + j) as u32;
                let b = ev.bridge as usize;
                let slot = usize::from(lattice.edges()[omega.bridges()[b].edge].0 != x);
                ends[b][slot] = (below, above);
            }
            seg_offsets.push(segments.len());
        }

        let mut partner = vec![u32::MAX; 2 * segments.len()];
        let mut link = |p: usize, q: usize| {
            partner[p] = q as u32;
            partner[q] = p as u32;
        };
        for (b, bridge) in omega.bridges().iter().enumerate() {
            let [(a_below, a_above), (b_below, b_above)] = ends[b];
            if a_below == u32::MAX || b_below == u32::MAX {
                return Err(Error::Malformed(format!("bridge {b} is missing from the site index")));
            }
            let (a_below, a_above, b_below, b_above) =
                (a_below as usize, a_above as usize, b_below as usize, b_above as usize);
            match bridge.kind {
                BridgeKind::Cross => {
                    link(top(a_below), bottom(b_above));
                    link(top(b_below), bottom(a_above));
                }
                BridgeKind::Bar => {
                    link(top(a_below), top(b_below));
                    link(bottom(a_above), bottom(b_above));
                }
            }
        }
        // A bridge-free column closes on itself.
        for x in 0..n {
            if seg_offsets[x + 1] - seg_offsets[x] == 1 && omega.site_events(x).is_empty() {
                let s = seg_offsets[x];
                partner[top(s)] = bottom(s) as u32;
                partner[bottom(s)] = top(s) as u32;
            }
        }

        let mut loop_of = vec![u32::MAX; segments.len()];
        let mut order = Vec::with_capacity(segments.len());
        let mut loop_offsets = vec![0];
        for s0 in 0..segments.len() {
            if loop_of[s0] != u32::MAX {
                continue;
            }
            let id = (loop_offsets.len() - 1) as u32;
            let (mut seg, mut dir) = (s0, initial);
            loop {
                loop_of[seg] = id;
                order.push((seg as u32, dir));
                let exit = match dir {
                    Direction::Up => top(seg),
                    Direction::Down => bottom(seg),
                };
                let entry = partner[exit] as usize;
                seg = entry / 2;
                dir = if entry % 2 == 0 { Direction::Up } else { Direction::Down };
                if seg == s0 {
                    if dir != initial {
                        return Err(Error::Malformed("loop re-entered its start against direction".into()));
                    }
                    break;
                }
                if loop_of[seg] != u32::MAX {
                    return Err(Error::Malformed("segment visited by two loops".into()));
                }
            }
            loop_offsets.push(order.len());
        }

        Ok(LoopDecomposition {
            beta,
            sites: n,
            origin: lattice.origin(),
            segments,
            seg_offsets,
            partner,
            loop_of,
            order,
            loop_offsets,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn loop_count(&self) -> usize {
        self.loop_offsets.len() - 1
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Segments of loop `id` in traversal order with their direction.
    pub fn loop_segments(&self, id: usize) -> impl Iterator<Item = (Segment, Direction)> + '_ {
        self.order[self.loop_offsets[id]..self.loop_offsets[id + 1]]
            .iter()
            .map(|&(s, d)| (self.segments[s as usize], d))
    }

    /// Index of the segment of column `site` containing time `t`; a time
    /// equal to an endpoint belongs to the segment starting there.
    pub fn segment_at(&self, site: usize, t: f64) -> usize {
        let col = &self.segments[self.seg_offsets[site]..self.seg_offsets[site + 1]];
        let j = col.partition_point(|s| s.start <= t);
        self.seg_offsets[site] + if j == 0 { col.len() - 1 } else { j - 1 }
    }

    fn offset_in(&self, seg: usize, t: f64) -> f64 {
        (t - self.segments[seg].start).rem_euclid(self.beta)
    }

    /// Id of the loop through (site, t).
    pub fn loop_through(&self, site: usize, t: f64) -> Option<usize> {
        if site >= self.sites || !(0.0..self.beta).contains(&t) {
            return None;
        }
        Some(self.loop_of[self.segment_at(site, t)] as usize)
    }

    /// Vertical length profile ℓ_y(γ) of loop `id`.
    pub fn loop_lengths(&self, id: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.sites];
        for (seg, _) in self.loop_segments(id) {
            out[seg.site as usize] += seg.len;
        }
        out
    }

    /// Σ_y h_y ℓ_y(γ) for every loop, indexed by loop id.
    pub fn weighted_lengths(&self, field: &Field) -> Vec<f64> {
        let mut out = vec![0.0; self.loop_count()];
        self.weighted_lengths_into(field, &mut out);
        out
    }

    pub fn weighted_lengths_into(&self, field: &Field, out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.loop_count(), 0.0);
        let h = field.values();
        for (seg, &id) in self.segments.iter().zip(&self.loop_of) {
            out[id as usize] += h[seg.site as usize] * seg.len;
        }
    }

    /// Sum of all vertical lengths over all loops; equals β|Λ|.
    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.len).sum()
    }

    /// Walks from (from, 0) upward until reaching (to, t), reporting each
    /// traversed piece as `(site, length)`.
    fn walk_arc(&self, from: usize, to: usize, t: f64, mut visit: impl FnMut(usize, f64)) -> Result<()> {
        if from >= self.sites || to >= self.sites {
            return Err(Error::pre("site outside the lattice"));
        }
        if !(0.0..self.beta).contains(&t) {
            return Err(Error::pre(format!("terminal time {t} outside [0, beta)")));
        }
        if from == to && t == 0.0 {
            return Err(Error::pre("terminal coincides with the starting point"));
        }
        let s0 = self.segment_at(from, 0.0);
        let target = self.segment_at(to, t);
        if self.loop_of[s0] != self.loop_of[target] {
            return Err(Error::pre("start and terminal lie on different loops"));
        }
        let off0 = self.offset_in(s0, 0.0);
        let off_t = self.offset_in(target, t);
        let site_of = |s: usize| self.segments[s].site as usize;

        if target == s0 && off_t > off0 {
            visit(from, off_t - off0);
            return Ok(());
        }
        visit(from, self.segments[s0].len - off0);
        let mut entry = self.partner[top(s0)] as usize;
        loop {
            let seg = entry / 2;
            let up = entry % 2 == 0;
            let len = self.segments[seg].len;
            if seg == target {
                visit(site_of(seg), if up { off_t } else { len - off_t });
                return Ok(());
            }
            visit(site_of(seg), len);
            entry = self.partner[if up { top(seg) } else { bottom(seg) }] as usize;
        }
    }

    /// ℓ⁺/ℓ⁻ for the loop through the origin and (x, t).
    pub fn split_lengths(&self, x: usize, t: f64) -> Result<SplitLengths> {
        let mut plus = vec![0.0; self.sites];
        self.walk_arc(self.origin, x, t, |y, len| plus[y] += len)?;
        let total = self.loop_lengths(self.loop_of[self.segment_at(self.origin, 0.0)] as usize);
        let minus = total.iter().zip(&plus).map(|(l, p)| (l - p).max(0.0)).collect();
        Ok(SplitLengths { plus, minus })
    }

    /// `(Σ h ℓ⁺, Σ h ℓ⁻)` for the loop through the origin and (x, t), or
    /// `None` if they lie on different loops.
    pub fn split_weighted(&self, x: usize, t: f64, field: &Field, loop_weights: &[f64]) -> Option<(f64, f64)> {
        let s0 = self.segment_at(self.origin, 0.0);
        let id = self.loop_of[s0] as usize;
        if id != self.loop_of[self.segment_at(x, t)] as usize {
            return None;
        }
        let h = field.values();
        let mut plus = 0.0;
        self.walk_arc(self.origin, x, t, |y, len| plus += h[y] * len).ok()?;
        Some((plus, (loop_weights[id] - plus).max(0.0)))
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    /// Loop dump: `loop,position,site,start,end,direction`; `end` may exceed
    /// β for a segment that wraps through time 0.
    pub fn write_csv<W: Write>(&self, lattice: &Lattice, mut out: W) -> Result<()> {
        writeln!(out, "# beta={:?} loops={}", self.beta, self.loop_count())?;
        writeln!(out, "loop,position,site,start,end,direction")?;
        for id in 0..self.loop_count() {
            for (pos, (seg, dir)) in self.loop_segments(id).enumerate() {
                let coords: Vec<String> = lattice.coords(seg.site as usize).iter().map(|c| c.to_string()).collect();
                let dir = match dir {
                    Direction::Up => "up",
                    Direction::Down => "down",
                };
                writeln!(
                    out,
                    "{id},{pos},{},{:?},{:?},{dir}",
                    coords.join(":"),
                    seg.start,
                    seg.start + seg.len
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridges::{Bridge, BridgeProcess};

    fn pair() -> Lattice {
        Lattice::segment(2).unwrap()
    }

    fn cfg(l: &Lattice, beta: f64, bridges: &[(usize, f64, BridgeKind)]) -> BridgeConfig {
        let list = bridges.iter().map(|&(edge, time, kind)| Bridge { edge, time, kind }).collect();
        BridgeConfig::new(l, beta, list).unwrap()
    }

    #[test]
    fn empty_configuration_gives_one_circle_per_site() {
        let l = Lattice::new_box(2, 2).unwrap();
        let d = trace_loops(&l, &BridgeConfig::empty(&l, 1.5)).unwrap();
        assert_eq!(d.loop_count(), 9);
        for id in 0..9 {
            let len = d.loop_lengths(id);
            assert_eq!(len.iter().filter(|&&v| v == 1.5).count(), 1);
            assert_eq!(len.iter().sum::<f64>(), 1.5);
        }
        let o = l.origin();
        for x in 0..l.len() {
            if x != o {
                assert_ne!(d.loop_through(o, 0.0), d.loop_through(x, 0.0));
            }
        }
    }

    #[test]
    fn single_bar_joins_both_columns() {
        let l = pair();
        let t = 0.3;
        let d = trace_loops(&l, &cfg(&l, 1.0, &[(0, t, BridgeKind::Bar)])).unwrap();
        assert_eq!(d.loop_count(), 1);
        assert_eq!(d.loop_lengths(0), vec![1.0, 1.0]);
        assert_eq!(d.loop_through(0, 0.0), d.loop_through(1, 0.0));

        // Up from (0,0) to the bar at t, across, down from t to (1,0).
        let split = d.split_lengths(1, 0.0).unwrap();
        assert!((split.plus[0] - t).abs() < 1e-12);
        assert!((split.plus[1] - t).abs() < 1e-12);
        assert!((split.minus[0] - (1.0 - t)).abs() < 1e-12);
        assert!((split.minus[1] - (1.0 - t)).abs() < 1e-12);
    }

    #[test]
    fn single_cross_joins_both_columns() {
        let l = pair();
        let d = trace_loops(&l, &cfg(&l, 1.0, &[(0, 0.6, BridgeKind::Cross)])).unwrap();
        assert_eq!(d.loop_count(), 1);
        // Up from (0,0) to 0.6, across, up to β and wrap to (1,0).
        let split = d.split_lengths(1, 0.0).unwrap();
        assert!((split.plus[0] - 0.6).abs() < 1e-12);
        assert!((split.plus[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn two_crosses_make_two_loops_through_both_sites() {
        let l = pair();
        let d = trace_loops(&l, &cfg(&l, 1.0, &[(0, 0.2, BridgeKind::Cross), (0, 0.7, BridgeKind::Cross)])).unwrap();
        assert_eq!(d.loop_count(), 2);
        for id in 0..2 {
            let len = d.loop_lengths(id);
            assert!((len.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(len.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn loop_id_constant_within_segment() {
        let l = Lattice::new_box(1, 4).unwrap();
        let omega = BridgeProcess::new(2.0, 0.5, 1.0).unwrap().sample(&l, 4, 0);
        let d = trace_loops(&l, &omega).unwrap();
        for seg in d.segments() {
            let a = d.loop_through(seg.site as usize, seg.start);
            for frac in [0.1, 0.5, 0.9] {
                let t = (seg.start + frac * seg.len).rem_euclid(2.0);
                assert_eq!(d.loop_through(seg.site as usize, t), a);
            }
        }
    }

    #[test]
    fn degenerate_and_disconnected_splits_rejected() {
        let l = pair();
        let d = trace_loops(&l, &cfg(&l, 1.0, &[(0, 0.3, BridgeKind::Bar)])).unwrap();
        assert!(matches!(d.split_lengths(0, 0.0), Err(Error::Precondition(_))));
        let e = trace_loops(&l, &BridgeConfig::empty(&l, 1.0)).unwrap();
        assert!(matches!(e.split_lengths(1, 0.0), Err(Error::Precondition(_))));
        assert!(e.split_weighted(1, 0.0, &Field::uniform(2, 1.0), &[1.0, 1.0]).is_none());
    }

    #[test]
    fn csv_dump_lists_every_segment() {
        let l = pair();
        let d = trace_loops(&l, &cfg(&l, 1.0, &[(0, 0.3, BridgeKind::Bar)])).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&l, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2 + d.segments().len());
    }
}
