//! Self-intersection local time B_n, block decompositions and two-walk
//! intersection counts.

use crate::error::{Error, Result};
use crate::lattice::Point;
use crate::occupation::OccupationMap;
use crate::returns::ExpectedSilt;
use crate::walk::Path;

/// Largest path accepted by the quadratic brute-force oracle.
pub const EXACT_MAX_LEN: usize = 100_000;

/// Occupation field l(n, ·) together with the running value of B_n.
///
/// Pushing S_{n+1} adds l(n, S_{n+1}) to B, since the new time pairs with
/// every earlier visit to the same site.
#[derive(Debug, Clone, Default)]
pub struct SiltAccumulator {
    occupation: OccupationMap,
    n: u64,
    b: u64,
    /// Σ_x l(n,x)², maintained alongside B for the counting identity.
    sum_sq: u64,
}

impl SiltAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(sites: usize) -> Self {
        SiltAccumulator {
            occupation: OccupationMap::with_capacity(sites),
            ..Default::default()
        }
    }

    #[inline]
    pub fn push(&mut self, p: Point) {
        let before = self.occupation.increment(p) as u64;
        self.n += 1;
        self.b += before;
        self.sum_sq += 2 * before + 1;
        debug_assert_eq!(self.sum_sq, self.n + 2 * self.b);
    }

    /// Removes one visit at `p`; the inverse of [`push`](Self::push) for any
    /// visit, not only the most recent one.
    #[inline]
    pub fn remove(&mut self, p: Point) {
        let after = self.occupation.decrement(p) as u64;
        self.n -= 1;
        self.b -= after;
        self.sum_sq -= 2 * after + 1;
        debug_assert_eq!(self.sum_sq, self.n + 2 * self.b);
    }

    pub fn extend<I: IntoIterator<Item = Point>>(&mut self, points: I) {
        for p in points {
            self.push(p);
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    pub fn sum_sq(&self) -> u64 {
        self.sum_sq
    }

    pub fn occupation(&self) -> &OccupationMap {
        &self.occupation
    }

    pub fn clear(&mut self) {
        self.occupation.clear();
        self.n = 0;
        self.b = 0;
        self.sum_sq = 0;
    }

    /// Recomputes Σl, ΣC(l,2) and Σl² from the occupation field and checks
    /// them against the running values.
    pub fn check_invariants(&self) -> bool {
        let (mut total, mut pairs, mut sq) = (0u64, 0u64, 0u64);
        for (_, c) in self.occupation.iter() {
            let c = c as u64;
            total += c;
            pairs += c * (c - 1) / 2;
            sq += c * c;
        }
        total == self.n && pairs == self.b && sq == self.sum_sq && sq == self.n + 2 * self.b
    }
}

/// B_n by streaming the path through a [`SiltAccumulator`].
pub fn silt(path: &Path) -> u64 {
    let mut acc = SiltAccumulator::with_capacity(path.len());
    acc.extend(path.points().iter().copied());
    acc.b()
}

/// B_n by the double loop over 1 ≤ j < k ≤ n. Test oracle, O(n²).
pub fn silt_exact(path: &Path) -> Result<u64> {
    let pts = path.points();
    if pts.len() > EXACT_MAX_LEN {
        return Err(Error::PathTooLong {
            n: pts.len(),
            max: EXACT_MAX_LEN,
        });
    }
    let mut count = 0u64;
    for (j, a) in pts.iter().enumerate() {
        count += pts[j + 1..].iter().filter(|b| *b == a).count() as u64;
    }
    Ok(count)
}

/// γ_n = B_n - E B_n.
pub fn renormalized_silt(path: &Path, expectation: &mut ExpectedSilt) -> f64 {
    silt(path) as f64 - expectation.value(path.len())
}

/// Half-open time window (lo, hi], 1-based as in the sums over j.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub lo: usize,
    pub hi: usize,
}

impl Window {
    pub fn new(lo: usize, hi: usize) -> Self {
        Window { lo, hi }
    }

    pub fn len(&self) -> usize {
        self.hi.saturating_sub(self.lo)
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    /// Positions S_j for j in the window.
    fn slice<'a>(&self, pts: &'a [Point]) -> &'a [Point] {
        &pts[self.lo..self.hi]
    }
}

/// One piece of an index set A ⊂ {(j, k): j < k}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockPart {
    /// J_a × J_b with J_a entirely before J_b.
    Rect(Window, Window),
    /// (lo, hi]²_< : pairs j < k inside one window.
    Triangle(Window),
}

/// Index set given as a union of rectangles and triangles.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlockSpec {
    pub parts: Vec<BlockPart>,
}

impl BlockSpec {
    pub fn new(parts: Vec<BlockPart>) -> Self {
        BlockSpec { parts }
    }

    /// The whole pair set (0, n]²_<.
    pub fn full(n: usize) -> Self {
        BlockSpec::new(vec![BlockPart::Triangle(Window::new(0, n))])
    }

    /// D_1..D_l of near-equal length: within-block triangles D_i* plus all
    /// cross rectangles D_j × D_k, j < k.
    pub fn equal_partition(n: usize, l: usize) -> Self {
        let windows = equal_windows(n, l);
        let mut parts: Vec<BlockPart> = windows.iter().map(|&w| BlockPart::Triangle(w)).collect();
        for (j, &a) in windows.iter().enumerate() {
            for &b in &windows[j + 1..] {
                parts.push(BlockPart::Rect(a, b));
            }
        }
        BlockSpec::new(parts)
    }

    /// Dyadic split of (0, 2^levels]: at level j = 1..=depth the rectangles
    /// ((2k-2)2^{levels-j}, (2k-1)2^{levels-j}] × ((2k-1)2^{levels-j}, 2k·2^{levels-j}],
    /// plus the within-block triangles left over at the bottom level. With
    /// `depth == levels` the bottom blocks are single times and no triangles
    /// remain.
    pub fn dyadic(levels: u32, depth: u32) -> Self {
        assert!(depth <= levels);
        let mut parts = Vec::new();
        for j in 1..=depth {
            let len = 1usize << (levels - j);
            for k in 1..=(1usize << (j - 1)) {
                let a = Window::new((2 * k - 2) * len, (2 * k - 1) * len);
                let b = Window::new((2 * k - 1) * len, 2 * k * len);
                parts.push(BlockPart::Rect(a, b));
            }
        }
        let len = 1usize << (levels - depth);
        if len > 1 {
            for k in 0..(1usize << depth) {
                parts.push(BlockPart::Triangle(Window::new(k * len, (k + 1) * len)));
            }
        }
        BlockSpec::new(parts)
    }

    fn validate(&self, n: usize) -> Result<()> {
        for part in &self.parts {
            match *part {
                BlockPart::Triangle(w) => {
                    if w.lo > w.hi || w.hi > n {
                        return Err(Error::MalformedBlock(format!("triangle ({}, {}] outside (0, {n}]", w.lo, w.hi)));
                    }
                }
                BlockPart::Rect(a, b) => {
                    if a.lo > a.hi || b.lo > b.hi || b.hi > n {
                        return Err(Error::MalformedBlock(format!(
                            "rectangle ({}, {}] × ({}, {}] outside (0, {n}]",
                            a.lo, a.hi, b.lo, b.hi
                        )));
                    }
                    if a.hi > b.lo {
                        return Err(Error::MalformedBlock(format!(
                            "rectangle ({}, {}] × ({}, {}] admits pairs with j >= k",
                            a.lo, a.hi, b.lo, b.hi
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Windows (0, n] split into l pieces of length ⌊n/l⌋ or ⌊n/l⌋ + 1.
pub fn equal_windows(n: usize, l: usize) -> Vec<Window> {
    assert!(l >= 1);
    let base = n / l;
    let extra = n % l;
    let mut lo = 0;
    (0..l)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let w = Window::new(lo, lo + len);
            lo += len;
            w
        })
        .collect()
}

/// B(A) = Σ_{(j,k)∈A} δ(S_j, S_k), computed part by part. Rectangles cost
/// O(|J_a| + |J_b|) through the occupation field of J_a.
pub fn block_silt(path: &Path, block: &BlockSpec) -> Result<u64> {
    block.validate(path.len())?;
    let pts = path.points();
    let mut occ = OccupationMap::new();
    let mut total = 0u64;
    for part in &block.parts {
        occ.clear();
        match *part {
            BlockPart::Triangle(w) => {
                for &p in w.slice(pts) {
                    total += occ.increment(p) as u64;
                }
            }
            BlockPart::Rect(a, b) => {
                for &p in a.slice(pts) {
                    occ.increment(p);
                }
                total += b.slice(pts).iter().map(|&p| occ.get(p) as u64).sum::<u64>();
            }
        }
    }
    Ok(total)
}

/// I_{m,n}(y) = #{(j, k): j ≤ m, k ≤ n, S_j = S'_k + y}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossIntersection {
    pub m: usize,
    pub n: usize,
    pub shift: Point,
    pub count: u64,
}

/// Counts meetings of the first m steps of `first` with the first n steps of
/// `second` shifted by `shift`, through the occupation field of the shorter
/// window: I = Σ_x l(m, x) l'(n, x - y).
pub fn cross_intersections(first: &Path, second: &Path, m: usize, n: usize, shift: Point) -> Result<CrossIntersection> {
    if m > first.len() || n > second.len() {
        return Err(Error::InvalidArgument(format!(
            "horizons ({m}, {n}) exceed path lengths ({}, {})",
            first.len(),
            second.len()
        )));
    }
    let a = &first.points()[..m];
    let b = &second.points()[..n];
    let mut occ = OccupationMap::with_capacity(m.min(n));
    let count = if m <= n {
        a.iter().for_each(|&p| {
            occ.increment(p);
        });
        b.iter().map(|&p| occ.get(p + shift) as u64).sum()
    } else {
        b.iter().for_each(|&p| {
            occ.increment(p + shift);
        });
        a.iter().map(|&p| occ.get(p) as u64).sum()
    };
    Ok(CrossIntersection { m, n, shift, count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::{sample_path, StepDistribution};
    use proptest::prelude::*;

    fn path(pts: &[(i32, i32)]) -> Path {
        Path::from_points(pts.iter().map(|&p| p.into()).collect())
    }

    #[test]
    fn first_point_has_no_pairs() {
        let mut acc = SiltAccumulator::new();
        acc.push(Point::new(3, -1));
        assert_eq!(acc.b(), 0);
        assert_eq!(acc.n(), 1);
    }

    #[test]
    fn small_examples() {
        assert_eq!(silt(&path(&[(1, 0), (0, 0), (1, 0)])), 1);
        assert_eq!(silt_exact(&path(&[(1, 0), (0, 0), (1, 0)])).unwrap(), 1);
        assert_eq!(silt_exact(&path(&[(1, 0), (0, 0), (1, 0), (0, 0)])).unwrap(), 2);
        assert_eq!(silt(&path(&[(1, 0), (0, 0), (1, 0), (0, 0)])), 2);
        assert_eq!(silt_exact(&path(&[(0, 1), (0, 2), (0, 3)])).unwrap(), 0);
    }

    #[test]
    fn constant_path_maximizes() {
        let n = 100;
        let p = Path::from_points(vec![Point::new(0, 0); n]);
        assert_eq!(silt(&p), (n * (n - 1) / 2) as u64);
    }

    #[test]
    fn exact_refuses_long_paths() {
        let p = Path::from_points(vec![Point::ORIGIN; EXACT_MAX_LEN + 1]);
        assert!(matches!(silt_exact(&p), Err(Error::PathTooLong { .. })));
    }

    #[test]
    fn accumulator_removal_inverts_push() {
        let d = StepDistribution::lazy();
        let p = sample_path(&d, 300, 4, 0).unwrap();
        let mut acc = SiltAccumulator::new();
        acc.extend(p.points().iter().copied());
        let b = acc.b();
        acc.push(Point::new(0, 0));
        acc.remove(Point::new(0, 0));
        assert_eq!(acc.b(), b);
        for &q in p.points()[..150].iter() {
            acc.remove(q);
        }
        let tail = Path::from_points(p.points()[150..].to_vec());
        assert_eq!(acc.b(), silt_exact(&tail).unwrap());
        assert!(acc.check_invariants());
    }

    #[test]
    fn full_triangle_is_silt() {
        let d = StepDistribution::lazy();
        let p = sample_path(&d, 500, 9, 2).unwrap();
        assert_eq!(block_silt(&p, &BlockSpec::full(500)).unwrap(), silt_exact(&p).unwrap());
    }

    #[test]
    fn malformed_blocks_rejected() {
        let p = Path::from_points(vec![Point::ORIGIN; 10]);
        let overlapping = BlockSpec::new(vec![BlockPart::Rect(Window::new(0, 6), Window::new(5, 10))]);
        assert!(matches!(block_silt(&p, &overlapping), Err(Error::MalformedBlock(_))));
        let outside = BlockSpec::new(vec![BlockPart::Triangle(Window::new(0, 11))]);
        assert!(matches!(block_silt(&p, &outside), Err(Error::MalformedBlock(_))));
    }

    #[test]
    fn dyadic_spec_covers_all_pairs() {
        for (levels, depth) in [(3, 3), (5, 2), (6, 0)] {
            let n = 1usize << levels;
            let spec = BlockSpec::dyadic(levels, depth);
            let mut covered = vec![0u8; n * n];
            for part in &spec.parts {
                match *part {
                    BlockPart::Rect(a, b) => {
                        for j in a.lo..a.hi {
                            for k in b.lo..b.hi {
                                covered[j * n + k] += 1;
                            }
                        }
                    }
                    BlockPart::Triangle(w) => {
                        for j in w.lo..w.hi {
                            for k in j + 1..w.hi {
                                covered[j * n + k] += 1;
                            }
                        }
                    }
                }
            }
            for j in 0..n {
                for k in 0..n {
                    assert_eq!(covered[j * n + k], u8::from(j < k), "levels {levels} depth {depth} ({j},{k})");
                }
            }
        }
    }

    #[test]
    fn cross_intersection_extremes() {
        let a = Path::from_points(vec![Point::new(2, 2); 7]);
        let b = Path::from_points(vec![Point::new(2, 2); 5]);
        assert_eq!(cross_intersections(&a, &b, 7, 5, Point::ORIGIN).unwrap().count, 35);
        let left = path(&[(-1, 0), (-2, 0), (-3, 5)]);
        let right = path(&[(1, 0), (2, 0), (3, 5)]);
        assert_eq!(cross_intersections(&left, &right, 3, 3, Point::ORIGIN).unwrap().count, 0);
        assert!(cross_intersections(&left, &right, 4, 3, Point::ORIGIN).is_err());
    }

    #[test]
    fn cross_intersection_matches_double_loop() {
        let d = StepDistribution::lazy();
        let a = sample_path(&d, 200, 11, 0).unwrap();
        let b = sample_path(&d, 200, 11, 1).unwrap();
        for shift in [Point::ORIGIN, Point::new(1, -2)] {
            let brute = a
                .points()
                .iter()
                .map(|&p| b.points().iter().filter(|&&q| p == q + shift).count() as u64)
                .sum::<u64>();
            assert_eq!(cross_intersections(&a, &b, 200, 200, shift).unwrap().count, brute);
            assert!(brute <= 200 * 200);
        }
    }

    proptest! {
        #[test]
        fn incremental_equals_brute_force(seed in any::<u64>(), n in 1usize..400) {
            let d = StepDistribution::lazy();
            let p = sample_path(&d, n, seed, 0).unwrap();
            let mut acc = SiltAccumulator::new();
            for &q in p.points() {
                acc.push(q);
            }
            prop_assert!(acc.check_invariants());
            prop_assert_eq!(acc.b(), silt_exact(&p).unwrap());
        }

        #[test]
        fn partitions_reproduce_silt(seed in any::<u64>(), n in 1usize..300, l in 1usize..7) {
            let d = StepDistribution::king();
            let p = sample_path(&d, n, seed, 3).unwrap();
            prop_assert_eq!(block_silt(&p, &BlockSpec::equal_partition(n, l)).unwrap(), silt_exact(&p).unwrap());
        }

        #[test]
        fn shift_symmetry(seed in any::<u64>(), m in 1usize..80, n in 1usize..80, dx in -3i32..3, dy in -3i32..3) {
            let d = StepDistribution::lazy();
            let a = sample_path(&d, m, seed, 0).unwrap();
            let b = sample_path(&d, n, seed, 1).unwrap();
            let y = Point::new(dx, dy);
            let forward = cross_intersections(&a, &b, m, n, y).unwrap().count;
            let backward = cross_intersections(&b, &a, n, m, -y).unwrap().count;
            let moved = cross_intersections(&a, &b.shifted(y), m, n, Point::ORIGIN).unwrap().count;
            prop_assert_eq!(forward, backward);
            prop_assert_eq!(forward, moved);
        }
    }
}
