//! Open-addressing occupation field keyed by packed lattice points.
//!
//! Keys are the two 32-bit coordinates packed into one `u64`, hashed by a
//! multiply-shift and probed linearly. Counts that drop to zero leave their
//! key in place, so no tombstones are needed.

use crate::lattice::Point;

const EMPTY: u64 = u64::MAX;
const MIN_CAPACITY: usize = 64;
const SIGN: u32 = 0x8000_0000;

#[inline]
fn pack(p: Point) -> u64 {
    // Sign bits flipped so that EMPTY decodes to (i32::MAX, i32::MAX).
    (((p.x as u32 ^ SIGN) as u64) << 32) | (p.y as u32 ^ SIGN) as u64
}

#[inline]
fn unpack(k: u64) -> Point {
    Point::new(((k >> 32) as u32 ^ SIGN) as i32, (k as u32 ^ SIGN) as i32)
}

#[derive(Debug, Clone)]
pub struct OccupationMap {
    keys: Vec<u64>,
    counts: Vec<u32>,
    shift: u32,
    /// Slots holding a key, in insertion order.
    used: Vec<u32>,
    /// Number of sites with nonzero count.
    live: usize,
}

impl Default for OccupationMap {
    fn default() -> Self {
        Self::with_capacity(MIN_CAPACITY)
    }
}

impl OccupationMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Map sized for about `sites` distinct sites before the first resize.
    pub fn with_capacity(sites: usize) -> Self {
        let cap = (sites * 2).max(MIN_CAPACITY).next_power_of_two();
        OccupationMap {
            keys: vec![EMPTY; cap],
            counts: vec![0; cap],
            shift: 64 - cap.trailing_zeros(),
            used: Vec::new(),
            live: 0,
        }
    }

    #[inline]
    fn slot_of(&self, key: u64) -> usize {
        (key.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> self.shift) as usize
    }

    #[inline]
    fn find(&self, key: u64) -> Result<usize, usize> {
        let mask = self.keys.len() - 1;
        let mut i = self.slot_of(key);
        loop {
            let k = self.keys[i];
            if k == key {
                return Ok(i);
            }
            if k == EMPTY {
                return Err(i);
            }
            i = (i + 1) & mask;
        }
    }

    /// Visit count at `p`.
    #[inline]
    pub fn get(&self, p: Point) -> u32 {
        match self.find(pack(p)) {
            Ok(i) => self.counts[i],
            Err(_) => 0,
        }
    }

    /// Adds one visit at `p` and returns the count before the visit.
    #[inline]
    pub fn increment(&mut self, p: Point) -> u32 {
        let key = pack(p);
        debug_assert_ne!(key, EMPTY, "point {p} collides with the empty-slot marker");
        let i = match self.find(key) {
            Ok(i) => i,
            Err(i) => {
                if (self.used.len() + 1) * 2 > self.keys.len() {
                    self.grow();
                    return self.increment(p);
                }
                self.keys[i] = key;
                self.used.push(i as u32);
                i
            }
        };
        let before = self.counts[i];
        if before == 0 {
            self.live += 1;
        }
        self.counts[i] = before + 1;
        before
    }

    /// Removes one visit at `p` and returns the count after removal.
    ///
    /// Panics if `p` has no visits.
    #[inline]
    pub fn decrement(&mut self, p: Point) -> u32 {
        let i = match self.find(pack(p)) {
            Ok(i) if self.counts[i] > 0 => i,
            _ => panic!("decrement of unvisited site {p}"),
        };
        self.counts[i] -= 1;
        if self.counts[i] == 0 {
            self.live -= 1;
        }
        self.counts[i]
    }

    fn grow(&mut self) {
        let old_keys = std::mem::take(&mut self.keys);
        let old_counts = std::mem::take(&mut self.counts);
        // Sized from live sites, so zero-count keys left behind by
        // decrements are compacted away instead of doubling the table.
        let cap = ((self.live + 1) * 4).next_power_of_two().max(MIN_CAPACITY);
        self.keys = vec![EMPTY; cap];
        self.counts = vec![0; cap];
        self.shift = 64 - cap.trailing_zeros();
        let old_used = std::mem::take(&mut self.used);
        self.used.reserve(old_used.len());
        for &s in &old_used {
            let s = s as usize;
            // Zero-count keys are dropped on rehash.
            if old_counts[s] == 0 {
                continue;
            }
            let key = old_keys[s];
            let slot = self.find(key).unwrap_err();
            self.keys[slot] = key;
            self.counts[slot] = old_counts[s];
            self.used.push(slot as u32);
        }
    }

    /// Number of sites with at least one visit.
    pub fn distinct(&self) -> usize {
        self.live
    }

    /// Empties the map, keeping its allocation. Cost is proportional to the
    /// number of keys inserted since the last clear.
    pub fn clear(&mut self) {
        for &s in &self.used {
            self.keys[s as usize] = EMPTY;
            self.counts[s as usize] = 0;
        }
        self.used.clear();
        self.live = 0;
    }

    /// Visited sites and their counts, in first-visit order.
    pub fn iter(&self) -> impl Iterator<Item = (Point, u32)> + '_ {
        self.used.iter().filter_map(move |&s| {
            let c = self.counts[s as usize];
            (c > 0).then(|| (unpack(self.keys[s as usize]), c))
        })
    }

    /// Visited sites sorted by (x, y).
    pub fn sorted(&self) -> Vec<(Point, u32)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by_key(|e| e.0);
        v
    }
}
