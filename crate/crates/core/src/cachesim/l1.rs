use super::{CacheGeometry, MonitorConfig};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BlockMeta<F> {
    /// Full line address (address / line size).
    pub tag: u64,
    pub valid: bool,
    pub dirty: bool,
    /// Larger is more recently used.
    pub lru_stamp: u64,
    pub last_write_ns: F,
}

/// Result of one L1 lookup. Lines that must be written to L2 are pushed to
/// the caller's buffer: expired dirty blocks first, then the dirty victim.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct L1Access<F> {
    pub hit: bool,
    pub expiry_evictions: u32,
    pub expiry_writebacks: u32,
    pub replacement_eviction: bool,
    pub replacement_writeback: bool,
    /// Data age of the block that served a hit.
    pub hit_age_ns: Option<F>,
}

/// Write-allocate, writeback, LRU cache whose blocks expire once their age
/// since last write reaches the monitor threshold.
#[derive(Clone, Debug)]
pub struct L1Cache<F> {
    geometry: CacheGeometry,
    sets: usize,
    ways: usize,
    line_shift: u32,
    blocks: Vec<BlockMeta<F>>,
    threshold_ns: F,
    stamp: u64,
}

impl<F: Scalar> L1Cache<F> {
    /// Geometry is assumed valid.
    pub fn new(geometry: CacheGeometry, monitor: &MonitorConfig, retention_ns: F) -> Self {
        let sets = geometry.sets();
        let ways = geometry.associativity as usize;
        Self {
            geometry,
            sets,
            ways,
            line_shift: geometry.line_bytes.trailing_zeros(),
            blocks: vec![BlockMeta::default(); sets * ways],
            threshold_ns: monitor.threshold_ns(retention_ns),
            stamp: 0,
        }
    }

    pub fn geometry(&self) -> &CacheGeometry {
        &self.geometry
    }

    pub fn threshold_ns(&self) -> F {
        self.threshold_ns
    }

    pub fn line_of(&self, address: u64) -> u64 {
        address >> self.line_shift
    }

    pub fn set_of(&self, line: u64) -> usize {
        (line % self.sets as u64) as usize
    }

    pub fn blocks(&self) -> &[BlockMeta<F>] {
        &self.blocks
    }

    pub fn valid_blocks(&self) -> usize {
        self.blocks.iter().filter(|b| b.valid).count()
    }

    fn expired(&self, b: &BlockMeta<F>, now: F) -> bool {
        b.valid && now - b.last_write_ns >= self.threshold_ns
    }

    fn expire_range(&mut self, range: std::ops::Range<usize>, now: F, writebacks: &mut Vec<u64>) -> (u32, u32) {
        let mut evicted = 0;
        let mut written = 0;
        if !self.threshold_ns.is_finite() {
            return (0, 0);
        }
        for i in range {
            if self.expired(&self.blocks[i], now) {
                let b = &mut self.blocks[i];
                evicted += 1;
                if b.dirty {
                    written += 1;
                    writebacks.push(b.tag);
                }
                b.valid = false;
                b.dirty = false;
            }
        }
        (evicted, written)
    }

    pub fn access(&mut self, line: u64, is_write: bool, now: F, writebacks: &mut Vec<u64>) -> L1Access<F> {
        let set = self.set_of(line);
        let base = set * self.ways;
        let (expiry_evictions, expiry_writebacks) = self.expire_range(base..base + self.ways, now, writebacks);
        self.stamp += 1;
        let stamp = self.stamp;
        let mut out = L1Access {
            expiry_evictions,
            expiry_writebacks,
            ..Default::default()
        };

        let ways = &mut self.blocks[base..base + self.ways];
        if let Some(b) = ways.iter_mut().find(|b| b.valid && b.tag == line) {
            let age = now - b.last_write_ns;
            debug_assert!(
                !(age >= self.threshold_ns),
                "hit on line {line:#x} at age {age} >= threshold {}",
                self.threshold_ns
            );
            out.hit = true;
            out.hit_age_ns = Some(age);
            b.lru_stamp = stamp;
            if is_write {
                b.dirty = true;
                b.last_write_ns = now;
            }
            return out;
        }

        let victim = match ways.iter().position(|b| !b.valid) {
            Some(i) => i,
            None => {
                let (i, _) = ways
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, b)| b.lru_stamp)
                    .expect("associativity >= 1");
                out.replacement_eviction = true;
                if ways[i].dirty {
                    out.replacement_writeback = true;
                    writebacks.push(ways[i].tag);
                }
                i
            }
        };
        ways[victim] = BlockMeta {
            tag: line,
            valid: true,
            dirty: is_write,
            lru_stamp: stamp,
            last_write_ns: now,
        };
        out
    }

    /// Invalidates every block whose age has reached the threshold.
    /// Returns (evictions, writebacks).
    pub fn sweep(&mut self, now: F, writebacks: &mut Vec<u64>) -> (u32, u32) {
        self.expire_range(0..self.blocks.len(), now, writebacks)
    }

    /// Moves the contents into an array with a different retention time:
    /// every resident block is rewritten at `now`.
    pub fn migrate(&mut self, monitor: &MonitorConfig, retention_ns: F, now: F) {
        self.threshold_ns = monitor.threshold_ns(retention_ns);
        for b in self.blocks.iter_mut().filter(|b| b.valid) {
            b.last_write_ns = now;
        }
    }
}
