use super::CacheGeometry;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct L2Block {
    tag: u64,
    valid: bool,
    dirty: bool,
    lru_stamp: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct L2Outcome {
    pub hit: bool,
    /// A dirty victim was written to memory.
    pub writeback: bool,
}

/// SRAM L2: LRU, write-allocate, writeback, no back-invalidation.
#[derive(Clone, Debug)]
pub struct L2Cache {
    sets: usize,
    ways: usize,
    blocks: Vec<L2Block>,
    stamp: u64,
}

impl L2Cache {
    /// Geometry is assumed valid; addresses are given as L1 line numbers
    /// and the two levels share a line size.
    pub fn new(geometry: CacheGeometry) -> Self {
        let sets = geometry.sets();
        let ways = geometry.associativity as usize;
        Self {
            sets,
            ways,
            blocks: vec![L2Block::default(); sets * ways],
            stamp: 0,
        }
    }

    pub fn access(&mut self, line: u64, is_write: bool) -> L2Outcome {
        let base = (line % self.sets as u64) as usize * self.ways;
        self.stamp += 1;
        let stamp = self.stamp;
        let ways = &mut self.blocks[base..base + self.ways];
        if let Some(b) = ways.iter_mut().find(|b| b.valid && b.tag == line) {
            b.lru_stamp = stamp;
            b.dirty |= is_write;
            return L2Outcome { hit: true, writeback: false };
        }
        let victim = match ways.iter().position(|b| !b.valid) {
            Some(i) => i,
            None => ways
                .iter()
                .enumerate()
                .min_by_key(|(_, b)| b.lru_stamp)
                .map(|(i, _)| i)
                .expect("associativity >= 1"),
        };
        let writeback = ways[victim].valid && ways[victim].dirty;
        ways[victim] = L2Block {
            tag: line,
            valid: true,
            dirty: is_write,
            lru_stamp: stamp,
        };
        L2Outcome { hit: false, writeback }
    }
}
