use serde::{Deserialize, Serialize};

use super::{Map2, RasterMap};
use crate::scalar::Real;

/// Mirror applied to an image: horizontal reverses columns, vertical
/// reverses rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flip {
    Identity,
    Horizontal,
    Vertical,
    Both,
}

impl Flip {
    pub const ALL: [Flip; 4] = [Flip::Identity, Flip::Horizontal, Flip::Vertical, Flip::Both];

    fn axes(self) -> (bool, bool) {
        match self {
            Flip::Identity => (false, false),
            Flip::Horizontal => (false, true),
            Flip::Vertical => (true, false),
            Flip::Both => (true, true),
        }
    }

    /// Flips a row-major `h x w x channels` buffer.
    pub fn apply_hwc<V: Copy>(self, data: &[V], h: usize, w: usize, channels: usize) -> Vec<V> {
        assert_eq!(data.len(), h * w * channels);
        let (rows, cols) = self.axes();
        if !rows && !cols {
            return data.to_vec();
        }
        let mut out = Vec::with_capacity(data.len());
        for r in 0..h {
            let sr = if rows { h - 1 - r } else { r };
            for c in 0..w {
                let sc = if cols { w - 1 - c } else { c };
                let base = (sr * w + sc) * channels;
                out.extend_from_slice(&data[base..base + channels]);
            }
        }
        out
    }

    pub fn apply_map<T: Copy>(self, map: &Map2<T>) -> Map2<T> {
        Map2::from_vec(
            map.height(),
            map.width(),
            self.apply_hwc(map.data(), map.height(), map.width(), 1),
        )
    }
}

/// Identity, horizontal, vertical and double flips of both channels.
pub fn mirror_variants<T: Real>(map: &RasterMap<T>) -> [RasterMap<T>; 4] {
    Flip::ALL.map(|f| mirror(map, f))
}

pub fn mirror<T: Real>(map: &RasterMap<T>, flip: Flip) -> RasterMap<T> {
    let (h, w) = (map.height(), map.width());
    RasterMap {
        frame: map.frame,
        values: flip.apply_map(&map.values),
        mask: flip.apply_hwc(&map.mask, h, w, 1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flips_small_grid() {
        let d = [1, 2, 3, 4, 5, 6];
        assert_eq!(Flip::Horizontal.apply_hwc(&d, 2, 3, 1), vec![3, 2, 1, 6, 5, 4]);
        assert_eq!(Flip::Vertical.apply_hwc(&d, 2, 3, 1), vec![4, 5, 6, 1, 2, 3]);
        assert_eq!(Flip::Both.apply_hwc(&d, 2, 3, 1), vec![6, 5, 4, 3, 2, 1]);
        // channels move together
        let two = [1, 10, 2, 20];
        assert_eq!(Flip::Horizontal.apply_hwc(&two, 1, 2, 2), vec![2, 20, 1, 10]);
    }

    #[test]
    fn flips_are_involutions() {
        let d: Vec<u32> = (0..35).collect();
        for f in Flip::ALL {
            assert_eq!(f.apply_hwc(&f.apply_hwc(&d, 5, 7, 1), 5, 7, 1), d);
        }
    }
}
