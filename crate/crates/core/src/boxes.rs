//! Axis-aligned n-cubes with exact dyadic coordinates and the standard
//! 2^n subdivision operator.

use num_rational::BigRational;
use num_traits::Signed;

use crate::arith::{pow_i, rat, rat_int};

/// Closed axis-aligned cube `center + [-width/2, width/2]^n`.
///
/// Centers and widths are exact rationals; starting from `[-a, a]^n` every
/// descendant has width `2a / 2^depth`, so midpoints stay exact at any depth.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NBox {
    center: Vec<BigRational>,
    width: BigRational,
    depth: u32,
}

impl NBox {
    pub fn new(center: Vec<BigRational>, width: BigRational, depth: u32) -> Self {
        assert!(width.is_positive(), "box width must be positive");
        NBox { center, width, depth }
    }

    /// The root box `[-a, a]^n`.
    pub fn root(n: usize, a: &BigRational) -> Self {
        assert!(a.is_positive(), "half-width must be positive");
        NBox {
            center: vec![rat_int(0); n],
            width: a * rat_int(2),
            depth: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[BigRational] {
        &self.center
    }

    pub fn width(&self) -> &BigRational {
        &self.width
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn volume(&self) -> BigRational {
        pow_i(&self.width, self.center.len() as i64)
    }

    /// Closed membership: `|x - m(B)|_inf <= w(B)/2`.
    pub fn contains(&self, x: &[BigRational]) -> bool {
        assert_eq!(x.len(), self.center.len(), "dimension mismatch");
        let half = &self.width * rat(1, 2);
        self.center
            .iter()
            .zip(x)
            .all(|(c, xi)| (xi - c).abs() <= half)
    }

    /// The 2^n children of half width; interiors are disjoint and the union
    /// restores the parent exactly.
    pub fn standard_subdivision(&self) -> Vec<NBox> {
        let n = self.center.len();
        let quarter = &self.width * rat(1, 4);
        let half = &self.width * rat(1, 2);
        let mut out = Vec::with_capacity(1 << n);
        for mask in 0..(1u32 << n) {
            let center: Vec<BigRational> = self
                .center
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    if mask >> j & 1 == 1 {
                        c + &quarter
                    } else {
                        c - &quarter
                    }
                })
                .collect();
            out.push(NBox {
                center,
                width: half.clone(),
                depth: self.depth + 1,
            });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;
    use proptest::prelude::*;

    #[test]
    fn quartering_the_square() {
        let root = NBox::root(2, &rat_int(1));
        let children = root.standard_subdivision();
        assert_eq!(children.len(), 4);
        let mut centers: Vec<Vec<BigRational>> =
            children.iter().map(|b| b.center().to_vec()).collect();
        centers.sort();
        assert_eq!(
            centers,
            vec![
                vec![rat(-1, 2), rat(-1, 2)],
                vec![rat(-1, 2), rat(1, 2)],
                vec![rat(1, 2), rat(-1, 2)],
                vec![rat(1, 2), rat(1, 2)],
            ]
        );
        for b in &children {
            assert_eq!(b.width(), &rat_int(1));
            assert_eq!(b.depth(), 1);
        }
    }

    #[test]
    fn interval_bisection() {
        let b = NBox::new(vec![rat(1, 2)], rat_int(1), 0); // [0, 1]
        let kids = b.standard_subdivision();
        let mut centers: Vec<BigRational> = kids.iter().map(|k| k.center()[0].clone()).collect();
        centers.sort();
        assert_eq!(centers, vec![rat(1, 4), rat(3, 4)]);
    }

    #[test]
    fn membership_is_closed() {
        let b = NBox::root(2, &rat_int(1));
        assert!(b.contains(&[rat_int(0), rat_int(0)]));
        assert!(b.contains(&[rat_int(1), rat_int(1)])); // corner
        assert!(!b.contains(&[rat_int(3), rat_int(0)]));
        // shared face belongs to both children
        let kids = b.standard_subdivision();
        let face = [rat_int(0), rat(1, 4)];
        let holders = kids.iter().filter(|k| k.contains(&face)).count();
        assert_eq!(holders, 2);
    }

    #[test]
    fn depth_width_relation() {
        let a = rat(7, 2);
        let mut b = NBox::root(3, &a);
        for k in 0..6 {
            assert_eq!(b.width(), &(&a * rat_int(2) / pow_i(&rat_int(2), k)));
            b = b.standard_subdivision().pop().unwrap();
        }
    }

    proptest! {
        #[test]
        fn children_tile_parent(n in 1usize..4, cx in -8i64..8, w in 1i64..20, depth in 0u32..5) {
            let center: Vec<BigRational> = (0..n).map(|j| rat(cx + j as i64, 4)).collect();
            let parent = NBox::new(center, rat(w, 3), depth);
            let kids = parent.standard_subdivision();
            prop_assert_eq!(kids.len(), 1 << n);
            let total: BigRational = kids.iter().map(|k| k.volume()).sum();
            prop_assert_eq!(total, parent.volume());
            for k in &kids {
                prop_assert_eq!(k.depth(), depth + 1);
                prop_assert!(parent.contains(k.center()));
            }
        }

        #[test]
        fn sampled_points_live_in_some_child(px in -100i64..100, py in -100i64..100) {
            let parent = NBox::root(2, &rat_int(1));
            let x = [rat(px, 100), rat(py, 100)];
            let kids = parent.standard_subdivision();
            let holders = kids.iter().filter(|k| k.contains(&x)).count();
            // interior points live in one child, face points in 2^k of them
            prop_assert!(holders == 1 || holders == 2 || holders == 4);
        }
    }

    #[test]
    fn zero_width_rejected() {
        let r = std::panic::catch_unwind(|| NBox::new(vec![rat_int(0)], BigRational::zero(), 0));
        assert!(r.is_err());
    }
}
