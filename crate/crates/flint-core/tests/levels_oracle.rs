//! Cross-checks the level arithmetic against a deliberately naive oracle:
//! the cycle written out as an explicit list, with every operator derived by
//! list walking and filtering. Any clever modular arithmetic in the real
//! implementation has to agree with the dumb version on every level.

use flint_core::unison::{Level, Levels};

/// The φ-cycle as a plain list: `1, 2, …, k, −k, …, −1`.
fn cycle_list(k: i32) -> Vec<Level> {
    (1..=k).chain(-k..=-1).collect()
}

fn pos(list: &[Level], l: Level) -> usize {
    list.iter().position(|&x| x == l).unwrap()
}

/// Steps on the list, wrapping, by a signed offset.
fn walk(list: &[Level], l: Level, j: i64) -> Level {
    let n = list.len() as i64;
    let i = (pos(list, l) as i64 + j).rem_euclid(n) as usize;
    list[i]
}

/// Shortest circular distance between two list positions.
fn circular_distance(list: &[Level], a: Level, b: Level) -> u32 {
    let n = list.len() as i64;
    let d = (pos(list, a) as i64 - pos(list, b) as i64).rem_euclid(n);
    d.min(n - d) as u32
}

fn tested_ks() -> Vec<i32> {
    // d ∈ {0 would be invalid}: these are k = 3d + 2 for d = 0..3 plus one
    // odd size that is not of that form, to keep the arithmetic honest.
    vec![2, 5, 8, 11, 7]
}

#[test]
fn the_cycle_enumeration_matches_the_explicit_list() {
    for k in tested_ks() {
        let lv = Levels::new(k).unwrap();
        let list = cycle_list(k);
        assert_eq!(lv.all(), list, "k={k}");
        assert_eq!(lv.cycle_len(), 2 * k, "k={k}");
        for (i, &l) in list.iter().enumerate() {
            assert_eq!(lv.cycle_index(l).unwrap(), i as i32, "k={k} l={l}");
            assert_eq!(lv.from_cycle_index(i as i32).unwrap(), l, "k={k} i={i}");
        }
    }
}

#[test]
fn forward_and_iterated_forward_walk_the_list() {
    for k in tested_ks() {
        let lv = Levels::new(k).unwrap();
        let list = cycle_list(k);
        for &l in &list {
            assert_eq!(lv.forward(l).unwrap(), walk(&list, l, 1), "k={k} l={l}");
            for j in -25..=25 {
                assert_eq!(
                    lv.forward_iter(l, j).unwrap(),
                    walk(&list, l, j),
                    "k={k} l={l} j={j}"
                );
            }
        }
    }
}

#[test]
fn adjacency_and_distance_are_circular() {
    for k in tested_ks() {
        let lv = Levels::new(k).unwrap();
        let list = cycle_list(k);
        for &a in &list {
            for &b in &list {
                let d = circular_distance(&list, a, b);
                assert_eq!(lv.level_distance(a, b).unwrap(), d, "k={k} {a},{b}");
                assert_eq!(lv.adjacent(a, b).unwrap(), d <= 1, "k={k} {a},{b}");
            }
        }
    }
}

#[test]
fn the_psi_sets_are_same_sign_magnitude_bands() {
    for k in tested_ks() {
        let lv = Levels::new(k).unwrap();
        let list = cycle_list(k);
        for &l in &list {
            let sign = l.signum();
            // Outward levels sorted by increasing magnitude.
            let mut out: Vec<Level> = list
                .iter()
                .copied()
                .filter(|&x| x.signum() == sign && x.abs() > l.abs())
                .collect();
            out.sort_by_key(|x| x.abs());
            // Inward levels sorted by decreasing magnitude.
            let mut inw: Vec<Level> = list
                .iter()
                .copied()
                .filter(|&x| x.signum() == sign && x.abs() < l.abs())
                .collect();
            inw.sort_by_key(|x| -x.abs());

            assert_eq!(lv.psi_gt(l).unwrap(), out, "k={k} l={l}");
            assert_eq!(lv.psi_ggt(l).unwrap(), out[1.min(out.len())..], "k={k} l={l}");
            assert_eq!(lv.psi_lt(l).unwrap(), inw, "k={k} l={l}");
            assert_eq!(lv.psi_llt(l).unwrap(), inw[1.min(inw.len())..], "k={k} l={l}");

            let mut ge = vec![l];
            ge.extend(&out);
            assert_eq!(lv.psi_ge(l).unwrap(), ge, "k={k} l={l}");
            let mut le = vec![l];
            le.extend(&inw);
            assert_eq!(lv.psi_le(l).unwrap(), le, "k={k} l={l}");
        }
    }
}

#[test]
fn outwards_moves_along_the_magnitude_axis_within_its_domain() {
    for k in tested_ks() {
        let lv = Levels::new(k).unwrap();
        for &l in &cycle_list(k) {
            let a = l.abs();
            for j in -(k + 1)..=(k + 1) {
                let want = (j > -a && j <= k - a).then(|| l.signum() * (a + j));
                match want {
                    Some(w) => assert_eq!(lv.outwards(l, j).unwrap(), w, "k={k} l={l} j={j}"),
                    None => assert!(lv.outwards(l, j).is_err(), "k={k} l={l} j={j}"),
                }
            }
        }
    }
}

#[test]
fn levels_outside_the_range_are_rejected_everywhere() {
    for k in tested_ks() {
        let lv = Levels::new(k).unwrap();
        for bad in [0, k + 1, -(k + 1), 2 * k] {
            assert!(lv.forward(bad).is_err(), "k={k} bad={bad}");
            assert!(lv.cycle_index(bad).is_err(), "k={k} bad={bad}");
            assert!(lv.psi_gt(bad).is_err(), "k={k} bad={bad}");
            assert!(lv.adjacent(bad, 1).is_err(), "k={k} bad={bad}");
            assert!(lv.adjacent(1, bad).is_err(), "k={k} bad={bad}");
        }
    }
    assert!(Levels::new(0).is_err());
    assert!(Levels::new(-3).is_err());
}
