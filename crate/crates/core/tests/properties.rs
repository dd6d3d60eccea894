use blockmind::datagen::{generate_shape, GenSpec};
use blockmind::geom::{cut, is_quad, triangulate, CutAction, Direction, Point, RectilinearPolygon};
use blockmind::mesh::{mapped_mesh, BlockComplex};
use blockmind::obs::observe;
use blockmind::report::moving_average;
use blockmind::reward::reward_for_cut;
use proptest::prelude::*;

fn shape(seed: u64, index: usize) -> RectilinearPolygon {
    let spec = GenSpec {
        seed,
        ..GenSpec::default()
    };
    generate_shape(&spec, index).unwrap()
}

fn direction() -> impl Strategy<Value = Direction> {
    prop_oneof![Just(Direction::XAxis), Just(Direction::YAxis)]
}

/// Whether the axis line through `v` passes through the open interior,
/// probed at midpoints between consecutive vertex coordinates.
fn line_hits_interior(poly: &RectilinearPolygon, v: Point, dir: Direction) -> bool {
    let along: Vec<f64> = poly
        .vertices()
        .iter()
        .map(|p| if dir == Direction::XAxis { p.x } else { p.y })
        .collect();
    let mut ts = along.clone();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let tol = poly.tolerance();
    ts.windows(2).any(|w| {
        let t = 0.5 * (w[0] + w[1]);
        let q = if dir == Direction::XAxis { Point::new(t, v.y) } else { Point::new(v.x, t) };
        poly.contains(q) && poly.boundary_distance(q) > tol
    })
}

/// Rectangles from recursive guillotine splits of `[0, w] × [0, h]`.
fn guillotine(splits: &[(bool, f64)], w: f64, h: f64) -> Vec<RectilinearPolygon> {
    let mut rects = vec![(Point::new(0.0, 0.0), Point::new(w, h))];
    for (i, &(vertical, t)) in splits.iter().enumerate() {
        let (lo, hi) = rects.remove(i % rects.len());
        if vertical {
            let x = lo.x + (hi.x - lo.x) * t;
            rects.push((lo, Point::new(x, hi.y)));
            rects.push((Point::new(x, lo.y), hi));
        } else {
            let y = lo.y + (hi.y - lo.y) * t;
            rects.push((lo, Point::new(hi.x, y)));
            rects.push((Point::new(lo.x, y), hi));
        }
    }
    rects
        .into_iter()
        .enumerate()
        .map(|(i, (lo, hi))| RectilinearPolygon::rectangle(format!("b{i:02}"), lo, hi).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cuts_conserve_area_and_validity(seed in 0u64..1000, index in 0usize..49, pick in 0usize..64, dir in direction()) {
        let poly = shape(seed, index);
        let vertex = pick % poly.len();
        let parts = cut(&poly, CutAction::new(vertex, dir)).unwrap();
        let total: f64 = parts.iter().map(|p| p.area()).sum();
        prop_assert!((total - poly.area()).abs() <= 1e-9 * poly.area());
        for p in &parts {
            let rebuilt = RectilinearPolygon::new(p.id(), p.vertices().to_vec());
            prop_assert!(rebuilt.is_ok(), "invalid child {:?}", p.vertices());
        }
        let hits = line_hits_interior(&poly, poly.vertex(vertex), dir);
        prop_assert_eq!(parts.len() == 1, !hits);
    }

    #[test]
    fn triangulation_covers_the_shape(seed in 0u64..1000, index in 0usize..49, factor in 0.1f64..0.5) {
        let poly = shape(seed, index);
        let g = triangulate(&poly, factor * poly.bbox().diagonal()).unwrap();
        let area: f64 = g.triangles.iter().map(|t| {
            let (a, b, c) = (g.node_positions[t[0]], g.node_positions[t[1]], g.node_positions[t[2]]);
            0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
        }).sum();
        prop_assert!((area - poly.area()).abs() <= 1e-9 * poly.area());
        prop_assert_eq!(g.model_nodes().len(), poly.len());
        for (i, node) in g.model_nodes().into_iter().enumerate() {
            prop_assert_eq!(g.node_positions[node], poly.vertex(i));
        }
        prop_assert!(g.edge_attrs.iter().flatten().all(|a| (0.0..=1.0).contains(a)));
        prop_assert_eq!(g.directed.len(), 2 * g.edges.len());
    }

    #[test]
    fn observations_ignore_translation_and_scale(
        seed in 0u64..1000,
        index in 0usize..49,
        pick in 0usize..64,
        dx in -50.0f64..50.0,
        dy in -50.0f64..50.0,
        s in 0.125f64..8.0,
    ) {
        let poly = shape(seed, index);
        let vertex = pick % poly.len();
        let base = observe(&poly, vertex).unwrap().to_array();
        let moved = observe(&poly.translate(Point::new(dx, dy)).scale(s), vertex).unwrap().to_array();
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!((a - b).abs() < 1e-9, "{base:?} vs {moved:?}");
        }
    }

    #[test]
    fn cut_reward_never_exceeds_twelve(splits in prop::collection::vec((any::<bool>(), 0.05f64..0.95), 0..8), w in 0.5f64..4.0, h in 0.5f64..4.0) {
        let parts = guillotine(&splits, w, h);
        let r = reward_for_cut(&parts).unwrap();
        prop_assert!(r.total <= 12.0 + 1e-12);
    }

    #[test]
    fn reward_of_generated_cuts_is_bounded(seed in 0u64..1000, index in 0usize..49, pick in 0usize..64, dir in direction()) {
        let poly = shape(seed, index);
        let parts = cut(&poly, CutAction::new(pick % poly.len(), dir)).unwrap();
        let r = reward_for_cut(&parts).unwrap();
        prop_assert!(r.total <= 12.0 + 1e-12);
        prop_assert_eq!(r.noop_penalty == 1.0, parts.len() == 1);
    }

    #[test]
    fn guillotine_layouts_mesh_conformingly(
        splits in prop::collection::vec((any::<bool>(), 0.1f64..0.9), 0..7),
        w in 0.5f64..3.0,
        h in 0.5f64..3.0,
        size in 0.05f64..1.0,
    ) {
        let blocks = guillotine(&splits, w, h);
        prop_assert!(blocks.iter().all(is_quad));
        let model = RectilinearPolygon::rectangle("m", Point::new(0.0, 0.0), Point::new(w, h)).unwrap();
        let complex = BlockComplex::from_blocks(&blocks).unwrap();
        prop_assert!(complex.segments.iter().all(|s| (1..=2).contains(&s.blocks.len())));
        let mesh = mapped_mesh(&complex, size).unwrap();
        let audit = mesh.audit(&model);
        prop_assert!(audit.is_conforming(), "{audit:?}");
    }

    #[test]
    fn moving_average_matches_direct_mean(values in prop::collection::vec(-100.0f64..100.0, 1..60), window in 1usize..15) {
        let ma = moving_average(&values, window);
        for i in 0..values.len() {
            let lo = (i + 1).saturating_sub(window);
            let direct: f64 = values[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64;
            prop_assert!((ma[i] - direct).abs() < 1e-9);
        }
    }
}
