use relaxgrad::graph::{
    max_clique, parse_dimacs, planted_clique, read_dimacs, round_and_repair, to_dimacs, verify_clique, Graph,
};
use relaxgrad::{Error, RngStream};

fn path3() -> Graph {
    Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
}

/// Largest clique by checking every vertex subset.
fn brute_force_clique_size(g: &Graph) -> usize {
    let n = g.n();
    (0u32..1 << n)
        .filter(|mask| {
            let vs: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            vs.iter()
                .enumerate()
                .all(|(k, &u)| vs[k + 1..].iter().all(|&v| g.has_edge(u, v)))
        })
        .map(|mask| mask.count_ones() as usize)
        .max()
        .unwrap_or(0)
}

#[test]
fn parses_a_triangle() {
    let p = parse_dimacs("c tiny\np edge 3 3\ne 1 2\ne 1 3\ne 2 3\n").unwrap();
    assert_eq!((p.graph.n(), p.graph.m()), (3, 3));
    assert!(p.warnings.is_empty());
    assert_eq!(verify_clique(&p.graph, &[0, 1, 2]).unwrap(), (true, 3));
}

#[test]
fn comments_only_is_missing_problem_line() {
    let err = parse_dimacs("c nothing\nc here\n").unwrap_err();
    assert!(matches!(err, Error::Parse { ref message, .. } if message.contains("missing problem line")));
}

#[test]
fn duplicate_edges_are_merged_with_a_warning() {
    let p = parse_dimacs("p edge 2 2\ne 1 2\ne 1 2\n").unwrap();
    assert_eq!(p.graph.m(), 1);
    assert!(!p.warnings.is_empty());
}

#[test]
fn header_mismatch_warns_and_trusts_edges() {
    let p = parse_dimacs("p edge 3 7\ne 1 2\n").unwrap();
    assert_eq!(p.graph.m(), 1);
    assert!(p.warnings.iter().any(|w| w.contains("7")));
}

#[test]
fn malformed_lines_report_their_line_number() {
    for (text, line) in [
        ("p edge 3 1\ne 1 4\n", 2),
        ("p edge 3 1\n\ne 1 x\n", 3),
        ("e 1 2\np edge 3 1\n", 1),
        ("p edge 3 1\nq 1 2\n", 2),
    ] {
        match parse_dimacs(text) {
            Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("expected parse error for {text:?}, got {other:?}"),
        }
    }
}

#[test]
fn reads_plain_and_gzip_files() {
    use std::io::Write;
    let g = planted_clique(20, 5, 0.3, &mut RngStream::new(1, 0)).unwrap().0;
    let text = to_dimacs(&g);
    let dir = std::env::temp_dir().join(format!("relaxgrad-graph-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let plain = dir.join("g.clq");
    std::fs::write(&plain, &text).unwrap();
    let gz = dir.join("g.clq.gz");
    let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
    enc.write_all(text.as_bytes()).unwrap();
    std::fs::write(&gz, enc.finish().unwrap()).unwrap();
    for path in [&plain, &gz] {
        let back = read_dimacs(path).unwrap().graph;
        assert_eq!(back.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn verification_examples() {
    assert_eq!(verify_clique(&path3(), &[0, 1, 2]).unwrap(), (false, 3));
    assert_eq!(verify_clique(&path3(), &[]).unwrap(), (true, 0));
    assert!(verify_clique(&path3(), &[3]).is_err());
}

#[test]
fn repair_examples() {
    assert_eq!(round_and_repair(&path3(), &[0.9, 0.8, 0.7]), vec![0, 1]);
    assert!(round_and_repair(&path3(), &[0.1, 0.4, 0.49]).is_empty());
    let tri = Graph::from_edges(4, &[(0, 1), (0, 2), (1, 2), (2, 3)]).unwrap();
    assert_eq!(round_and_repair(&tri, &[1.0, 1.0, 1.0, 0.0]), vec![0, 1, 2]);
}

#[test]
fn full_planted_clique_is_complete() {
    let (g, planted) = planted_clique(7, 7, 0.5, &mut RngStream::new(2, 0)).unwrap();
    assert_eq!(g.m(), 21);
    assert_eq!(planted, (0..7).collect::<Vec<_>>());
}

#[test]
fn planted_set_is_a_clique_and_the_maximum_at_desk_scale() {
    for seed in 0..5 {
        let (g, planted) = planted_clique(100, 12, 0.5, &mut RngStream::new(seed, 1_000_000)).unwrap();
        assert_eq!(verify_clique(&g, &planted).unwrap(), (true, 12));
        let best = max_clique(&g);
        assert_eq!(verify_clique(&g, &best).unwrap(), (true, 12));
    }
}

#[test]
fn branch_and_bound_matches_exhaustive_search() {
    let mut rng = RngStream::new(3, 0);
    for trial in 0..30 {
        let n = 4 + trial % 11;
        let p = 0.2 + 0.6 * rng.uniform();
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.bernoulli(p) {
                    edges.push((u, v));
                }
            }
        }
        let g = Graph::from_edges(n, &edges).unwrap();
        let best = max_clique(&g);
        assert!(verify_clique(&g, &best).unwrap().0);
        assert_eq!(best.len(), brute_force_clique_size(&g));
    }
}
