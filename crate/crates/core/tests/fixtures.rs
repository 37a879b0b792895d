use tgsa::{build_indexes, construct, tokenize, validate_tgsa, ArcLabel, Format, OverlapRule};

fn milestone(text: &str) -> tgsa::TokenStream {
    tokenize(text, Format::Milestone, false).unwrap()
}

#[test]
fn nested_tree_document() {
    let stream = tokenize(include_str!("fixtures/doc1.xml"), Format::Nested, false).unwrap();
    let g = construct(&stream).unwrap();
    assert!(validate_tgsa(&g).is_ok());
    assert_eq!(g.vertex_count(), 5);
    assert!(g.arcs().iter().all(|a| a.label == ArcLabel::ParentChild));
    let r = g.root();
    let kids: Vec<_> = g
        .children(r)
        .unwrap()
        .iter()
        .map(|&v| g.vertex(v).unwrap().name.clone())
        .collect();
    assert_eq!(kids, ["a", "b"]);
}

#[test]
fn whitespace_text_is_kept_on_request() {
    let text = include_str!("fixtures/doc1.xml");
    let dropped = tokenize(text, Format::Nested, false).unwrap();
    let kept = tokenize(text, Format::Nested, true).unwrap();
    assert!(kept.len() > dropped.len());
    assert!(validate_tgsa(&construct(&kept).unwrap()).is_ok());
}

#[test]
fn shared_text_has_two_parents() {
    let g = construct(&milestone(include_str!("fixtures/doc2.xml"))).unwrap();
    let t2 = g.lookup("#5").unwrap();
    let parents: Vec<_> = g
        .parents(t2)
        .unwrap()
        .iter()
        .map(|&v| g.vertex(v).unwrap().id.clone())
        .collect();
    assert_eq!(parents, ["a", "b"]);
}

#[test]
fn scene_genre_queries() {
    let stream = milestone(include_str!("fixtures/scenes.xml"));
    let g = construct(&stream).unwrap();
    assert!(validate_tgsa(&g).is_ok());
    let index = build_indexes(&stream, &g).unwrap();
    let start = |id: &str| g.vertex(g.lookup(id).unwrap()).unwrap().start;

    let pairs: Vec<_> = index
        .elements
        .overlapping_pairs("scene", "genre", OverlapRule::Interleaving)
        .into_iter()
        .map(|(s, gen)| (s.start, gen.start))
        .collect();
    assert_eq!(pairs, [(start("dream"), start("romance1"))]);

    let exclusive: Vec<_> = index
        .elements
        .exclusive_elements("scene", "genre", OverlapRule::Interleaving)
        .into_iter()
        .map(|e| e.start)
        .collect();
    assert_eq!(exclusive, [start("love")]);

    let genres: Vec<_> = index
        .elements
        .overlapping_pairs("genre", "genre", OverlapRule::Interleaving)
        .into_iter()
        .map(|(a, b)| (a.start, b.start))
        .collect();
    assert!(genres.contains(&(start("musical"), start("romance2"))));

    let dream = index.elements.entry_at(start("dream")).unwrap();
    for inner in ["musical", "romance2"] {
        let e = index.elements.entry_at(start(inner)).unwrap();
        assert!(
            tgsa::is_ancestor(dream, e),
            "{inner} should lie inside dream"
        );
    }
    let love = index.elements.entry_at(start("love")).unwrap();
    let romance1 = index.elements.entry_at(start("romance1")).unwrap();
    assert!(tgsa::is_parent(romance1, love));

    let hits: Vec<_> = index
        .elements_containing_term("duet")
        .iter()
        .map(|e| e.start)
        .collect();
    assert!(hits.contains(&start("musical")) && hits.contains(&start("romance2")));
}

#[test]
fn literal_rule_over_reports_disjoint_scenes() {
    let stream = milestone(include_str!("fixtures/scenes.xml"));
    let g = construct(&stream).unwrap();
    let index = build_indexes(&stream, &g).unwrap();
    let strict = index
        .elements
        .overlapping_pairs("scene", "scene", OverlapRule::Interleaving);
    let literal = index
        .elements
        .overlapping_pairs("scene", "scene", OverlapRule::Literal);
    assert!(strict.is_empty());
    // love starts and ends before dream, listed once from each side
    assert_eq!(literal.len(), 2);
}
