//! Worked examples: the running AMR and knowledge-graph figures, the case
//! study listings, and the boundary cases of each operation.

use mvae_core::views::{
    extract_spo, ground_triples, linearize, path_feature, reparse_linearized, ChildOrder, FeatureVocabulary,
    GroundedArc, LinearizedGraph,
};
use mvae_core::{
    expand_reentrancies, is_isomorphic, load_alignments, match_kg_nodes, parse_penman, parse_triples, simplify,
    NodeKind, ViewError,
};

const FIG_1A: &str = "(w / want-01
    :ARG0 (b / boy)
    :ARG1 (e / eat-01
        :ARG0 (g / girl :mod (b2 / beautiful))
        :ARG1 (l / lunch)
        :accompanier b))";

const RECOMMEND: &str = "(r / recommend-01
    :ARG0 (i / i)
    :ARG1 (g / go-02
        :ARG0 (y / you)
        :purpose (s / see-01
            :ARG0 y
            :ARG1 (p / person
                :ARG0-of (h / have-rel-role-91
                    :ARG1 y
                    :ARG2 (d / doctor)))
            :mod (t / too)))
    :ARG2 y)";

const COLOMBIA: &str = r#"(c / country
    :mod (o / only)
    :ARG0-of (h / have-03
        :ARG1 (p / policy
            :consist-of (t / target-01
                :ARG1 (a / aircraft
                    :ARG0-of (t2 / traffic-01
                        :ARG1 (d / drug)))))
        :time (c3 / current))
    :domain (c2 / country
        :wiki "Colombia"
        :name (n / name :op1 "Colombia")))"#;

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

#[test]
fn single_node() {
    let g = parse_penman("(b / boy)").unwrap();
    assert_eq!((g.node_count(), g.edge_count(), g.root()), (1, 0, "b"));
    assert_eq!(g.label(0), "boy");
    let lin = linearize(&g, ChildOrder::Input, true).unwrap();
    assert_eq!(lin.to_text(), "( boy )");
    assert_eq!(reparse_linearized(&lin).unwrap().node_count(), 1);
}

#[test]
fn running_amr_has_a_reentrant_boy() {
    let g = parse_penman(FIG_1A).unwrap();
    let boy = g.index_of("b").unwrap();
    assert_eq!(g.in_degree(boy), 2);
    let sources: Vec<_> = g.edges().iter().filter(|e| e.target == "b").map(|e| e.source.as_str()).collect();
    assert_eq!(sources, ["w", "e"]);
}

#[test]
fn running_amr_linearization() {
    let g = parse_penman(FIG_1A).unwrap();
    let lin = linearize(&g, ChildOrder::Input, true).unwrap();
    assert_eq!(
        lin.to_text(),
        "( want :ARG0 ( boy ) :ARG1 ( eat :ARG0 ( girl :mod ( beautiful ) ) :ARG1 ( lunch ) :accompanier boy ) )"
    );
    assert!(is_isomorphic(&reparse_linearized(&lin).unwrap(), &simplify(&g, true)));
    for seed in [1, 2] {
        let lin = linearize(&g, ChildOrder::Random(seed), true).unwrap();
        assert!(is_isomorphic(&reparse_linearized(&lin).unwrap(), &simplify(&g, true)));
    }
}

#[test]
fn running_amr_path_boy_to_girl() {
    let g = parse_penman(FIG_1A).unwrap();
    // The encoder works on the tree with re-entrant mentions copied out;
    // there the only route from the first "boy" to "girl" runs through want.
    let tree = expand_reentrancies(&g);
    assert_eq!(path_feature(&tree, "b", "g").unwrap().to_string(), ":ARG0↑ :ARG1↓ :ARG0↓");
    // On the graph itself the accompanier edge is one hop shorter.
    assert_eq!(path_feature(&g, "b", "g").unwrap().to_string(), ":accompanier↑ :ARG0↓");
    assert_eq!(path_feature(&g, "g", "g").unwrap().to_string(), "SELF");
    assert!(matches!(path_feature(&g, "b", "zz"), Err(ViewError::UnknownNode(_))));
}

#[test]
fn feature_vocabulary_examples() {
    let g = parse_penman(FIG_1A).unwrap();
    let tiny = FeatureVocabulary::build([&g], 3);
    assert_eq!(tiny.entries(), ["SELF", "NOPATH", "<unk-path>"]);
    assert_eq!(tiny.lookup(":ARG0↓"), FeatureVocabulary::UNK);
    let full = FeatureVocabulary::build([&g], 20_000);
    // want→boy and eat→girl are both one :ARG0 hop down.
    assert_eq!(full.lookup(":ARG0↓"), 3);
}

#[test]
fn case_study_amrs() {
    let g = parse_penman(RECOMMEND).unwrap();
    assert_eq!(g.root(), "r");
    assert_eq!(g.in_degree(g.index_of("y").unwrap()), 4);
    assert!(g.edges().iter().any(|e| e.label == ":ARG0-of"));
    let spo: Vec<_> = extract_spo(&g).into_iter().map(|i| (i.subject, i.predicate, i.object)).collect();
    assert_eq!(
        spo,
        [
            ("i".to_string(), "recommend".to_string(), "go".to_string()),
            ("you".to_string(), "see".to_string(), "person".to_string())
        ]
    );
    assert_eq!(simplify(&g, true).label(g.index_of("h").unwrap()), "have-rel-role");

    let c = parse_penman(COLOMBIA).unwrap();
    assert_eq!(c.label(c.root_index()), "country");
    let concepts = c.nodes().iter().filter(|n| n.kind == NodeKind::Variable).count();
    assert_eq!(concepts, 11);
    let s = simplify(&c, true);
    assert_eq!(s.node_count(), 12);
    assert!(s.edges().iter().all(|e| e.label != ":wiki"));
}

#[test]
fn running_amr_interactions() {
    let spo: Vec<_> = extract_spo(&parse_penman(FIG_1A).unwrap())
        .into_iter()
        .map(|i| format!("{} {} {}", i.subject, i.predicate, i.object))
        .collect();
    assert_eq!(spo, ["boy want eat", "girl eat lunch"]);
}

#[test]
fn triple_examples() {
    let g = parse_triples("Above_the_Veil | followedBy | Into_the_Battle").unwrap();
    assert_eq!((g.node_count(), g.edge_count()), (2, 1));
    assert_eq!(g.edges()[0].label, "followedBy");
    let star = parse_triples("A | p | B\nA | q | C\nA | r | D\n").unwrap();
    assert_eq!((star.node_count(), star.edge_count()), (4, 3));
    assert!(star.edges().iter().all(|e| e.source == "A"));
}

#[test]
fn knowledge_graph_grounding() {
    let g = parse_triples("Above_the_Veil | followedBy | Into_the_Battle").unwrap();
    let a = load_alignments("Above_the_Veil\t0,1,2\nInto_the_Battle\t14,15,16\n").unwrap();
    let arcs = ground_triples(&g, &a, 18, true).unwrap();
    let got: Vec<(usize, &str, usize)> = arcs.arcs.iter().map(|a| (a.head, a.label.as_str(), a.modifier)).collect();
    assert_eq!(
        got,
        [
            (0, "followedBy", 14),
            (0, "compound", 1),
            (0, "compound", 2),
            (14, "compound", 15),
            (14, "compound", 16)
        ]
    );
    let unlabeled = ground_triples(&g, &a, 18, false).unwrap();
    assert!(unlabeled.arcs.iter().all(|a: &GroundedArc| a.label == "<arc>"));
}

#[test]
fn matcher_examples() {
    let g = parse_triples("Above_the_Veil | country | Australians").unwrap();
    let (a, cov) = match_kg_nodes(&g, &words("Above the Veil is an Australian novel"));
    assert_eq!(a.get("Above_the_Veil"), Some(&[0, 1, 2][..]));
    assert_eq!(a.get("Australians"), None);
    assert_eq!(cov, 0.5);

    let ny = parse_triples("New_York_(NY) | near | Paris").unwrap();
    let (a, cov) = match_kg_nodes(&ny, &words("he lives in new york"));
    assert_eq!(a.get("New_York_(NY)"), Some(&[3, 4][..]));
    assert_eq!(cov, 0.5);
    let spaced = parse_triples("New York (NY) | near | Paris").unwrap();
    let (a, _) = match_kg_nodes(&spaced, &words("he lives in New York"));
    assert_eq!(a.get("New York (NY)"), Some(&[3, 4][..]));
    let (a, _) = match_kg_nodes(&ny, &words("london calling"));
    assert!(a.is_empty());
}

#[test]
fn linearization_text_errors() {
    assert!(LinearizedGraph::from_text("( boy ) )", true).is_err());
    assert!(LinearizedGraph::from_text("( boy :ARG0 )", true).is_err());
}
