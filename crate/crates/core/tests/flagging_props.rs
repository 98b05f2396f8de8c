use labelwise_core::flagging::*;
use proptest::prelude::*;

fn arb_scores() -> impl Strategy<Value = Vec<ScoreRecord>> {
    prop::collection::vec((0usize..6, 0.0f64..=1.0), 1..120).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (forum, p))| ScoreRecord {
                posting_id: format!("p{i}"),
                forum_id: format!("f{forum}"),
                p_positive: p,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn raising_post_threshold_never_raises_rates(scores in arb_scores(), lo in 0.0f64..1.0, step in 0.0f64..0.5) {
        let low = forum_rates(&scores, lo);
        let high = forum_rates(&scores, lo + step);
        for (a, b) in low.iter().zip(&high) {
            prop_assert_eq!(&a.forum_id, &b.forum_id);
            prop_assert!(b.rate <= a.rate);
        }
    }

    #[test]
    fn raising_forum_threshold_shrinks_flag_set(scores in arb_scores(), lo in 0.0f64..1.0, step in 0.0f64..0.5) {
        let rates = forum_rates(&scores, 0.5);
        let loose = flag_forums(&rates, 0.5, lo);
        let strict = flag_forums(&rates, 0.5, lo + step);
        for r in strict.iter().filter(|r| r.flagged) {
            prop_assert!(loose.iter().any(|l| l.forum_id == r.forum_id && l.flagged));
        }
        prop_assert_eq!(loose.len(), rates.len());
        prop_assert!(loose.windows(2).all(|w| w[0].positive_rate >= w[1].positive_rate));
    }

    #[test]
    fn ingestion_order_does_not_matter(scores in arb_scores()) {
        let mut forward = ScoreBook::new();
        forward.ingest(scores.clone()).unwrap();
        let mut backward = ScoreBook::new();
        backward.ingest(scores.into_iter().rev()).unwrap();
        prop_assert_eq!(forward.forum_rates(0.5), backward.forum_rates(0.5));
    }
}
