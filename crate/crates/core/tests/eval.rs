use proptest::prelude::*;
use textdet::eval::*;
use textdet::raster::BoundingBox;

fn b(x: i32, y: i32, w: i32, h: i32) -> BoundingBox {
    BoundingBox::new(x, y, w, h)
}

#[test]
fn identical_sets_are_perfect() {
    let boxes = [b(0, 0, 10, 10), b(20, 5, 8, 4)];
    let m = match_boxes(&boxes, &boxes, 0.5);
    assert_eq!((m.precision, m.recall, m.fmeasure), (1.0, 1.0, 1.0));
}

#[test]
fn disjoint_prediction_scores_zero() {
    let m = match_boxes(&[b(0, 0, 5, 5)], &[b(50, 50, 5, 5)], 0.5);
    assert_eq!((m.precision, m.recall, m.fmeasure), (0.0, 0.0, 0.0));
}

#[test]
fn two_predictions_on_one_truth() {
    // IoU 80/100 and 60/100 against the truth.
    let truth = [b(0, 0, 10, 10)];
    let pred = [b(0, 0, 10, 6), b(0, 0, 10, 8)];
    assert_eq!(greedy_match(&pred, &truth, 0.5), vec![(1, 0)]);
    let m = match_boxes(&pred, &truth, 0.5);
    assert_eq!((m.precision, m.recall), (0.5, 1.0));
    assert!((m.fmeasure - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn greedy_takes_highest_overlap_first() {
    // Both predictions clear 0.5 only against truth 1: pred 0 at 0.9, pred 1
    // at 70/130. Pred 0 takes it and pred 1 stays unmatched.
    let truth = [b(0, 0, 10, 10), b(4, 0, 10, 10)];
    let pred = [b(4, 0, 9, 10), b(7, 0, 10, 10)];
    let ious: Vec<f64> = vec![pred[0].iou(&truth[1]), pred[1].iou(&truth[1])];
    assert!(ious[0] > ious[1]);
    let matched = greedy_match(&pred, &truth, 0.5);
    assert!(matched.contains(&(0, 1)));
    assert!(!matched.iter().any(|&(p, _)| p == 1));
}

#[test]
fn component_recall_extremes() {
    let chars = [b(0, 0, 5, 8), b(7, 0, 5, 8)];
    assert_eq!(component_recall(&chars, &chars), 1.0);
    assert_eq!(component_recall(&[], &chars), 0.0);
    assert_eq!(component_recall(&[b(0, 0, 5, 8)], &chars), 0.5);
}

#[test]
fn report_rows() {
    let one = report(&[("CE-MSERs".into(), Metrics::new(0.91, 0.74))]);
    let lines: Vec<&str> = one.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0].split_whitespace().collect::<Vec<_>>(),
        ["Method", "Precision", "Recall", "Fmeasure"]
    );
    assert_eq!(
        lines[1].split_whitespace().collect::<Vec<_>>(),
        ["CE-MSERs", "0.91", "0.74", "0.82"]
    );

    let many = report(&[
        ("a".into(), Metrics::new(0.2, 0.2)),
        ("b".into(), Metrics::new(0.9, 0.9)),
        ("c".into(), Metrics::new(0.5, 0.5)),
    ]);
    let names: Vec<&str> = many
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(names, ["b", "c", "a"]);
}

#[test]
fn truth_files_roundtrip_and_id_check() {
    let dir = tempfile::tempdir().unwrap();
    let words = vec![b(3, 4, 20, 10), b(40, 4, 12, 10)];
    let labels = vec!["abc".to_string(), "de".to_string()];
    write_box_file(&dir.path().join("gt_s1.txt"), &words, Some(&labels)).unwrap();
    write_box_file(&dir.path().join("chars_s1.txt"), &words[..1], None).unwrap();
    write_box_file(&dir.path().join("gt_s2.txt"), &[], None).unwrap();
    let truth = read_truth_dir(dir.path()).unwrap();
    assert_eq!(truth.len(), 2);
    assert_eq!(truth["s1"].words, words);
    assert_eq!(truth["s1"].chars.as_deref(), Some(&words[..1]));
    assert!(truth["s2"].words.is_empty() && truth["s2"].chars.is_none());

    let rec = |id: &str, boxes: &[BoundingBox]| DetectionRecord {
        image: id.into(),
        words: boxes
            .iter()
            .map(|b| WordRecord {
                x: b.x,
                y: b.y,
                w: b.w,
                h: b.h,
                score: 1.0,
            })
            .collect(),
    };
    let path = dir.path().join("det.jsonl");
    write_records(&path, &[rec("s1", &words), rec("s2", &[])]).unwrap();
    let back = read_records(&path).unwrap();
    let counts = evaluate_records(&back, &truth, 0.5).unwrap();
    assert_eq!(counts.metrics().fmeasure, 1.0);

    let err = evaluate_records(&[rec("s1", &words), rec("s9", &[])], &truth, 0.5).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("s2") && msg.contains("s9"), "{msg}");
}

fn small_box() -> impl Strategy<Value = BoundingBox> {
    (0i32..40, 0i32..40, 1i32..=50, 1i32..=50).prop_map(|(x, y, w, h)| BoundingBox::new(x, y, w, h))
}

proptest! {
    #[test]
    fn iou_matches_pixel_count(a in small_box(), c in small_box()) {
        let covers = |bb: &BoundingBox, x: i32, y: i32| x >= bb.x && x < bb.right() && y >= bb.y && y < bb.bottom();
        let (mut inter, mut union) = (0u64, 0u64);
        for y in 0..90 {
            for x in 0..90 {
                let (p, q) = (covers(&a, x, y), covers(&c, x, y));
                inter += u64::from(p && q);
                union += u64::from(p || q);
            }
        }
        prop_assert_eq!(a.iou(&c), inter as f64 / union as f64);
    }

    #[test]
    fn swapping_sides_swaps_precision_and_recall(
        pred in proptest::collection::vec(small_box(), 0..6),
        truth in proptest::collection::vec(small_box(), 0..6),
    ) {
        let m = match_boxes(&pred, &truth, 0.5);
        let s = match_boxes(&truth, &pred, 0.5);
        prop_assert_eq!(m.precision, s.recall);
        prop_assert_eq!(m.recall, s.precision);
    }

    #[test]
    fn perfect_prediction_never_lowers_recall(
        pred in proptest::collection::vec(small_box(), 0..6),
        truth in proptest::collection::vec(small_box(), 1..6),
        pick in any::<prop::sample::Index>(),
    ) {
        let before = match_boxes(&pred, &truth, 0.5).recall;
        let mut more = pred.clone();
        more.push(truth[pick.index(truth.len())]);
        prop_assert!(match_boxes(&more, &truth, 0.5).recall >= before);
    }
}
