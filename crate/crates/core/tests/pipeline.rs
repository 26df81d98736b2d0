use doclair_core::corpus_io::{import_coco_str, read_records, write_records, ClassNameMap, PageRecord};
use doclair_core::format::{parse_page, serialize_page, BBox, Block, Page, PageDims, PromptSpec, SemanticClass};
use doclair_core::layout_metrics::{coco_ap, confusion_at, derive, ApConfig, ConfusionMatrix, LabeledBox};
use doclair_core::page_join::{join_document, JoinConfig};
use doclair_core::reading_order::canonicalize;
use doclair_core::sanitize::{sanitize_page, RejectionReason, SanitizeConfig};
use doclair_core::text_metrics::score_pair;

use SemanticClass::*;

fn dims() -> PageDims {
    PageDims::new(1000, 1000).unwrap()
}

fn b(y: u32, class: SemanticClass, text: &str) -> Block {
    Block::new(BBox::new(10, y, 900, y + 40), text, class)
}

fn clean_page(raw: &str) -> Page {
    let report = parse_page(raw, PromptSpec::MIP, dims()).unwrap();
    let s = sanitize_page(&report, dims(), &SanitizeConfig::default());
    canonicalize(&s.page).page
}

#[test]
fn raw_streams_join_into_one_document() {
    // Emitted out of canonical order, with a footer and a bad box.
    let p0 = Page::new(
        dims(),
        vec![
            b(900, PageFooter, "1"),
            b(50, PageHeader, "Journal"),
            b(100, Title, "# A Study"),
            b(200, Text, "We **measure** how the layout is to be"),
        ],
    );
    let mut raw0 = serialize_page(&p0, PromptSpec::MIP).unwrap();
    raw0.push_str("<x_500><y_500>broken<x_400><y_520><class_Text>");
    let p1 = Page::new(
        dims(),
        vec![
            b(100, Text, "read by people."),
            b(300, Table, ""),
            b(360, Caption, "Table 1: counts."),
            b(500, SectionHeader, "References"),
            b(560, Text, "[1] Someone."),
        ],
    );
    let raw1 = serialize_page(&p1, PromptSpec::MIP).unwrap();

    let pages = [clean_page(&raw0), clean_page(&raw1)];
    assert!(pages[0].blocks.iter().all(|b| b.text.as_deref() != Some("broken")));
    let doc = join_document(&pages, &JoinConfig::default()).unwrap();
    assert_eq!(
        doc.render_text(),
        "A Study\n\nWe measure how the layout is to be read by people.\n\n[TABLE]\nTable 1: counts.\n"
    );
}

#[test]
fn sanitize_reports_each_layer() {
    let raw = "<x_10><y_10>fine<x_100><y_50><class_Text>\
               <x_10><y_10>flat<x_100><y_10><class_Text>\
               <x_10><y_10>wide<x_1000><y_50><class_Text>\
               <x_10><y_10>odd<x_100><y_50><class_Sidebar>\
               <x_10><y_";
    let report = parse_page(raw, PromptSpec::MIP, dims()).unwrap();
    let s = sanitize_page(&report, dims(), &SanitizeConfig::default());
    assert_eq!(s.page.blocks.len(), 1);
    let reasons: Vec<RejectionReason> = s.audit.iter().map(|a| a.reason).collect();
    assert_eq!(
        reasons,
        [
            RejectionReason::DegenerateBox,
            RejectionReason::OutOfRangeCoordinate,
            RejectionReason::UnknownClass,
            RejectionReason::SyntaxNonCompliant,
        ]
    );
}

#[test]
fn records_round_trip_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pages.jsonl");
    let recs = vec![
        PageRecord::raw("d", 0, dims(), "<x_1><y_1>a<x_9><y_9><class_Text>", PromptSpec::MIP),
        PageRecord::raw("d", 1, dims(), "plain", "plain_text,no_bbox,no_classes".parse().unwrap()),
    ];
    write_records(&path, &recs).unwrap();
    let back: Vec<PageRecord> = read_records(&path).unwrap().map(Result::unwrap).collect();
    assert_eq!(back, recs);
    assert_eq!(back[0].text().unwrap(), "a");
    assert_eq!(back[1].text().unwrap(), "plain");
}

#[test]
fn coco_detections_score_against_ground_truth() {
    let src = r#"{
        "images": [{"id": 7, "file_name": "p.png", "width": 1000, "height": 1000}],
        "categories": [{"id": 1, "name": "text"}, {"id": 2, "name": "section-header"}],
        "annotations": [
            {"image_id": 7, "category_id": 1, "bbox": [10, 10, 190, 90], "score": 0.9},
            {"image_id": 7, "category_id": 2, "bbox": [10, 300, 300, 40], "score": 0.8},
            {"image_id": 7, "category_id": 1, "bbox": [600, 600, 50, 50], "score": 0.3}
        ]
    }"#;
    let recs = import_coco_str(src, &ClassNameMap::default()).unwrap();
    assert_eq!(recs.len(), 1);
    let report = recs[0].parse().unwrap();
    let scores = recs[0].scores(report.blocks.len());
    let preds: Vec<LabeledBox> = report
        .blocks
        .iter()
        .zip(scores)
        .map(|(p, s)| {
            let blk = p.to_block().unwrap();
            LabeledBox::scored(blk.bbox.unwrap(), blk.class.unwrap(), s.unwrap())
        })
        .collect();
    let targets = [
        LabeledBox::new(BBox::new(10, 10, 200, 100), Text),
        LabeledBox::new(BBox::new(10, 300, 310, 340), SectionHeader),
    ];
    let ap = coco_ap(&targets, &preds, ApConfig::default()).unwrap();
    assert_eq!(ap.mean_ap, 1.0);
    let cm = confusion_at(&targets, &preds, 0.5, ConfusionMatrix::new());
    let d = derive(&cm);
    assert_eq!(d.per_class[Text.index()].fp, 1);
    assert_eq!(d.per_class[SectionHeader.index()].precision, 1.0);
}

#[test]
fn text_scores_of_identical_pages() {
    let s = score_pair("The cat sat.", "the CAT  sat");
    assert_eq!((s.wer, s.edit_distance, s.f1, s.bleu), (0.0, 0.0, 1.0, 1.0));
}
