use serde::{Deserialize, Serialize};

use super::pipeline::{standard_pipelines, RunReport};

/// Per-pipeline means over the entries a batch ran.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub pipeline: String,
    pub description: String,
    pub runs: usize,
    pub incomplete: usize,
    pub mean_recall: f64,
    /// Absent for pipelines that never refine.
    pub mean_search_steps: Option<f64>,
}

/// Summaries in standard row order, then any unknown pipelines by name.
/// Incomplete runs count toward the means with whatever they reached.
pub fn aggregate(reports: &[RunReport]) -> Vec<PipelineSummary> {
    let rows = standard_pipelines();
    let mut names: Vec<String> = Vec::new();
    for r in rows.iter().map(|r| &r.spec.name) {
        if reports.iter().any(|rep| &rep.pipeline == r) {
            names.push(r.clone());
        }
    }
    let mut extra: Vec<String> = reports
        .iter()
        .map(|r| r.pipeline.clone())
        .filter(|p| !names.contains(p))
        .collect();
    extra.sort();
    extra.dedup();
    names.extend(extra);

    names
        .into_iter()
        .map(|name| {
            let runs: Vec<&RunReport> = reports.iter().filter(|r| r.pipeline == name).collect();
            let row = rows.iter().find(|r| r.spec.name == name);
            let refines = row.map(|r| r.spec.run_refinement).unwrap_or_else(|| runs.iter().any(|r| !r.refine_steps.is_empty()));
            let n = runs.len() as f64;
            PipelineSummary {
                description: row.map(|r| r.description.to_string()).unwrap_or_default(),
                runs: runs.len(),
                incomplete: runs.iter().filter(|r| !r.complete).count(),
                mean_recall: runs.iter().map(|r| r.recall).sum::<f64>() / n,
                mean_search_steps: refines.then(|| runs.iter().map(|r| r.search_steps as f64).sum::<f64>() / n),
                pipeline: name,
            }
        })
        .collect()
}

/// Plain-text comparison table.
pub fn render_table(summaries: &[PipelineSummary]) -> String {
    let header = ["Method Name", "Description", "Recall", "# Search Steps"];
    let rows: Vec<[String; 4]> = summaries
        .iter()
        .map(|s| {
            [
                s.pipeline.clone(),
                s.description.clone(),
                format!("{:.3}", s.mean_recall),
                s.mean_search_steps.map_or_else(|| "-".to_string(), |v| format!("{v:.2}")),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: [&str; 4]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = line(header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
    for row in &rows {
        out.push_str(&line([&row[0], &row[1], &row[2], &row[3]]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(pipeline: &str, recall: f64, steps: u64) -> RunReport {
        RunReport {
            entry_id: "e".into(),
            pipeline: pipeline.into(),
            recall,
            search_steps: steps,
            refine_steps: if steps > 0 { vec![steps] } else { vec![] },
            proposal_calls: steps,
            stage_sequence: vec![],
            final_node: None,
            final_hypothesis: String::new(),
            export_digest: String::new(),
            complete: true,
            error: None,
        }
    }

    #[test]
    fn means_and_dash_for_exploration_only() {
        let reports = [
            report("baseline_MC2", 0.5, 4),
            report("baseline_MC", 1.0, 0),
            report("baseline_MC2", 0.25, 6),
        ];
        let s = aggregate(&reports);
        assert_eq!(s[0].pipeline, "baseline_MC");
        assert_eq!(s[0].mean_search_steps, None);
        assert!((s[1].mean_recall - 0.375).abs() < 1e-12);
        assert_eq!(s[1].mean_search_steps, Some(5.0));
        let table = render_table(&s);
        assert!(table.starts_with("| Method Name"));
        let mc_line = table.lines().find(|l| l.contains("baseline_MC ")).unwrap();
        let last = mc_line.rsplit('|').nth(1).unwrap().trim();
        assert_eq!(last, "-");
    }
}
