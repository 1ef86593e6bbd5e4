use std::path::PathBuf;

use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};

use super::inputs::{flow_schema, load_dataset, load_weights, read_grouped, read_scores, DataFormat};
use super::{CliError, Outputs};
use crate::analytics::report::{line_chart_svg, Series};
use crate::analytics::{anova_oneway, cosine_divergence, describe, pca2, roc_auc, AnovaResult, Description};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AnalyzeArgs {
    #[command(subcommand)]
    pub report: Report,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "report", rename_all = "snake_case")]
pub enum Report {
    /// ROC curve and AUC from a `score,label` CSV.
    Roc {
        #[arg(long)]
        scores: PathBuf,
    },
    /// Two-component PCA of a dataset.
    Pca {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = DataFormat::Table)]
        format: DataFormat,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Cosine divergence between two weight files.
    Divergence {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// One-way ANOVA over a `group,value` CSV.
    Anova {
        #[arg(long)]
        input: PathBuf,
    },
    /// Per-group descriptive statistics over a `group,value` CSV.
    Describe {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Serialize)]
struct RocSummary {
    n: usize,
    positives: usize,
    auc: f64,
}

#[derive(Debug, Serialize)]
struct GroupDescription {
    group: String,
    #[serde(flatten)]
    stats: Description,
}

fn fmt(v: f64) -> String {
    format!("{v:.5}")
}

/// Plain-text ANOVA table.
pub fn anova_table(r: &AnovaResult) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "{:<8} {:>4} {:>14} {:>14} {:>10} {:>10}\n",
        "Source", "DF", "Sum Sq", "Mean Sq", "F", "Pr > F"
    ));
    s.push_str(&format!(
        "{:<8} {:>4} {:>14} {:>14} {:>10} {:>10}\n",
        "Model",
        r.df_model,
        fmt(r.ss_model),
        fmt(r.ms_model),
        fmt(r.f_value),
        fmt(r.p_value)
    ));
    s.push_str(&format!(
        "{:<8} {:>4} {:>14} {:>14}\n",
        "Error",
        r.df_error,
        fmt(r.ss_error),
        fmt(r.ms_error)
    ));
    s.push_str(&format!("{:<8} {:>4} {:>14}\n", "Total", r.df_total, fmt(r.ss_total)));
    s.push_str(&format!(
        "\nR-Square {}  Coeff Var {}  Root MSE {}  Mean {}\n",
        fmt(r.r_square),
        fmt(r.coeff_var),
        fmt(r.root_mse),
        fmt(r.grand_mean)
    ));
    s
}

pub fn run(args: &AnalyzeArgs) -> Result<(), CliError> {
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut out = Outputs::create(&out_dir, "analyze", args, None)?;
    match &args.report {
        Report::Roc { scores } => {
            out.input(scores)?;
            let (s, l) = read_scores(scores)?;
            let roc = roc_auc(&s, &l)?;
            let rows: Vec<Vec<String>> = roc.points.iter().map(|(x, y)| vec![x.to_string(), y.to_string()]).collect();
            out.write_csv("roc.csv", &["fpr", "tpr"], &rows)?;
            let name = format!("AUC {:.4}", roc.auc);
            let svg = line_chart_svg(
                "ROC",
                "false positive rate",
                "true positive rate",
                &[Series {
                    name: &name,
                    points: &roc.points,
                }],
            );
            out.write("roc.svg", svg)?;
            out.write_json(
                "roc.json",
                &RocSummary {
                    n: s.len(),
                    positives: l.iter().filter(|&&x| x == 1).count(),
                    auc: roc.auc,
                },
            )?;
            println!("AUC {}", roc.auc);
        }
        Report::Pca { data, format, schema } => {
            out.input(data)?;
            let ds = load_dataset(data, *format, &flow_schema(schema.as_ref())?)?;
            let rows: Vec<Vec<f64>> = ds.samples.rows().map(|(x, _)| x.to_vec()).collect();
            let p = pca2(&rows)?;
            let csv_rows: Vec<Vec<String>> = p
                .projected
                .iter()
                .zip(ds.samples.labels())
                .map(|(pc, l)| vec![pc[0].to_string(), pc[1].to_string(), l.to_string()])
                .collect();
            out.write_csv("pca.csv", &["pc1", "pc2", "label"], &csv_rows)?;
            let mut summary = serde_json::to_value(&p).expect("pca serializes");
            summary.as_object_mut().expect("object").remove("projected");
            out.write_json("pca.json", &summary)?;
            println!(
                "explained variance: pc1 {}, pc2 {}",
                p.explained_variance[0], p.explained_variance[1]
            );
        }
        Report::Divergence { a, b } => {
            out.input(a)?;
            out.input(b)?;
            let (wa, wb) = (load_weights(a)?, load_weights(b)?);
            if wa.shape_tag != wb.shape_tag {
                return Err(CliError::Format(format!("shapes differ: {} vs {}", wa.shape_tag, wb.shape_tag)));
            }
            let d = cosine_divergence(&wa.values, &wb.values)?;
            out.write_json("divergence.json", &serde_json::json!({ "divergence": d }))?;
            println!("divergence {d}");
        }
        Report::Anova { input } => {
            out.input(input)?;
            let groups = read_grouped(input)?;
            let values: Vec<Vec<f64>> = groups.iter().map(|(_, v)| v.clone()).collect();
            let r = anova_oneway(&values)?;
            print!("{}", anova_table(&r));
            out.write("anova.txt", anova_table(&r))?;
            out.write_json("anova.json", &r)?;
        }
        Report::Describe { input } => {
            out.input(input)?;
            let groups = read_grouped(input)?;
            let stats: Vec<GroupDescription> = groups
                .iter()
                .map(|(g, v)| GroupDescription {
                    group: g.clone(),
                    stats: describe(v).expect("groups are non-empty"),
                })
                .collect();
            let rows: Vec<Vec<String>> = stats
                .iter()
                .map(|d| {
                    let s = &d.stats;
                    vec![
                        d.group.clone(),
                        s.n.to_string(),
                        s.mean.to_string(),
                        s.stddev.to_string(),
                        s.se_mean.to_string(),
                        s.min.to_string(),
                        s.q1.to_string(),
                        s.median.to_string(),
                        s.q3.to_string(),
                        s.max.to_string(),
                    ]
                })
                .collect();
            let header = ["group", "n", "mean", "stddev", "se_mean", "min", "q1", "median", "q3", "max"];
            for r in &rows {
                println!("{}", r.join("\t"));
            }
            out.write_csv("describe.csv", &header, &rows)?;
            out.write_json("describe.json", &stats)?;
        }
    }
    out.commit()?;
    Ok(())
}
