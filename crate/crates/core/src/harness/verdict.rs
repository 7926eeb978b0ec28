use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::ComponentId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Sfi,
    Mp,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Sfi => "sfi",
            Backend::Mp => "mp",
        })
    }
}

impl FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sfi" => Ok(Backend::Sfi),
            "mp" => Ok(Backend::Mp),
            _ => Err(format!("unknown back end `{s}`")),
        }
    }
}

/// Which replacement strategy the security test uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Replace every component of the target trace, one after the other.
    EachComponent,
    /// Replace all components with undefined behavior at once.
    AllUndefined,
}

impl Variant {
    pub fn number(self) -> u8 {
        match self {
            Variant::EachComponent => 1,
            Variant::AllUndefined => 2,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "1" => Ok(Variant::EachComponent),
            "2" => Ok(Variant::AllUndefined),
            _ => Err(format!("unknown variant `{s}`")),
        }
    }
}

/// Everything needed to reproduce and inspect a failing test.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub seed: u64,
    /// The relation or assertion that did not hold.
    pub relation: String,
    pub program: String,
    pub target_trace: String,
    pub source_trace: String,
    pub replaced: Vec<ComponentId>,
    /// Minimized program that still fails, when shrinking ran.
    pub shrunk: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum TestVerdict {
    Pass,
    Fail(Box<Counterexample>),
    Discard { reason: String },
}

impl TestVerdict {
    pub fn discard(reason: impl Into<String>) -> TestVerdict {
        TestVerdict::Discard {
            reason: reason.into(),
        }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, TestVerdict::Pass)
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, TestVerdict::Fail(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedVerdict {
    pub seed: u64,
    #[serde(flatten)]
    pub verdict: TestVerdict,
    /// Where the counterexample was written, if anywhere.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample_path: Option<String>,
}

/// Batches with a larger share of discards say more about the generator than
/// about the compiler.
pub const DISCARD_LIMIT: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub test: String,
    pub seeds: usize,
    pub passed: usize,
    pub failed: usize,
    pub discarded: usize,
    pub discard_rate: f64,
    /// Set when `discard_rate` exceeds [`DISCARD_LIMIT`].
    pub generator_flag: bool,
    pub discard_reasons: BTreeMap<String, usize>,
    /// Failing relations and how often each failed.
    pub fail_relations: BTreeMap<String, usize>,
    /// Every verdict that is not a pass.
    pub verdicts: Vec<SeedVerdict>,
}

impl BatchReport {
    pub fn from_verdicts(test: impl Into<String>, all: Vec<(u64, TestVerdict)>) -> BatchReport {
        let seeds = all.len();
        let mut r = BatchReport {
            test: test.into(),
            seeds,
            passed: 0,
            failed: 0,
            discarded: 0,
            discard_rate: 0.0,
            generator_flag: false,
            discard_reasons: BTreeMap::new(),
            fail_relations: BTreeMap::new(),
            verdicts: Vec::new(),
        };
        for (seed, v) in all {
            match &v {
                TestVerdict::Pass => {
                    r.passed += 1;
                    continue;
                }
                TestVerdict::Fail(cx) => {
                    r.failed += 1;
                    *r.fail_relations.entry(cx.relation.clone()).or_default() += 1;
                }
                TestVerdict::Discard { reason } => {
                    r.discarded += 1;
                    *r.discard_reasons.entry(reason.clone()).or_default() += 1;
                }
            }
            r.verdicts.push(SeedVerdict {
                seed,
                verdict: v,
                counterexample_path: None,
            });
        }
        if seeds > 0 {
            r.discard_rate = r.discarded as f64 / seeds as f64;
        }
        r.generator_flag = r.discard_rate > DISCARD_LIMIT;
        r
    }

    /// No failures and a usable discard rate.
    pub fn ok(&self) -> bool {
        self.failed == 0 && !self.generator_flag
    }

    pub fn failures(&self) -> impl Iterator<Item = (u64, &Counterexample)> {
        self.verdicts.iter().filter_map(|v| match &v.verdict {
            TestVerdict::Fail(cx) => Some((v.seed, cx.as_ref())),
            _ => None,
        })
    }
}

/// Runs `test` on seeds `first..first + count` in parallel, in the calling
/// thread pool, and collects the verdicts in seed order.
pub fn run_batch<F>(name: &str, first: u64, count: u64, test: F) -> BatchReport
where
    F: Fn(u64) -> TestVerdict + Sync,
{
    let all: Vec<(u64, TestVerdict)> = (first..first + count)
        .into_par_iter()
        .map(|s| (s, test(s)))
        .collect();
    BatchReport::from_verdicts(name, all)
}

/// [`run_batch`] on a dedicated pool of `jobs` worker threads, or on the
/// global pool when `jobs` is `None`.
pub fn run_batch_jobs<F>(
    name: &str,
    first: u64,
    count: u64,
    jobs: Option<usize>,
    test: F,
) -> Result<BatchReport, rayon::ThreadPoolBuildError>
where
    F: Fn(u64) -> TestVerdict + Sync + Send,
{
    match jobs {
        None => Ok(run_batch(name, first, count, test)),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            Ok(pool.install(|| run_batch(name, first, count, test)))
        }
    }
}
