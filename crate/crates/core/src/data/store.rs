use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense item index in `0..num_items`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u32);

impl ItemId {
    #[inline]
    pub fn new(index: usize) -> Self {
        ItemId(index as u32)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Dense user index in `0..num_users`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u32);

impl UserId {
    #[inline]
    pub fn new(index: usize) -> Self {
        UserId(index as u32)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Which held-out interaction is the target: the second-to-last
/// (validation) or the last (test).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub(crate) fn tag(self) -> u64 {
        match self {
            Split::Valid => 1,
            Split::Test => 2,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "valid" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}` (expected valid or test)")),
        }
    }
}

/// Chronological interaction sequences with leave-one-out split points:
/// for a sequence of length `N`, item `N-1` (0-based) is the test target,
/// item `N-2` the validation target, and items `0..N-2` are training data.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionStore {
    num_items: usize,
    sequences: Vec<Vec<ItemId>>,
    // sorted and deduplicated, for membership tests
    interacted: Vec<Vec<ItemId>>,
    user_labels: Vec<String>,
    item_labels: Vec<String>,
}

impl InteractionStore {
    /// Shortest sequence that still leaves a training item after the
    /// validation and test targets are held out.
    pub const MIN_SEQUENCE: usize = 3;

    /// A store whose labels are the dense indices themselves.
    pub fn from_sequences(num_items: usize, sequences: Vec<Vec<ItemId>>) -> Result<Self> {
        let user_labels = (0..sequences.len()).map(|u| u.to_string()).collect();
        let item_labels = (0..num_items).map(|i| i.to_string()).collect();
        Self::with_labels(sequences, user_labels, item_labels)
    }

    pub fn with_labels(
        sequences: Vec<Vec<ItemId>>,
        user_labels: Vec<String>,
        item_labels: Vec<String>,
    ) -> Result<Self> {
        let num_items = item_labels.len();
        if user_labels.len() != sequences.len() {
            return Err(Error::InvalidConfig(alloc::vec![format!(
                "{} user labels for {} sequences",
                user_labels.len(),
                sequences.len()
            )]));
        }
        let mut problems = Vec::new();
        for (u, seq) in sequences.iter().enumerate() {
            if seq.len() < Self::MIN_SEQUENCE {
                problems.push(format!(
                    "user {} has {} interactions, need at least {}",
                    user_labels[u],
                    seq.len(),
                    Self::MIN_SEQUENCE
                ));
            }
            if let Some(bad) = seq.iter().find(|i| i.index() >= num_items) {
                return Err(Error::UnknownItem {
                    item: bad.index(),
                    num_items,
                });
            }
        }
        if !problems.is_empty() {
            return Err(Error::InvalidConfig(problems));
        }
        let interacted = sequences
            .iter()
            .map(|s| {
                let mut v = s.clone();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        Ok(Self {
            num_items,
            sequences,
            interacted,
            user_labels,
            item_labels,
        })
    }

    pub fn num_users(&self) -> usize {
        self.sequences.len()
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_interactions(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum()
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        (0..self.sequences.len()).map(UserId::new)
    }

    /// The whole time-ordered sequence `S_u`.
    pub fn sequence(&self, user: UserId) -> &[ItemId] {
        &self.sequences[user.index()]
    }

    /// Distinct items of `S_u`, ascending.
    pub fn interacted(&self, user: UserId) -> &[ItemId] {
        &self.interacted[user.index()]
    }

    pub fn has_interacted(&self, user: UserId, item: ItemId) -> bool {
        self.interacted[user.index()].binary_search(&item).is_ok()
    }

    /// Items the user never interacted with.
    pub fn num_eligible_negatives(&self, user: UserId) -> usize {
        self.num_items - self.interacted[user.index()].len()
    }

    /// The training part of `S_u`: everything before the validation target.
    pub fn train_region(&self, user: UserId) -> &[ItemId] {
        let seq = self.sequence(user);
        &seq[..seq.len() - 2]
    }

    /// The input prefix and target item for a held-out split.
    pub fn eval_query(&self, user: UserId, split: Split) -> (&[ItemId], ItemId) {
        let seq = self.sequence(user);
        let target = match split {
            Split::Valid => seq.len() - 2,
            Split::Test => seq.len() - 1,
        };
        (&seq[..target], seq[target])
    }

    pub fn user_label(&self, user: UserId) -> &str {
        &self.user_labels[user.index()]
    }

    pub fn item_label(&self, item: ItemId) -> &str {
        &self.item_labels[item.index()]
    }

    pub fn user_labels(&self) -> &[String] {
        &self.user_labels
    }

    pub fn item_labels(&self) -> &[String] {
        &self.item_labels
    }

    pub fn find_user(&self, label: &str) -> Option<UserId> {
        self.user_labels.iter().position(|l| l == label).map(UserId::new)
    }
}

/// Delimited text layout. Columns are always `user, item, rating,
/// timestamp`; the rating must be present and numeric but is otherwise
/// ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextFormat {
    pub delimiter: String,
    pub has_header: bool,
}

impl TextFormat {
    /// `user::item::rating::timestamp`, as in the MovieLens dumps.
    pub fn movielens() -> Self {
        Self {
            delimiter: "::".into(),
            has_header: false,
        }
    }

    pub fn csv(has_header: bool) -> Self {
        Self {
            delimiter: ",".into(),
            has_header,
        }
    }
}

impl Default for TextFormat {
    fn default() -> Self {
        Self::movielens()
    }
}

/// Iterative k-core filter. Users need at least `min_user_interactions`
/// (never fewer than three), items at least `min_item_interactions`
/// (`0` or `1` disables the item side).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub min_user_interactions: usize,
    pub min_item_interactions: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_user_interactions: InteractionStore::MIN_SEQUENCE,
            min_item_interactions: 0,
        }
    }
}

impl FilterConfig {
    /// Five interactions per user and per item.
    pub fn five_core() -> Self {
        Self {
            min_user_interactions: 5,
            min_item_interactions: 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub records: usize,
    pub users_seen: usize,
    pub items_seen: usize,
    pub dropped_users: usize,
    pub dropped_items: usize,
    pub dropped_interactions: usize,
    /// Adjacent interactions of one user sharing a timestamp; their order
    /// is the file order.
    pub timestamp_ties: usize,
}

struct Record<'a> {
    item: &'a str,
    timestamp: i64,
}

/// Parses delimited interaction records into a store: ids are densified in
/// order of first appearance, each user's records are stably sorted by
/// timestamp, and the k-core filter is applied until nothing changes.
pub fn parse_interactions(
    text: &str,
    format: &TextFormat,
    filter: &FilterConfig,
) -> Result<(InteractionStore, LoadReport)> {
    if format.delimiter.is_empty() {
        return Err(Error::InvalidConfig(alloc::vec!["delimiter must not be empty".into()]));
    }
    let mut report = LoadReport::default();
    let mut user_index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut per_user: Vec<(&str, Vec<Record<'_>>)> = Vec::new();
    let mut items_seen: BTreeMap<&str, ()> = BTreeMap::new();

    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        if format.has_header && line_no == 1 {
            continue;
        }
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(format.delimiter.as_str()).map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "expected 4 fields (user, item, rating, timestamp), found {}",
                    fields.len()
                ),
            });
        }
        let (user, item, rating, timestamp) = (fields[0], fields[1], fields[2], fields[3]);
        if user.is_empty() || item.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty user or item id".into(),
            });
        }
        if rating.parse::<f64>().is_err() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("rating `{rating}` is not a number"),
            });
        }
        let timestamp: i64 = timestamp.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("timestamp `{timestamp}` is not an integer"),
        })?;
        report.records += 1;
        items_seen.insert(item, ());
        let slot = *user_index.entry(user).or_insert_with(|| {
            per_user.push((user, Vec::new()));
            per_user.len() - 1
        });
        per_user[slot].1.push(Record { item, timestamp });
    }
    report.users_seen = per_user.len();
    report.items_seen = items_seen.len();

    for (_, records) in per_user.iter_mut() {
        records.sort_by_key(|r| r.timestamp);
        report.timestamp_ties += records
            .windows(2)
            .filter(|w| w[0].timestamp == w[1].timestamp)
            .count();
    }

    // k-core filtering on labels
    let min_user = filter.min_user_interactions.max(InteractionStore::MIN_SEQUENCE);
    let min_item = filter.min_item_interactions;
    let mut alive: Vec<(&str, Vec<&str>)> = per_user
        .iter()
        .map(|(u, recs)| (*u, recs.iter().map(|r| r.item).collect()))
        .collect();
    loop {
        let before: usize = alive.iter().map(|(_, s)| s.len()).sum::<usize>() + alive.len();
        if min_item > 1 {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for (_, seq) in &alive {
                for item in seq {
                    *counts.entry(item).or_default() += 1;
                }
            }
            for (_, seq) in alive.iter_mut() {
                seq.retain(|item| counts[item] >= min_item);
            }
        }
        alive.retain(|(_, seq)| seq.len() >= min_user);
        let after: usize = alive.iter().map(|(_, s)| s.len()).sum::<usize>() + alive.len();
        if after == before {
            break;
        }
    }

    let mut item_ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut item_labels: Vec<String> = Vec::new();
    let mut user_labels = Vec::with_capacity(alive.len());
    let mut sequences = Vec::with_capacity(alive.len());
    for (user, seq) in &alive {
        user_labels.push(user.to_string());
        sequences.push(
            seq.iter()
                .map(|item| {
                    let id = *item_ids.entry(item).or_insert_with(|| {
                        item_labels.push(item.to_string());
                        item_labels.len() - 1
                    });
                    ItemId::new(id)
                })
                .collect(),
        );
    }
    let kept_interactions: usize = sequences.iter().map(Vec::len).sum();
    report.dropped_users = report.users_seen - user_labels.len();
    report.dropped_items = report.items_seen - item_labels.len();
    report.dropped_interactions = report.records - kept_interactions;

    let store = InteractionStore::with_labels(sequences, user_labels, item_labels)?;
    Ok((store, report))
}
