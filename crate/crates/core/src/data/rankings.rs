use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result, Violation};
use crate::types::{validate_ranked_list, Dataset, ItemId, RankedList, UserId};

/// Two-way mapping between external id tokens and dense indices, one table
/// for users and one for items.
///
/// When every token of a kind is a canonical non-negative integer, the
/// token is its own index and the table covers `0..=max`. Otherwise tokens
/// are indexed in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdMap {
    users: Labels,
    items: Labels,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Labels {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Labels {
    fn new(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i as u32).is_some() {
                return Err(Error::argument(format!("id '{n}' mapped twice")));
            }
        }
        Ok(Labels { names, index })
    }

    fn identity(n: usize) -> Self {
        Labels::new((0..n).map(|i| i.to_string()).collect()).expect("distinct")
    }

    /// Builds the table for one kind of token. `hint` is a declared size.
    fn assign(tokens: &BTreeSet<&str>, hint: Option<usize>, what: &str) -> Result<Self> {
        let numeric: Option<Vec<u32>> = tokens.iter().map(|t| canonical_index(t)).collect();
        match numeric {
            Some(ids) => {
                let needed = ids.iter().max().map_or(0, |&m| m as usize + 1);
                let size = match hint {
                    Some(h) if h < needed => {
                        return Err(Error::argument(format!("{what} id {} exceeds declared count {h}", needed - 1)))
                    }
                    Some(h) => h,
                    None => needed,
                };
                Ok(Labels::identity(size))
            }
            None if hint.is_some() => Err(Error::argument(format!(
                "declared {what} count requires integer {what} ids"
            ))),
            None => Labels::new(tokens.iter().map(|t| t.to_string()).collect()),
        }
    }
}

/// `Some(n)` for tokens written exactly as `n.to_string()`.
fn canonical_index(token: &str) -> Option<u32> {
    let n: u32 = token.parse().ok()?;
    (n.to_string() == token).then_some(n)
}

impl IdMap {
    /// Tokens `"0".."n-1"` and `"0".."m-1"`.
    pub fn identity(num_users: usize, num_items: usize) -> Self {
        IdMap {
            users: Labels::identity(num_users),
            items: Labels::identity(num_items),
        }
    }

    pub fn num_users(&self) -> usize {
        self.users.names.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.names.len()
    }

    pub fn user(&self, token: &str) -> Option<UserId> {
        self.users.index.get(token).map(|&i| UserId(i))
    }

    pub fn item(&self, token: &str) -> Option<ItemId> {
        self.items.index.get(token).map(|&i| ItemId(i))
    }

    pub fn user_label(&self, user: UserId) -> &str {
        &self.users.names[user.index()]
    }

    pub fn item_label(&self, item: ItemId) -> &str {
        &self.items.names[item.index()]
    }

    /// `user<TAB>token` and `item<TAB>token` lines in index order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for n in &self.users.names {
            let _ = writeln!(out, "user\t{n}");
        }
        for n in &self.items.names {
            let _ = writeln!(out, "item\t{n}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut users = Vec::new();
        let mut items = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let parse_err = || Error::Parse {
                line: i + 1,
                message: "expected 'user<TAB>id' or 'item<TAB>id'".into(),
            };
            let (kind, token) = line.split_once('\t').ok_or_else(parse_err)?;
            match kind {
                "user" => users.push(token.to_string()),
                "item" => items.push(token.to_string()),
                _ => return Err(parse_err()),
            }
        }
        Ok(IdMap {
            users: Labels::new(users)?,
            items: Labels::new(items)?,
        })
    }
}

struct Record<'a> {
    line: usize,
    user: &'a str,
    items: Vec<&'a str>,
}

/// Reads `#! users=N items=M`.
fn parse_directive(rest: &str, line: usize) -> Result<(Option<usize>, Option<usize>)> {
    let (mut users, mut items) = (None, None);
    for field in rest.split_whitespace() {
        let bad = || Error::Parse {
            line,
            message: format!("bad directive field '{field}'"),
        };
        let (k, v) = field.split_once('=').ok_or_else(bad)?;
        let v: usize = v.parse().map_err(|_| bad())?;
        match k {
            "users" => users = Some(v),
            "items" => items = Some(v),
            _ => return Err(bad()),
        }
    }
    Ok((users, items))
}

/// Parses `user<TAB>item,item,...` records. Blank lines and `#` comments
/// are skipped; a `#! users=N items=M` line declares the universe sizes.
pub fn parse_rankings(text: &str) -> Result<(Dataset, IdMap)> {
    let mut records = Vec::new();
    let (mut user_hint, mut item_hint) = (None, None);
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix("#!") {
            (user_hint, item_hint) = parse_directive(rest, line)?;
            continue;
        }
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (user, list) = raw.split_once('\t').ok_or_else(|| Error::Parse {
            line,
            message: "expected 'user<TAB>item,item,...'".into(),
        })?;
        let user = user.trim();
        if user.is_empty() {
            return Err(Error::Parse {
                line,
                message: "missing user id".into(),
            });
        }
        let list = list.trim();
        if list.is_empty() {
            return Err(Error::Validation {
                line: Some(line),
                violation: Violation::Empty,
            });
        }
        let items: Vec<&str> = list.split(',').map(str::trim).collect();
        if items.iter().any(|t| t.is_empty()) {
            return Err(Error::Parse {
                line,
                message: "empty item id".into(),
            });
        }
        records.push(Record { line, user, items });
    }
    let user_tokens: BTreeSet<&str> = records.iter().map(|r| r.user).collect();
    let item_tokens: BTreeSet<&str> = records.iter().flat_map(|r| r.items.iter().copied()).collect();
    let ids = IdMap {
        users: Labels::assign(&user_tokens, user_hint, "user")?,
        items: Labels::assign(&item_tokens, item_hint, "item")?,
    };
    let mut seen_users = HashMap::new();
    let mut lists = Vec::with_capacity(records.len());
    for r in records {
        let user = ids.user(r.user).expect("mapped");
        if let Some(first) = seen_users.insert(user, r.line) {
            return Err(Error::Parse {
                line: r.line,
                message: format!("user {} already has a list on line {first}", r.user),
            });
        }
        let items: Vec<ItemId> = r.items.iter().map(|t| ids.item(t).expect("mapped")).collect();
        validate_ranked_list(&items, ids.num_items()).map_err(|violation| Error::Validation {
            line: Some(r.line),
            violation,
        })?;
        lists.push(RankedList { user, items });
    }
    let data = Dataset::new(ids.num_users(), ids.num_items(), lists)?;
    Ok((data, ids))
}

/// Writes a dataset with dense integer ids, led by a size directive so the
/// universe sizes survive a round trip.
pub fn write_rankings(data: &Dataset) -> String {
    let mut out = format!("#! users={} items={}\n", data.num_users(), data.num_items());
    for list in data.lists() {
        let items: Vec<String> = list.items.iter().map(|y| y.to_string()).collect();
        let _ = writeln!(out, "{}\t{}", list.user, items.join(","));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rating {
    pub line: usize,
    pub user: String,
    pub item: String,
    pub rating: f64,
}

/// Parses `user<TAB>item<TAB>rating` lines; blank lines and `#` comments
/// are skipped.
pub fn parse_ratings(text: &str) -> Result<Vec<Rating>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
        let bad = |message: String| Error::Parse { line, message };
        if fields.len() != 3 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(bad("expected 'user<TAB>item<TAB>rating'".into()));
        }
        let rating: f64 = fields[2]
            .parse()
            .map_err(|_| bad(format!("rating '{}' is not a number", fields[2])))?;
        if !rating.is_finite() {
            return Err(bad(format!("rating '{}' is not finite", fields[2])));
        }
        out.push(Rating {
            line,
            user: fields[0].to_string(),
            item: fields[1].to_string(),
            rating,
        });
    }
    Ok(out)
}

/// One list per user: items by rating descending, ties by ascending item
/// index.
pub fn ratings_to_rankings(ratings: &[Rating]) -> Result<(Dataset, IdMap)> {
    let user_tokens: BTreeSet<&str> = ratings.iter().map(|r| r.user.as_str()).collect();
    let item_tokens: BTreeSet<&str> = ratings.iter().map(|r| r.item.as_str()).collect();
    let ids = IdMap {
        users: Labels::assign(&user_tokens, None, "user")?,
        items: Labels::assign(&item_tokens, None, "item")?,
    };
    let mut by_user: BTreeMap<UserId, Vec<(ItemId, f64)>> = BTreeMap::new();
    let mut seen = HashMap::new();
    for r in ratings {
        let user = ids.user(&r.user).expect("mapped");
        let item = ids.item(&r.item).expect("mapped");
        if let Some(first) = seen.insert((user, item), r.line) {
            return Err(Error::Parse {
                line: r.line,
                message: format!("user {} already rated item {} on line {first}", r.user, r.item),
            });
        }
        by_user.entry(user).or_default().push((item, r.rating));
    }
    let lists = by_user
        .into_iter()
        .map(|(user, mut rated)| {
            rated.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            RankedList {
                user,
                items: rated.into_iter().map(|(y, _)| y).collect(),
            }
        })
        .collect();
    let data = Dataset::new(ids.num_users(), ids.num_items(), lists)?;
    Ok((data, ids))
}
